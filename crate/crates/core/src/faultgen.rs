//! Synthetic labeled data anchored on the reference sample database.
//!
//! Each class is modelled as its reference centroid plus independent
//! Gaussian noise per channel. Draws come from [`SeededRng`] (ChaCha8 with
//! the Marsaglia polar transform), so a `(spec, seed)` pair pins the output
//! down to the bit.

use crate::dataset::{table1_fixture, Dataset, FaultClass, LabeledSample, CLASS_COUNT, INPUT_DIM};
use crate::error::{Error, Result};
use crate::rng::{sub_seed, SeededRng};

/// Default per-channel noise, as a fraction of the centroid.
pub const DEFAULT_RELATIVE_NOISE: f64 = 0.01;

/// Test-set composition used for the frequency report, in class-code order.
/// The counts add up to 66; the reference table prints a total of 67.
pub const REFERENCE_TEST_COUNTS: [usize; CLASS_COUNT] = [11, 12, 15, 17, 3, 3, 5];

/// 800 training samples split as evenly as possible: 800 = 7 * 114 + 2, so
/// the first two classes get one extra sample.
pub const PAPER_TRAIN_COUNTS: [usize; CLASS_COUNT] = [115, 115, 114, 114, 114, 114, 114];

const TRAIN_STREAM: u64 = 0x74_7261_696e;
const TEST_STREAM: u64 = 0x7465_7374;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSignature {
    pub label: FaultClass,
    pub centroid: [f64; INPUT_DIM],
    /// Per-channel noise standard deviation.
    pub sigma: [f64; INPUT_DIM],
    /// Reference rows the centroid was averaged from; sampled from directly
    /// in two-component mode.
    pub components: Vec<[f64; INPUT_DIM]>,
}

impl ClassSignature {
    fn validate(&self) -> Result<()> {
        let bad = |v: &f64| !v.is_finite() || *v < 0.0;
        if self.centroid.iter().any(bad) || self.sigma.iter().any(bad) {
            return Err(Error::usage(format!(
                "signature for {} must have finite, non-negative centroid and sigma",
                self.label
            )));
        }
        if self.components.iter().flatten().any(bad) {
            return Err(Error::usage(format!(
                "signature components for {} must be finite and non-negative",
                self.label
            )));
        }
        Ok(())
    }
}

/// Signatures with the default 1% relative noise.
pub fn default_signatures() -> Vec<ClassSignature> {
    signatures_with_noise(DEFAULT_RELATIVE_NOISE)
}

/// Per class: centroid = mean of its reference rows, sigma = `relative_noise * centroid`.
pub fn signatures_with_noise(relative_noise: f64) -> Vec<ClassSignature> {
    let table = table1_fixture();
    FaultClass::ALL
        .iter()
        .map(|&label| {
            let rows: Vec<[f64; INPUT_DIM]> = table
                .iter()
                .filter(|s| s.label == label)
                .map(|s| s.sample.to_array())
                .collect();
            // exact sums in micro-units, one rounding per centroid
            let mut micro = [0i64; INPUT_DIM];
            for row in &rows {
                for (m, v) in micro.iter_mut().zip(row) {
                    *m += (v * 1e6).round() as i64;
                }
            }
            let centroid = micro.map(|m| m as f64 / (rows.len() as f64 * 1e6));
            ClassSignature {
                label,
                centroid,
                sigma: centroid.map(|c| relative_noise * c),
                components: rows,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub signatures: Vec<ClassSignature>,
    /// Samples per class, in class-code order.
    pub counts: [usize; CLASS_COUNT],
    pub seed: u64,
    /// Clamp drawn values at zero.
    pub clamp_negative: bool,
    /// Centre each draw on one of the class's reference rows (chosen with
    /// equal probability) instead of on the centroid.
    pub two_component: bool,
}

impl GeneratorSpec {
    pub fn new(counts: [usize; CLASS_COUNT], seed: u64) -> Self {
        Self {
            signatures: default_signatures(),
            counts,
            seed,
            clamp_negative: true,
            two_component: false,
        }
    }

    pub fn with_relative_noise(mut self, relative_noise: f64) -> Self {
        self.signatures = signatures_with_noise(relative_noise);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.signatures.len() != CLASS_COUNT {
            return Err(Error::usage(format!(
                "expected {CLASS_COUNT} class signatures, got {}",
                self.signatures.len()
            )));
        }
        for class in FaultClass::ALL {
            let n = self.signatures.iter().filter(|s| s.label == class).count();
            if n != 1 {
                return Err(Error::usage(format!("expected one signature for {class}, got {n}")));
            }
        }
        for sig in &self.signatures {
            sig.validate()?;
            if self.two_component && sig.components.is_empty() {
                return Err(Error::usage(format!(
                    "two-component mode needs reference rows for {}",
                    sig.label
                )));
            }
        }
        Ok(())
    }

    fn signature(&self, class: FaultClass) -> &ClassSignature {
        self.signatures
            .iter()
            .find(|s| s.label == class)
            .expect("validated: one signature per class")
    }

    fn summary(&self) -> String {
        format!(
            "faultgen seed={} counts={:?}{}",
            self.seed,
            self.counts,
            if self.two_component { " two-component" } else { "" }
        )
    }
}

/// Draws `counts[c]` samples for each class, grouped by class in code order.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let mut samples = Vec::with_capacity(spec.counts.iter().sum());
    for class in FaultClass::ALL {
        let sig = spec.signature(class);
        for _ in 0..spec.counts[class.index()] {
            let center = if spec.two_component {
                sig.components[rng.below(sig.components.len())]
            } else {
                sig.centroid
            };
            let mut values = [0.0; INPUT_DIM];
            for k in 0..INPUT_DIM {
                let v = center[k] + sig.sigma[k] * rng.standard_normal();
                values[k] = if spec.clamp_negative { v.max(0.0) } else { v };
            }
            samples.push(LabeledSample::new(class, values));
        }
    }
    Ok(Dataset::new(samples, spec.summary()))
}

/// 800 training samples ([`PAPER_TRAIN_COUNTS`]) and a 66-sample test set
/// ([`REFERENCE_TEST_COUNTS`]) at the default noise level, drawn from independent
/// sub-seeds of `seed`.
pub fn generate_paper_scale(seed: u64) -> Result<(Dataset, Dataset)> {
    generate_paper_scale_with_noise(seed, DEFAULT_RELATIVE_NOISE)
}

pub fn generate_paper_scale_with_noise(seed: u64, relative_noise: f64) -> Result<(Dataset, Dataset)> {
    let template = GeneratorSpec::new(PAPER_TRAIN_COUNTS, seed).with_relative_noise(relative_noise);
    let (mut train, mut test) = generate_train_test(&template, REFERENCE_TEST_COUNTS)?;
    train.provenance = format!("paper-scale train seed={seed} noise={relative_noise}");
    test.provenance = format!("paper-scale test seed={seed} noise={relative_noise}");
    Ok((train, test))
}

/// Draws a training set with `spec.counts` and a test set with
/// `test_counts`, each from its own sub-seed of `spec.seed`.
pub fn generate_train_test(spec: &GeneratorSpec, test_counts: [usize; CLASS_COUNT]) -> Result<(Dataset, Dataset)> {
    let train_spec = GeneratorSpec {
        seed: sub_seed(spec.seed, TRAIN_STREAM),
        ..spec.clone()
    };
    let test_spec = GeneratorSpec {
        seed: sub_seed(spec.seed, TEST_STREAM),
        counts: test_counts,
        ..spec.clone()
    };
    Ok((generate(&train_spec)?, generate(&test_spec)?))
}
