//! Turning network outputs into fault decisions, and scoring those decisions.

use std::fmt;
use std::fmt::Write as _;

use crate::dataset::{one_hot, to_input_vector, Dataset, FaultClass, PhaseSample, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::neuralnet::Network;

/// Anything that maps a six-channel input vector to seven class scores.
pub trait ScoreModel {
    fn scores(&self, input: &[f64]) -> Result<Vec<f64>>;
}

impl ScoreModel for Network {
    fn scores(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.predict(input)
    }
}

impl<M: ScoreModel + ?Sized> ScoreModel for &M {
    fn scores(&self, input: &[f64]) -> Result<Vec<f64>> {
        (**self).scores(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionMode {
    /// Highest output wins; ties go to the lowest class code.
    Argmax,
    /// Scan classes in code order and take the first output `>= threshold`.
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub mode: DecisionMode,
    /// Only consulted in [`DecisionMode::Threshold`].
    pub threshold: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        Self::argmax()
    }
}

impl DecisionRule {
    pub fn argmax() -> Self {
        Self {
            mode: DecisionMode::Argmax,
            threshold: 0.5,
        }
    }

    pub fn threshold(threshold: f64) -> Result<Self> {
        let rule = Self {
            mode: DecisionMode::Threshold,
            threshold,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::usage(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Class(FaultClass),
    /// No output reached the threshold.
    Rejected,
}

impl Prediction {
    pub fn class(self) -> Option<FaultClass> {
        match self {
            Prediction::Class(c) => Some(c),
            Prediction::Rejected => None,
        }
    }

    /// Class code, or 0 for a rejection.
    pub fn code(self) -> u8 {
        self.class().map_or(0, FaultClass::code)
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Class(c) => c.fmt(f),
            Prediction::Rejected => f.write_str("Rejected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub predicted: Prediction,
    pub outputs: Vec<f64>,
    /// Top output minus runner-up.
    pub margin: f64,
}

impl ClassificationResult {
    pub fn max_activation(&self) -> f64 {
        self.outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Applies `rule` to a seven-entry output vector.
pub fn decide(outputs: &[f64], rule: &DecisionRule) -> Result<ClassificationResult> {
    if outputs.len() != CLASS_COUNT {
        return Err(Error::Dimension {
            layer: 0,
            reason: format!("classifier must produce {CLASS_COUNT} outputs, got {}", outputs.len()),
        });
    }
    if outputs.iter().any(|v| v.is_nan()) {
        return Err(Error::usage("classifier produced NaN"));
    }
    let predicted = match rule.mode {
        DecisionMode::Argmax => {
            let mut best = 0;
            for (i, &v) in outputs.iter().enumerate().skip(1) {
                if v > outputs[best] {
                    best = i;
                }
            }
            Prediction::Class(FaultClass::from_index(best).expect("index < 7"))
        }
        DecisionMode::Threshold => {
            rule.validate()?;
            outputs
                .iter()
                .position(|&v| v >= rule.threshold)
                .and_then(FaultClass::from_index)
                .map_or(Prediction::Rejected, Prediction::Class)
        }
    };
    let mut sorted = outputs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(ClassificationResult {
        predicted,
        outputs: outputs.to_vec(),
        margin: sorted[0] - sorted[1],
    })
}

pub fn classify<M: ScoreModel + ?Sized>(
    model: &M,
    sample: &PhaseSample,
    rule: &DecisionRule,
) -> Result<ClassificationResult> {
    let outputs = model.scores(&to_input_vector(sample))?;
    decide(&outputs, rule)
}

/// Classifies every sample in order.
pub fn classify_dataset<M: ScoreModel + ?Sized>(
    model: &M,
    data: &Dataset,
    rule: &DecisionRule,
) -> Result<Vec<ClassificationResult>> {
    data.iter().map(|s| classify(model, &s.sample, rule)).collect()
}

/// Rows are true classes, columns predicted classes, both in code order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; CLASS_COUNT]; CLASS_COUNT],
    /// Rejections per true class (threshold mode only).
    pub rejected: [usize; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: FaultClass, predicted: Prediction) {
        match predicted {
            Prediction::Class(p) => self.counts[truth.index()][p.index()] += 1,
            Prediction::Rejected => self.rejected[truth.index()] += 1,
        }
    }

    pub fn trace(&self) -> usize {
        (0..CLASS_COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// All recorded samples, rejections included.
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum::<usize>() + self.rejected.iter().sum::<usize>()
    }

    /// Samples of each true class, rejections included.
    pub fn row_totals(&self) -> [usize; CLASS_COUNT] {
        std::array::from_fn(|i| self.counts[i].iter().sum::<usize>() + self.rejected[i])
    }

    /// How often each class was predicted.
    pub fn column_sums(&self) -> [usize; CLASS_COUNT] {
        std::array::from_fn(|j| self.counts.iter().map(|row| row[j]).sum())
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.trace() as f64 / total as f64,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..CLASS_COUNT).all(|i| (0..CLASS_COUNT).all(|j| i == j || self.counts[i][j] == 0))
            && self.rejected.iter().all(|&r| r == 0)
    }

    /// Seven lines of seven comma-separated counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Confusion matrix and accuracy of `model` over `test`.
pub fn evaluate<M: ScoreModel + ?Sized>(
    model: &M,
    test: &Dataset,
    rule: &DecisionRule,
) -> Result<(ConfusionMatrix, f64)> {
    if test.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty test set"));
    }
    let mut matrix = ConfusionMatrix::default();
    for s in test {
        let result = classify(model, &s.sample, rule)?;
        matrix.record(s.label, result.predicted);
    }
    let accuracy = matrix.accuracy();
    Ok((matrix, accuracy))
}

/// How many test samples were assigned to each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyReport {
    pub counts: [usize; CLASS_COUNT],
    pub rejected: usize,
    pub total: usize,
}

pub fn frequency_report(matrix: &ConfusionMatrix) -> FrequencyReport {
    let counts = matrix.column_sums();
    FrequencyReport {
        counts,
        rejected: matrix.rejected.iter().sum(),
        total: counts.iter().sum(),
    }
}

impl fmt::Display for FrequencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut text = String::new();
        writeln!(text, "{:<36}Frequency of classification", "Fault")?;
        for class in FaultClass::ALL {
            let label = format!("{} ({})", class.description(), class.code());
            writeln!(text, "{label:<36}{}", self.counts[class.index()])?;
        }
        if self.rejected > 0 {
            writeln!(text, "{:<36}{}", "Rejected", self.rejected)?;
        }
        writeln!(text, "{:<36}{}", "Total", self.total)?;
        f.write_str(&text)
    }
}

/// Target/output pairs over every output component of every sample, with
/// their Pearson correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub points: Vec<(f64, f64)>,
    pub r: f64,
    /// Set when either coordinate has zero variance; `r` is then 0.
    pub degenerate: bool,
}

impl RegressionFit {
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        let (r, degenerate) = pearson(&points);
        Self { points, r, degenerate }
    }

    /// `target,output` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,output\n");
        for (t, o) in &self.points {
            writeln!(out, "{t},{o}").unwrap();
        }
        out
    }
}

fn pearson(points: &[(f64, f64)]) -> (f64, bool) {
    let constant = |f: fn(&(f64, f64)) -> f64| points.iter().all(|p| f(p) == f(&points[0]));
    if points.is_empty() || constant(|p| p.0) || constant(|p| p.1) {
        return (0.0, true);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, true);
    }
    ((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), false)
}

pub fn regression_fit<M: ScoreModel + ?Sized>(model: &M, data: &Dataset) -> Result<RegressionFit> {
    if data.is_empty() {
        return Err(Error::usage("cannot fit a regression on an empty dataset"));
    }
    let mut points = Vec::with_capacity(data.len() * CLASS_COUNT);
    for s in data {
        let outputs = model.scores(&to_input_vector(&s.sample))?;
        let target = one_hot(s.label);
        if outputs.len() != target.len() {
            return Err(Error::Length {
                expected: target.len(),
                actual: outputs.len(),
            });
        }
        points.extend(target.into_iter().zip(outputs));
    }
    Ok(RegressionFit::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{table1_fixture, LabeledSample};

    /// Returns fixed outputs regardless of input.
    struct Constant(Vec<f64>);

    impl ScoreModel for Constant {
        fn scores(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    /// Perfect classifier: looks up the true class of each known sample.
    struct Oracle(Vec<LabeledSample>);

    impl ScoreModel for Oracle {
        fn scores(&self, input: &[f64]) -> Result<Vec<f64>> {
            let hit = self
                .0
                .iter()
                .find(|s| s.sample.to_array().as_slice() == input)
                .expect("oracle only answers for known samples");
            Ok(one_hot(hit.label))
        }
    }

    fn reference_test_set() -> Dataset {
        let counts = [11, 12, 15, 17, 3, 3, 5];
        let mut samples = Vec::new();
        for class in FaultClass::ALL {
            for k in 0..counts[class.index()] {
                samples.push(LabeledSample::new(class, [class.code() as f64, k as f64, 0., 0., 0., 0.]));
            }
        }
        Dataset::new(samples, "reference-test-set")
    }

    #[test]
    fn dominant_output_wins_in_both_modes() {
        let outputs = [0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
        for rule in [DecisionRule::argmax(), DecisionRule::threshold(0.5).unwrap()] {
            let r = decide(&outputs, &rule).unwrap();
            assert_eq!(r.predicted, Prediction::Class(FaultClass::NoFault));
            assert!((r.margin - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_outputs() {
        let outputs = [0.2; 7];
        let r = decide(&outputs, &DecisionRule::threshold(0.5).unwrap()).unwrap();
        assert_eq!(r.predicted, Prediction::Rejected);
        let r = decide(&outputs, &DecisionRule::argmax()).unwrap();
        assert_eq!(r.predicted, Prediction::Class(FaultClass::NoFault));
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn threshold_scans_in_code_order() {
        let outputs = [0.1, 0.6, 0.1, 0.9, 0.1, 0.1, 0.1];
        let r = decide(&outputs, &DecisionRule::threshold(0.5).unwrap()).unwrap();
        assert_eq!(r.predicted, Prediction::Class(FaultClass::Overload));
        let r = decide(&outputs, &DecisionRule::argmax()).unwrap();
        assert_eq!(r.predicted, Prediction::Class(FaultClass::LockedRotor));
    }

    #[test]
    fn rule_validation() {
        assert!(DecisionRule::threshold(0.0).is_err());
        assert!(DecisionRule::threshold(1.0).is_err());
        assert!(decide(&[0.5; 6], &DecisionRule::argmax()).is_err());
    }

    #[test]
    fn perfect_classifier_gives_diagonal() {
        let test = reference_test_set();
        let oracle = Oracle(test.samples.clone());
        let (m, acc) = evaluate(&oracle, &test, &DecisionRule::argmax()).unwrap();
        assert_eq!(acc, 1.0);
        assert!(m.is_diagonal());
        assert_eq!(std::array::from_fn::<_, 7, _>(|i| m.counts[i][i]), [11, 12, 15, 17, 3, 3, 5]);
        let report = frequency_report(&m);
        assert_eq!(report.counts, [11, 12, 15, 17, 3, 3, 5]);
        assert_eq!(report.total, 66);
        let text = report.to_string();
        assert!(text.contains("Locked rotor (4)"));
        assert!(text.trim_end().ends_with("Total                               66"));
    }

    #[test]
    fn constant_class_one_scores_eleven_of_66() {
        let stub = Constant(one_hot(FaultClass::NoFault));
        let (m, acc) = evaluate(&stub, &reference_test_set(), &DecisionRule::argmax()).unwrap();
        assert_eq!(acc, 11.0 / 66.0);
        assert_eq!(acc, m.trace() as f64 / m.total() as f64);
        assert_eq!(frequency_report(&m).counts, [66, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn rejections_counted_per_true_class() {
        let stub = Constant(vec![0.2; 7]);
        let test = reference_test_set();
        let (m, acc) = evaluate(&stub, &test, &DecisionRule::threshold(0.5).unwrap()).unwrap();
        assert_eq!(acc, 0.0);
        assert_eq!(m.rejected, [11, 12, 15, 17, 3, 3, 5]);
        assert_eq!(m.row_totals(), test.class_counts());
        assert_eq!(m.total(), 66);
        assert_eq!(frequency_report(&m).rejected, 66);
    }

    #[test]
    fn empty_matrix_report_is_zero() {
        let report = frequency_report(&ConfusionMatrix::default());
        assert_eq!(report.counts, [0; 7]);
        assert_eq!(report.total, 0);
    }

    #[test]
    fn empty_test_set_is_usage_error() {
        let stub = Constant(vec![0.2; 7]);
        assert!(matches!(
            evaluate(&stub, &Dataset::default(), &DecisionRule::argmax()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn matrix_csv_has_seven_rows() {
        let mut m = ConfusionMatrix::default();
        m.record(FaultClass::Overload, Prediction::Class(FaultClass::GroundFault));
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert_eq!(csv.lines().nth(1), Some("0,0,1,0,0,0,0"));
    }

    #[test]
    fn regression_of_perfect_outputs_is_one() {
        let data = table1_fixture();
        let fit = regression_fit(&Oracle(data.samples.clone()), &data).unwrap();
        assert_eq!(fit.points.len(), 14 * 7);
        assert!((fit.r - 1.0).abs() < 1e-12);
        assert!(!fit.degenerate);
        assert!(fit.to_csv().starts_with("target,output\n"));
    }

    #[test]
    fn regression_degenerate_cases() {
        let data = table1_fixture();
        let fit = regression_fit(&Constant(vec![0.3; 7]), &data).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.r, 0.0);
        let fit = RegressionFit::from_points(vec![(1.0, 0.2), (1.0, 0.9)]);
        assert!(fit.degenerate);
    }
}
