//! Labeled three-phase samples, the CSV format they travel in, and the
//! train/test split.
//!
//! Class codes are 1-based everywhere outside the network (CSV files,
//! reports, the wire protocol). The network's output index is `code - 1`;
//! [`one_hot`] and [`FaultClass::from_index`] are the only crossings.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Exact header line of the dataset CSV format.
pub const CSV_HEADER: &str = "class,v1,v2,v3,i1,i2,i3";

/// Number of measurement channels per sample.
pub const INPUT_DIM: usize = 6;

/// Number of fault classes.
pub const CLASS_COUNT: usize = 7;

/// One measurement of the three phase voltages and currents, in the
/// (scaled, dimensionless) units the sensors report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

impl PhaseSample {
    pub const ZERO: PhaseSample = PhaseSample::from_array([0.0; INPUT_DIM]);

    pub const fn from_array(values: [f64; INPUT_DIM]) -> Self {
        let [v1, v2, v3, i1, i2, i3] = values;
        Self {
            v1,
            v2,
            v3,
            i1,
            i2,
            i3,
        }
    }

    /// Builds a sample, rejecting negative or non-finite channels.
    pub fn try_from_slice(values: &[f64]) -> Result<Self> {
        let values: [f64; INPUT_DIM] = values.try_into().map_err(|_| Error::Length {
            expected: INPUT_DIM,
            actual: values.len(),
        })?;
        let sample = Self::from_array(values);
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in ["v1", "v2", "v3", "i1", "i2", "i3"]
            .iter()
            .zip(self.to_array())
        {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::usage(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Network input order: `[v1, v2, v3, i1, i2, i3]`.
    pub fn to_array(&self) -> [f64; INPUT_DIM] {
        [self.v1, self.v2, self.v3, self.i1, self.i2, self.i3]
    }
}

/// Network input vector for a sample, `[v1, v2, v3, i1, i2, i3]`.
pub fn to_input_vector(sample: &PhaseSample) -> Vec<f64> {
    sample.to_array().to_vec()
}

/// The seven motor conditions, with their external 1-based codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultClass {
    NoFault = 1,
    Overload = 2,
    GroundFault = 3,
    LockedRotor = 4,
    UnbalancedVoltage = 5,
    SinglePhasingUnderVoltage = 6,
    Overvoltage = 7,
}

impl FaultClass {
    /// All classes in code order.
    pub const ALL: [FaultClass; CLASS_COUNT] = [
        FaultClass::NoFault,
        FaultClass::Overload,
        FaultClass::GroundFault,
        FaultClass::LockedRotor,
        FaultClass::UnbalancedVoltage,
        FaultClass::SinglePhasingUnderVoltage,
        FaultClass::Overvoltage,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// 0-based output index.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultClass::NoFault => "NoFault",
            FaultClass::Overload => "Overload",
            FaultClass::GroundFault => "GroundFault",
            FaultClass::LockedRotor => "LockedRotor",
            FaultClass::UnbalancedVoltage => "UnbalancedVoltage",
            FaultClass::SinglePhasingUnderVoltage => "SinglePhasingUnderVoltage",
            FaultClass::Overvoltage => "Overvoltage",
        }
    }

    /// Human-readable label used in the frequency report.
    pub fn description(self) -> &'static str {
        match self {
            FaultClass::NoFault => "No fault",
            FaultClass::Overload => "Overload",
            FaultClass::GroundFault => "Ground fault",
            FaultClass::LockedRotor => "Locked rotor",
            FaultClass::UnbalancedVoltage => "Unbalanced voltage",
            FaultClass::SinglePhasingUnderVoltage => "Single phasing, under voltage",
            FaultClass::Overvoltage => "Overvoltage",
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name(), self.code())
    }
}

/// Target vector with 1.0 at `label.index()` and 0.0 elsewhere.
pub fn one_hot(label: FaultClass) -> Vec<f64> {
    let mut target = vec![0.0; CLASS_COUNT];
    target[label.index()] = 1.0;
    target
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub sample: PhaseSample,
    pub label: FaultClass,
}

impl LabeledSample {
    pub fn new(label: FaultClass, values: [f64; INPUT_DIM]) -> Self {
        Self {
            sample: PhaseSample::from_array(values),
            label,
        }
    }
}

/// An ordered collection of labeled samples plus a note on where it came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, provenance: impl Into<String>) -> Self {
        Self {
            samples,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    /// Number of samples per class, indexed by `FaultClass::index()`.
    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// Parses the dataset CSV format. `source_name` only labels errors.
    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == CSV_HEADER => {}
            Some((_, header)) => {
                return Err(Error::parse(
                    source_name,
                    1,
                    format!("expected header `{CSV_HEADER}`, found `{header}`"),
                ))
            }
            None => return Err(Error::parse(source_name, 1, "missing header")),
        }

        let mut samples = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + INPUT_DIM {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected {} fields, found {}", 1 + INPUT_DIM, fields.len()),
                ));
            }
            let label = fields[0]
                .parse::<u8>()
                .ok()
                .and_then(FaultClass::from_code)
                .ok_or_else(|| {
                    Error::parse(
                        source_name,
                        line_no,
                        format!("class must be an integer 1-7, found `{}`", fields[0]),
                    )
                })?;
            let mut values = [0.0; INPUT_DIM];
            for (slot, field) in values.iter_mut().zip(&fields[1..]) {
                *slot = parse_measurement(field)
                    .map_err(|reason| Error::parse(source_name, line_no, reason))?;
            }
            samples.push(LabeledSample::new(label, values));
        }
        Ok(Self::new(samples, source_name))
    }

    /// Serializes with shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        self.render_csv(None)
    }

    /// Serializes with a fixed number of decimals per measurement.
    pub fn to_csv_fixed(&self, decimals: usize) -> String {
        self.render_csv(Some(decimals))
    }

    fn render_csv(&self, decimals: Option<usize>) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            write!(out, "{}", s.label.code()).unwrap();
            for v in s.sample.to_array() {
                match decimals {
                    Some(d) => write!(out, ",{v:.d$}").unwrap(),
                    None => write!(out, ",{v}").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses one non-negative finite decimal channel value.
pub(crate) fn parse_measurement(field: &str) -> std::result::Result<f64, String> {
    let value: f64 = field
        .parse()
        .map_err(|_| format!("`{field}` is not a decimal number"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("`{field}` must be finite and non-negative"));
    }
    Ok(value)
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledSample;
    type IntoIter = std::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

const TABLE1_ROWS: [(FaultClass, [f64; INPUT_DIM]); 14] = [
    (FaultClass::NoFault, [2.661025, 2.624276, 2.701274, 0.490768, 0.478549, 0.493368]),
    (FaultClass::NoFault, [2.660319, 2.624661, 2.700700, 0.491114, 0.478722, 0.492584]),
    (FaultClass::Overload, [2.647625, 2.598815, 2.671626, 0.006194, 0.643518, 0.640217]),
    (FaultClass::Overload, [2.650816, 2.601661, 2.673722, 0.006123, 0.641548, 0.638553]),
    (FaultClass::GroundFault, [0.919570, 2.621412, 2.626511, 0.172113, 0.772419, 0.662758]),
    (FaultClass::GroundFault, [0.919852, 2.621627, 2.625342, 0.172072, 0.772106, 0.662653]),
    (FaultClass::LockedRotor, [1.874796, 1.855089, 1.874878, 0.286777, 0.287052, 0.281013]),
    (FaultClass::LockedRotor, [1.452803, 1.449902, 1.441935, 0.245231, 0.249739, 0.234152]),
    (FaultClass::UnbalancedVoltage, [2.865128, 2.871906, 2.855436, 0.482896, 0.499206, 0.496894]),
    (FaultClass::UnbalancedVoltage, [2.868791, 2.875877, 2.860353, 0.483453, 0.499363, 0.496879]),
    (FaultClass::SinglePhasingUnderVoltage, [2.657179, 2.613409, 2.687374, 1.671357, 1.650515, 1.668712]),
    (FaultClass::SinglePhasingUnderVoltage, [2.661374, 2.613395, 2.688907, 1.416786, 1.397752, 1.411372]),
    (FaultClass::Overvoltage, [2.637658, 2.600486, 2.673771, 0.803147, 0.782514, 0.797477]),
    (FaultClass::Overvoltage, [2.650468, 2.608143, 2.682578, 0.857336, 0.837601, 0.847664]),
];

/// The 14-row reference sample database measured on the 1/3 HP test motor,
/// two rows per class in class-code order. Print it with
/// [`Dataset::to_csv_fixed`]`(6)` to reproduce the original digits.
pub fn table1_fixture() -> Dataset {
    let samples = TABLE1_ROWS
        .iter()
        .map(|&(label, values)| LabeledSample::new(label, values))
        .collect();
    Dataset::new(samples, "table1")
}

/// Stratified split into `(train, test)`.
///
/// For each class with `n` samples, `floor(n * test_fraction + 0.5)` of them
/// (at least one when `n >= 2`) go to the test set, chosen by a seeded
/// shuffle. Both outputs keep the input's relative order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::usage(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if data.is_empty() {
        return Err(Error::usage("cannot split an empty dataset"));
    }

    let mut rng = SeededRng::new(seed);
    let mut in_test = vec![false; data.len()];
    for class in FaultClass::ALL {
        let mut members: Vec<usize> = data
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        let mut take = (n as f64 * test_fraction + 0.5).floor() as usize;
        if n >= 2 {
            take = take.max(1);
        }
        rng.shuffle(&mut members);
        for &i in &members[..take.min(n)] {
            in_test[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (s, &t) in data.samples.iter().zip(&in_test) {
        if t {
            test.push(*s);
        } else {
            train.push(*s);
        }
    }
    Ok((
        Dataset::new(train, format!("{} [train split]", data.provenance)),
        Dataset::new(test, format!("{} [test split]", data.provenance)),
    ))
}

/// Per-channel min-max scaling to `[0, 1]`, fitted on training data and
/// stored alongside a model when enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let rows: Vec<Vec<f64>> = data.iter().map(|s| to_input_vector(&s.sample)).collect();
        Self::fit_rows(&rows)
    }

    pub fn fit_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows
            .first()
            .ok_or_else(|| Error::usage("cannot fit a scaler on an empty dataset"))?
            .len();
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for row in rows {
            if row.len() != width {
                return Err(Error::Length {
                    expected: width,
                    actual: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Constant channels map to 0.
    pub fn transform(&self, input: &[f64]) -> Vec<f64> {
        input
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let span = hi - lo;
                if span > 0.0 {
                    (x - lo) / span
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty() {
        let d = Dataset::parse_csv("class,v1,v2,v3,i1,i2,i3\n", "t").unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn parses_first_table_row() {
        let text = "class,v1,v2,v3,i1,i2,i3\n1,2.661025,2.624276,2.701274,0.490768,0.478549,0.493368\n";
        let d = Dataset::parse_csv(text, "t").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.samples[0].label, FaultClass::NoFault);
        assert_eq!(
            d.samples[0].sample.to_array(),
            [2.661025, 2.624276, 2.701274, 0.490768, 0.478549, 0.493368]
        );
    }

    #[test]
    fn crlf_accepted() {
        let text = "class,v1,v2,v3,i1,i2,i3\r\n2,1,1,1,1,1,1\r\n";
        let d = Dataset::parse_csv(text, "t").unwrap();
        assert_eq!(d.samples[0].label, FaultClass::Overload);
    }

    fn parse_err_line(text: &str) -> usize {
        match Dataset::parse_csv(text, "t") {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn class_out_of_range_names_line() {
        let text = "class,v1,v2,v3,i1,i2,i3\n1,1,1,1,1,1,1\n8,1,1,1,1,1,1\n";
        assert_eq!(parse_err_line(text), 3);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n0,1,1,1,1,1,1\n"), 2);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2\n"), 1);
        assert_eq!(parse_err_line(""), 1);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n1,1,1,1,1,1\n"), 2);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n1,1,x,1,1,1,1\n"), 2);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n1,1,1,1,1,1,-1\n"), 2);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n1,1,1,1,1,1, 1\n"), 2);
        assert_eq!(parse_err_line("class,v1,v2,v3,i1,i2,i3\n1,1,1,1,1,1,NaN\n"), 2);
    }

    #[test]
    fn table1_shape_and_spot_values() {
        let t = table1_fixture();
        assert_eq!(t.len(), 14);
        assert_eq!(t.class_counts(), [2; CLASS_COUNT]);
        let first_of = |c: FaultClass| t.iter().find(|s| s.label == c).unwrap().sample;
        assert_eq!(first_of(FaultClass::GroundFault).v1, 0.919570);
        assert_eq!(first_of(FaultClass::SinglePhasingUnderVoltage).i1, 1.671357);
        // codes non-decreasing
        assert!(t.samples.windows(2).all(|w| w[0].label <= w[1].label));
    }

    #[test]
    fn one_hot_definition() {
        assert_eq!(one_hot(FaultClass::NoFault), vec![1., 0., 0., 0., 0., 0., 0.]);
        assert_eq!(one_hot(FaultClass::Overvoltage), vec![0., 0., 0., 0., 0., 0., 1.]);
        for c in FaultClass::ALL {
            let v = one_hot(c);
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
        }
    }

    #[test]
    fn codes_are_bijective() {
        for c in FaultClass::ALL {
            assert_eq!(FaultClass::from_code(c.code()), Some(c));
            assert_eq!(FaultClass::from_index(c.index()), Some(c));
        }
        assert_eq!(FaultClass::from_code(0), None);
        assert_eq!(FaultClass::from_code(8), None);
    }

    #[test]
    fn input_vector_order() {
        let t = table1_fixture();
        assert_eq!(
            to_input_vector(&t.samples[0].sample),
            vec![2.661025, 2.624276, 2.701274, 0.490768, 0.478549, 0.493368]
        );
        assert_eq!(to_input_vector(&PhaseSample::ZERO), vec![0.0; 6]);
        let s = PhaseSample::from_array([10., 11., 12., 20., 21., 22.]);
        assert_eq!(to_input_vector(&s), vec![10., 11., 12., 20., 21., 22.]);
    }

    #[test]
    fn split_single_class_quarter() {
        let samples = (0..100)
            .map(|i| LabeledSample::new(FaultClass::Overload, [i as f64; 6]))
            .collect();
        let d = Dataset::new(samples, "t");
        let (train, test) = split(&d, 0.25, 3).unwrap();
        assert_eq!((train.len(), test.len()), (75, 25));
    }

    #[test]
    fn split_table1_half_puts_one_per_class_in_test() {
        let (train, test) = split(&table1_fixture(), 0.5, 11).unwrap();
        assert_eq!(test.class_counts(), [1; CLASS_COUNT]);
        assert_eq!(train.class_counts(), [1; CLASS_COUNT]);
    }

    #[test]
    fn split_minimum_one_when_two_or_more() {
        let (_, test) = split(&table1_fixture(), 0.01, 0).unwrap();
        assert_eq!(test.class_counts(), [1; CLASS_COUNT]);
    }

    #[test]
    fn split_rejects_bad_fraction_and_empty() {
        let d = table1_fixture();
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(split(&d, f, 0), Err(Error::Usage(_))));
        }
        assert!(matches!(split(&Dataset::default(), 0.5, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn table1_fixed_csv_keeps_trailing_zeros() {
        let csv = table1_fixture().to_csv_fixed(6);
        assert!(csv.contains("1,2.660319,2.624661,2.700700,0.491114,0.478722,0.492584\n"));
    }

    #[test]
    fn scaler_maps_to_unit_interval() {
        let t = table1_fixture();
        let scaler = MinMaxScaler::fit(&t).unwrap();
        for s in &t {
            let x = scaler.transform(&s.sample.to_array());
            assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
