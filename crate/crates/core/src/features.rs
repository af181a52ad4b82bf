//! Feature tables for the energy predictor: CSV I/O, min-max scaling and a
//! binned mutual-information ranking of features against energy.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target column name in dataset CSV files.
pub const TARGET_COLUMN: &str = "energy_j";

pub const DEFAULT_MI_BINS: usize = 16;

/// Columns a dataset may carry, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Feature {
    TaskSize,
    OffloadingRatio,
    Speed,
    CarrierFrequency,
    CyclesPerBit,
    CpuFreq,
    Bandwidth,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::TaskSize,
        Feature::OffloadingRatio,
        Feature::Speed,
        Feature::CarrierFrequency,
        Feature::CyclesPerBit,
        Feature::CpuFreq,
        Feature::Bandwidth,
    ];

    /// The four features every generated dataset carries.
    pub const PRIMARY: [Feature; 4] = [
        Feature::TaskSize,
        Feature::OffloadingRatio,
        Feature::Speed,
        Feature::CarrierFrequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::TaskSize => "TaskSize",
            Feature::OffloadingRatio => "OffloadingRatio",
            Feature::Speed => "Speed",
            Feature::CarrierFrequency => "CarrierFrequency",
            Feature::CyclesPerBit => "CyclesPerBit",
            Feature::CpuFreq => "CpuFreq",
            Feature::Bandwidth => "Bandwidth",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown feature `{s}`")))
    }
}

fn check_finite(rows: &[Vec<f64>], width: usize) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Shape(format!(
                "row {r} has {} values, expected {width}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {r} holds non-finite value {v}")));
        }
    }
    Ok(())
}

fn parse_header(headers: &csv::StringRecord) -> Result<(Vec<Feature>, Option<usize>)> {
    let mut features = Vec::new();
    let mut target = None;
    for (i, h) in headers.iter().enumerate() {
        if h.trim() == TARGET_COLUMN {
            if target.replace(i).is_some() {
                return Err(Error::invalid("duplicate target column"));
            }
        } else {
            let f: Feature = h.parse()?;
            if features.contains(&f) {
                return Err(Error::invalid(format!("duplicate column `{f}`")));
            }
            features.push(f);
        }
    }
    Ok((features, target))
}

/// Columns, rows and, when the header has one, the target column.
type Table = (Vec<Feature>, Vec<Vec<f64>>, Option<Vec<f64>>);

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (features, target_idx) = parse_header(rdr.headers()?)?;
    let mut rows = Vec::new();
    let mut targets = target_idx.map(|_| Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(features.len());
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::invalid(format!("record {}: `{field}` is not a number", line + 1)))?;
            if Some(i) == target_idx {
                targets.as_mut().expect("target column present").push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    check_finite(&rows, features.len())?;
    if let Some(t) = &targets {
        if let Some(v) = t.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target {v}")));
        }
    }
    Ok((features, rows, targets))
}

/// Feature rows without targets, e.g. inputs to prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub features: Vec<Feature>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    /// Reads a headered CSV. A target column, if present, is ignored.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let (features, rows, _) = read_table(reader)?;
        Ok(FeatureTable { features, rows })
    }

    /// Rows restricted to `subset`, in that order.
    pub fn project(&self, subset: &[Feature]) -> Result<Vec<Vec<f64>>> {
        let idx = column_indices(&self.features, subset)?;
        Ok(self
            .rows
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect())
    }
}

fn column_indices(have: &[Feature], want: &[Feature]) -> Result<Vec<usize>> {
    want.iter()
        .map(|f| {
            have.iter()
                .position(|h| h == f)
                .ok_or_else(|| Error::MissingColumn(f.name().to_string()))
        })
        .collect()
}

/// Rows of features with an energy target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Feature>,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Feature>, rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::invalid(format!("duplicate feature `{f}`")));
            }
        }
        check_finite(&rows, features.len())?;
        if let Some(v) = targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target {v}")));
        }
        Ok(Dataset {
            features,
            rows,
            targets,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, feature: Feature) -> Result<Vec<f64>> {
        let i = column_indices(&self.features, &[feature])?[0];
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Keeps only `subset`, in that order.
    pub fn select(&self, subset: &[Feature]) -> Result<Dataset> {
        let idx = column_indices(&self.features, subset)?;
        let rows = self
            .rows
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect();
        Dataset::new(subset.to_vec(), rows, self.targets.clone())
    }

    /// Seeded shuffle, then the first `test_fraction` of rows become the test split.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test == self.len() {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot be split with test fraction {test_fraction}",
                self.len()
            )));
        }
        let pick = |ids: &[usize]| {
            Dataset::new(
                self.features.clone(),
                ids.iter().map(|&i| self.rows[i].clone()).collect(),
                ids.iter().map(|&i| self.targets[i]).collect(),
            )
        };
        Ok((pick(&order[n_test..])?, pick(&order[..n_test])?))
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let (features, rows, targets) = read_table(reader)?;
        let targets = targets.ok_or_else(|| Error::MissingColumn(TARGET_COLUMN.into()))?;
        Dataset::new(features, rows, targets)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.features.iter().map(|f| f.name()).collect();
        header.push(TARGET_COLUMN);
        w.write_record(&header)?;
        for (row, y) in self.rows.iter().zip(&self.targets) {
            let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("dataset csv", e))?;
        Ok(())
    }
}

/// Per-column `(min, max)` of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    pub fn dims(&self) -> usize {
        self.min.len()
    }

    /// Whether column `j` was constant in the fitted data.
    pub fn is_degenerate(&self, j: usize) -> bool {
        self.max[j] == self.min[j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::Shape("scaling min/max length mismatch".into()));
        }
        for (lo, hi) in self.min.iter().zip(&self.max) {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::invalid(format!("invalid scaling range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Scales a single point. Values outside the fitted range are not clipped;
    /// constant columns map to 0.5.
    pub fn apply_point(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dims() {
            return Err(Error::Shape(format!(
                "point has {} values, scaling expects {}",
                point.len(),
                self.dims()
            )));
        }
        Ok(point
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.is_degenerate(j) {
                    0.5
                } else {
                    (x - self.min[j]) / (self.max[j] - self.min[j])
                }
            })
            .collect())
    }
}

pub fn fit_min_max(rows: &[Vec<f64>]) -> Result<ScalingParams> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InsufficientData("cannot fit scaling on zero rows".into()))?;
    check_finite(rows, first.len())?;
    let mut min = first.clone();
    let mut max = first.clone();
    for row in &rows[1..] {
        for (j, &x) in row.iter().enumerate() {
            min[j] = min[j].min(x);
            max[j] = max[j].max(x);
        }
    }
    Ok(ScalingParams { min, max })
}

pub fn apply_min_max(rows: &[Vec<f64>], params: &ScalingParams) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| params.apply_point(r)).collect()
}

fn bin_indices(values: &[f64], bins: usize) -> Option<Vec<usize>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let width = hi - lo;
    Some(
        values
            .iter()
            .map(|&v| (((v - lo) / width * bins as f64).floor() as usize).min(bins - 1))
            .collect(),
    )
}

/// Plug-in mutual information in bits between two columns, each discretised
/// into `bins` equal-width bins over its observed range.
pub fn mutual_information(feature: &[f64], target: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
    }
    if feature.len() != target.len() {
        return Err(Error::Shape(format!(
            "feature has {} values, target {}",
            feature.len(),
            target.len()
        )));
    }
    let n = feature.len();
    if n < 2 * bins {
        return Err(Error::InsufficientData(format!(
            "{n} samples is fewer than 2·bins = {}",
            2 * bins
        )));
    }
    if feature.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::invalid("mutual information input holds non-finite values"));
    }
    let (Some(a), Some(b)) = (bin_indices(feature, bins), bin_indices(target, bins)) else {
        return Ok(0.0);
    };

    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(&b) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let n = n as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            let ratio = (c as f64 * n) / (pa[i] as f64 * pb[j] as f64);
            mi += pij * ratio.log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Features sorted by mutual information with the target, highest first.
/// Equal scores keep canonical feature order.
pub fn rank_features(dataset: &Dataset, bins: usize) -> Result<Vec<(Feature, f64)>> {
    let mut scored = dataset
        .features()
        .iter()
        .map(|&f| Ok((f, mutual_information(&dataset.column(f)?, dataset.targets(), bins)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored)
}
