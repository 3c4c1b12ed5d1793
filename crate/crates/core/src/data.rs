//! Datasets: CSV ingestion, feature scaling, one-hot targets, and the
//! weight-norm bound heuristic used by the least-squares constant.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Rng, Vector};

/// Column sums with absolute value below this are treated as zero.
pub const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Regression values, or binary labels in {0, 1}.
    Values(Vector),
    /// One row per example, exactly one 1 per row.
    OneHot(Matrix),
}

/// How the target column is located in a CSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    /// The right-most column.
    Last,
}

impl FromStr for TargetColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) if s == "last" => TargetColumn::Last,
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub target: TargetColumn,
    pub has_header: bool,
    pub task: Task,
}

impl CsvSchema {
    pub fn new(task: Task, target: TargetColumn) -> Self {
        CsvSchema {
            target,
            has_header: true,
            task,
        }
    }
}

/// Per-feature affine map applied by [`scale_with`]: `x' = (x - offset) / divisor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub mode: ScalingMode,
    pub divisors: Vec<f64>,
    pub offsets: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "divisor")]
pub enum ScalingMode {
    /// Leave features as loaded.
    None,
    /// Divide each column by its sum, so each column sums to 1.
    SumToOne,
    /// Subtract the column mean, then divide by a constant (255 for pixels).
    CenterDivide(f64),
}

impl FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScalingMode::None),
            "sum" | "sum-to-one" => Ok(ScalingMode::SumToOne),
            "center" | "center-255" => Ok(ScalingMode::CenterDivide(255.0)),
            other => Err(Error::Config(format!(
                "unknown scaling mode `{other}` (expected none, sum, center)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    targets: Targets,
    task: Task,
    feature_names: Vec<String>,
    target_name: String,
    /// Class names by class index (binary: index 0 and 1).
    labels: Vec<String>,
    scaling: Option<ScalingRecord>,
}

impl Dataset {
    /// Builds a regression dataset.
    pub fn regression(features: Matrix, y: Vec<f64>) -> Result<Self> {
        check_rows(&features, y.len())?;
        Ok(Dataset {
            feature_names: default_names(features.cols()),
            features,
            targets: Targets::Values(Vector(y)),
            task: Task::Regression,
            target_name: "y".into(),
            labels: Vec::new(),
            scaling: None,
        })
    }

    /// Builds a binary dataset; every label must be 0 or 1.
    pub fn binary(features: Matrix, y: Vec<f64>) -> Result<Self> {
        check_rows(&features, y.len())?;
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("binary label {} is not 0 or 1", y[i]),
            });
        }
        Ok(Dataset {
            feature_names: default_names(features.cols()),
            features,
            targets: Targets::Values(Vector(y)),
            task: Task::Binary,
            target_name: "label".into(),
            labels: vec!["0".into(), "1".into()],
            scaling: None,
        })
    }

    /// Builds a multiclass dataset from class indices in `0..k`.
    pub fn multiclass(features: Matrix, classes: &[usize], k: usize) -> Result<Self> {
        check_rows(&features, classes.len())?;
        if k < 2 {
            return Err(Error::InvalidClassCount(k));
        }
        let mut onehot = Matrix::zeros(classes.len(), k);
        for (i, &c) in classes.iter().enumerate() {
            if c >= k {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("class index {c} out of range for {k} classes"),
                });
            }
            onehot[(i, c)] = 1.0;
        }
        Ok(Dataset {
            feature_names: default_names(features.cols()),
            features,
            targets: Targets::OneHot(onehot),
            task: Task::Multiclass,
            target_name: "class".into(),
            labels: (0..k).map(|c| c.to_string()).collect(),
            scaling: None,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scaling(&self) -> Option<&ScalingRecord> {
        self.scaling.as_ref()
    }

    pub fn n_examples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Number of model outputs: k for multiclass, 1 otherwise.
    pub fn n_outputs(&self) -> usize {
        match &self.targets {
            Targets::OneHot(m) => m.cols(),
            Targets::Values(_) => 1,
        }
    }

    /// Class count k (2 for binary, 0 for regression).
    pub fn n_classes(&self) -> usize {
        match self.task {
            Task::Regression => 0,
            Task::Binary => 2,
            Task::Multiclass => self.n_outputs(),
        }
    }

    /// Targets as an m×outputs matrix.
    pub fn target_matrix(&self) -> Matrix {
        match &self.targets {
            Targets::Values(v) => Matrix::column_vector(v),
            Targets::OneHot(m) => m.clone(),
        }
    }

    /// Class index per example, `None` for regression.
    pub fn class_indices(&self) -> Option<Vec<usize>> {
        match (&self.targets, self.task) {
            (_, Task::Regression) => None,
            (Targets::Values(v), _) => Some(v.iter().map(|&y| y as usize).collect()),
            (Targets::OneHot(m), _) => Some((0..m.rows()).map(|r| argmax(m.row(r))).collect()),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let targets = match &self.targets {
            Targets::Values(v) => Targets::Values(Vector(indices.iter().map(|&i| v[i]).collect())),
            Targets::OneHot(m) => Targets::OneHot(m.select_rows(indices)),
        };
        Dataset {
            features: self.features.select_rows(indices),
            targets,
            ..self.clone_meta()
        }
    }

    /// Indices of feature columns whose sum is (numerically) zero.
    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.features
            .column_sums()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.abs() < DEGENERATE_SUM)
            .map(|(j, _)| j)
            .collect()
    }

    /// Copy without the listed feature columns.
    pub fn drop_columns(&self, drop: &[usize]) -> Dataset {
        let keep: Vec<usize> = (0..self.n_features()).filter(|j| !drop.contains(j)).collect();
        Dataset {
            features: self.features.select_columns(&keep),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn with_names(mut self, feature_names: Vec<String>, target_name: &str) -> Result<Self> {
        if feature_names.len() != self.n_features() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} features",
                feature_names.len(),
                self.n_features()
            )));
        }
        self.feature_names = feature_names;
        self.target_name = target_name.to_string();
        Ok(self)
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            features: Matrix::zeros(0, 0),
            targets: Targets::Values(Vector::default()),
            task: self.task,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            labels: self.labels.clone(),
            scaling: self.scaling.clone(),
        }
    }
}

fn check_rows(features: &Matrix, n_targets: usize) -> Result<()> {
    if features.rows() != n_targets {
        return Err(Error::Dimension(format!(
            "{} feature rows but {n_targets} targets",
            features.rows()
        )));
    }
    Ok(())
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("x{j}")).collect()
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Reads a CSV file into a dataset.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses CSV text. Multiclass labels are one-hot encoded in first-seen order.
pub fn read_csv(reader: impl Read, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(reader);

    let header: Option<Vec<String>> = if schema.has_header {
        Some(rdr.headers()?.iter().map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut raw_features: Vec<f64> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    let mut target_idx = None;

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                message: format!("expected {w} cells, found {}", record.len()),
            });
        }
        let t = match target_idx {
            Some(t) => t,
            None => *target_idx.insert(resolve_target(&schema.target, header.as_deref(), w)?),
        };
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(Error::Parse {
                    row,
                    message: format!("missing value in column {j}"),
                });
            }
            if j == t {
                raw_targets.push(cell.to_string());
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("column {j}: `{cell}` is not a number"),
                })?;
                raw_features.push(v);
            }
        }
    }

    let (Some(w), Some(t)) = (width, target_idx) else {
        return Err(Error::Parse {
            row: 0,
            message: "no data rows".into(),
        });
    };
    let m = raw_targets.len();
    let features = Matrix::new(m, w - 1, raw_features)?;
    let feature_names = match &header {
        Some(h) => h.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, s)| s.clone()).collect(),
        None => default_names(w - 1),
    };
    let target_name = header.as_ref().map_or_else(|| format!("column{t}"), |h| h[t].clone());

    let mut ds = match schema.task {
        Task::Regression => {
            let y = parse_numbers(&raw_targets)?;
            Dataset::regression(features, y)?
        }
        Task::Binary => {
            let numeric = parse_numbers(&raw_targets)
                .ok()
                .filter(|y| y.iter().all(|&v| v == 0.0 || v == 1.0));
            match numeric {
                Some(y) => Dataset::binary(features, y)?,
                None => {
                    let (classes, labels) = first_seen_classes(&raw_targets);
                    if labels.len() != 2 {
                        return Err(Error::Parse {
                            row: 0,
                            message: format!(
                                "binary target needs exactly 2 distinct labels, found {}",
                                labels.len()
                            ),
                        });
                    }
                    let y = classes.iter().map(|&c| c as f64).collect();
                    let mut ds = Dataset::binary(features, y)?;
                    ds.labels = labels;
                    ds
                }
            }
        }
        Task::Multiclass => {
            let (classes, labels) = first_seen_classes(&raw_targets);
            let mut ds = Dataset::multiclass(features, &classes, labels.len())?;
            ds.labels = labels;
            ds
        }
    };
    ds.feature_names = feature_names;
    ds.target_name = target_name;
    Ok(ds)
}

fn resolve_target(target: &TargetColumn, header: Option<&[String]>, width: usize) -> Result<usize> {
    let idx = match target {
        TargetColumn::Last => width.checked_sub(1),
        TargetColumn::Index(i) => Some(*i).filter(|&i| i < width),
        TargetColumn::Name(name) => header.and_then(|h| h.iter().position(|c| c == name)),
    };
    match idx {
        Some(i) if width >= 2 => Ok(i),
        _ => Err(Error::Config(format!(
            "target column {target:?} not found among {width} columns"
        ))),
    }
}

fn parse_numbers(cells: &[String]) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                message: format!("target `{c}` is not a number"),
            })
        })
        .collect()
}

fn first_seen_classes(cells: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut labels: Vec<String> = Vec::new();
    let classes = cells
        .iter()
        .map(|c| match labels.iter().position(|l| l == c) {
            Some(i) => i,
            None => {
                labels.push(c.clone());
                labels.len() - 1
            }
        })
        .collect();
    (classes, labels)
}

/// Writes the dataset as CSV (header included, target last). Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    w.write_record(&header)?;
    let classes = ds.class_indices();
    for r in 0..ds.n_examples() {
        let mut rec: Vec<String> = ds.features.row(r).iter().map(|x| x.to_string()).collect();
        rec.push(match (&ds.targets, &classes) {
            (Targets::Values(v), None) => v[r].to_string(),
            (_, Some(c)) => ds.labels[c[r]].clone(),
            (Targets::OneHot(_), None) => unreachable!("one-hot targets always have classes"),
        });
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, file)
}

/// Divides each feature column by its sum so every column sums to 1.
pub fn scale_features(ds: &Dataset) -> Result<(Dataset, ScalingRecord)> {
    scale_with(ds, ScalingMode::SumToOne)
}

pub fn scale_with(ds: &Dataset, mode: ScalingMode) -> Result<(Dataset, ScalingRecord)> {
    let n = ds.n_features();
    let m = ds.n_examples();
    let (offsets, divisors) = match mode {
        ScalingMode::None => (vec![0.0; n], vec![1.0; n]),
        ScalingMode::SumToOne => {
            let sums = ds.features.column_sums();
            if let Some(j) = sums.iter().position(|s| s.abs() < DEGENERATE_SUM) {
                return Err(Error::DegenerateFeature {
                    column: j,
                    name: ds.feature_names[j].clone(),
                });
            }
            (vec![0.0; n], sums)
        }
        ScalingMode::CenterDivide(d) => {
            if !(d > 0.0) {
                return Err(Error::Config(format!("scaling divisor {d} must be positive")));
            }
            if m == 0 {
                return Err(Error::Dimension("cannot center an empty dataset".into()));
            }
            let means = ds.features.column_sums().iter().map(|s| s / m as f64).collect();
            (means, vec![d; n])
        }
    };
    let mut features = ds.features.clone();
    for r in 0..m {
        for ((x, o), d) in features.row_mut(r).iter_mut().zip(&offsets).zip(&divisors) {
            *x = (*x - o) / d;
        }
    }
    let record = ScalingRecord {
        mode,
        divisors,
        offsets,
    };
    let scaled = Dataset {
        features,
        scaling: Some(record.clone()),
        ..ds.clone()
    };
    Ok((scaled, record))
}

/// Heuristic bound K on the weight norm: `K = (a + b) / 2` where `a` is the
/// sum of the column means and `b` the mean of the column maxima.
pub fn estimate_k_bound(x: &Matrix) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Dimension("weight-bound estimate needs a non-empty matrix".into()));
    }
    let (m, n) = x.shape();
    let a: f64 = x.column_sums().iter().map(|s| s / m as f64).sum();
    let mut maxima = x.row(0).to_vec();
    for r in 1..m {
        for (mx, &v) in maxima.iter_mut().zip(x.row(r)) {
            *mx = mx.max(v);
        }
    }
    let b = maxima.iter().sum::<f64>() / n as f64;
    Ok((a + b) / 2.0)
}

/// Seeded shuffled split; the first part holds `round(fraction * m)` rows.
pub fn train_validation_split(ds: &Dataset, train_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!("split fraction {train_fraction} outside [0, 1]")));
    }
    let perm = rng.permutation(ds.n_examples());
    let n_train = (train_fraction * ds.n_examples() as f64).round() as usize;
    Ok((ds.select_rows(&perm[..n_train]), ds.select_rows(&perm[n_train..])))
}

/// Small datasets shipped with the crate.
pub mod bundled {
    use super::*;

    const IRIS: &str = include_str!("../data/iris.csv");
    const DIGITS: &str = include_str!("../data/digits.csv");
    const BREAST_CANCER: &str = include_str!("../data/breast_cancer.csv");
    const TWO_MOONS: &str = include_str!("../data/two_moons.csv");
    const LINEAR_REGRESSION: &str = include_str!("../data/linear_regression.csv");

    fn parse(text: &str, task: Task) -> Dataset {
        read_csv(text.as_bytes(), &CsvSchema::new(task, TargetColumn::Last))
            .expect("bundled dataset is well-formed")
    }

    /// 150 × 4, three species.
    pub fn iris() -> Dataset {
        parse(IRIS, Task::Multiclass)
    }

    /// 1797 × 64 8×8 digit images, ten classes. Three pixel columns are
    /// zero everywhere; drop them before sum-to-one scaling.
    pub fn digits() -> Dataset {
        parse(DIGITS, Task::Multiclass)
    }

    /// 569 × 30, label 1 = benign.
    pub fn breast_cancer() -> Dataset {
        parse(BREAST_CANCER, Task::Binary)
    }

    /// 300 points on two interleaved half circles, noise 0.1.
    pub fn two_moons() -> Dataset {
        parse(TWO_MOONS, Task::Binary)
    }

    /// 200 × 5 non-negative features, `y = Xβ + N(0, 1)`.
    pub fn linear_regression() -> Dataset {
        parse(LINEAR_REGRESSION, Task::Regression)
    }

    /// Names accepted by [`by_name`].
    pub const NAMES: [&str; 5] = ["iris", "digits", "breast_cancer", "two_moons", "linear_regression"];

    /// Looks a bundled dataset up by name.
    pub fn by_name(name: &str) -> Option<Dataset> {
        Some(match name {
            "iris" => iris(),
            "digits" => digits(),
            "breast_cancer" | "breast-cancer" => breast_cancer(),
            "two_moons" | "two-moons" | "moons" => two_moons(),
            "linear_regression" | "linear-regression" => linear_regression(),
            _ => return None,
        })
    }
}

/// Generated datasets for tests and examples.
pub mod synthetic {
    use super::*;

    /// Two interleaved half circles with Gaussian noise, `n` points.
    pub fn two_moons(n: usize, noise: f64, rng: &mut Rng) -> Dataset {
        let n_outer = n / 2;
        let mut x = Matrix::zeros(n, 2);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let (a, b, label) = if i < n_outer {
                let t = std::f64::consts::PI * i as f64 / (n_outer.max(2) - 1) as f64;
                (t.cos(), t.sin(), 0.0)
            } else {
                let j = i - n_outer;
                let t = std::f64::consts::PI * j as f64 / ((n - n_outer).max(2) - 1) as f64;
                (1.0 - t.cos(), 0.5 - t.sin(), 1.0)
            };
            x[(i, 0)] = a + noise * rng.standard_normal();
            x[(i, 1)] = b + noise * rng.standard_normal();
            y[i] = label;
        }
        let perm = rng.permutation(n);
        Dataset::binary(x, y).expect("labels are 0/1").select_rows(&perm)
    }

    /// Features uniform in `[0, 10)`, coefficients standard normal.
    pub fn linear_regression(m: usize, n: usize, noise: f64, rng: &mut Rng) -> Dataset {
        let x = rng.uniform_matrix(m, n, 0.0, 10.0);
        let beta: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let y = (0..m)
            .map(|r| {
                let fit: f64 = x.row(r).iter().zip(&beta).map(|(a, b)| a * b).sum();
                fit + noise * rng.standard_normal()
            })
            .collect();
        Dataset::regression(x, y).expect("shapes agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(task: Task) -> CsvSchema {
        CsvSchema::new(task, TargetColumn::Last)
    }

    #[test]
    fn loads_regression_csv_with_header() {
        let text = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n";
        let ds = read_csv(text.as_bytes(), &schema(Task::Regression)).unwrap();
        assert_eq!(ds.n_examples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.task(), Task::Regression);
        assert_eq!(ds.feature_names(), ["a", "b"]);
        assert_eq!(ds.features().row(1), [4.0, 5.0]);
    }

    #[test]
    fn target_by_name_and_index() {
        let text = "y,a\n1,2\n3,4\n";
        let s = CsvSchema::new(Task::Regression, TargetColumn::Name("y".into()));
        let ds = read_csv(text.as_bytes(), &s).unwrap();
        assert_eq!(ds.target_matrix().as_slice(), [1.0, 3.0]);
        let s = CsvSchema {
            has_header: false,
            ..CsvSchema::new(Task::Regression, TargetColumn::Index(1))
        };
        let ds = read_csv("1,2\n3,4\n".as_bytes(), &s).unwrap();
        assert_eq!(ds.target_matrix().as_slice(), [2.0, 4.0]);
    }

    #[test]
    fn multiclass_labels_one_hot_in_first_seen_order() {
        let text = "x,l\n1,b\n2,a\n3,c\n4,b\n";
        let ds = read_csv(text.as_bytes(), &schema(Task::Multiclass)).unwrap();
        assert_eq!(ds.n_classes(), 3);
        assert_eq!(ds.labels(), ["b", "a", "c"]);
        let y = ds.target_matrix();
        for r in 0..y.rows() {
            assert_eq!(y.row(r).iter().sum::<f64>(), 1.0);
        }
        assert_eq!(ds.class_indices().unwrap(), [0, 1, 2, 0]);
    }

    #[test]
    fn missing_cell_names_its_row() {
        let text = "a,b,y\n1,2,3\n4,,6\n";
        match read_csv(text.as_bytes(), &schema(Task::Regression)) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let ragged = "a,b,y\n1,2,3\n4,6\n";
        match read_csv(ragged.as_bytes(), &schema(Task::Regression)) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/definitely/not/here.csv", &schema(Task::Binary)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn binary_string_labels_map_to_zero_one() {
        let text = "x,l\n1,yes\n2,no\n3,yes\n";
        let ds = read_csv(text.as_bytes(), &schema(Task::Binary)).unwrap();
        assert_eq!(ds.target_matrix().as_slice(), [0.0, 1.0, 0.0]);
        let bad = "x,l\n1,a\n2,b\n3,c\n";
        assert!(read_csv(bad.as_bytes(), &schema(Task::Binary)).is_err());
    }

    #[test]
    fn sum_scaling_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 2.0]]).unwrap();
        let ds = Dataset::regression(x, vec![0.0, 1.0]).unwrap();
        let (s, rec) = scale_features(&ds).unwrap();
        assert_eq!(s.features().column(0), [0.25, 0.75]);
        assert_eq!(rec.divisors, [4.0, 4.0]);
        assert_eq!(s.target_matrix(), ds.target_matrix());

        let x = Matrix::filled(4, 1, 2.0);
        let (s, _) = scale_features(&Dataset::regression(x, vec![0.0; 4]).unwrap()).unwrap();
        assert_eq!(s.features().column(0), [0.25; 4]);

        let x = Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
        let ds = Dataset::regression(x, vec![0.0; 2]).unwrap();
        assert!(matches!(
            scale_features(&ds),
            Err(Error::DegenerateFeature { column: 0, .. })
        ));
        assert_eq!(ds.degenerate_columns(), [0]);
        assert!(scale_features(&ds.drop_columns(&[0])).is_ok());
    }

    #[test]
    fn center_scaling_removes_means() {
        let x = Matrix::from_rows(&[[0.0, 255.0], [510.0, 255.0]]).unwrap();
        let ds = Dataset::regression(x, vec![0.0; 2]).unwrap();
        let (s, rec) = scale_with(&ds, ScalingMode::CenterDivide(255.0)).unwrap();
        assert_eq!(s.features().as_slice(), [-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(rec.offsets, [255.0, 255.0]);
    }

    #[test]
    fn k_bound_examples() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        // a = 2 + 3, b = (3 + 4) / 2
        assert_eq!(estimate_k_bound(&x).unwrap(), 4.25);
        let ones = Matrix::filled(5, 3, 1.0);
        assert_eq!(estimate_k_bound(&ones).unwrap(), 2.0);
        assert!(estimate_k_bound(&Matrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn k_bound_after_scaling_has_a_equal_n_over_m() {
        let ds = bundled::iris();
        let (s, _) = scale_features(&ds).unwrap();
        let (m, n) = s.features().shape();
        let maxima_mean = (0..n)
            .map(|j| s.features().column(j).into_iter().fold(f64::MIN, f64::max))
            .sum::<f64>()
            / n as f64;
        let k = estimate_k_bound(s.features()).unwrap();
        let a = 2.0 * k - maxima_mean;
        assert!((a - n as f64 / m as f64).abs() < 1e-12);
    }

    #[test]
    fn bundled_datasets_have_expected_shapes() {
        let iris = bundled::iris();
        assert_eq!((iris.n_examples(), iris.n_features(), iris.n_classes()), (150, 4, 3));
        let digits = bundled::digits();
        assert_eq!((digits.n_examples(), digits.n_features(), digits.n_classes()), (1797, 64, 10));
        assert_eq!(digits.degenerate_columns().len(), 3);
        let bc = bundled::breast_cancer();
        assert_eq!((bc.n_examples(), bc.n_features(), bc.task()), (569, 30, Task::Binary));
        assert_eq!(bundled::two_moons().n_examples(), 300);
        assert_eq!(bundled::linear_regression().task(), Task::Regression);
    }

    #[test]
    fn split_is_seeded_and_sized() {
        let ds = bundled::iris();
        let (a, b) = train_validation_split(&ds, 0.7, &mut Rng::new(7)).unwrap();
        assert_eq!((a.n_examples(), b.n_examples()), (105, 45));
        let (a2, _) = train_validation_split(&ds, 0.7, &mut Rng::new(7)).unwrap();
        assert_eq!(a, a2);
    }

    #[test]
    fn synthetic_moons_are_balanced() {
        let ds = synthetic::two_moons(100, 0.1, &mut Rng::new(0));
        let ones = ds.target_matrix().as_slice().iter().filter(|&&y| y == 1.0).count();
        assert_eq!(ones, 50);
    }
}
