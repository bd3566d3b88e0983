use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Matrix;
use crate::seed;

/// Labelled samples. Image datasets store each `h x w` raster as one
/// row-major feature row and record the shape in `image_shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub image_shape: Option<(usize, usize)>,
    /// When set, `true` marks a test sample and the dataset is evaluated on
    /// this single split instead of cross-validation.
    pub fixed_split: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.rows != labels.len() {
            return Err(Error::Shape(format!(
                "{name}: {} feature rows but {} labels",
                features.rows,
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
        if labels.len() < classes {
            return Err(Error::Config(format!(
                "{name}: {} samples for {classes} classes",
                labels.len()
            )));
        }
        if let Some(i) = features.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "{name}: non-finite feature in row {}",
                i / features.cols.max(1)
            )));
        }
        Ok(Dataset {
            name,
            features,
            labels,
            classes,
            image_shape: None,
            fixed_split: None,
        })
    }

    pub fn with_image_shape(mut self, h: usize, w: usize) -> Result<Self> {
        if h * w != self.dim() {
            return Err(Error::Shape(format!(
                "{h}x{w} image does not match {} features",
                self.dim()
            )));
        }
        self.image_shape = Some((h, w));
        Ok(self)
    }

    pub fn with_fixed_split(mut self, is_test: Vec<bool>) -> Result<Self> {
        if is_test.len() != self.len() {
            return Err(Error::Shape(format!(
                "split marks {} samples, dataset has {}",
                is_test.len(),
                self.len()
            )));
        }
        self.fixed_split = Some(is_test);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// The samples at `idx`, in that order. The fixed split is dropped.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            image_shape: self.image_shape,
            fixed_split: None,
        }
    }

    pub fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }
}

/// Per-feature affine normalization to zero mean and unit variance, fitted
/// on training rows only. Image datasets use one pooled mean and deviation
/// so that flips and rescales stay meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Matrix, pooled: bool) -> Standardizer {
        let n = features.rows.max(1) as f64;
        let d = features.cols;
        if pooled {
            let count = (features.data.len()).max(1) as f64;
            let mean = features.data.iter().sum::<f64>() / count;
            let var = features.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            return Standardizer {
                mean: vec![mean; d],
                std: vec![nonzero_std(var); d],
            };
        }
        let mut mean = vec![0.0; d];
        for row in features.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in features.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        Standardizer {
            mean,
            std: var.into_iter().map(nonzero_std).collect(),
        }
    }

    pub fn apply(&self, features: &Matrix) -> Matrix {
        let mut out = features.clone();
        for r in 0..out.rows {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

fn nonzero_std(var: f64) -> f64 {
    let s = var.sqrt();
    if s > 1e-12 {
        s
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    TwoMoons,
    Spirals,
    Blobs,
    Rings,
    /// 8x8 rasters of a horizontal or a vertical bar.
    Bars,
}

impl SyntheticKind {
    pub const SUITE: [SyntheticKind; 4] = [
        SyntheticKind::TwoMoons,
        SyntheticKind::Spirals,
        SyntheticKind::Blobs,
        SyntheticKind::Rings,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::TwoMoons => "two_moons",
            SyntheticKind::Spirals => "spirals",
            SyntheticKind::Blobs => "blobs",
            SyntheticKind::Rings => "rings",
            SyntheticKind::Bars => "bars",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            SyntheticKind::Blobs => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SyntheticKind::Bars]
            .into_iter()
            .chain(SyntheticKind::SUITE)
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown synthetic dataset `{s}`")))
    }
}

pub const BARS_SIDE: usize = 8;

/// Deterministic, class-balanced toy data: sample `i` has label
/// `i % classes`, so class counts differ by at most one. `noise` is the
/// standard deviation of the Gaussian jitter added to every feature.
pub fn make_synthetic(kind: SyntheticKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::Config(format!("synthetic datasets need n >= 10, got {n}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Config(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = seed::rng(seed::subseed(seed, &[seed::name_hash(kind.name())]));
    let jitter = Normal::new(0.0, noise).expect("noise checked above");
    let classes = kind.classes();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut rows = Vec::with_capacity(n);
    for &c in &labels {
        let mut row = match kind {
            SyntheticKind::TwoMoons => {
                let t = rng.gen_range(0.0..std::f64::consts::PI);
                if c == 0 {
                    vec![t.cos(), t.sin()]
                } else {
                    vec![1.0 - t.cos(), 0.5 - t.sin()]
                }
            }
            SyntheticKind::Spirals => {
                let t: f64 = rng.gen_range(0.1..1.0);
                let angle = 3.0 * std::f64::consts::PI * t + c as f64 * std::f64::consts::PI;
                vec![2.0 * t * angle.cos(), 2.0 * t * angle.sin()]
            }
            SyntheticKind::Blobs => {
                let center = 2.0 * std::f64::consts::PI * c as f64 / 3.0;
                let r = rng.gen_range(0.0f64..1.0).sqrt();
                let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                vec![
                    4.0 * center.cos() + r * phi.cos(),
                    4.0 * center.sin() + r * phi.sin(),
                ]
            }
            SyntheticKind::Rings => {
                let radius = 1.0 + c as f64;
                let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                vec![radius * phi.cos(), radius * phi.sin()]
            }
            SyntheticKind::Bars => {
                let mut img = vec![0.0; BARS_SIDE * BARS_SIDE];
                let at = rng.gen_range(1..BARS_SIDE - 1);
                for j in 0..BARS_SIDE {
                    let idx = if c == 0 {
                        at * BARS_SIDE + j
                    } else {
                        j * BARS_SIDE + at
                    };
                    img[idx] = 1.0;
                }
                img
            }
        };
        if noise > 0.0 {
            for v in &mut row {
                *v += jitter.sample(&mut rng);
            }
        }
        rows.push(row);
    }
    let ds = Dataset::new(kind.name(), Matrix::from_rows(&rows)?, labels, classes)?;
    match kind {
        SyntheticKind::Bars => ds.with_image_shape(BARS_SIDE, BARS_SIDE),
        _ => Ok(ds),
    }
}

/// Reads `f1,...,fd,label` CSV. The dataset is named after the file stem
/// and has `max(label) + 1` classes.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let file = std::fs::File::open(path)
        .map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers()?.clone();
    if header.len() < 2 || header.get(header.len() - 1) != Some("label") {
        return Err(parse_err(1, "header must be `f1,...,fd,label`".into()));
    }
    let d = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("feature {} is not a number: `{field}`", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("feature {} is not finite: `{field}`", j + 1)));
            }
            data.push(v);
        }
        let field = &record[d];
        let label: usize = field
            .parse()
            .map_err(|_| parse_err(line, format!("label is not a non-negative integer: `{field}`")))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, Matrix::from_vec(labels.len(), d, data)?, labels, classes)
}

/// Writes `ds` in the format read by [`load_csv`]. Values use Rust's
/// shortest round-trip representation.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in ds.features.iter_rows().zip(&ds.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_moons_is_balanced() {
        let ds = make_synthetic(SyntheticKind::TwoMoons, 400, 0.1, 1).unwrap();
        assert_eq!(ds.class_counts(), vec![200, 200]);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn synthetic_is_deterministic() {
        for kind in SyntheticKind::SUITE {
            let a = make_synthetic(kind, 60, 0.2, 3).unwrap();
            let b = make_synthetic(kind, 60, 0.2, 3).unwrap();
            assert_eq!(a, b);
            let c = make_synthetic(kind, 60, 0.2, 4).unwrap();
            assert_ne!(a.features, c.features);
        }
    }

    #[test]
    fn odd_counts_stay_within_one() {
        let ds = make_synthetic(SyntheticKind::Blobs, 301, 0.0, 0).unwrap();
        assert_eq!(ds.class_counts(), vec![101, 100, 100]);
    }

    #[test]
    fn bars_are_images() {
        let ds = make_synthetic(SyntheticKind::Bars, 20, 0.0, 0).unwrap();
        assert_eq!(ds.image_shape, Some((8, 8)));
        assert!(ds.features.iter_rows().all(|r| r.iter().sum::<f64>() == 8.0));
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(make_synthetic(SyntheticKind::Rings, 9, 0.1, 0).is_err());
        assert!("moons".parse::<SyntheticKind>().is_err());
        assert_eq!("spirals".parse::<SyntheticKind>().unwrap(), SyntheticKind::Spirals);
    }

    #[test]
    fn dataset_invariants() {
        let m = Matrix::from_rows(&[vec![0.0], vec![f64::NAN]]).unwrap();
        assert!(Dataset::new("x", m, vec![0, 1], 2).is_err());
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(Dataset::new("x", m.clone(), vec![0, 2], 2).is_err());
        assert!(Dataset::new("x", m, vec![0, 1], 3).is_err());
    }

    #[test]
    fn standardizer_centres_training_rows() {
        let ds = make_synthetic(SyntheticKind::Rings, 100, 0.1, 2).unwrap();
        let s = Standardizer::fit(&ds.features, false);
        let z = s.apply(&ds.features);
        let t = Standardizer::fit(&z, false);
        for (m, sd) in t.mean.iter().zip(&t.std) {
            assert!(m.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
        let constant = Matrix::from_rows(&[vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(Standardizer::fit(&constant, true).std, vec![1.0]);
    }
}
