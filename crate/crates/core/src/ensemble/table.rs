use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Matrix, ScoreMatrix};

/// Accuracy of every model on every dataset. Missing cells are `NaN` and are
/// written as empty CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `cells[model][dataset]`.
    pub cells: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TableJson<'a> {
    models: &'a [String],
    datasets: &'a [String],
    cells: Vec<Vec<Option<f64>>>,
    avg: Vec<Option<f64>>,
}

fn present(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl PerformanceTable {
    pub fn new(models: Vec<String>, datasets: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self> {
        if cells.len() != models.len() || cells.iter().any(|r| r.len() != datasets.len()) {
            return Err(Error::Shape(format!(
                "table cells do not form a {}x{} grid",
                models.len(),
                datasets.len()
            )));
        }
        for (what, names) in [("model", &models), ("dataset", &datasets)] {
            let mut sorted = names.clone();
            sorted.sort();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("duplicate {what} `{}`", w[0])));
            }
        }
        Ok(PerformanceTable {
            models,
            datasets,
            cells,
        })
    }

    pub fn model_index(&self, model: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m == model)
            .ok_or_else(|| Error::Config(format!("model `{model}` is not in the table")))
    }

    pub fn dataset_index(&self, dataset: &str) -> Result<usize> {
        self.datasets
            .iter()
            .position(|d| d == dataset)
            .ok_or_else(|| Error::Config(format!("dataset `{dataset}` is not in the table")))
    }

    pub fn get(&self, model: &str, dataset: &str) -> Result<f64> {
        Ok(self.cells[self.model_index(model)?][self.dataset_index(dataset)?])
    }

    pub fn row(&self, model: &str) -> Result<&[f64]> {
        Ok(&self.cells[self.model_index(model)?])
    }

    /// Mean over the datasets; `NaN` if a cell is missing.
    pub fn avg(&self, model_index: usize) -> f64 {
        let row = &self.cells[model_index];
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Datasets on which `model` has no value.
    pub fn missing(&self, model: &str) -> Result<Vec<String>> {
        let row = self.row(model)?;
        Ok(self
            .datasets
            .iter()
            .zip(row)
            .filter(|(_, v)| !v.is_finite())
            .map(|(d, _)| d.clone())
            .collect())
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().flatten().all(|v| v.is_finite())
    }

    /// `model,<datasets...>,Avg` with one row per model.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("model");
        for d in &self.datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push_str(",Avg\n");
        for (i, m) in self.models.iter().enumerate() {
            out.push_str(m);
            for v in self.cells[i].iter().copied().chain([self.avg(i)]) {
                out.push(',');
                if v.is_finite() {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        let doc = TableJson {
            models: &self.models,
            datasets: &self.datasets,
            cells: self
                .cells
                .iter()
                .map(|r| r.iter().copied().map(present).collect())
                .collect(),
            avg: (0..self.models.len()).map(|i| present(self.avg(i))).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Reads a table written by [`PerformanceTable::write_csv`]. A trailing
    /// `Avg` column is recomputed rather than trusted.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
        let header = reader.headers()?.clone();
        let mut columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if columns.last().map(String::as_str) == Some("Avg") {
            columns.pop();
        }
        let mut models = Vec::new();
        let mut cells = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            models.push(record.get(0).unwrap_or_default().to_string());
            let row = record
                .iter()
                .skip(1)
                .take(columns.len())
                .map(|f| {
                    if f.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        f.parse::<f64>()
                            .map_err(|_| parse_err(line, format!("`{f}` is not a number")))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            cells.push(row);
        }
        PerformanceTable::new(models, columns, cells)
    }
}

/// Held-out score matrices by model and dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreStore {
    cells: BTreeMap<String, BTreeMap<String, ScoreMatrix>>,
}

impl ScoreStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, dataset: &str, scores: ScoreMatrix) {
        self.cells
            .entry(model.to_string())
            .or_default()
            .insert(dataset.to_string(), scores);
    }

    pub fn get(&self, model: &str, dataset: &str) -> Option<&ScoreMatrix> {
        self.cells.get(model)?.get(dataset)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &ScoreMatrix)> {
        self.cells
            .iter()
            .flat_map(|(m, ds)| ds.iter().map(move |(d, s)| (m.as_str(), d.as_str(), s)))
    }

    /// Writes `<root>/<model>/<dataset>.csv` for every cell.
    pub fn write_dir(&self, root: &Path) -> Result<()> {
        for (model, dataset, scores) in self.iter() {
            let dir = root.join(model);
            fs::create_dir_all(&dir)?;
            write_score_csv(&dir.join(format!("{dataset}.csv")), scores)?;
        }
        Ok(())
    }
}

/// Columns `p0..p{C-1},label`, one row per sample.
pub fn write_score_csv(path: &Path, scores: &ScoreMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..scores.classes()).map(|c| format!("p{c}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in scores.probs.iter_rows().zip(&scores.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_score_csv(path: &Path) -> Result<ScoreMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let classes = reader.headers()?.len().saturating_sub(1);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        for f in record.iter().take(classes) {
            data.push(f.parse::<f64>().map_err(|_| bad(format!("`{f}` is not a number")))?);
        }
        let f = record.get(classes).unwrap_or_default();
        labels.push(f.parse::<usize>().map_err(|_| bad(format!("`{f}` is not a label")))?);
    }
    ScoreMatrix::new(Matrix::from_vec(labels.len(), classes, data)?, labels)
}
