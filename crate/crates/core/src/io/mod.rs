//! CSV ingestion and JSON model files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{mean_and_sd, DataMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{EstimatorSpec, FittedEstimator};
use crate::marginals::MarginalSelection;
use crate::numerics::Matrix;
use crate::seed::SEED_SCHEME;

/// Bumped whenever the model file layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HeaderMode {
    /// Treat the first row as a header when none of its cells parse as numbers.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub header: HeaderMode,
}

/// A parsed CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub data: DataMatrix,
}

impl DatasetFile {
    /// Column `(mean, sample sd)` pairs.
    pub fn column_stats(&self) -> Vec<(f64, f64)> {
        (0..self.data.ncols()).map(|j| mean_and_sd(&self.data.column(j))).collect()
    }
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

/// Read a comma-separated numeric file. Rows are reported by their line
/// number in the file.
pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<DatasetFile> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        let first = idx == 0;
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(|c| c.parse::<f64>()).collect();
        let is_header = first
            && match options.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => parsed.iter().all(|p| p.is_err()),
            };
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    path,
                    format!("row {line} has {} fields, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        if is_header {
            header = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => return Err(parse_err(path, format!("non-finite value {v} at row {line}, column {}", j + 1))),
                Err(_) => {
                    return Err(parse_err(
                        path,
                        format!("non-numeric cell '{}' at row {line}, column {}", &record[j], j + 1),
                    ))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no data rows".into()));
    }
    let mut data = DataMatrix::new(Matrix::from_rows(&rows)).map_err(|e| parse_err(path, e.to_string()))?;
    if let Some(h) = &header {
        data = data.with_names(h.clone())?;
    }
    Ok(DatasetFile {
        path: path.to_path_buf(),
        header,
        data,
    })
}

/// Write `data` with its column names, or `x1..xd` when it has none.
pub fn write_csv<W: Write>(data: &DataMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<String> = match data.names() {
        Some(n) => n.to_vec(),
        None => (1..=data.ncols()).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(&names).map_err(csv_io)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Write the output of `body` to `path` through a temporary file in the
/// same directory, renamed into place once complete.
pub fn write_atomic(path: impl AsRef<Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn save_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, |w| write_csv(data, w))
}

/// Shape and fit of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub n: usize,
    pub d: usize,
    pub columns: Option<Vec<String>>,
    /// `Σ_i ln f̂(y_i)` over the training rows.
    pub loglik: f64,
}

/// Everything needed to reload and rescore a fitted estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub estimator: String,
    pub seed: u64,
    pub seed_scheme: String,
    pub spec: EstimatorSpec,
    pub marginal_selection: Vec<MarginalSelection>,
    pub training: TrainingInfo,
    pub model: FittedEstimator,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

impl ModelFile {
    pub fn new(
        spec: EstimatorSpec,
        seed: u64,
        marginal_selection: Vec<MarginalSelection>,
        training: TrainingInfo,
        model: FittedEstimator,
    ) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            estimator: spec.id.to_string(),
            seed,
            seed_scheme: SEED_SCHEME.into(),
            spec,
            marginal_selection,
            training,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_err(path, e.to_string()))?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: probe.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        serde_json::from_str(text).map_err(|e| parse_err(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = self.to_json()?;
        write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path)
    }
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Result<DatasetFile> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, text).unwrap();
        load_csv(&p, CsvOptions::default())
    }

    #[test]
    fn header_detected() {
        let f = load_str("a,b\n1,2\n3,4").unwrap();
        assert_eq!(f.header.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!((f.data.nrows(), f.data.ncols()), (2, 2));
        assert_eq!(f.data.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let e = load_str("1,2\n3").unwrap_err();
        assert!(matches!(&e, Error::Parse { message, .. } if message.contains("row 2")), "{e}");
    }

    #[test]
    fn bad_cells() {
        let e = load_str("a,b\n1,2\n3,x\n").unwrap_err();
        assert!(e.to_string().contains("row 3, column 2"), "{e}");
        assert!(load_str("1,inf\n").is_err());
        assert!(load_str("").is_err());
        assert!(load_str("a,b\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = DataMatrix::from_rows(&[vec![0.1, -2.5e-7], vec![3.0, 1e300]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let f = load_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(f.data.matrix(), d.matrix());
        assert_eq!(f.header.unwrap(), vec!["x1", "x2"]);
    }
}
