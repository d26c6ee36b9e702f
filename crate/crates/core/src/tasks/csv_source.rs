//! Federations loaded from CSV files.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::loss::{ClientData, Federation, LossKind, Targets};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CsvTask {
    Regression,
    /// Class count defaults to `1 + max label` over all clients.
    Classification {
        #[serde(default)]
        classes: Option<usize>,
    },
}

/// Where and how to read client data.
///
/// With `client_column` unset each file is one client and files may have
/// different feature columns. With it set, every file is split by the
/// values of that column (clients ordered by first appearance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub files: Vec<PathBuf>,
    pub target: String,
    #[serde(default)]
    pub client_column: Option<String>,
    pub task: CsvTask,
    #[serde(default)]
    pub l2: f64,
}

struct RawClient {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    width: usize,
    origin: PathBuf,
}

fn csv_err(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn parse_cell(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| csv_err(path, row, column, format!("non-numeric value `{cell}`")))?;
    if !v.is_finite() {
        return Err(csv_err(
            path,
            row,
            column,
            format!("non-finite value `{cell}`"),
        ));
    }
    Ok(v)
}

fn read_file(path: &Path, src: &CsvSource, out: &mut Vec<(String, RawClient)>) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, "", format!("cannot open: {e}")))?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| *h == src.target)
        .ok_or_else(|| csv_err(path, 0, &src.target, "missing target column"))?;
    let client_idx = match &src.client_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| csv_err(path, 0, name, "missing client column"))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&k| k != target_idx && Some(k) != client_idx)
        .collect();
    if feature_idx.is_empty() {
        return Err(csv_err(path, 0, "", "no feature columns"));
    }
    let file_key = path.display().to_string();
    let start = out.len();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_err(path, row, "", e.to_string()))?;
        if record.len() != headers.len() {
            return Err(csv_err(
                path,
                row,
                "",
                format!("expected {} cells, found {}", headers.len(), record.len()),
            ));
        }
        let key = match client_idx {
            Some(k) => record[k].trim().to_string(),
            None => file_key.clone(),
        };
        let feats = feature_idx
            .iter()
            .map(|&k| parse_cell(path, row, &headers[k], &record[k]))
            .collect::<Result<Vec<_>>>()?;
        let target = parse_cell(path, row, &headers[target_idx], &record[target_idx])?;
        let slot = match out[start..].iter().position(|(k, _)| *k == key) {
            Some(s) => start + s,
            None => {
                out.push((
                    key,
                    RawClient {
                        rows: Vec::new(),
                        targets: Vec::new(),
                        width: feature_idx.len(),
                        origin: path.to_path_buf(),
                    },
                ));
                out.len() - 1
            }
        };
        out[slot].1.rows.push(feats);
        out[slot].1.targets.push(target);
    }
    if out.len() == start {
        return Err(csv_err(path, 0, "", "file has no data rows (empty client)"));
    }
    Ok(())
}

/// Reads every file and builds one client per file or per client id.
pub fn load_csv_federation(src: &CsvSource) -> Result<Federation> {
    if src.files.is_empty() {
        return Err(Error::param("files", "no CSV files given"));
    }
    let mut raw = Vec::new();
    for path in &src.files {
        read_file(path, src, &mut raw)?;
    }
    let classes = match src.task {
        CsvTask::Regression => None,
        CsvTask::Classification { classes } => {
            let mut max_label = 0usize;
            for (_, c) in &raw {
                for (r, &t) in c.targets.iter().enumerate() {
                    if t < 0.0 || t.fract() != 0.0 {
                        return Err(csv_err(
                            &c.origin,
                            r + 1,
                            &src.target,
                            format!("label {t} is not a nonnegative integer"),
                        ));
                    }
                    max_label = max_label.max(t as usize);
                }
            }
            let inferred = (max_label + 1).max(2);
            match classes {
                Some(k) if k <= max_label => {
                    return Err(Error::param(
                        "classes",
                        format!("label {max_label} does not fit {k} classes"),
                    ))
                }
                Some(k) => Some(k),
                None => Some(inferred),
            }
        }
    };
    let clients = raw
        .into_iter()
        .map(|(_, c)| {
            let x = DMatrix::from_fn(c.rows.len(), c.width, |r, k| c.rows[r][k]);
            let (targets, kind) = match classes {
                None => (Targets::Real(c.targets), LossKind::LinearRegression),
                Some(k) => (
                    Targets::Labels(c.targets.iter().map(|&t| t as usize).collect()),
                    LossKind::Multinomial { classes: k },
                ),
            };
            ClientData::new(x, targets, kind, src.l2)
        })
        .collect::<Result<Vec<_>>>()?;
    Federation::new(clients)
}

/// Writes one client as CSV with columns `f0..f{p-1},target`.
pub fn write_client_csv(path: &Path, client: &ClientData) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let p = client.n_features();
    let mut header: Vec<String> = (0..p).map(|k| format!("f{k}")).collect();
    header.push("target".into());
    w.write_record(&header)?;
    for r in 0..client.n_samples() {
        let mut rec: Vec<String> = client
            .features()
            .row(r)
            .iter()
            .map(|v| v.to_string())
            .collect();
        rec.push(match client.targets() {
            Targets::Real(y) => y[r].to_string(),
            Targets::Labels(y) => y[r].to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
