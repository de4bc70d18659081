//! On-disk dataset layout: a JSON manifest listing items by id, with either
//! per-item feature CSVs (plus a sidecar describing the extraction) or one
//! shared feature matrix, and `id,label` CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{LmsConfig, LmsFeature};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Wav,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    /// Feature CSV path relative to the manifest, for per-item datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Row in the shared feature matrix, for matrix datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureItem {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    /// CSV with one feature vector per row, relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features_matrix: Option<String>,
    pub items: Vec<ManifestItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureItem>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = read_text(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Labels for every item, in item order; `None` when no item carries one.
    pub fn labels(&self) -> Result<Option<Vec<usize>>> {
        let labeled = self.items.iter().filter(|i| i.label.is_some()).count();
        if labeled == 0 {
            return Ok(None);
        }
        if labeled != self.items.len() {
            return Err(Error::InvalidInput(format!(
                "{} of {} items carry labels; labels must be all or none",
                labeled,
                self.items.len()
            )));
        }
        Ok(Some(self.items.iter().map(|i| i.label.unwrap()).collect()))
    }
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidInput("refusing to write an empty matrix".into()));
    }
    let mut text = String::new();
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                text.push(',');
            }
            write!(text, "{v}").unwrap();
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| Error::Csv {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    detail: format!("bad number {cell:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    detail: format!("{} columns, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            detail: "no rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}

pub fn write_labels_csv(path: &Path, rows: &[(String, usize)]) -> Result<()> {
    let mut text = String::from("id,label\n");
    for (id, label) in rows {
        if id.contains(',') || id.contains('\n') {
            return Err(Error::InvalidInput(format!("id {id:?} contains a separator")));
        }
        writeln!(text, "{id},{label}").unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = read_text(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (lineno == 0 && line.trim() == "id,label") {
            continue;
        }
        let (id, label) = line.rsplit_once(',').ok_or_else(|| Error::Csv {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: "expected id,label".into(),
        })?;
        let label = label.trim().parse::<usize>().map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: format!("bad label {label:?}: {e}"),
        })?;
        rows.push((id.trim().to_string(), label));
    }
    if rows.is_empty() {
        return Err(Error::Csv { path: path.to_path_buf(), line: 1, detail: "no rows".into() });
    }
    Ok(rows)
}

/// Extraction settings stored next to each feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmsSidecar {
    pub config: LmsConfig,
    pub sample_rate: u32,
    pub n_frames: usize,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write `<id>.lms.csv` and `<id>.lms.json` into `dir`; returns the CSV name.
pub fn write_lms(dir: &Path, id: &str, feature: &LmsFeature, sample_rate: u32) -> Result<String> {
    let name = format!("{id}.lms.csv");
    write_matrix_csv(&dir.join(&name), &feature.values)?;
    let sidecar = LmsSidecar {
        config: feature.config.clone(),
        sample_rate,
        n_frames: feature.n_frames(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    fs::write(sidecar_path(&dir.join(&name)), text)?;
    Ok(name)
}

pub fn read_lms(csv_path: &Path) -> Result<(LmsFeature, LmsSidecar)> {
    let values = read_matrix_csv(csv_path)?;
    let sidecar_file = sidecar_path(csv_path);
    let text = fs::read_to_string(&sidecar_file).map_err(|e| {
        Error::InvalidInput(format!("missing sidecar {}: {e}", sidecar_file.display()))
    })?;
    let sidecar: LmsSidecar = serde_json::from_str(&text)?;
    if values.cols() != sidecar.n_frames {
        return Err(Error::InvalidInput(format!(
            "{} has {} frames but its sidecar says {}",
            csv_path.display(),
            values.cols(),
            sidecar.n_frames
        )));
    }
    Ok((LmsFeature { values, config: sidecar.config.clone() }, sidecar))
}

/// Load a per-item feature dataset in manifest order.
pub fn load_feature_dataset(
    manifest_path: &Path,
) -> Result<(Vec<String>, Vec<LmsFeature>, Option<Vec<usize>>)> {
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    if manifest.items.is_empty() {
        return Err(Error::InvalidInput("manifest has no items".into()));
    }
    let mut ids = Vec::new();
    let mut features = Vec::new();
    for item in &manifest.items {
        let rel = item.path.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("item {} has no feature path", item.id))
        })?;
        let (feature, _) = read_lms(&dir.join(rel))?;
        ids.push(item.id.clone());
        features.push(feature);
    }
    let labels = manifest.labels()?;
    Ok((ids, features, labels))
}

/// Load a shared-matrix dataset in manifest order.
pub fn load_matrix_dataset(
    manifest_path: &Path,
) -> Result<(Vec<String>, Matrix, Option<Vec<usize>>)> {
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let rel = manifest.features_matrix.as_ref().ok_or_else(|| {
        Error::InvalidInput("manifest has no shared feature matrix".into())
    })?;
    let full = read_matrix_csv(&dir.join(rel))?;
    if manifest.items.is_empty() {
        return Err(Error::InvalidInput("manifest has no items".into()));
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for item in &manifest.items {
        let row = item.row.ok_or_else(|| {
            Error::InvalidInput(format!("item {} has no matrix row", item.id))
        })?;
        if row >= full.rows() {
            return Err(Error::InvalidInput(format!(
                "item {} points at row {row} of a {}-row matrix",
                item.id,
                full.rows()
            )));
        }
        ids.push(item.id.clone());
        rows.push(full.row(row).to_vec());
    }
    let labels = manifest.labels()?;
    Ok((ids, Matrix::from_rows(&rows)?, labels))
}
