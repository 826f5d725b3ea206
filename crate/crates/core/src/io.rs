//! On-disk formats: CSV matrices and JSON manifests.
//!
//! Matrices are RFC-4180 CSV without a header, one matrix row per line,
//! every value written with 17 significant digits so that loading a saved
//! file reproduces the doubles exactly. All writes go to a temporary file in
//! the destination directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::Setup;
use crate::tensor::{Matrix, Pf2Factors, SliceStack};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Format a double with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `bytes` to `path` through a temporary file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn matrix_to_csv(m: &Matrix) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&v| format_f64(v)))
            .map_err(|e| Error::format("<memory>", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::format("<memory>", e.to_string()))
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, &matrix_to_csv(m)?)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes.as_slice());
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::format(
                    path,
                    format!("row {} has {} fields, expected {c}", rows + 1, record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("not a number: '{field}'")))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(path, "empty matrix file"))?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Relative file names of a stored factor set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFiles {
    pub a: String,
    pub d: String,
    pub b: Vec<String>,
}

impl FactorFiles {
    pub fn standard(n_slices: usize) -> Self {
        FactorFiles {
            a: "A.csv".into(),
            d: "D.csv".into(),
            b: (0..n_slices).map(|k| format!("B_{k:03}.csv")).collect(),
        }
    }
}

pub fn slice_file_name(k: usize) -> String {
    format!("X_{k:03}.csv")
}

/// Describes a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub library_version: String,
    #[serde(rename = "I")]
    pub n_rows: usize,
    #[serde(rename = "J")]
    pub slice_cols: Vec<usize>,
    #[serde(rename = "K")]
    pub n_slices: usize,
    pub true_rank: Option<usize>,
    pub setup: Option<Setup>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub slices: Vec<String>,
    pub true_factors: Option<FactorFiles>,
}

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub stack: SliceStack,
    pub truth: Option<Pf2Factors>,
}

/// Metadata recorded with a saved dataset.
#[derive(Debug, Clone, Default)]
pub struct DatasetMeta {
    pub setup: Option<Setup>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
}

pub fn save_factors(dir: &Path, files: &FactorFiles, f: &Pf2Factors) -> Result<()> {
    write_matrix_csv(&dir.join(&files.a), &f.a)?;
    write_matrix_csv(&dir.join(&files.d), &f.d)?;
    for (name, bk) in files.b.iter().zip(&f.b) {
        write_matrix_csv(&dir.join(name), bk)?;
    }
    Ok(())
}

pub fn load_factors(dir: &Path, files: &FactorFiles) -> Result<Pf2Factors> {
    let a = read_matrix_csv(&dir.join(&files.a))?;
    let d = read_matrix_csv(&dir.join(&files.d))?;
    let b = files
        .b
        .iter()
        .map(|name| read_matrix_csv(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    Pf2Factors::new(a, d, b).map_err(|e| Error::format(dir, e.to_string()))
}

/// Load factors stored with the standard names, discovering `K` from `D.csv`.
pub fn load_standard_factors(dir: &Path) -> Result<Pf2Factors> {
    let d = read_matrix_csv(&dir.join("D.csv"))?;
    load_factors(dir, &FactorFiles::standard(d.nrows()))
}

pub fn save_dataset(
    dir: &Path,
    stack: &SliceStack,
    truth: Option<&Pf2Factors>,
    meta: &DatasetMeta,
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let slices: Vec<String> = (0..stack.n_slices()).map(slice_file_name).collect();
    for (name, x) in slices.iter().zip(stack.slices()) {
        write_matrix_csv(&dir.join(name), x)?;
    }
    let true_factors = match truth {
        Some(f) => {
            f.check_compatible(stack)?;
            let files = FactorFiles::standard(stack.n_slices());
            save_factors(dir, &files, f)?;
            Some(files)
        }
        None => None,
    };
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        library_version: crate::VERSION.to_string(),
        n_rows: stack.n_rows(),
        slice_cols: stack.col_counts(),
        n_slices: stack.n_slices(),
        true_rank: truth.map(|f| f.rank()),
        setup: meta.setup,
        eta: meta.eta,
        seed: meta.seed,
        slices,
        true_factors,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: DatasetManifest = read_json(&manifest_path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported schema_version {}", manifest.schema_version),
        ));
    }
    if manifest.slices.len() != manifest.n_slices || manifest.slice_cols.len() != manifest.n_slices {
        return Err(Error::format(&manifest_path, "K disagrees with the listed slices"));
    }
    let slices = manifest
        .slices
        .iter()
        .map(|name| read_matrix_csv(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    for (k, x) in slices.iter().enumerate() {
        if x.nrows() != manifest.n_rows || x.ncols() != manifest.slice_cols[k] {
            return Err(Error::format(
                dir.join(&manifest.slices[k]),
                format!(
                    "slice is {}×{}, manifest declares {}×{}",
                    x.nrows(),
                    x.ncols(),
                    manifest.n_rows,
                    manifest.slice_cols[k]
                ),
            ));
        }
    }
    let stack = SliceStack::new(slices).map_err(|e| Error::format(dir, e.to_string()))?;
    let truth = match &manifest.true_factors {
        Some(files) => {
            let f = load_factors(dir, files)?;
            f.check_compatible(&stack)
                .map_err(|e| Error::format(dir, e.to_string()))?;
            if manifest.true_rank.is_some_and(|r| r != f.rank()) {
                return Err(Error::format(
                    &manifest_path,
                    "true_rank disagrees with the factor files",
                ));
            }
            Some(f)
        }
        None => None,
    };
    Ok(Dataset {
        dir: dir.to_path_buf(),
        manifest,
        stack,
        truth,
    })
}
