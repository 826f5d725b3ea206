//! Grid-search experiments over datasets, methods and regularizer strengths.
//!
//! Each cell of `datasets × methods × grid points` runs a multi-init fit and
//! an evaluation in its own output directory. Cells whose record already
//! exists are reused unless forced. The collected rows are written as a tidy
//! table (`results.csv`, `results.json`) together with a per-configuration
//! summary of the factor match score.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::AlsConfig;
use crate::error::{Error, Result};
use crate::io::{self, Dataset};
use crate::prox::Regularizer;
use crate::runner::{evaluate, fit_multi, save_fit, FitMethod, MultiFitOptions, METRICS_FILE};
use crate::solver::SolverConfig;

pub const CELL_FILE: &str = "cell.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[serde(rename = "aoadmm")]
    AoAdmm,
    Als,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::AoAdmm => "aoadmm",
            MethodName::Als => "als",
        }
    }
}

/// Candidate regularizers for one mode: every kind, crossed with every
/// strength for the kinds that take one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub kinds: Vec<String>,
    #[serde(default)]
    pub strengths: Vec<f64>,
}

impl Default for ModeGrid {
    fn default() -> Self {
        ModeGrid {
            kinds: vec!["none".into()],
            strengths: Vec::new(),
        }
    }
}

impl ModeGrid {
    pub fn expand(&self) -> Result<Vec<Regularizer>> {
        if self.kinds.is_empty() {
            return Err(Error::config("regularizer grid lists no kinds"));
        }
        let mut out = Vec::new();
        for kind in &self.kinds {
            let probe = Regularizer::from_kind(kind, 1.0)?;
            if matches!(probe, Regularizer::None | Regularizer::NonNeg) {
                out.push(probe);
                continue;
            }
            if self.strengths.is_empty() {
                return Err(Error::config(format!("kind '{kind}' needs at least one strength")));
            }
            for &s in &self.strengths {
                let reg = Regularizer::from_kind(kind, s)?;
                reg.validate()?;
                out.push(reg);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularizerGrid {
    #[serde(default)]
    pub a: ModeGrid,
    #[serde(default)]
    pub b: ModeGrid,
    #[serde(default)]
    pub d: ModeGrid,
    /// Pair the `A` and `D` candidates index by index instead of crossing
    /// them, so both modes share one strength.
    #[serde(default)]
    pub link_a_d: bool,
}

/// One AO-ADMM configuration of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub a: Regularizer,
    pub b: Regularizer,
    pub d: Regularizer,
}

impl GridPoint {
    pub fn label(&self) -> String {
        format!("a={};b={};d={}", self.a, self.b, self.d)
    }
}

impl RegularizerGrid {
    /// All grid points, `B` candidates outermost.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let a = self.a.expand()?;
        let b = self.b.expand()?;
        let d = self.d.expand()?;
        let ad: Vec<(Regularizer, Regularizer)> = if self.link_a_d {
            if a.len() != d.len() {
                return Err(Error::config(format!(
                    "linked A and D grids differ in length ({} vs {})",
                    a.len(),
                    d.len()
                )));
            }
            a.into_iter().zip(d).collect()
        } else {
            a.iter()
                .flat_map(|ra| d.iter().map(move |rd| (ra.clone(), rd.clone())))
                .collect()
        };
        Ok(b.iter()
            .flat_map(|rb| {
                ad.iter().map(move |(ra, rd)| GridPoint {
                    a: ra.clone(),
                    b: rb.clone(),
                    d: rd.clone(),
                })
            })
            .collect())
    }
}

fn default_inits() -> usize {
    5
}

fn default_true() -> bool {
    true
}

fn default_schema() -> u32 {
    io::SCHEMA_VERSION
}

/// An experiment description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    /// Glob patterns of dataset directories, relative to the experiment file.
    pub datasets: Vec<String>,
    pub methods: Vec<MethodName>,
    pub rank: usize,
    #[serde(default = "default_inits")]
    pub n_inits: usize,
    #[serde(default)]
    pub seed: u64,
    /// Regularizers searched by AO-ADMM; ALS runs once per dataset.
    #[serde(default)]
    pub grid: RegularizerGrid,
    #[serde(default)]
    pub als_nonneg_a: bool,
    #[serde(default)]
    pub outer_max_iter: Option<usize>,
    #[serde(default = "default_true")]
    pub keep_traces: bool,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
    pub output: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != io::SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.datasets.is_empty() {
            return Err(Error::config("no dataset patterns given"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods given"));
        }
        if self.rank == 0 {
            return Err(Error::config("rank must be at least one"));
        }
        if self.n_inits == 0 {
            return Err(Error::config("n_inits must be at least one"));
        }
        if self.outer_max_iter == Some(0) {
            return Err(Error::config("outer_max_iter must be positive"));
        }
        if self.jobs == Some(0) {
            return Err(Error::config("jobs must be positive"));
        }
        self.grid.points().map(|_| ())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Dataset directories matched by the patterns, sorted and deduplicated.
    pub fn resolve_datasets(&self, base: &Path) -> Result<Vec<PathBuf>> {
        let mut dirs = Vec::new();
        for pattern in &self.datasets {
            let full = if Path::new(pattern).is_absolute() {
                PathBuf::from(pattern)
            } else {
                base.join(pattern)
            };
            let text = full.to_string_lossy().into_owned();
            let paths =
                glob::glob(&text).map_err(|e| Error::config(format!("bad dataset pattern '{pattern}': {e}")))?;
            for entry in paths {
                let path = entry.map_err(|e| Error::io(e.path().to_path_buf(), e.into()))?;
                if path.join(io::MANIFEST_FILE).is_file() {
                    dirs.push(path);
                }
            }
        }
        dirs.sort();
        dirs.dedup();
        if dirs.is_empty() {
            return Err(Error::config("dataset patterns matched no dataset directories"));
        }
        Ok(dirs)
    }

    fn method_for(&self, method: MethodName, point: Option<&GridPoint>) -> FitMethod {
        match method {
            MethodName::AoAdmm => {
                let p = point.expect("AO-ADMM cells carry a grid point");
                let mut cfg = SolverConfig::new(self.rank).with_regularizers(p.a.clone(), p.b.clone(), p.d.clone());
                if let Some(n) = self.outer_max_iter {
                    cfg.outer_max_iter = n;
                }
                FitMethod::AoAdmm(cfg)
            }
            MethodName::Als => {
                let mut cfg = AlsConfig::new(self.rank);
                cfg.nonneg_a = self.als_nonneg_a;
                if let Some(n) = self.outer_max_iter {
                    cfg.outer_max_iter = n;
                }
                FitMethod::Als(cfg)
            }
        }
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: MethodName,
    pub grid_point: String,
    pub fms: Option<f64>,
    pub relative_sse: Option<f64>,
    pub time_secs: f64,
    pub iterations: Option<usize>,
    pub chosen_init: Option<usize>,
    pub status: String,
    pub error: Option<String>,
}

/// FMS statistics of one configuration over datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: MethodName,
    pub grid_point: String,
    pub n: usize,
    pub n_failed: usize,
    pub fms_mean: Option<f64>,
    /// Population standard deviation.
    pub fms_std: Option<f64>,
    /// `"mean ± std"` with two decimals.
    pub fms_display: String,
    pub relative_sse_mean: Option<f64>,
    pub time_secs_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Grid point with the highest mean FMS, per method.
    pub best: Vec<SummaryRow>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

struct Cell {
    dataset: usize,
    method: MethodName,
    point: Option<(usize, GridPoint)>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Aggregate rows per `(method, grid point)` in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut order: Vec<(MethodName, String)> = Vec::new();
    let mut groups: BTreeMap<(MethodName, String), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        let key = (row.method, row.grid_point.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    let summary_rows: Vec<SummaryRow> = order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let fms: Vec<f64> = group.iter().filter_map(|r| r.fms).collect();
            let sse: Vec<f64> = group.iter().filter_map(|r| r.relative_sse).collect();
            let mut times: Vec<f64> = group.iter().map(|r| r.time_secs).collect();
            let stats = mean_std(&fms);
            SummaryRow {
                method: key.0,
                grid_point: key.1.clone(),
                n: group.len(),
                n_failed: group.len() - fms.len(),
                fms_mean: stats.map(|s| s.0),
                fms_std: stats.map(|s| s.1),
                fms_display: stats.map_or_else(|| "n/a".to_string(), |(m, s)| format_mean_std(m, s)),
                relative_sse_mean: mean_std(&sse).map(|s| s.0),
                time_secs_median: median(&mut times),
            }
        })
        .collect();
    let mut best: Vec<SummaryRow> = Vec::new();
    for row in &summary_rows {
        let Some(mean) = row.fms_mean else { continue };
        match best.iter_mut().find(|b| b.method == row.method) {
            Some(b) if b.fms_mean.is_some_and(|m| m >= mean) => {}
            Some(b) => *b = row.clone(),
            None => best.push(row.clone()),
        }
    }
    Summary {
        rows: summary_rows,
        best,
    }
}

fn dataset_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn run_cell(
    spec: &ExperimentSpec,
    data: &Dataset,
    label: &str,
    cell: &Cell,
    dir: &Path,
    force: bool,
) -> Result<ResultRow> {
    let record = dir.join(CELL_FILE);
    if !force && record.is_file() {
        if let Ok(row) = io::read_json::<ResultRow>(&record) {
            return Ok(row);
        }
    }
    let point = cell.point.as_ref().map(|(_, p)| p);
    let method = spec.method_for(cell.method, point);
    let mut row = ResultRow {
        dataset: label.to_string(),
        method: cell.method,
        grid_point: point.map_or_else(|| "-".to_string(), GridPoint::label),
        fms: None,
        relative_sse: None,
        time_secs: 0.0,
        iterations: None,
        chosen_init: None,
        status: "ok".into(),
        error: None,
    };
    let options = MultiFitOptions {
        n_inits: spec.n_inits,
        base_seed: spec.seed,
        keep_traces: spec.keep_traces,
    };
    match fit_multi(&data.stack, &method, options) {
        Ok((factors, report)) => {
            save_fit(dir, &factors, &report)?;
            let metrics = evaluate(&data.stack, &factors, data.truth.as_ref())?;
            io::write_json(&dir.join(METRICS_FILE), &metrics)?;
            row.fms = metrics.fms;
            row.relative_sse = Some(metrics.relative_sse);
            row.time_secs = report.total_wall_time_secs;
            row.iterations = Some(report.iterations());
            row.chosen_init = Some(report.chosen_init);
        }
        Err(e) => {
            log::warn!("cell {label}/{} failed: {e}", row.grid_point);
            row.status = "failed".into();
            row.error = Some(e.to_string());
        }
    }
    io::write_json(&record, &row)?;
    Ok(row)
}

/// Run every cell of `spec`; relative paths resolve against `base`.
pub fn run_experiment(spec: &ExperimentSpec, base: &Path, force: bool) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let paths = spec.resolve_datasets(base)?;
    let datasets = paths.iter().map(|p| io::load_dataset(p)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| format!("d{i:03}_{}", dataset_label(p)))
        .collect();
    let points = spec.grid.points()?;

    let mut cells = Vec::new();
    for dataset in 0..datasets.len() {
        for &method in &spec.methods {
            match method {
                MethodName::AoAdmm => {
                    for (i, p) in points.iter().enumerate() {
                        cells.push(Cell {
                            dataset,
                            method,
                            point: Some((i, p.clone())),
                        });
                    }
                }
                MethodName::Als => cells.push(Cell {
                    dataset,
                    method,
                    point: None,
                }),
            }
        }
    }

    let output = if spec.output.is_absolute() {
        spec.output.clone()
    } else {
        base.join(&spec.output)
    };
    std::fs::create_dir_all(&output).map_err(|e| Error::io(&output, e))?;
    io::write_json(&output.join("experiment.json"), spec)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = spec.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let label = &labels[cell.dataset];
                let leaf = match &cell.point {
                    Some((i, _)) => format!("g{i:03}"),
                    None => "default".to_string(),
                };
                let dir = output.join("cells").join(label).join(cell.method.as_str()).join(leaf);
                run_cell(spec, &datasets[cell.dataset], label, cell, &dir, force)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary = summarize(&rows);
    write_rows_csv(&output.join("results.csv"), &rows)?;
    io::write_json(&output.join("results.json"), &rows)?;
    write_rows_csv(&output.join("summary.csv"), &summary.rows)?;
    io::write_json(&output.join("summary.json"), &summary)?;
    Ok(ExperimentOutcome { rows, summary })
}

fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    io::write_atomic(path, &bytes)
}

/// Read back a `results.csv` table.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}
