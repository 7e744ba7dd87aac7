//! File formats: numeric CSV data, label files, fitted-model JSON and the
//! grid and parameter-count tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aecm::{FitConfig, FitResult, SkewMode};
use crate::error::{Error, Result};
use crate::metrics::GridCell;
use crate::model::{DataMatrix, MixtureParams, ParsimonyRow};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Parses a numeric CSV. The first record is a header when any of its cells
/// fails to parse as a number. Blank and `NA` cells are rejected with their
/// 1-based row and column.
pub fn parse_data_csv<R: Read>(reader: R) -> Result<DataMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = idx + 1;
        if idx == 0 && rec.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err() && !is_missing(c)) {
            header = Some(rec.iter().map(str::to_owned).collect());
            width = Some(rec.len());
            continue;
        }
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::Input(format!("row {line} has {} fields, expected {w}", rec.len())));
            }
            _ => width = Some(rec.len()),
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            if is_missing(cell) {
                return Err(Error::Input(format!("missing value at row {line}, column {}", j + 1)));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Input(format!("non-numeric value '{cell}' at row {line}, column {}", j + 1)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("non-finite value at row {line}, column {}", j + 1)));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input("data file has no numeric rows".into()));
    }
    let p = rows[0].len();
    let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    DataMatrix::new(values, header)
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

pub fn read_data_csv(path: &Path) -> Result<DataMatrix<f64>> {
    parse_data_csv(File::open(path)?)
}

/// Writes data with a `x1..xp` header (or the stored column names).
pub fn write_data_csv(path: &Path, data: &DataMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match data.column_names() {
        Some(names) => w.write_record(names)?,
        None => w.write_record((1..=data.p()).map(|j| format!("x{j}")))?,
    }
    let x = data.values();
    for i in 0..data.n() {
        w.write_record((0..data.p()).map(|j| x[(i, j)].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a single-column label file. A first line equal to `label`, `class`,
/// `cluster` or `group` (any case) is treated as a header.
pub fn parse_labels<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 1 {
            return Err(Error::Input(format!("label file row {} has {} fields, expected 1", idx + 1, rec.len())));
        }
        let cell = rec[0].to_owned();
        if idx == 0 && ["label", "labels", "class", "cluster", "group"].iter().any(|h| cell.eq_ignore_ascii_case(h)) {
            continue;
        }
        if cell.is_empty() {
            return Err(Error::Input(format!("empty label at row {}", idx + 1)));
        }
        out.push(cell);
    }
    if out.is_empty() {
        return Err(Error::Input("label file is empty".into()));
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    parse_labels(File::open(path)?)
}

/// Maps string labels to `0..k` in order of first appearance.
pub fn encode_labels(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut map: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let codes = labels
        .iter()
        .map(|l| {
            *map.entry(l.as_str()).or_insert_with(|| {
                names.push(l.clone());
                names.len() - 1
            })
        })
        .collect();
    (codes, names)
}

/// Writes labels as a one-column CSV with header `label`, 1-based.
pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "label")?;
    for l in labels {
        writeln!(f, "{}", l + 1)?;
    }
    f.flush()?;
    Ok(())
}

/// Fit statistics stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub loglik: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub config: FitConfig,
}

/// Fitted model on disk. Matrices are stored row-major as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    /// `mcstfa` or `mctfa`.
    pub model: String,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub weights: Vec<f64>,
    pub loadings: Vec<Vec<f64>>,
    pub factor_means: Vec<Vec<f64>>,
    pub factor_skews: Vec<Vec<f64>>,
    pub factor_covs: Vec<Vec<Vec<f64>>>,
    pub noise_diag: Vec<f64>,
    pub dof: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitMetadata>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>], nrow: usize, ncol: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrow || rows.iter().any(|r| r.len() != ncol) {
        return Err(Error::Input(format!("{what} must be {nrow} x {ncol}")));
    }
    Ok(DMatrix::from_fn(nrow, ncol, |i, j| rows[i][j]))
}

fn vector_of(v: &[f64], len: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::Input(format!("{what} must have {len} entries, found {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl ModelFile {
    pub fn from_params(params: &MixtureParams<f64>, skew: SkewMode, fit: Option<FitMetadata>) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            model: match skew {
                SkewMode::Free => "mcstfa".into(),
                SkewMode::Zero => "mctfa".into(),
            },
            p: params.p(),
            q: params.q(),
            g: params.g(),
            weights: params.weights.iter().copied().collect(),
            loadings: rows_of(&params.loadings),
            factor_means: params.factor_means.iter().map(|v| v.iter().copied().collect()).collect(),
            factor_skews: params.factor_skews.iter().map(|v| v.iter().copied().collect()).collect(),
            factor_covs: params.factor_covs.iter().map(rows_of).collect(),
            noise_diag: params.noise_diag.iter().copied().collect(),
            dof: params.dof.iter().copied().collect(),
            fit,
        }
    }

    pub fn from_fit(fit: &FitResult<f64>, config: &FitConfig) -> Self {
        let meta = FitMetadata {
            loglik: fit.loglik(),
            bic: fit.bic,
            iterations: fit.iterations,
            converged: fit.converged,
            seed: config.seed,
            config: config.clone(),
        };
        Self::from_params(&fit.params, fit.skew, Some(meta))
    }

    /// Rebuilds and validates the parameters.
    pub fn to_params(&self) -> Result<MixtureParams<f64>> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Input(format!("unsupported model schema version {}", self.schema_version)));
        }
        if self.model != "mcstfa" && self.model != "mctfa" {
            return Err(Error::Input(format!("unknown model '{}'", self.model)));
        }
        let (p, q, g) = (self.p, self.q, self.g);
        if self.factor_means.len() != g || self.factor_skews.len() != g || self.factor_covs.len() != g {
            return Err(Error::Input(format!("expected {g} factor means, skews and covariances")));
        }
        let params = MixtureParams {
            weights: vector_of(&self.weights, g, "weights")?,
            loadings: matrix_of(&self.loadings, p, q, "loadings")?,
            factor_means: self.factor_means.iter().map(|v| vector_of(v, q, "factor mean")).collect::<Result<_>>()?,
            factor_skews: self.factor_skews.iter().map(|v| vector_of(v, q, "factor skew")).collect::<Result<_>>()?,
            factor_covs: self.factor_covs.iter().map(|m| matrix_of(m, q, q, "factor covariance")).collect::<Result<_>>()?,
            noise_diag: vector_of(&self.noise_diag, p, "noise_diag")?,
            dof: vector_of(&self.dof, g, "dof")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

/// Grid summary, rows sorted by `(G, q)`.
pub fn write_grid_csv<W: Write>(out: W, cells: &[GridCell]) -> Result<()> {
    let mut sorted: Vec<&GridCell> = cells.iter().collect();
    sorted.sort_by_key(|c| (c.g, c.q));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["G", "q", "loglik", "n_params", "bic", "converged", "iterations", "ari"])?;
    for c in sorted {
        w.write_record([
            c.g.to_string(),
            c.q.to_string(),
            opt(c.loglik),
            c.n_params.to_string(),
            opt(c.bic),
            c.converged.to_string(),
            c.iterations.to_string(),
            opt(c.ari),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_parsimony_csv<W: Write>(out: W, rows: &[ParsimonyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
