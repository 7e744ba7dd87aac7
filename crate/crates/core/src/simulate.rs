//! Synthetic data from the mixture's generative law
//!
//! ```text
//! x = Λξ_g + y·Λζ_g + √y·(ΛΩ_g^{1/2} u + Ψ^{1/2} e),   y ~ InvGamma(ν_g/2, ν_g/2)
//! ```
//!
//! with `u`, `e` standard normal. The random stream is ChaCha20 seeded from
//! a `u64`, so output is identical across platforms.

use std::path::PathBuf;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, MixtureParams};

pub const RNG_NAME: &str = "ChaCha20";

/// Where the loading matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LoadingsSource {
    /// Entries drawn i.i.d. standard normal, row-major, before any
    /// observation.
    StandardNormal,
    /// A headerless CSV file with `p` rows and `q` columns.
    File { path: PathBuf },
    /// Row-major `p × q` values.
    Inline { values: Vec<Vec<f64>> },
}

/// How observations are assigned to components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Allocation {
    /// Each label drawn independently from the weights.
    #[default]
    Random,
    /// Exactly `round(n·π_g)` observations per component (largest remainders),
    /// in component order.
    Balanced,
}

fn default_rng_name() -> String {
    RNG_NAME.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub weights: Vec<f64>,
    pub dof: Vec<f64>,
    pub factor_means: Vec<Vec<f64>>,
    pub factor_skews: Vec<Vec<f64>>,
    /// Defaults to identity matrices.
    #[serde(default)]
    pub factor_covs: Option<Vec<Vec<Vec<f64>>>>,
    /// Defaults to ones.
    #[serde(default)]
    pub noise_diag: Option<Vec<f64>>,
    pub loadings: LoadingsSource,
    #[serde(default)]
    pub allocation: Allocation,
    pub seed: u64,
    #[serde(default = "default_rng_name")]
    pub rng: String,
}

/// Simulated data with the labels and parameters that produced it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: DataMatrix<f64>,
    pub labels: Vec<usize>,
    /// Generating parameters, with `Λ` normalised to orthonormal columns.
    pub params: MixtureParams<f64>,
}

impl SimSpec {
    /// The four-component design with `n = 200`, `p = 15`, `q = 2`, equal
    /// weights, `ν = (5, 2, 40, 40)` and skewness `(10, 10)`, `0`, `0`,
    /// `(50, 45)`. The third group's factor mean sits five units behind the
    /// base of the first group's skewed tail; the other two are far apart.
    /// `Ω_g = I`, `Ψ = I`; allocation is balanced.
    pub fn replication(seed: u64) -> Self {
        SimSpec {
            n: 200,
            p: 15,
            q: 2,
            g: 4,
            weights: vec![0.25; 4],
            dof: vec![5.0, 2.0, 40.0, 40.0],
            factor_means: vec![vec![0.0, 0.0], vec![-60.0, 40.0], vec![-5.0, -5.0], vec![40.0, -80.0]],
            factor_skews: vec![vec![10.0, 10.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![50.0, 45.0]],
            factor_covs: None,
            noise_diag: None,
            loadings: LoadingsSource::StandardNormal,
            allocation: Allocation::Balanced,
            seed,
            rng: default_rng_name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if self.n == 0 || self.p == 0 || self.q == 0 || self.g == 0 {
            return bad("n, p, q and G must be positive".into());
        }
        if self.q > self.p {
            return bad(format!("q = {} exceeds p = {}", self.q, self.p));
        }
        if self.rng != RNG_NAME {
            return bad(format!("unsupported generator '{}', only {RNG_NAME} is available", self.rng));
        }
        if self.weights.len() != self.g || self.dof.len() != self.g || self.factor_means.len() != self.g || self.factor_skews.len() != self.g {
            return bad("weights, dof, factor_means and factor_skews need G entries".into());
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("weights must be positive and sum to 1".into());
        }
        if self.dof.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return bad("degrees of freedom must be positive and finite".into());
        }
        if self.factor_means.iter().chain(&self.factor_skews).any(|v| v.len() != self.q) {
            return bad(format!("factor means and skews must have q = {} entries", self.q));
        }
        if let Some(c) = &self.factor_covs {
            if c.len() != self.g || c.iter().any(|m| m.len() != self.q || m.iter().any(|r| r.len() != self.q)) {
                return bad("factor_covs must be G matrices of size q x q".into());
            }
        }
        if let Some(psi) = &self.noise_diag {
            if psi.len() != self.p || psi.iter().any(|&v| !(v > 0.0)) {
                return bad(format!("noise_diag must have p = {} positive entries", self.p));
            }
        }
        Ok(())
    }

    fn factor_cov(&self, g: usize) -> DMatrix<f64> {
        match &self.factor_covs {
            Some(c) => DMatrix::from_fn(self.q, self.q, |i, j| c[g][i][j]),
            None => DMatrix::identity(self.q, self.q),
        }
    }

    fn noise(&self) -> DVector<f64> {
        match &self.noise_diag {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::from_element(self.p, 1.0),
        }
    }

    fn loadings<R: Rng>(&self, rng: &mut R) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = match &self.loadings {
            LoadingsSource::StandardNormal => {
                return Ok(DMatrix::from_row_iterator(
                    self.p,
                    self.q,
                    (0..self.p * self.q).map(|_| rng.sample::<f64, _>(StandardNormal)),
                ))
            }
            LoadingsSource::Inline { values } => values.clone(),
            LoadingsSource::File { path } => {
                let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
                let mut rows = Vec::new();
                for rec in rdr.records() {
                    let rec = rec?;
                    let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
                    rows.push(row.map_err(|e| Error::Input(format!("loadings file: {e}")))?);
                }
                rows
            }
        };
        if rows.len() != self.p || rows.iter().any(|r| r.len() != self.q) {
            return Err(Error::Input(format!("loadings must be {} x {}", self.p, self.q)));
        }
        Ok(DMatrix::from_fn(self.p, self.q, |i, j| rows[i][j]))
    }
}

/// Component sizes `round(n·π_g)` by largest remainder; ties go to the
/// lower component index.
pub fn balanced_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &k in idx.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[k] += 1;
        rest -= 1;
    }
    counts
}

/// Draws a data set according to `spec`.
pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    spec.validate()?;
    let (n, p, q, g) = (spec.n, spec.p, spec.q, spec.g);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let lambda = spec.loadings(&mut rng)?;
    let psi = spec.noise();
    let psi_sqrt = psi.map(f64::sqrt);
    let mut om_chol = Vec::with_capacity(g);
    for k in 0..g {
        let c = Cholesky::new(spec.factor_cov(k))
            .ok_or_else(|| Error::Input(format!("factor covariance {k} is not positive definite")))?;
        om_chol.push(c.l());
    }
    let means: Vec<DVector<f64>> = spec.factor_means.iter().map(|m| &lambda * DVector::from_vec(m.clone())).collect();
    let skews: Vec<DVector<f64>> = spec.factor_skews.iter().map(|z| &lambda * DVector::from_vec(z.clone())).collect();
    let gammas: Vec<Gamma<f64>> = spec
        .dof
        .iter()
        .map(|&nu| Gamma::new(nu / 2.0, 2.0 / nu).map_err(|e| Error::Input(e.to_string())))
        .collect::<Result<_>>()?;

    let labels: Vec<usize> = match spec.allocation {
        Allocation::Balanced => balanced_counts(n, &spec.weights)
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
            .collect(),
        Allocation::Random => {
            let cum: Vec<f64> = spec
                .weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    cum.iter().position(|&c| u < c).unwrap_or(g - 1)
                })
                .collect()
        }
    };

    let mut x = DMatrix::<f64>::zeros(n, p);
    for (i, &k) in labels.iter().enumerate() {
        let y = 1.0 / gammas[k].sample(&mut rng);
        let u = DVector::<f64>::from_fn(q, |_, _| rng.sample(StandardNormal));
        let e = DVector::<f64>::from_fn(p, |_, _| rng.sample(StandardNormal));
        let common = &lambda * (&om_chol[k] * u) + e.component_mul(&psi_sqrt);
        let row = &means[k] + &skews[k] * y + common * y.sqrt();
        x.row_mut(i).copy_from(&row.transpose());
    }

    let mut params = MixtureParams {
        weights: DVector::from_vec(spec.weights.clone()),
        loadings: lambda,
        factor_means: spec.factor_means.iter().map(|m| DVector::from_vec(m.clone())).collect(),
        factor_skews: spec.factor_skews.iter().map(|z| DVector::from_vec(z.clone())).collect(),
        factor_covs: (0..g).map(|k| spec.factor_cov(k)).collect(),
        noise_diag: psi,
        dof: DVector::from_vec(spec.dof.clone()),
    };
    params.normalize_loadings()?;
    Ok(Simulation {
        data: DataMatrix::new(x, None)?,
        labels,
        params,
    })
}
