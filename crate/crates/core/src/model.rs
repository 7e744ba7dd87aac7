//! Mixture parameters, mixture log density, responsibilities and
//! free-parameter counts.
//!
//! Component `g` is a skew-t law with location `Λξ_g`, scale
//! `ΛΩ_gΛ' + Ψ`, skewness `Λζ_g` and `ν_g` degrees of freedom. `Λ` and the
//! diagonal `Ψ` are shared by every component.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densities::{chol_log_det, log_density_skew_t, skew_t_log_kernel, LowRankScale, SkewTParams};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// `n × p` observations with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T: Scalar> {
    values: DMatrix<T>,
    column_names: Option<Vec<String>>,
}

impl<T: Scalar> DataMatrix<T> {
    pub fn new(values: DMatrix<T>, column_names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(Error::Input(format!("data matrix must be non-empty, got {n}x{p}")));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            return Err(Error::Input(format!(
                "non-finite value at row {}, column {}",
                idx % n + 1,
                idx / n + 1
            )));
        }
        if let Some(names) = &column_names {
            if names.len() != p {
                return Err(Error::Input(format!("{} column names for {p} columns", names.len())));
            }
        }
        Ok(Self { values, column_names })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Input(format!(
                "row {} has {} values, expected {p}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]), None)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn row(&self, i: usize) -> DVector<T> {
        self.values.row(i).transpose()
    }

    /// Unbiased sample variance of every column (zero when `n = 1`).
    pub fn column_variances(&self) -> DVector<T> {
        let n = self.n();
        let nf = T::lit(n as f64);
        DVector::from_fn(self.p(), |j, _| {
            let col = self.values.column(j);
            let mean = col.sum() / nf;
            if n < 2 {
                return T::lit(0.0);
            }
            col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::lit((n - 1) as f64)
        })
    }
}

/// Full parameter set of a mixture of common skew-t factor analyzers.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams<T: Scalar> {
    pub weights: DVector<T>,
    pub loadings: DMatrix<T>,
    pub factor_means: Vec<DVector<T>>,
    pub factor_skews: Vec<DVector<T>>,
    pub factor_covs: Vec<DMatrix<T>>,
    pub noise_diag: DVector<T>,
    pub dof: DVector<T>,
}

/// Read-only view of one component in data space.
#[derive(Debug, Clone)]
pub struct ComponentView<T: Scalar> {
    pub mean: DVector<T>,
    pub scale: LowRankScale<T>,
    pub skew: DVector<T>,
    pub nu: T,
}

impl<T: Scalar> MixtureParams<T> {
    pub fn p(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn q(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q, g) = (self.p(), self.q(), self.g());
        if g == 0 || q == 0 || q > p {
            return Err(Error::Dimension(format!("invalid sizes p={p}, q={q}, G={g}")));
        }
        if self.factor_means.len() != g
            || self.factor_skews.len() != g
            || self.factor_covs.len() != g
            || self.dof.len() != g
        {
            return Err(Error::Dimension("per-component parameter lists must have G entries".into()));
        }
        if self.noise_diag.len() != p {
            return Err(Error::Dimension(format!("noise has {} entries, expected {p}", self.noise_diag.len())));
        }
        for k in 0..g {
            if self.factor_means[k].len() != q || self.factor_skews[k].len() != q || self.factor_covs[k].shape() != (q, q) {
                return Err(Error::Dimension(format!("component {k} factor parameters are not {q}-dimensional")));
            }
        }
        if self.weights.iter().any(|&w| !(w > T::lit(0.0))) {
            return Err(Error::Domain("mixing weights must be positive".into()));
        }
        let total = self.weights.sum();
        if (total - T::lit(1.0)).abs() > T::lit(1e-6) {
            return Err(Error::Domain(format!("mixing weights sum to {total}, expected 1")));
        }
        if self.dof.iter().any(|&v| !(v > T::lit(0.0)) || !v.is_finite()) {
            return Err(Error::Domain("degrees of freedom must be positive and finite".into()));
        }
        if self.noise_diag.iter().any(|&v| !(v > T::lit(0.0)) || !v.is_finite()) {
            return Err(Error::SingularScale("noise variances must be positive".into()));
        }
        let finite = |m: &DMatrix<T>| m.iter().all(|v| v.is_finite());
        if !finite(&self.loadings)
            || self.factor_means.iter().any(|v| !v.iter().all(|x| x.is_finite()))
            || self.factor_skews.iter().any(|v| !v.iter().all(|x| x.is_finite()))
            || self.factor_covs.iter().any(|m| !finite(m))
        {
            return Err(Error::Domain("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn component(&self, g: usize) -> Result<ComponentView<T>> {
        let scale = LowRankScale::new(self.loadings.clone(), self.factor_covs[g].clone(), self.noise_diag.clone())?;
        Ok(ComponentView {
            mean: &self.loadings * &self.factor_means[g],
            skew: &self.loadings * &self.factor_skews[g],
            scale,
            nu: self.dof[g],
        })
    }

    /// True when every skewness vector is exactly zero.
    pub fn is_symmetric(&self) -> bool {
        self.factor_skews.iter().all(|z| z.iter().all(|&v| v == T::lit(0.0)))
    }

    /// Rewrites `Λ` with orthonormal columns via a thin QR factorisation
    /// `Λ = QR`, absorbing `R` into the factor-space parameters so the mixture
    /// density is unchanged. The first nonzero entry of each column of the new
    /// `Λ` is made positive.
    pub fn normalize_loadings(&mut self) -> Result<()> {
        let q = self.q();
        let qr = self.loadings.clone().qr();
        let mut qm = qr.q();
        let mut r = qr.r();
        let tiny = T::lit(1e-14);
        for k in 0..q {
            if r[(k, k)].abs() <= tiny * r.norm().max(T::lit(1.0)) {
                return Err(Error::SingularSystem {
                    iteration: 0,
                    detail: "loading matrix is rank deficient".into(),
                });
            }
            let col = qm.column(k);
            let lead = col.iter().copied().find(|v| v.abs() > tiny).unwrap_or(T::lit(1.0));
            if lead < T::lit(0.0) {
                qm.column_mut(k).neg_mut();
                r.row_mut(k).neg_mut();
            }
        }
        for g in 0..self.g() {
            self.factor_means[g] = &r * &self.factor_means[g];
            self.factor_skews[g] = &r * &self.factor_skews[g];
            let om = &r * &self.factor_covs[g] * r.transpose();
            self.factor_covs[g] = (&om + om.transpose()) * T::lit(0.5);
        }
        self.loadings = qm;
        Ok(())
    }

    /// Reorders components by the first coordinate of `Λξ_g` (ascending).
    /// Returns `order` with `order[new] = old`.
    pub fn sort_components(&mut self) -> Vec<usize> {
        let keys: Vec<T> = self
            .factor_means
            .iter()
            .map(|xi| self.loadings.row(0).transpose().dot(xi))
            .collect();
        let mut order: Vec<usize> = (0..self.g()).collect();
        order.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        self.permute(&order);
        order
    }

    /// Applies `order[new] = old` to every per-component field.
    pub fn permute(&mut self, order: &[usize]) {
        self.weights = DVector::from_fn(order.len(), |k, _| self.weights[order[k]]);
        self.dof = DVector::from_fn(order.len(), |k, _| self.dof[order[k]]);
        self.factor_means = order.iter().map(|&k| self.factor_means[k].clone()).collect();
        self.factor_skews = order.iter().map(|&k| self.factor_skews[k].clone()).collect();
        self.factor_covs = order.iter().map(|&k| self.factor_covs[k].clone()).collect();
    }

    /// Precomputes the shared and per-component Woodbury pieces.
    pub fn prepare(&self) -> Result<Prepared<T>> {
        self.validate()?;
        let p = self.p();
        let q = self.q();
        let inv_noise = self.noise_diag.map(|v| v.recip());
        let psi_inv_lambda = DMatrix::from_fn(p, q, |j, k| self.loadings[(j, k)] * inv_noise[j]);
        let k_mat = self.loadings.transpose() * &psi_inv_lambda;
        let log_det_psi: T = self.noise_diag.iter().map(|v| v.ln()).sum();
        let mut components = Vec::with_capacity(self.g());
        for g in 0..self.g() {
            let sing = |what: &str| Error::SingularScale(format!("component {g}: {what} is not positive definite"));
            let om_chol = Cholesky::new(self.factor_covs[g].clone()).ok_or_else(|| sing("factor covariance"))?;
            let inner = om_chol.inverse() + &k_mat;
            let inner_chol = Cholesky::new(inner).ok_or_else(|| sing("Woodbury inner matrix"))?;
            let inner_inv = inner_chol.inverse();
            let log_det = log_det_psi + chol_log_det(&om_chol) + chol_log_det(&inner_chol);
            let zeta = &self.factor_skews[g];
            let k_zeta = &k_mat * zeta;
            let rho = (zeta.dot(&k_zeta) - k_zeta.dot(&(&inner_inv * &k_zeta))).max(T::lit(0.0));
            let skew_proj = zeta - &inner_inv * &k_zeta;
            components.push(PreparedComponent {
                mean: &self.loadings * &self.factor_means[g],
                inner_inv,
                log_det,
                rho,
                skew_proj,
                nu: self.dof[g],
                log_weight: self.weights[g].ln(),
            });
        }
        Ok(Prepared {
            inv_noise,
            psi_inv_lambda,
            k: k_mat,
            components,
        })
    }
}

/// Shared Woodbury pieces of a parameter set.
#[derive(Debug, Clone)]
pub struct Prepared<T: Scalar> {
    pub inv_noise: DVector<T>,
    /// `Ψ⁻¹Λ`, `p × q`.
    pub psi_inv_lambda: DMatrix<T>,
    /// `Λ'Ψ⁻¹Λ`, `q × q`.
    pub k: DMatrix<T>,
    pub components: Vec<PreparedComponent<T>>,
}

/// Per-component Woodbury pieces.
#[derive(Debug, Clone)]
pub struct PreparedComponent<T: Scalar> {
    /// `Λξ_g`.
    pub mean: DVector<T>,
    /// `C_g = (Ω_g⁻¹ + Λ'Ψ⁻¹Λ)⁻¹`.
    pub inner_inv: DMatrix<T>,
    /// `log |ΛΩ_gΛ' + Ψ|`.
    pub log_det: T,
    /// `α_g'Σ_g⁻¹α_g` with `α_g = Λζ_g`.
    pub rho: T,
    /// `(I − C_g K)ζ_g`, so that `(x − μ)'Σ⁻¹α = w'·skew_proj` with `w = Λ'Ψ⁻¹(x − μ)`.
    pub skew_proj: DVector<T>,
    pub nu: T,
    pub log_weight: T,
}

/// Row-wise quadratic forms of one component.
#[derive(Debug, Clone)]
pub struct ComponentStats<T: Scalar> {
    /// `δ(x_i, Λξ_g | Σ_g)`.
    pub delta: DVector<T>,
    /// `(x_i − Λξ_g)'Σ_g⁻¹Λζ_g`.
    pub skew_dot: DVector<T>,
    /// Rows `w_i' = (x_i − Λξ_g)'Ψ⁻¹Λ`, `n × q`.
    pub w: DMatrix<T>,
}

impl<T: Scalar> Prepared<T> {
    pub fn stats(&self, data: &DataMatrix<T>, g: usize) -> ComponentStats<T> {
        let comp = &self.components[g];
        let x = data.values();
        let (n, p) = x.shape();
        let mut centered = x.clone();
        for j in 0..p {
            let m = comp.mean[j];
            for v in centered.column_mut(j).iter_mut() {
                *v -= m;
            }
        }
        let mut quad = DVector::<T>::zeros(n);
        for j in 0..p {
            let w = self.inv_noise[j];
            for i in 0..n {
                let d = centered[(i, j)];
                quad[i] += d * d * w;
            }
        }
        let w = &centered * &self.psi_inv_lambda;
        let wc = &w * &comp.inner_inv;
        let q = w.ncols();
        let mut delta = DVector::<T>::zeros(n);
        let mut skew_dot = DVector::zeros(n);
        for i in 0..n {
            let mut wcw = T::lit(0.0);
            let mut s = T::lit(0.0);
            for k in 0..q {
                wcw += wc[(i, k)] * w[(i, k)];
                s += w[(i, k)] * comp.skew_proj[k];
            }
            delta[i] = (quad[i] - wcw).max(T::lit(0.0));
            skew_dot[i] = s;
        }
        ComponentStats { delta, skew_dot, w }
    }

    /// `n × G` matrix of `log π_g + log f_g(x_i)`.
    pub fn weighted_log_densities(&self, data: &DataMatrix<T>) -> Result<DMatrix<T>> {
        let n = data.n();
        let p = data.p();
        let mut out = DMatrix::zeros(n, self.components.len());
        for (g, comp) in self.components.iter().enumerate() {
            let st = self.stats(data, g);
            for i in 0..n {
                let v = skew_t_log_kernel(st.delta[i], comp.rho, st.skew_dot[i], comp.nu, p, comp.log_det)
                    .map_err(|e| e.in_component(g))?;
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        component: Some(g),
                        detail: format!("log density {v} at row {}", i + 1),
                    });
                }
                out[(i, g)] = v + comp.log_weight;
            }
        }
        Ok(out)
    }
}

/// Normalises rows of weighted log densities into responsibilities and
/// returns the per-row log mixture densities alongside.
pub fn responsibilities_from_log<T: Scalar>(weighted: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
    let (n, g) = weighted.shape();
    let mut z = DMatrix::zeros(n, g);
    let mut row_ll = DVector::zeros(n);
    let mut buf = vec![T::lit(0.0); g];
    for i in 0..n {
        for k in 0..g {
            buf[k] = weighted[(i, k)];
        }
        let lse = log_sum_exp(&buf);
        row_ll[i] = lse;
        for k in 0..g {
            z[(i, k)] = (buf[k] - lse).exp();
        }
    }
    (z, row_ll)
}

/// Log of the mixture density at a single point.
pub fn mixture_log_density<T: Scalar>(x: &DVector<T>, params: &MixtureParams<T>) -> Result<T> {
    params.validate()?;
    let mut terms = Vec::with_capacity(params.g());
    for g in 0..params.g() {
        let c = params.component(g)?;
        let st = SkewTParams {
            mu: c.mean,
            sigma: c.scale,
            alpha: c.skew,
            nu: c.nu,
        };
        let v = log_density_skew_t(x, &st).map_err(|e| e.in_component(g))?;
        terms.push(params.weights[g].ln() + v);
    }
    Ok(log_sum_exp(&terms))
}

/// `n × G` posterior membership probabilities.
pub fn posterior_responsibilities<T: Scalar>(data: &DataMatrix<T>, params: &MixtureParams<T>) -> Result<DMatrix<T>> {
    check_data(data, params)?;
    let w = params.prepare()?.weighted_log_densities(data)?;
    Ok(responsibilities_from_log(&w).0)
}

/// Observed-data log-likelihood.
pub fn log_likelihood<T: Scalar>(data: &DataMatrix<T>, params: &MixtureParams<T>) -> Result<T> {
    check_data(data, params)?;
    let w = params.prepare()?.weighted_log_densities(data)?;
    Ok(responsibilities_from_log(&w).1.sum())
}

pub(crate) fn check_data<T: Scalar>(data: &DataMatrix<T>, params: &MixtureParams<T>) -> Result<()> {
    if data.p() != params.p() {
        return Err(Error::Dimension(format!(
            "data has {} columns but the model has p = {}",
            data.p(),
            params.p()
        )));
    }
    Ok(())
}

/// Row-wise argmax; ties go to the lowest component index.
pub fn hard_labels<T: Scalar>(resp: &DMatrix<T>) -> Vec<usize> {
    (0..resp.nrows())
        .map(|i| {
            let mut best = 0;
            for k in 1..resp.ncols() {
                if resp[(i, k)] > resp[(i, best)] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Models whose free parameters can be counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "MCStFA")]
    Mcstfa,
    #[serde(rename = "CCC")]
    Ccc,
    #[serde(rename = "CCU")]
    Ccu,
    #[serde(rename = "CUC")]
    Cuc,
    #[serde(rename = "CUU")]
    Cuu,
    #[serde(rename = "UCC")]
    Ucc,
    #[serde(rename = "UCU")]
    Ucu,
    #[serde(rename = "UUC")]
    Uuc,
    #[serde(rename = "UUU")]
    Uuu,
}

impl ModelId {
    pub const ALL: [ModelId; 9] = [
        ModelId::Mcstfa,
        ModelId::Ccc,
        ModelId::Ccu,
        ModelId::Cuc,
        ModelId::Cuu,
        ModelId::Ucc,
        ModelId::Ucu,
        ModelId::Uuc,
        ModelId::Uuu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Mcstfa => "MCStFA",
            ModelId::Ccc => "CCC",
            ModelId::Ccu => "CCU",
            ModelId::Cuc => "CUC",
            ModelId::Cuu => "CUU",
            ModelId::Ucc => "UCC",
            ModelId::Ucu => "UCU",
            ModelId::Uuc => "UUC",
            ModelId::Uuu => "UUU",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown model '{s}'")))
    }
}

/// Number of free parameters of `model` at dimension `p`, `q` factors and
/// `g` components.
pub fn count_free_parameters(model: ModelId, p: usize, q: usize, g: usize) -> Result<usize> {
    if q == 0 || q > p || g == 0 {
        return Err(Error::Domain(format!("need 1 <= q <= p and G >= 1, got p={p}, q={q}, G={g}")));
    }
    let loadings = p * q - q * (q - 1) / 2;
    let n = match model {
        ModelId::Mcstfa => g * q * (q + 1) / 2 + q * (p + 2 * g - q) + 2 * g + p - 1,
        ModelId::Ccc => loadings + 2 * g * p + 2 * g,
        ModelId::Ccu => loadings + 2 * g * p + 2 * g + p - 1,
        ModelId::Cuc => loadings + 2 * g * p + 3 * g - 1,
        ModelId::Cuu => loadings + 3 * g * p + 2 * g - 1,
        ModelId::Ucc => g * loadings + 2 * g * p + 2 * g,
        ModelId::Ucu => g * loadings + 2 * g * p + 2 * g + p - 1,
        ModelId::Uuc => g * loadings + 2 * g * p + 3 * g - 1,
        ModelId::Uuu => g * loadings + 3 * g * p + 2 * g - 1,
    };
    Ok(n)
}

/// One row of a parameter-growth table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsimonyRow {
    pub model: ModelId,
    pub p: usize,
    pub q: usize,
    #[serde(rename = "G")]
    pub g: usize,
    pub n_params: usize,
}

/// Free-parameter counts for every model at every `p` in the range, grouped
/// by `p` and then by the order of `models`.
pub fn parsimony_table(
    p_range: std::ops::RangeInclusive<usize>,
    q: usize,
    g: usize,
    models: &[ModelId],
) -> Result<Vec<ParsimonyRow>> {
    if p_range.is_empty() || models.is_empty() {
        return Err(Error::Domain("empty p range or model list".into()));
    }
    let mut rows = Vec::new();
    for p in p_range {
        for &model in models {
            rows.push(ParsimonyRow {
                model,
                p,
                q,
                g,
                n_params: count_free_parameters(model, p, q, g)?,
            });
        }
    }
    Ok(rows)
}
