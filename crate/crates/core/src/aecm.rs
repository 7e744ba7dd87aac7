//! AECM estimation.
//!
//! One cycle is E, CM-1, E, CM-2, E. CM-1 treats the memberships and latent
//! scales `Y` as missing and updates `(π, ξ, ζ, ν)`; CM-2 additionally treats
//! the factors `U` as missing and updates `(Λ, Ψ, Ω)`. Both stages are exact
//! conditional maximisers of their expected complete-data log-likelihood, so
//! the observed log-likelihood never decreases.
//!
//! With `Σ_g = ΛΩ_gΛ' + Ψ`, `K = Λ'Ψ⁻¹Λ` and `C_g = (Ω_g⁻¹ + K)⁻¹`:
//!
//! ```text
//! γ_g = Σ_g⁻¹ΛΩ_g = Ψ⁻¹ΛC_g        I − γ_g'Λ = C_gΩ_g⁻¹        (I − γ_g'Λ)Ω_g = C_g
//! (γ_g'Λ)⁻¹γ_g' = K⁻¹Λ'Ψ⁻¹
//! ```
//!
//! so every per-component quantity lives in the `q`-dimensional factor space.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::densities::{skew_t_log_kernel_with, SKEW_LIMIT_THRESHOLD};
use crate::error::{Error, Result};
use crate::gig::{gig_moments_with_log_k, posterior_y_params};
use crate::init::{dendrogram, floor_factor_cov, initial_params, min_start_size, sized_partition, perturb_labels, psi_floor, InitConfig, InitMethod};
use crate::metrics::bic;
use crate::model::{check_data, count_free_parameters, hard_labels, responsibilities_from_log, ComponentStats, DataMatrix, MixtureParams, ModelId, Prepared};
use crate::scalar::Scalar;
use crate::specfun::digamma;

/// Whether the skewness is estimated or pinned at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkewMode {
    /// Skew-t components.
    #[default]
    Free,
    /// `ζ_g ≡ 0`: symmetric t components.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    pub epsilon: f64,
    pub min_dof: f64,
    pub max_dof: f64,
    /// Holds every `ν_g` at this value and skips its update.
    pub fixed_dof: Option<f64>,
    pub skew: SkewMode,
    pub init: InitMethod,
    pub init_config: InitConfig,
    /// Extra runs from randomly perturbed starting partitions; the run with
    /// the largest log-likelihood is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            epsilon: 1e-5,
            min_dof: 0.5,
            max_dof: 400.0,
            fixed_dof: None,
            skew: SkewMode::Free,
            init: InitMethod::default(),
            init_config: InitConfig::default(),
            restarts: 0,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Free parameters of the configured model: the MCStFA count, less the
    /// skewness vectors when they are pinned and the degrees of freedom when
    /// they are fixed.
    pub fn n_free_parameters(&self, p: usize, q: usize, g: usize) -> Result<usize> {
        let mut n = count_free_parameters(ModelId::Mcstfa, p, q, g)?;
        if self.skew == SkewMode::Zero {
            n -= g * q;
        }
        if self.fixed_dof.is_some() {
            n -= g;
        }
        Ok(n)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Input(format!("tolerance must be > 0, got {}", self.epsilon)));
        }
        if !(self.min_dof > 0.0 && self.min_dof < self.max_dof) {
            return Err(Error::Input(format!(
                "degrees-of-freedom bounds must satisfy 0 < min < max, got [{}, {}]",
                self.min_dof, self.max_dof
            )));
        }
        if let Some(v) = self.fixed_dof {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Input(format!("fixed degrees of freedom must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// E-step output.
#[derive(Debug, Clone)]
pub struct EStepQuantities<T: Scalar> {
    /// Responsibilities `ẑ_ig`, `n × G`.
    pub z: DMatrix<T>,
    /// `E[Y_i | x_i, Z_ig = 1]`.
    pub a: DMatrix<T>,
    /// `E[1/Y_i | x_i, Z_ig = 1]`.
    pub b: DMatrix<T>,
    /// `E[log Y_i | x_i, Z_ig = 1]`; only computed when requested.
    pub c: Option<DMatrix<T>>,
    pub n_g: DVector<T>,
    pub a_bar: DVector<T>,
    pub b_bar: DVector<T>,
    /// `Σ_i ẑ_ig (ā_g b_ig − 1) = n_g(ā_g b̄_g − 1)`.
    pub m_g: DVector<T>,
    pub loglik: T,
    pub prepared: Prepared<T>,
    pub stats: Vec<ComponentStats<T>>,
}

/// E-step at `params`. `log_moments` controls whether `E[log Y]` is
/// evaluated (it is needed only by the `ν` update).
pub fn e_step<T: Scalar>(data: &DataMatrix<T>, params: &MixtureParams<T>, log_moments: bool) -> Result<EStepQuantities<T>> {
    check_data(data, params)?;
    let prepared = params.prepare()?;
    let (n, p, g) = (data.n(), data.p(), params.g());
    let mut weighted = DMatrix::zeros(n, g);
    let mut a = DMatrix::zeros(n, g);
    let mut b = DMatrix::zeros(n, g);
    let mut c = if log_moments { Some(DMatrix::zeros(n, g)) } else { None };
    let mut stats = Vec::with_capacity(g);
    for k in 0..g {
        let comp = &prepared.components[k];
        let st = prepared.stats(data, k);
        for i in 0..n {
            let delta = st.delta[i];
            let post = posterior_y_params(comp.rho, delta, comp.nu, p)?;
            let (m, log_k) = gig_moments_with_log_k(&post, log_moments).map_err(|e| e.in_component(k))?;
            let log_k = if comp.rho < T::lit(SKEW_LIMIT_THRESHOLD) { None } else { log_k };
            let ld = skew_t_log_kernel_with(delta, comp.rho, st.skew_dot[i], comp.nu, p, comp.log_det, log_k)
                .map_err(|e| e.in_component(k))?;
            if !ld.is_finite() || !m.e_y.is_finite() || !m.e_inv_y.is_finite() {
                return Err(Error::Evaluation {
                    component: Some(k),
                    detail: format!("row {}: log density {ld}, E[Y] {}, E[1/Y] {}", i + 1, m.e_y, m.e_inv_y),
                });
            }
            weighted[(i, k)] = ld + comp.log_weight;
            a[(i, k)] = m.e_y;
            b[(i, k)] = m.e_inv_y;
            if let Some(c) = c.as_mut() {
                c[(i, k)] = m.e_log_y;
            }
        }
        stats.push(st);
    }
    let (z, row_ll) = responsibilities_from_log(&weighted);
    let loglik = row_ll.sum();
    let n_g = DVector::from_fn(g, |k, _| z.column(k).sum());
    let min_size = params.q() + 1;
    for k in 0..g {
        if n_g[k] < T::lit(min_size as f64) {
            return Err(Error::ComponentCollapse {
                component: k,
                size: n_g[k].as_f64(),
                min: min_size,
            });
        }
    }
    let a_bar = DVector::from_fn(g, |k, _| z.column(k).dot(&a.column(k)) / n_g[k]);
    let b_bar = DVector::from_fn(g, |k, _| z.column(k).dot(&b.column(k)) / n_g[k]);
    let m_g = DVector::from_fn(g, |k, _| n_g[k] * (a_bar[k] * b_bar[k] - T::lit(1.0)));
    Ok(EStepQuantities {
        z,
        a,
        b,
        c,
        n_g,
        a_bar,
        b_bar,
        m_g,
        loglik,
        prepared,
        stats,
    })
}

/// Solves `log(ν/2) + 1 − ψ(ν/2) = target` for `ν` in `[lo, hi]` by
/// bisection. The left side decreases in `ν`; when the root is not bracketed
/// the nearest bound is returned with `clamped = true`.
pub fn solve_dof<T: Scalar>(target: T, lo: T, hi: T) -> Result<(T, bool)> {
    let half = T::lit(0.5);
    let f = |nu: T| -> Result<T> { Ok((nu * half).ln() + T::lit(1.0) - digamma(nu * half)? - target) };
    if f(lo)? <= T::lit(0.0) {
        return Ok((lo, true));
    }
    if f(hi)? >= T::lit(0.0) {
        return Ok((hi, true));
    }
    let (mut a, mut b) = (lo, hi);
    let tol = T::lit(1e-8);
    for _ in 0..200 {
        let mid = (a + b) * half;
        if f(mid)? > T::lit(0.0) {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= tol * mid.max(T::lit(1.0)) {
            break;
        }
    }
    Ok(((a + b) * half, false))
}

/// `V = X Ψ⁻¹Λ K⁻¹`: rows are `K⁻¹Λ'Ψ⁻¹x_i = (γ_g'Λ)⁻¹γ_g'x_i`.
fn projected_data<T: Scalar>(data: &DataMatrix<T>, prep: &Prepared<T>, iteration: usize) -> Result<DMatrix<T>> {
    let k_chol = Cholesky::new(prep.k.clone()).ok_or_else(|| Error::SingularSystem {
        iteration,
        detail: "Λ'Ψ⁻¹Λ is not positive definite".into(),
    })?;
    let xw = data.values() * &prep.psi_inv_lambda;
    Ok(k_chol.solve(&xw.transpose()).transpose())
}

/// Outcome of the first conditional-maximisation stage.
#[derive(Debug, Clone)]
pub struct Cm1Outcome<T: Scalar> {
    pub params: MixtureParams<T>,
    /// Per component, whether the `ν` root lay outside the search interval.
    pub dof_clamped: Vec<bool>,
}

/// Updates `π`, `ξ`, `ζ` and `ν` given E-step quantities at `params`.
pub fn cm_step_1<T: Scalar>(
    data: &DataMatrix<T>,
    params: &MixtureParams<T>,
    eq: &EStepQuantities<T>,
    config: &FitConfig,
    iteration: usize,
) -> Result<Cm1Outcome<T>> {
    let (n, g, q) = (data.n(), params.g(), params.q());
    let v = projected_data(data, &eq.prepared, iteration)?;
    let mut out = params.clone();
    let mut dof_clamped = vec![false; g];
    for k in 0..g {
        let ng = eq.n_g[k];
        out.weights[k] = ng / T::lit(n as f64);
        let z = eq.z.column(k);
        let b = eq.b.column(k);
        match config.skew {
            SkewMode::Free => {
                let mg = eq.m_g[k];
                if !(mg > T::lit(1e-12) * ng) {
                    return Err(Error::SingularSystem {
                        iteration,
                        detail: format!("component {k}: m_g = {mg} is not positive"),
                    });
                }
                let mut xi = DVector::zeros(q);
                let mut zeta = DVector::zeros(q);
                for i in 0..n {
                    let wx = z[i] * (eq.a_bar[k] * b[i] - T::lit(1.0));
                    let wz = z[i] * (eq.b_bar[k] - b[i]);
                    for d in 0..q {
                        xi[d] += wx * v[(i, d)];
                        zeta[d] += wz * v[(i, d)];
                    }
                }
                out.factor_means[k] = xi / mg;
                out.factor_skews[k] = zeta / mg;
            }
            SkewMode::Zero => {
                let mut xi = DVector::zeros(q);
                let mut wsum = T::lit(0.0);
                for i in 0..n {
                    let w = z[i] * b[i];
                    wsum += w;
                    for d in 0..q {
                        xi[d] += w * v[(i, d)];
                    }
                }
                out.factor_means[k] = xi / wsum;
                out.factor_skews[k] = DVector::zeros(q);
            }
        }
        match config.fixed_dof {
            Some(nu) => out.dof[k] = T::lit(nu),
            None => {
                let c = eq.c.as_ref().ok_or_else(|| Error::Domain("ν update needs E[log Y]".into()))?;
                let target = z.iter().zip(b.iter()).zip(c.column(k).iter()).map(|((&zi, &bi), &ci)| zi * (bi + ci)).sum::<T>() / ng;
                let (nu, clamped) = solve_dof(target, T::lit(config.min_dof), T::lit(config.max_dof))?;
                if clamped {
                    log::debug!("iteration {iteration}: ν for component {k} clamped at {nu}");
                }
                out.dof[k] = nu;
                dof_clamped[k] = clamped;
            }
        }
    }
    Ok(Cm1Outcome { params: out, dof_clamped })
}

/// Per-component factor-space quantities used by CM-2.
#[derive(Debug, Clone)]
pub struct CmWork<T: Scalar> {
    /// `η_ig = ξ_g + γ_g'(x_i − Λξ_g)`, one `n × q` matrix per component.
    pub eta: Vec<DMatrix<T>>,
    /// `(I − γ_g'Λ)ζ_g`.
    pub d_zeta: Vec<DVector<T>>,
    /// `(I − γ_g'Λ)Ω_g = C_g`.
    pub d_omega: Vec<DMatrix<T>>,
}

impl<T: Scalar> CmWork<T> {
    pub fn new(params: &MixtureParams<T>, eq: &EStepQuantities<T>) -> Self {
        let g = params.g();
        let mut eta = Vec::with_capacity(g);
        let mut d_zeta = Vec::with_capacity(g);
        let mut d_omega = Vec::with_capacity(g);
        for k in 0..g {
            let comp = &eq.prepared.components[k];
            let mut e = &eq.stats[k].w * &comp.inner_inv;
            let xi = &params.factor_means[k];
            for mut row in e.row_iter_mut() {
                for d in 0..xi.len() {
                    row[d] += xi[d];
                }
            }
            eta.push(e);
            d_zeta.push(comp.skew_proj.clone());
            d_omega.push(comp.inner_inv.clone());
        }
        Self { eta, d_zeta, d_omega }
    }

    /// `γ_g = Ψ⁻¹ΛC_g`.
    pub fn gamma(&self, eq: &EStepQuantities<T>, g: usize) -> DMatrix<T> {
        &eq.prepared.psi_inv_lambda * &self.d_omega[g]
    }
}

/// Updates `Λ`, `Ψ` and `Ω_g` given E-step quantities at `params`, then
/// re-normalises `Λ` to orthonormal columns.
pub fn cm_step_2<T: Scalar>(
    data: &DataMatrix<T>,
    params: &MixtureParams<T>,
    eq: &EStepQuantities<T>,
    psi_min: T,
    iteration: usize,
) -> Result<MixtureParams<T>> {
    let (n, p, q, g) = (data.n(), data.p(), params.q(), params.g());
    let x = data.values();
    let work = CmWork::new(params, eq);
    let mut r_mat = DMatrix::<T>::zeros(p, q);
    let mut h_mat = DMatrix::<T>::zeros(q, q);
    let mut row_w = DVector::<T>::zeros(n);
    let mut out = params.clone();
    for k in 0..g {
        let z = eq.z.column(k);
        let b = eq.b.column(k);
        let eta = &work.eta[k];
        let dz = &work.d_zeta[k];
        let ng = eq.n_g[k];
        let a_sum = z.dot(&eq.a.column(k));
        // rows of E[(1/y) u | x_i]' weighted by z_ig
        let mut m = DMatrix::<T>::zeros(n, q);
        let mut zb_eta = DMatrix::<T>::zeros(n, q);
        let mut z_eta_sum = DVector::<T>::zeros(q);
        for i in 0..n {
            let zb = z[i] * b[i];
            row_w[i] += zb;
            for d in 0..q {
                zb_eta[(i, d)] = zb * eta[(i, d)];
                m[(i, d)] = zb_eta[(i, d)] + z[i] * dz[d];
                z_eta_sum[d] += z[i] * eta[(i, d)];
            }
        }
        r_mat += x.transpose() * &m;
        let cross = &z_eta_sum * dz.transpose();
        h_mat += zb_eta.transpose() * eta + &cross + cross.transpose() + dz * dz.transpose() * a_sum + &work.d_omega[k] * ng;

        // Ω_g: e_i = γ'(x_i − Λξ_g) = η_i − ξ_g, r = γ'Λζ_g = ζ_g − (I − γ'Λ)ζ_g
        let xi = &params.factor_means[k];
        let r = &params.factor_skews[k] - dz;
        let mut s = DMatrix::<T>::zeros(q, q);
        let mut z_e_sum = DVector::<T>::zeros(q);
        for i in 0..n {
            let e = eta.row(i).transpose() - xi;
            s.ger(z[i] * b[i], &e, &e, T::lit(1.0));
            z_e_sum.axpy(z[i], &e, T::lit(1.0));
        }
        let cross = &z_e_sum * r.transpose();
        let om = (s - &cross - cross.transpose() + &r * r.transpose() * a_sum) / ng + &work.d_omega[k];
        out.factor_covs[k] = floor_factor_cov(&om);
    }
    let h_chol = Cholesky::new((&h_mat + h_mat.transpose()) * T::lit(0.5)).ok_or_else(|| Error::SingularSystem {
        iteration,
        detail: "loading normal equations are not positive definite".into(),
    })?;
    let lambda = h_chol.solve(&r_mat.transpose()).transpose();
    let nf = T::lit(n as f64);
    let lh = &lambda * &h_mat;
    out.noise_diag = DVector::from_fn(p, |j, _| {
        let mut sxx = T::lit(0.0);
        for i in 0..n {
            sxx += row_w[i] * x[(i, j)] * x[(i, j)];
        }
        let mut rl = T::lit(0.0);
        let mut lhl = T::lit(0.0);
        for d in 0..q {
            rl += r_mat[(j, d)] * lambda[(j, d)];
            lhl += lh[(j, d)] * lambda[(j, d)];
        }
        ((sxx - T::lit(2.0) * rl + lhl) / nf).max(psi_min)
    });
    out.loadings = lambda;
    out.normalize_loadings().map_err(|e| match e {
        Error::SingularSystem { detail, .. } => Error::SingularSystem { iteration, detail },
        other => other,
    })?;
    Ok(out)
}

/// Result of one Aitken check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AitkenState<T> {
    pub a_t: Option<T>,
    pub l_inf: Option<T>,
    pub converged: bool,
}

/// Aitken acceleration on the last three log-likelihood values
/// `l^(t−1), l^(t), l^(t+1)`:
///
/// ```text
/// a = (l^(t+1) − l^(t)) / (l^(t) − l^(t−1))
/// l_inf = l^(t) + (l^(t+1) − l^(t)) / (1 − a)
/// ```
///
/// Converged when `0 ≤ l_inf − l^(t) < ε`. Successive changes below
/// `1e-12·max(1, |l|)` count as converged regardless.
pub fn aitken_update<T: Scalar>(history: &[T], epsilon: T) -> AitkenState<T> {
    let none = AitkenState {
        a_t: None,
        l_inf: None,
        converged: false,
    };
    if history.len() < 2 {
        return none;
    }
    let l_next = history[history.len() - 1];
    let l_cur = history[history.len() - 2];
    let d_new = l_next - l_cur;
    let flat = d_new.abs() < T::lit(1e-12) * l_next.abs().max(T::lit(1.0));
    if history.len() < 3 {
        return AitkenState { converged: flat, ..none };
    }
    let l_prev = history[history.len() - 3];
    let d_old = l_cur - l_prev;
    if d_old == T::lit(0.0) {
        return AitkenState { converged: flat, ..none };
    }
    let a = d_new / d_old;
    if a >= T::lit(1.0) {
        return AitkenState {
            a_t: Some(a),
            l_inf: None,
            converged: flat,
        };
    }
    let l_inf = l_cur + d_new / (T::lit(1.0) - a);
    let gap = l_inf - l_cur;
    AitkenState {
        a_t: Some(a),
        l_inf: Some(l_inf),
        converged: flat || (gap >= T::lit(0.0) && gap < epsilon),
    }
}

/// Converged (or stopped) estimation run.
#[derive(Debug, Clone)]
pub struct FitResult<T: Scalar> {
    /// Components sorted by the first coordinate of `Λξ_g`.
    pub params: MixtureParams<T>,
    /// Observed-data log-likelihood at the start and after every cycle.
    pub loglik_trace: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub n_params: usize,
    pub bic: f64,
    pub hard_labels: Vec<usize>,
    /// `n × G`, columns in the sorted component order.
    pub responsibilities: DMatrix<T>,
    /// Per component, whether the final `ν` sits at a search bound.
    pub dof_at_bound: Vec<bool>,
    pub skew: SkewMode,
}

impl<T: Scalar> FitResult<T> {
    pub fn loglik(&self) -> f64 {
        self.loglik_trace.last().map_or(f64::NAN, |v| v.as_f64())
    }
}

/// Runs AECM from the given starting parameters.
pub fn fit_from<T: Scalar>(data: &DataMatrix<T>, start: MixtureParams<T>, config: &FitConfig) -> Result<FitResult<T>> {
    config.validate()?;
    check_data(data, &start)?;
    start.validate()?;
    let (p, q, g) = (start.p(), start.q(), start.g());
    let mut params = start;
    if config.skew == SkewMode::Zero {
        params.factor_skews = vec![DVector::zeros(q); g];
    }
    if let Some(nu) = config.fixed_dof {
        params.dof = DVector::from_element(g, T::lit(nu));
    }
    let psi_min = psi_floor(data);
    let eps = T::lit(config.epsilon);
    let need_c = config.fixed_dof.is_none();
    let mut eq = e_step(data, &params, need_c)?;
    let mut trace = vec![eq.loglik];
    let mut converged = false;
    let mut iterations = 0;
    let mut dof_clamped = vec![false; g];
    while iterations < config.max_iter {
        iterations += 1;
        let cm1 = cm_step_1(data, &params, &eq, config, iterations)?;
        params = cm1.params;
        dof_clamped = cm1.dof_clamped;
        let mid = e_step(data, &params, false)?;
        params = cm_step_2(data, &params, &mid, psi_min, iterations)?;
        eq = e_step(data, &params, need_c)?;
        let prev = *trace.last().expect("trace is non-empty");
        if eq.loglik < prev - T::lit(1e-8) * prev.abs().max(T::lit(1.0)) {
            log::warn!("iteration {iterations}: log-likelihood decreased from {prev} to {}", eq.loglik);
        }
        trace.push(eq.loglik);
        if aitken_update(&trace, eps).converged {
            converged = true;
            break;
        }
    }
    let order = params.sort_components();
    let dof_at_bound: Vec<bool> = order.iter().map(|&k| dof_clamped[k]).collect();
    let responsibilities = DMatrix::from_fn(data.n(), g, |i, k| eq.z[(i, order[k])]);
    let n_params = config.n_free_parameters(p, q, g)?;
    let loglik = trace.last().expect("trace is non-empty").as_f64();
    Ok(FitResult {
        hard_labels: hard_labels(&responsibilities),
        responsibilities,
        params,
        loglik_trace: trace,
        converged,
        iterations,
        n_params,
        bic: bic(loglik, n_params, data.n()),
        dof_at_bound,
        skew: config.skew,
    })
}

fn check_sizes<T: Scalar>(data: &DataMatrix<T>, g: usize, q: usize) -> Result<()> {
    let (n, p) = (data.n(), data.p());
    if q == 0 || q >= p {
        return Err(Error::Input(format!("need 1 <= q < p, got q={q}, p={p}")));
    }
    if g == 0 {
        return Err(Error::Input("need at least one component".into()));
    }
    if n <= g * (q + 1) {
        return Err(Error::Input(format!("need n > G(q+1), got n={n}, G={g}, q={q}")));
    }
    Ok(())
}

/// Fits from a given starting partition, with optional perturbed restarts.
pub fn fit_with_labels<T: Scalar>(
    data: &DataMatrix<T>,
    labels: &[usize],
    g: usize,
    q: usize,
    config: &FitConfig,
) -> Result<FitResult<T>> {
    check_sizes(data, g, q)?;
    let run = |l: &[usize]| -> Result<FitResult<T>> {
        let start = initial_params(data, l, g, q, &config.init_config)?;
        fit_from(data, start, config)
    };
    let mut best = run(labels);
    if config.restarts > 0 && g > 1 {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        for r in 0..config.restarts {
            let perturbed = perturb_labels(labels, g, 0.1, &mut rng);
            match run(&perturbed) {
                Ok(fit) => {
                    let better = match &best {
                        Ok(b) => fit.loglik() > b.loglik(),
                        Err(_) => true,
                    };
                    if better {
                        best = Ok(fit);
                    }
                }
                Err(e) => log::debug!("restart {} failed: {e}", r + 1),
            }
        }
    }
    best
}

/// Fits `G` components with `q` factors, initialising as configured.
pub fn fit<T: Scalar>(data: &DataMatrix<T>, g: usize, q: usize, config: &FitConfig) -> Result<FitResult<T>> {
    check_sizes(data, g, q)?;
    let labels = match &config.init {
        InitMethod::Hierarchical(linkage) => sized_partition(data, &dendrogram(data, *linkage), g, min_start_size(q))?,
        InitMethod::Labels(l) => l.clone(),
    };
    fit_with_labels(data, &labels, g, q, config)
}
