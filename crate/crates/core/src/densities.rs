//! Log densities of the generalized hyperbolic, skew-t, multivariate-t and
//! multivariate normal laws.
//!
//! Scale matrices are abstracted behind [`ScaleMatrix`]. The dense
//! implementation uses a Cholesky factor; [`LowRankScale`] represents
//! `Σ = ΛΩΛ' + Ψ` and applies `Σ⁻¹` through the Woodbury identity
//!
//! ```text
//! Σ⁻¹ = Ψ⁻¹ − Ψ⁻¹Λ (Ω⁻¹ + Λ'Ψ⁻¹Λ)⁻¹ Λ'Ψ⁻¹
//! |Σ| = |Ψ| · |Ω| · |Ω⁻¹ + Λ'Ψ⁻¹Λ|
//! ```
//!
//! so a quadratic form costs `O(pq)` once the `q × q` inner factor exists.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::specfun::{log_bessel_k, log_gamma};

/// Below this value of `α'Σ⁻¹α` the skew-t density is evaluated through its
/// symmetric multivariate-t limit.
pub const SKEW_LIMIT_THRESHOLD: f64 = 1e-12;

/// A symmetric positive-definite scale matrix that can apply its inverse.
pub trait ScaleMatrix<T: Scalar> {
    fn dim(&self) -> usize;
    /// `a' Σ⁻¹ b`.
    fn inv_bilinear(&self, a: &DVector<T>, b: &DVector<T>) -> T;
    /// `log |Σ|`.
    fn log_det(&self) -> T;
    /// The matrix itself, materialised.
    fn to_dense(&self) -> DMatrix<T>;
}

/// Dense SPD scale matrix held with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct DenseScale<T: Scalar> {
    chol: Cholesky<T, Dyn>,
    log_det: T,
}

impl<T: Scalar> DenseScale<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "scale matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let chol = Cholesky::new(matrix)
            .ok_or_else(|| Error::SingularScale("dense scale is not positive definite".into()))?;
        let log_det = chol_log_det(&chol);
        Ok(Self { chol, log_det })
    }

    pub fn identity(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p)).expect("identity is SPD")
    }

    pub fn solve(&self, v: &DVector<T>) -> DVector<T> {
        self.chol.solve(v)
    }
}

pub(crate) fn chol_log_det<T: Scalar>(chol: &Cholesky<T, Dyn>) -> T {
    let l = chol.l_dirty();
    let mut acc = T::lit(0.0);
    for i in 0..l.nrows() {
        acc += l[(i, i)].ln();
    }
    T::lit(2.0) * acc
}

impl<T: Scalar> ScaleMatrix<T> for DenseScale<T> {
    fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    fn inv_bilinear(&self, a: &DVector<T>, b: &DVector<T>) -> T {
        a.dot(&self.chol.solve(b))
    }

    fn log_det(&self) -> T {
        self.log_det
    }

    fn to_dense(&self) -> DMatrix<T> {
        let l = self.chol.l();
        &l * l.transpose()
    }
}

/// `Σ = ΛΩΛ' + Ψ` with `Ψ` diagonal, prepared for Woodbury solves.
#[derive(Debug, Clone)]
pub struct LowRankScale<T: Scalar> {
    loadings: DMatrix<T>,
    factor_cov: DMatrix<T>,
    noise_diag: DVector<T>,
    inv_noise: DVector<T>,
    /// `Λ'Ψ⁻¹` (q × p).
    lt_inv_noise: DMatrix<T>,
    /// `(Ω⁻¹ + Λ'Ψ⁻¹Λ)⁻¹` (q × q).
    inner_inv: DMatrix<T>,
    log_det: T,
}

impl<T: Scalar> LowRankScale<T> {
    pub fn new(loadings: DMatrix<T>, factor_cov: DMatrix<T>, noise_diag: DVector<T>) -> Result<Self> {
        let (p, q) = loadings.shape();
        if q == 0 || q > p {
            return Err(Error::Dimension(format!(
                "loadings must be p x q with 1 <= q <= p, got {p}x{q}"
            )));
        }
        if factor_cov.shape() != (q, q) || noise_diag.len() != p {
            return Err(Error::Dimension(format!(
                "factor covariance {:?} / noise length {} do not match loadings {p}x{q}",
                factor_cov.shape(),
                noise_diag.len()
            )));
        }
        if noise_diag.iter().any(|&v| !(v > T::lit(0.0)) || !v.is_finite()) {
            return Err(Error::SingularScale("noise variances must be positive".into()));
        }
        let inv_noise = noise_diag.map(|v| v.recip());
        let mut lt_inv_noise = loadings.transpose();
        for j in 0..p {
            let w = inv_noise[j];
            for k in 0..q {
                lt_inv_noise[(k, j)] *= w;
            }
        }
        let k_mat = &lt_inv_noise * &loadings;
        let omega_chol = Cholesky::new(factor_cov.clone())
            .ok_or_else(|| Error::SingularScale("factor covariance is not positive definite".into()))?;
        let omega_inv = omega_chol.inverse();
        let inner = omega_inv + k_mat;
        let inner_chol = Cholesky::new(inner)
            .ok_or_else(|| Error::SingularScale("Woodbury inner matrix is not positive definite".into()))?;
        let log_det = noise_diag.iter().map(|v| v.ln()).sum::<T>()
            + chol_log_det(&omega_chol)
            + chol_log_det(&inner_chol);
        let inner_inv = inner_chol.inverse();
        Ok(Self {
            loadings,
            factor_cov,
            noise_diag,
            inv_noise,
            lt_inv_noise,
            inner_inv,
            log_det,
        })
    }

    pub fn loadings(&self) -> &DMatrix<T> {
        &self.loadings
    }

    pub fn factor_cov(&self) -> &DMatrix<T> {
        &self.factor_cov
    }

    pub fn noise_diag(&self) -> &DVector<T> {
        &self.noise_diag
    }

    pub fn inv_noise(&self) -> &DVector<T> {
        &self.inv_noise
    }

    /// `Λ'Ψ⁻¹`, a `q × p` matrix.
    pub fn lt_inv_noise(&self) -> &DMatrix<T> {
        &self.lt_inv_noise
    }

    /// `(Ω⁻¹ + Λ'Ψ⁻¹Λ)⁻¹`.
    pub fn inner_inv(&self) -> &DMatrix<T> {
        &self.inner_inv
    }

    /// `Σ⁻¹ v` without forming a `p × p` matrix.
    pub fn solve(&self, v: &DVector<T>) -> DVector<T> {
        let w = &self.lt_inv_noise * v;
        let cw = &self.inner_inv * w;
        let mut out = v.component_mul(&self.inv_noise);
        let corr = &self.loadings * cw;
        for j in 0..out.len() {
            out[j] -= self.inv_noise[j] * corr[j];
        }
        out
    }
}

impl<T: Scalar> ScaleMatrix<T> for LowRankScale<T> {
    fn dim(&self) -> usize {
        self.loadings.nrows()
    }

    fn inv_bilinear(&self, a: &DVector<T>, b: &DVector<T>) -> T {
        let mut diag_part = T::lit(0.0);
        for j in 0..a.len() {
            diag_part += a[j] * b[j] * self.inv_noise[j];
        }
        let wa = &self.lt_inv_noise * a;
        let wb = &self.lt_inv_noise * b;
        diag_part - wa.dot(&(&self.inner_inv * wb))
    }

    fn log_det(&self) -> T {
        self.log_det
    }

    fn to_dense(&self) -> DMatrix<T> {
        let mut m = &self.loadings * &self.factor_cov * self.loadings.transpose();
        for j in 0..m.nrows() {
            m[(j, j)] += self.noise_diag[j];
        }
        m
    }
}

/// Generalized hyperbolic parameters `(λ, χ, ψ, μ, Σ, α)`.
#[derive(Debug, Clone)]
pub struct GhParams<T: Scalar, S> {
    pub lambda: T,
    pub chi: T,
    pub psi: T,
    pub mu: DVector<T>,
    pub sigma: S,
    pub alpha: DVector<T>,
}

/// Skew-t parameters: location, scale, skewness and degrees of freedom.
#[derive(Debug, Clone)]
pub struct SkewTParams<T: Scalar, S> {
    pub mu: DVector<T>,
    pub sigma: S,
    pub alpha: DVector<T>,
    pub nu: T,
}

fn check_dims<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, mu: &DVector<T>, sigma: &S) -> Result<()> {
    let p = sigma.dim();
    if x.len() != p || mu.len() != p {
        return Err(Error::Dimension(format!(
            "x has {} entries, location {}, scale is {p}x{p}",
            x.len(),
            mu.len()
        )));
    }
    Ok(())
}

fn finite_or_error<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            component: None,
            detail: format!("{what} evaluated to {v}"),
        })
    }
}

/// Squared Mahalanobis distance `(x − μ)'Σ⁻¹(x − μ)`.
pub fn mahalanobis<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, mu: &DVector<T>, scale: &S) -> Result<T> {
    check_dims(x, mu, scale)?;
    let d = x - mu;
    Ok(scale.inv_bilinear(&d, &d).max(T::lit(0.0)))
}

/// Log density of the multivariate normal `N(μ, Σ)`.
pub fn log_density_normal<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, mu: &DVector<T>, sigma: &S) -> Result<T> {
    let delta = mahalanobis(x, mu, sigma)?;
    let p = T::lit(sigma.dim() as f64);
    let v = -T::lit(0.5) * (p * T::two_pi().ln() + sigma.log_det() + delta);
    finite_or_error(v, "normal log density")
}

/// Multivariate-t log density from precomputed pieces.
pub(crate) fn t_log_kernel<T: Scalar>(delta: T, nu: T, p: usize, log_det: T) -> Result<T> {
    let half = T::lit(0.5);
    let pf = T::lit(p as f64);
    Ok(log_gamma(half * (nu + pf))? - log_gamma(half * nu)?
        - half * pf * (nu * T::pi()).ln()
        - half * log_det
        - half * (nu + pf) * (delta / nu).ln_1p())
}

/// Log density of the multivariate t with `ν` degrees of freedom.
pub fn log_density_t<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, mu: &DVector<T>, sigma: &S, nu: T) -> Result<T> {
    if !(nu > T::lit(0.0)) {
        return Err(Error::Domain(format!("degrees of freedom must be > 0, got {nu}")));
    }
    let delta = mahalanobis(x, mu, sigma)?;
    finite_or_error(t_log_kernel(delta, nu, sigma.dim(), sigma.log_det())?, "t log density")
}

/// Skew-t log density from precomputed pieces: `delta = δ(x, μ|Σ)`,
/// `rho = α'Σ⁻¹α`, `skew_dot = (x − μ)'Σ⁻¹α`.
pub(crate) fn skew_t_log_kernel<T: Scalar>(
    delta: T,
    rho: T,
    skew_dot: T,
    nu: T,
    p: usize,
    log_det: T,
) -> Result<T> {
    skew_t_log_kernel_with(delta, rho, skew_dot, nu, p, log_det, None)
}

/// [`skew_t_log_kernel`] with an optional precomputed
/// `log K_{−(ν+p)/2}(√(ρ(ν+δ)))`.
pub(crate) fn skew_t_log_kernel_with<T: Scalar>(
    delta: T,
    rho: T,
    skew_dot: T,
    nu: T,
    p: usize,
    log_det: T,
    log_k: Option<T>,
) -> Result<T> {
    if rho < T::lit(SKEW_LIMIT_THRESHOLD) {
        return t_log_kernel(delta, nu, p, log_det);
    }
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let pf = T::lit(p as f64);
    let order = -(nu + pf) * half;
    let chi_d = nu + delta;
    let z = (rho * chi_d).sqrt();
    let log_k = match log_k {
        Some(v) => v,
        None => log_bessel_k(order, z)?,
    };
    Ok(half * order * (chi_d.ln() - rho.ln()) + half * nu * nu.ln() + log_k
        - half * pf * T::two_pi().ln()
        - half * log_det
        - log_gamma(half * nu)?
        - (half * nu - T::lit(1.0)) * two.ln()
        + skew_dot)
}

/// Skew-t log density; falls back to the multivariate t when
/// `α'Σ⁻¹α < 1e-12`.
pub fn log_density_skew_t<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, params: &SkewTParams<T, S>) -> Result<T> {
    let SkewTParams { mu, sigma, alpha, nu } = params;
    if !(*nu > T::lit(0.0)) {
        return Err(Error::Domain(format!("degrees of freedom must be > 0, got {nu}")));
    }
    check_dims(x, mu, sigma)?;
    if alpha.len() != sigma.dim() {
        return Err(Error::Dimension("skewness length does not match scale".into()));
    }
    let d = x - mu;
    let delta = sigma.inv_bilinear(&d, &d).max(T::lit(0.0));
    let rho = sigma.inv_bilinear(alpha, alpha).max(T::lit(0.0));
    let skew_dot = sigma.inv_bilinear(&d, alpha);
    let v = skew_t_log_kernel(delta, rho, skew_dot, *nu, sigma.dim(), sigma.log_det())?;
    finite_or_error(v, "skew-t log density")
}

/// Generalized hyperbolic log density.
pub fn log_density_gh<T: Scalar, S: ScaleMatrix<T>>(x: &DVector<T>, params: &GhParams<T, S>) -> Result<T> {
    let GhParams {
        lambda,
        chi,
        psi,
        mu,
        sigma,
        alpha,
    } = params;
    let (lambda, chi, psi) = (*lambda, *chi, *psi);
    if !(chi > T::lit(0.0)) || !(psi > T::lit(0.0)) {
        return Err(Error::Domain(format!(
            "GH density needs chi > 0 and psi > 0, got chi={chi}, psi={psi}"
        )));
    }
    check_dims(x, mu, sigma)?;
    if alpha.len() != sigma.dim() {
        return Err(Error::Dimension("skewness length does not match scale".into()));
    }
    let half = T::lit(0.5);
    let p = sigma.dim();
    let pf = T::lit(p as f64);
    let d = x - mu;
    let delta = sigma.inv_bilinear(&d, &d).max(T::lit(0.0));
    let rho = sigma.inv_bilinear(alpha, alpha).max(T::lit(0.0));
    let skew_dot = sigma.inv_bilinear(&d, alpha);
    let order = lambda - half * pf;
    let a = chi + delta;
    let b = psi + rho;
    let v = half * order * (a.ln() - b.ln()) + half * lambda * (psi.ln() - chi.ln())
        + log_bessel_k(order, (a * b).sqrt())?
        - half * pf * T::two_pi().ln()
        - half * sigma.log_det()
        - log_bessel_k(lambda, (chi * psi).sqrt())?
        + skew_dot;
    finite_or_error(v, "GH log density")
}
