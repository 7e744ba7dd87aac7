//! Generalized inverse Gaussian expectations.
//!
//! Parameters are stored as the `(ψ, χ, λ)` triple of the density
//! `f(y) ∝ y^{λ−1} exp{−(ψ y + χ / y) / 2}`. The moments used by the E-step
//! are
//!
//! ```text
//! E[Y]     = √(χ/ψ) · K_{λ+1}(ω) / K_λ(ω)
//! E[1/Y]   = √(ψ/χ) · K_{λ+1}(ω) / K_λ(ω) − 2λ/χ
//! E[log Y] = log √(χ/ψ) + ∂/∂λ log K_λ(ω)
//! ```
//!
//! with `ω = √(ψχ)`. For `λ > 0`, `E[1/Y]` is taken as
//! `√(ψ/χ) · K_{λ−1}(ω) / K_λ(ω)`, which is equal and avoids the
//! subtraction. When `ψ` is negligible the law is an inverse gamma with
//! shape `−λ` and scale `χ/2`, and closed forms are used instead.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::specfun::{digamma, dlog_bessel_k_dorder, log_bessel_k, log_bessel_k_pair};

/// Relative size of `ψ` (against `max(1, χ)`) below which the inverse-gamma
/// closed forms are used.
pub const INVERSE_GAMMA_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams<T> {
    pub psi: T,
    pub chi: T,
    pub lambda: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigMoments<T> {
    pub e_y: T,
    pub e_inv_y: T,
    pub e_log_y: T,
}

impl<T: Scalar> GigParams<T> {
    pub fn new(psi: T, chi: T, lambda: T) -> Result<Self> {
        if !psi.is_finite() || !chi.is_finite() || !lambda.is_finite() {
            return Err(Error::Domain("GIG parameters must be finite".into()));
        }
        if psi < T::lit(0.0) {
            return Err(Error::Domain(format!("GIG psi must be >= 0, got {psi}")));
        }
        if chi <= T::lit(0.0) {
            return Err(Error::Domain(format!("GIG chi must be > 0, got {chi}")));
        }
        if psi == T::lit(0.0) && lambda >= T::lit(0.0) {
            return Err(Error::Domain(format!(
                "GIG with psi = 0 needs lambda < 0, got {lambda}"
            )));
        }
        Ok(Self { psi, chi, lambda })
    }

    /// Builds the triple from the `GIG(√(ψχ), √(χ/ψ), λ)` concentration/scale
    /// form.
    pub fn from_concentration_scale(concentration: T, scale: T, lambda: T) -> Result<Self> {
        if !(concentration > T::lit(0.0)) || !(scale > T::lit(0.0)) {
            return Err(Error::Domain(
                "concentration and scale must both be positive".into(),
            ));
        }
        Self::new(concentration / scale, concentration * scale, lambda)
    }

    /// True when the inverse-gamma closed forms apply.
    pub fn is_inverse_gamma(&self) -> bool {
        self.psi < T::lit(INVERSE_GAMMA_THRESHOLD) * self.chi.max(T::lit(1.0))
    }

    /// Law of `c·Y` when `Y` follows `self`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.psi / c, self.chi * c, self.lambda)
    }
}

/// `E[Y]`, `E[1/Y]` and `E[log Y]`.
pub fn gig_moments<T: Scalar>(params: &GigParams<T>) -> Result<GigMoments<T>> {
    Ok(gig_moments_with_log_k(params, true)?.0)
}

/// Like [`gig_moments`], additionally returning `log K_λ(√(ψχ))` when the
/// Bessel route was taken so a density evaluation at the same point can reuse
/// it. With `log_moment = false` the order derivative is skipped and
/// `e_log_y` is NaN.
pub fn gig_moments_with_log_k<T: Scalar>(
    params: &GigParams<T>,
    log_moment: bool,
) -> Result<(GigMoments<T>, Option<T>)> {
    let GigParams { psi, chi, lambda } = *params;
    if !(chi > T::lit(0.0)) {
        return Err(Error::Domain(format!("GIG chi must be > 0, got {chi}")));
    }
    if psi < T::lit(0.0) || (psi == T::lit(0.0) && lambda >= T::lit(0.0)) {
        return Err(Error::Domain(format!(
            "invalid GIG parameters psi={psi}, lambda={lambda}"
        )));
    }
    let minus_one = T::lit(-1.0);
    if params.is_inverse_gamma() && (lambda < minus_one || psi == T::lit(0.0)) {
        if lambda >= minus_one {
            return Err(Error::MomentDoesNotExist(format!(
                "E[Y] is infinite for an inverse gamma with shape {}",
                -lambda
            )));
        }
        let two = T::lit(2.0);
        let e_log_y = if log_moment {
            (chi / two).ln() - digamma(-lambda)?
        } else {
            T::lit(f64::NAN)
        };
        let m = GigMoments {
            e_y: chi / (-two * lambda - two),
            e_inv_y: -two * lambda / chi,
            e_log_y,
        };
        return Ok((m, None));
    }
    let omega = (psi * chi).sqrt();
    let log_eta = T::lit(0.5) * (chi.ln() - psi.ln());
    let (log_k, log_k1) = log_bessel_k_pair(lambda, omega)?;
    let ratio = (log_k1 - log_k).exp();
    let e_y = log_eta.exp() * ratio;
    // For λ > 0 the two terms cancel; K_{λ+1} − (2λ/ω)K_λ = K_{λ−1} removes
    // the subtraction. The E-step always has λ < 0.
    let e_inv_y = if lambda > T::lit(0.0) {
        (log_bessel_k(lambda - T::lit(1.0), omega)? - log_k - log_eta).exp()
    } else {
        (-log_eta).exp() * ratio - T::lit(2.0) * lambda / chi
    };
    let e_log_y = if log_moment {
        log_eta + dlog_bessel_k_dorder(lambda, omega)?
    } else {
        T::lit(f64::NAN)
    };
    Ok((
        GigMoments {
            e_y,
            e_inv_y,
            e_log_y,
        },
        Some(log_k),
    ))
}

/// Posterior law of the latent scale `Y` given an observation:
/// `GIG(α'Σ⁻¹α, ν + δ, −(ν+p)/2)`.
pub fn posterior_y_params<T: Scalar>(
    alpha_quad: T,
    mahalanobis: T,
    nu: T,
    p: usize,
) -> Result<GigParams<T>> {
    if p == 0 {
        return Err(Error::Domain("dimension p must be at least 1".into()));
    }
    if !(nu > T::lit(0.0)) || !nu.is_finite() {
        return Err(Error::Domain(format!("degrees of freedom must be > 0, got {nu}")));
    }
    if !(mahalanobis >= T::lit(0.0)) || !(alpha_quad >= T::lit(0.0)) {
        return Err(Error::Domain(format!(
            "quadratic forms must be >= 0, got delta={mahalanobis}, alpha'Σ⁻¹alpha={alpha_quad}"
        )));
    }
    GigParams::new(
        alpha_quad,
        nu + mahalanobis,
        -(nu + T::lit(p as f64)) / T::lit(2.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_half_order_case() {
        let m = gig_moments(&GigParams::<f64>::new(1.0, 1.0, -0.5).unwrap()).unwrap();
        assert!((m.e_y - 1.0).abs() < 1e-14);
        // inverse Gaussian with mean 1, shape 1: E[1/Y] = 1/μ + 1/shape = 2
        assert!((m.e_inv_y - 2.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_gamma_boundary() {
        let m = gig_moments(&GigParams::<f64>::new(0.0, 4.0, -2.0).unwrap()).unwrap();
        assert!((m.e_y - 2.0).abs() < 1e-15);
        assert!((m.e_inv_y - 1.0).abs() < 1e-15);
        // IG(2, 2): E[log Y] = log 2 - ψ(2)
        let expect = 2f64.ln() - (1.0 - 0.577_215_664_901_532_9);
        assert!((m.e_log_y - expect).abs() < 1e-14);
    }

    #[test]
    fn moment_does_not_exist() {
        let p = GigParams::<f64>::new(0.0, 2.0, -0.8).unwrap();
        assert!(matches!(
            gig_moments(&p),
            Err(Error::MomentDoesNotExist(_))
        ));
    }

    #[test]
    fn domain_errors() {
        assert!(GigParams::<f64>::new(1.0, 0.0, -1.0).is_err());
        assert!(GigParams::<f64>::new(0.0, 1.0, 0.5).is_err());
        assert!(GigParams::<f64>::new(-1.0, 1.0, -2.0).is_err());
        let raw = GigParams {
            psi: 1.0,
            chi: -1.0,
            lambda: 1.0,
        };
        assert!(gig_moments(&raw).is_err());
    }

    #[test]
    fn posterior_substitution() {
        let a = posterior_y_params::<f64>(0.0, 0.0, 4.0, 2).unwrap();
        assert_eq!((a.psi, a.chi, a.lambda), (0.0, 4.0, -3.0));
        let b = posterior_y_params::<f64>(2.5, 1.2, 5.0, 3).unwrap();
        assert_eq!(b.psi, 2.5);
        assert!((b.chi - 6.2).abs() < 1e-15);
        assert_eq!(b.lambda, -4.0);
        assert!(posterior_y_params::<f64>(1.0, -1.0, 4.0, 2).is_err());
        assert!(posterior_y_params::<f64>(1.0, 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn symmetric_posterior_weight_identity() {
        // With no skewness the posterior is inverse gamma and E[1/Y] is the
        // classical t-mixture weight (ν+p)/(ν+δ).
        for &(delta, nu, p) in &[(0.3, 4.0, 2usize), (7.0, 2.5, 5), (40.0, 30.0, 15)] {
            let m = gig_moments(&posterior_y_params::<f64>(0.0, delta, nu, p).unwrap()).unwrap();
            let expect = (nu + p as f64) / (nu + delta);
            assert!((m.e_inv_y - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn near_boundary_continuity() {
        // Just above the switch the Bessel route must agree with the closed form.
        let chi = 9.0;
        let lambda = -6.5;
        let ig = gig_moments(&GigParams::<f64>::new(0.0, chi, lambda).unwrap()).unwrap();
        let gig = gig_moments(&GigParams::<f64>::new(1e-9, chi, lambda).unwrap()).unwrap();
        assert!((ig.e_y - gig.e_y).abs() < 1e-7 * ig.e_y);
        assert!((ig.e_inv_y - gig.e_inv_y).abs() < 1e-7 * ig.e_inv_y);
        assert!((ig.e_log_y - gig.e_log_y).abs() < 1e-5);
    }

    #[test]
    fn concentration_scale_form() {
        let p = GigParams::<f64>::from_concentration_scale(2.0, 0.5, -1.0).unwrap();
        assert_eq!((p.psi, p.chi), (4.0, 1.0));
    }
}
