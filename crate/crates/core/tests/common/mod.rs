//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature on a finite interval.
/// The interval is pre-split into 32 panels so that a lucky error estimate on
/// the whole range cannot end the refinement early.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let panels = 32;
    let w = (b - a) / panels as f64;
    let mut stack: Vec<_> = (0..panels)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    let whole: f64 = stack.iter().map(|s| s.2).sum();
    let mut total = 0.0;
    let mut budget = 20_000;
    while let Some((lo, hi, val, err)) = stack.pop() {
        let scale = whole.abs().max(1e-300);
        if err <= rel_tol * scale * ((hi - lo) / (b - a)).max(1e-6) || budget == 0 || hi - lo < 1e-12 * (b - a) {
            total += val;
            continue;
        }
        budget -= 1;
        let mid = 0.5 * (lo + hi);
        let (l, le) = gk15(&f, lo, mid);
        let (r, re) = gk15(&f, mid, hi);
        stack.push((lo, mid, l, le));
        stack.push((mid, hi, r, re));
    }
    total
}

/// Expands `[center - w, center + w]` until `log_f` drops `depth` below its
/// value at `center` on both sides.
pub fn window<F: Fn(f64) -> f64>(log_f: F, center: f64, depth: f64) -> (f64, f64) {
    let top = log_f(center);
    let mut lo = 1.0;
    while top - log_f(center - lo) < depth {
        lo *= 1.5;
    }
    let mut hi = 1.0;
    while top - log_f(center + hi) < depth {
        hi *= 1.5;
    }
    (center - lo, center + hi)
}

/// `(E[Y], E[1/Y], E[log Y])` of GIG(ψ, χ, λ), density ∝ y^{λ−1} exp(−(χ/y + ψy)/2),
/// by quadrature in `u = log y`.
pub fn gig_moments_quadrature(psi: f64, chi: f64, lambda: f64) -> (f64, f64, f64) {
    let log_f = |u: f64| lambda * u - 0.5 * (chi * (-u).exp() + psi * u.exp());
    let root = (lambda * lambda + psi * chi).sqrt();
    let mode_y = if lambda > 0.0 { (lambda + root) / psi } else { chi / (root - lambda) };
    let mode = mode_y.ln();
    let top = log_f(mode);
    let (a, b) = window(log_f, mode, 80.0);
    let tol = 1e-13;
    let z = integrate(|u| (log_f(u) - top).exp(), a, b, tol);
    let ey = integrate(|u| (log_f(u) - top + u).exp(), a, b, tol) / z;
    let einv = integrate(|u| (log_f(u) - top - u).exp(), a, b, tol) / z;
    let elog = integrate(|u| u * (log_f(u) - top).exp(), a, b, tol) / z;
    (ey, einv, elog)
}

/// `log K_λ(x)` from `K_λ(x) = ∫₀^∞ exp(−x cosh t) cosh(λt) dt`.
pub fn log_bessel_k_quadrature(lambda: f64, x: f64) -> f64 {
    let l = lambda.abs();
    let mode = (l / x).asinh().max(0.0);
    // exponent relative to the mode, written without cancellation
    let rel = |t: f64| {
        let d = t - mode;
        l * d - 2.0 * x * (0.5 * (t + mode)).sinh() * (0.5 * d).sinh() + (0.5 * (1.0 + (-2.0 * l * t).exp())).ln()
    };
    let top = -x * mode.cosh() + l * mode;
    let (a, b) = window(rel, mode, 80.0);
    let v = integrate(|t| rel(t).exp(), a.max(0.0), b, 1e-14);
    top + v.ln()
}

/// Multivariate t written out with an explicit inverse and determinant.
pub fn t_closed_form(
    x: &nalgebra::DVector<f64>,
    mu: &nalgebra::DVector<f64>,
    sigma: &nalgebra::DMatrix<f64>,
    nu: f64,
) -> f64 {
    use mcstfa::specfun::log_gamma;
    let p = x.len() as f64;
    let d = x - mu;
    let inv = sigma.clone().try_inverse().unwrap();
    let delta = (d.transpose() * inv * &d)[(0, 0)];
    log_gamma::<f64>((nu + p) / 2.0).unwrap()
        - log_gamma::<f64>(nu / 2.0).unwrap()
        - 0.5 * p * (nu * std::f64::consts::PI).ln()
        - 0.5 * sigma.determinant().ln()
        - 0.5 * (nu + p) * (delta / nu).ln_1p()
}

/// `∫ exp(log_f)` over the real line through `x = c + s·sinh(u)`, which turns
/// polynomial tails into exponential ones. With `tail = Some(k)` the range is
/// cut at `|x − c| = 1e10·s` and the rest is added as a `|x|^{−k}` power-law
/// tail, since the log density loses absolute accuracy far out.
pub fn integrate_line(log_f: impl Fn(f64) -> f64, c: f64, s: f64, tail: Option<f64>) -> f64 {
    let g = |u: f64| log_f(c + s * u.sinh()) + u.cosh().ln() + s.ln();
    let cut = 1e10f64.asinh();
    let (a, b) = if tail.is_some() { (-cut, cut) } else { window(&g, 0.0, 60.0) };
    let top = (0..=400)
        .map(|k| g(a + (b - a) * k as f64 / 400.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = integrate(|u| (g(u) - top).exp(), a, b, 1e-11) * top.exp();
    if let Some(k) = tail {
        for u in [a, b] {
            let r = s * u.sinh();
            total += log_f(c + r).exp() * r.abs() / (k - 1.0);
        }
    }
    total
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}

/// Gaussian mixture of common factor analyzers fitted by plain EM with dense
/// `p × p` covariances, `x | u, g ~ N(Λu, D)`, `u | g ~ N(ξ_g, Ω_g)`.
/// Starts from `start` (skewness and degrees of freedom ignored) and returns
/// the responsibilities after `iters` cycles or once the log-likelihood moves
/// less than `1e-13` relative.
pub fn gaussian_mcfa_em(
    data: &nalgebra::DMatrix<f64>,
    start: &mcstfa::model::MixtureParams<f64>,
    iters: usize,
) -> (nalgebra::DMatrix<f64>, f64) {
    use nalgebra::{DMatrix, DVector};
    let (n, p) = data.shape();
    let q = start.loadings.ncols();
    let g = start.weights.len();
    let mut pi: Vec<f64> = start.weights.iter().copied().collect();
    let mut lam = start.loadings.clone();
    let mut xi = start.factor_means.clone();
    let mut om = start.factor_covs.clone();
    let mut d = start.noise_diag.clone();
    let mut prev = f64::NEG_INFINITY;
    let mut tau = DMatrix::zeros(n, g);
    let mut loglik = prev;
    for _ in 0..iters {
        // E-step
        let mut gammas = Vec::with_capacity(g);
        let mut logs = DMatrix::zeros(n, g);
        for k in 0..g {
            let sigma = &lam * &om[k] * lam.transpose() + DMatrix::from_diagonal(&d);
            let chol = sigma.clone().cholesky().expect("SPD covariance");
            let inv = chol.inverse();
            let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let mean = &lam * &xi[k];
            for i in 0..n {
                let r = data.row(i).transpose() - &mean;
                let m = (r.transpose() * &inv * &r)[(0, 0)];
                logs[(i, k)] = pi[k].ln() - 0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + m);
            }
            gammas.push(&inv * &lam * &om[k]);
        }
        loglik = 0.0;
        for i in 0..n {
            let top = logs.row(i).max();
            let s: f64 = logs.row(i).iter().map(|v| (v - top).exp()).sum();
            loglik += top + s.ln();
            for k in 0..g {
                tau[(i, k)] = (logs[(i, k)] - top).exp() / s;
            }
        }
        if (loglik - prev).abs() < 1e-13 * loglik.abs() {
            break;
        }
        prev = loglik;
        // M-step: the factor part and the observation part separate.
        let mut sxu = DMatrix::zeros(p, q);
        let mut suu = DMatrix::zeros(q, q);
        for k in 0..g {
            let nk: f64 = tau.column(k).sum();
            let mean = &lam * &xi[k];
            let post_cov = (DMatrix::identity(q, q) - gammas[k].transpose() * &lam) * &om[k];
            let eu: Vec<DVector<f64>> = (0..n)
                .map(|i| &xi[k] + gammas[k].transpose() * (data.row(i).transpose() - &mean))
                .collect();
            let new_xi = (0..n).fold(DVector::zeros(q), |acc, i| acc + &eu[i] * tau[(i, k)]) / nk;
            let mut new_om = post_cov.clone();
            for i in 0..n {
                let c = &eu[i] - &new_xi;
                new_om += &c * c.transpose() * (tau[(i, k)] / nk);
                sxu += data.row(i).transpose() * eu[i].transpose() * tau[(i, k)];
                suu += (&post_cov + &eu[i] * eu[i].transpose()) * tau[(i, k)];
            }
            pi[k] = nk / n as f64;
            xi[k] = new_xi;
            om[k] = new_om;
        }
        lam = &sxu * suu.try_inverse().expect("invertible factor moment");
        let fitted = &lam * sxu.transpose();
        for j in 0..p {
            let sxx: f64 = data.column(j).iter().map(|v| v * v).sum();
            d[j] = (sxx - fitted[(j, j)]) / n as f64;
        }
    }
    (tau, loglik)
}
