mod common;

use mcstfa::aecm::{fit, fit_from, fit_with_labels, FitConfig, SkewMode};
use mcstfa::init::{initial_params, InitMethod, Linkage};
use mcstfa::metrics::{adjusted_rand_index, run_grid};
use mcstfa::model::{log_likelihood, DataMatrix};
use mcstfa::simulate::{simulate, Allocation, LoadingsSource, SimSpec};
use nalgebra::DMatrix;

fn small_spec(seed: u64) -> SimSpec {
    SimSpec {
        n: 150,
        p: 6,
        q: 2,
        g: 2,
        weights: vec![0.5, 0.5],
        dof: vec![8.0, 15.0],
        factor_means: vec![vec![0.0, 0.0], vec![12.0, -8.0]],
        factor_skews: vec![vec![3.0, 2.0], vec![0.0, -2.0]],
        factor_covs: None,
        noise_diag: None,
        loadings: LoadingsSource::StandardNormal,
        allocation: Allocation::Balanced,
        seed,
        rng: "ChaCha20".into(),
    }
}

fn config() -> FitConfig {
    FitConfig {
        init: InitMethod::Hierarchical(Linkage::Ward),
        epsilon: 1e-4,
        max_iter: 400,
        ..FitConfig::default()
    }
}

#[test]
fn log_likelihood_never_decreases() {
    for seed in 0..4 {
        let sim = simulate(&small_spec(seed)).unwrap();
        let res = fit(&sim.data, 2, 2, &config()).unwrap();
        for w in res.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
        }
        let direct = log_likelihood(&sim.data, &res.params).unwrap();
        assert!((direct - res.loglik()).abs() < 1e-8 * direct.abs());
    }
}

#[test]
fn recovers_well_separated_groups() {
    let sim = simulate(&small_spec(21)).unwrap();
    let res = fit(&sim.data, 2, 2, &config()).unwrap();
    assert!(adjusted_rand_index(&res.hard_labels, &sim.labels).unwrap() > 0.95);
    for i in 0..sim.data.n() {
        let s: f64 = res.responsibilities.row(i).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn start_label_permutation_does_not_matter() {
    let sim = simulate(&small_spec(5)).unwrap();
    let swapped: Vec<usize> = sim.labels.iter().map(|&l| 1 - l).collect();
    let a = fit_with_labels(&sim.data, &sim.labels, 2, 2, &config()).unwrap();
    let b = fit_with_labels(&sim.data, &swapped, 2, 2, &config()).unwrap();
    assert!((a.loglik() - b.loglik()).abs() < 1e-8 * a.loglik().abs());
    assert_eq!(a.hard_labels, b.hard_labels);
    for k in 0..2 {
        let d = (&a.params.factor_means[k] - &b.params.factor_means[k]).amax();
        assert!(d < 1e-5, "component {k} means differ by {d}");
    }
}

#[test]
fn repeated_fits_are_identical() {
    let sim = simulate(&small_spec(8)).unwrap();
    let cfg = FitConfig { restarts: 2, seed: 4, ..config() };
    let a = fit(&sim.data, 2, 2, &cfg).unwrap();
    let b = fit(&sim.data, 2, 2, &cfg).unwrap();
    assert_eq!(a.loglik_trace, b.loglik_trace);
    assert_eq!(a.params, b.params);
}

#[test]
fn symmetric_restriction_keeps_zero_skew() {
    let sim = simulate(&small_spec(3)).unwrap();
    let cfg = FitConfig { skew: SkewMode::Zero, ..config() };
    let res = fit(&sim.data, 2, 2, &cfg).unwrap();
    assert!(res.params.factor_skews.iter().all(|z| z.iter().all(|&v| v == 0.0)));
    assert_eq!(res.n_params, config().n_free_parameters(6, 2, 2).unwrap() - 4);
    for w in res.loglik_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * w[0].abs());
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let sim = simulate(&small_spec(12)).unwrap();
    let data32 = DataMatrix::<f32>::new(sim.data.values().map(|v| v as f32), None).unwrap();
    let res64 = fit(&sim.data, 2, 2, &config()).unwrap();
    let res32 = fit(&data32, 2, 2, &config()).unwrap();
    assert!(res32.loglik().is_finite());
    assert!(adjusted_rand_index(&res32.hard_labels, &res64.hard_labels).unwrap() > 0.95);
    assert!((res32.loglik() - res64.loglik()).abs() < 1e-2 * res64.loglik().abs());
}

#[test]
fn fixed_dof_is_held() {
    let sim = simulate(&small_spec(2)).unwrap();
    let cfg = FitConfig { fixed_dof: Some(7.5), ..config() };
    let res = fit(&sim.data, 2, 1, &cfg).unwrap();
    assert!(res.params.dof.iter().all(|&v| v == 7.5));
}

#[test]
fn gaussian_limit_small() {
    let spec = SimSpec {
        n: 120,
        p: 4,
        q: 1,
        g: 2,
        weights: vec![0.4, 0.6],
        dof: vec![1e6, 1e6],
        factor_means: vec![vec![-2.0], vec![2.5]],
        factor_skews: vec![vec![0.0], vec![0.0]],
        factor_covs: None,
        noise_diag: None,
        loadings: LoadingsSource::StandardNormal,
        allocation: Allocation::Random,
        seed: 31,
        rng: "ChaCha20".into(),
    };
    let sim = simulate(&spec).unwrap();
    let cfg = FitConfig {
        skew: SkewMode::Zero,
        fixed_dof: Some(1e6),
        epsilon: 1e-11,
        max_iter: 20_000,
        ..FitConfig::default()
    };
    let start = initial_params(&sim.data, &sim.labels, 2, 1, &cfg.init_config).unwrap();
    let ours = fit_from(&sim.data, start.clone(), &cfg).unwrap();
    let (oracle, _) = common::gaussian_mcfa_em(sim.data.values(), &start, 20_000);
    assert!(max_abs_diff_matched(&ours.responsibilities, &oracle) < 1e-4);
}

/// Smallest max-abs difference over the two column orders of a 2-column pair.
pub fn max_abs_diff_matched(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let same = (a - b).amax();
    let swapped = DMatrix::from_fn(b.nrows(), 2, |i, k| b[(i, 1 - k)]);
    same.min((a - swapped).amax())
}

#[test]
fn grid_reports_every_cell() {
    let sim = simulate(&small_spec(17)).unwrap();
    let cfg = FitConfig { epsilon: 1e-2, max_iter: 3000, ..config() };
    let grid = run_grid(&sim.data, &[1, 2], &[1, 2], &cfg, Some(&sim.labels)).unwrap();
    let keys: Vec<(usize, usize)> = grid.cells.iter().map(|c| (c.g, c.q)).collect();
    assert_eq!(keys, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    let best = grid.best.unwrap();
    let best_bic = grid.cells.iter().find(|c| (c.g, c.q) == best).unwrap().bic.unwrap();
    for c in grid.cells.iter().filter(|c| c.converged) {
        assert!(c.bic.unwrap() <= best_bic);
    }
    assert_eq!(best, (2, 2));
}

#[test]
fn simulated_moments_match_the_generating_law() {
    // x = Λξ + YΛζ + √Y·N(0, ΛΩΛ' + Ψ) with Y ~ IG(ν/2, ν/2):
    // E[x] = Λξ + ν/(ν−2)·Λζ.
    let spec = SimSpec {
        n: 200_000,
        p: 3,
        q: 1,
        g: 1,
        weights: vec![1.0],
        dof: vec![12.0],
        factor_means: vec![vec![1.0]],
        factor_skews: vec![vec![2.0]],
        factor_covs: None,
        noise_diag: None,
        loadings: LoadingsSource::Inline { values: vec![vec![1.0], vec![0.5], vec![-1.0]] },
        allocation: Allocation::Random,
        seed: 1,
        rng: "ChaCha20".into(),
    };
    let sim = simulate(&spec).unwrap();
    let x = sim.data.values();
    let n = x.nrows() as f64;
    let ey = 12.0 / 10.0;
    for (j, l) in [1.0, 0.5, -1.0].into_iter().enumerate() {
        let col = x.column(j);
        let mean = col.sum() / n;
        let want = l * (1.0 + ey * 2.0);
        assert!((mean - want).abs() < 0.03, "column {j}: {mean} vs {want}");
        let m3 = col.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        assert_eq!(m3 > 0.0, l > 0.0, "column {j} third moment {m3}");
    }
}
