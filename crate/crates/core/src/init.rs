//! Starting values: agglomerative hierarchical clustering for the partition,
//! principal axes of the pooled scatter about the origin (within-cluster
//! covariance plus cluster means) for `Λ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, MixtureParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Complete,
    Ward,
    Average,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Complete => "complete",
            Linkage::Ward => "ward",
            Linkage::Average => "average",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complete" => Ok(Linkage::Complete),
            "ward" => Ok(Linkage::Ward),
            "average" => Ok(Linkage::Average),
            other => Err(Error::Input(format!("unknown linkage '{other}'"))),
        }
    }
}

/// Where the starting partition comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitMethod {
    Hierarchical(Linkage),
    /// A user-supplied partition with labels in `0..G`.
    Labels(Vec<usize>),
}

impl Default for InitMethod {
    fn default() -> Self {
        InitMethod::Hierarchical(Linkage::Complete)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub nu0: f64,
    pub skew0: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { nu0: 50.0, skew0: 1.0 }
    }
}

/// One agglomeration step. Clusters are identified by their smallest member
/// index; `left < right` and `right` is absorbed into `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Full agglomerative merge sequence on Euclidean distances (squared
/// Euclidean for Ward). Among equal merge heights the pair with the
/// lexicographically smallest `(left, right)` is merged first.
pub fn dendrogram<T: Scalar>(data: &DataMatrix<T>, linkage: Linkage) -> Vec<Merge> {
    let n = data.n();
    let x = data.values();
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for k in 0..data.p() {
                let d = (x[(i, k)] - x[(j, k)]).as_f64();
                s += d * d;
            }
            let v = if linkage == Linkage::Ward { s } else { s.sqrt() };
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // nearest active neighbour with a larger index
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];
    let scan = |i: usize, active: &[bool], dist: &[f64]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in (i + 1)..n {
            if active[j] && dist[i * n + j] < best.1 {
                best = (j, dist[i * n + j]);
            }
        }
        best
    };
    for i in 0..n {
        (nn[i], nn_d[i]) = scan(i, &active, &dist);
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut a = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && nn_d[i] < best {
                best = nn_d[i];
                a = i;
            }
        }
        let b = nn[a];
        merges.push(Merge {
            left: a,
            right: b,
            height: if linkage == Linkage::Ward { best.sqrt() } else { best },
        });
        let (na, nb) = (size[a] as f64, size[b] as f64);
        let dab = dist[a * n + b];
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let dka = dist[k * n + a];
            let dkb = dist[k * n + b];
            let v = match linkage {
                Linkage::Complete => dka.max(dkb),
                Linkage::Average => (na * dka + nb * dkb) / (na + nb),
                Linkage::Ward => {
                    let nk = size[k] as f64;
                    ((na + nk) * dka + (nb + nk) * dkb - nk * dab) / (na + nb + nk)
                }
            };
            dist[k * n + a] = v;
            dist[a * n + k] = v;
        }
        active[b] = false;
        size[a] += size[b];
        for k in 0..n {
            if !active[k] {
                continue;
            }
            if k == a || nn[k] == a || nn[k] == b {
                (nn[k], nn_d[k]) = scan(k, &active, &dist);
            } else if k < a {
                let d = dist[k * n + a];
                if d < nn_d[k] || (d == nn_d[k] && a < nn[k]) {
                    nn[k] = a;
                    nn_d[k] = d;
                }
            }
        }
    }
    merges
}

/// Labels after replaying the first `n − g` merges; labels are numbered by
/// first appearance in observation order.
pub fn cut_dendrogram(n: usize, merges: &[Merge], g: usize) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in merges.iter().take(n.saturating_sub(g)) {
        let ra = root(&mut parent, m.left);
        let rb = root(&mut parent, m.right);
        parent[rb] = ra;
    }
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = root(&mut parent, i);
            if map[r] == usize::MAX {
                map[r] = next;
                next += 1;
            }
            map[r]
        })
        .collect()
}

/// Deterministic agglomerative clustering cut at `g` groups.
pub fn hierarchical_labels<T: Scalar>(data: &DataMatrix<T>, g: usize, linkage: Linkage) -> Result<Vec<usize>> {
    if g == 0 || g > data.n() {
        return Err(Error::Input(format!("cannot cut {} observations into {g} groups", data.n())));
    }
    Ok(cut_dendrogram(data.n(), &dendrogram(data, linkage), g))
}

/// Starting partition with at least `min_size` members per group.
///
/// The dendrogram is cut at `g` groups; if some group is smaller than
/// `min_size` (typically isolated outliers), the cut moves down the tree until
/// `g` groups reach `min_size`. Those groups are kept and every remaining
/// observation joins the kept group with the nearest centroid. When the plain
/// cut already satisfies the size bound the result equals
/// [`cut_dendrogram`].
pub fn sized_partition<T: Scalar>(data: &DataMatrix<T>, merges: &[Merge], g: usize, min_size: usize) -> Result<Vec<usize>> {
    let n = data.n();
    if g == 0 || g * min_size > n {
        return Err(Error::Input(format!(
            "cannot form {g} groups of at least {min_size} from {n} observations"
        )));
    }
    for k in g..=n {
        let labels = cut_dendrogram(n, merges, k);
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut big: Vec<usize> = (0..k).filter(|&c| sizes[c] >= min_size).collect();
        if big.len() < g {
            continue;
        }
        big.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        big.truncate(g);
        big.sort_unstable();
        if k == g {
            return Ok(labels);
        }
        let p = data.p();
        let x = data.values();
        let mut centroids = vec![vec![0.0f64; p]; g];
        let mut slot = vec![usize::MAX; k];
        for (s, &c) in big.iter().enumerate() {
            slot[c] = s;
        }
        for (i, &l) in labels.iter().enumerate() {
            if slot[l] != usize::MAX {
                for j in 0..p {
                    centroids[slot[l]][j] += x[(i, j)].as_f64() / sizes[l] as f64;
                }
            }
        }
        let assigned: Vec<usize> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if slot[l] != usize::MAX {
                    return slot[l];
                }
                let mut best = (0, f64::INFINITY);
                for (s, c) in centroids.iter().enumerate() {
                    let d: f64 = (0..p).map(|j| (x[(i, j)].as_f64() - c[j]).powi(2)).sum();
                    if d < best.1 {
                        best = (s, d);
                    }
                }
                best.0
            })
            .collect();
        return Ok(relabel_by_appearance(&assigned));
    }
    Err(Error::Input(format!("no cut yields {g} groups of at least {min_size}")))
}

fn relabel_by_appearance(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Minimum starting-group size used by the fitting routines for `q` factors.
pub fn min_start_size(q: usize) -> usize {
    q + 2
}

/// Moves a fraction of observations to uniformly drawn other groups.
pub fn perturb_labels<R: Rng>(labels: &[usize], g: usize, fraction: f64, rng: &mut R) -> Vec<usize> {
    let mut out = labels.to_vec();
    if g < 2 {
        return out;
    }
    for l in out.iter_mut() {
        if rng.random::<f64>() < fraction {
            let shift = rng.random_range(1..g);
            *l = (*l + shift) % g;
        }
    }
    out
}

fn floor_spd<T: Scalar>(m: &DMatrix<T>, floor: T) -> DMatrix<T> {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Starting parameters from a partition with labels in `0..G`.
pub fn initial_params<T: Scalar>(
    data: &DataMatrix<T>,
    labels: &[usize],
    g: usize,
    q: usize,
    config: &InitConfig,
) -> Result<MixtureParams<T>> {
    let (n, p) = (data.n(), data.p());
    if labels.len() != n {
        return Err(Error::Input(format!("{} labels for {n} observations", labels.len())));
    }
    if q == 0 || q >= p {
        return Err(Error::Input(format!("need 1 <= q < p, got q={q}, p={p}")));
    }
    if !(config.nu0 > 0.0) {
        return Err(Error::Input(format!("initial degrees of freedom must be > 0, got {}", config.nu0)));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= g) {
        return Err(Error::Input(format!("label {bad} is outside 0..{g}")));
    }
    let x = data.values();
    let mut sizes = vec![0usize; g];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s < 2) {
        return Err(Error::EmptyCluster(k));
    }
    let mut means = vec![DVector::<T>::zeros(p); g];
    for (i, &l) in labels.iter().enumerate() {
        means[l] += x.row(i).transpose();
    }
    for k in 0..g {
        means[k] /= T::lit(sizes[k] as f64);
    }
    let mut covs = vec![DMatrix::<T>::zeros(p, p); g];
    for (i, &l) in labels.iter().enumerate() {
        let d = x.row(i).transpose() - &means[l];
        covs[l].ger(T::lit(1.0), &d, &d, T::lit(1.0));
    }
    let mut pooled = DMatrix::<T>::zeros(p, p);
    for k in 0..g {
        pooled += &covs[k];
        covs[k] /= T::lit(sizes[k] as f64);
    }
    pooled /= T::lit(n as f64);

    // Component means are Λξ_g, so the start subspace has to contain them as
    // well as the within-cluster spread.
    let mut second = pooled.clone();
    for k in 0..g {
        second.ger(T::lit(sizes[k] as f64 / n as f64), &means[k], &means[k], T::lit(1.0));
    }
    let eig = SymmetricEigen::new((&second + second.transpose()) * T::lit(0.5));
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let loadings = DMatrix::from_fn(p, q, |j, k| eig.eigenvectors[(j, idx[k])]);
    let projected = &loadings * (loadings.transpose() * &pooled * &loadings) * loadings.transpose();
    let top: Vec<T> = (0..q).map(|k| (loadings.column(k).transpose() * &pooled * loadings.column(k))[(0, 0)].max(T::lit(0.0))).collect();

    let psi_min = psi_floor(data);
    let noise_diag = DVector::from_fn(p, |j, _| (pooled[(j, j)] - projected[(j, j)]).max(psi_min));
    let scale = top.iter().copied().sum::<T>() / T::lit(q as f64);
    let om_floor = (T::lit(1e-6) * scale).max(T::lit(1e-10));
    let lt = loadings.transpose();
    let factor_covs = covs.iter().map(|s| floor_spd(&(&lt * s * &loadings), om_floor)).collect();
    let factor_means = means.iter().map(|m| &lt * m).collect();
    let mut params = MixtureParams {
        weights: DVector::from_fn(g, |k, _| T::lit(sizes[k] as f64 / n as f64)),
        loadings,
        factor_means,
        factor_skews: vec![DVector::zeros(q); g],
        factor_covs,
        noise_diag,
        dof: DVector::from_element(g, T::lit(config.nu0)),
    };
    params.normalize_loadings()?;
    params.factor_skews = vec![DVector::from_element(q, T::lit(config.skew0)); g];
    params.validate()?;
    Ok(params)
}

/// Lower bound for noise variances: `1e-6` times the mean column variance.
pub fn psi_floor<T: Scalar>(data: &DataMatrix<T>) -> T {
    let v = data.column_variances();
    let mean = v.sum() / T::lit(v.len() as f64);
    (T::lit(1e-6) * mean).max(T::lit(1e-12))
}

pub(crate) fn floor_factor_cov<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    floor_spd(m, T::lit(1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DataMatrix<f64> {
        DataMatrix::from_rows(&points.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn complete_linkage_hand_example() {
        let d = line(&[0.0, 1.0, 3.0, 7.0, 8.0, 15.0]);
        let m = dendrogram(&d, Linkage::Complete);
        let seq: Vec<(usize, usize, f64)> = m.iter().map(|m| (m.left, m.right, m.height)).collect();
        assert_eq!(
            seq,
            vec![(0, 1, 1.0), (3, 4, 1.0), (0, 2, 3.0), (0, 3, 8.0), (0, 5, 15.0)]
        );
        assert_eq!(cut_dendrogram(6, &m, 3), vec![0, 0, 0, 1, 1, 2]);
    }

    #[test]
    fn cut_at_n_is_identity() {
        let d = line(&[4.0, 1.0, 9.0]);
        assert_eq!(hierarchical_labels(&d, 3, Linkage::Ward).unwrap(), vec![0, 1, 2]);
        assert!(hierarchical_labels(&d, 4, Linkage::Ward).is_err());
    }

    #[test]
    fn separated_clouds() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let off = if i % 2 == 0 { 0.0 } else { 100.0 };
                vec![off + i as f64 * 0.1, off - i as f64 * 0.05]
            })
            .collect();
        let d = DataMatrix::from_rows(&pts).unwrap();
        for link in [Linkage::Complete, Linkage::Average, Linkage::Ward] {
            let l = hierarchical_labels(&d, 2, link).unwrap();
            for (i, &v) in l.iter().enumerate() {
                assert_eq!(v, i % 2);
            }
        }
    }

    #[test]
    fn proportions_and_validity() {
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() * 3.0, (t * 0.11).cos(), (t * 0.53).sin() + t * 0.01, (t * 0.71).cos() * 2.0]
            })
            .collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 30)).collect();
        let params = initial_params(&d, &labels, 2, 2, &InitConfig::default()).unwrap();
        assert!((params.weights[0] - 0.3).abs() < 1e-15);
        assert!((params.weights[1] - 0.7).abs() < 1e-15);
        assert_eq!(params.dof[0], 50.0);
        assert_eq!(params.factor_skews[1], DVector::from_element(2, 1.0));
        let again = initial_params(&d, &labels, 2, 2, &InitConfig::default()).unwrap();
        assert_eq!(params, again);
    }

    #[test]
    fn sized_partition_absorbs_outliers() {
        let d = line(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2, 500.0]);
        let m = dendrogram(&d, Linkage::Complete);
        assert_eq!(cut_dendrogram(7, &m, 2), vec![0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(sized_partition(&d, &m, 2, 2).unwrap(), vec![0, 0, 0, 1, 1, 1, 1]);
        let plain = line(&[0.0, 0.1, 5.0, 5.1]);
        let m = dendrogram(&plain, Linkage::Complete);
        assert_eq!(sized_partition(&plain, &m, 2, 2).unwrap(), cut_dendrogram(4, &m, 2));
        assert!(sized_partition(&plain, &m, 2, 3).is_err());
    }

    #[test]
    fn tiny_cluster_rejected() {
        let d = line(&[0.0, 1.0, 2.0, 3.0]);
        let err = initial_params(&DataMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]]).unwrap(), &[0, 0, 1], 2, 1, &InitConfig::default());
        assert!(matches!(err, Err(Error::EmptyCluster(1))));
        assert!(initial_params(&d, &[0, 0, 1, 1], 2, 1, &InitConfig::default()).is_err());
    }
}
