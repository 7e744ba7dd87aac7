//! BIC, the adjusted Rand index and model selection over `(G, q)` grids.
//!
//! BIC is `2·loglik − n_params·log n`, so larger values are better.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::aecm::{fit_with_labels, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::init::{dendrogram, min_start_size, sized_partition, InitMethod};
use crate::model::DataMatrix;
use crate::scalar::Scalar;

/// `2·loglik − n_params·log n` (larger is better).
pub fn bic(loglik: f64, n_params: usize, n: usize) -> f64 {
    2.0 * loglik - n_params as f64 * (n as f64).ln()
}

/// Cross-tabulation of two labelings; rows follow the first argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable<L> {
    pub row_labels: Vec<L>,
    pub col_labels: Vec<L>,
    pub counts: Vec<Vec<u64>>,
}

/// Builds the contingency table of two equal-length labelings. Labels are
/// listed in sorted order.
pub fn contingency_table<L: Ord + Clone>(rows: &[L], cols: &[L]) -> Result<ContingencyTable<L>> {
    if rows.len() != cols.len() {
        return Err(Error::Input(format!(
            "label vectors have different lengths ({} and {})",
            rows.len(),
            cols.len()
        )));
    }
    let row_labels: Vec<L> = rows.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let col_labels: Vec<L> = cols.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut counts = vec![vec![0u64; col_labels.len()]; row_labels.len()];
    for (a, b) in rows.iter().zip(cols) {
        let i = row_labels.binary_search(a).expect("label present");
        let j = col_labels.binary_search(b).expect("label present");
        counts[i][j] += 1;
    }
    Ok(ContingencyTable {
        row_labels,
        col_labels,
        counts,
    })
}

fn choose2(k: u64) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index of a contingency table. Returns 1 when
/// the index is undefined (both partitions trivial).
pub fn ari_from_counts(counts: &[Vec<u64>]) -> f64 {
    let n: u64 = counts.iter().flatten().sum();
    let cols = counts.iter().map(Vec::len).max().unwrap_or(0);
    let sum_cells: f64 = counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = counts.iter().map(|r| choose2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..cols)
        .map(|j| choose2(counts.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum()))
        .sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (sum_cells - expected) / denom
}

/// Adjusted Rand index between two labelings of the same observations.
pub fn adjusted_rand_index<L: Ord + Clone>(a: &[L], b: &[L]) -> Result<f64> {
    Ok(ari_from_counts(&contingency_table(a, b)?.counts))
}

/// Summary of one `(G, q)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    #[serde(rename = "G")]
    pub g: usize,
    pub q: usize,
    pub loglik: Option<f64>,
    pub n_params: usize,
    pub bic: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub ari: Option<f64>,
    pub error: Option<String>,
}

/// Results of fitting every `(G, q)` cell.
#[derive(Debug, Clone)]
pub struct SelectionGrid<T: Scalar> {
    pub g_values: Vec<usize>,
    pub q_values: Vec<usize>,
    /// Sorted by `(G, q)`.
    pub cells: Vec<GridCell>,
    pub results: BTreeMap<(usize, usize), FitResult<T>>,
    /// Converged cell with the largest BIC.
    pub best: Option<(usize, usize)>,
}

impl<T: Scalar> SelectionGrid<T> {
    pub fn best_fit(&self) -> Option<&FitResult<T>> {
        self.best.and_then(|k| self.results.get(&k))
    }
}

/// Fits every cell and records BIC; never fails as a whole. Cells whose fit
/// errors are kept with the error message. The dendrogram for hierarchical
/// starts is built once and cut per cell.
pub fn run_grid<T: Scalar>(
    data: &DataMatrix<T>,
    g_values: &[usize],
    q_values: &[usize],
    config: &FitConfig,
    true_labels: Option<&[usize]>,
) -> Result<SelectionGrid<T>> {
    if g_values.is_empty() || q_values.is_empty() {
        return Err(Error::Input("model grid must have at least one G and one q".into()));
    }
    if let Some(t) = true_labels {
        if t.len() != data.n() {
            return Err(Error::Input(format!("{} true labels for {} observations", t.len(), data.n())));
        }
    }
    let mut g_values = g_values.to_vec();
    g_values.sort_unstable();
    g_values.dedup();
    let mut q_values = q_values.to_vec();
    q_values.sort_unstable();
    q_values.dedup();

    let tree = match &config.init {
        InitMethod::Hierarchical(linkage) => Some(dendrogram(data, *linkage)),
        InitMethod::Labels(_) => None,
    };
    let tasks: Vec<(usize, usize)> = g_values.iter().flat_map(|&g| q_values.iter().map(move |&q| (g, q))).collect();
    let outcomes: Vec<((usize, usize), Result<FitResult<T>>)> = tasks
        .into_par_iter()
        .map(|(g, q)| {
            let labels = match (&config.init, &tree) {
                (InitMethod::Labels(l), _) => Ok(l.clone()),
                (_, Some(tree)) => sized_partition(data, tree, g, min_start_size(q)),
                (_, None) => unreachable!("hierarchical starts always build a tree"),
            };
            let res = labels.and_then(|l| fit_with_labels(data, &l, g, q, config));
            ((g, q), res)
        })
        .collect();

    let mut cells = Vec::new();
    let mut results = BTreeMap::new();
    for ((g, q), res) in outcomes {
        let n_params = config.n_free_parameters(data.p(), q, g).unwrap_or(0);
        match res {
            Ok(fit) => {
                let ari = match true_labels {
                    Some(t) => Some(adjusted_rand_index(t, &fit.hard_labels)?),
                    None => None,
                };
                cells.push(GridCell {
                    g,
                    q,
                    loglik: Some(fit.loglik()),
                    n_params,
                    bic: Some(fit.bic),
                    converged: fit.converged,
                    iterations: fit.iterations,
                    ari,
                    error: None,
                });
                results.insert((g, q), fit);
            }
            Err(e) => {
                log::warn!("fit failed for G={g}, q={q}: {e}");
                cells.push(GridCell {
                    g,
                    q,
                    loglik: None,
                    n_params,
                    bic: None,
                    converged: false,
                    iterations: 0,
                    ari: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    cells.sort_by_key(|c| (c.g, c.q));
    let best = cells
        .iter()
        .filter(|c| c.converged)
        .filter_map(|c| c.bic.map(|b| (b, c.g, c.q)))
        .fold(None::<(f64, usize, usize)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
        .map(|(_, g, q)| (g, q));
    Ok(SelectionGrid {
        g_values,
        q_values,
        cells,
        results,
        best,
    })
}

/// [`run_grid`], failing when no cell converged.
pub fn select_model<T: Scalar>(
    data: &DataMatrix<T>,
    g_values: &[usize],
    q_values: &[usize],
    config: &FitConfig,
) -> Result<SelectionGrid<T>> {
    let grid = run_grid(data, g_values, q_values, config, None)?;
    if grid.best.is_none() {
        return Err(Error::AllCellsFailed);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_values() {
        assert_eq!(bic(0.0, 0, 10), 0.0);
        assert!((bic(-100.0, 10, 100) - (-246.051_701_859_880_9)).abs() < 1e-9);
        assert!(bic(-50.0, 11, 30) < bic(-50.0, 10, 30));
    }

    #[test]
    fn ari_identical_and_relabelled() {
        let a = [0, 0, 1, 1, 2, 2];
        let b = [5, 5, 3, 3, 9, 9];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert!((adjusted_rand_index(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[0, 0, 0]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn ari_known_small_case() {
        // counts [[2,1],[0,2]]: cells 1+0+0+1 = 2, rows 3+1 = 4, cols 1+3 = 4,
        // C(5,2) = 10, expected 1.6, max 4.
        let v = ari_from_counts(&[vec![2, 1], vec![0, 2]]);
        assert!((v - (2.0 - 1.6) / (4.0 - 1.6)).abs() < 1e-15);
    }

    #[test]
    fn contingency_layout() {
        let t = contingency_table(&["b", "a", "a"], &["x", "y", "y"]).unwrap();
        assert_eq!(t.row_labels, vec!["a", "b"]);
        assert_eq!(t.counts, vec![vec![0, 2], vec![1, 0]]);
    }
}
