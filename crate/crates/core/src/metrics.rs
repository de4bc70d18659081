//! External clustering quality measures.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Joint label counts between a predicted clustering and a reference one.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    /// counts[i][j] = items with predicted label i and reference label j.
    pub counts: Vec<Vec<usize>>,
    pub pred_sums: Vec<usize>,
    pub true_sums: Vec<usize>,
    pub total: usize,
}

pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<ContingencyTable> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "label vectors have different lengths ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("label vectors are empty".into()));
    }
    let n_pred = pred.iter().max().unwrap() + 1;
    let n_true = truth.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; n_true]; n_pred];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    let pred_sums: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let true_sums: Vec<usize> =
        (0..n_true).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Ok(ContingencyTable { counts, pred_sums, true_sums, total: pred.len() })
}

/// Normalized mutual information of two labelings, in [0, 1]. Degenerate
/// partitions (a single cluster or a single class) score 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = table.total as f64;

    let mut numerator = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                numerator +=
                    c * (n * c / (table.pred_sums[i] as f64 * table.true_sums[j] as f64)).ln();
            }
        }
    }

    let entropy_sum = |sums: &[usize]| -> f64 {
        sums.iter().filter(|&&s| s > 0).map(|&s| s as f64 * (s as f64 / n).ln()).sum()
    };
    let h_pred = entropy_sum(&table.pred_sums);
    let h_true = entropy_sum(&table.true_sums);
    if h_pred == 0.0 || h_true == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / (h_pred * h_true).sqrt())
}

/// Maximum-profit perfect matching on a square matrix, returned as the
/// assigned column for each row.
pub fn hungarian(profit: &Matrix) -> Result<Vec<usize>> {
    if profit.rows() != profit.cols() {
        return Err(Error::InvalidInput(format!(
            "assignment matrix must be square, got {}x{}",
            profit.rows(),
            profit.cols()
        )));
    }
    if profit.rows() == 0 {
        return Err(Error::InvalidInput("assignment matrix is empty".into()));
    }
    if !profit.is_finite() {
        return Err(Error::InvalidInput("assignment matrix has non-finite entries".into()));
    }
    let n = profit.rows();
    let cost = |i: usize, j: usize| -profit.get(i, j);

    // Assignment by shortest augmenting paths over dual potentials; row and
    // column indices are offset by one so slot 0 can act as a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_row[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Fraction of items whose predicted cluster maps to their reference class
/// under the best one-to-one cluster-to-class matching.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let side = table.counts.len().max(table.true_sums.len());
    let mut profit = Matrix::zeros(side, side);
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            profit.set(i, j, c as f64);
        }
    }
    let assignment = hungarian(&profit)?;
    let mut matched = 0usize;
    for (i, row) in table.counts.iter().enumerate() {
        let j = assignment[i];
        if j < row.len() {
            matched += row[j];
        }
    }
    Ok(matched as f64 / table.total as f64)
}
