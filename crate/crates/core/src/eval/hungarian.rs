//! Linear assignment on square matrices with deterministic tie-breaking.

use crate::error::{Error, Result};

/// Whether the matching should maximize or minimize total weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// Shortest-augmenting-path assignment with dual potentials. Returns the
/// column matched to each row plus the final potentials, which certify
/// optimality (reduced costs are non-negative and matched edges are tight).
fn solve_min(cost: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.len();
    // 1-based arrays; p[j] is the row matched to column j, p[0] the row
    // currently being placed.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    (row_to_col, u, v)
}

/// Try to free column `col` by re-matching its current row through an
/// augmenting path over `adj`, avoiding banned columns.
fn try_kuhn(
    row: usize,
    adj: &[Vec<usize>],
    banned: &[bool],
    visited: &mut [bool],
    col_to_row: &mut [Option<usize>],
) -> bool {
    for &c in &adj[row] {
        if banned[c] || visited[c] {
            continue;
        }
        visited[c] = true;
        let displaced = col_to_row[c];
        if displaced.is_none()
            || try_kuhn(displaced.unwrap(), adj, banned, visited, col_to_row)
        {
            col_to_row[c] = Some(row);
            return true;
        }
    }
    false
}

/// Among all optimal matchings, select the lexicographically smallest
/// (scanning rows in order, preferring the smallest column). Optimal
/// matchings use only tight edges under optimal potentials, so the search
/// runs on the tight-edge graph.
fn lexicographic_refine(
    cost: &[Vec<f64>],
    row_to_col: &[usize],
    u: &[f64],
    v: &[f64],
) -> Vec<usize> {
    let n = cost.len();
    let scale = cost
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-9 * (1.0 + scale);

    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (cost[i][j] - u[i + 1] - v[j + 1]).abs() <= tol)
                .collect()
        })
        .collect();

    // Current matching over tight edges, columns -> rows.
    let mut col_to_row: Vec<Option<usize>> = vec![None; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = Some(i);
    }

    let mut banned = vec![false; n];
    let mut result = vec![0usize; n];
    for i in 0..n {
        let current = (0..n).find(|&c| col_to_row[c] == Some(i)).expect("matched");
        let mut chosen = current;
        for &c in &adj[i] {
            // Columns are listed ascending; once past the current match
            // nothing smaller remains.
            if c >= current {
                break;
            }
            if banned[c] {
                continue;
            }
            // Tentatively reroute: give column c to row i, and re-match the
            // row currently on c (if any) elsewhere.
            let displaced = col_to_row[c];
            let saved_current = col_to_row[current];
            col_to_row[c] = Some(i);
            col_to_row[current] = None;
            let ok = match displaced {
                None => true,
                Some(other) => {
                    let mut visited = vec![false; n];
                    visited[c] = true;
                    try_kuhn(other, &adj, &banned, &mut visited, &mut col_to_row)
                }
            };
            if ok {
                chosen = c;
                break;
            }
            // Roll back.
            col_to_row[c] = displaced;
            col_to_row[current] = saved_current;
        }
        banned[chosen] = true;
        col_to_row[chosen] = Some(i);
        result[i] = chosen;
    }
    result
}

/// Optimal perfect matching on a square weight matrix. Returns `(row, col)`
/// pairs sorted by row; among equally-weighted optima the lexicographically
/// smallest matching is returned.
pub fn hungarian(weights: &[Vec<f64>], sense: Sense) -> Result<Vec<(usize, usize)>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::EmptyInput("weight matrix"));
    }
    for row in weights {
        if row.len() != n {
            return Err(Error::NonSquare {
                rows: n,
                cols: row.len(),
            });
        }
        for &x in row {
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    index: 0,
                    value: x,
                });
            }
        }
    }
    let cost: Vec<Vec<f64>> = match sense {
        Sense::Min => weights.to_vec(),
        Sense::Max => weights
            .iter()
            .map(|r| r.iter().map(|&x| -x).collect())
            .collect(),
    };
    let (row_to_col, u, v) = solve_min(&cost);
    let refined = lexicographic_refine(&cost, &row_to_col, &u, &v);
    Ok(refined.into_iter().enumerate().collect())
}

/// Total weight of a matching under the given matrix.
pub fn matching_weight(weights: &[Vec<f64>], matching: &[(usize, usize)]) -> f64 {
    matching.iter().map(|&(i, j)| weights[i][j]).sum()
}
