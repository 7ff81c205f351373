//! Minimum-cost linear assignment (Kuhn-Munkres with potentials).

use crate::error::{Error, Result};

/// Optimal row → column mapping of a cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `mapping[row]` is the assigned column, `None` for rows left over when
    /// the matrix has more rows than columns.
    pub mapping: Vec<Option<usize>>,
    pub total_cost: f64,
    /// `(row, column, cost)` for every assigned pair, by row.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl AssignmentResult {
    pub fn empty(rows: usize) -> Self {
        Self {
            mapping: vec![None; rows],
            total_cost: 0.0,
            pairs: Vec::new(),
        }
    }

    /// Rows whose assigned column is `col`, if any.
    pub fn row_for(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Solves the rectangular assignment problem. Rectangular inputs are padded
/// to square with a constant sentinel, which shifts every complete assignment
/// by the same amount and so leaves the optimum over real pairs unchanged.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidCost("ragged rows".into()));
    }
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c.is_nan() {
                return Err(Error::InvalidCost(format!("NaN at ({i}, {j})")));
            }
            if !c.is_finite() {
                return Err(Error::InvalidCost(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    if rows == 0 || cols == 0 {
        return Ok(AssignmentResult::empty(rows));
    }

    let n = rows.max(cols);
    let max_abs = cost
        .iter()
        .flatten()
        .fold(0.0f64, |m, &c| m.max(c.abs()));
    let sentinel = 10.0 * max_abs + 1.0;
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            cost[i][j]
        } else {
            sentinel
        }
    };

    // 1-based potentials; column 0 is the virtual start of each augmenting path
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = at(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut mapping = vec![None; rows];
    for (j, &i) in owner.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            mapping[i - 1] = Some(j - 1);
        }
    }
    let pairs: Vec<(usize, usize, f64)> = mapping
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, j, cost[i][j])))
        .collect();
    let total_cost = pairs.iter().map(|p| p.2).sum();
    Ok(AssignmentResult {
        mapping,
        total_cost,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let r = hungarian(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(r.mapping, vec![Some(0), Some(1)]);
        assert_eq!(r.total_cost, 0.0);

        let r = hungarian(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(r.mapping, vec![Some(1), Some(0)]);
        assert_eq!(r.total_cost, 3.0);

        let r = hungarian(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![3.0, 6.0, 9.0],
        ])
        .unwrap();
        assert_eq!(r.mapping, vec![Some(2), Some(1), Some(0)]);
        assert_eq!(r.total_cost, 10.0);
    }

    #[test]
    fn rectangular() {
        // 3 rows, 2 columns: one row stays unassigned
        let r = hungarian(&[vec![5.0, 9.0], vec![1.0, 8.0], vec![7.0, 2.0]]).unwrap();
        assert_eq!(r.mapping, vec![None, Some(0), Some(1)]);
        assert_eq!(r.total_cost, 3.0);
        assert_eq!(r.pairs.len(), 2);

        let r = hungarian(&[vec![3.0, 1.0, 2.0]]).unwrap();
        assert_eq!(r.mapping, vec![Some(1)]);
    }

    #[test]
    fn negative_costs() {
        let r = hungarian(&[vec![-1.0, -5.0], vec![-3.0, -2.0]]).unwrap();
        assert_eq!(r.total_cost, -8.0);
    }

    #[test]
    fn rejects_nan_and_ragged() {
        assert!(matches!(
            hungarian(&[vec![0.0, f64::NAN]]),
            Err(Error::InvalidCost(_))
        ));
        assert!(hungarian(&[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(hungarian(&[vec![f64::INFINITY]]).is_err());
        assert_eq!(hungarian(&[]).unwrap().pairs.len(), 0);
    }
}
