//! Minimum-cost linear assignment (Hungarian algorithm, O(n^3) with dual
//! potentials) over dense, possibly rectangular `f64` cost matrices.
//!
//! `+inf` (and NaN) entries mark forbidden pairs. They are replaced by a
//! penalty larger than any finite assignment can reach, so the solver first
//! maximizes the number of finite pairs and then minimizes their cost;
//! forbidden pairs never appear in the result.

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            total_cost: 0.0,
        }
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// Solves `min Σ cost[i][σ(i)]` over one-to-one assignments covering
/// `min(rows, cols)` pairs. Rows must all have the same length.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    assert!(
        cost.iter().all(|r| r.len() == cols),
        "cost matrix rows must have equal length"
    );
    if rows == 0 || cols == 0 {
        return Assignment::empty();
    }
    let n = rows.max(cols);

    let finite = || cost.iter().flatten().copied().filter(|v| v.is_finite());
    let max_abs = finite().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_finite = finite().fold(f64::NEG_INFINITY, f64::max);
    let pad = if max_finite > 0.0 { 10.0 * max_finite } else { 0.0 };
    let forbidden = 2.0 * (n as f64) * (max_abs + 1.0) + 1.0;

    let entry = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            let v = cost[i][j];
            if v.is_finite() {
                v
            } else {
                forbidden
            }
        } else {
            pad
        }
    };

    // 1-based potentials; p[j] is the row assigned to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
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
                if used[j] {
                    continue;
                }
                let cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
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

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(i, j)| i < rows && j < cols && cost[i][j].is_finite())
        .collect();
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Assignment { pairs, total_cost }
}
