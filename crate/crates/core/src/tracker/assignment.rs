//! Rectangular minimum-cost assignment with a cost gate.
//!
//! The core solver is the shortest augmenting path method on a dense
//! rectangular matrix (rows <= columns after an optional transpose), so
//! unequal track and detection counts need no padding.

/// Outcome of [`solve_assignment`]. Indices refer to rows/columns of the
/// input matrix; `matches` is sorted by row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self::new(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// Minimum-cost assignment of every row of a `rows <= cols` matrix.
/// Returns `col_for_row`.
fn lsap_wide(cost: &CostMatrix) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let (nr, nc) = (cost.rows, cost.cols);
    debug_assert!(nr <= nc);
    let mut u = vec![0.0; nr];
    let mut v = vec![0.0; nc];
    let mut col4row = vec![NONE; nr];
    let mut row4col = vec![NONE; nc];
    let mut path = vec![NONE; nc];
    let mut shortest = vec![f64::INFINITY; nc];
    let mut in_rows = vec![false; nr];
    let mut in_cols = vec![false; nc];
    let mut remaining: Vec<usize> = Vec::with_capacity(nc);

    for cur_row in 0..nr {
        shortest.fill(f64::INFINITY);
        in_rows.fill(false);
        in_cols.fill(false);
        remaining.clear();
        remaining.extend((0..nc).rev());

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink = loop {
            in_rows[i] = true;
            let mut best_k = NONE;
            let mut lowest = f64::INFINITY;
            for (k, &j) in remaining.iter().enumerate() {
                let r = min_val + cost.get(i, j) - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                // prefer unassigned columns on ties to shorten paths
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    best_k = k;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(best_k);
            in_cols[j] = true;
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur_row] += min_val;
        for r in 0..nr {
            if in_rows[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..nc {
            if in_cols[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = std::mem::replace(&mut col4row[r], j);
            if r == cur_row {
                break;
            }
            j = prev;
        }
    }
    col4row
}

/// Full rectangular assignment: every row (or every column, whichever is
/// fewer) is matched. Returns `(row, col)` pairs sorted by row.
pub fn linear_sum_assignment(cost: &CostMatrix) -> Vec<(usize, usize)> {
    if cost.rows == 0 || cost.cols == 0 {
        return Vec::new();
    }
    if cost.rows <= cost.cols {
        lsap_wide(cost).into_iter().enumerate().collect()
    } else {
        let mut pairs: Vec<(usize, usize)> = lsap_wide(&cost.transposed())
            .into_iter()
            .enumerate()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Gated partial assignment.
///
/// Minimizes `sum(cost(i, j) - gate)` over one-to-one partial matchings that
/// only use pairs with `cost <= gate`: a pair is worth matching exactly when
/// it is within the gate, and a pair above the gate is never matched.
/// Equivalently, leaving a row or a column unmatched costs `gate / 2`.
pub fn solve_assignment(cost: &CostMatrix, gate: f64) -> Assignment {
    let reduced = CostMatrix::from_fn(cost.rows, cost.cols, |i, j| {
        let c = cost.get(i, j);
        if c <= gate {
            c - gate
        } else {
            0.0
        }
    });
    let mut row_used = vec![false; cost.rows];
    let mut col_used = vec![false; cost.cols];
    let mut matches = Vec::new();
    for (i, j) in linear_sum_assignment(&reduced) {
        if cost.get(i, j) <= gate {
            row_used[i] = true;
            col_used[j] = true;
            matches.push((i, j));
        }
    }
    Assignment {
        matches,
        unmatched_rows: (0..cost.rows).filter(|i| !row_used[*i]).collect(),
        unmatched_cols: (0..cost.cols).filter(|j| !col_used[*j]).collect(),
    }
}

/// Objective minimized by [`solve_assignment`].
pub fn gated_objective(cost: &CostMatrix, gate: f64, matches: &[(usize, usize)]) -> f64 {
    matches.iter().map(|&(i, j)| cost.get(i, j) - gate).sum()
}
