//! Rectangular linear sum assignment.
//!
//! `solve_lsa` is a shortest-augmenting-path solver in the Jonker-Volgenant
//! family, run without an initialization phase: rows of the (possibly
//! transposed) matrix are inserted one at a time and each insertion runs a
//! Dijkstra-style search over reduced costs. Forbidden pairs are encoded as
//! `f64::INFINITY` and are treated as unusable, not merely expensive.
//! `brute_force_lsa` enumerates every injection of the smaller side into the
//! larger and exists as an independent oracle for the solver.

use std::fmt;

/// Dense cost matrix with `f64::INFINITY` marking forbidden pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if rows == 0 || cols == 0 {
            return Err(AssignError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(AssignError::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| v.is_nan()) {
            return Err(AssignError::NanCost {
                row: idx / cols,
                col: idx % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, AssignError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn transposed(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.at(r, c));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// A complete assignment of the smaller matrix side. Pairs are sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssignError {
    EmptyMatrix,
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    NanCost { row: usize, col: usize },
    /// No complete assignment of the smaller side avoids forbidden entries.
    Infeasible,
    /// Brute force enumeration would be too large.
    TooLarge { rows: usize, cols: usize },
}

impl fmt::Display for AssignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignError::EmptyMatrix => write!(f, "cost matrix must have positive dimensions"),
            AssignError::ShapeMismatch { rows, cols, len } => {
                write!(f, "cost data length {len} does not match {rows}x{cols}")
            }
            AssignError::NanCost { row, col } => {
                write!(f, "NaN cost at ({row}, {col})")
            }
            AssignError::Infeasible => {
                write!(f, "no complete assignment avoids forbidden entries")
            }
            AssignError::TooLarge { rows, cols } => {
                write!(f, "{rows}x{cols} exceeds the brute force size limit")
            }
        }
    }
}

impl std::error::Error for AssignError {}

/// Minimum-cost assignment of every element of the smaller matrix side.
/// Each element of the smaller side is assigned exactly once, each element
/// of the larger side at most once. Returns an infeasibility error when
/// forbidden entries block every complete assignment.
pub fn solve_lsa(cost: &CostMatrix) -> Result<Assignment, AssignError> {
    let transposed = cost.rows > cost.cols;
    let work;
    let m = if transposed {
        work = cost.transposed();
        &work
    } else {
        cost
    };
    let (nr, nc) = (m.rows, m.cols);

    let mut u = vec![0.0_f64; nr];
    let mut v = vec![0.0_f64; nc];
    let mut col_at_row = vec![usize::MAX; nr];
    let mut row_at_col = vec![usize::MAX; nc];

    let mut shortest = vec![0.0_f64; nc];
    let mut prev_row = vec![usize::MAX; nc];
    let mut in_tree_row = vec![false; nr];
    let mut in_tree_col = vec![false; nc];
    let mut remaining = vec![0usize; nc];

    for cur_row in 0..nr {
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);
        in_tree_row.iter_mut().for_each(|b| *b = false);
        in_tree_col.iter_mut().for_each(|b| *b = false);
        for (i, slot) in remaining.iter_mut().enumerate() {
            *slot = i;
        }
        let mut num_remaining = nc;
        let mut min_val = 0.0_f64;
        let mut i = cur_row;
        let mut sink = usize::MAX;

        while sink == usize::MAX {
            in_tree_row[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = usize::MAX;
            for (it, &j) in remaining.iter().enumerate().take(num_remaining) {
                let reduced = min_val + m.at(i, j) - u[i] - v[j];
                if reduced < shortest[j] {
                    shortest[j] = reduced;
                    prev_row[j] = i;
                }
                // Prefer unassigned columns on ties so augmenting stops early.
                if shortest[j] < lowest
                    || (shortest[j] == lowest && row_at_col[j] == usize::MAX)
                {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            if !min_val.is_finite() {
                return Err(AssignError::Infeasible);
            }
            let j = remaining[index];
            if row_at_col[j] == usize::MAX {
                sink = j;
            } else {
                i = row_at_col[j];
            }
            in_tree_col[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for r in 0..nr {
            if in_tree_row[r] && r != cur_row {
                u[r] += min_val - shortest[col_at_row[r]];
            }
        }
        for (j, shortest_j) in shortest.iter().enumerate().take(nc) {
            if in_tree_col[j] {
                v[j] -= min_val - shortest_j;
            }
        }

        let mut j = sink;
        loop {
            let r = prev_row[j];
            row_at_col[j] = r;
            std::mem::swap(&mut col_at_row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..nr)
        .map(|r| {
            if transposed {
                (col_at_row[r], r)
            } else {
                (r, col_at_row[r])
            }
        })
        .collect();
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(r, c)| cost.at(r, c)).sum();
    Ok(Assignment { pairs, total_cost })
}

const BRUTE_FORCE_SIDE_LIMIT: usize = 8;
const BRUTE_FORCE_STATE_LIMIT: u64 = 5_000_000;

/// Exhaustive enumeration over injections of the smaller side into the
/// larger. Same contract as [`solve_lsa`]; among equal-cost optima the
/// lexicographically smallest row-sorted pair list wins.
pub fn brute_force_lsa(cost: &CostMatrix) -> Result<Assignment, AssignError> {
    let k = cost.rows.min(cost.cols);
    let n = cost.rows.max(cost.cols);
    if k > BRUTE_FORCE_SIDE_LIMIT {
        return Err(AssignError::TooLarge {
            rows: cost.rows,
            cols: cost.cols,
        });
    }
    let mut states = 1u64;
    for i in 0..k {
        states = states.saturating_mul((n - i) as u64);
        if states > BRUTE_FORCE_STATE_LIMIT {
            return Err(AssignError::TooLarge {
                rows: cost.rows,
                cols: cost.cols,
            });
        }
    }

    let row_side_smaller = cost.rows <= cost.cols;
    let mut used = vec![false; n];
    let mut chosen = vec![usize::MAX; k];
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;

    fn recurse(
        cost: &CostMatrix,
        row_side_smaller: bool,
        depth: usize,
        running: f64,
        used: &mut [bool],
        chosen: &mut [usize],
        best: &mut Option<(f64, Vec<(usize, usize)>)>,
    ) {
        if depth == chosen.len() {
            let mut pairs: Vec<(usize, usize)> = chosen
                .iter()
                .enumerate()
                .map(|(s, &l)| if row_side_smaller { (s, l) } else { (l, s) })
                .collect();
            pairs.sort_unstable();
            let better = match best {
                None => true,
                Some((cost0, pairs0)) => {
                    running < *cost0 || (running == *cost0 && pairs < *pairs0)
                }
            };
            if better {
                *best = Some((running, pairs));
            }
            return;
        }
        for l in 0..used.len() {
            if used[l] {
                continue;
            }
            let entry = if row_side_smaller {
                cost.at(depth, l)
            } else {
                cost.at(l, depth)
            };
            if !entry.is_finite() {
                continue;
            }
            used[l] = true;
            chosen[depth] = l;
            recurse(cost, row_side_smaller, depth + 1, running + entry, used, chosen, best);
            used[l] = false;
        }
    }

    recurse(
        cost,
        row_side_smaller,
        0,
        0.0,
        &mut used,
        &mut chosen,
        &mut best,
    );
    match best {
        Some((_, pairs)) => {
            // Re-sum in row order so totals are bit-identical to solve_lsa's.
            let total_cost = pairs.iter().map(|&(r, c)| cost.at(r, c)).sum();
            Ok(Assignment { pairs, total_cost })
        }
        None => Err(AssignError::Infeasible),
    }
}
