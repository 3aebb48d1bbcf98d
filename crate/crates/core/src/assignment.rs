//! IoU cost matrices and optimal one-to-one assignment.
//!
//! The solver is the shortest-augmenting-path form of the Hungarian method on
//! a square matrix (rectangular inputs are padded). Among all optimal
//! assignments it returns the lexicographically smallest row-to-column vector,
//! which makes equal-cost ties resolve toward the lowest
//! `(row, column)` indices.

use thiserror::Error;

use crate::geometry::{iou, BoundingBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost entry ({row}, {col}) is not finite: {value}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("cost entry ({row}, {col}) = {value} is outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error("gate {0} is outside [0, 1]")]
    InvalidGate(f64),
    #[error("cost matrix data has {len} entries, expected {rows}x{cols}")]
    Shape { rows: usize, cols: usize, len: usize },
}

/// Dense row-major matrix of assignment costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::Shape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    fn check_finite(&self) -> Result<(), AssignmentError> {
        for (k, &value) in self.data.iter().enumerate() {
            if !value.is_finite() {
                return Err(AssignmentError::NonFinite {
                    row: k / self.cols,
                    col: k % self.cols,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// `cost[i][j] = 1 - iou(detections[i], predictions[j])`.
pub fn build_cost_matrix(detections: &[BoundingBox], predictions: &[BoundingBox]) -> CostMatrix {
    let mut m = CostMatrix::filled(detections.len(), predictions.len(), 1.0);
    for (i, d) in detections.iter().enumerate() {
        for (j, p) in predictions.iter().enumerate() {
            m.set(i, j, 1.0 - iou(d, p));
        }
    }
    m
}

/// Raw solver output on a possibly rectangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column assigned to row `i`, or `None` when the
    /// row landed on a padding column.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the real (non-padding) entries used, accumulated in row order.
    pub total_cost: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }
}

/// Minimum-cost assignment over any finite cost matrix. Rectangular inputs are
/// padded to square with `pad`; padded pairs are never reported.
pub fn min_cost_assignment(cost: &CostMatrix, pad: f64) -> Result<Assignment, AssignmentError> {
    cost.check_finite()?;
    if !pad.is_finite() {
        return Err(AssignmentError::NonFinite {
            row: cost.rows,
            col: cost.cols,
            value: pad,
        });
    }
    let n = cost.rows.max(cost.cols);
    if cost.rows == 0 || cost.cols == 0 {
        return Ok(Assignment {
            row_to_col: vec![None; cost.rows],
            total_cost: 0.0,
        });
    }

    let mut square = vec![pad; n * n];
    for r in 0..cost.rows {
        square[r * n..r * n + cost.cols].copy_from_slice(&cost.data[r * cost.cols..(r + 1) * cost.cols]);
    }

    let (mut row_to_col, u, v) = hungarian_square(&square, n);
    let scale = square.iter().fold(1.0f64, |acc, &c| acc.max(c.abs()));
    lexicographic_refine(&square, n, &u, &v, 1e-12 * scale, &mut row_to_col);

    let mut total_cost = 0.0;
    let row_to_col: Vec<Option<usize>> = row_to_col[..cost.rows]
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            if c < cost.cols {
                total_cost += cost.get(r, c);
                Some(c)
            } else {
                None
            }
        })
        .collect();
    Ok(Assignment {
        row_to_col,
        total_cost,
    })
}

/// Shortest augmenting path Hungarian on an `n x n` row-major matrix.
/// Returns the row-to-column assignment and the row/column potentials
/// (`u[i] + v[j] <= c[i][j]`, tight on assigned pairs).
fn hungarian_square(c: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrite an optimal assignment into the lexicographically smallest optimal
/// one. With optimal duals fixed, the optimal assignments are exactly the
/// perfect matchings on tight edges, so rows are pinned greedily to their
/// lowest tight column for which the remaining rows can still be matched.
fn lexicographic_refine(c: &[f64], n: usize, u: &[f64], v: &[f64], eps: f64, row_to_col: &mut [usize]) {
    let tight = |i: usize, j: usize| c[i * n + j] - u[i] - v[j] <= eps;
    let mut col_owner = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_owner[j] = i;
    }
    let mut fixed_col = vec![false; n];

    for i in 0..n {
        let current = row_to_col[i];
        for j in 0..current {
            if fixed_col[j] || !tight(i, j) {
                continue;
            }
            // j is owned by an unfixed row r; find it a new tight column,
            // ending on the one `i` releases.
            let r = col_owner[j];
            let mut visited = vec![false; n];
            visited[j] = true;
            let mut path = Vec::new();
            if reroute(r, current, &tight, &fixed_col, &col_owner, &mut visited, &mut path, n) {
                // path holds (row, new_col) moves from r outward.
                for &(row, col) in &path {
                    row_to_col[row] = col;
                    col_owner[col] = row;
                }
                row_to_col[i] = j;
                col_owner[j] = i;
                break;
            }
        }
        fixed_col[row_to_col[i]] = true;
    }
}

#[allow(clippy::too_many_arguments)]
fn reroute(
    row: usize,
    target: usize,
    tight: &impl Fn(usize, usize) -> bool,
    fixed_col: &[bool],
    col_owner: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
    n: usize,
) -> bool {
    for col in 0..n {
        if visited[col] || fixed_col[col] || !tight(row, col) {
            continue;
        }
        visited[col] = true;
        if col == target {
            path.push((row, col));
            return true;
        }
        if reroute(col_owner[col], target, tight, fixed_col, col_owner, visited, path, n) {
            path.push((row, col));
            return true;
        }
    }
    false
}

/// Association outcome. Indices refer to the detection (row) and track
/// (column) lists that produced the cost matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    /// `(detection_index, track_index, iou)`, sorted by detection index.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
    /// Total cost of the optimal assignment before gating.
    pub pre_gate_cost: f64,
}

/// Optimal IoU-cost assignment followed by gate demotion: a tentative pair
/// whose IoU (`1 - cost`) falls below `gate` is split back into an unmatched
/// detection and an unmatched track.
pub fn solve(cost: &CostMatrix, gate: f64) -> Result<AssignmentResult, AssignmentError> {
    if !(0.0..=1.0).contains(&gate) {
        return Err(AssignmentError::InvalidGate(gate));
    }
    cost.check_finite()?;
    for r in 0..cost.rows {
        for c in 0..cost.cols {
            let value = cost.get(r, c);
            if !(0.0..=1.0).contains(&value) {
                return Err(AssignmentError::OutOfRange { row: r, col: c, value });
            }
        }
    }

    let assignment = min_cost_assignment(cost, 1.0)?;
    let mut result = AssignmentResult {
        pre_gate_cost: assignment.total_cost,
        ..Default::default()
    };
    let mut track_taken = vec![false; cost.cols];
    for (r, col) in assignment.row_to_col.iter().enumerate() {
        match *col {
            Some(c) if 1.0 - cost.get(r, c) >= gate => {
                result.matches.push((r, c, 1.0 - cost.get(r, c)));
                track_taken[c] = true;
            }
            _ => result.unmatched_detections.push(r),
        }
    }
    result.unmatched_tracks = (0..cost.cols).filter(|&c| !track_taken[c]).collect();
    Ok(result)
}
