//! Dense helpers shared by the samplers: jittered Cholesky, incremental row
//! reduction of alignment matrices, and small solves.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest relative jitter tried when a factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Symmetrizes `m` in place as `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Lower Cholesky factor of `m`, escalating a diagonal jitter of
/// `1e-10 · mean(diag)` by ×10 up to `1e-6 · mean(diag)` on failure.
///
/// Returns the factor together with the jitter that was added (0 when the
/// plain factorization succeeded).
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::CholeskyFailure);
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let n = m.nrows();
    let mean_diag = (0..n).map(|i| m[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = shifted.cholesky() {
            return Ok((c.l(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::CholeskyFailure)
}

/// Plain Cholesky without jitter; `None` when `m` is not numerically PD.
pub fn cholesky_strict(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l())
}

/// Solves `L Lᵀ x = b` given the lower factor `L`.
pub fn chol_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("triangular factor has nonzero diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("triangular factor has nonzero diagonal")
}

/// Matrix version of [`chol_solve`].
pub fn chol_solve_mat(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let y = l.solve_lower_triangular(b).expect("triangular factor has nonzero diagonal");
    l.transpose()
        .solve_upper_triangular(&y)
        .expect("triangular factor has nonzero diagonal")
}

/// Outcome of offering one row to a [`RowReducer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowStatus {
    /// The row extends the span; it is kept.
    Independent,
    /// The row lies in the span of earlier rows; `residual` is the mismatch
    /// between its right-hand side and the one implied by the kept rows.
    Dependent { residual: f64 },
}

/// Forward elimination over rows offered one at a time, tracking an
/// augmented right-hand side so that dependent rows can be checked for
/// consistency.
#[derive(Debug, Clone)]
pub struct RowReducer {
    cols: usize,
    basis: Vec<(usize, Vec<f64>, f64)>,
    tol: f64,
}

impl RowReducer {
    pub fn new(cols: usize) -> Self {
        RowReducer { cols, basis: Vec::new(), tol: 1e-9 }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn offer(&mut self, row: &[f64], rhs: f64) -> RowStatus {
        debug_assert_eq!(row.len(), self.cols);
        let scale = row.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        let mut v: Vec<f64> = row.to_vec();
        let mut b = rhs;
        for (pivot, u, c) in &self.basis {
            let f = v[*pivot] / u[*pivot];
            if f != 0.0 {
                for (vi, ui) in v.iter_mut().zip(u.iter()) {
                    *vi -= f * ui;
                }
                b -= f * c;
            }
        }
        let (pivot, max) = v
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if max <= self.tol * scale {
            RowStatus::Dependent { residual: b }
        } else {
            self.basis.push((pivot, v, b));
            RowStatus::Independent
        }
    }
}

/// Numerical rank of `g` by pivoted forward elimination.
pub fn rank(g: &DMatrix<f64>) -> usize {
    let mut red = RowReducer::new(g.ncols());
    let mut row = alloc::vec![0.0; g.ncols()];
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            row[j] = g[(i, j)];
        }
        red.offer(&row, 0.0);
    }
    red.rank()
}

/// Copies the listed rows of `g` (in the given order) into a new matrix.
pub fn select_rows(g: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), g.ncols(), |i, j| g[(rows[i], j)])
}

/// Copies the listed columns of `g` into a new matrix.
pub fn select_cols(g: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(g.nrows(), cols.len(), |i, j| g[(i, cols[j])])
}

/// Minimum-norm solution `Gᵀ(GGᵀ)⁻¹r` of a full-row-rank system.
pub fn min_norm_solution(g: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    if g.nrows() == 0 {
        return Ok(DVector::zeros(g.ncols()));
    }
    let ggt = g * g.transpose();
    let l = cholesky_strict(&ggt).ok_or_else(Error::singular)?;
    Ok(g.transpose() * chol_solve(&l, r))
}

/// `‖Gx − r‖∞`.
pub fn residual_inf(g: &DMatrix<f64>, x: &DVector<f64>, r: &DVector<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    (g * x - r).amax()
}
