//! Sparse direct solution and condition-number estimation.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::assembly::LinearSystem;
use crate::error::{Result, SbmError};
use crate::sparse::CsrMatrix;

/// Relative residual accepted from a direct solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// Matrices up to this size get an exact dense SVD under [`ConditionMode::Auto`].
pub const DENSE_SVD_LIMIT: usize = 4000;
const ITERATION_CAP: usize = 200;
const STAGNATION: f64 = 1e-6;

/// Sparse LU factors of the equilibrated matrix `R A C`, with `R` and `C`
/// diagonal row and column scalings.
pub struct Factorization {
    n: usize,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        if n == 0 {
            return Err(SbmError::Argument("empty matrix".into()));
        }
        if let Some(&r) = a.empty_rows().first() {
            return Err(SbmError::Singular(format!("row {r} is structurally empty")));
        }
        let mut row_scale = vec![0.0f64; n];
        for (i, _, v) in a.entries() {
            row_scale[i] = row_scale[i].max(v.abs());
        }
        row_scale.iter_mut().for_each(|r| *r = pow2_reciprocal(*r));
        let mut col_scale = vec![0.0f64; n];
        for (i, j, v) in a.entries() {
            col_scale[j] = col_scale[j].max((row_scale[i] * v).abs());
        }
        if let Some(j) = col_scale.iter().position(|&c| c == 0.0) {
            return Err(SbmError::Singular(format!(
                "column {j} is structurally empty"
            )));
        }
        col_scale.iter_mut().for_each(|c| *c = pow2_reciprocal(*c));
        let triplets: Vec<Triplet<usize, usize, f64>> = a
            .entries()
            .map(|(row, col, val)| Triplet::new(row, col, row_scale[row] * val * col_scale[col]))
            .collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SbmError::LinearAlgebra(format!("{e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| SbmError::Singular(format!("{e:?}")))?;
        Ok(Self {
            n,
            row_scale,
            col_scale,
            lu,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        // A^{-1} = C (RAC)^{-1} R and A^{-T} = R (RAC)^{-T} C
        let (pre, post) = if transpose {
            (&self.col_scale, &self.row_scale)
        } else {
            (&self.row_scale, &self.col_scale)
        };
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| pre[i] * b[i]);
        if transpose {
            self.lu.solve_transpose_in_place(rhs.as_mut());
        } else {
            self.lu.solve_in_place(rhs.as_mut());
        }
        (0..self.n).map(|i| post[i] * rhs[(i, 0)]).collect()
    }

    /// `A^{-1} b`, unrefined.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.apply(b, false)
    }

    /// `A^{-T} b`, unrefined.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        self.apply(b, true)
    }
}

/// Power of two nearest to `1 / x`, so scaling introduces no rounding.
fn pow2_reciprocal(x: f64) -> f64 {
    2f64.powi(-x.log2().round() as i32)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let denom = a.norm_inf() * max_abs(x) + max_abs(b);
    if denom == 0.0 {
        0.0
    } else {
        max_abs(&r) / denom
    }
}

/// Solves `A x = b` with a factorization of `A`, applying a few steps of
/// iterative refinement if the residual check fails.
pub fn solve_with(a: &CsrMatrix, lu: &Factorization, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(SbmError::Argument(format!(
            "rhs has length {}, expected {}",
            b.len(),
            a.n()
        )));
    }
    let mut x = lu.solve(b);
    let mut res = f64::INFINITY;
    for step in 0..=REFINEMENT_STEPS {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SbmError::Singular(
                "factorization produced non-finite values".into(),
            ));
        }
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        let denom = a.norm_inf() * max_abs(&x) + max_abs(b);
        let next = if denom == 0.0 {
            0.0
        } else {
            max_abs(&r) / denom
        };
        // refine until the residual stops improving
        if next >= res || step == REFINEMENT_STEPS {
            res = res.min(next);
            break;
        }
        res = next;
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
    }
    if res <= RESIDUAL_TOLERANCE {
        return Ok(x);
    }
    Err(SbmError::Singular(format!(
        "relative residual {res:.3e} exceeds {RESIDUAL_TOLERANCE:.0e}"
    )))
}

/// Factors and solves an assembled system.
pub fn solve(system: &LinearSystem) -> Result<Vec<f64>> {
    let lu = Factorization::new(&system.matrix)?;
    solve_with(&system.matrix, &lu, &system.rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMode {
    DenseSvd,
    Iterative,
    /// Dense SVD up to [`DENSE_SVD_LIMIT`] unknowns, iterative above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub mode: ConditionMode,
    /// False when the iterative estimate hit its iteration cap.
    pub converged: bool,
}

/// Spectral condition number `sigma_max / sigma_min`.
pub fn condition_number(a: &CsrMatrix, mode: ConditionMode) -> Result<ConditionEstimate> {
    let mode = match mode {
        ConditionMode::Auto if a.n() <= DENSE_SVD_LIMIT => ConditionMode::DenseSvd,
        ConditionMode::Auto => ConditionMode::Iterative,
        m => m,
    };
    match mode {
        ConditionMode::DenseSvd => {
            let dense = a.to_dense();
            let m = Mat::from_fn(a.n(), a.n(), |i, j| dense[i][j]);
            let s = m
                .singular_values()
                .map_err(|e| SbmError::LinearAlgebra(format!("{e:?}")))?;
            let (max, min) = (s[0], s[s.len() - 1]);
            let value = if min > 0.0 { max / min } else { f64::INFINITY };
            Ok(ConditionEstimate {
                value,
                mode,
                converged: true,
            })
        }
        _ => {
            let lu = Factorization::new(a)?;
            let (smax, c1) = power_iteration(a.n(), |v| a.matvec_transpose(&a.matvec(v)));
            let (inv, c2) = power_iteration(a.n(), |v| lu.solve(&lu.solve_transpose(v)));
            if !inv.is_finite() || inv <= 0.0 {
                return Err(SbmError::Singular("inverse iteration diverged".into()));
            }
            Ok(ConditionEstimate {
                value: (smax * inv).sqrt(),
                mode,
                converged: c1 && c2,
            })
        }
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
fn power_iteration(n: usize, op: impl Fn(&[f64]) -> Vec<f64>) -> (f64, bool) {
    // deterministic start vector with all components nonzero
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i * 7 % 11) as f64 / 11.0))
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..ITERATION_CAP {
        let w = op(&v);
        let next = norm(&w);
        if next == 0.0 || !next.is_finite() {
            return (next, false);
        }
        v = w.into_iter().map(|x| x / next).collect();
        if (next - lambda).abs() <= STAGNATION * next {
            return (next, true);
        }
        lambda = next;
    }
    (lambda, false)
}
