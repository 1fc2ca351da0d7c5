//! Small dense complex linear-algebra helpers on top of nalgebra.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type Lu = nalgebra::linalg::LU<Complex64, Dyn, Dyn>;

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn diag(v: &DVector<Complex64>) -> CMat {
    CMat::from_diagonal(v)
}

/// `diag(left) * m * diag(right)` without forming the diagonal matrices.
pub fn scale_rows_cols(left: &DVector<Complex64>, m: &CMat, right: &DVector<Complex64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| left[i] * m[(i, j)] * right[j])
}

/// Solves `a x = b` with partial-pivoted LU.
pub fn solve(a: &CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    a.clone().lu().solve(b).ok_or(Error::Singular { context })
}

/// 2-norm condition number from singular values.
pub fn condition_number(a: &CMat) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Row and column scale factors bringing every row and column of `a` to
/// unit max-norm.
pub fn equilibration(a: &CMat) -> (DVector<f64>, DVector<f64>) {
    let rows = DVector::from_fn(a.nrows(), |i, _| {
        let m = a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    });
    let cols = DVector::from_fn(a.ncols(), |j, _| {
        let m = (0..a.nrows())
            .map(|i| (a[(i, j)] * rows[i]).norm())
            .fold(0.0, f64::max);
        if m > 0.0 {
            1.0 / m
        } else {
            1.0
        }
    });
    (rows, cols)
}

/// Solves `a x = b` on the equilibrated system and returns `x` with the
/// condition number of the equilibrated matrix.
pub fn solve_equilibrated(a: &CMat, b: &CMat, context: &'static str) -> Result<(CMat, f64)> {
    let (rows, cols) = equilibration(a);
    let scaled = CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * rows[i] * cols[j]);
    let cond = condition_number(&scaled);
    let rhs = CMat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * rows[i]);
    let y = solve(&scaled, &rhs, context)?;
    let x = CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * cols[i]);
    Ok((x, cond))
}

/// `log det m` from an LU factorization: the sum of `ln u_ii` over the
/// pivots plus `i pi` for an odd permutation. The imaginary part is reduced
/// to `(-pi, pi]`.
pub fn log_det(m: &CMat) -> Result<Complex64> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut modulus = 0.0;
    let mut phase = 0.0;
    for i in 0..u.nrows() {
        let p = u[(i, i)];
        if p == Complex64::new(0.0, 0.0) {
            return Err(Error::Singular { context: "log det" });
        }
        modulus += p.norm().ln();
        phase += p.arg();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        phase += PI;
    }
    Ok(Complex64::new(modulus, wrap_phase(phase)))
}

/// `log det(1 - x)`. For small `x` the series `-sum tr(x^j) / j` is used,
/// which keeps full relative precision when `1 - x` rounds to the identity.
pub fn log_det_one_minus(x: &CMat) -> Result<Complex64> {
    let n = x.nrows();
    if x.norm() < 0.25 {
        let mut power = x.clone();
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 1..=200 {
            let term = power.trace() / j as f64;
            sum -= term;
            if term.norm() <= 1e-17 * sum.norm() || term.norm() < 1e-300 {
                return Ok(sum);
            }
            power = &power * x;
        }
        return Ok(sum);
    }
    log_det(&(CMat::identity(n, n) - x))
}

fn wrap_phase(phase: f64) -> f64 {
    let wrapped = phase - 2.0 * PI * (phase / (2.0 * PI)).round();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix.
pub fn pseudo_inverse(t: &CMat) -> Result<CMat> {
    let th = t.adjoint();
    solve(&(&th * t), &th, "pseudo-inverse normal equations")
}
