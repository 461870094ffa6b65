//! Dense two-phase simplex with Bland's rule, for small oracle problems.
//!
//! Solves `min cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum Outcome {
    Optimal { value: f64, x: DVector<f64> },
    Infeasible,
    Unbounded,
}

pub fn minimize(
    c: &DVector<f64>,
    a_ub: &DMatrix<f64>,
    b_ub: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
) -> Outcome {
    let n = c.len();
    let m_ub = a_ub.nrows();
    let m_eq = a_eq.nrows();
    let m = m_ub + m_eq;
    // Columns: x (n), slacks (m_ub), artificials (m), rhs.
    let cols = n + m_ub + m + 1;
    let rhs = cols - 1;
    let mut t = DMatrix::zeros(m + 1, cols);
    for i in 0..m {
        let (row, b) = if i < m_ub {
            (a_ub.row(i).clone_owned(), b_ub[i])
        } else {
            (a_eq.row(i - m_ub).clone_owned(), b_eq[i - m_ub])
        };
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * row[j];
        }
        if i < m_ub {
            t[(i, n + i)] = sign;
        }
        t[(i, n + m_ub + i)] = 1.0;
        t[(i, rhs)] = sign * b;
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n + m_ub + i).collect();

    // Phase one: minimize the sum of artificials.
    let obj = m;
    for j in 0..cols {
        t[(obj, j)] = 0.0;
    }
    for i in 0..m {
        for j in 0..cols {
            if j < n + m_ub || j == rhs {
                t[(obj, j)] -= t[(i, j)];
            }
        }
    }
    if !run(&mut t, &mut basis, n + m_ub + m) {
        return Outcome::Unbounded;
    }
    if -t[(obj, rhs)] > 1e-8 {
        return Outcome::Infeasible;
    }
    // Drive artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n + m_ub {
            if let Some(j) = (0..n + m_ub).find(|&j| t[(i, j)].abs() > EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }

    // Phase two on the original objective, artificial columns frozen.
    for j in 0..cols {
        t[(obj, j)] = 0.0;
    }
    for j in 0..n {
        t[(obj, j)] = c[j];
    }
    for i in 0..m {
        let b = basis[i];
        if b < n {
            let f = t[(obj, b)];
            if f != 0.0 {
                for j in 0..cols {
                    t[(obj, j)] -= f * t[(i, j)];
                }
            }
        }
    }
    if !run(&mut t, &mut basis, n + m_ub) {
        return Outcome::Unbounded;
    }
    let mut x = DVector::zeros(n);
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[(i, rhs)];
        }
    }
    Outcome::Optimal {
        value: c.dot(&x),
        x,
    }
}

pub fn feasible(
    a_ub: &DMatrix<f64>,
    b_ub: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
) -> bool {
    let c = DVector::zeros(a_ub.ncols().max(a_eq.ncols()));
    !matches!(minimize(&c, a_ub, b_ub, a_eq, b_eq), Outcome::Infeasible)
}

/// Simplex iterations with Bland's rule over the first `allowed` columns.
/// Returns false when unbounded.
fn run(t: &mut DMatrix<f64>, basis: &mut [usize], allowed: usize) -> bool {
    let obj = t.nrows() - 1;
    let rhs = t.ncols() - 1;
    loop {
        let Some(enter) = (0..allowed).find(|&j| t[(obj, j)] < -EPS) else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..obj {
            let a = t[(i, enter)];
            if a > EPS {
                let ratio = t[(i, rhs)] / a;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - EPS || (ratio <= r + EPS && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return false;
        };
        pivot(t, basis, row, enter);
    }
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let p = t[(row, col)];
    for j in 0..t.ncols() {
        t[(row, j)] /= p;
    }
    for i in 0..t.nrows() {
        if i != row {
            let f = t[(i, col)];
            if f != 0.0 {
                for j in 0..t.ncols() {
                    t[(i, j)] -= f * t[(row, j)];
                }
            }
        }
    }
    basis[row] = col;
}
