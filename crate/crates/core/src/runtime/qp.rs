//! Dense strictly convex QP
//!
//! ```text
//! minimize   ½ uᵀ G u + cᵀ u
//! subject to C u ≤ d
//! ```
//!
//! solved by the dual active-set method of Goldfarb and Idnani: start at the
//! unconstrained minimizer and add violated constraints one at a time, dropping
//! active ones whose multipliers would turn negative. Problems here have a
//! handful of variables, so the projections are recomputed densely per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Primal violation accepted at termination, relative to the row scale.
const VIOLATION_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// One multiplier per row of `C`; zero for inactive rows.
    pub multipliers: DVector<f64>,
    pub iterations: usize,
}

/// Largest residual among stationarity, primal feasibility, dual feasibility
/// and complementary slackness.
pub fn kkt_residual(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    cm: &DMatrix<f64>,
    d: &DVector<f64>,
    sol: &QpSolution,
) -> f64 {
    let stationarity = (g * &sol.u + c + cm.transpose() * &sol.multipliers).amax();
    let slack = cm * &sol.u - d;
    let primal = slack.max().max(0.0);
    let dual = (-sol.multipliers.min()).max(0.0);
    let complementarity = slack
        .iter()
        .zip(sol.multipliers.iter())
        .map(|(s, m)| (s * m).abs())
        .fold(0.0, f64::max);
    stationarity.max(primal).max(dual).max(complementarity)
}

/// Solves the QP given the inverse of `G`. Fails with
/// [`Error::OutsideReachSet`] when the constraints are infeasible.
pub fn solve_qp_with_inverse(
    g_inv: &DMatrix<f64>,
    c: &DVector<f64>,
    cm: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<QpSolution> {
    let p = cm.nrows();
    let mut u = -(g_inv * c);
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let max_iter = 20 * (p + u.len()) + 50;

    // Rows are used as `n = -C_i`, `b = -d_i`, i.e. nᵀu ≥ b.
    let row_scale: Vec<f64> = (0..p)
        .map(|i| cm.row(i).amax().max(d[i].abs()).max(1.0))
        .collect();

    loop {
        // Most violated constraint, scaled.
        let slack = cm * &u - d;
        let mut pick = None;
        let mut worst = 0.0;
        for i in 0..p {
            let v = slack[i] / row_scale[i];
            if v > VIOLATION_TOL && v > worst && !active.contains(&i) {
                worst = v;
                pick = Some(i);
            }
        }
        let Some(k) = pick else {
            break;
        };
        let n_k: DVector<f64> = -cm.row(k).transpose();
        let mut lambda_k = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::OutsideReachSet);
            }
            let s_k = n_k.dot(&u) + d[k];
            let (z, r) = directions(g_inv, cm, &active, &n_k);
            let z_scale = (g_inv * &n_k).amax().max(f64::MIN_POSITIVE);
            let primal_ok = z.amax() > 1e-12 * z_scale;

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, rj) in r.iter().enumerate() {
                if *rj > 0.0 {
                    let t = lambda[j] / rj;
                    if t < t1 {
                        t1 = t;
                        drop = Some(j);
                    }
                }
            }
            let t2 = if primal_ok {
                let curv = z.dot(&n_k);
                if curv > 0.0 {
                    -s_k / curv
                } else {
                    f64::INFINITY
                }
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::OutsideReachSet);
            }
            if primal_ok {
                u += &z * t;
            }
            for (lj, rj) in lambda.iter_mut().zip(r.iter()) {
                *lj -= t * rj;
            }
            lambda_k += t;
            if t2 <= t1 {
                active.push(k);
                lambda.push(lambda_k);
                break;
            }
            let j = drop.expect("finite t1 has an index");
            active.remove(j);
            lambda.remove(j);
        }
    }

    let mut multipliers = DVector::zeros(p);
    for (i, l) in active.iter().zip(&lambda) {
        multipliers[*i] = l.max(0.0);
    }
    Ok(QpSolution {
        u,
        multipliers,
        iterations,
    })
}

/// Solves the QP for positive definite `G`.
pub fn solve_qp(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    cm: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<QpSolution> {
    let g_inv = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("QP Hessian is not positive definite".into()))?
        .inverse();
    solve_qp_with_inverse(&g_inv, c, cm, d)
}

/// Primal direction `z = G⁻¹(I - N N*) n` and dual direction `r = N* n`
/// for the active normals `N` (columns `-C_i`).
fn directions(
    g_inv: &DMatrix<f64>,
    cm: &DMatrix<f64>,
    active: &[usize],
    n_k: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let gn = g_inv * n_k;
    if active.is_empty() {
        return (gn, DVector::zeros(0));
    }
    let m = g_inv.nrows();
    let mut nm = DMatrix::zeros(m, active.len());
    for (j, &i) in active.iter().enumerate() {
        nm.set_column(j, &(-cm.row(i).transpose()));
    }
    let gn_active = g_inv * &nm;
    let gram = nm.transpose() * &gn_active;
    let rhs = nm.transpose() * &gn;
    let r = gram
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DVector::zeros(active.len()));
    let z = gn - gn_active * &r;
    (z, r)
}
