#![allow(dead_code)]

pub mod lp;

use imdp_synth::geometry::{HPolytope, HyperRectangle, VPolytope};
use imdp_synth::imdp::{Choice, IntervalMdp, Objective, Transition};
use imdp_synth::model::ParametricLinearModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random intervals around a random distribution over `k` successors,
/// guaranteed to contain it.
pub fn random_intervals(rng: &mut impl Rng, k: usize) -> Vec<(f64, f64)> {
    let mut p: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p.iter()
        .map(|&x| {
            let lo = if rng.random_bool(0.3) {
                0.0
            } else {
                (x - rng.random::<f64>() * 0.3).max(0.0)
            };
            let hi = (x + rng.random::<f64>() * 0.3).min(1.0);
            (lo, hi)
        })
        .collect()
}

/// Random interval MDP: state 0 failure, optionally one goal state.
pub fn random_imdp(rng: &mut impl Rng, states: usize, actions: usize, horizon: usize) -> IntervalMdp {
    let objective = if rng.random_bool(0.5) {
        Objective::ReachAvoid
    } else {
        Objective::Invariance
    };
    let mut goal = vec![false; states];
    if objective == Objective::ReachAvoid && states > 2 {
        goal[states - 1] = true;
    }
    let failure = vec![false; states];
    let mut choices = Vec::with_capacity(states);
    for s in 0..states {
        if s == 0 || goal[s] {
            choices.push(Vec::new());
            continue;
        }
        let mut list = Vec::new();
        for a in 0..actions {
            if rng.random_bool(0.25) {
                continue;
            }
            let succ: Vec<usize> = (0..states).filter(|_| rng.random_bool(0.7)).collect();
            let succ = if succ.is_empty() { vec![0] } else { succ };
            let iv = random_intervals(rng, succ.len());
            list.push(Choice {
                action: a,
                transitions: succ
                    .iter()
                    .zip(iv)
                    .map(|(&j, (lower, upper))| Transition {
                        successor: j,
                        lower,
                        upper,
                    })
                    .collect(),
            });
        }
        choices.push(list);
    }
    IntervalMdp::new(horizon, objective, goal, failure, choices).expect("valid random model")
}

/// Random Schur-stable parametric system with `r` vertices.
pub fn random_stable_model(rng: &mut impl Rng, n: usize, m: usize, r: usize) -> ParametricLinearModel {
    loop {
        let base = DMatrix::from_fn(n, n, |i, j| {
            let v: f64 = rng.random_range(-0.4..0.4);
            if i == j {
                v + 0.5
            } else {
                v
            }
        });
        let a_list: Vec<DMatrix<f64>> = (0..r)
            .map(|_| &base + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.05..0.05)))
            .collect();
        let b_base = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let b_list: Vec<DMatrix<f64>> = (0..r)
            .map(|_| &b_base + DMatrix::from_fn(n, m, |_, _| rng.random_range(-0.05..0.05)))
            .collect();
        let stable = a_list.iter().all(|a| {
            a.clone()
                .complex_eigenvalues()
                .iter()
                .all(|e| e.norm() < 0.95)
        });
        if !stable {
            continue;
        }
        let control = HyperRectangle::new(vec![-1.0; m], vec![1.0; m])
            .unwrap()
            .to_vpolytope();
        let alpha = DVector::from_element(r, 1.0 / r as f64);
        if let Ok(model) = ParametricLinearModel::new(a_list, b_list, alpha, control) {
            return model;
        }
    }
}

/// Random box inside `[-scale, scale]^n` with widths in `[0.1, 1] * scale`.
pub fn random_box(rng: &mut impl Rng, n: usize, scale: f64) -> HyperRectangle {
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let w = rng.random_range(0.1..1.0) * scale;
        let lo = rng.random_range(-scale..scale - w);
        lower.push(lo);
        upper.push(lo + w);
    }
    HyperRectangle::new(lower, upper).unwrap()
}

/// Uniform point in a box.
pub fn point_in(rng: &mut impl Rng, b: &HyperRectangle) -> DVector<f64> {
    DVector::from_iterator(
        b.dim(),
        (0..b.dim()).map(|d| {
            let (lo, hi) = (b.lower()[d], b.upper()[d]);
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        }),
    )
}

/// Whether some input of the control polytope sends `x` into `target`
/// under the nominal dynamics, decided by an LP over convex weights of the
/// input vertices.
pub fn exists_input_into(
    model: &ParametricLinearModel,
    x: &DVector<f64>,
    target: &HPolytope,
    slack: f64,
) -> bool {
    let (a_hat, b_hat) = model.nominal();
    let offset = model.disturbance_center();
    let inputs = model.control_set().vertices();
    let drift = a_hat * x + offset;
    // H (drift + B Σ w_k u_k) <= h  ⇔  Σ w_k (H B u_k) <= h - H drift
    let hm = target.normals();
    let rows = hm.nrows();
    let mut a_ub = DMatrix::zeros(rows, inputs.len());
    for (k, u) in inputs.iter().enumerate() {
        a_ub.set_column(k, &(hm * (b_hat * u)));
    }
    let b_ub = target.offsets() - hm * drift + DVector::from_element(rows, slack);
    let a_eq = DMatrix::from_element(1, inputs.len(), 1.0);
    let b_eq = DVector::from_element(1, 1.0);
    lp::feasible(&a_ub, &b_ub, &a_eq, &b_eq)
}

/// Whether `x` lies in the convex hull of `poly`'s vertices up to `slack`.
pub fn in_hull(poly: &VPolytope, x: &DVector<f64>, slack: f64) -> bool {
    let v = poly.vertices();
    let n = x.len();
    // -slack <= Σ w_k v_k - x <= slack, Σ w = 1, w >= 0
    let mut a_ub = DMatrix::zeros(2 * n, v.len());
    let mut b_ub = DVector::zeros(2 * n);
    for (k, p) in v.iter().enumerate() {
        for d in 0..n {
            a_ub[(d, k)] = p[d];
            a_ub[(n + d, k)] = -p[d];
        }
    }
    for d in 0..n {
        b_ub[d] = x[d] + slack;
        b_ub[n + d] = -x[d] + slack;
    }
    let a_eq = DMatrix::from_element(1, v.len(), 1.0);
    let b_eq = DVector::from_element(1, 1.0);
    lp::feasible(&a_ub, &b_ub, &a_eq, &b_eq)
}

/// Minimum of `Σ p_j v_j` over `lower ≤ p ≤ upper`, `Σ p = 1`, by LP.
pub fn worst_case_lp(entries: &[(f64, f64, f64)]) -> Option<f64> {
    let k = entries.len();
    // p = lower + y, 0 <= y <= upper - lower, Σ y = 1 - Σ lower
    let base: f64 = entries.iter().map(|e| e.0 * e.2).sum();
    let c = DVector::from_iterator(k, entries.iter().map(|e| e.2));
    let a_ub = DMatrix::identity(k, k);
    let b_ub = DVector::from_iterator(k, entries.iter().map(|e| (e.1 - e.0).max(0.0)));
    let a_eq = DMatrix::from_element(1, k, 1.0);
    let b_eq = DVector::from_element(1, 1.0 - entries.iter().map(|e| e.0).sum::<f64>());
    match lp::minimize(&c, &a_ub, &b_ub, &a_eq, &b_eq) {
        lp::Outcome::Optimal { value, .. } => Some(base + value),
        _ => None,
    }
}

/// Reference robust value iteration using the LP for every inner problem.
/// Returns `values[k][s]`.
pub fn robust_values_lp(imdp: &IntervalMdp) -> Vec<Vec<f64>> {
    let s_count = imdp.num_states();
    let horizon = imdp.horizon();
    let terminal = |s: usize| -> f64 {
        if imdp.is_goal(s) {
            1.0
        } else if imdp.is_failure(s) {
            0.0
        } else if imdp.objective() == Objective::Invariance {
            1.0
        } else {
            0.0
        }
    };
    let mut values = vec![vec![0.0; s_count]; horizon + 1];
    values[horizon] = (0..s_count).map(terminal).collect();
    for k in (0..horizon).rev() {
        for s in 0..s_count {
            values[k][s] = if imdp.is_goal(s) {
                1.0
            } else if imdp.is_failure(s) {
                0.0
            } else {
                imdp.choices(s)
                    .map(|(_, trans)| {
                        let entries: Vec<(f64, f64, f64)> = trans
                            .iter()
                            .map(|t| (t.lower, t.upper, values[k + 1][t.successor]))
                            .collect();
                        worst_case_lp(&entries).expect("feasible intervals")
                    })
                    .fold(0.0, f64::max)
            };
        }
    }
    values
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function by the Chebyshev-fitted exponential form
/// (Numerical Recipes `erfcc`), fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Random point of the simplex of dimension `r`.
pub fn simplex_point(rng: &mut impl Rng, r: usize) -> DVector<f64> {
    let w: Vec<f64> = (0..r).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = w.iter().sum();
    DVector::from_iterator(r, w.into_iter().map(|x| x / s))
}

/// Random convex combination of the vertices of `poly`.
pub fn point_in_hull(rng: &mut impl Rng, poly: &VPolytope) -> DVector<f64> {
    let w = simplex_point(rng, poly.vertices().len());
    poly.vertices()
        .iter()
        .zip(w.iter())
        .fold(DVector::zeros(poly.dim()), |acc, (v, wi)| acc + v * *wi)
}

/// Both directions of the backward-reach characterization for one target box:
/// sampled hull points admit an input into the target (LP), and states found
/// by rejection sampling to admit an input lie in the hull. Returns the number
/// of completeness samples that hit the target.
pub fn check_backward_reach(
    model: &ParametricLinearModel,
    target: &HyperRectangle,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<usize, String> {
    let reach = model.backward_reach_set(&target.to_vpolytope()).map_err(|e| e.to_string())?;
    let t_h = target.to_hpolytope();
    for _ in 0..samples {
        let x = point_in_hull(rng, &reach);
        if !exists_input_into(model, &x, &t_h, 1e-7) {
            return Err(format!("hull point {x} has no input into the target"));
        }
    }
    let (a_hat, b_hat) = model.nominal();
    let offset = model.disturbance_center();
    let bbox = reach.bounding_box();
    let pad: Vec<f64> = bbox.widths().iter().map(|w| 0.5 * w + 1e-3).collect();
    let search = HyperRectangle::new(
        bbox.lower().iter().zip(&pad).map(|(l, p)| l - p).collect(),
        bbox.upper().iter().zip(&pad).map(|(u, p)| u + p).collect(),
    )
    .unwrap();
    let inputs = model.control_set();
    let mut hits = 0;
    for _ in 0..samples * 20 {
        let x = point_in(rng, &search);
        let u = point_in_hull(rng, inputs);
        let y = a_hat * &x + b_hat * u + &offset;
        if target.contains_point(y.as_slice()) {
            hits += 1;
            if !in_hull(&reach, &x, 1e-7) {
                return Err(format!("state {x} reaches the target but is outside the hull"));
            }
        }
    }
    Ok(hits)
}

/// Sampled epistemic errors over `region` lie in the error hull and its box.
pub fn check_error_hull(
    model: &ParametricLinearModel,
    region: &HyperRectangle,
    rng: &mut impl Rng,
    samples: usize,
) -> Result<(), String> {
    let hull = model.epistemic_error_hull(region).map_err(|e| e.to_string())?;
    let bx = model.epistemic_error_box(region).map_err(|e| e.to_string())?;
    let (a_hat, b_hat) = model.nominal();
    let center = model.disturbance_center();
    let inputs = model.control_set();
    for _ in 0..samples {
        let alpha = simplex_point(rng, model.r());
        let (a, b) = model.combine(&alpha).map_err(|e| e.to_string())?;
        let x = point_in(rng, region);
        let u = point_in_hull(rng, inputs);
        let mut delta = (&a - a_hat) * &x + (&b - b_hat) * &u;
        if let Some(q) = model.disturbance() {
            delta += point_in(rng, q) - &center;
        }
        if !in_hull(&hull, &delta, 1e-8) {
            return Err(format!("error {delta} outside the hull"));
        }
        let tol = 1e-9 * (1.0 + delta.amax());
        let in_box = (0..delta.len())
            .all(|d| bx.lower()[d] - tol <= delta[d] && delta[d] <= bx.upper()[d] + tol);
        if !in_box {
            return Err(format!("error {delta} outside the bounding box"));
        }
    }
    Ok(())
}
