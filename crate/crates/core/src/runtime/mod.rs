//! Online control and closed-loop evaluation.
//!
//! At run time the current state is mapped to its region, the policy picks a
//! target set, and a small QP finds the input that steers the nominal dynamics
//! closest to the target's representative point while staying in the target.

pub mod qp;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Partition, CONTAINMENT_TOL};
use crate::imdp::{Objective, PolicyTable};
use crate::model::{ActionTargets, NoiseSpec, ParametricLinearModel};

pub use qp::{kkt_residual, solve_qp, QpSolution};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Relative ridge added to a singular `B̂ᵀB̂`.
const RIDGE: f64 = 1e-9;

/// One QP per action, with everything that does not depend on the state
/// precomputed.
#[derive(Debug, Clone)]
pub struct Controller {
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    offset: DVector<f64>,
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    actions: Vec<ActionQp>,
}

#[derive(Debug, Clone)]
struct ActionQp {
    /// Control rows followed by target rows `H B̂`.
    cm: DMatrix<f64>,
    /// Constant part of the right-hand side.
    d0: DVector<f64>,
    /// State-dependent part: `d = d0 - dx * x`.
    dx: DMatrix<f64>,
    target: DVector<f64>,
    target_rows: usize,
}

/// Solution of the input QP, with the data needed to check it.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub solution: QpSolution,
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl Controller {
    pub fn new(model: &ParametricLinearModel, targets: &ActionTargets) -> Result<Self> {
        let (a_hat, b_hat) = model.nominal();
        let m = model.m();
        let mut g = b_hat.transpose() * b_hat;
        if g.clone().cholesky().is_none() {
            let ridge = RIDGE * g.trace().max(1.0);
            for i in 0..m {
                g[(i, i)] += ridge;
            }
        }
        let g_inv = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("input Hessian not invertible".into()))?
            .inverse();
        let offset = model.disturbance_center();
        let uh = model.control_hrep();
        let actions = (0..targets.len())
            .map(|l| {
                let th = targets.hrep(l);
                let (pu, pt) = (uh.num_halfspaces(), th.num_halfspaces());
                let mut cm = DMatrix::zeros(pu + pt, m);
                cm.rows_mut(0, pu).copy_from(uh.normals());
                cm.rows_mut(pu, pt).copy_from(&(th.normals() * b_hat));
                let mut d0 = DVector::zeros(pu + pt);
                d0.rows_mut(0, pu).copy_from(uh.offsets());
                d0.rows_mut(pu, pt)
                    .copy_from(&(th.offsets() - th.normals() * &offset));
                let mut dx = DMatrix::zeros(pu + pt, model.n());
                dx.rows_mut(pu, pt).copy_from(&(th.normals() * a_hat));
                ActionQp {
                    cm,
                    d0,
                    dx,
                    target: targets.representative(l).clone(),
                    target_rows: pt,
                }
            })
            .collect();
        Ok(Self {
            a_hat: a_hat.clone(),
            b_hat: b_hat.clone(),
            offset,
            g,
            g_inv,
            actions,
        })
    }

    /// Input minimizing `‖Âx + B̂u + q̄ - t̃‖` over admissible inputs that keep
    /// the nominal successor inside the target of `action`.
    pub fn input(&self, x: &DVector<f64>, action: usize) -> Result<DVector<f64>> {
        let qp = &self.actions[action];
        let c = self.b_hat.transpose() * (&self.a_hat * x + &self.offset - &qp.target);
        let d = &qp.d0 - &qp.dx * x;
        Ok(qp::solve_qp_with_inverse(&self.g_inv, &c, &qp.cm, &d)?.u)
    }

    /// Like [`input`](Self::input) but also returns multipliers and the QP data.
    pub fn solve(&self, x: &DVector<f64>, action: usize) -> Result<ControlSolution> {
        let qp = &self.actions[action];
        let c = self.b_hat.transpose() * (&self.a_hat * x + &self.offset - &qp.target);
        let d = &qp.d0 - &qp.dx * x;
        let solution = qp::solve_qp_with_inverse(&self.g_inv, &c, &qp.cm, &d)?;
        Ok(ControlSolution {
            solution,
            hessian: self.g.clone(),
            linear: c,
            constraints: qp.cm.clone(),
            rhs: d,
        })
    }

    /// Largest target-row violation of the nominal successor `Âx + B̂u + q̄`.
    pub fn target_violation(&self, x: &DVector<f64>, u: &DVector<f64>, action: usize) -> f64 {
        let qp = &self.actions[action];
        let rows = qp.cm.nrows();
        let start = rows - qp.target_rows;
        let slack = qp.cm.rows(start, qp.target_rows) * u + qp.dx.rows(start, qp.target_rows) * x
            - qp.d0.rows(start, qp.target_rows);
        slack.max()
    }
}

/// One-shot form of [`Controller::input`].
pub fn control_input(
    model: &ParametricLinearModel,
    targets: &ActionTargets,
    x: &DVector<f64>,
    action: usize,
) -> Result<DVector<f64>> {
    Controller::new(model, targets)?.input(x, action)
}

/// How a closed-loop run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedGoal { step: usize },
    LeftSafeSet { step: usize },
    HorizonExpired,
    NoEnabledAction { step: usize },
}

impl Outcome {
    fn label(&self) -> String {
        match self {
            Outcome::ReachedGoal { step } => format!("reached-goal@{step}"),
            Outcome::LeftSafeSet { step } => format!("left-safe-set@{step}"),
            Outcome::HorizonExpired => "horizon-expired".to_string(),
            Outcome::NoEnabledAction { step } => format!("no-enabled-action@{step}"),
        }
    }

    /// Whether the run satisfies `objective`.
    pub fn satisfies(&self, objective: Objective) -> bool {
        match objective {
            Objective::ReachAvoid => matches!(self, Outcome::ReachedGoal { .. }),
            Objective::Invariance => matches!(self, Outcome::HorizonExpired),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopTrace {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub outcome: Outcome,
}

impl ClosedLoopTrace {
    /// CSV with header `k,x0..,u0..,outcome`; the last row has empty inputs.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut out = String::from("k");
        for i in 0..n {
            write!(out, ",x{i}").expect("string write");
        }
        for i in 0..m {
            write!(out, ",u{i}").expect("string write");
        }
        out.push_str(",outcome\n");
        for (k, x) in self.states.iter().enumerate() {
            write!(out, "{k}").expect("string write");
            for v in x.iter() {
                write!(out, ",{v}").expect("string write");
            }
            match self.inputs.get(k) {
                Some(u) => {
                    for v in u.iter() {
                        write!(out, ",{v}").expect("string write");
                    }
                }
                None => out.push_str(&",".repeat(m)),
            }
            let last = k + 1 == self.states.len();
            writeln!(out, ",{}", if last { self.outcome.label() } else { String::new() })
                .expect("string write");
        }
        out
    }
}

/// The true system used in simulation: `x' = A x + B u + q + η`.
#[derive(Debug, Clone)]
pub struct TrueDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl TrueDynamics {
    /// Dynamics at a parameter in the simplex.
    pub fn at(model: &ParametricLinearModel, alpha: &DVector<f64>) -> Result<Self> {
        let (a, b) = model.combine(alpha)?;
        Ok(Self { a, b })
    }

    /// Dynamics at affine weights, possibly outside the simplex.
    pub fn extrapolated(model: &ParametricLinearModel, alpha: &DVector<f64>) -> Result<Self> {
        let (a, b) = model.combine_affine(alpha)?;
        Ok(Self { a, b })
    }
}

/// Everything needed to run the synthesized controller.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    pub model: &'a ParametricLinearModel,
    pub partition: &'a Partition,
    pub policy: &'a PolicyTable,
    pub controller: &'a Controller,
    pub objective: Objective,
}

impl ClosedLoop<'_> {
    /// Runs the controller from `x0` for the policy horizon. `disturbance(k)`
    /// supplies `q_k`; by default callers pass the center of the disturbance box.
    pub fn simulate(
        &self,
        dynamics: &TrueDynamics,
        x0: &DVector<f64>,
        noise: &mut crate::model::NoiseSource,
        disturbance: &dyn Fn(usize) -> Option<DVector<f64>>,
    ) -> Result<ClosedLoopTrace> {
        let mut states = vec![x0.clone()];
        let mut inputs = Vec::new();
        let horizon = self.policy.horizon();
        let mut x = x0.clone();
        for k in 0..=horizon {
            let s = self.partition.state_of(x.as_slice());
            if s == 0 || self.partition.unsafe_mask()[s - 1] {
                return Ok(finish(states, inputs, Outcome::LeftSafeSet { step: k }));
            }
            if self.objective == Objective::ReachAvoid && self.partition.goal_mask()[s - 1] {
                return Ok(finish(states, inputs, Outcome::ReachedGoal { step: k }));
            }
            if k == horizon {
                break;
            }
            let Some(action) = self.policy.action(s, k) else {
                return Ok(finish(states, inputs, Outcome::NoEnabledAction { step: k }));
            };
            let u = self.controller.input(&x, action)?;
            if self.controller.target_violation(&x, &u, action) > 1e3 * CONTAINMENT_TOL {
                return Err(Error::OutsideReachSet);
            }
            let eta = noise.next_sample();
            let q = disturbance(k);
            x = self
                .model
                .step_with(&dynamics.a, &dynamics.b, &x, &u, &eta, q.as_ref())?;
            inputs.push(u);
            states.push(x.clone());
        }
        Ok(finish(states, inputs, Outcome::HorizonExpired))
    }

    /// Default disturbance schedule: the center of the disturbance box, if any.
    pub fn centered_disturbance(&self) -> impl Fn(usize) -> Option<DVector<f64>> + '_ {
        let q = self
            .model
            .disturbance()
            .map(|b| DVector::from_vec(b.center()));
        move |_| q.clone()
    }

    /// Estimates the probability of satisfying the objective from `x0` with
    /// `trials` independent runs. Trial `i` draws its noise from stream `i` of
    /// the seed.
    pub fn monte_carlo(
        &self,
        dynamics: &TrueDynamics,
        x0: &DVector<f64>,
        trials: usize,
        seed: u64,
    ) -> Result<McEstimate> {
        if trials == 0 {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        let disturbance = self.centered_disturbance();
        let spec: &NoiseSpec = self.model.noise();
        let successes = (0..trials)
            .into_par_iter()
            .map(|i| -> Result<usize> {
                let mut noise = spec.source(seed, i as u64)?;
                let trace = self.simulate(dynamics, x0, &mut noise, &disturbance)?;
                Ok(usize::from(trace.outcome.satisfies(self.objective)))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Ok(McEstimate::new(successes, trials))
    }
}

fn finish(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>, outcome: Outcome) -> ClosedLoopTrace {
    ClosedLoopTrace {
        states,
        inputs,
        outcome,
    }
}

/// A binomial proportion with its 99% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl McEstimate {
    pub fn new(successes: usize, trials: usize) -> Self {
        let (lower, upper) = wilson_interval(successes, trials, Z_99);
        Self {
            successes,
            trials,
            estimate: successes as f64 / trials as f64,
            lower,
            upper,
        }
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lower, upper)
}

/// SplitMix64 finalizer, used to derive independent seeds from a root seed.
pub fn split_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of one row of the safety experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyRow {
    pub parameter: Vec<f64>,
    pub evaluated: usize,
    pub unsafe_states: Vec<usize>,
}

impl SafetyRow {
    pub fn safe_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            1.0
        } else {
            1.0 - self.unsafe_states.len() as f64 / self.evaluated as f64
        }
    }
}

/// For each `(parameters, dynamics)` pair and each region center whose bound
/// `λ` is positive, estimates the success probability and calls the state
/// unsafe if the 99% upper confidence limit falls below `λ`.
pub fn safety_fraction_experiment(
    closed_loop: &ClosedLoop<'_>,
    grid: &[(Vec<f64>, TrueDynamics)],
    trials: usize,
    seed: u64,
) -> Result<Vec<SafetyRow>> {
    let lambdas = closed_loop.policy.initial_values();
    let candidates: Vec<usize> = (1..lambdas.len()).filter(|&s| lambdas[s] > 0.0).collect();
    grid.iter()
        .map(|(parameter, dynamics)| {
            let verdicts: Vec<Option<usize>> = candidates
                .par_iter()
                .map(|&s| -> Result<Option<usize>> {
                    let x0 =
                        DVector::from_vec(closed_loop.partition.region_of_state(s).center());
                    let est =
                        closed_loop.monte_carlo(dynamics, &x0, trials, split_seed(seed, s as u64))?;
                    Ok((est.upper < lambdas[s]).then_some(s))
                })
                .collect::<Result<_>>()?;
            Ok(SafetyRow {
                parameter: parameter.clone(),
                evaluated: candidates.len(),
                unsafe_states: verdicts.into_iter().flatten().collect(),
            })
        })
        .collect()
}

/// CSV `<names>,evaluated,unsafe,safe_fraction`, one column per parameter name.
pub fn safety_table_csv(names: &[&str], rows: &[SafetyRow]) -> String {
    let mut out = names.join(",");
    out.push_str(",evaluated,unsafe,safe_fraction\n");
    for r in rows {
        for p in &r.parameter {
            write!(out, "{p},").expect("string write");
        }
        writeln!(
            out,
            "{},{},{}",
            r.evaluated,
            r.unsafe_states.len(),
            r.safe_fraction()
        )
        .expect("string write");
    }
    out
}
