//! From a parametric model and a partition to an interval MDP.
//!
//! Actions are target sets. An action is enabled in a region when the whole
//! region lies in the nominal backward reachable set of its target. For every
//! enabled pair the successor states are boxes: target plus epistemic error
//! plus one noise sample. Counting how many of those boxes sit inside or touch
//! each region gives the PAC intervals.

use std::collections::HashMap;

use log::{debug, info, warn};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    box_relation, polytope_contains_box, vhull_to_hrep, BoxRelation, HPolytope, HyperRectangle,
    Partition, MAX_HULL_DIM,
};
use crate::imdp::{Choice, IntervalMdp, Objective, Transition};
use crate::model::{ActionTargets, ParametricLinearModel};
use crate::pac::{ConfidenceLedger, IntervalTable};

/// States, enabled actions and reach sets of an abstraction.
#[derive(Debug, Clone)]
pub struct AbstractStructure {
    partition: Partition,
    enabled: Vec<Vec<usize>>,
    reach_hulls: Vec<Option<HPolytope>>,
    enabled_pairs: usize,
}

impl AbstractStructure {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Number of abstract states, `L + 1`.
    pub fn num_states(&self) -> usize {
        self.partition.len() + 1
    }

    /// Enabled actions of state `s`, ascending. Always empty for `s = 0`.
    pub fn enabled(&self, s: usize) -> &[usize] {
        &self.enabled[s]
    }

    pub fn is_enabled(&self, s: usize, action: usize) -> bool {
        self.enabled[s].binary_search(&action).is_ok()
    }

    /// Halfspace form of the backward reachable set of each action, `None`
    /// when it was degenerate.
    pub fn reach_hull(&self, action: usize) -> Option<&HPolytope> {
        self.reach_hulls[action].as_ref()
    }

    pub fn enabled_pairs(&self) -> usize {
        self.enabled_pairs
    }

    pub fn goal_states(&self) -> Vec<usize> {
        self.partition
            .goal_mask()
            .iter()
            .enumerate()
            .filter(|(_, g)| **g)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Computes enabled actions: action `l` is enabled in state `i` iff region
/// `i` lies inside the backward reachable set of target `l`. Unsafe regions
/// get no actions.
pub fn build_structure(
    model: &ParametricLinearModel,
    partition: &Partition,
    targets: &ActionTargets,
) -> Result<AbstractStructure> {
    if partition.dim() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: partition.dim(),
        });
    }
    let per_action: Vec<(Option<HPolytope>, Vec<usize>)> = (0..targets.len())
        .into_par_iter()
        .map(|l| -> Result<(Option<HPolytope>, Vec<usize>)> {
            let target = targets.target(l);
            if target.dim() != model.n() {
                return Err(Error::DimensionMismatch {
                    expected: model.n(),
                    got: target.dim(),
                });
            }
            let reach = model.backward_reach_set(target)?;
            let hull = match vhull_to_hrep(&reach) {
                Ok(h) => h,
                Err(e @ (Error::DegenerateHull { .. } | Error::HullTooLarge(_))) => {
                    warn!("action {l}: backward reachable set unusable ({e}); never enabled");
                    return Ok((None, Vec::new()));
                }
                Err(e) => return Err(e),
            };
            let bbox = reach.bounding_box();
            let mut states = Vec::new();
            partition.for_each_overlap(&bbox, |s, _| {
                let region = partition.region_of_state(s);
                if partition.unsafe_mask()[s - 1]
                    || box_relation(region, &bbox) != BoxRelation::Contained
                {
                    return;
                }
                if polytope_contains_box(&hull, region).unwrap_or(false) {
                    states.push(s);
                }
            });
            Ok((Some(hull), states))
        })
        .collect::<Result<_>>()?;

    let mut enabled = vec![Vec::new(); partition.len() + 1];
    let mut reach_hulls = Vec::with_capacity(per_action.len());
    let mut enabled_pairs = 0;
    for (l, (hull, states)) in per_action.into_iter().enumerate() {
        reach_hulls.push(hull);
        enabled_pairs += states.len();
        for s in states {
            enabled[s].push(l);
        }
    }
    info!(
        "structure: {} states, {} actions, {enabled_pairs} enabled pairs",
        partition.len() + 1,
        targets.len()
    );
    Ok(AbstractStructure {
        partition: partition.clone(),
        enabled,
        reach_hulls,
        enabled_pairs,
    })
}

/// A box of noise values standing for `multiplicity` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedSample {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub multiplicity: usize,
}

/// Greedy merging: take the lowest-index unmerged sample, absorb every
/// unmerged sample within Euclidean distance `rho` of it and enclose them in
/// one box. `rho = 0` keeps every sample on its own.
pub fn merge_samples(samples: &[DVector<f64>], rho: f64) -> Result<Vec<MergedSample>> {
    let Some(first) = samples.first() else {
        return Err(Error::NoPoints);
    };
    let n = first.len();
    if n > MAX_HULL_DIM {
        return Err(Error::DimensionTooLarge {
            dim: n,
            max: MAX_HULL_DIM,
        });
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("merge radius {rho} is invalid")));
    }
    if rho == 0.0 {
        return Ok(samples
            .iter()
            .map(|s| MergedSample {
                lower: s.iter().copied().collect(),
                upper: s.iter().copied().collect(),
                multiplicity: 1,
            })
            .collect());
    }

    type Key = [i64; MAX_HULL_DIM];
    let key_of = |s: &DVector<f64>| -> Key {
        let mut k = [0i64; MAX_HULL_DIM];
        for d in 0..n {
            k[d] = (s[d] / rho).floor() as i64;
        }
        k
    };
    let mut buckets: HashMap<Key, Vec<usize>> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        buckets.entry(key_of(s)).or_default().push(i);
    }
    let offsets: Vec<Key> = (0..3usize.pow(n as u32))
        .map(|mut code| {
            let mut k = [0i64; MAX_HULL_DIM];
            for slot in k.iter_mut().take(n) {
                *slot = (code % 3) as i64 - 1;
                code /= 3;
            }
            k
        })
        .collect();

    let rho2 = rho * rho;
    let mut merged = vec![false; samples.len()];
    let mut out = Vec::new();
    let mut members = Vec::new();
    for (i, pivot) in samples.iter().enumerate() {
        if merged[i] {
            continue;
        }
        let base = key_of(pivot);
        members.clear();
        for off in &offsets {
            let mut k = base;
            for d in 0..n {
                k[d] += off[d];
            }
            if let Some(bucket) = buckets.get(&k) {
                for &j in bucket {
                    if !merged[j] && (&samples[j] - pivot).norm_squared() <= rho2 {
                        members.push(j);
                    }
                }
            }
        }
        let mut lower: Vec<f64> = pivot.iter().copied().collect();
        let mut upper = lower.clone();
        for &j in &members {
            merged[j] = true;
            for d in 0..n {
                lower[d] = lower[d].min(samples[j][d]);
                upper[d] = upper[d].max(samples[j][d]);
            }
        }
        merged[i] = true;
        out.push(MergedSample {
            lower,
            upper,
            multiplicity: members.len().max(1),
        });
    }
    Ok(out)
}

/// Successor boxes of one (state, action) pair with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorCloud {
    pub boxes: Vec<HyperRectangle>,
    pub multiplicities: Vec<usize>,
    pub total_weight: usize,
    pub origin: (usize, usize),
}

/// The noise-free part of every successor box of `(state, action)`: the
/// target's bounding box plus the bounding box of the epistemic error.
pub fn successor_base_box(
    model: &ParametricLinearModel,
    partition: &Partition,
    targets: &ActionTargets,
    state: usize,
    action: usize,
) -> Result<HyperRectangle> {
    let delta = model.epistemic_error_box(partition.region_of_state(state))?;
    targets.bounding_box(action).minkowski_sum(&delta)
}

/// The successor cloud of `(state, action)` for a batch of noise samples.
pub fn successor_cloud(
    structure: &AbstractStructure,
    model: &ParametricLinearModel,
    targets: &ActionTargets,
    state: usize,
    action: usize,
    samples: &[DVector<f64>],
    rho: f64,
) -> Result<SuccessorCloud> {
    if state == 0 || !structure.is_enabled(state, action) {
        return Err(Error::InvalidArgument(format!(
            "action {action} is not enabled in state {state}"
        )));
    }
    let base = successor_base_box(model, structure.partition(), targets, state, action)?;
    let merged = merge_samples(samples, rho)?;
    Ok(cloud_from_merged(&base, &merged, (state, action)))
}

fn cloud_from_merged(
    base: &HyperRectangle,
    merged: &[MergedSample],
    origin: (usize, usize),
) -> SuccessorCloud {
    let boxes = merged
        .iter()
        .map(|m| shifted(base, m))
        .collect();
    let multiplicities: Vec<usize> = merged.iter().map(|m| m.multiplicity).collect();
    SuccessorCloud {
        boxes,
        total_weight: multiplicities.iter().sum(),
        multiplicities,
        origin,
    }
}

fn shifted(base: &HyperRectangle, m: &MergedSample) -> HyperRectangle {
    HyperRectangle::new_unchecked(
        base.lower.iter().zip(&m.lower).map(|(a, b)| a + b).collect(),
        base.upper.iter().zip(&m.upper).map(|(a, b)| a + b).collect(),
    )
}

/// `(R, R̃)`: weight of boxes inside `region` and weight of boxes meeting it.
pub fn count_samples(cloud: &SuccessorCloud, region: &HyperRectangle) -> (usize, usize) {
    let mut r = 0;
    let mut r_tilde = 0;
    for (b, w) in cloud.boxes.iter().zip(&cloud.multiplicities) {
        match box_relation(b, region) {
            BoxRelation::Contained => {
                r += w;
                r_tilde += w;
            }
            BoxRelation::Intersects => r_tilde += w,
            BoxRelation::Disjoint => {}
        }
    }
    (r, r_tilde)
}

/// Counts for the absorbing state: weight of boxes entirely outside the
/// domain, and weight of boxes not entirely inside it.
pub fn absorbing_counts(cloud: &SuccessorCloud, partition: &Partition) -> (usize, usize) {
    let mut r = 0;
    let mut r_tilde = 0;
    for (b, w) in cloud.boxes.iter().zip(&cloud.multiplicities) {
        match box_relation(b, partition.domain()) {
            BoxRelation::Contained => {}
            BoxRelation::Intersects => r_tilde += w,
            BoxRelation::Disjoint => {
                r += w;
                r_tilde += w;
            }
        }
    }
    (r, r_tilde)
}

/// Counts of one successor state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuccessorCount {
    pub successor: usize,
    pub r: usize,
    pub r_tilde: usize,
}

/// Counts against every state, including the absorbing state 0, listing only
/// successors with `R̃ > 0`, sorted by successor.
pub fn count_successors(cloud: &SuccessorCloud, partition: &Partition) -> Vec<SuccessorCount> {
    let mut scratch = CountScratch::new(partition.len() + 1);
    for (b, w) in cloud.boxes.iter().zip(&cloud.multiplicities) {
        scratch.add_box(partition, b, *w);
    }
    scratch.drain()
}

/// Dense accumulator reused across clouds of the same partition.
struct CountScratch {
    r: Vec<usize>,
    r_tilde: Vec<usize>,
    touched: Vec<usize>,
}

impl CountScratch {
    fn new(states: usize) -> Self {
        Self {
            r: vec![0; states],
            r_tilde: vec![0; states],
            touched: Vec::new(),
        }
    }

    fn add_box(&mut self, partition: &Partition, b: &HyperRectangle, w: usize) {
        match box_relation(b, partition.domain()) {
            BoxRelation::Contained => {}
            rel => {
                if self.r_tilde[0] == 0 {
                    self.touched.push(0);
                }
                self.r_tilde[0] += w;
                if rel == BoxRelation::Disjoint {
                    self.r[0] += w;
                    return;
                }
            }
        }
        partition.for_each_overlap(b, |s, contained| {
            if self.r_tilde[s] == 0 {
                self.touched.push(s);
            }
            self.r_tilde[s] += w;
            if contained {
                self.r[s] += w;
            }
        });
    }

    fn drain(&mut self) -> Vec<SuccessorCount> {
        self.touched.sort_unstable();
        let out = self
            .touched
            .iter()
            .map(|&s| SuccessorCount {
                successor: s,
                r: self.r[s],
                r_tilde: self.r_tilde[s],
            })
            .collect();
        for &s in &self.touched {
            self.r[s] = 0;
            self.r_tilde[s] = 0;
        }
        self.touched.clear();
        out
    }
}

/// Knobs of the abstraction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractionParams {
    /// Noise samples per action.
    pub samples: usize,
    pub merge_radius: f64,
    /// Desired confidence that every interval is correct.
    pub confidence: f64,
    pub seed: u64,
    pub objective: Objective,
}

/// Counts of one enabled (state, action) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    pub state: usize,
    pub action: usize,
    pub successors: Vec<SuccessorCount>,
}

/// Everything produced by [`abstract_model`].
#[derive(Debug, Clone)]
pub struct Abstraction {
    pub structure: AbstractStructure,
    pub ledger: ConfidenceLedger,
    pub imdp: IntervalMdp,
    /// Mean number of merged boxes per action batch.
    pub mean_merged_boxes: f64,
    /// Intervals whose raw bounds crossed and had to be widened.
    pub widened_intervals: usize,
}

/// Samples, counts and converts to intervals in two passes: the first
/// counts samples for every enabled pair, which fixes the number of stored
/// intervals and thereby the per-interval confidence; the second turns counts
/// into intervals.
///
/// Each action gets its own batch of noise samples (stream `action` of the
/// seed), shared by all states it is enabled in.
pub fn abstract_model(
    model: &ParametricLinearModel,
    partition: &Partition,
    targets: &ActionTargets,
    params: &AbstractionParams,
) -> Result<Abstraction> {
    if params.samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let structure = build_structure(model, partition, targets)?;
    let active = |s: usize| -> bool {
        s > 0
            && !partition.unsafe_mask()[s - 1]
            && !(params.objective == Objective::ReachAvoid && partition.goal_mask()[s - 1])
    };

    let deltas: Vec<HyperRectangle> = partition
        .regions()
        .par_iter()
        .map(|r| model.epistemic_error_box(r))
        .collect::<Result<_>>()?;

    let mut states_of_action = vec![Vec::new(); targets.len()];
    for s in 1..structure.num_states() {
        if active(s) {
            for &l in structure.enabled(s) {
                states_of_action[l].push(s);
            }
        }
    }

    // Pass 1: counts.
    let per_action: Vec<(Vec<PairCounts>, usize)> = states_of_action
        .par_iter()
        .enumerate()
        .filter(|(_, states)| !states.is_empty())
        .map(|(l, states)| -> Result<(Vec<PairCounts>, usize)> {
            let samples = model
                .noise()
                .source(params.seed, l as u64)?
                .draw(params.samples);
            let merged = merge_samples(&samples, params.merge_radius)?;
            let target_box = targets.bounding_box(l);
            let mut scratch = CountScratch::new(partition.len() + 1);
            let mut out = Vec::with_capacity(states.len());
            let mut b = target_box.clone();
            for &s in states {
                let base = target_box.minkowski_sum(&deltas[s - 1])?;
                for m in &merged {
                    for d in 0..base.dim() {
                        b.lower[d] = base.lower[d] + m.lower[d];
                        b.upper[d] = base.upper[d] + m.upper[d];
                    }
                    scratch.add_box(partition, &b, m.multiplicity);
                }
                out.push(PairCounts {
                    state: s,
                    action: l,
                    successors: scratch.drain(),
                });
            }
            Ok((out, merged.len()))
        })
        .collect::<Result<_>>()?;

    let batches = per_action.len().max(1);
    let mean_merged_boxes =
        per_action.iter().map(|(_, m)| *m as f64).sum::<f64>() / batches as f64;
    let mut pairs: Vec<PairCounts> = per_action.into_iter().flat_map(|(p, _)| p).collect();
    pairs.sort_by_key(|p| (p.state, p.action));

    let interval_count: usize = pairs.iter().map(|p| p.successors.len()).sum();
    let ledger = ConfidenceLedger::new(params.confidence, interval_count)?;
    debug!(
        "ledger: {interval_count} intervals, beta = {:e}",
        ledger.per_interval_beta
    );

    // Pass 2: intervals.
    let table = IntervalTable::new(params.samples, ledger.per_interval_beta)?;
    let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); structure.num_states()];
    let built: Vec<(usize, Choice, usize)> = pairs
        .par_iter()
        .map(|p| -> Result<(usize, Choice, usize)> {
            let mut widened = 0;
            let transitions = p
                .successors
                .iter()
                .map(|c| {
                    let iv = table.interval(c.r, c.r_tilde)?;
                    widened += usize::from(iv.widened);
                    Ok(Transition {
                        successor: c.successor,
                        lower: iv.lower,
                        upper: iv.upper,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((
                p.state,
                Choice {
                    action: p.action,
                    transitions,
                },
                widened,
            ))
        })
        .collect::<Result<_>>()?;
    let mut widened_intervals = 0;
    for (s, c, w) in built {
        widened_intervals += w;
        choices[s].push(c);
    }

    let goal: Vec<bool> = std::iter::once(false)
        .chain(
            partition
                .goal_mask()
                .iter()
                .map(|g| *g && params.objective == Objective::ReachAvoid),
        )
        .collect();
    let failure: Vec<bool> = std::iter::once(true)
        .chain(partition.unsafe_mask().iter().copied())
        .collect();
    let imdp = IntervalMdp::new(model.horizon(), params.objective, goal, failure, choices)?;
    info!(
        "abstraction: {} states, {} choices, {} transitions, {:.1} merged boxes per batch",
        imdp.num_states(),
        imdp.num_choices(),
        imdp.num_transitions(),
        mean_merged_boxes
    );
    Ok(Abstraction {
        structure,
        ledger,
        imdp,
        mean_merged_boxes,
        widened_intervals,
    })
}
