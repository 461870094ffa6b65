//! Interval MDPs, robust value iteration and export.
//!
//! State 0 is the absorbing failure state. Goal states are absorbing with
//! value one, failure states with value zero. Only transitions with a
//! positive upper bound are stored.

use std::fmt::Write as _;
use std::io::{self, BufRead};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Slack allowed when checking that an interval set admits a distribution.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// What the values measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Reach a goal state within the horizon without failing first.
    #[default]
    ReachAvoid,
    /// Avoid failure states for the whole horizon.
    Invariance,
}

impl Objective {
    fn as_str(self) -> &'static str {
        match self {
            Objective::ReachAvoid => "reach-avoid",
            Objective::Invariance => "invariance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub successor: usize,
    pub lower: f64,
    pub upper: f64,
}

/// The interval transitions of one enabled action.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMdp {
    horizon: usize,
    objective: Objective,
    goal: Vec<bool>,
    failure: Vec<bool>,
    state_offsets: Vec<usize>,
    choice_actions: Vec<usize>,
    choice_offsets: Vec<usize>,
    transitions: Vec<Transition>,
}

impl IntervalMdp {
    /// `choices[s]` lists the enabled actions of state `s`, sorted by action
    /// index. State 0 is forced to be a failure state; goal and failure states
    /// must have no choices. Transitions are stored sorted by successor.
    pub fn new(
        horizon: usize,
        objective: Objective,
        goal: Vec<bool>,
        mut failure: Vec<bool>,
        choices: Vec<Vec<Choice>>,
    ) -> Result<Self> {
        let s_count = choices.len();
        if s_count == 0 || goal.len() != s_count || failure.len() != s_count {
            return Err(Error::DimensionMismatch {
                expected: s_count,
                got: goal.len().min(failure.len()),
            });
        }
        failure[0] = true;
        let mut state_offsets = Vec::with_capacity(s_count + 1);
        let mut choice_actions = Vec::new();
        let mut choice_offsets = vec![0];
        let mut transitions = Vec::new();
        state_offsets.push(0);
        for (s, list) in choices.into_iter().enumerate() {
            if goal[s] && failure[s] {
                return Err(Error::InvalidArgument(format!(
                    "state {s} is both goal and failure"
                )));
            }
            if (goal[s] || failure[s]) && !list.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "absorbing state {s} has enabled actions"
                )));
            }
            let mut last = None;
            for c in list {
                if last.is_some_and(|a| a >= c.action) {
                    return Err(Error::InvalidArgument(format!(
                        "actions of state {s} are not strictly increasing"
                    )));
                }
                last = Some(c.action);
                let mut c = c;
                c.transitions.sort_by_key(|t| t.successor);
                if c.transitions.windows(2).any(|w| w[0].successor == w[1].successor) {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate successor at state {s}, action {}",
                        c.action
                    )));
                }
                validate_choice(s, &c, s_count)?;
                choice_actions.push(c.action);
                transitions.extend(c.transitions);
                choice_offsets.push(transitions.len());
            }
            state_offsets.push(choice_actions.len());
        }
        Ok(Self {
            horizon,
            objective,
            goal,
            failure,
            state_offsets,
            choice_actions,
            choice_offsets,
            transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.goal.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    pub fn is_failure(&self, s: usize) -> bool {
        self.failure[s]
    }

    pub fn num_choices(&self) -> usize {
        self.choice_actions.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Enabled actions of `s` with their transitions.
    pub fn choices(&self, s: usize) -> impl Iterator<Item = (usize, &[Transition])> + '_ {
        (self.state_offsets[s]..self.state_offsets[s + 1]).map(move |c| {
            (
                self.choice_actions[c],
                &self.transitions[self.choice_offsets[c]..self.choice_offsets[c + 1]],
            )
        })
    }

    pub fn transitions_of(&self, s: usize, action: usize) -> Option<&[Transition]> {
        self.choices(s).find(|(a, _)| *a == action).map(|(_, t)| t)
    }

    fn terminal_value(&self, s: usize) -> f64 {
        match self.objective {
            Objective::ReachAvoid => f64::from(u8::from(self.goal[s])),
            Objective::Invariance => f64::from(u8::from(!self.failure[s])),
        }
    }

    fn absorbing_value(&self, s: usize) -> Option<f64> {
        if self.goal[s] {
            Some(1.0)
        } else if self.failure[s] {
            Some(0.0)
        } else {
            None
        }
    }

    /// Same model with a different horizon.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

fn validate_choice(s: usize, c: &Choice, s_count: usize) -> Result<()> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for t in &c.transitions {
        if t.successor >= s_count {
            return Err(Error::InvalidArgument(format!(
                "successor {} of state {s} out of range",
                t.successor
            )));
        }
        if !(0.0 <= t.lower && t.lower <= t.upper && t.upper <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid interval [{}, {}] at state {s}, action {}",
                t.lower, t.upper, c.action
            )));
        }
        lo += t.lower;
        hi += t.upper;
    }
    if lo > 1.0 + FEASIBILITY_TOL || hi < 1.0 - FEASIBILITY_TOL {
        return Err(Error::EmptyAmbiguitySet);
    }
    Ok(())
}

/// Minimum of `Σ p_j v_j` over distributions with `lower_j ≤ p_j ≤ upper_j`.
/// Returns the value and a minimizing distribution.
pub fn worst_case_expectation(entries: &[(f64, f64, f64)]) -> Result<(f64, Vec<f64>)> {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    let mut witness = vec![0.0; entries.len()];
    let value = worst_case_into(
        entries.len(),
        |j| entries[j],
        &mut order,
        &mut witness,
    )?;
    Ok((value, witness))
}

/// Allocation-free core of [`worst_case_expectation`]. `order` and `witness`
/// must have length `len`.
fn worst_case_into(
    len: usize,
    entry: impl Fn(usize) -> (f64, f64, f64),
    order: &mut [usize],
    witness: &mut [f64],
) -> Result<f64> {
    let mut mass = 1.0;
    let mut total_upper = 0.0;
    for j in 0..len {
        let (lo, hi, _) = entry(j);
        witness[j] = lo;
        mass -= lo;
        total_upper += hi;
        order[j] = j;
    }
    if mass < -FEASIBILITY_TOL || total_upper < 1.0 - FEASIBILITY_TOL {
        return Err(Error::EmptyAmbiguitySet);
    }
    order.sort_by(|a, b| entry(*a).2.total_cmp(&entry(*b).2).then(a.cmp(b)));
    for &j in order.iter() {
        if mass <= 0.0 {
            break;
        }
        let (lo, hi, _) = entry(j);
        let add = (hi - lo).min(mass);
        witness[j] += add;
        mass -= add;
    }
    Ok((0..len).map(|j| witness[j] * entry(j).2).sum())
}

/// Time-indexed robust optimal policy and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    num_states: usize,
    horizon: usize,
    /// `actions[k * S + s]`, `None` where no action is chosen.
    actions: Vec<Option<usize>>,
    /// `values[k * S + s]` for `k = 0..=K`.
    values: Vec<f64>,
}

impl PolicyTable {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn action(&self, s: usize, k: usize) -> Option<usize> {
        self.actions[k * self.num_states + s]
    }

    pub fn value(&self, s: usize, k: usize) -> f64 {
        self.values[k * self.num_states + s]
    }

    /// Values with the full horizon remaining, one per state.
    pub fn initial_values(&self) -> &[f64] {
        &self.values[..self.num_states]
    }

    /// Rebuilds a table from its parts, e.g. after reading it back from disk.
    pub fn from_parts(
        num_states: usize,
        horizon: usize,
        actions: Vec<Option<usize>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if actions.len() != num_states * horizon || values.len() != num_states * (horizon + 1) {
            return Err(Error::DimensionMismatch {
                expected: num_states * horizon,
                got: actions.len(),
            });
        }
        Ok(Self {
            num_states,
            horizon,
            actions,
            values,
        })
    }

    /// CSV with header `state,k,action,value`; `-1` marks no action.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,k,action,value\n");
        for k in 0..self.horizon {
            for s in 0..self.num_states {
                let a = self.action(s, k).map_or(-1, |a| a as i64);
                writeln!(out, "{s},{k},{a},{}", self.value(s, k)).expect("string write");
            }
        }
        out
    }

    /// Inverse of [`to_csv`](Self::to_csv). Terminal values are not stored and
    /// come back as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if f.len() != 4 {
                return Err(err("expected 4 fields"));
            }
            let s: usize = f[0].parse().map_err(|_| err("bad state"))?;
            let k: usize = f[1].parse().map_err(|_| err("bad step"))?;
            let a: i64 = f[2].parse().map_err(|_| err("bad action"))?;
            let v: f64 = f[3].parse().map_err(|_| err("bad value"))?;
            rows.push((s, k, a, v));
        }
        let num_states = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let horizon = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut actions = vec![None; num_states * horizon];
        let mut values = vec![0.0; num_states * (horizon + 1)];
        for (s, k, a, v) in rows {
            actions[k * num_states + s] = usize::try_from(a).ok();
            values[k * num_states + s] = v;
        }
        Self::from_parts(num_states, horizon, actions, values)
    }
}

/// Backward induction over the horizon. Ties between actions go to the
/// lowest action index.
pub fn robust_value_iteration(imdp: &IntervalMdp) -> PolicyTable {
    let s_count = imdp.num_states();
    let horizon = imdp.horizon;
    let mut values = vec![0.0; s_count * (horizon + 1)];
    let mut actions = vec![None; s_count * horizon];
    for s in 0..s_count {
        values[horizon * s_count + s] = imdp.terminal_value(s);
    }
    for k in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut((k + 1) * s_count);
        let next = &tail[..s_count];
        let current = &mut head[k * s_count..];
        let step: Vec<(f64, Option<usize>)> = (0..s_count)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(order, witness), s| bellman(imdp, s, next, order, witness),
            )
            .collect();
        for (s, (v, a)) in step.into_iter().enumerate() {
            current[s] = v.clamp(0.0, 1.0);
            actions[k * s_count + s] = a;
        }
    }
    PolicyTable {
        num_states: s_count,
        horizon,
        actions,
        values,
    }
}

fn bellman(
    imdp: &IntervalMdp,
    s: usize,
    next: &[f64],
    order: &mut Vec<usize>,
    witness: &mut Vec<f64>,
) -> (f64, Option<usize>) {
    if let Some(v) = imdp.absorbing_value(s) {
        return (v, None);
    }
    let mut best = (0.0, None);
    for (a, trans) in imdp.choices(s) {
        order.resize(trans.len(), 0);
        witness.resize(trans.len(), 0.0);
        let v = worst_case_into(
            trans.len(),
            |j| (trans[j].lower, trans[j].upper, next[trans[j].successor]),
            order,
            witness,
        )
        .expect("validated at construction");
        if best.1.is_none() || v > best.0 {
            best = (v, Some(a));
        }
    }
    best
}

/// The minimizing distribution for `(s, action)` given the values at step `k + 1`.
pub fn robust_witness(
    imdp: &IntervalMdp,
    policy: &PolicyTable,
    s: usize,
    action: usize,
    k: usize,
) -> Option<Vec<f64>> {
    let trans = imdp.transitions_of(s, action)?;
    let entries: Vec<(f64, f64, f64)> = trans
        .iter()
        .map(|t| (t.lower, t.upper, policy.value(t.successor, k + 1)))
        .collect();
    worst_case_expectation(&entries).ok().map(|(_, w)| w)
}

/// An MDP with fixed probabilities, possibly varying with the time step.
#[derive(Debug, Clone)]
pub struct PointMdp {
    imdp: IntervalMdp,
    /// `probs[k][t]` is the probability of transition `t` at step `k`.
    probs: Vec<Vec<f64>>,
}

/// Fixes a probability for every transition of every choice at every step.
/// The selector receives `(state, action, k, transitions)`.
pub fn instantiate<F>(imdp: &IntervalMdp, selector: F) -> Result<PointMdp>
where
    F: Fn(usize, usize, usize, &[Transition]) -> Vec<f64>,
{
    let mut probs = Vec::with_capacity(imdp.horizon);
    for k in 0..imdp.horizon {
        let mut row = vec![0.0; imdp.transitions.len()];
        for s in 0..imdp.num_states() {
            for c in imdp.state_offsets[s]..imdp.state_offsets[s + 1] {
                let range = imdp.choice_offsets[c]..imdp.choice_offsets[c + 1];
                let trans = &imdp.transitions[range.clone()];
                let action = imdp.choice_actions[c];
                let p = selector(s, action, k, trans);
                let total: f64 = p.iter().sum();
                let feasible = p.len() == trans.len()
                    && (total - 1.0).abs() <= FEASIBILITY_TOL
                    && p.iter().zip(trans).all(|(p, t)| {
                        t.lower - FEASIBILITY_TOL <= *p && *p <= t.upper + FEASIBILITY_TOL
                    });
                if !feasible {
                    return Err(Error::InfeasibleInstantiation { state: s, action });
                }
                row[range].copy_from_slice(&p);
            }
        }
        probs.push(row);
    }
    Ok(PointMdp {
        imdp: imdp.clone(),
        probs,
    })
}

/// Lower bounds everywhere, with the leftover mass poured into successors in
/// listed order up to their upper bounds.
pub fn lower_plus_residual(trans: &[Transition]) -> Vec<f64> {
    let mut p: Vec<f64> = trans.iter().map(|t| t.lower).collect();
    let mut mass = 1.0 - p.iter().sum::<f64>();
    for (pj, t) in p.iter_mut().zip(trans) {
        let add = (t.upper - t.lower).min(mass).max(0.0);
        *pj += add;
        mass -= add;
    }
    p
}

impl PointMdp {
    /// Values `v[k * S + s]` of following `policy`, for `k = 0..=K`.
    pub fn evaluate(&self, policy: &PolicyTable) -> Vec<f64> {
        let imdp = &self.imdp;
        let s_count = imdp.num_states();
        let horizon = imdp.horizon;
        let mut values = vec![0.0; s_count * (horizon + 1)];
        for s in 0..s_count {
            values[horizon * s_count + s] = imdp.terminal_value(s);
        }
        for k in (0..horizon).rev() {
            for s in 0..s_count {
                let v = match imdp.absorbing_value(s) {
                    Some(v) => v,
                    None => match policy.action(s, k) {
                        None => 0.0,
                        Some(a) => {
                            let c = (imdp.state_offsets[s]..imdp.state_offsets[s + 1])
                                .find(|&c| imdp.choice_actions[c] == a)
                                .expect("policy action must be enabled");
                            (imdp.choice_offsets[c]..imdp.choice_offsets[c + 1])
                                .map(|t| {
                                    self.probs[k][t]
                                        * values[(k + 1) * s_count + imdp.transitions[t].successor]
                                })
                                .sum()
                        }
                    },
                };
                values[k * s_count + s] = v;
            }
        }
        values
    }
}

/// Writes the documented text format:
///
/// ```text
/// imdp states=<S> actions=<choices> transitions=<T> horizon=<K> objective=<name>
/// goal <goal states...>
/// failure <failure states...>
/// <s> <a> <s'> [<lower>,<upper>]
/// ```
///
/// Transition lines are sorted by state, action, successor.
pub fn export_interval_model<W: io::Write>(imdp: &IntervalMdp, sink: &mut W) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "imdp states={} actions={} transitions={} horizon={} objective={}",
        imdp.num_states(),
        imdp.num_choices(),
        imdp.num_transitions(),
        imdp.horizon,
        imdp.objective.as_str()
    )
    .expect("string write");
    let list = |mask: &[bool]| {
        mask.iter()
            .enumerate()
            .filter(|(_, g)| **g)
            .map(|(s, _)| format!(" {s}"))
            .collect::<String>()
    };
    writeln!(out, "goal{}", list(&imdp.goal)).expect("string write");
    writeln!(out, "failure{}", list(&imdp.failure)).expect("string write");
    sink.write_all(out.as_bytes())?;
    out.clear();
    for s in 0..imdp.num_states() {
        for (a, trans) in imdp.choices(s) {
            for t in trans {
                writeln!(out, "{s} {a} {} [{},{}]", t.successor, t.lower, t.upper)
                    .expect("string write");
            }
        }
        if out.len() > 1 << 16 {
            sink.write_all(out.as_bytes())?;
            out.clear();
        }
    }
    sink.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads the format written by [`export_interval_model`].
pub fn import_interval_model<R: BufRead>(source: R) -> Result<IntervalMdp> {
    let mut lines = source.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("missing {what}"),
            }),
        }
    };
    let (ln, header) = next_line("header")?;
    let perr = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut fields = header.split_whitespace();
    if fields.next() != Some("imdp") {
        return Err(perr(ln, "expected `imdp` header"));
    }
    let mut states = None;
    let mut horizon = None;
    let mut objective = None;
    for f in fields {
        let (k, v) = f.split_once('=').ok_or_else(|| perr(ln, "bad header field"))?;
        match k {
            "states" => states = v.parse::<usize>().ok(),
            "horizon" => horizon = v.parse::<usize>().ok(),
            "objective" => {
                objective = match v {
                    "reach-avoid" => Some(Objective::ReachAvoid),
                    "invariance" => Some(Objective::Invariance),
                    _ => None,
                }
            }
            "actions" | "transitions" => {}
            _ => return Err(perr(ln, "unknown header field")),
        }
    }
    let states = states.ok_or_else(|| perr(ln, "missing states"))?;
    let horizon = horizon.ok_or_else(|| perr(ln, "missing horizon"))?;
    let objective = objective.ok_or_else(|| perr(ln, "missing objective"))?;

    let mut read_mask = |tag: &str| -> Result<Vec<bool>> {
        let (ln, line) = next_line(tag)?;
        let mut it = line.split_whitespace();
        if it.next() != Some(tag) {
            return Err(perr(ln, &format!("expected `{tag}` line")));
        }
        let mut mask = vec![false; states];
        for tok in it {
            let s: usize = tok.parse().map_err(|_| perr(ln, "bad state index"))?;
            *mask.get_mut(s).ok_or_else(|| perr(ln, "state out of range"))? = true;
        }
        Ok(mask)
    };
    let goal = read_mask("goal")?;
    let failure = read_mask("failure")?;

    let mut choices: Vec<Vec<Choice>> = vec![Vec::new(); states];
    for (i, line) in lines {
        let ln = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut int = |what: &str| -> Result<usize> {
            it.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(ln, &format!("bad {what}")))
        };
        let s = int("state")?;
        let a = int("action")?;
        let succ = int("successor")?;
        let iv = it.next().ok_or_else(|| perr(ln, "missing interval"))?;
        let inner = iv
            .strip_prefix('[')
            .and_then(|v| v.strip_suffix(']'))
            .ok_or_else(|| perr(ln, "bad interval"))?;
        let (lo, hi) = inner.split_once(',').ok_or_else(|| perr(ln, "bad interval"))?;
        let lower: f64 = lo.parse().map_err(|_| perr(ln, "bad lower bound"))?;
        let upper: f64 = hi.parse().map_err(|_| perr(ln, "bad upper bound"))?;
        let list = choices.get_mut(s).ok_or_else(|| perr(ln, "state out of range"))?;
        if list.last().is_none_or(|c| c.action != a) {
            list.push(Choice {
                action: a,
                transitions: Vec::new(),
            });
        }
        list.last_mut().expect("just pushed").transitions.push(Transition {
            successor: succ,
            lower,
            upper,
        });
    }
    IntervalMdp::new(horizon, objective, goal, failure, choices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(successor: usize, lower: f64, upper: f64) -> Transition {
        Transition {
            successor,
            lower,
            upper,
        }
    }

    fn toy() -> IntervalMdp {
        IntervalMdp::new(
            3,
            Objective::ReachAvoid,
            vec![false, false, true],
            vec![true, false, false],
            vec![
                vec![],
                vec![
                    Choice {
                        action: 0,
                        transitions: vec![t(0, 0.1, 0.5), t(1, 0.2, 0.4), t(2, 0.3, 0.6)],
                    },
                    Choice {
                        action: 3,
                        transitions: vec![t(1, 0.9, 1.0), t(2, 0.0, 0.1)],
                    },
                ],
                vec![],
            ],
        )
        .unwrap()
    }

    #[test]
    fn point_intervals_give_dot_product() {
        let (v, w) =
            worst_case_expectation(&[(0.2, 0.2, 1.0), (0.3, 0.3, 5.0), (0.5, 0.5, 2.0)]).unwrap();
        assert_abs_diff_eq!(v, 0.2 + 1.5 + 1.0, epsilon = 1e-15);
        assert_eq!(w, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn single_certain_successor() {
        let (v, _) = worst_case_expectation(&[(1.0, 1.0, 0.37)]).unwrap();
        assert_eq!(v, 0.37);
    }

    #[test]
    fn greedy_fills_lowest_values_first() {
        let (v, w) =
            worst_case_expectation(&[(0.1, 0.5, 1.0), (0.2, 0.6, 2.0), (0.3, 0.7, 3.0)]).unwrap();
        assert_abs_diff_eq!(v, 1.8, epsilon = 1e-12);
        for (a, b) in w.iter().zip([0.5, 0.2, 0.3]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn infeasible_intervals_are_rejected() {
        let err = worst_case_expectation(&[(0.6, 0.7, 1.0), (0.6, 0.7, 0.0)]).unwrap_err();
        assert_eq!(err.to_string(), "empty ambiguity set");
        assert!(worst_case_expectation(&[(0.1, 0.2, 1.0), (0.1, 0.2, 0.0)]).is_err());
    }

    #[test]
    fn construction_validates_feasibility() {
        let res = IntervalMdp::new(
            1,
            Objective::ReachAvoid,
            vec![false, false],
            vec![true, false],
            vec![
                vec![],
                vec![Choice {
                    action: 0,
                    transitions: vec![t(1, 0.1, 0.2)],
                }],
            ],
        );
        assert!(matches!(res, Err(Error::EmptyAmbiguitySet)));
    }

    #[test]
    fn certain_goal_gives_value_one() {
        let imdp = IntervalMdp::new(
            2,
            Objective::ReachAvoid,
            vec![false, false, true],
            vec![true, false, false],
            vec![
                vec![],
                vec![Choice {
                    action: 0,
                    transitions: vec![t(2, 1.0, 1.0)],
                }],
                vec![],
            ],
        )
        .unwrap();
        let pol = robust_value_iteration(&imdp);
        assert_eq!(pol.initial_values(), &[0.0, 1.0, 1.0]);
        assert_eq!(pol.action(1, 0), Some(0));
        assert_eq!(pol.action(2, 0), None);
    }

    #[test]
    fn zero_horizon_is_goal_indicator() {
        let pol = robust_value_iteration(&toy().with_horizon(0));
        assert_eq!(pol.initial_values(), &[0.0, 0.0, 1.0]);
        assert_eq!(pol.horizon(), 0);
    }

    #[test]
    fn invariance_counts_survival() {
        let imdp = IntervalMdp::new(
            2,
            Objective::Invariance,
            vec![false, false],
            vec![true, false],
            vec![
                vec![],
                vec![Choice {
                    action: 0,
                    transitions: vec![t(0, 0.1, 0.2), t(1, 0.8, 0.9)],
                }],
            ],
        )
        .unwrap();
        let pol = robust_value_iteration(&imdp);
        assert_abs_diff_eq!(pol.value(1, 1), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(pol.value(1, 0), 0.64, epsilon = 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let imdp = IntervalMdp::new(
            1,
            Objective::ReachAvoid,
            vec![false, false, true],
            vec![true, false, false],
            vec![
                vec![],
                vec![
                    Choice {
                        action: 2,
                        transitions: vec![t(2, 1.0, 1.0)],
                    },
                    Choice {
                        action: 5,
                        transitions: vec![t(2, 1.0, 1.0)],
                    },
                ],
                vec![],
            ],
        )
        .unwrap();
        assert_eq!(robust_value_iteration(&imdp).action(1, 0), Some(2));
    }

    #[test]
    fn witness_instantiation_reproduces_robust_values() {
        let imdp = toy();
        let pol = robust_value_iteration(&imdp);
        let point = instantiate(&imdp, |s, a, k, _| {
            robust_witness(&imdp, &pol, s, a, k).unwrap()
        })
        .unwrap();
        let v = point.evaluate(&pol);
        for k in 0..=imdp.horizon() {
            for s in 0..imdp.num_states() {
                assert_abs_diff_eq!(v[k * 3 + s], pol.value(s, k), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lower_plus_residual_is_feasible() {
        let imdp = toy();
        let point = instantiate(&imdp, |_, _, _, tr| lower_plus_residual(tr)).unwrap();
        let pol = robust_value_iteration(&imdp);
        let v = point.evaluate(&pol);
        assert!(v[1] >= pol.value(1, 0) - 1e-12);
    }

    #[test]
    fn infeasible_selection_is_an_error() {
        let imdp = toy();
        let res = instantiate(&imdp, |_, _, _, tr| vec![0.0; tr.len()]);
        assert!(matches!(res, Err(Error::InfeasibleInstantiation { state: 1, .. })));
    }

    #[test]
    fn export_golden_and_round_trip() {
        let imdp = IntervalMdp::new(
            3,
            Objective::ReachAvoid,
            vec![false, true],
            vec![true, false],
            vec![vec![], vec![]],
        )
        .unwrap();
        let mut buf = Vec::new();
        export_interval_model(&imdp, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "imdp states=2 actions=0 transitions=0 horizon=3 objective=reach-avoid\ngoal 1\nfailure 0\n"
        );

        let imdp = toy();
        let mut buf = Vec::new();
        export_interval_model(&imdp, &mut buf).unwrap();
        let back = import_interval_model(buf.as_slice()).unwrap();
        assert_eq!(back, imdp);
        let mut again = Vec::new();
        export_interval_model(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn policy_csv_round_trip() {
        let pol = robust_value_iteration(&toy());
        let csv = pol.to_csv();
        assert!(csv.starts_with("state,k,action,value\n0,0,-1,0\n"));
        let back = PolicyTable::from_csv(&csv).unwrap();
        for k in 0..pol.horizon() {
            for s in 0..pol.num_states() {
                assert_eq!(back.action(s, k), pol.action(s, k));
                assert_eq!(back.value(s, k), pol.value(s, k));
            }
        }
    }
}
