//! PAC bounds on transition probabilities from noise sample counts.
//!
//! Given `N` samples, `R` of which yield successor sets contained in a region
//! and `R̃` of which meet it, the scenario bound gives a lower bound and
//! Hoeffding's inequality an upper bound, each wrong with probability at
//! most `β`.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative residual accepted by the scenario root finder.
pub const ROOT_TOL: f64 = 1e-9;
const BRACKET: f64 = 1e-12;
/// Terms below `max - TAIL_CUTOFF` in log space are dropped from the tail sum.
const TAIL_CUTOFF: f64 = 40.0;

fn check_args(n: usize, count: usize, beta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "count {count} exceeds sample count {n}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} not in (0, 1)")));
    }
    Ok(())
}

/// `ln P[Bin(n, p) >= r]` for `0 < p < 1` and `1 <= r <= n`.
pub fn ln_binomial_upper_tail(n: usize, r: usize, ln_p: f64) -> f64 {
    let ln_q = (-ln_p.exp()).ln_1p();
    let nf = n as f64;
    let ln_choose = |k: usize| {
        ln_gamma(nf + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    };
    let ln_term = |k: usize| ln_choose(k) + k as f64 * ln_p + (n - k) as f64 * ln_q;

    let mode = ((nf + 1.0) * ln_p.exp()).floor() as usize;
    let start = mode.clamp(r, n);
    let peak = ln_term(start);
    let odds = ln_p - ln_q;

    let mut sum = 1.0;
    let mut t = peak;
    for k in start..n {
        t += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + odds;
        if t < peak - TAIL_CUTOFF {
            break;
        }
        sum += (t - peak).exp();
    }
    let mut t = peak;
    for k in (r + 1..=start).rev() {
        t -= ((n - k + 1) as f64).ln() - (k as f64).ln() + odds;
        if t < peak - TAIL_CUTOFF {
            break;
        }
        sum += (t - peak).exp();
    }
    peak + sum.ln()
}

/// Scenario lower bound: the root `p` of `β/N = P[Bin(N, p) >= R]`, or 0
/// when `R = 0`.
pub fn scenario_lower_bound(n: usize, r: usize, beta: f64) -> Result<f64> {
    check_args(n, r, beta)?;
    if r == 0 {
        return Ok(0.0);
    }
    let ln_target = (beta / n as f64).ln();
    if r == n {
        return Ok((ln_target / n as f64).exp());
    }
    let f = |t: f64| ln_binomial_upper_tail(n, r, t) - ln_target;

    let mut lo = BRACKET.ln();
    let mut hi = (-BRACKET).ln_1p();
    if f(lo) > 0.0 {
        // Root below the default bracket; extend down to the smallest normal.
        lo = f64::MIN_POSITIVE.ln();
    }
    let mut mid = 0.5 * (lo + hi);
    loop {
        let g = f(mid);
        if g.exp_m1().abs() < ROOT_TOL {
            break;
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        let next = 0.5 * (lo + hi);
        if next == lo || next == hi {
            break;
        }
        mid = next;
    }
    Ok(mid.exp())
}

/// Hoeffding upper bound `min(1, R̃/N + sqrt(ln(1/β) / 2N))`.
pub fn hoeffding_upper_bound(n: usize, r_tilde: usize, beta: f64) -> Result<f64> {
    check_args(n, r_tilde, beta)?;
    let nf = n as f64;
    Ok((r_tilde as f64 / nf + ((1.0 / beta).ln() / (2.0 * nf)).sqrt()).min(1.0))
}

/// Sample counts behind one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub n: usize,
    pub r: usize,
    pub r_tilde: usize,
}

/// A probability interval together with the evidence it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbInterval {
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
    pub counts: Counts,
    /// Set when the raw bounds crossed and the interval was widened.
    pub widened: bool,
}

impl ProbInterval {
    pub fn is_edge(&self) -> bool {
        self.upper > 0.0
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Interval correct with probability at least `1 - 2β`; `[0, 0]` when no
/// sample meets the region.
pub fn transition_interval(counts: Counts, beta: f64) -> Result<ProbInterval> {
    transition_interval_with(counts, beta, |r| scenario_lower_bound(counts.n, r, beta))
}

fn transition_interval_with(
    counts: Counts,
    beta: f64,
    lower_of: impl FnOnce(usize) -> Result<f64>,
) -> Result<ProbInterval> {
    let Counts { n, r, r_tilde } = counts;
    check_args(n, r_tilde, beta)?;
    if r > r_tilde {
        return Err(Error::InvalidArgument(format!(
            "contained count {r} exceeds intersecting count {r_tilde}"
        )));
    }
    if r_tilde == 0 {
        return Ok(ProbInterval {
            lower: 0.0,
            upper: 0.0,
            beta,
            counts,
            widened: false,
        });
    }
    let lo = lower_of(r)?;
    let hi = hoeffding_upper_bound(n, r_tilde, beta)?;
    let widened = lo > hi;
    Ok(ProbInterval {
        lower: lo.min(hi),
        upper: lo.max(hi),
        beta,
        counts,
        widened,
    })
}

/// Memoized scenario bounds for a fixed `(N, β)`, safe to share across threads.
#[derive(Debug)]
pub struct IntervalTable {
    n: usize,
    beta: f64,
    lower: Vec<OnceLock<f64>>,
}

impl IntervalTable {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        check_args(n, 0, beta)?;
        Ok(Self {
            n,
            beta,
            lower: (0..=n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lower_bound(&self, r: usize) -> Result<f64> {
        check_args(self.n, r, self.beta)?;
        if let Some(v) = self.lower[r].get() {
            return Ok(*v);
        }
        let v = scenario_lower_bound(self.n, r, self.beta)?;
        Ok(*self.lower[r].get_or_init(|| v))
    }

    pub fn interval(&self, r: usize, r_tilde: usize) -> Result<ProbInterval> {
        let counts = Counts {
            n: self.n,
            r,
            r_tilde,
        };
        transition_interval_with(counts, self.beta, |r| self.lower_bound(r))
    }
}

/// Union-bound bookkeeping: splits the overall failure budget evenly over
/// both bounds of every stored interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceLedger {
    pub desired_overall: f64,
    pub interval_count: usize,
    pub per_interval_beta: f64,
}

impl ConfidenceLedger {
    pub fn new(desired_overall: f64, interval_count: usize) -> Result<Self> {
        if !(desired_overall > 0.0 && desired_overall < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "overall confidence {desired_overall} not in (0, 1)"
            )));
        }
        if interval_count == 0 {
            return Err(Error::NoTransitions);
        }
        Ok(Self {
            desired_overall,
            interval_count,
            per_interval_beta: (1.0 - desired_overall) / (2.0 * interval_count as f64),
        })
    }

    /// `1 - 2β · count`, the confidence actually certified.
    pub fn certified_confidence(&self) -> f64 {
        1.0 - 2.0 * self.per_interval_beta * self.interval_count as f64
    }
}
