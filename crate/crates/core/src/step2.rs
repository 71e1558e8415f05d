//! Greedy allocation when the buffer-filling powers do not fit the budget.
//!
//! Users are first triaged so that every retained user's lower bound fits.
//! Three candidate allocations are then built and the one with the largest
//! reduced objective `sum ln(1 + gamma)` wins:
//!
//! 1. the concave-region optimum over users with `p_min < p_star`, followed
//!    by pouring any leftover power in descending marginal-rate order;
//! 2. the same, after pushing the best-ranked link toward its `p_max`;
//! 3. the same, after pushing the two best-ranked links.
//!
//! How far the leading link is pushed is found by a one-dimensional search
//! whose candidates include the full push.
//!
//! All vectors are indexed by position in the slice handed in; callers map
//! those positions back to their own user ids.

use std::cmp::Ordering;

use crate::channel::ChannelState;
use crate::dual::{solve_distributed, ConcaveProblem, ConcaveUser, RoundRecord, SolverConfig};
use crate::error::{Error, Result};
use crate::rate::{capacity_derivatives, capacity_gain, concave_capacity, convex_region_bound, PowerAllocation, PowerBounds};

#[derive(Debug, Clone, PartialEq)]
pub struct TriageReport {
    /// Retained users in ascending index order.
    pub retained: Vec<usize>,
    /// Suspended users in the order they were removed.
    pub suspended: Vec<usize>,
    pub p_min_sum: f64,
    /// `budget - p_min_sum`.
    pub gap: f64,
}

/// Drops users, worst link quality first, until the retained lower bounds
/// fit in `budget`. Users with a zero lower bound are never dropped since
/// removing them frees nothing. Among equal qualities the higher index goes
/// first.
pub fn triage(bounds: &[PowerBounds], channels: &[ChannelState], budget: f64) -> TriageReport {
    let n = bounds.len();
    let mut order: Vec<usize> = (0..n).filter(|&k| bounds[k].p_min > 0.0).collect();
    order.sort_by(|&a, &b| {
        channels[b]
            .quality
            .partial_cmp(&channels[a].quality)
            .unwrap_or(Ordering::Equal)
            .then(b.cmp(&a))
    });
    let mut keep = vec![true; n];
    let mut suspended = Vec::new();
    let mut p_min_sum: f64 = bounds.iter().map(|b| b.p_min).sum();
    for k in order {
        if p_min_sum <= budget {
            break;
        }
        keep[k] = false;
        suspended.push(k);
        p_min_sum = (0..n).filter(|&j| keep[j]).map(|j| bounds[j].p_min).sum();
    }
    let retained: Vec<usize> = (0..n).filter(|&k| keep[k]).collect();
    TriageReport {
        retained,
        suspended,
        p_min_sum,
        gap: budget - p_min_sum,
    }
}

/// Secant slope of the reduced capacity from `p_from` to
/// `min(p_max, p_from + gap)`; the derivative at `p_from` when that interval
/// is empty.
pub fn marginal_rate(p_from: f64, gap: f64, bounds: &PowerBounds, channel: &ChannelState, budget: f64) -> f64 {
    let to = bounds.p_max.min(p_from + gap.max(0.0));
    let width = to - p_from;
    if width <= 0.0 {
        return capacity_derivatives(p_from, channel, budget).0;
    }
    capacity_gain(p_from, to, channel, budget) / width
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    One = 1,
    Two = 2,
    Three = 3,
}

impl Phase {
    pub fn id(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub phase: Phase,
    /// Powers for every user of the slice. Suspended users hold zero unless
    /// the retained users could not absorb the whole budget.
    pub allocation: PowerAllocation,
    /// Reduced objective over the retained users, nats. Negative infinity
    /// when the concave solve of this phase did not converge.
    pub objective: f64,
    /// Users of the concave solve, in the column order of `rounds`.
    pub members: Vec<usize>,
    /// Round log of the concave solve, if one ran.
    pub rounds: Vec<RoundRecord>,
}

impl PhaseResult {
    pub fn succeeded(&self) -> bool {
        self.objective > f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step2Outcome {
    pub triage: TriageReport,
    /// Every phase that was attempted, in phase order.
    pub candidates: Vec<PhaseResult>,
    /// Index into `candidates` of the chosen allocation.
    pub best: usize,
}

impl Step2Outcome {
    pub fn best(&self) -> &PhaseResult {
        &self.candidates[self.best]
    }
}

struct Instance<'a> {
    bounds: &'a [PowerBounds],
    channels: &'a [ChannelState],
    budget: f64,
    cfg: &'a SolverConfig,
}

impl Instance<'_> {
    /// Ranks `users` by marginal rate from `p_min` with a common gap,
    /// best first. Ties prefer the better link, then the lower index.
    fn rank(&self, users: &[usize], from: &[f64], gap: f64) -> Vec<usize> {
        let rates: Vec<(usize, f64)> = users
            .iter()
            .map(|&k| (k, marginal_rate(from[k], gap, &self.bounds[k], &self.channels[k], self.budget)))
            .collect();
        let mut sorted = rates;
        sorted.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(
                    self.channels[a.0]
                        .quality
                        .partial_cmp(&self.channels[b.0].quality)
                        .unwrap_or(Ordering::Equal),
                )
                .then(a.0.cmp(&b.0))
        });
        sorted.into_iter().map(|(k, _)| k).collect()
    }

    /// Pours `budget - sum(powers)` into `users` with headroom, one at a
    /// time in descending marginal-rate order.
    fn pour(&self, powers: &mut [f64], users: &[usize]) {
        loop {
            let used: f64 = powers.iter().sum();
            let remaining = self.budget - used;
            if remaining <= 0.0 {
                return;
            }
            let open: Vec<usize> = users
                .iter()
                .copied()
                .filter(|&k| powers[k] < self.bounds[k].p_max)
                .collect();
            let Some(&top) = self.rank(&open, powers, remaining).first() else {
                return;
            };
            let target = powers[top] + remaining;
            if target >= self.bounds[top].p_max {
                powers[top] = self.bounds[top].p_max;
            } else {
                powers[top] = target;
                return;
            }
        }
    }

    /// Fixes `pinned` users at the given powers, solves the concave problem
    /// over the remaining retained users below their inflection points, and
    /// pours the leftover. Power still left once every retained user is at
    /// its `p_max` goes to the suspended users.
    fn complete(&self, phase: Phase, report: &TriageReport, pinned: &[(usize, f64)]) -> Result<PhaseResult> {
        let retained = &report.retained;
        let n = self.bounds.len();
        let mut powers = vec![0.0; n];
        for &(k, p) in pinned {
            powers[k] = p;
        }
        let rest: Vec<usize> = retained
            .iter()
            .copied()
            .filter(|k| !pinned.iter().any(|(j, _)| j == k))
            .collect();
        let (concave, convex): (Vec<usize>, Vec<usize>) =
            rest.iter().partition(|&&k| self.bounds[k].p_min < self.bounds[k].p_star);
        for &k in &convex {
            powers[k] = self.bounds[k].p_min;
        }
        let mut rounds = Vec::new();
        let mut converged = true;
        if !concave.is_empty() {
            let fixed: f64 = pinned.iter().map(|(_, p)| p).sum::<f64>()
                + convex.iter().map(|&k| self.bounds[k].p_min).sum::<f64>();
            let users: Vec<ConcaveUser> = concave
                .iter()
                .map(|&k| ConcaveUser {
                    bounds: self.bounds[k],
                    channel: self.channels[k],
                })
                .collect();
            let floor: f64 = users.iter().map(|u| u.lower()).sum();
            let p_total = (self.budget - fixed).max(floor);
            let problem = ConcaveProblem::new(users, self.budget, p_total)?;
            let sol = solve_distributed(&problem, self.cfg)?;
            converged = sol.converged();
            for (i, &k) in concave.iter().enumerate() {
                powers[k] = sol.powers[i];
            }
            rounds = sol.rounds;
        }
        self.pour(&mut powers, retained);
        self.pour(&mut powers, &report.suspended);
        let objective = if converged {
            retained
                .iter()
                .map(|&k| concave_capacity(powers[k], &self.channels[k], self.budget))
                .sum()
        } else {
            f64::NEG_INFINITY
        };
        Ok(PhaseResult {
            phase,
            allocation: PowerAllocation {
                powers,
                budget: self.budget,
            },
            objective,
            members: concave,
            rounds,
        })
    }
}

const PUSH_SAMPLES: usize = 8;
const PUSH_REFINE: usize = 24;

/// Picks how far to push the leading link: `eval(x)` builds the phase with
/// the link `x` above its floor, `x` in `[0, width]`. The full push is
/// always among the candidates; the rest come from a uniform scan refined
/// by golden-section search around the best sample.
fn best_push(width: f64, eval: impl Fn(f64) -> Result<PhaseResult>) -> Result<PhaseResult> {
    let mut best = eval(width)?;
    if width <= 0.0 {
        return Ok(best);
    }
    let mut best_x = width;
    let consider = |x: f64, r: PhaseResult, best: &mut PhaseResult, best_x: &mut f64| {
        if r.objective > best.objective {
            *best = r;
            *best_x = x;
        }
    };
    for j in 0..PUSH_SAMPLES {
        let x = width * j as f64 / PUSH_SAMPLES as f64;
        let r = eval(x)?;
        consider(x, r, &mut best, &mut best_x);
    }
    let cell = width / PUSH_SAMPLES as f64;
    let (mut a, mut b) = ((best_x - cell).max(0.0), (best_x + cell).min(width));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    for _ in 0..PUSH_REFINE {
        if fc.objective >= fd.objective {
            b = d;
            d = c;
            consider(d, fd, &mut best, &mut best_x);
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            consider(c, fc, &mut best, &mut best_x);
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d)?;
        }
    }
    consider(c, fc, &mut best, &mut best_x);
    consider(d, fd, &mut best, &mut best_x);
    Ok(best)
}

/// Runs triage and the three phases and returns every candidate along with
/// the choice. Ties in objective go to the earlier phase.
pub fn run_phases(
    bounds: &[PowerBounds],
    channels: &[ChannelState],
    budget: f64,
    cfg: &SolverConfig,
) -> Result<Step2Outcome> {
    if bounds.len() != channels.len() {
        return Err(Error::input(
            "bounds",
            format!("{} bounds for {} channels", bounds.len(), channels.len()),
        ));
    }
    for (k, b) in bounds.iter().enumerate() {
        if !(b.p_min >= 0.0 && b.p_min <= b.p_max) {
            return Err(Error::input("bounds", format!("user {k}: empty box [{}, {}]", b.p_min, b.p_max)));
        }
    }
    let report = triage(bounds, channels, budget);
    let inst = Instance {
        bounds,
        channels,
        budget,
        cfg,
    };
    let retained = report.retained.clone();
    let mut candidates = vec![inst.complete(Phase::One, &report, &[])?];

    let floors: Vec<f64> = bounds.iter().map(|b| b.p_min).collect();
    let convex_capable: Vec<usize> = retained
        .iter()
        .copied()
        .filter(|&k| bounds[k].reaches_convex())
        .collect();
    let ranked = inst.rank(&convex_capable, &floors, report.gap);

    // pins `users` in order; the first gets `first` above its floor, each
    // later one as much of the remaining gap as its box allows
    let push = |users: &[usize], first: f64| {
        let mut gap = report.gap;
        let mut pinned = Vec::new();
        for (i, &k) in users.iter().enumerate() {
            let room = (bounds[k].p_max - bounds[k].p_min).min(gap.max(0.0));
            let extra = if i == 0 { first.clamp(0.0, room) } else { room };
            gap -= extra;
            pinned.push((k, (bounds[k].p_min + extra).min(bounds[k].p_max)));
        }
        pinned
    };
    let reach = |k: usize| (bounds[k].p_max - bounds[k].p_min).min(report.gap.max(0.0));

    if let Some(&top) = ranked.first() {
        let pushed = best_push(reach(top), |x| inst.complete(Phase::Two, &report, &push(&[top], x)))?;
        candidates.push(pushed);
    }
    let low_gain = retained
        .iter()
        .any(|&k| channels[k].proc_gain < convex_region_bound(channels[k].quality, budget));
    if ranked.len() >= 2 && low_gain {
        let pair = &ranked[..2];
        let pushed = best_push(reach(pair[0]), |x| inst.complete(Phase::Three, &report, &push(pair, x)))?;
        candidates.push(pushed);
    }

    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.objective > candidates[best].objective {
            best = i;
        }
    }
    if !candidates[best].succeeded() {
        return Err(Error::NoPhaseSucceeded);
    }
    Ok(Step2Outcome {
        triage: report,
        candidates,
        best,
    })
}
