//! Distributed dual-decomposition solver for the concave-region subproblem
//!
//! ```text
//! maximize   sum_n ln(1 + L_n P_n / (Pbar - P_n + A_n))
//! subject to p_min_n <= P_n <= p_th_n,   sum_n P_n <= P_tot
//! ```
//!
//! The base station broadcasts prices `(lambda_n, mu_n, nu)`; each user
//! maximizes its own Lagrangian term over its box by projected gradient
//! ascent and reports the requested power; the base station then takes a
//! projected gradient step on the dual function. Both updates pick their
//! step sizes with the Armijo rule. A trial step is seeded from the local
//! curvature so that the configured `initial_step` is dimensionless.

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::rate::{capacity_derivatives, capacity_gain, concave_capacity, PowerBounds};

/// Stop the inner ascent once the full projected step is below this fraction
/// of `Pbar + A`.
const INNER_STEP_TOL: f64 = 1e-13;
const MAX_BACKTRACKS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Backtracking factor in (0, 1).
    pub armijo_shrink: f64,
    /// Sufficient-increase fraction in (0, 1).
    pub armijo_slope: f64,
    /// Trial step, in units of the inverse local curvature.
    pub initial_step: f64,
    /// Convergence tolerance on the combined primal/dual/slackness residual.
    pub tol: f64,
    /// Iteration cap for each user's local ascent.
    pub max_iters: usize,
    /// Cap on broadcast/collect rounds.
    pub max_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            armijo_shrink: 0.5,
            armijo_slope: 0.01,
            initial_step: 1.0,
            tol: 1e-6,
            max_iters: 200,
            max_rounds: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.armijo_shrink) {
            return Err(Error::config("solver.armijo_shrink", "must lie in (0, 1)"));
        }
        if !open_unit(self.armijo_slope) {
            return Err(Error::config("solver.armijo_slope", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::config("solver.initial_step", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("solver.tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(Error::config("solver.max_rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// One participant of the concave subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcaveUser {
    pub bounds: PowerBounds,
    pub channel: ChannelState,
}

impl ConcaveUser {
    pub fn lower(&self) -> f64 {
        self.bounds.p_min
    }

    pub fn upper(&self) -> f64 {
        self.bounds.p_th
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveProblem {
    users: Vec<ConcaveUser>,
    /// Peak power `Pbar` appearing in the reduced SINR map.
    budget: f64,
    /// Power available to this user set.
    p_total: f64,
}

impl ConcaveProblem {
    /// Rejects empty boxes and instances whose lower bounds already exceed
    /// `p_total`.
    pub fn new(users: Vec<ConcaveUser>, budget: f64, p_total: f64) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::input("budget", format!("must be positive, got {budget}")));
        }
        if !(p_total >= 0.0) {
            return Err(Error::input("p_total", format!("must be nonnegative, got {p_total}")));
        }
        for (n, u) in users.iter().enumerate() {
            if !(u.lower() >= 0.0 && u.lower() <= u.upper()) {
                return Err(Error::input(
                    "bounds",
                    format!("user {n}: empty box [{}, {}]", u.lower(), u.upper()),
                ));
            }
        }
        let p_min_sum: f64 = users.iter().map(|u| u.lower()).sum();
        if p_min_sum > p_total * (1.0 + 1e-12) {
            return Err(Error::Infeasible {
                p_min_sum,
                budget: p_total,
            });
        }
        Ok(Self {
            users,
            budget,
            p_total,
        })
    }

    pub fn users(&self) -> &[ConcaveUser] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn p_total(&self) -> f64 {
        self.p_total
    }

    pub fn primal_objective(&self, powers: &[f64]) -> f64 {
        self.users
            .iter()
            .zip(powers)
            .map(|(u, &p)| concave_capacity(p, &u.channel, self.budget))
            .sum()
    }

    /// Lagrangian at `powers`, which is the dual function when `powers` are
    /// the users' responses to the prices in `state`.
    pub fn lagrangian(&self, lambda: &[f64], mu: &[f64], nu: f64, powers: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut used = 0.0;
        for (n, u) in self.users.iter().enumerate() {
            let p = powers[n];
            total += concave_capacity(p, &u.channel, self.budget)
                + lambda[n] * (p - u.lower())
                + mu[n] * (u.upper() - p);
            used += p;
        }
        total + nu * (self.p_total - used)
    }

    /// Every user's best response to the prices, warm-started from `start`.
    pub fn respond(&self, lambda: &[f64], mu: &[f64], nu: f64, start: &[f64], cfg: &SolverConfig) -> Vec<f64> {
        self.users
            .iter()
            .enumerate()
            .map(|(n, u)| {
                let prices = UserPrices {
                    lambda: lambda[n],
                    mu: mu[n],
                    nu,
                };
                user_subproblem(prices, &u.bounds, &u.channel, self.budget, start[n], cfg).power
            })
            .collect()
    }

    pub fn residuals(&self, state: &DualState) -> Residuals {
        let scale = self.p_total.max(f64::MIN_POSITIVE);
        let used: f64 = state.iterate.iter().sum();
        let slack = self.p_total - used;
        let primal = (-slack).max(0.0) / scale;
        let mut dual = if state.nu > 0.0 { slack.abs() / scale } else { primal };
        let mut slackness = state.nu * slack.abs();
        for (n, u) in self.users.iter().enumerate() {
            let lo_gap = state.iterate[n] - u.lower();
            let hi_gap = u.upper() - state.iterate[n];
            if state.lambda[n] > 0.0 {
                dual = dual.max(lo_gap.abs() / scale);
            }
            if state.mu[n] > 0.0 {
                dual = dual.max(hi_gap.abs() / scale);
            }
            slackness += state.lambda[n] * lo_gap.abs() + state.mu[n] * hi_gap.abs();
        }
        Residuals {
            primal,
            dual,
            slackness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Relative budget violation.
    pub primal: f64,
    /// Relative projected dual gradient.
    pub dual: f64,
    /// Complementary slackness, nats.
    pub slackness: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.slackness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPrices {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl UserPrices {
    fn net(&self) -> f64 {
        self.lambda - self.mu - self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemResult {
    pub power: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `C_n(p) + (lambda - mu - nu) p` over `[p_min, p_th]` by
/// projected gradient ascent with Armijo backtracking.
pub fn user_subproblem(
    prices: UserPrices,
    bounds: &PowerBounds,
    channel: &ChannelState,
    budget: f64,
    start: f64,
    cfg: &SolverConfig,
) -> SubproblemResult {
    let lo = bounds.p_min;
    let hi = bounds.p_th;
    let net = prices.net();
    let scale = budget + channel.quality;
    let mut p = start.clamp(lo, hi);
    for it in 1..=cfg.max_iters {
        let (d1, d2) = capacity_derivatives(p, channel, budget);
        let grad = d1 + net;
        let curvature = (-d2).max(1e-9 * d1 / scale);
        let mut step = cfg.initial_step / curvature;
        let full = (p + step * grad).clamp(lo, hi);
        if (full - p).abs() <= INNER_STEP_TOL * scale {
            return SubproblemResult {
                power: full,
                iterations: it,
                converged: true,
            };
        }
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = (p + step * grad).clamp(lo, hi);
            let gain = capacity_gain(p, cand, channel, budget) + net * (cand - p);
            if gain >= cfg.armijo_slope * grad * (cand - p) {
                accepted = Some(cand);
                break;
            }
            step *= cfg.armijo_shrink;
        }
        match accepted {
            Some(cand) => p = cand,
            None => {
                return SubproblemResult {
                    power: p,
                    iterations: it,
                    converged: false,
                }
            }
        }
    }
    SubproblemResult {
        power: p,
        iterations: cfg.max_iters,
        converged: false,
    }
}

/// Prices, current responses and bookkeeping kept by the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: f64,
    /// Users' responses to the current prices.
    pub iterate: Vec<f64>,
    pub iteration: usize,
    pub converged: bool,
}

impl DualState {
    /// Zero prices and the users' responses to them.
    pub fn initial(problem: &ConcaveProblem, cfg: &SolverConfig) -> Self {
        let n = problem.len();
        let zeros = vec![0.0; n];
        let start: Vec<f64> = problem.users.iter().map(|u| u.lower()).collect();
        let iterate = problem.respond(&zeros, &zeros, 0.0, &start, cfg);
        Self {
            lambda: zeros.clone(),
            mu: zeros,
            nu: 0.0,
            iterate,
            iteration: 0,
            converged: false,
        }
    }

    pub fn dual_value(&self, problem: &ConcaveProblem) -> f64 {
        problem.lagrangian(&self.lambda, &self.mu, self.nu, &self.iterate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Lower,
    Upper,
    Budget,
}

/// Sensitivity of user `n`'s response to its net price, `1 / |C''|`, or
/// zero when the response is pinned at a box edge.
fn response_slope(problem: &ConcaveProblem, n: usize, p: f64, interior_only: bool) -> f64 {
    let u = &problem.users[n];
    let scale = problem.budget + u.channel.quality;
    let edge = 1e-12 * scale;
    if interior_only && (p <= u.lower() + edge || p >= u.upper() - edge) {
        return 0.0;
    }
    let (d1, d2) = capacity_derivatives(p, &u.channel, problem.budget);
    1.0 / (-d2).max(1e-9 * d1 / scale)
}

/// Distance in `nu` from the current price to the nearest price at which a
/// pinned user starts to move, slightly overshot so the user ends up inside
/// its box. `grad` is the dual gradient with respect to `nu`.
fn next_breakpoint(problem: &ConcaveProblem, st: &DualState, grad: f64) -> Option<f64> {
    let nu = st.nu;
    let mut best: Option<f64> = None;
    for (k, u) in problem.users.iter().enumerate() {
        let net = st.lambda[k] - st.mu[k];
        let p = st.iterate[k];
        let dist = if grad < 0.0 && p >= u.upper() && u.upper() > u.lower() {
            // raising nu: users at the top come down once nu passes C'(p_th)
            capacity_derivatives(u.upper(), &u.channel, problem.budget).0 + net - nu
        } else if grad > 0.0 && p <= u.lower() && u.upper() > u.lower() {
            nu - (capacity_derivatives(u.lower(), &u.channel, problem.budget).0 + net)
        } else {
            continue;
        };
        if dist >= 0.0 {
            best = Some(best.map_or(dist, |b: f64| b.min(dist)));
        }
    }
    if grad > 0.0 {
        // lowering nu never goes past zero
        best = Some(best.map_or(nu, |b| b.min(nu)));
    }
    best.map(|d| d * (1.0 + 1e-6) + 1e-12 * nu.max(1.0))
}

/// One master iteration: for each multiplier family in turn, a projected
/// gradient step on the dual function with an Armijo-selected step size.
/// `state.iterate` must hold the responses to `state`'s prices; the
/// returned state holds the responses to the new prices.
pub fn master_update(problem: &ConcaveProblem, state: &DualState, cfg: &SolverConfig) -> DualState {
    let mut st = state.clone();
    for family in [Family::Lower, Family::Upper, Family::Budget] {
        step_family(problem, &mut st, family, cfg);
    }
    st.iteration += 1;
    st
}

fn step_family(problem: &ConcaveProblem, st: &mut DualState, family: Family, cfg: &SolverConfig) -> bool {
    let n = problem.len();
    let current = st.dual_value(problem);
    // dual gradient by Danskin, and a diagonal Newton-like scaling
    let (grad, scaling): (Vec<f64>, Vec<f64>) = match family {
        Family::Lower => (0..n)
            .map(|k| {
                let g = st.iterate[k] - problem.users[k].lower();
                (g, 1.0 / response_slope(problem, k, st.iterate[k], false))
            })
            .unzip(),
        Family::Upper => (0..n)
            .map(|k| {
                let g = problem.users[k].upper() - st.iterate[k];
                (g, 1.0 / response_slope(problem, k, st.iterate[k], false))
            })
            .unzip(),
        Family::Budget => {
            let used: f64 = st.iterate.iter().sum();
            let g = problem.p_total - used;
            let slope: f64 = (0..n).map(|k| response_slope(problem, k, st.iterate[k], true)).sum();
            let scaling = if slope > 0.0 {
                1.0 / slope
            } else {
                // every response is pinned, so the dual is linear up to the
                // next price at which some user leaves its edge
                match next_breakpoint(problem, st, g) {
                    Some(dist) => dist / g.abs().max(f64::MIN_POSITIVE),
                    None => 0.0,
                }
            };
            (vec![g], vec![scaling])
        }
    };
    let values: Vec<f64> = match family {
        Family::Lower => st.lambda.clone(),
        Family::Upper => st.mu.clone(),
        Family::Budget => vec![st.nu],
    };
    let project = |alpha: f64| -> Vec<f64> {
        values
            .iter()
            .zip(&grad)
            .zip(&scaling)
            .map(|((v, g), s)| (v - alpha * s * g).max(0.0))
            .collect()
    };
    let mut alpha = cfg.initial_step;
    if project(alpha) == values {
        return false;
    }
    for _ in 0..MAX_BACKTRACKS {
        let trial = project(alpha);
        let (lambda, mu, nu) = match family {
            Family::Lower => (trial.clone(), st.mu.clone(), st.nu),
            Family::Upper => (st.lambda.clone(), trial.clone(), st.nu),
            Family::Budget => (st.lambda.clone(), st.mu.clone(), trial[0]),
        };
        let responses = problem.respond(&lambda, &mu, nu, &st.iterate, cfg);
        let value = problem.lagrangian(&lambda, &mu, nu, &responses);
        let predicted: f64 = grad.iter().zip(trial.iter().zip(&values)).map(|(g, (t, v))| g * (t - v)).sum();
        if value <= current + cfg.armijo_slope * predicted {
            st.lambda = lambda;
            st.mu = mu;
            st.nu = nu;
            st.iterate = responses;
            return true;
        }
        alpha *= cfg.armijo_shrink;
    }
    false
}

/// One broadcast/collect round as seen by the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub powers: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedSolution {
    /// Final powers, feasible for the box and budget constraints.
    pub powers: Vec<f64>,
    pub state: DualState,
    pub rounds: Vec<RoundRecord>,
    pub objective: f64,
}

impl DistributedSolution {
    pub fn converged(&self) -> bool {
        self.state.converged
    }
}

fn record(problem: &ConcaveProblem, st: &DualState, round: usize) -> RoundRecord {
    RoundRecord {
        round,
        powers: st.iterate.clone(),
        lambda: st.lambda.clone(),
        mu: st.mu.clone(),
        nu: st.nu,
        primal_objective: problem.primal_objective(&st.iterate),
        dual_objective: st.dual_value(problem),
        residual: problem.residuals(st).max(),
    }
}

/// Runs the synchronous price/response protocol until the residuals drop
/// below `cfg.tol` or `cfg.max_rounds` master updates have been made.
///
/// The returned powers are the last responses, pulled toward the lower
/// bounds if they overshoot the budget.
pub fn solve_distributed(problem: &ConcaveProblem, cfg: &SolverConfig) -> Result<DistributedSolution> {
    cfg.validate()?;
    let mut st = DualState::initial(problem, cfg);
    let mut rounds = vec![record(problem, &st, 0)];
    loop {
        if problem.residuals(&st).max() < cfg.tol {
            st.converged = true;
            break;
        }
        if st.iteration >= cfg.max_rounds {
            break;
        }
        let next = master_update(problem, &st, cfg);
        let stalled = next.lambda == st.lambda && next.mu == st.mu && next.nu == st.nu;
        st = next;
        rounds.push(record(problem, &st, st.iteration));
        if stalled {
            st.converged = problem.residuals(&st).max() < cfg.tol;
            break;
        }
    }
    let powers = pull_into_budget(problem, &st.iterate);
    let objective = problem.primal_objective(&powers);
    Ok(DistributedSolution {
        powers,
        state: st,
        rounds,
        objective,
    })
}

/// Removes any overshoot of `p_total`. Users strictly inside their boxes
/// give up power first, in proportion to `p - p_min`, so the boundary
/// structure of the responses is kept; all users share the cut only if the
/// interior ones cannot cover it.
fn pull_into_budget(problem: &ConcaveProblem, powers: &[f64]) -> Vec<f64> {
    let used: f64 = powers.iter().sum();
    let excess = used - problem.p_total;
    if excess <= 0.0 {
        return powers.to_vec();
    }
    let inside: Vec<bool> = problem
        .users
        .iter()
        .zip(powers)
        .map(|(u, &p)| p > u.lower() && p < u.upper())
        .collect();
    let slack = |mask: &dyn Fn(usize) -> bool| -> f64 {
        (0..powers.len())
            .filter(|&k| mask(k))
            .map(|k| powers[k] - problem.users[k].lower())
            .sum()
    };
    let interior = slack(&|k| inside[k]);
    let (pool, use_all) = if interior >= excess { (interior, false) } else { (slack(&|_| true), true) };
    let ratio = if pool > 0.0 { (1.0 - excess / pool).clamp(0.0, 1.0) } else { 0.0 };
    problem
        .users
        .iter()
        .zip(powers)
        .enumerate()
        .map(|(k, (u, &p))| {
            if use_all || inside[k] {
                u.lower() + (p - u.lower()) * ratio
            } else {
                p
            }
        })
        .collect()
}
