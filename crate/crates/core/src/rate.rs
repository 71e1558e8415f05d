//! Pointwise SINR and capacity math.
//!
//! Capacities use the natural logarithm throughout, so a link with SINR
//! `gamma` carries `B_w * ln(1 + gamma)` units per second and a slot of
//! length `tau` moves `B_w * tau * ln(1 + gamma)` of them. Buffer curves are
//! accounted in the same units, which makes the bound inversions below exact
//! identities.
//!
//! When the whole budget `P` is in use, the SINR of user `n` depends only on
//! its own power: `gamma = L p / (P - p + A)`. [`concave_capacity`] and
//! [`capacity_derivatives`] work in that reduced form.

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::traces::VideoSession;

/// Relative tolerance for boundary comparisons.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBounds {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_th: f64,
}

impl SinrBounds {
    pub fn is_feasible(&self) -> bool {
        self.gamma_min <= self.gamma_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBounds {
    pub p_min: f64,
    pub p_max: f64,
    /// Inflection point of the reduced capacity curve.
    pub p_star: f64,
    /// `min(p_max, p_star)`, the top of the concave-region box.
    pub p_th: f64,
}

impl PowerBounds {
    /// True when the box reaches past the inflection point.
    pub fn reaches_convex(&self) -> bool {
        self.p_max > self.p_star
    }
}

/// Per-user transmit powers for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub budget: f64,
}

impl PowerAllocation {
    pub fn new(powers: Vec<f64>, budget: f64) -> Result<Self> {
        let alloc = Self { powers, budget };
        alloc.validate()?;
        Ok(alloc)
    }

    pub fn zeros(n: usize, budget: f64) -> Self {
        Self {
            powers: vec![0.0; n],
            budget,
        }
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.powers.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::input("powers", format!("negative or NaN entry {p}")));
        }
        if self.total() > self.budget * (1.0 + REL_TOL) {
            return Err(Error::input(
                "powers",
                format!("total {} W exceeds budget {} W", self.total(), self.budget),
            ));
        }
        Ok(())
    }
}

/// Downlink SINR of user `n` under the interference model
/// `L_n G_n P_n / (beta * sum_{k != n} G_n P_k + eta_n)`.
pub fn sinr(powers: &[f64], channels: &[ChannelState], n: usize) -> f64 {
    let c = &channels[n];
    let others: f64 = powers.iter().sum::<f64>() - powers[n];
    let others = others.max(0.0);
    c.proc_gain * c.gain * powers[n] / (c.orthogonality * c.gain * others + c.noise)
}

pub fn sinr_all(powers: &[f64], channels: &[ChannelState]) -> Vec<f64> {
    (0..powers.len()).map(|n| sinr(powers, channels, n)).collect()
}

/// `B_w * ln(1 + gamma)`.
pub fn capacity(gamma: f64, bandwidth: f64) -> f64 {
    bandwidth * gamma.ln_1p()
}

/// SINR that moves exactly `amount` in one slot: `exp(amount / (B_w tau)) - 1`.
pub fn sinr_for_amount(amount: f64, bandwidth: f64, slot_length: f64) -> f64 {
    (amount / (bandwidth * slot_length)).exp_m1()
}

/// Feasible SINR interval at slot `t`, given the session's `X(t-1)`.
pub fn sinr_bounds(session: &VideoSession, t: usize, bandwidth: f64, gamma_th: f64) -> Result<SinrBounds> {
    if t == 0 || t > session.total_frames() {
        return Err(Error::SlotOutOfRange {
            slot: t,
            total: session.total_frames(),
        });
    }
    if t != session.current_slot() + 1 {
        return Err(Error::InconsistentState {
            slot: t,
            reason: format!("session is at slot {}", session.current_slot()),
        });
    }
    let x_prev = session.delivered_by(t - 1);
    let tau = session.slot_length();
    let deficit = (session.consumed(t) - x_prev).max(0.0);
    let room = session.overflow_limit(t) - x_prev;
    if room < -REL_TOL * session.overflow_limit(t).max(1.0) {
        return Err(Error::InconsistentState {
            slot: t,
            reason: format!("X(t-1) = {x_prev} already exceeds B(t) by {}", -room),
        });
    }
    let gamma_min = sinr_for_amount(deficit, bandwidth, tau).max(gamma_th);
    let gamma_max = sinr_for_amount(room.max(0.0), bandwidth, tau);
    Ok(SinrBounds {
        gamma_min,
        gamma_max,
        gamma_th,
    })
}

/// Power `p` with `L p / (P - p + A) = gamma`, i.e. `gamma (P + A) / (L + gamma)`.
/// Saturates at `P + A` for infinite `gamma`.
pub fn power_for_sinr(gamma: f64, proc_gain: f64, budget: f64, quality: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    (budget + quality) / (1.0 + proc_gain / gamma)
}

/// `(L - 2) / (2 (L - 1)) * (P + A)`.
pub fn inflection_point(proc_gain: f64, budget: f64, quality: f64) -> Result<f64> {
    if !(proc_gain > 2.0) {
        return Err(Error::ProcessingGain(proc_gain));
    }
    Ok((proc_gain - 2.0) / (2.0 * (proc_gain - 1.0)) * (budget + quality))
}

pub fn power_bounds(bounds: &SinrBounds, channel: &ChannelState, budget: f64) -> Result<PowerBounds> {
    if !(budget > 0.0) {
        return Err(Error::input("budget", format!("must be positive, got {budget}")));
    }
    let l = channel.proc_gain;
    let a = channel.quality;
    let p_star = inflection_point(l, budget, a)?;
    let p_min = power_for_sinr(bounds.gamma_min, l, budget, a);
    let p_max = power_for_sinr(bounds.gamma_max, l, budget, a);
    Ok(PowerBounds {
        p_min,
        p_max,
        p_star,
        p_th: p_max.min(p_star),
    })
}

/// SINR of a user holding `p` of a fully used budget.
pub fn reduced_sinr(p: f64, channel: &ChannelState, budget: f64) -> f64 {
    channel.proc_gain * p / (budget - p + channel.quality)
}

/// `ln(1 + L p / (P - p + A))` in nats, written as a single log ratio.
pub fn concave_capacity(p: f64, channel: &ChannelState, budget: f64) -> f64 {
    let s = budget + channel.quality;
    let l = channel.proc_gain;
    ((s + (l - 1.0) * p) / (s - p)).ln()
}

/// `C(to) - C(from)` for the reduced capacity, evaluated without the
/// cancellation of subtracting two logs.
pub fn capacity_gain(from: f64, to: f64, channel: &ChannelState, budget: f64) -> f64 {
    let s = budget + channel.quality;
    let l = channel.proc_gain;
    let delta = to - from;
    ((l - 1.0) * delta / (s + (l - 1.0) * from)).ln_1p() + (delta / (s - to)).ln_1p()
}

/// First and second derivatives of [`concave_capacity`] with respect to `p`.
pub fn capacity_derivatives(p: f64, channel: &ChannelState, budget: f64) -> (f64, f64) {
    let s = budget + channel.quality;
    let l = channel.proc_gain;
    let first = l * s / ((s - p) * (s + (l - 1.0) * p));
    let denom = (s - p) * (s - p) + l * p * (s - p);
    let second = -l * ((l - 2.0) * s + 2.0 * (1.0 - l) * p) * s / (denom * denom);
    (first, second)
}

/// Smallest processing gain for which at most two links can sit past their
/// inflection points: `(4P + 6A) / (P + 3A)`.
pub fn convex_region_bound(quality: f64, budget: f64) -> f64 {
    (4.0 * budget + 6.0 * quality) / (budget + 3.0 * quality)
}

/// Sum of reduced capacities over `members`.
pub fn reduced_objective(powers: &[f64], channels: &[ChannelState], budget: f64, members: &[usize]) -> f64 {
    members
        .iter()
        .map(|&n| concave_capacity(powers[n], &channels[n], budget))
        .sum()
}
