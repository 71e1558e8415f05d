//! Slot-by-slot driver: bounds, allocation, delivery and run metrics.
//!
//! Every slot all users get a fresh channel draw. Users still streaming
//! with room in their buffers form the slot's problem. The buffer-filling
//! powers are tried first; when they do not exist or do not fit, the
//! configured allocator takes over. Whatever allocation results is then
//! trimmed so that no user's actual SINR exceeds what its buffer can take.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::baseline::{allocate_diversity, equal_split};
use crate::channel::{ChannelGenerator, ChannelParams, ChannelState};
use crate::dual::{RoundRecord, SolverConfig};
use crate::error::{Error, Result};
use crate::rate::{capacity, power_bounds, sinr_all, sinr_bounds, PowerBounds, SinrBounds};
use crate::step1::{build_system, solve_linear, solve_step1, Matrix, Step1Status};
use crate::step2::{run_phases, Phase};
use crate::traces::{BufferEvent, FrameTrace, VideoSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocator {
    #[default]
    Proposed,
    Diversity,
}

impl Allocator {
    pub fn name(self) -> &'static str {
        match self {
            Allocator::Proposed => "proposed",
            Allocator::Diversity => "diversity",
        }
    }
}

impl FromStr for Allocator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Allocator::Proposed),
            "diversity" => Ok(Allocator::Diversity),
            other => Err(Error::config("allocator", format!("expected proposed or diversity, got {other:?}"))),
        }
    }
}

/// How a user's power was decided in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AllocPath {
    Step1Optimal,
    Step2(Phase),
    Baseline,
    Fallback,
    /// Buffer already full; nothing to send.
    Idle,
    /// Every frame has been played out.
    Complete,
}

impl AllocPath {
    pub fn label(self) -> &'static str {
        match self {
            AllocPath::Step1Optimal => "step1_optimal",
            AllocPath::Step2(Phase::One) => "step2_phase1",
            AllocPath::Step2(Phase::Two) => "step2_phase2",
            AllocPath::Step2(Phase::Three) => "step2_phase3",
            AllocPath::Baseline => "baseline",
            AllocPath::Fallback => "fallback",
            AllocPath::Idle => "idle",
            AllocPath::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone)]
pub struct UserSetup {
    /// Trace as played by this user, already rotated to its start frame.
    pub trace: FrameTrace,
    pub distance: f64,
    /// Playout buffer size `b`, bits.
    pub buffer_size: f64,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub users: Vec<UserSetup>,
    pub channel: ChannelParams,
    /// Peak base-station power, Watts.
    pub budget: f64,
    pub gamma_th: f64,
    pub allocator: Allocator,
    pub solver: SolverConfig,
    pub slots: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSlot {
    pub user: usize,
    pub power: f64,
    pub sinr: f64,
    pub delivered: f64,
    /// `X(t) - D(t)`; negative during underflow.
    pub buffer_bits: f64,
    pub utilization: f64,
    pub event: BufferEvent,
    pub path: AllocPath,
}

impl UserSlot {
    fn is_active(&self) -> bool {
        self.path != AllocPath::Complete
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Path taken by the slot's problem as a whole.
    pub path: AllocPath,
    pub users: Vec<UserSlot>,
}

/// Dual-solver log of one slot, with round columns mapped to user ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRounds {
    pub slot: usize,
    pub users: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
}

pub const CSV_HEADER: &str = "slot,user,power_w,sinr,delivered_bits,buffer_bits,utilization,event,path";

impl SlotRecord {
    /// Appends one CSV row per user.
    pub fn write_csv(&self, out: &mut String) {
        for u in &self.users {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                self.slot,
                u.user,
                u.power,
                u.sinr,
                u.delivered,
                u.buffer_bits,
                u.utilization,
                u.event.label(),
                u.path.label()
            );
        }
    }
}

/// Mean utilization over the active users of each slot; slots without
/// active users contribute 0.
pub fn utilization_series(records: &[SlotRecord]) -> Vec<f64> {
    records.iter().map(slot_utilization).collect()
}

fn slot_utilization(r: &SlotRecord) -> f64 {
    let active: Vec<f64> = r.users.iter().filter(|u| u.is_active()).map(|u| u.utilization).collect();
    if active.is_empty() {
        0.0
    } else {
        active.iter().sum::<f64>() / active.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub allocator: Allocator,
    pub users: usize,
    pub total_slots: usize,
    /// Underflowed user-slots over active user-slots.
    pub underflow_fraction: f64,
    /// Slots with at least one underflow over all slots.
    pub underflow_slot_fraction: f64,
    pub underflow_count: usize,
    pub overflow_count: usize,
    pub mean_utilization: f64,
    pub stalls_per_user: Vec<usize>,
    pub path_counts: BTreeMap<String, usize>,
}

impl RunSummary {
    /// `key = value` lines for terminal output.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "allocator = {}", self.allocator.name());
        let _ = writeln!(s, "users = {}", self.users);
        let _ = writeln!(s, "total_slots = {}", self.total_slots);
        let _ = writeln!(s, "underflow_fraction = {}", self.underflow_fraction);
        let _ = writeln!(s, "underflow_slot_fraction = {}", self.underflow_slot_fraction);
        let _ = writeln!(s, "underflow_count = {}", self.underflow_count);
        let _ = writeln!(s, "overflow_count = {}", self.overflow_count);
        let _ = writeln!(s, "mean_utilization = {}", self.mean_utilization);
        for (k, v) in &self.path_counts {
            let _ = writeln!(s, "path.{k} = {v}");
        }
        s
    }
}

#[derive(Debug, Default)]
struct Tally {
    active_user_slots: usize,
    underflows: usize,
    underflow_slots: usize,
    overflows: usize,
    utilization_sum: f64,
    stalls: Vec<usize>,
    paths: BTreeMap<String, usize>,
}

/// A running simulation. Call [`Simulation::step`] until it returns `None`.
#[derive(Debug)]
pub struct Simulation {
    cfg: SimConfig,
    sessions: Vec<VideoSession>,
    channels: ChannelGenerator,
    slot: usize,
    tally: Tally,
    rounds: Option<SlotRounds>,
}

/// What the allocator decided for the slot's demand set.
struct Decision {
    powers: Vec<f64>,
    path: AllocPath,
    rounds: Option<(Vec<usize>, Vec<RoundRecord>)>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        if cfg.users.is_empty() {
            return Err(Error::config("users.count", "must be at least 1"));
        }
        if !(cfg.budget > 0.0) {
            return Err(Error::config("power.peak_power_w", "must be positive"));
        }
        cfg.solver.validate()?;
        let sessions = cfg
            .users
            .iter()
            .map(|u| VideoSession::new(&u.trace, u.buffer_size))
            .collect::<Result<Vec<_>>>()?;
        let distances: Vec<f64> = cfg.users.iter().map(|u| u.distance).collect();
        let channels = ChannelGenerator::new(cfg.channel.clone(), &distances, cfg.seed)?;
        let tally = Tally {
            stalls: vec![0; cfg.users.len()],
            ..Tally::default()
        };
        Ok(Self {
            cfg,
            sessions,
            channels,
            slot: 0,
            tally,
            rounds: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn sessions(&self) -> &[VideoSession] {
        &self.sessions
    }

    /// Dual-solver log of the current slot, if a concave solve ran in it.
    pub fn slot_rounds(&self) -> Option<&SlotRounds> {
        self.rounds.as_ref().filter(|r| r.slot == self.slot)
    }

    /// Runs the next slot, or returns `None` once the configured number of
    /// slots is done.
    pub fn step(&mut self) -> Result<Option<SlotRecord>> {
        if self.slot >= self.cfg.slots {
            return Ok(None);
        }
        self.slot += 1;
        let t = self.slot;
        let n = self.sessions.len();
        let states = self.channels.next_slot()?;
        let bw = self.cfg.channel.bandwidth_hz;

        let mut bounds: Vec<Option<SinrBounds>> = vec![None; n];
        for (k, s) in self.sessions.iter().enumerate() {
            if !s.is_complete() {
                bounds[k] = Some(sinr_bounds(s, s.current_slot() + 1, bw, self.cfg.gamma_th)?);
            }
        }
        let demand: Vec<usize> = (0..n)
            .filter(|&k| bounds[k].is_some_and(|b| b.gamma_max > 0.0))
            .collect();

        let mut powers = vec![0.0; n];
        let mut path = AllocPath::Idle;
        if !demand.is_empty() {
            let sb: Vec<SinrBounds> = demand.iter().map(|&k| bounds[k].expect("demand user")).collect();
            let cs: Vec<ChannelState> = demand.iter().map(|&k| states[k]).collect();
            let decision = self.allocate(&sb, &cs).unwrap_or_else(|_| Decision {
                powers: equal_split(demand.len(), self.cfg.budget),
                path: AllocPath::Fallback,
                rounds: None,
            });
            let gmax: Vec<f64> = sb.iter().map(|b| b.gamma_max).collect();
            let capped = cap_sinr(&decision.powers, &cs, &gmax);
            for (i, &k) in demand.iter().enumerate() {
                powers[k] = capped[i];
            }
            path = decision.path;
            if let Some((members, rounds)) = decision.rounds {
                self.rounds = Some(SlotRounds {
                    slot: t,
                    users: members.into_iter().map(|i| demand[i]).collect(),
                    rounds,
                });
            }
        }

        let gammas = sinr_all(&powers, &states);
        let mut users = Vec::with_capacity(n);
        let mut any_underflow = false;
        for k in 0..n {
            let s = &mut self.sessions[k];
            if bounds[k].is_none() {
                users.push(UserSlot {
                    user: k,
                    power: 0.0,
                    sinr: 0.0,
                    delivered: 0.0,
                    buffer_bits: 0.0,
                    utilization: 0.0,
                    event: BufferEvent::None,
                    path: AllocPath::Complete,
                });
                continue;
            }
            let delivered = capacity(gammas[k], bw) * s.slot_length();
            let ts = s.current_slot() + 1;
            let event = s.record_delivery(ts, delivered)?;
            let user_path = if powers[k] > 0.0 || demand.contains(&k) { path } else { AllocPath::Idle };
            match event {
                BufferEvent::Underflow { .. } => {
                    self.tally.underflows += 1;
                    self.tally.stalls[k] += 1;
                    any_underflow = true;
                }
                BufferEvent::Overflow { .. } => self.tally.overflows += 1,
                BufferEvent::None => {}
            }
            self.tally.active_user_slots += 1;
            users.push(UserSlot {
                user: k,
                power: powers[k],
                sinr: gammas[k],
                delivered,
                buffer_bits: s.buffer_level(ts),
                utilization: s.utilization(ts),
                event,
                path: user_path,
            });
        }
        if any_underflow {
            self.tally.underflow_slots += 1;
        }
        let record = SlotRecord { slot: t, path, users };
        self.tally.utilization_sum += slot_utilization(&record);
        *self.tally.paths.entry(path.label().to_string()).or_default() += 1;
        Ok(Some(record))
    }

    fn allocate(&self, sb: &[SinrBounds], cs: &[ChannelState]) -> Result<Decision> {
        let budget = self.cfg.budget;
        let system = build_system(sb, cs);
        if let Step1Status::Optimal(alloc) = solve_step1(&system, budget)?.status {
            return Ok(Decision {
                powers: alloc.powers,
                path: AllocPath::Step1Optimal,
                rounds: None,
            });
        }
        let pb = sb
            .iter()
            .zip(cs)
            .map(|(b, c)| {
                let mut p = power_bounds(b, c, budget)?;
                p.p_min = p.p_min.min(p.p_max);
                Ok(p)
            })
            .collect::<Result<Vec<PowerBounds>>>()?;
        match self.cfg.allocator {
            Allocator::Proposed => {
                let out = run_phases(&pb, cs, budget, &self.cfg.solver)?;
                let best = out.best();
                let rounds = (!best.rounds.is_empty()).then(|| (best.members.clone(), best.rounds.clone()));
                Ok(Decision {
                    powers: best.allocation.powers.clone(),
                    path: AllocPath::Step2(best.phase),
                    rounds,
                })
            }
            Allocator::Diversity => Ok(Decision {
                powers: allocate_diversity(&pb, cs, budget).powers,
                path: AllocPath::Baseline,
                rounds: None,
            }),
        }
    }

    /// Summary of the slots run so far.
    pub fn summary(&self) -> RunSummary {
        let t = &self.tally;
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        RunSummary {
            allocator: self.cfg.allocator,
            users: self.sessions.len(),
            total_slots: self.slot,
            underflow_fraction: frac(t.underflows, t.active_user_slots),
            underflow_slot_fraction: frac(t.underflow_slots, self.slot),
            underflow_count: t.underflows,
            overflow_count: t.overflows,
            mean_utilization: if self.slot == 0 { 0.0 } else { t.utilization_sum / self.slot as f64 },
            stalls_per_user: t.stalls.clone(),
            path_counts: t.paths.clone(),
        }
    }
}

/// Runs every slot, collecting the records.
pub fn run(cfg: SimConfig) -> Result<(RunSummary, Vec<SlotRecord>)> {
    let mut sim = Simulation::new(cfg)?;
    let mut records = Vec::new();
    while let Some(r) = sim.step()? {
        records.push(r);
    }
    Ok((sim.summary(), records))
}

/// Lowers powers until no user's actual SINR exceeds its cap.
///
/// Users over their cap are moved onto it exactly by solving the SINR
/// equations for that set with everyone else held fixed; this only lowers
/// interference for the others, so the set grows monotonically and the loop
/// ends after at most `n` passes.
pub fn cap_sinr(powers: &[f64], channels: &[ChannelState], gamma_max: &[f64]) -> Vec<f64> {
    let n = powers.len();
    let mut p = powers.to_vec();
    let mut capped = vec![false; n];
    for _ in 0..=n {
        let g = sinr_all(&p, channels);
        let mut grew = false;
        for k in 0..n {
            if !capped[k] && p[k] > 0.0 && g[k] > gamma_max[k] * (1.0 + 1e-12) {
                capped[k] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
        let set: Vec<usize> = (0..n).filter(|&k| capped[k]).collect();
        let free_total: f64 = (0..n).filter(|&k| !capped[k]).map(|k| p[k]).sum();
        let m = set.len();
        let mut a = Matrix::zeros(m);
        let mut rhs = Vec::with_capacity(m);
        for (i, &k) in set.iter().enumerate() {
            let c = &channels[k];
            let f = c.orthogonality * gamma_max[k] / c.proc_gain;
            for j in 0..m {
                a.set(i, j, if i == j { 1.0 } else { -f });
            }
            rhs.push(gamma_max[k] * (c.orthogonality * free_total + c.quality) / c.proc_gain);
        }
        match solve_linear(&a, &rhs) {
            Some(sol) => {
                for (&k, v) in set.iter().zip(sol) {
                    p[k] = v.clamp(0.0, p[k]);
                }
            }
            None => {
                // degenerate system; fall back to a proportional cut
                for &k in &set {
                    if g[k] > 0.0 {
                        p[k] *= gamma_max[k] / g[k];
                    }
                }
            }
        }
    }
    p
}
