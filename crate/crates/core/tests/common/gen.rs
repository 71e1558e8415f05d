//! Random inputs for the library under test. Unlike the parent module these
//! helpers do call into the library, but only to construct problems.

use super::BoxUser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbr_power::channel::{draw_channel, ChannelParams, ChannelState};
use vbr_power::dual::{ConcaveProblem, ConcaveUser};
use vbr_power::rate::{inflection_point, power_for_sinr, PowerBounds};
use vbr_power::traces::{FrameTrace, VideoSession};

pub struct Instance {
    pub problem: ConcaveProblem,
    pub users: Vec<BoxUser>,
    pub pbar: f64,
    pub total: f64,
}

fn concave_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let pbar = rng.random_range(1.0..20.0);
    let mut users = Vec::new();
    let mut concave = Vec::new();
    for _ in 0..n {
        let l = if rng.random_bool(0.5) { 128.0 } else { rng.random_range(4.0..256.0) };
        let a = 10f64.powf(rng.random_range(-3.0..0.5));
        let p_star = inflection_point(l, pbar, a).unwrap();
        let p_th = p_star * rng.random_range(0.2..1.0);
        let p_max = if rng.random_bool(0.5) { p_th } else { p_star * rng.random_range(1.0..1.8) };
        let p_min = p_th * rng.random_range(0.0..0.8);
        let bounds = PowerBounds {
            p_min,
            p_max,
            p_star,
            p_th: p_max.min(p_star),
        };
        users.push(BoxUser {
            l,
            a,
            lo: bounds.p_min,
            hi: bounds.p_th,
        });
        concave.push(ConcaveUser {
            bounds,
            channel: ChannelState::from_quality(a, l).unwrap(),
        });
    }
    let lo: f64 = users.iter().map(|u| u.lo).sum();
    let hi: f64 = users.iter().map(|u| u.hi).sum();
    let total = lo + rng.random_range(0.05..1.2) * (hi - lo);
    Instance {
        problem: ConcaveProblem::new(concave, pbar, total).unwrap(),
        users,
        pbar,
        total,
    }
}

/// Concave-region problems with 2, 3 and 4 users in rotation.
pub fn concave_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| concave_instance(&mut rng, 2 + i % 3)).collect()
}

/// Box for one user from its SINR range, under budget `pbar`.
pub fn bounds_for(l: f64, a: f64, pbar: f64, gamma_min: f64, gamma_max: f64) -> PowerBounds {
    let p_star = inflection_point(l, pbar, a).unwrap();
    let p_max = power_for_sinr(gamma_max, l, pbar, a);
    PowerBounds {
        p_min: power_for_sinr(gamma_min, l, pbar, a).min(p_max),
        p_max,
        p_star,
        p_th: p_max.min(p_star),
    }
}

/// `n` users whose minimum powers fit in `pbar`.
pub fn box_users(rng: &mut ChaCha8Rng, n: usize, l: f64, pbar: f64) -> (Vec<PowerBounds>, Vec<ChannelState>) {
    loop {
        let mut bs = Vec::new();
        let mut cs = Vec::new();
        for _ in 0..n {
            let a = 10f64.powf(rng.random_range(-3.0..0.0));
            let gmax = 10f64.powf(rng.random_range(-1.0..3.0));
            let gmin = gmax * rng.random_range(0.0..0.6);
            bs.push(bounds_for(l, a, pbar, gmin, gmax));
            cs.push(ChannelState::from_quality(a, l).unwrap());
        }
        if bs.iter().map(|b| b.p_min).sum::<f64>() <= pbar {
            return (bs, cs);
        }
    }
}

/// A cell snapshot: sessions part-way through random traces, with channel
/// states drawn at random distances under the default channel model.
pub struct Cell {
    pub sessions: Vec<VideoSession>,
    pub channels: Vec<ChannelState>,
    pub params: ChannelParams,
    /// Slot about to be scheduled.
    pub slot: usize,
}

pub fn random_cell(rng: &mut ChaCha8Rng, n: usize) -> Cell {
    let params = ChannelParams::default();
    let frames = 40;
    let slot = rng.random_range(1..frames);
    let mut sessions = Vec::new();
    let mut channels = Vec::new();
    for _ in 0..n {
        let mean = rng.random_range(5_000.0..30_000.0);
        let sizes: Vec<u64> = (0..frames).map(|_| (mean * rng.random_range(0.3..3.0)) as u64 + 1).collect();
        let trace = FrameTrace::new("r", sizes, 30.0).unwrap();
        let b = trace.max_frame() as f64 * rng.random_range(1.0..3.0);
        let mut s = VideoSession::new(&trace, b).unwrap();
        // walk the schedule to slot - 1 along a random feasible path
        let mut x = 0.0f64;
        for t in 1..slot {
            let target = (s.consumed(t) + rng.random_range(0.0..=1.0) * (s.overflow_limit(t) - s.consumed(t))).max(x);
            s.record_delivery(t, target - x).unwrap();
            x = target;
        }
        sessions.push(s);
        let d = rng.random_range(50.0..600.0);
        channels.push(draw_channel(d, &params, rng).unwrap());
    }
    Cell {
        sessions,
        channels,
        params,
        slot,
    }
}
