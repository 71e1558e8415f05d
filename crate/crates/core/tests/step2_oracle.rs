mod common;

use common::gen::box_users;
use common::{grid_three, reduced_rate_slope, BoxUser};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbr_power::channel::ChannelState;
use vbr_power::dual::SolverConfig;
use vbr_power::rate::PowerBounds;
use vbr_power::step2::{marginal_rate, run_phases};

const PBAR: f64 = 10.0;

fn random_users(rng: &mut ChaCha8Rng, n: usize, l: f64) -> (Vec<PowerBounds>, Vec<ChannelState>) {
    box_users(rng, n, l, PBAR)
}

#[test]
fn three_users_against_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = SolverConfig::default();
    let mut phases = std::collections::BTreeSet::new();
    let mut i = 0;
    while i < 200 {
        let l = 128.0;
        let (bs, cs) = random_users(&mut rng, 3, l);
        if bs.iter().map(|b| b.p_max).sum::<f64>() <= PBAR {
            continue;
        }
        i += 1;
        let out = run_phases(&bs, &cs, PBAR, &cfg).unwrap();
        let users: [BoxUser; 3] = std::array::from_fn(|k| BoxUser {
            l,
            a: cs[k].quality,
            lo: bs[k].p_min,
            hi: bs[k].p_max,
        });
        let grid = grid_three(&users, PBAR, 1e-3 * PBAR);
        let got = out.best().objective;
        assert!(got >= grid - 1e-3, "instance {i}: phases {got} grid {grid} L {l} A {:?} ({bs:?})", cs.iter().map(|c| c.quality).collect::<Vec<_>>());
        phases.insert(out.best().phase);
    }
    assert!(phases.len() >= 2, "only {phases:?} won");
}

#[test]
fn all_concave_satisfies_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = SolverConfig::default();
    let mut checked = 0;
    while checked < 40 {
        let n = rng.random_range(2..7);
        let (bs, cs) = random_users(&mut rng, n, 128.0);
        // keep every box strictly below the inflection point
        let bs: Vec<PowerBounds> = bs
            .iter()
            .map(|b| {
                let top = b.p_max.min(0.95 * b.p_star);
                PowerBounds {
                    p_min: b.p_min.min(0.5 * top),
                    p_max: top,
                    p_th: top,
                    ..*b
                }
            })
            .collect();
        if bs.iter().map(|b| b.p_max).sum::<f64>() <= PBAR {
            continue;
        }
        checked += 1;
        let out = run_phases(&bs, &cs, PBAR, &cfg).unwrap();
        let p = &out.best().allocation.powers;
        let edge = 1e-9 * PBAR;
        let slopes: Vec<f64> = (0..n)
            .filter(|&k| p[k] > bs[k].p_min + edge && p[k] < bs[k].p_max - edge)
            .map(|k| reduced_rate_slope(p[k], 128.0, cs[k].quality, PBAR))
            .collect();
        for s in &slopes {
            assert!((s - slopes[0]).abs() <= 1e-5 * slopes[0], "{slopes:?}");
        }
    }
}

#[test]
fn rate_is_bracketed_by_endpoint_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (bs, cs) = random_users(&mut rng, 1, 128.0);
        let b = &bs[0];
        let a = cs[0].quality;
        let gap = rng.random_range(0.0..PBAR);
        let from = b.p_min;
        let to = b.p_max.min(from + gap);
        let r = marginal_rate(from, gap, b, &cs[0], PBAR);
        if to <= b.p_star {
            // concave stretch: the secant lies between the end slopes
            let (d_to, d_from) = (reduced_rate_slope(to, 128.0, a, PBAR), reduced_rate_slope(from, 128.0, a, PBAR));
            assert!(r <= d_from * (1.0 + 1e-9) && r >= d_to * (1.0 - 1e-9), "{d_to} {r} {d_from}");
        }
        if gap == 0.0 || to == from {
            assert_eq!(r, vbr_power::rate::capacity_derivatives(from, &cs[0], PBAR).0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_invariants(seed in any::<u64>(), n in 1usize..7, low_gain in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = if low_gain { 3.5 } else { 128.0 };
        let (bs, cs) = random_users(&mut rng, n, l);
        let out = run_phases(&bs, &cs, PBAR, &SolverConfig::default()).unwrap();
        let best = out.best();
        for c in &out.candidates {
            prop_assert!(best.objective >= c.objective);
        }
        let p = &best.allocation.powers;
        let total: f64 = p.iter().sum();
        prop_assert!(total <= PBAR + 1e-9);
        for &k in &out.triage.retained {
            prop_assert!(p[k] >= bs[k].p_min && p[k] <= bs[k].p_max, "user {}: {} not in [{}, {}]", k, p[k], bs[k].p_min, bs[k].p_max);
        }
        let all_full = (0..n).all(|k| p[k] >= bs[k].p_max);
        if !all_full {
            prop_assert!(((total - PBAR) / PBAR).abs() < 1e-9, "total {}", total);
        }
    }
}
