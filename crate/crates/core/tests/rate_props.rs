mod common;

use common::{bisect, central_difference, reduced_rate, second_difference};
use proptest::prelude::*;
use vbr_power::channel::ChannelState;
use vbr_power::rate::{
    capacity, capacity_derivatives, capacity_gain, concave_capacity, convex_region_bound, inflection_point,
    power_for_sinr, reduced_sinr, sinr, sinr_all, sinr_bounds,
};
use vbr_power::traces::{FrameTrace, VideoSession};

fn channels() -> impl Strategy<Value = Vec<ChannelState>> {
    prop::collection::vec((1e-14f64..1e-6, 1e-16f64..1e-13, 3.0f64..256.0, 0.0f64..=1.0), 1..12).prop_map(|v| {
        v.into_iter()
            .map(|(g, eta, l, beta)| ChannelState::new(g, eta, l, beta, 100.0).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn scaling_all_powers_raises_every_sinr(
        cs in channels(),
        seed in prop::collection::vec(0.01f64..10.0, 12),
        kappa in prop::sample::select(vec![1.1, 2.0, 10.0]),
    ) {
        let p: Vec<f64> = seed[..cs.len()].to_vec();
        let scaled: Vec<f64> = p.iter().map(|v| v * kappa).collect();
        let before = sinr_all(&p, &cs);
        let after = sinr_all(&scaled, &cs);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a > b, "{} !> {}", a, b);
        }
    }

    #[test]
    fn power_for_sinr_inverts_reduced_map(gamma in 1e-6f64..1e6, l in 3.0f64..256.0, a in 1e-4f64..2.0, pbar in 0.5f64..50.0) {
        let c = ChannelState::from_quality(a, l).unwrap();
        let p = power_for_sinr(gamma, l, pbar, a);
        prop_assert!(p > 0.0 && p < pbar + a);
        let back = reduced_sinr(p, &c, pbar);
        prop_assert!((back / gamma - 1.0).abs() < 1e-9, "{} vs {}", back, gamma);
    }

    #[test]
    fn gain_is_a_difference_of_capacities(l in 3.0f64..256.0, a in 1e-4f64..2.0, u in 0.0f64..0.99, v in 0.0f64..0.99) {
        let pbar = 10.0;
        let c = ChannelState::from_quality(a, l).unwrap();
        let (from, to) = (u * pbar, v * pbar);
        let direct = reduced_rate(to, l, a, pbar) - reduced_rate(from, l, a, pbar);
        let g = capacity_gain(from, to, &c, pbar);
        prop_assert!((g - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "{} vs {}", g, direct);
        prop_assert!((concave_capacity(from, &c, pbar) - reduced_rate(from, l, a, pbar)).abs() < 1e-12 * (1.0 + reduced_rate(from, l, a, pbar)));
    }

    #[test]
    fn derivatives_match_differences(l in 3.0f64..256.0, a in 1e-3f64..2.0, u in 0.05f64..0.9) {
        let pbar = 10.0;
        let c = ChannelState::from_quality(a, l).unwrap();
        let p = u * pbar;
        let (d1, d2) = capacity_derivatives(p, &c, pbar);
        let f = |x: f64| reduced_rate(x, l, a, pbar);
        let fd1 = central_difference(f, p, 1e-5);
        prop_assert!((d1 - fd1).abs() <= 1e-6 * d1.abs(), "{} vs {}", d1, fd1);
        let fd2 = second_difference(f, p, 1e-3);
        prop_assert!((d2 - fd2).abs() <= 1e-4 * d1.abs(), "{} vs {}", d2, fd2);
    }
}

#[test]
fn sinr_hand_values() {
    let c = ChannelState::new(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
    assert_eq!(sinr(&[1.0, 1.0], &[c, c], 0), 1.0);
    let half = ChannelState::new(1.0, 1.0, 2.0, 0.5, 1.0).unwrap();
    assert_eq!(sinr(&[1.0, 1.0], &[half, half], 0), 2.0 / 1.5);
}

#[test]
fn inflection_changes_curvature_sign() {
    for &(l, a, pbar) in &[(3.0, 0.0001, 1.0), (128.0, 0.004, 10.0), (40.0, 1.0, 5.0)] {
        let c = ChannelState::from_quality(a, l).unwrap();
        let p_star = inflection_point(l, pbar, a).unwrap();
        let root = bisect(|p| capacity_derivatives(p, &c, pbar).1, 1e-9, (pbar + a) * (1.0 - 1e-9), 200);
        assert!((root - p_star).abs() < 1e-9 * (pbar + a), "{root} vs {p_star}");
    }
    assert!(inflection_point(2.0, 10.0, 0.1).is_err());
    assert_eq!(convex_region_bound(0.0, 10.0), 4.0);
}

#[test]
fn bounds_invert_to_buffer_edges() {
    let t = FrameTrace::new("x", vec![30_000, 10_000, 50_000, 20_000], 30.0).unwrap();
    let mut s = VideoSession::new(&t, 75_000.0).unwrap();
    let bw = 1e6;
    for step in 1..=4 {
        let b = sinr_bounds(&s, step, bw, 0.0).unwrap();
        assert!(b.is_feasible());
        let x_prev = s.delivered_by(step - 1);
        let to_max = capacity(b.gamma_max, bw) * s.slot_length();
        let to_min = capacity(b.gamma_min, bw) * s.slot_length();
        let b_t = s.overflow_limit(step);
        let d_t = s.consumed(step);
        assert!((x_prev + to_max - b_t).abs() <= 1e-9 * b_t);
        assert!((x_prev + to_min - d_t.max(x_prev)).abs() <= 1e-9 * b_t);
        s.record_delivery(step, 0.5 * (to_min + to_max)).unwrap();
    }
    // a threshold above the deficit SINR raises the floor
    let s = VideoSession::new(&t, 75_000.0).unwrap();
    let b = sinr_bounds(&s, 1, bw, 5.0).unwrap();
    assert_eq!(b.gamma_min, 5.0f64.max(b.gamma_min));
    assert!(sinr_bounds(&s, 2, bw, 0.0).is_err());
}
