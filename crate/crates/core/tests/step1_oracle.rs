mod common;

use common::gen::random_cell;
use common::row_constant_radius;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vbr_power::channel::ChannelState;
use vbr_power::rate::{capacity, sinr_all, sinr_bounds, SinrBounds};
use vbr_power::step1::{
    build_system, radius_below, solve_linear, solve_step1, spectral_radius, Matrix, Step1Status,
};

fn unit(l: f64) -> ChannelState {
    ChannelState::new(1.0, 1.0, l, 1.0, 1.0).unwrap()
}

fn upper(g: f64) -> SinrBounds {
    SinrBounds {
        gamma_min: 0.0,
        gamma_max: g,
        gamma_th: 0.0,
    }
}

#[test]
fn optimal_step_fills_every_buffer() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut optimal = 0;
    let mut tried = 0;
    while optimal < 100 {
        tried += 1;
        assert!(tried < 5_000, "only {optimal} optimal instances");
        let n = rng.random_range(1..=10);
        let mut cell = random_cell(&mut rng, n);
        let bw = cell.params.bandwidth_hz;
        let bounds: Vec<SinrBounds> = cell
            .sessions
            .iter()
            .map(|s| sinr_bounds(s, cell.slot, bw, 0.0).unwrap())
            .collect();
        let sys = build_system(&bounds, &cell.channels);
        let out = solve_step1(&sys, 10.0).unwrap();
        let Some(alloc) = out.optimal() else { continue };
        optimal += 1;
        let g = sinr_all(&alloc.powers, &cell.channels);
        for (k, s) in cell.sessions.iter_mut().enumerate() {
            let sent = capacity(g[k], bw) * s.slot_length();
            s.record_delivery(cell.slot, sent).unwrap();
            let (x, b) = (s.transmitted()[cell.slot], s.overflow_limit(cell.slot));
            assert!((x - b).abs() < 1e-6 * b, "user {k}: X {x} B {b}");
        }
    }
}

#[test]
fn row_constant_matrices_match_the_secular_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(2..12);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { c[i] }).collect())
            .collect();
        let got = spectral_radius(&Matrix::from_rows(&rows), 1e-12, 100_000);
        let want = row_constant_radius(&c);
        assert!(got.converged);
        assert!(got.lower <= want * (1.0 + 1e-12) && got.upper >= want * (1.0 - 1e-12));
        assert!((got.value - want).abs() <= 1e-9 * want, "{} vs {want}", got.value);
        // the early exit agrees on which side of one the radius falls
        let quick = radius_below(&Matrix::from_rows(&rows), 1.0, 1e-12, 100_000);
        assert_eq!(quick.upper < 1.0, want < 1.0);
    }
}

#[test]
fn hand_worked_two_by_two() {
    let sys = build_system(&[upper(1.0), upper(1.0)], &[unit(2.0), unit(2.0)]);
    assert_eq!(sys.matrix, Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]));
    assert_eq!(sys.rhs, vec![0.5, 0.5]);
    let out = solve_step1(&sys, 10.0).unwrap();
    assert_eq!(out.optimal().unwrap().powers, vec![1.0, 1.0]);
    let i_minus_f = Matrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]);
    assert_eq!(solve_linear(&i_minus_f, &[0.5, 0.5]).unwrap(), vec![1.0, 1.0]);
    // the same targets with a budget below 2 W are solvable but over budget
    assert!(matches!(solve_step1(&sys, 1.5).unwrap().status, Step1Status::ExceedsBudget(_)));
}

#[test]
fn unit_radius_is_infeasible() {
    // gamma = L puts the off-diagonal entries at exactly one
    let sys = build_system(&[upper(2.0), upper(2.0)], &[unit(2.0), unit(2.0)]);
    let out = solve_step1(&sys, 1e9).unwrap();
    assert_eq!(out.status, Step1Status::InfeasibleSpectral);
    assert!((spectral_radius(&sys.matrix, 1e-12, 1000).value - 1.0).abs() < 1e-12);
    // a hair below one is still solvable
    let sys = build_system(&[upper(1.99), upper(1.99)], &[unit(2.0), unit(2.0)]);
    assert!(solve_step1(&sys, 1e9).unwrap().optimal().is_some());
}

#[test]
fn idle_users_get_no_power() {
    let sys = build_system(&[upper(1.0), upper(0.0), upper(1.0)], &[unit(2.0); 3]);
    assert_eq!(sys.members, vec![0, 2]);
    let p = solve_step1(&sys, 10.0).unwrap().optimal().unwrap().powers.clone();
    assert_eq!(p, vec![1.0, 0.0, 1.0]);
}
