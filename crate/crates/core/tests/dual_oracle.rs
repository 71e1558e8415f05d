mod common;

use common::gen::concave_instances as instances;
use common::{projected_gradient, reduced_rate_slope};
use vbr_power::dual::{solve_distributed, SolverConfig};

#[test]
fn matches_projected_gradient_oracle() {
    let cfg = SolverConfig::default();
    for (i, inst) in instances(200, 2024).iter().enumerate() {
        let sol = solve_distributed(&inst.problem, &cfg).unwrap();
        assert!(sol.converged(), "instance {i}: not converged after {} rounds", sol.rounds.len());
        let res = inst.problem.residuals(&sol.state).max();
        assert!(res < 1e-6, "instance {i}: residual {res}");
        let (_, oracle) = projected_gradient(&inst.users, inst.pbar, inst.total, 200_000);
        assert!(
            (sol.objective - oracle).abs() < 1e-5,
            "instance {i}: solver {} oracle {}",
            sol.objective,
            oracle
        );
        let used: f64 = sol.powers.iter().sum();
        assert!(used <= inst.total * (1.0 + 1e-12));
        for (p, u) in sol.powers.iter().zip(&inst.users) {
            assert!(*p >= u.lo && *p <= u.hi);
        }
    }
}

#[test]
fn interior_users_share_a_marginal_rate() {
    let cfg = SolverConfig::default();
    for inst in instances(60, 77) {
        let sol = solve_distributed(&inst.problem, &cfg).unwrap();
        let edge = 1e-9 * inst.pbar;
        let slopes: Vec<f64> = sol
            .powers
            .iter()
            .zip(&inst.users)
            .filter(|(p, u)| **p > u.lo + edge && **p < u.hi - edge)
            .map(|(p, u)| reduced_rate_slope(*p, u.l, u.a, inst.pbar))
            .collect();
        for s in &slopes {
            assert!((s - slopes[0]).abs() <= 1e-5 * slopes[0], "{slopes:?}");
        }
    }
}

#[test]
fn dual_value_bounds_primal() {
    let cfg = SolverConfig::default();
    for inst in instances(40, 5) {
        let sol = solve_distributed(&inst.problem, &cfg).unwrap();
        for r in &sol.rounds {
            // weak duality holds for every feasible primal point
            assert!(r.dual_objective >= sol.objective - 1e-9, "{} < {}", r.dual_objective, sol.objective);
        }
    }
}
