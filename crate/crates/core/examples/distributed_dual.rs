//! Price-and-respond rounds of the distributed solver on a small concave
//! problem.

use vbr_power::channel::ChannelState;
use vbr_power::dual::{solve_distributed, ConcaveProblem, ConcaveUser, SolverConfig};
use vbr_power::rate::{inflection_point, PowerBounds};

fn main() -> vbr_power::Result<()> {
    let budget = 10.0;
    let users = [1e-3, 5e-3, 2e-2, 0.1]
        .iter()
        .map(|&a| {
            let p_star = inflection_point(128.0, budget, a)?;
            Ok(ConcaveUser {
                bounds: PowerBounds {
                    p_min: 0.2,
                    p_max: p_star,
                    p_star,
                    p_th: p_star,
                },
                channel: ChannelState::from_quality(a, 128.0)?,
            })
        })
        .collect::<vbr_power::Result<Vec<_>>>()?;
    let problem = ConcaveProblem::new(users, budget, 6.0)?;
    let sol = solve_distributed(&problem, &SolverConfig::default())?;

    for r in &sol.rounds {
        let p: Vec<String> = r.powers.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "round {:3}  nu={:.5}  primal={:.6}  dual={:.6}  residual={:.1e}  [{}]",
            r.round,
            r.nu,
            r.primal_objective,
            r.dual_objective,
            r.residual,
            p.join(", ")
        );
    }
    println!("converged: {}, objective {:.6} nats", sol.converged(), sol.objective);
    Ok(())
}
