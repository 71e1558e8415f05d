//! The three greedy phases on an overloaded slot, with the winner marked.

use vbr_power::channel::ChannelState;
use vbr_power::dual::SolverConfig;
use vbr_power::rate::{power_bounds, SinrBounds};
use vbr_power::step2::run_phases;

fn main() -> vbr_power::Result<()> {
    let budget = 10.0;
    let users = [(2e-4, 0.5, 60.0), (5e-4, 0.2, 200.0), (1e-3, 1.0, 40.0), (0.2, 0.0, 5.0)];
    let mut bounds = Vec::new();
    let mut channels = Vec::new();
    for &(a, gmin, gmax) in &users {
        let c = ChannelState::from_quality(a, 128.0)?;
        let sb = SinrBounds {
            gamma_min: gmin,
            gamma_max: gmax,
            gamma_th: 0.0,
        };
        let mut b = power_bounds(&sb, &c, budget)?;
        b.p_min = b.p_min.min(b.p_max);
        println!("A={a:.0e}  p_min={:.3}  p*={:.3}  p_max={:.3}", b.p_min, b.p_star, b.p_max);
        bounds.push(b);
        channels.push(c);
    }

    let out = run_phases(&bounds, &channels, budget, &SolverConfig::default())?;
    println!("retained {:?}, suspended {:?}", out.triage.retained, out.triage.suspended);
    for c in &out.candidates {
        let mark = if c.phase == out.best().phase { "  <- best" } else { "" };
        let p: Vec<String> = c.allocation.powers.iter().map(|v| format!("{v:.3}")).collect();
        println!("phase {}: {:.5} nats  [{}]{mark}", c.phase.id(), c.objective, p.join(", "));
    }
    Ok(())
}
