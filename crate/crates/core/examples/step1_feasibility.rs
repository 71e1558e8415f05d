//! Can every user be sent to its overflow curve this slot? Builds the SINR
//! system for a growing set of identical users and reports the spectral
//! radius and the power bill.

use vbr_power::channel::ChannelState;
use vbr_power::rate::SinrBounds;
use vbr_power::step1::{build_system, solve_step1, Step1Status};

fn main() -> vbr_power::Result<()> {
    let budget = 10.0;
    let channel = ChannelState::from_quality(0.05, 128.0)?;
    let target = SinrBounds {
        gamma_min: 0.0,
        gamma_max: 8.0,
        gamma_th: 0.0,
    };
    for n in [1, 4, 8, 12, 16, 20] {
        let sys = build_system(&vec![target; n], &vec![channel; n]);
        let out = solve_step1(&sys, budget)?;
        let verdict = match &out.status {
            Step1Status::Optimal(a) => format!("optimal, {:.4} W", a.total()),
            Step1Status::ExceedsBudget(a) => format!("needs {:.4} W", a.total()),
            Step1Status::InfeasibleSpectral => "infeasible".to_string(),
        };
        println!("{n:2} users  radius {:.4}  {verdict}", out.spectral_radius.value);
    }
    Ok(())
}
