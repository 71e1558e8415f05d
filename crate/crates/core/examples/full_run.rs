//! Slot-by-slot simulation of the 20-user preset, printing a utilization
//! trace and the summary.
//!
//! cargo run --release --example full_run [slots]

use vbr_power::config::RunConfig;
use vbr_power::simulator::Simulation;

fn main() -> vbr_power::Result<()> {
    let slots: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let cfg = RunConfig::from_toml(&format!("slots = {slots}\n"), Some("sec5"))?.build(7)?;
    let mut sim = Simulation::new(cfg)?;
    while let Some(rec) = sim.step()? {
        if rec.slot % 500 == 0 {
            let power: f64 = rec.users.iter().map(|u| u.power).sum();
            let util = rec.users.iter().map(|u| u.utilization).sum::<f64>() / rec.users.len() as f64;
            println!("slot {:5}  {:14}  {power:6.3} W  utilization {util:.3}", rec.slot, rec.path.label());
        }
    }
    print!("{}", sim.summary().to_text());
    Ok(())
}
