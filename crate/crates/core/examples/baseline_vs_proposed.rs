//! Both allocators on the 50-user comparison preset.
//!
//! cargo run --release --example baseline_vs_proposed [slots] [seed]

use vbr_power::config::RunConfig;
use vbr_power::simulator::run;

fn main() -> vbr_power::Result<()> {
    let mut args = std::env::args().skip(1);
    let slots: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    for allocator in ["proposed", "diversity"] {
        let text = format!("allocator = \"{allocator}\"\nslots = {slots}\n");
        let cfg = RunConfig::from_toml(&text, Some("sec5-compare"))?.build(seed)?;
        let (summary, _) = run(cfg)?;
        println!(
            "{allocator:>9}: utilization {:.3}, underflow fraction {:.3}, overflows {}",
            summary.mean_utilization, summary.underflow_fraction, summary.overflow_count
        );
    }
    Ok(())
}
