//! Per-user channel draws: distances and start offsets from the placement
//! stream, shadowed gains from the fading stream.
//!
//! cargo run --example channel_draws [seed]

use vbr_power::channel::{draw_distance, draw_start_offset, ChannelGenerator, ChannelParams};

fn main() -> vbr_power::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = ChannelParams::default();
    let distances: Vec<f64> = (0..5).map(|n| draw_distance(seed, n, 100.0, 1000.0)).collect();
    let mut gen = ChannelGenerator::new(params, &distances, seed)?;

    for (n, d) in distances.iter().enumerate() {
        println!("user {n}: {d:7.1} m, starts at frame {}", draw_start_offset(seed, n, 10_000));
    }
    for slot in 1..=3 {
        let states = gen.next_slot()?;
        let row: Vec<String> = states.iter().map(|c| format!("{:.3e}", c.quality)).collect();
        println!("slot {slot} A = [{}]", row.join(", "));
    }
    Ok(())
}
