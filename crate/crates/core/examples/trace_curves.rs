//! Consumption and overflow curves for a synthetic trace, and what happens
//! when a near-mean constant-rate schedule is played against them. Scene
//! changes in VBR video make such a schedule stall.
//!
//! cargo run --example trace_curves [profile] [frames]

use vbr_power::traces::{synthetic_trace, BufferEvent, SyntheticProfile, VideoSession};

fn main() -> vbr_power::Result<()> {
    let mut args = std::env::args().skip(1);
    let profile = match args.next() {
        Some(name) => SyntheticProfile::from_name(&name).unwrap_or_else(|| {
            eprintln!("unknown profile {name:?}; try news, movie or sports");
            std::process::exit(2)
        }),
        None => SyntheticProfile::Sports,
    };
    let frames: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);

    let trace = synthetic_trace(profile, frames, 30.0)?;
    let b = 1.5 * trace.max_frame() as f64;
    let mut session = VideoSession::new(&trace, b)?;
    println!(
        "{}: {} frames, mean {:.0} bits, max {} bits, buffer {:.0} bits",
        trace.title(),
        trace.len(),
        trace.total_bits() as f64 / trace.len() as f64,
        trace.max_frame(),
        b
    );

    // a little above the mean rate, with half a buffer sent up front;
    // anything that would spill is held back
    let rate = 1.05 * trace.total_bits() as f64 / trace.len() as f64;
    for t in 1..=session.total_frames() {
        let want = (session.delivered_by(t - 1) + rate).min(session.overflow_limit(t));
        let sent = want - session.delivered_by(t - 1);
        let ev = session.record_delivery(t, if t == 1 { sent + b / 2.0 } else { sent })?;
        if t % 30 == 0 || ev != BufferEvent::None {
            println!(
                "t={t:4}  D={:>10.0}  X={:>10.0}  B={:>10.0}  {}",
                session.consumed(t),
                session.delivered_by(t),
                session.overflow_limit(t),
                ev.label()
            );
        }
    }
    println!("{} buffer events", session.events().len());
    Ok(())
}
