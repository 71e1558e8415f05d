//! Channel-quality greedy allocation used as the comparison baseline.

use std::cmp::Ordering;

use crate::channel::ChannelState;
use crate::rate::PowerBounds;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineAllocation {
    pub powers: Vec<f64>,
    /// Users in the order they were funded, best link first.
    pub fill_order: Vec<usize>,
}

/// Funds users in ascending `A` order (ties by index), each up to its
/// `p_max`, until `budget` runs out. Lower bounds are ignored.
pub fn allocate_diversity(bounds: &[PowerBounds], channels: &[ChannelState], budget: f64) -> BaselineAllocation {
    let mut order: Vec<usize> = (0..bounds.len()).collect();
    order.sort_by(|&a, &b| {
        channels[a]
            .quality
            .partial_cmp(&channels[b].quality)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut powers = vec![0.0; bounds.len()];
    let mut remaining = budget.max(0.0);
    for &k in &order {
        let p = bounds[k].p_max.max(0.0).min(remaining);
        powers[k] = p;
        remaining -= p;
    }
    BaselineAllocation {
        powers,
        fill_order: order,
    }
}

/// `budget / n` for each user; the slot fallback when an optimizer fails.
pub fn equal_split(n: usize, budget: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    vec![budget / n as f64; n]
}
