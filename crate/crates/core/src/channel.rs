//! Per-slot downlink channel states: distance path loss, log-normal
//! shadowing and thermal noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Link state for one user during one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Path gain `G`.
    pub gain: f64,
    /// Noise power `eta`, Watts.
    pub noise: f64,
    /// Link quality `A = eta / G`, Watts. Smaller is better.
    pub quality: f64,
    /// Processing gain `L`.
    pub proc_gain: f64,
    /// Orthogonality factor `beta`.
    pub orthogonality: f64,
    /// Distance to the base station, meters.
    pub distance: f64,
}

impl ChannelState {
    pub fn new(gain: f64, noise: f64, proc_gain: f64, orthogonality: f64, distance: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::input("gain", format!("must be positive, got {gain}")));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::input("noise", format!("must be positive, got {noise}")));
        }
        if !(proc_gain >= 1.0) {
            return Err(Error::input("proc_gain", format!("must be >= 1, got {proc_gain}")));
        }
        if !(0.0..=1.0).contains(&orthogonality) {
            return Err(Error::input("orthogonality", format!("must lie in [0, 1], got {orthogonality}")));
        }
        Ok(Self {
            gain,
            noise,
            quality: noise / gain,
            proc_gain,
            orthogonality,
            distance,
        })
    }

    /// A state specified directly by its quality ratio (unit gain), handy for
    /// the per-slot optimizers which only ever see `A`, `L` and `beta`.
    pub fn from_quality(quality: f64, proc_gain: f64) -> Result<Self> {
        Self::new(1.0, quality, proc_gain, 1.0, 1.0)
    }
}

/// `k_B * T0 * B_w`, Watts.
pub fn thermal_noise(temperature_k: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::input("temperature_k", format!("must be positive, got {temperature_k}")));
    }
    if !(bandwidth_hz > 0.0) {
        return Err(Error::input("bandwidth_hz", format!("must be positive, got {bandwidth_hz}")));
    }
    Ok(BOLTZMANN * temperature_k * bandwidth_hz)
}

/// Distance-only mean path gain `d^-exponent`.
pub fn path_gain(distance: f64, exponent: f64) -> f64 {
    distance.powf(-exponent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub pathloss_exponent: f64,
    /// Standard deviation of the shadowing term in dB. Zero disables it.
    pub shadow_sigma_db: f64,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
    pub proc_gain: f64,
    pub orthogonality: f64,
    /// Number of consecutive slots a shadowing draw is held for.
    pub coherence_slots: usize,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            pathloss_exponent: 4.0,
            shadow_sigma_db: 8.0,
            temperature_k: 290.0,
            bandwidth_hz: 1e6,
            proc_gain: 128.0,
            orthogonality: 1.0,
            coherence_slots: 1,
        }
    }
}

impl ChannelParams {
    pub fn noise(&self) -> Result<f64> {
        thermal_noise(self.temperature_k, self.bandwidth_hz)
    }
}

fn shadowing_db<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db > 0.0 {
        Normal::new(0.0, sigma_db).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Draws one slot's state for a user at `distance` meters.
pub fn draw_channel<R: Rng + ?Sized>(distance: f64, params: &ChannelParams, rng: &mut R) -> Result<ChannelState> {
    if !(distance > 0.0) {
        return Err(Error::input("distance", format!("must be positive, got {distance}")));
    }
    let s = shadowing_db(params.shadow_sigma_db, rng);
    channel_with_shadowing(distance, s, params)
}

fn channel_with_shadowing(distance: f64, shadow_db: f64, params: &ChannelParams) -> Result<ChannelState> {
    let gain = path_gain(distance, params.pathloss_exponent) * 10f64.powf(shadow_db / 10.0);
    ChannelState::new(
        gain,
        params.noise()?,
        params.proc_gain,
        params.orthogonality,
        distance,
    )
}

/// Independent stream for `(seed, user, purpose)`; stream ids never depend
/// on how many users a run has.
pub fn user_stream(seed: u64, user: usize, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((user as u64) << 1) | purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Placement = 0,
    Fading = 1,
}

/// Uniform distance in `[min, max)` from the user's placement stream.
pub fn draw_distance(seed: u64, user: usize, min_m: f64, max_m: f64) -> f64 {
    let mut rng = user_stream(seed, user, StreamPurpose::Placement);
    if max_m > min_m {
        rng.random_range(min_m..max_m)
    } else {
        min_m
    }
}

/// Uniform start frame in `[0, frames)`, drawn from the placement stream
/// right after the distance.
pub fn draw_start_offset(seed: u64, user: usize, frames: usize) -> usize {
    let mut rng = user_stream(seed, user, StreamPurpose::Placement);
    let _distance_draw: f64 = rng.random();
    if frames > 1 {
        rng.random_range(0..frames)
    } else {
        0
    }
}

/// Produces the channel vector for each slot of a run.
#[derive(Debug)]
pub struct ChannelGenerator {
    params: ChannelParams,
    users: Vec<UserChannel>,
    slot: usize,
}

#[derive(Debug)]
struct UserChannel {
    distance: f64,
    rng: ChaCha8Rng,
    held_db: f64,
}

impl ChannelGenerator {
    pub fn new(params: ChannelParams, distances: &[f64], seed: u64) -> Result<Self> {
        if params.coherence_slots == 0 {
            return Err(Error::config("coherence_slots", "must be at least 1"));
        }
        params.noise()?;
        let users = distances
            .iter()
            .enumerate()
            .map(|(n, &d)| {
                if !(d > 0.0) {
                    return Err(Error::input("distance", format!("user {n}: must be positive, got {d}")));
                }
                Ok(UserChannel {
                    distance: d,
                    rng: user_stream(seed, n, StreamPurpose::Fading),
                    held_db: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { params, users, slot: 0 })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn distances(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.distance).collect()
    }

    /// States for the next slot. Shadowing is redrawn every
    /// `coherence_slots` slots and held constant in between.
    pub fn next_slot(&mut self) -> Result<Vec<ChannelState>> {
        let redraw = self.slot.is_multiple_of(self.params.coherence_slots);
        self.slot += 1;
        let params = &self.params;
        self.users
            .iter_mut()
            .map(|u| {
                if redraw {
                    u.held_db = shadowing_db(params.shadow_sigma_db, &mut u.rng);
                }
                channel_with_shadowing(u.distance, u.held_db, params)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_shadow() -> ChannelParams {
        ChannelParams {
            shadow_sigma_db: 0.0,
            ..ChannelParams::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn path_gain_without_shadowing() {
        let mut rng = user_stream(1, 0, StreamPurpose::Fading);
        let c = draw_channel(100.0, &no_shadow(), &mut rng).unwrap();
        assert!(rel(c.gain, 1e-8) < 1e-12);
        let c = draw_channel(1000.0, &no_shadow(), &mut rng).unwrap();
        assert!(rel(c.gain, 1e-12) < 1e-12);
        assert_eq!(c.quality, c.noise / c.gain);
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = ChannelParams::default();
        let a = draw_channel(500.0, &p, &mut user_stream(42, 3, StreamPurpose::Fading)).unwrap();
        let b = draw_channel(500.0, &p, &mut user_stream(42, 3, StreamPurpose::Fading)).unwrap();
        assert_eq!(a.gain.to_bits(), b.gain.to_bits());
    }

    #[test]
    fn noise_arithmetic() {
        let eta = thermal_noise(290.0, 1e6).unwrap();
        assert!(rel(eta, 4.0038821e-15) < 1e-7, "{eta}");
        assert_eq!(thermal_noise(290.0, 2e6).unwrap(), 2.0 * eta);
        assert!(thermal_noise(0.0, 1e6).is_err());
        assert!(thermal_noise(290.0, -1.0).is_err());
    }

    #[test]
    fn invalid_distance() {
        let mut rng = user_stream(1, 0, StreamPurpose::Fading);
        assert!(draw_channel(0.0, &ChannelParams::default(), &mut rng).is_err());
    }

    #[test]
    fn quality_decreases_with_gain() {
        let a = ChannelState::new(1e-9, 4e-15, 128.0, 1.0, 1.0).unwrap();
        let b = ChannelState::new(2e-9, 4e-15, 128.0, 1.0, 1.0).unwrap();
        assert!(b.quality < a.quality);
    }

    #[test]
    fn user_streams_do_not_depend_on_user_count() {
        let p = ChannelParams::default();
        let mut small = ChannelGenerator::new(p.clone(), &[300.0, 400.0], 9).unwrap();
        let mut large = ChannelGenerator::new(p, &[300.0, 400.0, 500.0, 600.0], 9).unwrap();
        for _ in 0..5 {
            let s = small.next_slot().unwrap();
            let l = large.next_slot().unwrap();
            assert_eq!(s[0], l[0]);
            assert_eq!(s[1], l[1]);
        }
    }

    #[test]
    fn coherence_holds_draws() {
        let p = ChannelParams {
            coherence_slots: 3,
            ..ChannelParams::default()
        };
        let mut g = ChannelGenerator::new(p, &[300.0], 5).unwrap();
        let s: Vec<f64> = (0..6).map(|_| g.next_slot().unwrap()[0].gain).collect();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[1], s[2]);
        assert_ne!(s[2], s[3]);
        assert_eq!(s[3], s[5]);
    }

    #[test]
    fn distances_in_range_and_reproducible() {
        for n in 0..50 {
            let d = draw_distance(11, n, 100.0, 1000.0);
            assert!((100.0..1000.0).contains(&d));
            assert_eq!(d, draw_distance(11, n, 100.0, 1000.0));
        }
    }
}
