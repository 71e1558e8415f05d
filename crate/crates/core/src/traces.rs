//! Frame-size traces and the cumulative curves of the deterministic VBR model.
//!
//! A session is described by three nondecreasing curves indexed by slot
//! `t = 0..=T`:
//!
//! * `D(t)`: bits consumed by the decoder by the end of slot `t`,
//! * `B(t) = min(D(t-1) + b, D(T))`: the most bits the client can hold
//!   without overflowing a playout buffer of `b` bits,
//! * `X(t)`: bits actually delivered so far.
//!
//! A schedule is feasible when `D(t) <= X(t) <= B(t)` for every slot.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Relative tolerance used when classifying a delivery as under- or overflow.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Unit of the integers stored in a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeUnit {
    #[default]
    Bits,
    Bytes,
}

impl SizeUnit {
    fn multiplier(self) -> u64 {
        match self {
            SizeUnit::Bits => 1,
            SizeUnit::Bytes => 8,
        }
    }
}

impl std::str::FromStr for SizeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(SizeUnit::Bits),
            "bytes" => Ok(SizeUnit::Bytes),
            other => Err(Error::input("unit", format!("expected bits or bytes, got {other:?}"))),
        }
    }
}

/// Per-frame sizes of a stored video, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    title: String,
    frame_sizes: Vec<u64>,
    frame_rate: f64,
}

impl FrameTrace {
    pub fn new(title: impl Into<String>, frame_sizes: Vec<u64>, frame_rate: f64) -> Result<Self> {
        let title = title.into();
        if frame_sizes.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(idx) = frame_sizes.iter().position(|&s| s == 0) {
            return Err(Error::TraceParse {
                title,
                line: idx + 1,
                reason: "frame size must be positive".into(),
            });
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::input("frame_rate", format!("must be positive, got {frame_rate}")));
        }
        Ok(Self {
            title,
            frame_sizes,
            frame_rate,
        })
    }

    /// Parses the plain-text trace format: one integer frame size per line,
    /// with an optional `# fps=<float> unit=<bits|bytes>` header. Blank lines
    /// and other `#` comments are skipped. Header values override the
    /// defaults passed in.
    pub fn parse(
        title: impl Into<String>,
        text: &str,
        default_unit: SizeUnit,
        default_fps: f64,
    ) -> Result<Self> {
        let title = title.into();
        let mut unit = default_unit;
        let mut fps = default_fps;
        let mut sizes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for token in comment.split_whitespace() {
                    let err = |reason: String| Error::TraceParse {
                        title: title.clone(),
                        line: idx + 1,
                        reason,
                    };
                    if let Some(v) = token.strip_prefix("fps=") {
                        fps = v.parse().map_err(|_| err(format!("bad fps {v:?}")))?;
                    } else if let Some(v) = token.strip_prefix("unit=") {
                        unit = v.parse().map_err(|_| err(format!("bad unit {v:?}")))?;
                    }
                }
                continue;
            }
            let size: u64 = line.parse().map_err(|_| Error::TraceParse {
                title: title.clone(),
                line: idx + 1,
                reason: format!("expected a nonnegative integer, got {line:?}"),
            })?;
            sizes.push(size * unit.multiplier());
        }
        Self::new(title, sizes, fps)
    }

    pub fn from_file(path: &Path, default_unit: SizeUnit, default_fps: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let title = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(title, &text, default_unit, default_fps)
    }

    /// Serializes in the text format accepted by [`FrameTrace::parse`], in bits.
    pub fn to_text(&self) -> String {
        let mut out = format!("# fps={} unit=bits\n", self.frame_rate);
        for s in &self.frame_sizes {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn frame_sizes(&self) -> &[u64] {
        &self.frame_sizes
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frame_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_sizes.is_empty()
    }

    pub fn max_frame(&self) -> u64 {
        self.frame_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn total_bits(&self) -> u64 {
        self.frame_sizes.iter().sum()
    }

    /// Cyclic rotation so that playback starts at frame `offset`.
    pub fn rotated(&self, offset: usize) -> FrameTrace {
        let k = offset % self.frame_sizes.len();
        let mut sizes = Vec::with_capacity(self.frame_sizes.len());
        sizes.extend_from_slice(&self.frame_sizes[k..]);
        sizes.extend_from_slice(&self.frame_sizes[..k]);
        FrameTrace {
            title: self.title.clone(),
            frame_sizes: sizes,
            frame_rate: self.frame_rate,
        }
    }
}

/// Cumulative consumption curve: `D(0) = 0`, `D(t) = sum of frames 1..=t`.
pub fn build_consumption(trace: &FrameTrace) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut curve = Vec::with_capacity(trace.len() + 1);
    let mut acc = 0u64;
    curve.push(0.0);
    for &s in trace.frame_sizes() {
        acc += s;
        curve.push(acc as f64);
    }
    Ok(curve)
}

/// Cumulative overflow curve `B(t) = min(D(t-1) + b, D(T))` with `D(-1) = 0`.
pub fn build_overflow(consumption: &[f64], buffer_size: f64) -> Result<Vec<f64>> {
    if consumption.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(buffer_size > 0.0) {
        return Err(Error::input("buffer_size", format!("must be positive, got {buffer_size}")));
    }
    let total = *consumption.last().unwrap();
    Ok((0..consumption.len())
        .map(|t| {
            let prev = if t == 0 { 0.0 } else { consumption[t - 1] };
            (prev + buffer_size).min(total)
        })
        .collect())
}

/// Outcome of one slot's delivery against the feasibility corridor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BufferEvent {
    None,
    /// The client ran short of `deficit` bits (a stall).
    Underflow { deficit: f64 },
    /// The client received `excess` bits more than its buffer could hold.
    Overflow { excess: f64 },
}

impl BufferEvent {
    pub fn is_none(&self) -> bool {
        matches!(self, BufferEvent::None)
    }

    pub fn label(&self) -> &'static str {
        match self {
            BufferEvent::None => "none",
            BufferEvent::Underflow { .. } => "underflow",
            BufferEvent::Overflow { .. } => "overflow",
        }
    }
}

impl fmt::Display for BufferEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One user's stream: immutable `D`/`B` curves plus the running `X` curve.
#[derive(Debug, Clone)]
pub struct VideoSession {
    consumption: Arc<[f64]>,
    overflow: Arc<[f64]>,
    transmitted: Vec<f64>,
    buffer_size: f64,
    slot_length: f64,
    events: Vec<(usize, BufferEvent)>,
}

impl VideoSession {
    pub fn new(trace: &FrameTrace, buffer_size: f64) -> Result<Self> {
        let consumption = build_consumption(trace)?;
        let overflow = build_overflow(&consumption, buffer_size)?;
        Ok(Self {
            consumption: consumption.into(),
            overflow: overflow.into(),
            transmitted: vec![0.0],
            buffer_size,
            slot_length: 1.0 / trace.frame_rate(),
            events: Vec::new(),
        })
    }

    /// Number of frames `T`.
    pub fn total_frames(&self) -> usize {
        self.consumption.len() - 1
    }

    pub fn buffer_size(&self) -> f64 {
        self.buffer_size
    }

    /// Slot duration `tau` in seconds.
    pub fn slot_length(&self) -> f64 {
        self.slot_length
    }

    pub fn consumption(&self) -> &[f64] {
        &self.consumption
    }

    pub fn overflow(&self) -> &[f64] {
        &self.overflow
    }

    pub fn transmitted(&self) -> &[f64] {
        &self.transmitted
    }

    pub fn consumed(&self, t: usize) -> f64 {
        self.consumption[t]
    }

    pub fn overflow_limit(&self, t: usize) -> f64 {
        self.overflow[t]
    }

    /// `X(t)` for an already-recorded slot.
    pub fn delivered_by(&self, t: usize) -> f64 {
        self.transmitted[t]
    }

    /// Last slot whose delivery has been recorded (0 before any delivery).
    pub fn current_slot(&self) -> usize {
        self.transmitted.len() - 1
    }

    /// True once every frame's slot has been played out.
    pub fn is_complete(&self) -> bool {
        self.current_slot() >= self.total_frames()
    }

    pub fn events(&self) -> &[(usize, BufferEvent)] {
        &self.events
    }

    /// Prefetched bits `X(t) - D(t)`.
    pub fn buffer_level(&self, t: usize) -> f64 {
        self.transmitted[t] - self.consumption[t]
    }

    /// Occupied fraction of the playout buffer, clamped to `[0, 1]`.
    pub fn utilization(&self, t: usize) -> f64 {
        (self.buffer_level(t) / self.buffer_size).clamp(0.0, 1.0)
    }

    /// Appends `X(t) = X(t-1) + bits` for the next slot and classifies it.
    /// Neither under- nor overflow aborts; both are logged on the session.
    pub fn record_delivery(&mut self, t: usize, bits: f64) -> Result<BufferEvent> {
        if t == 0 || t > self.total_frames() {
            return Err(Error::SlotOutOfRange {
                slot: t,
                total: self.total_frames(),
            });
        }
        if t != self.transmitted.len() {
            return Err(Error::InconsistentState {
                slot: t,
                reason: format!("expected delivery for slot {}", self.transmitted.len()),
            });
        }
        if !(bits >= 0.0) {
            return Err(Error::input("bits", format!("must be nonnegative, got {bits}")));
        }
        let x = self.transmitted[t - 1] + bits;
        self.transmitted.push(x);
        let event = classify(x, self.consumption[t], self.overflow[t]);
        if !event.is_none() {
            self.events.push((t, event));
        }
        Ok(event)
    }
}

fn classify(x: f64, lower: f64, upper: f64) -> BufferEvent {
    if x > upper + BOUNDARY_TOLERANCE * upper.abs().max(1.0) {
        BufferEvent::Overflow { excess: x - upper }
    } else if x < lower - BOUNDARY_TOLERANCE * lower.abs().max(1.0) {
        BufferEvent::Underflow { deficit: lower - x }
    } else {
        BufferEvent::None
    }
}

/// Built-in synthetic VBR sources standing in for published trace libraries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticProfile {
    /// Talking heads, low motion, small I/P contrast.
    News,
    /// Feature film with scene cuts and long-range activity swings.
    Movie,
    /// High-motion sports coverage.
    Sports,
}

struct ProfileParams {
    mean_bits: f64,
    weights: [f64; 3],
    activity_rho: f64,
    activity_sigma: f64,
    frame_sigma: f64,
    scene_cut_prob: f64,
    seed: u64,
}

impl SyntheticProfile {
    pub const ALL: [SyntheticProfile; 3] = [
        SyntheticProfile::News,
        SyntheticProfile::Movie,
        SyntheticProfile::Sports,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticProfile::News => "news",
            SyntheticProfile::Movie => "movie",
            SyntheticProfile::Sports => "sports",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn params(self) -> ProfileParams {
        // weights are relative I, P, B frame sizes
        match self {
            SyntheticProfile::News => ProfileParams {
                mean_bits: 16_000.0,
                weights: [4.0, 1.6, 0.8],
                activity_rho: 0.995,
                activity_sigma: 0.03,
                frame_sigma: 0.12,
                scene_cut_prob: 0.002,
                seed: 0x6e65_7773,
            },
            SyntheticProfile::Movie => ProfileParams {
                mean_bits: 20_000.0,
                weights: [5.0, 1.8, 0.7],
                activity_rho: 0.99,
                activity_sigma: 0.06,
                frame_sigma: 0.2,
                scene_cut_prob: 0.01,
                seed: 0x6d6f_7669,
            },
            SyntheticProfile::Sports => ProfileParams {
                mean_bits: 24_000.0,
                weights: [3.5, 2.0, 1.1],
                activity_rho: 0.98,
                activity_sigma: 0.08,
                frame_sigma: 0.18,
                scene_cut_prob: 0.005,
                seed: 0x7370_6f72,
            },
        }
    }
}

/// GOP pattern `IBBPBBPBBPBB`.
const GOP: &[usize] = &[0, 2, 2, 1, 2, 2, 1, 2, 2, 1, 2, 2];

/// Deterministic synthetic trace with a 12-frame GOP, an AR(1) log-activity
/// process, scene cuts and per-frame log-normal jitter, rescaled so the mean
/// frame size equals the profile's target.
pub fn synthetic_trace(profile: SyntheticProfile, frames: usize, frame_rate: f64) -> Result<FrameTrace> {
    if frames == 0 {
        return Err(Error::EmptyTrace);
    }
    let p = profile.params();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut activity = 0.0f64;
    let stationary = p.activity_sigma / (1.0 - p.activity_rho * p.activity_rho).sqrt();
    let mut raw = Vec::with_capacity(frames);
    for i in 0..frames {
        if i > 0 && rand::Rng::random::<f64>(&mut rng) < p.scene_cut_prob {
            activity = stationary * unit.sample(&mut rng);
        } else {
            activity = p.activity_rho * activity + p.activity_sigma * unit.sample(&mut rng);
        }
        let kind = GOP[i % GOP.len()];
        let jitter = p.frame_sigma * unit.sample(&mut rng);
        raw.push(p.weights[kind] * (activity + jitter).exp());
    }
    let mean = raw.iter().sum::<f64>() / frames as f64;
    let scale = p.mean_bits / mean;
    let sizes = raw
        .into_iter()
        .map(|r| ((r * scale).round() as u64).max(1))
        .collect();
    FrameTrace::new(format!("synthetic-{}", profile.name()), sizes, frame_rate)
}
