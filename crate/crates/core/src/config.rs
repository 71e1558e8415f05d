//! Run configuration: TOML file, presets, validation, and conversion into a
//! [`SimConfig`].
//!
//! Every key is optional. A file may name a `preset`; the preset's values
//! are applied first and the file's own keys override them.
//!
//! ```toml
//! seed = 7
//! slots = 2000
//! allocator = "proposed"        # or "diversity"
//! preset = "sec5"
//!
//! [users]
//! count = 20
//! distance_min_m = 100.0
//! distance_max_m = 1000.0
//! traces = ["synthetic:news", "synthetic:movie", "synthetic:sports"]
//! offsets = "random"            # or "zero"
//!
//! [[user]]                      # explicit users replace the generated ones
//! distance_m = 250.0
//! trace = "traces/clip.txt"     # relative to the config file
//! start_offset = 0
//!
//! [channel]
//! pathloss_exponent = 4.0
//! shadow_sigma_db = 8.0
//! temperature_k = 290.0
//! bandwidth_hz = 1e6
//! coherence_slots = 1
//! orthogonality = 1.0
//!
//! [power]
//! peak_power_w = 10.0
//! proc_gain = 128.0
//! gamma_th = 0.0
//!
//! [buffer]
//! multiplier = 1.5              # times the largest frame of the user's trace
//!
//! [solver]
//! armijo_shrink = 0.5
//! armijo_slope = 0.01
//! initial_step = 1.0
//! tol = 1e-6
//! max_iters = 200
//! max_rounds = 500
//!
//! [trace]
//! unit = "bits"                 # or "bytes", for headerless trace files
//! fps = 30.0
//! synthetic_frames = 10000
//!
//! [output]
//! dir = "out"
//! log_all_rounds = false
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{draw_distance, draw_start_offset, ChannelParams};
use crate::dual::SolverConfig;
use crate::error::{Error, Result};
use crate::simulator::{Allocator, SimConfig, UserSetup};
use crate::traces::{synthetic_trace, FrameTrace, SizeUnit, SyntheticProfile};

pub const PRESETS: &[&str] = &["sec5", "sec5-compare"];

const SYNTHETIC_PREFIX: &str = "synthetic:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots: Option<usize>,
    pub allocator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub users: UsersSection,
    #[serde(rename = "user", skip_serializing_if = "Vec::is_empty")]
    pub user_list: Vec<UserEntry>,
    pub channel: ChannelSection,
    pub power: PowerSection,
    pub buffer: BufferSection,
    pub solver: SolverSection,
    pub trace: TraceSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            slots: None,
            allocator: "proposed".into(),
            preset: None,
            users: UsersSection::default(),
            user_list: Vec::new(),
            channel: ChannelSection::default(),
            power: PowerSection::default(),
            buffer: BufferSection::default(),
            solver: SolverSection::default(),
            trace: TraceSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersSection {
    pub count: usize,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub traces: Vec<String>,
    pub offsets: String,
}

impl Default for UsersSection {
    fn default() -> Self {
        Self {
            count: 20,
            distance_min_m: 100.0,
            distance_max_m: 1000.0,
            traces: SyntheticProfile::ALL
                .iter()
                .map(|p| format!("{SYNTHETIC_PREFIX}{}", p.name()))
                .collect(),
            offsets: "random".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub distance_m: f64,
    pub trace: String,
    #[serde(default)]
    pub start_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
    pub coherence_slots: usize,
    pub orthogonality: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let p = ChannelParams::default();
        Self {
            pathloss_exponent: p.pathloss_exponent,
            shadow_sigma_db: p.shadow_sigma_db,
            temperature_k: p.temperature_k,
            bandwidth_hz: p.bandwidth_hz,
            coherence_slots: p.coherence_slots,
            orthogonality: p.orthogonality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub peak_power_w: f64,
    pub proc_gain: f64,
    pub gamma_th: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            peak_power_w: 10.0,
            proc_gain: 128.0,
            gamma_th: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BufferSection {
    pub multiplier: f64,
}

impl Default for BufferSection {
    fn default() -> Self {
        Self { multiplier: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub initial_step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub max_rounds: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            armijo_shrink: s.armijo_shrink,
            armijo_slope: s.armijo_slope,
            initial_step: s.initial_step,
            tol: s.tol,
            max_iters: s.max_iters,
            max_rounds: s.max_rounds,
        }
    }
}

impl From<&SolverSection> for SolverConfig {
    fn from(s: &SolverSection) -> Self {
        SolverConfig {
            armijo_shrink: s.armijo_shrink,
            armijo_slope: s.armijo_slope,
            initial_step: s.initial_step,
            tol: s.tol,
            max_iters: s.max_iters,
            max_rounds: s.max_rounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub unit: String,
    pub fps: f64,
    pub synthetic_frames: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            unit: "bits".into(),
            fps: 30.0,
            synthetic_frames: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub log_all_rounds: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            log_all_rounds: false,
        }
    }
}

/// Preset values as a TOML table.
pub fn preset_table(name: &str) -> Result<toml::Table> {
    let text = match name {
        "sec5" => "slots = 10000\n[users]\ncount = 20\n",
        "sec5-compare" => "slots = 10000\n[users]\ncount = 50\n",
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")),
            ))
        }
    };
    let mut table: toml::Table = text.parse().expect("preset tables parse");
    table.insert("preset".into(), toml::Value::String(name.into()));
    Ok(table)
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses TOML text. `preset_override` replaces any preset named in the
    /// text; file keys still win over preset values.
    pub fn from_toml(text: &str, preset_override: Option<&str>) -> Result<Self> {
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        let preset = match preset_override {
            Some(p) => Some(p.to_string()),
            None => match file.get("preset") {
                Some(toml::Value::String(s)) => Some(s.clone()),
                Some(_) => return Err(Error::config("preset", "must be a string")),
                None => None,
            },
        };
        let mut table = match &preset {
            Some(p) => preset_table(p)?,
            None => toml::Table::new(),
        };
        merge(&mut table, file);
        if let Some(p) = preset {
            table.insert("preset".into(), toml::Value::String(p));
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, preset_override: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, preset_override)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative trace paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |s: &mut String| {
            if !s.starts_with(SYNTHETIC_PREFIX) && Path::new(s.as_str()).is_relative() {
                *s = base.join(&*s).to_string_lossy().into_owned();
            }
        };
        self.users.traces.iter_mut().for_each(fix);
        self.user_list.iter_mut().for_each(|u| fix(&mut u.trace));
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn allocator(&self) -> Result<Allocator> {
        self.allocator.parse()
    }

    pub fn user_count(&self) -> usize {
        if self.user_list.is_empty() {
            self.users.count
        } else {
            self.user_list.len()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &'static str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        self.allocator()?;
        if self.slots == Some(0) {
            return Err(Error::config("slots", "must be at least 1"));
        }
        if self.user_count() == 0 {
            return Err(Error::config("users.count", "must be at least 1"));
        }
        positive(self.users.distance_min_m, "users.distance_min_m")?;
        if !(self.users.distance_max_m >= self.users.distance_min_m) {
            return Err(Error::config("users.distance_max_m", "must be at least users.distance_min_m"));
        }
        if self.user_list.is_empty() && self.users.traces.is_empty() {
            return Err(Error::config("users.traces", "must name at least one trace"));
        }
        if !matches!(self.users.offsets.as_str(), "random" | "zero") {
            return Err(Error::config("users.offsets", "expected random or zero"));
        }
        for (i, u) in self.user_list.iter().enumerate() {
            if !(u.distance_m > 0.0) {
                return Err(Error::config("user.distance_m", format!("entry {i}: must be positive")));
            }
        }
        positive(self.channel.pathloss_exponent, "channel.pathloss_exponent")?;
        if !(self.channel.shadow_sigma_db >= 0.0) {
            return Err(Error::config("channel.shadow_sigma_db", "must be nonnegative"));
        }
        positive(self.channel.temperature_k, "channel.temperature_k")?;
        positive(self.channel.bandwidth_hz, "channel.bandwidth_hz")?;
        if self.channel.coherence_slots == 0 {
            return Err(Error::config("channel.coherence_slots", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.channel.orthogonality) {
            return Err(Error::config("channel.orthogonality", "must lie in [0, 1]"));
        }
        positive(self.power.peak_power_w, "power.peak_power_w")?;
        if !(self.power.proc_gain > 2.0) {
            return Err(Error::config("power.proc_gain", "must exceed 2"));
        }
        if !(self.power.gamma_th >= 0.0) {
            return Err(Error::config("power.gamma_th", "must be nonnegative"));
        }
        if !(self.buffer.multiplier >= 1.0) {
            return Err(Error::config("buffer.multiplier", "must be at least 1"));
        }
        SolverConfig::from(&self.solver).validate()?;
        self.trace
            .unit
            .parse::<SizeUnit>()
            .map_err(|_| Error::config("trace.unit", "expected bits or bytes"))?;
        positive(self.trace.fps, "trace.fps")?;
        if self.trace.synthetic_frames == 0 {
            return Err(Error::config("trace.synthetic_frames", "must be at least 1"));
        }
        Ok(())
    }

    fn load_trace(&self, spec: &str) -> Result<FrameTrace> {
        if let Some(name) = spec.strip_prefix(SYNTHETIC_PREFIX) {
            let profile = SyntheticProfile::from_name(name)
                .ok_or_else(|| Error::config("users.traces", format!("unknown synthetic profile {name:?}")))?;
            return synthetic_trace(profile, self.trace.synthetic_frames, self.trace.fps);
        }
        let unit: SizeUnit = self.trace.unit.parse()?;
        FrameTrace::from_file(Path::new(spec), unit, self.trace.fps)
    }

    /// Loads traces, places users and produces the simulator input.
    pub fn build(&self, seed: u64) -> Result<SimConfig> {
        self.validate()?;
        let mut cache: Vec<(String, FrameTrace)> = Vec::new();
        let mut trace_for = |spec: &str| -> Result<FrameTrace> {
            if let Some((_, t)) = cache.iter().find(|(s, _)| s == spec) {
                return Ok(t.clone());
            }
            let t = self.load_trace(spec)?;
            cache.push((spec.to_string(), t.clone()));
            Ok(t)
        };
        let mut users = Vec::with_capacity(self.user_count());
        if self.user_list.is_empty() {
            for n in 0..self.users.count {
                let trace = trace_for(&self.users.traces[n % self.users.traces.len()])?;
                let distance = draw_distance(seed, n, self.users.distance_min_m, self.users.distance_max_m);
                let offset = match self.users.offsets.as_str() {
                    "zero" => 0,
                    _ => draw_start_offset(seed, n, trace.len()),
                };
                users.push(self.user_setup(trace, distance, offset));
            }
        } else {
            for u in &self.user_list {
                let trace = trace_for(&u.trace)?;
                users.push(self.user_setup(trace, u.distance_m, u.start_offset));
            }
        }
        let slots = self
            .slots
            .unwrap_or_else(|| users.iter().map(|u| u.trace.len()).max().unwrap_or(0));
        Ok(SimConfig {
            users,
            channel: ChannelParams {
                pathloss_exponent: self.channel.pathloss_exponent,
                shadow_sigma_db: self.channel.shadow_sigma_db,
                temperature_k: self.channel.temperature_k,
                bandwidth_hz: self.channel.bandwidth_hz,
                proc_gain: self.power.proc_gain,
                orthogonality: self.channel.orthogonality,
                coherence_slots: self.channel.coherence_slots,
            },
            budget: self.power.peak_power_w,
            gamma_th: self.power.gamma_th,
            allocator: self.allocator()?,
            solver: SolverConfig::from(&self.solver),
            slots,
            seed,
        })
    }

    fn user_setup(&self, trace: FrameTrace, distance: f64, offset: usize) -> UserSetup {
        let buffer_size = self.buffer.multiplier * trace.max_frame() as f64;
        UserSetup {
            trace: trace.rotated(offset),
            distance,
            buffer_size,
        }
    }
}
