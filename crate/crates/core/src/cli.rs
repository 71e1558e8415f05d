//! Command-line front end.
//!
//! Writes `slots.csv`, `rounds.csv`, `summary.json` and the effective
//! `config.toml` into the output directory and prints the summary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::simulator::{RunSummary, Simulation, SlotRounds, CSV_HEADER};

pub const SEED_ENV: &str = "VBR_SEED";
pub const ROUNDS_HEADER: &str = "slot,round,user,power_w,lambda,mu,nu,primal_objective,dual_objective";

#[derive(Debug, Clone, Parser)]
#[command(name = "vbr-power", about = "Downlink power allocation for stored VBR video streams")]
pub struct Args {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// proposed or diversity.
    #[arg(long)]
    pub allocator: Option<String>,
    /// sec5 or sec5-compare.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub slots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Log the dual solver rounds of every slot instead of only the last.
    #[arg(long)]
    pub log_all_rounds: bool,
}

/// Merges file, preset and flag values. Seed precedence is flag, file,
/// `env_seed`, then 1.
pub fn effective_config(args: &Args, env_seed: Option<&str>) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path, args.preset.as_deref())?,
        None => RunConfig::from_toml("", args.preset.as_deref())?,
    };
    if let Some(a) = &args.allocator {
        cfg.allocator = a.clone();
    }
    if let Some(s) = args.slots {
        cfg.slots = Some(s);
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.clone();
    }
    if args.log_all_rounds {
        cfg.output.log_all_rounds = true;
    }
    let env_seed = match env_seed {
        Some(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(SEED_ENV, format!("not an unsigned integer: {s:?}")))?,
        ),
        None => None,
    };
    cfg.seed = Some(args.seed.or(cfg.seed).or(env_seed).unwrap_or(1));
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rounds(out: &mut impl Write, r: &SlotRounds) -> Result<()> {
    for rec in &r.rounds {
        for (i, &user) in r.users.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.slot,
                rec.round,
                user,
                rec.powers[i],
                rec.lambda[i],
                rec.mu[i],
                rec.nu,
                rec.primal_objective,
                rec.dual_objective
            )?;
        }
    }
    Ok(())
}

/// Runs the configured simulation and writes all artifacts.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let seed = cfg.seed.unwrap_or(1);
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut sim = Simulation::new(cfg.build(seed)?)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|source| Error::Io {
        path: dir.join("config.toml"),
        source,
    })?;

    let mut slots = create(&dir.join("slots.csv"))?;
    let mut rounds = create(&dir.join("rounds.csv"))?;
    writeln!(slots, "{CSV_HEADER}")?;
    writeln!(rounds, "{ROUNDS_HEADER}")?;
    let mut last: Option<SlotRounds> = None;
    let mut buf = String::new();
    while let Some(rec) = sim.step()? {
        buf.clear();
        rec.write_csv(&mut buf);
        slots.write_all(buf.as_bytes())?;
        if let Some(r) = sim.slot_rounds() {
            if cfg.output.log_all_rounds {
                write_rounds(&mut rounds, r)?;
            } else {
                last = Some(r.clone());
            }
        }
    }
    if let Some(r) = &last {
        write_rounds(&mut rounds, r)?;
    }
    slots.flush()?;
    rounds.flush()?;

    let summary = sim.summary();
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), json + "\n").map_err(|source| Error::Io {
        path: dir.join("summary.json"),
        source,
    })?;
    Ok(summary)
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = effective_config(&args, env_seed.as_deref()).and_then(|cfg| execute(&cfg));
    match result {
        Ok(summary) => {
            print!("{}", summary.to_text());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
