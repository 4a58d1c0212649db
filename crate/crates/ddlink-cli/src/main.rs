//! Command-line front end: Monte-Carlo simulation runs, single-shot sensing
//! reports and constrained power-allocation design, all driven by the flat
//! key-value scenario format.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ddlink::geometry::{delay_bin, doppler_bin};
use ddlink::harness::{emit_results, parse_config, run_simulation, sense_report, ScenarioConfig};
use ddlink::metrics::design_allocation;
use ddlink::modem::DDGrid;
use ddlink::{C64, DDPath, Target};

#[derive(Parser)]
#[command(
    name = "ddlink",
    about = "Delay-Doppler link simulator: echo-assisted, pilot and ideal downlink schemes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo block simulation and write records.csv,
    /// summary.json and (optionally) ber_curve.svg.
    Simulate {
        /// Scenario file (flat `key = value` lines, `#` comments).
        #[arg(long)]
        config: PathBuf,
        /// Override the SNR grid, e.g. `0,5,10` or `inf`.
        #[arg(long)]
        snr: Option<String>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Also write the BER-vs-SNR SVG plot.
        #[arg(long)]
        plot: bool,
    },
    /// Run one noiseless sensing round on the configured scenario and print
    /// truth versus estimates as JSON.
    Sense {
        #[arg(long)]
        config: PathBuf,
    },
    /// Blend water-filling and uniform power against an estimation-error
    /// ceiling and print the resulting allocation as JSON.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Ceiling on the channel-estimation error bound (accepts `inf`).
        #[arg(long)]
        tcrb: String,
    },
}

fn parse_snr_value(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    if t == "inf" || t == "+inf" || t == "infinity" {
        return Ok(f64::INFINITY);
    }
    let v: f64 = t.parse().with_context(|| format!("not a number: '{s}'"))?;
    if v.is_nan() {
        bail!("NaN is not a valid SNR");
    }
    Ok(v)
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Builds the delay-Doppler channel the design subcommand optimises for: one
/// path per configured target at its starting position, amplitudes relative
/// to the first target, deterministic carrier phase `-2*pi*f_c*tau`.
fn design_paths(cfg: &ScenarioConfig, grid: &DDGrid) -> Vec<DDPath> {
    let mut paths = Vec::new();
    let mut ref_amp = None;
    for spec in &cfg.targets {
        let target = Target {
            position_m: spec.position_m,
            velocity_mps: [0.0, 0.0],
            rcs: spec.rcs,
        };
        let d = target.range_m();
        let tau = d / cfg.c_mps;
        let amp = 1.0 / (d * d);
        let rel = amp / *ref_amp.get_or_insert(amp);
        paths.push(DDPath {
            l: delay_bin(tau, grid),
            k: doppler_bin(0.0, grid),
            gain: C64::from_polar(rel, -std::f64::consts::TAU * cfg.f_c_hz * tau),
            angle_rad: target.angle_rad(),
            tau_s: tau,
            nu_hz: 0.0,
        });
    }
    paths
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            snr,
            trials,
            seed,
            out,
            plot,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(snr) = snr {
                cfg.snr_db_grid = snr
                    .split(',')
                    .map(parse_snr_value)
                    .collect::<Result<Vec<f64>>>()?;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let records = run_simulation(&cfg)?;
            let written = emit_results(&records, &cfg, &out, plot)?;
            for path in written {
                println!("{}", path.display());
            }
        }
        Command::Sense { config } => {
            let cfg = load_config(&config)?;
            let report = sense_report(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Design { config, tcrb } => {
            let cfg = load_config(&config)?;
            let t_crb = parse_snr_value(&tcrb).context("invalid --tcrb")?;
            let grid = DDGrid::new(cfg.m, cfg.n, cfg.delta_f_hz)?;
            let paths = design_paths(&cfg, &grid);
            let gamma = cfg
                .snr_db_grid
                .iter()
                .copied()
                .find(|v| v.is_finite())
                .map(|db| 10f64.powf(db / 10.0))
                .context("design needs at least one finite SNR in snr_db_grid")?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let result = design_allocation(
                &paths,
                C64::new(1.0, 0.0),
                1.0 / gamma,
                1.0,
                t_crb,
                64,
                &grid,
                &mut rng,
            )?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
    }
    Ok(())
}
