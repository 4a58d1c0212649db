//! Scenario configuration, Monte-Carlo block engine for the three downlink
//! schemes, and result emission (CSV, JSON summary, SVG BER curves).
//!
//! Schemes:
//!
//! - `ideal`: perfect channel knowledge every block — exact delay/Doppler
//!   alignment, perfect beams, genie gain at the receiver. Its BER over
//!   AWGN follows the analytic BPSK curve, anchoring the SNR axis.
//! - `proposed`: echo-driven operation. Each block's transmission doubles
//!   as a radar illumination; the base station matched-filters the echo,
//!   sweeps receive beams for the bearing, converts the round-trip
//!   estimates to a kinematic state, predicts the next block's downlink
//!   geometry, and pre-compensates the next frame so the receiver can slice
//!   data without channel estimation. Downlink delay/Doppler bins are
//!   predicted by integer-halving the round-trip bin indices, which
//!   sidesteps the half-bin boundary that a continuous halve-then-round
//!   mapping would hit whenever the round-trip index is odd.
//! - `pilot`: classic baseline. A transmit beam sweep spends a configurable
//!   fraction of the energy budget, then each frame embeds an impulse pilot
//!   inside a guard region; the receiver estimates the channel from the
//!   pilot, equalises, and pays the pilot/guard overhead in throughput.
//!
//! SNR modes: `normalized` pins the post-combining per-symbol SNR at the
//! grid value (the perfect-pointing end-to-end gain is scaled to one), with
//! the sensing input SNR offset by `sensing_snr_offset_db`; `link_budget`
//! derives both links from transmit power, array gains, path loss and the
//! radar equation against an absolute noise floor.
//!
//! Determinism: every random quantity comes from a counter-derived ChaCha
//! stream keyed by (seed, trial, SNR index, scheme), so results are
//! byte-identical regardless of execution order or thread count.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::geometry::{
    add_awgn, apply_dd_channel, composite_gain, composite_gain_comm, delay_bin, doppler_bin,
    steering_vector, ArrayConfig, DDPath, Target,
};
use crate::metrics::{bpsk_demap, bpsk_map};
use crate::modem::{vectorize, DDFrame, DDGrid};
use crate::sensing::{
    estimate_angle_beamsweep, matched_filter, peak_pick, signed_doppler_index, SensingEstimate,
};
use crate::tracking::{estimate_velocity, localize, predict_angle, predict_state, TrackState};
use crate::C64;

/// Errors from configuration parsing, validation and result emission.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no records to emit")]
    NoRecords,
}

/// Downlink operating scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Ideal,
    Proposed,
    Pilot,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ideal => "ideal",
            Scheme::Proposed => "proposed",
            Scheme::Pilot => "pilot",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(Scheme::Ideal),
            "proposed" => Ok(Scheme::Proposed),
            "pilot" => Ok(Scheme::Pilot),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// How the SNR axis is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrMode {
    /// Grid values are post-combining per-symbol SNRs; the perfect-pointing
    /// end-to-end gain is normalised to one.
    Normalized,
    /// Grid is ignored for noise scaling; transmit power, path loss, array
    /// gains and an absolute noise floor set the operating point.
    LinkBudget,
}

/// Direction of a target's motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadingSpec {
    /// Straight towards the base station.
    RadialIn,
    /// Straight away from the base station.
    RadialOut,
    /// Fixed absolute direction, `(sin a, cos a)` for bearing `a`.
    Degrees(f64),
}

/// One target line from the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub position_m: [f64; 2],
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub heading: HeadingSpec,
    pub rcs: f64,
}

/// Full simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub m: usize,
    pub n: usize,
    pub delta_f_hz: f64,
    pub f_c_hz: f64,
    pub c_mps: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_ue: usize,
    pub tx_power_dbm: f64,
    pub snr_mode: SnrMode,
    pub snr_db_grid: Vec<f64>,
    pub noise_power_dbm: f64,
    pub sensing_snr_offset_db: f64,
    pub trials: usize,
    pub blocks_per_trial: usize,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    pub angle_grid_step_deg: f64,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub pilot_power_fraction: f64,
    pub pilot_sweep_energy_fraction: f64,
    pub pilot_guard_delay: usize,
    pub pilot_guard_doppler: usize,
    pub delay_noise_std_ns: f64,
    pub parallel: bool,
    pub targets: Vec<TargetSpec>,
}

/// Result of one simulated block for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub trial: usize,
    pub block: usize,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub bits_sent: usize,
    pub bit_errors: usize,
    /// True downlink delay bin of this block.
    pub l_true: usize,
    /// Delay bin the transmitter assumed for this block (prediction or
    /// estimate, scheme-dependent).
    pub l_hat: usize,
    pub k_true: usize,
    pub k_hat: usize,
    pub theta_true_deg: f64,
    /// Bearing estimated by this block's beam sweep (true bearing for the
    /// ideal scheme).
    pub theta_hat_deg: f64,
    /// Localisation error of this block's sensing fix; absent for schemes
    /// without a sensing stage.
    pub position_error_m: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            m: 0,
            n: 0,
            delta_f_hz: 0.0,
            f_c_hz: 0.0,
            c_mps: 2.998e8,
            n_tx: 64,
            n_rx: 64,
            n_ue: 4,
            tx_power_dbm: 40.0,
            snr_mode: SnrMode::Normalized,
            snr_db_grid: Vec::new(),
            noise_power_dbm: -110.0,
            sensing_snr_offset_db: 0.0,
            trials: 0,
            blocks_per_trial: 10,
            schemes: Vec::new(),
            seed: 0,
            angle_grid_step_deg: 1.0,
            angle_min_deg: -60.0,
            angle_max_deg: 60.0,
            pilot_power_fraction: 0.5,
            pilot_sweep_energy_fraction: 0.2,
            pilot_guard_delay: 4,
            pilot_guard_doppler: 2,
            delay_noise_std_ns: 10.0,
            parallel: true,
            targets: Vec::new(),
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, HarnessError> {
    let lowered = v.to_ascii_lowercase();
    if lowered == "inf" || lowered == "+inf" || lowered == "infinity" {
        return Ok(f64::INFINITY);
    }
    v.parse::<f64>().map_err(|_| HarnessError::Parse {
        line,
        message: format!("'{key}' expects a number, got '{v}'"),
    })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, HarnessError> {
    v.parse::<usize>().map_err(|_| HarnessError::Parse {
        line,
        message: format!("'{key}' expects a nonnegative integer, got '{v}'"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(HarnessError::Parse {
            line,
            message: format!("'{key}' expects true/false, got '{v}'"),
        }),
    }
}

fn parse_target(line: usize, v: &str) -> Result<TargetSpec, HarnessError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(HarnessError::Parse {
            line,
            message: format!(
                "'target' expects 'x,y,speed_min,speed_max,heading,rcs' (6 fields), got {}",
                parts.len()
            ),
        });
    }
    let num = |i: usize, name: &str| parse_f64(line, name, parts[i]);
    let heading = match parts[4] {
        "radial_in" => HeadingSpec::RadialIn,
        "radial_out" => HeadingSpec::RadialOut,
        other => HeadingSpec::Degrees(parse_f64(line, "target heading", other)?),
    };
    Ok(TargetSpec {
        position_m: [num(0, "target x")?, num(1, "target y")?],
        speed_min_mps: num(2, "target speed_min")?,
        speed_max_mps: num(3, "target speed_max")?,
        heading,
        rcs: num(5, "target rcs")?,
    })
}

/// Parses the flat key-value scenario format: one `key = value` per line,
/// `#` comments, repeated `target` lines accumulate. Unknown keys are
/// rejected. The parsed config is validated before being returned.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig::default();
    let (mut got_m, mut got_n, mut got_df, mut got_fc) = (false, false, false, false);
    let (mut got_trials, mut got_snr, mut got_schemes) = (false, false, false);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Parse {
            line: line_no,
            message: "expected 'key = value'".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "m" => {
                cfg.m = parse_usize(line_no, key, value)?;
                got_m = true;
            }
            "n" => {
                cfg.n = parse_usize(line_no, key, value)?;
                got_n = true;
            }
            "delta_f_hz" => {
                cfg.delta_f_hz = parse_f64(line_no, key, value)?;
                got_df = true;
            }
            "f_c_hz" => {
                cfg.f_c_hz = parse_f64(line_no, key, value)?;
                got_fc = true;
            }
            "c_mps" => cfg.c_mps = parse_f64(line_no, key, value)?,
            "n_tx" => cfg.n_tx = parse_usize(line_no, key, value)?,
            "n_rx" => cfg.n_rx = parse_usize(line_no, key, value)?,
            "n_ue" => cfg.n_ue = parse_usize(line_no, key, value)?,
            "tx_power_dbm" => cfg.tx_power_dbm = parse_f64(line_no, key, value)?,
            "snr_mode" => {
                cfg.snr_mode = match value {
                    "normalized" => SnrMode::Normalized,
                    "link_budget" => SnrMode::LinkBudget,
                    other => {
                        return Err(HarnessError::Parse {
                            line: line_no,
                            message: format!(
                                "'snr_mode' must be 'normalized' or 'link_budget', got '{other}'"
                            ),
                        })
                    }
                }
            }
            "snr_db_grid" => {
                cfg.snr_db_grid = value
                    .split(',')
                    .map(|s| parse_f64(line_no, key, s.trim()))
                    .collect::<Result<_, _>>()?;
                got_snr = true;
            }
            "noise_power_dbm" => cfg.noise_power_dbm = parse_f64(line_no, key, value)?,
            "sensing_snr_offset_db" => {
                cfg.sensing_snr_offset_db = parse_f64(line_no, key, value)?
            }
            "trials" => {
                cfg.trials = parse_usize(line_no, key, value)?;
                got_trials = true;
            }
            "blocks_per_trial" => cfg.blocks_per_trial = parse_usize(line_no, key, value)?,
            "schemes" => {
                cfg.schemes = value
                    .split(',')
                    .map(|s| {
                        Scheme::from_str(s.trim()).map_err(|message| HarnessError::Parse {
                            line: line_no,
                            message,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                got_schemes = true;
            }
            "seed" => {
                cfg.seed = value.parse::<u64>().map_err(|_| HarnessError::Parse {
                    line: line_no,
                    message: format!("'seed' expects an unsigned integer, got '{value}'"),
                })?
            }
            "angle_grid_step_deg" => cfg.angle_grid_step_deg = parse_f64(line_no, key, value)?,
            "angle_min_deg" => cfg.angle_min_deg = parse_f64(line_no, key, value)?,
            "angle_max_deg" => cfg.angle_max_deg = parse_f64(line_no, key, value)?,
            "pilot_power_fraction" => cfg.pilot_power_fraction = parse_f64(line_no, key, value)?,
            "pilot_sweep_energy_fraction" => {
                cfg.pilot_sweep_energy_fraction = parse_f64(line_no, key, value)?
            }
            "pilot_guard_delay" => cfg.pilot_guard_delay = parse_usize(line_no, key, value)?,
            "pilot_guard_doppler" => cfg.pilot_guard_doppler = parse_usize(line_no, key, value)?,
            "delay_noise_std_ns" => cfg.delay_noise_std_ns = parse_f64(line_no, key, value)?,
            "parallel" => cfg.parallel = parse_bool(line_no, key, value)?,
            "target" => cfg.targets.push(parse_target(line_no, value)?),
            other => {
                return Err(HarnessError::UnknownKey {
                    line: line_no,
                    key: other.to_string(),
                })
            }
        }
    }
    if !got_m {
        return Err(HarnessError::MissingKey("m"));
    }
    if !got_n {
        return Err(HarnessError::MissingKey("n"));
    }
    if !got_df {
        return Err(HarnessError::MissingKey("delta_f_hz"));
    }
    if !got_fc {
        return Err(HarnessError::MissingKey("f_c_hz"));
    }
    if !got_trials {
        return Err(HarnessError::MissingKey("trials"));
    }
    if !got_snr {
        return Err(HarnessError::MissingKey("snr_db_grid"));
    }
    if !got_schemes {
        return Err(HarnessError::MissingKey("schemes"));
    }
    if cfg.targets.is_empty() {
        return Err(HarnessError::MissingKey("target"));
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ScenarioConfig) -> Result<(), HarnessError> {
    let bad = |m: String| Err(HarnessError::Invalid(m));
    if cfg.m < 2 || cfg.n < 2 {
        return bad(format!("grid must be at least 2x2, got {}x{}", cfg.m, cfg.n));
    }
    if !(cfg.delta_f_hz > 0.0 && cfg.f_c_hz > 0.0 && cfg.c_mps > 0.0) {
        return bad("delta_f_hz, f_c_hz and c_mps must be positive".into());
    }
    if cfg.trials < 1 {
        return bad("trials must be at least 1".into());
    }
    if cfg.blocks_per_trial < 1 {
        return bad("blocks_per_trial must be at least 1".into());
    }
    if cfg.schemes.is_empty() {
        return bad("schemes must not be empty".into());
    }
    if cfg.snr_db_grid.is_empty() {
        return bad("snr_db_grid must not be empty".into());
    }
    if cfg.snr_db_grid.iter().any(|v| v.is_nan()) {
        return bad("snr_db_grid must not contain NaN".into());
    }
    if cfg.n_tx < 1 || cfg.n_rx < 1 || cfg.n_ue < 1 {
        return bad("antenna counts must be at least 1".into());
    }
    if !(cfg.angle_grid_step_deg > 0.0 && cfg.angle_min_deg < cfg.angle_max_deg) {
        return bad("angle grid needs step > 0 and min < max".into());
    }
    if !(0.0 < cfg.pilot_power_fraction && cfg.pilot_power_fraction < 1.0) {
        return bad("pilot_power_fraction must lie in (0, 1)".into());
    }
    if !(0.0 <= cfg.pilot_sweep_energy_fraction && cfg.pilot_sweep_energy_fraction < 1.0) {
        return bad("pilot_sweep_energy_fraction must lie in [0, 1)".into());
    }
    if 2 * cfg.pilot_guard_delay + 1 > cfg.m || 2 * cfg.pilot_guard_doppler + 1 > cfg.n {
        return bad(format!(
            "pilot guard region ({}x{}) exceeds the {}x{} grid",
            2 * cfg.pilot_guard_delay + 1,
            2 * cfg.pilot_guard_doppler + 1,
            cfg.m,
            cfg.n
        ));
    }
    for (i, t) in cfg.targets.iter().enumerate() {
        if t.position_m[0] == 0.0 && t.position_m[1] == 0.0 {
            return bad(format!("target {i} sits at the origin"));
        }
        if !(0.0 <= t.speed_min_mps && t.speed_min_mps <= t.speed_max_mps) {
            return bad(format!("target {i}: need 0 <= speed_min <= speed_max"));
        }
        if t.speed_max_mps > cfg.c_mps / 10.0 {
            return bad(format!("target {i}: speeds above c/10 are not supported"));
        }
        if !(t.rcs.is_finite() && t.rcs >= 0.0) {
            return bad(format!("target {i}: rcs must be nonnegative"));
        }
    }
    Ok(())
}

/// Echoes the config into a JSON value (SNR entries as strings so that
/// `inf` survives the trip).
fn config_echo(cfg: &ScenarioConfig) -> serde_json::Value {
    json!({
        "m": cfg.m,
        "n": cfg.n,
        "delta_f_hz": cfg.delta_f_hz,
        "f_c_hz": cfg.f_c_hz,
        "c_mps": cfg.c_mps,
        "n_tx": cfg.n_tx,
        "n_rx": cfg.n_rx,
        "n_ue": cfg.n_ue,
        "tx_power_dbm": cfg.tx_power_dbm,
        "snr_mode": match cfg.snr_mode { SnrMode::Normalized => "normalized", SnrMode::LinkBudget => "link_budget" },
        "snr_db_grid": cfg.snr_db_grid.iter().map(|v| format!("{v}")).collect::<Vec<_>>(),
        "noise_power_dbm": cfg.noise_power_dbm,
        "sensing_snr_offset_db": cfg.sensing_snr_offset_db,
        "trials": cfg.trials,
        "blocks_per_trial": cfg.blocks_per_trial,
        "schemes": cfg.schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "seed": cfg.seed,
        "angle_grid_step_deg": cfg.angle_grid_step_deg,
        "angle_min_deg": cfg.angle_min_deg,
        "angle_max_deg": cfg.angle_max_deg,
        "pilot_power_fraction": cfg.pilot_power_fraction,
        "pilot_sweep_energy_fraction": cfg.pilot_sweep_energy_fraction,
        "pilot_guard_delay": cfg.pilot_guard_delay,
        "pilot_guard_doppler": cfg.pilot_guard_doppler,
        "delay_noise_std_ns": cfg.delay_noise_std_ns,
        "parallel": cfg.parallel,
        "targets": cfg.targets.iter().map(|t| json!({
            "position_m": t.position_m,
            "speed_min_mps": t.speed_min_mps,
            "speed_max_mps": t.speed_max_mps,
            "heading": match t.heading {
                HeadingSpec::RadialIn => "radial_in".to_string(),
                HeadingSpec::RadialOut => "radial_out".to_string(),
                HeadingSpec::Degrees(d) => format!("{d}"),
            },
            "rcs": t.rcs,
        })).collect::<Vec<_>>(),
    })
}

/// One concrete target trajectory for a trial: speed drawn, heading fixed.
#[derive(Debug, Clone, Copy)]
struct SceneTarget {
    start: Target,
    heading_unit: [f64; 2],
}

fn build_scene(cfg: &ScenarioConfig, trial: usize) -> Vec<SceneTarget> {
    let mut rng = stream_rng(cfg.seed, scene_stream(trial));
    cfg.targets
        .iter()
        .map(|spec| {
            let draw: f64 = rng.gen_range(0.0..1.0);
            let speed = spec.speed_min_mps + draw * (spec.speed_max_mps - spec.speed_min_mps);
            let d = (spec.position_m[0].powi(2) + spec.position_m[1].powi(2)).sqrt();
            let heading_unit = match spec.heading {
                HeadingSpec::RadialIn => [-spec.position_m[0] / d, -spec.position_m[1] / d],
                HeadingSpec::RadialOut => [spec.position_m[0] / d, spec.position_m[1] / d],
                HeadingSpec::Degrees(a) => {
                    let r = a.to_radians();
                    [r.sin(), r.cos()]
                }
            };
            SceneTarget {
                start: Target {
                    position_m: spec.position_m,
                    velocity_mps: [speed * heading_unit[0], speed * heading_unit[1]],
                    rcs: spec.rcs,
                },
                heading_unit,
            }
        })
        .collect()
}

fn scene_stream(trial: usize) -> u64 {
    (trial as u64) << 1
}

fn noise_stream(trial: usize, snr_idx: usize, scheme: Scheme) -> u64 {
    let s = match scheme {
        Scheme::Ideal => 0u64,
        Scheme::Proposed => 1,
        Scheme::Pilot => 2,
    };
    ((trial as u64) << 12 | (snr_idx as u64) << 2 | s) << 1 | 1
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-(SNR, scheme) noise levels and gain scales.
struct LinkBudget {
    /// Per-bin data symbol power at the transmitter.
    frame_power: f64,
    /// Noise power per DD bin on the communication link.
    n0_comm: f64,
    /// Noise power per DD bin on the echo.
    n0_sens: f64,
    /// End-to-end amplitude at perfect pointing (communication link).
    amp_comm: f64,
    /// End-to-end amplitude at perfect pointing (sensing echo).
    amp_sens: f64,
}

fn budget_for(cfg: &ScenarioConfig, snr_db: f64, target: &Target) -> LinkBudget {
    match cfg.snr_mode {
        SnrMode::Normalized => {
            let gamma = 10f64.powf(snr_db / 10.0);
            let gamma_s = gamma * 10f64.powf(cfg.sensing_snr_offset_db / 10.0);
            LinkBudget {
                frame_power: 1.0,
                n0_comm: if gamma.is_infinite() { 0.0 } else { 1.0 / gamma },
                n0_sens: if gamma_s.is_infinite() { 0.0 } else { 1.0 / gamma_s },
                amp_comm: 1.0,
                amp_sens: 1.0,
            }
        }
        SnrMode::LinkBudget => {
            let p = 10f64.powf((cfg.tx_power_dbm - 30.0) / 10.0);
            let n0 = 10f64.powf((cfg.noise_power_dbm - 30.0) / 10.0);
            let arrays = ArrayConfig {
                n_tx: cfg.n_tx,
                n_rx: cfg.n_rx,
                n_ue: cfg.n_ue,
            };
            let d = target.range_m();
            let path_comm = (cfg.c_mps / (4.0 * std::f64::consts::PI * cfg.f_c_hz * d * d)).sqrt();
            let path_sens = (target.rcs * cfg.c_mps * cfg.c_mps
                / ((4.0 * std::f64::consts::PI).powi(3)
                    * cfg.f_c_hz
                    * cfg.f_c_hz
                    * d.powi(4)))
            .sqrt();
            let th = target.angle_rad();
            let array_comm = composite_gain_comm(th, th, th, &arrays, 1.0)
                .map(|g| g.norm())
                .unwrap_or(0.0);
            let array_sens = composite_gain(th, th, th, &arrays, 1.0)
                .map(|g| g.norm())
                .unwrap_or(0.0);
            LinkBudget {
                frame_power: p,
                n0_comm: n0,
                n0_sens: n0,
                amp_comm: path_comm * array_comm,
                amp_sens: path_sens * array_sens,
            }
        }
    }
}

/// Normalised transmit-pointing factor for the downlink, in `[0, 1]`.
fn comm_point_factor(arrays: &ArrayConfig, steer_rad: f64, true_rad: f64) -> f64 {
    let num = composite_gain_comm(steer_rad, true_rad, true_rad, arrays, 1.0)
        .map(|g| g.norm())
        .unwrap_or(0.0);
    let den = composite_gain_comm(true_rad, true_rad, true_rad, arrays, 1.0)
        .map(|g| g.norm())
        .unwrap_or(1.0);
    num / den
}

/// Normalised pointing factor for the echo (transmit steer and receive
/// beam relative to the true bearing), in `[0, 1]`.
fn sens_point_factor(arrays: &ArrayConfig, steer_rad: f64, true_rad: f64, beam_rad: f64) -> f64 {
    let num = composite_gain(steer_rad, true_rad, beam_rad, arrays, 1.0)
        .map(|g| g.norm())
        .unwrap_or(0.0);
    let den = composite_gain(true_rad, true_rad, true_rad, arrays, 1.0)
        .map(|g| g.norm())
        .unwrap_or(1.0);
    num / den
}

/// Normalised single-array beam response `|a(beam)^H a(true)| / n`.
fn beam_response(n: usize, beam_rad: f64, true_rad: f64) -> f64 {
    let a = steering_vector(true_rad, n);
    let b = steering_vector(beam_rad, n);
    let dot: C64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    dot.norm() / n as f64
}

fn angle_grid(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut v = Vec::new();
    let mut a = cfg.angle_min_deg;
    while a <= cfg.angle_max_deg + 1e-9 {
        v.push(a.to_radians());
        a += cfg.angle_grid_step_deg;
    }
    v
}

/// Random data bits for one frame.
fn draw_bits(rng: &mut ChaCha8Rng, count: usize) -> Vec<u8> {
    (0..count).map(|_| rng.gen_range(0..2u8)).collect()
}

fn count_errors(sent: &[u8], received: &[u8]) -> usize {
    sent.iter().zip(received).filter(|(a, b)| a != b).count()
}

/// Sweeps receive (or transmit) beams against the true bearing: each beam
/// yields `|sqrt(E) * response + CN(0,1)|^2` as its energy statistic. The
/// noise draws are consumed even in the noiseless case so the RNG stream
/// position never depends on the SNR.
fn beam_sweep(
    beams: &[f64],
    true_rad: f64,
    n_elems: usize,
    tx_factor: f64,
    energy_over_n0: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    use rand_distr::StandardNormal;
    beams
        .iter()
        .map(|&b| {
            let resp = beam_response(n_elems, b, true_rad) * tx_factor;
            let wr: f64 = rng.sample(StandardNormal);
            let wi: f64 = rng.sample(StandardNormal);
            let energy = if energy_over_n0.is_infinite() {
                resp * resp
            } else {
                let amp = energy_over_n0.sqrt() * resp;
                let y = C64::new(amp + wr / (2f64).sqrt(), wi / (2f64).sqrt());
                y.norm_sqr()
            };
            (b, energy)
        })
        .collect()
}

/// True downlink and round-trip channel descriptors of one block.
struct BlockTruth {
    l_c: usize,
    k_c: usize,
    l_s: usize,
    k_s: usize,
    theta: f64,
    tau_s: f64,
    nu_hz: f64,
}

fn block_truth(target: &Target, cfg: &ScenarioConfig, grid: &DDGrid) -> BlockTruth {
    let d = target.range_m();
    let tau = d / cfg.c_mps;
    let nu = cfg.f_c_hz * target.radial_speed_mps() / cfg.c_mps;
    BlockTruth {
        l_c: delay_bin(tau, grid),
        k_c: doppler_bin(nu, grid),
        l_s: delay_bin(2.0 * tau, grid),
        k_s: doppler_bin(2.0 * nu, grid),
        theta: target.angle_rad(),
        tau_s: tau,
        nu_hz: nu,
    }
}

fn advance(target: &mut Target, dt: f64) {
    target.position_m[0] += target.velocity_mps[0] * dt;
    target.position_m[1] += target.velocity_mps[1] * dt;
}

/// Runs one (trial, SNR, scheme) block loop and returns its records.
fn run_block_loop(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    snr_idx: usize,
    trial: usize,
    scene: &[SceneTarget],
) -> Vec<BlockRecord> {
    let grid = DDGrid::new(cfg.m, cfg.n, cfg.delta_f_hz).expect("validated grid");
    let snr_db = cfg.snr_db_grid[snr_idx];
    let mut rng = stream_rng(cfg.seed, noise_stream(trial, snr_idx, scheme));
    let mut target = scene[0].start;
    let heading = scene[0].heading_unit;
    let budget = budget_for(cfg, snr_db, &target);
    let arrays = ArrayConfig {
        n_tx: cfg.n_tx,
        n_rx: cfg.n_rx,
        n_ue: cfg.n_ue,
    };
    let beams = angle_grid(cfg);
    let dt = grid.frame_duration_s();
    let mn = grid.bins();
    let mut records = Vec::with_capacity(cfg.blocks_per_trial);

    // Prediction carried into the next block by the proposed scheme.
    let mut pred_l = 0usize;
    let mut pred_k = 0usize;
    let mut pred_theta = 0.0f64;
    let mut have_prediction = false;

    for block in 0..cfg.blocks_per_trial {
        let truth = block_truth(&target, cfg, &grid);
        let phase_c = rng.gen_range(0.0..TAU);
        let phase_s = rng.gen_range(0.0..TAU);

        let record = match scheme {
            Scheme::Ideal => {
                let bits = draw_bits(&mut rng, mn);
                let x = bpsk_map(&bits, &grid, budget.frame_power).expect("bit count matches");
                let g_c = C64::from_polar(budget.amp_comm, phase_c);
                let path = DDPath {
                    l: truth.l_c,
                    k: truth.k_c,
                    gain: g_c,
                    angle_rad: truth.theta,
                    tau_s: truth.tau_s,
                    nu_hz: truth.nu_hz,
                };
                // Perfect pre-compensation: shift away the known channel.
                let tx = x.cyclic_shift(-(truth.l_c as i64), -(truth.k_c as i64));
                let y = apply_dd_channel(&tx, &[path], C64::new(1.0, 0.0)).expect("in-grid path");
                let y = add_awgn(&y, budget.n0_comm, &mut rng).expect("nonnegative noise");
                let rx_bits = bpsk_demap(&y, g_c);
                let errors = count_errors(&bits, &rx_bits);
                BlockRecord {
                    trial,
                    block,
                    scheme,
                    snr_db,
                    bits_sent: mn,
                    bit_errors: errors,
                    l_true: truth.l_c,
                    l_hat: truth.l_c,
                    k_true: truth.k_c,
                    k_hat: truth.k_c,
                    theta_true_deg: truth.theta.to_degrees(),
                    theta_hat_deg: truth.theta.to_degrees(),
                    position_error_m: None,
                }
            }
            Scheme::Proposed => {
                let (use_l, use_k, use_theta) = if have_prediction {
                    (pred_l, pred_k, pred_theta)
                } else {
                    // First block: bootstrap with perfect knowledge (initial
                    // detection is out of scope for the block loop).
                    (truth.l_c, truth.k_c, truth.theta)
                };
                let bits = draw_bits(&mut rng, mn);
                let x = bpsk_map(&bits, &grid, budget.frame_power).expect("bit count matches");
                let tx = x.cyclic_shift(-(use_l as i64), -(use_k as i64));

                // Downlink: true channel, genie-gain slicing at the UE.
                let t_c = comm_point_factor(&arrays, use_theta, truth.theta);
                let g_c = C64::from_polar(budget.amp_comm * t_c, phase_c);
                let path = DDPath {
                    l: truth.l_c,
                    k: truth.k_c,
                    gain: g_c,
                    angle_rad: truth.theta,
                    tau_s: truth.tau_s,
                    nu_hz: truth.nu_hz,
                };
                let y = apply_dd_channel(&tx, &[path], C64::new(1.0, 0.0)).expect("in-grid path");
                let y = add_awgn(&y, budget.n0_comm, &mut rng).expect("nonnegative noise");
                let rx_bits = bpsk_demap(&y, g_c);
                let errors = count_errors(&bits, &rx_bits);

                // Echo: sweep receive beams, then matched-filter the best
                // beam's frame.
                let gamma_s = if budget.n0_sens == 0.0 {
                    f64::INFINITY
                } else {
                    budget.amp_sens * budget.amp_sens * budget.frame_power / budget.n0_sens
                };
                let t_tx_s = beam_response(cfg.n_tx, use_theta, truth.theta);
                let sweep = beam_sweep(
                    &beams,
                    truth.theta,
                    cfg.n_rx,
                    t_tx_s,
                    gamma_s * mn as f64,
                    &mut rng,
                );
                let theta_hat = estimate_angle_beamsweep(&sweep).expect("nonempty sweep");
                let t_s = sens_point_factor(&arrays, use_theta, truth.theta, theta_hat);
                let g_s = C64::from_polar(budget.amp_sens * t_s, phase_s);
                let echo_clean = tx
                    .cyclic_shift(truth.l_s as i64, truth.k_s as i64)
                    .scaled(g_s);
                let echo = add_awgn(&echo_clean, budget.n0_sens, &mut rng)
                    .expect("nonnegative noise");
                let mf = matched_filter(&vectorize(&echo), &tx).expect("same grid");
                let (l_hat_s, k_hat_s, _) = match peak_pick(&mf) {
                    Ok(p) => p,
                    Err(_) => (0, 0, C64::new(0.0, 0.0)),
                };
                let est = SensingEstimate::new(mf, l_hat_s, k_hat_s, theta_hat);

                // Track and predict the next block.
                let p_hat = localize(est.eta_hat_s, theta_hat, cfg.c_mps);
                let pos_err = ((p_hat[0] - target.position_m[0]).powi(2)
                    + (p_hat[1] - target.position_m[1]).powi(2))
                .sqrt();
                let v_hat = estimate_velocity(
                    est.phi_hat_hz,
                    theta_hat,
                    cfg.f_c_hz,
                    cfg.c_mps,
                    heading,
                )
                .unwrap_or([0.0, 0.0]);
                let state = TrackState::new(p_hat, v_hat, block as u64);
                let next = predict_state(&state, dt);
                pred_theta = predict_angle(next.position_m).unwrap_or(theta_hat);
                pred_l = l_hat_s / 2;
                let half_k = signed_doppler_index(k_hat_s, cfg.n) / 2;
                pred_k = half_k.rem_euclid(cfg.n as i64) as usize;
                have_prediction = true;

                BlockRecord {
                    trial,
                    block,
                    scheme,
                    snr_db,
                    bits_sent: mn,
                    bit_errors: errors,
                    l_true: truth.l_c,
                    l_hat: use_l,
                    k_true: truth.k_c,
                    k_hat: use_k,
                    theta_true_deg: truth.theta.to_degrees(),
                    theta_hat_deg: theta_hat.to_degrees(),
                    position_error_m: Some(pos_err),
                }
            }
            Scheme::Pilot => {
                let guard_d = cfg.pilot_guard_delay as i64;
                let guard_k = cfg.pilot_guard_doppler as i64;
                let guard_bins = (2 * guard_d + 1) as usize * (2 * guard_k + 1) as usize;
                let data_bins = mn - guard_bins;
                let bits = draw_bits(&mut rng, data_bins);

                // Transmit beam sweep towards the UE eats part of the
                // energy budget; the rest splits between pilot and data.
                let gamma = if budget.n0_comm == 0.0 {
                    f64::INFINITY
                } else {
                    budget.amp_comm * budget.amp_comm * budget.frame_power / budget.n0_comm
                };
                let sweep = beam_sweep(&beams, truth.theta, cfg.n_tx, 1.0, gamma * mn as f64, &mut rng);
                let theta_hat = estimate_angle_beamsweep(&sweep).expect("nonempty sweep");

                let usable = 1.0 - cfg.pilot_sweep_energy_fraction;
                let pilot_energy =
                    cfg.pilot_power_fraction * usable * mn as f64 * budget.frame_power;
                let data_power = (1.0 - cfg.pilot_power_fraction) * usable * mn as f64
                    * budget.frame_power
                    / data_bins as f64;
                let pilot_amp = pilot_energy.sqrt();
                let (l_p, k_p) = (cfg.m / 2, cfg.n / 2);

                let mut frame = DDFrame::zeros(grid);
                let mut bit_iter = bits.iter();
                let amp = data_power.sqrt();
                for k in 0..cfg.n {
                    for l in 0..cfg.m {
                        let dl = wrapped_offset(l, l_p, cfg.m);
                        let dk = wrapped_offset(k, k_p, cfg.n);
                        let in_guard = dl.abs() <= guard_d && dk.abs() <= guard_k;
                        frame.data_mut()[[l, k]] = if l == l_p && k == k_p {
                            C64::new(pilot_amp, 0.0)
                        } else if in_guard {
                            C64::new(0.0, 0.0)
                        } else {
                            let bit = *bit_iter.next().expect("bit budget matches data bins");
                            C64::new(if bit == 0 { amp } else { -amp }, 0.0)
                        };
                    }
                }

                let t_c = comm_point_factor(&arrays, theta_hat, truth.theta);
                let g_c = C64::from_polar(budget.amp_comm * t_c, phase_c);
                let path = DDPath {
                    l: truth.l_c,
                    k: truth.k_c,
                    gain: g_c,
                    angle_rad: truth.theta,
                    tau_s: truth.tau_s,
                    nu_hz: truth.nu_hz,
                };
                let y =
                    apply_dd_channel(&frame, &[path], C64::new(1.0, 0.0)).expect("in-grid path");
                let y = add_awgn(&y, budget.n0_comm, &mut rng).expect("nonnegative noise");

                // Pilot search inside the causal window.
                let mut best = (0i64, 0i64);
                let mut best_mag = f64::NEG_INFINITY;
                for dl in 0..=guard_d {
                    for dk in -guard_k..=guard_k {
                        let l = (l_p as i64 + dl).rem_euclid(cfg.m as i64) as usize;
                        let k = (k_p as i64 + dk).rem_euclid(cfg.n as i64) as usize;
                        let mag = y.data()[[l, k]].norm();
                        if mag > best_mag {
                            best_mag = mag;
                            best = (dl, dk);
                        }
                    }
                }
                let (dl_hat, dk_hat) = best;
                let peak_l = (l_p as i64 + dl_hat).rem_euclid(cfg.m as i64) as usize;
                let peak_k = (k_p as i64 + dk_hat).rem_euclid(cfg.n as i64) as usize;
                let g_hat = y.data()[[peak_l, peak_k]] / pilot_amp;

                // Undo the estimated shift, equalise by the estimated gain,
                // slice the data bins.
                let aligned = y.cyclic_shift(-dl_hat, -dk_hat);
                let mut errors = 0usize;
                let mut bit_idx = 0usize;
                for k in 0..cfg.n {
                    for l in 0..cfg.m {
                        let dl = wrapped_offset(l, l_p, cfg.m);
                        let dk = wrapped_offset(k, k_p, cfg.n);
                        if dl.abs() <= guard_d && dk.abs() <= guard_k {
                            continue;
                        }
                        let z = aligned.data()[[l, k]] * g_hat.conj();
                        let bit = if z.re < 0.0 { 1u8 } else { 0u8 };
                        if bit != bits[bit_idx] {
                            errors += 1;
                        }
                        bit_idx += 1;
                    }
                }

                BlockRecord {
                    trial,
                    block,
                    scheme,
                    snr_db,
                    bits_sent: data_bins,
                    bit_errors: errors,
                    l_true: truth.l_c,
                    l_hat: (dl_hat).rem_euclid(cfg.m as i64) as usize,
                    k_true: truth.k_c,
                    k_hat: (dk_hat).rem_euclid(cfg.n as i64) as usize,
                    theta_true_deg: truth.theta.to_degrees(),
                    theta_hat_deg: theta_hat.to_degrees(),
                    position_error_m: None,
                }
            }
        };
        records.push(record);
        advance(&mut target, dt);
    }
    records
}

/// Signed cyclic offset of `i` from `center` on a ring of size `len`,
/// mapped into `[-len/2, len/2)`.
fn wrapped_offset(i: usize, center: usize, len: usize) -> i64 {
    let raw = (i as i64 - center as i64).rem_euclid(len as i64);
    if raw >= (len as i64 + 1) / 2 {
        raw - len as i64
    } else {
        raw
    }
}

/// Runs every configured (scheme, SNR, trial) combination and returns the
/// records sorted by (scheme, SNR, trial, block).
pub fn run_simulation(cfg: &ScenarioConfig) -> Result<Vec<BlockRecord>, HarnessError> {
    validate(cfg)?;
    let scenes: Vec<Vec<SceneTarget>> = (0..cfg.trials).map(|t| build_scene(cfg, t)).collect();
    let mut jobs = Vec::new();
    for &scheme in &cfg.schemes {
        for snr_idx in 0..cfg.snr_db_grid.len() {
            for trial in 0..cfg.trials {
                jobs.push((scheme, snr_idx, trial));
            }
        }
    }
    let mut records: Vec<BlockRecord> = if cfg.parallel {
        jobs.par_iter()
            .flat_map_iter(|&(scheme, snr_idx, trial)| {
                run_block_loop(cfg, scheme, snr_idx, trial, &scenes[trial])
            })
            .collect()
    } else {
        jobs.iter()
            .flat_map(|&(scheme, snr_idx, trial)| {
                run_block_loop(cfg, scheme, snr_idx, trial, &scenes[trial])
            })
            .collect()
    };
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.partial_cmp(&b.snr_db).expect("no NaN SNR"))
            .then(a.trial.cmp(&b.trial))
            .then(a.block.cmp(&b.block))
    });
    Ok(records)
}

/// Runs only the echo-driven scheme.
pub fn run_proposed(cfg: &ScenarioConfig) -> Result<Vec<BlockRecord>, HarnessError> {
    run_one(cfg, Scheme::Proposed)
}

/// Runs only the perfect-knowledge scheme.
pub fn run_ideal(cfg: &ScenarioConfig) -> Result<Vec<BlockRecord>, HarnessError> {
    run_one(cfg, Scheme::Ideal)
}

/// Runs only the pilot-and-sweep baseline.
pub fn run_pilot_baseline(cfg: &ScenarioConfig) -> Result<Vec<BlockRecord>, HarnessError> {
    run_one(cfg, Scheme::Pilot)
}

fn run_one(cfg: &ScenarioConfig, scheme: Scheme) -> Result<Vec<BlockRecord>, HarnessError> {
    let mut sub = cfg.clone();
    sub.schemes = vec![scheme];
    run_simulation(&sub)
}

/// Renders records as CSV with the fixed column order.
pub fn records_to_csv(records: &[BlockRecord]) -> String {
    let mut out = String::from(
        "trial,block,scheme,snr_db,bits_sent,bit_errors,l_true,l_hat,k_true,k_hat,theta_true_deg,theta_hat_deg\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.block,
            r.scheme,
            r.snr_db,
            r.bits_sent,
            r.bit_errors,
            r.l_true,
            r.l_hat,
            r.k_true,
            r.k_hat,
            r.theta_true_deg,
            r.theta_hat_deg
        ));
    }
    out
}

/// Per-scheme, per-SNR aggregate used by the JSON summary and the plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub index_hit_rate: f64,
    pub mean_angle_error_deg: f64,
    pub mean_position_error_m: Option<f64>,
}

/// Aggregates records per (scheme, SNR), sorted.
pub fn aggregate(records: &[BlockRecord]) -> Vec<Aggregate> {
    let mut map: BTreeMap<(Scheme, u64), Vec<&BlockRecord>> = BTreeMap::new();
    for r in records {
        map.entry((r.scheme, r.snr_db.to_bits())).or_default().push(r);
    }
    let mut out: Vec<Aggregate> = map
        .into_values()
        .map(|rs| {
            let bits: usize = rs.iter().map(|r| r.bits_sent).sum();
            let errors: usize = rs.iter().map(|r| r.bit_errors).sum();
            let hits = rs
                .iter()
                .filter(|r| r.l_hat == r.l_true && r.k_hat == r.k_true)
                .count();
            let angle_err: f64 = rs
                .iter()
                .map(|r| (r.theta_hat_deg - r.theta_true_deg).abs())
                .sum::<f64>()
                / rs.len() as f64;
            let pos: Vec<f64> = rs.iter().filter_map(|r| r.position_error_m).collect();
            Aggregate {
                scheme: rs[0].scheme,
                snr_db: rs[0].snr_db,
                bits,
                errors,
                ber: errors as f64 / bits as f64,
                index_hit_rate: hits as f64 / rs.len() as f64,
                mean_angle_error_deg: angle_err,
                mean_position_error_m: if pos.is_empty() {
                    None
                } else {
                    Some(pos.iter().sum::<f64>() / pos.len() as f64)
                },
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.partial_cmp(&b.snr_db).expect("no NaN SNR"))
    });
    out
}

/// Builds the JSON summary: per-scheme per-SNR aggregates, config echo and
/// seed.
pub fn summary_json(records: &[BlockRecord], cfg: &ScenarioConfig) -> serde_json::Value {
    let mut results = serde_json::Map::new();
    for agg in aggregate(records) {
        let scheme_entry = results
            .entry(agg.scheme.to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
        let per_snr = json!({
            "ber": agg.ber,
            "bits": agg.bits,
            "bit_errors": agg.errors,
            "index_hit_rate": agg.index_hit_rate,
            "mean_angle_error_deg": agg.mean_angle_error_deg,
            "mean_position_error_m": agg.mean_position_error_m,
        });
        scheme_entry
            .as_object_mut()
            .expect("scheme entry is an object")
            .insert(format!("{}", agg.snr_db), per_snr);
    }
    json!({
        "config": config_echo(cfg),
        "seed": cfg.seed,
        "results": results,
    })
}

/// Hand-rolled SVG of BER versus SNR, log-scale vertical axis, one polyline
/// per scheme. Zero-BER and non-finite-SNR points are skipped.
pub fn ber_curve_svg(records: &[BlockRecord]) -> String {
    let aggs = aggregate(records);
    let (w, h) = (640.0f64, 480.0f64);
    let (ml, mr, mt, mb) = (70.0f64, 20.0f64, 20.0f64, 50.0f64);
    let finite: Vec<&Aggregate> = aggs.iter().filter(|a| a.snr_db.is_finite()).collect();
    let (x_min, x_max) = finite.iter().fold((f64::MAX, f64::MIN), |(lo, hi), a| {
        (lo.min(a.snr_db), hi.max(a.snr_db))
    });
    let (x_min, x_max) = if finite.is_empty() || x_min >= x_max {
        (0.0, 1.0)
    } else {
        (x_min, x_max)
    };
    let (y_lo, y_hi) = (1e-6f64, 1.0f64);
    let x_of = |snr: f64| ml + (snr - x_min) / (x_max - x_min) * (w - ml - mr);
    let y_of = |b: f64| {
        let c = b.clamp(y_lo, y_hi);
        mt + (y_hi.log10() - c.log10()) / (y_hi.log10() - y_lo.log10()) * (h - mt - mb)
    };
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    // Axes and decade gridlines.
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    s.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    let mut decade = y_hi;
    while decade >= y_lo {
        let y = y_of(decade);
        s.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#dddddd\"/>\n",
            w - mr
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">1e{}</text>\n",
            ml - 6.0,
            y + 4.0,
            decade.log10().round() as i64
        ));
        decade /= 10.0;
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">SNR (dB)</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">BER</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    let mut snrs: Vec<f64> = finite.iter().map(|a| a.snr_db).collect();
    snrs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN SNR"));
    snrs.dedup();
    for snr in &snrs {
        let x = x_of(*snr);
        s.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{snr}</text>\n",
            h - mb + 16.0
        ));
    }
    let color = |scheme: Scheme| match scheme {
        Scheme::Ideal => "#2ca02c",
        Scheme::Proposed => "#1f77b4",
        Scheme::Pilot => "#d62728",
    };
    let mut legend_y = mt + 14.0;
    for scheme in [Scheme::Ideal, Scheme::Proposed, Scheme::Pilot] {
        let pts: Vec<String> = finite
            .iter()
            .filter(|a| a.scheme == scheme && a.ber > 0.0)
            .map(|a| format!("{},{}", x_of(a.snr_db), y_of(a.ber)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            color(scheme),
            pts.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"12\" fill=\"{}\">{scheme}</text>\n",
            w - mr - 90.0,
            color(scheme)
        ));
        legend_y += 16.0;
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `records.csv`, `summary.json` and (optionally) `ber_curve.svg`
/// into `out_dir`, creating it if needed; returns the written paths.
pub fn emit_results(
    records: &[BlockRecord],
    cfg: &ScenarioConfig,
    out_dir: &Path,
    plot: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let csv_path = out_dir.join("records.csv");
    std::fs::write(&csv_path, records_to_csv(records))?;
    written.push(csv_path);
    let json_path = out_dir.join("summary.json");
    let summary = summary_json(records, cfg);
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n",
    )?;
    written.push(json_path);
    if plot {
        let svg_path = out_dir.join("ber_curve.svg");
        std::fs::write(&svg_path, ber_curve_svg(records))?;
        written.push(svg_path);
    }
    Ok(written)
}

/// One noiseless single-shot sensing round on trial 0: returns truth and
/// estimates as JSON (used by the `sense` CLI subcommand).
pub fn sense_report(cfg: &ScenarioConfig) -> Result<serde_json::Value, HarnessError> {
    validate(cfg)?;
    let mut sub = cfg.clone();
    sub.schemes = vec![Scheme::Proposed];
    sub.trials = 1;
    sub.blocks_per_trial = 1;
    let records = run_simulation(&sub)?;
    let r = &records[0];
    let grid = DDGrid::new(cfg.m, cfg.n, cfg.delta_f_hz).expect("validated grid");
    Ok(json!({
        "l_true": r.l_true,
        "l_hat": r.l_hat,
        "k_true": r.k_true,
        "k_hat": r.k_hat,
        "theta_true_deg": r.theta_true_deg,
        "theta_hat_deg": r.theta_hat_deg,
        "position_error_m": r.position_error_m,
        "delay_resolution_s": grid.delay_resolution_s(),
        "doppler_resolution_hz": grid.doppler_resolution_hz(),
        "snr_db": format!("{}", r.snr_db),
    }))
}
