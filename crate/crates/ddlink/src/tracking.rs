//! Target tracking: state estimation from sensing read-outs, next-block
//! prediction, downlink pre-compensation and reflector localization.
//!
//! Angle convention: boresight along `+y`, `theta = atan2(p_x, p_y)`, so a
//! target at bearing `theta` and range `d` sits at `d*(sin theta, cos theta)`.
//! Round-trip delay `eta` and Doppler `phi` convert back to range and radial
//! speed via `d = c*eta/2` and `v_rad = c*phi/(2*f_c)` (positive closing).
//!
//! A single monostatic Doppler only observes the radial speed, so velocity
//! reconstruction takes a known unit heading and scales it to match the
//! observed radial component; headings nearly orthogonal to the line of
//! sight are rejected as unobservable. Prediction advances the state
//! linearly over one block and re-derives angle and range; the predicted
//! downlink path carries a deterministic phase `-4*pi*f_c*d/c (mod 2*pi)`
//! so that phase evolves with the predicted displacement. Pre-compensation
//! undoes the predicted delay/Doppler shift and the predicted phase ahead of
//! transmission, leaving a purely real end-to-end gain when the prediction
//! matches the true channel.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::geometry::{delay_bin, doppler_bin, CarrierConfig, DDPath, GeometryError, Target};
use crate::modem::{DDFrame, DDGrid};
use crate::C64;
use serde::Serialize;

/// Errors from tracking and localization.
#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("unobservable geometry: heading is nearly orthogonal to the line of sight")]
    UnobservableGeometry,
    #[error("heading must be a unit vector, got norm {0}")]
    BadHeading(f64),
    #[error("angle undefined at the origin")]
    AngleAtOrigin,
    #[error("no measurements")]
    NoMeasurements,
    #[error("got {delays} delays but {angles} angles")]
    LengthMismatch { delays: usize, angles: usize },
    #[error("delay noise std must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("localization did not converge after {iterations} iterations (residual {residual_m} m)")]
    NoConvergence { iterations: usize, residual_m: f64 },
}

/// Kinematic state of one tracked target at a given block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackState {
    /// Position in metres.
    pub position_m: [f64; 2],
    /// Velocity in metres per second.
    pub velocity_mps: [f64; 2],
    /// Bearing `atan2(p_x, p_y)` in radians.
    pub angle_rad: f64,
    /// Range `norm(position)` in metres.
    pub range_m: f64,
    /// Index of the block this state refers to.
    pub block_index: u64,
}

impl TrackState {
    /// Builds a state from position and velocity, deriving angle and range.
    pub fn new(position_m: [f64; 2], velocity_mps: [f64; 2], block_index: u64) -> Self {
        TrackState {
            position_m,
            velocity_mps,
            angle_rad: position_m[0].atan2(position_m[1]),
            range_m: (position_m[0] * position_m[0] + position_m[1] * position_m[1]).sqrt(),
            block_index,
        }
    }
}

/// Result of maximum-likelihood reflector localization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectorFix {
    /// Estimated reflector position in metres.
    pub position_m: [f64; 2],
    /// Gauss-Newton iterations spent before the step shrank below 1e-9 m.
    pub iterations: usize,
}

/// Converts a round-trip delay and a bearing to a position:
/// `p = (c*eta/2) * (sin theta, cos theta)`.
pub fn localize(eta_hat_s: f64, theta_hat_rad: f64, c_mps: f64) -> [f64; 2] {
    let d = c_mps * eta_hat_s / 2.0;
    [d * theta_hat_rad.sin(), d * theta_hat_rad.cos()]
}

/// Reconstructs a velocity vector from a round-trip Doppler and a known
/// unit heading.
///
/// The observed radial speed is `v_rad = c*phi/(2*f_c)` (positive closing);
/// the returned vector is the multiple of `heading` whose radial component
/// reproduces it: `v = -v_rad/(heading . r_hat) * heading` with `r_hat` the
/// unit vector towards the target (a closing target moves against `r_hat`,
/// hence the sign).
pub fn estimate_velocity(
    phi_hat_hz: f64,
    theta_hat_rad: f64,
    f_c_hz: f64,
    c_mps: f64,
    heading: [f64; 2],
) -> Result<[f64; 2], TrackingError> {
    let norm = (heading[0] * heading[0] + heading[1] * heading[1]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(TrackingError::BadHeading(norm));
    }
    let r_hat = [theta_hat_rad.sin(), theta_hat_rad.cos()];
    let along = heading[0] * r_hat[0] + heading[1] * r_hat[1];
    if along.abs() < 0.1 {
        return Err(TrackingError::UnobservableGeometry);
    }
    let v_rad = c_mps * phi_hat_hz / (2.0 * f_c_hz);
    let scale = -v_rad / along;
    Ok([scale * heading[0], scale * heading[1]])
}

/// Advances a state by `delta_t` seconds: position moves linearly, velocity
/// is carried over, angle and range are recomputed, and the block index
/// increments by one.
pub fn predict_state(s: &TrackState, delta_t_s: f64) -> TrackState {
    let position = [
        s.position_m[0] + s.velocity_mps[0] * delta_t_s,
        s.position_m[1] + s.velocity_mps[1] * delta_t_s,
    ];
    TrackState::new(position, s.velocity_mps, s.block_index + 1)
}

/// Bearing of a predicted position, `atan2(p_x, p_y)`; errors at the origin
/// where the bearing is undefined.
pub fn predict_angle(position_m: [f64; 2]) -> Result<f64, TrackingError> {
    if position_m[0] == 0.0 && position_m[1] == 0.0 {
        return Err(TrackingError::AngleAtOrigin);
    }
    Ok(position_m[0].atan2(position_m[1]))
}

/// Predicts the one-way downlink path for a state: amplitude and indices
/// follow the same mapping as a freshly constructed communication path at
/// the state's position/velocity, while the phase is the deterministic
/// displacement phase `-4*pi*f_c*d/c` wrapped to `(-pi, pi]`.
pub fn predict_channel(
    s: &TrackState,
    carrier: &CarrierConfig,
    grid: &DDGrid,
) -> Result<DDPath, GeometryError> {
    let target = Target {
        position_m: s.position_m,
        velocity_mps: s.velocity_mps,
        rcs: 0.0,
    };
    let d = target.range_m();
    if d == 0.0 {
        return Err(GeometryError::TargetAtOrigin);
    }
    let tau_s = d / carrier.c_mps;
    let nu_hz = carrier.f_c_hz * target.radial_speed_mps() / carrier.c_mps;
    let amp = (carrier.c_mps / (4.0 * PI * carrier.f_c_hz * d * d)).sqrt();
    let phase = wrap_pi(-2.0 * TAU * carrier.f_c_hz * d / carrier.c_mps);
    Ok(DDPath {
        l: delay_bin(tau_s, grid),
        k: doppler_bin(nu_hz, grid),
        gain: C64::from_polar(amp, phase),
        angle_rad: target.angle_rad(),
        tau_s,
        nu_hz,
    })
}

/// Pre-compensates a frame against a predicted path and array gain: shifts
/// by the negated predicted delay/Doppler bins and derotates the predicted
/// path and array phases, so the true channel with matching parameters
/// returns a real positive multiple of the original frame. The output norm
/// equals the input norm exactly.
pub fn precompensate(x: &DDFrame, predicted: &DDPath, g_comp: C64) -> DDFrame {
    let rot = C64::from_polar(1.0, -(predicted.gain.arg() + g_comp.arg()));
    x.cyclic_shift(-(predicted.l as i64), -(predicted.k as i64))
        .scaled(rot)
}

/// Maximum-likelihood position of a static reflector from a sequence of
/// round-trip delays with per-measurement bearings under iid Gaussian delay
/// noise.
///
/// Each measurement fixes a position `localize(eta_t, theta_t)`; equal noise
/// weights reduce the ML problem to least squares over those fixes, solved
/// by Gauss-Newton from the first fix until the step drops below 1e-9 m.
pub fn locate_reflector_ml(
    delays_s: &[f64],
    angles_rad: &[f64],
    sigma_s: f64,
    c_mps: f64,
) -> Result<ReflectorFix, TrackingError> {
    if delays_s.is_empty() {
        return Err(TrackingError::NoMeasurements);
    }
    if delays_s.len() != angles_rad.len() {
        return Err(TrackingError::LengthMismatch {
            delays: delays_s.len(),
            angles: angles_rad.len(),
        });
    }
    if !(sigma_s.is_finite() && sigma_s > 0.0) {
        return Err(TrackingError::BadSigma(sigma_s));
    }
    let fixes: Vec<[f64; 2]> = delays_s
        .iter()
        .zip(angles_rad.iter())
        .map(|(&eta, &th)| localize(eta, th, c_mps))
        .collect();
    let mut p = fixes[0];
    const MAX_ITER: usize = 50;
    for iter in 1..=MAX_ITER {
        // Quadratic objective: the Gauss-Newton step jumps to the mean fix.
        let mut grad = [0.0f64; 2];
        for q in &fixes {
            grad[0] += p[0] - q[0];
            grad[1] += p[1] - q[1];
        }
        let inv = 1.0 / fixes.len() as f64;
        let step = [-grad[0] * inv, -grad[1] * inv];
        p[0] += step[0];
        p[1] += step[1];
        if (step[0] * step[0] + step[1] * step[1]).sqrt() < 1e-9 {
            return Ok(ReflectorFix {
                position_m: p,
                iterations: iter,
            });
        }
    }
    let residual = fixes
        .iter()
        .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .fold(0.0f64, f64::max);
    Err(TrackingError::NoConvergence {
        iterations: MAX_ITER,
        residual_m: residual,
    })
}

fn wrap_pi(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    } else if y <= -PI {
        y += TAU;
    }
    y
}
