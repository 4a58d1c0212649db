//! Python bindings: delay-Doppler grid and transforms, echo sensing,
//! localisation and the scenario-driven Monte-Carlo simulation.
//!
//! Frames cross the boundary as flat lists of complex samples in
//! delay-fastest order (linear index `l + m * k`).

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ddlink_core::harness;
use ddlink_core::modem::{self, DDFrame, DDGrid, DDVector, Pulse, TimeSignal};
use ddlink_core::{geometry, metrics, sensing, tracking};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn frame_from_vec(grid: &DDGrid, data: &[Complex64]) -> PyResult<DDFrame> {
    if data.len() != grid.bins() {
        return Err(PyValueError::new_err(format!(
            "expected {} samples for a {}x{} grid, got {}",
            grid.bins(),
            grid.m(),
            grid.n(),
            data.len()
        )));
    }
    let mut f = DDFrame::zeros(*grid);
    for (i, v) in data.iter().enumerate() {
        f.data_mut()[[i % grid.m(), i / grid.m()]] = *v;
    }
    Ok(f)
}

fn frame_to_vec(f: &DDFrame) -> Vec<Complex64> {
    let (m, n) = (f.grid().m(), f.grid().n());
    let mut out = Vec::with_capacity(m * n);
    for k in 0..n {
        for l in 0..m {
            out.push(f.data()[[l, k]]);
        }
    }
    out
}

fn tf_from_vec(grid: &DDGrid, data: &[Complex64]) -> PyResult<modem::TFFrame> {
    let f = frame_from_vec(grid, data)?;
    modem::TFFrame::new(*grid, f.data().clone()).map_err(err)
}

fn tf_to_vec(f: &modem::TFFrame) -> Vec<Complex64> {
    let (m, n) = (f.grid().m(), f.grid().n());
    let mut out = Vec::with_capacity(m * n);
    for k in 0..n {
        for l in 0..m {
            out.push(f.data()[[l, k]]);
        }
    }
    out
}

/// Delay-Doppler grid geometry.
#[pyclass]
#[derive(Clone)]
struct Grid {
    inner: DDGrid,
}

#[pymethods]
impl Grid {
    #[new]
    fn new(m: usize, n: usize, delta_f_hz: f64) -> PyResult<Self> {
        Ok(Grid {
            inner: DDGrid::new(m, n, delta_f_hz).map_err(err)?,
        })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn delta_f_hz(&self) -> f64 {
        self.inner.delta_f_hz()
    }

    #[getter]
    fn delay_resolution_s(&self) -> f64 {
        self.inner.delay_resolution_s()
    }

    #[getter]
    fn doppler_resolution_hz(&self) -> f64 {
        self.inner.doppler_resolution_hz()
    }

    #[getter]
    fn frame_duration_s(&self) -> f64 {
        self.inner.frame_duration_s()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(m={}, n={}, delta_f_hz={})",
            self.inner.m(),
            self.inner.n(),
            self.inner.delta_f_hz()
        )
    }
}

/// Delay-Doppler frame -> time-frequency frame (inverse symplectic FFT).
#[pyfunction]
fn isfft(grid: &Grid, dd: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let f = frame_from_vec(&grid.inner, &dd)?;
    Ok(tf_to_vec(&modem::isfft(&f)))
}

/// Time-frequency frame -> delay-Doppler frame (symplectic FFT).
#[pyfunction]
fn sfft(grid: &Grid, tf: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let tff = tf_from_vec(&grid.inner, &tf)?;
    Ok(frame_to_vec(&modem::sfft(&tff)))
}

/// Full modulation: delay-Doppler frame to transmit samples.
#[pyfunction]
fn to_time(grid: &Grid, dd: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let f = frame_from_vec(&grid.inner, &dd)?;
    let sig = modem::heisenberg(&modem::isfft(&f), Pulse::Rectangular);
    Ok(sig.samples().to_vec())
}

/// Full demodulation: received samples back to the delay-Doppler frame.
#[pyfunction]
fn from_time(grid: &Grid, samples: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let sig = TimeSignal::new(grid.inner, samples).map_err(err)?;
    let dd = modem::sfft(&modem::wigner(&sig, Pulse::Rectangular));
    Ok(frame_to_vec(&dd))
}

/// Cyclic delay/Doppler shift of a frame.
#[pyfunction]
fn cyclic_shift(grid: &Grid, dd: Vec<Complex64>, dl: i64, dk: i64) -> PyResult<Vec<Complex64>> {
    let f = frame_from_vec(&grid.inner, &dd)?;
    Ok(frame_to_vec(&f.cyclic_shift(dl, dk)))
}

/// Applies one delay-Doppler path (shift by `(l, k)` and scale by `gain`).
#[pyfunction]
fn apply_single_path(
    grid: &Grid,
    dd: Vec<Complex64>,
    l: usize,
    k: usize,
    gain: Complex64,
) -> PyResult<Vec<Complex64>> {
    let f = frame_from_vec(&grid.inner, &dd)?;
    let path = geometry::DDPath {
        l,
        k,
        gain,
        angle_rad: 0.0,
        tau_s: 0.0,
        nu_hz: 0.0,
    };
    let y = geometry::apply_dd_channel(&f, &[path], Complex64::new(1.0, 0.0)).map_err(err)?;
    Ok(frame_to_vec(&y))
}

/// Matched-filters `received` against `reference` and returns
/// `(l, k, peak)` of the strongest correlation bin.
#[pyfunction]
fn matched_filter_peak(
    grid: &Grid,
    received: Vec<Complex64>,
    reference: Vec<Complex64>,
) -> PyResult<(usize, usize, Complex64)> {
    let x = frame_from_vec(&grid.inner, &reference)?;
    let r_frame = frame_from_vec(&grid.inner, &received)?;
    let mut r = DDVector::zeros(grid.inner);
    for (i, v) in r.data_mut().iter_mut().enumerate() {
        *v = r_frame.data()[[i % grid.inner.m(), i / grid.inner.m()]];
    }
    let c = sensing::matched_filter(&r, &x).map_err(err)?;
    sensing::peak_pick(&c).map_err(err)
}

/// Estimation error bound for the full channel vector given the transmit
/// frame, per-bin noise power and scalar array gain.
#[pyfunction]
fn channel_crb(grid: &Grid, frame: Vec<Complex64>, n0: f64, g: f64) -> PyResult<f64> {
    let f = frame_from_vec(&grid.inner, &frame)?;
    sensing::crb_h(&f, n0, g).map_err(err)
}

/// Half-wavelength array steering vector.
#[pyfunction]
fn steering(theta_rad: f64, n: usize) -> Vec<Complex64> {
    geometry::steering_vector(theta_rad, n).to_vec()
}

/// True downlink and round-trip grid bins plus bearing for a target.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn channel_bins(
    grid: &Grid,
    x_m: f64,
    y_m: f64,
    vx_mps: f64,
    vy_mps: f64,
    f_c_hz: f64,
    c_mps: f64,
) -> PyResult<(usize, usize, usize, usize, f64)> {
    let t = geometry::Target {
        position_m: [x_m, y_m],
        velocity_mps: [vx_mps, vy_mps],
        rcs: 1.0,
    };
    if x_m == 0.0 && y_m == 0.0 {
        return Err(PyValueError::new_err("target at origin"));
    }
    let tau = t.range_m() / c_mps;
    let nu = f_c_hz * t.radial_speed_mps() / c_mps;
    Ok((
        geometry::delay_bin(tau, &grid.inner),
        geometry::doppler_bin(nu, &grid.inner),
        geometry::delay_bin(2.0 * tau, &grid.inner),
        geometry::doppler_bin(2.0 * nu, &grid.inner),
        t.angle_rad(),
    ))
}

/// Position from round-trip delay and bearing.
#[pyfunction]
fn localize(eta_hat_s: f64, theta_hat_rad: f64, c_mps: f64) -> (f64, f64) {
    let p = tracking::localize(eta_hat_s, theta_hat_rad, c_mps);
    (p[0], p[1])
}

/// Bearing of a position (radians).
#[pyfunction]
fn predict_angle(x_m: f64, y_m: f64) -> PyResult<f64> {
    tracking::predict_angle([x_m, y_m]).map_err(err)
}

/// Gaussian tail probability.
#[pyfunction]
fn q_function(x: f64) -> f64 {
    metrics::q_function(x)
}

/// Runs the Monte-Carlo simulation described by a scenario text and returns
/// the JSON summary (per-scheme, per-SNR BER and sensing aggregates).
#[pyfunction]
fn run_simulation(config_text: &str) -> PyResult<String> {
    let cfg = harness::parse_config(config_text).map_err(err)?;
    let records = harness::run_simulation(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&harness::summary_json(&records, &cfg)).map_err(err)
}

/// Runs the simulation and returns the per-block records as CSV.
#[pyfunction]
fn run_records_csv(config_text: &str) -> PyResult<String> {
    let cfg = harness::parse_config(config_text).map_err(err)?;
    let records = harness::run_simulation(&cfg).map_err(err)?;
    Ok(harness::records_to_csv(&records))
}

/// One noiseless sensing round on the configured scenario, as JSON.
#[pyfunction]
fn sense_report(config_text: &str) -> PyResult<String> {
    let cfg = harness::parse_config(config_text).map_err(err)?;
    serde_json::to_string_pretty(&harness::sense_report(&cfg).map_err(err)?).map_err(err)
}

#[pymodule]
#[pyo3(name = "ddlink")]
fn ddlink_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_function(wrap_pyfunction!(isfft, m)?)?;
    m.add_function(wrap_pyfunction!(sfft, m)?)?;
    m.add_function(wrap_pyfunction!(to_time, m)?)?;
    m.add_function(wrap_pyfunction!(from_time, m)?)?;
    m.add_function(wrap_pyfunction!(cyclic_shift, m)?)?;
    m.add_function(wrap_pyfunction!(apply_single_path, m)?)?;
    m.add_function(wrap_pyfunction!(matched_filter_peak, m)?)?;
    m.add_function(wrap_pyfunction!(channel_crb, m)?)?;
    m.add_function(wrap_pyfunction!(steering, m)?)?;
    m.add_function(wrap_pyfunction!(channel_bins, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(predict_angle, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(run_records_csv, m)?)?;
    m.add_function(wrap_pyfunction!(sense_report, m)?)?;
    Ok(())
}
