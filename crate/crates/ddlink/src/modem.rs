//! Delay-Doppler grid types and the OTFS modem transforms.
//!
//! A frame of `M x N` symbols lives on the delay-Doppler (DD) grid: `M` delay
//! bins of width `1/(M*delta_f)` seconds and `N` Doppler bins of width
//! `1/(N*T)` Hz, with `T*delta_f == 1`. The 2-D symplectic transforms
//! ([`isfft`] / [`sfft`]) move frames between the DD and time-frequency (TF)
//! domains; the per-slot multicarrier pair ([`heisenberg`] / [`wigner`])
//! moves TF frames to and from a length `M*N` sample stream. All four use
//! symmetric `1/sqrt(.)` normalisation so each is exactly unitary and energy
//! is preserved end to end.
//!
//! Index conventions used throughout the crate:
//! - frames are indexed `[l, k]` = (delay bin, Doppler bin);
//! - vectorised frames use linear index `l + M*k` (delay-fastest);
//! - time samples are grouped per TF slot: sample `n*M + m'` is the `m'`-th
//!   sample of slot `n`.

use ndarray::{Array1, Array2};
use serde::Serialize;
use std::str::FromStr;
use thiserror::Error;

use crate::fft;
use crate::C64;

/// Errors from grid construction and modem transforms.
#[derive(Debug, Error)]
pub enum ModemError {
    #[error("grid dimensions must be nonzero, got {m}x{n}")]
    EmptyGrid { m: usize, n: usize },
    #[error("subcarrier spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("data shape {got_rows}x{got_cols} does not match grid {m}x{n}")]
    ShapeMismatch {
        m: usize,
        n: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("non-finite sample at linear index {0}")]
    NonFinite(usize),
    #[error("time signal length {got} does not match grid sample count {want}")]
    BadSampleCount { want: usize, got: usize },
    #[error("unsupported pulse: {0}")]
    UnsupportedPulse(String),
}

/// Transmit/receive pulse shape for the multicarrier transforms.
///
/// Only the rectangular pulse (no cyclic prefix, one slot per multicarrier
/// symbol) is implemented; other shapes are rejected when parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pulse {
    Rectangular,
}

impl FromStr for Pulse {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rect" | "rectangular" => Ok(Pulse::Rectangular),
            other => Err(ModemError::UnsupportedPulse(other.to_string())),
        }
    }
}

/// Delay-Doppler grid geometry: `m` delay bins, `n` Doppler bins, subcarrier
/// spacing `delta_f` Hz and slot duration `t = 1/delta_f` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DDGrid {
    m: usize,
    n: usize,
    delta_f_hz: f64,
    t_s: f64,
}

impl DDGrid {
    /// Builds a grid; `t` is derived as `1/delta_f` so `t*delta_f == 1` holds
    /// by construction.
    pub fn new(m: usize, n: usize, delta_f_hz: f64) -> Result<Self, ModemError> {
        if m == 0 || n == 0 {
            return Err(ModemError::EmptyGrid { m, n });
        }
        if !(delta_f_hz.is_finite() && delta_f_hz > 0.0) {
            return Err(ModemError::BadSpacing(delta_f_hz));
        }
        Ok(DDGrid {
            m,
            n,
            delta_f_hz,
            t_s: 1.0 / delta_f_hz,
        })
    }

    /// Number of delay bins.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Subcarrier spacing in Hz.
    pub fn delta_f_hz(&self) -> f64 {
        self.delta_f_hz
    }

    /// Multicarrier slot duration in seconds.
    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    /// Total symbols (and time samples) per frame.
    pub fn bins(&self) -> usize {
        self.m * self.n
    }

    /// Delay bin width in seconds: `1/(m*delta_f)`.
    pub fn delay_resolution_s(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f_hz)
    }

    /// Doppler bin width in Hz: `1/(n*t)`.
    pub fn doppler_resolution_hz(&self) -> f64 {
        1.0 / (self.n as f64 * self.t_s)
    }

    /// Frame duration in seconds (`n` slots of `t` each).
    pub fn frame_duration_s(&self) -> f64 {
        self.n as f64 * self.t_s
    }
}

fn check_finite(data: &Array2<C64>) -> Result<(), ModemError> {
    for (i, v) in data.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(ModemError::NonFinite(i));
        }
    }
    Ok(())
}

/// An `M x N` frame of complex symbols on the delay-Doppler grid, indexed
/// `[l, k]`. Entries are verified finite at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DDFrame {
    grid: DDGrid,
    data: Array2<C64>,
}

/// An `M x N` frame in the time-frequency domain, indexed `[m, n]` =
/// (subcarrier, slot).
#[derive(Debug, Clone, PartialEq)]
pub struct TFFrame {
    grid: DDGrid,
    data: Array2<C64>,
}

/// A length `M*N` baseband sample stream produced by [`heisenberg`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    grid: DDGrid,
    samples: Vec<C64>,
}

/// A vectorised DD frame using the `l + M*k` linear index.
#[derive(Debug, Clone, PartialEq)]
pub struct DDVector {
    grid: DDGrid,
    data: Array1<C64>,
}

macro_rules! frame_common {
    ($ty:ident) => {
        impl $ty {
            /// Wraps existing data after validating shape and finiteness.
            pub fn new(grid: DDGrid, data: Array2<C64>) -> Result<Self, ModemError> {
                if data.nrows() != grid.m() || data.ncols() != grid.n() {
                    return Err(ModemError::ShapeMismatch {
                        m: grid.m(),
                        n: grid.n(),
                        got_rows: data.nrows(),
                        got_cols: data.ncols(),
                    });
                }
                check_finite(&data)?;
                Ok(Self { grid, data })
            }

            /// All-zero frame.
            pub fn zeros(grid: DDGrid) -> Self {
                Self {
                    grid,
                    data: Array2::zeros((grid.m(), grid.n())),
                }
            }

            /// The grid this frame lives on.
            pub fn grid(&self) -> DDGrid {
                self.grid
            }

            /// Immutable view of the symbol matrix.
            pub fn data(&self) -> &Array2<C64> {
                &self.data
            }

            /// Mutable view of the symbol matrix.
            pub fn data_mut(&mut self) -> &mut Array2<C64> {
                &mut self.data
            }

            /// Sum of squared magnitudes over the frame.
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|v| v.norm_sqr()).sum()
            }

            /// Frame scaled by a complex constant.
            pub fn scaled(&self, c: C64) -> Self {
                Self {
                    grid: self.grid,
                    data: self.data.mapv(|v| v * c),
                }
            }

            /// Largest entrywise magnitude difference to another frame.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.data
                    .iter()
                    .zip(other.data.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }
        }
    };
}

frame_common!(DDFrame);
frame_common!(TFFrame);

impl DDFrame {
    /// Cyclic shift by `dl` delay bins and `dk` Doppler bins (either sign):
    /// `out[l, k] = self[(l - dl) mod M, (k - dk) mod N]`.
    pub fn cyclic_shift(&self, dl: i64, dk: i64) -> DDFrame {
        let (m, n) = (self.grid.m() as i64, self.grid.n() as i64);
        let mut out = Array2::zeros((self.grid.m(), self.grid.n()));
        for l in 0..m {
            let src_l = (l - dl).rem_euclid(m) as usize;
            for k in 0..n {
                let src_k = (k - dk).rem_euclid(n) as usize;
                out[[l as usize, k as usize]] = self.data[[src_l, src_k]];
            }
        }
        DDFrame {
            grid: self.grid,
            data: out,
        }
    }
}

impl TimeSignal {
    /// Wraps a sample stream after validating length and finiteness.
    pub fn new(grid: DDGrid, samples: Vec<C64>) -> Result<Self, ModemError> {
        if samples.len() != grid.bins() {
            return Err(ModemError::BadSampleCount {
                want: grid.bins(),
                got: samples.len(),
            });
        }
        for (i, v) in samples.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(ModemError::NonFinite(i));
            }
        }
        Ok(TimeSignal { grid, samples })
    }

    /// The grid this signal was generated from.
    pub fn grid(&self) -> DDGrid {
        self.grid
    }

    /// The `M*N` baseband samples.
    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    /// Sum of squared magnitudes over the stream.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

impl DDVector {
    /// Wraps a vector after validating length and finiteness.
    pub fn new(grid: DDGrid, data: Array1<C64>) -> Result<Self, ModemError> {
        if data.len() != grid.bins() {
            return Err(ModemError::BadSampleCount {
                want: grid.bins(),
                got: data.len(),
            });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(ModemError::NonFinite(i));
            }
        }
        Ok(DDVector { grid, data })
    }

    /// All-zero vector on `grid`.
    pub fn zeros(grid: DDGrid) -> Self {
        DDVector {
            grid,
            data: Array1::zeros(grid.bins()),
        }
    }

    /// The grid this vector is a flattening of.
    pub fn grid(&self) -> DDGrid {
        self.grid
    }

    /// Flat element view, linear index `l + M*k`.
    pub fn data(&self) -> &Array1<C64> {
        &self.data
    }

    /// Mutable flat element view.
    pub fn data_mut(&mut self) -> &mut Array1<C64> {
        &mut self.data
    }
}

/// Inverse symplectic finite Fourier transform: DD frame to TF frame.
///
/// `TF[m, n] = 1/sqrt(M*N) * sum_{l,k} DD[l, k] *
/// exp(j*2*pi*(n*k/N - m*l/M))`: a forward DFT along delay and an inverse DFT
/// along Doppler, jointly unitary.
pub fn isfft(dd: &DDFrame) -> TFFrame {
    let scale = 1.0 / (dd.grid.bins() as f64).sqrt();
    let data = fft::idft_axis1(&fft::dft_axis0(&dd.data)).mapv(|v| v * scale);
    TFFrame {
        grid: dd.grid,
        data,
    }
}

/// Symplectic finite Fourier transform: TF frame back to the DD frame.
/// Exact inverse of [`isfft`].
pub fn sfft(tf: &TFFrame) -> DDFrame {
    let scale = 1.0 / (tf.grid.bins() as f64).sqrt();
    let data = fft::dft_axis1(&fft::idft_axis0(&tf.data)).mapv(|v| v * scale);
    DDFrame {
        grid: tf.grid,
        data,
    }
}

/// Multicarrier modulator: TF frame to `M*N` time samples, one length-`M`
/// slot per TF column, rectangular pulse, no cyclic prefix.
///
/// `s[n*M + m'] = 1/sqrt(M) * sum_m TF[m, n] * exp(j*2*pi*m*m'/M)`.
pub fn heisenberg(tf: &TFFrame, pulse: Pulse) -> TimeSignal {
    let Pulse::Rectangular = pulse;
    let m = tf.grid.m();
    let scale = 1.0 / (m as f64).sqrt();
    let mut samples = vec![C64::new(0.0, 0.0); tf.grid.bins()];
    let mut slot = vec![C64::new(0.0, 0.0); m];
    for n in 0..tf.grid.n() {
        for (i, s) in slot.iter_mut().enumerate() {
            *s = tf.data[[i, n]];
        }
        fft::idft_inplace(&mut slot);
        for (i, s) in slot.iter().enumerate() {
            samples[n * m + i] = s * scale;
        }
    }
    TimeSignal {
        grid: tf.grid,
        samples,
    }
}

/// Multicarrier demodulator: time samples back to the TF frame. Exact inverse
/// of [`heisenberg`] for the rectangular pulse.
pub fn wigner(sig: &TimeSignal, pulse: Pulse) -> TFFrame {
    let Pulse::Rectangular = pulse;
    let m = sig.grid.m();
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = Array2::zeros((m, sig.grid.n()));
    let mut slot = vec![C64::new(0.0, 0.0); m];
    for n in 0..sig.grid.n() {
        slot.copy_from_slice(&sig.samples[n * m..(n + 1) * m]);
        fft::dft_inplace(&mut slot);
        for (i, s) in slot.iter().enumerate() {
            data[[i, n]] = s * scale;
        }
    }
    TFFrame {
        grid: sig.grid,
        data,
    }
}

/// Flattens a DD frame into a length `M*N` vector with linear index
/// `l + M*k` (delay-fastest).
pub fn vectorize(frame: &DDFrame) -> DDVector {
    let m = frame.grid.m();
    let mut data = Array1::zeros(frame.grid.bins());
    for k in 0..frame.grid.n() {
        for l in 0..m {
            data[l + m * k] = frame.data[[l, k]];
        }
    }
    DDVector {
        grid: frame.grid,
        data,
    }
}

/// Inverse of [`vectorize`]: restores the `M x N` frame from its flattening.
pub fn devectorize(vec: &DDVector) -> DDFrame {
    let m = vec.grid.m();
    let mut data = Array2::zeros((m, vec.grid.n()));
    for k in 0..vec.grid.n() {
        for l in 0..m {
            data[[l, k]] = vec.data[l + m * k];
        }
    }
    DDFrame {
        grid: vec.grid,
        data,
    }
}

/// Builds the `MN x MN` frame-shift matrix of `x`: column `l' + M*k'` is the
/// vectorised copy of `x` cyclically shifted by `(l', k')`, so multiplying a
/// vectorised single-tap channel by this matrix applies the twisted circular
/// convolution. Every column has norm `||x||_F`.
pub fn build_x_matrix(x: &DDFrame) -> Array2<C64> {
    let (m, n) = (x.grid.m(), x.grid.n());
    let bins = x.grid.bins();
    let mut out = Array2::zeros((bins, bins));
    for kp in 0..n {
        for lp in 0..m {
            let col = lp + m * kp;
            for k in 0..n {
                let src_k = (k + n - kp) % n;
                for l in 0..m {
                    let src_l = (l + m - lp) % m;
                    out[[l + m * k, col]] = x.data[[src_l, src_k]];
                }
            }
        }
    }
    out
}
