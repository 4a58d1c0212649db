//! Small FFT helpers shared by the modem transforms and the estimators.
//!
//! All functions here use *unnormalised* DFT kernels (forward kernel
//! `exp(-j*2*pi*k*n/L)`, inverse kernel `exp(+j*2*pi*k*n/L)` without the `1/L`
//! factor); callers apply whatever normalisation their transform definition
//! requires. Plans are cached per thread so the public functions stay pure and
//! safe to call concurrently.

use ndarray::Array2;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::C64;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plan(len: usize, forward: bool, buf: &mut [C64]) {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let plan = cache
            .entry((len, forward))
            .or_insert_with(|| {
                if forward {
                    planner.plan_fft_forward(len)
                } else {
                    planner.plan_fft_inverse(len)
                }
            })
            .clone();
        plan.process(buf);
    });
}

/// In-place unnormalised transform of every column (axis 0) of `a`.
fn transform_axis0(a: &mut Array2<C64>, forward: bool) {
    let rows = a.nrows();
    let mut scratch = vec![C64::new(0.0, 0.0); rows];
    for mut col in a.columns_mut() {
        for (s, v) in scratch.iter_mut().zip(col.iter()) {
            *s = *v;
        }
        with_plan(rows, forward, &mut scratch);
        for (v, s) in col.iter_mut().zip(scratch.iter()) {
            *v = *s;
        }
    }
}

/// In-place unnormalised transform of every row (axis 1) of `a`.
fn transform_axis1(a: &mut Array2<C64>, forward: bool) {
    let cols = a.ncols();
    let mut scratch = vec![C64::new(0.0, 0.0); cols];
    for mut row in a.rows_mut() {
        for (s, v) in scratch.iter_mut().zip(row.iter()) {
            *s = *v;
        }
        with_plan(cols, forward, &mut scratch);
        for (v, s) in row.iter_mut().zip(scratch.iter()) {
            *v = *s;
        }
    }
}

/// Unnormalised 2-D forward DFT over both axes.
pub fn dft2(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis0(&mut out, true);
    transform_axis1(&mut out, true);
    out
}

/// Unnormalised 2-D inverse DFT over both axes (no `1/(rows*cols)` factor).
pub fn idft2(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis0(&mut out, false);
    transform_axis1(&mut out, false);
    out
}

/// Unnormalised forward DFT along axis 0 (delay axis of a DD frame).
pub fn dft_axis0(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis0(&mut out, true);
    out
}

/// Unnormalised inverse DFT along axis 0.
pub fn idft_axis0(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis0(&mut out, false);
    out
}

/// Unnormalised forward DFT along axis 1 (Doppler axis of a DD frame).
pub fn dft_axis1(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis1(&mut out, true);
    out
}

/// Unnormalised inverse DFT along axis 1.
pub fn idft_axis1(a: &Array2<C64>) -> Array2<C64> {
    let mut out = a.clone();
    transform_axis1(&mut out, false);
    out
}

/// Unnormalised forward DFT of a 1-D buffer, in place.
pub fn dft_inplace(buf: &mut [C64]) {
    with_plan(buf.len(), true, buf);
}

/// Unnormalised inverse DFT of a 1-D buffer, in place.
pub fn idft_inplace(buf: &mut [C64]) {
    with_plan(buf.len(), false, buf);
}
