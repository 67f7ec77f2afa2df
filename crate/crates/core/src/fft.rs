//! Thin helpers over `rustfft` with a per-thread plan cache.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, unnormalized.
pub fn forward(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT, unnormalized (caller divides by the length).
pub fn inverse(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Inverse DFT normalized by `1/len`.
pub fn inverse_normalized(buf: &mut [Complex64]) {
    inverse(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed frequency bins of an `n`-point DFT covering `[-1/2, 1/2)` of the sampling rate.
pub fn band_bins(n: usize) -> std::ops::Range<i64> {
    -((n / 2) as i64)..((n + 1) / 2) as i64
}

/// Maps a signed bin to its index in an `n`-point DFT.
#[inline]
pub fn wrap(bin: i64, n: usize) -> usize {
    bin.rem_euclid(n as i64) as usize
}

pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
