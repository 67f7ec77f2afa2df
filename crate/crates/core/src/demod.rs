//! Ideal bandpass filter plus ideal demodulator.
//!
//! The passband `[f_c - 1/2, f_c + 1/2)` of the fine-grid record is moved to
//! baseband, doubled (so `A cos(2π(f_c + f0)t + φ)` demodulates to
//! `A e^{j(2π f0 n + φ)}`), and resampled at the baseband rate.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::Result;
use crate::fft;
use crate::signal::{check_same, ComplexSignal, RateConfig, RealSignal};

/// Extracts the carrier band of a periodic fine-grid record and demodulates it.
///
/// The full-record DFT is evaluated only on the band bins through a polyphase
/// split: one `n_bb`-point FFT per fine-grid phase, then exact twiddles.
pub fn band_extract_demod(xc: &RealSignal, cfg: &RateConfig) -> Result<ComplexSignal> {
    cfg.validate()?;
    check_same(cfg.n_fine(), xc.len())?;
    let n = cfg.n_bb;
    let phases = cfg.fine_per_baseband();
    let total = cfg.n_fine() as i128;
    let carrier = cfg.carrier_bin() as i128;
    let y = xc.samples();

    let bins: Vec<i64> = fft::band_bins(n).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for p in 0..phases {
        for (t, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(y[t * phases + p], 0.0);
        }
        fft::forward(&mut buf);
        for &b in &bins {
            let k = carrier + b as i128;
            let frac = (k * p as i128).rem_euclid(total) as f64 / total as f64;
            let w = Complex64::from_polar(1.0, -TAU * frac);
            let idx = fft::wrap(b, n);
            acc[idx] += buf[idx] * w;
        }
    }
    let scale = 2.0 / phases as f64;
    for v in acc.iter_mut() {
        *v *= scale;
    }
    fft::inverse_normalized(&mut acc);
    ComplexSignal::new(acc, 1.0)
}
