//! Sampled signal containers, the rate lattice, and integer-factor rate conversion.
//!
//! Everything downstream of the pulse encoder uses periodic (circular) record
//! semantics, so ideal filters are realized exactly by DFT bin selection.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft;

/// A finite record of samples at a fixed rate (baseband rate is 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Signal<T> {
    samples: Vec<T>,
    rate: f64,
}

pub type RealSignal = Signal<f64>;
pub type ComplexSignal = Signal<Complex64>;

impl<T> Signal<T> {
    pub fn new(samples: Vec<T>, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(invalid(format!("rate must be positive, got {rate}")));
        }
        if samples.is_empty() {
            return Err(invalid("signal must have at least one sample"));
        }
        Ok(Self { samples, rate })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same-rate signal with new samples; length may differ.
    pub(crate) fn with_samples<U>(&self, samples: Vec<U>) -> Signal<U> {
        Signal {
            samples,
            rate: self.rate,
        }
    }

    pub(crate) fn from_parts(samples: Vec<T>, rate: f64) -> Self {
        debug_assert!(!samples.is_empty() && rate > 0.0);
        Self { samples, rate }
    }
}

impl ComplexSignal {
    pub fn re(&self) -> RealSignal {
        self.with_samples(self.samples.iter().map(|c| c.re).collect())
    }

    pub fn im(&self) -> RealSignal {
        self.with_samples(self.samples.iter().map(|c| c.im).collect())
    }

    pub fn from_parts_iq(i: &RealSignal, q: &RealSignal) -> Result<Self> {
        check_same(i.len(), q.len())?;
        check_rate(i.rate, q.rate)?;
        let s = i
            .samples
            .iter()
            .zip(&q.samples)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Ok(i.with_samples(s))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl RealSignal {
    pub fn to_complex(&self) -> ComplexSignal {
        self.with_samples(fft::to_complex(&self.samples))
    }
}

pub(crate) fn check_same(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn check_rate(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::RateMismatch(a, b));
    }
    Ok(())
}

/// The rate lattice: baseband (1), encoder output (`K`), interleaved RF-DT
/// samples (`4K`, period `T`), and the fine "continuous-time" grid (`4KR`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RateConfig {
    /// Record length at baseband.
    pub n_bb: usize,
    /// Encoder oversampling ratio.
    pub k: usize,
    /// Fine-grid subdivisions per RF-DT sample period `T`.
    pub r: usize,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            n_bb: 40960,
            k: 8,
            r: 20,
        }
    }
}

impl RateConfig {
    pub fn new(n_bb: usize, k: usize, r: usize) -> Result<Self> {
        let cfg = Self { n_bb, k, r };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bb < 2 || self.k < 1 || self.r < 1 {
            return Err(invalid(format!(
                "rate config needs n_bb >= 2, K >= 1, R >= 1 (got {}, {}, {})",
                self.n_bb, self.k, self.r
            )));
        }
        self.n_bb
            .checked_mul(self.fine_per_baseband())
            .ok_or_else(|| invalid("fine-grid length overflows"))?;
        Ok(())
    }

    pub fn with_n_bb(self, n_bb: usize) -> Self {
        Self { n_bb, ..self }
    }

    pub fn f_d(&self) -> f64 {
        self.k as f64
    }

    pub fn f_r(&self) -> f64 {
        4.0 * self.k as f64
    }

    pub fn f_fine(&self) -> f64 {
        (4 * self.k * self.r) as f64
    }

    /// Carrier frequency; equals the encoder rate since upconversion runs at `4 f_c`.
    pub fn f_c(&self) -> f64 {
        self.f_d()
    }

    pub fn fine_per_baseband(&self) -> usize {
        4 * self.k * self.r
    }

    pub fn n_d(&self) -> usize {
        self.n_bb * self.k
    }

    pub fn n_rf(&self) -> usize {
        4 * self.n_d()
    }

    pub fn n_fine(&self) -> usize {
        self.n_bb * self.fine_per_baseband()
    }

    /// DFT bin of the carrier in an `n_fine`-point transform.
    pub fn carrier_bin(&self) -> usize {
        self.k * self.n_bb
    }
}

/// Repeats every sample `factor` times.
pub fn upsample_hold<T: Copy>(x: &Signal<T>, factor: usize) -> Result<Signal<T>> {
    if factor == 0 {
        return Err(invalid("upsampling factor must be >= 1"));
    }
    let mut out = Vec::with_capacity(x.len() * factor);
    for &v in &x.samples {
        out.extend(std::iter::repeat(v).take(factor));
    }
    Ok(Signal {
        samples: out,
        rate: x.rate * factor as f64,
    })
}

/// Keeps every `factor`-th sample starting at `phase`.
pub fn downsample<T: Copy>(x: &Signal<T>, factor: usize, phase: usize) -> Result<Signal<T>> {
    if factor == 0 || phase >= factor {
        return Err(invalid(format!(
            "need factor >= 1 and phase < factor (got {factor}, {phase})"
        )));
    }
    if x.len() % factor != 0 {
        return Err(invalid(format!(
            "length {} not divisible by {factor}",
            x.len()
        )));
    }
    let samples = x
        .samples
        .iter()
        .skip(phase)
        .step_by(factor)
        .copied()
        .collect();
    Ok(Signal {
        samples,
        rate: x.rate / factor as f64,
    })
}

/// Band-limited interpolation of a periodic record: zero-stuffing followed by a
/// circular brick-wall low-pass that keeps exactly the original band.
///
/// For even lengths the Nyquist bin is split evenly between `±n/2`, so real
/// inputs stay real.
pub fn upsample_ideal(x: &ComplexSignal, factor: usize) -> Result<ComplexSignal> {
    if factor == 0 {
        return Err(invalid("upsampling factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let n = x.len();
    let m = n * factor;
    let mut spec = x.samples.clone();
    fft::forward(&mut spec);
    let mut up = vec![Complex64::new(0.0, 0.0); m];
    let gain = factor as f64;
    for b in fft::band_bins(n) {
        up[fft::wrap(b, m)] = spec[fft::wrap(b, n)] * gain;
    }
    if n % 2 == 0 {
        let nyq = spec[n / 2] * (gain * 0.5);
        up[fft::wrap(-((n / 2) as i64), m)] = nyq;
        up[n / 2] = nyq;
    }
    fft::inverse_normalized(&mut up);
    Ok(Signal {
        samples: up,
        rate: x.rate * gain,
    })
}

/// Real-valued variant of [`upsample_ideal`]; the output is exactly real.
pub fn upsample_ideal_real(x: &RealSignal, factor: usize) -> Result<RealSignal> {
    let up = upsample_ideal(&x.to_complex(), factor)?;
    Ok(up.re())
}
