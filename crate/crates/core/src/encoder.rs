//! Pulse encoders. Each acts on the in-phase and quadrature components
//! separately, after oversampling them to the encoder rate.

use crate::error::{invalid, Error, Result};
use crate::signal::{upsample_hold, upsample_ideal_real, ComplexSignal, RateConfig, RealSignal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    /// First-order error-feedback delta-sigma modulator.
    Dsm1,
    /// Memoryless nearest-level quantizer.
    Quantizer,
    /// Identity (infinite-resolution encoder).
    Passthrough,
}

impl EncoderKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dsm1" => Ok(EncoderKind::Dsm1),
            "quantizer" => Ok(EncoderKind::Quantizer),
            "passthrough" => Ok(EncoderKind::Passthrough),
            _ => Err(Error::Config(format!(
                "unknown encoder kind {s:?} (dsm1 | quantizer | passthrough)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Dsm1 => "dsm1",
            EncoderKind::Quantizer => "quantizer",
            EncoderKind::Passthrough => "passthrough",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Ideal,
    Hold,
}

impl Interpolation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Interpolation::Ideal),
            "hold" => Ok(Interpolation::Hold),
            _ => Err(Error::Config(format!(
                "unknown interpolation {s:?} (ideal | hold)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Interpolation::Ideal => "ideal",
            Interpolation::Hold => "hold",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub levels: Vec<f64>,
    pub oversample: usize,
    pub interpolation: Interpolation,
}

impl EncoderConfig {
    pub fn dsm1(levels: Vec<f64>, oversample: usize) -> Self {
        Self {
            kind: EncoderKind::Dsm1,
            levels,
            oversample,
            interpolation: Interpolation::Ideal,
        }
    }

    pub fn passthrough(oversample: usize) -> Self {
        Self {
            kind: EncoderKind::Passthrough,
            levels: uniform_levels(5),
            oversample,
            interpolation: Interpolation::Ideal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversample == 0 {
            return Err(invalid("encoder oversampling must be >= 1"));
        }
        validate_levels(&self.levels)
    }
}

/// `n` uniformly spaced levels spanning `[-1, 1]`.
pub fn uniform_levels(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = 2.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let v = -1.0 + step * i as f64;
            // snap the centre and ends so symmetric sets compare exactly
            if (v).abs() < 1e-15 {
                0.0
            } else {
                v.clamp(-1.0, 1.0)
            }
        })
        .collect()
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 2 {
        return Err(invalid("need at least two quantizer levels"));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("levels must be strictly increasing"));
    }
    let n = levels.len();
    if levels[0] != -1.0 || levels[n - 1] != 1.0 {
        return Err(invalid("levels must span [-1, 1]"));
    }
    for i in 0..n {
        if (levels[i] + levels[n - 1 - i]).abs() > 1e-12 {
            return Err(invalid("levels must be symmetric about 0"));
        }
    }
    Ok(())
}

/// Nearest level to `u`; exact midpoints resolve to the larger level.
pub fn quantize_nearest(u: f64, levels: &[f64]) -> f64 {
    let hi = levels.partition_point(|&l| l < u);
    if hi == 0 {
        return levels[0];
    }
    if hi == levels.len() {
        return levels[levels.len() - 1];
    }
    let (lo_v, hi_v) = (levels[hi - 1], levels[hi]);
    if u - lo_v < hi_v - u {
        lo_v
    } else {
        hi_v
    }
}

/// Encoder applied to one real component at the encoder rate.
pub trait PulseEncoder {
    /// Encodes `input` from zero state, returning the output and the number of
    /// overload events.
    fn encode_component(&self, input: &[f64]) -> (Vec<f64>, usize);
}

pub struct Dsm1<'a> {
    levels: &'a [f64],
    overload: f64,
}

impl<'a> Dsm1<'a> {
    pub fn new(levels: &'a [f64]) -> Self {
        let n = levels.len();
        let gap = levels[n - 1] - levels[n - 2];
        Self {
            levels,
            overload: levels[n - 1] + gap,
        }
    }

    /// Runs the modulator and also returns the error state sequence.
    pub fn run(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
        let mut out = Vec::with_capacity(input.len());
        let mut errs = Vec::with_capacity(input.len());
        let mut e = 0.0;
        let mut overloads = 0;
        for &v in input {
            let u = v + e;
            if u.abs() > self.overload {
                overloads += 1;
            }
            let y = quantize_nearest(u, self.levels);
            e = u - y;
            out.push(y);
            errs.push(e);
        }
        (out, errs, overloads)
    }
}

impl PulseEncoder for Dsm1<'_> {
    fn encode_component(&self, input: &[f64]) -> (Vec<f64>, usize) {
        let (out, _, overloads) = self.run(input);
        (out, overloads)
    }
}

pub struct NearestQuantizer<'a> {
    levels: &'a [f64],
}

impl PulseEncoder for NearestQuantizer<'_> {
    fn encode_component(&self, input: &[f64]) -> (Vec<f64>, usize) {
        let n = self.levels.len();
        let limit = self.levels[n - 1] + (self.levels[n - 1] - self.levels[n - 2]);
        let overloads = input.iter().filter(|v| v.abs() > limit).count();
        (
            input
                .iter()
                .map(|&v| quantize_nearest(v, self.levels))
                .collect(),
            overloads,
        )
    }
}

pub struct Passthrough;

impl PulseEncoder for Passthrough {
    fn encode_component(&self, input: &[f64]) -> (Vec<f64>, usize) {
        (input.to_vec(), 0)
    }
}

/// Encoder output at rate `f_d` together with its overload count.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub signal: ComplexSignal,
    pub overloads: usize,
}

fn encode_real(x: &RealSignal, cfg: &EncoderConfig) -> Result<(RealSignal, usize)> {
    let up = match cfg.interpolation {
        Interpolation::Ideal => upsample_ideal_real(x, cfg.oversample)?,
        Interpolation::Hold => upsample_hold(x, cfg.oversample)?,
    };
    let (out, overloads) = match cfg.kind {
        EncoderKind::Dsm1 => Dsm1::new(&cfg.levels).encode_component(up.samples()),
        EncoderKind::Quantizer => NearestQuantizer {
            levels: &cfg.levels,
        }
        .encode_component(up.samples()),
        EncoderKind::Passthrough => Passthrough.encode_component(up.samples()),
    };
    Ok((RealSignal::new(out, up.rate())?, overloads))
}

/// Pulse-encodes a baseband record: both components are oversampled by `K` and
/// encoded independently from zero state.
pub fn encode(x: &ComplexSignal, cfg: &EncoderConfig, rates: &RateConfig) -> Result<Encoded> {
    cfg.validate()?;
    if cfg.oversample != rates.k {
        return Err(Error::Config(format!(
            "encoder oversampling {} differs from rate config K = {}",
            cfg.oversample, rates.k
        )));
    }
    let (i, oi) = encode_real(&x.re(), cfg)?;
    let (q, oq) = encode_real(&x.im(), cfg)?;
    let overloads = oi + oq;
    if overloads > 0 {
        log::warn!("pulse encoder overloaded on {overloads} samples");
    }
    Ok(Encoded {
        signal: ComplexSignal::from_parts_iq(&i, &q)?,
        overloads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::gen_stimulus;
    use num_complex::Complex64;

    const L5: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

    #[test]
    fn default_levels() {
        assert_eq!(uniform_levels(5), L5.to_vec());
        assert!(validate_levels(&L5).is_ok());
        assert!(validate_levels(&[-1.0, 0.2, 1.0]).is_err());
        assert!(validate_levels(&[-1.0, 0.5]).is_err());
        assert!(validate_levels(&[1.0]).is_err());
        assert!(validate_levels(&[-1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_nearest(0.3, &L5), 0.5);
        assert_eq!(quantize_nearest(0.25, &L5), 0.5);
        assert_eq!(quantize_nearest(-0.25, &L5), 0.0);
        assert_eq!(quantize_nearest(-3.0, &L5), -1.0);
        assert_eq!(quantize_nearest(7.0, &L5), 1.0);
        assert_eq!(quantize_nearest(-0.5, &L5), -0.5);
    }

    #[test]
    fn dsm_constant_recursion() {
        // hand recursion: u = in + e, y = Q(u), e = u - y
        let mut e = 0.0;
        let mut want = Vec::new();
        let mut want_e = Vec::new();
        for _ in 0..6 {
            let u: f64 = 0.3 + e;
            let y = if u < 0.25 { 0.0 } else { 0.5 };
            e = u - y;
            want.push(y);
            want_e.push(e);
        }
        assert_eq!(want, vec![0.5, 0.0, 0.5, 0.0, 0.5, 0.5]);
        let (out, errs, _) = Dsm1::new(&L5).run(&[0.3; 6]);
        assert_eq!(out, want);
        for (a, b) in errs.iter().zip([-0.2, 0.1, -0.1, 0.2, 0.0, -0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dsm_on_level_has_zero_error() {
        let (out, errs, overloads) = Dsm1::new(&L5).run(&[0.5; 100]);
        assert!(out.iter().all(|&v| v == 0.5));
        assert!(errs.iter().all(|&e| e == 0.0));
        assert_eq!(overloads, 0);
    }

    #[test]
    fn dsm_tracks_dc() {
        for c in [-0.93, -0.3, 0.0, 0.1234, 0.77] {
            let (out, _, _) = Dsm1::new(&L5).run(&vec![c; 10_000]);
            let mean = out.iter().sum::<f64>() / out.len() as f64;
            assert!((mean - c).abs() < 1e-3, "{c}: {mean}");
        }
    }

    #[test]
    fn overload_is_flagged() {
        let (out, overloads) = Dsm1::new(&L5).encode_component(&[3.0, 0.0]);
        assert_eq!(out[0], 1.0);
        assert!(overloads >= 1);
    }

    #[test]
    fn passthrough_is_identity() {
        let x = gen_stimulus(64, 3, 0.9).unwrap();
        let rates = RateConfig::new(64, 1, 1).unwrap();
        let enc = encode(&x, &EncoderConfig::passthrough(1), &rates).unwrap();
        assert_eq!(enc.signal, x);
    }

    #[test]
    fn encoder_separable_and_alphabet() {
        let x = gen_stimulus(128, 5, 0.9).unwrap();
        let rates = RateConfig::new(128, 4, 1).unwrap();
        let cfg = EncoderConfig::dsm1(L5.to_vec(), 4);
        let both = encode(&x, &cfg, &rates).unwrap().signal;
        assert_eq!(both.rate(), 4.0);
        assert_eq!(both.len(), 512);
        let i_only = ComplexSignal::new(
            x.samples()
                .iter()
                .map(|v| Complex64::new(v.re, 0.0))
                .collect(),
            1.0,
        )
        .unwrap();
        let q_only = ComplexSignal::new(
            x.samples()
                .iter()
                .map(|v| Complex64::new(v.im, 0.0))
                .collect(),
            1.0,
        )
        .unwrap();
        let ei = encode(&i_only, &cfg, &rates).unwrap().signal;
        let eq = encode(&q_only, &cfg, &rates).unwrap().signal;
        for ((b, a), c) in both.samples().iter().zip(ei.samples()).zip(eq.samples()) {
            assert_eq!(b.re, a.re);
            assert_eq!(b.im, c.re);
            assert!(L5.contains(&b.re) && L5.contains(&b.im));
        }
    }

    #[test]
    fn oversample_must_match_rates() {
        let x = gen_stimulus(32, 1, 0.5).unwrap();
        let rates = RateConfig::new(32, 2, 1).unwrap();
        assert!(encode(&x, &EncoderConfig::dsm1(L5.to_vec(), 4), &rates).is_err());
    }
}
