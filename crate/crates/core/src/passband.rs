//! The reference transmitter from the encoder output onward: digital
//! upconversion at `4 f_c`, zero-order hold onto the fine grid, the
//! continuous-time Volterra nonlinearity, then ideal band extraction.

use crate::demod::band_extract_demod;
use crate::encoder::{encode, EncoderConfig, EncoderKind};
use crate::error::{invalid, Error, Result};
use crate::signal::{check_same, upsample_hold, ComplexSignal, RateConfig, RealSignal};

/// Default bound on the multiply-add count of a direct general-kernel sum.
pub const GENERAL_COST_BOUND: f64 = 5e8;

/// Memory limit of every kernel, in units of `T` (one encoder-rate period).
pub const MAX_MEMORY_T: f64 = 4.0;

/// Analytic generator of a one-dimensional kernel factor; `t` is in units of `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelShape {
    /// `exp(-decay t)`
    Exp { decay: f64 },
    /// `exp(-decay t) cos(pi * omega_over_pi * t)`
    ExpCos { decay: f64, omega_over_pi: f64 },
}

impl KernelShape {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            KernelShape::Exp { decay } => (-decay * t).exp(),
            KernelShape::ExpCos {
                decay,
                omega_over_pi,
            } => (-decay * t).exp() * (std::f64::consts::PI * omega_over_pi * t).cos(),
        }
    }

    /// Samples on `[0, memory)` at spacing `1/r`.
    pub fn tabulate(&self, r: usize, memory: f64) -> Vec<f64> {
        let taps = (memory * r as f64).round() as usize;
        (0..taps).map(|l| self.eval(l as f64 / r as f64)).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {p:?} in kernel shape {s:?}")))
        };
        match parts.as_slice() {
            ["exp", d] => Ok(KernelShape::Exp { decay: num(d)? }),
            ["expcos", d, w] => Ok(KernelShape::ExpCos {
                decay: num(d)?,
                omega_over_pi: num(w)?,
            }),
            _ => Err(Error::Config(format!(
                "unknown kernel shape {s:?} (expected exp:<d> or expcos:<d>:<w>)"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            KernelShape::Exp { decay } => format!("exp:{decay}"),
            KernelShape::ExpCos {
                decay,
                omega_over_pi,
            } => format!("expcos:{decay}:{omega_over_pi}"),
        }
    }
}

/// Continuous-time nonlinearity `G`, always of the form `x - delta * (...)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CtKernelSpec {
    /// `x(t) - delta x(t - tau1) x(t - tau2) x(t - tau3)`
    CubicDelay { delta: f64, taus: [f64; 3] },
    /// `x(t) - delta (h1 * x)(t) (h2 * x)(t)` with both factors supported on `[0, memory)`.
    SeparableQuad {
        delta: f64,
        h1: KernelShape,
        h2: KernelShape,
        memory: f64,
    },
    /// Tabulated kernel of arbitrary degree on the fine grid, row-major over
    /// `taps^degree` entries. `resolution` must equal the chain's `R`.
    General {
        delta: f64,
        degree: usize,
        taps: usize,
        resolution: usize,
        values: Vec<f64>,
    },
}

impl CtKernelSpec {
    pub fn cubic_delay(delta: f64) -> Self {
        CtKernelSpec::CubicDelay {
            delta,
            taus: [1.2, 2.3, 0.4],
        }
    }

    pub fn separable_quad(delta: f64) -> Self {
        CtKernelSpec::SeparableQuad {
            delta,
            h1: KernelShape::Exp { decay: 0.95 },
            h2: KernelShape::ExpCos {
                decay: 0.91,
                omega_over_pi: 0.2,
            },
            memory: MAX_MEMORY_T,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            CtKernelSpec::CubicDelay { delta, .. }
            | CtKernelSpec::SeparableQuad { delta, .. }
            | CtKernelSpec::General { delta, .. } => *delta,
        }
    }

    pub fn with_delta(&self, d: f64) -> Self {
        let mut k = self.clone();
        match &mut k {
            CtKernelSpec::CubicDelay { delta, .. }
            | CtKernelSpec::SeparableQuad { delta, .. }
            | CtKernelSpec::General { delta, .. } => *delta = d,
        }
        k
    }

    /// Memory in units of `T`.
    pub fn memory(&self) -> f64 {
        match self {
            CtKernelSpec::CubicDelay { taus, .. } => taus.iter().copied().fold(0.0, f64::max),
            CtKernelSpec::SeparableQuad { memory, .. } => *memory,
            CtKernelSpec::General {
                taps, resolution, ..
            } => *taps as f64 / *resolution as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mem = self.memory();
        if !(0.0..=MAX_MEMORY_T).contains(&mem) {
            return Err(invalid(format!(
                "kernel memory {mem}T exceeds the {MAX_MEMORY_T}T encoder period"
            )));
        }
        match self {
            CtKernelSpec::CubicDelay { taus, .. } if taus.iter().any(|t| *t < 0.0) => {
                Err(invalid("delays must be non-negative"))
            }
            CtKernelSpec::General {
                degree,
                taps,
                values,
                ..
            } => {
                let want = taps
                    .checked_pow(*degree as u32)
                    .ok_or_else(|| invalid("general kernel too large"))?;
                if *degree == 0 || values.len() != want {
                    return Err(invalid(format!(
                        "general kernel needs degree >= 1 and {want} values"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Delay in fine samples; off-grid delays are rounded with a warning.
fn fine_delay(tau: f64, r: usize) -> usize {
    let exact = tau * r as f64;
    let d = exact.round();
    if (exact - d).abs() > 1e-9 {
        log::warn!("delay {tau}T is not on the fine grid (R = {r}); rounded to {d} samples");
    }
    d as usize
}

/// Digital upconversion at four times the carrier: `x~[4n + k] = Re(x_d[n] j^k)`,
/// i.e. the block `(i, -q, -i, q)`.
pub fn upconvert_interleave(xd: &ComplexSignal) -> RealSignal {
    let mut out = Vec::with_capacity(4 * xd.len());
    for v in xd.samples() {
        out.extend_from_slice(&[v.re, -v.im, -v.re, v.im]);
    }
    RealSignal::from_parts(out, 4.0 * xd.rate())
}

/// Zero-order hold: each sample is held for `r` fine-grid samples.
pub fn zoh_to_fine(xt: &RealSignal, r: usize) -> Result<RealSignal> {
    upsample_hold(xt, r)
}

/// Circular convolution with a short causal kernel.
pub(crate) fn circular_conv(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    let taps = h.len();
    let mut out = vec![0.0; n];
    for (f, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        if f + 1 >= taps {
            for (l, &hl) in h.iter().enumerate() {
                acc += hl * x[f - l];
            }
        } else {
            for (l, &hl) in h.iter().enumerate() {
                acc += hl * x[(f + n * taps - l) % n];
            }
        }
        *slot = acc;
    }
    out
}

pub fn apply_nonlinearity(
    xc: &RealSignal,
    kernel: &CtKernelSpec,
    cfg: &RateConfig,
) -> Result<RealSignal> {
    apply_nonlinearity_bounded(xc, kernel, cfg, GENERAL_COST_BOUND)
}

/// [`apply_nonlinearity`] with an explicit cost bound for general kernels.
pub fn apply_nonlinearity_bounded(
    xc: &RealSignal,
    kernel: &CtKernelSpec,
    cfg: &RateConfig,
    cost_bound: f64,
) -> Result<RealSignal> {
    kernel.validate()?;
    check_same(cfg.n_fine(), xc.len())?;
    let x = xc.samples();
    let n = x.len();
    let r = cfg.r;
    let out = match kernel {
        CtKernelSpec::CubicDelay { delta, taus } => {
            let d = taus.map(|t| fine_delay(t, r) % n);
            let at = |f: usize, k: usize| x[(f + n - d[k]) % n];
            (0..n)
                .map(|f| x[f] - delta * at(f, 0) * at(f, 1) * at(f, 2))
                .collect()
        }
        CtKernelSpec::SeparableQuad {
            delta,
            h1,
            h2,
            memory,
        } => {
            let step = 1.0 / r as f64;
            let t1: Vec<f64> = h1.tabulate(r, *memory).iter().map(|v| v * step).collect();
            let t2: Vec<f64> = h2.tabulate(r, *memory).iter().map(|v| v * step).collect();
            let c1 = circular_conv(x, &t1);
            let mut c2 = circular_conv(x, &t2);
            for ((o, &a), &v) in c2.iter_mut().zip(&c1).zip(x) {
                *o = v - delta * a * *o;
            }
            c2
        }
        CtKernelSpec::General {
            delta,
            degree,
            taps,
            resolution,
            values,
        } => {
            if *resolution != r {
                return Err(invalid(format!(
                    "general kernel tabulated at R = {resolution}, chain uses R = {r}"
                )));
            }
            let estimate = n as f64 * (*taps as f64).powi(*degree as i32) * *degree as f64;
            if estimate > cost_bound {
                return Err(Error::CostBound {
                    estimate,
                    bound: cost_bound,
                });
            }
            general_sum(x, *delta, *degree, *taps, values, 1.0 / r as f64)
        }
    };
    Ok(xc.with_samples(out))
}

/// Direct multidimensional Riemann sum of a tabulated Volterra kernel.
pub(crate) fn general_sum(
    x: &[f64],
    delta: f64,
    degree: usize,
    taps: usize,
    values: &[f64],
    step: f64,
) -> Vec<f64> {
    let n = x.len();
    let scale = step.powi(degree as i32);
    let mut idx = vec![0usize; degree];
    (0..n)
        .map(|f| {
            let mut acc = 0.0;
            idx.iter_mut().for_each(|v| *v = 0);
            for &h in values {
                let mut p = h;
                for &l in &idx {
                    p *= x[(f + n * taps - l) % n];
                }
                acc += p;
                // odometer over the kernel grid, last index fastest
                for slot in idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < taps {
                        break;
                    }
                    *slot = 0;
                }
            }
            x[f] - delta * scale * acc
        })
        .collect()
}

/// Encoder plus reference chain: the full map from baseband input to the
/// demodulated RF output.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmitter {
    pub rates: RateConfig,
    pub encoder: EncoderConfig,
    pub kernel: CtKernelSpec,
}

/// Encoded signal (the model input) and demodulated reference output.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub xd: ComplexSignal,
    pub xhat: ComplexSignal,
    pub overloads: usize,
}

impl Transmitter {
    pub fn new(rates: RateConfig, encoder: EncoderConfig, kernel: CtKernelSpec) -> Result<Self> {
        rates.validate()?;
        encoder.validate()?;
        kernel.validate()?;
        if encoder.oversample != rates.k {
            return Err(Error::Config(format!(
                "encoder oversampling {} differs from K = {}",
                encoder.oversample, rates.k
            )));
        }
        Ok(Self {
            rates,
            encoder,
            kernel,
        })
    }

    /// Same chain with an infinite-resolution encoder and the nonlinearity removed.
    pub fn linear_reference(&self) -> Self {
        let mut t = self.clone();
        t.encoder.kind = EncoderKind::Passthrough;
        t.kernel = t.kernel.with_delta(0.0);
        t
    }

    pub fn with_n_bb(&self, n_bb: usize) -> Self {
        Self {
            rates: self.rates.with_n_bb(n_bb),
            ..self.clone()
        }
    }

    /// Runs the chain downstream of the encoder.
    pub fn simulate_encoded(&self, xd: &ComplexSignal) -> Result<ComplexSignal> {
        check_same(self.rates.n_d(), xd.len())?;
        let xt = upconvert_interleave(xd);
        let xc = zoh_to_fine(&xt, self.rates.r)?;
        drop(xt);
        let y = apply_nonlinearity(&xc, &self.kernel, &self.rates)?;
        drop(xc);
        band_extract_demod(&y, &self.rates)
    }

    pub fn simulate(&self, x: &ComplexSignal) -> Result<Simulation> {
        check_same(self.rates.n_bb, x.len())?;
        let enc = encode(x, &self.encoder, &self.rates)?;
        let xhat = self.simulate_encoded(&enc.signal)?;
        Ok(Simulation {
            xd: enc.signal,
            xhat,
            overloads: enc.overloads,
        })
    }
}

/// Runs the reference system on `x`, returning `(x_d, x_hat)`.
pub fn simulate_reference(
    x: &ComplexSignal,
    enc: &EncoderConfig,
    kernel: &CtKernelSpec,
    cfg: &RateConfig,
) -> Result<(ComplexSignal, ComplexSignal)> {
    let sim = Transmitter::new(*cfg, enc.clone(), kernel.clone())?.simulate(x)?;
    Ok((sim.xd, sim.xhat))
}
