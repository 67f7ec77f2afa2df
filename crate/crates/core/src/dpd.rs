//! First-order predistortion `C = I - K L0 X V P`.
//!
//! The compensator encodes its input with the transmitter's own pulse encoder,
//! forms the monomials, mixes them through `X`, filters with the fixed `L0`,
//! decimates, and subtracts the result from the input.
//!
//! The identity the compensator aims for is the transmitter's linear part:
//! the same chain with an infinite-resolution encoder and no nonlinearity,
//! delay- and gain-aligned to the input. The raw chain carries a fractional
//! delay and a conjugate image, so it is not close enough to the plain input
//! for a first-order correction against `x` itself to help.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::align::{align_gain_delay, correlation_coefficient, Alignment};
use crate::encoder::{encode, EncoderConfig, EncoderKind, Interpolation};
use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::ident::complex_lstsq;
use crate::metrics::nmse_db;
use crate::model::{parse_err, parse_model, FirBankModel, Mode};
use crate::monomial::{MonomialBasis, MonomialSpec};
use crate::passband::Transmitter;
use crate::signal::{ComplexSignal, RateConfig};

/// Minimum normalized correlation between `x` and the linear chain output.
const MIN_CORRELATION: f64 = 0.5;

/// The fixed LTI stage between `X` and the decimator.
#[derive(Clone, Debug, PartialEq)]
pub enum L0 {
    /// One ideal low-pass onto the baseband band; `X` is a single row.
    BrickWall,
    /// One FIR per monomial taken from a fitted forward model; `X` is square.
    ModelFilters(FirBankModel),
}

impl L0 {
    pub fn inputs(&self, n_basis: usize) -> usize {
        match self {
            L0::BrickWall => 1,
            L0::ModelFilters(_) => n_basis,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            L0::BrickWall => "brickwall",
            L0::ModelFilters(_) => "model",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Compensator {
    pub basis: MonomialBasis,
    pub l0: L0,
    /// `L0` inputs by basis elements.
    pub x: DMatrix<Complex64>,
    pub k: usize,
    pub encoder: EncoderConfig,
    /// Maps the linear chain output back onto the input time base.
    pub alignment: Alignment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpdConfig {
    pub ridge: f64,
    pub max_delay: usize,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-10,
            max_delay: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpdFitReport {
    /// Residual of the correction fit relative to the distortion, in dB.
    pub fit_nmse_db: f64,
    /// Distortion energy relative to the reference, in dB (the uncompensated error).
    pub distortion_db: f64,
    pub condition_estimate: f64,
    pub rank_deficient: bool,
    pub alignment: Alignment,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpdEval {
    pub nmse_plain_db: f64,
    pub nmse_dpd_db: f64,
    /// Compensated samples whose components had to be limited to full scale.
    pub clip_events: usize,
}

impl DpdEval {
    pub fn improvement_db(&self) -> f64 {
        self.nmse_plain_db - self.nmse_dpd_db
    }
}

/// Reference output of the identity the compensator targets, plus the alignment used.
pub fn identity_reference(
    x: &ComplexSignal,
    tx: &Transmitter,
    max_delay: usize,
) -> Result<(ComplexSignal, Alignment)> {
    let lin = tx.with_n_bb(x.len()).linear_reference().simulate(x)?.xhat;
    align_to_input(x, &lin, max_delay)
}

/// Aligns a chain output to its input, rejecting outputs that are not a
/// perturbation of a delayed, scaled copy.
fn align_to_input(
    x: &ComplexSignal,
    lin: &ComplexSignal,
    max_delay: usize,
) -> Result<(ComplexSignal, Alignment)> {
    let a = align_gain_delay(x, lin, max_delay)?;
    let rho = correlation_coefficient(x, &a.aligned);
    if a.gain.norm() < 1e-9 || rho < MIN_CORRELATION {
        return Err(Error::NotNearIdentity(rho));
    }
    Ok((a.aligned.clone(), a.alignment()))
}

/// Baseband regressors: one column per (L0 input, monomial) pair.
fn regressors(
    xd: &ComplexSignal,
    basis: &MonomialBasis,
    l0: &L0,
    k: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let n_d = xd.len();
    let n_bb = n_d / k;
    let cols = basis.eval(xd);
    match l0 {
        L0::BrickWall => Ok(cols
            .iter()
            .map(|v| {
                let mut s = fft::to_complex(v);
                fft::forward(&mut s);
                let mut b = vec![Complex64::new(0.0, 0.0); n_bb];
                for j in fft::band_bins(n_bb) {
                    b[fft::wrap(j, n_bb)] = s[fft::wrap(j, n_d)] / k as f64;
                }
                fft::inverse_normalized(&mut b);
                b
            })
            .collect()),
        L0::ModelFilters(m) => {
            if m.k != k || m.basis.len() != basis.len() {
                return Err(invalid(
                    "L0 filter model does not match the compensator basis or K",
                ));
            }
            let mut out = Vec::with_capacity(basis.len() * basis.len());
            for taps in m.taps() {
                for v in &cols {
                    out.push(periodic_fir_decimate(v, taps, k, m.lead));
                }
            }
            Ok(out)
        }
    }
}

fn periodic_fir_decimate(v: &[f64], taps: &[Complex64], k: usize, lead: usize) -> Vec<Complex64> {
    let n_d = v.len();
    (0..n_d / k)
        .map(|n| {
            taps.iter()
                .enumerate()
                .map(|(l, t)| t * v[(n * k + lead + n_d * taps.len() - l) % n_d])
                .sum()
        })
        .collect()
}

/// Fits `X` so that the correction reproduces the distortion of `tx` on `x`.
pub fn fit_compensator(
    x: &ComplexSignal,
    tx: &Transmitter,
    basis: &MonomialBasis,
    l0: L0,
    cfg: &DpdConfig,
) -> Result<(Compensator, DpdFitReport)> {
    let n_bb = x.len();
    let txn = tx.with_n_bb(n_bb);
    let (reference, alignment) = identity_reference(x, tx, cfg.max_delay)?;
    let sim = txn.simulate(x)?;
    let measured = alignment.apply(&sim.xhat);
    let delta: Vec<Complex64> = measured
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(a, b)| a - b)
        .collect();

    let k = tx.rates.k;
    let cols = regressors(&sim.xd, basis, &l0, k)?;
    let a = DMatrix::from_fn(n_bb, cols.len(), |r, c| cols[c][r]);
    let y = DVector::from_column_slice(&delta);
    let (sol, condition_estimate, rank_deficient) = complex_lstsq(a.clone(), y.clone(), cfg.ridge);
    let fitted = &a * &sol;
    let err: f64 = fitted
        .iter()
        .zip(&delta)
        .map(|(f, d)| (f - d).norm_sqr())
        .sum();
    let dist: f64 = delta.iter().map(|d| d.norm_sqr()).sum();
    let fit_nmse_db = if dist == 0.0 {
        crate::metrics::NMSE_FLOOR_DB
    } else {
        crate::metrics::ratio_db(err / dist)
    };
    let distortion_db = crate::metrics::ratio_db(dist / reference.energy());

    let rows = l0.inputs(basis.len());
    let xm = DMatrix::from_fn(rows, basis.len(), |j, m| sol[j * basis.len() + m]);
    let comp = Compensator {
        basis: basis.clone(),
        l0,
        x: xm,
        k,
        encoder: tx.encoder.clone(),
        alignment,
    };
    let report = DpdFitReport {
        fit_nmse_db,
        distortion_db,
        condition_estimate,
        rank_deficient,
        alignment,
    };
    Ok((comp, report))
}

impl Compensator {
    /// A compensator with `X = 0`, i.e. the identity.
    pub fn identity(
        basis: MonomialBasis,
        l0: L0,
        k: usize,
        encoder: EncoderConfig,
        alignment: Alignment,
    ) -> Self {
        let x = DMatrix::zeros(l0.inputs(basis.len()), basis.len());
        Self {
            basis,
            l0,
            x,
            k,
            encoder,
            alignment,
        }
    }

    /// The correction `K L0 X V P x` at baseband.
    pub fn correction(&self, x: &ComplexSignal) -> Result<ComplexSignal> {
        let rates = RateConfig::new(x.len(), self.k, 1)?;
        let xd = encode(x, &self.encoder, &rates)?.signal;
        let cols = regressors(&xd, &self.basis, &self.l0, self.k)?;
        let n = self.basis.len();
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        for (c, col) in cols.iter().enumerate() {
            let coef = self.x[(c / n, c % n)];
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(col) {
                *o += coef * v;
            }
        }
        ComplexSignal::new(out, x.rate())
    }

    /// `C x`, with components limited to the encoder full scale. Returns the
    /// number of limited samples.
    pub fn apply(&self, x: &ComplexSignal) -> Result<(ComplexSignal, usize)> {
        let corr = if self.x.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            None
        } else {
            Some(self.correction(x)?)
        };
        let mut clips = 0;
        let out = x
            .samples()
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let u = match &corr {
                    Some(c) => v - c.samples()[n],
                    None => *v,
                };
                let lim = Complex64::new(u.re.clamp(-1.0, 1.0), u.im.clamp(-1.0, 1.0));
                if lim != u {
                    clips += 1;
                }
                lim
            })
            .collect();
        if clips > 0 {
            log::warn!("compensator output limited to full scale on {clips} samples");
        }
        Ok((ComplexSignal::new(out, x.rate())?, clips))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# compensator v1").unwrap();
        let levels: Vec<String> = self.encoder.levels.iter().map(|v| v.to_string()).collect();
        for (k, v) in [
            ("M", self.basis.max_degree.to_string()),
            ("m_i", self.basis.m_i.to_string()),
            ("m_q", self.basis.m_q.to_string()),
            ("K", self.k.to_string()),
            ("l0", self.l0.name().to_string()),
            ("rows", self.x.nrows().to_string()),
            ("delay", self.alignment.delay.to_string()),
            ("gain_re", self.alignment.gain.re.to_string()),
            ("gain_im", self.alignment.gain.im.to_string()),
            ("encoder", self.encoder.kind.as_str().to_string()),
            ("levels", levels.join(" ")),
            (
                "interpolation",
                self.encoder.interpolation.as_str().to_string(),
            ),
        ] {
            writeln!(s, "{k}={v}").unwrap();
        }
        writeln!(s, "row,monomial,re,im").unwrap();
        for j in 0..self.x.nrows() {
            for (m, spec) in self.basis.specs().iter().enumerate() {
                let v = self.x[(j, m)];
                writeln!(s, "{j},{spec},{},{}", v.re, v.im).unwrap();
            }
        }
        if let L0::ModelFilters(model) = &self.l0 {
            s.push_str(&model.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut hdr = std::collections::HashMap::new();
        let mut i = 0;
        while i < lines.len() {
            let l = lines[i].trim();
            i += 1;
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if l == "row,monomial,re,im" {
                break;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| parse_err(i, format!("expected key=value, got {l:?}")))?;
            hdr.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| {
            hdr.get(k)
                .ok_or_else(|| parse_err(0, format!("missing header field {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| parse_err(0, format!("bad field {k}")))
        };
        let int = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| parse_err(0, format!("bad field {k}")))
        };
        let (m, m_i, m_q, k, rows) = (int("M")?, int("m_i")?, int("m_q")?, int("K")?, int("rows")?);
        let delay: i64 = field("delay")?
            .parse()
            .map_err(|_| parse_err(0, "bad delay"))?;
        let gain = Complex64::new(num("gain_re")?, num("gain_im")?);
        let levels = field("levels")?
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| parse_err(0, format!("bad level {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let encoder = EncoderConfig {
            kind: EncoderKind::parse(field("encoder")?)?,
            levels,
            oversample: k,
            interpolation: Interpolation::parse(field("interpolation")?)?,
        };

        let mut specs: Vec<MonomialSpec> = Vec::new();
        let mut entries = Vec::new();
        while i < lines.len() {
            let l = lines[i].trim();
            if l.starts_with('#') {
                break;
            }
            i += 1;
            if l.is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 4 {
                return Err(parse_err(i, "expected row,monomial,re,im"));
            }
            let row: usize = cols[0].parse().map_err(|_| parse_err(i, "bad row index"))?;
            let spec = MonomialSpec::parse(cols[1]).map_err(|_| parse_err(i, "bad monomial"))?;
            let re: f64 = cols[2].parse().map_err(|_| parse_err(i, "bad number"))?;
            let im: f64 = cols[3].parse().map_err(|_| parse_err(i, "bad number"))?;
            if row == 0 {
                specs.push(spec.clone());
            }
            entries.push((row, spec, Complex64::new(re, im)));
        }
        let n = specs.len();
        if entries.len() != rows * n {
            return Err(parse_err(
                0,
                format!(
                    "expected {} coefficients, found {}",
                    rows * n,
                    entries.len()
                ),
            ));
        }
        let mut x = DMatrix::zeros(rows, n);
        for (idx, (row, spec, v)) in entries.into_iter().enumerate() {
            if row != idx / n || spec != specs[idx % n] {
                return Err(parse_err(0, format!("coefficient {idx} out of order")));
            }
            x[(row, idx % n)] = v;
        }
        let basis = MonomialBasis::from_specs(specs, m, m_i, m_q)?;
        let l0 = match field("l0")?.as_str() {
            "brickwall" => L0::BrickWall,
            "model" => {
                let (model, _) = parse_model(&lines[i..])?;
                L0::ModelFilters(model)
            }
            other => return Err(parse_err(0, format!("unknown l0 {other:?}"))),
        };
        if l0.inputs(n) != rows {
            return Err(parse_err(0, "X row count does not match L0"));
        }
        Ok(Self {
            basis,
            l0,
            x,
            k,
            encoder,
            alignment: Alignment { delay, gain },
        })
    }
}

/// Builds the model-filter `L0` by fitting the forward model on the same chain.
pub fn model_filters_l0(
    x: &ComplexSignal,
    tx: &Transmitter,
    basis: &MonomialBasis,
    l_f: usize,
) -> Result<L0> {
    let sim = tx.with_n_bb(x.len()).simulate(x)?;
    let cfg = crate::ident::FitConfig {
        l_f,
        ..Default::default()
    };
    let (model, _) = crate::ident::fit_model(&sim.xd, &sim.xhat, basis, tx.rates.k, &cfg)?;
    debug_assert_eq!(model.mode, Mode::Periodic);
    Ok(L0::ModelFilters(model))
}

/// Closed-loop comparison of `S` and `S o C` against the identity reference.
pub fn eval_compensated(
    x: &ComplexSignal,
    comp: &Compensator,
    tx: &Transmitter,
) -> Result<DpdEval> {
    let txn = tx.with_n_bb(x.len());
    if tx.rates.k != comp.k {
        return Err(invalid(format!(
            "compensator K = {} differs from the chain K = {}",
            comp.k, tx.rates.k
        )));
    }
    let lin = txn.linear_reference().simulate(x)?.xhat;
    let reference = comp.alignment.apply(&lin);
    let plain = comp.alignment.apply(&txn.simulate(x)?.xhat);
    let (cx, clip_events) = comp.apply(x)?;
    let compensated = comp.alignment.apply(&txn.simulate(&cx)?.xhat);
    Ok(DpdEval {
        nmse_plain_db: nmse_db(&reference, &plain)?,
        nmse_dpd_db: nmse_db(&reference, &compensated)?,
        clip_events,
    })
}
