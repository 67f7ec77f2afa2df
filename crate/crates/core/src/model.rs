//! Baseband-equivalent model: monomials at the encoder rate, one complex FIR
//! filter per monomial, summation, and decimation by `K`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::monomial::{MonomialBasis, MonomialSpec};
use crate::signal::ComplexSignal;

/// Tap lengths above this use the FFT path for periodic records.
const FFT_TAPS_THRESHOLD: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Circular indexing over the record.
    Periodic,
    /// Zero history (and zero future for the lead) outside the record.
    Streaming,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Periodic => "periodic",
            Mode::Streaming => "streaming",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Mode::Periodic),
            "streaming" => Ok(Mode::Streaming),
            _ => Err(Error::Config(format!("unknown model mode {s:?}"))),
        }
    }
}

/// `x_hat[n'] = Σ_k Σ_l taps_k[l] v_k[n'K - l + lead]`.
///
/// `lead` centres the filters; it defaults to 0 (causal taps).
#[derive(Clone, Debug, PartialEq)]
pub struct FirBankModel {
    pub basis: MonomialBasis,
    taps: Vec<Vec<Complex64>>,
    pub k: usize,
    pub mode: Mode,
    pub lead: usize,
}

impl FirBankModel {
    pub fn new(
        basis: MonomialBasis,
        taps: Vec<Vec<Complex64>>,
        k: usize,
        mode: Mode,
    ) -> Result<Self> {
        Self::with_lead(basis, taps, k, mode, 0)
    }

    pub fn with_lead(
        basis: MonomialBasis,
        taps: Vec<Vec<Complex64>>,
        k: usize,
        mode: Mode,
        lead: usize,
    ) -> Result<Self> {
        if taps.len() != basis.len() {
            return Err(invalid(format!(
                "{} tap sequences for {} monomials",
                taps.len(),
                basis.len()
            )));
        }
        let l_f = taps.first().map_or(0, Vec::len);
        if l_f == 0 || taps.iter().any(|t| t.len() != l_f) {
            return Err(invalid(
                "every monomial needs the same number of taps (>= 1)",
            ));
        }
        if k == 0 {
            return Err(invalid("K must be >= 1"));
        }
        Ok(Self {
            basis,
            taps,
            k,
            mode,
            lead,
        })
    }

    pub fn zeros(basis: MonomialBasis, l_f: usize, k: usize, mode: Mode) -> Result<Self> {
        let taps = vec![vec![Complex64::new(0.0, 0.0); l_f]; basis.len()];
        Self::new(basis, taps, k, mode)
    }

    pub fn taps(&self) -> &[Vec<Complex64>] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.taps
    }

    pub fn l_f(&self) -> usize {
        self.taps[0].len()
    }

    /// All taps flattened monomial-major.
    pub fn tap_vector(&self) -> Vec<Complex64> {
        self.taps.iter().flatten().copied().collect()
    }

    pub fn forward(&self, xd: &ComplexSignal) -> Result<ComplexSignal> {
        let n_d = xd.len();
        if n_d % self.k != 0 {
            return Err(invalid(format!(
                "record length {n_d} not divisible by K = {}",
                self.k
            )));
        }
        if self.mode == Mode::Periodic && self.l_f() > n_d {
            return Err(invalid(format!(
                "L_f = {} exceeds the record length {n_d}",
                self.l_f()
            )));
        }
        let out = if self.mode == Mode::Periodic && self.l_f() > FFT_TAPS_THRESHOLD {
            self.forward_fft(xd)
        } else {
            self.forward_direct(xd)
        };
        ComplexSignal::new(out, xd.rate() / self.k as f64)
    }

    fn forward_direct(&self, xd: &ComplexSignal) -> Vec<Complex64> {
        let n_d = xd.len() as i64;
        let n_out = xd.len() / self.k;
        let mut out = vec![Complex64::new(0.0, 0.0); n_out];
        for (spec, taps) in self.basis.specs().iter().zip(&self.taps) {
            let v = spec.eval(xd);
            let v = match self.mode {
                Mode::Periodic => v,
                Mode::Streaming => streaming_column(spec, &v),
            };
            for (np, o) in out.iter_mut().enumerate() {
                let base = (np * self.k + self.lead) as i64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, t) in taps.iter().enumerate() {
                    let idx = base - l as i64;
                    let val = match self.mode {
                        Mode::Periodic => v[idx.rem_euclid(n_d) as usize],
                        Mode::Streaming if (0..n_d).contains(&idx) => v[idx as usize],
                        Mode::Streaming => 0.0,
                    };
                    acc += t * val;
                }
                *o += acc;
            }
        }
        out
    }

    fn forward_fft(&self, xd: &ComplexSignal) -> Vec<Complex64> {
        let n_d = xd.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); n_d];
        for (spec, taps) in self.basis.specs().iter().zip(&self.taps) {
            let mut v = fft::to_complex(&spec.eval(xd));
            fft::forward(&mut v);
            let mut t = vec![Complex64::new(0.0, 0.0); n_d];
            t[..taps.len()].copy_from_slice(taps);
            fft::forward(&mut t);
            for ((a, x), h) in acc.iter_mut().zip(&v).zip(&t) {
                *a += x * h;
            }
        }
        fft::inverse_normalized(&mut acc);
        (0..n_d / self.k)
            .map(|np| acc[(np * self.k + self.lead) % n_d])
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(f)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# fir-bank-model v1").unwrap();
        self.write_header(&mut s);
        writeln!(s, "monomial,tap,re,im").unwrap();
        for (spec, taps) in self.basis.specs().iter().zip(&self.taps) {
            for (l, t) in taps.iter().enumerate() {
                writeln!(s, "{spec},{l},{},{}", t.re, t.im).unwrap();
            }
        }
        s
    }

    pub(crate) fn write_header(&self, s: &mut String) {
        for (k, v) in [
            ("M", self.basis.max_degree.to_string()),
            ("m_i", self.basis.m_i.to_string()),
            ("m_q", self.basis.m_q.to_string()),
            ("K", self.k.to_string()),
            ("L_f", self.l_f().to_string()),
            ("mode", self.mode.as_str().to_string()),
            ("lead", self.lead.to_string()),
        ] {
            writeln!(s, "{k}={v}").unwrap();
        }
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        for l in r.lines() {
            lines.push(l?);
        }
        parse_model(&lines).map(|(m, _)| m)
    }
}

/// History-free column: samples whose delayed factors reach before the record start are zeroed.
fn streaming_column(spec: &MonomialSpec, v: &[f64]) -> Vec<f64> {
    let d = spec.max_delay().min(v.len());
    let mut out = v.to_vec();
    out[..d].iter_mut().for_each(|x| *x = 0.0);
    out
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses a model block; returns the model and the index of the first unconsumed line.
pub(crate) fn parse_model(lines: &[String]) -> Result<(FirBankModel, usize)> {
    let mut hdr = std::collections::HashMap::new();
    let mut i = 0;
    while i < lines.len() {
        let l = lines[i].trim();
        i += 1;
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if l == "monomial,tap,re,im" {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| parse_err(i, format!("expected key=value, got {l:?}")))?;
        hdr.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<usize> {
        hdr.get(k)
            .ok_or_else(|| parse_err(0, format!("missing header field {k}")))?
            .parse()
            .map_err(|_| parse_err(0, format!("bad header field {k}")))
    };
    let (m, m_i, m_q, k, l_f) = (get("M")?, get("m_i")?, get("m_q")?, get("K")?, get("L_f")?);
    let lead = if hdr.contains_key("lead") {
        get("lead")?
    } else {
        0
    };
    let mode = Mode::parse(hdr.get("mode").map(String::as_str).unwrap_or("periodic"))?;

    let mut specs: Vec<MonomialSpec> = Vec::new();
    let mut taps: Vec<Vec<Complex64>> = Vec::new();
    while i < lines.len() {
        let l = lines[i].trim();
        if l.is_empty() || l.starts_with('#') {
            if l.starts_with("# ") && !taps.is_empty() {
                break;
            }
            i += 1;
            continue;
        }
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 4 {
            break;
        }
        let line = i + 1;
        let spec = MonomialSpec::parse(cols[0])
            .map_err(|_| parse_err(line, format!("bad monomial {:?}", cols[0])))?;
        let tap: usize = cols[1]
            .parse()
            .map_err(|_| parse_err(line, "bad tap index"))?;
        let num = |c: &str| {
            c.parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number {c:?}")))
        };
        let value = Complex64::new(num(cols[2])?, num(cols[3])?);
        if specs.last() != Some(&spec) {
            specs.push(spec);
            taps.push(Vec::with_capacity(l_f));
        }
        let cur = taps.last_mut().unwrap();
        if tap != cur.len() {
            return Err(parse_err(line, format!("tap {tap} out of order")));
        }
        cur.push(value);
        i += 1;
    }
    if taps.iter().any(|t| t.len() != l_f) {
        return Err(parse_err(0, format!("every monomial needs {l_f} taps")));
    }
    let basis = MonomialBasis::from_specs(specs, m, m_i, m_q)?;
    Ok((FirBankModel::with_lead(basis, taps, k, mode, lead)?, i))
}
