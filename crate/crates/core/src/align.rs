use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::signal::{check_rate, check_same, ComplexSignal};

/// Integer delay and complex gain relating a measurement to a reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    /// Circular delay of the measurement relative to the reference, in samples.
    pub delay: i64,
    pub gain: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub delay: i64,
    pub gain: Complex64,
    /// Measurement with the delay and gain removed.
    pub aligned: ComplexSignal,
}

impl AlignmentResult {
    pub fn alignment(&self) -> Alignment {
        Alignment {
            delay: self.delay,
            gain: self.gain,
        }
    }
}

impl Alignment {
    pub const IDENTITY: Alignment = Alignment {
        delay: 0,
        gain: Complex64 { re: 1.0, im: 0.0 },
    };

    /// Removes this delay and gain from `meas`: `g^-1 * meas[(n + d) mod N]`.
    pub fn apply(&self, meas: &ComplexSignal) -> ComplexSignal {
        let n = meas.len() as i64;
        let inv = self.gain.inv();
        let s = meas.samples();
        let out = (0..n)
            .map(|i| s[(i + self.delay).rem_euclid(n) as usize] * inv)
            .collect();
        ComplexSignal::from_parts(out, meas.rate())
    }
}

/// `<a, shift(b, d)>` with `shift(b, d)[n] = b[n - d]`, conjugating `b`.
fn shifted_inner(a: &[Complex64], b: &[Complex64], d: i64) -> Complex64 {
    let n = a.len() as i64;
    a.iter()
        .enumerate()
        .map(|(i, &v)| v * b[(i as i64 - d).rem_euclid(n) as usize].conj())
        .sum()
}

/// Finds the circular delay `|d| <= max_delay` maximizing the correlation
/// magnitude, then the least-squares complex gain at that delay.
///
/// Ties go to the smaller `|d|`, then to the negative delay.
pub fn align_gain_delay(
    reference: &ComplexSignal,
    meas: &ComplexSignal,
    max_delay: usize,
) -> Result<AlignmentResult> {
    check_same(reference.len(), meas.len())?;
    check_rate(reference.rate(), meas.rate())?;
    if 2 * max_delay >= reference.len() {
        return Err(invalid(format!(
            "max_delay {max_delay} must be below half the record length {}",
            reference.len()
        )));
    }
    let energy = reference.energy();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let (r, m) = (reference.samples(), meas.samples());

    let mut best_d = 0i64;
    let mut best = shifted_inner(m, r, 0);
    for mag in 1..=max_delay as i64 {
        for d in [-mag, mag] {
            let c = shifted_inner(m, r, d);
            if c.norm() > best.norm() {
                best = c;
                best_d = d;
            }
        }
    }
    // circular shifts preserve energy
    let gain = best / energy;
    let alignment = Alignment {
        delay: best_d,
        gain,
    };
    Ok(AlignmentResult {
        delay: best_d,
        gain,
        aligned: alignment.apply(meas),
    })
}

/// Normalized correlation magnitude `|<a, b>| / (|a| |b|)`.
pub fn correlation_coefficient(a: &ComplexSignal, b: &ComplexSignal) -> f64 {
    let num = shifted_inner(a.samples(), b.samples(), 0).norm();
    let den = (a.energy() * b.energy()).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
