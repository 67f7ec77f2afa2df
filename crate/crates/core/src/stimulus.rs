use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::signal::ComplexSignal;

/// Seeded complex circular-Gaussian record at baseband rate, scaled so the
/// largest in-phase or quadrature magnitude equals `peak`.
pub fn gen_stimulus(n_bb: usize, seed: u64, peak: f64) -> Result<ComplexSignal> {
    if n_bb < 16 {
        return Err(invalid(format!("stimulus needs n_bb >= 16, got {n_bb}")));
    }
    if !(peak > 0.0 && peak <= 1.0) {
        return Err(invalid(format!("peak must lie in (0, 1], got {peak}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..n_bb)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();

    let (mut at, mut is_im, mut max) = (0, false, 0.0);
    for (n, v) in x.iter().enumerate() {
        if v.re.abs() > max {
            (at, is_im, max) = (n, false, v.re.abs());
        }
        if v.im.abs() > max {
            (at, is_im, max) = (n, true, v.im.abs());
        }
    }
    let scale = peak / max;
    for v in x.iter_mut() {
        *v *= scale;
    }
    // pin the extreme component so the peak is exact despite rounding
    let slot = if is_im { &mut x[at].im } else { &mut x[at].re };
    *slot = peak.copysign(*slot);
    ComplexSignal::new(x, 1.0)
}

/// Largest in-phase or quadrature magnitude of a record.
pub fn component_peak(x: &ComplexSignal) -> f64 {
    x.samples()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.re.abs()).max(v.im.abs()))
}
