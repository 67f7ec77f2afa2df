use crate::error::{Error, Result};
use crate::signal::{check_rate, check_same, ComplexSignal};

/// Reported in place of `-inf` when the estimate matches the reference exactly.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Normalized mean squared error in dB: `10 log10(sum|est - ref|^2 / sum|ref|^2)`.
pub fn nmse_db(reference: &ComplexSignal, estimate: &ComplexSignal) -> Result<f64> {
    check_same(reference.len(), estimate.len())?;
    check_rate(reference.rate(), estimate.rate())?;
    let ref_energy = reference.energy();
    if ref_energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let err: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(r, e)| (e - r).norm_sqr())
        .sum();
    Ok(ratio_db(err / ref_energy))
}

pub(crate) fn ratio_db(ratio: f64) -> f64 {
    (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
}

/// Amplitude error as a percentage for a given power NMSE.
pub fn nmse_percent(nmse_db: f64) -> f64 {
    100.0 * 10f64.powf(nmse_db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn sig(v: &[f64]) -> ComplexSignal {
        ComplexSignal::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), 1.0).unwrap()
    }

    #[test]
    fn examples() {
        let r = sig(&[1.0, 1.0]);
        assert!((nmse_db(&r, &sig(&[1.1, 1.1])).unwrap() + 20.0).abs() < 1e-9);
        assert!(nmse_db(&r, &r).unwrap() <= -300.0);
        assert!(nmse_db(&r, &sig(&[2.0, 2.0])).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            nmse_db(&sig(&[0.0, 0.0]), &sig(&[1.0, 0.0])),
            Err(Error::ZeroEnergy)
        ));
        assert!(nmse_db(&sig(&[1.0]), &sig(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn percent_conversion() {
        assert!((nmse_percent(-20.0) - 10.0).abs() < 1e-12);
        assert!((nmse_percent(-60.0) - 0.1).abs() < 1e-12);
    }
}
