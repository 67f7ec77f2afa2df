use adt_core::align::align_gain_delay;
use adt_core::encoder::{encode, quantize_nearest, uniform_levels, EncoderConfig};
use adt_core::io::{signal_from_text, signal_to_text};
use adt_core::model::{FirBankModel, Mode};
use adt_core::monomial::{basis_count, MonomialBasis};
use adt_core::signal::{ComplexSignal, RateConfig};
use adt_core::stimulus::{component_peak, gen_stimulus};
use num_complex::Complex64;
use proptest::prelude::*;

fn taps_from(seed: &[f64], n_basis: usize, l_f: usize) -> Vec<Vec<Complex64>> {
    (0..n_basis)
        .map(|b| {
            (0..l_f)
                .map(|l| {
                    Complex64::new(
                        seed[(2 * (b * l_f + l)) % seed.len()],
                        seed[(2 * (b * l_f + l) + 1) % seed.len()],
                    )
                })
                .collect()
        })
        .collect()
}

fn rate_k(x: ComplexSignal, k: usize) -> ComplexSignal {
    ComplexSignal::new(x.into_samples(), k as f64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantizer_picks_a_nearest_level(u in -3.0f64..3.0, n in 2usize..9) {
        let levels = uniform_levels(n);
        let q = quantize_nearest(u, &levels);
        prop_assert!(levels.contains(&q));
        let best = levels.iter().map(|l| (u - l).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(((u - q).abs() - best).abs() < 1e-15);
    }

    #[test]
    fn encoder_output_stays_on_the_alphabet(seed in 0u64..1000, peak in 0.1f64..1.0, k in 1usize..6) {
        let rates = RateConfig::new(32, k, 2).unwrap();
        let cfg = EncoderConfig::dsm1(uniform_levels(5), k);
        let x = gen_stimulus(32, seed, peak).unwrap();
        let e = encode(&x, &cfg, &rates).unwrap();
        prop_assert_eq!(e.signal.len(), 32 * k);
        for v in e.signal.samples() {
            prop_assert!(cfg.levels.contains(&v.re) && cfg.levels.contains(&v.im));
        }
    }

    #[test]
    fn stimulus_peak_is_exact(seed in any::<u64>(), peak in 0.01f64..=1.0, n in 16usize..200) {
        let x = gen_stimulus(n, seed, peak).unwrap();
        prop_assert_eq!(x.len(), n);
        prop_assert_eq!(component_peak(&x), peak);
    }

    #[test]
    fn model_is_linear_in_taps(seed in prop::collection::vec(-1.0f64..1.0, 16..40), a in -2.0f64..2.0, xs in 0u64..100) {
        let basis = MonomialBasis::enumerate(2, 2, 1).unwrap();
        let (k, l_f) = (2, 3);
        let ta = taps_from(&seed, basis.len(), l_f);
        let tb: Vec<Vec<Complex64>> = ta.iter().rev().cloned().collect();
        let sum: Vec<Vec<Complex64>> = ta.iter().zip(&tb).map(|(p, q)| p.iter().zip(q).map(|(u, v)| u * a + v).collect()).collect();
        let xd = rate_k(gen_stimulus(32, xs, 0.9).unwrap(), k);
        let f = |t: Vec<Vec<Complex64>>| FirBankModel::new(basis.clone(), t, k, Mode::Periodic).unwrap().forward(&xd).unwrap();
        let (ya, yb, ys) = (f(ta), f(tb), f(sum));
        for ((p, q), s) in ya.samples().iter().zip(yb.samples()).zip(ys.samples()) {
            prop_assert!((p * a + q - s).norm() < 1e-12);
        }
    }

    #[test]
    fn model_output_ignores_basis_order(seed in prop::collection::vec(-1.0f64..1.0, 16..40), rot in 0usize..6, xs in 0u64..100) {
        let basis = MonomialBasis::enumerate(2, 2, 1).unwrap();
        let n = basis.len();
        let taps = taps_from(&seed, n, 4);
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let specs = order.iter().map(|&i| basis.specs()[i].clone()).collect();
        let permuted = MonomialBasis::from_specs(specs, 2, 2, 1).unwrap();
        let ptaps = order.iter().map(|&i| taps[i].clone()).collect();
        let xd = rate_k(gen_stimulus(32, xs, 0.9).unwrap(), 2);
        let y1 = FirBankModel::new(basis, taps, 2, Mode::Periodic).unwrap().forward(&xd).unwrap();
        let y2 = FirBankModel::new(permuted, ptaps, 2, Mode::Periodic).unwrap().forward(&xd).unwrap();
        for (p, q) in y1.samples().iter().zip(y2.samples()) {
            prop_assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn alignment_recovers_shift_and_gain(seed in 0u64..1000, d in -8i64..=8, mag in 0.2f64..3.0, ph in -3.1f64..3.1) {
        let x = gen_stimulus(128, seed, 0.9).unwrap();
        let g = Complex64::from_polar(mag, ph);
        let n = x.len() as i64;
        let s = x.samples();
        let meas: Vec<Complex64> = (0..n).map(|i| s[(i - d).rem_euclid(n) as usize] * g).collect();
        let r = align_gain_delay(&x, &ComplexSignal::new(meas, 1.0).unwrap(), 10).unwrap();
        prop_assert_eq!(r.delay, d);
        prop_assert!((r.gain - g).norm() < 1e-10 * mag);
    }

    #[test]
    fn basis_size_matches_count(m in 1usize..4, mi in 1usize..4, mq in 1usize..4) {
        let b = MonomialBasis::enumerate(m, mi, mq).unwrap();
        prop_assert_eq!(b.len(), basis_count(m, mi + mq));
    }

    #[test]
    fn signal_text_round_trip(seed in any::<u64>(), n in 16usize..64, rate in 0.5f64..64.0) {
        let x = ComplexSignal::new(gen_stimulus(n, seed, 0.7).unwrap().into_samples(), rate).unwrap();
        prop_assert_eq!(signal_from_text(&signal_to_text(&x)).unwrap(), x);
    }
}
