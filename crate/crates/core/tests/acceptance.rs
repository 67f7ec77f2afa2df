//! Acceptance suite: runs every criterion in order and prints one PASS/FAIL
//! line each. Exits nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::panic::catch_unwind;
use std::path::PathBuf;
use std::process::ExitCode;

use adt_core::config::ExperimentConfig;
use adt_core::demod::band_extract_demod;
use adt_core::dpd::Compensator;
use adt_core::encoder::{encode, uniform_levels, Dsm1, EncoderConfig};
use adt_core::experiment::{run_dpd_eval, run_dpd_fit, run_point, run_sweep, spearman};
use adt_core::fft;
use adt_core::ident::{fit_model, fit_model_ensemble, validate, FitConfig, Record, Solver};
use adt_core::model::{FirBankModel, Mode};
use adt_core::monomial::MonomialBasis;
use adt_core::passband::{apply_nonlinearity, CtKernelSpec, KernelShape, Transmitter};
use adt_core::signal::{upsample_ideal_real, RateConfig, RealSignal};
use adt_core::stimulus::gen_stimulus;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(name: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&p).unwrap()
}

fn report(n: u32, ok: bool, detail: &str) -> bool {
    println!(
        "{} criterion {n}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn sweep_criterion(n: u32, file: &str) -> bool {
    let cfg = config(file);
    let rows = run_sweep(&cfg, 1).unwrap();
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let vals: Vec<f64> = rows.iter().map(|r| r.val_nmse_db).collect();
    let rho = spearman(&deltas, &vals);
    let worst = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ok =
        rows.len() == 8 && rows.iter().all(|r| r.error.is_none()) && worst <= -20.0 && rho > 0.0;
    let pts: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.2}", r.delta, r.val_nmse_db))
        .collect();
    report(
        n,
        ok,
        &format!(
            "{} worst val {worst:.2} dB, spearman {rho:.3} [{}]",
            cfg.example_id,
            pts.join(" ")
        ),
    )
}

fn criterion_1_example1_sweep() -> bool {
    sweep_criterion(1, "example1.toml")
}

fn criterion_2_example2_sweep() -> bool {
    sweep_criterion(2, "example2.toml")
}

fn criterion_3_structural_exactness() -> bool {
    let (n_bb, k) = (1024, 4);
    let rates = RateConfig::new(n_bb, k, 10).unwrap();
    let tx = Transmitter::new(
        rates,
        EncoderConfig::dsm1(uniform_levels(5), k),
        CtKernelSpec::cubic_delay(0.1),
    )
    .unwrap();
    let sims: Vec<_> = (0..128)
        .map(|s| {
            tx.simulate(&gen_stimulus(n_bb, 1000 + s, 0.9).unwrap())
                .unwrap()
        })
        .collect();
    let recs: Vec<Record> = sims.iter().map(|s| Record::new(&s.xd, &s.xhat)).collect();
    let basis = MonomialBasis::enumerate(3, 4, 4).unwrap();
    let cfg = FitConfig {
        l_f: n_bb * k,
        ridge: 0.0,
        solver: Solver::NormalCholesky,
        lead: None,
    };
    let (model, rep) = fit_model_ensemble(&recs, &basis, k, &cfg).unwrap();
    let v = tx.simulate(&gen_stimulus(n_bb, 7, 0.9).unwrap()).unwrap();
    let val = validate(&model, &v.xd, &v.xhat).unwrap();
    let ok = rep.train_nmse_db <= -100.0 && val <= -100.0;
    report(
        3,
        ok,
        &format!(
            "train {:.1} dB, fresh-seed val {val:.1} dB",
            rep.train_nmse_db
        ),
    )
}

fn criterion_4_linear_fir_convergence() -> bool {
    let mut cfg = config("linear.toml");
    let mut vals = Vec::new();
    for l_f in [16, 32, 64, 128] {
        cfg.model.l_f = l_f;
        let row = run_point(&cfg, 0.0);
        if let Some(e) = row.error {
            return report(4, false, &format!("L_f {l_f}: {e}"));
        }
        vals.push(row.val_nmse_db);
    }
    let decreasing = vals.windows(2).all(|w| w[1] < w[0]);
    let ok = decreasing && vals[3] <= -30.0;
    let s: Vec<String> = vals.iter().map(|v| format!("{v:.2}")).collect();
    report(
        4,
        ok,
        &format!("val NMSE at L_f 16/32/64/128: {} dB", s.join(", ")),
    )
}

fn criterion_5_identification_round_trip() -> bool {
    let k = 4;
    let basis = MonomialBasis::enumerate(3, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l_f = 8;
    let taps: Vec<Vec<Complex64>> = (0..basis.len())
        .map(|_| {
            (0..l_f)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let truth = FirBankModel::new(basis.clone(), taps, k, Mode::Periodic).unwrap();
    let rates = RateConfig::new(1024, k, 1).unwrap();
    let xd = encode(
        &gen_stimulus(1024, 9, 0.9).unwrap(),
        &EncoderConfig::dsm1(uniform_levels(5), k),
        &rates,
    )
    .unwrap()
    .signal;
    let xhat = truth.forward(&xd).unwrap();
    let t = truth.tap_vector();
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut fitted = Vec::new();
    for solver in [Solver::NormalCholesky, Solver::Qr] {
        let cfg = FitConfig {
            l_f,
            ridge: 0.0,
            solver,
            lead: Some(0),
        };
        fitted.push(
            fit_model(&xd, &xhat, &basis, k, &cfg)
                .unwrap()
                .0
                .tap_vector(),
        );
    }
    let rel = |a: &[Complex64], b: &[Complex64]| {
        let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm(&d) / norm(b)
    };
    let (e0, e1, agree) = (
        rel(&fitted[0], &t),
        rel(&fitted[1], &t),
        rel(&fitted[0], &fitted[1]),
    );
    let ok = e0 <= 1e-8 && e1 <= 1e-8 && agree <= 1e-6;
    report(
        5,
        ok,
        &format!("tap rel err cholesky {e0:.2e}, qr {e1:.2e}, solver disagreement {agree:.2e}"),
    )
}

fn criterion_6_encoder_properties() -> bool {
    let levels = uniform_levels(5);
    let k = 8;
    let rates = RateConfig::new(4096, k, 1).unwrap();
    let cfg = EncoderConfig::dsm1(levels.clone(), k);
    let x = gen_stimulus(4096, 21, 0.9).unwrap();
    let xd = encode(&x, &cfg, &rates).unwrap().signal;
    let alphabet = xd
        .samples()
        .iter()
        .all(|v| levels.contains(&v.re) && levels.contains(&v.im));

    let dsm = Dsm1::new(&levels);
    let mut dc_err = 0.0f64;
    for c in [-0.93, -0.41, 0.0, 0.3, 0.77, 1.0] {
        let (out, _, _) = dsm.run(&vec![c; 10_000]);
        dc_err = dc_err.max((out.iter().sum::<f64>() / out.len() as f64 - c).abs());
    }

    let input = upsample_ideal_real(&x.re(), k).unwrap();
    let (out, _, _) = dsm.run(input.samples());
    let mut err: Vec<Complex64> = out
        .iter()
        .zip(input.samples())
        .map(|(o, i)| Complex64::new(o - i, 0.0))
        .collect();
    fft::forward(&mut err);
    let n = err.len();
    let decade = n / 20;
    let low: f64 = err[..decade].iter().map(|v| v.norm_sqr()).sum();
    let high: f64 = err[n / 2 - decade..=n / 2]
        .iter()
        .map(|v| v.norm_sqr())
        .sum();

    let ok = alphabet && dc_err <= 1e-3 && low < high;
    report(
        6,
        ok,
        &format!("alphabet exact {alphabet}, worst DC error {dc_err:.2e}, low/high band error power {:.2e}", low / high),
    )
}

fn criterion_7_dpd_properties() -> bool {
    let cfg = config("dpd.toml");
    let mut notes = Vec::new();

    // X = 0 gives the identity, so the compensated run equals the plain one
    let (fitted, _) = run_dpd_fit(&cfg, 0.05).unwrap();
    let zero = Compensator::identity(
        fitted.basis.clone(),
        fitted.l0.clone(),
        fitted.k,
        fitted.encoder.clone(),
        fitted.alignment,
    );
    let x = gen_stimulus(cfg.dpd.n_bb, cfg.dpd.seed_eval, cfg.data.peak).unwrap();
    let (cx, clips) = zero.apply(&x).unwrap();
    let ev0 = run_dpd_eval(&cfg, &zero, 0.05).unwrap();
    let identity_ok = cx == x && clips == 0 && ev0.nmse_dpd_db == ev0.nmse_plain_db;
    notes.push(format!("X=0 identity {identity_ok}"));

    let mut imps = Vec::new();
    for &d in &[0.0, 0.0125, 0.025, 0.05] {
        let (comp, _) = run_dpd_fit(&cfg, d).unwrap();
        let ev = run_dpd_eval(&cfg, &comp, d).unwrap();
        notes.push(format!(
            "delta {d}: plain {:.2} dpd {:.2} gain {:.2} dB clips {}",
            ev.nmse_plain_db,
            ev.nmse_dpd_db,
            ev.improvement_db(),
            ev.clip_events
        ));
        imps.push(ev.improvement_db());
    }
    let vanishing = imps[0].abs() <= 1.0 && imps.windows(2).all(|w| w[0] < w[1]);
    let positive = imps[1..].iter().all(|&g| g > 0.0);
    let strong = imps[3] >= 6.0;
    let ok = identity_ok && vanishing && positive && strong;
    report(7, ok, &notes.join("; "))
}

fn criterion_8_analytic_spot_checks() -> bool {
    let mut notes = Vec::new();

    let cfg = RateConfig::new(16, 1, 10).unwrap();
    let constant =
        |cfg: &RateConfig, c: f64| RealSignal::new(vec![c; cfg.n_fine()], cfg.f_fine()).unwrap();
    let y =
        apply_nonlinearity(&constant(&cfg, 0.5), &CtKernelSpec::cubic_delay(0.1), &cfg).unwrap();
    let cubic_err = y
        .samples()
        .iter()
        .map(|v| (v - 0.4875).abs())
        .fold(0.0, f64::max);
    notes.push(format!("cubic constant err {cubic_err:.1e}"));

    // closed-form integrals of the two kernels over [0, 4T)
    let z = Complex64::new(-0.91, PI / 5.0);
    let i1 = (1.0 - (-3.8f64).exp()) / 0.95;
    let i2 = (((z * 4.0).exp() - 1.0) / z).re;
    let want = 0.5 - 0.1 * 0.25 * i1 * i2;
    let mut sep_ok = true;
    let mut prev = f64::INFINITY;
    for r in [5, 10, 40] {
        let cfg = RateConfig::new(4, 1, r).unwrap();
        let y = apply_nonlinearity(
            &constant(&cfg, 0.5),
            &CtKernelSpec::separable_quad(0.1),
            &cfg,
        )
        .unwrap();
        let err = (y.samples()[3] - want).abs();
        // first-order Riemann sum: error shrinks like 1/R
        sep_ok &= err <= 0.0375 / r as f64 && err < prev;
        prev = err;
        notes.push(format!("separable R={r} err {err:.2e}"));
    }

    // fast separable path against the direct double sum on 64 fine samples
    let cfg = RateConfig::new(2, 2, 4).unwrap();
    let v: Vec<f64> = (0..64)
        .map(|f| ((f * 29) % 17) as f64 / 8.0 - 1.0)
        .collect();
    let fast = apply_nonlinearity(
        &RealSignal::new(v.clone(), cfg.f_fine()).unwrap(),
        &CtKernelSpec::separable_quad(0.013),
        &cfg,
    )
    .unwrap();
    let h1 = KernelShape::Exp { decay: 0.95 }.tabulate(4, 4.0);
    let h2 = KernelShape::ExpCos {
        decay: 0.91,
        omega_over_pi: 0.2,
    }
    .tabulate(4, 4.0);
    let mut direct_err = 0.0f64;
    for f in 0..64 {
        let mut acc = 0.0;
        for (a, ha) in h1.iter().enumerate() {
            for (b, hb) in h2.iter().enumerate() {
                acc += ha * hb * v[(f + 64 - a) % 64] * v[(f + 64 - b) % 64];
            }
        }
        let want = v[f] - 0.013 * acc / 16.0;
        direct_err = direct_err.max((fast.samples()[f] - want).abs() / want.abs().max(1.0));
    }
    notes.push(format!("separable vs double sum {direct_err:.1e}"));

    // demodulator tone contract
    let cfg = RateConfig::new(40, 3, 2).unwrap();
    let fs = cfg.f_fine();
    let tone = |amp: f64, freq: f64, ph: f64| {
        RealSignal::new(
            (0..cfg.n_fine())
                .map(|f| amp * (TAU * freq * f as f64 / fs + ph).cos())
                .collect(),
            fs,
        )
        .unwrap()
    };
    let out = band_extract_demod(&tone(0.7, cfg.f_c() + 0.1, 0.0), &cfg).unwrap();
    let tone_err = out
        .samples()
        .iter()
        .enumerate()
        .map(|(n, v)| (v - Complex64::from_polar(0.7, TAU * 0.1 * n as f64)).norm())
        .fold(0.0, f64::max);
    let oob = band_extract_demod(&tone(1.0, 3.0 * cfg.f_c(), 0.3), &cfg).unwrap();
    let oob_max = oob.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
    notes.push(format!(
        "tone contract err {tone_err:.1e}, out-of-band {oob_max:.1e}"
    ));

    let ok = cubic_err <= 1e-15
        && sep_ok
        && direct_err <= 1e-12
        && tone_err <= 1e-12
        && oob_max <= 1e-12;
    report(8, ok, &notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> bool); 8] = [
        (1, criterion_1_example1_sweep),
        (2, criterion_2_example2_sweep),
        (3, criterion_3_structural_exactness),
        (4, criterion_4_linear_fir_convergence),
        (5, criterion_5_identification_round_trip),
        (6, criterion_6_encoder_properties),
        (7, criterion_7_dpd_properties),
        (8, criterion_8_analytic_spot_checks),
    ];
    let mut failed = 0;
    for (n, run) in criteria {
        let ok = catch_unwind(run).unwrap_or_else(|_| {
            println!("FAIL criterion {n}: panicked");
            false
        });
        failed += usize::from(!ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
