//! Sweep driver: simulate, fit, and validate once per nonlinearity strength,
//! plus the predistortion run. Every step is a pure function of the config.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::config::{ExperimentConfig, L0Choice};
use crate::dpd::{
    eval_compensated, fit_compensator, model_filters_l0, Compensator, DpdEval, DpdFitReport, L0,
};
use crate::error::{Error, Result};
use crate::ident::{fit_model, validate, FitReport};
use crate::io::{load_signal, save_signal};
use crate::model::FirBankModel;
use crate::passband::Simulation;
use crate::stimulus::gen_stimulus;

pub const SWEEP_SCHEMA: &str = "#schema=sweep-v1";
pub const SWEEP_COLUMNS: &str = "example_id,delta,n_train,n_val,M,m_i,m_q,L_f,lambda,train_nmse_db,val_nmse_db,condition_estimate,seed_train,seed_val,wall_seconds,error";

/// File names written by the staged pipeline.
pub const TRAIN_XD: &str = "train_xd.csv";
pub const TRAIN_XHAT: &str = "train_xhat.csv";
pub const VAL_XD: &str = "val_xd.csv";
pub const VAL_XHAT: &str = "val_xhat.csv";
pub const MODEL_FILE: &str = "model.csv";
pub const COMPENSATOR_FILE: &str = "compensator.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub example_id: String,
    pub delta: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub max_degree: usize,
    pub m_i: usize,
    pub m_q: usize,
    pub l_f: usize,
    pub lambda: f64,
    pub train_nmse_db: f64,
    pub val_nmse_db: f64,
    pub condition_estimate: f64,
    pub seed_train: u64,
    pub seed_val: u64,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

/// Training and validation records for one sweep point.
pub struct PointData {
    pub train: Simulation,
    pub val: Simulation,
}

pub fn simulate_point(cfg: &ExperimentConfig, delta: f64) -> Result<PointData> {
    let d = &cfg.data;
    let train = cfg.transmitter(d.n_train, delta)?.simulate(&gen_stimulus(
        d.n_train,
        d.seed_train,
        d.peak,
    )?)?;
    let val = cfg
        .transmitter(d.n_val, delta)?
        .simulate(&gen_stimulus(d.n_val, d.seed_val, d.peak)?)?;
    Ok(PointData { train, val })
}

pub fn fit_point(cfg: &ExperimentConfig, data: &PointData) -> Result<(FirBankModel, FitReport)> {
    let (model, mut report) = fit_model(
        &data.train.xd,
        &data.train.xhat,
        &cfg.basis()?,
        cfg.rates.k,
        &cfg.fit_config(),
    )?;
    report.val_nmse_db = Some(validate(&model, &data.val.xd, &data.val.xhat)?);
    Ok((model, report))
}

fn blank_row(cfg: &ExperimentConfig, delta: f64) -> SweepRow {
    SweepRow {
        example_id: cfg.example_id.clone(),
        delta,
        n_train: cfg.data.n_train,
        n_val: cfg.data.n_val,
        max_degree: cfg.model.max_degree,
        m_i: cfg.model.m_i,
        m_q: cfg.model.m_q,
        l_f: cfg.model.l_f,
        lambda: cfg.model.ridge,
        train_nmse_db: f64::NAN,
        val_nmse_db: f64::NAN,
        condition_estimate: f64::NAN,
        seed_train: cfg.data.seed_train,
        seed_val: cfg.data.seed_val,
        wall_seconds: 0.0,
        error: None,
    }
}

pub fn run_point(cfg: &ExperimentConfig, delta: f64) -> SweepRow {
    let start = Instant::now();
    let mut row = blank_row(cfg, delta);
    let result = simulate_point(cfg, delta).and_then(|data| fit_point(cfg, &data));
    match result {
        Ok((_, rep)) => {
            row.train_nmse_db = rep.train_nmse_db;
            row.val_nmse_db = rep.val_nmse_db.unwrap_or(f64::NAN);
            row.condition_estimate = rep.condition_estimate;
        }
        Err(e) => {
            log::error!("sweep point delta = {delta} failed: {e}");
            row.error = Some(e.to_string());
        }
    }
    row.wall_seconds = start.elapsed().as_secs_f64();
    log::info!(
        "delta = {delta}: val NMSE {:.3} dB ({:.1} s)",
        row.val_nmse_db,
        row.wall_seconds
    );
    row
}

/// Runs every sweep point, up to `jobs` at a time; rows come back in config order.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(|| cfg.deltas.par_iter().map(|&d| run_point(cfg, d)).collect()))
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{SWEEP_SCHEMA}\n{SWEEP_COLUMNS}").unwrap();
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            clean(&r.example_id),
            r.delta,
            r.n_train,
            r.n_val,
            r.max_degree,
            r.m_i,
            r.m_q,
            r.l_f,
            r.lambda,
            r.train_nmse_db,
            r.val_nmse_db,
            r.condition_estimate,
            r.seed_train,
            r.seed_val,
            r.wall_seconds,
            r.error.as_deref().map(clean).unwrap_or_default()
        )
        .unwrap();
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    let perr = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    match lines.next() {
        Some((_, l)) if l.trim() == SWEEP_SCHEMA => {}
        _ => return Err(perr(1, "missing sweep schema tag")),
    }
    match lines.next() {
        Some((_, l)) if l.trim() == SWEEP_COLUMNS => {}
        _ => return Err(perr(2, "unexpected sweep header")),
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let c: Vec<&str> = l.split(',').collect();
        if c.len() != 16 {
            return Err(perr(line, "expected 16 columns"));
        }
        let f = |k: usize| c[k].parse::<f64>().map_err(|_| perr(line, "bad number"));
        let u = |k: usize| c[k].parse::<usize>().map_err(|_| perr(line, "bad integer"));
        rows.push(SweepRow {
            example_id: c[0].to_string(),
            delta: f(1)?,
            n_train: u(2)?,
            n_val: u(3)?,
            max_degree: u(4)?,
            m_i: u(5)?,
            m_q: u(6)?,
            l_f: u(7)?,
            lambda: f(8)?,
            train_nmse_db: f(9)?,
            val_nmse_db: f(10)?,
            condition_estimate: f(11)?,
            seed_train: u(12)? as u64,
            seed_val: u(13)? as u64,
            wall_seconds: f(14)?,
            error: if c[15].is_empty() {
                None
            } else {
                Some(c[15].to_string())
            },
        });
    }
    Ok(rows)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Writes the four staged record files into `dir`.
pub fn save_point(dir: &Path, data: &PointData) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_signal(&dir.join(TRAIN_XD), &data.train.xd)?;
    save_signal(&dir.join(TRAIN_XHAT), &data.train.xhat)?;
    save_signal(&dir.join(VAL_XD), &data.val.xd)?;
    save_signal(&dir.join(VAL_XHAT), &data.val.xhat)?;
    Ok(())
}

pub fn load_point(dir: &Path) -> Result<PointData> {
    let sim = |xd: &str, xhat: &str| -> Result<Simulation> {
        Ok(Simulation {
            xd: load_signal(&dir.join(xd))?,
            xhat: load_signal(&dir.join(xhat))?,
            overloads: 0,
        })
    };
    Ok(PointData {
        train: sim(TRAIN_XD, TRAIN_XHAT)?,
        val: sim(VAL_XD, VAL_XHAT)?,
    })
}

/// Fits the compensator at `delta` on the fit seed.
pub fn run_dpd_fit(cfg: &ExperimentConfig, delta: f64) -> Result<(Compensator, DpdFitReport)> {
    let p = &cfg.dpd;
    let tx = cfg.transmitter(p.n_bb, delta)?;
    let x = gen_stimulus(p.n_bb, p.seed_fit, cfg.data.peak)?;
    let basis = cfg.dpd_basis()?;
    let l0 = match p.l0 {
        L0Choice::BrickWall => L0::BrickWall,
        L0Choice::Model { l_f } => model_filters_l0(&x, &tx, &basis, l_f)?,
    };
    fit_compensator(&x, &tx, &basis, l0, &cfg.dpd_config())
}

/// Scores a compensator at `delta` on the evaluation seed.
pub fn run_dpd_eval(cfg: &ExperimentConfig, comp: &Compensator, delta: f64) -> Result<DpdEval> {
    let p = &cfg.dpd;
    let tx = cfg.transmitter(p.n_bb, delta)?;
    eval_compensated(
        &gen_stimulus(p.n_bb, p.seed_eval, cfg.data.peak)?,
        comp,
        &tx,
    )
}
