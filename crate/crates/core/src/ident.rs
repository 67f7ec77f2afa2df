//! Least-squares identification of FIR-bank taps.
//!
//! Monomials that are pure time shifts of one another (`i[n-1]` and `i[n]`)
//! produce identical regressor columns once their tap offsets line up. Those
//! columns are folded together before solving, with the column scaled by the
//! square root of its multiplicity; splitting the solution back evenly gives
//! exactly the ridge (or minimum-norm) solution of the unfolded problem.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::metrics::nmse_db;
use crate::model::{FirBankModel, Mode};
use crate::monomial::{MonomialBasis, MonomialSpec, ShiftClass};
use crate::signal::{check_rate, ComplexSignal};

/// Baseband rows per Gram block.
const BLOCK_ROWS: usize = 1024;
/// Blocks per reduction chunk; partial Grams are summed in chunk order.
const CHUNK_BLOCKS: usize = 8;
/// Cholesky pivots spanning more than this squared ratio count as singular.
const RANK_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    NormalCholesky,
    Qr,
}

impl Solver {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal_cholesky" | "cholesky" => Ok(Solver::NormalCholesky),
            "qr" => Ok(Solver::Qr),
            _ => Err(Error::Config(format!(
                "unknown solver {s:?} (normal_cholesky | qr)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::NormalCholesky => "normal_cholesky",
            Solver::Qr => "qr",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Taps per monomial at the encoder rate.
    pub l_f: usize,
    /// Ridge weight relative to the mean Gram diagonal.
    pub ridge: f64,
    pub solver: Solver,
    /// Filter centring; `None` picks `L_f / 2` (0 for full-length taps).
    pub lead: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            l_f: 16,
            ridge: 1e-10,
            solver: Solver::NormalCholesky,
            lead: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_f == 0 {
            return Err(invalid("L_f must be >= 1"));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(invalid(format!(
                "ridge must be a finite non-negative number, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub train_nmse_db: f64,
    /// Filled in by [`validate`] callers; `None` until a held-out record is scored.
    pub val_nmse_db: Option<f64>,
    pub condition_estimate: f64,
    /// Complex unknowns before folding shift duplicates (`N * L_f`).
    pub unknowns: usize,
    /// Distinct regressor columns actually solved for.
    pub folded_unknowns: usize,
    pub rank_deficient: bool,
}

/// One training pair: encoder output and reference output.
#[derive(Clone, Copy, Debug)]
pub struct Record<'a> {
    pub xd: &'a ComplexSignal,
    pub xhat: &'a ComplexSignal,
}

impl<'a> Record<'a> {
    pub fn new(xd: &'a ComplexSignal, xhat: &'a ComplexSignal) -> Self {
        Self { xd, xhat }
    }
}

fn check_record(r: &Record, k: usize) -> Result<()> {
    if r.xd.len() != r.xhat.len() * k {
        return Err(Error::LengthMismatch {
            expected: r.xhat.len() * k,
            actual: r.xd.len(),
        });
    }
    check_rate(r.xd.rate(), r.xhat.rate() * k as f64)
}

/// A folded regressor column: representative monomial `rep` delayed by `offset`
/// encoder samples, standing in for `mult` original columns.
#[derive(Clone, Copy, Debug)]
struct FoldedColumn {
    rep: usize,
    offset: usize,
    mult: usize,
}

struct Folding {
    reps: Vec<MonomialSpec>,
    classes: Vec<ShiftClass>,
    columns: Vec<FoldedColumn>,
    index: BTreeMap<(usize, usize), usize>,
}

impl Folding {
    fn new(basis: &MonomialBasis, l_f: usize, n_d: usize) -> Self {
        let (reps, classes) = basis.shift_classes();
        let mut mult: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for c in &classes {
            for l in 0..l_f {
                *mult.entry((c.rep, (l + c.shift) % n_d)).or_default() += 1;
            }
        }
        let columns: Vec<FoldedColumn> = mult
            .iter()
            .map(|(&(rep, offset), &m)| FoldedColumn {
                rep,
                offset,
                mult: m,
            })
            .collect();
        let index = columns
            .iter()
            .enumerate()
            .map(|(u, c)| ((c.rep, c.offset), u))
            .collect();
        Self {
            reps,
            classes,
            columns,
            index,
        }
    }

    /// Splits a folded solution back onto the original taps.
    fn unfold(&self, z: &[Complex64], l_f: usize, n_d: usize) -> Vec<Vec<Complex64>> {
        self.classes
            .iter()
            .map(|c| {
                (0..l_f)
                    .map(|l| {
                        let u = self.index[&(c.rep, (l + c.shift) % n_d)];
                        z[u] / (self.columns[u].mult as f64).sqrt()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Fits taps to one periodic record.
pub fn fit_model(
    xd: &ComplexSignal,
    xhat_ref: &ComplexSignal,
    basis: &MonomialBasis,
    k: usize,
    cfg: &FitConfig,
) -> Result<(FirBankModel, FitReport)> {
    fit_model_ensemble(&[Record::new(xd, xhat_ref)], basis, k, cfg)
}

/// Fits one set of taps jointly to several independent periodic records of equal length.
pub fn fit_model_ensemble(
    records: &[Record],
    basis: &MonomialBasis,
    k: usize,
    cfg: &FitConfig,
) -> Result<(FirBankModel, FitReport)> {
    cfg.validate()?;
    if k == 0 {
        return Err(invalid("K must be >= 1"));
    }
    let first = records
        .first()
        .ok_or_else(|| invalid("no training records"))?;
    let n_d = first.xd.len();
    for r in records {
        check_record(r, k)?;
        if r.xd.len() != n_d {
            return Err(Error::LengthMismatch {
                expected: n_d,
                actual: r.xd.len(),
            });
        }
    }
    if cfg.l_f > n_d {
        return Err(invalid(format!(
            "L_f = {} exceeds the record length {n_d}",
            cfg.l_f
        )));
    }
    let n_rows: usize = records.iter().map(|r| r.xhat.len()).sum();
    let unknowns = basis.len() * cfg.l_f;
    if unknowns > n_rows {
        log::warn!("{unknowns} complex unknowns exceed {n_rows} training samples");
    }

    let (model, condition_estimate, folded, rank_deficient) = if cfg.l_f == n_d {
        fit_full_length(records, basis, k, cfg)?
    } else {
        let lead = cfg.lead.unwrap_or(cfg.l_f / 2);
        fit_time_domain(records, basis, k, cfg, lead)?
    };

    let (mut err, mut energy) = (0.0, 0.0);
    for r in records {
        let y = model.forward(r.xd)?;
        err += y
            .samples()
            .iter()
            .zip(r.xhat.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
        energy += r.xhat.energy();
    }
    let train_nmse_db = if energy == 0.0 {
        // zero target: the solution is zero, nothing to normalize by
        crate::metrics::NMSE_FLOOR_DB
    } else {
        crate::metrics::ratio_db(err / energy)
    };
    let report = FitReport {
        train_nmse_db,
        val_nmse_db: None,
        condition_estimate,
        unknowns,
        folded_unknowns: folded,
        rank_deficient,
    };
    Ok((model, report))
}

/// Scores a model on a held-out record.
pub fn validate(
    model: &FirBankModel,
    xd_val: &ComplexSignal,
    xhat_val: &ComplexSignal,
) -> Result<f64> {
    check_record(&Record::new(xd_val, xhat_val), model.k)?;
    let y = model.forward(xd_val)?;
    nmse_db(xhat_val, &y)
}

/// Explicit regressor matrix of the unfolded problem (rows: baseband samples of
/// all records in order; columns: monomial-major, then tap). Meant for small problems.
pub fn design_matrix(
    records: &[Record],
    basis: &MonomialBasis,
    k: usize,
    l_f: usize,
    lead: usize,
) -> DMatrix<f64> {
    let rows: usize = records.iter().map(|r| r.xhat.len()).sum();
    let mut a = DMatrix::zeros(rows, basis.len() * l_f);
    let mut row0 = 0;
    for r in records {
        let n_d = r.xd.len() as i64;
        for (m, spec) in basis.specs().iter().enumerate() {
            let v = spec.eval(r.xd);
            for n in 0..r.xhat.len() {
                for l in 0..l_f {
                    let idx = (n * k + lead) as i64 - l as i64;
                    a[(row0 + n, m * l_f + l)] = v[idx.rem_euclid(n_d) as usize];
                }
            }
        }
        row0 += r.xhat.len();
    }
    a
}

struct Solution {
    z: Vec<Complex64>,
    condition: f64,
    rank_deficient: bool,
}

fn fit_time_domain(
    records: &[Record],
    basis: &MonomialBasis,
    k: usize,
    cfg: &FitConfig,
    lead: usize,
) -> Result<(FirBankModel, f64, usize, bool)> {
    let n_d = records[0].xd.len();
    let fold = Folding::new(basis, cfg.l_f, n_d);
    let sol = match cfg.solver {
        Solver::NormalCholesky => solve_normal(records, &fold, k, lead, cfg.ridge)?,
        Solver::Qr => solve_qr(records, &fold, k, lead, cfg.ridge)?,
    };
    let taps = fold.unfold(&sol.z, cfg.l_f, n_d);
    let model = FirBankModel::with_lead(basis.clone(), taps, k, Mode::Periodic, lead % n_d)?;
    Ok((model, sol.condition, fold.columns.len(), sol.rank_deficient))
}

/// Representative monomial streams of one record.
fn rep_streams(fold: &Folding, xd: &ComplexSignal) -> Vec<Vec<f64>> {
    fold.reps.iter().map(|s| s.eval(xd)).collect()
}

/// Fills `block` (row-major, `rows x U`) with folded regressor rows `n0..n0+rows`.
fn fill_block(
    block: &mut [f64],
    streams: &[Vec<f64>],
    fold: &Folding,
    k: usize,
    lead: usize,
    n0: usize,
    rows: usize,
) {
    let u_count = fold.columns.len();
    let n_d = streams[0].len();
    for (u, c) in fold.columns.iter().enumerate() {
        let v = &streams[c.rep];
        let scale = (c.mult as f64).sqrt();
        let back = c.offset % n_d;
        for r in 0..rows {
            let idx = ((n0 + r) * k + lead + n_d - back) % n_d;
            block[r * u_count + u] = scale * v[idx];
        }
    }
}

/// Accumulates `(G, A^T y_re, A^T y_im)` over every record with a fixed chunk schedule.
fn accumulate_gram(
    records: &[Record],
    fold: &Folding,
    k: usize,
    lead: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let u_count = fold.columns.len();
    let mut g = vec![0.0; u_count * u_count];
    let mut br = vec![0.0; u_count];
    let mut bi = vec![0.0; u_count];
    let waves = rayon::current_num_threads().max(1);
    for r in records {
        let streams = rep_streams(fold, r.xd);
        let n = r.xhat.len();
        let chunk_rows = BLOCK_ROWS * CHUNK_BLOCKS;
        let chunks: Vec<(usize, usize)> = (0..n)
            .step_by(chunk_rows)
            .map(|s| (s, (s + chunk_rows).min(n)))
            .collect();
        for wave in chunks.chunks(waves) {
            let partials: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = wave
                .par_iter()
                .map(|&(s, e)| chunk_gram(&streams, fold, k, lead, r.xhat.samples(), s, e))
                .collect();
            for (pg, pr, pi) in partials {
                g.iter_mut().zip(&pg).for_each(|(a, b)| *a += b);
                br.iter_mut().zip(&pr).for_each(|(a, b)| *a += b);
                bi.iter_mut().zip(&pi).for_each(|(a, b)| *a += b);
            }
        }
    }
    (g, br, bi)
}

fn chunk_gram(
    streams: &[Vec<f64>],
    fold: &Folding,
    k: usize,
    lead: usize,
    y: &[Complex64],
    start: usize,
    end: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let u = fold.columns.len();
    let mut g = vec![0.0; u * u];
    let mut br = vec![0.0; u];
    let mut bi = vec![0.0; u];
    let mut block = vec![0.0; BLOCK_ROWS * u];
    let mut n0 = start;
    while n0 < end {
        let rows = BLOCK_ROWS.min(end - n0);
        fill_block(&mut block, streams, fold, k, lead, n0, rows);
        // G += A^T A
        unsafe {
            matrixmultiply::dgemm(
                u,
                rows,
                u,
                1.0,
                block.as_ptr(),
                1,
                u as isize,
                block.as_ptr(),
                u as isize,
                1,
                1.0,
                g.as_mut_ptr(),
                u as isize,
                1,
            );
        }
        for r in 0..rows {
            let yv = y[n0 + r];
            let row = &block[r * u..(r + 1) * u];
            for (c, a) in row.iter().enumerate() {
                br[c] += a * yv.re;
                bi[c] += a * yv.im;
            }
        }
        n0 += rows;
    }
    (g, br, bi)
}

fn ridge_weight(trace: f64, unfolded: usize, ridge: f64) -> f64 {
    // folded diagonal entries sum to the unfolded trace
    ridge * trace / unfolded as f64
}

fn solve_normal(
    records: &[Record],
    fold: &Folding,
    k: usize,
    lead: usize,
    ridge: f64,
) -> Result<Solution> {
    let u = fold.columns.len();
    let (g, br, bi) = accumulate_gram(records, fold, k, lead);
    let mut gram = DMatrix::from_row_slice(u, u, &g);
    let unfolded: usize = fold.columns.iter().map(|c| c.mult).sum();
    let lam = ridge_weight(gram.trace(), unfolded, ridge);
    for d in 0..u {
        gram[(d, d)] += lam;
    }
    let mut rhs = DMatrix::zeros(u, 2);
    for c in 0..u {
        rhs[(c, 0)] = br[c];
        rhs[(c, 1)] = bi[c];
    }
    let (x, condition, rank_deficient) = solve_spd(gram, &rhs);
    let z = (0..u)
        .map(|c| Complex64::new(x[(c, 0)], x[(c, 1)]))
        .collect();
    Ok(Solution {
        z,
        condition,
        rank_deficient,
    })
}

/// Cholesky solve with a minimum-norm SVD fallback for (numerically) singular systems.
fn solve_spd(gram: DMatrix<f64>, rhs: &DMatrix<f64>) -> (DMatrix<f64>, f64, bool) {
    if let Some(ch) = gram.clone().cholesky() {
        let diag = ch.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        let condition = (hi / lo).powi(2);
        if lo > 0.0 && (lo / hi).powi(2) > RANK_TOL {
            return (ch.solve(rhs), condition, false);
        }
    }
    log::warn!("normal equations are singular; returning the minimum-norm solution");
    let svd = gram.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * RANK_TOL.sqrt() * 1e-2;
    let smin_kept = svd
        .singular_values
        .iter()
        .filter(|s| **s > tol)
        .fold(f64::INFINITY, |a, b| a.min(*b));
    let x = svd.solve(rhs, tol).expect("SVD computed with both factors");
    (x, smax / smin_kept, true)
}

fn solve_qr(
    records: &[Record],
    fold: &Folding,
    k: usize,
    lead: usize,
    ridge: f64,
) -> Result<Solution> {
    let u = fold.columns.len();
    let rows: usize = records.iter().map(|r| r.xhat.len()).sum();
    let mut a = DMatrix::zeros(rows + u, u);
    let mut y = DMatrix::zeros(rows + u, 2);
    let mut row0 = 0;
    let mut block = vec![0.0; BLOCK_ROWS * u];
    for r in records {
        let streams = rep_streams(fold, r.xd);
        let n = r.xhat.len();
        let mut n0 = 0;
        while n0 < n {
            let len = BLOCK_ROWS.min(n - n0);
            fill_block(&mut block, &streams, fold, k, lead, n0, len);
            for i in 0..len {
                for c in 0..u {
                    a[(row0 + n0 + i, c)] = block[i * u + c];
                }
                let v = r.xhat.samples()[n0 + i];
                y[(row0 + n0 + i, 0)] = v.re;
                y[(row0 + n0 + i, 1)] = v.im;
            }
            n0 += len;
        }
        row0 += n;
    }
    let trace: f64 = a.rows(0, rows).iter().map(|v| v * v).sum();
    let unfolded: usize = fold.columns.iter().map(|c| c.mult).sum();
    let lam = ridge_weight(trace, unfolded, ridge);
    for d in 0..u {
        a[(rows + d, d)] = lam.sqrt();
    }
    let qr = a.clone().qr();
    let r_mat = qr.r();
    let diag: Vec<f64> = r_mat.diagonal().iter().map(|v| v.abs()).collect();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    let condition = (hi / lo).powi(2);
    let (x, rank_deficient) = if lo > 0.0 && (lo / hi).powi(2) > RANK_TOL {
        let qty = qr.q().transpose() * &y;
        (
            r_mat
                .solve_upper_triangular(&qty)
                .expect("non-zero diagonal"),
            false,
        )
    } else {
        log::warn!("design matrix is rank deficient; returning the minimum-norm solution");
        let svd = a.svd(true, true);
        let tol = svd.singular_values.max() * 1e-9;
        (
            svd.solve(&y, tol).expect("SVD computed with both factors"),
            true,
        )
    };
    let z = (0..u)
        .map(|c| Complex64::new(x[(c, 0)], x[(c, 1)]))
        .collect();
    Ok(Solution {
        z,
        condition,
        rank_deficient,
    })
}

/// Full-length circular taps (`L_f = n_d`), solved bin by bin.
///
/// The demodulator keeps only the baseband band, so the filters are sought
/// band-limited: each baseband bin is a small complex least-squares problem
/// across records over the shift representatives. The ridge, if any, is
/// relative to each bin's mean Gram diagonal.
fn fit_full_length(
    records: &[Record],
    basis: &MonomialBasis,
    k: usize,
    cfg: &FitConfig,
) -> Result<(FirBankModel, f64, usize, bool)> {
    let n_d = records[0].xd.len();
    let n_bb = n_d / k;
    let fold = Folding::new(basis, 1, n_d);
    let (reps, classes) = (&fold.reps, &fold.classes);
    let mut mult = vec![0usize; reps.len()];
    for c in classes {
        mult[c.rep] += 1;
    }
    let bins: Vec<i64> = fft::band_bins(n_bb).collect();
    let n_rec = records.len();
    let u = reps.len();

    // spectra[bin][rec * u + rep], restricted to the band
    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); n_rec * u]; bins.len()];
    let mut targets = vec![vec![Complex64::new(0.0, 0.0); n_rec]; bins.len()];
    for (ri, r) in records.iter().enumerate() {
        for (p, spec) in reps.iter().enumerate() {
            let mut v = fft::to_complex(&spec.eval(r.xd));
            fft::forward(&mut v);
            let scale = (mult[p] as f64).sqrt() / k as f64;
            for (bi, &b) in bins.iter().enumerate() {
                spectra[bi][ri * u + p] = v[fft::wrap(b, n_d)] * scale;
            }
        }
        let mut y = r.xhat.samples().to_vec();
        fft::forward(&mut y);
        for (bi, &b) in bins.iter().enumerate() {
            targets[bi][ri] = y[fft::wrap(b, n_bb)];
        }
    }

    let per_bin: Vec<(Vec<Complex64>, f64, bool)> = spectra
        .par_iter()
        .zip(targets.par_iter())
        .map(|(a, y)| solve_bin(a, y, n_rec, u, cfg.ridge))
        .collect();

    let mut taps = vec![vec![Complex64::new(0.0, 0.0); n_d]; basis.len()];
    let mut condition = 0.0f64;
    let mut rank_deficient = false;
    for ((&b, (w, cond, rd)), _) in bins.iter().zip(&per_bin).zip(0..) {
        condition = condition.max(*cond);
        rank_deficient |= *rd;
        let j = fft::wrap(b, n_d);
        for (m, c) in classes.iter().enumerate() {
            let phase = std::f64::consts::TAU
                * ((b * c.shift as i64).rem_euclid(n_d as i64)) as f64
                / n_d as f64;
            taps[m][j] = w[c.rep] * Complex64::from_polar(1.0 / (mult[c.rep] as f64).sqrt(), phase);
        }
    }
    for t in taps.iter_mut() {
        fft::inverse_normalized(t);
    }
    let model = FirBankModel::new(basis.clone(), taps, k, Mode::Periodic)?;
    Ok((model, condition, u * bins.len(), rank_deficient))
}

fn solve_bin(
    a: &[Complex64],
    y: &[Complex64],
    rows: usize,
    cols: usize,
    ridge: f64,
) -> (Vec<Complex64>, f64, bool) {
    let (x, cond, rd) = complex_lstsq(
        DMatrix::from_row_slice(rows, cols, a),
        DVector::from_column_slice(y),
        ridge,
    );
    (x.iter().copied().collect(), cond, rd)
}

/// Complex ridge least squares `min |y - A x|^2 + lam |x|^2` with `lam` relative
/// to the mean Gram diagonal. Falls back to the minimum-norm SVD solution when
/// the normal equations are numerically singular.
///
/// Returns the solution, a condition estimate, and the rank-deficiency flag.
pub(crate) fn complex_lstsq(
    am: DMatrix<Complex64>,
    yv: DVector<Complex64>,
    ridge: f64,
) -> (DVector<Complex64>, f64, bool) {
    let cols = am.ncols();
    let ah = am.adjoint();
    let mut gram = &ah * &am;
    let lam = ridge * gram.trace().re / cols as f64;
    for d in 0..cols {
        gram[(d, d)] += Complex64::new(lam, 0.0);
    }
    let rhs = &ah * &yv;
    if let Some(ch) = gram.clone().cholesky() {
        let diag = ch.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v.re), hi.max(v.re))
        });
        if lo > 0.0 && (lo / hi).powi(2) > RANK_TOL {
            return (ch.solve(&rhs), (hi / lo).powi(2), false);
        }
    }
    if lam > 0.0 {
        // the regularized system is SPD in exact arithmetic; solve it directly
        let svd = gram.svd(true, true);
        let tol = svd.singular_values.max() * 1e-15;
        let x = svd
            .solve(&rhs, tol)
            .expect("SVD computed with both factors");
        return (x, f64::INFINITY, true);
    }
    // minimum-norm least squares straight from the (unsquared) matrix
    let svd = am.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10;
    let kept = svd
        .singular_values
        .iter()
        .filter(|s| **s > tol)
        .fold(f64::INFINITY, |a, b| a.min(*b));
    let x = svd.solve(&yv, tol).expect("SVD computed with both factors");
    (x, (smax / kept).powi(2), true)
}
