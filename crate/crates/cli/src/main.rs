use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use adt_core::config::ExperimentConfig;
use adt_core::dpd::Compensator;
use adt_core::experiment::{
    load_point, run_dpd_eval, run_dpd_fit, run_sweep, save_point, simulate_point, sweep_csv,
    MODEL_FILE,
};
use adt_core::ident::{fit_model, validate};
use adt_core::io::save_signal;
use adt_core::model::FirBankModel;
use adt_core::stimulus::gen_stimulus;

#[derive(Parser)]
#[command(
    name = "adt",
    version,
    about = "All-digital transmitter simulation, identification and predistortion"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded complex Gaussian stimulus.
    GenStimulus {
        #[command(flatten)]
        common: Common,
        /// Samples (defaults to data.n_train).
        #[arg(long)]
        n: Option<usize>,
        /// Seed (defaults to data.seed_train).
        #[arg(long)]
        seed: Option<u64>,
        /// Per-component peak (defaults to data.peak).
        #[arg(long)]
        peak: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate training and validation records at one nonlinearity strength.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: f64,
        /// Output directory for the record files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a model to the training records in a directory.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory written by `simulate`.
        #[arg(long)]
        data_dir: PathBuf,
        /// Model file (defaults to <data-dir>/model.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model on the validation records in a directory.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
    },
    /// Simulate, fit and validate at every configured strength; writes the sweep CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Points run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV path (defaults to output.sweep_csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a predistortion compensator at one strength.
    DpdFit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare plain and compensated error at one strength.
    DpdEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        compensator: PathBuf,
        #[arg(long)]
        delta: f64,
    },
    /// Rewrite a model file in canonical or wide layout.
    ExportModel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Canonical)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// One row per (monomial, tap).
    Canonical,
    /// One row per tap index, one re/im column pair per monomial.
    Wide,
}

fn load_config(c: &Common) -> Result<Option<ExperimentConfig>> {
    let cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if c.print_config {
        print!("{}", cfg.to_toml());
        return Ok(None);
    }
    Ok(Some(cfg))
}

fn wide_text(m: &FirBankModel) -> String {
    let mut s = String::from("tap");
    for spec in m.basis.specs() {
        write!(s, ",{spec}.re,{spec}.im").unwrap();
    }
    s.push('\n');
    for l in 0..m.l_f() {
        write!(s, "{l}").unwrap();
        for t in m.taps() {
            write!(s, ",{},{}", t[l].re, t[l].im).unwrap();
        }
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenStimulus {
            common,
            n,
            seed,
            peak,
            out,
        } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let x = gen_stimulus(
                n.unwrap_or(cfg.data.n_train),
                seed.unwrap_or(cfg.data.seed_train),
                peak.unwrap_or(cfg.data.peak),
            )?;
            save_signal(&out, &x)?;
            println!("wrote {} samples to {}", x.len(), out.display());
        }
        Cmd::Simulate {
            common,
            delta,
            out_dir,
        } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let data = simulate_point(&cfg, delta)?;
            save_point(&out_dir, &data)?;
            println!(
                "delta={delta} train_overloads={} val_overloads={} dir={}",
                data.train.overloads,
                data.val.overloads,
                out_dir.display()
            );
        }
        Cmd::Fit {
            common,
            data_dir,
            out,
        } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let data = load_point(&data_dir)?;
            let (model, rep) = fit_model(
                &data.train.xd,
                &data.train.xhat,
                &cfg.basis()?,
                cfg.rates.k,
                &cfg.fit_config(),
            )?;
            let out = out.unwrap_or_else(|| data_dir.join(MODEL_FILE));
            model.save(&out)?;
            println!(
                "train_nmse_db={} condition_estimate={} unknowns={} folded_unknowns={} rank_deficient={} model={}",
                rep.train_nmse_db,
                rep.condition_estimate,
                rep.unknowns,
                rep.folded_unknowns,
                rep.rank_deficient,
                out.display()
            );
        }
        Cmd::Validate {
            common,
            model,
            data_dir,
        } => {
            if load_config(&common)?.is_none() {
                return Ok(());
            }
            let m = FirBankModel::load(&model)?;
            let data = load_point(&data_dir)?;
            println!(
                "val_nmse_db={}",
                validate(&m, &data.val.xd, &data.val.xhat)?
            );
        }
        Cmd::Sweep { common, jobs, out } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let rows = run_sweep(&cfg, jobs)?;
            let out = out.unwrap_or_else(|| cfg.output.sweep_csv.clone());
            write_file(&out, &sweep_csv(&rows))?;
            for r in &rows {
                match &r.error {
                    None => println!(
                        "delta={} train_nmse_db={:.3} val_nmse_db={:.3}",
                        r.delta, r.train_nmse_db, r.val_nmse_db
                    ),
                    Some(e) => println!("delta={} error={e}", r.delta),
                }
            }
            println!("wrote {}", out.display());
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                bail!("{failed} of {} sweep points failed", rows.len());
            }
        }
        Cmd::DpdFit { common, delta, out } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let (comp, rep) = run_dpd_fit(&cfg, delta)?;
            write_file(&out, &comp.to_text())?;
            println!(
                "fit_nmse_db={} distortion_db={} condition_estimate={} rank_deficient={} compensator={}",
                rep.fit_nmse_db,
                rep.distortion_db,
                rep.condition_estimate,
                rep.rank_deficient,
                out.display()
            );
        }
        Cmd::DpdEval {
            common,
            compensator,
            delta,
        } => {
            let Some(cfg) = load_config(&common)? else {
                return Ok(());
            };
            let comp = Compensator::load(&compensator)?;
            let ev = run_dpd_eval(&cfg, &comp, delta)?;
            println!(
                "nmse_plain_db={} nmse_dpd_db={} improvement_db={} clip_events={}",
                ev.nmse_plain_db,
                ev.nmse_dpd_db,
                ev.improvement_db(),
                ev.clip_events
            );
        }
        Cmd::ExportModel { model, out, format } => {
            let m = FirBankModel::load(&model)?;
            let text = match format {
                Format::Canonical => m.to_text(),
                Format::Wide => wide_text(&m),
            };
            write_file(&out, &text)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
