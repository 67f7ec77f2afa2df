//! Experiment configuration: TOML with one table per section, read as flat
//! dotted keys. Unknown keys are rejected, all at once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dpd::DpdConfig;
use crate::encoder::{uniform_levels, EncoderConfig, EncoderKind, Interpolation};
use crate::error::{Error, Result};
use crate::ident::{FitConfig, Solver};
use crate::monomial::MonomialBasis;
use crate::passband::{CtKernelSpec, KernelShape, Transmitter, MAX_MEMORY_T};
use crate::signal::RateConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub max_degree: usize,
    pub m_i: usize,
    pub m_q: usize,
    pub l_f: usize,
    pub ridge: f64,
    pub solver: Solver,
    pub lead: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSection {
    pub n_train: usize,
    pub n_val: usize,
    pub seed_train: u64,
    pub seed_val: u64,
    pub peak: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub sweep_csv: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum L0Choice {
    BrickWall,
    /// Filters from a forward model with this many taps.
    Model {
        l_f: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpdSection {
    pub n_bb: usize,
    pub max_degree: usize,
    pub m_i: usize,
    pub m_q: usize,
    pub l0: L0Choice,
    pub ridge: f64,
    pub max_delay: usize,
    pub seed_fit: u64,
    pub seed_eval: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub example_id: String,
    /// `n_bb` is ignored; record lengths come from the data section.
    pub rates: RateConfig,
    pub encoder: EncoderConfig,
    /// Kernel shape; its `delta` is replaced by each sweep value.
    pub kernel: CtKernelSpec,
    pub deltas: Vec<f64>,
    pub model: ModelSection,
    pub data: DataSection,
    pub output: OutputSection,
    pub dpd: DpdSection,
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example_id: "ex1".into(),
            rates: RateConfig {
                n_bb: 40960,
                k: 8,
                r: 10,
            },
            encoder: EncoderConfig::dsm1(uniform_levels(5), 8),
            kernel: CtKernelSpec::cubic_delay(0.0),
            deltas: log_grid(0.001, 0.2, 8),
            model: ModelSection {
                max_degree: 3,
                m_i: 4,
                m_q: 4,
                l_f: 16,
                ridge: 1e-10,
                solver: Solver::NormalCholesky,
                lead: None,
            },
            data: DataSection {
                n_train: 40960,
                n_val: 8192,
                seed_train: 1,
                seed_val: 2,
                peak: 0.9,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                sweep_csv: PathBuf::from("out/sweep.csv"),
            },
            dpd: DpdSection {
                n_bb: 2048,
                max_degree: 3,
                m_i: 2,
                m_q: 2,
                l0: L0Choice::BrickWall,
                ridge: 1e-10,
                max_delay: 16,
                seed_fit: 11,
                seed_eval: 12,
            },
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys {
    map: BTreeMap<String, toml::Value>,
}

fn type_err(key: &str, want: &str, got: &toml::Value) -> Error {
    Error::Config(format!("{key}: expected {want}, got {got}"))
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.map.remove(key)
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(toml::Value::Float(f)) => Ok(f),
            Some(toml::Value::Integer(i)) => Ok(i as f64),
            Some(v) => Err(type_err(key, "a number", &v)),
        }
    }

    fn uint(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(i as usize),
            Some(v) => Err(type_err(key, "a non-negative integer", &v)),
        }
    }

    fn opt_uint(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(toml::Value::String(s)) if s == "auto" => Ok(None),
            Some(v) => Err(type_err(key, "a non-negative integer or \"auto\"", &v)),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String> {
        match self.take(key) {
            None => Ok(default.to_string()),
            Some(toml::Value::String(s)) => Ok(s),
            Some(v) => Err(type_err(key, "a string", &v)),
        }
    }

    fn floats(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(type_err(key, "an array of numbers", other)),
                })
                .collect(),
            Some(v) => Err(type_err(key, "an array of numbers", &v)),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        let mut keys = Keys { map };
        let d = Self::default();

        let example_id = keys.string("example_id", &d.example_id)?;
        let k = keys.uint("rates.k", d.rates.k)?;
        let r = keys.uint("rates.r", d.rates.r)?;

        let kind = EncoderKind::parse(&keys.string("encoder.kind", d.encoder.kind.as_str())?)?;
        let levels = keys.floats("encoder.levels", &d.encoder.levels)?;
        let interpolation = Interpolation::parse(
            &keys.string("encoder.interpolation", d.encoder.interpolation.as_str())?,
        )?;
        let oversample = keys.uint("encoder.oversample", k)?;
        let encoder = EncoderConfig {
            kind,
            levels,
            oversample,
            interpolation,
        };

        let kernel_kind = keys.string("kernel.kind", "cubic_delay")?;
        let default_deltas = match kernel_kind.as_str() {
            "separable_quad" => log_grid(0.001, 0.015, 8),
            _ => d.deltas.clone(),
        };
        let deltas = keys.floats("kernel.deltas", &default_deltas)?;
        let kernel = match kernel_kind.as_str() {
            "cubic_delay" => {
                let t = keys.floats("kernel.taus", &[1.2, 2.3, 0.4])?;
                let taus: [f64; 3] = t
                    .try_into()
                    .map_err(|_| Error::Config("kernel.taus needs exactly three delays".into()))?;
                CtKernelSpec::CubicDelay { delta: 0.0, taus }
            }
            "separable_quad" => CtKernelSpec::SeparableQuad {
                delta: 0.0,
                h1: KernelShape::parse(&keys.string("kernel.h1", "exp:0.95")?)?,
                h2: KernelShape::parse(&keys.string("kernel.h2", "expcos:0.91:0.2")?)?,
                memory: keys.float("kernel.memory", MAX_MEMORY_T)?,
            },
            "general" => CtKernelSpec::General {
                delta: 0.0,
                degree: keys.uint("kernel.degree", 2)?,
                taps: keys.uint("kernel.taps", 1)?,
                resolution: r,
                values: keys.floats("kernel.values", &[])?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown kernel.kind {other:?} (cubic_delay | separable_quad | general)"
                )))
            }
        };

        let m = &d.model;
        let model = ModelSection {
            max_degree: keys.uint("model.M", m.max_degree)?,
            m_i: keys.uint("model.m_i", m.m_i)?,
            m_q: keys.uint("model.m_q", m.m_q)?,
            l_f: keys.uint("model.L_f", m.l_f)?,
            ridge: keys.float("model.lambda", m.ridge)?,
            solver: Solver::parse(&keys.string("model.solver", m.solver.as_str())?)?,
            lead: keys.opt_uint("model.lead")?,
        };
        let dd = &d.data;
        let data = DataSection {
            n_train: keys.uint("data.n_train", dd.n_train)?,
            n_val: keys.uint("data.n_val", dd.n_val)?,
            seed_train: keys.uint("data.seed_train", dd.seed_train as usize)? as u64,
            seed_val: keys.uint("data.seed_val", dd.seed_val as usize)? as u64,
            peak: keys.float("data.peak", dd.peak)?,
        };
        let dir = PathBuf::from(keys.string("output.dir", &d.output.dir.to_string_lossy())?);
        let sweep_default = dir.join("sweep.csv");
        let sweep_csv =
            PathBuf::from(keys.string("output.sweep_csv", &sweep_default.to_string_lossy())?);
        let output = OutputSection { dir, sweep_csv };

        let dp = &d.dpd;
        let l0 = match keys.string("dpd.l0", "brickwall")?.as_str() {
            "brickwall" => L0Choice::BrickWall,
            "model" => L0Choice::Model {
                l_f: keys.uint("dpd.l0_taps", 16)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown dpd.l0 {other:?} (brickwall | model)"
                )))
            }
        };
        let dpd = DpdSection {
            n_bb: keys.uint("dpd.n_bb", dp.n_bb)?,
            max_degree: keys.uint("dpd.M", dp.max_degree)?,
            m_i: keys.uint("dpd.m_i", dp.m_i)?,
            m_q: keys.uint("dpd.m_q", dp.m_q)?,
            l0,
            ridge: keys.float("dpd.lambda", dp.ridge)?,
            max_delay: keys.uint("dpd.max_delay", dp.max_delay)?,
            seed_fit: keys.uint("dpd.seed_fit", dp.seed_fit as usize)? as u64,
            seed_eval: keys.uint("dpd.seed_eval", dp.seed_eval as usize)? as u64,
        };

        if !keys.map.is_empty() {
            let names: Vec<&str> = keys.map.keys().map(String::as_str).collect();
            return Err(Error::Config(format!(
                "unknown config keys: {}",
                names.join(", ")
            )));
        }
        let cfg = Self {
            example_id,
            rates: RateConfig {
                n_bb: data.n_train,
                k,
                r,
            },
            encoder,
            kernel,
            deltas,
            model,
            data,
            output,
            dpd,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.encoder.validate()?;
        if self.encoder.oversample != self.rates.k {
            return Err(Error::Config(format!(
                "encoder.oversample = {} differs from rates.k = {}",
                self.encoder.oversample, self.rates.k
            )));
        }
        self.kernel.validate()?;
        if self.deltas.is_empty() {
            return Err(Error::Config("kernel.deltas must not be empty".into()));
        }
        if self.deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("kernel.deltas must be finite".into()));
        }
        if self.data.seed_train == self.data.seed_val {
            return Err(Error::Config(
                "data.seed_train and data.seed_val must differ".into(),
            ));
        }
        if self.dpd.seed_fit == self.dpd.seed_eval {
            return Err(Error::Config(
                "dpd.seed_fit and dpd.seed_eval must differ".into(),
            ));
        }
        if self.data.n_train < 16 || self.data.n_val < 16 || self.dpd.n_bb < 16 {
            return Err(Error::Config("record lengths must be at least 16".into()));
        }
        if !(self.data.peak > 0.0 && self.data.peak <= 1.0) {
            return Err(Error::Config("data.peak must lie in (0, 1]".into()));
        }
        self.fit_config().validate()?;
        self.basis()?;
        Ok(())
    }

    pub fn basis(&self) -> Result<MonomialBasis> {
        MonomialBasis::enumerate(self.model.max_degree, self.model.m_i, self.model.m_q)
    }

    pub fn dpd_basis(&self) -> Result<MonomialBasis> {
        MonomialBasis::enumerate(self.dpd.max_degree, self.dpd.m_i, self.dpd.m_q)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            l_f: self.model.l_f,
            ridge: self.model.ridge,
            solver: self.model.solver,
            lead: self.model.lead,
        }
    }

    pub fn dpd_config(&self) -> DpdConfig {
        DpdConfig {
            ridge: self.dpd.ridge,
            max_delay: self.dpd.max_delay,
        }
    }

    /// Transmitter for records of `n_bb` baseband samples at nonlinearity strength `delta`.
    pub fn transmitter(&self, n_bb: usize, delta: f64) -> Result<Transmitter> {
        Transmitter::new(
            self.rates.with_n_bb(n_bb),
            self.encoder.clone(),
            self.kernel.with_delta(delta),
        )
    }

    /// The effective configuration, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let path = |p: &Path| format!("{:?}", p.to_string_lossy());
        writeln!(s, "example_id = {:?}\n", self.example_id).unwrap();
        writeln!(s, "[rates]\nk = {}\nr = {}\n", self.rates.k, self.rates.r).unwrap();
        writeln!(
            s,
            "[encoder]\nkind = {:?}\nlevels = [{}]\ninterpolation = {:?}\noversample = {}\n",
            self.encoder.kind.as_str(),
            list(&self.encoder.levels),
            self.encoder.interpolation.as_str(),
            self.encoder.oversample
        )
        .unwrap();
        writeln!(s, "[kernel]").unwrap();
        match &self.kernel {
            CtKernelSpec::CubicDelay { taus, .. } => {
                writeln!(s, "kind = \"cubic_delay\"\ntaus = [{}]", list(taus)).unwrap();
            }
            CtKernelSpec::SeparableQuad { h1, h2, memory, .. } => {
                writeln!(
                    s,
                    "kind = \"separable_quad\"\nh1 = {:?}\nh2 = {:?}\nmemory = {memory:?}",
                    h1.label(),
                    h2.label()
                )
                .unwrap();
            }
            CtKernelSpec::General {
                degree,
                taps,
                values,
                ..
            } => {
                writeln!(
                    s,
                    "kind = \"general\"\ndegree = {degree}\ntaps = {taps}\nvalues = [{}]",
                    list(values)
                )
                .unwrap();
            }
        }
        writeln!(s, "deltas = [{}]\n", list(&self.deltas)).unwrap();
        let m = &self.model;
        let lead = m.lead.map_or("\"auto\"".to_string(), |l| l.to_string());
        writeln!(
            s,
            "[model]\nM = {}\nm_i = {}\nm_q = {}\nL_f = {}\nlambda = {:?}\nsolver = {:?}\nlead = {lead}\n",
            m.max_degree,
            m.m_i,
            m.m_q,
            m.l_f,
            m.ridge,
            m.solver.as_str()
        )
        .unwrap();
        let d = &self.data;
        writeln!(
            s,
            "[data]\nn_train = {}\nn_val = {}\nseed_train = {}\nseed_val = {}\npeak = {:?}\n",
            d.n_train, d.n_val, d.seed_train, d.seed_val, d.peak
        )
        .unwrap();
        writeln!(
            s,
            "[output]\ndir = {}\nsweep_csv = {}\n",
            path(&self.output.dir),
            path(&self.output.sweep_csv)
        )
        .unwrap();
        let p = &self.dpd;
        let l0 = match p.l0 {
            L0Choice::BrickWall => "l0 = \"brickwall\"".to_string(),
            L0Choice::Model { l_f } => format!("l0 = \"model\"\nl0_taps = {l_f}"),
        };
        writeln!(
            s,
            "[dpd]\nn_bb = {}\nM = {}\nm_i = {}\nm_q = {}\n{l0}\nlambda = {:?}\nmax_delay = {}\nseed_fit = {}\nseed_eval = {}",
            p.n_bb, p.max_degree, p.m_i, p.m_q, p.ridge, p.max_delay, p.seed_fit, p.seed_eval
        )
        .unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let d = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&d.to_toml()).unwrap();
        assert_eq!(back, d);
        let empty = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(empty, d);
    }

    #[test]
    fn separable_round_trip() {
        let text = "example_id = \"ex2\"\n[kernel]\nkind = \"separable_quad\"\n[dpd]\nl0 = \"model\"\nl0_taps = 8\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(matches!(c.kernel, CtKernelSpec::SeparableQuad { .. }));
        assert!((c.deltas[7] - 0.015).abs() < 1e-15);
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = ExperimentConfig::from_toml_str("[model]\nLf = 3\n[data]\nntrain = 5\n")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("model.Lf") && err.contains("data.ntrain"),
            "{err}"
        );
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "[kernel]\ndeltas = []",
            "[data]\nseed_train = 3\nseed_val = 3",
            "[rates]\nk = 4\n[encoder]\noversample = 8",
            "[kernel]\ntaus = [1.0, 2.0]",
            "[model]\nL_f = \"x\"",
            "[kernel]\nkind = \"cubic\"",
            "[model]\nsolver = \"lu\"",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(0.001, 0.2, 8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 0.001).abs() < 1e-18 && (g[7] - 0.2).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
