//! Real Volterra monomials in the delayed encoder components `i_d`, `q_d`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::signal::ComplexSignal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    I,
    Q,
}

/// One delayed component, e.g. `q[n-2]`. Ordered by component, then delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub comp: Component,
    pub delay: usize,
}

impl Var {
    pub fn i(delay: usize) -> Self {
        Self {
            comp: Component::I,
            delay,
        }
    }

    pub fn q(delay: usize) -> Self {
        Self {
            comp: Component::Q,
            delay,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.comp {
            Component::I => 'i',
            Component::Q => 'q',
        };
        if self.delay == 0 {
            write!(f, "{c}[n]")
        } else {
            write!(f, "{c}[n-{}]", self.delay)
        }
    }
}

/// Product of delayed components with positive exponents, kept in canonical
/// (sorted, merged) form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonomialSpec {
    factors: Vec<(Var, u32)>,
}

impl MonomialSpec {
    /// Builds a canonical monomial from `(variable, exponent)` pairs; repeated
    /// variables are merged and zero exponents dropped.
    pub fn new(factors: impl IntoIterator<Item = (Var, u32)>) -> Result<Self> {
        let mut f: Vec<(Var, u32)> = factors.into_iter().filter(|(_, e)| *e > 0).collect();
        f.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(Var, u32)> = Vec::with_capacity(f.len());
        for (v, e) in f {
            match merged.last_mut() {
                Some((last, le)) if *last == v => *le += e,
                _ => merged.push((v, e)),
            }
        }
        if merged.is_empty() {
            return Err(invalid("monomial needs degree >= 1"));
        }
        Ok(Self { factors: merged })
    }

    fn from_sorted_vars(vars: &[Var]) -> Self {
        let mut factors: Vec<(Var, u32)> = Vec::new();
        for &v in vars {
            match factors.last_mut() {
                Some((last, e)) if *last == v => *e += 1,
                _ => factors.push((v, 1)),
            }
        }
        Self { factors }
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.factors
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    /// Variables with repetition, in canonical order.
    pub fn vars(&self) -> Vec<Var> {
        self.factors
            .iter()
            .flat_map(|&(v, e)| std::iter::repeat(v).take(e as usize))
            .collect()
    }

    pub fn min_delay(&self) -> usize {
        self.factors.iter().map(|(v, _)| v.delay).min().unwrap_or(0)
    }

    pub fn max_delay(&self) -> usize {
        self.factors.iter().map(|(v, _)| v.delay).max().unwrap_or(0)
    }

    /// The same monomial with every delay reduced by `d`.
    pub fn advanced(&self, d: usize) -> Self {
        let factors = self
            .factors
            .iter()
            .map(|&(v, e)| {
                (
                    Var {
                        comp: v.comp,
                        delay: v.delay - d,
                    },
                    e,
                )
            })
            .collect();
        Self { factors }
    }

    /// Evaluates the monomial on a periodic record: `Π comp[(n - delay) mod N]^e`.
    pub fn eval(&self, xd: &ComplexSignal) -> Vec<f64> {
        let s = xd.samples();
        let n = s.len();
        let mut out = vec![1.0; n];
        for &(v, e) in &self.factors {
            let d = v.delay % n;
            for (t, o) in out.iter_mut().enumerate() {
                let z = s[(t + n - d) % n];
                let c = match v.comp {
                    Component::I => z.re,
                    Component::Q => z.im,
                };
                *o *= c.powi(e as i32);
            }
        }
        out
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad monomial {s:?}"),
        };
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let (base, exp) = match part.split_once('^') {
                Some((b, e)) => (b, e.parse::<u32>().map_err(|_| bad())?),
                None => (part, 1),
            };
            let comp = match base.get(..2) {
                Some("i[") => Component::I,
                Some("q[") => Component::Q,
                _ => return Err(bad()),
            };
            let inner = base[2..].strip_suffix(']').ok_or_else(bad)?;
            let delay = match inner {
                "n" => 0,
                _ => inner
                    .strip_prefix("n-")
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(bad)?,
            };
            factors.push((Var { comp, delay }, exp));
        }
        Self::new(factors).map_err(|_| bad())
    }
}

impl fmt::Display for MonomialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (v, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "{v}")?;
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Degree first, then lexicographic on the variable list with repetition.
pub fn canonical_cmp(a: &MonomialSpec, b: &MonomialSpec) -> Ordering {
    a.degree()
        .cmp(&b.degree())
        .then_with(|| a.vars().cmp(&b.vars()))
}

/// Every monomial of degree `1..=M` over `i[n..n-m_i+1]` and `q[n..n-m_q+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    specs: Vec<MonomialSpec>,
    pub max_degree: usize,
    pub m_i: usize,
    pub m_q: usize,
}

/// Representative index and shift of one basis element: `v_k[n] = v_rep[n - shift]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftClass {
    pub rep: usize,
    pub shift: usize,
}

impl MonomialBasis {
    pub fn enumerate(max_degree: usize, m_i: usize, m_q: usize) -> Result<Self> {
        if max_degree == 0 || m_i + m_q == 0 {
            return Err(invalid(format!(
                "basis needs M >= 1 and m_i + m_q >= 1 (got {max_degree}, {m_i}, {m_q})"
            )));
        }
        let vars: Vec<Var> = (0..m_i).map(Var::i).chain((0..m_q).map(Var::q)).collect();
        let mut specs = Vec::new();
        for deg in 1..=max_degree {
            // non-decreasing index tuples give each multiset once, already in lexicographic order
            let mut idx = vec![0usize; deg];
            loop {
                let chosen: Vec<Var> = idx.iter().map(|&k| vars[k]).collect();
                specs.push(MonomialSpec::from_sorted_vars(&chosen));
                let mut pos = deg;
                while pos > 0 && idx[pos - 1] == vars.len() - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                let next = idx[pos - 1] + 1;
                idx[pos - 1..].iter_mut().for_each(|v| *v = next);
            }
        }
        Ok(Self {
            specs,
            max_degree,
            m_i,
            m_q,
        })
    }

    /// Builds a basis from an explicit list of distinct specs within the stated
    /// degree and depths. The given order is kept.
    pub fn from_specs(
        specs: Vec<MonomialSpec>,
        max_degree: usize,
        m_i: usize,
        m_q: usize,
    ) -> Result<Self> {
        for s in &specs {
            let ok_depth = s.factors.iter().all(|(v, _)| match v.comp {
                Component::I => v.delay < m_i,
                Component::Q => v.delay < m_q,
            });
            if s.degree() as usize > max_degree || !ok_depth {
                return Err(invalid(format!(
                    "monomial {s} outside M = {max_degree}, m_i = {m_i}, m_q = {m_q}"
                )));
            }
        }
        let distinct: std::collections::HashSet<&MonomialSpec> = specs.iter().collect();
        if distinct.len() != specs.len() || specs.is_empty() {
            return Err(invalid("basis specs must be non-empty and distinct"));
        }
        Ok(Self {
            specs,
            max_degree,
            m_i,
            m_q,
        })
    }

    pub fn specs(&self) -> &[MonomialSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Column-per-monomial evaluation on a periodic record.
    pub fn eval(&self, xd: &ComplexSignal) -> Vec<Vec<f64>> {
        self.specs.iter().map(|s| s.eval(xd)).collect()
    }

    /// Groups monomials that are pure time shifts of each other. Representatives
    /// are the members with minimum delay 0, listed in basis order.
    pub fn shift_classes(&self) -> (Vec<MonomialSpec>, Vec<ShiftClass>) {
        let mut reps: Vec<MonomialSpec> = Vec::new();
        let mut classes = Vec::with_capacity(self.specs.len());
        for s in &self.specs {
            let shift = s.min_delay();
            let r = s.advanced(shift);
            let rep = match reps.iter().position(|x| *x == r) {
                Some(p) => p,
                None => {
                    reps.push(r);
                    reps.len() - 1
                }
            };
            classes.push(ShiftClass { rep, shift });
        }
        (reps, classes)
    }
}

/// Number of monomials of degree `1..=M` over `v` variables.
pub fn basis_count(max_degree: usize, vars: usize) -> usize {
    (1..=max_degree).map(|d| binomial(vars + d - 1, d)).sum()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}
