//! Plain-text signal files. Numbers use the shortest round-trip decimal form,
//! so a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

const SIGNAL_TAG: &str = "# signal v1";

pub fn signal_to_text(x: &ComplexSignal) -> String {
    let mut s = String::with_capacity(x.len() * 40);
    writeln!(s, "{SIGNAL_TAG}\nrate={}\nre,im", x.rate()).unwrap();
    for v in x.samples() {
        writeln!(s, "{},{}", v.re, v.im).unwrap();
    }
    s
}

pub fn signal_from_text(text: &str) -> Result<ComplexSignal> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut rate = None;
    let mut samples = Vec::new();
    let mut in_body = false;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        let line = i + 1;
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if !in_body {
            if l == "re,im" {
                in_body = true;
            } else if let Some(v) = l.strip_prefix("rate=") {
                rate = Some(
                    v.parse::<f64>()
                        .map_err(|_| perr(line, format!("bad rate {v:?}")))?,
                );
            } else {
                return Err(perr(line, format!("unexpected header line {l:?}")));
            }
            continue;
        }
        let (a, b) = l
            .split_once(',')
            .ok_or_else(|| perr(line, "expected re,im".into()))?;
        let re = a
            .trim()
            .parse::<f64>()
            .map_err(|_| perr(line, format!("bad number {a:?}")))?;
        let im = b
            .trim()
            .parse::<f64>()
            .map_err(|_| perr(line, format!("bad number {b:?}")))?;
        samples.push(Complex64::new(re, im));
    }
    let rate = rate.ok_or_else(|| perr(0, "missing rate header".into()))?;
    ComplexSignal::new(samples, rate)
}

pub fn save_signal(path: &Path, x: &ComplexSignal) -> Result<()> {
    std::fs::write(path, signal_to_text(x))?;
    Ok(())
}

pub fn load_signal(path: &Path) -> Result<ComplexSignal> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    signal_from_text(&text)
}
