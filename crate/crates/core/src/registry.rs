//! Built-in drivers and terminal conditions, selected by name.
//!
//! Names take the form `name` or `name:key=value,key=value`, e.g.
//! `quadratic:gamma=1.0`, `linear:alpha=0.5`, `tanh:scale=2`. Every driver
//! also accepts `M=<value>` to override its constant.
//!
//! | driver      | `f^i(t, y, z)`                               | default `M`          |
//! |-------------|----------------------------------------------|----------------------|
//! | `zero`      | `0`                                          | 1                    |
//! | `quadratic` | `gamma/2 |z^i|^2`                            | `gamma/2`            |
//! | `linear`    | `alpha y^i`                                  | `|alpha|`            |
//! | `zlinear`   | `c sum_j z^i_j`                              | `|c| sqrt(d)`        |
//! | `mixed`     | `alpha y^i + gamma/2 |z^i|^2 + a sin(2 pi t/T)`| `max(|alpha|, gamma/2, |a|)` |
//! | `cubic`     | `sum_j (z^i_j)^3`                            | 1 (violates growth)  |

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::driver::{DriverSpec, GrowthEnvelope};
use crate::error::{Error, Result};
use crate::pde::TerminalCondition;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedName {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

pub fn parse_name(spec: &str) -> Result<ParsedName> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r.trim()),
        None => (spec.trim(), ""),
    };
    if name.is_empty() {
        return Err(Error::InvalidParameter(format!("empty name in `{spec}`")));
    }
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected key=value in `{part}`")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("`{}` is not a number in `{spec}`", v.trim())))?;
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("parameter `{k}` must be finite")));
        }
        params.insert(k.trim().to_string(), value);
    }
    Ok(ParsedName {
        name: name.to_string(),
        params,
    })
}

struct Params<'a> {
    parsed: &'a ParsedName,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.parsed.params.get(key).copied().unwrap_or(default)
    }

    fn check(&self) -> Result<()> {
        for key in self.parsed.params.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter `{key}` for `{}` (allowed: {:?})",
                    self.parsed.name, self.allowed
                )));
            }
        }
        Ok(())
    }
}

/// Driver names known to [`driver`].
pub const DRIVER_NAMES: &[&str] = &["zero", "quadratic", "linear", "zlinear", "mixed", "cubic"];

/// Terminal-condition names known to [`terminal`].
pub const TERMINAL_NAMES: &[&str] = &["identity", "square", "tanh", "sin", "clip"];

pub fn driver(spec: &str, n: usize, d: usize, horizon: f64) -> Result<DriverSpec> {
    let parsed = parse_name(spec)?;
    let label = spec.trim().to_string();
    let p = |allowed| Params {
        parsed: &parsed,
        allowed,
    };
    let made = match parsed.name.as_str() {
        "zero" => {
            let p = p(&["M"]);
            p.check()?;
            DriverSpec::new(n, d, horizon, p.get("M", 1.0), label, |_: f64, _: &[f64], _: &[f64], out: &mut [f64]| {
                out.fill(0.0)
            })?
            .with_envelope(envelope(0.0, 0.0, 0.0))?
        }
        "quadratic" => {
            let p = p(&["gamma", "M"]);
            p.check()?;
            let gamma = p.get("gamma", 1.0);
            let m = p.get("M", positive_or_one(0.5 * gamma.abs()));
            DriverSpec::new(n, d, horizon, m, label, move |_: f64, _: &[f64], z: &[f64], out: &mut [f64]| {
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &z[i * d..(i + 1) * d];
                    *o = 0.5 * gamma * row.iter().map(|v| v * v).sum::<f64>();
                }
            })?
            .with_envelope(envelope(0.0, 0.0, 0.5 * gamma.abs()))?
        }
        "linear" => {
            let p = p(&["alpha", "M"]);
            p.check()?;
            let alpha = p.get("alpha", 0.5);
            let m = p.get("M", positive_or_one(alpha.abs()));
            DriverSpec::new(n, d, horizon, m, label, move |_: f64, y: &[f64], _: &[f64], out: &mut [f64]| {
                for (o, yi) in out.iter_mut().zip(y) {
                    *o = alpha * yi;
                }
            })?
            .with_envelope(envelope(0.0, alpha.abs(), 0.0))?
        }
        "zlinear" => {
            let p = p(&["c", "M"]);
            p.check()?;
            let c = p.get("c", 1.0);
            let m_lin = c.abs() * (d as f64).sqrt();
            let m = p.get("M", positive_or_one(m_lin));
            DriverSpec::new(n, d, horizon, m, label, move |_: f64, _: &[f64], z: &[f64], out: &mut [f64]| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = c * z[i * d..(i + 1) * d].iter().sum::<f64>();
                }
            })?
            // |f| <= |c| sqrt(d) |z| <= |c| sqrt(d) (1 + |z|^2) / 2
            .with_envelope(envelope(0.5 * m_lin, 0.0, 0.5 * m_lin))?
        }
        "mixed" => {
            let p = p(&["alpha", "gamma", "a", "M"]);
            p.check()?;
            let alpha = p.get("alpha", 0.3);
            let gamma = p.get("gamma", 1.0);
            let a = p.get("a", 0.2);
            let m = p.get("M", positive_or_one(alpha.abs().max(0.5 * gamma.abs()).max(a.abs())));
            let omega = 2.0 * PI / horizon;
            DriverSpec::new(n, d, horizon, m, label, move |t: f64, y: &[f64], z: &[f64], out: &mut [f64]| {
                let forcing = a * (omega * t).sin();
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &z[i * d..(i + 1) * d];
                    *o = alpha * y[i] + 0.5 * gamma * row.iter().map(|v| v * v).sum::<f64>() + forcing;
                }
            })?
            .with_envelope(envelope(
                a.abs() * (n as f64).sqrt(),
                alpha.abs(),
                0.5 * gamma.abs(),
            ))?
        }
        "cubic" => {
            let p = p(&["M"]);
            p.check()?;
            DriverSpec::new(n, d, horizon, p.get("M", 1.0), label, move |_: f64, _: &[f64], z: &[f64], out: &mut [f64]| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = z[i * d..(i + 1) * d].iter().map(|v| v * v * v).sum::<f64>();
                }
            })?
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "driver",
                name: parsed.name,
            })
        }
    };
    Ok(made)
}

fn envelope(constant: f64, y: f64, z_sq: f64) -> GrowthEnvelope {
    GrowthEnvelope { constant, y, z_sq }
}

fn positive_or_one(m: f64) -> f64 {
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub fn terminal(spec: &str) -> Result<TerminalCondition> {
    let parsed = parse_name(spec)?;
    let label = spec.trim().to_string();
    let p = |allowed| Params {
        parsed: &parsed,
        allowed,
    };
    let tc = match parsed.name.as_str() {
        "identity" => {
            p(&[]).check()?;
            TerminalCondition::new(Arc::new(|x: f64| x), f64::INFINITY, 1.0, label)?
        }
        "square" => {
            p(&[]).check()?;
            TerminalCondition::new(Arc::new(|x: f64| x * x), f64::INFINITY, f64::INFINITY, label)?
        }
        "tanh" => {
            let p = p(&["scale"]);
            p.check()?;
            let s = p.get("scale", 1.0);
            TerminalCondition::new(Arc::new(move |x: f64| (s * x).tanh()), 1.0, s.abs(), label)?
        }
        "sin" => {
            let p = p(&["freq"]);
            p.check()?;
            let w = p.get("freq", 1.0);
            TerminalCondition::new(Arc::new(move |x: f64| (w * x).sin()), 1.0, w.abs(), label)?
        }
        "clip" => {
            let p = p(&["lo", "hi"]);
            p.check()?;
            let (lo, hi) = (p.get("lo", -1.0), p.get("hi", 1.0));
            if lo > hi {
                return Err(Error::InvalidParameter(format!("clip needs lo <= hi, got {lo} > {hi}")));
            }
            TerminalCondition::new(Arc::new(move |x: f64| x.clamp(lo, hi)), lo.abs().max(hi.abs()), 1.0, label)?
        }
        _ => {
            return Err(Error::UnknownName {
                kind: "terminal condition",
                name: parsed.name,
            })
        }
    };
    Ok(tc)
}
