//! Compact anomaly descriptors.
//!
//! ```text
//! fault:<branch>@<offset>:g=<S>[,cond=<i>]     shunt on every conductor, or on one
//! fault:<branch>@<offset>:r=<ohm>[,cond=<i>]
//! load:<node>:g=<S> | load:<node>:r=<ohm> | load:<node>:open
//! dist:<branch>@<start>+<extent>:[r=<k>][,l=<k>][,g=<k>][,c=<k>]
//! ```
//!
//! Distributed faults multiply the branch cable parameters by the given factors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use plnet_core::network::NetworkTopology;
use plnet_core::{AdmittanceModel, Anomaly, Error, RlgcScale};

#[derive(Debug, Clone, PartialEq)]
pub enum Shunt {
    Conductance(f64),
    Resistance(f64),
    Open,
}

impl Shunt {
    fn conductance(&self) -> f64 {
        match self {
            Shunt::Conductance(g) => *g,
            Shunt::Resistance(r) => 1.0 / r,
            Shunt::Open => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Fault {
        branch: String,
        offset: f64,
        shunt: Shunt,
        conductor: Option<usize>,
    },
    Load {
        node: String,
        shunt: Shunt,
    },
    Distributed {
        branch: String,
        start: f64,
        extent: f64,
        scale: RlgcScale<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorError(pub String);

impl fmt::Display for DescriptorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for DescriptorError {}

fn number(s: &str, what: &str, whole: &str) -> Result<f64, DescriptorError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| DescriptorError(format!("anomaly '{whole}': {what} '{s}' is not a number")))
}

fn params(s: &str, whole: &str) -> Result<BTreeMap<String, String>, DescriptorError> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = match part.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (part.trim(), ""),
        };
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(DescriptorError(format!("anomaly '{whole}': parameter '{k}' given twice")));
        }
    }
    Ok(out)
}

fn shunt(p: &mut BTreeMap<String, String>, whole: &str) -> Result<Shunt, DescriptorError> {
    let g = p.remove("g");
    let r = p.remove("r");
    let open = p.remove("open");
    match (g, r, open) {
        (Some(g), None, None) => {
            let g = number(&g, "conductance", whole)?;
            if g < 0.0 {
                return Err(DescriptorError(format!("anomaly '{whole}': conductance must be >= 0")));
            }
            Ok(Shunt::Conductance(g))
        }
        (None, Some(r), None) => {
            let r = number(&r, "resistance", whole)?;
            if !(r > 0.0) {
                return Err(DescriptorError(format!("anomaly '{whole}': resistance must be > 0")));
            }
            Ok(Shunt::Resistance(r))
        }
        (None, None, Some(_)) => Ok(Shunt::Open),
        _ => Err(DescriptorError(format!(
            "anomaly '{whole}': give exactly one of g=<S>, r=<ohm> or open"
        ))),
    }
}

fn no_leftovers(p: &BTreeMap<String, String>, whole: &str) -> Result<(), DescriptorError> {
    match p.keys().next() {
        Some(k) => Err(DescriptorError(format!("anomaly '{whole}': unknown parameter '{k}'"))),
        None => Ok(()),
    }
}

impl FromStr for Descriptor {
    type Err = DescriptorError;

    fn from_str(whole: &str) -> Result<Self, Self::Err> {
        let mut it = whole.splitn(3, ':');
        let kind = it.next().unwrap_or("");
        let target = it
            .next()
            .ok_or_else(|| DescriptorError(format!("anomaly '{whole}': expected <kind>:<target>:<params>")))?;
        let mut p = params(it.next().unwrap_or(""), whole)?;
        match kind {
            "fault" => {
                let (branch, offset) = target
                    .split_once('@')
                    .ok_or_else(|| DescriptorError(format!("anomaly '{whole}': expected <branch>@<offset>")))?;
                let offset = number(offset, "offset", whole)?;
                let sh = shunt(&mut p, whole)?;
                let conductor = match p.remove("cond") {
                    Some(c) => Some(c.parse::<usize>().map_err(|_| {
                        DescriptorError(format!("anomaly '{whole}': conductor index '{c}' is not an integer"))
                    })?),
                    None => None,
                };
                no_leftovers(&p, whole)?;
                Ok(Descriptor::Fault {
                    branch: branch.to_string(),
                    offset,
                    shunt: sh,
                    conductor,
                })
            }
            "load" => {
                let sh = shunt(&mut p, whole)?;
                no_leftovers(&p, whole)?;
                Ok(Descriptor::Load {
                    node: target.to_string(),
                    shunt: sh,
                })
            }
            "dist" => {
                let (branch, span) = target
                    .split_once('@')
                    .ok_or_else(|| DescriptorError(format!("anomaly '{whole}': expected <branch>@<start>+<extent>")))?;
                let (start, extent) = span
                    .split_once('+')
                    .ok_or_else(|| DescriptorError(format!("anomaly '{whole}': expected <start>+<extent>")))?;
                let mut scale = RlgcScale::default();
                for (key, slot) in [("r", &mut scale.r), ("l", &mut scale.l), ("g", &mut scale.g), ("c", &mut scale.c)] {
                    if let Some(v) = p.remove(key) {
                        *slot = number(&v, key, whole)?;
                    }
                }
                no_leftovers(&p, whole)?;
                Ok(Descriptor::Distributed {
                    branch: branch.to_string(),
                    start: number(start, "start", whole)?,
                    extent: number(extent, "extent", whole)?,
                    scale,
                })
            }
            other => Err(DescriptorError(format!(
                "anomaly '{whole}': unknown kind '{other}' (fault, load or dist)"
            ))),
        }
    }
}

impl Descriptor {
    /// Resolves conductor counts and cables against `net`.
    pub fn to_anomaly(&self, net: &NetworkTopology<f64>) -> Result<Anomaly<f64>, Error> {
        let n = net
            .n_conductors()
            .ok_or_else(|| Error::Validation("network has no cables".into()))?;
        Ok(match self {
            Descriptor::Fault {
                branch,
                offset,
                shunt,
                conductor,
            } => {
                let g = shunt.conductance();
                let y = match conductor {
                    None => AdmittanceModel::conductance(n, g),
                    Some(c) if *c < n => {
                        let mut m = DMatrix::zeros(n, n);
                        m[(*c, *c)] = Complex64::new(g, 0.0);
                        AdmittanceModel::Matrix(m)
                    }
                    Some(c) => {
                        return Err(Error::Range(format!("conductor {c} does not exist, network has {n}")));
                    }
                };
                Anomaly::lumped_fault(branch.clone(), *offset, y)
            }
            Descriptor::Load { node, shunt } => {
                let y = match shunt {
                    Shunt::Open => AdmittanceModel::Open(n),
                    s => AdmittanceModel::conductance(n, s.conductance()),
                };
                Anomaly::load_change(node.clone(), y)
            }
            Descriptor::Distributed {
                branch,
                start,
                extent,
                scale,
            } => {
                let b = net.branch(branch)?;
                let cable = net.cable_of(b)?;
                let label = format!("{}.degraded", b.cable);
                Anomaly::distributed_fault(branch.clone(), *start, *extent, cable.degraded(label, *scale))
            }
        })
    }
}

/// Applies descriptors in order.
pub fn apply_all(net: &NetworkTopology<f64>, descriptors: &[Descriptor]) -> Result<NetworkTopology<f64>, Error> {
    let mut out = net.clone();
    for d in descriptors {
        out = plnet_core::apply_anomaly(&out, &d.to_anomaly(&out)?)?;
    }
    Ok(out)
}
