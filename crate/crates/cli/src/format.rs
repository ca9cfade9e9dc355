//! JSON topology files and cable libraries.
//!
//! A topology file has the sections `nodes`, `branches`, `loads`, `ports` and
//! `cables`. Cables and admittances are tagged by `model`; complex entries are
//! written as `[re, im]`. Everything is in SI base units.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use plnet_core::cable::{CableModel, CableSpec, Rlgc, RlgcScale, SkinEffect};
use plnet_core::network::{Branch, NetworkTopology, Port};
use plnet_core::AdmittanceModel;
use serde::{Deserialize, Serialize};

type C2 = [f64; 2];

/// Malformed input, located by line and field path where known.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub source: String,
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        if !self.path.is_empty() && self.path != "." {
            write!(f, " at '{}'", self.path)?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ParseError {}

fn field_error(source: &str, path: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError {
        source: source.to_string(),
        path: path.into(),
        line: None,
        column: None,
        message: message.into(),
    }
}

fn parse_json<'de, D: Deserialize<'de>>(text: &'de str, source: &str) -> Result<D, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError {
            source: source.to_string(),
            path,
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: strip_position(&inner.to_string()),
        }
    })?;
    Ok(value)
}

// serde_json appends " at line L column C", which the error already carries.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealMat {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlgcDef {
    pub r: RealMat,
    pub l: RealMat,
    pub g: RealMat,
    pub c: RealMat,
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum CableDef {
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        r: RealMat,
        l: RealMat,
        g: RealMat,
        c: RealMat,
    },
    SkinEffect {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        n_conductors: usize,
        r0: f64,
        f_ref: f64,
        l_self: f64,
        c_self: f64,
        coupling: f64,
        loss_tangent: f64,
    },
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        freqs: Vec<f64>,
        samples: Vec<RlgcDef>,
    },
    /// Base model with every parameter matrix multiplied by a factor.
    Scaled {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        base: Box<CableDef>,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        r: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        l: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        g: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        c: f64,
    },
    /// Entry of the cable library.
    Library {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        name: String,
    },
}

impl CableDef {
    fn label(&self) -> Option<&str> {
        match self {
            CableDef::Constant { label, .. }
            | CableDef::SkinEffect { label, .. }
            | CableDef::Table { label, .. }
            | CableDef::Scaled { label, .. }
            | CableDef::Library { label, .. } => label.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CableRef {
    Key(String),
    Inline(Box<CableDef>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdmittanceDef {
    Open {
        n_conductors: usize,
    },
    /// `g·I`.
    Conductance {
        n_conductors: usize,
        g: f64,
    },
    /// `I/r`.
    Resistance {
        n_conductors: usize,
        r: f64,
    },
    Matrix {
        y: Vec<Vec<C2>>,
    },
    ParallelRc {
        r: Vec<f64>,
        c: Vec<f64>,
    },
    SeriesRlc {
        r: Vec<f64>,
        l: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    /// Characteristic admittance of a cable, by key into `cables` or inline.
    Matched {
        cable: CableRef,
    },
    Table {
        freqs: Vec<f64>,
        values: Vec<Vec<Vec<C2>>>,
    },
    Parallel {
        parts: Vec<AdmittanceDef>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDef {
    pub id: String,
    pub a: String,
    pub b: String,
    pub cable: String,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDef {
    pub node: String,
    pub source: AdmittanceDef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub nodes: Vec<String>,
    pub branches: Vec<BranchDef>,
    #[serde(default)]
    pub loads: BTreeMap<String, AdmittanceDef>,
    #[serde(default)]
    pub ports: BTreeMap<String, PortDef>,
    #[serde(default)]
    pub cables: BTreeMap<String, CableDef>,
}

/// Named cable definitions that topology files can reference with `"model": "library"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CableLibrary {
    pub source: String,
    pub cables: BTreeMap<String, CableDef>,
}

/// Library shipped with the tool, used when no other library is configured.
pub const BUNDLED_LIBRARY: &str = include_str!("../data/cables.json");

impl CableLibrary {
    pub fn parse(text: &str, source: &str) -> Result<Self, ParseError> {
        let cables: BTreeMap<String, CableDef> = parse_json(text, source)?;
        for (k, def) in &cables {
            if contains_library_ref(def) {
                return Err(field_error(source, k.clone(), "library entries cannot reference the library"));
            }
        }
        Ok(CableLibrary {
            source: source.to_string(),
            cables,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LIBRARY, "<bundled cable library>").expect("bundled library parses")
    }

    pub fn spec(&self, name: &str) -> Option<Result<CableSpec<f64>, ParseError>> {
        let def = self.cables.get(name)?;
        Some(cable_spec(def, name, &format!("{}:{name}", self.source), self).map_err(|mut e| {
            e.source = self.source.clone();
            e
        }))
    }
}

fn contains_library_ref(def: &CableDef) -> bool {
    match def {
        CableDef::Library { .. } => true,
        CableDef::Scaled { base, .. } => contains_library_ref(base),
        _ => false,
    }
}

fn real_matrix(m: &RealMat, path: &str, source: &str) -> Result<DMatrix<f64>, ParseError> {
    match m {
        RealMat::Scalar(x) => Ok(DMatrix::from_element(1, 1, *x)),
        RealMat::Matrix(rows) => {
            let n = rows.len();
            if n == 0 || rows.iter().any(|r| r.len() != n) {
                return Err(field_error(source, path, "matrix must be square and non-empty"));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        }
    }
}

fn complex_matrix(rows: &[Vec<C2>], path: &str, source: &str) -> Result<DMatrix<Complex64>, ParseError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(field_error(source, path, "matrix must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

fn rlgc(def: &RlgcDef, path: &str, source: &str) -> Result<Rlgc<f64>, ParseError> {
    Ok(Rlgc {
        r: real_matrix(&def.r, &format!("{path}.r"), source)?,
        l: real_matrix(&def.l, &format!("{path}.l"), source)?,
        g: real_matrix(&def.g, &format!("{path}.g"), source)?,
        c: real_matrix(&def.c, &format!("{path}.c"), source)?,
    })
}

fn cable_model(def: &CableDef, path: &str, source: &str, lib: &CableLibrary) -> Result<CableModel<f64>, ParseError> {
    Ok(match def {
        CableDef::Constant { r, l, g, c, .. } => CableModel::Constant(rlgc(
            &RlgcDef {
                r: r.clone(),
                l: l.clone(),
                g: g.clone(),
                c: c.clone(),
            },
            path,
            source,
        )?),
        CableDef::SkinEffect {
            n_conductors,
            r0,
            f_ref,
            l_self,
            c_self,
            coupling,
            loss_tangent,
            ..
        } => CableModel::SkinEffect(SkinEffect {
            n_conductors: *n_conductors,
            r0: *r0,
            f_ref: *f_ref,
            l_self: *l_self,
            c_self: *c_self,
            coupling: *coupling,
            loss_tangent: *loss_tangent,
        }),
        CableDef::Table { freqs, samples, .. } => {
            if freqs.is_empty() || freqs.len() != samples.len() {
                return Err(field_error(source, path, "table needs one sample per frequency"));
            }
            if freqs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(field_error(source, format!("{path}.freqs"), "frequencies must be strictly increasing"));
            }
            let samples = samples
                .iter()
                .enumerate()
                .map(|(i, s)| rlgc(s, &format!("{path}.samples[{i}]"), source))
                .collect::<Result<_, _>>()?;
            CableModel::Table {
                freqs: freqs.clone(),
                samples,
            }
        }
        CableDef::Scaled { base, r, l, g, c, .. } => CableModel::Scaled {
            base: Box::new(cable_model(base, &format!("{path}.base"), source, lib)?),
            scale: RlgcScale {
                r: *r,
                l: *l,
                g: *g,
                c: *c,
            },
        },
        CableDef::Library { name, .. } => match lib.cables.get(name) {
            Some(d) => cable_model(d, &format!("{}:{name}", lib.source), &lib.source, lib)?,
            None => {
                return Err(field_error(
                    source,
                    format!("{path}.name"),
                    format!("cable '{name}' is not in library {}", lib.source),
                ))
            }
        },
    })
}

fn cable_spec(def: &CableDef, key: &str, source: &str, lib: &CableLibrary) -> Result<CableSpec<f64>, ParseError> {
    let path = format!("cables.{key}");
    let model = cable_model(def, &path, source, lib)?;
    CableSpec::new(def.label().unwrap_or(key), model).map_err(|e| field_error(source, path, e.to_string()))
}

fn admittance(
    def: &AdmittanceDef,
    path: &str,
    source: &str,
    cables: &BTreeMap<String, CableSpec<f64>>,
    lib: &CableLibrary,
) -> Result<AdmittanceModel<f64>, ParseError> {
    let model = match def {
        AdmittanceDef::Open { n_conductors } => AdmittanceModel::Open(*n_conductors),
        AdmittanceDef::Conductance { n_conductors, g } => AdmittanceModel::conductance(*n_conductors, *g),
        AdmittanceDef::Resistance { n_conductors, r } => {
            if !(*r > 0.0) {
                return Err(field_error(source, format!("{path}.r"), "resistance must be positive"));
            }
            AdmittanceModel::conductance(*n_conductors, 1.0 / r)
        }
        AdmittanceDef::Matrix { y } => AdmittanceModel::Matrix(complex_matrix(y, &format!("{path}.y"), source)?),
        AdmittanceDef::ParallelRc { r, c } => AdmittanceModel::ParallelRc {
            r: r.clone(),
            c: c.clone(),
        },
        AdmittanceDef::SeriesRlc { r, l, c } => AdmittanceModel::SeriesRlc {
            r: r.clone(),
            l: l.clone(),
            c: c.clone(),
        },
        AdmittanceDef::Matched { cable } => AdmittanceModel::Matched(match cable {
            CableRef::Key(k) => cables
                .get(k)
                .cloned()
                .ok_or_else(|| field_error(source, format!("{path}.cable"), format!("unknown cable '{k}'")))?,
            CableRef::Inline(d) => {
                let p = format!("{path}.cable");
                let model = cable_model(d, &p, source, lib)?;
                CableSpec::new(d.label().unwrap_or("matched"), model)
                    .map_err(|e| field_error(source, p, e.to_string()))?
            }
        }),
        AdmittanceDef::Table { freqs, values } => AdmittanceModel::Table {
            freqs: freqs.clone(),
            values: values
                .iter()
                .enumerate()
                .map(|(i, m)| complex_matrix(m, &format!("{path}.values[{i}]"), source))
                .collect::<Result<_, _>>()?,
        },
        AdmittanceDef::Parallel { parts } => AdmittanceModel::Parallel(
            parts
                .iter()
                .enumerate()
                .map(|(i, p)| admittance(p, &format!("{path}.parts[{i}]"), source, cables, lib))
                .collect::<Result<_, _>>()?,
        ),
    };
    model
        .validate()
        .map_err(|e| field_error(source, path, e.to_string()))?;
    Ok(model)
}

impl TopologyFile {
    pub fn parse(text: &str, source: &str) -> Result<Self, ParseError> {
        parse_json(text, source)
    }

    /// Builds the network. Structural problems (unknown nodes, cycles, ...) are
    /// left for topology validation; only malformed fields fail here.
    pub fn to_topology(&self, source: &str, lib: &CableLibrary) -> Result<NetworkTopology<f64>, ParseError> {
        let mut net = NetworkTopology::new();
        net.nodes = self.nodes.clone();
        for (k, def) in &self.cables {
            net.cables.insert(k.clone(), cable_spec(def, k, source, lib)?);
        }
        net.branches = self
            .branches
            .iter()
            .map(|b| Branch {
                id: b.id.clone(),
                node_a: b.a.clone(),
                node_b: b.b.clone(),
                cable: b.cable.clone(),
                length: b.length,
            })
            .collect();
        for (node, def) in &self.loads {
            let m = admittance(def, &format!("loads.{node}"), source, &net.cables, lib)?;
            net.loads.insert(node.clone(), m);
        }
        for (name, p) in &self.ports {
            let m = admittance(&p.source, &format!("ports.{name}.source"), source, &net.cables, lib)?;
            net.ports.insert(
                name.clone(),
                Port {
                    node: p.node.clone(),
                    source: m,
                },
            );
        }
        Ok(net)
    }

    pub fn from_topology(net: &NetworkTopology<f64>) -> Self {
        TopologyFile {
            nodes: net.nodes.clone(),
            branches: net
                .branches
                .iter()
                .map(|b| BranchDef {
                    id: b.id.clone(),
                    a: b.node_a.clone(),
                    b: b.node_b.clone(),
                    cable: b.cable.clone(),
                    length: b.length,
                })
                .collect(),
            loads: net
                .loads
                .iter()
                .map(|(k, m)| (k.clone(), admittance_def(m, &net.cables)))
                .collect(),
            ports: net
                .ports
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        PortDef {
                            node: p.node.clone(),
                            source: admittance_def(&p.source, &net.cables),
                        },
                    )
                })
                .collect(),
            cables: net
                .cables
                .iter()
                .map(|(k, c)| {
                    let label = (c.label() != k).then(|| c.label().to_string());
                    (k.clone(), cable_def(c.model(), label))
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("topology serializes");
        s.push('\n');
        s
    }
}

fn real_def(m: &DMatrix<f64>) -> RealMat {
    if m.nrows() == 1 {
        RealMat::Scalar(m[(0, 0)])
    } else {
        RealMat::Matrix(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

fn rlgc_def(p: &Rlgc<f64>) -> RlgcDef {
    RlgcDef {
        r: real_def(&p.r),
        l: real_def(&p.l),
        g: real_def(&p.g),
        c: real_def(&p.c),
    }
}

fn cable_def(model: &CableModel<f64>, label: Option<String>) -> CableDef {
    match model {
        CableModel::Constant(p) => {
            let d = rlgc_def(p);
            CableDef::Constant {
                label,
                r: d.r,
                l: d.l,
                g: d.g,
                c: d.c,
            }
        }
        CableModel::SkinEffect(s) => CableDef::SkinEffect {
            label,
            n_conductors: s.n_conductors,
            r0: s.r0,
            f_ref: s.f_ref,
            l_self: s.l_self,
            c_self: s.c_self,
            coupling: s.coupling,
            loss_tangent: s.loss_tangent,
        },
        CableModel::Table { freqs, samples } => CableDef::Table {
            label,
            freqs: freqs.clone(),
            samples: samples.iter().map(rlgc_def).collect(),
        },
        CableModel::Scaled { base, scale } => CableDef::Scaled {
            label,
            base: Box::new(cable_def(base, None)),
            r: scale.r,
            l: scale.l,
            g: scale.g,
            c: scale.c,
        },
    }
}

fn complex_rows(m: &DMatrix<Complex64>) -> Vec<Vec<C2>> {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn admittance_def(m: &AdmittanceModel<f64>, cables: &BTreeMap<String, CableSpec<f64>>) -> AdmittanceDef {
    match m {
        AdmittanceModel::Open(n) => AdmittanceDef::Open { n_conductors: *n },
        AdmittanceModel::Matrix(y) => {
            let n = y.nrows();
            let g = y[(0, 0)].re;
            let scalar = (0..n).all(|i| (0..n).all(|j| y[(i, j)] == Complex64::new(if i == j { g } else { 0.0 }, 0.0)));
            if scalar {
                AdmittanceDef::Conductance { n_conductors: n, g }
            } else {
                AdmittanceDef::Matrix { y: complex_rows(y) }
            }
        }
        AdmittanceModel::ParallelRc { r, c } => AdmittanceDef::ParallelRc {
            r: r.clone(),
            c: c.clone(),
        },
        AdmittanceModel::SeriesRlc { r, l, c } => AdmittanceDef::SeriesRlc {
            r: r.clone(),
            l: l.clone(),
            c: c.clone(),
        },
        AdmittanceModel::Matched(spec) => AdmittanceDef::Matched {
            cable: match cables.iter().find(|(_, c)| *c == spec) {
                Some((k, _)) => CableRef::Key(k.clone()),
                None => CableRef::Inline(Box::new(cable_def(spec.model(), Some(spec.label().to_string())))),
            },
        },
        AdmittanceModel::Table { freqs, values } => AdmittanceDef::Table {
            freqs: freqs.clone(),
            values: values.iter().map(complex_rows).collect(),
        },
        AdmittanceModel::Parallel(parts) => AdmittanceDef::Parallel {
            parts: parts.iter().map(|p| admittance_def(p, cables)).collect(),
        },
    }
}

/// Parses a topology file into a network.
pub fn read_topology(text: &str, source: &str, lib: &CableLibrary) -> Result<NetworkTopology<f64>, ParseError> {
    TopologyFile::parse(text, source)?.to_topology(source, lib)
}

pub fn write_topology(net: &NetworkTopology<f64>) -> String {
    TopologyFile::from_topology(net).to_json()
}
