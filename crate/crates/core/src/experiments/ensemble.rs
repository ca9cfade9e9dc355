use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admittance::AdmittanceModel;
use crate::cable::{CableModel, CableSpec, SkinEffect};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::network::NetworkTopology;

/// How leaf terminations are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadModel {
    /// Per-conductor parallel RC with uniformly drawn R (Ω) and C (F).
    RandomRc { r: (f64, f64), c: (f64, f64) },
    /// The same admittance on every leaf.
    Fixed(AdmittanceModel<f64>),
}

/// Monte Carlo ensemble settings; the seed fully determines every network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_networks: usize,
    /// Inclusive node count range.
    pub n_nodes: (usize, usize),
    /// Branch length range in metres.
    pub branch_length: (f64, f64),
    pub load_model: LoadModel,
    /// Cables drawn per branch, uniformly. All must share a conductor count.
    pub cables: Vec<CableSpec<f64>>,
    /// Fault shunt conductance range (S), drawn log-uniformly.
    pub fault_severity: (f64, f64),
    /// Port admittance `g·I` of the modems.
    pub port_conductance: f64,
    pub grid: FrequencyGrid<f64>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_networks: 200,
            n_nodes: (4, 12),
            branch_length: (10.0, 150.0),
            load_model: LoadModel::RandomRc {
                r: (10.0, 1000.0),
                c: (1e-9, 100e-9),
            },
            cables: vec![default_cable(2)],
            fault_severity: (1e-3, 2e-2),
            port_conductance: 1.0 / 50.0,
            grid: FrequencyGrid::new(100e3, 100e3, 800).expect("valid default grid"),
            seed: 1,
        }
    }
}

/// Skin-effect cable with the library defaults.
pub fn default_cable(n_conductors: usize) -> CableSpec<f64> {
    CableSpec::new(
        "plc-default",
        CableModel::SkinEffect(SkinEffect::plc_default(n_conductors)),
    )
    .expect("default cable is well formed")
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("ensemble config: {m}")));
        let (lo, hi) = self.n_nodes;
        if lo < 2 || hi < lo {
            return bad(format!("node range [{lo}, {hi}] must satisfy 2 <= lo <= hi"));
        }
        let (a, b) = self.branch_length;
        if !(a > 0.0 && b >= a) {
            return bad(format!("branch length range [{a}, {b}]"));
        }
        let (a, b) = self.fault_severity;
        if !(a >= 0.0 && b >= a) {
            return bad(format!("fault severity range [{a}, {b}]"));
        }
        if let LoadModel::RandomRc { r, c } = &self.load_model {
            if !(r.0 > 0.0 && r.1 >= r.0 && c.0 >= 0.0 && c.1 >= c.0) {
                return bad("load ranges".into());
            }
        }
        if self.cables.is_empty() {
            return bad("no cables".into());
        }
        let n = self.cables[0].n_conductors();
        if self.cables.iter().any(|c| c.n_conductors() != n) {
            return bad("cables mix conductor counts".into());
        }
        if !(self.port_conductance > 0.0) {
            return bad("port conductance must be positive".into());
        }
        Ok(())
    }

    pub fn n_conductors(&self) -> usize {
        self.cables[0].n_conductors()
    }

    /// Generator for realization `index`, independent of every other index.
    pub fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// A generated network with its two modem ports.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedNetwork {
    pub topology: NetworkTopology<f64>,
    /// Leaf hosting the sensing port, also the receiver of end-to-end signals.
    pub receiver: String,
    /// Leaf farthest from the receiver along the tree.
    pub transmitter: String,
}

pub const RX_PORT: &str = "rx";
pub const TX_PORT: &str = "tx";

pub fn cable_key(i: usize) -> String {
    format!("cable{i}")
}

/// Decodes a Prüfer sequence into the edge list of a labelled tree.
pub fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).expect("a leaf always exists");
        edges.push((s, leaf));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

fn draw_load(cfg: &EnsembleConfig, rng: &mut ChaCha8Rng) -> AdmittanceModel<f64> {
    let n = cfg.n_conductors();
    match &cfg.load_model {
        LoadModel::RandomRc { r, c } => AdmittanceModel::ParallelRc {
            r: (0..n).map(|_| uniform(rng, *r)).collect(),
            c: (0..n).map(|_| uniform(rng, *c)).collect(),
        },
        LoadModel::Fixed(m) => m.clone(),
    }
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    if b > a {
        rng.gen_range(a..b)
    } else {
        a
    }
}

pub(crate) fn log_uniform(rng: &mut ChaCha8Rng, (a, b): (f64, f64)) -> f64 {
    if a > 0.0 && b > a {
        (rng.gen_range(a.ln()..b.ln())).exp()
    } else {
        uniform(rng, (a, b))
    }
}

/// Random tree for realization `index`: node count, Prüfer sequence, branch
/// lengths, cables and leaf loads all come from the `(seed, index)` stream.
pub fn generate_random_network(cfg: &EnsembleConfig, index: usize) -> Result<GeneratedNetwork> {
    cfg.validate()?;
    let mut rng = cfg.rng(index);
    generate_with(cfg, &mut rng)
}

pub(crate) fn generate_with(cfg: &EnsembleConfig, rng: &mut ChaCha8Rng) -> Result<GeneratedNetwork> {
    let n = rng.gen_range(cfg.n_nodes.0..=cfg.n_nodes.1);
    let edges = if n == 2 {
        vec![(0, 1)]
    } else {
        let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
        prufer_edges(&seq, n)
    };
    let mut net = NetworkTopology::new();
    for i in 0..n {
        net.add_node(format!("n{i}"));
    }
    for (i, c) in cfg.cables.iter().enumerate() {
        net.add_cable(cable_key(i), c.clone());
    }
    for (i, (a, b)) in edges.iter().enumerate() {
        let len = uniform(rng, cfg.branch_length);
        let cable = rng.gen_range(0..cfg.cables.len());
        net.add_branch(format!("b{i}"), format!("n{a}"), format!("n{b}"), cable_key(cable), len);
    }
    let leaves: Vec<String> = net
        .nodes
        .iter()
        .filter(|id| net.degree(id) == 1)
        .cloned()
        .collect();
    for leaf in &leaves {
        let load = draw_load(cfg, rng);
        net.set_load(leaf.clone(), load);
    }
    let receiver = leaves.choose(rng).expect("trees have leaves").clone();
    let mut transmitter = None;
    let mut best = -1.0;
    for leaf in leaves.iter().filter(|l| **l != receiver) {
        let d = net.path_length(&receiver, leaf)?;
        if d > best {
            best = d;
            transmitter = Some(leaf.clone());
        }
    }
    let transmitter = transmitter.expect("trees have at least two leaves");
    let y_r = AdmittanceModel::conductance(cfg.n_conductors(), cfg.port_conductance);
    net.add_port(RX_PORT, receiver.clone(), y_r.clone());
    net.add_port(TX_PORT, transmitter.clone(), y_r);
    Ok(GeneratedNetwork {
        topology: net,
        receiver,
        transmitter,
    })
}
