use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::topology::NetworkTopology;
use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{cplx, solve, CMat, CVec};
use crate::mtl::{
    ctf_line, echo_voltage, input_admittance_line, input_reflection, load_reflection,
    line_propagation_params, PropagationParams,
};
use crate::scalar::Real;
use crate::spectrum::{MatrixSpectrum, SpectrumKind};

type ParamSeq<T> = Arc<Vec<PropagationParams<T>>>;

/// Per-cable modal decompositions over one grid, shareable between networks
/// that use the same cables.
#[derive(Debug, Clone)]
pub struct PropagationCache<T: Real> {
    grid: FrequencyGrid<T>,
    entries: BTreeMap<String, (CableSpec<T>, ParamSeq<T>)>,
}

impl<T: Real> PropagationCache<T> {
    pub fn new(grid: FrequencyGrid<T>) -> Self {
        PropagationCache {
            grid,
            entries: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    /// Decomposition of `cable` stored under `key`, computed on first use or
    /// whenever the stored spec differs.
    pub fn get(&mut self, key: &str, cable: &CableSpec<T>) -> Result<ParamSeq<T>> {
        if let Some((spec, params)) = self.entries.get(key) {
            if spec == cable {
                return Ok(params.clone());
            }
        }
        let params = Arc::new(line_propagation_params(cable, &self.grid)?);
        self.entries
            .insert(key.to_string(), (cable.clone(), params.clone()));
        Ok(params)
    }
}

/// Port admittance and the equivalent admittance seen into every subtree.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction<T: Real> {
    pub y_in: MatrixSpectrum<T>,
    /// Node id to the admittance looking from that node away from the port,
    /// including the node's own termination.
    pub node_equivalents: BTreeMap<String, MatrixSpectrum<T>>,
}

/// Source, load and echo voltages of one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSignal<T: Real> {
    pub v_source: Vec<CVec<T>>,
    pub v_load: Vec<CVec<T>>,
    pub v_echo: Vec<CVec<T>>,
}

/// Tree rooted at one node, with nodes in breadth-first order.
struct Rooted {
    order: Vec<usize>,
    /// `(branch index, child node index)` per node.
    children: Vec<Vec<(usize, usize)>>,
}

/// Evaluates network responses on a fixed grid.
pub struct NetworkSolver<'a, T: Real> {
    net: &'a NetworkTopology<T>,
    grid: FrequencyGrid<T>,
    node_index: BTreeMap<&'a str, usize>,
    params: Vec<ParamSeq<T>>,
}

impl<'a, T: Real> NetworkSolver<'a, T> {
    pub fn new(net: &'a NetworkTopology<T>, grid: &FrequencyGrid<T>) -> Result<Self> {
        let mut cache = PropagationCache::new(*grid);
        Self::with_cache(net, &mut cache)
    }

    /// Builds a solver on the cache's grid, reusing its decompositions.
    pub fn with_cache(
        net: &'a NetworkTopology<T>,
        cache: &mut PropagationCache<T>,
    ) -> Result<Self> {
        net.validate().into_result()?;
        let params = net
            .branches
            .iter()
            .map(|b| {
                cache
                    .get(&b.cable, net.cable_of(b)?)
                    .map_err(|e| e.in_element(&b.id))
            })
            .collect::<Result<Vec<_>>>()?;
        let node_index = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        Ok(NetworkSolver {
            net,
            grid: *cache.grid(),
            node_index,
            params,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    fn index(&self, node: &str) -> Result<usize> {
        self.node_index
            .get(node)
            .copied()
            .ok_or_else(|| Error::Usage(format!("unknown node '{node}'")))
    }

    fn rooted(&self, root: usize) -> Rooted {
        let n = self.net.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (bi, b) in self.net.branches.iter().enumerate() {
            let a = self.node_index[b.node_a.as_str()];
            let c = self.node_index[b.node_b.as_str()];
            adj[a].push((bi, c));
            adj[c].push((bi, a));
        }
        let mut seen = vec![false; n];
        let mut order = vec![root];
        let mut children = vec![Vec::new(); n];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(bi, w) in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    children[u].push((bi, w));
                    order.push(w);
                }
            }
        }
        Rooted { order, children }
    }

    /// Termination at `node` when `root` is the active port node.
    fn termination(&self, node: usize, root: usize, k: usize) -> Result<CMat<T>> {
        let id = &self.net.nodes[node];
        let f = self.grid.freq(k);
        let n = self.params[0][k].n_conductors();
        let ctx = |e: Error| e.at_freq(f.as_f64()).in_element(id);
        if node != root {
            if let Some(load) = self.net.loads.get(id) {
                return load.eval(f).map_err(ctx);
            }
            if let Some(port) = self.net.ports.values().find(|p| &p.node == id) {
                return port.source.eval(f).map_err(ctx);
            }
        }
        Ok(CMat::zeros(n, n))
    }

    /// Node equivalents at frequency index `k`, carried back toward `root`.
    fn carry_back(&self, tree: &Rooted, root: usize, k: usize) -> Result<Vec<CMat<T>>> {
        let mut eq: Vec<Option<CMat<T>>> = vec![None; self.net.nodes.len()];
        for &u in tree.order.iter().rev() {
            let mut y = self.termination(u, root, k)?;
            for &(bi, w) in &tree.children[u] {
                let far = eq[w].as_ref().expect("children are reduced first");
                y += self.branch_input_admittance(bi, k, far)?;
            }
            eq[u] = Some(y);
        }
        Ok(eq.into_iter().map(|m| m.unwrap_or_default()).collect())
    }

    fn branch_input_admittance(&self, bi: usize, k: usize, far: &CMat<T>) -> Result<CMat<T>> {
        let b = &self.net.branches[bi];
        let p = &self.params[bi][k];
        let ctx = |e: Error| e.at_freq(p.freq.as_f64()).in_element(&b.id);
        let rho = load_reflection(far, &p.yc).map_err(ctx)?;
        input_admittance_line(p, b.length, &p.to_modal(&rho)).map_err(ctx)
    }

    fn per_freq<R: Send>(&self, f: impl Fn(usize) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
        // collect every result first so the reported error does not depend on scheduling
        let all: Vec<Result<R>> = (0..self.grid.n_points()).into_par_iter().map(f).collect();
        all.into_iter().collect()
    }

    pub fn reduce_to_port(&self, port: &str) -> Result<Reduction<T>> {
        let root = self.index(&self.net.port(port)?.node)?;
        let tree = self.rooted(root);
        let per_k = self.per_freq(|k| self.carry_back(&tree, root, k))?;
        let mut node_equivalents = BTreeMap::new();
        for (i, id) in self.net.nodes.iter().enumerate() {
            let values = per_k.iter().map(|eq| eq[i].clone()).collect();
            node_equivalents.insert(
                id.clone(),
                MatrixSpectrum::new(self.grid, values, SpectrumKind::Admittance)?,
            );
        }
        let y_in = node_equivalents[&self.net.nodes[root]].clone();
        Ok(Reduction {
            y_in,
            node_equivalents,
        })
    }

    /// Port input admittance only, skipping the per-node bookkeeping.
    pub fn input_admittance(&self, port: &str) -> Result<MatrixSpectrum<T>> {
        let root = self.index(&self.net.port(port)?.node)?;
        let tree = self.rooted(root);
        let values = self.per_freq(|k| Ok(self.carry_back(&tree, root, k)?.swap_remove(root)))?;
        MatrixSpectrum::new(self.grid, values, SpectrumKind::Admittance)
    }

    pub fn input_reflection(&self, port: &str) -> Result<MatrixSpectrum<T>> {
        let y_in = self.input_admittance(port)?;
        self.reflection_from(port, &y_in)
    }

    /// Input reflection at `port` from an already computed input admittance.
    pub fn reflection_from(&self, port: &str, y_in: &MatrixSpectrum<T>) -> Result<MatrixSpectrum<T>> {
        let p = self.net.port(port)?;
        if y_in.grid() != &self.grid {
            return Err(Error::Grid("input admittance is on a different grid".into()));
        }
        let values = self.per_freq(|k| {
            let f = self.grid.freq(k);
            let y_r = p.source.eval(f)?;
            input_reflection(&y_in.values()[k], &y_r).map_err(|e| e.at_freq(f.as_f64()))
        })?;
        MatrixSpectrum::new(self.grid, values, SpectrumKind::Reflection)
    }

    /// `H_tot` such that `V_load = H_tot·V_source`, where `V_source` is the
    /// wave launched by the transmitter into a matched line.
    pub fn end_to_end_ctf(&self, tx_port: &str, rx_node: &str) -> Result<MatrixSpectrum<T>> {
        let (values, _) = self.ctf_and_input(tx_port, rx_node)?;
        MatrixSpectrum::new(self.grid, values, SpectrumKind::Ctf)
    }

    fn ctf_and_input(
        &self,
        tx_port: &str,
        rx_node: &str,
    ) -> Result<(Vec<CMat<T>>, Vec<CMat<T>>)> {
        let port = self.net.port(tx_port)?;
        let root = self.index(&port.node)?;
        let rx = self.index(rx_node)?;
        if rx == root {
            return Err(Error::Usage(format!(
                "receiver '{rx_node}' coincides with transmitter port '{tx_port}'"
            )));
        }
        let terminated = self.net.loads.contains_key(rx_node)
            || self.net.ports.values().any(|p| p.node == rx_node);
        if !terminated {
            return Err(Error::Usage(format!(
                "receiver '{rx_node}' carries neither a load nor a port"
            )));
        }
        let path = self.net.path(&port.node, rx_node)?;
        let tree = self.rooted(root);
        let out = self.per_freq(|k| {
            let f = self.grid.freq(k);
            let eq = self.carry_back(&tree, root, k)?;
            let y_r = port.source.eval(f)?;
            let mut h = source_factor(&eq[root], &y_r).map_err(|e| e.at_freq(f.as_f64()))?;
            let mut node = root;
            for &bi in &path {
                let b = &self.net.branches[bi];
                let far = if self.node_index[b.node_a.as_str()] == node {
                    self.node_index[b.node_b.as_str()]
                } else {
                    self.node_index[b.node_a.as_str()]
                };
                let p = &self.params[bi][k];
                let ctx = |e: Error| e.at_freq(f.as_f64()).in_element(&b.id);
                let rho = load_reflection(&eq[far], &p.yc).map_err(ctx)?;
                h = ctf_line(p, b.length, &rho).map_err(ctx)? * h;
                node = far;
            }
            Ok((h, eq[root].clone()))
        })?;
        Ok(out.into_iter().unzip())
    }

    /// Source, load and echo voltages for a constant source vector.
    pub fn port_signals(
        &self,
        tx_port: &str,
        rx_node: &str,
        v_source: &CVec<T>,
    ) -> Result<PortSignal<T>> {
        let port = self.net.port(tx_port)?;
        let (h, y_in) = self.ctf_and_input(tx_port, rx_node)?;
        let mut sig = PortSignal {
            v_source: Vec::with_capacity(h.len()),
            v_load: Vec::with_capacity(h.len()),
            v_echo: Vec::with_capacity(h.len()),
        };
        for (k, (h, y_in)) in h.iter().zip(&y_in).enumerate() {
            let f = self.grid.freq(k);
            let y_r = port.source.eval(f)?;
            let rho = input_reflection(y_in, &y_r).map_err(|e| e.at_freq(f.as_f64()))?;
            sig.v_echo.push(echo_voltage(&rho, &y_r, v_source)?);
            sig.v_load.push(h * v_source);
            sig.v_source.push(v_source.clone());
        }
        Ok(sig)
    }
}

/// `2·(Y_in + Y_R)⁻¹·Y_R`: near-end voltage per unit incident source wave.
fn source_factor<T: Real>(y_in: &CMat<T>, y_r: &CMat<T>) -> Result<CMat<T>> {
    let two = cplx(T::lit(2.0), T::zero());
    solve(&(y_in + y_r), &(y_r * two)).ok_or_else(|| Error::singular("Y_in + Y_R"))
}

pub fn reduce_to_port<T: Real>(
    net: &NetworkTopology<T>,
    port: &str,
    grid: &FrequencyGrid<T>,
) -> Result<Reduction<T>> {
    NetworkSolver::new(net, grid)?.reduce_to_port(port)
}

pub fn network_input_reflection<T: Real>(
    net: &NetworkTopology<T>,
    port: &str,
    grid: &FrequencyGrid<T>,
) -> Result<MatrixSpectrum<T>> {
    NetworkSolver::new(net, grid)?.input_reflection(port)
}

pub fn end_to_end_ctf<T: Real>(
    net: &NetworkTopology<T>,
    tx_port: &str,
    rx_node: &str,
    grid: &FrequencyGrid<T>,
) -> Result<MatrixSpectrum<T>> {
    NetworkSolver::new(net, grid)?.end_to_end_ctf(tx_port, rx_node)
}
