use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::admittance::AdmittanceModel;
use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T: Real> {
    pub id: String,
    pub node_a: String,
    pub node_b: String,
    /// Key into [`NetworkTopology::cables`].
    pub cable: String,
    /// Length in metres.
    pub length: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port<T: Real> {
    pub node: String,
    /// Source (and receiver) admittance `Y_R`.
    pub source: AdmittanceModel<T>,
}

/// Tree of cable branches with terminations and measurement ports.
///
/// A port is the point where a modem injects or senses. When a port is the
/// active one its node load is replaced by the source; an inactive port leaf
/// without a load is terminated by its own `Y_R`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkTopology<T: Real> {
    pub nodes: Vec<String>,
    pub branches: Vec<Branch<T>>,
    pub cables: BTreeMap<String, CableSpec<T>>,
    pub loads: BTreeMap<String, AdmittanceModel<T>>,
    pub ports: BTreeMap<String, Port<T>>,
}

/// Outcome of [`validate_topology`]; valid iff no violations were found.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        writeln!(f, "invalid:")?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl<T: Real> NetworkTopology<T> {
    pub fn new() -> Self {
        NetworkTopology {
            nodes: Vec::new(),
            branches: Vec::new(),
            cables: BTreeMap::new(),
            loads: BTreeMap::new(),
            ports: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, id: impl Into<String>) -> &mut Self {
        self.nodes.push(id.into());
        self
    }

    pub fn add_cable(&mut self, key: impl Into<String>, cable: CableSpec<T>) -> &mut Self {
        self.cables.insert(key.into(), cable);
        self
    }

    pub fn add_branch(
        &mut self,
        id: impl Into<String>,
        node_a: impl Into<String>,
        node_b: impl Into<String>,
        cable: impl Into<String>,
        length: T,
    ) -> &mut Self {
        self.branches.push(Branch {
            id: id.into(),
            node_a: node_a.into(),
            node_b: node_b.into(),
            cable: cable.into(),
            length,
        });
        self
    }

    pub fn set_load(&mut self, node: impl Into<String>, load: AdmittanceModel<T>) -> &mut Self {
        self.loads.insert(node.into(), load);
        self
    }

    pub fn add_port(
        &mut self,
        name: impl Into<String>,
        node: impl Into<String>,
        source: AdmittanceModel<T>,
    ) -> &mut Self {
        self.ports.insert(
            name.into(),
            Port {
                node: node.into(),
                source,
            },
        );
        self
    }

    pub fn branch(&self, id: &str) -> Result<&Branch<T>> {
        self.branches
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::Validation(format!("unknown branch '{id}'")))
    }

    pub fn port(&self, name: &str) -> Result<&Port<T>> {
        self.ports
            .get(name)
            .ok_or_else(|| Error::Usage(format!("unknown port '{name}'")))
    }

    pub fn cable_of(&self, branch: &Branch<T>) -> Result<&CableSpec<T>> {
        self.cables.get(&branch.cable).ok_or_else(|| {
            Error::Validation(format!(
                "branch '{}' references unknown cable '{}'",
                branch.id, branch.cable
            ))
        })
    }

    /// Conductor count shared by every cable, if the network has any.
    pub fn n_conductors(&self) -> Option<usize> {
        self.cables.values().next().map(CableSpec::n_conductors)
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n == id)
    }

    /// Branch ids incident to each node.
    pub fn incidence(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut adj: BTreeMap<&str, Vec<usize>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (i, b) in self.branches.iter().enumerate() {
            for end in [&b.node_a, &b.node_b] {
                if let Some(v) = adj.get_mut(end.as_str()) {
                    v.push(i);
                }
            }
        }
        adj
    }

    pub fn degree(&self, node: &str) -> usize {
        self.branches
            .iter()
            .filter(|b| b.node_a == node || b.node_b == node)
            .count()
    }

    /// Branch indices along the unique path from `from` to `to`, in travel order.
    pub fn path(&self, from: &str, to: &str) -> Result<Vec<usize>> {
        let adj = self.incidence();
        let mut prev: BTreeMap<&str, usize> = BTreeMap::new();
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                break;
            }
            for &bi in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                let b = &self.branches[bi];
                let other = if b.node_a == n { &b.node_b } else { &b.node_a };
                if seen.insert(other.as_str()) {
                    prev.insert(other.as_str(), bi);
                    queue.push_back(other.as_str());
                }
            }
        }
        if !seen.contains(to) {
            return Err(Error::Validation(format!("no path from '{from}' to '{to}'")));
        }
        let mut out = Vec::new();
        let mut cur = to;
        while cur != from {
            let bi = prev[cur];
            out.push(bi);
            let b = &self.branches[bi];
            cur = if b.node_a == cur { &b.node_b } else { &b.node_a };
        }
        out.reverse();
        Ok(out)
    }

    /// Distance in metres along the tree between two nodes.
    pub fn path_length(&self, from: &str, to: &str) -> Result<T> {
        Ok(self
            .path(from, to)?
            .into_iter()
            .fold(T::zero(), |acc, i| acc + self.branches[i].length))
    }

    pub fn validate(&self) -> ValidationReport {
        validate_topology(self)
    }
}

/// Checks the tree property, connectivity, lengths, conductor counts and that
/// every leaf is terminated by a load or a port.
pub fn validate_topology<T: Real>(net: &NetworkTopology<T>) -> ValidationReport {
    let mut v = Vec::new();
    let mut node_set = BTreeSet::new();
    for n in &net.nodes {
        if !node_set.insert(n.as_str()) {
            v.push(format!("duplicate node '{n}'"));
        }
    }
    if net.nodes.is_empty() {
        v.push("network has no nodes".to_string());
    }
    if net.branches.is_empty() {
        v.push("network has no branches".to_string());
    }

    let mut branch_ids = BTreeSet::new();
    for b in &net.branches {
        if !branch_ids.insert(b.id.as_str()) {
            v.push(format!("duplicate branch '{}'", b.id));
        }
        for end in [&b.node_a, &b.node_b] {
            if !node_set.contains(end.as_str()) {
                v.push(format!("branch '{}' references unknown node '{end}'", b.id));
            }
        }
        if b.node_a == b.node_b {
            v.push(format!("branch '{}' is a self loop", b.id));
        }
        if !(b.length > T::zero()) || !b.length.is_finite() {
            v.push(format!(
                "branch '{}' has non-positive length {}",
                b.id,
                b.length.as_f64()
            ));
        }
        if !net.cables.contains_key(&b.cable) {
            v.push(format!("branch '{}' references unknown cable '{}'", b.id, b.cable));
        }
    }

    let counts: BTreeSet<usize> = net.cables.values().map(CableSpec::n_conductors).collect();
    if counts.len() > 1 {
        v.push(format!("cables mix conductor counts {counts:?}"));
    }
    let n_cond = net.n_conductors();

    for (node, load) in &net.loads {
        if !node_set.contains(node.as_str()) {
            v.push(format!("load on unknown node '{node}'"));
        }
        if let Err(e) = load.validate() {
            v.push(format!("load on '{node}': {e}"));
        } else if n_cond.is_some_and(|n| load.n_conductors() != n) {
            v.push(format!(
                "load on '{node}' has {} conductors, cables have {}",
                load.n_conductors(),
                n_cond.unwrap_or(0)
            ));
        }
    }
    for (name, port) in &net.ports {
        if !node_set.contains(port.node.as_str()) {
            v.push(format!("port '{name}' on unknown node '{}'", port.node));
        }
        if let Err(e) = port.source.validate() {
            v.push(format!("port '{name}': {e}"));
        } else if n_cond.is_some_and(|n| port.source.n_conductors() != n) {
            v.push(format!(
                "port '{name}' source has {} conductors, cables have {}",
                port.source.n_conductors(),
                n_cond.unwrap_or(0)
            ));
        }
    }

    // Tree structure: union-find over branches whose ends exist.
    let idx: BTreeMap<&str, usize> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..net.nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut cycle = false;
    for b in &net.branches {
        if let (Some(&a), Some(&c)) = (idx.get(b.node_a.as_str()), idx.get(b.node_b.as_str())) {
            let (ra, rc) = (find(&mut parent, a), find(&mut parent, c));
            if ra == rc {
                cycle = true;
            } else {
                parent[ra] = rc;
            }
        }
    }
    if cycle || (!net.nodes.is_empty() && net.branches.len() + 1 != node_set.len()) {
        v.push(format!(
            "not a tree: {} nodes and {} branches",
            node_set.len(),
            net.branches.len()
        ));
    }
    let roots: BTreeSet<usize> = (0..net.nodes.len()).map(|i| find(&mut parent, i)).collect();
    if roots.len() > 1 {
        v.push(format!("network is disconnected into {} parts", roots.len()));
    }

    for n in &net.nodes {
        if net.degree(n) <= 1
            && !net.loads.contains_key(n)
            && !net.ports.values().any(|p| &p.node == n)
        {
            v.push(format!("dangling leaf '{n}' has neither load nor port"));
        }
    }
    ValidationReport { violations: v }
}
