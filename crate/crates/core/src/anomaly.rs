//! Electrical anomalies and the two models of their effect on a response:
//! multiplicative (chain) and additive (superposition).

use crate::admittance::AdmittanceModel;
use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::linalg::{identity, solve_right};
use crate::network::NetworkTopology;
use crate::scalar::Real;
use crate::spectrum::{MatrixSpectrum, SpectrumKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Anomaly<T: Real> {
    /// Shunt admittance to reference at `offset` metres from the branch's `node_a`.
    LumpedFault {
        branch: String,
        offset: T,
        admittance: AdmittanceModel<T>,
        /// Skip the passivity check for deliberately active faults.
        allow_active: bool,
    },
    /// New termination at a node.
    LoadChange {
        node: String,
        load: AdmittanceModel<T>,
    },
    /// Uniformly degraded cable over `[start, start + extent]` of a branch.
    DistributedFault {
        branch: String,
        start: T,
        extent: T,
        cable: CableSpec<T>,
    },
}

impl<T: Real> Anomaly<T> {
    pub fn lumped_fault(branch: impl Into<String>, offset: T, admittance: AdmittanceModel<T>) -> Self {
        Anomaly::LumpedFault {
            branch: branch.into(),
            offset,
            admittance,
            allow_active: false,
        }
    }

    pub fn load_change(node: impl Into<String>, load: AdmittanceModel<T>) -> Self {
        Anomaly::LoadChange {
            node: node.into(),
            load,
        }
    }

    pub fn distributed_fault(branch: impl Into<String>, start: T, extent: T, cable: CableSpec<T>) -> Self {
        Anomaly::DistributedFault {
            branch: branch.into(),
            start,
            extent,
            cable,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Anomaly::LumpedFault { .. } => "lumped_fault",
            Anomaly::LoadChange { .. } => "load_change",
            Anomaly::DistributedFault { .. } => "distributed_fault",
        }
    }
}

/// Frequencies at which fault passivity is checked: a log sweep over the
/// power line band plus any tabulated points of the model itself.
fn passivity_probe<T: Real>(model: &AdmittanceModel<T>) -> Vec<T> {
    let mut f: Vec<T> = (0..=25).map(|i| T::lit(10f64.powf(3.0 + 0.2 * i as f64))).collect();
    fn collect<T: Real>(m: &AdmittanceModel<T>, out: &mut Vec<T>) {
        match m {
            AdmittanceModel::Table { freqs, .. } => out.extend(freqs.iter().copied()),
            AdmittanceModel::Parallel(parts) => parts.iter().for_each(|p| collect(p, out)),
            _ => {}
        }
    }
    collect(model, &mut f);
    f
}

fn unique_id<T: Real>(net: &NetworkTopology<T>, base: &str, taken: impl Fn(&NetworkTopology<T>, &str) -> bool) -> String {
    if !taken(net, base) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}{i}"))
        .find(|id| !taken(net, id))
        .expect("unbounded id search")
}

fn node_taken<T: Real>(net: &NetworkTopology<T>, id: &str) -> bool {
    net.has_node(id)
}

fn branch_taken<T: Real>(net: &NetworkTopology<T>, id: &str) -> bool {
    net.branches.iter().any(|b| b.id == id)
}

/// Parallel combination of whatever already terminates `node` with `extra`.
fn add_shunt<T: Real>(net: &mut NetworkTopology<T>, node: &str, extra: AdmittanceModel<T>) {
    let existing = net.loads.get(node).cloned().or_else(|| {
        (net.degree(node) <= 1)
            .then(|| net.ports.values().find(|p| p.node == node).map(|p| p.source.clone()))
            .flatten()
    });
    let load = match existing {
        Some(AdmittanceModel::Parallel(mut parts)) => {
            parts.push(extra);
            AdmittanceModel::Parallel(parts)
        }
        Some(m) => AdmittanceModel::Parallel(vec![m, extra]),
        None => extra,
    };
    net.loads.insert(node.to_string(), load);
}

/// Splits branch `idx` at the interior points `cuts` (strictly increasing,
/// within the branch), returning the new node ids and segment indices.
fn split_branch<T: Real>(
    net: &mut NetworkTopology<T>,
    idx: usize,
    cuts: &[T],
    tag: &str,
) -> (Vec<String>, Vec<usize>) {
    let b = net.branches.remove(idx);
    let mut nodes = Vec::new();
    let mut segs = Vec::new();
    let mut prev = b.node_a.clone();
    let mut pos = T::zero();
    let ends: Vec<Option<T>> = cuts.iter().map(|c| Some(*c)).chain([None]).collect();
    for (i, end) in ends.into_iter().enumerate() {
        let (next, len) = match end {
            Some(x) => {
                let id = unique_id(net, &format!("{}.{tag}{}", b.id, i + 1), node_taken);
                net.add_node(id.clone());
                nodes.push(id.clone());
                (id, x - pos)
            }
            None => (b.node_b.clone(), b.length - pos),
        };
        let seg_id = unique_id(net, &format!("{}/{}", b.id, i + 1), branch_taken);
        let at = (idx + i).min(net.branches.len());
        net.branches.insert(
            at,
            crate::network::Branch {
                id: seg_id,
                node_a: prev.clone(),
                node_b: next.clone(),
                cable: b.cable.clone(),
                length: len,
            },
        );
        segs.push(at);
        prev = next;
        if let Some(x) = end {
            pos = x;
        }
    }
    (nodes, segs)
}

/// Returns a copy of `net` with the anomaly inserted; the result is validated.
pub fn apply_anomaly<T: Real>(net: &NetworkTopology<T>, anomaly: &Anomaly<T>) -> Result<NetworkTopology<T>> {
    let mut out = net.clone();
    let n_cond = net.n_conductors().unwrap_or(0);
    let branch_index = |id: &str| {
        net.branches
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| Error::Validation(format!("anomaly references unknown branch '{id}'")))
    };
    match anomaly {
        Anomaly::LumpedFault {
            branch,
            offset,
            admittance,
            allow_active,
        } => {
            let idx = branch_index(branch)?;
            let b = &net.branches[idx];
            if !(*offset >= T::zero() && *offset <= b.length) {
                return Err(Error::Range(format!(
                    "fault offset {} m outside branch '{}' of length {} m",
                    offset.as_f64(),
                    b.id,
                    b.length.as_f64()
                )));
            }
            admittance.validate()?;
            if admittance.n_conductors() != n_cond {
                return Err(Error::Validation(format!(
                    "fault admittance has {} conductors, network has {n_cond}",
                    admittance.n_conductors()
                )));
            }
            if !allow_active && !admittance.is_passive(passivity_probe(admittance))? {
                return Err(Error::Validation(
                    "fault admittance is not passive; flag it as active to allow it".into(),
                ));
            }
            if *offset == T::zero() {
                add_shunt(&mut out, &b.node_a, admittance.clone());
            } else if *offset == b.length {
                add_shunt(&mut out, &b.node_b, admittance.clone());
            } else {
                let (nodes, _) = split_branch(&mut out, idx, &[*offset], "fault");
                out.set_load(nodes[0].clone(), admittance.clone());
            }
        }
        Anomaly::LoadChange { node, load } => {
            if !net.has_node(node) {
                return Err(Error::Validation(format!("anomaly references unknown node '{node}'")));
            }
            out.set_load(node.clone(), load.clone());
        }
        Anomaly::DistributedFault {
            branch,
            start,
            extent,
            cable,
        } => {
            let idx = branch_index(branch)?;
            let b = &net.branches[idx];
            let end = *start + *extent;
            if !(*start >= T::zero() && *extent > T::zero() && end <= b.length) {
                return Err(Error::Range(format!(
                    "degraded section [{}, {}] m outside branch '{}' of length {} m",
                    start.as_f64(),
                    end.as_f64(),
                    b.id,
                    b.length.as_f64()
                )));
            }
            if cable.n_conductors() != n_cond {
                return Err(Error::Validation(format!(
                    "degraded cable has {} conductors, network has {n_cond}",
                    cable.n_conductors()
                )));
            }
            let key = {
                let base = format!("{}.degraded", b.id);
                let mut key = base.clone();
                let mut i = 2;
                while out.cables.contains_key(&key) {
                    key = format!("{base}{i}");
                    i += 1;
                }
                key
            };
            out.add_cable(key.clone(), cable.clone());
            let mut cuts = Vec::new();
            if *start > T::zero() {
                cuts.push(*start);
            }
            if end < b.length {
                cuts.push(end);
            }
            let (_, segs) = split_branch(&mut out, idx, &cuts, "deg");
            let middle = if *start > T::zero() { segs[1] } else { segs[0] };
            out.branches[middle].cable = key;
        }
    }
    out.validate().into_result()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeltaModel {
    Chain,
    Superposition,
    SuperpositionNormalized,
}

impl DeltaModel {
    pub fn name(self) -> &'static str {
        match self {
            DeltaModel::Chain => "chain",
            DeltaModel::Superposition => "superposition",
            DeltaModel::SuperpositionNormalized => "superposition_normalized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Ctf,
    Admittance,
    Reflection,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Ctf => "ctf",
            Quantity::Admittance => "admittance",
            Quantity::Reflection => "reflection",
        }
    }

    fn of(kind: SpectrumKind) -> Result<Self> {
        match kind {
            SpectrumKind::Ctf => Ok(Quantity::Ctf),
            SpectrumKind::Admittance => Ok(Quantity::Admittance),
            SpectrumKind::Reflection => Ok(Quantity::Reflection),
            SpectrumKind::Delta => Err(Error::Usage("cannot take the delta of a delta".into())),
        }
    }
}

/// Anomaly effect on one response quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSpectrum<T: Real> {
    pub model: DeltaModel,
    pub quantity: Quantity,
    pub values: MatrixSpectrum<T>,
    /// Set when the model is known to behave poorly for this quantity.
    pub warning: Option<String>,
}

fn check_pair<T: Real>(a: &MatrixSpectrum<T>, b: &MatrixSpectrum<T>) -> Result<Quantity> {
    a.same_grid(b)?;
    if a.kind() != b.kind() {
        return Err(Error::Usage(format!(
            "comparing a {} spectrum against a {} baseline",
            a.kind().name(),
            b.kind().name()
        )));
    }
    if a.n_conductors() != b.n_conductors() {
        return Err(Error::Validation("spectra differ in conductor count".into()));
    }
    Quantity::of(a.kind())
}

fn ratio<T: Real>(perturbed: &MatrixSpectrum<T>, baseline: &MatrixSpectrum<T>, minus_identity: bool) -> Result<Vec<crate::linalg::CMat<T>>> {
    perturbed
        .iter()
        .zip(baseline.values())
        .map(|((f, xa), x)| {
            let num = if minus_identity { xa - x } else { xa.clone() };
            solve_right(&num, x).ok_or(Error::Singular {
                what: "baseline response",
                freq: Some(f.as_f64()),
                element: None,
            })
        })
        .collect()
}

/// `Δ_ch = X_a·X⁻¹` per frequency.
pub fn delta_chain<T: Real>(perturbed: &MatrixSpectrum<T>, baseline: &MatrixSpectrum<T>) -> Result<DeltaSpectrum<T>> {
    let quantity = check_pair(perturbed, baseline)?;
    let values = ratio(perturbed, baseline, false)?;
    let warning = (quantity == Quantity::Reflection).then(|| {
        "chain deltas of the input reflection are unreliable; prefer the superposition model".to_string()
    });
    Ok(DeltaSpectrum {
        model: DeltaModel::Chain,
        quantity,
        values: MatrixSpectrum::new(*baseline.grid(), values, SpectrumKind::Delta)?,
        warning,
    })
}

/// `Δ_sup = X_a − X`, or `(X_a − X)·X⁻¹` when `normalize` is set.
pub fn delta_superposition<T: Real>(
    perturbed: &MatrixSpectrum<T>,
    baseline: &MatrixSpectrum<T>,
    normalize: bool,
) -> Result<DeltaSpectrum<T>> {
    let quantity = check_pair(perturbed, baseline)?;
    let (model, values) = if normalize {
        (DeltaModel::SuperpositionNormalized, ratio(perturbed, baseline, true)?)
    } else {
        let v = perturbed
            .values()
            .iter()
            .zip(baseline.values())
            .map(|(a, b)| a - b)
            .collect();
        (DeltaModel::Superposition, v)
    };
    Ok(DeltaSpectrum {
        model,
        quantity,
        values: MatrixSpectrum::new(*baseline.grid(), values, SpectrumKind::Delta)?,
        warning: None,
    })
}

impl<T: Real> DeltaSpectrum<T> {
    /// Chain delta minus identity, for comparison with the normalized superposition delta.
    pub fn minus_identity(&self) -> Vec<crate::linalg::CMat<T>> {
        let n = self.values.n_conductors();
        self.values.values().iter().map(|m| m - identity::<T>(n)).collect()
    }
}
