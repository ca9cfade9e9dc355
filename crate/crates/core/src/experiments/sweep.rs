use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ensemble::{generate_with, log_uniform, EnsembleConfig, GeneratedNetwork, RX_PORT, TX_PORT};
use super::stats::{mean, median, relative_spread, spearman};
use crate::admittance::AdmittanceModel;
use crate::anomaly::{apply_anomaly, delta_chain, delta_superposition, Anomaly};
use crate::error::{Error, Result};
use crate::linalg::{cplx, frobenius, CMat};
use crate::network::{NetworkSolver, NetworkTopology, PropagationCache};
use crate::spectrum::MatrixSpectrum;

/// One faulted realization of the distance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub network: usize,
    pub branch: String,
    pub offset: f64,
    /// Shunt conductance of the fault (S).
    pub severity: f64,
    pub conductor: usize,
    /// Fault distance from the receiver along the tree (m).
    pub d: f64,
    /// Receiver to transmitter distance (m).
    pub span: f64,
    pub on_backbone: bool,
    /// Band-mean Frobenius norm of the normalized superposition delta.
    pub delta_y: f64,
    pub delta_rho: f64,
    pub delta_h: f64,
}

impl SweepRecord {
    /// Descriptor in the `fault:<branch>@<offset>:g=<S>,cond=<i>` form.
    pub fn anomaly(&self) -> String {
        format!(
            "fault:{}@{}:g={},cond={}",
            self.branch, self.offset, self.severity, self.conductor
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinAxis {
    /// Distance from the receiver in metres.
    #[default]
    Distance,
    /// Distance from the receiver over the receiver-transmitter distance.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    /// Median axis value inside the bin.
    pub center: f64,
    pub count: usize,
    pub median: [f64; 3],
    pub mean: [f64; 3],
    /// Interquartile range over median, per quantity.
    pub spread: [f64; 3],
}

/// Quantity order used by the `[f64; 3]` statistics.
pub const QUANTITIES: [&str; 3] = ["Y", "rho", "H"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    /// Realizations dropped because of a numerical failure.
    pub skipped: usize,
    pub axis: BinAxis,
    pub bins: Vec<BinStats>,
    /// Spearman correlation of binned medians against bin centers, per quantity.
    pub spearman: [f64; 3],
    /// Mean over bins of the relative spread, per quantity.
    pub mean_spread: [f64; 3],
}

impl SweepReport {
    /// H bin means at both ends exceed the middle bin's mean.
    pub fn u_shape(&self) -> bool {
        let b = &self.bins;
        if b.len() < 3 {
            return false;
        }
        let mid = b[b.len() / 2].mean[2];
        b[0].mean[2] > mid && b[b.len() - 1].mean[2] > mid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub n_bins: usize,
    pub axis: BinAxis,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_bins: 7,
            axis: BinAxis::Distance,
        }
    }
}

/// Mean over frequency of the Frobenius norm.
pub fn band_mean_norm(spec: &MatrixSpectrum<f64>) -> f64 {
    let v = spec.values();
    v.iter().map(frobenius).sum::<f64>() / v.len() as f64
}

/// Mean over frequency of `20·log10(‖X‖_F / √L)`, 0 dB for the identity.
pub fn band_mean_db(spec: &MatrixSpectrum<f64>) -> f64 {
    let v = spec.values();
    let root_l = (spec.n_conductors() as f64).sqrt();
    v.iter().map(|m| 20.0 * (frobenius(m) / root_l).log10()).sum::<f64>() / v.len() as f64
}

/// Fault shunt on a single conductor.
pub fn single_conductor_fault(n: usize, conductor: usize, g: f64) -> AdmittanceModel<f64> {
    let mut m = CMat::zeros(n, n);
    m[(conductor, conductor)] = cplx(g, 0.0);
    AdmittanceModel::Matrix(m)
}

/// Distance along the tree from `node` to a point `offset` metres into `branch`.
pub fn point_distance(net: &NetworkTopology<f64>, node: &str, branch: &str, offset: f64) -> Result<f64> {
    let b = net.branch(branch)?;
    let via_a = net.path_length(node, &b.node_a)? + offset;
    let via_b = net.path_length(node, &b.node_b)? + b.length - offset;
    Ok(via_a.min(via_b))
}

/// Branch ids on the transmitter-receiver path.
pub fn backbone(gen: &GeneratedNetwork) -> Result<Vec<String>> {
    let net = &gen.topology;
    Ok(net
        .path(&gen.transmitter, &gen.receiver)?
        .into_iter()
        .map(|i| net.branches[i].id.clone())
        .collect())
}

/// Picks a branch among `ids` with probability proportional to length, then a
/// uniform offset strictly inside it.
fn draw_position(net: &NetworkTopology<f64>, ids: &[String], rng: &mut ChaCha8Rng) -> Result<(String, f64)> {
    let lens: Vec<f64> = ids.iter().map(|id| net.branch(id).map(|b| b.length)).collect::<Result<_>>()?;
    let total: f64 = lens.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    let mut pick = ids.len() - 1;
    for (i, l) in lens.iter().enumerate() {
        if x < *l {
            pick = i;
            break;
        }
        x -= l;
    }
    let len = lens[pick];
    let offset = rng.gen_range(0.0..1.0) * len;
    Ok((ids[pick].clone(), offset.clamp(1e-6 * len, len * (1.0 - 1e-6))))
}

struct Responses {
    y: MatrixSpectrum<f64>,
    rho: MatrixSpectrum<f64>,
    h: MatrixSpectrum<f64>,
}

fn responses(net: &NetworkTopology<f64>, receiver: &str, cache: &mut PropagationCache<f64>) -> Result<Responses> {
    let s = NetworkSolver::with_cache(net, cache)?;
    let y = s.input_admittance(RX_PORT)?;
    let rho = s.reflection_from(RX_PORT, &y)?;
    let h = s.end_to_end_ctf(TX_PORT, receiver)?;
    Ok(Responses { y, rho, h })
}

fn realization(cfg: &EnsembleConfig, index: usize, mut cache: PropagationCache<f64>) -> Result<SweepRecord> {
    let mut rng = cfg.rng(index);
    let gen = generate_with(cfg, &mut rng)?;
    let net = &gen.topology;
    let ids: Vec<String> = net.branches.iter().map(|b| b.id.clone()).collect();
    let (branch, offset) = draw_position(net, &ids, &mut rng)?;
    let severity = log_uniform(&mut rng, cfg.fault_severity);
    let conductor = rng.gen_range(0..cfg.n_conductors());
    let fault = Anomaly::lumped_fault(
        branch.clone(),
        offset,
        single_conductor_fault(cfg.n_conductors(), conductor, severity),
    );
    let faulty = apply_anomaly(net, &fault)?;
    let base = responses(net, &gen.receiver, &mut cache)?;
    let pert = responses(&faulty, &gen.receiver, &mut cache)?;
    let norm = |a: &MatrixSpectrum<f64>, b: &MatrixSpectrum<f64>| -> Result<f64> {
        Ok(band_mean_norm(&delta_superposition(a, b, true)?.values))
    };
    Ok(SweepRecord {
        network: index,
        on_backbone: backbone(&gen)?.contains(&branch),
        d: point_distance(net, &gen.receiver, &branch, offset)?,
        span: net.path_length(&gen.receiver, &gen.transmitter)?,
        branch,
        offset,
        severity,
        conductor,
        delta_y: norm(&pert.y, &base.y)?,
        delta_rho: norm(&pert.rho, &base.rho)?,
        delta_h: norm(&pert.h, &base.h)?,
    })
}

fn shared_cache(cfg: &EnsembleConfig) -> Result<PropagationCache<f64>> {
    let mut cache = PropagationCache::new(cfg.grid);
    for (i, c) in cfg.cables.iter().enumerate() {
        cache.get(&super::ensemble::cable_key(i), c)?;
    }
    Ok(cache)
}

/// Runs every realization in parallel and keeps them in index order.
fn run_all<R: Send>(
    cfg: &EnsembleConfig,
    indices: impl IntoParallelIterator<Item = usize>,
    job: impl Fn(usize, PropagationCache<f64>) -> Result<R> + Sync + Send,
) -> Result<(Vec<R>, usize)> {
    cfg.validate()?;
    let cache = shared_cache(cfg)?;
    let results: Vec<Result<R>> = indices.into_par_iter().map(|i| job(i, cache.clone())).collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) if e.is_numerical() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

/// Random lumped faults on `cfg.n_networks` random networks, with distance-binned statistics.
pub fn run_distance_sweep(cfg: &EnsembleConfig, opts: &SweepOptions) -> Result<SweepReport> {
    if opts.n_bins == 0 {
        return Err(Error::Validation("sweep needs at least one bin".into()));
    }
    let (records, skipped) = run_all(cfg, 0..cfg.n_networks, |i, cache| realization(cfg, i, cache))?;
    let mut report = SweepReport {
        records,
        skipped,
        axis: opts.axis,
        bins: Vec::new(),
        spearman: [f64::NAN; 3],
        mean_spread: [f64::NAN; 3],
    };
    report.bins = bin_records(&report.records, opts);
    if report.bins.len() >= 2 {
        let centers: Vec<f64> = report.bins.iter().map(|b| b.center).collect();
        for q in 0..3 {
            let med: Vec<f64> = report.bins.iter().map(|b| b.median[q]).collect();
            report.spearman[q] = spearman(&centers, &med);
            report.mean_spread[q] = mean(&report.bins.iter().map(|b| b.spread[q]).collect::<Vec<_>>());
        }
    }
    Ok(report)
}

fn axis_value(r: &SweepRecord, axis: BinAxis) -> f64 {
    match axis {
        BinAxis::Distance => r.d,
        BinAxis::Normalized => r.d / r.span,
    }
}

/// Equal-count bins along the chosen axis.
pub fn bin_records(records: &[SweepRecord], opts: &SweepOptions) -> Vec<BinStats> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        axis_value(a, opts.axis)
            .total_cmp(&axis_value(b, opts.axis))
            .then(a.network.cmp(&b.network))
    });
    let n = sorted.len();
    let n_bins = opts.n_bins.min(n);
    (0..n_bins)
        .map(|b| {
            let chunk = &sorted[b * n / n_bins..(b + 1) * n / n_bins];
            let axis: Vec<f64> = chunk.iter().map(|r| axis_value(r, opts.axis)).collect();
            let cols: [Vec<f64>; 3] = [
                chunk.iter().map(|r| r.delta_y).collect(),
                chunk.iter().map(|r| r.delta_rho).collect(),
                chunk.iter().map(|r| r.delta_h).collect(),
            ];
            BinStats {
                lo: axis[0],
                hi: axis[axis.len() - 1],
                center: median(&axis),
                count: chunk.len(),
                median: [median(&cols[0]), median(&cols[1]), median(&cols[2])],
                mean: [mean(&cols[0]), mean(&cols[1]), mean(&cols[2])],
                spread: [
                    relative_spread(&cols[0]),
                    relative_spread(&cols[1]),
                    relative_spread(&cols[2]),
                ],
            }
        })
        .collect()
}

/// Chain-model CTF loss of one backbone and one lateral fault per network.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneLateralReport {
    /// Band-mean dB of the chain CTF delta, per network.
    pub backbone_db: Vec<f64>,
    pub lateral_db: Vec<f64>,
    /// Networks used, in order.
    pub networks: Vec<usize>,
    pub skipped: usize,
}

impl BackboneLateralReport {
    pub fn mean_backbone_db(&self) -> f64 {
        mean(&self.backbone_db)
    }

    pub fn mean_lateral_db(&self) -> f64 {
        mean(&self.lateral_db)
    }
}

fn backbone_lateral_pair(cfg: &EnsembleConfig, index: usize, mut cache: PropagationCache<f64>) -> Result<Option<(f64, f64)>> {
    let mut rng = cfg.rng(index);
    let gen = generate_with(cfg, &mut rng)?;
    let net = &gen.topology;
    let bb = backbone(&gen)?;
    let lateral: Vec<String> = net
        .branches
        .iter()
        .filter(|b| !bb.contains(&b.id))
        .map(|b| b.id.clone())
        .collect();
    if lateral.is_empty() {
        return Ok(None);
    }
    let base = NetworkSolver::with_cache(net, &mut cache)?.end_to_end_ctf(TX_PORT, &gen.receiver)?;
    let n = cfg.n_conductors();
    let mut db = |ids: &[String], rng: &mut ChaCha8Rng| -> Result<f64> {
        let (branch, offset) = draw_position(net, ids, rng)?;
        let g = log_uniform(rng, cfg.fault_severity);
        let conductor = rng.gen_range(0..n);
        let faulty = apply_anomaly(net, &Anomaly::lumped_fault(branch, offset, single_conductor_fault(n, conductor, g)))?;
        let h = NetworkSolver::with_cache(&faulty, &mut cache)?.end_to_end_ctf(TX_PORT, &gen.receiver)?;
        Ok(band_mean_db(&delta_chain(&h, &base)?.values))
    };
    let b = db(&bb, &mut rng)?;
    let l = db(&lateral, &mut rng)?;
    Ok(Some((b, l)))
}

/// Scans realizations in index order until `n_networks` of them have both a
/// backbone and a lateral branch, faulting each once on either.
pub fn run_backbone_lateral(cfg: &EnsembleConfig, n_networks: usize) -> Result<BackboneLateralReport> {
    let mut report = BackboneLateralReport {
        backbone_db: Vec::new(),
        lateral_db: Vec::new(),
        networks: Vec::new(),
        skipped: 0,
    };
    let mut next = 0;
    let limit = n_networks.saturating_mul(20).max(100);
    while report.networks.len() < n_networks {
        if next >= limit {
            return Err(Error::Validation(format!(
                "only {} of {} networks with lateral branches after {limit} draws",
                report.networks.len(),
                n_networks
            )));
        }
        let batch = next..next + (n_networks - report.networks.len()).max(8);
        next = batch.end;
        let (results, skipped) = run_all(cfg, batch, |i, cache| Ok((i, backbone_lateral_pair(cfg, i, cache)?)))?;
        report.skipped += skipped;
        for (i, r) in results {
            if let Some((b, l)) = r {
                if report.networks.len() < n_networks {
                    report.networks.push(i);
                    report.backbone_db.push(b);
                    report.lateral_db.push(l);
                }
            }
        }
    }
    Ok(report)
}
