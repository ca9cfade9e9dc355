use std::collections::BTreeSet;
use std::fmt;

use crate::admittance::AdmittanceModel;
use crate::anomaly::{apply_anomaly, delta_chain, delta_superposition, Anomaly, DeltaSpectrum};
use crate::cable::{CableSpec, RlgcScale};
use crate::error::Result;
use crate::grid::FrequencyGrid;
use crate::network::{NetworkSolver, NetworkTopology};
use crate::spectrum::MatrixSpectrum;
use crate::time_domain::{detect_peaks_with, to_time_domain, Peak, PeakOptions, TimeTrace, Window};

/// Peak-set change between a baseline and a perturbed trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Signature {
    NewPeak,
    AmplitudeOnly,
    ShiftedPeak,
}

impl Signature {
    pub fn name(self) -> &'static str {
        match self {
            Signature::NewPeak => "new-peak",
            Signature::AmplitudeOnly => "amplitude-only",
            Signature::ShiftedPeak => "shifted-peak",
        }
    }

    /// Signature set each anomaly kind is expected to produce.
    pub fn expected_for(anomaly: &Anomaly<f64>) -> BTreeSet<Signature> {
        match anomaly {
            Anomaly::LumpedFault { .. } => [Signature::NewPeak].into(),
            Anomaly::LoadChange { .. } => [Signature::AmplitudeOnly].into(),
            Anomaly::DistributedFault { .. } => [Signature::NewPeak, Signature::ShiftedPeak].into(),
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub anomaly: Anomaly<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, anomaly: Anomaly<f64>) -> Self {
        Scenario {
            name: name.into(),
            anomaly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    pub window: Window,
    pub peaks: PeakOptions<f64>,
    /// Baseline and perturbed peaks closer than this many samples are the same peak.
    pub match_tolerance: usize,
    /// Threshold factor, relative to `peaks.rel_threshold`, for the local maxima a
    /// strong peak may be matched against in the other trace.
    pub match_factor: f64,
    /// Largest move, as a fraction of the baseline peak time, still read as a shift.
    pub max_shift: f64,
    /// Relative amplitude change below which a matched peak counts as unchanged.
    pub amplitude_tolerance: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            window: Window::Hann,
            peaks: PeakOptions::default(),
            match_tolerance: 2,
            match_factor: 0.5,
            max_shift: 0.2,
            amplitude_tolerance: 1e-3,
        }
    }
}

/// Peak-level comparison of one trace entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakDiff {
    /// Perturbed peak times with no baseline counterpart.
    pub new: Vec<f64>,
    /// `(baseline, perturbed)` times of peaks that moved.
    pub shifted: Vec<(f64, f64)>,
    /// `(time, baseline amplitude, perturbed amplitude)` of peaks that stayed.
    pub matched: Vec<(f64, f64, f64)>,
    /// Baseline peak times with no perturbed counterpart and no shift partner.
    pub vanished: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub kind: &'static str,
    pub expected: BTreeSet<Signature>,
    pub observed: BTreeSet<Signature>,
    pub diff: PeakDiff,
    /// Unresolved or borderline pairings, reported rather than guessed.
    pub ambiguities: Vec<String>,
    pub baseline: MatrixSpectrum<f64>,
    pub perturbed: MatrixSpectrum<f64>,
    pub delta_chain: DeltaSpectrum<f64>,
    pub delta_superposition: DeltaSpectrum<f64>,
    pub baseline_trace: TimeTrace<f64>,
    pub perturbed_trace: TimeTrace<f64>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.observed == self.expected && self.ambiguities.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub port: String,
    pub outcomes: Vec<ScenarioOutcome>,
}

impl ScenarioReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(ScenarioOutcome::passed)
    }
}

fn has_peak_near(peaks: &[Peak<f64>], sample: usize, tol: usize) -> Option<Peak<f64>> {
    peaks
        .iter()
        .filter(|p| p.sample.abs_diff(sample) <= tol)
        .min_by_key(|p| p.sample.abs_diff(sample))
        .copied()
}

/// Compares the peaks of one entry of two traces.
pub fn diff_peaks(
    baseline: &TimeTrace<f64>,
    perturbed: &TimeTrace<f64>,
    entry: (usize, usize),
    opts: &ScenarioOptions,
) -> (PeakDiff, Vec<String>) {
    let relaxed = PeakOptions {
        rel_threshold: opts.peaks.rel_threshold * opts.match_factor,
        ..opts.peaks
    };
    let strong_b = detect_peaks_with(baseline, &opts.peaks).entries.remove(&entry).unwrap_or_default();
    let strong_p = detect_peaks_with(perturbed, &opts.peaks).entries.remove(&entry).unwrap_or_default();
    let weak_b = detect_peaks_with(baseline, &relaxed).entries.remove(&entry).unwrap_or_default();
    let weak_p = detect_peaks_with(perturbed, &relaxed).entries.remove(&entry).unwrap_or_default();
    let tol = opts.match_tolerance;

    let mut diff = PeakDiff::default();
    let mut notes = Vec::new();
    let mut lone_b: Vec<Peak<f64>> = Vec::new();
    for b in &strong_b {
        match has_peak_near(&weak_p, b.sample, tol) {
            Some(p) => diff.matched.push((b.time, b.amplitude, p.amplitude)),
            None => lone_b.push(*b),
        }
    }
    let mut lone_p: Vec<Peak<f64>> = strong_p
        .iter()
        .filter(|p| has_peak_near(&weak_b, p.sample, tol).is_none())
        .copied()
        .collect();
    for p in &strong_p {
        if let Some(b) = has_peak_near(&weak_b, p.sample, tol) {
            if !strong_b.iter().any(|s| s.sample == b.sample) {
                diff.matched.push((b.time, b.amplitude, p.amplitude));
            }
        }
    }
    diff.matched.sort_by(|a, b| a.0.total_cmp(&b.0));

    for b in lone_b {
        let reach = b.time * opts.max_shift;
        let cands: Vec<usize> = (0..lone_p.len())
            .filter(|&i| (lone_p[i].time - b.time).abs() <= reach)
            .collect();
        if cands.len() > 1 {
            notes.push(format!(
                "baseline peak at {:.6e} s has {} shift candidates, nearest taken",
                b.time,
                cands.len()
            ));
        }
        match cands
            .into_iter()
            .min_by(|&i, &j| (lone_p[i].time - b.time).abs().total_cmp(&(lone_p[j].time - b.time).abs()))
        {
            Some(i) => {
                let p = lone_p.remove(i);
                diff.shifted.push((b.time, p.time));
            }
            None => diff.vanished.push(b.time),
        }
    }
    diff.new = lone_p.iter().map(|p| p.time).collect();
    for t in &diff.vanished {
        notes.push(format!("baseline peak at {t:.6e} s vanished without a shift partner"));
    }
    (diff, notes)
}

/// Signatures read off a peak diff.
pub fn classify(diff: &PeakDiff, amplitude_tolerance: f64) -> BTreeSet<Signature> {
    let mut out = BTreeSet::new();
    if !diff.new.is_empty() {
        out.insert(Signature::NewPeak);
    }
    if !diff.shifted.is_empty() {
        out.insert(Signature::ShiftedPeak);
    }
    let changed = diff
        .matched
        .iter()
        .any(|(_, a, b)| (a - b).abs() > amplitude_tolerance * a.abs().max(b.abs()));
    if out.is_empty() && changed {
        out.insert(Signature::AmplitudeOnly);
    }
    out
}

/// Applies each scenario to `base`, compares the input admittance traces seen
/// from `port`, and classifies the change.
pub fn run_scenario_suite(
    base: &NetworkTopology<f64>,
    port: &str,
    grid: &FrequencyGrid<f64>,
    scenarios: &[Scenario],
    opts: &ScenarioOptions,
) -> Result<ScenarioReport> {
    let baseline = NetworkSolver::new(base, grid)?.input_admittance(port)?;
    let baseline_trace = to_time_domain(&baseline, opts.window)?;
    let n = baseline.n_conductors();
    let mut outcomes = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let net = apply_anomaly(base, &sc.anomaly)?;
        let perturbed = NetworkSolver::new(&net, grid)?.input_admittance(port)?;
        let perturbed_trace = to_time_domain(&perturbed, opts.window)?;
        let mut diff = PeakDiff::default();
        let mut ambiguities = Vec::new();
        for i in 0..n {
            let (d, notes) = diff_peaks(&baseline_trace, &perturbed_trace, (i, i), opts);
            diff.new.extend(d.new);
            diff.shifted.extend(d.shifted);
            diff.matched.extend(d.matched);
            diff.vanished.extend(d.vanished);
            ambiguities.extend(notes.into_iter().map(|s| format!("entry ({i},{i}): {s}")));
        }
        outcomes.push(ScenarioOutcome {
            name: sc.name.clone(),
            kind: sc.anomaly.kind(),
            expected: Signature::expected_for(&sc.anomaly),
            observed: classify(&diff, opts.amplitude_tolerance),
            diff,
            ambiguities,
            delta_chain: delta_chain(&perturbed, &baseline)?,
            delta_superposition: delta_superposition(&perturbed, &baseline, false)?,
            baseline: baseline.clone(),
            perturbed,
            baseline_trace: baseline_trace.clone(),
            perturbed_trace,
        });
    }
    Ok(ScenarioReport {
        port: port.to_string(),
        outcomes,
    })
}

/// Sensing port name of the bundled single-line network.
pub const SINGLE_LINE_PORT: &str = "in";
pub const SINGLE_LINE_LENGTH: f64 = 200.0;

/// Lossy 200 m line with a 50 Ω port at `a` and a 200 Ω load at `b`.
pub fn single_line_network() -> NetworkTopology<f64> {
    let mut net = NetworkTopology::new();
    net.add_node("a")
        .add_node("b")
        .add_cable("line", CableSpec::scalar("line", 0.5, 0.25e-6, 1e-6, 100e-12))
        .add_branch("line", "a", "b", "line", SINGLE_LINE_LENGTH)
        .set_load("b", AdmittanceModel::conductance(1, 1.0 / 200.0))
        .add_port(SINGLE_LINE_PORT, "a", AdmittanceModel::conductance(1, 1.0 / 50.0));
    net
}

/// Load change, mid-line fault and 30 % distributed fault on [`single_line_network`].
pub fn single_line_scenarios() -> Vec<Scenario> {
    let degraded = CableSpec::scalar("line", 0.5, 0.25e-6, 1e-6, 100e-12).degraded(
        "line.degraded",
        RlgcScale {
            c: 1.5,
            ..RlgcScale::default()
        },
    );
    vec![
        Scenario::new(
            "load-change",
            Anomaly::load_change("b", AdmittanceModel::conductance(1, 1.0 / 30.0)),
        ),
        Scenario::new(
            "lumped-fault",
            Anomaly::lumped_fault("line", 0.5 * SINGLE_LINE_LENGTH, AdmittanceModel::conductance(1, 0.01)),
        ),
        Scenario::new(
            "distributed-fault",
            Anomaly::distributed_fault("line", 0.35 * SINGLE_LINE_LENGTH, 0.3 * SINGLE_LINE_LENGTH, degraded),
        ),
    ]
}

/// Default grid of the bundled scenarios.
pub fn single_line_grid() -> FrequencyGrid<f64> {
    FrequencyGrid::new(100e3, 100e3, 800).expect("valid grid")
}
