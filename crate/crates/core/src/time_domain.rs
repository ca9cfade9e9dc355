//! Frequency to time conversion of matrix spectra, peak picking and the
//! distance mapping used for reflectometric anomaly location.

use std::collections::BTreeMap;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::scalar::{Complex, Real};
use crate::spectrum::{MatrixSpectrum, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rect,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }

    /// Weight of one-sided bin `k` out of `n` (DC at `k = 0`).
    fn weight<T: Real>(self, k: usize, n: usize) -> T {
        match self {
            Window::Rect => T::one(),
            Window::Hann => {
                let x = T::pi() * T::from_count(k) / T::from_count(n - 1);
                T::lit(0.5) * (T::one() + x.cos())
            }
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rect" => Ok(Window::Rect),
            other => Err(Error::Usage(format!("unknown window '{other}', expected hann or rect"))),
        }
    }
}

/// Real L×L matrix signal sampled uniformly over one period. Samples past the
/// midpoint represent negative times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace<T: Real> {
    t_step: T,
    samples: Vec<RMat<T>>,
    kind: SpectrumKind,
}

impl<T: Real> TimeTrace<T> {
    pub fn new(t_step: T, samples: Vec<RMat<T>>, kind: SpectrumKind) -> Result<Self> {
        if samples.is_empty() || !(t_step > T::zero()) {
            return Err(Error::Validation("time trace needs samples and a positive step".into()));
        }
        Ok(TimeTrace { t_step, samples, kind })
    }

    pub fn t_step(&self) -> T {
        self.t_step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[RMat<T>] {
        &self.samples
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn n_conductors(&self) -> usize {
        self.samples[0].nrows()
    }

    pub fn time(&self, i: usize) -> T {
        T::from_count(i) * self.t_step
    }

    pub fn entry(&self, row: usize, col: usize) -> Vec<T> {
        self.samples.iter().map(|m| m[(row, col)]).collect()
    }

    /// Sum of squared samples over all entries times `t_step`.
    pub fn energy(&self) -> T {
        self.energy_in(0, self.len())
    }

    /// Energy of samples `from..to`.
    pub fn energy_in(&self, from: usize, to: usize) -> T {
        self.samples[from.min(self.len())..to.min(self.len())]
            .iter()
            .map(|m| m.iter().fold(T::zero(), |a, x| a + *x * *x))
            .fold(T::zero(), |a, x| a + x)
            * self.t_step
    }
}

/// Inverse Fourier transform of a one-sided spectrum to a real trace.
///
/// The grid is extended down to DC by linear extrapolation from its two lowest
/// points, which needs `f_start` to be a whole number of steps. The spectrum is
/// windowed, mirrored with Hermitian symmetry and transformed with a scale of
/// `f_step`, so a spectrum in units of X gives a trace in X per second.
pub fn to_time_domain<T: Real>(spec: &MatrixSpectrum<T>, window: Window) -> Result<TimeTrace<T>> {
    let grid = spec.grid();
    let m0 = grid.dc_offset_steps().ok_or_else(|| {
        Error::Grid(format!(
            "f_start {} Hz is not a whole number of {} Hz steps, cannot extend to DC",
            grid.f_start().as_f64(),
            grid.f_step().as_f64()
        ))
    })?;
    let n_ext = m0 + grid.n_points();
    let m = 2 * (n_ext - 1);
    let l = spec.n_conductors();
    let vals = spec.values();
    let fft = FftPlanner::<T>::new().plan_fft_inverse(m);
    let df = grid.f_step();
    let mut out = vec![RMat::<T>::zeros(l, l); m];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
    for r in 0..l {
        for c in 0..l {
            let x0 = vals[0][(r, c)];
            let slope = vals[1][(r, c)] - x0;
            for (k, slot) in buf.iter_mut().enumerate().take(n_ext) {
                let x = if k >= m0 {
                    vals[k - m0][(r, c)]
                } else {
                    x0 - slope * Complex::new(T::from_count(m0 - k), T::zero())
                };
                *slot = x * Complex::new(window.weight::<T>(k, n_ext), T::zero());
            }
            buf[0].im = T::zero();
            buf[n_ext - 1].im = T::zero();
            for k in 1..n_ext - 1 {
                buf[m - k] = buf[k].conj();
            }
            fft.process(&mut buf);
            let peak = buf.iter().fold(T::zero(), |a, z| a.max(z.re.abs()));
            let resid = buf.iter().fold(T::zero(), |a, z| a.max(z.im.abs()));
            if resid > T::lit(1e-9) * peak.max(T::tiny()) + T::tiny() {
                return Err(Error::Validation(format!(
                    "inverse transform left an imaginary residue of {:e}",
                    (resid / peak).as_f64()
                )));
            }
            for (i, z) in buf.iter().enumerate() {
                out[i][(r, c)] = z.re * df;
            }
        }
    }
    let t_step = T::one() / (T::from_count(m) * df);
    TimeTrace::new(t_step, out, spec.kind())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T: Real> {
    pub sample: usize,
    pub time: T,
    /// Signed sample value at the peak.
    pub amplitude: T,
    /// Full width at half maximum.
    pub width: T,
}

/// Settings for [`detect_peaks_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions<T: Real> {
    /// Fraction of the entry's largest magnitude a peak must exceed.
    pub rel_threshold: T,
    /// Minimum distance between accepted peaks, and the launch zone size, in samples.
    pub min_separation: usize,
    /// Optional absolute magnitude floor.
    pub abs_floor: Option<T>,
}

impl<T: Real> Default for PeakOptions<T> {
    fn default() -> Self {
        PeakOptions {
            rel_threshold: T::lit(0.05),
            min_separation: 3,
            abs_floor: None,
        }
    }
}

/// Peaks of every matrix entry, causal half of the trace only.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakList<T: Real> {
    pub t_step: T,
    /// `(row, col)` to peaks in increasing time, launch zone excluded.
    pub entries: BTreeMap<(usize, usize), Vec<Peak<T>>>,
    /// Peaks inside the launch zone around `t = 0`.
    pub launch: BTreeMap<(usize, usize), Vec<Peak<T>>>,
}

impl<T: Real> PeakList<T> {
    pub fn is_empty(&self) -> bool {
        self.entries.values().all(Vec::is_empty)
    }

    /// Union of peak samples over all entries, merging samples closer than `tol`.
    pub fn merged_samples(&self, tol: usize) -> Vec<usize> {
        let mut all: Vec<usize> = self.entries.values().flatten().map(|p| p.sample).collect();
        all.sort_unstable();
        let mut out: Vec<usize> = Vec::new();
        for s in all {
            match out.last() {
                Some(&last) if s - last <= tol => {}
                _ => out.push(s),
            }
        }
        out
    }

    /// All peaks of all entries sorted by time, tagged with their entry.
    pub fn flattened(&self) -> Vec<((usize, usize), Peak<T>)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .flat_map(|(e, ps)| ps.iter().map(move |p| (*e, *p)))
            .collect();
        v.sort_by(|a, b| a.1.sample.cmp(&b.1.sample).then(a.0.cmp(&b.0)));
        v
    }
}

pub fn detect_peaks<T: Real>(trace: &TimeTrace<T>, rel_threshold: T, min_separation: usize) -> PeakList<T> {
    detect_peaks_with(
        trace,
        &PeakOptions {
            rel_threshold,
            min_separation,
            abs_floor: None,
        },
    )
}

pub fn detect_peaks_with<T: Real>(trace: &TimeTrace<T>, opts: &PeakOptions<T>) -> PeakList<T> {
    let l = trace.n_conductors();
    let mut list = PeakList {
        t_step: trace.t_step(),
        entries: BTreeMap::new(),
        launch: BTreeMap::new(),
    };
    for r in 0..l {
        for c in 0..l {
            let x = trace.entry(r, c);
            let (regular, launch) = entry_peaks(&x, trace.t_step(), opts);
            list.entries.insert((r, c), regular);
            list.launch.insert((r, c), launch);
        }
    }
    list
}

fn entry_peaks<T: Real>(x: &[T], dt: T, opts: &PeakOptions<T>) -> (Vec<Peak<T>>, Vec<Peak<T>>) {
    let m = x.len();
    let a: Vec<T> = x.iter().map(|v| v.abs()).collect();
    let max = a.iter().fold(T::zero(), |acc, v| acc.max(*v));
    if max == T::zero() {
        return (Vec::new(), Vec::new());
    }
    let mut floor = opts.rel_threshold * max;
    if let Some(f) = opts.abs_floor {
        floor = floor.max(f);
    }
    let half = m / 2;
    let sep = opts.min_separation;
    // causal half plus the wrapped tail of the launch zone
    let in_scope = |i: usize| i <= half || i + sep >= m;
    let mut cand: Vec<usize> = (0..m)
        .filter(|&i| in_scope(i))
        .filter(|&i| {
            let prev = a[(i + m - 1) % m];
            let next = a[(i + 1) % m];
            a[i] > floor && a[i] > prev && a[i] >= next
        })
        .collect();
    cand.sort_by(|&i, &j| a[j].partial_cmp(&a[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let circ = |i: usize, j: usize| {
        let d = i.abs_diff(j);
        d.min(m - d)
    };
    let mut kept: Vec<usize> = Vec::new();
    for i in cand {
        if kept.iter().all(|&k| circ(i, k) >= sep.max(1)) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut regular = Vec::new();
    let mut launch = Vec::new();
    for i in kept {
        let p = Peak {
            sample: i,
            time: T::from_count(i) * dt,
            amplitude: x[i],
            width: fwhm(&a, i) * dt,
        };
        if i < sep || i + sep >= m {
            launch.push(p);
        } else {
            regular.push(p);
        }
    }
    (regular, launch)
}

/// Full width at half maximum around sample `i`, in samples.
fn fwhm<T: Real>(a: &[T], i: usize) -> T {
    let m = a.len();
    let h = a[i] * T::lit(0.5);
    let side = |dir: isize| -> T {
        let mut prev = a[i];
        for step in 1..m / 2 {
            let j = (i as isize + dir * step as isize).rem_euclid(m as isize) as usize;
            if a[j] <= h {
                let frac = (prev - h) / (prev - a[j]);
                return T::from_count(step - 1) + frac;
            }
            prev = a[j];
        }
        T::from_count(m / 2)
    };
    side(-1) + side(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    /// Echo travels out and back: `d = v·t/2`.
    Reflectometric,
    /// One-way transit: `d = v·t`.
    EndToEnd,
}

pub fn time_to_distance<T: Real>(peaks: &[Peak<T>], velocity: T, mode: DistanceMode) -> Vec<T> {
    peaks.iter().map(|p| distance_at(p.time, velocity, mode)).collect()
}

pub fn distance_at<T: Real>(time: T, velocity: T, mode: DistanceMode) -> T {
    match mode {
        DistanceMode::Reflectometric => velocity * time * T::lit(0.5),
        DistanceMode::EndToEnd => velocity * time,
    }
}

/// Result of a successful reflectometric location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location<T: Real> {
    pub distance: T,
    pub time: T,
    /// Peak magnitude over the largest magnitude outside the launch zone.
    pub confidence: T,
    pub entry: (usize, usize),
}

/// Distance of the first significant peak of a delta trace after the launch
/// zone, or `None` when no entry has one.
pub fn locate_anomaly_reflectometric<T: Real>(
    delta_trace: &TimeTrace<T>,
    velocity: T,
    opts: &PeakOptions<T>,
) -> Option<Location<T>> {
    let peaks = detect_peaks_with(delta_trace, opts);
    let first = peaks.flattened().into_iter().next()?;
    let sep = opts.min_separation;
    let m = delta_trace.len();
    let max = delta_trace.samples()[sep.min(m)..=m / 2]
        .iter()
        .flat_map(|s| s.iter().map(|v| v.abs()))
        .fold(T::zero(), |a, v| a.max(v));
    let (entry, p) = first;
    Some(Location {
        distance: distance_at(p.time, velocity, DistanceMode::Reflectometric),
        time: p.time,
        confidence: p.amplitude.abs() / max,
        entry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryVerdict {
    Symmetric,
    Asymmetric,
    /// Fewer than two peaks in a direction.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub verdict: SymmetryVerdict,
    /// Peak offsets from the first peak, in samples, per direction.
    pub offsets_ab: Vec<usize>,
    pub offsets_ba: Vec<usize>,
    pub detail: String,
}

impl SymmetryReport {
    pub fn symmetric(&self) -> bool {
        self.verdict == SymmetryVerdict::Symmetric
    }
}

/// Compares the peak spacing of two opposite-direction transfer traces.
///
/// Peaks above `opts` in either trace must reappear in the other within `tol`
/// samples, measured from each trace's first peak. The matching side is
/// searched with a ten times lower threshold so that an echo that is merely
/// weaker in one direction still counts. Amplitudes are ignored.
pub fn check_peak_spacing_symmetry<T: Real>(
    trace_ab: &TimeTrace<T>,
    trace_ba: &TimeTrace<T>,
    tol: usize,
    opts: &PeakOptions<T>,
) -> Result<SymmetryReport> {
    let rel = (trace_ab.t_step() - trace_ba.t_step()).abs() / trace_ab.t_step();
    if rel > T::lit(1e-9) {
        return Err(Error::Grid("traces have different time steps".into()));
    }
    let relaxed = PeakOptions {
        rel_threshold: opts.rel_threshold * T::lit(0.1),
        ..*opts
    };
    let strong_ab = detect_peaks_with(trace_ab, opts).merged_samples(tol);
    let strong_ba = detect_peaks_with(trace_ba, opts).merged_samples(tol);
    let weak_ab = detect_peaks_with(trace_ab, &relaxed).merged_samples(0);
    let weak_ba = detect_peaks_with(trace_ba, &relaxed).merged_samples(0);
    if strong_ab.len() < 2 || strong_ba.len() < 2 {
        return Ok(SymmetryReport {
            verdict: SymmetryVerdict::Inconclusive,
            offsets_ab: Vec::new(),
            offsets_ba: Vec::new(),
            detail: format!(
                "need two peaks per direction, found {} and {}",
                strong_ab.len(),
                strong_ba.len()
            ),
        });
    }
    let origin = |v: &[usize]| v[0];
    let rebase = |v: &[usize], o: usize| v.iter().filter(|&&s| s >= o).map(|s| s - o).collect::<Vec<_>>();
    let (o_ab, o_ba) = (origin(&strong_ab), origin(&strong_ba));
    let offsets_ab = rebase(&strong_ab, o_ab);
    let offsets_ba = rebase(&strong_ba, o_ba);
    let pool_ab = rebase(&weak_ab, o_ab.saturating_sub(tol));
    let pool_ba = rebase(&weak_ba, o_ba.saturating_sub(tol));
    let shift_ab = o_ab - o_ab.saturating_sub(tol);
    let shift_ba = o_ba - o_ba.saturating_sub(tol);
    let has = |pool: &[usize], shift: usize, x: usize| pool.iter().any(|&p| (p as isize - shift as isize - x as isize).unsigned_abs() <= tol);
    let missing_in_ba: Vec<usize> = offsets_ab.iter().copied().filter(|&x| !has(&pool_ba, shift_ba, x)).collect();
    let missing_in_ab: Vec<usize> = offsets_ba.iter().copied().filter(|&x| !has(&pool_ab, shift_ab, x)).collect();
    let ok = missing_in_ab.is_empty() && missing_in_ba.is_empty();
    let detail = if ok {
        format!("{} and {} peak offsets all matched within {tol} samples", offsets_ab.len(), offsets_ba.len())
    } else {
        format!(
            "offsets {missing_in_ba:?} of A->B have no B->A counterpart, offsets {missing_in_ab:?} of B->A have no A->B counterpart"
        )
    };
    Ok(SymmetryReport {
        verdict: if ok { SymmetryVerdict::Symmetric } else { SymmetryVerdict::Asymmetric },
        offsets_ab,
        offsets_ba,
        detail,
    })
}
