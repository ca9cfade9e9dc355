//! Frequency-dependent L×L admittance evaluators for loads, sources and faults.

use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::linalg::{cplx, CMat};
use crate::mtl::propagation_at;
use crate::scalar::{Complex, Real};

#[derive(Debug, Clone, PartialEq)]
pub enum AdmittanceModel<T: Real> {
    /// Zero admittance (open termination) on `n` conductors.
    Open(usize),
    /// Frequency-independent matrix (S).
    Matrix(CMat<T>),
    /// Per-conductor resistor in parallel with a capacitor to reference.
    ParallelRc { r: Vec<T>, c: Vec<T> },
    /// Per-conductor series R-L-(C) branch to reference; `c = None` omits the capacitor.
    SeriesRlc {
        r: Vec<T>,
        l: Vec<T>,
        c: Option<Vec<T>>,
    },
    /// The characteristic admittance of a cable, i.e. a matched termination.
    Matched(CableSpec<T>),
    /// Samples at increasing frequencies, linearly interpolated and clamped at the ends.
    Table { freqs: Vec<T>, values: Vec<CMat<T>> },
    /// Several admittances connected in parallel at the same node.
    Parallel(Vec<AdmittanceModel<T>>),
}

impl<T: Real> AdmittanceModel<T> {
    /// `g·I` on `n` conductors.
    pub fn conductance(n: usize, g: T) -> Self {
        AdmittanceModel::Matrix(CMat::from_diagonal_element(n, n, cplx(g, T::zero())))
    }

    /// `y·I` on `n` conductors.
    pub fn scalar(n: usize, y: Complex<T>) -> Self {
        AdmittanceModel::Matrix(CMat::from_diagonal_element(n, n, y))
    }

    pub fn n_conductors(&self) -> usize {
        match self {
            AdmittanceModel::Open(n) => *n,
            AdmittanceModel::Matrix(m) => m.nrows(),
            AdmittanceModel::ParallelRc { r, .. } | AdmittanceModel::SeriesRlc { r, .. } => r.len(),
            AdmittanceModel::Matched(c) => c.n_conductors(),
            AdmittanceModel::Table { values, .. } => values.first().map_or(0, |m| m.nrows()),
            AdmittanceModel::Parallel(parts) => parts.first().map_or(0, Self::n_conductors),
        }
    }

    /// Structural checks: consistent sizes, positive element values, sorted tables.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_conductors();
        let bad = |m: &str| Err(Error::Validation(format!("admittance model: {m}")));
        match self {
            AdmittanceModel::Open(0) => bad("zero conductors"),
            AdmittanceModel::Matrix(m) if m.nrows() != m.ncols() || m.nrows() == 0 => {
                bad("matrix must be square and non-empty")
            }
            AdmittanceModel::ParallelRc { r, c } => {
                if c.len() != r.len() || r.is_empty() {
                    bad("parallel RC needs one R and one C per conductor")
                } else if r.iter().any(|&x| !(x > T::zero())) || c.iter().any(|&x| x < T::zero()) {
                    bad("parallel RC needs R > 0 and C >= 0")
                } else {
                    Ok(())
                }
            }
            AdmittanceModel::SeriesRlc { r, l, c } => {
                if l.len() != r.len() || c.as_ref().is_some_and(|c| c.len() != r.len()) || r.is_empty() {
                    bad("series RLC needs one value per conductor")
                } else if r.iter().any(|&x| x < T::zero())
                    || l.iter().any(|&x| x < T::zero())
                    || c.as_ref().is_some_and(|c| c.iter().any(|&x| !(x > T::zero())))
                {
                    bad("series RLC needs R, L >= 0 and C > 0")
                } else {
                    Ok(())
                }
            }
            AdmittanceModel::Table { freqs, values } => {
                if freqs.is_empty() || freqs.len() != values.len() {
                    bad("table needs one matrix per frequency")
                } else if freqs.windows(2).any(|w| !(w[1] > w[0])) {
                    bad("table frequencies must be strictly increasing")
                } else if values.iter().any(|m| m.nrows() != n || m.ncols() != n) {
                    bad("table matrices must share one square size")
                } else {
                    Ok(())
                }
            }
            AdmittanceModel::Parallel(parts) => {
                if parts.is_empty() {
                    return bad("empty parallel combination");
                }
                for p in parts {
                    p.validate()?;
                    if p.n_conductors() != n {
                        return bad("parallel parts differ in conductor count");
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, f: T) -> Result<CMat<T>> {
        let w = T::two_pi() * f;
        Ok(match self {
            AdmittanceModel::Open(n) => CMat::zeros(*n, *n),
            AdmittanceModel::Matrix(m) => m.clone(),
            AdmittanceModel::ParallelRc { r, c } => {
                let d: Vec<_> = r
                    .iter()
                    .zip(c)
                    .map(|(&r, &c)| cplx(T::one() / r, w * c))
                    .collect();
                crate::linalg::diag(&d)
            }
            AdmittanceModel::SeriesRlc { r, l, c } => {
                let d: Vec<_> = (0..r.len())
                    .map(|i| {
                        let mut x = w * l[i];
                        if let Some(c) = c {
                            x -= T::one() / (w * c[i]);
                        }
                        let z = cplx(r[i], x);
                        if z.re == T::zero() && z.im == T::zero() {
                            return Err(Error::singular("series RLC impedance").at_freq(f.as_f64()));
                        }
                        Ok(cplx(T::one(), T::zero()) / z)
                    })
                    .collect::<Result<_>>()?;
                crate::linalg::diag(&d)
            }
            AdmittanceModel::Matched(cable) => propagation_at(cable, f)?.yc,
            AdmittanceModel::Table { freqs, values } => interpolate(freqs, values, f),
            AdmittanceModel::Parallel(parts) => {
                let mut acc = parts[0].eval(f)?;
                for p in &parts[1..] {
                    acc += p.eval(f)?;
                }
                acc
            }
        })
    }

    /// Whether every eigenvalue of the Hermitian part is non-negative at each of `freqs`.
    pub fn is_passive(&self, freqs: impl IntoIterator<Item = T>) -> Result<bool> {
        for f in freqs {
            let y = self.eval(f)?;
            let herm = (&y + y.adjoint()) * cplx(T::lit(0.5), T::zero());
            let re = herm.map(|z| z.re);
            let scale = re.iter().fold(T::zero(), |a, x| a.max(x.abs()));
            let tol = scale * T::lit(1e-12);
            if re.symmetric_eigenvalues().iter().any(|&l| l < -tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn interpolate<T: Real>(freqs: &[T], values: &[CMat<T>], f: T) -> CMat<T> {
    if f <= freqs[0] {
        return values[0].clone();
    }
    let last = freqs.len() - 1;
    if f >= freqs[last] {
        return values[last].clone();
    }
    let hi = freqs.partition_point(|&x| x <= f);
    let lo = hi - 1;
    let t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
    &values[lo] * cplx(T::one() - t, T::zero()) + &values[hi] * cplx(t, T::zero())
}
