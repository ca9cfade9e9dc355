//! Per-unit-length cable descriptions.

use crate::error::{Error, Result};
use crate::linalg::{cplx, CMat, RMat};
use crate::scalar::Real;

/// Per-unit-length parameter matrices at one frequency (Ω/m, H/m, S/m, F/m).
#[derive(Debug, Clone, PartialEq)]
pub struct Rlgc<T: Real> {
    pub r: RMat<T>,
    pub l: RMat<T>,
    pub g: RMat<T>,
    pub c: RMat<T>,
}

impl<T: Real> Rlgc<T> {
    pub fn n_conductors(&self) -> usize {
        self.r.nrows()
    }

    /// Series impedance `Z = R + j2πfL`.
    pub fn impedance(&self, f: T) -> CMat<T> {
        let w = T::two_pi() * f;
        CMat::from_fn(self.r.nrows(), self.r.ncols(), |i, j| {
            cplx(self.r[(i, j)], w * self.l[(i, j)])
        })
    }

    /// Shunt admittance `Y = G + j2πfC`.
    pub fn admittance(&self, f: T) -> CMat<T> {
        let w = T::two_pi() * f;
        CMat::from_fn(self.g.nrows(), self.g.ncols(), |i, j| {
            cplx(self.g[(i, j)], w * self.c[(i, j)])
        })
    }

    fn lerp(a: &Self, b: &Self, t: T) -> Self {
        let mix = |x: &RMat<T>, y: &RMat<T>| x * (T::one() - t) + y * t;
        Self {
            r: mix(&a.r, &b.r),
            l: mix(&a.l, &b.l),
            g: mix(&a.g, &b.g),
            c: mix(&a.c, &b.c),
        }
    }

    fn scaled(mut self, s: &RlgcScale<T>) -> Self {
        self.r *= s.r;
        self.l *= s.l;
        self.g *= s.g;
        self.c *= s.c;
        self
    }
}

/// Multiplicative factors applied to each parameter matrix, used to describe damaged cable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlgcScale<T: Real> {
    pub r: T,
    pub l: T,
    pub g: T,
    pub c: T,
}

impl<T: Real> Default for RlgcScale<T> {
    fn default() -> Self {
        Self {
            r: T::one(),
            l: T::one(),
            g: T::one(),
            c: T::one(),
        }
    }
}

/// Lossy cable with skin-effect conductor loss and constant loss tangent.
///
/// `R(f) = r0·√(f/f_ref)·I`, with the matching internal reactance so the series
/// impedance stays causal; `L` and `C` carry `coupling` on every off-diagonal;
/// `G(f) = 2πf·loss_tangent·C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinEffect<T: Real> {
    pub n_conductors: usize,
    pub r0: T,
    pub f_ref: T,
    pub l_self: T,
    pub c_self: T,
    pub coupling: T,
    pub loss_tangent: T,
}

impl<T: Real> SkinEffect<T> {
    /// r0 = 0.1 Ω/m at 1 MHz, 0.5 µH/m, 100 pF/m, coupling 0.3, tan δ = 5e−4.
    pub fn plc_default(n_conductors: usize) -> Self {
        Self {
            n_conductors,
            r0: T::lit(0.1),
            f_ref: T::lit(1e6),
            l_self: T::lit(0.5e-6),
            c_self: T::lit(100e-12),
            coupling: T::lit(0.3),
            loss_tangent: T::lit(5e-4),
        }
    }

    fn coupled(&self, diag: T) -> RMat<T> {
        let n = self.n_conductors;
        RMat::from_fn(n, n, |i, j| {
            if i == j {
                diag
            } else {
                diag * self.coupling
            }
        })
    }

    fn external(&self, f: T) -> Rlgc<T> {
        let n = self.n_conductors;
        let c = self.coupled(self.c_self);
        Rlgc {
            r: RMat::zeros(n, n),
            l: self.coupled(self.l_self),
            g: &c * (T::two_pi() * f * self.loss_tangent),
            c,
        }
    }

    fn at(&self, f: T) -> Rlgc<T> {
        let mut p = self.external(f);
        let rs = self.r0 * (f / self.f_ref).sqrt();
        let w = T::two_pi() * f;
        for i in 0..self.n_conductors {
            p.r[(i, i)] = rs;
            p.l[(i, i)] += rs / w;
        }
        p
    }
}

/// Frequency evaluator for the per-unit-length parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CableModel<T: Real> {
    Constant(Rlgc<T>),
    SkinEffect(SkinEffect<T>),
    /// Samples at increasing frequencies, linearly interpolated and clamped at the ends.
    Table {
        freqs: Vec<T>,
        samples: Vec<Rlgc<T>>,
    },
    Scaled {
        base: Box<CableModel<T>>,
        scale: RlgcScale<T>,
    },
}

impl<T: Real> CableModel<T> {
    pub fn eval(&self, f: T) -> Rlgc<T> {
        match self {
            CableModel::Constant(p) => p.clone(),
            CableModel::SkinEffect(s) => s.at(f),
            CableModel::Table { freqs, samples } => interpolate(freqs, samples, f),
            CableModel::Scaled { base, scale } => base.eval(f).scaled(scale),
        }
    }

    /// Inductance and capacitance used for velocity estimates (skin-effect internal
    /// inductance excluded).
    fn nominal(&self, f: T) -> Rlgc<T> {
        match self {
            CableModel::SkinEffect(s) => s.external(f),
            CableModel::Scaled { base, scale } => base.nominal(f).scaled(scale),
            other => other.eval(f),
        }
    }

    fn n_conductors(&self) -> usize {
        match self {
            CableModel::Constant(p) => p.n_conductors(),
            CableModel::SkinEffect(s) => s.n_conductors,
            CableModel::Table { samples, .. } => samples.first().map_or(0, Rlgc::n_conductors),
            CableModel::Scaled { base, .. } => base.n_conductors(),
        }
    }
}

fn interpolate<T: Real>(freqs: &[T], samples: &[Rlgc<T>], f: T) -> Rlgc<T> {
    if f <= freqs[0] {
        return samples[0].clone();
    }
    let last = freqs.len() - 1;
    if f >= freqs[last] {
        return samples[last].clone();
    }
    let hi = freqs.partition_point(|&x| x <= f);
    let lo = hi - 1;
    let t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
    Rlgc::lerp(&samples[lo], &samples[hi], t)
}

/// An L-conductor cable type.
#[derive(Debug, Clone, PartialEq)]
pub struct CableSpec<T: Real> {
    label: String,
    n_conductors: usize,
    model: CableModel<T>,
}

impl<T: Real> CableSpec<T> {
    pub fn new(label: impl Into<String>, model: CableModel<T>) -> Result<Self> {
        let label = label.into();
        let n = model.n_conductors();
        if n == 0 {
            return Err(Error::Validation(format!("cable {label}: no conductors")));
        }
        check_shapes(&label, &model, n)?;
        Ok(Self {
            label,
            n_conductors: n,
            model,
        })
    }

    /// Frequency-independent single-conductor-pair line.
    pub fn scalar(label: impl Into<String>, r: T, l: T, g: T, c: T) -> Self {
        let m = |x: T| RMat::from_element(1, 1, x);
        Self::new(
            label,
            CableModel::Constant(Rlgc {
                r: m(r),
                l: m(l),
                g: m(g),
                c: m(c),
            }),
        )
        .expect("scalar cable is well-formed")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_conductors(&self) -> usize {
        self.n_conductors
    }

    pub fn model(&self) -> &CableModel<T> {
        &self.model
    }

    pub fn rlgc(&self, f: T) -> Rlgc<T> {
        self.model.eval(f)
    }

    /// Same cable with every parameter matrix scaled, under a new label.
    pub fn degraded(&self, label: impl Into<String>, scale: RlgcScale<T>) -> Self {
        Self {
            label: label.into(),
            n_conductors: self.n_conductors,
            model: CableModel::Scaled {
                base: Box::new(self.model.clone()),
                scale,
            },
        }
    }

    /// Checks symmetry, sign and definiteness of the parameter matrices at `f`.
    pub fn validate_at(&self, f: T) -> Result<()> {
        let p = self.rlgc(f);
        let fail = |what: String| {
            Err(Error::Validation(format!(
                "cable {} at {} Hz: {what}",
                self.label,
                f.as_f64()
            )))
        };
        for (name, m) in [("R", &p.r), ("L", &p.l), ("G", &p.g), ("C", &p.c)] {
            if m.iter().any(|x| !x.is_finite()) {
                return fail(format!("{name} has non-finite entries"));
            }
            let scale = m.iter().fold(T::zero(), |a, x| a.max(x.abs()));
            let tol = T::lit(1e-12) * scale.max(T::tiny());
            for i in 0..m.nrows() {
                for j in 0..i {
                    if (m[(i, j)] - m[(j, i)]).abs() > tol {
                        return fail(format!("{name} is not symmetric"));
                    }
                }
            }
        }
        for i in 0..self.n_conductors {
            if p.r[(i, i)] < T::zero() || p.g[(i, i)] < T::zero() {
                return fail("R and G diagonals must be non-negative".into());
            }
            if !(p.l[(i, i)] > T::zero()) || !(p.c[(i, i)] > T::zero()) {
                return fail("L and C diagonals must be strictly positive".into());
            }
        }
        if p.l.clone().cholesky().is_none() {
            return fail("L is not positive definite".into());
        }
        if p.c.clone().cholesky().is_none() {
            return fail("C is not positive definite".into());
        }
        Ok(())
    }

    /// Per-mode propagation velocities `1/√eig(L·C)`, fastest first.
    pub fn modal_velocities(&self, f: T) -> Vec<T> {
        let p = self.model.nominal(f);
        // eig(L·C) = eig(Gᵀ·L·G) with C = G·Gᵀ, which is symmetric.
        let sym = match p.c.clone().cholesky() {
            Some(ch) => {
                let g = ch.l();
                g.transpose() * &p.l * g
            }
            None => &p.l * &p.c,
        };
        let mut v: Vec<T> = sym
            .symmetric_eigenvalues()
            .iter()
            .map(|&lc| T::one() / lc.sqrt())
            .collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        v
    }

    /// Fastest modal velocity at `f`.
    pub fn max_velocity(&self, f: T) -> T {
        self.modal_velocities(f)[0]
    }
}

fn check_shapes<T: Real>(label: &str, model: &CableModel<T>, n: usize) -> Result<()> {
    let square = |p: &Rlgc<T>| {
        [&p.r, &p.l, &p.g, &p.c]
            .iter()
            .all(|m| m.nrows() == n && m.ncols() == n)
    };
    match model {
        CableModel::Constant(p) if !square(p) => Err(Error::Validation(format!(
            "cable {label}: parameter matrices must all be {n}x{n}"
        ))),
        CableModel::SkinEffect(s) if s.f_ref <= T::zero() => Err(Error::Validation(format!(
            "cable {label}: reference frequency must be positive"
        ))),
        CableModel::Table { freqs, samples } => {
            if freqs.is_empty() || freqs.len() != samples.len() {
                return Err(Error::Validation(format!(
                    "cable {label}: table needs one sample per frequency"
                )));
            }
            if freqs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Validation(format!(
                    "cable {label}: table frequencies must be strictly increasing"
                )));
            }
            if !samples.iter().all(square) {
                return Err(Error::Validation(format!(
                    "cable {label}: parameter matrices must all be {n}x{n}"
                )));
            }
            Ok(())
        }
        CableModel::Scaled { base, .. } => check_shapes(label, base, n),
        _ => Ok(()),
    }
}
