//! Small dense complex linear algebra used per frequency point.
//!
//! Matrices here are L×L with L the number of conductors, so everything is
//! dense and recomputed freely. Inverses are always obtained from an LU
//! factorization with a reciprocal-condition guard.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;
pub type RMat<T> = DMatrix<T>;

pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

pub fn to_complex<T: Real>(m: &RMat<T>) -> CMat<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

pub fn diag<T: Real>(values: &[Complex<T>]) -> CMat<T> {
    CMat::from_diagonal(&CVec::from_column_slice(values))
}

pub fn modulus<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Max absolute column sum.
pub fn norm1<T: Real>(m: &CMat<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, z| acc + modulus(*z)))
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn frobenius<T: Real>(m: &CMat<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im)
        .sqrt()
}

pub fn max_abs<T: Real>(m: &CMat<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(modulus(*z)))
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute difference when `b` vanishes.
pub fn rel_diff<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    let d = frobenius(&(a - b));
    let n = frobenius(b);
    if n > T::zero() {
        d / n
    } else {
        d
    }
}

fn singular_rcond<T: Real>() -> T {
    T::default_epsilon() * T::lit(64.0)
}

/// Inverse of `a`, or `None` when `a` is numerically singular.
pub fn inverse<T: Real>(a: &CMat<T>) -> Option<CMat<T>> {
    let inv = a.clone().lu().try_inverse()?;
    let an = norm1(a);
    let inn = norm1(&inv);
    if !an.is_finite() || !inn.is_finite() || an == T::zero() {
        return None;
    }
    let rc = T::one() / (an * inn);
    if rc < singular_rcond() {
        return None;
    }
    Some(inv)
}

/// Reciprocal 1-norm condition number (0 for exactly singular matrices).
pub fn rcond<T: Real>(a: &CMat<T>) -> T {
    match a.clone().lu().try_inverse() {
        Some(inv) => {
            let p = norm1(a) * norm1(&inv);
            if p.is_finite() && p > T::zero() {
                T::one() / p
            } else {
                T::zero()
            }
        }
        None => T::zero(),
    }
}

/// Solves `a · x = b`.
pub fn solve<T: Real>(a: &CMat<T>, b: &CMat<T>) -> Option<CMat<T>> {
    if rcond(a) < singular_rcond() {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Solves `a · x = b` where `a` was formed as a sum or difference of terms of
/// combined 1-norm `scale`. Cancellation down to rounding level counts as
/// singular even when `a` alone looks well conditioned (as any 1×1 does).
pub fn solve_cancelling<T: Real>(a: &CMat<T>, scale: T, b: &CMat<T>) -> Option<CMat<T>> {
    let inv = a.clone().lu().try_inverse()?;
    let p = norm1(&inv) * scale.max(norm1(a));
    if !p.is_finite() || T::one() / p < singular_rcond() {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Solves `x · a = b`, i.e. returns `b · a⁻¹`.
pub fn solve_right<T: Real>(b: &CMat<T>, a: &CMat<T>) -> Option<CMat<T>> {
    solve(&a.transpose(), &b.transpose()).map(|x| x.transpose())
}

/// Eigen-decomposition of a general complex matrix, `m · vectors = vectors · diag(values)`.
#[derive(Debug, Clone)]
pub struct Eigen<T: Real> {
    pub values: Vec<Complex<T>>,
    /// Eigenvectors as columns, each of unit Euclidean norm.
    pub vectors: CMat<T>,
}

pub fn eigen<T: Real>(m: &CMat<T>) -> Result<Eigen<T>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(Eigen {
            values: vec![m[(0, 0)]],
            vectors: identity(1),
        });
    }
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), 10_000).ok_or_else(|| {
        Error::Decomposition {
            reason: "Schur iteration did not converge".into(),
            freq: None,
            element: None,
        }
    })?;
    let (q, u) = schur.unpack();
    let scale = frobenius(&u).max(T::tiny());
    let tiny = scale * T::default_epsilon() * T::lit(1e3);

    let mut vecs = CMat::<T>::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = u[(i, i)];
        values.push(lambda);
        let mut v = CVec::<T>::zeros(n);
        v[i] = Complex::new(T::one(), T::zero());
        for j in (0..i).rev() {
            let mut s = Complex::new(T::zero(), T::zero());
            for k in (j + 1)..=i {
                s += u[(j, k)] * v[k];
            }
            let mut d = u[(j, j)] - lambda;
            if modulus(d) <= tiny {
                if modulus(s) <= tiny {
                    // repeated eigenvalue with an independent eigenvector
                    v[j] = Complex::new(T::zero(), T::zero());
                    continue;
                }
                d = Complex::new(tiny, T::zero());
            }
            v[j] = -s / d;
        }
        let x = &q * v;
        let nx = x.norm();
        vecs.set_column(i, &(x / Complex::new(nx, T::zero())));
    }
    if rcond(&vecs) < T::default_epsilon() * T::lit(1e4) {
        return Err(Error::Decomposition {
            reason: "matrix is defective (eigenvectors are not independent)".into(),
            freq: None,
            element: None,
        });
    }
    Ok(Eigen {
        values,
        vectors: vecs,
    })
}

pub fn spectral_radius<T: Real>(m: &CMat<T>) -> Result<T> {
    if m.nrows() == 1 {
        return Ok(modulus(m[(0, 0)]));
    }
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), 10_000).ok_or_else(|| {
        Error::Decomposition {
            reason: "Schur iteration did not converge".into(),
            freq: None,
            element: None,
        }
    })?;
    let (_, u) = schur.unpack();
    Ok((0..u.nrows()).fold(T::zero(), |acc, i| acc.max(modulus(u[(i, i)]))))
}
