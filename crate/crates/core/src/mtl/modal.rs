use nalgebra::ComplexField;

use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::linalg::{cplx, diag, eigen, frobenius, inverse, modulus, solve, CMat};
use crate::scalar::{Complex, Real};

/// Modal propagation parameters of one cable at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationParams<T: Real> {
    pub freq: T,
    /// Diagonal of Γ (1/m), one propagation constant per mode.
    pub gamma: Vec<Complex<T>>,
    /// Characteristic admittance (S).
    pub yc: CMat<T>,
    /// Characteristic impedance (Ω), `Yc⁻¹`.
    pub zc: CMat<T>,
    /// Current modal transformation, columns are modes.
    pub t: CMat<T>,
    pub t_inv: CMat<T>,
    /// The propagation operator `Y·Z`.
    pub yz: CMat<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalDirection {
    /// `T⁻¹·A·T`
    ToModal,
    /// `T·A·T⁻¹`
    FromModal,
}

impl<T: Real> PropagationParams<T> {
    pub fn n_conductors(&self) -> usize {
        self.gamma.len()
    }

    /// Diagonal of `e^{−Γ·length}`.
    pub fn exp_gamma(&self, length: T) -> Vec<Complex<T>> {
        self.gamma
            .iter()
            .map(|g| (-*g * cplx(length, T::zero())).exp())
            .collect()
    }

    pub fn gamma_matrix(&self) -> CMat<T> {
        diag(&self.gamma)
    }

    pub fn to_modal(&self, a: &CMat<T>) -> CMat<T> {
        &self.t_inv * a * &self.t
    }

    pub fn from_modal(&self, a: &CMat<T>) -> CMat<T> {
        &self.t * a * &self.t_inv
    }

    /// `N = (Y_R + Y_C)·Y_C⁻¹`.
    pub fn n_matrix(&self, y_r: &CMat<T>) -> CMat<T> {
        (y_r + &self.yc) * &self.zc
    }

    /// Modal line mismatch coefficient `T⁻¹·Y_C·(Y_C + Y_R)⁻¹·(Y_C − Y_R)·Y_C⁻¹·T`.
    pub fn rho_g_modal(&self, y_r: &CMat<T>) -> Result<CMat<T>> {
        let x = solve(&(&self.yc + y_r), &(&self.yc - y_r))
            .ok_or_else(|| Error::singular("Y_C + Y_R"))?;
        Ok(self.to_modal(&(&self.yc * x * &self.zc)))
    }

    /// Largest off-diagonal magnitude of `T⁻¹·Y·Z·T`, relative to `‖Y·Z‖_F`.
    pub fn diagonalization_residual(&self) -> T {
        let m = self.to_modal(&self.yz);
        let mut off = T::zero();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if i != j {
                    off = off.max(modulus(m[(i, j)]));
                }
            }
        }
        off / frobenius(&self.yz)
    }
}

/// `T⁻¹·A·T` or `T·A·T⁻¹`.
pub fn modal_transform<T: Real>(
    a: &CMat<T>,
    t: &CMat<T>,
    direction: ModalDirection,
) -> Result<CMat<T>> {
    let t_inv = inverse(t).ok_or_else(|| Error::singular("modal transformation"))?;
    Ok(match direction {
        ModalDirection::ToModal => &t_inv * a * t,
        ModalDirection::FromModal => t * a * &t_inv,
    })
}

fn decaying_branch<T: Real>(lambda: Complex<T>) -> Complex<T> {
    let mut g = lambda.sqrt();
    if g.re < T::zero() {
        g = -g;
    }
    let tie = T::lit(1e-12) * modulus(g);
    if g.re.abs() <= tie && g.im < T::zero() {
        g = -g;
    }
    g
}

/// Unit column norm, first non-negligible component real positive.
fn normalize_columns<T: Real>(t: &mut CMat<T>) {
    for mut col in t.column_iter_mut() {
        let n = col.norm();
        let thresh = n * T::lit(1e-9);
        if let Some(lead) = col.iter().copied().find(|z| modulus(*z) > thresh) {
            let phase = lead / cplx(modulus(lead), T::zero());
            let s = cplx(n, T::zero()) * phase;
            col.iter_mut().for_each(|z| *z /= s);
        }
    }
}

/// Modal decomposition of `cable` at a single frequency, without mode tracking.
pub fn propagation_at<T: Real>(cable: &CableSpec<T>, f: T) -> Result<PropagationParams<T>> {
    let ctx = |e: Error| e.at_freq(f.as_f64()).in_element(cable.label());
    let p = cable.rlgc(f);
    let z = p.impedance(f);
    let y = p.admittance(f);
    let yz = &y * &z;
    let n = yz.nrows();

    let eig = eigen(&yz).map_err(ctx)?;
    let mut modes: Vec<(Complex<T>, usize)> = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &l)| (decaying_branch(l), i))
        .collect();
    if modes.iter().any(|(g, _)| modulus(*g) == T::zero()) {
        return Err(ctx(Error::Decomposition {
            reason: "vanishing propagation constant".into(),
            freq: None,
            element: None,
        }));
    }
    // slowest-phase mode last; purely a deterministic initial ordering
    modes.sort_by(|a, b| {
        a.0.im
            .partial_cmp(&b.0.im)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut t = CMat::from_fn(n, n, |i, j| eig.vectors[(i, modes[j].1)]);
    normalize_columns(&mut t);
    let gamma: Vec<_> = modes.iter().map(|m| m.0).collect();

    let t_inv = inverse(&t).ok_or_else(|| {
        ctx(Error::Decomposition {
            reason: "modal transformation is singular".into(),
            freq: None,
            element: None,
        })
    })?;
    let inv_gamma: Vec<_> = gamma
        .iter()
        .map(|g| cplx(T::one(), T::zero()) / *g)
        .collect();
    let zc = &z * &t * diag(&inv_gamma) * &t_inv;
    let yc = inverse(&zc).ok_or_else(|| {
        ctx(Error::Singular {
            what: "characteristic impedance",
            freq: None,
            element: None,
        })
    })?;
    Ok(PropagationParams {
        freq: f,
        gamma,
        yc,
        zc,
        t,
        t_inv,
        yz,
    })
}

/// Reorders modes at each frequency so every column best matches the previous
/// frequency's column, keeping modal quantities continuous over the sweep.
pub fn track_modes<T: Real>(params: &mut [PropagationParams<T>]) {
    for k in 1..params.len() {
        let n = params[k].n_conductors();
        if n == 1 {
            continue;
        }
        let (head, tail) = params.split_at_mut(k);
        let prev = &head[k - 1].t;
        let cur = &mut tail[0];
        let overlap = prev.adjoint() * &cur.t;
        let mut perm = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        let mut pairs: Vec<(T, usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (modulus(overlap[(i, j)]), i, j))
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        for (_, i, j) in pairs {
            if perm[i] == usize::MAX && !taken[j] {
                perm[i] = j;
                taken[j] = true;
            }
        }
        if perm.iter().enumerate().all(|(i, &j)| i == j) {
            continue;
        }
        let t = CMat::from_fn(n, n, |r, c| cur.t[(r, perm[c])]);
        let t_inv = CMat::from_fn(n, n, |r, c| cur.t_inv[(perm[r], c)]);
        cur.gamma = perm.iter().map(|&j| cur.gamma[j]).collect();
        cur.t = t;
        cur.t_inv = t_inv;
    }
}

/// Modal decomposition over the whole grid with mode tracking.
pub fn line_propagation_params<T: Real>(
    cable: &CableSpec<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Vec<PropagationParams<T>>> {
    let tol = T::structural_tol();
    let mut out = Vec::with_capacity(grid.n_points());
    for f in grid.freqs() {
        cable.validate_at(f)?;
        let p = propagation_at(cable, f)?;
        if p.diagonalization_residual() > tol {
            return Err(Error::Decomposition {
                reason: format!(
                    "diagonalization residual {:e} exceeds {:e}",
                    p.diagonalization_residual().as_f64(),
                    tol.as_f64()
                ),
                freq: Some(f.as_f64()),
                element: Some(cable.label().to_string()),
            });
        }
        out.push(p);
    }
    track_modes(&mut out);
    Ok(out)
}
