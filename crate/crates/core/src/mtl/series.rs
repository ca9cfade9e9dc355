use super::line::round_trip;
use super::modal::PropagationParams;
use crate::error::{Error, Result};
use crate::linalg::{cplx, identity, inverse, spectral_radius, CMat};
use crate::scalar::Real;

/// Truncated multiple-reflection expansions over a frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResponse<T: Real> {
    pub y_in_approx: Vec<CMat<T>>,
    pub rho_in_approx: Vec<CMat<T>>,
    /// Spectral radius of the round-trip operator at each frequency.
    pub spectral_radius: Vec<T>,
}

impl<T: Real> SeriesResponse<T> {
    /// True when every round-trip radius is below one, so the sums converge.
    pub fn converges(&self) -> bool {
        self.spectral_radius.iter().all(|r| *r < T::one())
    }
}

/// Evaluates the input admittance and input reflection as sums of `n_terms`
/// round trips instead of closed-form inverses. Used to check the damping
/// premise behind the echo interpretation; never used for production results.
pub fn series_truncated_responses<T: Real>(
    params: &[PropagationParams<T>],
    length: T,
    rho_l_modal: &[CMat<T>],
    y_r: &CMat<T>,
    n_terms: usize,
) -> Result<SeriesResponse<T>> {
    if params.len() != rho_l_modal.len() {
        return Err(Error::Validation(format!(
            "{} propagation points but {} load reflections",
            params.len(),
            rho_l_modal.len()
        )));
    }
    let mut out = SeriesResponse {
        y_in_approx: Vec::with_capacity(params.len()),
        rho_in_approx: Vec::with_capacity(params.len()),
        spectral_radius: Vec::with_capacity(params.len()),
    };
    for (p, rho) in params.iter().zip(rho_l_modal) {
        let ctx = |e: Error| e.at_freq(p.freq.as_f64());
        let i = identity::<T>(p.n_conductors());
        let b = round_trip(p, length, rho);
        out.spectral_radius.push(spectral_radius(&b).map_err(ctx)?);

        let mut sum = i.clone();
        let mut power = i.clone();
        for _ in 0..n_terms {
            power = &power * &b;
            sum += &power * cplx(T::lit(2.0), T::zero());
        }
        out.y_in_approx.push(&p.t * sum * &p.t_inv * &p.yc);

        let rho_g = p.rho_g_modal(y_r).map_err(ctx)?;
        let step = -(&rho_g * &b);
        let mut geo = CMat::zeros(i.nrows(), i.ncols());
        let mut power = i.clone();
        for _ in 0..n_terms {
            geo += &power;
            power = &power * &step;
        }
        let modal = &rho_g + (&i - &rho_g * &rho_g) * &b * geo;
        let n_mat = p.n_matrix(y_r);
        let n_inv = inverse(&n_mat)
            .ok_or_else(|| ctx(Error::singular("N")))?;
        out.rho_in_approx.push(&n_mat * p.from_modal(&modal) * n_inv);
    }
    Ok(out)
}
