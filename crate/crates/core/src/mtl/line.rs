use super::modal::PropagationParams;
use crate::error::{Error, Result};
use crate::linalg::{diag, identity, inverse, norm1, solve, solve_cancelling, CMat, CVec};
use crate::scalar::Real;

/// Which closed form evaluates the input reflection of a terminated line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionRoute {
    /// Input admittance first, then the port mismatch.
    #[default]
    Direct,
    /// Modal line mismatch coefficient combined with the load reflection.
    Modal,
}

/// `ρ_L = Y_C·(Y_L + Y_C)⁻¹·(Y_L − Y_C)·Y_C⁻¹`, a current-wave coefficient.
pub fn load_reflection<T: Real>(y_l: &CMat<T>, yc: &CMat<T>) -> Result<CMat<T>> {
    let scale = norm1(y_l) + norm1(yc);
    let x = solve_cancelling(&(y_l + yc), scale, &(y_l - yc)).ok_or(Error::MatchedDegenerate {
        freq: None,
        element: None,
    })?;
    let yc_inv = inverse(yc).ok_or_else(|| Error::singular("characteristic admittance"))?;
    Ok(yc * x * yc_inv)
}

/// `e^{−Γℓ}·ρ^M·e^{−Γℓ}`
pub(crate) fn round_trip<T: Real>(
    params: &PropagationParams<T>,
    length: T,
    rho_l_modal: &CMat<T>,
) -> CMat<T> {
    let e = diag(&params.exp_gamma(length));
    &e * rho_l_modal * &e
}

fn resonance<T: Real>(params: &PropagationParams<T>) -> Error {
    Error::Resonance {
        freq: Some(params.freq.as_f64()),
        element: None,
    }
}

/// Input admittance at the near end of a line whose far end has modal
/// reflection `rho_l_modal`.
pub fn input_admittance_line<T: Real>(
    params: &PropagationParams<T>,
    length: T,
    rho_l_modal: &CMat<T>,
) -> Result<CMat<T>> {
    if !(length >= T::zero()) {
        return Err(Error::Range(format!(
            "line length must be non-negative, got {}",
            length.as_f64()
        )));
    }
    let n = params.n_conductors();
    let b = round_trip(params, length, rho_l_modal);
    let i = identity::<T>(n);
    // (I+B)(I−B)⁻¹ = ((I−B)ᵀ \ (I+B)ᵀ)ᵀ
    let scale = T::one() + norm1(&b);
    let ratio = solve_cancelling(&(&i - &b).transpose(), scale, &(&i + &b).transpose())
        .ok_or_else(|| resonance(params))?
        .transpose();
    Ok(&params.t * ratio * &params.t_inv * &params.yc)
}

/// Port reflection `Y_R·(Y_in + Y_R)⁻¹·(Y_in − Y_R)·Y_R⁻¹`.
pub fn input_reflection<T: Real>(y_in: &CMat<T>, y_r: &CMat<T>) -> Result<CMat<T>> {
    let scale = norm1(y_in) + norm1(y_r);
    let x = solve_cancelling(&(y_in + y_r), scale, &(y_in - y_r))
        .ok_or_else(|| Error::singular("Y_in + Y_R"))?;
    let yr_inv = inverse(y_r).ok_or_else(|| Error::singular("port admittance Y_R"))?;
    Ok(y_r * x * yr_inv)
}

/// Input reflection of a terminated line seen from a port with admittance `y_r`.
pub fn line_input_reflection<T: Real>(
    params: &PropagationParams<T>,
    length: T,
    rho_l_modal: &CMat<T>,
    y_r: &CMat<T>,
    route: ReflectionRoute,
) -> Result<CMat<T>> {
    match route {
        ReflectionRoute::Direct => {
            let y_in = input_admittance_line(params, length, rho_l_modal)?;
            input_reflection(&y_in, y_r)
        }
        ReflectionRoute::Modal => {
            if !(length >= T::zero()) {
                return Err(Error::Range(format!(
                    "line length must be non-negative, got {}",
                    length.as_f64()
                )));
            }
            let rho_g = params.rho_g_modal(y_r)?;
            let rho_b = round_trip(params, length, rho_l_modal);
            let i = identity::<T>(params.n_conductors());
            let num = &rho_g + &rho_b;
            let prod = &rho_g * &rho_b;
            let scale = T::one() + norm1(&prod);
            let den = &i + prod;
            let inner = solve_cancelling(&den.transpose(), scale, &num.transpose())
                .ok_or_else(|| Error::singular("I + ρ_G·ρ_B"))?
                .transpose();
            let n_mat = params.n_matrix(y_r);
            let n_inv = inverse(&n_mat).ok_or_else(|| Error::singular("N"))?;
            Ok(&n_mat * params.from_modal(&inner) * n_inv)
        }
    }
}

/// Echo returned into the port: `−Y_R⁻¹·ρ_in·Y_R·V_source`.
pub fn echo_voltage<T: Real>(
    rho_in: &CMat<T>,
    y_r: &CMat<T>,
    v_source: &CVec<T>,
) -> Result<CVec<T>> {
    let rhs = rho_in * (y_r * v_source);
    let x = solve(y_r, &CMat::from_column_slice(rhs.len(), 1, rhs.as_slice()))
        .ok_or_else(|| Error::singular("port admittance Y_R"))?;
    Ok(-CVec::from_column_slice(x.as_slice()))
}

/// Voltage transfer from the near end to the far end of a line terminated with
/// physical reflection `rho_l`: `Z_C·T·(I − ρ^M)·(I − e^{−2Γℓ}ρ^M)⁻¹·e^{−Γℓ}·T⁻¹·Y_C`.
pub fn ctf_line<T: Real>(
    params: &PropagationParams<T>,
    length: T,
    rho_l: &CMat<T>,
) -> Result<CMat<T>> {
    if !(length >= T::zero()) {
        return Err(Error::Range(format!(
            "line length must be non-negative, got {}",
            length.as_f64()
        )));
    }
    let n = params.n_conductors();
    let rho_m = params.to_modal(rho_l);
    let e = params.exp_gamma(length);
    let e2: Vec<_> = e.iter().map(|z| *z * *z).collect();
    let i = identity::<T>(n);
    let round = diag(&e2) * &rho_m;
    let scale = T::one() + norm1(&round);
    let den = &i - round;
    let rhs = diag(&e);
    let x = solve_cancelling(&den, scale, &rhs).ok_or_else(|| resonance(params))?;
    let modal = (&i - &rho_m) * x;
    Ok(&params.zc * params.from_modal(&modal) * &params.yc)
}
