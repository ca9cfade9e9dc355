use crate::admittance::AdmittanceModel;
use crate::cable::CableSpec;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::mtl::{
    input_admittance_line, line_input_reflection, load_reflection, propagation_at,
    ReflectionRoute,
};
use crate::scalar::Real;
use crate::spectrum::{MatrixSpectrum, SpectrumKind};

/// Input admittance and input reflection of two cascaded sections.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSection<T: Real> {
    pub y_in: MatrixSpectrum<T>,
    pub rho_in: MatrixSpectrum<T>,
}

/// Closed form for two cascaded line sections without a junction load.
///
/// The second section is folded into an equivalent modal reflection at the end
/// of the first one, using the mismatch between the two characteristic
/// admittances rather than any admittance carry-back. It exists as an
/// independent check on the recursive reduction.
pub fn two_section_oracle<T: Real>(
    cable1: &CableSpec<T>,
    len1: T,
    cable2: &CableSpec<T>,
    len2: T,
    y_l: &AdmittanceModel<T>,
    y_r: &AdmittanceModel<T>,
    grid: &FrequencyGrid<T>,
) -> Result<TwoSection<T>> {
    if cable1.n_conductors() != cable2.n_conductors() {
        return Err(Error::Validation(
            "sections have different conductor counts".into(),
        ));
    }
    let mut y_in = Vec::with_capacity(grid.n_points());
    let mut rho_in = Vec::with_capacity(grid.n_points());
    for f in grid.freqs() {
        let ctx = |e: Error| e.at_freq(f.as_f64());
        let p1 = propagation_at(cable1, f).map_err(ctx)?;
        let p2 = propagation_at(cable2, f).map_err(ctx)?;
        let rho_l2 = p2.to_modal(&load_reflection(&y_l.eval(f)?, &p2.yc).map_err(ctx)?);
        // reflection at the end of section 1: section 2 seen through a port of admittance Y_C1
        let rho_1 = line_input_reflection(&p2, len2, &rho_l2, &p1.yc, ReflectionRoute::Modal)
            .map_err(ctx)?;
        let rho_1m = p1.to_modal(&rho_1);
        y_in.push(input_admittance_line(&p1, len1, &rho_1m).map_err(ctx)?);
        let yr = y_r.eval(f)?;
        rho_in.push(
            line_input_reflection(&p1, len1, &rho_1m, &yr, ReflectionRoute::Modal).map_err(ctx)?,
        );
    }
    Ok(TwoSection {
        y_in: MatrixSpectrum::new(*grid, y_in, SpectrumKind::Admittance)?,
        rho_in: MatrixSpectrum::new(*grid, rho_in, SpectrumKind::Reflection)?,
    })
}
