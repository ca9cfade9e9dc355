//! Single-line multiconductor transmission line mathematics.
//!
//! Conventions: `T` diagonalizes `Y·Z` (`T⁻¹·Y·Z·T = Γ²`), waves travel as
//! `e^{−Γx}` with `Re(γ) ≥ 0`, reflection coefficients are current-wave
//! coefficients referenced to admittances (`ρ = −I` for an open end).

mod line;
mod modal;
mod series;

pub use line::{
    ctf_line, echo_voltage, input_admittance_line, input_reflection, line_input_reflection,
    load_reflection, ReflectionRoute,
};
pub use modal::{
    line_propagation_params, modal_transform, propagation_at, track_modes, ModalDirection,
    PropagationParams,
};
pub use series::{series_truncated_responses, SeriesResponse};
