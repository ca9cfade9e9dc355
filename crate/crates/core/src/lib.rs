//! Multiconductor transmission line models of power line networks, with
//! anomaly differential responses and time-domain reflectometry.

pub mod admittance;
pub mod anomaly;
pub mod cable;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod mtl;
pub mod network;
pub mod scalar;
pub mod spectrum;
pub mod time_domain;

pub use admittance::AdmittanceModel;
pub use anomaly::{apply_anomaly, delta_chain, delta_superposition, Anomaly, DeltaModel, DeltaSpectrum, Quantity};
pub use cable::{CableModel, CableSpec, Rlgc, RlgcScale, SkinEffect};
pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use scalar::{Complex, Real};
pub use spectrum::{MatrixSpectrum, SpectrumKind};

pub type CableSpec64 = CableSpec<f64>;
pub type CableSpec32 = CableSpec<f32>;
pub type FrequencyGrid64 = FrequencyGrid<f64>;
pub type FrequencyGrid32 = FrequencyGrid<f32>;
pub type MatrixSpectrum64 = MatrixSpectrum<f64>;
pub type MatrixSpectrum32 = MatrixSpectrum<f32>;
pub type AdmittanceModel64 = AdmittanceModel<f64>;
pub type AdmittanceModel32 = AdmittanceModel<f32>;
pub type NetworkTopology64 = network::NetworkTopology<f64>;
pub type NetworkTopology32 = network::NetworkTopology<f32>;
