//! Random network ensembles, distance sweeps and the signature scenarios.

mod ensemble;
mod scenarios;
pub mod stats;
mod sweep;

pub use ensemble::{
    cable_key, default_cable, generate_random_network, prufer_edges, EnsembleConfig, GeneratedNetwork, LoadModel,
    RX_PORT, TX_PORT,
};
pub use scenarios::{
    classify, diff_peaks, run_scenario_suite, single_line_grid, single_line_network, single_line_scenarios, PeakDiff,
    Scenario, ScenarioOptions, ScenarioOutcome, ScenarioReport, Signature, SINGLE_LINE_LENGTH, SINGLE_LINE_PORT,
};
pub use sweep::{
    backbone, band_mean_db, band_mean_norm, bin_records, point_distance, run_backbone_lateral, run_distance_sweep,
    single_conductor_fault, BackboneLateralReport, BinAxis, BinStats, SweepOptions, SweepRecord, SweepReport,
    QUANTITIES,
};
