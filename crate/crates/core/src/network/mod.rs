//! Tree networks of cable branches: validation, carry-back of terminations to a
//! port, and end-to-end transfer along the transmitter-receiver path.

mod oracle;
mod solve;
mod topology;

pub use oracle::{two_section_oracle, TwoSection};
pub use solve::{
    end_to_end_ctf, network_input_reflection, reduce_to_port, NetworkSolver, PortSignal,
    PropagationCache, Reduction,
};
pub use topology::{validate_topology, Branch, NetworkTopology, Port, ValidationReport};
