//! Larmor-clock and dwell-time calculations for spin-1/2 wave packets
//! scattering on symmetric one-dimensional barriers.
//!
//! Units are fixed throughout: `hbar = m = 1`.

pub mod clocks;
pub mod error;
pub mod model;
pub mod oracle;
pub mod outer;
pub mod packet;
pub mod quadrature;
pub mod setup;
pub mod spin;
pub mod splitter;
pub mod stationary;

pub use error::{Error, Result};
pub use model::{
    barrier_value, build_gaussian_amplitude, effective_barrier, energy, BarrierSpec, ComplexField,
    FieldRegion, FieldSpec, Piece, Segment, SpectralAmplitude, Spin, SpinorField,
};
pub use stationary::{scattering_sweep, solve_stationary, ScatteringSolution, StationaryState, SweepPoint};
pub use splitter::{backward_solution, decompose, BackwardSolution, Decomposition, SplitSolution};
pub use packet::{assemble, occupancy_trace, packet_norms, OccupancyTrace, PacketFamily, PacketResolution, TimeWindow, Which};
pub use spin::{bloch, constant_sz_report, initial_angles, precession_rate, spin_trace, BlochState, InitialAngles, SpinTrace, SpinorPacket};
pub use clocks::{clock_report, clock_report_in, dwell_time_stationary, larmor_time_spectral, larmor_time_timedomain, phase_time, phase_time_baseline, richardson, rotation_angles, ChannelPair, ClockReport, PhaseTime, RotationAngles};
pub use oracle::{asymptotic_spin_measurement, evolve, field_placement_probe, initial_spinor, AsymptoticSpin, EvolverConfig, ProbeReport};
pub use setup::Scenario;
