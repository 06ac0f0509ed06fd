//! Dark-state addressing of neutral atoms in a coupling standing wave.

pub mod density;
pub mod dressed;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod master;
pub mod protocols;
pub mod pulses;
pub mod units;

pub use density::DensityMatrix;
pub use dressed::{
    dark_state, dressed_eigensystem, mixing_angles, transfer_fwhm_estimate, DressedEigensystem,
    DressedStates, MixingAngles,
};
pub use environment::{
    convolve_profile, crosstalk_delta, dipole_field, ground_state_sigma, DipoleSource,
    PerturbationPair, Polarization, TrapModel,
};
pub use error::CoreError;
pub use geometry::{standing_wave_rabi, LatticeGeometry, StandingWave};
pub use master::{
    build_rhs, evolve, scattered_photons, step_rk4, DriveSnapshot, LevelScheme, StarkMode,
    Trajectory,
};
pub use protocols::{
    neighbor_crosstalk, phase_gate_scan, readout_scan, stark_effective_shift, DetectionModel,
    QubitArrayContext, ScanGrid, ScanProfile, SimOptions,
};
pub use pulses::{
    envelope_value, phase_gate_schedule, readout_schedule, PhaseGateParams, PulseEnvelope,
    PulseSchedule, ReadoutParams,
};
pub use units::{Detuning, RabiFrequency};
