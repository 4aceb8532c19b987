//! Quantum dynamics of a driven electron spin coupled to a register of
//! nuclear spins: pulse protocols, exact propagators, Floquet spectra,
//! adiabatic pulse-spacing sweeps, a Landau-Zener rate model, and
//! quantum-state storage through avoided crossings.

pub mod error;
pub mod floquet;
pub mod linalg;
pub mod lz;
pub mod propagator;
pub mod protocols;
pub mod spin_model;
pub mod state;
pub mod storage;
pub mod sweep;
pub mod units;

pub use error::{CoreError, Result};
pub use num_complex::Complex64;
pub use floquet::{
    circular_gap, default_threshold, floquet_decompose, fold_eigenphases, fold_phase,
    locate_anticrossings, polcpmg_split_pair, scan_spectrum, Ambiguity, Anticrossing,
    BranchLabel, FloquetPoint, FloquetSpectrum, FoldWindow, LocateOptions,
    DEFAULT_OVERLAP_FLOOR, DEGENERACY_FLOOR,
};
pub use linalg::{CMatrix, CVector};
pub use lz::{
    additive_multi_spin, anticrossing_linewidth, delta_tau_for_gamma0, fit_comparison,
    lz_polarization, AdditivePrediction, FitComparison, LzParams,
};
pub use propagator::{
    fast_dense_agreement, ideal_pulse_unitary, one_period_propagator, propagate_state,
    segment_unitary, u2_rotation, Method, Propagator,
};
pub use protocols::{
    build_sequence, protocol_constants, resonance_tau, ProtocolConstants, ProtocolFamily,
    ProtocolSpec, PulseSegment, PulseSequence,
};
pub use spin_model::{
    bath5, cluster3, drive_operator, free_hamiltonian, random_register, registry_labels,
    registry_nucleus, Axis, NuclearSpec, SpinOperators, SpinSystem, MAX_NUCLEI,
};
pub use state::{
    make_initial_state, measure, partial_trace_electron, reinit_electron, ElectronInit,
    NuclearInit, Observables, QuantumState,
};
pub use storage::{
    crossing_pair_map, default_storage_schedule, larmor_wait_time, larmor_z_correction,
    propagate_pure, run_storage, BasisFate, CrossingPairMap, ElectronBranch, NuclearStartState,
    StateFate, StorageResult,
};
pub use sweep::{
    run_repeated_polarization, run_sweep, PolarizationRun, Reinit, RepSummary, StepRecord,
    SweepSchedule, Trajectory,
};
