//! Stroboscopic propagators: one protocol period as a unitary matrix.
//!
//! Free evolution has two implementations that must agree to 1e-10:
//! * a fast path that exploits the block structure of the free Hamiltonian
//!   (each electron branch rotates every nucleus independently, so the
//!   propagator is a direct sum of nuclear tensor products of 2x2
//!   rotations), and
//! * a dense path through the Hermitian matrix exponential.
//!
//! Ideal pulses are exact electron rotations; drawn-out pulses exponentiate
//! `H_free + (angle/duration) S_axis` and therefore always use the dense
//! path.


use crate::error::{CoreError, Result};
use crate::linalg::{
    c, cr, determinant, expm_hermitian, identity, kron, max_abs_diff, unitarity_error,
    unitary_power, CMatrix,
};
use crate::protocols::{PulseSegment, PulseSequence};
use crate::spin_model::{drive_operator, free_hamiltonian, Axis, SpinOperators, SpinSystem};
use crate::state::QuantumState;

/// Tolerance on `|U^dag U - 1|` and `||det U| - 1|` for a valid propagator.
pub const UNITARITY_TOL: f64 = 1e-10;

/// How free-evolution segments are exponentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Per-branch 2x2 factorization (default; exact and fast).
    #[default]
    Fast,
    /// Dense Hermitian matrix exponential of the full free Hamiltonian.
    Dense,
}

/// One-period propagator at a fixed pulse spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: CMatrix,
    /// Pulse spacing the sequence was built at (seconds).
    pub tau: f64,
    /// Protocol period (seconds).
    pub period: f64,
}

impl Propagator {
    /// Wrap a matrix as a propagator, verifying unitarity and
    /// unit-modulus determinant.
    pub fn new(matrix: CMatrix, tau: f64, period: f64) -> Result<Self> {
        let uerr = unitarity_error(&matrix);
        if uerr > UNITARITY_TOL {
            return Err(CoreError::invariant(format!(
                "propagator not unitary at tau = {tau:.6e} s: max |U^dag U - 1| = {uerr:.3e}"
            )));
        }
        let det_dev = (determinant(&matrix).norm() - 1.0).abs();
        if det_dev > UNITARITY_TOL {
            return Err(CoreError::invariant(format!(
                "propagator determinant off the unit circle at tau = {tau:.6e} s: \
                 ||det| - 1| = {det_dev:.3e}"
            )));
        }
        Ok(Self { matrix, tau, period })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// 2x2 rotation `exp(-i (v . sigma) t / 2)` generated by `H = v . I`
/// (spin-1/2 operators `I = sigma/2`).
pub fn u2_rotation(v: [f64; 3], t: f64) -> CMatrix {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let half = norm * t / 2.0;
    if half == 0.0 {
        return identity(2);
    }
    let (s, co) = half.sin_cos();
    let (nx, ny, nz) = (v[0] / norm, v[1] / norm, v[2] / norm);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(co, -s * nz),
            c(-s * ny, -s * nx),
            c(s * ny, -s * nx),
            c(co, s * nz),
        ],
    )
}

/// Rotation vector (rad/s) each electron branch applies to the nucleus.
fn branch_vectors(system: &SpinSystem, nucleus: usize) -> ([f64; 3], [f64; 3]) {
    let nuc = &system.nuclei[nucleus];
    let branch0 = [0.0, 0.0, -system.omega_l];
    let branch1 = [nuc.a_x, 0.0, -system.omega_l - nuc.a_z];
    (branch0, branch1)
}

/// Free propagator via the per-branch factorization: a direct sum (over the
/// electron state) of tensor products of per-nucleus 2x2 rotations.
pub fn free_unitary_fast(system: &SpinSystem, t: f64) -> CMatrix {
    let mut u0 = identity(1);
    let mut u1 = identity(1);
    for n in 0..system.n_nuclei() {
        let (v0, v1) = branch_vectors(system, n);
        u0 = kron(&u0, &u2_rotation(v0, t));
        u1 = kron(&u1, &u2_rotation(v1, t));
    }
    let half = u0.nrows();
    let mut u = CMatrix::zeros(2 * half, 2 * half);
    u.view_mut((0, 0), (half, half)).copy_from(&u0);
    u.view_mut((half, half), (half, half)).copy_from(&u1);
    u
}

/// Free propagator via the dense Hermitian exponential.
pub fn free_unitary_dense(system: &SpinSystem, ops: &SpinOperators, t: f64) -> Result<CMatrix> {
    let h = free_hamiltonian(system, ops)?;
    expm_hermitian(&h, t)
}

/// Exact instantaneous electron rotation `exp(-i angle S_axis)`.
pub fn ideal_pulse_unitary(axis: Axis, angle: f64, n_nuclei: usize) -> CMatrix {
    let half_angle = angle / 2.0;
    let (s, co) = half_angle.sin_cos();
    let u2 = match axis {
        Axis::X => CMatrix::from_row_slice(2, 2, &[cr(co), c(0.0, -s), c(0.0, -s), cr(co)]),
        Axis::Y => CMatrix::from_row_slice(2, 2, &[cr(co), cr(-s), cr(s), cr(co)]),
    };
    kron(&u2, &identity(1 << n_nuclei))
}

/// Unitary for a single segment.
pub fn segment_unitary(
    segment: &PulseSegment,
    system: &SpinSystem,
    ops: &SpinOperators,
    method: Method,
) -> Result<CMatrix> {
    match *segment {
        PulseSegment::Free { duration } => match method {
            Method::Fast => Ok(free_unitary_fast(system, duration)),
            Method::Dense => free_unitary_dense(system, ops, duration),
        },
        PulseSegment::Pulse { duration, axis, angle } => {
            if duration == 0.0 {
                Ok(ideal_pulse_unitary(axis, angle, system.n_nuclei()))
            } else {
                // Drawn-out pulse: constant drive at angle/duration on top of
                // the free Hamiltonian.
                let mut h = free_hamiltonian(system, ops)?;
                let rabi = angle / duration;
                h += drive_operator(axis, ops).map(|z| z * rabi);
                expm_hermitian(&h, duration)
            }
        }
    }
}

/// Time-ordered product of all segment unitaries over one period
/// (the latest segment is the leftmost factor).
pub fn one_period_propagator(
    system: &SpinSystem,
    ops: &SpinOperators,
    sequence: &PulseSequence,
    method: Method,
) -> Result<Propagator> {
    if ops.n_nuclei != system.n_nuclei() {
        return Err(CoreError::DimensionMismatch {
            expected: system.n_nuclei(),
            got: ops.n_nuclei,
        });
    }
    let mut u = identity(ops.dim);
    for segment in &sequence.segments {
        u = segment_unitary(segment, system, ops, method)? * u;
    }
    Propagator::new(u, sequence.tau, sequence.period)
}

/// Apply `n_periods` periods to a state: `rho -> U^n rho U^dag^n` with the
/// power formed by repeated squaring. The output trace is re-verified.
pub fn propagate_state(
    state: &QuantumState,
    propagator: &Propagator,
    n_periods: u64,
) -> Result<QuantumState> {
    if propagator.dim() != state.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: propagator.dim(),
            got: state.dim(),
        });
    }
    let un = unitary_power(&propagator.matrix, n_periods);
    let rho = &un * state.rho() * un.adjoint();
    QuantumState::new_cheap(rho)
}

/// Convenience check that the fast and dense free paths agree for this
/// system over one period of the given sequence.
pub fn fast_dense_agreement(
    system: &SpinSystem,
    ops: &SpinOperators,
    sequence: &PulseSequence,
) -> Result<f64> {
    let fast = one_period_propagator(system, ops, sequence, Method::Fast)?;
    let dense = one_period_propagator(system, ops, sequence, Method::Dense)?;
    Ok(max_abs_diff(&fast.matrix, &dense.matrix))
}
