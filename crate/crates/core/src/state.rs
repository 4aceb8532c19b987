//! Density-matrix states of the register and the standard observables.
//!
//! States are full density matrices (mixed nuclear baths are first-class).
//! Initial states are products of an electron state and a nuclear product
//! state; the observables are the electron coherence `L = 2<S_x>`, the mean
//! nuclear polarization `P = (1/N) sum_n 2<I_z^(n)>`, the total projection
//! `M_z = sum_n <I_z^(n)>`, and the register purity.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::{cr, hermiticity_error, kron, CMatrix, CVector};
use crate::spin_model::SpinOperators;

/// Tolerance on `|tr(rho) - 1|` and Hermiticity of a valid state.
pub const STATE_TRACE_TOL: f64 = 1e-10;
/// A state is positive semidefinite if its smallest eigenvalue exceeds this.
pub const STATE_PSD_FLOOR: f64 = -1e-9;

/// Density matrix of the full register.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub(crate) rho: CMatrix,
}

impl QuantumState {
    /// Wrap a density matrix, checking Hermiticity, unit trace, and
    /// positive semidefiniteness.
    pub fn new(rho: CMatrix) -> Result<Self> {
        let state = Self::new_cheap(rho)?;
        state.check_positive()?;
        Ok(state)
    }

    /// Wrap a density matrix checking only Hermiticity and unit trace
    /// (positivity checks cost an eigendecomposition; see
    /// [`QuantumState::check_positive`]).
    pub fn new_cheap(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() || !rho.nrows().is_power_of_two() || rho.nrows() < 4 {
            return Err(CoreError::InvalidInput(format!(
                "state dimension must be a power of two >= 4, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let herm = hermiticity_error(&rho);
        if herm > STATE_TRACE_TOL {
            return Err(CoreError::invariant(format!(
                "state not Hermitian: max |rho - rho^dag| = {herm:.3e}"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(CoreError::invariant(format!(
                "state trace deviates from 1: tr = {:.12} + {:.3e} i",
                tr.re, tr.im
            )));
        }
        Ok(Self { rho })
    }

    /// Pure state from a normalized state vector.
    pub fn from_pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidInput(format!(
                "state vector not normalized: |psi| = {norm:.12}"
            )));
        }
        let rho = psi * psi.adjoint();
        Self::new_cheap(rho)
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Number of nuclei implied by the dimension.
    pub fn n_nuclei(&self) -> usize {
        self.dim().trailing_zeros() as usize - 1
    }

    /// `tr(rho^2)`, real part (1 for pure states). For Hermitian `rho` this
    /// is the squared Frobenius norm, so no matrix product is needed.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Expectation value of a Hermitian operator, via
    /// `tr(rho op) = sum_ij rho_ij op_ji` (quadratic, not cubic, cost).
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        let n = self.rho.nrows();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.rho[(i, j)] * op[(j, i)];
            }
        }
        acc.re
    }

    /// Verify positive semidefiniteness (smallest eigenvalue above the
    /// floor). Costs an eigendecomposition.
    pub fn check_positive(&self) -> Result<()> {
        let (values, _) = crate::linalg::hermitian_eigen(&self.rho)?;
        let min = values.first().copied().unwrap_or(0.0);
        if min < STATE_PSD_FLOOR {
            return Err(CoreError::invariant(format!(
                "state not positive semidefinite: min eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Initial electron state.
#[derive(Debug, Clone, PartialEq)]
pub enum ElectronInit {
    /// `|0>` (uncoupled branch).
    Ket0,
    /// `|1>` (hyperfine-coupled branch).
    Ket1,
    /// `(|0> + |1>)/sqrt(2)`.
    XPlus,
    /// `(|0> - |1>)/sqrt(2)`.
    XMinus,
    /// `a|0> + b|1>`; must be normalized within 1e-9.
    Custom { a: Complex64, b: Complex64 },
}

impl ElectronInit {
    /// The electron state vector `(amplitude on |0>, amplitude on |1>)`.
    pub fn vector(&self) -> Result<CVector> {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = match self {
            ElectronInit::Ket0 => (cr(1.0), cr(0.0)),
            ElectronInit::Ket1 => (cr(0.0), cr(1.0)),
            ElectronInit::XPlus => (cr(inv_sqrt2), cr(inv_sqrt2)),
            ElectronInit::XMinus => (cr(inv_sqrt2), cr(-inv_sqrt2)),
            ElectronInit::Custom { a, b } => (*a, *b),
        };
        let v = CVector::from_vec(vec![a, b]);
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidInput(format!(
                "electron amplitudes not normalized: |(a,b)| = {:.12}",
                v.norm()
            )));
        }
        Ok(v)
    }

    /// The electron density matrix.
    pub fn density(&self) -> Result<CMatrix> {
        let v = self.vector()?;
        Ok(&v * v.adjoint())
    }
}

/// Initial nuclear product state.
#[derive(Debug, Clone, PartialEq)]
pub enum NuclearInit {
    /// Every nucleus in `I_z = +1/2`.
    AllUp,
    /// Every nucleus in `I_z = -1/2`.
    AllDown,
    /// Every nucleus maximally mixed.
    MaximallyMixed,
    /// Per-nucleus `(up, down)` amplitudes, one pair per nucleus.
    CustomProduct(Vec<(Complex64, Complex64)>),
}

impl NuclearInit {
    /// Density matrix of the nuclear product state for `n` nuclei.
    pub fn density(&self, n_nuclei: usize) -> Result<CMatrix> {
        let single: Vec<CMatrix> = match self {
            NuclearInit::AllUp => {
                vec![CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(0.0)]); n_nuclei]
            }
            NuclearInit::AllDown => {
                vec![CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(0.0), cr(1.0)]); n_nuclei]
            }
            NuclearInit::MaximallyMixed => {
                vec![CMatrix::from_row_slice(2, 2, &[cr(0.5), cr(0.0), cr(0.0), cr(0.5)]); n_nuclei]
            }
            NuclearInit::CustomProduct(amps) => {
                if amps.len() != n_nuclei {
                    return Err(CoreError::DimensionMismatch {
                        expected: n_nuclei,
                        got: amps.len(),
                    });
                }
                amps.iter()
                    .map(|(up, down)| {
                        let v = CVector::from_vec(vec![*up, *down]);
                        if (v.norm() - 1.0).abs() > 1e-9 {
                            return Err(CoreError::InvalidInput(format!(
                                "nuclear amplitudes not normalized: |(up,down)| = {:.12}",
                                v.norm()
                            )));
                        }
                        Ok(&v * v.adjoint())
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut rho = crate::linalg::identity(1);
        for m in &single {
            rho = kron(&rho, m);
        }
        Ok(rho)
    }
}

/// Product state `electron (x) nuclei`.
pub fn make_initial_state(
    electron: &ElectronInit,
    nuclear: &NuclearInit,
    n_nuclei: usize,
) -> Result<QuantumState> {
    if n_nuclei == 0 {
        return Err(CoreError::InvalidInput("register needs at least one nucleus".into()));
    }
    let rho = kron(&electron.density()?, &nuclear.density(n_nuclei)?);
    QuantumState::new_cheap(rho)
}

/// Trace out the electron, leaving the nuclear density matrix.
pub fn partial_trace_electron(rho: &CMatrix) -> CMatrix {
    let half = rho.nrows() / 2;
    let block00 = rho.view((0, 0), (half, half));
    let block11 = rho.view((half, half), (half, half));
    block00 + block11
}

/// Replace the electron state, keeping the nuclear marginal:
/// `rho -> target (x) tr_e(rho)`.
pub fn reinit_electron(state: &QuantumState, target: &ElectronInit) -> Result<QuantumState> {
    let nuclear = partial_trace_electron(&state.rho);
    QuantumState::new_cheap(kron(&target.density()?, &nuclear))
}

/// Standard observables of a register state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// Electron coherence `L = 2<S_x>`, in `[-1, 1]`.
    pub coherence: f64,
    /// Mean nuclear polarization `P = (1/N) sum_n 2<I_z^(n)>`, in `[-1, 1]`.
    pub polarization: f64,
    /// Total nuclear projection `M_z = sum_n <I_z^(n)>`.
    pub m_z: f64,
    /// Per-nucleus `2<I_z^(n)>`, in declaration order.
    pub per_spin_two_iz: Vec<f64>,
    /// Register purity `tr(rho^2)`.
    pub purity: f64,
}

/// Measure the standard observables.
pub fn measure(state: &QuantumState, ops: &SpinOperators) -> Result<Observables> {
    if ops.dim != state.dim() {
        return Err(CoreError::DimensionMismatch { expected: ops.dim, got: state.dim() });
    }
    let per_spin_two_iz: Vec<f64> =
        ops.i_n.iter().map(|i| 2.0 * state.expectation(&i[2])).collect();
    let n = per_spin_two_iz.len() as f64;
    let polarization = per_spin_two_iz.iter().sum::<f64>() / n;
    let m_z = per_spin_two_iz.iter().sum::<f64>() / 2.0;
    Ok(Observables {
        coherence: 2.0 * state.expectation(&ops.s[0]),
        polarization,
        m_z,
        per_spin_two_iz,
        purity: state.purity(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use approx::assert_relative_eq;

    #[test]
    fn initial_states_have_expected_observables() {
        let ops = SpinOperators::build(3);
        let st = make_initial_state(&ElectronInit::XPlus, &NuclearInit::AllDown, 3).unwrap();
        let obs = measure(&st, &ops).unwrap();
        assert_relative_eq!(obs.coherence, 1.0, epsilon = 1e-12);
        assert_relative_eq!(obs.polarization, -1.0, epsilon = 1e-12);
        assert_relative_eq!(obs.m_z, -1.5, epsilon = 1e-12);
        assert_relative_eq!(obs.purity, 1.0, epsilon = 1e-12);

        let st = make_initial_state(&ElectronInit::Ket0, &NuclearInit::MaximallyMixed, 3).unwrap();
        let obs = measure(&st, &ops).unwrap();
        assert_relative_eq!(obs.coherence, 0.0, epsilon = 1e-12);
        assert_relative_eq!(obs.polarization, 0.0, epsilon = 1e-12);
        // Purity of |psi><psi| (x) (1/2)^3.
        assert_relative_eq!(obs.purity, 0.125, epsilon = 1e-12);
        assert_relative_eq!(2.0 * st.expectation(&ops.s[2]), 1.0, epsilon = 1e-12);

        let st = make_initial_state(&ElectronInit::XMinus, &NuclearInit::AllUp, 3).unwrap();
        let obs = measure(&st, &ops).unwrap();
        assert_relative_eq!(obs.coherence, -1.0, epsilon = 1e-12);
        assert_relative_eq!(obs.polarization, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn custom_states_validate_normalization() {
        let bad = ElectronInit::Custom { a: cr(1.0), b: cr(1.0) };
        assert!(make_initial_state(&bad, &NuclearInit::AllDown, 1).is_err());
        let good = ElectronInit::Custom {
            a: cr(1.0 / 5.0_f64.sqrt()),
            b: cr(2.0 / 5.0_f64.sqrt()),
        };
        let st = make_initial_state(&good, &NuclearInit::AllDown, 1).unwrap();
        // |0, up> is unoccupied; |a|^2 = 1/5 sits on |0, down>.
        assert_relative_eq!(st.rho()[(0, 0)].re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(st.rho()[(1, 1)].re, 0.2, epsilon = 1e-12);
        // |b|^2 = 4/5 sits on the |1, down> diagonal entry.
        assert_relative_eq!(st.rho()[(3, 3)].re, 0.8, epsilon = 1e-12);
        assert!(NuclearInit::CustomProduct(vec![(cr(0.5), cr(0.5))]).density(1).is_err());
        assert!(NuclearInit::CustomProduct(vec![]).density(1).is_err());
    }

    #[test]
    fn reinit_preserves_nuclear_marginal() {
        let st = make_initial_state(&ElectronInit::XPlus, &NuclearInit::AllDown, 2).unwrap();
        let re = reinit_electron(&st, &ElectronInit::XMinus).unwrap();
        let ops = SpinOperators::build(2);
        let before = measure(&st, &ops).unwrap();
        let after = measure(&re, &ops).unwrap();
        assert_relative_eq!(after.coherence, -1.0, epsilon = 1e-12);
        assert_eq!(before.per_spin_two_iz.len(), after.per_spin_two_iz.len());
        for (b, a) in before.per_spin_two_iz.iter().zip(after.per_spin_two_iz.iter()) {
            assert_relative_eq!(b, a, epsilon = 1e-12);
        }
        let nuc = partial_trace_electron(re.rho());
        assert_relative_eq!(nuc.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn state_validation_catches_violations() {
        // Non-unit trace.
        let rho = CMatrix::identity(4, 4);
        assert!(QuantumState::new_cheap(rho).is_err());
        // Non-Hermitian.
        let mut rho = CMatrix::zeros(4, 4);
        rho[(0, 0)] = cr(1.0);
        rho[(0, 1)] = cr(0.5);
        assert!(QuantumState::new_cheap(rho).is_err());
        // Hermitian, unit trace, but not PSD.
        let mut rho = CMatrix::zeros(4, 4);
        rho[(0, 0)] = cr(1.5);
        rho[(1, 1)] = cr(-0.5);
        assert!(QuantumState::new_cheap(rho.clone()).is_ok());
        assert!(QuantumState::new(rho).is_err());
    }

    #[test]
    fn purity_and_pure_state_roundtrip() {
        let psi = CVector::from_vec(vec![cr(0.6), cr(0.0), cr(0.8), cr(0.0)]);
        let st = QuantumState::from_pure(&psi).unwrap();
        assert_relative_eq!(st.purity(), 1.0, epsilon = 1e-12);
        let rebuilt = &psi * psi.adjoint();
        assert!(max_abs_diff(st.rho(), &rebuilt) < 1e-15);
    }
}
