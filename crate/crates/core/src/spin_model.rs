//! Spin register model: one electron spin-1/2 coupled to nuclear spins.
//!
//! Basis conventions used everywhere in the crate:
//! * Site order: electron first, then nuclei in declaration order. The
//!   electron occupies the most significant bit of the basis index.
//! * Electron states: index 0 = `|0>` (uncoupled branch), index 1 = `|1>`.
//! * Nuclear states: index 0 = up (`I_z = +1/2`), index 1 = down.
//!
//! The free Hamiltonian in the rotating frame of the electron is
//!
//! `H = sum_n [ -omega_L I_z^(n) + P_1 (a_x^(n) I_x^(n) - a_z^(n) I_z^(n)) ]`
//!
//! with `P_1 = |1><1|` on the electron, so the two electron branches rotate
//! each nucleus around `(0, 0, -omega_L)` and `(a_x, 0, -omega_L - a_z)`
//! respectively. Control pulses act on the electron alone via `S_x`/`S_y`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::linalg::{c, cr, identity, kron, CMatrix};
use crate::units::khz_to_rad_per_s;

/// Largest number of nuclear spins a [`SpinSystem`] accepts.
pub const MAX_NUCLEI: usize = 12;

/// One nuclear spin: label plus hyperfine couplings in rad/s.
///
/// `a_x` is the transverse (spin-flipping) coupling, `a_z` the parallel
/// coupling; `a_x` must be non-negative (a negative transverse coupling is
/// gauge-equivalent to a positive one).
#[derive(Debug, Clone, PartialEq)]
pub struct NuclearSpec {
    pub label: String,
    pub a_x: f64,
    pub a_z: f64,
}

impl NuclearSpec {
    pub fn new(label: impl Into<String>, a_x: f64, a_z: f64) -> Result<Self> {
        let label = label.into();
        if !(a_x.is_finite() && a_z.is_finite()) {
            return Err(CoreError::InvalidSystem(format!(
                "nucleus {label}: hyperfine couplings must be finite"
            )));
        }
        if a_x < 0.0 {
            return Err(CoreError::InvalidSystem(format!(
                "nucleus {label}: a_x must be non-negative, got {a_x:.3e}"
            )));
        }
        if label.is_empty() {
            return Err(CoreError::InvalidSystem("nucleus label must be non-empty".into()));
        }
        Ok(Self { label, a_x, a_z })
    }

    /// Convenience constructor taking couplings in kHz.
    pub fn from_khz(label: impl Into<String>, a_x_khz: f64, a_z_khz: f64) -> Result<Self> {
        Self::new(label, khz_to_rad_per_s(a_x_khz), khz_to_rad_per_s(a_z_khz))
    }
}

/// The full register: electron Larmor-frame parameters plus nuclei.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    /// Nuclear Larmor angular frequency in rad/s (positive).
    pub omega_l: f64,
    pub nuclei: Vec<NuclearSpec>,
    /// Magnetic field in tesla, if the system was built from one.
    pub b_field_tesla: Option<f64>,
}

impl SpinSystem {
    pub fn new(omega_l: f64, nuclei: Vec<NuclearSpec>) -> Result<Self> {
        if !(omega_l.is_finite() && omega_l > 0.0) {
            return Err(CoreError::InvalidSystem(format!(
                "omega_l must be positive and finite, got {omega_l:.3e}"
            )));
        }
        if nuclei.is_empty() {
            return Err(CoreError::InvalidSystem("at least one nucleus is required".into()));
        }
        if nuclei.len() > MAX_NUCLEI {
            return Err(CoreError::InvalidSystem(format!(
                "at most {MAX_NUCLEI} nuclei supported, got {}",
                nuclei.len()
            )));
        }
        for (i, a) in nuclei.iter().enumerate() {
            for b in nuclei.iter().skip(i + 1) {
                if a.label == b.label {
                    return Err(CoreError::InvalidSystem(format!(
                        "duplicate nucleus label {:?}",
                        a.label
                    )));
                }
            }
        }
        Ok(Self { omega_l, nuclei, b_field_tesla: None })
    }

    /// Build from a magnetic field, deriving the carbon-13 Larmor frequency.
    pub fn from_field(b_tesla: f64, nuclei: Vec<NuclearSpec>) -> Result<Self> {
        if !(b_tesla.is_finite() && b_tesla > 0.0) {
            return Err(CoreError::InvalidSystem(format!(
                "magnetic field must be positive and finite, got {b_tesla:.3e}"
            )));
        }
        let mut sys = Self::new(crate::units::larmor_from_field(b_tesla), nuclei)?;
        sys.b_field_tesla = Some(b_tesla);
        Ok(sys)
    }

    pub fn n_nuclei(&self) -> usize {
        self.nuclei.len()
    }

    /// Hilbert-space dimension: `2^(n_nuclei + 1)`.
    pub fn dim(&self) -> usize {
        1 << (self.n_nuclei() + 1)
    }
}

/// Axis of a control pulse on the electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// Dense spin operators on the full register Hilbert space.
///
/// Built once per system and shared; all matrices are `dim x dim`.
pub struct SpinOperators {
    pub dim: usize,
    pub n_nuclei: usize,
    /// Electron `[S_x, S_y, S_z]`.
    pub s: [CMatrix; 3],
    /// Projector onto the electron `|1>` branch.
    pub p1: CMatrix,
    /// Per-nucleus `[I_x, I_y, I_z]`, in declaration order.
    pub i_n: Vec<[CMatrix; 3]>,
}

/// Single-site spin-1/2 matrices in the crate's basis (index 0 = up).
fn site_ops() -> [CMatrix; 3] {
    let sx = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(0.5), cr(0.5), cr(0.0)]);
    let sy = CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -0.5), c(0.0, 0.5), cr(0.0)]);
    let sz = CMatrix::from_row_slice(2, 2, &[cr(0.5), cr(0.0), cr(0.0), cr(-0.5)]);
    [sx, sy, sz]
}

/// Embed a single-site operator at `site` (0 = electron) in an
/// `n_sites`-site register.
fn embed(op: &CMatrix, site: usize, n_sites: usize) -> CMatrix {
    let mut out = identity(1);
    for s in 0..n_sites {
        let factor = if s == site { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

impl SpinOperators {
    /// Build all operators for a register with the given nucleus count.
    pub fn build(n_nuclei: usize) -> Self {
        let n_sites = n_nuclei + 1;
        let dim = 1 << n_sites;
        let single = site_ops();
        let s = [
            embed(&single[0], 0, n_sites),
            embed(&single[1], 0, n_sites),
            embed(&single[2], 0, n_sites),
        ];
        let p1_site =
            CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(0.0), cr(1.0)]);
        let p1 = embed(&p1_site, 0, n_sites);
        let i_n = (0..n_nuclei)
            .map(|n| {
                [
                    embed(&single[0], n + 1, n_sites),
                    embed(&single[1], n + 1, n_sites),
                    embed(&single[2], n + 1, n_sites),
                ]
            })
            .collect();
        Self { dim, n_nuclei, s, p1, i_n }
    }

    /// Total nuclear spin projection `sum_n I_z^(n)`.
    pub fn total_nuclear_z(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for ops in &self.i_n {
            m += &ops[2];
        }
        m
    }
}

/// Free Hamiltonian of the register (no drive), in rad/s.
pub fn free_hamiltonian(system: &SpinSystem, ops: &SpinOperators) -> Result<CMatrix> {
    if ops.n_nuclei != system.n_nuclei() {
        return Err(CoreError::DimensionMismatch {
            expected: system.n_nuclei(),
            got: ops.n_nuclei,
        });
    }
    let mut h = CMatrix::zeros(ops.dim, ops.dim);
    for (nuc, i_ops) in system.nuclei.iter().zip(ops.i_n.iter()) {
        h += i_ops[2].map(|z| z * -system.omega_l);
        h += (&ops.p1 * &i_ops[0]).map(|z| z * nuc.a_x);
        h += (&ops.p1 * &i_ops[2]).map(|z| z * -nuc.a_z);
    }
    Ok(h)
}

/// Electron drive operator for a pulse about the given axis.
pub fn drive_operator(axis: Axis, ops: &SpinOperators) -> &CMatrix {
    match axis {
        Axis::X => &ops.s[0],
        Axis::Y => &ops.s[1],
    }
}

/// Hyperfine couplings (kHz) for a small set of carbon-13 sites.
///
/// C1 uses well-characterized values reported for single carbon-13 spins
/// near NV centers in diamond; the remaining sites are representative values
/// spanning the same 20-60 kHz coupling band, chosen so that their dressed
/// resonances stay mutually resolvable.
const REGISTRY_KHZ: [(&str, f64, f64); 7] = [
    ("C1", 26.6, 38.0),
    ("C2", 31.0, 24.0),
    ("C3", 22.5, 52.0),
    ("C4", 24.0, -48.0),
    ("C5", 33.0, -22.0),
    ("C6", 21.5, 10.0),
    ("C7", 28.5, 62.0),
];

/// Look up a registry nucleus by label (`"C1"` through `"C7"`).
pub fn registry_nucleus(label: &str) -> Result<NuclearSpec> {
    REGISTRY_KHZ
        .iter()
        .find(|(l, _, _)| *l == label)
        .map(|(l, ax, az)| NuclearSpec::from_khz(*l, *ax, *az))
        .unwrap_or_else(|| {
            Err(CoreError::InvalidSystem(format!(
                "unknown registry nucleus {label:?}; available: C1..C7"
            )))
        })
}

/// All labels available in the registry.
pub fn registry_labels() -> Vec<&'static str> {
    REGISTRY_KHZ.iter().map(|(l, _, _)| *l).collect()
}

/// Five-spin bath used by the whole-register polarization scenario.
pub fn bath5() -> Vec<NuclearSpec> {
    ["C1", "C4", "C5", "C6", "C7"]
        .iter()
        .map(|l| registry_nucleus(l).expect("registry label"))
        .collect()
}

/// Three-spin cluster with overlapping resonances (C1 plus two near
/// neighbors), used to probe crowding effects.
pub fn cluster3() -> Vec<NuclearSpec> {
    ["C1", "C2", "C3"]
        .iter()
        .map(|l| registry_nucleus(l).expect("registry label"))
        .collect()
}

/// Draw `n` nuclei with couplings uniform in the given rad/s ranges.
/// Labels are `R1..Rn`. `ax_range` must be non-negative.
pub fn random_register(
    n: usize,
    ax_range: (f64, f64),
    az_range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<Vec<NuclearSpec>> {
    if n == 0 || n > MAX_NUCLEI {
        return Err(CoreError::InvalidSystem(format!(
            "random register size must be 1..={MAX_NUCLEI}, got {n}"
        )));
    }
    if !(ax_range.0 <= ax_range.1 && az_range.0 <= az_range.1) {
        return Err(CoreError::InvalidInput("coupling ranges must be ordered (lo, hi)".into()));
    }
    if ax_range.0 < 0.0 {
        return Err(CoreError::InvalidInput("a_x range must be non-negative".into()));
    }
    (0..n)
        .map(|i| {
            let a_x = rng.gen_range(ax_range.0..=ax_range.1);
            let a_z = rng.gen_range(az_range.0..=az_range.1);
            NuclearSpec::new(format!("R{}", i + 1), a_x, a_z)
        })
        .collect()
}

/// Expectation value `tr(rho O)` of a Hermitian operator. Returns the real
/// part; the imaginary part is roundoff for Hermitian `rho` and `O`.
pub fn expectation(rho: &CMatrix, op: &CMatrix) -> f64 {
    (rho * op).trace().re
}

/// Complex trace product `tr(rho O)` (for diagnostics).
pub fn expectation_complex(rho: &CMatrix, op: &CMatrix) -> Complex64 {
    (rho * op).trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermiticity_error, max_abs_diff};
    use crate::units::{khz_to_rad_per_s, TWO_PI};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn site_operators_satisfy_su2_algebra() {
        let ops = SpinOperators::build(2);
        // Electron: [Sx, Sy] = i Sz.
        let lhs = commutator(&ops.s[0], &ops.s[1]);
        let rhs = ops.s[2].map(|z| z * c(0.0, 1.0));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
        // Each nucleus likewise.
        for i_ops in &ops.i_n {
            let lhs = commutator(&i_ops[0], &i_ops[1]);
            let rhs = i_ops[2].map(|z| z * c(0.0, 1.0));
            assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
        }
        // Different sites commute.
        assert!(max_abs_diff(
            &commutator(&ops.s[0], &ops.i_n[1][1]),
            &CMatrix::zeros(ops.dim, ops.dim)
        ) < 1e-14);
        assert!(max_abs_diff(
            &commutator(&ops.i_n[0][2], &ops.i_n[1][0]),
            &CMatrix::zeros(ops.dim, ops.dim)
        ) < 1e-14);
    }

    #[test]
    fn projector_is_idempotent_and_acts_on_electron() {
        let ops = SpinOperators::build(1);
        assert!(max_abs_diff(&(&ops.p1 * &ops.p1), &ops.p1) < 1e-14);
        // P1 + P0 = 1 with P0 = 1 - P1; P1 S_z = -1/2 P1.
        let prod = &ops.p1 * &ops.s[2];
        let expected = ops.p1.map(|z| z * -0.5);
        assert!(max_abs_diff(&prod, &expected) < 1e-14);
    }

    #[test]
    fn free_hamiltonian_is_hermitian_with_expected_diagonal() {
        let n = 3;
        let nuclei: Vec<NuclearSpec> = (0..n)
            .map(|i| NuclearSpec::from_khz(format!("N{i}"), 25.0 + i as f64, 10.0 * i as f64).unwrap())
            .collect();
        let omega_l = khz_to_rad_per_s(431.5);
        let system = SpinSystem::new(omega_l, nuclei).unwrap();
        let ops = SpinOperators::build(n);
        let h = free_hamiltonian(&system, &ops).unwrap();
        assert!(hermiticity_error(&h) < 1e-9);
        // |0, down...down> is the last state of the electron-|0> block:
        // index 2^n - 1. Each down nucleus contributes +omega_l/2 and the
        // hyperfine terms vanish in the |0> branch.
        let idx = (1 << n) - 1;
        let diag = h[(idx, idx)];
        assert_relative_eq!(diag.re, n as f64 * omega_l / 2.0, epsilon = 1e-6);
        assert!(diag.im.abs() < 1e-12);
    }

    #[test]
    fn hyperfine_couples_up_down_in_branch_one_only() {
        let a_x = khz_to_rad_per_s(26.6);
        let a_z = khz_to_rad_per_s(38.0);
        let system = SpinSystem::new(
            khz_to_rad_per_s(431.5),
            vec![NuclearSpec::new("C1", a_x, a_z).unwrap()],
        )
        .unwrap();
        let ops = SpinOperators::build(1);
        let h = free_hamiltonian(&system, &ops).unwrap();
        // Basis order: |0 up>, |0 down>, |1 up>, |1 down>.
        assert!(h[(0, 1)].norm() < 1e-12, "no coupling in electron |0> branch");
        assert_relative_eq!(h[(2, 3)].re, a_x / 2.0, epsilon = 1e-9);
        // Branch |1> diagonal: -+(omega_l + a_z)/2 for up/down.
        assert_relative_eq!(h[(2, 2)].re, -(system.omega_l + a_z) / 2.0, epsilon = 1e-6);
        assert_relative_eq!(h[(3, 3)].re, (system.omega_l + a_z) / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn from_field_reproduces_nominal_larmor_frequency() {
        let sys = SpinSystem::from_field(0.0403, vec![NuclearSpec::from_khz("C1", 26.6, 38.0).unwrap()])
            .unwrap();
        let freq_khz = sys.omega_l / TWO_PI / 1e3;
        assert_relative_eq!(freq_khz, 431.5, max_relative = 2e-4);
        assert_eq!(sys.b_field_tesla, Some(0.0403));
    }

    #[test]
    fn system_validation_rejects_bad_inputs() {
        let good = NuclearSpec::from_khz("C1", 26.6, 38.0).unwrap();
        assert!(SpinSystem::new(-1.0, vec![good.clone()]).is_err());
        assert!(SpinSystem::new(1.0, vec![]).is_err());
        let many: Vec<NuclearSpec> = (0..MAX_NUCLEI + 1)
            .map(|i| NuclearSpec::from_khz(format!("N{i}"), 20.0, 0.0).unwrap())
            .collect();
        assert!(SpinSystem::new(1.0, many).is_err());
        assert!(SpinSystem::new(1.0, vec![good.clone(), good.clone()]).is_err());
        assert!(NuclearSpec::from_khz("bad", -5.0, 0.0).is_err());
    }

    #[test]
    fn registry_has_expected_entries() {
        let c1 = registry_nucleus("C1").unwrap();
        assert_relative_eq!(c1.a_x, khz_to_rad_per_s(26.6), epsilon = 1e-9);
        assert_relative_eq!(c1.a_z, khz_to_rad_per_s(38.0), epsilon = 1e-9);
        assert!(registry_nucleus("C99").is_err());
        assert_eq!(registry_labels().len(), 7);
        assert_eq!(bath5().len(), 5);
        assert_eq!(cluster3().len(), 3);
        // Every registry a_x lies in the 20-60 kHz band.
        for label in registry_labels() {
            let n = registry_nucleus(label).unwrap();
            let ax_khz = n.a_x / TWO_PI / 1e3;
            assert!((20.0..=60.0).contains(&ax_khz), "{label}: {ax_khz}");
        }
    }

    #[test]
    fn random_register_is_seeded_and_in_range() {
        let lo = khz_to_rad_per_s(20.0);
        let hi = khz_to_rad_per_s(60.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reg = random_register(4, (lo, hi), (-hi, hi), &mut rng).unwrap();
        assert_eq!(reg.len(), 4);
        assert_eq!(reg[0].label, "R1");
        assert_eq!(reg[3].label, "R4");
        for n in &reg {
            assert!(n.a_x >= lo && n.a_x <= hi);
            assert!(n.a_z >= -hi && n.a_z <= hi);
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let reg2 = random_register(4, (lo, hi), (-hi, hi), &mut rng2).unwrap();
        assert_eq!(reg, reg2, "same seed must give the same register");
    }
}
