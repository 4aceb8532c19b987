//! Pulse protocols: CPMG, PolCPMG, and PulsePol as one-period sequences.
//!
//! A sequence is a time-ordered list of segments (first element happens
//! first). CPMG-family protocols use the symmetric unit cell
//! `[tau/2, pulse, tau, pulse, tau/2]` with period `2 tau`; PulsePol uses
//! four composite blocks with period `4 tau`.
//!
//! With `t_pi > 0` every pulse is drawn out to duration `t_pi` (drive
//! strength `angle / t_pi`), centered on its ideal instant, and the free
//! intervals shrink so the period is unchanged.

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::spin_model::{Axis, SpinSystem};

/// One element of a pulse sequence, in time order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSegment {
    /// Free evolution under the register Hamiltonian.
    Free { duration: f64 },
    /// Electron rotation by `angle` about `axis`. `duration = 0` means an
    /// ideal (instantaneous) pulse; otherwise the drive strength is
    /// `angle / duration`.
    Pulse { duration: f64, axis: Axis, angle: f64 },
}

impl PulseSegment {
    pub fn duration(&self) -> f64 {
        match *self {
            PulseSegment::Free { duration } => duration,
            PulseSegment::Pulse { duration, .. } => duration,
        }
    }
}

/// Protocol family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFamily {
    Cpmg,
    PolCpmg,
    PulsePol,
}

impl std::fmt::Display for ProtocolFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolFamily::Cpmg => write!(f, "cpmg"),
            ProtocolFamily::PolCpmg => write!(f, "polcpmg"),
            ProtocolFamily::PulsePol => write!(f, "pulsepol"),
        }
    }
}

/// Protocol parameters: family, over-rotation, and pulse duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub family: ProtocolFamily,
    /// Deliberate over-rotation of the refocusing pulses (PolCPMG only);
    /// pulse angle is `pi + delta_theta`.
    pub delta_theta: f64,
    /// Pulse duration in seconds; zero selects ideal instantaneous pulses.
    pub t_pi: f64,
}

impl ProtocolSpec {
    pub fn new(family: ProtocolFamily, delta_theta: f64, t_pi: f64) -> Result<Self> {
        if !delta_theta.is_finite() || delta_theta.abs() >= PI / 2.0 {
            return Err(CoreError::InvalidProtocol(format!(
                "|delta_theta| must be < pi/2, got {delta_theta:.6}"
            )));
        }
        if family != ProtocolFamily::PolCpmg && delta_theta != 0.0 {
            return Err(CoreError::InvalidProtocol(format!(
                "delta_theta must be 0 for {family}, got {delta_theta:.6}"
            )));
        }
        if !t_pi.is_finite() || t_pi < 0.0 {
            return Err(CoreError::InvalidProtocol(format!(
                "t_pi must be >= 0, got {t_pi:.3e}"
            )));
        }
        Ok(Self { family, delta_theta, t_pi })
    }

    /// Ideal-pulse protocol with no over-rotation.
    pub fn ideal(family: ProtocolFamily) -> Self {
        Self { family, delta_theta: 0.0, t_pi: 0.0 }
    }

    /// PolCPMG with the given over-rotation and ideal pulses.
    pub fn polcpmg(delta_theta: f64) -> Result<Self> {
        Self::new(ProtocolFamily::PolCpmg, delta_theta, 0.0)
    }

    pub fn is_ideal(&self) -> bool {
        self.t_pi == 0.0
    }
}

/// One protocol period as a time-ordered segment list.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    /// Period in seconds: `2 tau` for CPMG-family, `4 tau` for PulsePol.
    pub period: f64,
    /// Pulse-spacing parameter the sequence was built at.
    pub tau: f64,
}

impl PulseSequence {
    pub fn n_pulses(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, PulseSegment::Pulse { .. }))
            .count()
    }

    /// Sum of all pulse rotation angles in one period.
    pub fn total_pulse_angle(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                PulseSegment::Pulse { angle, .. } => *angle,
                PulseSegment::Free { .. } => 0.0,
            })
            .sum()
    }

    /// Sum of all segment durations; equals `period` by construction.
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration()).sum()
    }

    /// Distance of the total pulse angle from the nearest integer multiple
    /// of pi. Zero for protocols with the echo property (CPMG, PulsePol);
    /// equals `|2 delta_theta|` folded into `[-pi/2, pi/2]` for PolCPMG,
    /// whose over-rotation deliberately breaks the echo.
    pub fn echo_defect(&self) -> f64 {
        let total = self.total_pulse_angle();
        let multiples = total / PI;
        (multiples - multiples.round()).abs() * PI
    }
}

/// Build one period of the protocol at pulse spacing `tau`.
pub fn build_sequence(spec: &ProtocolSpec, tau: f64) -> Result<PulseSequence> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(CoreError::InvalidProtocol(format!(
            "tau must be positive and finite, got {tau:.3e}"
        )));
    }
    let t_pi = spec.t_pi;
    let segments = match spec.family {
        ProtocolFamily::Cpmg | ProtocolFamily::PolCpmg => {
            let theta = PI + spec.delta_theta;
            if tau - t_pi < 0.0 {
                return Err(CoreError::InvalidProtocol(format!(
                    "pulses overlap: t_pi = {t_pi:.3e} s exceeds tau = {tau:.3e} s"
                )));
            }
            let pulse = PulseSegment::Pulse { duration: t_pi, axis: Axis::X, angle: theta };
            vec![
                PulseSegment::Free { duration: (tau - t_pi) / 2.0 },
                pulse,
                PulseSegment::Free { duration: tau - t_pi },
                pulse,
                PulseSegment::Free { duration: (tau - t_pi) / 2.0 },
            ]
        }
        ProtocolFamily::PulsePol => {
            // Gap between drawn-out pulses: each tau/2 interval loses half a
            // pi-pulse on one side and one half-pulse plus half of an
            // adjacent half-pulse chain on the other: 3 t_pi / 2 in total.
            let gap = tau / 2.0 - 1.5 * t_pi;
            if gap < 0.0 {
                return Err(CoreError::InvalidProtocol(format!(
                    "pulses overlap: t_pi = {t_pi:.3e} s exceeds tau/3 = {:.3e} s",
                    tau / 3.0
                )));
            }
            let p = |axis, angle| PulseSegment::Pulse { duration: t_pi, axis, angle };
            let f = PulseSegment::Free { duration: gap };
            let b1 = [p(Axis::Y, PI / 2.0), f, p(Axis::X, PI), f, p(Axis::Y, PI / 2.0)];
            let b2 = [p(Axis::X, PI / 2.0), f, p(Axis::Y, PI), f, p(Axis::X, PI / 2.0)];
            b1.iter()
                .chain(b2.iter())
                .chain(b1.iter())
                .chain(b2.iter())
                .copied()
                .collect()
        }
    };
    let period = protocol_constants(spec).t_r_factor * tau;
    Ok(PulseSequence { segments, period, tau })
}

/// Resonant pulse spacing for the `j`-th harmonic of the given nucleus.
///
/// CPMG-family: `tau_r = j pi / (omega_L + a_z/2)`. PulsePol:
/// `tau_r = j pi / (2 omega_L)` (independent of the nucleus couplings).
/// `j` must be odd and >= 1.
pub fn resonance_tau(
    spec: &ProtocolSpec,
    system: &SpinSystem,
    nucleus: usize,
    j: u32,
) -> Result<f64> {
    if j == 0 || j % 2 == 0 {
        return Err(CoreError::InvalidProtocol(format!(
            "harmonic j must be an odd integer >= 1, got {j}"
        )));
    }
    let nuc = system.nuclei.get(nucleus).ok_or_else(|| CoreError::InvalidInput(format!(
        "nucleus index {nucleus} out of range (register has {})",
        system.n_nuclei()
    )))?;
    let jf = f64::from(j);
    Ok(match spec.family {
        ProtocolFamily::Cpmg | ProtocolFamily::PolCpmg => {
            jf * PI / (system.omega_l + nuc.a_z / 2.0)
        }
        ProtocolFamily::PulsePol => jf * PI / (2.0 * system.omega_l),
    })
}

/// Protocol-dependent constants entering the adiabaticity analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConstants {
    /// Dimensionless slope constant: `pi + delta_theta` for CPMG-family,
    /// `6 pi / (2 + sqrt(2))` for PulsePol.
    pub beta: f64,
    /// Period in units of tau: 2 for CPMG-family, 4 for PulsePol.
    pub t_r_factor: f64,
}

pub fn protocol_constants(spec: &ProtocolSpec) -> ProtocolConstants {
    match spec.family {
        ProtocolFamily::Cpmg | ProtocolFamily::PolCpmg => ProtocolConstants {
            beta: PI + spec.delta_theta,
            t_r_factor: 2.0,
        },
        ProtocolFamily::PulsePol => ProtocolConstants {
            beta: 6.0 * PI / (2.0 + std::f64::consts::SQRT_2),
            t_r_factor: 4.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_model::NuclearSpec;
    use crate::units::us;
    use approx::assert_relative_eq;

    fn system_431(a_z_khz: f64) -> SpinSystem {
        SpinSystem::new(
            crate::units::khz_to_rad_per_s(431.5),
            vec![NuclearSpec::from_khz("C1", 26.6, a_z_khz).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn cpmg_cell_structure() {
        let spec = ProtocolSpec::ideal(ProtocolFamily::Cpmg);
        let seq = build_sequence(&spec, us(1.0)).unwrap();
        assert_relative_eq!(seq.period, us(2.0));
        assert_eq!(seq.n_pulses(), 2);
        let frees: Vec<f64> = seq
            .segments
            .iter()
            .filter_map(|s| match s {
                PulseSegment::Free { duration } => Some(*duration),
                _ => None,
            })
            .collect();
        assert_eq!(frees.len(), 3);
        assert_relative_eq!(frees[0], us(0.5));
        assert_relative_eq!(frees[1], us(1.0));
        assert_relative_eq!(frees[2], us(0.5));
        for s in &seq.segments {
            if let PulseSegment::Pulse { angle, axis, duration } = s {
                assert_eq!(*axis, Axis::X);
                assert_eq!(*angle, PI);
                assert_eq!(*duration, 0.0);
            }
        }
        assert_relative_eq!(seq.total_duration(), seq.period, epsilon = 1e-18);
    }

    #[test]
    fn polcpmg_over_rotates_by_delta_theta() {
        let spec = ProtocolSpec::polcpmg(0.25 * PI).unwrap();
        let seq = build_sequence(&spec, us(1.0)).unwrap();
        for s in &seq.segments {
            if let PulseSegment::Pulse { angle, .. } = s {
                assert_relative_eq!(*angle, 1.25 * PI);
            }
        }
    }

    #[test]
    fn pulsepol_has_twelve_pulses_and_period_4tau() {
        let spec = ProtocolSpec::ideal(ProtocolFamily::PulsePol);
        let seq = build_sequence(&spec, us(1.0)).unwrap();
        assert_relative_eq!(seq.period, us(4.0));
        assert_eq!(seq.n_pulses(), 12);
        assert_relative_eq!(seq.total_duration(), us(4.0), epsilon = 1e-18);
        // First block opens with a y pi/2 pulse; free gaps are all tau/2.
        match seq.segments[0] {
            PulseSegment::Pulse { axis, angle, .. } => {
                assert_eq!(axis, Axis::Y);
                assert_relative_eq!(angle, PI / 2.0);
            }
            _ => panic!("PulsePol must start with a pulse"),
        }
        let frees: Vec<f64> = seq
            .segments
            .iter()
            .filter_map(|s| match s {
                PulseSegment::Free { duration } => Some(*duration),
                _ => None,
            })
            .collect();
        assert_eq!(frees.len(), 8);
        for d in frees {
            assert_relative_eq!(d, us(0.5));
        }
    }

    #[test]
    fn echo_property_holds_for_cpmg_and_pulsepol() {
        for family in [ProtocolFamily::Cpmg, ProtocolFamily::PulsePol] {
            let seq = build_sequence(&ProtocolSpec::ideal(family), us(1.0)).unwrap();
            assert!(
                seq.echo_defect() < 1e-12,
                "{family}: echo defect {}",
                seq.echo_defect()
            );
        }
        // PolCPMG deliberately breaks the echo: the defect is exactly the
        // designed over-rotation excess 2*delta_theta (folded mod pi).
        let dt = 0.25 * PI;
        let seq = build_sequence(&ProtocolSpec::polcpmg(dt).unwrap(), us(1.0)).unwrap();
        assert_relative_eq!(seq.echo_defect(), 2.0 * dt, epsilon = 1e-12);
        assert_relative_eq!(seq.total_pulse_angle(), 2.0 * PI + 2.0 * dt, epsilon = 1e-12);
    }

    #[test]
    fn resonance_positions_match_closed_forms() {
        let cpmg = ProtocolSpec::ideal(ProtocolFamily::Cpmg);
        let t1 = resonance_tau(&cpmg, &system_431(0.0), 0, 1).unwrap();
        assert_relative_eq!(t1, 1.1587e-6, max_relative = 1e-4);
        let t2 = resonance_tau(&cpmg, &system_431(60.0), 0, 1).unwrap();
        assert_relative_eq!(t2, 1.0834e-6, max_relative = 1e-4);
        let pp = ProtocolSpec::ideal(ProtocolFamily::PulsePol);
        let t3 = resonance_tau(&pp, &system_431(60.0), 0, 1).unwrap();
        assert_relative_eq!(t3, 0.5794e-6, max_relative = 1e-4);
        // Third harmonic scales linearly.
        let t4 = resonance_tau(&cpmg, &system_431(0.0), 0, 3).unwrap();
        assert_relative_eq!(t4, 3.0 * t1, epsilon = 1e-18);
    }

    #[test]
    fn resonance_rejects_even_or_zero_harmonics() {
        let cpmg = ProtocolSpec::ideal(ProtocolFamily::Cpmg);
        let sys = system_431(0.0);
        assert!(resonance_tau(&cpmg, &sys, 0, 2).is_err());
        assert!(resonance_tau(&cpmg, &sys, 0, 0).is_err());
        assert!(resonance_tau(&cpmg, &sys, 5, 1).is_err(), "nucleus index out of range");
    }

    #[test]
    fn constants_per_family() {
        let cpmg = protocol_constants(&ProtocolSpec::ideal(ProtocolFamily::Cpmg));
        assert_relative_eq!(cpmg.beta, PI);
        assert_relative_eq!(cpmg.t_r_factor, 2.0);
        let pol = protocol_constants(&ProtocolSpec::polcpmg(0.25 * PI).unwrap());
        assert_relative_eq!(pol.beta, 1.25 * PI);
        let pp = protocol_constants(&ProtocolSpec::ideal(ProtocolFamily::PulsePol));
        assert_relative_eq!(pp.beta, 5.52090, max_relative = 1e-5);
        assert_relative_eq!(pp.t_r_factor, 4.0);
    }

    #[test]
    fn spec_validation() {
        assert!(ProtocolSpec::new(ProtocolFamily::Cpmg, 0.1, 0.0).is_err());
        assert!(ProtocolSpec::new(ProtocolFamily::PulsePol, 0.1, 0.0).is_err());
        assert!(ProtocolSpec::new(ProtocolFamily::PolCpmg, PI / 2.0, 0.0).is_err());
        assert!(ProtocolSpec::new(ProtocolFamily::PolCpmg, 0.49 * PI, 0.0).is_ok());
        assert!(ProtocolSpec::new(ProtocolFamily::Cpmg, 0.0, -1e-9).is_err());
        assert!(build_sequence(&ProtocolSpec::ideal(ProtocolFamily::Cpmg), 0.0).is_err());
        assert!(build_sequence(&ProtocolSpec::ideal(ProtocolFamily::Cpmg), f64::NAN).is_err());
    }

    #[test]
    fn finite_pulses_preserve_period() {
        let spec = ProtocolSpec::new(ProtocolFamily::Cpmg, 0.0, 20e-9).unwrap();
        let seq = build_sequence(&spec, us(1.0)).unwrap();
        assert_relative_eq!(seq.total_duration(), us(2.0), epsilon = 1e-18);
        let durations: Vec<f64> = seq.segments.iter().map(|s| s.duration()).collect();
        let expect = [490e-9, 20e-9, 980e-9, 20e-9, 490e-9];
        for (d, e) in durations.iter().zip(expect.iter()) {
            assert_relative_eq!(d, e, epsilon = 1e-15);
        }

        let pp = ProtocolSpec::new(ProtocolFamily::PulsePol, 0.0, 20e-9).unwrap();
        let seq = build_sequence(&pp, us(1.0)).unwrap();
        assert_relative_eq!(seq.total_duration(), us(4.0), epsilon = 1e-15);
        assert_eq!(seq.n_pulses(), 12);
        for s in &seq.segments {
            match s {
                PulseSegment::Pulse { duration, .. } => assert_eq!(*duration, 20e-9),
                PulseSegment::Free { duration } => {
                    assert_relative_eq!(*duration, 470e-9, epsilon = 1e-15)
                }
            }
        }
    }

    #[test]
    fn overlapping_finite_pulses_are_rejected() {
        let spec = ProtocolSpec::new(ProtocolFamily::Cpmg, 0.0, 1.1e-6).unwrap();
        assert!(build_sequence(&spec, us(1.0)).is_err());
        let pp = ProtocolSpec::new(ProtocolFamily::PulsePol, 0.0, 0.4e-6).unwrap();
        assert!(build_sequence(&pp, us(1.0)).is_err());
    }
}
