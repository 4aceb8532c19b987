//! Closed-form Landau-Zener description of a linear pulse-spacing sweep
//! through one avoided crossing, mapped to nuclear polarization, with the
//! additive multi-spin approximation for weak pumping.
//!
//! Polarization here uses the module-wide [-1, 1] convention: full
//! single-spin polarization is +-1 (twice the spin-1/2 projection).

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::sweep::Trajectory;

/// Parameters of the Landau-Zener sweep model around one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzParams {
    /// Transverse coupling (rad/s).
    pub a_x: f64,
    /// Resonance pulse spacing (s).
    pub tau_r: f64,
    /// Protocol period at resonance (s); the T inside the sweep phase.
    pub t_r: f64,
    /// Protocol constant relating gap and coupling (dimensionless).
    pub beta: f64,
    /// Sweep step (s), positive.
    pub delta_tau: f64,
    /// Sweep start (s), below the resonance.
    pub tau_ini: f64,
}

impl LzParams {
    pub fn new(
        a_x: f64,
        tau_r: f64,
        t_r: f64,
        beta: f64,
        delta_tau: f64,
        tau_ini: f64,
    ) -> Result<Self> {
        let positive = [
            ("tau_r", tau_r),
            ("t_r", t_r),
            ("beta", beta),
            ("delta_tau", delta_tau),
            ("tau_ini", tau_ini),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidInput(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(a_x.is_finite() && a_x >= 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "a_x must be nonnegative and finite, got {a_x}"
            )));
        }
        if tau_ini >= tau_r {
            return Err(CoreError::InvalidInput(format!(
                "tau_ini ({tau_ini}) must lie below the resonance tau_r ({tau_r}) \
                 for a forward sweep"
            )));
        }
        Ok(Self { a_x, tau_r, t_r, beta, delta_tau, tau_ini })
    }

    /// Dimensionless sweep phase `4 pi (tau - tau_r) / tau * sqrt(t_r / delta_tau)`.
    pub fn phi(&self, tau: f64) -> f64 {
        debug_assert!(tau > 0.0);
        4.0 * PI * (tau - self.tau_r) / tau * (self.t_r / self.delta_tau).sqrt()
    }

    /// Sweep phase with the denominator frozen at the resonance:
    /// `4 pi (tau - tau_r) / tau_r * sqrt(t_r / delta_tau)`. Exactly odd in
    /// `tau - tau_r`; quantifies how far the adopted running-denominator
    /// [`Self::phi`] drifts from the symmetric near-resonance approximation.
    pub fn phi_symmetric(&self, tau: f64) -> f64 {
        4.0 * PI * (tau - self.tau_r) / self.tau_r * (self.t_r / self.delta_tau).sqrt()
    }

    /// Adiabaticity exponent of the full sweep:
    /// `2 a_x^2 tau_r^2 t_r / (beta^2 delta_tau)`.
    pub fn gamma0(&self) -> f64 {
        2.0 * self.a_x.powi(2) * self.tau_r.powi(2) * self.t_r
            / (self.beta.powi(2) * self.delta_tau)
    }

    /// Completed sweep fraction `F = (arctan phi(tau) - arctan phi(tau_ini)) / pi`,
    /// in [0, 1) and nondecreasing in tau.
    pub fn completed_fraction(&self, tau: f64) -> f64 {
        (self.phi(tau).atan() - self.phi(self.tau_ini).atan()) / PI
    }

    /// Accumulated exponent `Gamma_0 * F(tau)`.
    pub fn gamma_lz(&self, tau: f64) -> f64 {
        self.gamma0() * self.completed_fraction(tau)
    }
}

/// Landau-Zener polarization prediction `sign * (1 - e^{-Gamma_LZ(tau)})`,
/// in [-1, 1] units. `sign` (+1 or -1) is the pumping direction set by the
/// resonance branch and the electron preparation.
pub fn lz_polarization(params: &LzParams, tau: f64, sign: f64) -> Result<f64> {
    if sign != 1.0 && sign != -1.0 {
        return Err(CoreError::InvalidInput(format!("sign must be +-1, got {sign}")));
    }
    Ok(sign * (1.0 - (-params.gamma_lz(tau)).exp()))
}

/// Additive multi-spin prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditivePrediction {
    /// Register polarization: the per-spin mean, clamped to [-1, 1].
    pub p: f64,
    /// Per-spin predictions.
    pub per_spin: Vec<f64>,
    /// True when any spin is outside the weak-pumping regime
    /// (gamma_0 > 1), where the additive picture is invalid.
    pub adiabatic_warning: bool,
}

/// Combine independent per-spin Landau-Zener predictions additively. Valid
/// only for weak pumping; the result carries a warning flag otherwise.
pub fn additive_multi_spin(
    params: &[LzParams],
    tau: f64,
    sign: f64,
) -> Result<AdditivePrediction> {
    if params.is_empty() {
        return Err(CoreError::InvalidInput("no spins given".into()));
    }
    let per_spin: Vec<f64> = params
        .iter()
        .map(|p| lz_polarization(p, tau, sign))
        .collect::<Result<Vec<_>>>()?;
    let p = (per_spin.iter().sum::<f64>() / per_spin.len() as f64).clamp(-1.0, 1.0);
    let adiabatic_warning = params.iter().any(|p| p.gamma0() > 1.0);
    Ok(AdditivePrediction { p, per_spin, adiabatic_warning })
}

/// Deviation metrics between a simulated sweep and the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitComparison {
    pub max_abs_dev: f64,
    pub rms_dev: f64,
}

/// Compare a simulated single-spin trajectory against the closed form,
/// pointwise over the final repetition's steps.
pub fn fit_comparison(
    trajectory: &Trajectory,
    params: &LzParams,
    sign: f64,
) -> Result<FitComparison> {
    let last_rep = trajectory.steps.last().map(|s| s.rep).ok_or_else(|| {
        CoreError::InvalidInput("empty trajectory".into())
    })?;
    let mut max_abs_dev: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for record in trajectory.steps.iter().filter(|s| s.rep == last_rep) {
        let model = lz_polarization(params, record.tau, sign)?;
        let dev = (record.obs.polarization - model).abs();
        max_abs_dev = max_abs_dev.max(dev);
        sum_sq += dev * dev;
        n += 1;
    }
    Ok(FitComparison { max_abs_dev, rms_dev: (sum_sq / n as f64).sqrt() })
}

/// Width of the resonance region in pulse spacing at the first harmonic:
/// the minimum gap `2 a_x tau_r / beta` divided by the eigenphase slope
/// `2 omega_L`, with `omega_L = pi / tau_r`. Used to normalize sweep
/// windows across couplings.
pub fn anticrossing_linewidth(a_x: f64, tau_r: f64, beta: f64) -> f64 {
    a_x * tau_r.powi(2) / (PI * beta)
}

/// Sweep step realizing a requested adiabaticity exponent:
/// `delta_tau = 2 a_x^2 tau_r^2 t_r / (beta^2 gamma_0)`.
pub fn delta_tau_for_gamma0(a_x: f64, tau_r: f64, t_r: f64, beta: f64, gamma0: f64) -> f64 {
    2.0 * a_x.powi(2) * tau_r.powi(2) * t_r / (beta.powi(2) * gamma0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ProtocolSpec;
    use crate::spin_model::NuclearSpec;
    use crate::spin_model::SpinSystem;
    use crate::state::{make_initial_state, ElectronInit, NuclearInit};
    use crate::sweep::{run_sweep, Reinit, SweepSchedule};
    use crate::units::khz_to_rad_per_s;
    use approx::assert_relative_eq;

    fn example_params() -> LzParams {
        // A_x = 2 pi * 26.6 kHz at the first CPMG harmonic of a 431.5 kHz
        // precession frequency.
        LzParams::new(
            khz_to_rad_per_s(26.6),
            1.1587e-6,
            2.0 * 1.1587e-6,
            PI,
            1e-9,
            0.9e-6,
        )
        .unwrap()
    }

    #[test]
    fn phi_zero_at_resonance_and_signed() {
        let p = example_params();
        assert_eq!(p.phi(p.tau_r), 0.0);
        assert!(p.phi(p.tau_r + 1e-9) > 0.0);
        assert!(p.phi(p.tau_r - 1e-9) < 0.0);
    }

    #[test]
    fn phi_worked_example() {
        let p = example_params();
        // tau = 1.2 us, T = 2.3174 us, step 1 ns.
        assert_relative_eq!(p.phi(1.2e-6), 20.82, max_relative = 1e-3);
    }

    #[test]
    fn gamma0_worked_example() {
        let p = example_params();
        assert_relative_eq!(p.gamma0(), 17.61, max_relative = 1e-3);
    }

    #[test]
    fn completed_fraction_bounds_and_monotonicity() {
        let p = example_params();
        assert_eq!(p.completed_fraction(p.tau_ini), 0.0);
        assert_eq!(p.gamma_lz(p.tau_ini), 0.0);
        let mut prev = -1.0;
        for k in 0..400 {
            let tau = p.tau_ini + (2.0 * (p.tau_r - p.tau_ini)) * k as f64 / 399.0;
            let f = p.completed_fraction(tau);
            assert!((0.0..1.0).contains(&f), "F out of range: {f}");
            assert!(f >= prev - 1e-15, "F not monotone at tau {tau}");
            prev = f;
        }
        // Wide symmetric sweep converges toward the full exponent.
        let far = p.tau_r + (p.tau_r - p.tau_ini);
        assert!(p.completed_fraction(far) > 0.98);
        assert!((p.gamma_lz(far) - p.gamma0()).abs() / p.gamma0() < 0.02);
    }

    #[test]
    fn polarization_limits() {
        let p = example_params();
        assert_eq!(lz_polarization(&p, p.tau_ini, 1.0).unwrap(), 0.0);
        assert!(lz_polarization(&p, 2e-6, 0.5).is_err());
        // Unit exponent sweeps reach about 1 - 1/e.
        let a_x = khz_to_rad_per_s(26.6);
        let tau_r = 1.0834e-6;
        let dt = delta_tau_for_gamma0(a_x, tau_r, 2.0 * tau_r, PI, 1.0);
        let p1 = LzParams::new(a_x, tau_r, 2.0 * tau_r, PI, dt, tau_r - 200e-9).unwrap();
        assert_relative_eq!(p1.gamma0(), 1.0, max_relative = 1e-12);
        let p_end = lz_polarization(&p1, tau_r + 200e-9, -1.0).unwrap();
        assert!((p_end.abs() - (1.0 - (-1.0f64).exp())).abs() < 0.01, "got {p_end}");
        assert!(p_end < 0.0);
    }

    #[test]
    fn gamma0_scaling_laws() {
        let p = example_params();
        let halved = LzParams { delta_tau: p.delta_tau / 2.0, ..p };
        assert_relative_eq!(halved.gamma0(), 2.0 * p.gamma0(), max_relative = 1e-12);
        let doubled_coupling = LzParams { a_x: 2.0 * p.a_x, ..p };
        assert_relative_eq!(
            doubled_coupling.gamma0(),
            4.0 * p.gamma0(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sweep_phase_antisymmetry_near_resonance() {
        // With the denominator frozen at tau_r the phase is exactly odd in
        // (tau - tau_r); the adopted running denominator deviates from that
        // symmetric form by under 1e-3 in completed-fraction units over a
        // 10 ns span.
        let p = example_params();
        for k in 1..=20 {
            let d = k as f64 * 0.5e-9;
            let exact_asym =
                (p.phi_symmetric(p.tau_r + d).atan() + p.phi_symmetric(p.tau_r - d).atan())
                    .abs();
            assert!(exact_asym < 1e-12, "frozen-denominator asymmetry {exact_asym:.2e}");
            for tau in [p.tau_r + d, p.tau_r - d] {
                let dev = (p.phi(tau).atan() - p.phi_symmetric(tau).atan()).abs() / PI;
                assert!(dev < 1e-3, "denominator drift {dev:.2e} at tau = {tau:.4e}");
            }
        }
    }

    #[test]
    fn delta_tau_round_trips_gamma0() {
        let a_x = khz_to_rad_per_s(40.0);
        let tau_r = 1.0e-6;
        for target in [0.3, 1.0, 10.0, 20.0] {
            let dt = delta_tau_for_gamma0(a_x, tau_r, 2.0 * tau_r, PI, target);
            let p = LzParams::new(a_x, tau_r, 2.0 * tau_r, PI, dt, 0.8e-6).unwrap();
            assert_relative_eq!(p.gamma0(), target, max_relative = 1e-12);
        }
    }

    #[test]
    fn additive_prediction_means_and_warns() {
        let a_x = khz_to_rad_per_s(26.6);
        let tau_r = 1.0834e-6;
        let weak = delta_tau_for_gamma0(a_x, tau_r, 2.0 * tau_r, PI, 0.1);
        // Endpoints far enough out that the completed fraction is ~0.99.
        let p = LzParams::new(a_x, tau_r, 2.0 * tau_r, PI, weak, tau_r - 1.0e-6).unwrap();
        let far = tau_r + 1.0e-6;
        let pred = additive_multi_spin(&[p, p], far, 1.0).unwrap();
        assert!(!pred.adiabatic_warning);
        assert_eq!(pred.per_spin.len(), 2);
        // Both spins identical: the mean equals the per-spin value, close
        // to 1 - e^{-0.1}.
        assert_relative_eq!(pred.p, pred.per_spin[0], max_relative = 1e-12);
        assert!((pred.p - 0.09516).abs() < 2e-3, "got {}", pred.p);

        let strong = LzParams {
            delta_tau: delta_tau_for_gamma0(a_x, tau_r, 2.0 * tau_r, PI, 5.0),
            ..p
        };
        let pred = additive_multi_spin(&[p, strong], far, 1.0).unwrap();
        assert!(pred.adiabatic_warning);
        assert!(additive_multi_spin(&[], far, 1.0).is_err());
    }

    #[test]
    fn zero_coupling_costs_nothing_in_comparison() {
        // a_x = 0: the simulation never polarizes a maximally mixed nucleus
        // and the model predicts exactly zero, so the deviation vanishes.
        let system = SpinSystem::new(
            khz_to_rad_per_s(431.5),
            vec![NuclearSpec::from_khz("N", 0.0, 38.0).unwrap()],
        )
        .unwrap();
        let spec = ProtocolSpec::polcpmg(0.25 * PI).unwrap();
        let schedule = SweepSchedule::new(0.85e-6, 0.89e-6, 2e-9, 1, 1, Reinit::None).unwrap();
        let init =
            make_initial_state(&ElectronInit::XPlus, &NuclearInit::MaximallyMixed, 1).unwrap();
        let traj = run_sweep(&system, &spec, &schedule, &init).unwrap();
        let params =
            LzParams::new(0.0, 0.87e-6, 2.0 * 0.87e-6, PI, 2e-9, 0.85e-6).unwrap();
        let cmp = fit_comparison(&traj, &params, 1.0).unwrap();
        assert!(cmp.max_abs_dev < 1e-10);
        assert!(cmp.rms_dev < 1e-10);
    }

    #[test]
    fn params_validation() {
        assert!(LzParams::new(1.0, 1e-6, 2e-6, PI, 1e-9, 2e-6).is_err()); // start above
        assert!(LzParams::new(-1.0, 1e-6, 2e-6, PI, 1e-9, 0.5e-6).is_err());
        assert!(LzParams::new(1.0, 1e-6, 2e-6, PI, 0.0, 0.5e-6).is_err());
        assert!(LzParams::new(1.0, 1e-6, 2e-6, 0.0, 1e-9, 0.5e-6).is_err());
    }
}
