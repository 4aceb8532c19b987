//! Adiabatic pulse-spacing sweeps: step the spacing tau linearly while the
//! protocol runs, recording observables, with optional electron
//! reinitialization between sweep repetitions.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::linalg::{unitary_power, CMatrix};
use crate::propagator::{one_period_propagator, Method};
use crate::protocols::{build_sequence, protocol_constants, ProtocolSpec};
use crate::spin_model::{SpinOperators, SpinSystem};
use crate::state::{measure, reinit_electron, ElectronInit, Observables, QuantumState};

/// Electron reset applied at the start of every sweep repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reinit {
    #[default]
    None,
    ToKet0,
    ToXPlus,
    ToXMinus,
}

impl Reinit {
    /// Pure electron state this reset prepares, if any.
    pub fn target(self) -> Option<ElectronInit> {
        match self {
            Reinit::None => None,
            Reinit::ToKet0 => Some(ElectronInit::Ket0),
            Reinit::ToXPlus => Some(ElectronInit::XPlus),
            Reinit::ToXMinus => Some(ElectronInit::XMinus),
        }
    }
}

impl std::fmt::Display for Reinit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Reinit::None => "none",
            Reinit::ToKet0 => "to_ket0",
            Reinit::ToXPlus => "to_Xplus",
            Reinit::ToXMinus => "to_Xminus",
        };
        write!(f, "{s}")
    }
}

impl FromStr for Reinit {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Reinit::None),
            "to_ket0" => Ok(Reinit::ToKet0),
            "to_Xplus" => Ok(Reinit::ToXPlus),
            "to_Xminus" => Ok(Reinit::ToXMinus),
            other => Err(CoreError::InvalidSchedule(format!(
                "unknown reinit '{other}' (expected none, to_ket0, to_Xplus, to_Xminus)"
            ))),
        }
    }
}

/// Linear pulse-spacing sweep: `tau_k = tau_ini + k * delta_tau` for
/// `k = 0 .. n_steps-1`, each step holding `n_p` protocol periods, the whole
/// pass repeated `repetitions` times.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSchedule {
    pub tau_ini: f64,
    pub tau_fin: f64,
    /// Signed step; negative for downward sweeps.
    pub delta_tau: f64,
    pub n_p: u32,
    pub repetitions: u32,
    pub reinit: Reinit,
    /// Optional coherence-time budget; exceeding it records a warning.
    pub t2_budget: Option<f64>,
}

impl SweepSchedule {
    pub fn new(
        tau_ini: f64,
        tau_fin: f64,
        delta_tau: f64,
        n_p: u32,
        repetitions: u32,
        reinit: Reinit,
    ) -> Result<Self> {
        if !(tau_ini.is_finite() && tau_ini > 0.0) || !(tau_fin.is_finite() && tau_fin > 0.0) {
            return Err(CoreError::InvalidSchedule(format!(
                "tau endpoints must be positive and finite, got {tau_ini} and {tau_fin}"
            )));
        }
        if !delta_tau.is_finite() || delta_tau == 0.0 {
            return Err(CoreError::InvalidSchedule(format!(
                "delta_tau must be nonzero and finite, got {delta_tau}"
            )));
        }
        if (tau_fin - tau_ini) * delta_tau <= 0.0 {
            return Err(CoreError::InvalidSchedule(format!(
                "delta_tau ({delta_tau}) must have the same sign as tau_fin - tau_ini ({})",
                tau_fin - tau_ini
            )));
        }
        if n_p < 1 {
            return Err(CoreError::InvalidSchedule("n_p must be >= 1".into()));
        }
        if repetitions < 1 {
            return Err(CoreError::InvalidSchedule("repetitions must be >= 1".into()));
        }
        Ok(Self { tau_ini, tau_fin, delta_tau, n_p, repetitions, reinit, t2_budget: None })
    }

    pub fn with_t2_budget(mut self, budget: f64) -> Self {
        self.t2_budget = Some(budget);
        self
    }

    pub fn with_reinit(mut self, reinit: Reinit) -> Self {
        self.reinit = reinit;
        self
    }

    /// Number of tau steps per repetition:
    /// `round((tau_fin - tau_ini) / delta_tau) + 1`.
    pub fn n_steps(&self) -> usize {
        ((self.tau_fin - self.tau_ini) / self.delta_tau).round() as usize + 1
    }

    /// The tau grid of one repetition.
    pub fn taus(&self) -> Vec<f64> {
        (0..self.n_steps()).map(|k| self.tau_ini + k as f64 * self.delta_tau).collect()
    }

    /// The mirrored schedule: same grid walked in the opposite direction.
    pub fn reversed(&self) -> SweepSchedule {
        let n = self.n_steps();
        let last = self.tau_ini + (n - 1) as f64 * self.delta_tau;
        SweepSchedule {
            tau_ini: last,
            tau_fin: self.tau_ini,
            delta_tau: -self.delta_tau,
            ..self.clone()
        }
    }

    /// Closed-form cumulative protocol time through step `k` (0-based,
    /// inclusive) of a single repetition:
    /// `pf * n_p * ((k+1) tau_ini + delta_tau k(k+1)/2)`,
    /// where `pf` is the protocol's period factor (periods last `pf * tau`).
    pub fn cumulative_time(&self, k: usize, period_factor: f64) -> f64 {
        let kf = k as f64;
        period_factor
            * self.n_p as f64
            * ((kf + 1.0) * self.tau_ini + self.delta_tau * kf * (kf + 1.0) / 2.0)
    }

    /// Total protocol time of one repetition.
    pub fn sweep_time(&self, period_factor: f64) -> f64 {
        self.cumulative_time(self.n_steps() - 1, period_factor)
    }
}

/// Observables after one sweep step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Repetition index (0-based).
    pub rep: usize,
    /// Step index within the repetition (0-based).
    pub step: usize,
    pub tau: f64,
    /// Cumulative protocol time through this step, across repetitions.
    pub t: f64,
    pub obs: Observables,
}

/// End-of-repetition summary.
#[derive(Debug, Clone)]
pub struct RepSummary {
    pub rep: usize,
    pub obs: Observables,
    /// Polarization gained during this repetition.
    pub gain: f64,
}

/// Full record of a sweep run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub reps: Vec<RepSummary>,
    pub initial_obs: Observables,
    pub final_state: QuantumState,
    /// Protocol time of one repetition.
    pub sweep_time: f64,
    /// Protocol time of the whole run (all repetitions).
    pub total_time: f64,
    pub warnings: Vec<String>,
}

/// Execute a sweep: per repetition, optionally reinitialize the electron,
/// then walk the tau grid applying `n_p` periods per step and recording
/// observables. The per-step propagators are computed once (in parallel)
/// and reused across repetitions.
pub fn run_sweep(
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    schedule: &SweepSchedule,
    initial: &QuantumState,
) -> Result<Trajectory> {
    let ops = SpinOperators::build(system.n_nuclei());
    if initial.dim() != system.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: system.dim(),
            got: initial.dim(),
        });
    }
    let pf = protocol_constants(protocol).t_r_factor;
    let taus = schedule.taus();
    let step_unitaries: Vec<CMatrix> = taus
        .par_iter()
        .map(|&tau| {
            let seq = build_sequence(protocol, tau)?;
            let prop = one_period_propagator(system, &ops, &seq, Method::Fast)?;
            Ok(unitary_power(&prop.matrix, schedule.n_p as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    let sweep_time = schedule.sweep_time(pf);
    let total_time = sweep_time * schedule.repetitions as f64;
    let mut warnings = Vec::new();
    if let Some(budget) = schedule.t2_budget {
        if total_time > budget {
            warnings.push(format!(
                "total protocol time {total_time:.6e} s exceeds the coherence budget \
                 {budget:.6e} s (margin {:.6e} s)",
                budget - total_time
            ));
        }
    }

    let initial_obs = measure(initial, &ops)?;
    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(taus.len() * schedule.repetitions as usize);
    let mut reps = Vec::with_capacity(schedule.repetitions as usize);
    let mut t = 0.0;
    let mut prev_polarization = initial_obs.polarization;
    for rep in 0..schedule.repetitions as usize {
        if let Some(target) = schedule.reinit.target() {
            state = reinit_electron(&state, &target)?;
        }
        for (k, u) in step_unitaries.iter().enumerate() {
            let rho = u * state.rho() * u.adjoint();
            state = QuantumState::new_cheap(rho).map_err(|e| {
                CoreError::invariant(format!("step {k} of repetition {rep}: {e}"))
            })?;
            t += pf * schedule.n_p as f64 * taus[k];
            steps.push(StepRecord { rep, step: k, tau: taus[k], t, obs: measure(&state, &ops)? });
        }
        state.check_positive().map_err(|e| {
            CoreError::invariant(format!("end of repetition {rep}: {e}"))
        })?;
        let obs = measure(&state, &ops)?;
        let gain = obs.polarization - prev_polarization;
        prev_polarization = obs.polarization;
        reps.push(RepSummary { rep, obs, gain });
    }

    Ok(Trajectory {
        steps,
        reps,
        initial_obs,
        final_state: state,
        sweep_time,
        total_time,
        warnings,
    })
}

/// Result of a repeated-polarization run.
#[derive(Debug, Clone)]
pub struct PolarizationRun {
    pub trajectory: Trajectory,
    /// Polarization after each repetition.
    pub p_series: Vec<f64>,
    /// Per-repetition polarization gains.
    pub gains: Vec<f64>,
    /// First repetition (1-based) after which the last three gains are all
    /// below 1e-3 in magnitude, if saturation is reached.
    pub saturated_at: Option<usize>,
}

const SATURATION_GAIN: f64 = 1e-3;
const SATURATION_RUN: usize = 3;

/// Run a repeated polarization protocol: a sweep with electron
/// reinitialization between repetitions, returning the per-repetition
/// polarization series and saturation diagnostics.
pub fn run_repeated_polarization(
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    schedule: &SweepSchedule,
    initial: &QuantumState,
) -> Result<PolarizationRun> {
    if schedule.repetitions < 2 {
        return Err(CoreError::InvalidSchedule(
            "repeated polarization requires repetitions >= 2".into(),
        ));
    }
    if schedule.reinit == Reinit::None {
        return Err(CoreError::InvalidSchedule(
            "repeated polarization requires a reinit target".into(),
        ));
    }
    let trajectory = run_sweep(system, protocol, schedule, initial)?;
    let p_series: Vec<f64> = trajectory.reps.iter().map(|r| r.obs.polarization).collect();
    let gains: Vec<f64> = trajectory.reps.iter().map(|r| r.gain).collect();
    let saturated_at = (SATURATION_RUN - 1..gains.len())
        .find(|&r| {
            gains[r + 1 - SATURATION_RUN..=r].iter().all(|g| g.abs() < SATURATION_GAIN)
        })
        .map(|r| r + 1);
    Ok(PolarizationRun { trajectory, p_series, gains, saturated_at })
}
