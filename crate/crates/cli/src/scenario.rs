//! Scenario configuration: strict parsing, default resolution, and exact
//! round-trip emission.
//!
//! All physical quantities in scenario files carry explicit unit suffixes in
//! their key names (`_khz`, `_us`, `_ns`, `_ms`, `_t`, `_rad`,
//! `_pi_units`); the internal representation is SI angular units. Unknown
//! keys are rejected, naming the offending key.

use std::f64::consts::PI;
use std::str::FromStr;

use adpulse_core::units::{khz_to_rad_per_s, larmor_from_field};
use adpulse_core::{
    polcpmg_split_pair, ElectronInit, NuclearInit, NuclearSpec, NuclearStartState,
    ProtocolFamily, ProtocolSpec, Reinit, SpinSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// What a scenario computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    /// Floquet eigenphase spectrum over a pulse-spacing grid.
    Spectrum,
    /// One adiabatic pulse-spacing sweep of a density matrix.
    Sweep,
    /// Repeated sweeps with electron reinitialization between repetitions.
    Polarize,
    /// State storage through a crossing pair of one target nucleus.
    Storage,
    /// Swept-crossing simulation against the closed-form rate model.
    Lzcompare,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Action::Spectrum => "spectrum",
            Action::Sweep => "sweep",
            Action::Polarize => "polarize",
            Action::Storage => "storage",
            Action::Lzcompare => "lzcompare",
        };
        write!(f, "{s}")
    }
}

/// One nucleus given by explicit hyperfine couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomNucleus {
    pub label: String,
    /// Transverse hyperfine coupling, kHz (angular frequency / 2 pi).
    pub a_x_khz: f64,
    /// Longitudinal hyperfine coupling, kHz.
    pub a_z_khz: f64,
}

/// Randomly drawn register, materialized into concrete nuclei at resolution
/// time using the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRegister {
    pub count: usize,
    /// Uniform range for the transverse coupling, kHz.
    pub a_x_khz_range: [f64; 2],
    /// Uniform range for the longitudinal coupling, kHz.
    pub a_z_khz_range: [f64; 2],
}

/// Spin register: Larmor frequency plus nuclei from the built-in registry,
/// explicit couplings, or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Nuclear Larmor frequency, kHz. Exactly one of `larmor_khz` and
    /// `field_t` must be given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub larmor_khz: Option<f64>,
    /// Static field in tesla, converted through the 13C gyromagnetic ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_t: Option<f64>,
    /// Labels from the built-in nucleus registry (C1..C7).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nuclei: Vec<String>,
    /// Nuclei with explicit couplings, appended after the registry ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom: Vec<CustomNucleus>,
    /// Seeded random register; resolved into `custom` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomRegister>,
}

/// Pulse protocol selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub family: FamilyName,
    /// Deliberate over-rotation of refocusing pulses in units of pi
    /// (PolCPMG only): 0.25 means pulse angle pi + 0.25 pi.
    #[serde(default)]
    pub delta_theta_pi_units: f64,
    /// Finite pulse duration in ns; 0 selects ideal instantaneous pulses.
    #[serde(default)]
    pub t_pi_ns: f64,
}

/// Protocol family name as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Cpmg,
    Polcpmg,
    Pulsepol,
}

impl FamilyName {
    pub fn to_core(self) -> ProtocolFamily {
        match self {
            FamilyName::Cpmg => ProtocolFamily::Cpmg,
            FamilyName::Polcpmg => ProtocolFamily::PolCpmg,
            FamilyName::Pulsepol => ProtocolFamily::PulsePol,
        }
    }
}

/// Eigenphase fold window name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowName {
    Full,
    Half,
}

fn default_one_u32() -> u32 {
    1
}
fn default_true() -> bool {
    true
}
fn spectrum_points_default() -> usize {
    801
}
fn window_half() -> WindowName {
    WindowName::Half
}
fn reinit_none() -> String {
    "none".to_string()
}
fn reinit_xplus() -> String {
    "to_Xplus".to_string()
}
fn electron_xplus() -> String {
    "Xplus".to_string()
}
fn nuclear_all_down() -> String {
    "all_down".to_string()
}
fn nuclear_mixed() -> String {
    "mixed".to_string()
}
fn nuclear_down() -> String {
    "down".to_string()
}
fn window_explicit() -> String {
    "explicit".to_string()
}
fn polarize_reps() -> u32 {
    15
}
fn polarize_delta_tau_ns() -> f64 {
    1.0
}
fn polarize_margin_ns() -> f64 {
    120.0
}
fn storage_harmonic() -> u32 {
    3
}
fn storage_adiabaticity() -> f64 {
    8.0
}
fn storage_window_ini_us() -> f64 {
    0.7
}
fn storage_window_fin_us() -> f64 {
    1.0
}
fn storage_spectrum_points() -> usize {
    601
}
fn lz_gamma0() -> Vec<f64> {
    vec![0.3, 1.0, 3.0, 10.0]
}
fn lz_w_linewidths() -> f64 {
    10.0
}
fn lz_sign() -> f64 {
    1.0
}

/// Parameters of the `spectrum` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub tau_ini_us: f64,
    pub tau_fin_us: f64,
    #[serde(default = "spectrum_points_default")]
    pub n_points: usize,
    /// Protocol periods per grid point; only the one-period map (n_p = 1)
    /// is analyzed.
    #[serde(default = "default_one_u32")]
    pub n_p: u32,
    /// Fold window used when locating anticrossings.
    #[serde(default = "window_half")]
    pub window: WindowName,
    /// Gap threshold for the anticrossing locator; spectrum-derived default
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_rad: Option<f64>,
    /// Also emit located anticrossings.
    #[serde(default = "default_true")]
    pub locate: bool,
}

/// Parameters of the `sweep` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub tau_ini_us: f64,
    pub tau_fin_us: f64,
    pub delta_tau_ns: f64,
    #[serde(default = "default_one_u32")]
    pub n_p: u32,
    #[serde(default = "default_one_u32")]
    pub repetitions: u32,
    /// Electron reset between repetitions: none, to_ket0, to_Xplus,
    /// to_Xminus.
    #[serde(default = "reinit_none")]
    pub reinit: String,
    /// Initial electron state: ket0, ket1, Xplus, Xminus.
    #[serde(default = "electron_xplus")]
    pub electron_init: String,
    /// Initial nuclear product state: all_down, all_up, mixed.
    #[serde(default = "nuclear_all_down")]
    pub nuclear_init: String,
    /// Coherence-time budget; exceeding it is reported as a warning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_budget_ms: Option<f64>,
    /// Also emit the Floquet spectrum over the sweep window.
    #[serde(default = "default_true")]
    pub emit_spectrum: bool,
}

/// Parameters of the `polarize` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizeParams {
    /// Window selection: explicit (use the tau bounds), split_lower or
    /// split_upper (locate every nucleus's lower/upper split resonance and
    /// span them all plus the margin). Resolution rewrites auto windows to
    /// explicit bounds.
    #[serde(default = "window_explicit")]
    pub window: String,
    /// Resonance harmonic for auto windows (odd).
    #[serde(default = "default_one_u32")]
    pub harmonic: u32,
    /// Margin added on both sides of an auto window, ns.
    #[serde(default = "polarize_margin_ns")]
    pub margin_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ini_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_fin_us: Option<f64>,
    #[serde(default = "polarize_delta_tau_ns")]
    pub delta_tau_ns: f64,
    #[serde(default = "default_one_u32")]
    pub n_p: u32,
    #[serde(default = "polarize_reps")]
    pub repetitions: u32,
    #[serde(default = "reinit_xplus")]
    pub reinit: String,
    #[serde(default = "electron_xplus")]
    pub electron_init: String,
    #[serde(default = "nuclear_mixed")]
    pub nuclear_init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_budget_ms: Option<f64>,
}

/// Parameters of the `storage` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageParams {
    /// Target nucleus label; defaults to the first nucleus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nucleus: Option<String>,
    /// Resonance harmonic of the crossing pair (odd).
    #[serde(default = "storage_harmonic")]
    pub harmonic: u32,
    /// Adiabaticity exponent of the generated storage schedule.
    #[serde(default = "storage_adiabaticity")]
    pub adiabaticity: f64,
    /// Electron amplitude on |0>; (amp_a, amp_b) is normalized before use.
    pub amp_a: f64,
    /// Electron amplitude on |1>.
    pub amp_b: f64,
    /// Nuclear start state of the target spin: down or up.
    #[serde(default = "nuclear_down")]
    pub nuclear_init: String,
    /// Spectrum window emitted alongside the storage run, us.
    #[serde(default = "storage_window_ini_us")]
    pub window_ini_us: f64,
    #[serde(default = "storage_window_fin_us")]
    pub window_fin_us: f64,
    #[serde(default = "storage_spectrum_points")]
    pub spectrum_points: usize,
    /// Also run the reversed sweep and report the read-back fidelity.
    #[serde(default)]
    pub read_back: bool,
}

/// Parameters of the `lzcompare` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LzcompareParams {
    /// Adiabaticity exponents to sweep at.
    #[serde(default = "lz_gamma0")]
    pub gamma0: Vec<f64>,
    /// Symmetric window half-width in units of the larger of the sweep-phase
    /// width and the crossing linewidth.
    #[serde(default = "lz_w_linewidths")]
    pub w_linewidths: f64,
    /// Resonance harmonic (odd).
    #[serde(default = "default_one_u32")]
    pub harmonic: u32,
    /// Reference nucleus label; defaults to the first nucleus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nucleus: Option<String>,
    /// Scaling study: override the reference nucleus's transverse coupling
    /// with each value (kHz), keeping its longitudinal coupling. Empty means
    /// run the nucleus as configured.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a_x_khz: Vec<f64>,
    #[serde(default = "electron_xplus")]
    pub electron_init: String,
    #[serde(default = "nuclear_mixed")]
    pub nuclear_init: String,
    /// Pumping direction of the closed form (+1 or -1).
    #[serde(default = "lz_sign")]
    pub sign: f64,
}

/// Typed action parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionParams {
    Spectrum(SpectrumParams),
    Sweep(SweepParams),
    Polarize(PolarizeParams),
    Storage(StorageParams),
    Lzcompare(LzcompareParams),
}

/// A fully parsed scenario. `resolve` materializes defaults (random
/// registers, auto windows, output directory) so the emitted `resolved.cfg`
/// reruns identically without the original context.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub action: Action,
    pub outdir: Option<String>,
    pub seed: u64,
    pub system: SystemConfig,
    pub protocol: ProtocolConfig,
    pub params: ActionParams,
}

/// Serde-facing document shape shared by parsing and emission.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    name: String,
    action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outdir: Option<String>,
    #[serde(default)]
    seed: u64,
    system: SystemConfig,
    protocol: ProtocolConfig,
    #[serde(default)]
    params: toml::Table,
}

fn config_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{context}: {e}"))
}

impl Scenario {
    /// Parse a scenario from TOML text. Unknown keys anywhere are rejected
    /// with the offending key named; `[params]` keys are checked against the
    /// schema of the declared action.
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let doc: RawDoc = toml::from_str(text).map_err(|e| config_err("scenario parse error", e))?;
        let params_value = toml::Value::Table(doc.params);
        let params = match doc.action {
            Action::Spectrum => ActionParams::Spectrum(
                params_value.try_into().map_err(|e| config_err("in [params] (spectrum)", e))?,
            ),
            Action::Sweep => ActionParams::Sweep(
                params_value.try_into().map_err(|e| config_err("in [params] (sweep)", e))?,
            ),
            Action::Polarize => ActionParams::Polarize(
                params_value.try_into().map_err(|e| config_err("in [params] (polarize)", e))?,
            ),
            Action::Storage => ActionParams::Storage(
                params_value.try_into().map_err(|e| config_err("in [params] (storage)", e))?,
            ),
            Action::Lzcompare => ActionParams::Lzcompare(
                params_value.try_into().map_err(|e| config_err("in [params] (lzcompare)", e))?,
            ),
        };
        Ok(Scenario {
            name: doc.name,
            action: doc.action,
            outdir: doc.outdir,
            seed: doc.seed,
            system: doc.system,
            protocol: doc.protocol,
            params,
        })
    }

    /// Read and parse a scenario file.
    pub fn from_file(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Io(format!("cannot read scenario file {}: {e}", path.display()))
        })?;
        Scenario::from_toml_str(&text)
    }

    /// Emit the scenario as TOML. `parse(emit(s)) == s` exactly.
    pub fn to_toml_string(&self) -> Result<String> {
        let params_value = match &self.params {
            ActionParams::Spectrum(p) => toml::Value::try_from(p),
            ActionParams::Sweep(p) => toml::Value::try_from(p),
            ActionParams::Polarize(p) => toml::Value::try_from(p),
            ActionParams::Storage(p) => toml::Value::try_from(p),
            ActionParams::Lzcompare(p) => toml::Value::try_from(p),
        }
        .map_err(|e| CliError::Io(format!("cannot serialize params: {e}")))?;
        let toml::Value::Table(params) = params_value else {
            return Err(CliError::Io("params did not serialize to a table".into()));
        };
        let doc = RawDoc {
            name: self.name.clone(),
            action: self.action,
            outdir: self.outdir.clone(),
            seed: self.seed,
            system: self.system.clone(),
            protocol: self.protocol.clone(),
            params,
        };
        toml::to_string_pretty(&doc).map_err(|e| CliError::Io(format!("cannot emit scenario: {e}")))
    }

    /// Materialize every context-dependent default: draw random registers
    /// from the seed, locate auto windows, and fix the output directory.
    /// The result validates and is a fixed point of `resolve`.
    pub fn resolve(mut self) -> Result<Scenario> {
        if let Some(random) = self.system.random.take() {
            if random.count == 0 {
                return Err(CliError::Config("random register count must be >= 1".into()));
            }
            for (name, [lo, hi]) in [
                ("a_x_khz_range", random.a_x_khz_range),
                ("a_z_khz_range", random.a_z_khz_range),
            ] {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(CliError::Config(format!(
                        "[system.random] {name} must be an ordered finite pair, got [{lo}, {hi}]"
                    )));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for i in 0..random.count {
                let a_x_khz = rng.gen_range(random.a_x_khz_range[0]..=random.a_x_khz_range[1]);
                let a_z_khz = rng.gen_range(random.a_z_khz_range[0]..=random.a_z_khz_range[1]);
                self.system.custom.push(CustomNucleus {
                    label: format!("R{}", i + 1),
                    a_x_khz,
                    a_z_khz,
                });
            }
        }

        if self.outdir.is_none() {
            self.outdir = Some(format!("out/{}", self.name));
        }

        if let ActionParams::Polarize(p) = &mut self.params {
            if p.window != "explicit" {
                let upper = match p.window.as_str() {
                    "split_lower" => false,
                    "split_upper" => true,
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown polarize window '{other}' \
                             (expected explicit, split_lower, split_upper)"
                        )));
                    }
                };
                let system = build_system(&self.system)?;
                let protocol = build_protocol(&self.protocol)?;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for n in 0..system.n_nuclei() {
                    let (minus, plus) = polcpmg_split_pair(&system, n, &protocol, p.harmonic)?;
                    let center = if upper { plus.tau_center } else { minus.tau_center };
                    lo = lo.min(center);
                    hi = hi.max(center);
                }
                let margin = p.margin_ns * 1e-9;
                p.tau_ini_us = Some((lo - margin) * 1e6);
                p.tau_fin_us = Some((hi + margin) * 1e6);
                p.window = "explicit".to_string();
            }
        }

        if let ActionParams::Storage(p) = &mut self.params {
            if p.nucleus.is_none() {
                p.nucleus = Some(first_label(&self.system)?);
            }
        }
        if let ActionParams::Lzcompare(p) = &mut self.params {
            if p.nucleus.is_none() {
                p.nucleus = Some(first_label(&self.system)?);
            }
        }

        self.validate()?;
        Ok(self)
    }

    /// Validate a resolved scenario. Violations are configuration errors.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(CliError::Config("scenario name must not be empty".into()));
        }
        match (self.system.larmor_khz, self.system.field_t) {
            (Some(l), None) if l > 0.0 && l.is_finite() => {}
            (None, Some(b)) if b > 0.0 && b.is_finite() => {}
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "[system] give exactly one of larmor_khz and field_t, not both".into(),
                ));
            }
            (None, None) => {
                return Err(CliError::Config(
                    "[system] one of larmor_khz or field_t is required".into(),
                ));
            }
            _ => {
                return Err(CliError::Config(
                    "[system] larmor_khz / field_t must be positive and finite".into(),
                ));
            }
        }
        if self.system.nuclei.is_empty() && self.system.custom.is_empty() {
            return Err(CliError::Config(
                "[system] at least one nucleus is required (nuclei, custom, or random)".into(),
            ));
        }
        // Exercises registry lookups, coupling ranges, and duplicate labels.
        build_system(&self.system)?;
        build_protocol(&self.protocol)?;

        match &self.params {
            ActionParams::Spectrum(p) => {
                if p.n_points < 3 {
                    return Err(CliError::Config(format!(
                        "[params] n_points must be >= 3, got {}",
                        p.n_points
                    )));
                }
                if !(p.tau_ini_us > 0.0 && p.tau_fin_us > p.tau_ini_us) {
                    return Err(CliError::Config(format!(
                        "[params] need 0 < tau_ini_us < tau_fin_us, got {} and {}",
                        p.tau_ini_us, p.tau_fin_us
                    )));
                }
                if p.n_p != 1 {
                    return Err(CliError::Config(format!(
                        "[params] n_p = {} is not supported: the spectrum action analyzes \
                         the one-period map (n_p = 1)",
                        p.n_p
                    )));
                }
                if let Some(t) = p.threshold_rad {
                    if !(t > 0.0 && t.is_finite()) {
                        return Err(CliError::Config(format!(
                            "[params] threshold_rad must be positive, got {t}"
                        )));
                    }
                }
            }
            ActionParams::Sweep(p) => {
                if p.tau_ini_us <= 0.0 || p.tau_fin_us <= 0.0 {
                    return Err(CliError::Config(
                        "[params] tau bounds must be positive".into(),
                    ));
                }
                parse_reinit(&p.reinit)?;
                parse_electron_init(&p.electron_init)?;
                parse_nuclear_init(&p.nuclear_init)?;
                if let Some(b) = p.t2_budget_ms {
                    if !(b > 0.0 && b.is_finite()) {
                        return Err(CliError::Config(format!(
                            "[params] t2_budget_ms must be positive, got {b}"
                        )));
                    }
                }
            }
            ActionParams::Polarize(p) => {
                if p.window != "explicit" {
                    return Err(CliError::Config(format!(
                        "[params] window '{}' is unresolved; run through resolve()",
                        p.window
                    )));
                }
                let (Some(lo), Some(hi)) = (p.tau_ini_us, p.tau_fin_us) else {
                    return Err(CliError::Config(
                        "[params] explicit polarize windows need tau_ini_us and tau_fin_us".into(),
                    ));
                };
                if !(lo > 0.0 && hi > 0.0) {
                    return Err(CliError::Config(
                        "[params] tau bounds must be positive".into(),
                    ));
                }
                if p.repetitions < 2 {
                    return Err(CliError::Config(format!(
                        "[params] polarize needs repetitions >= 2, got {}",
                        p.repetitions
                    )));
                }
                let reinit = parse_reinit(&p.reinit)?;
                if reinit == Reinit::None {
                    return Err(CliError::Config(
                        "[params] polarize needs an electron reinit target \
                         (to_ket0, to_Xplus, to_Xminus)"
                            .into(),
                    ));
                }
                parse_electron_init(&p.electron_init)?;
                parse_nuclear_init(&p.nuclear_init)?;
            }
            ActionParams::Storage(p) => {
                if self.protocol.family != FamilyName::Pulsepol {
                    return Err(CliError::Config(
                        "storage requires the pulsepol protocol family".into(),
                    ));
                }
                let Some(label) = &p.nucleus else {
                    return Err(CliError::Config(
                        "[params] nucleus label is unresolved; run through resolve()".into(),
                    ));
                };
                nucleus_index(&self.system, label)?;
                if !(p.adiabaticity > 0.0 && p.adiabaticity.is_finite()) {
                    return Err(CliError::Config(format!(
                        "[params] adiabaticity must be positive, got {}",
                        p.adiabaticity
                    )));
                }
                if (p.amp_a.powi(2) + p.amp_b.powi(2)).sqrt() < 1e-12 {
                    return Err(CliError::Config(
                        "[params] amp_a and amp_b must not both vanish".into(),
                    ));
                }
                parse_start_state(&p.nuclear_init)?;
                if !(p.window_ini_us > 0.0 && p.window_fin_us > p.window_ini_us) {
                    return Err(CliError::Config(format!(
                        "[params] need 0 < window_ini_us < window_fin_us, got {} and {}",
                        p.window_ini_us, p.window_fin_us
                    )));
                }
                if p.spectrum_points < 3 {
                    return Err(CliError::Config(format!(
                        "[params] spectrum_points must be >= 3, got {}",
                        p.spectrum_points
                    )));
                }
            }
            ActionParams::Lzcompare(p) => {
                if self.protocol.family != FamilyName::Polcpmg
                    || self.protocol.delta_theta_pi_units == 0.0
                {
                    return Err(CliError::Config(
                        "lzcompare requires polcpmg with a nonzero over-rotation \
                         (the split resonance pair)"
                            .into(),
                    ));
                }
                if p.gamma0.is_empty() {
                    return Err(CliError::Config("[params] gamma0 must not be empty".into()));
                }
                for &g in &p.gamma0 {
                    if !(g > 0.0 && g.is_finite()) {
                        return Err(CliError::Config(format!(
                            "[params] gamma0 entries must be positive, got {g}"
                        )));
                    }
                }
                if !(p.w_linewidths > 0.0 && p.w_linewidths.is_finite()) {
                    return Err(CliError::Config(format!(
                        "[params] w_linewidths must be positive, got {}",
                        p.w_linewidths
                    )));
                }
                if p.sign != 1.0 && p.sign != -1.0 {
                    return Err(CliError::Config(format!(
                        "[params] sign must be +1 or -1, got {}",
                        p.sign
                    )));
                }
                for &a in &p.a_x_khz {
                    if !(a > 0.0 && a.is_finite()) {
                        return Err(CliError::Config(format!(
                            "[params] a_x_khz entries must be positive, got {a}"
                        )));
                    }
                }
                let Some(label) = &p.nucleus else {
                    return Err(CliError::Config(
                        "[params] nucleus label is unresolved; run through resolve()".into(),
                    ));
                };
                nucleus_index(&self.system, label)?;
                parse_electron_init(&p.electron_init)?;
                parse_nuclear_init(&p.nuclear_init)?;
            }
        }
        Ok(())
    }
}

/// Ordered nucleus specs of a system config: registry labels first, then
/// custom entries.
pub fn nucleus_specs(config: &SystemConfig) -> Result<Vec<NuclearSpec>> {
    let mut specs = Vec::new();
    for label in &config.nuclei {
        specs.push(adpulse_core::registry_nucleus(label)?);
    }
    for c in &config.custom {
        specs.push(NuclearSpec::from_khz(c.label.clone(), c.a_x_khz, c.a_z_khz)?);
    }
    Ok(specs)
}

/// Labels of all nuclei in config order.
pub fn nucleus_labels(config: &SystemConfig) -> Vec<String> {
    let mut labels: Vec<String> = config.nuclei.clone();
    labels.extend(config.custom.iter().map(|c| c.label.clone()));
    labels
}

fn first_label(config: &SystemConfig) -> Result<String> {
    nucleus_labels(config)
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Config("[system] at least one nucleus is required".into()))
}

/// Index of the nucleus with the given label.
pub fn nucleus_index(config: &SystemConfig, label: &str) -> Result<usize> {
    nucleus_labels(config)
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| {
            CliError::Config(format!(
                "nucleus '{label}' is not in the system (have: {})",
                nucleus_labels(config).join(", ")
            ))
        })
}

/// Build the core spin system from a system config.
pub fn build_system(config: &SystemConfig) -> Result<SpinSystem> {
    let omega_l = match (config.larmor_khz, config.field_t) {
        (Some(khz), None) => khz_to_rad_per_s(khz),
        (None, Some(b)) => larmor_from_field(b),
        _ => {
            return Err(CliError::Config(
                "[system] give exactly one of larmor_khz and field_t".into(),
            ));
        }
    };
    Ok(SpinSystem::new(omega_l, nucleus_specs(config)?)?)
}

/// Build the core protocol spec from a protocol config.
pub fn build_protocol(config: &ProtocolConfig) -> Result<ProtocolSpec> {
    Ok(ProtocolSpec::new(
        config.family.to_core(),
        config.delta_theta_pi_units * PI,
        config.t_pi_ns * 1e-9,
    )?)
}

/// Parse an electron reset name.
pub fn parse_reinit(s: &str) -> Result<Reinit> {
    Ok(Reinit::from_str(s)?)
}

/// Parse an electron initial-state name.
pub fn parse_electron_init(s: &str) -> Result<ElectronInit> {
    match s {
        "ket0" => Ok(ElectronInit::Ket0),
        "ket1" => Ok(ElectronInit::Ket1),
        "Xplus" => Ok(ElectronInit::XPlus),
        "Xminus" => Ok(ElectronInit::XMinus),
        other => Err(CliError::Config(format!(
            "unknown electron_init '{other}' (expected ket0, ket1, Xplus, Xminus)"
        ))),
    }
}

/// Parse a nuclear initial-state name.
pub fn parse_nuclear_init(s: &str) -> Result<NuclearInit> {
    match s {
        "all_down" => Ok(NuclearInit::AllDown),
        "all_up" => Ok(NuclearInit::AllUp),
        "mixed" => Ok(NuclearInit::MaximallyMixed),
        other => Err(CliError::Config(format!(
            "unknown nuclear_init '{other}' (expected all_down, all_up, mixed)"
        ))),
    }
}

/// Parse a storage start-state name.
pub fn parse_start_state(s: &str) -> Result<NuclearStartState> {
    match s {
        "down" => Ok(NuclearStartState::Down),
        "up" => Ok(NuclearStartState::Up),
        other => Err(CliError::Config(format!(
            "unknown nuclear_init '{other}' (expected down, up)"
        ))),
    }
}
