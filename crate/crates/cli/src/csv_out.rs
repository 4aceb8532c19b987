//! Deterministic CSV emission. Every float is written in Rust's shortest
//! round-trip form, so identical runs produce byte-identical files; column
//! units are part of the header names.

use std::path::Path;

use adpulse_core::{Anticrossing, CrossingPairMap, FloquetSpectrum, FoldWindow, Trajectory};

use crate::Result;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Branch-tracked spectrum: one row per (branch, grid point).
pub fn write_spectrum_csv(path: &Path, spectrum: &FloquetSpectrum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "branch",
        "tau_s",
        "eigenphase_rad",
        "m_z_twice",
        "electron_x",
        "gap_full_rad",
        "gap_half_rad",
        "ambiguous",
    ])?;
    let flagged: std::collections::BTreeSet<(usize, usize)> = spectrum
        .ambiguities
        .iter()
        .map(|a| (a.step, a.branch))
        .collect();
    for l in 0..spectrum.n_branches() {
        for (k, point) in spectrum.points.iter().enumerate() {
            let label = &point.labels[l];
            w.write_record([
                l.to_string(),
                fmt(point.tau),
                fmt(point.eigenphases[l]),
                label.m_z_twice.to_string(),
                label.electron_x.to_string(),
                fmt(point.gap_to_nearest(l, FoldWindow::Full)),
                fmt(point.gap_to_nearest(l, FoldWindow::Half)),
                u8::from(flagged.contains(&(k, l))).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// Located anticrossings of a spectrum scan.
pub fn write_anticrossings_csv(path: &Path, list: &[Anticrossing]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["tau_center_s", "gap_rad", "branch_a", "branch_b"])?;
    for a in list {
        w.write_record([
            fmt(a.tau_center),
            fmt(a.gap),
            a.branch_a.to_string(),
            a.branch_b.to_string(),
        ])?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// Swept-state trajectory: one row per recorded step, cumulative across
/// repetitions.
pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory, n_nuclei: usize) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec![
        "rep".to_string(),
        "step".to_string(),
        "tau_s".to_string(),
        "t_cum_s".to_string(),
        "coherence".to_string(),
        "polarization".to_string(),
        "m_z".to_string(),
        "purity".to_string(),
    ];
    for n in 1..=n_nuclei {
        header.push(format!("two_iz_{n}"));
    }
    w.write_record(&header)?;
    for s in &trajectory.steps {
        let mut row = vec![
            s.rep.to_string(),
            s.step.to_string(),
            fmt(s.tau),
            fmt(s.t),
            fmt(s.obs.coherence),
            fmt(s.obs.polarization),
            fmt(s.obs.m_z),
            fmt(s.obs.purity),
        ];
        row.extend(s.obs.per_spin_two_iz.iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// Per-repetition summaries of a trajectory.
pub fn write_reps_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["rep", "polarization", "coherence", "m_z", "purity", "gain"])?;
    for r in &trajectory.reps {
        w.write_record([
            r.rep.to_string(),
            fmt(r.obs.polarization),
            fmt(r.obs.coherence),
            fmt(r.obs.m_z),
            fmt(r.obs.purity),
            fmt(r.gain),
        ])?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// One point of a simulated-vs-closed-form comparison curve.
pub struct LzCurveRow {
    pub a_x_khz: f64,
    pub gamma0: f64,
    pub tau_s: f64,
    pub completed_fraction: f64,
    pub p_sim: f64,
    pub p_lz: f64,
}

/// Comparison curves, one row per (configuration, step).
pub fn write_lz_curve_csv(path: &Path, rows: &[LzCurveRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "a_x_khz",
        "gamma0",
        "tau_s",
        "completed_fraction",
        "p_sim",
        "p_lz",
        "abs_dev",
    ])?;
    for r in rows {
        w.write_record([
            fmt(r.a_x_khz),
            fmt(r.gamma0),
            fmt(r.tau_s),
            fmt(r.completed_fraction),
            fmt(r.p_sim),
            fmt(r.p_lz),
            fmt((r.p_sim - r.p_lz).abs()),
        ])?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// Per-configuration summary of a comparison run.
pub struct LzSummaryRow {
    pub a_x_khz: f64,
    pub gamma0: f64,
    pub tau_r_s: f64,
    pub gap_rad: f64,
    pub delta_tau_s: f64,
    pub n_steps: usize,
    pub t_tot_s: f64,
    pub p_sim_end: f64,
    pub p_lz_end: f64,
    pub curve_max_abs_dev: f64,
    pub curve_rms_dev: f64,
}

/// Summary table, one row per (a_x, gamma0) configuration.
/// `t_tot_ax_rad` is the total protocol time multiplied by the angular
/// transverse coupling; it is constant when t_Tot scales as 1/A_x.
pub fn write_lz_summary_csv(path: &Path, rows: &[LzSummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "a_x_khz",
        "gamma0",
        "tau_r_s",
        "gap_rad",
        "delta_tau_s",
        "n_steps",
        "t_tot_s",
        "t_tot_ax_rad",
        "p_sim_end",
        "p_lz_end",
        "end_abs_dev",
        "curve_max_abs_dev",
        "curve_rms_dev",
    ])?;
    for r in rows {
        let ax_rad = adpulse_core::units::khz_to_rad_per_s(r.a_x_khz);
        w.write_record([
            fmt(r.a_x_khz),
            fmt(r.gamma0),
            fmt(r.tau_r_s),
            fmt(r.gap_rad),
            fmt(r.delta_tau_s),
            r.n_steps.to_string(),
            fmt(r.t_tot_s),
            fmt(r.t_tot_s * ax_rad),
            fmt(r.p_sim_end),
            fmt(r.p_lz_end),
            fmt((r.p_sim_end - r.p_lz_end).abs()),
            fmt(r.curve_max_abs_dev),
            fmt(r.curve_rms_dev),
        ])?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

const BASIS_LABELS: [&str; 4] = ["0up", "0down", "1up", "1down"];

/// Selection rules of a storage crossing pair: one row per basis state.
pub fn write_fates_csv(path: &Path, map: &CrossingPairMap) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "initial_index",
        "initial_label",
        "final_index",
        "final_label",
        "fate",
        "fidelity",
    ])?;
    for f in &map.fates {
        w.write_record([
            f.initial.to_string(),
            BASIS_LABELS[f.initial].to_string(),
            f.final_dominant.to_string(),
            BASIS_LABELS[f.final_dominant].to_string(),
            format!("{:?}", f.fate).to_lowercase(),
            fmt(f.fidelity),
        ])?;
    }
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

/// Flat record of one storage run.
pub struct StorageRow {
    pub nucleus: String,
    pub harmonic: u32,
    pub amp_a: f64,
    pub amp_b: f64,
    pub nuclear_init: String,
    pub tau_center_s: f64,
    pub gap_rad: f64,
    pub slope_rad_per_s: f64,
    pub width_s: f64,
    pub n_steps: usize,
    pub adiabaticity: f64,
    pub fidelity: f64,
    pub fidelity_strict: f64,
    pub electron_branch: String,
    pub larmor_phase_rad: f64,
    pub unresolved: bool,
    pub read_back_fidelity: Option<f64>,
}

/// Single-row storage summary.
pub fn write_storage_csv(path: &Path, row: &StorageRow) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "nucleus",
        "harmonic",
        "amp_a",
        "amp_b",
        "nuclear_init",
        "tau_center_s",
        "gap_rad",
        "slope_rad_per_s",
        "width_s",
        "n_steps",
        "adiabaticity",
        "fidelity",
        "fidelity_strict",
        "electron_branch",
        "larmor_phase_rad",
        "unresolved",
        "read_back_fidelity",
    ])?;
    w.write_record([
        row.nucleus.clone(),
        row.harmonic.to_string(),
        fmt(row.amp_a),
        fmt(row.amp_b),
        row.nuclear_init.clone(),
        fmt(row.tau_center_s),
        fmt(row.gap_rad),
        fmt(row.slope_rad_per_s),
        fmt(row.width_s),
        row.n_steps.to_string(),
        fmt(row.adiabaticity),
        fmt(row.fidelity),
        fmt(row.fidelity_strict),
        row.electron_branch.clone(),
        fmt(row.larmor_phase_rad),
        u8::from(row.unresolved).to_string(),
        row.read_back_fidelity.map(fmt).unwrap_or_default(),
    ])?;
    w.flush().map_err(|e| crate::CliError::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips_exactly() {
        for v in [0.1, 1.0 / 3.0, 1.158750e-6, -0.9393517, 2.7112] {
            let s = fmt(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
