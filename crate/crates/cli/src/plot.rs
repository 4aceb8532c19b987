//! Static SVG rendering of the emitted CSV schemas. Plot generation is a
//! convenience layer: callers must treat failures here as warnings so CSV
//! artifacts are never affected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::{CliError, Result};

/// Supported plot kinds, keyed to the CSV schemas they consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Branch-tracked eigenphase spectrum (spectrum.csv).
    Spectrum,
    /// Polarization trajectories (trajectory.csv or lz_curve.csv); overlays
    /// the closed-form curve when both `p_sim` and `p_lz` are present.
    Trajectory,
    /// Fidelity bars (fates.csv or storage.csv).
    Fidelity,
}

impl FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectrum" => Ok(PlotKind::Spectrum),
            "trajectory" => Ok(PlotKind::Trajectory),
            "fidelity" => Ok(PlotKind::Fidelity),
            other => Err(CliError::Config(format!(
                "unknown plot kind '{other}' (expected spectrum, trajectory, fidelity)"
            ))),
        }
    }
}

/// Render `csv_path` as `kind` into `svg_path`.
pub fn emit_plot(csv_path: &Path, kind: PlotKind, svg_path: &Path) -> Result<()> {
    let table = Table::read(csv_path)?;
    let svg = match kind {
        PlotKind::Spectrum => render_spectrum(&table)?,
        PlotKind::Trajectory => render_trajectory(&table)?,
        PlotKind::Fidelity => render_fidelity(&table)?,
    };
    std::fs::write(svg_path, svg)?;
    Ok(())
}

/// Minimal in-memory CSV table.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record?.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.col(name).ok_or_else(|| {
            CliError::Config(format!(
                "schema mismatch: column '{name}' missing (have: {})",
                self.headers.join(", ")
            ))
        })
    }

    fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col].parse().map_err(|_| {
            CliError::Config(format!(
                "schema mismatch: row {row} column '{}' is not a number: '{}'",
                self.headers[col], self.rows[row][col]
            ))
        })
    }
}

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 560.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 12] = [
    "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951", "#ff8ab7", "#a463f2", "#97bbf5",
    "#9c6b4e", "#9498a0", "#bf4040", "#2f6f6f",
];

/// Linear data-to-pixel axis.
struct AxisScale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl AxisScale {
    fn new(mut lo: f64, mut hi: f64, px_lo: f64, px_hi: f64) -> AxisScale {
        if !(lo.is_finite() && hi.is_finite()) || (lo == 0.0 && hi == 0.0 && lo == hi) {
            lo = 0.0;
            hi = 1.0;
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        AxisScale { lo: lo - pad, hi: hi + pad, px_lo, px_hi }
    }

    fn px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    /// Round tick positions at a 1/2/5 step covering the range.
    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| span / s <= 6.0)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() * step;
        let mut t = Vec::new();
        let mut v = first;
        while v <= self.hi + 1e-9 * step {
            t.push(v);
            v += step;
        }
        t
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s.is_empty() || s == "-" { "0".to_string() } else { s.to_string() }
    }
}

/// Common frame: background, axes, ticks, labels, title.
fn frame(x: &AxisScale, y: &AxisScale, x_label: &str, y_label: &str, title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="13">
<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>
<text x="{tx}" y="24" text-anchor="middle" font-size="15">{title}</text>
"#,
        tx = WIDTH / 2.0,
    );
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{y1:.2}" stroke="#dddddd"/>
<text x="{px:.2}" y="{ty:.2}" text-anchor="middle">{label}</text>"#,
            y0 = MARGIN_T,
            y1 = HEIGHT - MARGIN_B,
            ty = HEIGHT - MARGIN_B + 18.0,
            label = tick_label(t),
        );
    }
    for t in y.ticks() {
        let py = y.px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#dddddd"/>
<text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"#,
            x0 = MARGIN_L,
            x1 = WIDTH - MARGIN_R,
            tx = MARGIN_L - 6.0,
            ty = py + 4.0,
            label = tick_label(t),
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333333"/>
<text x="{xl:.2}" y="{yl:.2}" text-anchor="middle">{x_label}</text>
<text x="18" y="{ym:.2}" text-anchor="middle" transform="rotate(-90 18 {ym:.2})">{y_label}</text>"#,
        x0 = MARGIN_L,
        y0 = MARGIN_T,
        w = WIDTH - MARGIN_L - MARGIN_R,
        h = HEIGHT - MARGIN_T - MARGIN_B,
        xl = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        yl = HEIGHT - 14.0,
        ym = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
    );
    s
}

/// One polyline per continuous segment; `breaks` marks indices that start a
/// new segment (fold wraps).
fn polylines(
    out: &mut String,
    xs: &[f64],
    ys: &[f64],
    x: &AxisScale,
    y: &AxisScale,
    class: &str,
    color: &str,
    dashed: bool,
    break_jump: Option<f64>,
) {
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let mut segment: Vec<String> = Vec::new();
    let mut prev_y = f64::NAN;
    let mut flush = |seg: &mut Vec<String>, out: &mut String| {
        if seg.len() >= 2 {
            let _ = writeln!(
                out,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                seg.join(" ")
            );
        }
        seg.clear();
    };
    for i in 0..xs.len() {
        if let Some(jump) = break_jump {
            if i > 0 && (ys[i] - prev_y).abs() > jump {
                flush(&mut segment, out);
            }
        }
        prev_y = ys[i];
        segment.push(format!("{:.2},{:.2}", x.px(xs[i]), y.px(ys[i])));
    }
    flush(&mut segment, out);
}

fn data_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Eigenphase spectrum: one polyline per tracked branch, colored by the
/// branch's asymptotic total nuclear spin projection.
fn render_spectrum(table: &Table) -> Result<String> {
    let c_branch = table.require("branch")?;
    let c_tau = table.require("tau_s")?;
    let c_phase = table.require("eigenphase_rad")?;
    let c_mz = table.require("m_z_twice")?;

    // Collect per-branch series in row order.
    let mut branches: Vec<(i64, i64, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in 0..table.rows.len() {
        let b: i64 = table.rows[r][c_branch]
            .parse()
            .map_err(|_| CliError::Config("schema mismatch: branch must be an integer".into()))?;
        let mz: i64 = table.rows[r][c_mz]
            .parse()
            .map_err(|_| CliError::Config("schema mismatch: m_z_twice must be an integer".into()))?;
        let tau = table.f64_at(r, c_tau)? * 1e6;
        let phase = table.f64_at(r, c_phase)?;
        match branches.iter_mut().find(|(id, ..)| *id == b) {
            Some((_, _, xs, ys)) => {
                xs.push(tau);
                ys.push(phase);
            }
            None => branches.push((b, mz, vec![tau], vec![phase])),
        }
    }

    let (x_lo, x_hi) = data_range(branches.iter().flat_map(|(_, _, xs, _)| xs.iter().copied()));
    let (y_lo, y_hi) = data_range(branches.iter().flat_map(|(.., ys)| ys.iter().copied()));
    let x = AxisScale::new(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R);
    let y = AxisScale::new(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T);

    let mut mz_values: Vec<i64> = branches.iter().map(|(_, mz, ..)| *mz).collect();
    mz_values.sort_unstable();
    mz_values.dedup();

    let mut svg = frame(&x, &y, "pulse spacing (us)", "eigenphase (rad)", "floquet spectrum");
    for (b, mz, xs, ys) in &branches {
        let ci = mz_values.iter().position(|m| m == mz).unwrap_or(0);
        let color = PALETTE[ci % PALETTE.len()];
        polylines(
            &mut svg,
            xs,
            ys,
            &x,
            &y,
            &format!("branch-{b}"),
            color,
            false,
            Some(std::f64::consts::PI),
        );
    }
    for (i, mz) in mz_values.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{ty:.2}" fill="{color}">2Mz={mz}</text>"#,
            tx = WIDTH - MARGIN_R - 78.0,
            ty = MARGIN_T + 16.0 + 16.0 * i as f64,
            color = PALETTE[i % PALETTE.len()],
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Polarization trajectories; overlays the closed form when present.
fn render_trajectory(table: &Table) -> Result<String> {
    // x axis preference: sweep fraction, then cumulative time, then spacing.
    let (c_x, x_label, x_scale) = if let Some(c) = table.col("completed_fraction") {
        (c, "completed sweep fraction", 1.0)
    } else if let Some(c) = table.col("t_cum_s") {
        (c, "protocol time (ms)", 1e3)
    } else {
        (table.require("tau_s")?, "pulse spacing (us)", 1e6)
    };

    // Series: simulated + closed form, or the plain observable columns.
    let series: Vec<(&str, usize, bool)> = if let Some(c_sim) = table.col("p_sim") {
        let mut s = vec![("p_sim", c_sim, false)];
        if let Some(c_lz) = table.col("p_lz") {
            s.push(("p_lz", c_lz, true));
        }
        s
    } else {
        let c_p = table.require("polarization")?;
        let mut s = vec![("polarization", c_p, false)];
        if let Some(c_l) = table.col("coherence") {
            s.push(("coherence", c_l, true));
        }
        s
    };

    // Group rows by configuration when the comparison keys are present.
    let group_cols: Vec<usize> =
        ["a_x_khz", "gamma0"].iter().filter_map(|n| table.col(n)).collect();
    let mut groups: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
    for r in 0..table.rows.len() {
        let key: Vec<String> = group_cols.iter().map(|&c| table.rows[r][c].clone()).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((key, vec![r])),
        }
    }

    let mut all_x = Vec::new();
    let mut all_y = Vec::new();
    for r in 0..table.rows.len() {
        all_x.push(table.f64_at(r, c_x)? * x_scale);
        for (_, c, _) in &series {
            all_y.push(table.f64_at(r, *c)?);
        }
    }
    let (x_lo, x_hi) = data_range(all_x.iter().copied());
    let (y_lo, y_hi) = data_range(all_y.iter().copied());
    let x = AxisScale::new(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R);
    let y = AxisScale::new(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T);

    let mut svg = frame(&x, &y, x_label, "polarization", "swept-state trajectory");
    let mut legend_row = 0usize;
    for (gi, (key, rows)) in groups.iter().enumerate() {
        for (si, (name, col, dashed)) in series.iter().enumerate() {
            let color = PALETTE[(gi * series.len() + si) % PALETTE.len()];
            let xs: Vec<f64> =
                rows.iter().map(|&r| table.f64_at(r, c_x).map(|v| v * x_scale)).collect::<Result<_>>()?;
            let ys: Vec<f64> = rows.iter().map(|&r| table.f64_at(r, *col)).collect::<Result<_>>()?;
            polylines(&mut svg, &xs, &ys, &x, &y, name, color, *dashed, None);
            let label = if key.is_empty() {
                name.to_string()
            } else {
                format!("{name} [{}]", key.join(", "))
            };
            let _ = writeln!(
                svg,
                r#"<text x="{tx:.2}" y="{ty:.2}" fill="{color}">{label}</text>"#,
                tx = MARGIN_L + 10.0,
                ty = MARGIN_T + 16.0 + 15.0 * legend_row as f64,
            );
            legend_row += 1;
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Fidelity bars from fates.csv (per basis state) or storage.csv (named
/// fidelities of one run).
fn render_fidelity(table: &Table) -> Result<String> {
    let mut bars: Vec<(String, f64)> = Vec::new();
    if let Some(c_label) = table.col("initial_label") {
        let c_fid = table.require("fidelity")?;
        let c_fate = table.col("fate");
        for r in 0..table.rows.len() {
            let mut label = table.rows[r][c_label].clone();
            if let Some(c) = c_fate {
                label = format!("{label} ({})", table.rows[r][c]);
            }
            bars.push((label, table.f64_at(r, c_fid)?));
        }
    } else {
        let c_fid = table.require("fidelity")?;
        for r in 0..table.rows.len() {
            bars.push(("fidelity".to_string(), table.f64_at(r, c_fid)?));
            if let Some(c) = table.col("fidelity_strict") {
                bars.push(("fidelity_strict".to_string(), table.f64_at(r, c)?));
            }
            if let Some(c) = table.col("read_back_fidelity") {
                if !table.rows[r][c].is_empty() {
                    bars.push(("read_back".to_string(), table.f64_at(r, c)?));
                }
            }
        }
    }

    let x = AxisScale::new(0.0, bars.len().max(1) as f64, MARGIN_L, WIDTH - MARGIN_R);
    let y = AxisScale::new(0.0, 1.0, HEIGHT - MARGIN_B, MARGIN_T);
    // Category axis: suppress numeric x ticks by reusing the frame then
    // drawing labels under each bar.
    let mut svg = frame(&AxisScale::new(0.0, 1.0, MARGIN_L, WIDTH - MARGIN_R), &y, "", "fidelity", "storage fidelity");
    for (i, (label, v)) in bars.iter().enumerate() {
        let cx = x.px(i as f64 + 0.5);
        let half_w = 0.30 * (x.px(1.0) - x.px(0.0)).abs();
        let py = y.px(*v);
        let base = y.px(0.0);
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{bx:.2}" y="{by:.2}" width="{bw:.2}" height="{bh:.2}" fill="{color}"/>
<text x="{cx:.2}" y="{ly:.2}" text-anchor="middle">{label}</text>
<text x="{cx:.2}" y="{vy:.2}" text-anchor="middle">{value}</text>"#,
            bx = cx - half_w,
            by = py.min(base),
            bw = 2.0 * half_w,
            bh = (base - py).abs(),
            color = PALETTE[i % PALETTE.len()],
            ly = HEIGHT - MARGIN_B + 34.0,
            vy = py - 6.0,
            value = tick_label(*v),
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
