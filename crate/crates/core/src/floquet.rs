//! Floquet analysis: eigenphase spectra of one-period propagators over a
//! pulse-spacing scan, continuous branch tracking, and avoided-crossing
//! location.
//!
//! Branch continuity uses eigenvector overlap, not phase proximity, because
//! eigenphases genuinely cross. Exactly degenerate eigenvalues (echo
//! protocols pair every phase) leave the eigensolver's basis arbitrary
//! inside each cluster, so cluster bases are re-aligned: at the first grid
//! point toward electron-X eigenstates, afterwards toward the previous
//! step's branch vectors.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::linalg::{eig_unitary, gauge_fix_columns, CMatrix, CVector};
use crate::propagator::{one_period_propagator, Method, Propagator};
use crate::protocols::{build_sequence, resonance_tau, ProtocolSpec};
use crate::spin_model::{SpinOperators, SpinSystem};
use crate::units::TWO_PI;

/// Minimum branch-continuity overlap before a point is flagged ambiguous.
pub const DEFAULT_OVERLAP_FLOOR: f64 = 0.5;
/// Gaps at or below this are treated as exact degeneracies (true crossings
/// or symmetry pairs), not avoided crossings.
pub const DEGENERACY_FLOOR: f64 = 1e-9;
/// Phases closer than this are clustered as one degenerate eigenvalue.
const CLUSTER_PHASE_TOL: f64 = 1e-9;

/// Display window for eigenphases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldWindow {
    /// `(-pi, pi]` — the natural window of `arg`.
    Full,
    /// `(-pi/2, pi/2]` — identifies phases that differ by pi.
    Half,
}

impl FoldWindow {
    /// Width of the window (the fold period).
    pub fn period(self) -> f64 {
        match self {
            FoldWindow::Full => TWO_PI,
            FoldWindow::Half => PI,
        }
    }
}

/// Shift a phase by the unique multiple of the window width landing it in
/// the window (half-open on the left: `(-p/2, p/2]`).
pub fn fold_phase(phase: f64, window: FoldWindow) -> f64 {
    let p = window.period();
    let r = phase.rem_euclid(p);
    if r > p / 2.0 {
        r - p
    } else {
        r
    }
}

/// Circular distance between two phases within the window period.
pub fn circular_gap(a: f64, b: f64, window: FoldWindow) -> f64 {
    let p = window.period();
    let d = (a - b).rem_euclid(p);
    d.min(p - d)
}

/// Asymptotic tag of a branch: total nuclear projection (twice, so it is an
/// integer) and electron X character at the scan start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchLabel {
    /// `2 M_z` rounded to the nearest integer.
    pub m_z_twice: i32,
    /// `+1` for X+, `-1` for X-, `0` when the electron character is mixed.
    pub electron_x: i8,
}

impl std::fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Mz={:+}/2", self.m_z_twice)?;
        match self.electron_x {
            1 => write!(f, ",X+"),
            -1 => write!(f, ",X-"),
            _ => Ok(()),
        }
    }
}

/// Eigendecomposition of one propagator.
#[derive(Debug, Clone)]
pub struct FloquetPoint {
    pub tau: f64,
    /// Eigenphases in `(-pi, pi]`; within a [`FloquetSpectrum`] the index is
    /// the branch id, otherwise phases are ascending.
    pub eigenphases: Vec<f64>,
    /// Eigenvector columns matching `eigenphases`, unit norm, gauge fixed.
    pub eigenvectors: CMatrix,
    /// Per-branch asymptotic tags.
    pub labels: Vec<BranchLabel>,
}

impl FloquetPoint {
    pub fn dim(&self) -> usize {
        self.eigenphases.len()
    }

    /// Smallest circular distance from branch `l`'s phase to any other
    /// branch, ignoring exact degeneracies (gap <= [`DEGENERACY_FLOOR`]).
    pub fn gap_to_nearest(&self, l: usize, window: FoldWindow) -> f64 {
        let mut best = f64::INFINITY;
        for m in 0..self.dim() {
            if m == l {
                continue;
            }
            let d = circular_gap(self.eigenphases[l], self.eigenphases[m], window);
            if d > DEGENERACY_FLOOR && d < best {
                best = d;
            }
        }
        best
    }
}

/// Continuity-ambiguity record: branch `branch` at grid step `step` matched
/// its predecessor with overlap below the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ambiguity {
    pub step: usize,
    pub branch: usize,
    pub overlap: f64,
}

/// Branch-tracked spectrum over a pulse-spacing grid.
#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    /// One point per grid value; eigenphase/eigenvector index = branch id.
    pub points: Vec<FloquetPoint>,
    /// Per point, the permutation from ascending-phase order to branch
    /// order: branch `l` at point `k` holds sorted column `branch_map[k][l]`.
    pub branch_map: Vec<Vec<usize>>,
    /// Points where branch continuity dropped below `overlap_floor`.
    pub ambiguities: Vec<Ambiguity>,
    pub overlap_floor: f64,
}

impl FloquetSpectrum {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_branches(&self) -> usize {
        self.points.first().map_or(0, FloquetPoint::dim)
    }

    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    /// Eigenphase curve of one branch across the grid.
    pub fn branch_phases(&self, l: usize) -> Vec<f64> {
        self.points.iter().map(|p| p.eigenphases[l]).collect()
    }

    /// Circular gap between two branches across the grid.
    pub fn pair_gap_curve(&self, a: usize, b: usize, window: FoldWindow) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| circular_gap(p.eigenphases[a], p.eigenphases[b], window))
            .collect()
    }

    /// Branch indices carrying the given label.
    pub fn branches_with_label(&self, pred: impl Fn(&BranchLabel) -> bool) -> Vec<usize> {
        self.points
            .first()
            .map(|p| {
                p.labels
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| pred(l))
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// An avoided crossing: a refined local minimum of a branch-pair gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anticrossing {
    pub tau_center: f64,
    /// Gap (rad) at the refined center, in the window used for location.
    pub gap: f64,
    pub branch_a: usize,
    pub branch_b: usize,
}

/// Decompose one propagator into a Floquet point. Labels are computed from
/// the eigenvectors' own electron-X and nuclear-projection expectations.
pub fn floquet_decompose(propagator: &Propagator, ops: &SpinOperators) -> Result<FloquetPoint> {
    let (eigenphases, eigenvectors) = eig_unitary(&propagator.matrix).map_err(|e| {
        CoreError::EigenFailure {
            context: format!("tau = {:.9e} s: {e}", propagator.tau),
        }
    })?;
    let sx2 = ops.s[0].map(|z| z * 2.0);
    let mz = ops.total_nuclear_z();
    let labels = (0..eigenphases.len())
        .map(|j| label_for_vector(&eigenvectors.column(j).into_owned(), &sx2, &mz))
        .collect();
    Ok(FloquetPoint { tau: propagator.tau, eigenphases, eigenvectors, labels })
}

/// Fold all eigenphases of a point into the window.
pub fn fold_eigenphases(point: &FloquetPoint, window: FoldWindow) -> Vec<f64> {
    point.eigenphases.iter().map(|&e| fold_phase(e, window)).collect()
}

fn label_for_vector(v: &CVector, sx2: &CMatrix, mz: &CMatrix) -> BranchLabel {
    let x = (v.adjoint() * sx2 * v)[(0, 0)].re;
    let m = (v.adjoint() * mz * v)[(0, 0)].re;
    BranchLabel {
        m_z_twice: (2.0 * m).round() as i32,
        electron_x: if x > 0.2 {
            1
        } else if x < -0.2 {
            -1
        } else {
            0
        },
    }
}

/// Indices of degenerate clusters in an ascending phase list, including the
/// wrap-around pair at the `±pi` boundary (same eigenvalue).
fn phase_clusters(phases: &[f64]) -> Vec<Vec<usize>> {
    let n = phases.len();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut current = vec![0usize];
    for i in 1..n {
        if phases[i] - phases[i - 1] < CLUSTER_PHASE_TOL {
            current.push(i);
        } else {
            clusters.push(std::mem::take(&mut current));
            current = vec![i];
        }
    }
    clusters.push(current);
    // Merge the first and last clusters if they meet across the boundary.
    if clusters.len() > 1 {
        let lo = phases[clusters[0][0]];
        let hi = phases[*clusters.last().unwrap().last().unwrap()];
        if (lo + TWO_PI) - hi < CLUSTER_PHASE_TOL {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }
    clusters
}

/// Re-span the columns `cols` of `vectors` (an orthonormal degenerate
/// cluster) so they align with `targets`: each target is projected onto the
/// cluster subspace and the projections are orthonormalized in order of
/// decreasing norm; any rank deficiency is filled from the original columns.
fn align_cluster(vectors: &mut CMatrix, cols: &[usize], targets: &[CVector]) {
    let m = cols.len();
    let d = vectors.nrows();
    let mut sub = CMatrix::zeros(d, m);
    for (j, &c) in cols.iter().enumerate() {
        sub.set_column(j, &vectors.column(c));
    }
    // Projection norms of every target onto the subspace.
    let mut scored: Vec<(f64, CVector)> = targets
        .iter()
        .map(|t| {
            let coeff = sub.adjoint() * t;
            let proj = &sub * &coeff;
            (proj.norm(), proj)
        })
        .filter(|(n, _)| *n > 1e-6)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut chosen: Vec<CVector> = Vec::with_capacity(m);
    let orthogonalize = |v: &CVector, basis: &[CVector]| -> CVector {
        let mut w = v.clone();
        // Two Gram-Schmidt passes for numerical stability.
        for _ in 0..2 {
            for b in basis {
                let overlap = (b.adjoint() * &w)[(0, 0)];
                w -= b.map(|z| z * overlap);
            }
        }
        w
    };
    for (_, proj) in scored {
        if chosen.len() == m {
            break;
        }
        let w = orthogonalize(&proj, &chosen);
        let norm = w.norm();
        if norm > 1e-8 {
            chosen.push(w.map(|z| z / norm));
        }
    }
    // Complete the basis from the original cluster columns if needed.
    for j in 0..m {
        if chosen.len() == m {
            break;
        }
        let w = orthogonalize(&sub.column(j).into_owned(), &chosen);
        let norm = w.norm();
        if norm > 1e-8 {
            chosen.push(w.map(|z| z / norm));
        }
    }
    for (j, &c) in cols.iter().enumerate() {
        vectors.set_column(c, &chosen[j]);
    }
    gauge_fix_columns(vectors);
}

/// Greedy maximal-overlap assignment: returns `perm` with `perm[i] = j`
/// matching previous branch `i` to new column `j`.
fn greedy_assignment(overlap: &[Vec<f64>]) -> Vec<usize> {
    let n = overlap.len();
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (overlap[i][j], i, j))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut assigned = 0;
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
            assigned += 1;
            if assigned == n {
                break;
            }
        }
    }
    perm
}

/// Optimal assignment maximizing the total overlap (Hungarian algorithm,
/// O(n^3)). Returns `perm[i] = j`.
fn optimal_assignment(profit: &[Vec<f64>]) -> Vec<usize> {
    let n = profit.len();
    // Shortest-augmenting-path Hungarian on cost = -profit, 1-indexed.
    let cost = |i: usize, j: usize| -profit[i][j];
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assignment = vec![0usize; n + 1]; // assignment[j] = row occupying column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assignment[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assignment[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assignment[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assignment[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assignment[j0] = assignment[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if assignment[j] > 0 {
            perm[assignment[j] - 1] = j - 1;
        }
    }
    perm
}

/// Scan the Floquet spectrum of a protocol over a pulse-spacing grid.
///
/// Decompositions run in parallel; branch tracking is a sequential pass in
/// grid order. Branch labels are assigned at the first grid point and
/// propagated. `overlap_floor` controls ambiguity flagging (default
/// [`DEFAULT_OVERLAP_FLOOR`]).
pub fn scan_spectrum(
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    taus: &[f64],
    overlap_floor: f64,
) -> Result<FloquetSpectrum> {
    if taus.is_empty() {
        return Err(CoreError::InvalidInput("empty tau grid".into()));
    }
    let ascending = taus.windows(2).all(|w| w[0] < w[1]);
    let descending = taus.windows(2).all(|w| w[0] > w[1]);
    if !(ascending || descending) {
        return Err(CoreError::InvalidInput("tau grid must be strictly monotone".into()));
    }
    if !(0.0..1.0).contains(&overlap_floor) {
        return Err(CoreError::InvalidInput(format!(
            "overlap_floor must be in [0, 1), got {overlap_floor}"
        )));
    }
    let ops = SpinOperators::build(system.n_nuclei());
    let decomps: Vec<(f64, Vec<f64>, CMatrix)> = taus
        .par_iter()
        .map(|&tau| {
            let seq = build_sequence(protocol, tau)?;
            let prop = one_period_propagator(system, &ops, &seq, Method::Fast)?;
            let (phases, vectors) = eig_unitary(&prop.matrix).map_err(|e| {
                CoreError::EigenFailure { context: format!("tau = {tau:.9e} s: {e}") }
            })?;
            Ok((tau, phases, vectors))
        })
        .collect::<Result<Vec<_>>>()?;

    let dim = ops.dim;
    let sx2 = ops.s[0].map(|z| z * 2.0);
    let mz = ops.total_nuclear_z();

    let mut points: Vec<FloquetPoint> = Vec::with_capacity(taus.len());
    let mut branch_map: Vec<Vec<usize>> = Vec::with_capacity(taus.len());
    let mut ambiguities: Vec<Ambiguity> = Vec::new();

    for (k, (tau, phases, mut vectors)) in decomps.into_iter().enumerate() {
        let clusters = phase_clusters(&phases);
        if k == 0 {
            // Degenerate clusters leave the eigenbasis arbitrary. The period
            // propagator commutes exactly with the total nuclear projection
            // (pulses act on the electron alone), so first split every
            // cluster along M_z eigenspaces, then orient any leftover
            // freedom along electron X. This keeps asymptotic labels exact
            // even when manifolds touch accidentally at the scan start.
            for cluster in &clusters {
                if cluster.len() > 1 {
                    let mz_vals = align_to_operator(&mut vectors, cluster, &mz);
                    let mut start = 0;
                    while start < cluster.len() {
                        let mut end = start + 1;
                        while end < cluster.len()
                            && (mz_vals[end] - mz_vals[start]).abs() < 1e-6
                        {
                            end += 1;
                        }
                        if end - start > 1 {
                            let sub: Vec<usize> = cluster[start..end].to_vec();
                            align_to_operator(&mut vectors, &sub, &sx2);
                        }
                        start = end;
                    }
                }
            }
            let labels = (0..dim)
                .map(|j| label_for_vector(&vectors.column(j).into_owned(), &sx2, &mz))
                .collect();
            points.push(FloquetPoint { tau, eigenphases: phases, eigenvectors: vectors, labels });
            branch_map.push((0..dim).collect());
            continue;
        }

        let prev = &points[k - 1];
        // Re-align degenerate clusters with the previous branch vectors.
        let prev_cols: Vec<CVector> =
            (0..dim).map(|l| prev.eigenvectors.column(l).into_owned()).collect();
        for cluster in &clusters {
            if cluster.len() > 1 {
                align_cluster(&mut vectors, cluster, &prev_cols);
            }
        }
        // Overlap of previous branch l with new column j.
        let overlap_mat = prev.eigenvectors.adjoint() * &vectors;
        let overlap: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| overlap_mat[(i, j)].norm()).collect())
            .collect();
        let mut perm = greedy_assignment(&overlap);
        let worst = (0..dim).map(|i| overlap[i][perm[i]]).fold(f64::INFINITY, f64::min);
        if worst < overlap_floor {
            let optimal = optimal_assignment(&overlap);
            let opt_total: f64 = (0..dim).map(|i| overlap[i][optimal[i]]).sum();
            let greedy_total: f64 = (0..dim).map(|i| overlap[i][perm[i]]).sum();
            if opt_total > greedy_total {
                perm = optimal;
            }
        }
        for i in 0..dim {
            let o = overlap[i][perm[i]];
            if o < overlap_floor {
                ambiguities.push(Ambiguity { step: k, branch: i, overlap: o });
            }
        }
        let eigenphases: Vec<f64> = perm.iter().map(|&j| phases[j]).collect();
        let mut eigenvectors = CMatrix::zeros(dim, dim);
        for (l, &j) in perm.iter().enumerate() {
            eigenvectors.set_column(l, &vectors.column(j));
        }
        points.push(FloquetPoint {
            tau,
            eigenphases,
            eigenvectors,
            labels: prev.labels.clone(),
        });
        branch_map.push(perm);
    }

    Ok(FloquetSpectrum { points, branch_map, ambiguities, overlap_floor })
}

/// Rotate a degenerate cluster so its columns diagonalize the restriction
/// of a Hermitian operator, ordered by decreasing expectation value.
/// Returns the expectation values in placed (descending) order.
fn align_to_operator(vectors: &mut CMatrix, cols: &[usize], op: &CMatrix) -> Vec<f64> {
    let m = cols.len();
    let d = vectors.nrows();
    let mut sub = CMatrix::zeros(d, m);
    for (j, &c) in cols.iter().enumerate() {
        sub.set_column(j, &vectors.column(c));
    }
    let restricted = sub.adjoint() * op * &sub;
    let restricted = (&restricted + restricted.adjoint()).map(|z| z * 0.5);
    if let Ok((values, w)) = crate::linalg::hermitian_eigen(&restricted) {
        let rotated = &sub * &w;
        // hermitian_eigen sorts ascending; place descending expectations.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        for (slot, &src) in order.iter().enumerate() {
            vectors.set_column(cols[slot], &rotated.column(src));
        }
        gauge_fix_columns(vectors);
        order.iter().map(|&src| values[src]).collect()
    } else {
        vec![0.0; m]
    }
}

/// Options for [`locate_anticrossings`].
#[derive(Debug, Clone, Copy)]
pub struct LocateOptions {
    /// Gap window for distance computation.
    pub window: FoldWindow,
    /// Only minima below this gap are anticrossings. `None` picks
    /// 0.2 x the median nearest-neighbor branch spacing in the scan.
    pub threshold: Option<f64>,
    /// Golden-section refinement iterations.
    pub refine_iters: usize,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self { window: FoldWindow::Full, threshold: None, refine_iters: 48 }
    }
}

/// Default anticrossing threshold: 0.2 x the median over all (point,
/// branch) of the nearest-neighbor branch spacing (degeneracies excluded).
pub fn default_threshold(spectrum: &FloquetSpectrum, window: FoldWindow) -> f64 {
    let mut spacings: Vec<f64> = spectrum
        .points
        .iter()
        .flat_map(|p| (0..p.dim()).map(move |l| p.gap_to_nearest(l, window)))
        .filter(|g| g.is_finite())
        .collect();
    if spacings.is_empty() {
        return 0.0;
    }
    spacings.sort_by(f64::total_cmp);
    0.2 * spacings[spacings.len() / 2]
}

/// Locate avoided crossings: local minima of pairwise branch gaps below the
/// threshold, refined by golden-section search on the gap function.
/// Exact degeneracies (gap <= [`DEGENERACY_FLOOR`]) are never reported.
pub fn locate_anticrossings(
    spectrum: &FloquetSpectrum,
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    options: LocateOptions,
) -> Result<Vec<Anticrossing>> {
    let n = spectrum.n_points();
    if n < 3 {
        return Ok(Vec::new());
    }
    let threshold = match options.threshold {
        Some(t) => t,
        None => default_threshold(spectrum, options.window),
    };
    let taus = spectrum.taus();
    let dim = spectrum.n_branches();
    let ops = SpinOperators::build(system.n_nuclei());

    let mut found: Vec<Anticrossing> = Vec::new();
    for a in 0..dim {
        for b in (a + 1)..dim {
            let gaps = spectrum.pair_gap_curve(a, b, options.window);
            for i in 1..n - 1 {
                let is_min = gaps[i] < gaps[i - 1] && gaps[i] <= gaps[i + 1];
                if !is_min || gaps[i] <= DEGENERACY_FLOOR || gaps[i] >= threshold {
                    continue;
                }
                let (tau_center, gap) = refine_minimum(
                    system,
                    protocol,
                    &ops,
                    &spectrum.points[i],
                    (a, b),
                    (taus[i - 1].min(taus[i + 1]), taus[i - 1].max(taus[i + 1])),
                    (taus[i], gaps[i]),
                    options,
                )?;
                // A coarse minimum that refines into an exact degeneracy was
                // a true crossing sampled slightly off-center, not avoided.
                if gap <= DEGENERACY_FLOOR {
                    continue;
                }
                found.push(Anticrossing { tau_center, gap, branch_a: a, branch_b: b });
            }
        }
    }
    // Deduplicate copies arising from exactly degenerate partner branches:
    // same center (within the local grid step) and same gap.
    found.sort_by(|x, y| {
        x.tau_center
            .total_cmp(&y.tau_center)
            .then(x.branch_a.cmp(&y.branch_a))
            .then(x.branch_b.cmp(&y.branch_b))
    });
    let grid_step = if n > 1 { (taus[n - 1] - taus[0]).abs() / (n as f64 - 1.0) } else { 0.0 };
    let mut unique: Vec<Anticrossing> = Vec::new();
    for cand in found {
        let dup = unique.iter().any(|u| {
            (u.tau_center - cand.tau_center).abs() < 0.5 * grid_step
                && (u.gap - cand.gap).abs() <= 1e-3 * u.gap.max(1e-12)
        });
        if !dup {
            unique.push(cand);
        }
    }
    Ok(unique)
}

/// Gap between the two tracked branches at an off-grid tau: decompose,
/// match the anchor branch vectors to degenerate phase clusters by
/// projection weight, and return the circular distance between the matched
/// clusters' phases.
///
/// Matching whole clusters instead of single columns matters because echo
/// protocols keep every eigenphase exactly two-fold degenerate: a per-column
/// match can land both anchors inside one degenerate cluster and report a
/// spurious zero gap. A zero return therefore means both branches genuinely
/// merged (a true crossing).
fn pair_gap_at(
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    ops: &SpinOperators,
    anchor: &FloquetPoint,
    pair: (usize, usize),
    tau: f64,
    window: FoldWindow,
) -> Result<f64> {
    let seq = build_sequence(protocol, tau)?;
    let prop = one_period_propagator(system, ops, &seq, Method::Fast)?;
    let (phases, vectors) = eig_unitary(&prop.matrix)
        .map_err(|e| CoreError::EigenFailure { context: format!("tau = {tau:.9e} s: {e}") })?;
    let va = anchor.eigenvectors.column(pair.0).into_owned();
    let vb = anchor.eigenvectors.column(pair.1).into_owned();
    let oa = vectors.adjoint() * &va;
    let ob = vectors.adjoint() * &vb;
    let clusters = phase_clusters(&phases);
    let weight = |o: &CVector, cluster: &[usize]| -> f64 {
        cluster.iter().map(|&j| o[j].norm_sqr()).sum()
    };
    let wa: Vec<f64> = clusters.iter().map(|c| weight(&oa, c)).collect();
    let wb: Vec<f64> = clusters.iter().map(|c| weight(&ob, c)).collect();
    // Best cluster pair by total projection weight; one shared cluster is
    // allowed only if it is degenerate enough to hold both branches.
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for ca in 0..clusters.len() {
        for cb in 0..clusters.len() {
            if ca == cb && clusters[ca].len() < 2 {
                continue;
            }
            let score = wa[ca] + wb[cb];
            if score > best.2 {
                best = (ca, cb, score);
            }
        }
    }
    if best.0 == best.1 {
        return Ok(0.0);
    }
    Ok(circular_gap(phases[clusters[best.0][0]], phases[clusters[best.1][0]], window))
}

#[allow(clippy::too_many_arguments)]
fn refine_minimum(
    system: &SpinSystem,
    protocol: &ProtocolSpec,
    ops: &SpinOperators,
    anchor: &FloquetPoint,
    pair: (usize, usize),
    bracket: (f64, f64),
    coarse: (f64, f64),
    options: LocateOptions,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = bracket;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = pair_gap_at(system, protocol, ops, anchor, pair, x1, options.window)?;
    let mut f2 = pair_gap_at(system, protocol, ops, anchor, pair, x2, options.window)?;
    for _ in 0..options.refine_iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = pair_gap_at(system, protocol, ops, anchor, pair, x1, options.window)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = pair_gap_at(system, protocol, ops, anchor, pair, x2, options.window)?;
        }
    }
    let (tau_best, gap_best) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    // Never report worse than the coarse grid sample.
    if coarse.1 < gap_best {
        Ok((coarse.0, coarse.1))
    } else {
        Ok((tau_best, gap_best))
    }
}

/// Locate the PolCPMG split pair for one nucleus: the two avoided crossings
/// that replace the CPMG resonance under over-rotation, at
/// `tau_-/tau_+ ~ (1 -/+ delta_theta/pi) tau_r`. Returns them ordered
/// `(tau_-, tau_+)`.
///
/// The search treats the nucleus in isolation (single-spin subsystem), scans
/// 801 points over +-25 ns around each estimate, and keeps the gap minimum
/// above 5e-3 rad nearest to the estimate.
pub fn polcpmg_split_pair(
    system: &SpinSystem,
    nucleus: usize,
    protocol: &ProtocolSpec,
    j: u32,
) -> Result<(Anticrossing, Anticrossing)> {
    if protocol.delta_theta == 0.0 {
        return Err(CoreError::InvalidProtocol(
            "split pair requires a nonzero over-rotation".into(),
        ));
    }
    let nuc = system
        .nuclei
        .get(nucleus)
        .ok_or_else(|| {
            CoreError::InvalidInput(format!("nucleus index {nucleus} out of range"))
        })?
        .clone();
    let sub = SpinSystem::new(system.omega_l, vec![nuc])?;
    let tau_r = resonance_tau(protocol, &sub, 0, j)?;
    let mut results: Vec<Anticrossing> = Vec::new();
    for sign in [-1.0, 1.0] {
        let guess = tau_r * (1.0 + sign * protocol.delta_theta / PI);
        let half_span = 25e-9;
        let n_pts = 801;
        let taus: Vec<f64> = (0..n_pts)
            .map(|i| guess - half_span + 2.0 * half_span * i as f64 / (n_pts - 1) as f64)
            .collect();
        let spectrum = scan_spectrum(&sub, protocol, &taus, DEFAULT_OVERLAP_FLOOR)?;
        let options = LocateOptions {
            window: FoldWindow::Full,
            threshold: Some(0.5),
            ..Default::default()
        };
        let candidates = locate_anticrossings(&spectrum, &sub, protocol, options)?;
        let best = candidates
            .into_iter()
            .filter(|c| c.gap > 5e-3)
            .min_by(|x, y| {
                (x.tau_center - guess).abs().total_cmp(&(y.tau_center - guess).abs())
            })
            .ok_or_else(|| {
                CoreError::InvalidInput(format!(
                    "no split-pair anticrossing found near {:.4e} s for nucleus {nucleus}",
                    guess
                ))
            })?;
        results.push(best);
    }
    let (minus, plus) = (results[0], results[1]);
    if minus.tau_center >= plus.tau_center {
        return Err(CoreError::invariant(format!(
            "split pair out of order: tau- = {:.6e} >= tau+ = {:.6e}",
            minus.tau_center, plus.tau_center
        )));
    }
    Ok((minus, plus))
}
