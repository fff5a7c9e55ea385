//! Initial EP-cluster states built from exact binary level crossings of a
//! real-symmetric `H(λ, δ_in)` at real `λ`.
//!
//! Each crossing pair `(a, b)` with real orthonormal eigenvectors `v_a, v_b`
//! yields the EP basis `c̃ = (v_a + iσ v_b)/√2`, `b̃ = (v_a − iσ v_b)/√2` with
//! `Ẽ = E_a = E_b` and `f = 0`. Which pairs of a multiplet form one cluster,
//! and the signs `σ`, are found by trial: a hypothesis is kept when `λ̇` is
//! the same for every member and a short probe propagation stays consistent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eom::{
    check_consistency, propagate, EomError, EpState, Integrator, PropagationSettings, RECTIFIED_COUPLING_TOL,
};
use crate::linalg::{
    c, c_normalize, diag_2x2, hermitian_eigensolve, max_abs, project, CMatrix, CVector, LinalgError, C64,
};
use crate::model::HamiltonianFamily;

pub const CROSSING_TOL: f64 = 1e-10;
pub const MULTIPLET_TOL: f64 = 1e-8;
pub const SLOPE_SEPARATION: f64 = 1e-6;
pub const DEFAULT_SCAN_POINTS: usize = 2001;
/// `λ = 0` is excluded: there the `δ = 0` toy spectrum has whole degenerate
/// `K`-multiplets rather than binary crossings.
pub const DEFAULT_LAMBDA_RANGE: (f64, f64) = (0.01, 1.0);
/// Maximum number of crossing pairs in one multiplet for the exhaustive
/// cluster search.
pub const MAX_PAIRS: usize = 8;
pub const PROBE_STEPS: u64 = 100;
pub const LAMBDA_DOT_SPREAD_TOL: f64 = 1e-6;
pub const IC_RESIDUAL_TOL: f64 = 1e-10;
/// Relative energy window inside which levels are treated as one
/// degenerate group by [`line_decomposition`].
const GROUP_RATIO: f64 = 1e-9;
const REFINE_ITERATIONS: usize = 200;
/// Projected-`V` eigenvalue splitting, relative to `‖V‖`, below which a
/// rectified pair is resolved at second order.
const SCALAR_BLOCK_RATIO: f64 = 1e-8;
/// `δ` offset of the central difference used for second-order rectification.
const SECOND_ORDER_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IcsError {
    #[error("{count} levels degenerate at λ = {lambda}, E = {energy}; only binary crossings are supported")]
    UnsupportedDegeneracy { lambda: f64, energy: f64, count: usize },
    #[error("degenerate ordinary pair ({a}, {b}) at λ = {lambda} has a defective projected perturbation: an EP is missing from the cluster ({source})")]
    MissedEp { lambda: f64, a: usize, b: usize, source: LinalgError },
    #[error("multiplet at λ = {lambda} has {count} pairs; at most {MAX_PAIRS} are searched")]
    TooManyPairs { lambda: f64, count: usize },
    #[error("no cluster/sign hypothesis passed at λ = {lambda}:\n{}", format_table(.table))]
    ResolutionFailed { lambda: f64, table: Vec<HypothesisOutcome> },
    #[error("assembled initial state misses the construction accuracy: residual {residual:e}")]
    Construction { residual: f64 },
    #[error("invalid scan: {0}")]
    InvalidScan(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Eom(#[from] EomError),
}

/// Spectrum at one real `λ` split into straight-line components: inside a
/// degenerate group the vectors diagonalize `∂λH`, so `slopes` are the
/// first-order line slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLines {
    pub lambda: f64,
    pub energies: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Real orthonormal eigenvectors.
    pub vectors: Vec<CVector>,
    /// Index ranges of degenerate groups (size ≥ 2).
    pub groups: Vec<std::ops::Range<usize>>,
}

/// Eigen-decomposition of `H(λ, δ)` for real `λ`, ordered by energy and,
/// within a degenerate group, by slope.
pub fn line_decomposition(family: &dyn HamiltonianFamily, lambda: f64, delta: f64) -> Result<LevelLines, IcsError> {
    let h = family.eval(c(lambda, 0.0), delta);
    let dl = family.d_lambda(c(lambda, 0.0), delta);
    let (values, vectors) = hermitian_eigensolve(&h)?;
    let n = values.len();
    let window = GROUP_RATIO * (values[n - 1] - values[0]).abs().max(1.0);
    let mut energies = values.clone();
    let mut slopes = vec![0.0; n];
    let mut out_vectors = vectors.clone();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= window {
            end += 1;
        }
        if end - start == 1 {
            slopes[start] = vectors[start].dot(&(&dl * &vectors[start])).re;
        } else {
            let members = &vectors[start..end];
            let projected = project(&dl, members);
            let (sub_slopes, rotations) = hermitian_eigensolve(&projected)?;
            let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
            for (k, rot) in rotations.iter().enumerate() {
                let mut v = CVector::zeros(h.nrows());
                for (w, member) in rot.iter().zip(members) {
                    v.axpy(*w, member, c(1.0, 0.0));
                }
                out_vectors[start + k] = v;
                slopes[start + k] = sub_slopes[k];
                energies[start + k] = mean;
            }
            groups.push(start..end);
        }
        start = end;
    }
    Ok(LevelLines { lambda, energies, slopes, vectors: out_vectors, groups })
}

/// One binary crossing inside a multiplet; `level_a < level_b` are level
/// indices in ascending energy order at `λ_in`, `slope_a < slope_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingPair {
    pub level_a: usize,
    pub level_b: usize,
    pub energy: f64,
    pub slope_a: f64,
    pub slope_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingMultiplet {
    pub lambda_in: f64,
    pub delta_in: f64,
    pub pairs: Vec<CrossingPair>,
}

impl CrossingMultiplet {
    pub fn multiplicity(&self) -> usize {
        self.pairs.len()
    }
}

/// Energies and slopes of the tracked lines at one grid point.
struct TrackedPoint {
    energies: Vec<f64>,
    slopes: Vec<f64>,
}

/// Greedy assignment of current levels to lines predicted as `E + s·step`.
fn assign(prev: &TrackedPoint, cur: &LevelLines, step: f64) -> Vec<usize> {
    let n = prev.energies.len();
    let mut costs = Vec::with_capacity(n * n);
    for line in 0..n {
        let predicted = prev.energies[line] + prev.slopes[line] * step;
        for level in 0..n {
            let cost =
                (cur.energies[level] - predicted).abs() + step.abs() * (cur.slopes[level] - prev.slopes[line]).abs();
            costs.push((cost, line, level));
        }
    }
    costs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut line_to_level = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, line, level) in costs {
        if line_to_level[line] == usize::MAX && !taken[level] {
            line_to_level[line] = level;
            taken[level] = true;
        }
    }
    line_to_level
}

/// Signed gap between two tracked lines at `lambda`, following them from a
/// reference point by slope-aware prediction.
fn tracked_gap(
    family: &dyn HamiltonianFamily,
    delta: f64,
    reference: &TrackedPoint,
    reference_lambda: f64,
    lines: (usize, usize),
    lambda: f64,
) -> Result<f64, IcsError> {
    let cur = line_decomposition(family, lambda, delta)?;
    let map = assign(reference, &cur, lambda - reference_lambda);
    Ok(cur.energies[map[lines.0]] - cur.energies[map[lines.1]])
}

/// Illinois-modified regula falsi on a bracketed sign change.
fn refine_root<F>(mut a: f64, mut ga: f64, mut b: f64, mut gb: f64, mut g: F) -> Result<(f64, f64), IcsError>
where
    F: FnMut(f64) -> Result<f64, IcsError>,
{
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    let mut side = 0i8;
    for _ in 0..REFINE_ITERATIONS {
        let x = (a * gb - b * ga) / (gb - ga);
        if !(x > a.min(b) && x < a.max(b)) {
            break;
        }
        let gx = g(x)?;
        if gx.abs() < best.1.abs() {
            best = (x, gx);
        }
        if gx == 0.0 || gx.abs() <= 1e-15 * (1.0 + x.abs()) || (b - a).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        if gx.signum() == gb.signum() {
            b = x;
            gb = gx;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            ga = gx;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

/// Finds every real `λ` in `range` where two eigenvalue lines of
/// `H(λ, δ_in)` cross with distinct slopes, grouped into multiplets of equal
/// `λ`.
pub fn detect_crossings(
    family: &dyn HamiltonianFamily,
    delta_in: f64,
    range: (f64, f64),
    scan_points: usize,
) -> Result<Vec<CrossingMultiplet>, IcsError> {
    let (lo, hi) = range;
    if !(lo < hi) || scan_points < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(IcsError::InvalidScan(format!("range [{lo}, {hi}] with {scan_points} points")));
    }
    let n = family.dim();
    let step = (hi - lo) / (scan_points - 1) as f64;
    let grid: Vec<f64> =
        (0..scan_points).map(|k| if k + 1 == scan_points { hi } else { lo + k as f64 * step }).collect();

    let first = line_decomposition(family, grid[0], delta_in)?;
    let mut track: Vec<TrackedPoint> = vec![TrackedPoint { energies: first.energies, slopes: first.slopes }];
    for k in 1..scan_points {
        let cur = line_decomposition(family, grid[k], delta_in)?;
        let prev = &track[k - 1];
        let map = assign(prev, &cur, grid[k] - grid[k - 1]);
        let energies = map.iter().map(|&lvl| cur.energies[lvl]).collect();
        let slopes = map.iter().map(|&lvl| cur.slopes[lvl]).collect();
        track.push(TrackedPoint { energies, slopes });
    }

    let mut roots: Vec<f64> = Vec::new();
    for l1 in 0..n {
        for l2 in (l1 + 1)..n {
            let gap = |k: usize| track[k].energies[l1] - track[k].energies[l2];
            let slope_gap = |k: usize| (track[k].slopes[l1] - track[k].slopes[l2]).abs();
            for k in 0..scan_points {
                let gk = gap(k);
                if gk.abs() <= CROSSING_TOL && slope_gap(k) >= SLOPE_SEPARATION {
                    roots.push(grid[k]);
                    continue;
                }
                if k + 1 < scan_points {
                    let gn = gap(k + 1);
                    if gk * gn < 0.0 && gn.abs() > CROSSING_TOL {
                        let reference = &track[k];
                        let (x, gx) = refine_root(grid[k], gk, grid[k + 1], gn, |x| {
                            tracked_gap(family, delta_in, reference, grid[k], (l1, l2), x)
                        })?;
                        if gx.abs() <= CROSSING_TOL {
                            roots.push(x);
                        }
                    }
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for x in roots {
        match clusters.last_mut() {
            Some(cl) if (x - cl[cl.len() - 1]).abs() <= MULTIPLET_TOL => cl.push(x),
            _ => clusters.push(vec![x]),
        }
    }

    clusters
        .into_iter()
        .map(|cl| {
            let lambda_in = cl.iter().sum::<f64>() / cl.len() as f64;
            multiplet_at(family, delta_in, lambda_in)
        })
        .filter_map(|r| match r {
            Ok(Some(m)) => Some(Ok(m)),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

/// Reads the crossing pairs off the line decomposition at `λ_in`.
fn multiplet_at(
    family: &dyn HamiltonianFamily,
    delta_in: f64,
    lambda_in: f64,
) -> Result<Option<CrossingMultiplet>, IcsError> {
    let lines = line_decomposition(family, lambda_in, delta_in)?;
    let mut pairs = Vec::new();
    for g in &lines.groups {
        if g.len() > 2 {
            return Err(IcsError::UnsupportedDegeneracy {
                lambda: lambda_in,
                energy: lines.energies[g.start],
                count: g.len(),
            });
        }
        let (a, b) = (g.start, g.start + 1);
        if (lines.slopes[b] - lines.slopes[a]).abs() >= SLOPE_SEPARATION {
            pairs.push(CrossingPair {
                level_a: a,
                level_b: b,
                energy: lines.energies[a],
                slope_a: lines.slopes[a],
                slope_b: lines.slopes[b],
            });
        }
    }
    if pairs.is_empty() {
        return Ok(None);
    }
    Ok(Some(CrossingMultiplet { lambda_in, delta_in, pairs }))
}

/// `|c̃) = (v₁ + iσ v₂)/√2`, `|b̃) = (v₁ − iσ v₂)/√2`.
pub fn build_ep_basis(v1: &CVector, v2: &CVector, sign: i8) -> (CVector, CVector) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let iv2 = v2 * c(0.0, f64::from(sign.signum()));
    ((v1 + &iv2) * c(s, 0.0), (v1 - &iv2) * c(s, 0.0))
}

/// Rotates a degenerate ordinary pair so that `(c₁|V|c₂) = 0`.
pub fn rectify_degenerate_ordinary(
    v1: &CVector,
    v2: &CVector,
    perturbation: &CMatrix,
) -> Result<(CVector, CVector), LinalgError> {
    let projected = project(perturbation, &[v1.clone(), v2.clone()]);
    let off = projected[(0, 1)].norm();
    if off <= RECTIFIED_COUPLING_TOL * 1e-2 * max_abs(perturbation).max(f64::MIN_POSITIVE) {
        return Ok((c_normalize(v1)?, c_normalize(v2)?));
    }
    let eig = diag_2x2(&projected)?;
    let combine = |w: &CVector| c_normalize(&(v1 * w[0] + v2 * w[1]));
    Ok((combine(&eig.vectors[0])?, combine(&eig.vectors[1])?))
}

/// Cluster members (indices into the multiplet's pairs) and their signs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterHypothesis {
    pub members: Vec<usize>,
    pub signs: Vec<i8>,
}

impl ClusterHypothesis {
    pub fn flipped(&self) -> ClusterHypothesis {
        ClusterHypothesis { members: self.members.clone(), signs: self.signs.iter().map(|s| -s).collect() }
    }
}

/// Full initial state of one cluster at `(λ_in, δ_in)`. Multiplet pairs
/// outside the cluster become rectified degenerate ordinary levels.
pub fn assemble_initial_state(
    multiplet: &CrossingMultiplet,
    cluster: &ClusterHypothesis,
    family: &dyn HamiltonianFamily,
) -> Result<EpState, IcsError> {
    let lambda_in = multiplet.lambda_in;
    let delta_in = multiplet.delta_in;
    let lines = line_decomposition(family, lambda_in, delta_in)?;
    let lambda = c(lambda_in, 0.0);

    let mut ep_energies = Vec::new();
    let mut ep_vectors = Vec::new();
    let mut complement_vectors = Vec::new();
    let mut in_cluster = vec![false; lines.energies.len()];
    for (&member, &sign) in cluster.members.iter().zip(&cluster.signs) {
        let pair = &multiplet.pairs[member];
        let (ep, complement) = build_ep_basis(&lines.vectors[pair.level_a], &lines.vectors[pair.level_b], sign);
        ep_energies.push(c(0.5 * (lines.energies[pair.level_a] + lines.energies[pair.level_b]), 0.0));
        ep_vectors.push(ep);
        complement_vectors.push(complement);
        in_cluster[pair.level_a] = true;
        in_cluster[pair.level_b] = true;
    }

    let dl = family.d_lambda(lambda, delta_in);
    let dd = family.d_delta(lambda, delta_in);
    let lambda_dot = ep_vectors.iter().map(|v| -v.dot(&(&dd * v)) / v.dot(&(&dl * v))).sum::<C64>()
        / c(ep_vectors.len().max(1) as f64, 0.0);
    let perturbation = dl * lambda_dot + dd;

    let mut ordinary_energies = Vec::new();
    let mut ordinary_vectors = Vec::new();
    let mut rectified = Vec::new();
    let mut level = 0;
    while level < lines.energies.len() {
        if in_cluster[level] {
            level += 1;
            continue;
        }
        if let Some(g) = lines.groups.iter().find(|g| g.start == level) {
            if g.len() > 2 {
                return Err(IcsError::UnsupportedDegeneracy {
                    lambda: lambda_in,
                    energy: lines.energies[level],
                    count: g.len(),
                });
            }
            let (a, b) = (g.start, g.start + 1);
            let (c1, c2) = rectify_degenerate_ordinary(&lines.vectors[a], &lines.vectors[b], &perturbation)
                .map_err(|source| IcsError::MissedEp { lambda: lambda_in, a, b, source })?;
            let energy = c(lines.energies[a], 0.0);
            rectified.push((ordinary_energies.len(), a, b));
            ordinary_energies.extend([energy, energy]);
            ordinary_vectors.extend([c1, c2]);
            level += 2;
        } else {
            ordinary_energies.push(c(lines.energies[level], 0.0));
            ordinary_vectors.push(lines.vectors[level].clone());
            level += 1;
        }
    }

    let m = ep_energies.len();
    let mut state = EpState {
        delta: delta_in,
        lambda,
        ep_energies,
        ep_vectors,
        complement_vectors,
        f_coeffs: vec![c(0.0, 0.0); m],
        ordinary_energies,
        ordinary_vectors,
    };
    let v_scale = max_abs(&perturbation).max(f64::MIN_POSITIVE);
    for (j, a, b) in rectified {
        let (v1, v2) = (&state.ordinary_vectors[j], &state.ordinary_vectors[j + 1]);
        let diagonal_gap = (v1.dot(&(&perturbation * v1)) - v2.dot(&(&perturbation * v2))).norm();
        if diagonal_gap <= SCALAR_BLOCK_RATIO * v_scale {
            rectify_second_order(&mut state, family, j).map_err(|source| IcsError::MissedEp {
                lambda: lambda_in,
                a,
                b,
                source,
            })?;
        }
    }

    let report = check_consistency(&state, family, IC_RESIDUAL_TOL);
    let scale = lines.energies.iter().fold(1.0_f64, |acc, e| acc.max(e.abs()));
    if !(report.max_residual() <= IC_RESIDUAL_TOL * scale) {
        return Err(IcsError::Construction { residual: report.max_residual() });
    }
    Ok(state)
}

/// `V` projected on ordinary vectors `j, j+1` of `state`.
fn ordinary_block(state: &EpState, family: &dyn HamiltonianFamily, j: usize) -> Result<CMatrix, EomError> {
    let (lambda_dot, _, _) = crate::eom::lambda_dot_all(state, family)?;
    let v = crate::eom::effective_perturbation(state, family, lambda_dot);
    Ok(project(&v, &state.ordinary_vectors[j..j + 2]))
}

/// A degenerate ordinary pair whose projected `V` is scalar is split only
/// at second order; its basis must diagonalize `d/dδ (cⱼ|V|cⱼ′)` along the
/// flow, or the coupling-to-gap ratio diverges as `δ → δ_in`.
fn rectify_second_order(state: &mut EpState, family: &dyn HamiltonianFamily, j: usize) -> Result<(), LinalgError> {
    let shifted_block = |h: f64| -> Option<CMatrix> {
        let r = crate::eom::rates(state, family).ok()?;
        let mut s = state.clone();
        s.axpy(h, &r);
        ordinary_block(&s, family, j).ok()
    };
    let (Some(plus), Some(minus)) = (shifted_block(SECOND_ORDER_STEP), shifted_block(-SECOND_ORDER_STEP)) else {
        return Ok(());
    };
    let derivative = (plus - minus) / c(2.0 * SECOND_ORDER_STEP, 0.0);
    let derivative = (&derivative + derivative.transpose()) * c(0.5, 0.0);
    if derivative[(0, 1)].norm() <= 1e-12 * max_abs(&derivative).max(f64::MIN_POSITIVE) {
        return Ok(());
    }
    let eig = diag_2x2(&derivative)?;
    let (v1, v2) = (state.ordinary_vectors[j].clone(), state.ordinary_vectors[j + 1].clone());
    for (k, w) in eig.vectors.iter().enumerate() {
        state.ordinary_vectors[j + k] = c_normalize(&(&v1 * w[0] + &v2 * w[1]))?;
    }
    Ok(())
}

/// Largest `|(cⱼ|V|cⱼ′)|` over degenerate ordinary pairs of `state`,
/// relative to `‖V‖`.
pub fn rectification_residual(state: &EpState, family: &dyn HamiltonianFamily) -> Result<f64, EomError> {
    let (lambda_dot, _, _) = crate::eom::lambda_dot_all(state, family)?;
    let v = crate::eom::effective_perturbation(state, family, lambda_dot);
    let scale = max_abs(&v).max(f64::MIN_POSITIVE);
    let threshold = 1e-8 * state.spectral_diameter().max(1.0);
    let e = &state.ordinary_energies;
    let mut worst: f64 = 0.0;
    for j in 0..e.len() {
        for k in (j + 1)..e.len() {
            if (e[j] - e[k]).norm() <= threshold {
                let coupling = state.ordinary_vectors[j].dot(&(&v * &state.ordinary_vectors[k])).norm();
                worst = worst.max(coupling / scale);
            }
        }
    }
    Ok(worst)
}

/// Probe propagation used to test a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub steps: u64,
    /// Step size of the main propagation.
    pub step: f64,
    pub tol: f64,
    pub integrator: Integrator,
}

impl ProbeSettings {
    pub fn new(step: f64, tol: f64) -> Self {
        ProbeSettings { steps: PROBE_STEPS, step, tol, integrator: Integrator::Euler }
    }
}

/// Diagnostics for one tested block/sign hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub hypothesis: ClusterHypothesis,
    pub lambda_dot_spread: Option<f64>,
    pub ic_residual: Option<f64>,
    pub probe_residual: Option<f64>,
    pub passed: bool,
    pub failure: Option<String>,
}

fn format_table(table: &[HypothesisOutcome]) -> String {
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
    table
        .iter()
        .map(|o| {
            format!(
                "  members {:?} signs {:?}: spread {} ic {} probe {} {}",
                o.hypothesis.members,
                o.hypothesis.signs,
                fmt(o.lambda_dot_spread),
                fmt(o.ic_residual),
                fmt(o.probe_residual),
                o.failure.as_deref().unwrap_or("pass")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// A resolved cluster with its initial state. `alternatives` lists every
/// other passing sign vector for the same members.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedCluster {
    pub hypothesis: ClusterHypothesis,
    pub state: EpState,
    pub alternatives: Vec<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub clusters: Vec<ResolvedCluster>,
    pub table: Vec<HypothesisOutcome>,
}

/// All set partitions of `0..n`, fewest blocks first.
fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn grow(k: usize, n: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if k == n {
            out.push(current.clone());
            return;
        }
        for b in 0..current.len() {
            current[b].push(k);
            grow(k + 1, n, current, out);
            current[b].pop();
        }
        current.push(vec![k]);
        grow(k + 1, n, current, out);
        current.pop();
    }
    let mut out = Vec::new();
    grow(0, n, &mut Vec::new(), &mut out);
    out.sort_by_key(|p| p.len());
    out
}

/// Sign vectors with the first entry fixed to `+1`, `+1` before `−1`.
fn sign_vectors(len: usize) -> Vec<Vec<i8>> {
    let free = len.saturating_sub(1);
    (0..1usize << free)
        .map(|bits| {
            let mut signs = vec![1i8];
            signs.extend((0..free).map(|i| if bits >> (free - 1 - i) & 1 == 1 { -1 } else { 1 }));
            signs
        })
        .collect()
}

fn test_hypothesis(
    multiplet: &CrossingMultiplet,
    hypothesis: &ClusterHypothesis,
    family: &dyn HamiltonianFamily,
    probe: &ProbeSettings,
) -> (HypothesisOutcome, Option<EpState>) {
    let mut outcome = HypothesisOutcome {
        hypothesis: hypothesis.clone(),
        lambda_dot_spread: None,
        ic_residual: None,
        probe_residual: None,
        passed: false,
        failure: None,
    };
    let state = match assemble_initial_state(multiplet, hypothesis, family) {
        Ok(s) => s,
        Err(e) => {
            outcome.failure = Some(e.to_string());
            return (outcome, None);
        }
    };
    let report = check_consistency(&state, family, probe.tol);
    outcome.ic_residual = Some(report.max_residual());
    outcome.lambda_dot_spread = Some(report.lambda_dot_spread);
    if !(report.lambda_dot_spread <= LAMBDA_DOT_SPREAD_TOL) {
        outcome.failure = Some("λ̇ differs between cluster members".into());
        return (outcome, None);
    }
    let settings = PropagationSettings {
        delta_end: state.delta + probe.steps as f64 * probe.step,
        grid: probe.steps,
        tol: probe.tol,
        sample_every: probe.steps.max(1),
        integrator: probe.integrator,
    };
    match propagate(&state, family, &settings) {
        Ok(record) => {
            outcome.probe_residual = Some(record.max_residual());
            if record.max_lambda_dot_spread() > LAMBDA_DOT_SPREAD_TOL {
                outcome.failure = Some("λ̇ members drift apart during the probe".into());
                return (outcome, None);
            }
            outcome.passed = true;
            (outcome, Some(state))
        }
        Err(halted) => {
            outcome.probe_residual = Some(halted.partial.max_residual());
            outcome.failure = Some(halted.reason.to_string());
            (outcome, None)
        }
    }
}

/// Splits `multiplet` into clusters and fixes the signs by trial, coarsest
/// partition first.
pub fn resolve_clusters_and_signs(
    multiplet: &CrossingMultiplet,
    family: &dyn HamiltonianFamily,
    probe: &ProbeSettings,
) -> Result<Resolution, IcsError> {
    let count = multiplet.pairs.len();
    if count > MAX_PAIRS {
        return Err(IcsError::TooManyPairs { lambda: multiplet.lambda_in, count });
    }
    let mut table = Vec::new();
    // Block members -> every passing (signs, state).
    let mut cache: HashMap<Vec<usize>, Vec<(Vec<i8>, EpState)>> = HashMap::new();
    for partition in partitions(count) {
        let mut all_pass = true;
        for block in &partition {
            if !cache.contains_key(block) {
                let mut passing = Vec::new();
                for signs in sign_vectors(block.len()) {
                    let hypothesis = ClusterHypothesis { members: block.clone(), signs };
                    let (outcome, state) = test_hypothesis(multiplet, &hypothesis, family, probe);
                    table.push(outcome);
                    if let Some(s) = state {
                        passing.push((hypothesis.signs, s));
                    }
                }
                cache.insert(block.clone(), passing);
            }
            if cache[block].is_empty() {
                all_pass = false;
                break;
            }
        }
        if all_pass {
            let clusters = partition
                .iter()
                .map(|block| {
                    let passing = &cache[block];
                    let (signs, state) = passing[0].clone();
                    ResolvedCluster {
                        hypothesis: ClusterHypothesis { members: block.clone(), signs },
                        state,
                        alternatives: passing[1..].iter().map(|(s, _)| s.clone()).collect(),
                    }
                })
                .collect();
            return Ok(Resolution { clusters, table });
        }
    }
    Err(IcsError::ResolutionFailed { lambda: multiplet.lambda_in, table })
}
