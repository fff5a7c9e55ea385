//! Ground truth independent of the equations of motion: dense spectra of
//! `H(λ, δ)`, a complex-`λ` EP locator, and a direct construction of the
//! full EP-cluster state at a located point.

use nalgebra::{Schur, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eom::{EpState, TrajectoryRecord};
use crate::linalg::{c, c_normalize, fix_sign, max_abs, CMatrix, CVector, LinalgError, C64};
use crate::model::HamiltonianFamily;

pub const MAX_ITERATIONS: usize = 200;
/// Accepted eigenvalue gap at a located EP, relative to the problem scale.
/// Eigenvalues at a defective point carry `O(√ε)` error, so the gap cannot
/// be resolved below roughly `1e-8`.
pub const EP_GAP_RATIO: f64 = 1e-6;
/// Maximum `|(v|v)| / ‖v‖²` for the null vector at a genuine EP.
pub const EP_EVIDENCE_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no coalescence found from seed {seed} at δ = {delta}: gap {gap:e} after {iterations} iterations")]
    NotFound { seed: C64, delta: f64, gap: f64, iterations: usize },
    #[error("degeneracy at λ = {lambda} is diagonalizable (self-overlap {condition:e})")]
    NotAnEp { lambda: C64, condition: f64 },
    #[error("matrix of dimension {0} has fewer than two eigenvalues")]
    TooSmall(usize),
    #[error("checkpoint δ = {0} is not among the recorded samples")]
    CheckpointNotSampled(f64),
    #[error("direct state does not match its anchor: {0}")]
    AnchorMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Eigenvalues of a general complex matrix via complex Schur form.
pub fn general_eigenvalues(h: &CMatrix) -> Vec<C64> {
    let t = Schur::new(h.clone()).unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Sorts by real part, then imaginary part.
pub fn sort_spectrum(values: &mut [C64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn spectral_diameter(values: &[C64]) -> f64 {
    let mut diam: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            diam = diam.max((a - b).norm());
        }
    }
    diam
}

/// Scale used for all relative tolerances of the locator.
fn problem_scale(h: &CMatrix, values: &[C64]) -> f64 {
    spectral_diameter(values).max(max_abs(h)).max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub delta: f64,
    /// Sorted by real part, then imaginary part.
    pub values: Vec<C64>,
    /// The same eigenvalues ordered so that index `k` follows one continuous
    /// line along `λ` at fixed `δ`.
    pub lines: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSweep {
    pub dim: usize,
    /// `δ`-major, `λ` in input order.
    pub points: Vec<SweepPoint>,
}

fn track(previous: &[C64], current: &[C64]) -> Vec<C64> {
    let mut free: Vec<Option<C64>> = current.iter().copied().map(Some).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(previous.len() * current.len());
    for (i, p) in previous.iter().enumerate() {
        for (j, q) in current.iter().enumerate() {
            pairs.push(((p - q).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Option<C64>> = vec![None; previous.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() {
            if let Some(v) = free[j].take() {
                out[i] = Some(v);
            }
        }
    }
    out.into_iter().map(|v| v.expect("square assignment")).collect()
}

/// Dense spectra on the `λ × δ` grid, with nearest-neighbour line tracking
/// along `λ`.
pub fn sweep_spectrum(family: &dyn HamiltonianFamily, lambdas: &[f64], deltas: &[f64]) -> SpectrumSweep {
    let mut points = Vec::with_capacity(lambdas.len() * deltas.len());
    for &delta in deltas {
        let mut previous: Option<Vec<C64>> = None;
        for &lambda in lambdas {
            let mut values = general_eigenvalues(&family.eval(c(lambda, 0.0), delta));
            sort_spectrum(&mut values);
            let lines = match &previous {
                Some(p) => track(p, &values),
                None => values.clone(),
            };
            previous = Some(lines.clone());
            points.push(SweepPoint { lambda, delta, values, lines });
        }
    }
    SpectrumSweep { dim: family.dim(), points }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpCandidate {
    pub delta: f64,
    pub lambda: C64,
    pub coalescing_energy: C64,
    pub gap: f64,
    /// `|(v|v)| / ‖v‖²` of the null vector of `H − Ẽ`.
    pub condition: f64,
    pub iterations: usize,
}

/// The two eigenvalues closest to each other.
fn closest_pair(values: &[C64]) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..values.len() {
        for k in (i + 1)..values.len() {
            let d = (values[i] - values[k]).norm();
            if d < best.2 {
                best = (i, k, d);
            }
        }
    }
    (best.0, best.1)
}

/// Squared gap of the closest pair; analytic in `λ` near a binary EP.
fn discriminant(family: &dyn HamiltonianFamily, lambda: C64, delta: f64) -> (C64, C64) {
    let values = general_eigenvalues(&family.eval(lambda, delta));
    let (a, b) = closest_pair(&values);
    let d = values[a] - values[b];
    (d * d, (values[a] + values[b]) * 0.5)
}

/// Smallest and second-smallest singular value and the null vector of `a`.
fn null_vector(a: &CMatrix) -> (f64, f64, CVector) {
    let n = a.ncols();
    let svd = SVD::new(a.clone(), false, true);
    let v_t = svd.v_t.as_ref().expect("computed");
    let last = n - 1;
    let v = CVector::from_iterator(n, v_t.row(last).iter().map(|x| x.conj()));
    let second = if n >= 2 { svd.singular_values[last - 1] } else { f64::INFINITY };
    (svd.singular_values[last], second, v)
}

fn self_overlap_ratio(v: &CVector) -> f64 {
    v.dot(v).norm() / v.norm_squared()
}

/// Damped complex Newton iteration on the closest-pair discriminant, then an
/// EP-evidence test on the null vector of `H − Ẽ`.
pub fn locate_ep(family: &dyn HamiltonianFamily, delta: f64, seed: C64) -> Result<EpCandidate, OracleError> {
    if family.dim() < 2 {
        return Err(OracleError::TooSmall(family.dim()));
    }
    let mut lambda = seed;
    let (mut disc, _) = discriminant(family, lambda, delta);
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = 1e-6 * lambda.norm().max(1.0);
        let (plus, _) = discriminant(family, lambda + eta, delta);
        let (minus, _) = discriminant(family, lambda - eta, delta);
        let slope = (plus - minus) / (2.0 * eta);
        if slope.norm() == 0.0 || !slope.re.is_finite() {
            break;
        }
        let full = disc / slope;
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = lambda - full * damping;
            let (trial_disc, _) = discriminant(family, trial, delta);
            if trial_disc.norm() < disc.norm() {
                accepted = Some((trial, trial_disc));
                break;
            }
            damping *= 0.5;
        }
        match accepted {
            Some((next, next_disc)) => {
                let moved = (next - lambda).norm();
                lambda = next;
                disc = next_disc;
                if moved <= 1e-15 * lambda.norm().max(1.0) {
                    break;
                }
                stalled = 0;
            }
            None => {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            }
        }
        if disc.norm() == 0.0 {
            break;
        }
    }

    let h = family.eval(lambda, delta);
    let values = general_eigenvalues(&h);
    let scale = problem_scale(&h, &values);
    let (a, b) = closest_pair(&values);
    let gap = (values[a] - values[b]).norm();
    if !(gap <= EP_GAP_RATIO * scale) {
        return Err(OracleError::NotFound { seed, delta, gap, iterations });
    }
    let energy = (values[a] + values[b]) * 0.5;
    let shifted = &h - CMatrix::identity(h.nrows(), h.ncols()) * energy;
    let (_, second, v) = null_vector(&shifted);
    let condition = self_overlap_ratio(&v);
    if condition > EP_EVIDENCE_TOL || second <= EP_GAP_RATIO * scale {
        return Err(OracleError::NotAnEp { lambda, condition });
    }
    Ok(EpCandidate { delta, lambda, coalescing_energy: energy, gap, condition, iterations })
}

/// EP and complement vectors of the Jordan pair at `energy`, with
/// `(c̃|b̃) = 1`, `(b̃|b̃) = 0`, `(H−Ẽ)b̃ = f c̃`.
fn jordan_pair(
    h: &CMatrix,
    energy: C64,
    complement_anchor: Option<&CVector>,
) -> Result<(CVector, CVector, C64), OracleError> {
    let n = h.nrows();
    let shifted = h - CMatrix::identity(n, n) * energy;
    let svd = SVD::new(shifted.clone(), true, true);
    let last = n - 1;
    let sigma_min = svd.singular_values[last];
    let sigma_next = svd.singular_values[last - 1];
    let v_t = svd.v_t.as_ref().expect("computed");
    let mut ep = CVector::from_iterator(n, v_t.row(last).iter().map(|x| x.conj()));
    match complement_anchor {
        Some(anchor) => {
            let s = anchor.dot(&ep);
            ep /= s;
        }
        None => {
            ep /= c(ep.norm(), 0.0);
            fix_sign(&mut ep);
        }
    }
    let cutoff = (sigma_min * sigma_next).sqrt().max(f64::MIN_POSITIVE);
    let particular = svd.solve(&ep, cutoff).map_err(|e| OracleError::AnchorMismatch(e.to_string()))?;
    let kappa = ep.dot(&particular);
    let alpha = -particular.dot(&particular) / (kappa * 2.0);
    let complement = (particular + &ep * alpha) / kappa;
    Ok((ep, complement, kappa.inv()))
}

/// Greedily pairs eigenvalues closer than `tol`; returns the pairs and the
/// unpaired indices.
fn coalesced_pairs(values: &[C64], tol: f64) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut candidates = Vec::new();
    for i in 0..values.len() {
        for k in (i + 1)..values.len() {
            let d = (values[i] - values[k]).norm();
            if d <= tol {
                candidates.push((d, i, k));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; values.len()];
    let mut pairs = Vec::new();
    for (_, i, k) in candidates {
        if !used[i] && !used[k] {
            used[i] = true;
            used[k] = true;
            pairs.push((i, k));
        }
    }
    let rest = (0..values.len()).filter(|&i| !used[i]).collect();
    (pairs, rest)
}

/// Reorders `items` to follow `targets` by greedy nearest energy.
fn match_order(items: &[C64], targets: &[C64]) -> Result<Vec<usize>, OracleError> {
    if items.len() != targets.len() {
        return Err(OracleError::AnchorMismatch(format!("{} levels found, anchor has {}", items.len(), targets.len())));
    }
    let mut free: Vec<bool> = vec![true; items.len()];
    let mut order = Vec::with_capacity(items.len());
    for t in targets {
        let best = (0..items.len())
            .filter(|&i| free[i])
            .min_by(|&a, &b| (items[a] - t).norm().total_cmp(&(items[b] - t).norm()))
            .expect("counts agree");
        free[best] = false;
        order.push(best);
    }
    Ok(order)
}

/// Builds the complete EP-cluster state at `δ` directly from `H`, without
/// integrating anything. `λ` is located from `lambda_seed`.
///
/// With an anchor, the EP/ordinary levels are matched to the anchor's, EP
/// vectors are scaled so that `(b̃_anchor|c̃) = 1` and ordinary vectors take
/// the sign with positive overlap against the anchor. Without one, EP
/// vectors have unit Euclidean norm.
pub fn direct_ep_state(
    family: &dyn HamiltonianFamily,
    delta: f64,
    lambda_seed: C64,
    anchor: Option<&EpState>,
) -> Result<EpState, OracleError> {
    let candidate = locate_ep(family, delta, lambda_seed)?;
    let lambda = candidate.lambda;
    let h = family.eval(lambda, delta);
    let values = general_eigenvalues(&h);
    let scale = problem_scale(&h, &values);
    let (pairs, rest) = coalesced_pairs(&values, EP_GAP_RATIO * scale);
    let mut ep_energies: Vec<C64> = pairs.iter().map(|&(a, b)| (values[a] + values[b]) * 0.5).collect();
    let mut ordinary: Vec<C64> = rest.iter().map(|&i| values[i]).collect();
    match anchor {
        Some(a) => {
            let ep_order = match_order(&ep_energies, &a.ep_energies)?;
            ep_energies = ep_order.iter().map(|&i| ep_energies[i]).collect();
            let ord_order = match_order(&ordinary, &a.ordinary_energies)?;
            ordinary = ord_order.iter().map(|&i| ordinary[i]).collect();
        }
        None => {
            sort_spectrum(&mut ep_energies);
            sort_spectrum(&mut ordinary);
        }
    }

    let mut ep_vectors = Vec::with_capacity(ep_energies.len());
    let mut complement_vectors = Vec::with_capacity(ep_energies.len());
    let mut f_coeffs = Vec::with_capacity(ep_energies.len());
    for (m, &energy) in ep_energies.iter().enumerate() {
        let (ep, complement, f) = jordan_pair(&h, energy, anchor.map(|a| &a.complement_vectors[m]))?;
        ep_vectors.push(ep);
        complement_vectors.push(complement);
        f_coeffs.push(f);
    }

    let n = h.nrows();
    let mut ordinary_vectors = Vec::with_capacity(ordinary.len());
    for (j, &energy) in ordinary.iter().enumerate() {
        let (_, _, v) = null_vector(&(&h - CMatrix::identity(n, n) * energy));
        let mut v = c_normalize(&v)?;
        match anchor {
            Some(a) => {
                if a.ordinary_vectors[j].dot(&v).re < 0.0 {
                    v = -v;
                }
            }
            None => fix_sign(&mut v),
        }
        ordinary_vectors.push(v);
    }

    Ok(EpState {
        delta,
        lambda,
        ep_energies,
        ep_vectors,
        complement_vectors,
        f_coeffs,
        ordinary_energies: ordinary,
        ordinary_vectors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub delta: f64,
    pub lambda_record: C64,
    pub lambda_oracle: C64,
    pub discrepancy: f64,
    pub gap: f64,
    pub condition: f64,
}

/// Locates the EP at each checkpoint, seeded with the recorded `λ(δ)`.
pub fn validate_trajectory(
    record: &TrajectoryRecord,
    family: &dyn HamiltonianFamily,
    checkpoints: &[f64],
) -> Result<Vec<OracleCheck>, OracleError> {
    checkpoints
        .iter()
        .map(|&delta| {
            let sample = record
                .samples
                .iter()
                .min_by(|a, b| (a.delta - delta).abs().total_cmp(&(b.delta - delta).abs()))
                .filter(|s| (s.delta - delta).abs() <= 1e-9 * delta.abs().max(1.0))
                .ok_or(OracleError::CheckpointNotSampled(delta))?;
            let found = locate_ep(family, sample.delta, sample.lambda)?;
            Ok(OracleCheck {
                delta: sample.delta,
                lambda_record: sample.lambda,
                lambda_oracle: found.lambda,
                discrepancy: (found.lambda - sample.lambda).norm(),
                gap: found.gap,
                condition: found.condition,
            })
        })
        .collect()
}
