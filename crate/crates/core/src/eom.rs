//! Equations of motion for a cluster of `M` binary exceptional points of
//! `H(λ(δ), δ)`, with the real switching parameter `δ` as propagation time.
//!
//! The state carries the seven entities that solve the eigenproblem at an
//! EP cluster: the trajectory point `λ`, the EP energies `Ẽₘ`, EP vectors
//! `|c̃ₘ)`, their complements `|b̃ₘ)`, the coupling coefficients `fₘ`, and
//! the `N − 2M` ordinary eigenpairs `(Eⱼ, |cⱼ))`. Rates are obtained by
//! expanding each vector derivative over the biorthogonal closure
//!
//! ```text
//! 1 = Σⱼ |cⱼ)(cⱼ| + Σₘ |c̃ₘ)(b̃ₘ| + |b̃ₘ)(c̃ₘ|
//! ```
//!
//! with the gauge `(b̃ₘ|ċ̃ₘ) = 0 = (c̃ₘ|ḃ̃ₘ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, complex_matmul, max_abs, CMatrix, CVector, C64};
use crate::model::HamiltonianFamily;

/// Relative size of `|(c̃|∂λH|c̃)|` (against `‖∂λH‖`) below which `λ̇` is
/// considered undefined.
pub const LAMBDA_DOT_DENOMINATOR_TOL: f64 = 1e-12;
/// Energy gaps below `GAP_RATIO · (spectral diameter)` halt the propagation.
pub const GAP_RATIO: f64 = 1e-8;
/// A degenerate ordinary pair is tolerated only if its coupling through `V`
/// is below this fraction of `‖V‖`.
pub const RECTIFIED_COUPLING_TOL: f64 = 1e-10;
/// Largest closure coefficient `|(cⱼ′|V|cⱼ)/(Eⱼ−Eⱼ′)|` accepted for an
/// ordinary pair below the gap threshold.
pub const MAX_ORDINARY_COEFFICIENT: f64 = 1e6;
/// Residual tolerance reported for the reference computation.
pub const DEFAULT_TOLERANCE: f64 = 5e-4;
pub const DEFAULT_CHECK_EVERY: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    EpEp,
    EpOrdinary,
    OrdinaryOrdinary,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EomError {
    #[error("λ̇ denominator (c̃|∂λH|c̃) vanishes for EP {m} at δ = {delta} (|value| = {value:e})")]
    SingularDenominator { m: usize, delta: f64, value: f64 },
    #[error("near collision of {kind:?} levels ({a}, {b}) at δ = {delta}: gap {gap:e}")]
    NearCollision { delta: f64, kind: PairKind, a: usize, b: usize, gap: f64 },
    #[error("consistency check failed at δ = {delta}: {report}")]
    ToleranceBreach { delta: f64, report: ResidualReport },
    #[error("state layout mismatch: {0}")]
    Layout(String),
    #[error("non-finite value in propagated state at δ = {delta}")]
    NonFinite { delta: f64 },
}

/// The seven entities at one value of `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpState {
    pub delta: f64,
    pub lambda: C64,
    pub ep_energies: Vec<C64>,
    pub ep_vectors: Vec<CVector>,
    pub complement_vectors: Vec<CVector>,
    pub f_coeffs: Vec<C64>,
    pub ordinary_energies: Vec<C64>,
    pub ordinary_vectors: Vec<CVector>,
}

/// Sizes needed to unpack a flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub dim: usize,
    pub ep_count: usize,
}

impl StateLayout {
    pub fn ordinary_count(&self) -> usize {
        self.dim - 2 * self.ep_count
    }

    /// `1 + M + (N−2M) + M + N·N`.
    pub fn flat_len(&self) -> usize {
        1 + self.ep_count + self.ordinary_count() + self.ep_count + self.dim * self.dim
    }
}

impl EpState {
    pub fn dim(&self) -> usize {
        self.ep_vectors.first().or(self.ordinary_vectors.first()).map(|v| v.len()).unwrap_or(0)
    }

    pub fn ep_count(&self) -> usize {
        self.ep_energies.len()
    }

    pub fn ordinary_count(&self) -> usize {
        self.ordinary_energies.len()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout { dim: self.dim(), ep_count: self.ep_count() }
    }

    pub fn validate_layout(&self) -> Result<(), EomError> {
        let n = self.dim();
        let m = self.ep_count();
        let ok = self.ep_vectors.len() == m
            && self.complement_vectors.len() == m
            && self.f_coeffs.len() == m
            && self.ordinary_vectors.len() == self.ordinary_count()
            && 2 * m + self.ordinary_count() == n
            && self
                .ep_vectors
                .iter()
                .chain(&self.complement_vectors)
                .chain(&self.ordinary_vectors)
                .all(|v| v.len() == n);
        if ok {
            Ok(())
        } else {
            Err(EomError::Layout(format!(
                "N = {n}, M = {m}, ordinary = {}, vectors = {}/{}/{}",
                self.ordinary_count(),
                self.ep_vectors.len(),
                self.complement_vectors.len(),
                self.ordinary_vectors.len()
            )))
        }
    }

    /// All energies, EP ones first.
    pub fn energies(&self) -> Vec<C64> {
        self.ep_energies.iter().chain(&self.ordinary_energies).copied().collect()
    }

    pub fn spectral_diameter(&self) -> f64 {
        let all = self.energies();
        let mut diam: f64 = 0.0;
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                diam = diam.max((a - b).norm());
            }
        }
        diam
    }

    /// Columns `[c̃₁ … c̃_M, b̃₁ … b̃_M, c₁ … c_{N−2M}]`.
    pub fn basis_matrix(&self) -> CMatrix {
        let n = self.dim();
        let cols: Vec<&CVector> =
            self.ep_vectors.iter().chain(&self.complement_vectors).chain(&self.ordinary_vectors).collect();
        CMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
    }

    /// Entrywise complex conjugate of every entity.
    pub fn conj(&self) -> EpState {
        let cv = |vs: &Vec<CVector>| vs.iter().map(|v| v.map(|x| x.conj())).collect();
        let cs = |xs: &Vec<C64>| xs.iter().map(|x| x.conj()).collect();
        EpState {
            delta: self.delta,
            lambda: self.lambda.conj(),
            ep_energies: cs(&self.ep_energies),
            ep_vectors: cv(&self.ep_vectors),
            complement_vectors: cv(&self.complement_vectors),
            f_coeffs: cs(&self.f_coeffs),
            ordinary_energies: cs(&self.ordinary_energies),
            ordinary_vectors: cv(&self.ordinary_vectors),
        }
    }

    /// Packs `[λ, Ẽ, E, f, c̃…, b̃…, c…]` into one complex vector.
    pub fn to_flat(&self) -> Vec<C64> {
        let layout = self.layout();
        let mut out = Vec::with_capacity(layout.flat_len());
        out.push(self.lambda);
        out.extend_from_slice(&self.ep_energies);
        out.extend_from_slice(&self.ordinary_energies);
        out.extend_from_slice(&self.f_coeffs);
        for v in self.ep_vectors.iter().chain(&self.complement_vectors).chain(&self.ordinary_vectors) {
            out.extend(v.iter().copied());
        }
        out
    }

    pub fn from_flat(delta: f64, layout: StateLayout, flat: &[C64]) -> Result<EpState, EomError> {
        if flat.len() != layout.flat_len() {
            return Err(EomError::Layout(format!("expected {} entries, got {}", layout.flat_len(), flat.len())));
        }
        let (m, o, n) = (layout.ep_count, layout.ordinary_count(), layout.dim);
        let mut pos = 0;
        let mut take = |len: usize| {
            let slice = &flat[pos..pos + len];
            pos += len;
            slice
        };
        let lambda = take(1)[0];
        let ep_energies = take(m).to_vec();
        let ordinary_energies = take(o).to_vec();
        let f_coeffs = take(m).to_vec();
        let mut vectors =
            |count: usize| -> Vec<CVector> { (0..count).map(|_| CVector::from_column_slice(take(n))).collect() };
        let ep_vectors = vectors(m);
        let complement_vectors = vectors(m);
        let ordinary_vectors = vectors(o);
        Ok(EpState {
            delta,
            lambda,
            ep_energies,
            ep_vectors,
            complement_vectors,
            f_coeffs,
            ordinary_energies,
            ordinary_vectors,
        })
    }

    /// `self ← self + h · rates`, including `δ ← δ + h`.
    pub fn axpy(&mut self, h: f64, rates: &EpRates) {
        let hc = c(h, 0.0);
        self.delta += h;
        self.lambda += hc * rates.lambda_dot;
        let scalars = |xs: &mut Vec<C64>, ds: &[C64]| {
            for (x, d) in xs.iter_mut().zip(ds) {
                *x += hc * d;
            }
        };
        scalars(&mut self.ep_energies, &rates.ep_energy_rates);
        scalars(&mut self.f_coeffs, &rates.f_rates);
        scalars(&mut self.ordinary_energies, &rates.ordinary_energy_rates);
        let vectors = |xs: &mut Vec<CVector>, ds: &[CVector]| {
            for (x, d) in xs.iter_mut().zip(ds) {
                x.axpy(hc, d, c(1.0, 0.0));
            }
        };
        vectors(&mut self.ep_vectors, &rates.ep_vector_rates);
        vectors(&mut self.complement_vectors, &rates.complement_vector_rates);
        vectors(&mut self.ordinary_vectors, &rates.ordinary_vector_rates);
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

/// `d/dδ` of every entity of an [`EpState`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpRates {
    pub lambda_dot: C64,
    /// `λ̇` evaluated separately for every EP of the cluster.
    pub lambda_dot_components: Vec<C64>,
    pub ep_energy_rates: Vec<C64>,
    pub f_rates: Vec<C64>,
    pub ordinary_energy_rates: Vec<C64>,
    pub ep_vector_rates: Vec<CVector>,
    pub complement_vector_rates: Vec<CVector>,
    pub ordinary_vector_rates: Vec<CVector>,
    /// Closure-expansion coefficients: column `k` holds the components of the
    /// `k`-th basis-vector rate along the basis of [`EpState::basis_matrix`].
    pub coefficients: CMatrix,
}

impl EpRates {
    /// Relative disagreement among the per-EP `λ̇` values.
    pub fn lambda_dot_spread(&self) -> f64 {
        relative_spread(&self.lambda_dot_components, self.lambda_dot)
    }

    /// Largest gauge/normalization overlap that must vanish identically:
    /// `(c̃ₘ|ċ̃ₘ)`, `(b̃ₘ|ċ̃ₘ)`, `(c̃ₘ|ḃ̃ₘ)`, `(b̃ₘ|ḃ̃ₘ)`, `(cⱼ|ċⱼ)`,
    /// read off the expansion coefficients.
    pub fn gauge_violation(&self, ep_count: usize) -> f64 {
        let m = ep_count;
        let n = self.coefficients.nrows();
        let mut worst: f64 = 0.0;
        for k in 0..m {
            worst = worst.max(self.coefficients[(m + k, k)].norm());
            worst = worst.max(self.coefficients[(k, k)].norm());
            worst = worst.max(self.coefficients[(m + k, m + k)].norm());
            worst = worst.max(self.coefficients[(k, m + k)].norm());
        }
        for j in 2 * m..n {
            worst = worst.max(self.coefficients[(j, j)].norm());
        }
        worst
    }
}

fn relative_spread(values: &[C64], mean: C64) -> f64 {
    let spread = values.iter().fold(0.0_f64, |acc, v| acc.max((v - mean).norm()));
    if mean.norm() > 0.0 {
        spread / mean.norm()
    } else {
        spread
    }
}

/// `λ̇` predicted by the `m`-th EP: `−(c̃ₘ|∂δH|c̃ₘ) / (c̃ₘ|∂λH|c̃ₘ)`.
pub fn lambda_dot(state: &EpState, family: &dyn HamiltonianFamily, m: usize) -> Result<C64, EomError> {
    let dl = family.d_lambda(state.lambda, state.delta);
    let dd = family.d_delta(state.lambda, state.delta);
    lambda_dot_with(state, &dl, &dd, m)
}

fn lambda_dot_with(state: &EpState, dl: &CMatrix, dd: &CMatrix, m: usize) -> Result<C64, EomError> {
    let v = &state.ep_vectors[m];
    let num = v.dot(&(dd * v));
    let den = v.dot(&(dl * v));
    let scale = max_abs(dl) * v.norm_squared();
    if den.norm() < LAMBDA_DOT_DENOMINATOR_TOL * scale || den.norm() == 0.0 {
        return Err(EomError::SingularDenominator { m, delta: state.delta, value: den.norm() });
    }
    Ok(-num / den)
}

/// Mean `λ̇` over all EPs of the cluster, its relative spread, and the
/// individual values.
pub fn lambda_dot_all(state: &EpState, family: &dyn HamiltonianFamily) -> Result<(C64, f64, Vec<C64>), EomError> {
    let dl = family.d_lambda(state.lambda, state.delta);
    let dd = family.d_delta(state.lambda, state.delta);
    lambda_dot_mean(state, &dl, &dd)
}

fn lambda_dot_mean(state: &EpState, dl: &CMatrix, dd: &CMatrix) -> Result<(C64, f64, Vec<C64>), EomError> {
    let comps = (0..state.ep_count()).map(|m| lambda_dot_with(state, dl, dd, m)).collect::<Result<Vec<_>, _>>()?;
    if comps.is_empty() {
        return Ok((c(0.0, 0.0), 0.0, comps));
    }
    let mean = comps.iter().sum::<C64>() / c(comps.len() as f64, 0.0);
    Ok((mean, relative_spread(&comps, mean), comps))
}

/// `V(δ) = ∂λH · λ̇ + ∂δH` at the state's `(λ, δ)`.
pub fn effective_perturbation(state: &EpState, family: &dyn HamiltonianFamily, lambda_dot: C64) -> CMatrix {
    family.d_lambda(state.lambda, state.delta) * lambda_dot + family.d_delta(state.lambda, state.delta)
}

/// Evaluates all seven equations of motion at `state`.
pub fn rates(state: &EpState, family: &dyn HamiltonianFamily) -> Result<EpRates, EomError> {
    state.validate_layout()?;
    let n = state.dim();
    let mm = state.ep_count();
    let oo = state.ordinary_count();
    let dl = family.d_lambda(state.lambda, state.delta);
    let dd = family.d_delta(state.lambda, state.delta);
    let (lambda_dot, _, lambda_dot_components) = lambda_dot_mean(state, &dl, &dd)?;
    let v = dl * lambda_dot + dd;

    let basis = state.basis_matrix();
    let vb = complex_matmul(&v, &basis);
    // omega[(x, y)] = (x|V|y) over basis vectors x, y.
    let omega = complex_matmul(&basis.transpose(), &vb);

    let e = |k: usize| k;
    let bb = |k: usize| mm + k;
    let o = |j: usize| 2 * mm + j;
    let ep = &state.ep_energies;
    let en = &state.ordinary_energies;
    let f = &state.f_coeffs;

    let threshold = GAP_RATIO * state.spectral_diameter();
    let v_scale = max_abs(&v);
    let delta = state.delta;
    let collision = |kind, a, b, gap| EomError::NearCollision { delta, kind, a, b, gap };

    for m in 0..mm {
        for m2 in (m + 1)..mm {
            let gap = (ep[m] - ep[m2]).norm();
            if gap <= threshold {
                return Err(collision(PairKind::EpEp, m, m2, gap));
            }
        }
        for (j, e) in en.iter().enumerate() {
            let gap = (ep[m] - e).norm();
            if gap <= threshold {
                return Err(collision(PairKind::EpOrdinary, m, j, gap));
            }
        }
    }
    // A rectified degenerate ordinary pair has vanishing coupling; its term is
    // dropped. Slightly split pairs keep a finite coupling-to-gap ratio.
    let mut skip = vec![false; oo * oo];
    for j in 0..oo {
        for j2 in (j + 1)..oo {
            let gap = (en[j] - en[j2]).norm();
            if gap <= threshold {
                let coupling = omega[(o(j), o(j2))].norm();
                if coupling <= RECTIFIED_COUPLING_TOL * v_scale.max(f64::MIN_POSITIVE) {
                    skip[j * oo + j2] = true;
                    skip[j2 * oo + j] = true;
                } else if coupling > MAX_ORDINARY_COEFFICIENT * gap {
                    return Err(collision(PairKind::OrdinaryOrdinary, j, j2, gap));
                }
            }
        }
    }

    let mut coeff = CMatrix::zeros(n, n);
    for m in 0..mm {
        // |ċ̃ₘ)
        for j in 0..oo {
            coeff[(o(j), e(m))] = omega[(o(j), e(m))] / (ep[m] - en[j]);
        }
        for m2 in (0..mm).filter(|&k| k != m) {
            let d = ep[m] - ep[m2];
            coeff[(e(m2), e(m))] = omega[(bb(m2), e(m))] / d + f[m2] * omega[(e(m2), e(m))] / (d * d);
            coeff[(bb(m2), e(m))] = omega[(e(m2), e(m))] / d;
        }
        // |ḃ̃ₘ)
        for j in 0..oo {
            let d = ep[m] - en[j];
            coeff[(o(j), bb(m))] = omega[(o(j), bb(m))] / d - f[m] * omega[(o(j), e(m))] / (d * d);
        }
        for m2 in (0..mm).filter(|&k| k != m) {
            let d = ep[m] - ep[m2];
            let d2 = d * d;
            coeff[(e(m2), bb(m))] = omega[(bb(m2), bb(m))] / d + f[m2] * omega[(e(m2), bb(m))] / d2
                - f[m] * omega[(bb(m2), e(m))] / d2
                - c(2.0, 0.0) * f[m] * f[m2] * omega[(e(m2), e(m))] / (d2 * d);
            coeff[(bb(m2), bb(m))] = omega[(e(m2), bb(m))] / d - f[m] * omega[(e(m2), e(m))] / d2;
        }
    }
    for j in 0..oo {
        // |ċⱼ)
        for j2 in (0..oo).filter(|&k| k != j) {
            if !skip[j * oo + j2] {
                coeff[(o(j2), o(j))] = omega[(o(j2), o(j))] / (en[j] - en[j2]);
            }
        }
        for m in 0..mm {
            let d = en[j] - ep[m];
            coeff[(e(m), o(j))] = omega[(bb(m), o(j))] / d + f[m] * omega[(e(m), o(j))] / (d * d);
            coeff[(bb(m), o(j))] = omega[(e(m), o(j))] / d;
        }
    }

    let vector_rates = complex_matmul(&basis, &coeff);
    let column = |k: usize| CVector::from_iterator(n, vector_rates.column(k).iter().copied());

    Ok(EpRates {
        lambda_dot,
        lambda_dot_components,
        ep_energy_rates: (0..mm).map(|m| omega[(bb(m), e(m))]).collect(),
        f_rates: (0..mm).map(|m| omega[(bb(m), bb(m))]).collect(),
        ordinary_energy_rates: (0..oo).map(|j| omega[(o(j), o(j))]).collect(),
        ep_vector_rates: (0..mm).map(|m| column(e(m))).collect(),
        complement_vector_rates: (0..mm).map(|m| column(bb(m))).collect(),
        ordinary_vector_rates: (0..oo).map(|j| column(o(j))).collect(),
        coefficients: coeff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Explicit first-order difference scheme.
    #[default]
    Euler,
    /// Classical fourth-order Runge–Kutta.
    Rk4,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(format!("integrator must be `euler` or `rk4`, got `{other}`")),
        }
    }
}

/// One explicit first-order step `x ← x + h·ẋ`. No re-orthogonalization.
pub fn step(state: &EpState, family: &dyn HamiltonianFamily, h: f64) -> Result<EpState, EomError> {
    step_with(state, family, h, Integrator::Euler)
}

pub fn step_with(
    state: &EpState,
    family: &dyn HamiltonianFamily,
    h: f64,
    integrator: Integrator,
) -> Result<EpState, EomError> {
    if h == 0.0 {
        return Ok(state.clone());
    }
    let k1 = rates(state, family)?;
    let mut next = state.clone();
    match integrator {
        Integrator::Euler => next.axpy(h, &k1),
        Integrator::Rk4 => {
            let stage = |k: &EpRates, frac: f64| {
                let mut s = state.clone();
                s.axpy(frac * h, k);
                s
            };
            let k2 = rates(&stage(&k1, 0.5), family)?;
            let k3 = rates(&stage(&k2, 0.5), family)?;
            let k4 = rates(&stage(&k3, 1.0), family)?;
            next.axpy(h / 6.0, &k1);
            next.axpy(h / 3.0, &k2);
            next.axpy(h / 3.0, &k3);
            next.axpy(h / 6.0, &k4);
            next.delta = state.delta + h;
        }
    }
    Ok(next)
}

/// Maximum violations of the eigenvalue equations, the biorthonormality
/// relations, the closure relation, and of the `m`-independence of `λ̇`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_eigen_residual: f64,
    pub max_orthonormality_residual: f64,
    pub max_closure_residual: f64,
    pub lambda_dot_spread: f64,
    pub passed: bool,
}

impl ResidualReport {
    /// Largest of the eigen, orthonormality and closure residuals.
    pub fn max_residual(&self) -> f64 {
        self.max_eigen_residual.max(self.max_orthonormality_residual).max(self.max_closure_residual)
    }
}

impl std::fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "eigen {:.3e}, orthonormality {:.3e}, closure {:.3e}, λ̇ spread {:.3e}",
            self.max_eigen_residual,
            self.max_orthonormality_residual,
            self.max_closure_residual,
            self.lambda_dot_spread
        )
    }
}

/// Pairing matrix `T` with `BᵀB = T` and `B T Bᵀ = 1` for an exact basis `B`.
fn pairing_matrix(n: usize, m: usize) -> CMatrix {
    let mut t = CMatrix::zeros(n, n);
    for k in 0..m {
        t[(k, m + k)] = c(1.0, 0.0);
        t[(m + k, k)] = c(1.0, 0.0);
    }
    for j in 2 * m..n {
        t[(j, j)] = c(1.0, 0.0);
    }
    t
}

/// Evaluates every structural relation the state must satisfy and compares
/// the worst violation (and the relative `λ̇` spread) against `tol`.
pub fn check_consistency(state: &EpState, family: &dyn HamiltonianFamily, tol: f64) -> ResidualReport {
    let n = state.dim();
    let mm = state.ep_count();
    let h = family.eval(state.lambda, state.delta);
    let basis = state.basis_matrix();
    let hb = complex_matmul(&h, &basis);

    let mut eigen: f64 = 0.0;
    for k in 0..n {
        let col = hb.column(k);
        let (energy, extra) = if k < mm {
            (state.ep_energies[k], None)
        } else if k < 2 * mm {
            (state.ep_energies[k - mm], Some((state.f_coeffs[k - mm], k - mm)))
        } else {
            (state.ordinary_energies[k - 2 * mm], None)
        };
        for i in 0..n {
            let mut r = col[i] - energy * basis[(i, k)];
            if let Some((f, partner)) = extra {
                r -= f * basis[(i, partner)];
            }
            eigen = eigen.max(r.norm());
        }
    }

    let pairing = pairing_matrix(n, mm);
    let gram = complex_matmul(&basis.transpose(), &basis);
    let ortho = max_abs(&(gram - &pairing));
    let closure = complex_matmul(&complex_matmul(&basis, &pairing), &basis.transpose());
    let closure = max_abs(&(closure - CMatrix::identity(n, n)));

    let spread = match lambda_dot_all(state, family) {
        Ok((_, spread, _)) => spread,
        Err(_) => f64::INFINITY,
    };
    let values = [eigen, ortho, closure, spread];
    let passed = values.iter().all(|x| x.is_finite() && *x <= tol);
    ResidualReport {
        max_eigen_residual: eigen,
        max_orthonormality_residual: ortho,
        max_closure_residual: closure,
        lambda_dot_spread: spread,
        passed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    pub delta_end: f64,
    /// Number of uniform steps `G`.
    pub grid: u64,
    pub tol: f64,
    /// Consistency check and sampling cadence, in steps.
    pub sample_every: u64,
    pub integrator: Integrator,
}

impl PropagationSettings {
    pub fn new(delta_end: f64, grid: u64, tol: f64) -> Self {
        PropagationSettings { delta_end, grid, tol, sample_every: DEFAULT_CHECK_EVERY, integrator: Integrator::Euler }
    }

    pub fn sample_every(mut self, every: u64) -> Self {
        self.sample_every = every.max(1);
        self
    }

    pub fn integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }
}

/// One checked point of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub delta: f64,
    pub lambda: C64,
    pub ep_energies: Vec<C64>,
    pub ordinary_energies: Vec<C64>,
    pub residuals: ResidualReport,
}

impl TrajectorySample {
    fn of(state: &EpState, residuals: ResidualReport) -> Self {
        TrajectorySample {
            delta: state.delta,
            lambda: state.lambda,
            ep_energies: state.ep_energies.clone(),
            ordinary_energies: state.ordinary_energies.clone(),
            residuals,
        }
    }
}

/// Sampled trajectory of one cluster plus the state at its last step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub ep_count: usize,
    pub ordinary_count: usize,
    pub samples: Vec<TrajectorySample>,
    pub final_state: EpState,
}

impl TrajectoryRecord {
    /// Worst eigen/orthonormality/closure residual over all samples.
    pub fn max_residual(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| acc.max(s.residuals.max_residual()))
    }

    pub fn max_lambda_dot_spread(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| acc.max(s.residuals.lambda_dot_spread))
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("records always hold the initial sample")
    }
}

/// A propagation stopped early; `partial` ends at the last passing sample.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("propagation halted: {reason}")]
pub struct Halted {
    pub partial: TrajectoryRecord,
    pub reason: EomError,
}

/// Propagates `initial` over `G` uniform steps to `settings.delta_end`,
/// checking consistency every `sample_every` steps and at the final step.
#[allow(clippy::result_large_err)]
pub fn propagate(
    initial: &EpState,
    family: &dyn HamiltonianFamily,
    settings: &PropagationSettings,
) -> Result<TrajectoryRecord, Halted> {
    let first_report = check_consistency(initial, family, settings.tol);
    let mut record = TrajectoryRecord {
        ep_count: initial.ep_count(),
        ordinary_count: initial.ordinary_count(),
        samples: vec![TrajectorySample::of(initial, first_report)],
        final_state: initial.clone(),
    };
    if let Err(reason) = initial.validate_layout() {
        return Err(Halted { partial: record, reason });
    }
    if !first_report.passed {
        let reason = EomError::ToleranceBreach { delta: initial.delta, report: first_report };
        return Err(Halted { partial: record, reason });
    }
    if settings.delta_end == initial.delta || settings.grid == 0 {
        return Ok(record);
    }

    let start = initial.delta;
    let grid = settings.grid;
    let h = (settings.delta_end - start) / grid as f64;
    let every = settings.sample_every.max(1);
    let mut state = initial.clone();
    for k in 1..=grid {
        state = match step_with(&state, family, h, settings.integrator) {
            Ok(s) => s,
            Err(reason) => return Err(Halted { partial: record, reason }),
        };
        state.delta = if k == grid { settings.delta_end } else { start + k as f64 * h };
        if k % every == 0 || k == grid {
            if !state.is_finite() {
                return Err(Halted { partial: record, reason: EomError::NonFinite { delta: state.delta } });
            }
            let report = check_consistency(&state, family, settings.tol);
            if !report.passed {
                let reason = EomError::ToleranceBreach { delta: state.delta, report };
                return Err(Halted { partial: record, reason });
            }
            record.samples.push(TrajectorySample::of(&state, report));
            record.final_state = state.clone();
        }
    }
    record.final_state = state;
    Ok(record)
}
