//! Parametric Hamiltonian families `H(λ, δ)` and the coupled angular-momenta
//! toy model.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c, max_abs, CMatrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("toy model needs an odd positive n, got {0}")]
    EvenOrZeroN(u32),
    #[error("toy model needs omega > 0, got {0}")]
    NonPositiveOmega(f64),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameters for family `{family}`: {reason}")]
    InvalidParameters { family: String, reason: String },
}

/// A complex symmetric matrix family `H(λ, δ)`, `λ ∈ ℂ`, `δ ∈ ℝ`, together
/// with its analytic partial derivatives.
pub trait HamiltonianFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, lambda: C64, delta: f64) -> CMatrix;
    fn d_lambda(&self, lambda: C64, delta: f64) -> CMatrix;
    fn d_delta(&self, lambda: C64, delta: f64) -> CMatrix;

    fn name(&self) -> String {
        "family".to_string()
    }
}

impl<F: HamiltonianFamily + ?Sized> HamiltonianFamily for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).eval(lambda, delta)
    }
    fn d_lambda(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).d_lambda(lambda, delta)
    }
    fn d_delta(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).d_delta(lambda, delta)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<F: HamiltonianFamily + ?Sized> HamiltonianFamily for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).eval(lambda, delta)
    }
    fn d_lambda(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).d_lambda(lambda, delta)
    }
    fn d_delta(&self, lambda: C64, delta: f64) -> CMatrix {
        (**self).d_delta(lambda, delta)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(format!("parity must be `even` or `odd`, got `{other}`")),
        }
    }
}

/// Two angular momenta with `I_T = n/2` and `J_T = 1/2`, restricted to one
/// parity sector of `I₃ + J₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyModelSpec {
    pub n: u32,
    pub omega: f64,
    pub parity: Parity,
}

impl ToyModelSpec {
    pub fn new(n: u32, omega: f64, parity: Parity) -> Result<Self, ModelError> {
        let spec = ToyModelSpec { n, omega, parity };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 || self.n.is_multiple_of(2) {
            return Err(ModelError::EvenOrZeroN(self.n));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(ModelError::NonPositiveOmega(self.omega));
        }
        Ok(())
    }

    pub fn sector_dim(&self) -> usize {
        self.n as usize + 1
    }
}

/// Basis state `|I₃, J₃⟩` stored with doubled quantum numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisState {
    pub i3_twice: i32,
    pub j3_twice: i32,
}

impl BasisState {
    /// `K = I₃ + J₃`, always an integer here.
    pub fn k(&self) -> i32 {
        (self.i3_twice + self.j3_twice) / 2
    }
}

fn gamma(l_twice: i32, m_twice: i32, raise: bool) -> f64 {
    let l = l_twice as f64 / 2.0;
    let m = m_twice as f64 / 2.0;
    let shifted = if raise { m + 1.0 } else { m - 1.0 };
    (l * (l + 1.0) - m * shifted).max(0.0).sqrt()
}

/// The toy Hamiltonian `ω(I₃+J₃) + λ{I₊J₋ + I₋J₊ + δ(I₊J₊ + I₋J₋)}` on one
/// parity sector, basis ordered by `(I₃, J₃)` ascending with `I₃` major.
#[derive(Debug, Clone)]
pub struct ToyModel {
    spec: ToyModelSpec,
    basis: Vec<BasisState>,
    /// `I₊J₋ + I₋J₊` (conserves K).
    v0: nalgebra::DMatrix<f64>,
    /// `I₊J₊ + I₋J₋` (shifts K by ±2).
    v1: nalgebra::DMatrix<f64>,
}

impl ToyModel {
    pub fn new(spec: ToyModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let n = spec.n as i32;
        let want_odd = spec.parity == Parity::Odd;
        let mut basis = Vec::with_capacity(spec.sector_dim());
        for i3_twice in (-n..=n).step_by(2) {
            for j3_twice in [-1, 1] {
                let state = BasisState { i3_twice, j3_twice };
                if (state.k().rem_euclid(2) == 1) == want_odd {
                    basis.push(state);
                }
            }
        }
        let dim = basis.len();
        let mut v0 = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut v1 = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        // ⟨row|op|col⟩; fill the upper triangle and mirror it so the matrices
        // are symmetric bit for bit.
        for col in 0..dim {
            let ket = basis[col];
            for row in 0..=col {
                let bra = basis[row];
                let di = bra.i3_twice - ket.i3_twice;
                let dj = bra.j3_twice - ket.j3_twice;
                let gi = |up: bool| gamma(n, ket.i3_twice, up);
                let gj = |up: bool| gamma(1, ket.j3_twice, up);
                let (target, value) = match (di, dj) {
                    (2, -2) => (&mut v0, gi(true) * gj(false)),
                    (-2, 2) => (&mut v0, gi(false) * gj(true)),
                    (2, 2) => (&mut v1, gi(true) * gj(true)),
                    (-2, -2) => (&mut v1, gi(false) * gj(false)),
                    _ => continue,
                };
                target[(row, col)] = value;
                target[(col, row)] = value;
            }
        }
        Ok(ToyModel { spec, basis, v0, v1 })
    }

    pub fn spec(&self) -> &ToyModelSpec {
        &self.spec
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    /// The K-conserving coupling `V₀`, restricted to the sector.
    pub fn v0(&self) -> &nalgebra::DMatrix<f64> {
        &self.v0
    }

    pub fn v1(&self) -> &nalgebra::DMatrix<f64> {
        &self.v1
    }
}

/// Matrix of the toy Hamiltonian; see [`ToyModel`].
pub fn toy_matrix(spec: &ToyModelSpec, lambda: C64, delta: f64) -> Result<CMatrix, ModelError> {
    Ok(ToyModel::new(*spec)?.eval(lambda, delta))
}

impl HamiltonianFamily for ToyModel {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn eval(&self, lambda: C64, delta: f64) -> CMatrix {
        let dim = self.dim();
        CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                c(self.spec.omega * self.basis[i].k() as f64, 0.0)
            } else if self.v0[(i, j)] != 0.0 {
                lambda * self.v0[(i, j)]
            } else if self.v1[(i, j)] != 0.0 {
                lambda * (delta * self.v1[(i, j)])
            } else {
                c(0.0, 0.0)
            }
        })
    }

    fn d_lambda(&self, _lambda: C64, delta: f64) -> CMatrix {
        let dim = self.dim();
        CMatrix::from_fn(dim, dim, |i, j| c(self.v0[(i, j)] + delta * self.v1[(i, j)], 0.0))
    }

    fn d_delta(&self, lambda: C64, _delta: f64) -> CMatrix {
        let dim = self.dim();
        CMatrix::from_fn(dim, dim, |i, j| lambda * self.v1[(i, j)])
    }

    fn name(&self) -> String {
        format!("toy(n={}, omega={}, parity={})", self.spec.n, self.spec.omega, self.spec.parity)
    }
}

/// Negation symmetry of the spectrum: the eigenvalue multiset of
/// `toy_matrix(spec, λ, δ)` equals its own negation within `1e-8`.
pub fn spectrum_symmetry_check(spec: &ToyModelSpec, lambda: C64, delta: f64) -> Result<bool, ModelError> {
    let h = toy_matrix(spec, lambda, delta)?;
    let values = crate::oracle::general_eigenvalues(&h);
    Ok(is_negation_symmetric(&values, 1e-8))
}

/// Greedy nearest matching of `{E}` against `{−E}`.
pub fn is_negation_symmetric(values: &[C64], tol: f64) -> bool {
    negation_asymmetry(values) <= tol
}

/// Largest distance between an eigenvalue and the negation of its greedy
/// partner.
pub fn negation_asymmetry(values: &[C64]) -> f64 {
    let mut unused: Vec<C64> = values.to_vec();
    let mut worst: f64 = 0.0;
    let mut order: Vec<C64> = values.to_vec();
    order.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    for e in order {
        let target = -e;
        let (idx, dist) = unused
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        worst = worst.max(dist);
        unused.swap_remove(idx);
        if unused.is_empty() {
            break;
        }
    }
    worst
}

/// Discrepancy between analytic derivatives and centered differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub d_lambda_error: f64,
    pub d_delta_error: f64,
    pub passed: bool,
}

pub const DERIVATIVE_STEP: f64 = 1e-6;
pub const DERIVATIVE_TOL: f64 = 1e-6;

/// Compares `d_lambda`/`d_delta` against centered differences of `eval`
/// (step `1e-6`), relative to `max(‖H‖, ‖∂H‖, 1)`.
pub fn finite_difference_derivative_check(family: &dyn HamiltonianFamily, lambda: C64, delta: f64) -> DerivativeReport {
    let h = DERIVATIVE_STEP;
    let scale = max_abs(&family.eval(lambda, delta)).max(1.0);
    let fd_lambda = (family.eval(lambda + h, delta) - family.eval(lambda - h, delta)) / c(2.0 * h, 0.0);
    let fd_delta = (family.eval(lambda, delta + h) - family.eval(lambda, delta - h)) / c(2.0 * h, 0.0);
    let an_lambda = family.d_lambda(lambda, delta);
    let an_delta = family.d_delta(lambda, delta);
    let d_lambda_error = max_abs(&(fd_lambda - &an_lambda)) / scale.max(max_abs(&an_lambda));
    let d_delta_error = max_abs(&(fd_delta - &an_delta)) / scale.max(max_abs(&an_delta));
    DerivativeReport {
        d_lambda_error,
        d_delta_error,
        passed: d_lambda_error <= DERIVATIVE_TOL && d_delta_error <= DERIVATIVE_TOL,
    }
}

pub type FamilyFactory =
    Box<dyn Fn(&serde_json::Value) -> Result<Arc<dyn HamiltonianFamily>, ModelError> + Send + Sync>;

/// Named constructors for Hamiltonian families, keyed by the name used in
/// run configurations. The toy model is registered as `toy`.
pub struct FamilyRegistry {
    factories: BTreeMap<String, FamilyFactory>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        let mut registry = FamilyRegistry { factories: BTreeMap::new() };
        registry.register("toy", |params| {
            let spec: ToyModelSpec = serde_json::from_value(params.clone())
                .map_err(|e| ModelError::InvalidParameters { family: "toy".into(), reason: e.to_string() })?;
            Ok(Arc::new(ToyModel::new(spec)?) as Arc<dyn HamiltonianFamily>)
        });
        registry
    }
}

impl FamilyRegistry {
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&serde_json::Value) -> Result<Arc<dyn HamiltonianFamily>, ModelError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, params: &serde_json::Value) -> Result<Arc<dyn HamiltonianFamily>, ModelError> {
        let factory = self.factories.get(name).ok_or_else(|| ModelError::UnknownFamily(name.to_string()))?;
        factory(params)
    }
}
