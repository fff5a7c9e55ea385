//! Dense complex kernel built around the bilinear c-product `(u|v) = Σ uₙvₙ`.
//!
//! Vectors and matrices are plain `nalgebra` dynamic containers over
//! [`C64`]. Note that `nalgebra`'s `dot` does not conjugate, which is exactly
//! the c-product; `dotc` is the Hermitian inner product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// `|(v|v)| < SELF_ORTHOGONAL_RATIO · Σ|vₙ|²` marks a vector as self-orthogonal.
pub const SELF_ORTHOGONAL_RATIO: f64 = 1e-8;

/// Absolute eigenvalue gap below which a 2×2 matrix is checked for a Jordan block.
pub const DEFECTIVE_GAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("vector is self-orthogonal under the c-product (|(v|v)| = {overlap:e}, ‖v‖² = {norm_sqr:e})")]
    SelfOrthogonal { overlap: f64, norm_sqr: f64 },
    #[error("matrix is not real symmetric (max violation {violation:e})")]
    NotRealSymmetric { violation: f64 },
    #[error("2x2 matrix is defective (eigenvalue gap {gap:e}, off-diagonal scale {coupling:e})")]
    Defective { gap: f64, coupling: f64 },
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Bilinear c-product `(u|v) = Σ uₙ vₙ` (no conjugation).
pub fn c_product(u: &CVector, v: &CVector) -> Result<C64, LinalgError> {
    if u.len() != v.len() {
        return Err(LinalgError::Dimension { left: u.len(), right: v.len() });
    }
    Ok(u.dot(v))
}

/// `(u|A|v)` for a dense matrix `A`.
pub fn c_sandwich(u: &CVector, a: &CMatrix, v: &CVector) -> C64 {
    u.dot(&(a * v))
}

pub fn is_self_orthogonal(v: &CVector) -> bool {
    let norm_sqr = v.norm_squared();
    v.dot(v).norm() < SELF_ORTHOGONAL_RATIO * norm_sqr
}

/// Rescales `v` to unit c-norm `(w|w) = 1` using the principal branch of
/// `√(v|v)`.
pub fn c_normalize(v: &CVector) -> Result<CVector, LinalgError> {
    let overlap = v.dot(v);
    let norm_sqr = v.norm_squared();
    if overlap.norm() < SELF_ORTHOGONAL_RATIO * norm_sqr || norm_sqr == 0.0 {
        return Err(LinalgError::SelfOrthogonal { overlap: overlap.norm(), norm_sqr });
    }
    let root = overlap.sqrt();
    Ok(v.map(|x| x / root))
}

/// Flips the overall sign so that the largest-magnitude entry (first one on
/// ties) has a non-negative real part.
pub fn fix_sign(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, x) in v.iter().enumerate() {
        let mag = x.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if !v.is_empty() && v[best].re < 0.0 {
        v.neg_mut();
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

pub fn max_abs_vec(v: &CVector) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

/// Largest deviation from complex symmetry, `max |Aᵢⱼ − Aⱼᵢ|`.
pub fn symmetry_violation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a real symmetric matrix stored as complex.
///
/// Eigenvalues come back ascending; eigenvectors are real, orthonormal in the
/// standard inner product, and sign-fixed with [`fix_sign`].
pub fn hermitian_eigensolve(h: &CMatrix) -> Result<(Vec<f64>, Vec<CVector>), LinalgError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(LinalgError::Dimension { left: n, right: h.ncols() });
    }
    let scale = max_abs(h).max(1.0);
    let imag = h.iter().fold(0.0_f64, |acc, x| acc.max(x.im.abs()));
    let asym = symmetry_violation(h);
    let violation = imag.max(asym);
    if violation > 1e-12 * scale {
        return Err(LinalgError::NotRealSymmetric { violation });
    }
    let real = DMatrix::<f64>::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
    let eig = nalgebra::SymmetricEigen::try_new(real, f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v = CVector::from_iterator(n, eig.eigenvectors.column(k).iter().map(|&x| c(x, 0.0)));
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Closed-form eigenpairs of a 2×2 complex matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone)]
pub struct Eigen2 {
    pub values: [C64; 2],
    pub vectors: [CVector; 2],
}

/// Diagonalizes a 2×2 complex matrix in closed form.
///
/// Eigenvalues are `(a+d)/2 ∓ √(((a−d)/2)² + bc)` in that order. Eigenvectors
/// are c-normalized when they are not self-orthogonal, otherwise scaled to
/// unit Euclidean length. A near-coincident pair with a non-vanishing
/// nilpotent part is reported as [`LinalgError::Defective`].
pub fn diag_2x2(m: &CMatrix) -> Result<Eigen2, LinalgError> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(LinalgError::Dimension { left: m.nrows(), right: 2 });
    }
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let root = (half_diff * half_diff + b * cc).sqrt();
    let values = [mean - root, mean + root];
    let gap = (values[1] - values[0]).norm();
    let coupling = half_diff.norm().max(b.norm()).max(cc.norm());
    if gap < DEFECTIVE_GAP {
        if coupling < DEFECTIVE_GAP {
            let e1 = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
            let e2 = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
            return Ok(Eigen2 { values: [a, d], vectors: [e1, e2] });
        }
        return Err(LinalgError::Defective { gap, coupling });
    }
    let vector = |mu: C64| -> CVector {
        let first = CVector::from_vec(vec![b, mu - a]);
        let second = CVector::from_vec(vec![mu - d, cc]);
        let raw = if first.norm() >= second.norm() { first } else { second };
        let mut w = match c_normalize(&raw) {
            Ok(w) => w,
            Err(_) => raw.unscale(raw.norm()),
        };
        fix_sign(&mut w);
        w
    };
    Ok(Eigen2 { values, vectors: [vector(values[0]), vector(values[1])] })
}

/// Projected matrix `Wᵀ A W` over a list of column vectors (c-product sandwich).
pub fn project(a: &CMatrix, basis: &[CVector]) -> CMatrix {
    let images: Vec<CVector> = basis.iter().map(|v| a * v).collect();
    CMatrix::from_fn(basis.len(), basis.len(), |i, j| basis[i].dot(&images[j]))
}

pub fn columns_to_matrix(n: usize, vectors: &[&CVector]) -> CMatrix {
    CMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i])
}

/// `a · b` through four real products, which use the blocked real kernel.
pub fn complex_matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = (a.map(|x| x.re), a.map(|x| x.im));
    let (br, bi) = (b.map(|x| x.re), b.map(|x| x.im));
    let re: DMatrix<f64> = &ar * &br - &ai * &bi;
    let im: DMatrix<f64> = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(entries.len(), entries.iter().map(|&(r, i)| c(r, i)))
    }

    #[test]
    fn complex_matmul_matches_generic_product() {
        let a = CMatrix::from_fn(3, 4, |i, j| c(i as f64 - 0.5 * j as f64, 0.25 * (i * j) as f64 + 1.0));
        let b = CMatrix::from_fn(4, 2, |i, j| c((i + j) as f64, -(i as f64)));
        assert!(max_abs(&(complex_matmul(&a, &b) - &a * &b)) < 1e-13);
    }

    #[test]
    fn c_product_examples() {
        assert_eq!(c_product(&v(&[(1., 0.), (0., 1.)]), &v(&[(1., 0.), (0., 1.)])).unwrap(), c(0., 0.));
        assert_eq!(c_product(&v(&[(1., 0.), (0., 0.)]), &v(&[(0., 0.), (1., 0.)])).unwrap(), c(0., 0.));
        assert_eq!(c_product(&v(&[(2., 0.), (0., 3.)]), &v(&[(1., 0.), (1., 0.)])).unwrap(), c(2., 3.));
    }

    #[test]
    fn c_product_rejects_length_mismatch() {
        let err = c_product(&v(&[(1., 0.)]), &v(&[(1., 0.), (2., 0.)])).unwrap_err();
        assert_eq!(err, LinalgError::Dimension { left: 1, right: 2 });
    }

    #[test]
    fn c_normalize_examples() {
        let w = c_normalize(&v(&[(2., 0.), (0., 0.)])).unwrap();
        assert!((w[0] - c(1., 0.)).norm() < 1e-15 && w[1].norm() == 0.0);

        // (v|v) = −9, principal root 3i, so w = (0, 1).
        let w = c_normalize(&v(&[(0., 0.), (0., 3.)])).unwrap();
        assert!((w[1] - c(1., 0.)).norm() < 1e-15);
        assert!((w.dot(&w) - c(1., 0.)).norm() < 1e-12);

        assert!(matches!(c_normalize(&v(&[(1., 0.), (0., 1.)])), Err(LinalgError::SelfOrthogonal { .. })));
    }

    #[test]
    fn hermitian_eigensolve_examples() {
        let h = CMatrix::from_row_slice(2, 2, &[c(-1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
        let (e, vecs) = hermitian_eigensolve(&h).unwrap();
        assert_eq!(e, vec![-1.0, 1.0]);
        assert!((vecs[0][0] - c(1., 0.)).norm() < 1e-15);
        assert!((vecs[1][1] - c(1., 0.)).norm() < 1e-15);

        let x = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let (e, vecs) = hermitian_eigensolve(&x).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0][0].re.abs() - s).abs() < 1e-14);
        assert!((vecs[0][0].re + vecs[0][1].re).abs() < 1e-14);
        assert!((vecs[1][0].re - vecs[1][1].re).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eigensolve_rejects_complex_input() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.5), c(1., 0.5), c(0., 0.)]);
        assert!(matches!(hermitian_eigensolve(&h), Err(LinalgError::NotRealSymmetric { .. })));
        let h = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(2., 0.), c(0., 0.)]);
        assert!(matches!(hermitian_eigensolve(&h), Err(LinalgError::NotRealSymmetric { .. })));
    }

    #[test]
    fn diag_2x2_examples() {
        let m = CMatrix::from_row_slice(2, 2, &[c(3., 0.), c(0., 0.), c(0., 0.), c(-2., 0.)]);
        let eig = diag_2x2(&m).unwrap();
        let (lo, hi) = (eig.values[0], eig.values[1]);
        assert!((lo - c(-2., 0.)).norm() < 1e-15 && (hi - c(3., 0.)).norm() < 1e-15);
        assert!((eig.vectors[0][1].norm() - 1.0).abs() < 1e-15 && eig.vectors[0][0].norm() < 1e-15);
        assert!((eig.vectors[1][0].norm() - 1.0).abs() < 1e-15 && eig.vectors[1][1].norm() < 1e-15);

        let x = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let eig = diag_2x2(&x).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.values[0] + 1.0).norm() < 1e-15 && (eig.values[1] - 1.0).norm() < 1e-15);
        assert!((eig.vectors[0][0] - c(s, 0.)).norm() < 1e-15 && (eig.vectors[0][1] + c(s, 0.)).norm() < 1e-15);
        assert!((eig.vectors[1][0] - c(s, 0.)).norm() < 1e-15 && (eig.vectors[1][1] - c(s, 0.)).norm() < 1e-15);

        let jordan = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(diag_2x2(&jordan), Err(LinalgError::Defective { .. })));
    }

    #[test]
    fn diag_2x2_complex_symmetric_pairs_are_c_orthogonal() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.2), c(0.1, -0.7), c(0.1, -0.7), c(-0.4, 1.1)]);
        let eig = diag_2x2(&m).unwrap();
        for k in 0..2 {
            let resid = &m * &eig.vectors[k] - &eig.vectors[k] * eig.values[k];
            assert!(resid.norm() < 1e-14);
            assert!((eig.vectors[k].dot(&eig.vectors[k]) - c(1., 0.)).norm() < 1e-13);
        }
        assert!(eig.vectors[0].dot(&eig.vectors[1]).norm() < 1e-13);
    }
}
