//! Small dense complex-matrix helpers and random test states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `|r><c|`.
pub fn matrix_unit(n: usize, r: usize, c: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(r, c)] = ONE;
    m
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut s = ZERO;
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn normal_c<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| normal_c(rng))
}

/// Haar-random pure state `|psi><psi|`.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let psi = DVector::from_fn(n, |_, _| normal_c(rng));
    let psi = psi.unscale(psi.norm());
    &psi * psi.adjoint()
}

/// Full-rank random state `G G^† / tr(G G^†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_matrix(rng, n);
    let rho = &g * g.adjoint();
    let t = trace(&rho);
    hermitize(&rho.unscale(t.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn random_states_are_states() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in 2..6 {
            for rho in [random_density_matrix(&mut rng, n), random_pure_state(&mut rng, n)] {
                assert!((trace(&rho) - ONE).norm() < 1e-14);
                assert!(hermiticity_defect(&rho) < 1e-15);
                assert!(hermitian_eigenvalues(&rho)[0] > -1e-14);
            }
        }
    }

    #[test]
    fn trace_product_matches_product() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 4);
        let b = random_matrix(&mut rng, 4);
        assert!((trace_product(&a, &b) - trace(&(&a * &b))).norm() < 1e-12);
    }
}
