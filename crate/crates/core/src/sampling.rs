//! Seeded random draws shared by the property suites.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::SymMatrix;
use crate::pucci::PucciParams;

pub type SuiteRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Symmetric matrix with Gaussian entries scaled by `scale`.
pub fn random_sym<R: Rng>(rng: &mut R, n: usize, scale: f64) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix,
/// with the sign convention that makes the distribution Haar.
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Ellipticity pair with `Λ/λ` drawn from `[1, max_ratio]` and a gradient
/// constant in `[0, k_max]`.
pub fn random_params<R: Rng>(rng: &mut R, max_ratio: f64, k_max: f64) -> PucciParams {
    let lambda = rng.random_range(0.2..2.0);
    let ratio = rng.random_range(1.0..=max_ratio);
    let k = rng.random_range(0.0..=k_max);
    PucciParams::new(lambda, lambda * ratio, k).expect("sampled parameters are valid")
}
