//! Pucci extremal operators, Euclidean and Riemannian.
//!
//! For ellipticity constants `0 < λ ≤ Λ` and a symmetric matrix `M` with
//! eigenvalues `μᵢ`,
//!
//! ```text
//! M⁻(M) = λ Σ_{μᵢ>0} μᵢ + Λ Σ_{μᵢ<0} μᵢ
//! M⁺(M) = Λ Σ_{μᵢ>0} μᵢ + λ Σ_{μᵢ<0} μᵢ
//! ```
//!
//! which equal `inf` / `sup` of `tr(AM)` over symmetric `A` with spectrum in
//! `[λ, Λ]`. On a conformal chart `g = m δ` the Riemannian eigenvalues are the
//! Euclidean ones divided by `m`, so `P±(∇²_g u) = m⁻¹ M±(∇²_g u)` where the
//! argument is the coordinate matrix of the Riemannian Hessian.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, SpaceForm, SpaceKind};
use crate::linalg::{Spectrum, SymMatrix};
use crate::sampling;

/// Relative width of the band around zero inside which an eigenvalue is
/// treated as nonnegative.
pub const SIGN_BAND: f64 = 1e-12;

/// Ellipticity constants `λ ≤ Λ` and gradient constant `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PucciParams {
    pub lambda: f64,
    pub big_lambda: f64,
    pub k: f64,
}

impl PucciParams {
    pub fn new(lambda: f64, big_lambda: f64, k: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
        }
        if !(big_lambda >= lambda && big_lambda.is_finite()) {
            return Err(Error::Argument(format!("Lambda = {big_lambda} must satisfy Lambda >= lambda = {lambda}")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Argument(format!("k must be nonnegative, got {k}")));
        }
        Ok(Self { lambda, big_lambda, k })
    }

    /// Laplacian case `λ = Λ = 1`, `k = 0`.
    pub fn laplacian() -> Self {
        Self { lambda: 1.0, big_lambda: 1.0, k: 0.0 }
    }

    pub fn is_linear(&self) -> bool {
        self.big_lambda - self.lambda <= 1e-14 * self.big_lambda
    }

    /// `μ(Λ, N, k) = Λ(N − 1) + k`.
    pub fn gradient_penalty(&self, n: usize) -> f64 {
        self.big_lambda * (n as f64 - 1.0) + self.k
    }
}

/// Selects the infimum (`Minus`) or supremum (`Plus`) operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extremal {
    Minus,
    Plus,
}

impl Extremal {
    /// +1 for `Plus`, −1 for `Minus`; the sign in front of `k|∇u|`.
    pub fn sign(self) -> f64 {
        match self {
            Extremal::Minus => -1.0,
            Extremal::Plus => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Extremal::Minus => "minus",
            Extremal::Plus => "plus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "minus" | "-" => Some(Extremal::Minus),
            "plus" | "+" => Some(Extremal::Plus),
            _ => None,
        }
    }

    /// Weight applied to an eigenvalue of the given sign.
    #[inline]
    pub fn weight(self, p: &PucciParams, positive: bool) -> f64 {
        match (self, positive) {
            (Extremal::Minus, true) | (Extremal::Plus, false) => p.lambda,
            (Extremal::Minus, false) | (Extremal::Plus, true) => p.big_lambda,
        }
    }
}

/// Pucci operator evaluated on a precomputed spectrum.
pub fn pucci_spectrum(values: &[f64], p: &PucciParams, sign: Extremal) -> f64 {
    let scale = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let band = SIGN_BAND * scale;
    values.iter().map(|&mu| if mu >= -band { sign.weight(p, true) * mu } else { sign.weight(p, false) * mu }).sum()
}

pub fn pucci(m: &SymMatrix, p: &PucciParams, sign: Extremal) -> f64 {
    pucci_spectrum(&m.eigenvalues().eigenvalues, p, sign)
}

pub fn pucci_minus(m: &SymMatrix, p: &PucciParams) -> f64 {
    pucci(m, p, Extremal::Minus)
}

pub fn pucci_plus(m: &SymMatrix, p: &PucciParams) -> f64 {
    pucci(m, p, Extremal::Plus)
}

/// Whether the sampling oracle also evaluates the analytically optimal
/// coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    WithAnalytic,
    RandomOnly,
}

/// Minimum of `tr(AM)` over sampled admissible coefficient matrices `A`.
///
/// Random candidates are `Q diag(d) Qᵀ` with Haar `Q` and `d` uniform in
/// `[λ, Λ]ᴺ`. In `WithAnalytic` mode the minimizer built from the eigenvectors
/// of `M` is added, which makes the result equal to `M⁻(M)`.
pub fn pucci_oracle(m: &SymMatrix, p: &PucciParams, samples: usize, seed: u64, mode: OracleMode) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Argument("oracle needs at least one sample".into()));
    }
    let n = m.dim();
    let mat = m.as_matrix();
    let mut rng = sampling::rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let q = sampling::random_orthogonal(&mut rng, n);
        let d: Vec<f64> = (0..n)
            .map(|_| if p.big_lambda > p.lambda { rng.random_range(p.lambda..=p.big_lambda) } else { p.lambda })
            .collect();
        best = best.min(trace_of_product(&q, &d, mat));
    }
    if mode == OracleMode::WithAnalytic {
        let (spec, q) = m.eigen_decomposition();
        let band = SIGN_BAND * m.frobenius_norm();
        let d: Vec<f64> = spec.eigenvalues.iter().map(|&mu| if mu < -band { p.big_lambda } else { p.lambda }).collect();
        best = best.min(trace_of_product(&q, &d, mat));
    }
    Ok(best)
}

/// `tr(Q diag(d) Qᵀ M)`.
fn trace_of_product(q: &DMatrix<f64>, d: &[f64], m: &DMatrix<f64>) -> f64 {
    let a = q * DMatrix::from_diagonal(&DVector::from_column_slice(d)) * q.transpose();
    a.component_mul(m).sum()
}

/// Inverse conformal factor `m(x)⁻¹`, evaluated in closed form.
pub fn inverse_conformal_factor(space: &SpaceForm, x: &Point) -> Result<f64> {
    space.check_point(x)?;
    Ok(match space.kind() {
        SpaceKind::Euclidean => 1.0,
        SpaceKind::HyperbolicHalfSpace => x.last() * x.last(),
        SpaceKind::SphereStereographic => {
            let q = 1.0 + x.norm_sq();
            q * q / 4.0
        }
    })
}

/// `P±(∇²_g u) = m⁻¹ M±(∇²_g u)` at `x`.
pub fn riemannian_pucci(
    space: &SpaceForm,
    x: &Point,
    grad: &[f64],
    hess: &SymMatrix,
    p: &PucciParams,
    sign: Extremal,
) -> Result<f64> {
    let h = geometry::riemannian_hessian(space, x, grad, hess)?;
    Ok(inverse_conformal_factor(space, x)? * pucci(&h, p, sign))
}

/// The gradient-correction matrix of the half-space model,
/// `Kᵢⱼ = ∂ⱼu δᵢN + ∂ᵢu δⱼN − ∂_N u δᵢⱼ`.
pub fn k_matrix(grad: &[f64]) -> SymMatrix {
    let n = grad.len();
    let last = n - 1;
    SymMatrix::from_fn(n, |i, j| match (i == last, j == last) {
        (false, false) => {
            if i == j {
                -grad[last]
            } else {
                0.0
            }
        }
        (true, false) => grad[j],
        (false, true) => grad[i],
        (true, true) => grad[last],
    })
}

/// Closed-form spectrum of [`k_matrix`]: `−∂_N u` with multiplicity `N − 2`,
/// then `±|∇u|`.
pub fn k_spectrum_closed_form(grad: &[f64]) -> Result<Spectrum> {
    let n = grad.len();
    if n < 2 {
        return Err(Error::Argument("gradient must have at least two components".into()));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut vals = vec![-grad[n - 1]; n - 2];
    vals.push(-norm);
    vals.push(norm);
    Ok(Spectrum::from_unsorted(vals))
}

/// Arrowhead matrix with `δ` on the first `N − 1` diagonal entries, `β` in
/// the corner and the border `a`.
pub fn arrowhead_matrix(delta: f64, beta: f64, a: &[f64]) -> SymMatrix {
    let n = a.len() + 1;
    SymMatrix::from_fn(n, |i, j| {
        if i == n - 1 && j == n - 1 {
            beta
        } else if j == n - 1 {
            a[i]
        } else if i == j {
            delta
        } else {
            0.0
        }
    })
}

/// `det` of the arrowhead matrix: `δ^{N−2} [δβ − Σ aᵢ²]`.
pub fn det_pencil(delta: f64, beta: f64, a: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Argument("border vector must have N - 1 >= 1 entries".into()));
    }
    let n = a.len() + 1;
    let sq: f64 = a.iter().map(|v| v * v).sum();
    Ok(delta.powi(n as i32 - 2) * (delta * beta - sq))
}

/// Both sides of the half-space comparison inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalitySides {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalitySides {
    /// `lhs − rhs`; the minus and sphere variants require this to be `≥ 0`.
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Half-space comparison between the Riemannian and Euclidean operators.
///
/// Minus: `P⁻(∇²_g u) − k|∇_g u|_g ≥ x_N² M⁻(∇²u) − μ x_N |∇u|`.
/// Plus: `P⁺(∇²_g u) + k|∇_g u|_g ≤ x_N² M⁺(∇²u) + μ x_N |∇u|`,
/// with `μ = Λ(N − 1) + k`.
pub fn lemma21_sides(
    x: &Point,
    grad: &[f64],
    hess: &SymMatrix,
    p: &PucciParams,
    variant: Extremal,
) -> Result<InequalitySides> {
    let n = x.dim();
    let space = SpaceForm::hyperbolic(n)?;
    let xn = x.last();
    let riem = riemannian_pucci(&space, x, grad, hess, p, variant)?;
    let gnorm_g = geometry::riemannian_gradient_norm(&space, x, grad)?;
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mu = p.gradient_penalty(n);
    let s = variant.sign();
    Ok(InequalitySides { lhs: riem + s * p.k * gnorm_g, rhs: xn * xn * pucci(hess, p, variant) + s * mu * xn * gnorm })
}

/// Stereographic-chart comparison:
/// `P⁻(∇²_g u) ≥ ((1+|x|²)²/4) M⁻(∇²u) − 2λ(N+1)|x|(1+|x|²)|∇u|`.
pub fn sphere_inequality_sides(x: &Point, grad: &[f64], hess: &SymMatrix, p: &PucciParams) -> Result<InequalitySides> {
    let n = x.dim();
    let space = SpaceForm::sphere(n)?;
    let q = 1.0 + x.norm_sq();
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let lhs = riemannian_pucci(&space, x, grad, hess, p, Extremal::Minus)?;
    let rhs = inverse_conformal_factor(&space, x)? * pucci_minus(hess, p)
        - 2.0 * p.lambda * (n as f64 + 1.0) * x.norm_sq().sqrt() * q * gnorm;
    Ok(InequalitySides { lhs, rhs })
}

/// Example operator `F±(A, q) = M±(A) ± k|q|` in the Euclidean chart.
pub fn example_operator(a: &SymMatrix, grad: &[f64], p: &PucciParams, sign: Extremal) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    pucci(a, p, sign) + sign.sign() * p.k * norm
}
