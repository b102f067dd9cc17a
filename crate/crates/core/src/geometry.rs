//! Conformally flat charts of the three space forms.
//!
//! Every model is written as `g_ij(x) = m(x) δ_ij` on an open subset of ℝᴺ:
//!
//! ```text
//! Euclidean              m(x) = 1
//! hyperbolic half-space  m(x) = x_N⁻²           (x_N > 0)
//! stereographic sphere   m(x) = 4 / (1 + |x|²)²
//! ```
//!
//! Christoffel symbols are always produced from the Levi-Civita formula for a
//! conformal metric,
//!
//! ```text
//! Γᵏᵢⱼ = (∂ᵢm δₖⱼ + ∂ⱼm δᵢₖ − ∂ₖm δᵢⱼ) / (2m),
//! ```
//!
//! so there is one code path for all models; the closed forms of the
//! individual models are only used as test oracles.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Smallest admissible last coordinate in the half-space chart.
pub const HYPERBOLIC_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Euclidean,
    HyperbolicHalfSpace,
    SphereStereographic,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Euclidean => "euclidean",
            SpaceKind::HyperbolicHalfSpace => "hyperbolic",
            SpaceKind::SphereStereographic => "sphere",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "flat" => Some(SpaceKind::Euclidean),
            "hyperbolic" | "hyperbolic-half-space" => Some(SpaceKind::HyperbolicHalfSpace),
            "sphere" | "spherical" | "sphere-stereographic" => Some(SpaceKind::SphereStereographic),
            _ => None,
        }
    }
}

/// Model tag plus dimension; selects the chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceForm {
    kind: SpaceKind,
    dim: usize,
}

impl SpaceForm {
    pub fn new(kind: SpaceKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Argument(format!("dimension must be at least 2, got {dim}")));
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean, dim)
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::HyperbolicHalfSpace, dim)
    }

    pub fn sphere(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::SphereStereographic, dim)
    }

    #[inline]
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Checks that `x` lies in the chart and has the right dimension.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::Argument(format!("point has dimension {}, space has {}", x.dim(), self.dim)));
        }
        if self.kind == SpaceKind::HyperbolicHalfSpace && x.last() < HYPERBOLIC_MARGIN {
            return Err(Error::Domain(format!(
                "x_N = {} is outside the half-space chart (needs x_N >= {HYPERBOLIC_MARGIN:e})",
                x.last()
            )));
        }
        Ok(())
    }

    fn check_vector(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Argument(format!("{what} has length {}, expected {}", v.len(), self.dim)));
        }
        Ok(())
    }
}

/// Chart coordinates of a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Argument("point must have at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("point coordinates must be finite".into()));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

/// `values[k][i][j] = Γᵏᵢⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank3Symbols {
    pub values: Vec<Vec<Vec<f64>>>,
}

impl Rank3Symbols {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[k][i][j]
    }
}

pub fn conformal_factor(space: &SpaceForm, x: &Point) -> Result<f64> {
    space.check_point(x)?;
    Ok(match space.kind {
        SpaceKind::Euclidean => 1.0,
        SpaceKind::HyperbolicHalfSpace => x.last().powi(-2),
        SpaceKind::SphereStereographic => 4.0 / (1.0 + x.norm_sq()).powi(2),
    })
}

/// Euclidean gradient of the conformal factor.
pub fn conformal_factor_gradient(space: &SpaceForm, x: &Point) -> Result<Vec<f64>> {
    space.check_point(x)?;
    let n = space.dim;
    let mut g = vec![0.0; n];
    match space.kind {
        SpaceKind::Euclidean => {}
        SpaceKind::HyperbolicHalfSpace => g[n - 1] = -2.0 * x.last().powi(-3),
        SpaceKind::SphereStereographic => {
            let q = 1.0 + x.norm_sq();
            for (gi, xi) in g.iter_mut().zip(x.coords()) {
                *gi = -16.0 * xi / q.powi(3);
            }
        }
    }
    Ok(g)
}

pub fn christoffel(space: &SpaceForm, x: &Point) -> Result<Rank3Symbols> {
    let n = space.dim;
    let m = conformal_factor(space, x)?;
    let dm = conformal_factor_gradient(space, x)?;
    let half_inv = 0.5 / m;
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let values = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| half_inv * (dm[i] * delta(k, j) + dm[j] * delta(i, k) - dm[k] * delta(i, j)))
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(Rank3Symbols { values })
}

/// Coordinate matrix of `∇²_g u = ∇²u − Σₖ ∂ₖu Γᵏ`.
pub fn riemannian_hessian(space: &SpaceForm, x: &Point, grad: &[f64], hess: &SymMatrix) -> Result<SymMatrix> {
    space.check_vector(grad, "gradient")?;
    if hess.dim() != space.dim {
        return Err(Error::Argument(format!("Hessian is {0}x{0}, expected {1}x{1}", hess.dim(), space.dim)));
    }
    let gamma = christoffel(space, x)?;
    let n = space.dim;
    Ok(SymMatrix::from_fn(n, |i, j| {
        let corr: f64 = (0..n).map(|k| grad[k] * gamma.get(k, i, j)).sum();
        hess.get(i, j) - corr
    }))
}

/// `|∇_g u|_g = m^{-1/2} |∇u|`.
pub fn riemannian_gradient_norm(space: &SpaceForm, x: &Point, grad: &[f64]) -> Result<f64> {
    space.check_vector(grad, "gradient")?;
    let m = conformal_factor(space, x)?;
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(norm / m.sqrt())
}

pub fn laplace_beltrami(space: &SpaceForm, x: &Point, grad: &[f64], hess: &SymMatrix) -> Result<f64> {
    space.check_vector(grad, "gradient")?;
    space.check_point(x)?;
    let n = space.dim;
    match space.kind {
        SpaceKind::Euclidean => Ok(hess.trace()),
        SpaceKind::HyperbolicHalfSpace => {
            let xn = x.last();
            Ok(xn * xn * hess.trace() + (2.0 - n as f64) * xn * grad[n - 1])
        }
        SpaceKind::SphereStereographic => {
            let m = conformal_factor(space, x)?;
            Ok(riemannian_hessian(space, x, grad, hess)?.trace() / m)
        }
    }
}

pub fn hyperbolic_distance(x: &Point, y: &Point) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::Argument("points have different dimensions".into()));
    }
    for p in [x, y] {
        if p.last() < HYPERBOLIC_MARGIN {
            return Err(Error::Domain(format!("x_N = {} is outside the half-space chart", p.last())));
        }
    }
    let d2: f64 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
    let arg = 1.0 + d2 / (2.0 * x.last() * y.last());
    // arccosh(1 + t) = ln(1 + t + sqrt(t(2 + t))) keeps precision for small t
    let t = arg - 1.0;
    Ok((t + (t * (2.0 + t)).sqrt()).ln_1p())
}

/// Geodesic distance in any of the three charts.
pub fn geodesic_distance(space: &SpaceForm, x: &Point, y: &Point) -> Result<f64> {
    space.check_point(x)?;
    space.check_point(y)?;
    let d2: f64 = x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
    match space.kind {
        SpaceKind::Euclidean => Ok(d2.sqrt()),
        SpaceKind::HyperbolicHalfSpace => hyperbolic_distance(x, y),
        SpaceKind::SphereStereographic => {
            let half_chord = (d2 / ((1.0 + x.norm_sq()) * (1.0 + y.norm_sq()))).sqrt();
            Ok(2.0 * half_chord.min(1.0).asin())
        }
    }
}

/// Reflection across the totally geodesic hypersurface `{x₁ = s}`.
pub fn reflect(s: f64, x: &Point) -> Point {
    let mut c = x.coords.clone();
    c[0] = 2.0 * s - c[0];
    Point { coords: c }
}
