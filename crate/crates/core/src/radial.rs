//! Radial solutions of the overdetermined problem on geodesic balls.
//!
//! For `u = u(r)` with `r` the geodesic distance to the center, the Riemannian
//! Hessian has eigenvalue `u''` in the radial direction and `u'·ct(r)` with
//! multiplicity `N − 1` tangentially, where `ct` is `1/r`, `coth r` or `cot r`
//! depending on the model. The equation `F±(∇²_g u, ∇_g u) + f(u) = 0` with
//! `F± = P± ± k|∇_g u|_g` becomes a scalar ODE that is solved for `u''`
//! pointwise and integrated outward with RK4. The center value `u(0)` is
//! found by bisection so that `u(R) = 0`; the boundary constant is
//! `c₀ = |u'(R)|`.

use crate::error::{Error, Result};
use crate::geometry::{SpaceForm, SpaceKind};
use crate::pucci::{Extremal, PucciParams};

/// Radius at which integration starts; the origin is singular.
pub const START_RADIUS: f64 = 1e-6;
/// Default number of RK4 steps over `[START_RADIUS, R]`.
pub const DEFAULT_STEPS: usize = 4096;
const MAX_BISECTIONS: usize = 200;
const RESIDUAL_SAMPLES: usize = 100;

/// `ct(r)`: `1/r`, `coth r` or `cot r`.
pub fn curvature_cotangent(kind: SpaceKind, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    match kind {
        SpaceKind::Euclidean => Ok(1.0 / r),
        SpaceKind::HyperbolicHalfSpace => Ok(1.0 / r.tanh()),
        SpaceKind::SphereStereographic => {
            if r >= std::f64::consts::PI {
                return Err(Error::Domain(format!("spherical radius {r} must be below pi")));
            }
            Ok(1.0 / r.tan())
        }
    }
}

/// `F±` of a radial function: Pucci over `{u'', u'·ct(r) (×(N−1))}` plus
/// `±k|u'|`.
pub fn radial_operator(space: &SpaceForm, r: f64, du: f64, d2u: f64, p: &PucciParams, sign: Extremal) -> Result<f64> {
    let ct = curvature_cotangent(space.kind(), r)?;
    let tangential = du * ct;
    let n1 = space.dim() as f64 - 1.0;
    Ok(weighted(d2u, p, sign) + n1 * weighted(tangential, p, sign) + sign.sign() * p.k * du.abs())
}

#[inline]
fn weighted(mu: f64, p: &PucciParams, sign: Extremal) -> f64 {
    sign.weight(p, mu >= 0.0) * mu
}

/// Affine source `f(u) = c − b·u` with `b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSource {
    pub c: f64,
    pub b: f64,
}

impl AffineSource {
    pub fn new(c: f64, b: f64) -> Result<Self> {
        if !c.is_finite() || !(b >= 0.0 && b.is_finite()) {
            return Err(Error::Argument(format!("source needs finite c and b >= 0, got c = {c}, b = {b}")));
        }
        Ok(Self { c, b })
    }

    pub fn constant(c: f64) -> Self {
        Self { c, b: 0.0 }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.c - self.b * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProblem {
    pub space: SpaceForm,
    pub radius: f64,
    pub params: PucciParams,
    pub sign: Extremal,
    pub source: AffineSource,
}

impl RadialProblem {
    pub fn new(
        space: SpaceForm,
        radius: f64,
        params: PucciParams,
        sign: Extremal,
        source: AffineSource,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("geodesic radius must be positive, got {radius}")));
        }
        if space.kind() == SpaceKind::SphereStereographic && radius >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Domain(format!(
                "spherical ball of radius {radius} is not contained in a hemisphere (needs R < pi/2)"
            )));
        }
        Ok(Self { space, radius, params, sign, source })
    }

    /// `u''` solving `F±(u'', u', r) + f(u) = 0`; unique because the operator
    /// is strictly increasing in `u''`.
    fn second_derivative(&self, r: f64, u: f64, du: f64) -> f64 {
        let ct = curvature_cotangent(self.space.kind(), r).unwrap_or(f64::INFINITY);
        let n1 = self.space.dim() as f64 - 1.0;
        let p = &self.params;
        let rest = n1 * weighted(du * ct, p, self.sign) + self.sign.sign() * p.k * du.abs() + self.source.eval(u);
        if rest > 0.0 {
            -rest / self.sign.weight(p, false)
        } else {
            -rest / self.sign.weight(p, true)
        }
    }

    /// Taylor start `u''(0) = −f(u₀)/(N λ_eff)`, with `λ_eff` the weight of
    /// the branch selected by the sign of `u''(0)`.
    fn origin_curvature(&self, u0: f64) -> f64 {
        let f0 = self.source.eval(u0);
        let n = self.space.dim() as f64;
        let w = self.sign.weight(&self.params, f0 <= 0.0);
        -f0 / (n * w)
    }

    fn rhs(&self, r: f64, state: [f64; 2]) -> [f64; 2] {
        [state[1], self.second_derivative(r, state[0], state[1])]
    }

    /// RK4 from the Taylor start out to `R`; returns `(r, u, u')` nodes, the
    /// first one being the center.
    fn integrate(&self, u0: f64, steps: usize) -> Vec<(f64, f64, f64)> {
        let a = self.origin_curvature(u0);
        let r0 = START_RADIUS.min(self.radius * 1e-3);
        let h = (self.radius - r0) / steps as f64;
        let mut out = Vec::with_capacity(steps + 2);
        out.push((0.0, u0, 0.0));
        let mut y = [u0 + 0.5 * a * r0 * r0, a * r0];
        out.push((r0, y[0], y[1]));
        for i in 0..steps {
            let r = r0 + i as f64 * h;
            let k1 = self.rhs(r, y);
            let k2 = self.rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = self.rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = self.rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            let r_next = if i + 1 == steps { self.radius } else { r0 + (i + 1) as f64 * h };
            out.push((r_next, y[0], y[1]));
        }
        out
    }

    fn boundary_value(&self, u0: f64, steps: usize) -> f64 {
        self.integrate(u0, steps).last().map(|n| n.1).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub r_nodes: Vec<f64>,
    pub u_values: Vec<f64>,
    pub du_values: Vec<f64>,
    /// `|u'(R)|`.
    pub c0: f64,
    /// Sup of `|F± + f(u)|` at resampled interior radii, `u''` by finite
    /// differences of the integrated `u'`.
    pub residual_sup: f64,
    /// `|c₀(h) − c₀(h/2)|` from a rerun at half the step.
    pub c0_halving_delta: f64,
}

impl RadialSolution {
    pub fn center_value(&self) -> f64 {
        self.u_values[0]
    }

    /// Linear interpolation of `u` at radius `r ∈ [0, R]`.
    pub fn interpolate(&self, r: f64) -> f64 {
        let nodes = &self.r_nodes;
        if r <= 0.0 {
            return self.u_values[0];
        }
        let last = nodes.len() - 1;
        if r >= nodes[last] {
            return self.u_values[last];
        }
        let i = nodes.partition_point(|&x| x <= r).max(1) - 1;
        let t = (r - nodes[i]) / (nodes[i + 1] - nodes[i]);
        // cubic Hermite with the stored derivatives
        let h = nodes[i + 1] - nodes[i];
        let (u0, u1, d0, d1) = (self.u_values[i], self.u_values[i + 1], self.du_values[i], self.du_values[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * d1
    }
}

/// Shooting solve with the default step count and a step-halving rerun.
pub fn shoot(problem: &RadialProblem, tol: f64) -> Result<RadialSolution> {
    let mut sol = shoot_with_steps(problem, tol, DEFAULT_STEPS)?;
    let fine = shoot_with_steps(problem, tol, 2 * DEFAULT_STEPS)?;
    sol.c0_halving_delta = (sol.c0 - fine.c0).abs();
    Ok(sol)
}

pub fn shoot_with_steps(problem: &RadialProblem, tol: f64, steps: usize) -> Result<RadialSolution> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    if steps < 8 {
        return Err(Error::Argument("at least 8 integration steps required".into()));
    }
    let g = |u0: f64| problem.boundary_value(u0, steps);

    let mut lo = 0.0;
    let mut g_lo = g(lo);
    if !(g_lo < 0.0) {
        return Err(Error::Bracket(format!(
            "u(R) = {g_lo:.3e} >= 0 for u(0) = 0; the source admits no positive solution on this ball"
        )));
    }
    let mut hi = 1.0;
    let mut g_hi = g(hi);
    let mut expansions = 0;
    while !(g_hi > 0.0) {
        if !g_hi.is_finite() || expansions > 80 {
            return Err(Error::Bracket("could not find u(0) with u(R) > 0".into()));
        }
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = g(hi);
        expansions += 1;
    }
    if !(g_lo < 0.0) {
        return Err(Error::Bracket("u(R) does not change sign over the bracket".into()));
    }

    let mut u0 = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        u0 = 0.5 * (lo + hi);
        let g_mid = g(u0);
        if !(g_lo <= g_mid && g_mid <= g_hi) {
            return Err(Error::Consistency(format!(
                "u(0) -> u(R) is not monotone: u(R) = {g_lo:.6e}, {g_mid:.6e}, {g_hi:.6e} at u(0) = {lo:.6e}, {u0:.6e}, {hi:.6e}"
            )));
        }
        if g_mid.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if g_mid < 0.0 {
            lo = u0;
            g_lo = g_mid;
        } else {
            hi = u0;
            g_hi = g_mid;
        }
    }

    let nodes = problem.integrate(u0, steps);
    let r_nodes: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let u_values: Vec<f64> = nodes.iter().map(|n| n.1).collect();
    let du_values: Vec<f64> = nodes.iter().map(|n| n.2).collect();
    if let Some((i, &u)) = u_values.iter().enumerate().take(u_values.len() - 1).find(|(_, &u)| u < -tol) {
        return Err(Error::Infeasible(format!("u = {u:.3e} < 0 at r = {:.6} before the boundary", r_nodes[i])));
    }
    let c0 = du_values.last().copied().unwrap_or(0.0).abs();
    let residual_sup = profile_residual(problem, &r_nodes, &u_values, &du_values)?;
    Ok(RadialSolution { r_nodes, u_values, du_values, c0, residual_sup, c0_halving_delta: 0.0 })
}

/// Residual of the radial equation at evenly spaced interior nodes, with `u''`
/// from the five-point derivative of the stored `u'`.
fn profile_residual(problem: &RadialProblem, r: &[f64], u: &[f64], du: &[f64]) -> Result<f64> {
    // uniform part starts at index 1
    let first = 3;
    let last = r.len() - 4;
    let h = r[2] - r[1];
    let mut sup = 0.0f64;
    for s in 0..RESIDUAL_SAMPLES {
        let i = first + (s * (last - first)) / (RESIDUAL_SAMPLES - 1);
        let d2 = (du[i - 2] - 8.0 * du[i - 1] + 8.0 * du[i + 1] - du[i + 2]) / (12.0 * h);
        let f = radial_operator(&problem.space, r[i], du[i], d2, &problem.params, problem.sign)?
            + problem.source.eval(u[i]);
        sup = sup.max(f.abs());
    }
    Ok(sup)
}

/// Boundary constant `c₀` per radius; errors are kept per entry.
pub fn serrin_map(
    space: SpaceForm,
    params: PucciParams,
    source: AffineSource,
    sign: Extremal,
    radii: &[f64],
    tol: f64,
) -> Vec<(f64, Result<f64>)> {
    radii
        .iter()
        .map(|&r| {
            let c0 = RadialProblem::new(space, r, params, sign, source).and_then(|pb| shoot(&pb, tol)).map(|s| s.c0);
            (r, c0)
        })
        .collect()
}
