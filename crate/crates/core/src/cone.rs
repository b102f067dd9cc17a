//! Homogeneous extremal solutions in planar cones.
//!
//! A β-homogeneous function `Ψ = r^β φ(θ)` on the cone `{0 < θ < θ₀}` has, in
//! the orthonormal polar frame, the Hessian `r^{β−2} H` with
//!
//! ```text
//! H = [ β(β−1)φ     (β−1)φ'  ]
//!     [ (β−1)φ'     βφ + φ'' ]
//! ```
//!
//! so `M⁻(∇²Ψ) = 0` reduces to the profile equation `M⁻(H) = 0`, solved for
//! `φ''` at each angle. Normalizing `φ(0) = 0, φ'(0) = 1`, the first positive
//! zero `θ*(β)` of `φ` decreases with β; the homogeneity exponent of the cone
//! is the β with `θ*(β) = θ₀`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::pucci::PucciParams;

/// Angular steps per cone opening.
pub const DEFAULT_STEPS: usize = 16384;
/// How far past π the profile is followed before giving up on a zero.
pub const ZERO_SEARCH_MARGIN: f64 = 0.25;
const MAX_HALVINGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeProblem {
    pub theta0: f64,
    pub params: PucciParams,
}

impl ConeProblem {
    pub fn new(theta0: f64, params: PucciParams) -> Result<Self> {
        if !(theta0 > 0.0 && theta0 <= PI) {
            return Err(Error::Domain(format!("cone opening must lie in (0, pi], got {theta0}")));
        }
        Ok(Self { theta0, params })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeExponentResult {
    pub beta: f64,
    pub theta_nodes: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub dphi_values: Vec<f64>,
    /// Sup of `|M⁻(H)|` along the profile with `φ''` from finite differences.
    pub residual_sup: f64,
    /// `|β(h) − β(h/2)|` at the accepted step.
    pub beta_halving_delta: f64,
}

/// Frame Hessian of `r^β φ(θ)`, scaled by `r^{2−β}`.
pub fn polar_hessian(beta: f64, phi: f64, dphi: f64, d2phi: f64) -> SymMatrix {
    let off = (beta - 1.0) * dphi;
    SymMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => beta * (beta - 1.0) * phi,
        (1, 1) => beta * phi + d2phi,
        _ => off,
    })
}

/// `M⁻` of the 2×2 frame Hessian without allocating.
#[inline]
fn frame_pucci_minus(beta: f64, phi: f64, dphi: f64, d2phi: f64, p: &PucciParams) -> f64 {
    let a = beta * (beta - 1.0) * phi;
    let d = beta * phi + d2phi;
    let b = (beta - 1.0) * dphi;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (lo, hi) = (mean - rad, mean + rad);
    let w = |mu: f64| if mu >= 0.0 { p.lambda * mu } else { p.big_lambda * mu };
    w(lo) + w(hi)
}

/// The `φ''` for which `M⁻(polar_hessian(β, φ, φ', φ'')) = 0`.
///
/// The map `φ'' ↦ M⁻` is increasing with slope in `[λ, Λ]`, so one evaluation
/// yields a bracket; the root is then located by bisection with Illinois
/// (false-position) acceleration.
pub fn profile_rhs(_theta: f64, phi: f64, dphi: f64, beta: f64, p: &PucciParams) -> Result<f64> {
    let g = |y: f64| frame_pucci_minus(beta, phi, dphi, y, p);
    let y0 = -beta * beta * phi;
    let g0 = g(y0);
    if g0 == 0.0 {
        return Ok(y0);
    }
    let (mut lo, mut hi) = if g0 > 0.0 {
        (y0 - g0 / p.lambda, y0 - g0 / p.big_lambda)
    } else {
        (y0 - g0 / p.big_lambda, y0 - g0 / p.lambda)
    };
    // widen by a relative hair so rounding cannot exclude the root
    let pad = 1e-12 * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE;
    lo -= pad;
    hi += pad;
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    if !(g_lo <= 0.0 && g_hi >= 0.0) {
        return Err(Error::Numeric(format!(
            "profile equation not bracketed at phi = {phi:.3e}, dphi = {dphi:.3e}: g = {g_lo:.3e}, {g_hi:.3e}"
        )));
    }
    let scale = 1e-15 * (1.0 + lo.abs().max(hi.abs()));
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= scale {
            break;
        }
        let mut mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
            g_lo = gm;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            g_hi = gm;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if g_lo.abs() < g_hi.abs() { lo } else { hi })
}

struct Profile {
    theta: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

fn rk4_step(theta: f64, y: [f64; 2], h: f64, beta: f64, p: &PucciParams) -> Result<[f64; 2]> {
    let f = |t: f64, s: [f64; 2]| -> Result<[f64; 2]> { Ok([s[1], profile_rhs(t, s[0], s[1], beta, p)?]) };
    let k1 = f(theta, y)?;
    let k2 = f(theta + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]])?;
    let k3 = f(theta + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]])?;
    let k4 = f(theta + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
    Ok([
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// First zero of φ after the origin, or `None` if φ stays positive up to
/// `limit`.
fn first_zero_with_step(beta: f64, p: &PucciParams, h: f64, limit: f64) -> Result<Option<f64>> {
    let mut theta = 0.0;
    let mut y = [0.0, 1.0];
    while theta < limit {
        let next = rk4_step(theta, y, h, beta, p)?;
        if next[0] <= 0.0 {
            return Ok(Some(hermite_zero(theta, y, theta + h, next)));
        }
        theta += h;
        y = next;
    }
    Ok(None)
}

/// Zero of the cubic Hermite interpolant on `[t0, t1]` with `φ(t0) > 0 ≥ φ(t1)`.
fn hermite_zero(t0: f64, y0: [f64; 2], t1: f64, y1: [f64; 2]) -> f64 {
    let h = t1 - t0;
    let eval = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0[0]
            + (s3 - 2.0 * s2 + s) * h * y0[1]
            + (-2.0 * s3 + 3.0 * s2) * y1[0]
            + (s3 - s2) * h * y1[1]
    };
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if eval(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    t0 + 0.5 * (a + b) * h
}

/// First positive zero `θ*` of the normalized profile, integrated with
/// `π / DEFAULT_STEPS` steps.
pub fn first_zero(beta: f64, p: &PucciParams) -> Result<f64> {
    first_zero_steps(beta, p, PI / DEFAULT_STEPS as f64)
}

pub fn first_zero_steps(beta: f64, p: &PucciParams, h: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be positive, got {beta}")));
    }
    first_zero_with_step(beta, p, h, PI + ZERO_SEARCH_MARGIN)?.ok_or_else(|| {
        Error::Numeric(format!("profile for beta = {beta} has no zero before theta = pi + {ZERO_SEARCH_MARGIN}"))
    })
}

/// Solves for β with step `θ₀ / DEFAULT_STEPS`, then halves the step until two
/// consecutive exponents agree to `tol` (at most three halvings).
pub fn solve_beta(problem: &ConeProblem, tol: f64) -> Result<ConeExponentResult> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let mut h = problem.theta0 / DEFAULT_STEPS as f64;
    let mut beta = solve_beta_with_step(problem, tol, h)?;
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_HALVINGS {
        let finer = solve_beta_with_step(problem, tol, 0.5 * h)?;
        delta = (finer - beta).abs();
        beta = finer;
        h *= 0.5;
        if delta <= tol {
            break;
        }
    }
    let profile = integrate_profile(beta, &problem.params, problem.theta0, DEFAULT_STEPS)?;
    let residual_sup = profile_residual(beta, &problem.params, &profile);
    Ok(ConeExponentResult {
        beta,
        theta_nodes: profile.theta,
        phi_values: profile.phi,
        dphi_values: profile.dphi,
        residual_sup,
        beta_halving_delta: delta,
    })
}

/// Exponents for `Λ = λ(1 + ε)` over a list of `ε`, solved concurrently;
/// results keep the input order.
pub fn sweep_epsilon(theta0: f64, lambda: f64, eps: &[f64], tol: f64) -> Vec<(f64, Result<ConeExponentResult>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&e| {
                scope.spawn(move || {
                    let res = PucciParams::new(lambda, lambda * (1.0 + e), 0.0)
                        .and_then(|p| ConeProblem::new(theta0, p))
                        .and_then(|prob| solve_beta(&prob, tol));
                    (e, res)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("cone sweep worker panicked")).collect()
    })
}

/// Bisection on β at a fixed angular step.
pub fn solve_beta_with_step(problem: &ConeProblem, tol: f64, h: f64) -> Result<f64> {
    let theta0 = problem.theta0;
    let p = &problem.params;
    let limit = PI + ZERO_SEARCH_MARGIN;
    let zero = |b: f64| -> Result<f64> { Ok(first_zero_with_step(b, p, h, limit)?.unwrap_or(f64::INFINITY)) };

    let mut lo = 0.5 * PI / theta0;
    let mut hi = 2.0 * PI / theta0;
    let mut z_lo = zero(lo)?;
    let mut z_hi = zero(hi)?;
    for _ in 0..60 {
        if z_lo > theta0 {
            break;
        }
        hi = lo;
        z_hi = z_lo;
        lo *= 0.5;
        z_lo = zero(lo)?;
    }
    for _ in 0..60 {
        if z_hi < theta0 {
            break;
        }
        lo = hi;
        z_lo = z_hi;
        hi *= 2.0;
        z_hi = zero(hi)?;
    }
    if !(z_lo > theta0 && z_hi < theta0) {
        return Err(Error::Bracket(format!("could not bracket beta for theta0 = {theta0}")));
    }
    while hi - lo > tol * 1e-2 {
        let mid = 0.5 * (lo + hi);
        let z = zero(mid)?;
        let below_lo = z < z_lo || (z.is_infinite() && z_lo.is_infinite());
        if !(below_lo && z > z_hi) {
            return Err(Error::Consistency(format!(
                "first zero is not decreasing in beta: theta*({lo:.9}) = {z_lo:.9}, theta*({mid:.9}) = {z:.9}, theta*({hi:.9}) = {z_hi:.9}"
            )));
        }
        if z > theta0 {
            lo = mid;
            z_lo = z;
        } else {
            hi = mid;
            z_hi = z;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn integrate_profile(beta: f64, p: &PucciParams, theta0: f64, steps: usize) -> Result<Profile> {
    let h = theta0 / steps as f64;
    let mut theta = Vec::with_capacity(steps + 1);
    let mut phi = Vec::with_capacity(steps + 1);
    let mut dphi = Vec::with_capacity(steps + 1);
    let mut y = [0.0, 1.0];
    theta.push(0.0);
    phi.push(y[0]);
    dphi.push(y[1]);
    for i in 0..steps {
        y = rk4_step(i as f64 * h, y, h, beta, p)?;
        theta.push((i + 1) as f64 * h);
        phi.push(y[0]);
        dphi.push(y[1]);
    }
    Ok(Profile { theta, phi, dphi })
}

fn profile_residual(beta: f64, p: &PucciParams, prof: &Profile) -> f64 {
    let n = prof.theta.len();
    let h = prof.theta[1] - prof.theta[0];
    let d = &prof.dphi;
    (2..n - 2)
        .map(|i| {
            let d2 = (d[i - 2] - 8.0 * d[i - 1] + 8.0 * d[i + 1] - d[i + 2]) / (12.0 * h);
            frame_pucci_minus(beta, prof.phi[i], d[i], d2, p).abs()
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log w` against `log t`.
pub fn growth_exponent_fit(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 samples, got {}", samples.len())));
    }
    for (i, &(t, w)) in samples.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::Argument(format!("sample {i}: t = {t} must be positive")));
        }
        if !(w > 0.0) {
            return Err(Error::Argument(format!("sample {i}: w = {w} must be positive")));
        }
        if i > 0 && !(t < samples[i - 1].0) {
            return Err(Error::Argument(format!("sample {i}: t must be strictly decreasing")));
        }
    }
    let n = samples.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().map(|&(t, w)| (t.ln(), w.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pucci::pucci_minus;

    #[test]
    fn polar_hessian_examples() {
        let h = polar_hessian(2.0, 1.0, 0.0, -4.0);
        assert_eq!(h, SymMatrix::from_diagonal(&[2.0, -2.0]));
        assert_eq!(polar_hessian(1.7, 0.0, 0.0, 0.0), SymMatrix::zeros(2));
        let h = polar_hessian(1.0, 0.3, 0.8, -0.1);
        assert_eq!(h.get(0, 0), 0.0);
        assert_eq!(h.get(0, 1), 0.0);
        assert!((h.get(1, 1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn frame_pucci_agrees_with_eigen_route() {
        let p = PucciParams::new(0.7, 2.3, 0.0).unwrap();
        for &(b, f, df, d2) in &[(2.0, 1.0, 0.3, -3.0), (0.8, 0.2, -1.0, 0.5), (3.1, -0.4, 0.0, 1.0)] {
            let a = frame_pucci_minus(b, f, df, d2, &p);
            let e = pucci_minus(&polar_hessian(b, f, df, d2), &p);
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_rhs_harmonic_case() {
        let p = PucciParams::laplacian();
        assert!((profile_rhs(0.0, 1.0, 0.0, 2.0, &p).unwrap() + 4.0).abs() < 1e-14);
        let y = profile_rhs(0.3, 0.7, -0.2, 1.6, &p).unwrap();
        assert!((y + 1.6 * 1.6 * 0.7).abs() < 1e-13);
    }

    #[test]
    fn profile_rhs_matches_dense_scan() {
        let p = PucciParams::new(1.0, 2.0, 0.0).unwrap();
        let (phi, dphi, beta) = (0.6, -0.9, 1.7);
        let y = profile_rhs(0.0, phi, dphi, beta, &p).unwrap();
        // dense scan for the sign change of M⁻ over φ''
        let mut prev = (-20.0, pucci_minus(&polar_hessian(beta, phi, dphi, -20.0), &p));
        let mut found = None;
        for i in 1..=400_000 {
            let t = -20.0 + i as f64 * 1e-4;
            let v = pucci_minus(&polar_hessian(beta, phi, dphi, t), &p);
            if prev.1 < 0.0 && v >= 0.0 {
                found = Some(prev.0 - prev.1 * (t - prev.0) / (v - prev.1));
                break;
            }
            prev = (t, v);
        }
        let scan = found.expect("scan brackets the root");
        assert!((y - scan).abs() < 1e-6, "bisection {y} vs scan {scan}");
        assert!(pucci_minus(&polar_hessian(beta, phi, dphi, y), &p).abs() < 1e-12);
    }

    #[test]
    fn first_zero_harmonic() {
        let p = PucciParams::laplacian();
        assert!((first_zero(2.0, &p).unwrap() - PI / 2.0).abs() < 1e-9);
        assert!((first_zero(1.0, &p).unwrap() - PI).abs() < 1e-9);
        assert!(matches!(first_zero(0.5, &p), Err(Error::Numeric(_))));
        assert!(first_zero(0.0, &p).is_err());
    }

    #[test]
    fn cone_problem_validation() {
        assert!(ConeProblem::new(0.0, PucciParams::laplacian()).is_err());
        assert!(ConeProblem::new(3.2, PucciParams::laplacian()).is_err());
        assert!(ConeProblem::new(PI, PucciParams::laplacian()).is_ok());
    }

    #[test]
    fn growth_fit_examples() {
        let ts: Vec<f64> = (0..8).map(|i| 0.1 * 0.5f64.powi(i)).collect();
        let exact: Vec<_> = ts.iter().map(|&t| (t, t * t)).collect();
        assert!((growth_exponent_fit(&exact).unwrap() - 2.0).abs() < 1e-10);
        let scaled: Vec<_> = ts.iter().map(|&t| (t, 5.0 * t.powf(2.3))).collect();
        assert!((growth_exponent_fit(&scaled).unwrap() - 2.3).abs() < 1e-10);
        let ts: Vec<f64> = (0..9).map(|i| 0.1 * 10f64.powf(-(i as f64) / 4.0)).collect();
        let perturbed: Vec<_> = ts.iter().map(|&t| (t, t * t * (1.0 + 0.1 * t))).collect();
        let s = growth_exponent_fit(&perturbed).unwrap();
        assert!(s > 2.0 && s < 2.1, "slope {s}");
    }

    #[test]
    fn growth_fit_rejects_bad_samples() {
        assert!(growth_exponent_fit(&[(1.0, 1.0), (0.5, 0.25)]).is_err());
        assert!(growth_exponent_fit(&[(1.0, 1.0), (0.5, 0.0), (0.25, 0.1)]).is_err());
        assert!(growth_exponent_fit(&[(1.0, 1.0), (2.0, 1.0), (0.25, 0.1)]).is_err());
    }
}
