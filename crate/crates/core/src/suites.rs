//! Seeded randomized property suites behind `serrin verify`.
//!
//! Every check draws its inputs from its own ChaCha stream derived from the
//! suite seed, so a suite gives the same verdicts whether it runs alone or
//! as part of `all`.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, SpaceForm, SpaceKind};
use crate::linalg::{determinant, SymMatrix};
use crate::pucci::{self, Extremal, OracleMode, PucciParams};
use crate::sampling::{self, random_params, random_sym, random_vector, SuiteRng};

pub const DEFAULT_TRIALS: usize = 10_000;
/// Ellipticity ratios drawn by the general suites.
const MAX_RATIO: f64 = 10.0;
/// The stereographic comparison inequality only holds for moderate `Λ/λ`.
const SPHERE_MAX_RATIO: f64 = 4.0;
const K_MAX: f64 = 3.0;
const ORACLE_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Pucci,
    Lemma21,
    Sphere64,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Pucci => "pucci",
            Suite::Lemma21 => "lemma21",
            Suite::Sphere64 => "sphere64",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geometry" => Some(Suite::Geometry),
            "pucci" => Some(Suite::Pucci),
            "lemma21" => Some(Suite::Lemma21),
            "sphere64" => Some(Suite::Sphere64),
            "all" => Some(Suite::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Pins the ellipticity constants instead of sampling them.
    pub params: Option<PucciParams>,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        Self { trials: DEFAULT_TRIALS, seed, params: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// First failing input, formatted.
    pub counterexample: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}/{} passed", self.name, self.trials - self.failures, self.trials)?;
        if let Some(c) = &self.counterexample {
            write!(f, "; counterexample {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().map(|c| c.failures).sum()
    }
}

enum Verdict {
    Pass,
    Fail(String),
}

fn verdict(ok: bool, detail: impl FnOnce() -> String) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail(detail())
    }
}

fn stream(seed: u64, tag: u64) -> SuiteRng {
    sampling::rng(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_check(
    name: &'static str,
    tag: u64,
    cfg: &SuiteConfig,
    mut trial: impl FnMut(&mut SuiteRng) -> Result<Verdict>,
) -> CheckOutcome {
    let mut rng = stream(cfg.seed, tag);
    let mut out = CheckOutcome { name, trials: cfg.trials, failures: 0, counterexample: None };
    for _ in 0..cfg.trials {
        let v = trial(&mut rng).unwrap_or_else(|e| Verdict::Fail(format!("error: {e}")));
        if let Verdict::Fail(msg) = v {
            out.failures += 1;
            if out.counterexample.is_none() {
                out.counterexample = Some(msg);
            }
        }
    }
    out
}

/// Runs one suite, or all four for [`Suite::All`].
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<SuiteReport>> {
    if cfg.trials == 0 {
        return Err(Error::Argument("a suite needs at least one trial".into()));
    }
    Ok(match suite {
        Suite::Geometry => vec![geometry_suite(cfg)],
        Suite::Pucci => vec![pucci_suite(cfg)],
        Suite::Lemma21 => vec![lemma21_suite(cfg)],
        Suite::Sphere64 => vec![sphere64_suite(cfg)],
        Suite::All => vec![geometry_suite(cfg), pucci_suite(cfg), lemma21_suite(cfg), sphere64_suite(cfg)],
    })
}

fn params(rng: &mut SuiteRng, cfg: &SuiteConfig, max_ratio: f64) -> PucciParams {
    cfg.params.unwrap_or_else(|| random_params(rng, max_ratio, K_MAX))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_mat(m: &SymMatrix) -> String {
    let rows: Vec<String> =
        (0..m.dim()).map(|i| fmt_vec(&(0..m.dim()).map(|j| m.get(i, j)).collect::<Vec<_>>())).collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_params(p: &PucciParams) -> String {
    format!("(lambda={:.17e}, Lambda={:.17e}, k={:.17e})", p.lambda, p.big_lambda, p.k)
}

/// Random admissible point of a chart in dimension `n`.
pub fn random_point(rng: &mut SuiteRng, kind: SpaceKind, n: usize) -> Point {
    let mut c = random_vector(rng, n, 1.0);
    match kind {
        SpaceKind::HyperbolicHalfSpace => {
            for v in c.iter_mut().take(n - 1) {
                *v *= 2.0;
            }
            c[n - 1] = (rng.random_range(-3.0f64..2.0)).exp();
        }
        SpaceKind::SphereStereographic => {
            let s = rng.random_range(0.1..2.0);
            c.iter_mut().for_each(|v| *v *= s);
        }
        SpaceKind::Euclidean => {}
    }
    Point::new(c).expect("finite sample")
}

/// Christoffel symbols from central differences of the conformal factor.
pub fn christoffel_fd(space: &SpaceForm, x: &Point) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = space.dim();
    let m = geometry::conformal_factor(space, x)?;
    let mut dm = vec![0.0; n];
    // length scale on which m varies
    let scale = match space.kind() {
        SpaceKind::HyperbolicHalfSpace => x.last(),
        _ => (1.0 + x.norm_sq()).sqrt(),
    };
    let step = 1e-4 * scale;
    for (i, d) in dm.iter_mut().enumerate() {
        let mut plus = x.coords().to_vec();
        let mut minus = x.coords().to_vec();
        plus[i] += step;
        minus[i] -= step;
        let fp = geometry::conformal_factor(space, &Point::new(plus)?)?;
        let fm = geometry::conformal_factor(space, &Point::new(minus)?)?;
        *d = (fp - fm) / (2.0 * step);
    }
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (dm[i] * delta(k, j) + dm[j] * delta(i, k) - dm[k] * delta(i, j)) / (2.0 * m))
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Relative discrepancy between the Christoffel symbols and their
/// finite-difference counterpart.
pub fn christoffel_fd_error(space: &SpaceForm, x: &Point) -> Result<f64> {
    let exact = geometry::christoffel(space, x)?;
    let fd = christoffel_fd(space, x)?;
    let n = space.dim();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                diff = diff.max((exact.get(k, i, j) - fd[k][i][j]).abs());
                scale = scale.max(exact.get(k, i, j).abs());
            }
        }
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

fn geometry_suite(cfg: &SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    for (tag, kind, name) in [
        (1, SpaceKind::HyperbolicHalfSpace, "christoffel_fd_hyperbolic"),
        (2, SpaceKind::SphereStereographic, "christoffel_fd_sphere"),
    ] {
        checks.push(run_check(name, tag, cfg, |rng| {
            let n = rng.random_range(2..=5);
            let space = SpaceForm::new(kind, n)?;
            let x = random_point(rng, kind, n);
            let err = christoffel_fd_error(&space, &x)?;
            Ok(verdict(err <= 1e-6, || format!("x={} rel_err={err:.3e}", fmt_vec(x.coords()))))
        }));
    }
    checks.push(run_check("reflection_isometry", 3, cfg, |rng| {
        let n = rng.random_range(2..=5);
        let x = random_point(rng, SpaceKind::HyperbolicHalfSpace, n);
        let y = random_point(rng, SpaceKind::HyperbolicHalfSpace, n);
        let s = rng.random_range(-3.0..3.0);
        let d0 = geometry::hyperbolic_distance(&x, &y)?;
        let d1 = geometry::hyperbolic_distance(&geometry::reflect(s, &x), &geometry::reflect(s, &y))?;
        let err = (d1 - d0).abs();
        Ok(verdict(err <= 1e-12 * d0.max(1.0), || {
            format!("s={s:.17e} x={} y={} diff={err:.3e}", fmt_vec(x.coords()), fmt_vec(y.coords()))
        }))
    }));
    checks.push(run_check("hessian_linearity", 4, cfg, |rng| {
        let kind = if rng.random_bool(0.5) { SpaceKind::HyperbolicHalfSpace } else { SpaceKind::SphereStereographic };
        let n = rng.random_range(2..=5);
        let space = SpaceForm::new(kind, n)?;
        let x = random_point(rng, kind, n);
        let (g1, g2) = (random_vector(rng, n, 1.0), random_vector(rng, n, 1.0));
        let (h1, h2) = (random_sym(rng, n, 1.0), random_sym(rng, n, 1.0));
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let g: Vec<f64> = g1.iter().zip(&g2).map(|(p, q)| a * p + b * q).collect();
        let h = h1.scale(a).add(&h2.scale(b));
        let lhs = geometry::riemannian_hessian(&space, &x, &g, &h)?;
        let rhs = geometry::riemannian_hessian(&space, &x, &g1, &h1)?
            .scale(a)
            .add(&geometry::riemannian_hessian(&space, &x, &g2, &h2)?.scale(b));
        let err = lhs.sub(&rhs).frobenius_norm();
        let symmetric = (0..n).all(|i| (0..n).all(|j| lhs.get(i, j) == lhs.get(j, i)));
        Ok(verdict(symmetric && err <= 1e-10 * (1.0 + rhs.frobenius_norm()), || {
            format!("kind={} x={} err={err:.3e} symmetric={symmetric}", kind.name(), fmt_vec(x.coords()))
        }))
    }));
    checks.push(run_check("conformal_eigenvalues", 5, cfg, |rng| {
        let kind = if rng.random_bool(0.5) { SpaceKind::HyperbolicHalfSpace } else { SpaceKind::SphereStereographic };
        let n = rng.random_range(2..=6);
        let space = SpaceForm::new(kind, n)?;
        let x = random_point(rng, kind, n);
        let m = geometry::conformal_factor(&space, &x)?;
        let mat = random_sym(rng, n, 1.0);
        let mu_delta = mat.eigenvalues().eigenvalues;
        let mu_g = mat.scale(1.0 / m).eigenvalues().eigenvalues;
        let scale = mu_delta.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
        let err = mu_delta.iter().zip(&mu_g).map(|(d, g)| (d - m * g).abs()).fold(0.0, f64::max) / scale;
        Ok(verdict(err <= 1e-12, || {
            format!("kind={} x={} M={} rel_err={err:.3e}", kind.name(), fmt_vec(x.coords()), fmt_mat(&mat))
        }))
    }));
    checks.push(run_check("laplace_beltrami_trace", 6, cfg, |rng| {
        let kind = if rng.random_bool(0.5) { SpaceKind::HyperbolicHalfSpace } else { SpaceKind::SphereStereographic };
        let n = rng.random_range(2..=5);
        let space = SpaceForm::new(kind, n)?;
        let x = random_point(rng, kind, n);
        let g = random_vector(rng, n, 1.0);
        let h = random_sym(rng, n, 1.0);
        let lb = geometry::laplace_beltrami(&space, &x, &g, &h)?;
        let tr = geometry::riemannian_hessian(&space, &x, &g, &h)?.trace() / geometry::conformal_factor(&space, &x)?;
        let err = (lb - tr).abs();
        Ok(verdict(err <= 1e-12 * (1.0 + tr.abs()), || {
            format!("kind={} x={} err={err:.3e}", kind.name(), fmt_vec(x.coords()))
        }))
    }));
    SuiteReport { suite: Suite::Geometry, checks }
}

fn pucci_suite(cfg: &SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    checks.push(run_check("oracle_exactness", 11, cfg, |rng| {
        let n = [2, 3, 4, 6][rng.random_range(0..4)];
        let p = params(rng, cfg, MAX_RATIO);
        let m = random_sym(rng, n, 1.0);
        let seed: u64 = rng.random();
        let exact = pucci::pucci_minus(&m, &p);
        let with = pucci::pucci_oracle(&m, &p, ORACLE_SAMPLES, seed, OracleMode::WithAnalytic)?;
        let random = pucci::pucci_oracle(&m, &p, ORACLE_SAMPLES, seed, OracleMode::RandomOnly)?;
        let tol = 1e-10 * (1.0 + exact.abs());
        Ok(verdict((with - exact).abs() <= tol && random >= exact - tol, || {
            format!(
                "M={} params={} exact={exact:.17e} analytic={with:.17e} random={random:.17e}",
                fmt_mat(&m),
                fmt_params(&p)
            )
        }))
    }));
    checks.push(run_check("duality", 12, cfg, |rng| {
        let n = rng.random_range(1..=6);
        let p = params(rng, cfg, MAX_RATIO);
        let m = random_sym(rng, n, 1.0);
        let plus = pucci::pucci_plus(&m, &p);
        let dual = -pucci::pucci_minus(&m.neg(), &p);
        Ok(verdict((plus - dual).abs() <= 1e-12 * (1.0 + plus.abs()), || {
            format!("M={} params={} plus={plus:.17e} dual={dual:.17e}", fmt_mat(&m), fmt_params(&p))
        }))
    }));
    checks.push(run_check("superadditivity", 13, cfg, |rng| {
        let n = rng.random_range(1..=6);
        let p = params(rng, cfg, MAX_RATIO);
        let (a, b) = (random_sym(rng, n, 1.0), random_sym(rng, n, 1.0));
        let s = a.add(&b);
        let tol = 1e-10 * (1.0 + a.frobenius_norm() + b.frobenius_norm()) * p.big_lambda;
        let minus = pucci::pucci_minus(&s, &p) - pucci::pucci_minus(&a, &p) - pucci::pucci_minus(&b, &p);
        let plus = pucci::pucci_plus(&a, &p) + pucci::pucci_plus(&b, &p) - pucci::pucci_plus(&s, &p);
        Ok(verdict(minus >= -tol && plus >= -tol, || {
            format!("A={} B={} params={} gaps=({minus:.3e}, {plus:.3e})", fmt_mat(&a), fmt_mat(&b), fmt_params(&p))
        }))
    }));
    checks.push(run_check("degenerate_ellipticity", 14, cfg, |rng| {
        let n = rng.random_range(1..=6);
        let p = params(rng, cfg, MAX_RATIO);
        let m = random_sym(rng, n, 1.0);
        let g = sampling::gaussian_matrix(rng, n);
        let e = SymMatrix::symmetrize(&(&g * g.transpose()));
        let gap = pucci::pucci_minus(&m.add(&e), &p) - pucci::pucci_minus(&m, &p);
        let tol = 1e-10 * (1.0 + m.frobenius_norm() + e.frobenius_norm()) * p.big_lambda;
        Ok(verdict(gap >= -tol, || {
            format!("M={} E={} params={} gap={gap:.3e}", fmt_mat(&m), fmt_mat(&e), fmt_params(&p))
        }))
    }));
    checks.push(run_check("sandwich", 15, cfg, |rng| {
        let n = rng.random_range(1..=6);
        let p = params(rng, cfg, MAX_RATIO);
        let (a, b) = (random_sym(rng, n, 1.0), random_sym(rng, n, 1.0));
        let (gp, gq) = (random_vector(rng, n, 1.0), random_vector(rng, n, 1.0));
        let diff = pucci::example_operator(&a, &gp, &p, Extremal::Minus)
            - pucci::example_operator(&b, &gq, &p, Extremal::Minus);
        let dist = gp.iter().zip(&gq).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let amb = a.sub(&b);
        let lo = pucci::pucci_minus(&amb, &p) - p.k * dist;
        let hi = pucci::pucci_plus(&amb, &p) + p.k * dist;
        let tol = 1e-10 * (1.0 + a.frobenius_norm() + b.frobenius_norm() + dist) * (p.big_lambda + p.k);
        Ok(verdict(diff >= lo - tol && diff <= hi + tol, || {
            format!(
                "A={} B={} p={} q={} params={}",
                fmt_mat(&a),
                fmt_mat(&b),
                fmt_vec(&gp),
                fmt_vec(&gq),
                fmt_params(&p)
            )
        }))
    }));
    checks.push(run_check("k_spectrum", 16, cfg, |rng| {
        let n = rng.random_range(2..=6);
        let scale: f64 = rng.random_range(0.01..10.0);
        let g = random_vector(rng, n, scale);
        let numeric = pucci::k_matrix(&g).eigenvalues().eigenvalues;
        let closed = pucci::k_spectrum_closed_form(&g)?.eigenvalues;
        let err = numeric.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        Ok(verdict(err <= 1e-10 * scale, || format!("grad={} err={err:.3e}", fmt_vec(&g))))
    }));
    checks.push(run_check("k_bound", 17, cfg, |rng| {
        let n = rng.random_range(2..=6);
        let p = params(rng, cfg, MAX_RATIO);
        let g = random_vector(rng, n, 1.0);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let val = pucci::pucci_minus(&pucci::k_matrix(&g), &p);
        let bound = -p.big_lambda * (n as f64 - 1.0) * norm;
        Ok(verdict(val >= bound - 1e-12 * (1.0 + bound.abs()), || {
            format!("grad={} params={} value={val:.17e} bound={bound:.17e}", fmt_vec(&g), fmt_params(&p))
        }))
    }));
    checks.push(run_check("det_pencil", 18, cfg, |rng| {
        let n = rng.random_range(2..=8);
        let delta = rng.random_range(-3.0..3.0);
        let beta = rng.random_range(-3.0..3.0);
        let a = random_vector(rng, n - 1, 1.0);
        let closed = pucci::det_pencil(delta, beta, &a)?;
        let direct = determinant(pucci::arrowhead_matrix(delta, beta, &a).as_matrix());
        let scale = closed.abs().max(direct.abs()).max(1e-300);
        let rel = (closed - direct).abs() / scale;
        // near-singular instances are judged on the absolute scale of the entries
        let entry = delta.abs().max(beta.abs()).max(a.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1.0);
        let ok = rel <= 1e-10 || (closed - direct).abs() <= 1e-10 * entry.powi(n as i32);
        Ok(verdict(ok, || {
            format!("delta={delta:.17e} beta={beta:.17e} a={} closed={closed:.17e} direct={direct:.17e}", fmt_vec(&a))
        }))
    }));
    SuiteReport { suite: Suite::Pucci, checks }
}

/// Random Lemma 2.1 instance: hyperbolic point, gradient, Hessian.
fn lemma_instance(rng: &mut SuiteRng) -> (Point, Vec<f64>, SymMatrix) {
    let n = rng.random_range(2..=6);
    let x = random_point(rng, SpaceKind::HyperbolicHalfSpace, n);
    let (gs, hs): (f64, f64) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
    let g = random_vector(rng, n, gs);
    let h = random_sym(rng, n, hs);
    (x, g, h)
}

fn lemma21_suite(cfg: &SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    for (tag, variant, name) in [(21, Extremal::Minus, "lemma21_minus"), (22, Extremal::Plus, "lemma21_plus")] {
        checks.push(run_check(name, tag, cfg, |rng| {
            let p = params(rng, cfg, MAX_RATIO);
            let (x, g, h) = lemma_instance(rng);
            let sides = pucci::lemma21_sides(&x, &g, &h, &p, variant)?;
            // minus: lhs ≥ rhs; plus: lhs ≤ rhs
            let margin = variant.sign() * -sides.gap();
            let tol = 1e-10 * (1.0 + sides.lhs.abs() + sides.rhs.abs());
            Ok(verdict(margin >= -tol, || {
                format!(
                    "x={} grad={} hess={} params={} lhs={:.17e} rhs={:.17e}",
                    fmt_vec(x.coords()),
                    fmt_vec(&g),
                    fmt_mat(&h),
                    fmt_params(&p),
                    sides.lhs,
                    sides.rhs
                )
            }))
        }));
    }
    SuiteReport { suite: Suite::Lemma21, checks }
}

fn sphere64_suite(cfg: &SuiteConfig) -> SuiteReport {
    let check = run_check("sphere_inequality", 31, cfg, |rng| {
        let p = params(rng, cfg, SPHERE_MAX_RATIO);
        let n = rng.random_range(2..=6);
        let x = random_point(rng, SpaceKind::SphereStereographic, n);
        let (gs, hs): (f64, f64) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
        let g = random_vector(rng, n, gs);
        let h = random_sym(rng, n, hs);
        let sides = pucci::sphere_inequality_sides(&x, &g, &h, &p)?;
        let tol = 1e-10 * (1.0 + sides.lhs.abs() + sides.rhs.abs());
        Ok(verdict(sides.gap() >= -tol, || {
            format!(
                "x={} grad={} hess={} params={} lhs={:.17e} rhs={:.17e}",
                fmt_vec(x.coords()),
                fmt_vec(&g),
                fmt_mat(&h),
                fmt_params(&p),
                sides.lhs,
                sides.rhs
            )
        }))
    });
    SuiteReport { suite: Suite::Sphere64, checks: vec![check] }
}
