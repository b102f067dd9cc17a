use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serrin_core::cone::{self, ConeProblem};
use serrin_core::geometry::{SpaceForm, SpaceKind};
use serrin_core::grid::{
    boundary_gradient_profile, howard_solve_report, profile_spread, BoundaryMode, GridDomain, GridField, Shape,
    SolverConfig, DEFAULT_WIDTH,
};
use serrin_core::io::{fmt9, write_csv, write_report};
use serrin_core::movingplane::{find_critical_s_in, sweep_both, MovingPlaneReport, SweepDirection};
use serrin_core::pucci::{Extremal, PucciParams};
use serrin_core::radial::{self, AffineSource, RadialProblem};
use serrin_core::suites::{run_suite, Suite, SuiteConfig, DEFAULT_TRIALS};

use crate::config::{integer, number, number_list, pair, string, Resolver};
use crate::{CliError, ConeArgs, MovingPlaneArgs, ParamArgs, RadialArgs, Solve2dArgs, SourceArgs, VerifyArgs};

type CliResult<T> = Result<T, CliError>;

const DEFAULT_CONE_TOL: f64 = 1e-10;
const DEFAULT_RADIAL_TOL: f64 = 1e-10;

fn required<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::validation(format!("missing required parameter `{key}`")))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> serrin_core::Result<()>) -> CliResult<()> {
    let io_err = |e: serrin_core::Error| CliError::io(e.to_string());
    match path {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w).map_err(io_err)?;
            w.flush().map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(io_err)?;
            lock.flush().map_err(|e| CliError::io(e.to_string()))
        }
    }
}

fn space_kind(s: &str) -> Result<SpaceKind, String> {
    SpaceKind::parse(s).ok_or_else(|| format!("unknown space `{s}` (euclidean, hyperbolic, sphere)"))
}

fn extremal(s: &str) -> Result<Extremal, String> {
    Extremal::parse(s).ok_or_else(|| format!("unknown sign `{s}` (minus, plus)"))
}

fn flag<T>(v: Option<Result<T, String>>) -> CliResult<Option<T>> {
    v.transpose().map_err(CliError::validation)
}

/// `None` when none of λ, Λ, k is given; otherwise λ defaults to 1, Λ to λ
/// and k to 0.
fn params_opt(args: ParamArgs, cfg: &mut Resolver) -> CliResult<Option<PucciParams>> {
    let lambda = cfg.take("lambda", args.lambda, number)?;
    let big = cfg.take("Lambda", args.big_lambda, number)?;
    let k = cfg.take("k", args.k, number)?;
    if lambda.is_none() && big.is_none() && k.is_none() {
        return Ok(None);
    }
    let lambda = lambda.unwrap_or(1.0);
    Ok(Some(PucciParams::new(lambda, big.unwrap_or(lambda), k.unwrap_or(0.0))?))
}

fn params(args: ParamArgs, cfg: &mut Resolver) -> CliResult<PucciParams> {
    Ok(params_opt(args, cfg)?.unwrap_or_else(PucciParams::laplacian))
}

fn source(args: SourceArgs, cfg: &mut Resolver) -> CliResult<(AffineSource, Extremal)> {
    let c = cfg.take("c", args.c, number)?.unwrap_or(1.0);
    let b = cfg.take("b", args.b, number)?.unwrap_or(0.0);
    let sign = flag(args.sign.as_deref().map(extremal))?;
    let sign = cfg.take("sign", sign, extremal)?.unwrap_or(Extremal::Minus);
    Ok((AffineSource::new(c, b)?, sign))
}

fn out_path(cfg: &mut Resolver, flag: Option<PathBuf>) -> CliResult<Option<PathBuf>> {
    cfg.take("out", flag, |s| Ok(PathBuf::from(s.trim())))
}

pub fn verify(a: VerifyArgs) -> CliResult<()> {
    let mut cfg = Resolver::load(a.common.config.as_deref())?;
    let suite_name = required(cfg.take("suite", a.suite, string)?, "suite")?;
    let suite = Suite::parse(&suite_name).ok_or_else(|| {
        CliError::validation(format!("unknown suite `{suite_name}` (geometry, pucci, lemma21, sphere64, all)"))
    })?;
    let seed = required(cfg.take("seed", a.seed, integer::<u64>)?, "seed")?;
    let trials = cfg.take("trials", a.trials, integer::<usize>)?.unwrap_or(DEFAULT_TRIALS);
    let pinned = params_opt(a.params, &mut cfg)?;
    let out = out_path(&mut cfg, a.common.out)?;
    cfg.finish()?;
    if trials == 0 {
        return Err(CliError::validation("trials must be at least 1"));
    }

    let suite_cfg = SuiteConfig { trials, seed, params: pinned };
    let reports = run_suite(suite, &suite_cfg)?;
    let mut lines = Vec::new();
    for r in &reports {
        lines.push(format!("[{}]", r.suite.name()));
        lines.extend(r.checks.iter().map(ToString::to_string));
    }
    let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
    let failed: usize = reports.iter().flat_map(|r| &r.checks).filter(|c| !c.passed()).count();
    let ok = failed == 0;
    lines.push(format!(
        "{} {checks} checks, {failed} failed (seed {seed}, {trials} trials)",
        if ok { "PASS" } else { "FAIL" }
    ));
    emit(out.as_deref(), |w| {
        for l in &lines {
            writeln!(w, "{l}").map_err(|e| serrin_core::Error::Argument(e.to_string()))?;
        }
        Ok(())
    })?;
    if ok {
        Ok(())
    } else {
        Err(CliError::numerical(format!("{failed} check(s) failed")))
    }
}

pub fn cone_beta(a: ConeArgs) -> CliResult<()> {
    let mut cfg = Resolver::load(a.common.config.as_deref())?;
    let theta0 = cfg.take("theta0", a.theta0, number)?.unwrap_or(std::f64::consts::FRAC_PI_2);
    let lambda = cfg.take("lambda", a.lambda, number)?.unwrap_or(1.0);
    let big = cfg.take("Lambda", a.big_lambda, number)?;
    let tol = cfg.take("tol", a.tol, number)?.unwrap_or(DEFAULT_CONE_TOL);
    let sweep = flag(a.sweep.as_deref().map(number_list))?;
    let sweep = cfg.take("sweep", sweep, number_list)?;
    let out = out_path(&mut cfg, a.common.out)?;
    cfg.finish()?;
    if !(tol > 0.0) {
        return Err(CliError::validation(format!("tol must be positive, got {tol}")));
    }

    let rows: Vec<(f64, cone::ConeExponentResult)> = match sweep {
        Some(eps) => {
            if big.is_some() {
                return Err(CliError::validation(
                    "--Lambda conflicts with --sweep (the sweep sets Lambda = lambda(1 + eps))",
                ));
            }
            for &e in &eps {
                ConeProblem::new(theta0, PucciParams::new(lambda, lambda * (1.0 + e), 0.0)?)?;
            }
            cone::sweep_epsilon(theta0, lambda, &eps, tol)
                .into_iter()
                .map(|(e, r)| r.map(|r| (e, r)))
                .collect::<serrin_core::Result<_>>()?
        }
        None => {
            let p = PucciParams::new(lambda, big.unwrap_or(lambda), 0.0)?;
            let problem = ConeProblem::new(theta0, p)?;
            vec![(p.big_lambda / p.lambda - 1.0, cone::solve_beta(&problem, tol)?)]
        }
    };
    emit(out.as_deref(), |w| {
        write_csv(w, &["epsilon", "beta", "residual"], rows.iter().map(|(e, r)| vec![*e, r.beta, r.residual_sup]))
    })
}

pub fn radial(a: RadialArgs) -> CliResult<()> {
    let mut cfg = Resolver::load(a.common.config.as_deref())?;
    let kind = flag(a.space.as_deref().map(space_kind))?;
    let kind = cfg.take("space", kind, space_kind)?.unwrap_or(SpaceKind::Euclidean);
    let n = cfg.take("N", a.n, integer::<usize>)?.unwrap_or(2);
    let radius = cfg.take("R", a.radius, number)?;
    let radii = flag(a.radii.as_deref().map(number_list))?;
    let radii = cfg.take("radii", radii, number_list)?;
    let p = params(a.params, &mut cfg)?;
    let (src, sign) = source(a.source, &mut cfg)?;
    let tol = cfg.take("tol", a.tol, number)?.unwrap_or(DEFAULT_RADIAL_TOL);
    let out = out_path(&mut cfg, a.common.out)?;
    cfg.finish()?;
    let space = SpaceForm::new(kind, n)?;
    if !(tol > 0.0) {
        return Err(CliError::validation(format!("tol must be positive, got {tol}")));
    }

    match (radius, radii) {
        (Some(_), Some(_)) => Err(CliError::validation("give either --R or --radii, not both")),
        (None, None) => Err(CliError::validation("missing required parameter `R` (or `radii`)")),
        (Some(r), None) => {
            let problem = RadialProblem::new(space, r, p, sign, src)?;
            let sol = radial::shoot(&problem, tol)?;
            emit(out.as_deref(), |w| {
                let rows = (0..sol.r_nodes.len()).map(|i| vec![sol.r_nodes[i], sol.u_values[i], sol.du_values[i]]);
                write_csv(w, &["r", "u", "du"], rows)
            })?;
            println!("c0 = {}", fmt9(sol.c0));
            Ok(())
        }
        (None, Some(list)) => {
            for &r in &list {
                RadialProblem::new(space, r, p, sign, src)?;
            }
            let map = radial::serrin_map(space, p, src, sign, &list, tol);
            let rows: Vec<Vec<f64>> =
                map.into_iter().map(|(r, c0)| c0.map(|c| vec![r, c])).collect::<serrin_core::Result<_>>()?;
            emit(out.as_deref(), |w| write_csv(w, &["R", "c0"], rows))
        }
    }
}

pub fn solve2d(a: Solve2dArgs) -> CliResult<()> {
    let mut cfg = Resolver::load(a.common.config.as_deref())?;
    let shape_kind = required(cfg.take("domain", a.domain, string)?, "domain")?;
    let kind = flag(a.space.as_deref().map(space_kind))?;
    let kind = cfg.take("space", kind, space_kind)?.unwrap_or(SpaceKind::Euclidean);
    let center = required(cfg.take("center", a.center, pair)?, "center")?;
    let radius = cfg.take("R", a.radius, number)?;
    let semi_axes = cfg.take("semi-axes", a.semi_axes, pair)?;
    let h = cfg.take("h", a.h, number)?.unwrap_or(1.0 / 64.0);
    let width = cfg.take("width", a.width, integer::<usize>)?.unwrap_or(DEFAULT_WIDTH);
    let boundary = cfg.take("boundary", a.boundary, string)?.unwrap_or_else(|| "cut-cell".into());
    let p = params(a.params, &mut cfg)?;
    let (src, sign) = source(a.source, &mut cfg)?;
    let defaults = SolverConfig::default();
    let tol = cfg.take("tol", a.tol, number)?.unwrap_or(defaults.tol);
    let max_iters = cfg.take("max-iters", a.max_iters, integer::<usize>)?.unwrap_or(defaults.max_policy_iters);
    let path_of = |s: &str| Ok(PathBuf::from(s.trim()));
    let profile_out = cfg.take("profile-out", a.profile_out, path_of)?;
    let domain_out = cfg.take("domain-out", a.domain_out, path_of)?;
    let out = required(out_path(&mut cfg, a.common.out)?, "out")?;
    cfg.finish()?;

    let shape = match (shape_kind.as_str(), radius, semi_axes) {
        ("ball", Some(r), None) => Shape::Ball { center, radius: r },
        ("ellipse", None, Some(ax)) => Shape::Ellipse { center, semi_axes: ax },
        ("ball", _, _) => return Err(CliError::validation("a ball needs --R and no --semi-axes")),
        ("ellipse", _, _) => return Err(CliError::validation("an ellipse needs --semi-axes and no --R")),
        (other, _, _) => return Err(CliError::validation(format!("unknown domain `{other}` (ball, ellipse)"))),
    };
    let mode = match boundary.as_str() {
        "cut-cell" => BoundaryMode::CutCell,
        "snap" => BoundaryMode::Snap,
        other => return Err(CliError::validation(format!("unknown boundary mode `{other}` (cut-cell, snap)"))),
    };
    let solver = SolverConfig { stencil_width: width, tol, max_policy_iters: max_iters, ..defaults };
    solver.validate()?;
    let dom = GridDomain::from_shape(SpaceForm::new(kind, 2)?, shape, h, width, mode)?;

    let sol = howard_solve_report(&dom, &p, src, sign, &solver)?;
    if let Some(path) = &domain_out {
        emit(Some(path), |w| dom.write_csv(w))?;
    }
    if !sol.converged {
        let warn = format!(
            "# WARN: policy iteration did not converge (residual {}, {} iterations); partial field",
            fmt9(sol.residual_sup),
            sol.policy_iterations
        );
        emit(Some(&out), |w| {
            writeln!(w, "{warn}").map_err(|e| serrin_core::Error::Argument(e.to_string()))?;
            sol.field.write_csv(&dom, w)
        })?;
        return Err(
            serrin_core::Error::Convergence { residual: sol.residual_sup, iterations: sol.policy_iterations }.into()
        );
    }
    emit(Some(&out), |w| sol.field.write_csv(&dom, w))?;

    let profile = boundary_gradient_profile(&sol.field, &dom)?;
    if let Some(path) = &profile_out {
        emit(Some(path), |w| {
            write_csv(w, &["x1", "x2", "grad"], profile.iter().map(|g| vec![g.point[0], g.point[1], g.value]))
        })?;
    }
    let mean = profile.iter().map(|g| g.value).sum::<f64>() / profile.len() as f64;
    let summary = vec![
        ("converged".to_string(), sol.converged.to_string()),
        ("residual_sup".to_string(), fmt9(sol.residual_sup)),
        ("policy_iterations".to_string(), sol.policy_iterations.to_string()),
        ("linear_iterations".to_string(), sol.linear_iterations.to_string()),
        ("interior_nodes".to_string(), dom.interior_count().to_string()),
        ("u_sup".to_string(), fmt9(sol.field.sup_interior(&dom))),
        ("gradient_mean".to_string(), fmt9(mean)),
        ("gradient_spread".to_string(), fmt9(profile_spread(&profile))),
    ];
    emit(None, |w| write_report(w, &summary))
}

fn direction(s: &str) -> Result<Option<SweepDirection>, String> {
    match s.trim() {
        "plus" | "+e1" => Ok(Some(SweepDirection::PlusE1)),
        "minus" | "-e1" => Ok(Some(SweepDirection::MinusE1)),
        "both" => Ok(None),
        other => Err(format!("unknown direction `{other}` (plus, minus, both)")),
    }
}

fn prefixed(prefix: &str, r: &MovingPlaneReport) -> Vec<(String, String)> {
    r.to_key_values().into_iter().map(|(k, v)| (format!("{prefix}.{k}"), v)).collect()
}

pub fn moving_plane(a: MovingPlaneArgs) -> CliResult<()> {
    let mut cfg = Resolver::load(a.common.config.as_deref())?;
    let path_of = |s: &str| Ok(PathBuf::from(s.trim()));
    let field_path = required(cfg.take("field", a.field, path_of)?, "field")?;
    let domain_path = required(cfg.take("domain", a.domain, path_of)?, "domain")?;
    let kind = flag(a.space.as_deref().map(space_kind))?;
    let kind = cfg.take("space", kind, space_kind)?.unwrap_or(SpaceKind::Euclidean);
    let tol = cfg.take("tol", a.tol, number)?;
    let dir = flag(a.direction.as_deref().map(direction))?;
    let dir = cfg.take("direction", dir, direction)?.unwrap_or(None);
    let out = out_path(&mut cfg, a.common.out)?;
    cfg.finish()?;

    let in_file = |path: &Path, e: serrin_core::Error| -> CliError {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    };
    let dom =
        GridDomain::read_csv(open(&domain_path)?, SpaceForm::new(kind, 2)?).map_err(|e| in_file(&domain_path, e))?;
    let u = GridField::read_csv(open(&field_path)?, &dom).map_err(|e| in_file(&field_path, e))?;
    let tol = tol.unwrap_or_else(|| (5e-3 * u.sup_interior(&dom)).max(10.0 * dom.h() * dom.h()));

    let entries = match dir {
        Some(d) => find_critical_s_in(&u, &dom, tol, d, None)?.to_key_values(),
        None => {
            let [plus, minus] = sweep_both(&u, &dom, tol)?;
            let mut kv = vec![("symmetric".to_string(), (plus.symmetric && minus.symmetric).to_string())];
            kv.extend(prefixed("plus_e1", &plus));
            kv.extend(prefixed("minus_e1", &minus));
            kv
        }
    };
    emit(out.as_deref(), |w| write_report(w, &entries))
}
