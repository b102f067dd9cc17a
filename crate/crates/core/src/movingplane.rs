//! Discrete moving-plane harness on solved grid fields.
//!
//! The plane `T_s = {x₁ = s}` is totally geodesic in both planar charts, and
//! the reflection `x₁ ↦ 2s − x₁` is an isometry that maps grid rows to
//! themselves. Starting at `d = max x₁` over the interior nodes, `s` is
//! lowered in steps of `h/2` (so reflections of nodes land on nodes) until
//! either the reflected cap leaves the domain (tangency) or the boundary
//! normal where `T_s` meets `∂Ω` stops pointing in the sweep direction
//! (corner); the event is then located by bisection.
//!
//! Boundary crossings and normals come from the domain's analytic level set
//! when it has one. Domains known only by their mask (for example read from
//! CSV) use a Gaussian-smoothed interior indicator (`σ = 2h`) instead: its 0.5
//! level set approximates `∂Ω` and its gradient gives the outward normal.
//! A staircase cannot resolve the tangent of a nearly flat boundary stretch,
//! so mask-only sweeps may stop up to a few `h` early there.

use std::io::Write;

use crate::cone::growth_exponent_fit;
use crate::error::{Error, Result};
use crate::geometry::SpaceForm;
use crate::grid::{GridDomain, GridField, NodeKind, Shape};
use crate::io::{fmt9, write_csv, write_report};

/// Tie tolerance for the `⟨ν, e₁⟩ > 0` test.
pub const NORMAL_TIE_TOL: f64 = 1e-6;
const SMOOTHING_WIDTHS: f64 = 2.0;
const REFINE_BISECTIONS: usize = 40;
const SNAP_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Situation {
    /// The reflected cap touches the boundary from inside.
    Tangency,
    /// `T_s` meets `∂Ω` orthogonally.
    Corner,
    /// The sweep reached its floor without an event.
    Exhausted,
}

impl Situation {
    pub fn name(self) -> &'static str {
        match self {
            Situation::Tangency => "Tangency",
            Situation::Corner => "Corner",
            Situation::Exhausted => "Exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    PlusE1,
    MinusE1,
}

impl SweepDirection {
    pub fn vector(self) -> [f64; 2] {
        match self {
            SweepDirection::PlusE1 => [1.0, 0.0],
            SweepDirection::MinusE1 => [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingPlaneReport {
    pub direction: SweepDirection,
    pub s_star: f64,
    pub situation: Situation,
    pub w_sup_at_star: f64,
    pub tol: f64,
    pub symmetric: bool,
    pub corner_point: Option<[f64; 2]>,
    /// Nodes of `Σ_{s*}` whose reflection left the interior (excluded from `w_sup`).
    pub flagged_nodes: usize,
}

impl MovingPlaneReport {
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let d = self.direction.vector();
        let mut kv = vec![
            ("direction".to_string(), format!("{},{}", fmt9(d[0]), fmt9(d[1]))),
            ("s_star".to_string(), fmt9(self.s_star)),
            ("situation".to_string(), self.situation.name().to_string()),
            ("w_sup_at_star".to_string(), fmt9(self.w_sup_at_star)),
            ("tol".to_string(), fmt9(self.tol)),
            ("symmetric".to_string(), self.symmetric.to_string()),
        ];
        let corner = match self.corner_point {
            Some(q) => format!("{},{}", fmt9(q[0]), fmt9(q[1])),
            None => "none".to_string(),
        };
        kv.push(("corner_point".to_string(), corner));
        kv.push(("flagged_nodes".to_string(), self.flagged_nodes.to_string()));
        kv
    }

    pub fn write<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        write_report(out, &self.to_key_values())
    }
}

/// Values on the cap `Σ_s = {x₁ > s} ∩ interior`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapField {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
    /// True where the reflected point is not surrounded by interior nodes.
    pub flagged: Vec<bool>,
}

impl CapField {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sup of `|value|` over unflagged nodes.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().zip(&self.flagged).filter(|(_, f)| !**f).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }
}

fn check_aligned(u: &GridField, dom: &GridDomain) -> Result<()> {
    if u.is_aligned(dom) {
        Ok(())
    } else {
        Err(Error::Argument("field is not aligned with the domain".into()))
    }
}

/// Linear interpolation of `u` along row `j` at abscissa `x1`; the flag is
/// set when a contributing node is not interior or the point is off-grid.
fn row_sample(u: &GridField, dom: &GridDomain, j: usize, x1: f64) -> (f64, bool) {
    let h = dom.h();
    let pos = (x1 - dom.coord_x1(0)) / h;
    let nearest = pos.round();
    if (pos - nearest).abs() < 1e-9 {
        if nearest < 0.0 || nearest >= dom.nx() as f64 {
            return (0.0, true);
        }
        let id = dom.id(nearest as usize, j);
        return (u.get(id), dom.kind(id) != NodeKind::Interior);
    }
    let i0 = pos.floor();
    if i0 < 0.0 || i0 + 1.0 >= dom.nx() as f64 {
        return (0.0, true);
    }
    let t = pos - i0;
    let (a, b) = (dom.id(i0 as usize, j), dom.id(i0 as usize + 1, j));
    let flag = dom.kind(a) != NodeKind::Interior || dom.kind(b) != NodeKind::Interior;
    ((1.0 - t) * u.get(a) + t * u.get(b), flag)
}

/// `u(R_s x)` for `x ∈ Σ_s`.
pub fn reflected_field(u: &GridField, dom: &GridDomain, s: f64) -> Result<CapField> {
    check_aligned(u, dom)?;
    let (lo, hi) = x1_extent(dom);
    if !(s >= lo - dom.h() && s <= hi + dom.h()) {
        return Err(Error::Argument(format!("plane position {s} outside the domain's x1 extent [{lo}, {hi}]")));
    }
    let mut cap = CapField { nodes: Vec::new(), values: Vec::new(), flagged: Vec::new() };
    for &id in dom.interior_nodes() {
        let x = dom.coords(id);
        if x[0] > s {
            let (_, j) = dom.ij(id);
            let (v, flag) = row_sample(u, dom, j, 2.0 * s - x[0]);
            cap.nodes.push(id);
            cap.values.push(v);
            cap.flagged.push(flag);
        }
    }
    Ok(cap)
}

/// `w_s(x) = u(R_s x) − u(x)` on `Σ_s`.
pub fn w_field(u: &GridField, dom: &GridDomain, s: f64) -> Result<CapField> {
    let mut cap = reflected_field(u, dom, s)?;
    for (v, &id) in cap.values.iter_mut().zip(&cap.nodes) {
        *v -= u.get(id);
    }
    Ok(cap)
}

fn x1_extent(dom: &GridDomain) -> (f64, f64) {
    dom.interior_nodes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &id| {
        let x = dom.coords(id)[0];
        (lo.min(x), hi.max(x))
    })
}

/// Gaussian-smoothed interior indicator with bilinear evaluation.
struct SmoothedMask {
    nx: usize,
    ny: usize,
    x0: [f64; 2],
    h: f64,
    values: Vec<f64>,
}

impl SmoothedMask {
    fn new(dom: &GridDomain) -> Self {
        let (nx, ny) = (dom.nx(), dom.ny());
        let radius = (4.0 * SMOOTHING_WIDTHS).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k as f64).powi(2) / (2.0 * SMOOTHING_WIDTHS * SMOOTHING_WIDTHS)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
        let ind: Vec<f64> = (0..nx * ny).map(|id| if dom.is_interior(id) { 1.0 } else { 0.0 }).collect();
        let mut tmp = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let ii = i as isize + k as isize - radius;
                    if ii >= 0 && (ii as usize) < nx {
                        s += w * ind[j * nx + ii as usize];
                    }
                }
                tmp[j * nx + i] = s;
            }
        }
        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let jj = j as isize + k as isize - radius;
                    if jj >= 0 && (jj as usize) < ny {
                        s += w * tmp[jj as usize * nx + i];
                    }
                }
                values[j * nx + i] = s;
            }
        }
        Self { nx, ny, x0: dom.origin(), h: dom.h(), values }
    }

    fn node(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        self.values[j * self.nx + i]
    }

    fn bilinear(&self, x: [f64; 2], f: impl Fn(isize, isize) -> f64) -> f64 {
        let px = (x[0] - self.x0[0]) / self.h;
        let py = (x[1] - self.x0[1]) / self.h;
        let (i0, j0) = (px.floor(), py.floor());
        let (tx, ty) = (px - i0, py - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        (1.0 - tx) * (1.0 - ty) * f(i0, j0)
            + tx * (1.0 - ty) * f(i0 + 1, j0)
            + (1.0 - tx) * ty * f(i0, j0 + 1)
            + tx * ty * f(i0 + 1, j0 + 1)
    }

    fn value(&self, x: [f64; 2]) -> f64 {
        self.bilinear(x, |i, j| self.node(i, j))
    }

    /// Outward unit normal `−∇S/|∇S|`.
    fn normal(&self, x: [f64; 2]) -> [f64; 2] {
        let gx = self.bilinear(x, |i, j| (self.node(i + 1, j) - self.node(i - 1, j)) / (2.0 * self.h));
        let gy = self.bilinear(x, |i, j| (self.node(i, j + 1) - self.node(i, j - 1)) / (2.0 * self.h));
        let n = gx.hypot(gy);
        if n > 0.0 {
            [-gx / n, -gy / n]
        } else {
            [0.0, 0.0]
        }
    }

    /// Points on the line `x₁ = s` where the smoothed indicator crosses 1/2.
    fn crossings(&self, s: f64) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        let f = |y: f64| self.value([s, y]) - 0.5;
        let mut prev_y = self.x0[1];
        let mut prev = f(prev_y);
        for j in 1..self.ny {
            let y = self.x0[1] + j as f64 * self.h;
            let cur = f(y);
            if (prev < 0.0) != (cur < 0.0) {
                let (mut a, mut b, mut fa) = (prev_y, y, prev);
                for _ in 0..50 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if (fm < 0.0) == (fa < 0.0) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                out.push([s, 0.5 * (a + b)]);
            }
            prev_y = y;
            prev = cur;
        }
        out
    }
}

/// Boundary geometry seen by the sweep: the analytic level set when the
/// domain has one, otherwise the smoothed mask.
enum Boundary {
    Level { shape: Shape, chart: SpaceForm, x0: [f64; 2], h: f64, ny: usize },
    Mask(SmoothedMask),
}

impl Boundary {
    fn new(dom: &GridDomain) -> Self {
        match dom.shape() {
            Some(shape) => {
                Boundary::Level { shape: *shape, chart: *dom.chart(), x0: dom.origin(), h: dom.h(), ny: dom.ny() }
            }
            None => Boundary::Mask(SmoothedMask::new(dom)),
        }
    }

    fn inside(&self, x: [f64; 2]) -> bool {
        match self {
            Boundary::Level { shape, chart, .. } => shape.level(chart, x) < 0.0,
            Boundary::Mask(m) => m.value(x) > 0.5,
        }
    }

    fn normal(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            Boundary::Level { shape, chart, h, .. } => {
                let e = 1e-6 * h;
                let f = |p: [f64; 2]| shape.level(chart, p);
                let gx = (f([x[0] + e, x[1]]) - f([x[0] - e, x[1]])) / (2.0 * e);
                let gy = (f([x[0], x[1] + e]) - f([x[0], x[1] - e])) / (2.0 * e);
                let n = gx.hypot(gy);
                if n > 0.0 && n.is_finite() {
                    [gx / n, gy / n]
                } else {
                    [0.0, 0.0]
                }
            }
            Boundary::Mask(m) => m.normal(x),
        }
    }

    fn crossings(&self, s: f64) -> Vec<[f64; 2]> {
        match self {
            Boundary::Level { shape, chart, x0, h, ny } => {
                let f = |y: f64| shape.level(chart, [s, y]);
                let mut out = Vec::new();
                let mut prev_y = x0[1];
                let mut prev = f(prev_y);
                for j in 1..*ny {
                    let y = x0[1] + j as f64 * h;
                    let cur = f(y);
                    if (prev < 0.0) != (cur < 0.0) {
                        let (mut a, mut b, inside_a) = (prev_y, y, prev < 0.0);
                        for _ in 0..60 {
                            let m = 0.5 * (a + b);
                            if (f(m) < 0.0) == inside_a {
                                a = m;
                            } else {
                                b = m;
                            }
                        }
                        out.push([s, 0.5 * (a + b)]);
                    }
                    prev_y = y;
                    prev = cur;
                }
                out
            }
            Boundary::Mask(m) => m.crossings(s),
        }
    }
}

enum Event {
    Tangency,
    Corner([f64; 2]),
}

/// First violated condition at plane position `s`, if any.
fn check_position(dom: &GridDomain, mask: &Boundary, s: f64) -> Option<Event> {
    let probe = GridField::zeros(dom);
    for &id in dom.interior_nodes() {
        let x = dom.coords(id);
        if x[0] > s {
            let (_, j) = dom.ij(id);
            if row_sample(&probe, dom, j, 2.0 * s - x[0]).1 {
                return Some(Event::Tangency);
            }
        }
    }
    for q in mask.crossings(s) {
        if mask.normal(q)[0] <= NORMAL_TIE_TOL {
            return Some(Event::Corner(q));
        }
    }
    None
}

/// Mirror image `x₁ ↦ −x₁` of a domain and field.
fn mirror(dom: &GridDomain, u: &GridField) -> Result<(GridDomain, GridField)> {
    let m = dom.mirror_x1();
    let (nx, ny) = (dom.nx(), dom.ny());
    let mut values = Vec::with_capacity(dom.len());
    for j in 0..ny {
        for i in 0..nx {
            values.push(u.get(dom.id(nx - 1 - i, j)));
        }
    }
    let f = GridField::from_values(&m, values)?;
    Ok((m, f))
}

/// Sweep in direction `+e₁` from `d` down to the domain's minimum `x₁`.
pub fn find_critical_s(u: &GridField, dom: &GridDomain, tol: f64) -> Result<MovingPlaneReport> {
    find_critical_s_in(u, dom, tol, SweepDirection::PlusE1, None)
}

/// Sweep in `direction`; `floor` (in the sweep's own coordinate, i.e.
/// `direction·x`) stops the sweep early and defaults to the minimum over
/// the interior.
pub fn find_critical_s_in(
    u: &GridField,
    dom: &GridDomain,
    tol: f64,
    direction: SweepDirection,
    floor: Option<f64>,
) -> Result<MovingPlaneReport> {
    check_aligned(u, dom)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    if dom.interior_count() == 0 {
        return Err(Error::DegenerateDomain("no interior nodes".into()));
    }
    let mirrored;
    let (dom, u) = match direction {
        SweepDirection::PlusE1 => (dom, u),
        SweepDirection::MinusE1 => {
            mirrored = mirror(dom, u)?;
            (&mirrored.0, &mirrored.1)
        }
    };
    let mut report = sweep(u, dom, tol, floor)?;
    report.direction = direction;
    if direction == SweepDirection::MinusE1 {
        report.s_star = -report.s_star;
        report.corner_point = report.corner_point.map(|q| [-q[0], q[1]]);
    }
    Ok(report)
}

fn sweep(u: &GridField, dom: &GridDomain, tol: f64, floor: Option<f64>) -> Result<MovingPlaneReport> {
    let (lo, d) = x1_extent(dom);
    let floor = floor.unwrap_or(lo);
    let mask = Boundary::new(dom);
    let step = 0.5 * dom.h();

    let mut prev_ok = d;
    let mut k = 0usize;
    let event = loop {
        let s = d - k as f64 * step;
        if s < floor {
            break None;
        }
        if let Some(ev) = check_position(dom, &mask, s) {
            break Some((s, ev));
        }
        prev_ok = s;
        k += 1;
    };

    let (s_star, situation, corner_point) = match event {
        None => (floor.min(d), Situation::Exhausted, None),
        Some((s_bad, ev)) if s_bad == d => match ev {
            Event::Tangency => (d, Situation::Tangency, None),
            Event::Corner(q) => (d, Situation::Corner, Some(q)),
        },
        Some((s_bad, first)) => {
            // keep `good` valid and `bad` violating
            let (mut good, mut bad, mut ev) = (prev_ok, s_bad, first);
            for _ in 0..REFINE_BISECTIONS {
                let mid = 0.5 * (good + bad);
                match check_position(dom, &mask, mid) {
                    Some(e) => {
                        bad = mid;
                        ev = e;
                    }
                    None => good = mid,
                }
            }
            // the staircase mask cannot place the event closer than this, so such
            // offsets are lattice events
            let k = ((d - bad) / step).round();
            let lattice = d - k * step;
            let s = if (bad - lattice).abs() <= SNAP_FRACTION * dom.h() { lattice } else { bad };
            match ev {
                Event::Tangency => (s, Situation::Tangency, None),
                Event::Corner(q) => (s, Situation::Corner, Some([s, q[1]])),
            }
        }
    };

    let w = w_field(u, dom, s_star.clamp(lo - dom.h(), d + dom.h()))?;
    let w_sup = w.sup_abs();
    Ok(MovingPlaneReport {
        direction: SweepDirection::PlusE1,
        s_star,
        situation,
        w_sup_at_star: w_sup,
        tol,
        symmetric: w_sup <= tol,
        corner_point,
        flagged_nodes: w.flagged.iter().filter(|f| **f).count(),
    })
}

/// Both sweeps `+e₁` and `−e₁`, run concurrently.
pub fn sweep_both(u: &GridField, dom: &GridDomain, tol: f64) -> Result<[MovingPlaneReport; 2]> {
    let (a, b) = std::thread::scope(|scope| {
        let plus = scope.spawn(|| find_critical_s_in(u, dom, tol, SweepDirection::PlusE1, None));
        let minus = scope.spawn(|| find_critical_s_in(u, dom, tol, SweepDirection::MinusE1, None));
        (plus.join().expect("sweep thread panicked"), minus.join().expect("sweep thread panicked"))
    });
    Ok([a?, b?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerGrowth {
    /// Fitted exponent, NaN when `w` vanishes identically.
    pub fit: f64,
    pub consistent: bool,
    /// `(t, w)` samples along the entering direction, `t` decreasing.
    pub samples: Vec<(f64, f64)>,
}

impl CornerGrowth {
    pub fn write_samples<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        write_csv(out, &["t", "w"], self.samples.iter().map(|&(t, w)| vec![t, w]))
    }
}

/// Bilinear interpolation of the whole field (all node kinds).
fn field_at(u: &GridField, dom: &GridDomain, x: [f64; 2]) -> Option<f64> {
    let h = dom.h();
    let o = dom.origin();
    let px = (x[0] - o[0]) / h;
    let py = (x[1] - o[1]) / h;
    let (i0, j0) = (px.floor(), py.floor());
    if i0 < 0.0 || j0 < 0.0 || i0 + 1.0 >= dom.nx() as f64 || j0 + 1.0 >= dom.ny() as f64 {
        return None;
    }
    let (tx, ty) = (px - i0, py - j0);
    let (i0, j0) = (i0 as usize, j0 as usize);
    let v = |i: usize, j: usize| u.get(dom.id(i, j));
    Some(
        (1.0 - tx) * (1.0 - ty) * v(i0, j0)
            + tx * (1.0 - ty) * v(i0 + 1, j0)
            + (1.0 - tx) * ty * v(i0, j0 + 1)
            + tx * ty * v(i0 + 1, j0 + 1),
    )
}

/// Growth exponent of `w_{s*}` along the bisector entering `Σ_{s*}` at the
/// corner point, compared with the admissible window `[β − 0.2, 2 + α + 0.2]`.
pub fn corner_growth_check(
    u: &GridField,
    dom: &GridDomain,
    report: &MovingPlaneReport,
    alpha: f64,
    beta: f64,
) -> Result<CornerGrowth> {
    check_aligned(u, dom)?;
    if report.w_sup_at_star <= report.tol {
        return Ok(CornerGrowth { fit: f64::NAN, consistent: true, samples: Vec::new() });
    }
    if report.situation != Situation::Corner {
        return Err(Error::Argument(format!("corner growth needs a Corner report, got {}", report.situation.name())));
    }
    let q = report.corner_point.ok_or_else(|| Error::Argument("report has no corner point".into()))?;
    let mirrored;
    let (dom, u, q, s) = match report.direction {
        SweepDirection::PlusE1 => (dom, u, q, report.s_star),
        SweepDirection::MinusE1 => {
            mirrored = mirror(dom, u)?;
            (&mirrored.0, &mirrored.1, [-q[0], q[1]], -report.s_star)
        }
    };
    let mask = Boundary::new(dom);
    let nu = mask.normal(q);
    // bisector of e₁ and the inward normal
    let e = [1.0 - nu[0], -nu[1]];
    let en = e[0].hypot(e[1]);
    if !(en > 0.0) {
        return Err(Error::Resolution("degenerate entering direction at the corner".into()));
    }
    let e = [e[0] / en, e[1] / en];
    let h = dom.h();
    let (lo, hi) = x1_extent(dom);
    let t_max = 0.25 * (hi - lo);
    let mut samples = Vec::new();
    let mut t = t_max;
    while t >= 4.0 * h {
        let y = [q[0] + t * e[0], q[1] + t * e[1]];
        let ry = [2.0 * s - y[0], y[1]];
        if mask.inside(y) {
            if let (Some(a), Some(b)) = (field_at(u, dom, ry), field_at(u, dom, y)) {
                let w = a - b;
                if w > 0.0 {
                    samples.push((t, w));
                }
            }
        }
        t /= std::f64::consts::SQRT_2;
    }
    if samples.len() < 3 {
        return Err(Error::Resolution(format!("only {} usable radii along the entering direction", samples.len())));
    }
    let fit = growth_exponent_fit(&samples)?;
    let consistent = fit >= beta - 0.2 && fit <= 2.0 + alpha + 0.2;
    Ok(CornerGrowth { fit, consistent, samples })
}
