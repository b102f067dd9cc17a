//! Monotone wide-stencil Dirichlet solver on planar grids.
//!
//! The equation `F±(∇²_g u, ∇_g u) + c − b·u = 0` with zero boundary data is
//! discretized on a uniform grid in a two-dimensional chart (Euclidean or
//! hyperbolic half-plane). The Pucci part is replaced by an extremum over a
//! finite family of orthogonal integer frames `(v, v⊥)`, `|v|∞ ≤ W`:
//!
//! ```text
//! P⁻ ≈ m⁻¹ · min_frames Σ_{v ∈ frame} min(λ q_v, Λ q_v),
//! q_v = δ²_v u + Σ_k c_k(v) ∂_k u,   c_k(v) = −Σ_ij vᵢvⱼ Γᵏᵢⱼ / |v|²,
//! ```
//!
//! so `q_v` is the second difference of the Riemannian Hessian along `v`.
//! First-order terms are upwinded, making every candidate a linear monotone
//! scheme and the whole scheme an inf (or sup) of them; Howard iteration then
//! alternates policy selection with a BiCGSTAB solve.
//!
//! Near the boundary each stencil arm is cut where it leaves the domain
//! (Shortley–Weller), with the zero Dirichlet value imposed at the crossing.
//! [`BoundaryMode::Snap`] instead imposes zero at the exterior node itself.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, SpaceForm, SpaceKind, HYPERBOLIC_MARGIN};
use crate::io::{read_csv, write_csv};
use crate::pucci::{Extremal, PucciParams};
use crate::radial::AffineSource;
use crate::sparse::{bicgstab, CsrMatrix};

pub const DEFAULT_WIDTH: usize = 3;
/// Arms shorter than this fraction of a full step are lengthened to it.
const MIN_ARM_FRACTION: f64 = 1e-3;
const CROSSING_BISECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Exterior,
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn code(self) -> u8 {
        match self {
            NodeKind::Exterior => 0,
            NodeKind::Interior => 1,
            NodeKind::Boundary => 2,
        }
    }

    pub fn from_code(c: f64) -> Option<Self> {
        if c == 0.0 {
            Some(NodeKind::Exterior)
        } else if c == 1.0 {
            Some(NodeKind::Interior)
        } else if c == 2.0 {
            Some(NodeKind::Boundary)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Arms are cut at the boundary crossing.
    CutCell,
    /// Arms end at grid nodes; exterior nodes carry the Dirichlet value.
    Snap,
}

/// Analytic domain description; the zero level set of [`Shape::level`] is
/// the boundary, negative inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Geodesic ball of the chart.
    Ball { center: [f64; 2], radius: f64 },
    /// Coordinate ellipse `((x₁−c₁)/a)² + ((x₂−c₂)/b)² < 1`.
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
}

impl Shape {
    pub fn level(&self, chart: &SpaceForm, x: [f64; 2]) -> f64 {
        match *self {
            Shape::Ball { center, radius } => {
                if chart.kind() == SpaceKind::HyperbolicHalfSpace && x[1] < HYPERBOLIC_MARGIN {
                    return f64::INFINITY;
                }
                let d = match (Point::new(x.to_vec()), Point::new(center.to_vec())) {
                    (Ok(p), Ok(c)) => geometry::geodesic_distance(chart, &p, &c).unwrap_or(f64::INFINITY),
                    _ => f64::INFINITY,
                };
                d - radius
            }
            Shape::Ellipse { center, semi_axes } => {
                let a = (x[0] - center[0]) / semi_axes[0];
                let b = (x[1] - center[1]) / semi_axes[1];
                a * a + b * b - 1.0
            }
        }
    }

    fn center(&self) -> [f64; 2] {
        match *self {
            Shape::Ball { center, .. } | Shape::Ellipse { center, .. } => center,
        }
    }

    /// Coordinate bounding box `([x₁min, x₂min], [x₁max, x₂max])`.
    fn bounding_box(&self, chart: &SpaceForm) -> Result<([f64; 2], [f64; 2])> {
        match *self {
            Shape::Ball { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
                }
                match chart.kind() {
                    SpaceKind::Euclidean => {
                        Ok(([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius]))
                    }
                    SpaceKind::HyperbolicHalfSpace => {
                        if !(center[1] >= HYPERBOLIC_MARGIN) {
                            return Err(Error::Domain(format!("ball center x_2 = {} outside the chart", center[1])));
                        }
                        let w = center[1] * radius.sinh();
                        Ok(([center[0] - w, center[1] * (-radius).exp()], [center[0] + w, center[1] * radius.exp()]))
                    }
                    SpaceKind::SphereStereographic => {
                        Err(Error::Domain("grid solving in the sphere chart is not supported".into()))
                    }
                }
            }
            Shape::Ellipse { center, semi_axes } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(Error::Domain("ellipse semi-axes must be positive".into()));
                }
                Ok((
                    [center[0] - semi_axes[0], center[1] - semi_axes[1]],
                    [center[0] + semi_axes[0], center[1] + semi_axes[1]],
                ))
            }
        }
    }
}

/// Masked uniform grid in a planar chart. Node `(i, j)` has id `j·nx + i`
/// and sits at `anchor + ((i − i_a)h, (j − j_a)h)`.
#[derive(Debug, Clone)]
pub struct GridDomain {
    chart: SpaceForm,
    anchor: [f64; 2],
    anchor_index: [usize; 2],
    h: f64,
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
    boundary_nodes: Vec<(usize, f64)>,
    unknown_of: Vec<usize>,
    unknowns: Vec<usize>,
    width: usize,
    mode: BoundaryMode,
    shape: Option<Shape>,
}

const NOT_UNKNOWN: usize = usize::MAX;

fn check_chart(chart: &SpaceForm) -> Result<()> {
    if chart.dim() != 2 {
        return Err(Error::Argument(format!("grid charts are planar, got dimension {}", chart.dim())));
    }
    if chart.kind() == SpaceKind::SphereStereographic {
        return Err(Error::Domain("grid solving in the sphere chart is not supported".into()));
    }
    Ok(())
}

/// Hyperbolic half-plane geodesic ball with the default stencil width and
/// cut-cell boundary.
pub fn build_geodesic_ball(center: &Point, radius: f64, h: f64) -> Result<GridDomain> {
    let chart = SpaceForm::hyperbolic(2)?;
    if center.dim() != 2 {
        return Err(Error::Argument("ball center must be planar".into()));
    }
    GridDomain::from_shape(
        chart,
        Shape::Ball { center: [center[0], center[1]], radius },
        h,
        DEFAULT_WIDTH,
        BoundaryMode::CutCell,
    )
}

impl GridDomain {
    /// Grid covering `shape` with a margin of `width + 1` nodes, aligned so
    /// that the shape's center is a node.
    pub fn from_shape(chart: SpaceForm, shape: Shape, h: f64, width: usize, mode: BoundaryMode) -> Result<Self> {
        check_chart(&chart)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        if width == 0 {
            return Err(Error::Argument("stencil width must be at least 1".into()));
        }
        let (lo, hi) = shape.bounding_box(&chart)?;
        let anchor = shape.center();
        let pad = width + 1;
        let steps = |d: f64| (d / h).ceil() as usize + pad;
        let (il, ir) = (steps(anchor[0] - lo[0]), steps(hi[0] - anchor[0]));
        let (jl, jr) = (steps(anchor[1] - lo[1]), steps(hi[1] - anchor[1]));
        let (nx, ny) = (il + ir + 1, jl + jr + 1);
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(Error::Argument(format!("grid of {nx}x{ny} nodes is too large")));
        }
        let lowest = anchor[1] - jl as f64 * h;
        if chart.kind() == SpaceKind::HyperbolicHalfSpace && lowest < HYPERBOLIC_MARGIN {
            return Err(Error::Domain(format!(
                "domain touches the chart boundary: lowest grid row at x_2 = {lowest:.3e}"
            )));
        }
        let mut dom = Self {
            chart,
            anchor,
            anchor_index: [il, jl],
            h,
            nx,
            ny,
            kinds: vec![NodeKind::Exterior; nx * ny],
            boundary_nodes: Vec::new(),
            unknown_of: Vec::new(),
            unknowns: Vec::new(),
            width,
            mode,
            shape: Some(shape),
        };
        for id in 0..nx * ny {
            if shape.level(&chart, dom.coords(id)) < 0.0 {
                dom.kinds[id] = NodeKind::Interior;
            }
        }
        // exterior nodes reachable by some stencil arm
        let w = width as isize;
        for id in 0..nx * ny {
            if dom.kinds[id] != NodeKind::Interior {
                continue;
            }
            let (i, j) = dom.ij(id);
            for dj in -w..=w {
                for di in -w..=w {
                    if let Some(nb) = dom.offset(i, j, di, dj) {
                        if dom.kinds[nb] == NodeKind::Exterior {
                            dom.kinds[nb] = NodeKind::Boundary;
                        }
                    }
                }
            }
        }
        dom.finish()?;
        Ok(dom)
    }

    /// Domain from an explicit node classification (for example read back
    /// from CSV). Stencils snap to nodes.
    pub fn from_mask(
        chart: SpaceForm,
        origin: [f64; 2],
        h: f64,
        nx: usize,
        ny: usize,
        kinds: Vec<NodeKind>,
    ) -> Result<Self> {
        check_chart(&chart)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        if kinds.len() != nx * ny || nx == 0 || ny == 0 {
            return Err(Error::Argument(format!("mask has {} entries, expected {nx}x{ny}", kinds.len())));
        }
        if chart.kind() == SpaceKind::HyperbolicHalfSpace && origin[1] < HYPERBOLIC_MARGIN {
            return Err(Error::Domain(format!("grid row x_2 = {} outside the half-plane chart", origin[1])));
        }
        let mut dom = Self {
            chart,
            anchor: origin,
            anchor_index: [0, 0],
            h,
            nx,
            ny,
            kinds,
            boundary_nodes: Vec::new(),
            unknown_of: Vec::new(),
            unknowns: Vec::new(),
            width: 1,
            mode: BoundaryMode::Snap,
            shape: None,
        };
        dom.finish()?;
        Ok(dom)
    }

    fn finish(&mut self) -> Result<()> {
        self.unknown_of = vec![NOT_UNKNOWN; self.kinds.len()];
        self.unknowns.clear();
        self.boundary_nodes.clear();
        for (id, kind) in self.kinds.iter().enumerate() {
            match kind {
                NodeKind::Interior => {
                    self.unknown_of[id] = self.unknowns.len();
                    self.unknowns.push(id);
                }
                NodeKind::Boundary => self.boundary_nodes.push((id, 0.0)),
                NodeKind::Exterior => {}
            }
        }
        if self.unknowns.is_empty() {
            return Err(Error::DegenerateDomain("no interior nodes".into()));
        }
        Ok(())
    }

    pub fn chart(&self) -> &SpaceForm {
        &self.chart
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.shape.as_ref()
    }

    pub fn origin(&self) -> [f64; 2] {
        self.coords(0)
    }

    pub fn kind(&self, id: usize) -> NodeKind {
        self.kinds[id]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn is_interior(&self, id: usize) -> bool {
        self.kinds[id] == NodeKind::Interior
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k == NodeKind::Interior).collect()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn interior_count(&self) -> usize {
        self.unknowns.len()
    }

    /// Boundary node ids with their Dirichlet value (always zero).
    pub fn boundary_nodes(&self) -> &[(usize, f64)] {
        &self.boundary_nodes
    }

    pub fn id(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, id: usize) -> (usize, usize) {
        (id % self.nx, id / self.nx)
    }

    pub fn coord_x1(&self, i: usize) -> f64 {
        self.anchor[0] + (i as f64 - self.anchor_index[0] as f64) * self.h
    }

    pub fn coord_x2(&self, j: usize) -> f64 {
        self.anchor[1] + (j as f64 - self.anchor_index[1] as f64) * self.h
    }

    pub fn coords(&self, id: usize) -> [f64; 2] {
        let (i, j) = self.ij(id);
        [self.coord_x1(i), self.coord_x2(j)]
    }

    /// Coordinates of the (possibly off-grid) lattice point `(i + di, j + dj)`.
    fn lattice_coords(&self, i: usize, j: usize, di: isize, dj: isize) -> [f64; 2] {
        [
            self.anchor[0] + (i as f64 + di as f64 - self.anchor_index[0] as f64) * self.h,
            self.anchor[1] + (j as f64 + dj as f64 - self.anchor_index[1] as f64) * self.h,
        ]
    }

    pub fn offset(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
        let a = i as isize + di;
        let b = j as isize + dj;
        if a < 0 || b < 0 || a >= self.nx as isize || b >= self.ny as isize {
            None
        } else {
            Some(self.id(a as usize, b as usize))
        }
    }

    /// Mirror image under `x₁ ↦ −x₁`, keeping the shape and boundary mode.
    pub fn mirror_x1(&self) -> Self {
        let (nx, ny) = (self.nx, self.ny);
        let mut kinds = Vec::with_capacity(self.len());
        for j in 0..ny {
            for i in 0..nx {
                kinds.push(self.kinds[self.id(nx - 1 - i, j)]);
            }
        }
        let shape = self.shape.map(|s| match s {
            Shape::Ball { center, radius } => Shape::Ball { center: [-center[0], center[1]], radius },
            Shape::Ellipse { center, semi_axes } => Shape::Ellipse { center: [-center[0], center[1]], semi_axes },
        });
        let mut out = Self {
            anchor: [-self.anchor[0], self.anchor[1]],
            anchor_index: [nx - 1 - self.anchor_index[0], self.anchor_index[1]],
            kinds,
            shape,
            ..self.clone()
        };
        out.finish().expect("mirror keeps the interior");
        out
    }

    /// Writes the domain CSV `x1,x2,mask`, row-major in `x₂` then `x₁`.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> Result<()> {
        let rows = (0..self.len()).map(|id| {
            let x = self.coords(id);
            vec![x[0], x[1], self.kinds[id].code() as f64]
        });
        write_csv(out, &["x1", "x2", "mask"], rows)
    }

    /// Reads a domain CSV written by [`GridDomain::write_csv`].
    pub fn read_csv<R: BufRead>(input: R, chart: SpaceForm) -> Result<Self> {
        let rows = read_csv(input, &["x1", "x2", "mask"])?;
        let (origin, h, nx, ny) = infer_lattice(&rows)?;
        let mut kinds = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let kind = NodeKind::from_code(row[2]).ok_or_else(|| Error::Parse {
                row: r + 2,
                col: 3,
                msg: format!("mask must be 0, 1 or 2, got {}", row[2]),
            })?;
            kinds.push(kind);
        }
        Self::from_mask(chart, origin, h, nx, ny, kinds)
    }
}

/// Recovers `(origin, h, nx, ny)` from row-major coordinate rows and checks
/// that every row sits on the lattice.
fn infer_lattice(rows: &[Vec<f64>]) -> Result<([f64; 2], f64, usize, usize)> {
    if rows.len() < 2 {
        return Err(Error::DegenerateDomain("grid CSV needs at least two nodes".into()));
    }
    let origin = [rows[0][0], rows[0][1]];
    let nx = rows.iter().take_while(|r| r[1] == origin[1]).count();
    if nx < 2 || !rows.len().is_multiple_of(nx) {
        return Err(Error::Parse { row: nx + 2, col: 2, msg: "rows do not form a rectangular row-major grid".into() });
    }
    let ny = rows.len() / nx;
    let h = rows[1][0] - rows[0][0];
    if !(h > 0.0) {
        return Err(Error::Parse { row: 3, col: 1, msg: "x1 must increase along a row".into() });
    }
    let tol = 1e-6 * h;
    for (r, row) in rows.iter().enumerate() {
        let (i, j) = (r % nx, r / nx);
        let x1 = origin[0] + i as f64 * h;
        let x2 = origin[1] + j as f64 * h;
        if (row[0] - x1).abs() > tol {
            return Err(Error::Parse {
                row: r + 2,
                col: 1,
                msg: format!("x1 = {} is off the lattice (expected {x1})", row[0]),
            });
        }
        if (row[1] - x2).abs() > tol {
            return Err(Error::Parse {
                row: r + 2,
                col: 2,
                msg: format!("x2 = {} is off the lattice (expected {x2})", row[1]),
            });
        }
    }
    Ok((origin, h, nx, ny))
}

/// Node values aligned with a [`GridDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(dom: &GridDomain) -> Self {
        Self { nx: dom.nx, ny: dom.ny, values: vec![0.0; dom.len()] }
    }

    /// Samples `f` at every node, boundary and exterior included.
    pub fn from_fn(dom: &GridDomain, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self { nx: dom.nx, ny: dom.ny, values: (0..dom.len()).map(|id| f(dom.coords(id))).collect() }
    }

    /// Samples `f` at interior nodes and sets every other node to zero.
    pub fn from_fn_interior(dom: &GridDomain, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..dom.len()).map(|id| if dom.is_interior(id) { f(dom.coords(id)) } else { 0.0 }).collect();
        Self { nx: dom.nx, ny: dom.ny, values }
    }

    pub fn from_values(dom: &GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != dom.len() {
            return Err(Error::Argument(format!("field has {} values, domain has {} nodes", values.len(), dom.len())));
        }
        Ok(Self { nx: dom.nx, ny: dom.ny, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn set(&mut self, id: usize, v: f64) {
        self.values[id] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn is_aligned(&self, dom: &GridDomain) -> bool {
        self.nx == dom.nx && self.ny == dom.ny
    }

    /// Sup of `|u|` over interior nodes.
    pub fn sup_interior(&self, dom: &GridDomain) -> f64 {
        dom.interior_nodes().iter().map(|&id| self.values[id].abs()).fold(0.0, f64::max)
    }

    /// Writes the field CSV `x1,x2,u`.
    pub fn write_csv<W: Write + ?Sized>(&self, dom: &GridDomain, out: &mut W) -> Result<()> {
        self.check(dom)?;
        let rows = (0..dom.len()).map(|id| {
            let x = dom.coords(id);
            vec![x[0], x[1], self.values[id]]
        });
        write_csv(out, &["x1", "x2", "u"], rows)
    }

    /// Reads a field CSV and checks that its nodes match `dom`.
    pub fn read_csv<R: BufRead>(input: R, dom: &GridDomain) -> Result<Self> {
        let rows = read_csv(input, &["x1", "x2", "u"])?;
        if rows.len() != dom.len() {
            return Err(Error::Parse {
                row: rows.len().min(dom.len()) + 2,
                col: 1,
                msg: format!("field has {} rows, domain has {} nodes", rows.len(), dom.len()),
            });
        }
        let tol = 1e-6 * dom.h;
        let mut values = Vec::with_capacity(rows.len());
        for (id, row) in rows.iter().enumerate() {
            let x = dom.coords(id);
            for c in 0..2 {
                if (row[c] - x[c]).abs() > tol {
                    return Err(Error::Parse {
                        row: id + 2,
                        col: c + 1,
                        msg: "node does not match the domain CSV".into(),
                    });
                }
            }
            if !row[2].is_finite() {
                return Err(Error::Parse { row: id + 2, col: 3, msg: "non-finite value".into() });
            }
            values.push(row[2]);
        }
        Ok(Self { nx: dom.nx, ny: dom.ny, values })
    }

    fn check(&self, dom: &GridDomain) -> Result<()> {
        if self.is_aligned(dom) {
            Ok(())
        } else {
            Err(Error::Argument(format!("field is {}x{}, domain is {}x{}", self.nx, self.ny, dom.nx, dom.ny)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub stencil_width: usize,
    pub tol: f64,
    pub max_policy_iters: usize,
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { stencil_width: DEFAULT_WIDTH, tol: 1e-8, max_policy_iters: 50, linear_tol: 1e-12 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stencil_width == 0 {
            return Err(Error::Argument("stencil width must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.linear_tol > 0.0) {
            return Err(Error::Argument("tolerances must be positive".into()));
        }
        if self.max_policy_iters == 0 {
            return Err(Error::Argument("max_policy_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Primitive orthogonal frames `((a, b), (−b, a))` with `a ≥ 1`, `b ≥ 0`,
/// `gcd(a, b) = 1`, `max(a, b) ≤ w`; the axis frame comes first.
pub fn frame_family(w: usize) -> Vec<[[isize; 2]; 2]> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::new();
    for a in 1..=w {
        for b in 0..=w {
            if gcd(a, b) == 1 {
                let (a, b) = (a as isize, b as isize);
                out.push([[a, b], [-b, a]]);
            }
        }
    }
    out.sort_by_key(|f| (f[0][0].max(f[0][1]), f[0][1], f[0][0]));
    out
}

/// One stencil arm: the neighbour reached (or `None` for a boundary
/// crossing carrying zero) and the chart-coordinate length.
#[derive(Debug, Clone, Copy)]
struct Arm {
    node: Option<usize>,
    dist: f64,
}

impl Arm {
    #[inline]
    fn value(&self, u: &[f64]) -> f64 {
        self.node.map_or(0.0, |id| u[id])
    }
}

#[derive(Debug, Clone, Copy)]
struct DirStencil {
    plus: Arm,
    minus: Arm,
    chris: [f64; 2],
}

impl DirStencil {
    #[inline]
    fn coeffs(&self) -> (f64, f64) {
        let (dp, dm) = (self.plus.dist, self.minus.dist);
        let s = 2.0 / (dp + dm);
        (s / dp, s / dm)
    }

    #[inline]
    fn second_difference(&self, u0: f64, u: &[f64]) -> f64 {
        let (cp, cm) = self.coeffs();
        cp * (self.plus.value(u) - u0) + cm * (self.minus.value(u) - u0)
    }
}

#[derive(Debug, Clone)]
struct NodeStencil {
    node: usize,
    minv: f64,
    sqrt_minv: f64,
    /// `+x₁, −x₁, +x₂, −x₂`
    axis: [Arm; 4],
    /// Two entries per frame.
    dirs: Vec<DirStencil>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GradChoice {
    Forward,
    Backward,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Policy {
    frame: usize,
    weights: [f64; 2],
    grad: [GradChoice; 2],
    grad_weights: [f64; 2],
}

struct Discretization {
    params: PucciParams,
    sign: Extremal,
    frames: usize,
    stencils: Vec<NodeStencil>,
}

impl Discretization {
    fn new(dom: &GridDomain, params: &PucciParams, sign: Extremal, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if dom.shape.is_some() && cfg.stencil_width > dom.width {
            return Err(Error::Argument(format!(
                "stencil width {} exceeds the domain's boundary layer {}",
                cfg.stencil_width, dom.width
            )));
        }
        // with λ = Λ every frame gives the same operator; keep the compact one
        let family = if params.is_linear() { frame_family(1)[..1].to_vec() } else { frame_family(cfg.stencil_width) };
        let mut stencils = Vec::with_capacity(dom.interior_count());
        for &id in dom.interior_nodes() {
            let x = dom.coords(id);
            let p = Point::new(x.to_vec())?;
            let minv = crate::pucci::inverse_conformal_factor(&dom.chart, &p)?;
            let gamma = geometry::christoffel(&dom.chart, &p)?;
            let axis = [arm(dom, id, [1, 0]), arm(dom, id, [-1, 0]), arm(dom, id, [0, 1]), arm(dom, id, [0, -1])];
            let mut dirs = Vec::with_capacity(2 * family.len());
            for frame in &family {
                for v in frame {
                    let norm2 = (v[0] * v[0] + v[1] * v[1]) as f64;
                    let mut chris = [0.0; 2];
                    for (k, c) in chris.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                s += (v[i] * v[j]) as f64 * gamma.get(k, i, j);
                            }
                        }
                        *c = -s / norm2;
                    }
                    dirs.push(DirStencil { plus: arm(dom, id, *v), minus: arm(dom, id, [-v[0], -v[1]]), chris });
                }
            }
            stencils.push(NodeStencil { node: id, minv, sqrt_minv: minv.sqrt(), axis, dirs });
        }
        Ok(Self { params: *params, sign, frames: family.len(), stencils })
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.sign {
            Extremal::Minus => a < b,
            Extremal::Plus => a > b,
        }
    }

    /// Operator value at one node and the policy attaining it.
    fn eval(&self, st: &NodeStencil, u: &[f64]) -> (f64, Policy) {
        let u0 = u[st.node];
        let p = &self.params;
        let fwd = [(st.axis[0].value(u) - u0) / st.axis[0].dist, (st.axis[2].value(u) - u0) / st.axis[2].dist];
        let bwd = [(u0 - st.axis[1].value(u)) / st.axis[1].dist, (u0 - st.axis[3].value(u)) / st.axis[3].dist];
        let branches: &[[f64; 2]] = if p.is_linear() {
            &[[p.lambda, p.lambda]]
        } else {
            &[[p.lambda, p.lambda], [p.lambda, p.big_lambda], [p.big_lambda, p.lambda], [p.big_lambda, p.big_lambda]]
        };
        let mut best = f64::NAN;
        let mut policy = Policy { frame: 0, weights: branches[0], grad: [GradChoice::Off; 2], grad_weights: [0.0; 2] };
        for f in 0..self.frames {
            let (da, db) = (&st.dirs[2 * f], &st.dirs[2 * f + 1]);
            let qa = da.second_difference(u0, u);
            let qb = db.second_difference(u0, u);
            for w in branches {
                let mut val = w[0] * qa + w[1] * qb;
                for k in 0..2 {
                    let net = w[0] * da.chris[k] + w[1] * db.chris[k];
                    val += if net > 0.0 { net * fwd[k] } else { net * bwd[k] };
                }
                if best.is_nan() || self.better(val, best) {
                    best = val;
                    policy.frame = f;
                    policy.weights = *w;
                }
            }
        }
        let mut value = st.minv * best;
        if p.k > 0.0 {
            let mut pick = [(GradChoice::Off, 0.0); 2];
            for k in 0..2 {
                let (a, b) = (fwd[k], -bwd[k]);
                pick[k] = match self.sign {
                    Extremal::Minus => {
                        let m = a.min(b);
                        if m >= 0.0 {
                            (GradChoice::Off, 0.0)
                        } else if a <= b {
                            (GradChoice::Forward, m)
                        } else {
                            (GradChoice::Backward, m)
                        }
                    }
                    Extremal::Plus => {
                        let m = a.max(b);
                        if m <= 0.0 {
                            (GradChoice::Off, 0.0)
                        } else if a >= b {
                            (GradChoice::Forward, m)
                        } else {
                            (GradChoice::Backward, m)
                        }
                    }
                };
            }
            let norm = (pick[0].1 * pick[0].1 + pick[1].1 * pick[1].1).sqrt();
            if norm > 0.0 {
                for k in 0..2 {
                    policy.grad[k] = pick[k].0;
                    policy.grad_weights[k] = pick[k].1.abs() / norm;
                }
            }
            value += self.sign.sign() * p.k * st.sqrt_minv * norm;
        }
        (value, policy)
    }

    /// Linear row `center·u₀ + Σ coeff·u(arm)` of a fixed policy.
    fn row(&self, st: &NodeStencil, pol: &Policy, entries: &mut Vec<(Arm, f64)>) -> f64 {
        entries.clear();
        let mut center = 0.0;
        let (da, db) = (&st.dirs[2 * pol.frame], &st.dirs[2 * pol.frame + 1]);
        for (d, w) in [(da, pol.weights[0]), (db, pol.weights[1])] {
            let (cp, cm) = d.coeffs();
            let s = st.minv * w;
            entries.push((d.plus, s * cp));
            entries.push((d.minus, s * cm));
            center -= s * (cp + cm);
        }
        for k in 0..2 {
            let net = st.minv * (pol.weights[0] * da.chris[k] + pol.weights[1] * db.chris[k]);
            if net > 0.0 {
                let a = st.axis[2 * k];
                entries.push((a, net / a.dist));
                center -= net / a.dist;
            } else if net < 0.0 {
                let a = st.axis[2 * k + 1];
                entries.push((a, -net / a.dist));
                center += net / a.dist;
            }
            let gw = self.params.k * st.sqrt_minv * pol.grad_weights[k];
            let a = match pol.grad[k] {
                GradChoice::Forward => st.axis[2 * k],
                GradChoice::Backward => st.axis[2 * k + 1],
                GradChoice::Off => continue,
            };
            entries.push((a, gw / a.dist));
            center -= gw / a.dist;
        }
        center
    }
}

/// Arm from node `id` along the integer offset `v`.
fn arm(dom: &GridDomain, id: usize, v: [isize; 2]) -> Arm {
    let (i, j) = dom.ij(id);
    let len = ((v[0] * v[0] + v[1] * v[1]) as f64).sqrt() * dom.h;
    let target = dom.offset(i, j, v[0], v[1]);
    if let Some(t) = target {
        if dom.kinds[t] == NodeKind::Interior {
            return Arm { node: Some(t), dist: len };
        }
    }
    match (dom.mode, dom.shape) {
        (BoundaryMode::CutCell, Some(shape)) => {
            let x0 = dom.coords(id);
            let x1 = dom.lattice_coords(i, j, v[0], v[1]);
            let at = |t: f64| [x0[0] + t * (x1[0] - x0[0]), x0[1] + t * (x1[1] - x0[1])];
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..CROSSING_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if shape.level(&dom.chart, at(mid)) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Arm { node: None, dist: (0.5 * (lo + hi)).max(MIN_ARM_FRACTION) * len }
        }
        _ => Arm { node: target, dist: len },
    }
}

/// Operator value `F±` of the discrete scheme at every interior node (zero
/// elsewhere); boundary and exterior values of `u` are used as Dirichlet data.
pub fn discrete_pucci_residual(
    u: &GridField,
    dom: &GridDomain,
    p: &PucciParams,
    sign: Extremal,
    cfg: &SolverConfig,
) -> Result<GridField> {
    u.check(dom)?;
    let disc = Discretization::new(dom, p, sign, cfg)?;
    let mut out = GridField::zeros(dom);
    for st in &disc.stencils {
        out.values[st.node] = disc.eval(st, &u.values).0;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GridSolution {
    pub field: GridField,
    /// Sup over interior nodes of `|F±(u) + c − b·u|`.
    pub residual_sup: f64,
    pub policy_iterations: usize,
    pub linear_iterations: usize,
    pub converged: bool,
}

/// Howard iteration; fails with [`Error::Convergence`] above tolerance.
pub fn howard_solve(
    dom: &GridDomain,
    p: &PucciParams,
    source: AffineSource,
    sign: Extremal,
    cfg: &SolverConfig,
) -> Result<GridSolution> {
    let sol = howard_solve_report(dom, p, source, sign, cfg)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::Convergence { residual: sol.residual_sup, iterations: sol.policy_iterations })
    }
}

/// Howard iteration returning the last iterate even when it has not
/// converged (`converged` tells which).
pub fn howard_solve_report(
    dom: &GridDomain,
    p: &PucciParams,
    source: AffineSource,
    sign: Extremal,
    cfg: &SolverConfig,
) -> Result<GridSolution> {
    if source.b < 0.0 {
        return Err(Error::Argument(format!("source slope b must be nonnegative, got {}", source.b)));
    }
    let disc = Discretization::new(dom, p, sign, cfg)?;
    let n = dom.interior_count();
    let mut u = vec![0.0; dom.len()];
    let mut policies: Vec<Policy> = disc.stencils.iter().map(|st| disc.eval(st, &u).1).collect();
    let mut entries = Vec::with_capacity(16);
    let mut residual = f64::INFINITY;
    let mut linear_iterations = 0;
    let mut x: Vec<f64> = vec![0.0; n];
    for it in 1..=cfg.max_policy_iters {
        let mut a = CsrMatrix::with_capacity(n, 12 * n);
        let mut rhs = vec![0.0; n];
        let mut row = Vec::with_capacity(16);
        for (r, (st, pol)) in disc.stencils.iter().zip(&policies).enumerate() {
            let center = disc.row(st, pol, &mut entries) - source.b;
            row.clear();
            row.push((r, center));
            let mut b = -source.c;
            for (arm, coeff) in &entries {
                match arm.node {
                    Some(id) if dom.unknown_of[id] != NOT_UNKNOWN => row.push((dom.unknown_of[id], *coeff)),
                    Some(id) => b -= coeff * u[id],
                    None => {}
                }
            }
            a.push_row(&row);
            rhs[r] = b;
        }
        let stats = bicgstab(&a, &rhs, &mut x, cfg.linear_tol, 20 * n + 1000)?;
        linear_iterations += stats.iterations;
        for (r, &id) in dom.interior_nodes().iter().enumerate() {
            u[id] = x[r];
        }
        let mut new_policies = Vec::with_capacity(n);
        let mut res: f64 = 0.0;
        for st in &disc.stencils {
            let (val, pol) = disc.eval(st, &u);
            res = res.max((val + source.eval(u[st.node])).abs());
            new_policies.push(pol);
        }
        // an unchanged policy means the linear solve already was the answer
        let stagnated = new_policies == policies;
        residual = res;
        policies = new_policies;
        if residual <= cfg.tol || stagnated {
            return Ok(GridSolution {
                field: GridField { nx: dom.nx, ny: dom.ny, values: u },
                residual_sup: residual,
                policy_iterations: it,
                linear_iterations,
                converged: residual <= cfg.tol,
            });
        }
    }
    Ok(GridSolution {
        field: GridField { nx: dom.nx, ny: dom.ny, values: u },
        residual_sup: residual,
        policy_iterations: cfg.max_policy_iters,
        linear_iterations,
        converged: false,
    })
}

/// Riemannian boundary gradient at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGradient {
    /// The exterior node the sample is attached to.
    pub node: usize,
    /// Boundary point where the gradient is evaluated.
    pub point: [f64; 2],
    /// `|∇_g u|_g` at `point`.
    pub value: f64,
}

/// `(max − min) / mean` of a gradient profile.
pub fn profile_spread(profile: &[BoundaryGradient]) -> f64 {
    if profile.is_empty() {
        return f64::NAN;
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for g in profile {
        lo = lo.min(g.value);
        hi = hi.max(g.value);
        sum += g.value;
    }
    (hi - lo) / (sum / profile.len() as f64)
}

fn project_to_boundary(shape: &Shape, chart: &SpaceForm, x: [f64; 2], h: f64) -> [f64; 2] {
    let mut p = x;
    let eps = 1e-6 * h;
    for _ in 0..20 {
        let phi = shape.level(chart, p);
        let gx = (shape.level(chart, [p[0] + eps, p[1]]) - shape.level(chart, [p[0] - eps, p[1]])) / (2.0 * eps);
        let gy = (shape.level(chart, [p[0], p[1] + eps]) - shape.level(chart, [p[0], p[1] - eps])) / (2.0 * eps);
        let g2 = gx * gx + gy * gy;
        if !(g2 > 0.0) || !phi.is_finite() {
            break;
        }
        let step = [phi * gx / g2, phi * gy / g2];
        p = [p[0] - step[0], p[1] - step[1]];
        if step[0].abs() + step[1].abs() < 1e-14 * h.max(1.0) {
            break;
        }
    }
    p
}

/// Boundary gradient `|∇_g u|_g` at the projection of every boundary node
/// adjacent (4-neighbour) to the interior. The gradient comes from a weighted
/// least-squares quadratic through nearby interior values and zero boundary
/// points, which is second-order accurate.
pub fn boundary_gradient_profile(u: &GridField, dom: &GridDomain) -> Result<Vec<BoundaryGradient>> {
    u.check(dom)?;
    let h = dom.h;
    let ring: Vec<usize> = dom
        .boundary_nodes
        .iter()
        .map(|&(id, _)| id)
        .filter(|&id| {
            let (i, j) = dom.ij(id);
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(di, dj)| dom.offset(i, j, di, dj).is_some_and(|nb| dom.is_interior(nb)))
        })
        .collect();
    let points: Vec<[f64; 2]> = ring
        .iter()
        .map(|&id| match dom.shape {
            Some(shape) => project_to_boundary(&shape, &dom.chart, dom.coords(id), h),
            None => dom.coords(id),
        })
        .collect();
    let reach = 3.5 * h;
    let mut out = Vec::with_capacity(ring.len());
    for (r, &id) in ring.iter().enumerate() {
        let p = points[r];
        let (i, j) = dom.ij(id);
        let mut samples: Vec<([f64; 2], f64)> = Vec::new();
        for dj in -4..=4 {
            for di in -4..=4 {
                if let Some(nb) = dom.offset(i, j, di, dj) {
                    if dom.is_interior(nb) {
                        let x = dom.coords(nb);
                        if ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt() <= reach {
                            samples.push((x, u.values[nb]));
                        }
                    }
                }
            }
        }
        for q in &points {
            if ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() <= reach {
                samples.push((*q, 0.0));
            }
        }
        if samples.len() < 6 {
            continue;
        }
        let rows = samples.len();
        let mut a = DMatrix::zeros(rows, 6);
        let mut b = DVector::zeros(rows);
        for (k, (x, val)) in samples.iter().enumerate() {
            let dx = (x[0] - p[0]) / h;
            let dy = (x[1] - p[1]) / h;
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            let basis = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
            for (c, bv) in basis.iter().enumerate() {
                a[(k, c)] = w * bv;
            }
            b[k] = w * val;
        }
        let Ok(coef) = a.svd(true, true).solve(&b, 1e-12) else { continue };
        let grad = [coef[1] / h, coef[2] / h];
        let minv = match dom.chart.kind() {
            SpaceKind::HyperbolicHalfSpace => p[1] * p[1],
            _ => 1.0,
        };
        out.push(BoundaryGradient { node: id, point: p, value: minv.sqrt() * (grad[0].hypot(grad[1])) });
    }
    Ok(out)
}
