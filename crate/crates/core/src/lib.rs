//! Numerical machinery for overdetermined fully nonlinear elliptic problems
//! on the three space forms.
//!
//! * [`geometry`]: conformally flat charts (Euclidean, hyperbolic half-space,
//!   stereographic sphere), Christoffel symbols, Riemannian Hessians.
//! * [`pucci`]: exact and sampled Pucci extremal operators and the
//!   Riemannian/Euclidean comparison inequalities.
//! * [`radial`]: radial shooting on geodesic balls and the boundary constant c₀.
//! * [`cone`]: homogeneity exponents of extremal solutions in planar cones.
//! * [`grid`]: monotone wide-stencil Dirichlet solver with policy iteration.
//! * [`movingplane`]: discrete moving-plane symmetry harness.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops over small fixed dimensions read closer to the formulas
#![allow(clippy::needless_range_loop)]

pub mod cone;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod movingplane;
pub mod pucci;
pub mod radial;
pub mod sampling;
pub mod sparse;
pub mod suites;

pub use error::{Error, Result};
