//! Intersection-of-quadrics presentations of moment-angle manifolds.
//!
//! Starting from a simple convex polytope `P = {x : Ax + b >= 0}` the crate
//! materializes the associated real moment-angle manifold as an explicit
//! intersection of quadrics in `R^m`, one coordinate per facet, and then
//! makes the differential topology computable:
//!
//! * [`geometry`] validates the H-representation, enumerates vertices and
//!   builds affine vertex charts;
//! * [`gale`] computes the complement (Gale-type) matrix whose rows are the
//!   quadric coefficients;
//! * [`manifold`] evaluates membership, the canonical section over P, the
//!   sign action of `Z_2^m` and the Jacobian rank certificate for smoothness;
//! * [`atlas`] indexes the vertex-and-sign charts and their transition maps,
//!   with finite-difference smoothness verification;
//! * [`collar`] builds collar flows along facets, the smoothing profile, and
//!   the corner-smoothing self-map exchanging the linear and quadratic corner
//!   structures;
//! * [`diffeo`] lifts base-polytope maps to sign-equivariant homeomorphisms
//!   of the manifolds and verifies the diffeomorphism certificate.
//!
//! Everything is plain `f64` with declared tolerances ([`tol`]); the
//! [`exact`] module redoes the linear-algebra core in exact rational
//! arithmetic and serves as the oracle the floating-point path is tested
//! against. The `quadratope` binary exposes the same operations as
//! subcommands producing deterministic JSON reports ([`report`]).

pub mod atlas;
pub mod cli;
pub mod collar;
pub mod diffeo;
pub mod error;
pub mod exact;
pub mod gale;
pub mod geometry;
pub mod io;
pub mod manifold;
pub mod report;
pub mod tol;

pub use error::{Error, Result};
