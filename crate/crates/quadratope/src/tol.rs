//! Numerical tolerances used across the pipeline.
//!
//! The geometry is exact mathematics pushed through floating point, so every
//! comparison needs a declared cutoff. They are collected here instead of
//! being scattered as magic numbers, and the defaults are the ones the
//! verification suite is calibrated against. Scale-dependent tolerances state
//! their scaling rule in the field doc; callers apply it at the use site.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    /// Facet activity at a point: |a_i x + b_i| below `active_rel * (1 + ‖b‖∞)`
    /// counts as "on the facet". Relative to the offset scale so that
    /// rescaling a polytope does not change which facets are active.
    pub active_rel: f64,
    /// Vertices closer than `merge * (1 + ‖x‖∞)` are the same vertex.
    /// Strictly looser than activity so that a merge never creates a new
    /// active facet that activity alone would have missed.
    pub merge: f64,
    /// Quadric membership: max |Φ_k(u)| for a point accepted as lying on the
    /// manifold, after the complement matrix rows are normalized to unit
    /// largest entry.
    pub membership: f64,
    /// Rank decisions: singular values below `rank_ratio * s_max` count as
    /// zero.
    pub rank_ratio: f64,
    /// Central finite-difference step for Jacobian checks.
    pub fd_step: f64,
    /// Finite-difference agreement: analytic and numerical Jacobians must
    /// match within `fd * (1 + ‖J‖∞)`.
    pub fd: f64,
    /// Distance from the affine image `{Ax + b}` beyond which a point is
    /// rejected as not coming from the base polytope, scaled by `(1 + ‖y‖∞)`.
    pub image: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            active_rel: 1e-9,
            merge: 1e-8,
            membership: 1e-9,
            rank_ratio: 1e-8,
            fd_step: 1e-5,
            fd: 1e-4,
            image: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn active(&self, b_inf_norm: f64) -> f64 {
        self.active_rel * (1.0 + b_inf_norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_between_related_tolerances() {
        let t = Tolerances::default();
        // merging must be coarser than activity, otherwise a merged vertex
        // could sit on a facet the activity test does not see
        assert!(t.merge > t.active_rel);
        // finite differences cannot certify agreement tighter than the step
        // squared, so the acceptance band sits well above it
        assert!(t.fd > t.fd_step * t.fd_step / 10.0);
        assert!(t.membership < t.image);
    }
}
