//! Points on the real moment-angle manifold and the sign action.
//!
//! The manifold `RZ_P` is the zero set of the quadric system inside `R^m`.
//! Over every point x of the polytope sits the orbit of the canonical
//! section `u_i = sqrt(a_i x + b_i)` under the componentwise sign action of
//! `Z_2^m`; coordinates vanish exactly on the facets active at x, so the
//! orbit has size `2^(m - #active)`. Smoothness at a point is certified by
//! the Jacobian `J_kj = 2 C_kj u_j` having full rank `m - n`.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gale::QuadricSystem;
use crate::geometry::Polytope;
use crate::tol::Tolerances;

/// An element of the sign group `{+1,-1}^m`, stored as a flip mask.
/// Composition is XOR; application negates the flagged coordinates, which is
/// exact in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignVector {
    mask: u64,
    len: usize,
}

impl SignVector {
    pub fn identity(len: usize) -> Self {
        assert!(len <= 64, "sign group limited to 64 facets");
        SignVector { mask: 0, len }
    }

    pub fn from_flips(len: usize, flips: &[usize]) -> Self {
        let mut s = Self::identity(len);
        for &j in flips {
            assert!(j < len);
            s.mask |= 1 << j;
        }
        s
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        assert!(len <= 64);
        let bits: u64 = rng.random();
        SignVector {
            mask: bits & mask_low(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sign(&self, j: usize) -> f64 {
        if self.mask >> j & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn compose(&self, other: &SignVector) -> SignVector {
        assert_eq!(self.len, other.len);
        SignVector {
            mask: self.mask ^ other.mask,
            len: self.len,
        }
    }

    /// Negate the flagged coordinates of a raw coordinate vector.
    pub fn apply_coords(&self, u: &DVector<f64>) -> DVector<f64> {
        assert_eq!(u.len(), self.len);
        DVector::from_fn(u.len(), |j, _| {
            if self.mask >> j & 1 == 1 {
                -u[j]
            } else {
                u[j]
            }
        })
    }
}

fn mask_low(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// A point of the manifold with its recorded quadric residual.
#[derive(Debug, Clone)]
pub struct ManifoldPoint {
    pub u: DVector<f64>,
    pub residual: f64,
}

impl ManifoldPoint {
    /// Wrap raw coordinates, measuring the residual against the system.
    pub fn new(qs: &QuadricSystem, u: DVector<f64>) -> Self {
        let residual = qs.residual_inf(&u);
        ManifoldPoint { u, residual }
    }

    /// Indices of exactly-zero coordinates: the stabilizer of the point
    /// under the sign action is generated by these.
    pub fn zero_set(&self) -> Vec<usize> {
        (0..self.u.len()).filter(|&j| self.u[j] == 0.0).collect()
    }

    /// Squared coordinates: the image in facet-functional space.
    pub fn orbit_project(&self) -> DVector<f64> {
        self.u.map(|v| v * v)
    }

    pub fn sign_apply(&self, s: &SignVector) -> ManifoldPoint {
        // squares are unchanged, so the residual carries over exactly
        ManifoldPoint {
            u: s.apply_coords(&self.u),
            residual: self.residual,
        }
    }
}

/// Canonical section over the polytope: componentwise square roots of the
/// facet functionals. Negative functionals within tolerance clamp to zero;
/// larger violations are an error.
pub fn section(p: &Polytope, qs: &QuadricSystem, x: &DVector<f64>) -> Result<ManifoldPoint> {
    lift_on_face(p, qs, x, &[])
}

/// Section lifted with a declared active set: the listed facet coordinates
/// are set to exactly zero, so the lift lands on the closed stratum even
/// though the functionals only vanish to rounding. Facets outside the list
/// must be genuinely nonnegative.
pub fn lift_on_face(
    p: &Polytope,
    qs: &QuadricSystem,
    x: &DVector<f64>,
    active: &[usize],
) -> Result<ManifoldPoint> {
    let mut y = p.embed(x);
    let tol = p.tol_active();
    for i in 0..y.len() {
        if y[i] < -tol {
            return Err(Error::OutsidePolytope {
                facet: i,
                violation: -y[i],
            });
        }
        if y[i] < 0.0 {
            y[i] = 0.0;
        }
    }
    for &i in active {
        debug_assert!(y[i].abs() <= tol, "declared active facet is not active");
        y[i] = 0.0;
    }
    let u = y.map(f64::sqrt);
    Ok(ManifoldPoint::new(qs, u))
}

/// Jacobian of the quadric system at a point: `J_kj = 2 C_kj u_j`.
pub fn jacobian(qs: &QuadricSystem, u: &DVector<f64>) -> DMatrix<f64> {
    let c = qs.coefficients();
    DMatrix::from_fn(c.nrows(), c.ncols(), |k, j| 2.0 * c[(k, j)] * u[j])
}

/// Smoothness certificate at a manifold point.
#[derive(Debug, Clone, Copy)]
pub struct RankReport {
    pub s_min: f64,
    pub s_max: f64,
    pub ratio: f64,
}

/// Certify that the quadric Jacobian has full rank `m - n` at `u`.
/// The point must be on the manifold first; an off-manifold input is a
/// precondition failure, not a rank result.
pub fn rank_certificate(
    qs: &QuadricSystem,
    u: &DVector<f64>,
    tol: &Tolerances,
) -> Result<RankReport> {
    let residual = qs.residual_inf(u);
    if residual > tol.membership {
        return Err(Error::OffManifold {
            residual,
            tol: tol.membership,
        });
    }
    let j = jacobian(qs, u);
    let svd = j.svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let ratio = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if !(ratio > tol.rank_ratio) {
        return Err(Error::RankDeficient {
            ratio,
            tol: tol.rank_ratio,
        });
    }
    Ok(RankReport { s_min, s_max, ratio })
}

/// Which closed stratum a sample was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stratum {
    Interior,
    Facet(usize),
    /// Codimension-2 face, identified by its two facets.
    Face(usize, usize),
    Vertex(usize),
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub point: ManifoldPoint,
    pub stratum: Stratum,
    /// Base point in the polytope the sample was lifted from.
    pub base: DVector<f64>,
}

/// Deterministic stratified sampler.
///
/// Returns exactly `count` points: for counts of at least ten the plan
/// reserves slots for vertex lifts (all vertices once the count allows),
/// facet-interior and codimension-2-face samples; the rest are interior
/// rejection samples. Boundary samples have their active coordinates exactly
/// zero. Every sample gets an independent random sign vector applied.
pub fn sample_points(
    p: &Polytope,
    qs: &QuadricSystem,
    count: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    assert!(count >= 1);
    let m = p.m();
    let nv = p.vertices().len();
    let mut plan: Vec<Stratum> = Vec::with_capacity(count);
    if count >= 10 {
        for v in 0..nv.min(count / 3) {
            plan.push(Stratum::Vertex(v));
        }
        let nf = (count / 5).min(count - plan.len() - 1);
        for k in 0..nf {
            plan.push(Stratum::Facet(k % m));
        }
        let faces = p.codim2_faces();
        if !faces.is_empty() {
            let ng = (count / 10).min(count - plan.len() - 1);
            for k in 0..ng {
                let (i, j) = faces[k % faces.len()];
                plan.push(Stratum::Face(i, j));
            }
        }
    }
    while plan.len() < count {
        plan.push(Stratum::Interior);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = p.bounding_box();
    let tol = p.tol_active();
    let mut out = Vec::with_capacity(count);
    let mut attempts: u64 = 0;
    let budget: u64 = 10_000 * count as u64;
    for stratum in plan {
        let (x, active) = match &stratum {
            Stratum::Interior => loop {
                attempts += 1;
                if attempts > budget {
                    return Err(Error::RejectionBudgetExceeded {
                        requested: count,
                        accepted: out.len(),
                        attempts,
                    });
                }
                let x = DVector::from_fn(p.n(), |k, _| rng.random_range(lo[k]..=hi[k]));
                if p.embed(&x).min() > tol {
                    break (x, Vec::new());
                }
            },
            Stratum::Facet(i) => (face_combination(p, &p.facet_vertices(*i), &mut rng), vec![*i]),
            Stratum::Face(i, j) => {
                let verts: Vec<usize> = p
                    .facet_vertices(*i)
                    .into_iter()
                    .filter(|v| p.vertices()[*v].active.contains(j))
                    .collect();
                (face_combination(p, &verts, &mut rng), vec![*i, *j])
            }
            Stratum::Vertex(v) => (
                p.vertices()[*v].point.clone(),
                p.vertices()[*v].active.clone(),
            ),
        };
        let lifted = lift_on_face(p, qs, &x, &active)?;
        let signs = SignVector::random(m, &mut rng);
        out.push(Sample {
            point: lifted.sign_apply(&signs),
            stratum,
            base: x,
        });
    }
    Ok(out)
}

/// Random convex combination of the listed vertices with positive weights:
/// lands in the relative interior of their span.
fn face_combination(p: &Polytope, verts: &[usize], rng: &mut impl Rng) -> DVector<f64> {
    assert!(!verts.is_empty(), "face has no vertices");
    let mut weights: Vec<f64> = verts
        .iter()
        .map(|_| -f64::ln(rng.random_range(1e-12..1.0f64)))
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut x = DVector::zeros(p.n());
    for (&v, &w) in verts.iter().zip(&weights) {
        x += &p.vertices()[v].point * w;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gale::complement_matrix;
    use crate::geometry::fixtures;

    #[test]
    fn section_of_simplex_barycenter() {
        let p = fixtures::simplex(2);
        let qs = complement_matrix(&p);
        let x = DVector::from_element(2, 1.0 / 3.0);
        let mp = section(&p, &qs, &x).unwrap();
        let expected = (1.0f64 / 3.0).sqrt();
        for j in 0..3 {
            assert!((mp.u[j] - expected).abs() < 1e-12);
        }
        assert!(mp.residual < 1e-12);
    }

    #[test]
    fn section_rejects_outside_points() {
        let p = fixtures::square();
        let qs = complement_matrix(&p);
        let x = DVector::from_row_slice(&[1.5, 0.5]);
        match section(&p, &qs, &x) {
            Err(Error::OutsidePolytope { facet: 1, .. }) => {}
            other => panic!("expected OutsidePolytope(1), got {other:?}"),
        }
    }

    #[test]
    fn sign_action_preserves_membership_exactly() {
        let p = fixtures::pentagon();
        let qs = complement_matrix(&p);
        let x = DVector::from_row_slice(&[0.4, 0.7]);
        let mp = section(&p, &qs, &x).unwrap();
        let s = SignVector::from_flips(5, &[0, 2, 3]);
        let flipped = mp.sign_apply(&s);
        // squares agree bitwise, so residuals agree bitwise
        assert_eq!(
            qs.residual_inf(&flipped.u).to_bits(),
            qs.residual_inf(&mp.u).to_bits()
        );
        assert_eq!(s.compose(&s), SignVector::identity(5));
    }

    #[test]
    fn orbit_projection_recovers_base_point() {
        let p = fixtures::cube();
        let qs = complement_matrix(&p);
        let x = DVector::from_row_slice(&[0.2, 0.8, 0.5]);
        let mp = section(&p, &qs, &x).unwrap();
        let y = mp.orbit_project();
        let back = p.project_to_base(&y, &Tolerances::default()).unwrap();
        assert!((back - &x).amax() < 1e-10);
    }

    #[test]
    fn simplex_jacobian_at_pole() {
        let p = fixtures::simplex(2);
        let qs = complement_matrix(&p);
        let u = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        let j = jacobian(&qs, &u);
        assert_eq!(j.nrows(), 1);
        assert!((j[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(j[(0, 1)].abs() < 1e-15 && j[(0, 2)].abs() < 1e-15);
        let report = rank_certificate(&qs, &u, &Tolerances::default()).unwrap();
        assert!((report.s_min - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_check_requires_membership() {
        let p = fixtures::simplex(2);
        let qs = complement_matrix(&p);
        let u = DVector::zeros(3); // not on the manifold: residual is 1
        match rank_certificate(&qs, &u, &Tolerances::default()) {
            Err(Error::OffManifold { residual, .. }) => {
                assert!((residual - 1.0).abs() < 1e-15)
            }
            other => panic!("expected OffManifold, got {other:?}"),
        }
    }

    #[test]
    fn torus_rank_on_explicit_system() {
        // independent of the computed complement basis: the canonical rows
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let qs = QuadricSystem::from_parts(c, DVector::from_row_slice(&[1.0, 1.0]));
        let u = DVector::from_row_slice(&[1.0, 0.0, 1.0, 0.0]);
        let j = jacobian(&qs, &u);
        assert_eq!(j[(0, 0)], 2.0);
        assert_eq!(j[(1, 2)], 2.0);
        let report = rank_certificate(&qs, &u, &Tolerances::default()).unwrap();
        assert!((report.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_is_deterministic_and_stratified() {
        let p = fixtures::cube();
        let qs = complement_matrix(&p);
        let a = sample_points(&p, &qs, 200, 42).unwrap();
        let b = sample_points(&p, &qs, 200, 42).unwrap();
        assert_eq!(a.len(), 200);
        for (s, t) in a.iter().zip(&b) {
            assert_eq!(s.point.u, t.point.u);
            assert_eq!(s.stratum, t.stratum);
        }
        // all eight vertices appear, every facet and every edge is probed
        let vertices = a
            .iter()
            .filter(|s| matches!(s.stratum, Stratum::Vertex(_)))
            .count();
        assert_eq!(vertices, 8);
        for i in 0..6 {
            assert!(a.iter().any(|s| s.stratum == Stratum::Facet(i)));
        }
        assert!(p
            .codim2_faces()
            .iter()
            .all(|&(i, j)| a.iter().any(|s| s.stratum == Stratum::Face(i, j))));
        let c = sample_points(&p, &qs, 200, 43).unwrap();
        assert!(a.iter().zip(&c).any(|(s, t)| s.point.u != t.point.u));
    }

    #[test]
    fn samples_lie_on_manifold_with_exact_zero_strata() {
        for p in fixtures::all() {
            let qs = complement_matrix(&p);
            let samples = sample_points(&p, &qs, 120, 7).unwrap();
            for s in &samples {
                assert!(s.point.residual < 1e-9, "residual on {}", p.name);
                let zeros = s.point.zero_set();
                match s.stratum {
                    Stratum::Interior => assert!(zeros.is_empty()),
                    Stratum::Facet(i) => assert!(zeros.contains(&i)),
                    Stratum::Face(i, j) => {
                        assert!(zeros.contains(&i) && zeros.contains(&j))
                    }
                    Stratum::Vertex(v) => {
                        assert_eq!(zeros, p.vertices()[v].active)
                    }
                }
            }
        }
    }

    #[test]
    fn single_sample_request_yields_one_interior_point() {
        let p = fixtures::simplex(2);
        let qs = complement_matrix(&p);
        let s = sample_points(&p, &qs, 1, 9).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].stratum, Stratum::Interior);
        assert!(s[0].point.residual < 1e-9);
    }
}
