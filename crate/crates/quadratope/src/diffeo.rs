//! Equivariant lifts of base-polytope diffeomorphisms.
//!
//! A facet-compatible map between two simple polytopes sends facet i of the
//! source onto facet `sigma(i)` of the target. Any such map `g` lifts to a
//! sign-equivariant homeomorphism between the real moment-angle manifolds:
//!
//! ```text
//! f(u)_j = sign(u_j) * sqrt(a'_j g(x) + b'_j),   x = base point under u
//! ```
//!
//! The lift squares the coordinates to recover a base point, pushes it
//! through `g`, and takes signed square roots of the target facet
//! functionals. Coordinates that are exactly zero stay exactly zero, which is
//! what makes the construction equivariant at the bit level and also what
//! exposes a wrong facet pairing: a zero forced into the wrong slot leaves
//! the target quadric system and [`LiftedMap::apply`] reports it.
//!
//! [`BaseMap`] realizes `g` as an affine equivalence (solved from vertex
//! correspondences and certified facet by facet), as the corner-smoothing
//! self-map of a [`CollarSystem`], as user-supplied closures, or as a
//! composition of those. [`verify_wall_derivatives`] checks the one-sided
//! derivative structure of the lift across the coordinate walls and
//! [`verify_equivariant_diffeo`] aggregates the full certificate.

use crate::collar::CollarSystem;
use crate::error::{Error, Result};
use crate::gale::{complement_matrix, QuadricSystem};
use crate::geometry::{validate_hrep, Polytope};
use crate::manifold::{sample_points, Sample, SignVector};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

type PointMap = Arc<dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync>;

/// A facet-compatible map `g : P -> Q` together with its inverse.
///
/// The target is stored reindexed by the facet pairing, so facet i of the
/// source corresponds to facet i of [`BaseMap::target`]; the original pairing
/// is kept for reporting.
#[derive(Clone)]
pub struct BaseMap {
    source: Polytope,
    target: Polytope,
    sigma: Vec<usize>,
    realization: Realization,
}

#[derive(Clone)]
enum Realization {
    Affine {
        fwd: (DMatrix<f64>, DVector<f64>),
        inv: (DMatrix<f64>, DVector<f64>),
        lambda: Vec<f64>,
    },
    Structure(Box<CollarSystem>),
    User { fwd: PointMap, inv: PointMap },
    Chain(Box<BaseMap>, Box<BaseMap>),
}

impl fmt::Debug for BaseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BaseMap")
            .field("kind", &self.kind())
            .field("source", &self.source.name)
            .field("target", &self.target.name)
            .field("sigma", &self.sigma)
            .finish()
    }
}

fn check_pairing(p: &Polytope, q: &Polytope, sigma: &[usize]) -> Result<()> {
    if p.n() != q.n() || p.m() != q.m() {
        return Err(Error::NotEquivalent {
            reason: format!(
                "facet/dimension counts differ: {}x{} vs {}x{}",
                p.m(),
                p.n(),
                q.m(),
                q.n()
            ),
        });
    }
    let mut seen = vec![false; q.m()];
    if sigma.len() != p.m() || sigma.iter().any(|&i| i >= q.m() || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::NotEquivalent {
            reason: format!("facet pairing {sigma:?} is not a permutation of 0..{}", q.m()),
        });
    }
    Ok(())
}

/// Rebuild the target with its facet rows permuted so the pairing becomes the
/// identity. Row permutation changes no geometry, so validation cannot fail
/// for a polytope that validated once; errors are propagated anyway.
fn reindex(q: &Polytope, sigma: &[usize], tols: &Tolerances) -> Result<Polytope> {
    let (m, n) = (q.m(), q.n());
    let a = DMatrix::from_fn(m, n, |r, c| q.a()[(sigma[r], c)]);
    let b = DVector::from_fn(m, |r, _| q.b()[sigma[r]]);
    validate_hrep(&q.name, a, b, tols)
}

impl BaseMap {
    /// Solve for the affine equivalence realizing `sigma` and certify it.
    ///
    /// Matching vertices by their facet sets gives the point correspondences;
    /// a least-squares fit over all of them yields `g(x) = Mx + d`. The map
    /// is accepted only if every vertex lands on its partner and every target
    /// facet functional pulls back to a positive multiple of its source
    /// partner.
    pub fn affine(p: &Polytope, q: &Polytope, sigma: &[usize], tols: &Tolerances) -> Result<BaseMap> {
        check_pairing(p, q, sigma)?;
        let target = reindex(q, sigma, tols)?;
        if p.vertices().len() != target.vertices().len() {
            return Err(Error::NotEquivalent {
                reason: format!(
                    "vertex counts differ: {} vs {}",
                    p.vertices().len(),
                    target.vertices().len()
                ),
            });
        }
        let mut partners = Vec::with_capacity(p.vertices().len());
        for v in p.vertices() {
            match target.vertices().iter().find(|w| w.active == v.active) {
                Some(w) => partners.push((&v.point, &w.point)),
                None => {
                    return Err(Error::NotEquivalent {
                        reason: format!(
                            "pairing is not combinatorial: no target vertex lies on facets {:?}",
                            v.active
                        ),
                    })
                }
            }
        }

        // Least squares for [M | d] over the vertex correspondences.
        let n = p.n();
        let nv = partners.len();
        let mut design = DMatrix::zeros(nv, n + 1);
        let mut images = DMatrix::zeros(nv, n);
        for (r, (x, gx)) in partners.iter().enumerate() {
            for c in 0..n {
                design[(r, c)] = x[c];
                images[(r, c)] = gx[c];
            }
            design[(r, n)] = 1.0;
        }
        let theta = design
            .svd(true, true)
            .solve(&images, 1e-13)
            .map_err(|_| Error::NotAffinelyEquivalent { residual: f64::INFINITY })?;
        let map = theta.rows(0, n).transpose();
        let offset = theta.row(n).transpose();

        let scale = partners
            .iter()
            .flat_map(|(x, gx)| [x.amax(), gx.amax()])
            .fold(1.0, f64::max);
        let worst = partners
            .iter()
            .map(|(x, gx)| (&map * *x + &offset - *gx).amax())
            .fold(0.0, f64::max);
        if worst > tols.merge * scale {
            return Err(Error::NotAffinelyEquivalent { residual: worst });
        }

        // Facet functionals must pull back proportionally with positive scale:
        // a'_i (Mx + d) + b'_i = lambda_i (a_i x + b_i).
        let mut lambda = Vec::with_capacity(p.m());
        for i in 0..p.m() {
            let pulled = (target.a().row(i) * &map).transpose();
            let j = (0..n).max_by(|&a, &b| p.a()[(i, a)].abs().total_cmp(&p.a()[(i, b)].abs())).unwrap();
            let li = pulled[j] / p.a()[(i, j)];
            let row_gap = (0..n).map(|c| (pulled[c] - li * p.a()[(i, c)]).abs()).fold(0.0, f64::max);
            let offset_gap = (target.a().row(i).transpose().dot(&offset) + target.b()[i] - li * p.b()[i]).abs();
            let gap = row_gap.max(offset_gap);
            if gap > tols.merge * (1.0 + li.abs()) || li <= 0.0 {
                return Err(Error::NotAffinelyEquivalent { residual: if li <= 0.0 { li } else { gap } });
            }
            lambda.push(li);
        }

        let map_inv = map
            .clone()
            .try_inverse()
            .ok_or(Error::NotAffinelyEquivalent { residual: f64::INFINITY })?;
        let offset_inv = -(&map_inv * &offset);
        Ok(BaseMap {
            source: p.clone(),
            target,
            sigma: sigma.to_vec(),
            realization: Realization::Affine {
                fwd: (map, offset),
                inv: (map_inv, offset_inv),
                lambda,
            },
        })
    }

    /// The corner-smoothing self-map of `collars.polytope()`, exchanging the
    /// linear corner structure for the quadratic one. Its facet pairing is
    /// the identity.
    pub fn structure(collars: CollarSystem) -> BaseMap {
        let p = collars.polytope().clone();
        let sigma = (0..p.m()).collect();
        BaseMap {
            source: p.clone(),
            target: p,
            sigma,
            realization: Realization::Structure(Box::new(collars)),
        }
    }

    /// Wrap user-supplied forward and inverse evaluators. The closures are
    /// trusted to realize the declared pairing; the lift checks every output
    /// against the target quadrics, so a wrong pairing surfaces as
    /// [`Error::TargetMembershipViolation`] instead of silent nonsense.
    pub fn user<F, G>(p: &Polytope, q: &Polytope, sigma: &[usize], fwd: F, inv: G, tols: &Tolerances) -> Result<BaseMap>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        check_pairing(p, q, sigma)?;
        let target = reindex(q, sigma, tols)?;
        Ok(BaseMap {
            source: p.clone(),
            target,
            sigma: sigma.to_vec(),
            realization: Realization::User {
                fwd: Arc::new(fwd),
                inv: Arc::new(inv),
            },
        })
    }

    /// Compose two base maps, first then second.
    pub fn compose(first: BaseMap, second: BaseMap) -> Result<BaseMap> {
        let mid_gap = if first.target.m() == second.source.m() && first.target.n() == second.source.n() {
            (first.target.a() - second.source.a())
                .amax()
                .max((first.target.b() - second.source.b()).amax())
        } else {
            f64::INFINITY
        };
        if mid_gap > 1e-12 * (1.0 + second.source.b().amax()) {
            return Err(Error::NotEquivalent {
                reason: format!(
                    "intermediate polytopes differ by {mid_gap:.3e}; cannot chain {} -> {} with {} -> {}",
                    first.source.name, first.target.name, second.source.name, second.target.name
                ),
            });
        }
        // First's reindexed target facet i is second's source facet i, so the
        // chain pairs source facet i with original-target facet sigma2(i).
        let sigma = second.sigma.clone();
        Ok(BaseMap {
            source: first.source.clone(),
            target: second.target.clone(),
            sigma,
            realization: Realization::Chain(Box::new(first), Box::new(second)),
        })
    }

    pub fn source(&self) -> &Polytope {
        &self.source
    }

    /// Target polytope, facet rows permuted so the pairing is the identity.
    pub fn target(&self) -> &Polytope {
        &self.target
    }

    /// Original facet pairing: source facet i maps onto input-target facet
    /// `pairing()[i]`.
    pub fn pairing(&self) -> &[usize] {
        &self.sigma
    }

    pub fn kind(&self) -> &'static str {
        match &self.realization {
            Realization::Affine { .. } => "affine",
            Realization::Structure(_) => "structure-composite",
            Realization::User { .. } => "user-supplied",
            Realization::Chain(..) => "composite",
        }
    }

    /// Per-facet functional scales `lambda_i` for affine maps.
    pub fn facet_scales(&self) -> Option<&[f64]> {
        match &self.realization {
            Realization::Affine { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.realization {
            Realization::Affine { fwd: (m, d), .. } => Ok(m * x + d),
            Realization::Structure(c) => c.linear_to_quadratic(x),
            Realization::User { fwd, .. } => fwd(x),
            Realization::Chain(a, b) => b.apply(&a.apply(x)?),
        }
    }

    pub fn inverse_apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.realization {
            Realization::Affine { inv: (m, d), .. } => Ok(m * x + d),
            Realization::Structure(c) => c.quadratic_to_linear(x),
            Realization::User { inv, .. } => inv(x),
            Realization::Chain(a, b) => a.inverse_apply(&b.inverse_apply(x)?),
        }
    }

    /// Whether wall derivatives of the lift are naturally expressed in the
    /// linear chart coordinates of the source. The corner-smoothing map goes
    /// from the linear to the quadratic structure, so its chart
    /// representation collapses to the identity in linear coordinates;
    /// affine and user maps relate two quadratic structures and use
    /// square-root coordinates on both sides.
    fn linear_source_chart(&self) -> bool {
        match &self.realization {
            Realization::Structure(_) => true,
            Realization::Chain(a, _) => a.linear_source_chart(),
            _ => false,
        }
    }
}

/// Sign lift of a base map to the real moment-angle manifolds.
#[derive(Debug, Clone)]
pub struct LiftedMap {
    base: BaseMap,
    source_system: QuadricSystem,
    target_system: QuadricSystem,
}

/// Lift a base map to the manifolds over its source and target.
pub fn lift(base: BaseMap) -> LiftedMap {
    let source_system = complement_matrix(base.source());
    let target_system = complement_matrix(base.target());
    LiftedMap {
        base,
        source_system,
        target_system,
    }
}

fn half_lift(
    u: &DVector<f64>,
    src: &Polytope,
    tgt: &Polytope,
    map: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    tols: &Tolerances,
) -> Result<DVector<f64>> {
    let y = u.component_mul(u);
    let x = src.project_to_base(&y, tols)?;
    let gx = map(&x)?;
    let yt = tgt.embed(&gx);
    // copysign in both branches transfers the sign bit exactly, zeros
    // included, so conjugating by a sign vector commutes bit for bit.
    Ok(DVector::from_fn(u.len(), |j, _| {
        let magnitude = if u[j] == 0.0 { 0.0 } else { yt[j].max(0.0).sqrt() };
        magnitude.copysign(u[j])
    }))
}

impl LiftedMap {
    pub fn base(&self) -> &BaseMap {
        &self.base
    }

    pub fn source_system(&self) -> &QuadricSystem {
        &self.source_system
    }

    pub fn target_system(&self) -> &QuadricSystem {
        &self.target_system
    }

    /// Apply the lift and reject outputs that miss the target manifold.
    ///
    /// The zero slots of `u` are forced to zero in the output, so if the base
    /// map does not actually send facet i to facet i of the reindexed target
    /// the result violates a target quadric by a facet-sized amount.
    pub fn apply(&self, u: &DVector<f64>, tols: &Tolerances) -> Result<DVector<f64>> {
        let out = self.apply_raw(u, tols)?;
        let residual = self.target_system.residual_inf(&out);
        let allowed = tols.image * (1.0 + out.amax() * out.amax());
        if residual > allowed {
            return Err(Error::TargetMembershipViolation { residual, tol: allowed });
        }
        Ok(out)
    }

    pub fn inverse_apply(&self, u: &DVector<f64>, tols: &Tolerances) -> Result<DVector<f64>> {
        let out = self.inverse_apply_raw(u, tols)?;
        let residual = self.source_system.residual_inf(&out);
        let allowed = tols.image * (1.0 + out.amax() * out.amax());
        if residual > allowed {
            return Err(Error::TargetMembershipViolation { residual, tol: allowed });
        }
        Ok(out)
    }

    fn apply_raw(&self, u: &DVector<f64>, tols: &Tolerances) -> Result<DVector<f64>> {
        half_lift(u, &self.base.source, &self.base.target, |x| self.base.apply(x), tols)
    }

    fn inverse_apply_raw(&self, u: &DVector<f64>, tols: &Tolerances) -> Result<DVector<f64>> {
        half_lift(u, &self.base.target, &self.base.source, |x| self.base.inverse_apply(x), tols)
    }
}

fn one_sided_column(
    eval: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    at: &DVector<f64>,
    dir: usize,
    h: f64,
) -> Result<DVector<f64>> {
    let f0 = eval(at)?;
    let mut a1 = at.clone();
    a1[dir] += h;
    let mut a2 = at.clone();
    a2[dir] += 2.0 * h;
    Ok((-3.0 * f0 + 4.0 * eval(&a1)? - eval(&a2)?) / (2.0 * h))
}

fn central_column(
    eval: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    at: &DVector<f64>,
    dir: usize,
    h: f64,
) -> Result<DVector<f64>> {
    let mut ap = at.clone();
    ap[dir] += h;
    let mut am = at.clone();
    am[dir] -= h;
    Ok((eval(&ap)? - eval(&am)?) / (2.0 * h))
}

/// First vertex whose facet set contains every index in `zeros`.
fn covering_vertex(p: &Polytope, zeros: &[usize]) -> Option<usize> {
    p.vertices()
        .iter()
        .position(|v| zeros.iter().all(|z| v.active.contains(z)))
}

#[derive(Debug, Clone, Serialize)]
pub struct WallDerivativeReport {
    /// Number of (sample, wall) pairs checked.
    pub wall_probes: usize,
    /// Smallest diagonal one-sided derivative seen, in chart coordinates.
    pub min_diagonal: f64,
    /// Largest off-diagonal entry of any wall column, in chart coordinates.
    pub max_off_diagonal: f64,
    /// Largest relative gap between the one-sided ambient columns taken
    /// into the two sign sectors meeting at the wall.
    pub max_continuity_gap: f64,
}

/// Check the one-sided derivative structure of the lift across walls.
///
/// At every sampled point with zero coordinates, and for each zero slot, the
/// map is written in vertex-chart coordinates around a vertex covering all
/// the zeros and differentiated one-sidedly into the wall. Facet
/// compatibility forces the wall column to be diagonal with a strictly
/// positive entry; in ambient coordinates the one-sided columns taken into
/// the two sign sectors on either side of the wall must agree, which is the
/// finite-difference version of C1 regularity across the wall.
pub fn verify_wall_derivatives(
    lifted: &LiftedMap,
    count: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<WallDerivativeReport> {
    let base = &lifted.base;
    let p = base.source();
    let linear = base.linear_source_chart();
    let samples = sample_points(p, &lifted.source_system, count, seed)?;

    let mut report = WallDerivativeReport {
        wall_probes: 0,
        min_diagonal: f64::INFINITY,
        max_off_diagonal: 0.0,
        max_continuity_gap: 0.0,
    };

    for sample in &samples {
        let zeros = sample.point.zero_set();
        if zeros.is_empty() {
            continue;
        }
        let Some(v) = covering_vertex(p, &zeros) else { continue };
        let chart = p.vertex_chart(v)?;
        let omega: Vec<usize> = p.vertices()[v].active.clone();
        let n = p.n();

        let y = p.embed(&sample.base);
        let mut coords = DVector::from_fn(n, |k, _| {
            let yk = y[omega[k]].max(0.0);
            if linear { yk } else { yk.sqrt() }
        });

        let target = base.target();
        // Chart representation of the lift, not just of the base map: zero
        // input coordinates force zero outputs exactly, like the lift does.
        // Otherwise roundoff in the base map puts O(eps) under the square
        // root at the wall and the stencil amplifies sqrt(eps) by 1/h.
        let chart_eval = |c: &DVector<f64>| -> Result<DVector<f64>> {
            let yc = if linear { c.clone() } else { c.component_mul(c) };
            let gx = base.apply(&chart.point(&yc))?;
            let yt = target.embed(&gx);
            Ok(DVector::from_fn(n, |k, _| {
                if c[k] == 0.0 { 0.0 } else { yt[omega[k]].max(0.0).sqrt() }
            }))
        };
        let ambient_eval = |u: &DVector<f64>| -> Result<DVector<f64>> { lifted.apply_raw(u, tols) };

        for &l in &zeros {
            let pos = chart.omega_position(l).expect("covering vertex contains the wall");
            coords[pos] = 0.0;
            let h = tols.fd_step * (1.0 + coords.amax());

            let column = one_sided_column(&chart_eval, &coords, pos, h)?;
            let diagonal = column[pos];
            let off = (0..n)
                .filter(|&k| k != pos)
                .map(|k| column[k].abs())
                .fold(0.0, f64::max);
            let scale = 1.0 + column.amax();
            if diagonal <= 0.0 || off > tols.fd * scale {
                return Err(Error::WallDerivativeViolation {
                    facet: l,
                    detail: format!(
                        "chart column at vertex {v}: diagonal {diagonal:.6e}, off-diagonal {off:.3e} (tol {:.3e})",
                        tols.fd * scale
                    ),
                });
            }
            report.min_diagonal = report.min_diagonal.min(diagonal);
            report.max_off_diagonal = report.max_off_diagonal.max(off / scale);

            // C1 matching across the wall in ambient coordinates: the
            // one-sided derivative columns taken from the two sign sectors,
            // both anchored at the wall point, must agree. Anchoring at the
            // same point keeps curvature of the off-manifold extension of
            // the lift formula out of the comparison.
            let u = &sample.point.u;
            let hu = tols.fd_step * (1.0 + u.amax());
            let plus_col = one_sided_column(&ambient_eval, u, l, hu)?;
            let minus_col = one_sided_column(&ambient_eval, u, l, -hu)?;
            let denom = 1.0 + plus_col.amax().max(minus_col.amax());
            let gap = (&plus_col - &minus_col).amax() / denom;
            if gap > tols.fd {
                return Err(Error::WallDerivativeViolation {
                    facet: l,
                    detail: format!("one-sided limits disagree: relative gap {gap:.3e} (tol {:.3e})", tols.fd),
                });
            }
            report.max_continuity_gap = report.max_continuity_gap.max(gap);
            report.wall_probes += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffeoCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Worst value seen: a residual for most checks, the smallest chart
    /// Jacobian determinant for the margin check.
    pub worst: f64,
    pub tol: f64,
}

/// Aggregated certificate for one lifted map.
#[derive(Debug, Clone, Serialize)]
pub struct DiffeoCertificate {
    pub pass: bool,
    pub probes: usize,
    pub sign_vectors: usize,
    pub checks: Vec<DiffeoCheck>,
}

impl DiffeoCertificate {
    pub fn check(&self, name: &str) -> Option<&DiffeoCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Verify that the lift is a sign-equivariant diffeomorphism on probes.
///
/// Draws `points` manifold samples and `sign_vectors` random sign vectors,
/// then checks: bit-identical equivariance of the lift under every sign
/// vector, membership of every image in the target quadric system,
/// round-trip residuals through the inverse (base and lift), a uniform lower
/// bound on chart Jacobian determinants, exact preservation of zero sets
/// (stabilizers), and compatibility of the induced orbit map with the base
/// map. A wrong facet pairing surfaces as a failed membership check carrying
/// the quadric residual.
pub fn verify_equivariant_diffeo(
    lifted: &LiftedMap,
    points: usize,
    sign_vectors: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<DiffeoCertificate> {
    let base = &lifted.base;
    let p = base.source();
    let samples = sample_points(p, &lifted.source_system, points, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas: Vec<SignVector> = (0..sign_vectors).map(|_| SignVector::random(p.m(), &mut rng)).collect();

    let mut membership_worst = 0.0_f64;
    let mut membership_pass = true;
    let mut bit_mismatches = 0usize;
    let mut round_trip_worst = 0.0_f64;
    let mut margin_worst = f64::INFINITY;
    let mut stabilizer_mismatches = 0usize;
    let mut orbit_worst = 0.0_f64;

    for sample in &samples {
        let u = &sample.point.u;
        let image = match lifted.apply(u, tols) {
            Ok(out) => out,
            Err(Error::TargetMembershipViolation { residual, .. }) => {
                membership_pass = false;
                membership_worst = membership_worst.max(residual);
                continue;
            }
            Err(e) => return Err(e),
        };
        membership_worst = membership_worst.max(lifted.target_system.residual_inf(&image));

        // Equivariance must hold bit for bit, signed zeros included.
        for sigma in &sigmas {
            let lifted_flip = lifted.apply_raw(&sigma.apply_coords(u), tols)?;
            let flipped_lift = sigma.apply_coords(&image);
            bit_mismatches += (0..u.len())
                .filter(|&j| lifted_flip[j].to_bits() != flipped_lift[j].to_bits())
                .count();
        }

        let back = lifted.inverse_apply(&image, tols)?;
        round_trip_worst = round_trip_worst.max((&back - u).amax());
        let gx = base.apply(&sample.base)?;
        round_trip_worst = round_trip_worst.max((&base.inverse_apply(&gx)? - &sample.base).amax());

        if image.iter().zip(u.iter()).any(|(a, b)| (*a == 0.0) != (*b == 0.0)) {
            stabilizer_mismatches += 1;
        }

        let orbit_gap = (&base.target().project_to_base(&image.component_mul(&image), tols)? - &gx).amax();
        orbit_worst = orbit_worst.max(orbit_gap);

        margin_worst = margin_worst.min(chart_jacobian_margin(lifted, sample, tols)?);
    }

    let margin_tol = 1e-6;
    let checks = vec![
        DiffeoCheck {
            name: "equivariance",
            pass: bit_mismatches == 0,
            worst: bit_mismatches as f64,
            tol: 0.0,
        },
        DiffeoCheck {
            name: "target_membership",
            pass: membership_pass && membership_worst <= tols.image,
            worst: membership_worst,
            tol: tols.image,
        },
        DiffeoCheck {
            name: "round_trip",
            pass: round_trip_worst <= tols.image,
            worst: round_trip_worst,
            tol: tols.image,
        },
        DiffeoCheck {
            name: "jacobian_margin",
            pass: margin_worst > margin_tol,
            worst: margin_worst,
            tol: margin_tol,
        },
        DiffeoCheck {
            name: "stabilizer",
            pass: stabilizer_mismatches == 0,
            worst: stabilizer_mismatches as f64,
            tol: 0.0,
        },
        DiffeoCheck {
            name: "orbit_compatibility",
            pass: orbit_worst <= tols.membership,
            worst: orbit_worst,
            tol: tols.membership,
        },
    ];
    Ok(DiffeoCertificate {
        pass: checks.iter().all(|c| c.pass),
        probes: samples.len(),
        sign_vectors: sigmas.len(),
        checks,
    })
}

/// |det| of the chart-coordinate Jacobian of the lift at one sample.
///
/// The chart is taken at a vertex covering the sample's zero set (nearest
/// vertex for interior points); wall directions are differentiated
/// one-sidedly, the rest centrally.
fn chart_jacobian_margin(lifted: &LiftedMap, sample: &Sample, tols: &Tolerances) -> Result<f64> {
    let base = &lifted.base;
    let p = base.source();
    let n = p.n();
    let linear = base.linear_source_chart();
    let zeros = sample.point.zero_set();
    let v = match covering_vertex(p, &zeros) {
        Some(v) => v,
        None => (0..p.vertices().len())
            .min_by(|&a, &b| {
                let da = (&p.vertices()[a].point - &sample.base).amax();
                let db = (&p.vertices()[b].point - &sample.base).amax();
                da.total_cmp(&db)
            })
            .expect("validated polytope has vertices"),
    };
    let chart = p.vertex_chart(v)?;
    let omega = p.vertices()[v].active.clone();

    let y = p.embed(&sample.base);
    let coords = DVector::from_fn(n, |k, _| {
        let yk = y[omega[k]].max(0.0);
        if linear { yk } else { yk.sqrt() }
    });
    let target = base.target();
    let eval = |c: &DVector<f64>| -> Result<DVector<f64>> {
        let yc = if linear { c.clone() } else { c.component_mul(c) };
        let gx = base.apply(&chart.point(&yc))?;
        let yt = target.embed(&gx);
        Ok(DVector::from_fn(n, |k, _| {
            if c[k] == 0.0 { 0.0 } else { yt[omega[k]].max(0.0).sqrt() }
        }))
    };

    let h = tols.fd_step * (1.0 + coords.amax());
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let column = if coords[k] < 10.0 * h {
            let mut at = coords.clone();
            at[k] = at[k].max(0.0);
            one_sided_column(&eval, &at, k, h)?
        } else {
            central_column(&eval, &coords, k, h)?
        };
        jac.set_column(k, &column);
    }
    Ok(jac.determinant().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;
    use approx::assert_abs_diff_eq;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn segment(name: &str, lo: f64, hi: f64) -> Polytope {
        validate_hrep(
            name,
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_column_slice(&[-lo, hi]),
            &tols(),
        )
        .unwrap()
    }

    fn scaled_square(name: &str, scale: f64, shift: f64) -> Polytope {
        let lo = shift;
        let hi = scale + shift;
        validate_hrep(
            name,
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
            DVector::from_column_slice(&[-lo, hi, -lo, hi]),
            &tols(),
        )
        .unwrap()
    }

    #[test]
    fn identity_lift_fixes_every_point() {
        let p = fixtures::square();
        let sigma = [0, 1, 2, 3];
        let lifted = lift(BaseMap::affine(&p, &p, &sigma, &tols()).unwrap());
        let samples = sample_points(&p, lifted.source_system(), 20, 0).unwrap();
        for s in &samples {
            let out = lifted.apply(&s.point.u, &tols()).unwrap();
            assert!((&out - &s.point.u).amax() < 1e-12);
            assert_eq!(
                crate::manifold::ManifoldPoint::new(lifted.target_system(), out).zero_set(),
                s.point.zero_set()
            );
        }
    }

    #[test]
    fn segment_doubling_matches_hand_computation() {
        let p = fixtures::simplex(1);
        let q = segment("segment2", 0.0, 2.0);
        let base = BaseMap::affine(&p, &q, &[0, 1], &tols()).unwrap();
        assert_eq!(base.kind(), "affine");
        let scales = base.facet_scales().unwrap();
        assert_abs_diff_eq!(scales[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scales[1], 2.0, epsilon = 1e-12);

        let lifted = lift(base);
        let u = DVector::from_column_slice(&[std::f64::consts::FRAC_1_SQRT_2; 2]);
        let out = lifted.apply(&u, &tols()).unwrap();
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-12);

        // Both walls scale by lambda = 2, so every chart diagonal is sqrt(2).
        let report = verify_wall_derivatives(&lifted, 12, 0, &tols()).unwrap();
        assert!(report.wall_probes >= 2);
        assert_abs_diff_eq!(report.min_diagonal, std::f64::consts::SQRT_2, epsilon = 1e-4);
        assert_eq!(report.max_off_diagonal, 0.0);
        assert!(report.max_continuity_gap < 1e-4);
    }

    #[test]
    fn affine_scales_are_recovered() {
        let p = fixtures::square();
        let q = scaled_square("square2", 2.0, 1.0);
        let base = BaseMap::affine(&p, &q, &[0, 1, 2, 3], &tols()).unwrap();
        for &s in base.facet_scales().unwrap() {
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-10);
        }
        let gx = base.apply(&DVector::from_column_slice(&[0.25, 0.5])).unwrap();
        assert_abs_diff_eq!(gx[0], 1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(gx[1], 2.0, epsilon = 1e-10);
        let back = base.inverse_apply(&gx).unwrap();
        assert_abs_diff_eq!(back[0], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let p = fixtures::square();
        let q = fixtures::quadrilateral();
        // The identity pairing is not even combinatorial for these two.
        match BaseMap::affine(&p, &q, &[0, 1, 2, 3], &tols()) {
            Err(Error::NotEquivalent { .. }) => {}
            other => panic!("expected combinatorial rejection, got {other:?}"),
        }
        // This pairing matches the facet adjacency cycles, but the
        // quadrilateral is not an affine image of the square.
        match BaseMap::affine(&p, &q, &[0, 2, 1, 3], &tols()) {
            Err(Error::NotAffinelyEquivalent { residual }) => assert!(residual > 1e-3),
            other => panic!("expected affine rejection, got {other:?}"),
        }
    }

    #[test]
    fn rotation_with_true_pairing_verifies() {
        // Quarter turn of the square about its center: facet 0 -> 2,
        // 1 -> 3, 2 -> 1, 3 -> 0.
        let p = fixtures::square();
        let base = BaseMap::affine(&p, &p, &[2, 3, 1, 0], &tols()).unwrap();
        let gx = base.apply(&DVector::from_column_slice(&[0.2, 0.7])).unwrap();
        assert_abs_diff_eq!(gx[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(gx[1], 0.2, epsilon = 1e-12);

        let lifted = lift(base);
        let cert = verify_equivariant_diffeo(&lifted, 24, 16, 0, &tols()).unwrap();
        assert!(cert.pass, "certificate: {cert:?}");
        assert_eq!(cert.check("equivariance").unwrap().worst, 0.0);
    }

    #[test]
    fn corrupted_pairing_is_caught_on_walls() {
        // Same quarter turn, but declared with the identity pairing: the
        // rotation sends facet 0 to facet 2, so zeros land in wrong slots.
        let p = fixtures::square();
        let rot = |x: &DVector<f64>| Ok(DVector::from_column_slice(&[1.0 - x[1], x[0]]));
        let rot_inv = |x: &DVector<f64>| Ok(DVector::from_column_slice(&[x[1], 1.0 - x[0]]));
        let base = BaseMap::user(&p, &p, &[0, 1, 2, 3], rot, rot_inv, &tols()).unwrap();
        let lifted = lift(base);

        let x = DVector::from_column_slice(&[0.0, 0.3]);
        let u = crate::manifold::section(&p, lifted.source_system(), &x).unwrap();
        match lifted.apply(&u.u, &tols()) {
            Err(Error::TargetMembershipViolation { residual, .. }) => assert!(residual > 0.1),
            other => panic!("expected membership violation, got {other:?}"),
        }

        let cert = verify_equivariant_diffeo(&lifted, 20, 8, 0, &tols()).unwrap();
        assert!(!cert.pass);
        let membership = cert.check("target_membership").unwrap();
        assert!(!membership.pass);
        assert!(membership.worst > 0.1);
    }

    #[test]
    fn composed_affine_lift_agrees_with_direct() {
        let p = fixtures::square();
        let q = scaled_square("square2", 2.0, 1.0);
        let r = scaled_square("squarehalf", 1.0, 0.5);
        let id = [0, 1, 2, 3];
        let first = BaseMap::affine(&p, &q, &id, &tols()).unwrap();
        let second = BaseMap::affine(&q, &r, &id, &tols()).unwrap();
        let chained = lift(BaseMap::compose(first, second).unwrap());
        let direct = lift(BaseMap::affine(&p, &r, &id, &tols()).unwrap());

        let samples = sample_points(&p, chained.source_system(), 15, 1).unwrap();
        for s in &samples {
            let a = chained.apply(&s.point.u, &tols()).unwrap();
            let b = direct.apply(&s.point.u, &tols()).unwrap();
            assert!((&a - &b).amax() < 1e-9);
        }
    }

    #[test]
    fn composition_requires_matching_middle() {
        let p = fixtures::square();
        let q = scaled_square("square2", 2.0, 1.0);
        let id = [0, 1, 2, 3];
        let first = BaseMap::affine(&p, &q, &id, &tols()).unwrap();
        let second = BaseMap::affine(&p, &q, &id, &tols()).unwrap();
        match BaseMap::compose(first, second) {
            Err(Error::NotEquivalent { .. }) => {}
            other => panic!("expected middle mismatch, got {other:?}"),
        }
    }

    #[test]
    fn structure_composite_lift_round_trips() {
        let p = fixtures::square();
        let collars = crate::collar::build_collars(&p, None).unwrap();
        let base = BaseMap::structure(collars);
        assert_eq!(base.kind(), "structure-composite");
        let lifted = lift(base);

        let samples = sample_points(&p, lifted.source_system(), 10, 3).unwrap();
        for s in &samples {
            let out = lifted.apply(&s.point.u, &tols()).unwrap();
            let back = lifted.inverse_apply(&out, &tols()).unwrap();
            assert!((&back - &s.point.u).amax() < 1e-8, "round trip {:?}", s.stratum);
        }
    }

    #[test]
    fn structure_composite_wall_diagonal_is_unit() {
        // In linear source coordinates the corner-smoothing map collapses to
        // the identity near each wall, so the chart diagonal is 1.
        let p = fixtures::square();
        let collars = crate::collar::build_collars(&p, None).unwrap();
        let lifted = lift(BaseMap::structure(collars));
        let report = verify_wall_derivatives(&lifted, 10, 0, &tols()).unwrap();
        assert!(report.wall_probes >= 4);
        assert_abs_diff_eq!(report.min_diagonal, 1.0, epsilon = 1e-4);
        assert!(report.max_off_diagonal < 1e-4);
        assert!(report.max_continuity_gap < 1e-4);
    }

    #[test]
    fn certificate_passes_for_cube_scaling() {
        let p = fixtures::cube();
        let q = validate_hrep(
            "cube2",
            DMatrix::from_row_slice(
                6,
                3,
                &[
                    1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0,
                ],
            ),
            DVector::from_column_slice(&[0.0, 2.0, 0.0, 2.0, 0.0, 2.0]),
            &tols(),
        )
        .unwrap();
        let base = BaseMap::affine(&p, &q, &[0, 1, 2, 3, 4, 5], &tols()).unwrap();
        let cert = verify_equivariant_diffeo(&lift(base), 30, 16, 0, &tols()).unwrap();
        assert!(cert.pass, "certificate: {cert:?}");
        assert_eq!(cert.check("equivariance").unwrap().worst, 0.0);
        assert_eq!(cert.check("stabilizer").unwrap().worst, 0.0);
        assert!(cert.check("jacobian_margin").unwrap().worst > 0.5);
    }
}
