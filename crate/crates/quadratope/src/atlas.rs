//! Charts on the manifold and on the base polytope, with transitions.
//!
//! Around a vertex v with facet set `omega`, the manifold splits into
//! `2^(m-n)` smooth charts `W_(v,eps)`: points whose off-omega coordinates
//! are nonzero with prescribed signs `eps`. Chart coordinates are the omega
//! coordinates themselves; the remaining ones are reconstructed as
//! `eps_j * sqrt(tilde_a_j . coords^2 + tilde_b_j)`. The base polytope
//! carries two parallel chart families over the same vertices: the *linear*
//! structure with coordinates `y = A_v x + b_v` and affine transitions, and
//! the *quadratic* structure with coordinates `sqrt(y)` and square-root
//! transitions. Charts are built on demand from [`VertexChart`] data; there
//! is no global atlas object to keep consistent.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gale::QuadricSystem;
use crate::geometry::{Polytope, VertexChart};
use crate::manifold::{section, ManifoldPoint, SignVector};
use crate::tol::Tolerances;

/// Which chart family a chart belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// Chart on the manifold, indexed by a sign choice off the vertex.
    Manifold,
    /// Linear-structure chart on the base polytope: coordinates `A_v x + b_v`.
    BaseLinear,
    /// Quadratic-structure chart on the base polytope: coordinates
    /// `sqrt(A_v x + b_v)`.
    BaseQuadratic,
}

/// Identifier of a chart: vertex, family, and (for manifold charts) one sign
/// per complement facet, aligned with the vertex chart's complement list.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartId {
    pub vertex: usize,
    pub kind: ChartKind,
    pub signs: Vec<f64>,
}

impl ChartId {
    pub fn manifold(vertex: usize, signs: Vec<f64>) -> Self {
        assert!(signs.iter().all(|&s| s == 1.0 || s == -1.0));
        ChartId {
            vertex,
            kind: ChartKind::Manifold,
            signs,
        }
    }

    pub fn linear(vertex: usize) -> Self {
        ChartId {
            vertex,
            kind: ChartKind::BaseLinear,
            signs: Vec::new(),
        }
    }

    pub fn quadratic(vertex: usize) -> Self {
        ChartId {
            vertex,
            kind: ChartKind::BaseQuadratic,
            signs: Vec::new(),
        }
    }

    /// The manifold chart around `vertex` containing `u`: signs are read off
    /// the point. Errors when a coordinate off the vertex vanishes.
    pub fn containing(p: &Polytope, vertex: usize, u: &DVector<f64>) -> Result<ChartId> {
        let vc = p.vertex_chart(vertex)?;
        let mut signs = Vec::with_capacity(vc.complement.len());
        for &j in &vc.complement {
            if u[j] == 0.0 {
                return Err(Error::NotInChart {
                    chart: format!("v{vertex}"),
                    reason: format!("coordinate {j} vanishes; the point sits on facet {j}"),
                });
            }
            signs.push(if u[j] > 0.0 { 1.0 } else { -1.0 });
        }
        Ok(ChartId::manifold(vertex, signs))
    }

    pub fn label(&self) -> String {
        match self.kind {
            ChartKind::BaseLinear => format!("v{}:lin", self.vertex),
            ChartKind::BaseQuadratic => format!("v{}:quad", self.vertex),
            ChartKind::Manifold => {
                let pat: String = self
                    .signs
                    .iter()
                    .map(|&s| if s > 0.0 { '+' } else { '-' })
                    .collect();
                format!("v{}[{pat}]", self.vertex)
            }
        }
    }

    fn sign_for(&self, vc: &VertexChart, facet: usize) -> Option<f64> {
        let k = vc.complement.iter().position(|&j| j == facet)?;
        Some(match self.kind {
            ChartKind::Manifold => self.signs[k],
            _ => 1.0,
        })
    }
}

/// Strict domain test in chart coordinates: every complement functional must
/// be positive. Manifold and quadratic charts square the coordinates first;
/// linear charts use them as they are.
pub fn chart_domain_contains(vc: &VertexChart, kind: ChartKind, coords: &DVector<f64>) -> bool {
    let arg = match kind {
        ChartKind::BaseLinear => coords.clone(),
        _ => coords.map(|v| v * v),
    };
    (0..vc.complement.len()).all(|k| vc.complement_functional(k, &arg) > 0.0)
}

/// Restrict a manifold point to chart coordinates. The point must have
/// nonzero off-vertex coordinates with the chart's signs.
pub fn to_chart(
    p: &Polytope,
    id: &ChartId,
    mp: &ManifoldPoint,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    assert_eq!(id.kind, ChartKind::Manifold, "base charts take polytope points");
    if mp.residual > tol.membership {
        return Err(Error::OffManifold {
            residual: mp.residual,
            tol: tol.membership,
        });
    }
    let vc = p.vertex_chart(id.vertex)?;
    for (k, &j) in vc.complement.iter().enumerate() {
        let v = mp.u[j];
        if v == 0.0 || (v > 0.0) != (id.signs[k] > 0.0) {
            return Err(Error::NotInChart {
                chart: id.label(),
                reason: format!("coordinate {j} is {v:.3e}, chart sign is {:+}", id.signs[k]),
            });
        }
    }
    Ok(DVector::from_fn(vc.omega.len(), |s, _| mp.u[vc.omega[s]]))
}

/// Rebuild the full manifold point from chart coordinates: omega entries
/// verbatim, the rest as signed square roots of the chart functionals.
pub fn from_chart(
    p: &Polytope,
    qs: &QuadricSystem,
    id: &ChartId,
    coords: &DVector<f64>,
    tol: &Tolerances,
) -> Result<ManifoldPoint> {
    assert_eq!(id.kind, ChartKind::Manifold);
    let vc = p.vertex_chart(id.vertex)?;
    let squares = coords.map(|v| v * v);
    let mut u = DVector::zeros(p.m());
    for (s, &i) in vc.omega.iter().enumerate() {
        u[i] = coords[s];
    }
    for (k, &j) in vc.complement.iter().enumerate() {
        let f = vc.complement_functional(k, &squares);
        if f <= 0.0 {
            return Err(Error::NotInChartDomain {
                chart: id.label(),
                facet: j,
                value: f,
            });
        }
        u[j] = id.signs[k] * f.sqrt();
    }
    let mp = ManifoldPoint::new(qs, u);
    if mp.residual > tol.membership {
        return Err(Error::OffManifold {
            residual: mp.residual,
            tol: tol.membership,
        });
    }
    Ok(mp)
}

/// Chart coordinates of a base-polytope point in the linear or quadratic
/// structure.
pub fn base_to_chart(p: &Polytope, id: &ChartId, x: &DVector<f64>) -> Result<DVector<f64>> {
    let vc = p.vertex_chart(id.vertex)?;
    let y = vc.coords(x);
    Ok(match id.kind {
        ChartKind::BaseLinear => y,
        ChartKind::BaseQuadratic => y.map(|v| v.max(0.0).sqrt()),
        ChartKind::Manifold => panic!("manifold charts take manifold points"),
    })
}

/// Base-polytope point with the given chart coordinates.
pub fn base_from_chart(p: &Polytope, id: &ChartId, coords: &DVector<f64>) -> Result<DVector<f64>> {
    let vc = p.vertex_chart(id.vertex)?;
    let y = match id.kind {
        ChartKind::BaseLinear => coords.clone(),
        ChartKind::BaseQuadratic => coords.map(|v| v * v),
        ChartKind::Manifold => panic!("manifold charts produce manifold points"),
    };
    Ok(vc.point(&y))
}

/// How one target coordinate is produced from source coordinates.
#[derive(Debug, Clone)]
enum Row {
    /// Target facet is also a source chart facet: copy that coordinate.
    Copy(usize),
    /// Target facet is reconstructed from the source functional.
    Reconstruct {
        sign: f64,
        tilde: DVector<f64>,
        offset: f64,
    },
}

/// Transition map between two charts of the same family and structure.
#[derive(Debug, Clone)]
pub struct TransitionMap {
    pub source: ChartId,
    pub target: ChartId,
    kind: ChartKind,
    source_chart: VertexChart,
    rows: Vec<Row>,
    /// Source coordinate positions whose sign the target chart prescribes,
    /// with the prescribed sign (manifold charts only).
    sign_checks: Vec<(usize, f64)>,
}

/// Build the transition from `source` to `target`. Defined only when the
/// overlap is nonempty: for manifold charts the signs must agree on every
/// facet that belongs to neither vertex.
pub fn transition(p: &Polytope, source: &ChartId, target: &ChartId) -> Result<TransitionMap> {
    assert_eq!(source.kind, target.kind, "transitions stay within one structure");
    let sc = p.vertex_chart(source.vertex)?;
    let tc = p.vertex_chart(target.vertex)?;
    if source.kind == ChartKind::Manifold {
        for (k, &j) in sc.complement.iter().enumerate() {
            if !tc.omega.contains(&j) {
                let target_sign = target.sign_for(&tc, j).expect("j off both vertices");
                if source.signs[k] != target_sign {
                    return Err(Error::EmptyOverlap {
                        from_chart: source.label(),
                        to_chart: target.label(),
                        facet: j,
                    });
                }
            }
        }
    }
    let rows = tc
        .omega
        .iter()
        .map(|&j| match sc.omega_position(j) {
            Some(pos) => Row::Copy(pos),
            None => {
                let k = sc
                    .complement
                    .iter()
                    .position(|&f| f == j)
                    .expect("facet off source omega");
                Row::Reconstruct {
                    sign: source.sign_for(&sc, j).expect("complement facet has a sign"),
                    tilde: sc.tilde_a().row(k).transpose(),
                    offset: sc.tilde_b()[k],
                }
            }
        })
        .collect();
    let mut sign_checks = Vec::new();
    if source.kind == ChartKind::Manifold {
        for (s, &i) in sc.omega.iter().enumerate() {
            if let Some(sign) = target.sign_for(&tc, i) {
                sign_checks.push((s, sign));
            }
        }
    }
    Ok(TransitionMap {
        source: source.clone(),
        target: target.clone(),
        kind: source.kind,
        source_chart: sc,
        rows,
        sign_checks,
    })
}

impl TransitionMap {
    /// Apply the transition to source chart coordinates.
    pub fn apply(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        for &(pos, sign) in &self.sign_checks {
            let v = coords[pos];
            if v == 0.0 || (v > 0.0) != (sign > 0.0) {
                return Err(Error::NotInChart {
                    chart: self.target.label(),
                    reason: format!(
                        "source coordinate {pos} is {v:.3e}, target sign is {sign:+}"
                    ),
                });
            }
        }
        let arg = match self.kind {
            ChartKind::BaseLinear => coords.clone(),
            _ => coords.map(|v| v * v),
        };
        let out = self
            .rows
            .iter()
            .map(|row| match row {
                Row::Copy(pos) => Ok(coords[*pos]),
                Row::Reconstruct {
                    sign,
                    tilde,
                    offset,
                } => {
                    let f = tilde.dot(&arg) + offset;
                    match self.kind {
                        ChartKind::BaseLinear => Ok(f),
                        _ => {
                            if f <= 0.0 {
                                return Err(Error::NotInChartDomain {
                                    chart: self.source.label(),
                                    facet: usize::MAX,
                                    value: f,
                                });
                            }
                            Ok(sign * f.sqrt())
                        }
                    }
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(DVector::from_vec(out))
    }

    /// Analytic Jacobian of the transition at source coordinates.
    pub fn jacobian(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let n = coords.len();
        let arg = match self.kind {
            ChartKind::BaseLinear => coords.clone(),
            _ => coords.map(|v| v * v),
        };
        DMatrix::from_fn(n, n, |r, q| match &self.rows[r] {
            Row::Copy(pos) => {
                if *pos == q {
                    1.0
                } else {
                    0.0
                }
            }
            Row::Reconstruct {
                sign,
                tilde,
                offset,
            } => match self.kind {
                ChartKind::BaseLinear => tilde[q],
                _ => {
                    let f = tilde.dot(&arg) + offset;
                    sign * tilde[q] * coords[q] / f.sqrt()
                }
            },
        })
    }

    /// Conservative distance of source coordinates from the transition's
    /// domain boundary: slack of every square-root functional over its
    /// gradient, and the absolute value of any sign-checked coordinate.
    pub fn boundary_margin(&self, coords: &DVector<f64>) -> f64 {
        let mut margin = f64::INFINITY;
        for &(pos, _) in &self.sign_checks {
            margin = margin.min(coords[pos].abs());
        }
        let quadratic = self.kind != ChartKind::BaseLinear;
        let arg = if quadratic {
            coords.map(|v| v * v)
        } else {
            coords.clone()
        };
        let mut rows: Vec<(&DVector<f64>, f64)> = Vec::new();
        for row in &self.rows {
            if let Row::Reconstruct { tilde, offset, .. } = row {
                rows.push((tilde, *offset));
            }
        }
        let sc = &self.source_chart;
        let owned: Vec<DVector<f64>> = (0..sc.complement.len())
            .map(|k| sc.tilde_a().row(k).transpose())
            .collect();
        for (k, t) in owned.iter().enumerate() {
            rows.push((t, sc.tilde_b()[k]));
        }
        for (tilde, offset) in rows {
            let f = tilde.dot(&arg) + offset;
            if f <= 0.0 {
                return 0.0;
            }
            let grad = if quadratic {
                2.0 * DVector::from_fn(coords.len(), |q, _| tilde[q] * coords[q]).norm()
            } else {
                tilde.norm()
            };
            if grad > 0.0 {
                margin = margin.min(f / grad);
            }
        }
        margin
    }
}

/// Result of a finite-difference smoothness check.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessReport {
    pub probes_checked: usize,
    pub probes_skipped: usize,
    pub max_residual: f64,
}

/// Compare the analytic transition Jacobian against central finite
/// differences at each probe. Probes closer than `10 h` to the domain
/// boundary are skipped rather than measured against a singular stencil.
pub fn verify_transition_smoothness(
    t: &TransitionMap,
    probes: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<SmoothnessReport> {
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    let mut bound: f64 = tol.fd;
    for s in probes {
        let margin = t.boundary_margin(s);
        if margin <= 10.0 * tol.fd_step {
            skipped += 1;
            continue;
        }
        // Derivatives of the square-root coordinates steepen like
        // margin^{-5/2} toward the chart boundary; shrinking the step with
        // the margin keeps the stencil truncation below the scaled bound.
        let h = tol.fd_step.min(margin / 200.0);
        let analytic = t.jacobian(s);
        let n = s.len();
        let mut ok = true;
        let mut fd = DMatrix::zeros(n, n);
        for q in 0..n {
            let mut hi = s.clone();
            let mut lo = s.clone();
            hi[q] += h;
            lo[q] -= h;
            match (t.apply(&hi), t.apply(&lo)) {
                (Ok(a), Ok(b)) => fd.set_column(q, &((a - b) / (2.0 * h))),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            skipped += 1;
            continue;
        }
        checked += 1;
        let residual = (&fd - &analytic).amax();
        worst = worst.max(residual);
        bound = bound.max(tol.fd * (1.0 + analytic.amax()));
    }
    let report = SmoothnessReport {
        probes_checked: checked,
        probes_skipped: skipped,
        max_residual: worst,
    };
    if worst > bound {
        return Err(Error::SmoothnessViolation {
            residual: worst,
            tol: bound,
        });
    }
    Ok(report)
}

/// Sample manifold points lying in the overlap of two charts, returned as
/// source chart coordinates.
pub fn overlap_probes(
    p: &Polytope,
    qs: &QuadricSystem,
    source: &ChartId,
    target: &ChartId,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<DVector<f64>>> {
    let sc = p.vertex_chart(source.vertex)?;
    let tc = p.vertex_chart(target.vertex)?;
    let mut flips = Vec::new();
    for (k, &j) in tc.complement.iter().enumerate() {
        if target.signs[k] < 0.0 {
            flips.push(j);
        }
    }
    for (k, &j) in sc.complement.iter().enumerate() {
        if tc.omega.contains(&j) && source.signs[k] < 0.0 {
            flips.push(j);
        }
    }
    flips.sort_unstable();
    flips.dedup();
    let signs = SignVector::from_flips(p.m(), &flips);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = p.bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    let budget = 10_000 * count as u64 + 10_000;
    while out.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::RejectionBudgetExceeded {
                requested: count,
                accepted: out.len(),
                attempts,
            });
        }
        let x = DVector::from_fn(p.n(), |k, _| rng.random_range(lo[k]..=hi[k]));
        if p.embed(&x).min() <= p.tol_active() {
            continue;
        }
        let mp = section(p, qs, &x)?.sign_apply(&signs);
        if let Ok(coords) = to_chart(p, source, &mp, tol) {
            out.push(coords);
        }
    }
    Ok(out)
}

/// Largest cocycle defect of the three pairwise transitions at one point:
/// going v1 -> v2 -> v3 must match going v1 -> v3 directly.
pub fn cocycle_residual(
    p: &Polytope,
    ids: [&ChartId; 3],
    u: &ManifoldPoint,
    tol: &Tolerances,
) -> Result<f64> {
    let c1 = to_chart(p, ids[0], u, tol)?;
    let t12 = transition(p, ids[0], ids[1])?;
    let t23 = transition(p, ids[1], ids[2])?;
    let t13 = transition(p, ids[0], ids[2])?;
    let via = t23.apply(&t12.apply(&c1)?)?;
    let direct = t13.apply(&c1)?;
    Ok((via - direct).amax())
}
