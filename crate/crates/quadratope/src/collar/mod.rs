//! Collar systems on a simple polytope and the corner-smoothing self-map.
//!
//! Each facet F_i carries a smooth inward vector field w_i with a_i·w_i = 1,
//! so its time-t flow lifts F_i to the level set {a_i x + b_i = t}. The
//! fields are blended from vertex-chart coordinate fields (columns of
//! A_v^{-1}) with a partition of unity over vertex stars; on a face F_i ∩ F_j
//! only vertices on both facets contribute, which makes the flows tangent to
//! shared facets to integrator precision. Composing flows over a face gives
//! the multcollar; reparametrizing its time arguments through the profile in
//! [`SmoothingFunction`] gives the map F that exchanges the linear and
//! quadratic smooth structures on the polytope.

mod xi;
pub use xi::SmoothingFunction;

use crate::error::{Error, Result};
use crate::geometry::{orthogonal_direction, Polytope};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};

/// Blended facet fields plus the smoothing profile, ready to flow.
#[derive(Debug, Clone)]
pub struct CollarSystem {
    polytope: Polytope,
    delta: f64,
    xi: SmoothingFunction,
    /// Per facet: the vertices on it and their chart coordinate fields.
    fields: Vec<Vec<(usize, DVector<f64>)>>,
    /// Per vertex: the facets it does not lie on.
    off_star: Vec<Vec<usize>>,
    /// Facet normals as column vectors, for gradient assembly.
    a_rows: Vec<DVector<f64>>,
    /// Partition sharpness; weights decay like exp(-decay / distance).
    decay: f64,
    containment_tol: f64,
}

/// Worst finite-difference C¹ defect of F expressed in vertex charts:
/// linear coordinates on the source, quadratic (square-root) coordinates on
/// the target.
#[derive(Debug, Clone)]
pub struct StructureDiffeoReport {
    pub delta: f64,
    pub c1_residual: f64,
    pub worst_facet: usize,
    pub worst_vertex: usize,
    pub probes: usize,
}

/// How fast partition weights die off, in units of the collar width. Sharp
/// enough that a vertex field contaminates a neighboring star by at most
/// ~e^-20 anywhere a residual is measured, mild enough that flow stiffness
/// stays far below the RK4 step.
const DECAY_WIDTHS: f64 = 8.0;

/// RK4 substeps per collar width.
const STEPS_PER_WIDTH: f64 = 64.0;

const NEWTON_BUDGET: u32 = 50;

/// Build the collar system, defaulting the width to a tenth of the smallest
/// vertex-to-facet clearance. All facet flows are probed from facet vertices
/// and centroids: they must advance the facet functional at unit rate, stay
/// inside the polytope, and preserve every face the start point lies on.
pub fn build_collars(p: &Polytope, delta: Option<f64>) -> Result<CollarSystem> {
    let delta = delta.unwrap_or(0.1 * p.min_clearance());
    assert!(delta > 0.0 && delta.is_finite());
    let xi = SmoothingFunction::new(delta)?;

    let mut fields = Vec::with_capacity(p.m());
    for i in 0..p.m() {
        let mut per_vertex = Vec::new();
        for v in p.facet_vertices(i) {
            let chart = p.vertex_chart(v)?;
            let w = chart
                .coordinate_field(i)
                .expect("facet_vertices returned a vertex on the facet");
            per_vertex.push((v, w));
        }
        fields.push(per_vertex);
    }
    let off_star = p
        .vertices()
        .iter()
        .map(|v| (0..p.m()).filter(|i| !v.active.contains(i)).collect())
        .collect();
    let a_rows = (0..p.m()).map(|i| p.a().row(i).transpose()).collect();

    let cs = CollarSystem {
        polytope: p.clone(),
        delta,
        xi,
        fields,
        off_star,
        a_rows,
        decay: DECAY_WIDTHS * delta,
        containment_tol: p.tol_active(),
    };
    cs.probe_invariants()?;
    Ok(cs)
}

impl CollarSystem {
    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn xi(&self) -> &SmoothingFunction {
        &self.xi
    }

    /// The blended facet field. Fails with `BlendFailure` where no vertex
    /// star covers the point (the point is outside every contributing star).
    pub fn field(&self, facet: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.blend(facet, x, false)?.0)
    }

    fn blend(
        &self,
        facet: usize,
        x: &DVector<f64>,
        want_grad: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.polytope.n();
        let y = self.polytope.embed(x);
        let mut den = 0.0;
        let mut num = DVector::zeros(n);
        let mut live: Vec<(f64, usize)> = Vec::new();
        for (slot, (v, w)) in self.fields[facet].iter().enumerate() {
            let mut s = 0.0;
            let mut dead = false;
            for &j in &self.off_star[*v] {
                if y[j] <= 0.0 {
                    dead = true;
                    break;
                }
                s += 1.0 / y[j];
            }
            if dead {
                continue;
            }
            let e = -self.decay * s;
            if e < -700.0 {
                continue;
            }
            let rho = e.exp();
            den += rho;
            num.axpy(rho, w, 1.0);
            live.push((rho, slot));
        }
        if den <= 0.0 {
            return Err(Error::BlendFailure {
                detail: format!(
                    "no vertex star of facet {facet} covers the point {:?}",
                    x.as_slice()
                ),
            });
        }
        let w = num / den;
        if !want_grad {
            return Ok((w, None));
        }
        // Dw = sum_v (w_v - w) (grad rho_v)ᵀ / den, with
        // grad rho_v = rho_v · decay · sum_{j off star} a_j / y_j².
        let mut grad = DMatrix::zeros(n, n);
        for &(rho, slot) in &live {
            let (v, wv) = &self.fields[facet][slot];
            let mut g = DVector::zeros(n);
            for &j in &self.off_star[*v] {
                g.axpy(1.0 / (y[j] * y[j]), &self.a_rows[j], 1.0);
            }
            g *= rho * self.decay / den;
            let diff = wv - &w;
            grad += diff * g.transpose();
        }
        Ok((w, Some(grad)))
    }

    fn step_count(&self, t: f64) -> usize {
        ((t / (self.delta / STEPS_PER_WIDTH)).ceil() as usize).max(1)
    }

    /// Time-t flow of the facet field, RK4 with a fixed substep of
    /// delta/64. Containment is enforced after every substep.
    pub fn flow(&self, facet: usize, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        assert!(t >= 0.0, "collar flows run forward");
        if t == 0.0 {
            return Ok(x.clone());
        }
        let steps = self.step_count(t);
        let h = t / steps as f64;
        let mut x = x.clone();
        for step in 0..steps {
            let k1 = self.field(facet, &x)?;
            let k2 = self.field(facet, &(&x + &k1 * (h / 2.0)))?;
            let k3 = self.field(facet, &(&x + &k2 * (h / 2.0)))?;
            let k4 = self.field(facet, &(&x + &k3 * h))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            self.check_inside(&x, (step + 1) as f64 * h)?;
        }
        Ok(x)
    }

    /// Flow together with its Jacobian with respect to the start point,
    /// integrated by the variational RK4 alongside the trajectory.
    pub fn flow_with_jacobian(
        &self,
        facet: usize,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        assert!(t >= 0.0, "collar flows run forward");
        let n = self.polytope.n();
        let mut m = DMatrix::identity(n, n);
        if t == 0.0 {
            return Ok((x.clone(), m));
        }
        let steps = self.step_count(t);
        let h = t / steps as f64;
        let mut x = x.clone();
        for step in 0..steps {
            let (k1, d1) = self.blend(facet, &x, true)?;
            let d1 = d1.unwrap();
            let m1 = &d1 * &m;
            let (k2, d2) = self.blend(facet, &(&x + &k1 * (h / 2.0)), true)?;
            let d2 = d2.unwrap();
            let m2 = &d2 * &(&m + &m1 * (h / 2.0));
            let (k3, d3) = self.blend(facet, &(&x + &k2 * (h / 2.0)), true)?;
            let d3 = d3.unwrap();
            let m3 = &d3 * &(&m + &m2 * (h / 2.0));
            let (k4, d4) = self.blend(facet, &(&x + &k3 * h), true)?;
            let d4 = d4.unwrap();
            let m4 = &d4 * &(&m + &m3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            m += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
            self.check_inside(&x, (step + 1) as f64 * h)?;
        }
        Ok((x, m))
    }

    fn check_inside(&self, x: &DVector<f64>, time: f64) -> Result<()> {
        let y = self.polytope.embed(x);
        for j in 0..self.polytope.m() {
            if y[j] < -self.containment_tol {
                return Err(Error::LeftPolytope {
                    facet: j,
                    value: y[j],
                    time,
                });
            }
        }
        Ok(())
    }

    /// Compose the facet flows over a face: the first listed facet is the
    /// outermost collar, so flows apply from the end of the list inward,
    /// matching composition order.
    pub fn multicollar(&self, face: &[usize], x: &DVector<f64>, t: &[f64]) -> Result<DVector<f64>> {
        assert_eq!(face.len(), t.len());
        let mut p = x.clone();
        for s in (0..face.len()).rev() {
            p = self.flow(face[s], &p, t[s])?;
        }
        Ok(p)
    }

    /// Largest discrepancy between the canonical composition order and other
    /// orders (all of them for faces of codimension ≤ 4, a fixed 24-element
    /// sample beyond that).
    pub fn multicollar_order_residual(
        &self,
        face: &[usize],
        x: &DVector<f64>,
        t: &[f64],
    ) -> Result<f64> {
        let base = self.multicollar(face, x, t)?;
        let mut worst = 0.0f64;
        for perm in permutations(face.len(), 24) {
            let f: Vec<usize> = perm.iter().map(|&s| face[s]).collect();
            let tt: Vec<f64> = perm.iter().map(|&s| t[s]).collect();
            let q = self.multicollar(&f, x, &tt)?;
            worst = worst.max((&q - &base).norm());
        }
        Ok(worst)
    }

    /// Commutation defect of two facet collars on probe points of their
    /// shared face, over a 3×3 grid of times below delta/2. Disjoint facets
    /// have nothing to commute and return zero.
    pub fn consistency_residual(&self, i: usize, j: usize, probes: usize) -> Result<f64> {
        let pts = self.face_probes(&[i, j], probes);
        if pts.is_empty() {
            return Ok(0.0);
        }
        let half = self.delta / 2.0;
        let grid = [0.25 * half, 0.5 * half, 0.75 * half];
        let mut worst = 0.0f64;
        for x in &pts {
            for &t1 in &grid {
                for &t2 in &grid {
                    let ij = self.flow(j, &self.flow(i, x, t1)?, t2)?;
                    let ji = self.flow(i, &self.flow(j, x, t2)?, t1)?;
                    worst = worst.max((ij - ji).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Deterministic probe points on the face cut out by `facets`: its
    /// centroid, its vertices, and vertex-centroid midpoints, truncated to
    /// `limit`. Empty when the facets share no face.
    fn face_probes(&self, facets: &[usize], limit: usize) -> Vec<DVector<f64>> {
        let verts = self.face_vertices(facets);
        if verts.is_empty() {
            return Vec::new();
        }
        let n = self.polytope.n();
        let mut c = DVector::zeros(n);
        for &v in &verts {
            c += &self.polytope.vertices()[v].point;
        }
        c /= verts.len() as f64;
        let mut pts = vec![c.clone()];
        for &v in &verts {
            pts.push(self.polytope.vertices()[v].point.clone());
        }
        for &v in &verts {
            pts.push((&self.polytope.vertices()[v].point + &c) * 0.5);
        }
        pts.truncate(limit.max(1));
        pts
    }

    fn face_vertices(&self, facets: &[usize]) -> Vec<usize> {
        self.polytope
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, v)| facets.iter().all(|f| v.active.contains(f)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Facets whose smoothing zone contains the point. The profile is the
    /// identity at and beyond its threshold, so wider collars would not move
    /// the point anyway; keeping the set minimal also keeps its common face
    /// nonempty for any width that passes the build probes.
    pub fn active_collars(&self, p: &DVector<f64>) -> Vec<usize> {
        let y = self.polytope.embed(p);
        (0..self.polytope.m())
            .filter(|&i| y[i] < self.xi.identity_threshold())
            .collect()
    }

    /// Recover the face point and time vector that the multicollar sends to
    /// `p`: damped Newton on (x, t) ↦ multicollar(x, t), seeded from the
    /// orthogonal projection onto the face and the facet functionals of `p`.
    pub fn invert_multicollar(
        &self,
        face: &[usize],
        p: &DVector<f64>,
    ) -> Result<(DVector<f64>, Vec<f64>)> {
        let k = face.len();
        if k == 0 {
            return Ok((p.clone(), Vec::new()));
        }
        let n = self.polytope.n();
        let verts = self.face_vertices(face);
        if verts.is_empty() {
            return Err(Error::WidthTooLarge {
                delta: self.delta,
                reason: format!(
                    "collar zones of facets {face:?} intersect but the facets share no face"
                ),
            });
        }

        // Projection onto the affine hull of the face, pulled toward the
        // face centroid until it clears every facet inequality.
        let a_s = DMatrix::from_fn(k, n, |r, c| self.polytope.a()[(face[r], c)]);
        let b_s = DVector::from_fn(k, |r, _| self.polytope.b()[face[r]]);
        let gram = &a_s * a_s.transpose();
        let rhs = &a_s * p + b_s;
        let lam = gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularChartMatrix { rows: face.to_vec() })?;
        let mut x0 = p - a_s.transpose() * lam;
        let mut centroid = DVector::zeros(n);
        for &v in &verts {
            centroid += &self.polytope.vertices()[v].point;
        }
        centroid /= verts.len() as f64;
        let y0 = self.polytope.embed(&x0);
        let yc = self.polytope.embed(&centroid);
        let mut pull = 0.0f64;
        for jf in 0..self.polytope.m() {
            if y0[jf] < 0.0 && yc[jf] > y0[jf] {
                pull = pull.max(-y0[jf] / (yc[jf] - y0[jf]));
            }
        }
        if pull > 0.0 {
            let lam = (1.05 * pull).min(1.0);
            x0 = &x0 * (1.0 - lam) + &centroid * lam;
        }

        // Orthonormal basis of the face tangent space.
        let mut span: Vec<DVector<f64>> = face.iter().map(|&i| self.a_rows[i].clone()).collect();
        let mut cols = Vec::new();
        for _ in 0..n - k {
            let d = orthogonal_direction(&span, n)
                .ok_or(Error::SingularChartMatrix { rows: face.to_vec() })?;
            span.push(d.clone());
            cols.push(d);
        }
        let b_basis = DMatrix::from_fn(n, n - k, |r, c| cols[c][r]);

        let yp = self.polytope.embed(p);
        let cap = 0.999 * self.delta;
        let mut t: Vec<f64> = face.iter().map(|&i| yp[i].clamp(0.0, cap)).collect();
        let mut z = DVector::zeros(n - k);
        let tol = 1e-11 * (1.0 + p.amax());
        let mut residual = f64::INFINITY;

        for iteration in 0..NEWTON_BUDGET {
            let x = &x0 + &b_basis * &z;
            let (val, m, tcols) = self.multicollar_jet(face, &x, &t)?;
            let r = p - &val;
            residual = r.amax();
            if residual <= tol {
                return Ok((x, t));
            }

            let mut jac = DMatrix::zeros(n, n);
            let mz = &m * &b_basis;
            jac.view_mut((0, 0), (n, n - k)).copy_from(&mz);
            for (s, col) in tcols.iter().enumerate() {
                jac.view_mut((0, n - k + s), (n, 1)).copy_from(col);
            }
            let Some(delta_step) = jac.lu().solve(&r) else {
                return Err(Error::CollarInversionFailure {
                    residual,
                    iterations: iteration,
                });
            };

            let mut accepted = false;
            let mut lam = 1.0;
            for _ in 0..=8 {
                let z_try = &z + delta_step.rows(0, n - k) * lam;
                let t_try: Vec<f64> = (0..k)
                    .map(|s| (t[s] + lam * delta_step[n - k + s]).clamp(0.0, cap))
                    .collect();
                let x_try = &x0 + &b_basis * &z_try;
                if let Ok(val_try) = self.multicollar(face, &x_try, &t_try) {
                    if (p - val_try).amax() < residual {
                        z = z_try;
                        t = t_try;
                        accepted = true;
                        break;
                    }
                }
                lam /= 2.0;
            }
            if !accepted {
                return Err(Error::CollarInversionFailure {
                    residual,
                    iterations: iteration,
                });
            }
        }
        Err(Error::CollarInversionFailure {
            residual,
            iterations: NEWTON_BUDGET,
        })
    }

    /// Multicollar value plus its Jacobians: with respect to the start point
    /// and with respect to each time argument.
    fn multicollar_jet(
        &self,
        face: &[usize],
        x: &DVector<f64>,
        t: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>, Vec<DVector<f64>>)> {
        let n = self.polytope.n();
        let mut p = x.clone();
        let mut m = DMatrix::identity(n, n);
        let mut tcols: Vec<Option<DVector<f64>>> = vec![None; face.len()];
        for s in (0..face.len()).rev() {
            let (next, d) = self.flow_with_jacobian(face[s], &p, t[s])?;
            m = &d * &m;
            for col in tcols.iter_mut().flatten() {
                *col = &d * &*col;
            }
            tcols[s] = Some(self.field(face[s], &next)?);
            p = next;
        }
        Ok((p, m, tcols.into_iter().map(|c| c.unwrap()).collect()))
    }

    /// The corner-smoothing self-map F: pull the point back to its face
    /// through the multicollar, push the times through the profile, flow
    /// back out. Identity outside every smoothing zone.
    pub fn linear_to_quadratic(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.reparametrized(p, |t| self.xi.eval(t))
    }

    /// Inverse of [`linear_to_quadratic`](Self::linear_to_quadratic), using
    /// the inverse profile.
    pub fn quadratic_to_linear(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.reparametrized(p, |t| self.xi.inverse(t))
    }

    fn reparametrized(&self, p: &DVector<f64>, map: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
        let y = self.polytope.embed(p);
        if let Some(worst) = (0..self.polytope.m())
            .filter(|&i| y[i] < -self.containment_tol)
            .min_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap())
        {
            return Err(Error::OutsidePolytope {
                facet: worst,
                violation: y[worst],
            });
        }
        let s = self.active_collars(p);
        if s.is_empty() {
            return Ok(p.clone());
        }
        let (x, t) = self.invert_multicollar(&s, p)?;
        let t2: Vec<f64> = t.iter().map(|&v| map(v)).collect();
        self.multicollar(&s, &x, &t2)
    }

    /// Worst round-trip defect of F over the given points.
    pub fn round_trip_residual(&self, points: &[DVector<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in points {
            let q = self.linear_to_quadratic(p)?;
            let back = self.quadratic_to_linear(&q)?;
            worst = worst.max((p - back).amax());
        }
        Ok(worst)
    }

    /// Finite-difference C¹ certificate for F across facet walls. For each
    /// facet and each of its vertex charts, F is expressed as a map from
    /// linear chart coordinates to quadratic (square-root) target
    /// coordinates; its one-sided Jacobian on the wall is compared against a
    /// central-difference Jacobian four steps inside. The square-root
    /// singularity must cancel against the quadratic start of the profile,
    /// leaving the two Jacobians equal to first order.
    pub fn verify_structure_diffeo(&self, tols: &Tolerances) -> Result<StructureDiffeoReport> {
        let n = self.polytope.n();
        let mut worst = 0.0f64;
        let mut worst_facet = 0;
        let mut worst_vertex = 0;
        let mut probes = 0;
        for i in 0..self.polytope.m() {
            for v in self.polytope.facet_vertices(i) {
                let chart = self.polytope.vertex_chart(v)?;
                let pos = chart.omega_position(i).unwrap();
                let clearance = (0..chart.tilde_b().len())
                    .map(|kk| chart.tilde_b()[kk] / chart.tilde_a().row(kk).norm().max(1e-300))
                    .fold(f64::INFINITY, f64::min);
                let off = 0.25 * self.delta.min(clearance);
                let h = tols.fd_step * (1.0 + off);

                // F preserves every facet through the probe point, so a zero
                // chart coordinate maps to an exact zero; writing it as such
                // keeps functional roundoff out of the square root, which the
                // one-sided stencil would otherwise amplify by 1/h.
                let eval = |y: &DVector<f64>| -> Result<DVector<f64>> {
                    let xx = chart.point(y);
                    let fx = self.linear_to_quadratic(&xx)?;
                    let yf = chart.coords(&fx);
                    Ok(DVector::from_fn(n, |r, _| {
                        if y[r] == 0.0 {
                            0.0
                        } else {
                            yf[r].max(0.0).sqrt()
                        }
                    }))
                };

                let mut base = DVector::from_element(n, off);
                base[pos] = 0.0;
                let wall = self.chart_jacobian(&eval, &base, Some(pos), h)?;
                let mut inner = base.clone();
                inner[pos] = 4.0 * h;
                let inside = self.chart_jacobian(&eval, &inner, None, h)?;
                let residual = (&wall - &inside).amax() / (1.0 + inside.amax());
                probes += 1;
                if residual > worst {
                    worst = residual;
                    worst_facet = i;
                    worst_vertex = v;
                }
            }
        }
        Ok(StructureDiffeoReport {
            delta: self.delta,
            c1_residual: worst,
            worst_facet,
            worst_vertex,
            probes,
        })
    }

    /// Finite-difference Jacobian in chart coordinates; the `one_sided`
    /// column uses the second-order forward stencil so the base point may
    /// sit exactly on the wall.
    fn chart_jacobian(
        &self,
        eval: &impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
        y: &DVector<f64>,
        one_sided: Option<usize>,
        h: f64,
    ) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut jac = DMatrix::zeros(n, n);
        for col in 0..n {
            let column = if one_sided == Some(col) {
                let f0 = eval(y)?;
                let mut y1 = y.clone();
                y1[col] += h;
                let f1 = eval(&y1)?;
                let mut y2 = y.clone();
                y2[col] += 2.0 * h;
                let f2 = eval(&y2)?;
                (f0 * -3.0 + f1 * 4.0 - f2) / (2.0 * h)
            } else {
                let mut ya = y.clone();
                ya[col] += h;
                let mut yb = y.clone();
                yb[col] -= h;
                (eval(&ya)? - eval(&yb)?) / (2.0 * h)
            };
            jac.view_mut((0, col), (n, 1)).copy_from(&column);
        }
        Ok(jac)
    }

    /// Flow probe checks run at build time: unit-speed advance of the facet
    /// functional, preservation of every face through the start point, and
    /// containment, at three times per probe.
    fn probe_invariants(&self) -> Result<()> {
        let p = &self.polytope;
        let atol = 1e-8 * (1.0 + p.b().amax());
        for i in 0..p.m() {
            for x in self.face_probes(&[i], usize::MAX) {
                let active = p.active_facets(&x);
                for frac in [0.25, 0.5, 0.75] {
                    let t = frac * self.delta;
                    let end = self.flow(i, &x, t).map_err(|e| match e {
                        Error::LeftPolytope { .. } | Error::BlendFailure { .. } => {
                            Error::WidthTooLarge {
                                delta: self.delta,
                                reason: e.to_string(),
                            }
                        }
                        other => other,
                    })?;
                    let y = p.embed(&end);
                    if (y[i] - t).abs() > atol {
                        return Err(Error::WidthTooLarge {
                            delta: self.delta,
                            reason: format!(
                                "facet {i} flow advances its functional to {:.3e} instead of {t:.3e}",
                                y[i]
                            ),
                        });
                    }
                    for &j in &active {
                        if j != i && y[j].abs() > atol {
                            return Err(Error::WidthTooLarge {
                                delta: self.delta,
                                reason: format!(
                                    "facet {i} flow drifts off facet {j} by {:.3e}",
                                    y[j].abs()
                                ),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index permutations of 0..k in lexicographic generation order, capped.
fn permutations(k: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out, cap);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out, cap);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    fn dv(vals: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(vals)
    }

    #[test]
    fn box_fields_are_exact_unit_normals() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(1.0)).unwrap();
        for (facet, expect) in [
            (0, [1.0, 0.0]),
            (1, [-1.0, 0.0]),
            (2, [0.0, 1.0]),
            (3, [0.0, -1.0]),
        ] {
            for x in [dv(&[0.3, 0.4]), dv(&[0.6, 0.25]), dv(&[0.5, 0.5])] {
                let w = cs.field(facet, &x).unwrap();
                assert_eq!(w[0], expect[0]);
                assert_eq!(w[1], expect[1]);
            }
        }
    }

    #[test]
    fn box_flow_is_translation() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(1.0)).unwrap();
        let x = dv(&[0.0, 0.3]);
        let end = cs.flow(0, &x, 0.25).unwrap();
        assert!((end[0] - 0.25).abs() < 1e-12);
        assert_eq!(end[1], 0.3);
        let frozen = cs.flow(0, &x, 0.0).unwrap();
        assert_eq!(frozen, x);
    }

    #[test]
    fn box_consistency_is_exactly_zero() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(0.5)).unwrap();
        assert_eq!(cs.consistency_residual(0, 2, 8).unwrap(), 0.0);
        assert_eq!(cs.consistency_residual(1, 3, 8).unwrap(), 0.0);
        // opposite facets share no face, so nothing to commute
        assert_eq!(cs.consistency_residual(0, 1, 8).unwrap(), 0.0);
    }

    #[test]
    fn box_multicollar_translates_coordinates() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(1.0)).unwrap();
        let origin = dv(&[0.0, 0.0]);
        let end = cs.multicollar(&[0, 2], &origin, &[0.2, 0.1]).unwrap();
        assert!((end[0] - 0.2).abs() < 1e-12);
        assert!((end[1] - 0.1).abs() < 1e-12);
        let res = cs
            .multicollar_order_residual(&[0, 2], &origin, &[0.2, 0.1])
            .unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn box_corner_map_applies_the_profile_componentwise() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(1.0)).unwrap();
        let f1 = cs.linear_to_quadratic(&dv(&[0.03, 0.5])).unwrap();
        assert!((f1[0] - 0.0009).abs() < 1e-12);
        assert!((f1[1] - 0.5).abs() < 1e-12);
        let f2 = cs.linear_to_quadratic(&dv(&[0.03, 0.04])).unwrap();
        assert!((f2[0] - 0.0009).abs() < 1e-12);
        assert!((f2[1] - 0.0016).abs() < 1e-12);
        // every functional at least delta/2 away: F must not touch the point
        let center = dv(&[0.5, 0.5]);
        assert_eq!(cs.linear_to_quadratic(&center).unwrap(), center);
    }

    #[test]
    fn box_round_trip_is_identity() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(1.0)).unwrap();
        let pts = [
            dv(&[0.03, 0.5]),
            dv(&[0.03, 0.04]),
            dv(&[0.2, 0.35]),
            dv(&[0.5, 0.5]),
            dv(&[0.0, 0.3]),
        ];
        assert!(cs.round_trip_residual(&pts).unwrap() < 1e-10);
    }

    #[test]
    fn simplex_collar_flows_along_the_chart_column() {
        let p = fixtures::simplex(2);
        let cs = build_collars(&p, None).unwrap();
        // at the vertex (1,0) with active facets {1,2}, only its own star
        // survives, so the facet-1 field is the chart column exactly
        let w = cs.field(1, &dv(&[1.0, 0.0])).unwrap();
        assert!((w[0] - -1.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_flow_preserves_faces() {
        let p = fixtures::simplex(2);
        let cs = build_collars(&p, None).unwrap();
        let delta = cs.delta();
        // flowing off facet 1 from a point on facet 2 must stay on facet 2
        let end = cs.flow(1, &dv(&[1.0, 0.0]), delta / 2.0).unwrap();
        let y = p.embed(&end);
        assert!((y[1] - delta / 2.0).abs() < 1e-9);
        assert!(y[2].abs() < 1e-9);
    }

    #[test]
    fn simplex_consistency_stays_small() {
        let p = fixtures::simplex(2);
        let cs = build_collars(&p, None).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!(cs.consistency_residual(i, j, 3).unwrap() < 1e-6);
        }
    }

    #[test]
    fn default_width_is_a_tenth_of_clearance() {
        let p = fixtures::pentagon();
        let cs = build_collars(&p, None).unwrap();
        assert_eq!(cs.delta(), 0.1 * p.min_clearance());
    }

    #[test]
    fn oversized_width_is_rejected_by_probes() {
        let p = fixtures::pentagon();
        match build_collars(&p, Some(5.0)) {
            Err(Error::WidthTooLarge { .. }) => {}
            other => panic!("expected WidthTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn inversion_recovers_multicollar_parameters() {
        let p = fixtures::square();
        let cs = build_collars(&p, Some(0.25)).unwrap();
        let x = dv(&[0.0, 0.0]);
        let t = [0.07, 0.11];
        let q = cs.multicollar(&[0, 2], &x, &t).unwrap();
        let (x_back, t_back) = cs.invert_multicollar(&[0, 2], &q).unwrap();
        assert!((x_back - &x).amax() < 1e-9);
        assert!((t_back[0] - t[0]).abs() < 1e-9);
        assert!((t_back[1] - t[1]).abs() < 1e-9);
    }

    #[test]
    fn corner_map_round_trips_near_a_simplex_vertex() {
        let p = fixtures::simplex(2);
        let cs = build_collars(&p, None).unwrap();
        let d = cs.delta();
        let pts = [
            dv(&[d / 30.0, d / 25.0]),
            dv(&[d / 4.0, d / 3.0]),
            dv(&[0.9, 0.05 * d]),
            dv(&[0.3, 0.3]),
        ];
        assert!(cs.round_trip_residual(&pts).unwrap() < 1e-8);
    }

    #[test]
    fn chart_representation_of_f_is_c1_across_walls() {
        let tols = Tolerances::default();
        for p in [fixtures::square(), fixtures::simplex(2)] {
            let cs = build_collars(&p, None).unwrap();
            let report = cs.verify_structure_diffeo(&tols).unwrap();
            assert!(
                report.c1_residual < 1e-4,
                "{}: c1 residual {:.3e} at facet {} vertex {}",
                p.name,
                report.c1_residual,
                report.worst_facet,
                report.worst_vertex
            );
        }
    }

    #[test]
    fn face_points_stay_on_their_faces_under_f() {
        let p = fixtures::simplex(2);
        let cs = build_collars(&p, None).unwrap();
        let probe = dv(&[0.4, 0.0]); // interior of facet 1
        let image = cs.linear_to_quadratic(&probe).unwrap();
        let y = p.embed(&image);
        assert!(y[1].abs() < 1e-8);
    }
}
