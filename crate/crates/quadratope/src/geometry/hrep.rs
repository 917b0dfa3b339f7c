//! Simple polytopes from facet inequalities.
//!
//! A polytope enters as `P = {x : Ax + b >= 0}` with one row per facet.
//! Validation is deliberately strict: the data must describe a bounded,
//! full-dimensional, *simple* polytope with no redundant rows, because the
//! whole downstream construction (charts, collars, quadric presentations)
//! reads combinatorics off the facet structure and silently "fixing" the
//! input would detach the two.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// A vertex together with the facets it lies on.
#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: DVector<f64>,
    /// Sorted facet indices active at the vertex; exactly `n` of them.
    pub active: Vec<usize>,
}

/// Validated bounded simple polytope in H-representation.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub name: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    vertices: Vec<Vertex>,
    tol_active: f64,
}

/// Affine coordinates around one vertex.
///
/// For a vertex v on facets `omega`, the map `x -> A_v x + b_v` (rows of the
/// active facets) is an affine isomorphism onto a neighborhood of the corner
/// of the nonnegative orthant. Every other facet functional becomes affine in
/// these coordinates: `a_j x + b_j = tilde_a_j · y + tilde_b_j`, with
/// `tilde_b_j > 0` since the vertex is not on facet j.
#[derive(Debug, Clone)]
pub struct VertexChart {
    pub vertex: usize,
    pub omega: Vec<usize>,
    pub complement: Vec<usize>,
    a_v: DMatrix<f64>,
    a_v_inv: DMatrix<f64>,
    b_v: DVector<f64>,
    tilde_a: DMatrix<f64>,
    tilde_b: DVector<f64>,
}

/// All k-element subsets of 0..m in lexicographic order.
pub(crate) fn k_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k > m {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut s: Vec<usize> = (0..k).collect();
    loop {
        out.push(s.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if s[i] != i + m - k {
                break;
            }
        }
        s[i] += 1;
        for j in i + 1..k {
            s[j] = s[j - 1] + 1;
        }
    }
}

/// A unit vector orthogonal to all given rows, or `None` when the rows do not
/// leave room for one (rank deficiency is also reported as `None`).
pub(crate) fn orthogonal_direction(rows: &[DVector<f64>], n: usize) -> Option<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        if norm < 1e-12 * (1.0 + r.norm()) {
            return None; // rows dependent: subset does not cut a ray
        }
        basis.push(v / norm);
    }
    let mut best: Option<DVector<f64>> = None;
    let mut best_norm = 0.0;
    for k in 0..n {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        if norm > best_norm {
            best_norm = norm;
            best = Some(v / norm);
        }
    }
    best.filter(|_| best_norm > 1e-8)
}

/// Validate an H-representation and enumerate its vertex structure.
///
/// Checks, in order: full-rank facet matrix, bounded recession cone, a
/// nonempty vertex set, simplicity (every vertex on exactly n facets), and no
/// redundant rows (every facet touches a vertex). Vertex enumeration solves
/// every n-subset of facet rows, so this is meant for desk-scale inputs
/// (m up to ~16).
pub fn validate_hrep(name: &str, a: DMatrix<f64>, b: DVector<f64>, tol: &Tolerances) -> Result<Polytope> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "offset length must match facet count");
    assert!(n >= 1, "dimension must be at least 1");

    let svd = a.clone().svd(false, false);
    let rank = svd.rank(1e-12 * svd.singular_values.max());
    if rank < n {
        return Err(Error::NotFullRank { rank, dim: n });
    }

    // Bounded iff the recession cone {d : Ad >= 0} is trivial. With A of full
    // rank the cone is pointed, so nontrivial means it has an extreme ray,
    // and every extreme ray is orthogonal to some rank-(n-1) subset of rows.
    for subset in k_subsets(m, n - 1) {
        let rows: Vec<DVector<f64>> = subset.iter().map(|&i| a.row(i).transpose()).collect();
        let Some(d) = orthogonal_direction(&rows, n) else {
            continue;
        };
        for dir in [d.clone(), -d] {
            let ok = (0..m).all(|i| a.row(i).transpose().dot(&dir) >= -1e-9 * a.row(i).norm());
            if ok {
                return Err(Error::Unbounded {
                    direction: dir.iter().copied().collect(),
                });
            }
        }
    }

    let tol_active = tol.active(b.amax());
    let mut vertices: Vec<Vertex> = Vec::new();
    for subset in k_subsets(m, n) {
        let sub_a = DMatrix::from_fn(n, n, |r, c| a[(subset[r], c)]);
        let sub_b = DVector::from_fn(n, |r, _| -b[subset[r]]);
        let lu = sub_a.full_piv_lu();
        let Some(x) = lu.solve(&sub_b) else {
            continue;
        };
        if !x.iter().all(|v| v.is_finite()) {
            continue;
        }
        let y = &a * &x + &b;
        if y.iter().any(|&v| v < -tol_active) {
            continue;
        }
        let scale = 1.0 + x.amax();
        if vertices
            .iter()
            .any(|v| (&v.point - &x).amax() <= tol.merge * scale)
        {
            continue;
        }
        let active: Vec<usize> = (0..m).filter(|&i| y[i].abs() <= tol_active).collect();
        vertices.push(Vertex { point: x, active });
    }

    if vertices.is_empty() {
        return Err(Error::Empty { vertices: 0 });
    }
    if let Some(v) = vertices.iter().find(|v| v.active.len() != n) {
        return Err(Error::NotSimple {
            vertex: v.point.iter().copied().collect(),
            active: v.active.len(),
            dim: n,
        });
    }
    if let Some(facet) = (0..m).find(|&i| !vertices.iter().any(|v| v.active.contains(&i))) {
        return Err(Error::RedundantFacet { facet });
    }
    if vertices.len() < n + 1 {
        return Err(Error::Empty {
            vertices: vertices.len(),
        });
    }

    vertices.sort_by(|u, v| u.active.cmp(&v.active));
    Ok(Polytope {
        name: name.to_string(),
        a,
        b,
        vertices,
        tol_active,
    })
}

impl Polytope {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn tol_active(&self) -> f64 {
        self.tol_active
    }

    /// The affine embedding `j(x) = Ax + b` into facet-functional space.
    /// On P every coordinate is nonnegative; coordinate i vanishes exactly on
    /// facet i.
    pub fn embed(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    /// Least-squares preimage of a point of facet-functional space under the
    /// embedding. Errors when `y` is farther from the image plane than the
    /// image tolerance allows.
    pub fn project_to_base(&self, y: &DVector<f64>, tol: &Tolerances) -> Result<DVector<f64>> {
        let svd = self.a.clone().svd(true, true);
        let rhs = y - &self.b;
        let x = svd
            .solve(&rhs, 1e-12)
            .expect("svd of validated facet matrix");
        let distance = (self.embed(&x) - y).amax();
        let allowed = tol.image * (1.0 + y.amax());
        if distance > allowed {
            return Err(Error::NotInImage {
                distance,
                tol: allowed,
            });
        }
        Ok(x)
    }

    /// Membership test against all facet inequalities.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.embed(x).iter().all(|&v| v >= -self.tol_active)
    }

    /// Facets active at `x` (within the activity tolerance).
    pub fn active_facets(&self, x: &DVector<f64>) -> Vec<usize> {
        let y = self.embed(x);
        (0..self.m()).filter(|&i| y[i].abs() <= self.tol_active).collect()
    }

    pub fn vertex_chart(&self, vertex: usize) -> Result<VertexChart> {
        VertexChart::new(self, vertex)
    }

    /// Vertex indices lying on facet i.
    pub fn facet_vertices(&self, facet: usize) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].active.contains(&facet))
            .collect()
    }

    /// Facet pairs whose intersection is a nonempty codimension-2 face.
    pub fn codim2_faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m() {
            for j in i + 1..self.m() {
                let shared = self
                    .vertices
                    .iter()
                    .any(|v| v.active.contains(&i) && v.active.contains(&j));
                if shared {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Vertex barycenter; strictly interior for a bounded polytope.
    pub fn interior_point(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.n());
        for v in &self.vertices {
            c += &v.point;
        }
        c / self.vertices.len() as f64
    }

    /// Componentwise bounding box of the vertex set.
    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.n();
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..n {
                lo[k] = lo[k].min(v.point[k]);
                hi[k] = hi[k].max(v.point[k]);
            }
        }
        (lo, hi)
    }

    /// Smallest distance from any vertex to a hyperplane of a facet not
    /// through it. Collar widths are chosen as a fraction of this.
    pub fn min_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for v in 0..self.vertices.len() {
            let chart = self.vertex_chart(v).expect("chart of validated vertex");
            for k in 0..chart.complement.len() {
                let dist = chart.tilde_b[k] / chart.tilde_a.row(k).norm().max(1e-300);
                best = best.min(dist);
            }
        }
        best
    }
}

impl VertexChart {
    fn new(p: &Polytope, vertex: usize) -> Result<Self> {
        let v = &p.vertices[vertex];
        let n = p.n();
        let m = p.m();
        let omega = v.active.clone();
        let complement: Vec<usize> = (0..m).filter(|i| !omega.contains(i)).collect();
        let a_v = DMatrix::from_fn(n, n, |r, c| p.a[(omega[r], c)]);
        let b_v = DVector::from_fn(n, |r, _| p.b[omega[r]]);
        let a_v_inv = a_v.clone().try_inverse().ok_or(Error::SingularChartMatrix {
            rows: omega.clone(),
        })?;
        // a_j x + b_j rewritten in chart coordinates y = A_v x + b_v
        let mut tilde_a = DMatrix::zeros(complement.len(), n);
        let mut tilde_b = DVector::zeros(complement.len());
        for (k, &j) in complement.iter().enumerate() {
            let aj = p.a.row(j);
            let row = aj * &a_v_inv;
            tilde_b[k] = p.b[j] - (&row * &b_v)[(0, 0)];
            tilde_a.row_mut(k).copy_from(&row);
        }
        debug_assert!(
            tilde_b.iter().all(|&v| v > 0.0),
            "vertex clearance must be positive for a simple vertex"
        );
        Ok(VertexChart {
            vertex,
            omega,
            complement,
            a_v,
            a_v_inv,
            b_v,
            tilde_a,
            tilde_b,
        })
    }

    pub fn a_v(&self) -> &DMatrix<f64> {
        &self.a_v
    }

    pub fn a_v_inv(&self) -> &DMatrix<f64> {
        &self.a_v_inv
    }

    /// Chart coordinates of an ambient point: the active facet functionals.
    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_v * x + &self.b_v
    }

    /// Ambient point with the given chart coordinates.
    pub fn point(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.a_v_inv * (y - &self.b_v)
    }

    /// Functional of complement facet `complement[k]` evaluated on chart
    /// coordinates: equals `a_j x + b_j` for the corresponding ambient point.
    pub fn complement_functional(&self, k: usize, y: &DVector<f64>) -> f64 {
        (self.tilde_a.row(k) * y)[(0, 0)] + self.tilde_b[k]
    }

    pub fn tilde_a(&self) -> &DMatrix<f64> {
        &self.tilde_a
    }

    pub fn tilde_b(&self) -> &DVector<f64> {
        &self.tilde_b
    }

    /// Position of a facet inside `omega`, if it is one of the chart facets.
    pub fn omega_position(&self, facet: usize) -> Option<usize> {
        self.omega.iter().position(|&i| i == facet)
    }

    /// The coordinate vector field for one of the chart facets: the column of
    /// `A_v^{-1}` along which the facet functional grows at unit rate while
    /// the other chart functionals stay constant.
    pub fn coordinate_field(&self, facet: usize) -> Option<DVector<f64>> {
        let s = self.omega_position(facet)?;
        Some(self.a_v_inv.column(s).into_owned())
    }
}
