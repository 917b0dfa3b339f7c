//! Complement matrices and the quadric presentation.
//!
//! For `P = {x : Ax + b >= 0}` with m facets in dimension n, any matrix C
//! whose rows span the left null space of A turns the embedded polytope into
//! linear data: `y = Ax + b` satisfies `Cy = Cb`. Substituting squares
//! `y_j = u_j^2` gives the quadric system
//!
//! ```text
//! Phi_k(u) = sum_j C_kj u_j^2 - c_k = 0,   c = C b,
//! ```
//!
//! whose zero set in `R^m` is the real moment-angle manifold of P. The same
//! rows with `|z_j|^2` in place of `u_j^2` cut out the complex version in
//! `C^m`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Polytope;

/// The quadric system of a polytope: `(m-n) x m` coefficient rows and the
/// constant vector. Rows are scaled so the largest-magnitude entry is one,
/// which pins the scale that membership tolerances refer to.
#[derive(Debug, Clone)]
pub struct QuadricSystem {
    c: DMatrix<f64>,
    constants: DVector<f64>,
}

/// Orthonormal basis of the orthogonal complement of the column space of `a`
/// inside `R^m`. Greedy residual pivoting over the standard basis keeps the
/// result deterministic; ties resolve to the smallest index.
fn column_space_complement(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (m, n) = a.shape();
    let mut frame: Vec<DVector<f64>> = Vec::new();
    for k in 0..n {
        let mut v = a.column(k).into_owned();
        for q in &frame {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        assert!(norm > 1e-12, "facet matrix must have full column rank");
        frame.push(v / norm);
    }
    let mut complement: Vec<DVector<f64>> = Vec::new();
    while complement.len() < m - n {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for k in 0..m {
            let mut v = DVector::zeros(m);
            v[k] = 1.0;
            for q in frame.iter().chain(&complement) {
                let c = q.dot(&v);
                v -= q * c;
            }
            let norm = v.norm();
            if norm > best_norm + 1e-15 {
                best_norm = norm;
                best = Some(v / norm);
            }
        }
        complement.push(best.expect("complement dimension not exhausted"));
    }
    complement
}

/// Build the quadric system of a validated polytope.
pub fn complement_matrix(p: &Polytope) -> QuadricSystem {
    let a = p.a();
    let (m, n) = a.shape();
    let rows = column_space_complement(a);
    assert_eq!(rows.len(), m - n);
    let mut c = DMatrix::zeros(m - n, m);
    for (k, row) in rows.iter().enumerate() {
        // rescale so the largest-magnitude entry becomes exactly +1
        let pivot = (0..m)
            .max_by(|&i, &j| {
                row[i]
                    .abs()
                    .partial_cmp(&row[j].abs())
                    .expect("finite entries")
            })
            .expect("nonempty row");
        let scale = row[pivot];
        for j in 0..m {
            c[(k, j)] = row[j] / scale;
        }
    }
    let constants = &c * p.b();
    let qs = QuadricSystem { c, constants };
    debug_assert!(qs.annihilation_residual(p) <= 1e-12 * qs.c.norm() * a.norm());
    qs
}

impl QuadricSystem {
    /// Assemble from explicit rows; used by tests and deserialization.
    pub fn from_parts(c: DMatrix<f64>, constants: DVector<f64>) -> Self {
        assert_eq!(c.nrows(), constants.len());
        QuadricSystem { c, constants }
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn constants(&self) -> &DVector<f64> {
        &self.constants
    }

    pub fn ambient_dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn codim(&self) -> usize {
        self.c.nrows()
    }

    /// `max |C A|` entrywise: how well the rows annihilate the facet matrix.
    pub fn annihilation_residual(&self, p: &Polytope) -> f64 {
        (&self.c * p.a()).amax()
    }

    /// Rank of the coefficient matrix at the given singular-value ratio.
    pub fn rank(&self, ratio: f64) -> usize {
        let svd = self.c.clone().svd(false, false);
        svd.rank(ratio * svd.singular_values.max())
    }

    /// Quadric residuals `Phi_k(u)` of a real point.
    pub fn residuals(&self, u: &DVector<f64>) -> DVector<f64> {
        let squares = u.map(|v| v * v);
        &self.c * squares - &self.constants
    }

    pub fn residual_inf(&self, u: &DVector<f64>) -> f64 {
        self.residuals(u).amax()
    }

    /// Residuals of a complex point given as (re, im) pairs: squared moduli
    /// replace the squares.
    pub fn residuals_complex(&self, z: &[(f64, f64)]) -> DVector<f64> {
        assert_eq!(z.len(), self.ambient_dim());
        let moduli = DVector::from_fn(z.len(), |j, _| z[j].0 * z[j].0 + z[j].1 * z[j].1);
        &self.c * moduli - &self.constants
    }

    /// Residuals of squared-modulus data directly (linear in the input).
    pub fn residuals_of_squares(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.c * y - &self.constants
    }

    /// Structural validity: full rank and annihilation of the facet matrix.
    pub fn verify(&self, p: &Polytope, rank_ratio: f64) -> Result<()> {
        let expected = p.m() - p.n();
        let rank = self.rank(rank_ratio);
        if rank != expected {
            return Err(Error::RankDeficient {
                ratio: 0.0,
                tol: rank_ratio,
            });
        }
        let bound = 1e-12 * self.c.norm() * p.a().norm();
        let residual = self.annihilation_residual(p);
        if residual > bound {
            return Err(Error::Parse(format!(
                "complement rows do not annihilate the facet matrix: {residual:.3e} > {bound:.3e}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    #[test]
    fn simplex_rows_are_all_ones() {
        for n in 1..=3 {
            let p = fixtures::simplex(n);
            let qs = complement_matrix(&p);
            assert_eq!(qs.codim(), 1);
            for j in 0..=n {
                assert!((qs.coefficients()[(0, j)] - 1.0).abs() < 1e-12);
            }
            assert!((qs.constants()[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_rows_split_by_facet_pair() {
        let p = fixtures::square();
        let qs = complement_matrix(&p);
        let c = qs.coefficients();
        assert_eq!(qs.codim(), 2);
        let expected = [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]];
        for k in 0..2 {
            for j in 0..4 {
                assert!(
                    (c[(k, j)] - expected[k][j]).abs() < 1e-12,
                    "row {k} entry {j}: {}",
                    c[(k, j)]
                );
            }
            assert!((qs.constants()[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_identity_on_simplex_section() {
        let p = fixtures::simplex(3);
        let qs = complement_matrix(&p);
        let x = DVector::from_row_slice(&[0.1, 0.25, 0.3]);
        let u = p.embed(&x).map(|v| v.sqrt());
        // sum of squares is 1: the 3-sphere of radius 1
        assert!(qs.residual_inf(&u) < 1e-12);
        assert!((u.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_identity_on_square() {
        let p = fixtures::square();
        let qs = complement_matrix(&p);
        for (alpha, beta) in [(0.3f64, 1.2f64), (2.0, -0.7), (0.0, 0.0)] {
            let u = DVector::from_row_slice(&[
                alpha.cos(),
                alpha.sin(),
                beta.cos(),
                beta.sin(),
            ]);
            assert!(qs.residual_inf(&u) < 1e-12);
        }
    }

    #[test]
    fn complex_points_use_squared_moduli() {
        let p = fixtures::simplex(1);
        let qs = complement_matrix(&p);
        // |z1|^2 + |z2|^2 = 1: the 3-sphere inside C^2
        let z = [(0.6, 0.0), (0.0, 0.8)];
        assert!(qs.residuals_complex(&z).amax() < 1e-12);
        let off = [(1.0, 1.0), (0.0, 0.0)];
        assert!(qs.residuals_complex(&off).amax() > 0.5);
    }

    #[test]
    fn annihilation_and_rank_hold_on_all_fixtures() {
        for p in fixtures::all() {
            let qs = complement_matrix(&p);
            qs.verify(&p, 1e-8).unwrap();
            assert!(qs.annihilation_residual(&p) <= 1e-12 * qs.coefficients().norm() * p.a().norm());
        }
    }
}
