//! Built-in example polytopes.
//!
//! The same shapes ship as JSON under `fixtures/` for the command line; the
//! builders here are the programmatic source of truth and the two are kept in
//! sync by a test. Facet order is part of the contract (chart indices, sign
//! vectors and complement rows all refer to it), so rows are listed
//! explicitly rather than generated.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{validate_hrep, Polytope};
use crate::tol::Tolerances;

fn build(name: &str, m: usize, n: usize, a: &[f64], b: &[f64]) -> Polytope {
    validate_hrep(
        name,
        DMatrix::from_row_slice(m, n, a),
        DVector::from_row_slice(b),
        &Tolerances::default(),
    )
    .expect("fixture data is valid")
}

/// Standard n-simplex: x_i >= 0 and x_1 + ... + x_n <= 1.
pub fn simplex(n: usize) -> Polytope {
    let mut a = vec![0.0; (n + 1) * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    for k in 0..n {
        a[n * n + k] = -1.0;
    }
    let mut b = vec![0.0; n + 1];
    b[n] = 1.0;
    build(&format!("simplex{n}"), n + 1, n, &a, &b)
}

/// Unit square with facets ordered (x>=0, 1-x>=0, y>=0, 1-y>=0).
pub fn square() -> Polytope {
    build(
        "square",
        4,
        2,
        &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        &[0.0, 1.0, 0.0, 1.0],
    )
}

/// Unit cube with facet pairs interleaved like the square.
pub fn cube() -> Polytope {
    build(
        "cube",
        6,
        3,
        &[
            1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            0.0, -1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0,
        ],
        &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
    )
}

/// Unit square truncated by x + y <= 3/2: the smallest polygon with m - n = 3.
pub fn pentagon() -> Polytope {
    build(
        "pentagon",
        5,
        2,
        &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0, -1.0, -1.0],
        &[0.0, 0.0, 1.0, 1.0, 1.5],
    )
}

/// A quadrilateral with no parallel sides and no symmetry.
pub fn quadrilateral() -> Polytope {
    build(
        "quadrilateral",
        4,
        2,
        &[1.0, 0.0, 0.0, 1.0, -1.0, -0.3, -0.2, -1.0],
        &[0.0, 0.0, 2.0, 1.5],
    )
}

/// Triangular prism: 2-simplex times an interval.
pub fn prism() -> Polytope {
    build(
        "prism",
        5,
        3,
        &[
            1.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, //
            -1.0, -1.0, 0.0, //
            0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0,
        ],
        &[0.0, 0.0, 1.0, 0.0, 1.0],
    )
}

/// Every shipped fixture, smallest first.
pub fn all() -> Vec<Polytope> {
    vec![
        simplex(1),
        simplex(2),
        simplex(3),
        square(),
        quadrilateral(),
        cube(),
        pentagon(),
        prism(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_shapes() {
        let counts: Vec<(String, usize, usize, usize)> = all()
            .iter()
            .map(|p| (p.name.clone(), p.m(), p.n(), p.vertices().len()))
            .collect();
        assert_eq!(
            counts,
            vec![
                ("simplex1".into(), 2, 1, 2),
                ("simplex2".into(), 3, 2, 3),
                ("simplex3".into(), 4, 3, 4),
                ("square".into(), 4, 2, 4),
                ("quadrilateral".into(), 4, 2, 4),
                ("cube".into(), 6, 3, 8),
                ("pentagon".into(), 5, 2, 5),
                ("prism".into(), 5, 3, 6),
            ]
        );
    }

    #[test]
    fn quadrilateral_fourth_vertex() {
        let p = quadrilateral();
        // intersection of the two slanted facets, solved by hand
        let v = p
            .vertices()
            .iter()
            .find(|v| v.active == vec![2, 3])
            .unwrap();
        assert!((v.point[0] - 155.0 / 94.0).abs() < 1e-12);
        assert!((v.point[1] - 55.0 / 47.0).abs() < 1e-12);
    }
}
