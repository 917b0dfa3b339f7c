//! From an H-representation to the intersection of quadrics.
//!
//! A pentagon has m = 5 facets in n = 2 dimensions, so its real
//! moment-angle manifold lives in R^5 cut out by m - n = 3 quadrics.
//! Run with: cargo run --example quadric_presentation

use quadratope::gale::complement_matrix;
use quadratope::geometry::fixtures;
use quadratope::tol::Tolerances;

fn main() {
    let p = fixtures::pentagon();
    let qs = complement_matrix(&p);
    let tols = Tolerances::default();

    println!("polytope: {} ({} facets, dim {})", p.name, p.m(), p.n());
    println!("facet functionals a_j . x + b_j:");
    for j in 0..p.m() {
        let row: Vec<f64> = p.a().row(j).iter().copied().collect();
        println!("  facet {}: a = {:?}, b = {:.4}", j, row, p.b()[j]);
    }

    println!("\nquadric system: {} equations in R^{}", qs.codim(), qs.ambient_dim());
    for k in 0..qs.codim() {
        let mut terms = Vec::new();
        for j in 0..qs.ambient_dim() {
            let c = qs.coefficients()[(k, j)];
            if c.abs() > 1e-14 {
                terms.push(format!("{:+.4} u{}^2", c, j));
            }
        }
        println!("  {} = {:.4}", terms.join(" "), qs.constants()[k]);
    }

    // The rows must annihilate the facet matrix: that is what makes the
    // squared facet functionals solve the system along the polytope.
    println!("\nannihilation residual |C A|_inf = {:.3e}", qs.annihilation_residual(&p));
    println!("coefficient rank = {} (need {})", qs.rank(tols.rank_ratio), p.m() - p.n());

    // Sanity: push the vertices through. Each vertex has exactly n facet
    // functionals vanishing, so its lift has exactly n zero coordinates.
    for v in p.vertices() {
        let y = p.embed(&v.point);
        let u = y.map(|t| t.max(0.0).sqrt());
        println!(
            "vertex {:?} lifts to |residual| = {:.3e}, zeros at {:?}",
            v.active,
            qs.residual_inf(&u),
            v.active
        );
    }
}
