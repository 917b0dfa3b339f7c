//! Collar flows and the corner-smoothing self-map.
//!
//! Every facet carries an inward vector field whose flow parametrizes a
//! collar. Reparametrizing the collar times through a profile that is
//! exactly t^2 near zero produces the map F exchanging the polytope's two
//! corner structures: facet functionals themselves (linear) versus their
//! squares (quadratic, the form the quadrics see).
//! Run with: cargo run --example corner_smoothing

use quadratope::collar::build_collars;
use quadratope::geometry::fixtures;
use quadratope::tol::Tolerances;

fn main() -> quadratope::Result<()> {
    let p = fixtures::quadrilateral();
    let collars = build_collars(&p, None)?;
    let delta = collars.delta();
    println!("collar width delta = {:.4} on {}", delta, p.name);

    // The profile: identically t^2 below delta/8, identity above 7 delta/8.
    let xi = collars.xi();
    println!("\n  t            xi(t)         xi^-1(xi(t))");
    for k in [1, 4, 16, 40, 62] {
        let t = delta * k as f64 / 64.0;
        let y = xi.eval(t);
        println!("  {:.6}    {:.6e}   {:.6}", t, y, xi.inverse(y));
    }
    let t = delta / 64.0;
    println!("  near zero xi(t) == t*t exactly: {}", xi.eval(t) == t * t);

    // At a vertex two collars meet; their flows commute, which is what
    // makes the joint collar of the corner well-defined.
    let v = &p.vertices()[0];
    let order = collars.multicollar_order_residual(
        &v.active,
        &v.point,
        &[0.3 * delta, 0.2 * delta],
    )?;
    println!("\nflow commutation defect at vertex 0: {:.3e}", order);

    // F itself: smooth self-map of P, identity outside the collars,
    // quadratically flattening onto each facet inside them.
    let probes: Vec<_> = p
        .vertices()
        .iter()
        .map(|v| {
            let c = p.interior_point();
            &v.point + (&c - &v.point) * 0.05
        })
        .collect();
    let rt = collars.round_trip_residual(&probes)?;
    println!("F then F^-1 on near-vertex probes: |error| = {:.3e}", rt);

    // Certify C^1 matching where the collar regimes meet.
    let report = collars.verify_structure_diffeo(&Tolerances::default())?;
    println!(
        "C^1 seam residual {:.3e} over {} probes (worst at facet {} near vertex {})",
        report.c1_residual, report.probes, report.worst_facet, report.worst_vertex
    );
    Ok(())
}
