//! The vertex-and-sign atlas and its transition maps.
//!
//! Each chart is indexed by a vertex and a sign pattern on the facets away
//! from that vertex. Transitions between overlapping charts are smooth; the
//! example measures one against finite differences and closes a cocycle
//! triangle. Run with: cargo run --example atlas_transitions

use quadratope::atlas::{
    cocycle_residual, overlap_probes, to_chart, transition, verify_transition_smoothness, ChartId,
};
use quadratope::gale::complement_matrix;
use quadratope::geometry::fixtures;
use quadratope::manifold::section;
use quadratope::tol::Tolerances;

fn main() -> quadratope::Result<()> {
    let tols = Tolerances::default();
    let p = fixtures::pentagon();
    let qs = complement_matrix(&p);

    let u = section(&p, &qs, &p.interior_point())?;
    let id0 = ChartId::containing(&p, 0, &u.u)?;
    let id2 = ChartId::containing(&p, 2, &u.u)?;
    println!("charts at the barycenter lift: {} and {}", id0.label(), id2.label());

    // Round trip through one transition map.
    let fwd = transition(&p, &id0, &id2)?;
    let back = transition(&p, &id2, &id0)?;
    let c = to_chart(&p, &id0, &u, &tols)?;
    let rt = (back.apply(&fwd.apply(&c)?)? - &c).amax();
    println!("transition round trip residual: {:.3e}", rt);

    // Analytic Jacobian vs central differences on overlap probes.
    let probes = overlap_probes(&p, &qs, &id0, &id2, 60, 17, &tols)?;
    let smooth = verify_transition_smoothness(&fwd, &probes, &tols)?;
    println!(
        "smoothness over {} probes ({} skipped near the boundary): max |J_fd - J| = {:.3e}",
        smooth.probes_checked, smooth.probes_skipped, smooth.max_residual
    );

    // Cocycle condition: going 0 -> 2 -> 4 equals going 0 -> 4 directly.
    let id4 = ChartId::containing(&p, 4, &u.u)?;
    let cocycle = cocycle_residual(&p, [&id0, &id2, &id4], &u, &tols)?;
    println!("cocycle residual over ({}, {}, {}): {:.3e}", id0.label(), id2.label(), id4.label(), cocycle);
    Ok(())
}
