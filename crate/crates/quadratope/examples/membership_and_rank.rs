//! Membership, smoothness certificates and the sign action.
//!
//! The manifold over the n-simplex is the unit sphere S^n; every point the
//! stratified sampler returns satisfies the quadrics, and the Jacobian rank
//! certificate shows the intersection is transverse (hence smooth) there.
//! Run with: cargo run --example membership_and_rank

use quadratope::gale::complement_matrix;
use quadratope::geometry::fixtures;
use quadratope::manifold::{rank_certificate, sample_points, section, SignVector, Stratum};
use quadratope::tol::Tolerances;

fn main() -> quadratope::Result<()> {
    let tols = Tolerances::default();
    let p = fixtures::simplex(2);
    let qs = complement_matrix(&p);

    // The canonical section lifts base points with nonnegative coordinates.
    let center = p.interior_point();
    let u = section(&p, &qs, &center)?;
    println!("lift of the barycenter: u = {:?}", u.u.as_slice());
    println!("  |u|^2 = {:.15} (sphere!)", u.u.norm_squared());
    println!("  quadric residual = {:.3e}", u.residual);

    // Transversality: smallest singular value of the quadric Jacobian,
    // relative to the largest, bounded away from zero.
    let rank = rank_certificate(&qs, &u.u, &tols)?;
    println!("  rank certificate: s_min/s_max = {:.3e}", rank.ratio);

    // The sign group Z_2^m acts by flipping coordinates; flips are exact
    // (bitwise) symmetries of the quadrics.
    let sigma = SignVector::from_flips(p.m(), &[0, 2]);
    let flipped = u.sign_apply(&sigma);
    println!(
        "after flipping coordinates 0 and 2: residual bits equal: {}",
        qs.residuals(&u.u)
            .iter()
            .zip(qs.residuals(&flipped.u).iter())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    );

    // Stratified samples: interior, facet, codimension-2 and vertex points,
    // each with an exact zero pattern matching its stratum.
    println!("\nstratified sampling over the cube manifold:");
    let cube = fixtures::cube();
    let cqs = complement_matrix(&cube);
    let samples = sample_points(&cube, &cqs, 40, 7)?;
    let mut counts = [0usize; 4];
    for s in &samples {
        let k = match s.stratum {
            Stratum::Interior => 0,
            Stratum::Facet(_) => 1,
            Stratum::Face(_, _) => 2,
            Stratum::Vertex(_) => 3,
        };
        counts[k] += 1;
        let cert = rank_certificate(&cqs, &s.point.u, &tols)?;
        assert!(cert.ratio > 1e-8, "degenerate Jacobian at {:?}", s.stratum);
    }
    println!(
        "  40 samples: {} interior, {} facet, {} codim-2, {} vertex; all rank-certified",
        counts[0], counts[1], counts[2], counts[3]
    );
    Ok(())
}
