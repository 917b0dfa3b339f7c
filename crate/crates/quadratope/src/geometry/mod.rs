//! Polytope geometry: validation, vertex enumeration, charts, combinatorics.

mod combin;
pub mod fixtures;
mod hrep;

pub use combin::{
    all_matchings, match_combinatorics, verify_matching, Incidence, DEFAULT_MATCH_BUDGET,
};
pub use hrep::{validate_hrep, Polytope, Vertex, VertexChart};

pub(crate) use hrep::orthogonal_direction;
