use thiserror::Error;

/// Everything that can go wrong between an H-representation and a verified
/// equivariant diffeomorphism. Variants are grouped by the stage that raises
/// them; messages carry the numbers a caller needs to diagnose the input.
#[derive(Debug, Error)]
pub enum Error {
    // --- polytope validation ---
    #[error("facet matrix has rank {rank}, expected full rank {dim}")]
    NotFullRank { rank: usize, dim: usize },
    #[error("feasible set is unbounded along direction {direction:?}")]
    Unbounded { direction: Vec<f64> },
    #[error("vertex {vertex:?} lies on {active} facets, expected exactly {dim}; polytope is not simple")]
    NotSimple {
        vertex: Vec<f64>,
        active: usize,
        dim: usize,
    },
    #[error("facet {facet} is not active at any vertex; redundant inequalities are not accepted")]
    RedundantFacet { facet: usize },
    #[error("feasible set is empty or degenerate ({vertices} vertices found)")]
    Empty { vertices: usize },
    #[error("facet rows {rows:?} do not meet in a vertex: submatrix is singular")]
    SingularChartMatrix { rows: Vec<usize> },

    // --- embedding and combinatorics ---
    #[error("point is {distance:.3e} away from the image of the affine embedding (tolerance {tol:.3e})")]
    NotInImage { distance: f64, tol: f64 },
    #[error("polytopes are not combinatorially equivalent: {reason}")]
    NotEquivalent { reason: String },
    #[error("combinatorial matching exceeded the search budget of {budget} nodes")]
    SearchBudgetExceeded { budget: u64 },

    // --- manifold operations ---
    #[error("point violates facet {facet} by {violation:.3e}; outside the polytope")]
    OutsidePolytope { facet: usize, violation: f64 },
    #[error("rejection sampler produced {accepted} of {requested} points within {attempts} attempts")]
    RejectionBudgetExceeded {
        requested: usize,
        accepted: usize,
        attempts: u64,
    },
    #[error("point is off the manifold: quadric residual {residual:.3e} exceeds {tol:.3e}")]
    OffManifold { residual: f64, tol: f64 },
    #[error("quadric Jacobian is rank deficient: s_min/s_max = {ratio:.3e} at tolerance {tol:.3e}")]
    RankDeficient { ratio: f64, tol: f64 },

    // --- atlas ---
    #[error("point is not in chart {chart}: {reason}")]
    NotInChart { chart: String, reason: String },
    #[error("coordinates leave the domain of chart {chart}: functional for facet {facet} evaluates to {value:.3e}")]
    NotInChartDomain {
        chart: String,
        facet: usize,
        value: f64,
    },
    #[error("charts {from_chart} and {to_chart} have empty overlap: signs disagree on facet {facet}")]
    EmptyOverlap {
        from_chart: String,
        to_chart: String,
        facet: usize,
    },
    #[error("transition smoothness check failed: worst Jacobian residual {residual:.3e} exceeds {tol:.3e}")]
    SmoothnessViolation { residual: f64, tol: f64 },

    // --- collars and smoothing ---
    #[error("smoothing blend is not monotone on [{lo:.3e}, {hi:.3e}] after {subdivisions} subdivisions; shrink the width")]
    MonotonicityFailure {
        lo: f64,
        hi: f64,
        subdivisions: u32,
    },
    #[error("collar width {delta:.3e} is unsafe: {reason}")]
    WidthTooLarge { delta: f64, reason: String },
    #[error("partition of unity has no support: {detail}")]
    BlendFailure { detail: String },
    #[error("collar flow left the polytope: facet {facet} reached {value:.3e} at time {time:.3e}")]
    LeftPolytope { facet: usize, value: f64, time: f64 },
    #[error("collar inversion did not converge: residual {residual:.3e} after {iterations} Newton iterations")]
    CollarInversionFailure { residual: f64, iterations: u32 },

    // --- base maps and lifts ---
    #[error("no affine equivalence realizes the facet pairing: worst vertex residual {residual:.3e}")]
    NotAffinelyEquivalent { residual: f64 },
    #[error("lifted point violates the target quadric system: residual {residual:.3e} exceeds {tol:.3e}; the base map does not respect the facet pairing")]
    TargetMembershipViolation { residual: f64, tol: f64 },
    #[error("wall derivative check failed at facet {facet}: {detail}")]
    WallDerivativeViolation { facet: usize, detail: String },
    #[error("external map evaluator failed: {0}")]
    ExternalMap(String),

    // --- input handling ---
    #[error("cannot parse input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
