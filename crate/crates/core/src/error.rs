use thiserror::Error;

/// Errors produced by graph validation, preprocessing, templatisation and
/// the parameterisation solvers.
#[derive(Debug, Error)]
pub enum Error {
    // -- plane graph ---------------------------------------------------
    #[error("face {face}: edge loop does not chain head-to-tail at position {position}")]
    OpenLoop { face: usize, position: usize },
    #[error("face {face}: boundary loop is clockwise (signed area {area})")]
    OrientationError { face: usize, area: f64 },
    #[error("self-intersection between segments of edges {edge_a} and {edge_b}")]
    SelfIntersection { edge_a: usize, edge_b: usize },
    #[error("faces {face_a} and {face_b} are not interior-disjoint")]
    DisjointnessViolation { face_a: usize, face_b: usize },
    #[error("vertex {vertex} does not lie on face {face}")]
    VertexNotOnFace { vertex: usize, face: usize },
    #[error("cannot split edge {edge} at polyline endpoint index {index}")]
    EndpointSplit { edge: usize, index: usize },
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("invalid graph input: {0}")]
    InvalidInput(String),

    // -- preprocessing -------------------------------------------------
    #[error("splitting curve has zero length")]
    DegenerateCurve,

    // -- templates -----------------------------------------------------
    #[error("no quadrangulation exists for N = {n}, N_p = {n_patches}")]
    InfeasibleConfig { n: usize, n_patches: usize },
    #[error("glue system is singular (disconnected patch adjacency graph)")]
    SingularGlueSystem,
    #[error("template refinement chain revisited edge {edge}")]
    RefinementCycle { edge: usize },

    // -- surrogate -----------------------------------------------------
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("point ({x}, {y}) lies outside the triangulated domain")]
    PointOutsideDomain { x: f64, y: f64 },

    // -- selection -----------------------------------------------------
    #[error("all faces already carry a template")]
    AllTemplated,
    #[error("split-edge selection does not apply to even-sided faces with 4 or more edges")]
    NotApplicable,
    #[error("surrogate map is folded (non-positive image triangle)")]
    FoldedSurrogate,
    #[error("layout optimisation started from a folded configuration")]
    InfeasibleStart,

    // -- controlmap ----------------------------------------------------
    #[error("untangling failed: residual cost {cost} after {iterations} iterations")]
    UntangleFailed { cost: f64, iterations: usize },
    #[error("quad {quad} of the control template is not convex")]
    NonconvexQuad { quad: usize },

    // -- splines -------------------------------------------------------
    #[error("knot vectors have incompatible degree or base grid")]
    IncompatibleBases,
    #[error("curve fit did not converge after {recursions} recursions (worst residual {worst_residual})")]
    MaxRecursionsExceeded { recursions: usize, worst_residual: f64 },
    #[error("least-squares system is rank deficient (lambda = 0 and data too sparse)")]
    RankDeficient,
    #[error("knot propagation found an orientation conflict on edge class {class}")]
    OrientationConflict { class: usize },
    #[error("target knot vector is not a superset of the source")]
    NotASuperset,

    // -- multipatch space ----------------------------------------------
    #[error("knot vectors of adjacent patches do not conform on a shared edge")]
    NonconformingKnots,
    #[error("boundary data knots do not match the space on edge {edge}")]
    KnotMismatch { edge: usize },

    // -- solver ----------------------------------------------------------
    #[error("Newton did not converge: residual {residual} after {iterations} iterations")]
    NewtonDiverged { residual: f64, iterations: usize },
    #[error("map is folded: min det J = {min_det}")]
    FoldedMap { min_det: f64 },

    // -- io --------------------------------------------------------------
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
