use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction or field/domain shape mismatch.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// Mask has no pixel whose four neighbours are all inside.
    #[error("mask has no interior pixel")]
    NoInteriorPixel,

    /// A field value that must be finite is NaN or infinite.
    #[error("non-finite value in {context} at pixel ({row}, {col})")]
    NonFinite {
        context: &'static str,
        row: usize,
        col: usize,
    },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// Mollification scale violates the chart admissibility bound.
    #[error("mollification scale {epsilon} violates admissibility bound {bound} (chart half-width {half_width}, alpha {alpha})")]
    InadmissibleEpsilon {
        epsilon: f64,
        bound: f64,
        half_width: f64,
        alpha: f64,
    },

    /// Some boundary pixel is not covered by any chart.
    #[error("charts do not cover the mask boundary: pixel ({row}, {col}) is uncovered")]
    ChartCoverage { row: usize, col: usize },

    /// A mask shape the chart builder does not handle.
    #[error("automatic charts require a full rectangular mask; supply charts explicitly")]
    UnsupportedMask,

    /// An operation required a converged trace.
    #[error("trace did not converge (last Cauchy gap {gap:.3e} > tol {tol:.3e})")]
    TraceNotConverged { gap: f64, tol: f64 },

    /// Iterative solver hit its iteration cap; carries the last duality gap.
    #[error("iteration limit {iterations} reached with duality gap {gap:.3e}")]
    IterationLimit { iterations: usize, gap: f64 },

    /// Transform coefficients violate their interval constraints.
    #[error("interval constraint violated at coefficient {index}: value {value:.6e} outside [{lower:.6e}, {upper:.6e}] beyond tol {tol:.3e}")]
    IntervalViolation {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
        tol: f64,
    },

    /// Partition levels passed to the flow approximation are not nested.
    #[error("partitions are not nested: level {level} does not contain level {coarser}")]
    PartitionsNotNested { coarser: usize, level: usize },

    /// Malformed FLD/PGM input; `offset` is the byte position of the defect.
    #[error("{format} parse error at byte {offset}: {message}")]
    Format {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
