use thiserror::Error;

/// Errors shared across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("series window underflow: coefficient of power {power} not stored (window [{lo}, {hi}]); {context}")]
    WindowUnderflow {
        power: i64,
        lo: i64,
        hi: i64,
        context: String,
    },

    #[error("singular leading coefficient at power {power}: {detail}")]
    SingularLeading { power: i64, detail: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("critical level: k = -{dual_coxeter} is excluded")]
    CriticalLevel { dual_coxeter: u32 },

    #[error("theta modulus must satisfy Im tau > 0, got Im tau = {0}")]
    BadModulus(f64),

    #[error("theta series did not self-converge: change on refinement = {0:.3e}")]
    ThetaNotConverged(f64),

    #[error("theta argument too close to a zero: |theta({arg})| = {value:.3e}")]
    ThetaPole { arg: String, value: f64 },

    #[error("weight block ({block}) is numerically degenerate: condition number {cond:.3e}; parameters appear non-generic")]
    DegenerateBlock { block: String, cond: f64 },

    #[error("rank deficiency while solving intertwiner at grade {grade}: rank {rank} < {expected}")]
    RankDeficient {
        grade: i64,
        rank: usize,
        expected: usize,
    },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("truncation too small: {0}")]
    DepthTooSmall(String),

    #[error("evaluation too close to a pole of the R-matrix: argument {0}")]
    RMatrixPole(String),

    #[error("product is not scalar: off-scalar residual {0:.3e}")]
    NotScalar(f64),

    #[error("{0}")]
    Other(String),
}
