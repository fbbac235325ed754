use thiserror::Error;

/// Errors produced by the radial shooting toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported order m = {0}; only m = 2 and m = 3 are implemented")]
    UnsupportedOrder(u32),

    #[error("invalid jet: {0}")]
    InvalidJet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("u must be positive, got u = {u} at r = {r}")]
    NonPositiveU { r: f64, u: f64 },

    #[error("the radial system is singular at r = 0; use the Taylor launch")]
    OriginSingularity,

    #[error("launch radius {r0} too large: next-order Taylor term {estimate:e} exceeds tolerance {tolerance:e}")]
    LaunchRadiusTooLarge {
        r0: f64,
        estimate: f64,
        tolerance: f64,
    },

    #[error("scaling factor must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error(
        "growth fit window [{r_lo}, {r_hi}] holds {samples} samples, need at least {required}"
    )]
    WindowTooNarrow {
        r_lo: f64,
        r_hi: f64,
        samples: usize,
        required: usize,
    },

    #[error("invalid growth fit window [{r_lo}, {r_hi}]: {reason}")]
    InvalidWindow {
        r_lo: f64,
        r_hi: f64,
        reason: String,
    },

    #[error("trajectory is not entire: {0}")]
    NotEntire(String),

    #[error("volume is undefined for a collapsed trajectory (r* = {r_star})")]
    UndefinedVolume { r_star: f64 },

    #[error("volume tail diverges: 3 + gamma*q = {exponent} >= 0 (gamma = {gamma})")]
    DivergentTail { gamma: f64, exponent: f64 },

    #[error("integration inconclusive: {0}")]
    Inconclusive(String),

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("horizon {horizon} too short: rho = {rho} classified entire; estimated horizon needed ~ {required:.3e}")]
    HorizonTooShort {
        horizon: f64,
        rho: f64,
        required: f64,
    },

    #[error("target volume {target} out of range (0, {max}]")]
    TargetOutOfRange { target: f64, max: f64 },

    #[error("volume table exhausted: largest tabulated volume {max_volume} at k = {max_k} is below target {target}")]
    TableExhausted {
        target: f64,
        max_k: f64,
        max_volume: f64,
    },

    #[error("root search failed: {0}")]
    SearchFailed(String),

    #[error("cache i/o: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
