use thiserror::Error;

/// Errors raised by builders, operators and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("metric undefined: graph is disconnected ({components} components)")]
    MetricUndefined { components: usize },
    #[error("operator not positive: eigenvalue {eigenvalue:e} below -{bound:e}")]
    NotPositive { eigenvalue: f64, bound: f64 },
    #[error("operator not self-adjoint in the weighted inner product (residual {residual:e})")]
    NotSelfAdjoint { residual: f64 },
    #[error("function undefined at eigenvalue {eigenvalue}")]
    FunctionUndefined { eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("spectral interval [{lo}, {hi}] excludes eigenvalue {eigenvalue}")]
    IntervalExcludesSpectrum { lo: f64, hi: f64, eigenvalue: f64 },
    #[error("degenerate fit: need at least {needed} points, got {got}")]
    DegenerateFit { needed: usize, got: usize },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("outside regime: {0}")]
    Regime(String),
    #[error("window too small: boundary value {boundary:e} exceeds threshold; try T >= {suggested}")]
    WindowTooSmall { boundary: f64, suggested: f64 },
    #[error("singular moment system; use at least {suggested} bumps")]
    SingularMomentSystem { suggested: usize },
    #[error("K = {k} too small for alpha = {alpha}: need Phi^(l)(0) = 0 for l <= {needed}")]
    InsufficientOrder { k: usize, alpha: f64, needed: usize },
    #[error("level below global average: {{Mf > lambda}} covers the whole space")]
    LevelBelowAverage,
    #[error("Lipschitz bound violated on edge ({a}, {b}): |xi(a) - xi(b)| = {jump} > kappa * rho = {allowed}")]
    Lipschitz { a: usize, b: usize, jump: f64, allowed: f64 },
    #[error("inconsistent orientation: {0}")]
    Orientation(String),
    #[error("node spacing {spacing} exceeds the Nyquist limit {limit} for the spectral radius")]
    Nyquist { spacing: f64, limit: f64 },
    #[error("t = {0} is below the cancellation guard t >= 0.1")]
    CancellationGuard(f64),
    #[error("dense path refuses n*l = {0} > 4096")]
    TooLarge(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
