use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GkdvError {
    #[error("negative base {u} with non-integer exponent {exp}")]
    NegativeBase { u: f64, exp: f64 },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("cannot parse nonlinearity spec `{spec}`: {reason}")]
    ParseNonlinearity { spec: String, reason: String },

    #[error("no solitary wave at speed c = {c}")]
    NoSolitaryWave { c: f64 },

    #[error("speed c = {c} is at or beyond the sonic limit (c*xi + f(xi) = {slope})")]
    SonicLimit { c: f64, slope: f64 },

    #[error("stationary residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("singular linear system ({0})")]
    SingularSystem(String),

    #[error("Fredholm condition violated: growth indicator {indicator:e} above {threshold:e}")]
    FredholmViolation { indicator: f64, threshold: f64 },

    #[error("pairing matrix is singular (det = {det:e})")]
    SingularT { det: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("dN/dc has the same sign at both ends of [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("blow-up detected; closed-form blow-up time {t_blowup}")]
    BlowupDetected { t_blowup: f64 },

    #[error("no fixed points for lambda' = {lambda_prime}, E1 = {e1}")]
    NoFixedPoints { lambda_prime: f64, e1: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("field reaches the periodic seam (edge amplitude {edge:e}, floor {floor:e})")]
    SeamContamination { edge: f64, floor: f64 },

    #[error("modulation Newton diverged at t = {t} (residual {residual:e})")]
    NewtonDiverged { t: f64, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl GkdvError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            GkdvError::NoSolitaryWave { .. } | GkdvError::SonicLimit { .. } => 2,
            GkdvError::ParseNonlinearity { .. }
            | GkdvError::InvalidNonlinearity(_)
            | GkdvError::InvalidArgument(_)
            | GkdvError::Config(_) => 64,
            GkdvError::Io(_) => 74,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for GkdvError {
    fn from(e: std::io::Error) -> Self {
        GkdvError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GkdvError>;
