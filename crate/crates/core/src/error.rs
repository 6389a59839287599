use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("operator is not positive definite: curvature {curvature:e} at iteration {iteration}")]
    NonPositiveCurvature { iteration: usize, curvature: f64 },
    #[error("stop rule needs projected hypergradient-error data but the recycle space carries none")]
    MissingNscData,
    #[error("projected Hessian is numerically singular (sigma_min {sigma_min:e}, sigma_max {sigma_max:e})")]
    SingularProjectedHessian { sigma_min: f64, sigma_max: f64 },
    #[error("dense variant refused for n = {n} (limit {limit})")]
    TooLargeForDense { n: usize, limit: usize },
    #[error("lower-level solve stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    LowerSolveStalled { iterations: usize, grad_norm: f64 },
    #[error("inner solve did not converge: residual {residual:e} after {iterations} iterations")]
    InnerSolveFailed { iterations: usize, residual: f64 },
    #[error("cannot parse strategy {input:?}: {reason}")]
    StrategyParse { input: String, reason: &'static str },
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        Error::ShapeMismatch {
            context,
            expected,
            found,
        }
    }
}
