use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The RLS gain denominator went non-positive, which cannot happen
    /// while the covariance stays positive definite.
    #[error("numerical breakdown in RLS update: gamma = {gamma}")]
    NumericalBreakdown { gamma: f64 },

    /// The Riccati iteration did not reach its tolerance, typically
    /// because the identified pair is (near-)unstabilizable.
    #[error("gain synthesis failed to converge: residual = {residual:.3e} after {iters} iterations")]
    SynthesisFailure { residual: f64, iters: usize },

    #[error("state diverged (non-finite) at substep {step}")]
    Divergence { step: usize },

    #[error("empty run log")]
    EmptyLog,
}
