use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid construction: {0}")]
    GridConstruction(String),

    /// A donor stencil could not be placed on discretization/boundary points
    /// only. Interpolation must stay explicit, so this is fatal.
    #[error("implicit interpolation not supported: {0}")]
    ImplicitInterpolation(String),

    /// Component overlap too narrow for the interpolation stencils.
    #[error("overlap too thin: {0}")]
    OverlapTooThin(String),

    #[error("configuration: {0}")]
    Config(String),

    /// The time integration blew up (max|W| not finite or above the guard).
    #[error("instability detected at step {step}: max|W| = {max_w:.3e}")]
    Instability { step: usize, max_w: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
