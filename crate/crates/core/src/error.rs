use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected parameter at construction or call time.
    #[error("configuration: {0}")]
    Config(String),

    /// Two objects that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Advective CFL number above 0.5; the run is refused up front.
    #[error("time step too large: CFL number {cfl:.4} exceeds 0.5, use dt <= {suggested_dt:.6e}")]
    TimeStepTooLarge { cfl: f64, suggested_dt: f64 },

    /// The state stopped being finite mid-run.
    #[error("solution lost finiteness, last good time t = {last_good_time:.6}")]
    Unstable { last_good_time: f64 },

    /// Malformed snapshot or CSV input.
    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
