use thiserror::Error;

/// Errors raised by the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("volume {value:e} outside the admissible domain [{min:e}, {max:e}]")]
    Domain { value: f64, min: f64, max: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("moment vector is not realizable: non-positive pivot at order {order}")]
    Realizability { order: usize },

    #[error("maximum-entropy solve failed after exhausting the regularization ladder (last gradient norm {gradient_norm:e})")]
    Optimization { gradient_norm: f64 },

    #[error("non-finite density value at v = {at:e}")]
    Evaluation { at: f64 },

    #[error("time step {dt:e} too large: cell {cell} became negative ({value:e})")]
    TimeStepTooLarge { dt: f64, cell: usize, value: f64 },

    #[error("time step {dt:e} violates the stability bound {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("closure failure in cell ({i}, {j}) at t = {time}: {source}")]
    Cell {
        i: usize,
        j: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("closure failure at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("steady solve did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Strips cell/time context and returns the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } | Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_closure_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::Realizability { .. } | Error::Optimization { .. } | Error::Evaluation { .. }
        )
    }

    /// Attaches the simulation time, keeping any cell coordinates.
    pub fn at_time(self, time: f64) -> Error {
        match self {
            Error::Cell { i, j, source, .. } => Error::Cell { i, j, time, source },
            Error::AtTime { source, .. } => Error::AtTime { time, source },
            other => Error::AtTime {
                time,
                source: Box::new(other),
            },
        }
    }

    pub fn is_cfl_violation(&self) -> bool {
        matches!(self.root(), Error::Cfl { .. } | Error::TimeStepTooLarge { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
