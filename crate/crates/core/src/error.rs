use thiserror::Error;

#[derive(Debug, Error)]
pub enum RotorError {
    #[error("invalid quantum numbers J={j}, M={m}")]
    InvalidQuantumNumbers { j: i64, m: i64 },

    #[error("polar angle {0} outside [0, pi]")]
    InvalidPolarAngle(f64),

    #[error("axis is not a unit vector (|a| = {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("state belongs to a basis with j_max={found}, expected j_max={expected}")]
    BasisMismatch { expected: u32, found: u32 },

    #[error("cogwheel |{j},{j}> + |{top},{top}> does not fit in a basis with j_max={j_max}")]
    CogwheelOutsideBasis { j: u32, top: u32, j_max: u32 },

    #[error("invalid cogwheel specification: {0}")]
    InvalidCogwheel(String),

    #[error("amplitude vector has length {found}, basis dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hamiltonian sample at t={time:e} s is not Hermitian (max |H - H^dagger| = {error:e})")]
    NonHermitian { time: f64, error: f64 },

    #[error("closed-form magnetic propagation requires the field along +y or -y; use generic_propagate for axis {axis:?}")]
    FieldNotAlongY { axis: [f64; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("initial state is not a |J,J> eigenstate (largest population {0})")]
    NotStretchedState(f64),

    #[error("densities live on different grids ({0:?} vs {1:?})")]
    GridMismatch((usize, usize), (usize, usize)),

    #[error("precession estimation failed: {0}")]
    EstimationFailed(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, RotorError>;
