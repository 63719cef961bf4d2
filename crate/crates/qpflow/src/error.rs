//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // --- case ingestion ---
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate bus id {0}")]
    DuplicateBusId(i64),
    #[error("case has no slack bus")]
    NoSlackBus,
    #[error("more than one slack bus (buses {0} and {1})")]
    MultipleSlackBuses(i64, i64),
    #[error("{referenced_by} references unknown bus {bus}")]
    UnknownBus { bus: i64, referenced_by: String },
    #[error("base MVA must be positive, got {0}")]
    NonPositiveBaseMva(f64),
    #[error("case has no buses")]
    EmptyBusList,
    #[error("in-service branch {from}-{to} has zero series impedance")]
    ZeroImpedanceBranch { from: i64, to: i64 },
    #[error("branch {from}-{to} has non-positive tap ratio {tap}")]
    InvalidTap { from: i64, to: i64, tap: f64 },
    #[error("bus {0} is a slack/pv bus with non-positive voltage setpoint")]
    InvalidVoltageSetpoint(i64),
    #[error("generator at bus {0} has non-finite active power")]
    NonFiniteGenPower(i64),
    #[error("malformed JSON document: {0}")]
    Json(#[from] serde_json::Error),

    // --- statevector simulation ---
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::qsim::MAX_QUBITS)]
    QubitCountOutOfRange(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndexOutOfRange { index: usize, n_qubits: usize },
    #[error("CNOT control equals target ({0})")]
    ControlEqualsTarget(usize),
    #[error("{0} gate requires a rotation angle")]
    MissingRotationAngle(&'static str),
    #[error("{0} gate does not take a rotation angle")]
    UnexpectedRotationAngle(&'static str),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("combined state exceeds the supported qubit budget")]
    SizeOverflow,
    #[error("state vector norm {0} is not 1")]
    NotNormalized(f64),
    #[error("weight slot {0} bound to more than one gate")]
    DuplicateWeightSlot(usize),
    #[error("parameter slot indices are not contiguous from 0 (got {0})")]
    NonContiguousSlot(usize),
    #[error("shot count must be at least 1")]
    ZeroShots,

    // --- grid model ---
    #[error("reference vector has zero 1-norm")]
    ZeroNormReference,
    #[error("could not draw a Newton-Raphson-feasible instance after {0} attempts")]
    InfeasibleSampling(usize),

    // --- measurement grouping ---
    #[error(
        "conjugated specification component is not diagonal \
         (offset {offset}, max off-diagonal {max_off:e})"
    )]
    NonDiagonalConjugation { offset: usize, max_off: f64 },

    // --- training ---
    #[error("training diverged at iteration {iter} (objective {objective:e})")]
    Diverged { iter: usize, objective: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
