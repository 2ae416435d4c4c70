//! Exact simulation of a distributed quantum adder that sums private inputs
//! from `m` parties on a remote server, using GHZ-mediated non-local CNOT
//! gates over noisy links.
//!
//! The crate has three layers:
//!
//! * a small dense density-matrix kernel ([`qkernel`]) with unitary and Kraus
//!   channel application, partial trace and projective measurement;
//! * the protocol itself: noisy GHZ resources and teleported fan-out CNOTs
//!   ([`ghzlink`]), the adder pipeline with three interchangeable engines
//!   ([`dqa`]), link-noise channels ([`noise`]) and the closed-form output
//!   distribution it should match ([`analytic`]);
//! * a trusted-party-free extension ([`ntpa`]) that splits each input into
//!   Shamir shares ([`sss`]) and runs one adder round per party.
//!
//! The library is `no_std` + `alloc`; everything that needs an operating
//! system (files, CLI, JSON) lives in the companion `dqa-cli` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

use alloc::string::String;
use core::fmt;

pub mod analytic;
pub mod dqa;
pub mod ghzlink;
pub mod noise;
pub mod ntpa;
pub mod qkernel;
pub mod sss;

/// Numeric tolerances used by constructors, invariants and cross-checks.
///
/// Constructors enforce the tight tolerances (a freshly built gate really must
/// be unitary to near machine precision); cross-engine and closed-form
/// comparisons get looser budgets because error accumulates over thousands of
/// floating-point operations.
pub mod tol {
    /// Allowed deviation of a density-matrix trace from 1.
    pub const TRACE: f64 = 1e-10;
    /// Allowed Hermiticity defect `max |A - A†|` for density matrices.
    pub const HERMITICITY: f64 = 1e-12;
    /// Allowed unitarity defect `max |U U† - I|` for gates.
    pub const UNITARITY: f64 = 1e-12;
    /// Allowed completeness defect `max |Σ K†K - I|` for Kraus channels.
    pub const COMPLETENESS: f64 = 1e-12;
    /// Eigenvalue floor when checking positive semidefiniteness.
    pub const PSD: f64 = 1e-10;
    /// Budget for comparisons between engines, or engine vs closed form.
    pub const ENGINE_MATCH: f64 = 1e-9;
    /// Budget for identities evaluated on the closed form alone.
    pub const CLOSED_FORM: f64 = 1e-12;
    /// Total-variation budget for 9,000-shot histograms on 3-bit registers.
    pub const SAMPLING_TV: f64 = 0.03;
}

/// Default ceiling on the total number of simulated qubits.
///
/// A dense density matrix on `N` qubits holds `4^N` complex entries; 12 qubits
/// is 268 MB and roughly the largest register that stays comfortable in
/// memory. Configs may lower the limit; the CLI can override it.
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A dimension or length did not match what the operation requires.
    DimensionMismatch { expected: usize, got: usize },
    /// A matrix dimension that must be a power of two was not.
    NotPowerOfTwo(usize),
    /// A qubit index was outside the register.
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    /// The same qubit appeared twice in a target list.
    DuplicateTarget(usize),
    /// Hermiticity defect above [`tol::HERMITICITY`] (value = defect).
    NotHermitian(f64),
    /// Trace differed from 1 by more than [`tol::TRACE`] (value = |tr - 1|).
    NotUnitTrace(f64),
    /// Unitarity defect above [`tol::UNITARITY`] (value = defect).
    NotUnitary(f64),
    /// Kraus completeness defect above [`tol::COMPLETENESS`].
    NotCompletelyPositive(f64),
    /// A negative eigenvalue below -[`tol::PSD`] was found.
    NotPositive(f64),
    /// A matrix entry was NaN or infinite.
    NonFinite,
    /// A probability left `[0, 1]` beyond tolerance.
    InvalidProbability(f64),
    /// Conditioning on a measurement outcome of (numerically) zero probability.
    ZeroProbabilityBranch,
    /// The request needs more qubits than the configured ceiling.
    Capacity { needed: usize, limit: usize, what: &'static str },
    /// An exact enumeration would visit more states than the configured cap.
    EnumerationTooLarge { states: u128, limit: u128 },
    /// A configuration field failed validation.
    InvalidConfig(String),
    /// Per-qubit fidelity estimates disagreed beyond tolerance, so no single
    /// fidelity parameter describes the state (value = spread).
    FidelityNotUniform(f64),
    /// The modulus of a finite field was not prime.
    NotPrime(u64),
    /// The field modulus exceeds the supported range (must be < 2^61).
    FieldTooLarge(u64),
    /// A value was not a valid field element for the given modulus.
    NotAFieldElement { value: u64, modulus: u64 },
    /// A share evaluation point was 0 or repeated (x = 0 would leak the secret).
    BadSharePoint(u64),
    /// Reconstruction was attempted with no shares.
    NoShares,
}

impl Error {
    /// Whether the error is a resource-limit condition (as opposed to an
    /// invalid input or a numerical invariant failure).
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. } | Error::EnumerationTooLarge { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NotPowerOfTwo(d) => write!(f, "dimension {d} is not a power of two"),
            Error::QubitOutOfRange { qubit, num_qubits } => {
                write!(f, "qubit {qubit} out of range for a {num_qubits}-qubit register")
            }
            Error::DuplicateTarget(q) => write!(f, "qubit {q} listed twice in targets"),
            Error::NotHermitian(d) => write!(f, "matrix is not Hermitian (defect {d:.3e})"),
            Error::NotUnitTrace(d) => write!(f, "trace differs from 1 by {d:.3e}"),
            Error::NotUnitary(d) => write!(f, "matrix is not unitary (defect {d:.3e})"),
            Error::NotCompletelyPositive(d) => {
                write!(f, "Kraus operators do not sum to identity (defect {d:.3e})")
            }
            Error::NotPositive(v) => write!(f, "matrix has negative eigenvalue {v:.3e}"),
            Error::NonFinite => write!(f, "matrix contains a non-finite entry"),
            Error::InvalidProbability(p) => write!(f, "invalid probability {p}"),
            Error::ZeroProbabilityBranch => {
                write!(f, "conditioning on a zero-probability measurement outcome")
            }
            Error::Capacity { needed, limit, what } => {
                write!(f, "{what} needs {needed} qubits but the limit is {limit}")
            }
            Error::EnumerationTooLarge { states, limit } => {
                write!(f, "exact enumeration of {states} states exceeds the cap of {limit}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::FidelityNotUniform(s) => {
                write!(f, "per-qubit fidelity estimates spread by {s:.3e}")
            }
            Error::NotPrime(q) => write!(f, "{q} is not prime"),
            Error::FieldTooLarge(q) => write!(f, "field modulus {q} is not below 2^61"),
            Error::NotAFieldElement { value, modulus } => {
                write!(f, "{value} is not an element of GF({modulus})")
            }
            Error::BadSharePoint(x) => write!(f, "invalid share evaluation point {x}"),
            Error::NoShares => write!(f, "no shares supplied"),
        }
    }
}

impl core::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
