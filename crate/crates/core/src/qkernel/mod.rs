//! Minimal dense density-matrix kernel: matrices, gates, channels, partial
//! trace and projective measurement. Everything indexes qubits with qubit 0
//! as the most significant bit of a basis state.

mod density;
mod kraus;
mod matrix;
mod unitary;

pub use density::DensityMatrix;
pub use kraus::KrausChannel;
pub use matrix::{CMatrix, PivotedCholesky};
pub use unitary::{qft_sequence, Unitary};
