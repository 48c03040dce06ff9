//! Truncated bosonic Fock space on a momentum grid.

pub mod basis;
pub mod grid;
pub mod identities;
pub mod ops;
pub mod weyl;

pub use basis::{basis_size, FockBasis, DEFAULT_BASIS_LIMIT};
pub use grid::{ModeGrid, OneBosonFunction};
pub use identities::{
    ccr_residual, dgamma_additivity, dgamma_creation, number_identity, weyl_dgamma_law, weyl_field_law, weyl_orthogonality, IdentityResidual,
    WeylOrthogonality,
};
pub use ops::{
    annihilation, annihilator_slice, annihilator_slices, exponential_vector, field_block, field_momentum,
    field_momentum_diagonals, field_operator, number_expectation, number_operator, project_total_at_most,
    second_quantize, second_quantize_diagonal, sector_weights, smeared_annihilation,
};
pub use weyl::{leakage_of, weyl_apply_projected, weyl_apply_with, weyl_operator, WeylOperator, WeylOptions};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FockError {
    #[error("modes per axis must be even and positive, got {0}")]
    OddModeCount(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("basis of {size} states exceeds the limit {limit}")]
    BasisTooLarge { size: usize, limit: usize },
    #[error("cutoff {0} exceeds the supported maximum of 255")]
    CutoffTooLarge(usize),
    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("dense operator of size {size} exceeds the dense limit {limit}")]
    DenseLimit { size: usize, limit: usize },
    #[error("Weyl leakage {leakage:.3e} exceeds threshold {threshold:.3e}; increase the cutoff or shrink f")]
    LeakageExceeded { leakage: f64, threshold: f64 },
}
