//! Numerics for translation-invariant particle–field fiber Hamiltonians on a
//! truncated bosonic Fock space.
//!
//! The linear algebra, Fock-space and convex-analysis kernels are generic
//! over [`Scalar`] (`f32` or `f64`); the physics layers work in `f64`, where
//! the verification tolerances live.

pub mod convex;
pub mod fock;
pub mod infrared;
pub mod linalg;
pub mod massshell;
pub mod model;
pub mod scalar;
pub mod spectral;

pub use scalar::Scalar;

pub type ModeGrid = fock::ModeGrid<f64>;
pub type ModeGridF32 = fock::ModeGrid<f32>;
pub type OneBosonFunction = fock::OneBosonFunction<f64>;
pub type OneBosonFunctionF32 = fock::OneBosonFunction<f32>;
pub type SparseOperator = linalg::CsrMatrix<f64>;
pub type SparseOperatorF32 = linalg::CsrMatrix<f32>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type Parabola = convex::Parabola<f64>;
pub type ParabolaF32 = convex::Parabola<f32>;
pub use fock::FockBasis;
