//! GraphMinNet: a graph layer that carries minimal-GRU-style gating to
//! graphs through spectral positional encodings, with linear cost in the
//! node count.
//!
//! The crate is organized around the pipeline:
//!
//! * [`graph`] — graph data structures, synthetic generators, file I/O
//! * [`spectral`] — Laplacians and top-d eigenpairs (Lanczos / dense)
//! * [`numerics`] — dense tensors with a reverse-mode tape
//! * [`model`] — the layer itself, the hybrid block, sequence reference
//! * [`training`] — losses, Adam, train/eval loops
//! * [`verify`] — executable property checks and benchmarks
//!
//! Numeric code is generic over [`Scalar`] (f32 or f64); f64 is the default
//! everywhere tolerances matter. Concrete aliases are exported below.

pub mod graph;
pub mod model;
pub mod presets;
pub mod numerics;
pub mod scalar;
pub mod spectral;
pub mod training;
pub mod verify;

pub use scalar::Scalar;

pub type Tensor32 = numerics::Tensor<f32>;
pub type Tensor64 = numerics::Tensor<f64>;
pub type Tape32 = numerics::Tape<f32>;
pub type Tape64 = numerics::Tape<f64>;
pub type SparseMatrix64 = spectral::SparseMatrix<f64>;
pub type SpectralCache64 = spectral::SpectralCache<f64>;
