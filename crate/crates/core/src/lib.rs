//! MPDO-based noisy quantum circuit simulator core.

pub mod channels;
pub mod circuit;
pub mod dense;
pub mod metrics;
pub mod mpdo;
pub mod qpt;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod tensor;
