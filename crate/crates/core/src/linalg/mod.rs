//! Dense numeric kernel: tensors, matrix products and seeded random streams.

mod rng;
mod tensor;

pub use rng::{gauss, RngStream};
pub use tensor::{matmul, matmul_nt, matmul_tn, Tensor};
