//! Dense `f64` tensors, a reverse-mode tape, and a seeded counter-based RNG.

mod rng;
mod tape;
mod tensor;

pub use rng::Rng;
pub use tape::{AttentionGeometry, Gradients, Tape, Var};
pub use tensor::Tensor;
