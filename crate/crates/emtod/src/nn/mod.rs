//! Numeric substrate: tensors, a reverse-mode tape, parameter storage,
//! Adam, a finite-difference gradient checker, and binary checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{Embedding, GruCell, LayerNorm, Linear};
pub use optim::Adam;
pub use params::{GradBuffer, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::{Precision, Tensor};
