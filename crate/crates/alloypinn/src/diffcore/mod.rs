//! Dense numerical kernel: jets for input derivatives, a reverse-mode tape
//! for parameter gradients, and the error-function family both share.

pub mod batch;
pub mod erf;
pub mod jet;
pub mod tape;

pub use batch::{DenseLayer, DenseNet, JetBatch, JetLayout};
pub use erf::{erf, erfc, erfcx};
pub use jet::{sigmoid, swish_derivs, JetValue, Real};
pub use tape::{DiffError, Grads, NodeRef, Tape};
