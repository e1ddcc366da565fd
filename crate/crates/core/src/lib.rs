//! Layer-local training of fully-connected networks with the Forward-Forward
//! objective and its balanced variant, SymBa.
//!
//! Every layer owns its loss: it sees a positive copy of each input (true
//! label injected) and a negative copy (wrong label injected), computes the
//! goodness `Σ y²` of its own activations, and updates its weights from a
//! closed-form gradient. Nothing is propagated between layers. Prediction
//! picks the label whose injected input produces the most total goodness.
//!
//! - [`numerics`]: matrices, seeded random stream, Adam.
//! - [`losses`]: goodness, FF and SymBa losses and their gradients.
//! - [`layer`]: one trainable layer.
//! - [`labeling`]: one-hot overlay and intrinsic class patterns.
//! - [`dataio`]: MNIST / CIFAR parsers and augmentation.
//! - [`trainer`]: training loops, backprop baseline, checkpoints.
//! - [`inference`]: goodness-argmax and softmax-argmax classification.
//! - [`cli`]: the `symba` command.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod inference;
pub mod labeling;
pub mod layer;
pub mod losses;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::LossConfig;
pub use numerics::{Matrix, Rng};
pub use trainer::{Algorithm, Checkpoint, LabelingKind, TrainConfig};
