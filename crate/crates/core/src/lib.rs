//! Joint extraction of entities and typed relations from dependency-parsed
//! sentences.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numerical and
//! algorithmic piece of the system:
//!
//! * [`graph`], [`params`], [`optim`]: a small reverse-mode autodiff engine
//!   over dynamically built per-sentence graphs, with Adam, global-norm
//!   clipping and parameter averaging.
//! * [`bilou`], [`sentence`], [`vocab`]: the data model and tag codec.
//! * [`depstruct`]: dependency-tree validation, lowest common ancestors,
//!   shortest paths and the three relation substructures.
//! * [`model`]: embeddings, the bidirectional sequence LSTM, the greedy
//!   entity tagger and the bidirectional typed-children tree LSTM used for
//!   relation classification.
//! * [`train`]: entity pretraining, joint training with scheduled sampling,
//!   prediction and evaluation.
//! * [`metrics`]: micro and macro precision/recall/F1.
//!
//! File formats, configuration files and the command line live in the
//! companion `relex` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bilou;
pub mod depstruct;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod sentence;
pub mod tensor;
pub mod train;
pub mod vocab;

mod math;

pub use error::{Error, Result};
pub use graph::{Gradients, Graph, NodeId};
pub use params::{ParamGroup, ParamId, ParamKind, ParamStore};
pub use tensor::Tensor;

/// Seeded generator used for initialization, dropout, scheduled sampling and
/// shuffling. Every stochastic step of training draws from one of these.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SeededRng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
