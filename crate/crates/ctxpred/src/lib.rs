//! Context-aware interaction classification for visual relationship
//! detection.
//!
//! Given two localized objects in an image, the task is to name the
//! interaction (predicate) between them. The classifiers here condition
//! their weights on *which* objects interact: word embeddings of the
//! subject and object labels are projected through a learned bottleneck,
//! and each predicate adds a low-rank correction generated from that
//! code to its base weight vector. The same mechanism can also generate
//! the attention head that pools convolutional feature maps over the
//! union region of the two boxes.
//!
//! Everything is plain `f64` on the CPU, single-threaded, and seeded, so
//! results are reproducible bit for bit. Gradients are hand-derived and
//! verified against finite differences.
//!
//! Start with the runnable examples:
//!
//! - `spatial_features`: box-pair geometry encodings
//! - `embeddings_and_context`: word vectors and context codes
//! - `attention_pooling`: feature-map pooling with learned attention
//! - `gradient_check`: finite-difference verification of the backward pass
//! - `train_context_xor`: a task only context-aware models can solve
//! - `zero_shot`: generalizing to object pairs never seen in training
//! - `recall_protocol`: ranked retrieval metrics over detections
//! - `language_priors`: reweighting predictions with triplet statistics
//! - `parameter_scaling`: parameter counts as the vocabulary grows

pub mod cli;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod numcore;
pub mod train;

pub use error::{Error, Result};
