//! Joint sentiment and sarcasm classification: a GRU encoder with task
//! projections, shared attention, and neural-tensor-network fusion, built on
//! a minimal f64 reverse-mode autodiff engine. `no_std` compatible (alloc
//! required); IO, file formats, and the CLI live in the companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod models;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::EmbeddingTable;
pub use models::{coerce, Model, ModelConfig, ModelOutput, Variant};
pub use params::{ParamId, ParamSet};
pub use tensor::{NodeId, Tape, Tensor};
pub use training::{adam_step, joint_loss, train, AdamState, EpochRecord, TrainConfig, TrainSample};
