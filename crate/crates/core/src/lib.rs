//! Generalized canonical polyadic (GCP) tensor decompositions with symmetry
//! along arbitrary groups of modes.
//!
//! A model is a [`SymKruskal`] tensor: one factor matrix per cell of a
//! [`ModePartition`], shared by every mode in the cell. Models are fitted to
//! dense or sparse data under an entrywise [`LossSpec`] either with exact
//! gradients and a bound-constrained quasi-Newton method
//! ([`optimize::fit_lbfgsb`]) or with sampled gradients and Adam
//! ([`optimize::fit_adam`]).

mod canonical;
pub mod config;
pub mod error;
pub mod io;
pub mod kernels;
pub mod kruskal;
pub mod losses;
pub mod objective;
pub mod optimize;
pub mod partition;
pub mod stochastic;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use kruskal::SymKruskal;
pub use losses::{LossSpec, WeightTensor, WeightedLoss};
pub use objective::{GradientBundle, Objective, ObjectiveConfig, ParamLayout};
pub use partition::ModePartition;
pub use tensor::{DenseTensor, SparseTensor, TensorData};
