//! Swarm-learning simulation with a jointly trained conditional GAN.
//!
//! Participants hold label-skewed slices of a dataset and train models locally.
//! At every synchronization boundary a randomly elected participant aggregates
//! everyone's parameters, weighted by local data size, and sends the result back.
//! The jointly trained generator is then used to rebalance each participant's data
//! to the global label distribution before a target classifier is trained the
//! same way. FedProx, FedNova and Mixup baselines share the same swarm loop.

pub mod augment;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod gan;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod swarm;
pub mod trainer;

pub use error::{Error, Result};
