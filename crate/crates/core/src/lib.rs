//! Causal and regression trees grown to a fixed depth without pruning, with
//! the Monte Carlo and Ornstein–Uhlenbeck experiments used to study their
//! split locations, accuracy and bias.
//!
//! The pipeline runs [`dgp`] → [`splitting`] → [`tree`] → [`schemes`].
//! [`mc`] and [`ou`] drive experiments over it, and [`cli`] exposes them as
//! subcommands.
//!
//! ```
//! use causal_cart::dgp::{sample_dataset, DgpConfig};
//! use causal_cart::rng::RngStream;
//! use causal_cart::schemes::{estimate_nss, EstimatorSpec};
//!
//! let data = sample_dataset(&DgpConfig::null(500, 1), &mut RngStream::from_seed(7)).unwrap();
//! let spec: EstimatorSpec = "dim-nss-K2".parse().unwrap();
//! let fitted = estimate_nss(&data, &spec).unwrap();
//! assert!(fitted.leaf_partition().len() <= 4);
//! let tau_hat = fitted.predict(&[0.5]).unwrap();
//! assert!(tau_hat.is_finite());
//! ```

pub mod cli;
pub mod config;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod mc;
pub mod ou;
pub mod rng;
pub mod schemes;
pub mod selftest;
pub mod splitting;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/splitting.md")]
    struct Splitting;
    #[doc = include_str!("../../../book/src/trees.md")]
    struct Trees;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
