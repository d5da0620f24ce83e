//! Dataset-shift workbench: generate binary classification tasks with
//! controlled distribution shifts, train a panel of robust-training
//! algorithms on each task, and learn to predict which algorithm will
//! achieve the lowest worst-group error on unseen shift configurations.
//!
//! The crate is organised as a pipeline:
//!
//! - [`shiftgen`] constructs tasks whose train split realises requested
//!   degrees of spurious correlation, label shift, and covariate shift.
//! - [`algorithms`] trains the five candidate algorithms (ERM, GroupDRO,
//!   Oversample, Undersample, LogitAdjust) as linear models and scores
//!   them by worst-group error on a group-balanced test split.
//! - [`metadataset`] turns a sweep of tasks into records of
//!   `(descriptor, per-algorithm errors, suitability labels)`.
//! - [`selectors`] trains models that map a dataset descriptor to a
//!   choice of algorithm, plus non-learned baselines.
//! - [`eval`] measures selection quality and runs the analysis suite
//!   (gap distributions, scaling curves, descriptor ablations, tree
//!   export).
//!
//! Everything is deterministic given a master seed: per-task seeds are
//! derived with a stable mix function ([`rng::derive_seed`]), all
//! stochastic draws go through ChaCha generators, and parallel
//! reductions use fixed chunk boundaries so that results are bitwise
//! identical whatever the worker count (see [`par`]).

pub mod algorithms;
pub mod error;
pub mod eval;
pub mod metadataset;
pub mod par;
pub mod rng;
pub mod selectors;
pub mod shiftgen;

pub use error::{Error, Result};
