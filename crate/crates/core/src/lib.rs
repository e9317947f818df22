//! Saccade landing prediction from delayed eye-tracker samples, and
//! adaptation of amplitude-indexed prediction models to new saccade
//! categories through a one-parameter shear of displacement profiles.
//!
//! Pipeline: [`detection`] turns a gaze stream into saccade traces and
//! profiles, [`profiles`] averages them, [`model`] builds the lookup model and
//! adapts it with [`shear`], [`predictor`] runs it online, [`synth`] generates
//! ground-truth corpora and [`eval`] scores models against them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod interp;
pub mod io;
pub mod isotonic;
pub mod model;
pub mod predictor;
pub mod profiles;
pub mod shear;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use model::{ModelParams, Prediction, PredictionModel};
pub use types::{
    CategoryLabel, DatasetMetadata, Factor, GazeSample, MeanProfile, SaccadeDataset, SaccadeProfile, SaccadeTrace,
};
