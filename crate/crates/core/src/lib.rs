//! Denoising of weakly supervised text classification labels by k-fold
//! cross-validation.
//!
//! The crate covers the full path from documents plus labeling-function (LF)
//! matches to corrected labels and a trained classifier:
//!
//! * [`corpus`]: the weak dataset (`Z` match matrix, `T` LF-to-class mapping),
//!   majority voting and dataset statistics.
//! * [`featurize`] and [`linear`]: TF-IDF features and a weighted multinomial
//!   logistic regression trained with SGD.
//! * [`crossval`]: random, LF-based and signature-based fold plans and the
//!   out-of-sample probability matrix.
//! * [`confidence`]: per-class thresholds and confident labels.
//! * [`ulf`]: iterative refinement of the LF-to-class matrix.
//! * [`wscw`] and [`wscl`]: sample downweighting and confident-joint pruning.
//! * [`synth`]: a synthetic generator with known gold labels.
//! * [`harness`]: file formats, configuration, metrics, repeated runs and grid
//!   search used by the `ulf` command line tool.

pub mod confidence;
pub mod corpus;
pub mod crossval;
mod error;
pub mod featurize;
pub mod harness;
pub mod linear;
pub mod seed;
pub mod synth;
pub mod ulf;
pub mod wscl;
pub mod wscw;

pub use error::{Error, Result};
