//! # sedge — structured-forest edge detection
//!
//! A library (plus a thin `sedge` binary) for learning and running a
//! realtime edge detector built on structured random decision forests.
//! Instead of classifying single pixels, each tree predicts a whole 16x16
//! segmentation mask for its patch; overlapping per-patch edge maps are
//! averaged into a dense edge probability map.
//!
//! The pipeline:
//!
//! 1. [`channels`] — convert an image into color/gradient feature channels
//!    and self-similarity features.
//! 2. [`forest`] — train structured trees (pair-equality mapping, PCA or
//!    k-means discretization, information-gain stumps, medoid leaves).
//! 3. [`detector`] — dense stride-2 inference with checkerboard tree
//!    alternation, optional mask sharpening and multiscale averaging, and
//!    non-maximal suppression.
//! 4. [`eval`] — boundary benchmarking (correspondence matching, PR curves,
//!    ODS/OIS/AP/R50) and a synthetic corpus generator.
//! 5. [`model`] / [`config`] / [`cli`] — binary model files, JSON run
//!    configuration, and the command-line surface.
//!
//! ```no_run
//! use sedge::prelude::*;
//!
//! let corpus = sedge::eval::synth_corpus(7, 4, 96);
//! let dataset = sedge::eval::corpus_to_dataset(corpus);
//! let params = ForestParams { n_patches: 2_000, ..ForestParams::default() };
//! let (forest, _) = sedge::forest::train_forest(&dataset, &params, &ChannelParams::default())?;
//! let edges = sedge::detector::detect(&dataset.images[0], &forest, &DetectOptions::default())?;
//! assert!(edges.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
//! # Ok::<(), sedge::Error>(())
//! ```

pub mod channels;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod detector;
mod error;
pub mod eval;
pub mod forest;
pub mod model;
pub mod plane;

pub use error::{Error, Result};

/// The common imports for working with the detector.
pub mod prelude {
    pub use crate::channels::ChannelParams;
    pub use crate::detector::DetectOptions;
    pub use crate::forest::{Forest, ForestParams};
    pub use crate::plane::{FloatPlane, Image};
}
