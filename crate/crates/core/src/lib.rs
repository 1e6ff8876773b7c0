//! Semi-supervised spectral-spatial classification of hyperspectral cubes.
//!
//! The crate covers the whole path from a cube on disk to a table of
//! scores: synthetic phantoms ([`synth`]), an RGB rendering of a cube
//! ([`rgbrecon`]), two feature extractors ([`mpri`] and [`tensorssa`]),
//! self-training and baseline classifiers ([`classify`]), evaluation and
//! significance testing ([`metrics`]), and the patch-wise experiment driver
//! ([`pipeline`]).
//!
//! ```no_run
//! use hsi_ssl::pipeline::{run_experiment, RunConfig};
//!
//! let config = RunConfig::load("experiment.toml")?;
//! let summary = run_experiment(&config)?;
//! println!("micro BACC {:?}", summary.micro.bacc);
//! # Ok::<(), hsi_ssl::Error>(())
//! ```

pub mod classify;
pub mod cube_io;
pub mod error;
pub mod metrics;
pub mod mpri;
pub mod pipeline;
pub mod rgbrecon;
pub mod synth;
pub mod tensorssa;

pub use cube_io::{FeatureStack, HyperCube, LabelMap};
pub use error::{Error, Result};
