//! Multi-source image registration: Harris keypoints, multi-scale
//! orientation maps, log-polar orientation histograms, sample-consensus
//! matching and affine alignment.
//!
//! ```no_run
//! use msreg_core::{ingest, Pipeline, PipelineConfig};
//!
//! let a = ingest::load_gray("optical.png", Default::default(), false)?;
//! let b = ingest::load_gray("sar.png", Default::default(), false)?;
//! let reg = Pipeline::new(PipelineConfig::default())?.register(&a, &b)?;
//! println!("{} inliers, model {}", reg.matches.len(), reg.model);
//! # Ok::<(), msreg_core::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod filter;
pub mod formats;
pub mod ggloh;
pub mod harris;
pub mod image;
pub mod ingest;
pub mod matching;
pub mod pmom;
pub mod register;
pub mod scalespace;
pub mod transform;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use ggloh::{Descriptor, GglohGeometry};
pub use harris::Keypoint;
pub use image::{GrayImage, MultiBandImage};
pub use ingest::BandPolicy;
pub use matching::{MatchPair, MatchSet, MatchStage};
pub use pmom::{OrientationMap, ScaleBank};
pub use register::{Pipeline, Registration, RegistrationReport, RenderMode};
pub use scalespace::ScaleDescriptorSet;
pub use transform::AffineModel;
