//! Ranovol turns 3D brain-tumor segmentation label volumes into
//! reproducible tumor-burden measurements: per-class volumetrics, two
//! automated bidimensional RANO algorithms, segmentation-evaluation
//! metrics, inter-rater agreement statistics, and a confidence-weighted
//! segmentation loss with analytic gradients.
//!
//! Everything is deterministic by construction: component ids, diameter
//! endpoints and tie-breaks are totally ordered, so repeated runs (and runs
//! at different thread counts) produce bit-identical results.

pub mod error;
pub mod nifti;
pub mod postprocess;
pub mod rano;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{
    connected_components, BinaryMask, ComponentLabeling, Connectivity, Dims, LabelSemantics,
    LabelVolume, Mask2D, Spacing, TumorClass,
};
