//! Semi-supervised video object segmentation with a pixel memory bank,
//! top-k filtered attention readout and an object transformer.
//!
//! Given the object masks of a video's first frame, [`pipeline::propagate`]
//! predicts masks for every later frame. [`metrics`] scores predictions with
//! region similarity J, contour accuracy F and their mean.

pub mod backbone;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod mask;
pub mod memory;
pub mod metrics;
pub mod object;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod weights;

pub use config::{Augmentation, EngineConfig, Similarity};
pub use error::{Error, Result};
pub use mask::MaskSet;
pub use memory::{init_bank, MemoryPolicy, PixelMemoryBank};
pub use metrics::{evaluate_sequence, f_measure, jaccard, mean_jf, BinaryMask, MetricReport};
pub use pipeline::{propagate, run_tta, segment, SequenceRecord};
pub use synth::{synth_generate, Scenario, SynthSpec};
pub use tensor::Tensor;
pub use weights::WeightSet;
