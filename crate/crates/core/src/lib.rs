//! Detection and classification of circular viewer-age-range signs (7+, 13+,
//! 18+) in TV-broadcast-style frames.
//!
//! The pipeline stages are:
//!
//! 1. **raster** – image containers, grayscale conversion, corner cropping,
//!    binary PGM/PPM I/O.
//! 2. **preprocess** – Sobel edge binarization, hole filling, connected
//!    component labeling, largest-object selection.
//! 3. **circle** – circle detection: Hough transform (known and unknown
//!    radius) and the algebraic least-squares circle fit.
//! 4. **classify** – glyph crop normalization, row-scan feature extraction,
//!    and an 80→15→4 perceptron trained by backpropagation.
//! 5. **synth** – reproducible synthetic corpus generator (badges, frames,
//!    manifests) standing in for broadcast footage.
//! 6. **pipeline** – end-to-end frame processing, the stream simulator with
//!    its 4 s sampling clock, and the benchmark harness.

pub mod circle;
pub mod classify;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod synth;

pub use circle::{Circle, EdgePointSet, FitReport, HoughParams};
pub use classify::{FeatureVector, GlyphCrop, Label, MlpModel, TrainConfig};
pub use pipeline::{BenchmarkRow, Detection, Detector, FrameResult, PipelineConfig, StreamEvent};
pub use preprocess::{CandidateObject, EdgeParams, LabeledComponents};
pub use raster::{BinaryImage, ColorImage, Corner, CropRegion, GrayImage};
pub use synth::{BadgeSpec, Background, CorpusManifest, FrameSpec, Polarity};
