//! Resolution-scalable tile codec and a simulator for bandwidth-aware hybrid
//! (detector + human) annotation of aerial imagery.
//!
//! The crate covers the full loop: images are tiled and encoded into a
//! codestream whose tiles can be extracted at any resolution level, a constant
//! rate channel converts bytes into transmission time, a detector model and a
//! human-annotator model produce annotations, and two end-to-end frameworks
//! (send everything at full resolution, or send a budgeted low resolution
//! first and then only the tiles a human needs) are compared on response time
//! and recall.

pub mod annotate;
pub mod channel;
pub mod cli;
pub mod codestream;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod wavelet;
