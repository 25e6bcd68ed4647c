//! Detect and place traffic lights and traffic signs at road intersections
//! from street-level imagery.
//!
//! Per image, a semantic label map and sign detections are reduced to scene
//! objects, classified and grouped with a small set of urban-layout rules, and
//! arranged into an attributed topological binary tree. The trees of an image
//! track are fused and matched against building footprints to place each
//! object next to the nearest footprint corner.

pub mod atbt;
pub mod cli;
pub mod config;
pub mod error;
pub mod evalx;
pub mod geo;
pub mod grammar;
pub mod ingest;
pub mod placer;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
