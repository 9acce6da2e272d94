//! Handcrafted texture classification of enteric glial cell micrographs.
//!
//! The pipeline runs pre-processing ([`preprocess`]), texture description
//! ([`descriptors`]), classification with probability outputs
//! ([`classifiers`]), optional chi-square feature selection ([`selection`]),
//! stratified cross-validation ([`evaluation`]), late fusion of probability
//! matrices ([`fusion`]) and rank-based statistics ([`stats`]).

pub mod classifiers;
pub mod config;
pub mod dataset;
pub mod descriptors;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod io;
pub mod label;
pub mod preprocess;
pub mod raster;
pub mod seed;
pub mod selection;
pub mod stats;
pub mod workspace;

pub use error::{Error, ErrorKind, Result};
pub use label::Label;
pub use raster::ImageBuffer;
