//! Discovery of patterns of daily living from unlabeled ambient sensor logs.
//!
//! The pipeline windows a smart-home event stream, pre-trains a small
//! transformer encoder with a masked-token objective, builds a cosine
//! nearest-neighbor graph over window embeddings, fine-tunes a clustering head
//! with the SCAN objective, and then turns a handful of human-labeled cluster
//! centroids into labels for every window and every raw event.

pub mod annotate;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evalmap;
pub mod io;
pub mod layout;
pub mod neighbors;
pub mod optim;
pub mod pipeline;
pub mod scan;
pub mod seed;
pub mod synth;
pub mod tensorfile;
pub mod trends;

pub use error::{Error, Result};
