//! User-level classification from chronologically ordered text embeddings.
//!
//! The pipeline embeds each user's tweets, runs an LSTM autoencoder over the
//! sequence to obtain per-tweet temporal features, pools those features with
//! a learned attention head and classifies the pooled vector with a logistic
//! output. The autoencoder is trained without labels; only the pooling and
//! output layers see user-level labels.

mod binio;

pub mod attention;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod lstm;
pub mod training;

pub use error::{Error, ErrorKind, Result};
