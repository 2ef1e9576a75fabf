//! Certified error bounds for last-column-block-augmented truncations of block-monotone
//! Markov chains with subgeometric drift, with GI/G/1-type tooling and a worked
//! heavy-tailed example.

#![forbid(unsafe_code)]

pub mod blockmatrix;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod drift;
pub mod error;
pub mod gig1;
pub mod report;
pub mod solver;
pub mod special;
pub mod truncation;

pub use error::{Error, Result};
