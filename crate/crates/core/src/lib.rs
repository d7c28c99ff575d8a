//! Diverse unionable tuple search.
//!
//! Given a query table and candidate unionable tables from a data lake, the
//! pipeline aligns columns holistically, outer-unions the candidates,
//! embeds every tuple, and selects `k` tuples that are far from the query
//! tuples and from each other.

pub mod column_align;
pub mod diversify;
pub mod error;
pub mod harness;
mod hashing;
pub mod lake_model;
pub mod metrics;
pub mod serialize_embed;

pub use error::{Error, Result};
