//! Library surface of the `remerge` executable: dataset persistence, git
//! mining, checkpointing, the training loop, and evaluation plumbing. The
//! binary in `main.rs` is a thin argument-parsing shell over these.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod evalrun;
pub mod par;
pub mod report;
pub mod train;
