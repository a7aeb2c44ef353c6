//! Command-line and HTTP front end for the reelmind pipeline.
//!
//! Both surfaces are thin: they parse input, call the same operations in
//! [`ops`] and render the persisted results.

pub mod cli;
pub mod http;
pub mod ops;
pub mod view;
pub mod workspace;

pub use workspace::{ProviderSource, Settings, Workspace};
