//! Narrative indexing, grounded question answering and prompt-driven edit
//! planning for long-form video.
//!
//! The pipeline turns a video into a persistent, timestamped
//! [`model::NarrativeIndex`] (synopsis, character graph, scene traces), answers
//! questions against it with cited timestamps, and compiles natural-language
//! editing prompts into a validated [`model::EditPlan`] that a media engine
//! renders. Long-running work is executed as durable workflows.

pub mod canonical;
pub mod clock;
pub mod comprehension;
pub mod config;
pub mod edit;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod media;
pub mod model;
pub mod orchestrator;
pub mod qa;
pub mod schema;
pub mod store;
pub mod testkit;
pub mod time;
pub mod validate;

pub use error::{Error, ErrorClass, Result};
