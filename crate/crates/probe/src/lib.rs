//! Boolean-function prompts against a chat-completions endpoint.
//!
//! Prompts come from [`occam_core::boolean`]; each is rendered to text, sent to
//! a model, and the first standalone `0`/`1` in the reply is scored against the
//! copy-bit and majority answers.

mod client;
mod config;
mod render;
mod score;

pub use client::{query_model, run_prompts, Completion, CompletionModel, HttpModel};
pub use config::{ProbeConfig, Secret, DEFAULT_API_KEY_ENV};
pub use render::{parse_label, parse_rendered, render_prompt, DEFAULT_TEMPLATE};
pub use score::{score_run, write_score_csv, ProbeResult, ScoreRow, SCORE_COLUMNS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("template error: {0}")]
    Template(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ProbeError>;
