//! Evaluation of chat-completions vision models with fixed prompts and
//! single-word answers mapped onto the 16 superclasses.

mod backend;
mod client;
mod limiter;
mod prompts;
mod subset;

pub use backend::{request_body, ChatBackend, HttpBackend, MockBackend};
pub use client::{Classification, VlmClient, VlmConfig, DEFAULT_CREDENTIAL_ENV};
pub use limiter::{Clock, ManualClock, RateLimiter, SystemClock};
pub use prompts::{build_prompts, SYSTEM_PROMPT, USER_PROMPT};
pub use subset::{plan_subset, run_subset, CheckpointRecord, SubsetItem};
