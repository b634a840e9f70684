//! Back end of the 16-way forced-choice experiment: block planning, timing
//! and bonus rules, durable trial storage and log export.

mod augment;
mod plan;
mod score;
mod store;

pub use augment::{warmup_augment, WarmupAugmentation};
pub use plan::{
    plan_cohort, plan_session, Assignment, Block, BlockKind, CatalogEntry, Condition, PlanConfig, SessionPlan,
    StimulusCatalog, Trial, WarmupSource, MAIN_BLOCKS, MAIN_BLOCK_TRIALS, WARMUP_BLOCKS, WARMUP_BLOCK_TRIALS,
};
pub use score::{score_block, BlockScore, BonusRule, Timing, TrialResult, NO_RESPONSE};
pub use store::{ExportedLog, RecordOutcome, SessionStatus, SessionStore};
