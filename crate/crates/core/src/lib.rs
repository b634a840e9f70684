//! Corruption synthesis, dataset construction, scoring and experiment
//! planning for the LAION-C out-of-distribution benchmark.

pub mod builder;
pub mod distortions;
pub mod error;
pub mod imgcore;
pub mod metrics;
pub mod patchpool;
pub mod session;
pub mod taxonomy;
pub mod vlm;

pub use distortions::{apply, resolve_params, CorruptionSpec, Params};
pub use error::{Error, Result};
pub use imgcore::{CorruptionKind, ImageBuffer, Rect, SeedContext, SeedStream, Severity};
pub use patchpool::{build_pool, PatchPool};
pub use taxonomy::Taxonomy;
