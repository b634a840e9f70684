//! Dataset construction: source selection, the kind × severity grid, output
//! layout, manifests and overlay coverage estimates.

mod coverage;
mod manifest;
mod plan;
mod run;

pub use coverage::{coverage_report, CoverageEstimate, CoverageMask};
pub use manifest::{decode_output_path, encode_output_path, read_manifest, write_manifest, ManifestEntry};
pub use plan::{plan, read_source_list, BuildConfig, BuildPlan, PlannedSource, SourceRecord, STANDARD_IMAGES_PER_CLASS};
pub use run::{build, BuildFailure, BuildReport, MANIFEST_FILE};
