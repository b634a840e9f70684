use std::path::PathBuf;

use rayon::prelude::*;

use crate::distortions::{apply, CorruptionSpec};
use crate::error::{Error, Result};
use crate::imgcore::{content_digest, preprocess, CorruptionKind, ImageBuffer, SeedContext, Severity};
use crate::patchpool::PatchPool;
use crate::taxonomy::Taxonomy;

use super::manifest::{encode_output_path, write_manifest, ManifestEntry};
use super::plan::{BuildPlan, PlannedSource};

pub const MANIFEST_FILE: &str = "manifest.csv";

/// An output that could not be produced; the build carried on without it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildFailure {
    pub image_id: String,
    pub corruption: Option<CorruptionKind>,
    pub severity: Option<Severity>,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    /// Manifest rows in plan order.
    pub entries: Vec<ManifestEntry>,
    pub failures: Vec<BuildFailure>,
    pub manifest_path: PathBuf,
}

impl BuildReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct BuildOptions<'a> {
    plan: &'a BuildPlan,
    tax: &'a Taxonomy,
    pool: Option<&'a PatchPool>,
}

fn build_source(opts: &BuildOptions, src: &PlannedSource) -> Vec<std::result::Result<ManifestEntry, BuildFailure>> {
    let image_id = src.image_id();
    let fail = |kind, sev, e: Error| BuildFailure {
        image_id: image_id.clone(),
        corruption: kind,
        severity: sev,
        message: e.to_string(),
    };
    let base = ImageBuffer::load(&src.record.path).and_then(|img| if opts.plan.preprocess { preprocess(&img) } else { Ok(img) });
    let base = match base {
        Ok(img) => img,
        Err(e) => return vec![Err(fail(None, None, e))],
    };
    let mut out = Vec::with_capacity(opts.plan.corruptions.len() * opts.plan.severities.len());
    for &kind in &opts.plan.corruptions {
        for &sev in &opts.plan.severities {
            let ctx = SeedContext::new(opts.plan.global_seed, image_id.clone(), kind, sev);
            let result = (|| {
                let rel = encode_output_path(
                    opts.tax,
                    &src.superclass,
                    &src.record.fine_class,
                    &src.record.source_id,
                    kind,
                    sev,
                )?;
                let img = apply(&base, &CorruptionSpec::new(kind, sev), &ctx, opts.pool)?;
                let path = opts.plan.output_root.join(&rel);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                img.save_png(&path)?;
                Ok(ManifestEntry {
                    output_path: rel,
                    superclass: src.superclass.clone(),
                    fine_class: src.record.fine_class.clone(),
                    source_id: src.record.source_id.clone(),
                    corruption: kind,
                    severity: sev,
                    seed: ctx.stream_seed(),
                    digest: format!("{:016x}", content_digest(&img)),
                })
            })();
            out.push(result.map_err(|e| fail(Some(kind), Some(sev), e)));
        }
    }
    out
}

/// Writes every planned output plus `manifest.csv` under the output root.
///
/// Individual failures are collected in the report rather than aborting.
/// Results do not depend on `workers`; every output's randomness comes from
/// its own [`SeedContext`].
pub fn build(
    plan: &BuildPlan,
    tax: &Taxonomy,
    pool: Option<&PatchPool>,
    workers: usize,
) -> Result<BuildReport> {
    if plan.needs_pool() && pool.is_none_or(|p| p.is_empty()) {
        return Err(Error::EmptyPool);
    }
    std::fs::create_dir_all(&plan.output_root).map_err(|e| Error::io(&plan.output_root, e))?;
    let opts = BuildOptions {
        plan,
        tax,
        pool,
    };
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let per_source: Vec<_> = threads.install(|| plan.sources.par_iter().map(|s| build_source(&opts, s)).collect());

    let mut entries = Vec::with_capacity(plan.expected_count());
    let mut failures = Vec::new();
    for r in per_source.into_iter().flatten() {
        match r {
            Ok(e) => entries.push(e),
            Err(f) => {
                log::warn!("{}: {}", f.image_id, f.message);
                failures.push(f);
            }
        }
    }
    let manifest_path = plan.output_root.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &entries)?;
    Ok(BuildReport {
        entries,
        failures,
        manifest_path,
    })
}
