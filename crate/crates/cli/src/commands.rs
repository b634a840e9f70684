//! Thin adapters from parsed arguments to library calls.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use laionc_core::builder::{self, coverage_report, BuildConfig, CoverageMask};
use laionc_core::imgcore::preprocess;
use laionc_core::metrics::{
    accuracy_table, best_observers, error_consistency, fit_featureset, frechet_distance, laion_c_score, read_features,
    read_logs, render_benchmark_table, write_accuracy_csv, BenchmarkRow, GroupBy, Kappa, ObservationLog,
};
use laionc_core::patchpool::{build_pool, DEFAULT_POOL_SIZE, STICKER_PATCH_SIZE};
use laionc_core::vlm::{self, HttpBackend, MockBackend, SystemClock, VlmClient, VlmConfig};
use laionc_core::{apply, CorruptionKind, CorruptionSpec, ImageBuffer, PatchPool, SeedContext, Severity, Taxonomy};

use crate::config::{flags, resolve};
use crate::{record_run, GlobalArgs, UsageError};

pub(crate) fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy> {
    Ok(match path {
        Some(p) => Taxonomy::load(p)?,
        None => Taxonomy::builtin(),
    })
}

fn severity(level: i64) -> Result<Severity> {
    Severity::new(level).map_err(|e| UsageError(e.to_string()).into())
}

fn kind(token: &str) -> Result<CorruptionKind> {
    token.parse().map_err(|e: laionc_core::Error| UsageError(e.to_string()).into())
}

// ---------------------------------------------------------------- corrupt

#[derive(Args, Debug)]
pub struct CorruptArgs {
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub severity: i64,
    /// Patch pool directory (Mosaic, Stickers).
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Image id the random stream is keyed on; defaults to the input file stem.
    #[arg(long)]
    pub image_id: Option<String>,
    /// Corrupt the input as is instead of resizing and cropping to 224.
    #[arg(long)]
    pub no_preprocess: bool,
    pub input: PathBuf,
    pub output: PathBuf,
}

fn load_pool(path: Option<&Path>, needed: bool) -> Result<Option<PatchPool>> {
    match path {
        Some(p) => Ok(Some(PatchPool::load(p).with_context(|| format!("loading pool {}", p.display()))?)),
        None if needed => Err(UsageError("this corruption needs --pool".into()).into()),
        None => Ok(None),
    }
}

pub fn corrupt(g: &GlobalArgs, a: CorruptArgs) -> Result<()> {
    let kind = kind(&a.kind)?;
    let sev = severity(a.severity)?;
    let pool = load_pool(a.pool.as_deref(), kind.needs_pool())?;
    let seed = g.seed.unwrap_or(0);
    let image_id = match a.image_id {
        Some(id) => id,
        None => a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("cannot derive an image id from {}", a.input.display()))?
            .to_string(),
    };
    record_run(
        g,
        "corrupt",
        seed,
        &json!({"kind": kind, "severity": sev, "image_id": image_id, "input": a.input, "output": a.output,
                "pool": a.pool, "preprocess": !a.no_preprocess}),
    )?;
    let mut img = ImageBuffer::load(&a.input)?;
    if !a.no_preprocess {
        img = preprocess(&img)?;
    }
    let ctx = SeedContext::new(seed, image_id, kind, sev);
    let out = apply(&img, &CorruptionSpec::new(kind, sev), &ctx, pool.as_ref())?;
    out.save_png(&a.output)?;
    println!("{} {}x{} {kind} s{sev}", a.output.display(), out.width(), out.height());
    Ok(())
}

// ---------------------------------------------------------------- pool-build

#[derive(Args, Debug)]
pub struct PoolBuildArgs {
    /// Directory of donor images.
    #[arg(long)]
    pub sources: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub count: usize,
    #[arg(long, default_value_t = STICKER_PATCH_SIZE)]
    pub patch_size: u32,
}

pub fn pool_build(g: &GlobalArgs, a: PoolBuildArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    record_run(g, "pool-build", seed, &json!({"sources": a.sources, "out": a.out, "count": a.count, "patch_size": a.patch_size}))?;
    let pool = build_pool(&a.sources, a.patch_size, a.count, seed)?;
    pool.write(&a.out, Some(seed))?;
    println!("{} patches of {}px written to {}", pool.len(), a.patch_size, a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- build

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output_root: Option<PathBuf>,
    /// Only print the plan.
    #[arg(long)]
    pub dry_run: bool,
}

pub fn build(g: &GlobalArgs, a: BuildArgs) -> Result<()> {
    if g.config.is_none() {
        return Err(UsageError("build needs --config".into()).into());
    }
    let (cfg, effective): (BuildConfig, Value) = resolve(
        json!({}),
        g.config.as_deref(),
        &g.set,
        flags(vec![
            ("workers", a.workers.map(Value::from)),
            ("output_root", a.output_root.map(|p| json!(p))),
            ("global_seed", g.seed.map(Value::from)),
        ]),
    )?;
    // Paths inside the config file are relative to the file.
    let base = g.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
    let rel = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
    let tax = load_taxonomy(cfg.taxonomy.as_deref().map(rel).as_deref())?;
    let sources = builder::read_source_list(rel(&cfg.sources))?;
    let mut plan = builder::plan(&cfg, &sources, &tax)?;
    plan.output_root = rel(&cfg.output_root);
    println!("planned {} outputs ({} sources)", plan.expected_count(), plan.sources.len());
    if a.dry_run {
        return Ok(());
    }
    std::fs::create_dir_all(&plan.output_root)?;
    record_run(g, "build", cfg.global_seed, &effective)?;
    std::fs::write(
        plan.output_root.join("run_log.json"),
        serde_json::to_string_pretty(&json!({
            "toolkit": "laionc", "version": env!("CARGO_PKG_VERSION"), "seed": cfg.global_seed, "config": effective
        }))?,
    )?;
    let pool = load_pool(cfg.pool.as_deref().map(rel).as_deref(), plan.needs_pool())?;
    let report = builder::build(&plan, &tax, pool.as_ref(), cfg.workers)?;
    println!("wrote {} files, manifest {}", report.entries.len(), report.manifest_path.display());
    if !report.is_complete() {
        for f in &report.failures {
            let cell = match (f.corruption, f.severity) {
                (Some(k), Some(s)) => format!(" {k} s{s}"),
                _ => String::new(),
            };
            eprintln!("error: {}{cell}: {}", f.image_id, f.message);
        }
        bail!("{} of {} outputs failed", plan.expected_count() - report.entries.len(), plan.expected_count());
    }
    Ok(())
}

// ---------------------------------------------------------------- coverage

#[derive(Args, Debug)]
pub struct CoverageArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    /// Object mask PNG (nonzero pixels count); full image otherwise.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_cov_kinds() -> Vec<CorruptionKind> {
    vec![CorruptionKind::Stickers, CorruptionKind::GeometricShapes]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    #[serde(default = "default_cov_kinds")]
    pub kinds: Vec<CorruptionKind>,
    #[serde(default = "all_severities")]
    pub severities: Vec<Severity>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_size")]
    pub size: u32,
    #[serde(default)]
    pub mask: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn all_severities() -> Vec<Severity> {
    Severity::all().collect()
}
fn default_trials() -> usize {
    200
}
fn default_size() -> u32 {
    224
}

pub fn coverage(g: &GlobalArgs, a: CoverageArgs) -> Result<()> {
    let (cfg, effective): (CoverageConfig, Value) = resolve(
        json!({}),
        g.config.as_deref(),
        &g.set,
        flags(vec![
            ("trials", a.trials.map(Value::from)),
            ("seed", g.seed.map(Value::from)),
            ("mask", a.mask.map(|p| json!(p))),
            ("out", a.out.map(|p| json!(p))),
        ]),
    )?;
    record_run(g, "coverage", cfg.seed, &effective)?;
    let mask = match &cfg.mask {
        Some(p) => CoverageMask::from_image(&ImageBuffer::load(p)?)?,
        None => CoverageMask::full(cfg.size, cfg.size),
    };
    let cells: Vec<(CorruptionKind, Severity)> =
        cfg.kinds.iter().flat_map(|&k| cfg.severities.iter().map(move |&s| (k, s))).collect();
    let report = coverage_report(&cells, cfg.trials, cfg.seed, &mask)?;
    println!("{:<18} {:>8} {:>10} {:>8}", "corruption", "severity", "coverage%", "se%");
    for e in &report {
        println!("{:<18} {:>8} {:>10.2} {:>8.3}", e.kind.token(), e.severity, 100.0 * e.mean, 100.0 * e.std_error);
    }
    if let Some(out) = &cfg.out {
        let mut w = create_buffered(out)?;
        writeln!(w, "corruption,severity,trials,mean,std_error")?;
        for e in &report {
            writeln!(w, "{},{},{},{:.6},{:.6}", e.kind.token(), e.severity, e.trials, e.mean, e.std_error)?;
        }
    }
    Ok(())
}

fn create_buffered(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

// ---------------------------------------------------------------- eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Observation logs (CSV or JSON Lines); repeatable.
    #[arg(long = "log", required = true)]
    pub logs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub group_by: GroupArg,
    /// Directory for per-observer accuracy CSVs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum GroupArg {
    Kind,
    Severity,
    Both,
    None,
}

impl From<GroupArg> for GroupBy {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Kind => GroupBy::Kind,
            GroupArg::Severity => GroupBy::Severity,
            GroupArg::Both => GroupBy::Both,
            GroupArg::None => GroupBy::None,
        }
    }
}

fn read_validated(path: &Path, tax: &Taxonomy) -> Result<Vec<ObservationLog>> {
    read_logs(path)
        .with_context(|| format!("reading {}", path.display()))?
        .iter()
        .map(|l| l.validated(tax).with_context(|| format!("{}: observer {}", path.display(), l.observer_id)))
        .collect()
}

pub fn eval(g: &GlobalArgs, a: EvalArgs) -> Result<()> {
    let tax = load_taxonomy(a.taxonomy.as_deref())?;
    record_run(g, "eval", g.seed.unwrap_or(0), &json!({"logs": a.logs, "group_by": GroupBy::from(a.group_by), "out_dir": a.out_dir}))?;
    let mut logs = Vec::new();
    for p in &a.logs {
        logs.extend(read_validated(p, &tax)?);
    }
    if logs.is_empty() {
        bail!("no observations in the given logs");
    }
    let mut rows = Vec::new();
    for log in &logs {
        let table = accuracy_table(log, a.group_by.into())?;
        if let Some(dir) = &a.out_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("accuracy_{}.csv", sanitize(&log.observer_id)));
            write_accuracy_csv(&table, std::fs::File::create(&path)?)?;
        }
        rows.push(BenchmarkRow::from_score(log.observer_id.clone(), None, &laion_c_score(log)?));
    }
    print!("{}", render_benchmark_table(&rows));
    let best = best_observers(&logs)?;
    if let Some((who, score)) = &best.global {
        println!("best observer overall: {who} ({:.1}%)", 100.0 * score);
    }
    if logs.len() > 1 {
        let mut wins: BTreeMap<&str, usize> = BTreeMap::new();
        for (who, _) in best.per_cell.values() {
            *wins.entry(who.as_str()).or_default() += 1;
        }
        for (who, n) in wins {
            println!("best in {n} of {} cells: {who}", best.per_cell.len());
        }
    }
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

// ---------------------------------------------------------------- ec

#[derive(Args, Debug)]
pub struct EcArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Observer to use when the first file holds several.
    #[arg(long)]
    pub observer_a: Option<String>,
    #[arg(long)]
    pub observer_b: Option<String>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

fn pick(logs: Vec<ObservationLog>, want: Option<&str>, path: &Path) -> Result<ObservationLog> {
    match want {
        Some(id) => logs
            .into_iter()
            .find(|l| l.observer_id == id)
            .ok_or_else(|| anyhow!("{}: no observer {id:?}", path.display())),
        None if logs.len() == 1 => Ok(logs.into_iter().next().unwrap()),
        None => {
            let ids: Vec<_> = logs.iter().map(|l| l.observer_id.as_str()).collect();
            Err(UsageError(format!("{} holds observers {ids:?}; choose one", path.display())).into())
        }
    }
}

pub fn ec(g: &GlobalArgs, a: EcArgs) -> Result<()> {
    let tax = load_taxonomy(a.taxonomy.as_deref())?;
    record_run(g, "ec", g.seed.unwrap_or(0), &json!({"a": a.a, "b": a.b, "observer_a": a.observer_a, "observer_b": a.observer_b}))?;
    let la = pick(read_validated(&a.a, &tax)?, a.observer_a.as_deref(), &a.a)?;
    let lb = pick(read_validated(&a.b, &tax)?, a.observer_b.as_deref(), &a.b)?;
    let r = error_consistency(&la, &lb)?;
    println!("observers: {} vs {}", la.observer_id, lb.observer_id);
    println!("shared trials: {}", r.shared_trials);
    println!("accuracy: {:.4} / {:.4}", r.accuracy_a, r.accuracy_b);
    println!("observed agreement: {:.4}", r.observed);
    println!("expected agreement: {:.4}", r.expected);
    match r.kappa {
        Kappa::Value(k) => println!("kappa: {k:.4}"),
        Kappa::Undefined => println!("kappa: undefined (expected agreement is 1)"),
    }
    Ok(())
}

// ---------------------------------------------------------------- fid

#[derive(Args, Debug)]
pub struct FidArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
}

pub fn fid(g: &GlobalArgs, a: FidArgs) -> Result<()> {
    record_run(g, "fid", g.seed.unwrap_or(0), &json!({"a": a.a, "b": a.b}))?;
    let fa = fit_featureset(&read_features(&a.a)?)?;
    let fb = fit_featureset(&read_features(&a.b)?)?;
    println!("n: {} / {}, d: {}", fa.n, fb.n, fa.dim());
    println!("frechet distance: {:.6}", frechet_distance(&fa, &fb)?);
    Ok(())
}

// ---------------------------------------------------------------- vlm-run

#[derive(Args, Debug)]
pub struct VlmRunArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Answer every query with this word instead of calling the endpoint.
    #[arg(long)]
    pub mock: Option<String>,
    /// Only print the number of planned queries.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlmRunConfig {
    pub vlm: VlmConfig,
    pub manifest: PathBuf,
    /// Directory the manifest paths are relative to; the manifest's own by default.
    #[serde(default)]
    pub dataset_root: Option<PathBuf>,
    #[serde(default = "default_per_class")]
    pub per_class: usize,
    #[serde(default)]
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
}

fn default_per_class() -> usize {
    100
}

pub fn vlm_run(g: &GlobalArgs, a: VlmRunArgs) -> Result<()> {
    let mut overrides = vec![
        ("manifest", a.manifest.map(|p| json!(p))),
        ("per_class", a.per_class.map(Value::from)),
        ("checkpoint", a.checkpoint.map(|p| json!(p))),
        ("out", a.out.map(|p| json!(p))),
        ("seed", g.seed.map(Value::from)),
    ];
    if let Some(w) = a.workers {
        overrides.push(("vlm", Some(json!({"workers": w}))));
    }
    let defaults = if a.mock.is_some() { json!({"vlm": {"endpoint": "mock", "model": "mock"}}) } else { json!({}) };
    let (cfg, effective): (VlmRunConfig, Value) = resolve(defaults, g.config.as_deref(), &g.set, flags(overrides))?;
    cfg.vlm.validate()?;
    let tax = load_taxonomy(cfg.taxonomy.as_deref())?;
    let manifest = builder::read_manifest(&cfg.manifest)?;
    let items = vlm::plan_subset(&manifest, cfg.per_class, cfg.seed, &tax)?;
    println!("{} queries planned", items.len());
    if a.dry_run {
        return Ok(());
    }
    record_run(g, "vlm-run", cfg.seed, &effective)?;
    let root = cfg
        .dataset_root
        .clone()
        .unwrap_or_else(|| cfg.manifest.parent().unwrap_or(Path::new("")).to_path_buf());
    let log = match a.mock {
        Some(word) => {
            let backend = MockBackend::new(move |_: &Value| Ok(word.clone()));
            let client = VlmClient::new(backend, cfg.vlm.clone(), tax, SystemClock::default())?;
            vlm::run_subset(&items, &client, &root, &cfg.checkpoint)?
        }
        None => {
            let backend = HttpBackend::new(cfg.vlm.endpoint.clone(), cfg.vlm.credential(), cfg.vlm.timeout())?;
            let client = VlmClient::new(backend, cfg.vlm.clone(), tax, SystemClock::default())?;
            vlm::run_subset(&items, &client, &root, &cfg.checkpoint)?
        }
    };
    log.save(&cfg.out)?;
    let invalid = log.records.iter().filter(|o| o.superclass_response == laionc_core::taxonomy::INVALID_LABEL).count();
    println!("{} records written to {} ({invalid} invalid)", log.len(), cfg.out.display());
    Ok(())
}

// ---------------------------------------------------------------- gallery

#[derive(Args, Debug)]
pub struct GalleryArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub image_id: Option<String>,
    pub input: PathBuf,
    pub output: PathBuf,
}

/// Gap between tiles in the contact sheet.
pub const GALLERY_GAP: u32 = 4;

/// Rows are corruptions in table order, columns severities 1 to 5.
pub fn gallery_sheet(img: &ImageBuffer, image_id: &str, seed: u64, pool: &PatchPool) -> Result<ImageBuffer> {
    let base = preprocess(img)?;
    let (tw, th) = (base.width(), base.height());
    let kinds = CorruptionKind::ALL;
    let w = 5 * tw + 6 * GALLERY_GAP;
    let h = kinds.len() as u32 * th + (kinds.len() as u32 + 1) * GALLERY_GAP;
    let mut sheet = ImageBuffer::filled(w, h, [255, 255, 255]);
    for (r, &k) in kinds.iter().enumerate() {
        for (c, sev) in Severity::all().enumerate() {
            let ctx = SeedContext::new(seed, image_id, k, sev);
            let tile = apply(&base, &CorruptionSpec::new(k, sev), &ctx, Some(pool))?;
            sheet.blit(&tile, GALLERY_GAP + c as u32 * (tw + GALLERY_GAP), GALLERY_GAP + r as u32 * (th + GALLERY_GAP));
        }
    }
    Ok(sheet)
}

pub fn gallery(g: &GlobalArgs, a: GalleryArgs) -> Result<()> {
    let seed = g.seed.unwrap_or(0);
    let image_id = a
        .image_id
        .clone()
        .or_else(|| a.input.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .ok_or_else(|| anyhow!("cannot derive an image id from {}", a.input.display()))?;
    record_run(g, "gallery", seed, &json!({"input": a.input, "output": a.output, "pool": a.pool, "image_id": image_id}))?;
    let pool = PatchPool::load(&a.pool)?;
    let sheet = gallery_sheet(&ImageBuffer::load(&a.input)?, &image_id, seed, &pool)?;
    sheet.save_png(&a.output)?;
    println!("{} ({}x{})", a.output.display(), sheet.width(), sheet.height());
    Ok(())
}
