use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, Severity};
use crate::taxonomy::Taxonomy;

pub const STANDARD_IMAGES_PER_CLASS: usize = 273;

fn all_kinds() -> Vec<CorruptionKind> {
    CorruptionKind::ALL.to_vec()
}

fn all_severities() -> Vec<Severity> {
    Severity::all().collect()
}

fn default_images_per_class() -> usize {
    STANDARD_IMAGES_PER_CLASS
}

fn yes() -> bool {
    true
}

/// The JSON build document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    /// CSV with columns `path, fine_class, source_id`. Relative image paths
    /// are resolved against the CSV's directory.
    pub sources: PathBuf,
    #[serde(default = "default_images_per_class")]
    pub images_per_class: usize,
    #[serde(default = "all_kinds")]
    pub corruptions: Vec<CorruptionKind>,
    #[serde(default = "all_severities")]
    pub severities: Vec<Severity>,
    #[serde(default)]
    pub global_seed: u64,
    pub output_root: PathBuf,
    /// Patch pool directory; needed for Mosaic and Stickers.
    #[serde(default)]
    pub pool: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Resize the short side to 256 and center-crop 224 before corrupting.
    #[serde(default = "yes")]
    pub preprocess: bool,
    /// Alternative superclass mapping; the built-in one otherwise.
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
}

impl BuildConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub path: PathBuf,
    pub fine_class: String,
    pub source_id: String,
}

/// Reads a source list, resolving relative paths against its directory.
pub fn read_source_list(path: impl AsRef<Path>) -> Result<Vec<SourceRecord>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        let mut rec: SourceRecord = row?;
        if rec.path.is_relative() {
            rec.path = base.join(&rec.path);
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedSource {
    pub record: SourceRecord,
    pub superclass: String,
}

impl PlannedSource {
    /// The stem shared by every output of this source; also the image id the
    /// random streams are keyed on.
    pub fn image_id(&self) -> String {
        format!("{}_{}", self.record.fine_class, self.record.source_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildPlan {
    /// Selected sources, grouped by superclass in taxonomy order.
    pub sources: Vec<PlannedSource>,
    pub images_per_class: usize,
    pub corruptions: Vec<CorruptionKind>,
    pub severities: Vec<Severity>,
    pub global_seed: u64,
    pub output_root: PathBuf,
    pub preprocess: bool,
}

impl BuildPlan {
    pub fn expected_count(&self) -> usize {
        self.sources.len() * self.corruptions.len() * self.severities.len()
    }

    pub fn needs_pool(&self) -> bool {
        self.corruptions.iter().any(|k| k.needs_pool())
    }
}

fn dedup_sorted<T: Ord + Copy>(items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Validates the config against the taxonomy and picks the first
/// `images_per_class` listed sources for every superclass.
pub fn plan(cfg: &BuildConfig, sources: &[SourceRecord], tax: &Taxonomy) -> Result<BuildPlan> {
    if cfg.images_per_class == 0 {
        return Err(Error::Plan("images_per_class must be positive".into()));
    }
    if cfg.corruptions.is_empty() || cfg.severities.is_empty() {
        return Err(Error::Plan("empty corruption or severity selection".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<PlannedSource>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for rec in sources {
        let superclass = tax.superclass_of(&rec.fine_class).ok_or_else(|| {
            Error::Plan(format!("fine class {:?} of source {:?} is not mapped", rec.fine_class, rec.source_id))
        })?;
        if rec.source_id.is_empty() || rec.source_id.contains(['/', '\\']) {
            return Err(Error::Plan(format!("unusable source id {:?}", rec.source_id)));
        }
        if !seen.insert((rec.fine_class.as_str(), rec.source_id.as_str())) {
            return Err(Error::Plan(format!("duplicate source {}_{}", rec.fine_class, rec.source_id)));
        }
        let idx = tax.index_of(superclass).expect("mapped superclass");
        by_class.entry(idx).or_default().push(PlannedSource {
            record: rec.clone(),
            superclass: superclass.to_string(),
        });
    }
    let mut chosen = Vec::with_capacity(cfg.images_per_class * tax.superclasses().len());
    for (idx, name) in tax.superclasses().iter().enumerate() {
        let mut list = by_class.remove(&idx).unwrap_or_default();
        if list.len() < cfg.images_per_class {
            return Err(Error::Plan(format!(
                "superclass {name:?} has {} sources, {} required",
                list.len(),
                cfg.images_per_class
            )));
        }
        list.truncate(cfg.images_per_class);
        chosen.extend(list);
    }
    for s in &chosen {
        if !s.record.path.is_file() {
            return Err(Error::Plan(format!("source {} not found", s.record.path.display())));
        }
    }
    Ok(BuildPlan {
        sources: chosen,
        images_per_class: cfg.images_per_class,
        corruptions: dedup_sorted(&cfg.corruptions),
        severities: dedup_sorted(&cfg.severities),
        global_seed: cfg.global_seed,
        output_root: cfg.output_root.clone(),
        preprocess: cfg.preprocess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sources(tax: &Taxonomy, per_class: usize, file: &Path) -> Vec<SourceRecord> {
        let mut out = Vec::new();
        for s in 0..tax.superclasses().len() {
            let fine = &tax.fine_classes()[tax.members(s)[0]];
            for i in 0..per_class {
                out.push(SourceRecord {
                    path: file.to_path_buf(),
                    fine_class: fine.clone(),
                    source_id: format!("img{i:04}"),
                });
            }
        }
        out
    }

    fn config(per_class: usize) -> BuildConfig {
        serde_json::from_value(serde_json::json!({
            "sources": "unused.csv",
            "images_per_class": per_class,
            "output_root": "out",
        }))
        .unwrap()
    }

    #[test]
    fn counts() {
        let tax = Taxonomy::builtin();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.png");
        std::fs::write(&file, b"").unwrap();
        let p = plan(&config(2), &sources(&tax, 3, &file), &tax).unwrap();
        assert_eq!(p.sources.len(), 32);
        assert_eq!(p.expected_count(), 960);
        assert!(p.needs_pool());

        let err = plan(&config(2), &sources(&tax, 1, &file), &tax).unwrap_err();
        assert!(matches!(err, Error::Plan(_)), "{err}");
    }

    #[test]
    fn rejects_bad_sources() {
        let tax = Taxonomy::builtin();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.png");
        std::fs::write(&file, b"").unwrap();

        let mut s = sources(&tax, 1, &file);
        s[0].fine_class = "not-a-class".into();
        assert!(plan(&config(1), &s, &tax).is_err());

        let mut s = sources(&tax, 2, &file);
        s[1].source_id = s[0].source_id.clone();
        assert!(plan(&config(1), &s, &tax).is_err());

        let mut s = sources(&tax, 1, &file);
        s[3].path = dir.path().join("missing.png");
        assert!(plan(&config(1), &s, &tax).is_err());
    }

    #[test]
    fn config_defaults_and_strictness() {
        let c = config(5);
        assert_eq!(c.corruptions.len(), 6);
        assert_eq!(c.severities.len(), 5);
        assert!(c.preprocess);
        let bad = serde_json::from_value::<BuildConfig>(serde_json::json!({
            "sources": "s.csv", "output_root": "o", "colour": 1
        }));
        assert!(bad.is_err());
    }

    #[test]
    fn source_list_paths() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("list.csv");
        std::fs::write(&csv, "path,fine_class,source_id\nimgs/a.jpg,in1k-207,7\n/abs/b.jpg,in1k-001,8\n").unwrap();
        let recs = read_source_list(&csv).unwrap();
        assert_eq!(recs[0].path, dir.path().join("imgs/a.jpg"));
        assert_eq!(recs[1].path, PathBuf::from("/abs/b.jpg"));
        assert_eq!(recs[1].source_id, "8");
    }
}
