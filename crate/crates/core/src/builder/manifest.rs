use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, Severity};
use crate::taxonomy::Taxonomy;

/// One written output. `output_path` is relative to the build's output root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub output_path: String,
    pub superclass: String,
    pub fine_class: String,
    pub source_id: String,
    pub corruption: CorruptionKind,
    pub severity: Severity,
    /// Key of the random stream the output was drawn from.
    pub seed: u64,
    /// FNV-1a-64 of the raw RGB bytes, as 16 hex digits.
    pub digest: String,
}

/// `<superclass slug>/<corruption>/s<severity>/<fine_class>_<source_id>.png`
pub fn encode_output_path(
    tax: &Taxonomy,
    superclass: &str,
    fine_class: &str,
    source_id: &str,
    kind: CorruptionKind,
    severity: Severity,
) -> Result<String> {
    let slug = tax
        .slug_of(superclass)
        .ok_or_else(|| Error::Taxonomy(format!("unknown superclass {superclass:?}")))?;
    if fine_class.contains(['_', '/']) || source_id.is_empty() || source_id.contains(['/', '\\']) {
        return Err(Error::InvalidArgument(format!(
            "cannot encode {fine_class:?}/{source_id:?} into a file name"
        )));
    }
    Ok(format!("{slug}/{}/s{}/{fine_class}_{source_id}.png", kind.token(), severity.level()))
}

/// Inverse of [`encode_output_path`]: `(superclass, fine_class, source_id, kind, severity)`.
pub fn decode_output_path(
    tax: &Taxonomy,
    path: &str,
) -> Result<(String, String, String, CorruptionKind, Severity)> {
    let bad = || Error::Format(format!("not a dataset path: {path:?}"));
    let parts: Vec<&str> = Path::new(path)
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => s.to_str(),
            _ => None,
        })
        .collect();
    let [slug, kind, sev, file] = parts[parts.len().saturating_sub(4)..] else {
        return Err(bad());
    };
    let superclass = tax.from_slug(slug).ok_or_else(bad)?.to_string();
    let kind: CorruptionKind = kind.parse().map_err(|_| bad())?;
    let severity = sev
        .strip_prefix('s')
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|l| Severity::new(l).ok())
        .ok_or_else(bad)?;
    let stem = file.strip_suffix(".png").ok_or_else(bad)?;
    let (fine, source) = stem.split_once('_').ok_or_else(bad)?;
    if fine.is_empty() || source.is_empty() {
        return Err(bad());
    }
    Ok((superclass, fine.to_string(), source.to_string(), kind, severity))
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if entries.is_empty() {
        w.write_record([
            "output_path", "superclass", "fine_class", "source_id", "corruption", "severity", "seed", "digest",
        ])?;
    }
    for e in entries {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

impl ManifestEntry {
    pub fn absolute_path(&self, root: &Path) -> PathBuf {
        root.join(&self.output_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trip() {
        let tax = Taxonomy::builtin();
        let sev = Severity::new(3).unwrap();
        let p = encode_output_path(&tax, "car & truck", "in1k-817", "n0_x-1", CorruptionKind::VerticalLines, sev)
            .unwrap();
        assert_eq!(p, "car_truck/vertical_lines/s3/in1k-817_n0_x-1.png");
        let d = decode_output_path(&tax, &p).unwrap();
        assert_eq!(d, ("car & truck".into(), "in1k-817".into(), "n0_x-1".into(), CorruptionKind::VerticalLines, sev));
        let abs = format!("/data/out/{p}");
        assert_eq!(decode_output_path(&tax, &abs).unwrap(), d);
    }

    #[test]
    fn decode_rejects_garbage() {
        let tax = Taxonomy::builtin();
        for p in ["dog/mosaic/s9/in1k-207_1.png", "dog/mosaic/s1/in1k-207.png", "x/mosaic/s1/a_b.png", "a.png"] {
            assert!(decode_output_path(&tax, p).is_err(), "{p}");
        }
        assert!(encode_output_path(&tax, "dog", "in1k-207", "a/b", CorruptionKind::Mosaic, Severity::new(1).unwrap())
            .is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let e = ManifestEntry {
            output_path: "dog/luminance/s1/in1k-207_1.png".into(),
            superclass: "dog".into(),
            fine_class: "in1k-207".into(),
            source_id: "1".into(),
            corruption: CorruptionKind::LuminanceCheckerboard,
            severity: Severity::new(1).unwrap(),
            seed: u64::MAX,
            digest: format!("{:016x}", 42u64),
        };
        write_manifest(&path, &[e.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("output_path,superclass,fine_class,source_id,corruption,severity,seed,digest\n"));
        assert_eq!(read_manifest(&path).unwrap(), vec![e]);
    }
}
