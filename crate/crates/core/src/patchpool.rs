//! Donor patches for Mosaic and Stickers, with chromatic nearest-neighbor
//! lookup.
//!
//! On disk a pool is a directory with three files:
//!
//! * `pool.jsonl`: one `{index, source_id, x, y, mean_r, mean_g, mean_b}` per patch
//! * `pool.bin`: patches concatenated in index order, row-major RGB8
//! * `pool_meta.json`: `{patch_width, patch_height, count, seed}`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{mean_color, ImageBuffer, Rect, SeedStream};

pub const DEFAULT_POOL_SIZE: usize = 10_000;
pub const STICKER_PATCH_SIZE: u32 = 16;

const MANIFEST_FILE: &str = "pool.jsonl";
const DATA_FILE: &str = "pool.bin";
const META_FILE: &str = "pool_meta.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSource {
    pub source_id: String,
    pub x: u32,
    pub y: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestRecord {
    index: usize,
    source_id: String,
    x: u32,
    y: u32,
    mean_r: f64,
    mean_g: f64,
    mean_b: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct PoolMeta {
    patch_width: u32,
    patch_height: u32,
    count: usize,
    seed: Option<u64>,
}

/// Immutable collection of equally sized patches.
#[derive(Clone, Debug)]
pub struct PatchPool {
    patch_width: u32,
    patch_height: u32,
    patches: Vec<ImageBuffer>,
    mean_colors: Vec<[f64; 3]>,
    sources: Vec<PatchSource>,
    index: ColorIndex,
}

impl PatchPool {
    /// Assembles a pool from in-memory patches, computing mean colors.
    pub fn from_patches(patches: Vec<ImageBuffer>, sources: Vec<PatchSource>) -> Result<Self> {
        let first = patches.first().ok_or(Error::EmptyPool)?;
        let (pw, ph) = (first.width(), first.height());
        if pw == 0 || ph == 0 {
            return Err(Error::InvalidArgument("zero-sized patches".into()));
        }
        if sources.len() != patches.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} patches but {} source records",
                patches.len(),
                sources.len()
            )));
        }
        if let Some(bad) = patches.iter().find(|p| p.width() != pw || p.height() != ph) {
            return Err(Error::DimensionMismatch(format!(
                "patch of {}x{} in a {pw}x{ph} pool",
                bad.width(),
                bad.height()
            )));
        }
        let mean_colors = patches
            .iter()
            .map(|p| mean_color(p, p.full_rect()))
            .collect::<Result<Vec<_>>>()?;
        let index = ColorIndex::new(&mean_colors);
        Ok(PatchPool {
            patch_width: pw,
            patch_height: ph,
            patches,
            mean_colors,
            sources,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch_size(&self) -> (u32, u32) {
        (self.patch_width, self.patch_height)
    }

    pub fn patch(&self, i: usize) -> &ImageBuffer {
        &self.patches[i]
    }

    pub fn mean_colors(&self) -> &[[f64; 3]] {
        &self.mean_colors
    }

    pub fn sources(&self) -> &[PatchSource] {
        &self.sources
    }

    /// Index of the patch whose mean color is closest to `target` in squared
    /// RGB distance; ties go to the lowest index.
    pub fn nearest_patch(&self, target: [f64; 3]) -> usize {
        self.index.nearest(&self.mean_colors, target)
    }

    /// Writes the manifest, packed patch data and metadata into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, seed: Option<u64>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let manifest_path = dir.join(MANIFEST_FILE);
        let mut manifest = BufWriter::new(create(&manifest_path)?);
        for (i, (src, m)) in self.sources.iter().zip(&self.mean_colors).enumerate() {
            let rec = ManifestRecord {
                index: i,
                source_id: src.source_id.clone(),
                x: src.x,
                y: src.y,
                mean_r: m[0],
                mean_g: m[1],
                mean_b: m[2],
            };
            serde_json::to_writer(&mut manifest, &rec)?;
            manifest.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
        }
        manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;

        let data_path = dir.join(DATA_FILE);
        let mut data = BufWriter::new(create(&data_path)?);
        for p in &self.patches {
            data.write_all(p.as_raw()).map_err(|e| Error::io(&data_path, e))?;
        }
        data.flush().map_err(|e| Error::io(&data_path, e))?;

        let meta = PoolMeta {
            patch_width: self.patch_width,
            patch_height: self.patch_height,
            count: self.len(),
            seed,
        };
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
            .map_err(|e| Error::io(&meta_path, e))
    }

    /// Loads a pool written by [`PatchPool::write`]. Mean colors are
    /// recomputed from the packed data and checked against the manifest.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META_FILE);
        let meta: PoolMeta = serde_json::from_slice(
            &std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?,
        )?;
        let data_path = dir.join(DATA_FILE);
        let data = std::fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let patch_bytes = meta.patch_width as usize * meta.patch_height as usize * 3;
        if patch_bytes == 0 || data.len() != patch_bytes * meta.count {
            return Err(Error::Format(format!(
                "{}: {} bytes does not hold {} patches of {}x{}",
                data_path.display(),
                data.len(),
                meta.count,
                meta.patch_width,
                meta.patch_height
            )));
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let reader = BufReader::new(File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?);
        let mut records = Vec::with_capacity(meta.count);
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io(&manifest_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<ManifestRecord>(&line)?);
        }
        if records.len() != meta.count || records.iter().enumerate().any(|(i, r)| r.index != i) {
            return Err(Error::Format(format!(
                "{}: expected {} records in index order",
                manifest_path.display(),
                meta.count
            )));
        }
        let patches = data
            .chunks_exact(patch_bytes)
            .map(|c| ImageBuffer::from_raw(meta.patch_width, meta.patch_height, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let sources = records
            .iter()
            .map(|r| PatchSource {
                source_id: r.source_id.clone(),
                x: r.x,
                y: r.y,
            })
            .collect();
        let pool = PatchPool::from_patches(patches, sources)?;
        for (r, m) in records.iter().zip(pool.mean_colors()) {
            let stored = [r.mean_r, r.mean_g, r.mean_b];
            if stored.iter().zip(m).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Err(Error::Format(format!(
                    "patch {} mean color disagrees with packed data",
                    r.index
                )));
            }
        }
        Ok(pool)
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Samples `count` random `patch_size` crops from the images in `source_dir`.
///
/// Files are visited in sorted name order; crop placement is drawn from a
/// stream keyed by `seed`, so the same inputs give the same pool.
pub fn build_pool(source_dir: impl AsRef<Path>, patch_size: u32, count: usize, seed: u64) -> Result<PatchPool> {
    let source_dir = source_dir.as_ref();
    if count == 0 {
        return Err(Error::InvalidArgument("pool count must be at least 1".into()));
    }
    if patch_size == 0 {
        return Err(Error::InvalidArgument("patch size must be at least 1".into()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(source_dir)
        .map_err(|e| Error::io(source_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();

    // Probe dimensions first so only usable sources enter the draw.
    let mut usable = Vec::new();
    let mut decodable = 0usize;
    for path in files {
        match image::image_dimensions(&path) {
            Ok((w, h)) => {
                decodable += 1;
                if w >= patch_size && h >= patch_size {
                    usable.push((path, w, h));
                }
            }
            Err(err) => log::warn!("skipping {}: {err}", path.display()),
        }
    }
    if decodable == 0 {
        return Err(Error::Precondition(format!(
            "{} contains no decodable images",
            source_dir.display()
        )));
    }
    if usable.is_empty() {
        return Err(Error::Precondition(format!(
            "patch size {patch_size} exceeds every source image in {}",
            source_dir.display()
        )));
    }

    let mut stream = SeedStream::for_purpose(seed, "patchpool");
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let s = stream.below(usable.len() as u64) as usize;
        let (_, w, h) = &usable[s];
        let x = stream.below((w - patch_size + 1) as u64) as u32;
        let y = stream.below((h - patch_size + 1) as u64) as u32;
        draws.push((s, x, y));
    }

    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &(s, _, _)) in draws.iter().enumerate() {
        by_source.entry(s).or_default().push(i);
    }
    let mut patches: Vec<Option<ImageBuffer>> = vec![None; count];
    let mut sources: Vec<Option<PatchSource>> = vec![None; count];
    for (s, idxs) in by_source {
        let (path, _, _) = &usable[s];
        let img = ImageBuffer::load(path)?;
        let source_id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for i in idxs {
            let (_, x, y) = draws[i];
            patches[i] = Some(img.crop(Rect::new(x, y, patch_size, patch_size))?);
            sources[i] = Some(PatchSource {
                source_id: source_id.clone(),
                x,
                y,
            });
        }
    }
    PatchPool::from_patches(
        patches.into_iter().map(|p| p.expect("every draw filled")).collect(),
        sources.into_iter().map(|s| s.expect("every draw filled")).collect(),
    )
}

/// Mean colors sorted by red channel; queries expand outward from the
/// target's red value and stop once the red gap alone exceeds the best
/// distance found.
#[derive(Clone, Debug)]
struct ColorIndex {
    order: Vec<usize>,
    reds: Vec<f64>,
}

impl ColorIndex {
    fn new(means: &[[f64; 3]]) -> Self {
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[a][0].total_cmp(&means[b][0]).then(a.cmp(&b)));
        let reds = order.iter().map(|&i| means[i][0]).collect();
        ColorIndex { order, reds }
    }

    fn nearest(&self, means: &[[f64; 3]], target: [f64; 3]) -> usize {
        let start = self.reds.partition_point(|&r| r < target[0]);
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        let consider = |i: usize, best: &mut usize, best_d: &mut f64| {
            let d = sq_dist(means[i], target);
            if d < *best_d || (d == *best_d && i < *best) {
                *best_d = d;
                *best = i;
            }
        };
        let mut up = start;
        let mut down = start;
        loop {
            let up_gap = self.reds.get(up).map(|r| (r - target[0]).powi(2));
            let down_gap = down.checked_sub(1).map(|j| (self.reds[j] - target[0]).powi(2));
            let up_live = up_gap.is_some_and(|g| g <= best_d);
            let down_live = down_gap.is_some_and(|g| g <= best_d);
            if !up_live && !down_live {
                break;
            }
            if up_live {
                consider(self.order[up], &mut best, &mut best_d);
                up += 1;
            }
            if down_live {
                down -= 1;
                consider(self.order[down], &mut best, &mut best_d);
            }
        }
        best
    }
}

#[inline]
fn sq_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}
