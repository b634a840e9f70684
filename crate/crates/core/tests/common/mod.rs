#![allow(dead_code)]

use std::path::{Path, PathBuf};

use laionc_core::builder::{BuildConfig, SourceRecord};
use laionc_core::patchpool::{PatchPool, PatchSource};
use laionc_core::{ImageBuffer, SeedStream, Taxonomy};

/// A small textured image that differs per `seed`.
pub fn synthetic_image(width: u32, height: u32, seed: u64) -> ImageBuffer {
    let mut s = SeedStream::for_purpose(seed, "fixture");
    let (a, b, c) = (s.below(7) as u32 + 1, s.below(5) as u32 + 1, s.below(256) as u32);
    ImageBuffer::from_fn(width, height, |x, y| {
        [
            ((x * a + c) % 256) as u8,
            ((y * b + 2 * c) % 256) as u8,
            (((x + y) * (a + b)) % 256) as u8,
        ]
    })
}

pub fn synthetic_pool(count: usize, size: u32) -> PatchPool {
    let patches = (0..count).map(|i| synthetic_image(size, size, 1000 + i as u64)).collect();
    let sources = (0..count)
        .map(|i| PatchSource {
            source_id: format!("fixture{i}"),
            x: 0,
            y: 0,
        })
        .collect();
    PatchPool::from_patches(patches, sources).unwrap()
}

/// Writes `per_class` images for every superclass and returns the source list.
pub fn write_sources(dir: &Path, tax: &Taxonomy, per_class: usize, make: impl Fn(u64) -> ImageBuffer) -> Vec<SourceRecord> {
    std::fs::create_dir_all(dir).unwrap();
    let mut out = Vec::new();
    for s in 0..tax.superclasses().len() {
        let fine = &tax.fine_classes()[tax.members(s)[0]];
        for i in 0..per_class {
            let n = (s * per_class + i) as u64;
            let path = dir.join(format!("src{n}.png"));
            make(n).save_png(&path).unwrap();
            out.push(SourceRecord {
                path,
                fine_class: fine.clone(),
                source_id: format!("{n:05}"),
            });
        }
    }
    out
}

pub fn desk_config(output_root: PathBuf, per_class: usize, seed: u64) -> BuildConfig {
    serde_json::from_value(serde_json::json!({
        "sources": "sources.csv",
        "images_per_class": per_class,
        "global_seed": seed,
        "output_root": output_root,
    }))
    .unwrap()
}
