//! Deterministic inputs shared by the benchmarks.

use laionc_core::patchpool::{PatchPool, PatchSource, STICKER_PATCH_SIZE};
use laionc_core::{ImageBuffer, SeedStream};

/// A 224×224 image with smooth gradients and some texture.
pub fn sample_image(seed: u64) -> ImageBuffer {
    let mut s = SeedStream::for_purpose(seed, "bench-image");
    let noise: Vec<u8> = (0..224 * 224).map(|_| s.below(32) as u8).collect();
    ImageBuffer::from_fn(224, 224, |x, y| {
        let n = noise[(y * 224 + x) as usize];
        [(x as u8).wrapping_add(n), (y as u8).wrapping_add(n), ((x + y) / 2) as u8]
    })
}

pub fn sample_pool(count: usize) -> PatchPool {
    let size = STICKER_PATCH_SIZE;
    let mut s = SeedStream::for_purpose(7, "bench-pool");
    let patches = (0..count)
        .map(|_| {
            let c = [s.below(256) as u8, s.below(256) as u8, s.below(256) as u8];
            ImageBuffer::filled(size, size, c)
        })
        .collect();
    let sources = (0..count)
        .map(|i| PatchSource {
            source_id: format!("bench{i}"),
            x: 0,
            y: 0,
        })
        .collect();
    PatchPool::from_patches(patches, sources).expect("non-empty pool")
}
