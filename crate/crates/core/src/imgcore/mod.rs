//! Raster type, color arithmetic, resampling and deterministic random
//! streams shared by every distortion.

mod buffer;
mod kind;
mod resize;
mod stream;

pub use buffer::{content_digest, mean_color, ImageBuffer, Rect, Rgb};
pub use kind::{CorruptionKind, Severity};
pub use resize::{center_crop, preprocess, resize_bilinear, CROP_SIZE, RESIZE_SHORT_SIDE};
pub use stream::{fnv1a64, split_mix, SeedContext, SeedStream};

/// Splits `len` into `parts` contiguous bands and returns the `parts + 1`
/// boundaries `floor(i * len / parts)`.
///
/// Bands differ in size by at most one pixel. When `parts` divides `len`
/// every band has the same extent.
pub fn band_bounds(len: u32, parts: u32) -> Vec<u32> {
    assert!(parts > 0, "band count must be positive");
    (0..=parts)
        .map(|i| ((i as u64 * len as u64) / parts as u64) as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_bounds_divisible() {
        let b = band_bounds(224, 28);
        assert_eq!(b.len(), 29);
        assert!(b.windows(2).all(|w| w[1] - w[0] == 8));
    }

    #[test]
    fn band_bounds_uneven() {
        let b = band_bounds(224, 178);
        assert_eq!(*b.last().unwrap(), 224);
        assert!(b.windows(2).all(|w| (1..=2).contains(&(w[1] - w[0]))));
    }
}
