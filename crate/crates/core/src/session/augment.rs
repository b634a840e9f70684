use serde::{Deserialize, Serialize};

use crate::imgcore::ImageBuffer;

/// Practice-block transformations; deliberately none of the six corruptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupAugmentation {
    Grayscale,
    HorizontalFlip,
    LowContrast,
    BoxBlur,
}

impl WarmupAugmentation {
    pub const ALL: [WarmupAugmentation; 4] = [
        WarmupAugmentation::Grayscale,
        WarmupAugmentation::HorizontalFlip,
        WarmupAugmentation::LowContrast,
        WarmupAugmentation::BoxBlur,
    ];

    pub fn token(self) -> &'static str {
        match self {
            WarmupAugmentation::Grayscale => "grayscale",
            WarmupAugmentation::HorizontalFlip => "horizontal_flip",
            WarmupAugmentation::LowContrast => "low_contrast",
            WarmupAugmentation::BoxBlur => "box_blur",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.token() == s)
    }
}

pub fn warmup_augment(img: &ImageBuffer, aug: WarmupAugmentation) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    match aug {
        WarmupAugmentation::Grayscale => ImageBuffer::from_fn(w, h, |x, y| {
            let [r, g, b] = img.get(x, y);
            let l = ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8;
            [l; 3]
        }),
        WarmupAugmentation::HorizontalFlip => ImageBuffer::from_fn(w, h, |x, y| img.get(w - 1 - x, y)),
        // Halve the distance to mid-gray.
        WarmupAugmentation::LowContrast => {
            ImageBuffer::from_fn(w, h, |x, y| img.get(x, y).map(|v| ((v as u32 + 128) / 2) as u8))
        }
        WarmupAugmentation::BoxBlur => ImageBuffer::from_fn(w, h, |x, y| {
            let mut acc = [0u32; 3];
            let mut n = 0;
            for yy in y.saturating_sub(2)..(y + 3).min(h) {
                for xx in x.saturating_sub(2)..(x + 3).min(w) {
                    let p = img.get(xx, yy);
                    for c in 0..3 {
                        acc[c] += p[c] as u32;
                    }
                    n += 1;
                }
            }
            acc.map(|a| ((a + n / 2) / n) as u8)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentations() {
        let img = ImageBuffer::from_fn(5, 3, |x, y| [(x * 50) as u8, (y * 100) as u8, 0]);
        let flip = warmup_augment(&img, WarmupAugmentation::HorizontalFlip);
        assert_eq!(flip.get(0, 1), img.get(4, 1));
        let gray = warmup_augment(&img, WarmupAugmentation::Grayscale);
        assert!(gray.as_raw().chunks(3).all(|p| p[0] == p[1] && p[1] == p[2]));
        let flat = ImageBuffer::filled(6, 6, [10, 20, 30]);
        assert_eq!(warmup_augment(&flat, WarmupAugmentation::BoxBlur), flat);
        assert_eq!(warmup_augment(&flat, WarmupAugmentation::LowContrast).get(0, 0), [69, 74, 79]);
        for a in WarmupAugmentation::ALL {
            assert_eq!(WarmupAugmentation::from_token(a.token()), Some(a));
        }
    }
}
