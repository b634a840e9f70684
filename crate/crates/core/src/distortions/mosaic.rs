use crate::error::{Error, Result};
use crate::imgcore::{band_bounds, mean_color, resize_bilinear, ImageBuffer, Rect, Severity};
use crate::patchpool::PatchPool;

use super::{resolve_params, Params};

/// Replaces each of the `n`x`n` tiles with the donor patch whose mean color
/// is nearest to the tile's mean, resampled to the tile extent.
pub fn mosaic(img: &ImageBuffer, severity: Severity, pool: &PatchPool) -> Result<ImageBuffer> {
    match resolve_params(crate::imgcore::CorruptionKind::Mosaic, severity) {
        Params::Mosaic { grid } => mosaic_with(img, grid, pool),
        _ => unreachable!(),
    }
}

pub fn mosaic_with(img: &ImageBuffer, grid: u32, pool: &PatchPool) -> Result<ImageBuffer> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if grid == 0 {
        return Err(Error::InvalidArgument("mosaic grid must be positive".into()));
    }
    let xs = band_bounds(img.width(), grid);
    let ys = band_bounds(img.height(), grid);
    let mut out = img.clone();
    for rows in ys.windows(2) {
        for cols in xs.windows(2) {
            let tile = Rect::new(cols[0], rows[0], cols[1] - cols[0], rows[1] - rows[0]);
            if tile.area() == 0 {
                continue;
            }
            let target = mean_color(img, tile)?;
            let donor = pool.patch(pool.nearest_patch(target));
            let fitted = resize_bilinear(donor, tile.width, tile.height)?;
            out.blit(&fitted, tile.x, tile.y);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchpool::PatchSource;

    fn pool_of(colors: &[[u8; 3]], size: u32) -> PatchPool {
        PatchPool::from_patches(
            colors.iter().map(|&c| ImageBuffer::filled(size, size, c)).collect(),
            (0..colors.len())
                .map(|i| PatchSource {
                    source_id: format!("p{i}"),
                    x: 0,
                    y: 0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_gray_donor_fills_everything() {
        let img = ImageBuffer::from_fn(224, 224, |x, y| [x as u8, y as u8, 0]);
        let out = mosaic(&img, Severity::new(3).unwrap(), &pool_of(&[[120, 120, 120]], 16)).unwrap();
        assert!(out.as_raw().chunks(3).all(|p| p == [120, 120, 120]));
    }

    #[test]
    fn level_five_uses_8px_tiles() {
        // Left half red, right half blue; donors are pure red and pure blue with
        // a border pixel that marks each tile's origin after resampling.
        let img = ImageBuffer::from_fn(224, 224, |x, _| if x < 112 { [255, 0, 0] } else { [0, 0, 255] });
        let out = mosaic(&img, Severity::new(5).unwrap(), &pool_of(&[[250, 0, 0], [0, 0, 250]], 8)).unwrap();
        assert_eq!(out.get(0, 0), [250, 0, 0]);
        assert_eq!(out.get(111, 223), [250, 0, 0]);
        assert_eq!(out.get(112, 0), [0, 0, 250]);
    }

    #[test]
    fn tiles_pick_matching_donors() {
        let img = ImageBuffer::from_fn(8, 8, |x, y| if (x < 4) ^ (y < 4) { [0, 0, 0] } else { [255, 255, 255] });
        let out = mosaic_with(&img, 2, &pool_of(&[[250, 250, 250], [5, 5, 5]], 3)).unwrap();
        assert_eq!(out.get(0, 0), [250, 250, 250]);
        assert_eq!(out.get(5, 0), [5, 5, 5]);
        assert_eq!(out.get(7, 7), [250, 250, 250]);
    }
}
