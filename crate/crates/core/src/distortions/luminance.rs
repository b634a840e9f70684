use crate::error::{Error, Result};
use crate::imgcore::{band_bounds, CorruptionKind, ImageBuffer, SeedContext, Severity};

use super::{resolve_params, Params};

pub fn luminance_checkerboard(img: &ImageBuffer, severity: Severity, ctx: &SeedContext) -> Result<ImageBuffer> {
    match resolve_params(CorruptionKind::LuminanceCheckerboard, severity) {
        Params::Luminance {
            grid,
            min_delta,
            max_delta,
        } => luminance_checkerboard_with(img, grid, min_delta, max_delta, ctx).map(|(o, _)| o),
        _ => unreachable!(),
    }
}

/// Signed per-cell deltas in row-major cell order: one magnitude per cell,
/// `+m` where `row + col` is even and `-m` where it is odd.
pub fn luminance_deltas(grid: u32, min_delta: u32, max_delta: u32, ctx: &SeedContext) -> Result<Vec<i32>> {
    if grid == 0 {
        return Err(Error::InvalidArgument("luminance grid must be positive".into()));
    }
    if min_delta > max_delta || max_delta > 255 {
        return Err(Error::InvalidArgument(format!(
            "luminance range [{min_delta}, {max_delta}]"
        )));
    }
    let mut stream = ctx.stream();
    let mut deltas = Vec::with_capacity((grid * grid) as usize);
    for row in 0..grid {
        for col in 0..grid {
            let m = if min_delta == max_delta {
                min_delta as i32
            } else {
                stream.range_inclusive(min_delta as i64, max_delta as i64) as i32
            };
            deltas.push(if (row + col) % 2 == 0 { m } else { -m });
        }
    }
    Ok(deltas)
}

/// Returns the corrupted image and the deltas that were applied.
pub fn luminance_checkerboard_with(
    img: &ImageBuffer,
    grid: u32,
    min_delta: u32,
    max_delta: u32,
    ctx: &SeedContext,
) -> Result<(ImageBuffer, Vec<i32>)> {
    let deltas = luminance_deltas(grid, min_delta, max_delta, ctx)?;
    let xs = band_bounds(img.width(), grid);
    let ys = band_bounds(img.height(), grid);
    let mut out = img.clone();
    for (row, band) in ys.windows(2).enumerate() {
        for y in band[0]..band[1] {
            let line = out.row_mut(y);
            for (col, cols) in xs.windows(2).enumerate() {
                let d = deltas[row * grid as usize + col];
                for v in &mut line[cols[0] as usize * 3..cols[1] as usize * 3] {
                    *v = (*v as i32 + d).clamp(0, 255) as u8;
                }
            }
        }
    }
    Ok((out, deltas))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(sev: i64) -> SeedContext {
        SeedContext::new(2, "lum", CorruptionKind::LuminanceCheckerboard, Severity::new(sev).unwrap())
    }

    #[test]
    fn mid_gray_level_one() {
        let img = ImageBuffer::filled(224, 224, [128; 3]);
        let out = luminance_checkerboard(&img, Severity::new(1).unwrap(), &ctx(1)).unwrap();
        assert_eq!(out.get(0, 0), [178; 3]);
        assert_eq!(out.get(16, 0), [78; 3]);
        assert_eq!(out.get(16, 16), [178; 3]);
        assert!(out.as_raw().iter().all(|&v| v == 78 || v == 178));
    }

    #[test]
    fn signs_alternate_and_ranges_hold() {
        for level in 1..=5 {
            let Params::Luminance { grid, min_delta, max_delta } =
                resolve_params(CorruptionKind::LuminanceCheckerboard, Severity::new(level).unwrap())
            else {
                unreachable!()
            };
            let d = luminance_deltas(grid, min_delta, max_delta, &ctx(level)).unwrap();
            assert_eq!(d.len(), 196);
            for (i, &v) in d.iter().enumerate() {
                let (r, c) = (i / 14, i % 14);
                assert_eq!(v > 0, (r + c) % 2 == 0);
                assert!((min_delta as i32..=max_delta as i32).contains(&v.abs()));
            }
            if level == 1 {
                assert!(d.iter().all(|v| v.abs() == 50));
            }
        }
    }

    #[test]
    fn zero_range_is_identity() {
        let img = ImageBuffer::from_fn(30, 30, |x, y| [x as u8, y as u8, 200]);
        let (out, _) = luminance_checkerboard_with(&img, 14, 0, 0, &ctx(1)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn clamps_at_extremes() {
        let img = ImageBuffer::filled(28, 28, [250, 5, 128]);
        let (out, _) = luminance_checkerboard_with(&img, 14, 255, 255, &ctx(5)).unwrap();
        assert_eq!(out.get(0, 0), [255, 255, 255]);
        assert_eq!(out.get(2, 0), [0, 0, 0]);
    }
}
