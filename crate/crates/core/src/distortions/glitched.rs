use crate::imgcore::{CorruptionKind, ImageBuffer, SeedContext, SeedStream, Severity};

use super::{resolve_params, Params};

/// Scanlines keep 6/10 of their value, i.e. they are darkened by 40%.
pub const SCANLINE_KEEP_TENTHS: u32 = 6;

/// One shifted rectangle, as drawn from the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GlitchRegion {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    /// Signed horizontal displacement before wrapping.
    pub shift: i64,
}

pub fn glitched(img: &ImageBuffer, severity: Severity, ctx: &SeedContext) -> ImageBuffer {
    match resolve_params(CorruptionKind::Glitched, severity) {
        Params::Glitched {
            shift_percent,
            regions,
            offset_px,
        } => glitched_with(img, shift_percent, regions, offset_px, ctx),
        _ => unreachable!(),
    }
}

/// Region shifts, then per-channel offsets, then one darkened scanline at
/// the top edge of each region.
///
/// Per region the stream yields width in `[max(1, W/4), W]`, height in
/// `[1, max(1, H/8)]`, the top-left corner, and a displacement in
/// `[-shift% * W, +shift% * W]`. Rows inside the region are rotated by the
/// displacement modulo the region width. Each channel of the whole image is
/// then rotated by its own displacement in `[-offset, +offset]`.
pub fn glitched_with(
    img: &ImageBuffer,
    shift_percent: u32,
    regions: u32,
    offset_px: u32,
    ctx: &SeedContext,
) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return img.clone();
    }
    let mut stream = ctx.stream();
    let max_shift = (shift_percent as u64 * w as u64 / 100) as i64;
    let drawn: Vec<GlitchRegion> = (0..regions)
        .map(|_| draw_region(&mut stream, w, h, max_shift))
        .collect();

    let mut out = img.clone();
    let mut scratch = Vec::with_capacity(w as usize * 3);
    for r in &drawn {
        let span = r.width as usize;
        let shift = r.shift.rem_euclid(r.width as i64) as usize;
        if shift == 0 {
            continue;
        }
        for y in r.y..r.y + r.height {
            let row = out.row_mut(y);
            let seg = &mut row[r.x as usize * 3..(r.x as usize + span) * 3];
            scratch.clear();
            scratch.extend_from_slice(seg);
            for i in 0..span {
                let dst = (i + shift) % span;
                seg[dst * 3..dst * 3 + 3].copy_from_slice(&scratch[i * 3..i * 3 + 3]);
            }
        }
    }

    let offsets: [i64; 3] = std::array::from_fn(|_| stream.range_inclusive(-(offset_px as i64), offset_px as i64));
    if offsets.iter().any(|&o| o != 0) {
        let wi = w as i64;
        for y in 0..h {
            let row = out.row_mut(y);
            scratch.clear();
            scratch.extend_from_slice(row);
            for x in 0..wi {
                for (c, &o) in offsets.iter().enumerate() {
                    let src = (x - o).rem_euclid(wi) as usize;
                    row[x as usize * 3 + c] = scratch[src * 3 + c];
                }
            }
        }
    }

    for r in &drawn {
        let row = out.row_mut(r.y);
        for v in &mut row[r.x as usize * 3..(r.x + r.width) as usize * 3] {
            *v = ((*v as u32 * SCANLINE_KEEP_TENTHS + 5) / 10) as u8;
        }
    }
    out
}

fn draw_region(stream: &mut SeedStream, w: u32, h: u32, max_shift: i64) -> GlitchRegion {
    let min_w = (w / 4).max(1);
    let width = stream.range_inclusive(min_w as i64, w as i64) as u32;
    let max_h = (h / 8).max(1);
    let height = stream.range_inclusive(1, max_h as i64) as u32;
    let x = stream.below((w - width + 1) as u64) as u32;
    let y = stream.below((h - height + 1) as u64) as u32;
    let shift = stream.range_inclusive(-max_shift, max_shift);
    GlitchRegion {
        x,
        y,
        width,
        height,
        shift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(sev: i64) -> SeedContext {
        SeedContext::new(11, "glitch", CorruptionKind::Glitched, Severity::new(sev).unwrap())
    }

    fn textured() -> ImageBuffer {
        ImageBuffer::from_fn(64, 48, |x, y| [(x * 4) as u8, (y * 5) as u8, ((x * y) % 251) as u8])
    }

    #[test]
    fn no_regions_no_offset_is_identity() {
        let img = textured();
        assert_eq!(glitched_with(&img, 50, 0, 0, &ctx(1)), img);
    }

    #[test]
    fn deterministic_per_context() {
        let img = textured();
        let a = glitched(&img, Severity::new(5).unwrap(), &ctx(5));
        let b = glitched(&img, Severity::new(5).unwrap(), &ctx(5));
        assert_eq!(a, b);
        assert_ne!(a, img);
        assert_eq!((a.width(), a.height()), (64, 48));
    }

    #[test]
    fn channel_offsets_only_rotate_rows() {
        // With no regions, every row keeps its multiset of channel values.
        let img = textured();
        let out = glitched_with(&img, 0, 0, 3, &ctx(2));
        for y in 0..img.height() {
            for c in 0..3 {
                let mut a: Vec<u8> = img.row(y).iter().skip(c).step_by(3).copied().collect();
                let mut b: Vec<u8> = out.row(y).iter().skip(c).step_by(3).copied().collect();
                a.sort();
                b.sort();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn large_shifts_wrap() {
        // 200% of width still lands inside the region after wrapping.
        let mut s = SeedStream::from_key(5);
        for _ in 0..500 {
            let r = draw_region(&mut s, 224, 224, 448);
            assert!(r.shift.abs() <= 448);
            assert!(r.x + r.width <= 224 && r.y + r.height <= 224);
            assert!(r.shift.rem_euclid(r.width as i64) < r.width as i64);
        }
    }
}
