use crate::error::{Error, Result};
use crate::imgcore::{band_bounds, mean_color, CorruptionKind, ImageBuffer, Rect, Rgb, Severity};

use super::{resolve_params, Params};

pub const BACKGROUND_GRAY: Rgb = [116, 116, 116];
pub const MAX_TILT_DEG: f64 = 45.0;

/// One drawn segment: a cell of a vertical strip.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSegment {
    /// Horizontal strip center.
    pub cx: u32,
    /// First row of the cell.
    pub y0: u32,
    /// Rows covered, one pixel each.
    pub len: u32,
    /// Tilt away from vertical in degrees, positive leaning right going down.
    pub tilt_deg: f64,
    pub color: Rgb,
}

pub fn vertical_lines(img: &ImageBuffer, severity: Severity) -> Result<ImageBuffer> {
    match resolve_params(CorruptionKind::VerticalLines, severity) {
        Params::VerticalLines { sections, y_step } => vertical_lines_with(img, sections, y_step),
        _ => unreachable!(),
    }
}

pub fn vertical_lines_with(img: &ImageBuffer, sections: u32, y_step: u32) -> Result<ImageBuffer> {
    let segments = line_segments(img, sections, y_step)?;
    let mut out = ImageBuffer::filled(img.width(), img.height(), BACKGROUND_GRAY);
    let max_x = img.width() as f64 - 1.0;
    for s in &segments {
        let slope = s.tilt_deg.to_radians().tan();
        let mid = (s.len as f64 - 1.0) / 2.0;
        for k in 0..s.len {
            let x = (s.cx as f64 + (k as f64 - mid) * slope).round().clamp(0.0, max_x) as u32;
            out.put(x, s.y0 + k, s.color);
        }
    }
    Ok(out)
}

/// Computes the segment for every (strip, cell) pair.
///
/// Tilt follows the contour: the line runs perpendicular to the 3x3 Sobel
/// gradient of the luma image at the cell center, clamped to
/// `±MAX_TILT_DEG`. Flat neighborhoods give vertical lines.
pub fn line_segments(img: &ImageBuffer, sections: u32, y_step: u32) -> Result<Vec<LineSegment>> {
    if sections == 0 || y_step == 0 {
        return Err(Error::InvalidArgument("sections and y-step must be positive".into()));
    }
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Ok(Vec::new());
    }
    let luma: Vec<f64> = img
        .as_raw()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    let at = |x: i64, y: i64| -> f64 {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        luma[y * w as usize + x]
    };

    let xs = band_bounds(w, sections.min(w));
    let mut segments = Vec::new();
    for strip in xs.windows(2) {
        let cx = strip[0] + (strip[1] - strip[0]) / 2;
        let mut y0 = 0;
        while y0 < h {
            let len = y_step.min(h - y0);
            let cell = Rect::new(strip[0], y0, strip[1] - strip[0], len);
            let m = mean_color(img, cell)?;
            let color = m.map(|v| v.round().clamp(0.0, 255.0) as u8);
            let (x, y) = (cx as i64, (y0 + len / 2) as i64);
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            segments.push(LineSegment {
                cx,
                y0,
                len,
                tilt_deg: contour_tilt(gx, gy),
                color,
            });
            y0 += len;
        }
    }
    Ok(segments)
}

/// Angle from vertical of the direction perpendicular to `(gx, gy)`.
fn contour_tilt(gx: f64, gy: f64) -> f64 {
    if gx.hypot(gy) < 1e-9 {
        return 0.0;
    }
    // Perpendicular direction (dx, dy) = (-gy, gx), oriented downward.
    let (mut dx, mut dy) = (-gy, gx);
    if dy < 0.0 {
        dx = -dx;
        dy = -dy;
    }
    dx.atan2(dy).to_degrees().clamp(-MAX_TILT_DEG, MAX_TILT_DEG)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_draws_constant_lines_on_gray() {
        let img = ImageBuffer::filled(224, 224, [10, 200, 30]);
        let out = vertical_lines(&img, Severity::new(5).unwrap()).unwrap();
        let segs = line_segments(&img, 60, 8).unwrap();
        assert_eq!(segs.len(), 60 * 28);
        let mut drawn = 0;
        for p in out.as_raw().chunks(3) {
            if p == [10, 200, 30] {
                drawn += 1;
            } else {
                assert_eq!(p, BACKGROUND_GRAY);
            }
        }
        // One pixel per row per strip.
        assert_eq!(drawn, 60 * 224);
    }

    #[test]
    fn level_one_on_224_has_single_pixel_cells() {
        let img = ImageBuffer::from_fn(224, 224, |x, y| [x as u8, y as u8, 9]);
        let segs = line_segments(&img, 224, 1).unwrap();
        assert_eq!(segs.len(), 224 * 224);
        assert!(segs.iter().all(|s| s.len == 1));
    }

    #[test]
    fn tilt_orientation() {
        assert_eq!(contour_tilt(0.0, 0.0), 0.0);
        // Horizontal gradient: vertical contour.
        assert_eq!(contour_tilt(10.0, 0.0), 0.0);
        // Pure vertical gradient: horizontal contour, clamped.
        assert_eq!(contour_tilt(0.0, 5.0).abs(), 45.0);
        // Diagonal gradient gives a 45 degree contour.
        assert!((contour_tilt(1.0, 1.0).abs() - 45.0).abs() < 1e-12);
        let t = contour_tilt(4.0, 1.0);
        assert!(t.abs() < 45.0 && t.abs() > 0.0);
    }

    #[test]
    fn non_positive_params_error() {
        let img = ImageBuffer::filled(8, 8, [0; 3]);
        assert!(vertical_lines_with(&img, 0, 2).is_err());
        assert!(vertical_lines_with(&img, 2, 0).is_err());
    }
}
