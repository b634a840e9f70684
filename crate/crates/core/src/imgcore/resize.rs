use crate::error::{Error, Result};

use super::buffer::{ImageBuffer, Rect};

pub const RESIZE_SHORT_SIDE: u32 = 256;
pub const CROP_SIZE: u32 = 224;

/// Bilinear resampling with half-pixel centers and edge clamping.
///
/// Source coordinate for destination pixel `d` is `(d + 0.5) * src / dst - 0.5`.
/// At identity scale every weight is zero and the output equals the input.
pub fn resize_bilinear(img: &ImageBuffer, width: u32, height: u32) -> Result<ImageBuffer> {
    if img.pixel_count() == 0 {
        return Err(Error::Precondition("cannot resize an empty image".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!("target size {width}x{height}")));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let xs = axis_taps(img.width(), width);
    let ys = axis_taps(img.height(), height);
    let mut out = ImageBuffer::filled(width, height, [0, 0, 0]);
    for (dy, &(y0, y1, wy)) in ys.iter().enumerate() {
        let r0 = img.row(y0);
        let r1 = img.row(y1);
        let dst = out.row_mut(dy as u32);
        for (dx, &(x0, x1, wx)) in xs.iter().enumerate() {
            for c in 0..3 {
                let p00 = r0[x0 as usize * 3 + c] as f64;
                let p01 = r0[x1 as usize * 3 + c] as f64;
                let p10 = r1[x0 as usize * 3 + c] as f64;
                let p11 = r1[x1 as usize * 3 + c] as f64;
                let top = p00 + (p01 - p00) * wx;
                let bottom = p10 + (p11 - p10) * wx;
                let v = top + (bottom - top) * wy;
                dst[dx * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

fn axis_taps(src: u32, dst: u32) -> Vec<(u32, u32, f64)> {
    let scale = src as f64 / dst as f64;
    let last = src - 1;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as u32).min(last);
            let i1 = (i0 + 1).min(last);
            let w = if i0 == last { 0.0 } else { s - i0 as f64 };
            (i0, i1, w)
        })
        .collect()
}

/// Central `size`x`size` crop; offsets round down.
pub fn center_crop(img: &ImageBuffer, size: u32) -> Result<ImageBuffer> {
    if img.width() < size || img.height() < size {
        return Err(Error::Precondition(format!(
            "{}x{} image is smaller than the {size}px crop",
            img.width(),
            img.height()
        )));
    }
    let x = (img.width() - size) / 2;
    let y = (img.height() - size) / 2;
    img.crop(Rect::new(x, y, size, size))
}

/// Short side to 256 (aspect preserved, the long side rounded), then a
/// central 224x224 crop.
pub fn preprocess(img: &ImageBuffer) -> Result<ImageBuffer> {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Err(Error::Precondition("cannot preprocess a 0-pixel image".into()));
    }
    let (nw, nh) = if w <= h {
        let nh = (h as f64 * RESIZE_SHORT_SIDE as f64 / w as f64).round() as u32;
        (RESIZE_SHORT_SIDE, nh.max(RESIZE_SHORT_SIDE))
    } else {
        let nw = (w as f64 * RESIZE_SHORT_SIDE as f64 / h as f64).round() as u32;
        (nw.max(RESIZE_SHORT_SIDE), RESIZE_SHORT_SIDE)
    };
    let resized = resize_bilinear(img, nw, nh)?;
    center_crop(&resized, CROP_SIZE)
}
