use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};

use super::stream::fnv1a64;

pub type Rgb = [u8; 3];

/// Axis-aligned pixel rectangle, `x + width` and `y + height` exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Row-major 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&color);
        }
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} RGB needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, rgb: Rgb) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// One row as a flat RGB slice.
    pub fn row(&self, y: u32) -> &[u8] {
        let stride = self.width as usize * 3;
        let start = y as usize * stride;
        &self.data[start..start + stride]
    }

    pub fn row_mut(&mut self, y: u32) -> &mut [u8] {
        let stride = self.width as usize * 3;
        let start = y as usize * stride;
        &mut self.data[start..start + stride]
    }

    pub fn contains(&self, rect: &Rect) -> bool {
        rect.x as u64 + rect.width as u64 <= self.width as u64
            && rect.y as u64 + rect.height as u64 <= self.height as u64
    }

    /// Copies a sub-rectangle out into a new buffer.
    pub fn crop(&self, rect: Rect) -> Result<ImageBuffer> {
        if rect.area() == 0 || !self.contains(&rect) {
            return Err(Error::Precondition(format!(
                "crop {rect:?} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut out = Vec::with_capacity(rect.area() as usize * 3);
        for y in rect.y..rect.y + rect.height {
            let row = self.row(y);
            out.extend_from_slice(&row[rect.x as usize * 3..(rect.x + rect.width) as usize * 3]);
        }
        ImageBuffer::from_raw(rect.width, rect.height, out)
    }

    /// Pastes `src` with its top-left corner at `(x, y)`, clipping at the border.
    pub fn blit(&mut self, src: &ImageBuffer, x: u32, y: u32) {
        let w = src.width.min(self.width.saturating_sub(x));
        let h = src.height.min(self.height.saturating_sub(y));
        for dy in 0..h {
            let src_row = &src.row(dy)[..w as usize * 3];
            let dst_row = self.row_mut(y + dy);
            dst_row[x as usize * 3..(x + w) as usize * 3].copy_from_slice(src_row);
        }
    }

    pub fn from_rgb_image(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        ImageBuffer {
            width,
            height,
            data: img.into_raw(),
        }
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length is validated on construction")
    }

    /// Decodes any supported format (PNG, JPEG) and drops alpha.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?;
        let img = Self::from_rgb_image(img.to_rgb8());
        if img.pixel_count() == 0 {
            return Err(Error::Precondition("decoded image has no pixels".into()));
        }
        Ok(img)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image().write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Per-channel arithmetic mean over `region`.
///
/// Sums are accumulated in integers and divided once.
pub fn mean_color(img: &ImageBuffer, region: Rect) -> Result<[f64; 3]> {
    if region.area() == 0 {
        return Err(Error::Precondition("mean_color over an empty region".into()));
    }
    if !img.contains(&region) {
        return Err(Error::Precondition(format!(
            "region {region:?} outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let mut sums = [0u64; 3];
    for y in region.y..region.y + region.height {
        let row = &img.row(y)[region.x as usize * 3..(region.x + region.width) as usize * 3];
        for px in row.chunks_exact(3) {
            sums[0] += px[0] as u64;
            sums[1] += px[1] as u64;
            sums[2] += px[2] as u64;
        }
    }
    let n = region.area() as f64;
    Ok([sums[0] as f64 / n, sums[1] as f64 / n, sums[2] as f64 / n])
}

/// 64-bit FNV-1a over the raw RGB bytes. Used for reproduction checks only.
pub fn content_digest(img: &ImageBuffer) -> u64 {
    fnv1a64(img.as_raw())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_raw_rejects_wrong_length() {
        assert!(ImageBuffer::from_raw(2, 2, vec![0; 11]).is_err());
        assert!(ImageBuffer::from_raw(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn mean_of_constant_image() {
        let img = ImageBuffer::filled(7, 5, [10, 20, 30]);
        let m = mean_color(&img, Rect::new(1, 2, 3, 2)).unwrap();
        assert_eq!(m, [10.0, 20.0, 30.0]);
    }

    #[test]
    fn mean_of_black_white_pair() {
        let mut img = ImageBuffer::filled(2, 1, [0, 0, 0]);
        img.put(1, 0, [255, 255, 255]);
        assert_eq!(mean_color(&img, img.full_rect()).unwrap(), [127.5; 3]);
    }

    #[test]
    fn mean_rejects_bad_regions() {
        let img = ImageBuffer::filled(4, 4, [1, 2, 3]);
        assert!(mean_color(&img, Rect::new(0, 0, 0, 2)).is_err());
        assert!(mean_color(&img, Rect::new(3, 3, 2, 1)).is_err());
    }

    #[test]
    fn mean_matches_pixel_loop() {
        let img = ImageBuffer::from_fn(13, 11, |x, y| {
            [(x * 37 + y * 11) as u8, (x * y * 7) as u8, (255 - x * 3 - y) as u8]
        });
        let r = Rect::new(2, 1, 8, 8);
        let mut naive = [0.0f64; 3];
        for y in r.y..r.y + r.height {
            for x in r.x..r.x + r.width {
                let p = img.get(x, y);
                for c in 0..3 {
                    naive[c] += p[c] as f64 / 64.0;
                }
            }
        }
        let m = mean_color(&img, r).unwrap();
        for c in 0..3 {
            assert!((m[c] - naive[c]).abs() <= 1e-12);
        }
    }

    #[test]
    fn crop_and_blit() {
        let img = ImageBuffer::from_fn(6, 4, |x, y| [x as u8, y as u8, 0]);
        let c = img.crop(Rect::new(2, 1, 3, 2)).unwrap();
        assert_eq!(c.get(0, 0), [2, 1, 0]);
        assert_eq!(c.get(2, 1), [4, 2, 0]);
        let mut canvas = ImageBuffer::filled(4, 4, [9, 9, 9]);
        canvas.blit(&c, 2, 3);
        assert_eq!(canvas.get(2, 3), [2, 1, 0]);
        assert_eq!(canvas.get(3, 3), [3, 1, 0]);
        assert_eq!(canvas.get(1, 3), [9, 9, 9]);
    }

    #[test]
    fn png_round_trip() {
        let img = ImageBuffer::from_fn(9, 3, |x, y| [x as u8 * 20, y as u8 * 50, 7]);
        let bytes = img.encode_png().unwrap();
        assert_eq!(ImageBuffer::decode(&bytes).unwrap(), img);
    }
}
