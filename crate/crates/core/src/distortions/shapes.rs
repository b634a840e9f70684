use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, ImageBuffer, Rgb, SeedContext, SeedStream, Severity};

use super::{resolve_params, Params};

/// Inner-to-outer vertex radius of a regular five-point star.
pub const STAR_INNER_RATIO: f64 = 0.381_966_011_250_105_1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Square,
    Circle,
    Star,
}

/// A filled, opaque shape. For squares `radius` is the half side; for stars
/// it is the outer vertex radius, with one point straight up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub color: Rgb,
}

impl Shape {
    /// Calls `hit(x, y)` for every pixel whose center lies inside the shape.
    pub fn rasterize(&self, width: u32, height: u32, mut hit: impl FnMut(u32, u32)) {
        let x_lo = ((self.cx - self.radius - 0.5).floor().max(0.0)) as u32;
        let y_lo = ((self.cy - self.radius - 0.5).floor().max(0.0)) as u32;
        let x_hi = ((self.cx + self.radius).ceil().max(0.0) as u32).min(width);
        let y_hi = ((self.cy + self.radius).ceil().max(0.0) as u32).min(height);
        let star = (self.kind == ShapeKind::Star).then(|| star_vertices(self.cx, self.cy, self.radius));
        for y in y_lo..y_hi {
            let py = y as f64 + 0.5;
            for x in x_lo..x_hi {
                let px = x as f64 + 0.5;
                let (dx, dy) = (px - self.cx, py - self.cy);
                let inside = match self.kind {
                    ShapeKind::Square => dx.abs() <= self.radius && dy.abs() <= self.radius,
                    ShapeKind::Circle => dx * dx + dy * dy <= self.radius * self.radius,
                    ShapeKind::Star => point_in_polygon(px, py, star.as_ref().unwrap()),
                };
                if inside {
                    hit(x, y);
                }
            }
        }
    }
}

fn star_vertices(cx: f64, cy: f64, r: f64) -> [(f64, f64); 10] {
    std::array::from_fn(|i| {
        let radius = if i % 2 == 0 { r } else { r * STAR_INNER_RATIO };
        let angle = -std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
        (cx + radius * angle.cos(), cy + radius * angle.sin())
    })
}

fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Draws the shape list: kind, center, radius, then color per shape.
pub fn shape_layout(
    stream: &mut SeedStream,
    count: u32,
    width: u32,
    height: u32,
    radius_min: f64,
    radius_max: f64,
) -> Vec<Shape> {
    (0..count)
        .map(|_| {
            let kind = match stream.below(3) {
                0 => ShapeKind::Square,
                1 => ShapeKind::Circle,
                _ => ShapeKind::Star,
            };
            let cx = stream.uniform(0.0, width as f64);
            let cy = stream.uniform(0.0, height as f64);
            let radius = stream.uniform(radius_min, radius_max);
            let color = std::array::from_fn(|_| stream.below(256) as u8);
            Shape {
                kind,
                cx,
                cy,
                radius,
                color,
            }
        })
        .collect()
}

pub fn geometric_shapes(img: &ImageBuffer, severity: Severity, ctx: &SeedContext) -> Result<ImageBuffer> {
    match resolve_params(CorruptionKind::GeometricShapes, severity) {
        Params::GeometricShapes {
            count,
            radius_min,
            radius_max,
        } => geometric_shapes_with(img, count, radius_min, radius_max, ctx),
        _ => unreachable!(),
    }
}

pub fn geometric_shapes_with(
    img: &ImageBuffer,
    count: u32,
    radius_min: f64,
    radius_max: f64,
    ctx: &SeedContext,
) -> Result<ImageBuffer> {
    if !(radius_min.is_finite() && radius_max.is_finite() && 0.0 < radius_min && radius_min <= radius_max) {
        return Err(Error::InvalidArgument(format!(
            "shape radius range [{radius_min}, {radius_max}]"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let shapes = shape_layout(&mut ctx.stream(), count, w, h, radius_min, radius_max);
    let mut out = img.clone();
    for s in &shapes {
        s.rasterize(w, h, |x, y| out.put(x, y, s.color));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn area(kind: ShapeKind, r: f64) -> usize {
        let s = Shape {
            kind,
            cx: 100.0,
            cy: 100.0,
            radius: r,
            color: [0; 3],
        };
        let mut n = 0;
        s.rasterize(200, 200, |_, _| n += 1);
        n
    }

    #[test]
    fn raster_areas_match_geometry() {
        let r = 30.0;
        let square = area(ShapeKind::Square, r) as f64;
        let circle = area(ShapeKind::Circle, r) as f64;
        let star = area(ShapeKind::Star, r) as f64;
        assert!((square - 4.0 * r * r).abs() / (4.0 * r * r) < 0.05);
        assert!((circle - std::f64::consts::PI * r * r).abs() / (std::f64::consts::PI * r * r) < 0.02);
        // Regular star: 5 * R * r_inner * sin(36deg).
        let expect = 5.0 * r * r * STAR_INNER_RATIO * (36f64).to_radians().sin();
        assert!((star - expect).abs() / expect < 0.05, "{star} vs {expect}");
    }

    #[test]
    fn zero_shapes_is_identity() {
        let img = ImageBuffer::from_fn(30, 20, |x, y| [x as u8, y as u8, 1]);
        let ctx = SeedContext::new(1, "s", CorruptionKind::GeometricShapes, Severity::new(1).unwrap());
        assert_eq!(geometric_shapes_with(&img, 0, 6.0, 18.0, &ctx).unwrap(), img);
    }

    #[test]
    fn clipped_at_borders() {
        let s = Shape {
            kind: ShapeKind::Circle,
            cx: 0.0,
            cy: 0.0,
            radius: 10.0,
            color: [0; 3],
        };
        let mut pts = Vec::new();
        s.rasterize(5, 5, |x, y| pts.push((x, y)));
        assert_eq!(pts.len(), 25);
    }

    #[test]
    fn bad_radius_rejected() {
        let img = ImageBuffer::filled(4, 4, [0; 3]);
        let ctx = SeedContext::new(1, "s", CorruptionKind::GeometricShapes, Severity::new(1).unwrap());
        assert!(geometric_shapes_with(&img, 3, 0.0, 5.0, &ctx).is_err());
        assert!(geometric_shapes_with(&img, 3, 6.0, 5.0, &ctx).is_err());
    }
}
