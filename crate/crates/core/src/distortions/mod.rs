//! The six corruption procedures.
//!
//! Every procedure is a pure function of the input image, the resolved
//! parameters, the seed context and (for Mosaic and Stickers) a donor pool.

mod glitched;
mod luminance;
mod mosaic;
mod shapes;
mod stickers;
mod vertical_lines;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, ImageBuffer, SeedContext, Severity};
use crate::patchpool::PatchPool;

pub use glitched::{glitched, glitched_with, GlitchRegion, SCANLINE_KEEP_TENTHS};
pub use luminance::{luminance_checkerboard, luminance_checkerboard_with, luminance_deltas};
pub use mosaic::{mosaic, mosaic_with};
pub use shapes::{
    geometric_shapes, geometric_shapes_with, shape_layout, Shape, ShapeKind, STAR_INNER_RATIO,
};
pub use stickers::{sticker_placements, stickers, stickers_with, StickerPlacement};
pub use vertical_lines::{
    line_segments, vertical_lines, vertical_lines_with, LineSegment, BACKGROUND_GRAY, MAX_TILT_DEG,
};

/// Resolved per-level parameters. Custom values are allowed through the
/// `*_with` entry points; [`resolve_params`] returns the standard level table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Params {
    Mosaic {
        /// Tiles per side.
        grid: u32,
    },
    Glitched {
        /// Maximum region displacement as a percentage of image width.
        shift_percent: u32,
        regions: u32,
        /// Maximum per-channel offset in pixels.
        offset_px: u32,
    },
    VerticalLines {
        sections: u32,
        y_step: u32,
    },
    GeometricShapes {
        count: u32,
        radius_min: f64,
        radius_max: f64,
    },
    Stickers {
        count: u32,
        patch_size: u32,
    },
    Luminance {
        grid: u32,
        min_delta: u32,
        max_delta: u32,
    },
}

impl Params {
    pub fn kind(&self) -> CorruptionKind {
        match self {
            Params::Mosaic { .. } => CorruptionKind::Mosaic,
            Params::Glitched { .. } => CorruptionKind::Glitched,
            Params::VerticalLines { .. } => CorruptionKind::VerticalLines,
            Params::GeometricShapes { .. } => CorruptionKind::GeometricShapes,
            Params::Stickers { .. } => CorruptionKind::Stickers,
            Params::Luminance { .. } => CorruptionKind::LuminanceCheckerboard,
        }
    }
}

pub const SHAPE_RADIUS_MIN: f64 = 6.0;
pub const SHAPE_RADIUS_MAX: f64 = 18.0;
pub const LUMINANCE_GRID: u32 = 14;

const MOSAIC_GRID: [u32; 5] = [4, 6, 8, 16, 28];
const GLITCH_SHIFT_PERCENT: [u32; 5] = [8, 32, 50, 128, 200];
const GLITCH_REGIONS: [u32; 5] = [4, 8, 10, 16, 20];
const GLITCH_OFFSET_PX: [u32; 5] = [4, 8, 10, 16, 20];
const VERTICAL_SECTIONS: [u32; 5] = [224, 178, 112, 84, 60];
const VERTICAL_Y_STEP: [u32; 5] = [1, 2, 4, 6, 8];
const SHAPE_COUNT: [u32; 5] = [150, 300, 600, 800, 1000];
const STICKER_COUNT: [u32; 5] = [100, 200, 400, 600, 1200];
const LUMINANCE_RANGE: [(u32, u32); 5] = [(50, 50), (50, 100), (100, 125), (125, 150), (150, 255)];

/// Table row for `(kind, severity)`.
pub fn resolve_params(kind: CorruptionKind, severity: Severity) -> Params {
    let i = severity.level() as usize - 1;
    match kind {
        CorruptionKind::Mosaic => Params::Mosaic { grid: MOSAIC_GRID[i] },
        CorruptionKind::Glitched => Params::Glitched {
            shift_percent: GLITCH_SHIFT_PERCENT[i],
            regions: GLITCH_REGIONS[i],
            offset_px: GLITCH_OFFSET_PX[i],
        },
        CorruptionKind::VerticalLines => Params::VerticalLines {
            sections: VERTICAL_SECTIONS[i],
            y_step: VERTICAL_Y_STEP[i],
        },
        CorruptionKind::GeometricShapes => Params::GeometricShapes {
            count: SHAPE_COUNT[i],
            radius_min: SHAPE_RADIUS_MIN,
            radius_max: SHAPE_RADIUS_MAX,
        },
        CorruptionKind::Stickers => Params::Stickers {
            count: STICKER_COUNT[i],
            patch_size: crate::patchpool::STICKER_PATCH_SIZE,
        },
        CorruptionKind::LuminanceCheckerboard => {
            let (min_delta, max_delta) = LUMINANCE_RANGE[i];
            Params::Luminance {
                grid: LUMINANCE_GRID,
                min_delta,
                max_delta,
            }
        }
    }
}

/// Same as [`resolve_params`] but takes a raw level.
pub fn resolve_params_level(kind: CorruptionKind, level: i64) -> Result<Params> {
    Ok(resolve_params(kind, Severity::new(level)?))
}

/// A corruption kind at a level together with its resolved parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub params: Params,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: Severity) -> Self {
        CorruptionSpec {
            kind,
            severity,
            params: resolve_params(kind, severity),
        }
    }

    /// Overrides the table parameters. The parameter variant must match `kind`.
    pub fn with_params(kind: CorruptionKind, severity: Severity, params: Params) -> Result<Self> {
        if params.kind() != kind {
            return Err(Error::InvalidArgument(format!(
                "{} parameters given for {kind}",
                params.kind()
            )));
        }
        Ok(CorruptionSpec {
            kind,
            severity,
            params,
        })
    }
}

/// Applies `spec` using randomness from `ctx`. `pool` is required for
/// Mosaic and Stickers and ignored otherwise.
pub fn apply(
    img: &ImageBuffer,
    spec: &CorruptionSpec,
    ctx: &SeedContext,
    pool: Option<&PatchPool>,
) -> Result<ImageBuffer> {
    let need_pool = || pool.ok_or(Error::EmptyPool);
    match &spec.params {
        Params::Mosaic { grid } => mosaic_with(img, *grid, need_pool()?),
        Params::Glitched {
            shift_percent,
            regions,
            offset_px,
        } => Ok(glitched_with(img, *shift_percent, *regions, *offset_px, ctx)),
        Params::VerticalLines { sections, y_step } => vertical_lines_with(img, *sections, *y_step),
        Params::GeometricShapes {
            count,
            radius_min,
            radius_max,
        } => geometric_shapes_with(img, *count, *radius_min, *radius_max, ctx),
        Params::Stickers { count, patch_size } => {
            stickers_with(img, *count, *patch_size, need_pool()?, ctx)
        }
        Params::Luminance {
            grid,
            min_delta,
            max_delta,
        } => luminance_checkerboard_with(img, *grid, *min_delta, *max_delta, ctx).map(|(o, _)| o),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sev(l: i64) -> Severity {
        Severity::new(l).unwrap()
    }

    #[test]
    fn table_spot_checks() {
        assert_eq!(resolve_params(CorruptionKind::Mosaic, sev(5)), Params::Mosaic { grid: 28 });
        assert_eq!(
            resolve_params(CorruptionKind::Glitched, sev(1)),
            Params::Glitched {
                shift_percent: 8,
                regions: 4,
                offset_px: 4
            }
        );
        assert_eq!(
            resolve_params(CorruptionKind::Stickers, sev(5)),
            Params::Stickers {
                count: 1200,
                patch_size: 16
            }
        );
        assert!(resolve_params_level(CorruptionKind::Mosaic, 0).is_err());
        assert!(resolve_params_level(CorruptionKind::Mosaic, 6).is_err());
    }

    #[test]
    fn mismatched_params_rejected() {
        let p = Params::Mosaic { grid: 3 };
        assert!(CorruptionSpec::with_params(CorruptionKind::Stickers, sev(1), p.clone()).is_err());
        assert!(CorruptionSpec::with_params(CorruptionKind::Mosaic, sev(1), p).is_ok());
    }

    #[test]
    fn pool_kinds_need_a_pool() {
        let img = ImageBuffer::filled(32, 32, [1, 2, 3]);
        for kind in [CorruptionKind::Mosaic, CorruptionKind::Stickers] {
            let spec = CorruptionSpec::new(kind, sev(1));
            let ctx = SeedContext::new(0, "a", kind, sev(1));
            assert!(matches!(apply(&img, &spec, &ctx, None), Err(Error::EmptyPool)));
        }
    }
}
