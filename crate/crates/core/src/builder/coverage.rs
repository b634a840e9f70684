use rayon::prelude::*;
use serde::Serialize;

use crate::distortions::{resolve_params, shape_layout, sticker_placements, Params};
use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, ImageBuffer, SeedContext, Severity};
use crate::patchpool::DEFAULT_POOL_SIZE;

/// Pixels the coverage ratio is measured over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    count: usize,
}

impl CoverageMask {
    pub fn full(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        CoverageMask {
            width,
            height,
            bits: vec![true; n],
            count: n,
        }
    }

    /// Any pixel with a nonzero channel belongs to the mask.
    pub fn from_image(img: &ImageBuffer) -> Result<Self> {
        let bits: Vec<bool> = img.as_raw().chunks_exact(3).map(|p| p.iter().any(|&v| v > 0)).collect();
        let count = bits.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::InvalidArgument("coverage mask selects no pixels".into()));
        }
        Ok(CoverageMask {
            width: img.width(),
            height: img.height(),
            bits,
            count,
        })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageEstimate {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub trials: usize,
    /// Mean fraction of mask pixels overwritten at least once.
    pub mean: f64,
    pub std_error: f64,
}

fn covered_fraction(kind: CorruptionKind, severity: Severity, ctx: &SeedContext, mask: &CoverageMask) -> Result<f64> {
    let (w, h) = mask.dimensions();
    let mut hit = vec![false; mask.bits.len()];
    let mut stream = ctx.stream();
    match resolve_params(kind, severity) {
        Params::Stickers { count, patch_size } => {
            for p in sticker_placements(&mut stream, count, DEFAULT_POOL_SIZE, w, h, patch_size)? {
                for y in p.y..p.y + patch_size {
                    let row = y as usize * w as usize;
                    hit[row + p.x as usize..row + (p.x + patch_size) as usize].fill(true);
                }
            }
        }
        Params::GeometricShapes {
            count,
            radius_min,
            radius_max,
        } => {
            for s in shape_layout(&mut stream, count, w, h, radius_min, radius_max) {
                s.rasterize(w, h, |x, y| hit[y as usize * w as usize + x as usize] = true);
            }
        }
        _ => unreachable!("checked by caller"),
    }
    let covered = hit.iter().zip(&mask.bits).filter(|(h, m)| **h && **m).count();
    Ok(covered as f64 / mask.count as f64)
}

/// Monte Carlo estimate of overlay coverage for Stickers and
/// GeometricShapes cells, using the same layout generators and stream
/// derivation as the corruptions themselves. Trial `t` uses image id
/// `coverage-<t>` under `seed`.
pub fn coverage_report(
    cells: &[(CorruptionKind, Severity)],
    trials: usize,
    seed: u64,
    mask: &CoverageMask,
) -> Result<Vec<CoverageEstimate>> {
    if trials < 1 {
        return Err(Error::InvalidArgument("coverage needs at least one trial".into()));
    }
    if mask.is_empty() {
        return Err(Error::InvalidArgument("coverage mask selects no pixels".into()));
    }
    cells
        .iter()
        .map(|&(kind, severity)| {
            if !matches!(kind, CorruptionKind::Stickers | CorruptionKind::GeometricShapes) {
                return Err(Error::InvalidArgument(format!("coverage is not defined for {kind}")));
            }
            let fractions = (0..trials)
                .into_par_iter()
                .map(|t| covered_fraction(kind, severity, &SeedContext::new(seed, format!("coverage-{t}"), kind, severity), mask))
                .collect::<Result<Vec<f64>>>()?;
            let mean = fractions.iter().sum::<f64>() / trials as f64;
            let std_error = if trials > 1 {
                let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
                (var / trials as f64).sqrt()
            } else {
                0.0
            };
            Ok(CoverageEstimate {
                kind,
                severity,
                trials,
                mean,
                std_error,
            })
        })
        .collect()
}
