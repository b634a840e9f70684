use crate::error::{Error, Result};
use crate::imgcore::{CorruptionKind, ImageBuffer, SeedContext, SeedStream, Severity};
use crate::patchpool::PatchPool;

use super::{resolve_params, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StickerPlacement {
    pub patch: usize,
    pub x: u32,
    pub y: u32,
}

/// Per sticker: donor index uniform over the pool, then top-left corner
/// uniform over `[0, W - size] x [0, H - size]`.
pub fn sticker_placements(
    stream: &mut SeedStream,
    count: u32,
    pool_len: usize,
    width: u32,
    height: u32,
    size: u32,
) -> Result<Vec<StickerPlacement>> {
    if pool_len == 0 {
        return Err(Error::EmptyPool);
    }
    if width < size || height < size {
        return Err(Error::Precondition(format!(
            "{width}x{height} image is smaller than {size}px stickers"
        )));
    }
    Ok((0..count)
        .map(|_| {
            let patch = stream.below(pool_len as u64) as usize;
            let x = stream.below((width - size + 1) as u64) as u32;
            let y = stream.below((height - size + 1) as u64) as u32;
            StickerPlacement { patch, x, y }
        })
        .collect())
}

pub fn stickers(img: &ImageBuffer, severity: Severity, pool: &PatchPool, ctx: &SeedContext) -> Result<ImageBuffer> {
    match resolve_params(CorruptionKind::Stickers, severity) {
        Params::Stickers { count, patch_size } => stickers_with(img, count, patch_size, pool, ctx),
        _ => unreachable!(),
    }
}

pub fn stickers_with(
    img: &ImageBuffer,
    count: u32,
    patch_size: u32,
    pool: &PatchPool,
    ctx: &SeedContext,
) -> Result<ImageBuffer> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.patch_size() != (patch_size, patch_size) {
        let (pw, ph) = pool.patch_size();
        return Err(Error::DimensionMismatch(format!(
            "stickers need {patch_size}x{patch_size} patches, pool has {pw}x{ph}"
        )));
    }
    let placements = sticker_placements(&mut ctx.stream(), count, pool.len(), img.width(), img.height(), patch_size)?;
    let mut out = img.clone();
    for p in placements {
        out.blit(pool.patch(p.patch), p.x, p.y);
    }
    Ok(out)
}
