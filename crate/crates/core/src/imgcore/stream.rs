//! Portable counter-based random streams.
//!
//! Layout (also documented in `docs/random-stream.md`):
//!
//! * context key: FNV-1a-64 over `global_seed` (8 bytes LE), corruption code
//!   (1 byte), severity (1 byte), `image_id` byte length (4 bytes LE) and the
//!   UTF-8 bytes of `image_id`; the hash is then passed through [`split_mix`].
//! * draw `i` (zero-based): `split_mix(key + (i + 1) * 0x9E3779B97F4A7C15)`,
//!   all arithmetic wrapping mod 2^64. This is SplitMix64 seeded with `key`.

use super::kind::{CorruptionKind, Severity};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_extend(FNV_OFFSET, bytes)
}

fn fnv1a64_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 output finalizer.
#[inline]
pub fn split_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything a corruption's randomness may depend on.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedContext {
    pub global_seed: u64,
    pub image_id: String,
    pub kind: CorruptionKind,
    pub severity: Severity,
}

impl SeedContext {
    pub fn new(
        global_seed: u64,
        image_id: impl Into<String>,
        kind: CorruptionKind,
        severity: Severity,
    ) -> Self {
        SeedContext {
            global_seed,
            image_id: image_id.into(),
            kind,
            severity,
        }
    }

    /// The 64-bit key the stream is derived from.
    pub fn stream_seed(&self) -> u64 {
        let mut h = fnv1a64_extend(FNV_OFFSET, &self.global_seed.to_le_bytes());
        h = fnv1a64_extend(h, &[self.kind.code(), self.severity.level()]);
        h = fnv1a64_extend(h, &(self.image_id.len() as u32).to_le_bytes());
        h = fnv1a64_extend(h, self.image_id.as_bytes());
        split_mix(h)
    }

    pub fn stream(&self) -> SeedStream {
        SeedStream::from_key(self.stream_seed())
    }
}

/// Counter-based stream; draw `i` depends only on the key and `i`.
#[derive(Clone, Debug)]
pub struct SeedStream {
    key: u64,
    counter: u64,
}

impl SeedStream {
    pub fn from_key(key: u64) -> Self {
        SeedStream { key, counter: 0 }
    }

    /// Stream for non-corruption randomness (pool sampling, session planning,
    /// subset selection): key = `split_mix(fnv1a64(seed LE || purpose))`.
    pub fn for_purpose(seed: u64, purpose: &str) -> Self {
        let h = fnv1a64_extend(fnv1a64(&seed.to_le_bytes()), purpose.as_bytes());
        SeedStream::from_key(split_mix(h))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        split_mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one draw.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)` via the multiply-high reduction `(draw * n) >> 64`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        let span = (hi as i128 - lo as i128 + 1) as u64;
        lo + self.below(span) as i64
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Fisher–Yates shuffle driven by [`SeedStream::below`], last index first.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
