use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six corruption families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Mosaic,
    Glitched,
    VerticalLines,
    GeometricShapes,
    Stickers,
    #[serde(rename = "luminance")]
    LuminanceCheckerboard,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 6] = [
        CorruptionKind::Mosaic,
        CorruptionKind::Glitched,
        CorruptionKind::VerticalLines,
        CorruptionKind::GeometricShapes,
        CorruptionKind::Stickers,
        CorruptionKind::LuminanceCheckerboard,
    ];

    /// Lowercase token used on the command line, in paths and in logs.
    pub fn token(self) -> &'static str {
        match self {
            CorruptionKind::Mosaic => "mosaic",
            CorruptionKind::Glitched => "glitched",
            CorruptionKind::VerticalLines => "vertical_lines",
            CorruptionKind::GeometricShapes => "geometric_shapes",
            CorruptionKind::Stickers => "stickers",
            CorruptionKind::LuminanceCheckerboard => "luminance",
        }
    }

    /// Stable index used in the seed-context hash. Never reorder.
    pub fn code(self) -> u8 {
        match self {
            CorruptionKind::Mosaic => 0,
            CorruptionKind::Glitched => 1,
            CorruptionKind::VerticalLines => 2,
            CorruptionKind::GeometricShapes => 3,
            CorruptionKind::Stickers => 4,
            CorruptionKind::LuminanceCheckerboard => 5,
        }
    }

    /// Whether the corruption draws donor patches from a pool.
    pub fn needs_pool(self) -> bool {
        matches!(self, CorruptionKind::Mosaic | CorruptionKind::Stickers)
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Intensity level in `1..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(level: i64) -> Result<Self> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&level) {
            Ok(Severity(level as u8))
        } else {
            Err(Error::SeverityOutOfRange(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Severity> {
        (Self::MIN..=Self::MAX).map(Severity)
    }
}

impl TryFrom<i64> for Severity {
    type Error = Error;
    fn try_from(v: i64) -> Result<Self> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for k in CorruptionKind::ALL {
            assert_eq!(k.token().parse::<CorruptionKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.token()));
        }
        assert!("blur".parse::<CorruptionKind>().is_err());
    }

    #[test]
    fn severity_range() {
        assert!(Severity::new(0).is_err());
        assert!(Severity::new(6).is_err());
        assert_eq!(Severity::new(3).unwrap().level(), 3);
        assert_eq!(Severity::all().count(), 5);
        assert!(serde_json::from_str::<Severity>("7").is_err());
    }
}
