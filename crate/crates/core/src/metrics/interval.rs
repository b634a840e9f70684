use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Wilson score interval for a binomial proportion at confidence `level`.
pub fn wilson_interval(correct: u64, total: u64, level: f64) -> Result<(f64, f64)> {
    if total == 0 {
        return Err(Error::InvalidArgument("confidence interval over zero trials".into()));
    }
    if correct > total {
        return Err(Error::InvalidArgument(format!("{correct} correct out of {total}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level}")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if correct == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if correct == total { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}
