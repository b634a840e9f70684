use crate::error::{Error, Result};

/// Kendall's tau-b over paired scores, counting concordant and discordant
/// pairs with the standard correction for ties in either variable.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} scores", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired scores".into()));
    }
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).ok_or_else(|| Error::InvalidArgument("NaN score".into()))?;
            let dy = (y[i] - y[j]).partial_cmp(&0.0).ok_or_else(|| Error::InvalidArgument("NaN score".into()))?;
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + ties_x) * (concordant + discordant + ties_y)) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("tau-b undefined: a variable is constant".into()));
    }
    Ok((concordant - discordant) as f64 / denom)
}
