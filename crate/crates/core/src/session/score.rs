use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::plan::Block;

/// Response recorded when the window closes without a click.
pub const NO_RESPONSE: &str = "none";

/// Presentation constants, delivered to the client with every trial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub stimulus_ms: u32,
    pub response_ms: u32,
    /// How long before the response window closes the "make a choice" prompt appears.
    pub prompt_lead_ms: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            stimulus_ms: 2500,
            response_ms: 2000,
            prompt_lead_ms: 750,
        }
    }
}

/// A block earns `amount_per_block` when its accuracy is strictly above `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonusRule {
    pub threshold: f64,
    pub amount_per_block: f64,
}

impl Default for BonusRule {
    fn default() -> Self {
        BonusRule {
            threshold: 0.90,
            amount_per_block: 0.50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub participant_id: String,
    pub block: usize,
    pub trial: usize,
    pub stimulus_id: String,
    /// A superclass label or [`NO_RESPONSE`].
    pub response: String,
    #[serde(default)]
    pub response_time_ms: Option<u32>,
    /// Client timestamp of stimulus onset, milliseconds since the Unix epoch.
    #[serde(default)]
    pub presented_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub block: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub bonus_awarded: bool,
    pub bonus_amount: f64,
}

/// Scores a fully resolved block. "none" counts as incorrect.
pub fn score_block(block: &Block, results: &[TrialResult], rule: &BonusRule) -> Result<BlockScore> {
    let mut slots: Vec<Option<&TrialResult>> = vec![None; block.trials.len()];
    for r in results.iter().filter(|r| r.block == block.index) {
        let slot = slots
            .get_mut(r.trial)
            .ok_or_else(|| Error::Session(format!("trial {} outside block {}", r.trial, block.index)))?;
        *slot = Some(r);
    }
    let missing = slots.iter().filter(|s| s.is_none()).count();
    if missing > 0 || block.trials.is_empty() {
        return Err(Error::Session(format!("block {} has {missing} unresolved trials", block.index)));
    }
    let correct = slots
        .iter()
        .zip(&block.trials)
        .filter(|(r, t)| r.is_some_and(|r| r.response == t.superclass))
        .count();
    let total = block.trials.len();
    let accuracy = correct as f64 / total as f64;
    let bonus_awarded = accuracy > rule.threshold;
    Ok(BlockScore {
        block: block.index,
        correct,
        total,
        accuracy,
        bonus_awarded,
        bonus_amount: if bonus_awarded { rule.amount_per_block } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{BlockKind, Condition, Trial};

    fn block(n: usize) -> Block {
        Block {
            index: 4,
            kind: BlockKind::Main,
            distortion: None,
            trials: (0..n)
                .map(|i| Trial {
                    stimulus_id: format!("s{i}"),
                    image_id: format!("i{i}"),
                    superclass: "dog".into(),
                    condition: Condition::Clean,
                })
                .collect(),
        }
    }

    fn results(n: usize, correct: usize) -> Vec<TrialResult> {
        (0..n)
            .map(|i| TrialResult {
                participant_id: "p".into(),
                block: 4,
                trial: i,
                stimulus_id: format!("s{i}"),
                response: if i < correct { "dog".into() } else if i % 2 == 0 { "cat".into() } else { NO_RESPONSE.into() },
                response_time_ms: (i < correct).then_some(700),
                presented_at: None,
            })
            .collect()
    }

    #[test]
    fn bonus_threshold_is_strict() {
        let rule = BonusRule::default();
        let s = score_block(&block(60), &results(60, 55), &rule).unwrap();
        assert!(s.bonus_awarded && s.bonus_amount == 0.5);
        assert!((s.accuracy - 55.0 / 60.0).abs() < 1e-15);
        let s = score_block(&block(60), &results(60, 54), &rule).unwrap();
        assert_eq!(s.accuracy, 0.9);
        assert!(!s.bonus_awarded);
        assert_eq!(s.bonus_amount, 0.0);
        assert!(score_block(&block(60), &results(60, 60), &rule).unwrap().bonus_awarded);
    }

    #[test]
    fn incomplete_block_is_an_error() {
        let mut r = results(60, 60);
        r.pop();
        assert!(score_block(&block(60), &r, &BonusRule::default()).is_err());
    }

    #[test]
    fn default_timing() {
        let t = Timing::default();
        assert_eq!((t.stimulus_ms, t.response_ms, t.prompt_lead_ms), (2500, 2000, 750));
    }
}
