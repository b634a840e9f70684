use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

use super::log::ObservationLog;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Kappa {
    Value(f64),
    /// Expected agreement is 1 (both observers always right or always
    /// wrong), so the ratio is 0/0.
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

/// Trial-by-trial agreement of correctness, normalized against two
/// independent binomial observers with the same accuracies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorConsistency {
    pub shared_trials: usize,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    /// Observed fraction of trials where both are right or both are wrong.
    pub observed: f64,
    /// `acc_a * acc_b + (1 - acc_a) * (1 - acc_b)`.
    pub expected: f64,
    pub kappa: Kappa,
}

/// Error consistency over the `(image_id, corruption, severity)` trials both
/// logs contain. Accuracies are taken over the shared trials only.
pub fn error_consistency(a: &ObservationLog, b: &ObservationLog) -> Result<ErrorConsistency> {
    let b_by_trial: HashMap<_, bool> = b.records.iter().map(|r| (r.trial_key(), r.is_correct())).collect();
    let (mut n, mut correct_a, mut correct_b, mut agree) = (0usize, 0usize, 0usize, 0usize);
    for r in &a.records {
        if let Some(&cb) = b_by_trial.get(&r.trial_key()) {
            let ca = r.is_correct();
            n += 1;
            correct_a += ca as usize;
            correct_b += cb as usize;
            agree += (ca == cb) as usize;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} and {} share no trials",
            a.observer_id, b.observer_id
        )));
    }
    let nf = n as f64;
    let acc_a = correct_a as f64 / nf;
    let acc_b = correct_b as f64 / nf;
    let observed = agree as f64 / nf;
    let expected = acc_a * acc_b + (1.0 - acc_a) * (1.0 - acc_b);
    // Expected agreement reaches 1 only when both accuracies sit in {0, 1}.
    let degenerate = (correct_a == 0 || correct_a == n) && (correct_b == 0 || correct_b == n);
    let kappa = if degenerate {
        Kappa::Undefined
    } else {
        Kappa::Value(((observed - expected) / (1.0 - expected)).clamp(-1.0, 1.0))
    };
    Ok(ErrorConsistency {
        shared_trials: n,
        accuracy_a: acc_a,
        accuracy_b: acc_b,
        observed,
        expected,
        kappa,
    })
}
