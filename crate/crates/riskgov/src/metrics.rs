//! Safety and discrimination metrics computed over per-case evaluation
//! records: the logic-violation rate family, the trigger safety
//! decomposition, accuracy and confusion, macro AUC, multiclass
//! calibration error, and referral-policy simulation.
//!
//! Every metric reads nothing but `EvaluationRecord` fields, so the same
//! arithmetic applies to live pipeline output, replayed artifacts, and
//! synthetic fixtures alike.

use crate::domain::{DetectionSource, RiskTier};
use crate::governance::DecisionPath;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the class-score normalization invariant.
pub const SCORE_NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Calibration error uses ten equal-width, right-closed confidence bins
/// unless a caller chooses otherwise.
pub const DEFAULT_ECE_BINS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric denominator is empty: {0}")]
    EmptyDenominator(&'static str),
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("no class has both positive and negative examples")]
    NoScorableClass,
}

/// One scored case, the sole input type of every metric in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub case_id: String,
    pub oracle_label: RiskTier,
    pub predicted_label: RiskTier,
    pub predicted_confidence: f64,
    /// Per-tier scores indexed by `RiskTier::rank()`, summing to one.
    pub class_scores: [f64; 4],
    /// Ground truth: a deterministic rule should fire on this case.
    pub is_trigger: bool,
    /// Whether the pipeline actually exposed that rule.
    pub trigger_detected: bool,
    /// The label the rule mandates; present on every trigger case.
    pub rule_mandated_label: Option<RiskTier>,
    pub detection_source: DetectionSource,
    pub path: DecisionPath,
}

impl EvaluationRecord {
    /// Checks the structural invariants: a trigger case names its mandated
    /// label, and the class scores are a distribution.
    pub fn check(&self) -> Result<(), String> {
        if self.is_trigger && self.rule_mandated_label.is_none() {
            return Err(format!(
                "{}: trigger case without a rule-mandated label",
                self.case_id
            ));
        }
        let sum: f64 = self.class_scores.iter().sum();
        if (sum - 1.0).abs() > SCORE_NORMALIZATION_TOLERANCE {
            return Err(format!(
                "{}: class scores sum to {sum}, not 1",
                self.case_id
            ));
        }
        if self.class_scores.iter().any(|s| *s < 0.0) {
            return Err(format!("{}: negative class score", self.case_id));
        }
        Ok(())
    }
}

/// Expands a single-label confidence into the four-class score vector:
/// the predicted tier carries the confidence and the remainder is spread
/// evenly over the other three tiers.
pub fn class_scores(predicted: RiskTier, confidence: f64) -> [f64; 4] {
    let rest = (1.0 - confidence) / 3.0;
    let mut scores = [rest; 4];
    scores[predicted.rank() as usize] = confidence;
    scores
}

/// Whether this record counts as a logic violation: a trigger case whose
/// released label differs from the rule-mandated one. A trigger case
/// missing its mandate is counted as violating, never excused.
pub fn violates_mandate(r: &EvaluationRecord) -> bool {
    match r.rule_mandated_label {
        Some(mandated) => r.predicted_label != mandated,
        None => true,
    }
}

/// Logic-violation rate: the share of trigger cases released with a label
/// that contradicts the mandated one.
pub fn lvr(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    let triggers: Vec<&EvaluationRecord> = records.iter().filter(|r| r.is_trigger).collect();
    if triggers.is_empty() {
        return Err(MetricError::EmptyDenominator("no trigger cases"));
    }
    let violations = triggers.iter().filter(|r| violates_mandate(r)).count();
    Ok(violations as f64 / triggers.len() as f64)
}

/// Conditional logic-violation rate: violations among the trigger cases
/// the pipeline actually exposed, measuring the governance layer alone
/// with upstream recognition failures factored out.
pub fn c_lvr(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    let detected: Vec<&EvaluationRecord> = records
        .iter()
        .filter(|r| r.is_trigger && r.trigger_detected)
        .collect();
    if detected.is_empty() {
        return Err(MetricError::EmptyDenominator("no detected trigger cases"));
    }
    let violations = detected.iter().filter(|r| violates_mandate(r)).count();
    Ok(violations as f64 / detected.len() as f64)
}

/// End-to-end residual on trigger cases: the share released with a label
/// different from the oracle, counting upstream misses as failures even
/// when the governance layer behaved correctly given its inputs.
pub fn e2e_lvr(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    let triggers: Vec<&EvaluationRecord> = records.iter().filter(|r| r.is_trigger).collect();
    if triggers.is_empty() {
        return Err(MetricError::EmptyDenominator("no trigger cases"));
    }
    let wrong = triggers
        .iter()
        .filter(|r| r.predicted_label != r.oracle_label)
        .count();
    Ok(wrong as f64 / triggers.len() as f64)
}

/// The trigger-case safety ledger. Rate fields with an empty denominator
/// take their vacuous value: sensitivity and specificity 1.0, violation
/// rates 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyDecomposition {
    pub n_trigger: usize,
    pub n_detected: usize,
    pub n_missed: usize,
    /// Missed triggers whose final label was nonetheless correct.
    pub n_recovered_by_soft_path: usize,
    /// Trigger cases whose final label matches the oracle.
    pub n_final_correct: usize,
    /// Non-trigger cases where the pipeline claimed a trigger.
    pub n_false_triggers: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub governance_c_lvr: f64,
    pub e2e_lvr: f64,
}

pub fn safety_decomposition(records: &[EvaluationRecord]) -> SafetyDecomposition {
    let mut n_trigger = 0usize;
    let mut n_detected = 0usize;
    let mut n_recovered = 0usize;
    let mut n_final_correct = 0usize;
    let mut n_false_triggers = 0usize;
    let mut n_non_trigger = 0usize;
    let mut detected_violations = 0usize;
    for r in records {
        if r.is_trigger {
            n_trigger += 1;
            let correct = r.predicted_label == r.oracle_label;
            if correct {
                n_final_correct += 1;
            }
            if r.trigger_detected {
                n_detected += 1;
                if violates_mandate(r) {
                    detected_violations += 1;
                }
            } else if correct {
                n_recovered += 1;
            }
        } else {
            n_non_trigger += 1;
            if r.trigger_detected {
                n_false_triggers += 1;
            }
        }
    }
    let ratio = |num: usize, den: usize, vacuous: f64| {
        if den == 0 {
            vacuous
        } else {
            num as f64 / den as f64
        }
    };
    SafetyDecomposition {
        n_trigger,
        n_detected,
        n_missed: n_trigger - n_detected,
        n_recovered_by_soft_path: n_recovered,
        n_final_correct,
        n_false_triggers,
        sensitivity: ratio(n_detected, n_trigger, 1.0),
        specificity: ratio(n_non_trigger - n_false_triggers, n_non_trigger, 1.0),
        governance_c_lvr: ratio(detected_violations, n_detected, 0.0),
        e2e_lvr: ratio(n_trigger - n_final_correct, n_trigger, 0.0),
    }
}

pub fn accuracy(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let correct = records
        .iter()
        .filter(|r| r.predicted_label == r.oracle_label)
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// Four-by-four count matrix, rows indexed by oracle tier rank and
/// columns by predicted tier rank.
pub fn confusion(records: &[EvaluationRecord]) -> Result<[[usize; 4]; 4], MetricError> {
    if records.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut matrix = [[0usize; 4]; 4];
    for r in records {
        matrix[r.oracle_label.rank() as usize][r.predicted_label.rank() as usize] += 1;
    }
    Ok(matrix)
}

/// One-vs-rest AUC for a single tier via the rank-sum statistic with
/// midrank tie handling; `None` when the tier lacks positives or
/// negatives.
fn class_auc(records: &[EvaluationRecord], tier: RiskTier) -> Option<f64> {
    let idx = tier.rank() as usize;
    let mut scored: Vec<(f64, bool)> = records
        .iter()
        .map(|r| (r.class_scores[idx], r.oracle_label == tier))
        .collect();
    let n_pos = scored.iter().filter(|(_, p)| *p).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        // Tied scores at sorted positions i..j share the average of ranks
        // i+1 through j.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &scored[i..j] {
            if item.1 {
                positive_rank_sum += midrank;
            }
        }
        i = j;
    }
    let n_pos = n_pos as f64;
    Some((positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Unweighted mean of the one-vs-rest AUCs over every tier that has both
/// positive and negative examples. Tiers that are absent or universal are
/// excluded rather than letting a degenerate 0/0 pollute the mean.
pub fn macro_auc(records: &[EvaluationRecord]) -> Result<f64, MetricError> {
    let aucs: Vec<f64> = RiskTier::ALL
        .into_iter()
        .filter_map(|tier| class_auc(records, tier))
        .collect();
    if aucs.is_empty() {
        return Err(MetricError::NoScorableClass);
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Expected calibration error over the confidence of the predicted class
/// (the maximum class score). The unit interval is split into `bins`
/// equal-width right-closed bins, the lowest additionally including zero,
/// and the error is the bin-weight-averaged absolute gap between mean
/// confidence and accuracy.
pub fn ece(records: &[EvaluationRecord], bins: usize) -> f64 {
    assert!(bins >= 1, "calibration needs at least one bin");
    if records.is_empty() {
        return 0.0;
    }
    let mut bin_count = vec![0usize; bins];
    let mut bin_confidence = vec![0.0f64; bins];
    let mut bin_correct = vec![0usize; bins];
    for r in records {
        let confidence = r.class_scores.iter().fold(f64::NEG_INFINITY, |a, &s| a.max(s));
        let bin = if confidence <= 0.0 {
            0
        } else {
            (((confidence * bins as f64).ceil() as usize) - 1).min(bins - 1)
        };
        bin_count[bin] += 1;
        bin_confidence[bin] += confidence;
        if r.predicted_label == r.oracle_label {
            bin_correct[bin] += 1;
        }
    }
    let n = records.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        if bin_count[b] == 0 {
            continue;
        }
        let count = bin_count[b] as f64;
        let gap = bin_correct[b] as f64 / count - bin_confidence[b] / count;
        total += count / n * gap.abs();
    }
    total
}

/// Which cases an autonomy policy releases without human review.
/// Meaningful confidence thresholds lie in (0, 1]; enforcement belongs to
/// whoever constructs the policy from user input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferralPolicy {
    /// Release only cases whose subtype came from direct DNA assays.
    DnaDirectOnly,
    /// Release only cases at or above a confidence threshold.
    ConfidenceAtLeast(f64),
}

impl ReferralPolicy {
    fn releases(self, r: &EvaluationRecord) -> bool {
        match self {
            ReferralPolicy::DnaDirectOnly => r.detection_source == DetectionSource::DnaDirect,
            ReferralPolicy::ConfidenceAtLeast(threshold) => r.predicted_confidence >= threshold,
        }
    }
}

/// What a referral policy would have done on this record set. With
/// nothing released, accuracy-on-released is vacuously 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferralOutcome {
    pub coverage: f64,
    pub accuracy_on_released: f64,
    /// Errors the policy routed away from autonomous release.
    pub referred_error_count: usize,
    pub released: usize,
    pub total: usize,
}

pub fn referral_simulate(records: &[EvaluationRecord], policy: ReferralPolicy) -> ReferralOutcome {
    let mut released = 0usize;
    let mut released_correct = 0usize;
    let mut referred_errors = 0usize;
    for r in records {
        let correct = r.predicted_label == r.oracle_label;
        if policy.releases(r) {
            released += 1;
            if correct {
                released_correct += 1;
            }
        } else if !correct {
            referred_errors += 1;
        }
    }
    let total = records.len();
    ReferralOutcome {
        coverage: if total == 0 {
            0.0
        } else {
            released as f64 / total as f64
        },
        accuracy_on_released: if released == 0 {
            1.0
        } else {
            released_correct as f64 / released as f64
        },
        referred_error_count: referred_errors,
        released,
        total,
    }
}
