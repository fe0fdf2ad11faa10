//! Tier-2 governance: hard-path arbitration, the soft-path table mapping,
//! pluggable grey-zone resolution, the validator, and audit emission.
//!
//! The flow for one case is fixed. If any hard rule matches, its arbitrated
//! winner dictates the label at confidence 1.0 and no resolver ever runs.
//! Otherwise the soft table mapping proposes a label; when its confidence
//! falls below the grey-zone threshold the resolver is consulted, and any
//! resolver failure degrades back to the table proposal so the pipeline
//! always completes. The validator then re-derives the expected label from
//! rules and evidence alone and accepts, corrects, or rejects the proposal.
//! Every governed case emits exactly one audit record; the post-hoc wrapper
//! baseline emits none, which is its tested weakness.

use crate::domain::{
    assert_schema, congruence_violations, DetectionSource, PatientEvidence, RiskTier,
};
use crate::kg::EvidencePacket;
use crate::ruleset::{ExecutableRule, RuleOutcome, RulePath, RuleSet, TriggerCondition};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;
use thiserror::Error;

/// Grey-zone threshold: proposals below this confidence go to the resolver.
/// Table-mapped labels (0.75) stay deterministic; default-rule placeholders
/// (0.5) are referred.
pub const DEFAULT_TAU: f64 = 0.6;
/// Confidence of a soft label mapped from a concrete matched rule.
pub const TABLE2_CONFIDENCE: f64 = 0.75;
/// Confidence of the conservative placeholder when only the default rule
/// matched; deliberately below `DEFAULT_TAU`.
pub const PLACEHOLDER_CONFIDENCE: f64 = 0.5;
/// The placeholder label proposed when no concrete rule matched.
pub const PLACEHOLDER_LABEL: RiskTier = RiskTier::Intermediate;
/// Ceiling on resolver-reported confidence. Certainty is reserved for
/// rule-mandated labels, so confidence 1.0 identifies the hard path
/// exactly, which referral policies rely on.
pub const MAX_RESOLVER_CONFIDENCE: f64 = 0.95;
/// Environment variable naming the external resolver's `host:port`.
pub const RESOLVER_ENDPOINT_ENV: &str = "RISKGOV_RESOLVER_ENDPOINT";

// ---------------------------------------------------------------------------
// Decisions and audit records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    /// A deterministic rule dictated the label.
    Hard,
    /// The soft table mapping supplied the label without resolver help.
    SoftTable2,
    /// A grey-zone resolver supplied the label.
    SoftChair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: String,
    pub detail: String,
}

fn step(stage: &str, detail: impl Into<String>) -> TraceStep {
    TraceStep {
        stage: stage.to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: RiskTier,
    pub confidence: f64,
    pub path: DecisionPath,
    pub winning_rule: String,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorVerdict {
    Accepted,
    Corrected,
    Rejected,
}

/// The validator's independent view of one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatorReport {
    /// Label re-derived from rules and evidence alone, never copied from
    /// the proposal.
    pub expected_label: RiskTier,
    pub proposal_label: RiskTier,
    pub verdict: ValidatorVerdict,
    pub reason: String,
}

/// One line of the audit file. Every field is always populated and the
/// serialized field order is the declaration order, so audit files are
/// byte-stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub case_id: String,
    pub matched_rule_ids: Vec<String>,
    pub decision_path: DecisionPath,
    pub detection_source: DetectionSource,
    pub provenance_chunk_ids: Vec<String>,
    pub validator_verdict: ValidatorVerdict,
    pub validator_message: String,
    pub pre_validation_label: RiskTier,
    pub final_label: RiskTier,
    pub final_confidence: f64,
    /// Why the resolver's answer was not used, when it was consulted and
    /// failed; null on clean paths.
    pub resolver_failure: Option<String>,
    pub ruleset_version: String,
    pub ruleset_hash: String,
}

// ---------------------------------------------------------------------------
// Grey-zone resolvers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolverProposal {
    pub label: RiskTier,
    pub confidence: f64,
    pub reasoning: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ResolverFailure {
    #[error("resolver disabled: {0}")]
    Disabled(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed resolver response: {0}")]
    Malformed(String),
}

/// A grey-zone adjudicator. Implementations must be pure with respect to
/// their inputs: same evidence, packet, and trace must yield the same
/// proposal, and inputs are never mutated.
pub trait GreyZoneResolver {
    fn name(&self) -> &'static str;

    fn resolve(
        &self,
        ev: &PatientEvidence,
        packet: &EvidencePacket,
        trace: &[TraceStep],
    ) -> Result<ResolverProposal, ResolverFailure>;
}

/// Echoes the soft table mapping: the conservative do-nothing resolver.
pub struct DeterministicTable2Echo {
    rs: RuleSet,
}

impl DeterministicTable2Echo {
    pub fn new(rs: RuleSet) -> Self {
        DeterministicTable2Echo { rs }
    }
}

impl GreyZoneResolver for DeterministicTable2Echo {
    fn name(&self) -> &'static str {
        "table2"
    }

    fn resolve(
        &self,
        ev: &PatientEvidence,
        _packet: &EvidencePacket,
        _trace: &[TraceStep],
    ) -> Result<ResolverProposal, ResolverFailure> {
        let soft: Vec<&ExecutableRule> = self
            .rs
            .match_rules(ev)
            .into_iter()
            .filter(|r| r.path == RulePath::Soft)
            .collect();
        let mapping = map_table2(&soft);
        Ok(ResolverProposal {
            label: mapping.label,
            confidence: mapping.confidence,
            reasoning: vec![format!("echo of table mapping via {}", mapping.rule_id)],
        })
    }
}

/// Weight of one evidence feature toward one tier.
struct FeatureWeight {
    feature: &'static str,
    applies: fn(&PatientEvidence) -> bool,
    tier: RiskTier,
    weight: f64,
}

/// The fixed feature table of the linear resolver. Weights are coarse
/// clinical direction, not fitted values: escalating findings point at the
/// upper tiers, indolent findings at the lower ones.
const LINEAR_WEIGHTS: &[FeatureWeight] = &[
    FeatureWeight {
        feature: "POLEmut subtype",
        applies: |ev| ev.subtype == Some(crate::domain::MolecularSubtype::PoleMut),
        tier: RiskTier::Low,
        weight: 3.0,
    },
    FeatureWeight {
        feature: "NSMP at stage IA",
        applies: |ev| {
            ev.subtype == Some(crate::domain::MolecularSubtype::Nsmp)
                && ev.stage_code() == Some(crate::domain::StageCode::Ia)
        },
        tier: RiskTier::Low,
        weight: 1.5,
    },
    FeatureWeight {
        feature: "stage IB",
        applies: |ev| ev.stage_code() == Some(crate::domain::StageCode::Ib),
        tier: RiskTier::Intermediate,
        weight: 1.0,
    },
    FeatureWeight {
        feature: "superficial invasion",
        applies: |ev| ev.myometrial_invasion == crate::domain::MyoInvasion::Superficial,
        tier: RiskTier::Intermediate,
        weight: 0.5,
    },
    FeatureWeight {
        feature: "MMRd subtype",
        applies: |ev| ev.subtype == Some(crate::domain::MolecularSubtype::Mmrd),
        tier: RiskTier::HighIntermediate,
        weight: 1.5,
    },
    FeatureWeight {
        feature: "stage II",
        applies: |ev| ev.stage_code() == Some(crate::domain::StageCode::Ii),
        tier: RiskTier::HighIntermediate,
        weight: 1.0,
    },
    FeatureWeight {
        feature: "positive LVSI",
        applies: |ev| ev.lvsi == crate::domain::Lvsi::Positive,
        tier: RiskTier::HighIntermediate,
        weight: 1.0,
    },
    FeatureWeight {
        feature: "deep invasion",
        applies: |ev| ev.myometrial_invasion == crate::domain::MyoInvasion::Deep,
        tier: RiskTier::HighIntermediate,
        weight: 1.0,
    },
    FeatureWeight {
        feature: "p53abn subtype",
        applies: |ev| ev.subtype == Some(crate::domain::MolecularSubtype::P53Abn),
        tier: RiskTier::High,
        weight: 2.5,
    },
    FeatureWeight {
        feature: "stage III or beyond",
        applies: |ev| {
            ev.stage_code()
                .map(|c| c.rank() >= crate::domain::StageCode::Iii.rank())
                .unwrap_or(false)
        },
        tier: RiskTier::High,
        weight: 3.0,
    },
    FeatureWeight {
        feature: "aggressive histology",
        applies: |ev| {
            matches!(
                ev.histology,
                Some(crate::domain::Histology::Serous)
                    | Some(crate::domain::Histology::ClearCell)
                    | Some(crate::domain::Histology::Undifferentiated)
            )
        },
        tier: RiskTier::High,
        weight: 2.0,
    },
    FeatureWeight {
        feature: "grade 3",
        applies: |ev| ev.grade == crate::domain::Grade::G3,
        tier: RiskTier::High,
        weight: 1.0,
    },
];

/// Scores each tier as a fixed-weight sum over one-hot evidence features
/// and proposes the argmax. Confidence is the winning share of the total
/// score. Score ties resolve to the higher tier, consistent with the
/// engine's conservative bias.
pub struct LinearScorer;

impl GreyZoneResolver for LinearScorer {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn resolve(
        &self,
        ev: &PatientEvidence,
        _packet: &EvidencePacket,
        _trace: &[TraceStep],
    ) -> Result<ResolverProposal, ResolverFailure> {
        let mut scores = [0.0f64; 4];
        let mut reasoning = Vec::new();
        for fw in LINEAR_WEIGHTS {
            if (fw.applies)(ev) {
                scores[fw.tier.rank() as usize] += fw.weight;
                reasoning.push(format!("{} adds {} toward {}", fw.feature, fw.weight, fw.tier));
            }
        }
        let total: f64 = scores.iter().sum();
        if total == 0.0 {
            // Nothing fired: fall back to the conservative placeholder.
            return Ok(ResolverProposal {
                label: PLACEHOLDER_LABEL,
                confidence: PLACEHOLDER_CONFIDENCE,
                reasoning: vec!["no feature fired; conservative placeholder".to_string()],
            });
        }
        let mut best = RiskTier::Low;
        for tier in RiskTier::ALL {
            if scores[tier.rank() as usize] >= scores[best.rank() as usize] {
                best = tier;
            }
        }
        reasoning.push(format!(
            "scores low={} intermediate={} high-intermediate={} high={}",
            scores[0], scores[1], scores[2], scores[3]
        ));
        Ok(ResolverProposal {
            label: best,
            confidence: scores[best.rank() as usize] / total,
            reasoning,
        })
    }
}

#[derive(Debug, Serialize)]
struct ExternalRequest<'a> {
    evidence: &'a PatientEvidence,
    packet: &'a EvidencePacket,
    trace: &'a [TraceStep],
}

#[derive(Debug, Deserialize)]
struct ExternalResponse {
    label: RiskTier,
    confidence: f64,
    #[serde(default)]
    reasoning: Vec<String>,
}

/// Bridges to an out-of-process adjudicator over a one-line JSON exchange
/// on a TCP connection: the engine writes one request line and reads one
/// response line. Disabled unless an endpoint is configured, and any
/// transport or format problem is a failure the caller degrades from;
/// the external backend can stall a case but never wedge the pipeline.
pub struct ExternalAdapter {
    endpoint: Option<String>,
    timeout: Duration,
}

impl ExternalAdapter {
    /// Reads the endpoint from `RISKGOV_RESOLVER_ENDPOINT`; unset means
    /// the adapter is present but disabled.
    pub fn from_env() -> Self {
        ExternalAdapter {
            endpoint: std::env::var(RESOLVER_ENDPOINT_ENV).ok(),
            timeout: Duration::from_secs(2),
        }
    }

    pub fn new(endpoint: impl Into<String>) -> Self {
        ExternalAdapter {
            endpoint: Some(endpoint.into()),
            timeout: Duration::from_secs(2),
        }
    }
}

impl GreyZoneResolver for ExternalAdapter {
    fn name(&self) -> &'static str {
        "external"
    }

    fn resolve(
        &self,
        ev: &PatientEvidence,
        packet: &EvidencePacket,
        trace: &[TraceStep],
    ) -> Result<ResolverProposal, ResolverFailure> {
        let endpoint = self.endpoint.as_ref().ok_or_else(|| {
            ResolverFailure::Disabled(format!("{RESOLVER_ENDPOINT_ENV} is not set"))
        })?;
        let mut stream = TcpStream::connect(endpoint)
            .map_err(|e| ResolverFailure::Transport(format!("connect {endpoint}: {e}")))?;
        stream
            .set_read_timeout(Some(self.timeout))
            .and_then(|_| stream.set_write_timeout(Some(self.timeout)))
            .map_err(|e| ResolverFailure::Transport(e.to_string()))?;

        let request = ExternalRequest {
            evidence: ev,
            packet,
            trace,
        };
        let mut line = serde_json::to_string(&request)
            .map_err(|e| ResolverFailure::Malformed(format!("request encoding: {e}")))?;
        line.push('\n');
        stream
            .write_all(line.as_bytes())
            .map_err(|e| ResolverFailure::Transport(format!("send: {e}")))?;

        let mut response_line = String::new();
        BufReader::new(&stream)
            .read_line(&mut response_line)
            .map_err(|e| ResolverFailure::Transport(format!("receive: {e}")))?;
        if response_line.trim().is_empty() {
            return Err(ResolverFailure::Transport(
                "connection closed without a response".to_string(),
            ));
        }
        let response: ExternalResponse = serde_json::from_str(response_line.trim())
            .map_err(|e| ResolverFailure::Malformed(e.to_string()))?;
        if !(0.0..=1.0).contains(&response.confidence) {
            return Err(ResolverFailure::Malformed(format!(
                "confidence {} outside [0, 1]",
                response.confidence
            )));
        }
        Ok(ResolverProposal {
            label: response.label,
            confidence: response.confidence,
            reasoning: response.reasoning,
        })
    }
}

// ---------------------------------------------------------------------------
// Soft-path table mapping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Mapping {
    pub label: RiskTier,
    pub confidence: f64,
    pub rule_id: String,
    /// True when only the default rule matched and the label is the
    /// conservative placeholder rather than a concrete mapping.
    pub placeholder: bool,
}

fn is_default_rule(rule: &ExecutableRule) -> bool {
    matches!(rule.trigger, TriggerCondition::IfNoHardMatch(_))
}

/// Maps matched soft rules to a proposal. Concrete soft rules arbitrate
/// among themselves (equal priority, conservative fallback) and carry
/// confidence 0.75. When only the default rule matched, the proposal is
/// the placeholder tier at confidence 0.5, which forces resolver
/// consultation at the default threshold.
pub fn map_table2(matched_soft: &[&ExecutableRule]) -> Table2Mapping {
    assert!(
        !matched_soft.is_empty(),
        "a completeness-checked ruleset always matches at least the default rule"
    );
    let concrete: Vec<&ExecutableRule> = matched_soft
        .iter()
        .copied()
        .filter(|r| !is_default_rule(r))
        .collect();
    if concrete.is_empty() {
        let default_rule = matched_soft
            .iter()
            .find(|r| is_default_rule(r))
            .expect("the matched soft set without concrete rules holds the default rule");
        return Table2Mapping {
            label: PLACEHOLDER_LABEL,
            confidence: PLACEHOLDER_CONFIDENCE,
            rule_id: default_rule.id.clone(),
            placeholder: true,
        };
    }
    let result = crate::ruleset::resolve_priority(&concrete);
    match result.outcome {
        RuleOutcome::Tier(label) => Table2Mapping {
            label,
            confidence: TABLE2_CONFIDENCE,
            rule_id: result.winner,
            placeholder: false,
        },
        // A concrete soft rule may still route to the chair; treat it as
        // the placeholder so the resolver is consulted.
        RuleOutcome::ChairReferral => Table2Mapping {
            label: PLACEHOLDER_LABEL,
            confidence: PLACEHOLDER_CONFIDENCE,
            rule_id: result.winner,
            placeholder: true,
        },
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Expected {
    label: RiskTier,
    path: DecisionPath,
    rule_id: String,
    confidence: f64,
    hard: bool,
}

/// The label the rules alone mandate for this evidence.
fn expected_decision(ev: &PatientEvidence, rs: &RuleSet) -> Expected {
    if let Some(result) = rs.arbitrate_hard(ev) {
        let label = result
            .outcome
            .tier()
            .expect("hard rules carry concrete tier outcomes");
        return Expected {
            label,
            path: DecisionPath::Hard,
            rule_id: result.winner,
            confidence: 1.0,
            hard: true,
        };
    }
    let soft: Vec<&ExecutableRule> = rs
        .match_rules(ev)
        .into_iter()
        .filter(|r| r.path == RulePath::Soft)
        .collect();
    let mapping = map_table2(&soft);
    Expected {
        label: mapping.label,
        path: DecisionPath::SoftTable2,
        rule_id: mapping.rule_id,
        confidence: mapping.confidence,
        hard: false,
    }
}

/// The label the rules alone mandate for this evidence: the hard winner
/// when a deterministic rule fires, the soft table mapping otherwise.
/// This is both the validator's expectation and the cohort generator's
/// oracle, which is exactly the self-consistency the engine is built
/// around.
pub fn guideline_label(ev: &PatientEvidence, rs: &RuleSet) -> RiskTier {
    expected_decision(ev, rs).label
}

/// Re-derives the guideline-expected label and passes judgment on the
/// proposal.
///
/// Rejection fires on structurally untrustworthy evidence: schema
/// violations (mandatory fields absent, confidence out of range) and
/// internally contradictory findings. A rejected case keeps its proposal
/// label in the record but must be routed to a human, never released.
///
/// Correction fires when a deterministic or table-mapped proposal
/// disagrees with the recomputed expectation, or when a resolver proposal
/// strays more than one tier from it; the corrected decision is rebuilt
/// from the expectation, so re-validating a validated decision never
/// changes the label again.
pub fn validate(
    proposal: &Decision,
    ev: &PatientEvidence,
    rs: &RuleSet,
) -> (Decision, ValidatorReport) {
    let expected = expected_decision(ev, rs);

    if let Err(violations) = assert_schema(ev) {
        let listed: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        let reason = format!("schema violation: {}", listed.join("; "));
        let mut decision = proposal.clone();
        decision.trace.push(step("validate", reason.clone()));
        return (
            decision,
            ValidatorReport {
                expected_label: expected.label,
                proposal_label: proposal.label,
                verdict: ValidatorVerdict::Rejected,
                reason,
            },
        );
    }
    let contradictions = congruence_violations(ev);
    if !contradictions.is_empty() {
        let reason = format!(
            "evidence is internally contradictory: {}",
            contradictions.join("; ")
        );
        let mut decision = proposal.clone();
        decision.trace.push(step("validate", reason.clone()));
        return (
            decision,
            ValidatorReport {
                expected_label: expected.label,
                proposal_label: proposal.label,
                verdict: ValidatorVerdict::Rejected,
                reason,
            },
        );
    }

    let within_chair_bound = |proposed: RiskTier| {
        (proposed.rank() as i8 - expected.label.rank() as i8).abs() <= 1
    };
    let agrees = proposal.label == expected.label;
    let acceptable = match proposal.path {
        DecisionPath::Hard | DecisionPath::SoftTable2 => agrees,
        DecisionPath::SoftChair => {
            if expected.hard {
                // A resolver must never have run on a hard case; only the
                // exact mandated label survives.
                agrees
            } else {
                within_chair_bound(proposal.label)
            }
        }
    };

    if acceptable {
        let reason = if agrees {
            format!("proposal matches recomputed expectation via {}", expected.rule_id)
        } else {
            format!(
                "resolver label {} within one tier of table expectation {} via {}",
                proposal.label, expected.label, expected.rule_id
            )
        };
        let mut decision = proposal.clone();
        decision.trace.push(step("validate", reason.clone()));
        return (
            decision,
            ValidatorReport {
                expected_label: expected.label,
                proposal_label: proposal.label,
                verdict: ValidatorVerdict::Accepted,
                reason,
            },
        );
    }

    let reason = if expected.hard {
        format!(
            "proposal {} violates active rule {} mandating {}",
            proposal.label, expected.rule_id, expected.label
        )
    } else if proposal.path == DecisionPath::SoftChair {
        format!(
            "resolver label {} strays more than one tier from {} mandated via {}",
            proposal.label, expected.label, expected.rule_id
        )
    } else {
        format!(
            "proposal {} contradicts table mapping {} via {}",
            proposal.label, expected.label, expected.rule_id
        )
    };
    let mut trace = proposal.trace.clone();
    trace.push(step("validate", reason.clone()));
    let corrected = Decision {
        label: expected.label,
        confidence: expected.confidence,
        path: expected.path,
        winning_rule: expected.rule_id.clone(),
        trace,
    };
    (
        corrected,
        ValidatorReport {
            expected_label: expected.label,
            proposal_label: proposal.label,
            verdict: ValidatorVerdict::Corrected,
            reason,
        },
    )
}

// ---------------------------------------------------------------------------
// The governed decision procedure
// ---------------------------------------------------------------------------

/// Runs one case through arbitration, grey-zone resolution, and validation,
/// returning the final decision and its audit record.
pub fn govern(
    case_id: &str,
    ev: &PatientEvidence,
    packet: &EvidencePacket,
    rs: &RuleSet,
    resolver: &dyn GreyZoneResolver,
    tau: f64,
) -> (Decision, AuditRecord) {
    let matched = rs.match_rules(ev);
    let matched_ids: Vec<String> = matched.iter().map(|r| r.id.clone()).collect();
    let mut trace = vec![step("match", format!("matched rules: [{}]", matched_ids.join(", ")))];
    let mut resolver_failure: Option<String> = None;

    let proposal = if let Some(result) = rs.arbitrate_hard(ev) {
        for elim in &result.dominance_trace {
            trace.push(step("arbitrate", format!("{}: {}", elim.rule, elim.reason)));
        }
        let label = result
            .outcome
            .tier()
            .expect("hard rules carry concrete tier outcomes");
        trace.push(step(
            "arbitrate",
            format!("hard winner {} at priority {}", result.winner, result.winner_priority),
        ));
        Decision {
            label,
            confidence: 1.0,
            path: DecisionPath::Hard,
            winning_rule: result.winner,
            trace: trace.clone(),
        }
    } else {
        let soft: Vec<&ExecutableRule> = matched
            .iter()
            .copied()
            .filter(|r| r.path == RulePath::Soft)
            .collect();
        let mapping = map_table2(&soft);
        trace.push(step(
            "table2",
            format!(
                "{} -> {} (confidence {})",
                mapping.rule_id, mapping.label, mapping.confidence
            ),
        ));
        if mapping.confidence < tau {
            match resolver.resolve(ev, packet, &trace) {
                Ok(p) => {
                    let confidence = p.confidence.min(MAX_RESOLVER_CONFIDENCE);
                    trace.push(step(
                        "resolver",
                        format!(
                            "{} proposed {} (confidence {}): {}",
                            resolver.name(),
                            p.label,
                            confidence,
                            p.reasoning.join("; ")
                        ),
                    ));
                    Decision {
                        label: p.label,
                        confidence,
                        path: DecisionPath::SoftChair,
                        winning_rule: mapping.rule_id,
                        trace: trace.clone(),
                    }
                }
                Err(failure) => {
                    let message = format!("{} resolver: {}", resolver.name(), failure);
                    trace.push(step(
                        "resolver",
                        format!("{message}; falling back to the table proposal"),
                    ));
                    resolver_failure = Some(message);
                    Decision {
                        label: mapping.label,
                        confidence: mapping.confidence,
                        path: DecisionPath::SoftTable2,
                        winning_rule: mapping.rule_id,
                        trace: trace.clone(),
                    }
                }
            }
        } else {
            Decision {
                label: mapping.label,
                confidence: mapping.confidence,
                path: DecisionPath::SoftTable2,
                winning_rule: mapping.rule_id,
                trace: trace.clone(),
            }
        }
    };

    let pre_validation_label = proposal.label;
    let (decision, report) = validate(&proposal, ev, rs);

    let audit = AuditRecord {
        case_id: case_id.to_string(),
        matched_rule_ids: matched_ids,
        decision_path: decision.path,
        detection_source: ev.detection_source,
        provenance_chunk_ids: packet.provenance_chunks.clone(),
        validator_verdict: report.verdict,
        validator_message: report.reason.clone(),
        pre_validation_label,
        final_label: decision.label,
        final_confidence: decision.confidence,
        resolver_failure,
        ruleset_version: rs.version.clone(),
        ruleset_hash: rs.source_hash.clone(),
    };
    (decision, audit)
}

/// The baseline this engine is measured against: bolt the hard rules onto
/// an opaque classifier's output. When a hard rule matches, its outcome
/// replaces the baseline label; otherwise the baseline passes through
/// untouched. Deliberately returns a bare label: no trace, no provenance,
/// no audit record.
pub fn posthoc_wrap(baseline_label: RiskTier, ev: &PatientEvidence, rs: &RuleSet) -> RiskTier {
    match rs.arbitrate_hard(ev) {
        Some(result) => result
            .outcome
            .tier()
            .expect("hard rules carry concrete tier outcomes"),
        None => baseline_label,
    }
}
