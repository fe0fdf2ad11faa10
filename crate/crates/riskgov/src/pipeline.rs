//! Per-case orchestration: specialist reports, evidence retrieval, the
//! governed decision, and assembly of the evaluation record that the
//! metrics layer consumes. Also the adversarial stress harness.
//!
//! Ground truth for trigger bookkeeping comes from the clean form of each
//! case, rebuilt from the perceived evidence plus the noise annotation. A
//! trigger counts as detected only when the perceived arbitration winner
//! is the same rule the clean evidence mandates; a nominally hard decision
//! won by the wrong rule is an upstream miss, not governance credit.

use crate::cohort::{
    adversarial_suite, forged_label_for, requires_forged_proposal, Cohort, NoiseAnnotation,
};
use crate::domain::{
    CaseRecord, DetectionSource, Grade, Lvsi, MyoInvasion, PatientEvidence, RiskTier,
};
use crate::embed::EmbeddingStore;
use crate::governance::{
    govern, guideline_label, validate, AuditRecord, Decision, DecisionPath, GreyZoneResolver,
    ValidatorVerdict,
};
use crate::kg::GuidelineGraph;
use crate::metrics::{class_scores, EvaluationRecord};
use crate::perception::{generate_reports, PerceptionError, PerceptionLibraries};
use crate::ruleset::RuleSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("perception: {0}")]
    Perception(#[from] PerceptionError),
}

/// Everything one evaluation run holds constant across cases.
pub struct Pipeline<'a> {
    pub rs: &'a RuleSet,
    pub graph: &'a GuidelineGraph,
    pub libs: &'a PerceptionLibraries,
    pub resolver: &'a dyn GreyZoneResolver,
    pub tau: f64,
    pub top_k: usize,
}

/// Everything the run produces for one case.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub decision: Decision,
    pub audit: AuditRecord,
    pub evaluation: EvaluationRecord,
}

/// The pre-noise form of a perceived case: the confusion flip names the
/// true subtype, dropped fields are restored from their recorded
/// originals, and detection metadata returns to the canonical clean shape.
/// Sound only because annotations record every deviation they inject.
pub fn reconstruct_clean(
    perceived: &PatientEvidence,
    annotation: &NoiseAnnotation,
) -> PatientEvidence {
    let mut clean = perceived.clone();
    if let Some(flip) = &annotation.subtype_confused {
        clean.subtype = Some(flip.from);
    }
    for dropped in &annotation.fields_dropped {
        match dropped.field.as_str() {
            "grade" => {
                clean.grade = Grade::from_token(&dropped.original).unwrap_or(Grade::Unknown)
            }
            "mi" => {
                clean.myometrial_invasion =
                    MyoInvasion::from_token(&dropped.original).unwrap_or(MyoInvasion::Unknown)
            }
            "lvsi" => clean.lvsi = Lvsi::from_token(&dropped.original).unwrap_or(Lvsi::Unknown),
            _ => {}
        }
    }
    clean.detection_source = DetectionSource::DnaDirect;
    clean.subtype_confidence = 1.0;
    clean
}

impl Pipeline<'_> {
    /// Runs one case end to end. The annotation supplies ground truth for
    /// trigger bookkeeping; a clean annotation means the case is its own
    /// clean form.
    pub fn run_case(
        &self,
        case: &CaseRecord,
        annotation: &NoiseAnnotation,
        store: &EmbeddingStore,
    ) -> Result<CaseOutcome, PipelineError> {
        let perceived = generate_reports(case, self.libs, store)?.evidence;
        let packet = self.graph.query(self.rs, &perceived, self.top_k);
        let (decision, audit) = govern(
            &case.case_id,
            &perceived,
            &packet,
            self.rs,
            self.resolver,
            self.tau,
        );

        let clean = reconstruct_clean(&perceived, annotation);
        let clean_hard = self.rs.arbitrate_hard(&clean);
        let perceived_hard = self.rs.arbitrate_hard(&perceived);
        let is_trigger = clean_hard.is_some();
        let trigger_detected = match &clean_hard {
            Some(mandate) => perceived_hard
                .as_ref()
                .map(|got| got.winner == mandate.winner)
                .unwrap_or(false),
            // With no true trigger, any hard arbitration is a false claim.
            None => perceived_hard.is_some(),
        };
        let rule_mandated_label = clean_hard
            .as_ref()
            .map(|m| m.outcome.tier().expect("hard rules carry concrete tiers"));
        let oracle_label = case
            .oracle_label
            .unwrap_or_else(|| guideline_label(&clean, self.rs));

        let evaluation = EvaluationRecord {
            case_id: case.case_id.clone(),
            oracle_label,
            predicted_label: decision.label,
            predicted_confidence: decision.confidence,
            class_scores: class_scores(decision.label, decision.confidence),
            is_trigger,
            trigger_detected,
            rule_mandated_label,
            detection_source: perceived.detection_source,
            path: decision.path,
        };
        Ok(CaseOutcome {
            decision,
            audit,
            evaluation,
        })
    }

    /// Runs a whole cohort in record order against the cohort's own
    /// embedding store.
    pub fn run_cohort(&self, cohort: &Cohort) -> Result<Vec<CaseOutcome>, PipelineError> {
        let store = cohort.store();
        cohort
            .records
            .iter()
            .map(|r| self.run_case(&r.case, &r.annotation, &store))
            .collect()
    }

    /// Runs the 26-case adversarial suite. Forged categories submit a
    /// rogue proposal straight to the validator; the broken-evidence
    /// categories flow through the governed path unmodified. Every row
    /// reports the validator's verdict.
    pub fn stress_adversarial(&self) -> Result<Vec<StressRow>, PipelineError> {
        let store = EmbeddingStore::new(self.libs.molecular.dim());
        let mut rows = Vec::new();
        for record in adversarial_suite() {
            let tag = record
                .annotation
                .adversarial_tag
                .clone()
                .expect("adversarial records are tagged");
            let evidence = generate_reports(&record.case, self.libs, &store)?.evidence;
            let (verdict, final_label, detail) = if requires_forged_proposal(&tag) {
                let expected = guideline_label(&evidence, self.rs);
                let forged = Decision {
                    label: forged_label_for(expected),
                    confidence: 0.9,
                    path: DecisionPath::SoftChair,
                    winning_rule: "forged".to_string(),
                    trace: Vec::new(),
                };
                let (decision, report) = validate(&forged, &evidence, self.rs);
                (report.verdict, decision.label, report.reason)
            } else {
                let packet = self.graph.query(self.rs, &evidence, self.top_k);
                let (decision, audit) = govern(
                    &record.case.case_id,
                    &evidence,
                    &packet,
                    self.rs,
                    self.resolver,
                    self.tau,
                );
                (
                    audit.validator_verdict,
                    decision.label,
                    audit.validator_message,
                )
            };
            rows.push(StressRow {
                case_id: record.case.case_id.clone(),
                tag,
                verdict,
                final_label,
                intercepted: verdict != ValidatorVerdict::Accepted,
                detail,
            });
        }
        Ok(rows)
    }
}

/// One line of the adversarial stress report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressRow {
    pub case_id: String,
    pub tag: String,
    pub verdict: ValidatorVerdict,
    pub final_label: RiskTier,
    /// True when the validator did not wave the case through.
    pub intercepted: bool,
    pub detail: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_cohort, CohortConfig, SubtypeFlip};
    use crate::domain::MolecularSubtype;
    use crate::governance::DeterministicTable2Echo;
    use crate::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
    use crate::metrics;
    use crate::ruleset::parse_ruleset;

    struct Fixture {
        rs: RuleSet,
        graph: GuidelineGraph,
        libs: PerceptionLibraries,
        echo: DeterministicTable2Echo,
    }

    impl Fixture {
        fn new() -> Self {
            let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
            let graph = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R).unwrap();
            let libs = PerceptionLibraries::synthetic(crate::cohort::DEFAULT_EMBED_DIM);
            let echo = DeterministicTable2Echo::new(rs.clone());
            Fixture {
                rs,
                graph,
                libs,
                echo,
            }
        }

        fn pipeline(&self) -> Pipeline<'_> {
            Pipeline {
                rs: &self.rs,
                graph: &self.graph,
                libs: &self.libs,
                resolver: &self.echo,
                tau: crate::governance::DEFAULT_TAU,
                top_k: DEFAULT_TOP_K,
            }
        }
    }

    #[test]
    fn clean_cohort_scores_perfectly() {
        let fx = Fixture::new();
        let cohort = generate_cohort(
            &CohortConfig {
                n_cases: 300,
                random_seed: 21,
                ..CohortConfig::default()
            },
            &fx.rs,
        )
        .unwrap();
        let outcomes = fx.pipeline().run_cohort(&cohort).unwrap();
        let records: Vec<EvaluationRecord> =
            outcomes.iter().map(|o| o.evaluation.clone()).collect();

        assert_eq!(metrics::accuracy(&records).unwrap(), 1.0);
        assert_eq!(metrics::lvr(&records).unwrap(), 0.0);
        assert_eq!(metrics::c_lvr(&records).unwrap(), 0.0);
        assert_eq!(metrics::e2e_lvr(&records).unwrap(), 0.0);
        for o in &outcomes {
            assert_eq!(o.audit.validator_verdict, ValidatorVerdict::Accepted);
        }
        let d = metrics::safety_decomposition(&records);
        assert_eq!(d.sensitivity, 1.0);
        assert_eq!(d.n_false_triggers, 0);
    }

    #[test]
    fn noise_localizes_failures_upstream_of_governance() {
        let fx = Fixture::new();
        let cohort = generate_cohort(
            &CohortConfig {
                n_cases: 1_500,
                trigger_miss_rate: 0.3,
                panel_availability_rate: 0.4,
                missing_field_rate: 0.1,
                random_seed: 23,
                ..CohortConfig::default()
            },
            &fx.rs,
        )
        .unwrap();
        let outcomes = fx.pipeline().run_cohort(&cohort).unwrap();
        let records: Vec<EvaluationRecord> =
            outcomes.iter().map(|o| o.evaluation.clone()).collect();

        // The governance layer never contradicts a trigger it was shown,
        // while the end-to-end residual absorbs the upstream misses.
        assert_eq!(metrics::c_lvr(&records).unwrap(), 0.0);
        assert!(metrics::e2e_lvr(&records).unwrap() > 0.0);
        let d = metrics::safety_decomposition(&records);
        assert!(d.n_missed > 0);
        assert!(d.sensitivity < 1.0);
        assert!(d.governance_c_lvr == 0.0);
    }

    #[test]
    fn annotations_reconstruct_the_generating_oracle() {
        let fx = Fixture::new();
        let cohort = generate_cohort(
            &CohortConfig {
                n_cases: 600,
                trigger_miss_rate: 0.3,
                panel_availability_rate: 0.3,
                missing_field_rate: 0.3,
                random_seed: 29,
                ..CohortConfig::default()
            },
            &fx.rs,
        )
        .unwrap();
        let store = cohort.store();
        for r in &cohort.records {
            let perceived = generate_reports(&r.case, &fx.libs, &store).unwrap().evidence;
            let clean = reconstruct_clean(&perceived, &r.annotation);
            assert_eq!(
                Some(guideline_label(&clean, &fx.rs)),
                r.case.oracle_label,
                "{} clean form must reproduce the generation-time oracle",
                r.case.case_id
            );
        }
    }

    fn rna_case(case_id: &str, stage: &str) -> CaseRecord {
        CaseRecord {
            case_id: case_id.to_string(),
            pole: "Missing".to_string(),
            mmr: "Missing".to_string(),
            p53: "Missing".to_string(),
            rna_embedding_ref: Some(format!("emb-{case_id}")),
            stage: stage.to_string(),
            histology: "Endometrioid".to_string(),
            grade: "G2".to_string(),
            mi: "Superficial".to_string(),
            lvsi: "Negative".to_string(),
            oracle_label: None,
        }
    }

    #[test]
    fn missed_and_false_triggers_are_booked_correctly() {
        let fx = Fixture::new();
        let mut store = EmbeddingStore::new(fx.libs.molecular.dim());

        // A true p53abn case whose embedding was confused into NSMP: the
        // trigger exists but is never exposed.
        let missed = rna_case("missed", "IB");
        store
            .insert(
                "emb-missed",
                fx.libs
                    .molecular
                    .vector(MolecularSubtype::Nsmp.as_str())
                    .unwrap()
                    .clone(),
            )
            .unwrap();
        let mut ann = NoiseAnnotation::clean("missed");
        ann.subtype_confused = Some(SubtypeFlip {
            from: MolecularSubtype::P53Abn,
            to: MolecularSubtype::Nsmp,
        });
        let outcome = fx.pipeline().run_case(&missed, &ann, &store).unwrap();
        let e = &outcome.evaluation;
        assert!(e.is_trigger);
        assert!(!e.trigger_detected);
        assert_eq!(e.rule_mandated_label, Some(RiskTier::High));
        assert_eq!(e.oracle_label, RiskTier::High);
        // Perceived NSMP at IB maps through the soft table instead.
        assert_eq!(e.predicted_label, RiskTier::Intermediate);
        assert_eq!(e.path, DecisionPath::SoftTable2);
        assert_eq!(e.detection_source, DetectionSource::RnaFallback);

        // The mirror image: a true NSMP case whose embedding was confused
        // into p53abn fires a hard rule that ground truth never mandated.
        let forged = rna_case("false-trigger", "IB");
        store
            .insert(
                "emb-false-trigger",
                fx.libs
                    .molecular
                    .vector(MolecularSubtype::P53Abn.as_str())
                    .unwrap()
                    .clone(),
            )
            .unwrap();
        let mut ann = NoiseAnnotation::clean("false-trigger");
        ann.subtype_confused = Some(SubtypeFlip {
            from: MolecularSubtype::Nsmp,
            to: MolecularSubtype::P53Abn,
        });
        let outcome = fx.pipeline().run_case(&forged, &ann, &store).unwrap();
        let e = &outcome.evaluation;
        assert!(!e.is_trigger);
        assert!(e.trigger_detected, "a hard match without a true trigger is a false claim");
        assert_eq!(e.rule_mandated_label, None);
        assert_eq!(e.oracle_label, RiskTier::Intermediate);
        assert_eq!(e.predicted_label, RiskTier::High);
        assert_eq!(e.path, DecisionPath::Hard);
    }

    #[test]
    fn wrong_rule_wins_counts_as_missed_trigger() {
        let fx = Fixture::new();
        let mut store = EmbeddingStore::new(fx.libs.molecular.dim());
        // Clean evidence: NSMP at stage III mandates High via the advanced
        // stage rule. The embedding confusion turns it into POLEmut, whose
        // rule outranks everything and flips the label to Low. The hard
        // path ran, but not the mandated rule, so the trigger was missed
        // and the final label is an end-to-end violation.
        let case = rna_case("wrong-rule", "III");
        store
            .insert(
                "emb-wrong-rule",
                fx.libs
                    .molecular
                    .vector(MolecularSubtype::PoleMut.as_str())
                    .unwrap()
                    .clone(),
            )
            .unwrap();
        let mut ann = NoiseAnnotation::clean("wrong-rule");
        ann.subtype_confused = Some(SubtypeFlip {
            from: MolecularSubtype::Nsmp,
            to: MolecularSubtype::PoleMut,
        });
        let outcome = fx.pipeline().run_case(&case, &ann, &store).unwrap();
        let e = &outcome.evaluation;
        assert!(e.is_trigger);
        assert!(!e.trigger_detected);
        assert_eq!(e.rule_mandated_label, Some(RiskTier::High));
        assert_eq!(e.predicted_label, RiskTier::Low);
        assert_eq!(e.path, DecisionPath::Hard);

        // Exactly the story the metrics tell: an upstream miss, zero
        // governance-layer violations.
        let records = [e.clone()];
        assert_eq!(metrics::lvr(&records).unwrap(), 1.0);
        assert!(metrics::c_lvr(&records).is_err(), "no detected triggers");
        assert_eq!(metrics::e2e_lvr(&records).unwrap(), 1.0);
    }

    #[test]
    fn stress_suite_intercepts_all_twenty_six() {
        let fx = Fixture::new();
        let rows = fx.pipeline().stress_adversarial().unwrap();
        assert_eq!(rows.len(), 26);
        assert!(rows.iter().all(|r| r.intercepted));
        let corrected = rows
            .iter()
            .filter(|r| r.verdict == ValidatorVerdict::Corrected)
            .count();
        let rejected = rows
            .iter()
            .filter(|r| r.verdict == ValidatorVerdict::Rejected)
            .count();
        assert_eq!(corrected, 13, "forged and boundary categories");
        assert_eq!(rejected, 13, "missing-field and impossible categories");
    }
}
