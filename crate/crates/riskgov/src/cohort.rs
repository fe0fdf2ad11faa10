//! Deterministic synthetic cohorts: configurable subtype prevalence,
//! admissibility-conditioned clinical draws, detection-noise injection
//! with a full per-case annotation trail, and the fixed adversarial suite.
//!
//! Oracle labels come from the rule layer itself, so a noise-free cohort
//! run through the governed pipeline scores perfectly by construction.
//! That circularity is deliberate: it turns the generator plus engine into
//! a desk-scale consistency check, not a claim of external validity.

use crate::domain::{
    congruence_violations, CaseRecord, Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion,
    RiskTier, StageCode,
};
use crate::embed::{normalize, synthetic_unit_vector, EmbedError, EmbeddingStore};
use crate::governance::guideline_label;
use crate::perception::{LibrarySource, PrototypeLibrary};
use crate::ruleset::RuleSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader};
use std::path::Path;
use thiserror::Error;

/// Dimension of synthetic expression embeddings and the prototype
/// libraries that read them.
pub const DEFAULT_EMBED_DIM: usize = 64;
/// Magnitude of the isotropic perturbation added to a subtype centroid
/// when synthesizing an expression embedding. Small against the centroid
/// separation, so nearest-centroid recovery stays exact while confidences
/// dip believably below 1.
pub const RNA_NOISE_SCALE: f64 = 0.1;
/// The published study cohort size.
pub const DEFAULT_COHORT_SIZE: usize = 541;
/// Default subtype prevalence, index-aligned with the dominance order
/// POLEmut, MMRd, p53abn, NSMP: the 48/147/158/188 split over 541.
pub const DEFAULT_PREVALENCE: [f64; 4] = [
    48.0 / 541.0,
    147.0 / 541.0,
    158.0 / 541.0,
    188.0 / 541.0,
];

pub const CASES_FILE: &str = "cases.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.vec";

/// Adversarial category tags carried in `NoiseAnnotation::adversarial_tag`.
pub const TAG_FORGED: &str = "forged_contradiction";
pub const TAG_MISSING: &str = "missing_field";
pub const TAG_IMPOSSIBLE: &str = "impossible_combination";
pub const TAG_BOUNDARY: &str = "boundary_forged";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("subtype prevalence sums to {0}, expected 1 within 1e-9")]
    PrevalenceNotNormalized(f64),
    #[error("subtype prevalence component {index} is negative: {value}")]
    NegativePrevalence { index: usize, value: f64 },
    #[error("{field} must lie in {range}, got {value}")]
    RateOutOfRange {
        field: &'static str,
        range: &'static str,
        value: f64,
    },
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("cohort io: {0}")]
    Io(#[from] io::Error),
    #[error("{file} line {line}: {message}")]
    Malformed {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("embedding store: {0}")]
    Embed(#[from] EmbedError),
    #[error("case {case_id} references embedding {key:?} absent from the store")]
    DanglingEmbedding { case_id: String, key: String },
    #[error("annotation for unknown case {0}")]
    OrphanAnnotation(String),
    #[error("case {0} has no annotation")]
    MissingAnnotation(String),
}

/// Everything the generator needs to know. Prevalence is index-aligned
/// with `MolecularSubtype::ALL`; `trigger_miss_rate` is the probability an
/// RNA-fallback case's subtype is confused per the confusion table;
/// `missing_field_rate` drops each of grade, invasion, and LVSI
/// independently. Only schema-optional fields are ever dropped, so
/// generated cohorts always pass schema validation; schema violations are
/// the adversarial suite's job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub n_cases: usize,
    pub subtype_prevalence: [f64; 4],
    pub trigger_miss_rate: f64,
    pub panel_availability_rate: f64,
    pub missing_field_rate: f64,
    pub random_seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_cases: DEFAULT_COHORT_SIZE,
            subtype_prevalence: DEFAULT_PREVALENCE,
            trigger_miss_rate: 0.0,
            panel_availability_rate: 0.669,
            missing_field_rate: 0.0,
            random_seed: 42,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (index, &value) in self.subtype_prevalence.iter().enumerate() {
            if value < 0.0 {
                return Err(ConfigError::NegativePrevalence { index, value });
            }
        }
        let sum: f64 = self.subtype_prevalence.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::PrevalenceNotNormalized(sum));
        }
        if !(0.0..1.0).contains(&self.trigger_miss_rate) {
            return Err(ConfigError::RateOutOfRange {
                field: "trigger_miss_rate",
                range: "[0, 1)",
                value: self.trigger_miss_rate,
            });
        }
        for (field, value) in [
            ("panel_availability_rate", self.panel_availability_rate),
            ("missing_field_rate", self.missing_field_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::RateOutOfRange {
                    field,
                    range: "[0, 1]",
                    value,
                });
            }
        }
        Ok(())
    }
}

/// A subtype confusion injected into one case's detection channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtypeFlip {
    pub from: MolecularSubtype,
    pub to: MolecularSubtype,
}

/// A field blanked by noise injection, with the value it replaced so the
/// clean case is reconstructible from record plus annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedField {
    pub field: String,
    pub original: String,
}

/// Sidecar record describing every deviation one case carries relative to
/// its clean form. An all-empty annotation means the case is clean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseAnnotation {
    pub case_id: String,
    pub subtype_confused: Option<SubtypeFlip>,
    pub fields_dropped: Vec<DroppedField>,
    pub adversarial_tag: Option<String>,
}

impl NoiseAnnotation {
    pub fn clean(case_id: &str) -> Self {
        NoiseAnnotation {
            case_id: case_id.to_string(),
            subtype_confused: None,
            fields_dropped: Vec::new(),
            adversarial_tag: None,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.subtype_confused.is_none()
            && self.fields_dropped.is_empty()
            && self.adversarial_tag.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortRecord {
    pub case: CaseRecord,
    pub annotation: NoiseAnnotation,
    /// The synthetic expression embedding for RNA-fallback cases, keyed in
    /// the store by `case.rna_embedding_ref`.
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<CohortRecord>,
    pub dim: usize,
}

impl Cohort {
    /// Assembles the embedding store backing this cohort's RNA cases.
    pub fn store(&self) -> EmbeddingStore {
        let mut store = EmbeddingStore::new(self.dim);
        for r in &self.records {
            if let (Some(key), Some(v)) = (&r.case.rna_embedding_ref, &r.embedding) {
                store
                    .insert(key, v.clone())
                    .expect("cohort embeddings share the cohort dimension");
            }
        }
        store
    }

    /// Content hash over every case, annotation, and embedding bit, in
    /// record order. Two cohorts with equal digests are byte-identical on
    /// disk.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dim.to_le_bytes());
        for r in &self.records {
            h.update(serde_json::to_string(&r.case).expect("case records serialize"));
            h.update(b"\n");
            h.update(serde_json::to_string(&r.annotation).expect("annotations serialize"));
            h.update(b"\n");
            if let Some(v) = &r.embedding {
                for x in v {
                    h.update(x.to_bits().to_le_bytes());
                }
            }
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Serializes the cohort into its three canonical files as in-memory
    /// buffers, in the order `cases.jsonl`, `annotations.jsonl`,
    /// `embeddings.vec`.
    pub fn to_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut cases = Vec::new();
        let mut annotations = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut cases, &r.case).expect("case records serialize");
            cases.push(b'\n');
            serde_json::to_writer(&mut annotations, &r.annotation)
                .expect("annotations serialize");
            annotations.push(b'\n');
        }
        let mut embeddings = Vec::new();
        self.store()
            .write_to(&mut embeddings)
            .expect("writing to a buffer cannot fail");
        vec![
            (CASES_FILE, cases),
            (ANNOTATIONS_FILE, annotations),
            (EMBEDDINGS_FILE, embeddings),
        ]
    }

    /// Writes `cases.jsonl`, `annotations.jsonl`, and `embeddings.vec`
    /// into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<(), CohortError> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in self.to_files() {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// Reads a cohort directory back. Every case must have an annotation
    /// and every referenced embedding must exist; silent partial loads
    /// would defeat the audit trail.
    pub fn read_dir(dir: &Path) -> Result<Cohort, CohortError> {
        let cases_raw = fs::read_to_string(dir.join(CASES_FILE))?;
        let mut cases: Vec<CaseRecord> = Vec::new();
        for (i, line) in cases_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            cases.push(
                serde_json::from_str(line).map_err(|e| CohortError::Malformed {
                    file: CASES_FILE,
                    line: i + 1,
                    message: e.to_string(),
                })?,
            );
        }

        let ann_raw = fs::read_to_string(dir.join(ANNOTATIONS_FILE))?;
        let mut annotations: BTreeMap<String, NoiseAnnotation> = BTreeMap::new();
        for (i, line) in ann_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ann: NoiseAnnotation =
                serde_json::from_str(line).map_err(|e| CohortError::Malformed {
                    file: ANNOTATIONS_FILE,
                    line: i + 1,
                    message: e.to_string(),
                })?;
            annotations.insert(ann.case_id.clone(), ann);
        }

        let file = fs::File::open(dir.join(EMBEDDINGS_FILE))?;
        let store = EmbeddingStore::read_from(&mut BufReader::new(file))?;

        let mut records = Vec::with_capacity(cases.len());
        for case in cases {
            let annotation = annotations.remove(&case.case_id).ok_or_else(|| {
                CohortError::MissingAnnotation(case.case_id.clone())
            })?;
            let embedding = match &case.rna_embedding_ref {
                Some(key) => Some(
                    store
                        .get(key)
                        .cloned()
                        .ok_or_else(|| CohortError::DanglingEmbedding {
                            case_id: case.case_id.clone(),
                            key: key.clone(),
                        })?,
                ),
                None => None,
            };
            records.push(CohortRecord {
                case,
                annotation,
                embedding,
            });
        }
        if let Some(orphan) = annotations.into_keys().next() {
            return Err(CohortError::OrphanAnnotation(orphan));
        }
        Ok(Cohort {
            records,
            dim: store.dim(),
        })
    }
}

/// The default detection confusion table. Published error counts pin two
/// rows: p53abn collapses into NSMP, and NSMP scatters to p53abn, MMRd,
/// and POLEmut in the ratio 8:3:1. The remaining rows default to losing
/// their signal into the residual NSMP class, which is the conservative
/// direction for a safety study because it hides triggers instead of
/// inventing them.
fn confused_subtype(from: MolecularSubtype, rng: &mut ChaCha8Rng) -> MolecularSubtype {
    match from {
        MolecularSubtype::P53Abn => MolecularSubtype::Nsmp,
        MolecularSubtype::Nsmp => {
            let r = rng.gen_range(0..12);
            if r < 8 {
                MolecularSubtype::P53Abn
            } else if r < 11 {
                MolecularSubtype::Mmrd
            } else {
                MolecularSubtype::PoleMut
            }
        }
        MolecularSubtype::Mmrd | MolecularSubtype::PoleMut => MolecularSubtype::Nsmp,
    }
}

/// Panel tokens reporting `subtype` through the DNA channel.
fn panel_tokens(subtype: MolecularSubtype) -> (&'static str, &'static str, &'static str) {
    match subtype {
        MolecularSubtype::PoleMut => ("Mutated", "Proficient", "Normal"),
        MolecularSubtype::Mmrd => ("WildType", "Deficient", "Normal"),
        MolecularSubtype::P53Abn => ("WildType", "Proficient", "Abnormal"),
        MolecularSubtype::Nsmp => ("WildType", "Proficient", "Normal"),
    }
}

/// Centroid of the reported subtype plus a small case-seeded perturbation,
/// renormalized. Nearest-centroid matching recovers the reported subtype
/// exactly while the cosine dips believably below one.
fn rna_embedding(reported: MolecularSubtype, case_id: &str, lib: &PrototypeLibrary) -> Vec<f64> {
    let centroid = lib
        .vector(reported.as_str())
        .expect("molecular library covers every subtype");
    let noise = synthetic_unit_vector(&format!("rna-noise:{case_id}"), centroid.len());
    let perturbed: Vec<f64> = centroid
        .iter()
        .zip(&noise)
        .map(|(c, n)| c + RNA_NOISE_SCALE * n)
        .collect();
    normalize(&perturbed).expect("the noise scale keeps vectors away from zero")
}

struct ClinicalDraw {
    stage: StageCode,
    histology: Histology,
    grade: Grade,
    mi: MyoInvasion,
    lvsi: Lvsi,
}

/// Uniform draw over the clinically admissible joint space, by rejection
/// against the congruence rules. Unknown members never appear here; they
/// arise only through field drops.
fn draw_admissible(rng: &mut ChaCha8Rng) -> ClinicalDraw {
    const GRADES: [Grade; 3] = [Grade::G1, Grade::G2, Grade::G3];
    const MIS: [MyoInvasion; 3] = [MyoInvasion::None, MyoInvasion::Superficial, MyoInvasion::Deep];
    const LVSIS: [Lvsi; 2] = [Lvsi::Negative, Lvsi::Positive];
    loop {
        let draw = ClinicalDraw {
            stage: StageCode::ALL[rng.gen_range(0..StageCode::ALL.len())],
            histology: Histology::ALL[rng.gen_range(0..Histology::ALL.len())],
            grade: GRADES[rng.gen_range(0..GRADES.len())],
            mi: MIS[rng.gen_range(0..MIS.len())],
            lvsi: LVSIS[rng.gen_range(0..LVSIS.len())],
        };
        let probe = crate::domain::PatientEvidence::structured(
            MolecularSubtype::Nsmp,
            draw.stage,
            draw.histology,
            draw.grade,
            draw.mi,
            draw.lvsi,
        );
        if congruence_violations(&probe).is_empty() {
            return draw;
        }
    }
}

/// One of the raw-text shapes stage fields arrive in; all normalize to the
/// same code.
fn stage_text(code: StageCode, rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..3) {
        0 => code.as_str().to_string(),
        1 => format!("Stage {}", code.as_str()),
        _ => format!("FIGO {}", code.as_str()),
    }
}

/// Generates a cohort: subtype from the prevalence vector, clinical fields
/// uniform over the admissible space, oracle label from the rule layer on
/// the clean evidence, then noise injection per the config. Identical
/// config and ruleset give a byte-identical cohort.
pub fn generate_cohort(cfg: &CohortConfig, rs: &RuleSet) -> Result<Cohort, ConfigError> {
    cfg.validate()?;
    let molecular = PrototypeLibrary::synthetic(LibrarySource::Molecular, DEFAULT_EMBED_DIM);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.random_seed);
    let mut records = Vec::with_capacity(cfg.n_cases);

    for i in 0..cfg.n_cases {
        let case_id = format!("case-{i:05}");

        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut true_subtype = MolecularSubtype::Nsmp;
        for (subtype, p) in MolecularSubtype::ALL.into_iter().zip(cfg.subtype_prevalence) {
            acc += p;
            if u < acc {
                true_subtype = subtype;
                break;
            }
        }

        let draw = draw_admissible(&mut rng);
        let clean = crate::domain::PatientEvidence::structured(
            true_subtype,
            draw.stage,
            draw.histology,
            draw.grade,
            draw.mi,
            draw.lvsi,
        );
        let oracle = guideline_label(&clean, rs);

        let mut annotation = NoiseAnnotation::clean(&case_id);
        let dna = rng.gen_bool(cfg.panel_availability_rate);
        let (pole, mmr, p53, embedding_ref, embedding) = if dna {
            let (pole, mmr, p53) = panel_tokens(true_subtype);
            (pole, mmr, p53, None, None)
        } else {
            let reported = if cfg.trigger_miss_rate > 0.0 && rng.gen_bool(cfg.trigger_miss_rate) {
                let to = confused_subtype(true_subtype, &mut rng);
                annotation.subtype_confused = Some(SubtypeFlip {
                    from: true_subtype,
                    to,
                });
                to
            } else {
                true_subtype
            };
            let key = format!("emb-{case_id}");
            let v = rna_embedding(reported, &case_id, &molecular);
            ("Missing", "Missing", "Missing", Some(key), Some(v))
        };

        let mut grade_token = draw.grade.as_str().to_string();
        let mut mi_token = draw.mi.as_str().to_string();
        let mut lvsi_token = draw.lvsi.as_str().to_string();
        if cfg.missing_field_rate > 0.0 {
            for (field, token) in [
                ("grade", &mut grade_token),
                ("mi", &mut mi_token),
                ("lvsi", &mut lvsi_token),
            ] {
                if rng.gen_bool(cfg.missing_field_rate) {
                    annotation.fields_dropped.push(DroppedField {
                        field: field.to_string(),
                        original: std::mem::take(token),
                    });
                }
            }
        }

        let case = CaseRecord {
            case_id: case_id.clone(),
            pole: pole.to_string(),
            mmr: mmr.to_string(),
            p53: p53.to_string(),
            rna_embedding_ref: embedding_ref,
            stage: stage_text(draw.stage, &mut rng),
            histology: draw.histology.as_str().to_string(),
            grade: grade_token,
            mi: mi_token,
            lvsi: lvsi_token,
            oracle_label: Some(oracle),
        };
        records.push(CohortRecord {
            case,
            annotation,
            embedding,
        });
    }

    Ok(Cohort {
        records,
        dim: DEFAULT_EMBED_DIM,
    })
}

// ---------------------------------------------------------------------------
// Adversarial suite
// ---------------------------------------------------------------------------

/// Whether a tagged case is exercised by forging a proposal against the
/// validator, as opposed to flowing through the pipeline as-is.
pub fn requires_forged_proposal(tag: &str) -> bool {
    tag == TAG_FORGED || tag == TAG_BOUNDARY
}

/// The label a forged proposal carries: the severity-opposite of the
/// expected label, which both contradicts any hard mandate and strays more
/// than one tier from any table mapping, so the validator must act.
pub fn forged_label_for(expected: RiskTier) -> RiskTier {
    if expected.rank() >= 2 {
        RiskTier::Low
    } else {
        RiskTier::High
    }
}

struct AdvSpec {
    id: &'static str,
    subtype: Option<MolecularSubtype>,
    stage: &'static str,
    histology: &'static str,
    grade: &'static str,
    mi: &'static str,
    lvsi: &'static str,
    tag: &'static str,
}

fn adv_record(spec: AdvSpec, rs: &RuleSet) -> CohortRecord {
    let (pole, mmr, p53) = match spec.subtype {
        Some(s) => panel_tokens(s),
        None => ("Missing", "Missing", "Missing"),
    };
    // Oracle only where the evidence itself is trustworthy: forged and
    // boundary categories. Broken-schema and contradictory cases have no
    // defensible ground truth.
    let oracle = match (spec.tag, spec.subtype) {
        (t, Some(subtype)) if requires_forged_proposal(t) => {
            let stage = StageCode::from_token(spec.stage).expect("adversarial stages are codes");
            let ev = crate::domain::PatientEvidence::structured(
                subtype,
                stage,
                Histology::from_token(spec.histology).expect("adversarial histologies are tokens"),
                Grade::from_token(spec.grade).expect("adversarial grades are tokens"),
                MyoInvasion::from_token(spec.mi).expect("adversarial invasion values are tokens"),
                Lvsi::from_token(spec.lvsi).expect("adversarial LVSI values are tokens"),
            );
            Some(guideline_label(&ev, rs))
        }
        _ => None,
    };
    let mut annotation = NoiseAnnotation::clean(spec.id);
    annotation.adversarial_tag = Some(spec.tag.to_string());
    CohortRecord {
        case: CaseRecord {
            case_id: spec.id.to_string(),
            pole: pole.to_string(),
            mmr: mmr.to_string(),
            p53: p53.to_string(),
            rna_embedding_ref: None,
            stage: spec.stage.to_string(),
            histology: spec.histology.to_string(),
            grade: spec.grade.to_string(),
            mi: spec.mi.to_string(),
            lvsi: spec.lvsi.to_string(),
            oracle_label: oracle,
        },
        annotation,
        embedding: None,
    }
}

/// The fixed 26-case validator stress suite: 8 forged proposals
/// contradicting an active hard rule, 5 cases with missing mandatory
/// fields, 8 clinically impossible combinations, and 5 exact rule-boundary
/// cases paired with forged proposals. Every case must leave the validator
/// non-Accepted. Oracle labels on the trustworthy categories come from the
/// built-in ruleset; a stress run under different rules recomputes its own
/// expectations from the evidence.
pub fn adversarial_suite() -> Vec<CohortRecord> {
    let rs = crate::ruleset::parse_ruleset(crate::DEFAULT_RULES_SOURCE)
        .expect("the built-in ruleset parses");
    adversarial_suite_for(&rs)
}

fn adversarial_suite_for(rs: &RuleSet) -> Vec<CohortRecord> {
    use MolecularSubtype::{Mmrd, Nsmp, P53Abn, PoleMut};
    let specs = vec![
        // (a) Forged proposals against active hard rules.
        AdvSpec { id: "adv-a1", subtype: Some(PoleMut), stage: "IB", histology: "Endometrioid", grade: "G3", mi: "Deep", lvsi: "Positive", tag: TAG_FORGED },
        AdvSpec { id: "adv-a2", subtype: Some(PoleMut), stage: "III", histology: "Serous", grade: "G3", mi: "Deep", lvsi: "Positive", tag: TAG_FORGED },
        AdvSpec { id: "adv-a3", subtype: Some(P53Abn), stage: "IB", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_FORGED },
        AdvSpec { id: "adv-a4", subtype: Some(P53Abn), stage: "IA", histology: "Endometrioid", grade: "G2", mi: "None", lvsi: "Negative", tag: TAG_FORGED },
        AdvSpec { id: "adv-a5", subtype: Some(Mmrd), stage: "III", histology: "Endometrioid", grade: "G2", mi: "Deep", lvsi: "Positive", tag: TAG_FORGED },
        AdvSpec { id: "adv-a6", subtype: Some(Mmrd), stage: "II", histology: "Endometrioid", grade: "G1", mi: "Superficial", lvsi: "Negative", tag: TAG_FORGED },
        AdvSpec { id: "adv-a7", subtype: Some(Nsmp), stage: "III", histology: "Endometrioid", grade: "G2", mi: "Deep", lvsi: "Positive", tag: TAG_FORGED },
        AdvSpec { id: "adv-a8", subtype: Some(Nsmp), stage: "IB", histology: "Serous", grade: "G3", mi: "Deep", lvsi: "Positive", tag: TAG_FORGED },
        // (b) Missing mandatory fields.
        AdvSpec { id: "adv-b1", subtype: Some(Nsmp), stage: "", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_MISSING },
        AdvSpec { id: "adv-b2", subtype: Some(Nsmp), stage: "IB", histology: "", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_MISSING },
        AdvSpec { id: "adv-b3", subtype: None, stage: "IB", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_MISSING },
        AdvSpec { id: "adv-b4", subtype: Some(Nsmp), stage: "", histology: "", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_MISSING },
        AdvSpec { id: "adv-b5", subtype: None, stage: "", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_MISSING },
        // (c) Clinically impossible combinations.
        AdvSpec { id: "adv-c1", subtype: Some(Nsmp), stage: "IA", histology: "Endometrioid", grade: "G1", mi: "Deep", lvsi: "Negative", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c2", subtype: Some(Nsmp), stage: "IB", histology: "Serous", grade: "G1", mi: "Superficial", lvsi: "Negative", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c3", subtype: Some(Mmrd), stage: "II", histology: "Serous", grade: "G2", mi: "Deep", lvsi: "Negative", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c4", subtype: Some(Nsmp), stage: "IB", histology: "Undifferentiated", grade: "G1", mi: "Superficial", lvsi: "Negative", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c5", subtype: Some(P53Abn), stage: "III", histology: "Undifferentiated", grade: "G2", mi: "Deep", lvsi: "Positive", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c6", subtype: Some(Nsmp), stage: "IB", histology: "Endometrioid", grade: "G2", mi: "None", lvsi: "Positive", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c7", subtype: Some(P53Abn), stage: "IVB", histology: "Endometrioid", grade: "G3", mi: "None", lvsi: "Negative", tag: TAG_IMPOSSIBLE },
        AdvSpec { id: "adv-c8", subtype: Some(Mmrd), stage: "IA", histology: "Serous", grade: "G1", mi: "Deep", lvsi: "Positive", tag: TAG_IMPOSSIBLE },
        // (d) Exact rule boundaries, paired with forged proposals.
        AdvSpec { id: "adv-d1", subtype: Some(P53Abn), stage: "IA", histology: "Endometrioid", grade: "G3", mi: "None", lvsi: "Negative", tag: TAG_BOUNDARY },
        AdvSpec { id: "adv-d2", subtype: Some(P53Abn), stage: "IA", histology: "Endometrioid", grade: "G3", mi: "Superficial", lvsi: "Negative", tag: TAG_BOUNDARY },
        AdvSpec { id: "adv-d3", subtype: Some(Mmrd), stage: "II", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_BOUNDARY },
        AdvSpec { id: "adv-d4", subtype: Some(Nsmp), stage: "IA", histology: "Endometrioid", grade: "G3", mi: "Superficial", lvsi: "Negative", tag: TAG_BOUNDARY },
        AdvSpec { id: "adv-d5", subtype: Some(Nsmp), stage: "IB", histology: "Endometrioid", grade: "G2", mi: "Superficial", lvsi: "Negative", tag: TAG_BOUNDARY },
    ];
    specs.into_iter().map(|s| adv_record(s, rs)).collect()
}
