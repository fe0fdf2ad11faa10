//! Clinical vocabulary and the structured evidence schema.
//!
//! Absence is always explicit: `Unknown` and `Missing` are declared enum
//! members, never sentinel numbers, because the validator and the
//! adversarial suite must distinguish "not assessed" from "negative".
//! Fields that may be absent entirely (subtype, stage, histology) are
//! `Option`s and their absence is a schema violation; `Unknown` grades,
//! invasion states and LVSI are schema-valid and handled by fail-closed
//! rule matching instead.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    /// The stage string does not normalize to one of the six FIGO codes.
    #[error("unrecognized FIGO stage: {0:?}")]
    UnrecognizedStage(String),
}

// ---------------------------------------------------------------------------
// Risk tiers
// ---------------------------------------------------------------------------

/// Final risk assignment. The derived order is clinical severity, used by
/// conservative tie-breaking: when equally ranked rules disagree, the higher
/// tier wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskTier {
    Low,
    Intermediate,
    HighIntermediate,
    High,
}

impl RiskTier {
    pub const ALL: [RiskTier; 4] = [
        RiskTier::Low,
        RiskTier::Intermediate,
        RiskTier::HighIntermediate,
        RiskTier::High,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskTier::Low => "Low",
            RiskTier::Intermediate => "Intermediate",
            RiskTier::HighIntermediate => "HighIntermediate",
            RiskTier::High => "High",
        }
    }

    /// Severity rank, 0 (Low) through 3 (High).
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_token(s: &str) -> Option<RiskTier> {
        let t = s.trim();
        RiskTier::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for RiskTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Molecular classification
// ---------------------------------------------------------------------------

/// The four TCGA-derived molecular classes. Declaration order is the
/// diagnostic dominance order applied when markers co-occur: POLE mutation
/// outranks mismatch-repair deficiency, which outranks abnormal p53, and
/// NSMP is the residual class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MolecularSubtype {
    #[serde(rename = "POLEmut")]
    PoleMut,
    #[serde(rename = "MMRd")]
    Mmrd,
    #[serde(rename = "p53abn")]
    P53Abn,
    #[serde(rename = "NSMP")]
    Nsmp,
}

impl MolecularSubtype {
    pub const ALL: [MolecularSubtype; 4] = [
        MolecularSubtype::PoleMut,
        MolecularSubtype::Mmrd,
        MolecularSubtype::P53Abn,
        MolecularSubtype::Nsmp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MolecularSubtype::PoleMut => "POLEmut",
            MolecularSubtype::Mmrd => "MMRd",
            MolecularSubtype::P53Abn => "p53abn",
            MolecularSubtype::Nsmp => "NSMP",
        }
    }

    /// 0 is diagnostically strongest (POLEmut), 3 weakest (NSMP).
    pub fn dominance_rank(self) -> u8 {
        self as u8
    }

    pub fn from_token(s: &str) -> Option<MolecularSubtype> {
        let t = s.trim();
        MolecularSubtype::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for MolecularSubtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the molecular subtype was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    /// Directly from the DNA biomarker panel (POLE, MMR, p53).
    DnaDirect,
    /// Inferred from an RNA expression embedding when the panel is absent.
    RnaFallback,
    Unknown,
}

impl DetectionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionSource::DnaDirect => "dna_direct",
            DetectionSource::RnaFallback => "rna_fallback",
            DetectionSource::Unknown => "unknown",
        }
    }
}

impl fmt::Display for DetectionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Biomarker panel
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleStatus {
    Mutated,
    WildType,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MmrStatus {
    Deficient,
    Proficient,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum P53Status {
    Abnormal,
    Normal,
    Missing,
}

/// Tri-state DNA panel. `Missing` marks an unperformed assay, distinct from
/// a negative result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiomarkerPanel {
    pub pole: PoleStatus,
    pub mmr: MmrStatus,
    pub p53: P53Status,
}

impl BiomarkerPanel {
    pub fn missing() -> Self {
        BiomarkerPanel {
            pole: PoleStatus::Missing,
            mmr: MmrStatus::Missing,
            p53: P53Status::Missing,
        }
    }

    /// The panel carries information unless every assay is missing.
    pub fn is_available(&self) -> bool {
        !(self.pole == PoleStatus::Missing
            && self.mmr == MmrStatus::Missing
            && self.p53 == P53Status::Missing)
    }
}

impl PoleStatus {
    pub fn from_token(s: &str) -> Option<PoleStatus> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mutated" => Some(PoleStatus::Mutated),
            "wildtype" => Some(PoleStatus::WildType),
            "missing" | "" => Some(PoleStatus::Missing),
            _ => None,
        }
    }
}

impl MmrStatus {
    pub fn from_token(s: &str) -> Option<MmrStatus> {
        match s.trim().to_ascii_lowercase().as_str() {
            "deficient" => Some(MmrStatus::Deficient),
            "proficient" => Some(MmrStatus::Proficient),
            "missing" | "" => Some(MmrStatus::Missing),
            _ => None,
        }
    }
}

impl P53Status {
    pub fn from_token(s: &str) -> Option<P53Status> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abnormal" => Some(P53Status::Abnormal),
            "normal" => Some(P53Status::Normal),
            "missing" | "" => Some(P53Status::Missing),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// FIGO stage
// ---------------------------------------------------------------------------

/// The six-value staging canon used by the rule layer. Ordinals encode the
/// progression IA=0 .. IVB=5 so that "stage at least" triggers compare ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageCode {
    #[serde(rename = "IA")]
    Ia,
    #[serde(rename = "IB")]
    Ib,
    #[serde(rename = "II")]
    Ii,
    #[serde(rename = "III")]
    Iii,
    #[serde(rename = "IVA")]
    Iva,
    #[serde(rename = "IVB")]
    Ivb,
}

impl StageCode {
    pub const ALL: [StageCode; 6] = [
        StageCode::Ia,
        StageCode::Ib,
        StageCode::Ii,
        StageCode::Iii,
        StageCode::Iva,
        StageCode::Ivb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageCode::Ia => "IA",
            StageCode::Ib => "IB",
            StageCode::Ii => "II",
            StageCode::Iii => "III",
            StageCode::Iva => "IVA",
            StageCode::Ivb => "IVB",
        }
    }

    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_token(s: &str) -> Option<StageCode> {
        let t = s.trim();
        StageCode::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for StageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A normalized stage plus the source string it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigoStage {
    pub code: StageCode,
    pub raw_text: String,
}

impl FigoStage {
    pub fn from_code(code: StageCode) -> Self {
        FigoStage {
            code,
            raw_text: code.as_str().to_string(),
        }
    }
}

/// Normalizes free-text staging into the six-value canon.
///
/// Tolerates case, surrounding whitespace, and the prefixes "FIGO" and
/// "Stage" in either order. Everything else is rejected: there is no
/// guessing for subdivided stages outside the canon (for example "IIIA").
/// Idempotent on its own output.
pub fn normalize_stage(raw: &str) -> Result<FigoStage, DomainError> {
    let mut t = raw.trim();
    loop {
        let lower = t.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("figo") {
            t = t[t.len() - rest.len()..].trim_start();
        } else if let Some(rest) = lower.strip_prefix("stage") {
            t = t[t.len() - rest.len()..].trim_start();
        } else {
            break;
        }
    }
    match StageCode::from_token(t) {
        Some(code) => Ok(FigoStage {
            code,
            raw_text: raw.to_string(),
        }),
        None => Err(DomainError::UnrecognizedStage(raw.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Morphology and modifiers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Histology {
    Endometrioid,
    Serous,
    ClearCell,
    Undifferentiated,
    Mixed,
}

impl Histology {
    pub const ALL: [Histology; 5] = [
        Histology::Endometrioid,
        Histology::Serous,
        Histology::ClearCell,
        Histology::Undifferentiated,
        Histology::Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Histology::Endometrioid => "Endometrioid",
            Histology::Serous => "Serous",
            Histology::ClearCell => "ClearCell",
            Histology::Undifferentiated => "Undifferentiated",
            Histology::Mixed => "Mixed",
        }
    }

    pub fn from_token(s: &str) -> Option<Histology> {
        let t = s.trim();
        Histology::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for Histology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    G1,
    G2,
    G3,
    Unknown,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::G1, Grade::G2, Grade::G3, Grade::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::G1 => "G1",
            Grade::G2 => "G2",
            Grade::G3 => "G3",
            Grade::Unknown => "Unknown",
        }
    }

    pub fn from_token(s: &str) -> Option<Grade> {
        let t = s.trim();
        Grade::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Depth of myometrial invasion. `None` is a concrete negative finding;
/// `Unknown` means not assessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MyoInvasion {
    None,
    Superficial,
    Deep,
    Unknown,
}

impl MyoInvasion {
    pub const ALL: [MyoInvasion; 4] = [
        MyoInvasion::None,
        MyoInvasion::Superficial,
        MyoInvasion::Deep,
        MyoInvasion::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MyoInvasion::None => "None",
            MyoInvasion::Superficial => "Superficial",
            MyoInvasion::Deep => "Deep",
            MyoInvasion::Unknown => "Unknown",
        }
    }

    pub fn from_token(s: &str) -> Option<MyoInvasion> {
        let t = s.trim();
        MyoInvasion::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for MyoInvasion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lymphovascular space invasion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lvsi {
    Positive,
    Negative,
    Unknown,
}

impl Lvsi {
    pub const ALL: [Lvsi; 3] = [Lvsi::Positive, Lvsi::Negative, Lvsi::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Lvsi::Positive => "Positive",
            Lvsi::Negative => "Negative",
            Lvsi::Unknown => "Unknown",
        }
    }

    pub fn from_token(s: &str) -> Option<Lvsi> {
        let t = s.trim();
        Lvsi::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
    }
}

impl fmt::Display for Lvsi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Patient evidence
// ---------------------------------------------------------------------------

/// The fused, structured evidence a case presents to the rule layer.
///
/// This is the single schema rule triggers may reference. Subtype, stage and
/// histology are mandatory (absence is a schema violation); grade, invasion
/// and LVSI admit `Unknown`, which trigger atoms treat as a non-match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientEvidence {
    pub subtype: Option<MolecularSubtype>,
    pub detection_source: DetectionSource,
    /// Confidence in the subtype call, in [0, 1].
    pub subtype_confidence: f64,
    pub stage: Option<FigoStage>,
    pub histology: Option<Histology>,
    pub grade: Grade,
    pub myometrial_invasion: MyoInvasion,
    pub lvsi: Lvsi,
}

impl PatientEvidence {
    /// Fully specified evidence with a DNA-confirmed subtype. The usual
    /// constructor for tests and synthetic grid points.
    pub fn structured(
        subtype: MolecularSubtype,
        stage: StageCode,
        histology: Histology,
        grade: Grade,
        myometrial_invasion: MyoInvasion,
        lvsi: Lvsi,
    ) -> Self {
        PatientEvidence {
            subtype: Some(subtype),
            detection_source: DetectionSource::DnaDirect,
            subtype_confidence: 1.0,
            stage: Some(FigoStage::from_code(stage)),
            histology: Some(histology),
            grade,
            myometrial_invasion,
            lvsi,
        }
    }

    pub fn stage_code(&self) -> Option<StageCode> {
        self.stage.as_ref().map(|s| s.code)
    }

    /// Canonical value tokens of every populated field, used to seed
    /// knowledge-graph retrieval by exact (case-insensitive) label match.
    /// Absent and `Unknown` values contribute nothing; invasion and LVSI
    /// use compound tokens because their bare value names are ambiguous
    /// outside the schema.
    pub fn label_values(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(s) = self.subtype {
            v.push(s.as_str().to_string());
        }
        if let Some(code) = self.stage_code() {
            v.push(code.as_str().to_string());
        }
        if let Some(h) = self.histology {
            v.push(h.as_str().to_string());
        }
        if self.grade != Grade::Unknown {
            v.push(self.grade.as_str().to_string());
        }
        match self.myometrial_invasion {
            MyoInvasion::Superficial => v.push("Superficial-MI".to_string()),
            MyoInvasion::Deep => v.push("Deep-MI".to_string()),
            MyoInvasion::None | MyoInvasion::Unknown => {}
        }
        match self.lvsi {
            Lvsi::Positive => v.push("LVSI-Positive".to_string()),
            Lvsi::Negative => v.push("LVSI-Negative".to_string()),
            Lvsi::Unknown => {}
        }
        v
    }
}

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

/// A single named schema failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks that every mandatory field is present and the confidence is in
/// range. Enum validity is enforced by construction; the residual dynamic
/// checks are presence and numeric range. Returns one violation per
/// offending field.
pub fn assert_schema(ev: &PatientEvidence) -> Result<(), Vec<SchemaViolation>> {
    let mut violations = Vec::new();
    if ev.subtype.is_none() {
        violations.push(SchemaViolation {
            field: "subtype".to_string(),
            message: "molecular subtype is missing".to_string(),
        });
    }
    if ev.stage.is_none() {
        violations.push(SchemaViolation {
            field: "stage".to_string(),
            message: "FIGO stage is missing".to_string(),
        });
    }
    if ev.histology.is_none() {
        violations.push(SchemaViolation {
            field: "histology".to_string(),
            message: "histology is missing".to_string(),
        });
    }
    if !(ev.subtype_confidence.is_finite()
        && (0.0..=1.0).contains(&ev.subtype_confidence))
    {
        violations.push(SchemaViolation {
            field: "subtype_confidence".to_string(),
            message: format!("confidence {} outside [0, 1]", ev.subtype_confidence),
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Cross-field congruence rules the validator enforces on otherwise
/// schema-valid evidence. Each names a combination no admissible case can
/// present, so a hit means the evidence itself cannot be trusted:
///
/// * stage IA is defined by less-than-half myometrial invasion, so deep
///   invasion at IA is contradictory;
/// * serous and undifferentiated carcinomas are high-grade by definition;
/// * LVSI requires invasion to exist;
/// * distant spread (IVB) with no myometrial invasion at all is
///   contradictory.
///
/// The cohort generator conditions its draws on exactly these rules, so
/// generated cohorts never trip them; the adversarial suite does so
/// deliberately.
pub fn congruence_violations(ev: &PatientEvidence) -> Vec<String> {
    let mut v = Vec::new();
    if ev.stage_code() == Some(StageCode::Ia) && ev.myometrial_invasion == MyoInvasion::Deep {
        v.push("stage IA with deep myometrial invasion".to_string());
    }
    if matches!(
        ev.histology,
        Some(Histology::Serous) | Some(Histology::Undifferentiated)
    ) && matches!(ev.grade, Grade::G1 | Grade::G2)
    {
        v.push(format!(
            "{} histology graded {}",
            ev.histology.unwrap(),
            ev.grade
        ));
    }
    if ev.myometrial_invasion == MyoInvasion::None && ev.lvsi == Lvsi::Positive {
        v.push("LVSI positive with no myometrial invasion".to_string());
    }
    if ev.stage_code() == Some(StageCode::Ivb) && ev.myometrial_invasion == MyoInvasion::None {
        v.push("stage IVB with no myometrial invasion".to_string());
    }
    v
}

// ---------------------------------------------------------------------------
// Specialist reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Pathology,
    Molecular,
    Clinical,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Pathology => "pathology",
            ReportKind::Molecular => "molecular",
            ReportKind::Clinical => "clinical",
        }
    }

    /// The field keys a report of this kind may carry.
    pub fn allowed_fields(self) -> &'static [&'static str] {
        match self {
            ReportKind::Pathology => &["histology", "grade", "myometrial_invasion"],
            ReportKind::Molecular => &["molecular_subtype", "detection_source", "confidence"],
            ReportKind::Clinical => &["stage", "lvsi", "deep_mi", "no_mi"],
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One simulated specialist's structured output. Field keys are restricted
/// to the kind's schema at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistReport {
    pub kind: ReportKind,
    pub fields: std::collections::BTreeMap<String, String>,
    /// The specialist's confidence in this report, in [0, 1].
    pub confidence: f64,
    /// Where each finding came from (prototype labels, assay names).
    pub provenance: Vec<String>,
}

impl SpecialistReport {
    pub fn new(
        kind: ReportKind,
        fields: std::collections::BTreeMap<String, String>,
        confidence: f64,
        provenance: Vec<String>,
    ) -> Result<Self, String> {
        for key in fields.keys() {
            if !kind.allowed_fields().contains(&key.as_str()) {
                return Err(format!("field {key:?} not allowed in a {kind} report"));
            }
        }
        if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
            return Err(format!("report confidence {confidence} outside [0, 1]"));
        }
        Ok(SpecialistReport {
            kind,
            fields,
            confidence,
            provenance,
        })
    }
}

// ---------------------------------------------------------------------------
// Raw case records
// ---------------------------------------------------------------------------

/// One line of a case file: the raw, untyped inputs a case presents before
/// perception runs. Serialized as line-delimited JSON, one flat object per
/// case; the key set is a stable external contract. String fields use the
/// canonical value tokens; an empty string or `missing` marks an absent
/// value. `rna_embedding_ref` keys into the sidecar embedding file and is
/// null when a DNA panel is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub pole: String,
    pub mmr: String,
    pub p53: String,
    pub rna_embedding_ref: Option<String>,
    pub stage: String,
    pub histology: String,
    pub grade: String,
    pub mi: String,
    pub lvsi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_label: Option<RiskTier>,
}

// ---------------------------------------------------------------------------
// The finite evidence grid
// ---------------------------------------------------------------------------

/// Enumerates the full cross product of trigger-visible field values:
/// 4 subtypes x 6 stages x 5 histologies x 4 grades x 4 invasion states x
/// 3 LVSI states = 5,760 points. Detection source and confidence are fixed
/// because no trigger reads them. This is the canonical finite domain for
/// rule completeness checking and equivalence testing.
pub fn evidence_grid() -> impl Iterator<Item = PatientEvidence> {
    MolecularSubtype::ALL.into_iter().flat_map(|subtype| {
        StageCode::ALL.into_iter().flat_map(move |stage| {
            Histology::ALL.into_iter().flat_map(move |histology| {
                Grade::ALL.into_iter().flat_map(move |grade| {
                    MyoInvasion::ALL.into_iter().flat_map(move |mi| {
                        Lvsi::ALL.into_iter().map(move |lvsi| {
                            PatientEvidence::structured(
                                subtype, stage, histology, grade, mi, lvsi,
                            )
                        })
                    })
                })
            })
        })
    })
}
