//! Tier-1 specialist simulation: prototype libraries, subtype detection,
//! and the three-channel report fusion that produces structured evidence.
//!
//! Subtype detection is DNA-first. When any biomarker assay is present the
//! panel alone decides, deterministically and with confidence 1.0; the
//! expression-embedding fallback is consulted only when the whole panel is
//! missing. Tests pin this precedence by counting embedding lookups.

use crate::domain::{
    normalize_stage, BiomarkerPanel, CaseRecord, DetectionSource, Grade, Histology, Lvsi,
    MmrStatus, MolecularSubtype, MyoInvasion, P53Status, PatientEvidence, PoleStatus,
    ReportKind, SpecialistReport,
};
use crate::embed::{cosine, normalize, synthetic_unit_vector, EmbedError, EmbeddingStore};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Fixed confidence of the simulated clinical channel: staging and LVSI
/// come from structured registry data, which is reliable but not assayed.
pub const CLINICAL_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("class {0:?} has no training sample in the fold")]
    EmptyClass(String),
    #[error("class {0:?} sums to a zero-magnitude centroid")]
    DegenerateCentroid(String),
    #[error("sample label {0:?} is not a concept of this library")]
    UnknownLabel(String),
    #[error("fold index {0} is out of range")]
    BadFoldIndex(usize),
    #[error("zero-magnitude query vector")]
    ZeroVector,
    #[error("every panel assay is missing")]
    PanelUnavailable,
    #[error("case {case_id}: field {field} has unusable value {value:?}")]
    BadFieldValue {
        case_id: String,
        field: &'static str,
        value: String,
    },
    #[error("case {case_id}: embedding {key:?} not found in the store")]
    MissingEmbedding { case_id: String, key: String },
    #[error("embedding dimension {got} does not match library dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// Prototype libraries
// ---------------------------------------------------------------------------

/// Which specialist a library belongs to. The concept inventory is fixed
/// per source: six morphology concepts for pathology (endometrioid grade
/// 1/2 is a single merged prototype), the four molecular classes for
/// molecular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibrarySource {
    Pathology,
    Molecular,
}

pub const PATHOLOGY_CONCEPTS: [&str; 6] = [
    "ClearCell",
    "Endometrioid G1/G2",
    "Endometrioid G3",
    "Mixed",
    "Serous",
    "Undifferentiated",
];

impl LibrarySource {
    pub fn expected_labels(self) -> Vec<&'static str> {
        match self {
            LibrarySource::Pathology => PATHOLOGY_CONCEPTS.to_vec(),
            LibrarySource::Molecular => {
                MolecularSubtype::ALL.iter().map(|s| s.as_str()).collect()
            }
        }
    }
}

/// Unit-norm class centroids for one specialist and one training fold.
#[derive(Debug, Clone)]
pub struct PrototypeLibrary {
    pub source: LibrarySource,
    pub fold_id: String,
    prototypes: BTreeMap<String, Vec<f64>>,
    dim: usize,
}

impl PrototypeLibrary {
    /// Assembles a library from explicit unit vectors. Every expected
    /// concept must be present and unit-norm within 1e-9.
    pub fn from_unit_vectors(
        source: LibrarySource,
        fold_id: &str,
        prototypes: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, PerceptionError> {
        let expected: BTreeSet<&str> = source.expected_labels().into_iter().collect();
        for label in prototypes.keys() {
            if !expected.contains(label.as_str()) {
                return Err(PerceptionError::UnknownLabel(label.clone()));
            }
        }
        for label in &expected {
            if !prototypes.contains_key(*label) {
                return Err(PerceptionError::EmptyClass(label.to_string()));
            }
        }
        let dim = prototypes.values().next().map(|v| v.len()).unwrap_or(0);
        for (label, v) in &prototypes {
            if v.len() != dim {
                return Err(PerceptionError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            let n = crate::embed::norm(v);
            if (n - 1.0).abs() > 1e-9 {
                return Err(PerceptionError::DegenerateCentroid(label.clone()));
            }
        }
        Ok(PrototypeLibrary {
            source,
            fold_id: fold_id.to_string(),
            prototypes,
            dim,
        })
    }

    /// Library whose prototypes come from the deterministic synthetic
    /// provider. The distinct keys give near-orthogonal directions, which
    /// is what makes noise-free recovery exact in the simulated pipeline.
    pub fn synthetic(source: LibrarySource, dim: usize) -> Self {
        let prefix = match source {
            LibrarySource::Pathology => "pathology-prototype",
            LibrarySource::Molecular => "molecular-centroid",
        };
        let prototypes = source
            .expected_labels()
            .into_iter()
            .map(|label| {
                (
                    label.to_string(),
                    synthetic_unit_vector(&format!("{prefix}:{label}"), dim),
                )
            })
            .collect();
        PrototypeLibrary::from_unit_vectors(source, "synthetic", prototypes)
            .expect("synthetic prototypes are unit vectors by construction")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> Vec<&str> {
        self.prototypes.keys().map(|s| s.as_str()).collect()
    }

    pub fn vector(&self, label: &str) -> Option<&Vec<f64>> {
        self.prototypes.get(label)
    }

    /// Content digest over labels and exact vector bits; byte-stable across
    /// runs, so leakage tests can assert the library ignores held-out data.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.fold_id.as_bytes());
        for (label, v) in &self.prototypes {
            h.update(label.as_bytes());
            for x in v {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Normalized-sum class centroids over the training fold only.
///
/// `samples` are (label, embedding) pairs; `fold` is the set of sample
/// indices the centroid may see. Indices outside the fold never influence
/// the result. Each expected concept needs at least one fold sample, and a
/// class whose embeddings cancel (for example two antipodal vectors) is
/// degenerate.
pub fn build_centroids(
    samples: &[(String, Vec<f64>)],
    fold: &BTreeSet<usize>,
    source: LibrarySource,
    fold_id: &str,
) -> Result<PrototypeLibrary, PerceptionError> {
    for &i in fold {
        if i >= samples.len() {
            return Err(PerceptionError::BadFoldIndex(i));
        }
    }
    let expected = source.expected_labels();
    let expected_set: BTreeSet<&str> = expected.iter().copied().collect();
    for &i in fold {
        let label = samples[i].0.as_str();
        if !expected_set.contains(label) {
            return Err(PerceptionError::UnknownLabel(label.to_string()));
        }
    }

    let mut prototypes = BTreeMap::new();
    for label in expected {
        let members: Vec<&Vec<f64>> = fold
            .iter()
            .filter(|&&i| samples[i].0 == label)
            .map(|&i| &samples[i].1)
            .collect();
        if members.is_empty() {
            return Err(PerceptionError::EmptyClass(label.to_string()));
        }
        let dim = members[0].len();
        let mut sum = vec![0.0f64; dim];
        for m in &members {
            if m.len() != dim {
                return Err(PerceptionError::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            for (s, x) in sum.iter_mut().zip(m.iter()) {
                *s += x;
            }
        }
        let centroid = normalize(&sum)
            .map_err(|_| PerceptionError::DegenerateCentroid(label.to_string()))?;
        prototypes.insert(label.to_string(), centroid);
    }
    PrototypeLibrary::from_unit_vectors(source, fold_id, prototypes)
}

// ---------------------------------------------------------------------------
// Prototype matching
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeHit {
    pub label: String,
    pub score: f64,
}

/// Top-k prototypes by cosine similarity. Exact score ties break on
/// ascending label byte order, so rankings are reproducible.
pub fn match_prototypes(
    z: &[f64],
    lib: &PrototypeLibrary,
    k: usize,
) -> Result<Vec<PrototypeHit>, PerceptionError> {
    if z.len() != lib.dim() {
        return Err(PerceptionError::DimensionMismatch {
            expected: lib.dim(),
            got: z.len(),
        });
    }
    let mut hits = Vec::with_capacity(lib.prototypes.len());
    for (label, proto) in &lib.prototypes {
        let score = cosine(z, proto).map_err(|e| match e {
            EmbedError::ZeroVector => PerceptionError::ZeroVector,
            _ => PerceptionError::ZeroVector,
        })?;
        hits.push(PrototypeHit {
            label: label.clone(),
            score,
        });
    }
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.label.cmp(&b.label))
    });
    hits.truncate(k);
    Ok(hits)
}

// ---------------------------------------------------------------------------
// Subtype detection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubtypeCall {
    pub subtype: MolecularSubtype,
    pub detection_source: DetectionSource,
    pub confidence: f64,
}

/// The diagnostic dominance cascade over the DNA panel: POLE mutation,
/// then mismatch-repair deficiency, then abnormal p53, then NSMP as the
/// residual. Only exact positive results fire a branch; a missing assay
/// falls through to the next. Errors when every assay is missing.
pub fn subtype_from_biomarkers(panel: &BiomarkerPanel) -> Result<SubtypeCall, PerceptionError> {
    if !panel.is_available() {
        return Err(PerceptionError::PanelUnavailable);
    }
    let subtype = if panel.pole == PoleStatus::Mutated {
        MolecularSubtype::PoleMut
    } else if panel.mmr == MmrStatus::Deficient {
        MolecularSubtype::Mmrd
    } else if panel.p53 == P53Status::Abnormal {
        MolecularSubtype::P53Abn
    } else {
        MolecularSubtype::Nsmp
    };
    Ok(SubtypeCall {
        subtype,
        detection_source: DetectionSource::DnaDirect,
        confidence: 1.0,
    })
}

/// Nearest molecular centroid by cosine, ties broken by label order.
/// Confidence is the winning cosine clamped into [0, 1].
pub fn subtype_from_embedding(
    z: &[f64],
    lib: &PrototypeLibrary,
) -> Result<SubtypeCall, PerceptionError> {
    assert_eq!(
        lib.source,
        LibrarySource::Molecular,
        "subtype detection needs the molecular library"
    );
    let hits = match_prototypes(z, lib, 1)?;
    let top = &hits[0];
    let subtype = MolecularSubtype::from_token(&top.label)
        .expect("molecular library labels are subtype tokens");
    Ok(SubtypeCall {
        subtype,
        detection_source: DetectionSource::RnaFallback,
        confidence: top.score.clamp(0.0, 1.0),
    })
}

// ---------------------------------------------------------------------------
// Report generation and fusion
// ---------------------------------------------------------------------------

/// The six-concept morphology vocabulary, from structured histology and
/// grade. Endometrioid splits on grade 3; grades 1, 2 and unknown share
/// the merged prototype.
pub fn morphology_concept(histology: Histology, grade: Grade) -> &'static str {
    match histology {
        Histology::Serous => "Serous",
        Histology::ClearCell => "ClearCell",
        Histology::Undifferentiated => "Undifferentiated",
        Histology::Mixed => "Mixed",
        Histology::Endometrioid => match grade {
            Grade::G3 => "Endometrioid G3",
            _ => "Endometrioid G1/G2",
        },
    }
}

#[derive(Debug, Clone)]
pub struct PerceptionOutput {
    pub pathology: SpecialistReport,
    pub molecular: SpecialistReport,
    pub clinical: SpecialistReport,
    pub evidence: PatientEvidence,
}

pub struct PerceptionLibraries {
    pub molecular: PrototypeLibrary,
    pub pathology: PrototypeLibrary,
}

impl PerceptionLibraries {
    pub fn synthetic(dim: usize) -> Self {
        PerceptionLibraries {
            molecular: PrototypeLibrary::synthetic(LibrarySource::Molecular, dim),
            pathology: PrototypeLibrary::synthetic(LibrarySource::Pathology, dim),
        }
    }
}

fn is_absent(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t.eq_ignore_ascii_case("missing")
}

fn bad_field(case_id: &str, field: &'static str, value: &str) -> PerceptionError {
    PerceptionError::BadFieldValue {
        case_id: case_id.to_string(),
        field,
        value: value.to_string(),
    }
}

/// Runs the three simulated specialists over one raw case and fuses their
/// reports into structured evidence.
///
/// * The molecular channel is authoritative for subtype, detection source
///   and confidence. DNA panel first; expression embedding only as
///   fallback; neither leaves subtype absent with detection `Unknown`.
/// * The pathology channel is authoritative for histology, grade and
///   myometrial invasion. It embeds the case's morphology, matches it
///   against the prototype library, and maps the top concept back to
///   fields. The merged grade 1/2 prototype yields grade `Unknown` unless
///   the structured record supplies a grade.
/// * The clinical channel is authoritative for stage and LVSI and derives
///   the modifier flags the reports expose.
pub fn generate_reports(
    case: &CaseRecord,
    libs: &PerceptionLibraries,
    store: &EmbeddingStore,
) -> Result<PerceptionOutput, PerceptionError> {
    let case_id = case.case_id.as_str();

    // Molecular channel.
    let panel = BiomarkerPanel {
        pole: PoleStatus::from_token(&case.pole)
            .ok_or_else(|| bad_field(case_id, "pole", &case.pole))?,
        mmr: MmrStatus::from_token(&case.mmr)
            .ok_or_else(|| bad_field(case_id, "mmr", &case.mmr))?,
        p53: P53Status::from_token(&case.p53)
            .ok_or_else(|| bad_field(case_id, "p53", &case.p53))?,
    };
    let (call, mol_provenance) = if panel.is_available() {
        let call = subtype_from_biomarkers(&panel)?;
        (
            Some(call),
            vec![format!(
                "dna panel: pole={:?} mmr={:?} p53={:?}",
                panel.pole, panel.mmr, panel.p53
            )],
        )
    } else if let Some(key) = &case.rna_embedding_ref {
        let z = store.get(key).ok_or_else(|| PerceptionError::MissingEmbedding {
            case_id: case_id.to_string(),
            key: key.clone(),
        })?;
        let call = subtype_from_embedding(z, &libs.molecular)?;
        (
            Some(call),
            vec![format!("expression embedding {key:?} vs molecular centroids")],
        )
    } else {
        (None, vec!["no panel and no expression embedding".to_string()])
    };
    let mut mol_fields = BTreeMap::new();
    if let Some(c) = call {
        mol_fields.insert(
            "molecular_subtype".to_string(),
            c.subtype.as_str().to_string(),
        );
        mol_fields.insert(
            "detection_source".to_string(),
            c.detection_source.as_str().to_string(),
        );
        mol_fields.insert("confidence".to_string(), format!("{}", c.confidence));
    }
    let molecular = SpecialistReport::new(
        ReportKind::Molecular,
        mol_fields,
        call.map(|c| c.confidence).unwrap_or(0.0),
        mol_provenance,
    )
    .expect("molecular report fields are schema-valid by construction");

    // Pathology channel.
    let histology = if is_absent(&case.histology) {
        None
    } else {
        Some(
            Histology::from_token(&case.histology)
                .ok_or_else(|| bad_field(case_id, "histology", &case.histology))?,
        )
    };
    let structured_grade = if is_absent(&case.grade) {
        Grade::Unknown
    } else {
        Grade::from_token(&case.grade).ok_or_else(|| bad_field(case_id, "grade", &case.grade))?
    };
    let mi = if is_absent(&case.mi) {
        MyoInvasion::Unknown
    } else {
        MyoInvasion::from_token(&case.mi).ok_or_else(|| bad_field(case_id, "mi", &case.mi))?
    };

    let mut path_fields = BTreeMap::new();
    let (fused_histology, fused_grade, path_confidence, path_provenance);
    match histology {
        Some(h) => {
            let concept = morphology_concept(h, structured_grade);
            let z = libs
                .pathology
                .vector(concept)
                .expect("morphology concepts cover the pathology library")
                .clone();
            let hits = match_prototypes(&z, &libs.pathology, 3)?;
            let top = &hits[0];
            let top_histology = match top.label.as_str() {
                "Serous" => Histology::Serous,
                "ClearCell" => Histology::ClearCell,
                "Undifferentiated" => Histology::Undifferentiated,
                "Mixed" => Histology::Mixed,
                _ => Histology::Endometrioid,
            };
            let grade = if structured_grade != Grade::Unknown {
                structured_grade
            } else if top.label == "Endometrioid G3" {
                Grade::G3
            } else {
                Grade::Unknown
            };
            fused_histology = Some(top_histology);
            fused_grade = grade;
            path_confidence = top.score.clamp(0.0, 1.0);
            path_provenance = hits
                .iter()
                .map(|hit| format!("prototype {} score {:.4}", hit.label, hit.score))
                .collect::<Vec<_>>();
            path_fields.insert("histology".to_string(), top_histology.as_str().to_string());
            path_fields.insert("grade".to_string(), grade.as_str().to_string());
        }
        None => {
            fused_histology = None;
            fused_grade = structured_grade;
            path_confidence = 0.0;
            path_provenance = vec!["histology missing, prototype matching skipped".to_string()];
            path_fields.insert("grade".to_string(), structured_grade.as_str().to_string());
        }
    }
    path_fields.insert("myometrial_invasion".to_string(), mi.as_str().to_string());
    let pathology = SpecialistReport::new(
        ReportKind::Pathology,
        path_fields,
        path_confidence,
        path_provenance,
    )
    .expect("pathology report fields are schema-valid by construction");

    // Clinical channel.
    let stage = if is_absent(&case.stage) {
        None
    } else {
        Some(
            normalize_stage(&case.stage)
                .map_err(|_| bad_field(case_id, "stage", &case.stage))?,
        )
    };
    let lvsi = if is_absent(&case.lvsi) {
        Lvsi::Unknown
    } else {
        Lvsi::from_token(&case.lvsi).ok_or_else(|| bad_field(case_id, "lvsi", &case.lvsi))?
    };
    let mut clin_fields = BTreeMap::new();
    if let Some(s) = &stage {
        clin_fields.insert("stage".to_string(), s.code.as_str().to_string());
    }
    clin_fields.insert("lvsi".to_string(), lvsi.as_str().to_string());
    clin_fields.insert(
        "deep_mi".to_string(),
        (mi == MyoInvasion::Deep).to_string(),
    );
    clin_fields.insert("no_mi".to_string(), (mi == MyoInvasion::None).to_string());
    let clinical = SpecialistReport::new(
        ReportKind::Clinical,
        clin_fields,
        CLINICAL_CONFIDENCE,
        vec![format!("registry stage record {:?}", case.stage)],
    )
    .expect("clinical report fields are schema-valid by construction");

    let evidence = PatientEvidence {
        subtype: call.map(|c| c.subtype),
        detection_source: call
            .map(|c| c.detection_source)
            .unwrap_or(DetectionSource::Unknown),
        subtype_confidence: call.map(|c| c.confidence).unwrap_or(0.0),
        stage,
        histology: fused_histology,
        grade: fused_grade,
        myometrial_invasion: mi,
        lvsi,
    };

    Ok(PerceptionOutput {
        pathology,
        molecular,
        clinical,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::StageCode;

    const DIM: usize = 64;

    fn lib() -> PerceptionLibraries {
        PerceptionLibraries::synthetic(DIM)
    }

    #[test]
    fn biomarker_truth_table_is_exhaustive() {
        let poles = [PoleStatus::Mutated, PoleStatus::WildType, PoleStatus::Missing];
        let mmrs = [MmrStatus::Deficient, MmrStatus::Proficient, MmrStatus::Missing];
        let p53s = [P53Status::Abnormal, P53Status::Normal, P53Status::Missing];
        let mut checked = 0;
        for pole in poles {
            for mmr in mmrs {
                for p53 in p53s {
                    let panel = BiomarkerPanel { pole, mmr, p53 };
                    let result = subtype_from_biomarkers(&panel);
                    if !panel.is_available() {
                        assert!(matches!(result, Err(PerceptionError::PanelUnavailable)));
                        checked += 1;
                        continue;
                    }
                    let call = result.unwrap();
                    let expected = if pole == PoleStatus::Mutated {
                        MolecularSubtype::PoleMut
                    } else if mmr == MmrStatus::Deficient {
                        MolecularSubtype::Mmrd
                    } else if p53 == P53Status::Abnormal {
                        MolecularSubtype::P53Abn
                    } else {
                        MolecularSubtype::Nsmp
                    };
                    assert_eq!(call.subtype, expected, "panel {panel:?}");
                    assert_eq!(call.detection_source, DetectionSource::DnaDirect);
                    assert_eq!(call.confidence, 1.0);
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 27);
    }

    #[test]
    fn embedding_recovers_each_subtype_at_its_centroid() {
        let libs = lib();
        for subtype in MolecularSubtype::ALL {
            let z = libs.molecular.vector(subtype.as_str()).unwrap().clone();
            let call = subtype_from_embedding(&z, &libs.molecular).unwrap();
            assert_eq!(call.subtype, subtype);
            assert_eq!(call.detection_source, DetectionSource::RnaFallback);
            assert!((call.confidence - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn equidistant_embedding_breaks_tie_by_label_order() {
        // One-hot centroids make the tie exact in floating point.
        let mut protos = BTreeMap::new();
        for (i, subtype) in MolecularSubtype::ALL.iter().enumerate() {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            protos.insert(subtype.as_str().to_string(), v);
        }
        let lib =
            PrototypeLibrary::from_unit_vectors(LibrarySource::Molecular, "test", protos).unwrap();
        // Equidistant between POLEmut (dim 0) and MMRd (dim 1): byte order
        // puts "MMRd" before "POLEmut".
        let z = vec![0.5f64.sqrt(), 0.5f64.sqrt(), 0.0, 0.0];
        let call = subtype_from_embedding(&z, &lib).unwrap();
        assert_eq!(call.subtype, MolecularSubtype::Mmrd);
    }

    #[test]
    fn match_prototypes_orders_and_caps() {
        let libs = lib();
        let z = libs.pathology.vector("Serous").unwrap().clone();
        let hits = match_prototypes(&z, &libs.pathology, 3).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].label, "Serous");
        assert!(hits[0].score > hits[1].score);
        assert!(hits[1].score >= hits[2].score);

        let all = match_prototypes(&z, &libs.pathology, 100).unwrap();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn match_prototypes_rejects_zero_and_mismatched_input() {
        let libs = lib();
        assert!(matches!(
            match_prototypes(&vec![0.0; DIM], &libs.pathology, 1),
            Err(PerceptionError::ZeroVector)
        ));
        assert!(matches!(
            match_prototypes(&vec![1.0; DIM + 1], &libs.pathology, 1),
            Err(PerceptionError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn centroids_match_mean_then_normalize_oracle() {
        let concepts = LibrarySource::Molecular.expected_labels();
        let mut samples = Vec::new();
        for (ci, concept) in concepts.iter().enumerate() {
            for j in 0..5 {
                let mut v = synthetic_unit_vector(&format!("sample:{concept}:{j}"), 8);
                // Bias each class so centroids are distinct.
                v[ci % 8] += 2.0;
                samples.push((concept.to_string(), v));
            }
        }
        let fold: BTreeSet<usize> = (0..samples.len()).collect();
        let built = build_centroids(&samples, &fold, LibrarySource::Molecular, "f0").unwrap();

        for concept in concepts {
            let members: Vec<&Vec<f64>> = samples
                .iter()
                .filter(|(l, _)| l == concept)
                .map(|(_, v)| v)
                .collect();
            let n = members.len() as f64;
            let mut mean = vec![0.0; 8];
            for m in members {
                for (s, x) in mean.iter_mut().zip(m) {
                    *s += x / n;
                }
            }
            let oracle = normalize(&mean).unwrap();
            let got = built.vector(concept).unwrap();
            for (a, b) in oracle.iter().zip(got) {
                assert!((a - b).abs() < 1e-12, "{concept}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_class_and_degenerate_centroid_are_errors() {
        // Fold sees no ClearCell sample.
        let samples: Vec<(String, Vec<f64>)> = PATHOLOGY_CONCEPTS
            .iter()
            .filter(|c| **c != "ClearCell")
            .map(|c| (c.to_string(), synthetic_unit_vector(c, 8)))
            .collect();
        let fold: BTreeSet<usize> = (0..samples.len()).collect();
        match build_centroids(&samples, &fold, LibrarySource::Pathology, "f0") {
            Err(PerceptionError::EmptyClass(c)) => assert_eq!(c, "ClearCell"),
            other => panic!("expected EmptyClass, got {other:?}"),
        }

        // Two antipodal samples cancel to a zero sum.
        let mut samples: Vec<(String, Vec<f64>)> = MolecularSubtype::ALL
            .iter()
            .map(|s| (s.as_str().to_string(), synthetic_unit_vector(s.as_str(), 8)))
            .collect();
        let v = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let anti: Vec<f64> = v.iter().map(|x| -x).collect();
        samples.push(("NSMP".to_string(), v));
        samples.push(("NSMP".to_string(), anti));
        // Restrict NSMP to just the antipodal pair.
        let fold: BTreeSet<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, (l, _))| l != "NSMP")
            .map(|(i, _)| i)
            .chain([samples.len() - 2, samples.len() - 1])
            .collect();
        match build_centroids(&samples, &fold, LibrarySource::Molecular, "f0") {
            Err(PerceptionError::DegenerateCentroid(c)) => assert_eq!(c, "NSMP"),
            other => panic!("expected DegenerateCentroid, got {other:?}"),
        }
    }

    #[test]
    fn held_out_samples_never_influence_centroids() {
        let mut samples: Vec<(String, Vec<f64>)> = Vec::new();
        for subtype in MolecularSubtype::ALL {
            for j in 0..4 {
                samples.push((
                    subtype.as_str().to_string(),
                    synthetic_unit_vector(&format!("{subtype}:{j}"), 8),
                ));
            }
        }
        let fold: BTreeSet<usize> = (0..samples.len()).step_by(2).collect();
        let before = build_centroids(&samples, &fold, LibrarySource::Molecular, "f0")
            .unwrap()
            .digest();

        // Mutate and shuffle everything outside the fold.
        for (i, (_, v)) in samples.iter_mut().enumerate() {
            if !fold.contains(&i) {
                v.iter_mut().for_each(|x| *x = -*x * 3.0);
            }
        }
        let after = build_centroids(&samples, &fold, LibrarySource::Molecular, "f0")
            .unwrap()
            .digest();
        assert_eq!(before, after);
    }

    fn dna_case(subtype: MolecularSubtype) -> CaseRecord {
        let (pole, mmr, p53) = match subtype {
            MolecularSubtype::PoleMut => ("Mutated", "Proficient", "Normal"),
            MolecularSubtype::Mmrd => ("WildType", "Deficient", "Normal"),
            MolecularSubtype::P53Abn => ("WildType", "Proficient", "Abnormal"),
            MolecularSubtype::Nsmp => ("WildType", "Proficient", "Normal"),
        };
        CaseRecord {
            case_id: format!("case-{subtype}"),
            pole: pole.to_string(),
            mmr: mmr.to_string(),
            p53: p53.to_string(),
            rna_embedding_ref: None,
            stage: "Stage IB".to_string(),
            histology: "Endometrioid".to_string(),
            grade: "G2".to_string(),
            mi: "Superficial".to_string(),
            lvsi: "Negative".to_string(),
            oracle_label: None,
        }
    }

    #[test]
    fn dna_path_reconstructs_structured_fields_without_embedding_lookups() {
        let libs = lib();
        let store = EmbeddingStore::new(DIM);
        let out = generate_reports(&dna_case(MolecularSubtype::Mmrd), &libs, &store).unwrap();

        assert_eq!(store.lookup_count(), 0);
        let ev = &out.evidence;
        assert_eq!(ev.subtype, Some(MolecularSubtype::Mmrd));
        assert_eq!(ev.detection_source, DetectionSource::DnaDirect);
        assert_eq!(ev.subtype_confidence, 1.0);
        assert_eq!(ev.stage_code(), Some(StageCode::Ib));
        assert_eq!(ev.histology, Some(Histology::Endometrioid));
        assert_eq!(ev.grade, Grade::G2);
        assert_eq!(ev.myometrial_invasion, MyoInvasion::Superficial);
        assert_eq!(ev.lvsi, Lvsi::Negative);

        assert_eq!(
            out.molecular.fields.get("molecular_subtype").unwrap(),
            "MMRd"
        );
        assert_eq!(out.clinical.fields.get("stage").unwrap(), "IB");
        assert_eq!(out.clinical.fields.get("deep_mi").unwrap(), "false");
        assert_eq!(out.clinical.confidence, CLINICAL_CONFIDENCE);
        assert_eq!(out.pathology.fields.get("histology").unwrap(), "Endometrioid");
    }

    #[test]
    fn rna_fallback_path_uses_the_store() {
        let libs = lib();
        let mut store = EmbeddingStore::new(DIM);
        store
            .insert(
                "emb-1",
                libs.molecular
                    .vector(MolecularSubtype::P53Abn.as_str())
                    .unwrap()
                    .clone(),
            )
            .unwrap();
        let mut case = dna_case(MolecularSubtype::P53Abn);
        case.pole = "Missing".to_string();
        case.mmr = "Missing".to_string();
        case.p53 = "Missing".to_string();
        case.rna_embedding_ref = Some("emb-1".to_string());

        let out = generate_reports(&case, &libs, &store).unwrap();
        assert!(store.lookup_count() > 0);
        assert_eq!(out.evidence.subtype, Some(MolecularSubtype::P53Abn));
        assert_eq!(out.evidence.detection_source, DetectionSource::RnaFallback);
        assert!(out.evidence.subtype_confidence > 0.99);
    }

    #[test]
    fn no_panel_and_no_embedding_degrades_to_absent_subtype() {
        let libs = lib();
        let store = EmbeddingStore::new(DIM);
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.pole = "Missing".to_string();
        case.mmr = "Missing".to_string();
        case.p53 = "Missing".to_string();
        case.rna_embedding_ref = None;

        let out = generate_reports(&case, &libs, &store).unwrap();
        assert_eq!(out.evidence.subtype, None);
        assert_eq!(out.evidence.detection_source, DetectionSource::Unknown);
        assert_eq!(out.evidence.subtype_confidence, 0.0);
        assert!(crate::domain::assert_schema(&out.evidence).is_err());
    }

    #[test]
    fn merged_prototype_grade_mapping() {
        let libs = lib();
        let store = EmbeddingStore::new(DIM);

        // Structured grade absent: the merged concept cannot pin one.
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.grade = String::new();
        let out = generate_reports(&case, &libs, &store).unwrap();
        assert_eq!(out.evidence.grade, Grade::Unknown);
        assert_eq!(out.evidence.histology, Some(Histology::Endometrioid));

        // Structured grade present: it is used.
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.grade = "G1".to_string();
        let out = generate_reports(&case, &libs, &store).unwrap();
        assert_eq!(out.evidence.grade, Grade::G1);

        // Grade 3 endometrioid resolves through its own prototype.
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.grade = "G3".to_string();
        let out = generate_reports(&case, &libs, &store).unwrap();
        assert_eq!(out.evidence.grade, Grade::G3);
        assert!(out
            .pathology
            .provenance
            .iter()
            .any(|p| p.contains("Endometrioid G3")));
    }

    #[test]
    fn missing_fields_flow_through_as_absent_or_unknown() {
        let libs = lib();
        let store = EmbeddingStore::new(DIM);
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.stage = "missing".to_string();
        case.histology = String::new();
        case.mi = String::new();
        case.lvsi = "missing".to_string();

        let out = generate_reports(&case, &libs, &store).unwrap();
        assert_eq!(out.evidence.stage, None);
        assert_eq!(out.evidence.histology, None);
        assert_eq!(out.evidence.myometrial_invasion, MyoInvasion::Unknown);
        assert_eq!(out.evidence.lvsi, Lvsi::Unknown);
        assert_eq!(out.pathology.confidence, 0.0);
    }

    #[test]
    fn malformed_field_values_are_named_errors() {
        let libs = lib();
        let store = EmbeddingStore::new(DIM);
        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.stage = "IIIA".to_string();
        match generate_reports(&case, &libs, &store) {
            Err(PerceptionError::BadFieldValue { field, .. }) => assert_eq!(field, "stage"),
            other => panic!("expected BadFieldValue, got {other:?}"),
        }

        let mut case = dna_case(MolecularSubtype::Nsmp);
        case.pole = "positive".to_string();
        match generate_reports(&case, &libs, &store) {
            Err(PerceptionError::BadFieldValue { field, .. }) => assert_eq!(field, "pole"),
            other => panic!("expected BadFieldValue, got {other:?}"),
        }
    }
}
