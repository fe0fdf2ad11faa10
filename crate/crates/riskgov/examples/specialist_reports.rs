//! Run the three simulated specialists over raw case records and inspect
//! the fused evidence. The first case carries a DNA panel, so the subtype
//! is called directly with certainty; the second has only an expression
//! embedding and falls back to nearest-centroid matching with a cosine
//! confidence.
//!
//! Run with: cargo run --example specialist_reports

use riskgov::cohort::DEFAULT_EMBED_DIM;
use riskgov::domain::{CaseRecord, SpecialistReport};
use riskgov::embed::EmbeddingStore;
use riskgov::perception::{generate_reports, PerceptionLibraries};

fn show(report: &SpecialistReport) {
    println!("  [{}] confidence {:.3}", report.kind.as_str(), report.confidence);
    for (key, value) in &report.fields {
        println!("    {key:<22} {value}");
    }
    println!("    provenance: {}", report.provenance.join(", "));
}

fn main() {
    let libs = PerceptionLibraries::synthetic(DEFAULT_EMBED_DIM);
    let mut store = EmbeddingStore::new(DEFAULT_EMBED_DIM);

    let dna_case = CaseRecord {
        case_id: "demo-dna".to_string(),
        pole: "WildType".to_string(),
        mmr: "Deficient".to_string(),
        p53: "Normal".to_string(),
        rna_embedding_ref: None,
        stage: "FIGO II".to_string(),
        histology: "Endometrioid".to_string(),
        grade: "G2".to_string(),
        mi: "Deep".to_string(),
        lvsi: "Positive".to_string(),
        oracle_label: None,
    };

    // The RNA-only case stores a slightly perturbed copy of the MMRd
    // centroid, which is what a real expression profile would look like.
    let mut z = libs.molecular.vector("MMRd").expect("centroid exists").clone();
    z[0] += 0.05;
    store.insert("expr-77", z).expect("dimensions agree");
    let rna_case = CaseRecord {
        rna_embedding_ref: Some("expr-77".to_string()),
        pole: "Missing".to_string(),
        mmr: "Missing".to_string(),
        p53: "Missing".to_string(),
        case_id: "demo-rna".to_string(),
        ..dna_case.clone()
    };

    for case in [&dna_case, &rna_case] {
        let out = generate_reports(case, &libs, &store).expect("cases are well-formed");
        println!("case {}", case.case_id);
        show(&out.molecular);
        show(&out.pathology);
        show(&out.clinical);
        let ev = &out.evidence;
        println!(
            "  fused evidence: subtype {:?} via {} (confidence {:.3}), stage {:?}, histology {:?}",
            ev.subtype,
            ev.detection_source.as_str(),
            ev.subtype_confidence,
            ev.stage_code(),
            ev.histology,
        );
        println!();
    }
    println!("embedding store lookups performed: {}", store.lookup_count());
}
