//! Contrast governed decision-making with the post-hoc wrapper baseline.
//! Both comply with hard rules on the final label; the difference is
//! everything else. The wrapper silently overwrites whatever the
//! free-form predictor said and leaves no trace, no provenance, and no
//! verdict. The governed path proposes, validates, and emits a complete
//! audit record even when nothing needed correcting.
//!
//! Run with: cargo run --example posthoc_baseline

use riskgov::domain::{Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence, RiskTier, StageCode};
use riskgov::governance::{govern, posthoc_wrap, DeterministicTable2Echo, DEFAULT_TAU};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let resolver = DeterministicTable2Echo::new(rs.clone());

    // A POLEmut tumor at stage IB: the subtype rule mandates Low no
    // matter what a statistical model might say about the G3 histology.
    let ev = PatientEvidence::structured(
        MolecularSubtype::PoleMut,
        StageCode::Ib,
        Histology::Endometrioid,
        Grade::G3,
        MyoInvasion::Deep,
        Lvsi::Positive,
    );
    let rogue_prediction = RiskTier::High;

    println!("case: POLEmut, stage IB, endometrioid G3, deep invasion, LVSI positive");
    println!("free-form predictor says: {}", rogue_prediction.as_str());
    println!();

    let wrapped = posthoc_wrap(rogue_prediction, &ev, &rs);
    println!("post-hoc wrapper");
    println!("  released label {}", wrapped.as_str());
    println!("  audit trail    none; the override is invisible downstream");
    println!();

    let packet = graph.query(&rs, &ev, DEFAULT_TOP_K);
    let (decision, audit) = govern("contrast-1", &ev, &packet, &rs, &resolver, DEFAULT_TAU);
    println!("governed path");
    println!(
        "  released label {} (confidence {:.2}, path {:?})",
        decision.label.as_str(),
        decision.confidence,
        decision.path
    );
    println!("  verdict        {:?} ({})", audit.validator_verdict, audit.validator_message);
    println!("  winning rule   {}", decision.winning_rule);
    println!("  grounded in    {:?}", audit.provenance_chunk_ids);
    println!("  ruleset        {} ({})", audit.ruleset_version, &audit.ruleset_hash[..12]);

    assert_eq!(wrapped, decision.label, "labels agree; accountability differs");

    // On grey-zone evidence the wrapper has no opinion at all and releases
    // the rogue label untouched; the governed path routes it through the
    // soft table and the validator instead.
    let grey = PatientEvidence::structured(
        MolecularSubtype::Nsmp,
        StageCode::Ib,
        Histology::Endometrioid,
        Grade::G2,
        MyoInvasion::Deep,
        Lvsi::Negative,
    );
    let wrapped = posthoc_wrap(rogue_prediction, &grey, &rs);
    let packet = graph.query(&rs, &grey, DEFAULT_TOP_K);
    let (decision, audit) = govern("contrast-2", &grey, &packet, &rs, &resolver, DEFAULT_TAU);
    println!();
    println!("grey-zone case: NSMP, stage IB, endometrioid G2");
    println!("  wrapper releases  {} (unchecked)", wrapped.as_str());
    println!(
        "  governed releases {} via {:?}, verdict {:?}",
        decision.label.as_str(),
        decision.path,
        audit.validator_verdict
    );
}
