//! Govern two cases end to end and print the audit trail. The first
//! carries a hard trigger, so the rule dictates the label at confidence
//! 1.0 and no resolver runs. The second sits in the grey zone where only
//! the default rule matches: the placeholder's confidence falls below the
//! referral threshold and the resolver is consulted, bounded by the
//! validator.
//!
//! Run with: cargo run --example govern_case

use riskgov::domain::{Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence, StageCode};
use riskgov::governance::{govern, DeterministicTable2Echo, DEFAULT_TAU};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let resolver = DeterministicTable2Echo::new(rs.clone());

    let hard = PatientEvidence::structured(
        MolecularSubtype::P53Abn,
        StageCode::Ib,
        Histology::Serous,
        Grade::G3,
        MyoInvasion::Deep,
        Lvsi::Positive,
    );
    let grey = PatientEvidence::structured(
        MolecularSubtype::Nsmp,
        StageCode::Ii,
        Histology::Endometrioid,
        Grade::G2,
        MyoInvasion::Deep,
        Lvsi::Negative,
    );

    for (name, ev) in [("hard-trigger", &hard), ("grey-zone", &grey)] {
        let packet = graph.query(&rs, ev, DEFAULT_TOP_K);
        let (decision, audit) = govern(name, ev, &packet, &rs, &resolver, DEFAULT_TAU);
        println!("case {name}");
        println!(
            "  decision  {} (confidence {:.2}, path {:?}, rule {})",
            decision.label.as_str(),
            decision.confidence,
            decision.path,
            decision.winning_rule
        );
        for step in &decision.trace {
            println!("  trace     [{}] {}", step.stage, step.detail);
        }
        println!(
            "  audit     verdict {:?}; matched {:?}; chunks {:?}",
            audit.validator_verdict, audit.matched_rule_ids, audit.provenance_chunk_ids
        );
        println!(
            "  pinned to ruleset {} ({})",
            audit.ruleset_version,
            &audit.ruleset_hash[..12]
        );
        println!();
    }
}
