//! Retrieve an evidence packet for one case: the rules its evidence
//! matches, the guideline chunks those rules cite, and the Top-K entities
//! ranked by two-hop relevance from the evidence anchors.
//!
//! Run with: cargo run --example query_packet

use riskgov::domain::{Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence, StageCode};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");

    let ev = PatientEvidence::structured(
        MolecularSubtype::Mmrd,
        StageCode::Ii,
        Histology::Endometrioid,
        Grade::G2,
        MyoInvasion::Superficial,
        Lvsi::Negative,
    );
    println!("evidence: MMRd, stage II, endometrioid, G2, superficial invasion");
    println!();

    let packet = graph.query(&rs, &ev, DEFAULT_TOP_K);
    println!("matched rules      {:?}", packet.matched_rules);
    println!("provenance chunks  {:?}", packet.provenance_chunks);
    println!("context entities   {} (top {} shown)", packet.context_entities.len(), 10);
    for entity in packet.context_entities.iter().take(10) {
        println!("  {:<26} {:<22} relevance {:.4}", entity.entity_id, entity.label, entity.relevance);
    }

    // K caps the context list without touching rule matching or chunk
    // provenance, which are exact.
    let tight = graph.query(&rs, &ev, 3);
    println!();
    println!("same query with K=3:");
    println!("matched rules      {:?}", tight.matched_rules);
    println!("context entities   {}", tight.context_entities.len());
}
