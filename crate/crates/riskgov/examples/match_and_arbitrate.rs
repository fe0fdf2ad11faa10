//! Match rules against structured evidence and watch arbitration pick a
//! single winner, with the dominance trace explaining every elimination.
//!
//! The showcase case is deliberately contested: a POLEmut tumor at an
//! advanced stage with aggressive histology matches three hard rules at
//! once, and the subtype rule's priority settles it.
//!
//! Run with: cargo run --example match_and_arbitrate

use riskgov::domain::{Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence, StageCode};
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");

    let contested = PatientEvidence::structured(
        MolecularSubtype::PoleMut,
        StageCode::Iii,
        Histology::Serous,
        Grade::G3,
        MyoInvasion::Deep,
        Lvsi::Positive,
    );
    println!("evidence: POLEmut, stage III, serous, G3, deep invasion, LVSI positive");
    let matched = rs.match_rules(&contested);
    println!("matched:  {:?}", matched.iter().map(|r| r.id.as_str()).collect::<Vec<_>>());

    let result = rs.arbitrate_hard(&contested).expect("hard rules matched");
    println!("winner:   {} (priority {})", result.winner, result.winner_priority);
    println!("outcome:  {:?}", result.outcome);
    for elim in &result.dominance_trace {
        println!("  eliminated {:<14} {:?}", elim.rule, elim.reason);
    }

    // The exception mechanism: early-stage p53abn without invasion is
    // carved out of the blanket p53abn rule by a dedicated exception.
    let carved = PatientEvidence::structured(
        MolecularSubtype::P53Abn,
        StageCode::Ia,
        Histology::Endometrioid,
        Grade::G1,
        MyoInvasion::None,
        Lvsi::Negative,
    );
    println!();
    println!("evidence: p53abn, stage IA, endometrioid, G1, no invasion");
    let result = rs.arbitrate_hard(&carved).expect("hard rules matched");
    println!("winner:   {} -> {:?}", result.winner, result.outcome);
    for elim in &result.dominance_trace {
        println!("  eliminated {:<14} {:?}", elim.rule, elim.reason);
    }

    // No hard match: the soft layer takes over, including the always-on
    // default rule that guarantees a non-empty match set.
    let soft = PatientEvidence::structured(
        MolecularSubtype::Nsmp,
        StageCode::Ia,
        Histology::Endometrioid,
        Grade::G1,
        MyoInvasion::Superficial,
        Lvsi::Negative,
    );
    println!();
    println!("evidence: NSMP, stage IA, endometrioid, G1, superficial invasion");
    println!("hard:     {:?}", rs.arbitrate_hard(&soft).map(|r| r.winner));
    let matched = rs.match_rules(&soft);
    println!("soft set: {:?}", matched.iter().map(|r| r.id.as_str()).collect::<Vec<_>>());
}
