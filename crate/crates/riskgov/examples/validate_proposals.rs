//! Feed hand-crafted proposals to the validator and watch each verdict
//! fire. The validator re-derives the expected label from rules and
//! evidence alone, so it accepts exact agreement, allows a resolver one
//! tier of discretion on grey-zone cases, rebuilds anything else, and
//! rejects evidence that fails schema or congruence checks outright.
//!
//! Run with: cargo run --example validate_proposals

use riskgov::domain::{Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence, RiskTier, StageCode};
use riskgov::governance::{validate, Decision, DecisionPath};
use riskgov::ruleset::parse_ruleset;

fn proposal(label: RiskTier, confidence: f64, path: DecisionPath, rule: &str) -> Decision {
    Decision {
        label,
        confidence,
        path,
        winning_rule: rule.to_string(),
        trace: Vec::new(),
    }
}

fn show(name: &str, proposal: &Decision, ev: &PatientEvidence) {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let (decision, report) = validate(proposal, ev, &rs);
    println!("{name}");
    println!("  proposed {} via {:?}", proposal.label.as_str(), proposal.path);
    println!("  verdict  {:?}: {}", report.verdict, report.reason);
    println!("  released {} (confidence {:.2})", decision.label.as_str(), decision.confidence);
    println!();
}

fn main() {
    let hard = PatientEvidence::structured(
        MolecularSubtype::P53Abn,
        StageCode::Ii,
        Histology::Serous,
        Grade::G3,
        MyoInvasion::Deep,
        Lvsi::Positive,
    );
    show(
        "hard case, agreeing proposal",
        &proposal(RiskTier::High, 1.0, DecisionPath::Hard, "R2_P53"),
        &hard,
    );
    show(
        "hard case, forged label",
        &proposal(RiskTier::Low, 1.0, DecisionPath::Hard, "R2_P53"),
        &hard,
    );

    let grey = PatientEvidence::structured(
        MolecularSubtype::Nsmp,
        StageCode::Ii,
        Histology::Endometrioid,
        Grade::G2,
        MyoInvasion::Deep,
        Lvsi::Negative,
    );
    show(
        "grey zone, chair label one tier from the placeholder",
        &proposal(RiskTier::HighIntermediate, 0.8, DecisionPath::SoftChair, "S5_DEFAULT"),
        &grey,
    );
    show(
        "grey zone, chair label two tiers from the placeholder",
        &proposal(RiskTier::High, 0.8, DecisionPath::SoftChair, "S5_DEFAULT"),
        &grey,
    );

    let mut broken = hard.clone();
    broken.stage = None;
    show(
        "stage stripped from the evidence",
        &proposal(RiskTier::High, 1.0, DecisionPath::Hard, "R2_P53"),
        &broken,
    );

    let mut impossible = hard.clone();
    impossible.stage = Some(riskgov::domain::FigoStage::from_code(StageCode::Ia));
    impossible.myometrial_invasion = MyoInvasion::Deep;
    show(
        "impossible combination: stage IA with deep invasion",
        &proposal(RiskTier::High, 1.0, DecisionPath::Hard, "R2_P53"),
        &impossible,
    );
}
