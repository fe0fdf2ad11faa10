//! Parse the built-in rule file and walk what came out: layers,
//! priorities, outcomes, the conflict annotations, and the content hash
//! that pins every audit record to an exact ruleset revision.
//!
//! Run with: cargo run --example parse_rules

use riskgov::ruleset::{parse_ruleset, RuleOutcome, RulePath};

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    println!("version      {}", rs.version);
    println!("source hash  {}", rs.source_hash);
    println!("rules        {}", rs.rules().len());
    println!();
    println!("{:<14} {:>4}  {:<5} {:<18} conflicts", "id", "prio", "layer", "outcome");
    for rule in rs.rules() {
        let layer = match rule.path {
            RulePath::Hard => "hard",
            RulePath::Soft => "soft",
        };
        let outcome = match rule.outcome {
            RuleOutcome::Tier(t) => t.as_str(),
            RuleOutcome::ChairReferral => "ChairReferral",
        };
        let mut conflicts = Vec::new();
        if let Some(target) = &rule.exception_of {
            conflicts.push(format!("exception of {target}"));
        }
        for target in &rule.overrides {
            conflicts.push(format!("overrides {target}"));
        }
        println!(
            "{:<14} {:>4}  {:<5} {:<18} {}",
            rule.id,
            rule.priority,
            layer,
            outcome,
            conflicts.join(", ")
        );
    }
    println!();
    println!(
        "grounding:   every rule cites at least one corpus chunk, e.g. {} -> {:?}",
        rs.rules()[0].id,
        rs.rules()[0].derived_from
    );
}
