//! Run the 26-case adversarial suite against the validator: forged
//! decisions that contradict mandated labels, cases with required fields
//! stripped, clinically impossible field combinations, and forgeries
//! sitting exactly on rule boundaries. Interception means the validator
//! did not wave the case through.
//!
//! Run with: cargo run --example adversarial_stress

use riskgov::cohort::DEFAULT_EMBED_DIM;
use riskgov::governance::{DeterministicTable2Echo, DEFAULT_TAU};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::perception::PerceptionLibraries;
use riskgov::pipeline::Pipeline;
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let libs = PerceptionLibraries::synthetic(DEFAULT_EMBED_DIM);
    let resolver = DeterministicTable2Echo::new(rs.clone());
    let pipeline = Pipeline {
        rs: &rs,
        graph: &graph,
        libs: &libs,
        resolver: &resolver,
        tau: DEFAULT_TAU,
        top_k: DEFAULT_TOP_K,
    };

    let rows = pipeline.stress_adversarial().expect("suite runs");
    println!("{:<12} {:<24} {:<10} {:<17} detail", "case", "tag", "verdict", "final");
    for row in &rows {
        println!(
            "{:<12} {:<24} {:<10} {:<17} {}",
            row.case_id,
            row.tag,
            format!("{:?}", row.verdict),
            row.final_label.as_str(),
            row.detail
        );
    }
    let intercepted = rows.iter().filter(|r| r.intercepted).count();
    println!();
    println!("intercepted {intercepted}/{}", rows.len());
    assert_eq!(intercepted, rows.len(), "nothing slips past the validator");
}
