//! Swap grey-zone resolvers and verify the core containment property:
//! hard-trigger decisions are identical under every resolver, because
//! resolvers are simply never consulted when a deterministic rule fires.
//! Only grey-zone cases can differ, and there the validator bounds how
//! far any resolver may stray.
//!
//! Run with: cargo run --example resolver_swap

use riskgov::cohort::{generate_cohort, CohortConfig};
use riskgov::governance::{
    DeterministicTable2Echo, ExternalAdapter, GreyZoneResolver, LinearScorer, DEFAULT_TAU,
};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::perception::PerceptionLibraries;
use riskgov::pipeline::Pipeline;
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let cohort = generate_cohort(
        &CohortConfig {
            n_cases: 300,
            random_seed: 17,
            ..CohortConfig::default()
        },
        &rs,
    )
    .expect("config is valid");
    let libs = PerceptionLibraries::synthetic(cohort.dim);

    let table2 = DeterministicTable2Echo::new(rs.clone());
    let linear = LinearScorer;
    // No endpoint configured: the adapter reports failure on every call
    // and governance falls back deterministically.
    let external = ExternalAdapter::from_env();
    let resolvers: [(&str, &dyn GreyZoneResolver); 3] =
        [("table2", &table2), ("linear", &linear), ("external", &external)];

    let mut per_resolver = Vec::new();
    for (name, resolver) in resolvers {
        let pipeline = Pipeline {
            rs: &rs,
            graph: &graph,
            libs: &libs,
            resolver,
            tau: DEFAULT_TAU,
            top_k: DEFAULT_TOP_K,
        };
        let outcomes = pipeline.run_cohort(&cohort).expect("cohort evaluates");
        println!(
            "{name:<9} grey-zone referrals {:>3}, resolver failures {:>3}",
            outcomes
                .iter()
                .filter(|o| o.decision.confidence < DEFAULT_TAU || o.audit.resolver_failure.is_some())
                .count(),
            outcomes
                .iter()
                .filter(|o| o.audit.resolver_failure.is_some())
                .count()
        );
        per_resolver.push((name, outcomes));
    }

    let (_, baseline) = &per_resolver[0];
    let hard_cases: Vec<usize> = baseline
        .iter()
        .enumerate()
        .filter(|(_, o)| o.evaluation.is_trigger && o.evaluation.trigger_detected)
        .map(|(i, _)| i)
        .collect();
    println!();
    println!("hard-trigger cases in the cohort: {}", hard_cases.len());

    for (name, outcomes) in &per_resolver[1..] {
        for &i in &hard_cases {
            assert_eq!(
                baseline[i].decision, outcomes[i].decision,
                "case {} differs under {}",
                baseline[i].evaluation.case_id, name
            );
        }
        println!("decisions on every hard-trigger case identical under {name}");
    }
}
