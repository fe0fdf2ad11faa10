//! Build the guideline graph from the built-in corpus and rule file, then
//! inspect what construction produced: chunking, entity dedup, the
//! evidence-weighted reference edges, the rule layer, and the digest that
//! pins the artifact.
//!
//! Run with: cargo run --example build_graph

use riskgov::kg::{build_graph, RuleEdgeKind, DEFAULT_DELTA_R};
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");

    println!("digest            {}", graph.digest());
    println!("documents         {}", graph.docs().len());
    println!("chunks            {}", graph.chunks().len());
    println!("entities          {}", graph.entities().len());
    println!("merged aliases    {}", graph.merged_aliases().len());
    println!("reference edges   {}", graph.reference_edges().len());
    println!("containment edges {}", graph.containment_edges().len());
    println!("rule layer edges  {}", graph.rule_layer_edges().len());
    println!("delta_r           {}", graph.delta_r());

    println!();
    println!("strongest cross-document references:");
    let mut edges = graph.reference_edges().to_vec();
    edges.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    for edge in edges.iter().take(5) {
        println!("  {:<28} -> {:<28} {:.4}", edge.from, edge.to, edge.weight);
    }

    println!();
    println!("rule layer sample (every edge kind once):");
    for kind in [
        RuleEdgeKind::ActivatedBy,
        RuleEdgeKind::LeadsTo,
        RuleEdgeKind::Overrides,
        RuleEdgeKind::ExceptionOf,
        RuleEdgeKind::DerivedFrom,
    ] {
        if let Some(edge) = graph.rule_layer_edges().iter().find(|e| e.kind == kind) {
            println!("  {:<14} {:?} {}", edge.rule_id, edge.kind, edge.target);
        }
    }

    println!();
    println!("rebuilding from the same inputs reproduces the digest:");
    let again = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R).unwrap();
    println!("  {}", again.digest());
    assert_eq!(graph.digest(), again.digest());
}
