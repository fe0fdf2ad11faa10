//! Print the semantic tag hierarchy distilled from the corpus entities:
//! an agglomerative dendrogram over entity embeddings, cut at the merge
//! threshold. The tree is a navigation aid for the entity layer; nothing
//! in retrieval or governance depends on it.
//!
//! Run with: cargo run --example tag_hierarchy

use riskgov::kg::{build_graph, TagNode, DEFAULT_DELTA_R};
use riskgov::ruleset::parse_ruleset;

fn print_node(node: &TagNode, depth: usize) {
    let indent = "  ".repeat(depth);
    match node.similarity {
        Some(s) => println!("{indent}merge @ {:.3} ({} members)", s, node.members.len()),
        None => println!("{indent}{}", node.members[0]),
    }
    for child in &node.children {
        print_node(child, depth + 1);
    }
}

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let hierarchy = graph.tag_hierarchy();

    println!("merge steps, most similar first:");
    for step in hierarchy.merges.iter().take(8) {
        println!("  {:<26} + {:<26} @ {:.3}", step.left, step.right, step.similarity);
    }
    println!("  ... {} merges total", hierarchy.merges.len());
    println!();

    println!("{} root clusters:", hierarchy.roots.len());
    for root in &hierarchy.roots {
        print_node(root, 1);
    }
}
