//! Sweep referral policies over a noisy evaluation and map the coverage
//! versus safety tradeoff. Confidence 1.0 is reserved for rule-mandated
//! labels, so the strictest confidence policy autonomously releases the
//! hard path only. The source-based policy shows why the split matters:
//! injected subtype errors live exclusively in the RNA-fallback channel,
//! so releasing only DNA-confirmed cases refers every one of them.
//!
//! Run with: cargo run --example referral_sweep

use riskgov::cohort::{generate_cohort, CohortConfig};
use riskgov::governance::{DeterministicTable2Echo, DEFAULT_TAU};
use riskgov::kg::{build_graph, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use riskgov::metrics::{referral_simulate, EvaluationRecord, ReferralPolicy};
use riskgov::perception::PerceptionLibraries;
use riskgov::pipeline::Pipeline;
use riskgov::ruleset::parse_ruleset;

fn main() {
    let rs = parse_ruleset(riskgov::DEFAULT_RULES_SOURCE).expect("built-in rules parse");
    let graph = build_graph(riskgov::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R)
        .expect("built-in corpus builds");
    let cohort = generate_cohort(
        &CohortConfig {
            n_cases: 600,
            trigger_miss_rate: 0.25,
            panel_availability_rate: 0.6,
            random_seed: 99,
            ..CohortConfig::default()
        },
        &rs,
    )
    .expect("config is valid");
    let libs = PerceptionLibraries::synthetic(cohort.dim);
    let resolver = DeterministicTable2Echo::new(rs.clone());
    let pipeline = Pipeline {
        rs: &rs,
        graph: &graph,
        libs: &libs,
        resolver: &resolver,
        tau: DEFAULT_TAU,
        top_k: DEFAULT_TOP_K,
    };
    let records: Vec<EvaluationRecord> = pipeline
        .run_cohort(&cohort)
        .expect("cohort evaluates")
        .into_iter()
        .map(|o| o.evaluation)
        .collect();

    println!(
        "{:<22} {:>9} {:>22} {:>16} {:>9}",
        "policy", "coverage", "accuracy_on_released", "errors_referred", "released"
    );
    let show = |name: &str, policy: ReferralPolicy| {
        let o = referral_simulate(&records, policy);
        println!(
            "{:<22} {:>9.4} {:>22.4} {:>16} {:>9}",
            name, o.coverage, o.accuracy_on_released, o.referred_error_count, o.released
        );
    };
    show("dna_direct_only", ReferralPolicy::DnaDirectOnly);
    for t in [0.5, 0.75, 0.95, 1.0] {
        show(&format!("confidence >= {t}"), ReferralPolicy::ConfidenceAtLeast(t));
    }
    println!();

    // Coverage can only shrink as the threshold rises.
    let coverages: Vec<f64> = [0.5, 0.75, 0.95, 1.0]
        .iter()
        .map(|&t| referral_simulate(&records, ReferralPolicy::ConfidenceAtLeast(t)).coverage)
        .collect();
    assert!(coverages.windows(2).all(|w| w[1] <= w[0]));
    println!("coverage is non-increasing in the threshold: {coverages:?}");
}
