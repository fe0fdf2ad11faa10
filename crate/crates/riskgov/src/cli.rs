//! Batch entry points: graph build, cohort generation, evaluation runs,
//! adversarial stress, referral sweeps, and manifest replay.
//!
//! Every command stages its outputs in memory and writes them once,
//! atomically, at the end of the run, alongside a `manifest.json` that
//! records everything needed to reproduce the run byte for byte: input
//! paths, content digests, the resolver kind, every tunable, and the
//! output file names. Nothing written carries a timestamp. `replay`
//! re-executes a recorded manifest into a fresh directory; equal trees
//! mean equal runs.

use crate::cohort::{
    generate_cohort, Cohort, CohortConfig, CohortError, ConfigError, DEFAULT_EMBED_DIM,
};
use crate::domain::{CaseRecord, RiskTier};
use crate::embed::EmbeddingStore;
use crate::governance::{
    govern, DecisionPath, DeterministicTable2Echo, ExternalAdapter, GreyZoneResolver,
    LinearScorer, ValidatorVerdict, DEFAULT_TAU,
};
use crate::kg::{build_graph, GuidelineGraph, KgError, DEFAULT_DELTA_R, DEFAULT_TOP_K};
use crate::metrics::{self, EvaluationRecord, MetricError, ReferralPolicy};
use crate::perception::{generate_reports, PerceptionLibraries};
use crate::pipeline::{CaseOutcome, Pipeline, PipelineError, StressRow};
use crate::ruleset::{parse_ruleset, RuleError, RuleSet};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const METRICS_FILE: &str = "metrics.txt";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const STRESS_REPORT_FILE: &str = "stress.txt";
pub const STRESS_ROWS_FILE: &str = "stress.jsonl";
pub const REFERRAL_FILE: &str = "referral.txt";
/// Default confidence sweep for `referral`.
pub const DEFAULT_THRESHOLDS: &str = "0.5,0.75,1.0";
/// Bin count used for the calibration line of the metrics report.
pub const ECE_BINS: usize = 10;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "riskgov",
    version,
    about = "Deterministic, auditable risk stratification runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the guideline graph artifact and print its digest.
    BuildKg(BuildKgArgs),
    /// Generate a synthetic annotated cohort.
    Generate(GenerateArgs),
    /// Run the governed pipeline over a cohort and write the metrics report.
    Evaluate(EvaluateArgs),
    /// Run the adversarial suite and report validator interceptions.
    Stress(StressArgs),
    /// Sweep referral policies over a cohort.
    Referral(ReferralArgs),
    /// Re-execute a recorded run manifest into a fresh directory.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct BuildKgArgs {
    /// Rule file; defaults to the built-in ruleset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Guideline corpus (JSONL); defaults to the built-in corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Reference-edge threshold, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_DELTA_R)]
    pub delta_r: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenerateArgs {
    /// Rule file for oracle labels; defaults to the built-in ruleset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Number of cases.
    #[arg(long, default_value_t = CohortConfig::default().n_cases)]
    pub n: usize,
    /// Root seed; all cohort randomness flows from it.
    #[arg(long, default_value_t = CohortConfig::default().random_seed)]
    pub seed: u64,
    /// Probability that a trigger-relevant signal is corrupted.
    #[arg(long, default_value_t = 0.0)]
    pub trigger_miss_rate: f64,
    /// Share of cases with a direct DNA panel.
    #[arg(long, default_value_t = CohortConfig::default().panel_availability_rate)]
    pub panel_availability: f64,
    /// Probability that an optional field is dropped.
    #[arg(long, default_value_t = 0.0)]
    pub missing_field_rate: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct EvaluateArgs {
    /// Rule file; defaults to the built-in ruleset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Guideline corpus (JSONL); defaults to the built-in corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prebuilt graph artifact; built from the corpus when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Cohort directory produced by `generate`.
    #[arg(long)]
    pub cohort: PathBuf,
    /// Grey-zone resolver.
    #[arg(long, value_enum, default_value_t = ResolverKind::Table2)]
    pub resolver: ResolverKind,
    /// Referral threshold for grey-zone resolution, in [0, 1].
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Entities retrieved per evidence packet.
    #[arg(long = "topk", default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Reference-edge threshold when building the graph, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_DELTA_R)]
    pub delta_r: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct StressArgs {
    /// Rule file; defaults to the built-in ruleset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Guideline corpus (JSONL); defaults to the built-in corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prebuilt graph artifact; built from the corpus when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Extra case file (JSONL) to push through the governed path.
    #[arg(long)]
    pub cases: Option<PathBuf>,
    /// Grey-zone resolver.
    #[arg(long, value_enum, default_value_t = ResolverKind::Table2)]
    pub resolver: ResolverKind,
    /// Referral threshold for grey-zone resolution, in [0, 1].
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Entities retrieved per evidence packet.
    #[arg(long = "topk", default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Reference-edge threshold when building the graph, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_DELTA_R)]
    pub delta_r: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ReferralArgs {
    /// Rule file; defaults to the built-in ruleset.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Guideline corpus (JSONL); defaults to the built-in corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prebuilt graph artifact; built from the corpus when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Cohort directory produced by `generate`.
    #[arg(long)]
    pub cohort: PathBuf,
    /// Grey-zone resolver.
    #[arg(long, value_enum, default_value_t = ResolverKind::Table2)]
    pub resolver: ResolverKind,
    /// Referral threshold for grey-zone resolution, in [0, 1].
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Entities retrieved per evidence packet.
    #[arg(long = "topk", default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Reference-edge threshold when building the graph, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_DELTA_R)]
    pub delta_r: f64,
    /// Comma-separated confidence thresholds, each in (0, 1].
    #[arg(long, default_value = DEFAULT_THRESHOLDS)]
    pub thresholds: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ReplayArgs {
    /// Manifest of the run to reproduce.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fresh output directory for the reproduced run.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolverKind {
    #[value(name = "table2")]
    Table2,
    #[value(name = "linear")]
    Linear,
    #[value(name = "external")]
    External,
}

impl ResolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResolverKind::Table2 => "table2",
            ResolverKind::Linear => "linear",
            ResolverKind::External => "external",
        }
    }
}

impl std::fmt::Display for ResolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("rules: {0}")]
    Rules(#[from] RuleError),
    #[error("graph: {0}")]
    Kg(#[from] KgError),
    #[error("cohort: {0}")]
    Cohort(#[from] CohortError),
    #[error("cohort config: {0}")]
    Config(#[from] ConfigError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// The reproduction record every command writes next to its outputs.
/// Input paths are recorded as given; `None` means the built-in source.
/// Output entries are file names relative to the output directory, so a
/// manifest replayed into a different directory is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub ruleset_version: String,
    pub ruleset_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort_config: Option<CohortConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolver: Option<ResolverKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases_path: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn base(command: &str, rs: &RuleSet) -> RunManifest {
        RunManifest {
            tool_version: crate::TOOL_VERSION.to_string(),
            command: command.to_string(),
            ruleset_version: rs.version.clone(),
            ruleset_hash: rs.source_hash.clone(),
            rules_path: None,
            corpus_path: None,
            graph_path: None,
            graph_digest: None,
            cohort_path: None,
            cohort_digest: None,
            cohort_config: None,
            seed: None,
            resolver: None,
            tau: None,
            top_k: None,
            delta_r: None,
            thresholds: None,
            cases_path: None,
            outputs: Vec::new(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut buf = serde_json::to_vec_pretty(self).expect("manifest serializes");
        buf.push(b'\n');
        buf
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct TextSource {
    text: String,
    path: Option<String>,
}

fn load_text(path: &Option<PathBuf>, embedded: &'static str) -> Result<TextSource, CliError> {
    match path {
        Some(p) => Ok(TextSource {
            text: fs::read_to_string(p).map_err(io_err(p))?,
            path: Some(p.display().to_string()),
        }),
        None => Ok(TextSource {
            text: embedded.to_string(),
            path: None,
        }),
    }
}

fn check_delta_r(d: f64) -> Result<(), CliError> {
    if d.is_finite() && 0.0 < d && d <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--delta-r must lie in (0, 1], got {d}"
        )))
    }
}

fn check_tau(t: f64) -> Result<(), CliError> {
    if t.is_finite() && (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--tau must lie in [0, 1], got {t}")))
    }
}

fn parse_thresholds(raw: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        let t: f64 = part.parse().map_err(|_| {
            CliError::Usage(format!("--thresholds entry {part:?} is not a number"))
        })?;
        if !(t.is_finite() && 0.0 < t && t <= 1.0) {
            return Err(CliError::Usage(format!(
                "--thresholds entries must lie in (0, 1], got {t}"
            )));
        }
        out.push(t);
    }
    if out.is_empty() {
        return Err(CliError::Usage("--thresholds is empty".to_string()));
    }
    Ok(out)
}

/// Writes each staged file through a temporary sibling and a rename, so a
/// reader never observes a half-written output.
fn write_outputs(out: &Path, files: Vec<(String, Vec<u8>)>) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    for (name, bytes) in files {
        let tmp = out.join(format!(".{name}.tmp"));
        fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, out.join(&name)).map_err(io_err(&tmp))?;
    }
    Ok(())
}

fn make_resolver(kind: ResolverKind, rs: &RuleSet) -> Box<dyn GreyZoneResolver> {
    match kind {
        ResolverKind::Table2 => Box::new(DeterministicTable2Echo::new(rs.clone())),
        ResolverKind::Linear => Box::new(LinearScorer),
        ResolverKind::External => Box::new(ExternalAdapter::from_env()),
    }
}

/// Everything evaluate, stress, and referral share: parsed rules, a graph
/// (loaded or built), prototype libraries, the resolver, and a manifest
/// pre-filled with the shared fields.
struct Workbench {
    rs: RuleSet,
    graph: GuidelineGraph,
    libs: PerceptionLibraries,
    resolver: Box<dyn GreyZoneResolver>,
    tau: f64,
    top_k: usize,
    manifest: RunManifest,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    command: &str,
    rules: &Option<PathBuf>,
    corpus: &Option<PathBuf>,
    graph_path: &Option<PathBuf>,
    resolver: ResolverKind,
    tau: f64,
    top_k: usize,
    delta_r: f64,
    dim: usize,
) -> Result<Workbench, CliError> {
    check_tau(tau)?;
    check_delta_r(delta_r)?;
    let rules_src = load_text(rules, crate::DEFAULT_RULES_SOURCE)?;
    let rs = parse_ruleset(&rules_src.text)?;
    let (graph, corpus_path, graph_file) = match graph_path {
        Some(p) => {
            let bytes = fs::read(p).map_err(io_err(p))?;
            let graph = GuidelineGraph::from_json(&bytes)?;
            (graph, None, Some(p.display().to_string()))
        }
        None => {
            let corpus_src = load_text(corpus, crate::DEFAULT_CORPUS_SOURCE)?;
            (
                build_graph(&corpus_src.text, &rs, delta_r)?,
                corpus_src.path,
                None,
            )
        }
    };
    let resolver_box = make_resolver(resolver, &rs);
    let mut manifest = RunManifest::base(command, &rs);
    manifest.rules_path = rules_src.path;
    manifest.corpus_path = corpus_path;
    manifest.graph_path = graph_file;
    manifest.graph_digest = Some(graph.digest().to_string());
    manifest.resolver = Some(resolver);
    manifest.tau = Some(tau);
    manifest.top_k = Some(top_k);
    manifest.delta_r = Some(graph.delta_r());
    Ok(Workbench {
        rs,
        graph,
        libs: PerceptionLibraries::synthetic(dim),
        resolver: resolver_box,
        tau,
        top_k,
        manifest,
    })
}

impl Workbench {
    fn pipeline(&self) -> Pipeline<'_> {
        Pipeline {
            rs: &self.rs,
            graph: &self.graph,
            libs: &self.libs,
            resolver: self.resolver.as_ref(),
            tau: self.tau,
            top_k: self.top_k,
        }
    }
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

fn push_line(s: &mut String, line: impl AsRef<str>) {
    s.push_str(line.as_ref());
    s.push('\n');
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_metric(r: Result<f64, MetricError>) -> String {
    match r {
        Ok(v) => fmt_rate(v),
        Err(e) => format!("n/a ({e})"),
    }
}

fn verdict_str(v: ValidatorVerdict) -> &'static str {
    match v {
        ValidatorVerdict::Accepted => "accepted",
        ValidatorVerdict::Corrected => "corrected",
        ValidatorVerdict::Rejected => "rejected",
    }
}

/// The flat key-value evaluation report. Both violation-rate denominators
/// appear explicitly: the exposed-trigger denominator counts every true
/// trigger case, the adjudicated denominator only those the pipeline
/// actually surfaced to the governance layer.
fn metrics_report(
    records: &[EvaluationRecord],
    outcomes: &[CaseOutcome],
    wb: &Workbench,
    cohort_digest: &str,
) -> String {
    let mut s = String::new();
    push_line(&mut s, format!("cases {}", records.len()));
    push_line(&mut s, format!("resolver {}", wb.resolver.name()));
    let failures = outcomes
        .iter()
        .filter(|o| o.audit.resolver_failure.is_some())
        .count();
    push_line(&mut s, format!("resolver_failures {failures}"));
    push_line(&mut s, format!("tau {}", fmt_rate(wb.tau)));
    push_line(&mut s, format!("top_k {}", wb.top_k));
    push_line(&mut s, format!("ruleset_version {}", wb.rs.version));
    push_line(&mut s, format!("ruleset_hash {}", wb.rs.source_hash));
    push_line(&mut s, format!("graph_digest {}", wb.graph.digest()));
    push_line(&mut s, format!("cohort_digest {cohort_digest}"));
    push_line(
        &mut s,
        format!("accuracy {}", fmt_metric(metrics::accuracy(records))),
    );
    push_line(
        &mut s,
        format!("macro_auc {}", fmt_metric(metrics::macro_auc(records))),
    );
    push_line(
        &mut s,
        format!("ece_{}bin {}", ECE_BINS, fmt_rate(metrics::ece(records, ECE_BINS))),
    );

    let path_count = |p: DecisionPath| records.iter().filter(|r| r.path == p).count();
    push_line(&mut s, format!("path_hard {}", path_count(DecisionPath::Hard)));
    push_line(
        &mut s,
        format!("path_soft_table2 {}", path_count(DecisionPath::SoftTable2)),
    );
    push_line(
        &mut s,
        format!("path_soft_chair {}", path_count(DecisionPath::SoftChair)),
    );
    let verdict_count = |v: ValidatorVerdict| {
        outcomes
            .iter()
            .filter(|o| o.audit.validator_verdict == v)
            .count()
    };
    push_line(
        &mut s,
        format!("verdict_accepted {}", verdict_count(ValidatorVerdict::Accepted)),
    );
    push_line(
        &mut s,
        format!("verdict_corrected {}", verdict_count(ValidatorVerdict::Corrected)),
    );
    push_line(
        &mut s,
        format!("verdict_rejected {}", verdict_count(ValidatorVerdict::Rejected)),
    );

    let d = metrics::safety_decomposition(records);
    push_line(&mut s, format!("denominator_exposed_trigger {}", d.n_trigger));
    push_line(&mut s, format!("denominator_adjudicated {}", d.n_detected));
    let lvr_violations = records
        .iter()
        .filter(|r| r.is_trigger && metrics::violates_mandate(r))
        .count();
    let c_lvr_violations = records
        .iter()
        .filter(|r| r.is_trigger && r.trigger_detected && metrics::violates_mandate(r))
        .count();
    let e2e_violations = records
        .iter()
        .filter(|r| r.is_trigger && r.predicted_label != r.oracle_label)
        .count();
    push_line(&mut s, format!("lvr_violations {lvr_violations}"));
    push_line(&mut s, format!("lvr {}", fmt_metric(metrics::lvr(records))));
    push_line(&mut s, format!("c_lvr_violations {c_lvr_violations}"));
    push_line(&mut s, format!("c_lvr {}", fmt_metric(metrics::c_lvr(records))));
    push_line(&mut s, format!("e2e_lvr_violations {e2e_violations}"));
    push_line(
        &mut s,
        format!("e2e_lvr {}", fmt_metric(metrics::e2e_lvr(records))),
    );
    push_line(
        &mut s,
        format!("trigger_sensitivity {}", fmt_rate(d.sensitivity)),
    );
    push_line(
        &mut s,
        format!("trigger_specificity {}", fmt_rate(d.specificity)),
    );
    push_line(&mut s, format!("n_missed {}", d.n_missed));
    push_line(
        &mut s,
        format!("n_recovered_by_soft_path {}", d.n_recovered_by_soft_path),
    );
    push_line(&mut s, format!("n_final_correct {}", d.n_final_correct));
    push_line(&mut s, format!("n_false_triggers {}", d.n_false_triggers));

    if let Ok(m) = metrics::confusion(records) {
        let labels: Vec<&str> = RiskTier::ALL.iter().map(|t| t.as_str()).collect();
        push_line(
            &mut s,
            format!("confusion rows=oracle cols=predicted {}", labels.join(",")),
        );
        for (i, tier) in RiskTier::ALL.iter().enumerate() {
            push_line(
                &mut s,
                format!(
                    "confusion {} {} {} {} {}",
                    tier.as_str(),
                    m[i][0],
                    m[i][1],
                    m[i][2],
                    m[i][3]
                ),
            );
        }
    }
    s
}

fn stress_report(rows: &[StressRow]) -> String {
    let mut s = String::new();
    for row in rows {
        push_line(
            &mut s,
            format!(
                "case {} tag {} verdict {} final {} detail {}",
                row.case_id,
                row.tag,
                verdict_str(row.verdict),
                row.final_label.as_str(),
                row.detail
            ),
        );
    }
    let intercepted = rows.iter().filter(|r| r.intercepted).count();
    push_line(&mut s, format!("interceptions {}/{}", intercepted, rows.len()));
    let rate = if rows.is_empty() {
        0.0
    } else {
        intercepted as f64 / rows.len() as f64
    };
    push_line(&mut s, format!("interception_rate {}", fmt_rate(rate)));
    s
}

fn referral_report(
    records: &[EvaluationRecord],
    thresholds: &[f64],
    resolver: &str,
    cohort_digest: &str,
) -> String {
    let mut s = String::new();
    push_line(&mut s, format!("total {}", records.len()));
    push_line(&mut s, format!("resolver {resolver}"));
    push_line(&mut s, format!("cohort_digest {cohort_digest}"));
    let mut row = |name: &str, policy: ReferralPolicy| {
        let o = metrics::referral_simulate(records, policy);
        push_line(
            &mut s,
            format!(
                "policy {name} coverage {} accuracy_on_released {} referred_error_count {} released {}",
                fmt_rate(o.coverage),
                fmt_rate(o.accuracy_on_released),
                o.referred_error_count,
                o.released
            ),
        );
    };
    row("dna_direct_only", ReferralPolicy::DnaDirectOnly);
    for &t in thresholds {
        row(
            &format!("confidence_ge_{}", fmt_rate(t)),
            ReferralPolicy::ConfidenceAtLeast(t),
        );
    }
    s
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item).expect("report rows serialize");
        buf.push(b'\n');
    }
    buf
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::BuildKg(a) => run_build_kg(a),
        Command::Generate(a) => {
            let cfg = CohortConfig {
                n_cases: a.n,
                trigger_miss_rate: a.trigger_miss_rate,
                panel_availability_rate: a.panel_availability,
                missing_field_rate: a.missing_field_rate,
                random_seed: a.seed,
                ..CohortConfig::default()
            };
            run_generate(&a.rules, &cfg, &a.out)
        }
        Command::Evaluate(a) => run_evaluate(a),
        Command::Stress(a) => run_stress(a),
        Command::Referral(a) => run_referral(a),
        Command::Replay(a) => run_replay(a),
    }
}

fn run_build_kg(a: BuildKgArgs) -> Result<(), CliError> {
    check_delta_r(a.delta_r)?;
    let rules = load_text(&a.rules, crate::DEFAULT_RULES_SOURCE)?;
    let corpus = load_text(&a.corpus, crate::DEFAULT_CORPUS_SOURCE)?;
    let rs = parse_ruleset(&rules.text)?;
    let graph = build_graph(&corpus.text, &rs, a.delta_r)?;

    let mut manifest = RunManifest::base("build-kg", &rs);
    manifest.rules_path = rules.path;
    manifest.corpus_path = corpus.path;
    manifest.graph_digest = Some(graph.digest().to_string());
    manifest.delta_r = Some(a.delta_r);
    manifest.outputs = vec![GRAPH_FILE.to_string()];

    write_outputs(
        &a.out,
        vec![
            (GRAPH_FILE.to_string(), graph.to_json()),
            (MANIFEST_FILE.to_string(), manifest.to_bytes()),
        ],
    )?;
    println!("graph_digest {}", graph.digest());
    println!("entities {}", graph.entities().len());
    println!("chunks {}", graph.chunks().len());
    println!("reference_edges {}", graph.reference_edges().len());
    println!("out {}", a.out.display());
    Ok(())
}

fn run_generate(
    rules_arg: &Option<PathBuf>,
    cfg: &CohortConfig,
    out: &Path,
) -> Result<(), CliError> {
    let rules = load_text(rules_arg, crate::DEFAULT_RULES_SOURCE)?;
    let rs = parse_ruleset(&rules.text)?;
    let cohort = generate_cohort(cfg, &rs)?;
    let digest = cohort.digest();

    let mut manifest = RunManifest::base("generate", &rs);
    manifest.rules_path = rules.path;
    manifest.cohort_config = Some(cfg.clone());
    manifest.seed = Some(cfg.random_seed);
    manifest.cohort_digest = Some(digest.clone());
    let files = cohort.to_files();
    manifest.outputs = files.iter().map(|(n, _)| n.to_string()).collect();

    let mut staged: Vec<(String, Vec<u8>)> = files
        .into_iter()
        .map(|(n, b)| (n.to_string(), b))
        .collect();
    staged.push((MANIFEST_FILE.to_string(), manifest.to_bytes()));
    write_outputs(out, staged)?;
    println!("cases {}", cohort.records.len());
    println!("cohort_digest {digest}");
    println!("out {}", out.display());
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let cohort = Cohort::read_dir(&a.cohort)?;
    let mut wb = assemble(
        "evaluate", &a.rules, &a.corpus, &a.graph, a.resolver, a.tau, a.top_k, a.delta_r,
        cohort.dim,
    )?;
    let outcomes = wb.pipeline().run_cohort(&cohort)?;
    let records: Vec<EvaluationRecord> = outcomes.iter().map(|o| o.evaluation.clone()).collect();
    let digest = cohort.digest();
    let report = metrics_report(&records, &outcomes, &wb, &digest);

    wb.manifest.cohort_path = Some(a.cohort.display().to_string());
    wb.manifest.cohort_digest = Some(digest);
    wb.manifest.outputs = vec![
        METRICS_FILE.to_string(),
        AUDIT_FILE.to_string(),
        RECORDS_FILE.to_string(),
    ];
    write_outputs(
        &a.out,
        vec![
            (METRICS_FILE.to_string(), report.clone().into_bytes()),
            (AUDIT_FILE.to_string(), jsonl(outcomes.iter().map(|o| &o.audit))),
            (RECORDS_FILE.to_string(), jsonl(records.iter())),
            (MANIFEST_FILE.to_string(), wb.manifest.to_bytes()),
        ],
    )?;
    print!("{report}");
    println!("out {}", a.out.display());
    Ok(())
}

fn run_stress(a: StressArgs) -> Result<(), CliError> {
    let mut wb = assemble(
        "stress",
        &a.rules,
        &a.corpus,
        &a.graph,
        a.resolver,
        a.tau,
        a.top_k,
        a.delta_r,
        DEFAULT_EMBED_DIM,
    )?;
    let mut rows = wb.pipeline().stress_adversarial()?;
    if let Some(path) = &a.cases {
        rows.extend(stress_case_file(&wb, path)?);
    }
    let report = stress_report(&rows);

    wb.manifest.cases_path = a.cases.as_ref().map(|p| p.display().to_string());
    wb.manifest.outputs = vec![STRESS_REPORT_FILE.to_string(), STRESS_ROWS_FILE.to_string()];
    write_outputs(
        &a.out,
        vec![
            (STRESS_REPORT_FILE.to_string(), report.clone().into_bytes()),
            (STRESS_ROWS_FILE.to_string(), jsonl(rows.iter())),
            (MANIFEST_FILE.to_string(), wb.manifest.to_bytes()),
        ],
    )?;
    print!("{report}");
    println!("out {}", a.out.display());
    Ok(())
}

/// Pushes an arbitrary case file through the governed path, one row per
/// case. Schema-breaking cases surface as rejected rows rather than run
/// errors; only unreadable input aborts.
fn stress_case_file(wb: &Workbench, path: &Path) -> Result<Vec<StressRow>, CliError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let store = EmbeddingStore::new(wb.libs.molecular.dim());
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: CaseRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Usage(format!("{}: line {}: {e}", path.display(), i + 1))
        })?;
        let evidence = generate_reports(&case, &wb.libs, &store)
            .map_err(PipelineError::from)?
            .evidence;
        let packet = wb.graph.query(&wb.rs, &evidence, wb.top_k);
        let (decision, audit) = govern(
            &case.case_id,
            &evidence,
            &packet,
            &wb.rs,
            wb.resolver.as_ref(),
            wb.tau,
        );
        rows.push(StressRow {
            case_id: case.case_id,
            tag: "case_file".to_string(),
            verdict: audit.validator_verdict,
            final_label: decision.label,
            intercepted: audit.validator_verdict != ValidatorVerdict::Accepted,
            detail: audit.validator_message,
        });
    }
    Ok(rows)
}

fn run_referral(a: ReferralArgs) -> Result<(), CliError> {
    let thresholds = parse_thresholds(&a.thresholds)?;
    let cohort = Cohort::read_dir(&a.cohort)?;
    let mut wb = assemble(
        "referral", &a.rules, &a.corpus, &a.graph, a.resolver, a.tau, a.top_k, a.delta_r,
        cohort.dim,
    )?;
    let outcomes = wb.pipeline().run_cohort(&cohort)?;
    let records: Vec<EvaluationRecord> = outcomes.iter().map(|o| o.evaluation.clone()).collect();
    let digest = cohort.digest();
    let report = referral_report(&records, &thresholds, wb.resolver.name(), &digest);

    wb.manifest.cohort_path = Some(a.cohort.display().to_string());
    wb.manifest.cohort_digest = Some(digest);
    wb.manifest.thresholds = Some(thresholds);
    wb.manifest.outputs = vec![REFERRAL_FILE.to_string()];
    write_outputs(
        &a.out,
        vec![
            (REFERRAL_FILE.to_string(), report.clone().into_bytes()),
            (MANIFEST_FILE.to_string(), wb.manifest.to_bytes()),
        ],
    )?;
    print!("{report}");
    println!("out {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// What a manifest replays as. Generate reuses the recorded cohort config
/// verbatim, so even a hand-edited prevalence vector reproduces exactly.
#[derive(Debug)]
enum ReplayPlan {
    BuildKg(BuildKgArgs),
    Generate {
        rules: Option<PathBuf>,
        cfg: CohortConfig,
        out: PathBuf,
    },
    Evaluate(EvaluateArgs),
    Stress(StressArgs),
    Referral(ReferralArgs),
}

fn plan_replay(m: &RunManifest, src: &Path, out: PathBuf) -> Result<ReplayPlan, CliError> {
    let missing = |field: &str| CliError::Manifest {
        path: src.to_path_buf(),
        message: format!("missing field {field} for command {:?}", m.command),
    };
    let p = |s: &Option<String>| s.as_ref().map(PathBuf::from);
    match m.command.as_str() {
        "build-kg" => Ok(ReplayPlan::BuildKg(BuildKgArgs {
            rules: p(&m.rules_path),
            corpus: p(&m.corpus_path),
            delta_r: m.delta_r.ok_or_else(|| missing("delta_r"))?,
            out,
        })),
        "generate" => Ok(ReplayPlan::Generate {
            rules: p(&m.rules_path),
            cfg: m
                .cohort_config
                .clone()
                .ok_or_else(|| missing("cohort_config"))?,
            out,
        }),
        "evaluate" => Ok(ReplayPlan::Evaluate(EvaluateArgs {
            rules: p(&m.rules_path),
            corpus: p(&m.corpus_path),
            graph: p(&m.graph_path),
            cohort: p(&m.cohort_path).ok_or_else(|| missing("cohort_path"))?,
            resolver: m.resolver.ok_or_else(|| missing("resolver"))?,
            tau: m.tau.ok_or_else(|| missing("tau"))?,
            top_k: m.top_k.ok_or_else(|| missing("top_k"))?,
            delta_r: m.delta_r.ok_or_else(|| missing("delta_r"))?,
            out,
        })),
        "stress" => Ok(ReplayPlan::Stress(StressArgs {
            rules: p(&m.rules_path),
            corpus: p(&m.corpus_path),
            graph: p(&m.graph_path),
            cases: p(&m.cases_path),
            resolver: m.resolver.ok_or_else(|| missing("resolver"))?,
            tau: m.tau.ok_or_else(|| missing("tau"))?,
            top_k: m.top_k.ok_or_else(|| missing("top_k"))?,
            delta_r: m.delta_r.ok_or_else(|| missing("delta_r"))?,
            out,
        })),
        "referral" => Ok(ReplayPlan::Referral(ReferralArgs {
            rules: p(&m.rules_path),
            corpus: p(&m.corpus_path),
            graph: p(&m.graph_path),
            cohort: p(&m.cohort_path).ok_or_else(|| missing("cohort_path"))?,
            resolver: m.resolver.ok_or_else(|| missing("resolver"))?,
            tau: m.tau.ok_or_else(|| missing("tau"))?,
            top_k: m.top_k.ok_or_else(|| missing("top_k"))?,
            delta_r: m.delta_r.ok_or_else(|| missing("delta_r"))?,
            thresholds: m
                .thresholds
                .as_ref()
                .ok_or_else(|| missing("thresholds"))?
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(","),
            out,
        })),
        other => Err(CliError::Manifest {
            path: src.to_path_buf(),
            message: format!("command {other:?} is not replayable"),
        }),
    }
}

fn run_replay(a: ReplayArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&a.manifest)?;
    match plan_replay(&manifest, &a.manifest, a.out)? {
        ReplayPlan::BuildKg(args) => run_build_kg(args),
        ReplayPlan::Generate { rules, cfg, out } => run_generate(&rules, &cfg, &out),
        ReplayPlan::Evaluate(args) => run_evaluate(args),
        ReplayPlan::Stress(args) => run_stress(args),
        ReplayPlan::Referral(args) => run_referral(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn delta_r_bounds_are_half_open() {
        assert!(check_delta_r(0.6).is_ok());
        assert!(check_delta_r(1.0).is_ok());
        assert!(check_delta_r(0.0).is_err());
        assert!(check_delta_r(1.1).is_err());
        assert!(check_delta_r(f64::NAN).is_err());
    }

    #[test]
    fn thresholds_parse_and_reject_out_of_range() {
        assert_eq!(
            parse_thresholds("0.5,0.75,1.0").unwrap(),
            vec![0.5, 0.75, 1.0]
        );
        assert_eq!(parse_thresholds(" 0.9 ").unwrap(), vec![0.9]);
        assert!(parse_thresholds("0.0,0.5").is_err());
        assert!(parse_thresholds("1.1").is_err());
        assert!(parse_thresholds("abc").is_err());
        assert!(parse_thresholds("").is_err());
    }

    #[test]
    fn manifest_serialization_is_deterministic_and_round_trips() {
        let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
        let mut m = RunManifest::base("evaluate", &rs);
        m.cohort_path = Some("cohort".to_string());
        m.cohort_digest = Some("abc".to_string());
        m.resolver = Some(ResolverKind::Linear);
        m.tau = Some(0.6);
        m.top_k = Some(25);
        m.delta_r = Some(0.6);
        m.outputs = vec![METRICS_FILE.to_string()];
        let a = m.to_bytes();
        let b = m.to_bytes();
        assert_eq!(a, b);
        let back: RunManifest = serde_json::from_slice(&a).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn replay_plan_requires_command_specific_fields() {
        let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
        let m = RunManifest::base("evaluate", &rs);
        let err = plan_replay(&m, Path::new("m.json"), PathBuf::from("out")).unwrap_err();
        assert!(err.to_string().contains("cohort_path"));

        let mut m = RunManifest::base("frobnicate", &rs);
        m.outputs = Vec::new();
        let err = plan_replay(&m, Path::new("m.json"), PathBuf::from("out")).unwrap_err();
        assert!(err.to_string().contains("not replayable"));
    }

    #[test]
    fn build_kg_then_replay_is_byte_identical() {
        let dir = tempdir().unwrap();
        let first = dir.path().join("first");
        let second = dir.path().join("second");
        run_build_kg(BuildKgArgs {
            rules: None,
            corpus: None,
            delta_r: DEFAULT_DELTA_R,
            out: first.clone(),
        })
        .unwrap();
        run_replay(ReplayArgs {
            manifest: first.join(MANIFEST_FILE),
            out: second.clone(),
        })
        .unwrap();
        for name in [GRAPH_FILE, MANIFEST_FILE] {
            assert_eq!(
                fs::read(first.join(name)).unwrap(),
                fs::read(second.join(name)).unwrap(),
                "{name} must replay byte-identically"
            );
        }
    }

    #[test]
    fn generate_writes_cohort_files_and_manifest() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("cohort");
        let cfg = CohortConfig {
            n_cases: 25,
            random_seed: 7,
            ..CohortConfig::default()
        };
        run_generate(&None, &cfg, &out).unwrap();
        let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest.command, "generate");
        assert_eq!(manifest.seed, Some(7));
        assert_eq!(manifest.cohort_config.as_ref().unwrap().n_cases, 25);
        let cohort = Cohort::read_dir(&out).unwrap();
        assert_eq!(cohort.records.len(), 25);
        assert_eq!(Some(cohort.digest()), manifest.cohort_digest);
    }

    #[test]
    fn evaluate_report_prints_both_denominators() {
        let dir = tempdir().unwrap();
        let cohort_dir = dir.path().join("cohort");
        let cfg = CohortConfig {
            n_cases: 60,
            trigger_miss_rate: 0.3,
            random_seed: 11,
            ..CohortConfig::default()
        };
        run_generate(&None, &cfg, &cohort_dir).unwrap();
        let out = dir.path().join("eval");
        run_evaluate(EvaluateArgs {
            rules: None,
            corpus: None,
            graph: None,
            cohort: cohort_dir,
            resolver: ResolverKind::Table2,
            tau: DEFAULT_TAU,
            top_k: DEFAULT_TOP_K,
            delta_r: DEFAULT_DELTA_R,
            out: out.clone(),
        })
        .unwrap();
        let report = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
        assert!(report.contains("denominator_exposed_trigger "));
        assert!(report.contains("denominator_adjudicated "));
        assert!(report.contains("confusion rows=oracle cols=predicted"));
        assert!(report.contains("c_lvr 0.000000"));
    }
}
