//! Deterministic, auditable risk stratification for endometrial carcinoma.
//!
//! The engine decomposes every decision into two governed tiers. Tier 1
//! simulates the three specialist evidence channels of a molecular tumor
//! board (pathology, molecular, clinical) and fuses them into a structured
//! [`domain::PatientEvidence`]. Tier 2 matches that evidence against an
//! executable encoding of the ESMO 2022 / ESGO-ESTRO-ESP risk rules,
//! arbitrates conflicts by priority with conservative tie-breaking, retrieves
//! provenance from an evidence-weighted guideline knowledge graph, and emits
//! one audit record per case. A validator re-derives the expected label from
//! rules plus evidence alone and accepts, corrects, or rejects every
//! proposal, so no decision leaves the engine unchecked.
//!
//! Module map:
//!
//! * [`domain`] - clinical vocabulary: tiers, subtypes, stages, evidence.
//! * [`ruleset`] - rule text format, trigger matching, priority arbitration.
//! * [`kg`] - guideline knowledge graph build, retrieval, tag clustering.
//! * [`embed`] - fixed-dimension embedding store backing RNA fallback.
//! * [`perception`] - specialist report simulation and evidence fusion.
//! * [`governance`] - the decision procedure, resolvers, validator, audit.
//! * [`metrics`] - label violation rates, calibration, referral analysis.
//! * [`cohort`] - seeded synthetic cohorts and the adversarial stress suite.
//! * [`pipeline`] - per-case evaluation assembly shared by CLI and examples.
//! * [`cli`] - run manifests and the subcommand entry points.
//!
//! Every path through the engine is deterministic: identical inputs and
//! configuration produce byte-identical outputs, including audit files and
//! graph digests. Randomness exists only in the cohort generator and is
//! fully determined by its seed.

pub mod cli;
pub mod cohort;
pub mod domain;
pub mod embed;
pub mod governance;
pub mod kg;
pub mod metrics;
pub mod perception;
pub mod pipeline;
pub mod ruleset;

/// Text of the rule source shipped with the crate: the ESMO 2022 risk
/// groups with the ESGO-ESTRO-ESP stage IA exception encoded explicitly.
pub const DEFAULT_RULES_SOURCE: &str = include_str!("../rules/esmo2022.rules");

/// Desk-scale guideline corpus shipped with the crate: two guideline
/// documents and three consensus documents at evidence levels 3 to 5, with
/// forty embedded entities. Every chunk the default rules cite is present.
pub const DEFAULT_CORPUS_SOURCE: &str = include_str!("../corpus/guidelines.jsonl");

/// Crate version, recorded in every run manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
