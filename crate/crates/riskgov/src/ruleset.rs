//! Executable risk rules: a line-oriented text format, trigger matching,
//! and priority arbitration with a full dominance trace.
//!
//! Matching is fail-closed: a trigger atom that references a field the
//! evidence does not carry (absent, `Unknown`) evaluates to false, so
//! incomplete evidence can only ever suppress a rule, never fire one.
//!
//! Arbitration picks the matched rule with the lowest priority number.
//! Within equal priority, an exception displaces its target, overridden
//! rules are eliminated, and any remaining disagreement resolves to the
//! higher risk tier (conservative fallback) with rule-id order as the final
//! deterministic tie-break. Every elimination is recorded with its reason.

use crate::domain::{
    evidence_grid, Grade, Histology, Lvsi, MolecularSubtype, MyoInvasion, PatientEvidence,
    RiskTier, StageCode,
};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type RuleId = String;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule source line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("ruleset incomplete: no rule matches evidence ({witness})")]
    Completeness { witness: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> RuleError {
    RuleError::Parse {
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Triggers
// ---------------------------------------------------------------------------

/// One atomic predicate over a single evidence field. `Unknown` values are
/// not triggerable: atoms name concrete findings only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerAtom {
    SubtypeEquals(MolecularSubtype),
    StageEquals(StageCode),
    StageAtLeast(StageCode),
    HistologyEquals(Histology),
    HistologyIn(BTreeSet<Histology>),
    GradeEquals(Grade),
    MiEquals(MyoInvasion),
    LvsiEquals(Lvsi),
}

impl TriggerAtom {
    /// Fail-closed evaluation: absent or `Unknown` fields never satisfy an
    /// atom.
    pub fn eval(&self, ev: &PatientEvidence) -> bool {
        match self {
            TriggerAtom::SubtypeEquals(want) => ev.subtype == Some(*want),
            TriggerAtom::StageEquals(want) => ev.stage_code() == Some(*want),
            TriggerAtom::StageAtLeast(min) => {
                ev.stage_code().map(|c| c.rank() >= min.rank()).unwrap_or(false)
            }
            TriggerAtom::HistologyEquals(want) => ev.histology == Some(*want),
            TriggerAtom::HistologyIn(set) => {
                ev.histology.map(|h| set.contains(&h)).unwrap_or(false)
            }
            TriggerAtom::GradeEquals(want) => ev.grade != Grade::Unknown && ev.grade == *want,
            TriggerAtom::MiEquals(want) => {
                ev.myometrial_invasion != MyoInvasion::Unknown
                    && ev.myometrial_invasion == *want
            }
            TriggerAtom::LvsiEquals(want) => ev.lvsi != Lvsi::Unknown && ev.lvsi == *want,
        }
    }

    /// The subtype an equality atom pins, if any. Used to check that an
    /// exception shares its target's clinical locus.
    fn pinned_subtype(&self) -> Option<MolecularSubtype> {
        match self {
            TriggerAtom::SubtypeEquals(s) => Some(*s),
            _ => None,
        }
    }
}

impl fmt::Display for TriggerAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerAtom::SubtypeEquals(s) => write!(f, "subtype == {s}"),
            TriggerAtom::StageEquals(s) => write!(f, "stage == {s}"),
            TriggerAtom::StageAtLeast(s) => write!(f, "stage >= {s}"),
            TriggerAtom::HistologyEquals(h) => write!(f, "histology == {h}"),
            TriggerAtom::HistologyIn(set) => {
                let items: Vec<&str> = set.iter().map(|h| h.as_str()).collect();
                write!(f, "histology in {{ {} }}", items.join(", "))
            }
            TriggerAtom::GradeEquals(g) => write!(f, "grade == {g}"),
            TriggerAtom::MiEquals(m) => write!(f, "mi == {m}"),
            TriggerAtom::LvsiEquals(l) => write!(f, "lvsi == {l}"),
        }
    }
}

/// A conjunct: either a bare atom or an any-of group, which is satisfied
/// when at least one member atom is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerClause {
    Atom(TriggerAtom),
    AnyOf(Vec<TriggerAtom>),
}

impl TriggerClause {
    pub fn eval(&self, ev: &PatientEvidence) -> bool {
        match self {
            TriggerClause::Atom(a) => a.eval(ev),
            TriggerClause::AnyOf(atoms) => atoms.iter().any(|a| a.eval(ev)),
        }
    }
}

impl fmt::Display for TriggerClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerClause::Atom(a) => a.fmt(f),
            TriggerClause::AnyOf(atoms) => {
                let items: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
                write!(f, "any({})", items.join(", "))
            }
        }
    }
}

/// A complete trigger. Evaluation is pure and total over evidence.
///
/// `IfNoHardMatch` is the compiled form of the `default` keyword: the
/// parser replaces it with the negated disjunction of every hard trigger in
/// the same source, so the default rule matches exactly the evidence no
/// deterministic override claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriggerCondition {
    All(Vec<TriggerClause>),
    IfNoHardMatch(Vec<TriggerCondition>),
}

impl TriggerCondition {
    pub fn eval(&self, ev: &PatientEvidence) -> bool {
        match self {
            TriggerCondition::All(clauses) => clauses.iter().all(|c| c.eval(ev)),
            TriggerCondition::IfNoHardMatch(hard) => !hard.iter().any(|t| t.eval(ev)),
        }
    }

    fn pinned_subtype(&self) -> Option<MolecularSubtype> {
        match self {
            TriggerCondition::All(clauses) => clauses.iter().find_map(|c| match c {
                TriggerClause::Atom(a) => a.pinned_subtype(),
                TriggerClause::AnyOf(_) => None,
            }),
            TriggerCondition::IfNoHardMatch(_) => None,
        }
    }
}

impl fmt::Display for TriggerCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TriggerCondition::All(clauses) if clauses.is_empty() => f.write_str("always"),
            TriggerCondition::All(clauses) => {
                let items: Vec<String> = clauses.iter().map(|c| c.to_string()).collect();
                f.write_str(&items.join(" and "))
            }
            TriggerCondition::IfNoHardMatch(_) => f.write_str("default (no hard rule matches)"),
        }
    }
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RulePath {
    Hard,
    Soft,
}

impl fmt::Display for RulePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RulePath::Hard => "hard",
            RulePath::Soft => "soft",
        })
    }
}

/// What a rule assigns when it wins: a concrete tier, or referral to chair
/// reasoning (the default rule only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RuleOutcome {
    Tier(RiskTier),
    ChairReferral,
}

impl RuleOutcome {
    /// Severity used by conservative tie-breaking. Chair referral ranks
    /// below every concrete tier: a rule that commits to a tier wins over
    /// one that defers.
    fn severity(&self) -> i8 {
        match self {
            RuleOutcome::Tier(t) => t.rank() as i8,
            RuleOutcome::ChairReferral => -1,
        }
    }

    pub fn tier(&self) -> Option<RiskTier> {
        match self {
            RuleOutcome::Tier(t) => Some(*t),
            RuleOutcome::ChairReferral => None,
        }
    }
}

impl fmt::Display for RuleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleOutcome::Tier(t) => t.fmt(f),
            RuleOutcome::ChairReferral => f.write_str("ChairReferral"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecutableRule {
    pub id: RuleId,
    pub priority: u32,
    pub path: RulePath,
    pub trigger: TriggerCondition,
    pub outcome: RuleOutcome,
    /// Rules this one eliminates when both match at equal priority.
    pub overrides: Vec<RuleId>,
    /// The rule this one displaces when both match at equal priority.
    pub exception_of: Option<RuleId>,
    /// Guideline chunk ids this rule was derived from; never empty.
    pub derived_from: Vec<String>,
}

/// A parsed, completeness-checked collection of rules.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    /// SHA-256 of the source text, hex-encoded. Embedded in every audit
    /// record so a decision can be traced to the exact rule text.
    pub source_hash: String,
    rules: Vec<ExecutableRule>,
    index: BTreeMap<RuleId, usize>,
}

impl RuleSet {
    pub fn rules(&self) -> &[ExecutableRule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&ExecutableRule> {
        self.index.get(id).map(|&i| &self.rules[i])
    }

    /// Every rule whose trigger evaluates true, in source order. Never empty
    /// for schema-valid evidence thanks to the load-time completeness check.
    pub fn match_rules(&self, ev: &PatientEvidence) -> Vec<&ExecutableRule> {
        self.rules.iter().filter(|r| r.trigger.eval(ev)).collect()
    }

    /// Matches, restricts to hard rules, and arbitrates. `None` when no
    /// hard rule matches.
    pub fn arbitrate_hard(&self, ev: &PatientEvidence) -> Option<MatchResult> {
        let hard: Vec<&ExecutableRule> = self
            .match_rules(ev)
            .into_iter()
            .filter(|r| r.path == RulePath::Hard)
            .collect();
        if hard.is_empty() {
            None
        } else {
            Some(resolve_priority(&hard))
        }
    }
}

// ---------------------------------------------------------------------------
// Arbitration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum EliminationReason {
    /// A matched rule with a lower priority number exists.
    OutPrioritized { winner_priority: u32 },
    /// An exception to this rule matched at the same priority.
    DisplacedByException { by: RuleId },
    /// Another matched rule lists this one in its overrides.
    Overridden { by: RuleId },
    /// Equal priority, contradictory outcomes: the higher tier wins.
    LowerTier { by: RuleId },
    /// Identical priority and outcome severity: rule-id order decides.
    IdOrder { by: RuleId },
}

impl fmt::Display for EliminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EliminationReason::OutPrioritized { winner_priority } => {
                write!(f, "outprioritized (winning priority {winner_priority})")
            }
            EliminationReason::DisplacedByException { by } => {
                write!(f, "displaced by exception {by}")
            }
            EliminationReason::Overridden { by } => write!(f, "overridden by {by}"),
            EliminationReason::LowerTier { by } => {
                write!(f, "lower risk tier than {by} (conservative fallback)")
            }
            EliminationReason::IdOrder { by } => write!(f, "rule-id tie-break lost to {by}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Elimination {
    pub rule: RuleId,
    pub reason: EliminationReason,
}

/// Arbitration outcome: every matched rule is either the winner or appears
/// exactly once in the dominance trace.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub matched: Vec<RuleId>,
    pub winner: RuleId,
    pub outcome: RuleOutcome,
    pub winner_priority: u32,
    pub dominance_trace: Vec<Elimination>,
}

/// Picks one winner from a non-empty set of matched rules.
///
/// Steps, in order: (1) keep only the minimum priority number; (2) within
/// that set, an exception displaces its target; (3) a rule listed in a
/// surviving rule's overrides is eliminated (if that would empty the set,
/// the overrides are mutually destructive and are ignored); (4) remaining
/// disagreement resolves to the highest-severity outcome, then to the
/// lexicographically smallest rule id. Panics if `matched` is empty, which
/// a completeness-checked ruleset cannot produce.
pub fn resolve_priority(matched: &[&ExecutableRule]) -> MatchResult {
    assert!(
        !matched.is_empty(),
        "resolve_priority requires at least one matched rule"
    );
    let mut trace: Vec<Elimination> = Vec::new();

    let min_priority = matched.iter().map(|r| r.priority).min().unwrap();
    let mut set: Vec<&ExecutableRule> = Vec::new();
    for r in matched {
        if r.priority == min_priority {
            set.push(r);
        } else {
            trace.push(Elimination {
                rule: r.id.clone(),
                reason: EliminationReason::OutPrioritized {
                    winner_priority: min_priority,
                },
            });
        }
    }

    // Exceptions displace their targets. Displacement is computed against
    // the step's input set, so a chain of exceptions eliminates every link
    // but the last.
    let displaced: Vec<(RuleId, RuleId)> = set
        .iter()
        .filter_map(|e| {
            e.exception_of.as_ref().and_then(|target| {
                set.iter()
                    .find(|r| &r.id == target)
                    .map(|t| (t.id.clone(), e.id.clone()))
            })
        })
        .collect();
    if !displaced.is_empty() {
        set.retain(|r| {
            if let Some((_, by)) = displaced.iter().find(|(t, _)| t == &r.id) {
                trace.push(Elimination {
                    rule: r.id.clone(),
                    reason: EliminationReason::DisplacedByException { by: by.clone() },
                });
                false
            } else {
                true
            }
        });
    }

    // Overrides. Evaluated simultaneously over the current set; a set that
    // would eliminate itself entirely is left untouched.
    let overridden: Vec<(RuleId, RuleId)> = set
        .iter()
        .flat_map(|q| {
            set.iter()
                .filter(|r| r.id != q.id && q.overrides.contains(&r.id))
                .map(|r| (r.id.clone(), q.id.clone()))
        })
        .collect();
    if !overridden.is_empty() && overridden.len() < set.len() {
        set.retain(|r| {
            if let Some((_, by)) = overridden.iter().find(|(t, _)| t == &r.id) {
                trace.push(Elimination {
                    rule: r.id.clone(),
                    reason: EliminationReason::Overridden { by: by.clone() },
                });
                false
            } else {
                true
            }
        });
    }

    // Conservative fallback: highest severity, then smallest id.
    let best_severity = set.iter().map(|r| r.outcome.severity()).max().unwrap();
    let winner = set
        .iter()
        .filter(|r| r.outcome.severity() == best_severity)
        .min_by(|a, b| a.id.cmp(&b.id))
        .unwrap();
    for r in &set {
        if r.id == winner.id {
            continue;
        }
        let reason = if r.outcome.severity() < best_severity {
            EliminationReason::LowerTier {
                by: winner.id.clone(),
            }
        } else {
            EliminationReason::IdOrder {
                by: winner.id.clone(),
            }
        };
        trace.push(Elimination {
            rule: r.id.clone(),
            reason,
        });
    }

    MatchResult {
        matched: matched.iter().map(|r| r.id.clone()).collect(),
        winner: winner.id.clone(),
        outcome: winner.outcome,
        winner_priority: winner.priority,
        dominance_trace: trace,
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Default)]
struct RuleDraft {
    id: String,
    start_line: usize,
    priority: Option<u32>,
    path: Option<RulePath>,
    when_text: Option<(usize, String)>,
    outcome: Option<RuleOutcome>,
    overrides: Vec<RuleId>,
    exception_of: Option<RuleId>,
    sources: Vec<String>,
    uses_default: bool,
}

/// Parses rule source text, resolves the `default` trigger, validates
/// structural constraints, and checks completeness by enumerating the full
/// evidence grid.
pub fn parse_ruleset(source: &str) -> Result<RuleSet, RuleError> {
    let mut version: Option<String> = None;
    let mut drafts: Vec<RuleDraft> = Vec::new();
    let mut current: Option<RuleDraft> = None;
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();

    for (idx, raw_line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (keyword, rest) = match line.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        match (&mut current, keyword) {
            (None, "version") => {
                if rest.is_empty() {
                    return Err(parse_err(lineno, "version requires a value"));
                }
                if version.is_some() {
                    return Err(parse_err(lineno, "duplicate version directive"));
                }
                version = Some(rest.to_string());
            }
            (None, "rule") => {
                let id = rest;
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(parse_err(lineno, format!("bad rule id {id:?}")));
                }
                if !seen_ids.insert(id.to_string()) {
                    return Err(parse_err(lineno, format!("duplicate rule id {id}")));
                }
                current = Some(RuleDraft {
                    id: id.to_string(),
                    start_line: lineno,
                    ..RuleDraft::default()
                });
            }
            (None, other) => {
                return Err(parse_err(
                    lineno,
                    format!("expected `rule` or `version`, found {other:?}"),
                ));
            }
            (Some(draft), "priority") => {
                let p: u32 = rest
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad priority {rest:?}")))?;
                draft.priority = Some(p);
            }
            (Some(draft), "path") => {
                draft.path = Some(match rest {
                    "hard" => RulePath::Hard,
                    "soft" => RulePath::Soft,
                    other => {
                        return Err(parse_err(
                            lineno,
                            format!("path must be hard or soft, found {other:?}"),
                        ))
                    }
                });
            }
            (Some(draft), "when") => {
                if rest.is_empty() {
                    return Err(parse_err(lineno, "when requires a condition"));
                }
                draft.when_text = Some((lineno, rest.to_string()));
            }
            (Some(draft), "outcome") => {
                draft.outcome = Some(if rest == "ChairReferral" {
                    RuleOutcome::ChairReferral
                } else {
                    RiskTier::from_token(rest)
                        .map(RuleOutcome::Tier)
                        .ok_or_else(|| {
                            parse_err(lineno, format!("unknown outcome {rest:?}"))
                        })?
                });
            }
            (Some(draft), "overrides") => {
                for id in rest.split(',') {
                    let id = id.trim();
                    if id.is_empty() {
                        return Err(parse_err(lineno, "empty id in overrides list"));
                    }
                    draft.overrides.push(id.to_string());
                }
            }
            (Some(draft), "exception_of") => {
                if rest.is_empty() {
                    return Err(parse_err(lineno, "exception_of requires a rule id"));
                }
                draft.exception_of = Some(rest.to_string());
            }
            (Some(draft), "source") => {
                if rest.is_empty() {
                    return Err(parse_err(lineno, "source requires a chunk id"));
                }
                draft.sources.push(rest.to_string());
            }
            (Some(_), "end") => {
                drafts.push(current.take().unwrap());
            }
            (Some(_), other) => {
                return Err(parse_err(lineno, format!("unknown directive {other:?}")));
            }
        }
    }
    if let Some(draft) = current {
        return Err(parse_err(
            draft.start_line,
            format!("rule {} is missing its `end`", draft.id),
        ));
    }
    if drafts.is_empty() {
        return Err(parse_err(1, "source contains no rules"));
    }

    // First pass: build triggers, leaving `default` rules for the second
    // pass once every hard trigger is known.
    let mut rules: Vec<ExecutableRule> = Vec::new();
    for draft in &mut drafts {
        let (when_line, when_text) = draft
            .when_text
            .clone()
            .ok_or_else(|| parse_err(draft.start_line, format!("rule {} has no `when`", draft.id)))?;
        let priority = draft
            .priority
            .ok_or_else(|| parse_err(draft.start_line, format!("rule {} has no priority", draft.id)))?;
        let path = draft
            .path
            .ok_or_else(|| parse_err(draft.start_line, format!("rule {} has no path", draft.id)))?;
        let outcome = draft
            .outcome
            .ok_or_else(|| parse_err(draft.start_line, format!("rule {} has no outcome", draft.id)))?;
        if draft.sources.is_empty() {
            return Err(parse_err(
                draft.start_line,
                format!("rule {} cites no source chunk", draft.id),
            ));
        }
        match path {
            RulePath::Hard => {
                if !(1..=4).contains(&priority) {
                    return Err(parse_err(
                        draft.start_line,
                        format!("hard rule {} must have priority 1-4, has {priority}", draft.id),
                    ));
                }
                if matches!(outcome, RuleOutcome::ChairReferral) {
                    return Err(parse_err(
                        draft.start_line,
                        format!("hard rule {} must assign a concrete tier", draft.id),
                    ));
                }
            }
            RulePath::Soft => {
                if priority != 10 {
                    return Err(parse_err(
                        draft.start_line,
                        format!("soft rule {} must have priority 10, has {priority}", draft.id),
                    ));
                }
            }
        }

        let trigger = if when_text.trim() == "default" {
            if path == RulePath::Hard {
                return Err(parse_err(
                    when_line,
                    format!("rule {}: `default` is only valid on soft rules", draft.id),
                ));
            }
            draft.uses_default = true;
            TriggerCondition::All(Vec::new()) // placeholder, resolved below
        } else {
            parse_condition(&when_text, when_line)?
        };

        rules.push(ExecutableRule {
            id: draft.id.clone(),
            priority,
            path,
            trigger,
            outcome,
            overrides: draft.overrides.clone(),
            exception_of: draft.exception_of.clone(),
            derived_from: draft.sources.clone(),
        });
    }

    // Second pass: compile `default` triggers against the hard triggers.
    let hard_triggers: Vec<TriggerCondition> = rules
        .iter()
        .filter(|r| r.path == RulePath::Hard)
        .map(|r| r.trigger.clone())
        .collect();
    for (rule, draft) in rules.iter_mut().zip(&drafts) {
        if draft.uses_default {
            rule.trigger = TriggerCondition::IfNoHardMatch(hard_triggers.clone());
        }
    }

    // Cross-rule references.
    let ids: BTreeSet<&str> = rules.iter().map(|r| r.id.as_str()).collect();
    for (rule, draft) in rules.iter().zip(&drafts) {
        for target in &rule.overrides {
            if target == &rule.id {
                return Err(parse_err(
                    draft.start_line,
                    format!("rule {} overrides itself", rule.id),
                ));
            }
            if !ids.contains(target.as_str()) {
                return Err(parse_err(
                    draft.start_line,
                    format!("rule {} overrides unknown rule {target}", rule.id),
                ));
            }
        }
        if let Some(target) = &rule.exception_of {
            if target == &rule.id {
                return Err(parse_err(
                    draft.start_line,
                    format!("rule {} cannot be an exception of itself", rule.id),
                ));
            }
            if !ids.contains(target.as_str()) {
                return Err(parse_err(
                    draft.start_line,
                    format!("rule {} is exception of unknown rule {target}", rule.id),
                ));
            }
            let target_rule = rules.iter().find(|r| &r.id == target).unwrap();
            let own_locus = rule.trigger.pinned_subtype();
            let target_locus = target_rule.trigger.pinned_subtype();
            if own_locus.is_none() || own_locus != target_locus {
                return Err(parse_err(
                    draft.start_line,
                    format!(
                        "exception {} must pin the same subtype as its target {target}",
                        rule.id
                    ),
                ));
            }
        }
    }

    // Completeness: every grid point must match something.
    for ev in evidence_grid() {
        if !rules.iter().any(|r| r.trigger.eval(&ev)) {
            let witness = format!(
                "subtype={} stage={} histology={} grade={} mi={} lvsi={}",
                ev.subtype.map(|s| s.as_str()).unwrap_or("-"),
                ev.stage_code().map(|s| s.as_str()).unwrap_or("-"),
                ev.histology.map(|h| h.as_str()).unwrap_or("-"),
                ev.grade,
                ev.myometrial_invasion,
                ev.lvsi,
            );
            return Err(RuleError::Completeness { witness });
        }
    }

    let index = rules
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.clone(), i))
        .collect();
    Ok(RuleSet {
        version: version.unwrap_or_else(|| "unversioned".to_string()),
        source_hash: hex::encode(Sha256::digest(source.as_bytes())),
        rules,
        index,
    })
}

/// Splits a `when` expression into conjunct clauses on the word `and` at
/// parenthesis depth zero, then parses each clause.
fn parse_condition(text: &str, line: usize) -> Result<TriggerCondition, RuleError> {
    let mut clauses_text: Vec<String> = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    let tokens: Vec<&str> = text.split_whitespace().collect();
    for token in &tokens {
        depth += token.matches('(').count();
        let closing = token.matches(')').count();
        if closing > depth {
            return Err(parse_err(line, "unbalanced parentheses"));
        }
        if *token == "and" && depth == 0 {
            if cur.trim().is_empty() {
                return Err(parse_err(line, "empty clause before `and`"));
            }
            clauses_text.push(std::mem::take(&mut cur));
        } else {
            if !cur.is_empty() {
                cur.push(' ');
            }
            cur.push_str(token);
        }
        depth -= closing;
    }
    if depth != 0 {
        return Err(parse_err(line, "unbalanced parentheses"));
    }
    if cur.trim().is_empty() {
        return Err(parse_err(line, "empty trailing clause"));
    }
    clauses_text.push(cur);

    let mut clauses = Vec::new();
    for clause_text in clauses_text {
        let clause_text = clause_text.trim();
        if let Some(inner) = clause_text
            .strip_prefix("any(")
            .and_then(|s| s.strip_suffix(')'))
        {
            let atoms: Result<Vec<TriggerAtom>, RuleError> = inner
                .split(',')
                .map(|a| parse_atom(a.trim(), line))
                .collect();
            let atoms = atoms?;
            if atoms.len() < 2 {
                return Err(parse_err(line, "any(...) needs at least two atoms"));
            }
            clauses.push(TriggerClause::AnyOf(atoms));
        } else {
            clauses.push(TriggerClause::Atom(parse_atom(clause_text, line)?));
        }
    }
    Ok(TriggerCondition::All(clauses))
}

fn parse_atom(text: &str, line: usize) -> Result<TriggerAtom, RuleError> {
    if text == "default" {
        return Err(parse_err(
            line,
            "`default` must be the entire condition, not one clause",
        ));
    }
    // histology in { A, B, C }
    if let Some(rest) = text.strip_prefix("histology in") {
        let rest = rest.trim();
        let inner = rest
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| parse_err(line, format!("bad histology set {rest:?}")))?;
        let mut set = BTreeSet::new();
        for item in inner.split(',') {
            let item = item.trim();
            let h = Histology::from_token(item)
                .ok_or_else(|| parse_err(line, format!("unknown histology {item:?}")))?;
            set.insert(h);
        }
        if set.is_empty() {
            return Err(parse_err(line, "empty histology set"));
        }
        return Ok(TriggerAtom::HistologyIn(set));
    }

    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(line, format!("malformed atom {text:?}")));
    }
    let (field, op, value) = (parts[0], parts[1], parts[2]);
    match (field, op) {
        ("subtype", "==") => MolecularSubtype::from_token(value)
            .map(TriggerAtom::SubtypeEquals)
            .ok_or_else(|| parse_err(line, format!("unknown subtype {value:?}"))),
        ("stage", "==") => StageCode::from_token(value)
            .map(TriggerAtom::StageEquals)
            .ok_or_else(|| parse_err(line, format!("unknown stage {value:?}"))),
        ("stage", ">=") => StageCode::from_token(value)
            .map(TriggerAtom::StageAtLeast)
            .ok_or_else(|| parse_err(line, format!("unknown stage {value:?}"))),
        ("histology", "==") => Histology::from_token(value)
            .map(TriggerAtom::HistologyEquals)
            .ok_or_else(|| parse_err(line, format!("unknown histology {value:?}"))),
        ("grade", "==") => match Grade::from_token(value) {
            Some(Grade::Unknown) | None => {
                Err(parse_err(line, format!("grade {value:?} is not triggerable")))
            }
            Some(g) => Ok(TriggerAtom::GradeEquals(g)),
        },
        ("mi", "==") => match MyoInvasion::from_token(value) {
            Some(MyoInvasion::Unknown) | None => {
                Err(parse_err(line, format!("mi {value:?} is not triggerable")))
            }
            Some(m) => Ok(TriggerAtom::MiEquals(m)),
        },
        ("lvsi", "==") => match Lvsi::from_token(value) {
            Some(Lvsi::Unknown) | None => {
                Err(parse_err(line, format!("lvsi {value:?} is not triggerable")))
            }
            Some(l) => Ok(TriggerAtom::LvsiEquals(l)),
        },
        _ => Err(parse_err(
            line,
            format!("unknown field/operator in atom {text:?}"),
        )),
    }
}
