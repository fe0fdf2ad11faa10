//! The guideline knowledge graph: evidence-weighted cross-document linking,
//! rule provenance, Top-K semantic retrieval, dedup, and hierarchical tags.
//!
//! The graph is built once from a line-delimited corpus plus a rule set and
//! is immutable afterwards; queries are pure reads. Authority enters through
//! a per-document evidence level l in 1..=5: a document's weight is 1/l, and
//! a cross-document link must clear `delta_r` after that damping, so weaker
//! sources need much closer embeddings to participate at all.

use crate::domain::{Lvsi, MyoInvasion, PatientEvidence, StageCode};
use crate::embed::cosine;
use crate::ruleset::{
    ExecutableRule, RuleOutcome, RuleSet, TriggerAtom, TriggerClause, TriggerCondition,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Minimum evidence-weighted score for a REFERENCE edge.
pub const DEFAULT_DELTA_R: f64 = 0.6;
/// Cosine above which two entities are considered the same concept.
pub const DEDUP_COSINE: f64 = 0.95;
/// Retrieval depth of the evidence packet.
pub const DEFAULT_TOP_K: usize = 25;
/// Default stopping similarity for the built graph's tag hierarchy.
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.5;
/// Chunking upper bound the builder enforces on ingested text.
pub const MAX_CHUNK_TOKENS: u32 = 1200;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("zero-magnitude embedding")]
    ZeroVector,
    #[error("rule {0} cites a chunk missing from the corpus")]
    DanglingSource(String),
    #[error("corpus line {line}: {message}")]
    CorpusFormat { line: usize, message: String },
    #[error("graph artifact unreadable: {0}")]
    GraphArtifact(String),
}

fn format_err(line: usize, message: impl Into<String>) -> KgError {
    KgError::CorpusFormat {
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Node and edge types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocTier {
    Guideline,
    Consensus,
}

/// The seven semantic categories entities are constrained to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    MolecularMarker,
    HistologicalType,
    StagingConcept,
    ClinicalFeature,
    Procedure,
    Medication,
    RiskCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub title: String,
    pub tier: DocTier,
    pub evidence_level: u8,
}

impl CorpusDoc {
    /// Authority weight 1/l in (0, 1].
    pub fn authority(&self) -> f64 {
        1.0 / self.evidence_level as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub tier: DocTier,
    pub evidence_level: u8,
    pub text: String,
    pub token_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub entity_id: String,
    pub label: String,
    pub category: SemanticCategory,
    pub embedding: Vec<f64>,
    pub home_chunk: String,
}

/// A derived cross-document edge. The weight always equals the link score
/// recomputed from the endpoints; it is stored, not free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEdge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleEdgeKind {
    /// Rule -> entity named in its trigger.
    ActivatedBy,
    /// Rule -> entity naming its outcome.
    LeadsTo,
    /// Rule -> rule it eliminates on conflict.
    Overrides,
    /// Rule -> rule it displaces as an exception.
    ExceptionOf,
    /// Rule -> chunk it was derived from.
    DerivedFrom,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleLayerEdge {
    pub kind: RuleEdgeKind,
    pub rule_id: String,
    pub target: String,
}

// ---------------------------------------------------------------------------
// Link scoring
// ---------------------------------------------------------------------------

/// Evidence-weighted link score: cosine of the embeddings scaled by the mean
/// of the two documents' authority weights 1/l. Symmetric in its arguments.
pub fn link_score(
    h_i: &[f64],
    h_j: &[f64],
    level_i: u8,
    level_j: u8,
) -> Result<f64, KgError> {
    let c = cosine(h_i, h_j).map_err(|_| KgError::ZeroVector)?;
    Ok(c * 0.5 * (1.0 / level_i as f64 + 1.0 / level_j as f64))
}

// ---------------------------------------------------------------------------
// Corpus parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawRecord {
    Doc {
        doc_id: String,
        title: String,
        tier: DocTier,
        evidence_level: u8,
    },
    Chunk {
        chunk_id: String,
        doc_id: String,
        text: String,
        token_count: u32,
    },
    Entity {
        entity_id: String,
        label: String,
        category: SemanticCategory,
        chunk_id: String,
        embedding: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: BTreeMap<String, CorpusDoc>,
    pub chunks: BTreeMap<String, DocumentChunk>,
    pub entities: BTreeMap<String, EntityNode>,
}

/// Parses and validates a line-delimited corpus. Records may appear in any
/// order; validation is two-pass so a chunk can precede its document.
pub fn parse_corpus(source: &str) -> Result<Corpus, KgError> {
    let mut docs: BTreeMap<String, CorpusDoc> = BTreeMap::new();
    let mut raw_chunks: Vec<(usize, String, String, String, u32)> = Vec::new();
    let mut raw_entities: Vec<(usize, EntityNode)> = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(line)
            .map_err(|e| format_err(lineno, format!("unparseable record: {e}")))?;
        match record {
            RawRecord::Doc {
                doc_id,
                title,
                tier,
                evidence_level,
            } => {
                if !(1..=5).contains(&evidence_level) {
                    return Err(format_err(
                        lineno,
                        format!("evidence_level {evidence_level} outside 1..=5"),
                    ));
                }
                if tier == DocTier::Guideline && evidence_level != 1 {
                    return Err(format_err(
                        lineno,
                        format!("guideline document {doc_id} must have evidence_level 1"),
                    ));
                }
                let doc = CorpusDoc {
                    doc_id: doc_id.clone(),
                    title,
                    tier,
                    evidence_level,
                };
                if docs.insert(doc_id.clone(), doc).is_some() {
                    return Err(format_err(lineno, format!("duplicate doc_id {doc_id}")));
                }
            }
            RawRecord::Chunk {
                chunk_id,
                doc_id,
                text,
                token_count,
            } => {
                if token_count > MAX_CHUNK_TOKENS {
                    return Err(format_err(
                        lineno,
                        format!("chunk {chunk_id} has {token_count} tokens, limit is {MAX_CHUNK_TOKENS}"),
                    ));
                }
                raw_chunks.push((lineno, chunk_id, doc_id, text, token_count));
            }
            RawRecord::Entity {
                entity_id,
                label,
                category,
                chunk_id,
                embedding,
            } => {
                if embedding.iter().all(|x| *x == 0.0) {
                    return Err(format_err(
                        lineno,
                        format!("entity {entity_id} has a zero-magnitude embedding"),
                    ));
                }
                raw_entities.push((
                    lineno,
                    EntityNode {
                        entity_id,
                        label,
                        category,
                        embedding,
                        home_chunk: chunk_id,
                    },
                ));
            }
        }
    }

    let mut chunks = BTreeMap::new();
    for (lineno, chunk_id, doc_id, text, token_count) in raw_chunks {
        let doc = docs
            .get(&doc_id)
            .ok_or_else(|| format_err(lineno, format!("chunk {chunk_id} names unknown document {doc_id}")))?;
        let chunk = DocumentChunk {
            chunk_id: chunk_id.clone(),
            doc_id,
            tier: doc.tier,
            evidence_level: doc.evidence_level,
            text,
            token_count,
        };
        if chunks.insert(chunk_id.clone(), chunk).is_some() {
            return Err(format_err(lineno, format!("duplicate chunk_id {chunk_id}")));
        }
    }

    let mut entities = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (lineno, entity) in raw_entities {
        if !chunks.contains_key(&entity.home_chunk) {
            return Err(format_err(
                lineno,
                format!(
                    "entity {} names unknown chunk {}",
                    entity.entity_id, entity.home_chunk
                ),
            ));
        }
        match dim {
            None => dim = Some(entity.embedding.len()),
            Some(d) if d != entity.embedding.len() => {
                return Err(format_err(
                    lineno,
                    format!(
                        "entity {} has dimension {}, corpus uses {}",
                        entity.entity_id,
                        entity.embedding.len(),
                        d
                    ),
                ));
            }
            Some(_) => {}
        }
        let id = entity.entity_id.clone();
        if entities.insert(id.clone(), entity).is_some() {
            return Err(format_err(lineno, format!("duplicate entity_id {id}")));
        }
    }

    Ok(Corpus {
        docs,
        chunks,
        entities,
    })
}

// ---------------------------------------------------------------------------
// Tag hierarchy
// ---------------------------------------------------------------------------

/// One agglomerative merge. `left` and `right` are the representative ids
/// (lexicographically smallest member) of the clusters that merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: String,
    pub right: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagNode {
    /// Sorted ids of every entity under this node.
    pub members: Vec<String>,
    /// Average-linkage similarity at which this node's children merged;
    /// absent for leaves.
    pub similarity: Option<f64>,
    pub children: Vec<TagNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagHierarchy {
    /// Root clusters left when no pair clears the merge threshold, ordered
    /// by representative id.
    pub roots: Vec<TagNode>,
    /// Merge order, most similar first.
    pub merges: Vec<MergeStep>,
}

/// Average-linkage agglomerative clustering on embedding cosine similarity.
///
/// Repeatedly merges the pair of clusters with the highest average pairwise
/// similarity until the best remaining pair falls below `merge_threshold`.
/// Exact similarity ties break on the lexicographically smallest pair of
/// cluster representatives. Uses the standard weighted-average update: the
/// similarity of a merged cluster to any third cluster is the size-weighted
/// mean of its parts, which equals the full average-of-pairs recomputation.
pub fn cluster_tags(entities: &[EntityNode], merge_threshold: f64) -> TagHierarchy {
    assert!(!entities.is_empty(), "clustering needs at least one entity");
    let mut order: Vec<&EntityNode> = entities.iter().collect();
    order.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));

    struct Cluster {
        rep: String,
        size: f64,
        node: TagNode,
    }
    let mut clusters: Vec<Option<Cluster>> = order
        .iter()
        .map(|e| {
            Some(Cluster {
                rep: e.entity_id.clone(),
                size: 1.0,
                node: TagNode {
                    members: vec![e.entity_id.clone()],
                    similarity: None,
                    children: Vec::new(),
                },
            })
        })
        .collect();

    let n = order.len();
    let mut sim = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = cosine(&order[i].embedding, &order[j].embedding)
                .expect("corpus entities have non-zero embeddings");
            sim[i][j] = c;
            sim[j][i] = c;
        }
    }

    fn ordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            let Some(ci) = clusters[i].as_ref() else { continue };
            for j in (i + 1)..n {
                let Some(cj) = clusters[j].as_ref() else { continue };
                let s = sim[i][j];
                let better = match best {
                    None => true,
                    Some((bi, bj, bs)) => {
                        if s != bs {
                            s > bs
                        } else {
                            let prev = ordered(
                                &clusters[bi].as_ref().unwrap().rep,
                                &clusters[bj].as_ref().unwrap().rep,
                            );
                            ordered(&ci.rep, &cj.rep) < prev
                        }
                    }
                };
                if better {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, s)) = best else { break };
        if s < merge_threshold {
            break;
        }

        let cj = clusters[j].take().unwrap();
        let ci = clusters[i].take().unwrap();
        let (size_i, size_j) = (ci.size, cj.size);
        let (lo, hi) = {
            let (a, b) = ordered(&ci.rep, &cj.rep);
            (a.to_string(), b.to_string())
        };
        merges.push(MergeStep {
            left: lo.clone(),
            right: hi,
            similarity: s,
        });

        let mut members: Vec<String> = ci
            .node
            .members
            .iter()
            .chain(cj.node.members.iter())
            .cloned()
            .collect();
        members.sort();

        // Weighted-average update against every other active cluster.
        for k in 0..n {
            if k == i || k == j || clusters[k].is_none() {
                continue;
            }
            let merged_sim = (size_i * sim[i][k] + size_j * sim[j][k]) / (size_i + size_j);
            sim[i][k] = merged_sim;
            sim[k][i] = merged_sim;
        }
        clusters[i] = Some(Cluster {
            rep: lo,
            size: size_i + size_j,
            node: TagNode {
                members,
                similarity: Some(s),
                children: vec![ci.node, cj.node],
            },
        });
    }

    let mut roots: Vec<TagNode> = clusters.into_iter().flatten().map(|c| c.node).collect();
    roots.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    TagHierarchy { roots, merges }
}

// ---------------------------------------------------------------------------
// Graph construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineGraph {
    docs: BTreeMap<String, CorpusDoc>,
    chunks: BTreeMap<String, DocumentChunk>,
    entities: BTreeMap<String, EntityNode>,
    /// Dedup casualties: retired entity id -> surviving entity id.
    merged_aliases: BTreeMap<String, String>,
    reference_edges: Vec<ReferenceEdge>,
    containment_edges: BTreeSet<(String, String)>,
    rule_layer_edges: Vec<RuleLayerEdge>,
    tag_hierarchy: TagHierarchy,
    delta_r: f64,
    digest: String,
}

/// The label an outcome anchors to in the entity layer.
pub fn outcome_label(outcome: RuleOutcome) -> &'static str {
    match outcome {
        RuleOutcome::Tier(t) => t.as_str(),
        RuleOutcome::ChairReferral => "Tumor board referral",
    }
}

fn atom_labels(atom: &TriggerAtom, labels: &mut BTreeSet<String>) {
    match atom {
        TriggerAtom::SubtypeEquals(s) => {
            labels.insert(s.as_str().to_string());
        }
        TriggerAtom::StageEquals(c) => {
            labels.insert(c.as_str().to_string());
        }
        TriggerAtom::StageAtLeast(min) => {
            for c in StageCode::ALL {
                if c.rank() >= min.rank() {
                    labels.insert(c.as_str().to_string());
                }
            }
        }
        TriggerAtom::HistologyEquals(h) => {
            labels.insert(h.as_str().to_string());
        }
        TriggerAtom::HistologyIn(set) => {
            for h in set {
                labels.insert(h.as_str().to_string());
            }
        }
        TriggerAtom::GradeEquals(g) => {
            labels.insert(g.as_str().to_string());
        }
        TriggerAtom::MiEquals(m) => {
            labels.insert(
                match m {
                    MyoInvasion::None => "No-MI",
                    MyoInvasion::Superficial => "Superficial-MI",
                    MyoInvasion::Deep => "Deep-MI",
                    MyoInvasion::Unknown => unreachable!("unknown is not triggerable"),
                }
                .to_string(),
            );
        }
        TriggerAtom::LvsiEquals(l) => {
            labels.insert(
                match l {
                    Lvsi::Positive => "LVSI-Positive",
                    Lvsi::Negative => "LVSI-Negative",
                    Lvsi::Unknown => unreachable!("unknown is not triggerable"),
                }
                .to_string(),
            );
        }
    }
}

/// Entity labels a rule's trigger names. The default rule's compiled
/// negation anchors to nothing.
pub fn trigger_labels(trigger: &TriggerCondition) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    if let TriggerCondition::All(clauses) = trigger {
        for clause in clauses {
            match clause {
                TriggerClause::Atom(a) => atom_labels(a, &mut labels),
                TriggerClause::AnyOf(atoms) => {
                    for a in atoms {
                        atom_labels(a, &mut labels);
                    }
                }
            }
        }
    }
    labels
}

/// Builds the immutable graph: parse, dedup, weighted cross-document
/// linking, rule-layer instantiation, tag hierarchy, digest.
pub fn build_graph(
    corpus_source: &str,
    rs: &RuleSet,
    delta_r: f64,
) -> Result<GuidelineGraph, KgError> {
    let corpus = parse_corpus(corpus_source)?;
    let Corpus {
        docs,
        chunks,
        mut entities,
    } = corpus;

    // Dedup: union entities above the cosine threshold, keep the
    // lexicographically smallest id of each component, re-point the
    // retired entities' containment to the survivor.
    let ids: Vec<String> = entities.keys().cloned().collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let c = cosine(&entities[&ids[i]].embedding, &entities[&ids[j]].embedding)
                .map_err(|_| KgError::ZeroVector)?;
            if c > DEDUP_COSINE {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut survivor_of_root: BTreeMap<usize, &str> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = survivor_of_root.entry(root).or_insert(id.as_str());
        if id.as_str() < *entry {
            *entry = id.as_str();
        }
    }
    let mut merged_aliases = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        let survivor = survivor_of_root[&root];
        if survivor != id.as_str() {
            merged_aliases.insert(id.clone(), survivor.to_string());
        }
    }
    let mut containment_edges: BTreeSet<(String, String)> = BTreeSet::new();
    for entity in entities.values() {
        let surviving_id = merged_aliases
            .get(&entity.entity_id)
            .cloned()
            .unwrap_or_else(|| entity.entity_id.clone());
        containment_edges.insert((entity.home_chunk.clone(), surviving_id));
    }
    for alias in merged_aliases.keys() {
        entities.remove(alias);
    }

    // Cross-document REFERENCE edges above the threshold, both directions.
    let entity_level = |e: &EntityNode| -> (String, u8) {
        let chunk = &chunks[&e.home_chunk];
        (chunk.doc_id.clone(), chunk.evidence_level)
    };
    let mut reference_edges = Vec::new();
    let survivors: Vec<&EntityNode> = entities.values().collect();
    for a in &survivors {
        let (doc_a, level_a) = entity_level(a);
        for b in &survivors {
            if a.entity_id == b.entity_id {
                continue;
            }
            let (doc_b, level_b) = entity_level(b);
            if doc_a == doc_b {
                continue;
            }
            let w = link_score(&a.embedding, &b.embedding, level_a, level_b)?;
            if w > delta_r {
                reference_edges.push(ReferenceEdge {
                    from: a.entity_id.clone(),
                    to: b.entity_id.clone(),
                    weight: w,
                });
            }
        }
    }
    reference_edges.sort_by(|x, y| (&x.from, &x.to).cmp(&(&y.from, &y.to)));

    // Rule layer. Label anchors are case-insensitive; a trigger concept
    // with no entity in the corpus simply has no anchor edge.
    let mut label_index: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for e in entities.values() {
        label_index
            .entry(e.label.to_lowercase())
            .or_default()
            .push(&e.entity_id);
    }
    let mut rule_layer_edges = Vec::new();
    for rule in rs.rules() {
        for chunk_id in &rule.derived_from {
            if !chunks.contains_key(chunk_id) {
                return Err(KgError::DanglingSource(rule.id.clone()));
            }
            rule_layer_edges.push(RuleLayerEdge {
                kind: RuleEdgeKind::DerivedFrom,
                rule_id: rule.id.clone(),
                target: chunk_id.clone(),
            });
        }
        for label in trigger_labels(&rule.trigger) {
            for entity_id in label_index.get(&label.to_lowercase()).into_iter().flatten() {
                rule_layer_edges.push(RuleLayerEdge {
                    kind: RuleEdgeKind::ActivatedBy,
                    rule_id: rule.id.clone(),
                    target: entity_id.to_string(),
                });
            }
        }
        for entity_id in label_index
            .get(&outcome_label(rule.outcome).to_lowercase())
            .into_iter()
            .flatten()
        {
            rule_layer_edges.push(RuleLayerEdge {
                kind: RuleEdgeKind::LeadsTo,
                rule_id: rule.id.clone(),
                target: entity_id.to_string(),
            });
        }
        for target in &rule.overrides {
            rule_layer_edges.push(RuleLayerEdge {
                kind: RuleEdgeKind::Overrides,
                rule_id: rule.id.clone(),
                target: target.clone(),
            });
        }
        if let Some(target) = &rule.exception_of {
            rule_layer_edges.push(RuleLayerEdge {
                kind: RuleEdgeKind::ExceptionOf,
                rule_id: rule.id.clone(),
                target: target.clone(),
            });
        }
    }
    rule_layer_edges.sort();

    let entity_vec: Vec<EntityNode> = entities.values().cloned().collect();
    let tag_hierarchy = cluster_tags(&entity_vec, DEFAULT_MERGE_THRESHOLD);

    let digest = compute_digest(
        &docs,
        &chunks,
        &entities,
        &merged_aliases,
        &reference_edges,
        &containment_edges,
        &rule_layer_edges,
        &tag_hierarchy,
        delta_r,
    );

    Ok(GuidelineGraph {
        docs,
        chunks,
        entities,
        merged_aliases,
        reference_edges,
        containment_edges,
        rule_layer_edges,
        tag_hierarchy,
        delta_r,
        digest,
    })
}

#[allow(clippy::too_many_arguments)]
fn compute_digest(
    docs: &BTreeMap<String, CorpusDoc>,
    chunks: &BTreeMap<String, DocumentChunk>,
    entities: &BTreeMap<String, EntityNode>,
    merged_aliases: &BTreeMap<String, String>,
    reference_edges: &[ReferenceEdge],
    containment_edges: &BTreeSet<(String, String)>,
    rule_layer_edges: &[RuleLayerEdge],
    tags: &TagHierarchy,
    delta_r: f64,
) -> String {
    let mut h = Sha256::new();
    h.update(delta_r.to_bits().to_le_bytes());
    for d in docs.values() {
        h.update(d.doc_id.as_bytes());
        h.update(d.title.as_bytes());
        h.update([d.evidence_level]);
    }
    for c in chunks.values() {
        h.update(c.chunk_id.as_bytes());
        h.update(c.doc_id.as_bytes());
        h.update(c.text.as_bytes());
        h.update(c.token_count.to_le_bytes());
    }
    for e in entities.values() {
        h.update(e.entity_id.as_bytes());
        h.update(e.label.as_bytes());
        h.update(e.home_chunk.as_bytes());
        for x in &e.embedding {
            h.update(x.to_bits().to_le_bytes());
        }
    }
    for (alias, survivor) in merged_aliases {
        h.update(alias.as_bytes());
        h.update(survivor.as_bytes());
    }
    for e in reference_edges {
        h.update(e.from.as_bytes());
        h.update(e.to.as_bytes());
        h.update(e.weight.to_bits().to_le_bytes());
    }
    for (chunk, entity) in containment_edges {
        h.update(chunk.as_bytes());
        h.update(entity.as_bytes());
    }
    for e in rule_layer_edges {
        h.update(format!("{:?}", e.kind).as_bytes());
        h.update(e.rule_id.as_bytes());
        h.update(e.target.as_bytes());
    }
    for m in &tags.merges {
        h.update(m.left.as_bytes());
        h.update(m.right.as_bytes());
        h.update(m.similarity.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl GuidelineGraph {
    pub fn docs(&self) -> &BTreeMap<String, CorpusDoc> {
        &self.docs
    }

    pub fn chunks(&self) -> &BTreeMap<String, DocumentChunk> {
        &self.chunks
    }

    pub fn entities(&self) -> &BTreeMap<String, EntityNode> {
        &self.entities
    }

    pub fn entity(&self, id: &str) -> Option<&EntityNode> {
        self.entities.get(id)
    }

    /// Retired entity id -> surviving entity id from dedup.
    pub fn merged_aliases(&self) -> &BTreeMap<String, String> {
        &self.merged_aliases
    }

    pub fn reference_edges(&self) -> &[ReferenceEdge] {
        &self.reference_edges
    }

    pub fn containment_edges(&self) -> &BTreeSet<(String, String)> {
        &self.containment_edges
    }

    pub fn rule_layer_edges(&self) -> &[RuleLayerEdge] {
        &self.rule_layer_edges
    }

    pub fn tag_hierarchy(&self) -> &TagHierarchy {
        &self.tag_hierarchy
    }

    pub fn delta_r(&self) -> f64 {
        self.delta_r
    }

    /// Content digest over every structure in the graph; equal digests mean
    /// byte-equal builds.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Evidence-anchored retrieval. See [`query`].
    pub fn query(&self, rs: &RuleSet, ev: &PatientEvidence, k: usize) -> EvidencePacket {
        query(self, rs, ev, k)
    }

    /// Persists the graph as pretty JSON. Only `BTreeMap`-backed structures
    /// are involved, so the byte stream is deterministic for a given build.
    pub fn to_json(&self) -> Vec<u8> {
        let mut buf = serde_json::to_vec_pretty(self).expect("graph serializes");
        buf.push(b'\n');
        buf
    }

    pub fn from_json(bytes: &[u8]) -> Result<GuidelineGraph, KgError> {
        serde_json::from_slice(bytes).map_err(|e| KgError::GraphArtifact(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Query
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntity {
    pub entity_id: String,
    pub label: String,
    pub relevance: f64,
}

/// The unified bundle handed to the governance layer: which rules matched,
/// which chunks ground them, and the Top-K semantically relevant entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePacket {
    pub matched_rules: Vec<String>,
    pub provenance_chunks: Vec<String>,
    pub context_entities: Vec<ContextEntity>,
}

/// Assembles the evidence packet for one case.
///
/// Seeds are entities whose label equals one of the evidence's canonical
/// value labels, case-insensitively; seeds score 1.0. Every other entity
/// scores the best weight product over reference-edge paths of at most two
/// hops from any seed, zero when unreachable. Rule priorities play no part
/// in the ranking; ties break on entity id.
pub fn query(g: &GuidelineGraph, rs: &RuleSet, ev: &PatientEvidence, k: usize) -> EvidencePacket {
    assert!(k >= 1, "retrieval depth must be at least 1");
    let matched = rs.match_rules(ev);
    let matched_rules: Vec<String> = matched.iter().map(|r| r.id.clone()).collect();

    let mut provenance: BTreeSet<String> = BTreeSet::new();
    for rule in &matched {
        for chunk in &rule.derived_from {
            provenance.insert(chunk.clone());
        }
    }

    let wanted: BTreeSet<String> = ev
        .label_values()
        .into_iter()
        .map(|l| l.to_lowercase())
        .collect();
    let mut relevance: BTreeMap<&str, f64> = BTreeMap::new();
    let mut adjacency: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for e in &g.reference_edges {
        adjacency
            .entry(e.from.as_str())
            .or_default()
            .push((e.to.as_str(), e.weight));
    }
    let seeds: Vec<&str> = g
        .entities
        .values()
        .filter(|e| wanted.contains(&e.label.to_lowercase()))
        .map(|e| e.entity_id.as_str())
        .collect();
    for seed in &seeds {
        for (mid, w1) in adjacency.get(seed).into_iter().flatten() {
            let r = relevance.entry(mid).or_insert(0.0);
            if *w1 > *r {
                *r = *w1;
            }
            for (far, w2) in adjacency.get(mid).into_iter().flatten() {
                let product = w1 * w2;
                let r = relevance.entry(far).or_insert(0.0);
                if product > *r {
                    *r = product;
                }
            }
        }
    }
    for seed in &seeds {
        relevance.insert(seed, 1.0);
    }

    let mut context_entities: Vec<ContextEntity> = g
        .entities
        .values()
        .map(|e| ContextEntity {
            entity_id: e.entity_id.clone(),
            label: e.label.clone(),
            relevance: relevance.get(e.entity_id.as_str()).copied().unwrap_or(0.0),
        })
        .collect();
    context_entities.sort_by(|a, b| {
        b.relevance
            .partial_cmp(&a.relevance)
            .unwrap()
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    context_entities.truncate(k);

    EvidencePacket {
        matched_rules,
        provenance_chunks: provenance.into_iter().collect(),
        context_entities,
    }
}

/// Rules that cite a given chunk, for provenance display.
pub fn rules_citing<'a>(rs: &'a RuleSet, chunk_id: &str) -> Vec<&'a ExecutableRule> {
    rs.rules()
        .iter()
        .filter(|r| r.derived_from.iter().any(|c| c == chunk_id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MolecularSubtype, PatientEvidence, StageCode};
    use crate::embed::synthetic_unit_vector;
    use crate::ruleset::parse_ruleset;
    use proptest::prelude::*;

    fn fixture_graph() -> (GuidelineGraph, RuleSet) {
        let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
        let g = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R).unwrap();
        (g, rs)
    }

    #[test]
    fn link_score_arithmetic() {
        let v = vec![1.0, 0.0];
        assert!((link_score(&v, &v, 1, 1).unwrap() - 1.0).abs() < 1e-15);

        // cos 0.8 against levels 1 and 4 gives 0.8 * 0.625 = 0.5.
        let a = vec![1.0, 0.0];
        let b = vec![0.8, 0.6];
        let w = link_score(&a, &b, 1, 4).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
        assert!(w < DEFAULT_DELTA_R);

        assert!(matches!(
            link_score(&[0.0, 0.0], &[1.0, 0.0], 1, 1),
            Err(KgError::ZeroVector)
        ));
    }

    #[test]
    fn link_score_matches_scalar_reimplementation() {
        for i in 0..20 {
            let a = synthetic_unit_vector(&format!("lhs-{i}"), 8);
            let b = synthetic_unit_vector(&format!("rhs-{i}"), 8);
            for li in 1u8..=5 {
                for lj in 1u8..=5 {
                    let got = link_score(&a, &b, li, lj).unwrap();
                    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let expected = dot / (na * nb) * ((1.0 / li as f64) + (1.0 / lj as f64)) / 2.0;
                    assert!((got - expected).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn link_score_is_symmetric_and_authority_monotone(
            seed in 0u64..500,
            li in 1u8..=5,
            lj in 1u8..=5,
        ) {
            let a = synthetic_unit_vector(&format!("sym-a-{seed}"), 8);
            let b = synthetic_unit_vector(&format!("sym-b-{seed}"), 8);
            let w = link_score(&a, &b, li, lj).unwrap();
            let w_rev = link_score(&b, &a, lj, li).unwrap();
            prop_assert_eq!(w.to_bits(), w_rev.to_bits());

            // Raising authority (lowering the level) on either side never
            // shrinks a non-negative score.
            if li > 1 {
                let stronger = link_score(&a, &b, li - 1, lj).unwrap();
                if w >= 0.0 {
                    prop_assert!(stronger >= w);
                } else {
                    prop_assert!(stronger <= w);
                }
            }
        }
    }

    #[test]
    fn fixture_corpus_parses_with_expected_shape() {
        let corpus = parse_corpus(crate::DEFAULT_CORPUS_SOURCE).unwrap();
        assert_eq!(corpus.docs.len(), 5);
        assert_eq!(
            corpus.docs.values().filter(|d| d.tier == DocTier::Guideline).count(),
            2
        );
        assert_eq!(corpus.entities.len(), 40);
        for doc in corpus.docs.values() {
            if doc.tier == DocTier::Guideline {
                assert_eq!(doc.evidence_level, 1);
            }
        }
        let levels: BTreeSet<u8> = corpus
            .docs
            .values()
            .filter(|d| d.tier == DocTier::Consensus)
            .map(|d| d.evidence_level)
            .collect();
        assert_eq!(levels, BTreeSet::from([3, 4, 5]));
    }

    #[test]
    fn corpus_format_errors_name_the_line() {
        let bad = "{\"kind\":\"doc\",\"doc_id\":\"d\",\"title\":\"t\",\"tier\":\"guideline\",\"evidence_level\":2}";
        match parse_corpus(bad) {
            Err(KgError::CorpusFormat { line, message }) => {
                assert_eq!(line, 1);
                assert!(message.contains("evidence_level 1"));
            }
            other => panic!("expected CorpusFormat, got {other:?}"),
        }

        let orphan = concat!(
            "{\"kind\":\"doc\",\"doc_id\":\"d\",\"title\":\"t\",\"tier\":\"consensus\",\"evidence_level\":3}\n",
            "{\"kind\":\"entity\",\"entity_id\":\"d:e1\",\"label\":\"x\",\"category\":\"procedure\",\"chunk_id\":\"d:c9\",\"embedding\":[1.0]}\n",
        );
        match parse_corpus(orphan) {
            Err(KgError::CorpusFormat { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown chunk"));
            }
            other => panic!("expected CorpusFormat, got {other:?}"),
        }

        let oversized = concat!(
            "{\"kind\":\"doc\",\"doc_id\":\"d\",\"title\":\"t\",\"tier\":\"consensus\",\"evidence_level\":3}\n",
            "{\"kind\":\"chunk\",\"chunk_id\":\"d:c1\",\"doc_id\":\"d\",\"text\":\"t\",\"token_count\":1201}\n",
        );
        assert!(matches!(
            parse_corpus(oversized),
            Err(KgError::CorpusFormat { line: 2, .. })
        ));
    }

    #[test]
    fn dedup_keeps_lexicographically_smaller_id() {
        let (g, _) = fixture_graph();
        // Two engineered near-duplicate pairs; 40 entities shrink to 38.
        assert_eq!(g.entities().len(), 38);
        assert_eq!(
            g.merged_aliases().get("esmo2022:e01").map(String::as_str),
            Some("esgo2021:e01")
        );
        assert_eq!(
            g.merged_aliases().get("esmo2022:e14").map(String::as_str),
            Some("cons_staging:e01")
        );
        // The retired entities' chunks still contain the survivors.
        assert!(g
            .containment_edges()
            .contains(&("esmo2022:c1".to_string(), "esgo2021:e01".to_string())));
        assert!(g
            .containment_edges()
            .contains(&("esmo2022:c3".to_string(), "cons_staging:e01".to_string())));
    }

    #[test]
    fn reference_edges_match_exhaustive_pairwise_oracle() {
        let (g, _) = fixture_graph();

        // Oracle: recompute every surviving cross-document pair directly.
        let mut expected = Vec::new();
        let entities: Vec<&EntityNode> = g.entities().values().collect();
        for a in &entities {
            for b in &entities {
                if a.entity_id == b.entity_id {
                    continue;
                }
                let ca = &g.chunks()[&a.home_chunk];
                let cb = &g.chunks()[&b.home_chunk];
                if ca.doc_id == cb.doc_id {
                    continue;
                }
                let dot: f64 = a.embedding.iter().zip(&b.embedding).map(|(x, y)| x * y).sum();
                let na: f64 = a.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                let w = dot / (na * nb) * 0.5
                    * (1.0 / ca.evidence_level as f64 + 1.0 / cb.evidence_level as f64);
                if w > DEFAULT_DELTA_R {
                    expected.push((a.entity_id.clone(), b.entity_id.clone(), w));
                }
            }
        }
        expected.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));

        assert_eq!(g.reference_edges().len(), expected.len());
        assert_eq!(g.reference_edges().len(), 14);
        for (edge, (from, to, w)) in g.reference_edges().iter().zip(&expected) {
            assert_eq!(&edge.from, from);
            assert_eq!(&edge.to, to);
            assert!((edge.weight - w).abs() < 1e-15);
            // Stored weights are derivable, never free.
            let ea = g.entity(&edge.from).unwrap();
            let eb = g.entity(&edge.to).unwrap();
            let la = g.chunks()[&ea.home_chunk].evidence_level;
            let lb = g.chunks()[&eb.home_chunk].evidence_level;
            let recomputed = link_score(&ea.embedding, &eb.embedding, la, lb).unwrap();
            assert_eq!(edge.weight.to_bits(), recomputed.to_bits());
        }
    }

    #[test]
    fn authority_damping_blocks_low_tier_links() {
        let (g, _) = fixture_graph();
        // The level-4 serous variant sits at cosine 0.7 from the guideline
        // serous entity; at full authority that would link, damped it must
        // not.
        let a = g.entity("esmo2022:e15").unwrap();
        let b = g.entity("cons_pathology:e01").unwrap();
        let undamped = link_score(&a.embedding, &b.embedding, 1, 1).unwrap();
        let damped = link_score(&a.embedding, &b.embedding, 1, 4).unwrap();
        assert!(undamped > DEFAULT_DELTA_R);
        assert!(damped < DEFAULT_DELTA_R);
        assert!(!g
            .reference_edges()
            .iter()
            .any(|e| e.from == "esmo2022:e15" || e.to == "esmo2022:e15"));
    }

    #[test]
    fn dangling_rule_source_is_rejected() {
        let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
        // A corpus without the chunks the rules cite.
        let minimal = concat!(
            "{\"kind\":\"doc\",\"doc_id\":\"other\",\"title\":\"t\",\"tier\":\"guideline\",\"evidence_level\":1}\n",
            "{\"kind\":\"chunk\",\"chunk_id\":\"other:c1\",\"doc_id\":\"other\",\"text\":\"t\",\"token_count\":1}\n",
        );
        match build_graph(minimal, &rs, DEFAULT_DELTA_R) {
            Err(KgError::DanglingSource(rule)) => assert_eq!(rule, "R1_POLE"),
            other => panic!("expected DanglingSource, got {other:?}"),
        }
    }

    #[test]
    fn every_rule_has_a_derivation_edge() {
        let (g, rs) = fixture_graph();
        for rule in rs.rules() {
            assert!(
                g.rule_layer_edges()
                    .iter()
                    .any(|e| e.kind == RuleEdgeKind::DerivedFrom && e.rule_id == rule.id),
                "{} lacks a derivation edge",
                rule.id
            );
        }
        // Structural edges mirror the rule set's own relations.
        assert!(g.rule_layer_edges().contains(&RuleLayerEdge {
            kind: RuleEdgeKind::ExceptionOf,
            rule_id: "R2_P53_EX".to_string(),
            target: "R2_P53".to_string(),
        }));
        // Trigger anchors land on the entity layer.
        assert!(g.rule_layer_edges().iter().any(|e| e.kind
            == RuleEdgeKind::ActivatedBy
            && e.rule_id == "R1_POLE"
            && e.target == "esgo2021:e01"));
        // Outcome anchors exist for every tier in use.
        assert!(g.rule_layer_edges().iter().any(|e| e.kind == RuleEdgeKind::LeadsTo
            && e.rule_id == "S5_DEFAULT"
            && e.target == "esmo2022:e10"));
    }

    fn evidence_mmrd_iii() -> PatientEvidence {
        PatientEvidence::structured(
            MolecularSubtype::Mmrd,
            StageCode::Iii,
            crate::domain::Histology::Endometrioid,
            crate::domain::Grade::G2,
            crate::domain::MyoInvasion::Superficial,
            crate::domain::Lvsi::Negative,
        )
    }

    #[test]
    fn query_provenance_follows_matched_rules() {
        let (g, rs) = fixture_graph();
        let ev = PatientEvidence::structured(
            MolecularSubtype::PoleMut,
            StageCode::Ia,
            crate::domain::Histology::Endometrioid,
            crate::domain::Grade::G1,
            crate::domain::MyoInvasion::None,
            crate::domain::Lvsi::Negative,
        );
        let packet = query(&g, &rs, &ev, DEFAULT_TOP_K);
        assert!(packet.matched_rules.contains(&"R1_POLE".to_string()));
        assert!(packet
            .provenance_chunks
            .contains(&"esmo2022:c1".to_string()));
        assert!(packet
            .provenance_chunks
            .contains(&"cons_molecular:c1".to_string()));
    }

    #[test]
    fn relevance_seeds_hops_and_cap() {
        let (g, rs) = fixture_graph();
        let packet = query(&g, &rs, &evidence_mmrd_iii(), g.entities().len());
        let score = |id: &str| {
            packet
                .context_entities
                .iter()
                .find(|c| c.entity_id == id)
                .unwrap()
                .relevance
        };

        // Seeds: both MMRd entities, the stage III survivor, endometrioid,
        // G2, LVSI-Negative.
        for seed in [
            "esmo2022:e02",
            "cons_molecular:e01",
            "cons_staging:e01",
            "esmo2022:e16",
            "cons_molecular:e06",
            "esgo2021:e11",
        ] {
            assert_eq!(score(seed), 1.0, "{seed}");
        }

        // One hop: pembrolizumab via the MMRd seed at weight 0.75.
        assert!((score("esgo2021:e03") - 0.75).abs() < 1e-12);

        // Two hops: carboplatin-paclitaxel at 0.75 * 0.62.
        assert!((score("cons_molecular:e04") - 0.75 * 0.62).abs() < 1e-12);

        // Three hops away: Lynch screening is reachable only through the
        // two-hop chain's far end, so the cap zeroes it.
        assert_eq!(score("esgo2021:e04"), 0.0);

        // Unrelated anchors score zero.
        assert_eq!(score("esmo2022:e03"), 0.0);
    }

    #[test]
    fn ranking_is_by_relevance_then_id_and_k_saturates() {
        let (g, rs) = fixture_graph();
        let all = query(&g, &rs, &evidence_mmrd_iii(), 10_000);
        assert_eq!(all.context_entities.len(), g.entities().len());
        for pair in all.context_entities.windows(2) {
            assert!(
                pair[0].relevance > pair[1].relevance
                    || (pair[0].relevance == pair[1].relevance
                        && pair[0].entity_id < pair[1].entity_id)
            );
        }

        let top = query(&g, &rs, &evidence_mmrd_iii(), 3);
        assert_eq!(top.context_entities.len(), 3);
        assert_eq!(
            top.context_entities,
            all.context_entities[..3].to_vec()
        );
    }

    #[test]
    fn two_hop_relevance_matches_path_enumeration_oracle() {
        let (g, rs) = fixture_graph();
        let ev = evidence_mmrd_iii();
        let packet = query(&g, &rs, &ev, g.entities().len());

        // Oracle: enumerate all paths of length zero, one, and two from
        // every seed, taking the max product.
        let wanted: BTreeSet<String> =
            ev.label_values().iter().map(|l| l.to_lowercase()).collect();
        let seeds: Vec<&EntityNode> = g
            .entities()
            .values()
            .filter(|e| wanted.contains(&e.label.to_lowercase()))
            .collect();
        for c in &packet.context_entities {
            let mut best: f64 = 0.0;
            for seed in &seeds {
                if seed.entity_id == c.entity_id {
                    best = best.max(1.0);
                }
                for e1 in g.reference_edges() {
                    if e1.from != seed.entity_id {
                        continue;
                    }
                    if e1.to == c.entity_id {
                        best = best.max(e1.weight);
                    }
                    for e2 in g.reference_edges() {
                        if e2.from == e1.to && e2.to == c.entity_id {
                            best = best.max(e1.weight * e2.weight);
                        }
                    }
                }
            }
            assert!(
                (c.relevance - best).abs() < 1e-15,
                "{}: {} vs oracle {}",
                c.entity_id,
                c.relevance,
                best
            );
        }
    }

    #[test]
    fn rule_priorities_never_touch_retrieval() {
        let source = crate::DEFAULT_RULES_SOURCE;
        // Permute hard priorities: R3 and R5..R7 swap bands.
        let permuted = source
            .replace("priority 3", "priority TMP")
            .replace("priority 4", "priority 3")
            .replace("priority TMP", "priority 4");
        assert_ne!(source, permuted);
        let rs_a = parse_ruleset(source).unwrap();
        let rs_b = parse_ruleset(&permuted).unwrap();
        let g = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs_a, DEFAULT_DELTA_R).unwrap();

        for ev in [
            evidence_mmrd_iii(),
            PatientEvidence::structured(
                MolecularSubtype::P53Abn,
                StageCode::Ivb,
                crate::domain::Histology::Serous,
                crate::domain::Grade::G3,
                crate::domain::MyoInvasion::Deep,
                crate::domain::Lvsi::Positive,
            ),
        ] {
            let a = query(&g, &rs_a, &ev, DEFAULT_TOP_K);
            let b = query(&g, &rs_b, &ev, DEFAULT_TOP_K);
            assert_eq!(
                serde_json::to_vec(&a.context_entities).unwrap(),
                serde_json::to_vec(&b.context_entities).unwrap()
            );
        }
    }

    #[test]
    fn rebuild_determinism() {
        let rs = parse_ruleset(crate::DEFAULT_RULES_SOURCE).unwrap();
        let a = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R).unwrap();
        let b = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs, DEFAULT_DELTA_R).unwrap();
        assert_eq!(a.digest(), b.digest());

        let narrower = build_graph(crate::DEFAULT_CORPUS_SOURCE, &rs, 0.7).unwrap();
        assert_ne!(a.digest(), narrower.digest());
        assert!(narrower.reference_edges().len() < a.reference_edges().len());
    }

    fn onehot_entity(id: &str, label: &str, axis: usize, dim: usize) -> EntityNode {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        EntityNode {
            entity_id: id.to_string(),
            label: label.to_string(),
            category: SemanticCategory::ClinicalFeature,
            embedding: v,
            home_chunk: "d:c1".to_string(),
        }
    }

    #[test]
    fn clustering_trivial_shapes() {
        let single = vec![onehot_entity("a", "a", 0, 2)];
        let h = cluster_tags(&single, 0.5);
        assert_eq!(h.roots.len(), 1);
        assert!(h.merges.is_empty());

        let orthogonal = vec![onehot_entity("a", "a", 0, 2), onehot_entity("b", "b", 1, 2)];
        let h = cluster_tags(&orthogonal, 0.5);
        assert_eq!(h.roots.len(), 2);
        assert!(h.merges.is_empty());
    }

    /// Recompute-from-scratch average linkage, sharing only the tie-break
    /// convention with the implementation.
    fn oracle_merges(entities: &[EntityNode], threshold: f64) -> Vec<MergeStep> {
        let mut clusters: Vec<Vec<usize>> = (0..entities.len()).map(|i| vec![i]).collect();
        let mut merges = Vec::new();
        loop {
            let mut best: Option<(usize, usize, f64, String, String)> = None;
            for i in 0..clusters.len() {
                for j in (i + 1)..clusters.len() {
                    let mut total = 0.0;
                    for &a in &clusters[i] {
                        for &b in &clusters[j] {
                            total +=
                                cosine(&entities[a].embedding, &entities[b].embedding).unwrap();
                        }
                    }
                    let avg = total / (clusters[i].len() * clusters[j].len()) as f64;
                    let rep = |c: &Vec<usize>| {
                        c.iter()
                            .map(|&x| entities[x].entity_id.clone())
                            .min()
                            .unwrap()
                    };
                    let (lo, hi) = {
                        let (a, b) = (rep(&clusters[i]), rep(&clusters[j]));
                        if a <= b {
                            (a, b)
                        } else {
                            (b, a)
                        }
                    };
                    let better = match &best {
                        None => true,
                        Some((_, _, bs, bl, bh)) => {
                            avg > *bs || (avg == *bs && (lo.as_str(), hi.as_str()) < (bl.as_str(), bh.as_str()))
                        }
                    };
                    if better {
                        best = Some((i, j, avg, lo, hi));
                    }
                }
            }
            let Some((i, j, avg, lo, hi)) = best else { break };
            if avg < threshold {
                break;
            }
            merges.push(MergeStep {
                left: lo,
                right: hi,
                similarity: avg,
            });
            let moved = clusters.remove(j);
            clusters[i].extend(moved);
        }
        merges
    }

    #[test]
    fn dendrogram_matches_naive_average_linkage_oracle() {
        // Twelve entities in three loose families plus noise directions.
        let mut entities = Vec::new();
        for i in 0..12 {
            let family = i % 3;
            let mut v = synthetic_unit_vector(&format!("clu-{i}"), 6);
            v[family] += 1.6;
            let v = crate::embed::normalize(&v).unwrap();
            entities.push(EntityNode {
                entity_id: format!("e{i:02}"),
                label: format!("e{i:02}"),
                category: SemanticCategory::Procedure,
                embedding: v,
                home_chunk: "d:c1".to_string(),
            });
        }
        for threshold in [0.3, 0.5, 0.7] {
            let got = cluster_tags(&entities, threshold);
            let want = oracle_merges(&entities, threshold);
            assert_eq!(got.merges.len(), want.len(), "threshold {threshold}");
            for (g, w) in got.merges.iter().zip(&want) {
                assert_eq!(g.left, w.left);
                assert_eq!(g.right, w.right);
                assert!((g.similarity - w.similarity).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hierarchy_records_members_and_merge_order() {
        let (g, _) = fixture_graph();
        let tags = g.tag_hierarchy();
        let mut covered: BTreeSet<&str> = BTreeSet::new();
        for root in &tags.roots {
            for m in &root.members {
                assert!(covered.insert(m), "entity {m} in two roots");
            }
        }
        assert_eq!(covered.len(), g.entities().len());
        // Merge similarities are non-increasing for average linkage over
        // these clusters at the default threshold.
        for pair in tags.merges.windows(2) {
            assert!(pair[0].similarity >= pair[1].similarity - 1e-12);
        }
        // The engineered molecular neighborhood actually clusters.
        assert!(tags
            .merges
            .iter()
            .any(|m| m.left == "cons_molecular:e01" || m.right == "cons_molecular:e01"));
    }
}
