//! Batch and incremental integration over the other modules, plus the
//! persisted artifacts: the knowledge-base directory and the cluster state
//! file.
//!
//! Batch flow: collect every attribute into singleton clusters, literal
//! self-join, anchor members to the knowledge base, semantic join, resolve,
//! serialize. Incremental flow: join the new schema's attributes against the
//! existing family, verify the matches against attribute values and review
//! verdicts, then join the leftovers against the knowledge base and resolve.
//!
//! The state file is canonical JSON: clusters ordered by membership,
//! attributes and frontiers sorted, ids reassigned positionally. Loading and
//! saving an untouched state is byte-identical, and re-inserting an
//! already-integrated schema is a no-op on the bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterId, ClusterRegistry, ClusterSet};
use crate::ed_join::{self, EdJoinConfig, MatchCandidate};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gram_index::{InvertedIndex, ProbeResult};
use crate::kb::{build_neighbor_tables, ingest_edges, KnowledgeGraph, NeighborTable};
use crate::normalize::{self, Dictionaries, TokenizedAttribute};
use crate::resolve::{
    pair_key, resolve_family, review_id, ResolveConfig, ResolveContext, ResolvedCluster,
    ResolveReport, ReviewItem, ReviewVerdict,
};
use crate::semantic_join::{self, ExpansionMode, FrontierMode, SemanticJoinConfig};
use crate::text::edit_distance;

pub const STATE_VERSION: u32 = 1;
pub const KB_META_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Parameters and schema input
// ---------------------------------------------------------------------------

/// Integration thresholds. Serialized field names mirror the CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationParams {
    /// Edit-distance threshold for literal joins.
    #[serde(rename = "epsilon_t")]
    pub max_edit: u32,
    /// Path-length threshold for semantic joins.
    #[serde(rename = "gamma")]
    pub max_hops: u32,
    /// Resolve diameter tolerance (> 1).
    #[serde(rename = "beta")]
    pub tolerance: f64,
    /// Gram length for the inverted indexes.
    #[serde(rename = "q")]
    pub gram_len: usize,
    /// Incremental insertions keep at most this many 1-hop neighbors per
    /// new attribute.
    pub frontier_cap: usize,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        IntegrationParams {
            max_edit: 1,
            max_hops: 3,
            tolerance: 1.5,
            gram_len: 2,
            frontier_cap: 64,
        }
    }
}

impl IntegrationParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_hops == 0 {
            return Err(Error::parameter("gamma must be >= 1"));
        }
        if self.tolerance <= 1.0 {
            return Err(Error::parameter("beta must be > 1"));
        }
        if self.gram_len == 0 {
            return Err(Error::parameter("q must be >= 1"));
        }
        Ok(())
    }

    pub fn resolve_config(&self) -> ResolveConfig {
        ResolveConfig {
            tolerance: self.tolerance,
            max_hops: self.max_hops,
            max_edit: self.max_edit,
        }
    }

    pub fn ed_config(&self) -> EdJoinConfig {
        EdJoinConfig { max_edit: self.max_edit, gram_len: self.gram_len }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaAttribute {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

/// One input schema document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub name: String,
    pub attributes: Vec<SchemaAttribute>,
}

/// Parses a newline-delimited schema corpus.
pub fn parse_schemas(input: &str) -> Result<Vec<Schema>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema: Schema = serde_json::from_str(line)
            .map_err(|e| Error::data(format!("schema line {}: {e}", i + 1)))?;
        out.push(schema);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Knowledge-base directory
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct KbMeta {
    version: u32,
    seed: u64,
    bucket_length: u64,
    gram_len: usize,
    tables: Vec<u32>,
}

/// A built knowledge base: the graph, its neighbor tables, and a q-gram
/// index over concept names for literal anchoring.
pub struct KbHandle {
    pub graph: KnowledgeGraph,
    pub tables: Vec<NeighborTable>,
    pub concept_index: InvertedIndex,
    pub seed: u64,
    pub bucket_length: u64,
    pub gram_len: usize,
}

impl KbHandle {
    pub fn build(
        graph: KnowledgeGraph,
        hop_counts: &[u32],
        seed: u64,
        bucket_length: u64,
        gram_len: usize,
        exec: Exec,
    ) -> Result<Self> {
        let tables = build_neighbor_tables(&graph, hop_counts, seed, bucket_length, exec)?;
        let names: Vec<String> = graph.concept_names().cloned().collect();
        let concept_index = InvertedIndex::build(names, gram_len)?;
        Ok(KbHandle { graph, tables, concept_index, seed, bucket_length, gram_len })
    }

    pub fn table_refs(&self) -> Vec<&NeighborTable> {
        self.tables.iter().collect()
    }

    /// Writes `graph.tsv`, `meta.json`, one `neighbors_k*.nbt` per table and
    /// `concepts.qgi` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut graph_out = Vec::new();
        self.graph.write_edges_tsv(&mut graph_out)?;
        fs::write(dir.join("graph.tsv"), graph_out)?;
        for table in &self.tables {
            table.save(dir.join(format!("neighbors_k{}.nbt", table.hop_count())))?;
        }
        self.concept_index.save(dir.join("concepts.qgi"))?;
        let meta = KbMeta {
            version: KB_META_VERSION,
            seed: self.seed,
            bucket_length: self.bucket_length,
            gram_len: self.gram_len,
            tables: self.tables.iter().map(NeighborTable::hop_count).collect(),
        };
        let mut doc = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::data(e.to_string()))?;
        doc.push('\n');
        fs::write(dir.join("meta.json"), doc)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: KbMeta = serde_json::from_str(
            &fs::read_to_string(dir.join("meta.json"))
                .map_err(|_| Error::corrupt(format!("missing {}/meta.json", dir.display())))?,
        )
        .map_err(|e| Error::corrupt(format!("kb meta: {e}")))?;
        if meta.version != KB_META_VERSION {
            return Err(Error::corrupt(format!("unsupported kb version {}", meta.version)));
        }
        let graph_src = fs::read_to_string(dir.join("graph.tsv"))
            .map_err(|_| Error::corrupt(format!("missing {}/graph.tsv", dir.display())))?;
        let report = ingest_edges(graph_src.as_bytes())?;
        if !report.rejects.is_empty() {
            return Err(Error::corrupt("graph.tsv contains malformed lines"));
        }
        let mut tables = Vec::new();
        for k in &meta.tables {
            tables.push(NeighborTable::load(dir.join(format!("neighbors_k{k}.nbt")))?);
        }
        let concept_index = InvertedIndex::load(dir.join("concepts.qgi"))?;
        Ok(KbHandle {
            graph: report.graph,
            tables,
            concept_index,
            seed: meta.seed,
            bucket_length: meta.bucket_length,
            gram_len: meta.gram_len,
        })
    }

    /// The literally nearest concept within `max_edit` of `s`, ties broken
    /// lexicographically.
    pub fn nearest_concept(&self, s: &str, max_edit: u32) -> Option<(String, u32)> {
        let ids: Vec<u32> = match self.concept_index.probe(s, max_edit) {
            ProbeResult::Counted(counted) => counted.into_iter().map(|(id, _)| id).collect(),
            ProbeResult::NeedsVerification(ids) => ids,
        };
        let folded = s.to_lowercase();
        let mut best: Option<(u32, &str)> = None;
        for id in ids {
            let name = self.concept_index.name(id);
            let d = edit_distance(&folded, &name.to_lowercase());
            if d <= max_edit {
                let better = match best {
                    None => true,
                    Some((bd, bn)) => d < bd || (d == bd && name < bn),
                };
                if better {
                    best = Some((d, name));
                }
            }
        }
        best.map(|(d, name)| (name.to_string(), d))
    }

    /// Anchors an attribute: the raw name is tried first, then the joined
    /// normalized tokens, then the tf-idf keyword.
    pub fn anchor_attribute(&self, tok: &TokenizedAttribute, max_edit: u32) -> Option<String> {
        if let Some((concept, _)) = self.nearest_concept(&tok.raw, max_edit) {
            return Some(concept);
        }
        let joined = tok.tokens.join(" ");
        if joined != tok.raw.to_lowercase() {
            if let Some((concept, _)) = self.nearest_concept(&joined, max_edit) {
                return Some(concept);
            }
        }
        if tok.keyword != joined {
            if let Some((concept, _)) = self.nearest_concept(&tok.keyword, max_edit) {
                return Some(concept);
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Persistent state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub concept: String,
    pub distance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub id: String,
    /// The member naming the global-schema attribute: minimal distance sum
    /// to its co-members, ties lexicographic.
    pub representative: String,
    pub attributes: Vec<AttributeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier: Vec<FrontierEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewState {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<ReviewItem>,
}

/// The whole persisted integration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationState {
    pub version: u32,
    pub params: IntegrationParams,
    pub clusters: Vec<ClusterDoc>,
    #[serde(default)]
    pub review: ReviewState,
}

impl IntegrationState {
    pub fn new(params: IntegrationParams) -> Self {
        IntegrationState {
            version: STATE_VERSION,
            params,
            clusters: Vec::new(),
            review: ReviewState::default(),
        }
    }

    pub fn from_json(input: &str) -> Result<Self> {
        let state: IntegrationState =
            serde_json::from_str(input).map_err(|e| Error::corrupt(format!("state file: {e}")))?;
        if state.version != STATE_VERSION {
            return Err(Error::corrupt(format!(
                "unsupported state version {}",
                state.version
            )));
        }
        Ok(state)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Canonical serialization: stable ordering everywhere, ids positional.
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut state = self.clone();
        state.canonicalize();
        let mut doc =
            serde_json::to_string_pretty(&state).map_err(|e| Error::data(e.to_string()))?;
        doc.push('\n');
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_canonical_json()?)?;
        Ok(())
    }

    pub fn canonicalize(&mut self) {
        for doc in &mut self.clusters {
            doc.attributes.sort_by(|a, b| a.name.cmp(&b.name));
            for attr in &mut doc.attributes {
                attr.values.sort();
                attr.values.dedup();
            }
            doc.frontier.sort_by(|a, b| a.concept.cmp(&b.concept));
        }
        self.clusters.sort_by(|a, b| {
            let ka: Vec<&String> = a.attributes.iter().map(|x| &x.name).collect();
            let kb: Vec<&String> = b.attributes.iter().map(|x| &x.name).collect();
            ka.cmp(&kb)
        });
        self.clusters.dedup_by(|a, b| a.attributes == b.attributes);
        let width = self.clusters.len().to_string().len().max(4);
        for (i, doc) in self.clusters.iter_mut().enumerate() {
            doc.id = format!("c{:0width$}", i + 1, width = width);
        }
        self.review.items.sort_by(|a, b| a.id.cmp(&b.id));
        self.review.items.dedup_by(|a, b| a.id == b.id);
    }

    /// Canonically-ordered pairs with a reject verdict.
    pub fn vetoes(&self) -> BTreeSet<(String, String)> {
        self.review
            .items
            .iter()
            .filter(|i| i.verdict == ReviewVerdict::Reject)
            .map(|i| pair_key(&i.left, &i.right))
            .collect()
    }

    /// Canonically-ordered pairs with an accept verdict.
    pub fn accepts(&self) -> BTreeSet<(String, String)> {
        self.review
            .items
            .iter()
            .filter(|i| i.verdict == ReviewVerdict::Accept)
            .map(|i| pair_key(&i.left, &i.right))
            .collect()
    }

    pub fn anchors(&self) -> BTreeMap<String, Option<String>> {
        let mut out = BTreeMap::new();
        for doc in &self.clusters {
            for attr in &doc.attributes {
                out.entry(attr.name.clone()).or_insert_with(|| attr.anchor.clone());
            }
        }
        out
    }

    pub fn samples(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for doc in &self.clusters {
            for attr in &doc.attributes {
                let entry = out.entry(attr.name.clone()).or_default();
                entry.extend(attr.values.iter().cloned());
                entry.sort();
                entry.dedup();
            }
        }
        out
    }

    pub fn attribute_count(&self) -> usize {
        let mut names = BTreeSet::new();
        for doc in &self.clusters {
            for attr in &doc.attributes {
                names.insert(&attr.name);
            }
        }
        names.len()
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeFailure {
    pub schema: String,
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub attributes_seen: usize,
    pub new_attributes: usize,
    pub literal_merges: usize,
    pub semantic_merges: usize,
    pub clusters: usize,
    pub kb_absent: Vec<String>,
    pub failures: Vec<AttributeFailure>,
    pub review_queued: usize,
}

// ---------------------------------------------------------------------------
// Batch integration
// ---------------------------------------------------------------------------

/// Attribute intake: dedup by exact name, merge sample values, report
/// empties.
fn collect_attributes(
    schemas: &[Schema],
    failures: &mut Vec<AttributeFailure>,
) -> BTreeMap<String, Vec<String>> {
    let mut attrs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for schema in schemas {
        for attr in &schema.attributes {
            if attr.name.trim().is_empty() {
                failures.push(AttributeFailure {
                    schema: schema.id.clone(),
                    name: attr.name.clone(),
                    reason: "empty attribute name".to_string(),
                });
                continue;
            }
            let entry = attrs.entry(attr.name.clone()).or_default();
            entry.extend(attr.values.iter().cloned());
            entry.sort();
            entry.dedup();
        }
    }
    attrs
}

fn tokenize_corpus(
    names: &BTreeMap<String, Vec<String>>,
    dicts: &Dictionaries,
) -> BTreeMap<String, TokenizedAttribute> {
    let mut toks: Vec<TokenizedAttribute> = names
        .keys()
        .map(|name| {
            normalize::normalize_attribute(name, dicts).unwrap_or_else(|_| TokenizedAttribute {
                raw: name.clone(),
                tokens: vec![name.to_lowercase()],
                rule: normalize::RuleTag::Identity,
                keyword: name.to_lowercase(),
                flagged: true,
            })
        })
        .collect();
    normalize::assign_keywords(&mut toks);
    toks.into_iter().map(|t| (t.raw.clone(), t)).collect()
}

/// Batch integration: singleton clusters, literal self-join, semantic join,
/// resolve, serialize.
pub fn batch_integrate(
    schemas: &[Schema],
    params: IntegrationParams,
    kb: &KbHandle,
    dicts: &Dictionaries,
    exec: Exec,
) -> Result<(IntegrationState, RunReport)> {
    params.validate()?;
    let mut report = RunReport::default();
    let attrs = collect_attributes(schemas, &mut report.failures);
    report.attributes_seen = attrs.len();
    report.new_attributes = attrs.len();

    let mut reg = ClusterRegistry::new();
    for name in attrs.keys() {
        reg.insert_singleton(name.clone(), BTreeMap::new())?;
    }

    // Literal self-join.
    let ed = ed_join::self_join(&mut reg, &params.ed_config(), exec)?;
    report.literal_merges = ed.merges;

    // Anchoring.
    let tokenized = tokenize_corpus(&attrs, dicts);
    let anchors: BTreeMap<String, Option<String>> = attrs
        .keys()
        .map(|name| {
            (name.clone(), kb.anchor_attribute(&tokenized[name], params.max_edit))
        })
        .collect();

    // Semantic join over every cluster.
    let ids = reg.ids();
    let sem_cfg = SemanticJoinConfig {
        max_hops: params.max_hops,
        mode: ExpansionMode::Auto,
        frontier: FrontierMode::FullBall,
    };
    let sem = semantic_join::semantic_join(
        &mut reg,
        &ids,
        &anchors,
        &kb.table_refs(),
        &sem_cfg,
        exec,
    )?;
    report.semantic_merges = sem.merges;
    report.kb_absent = sem.skipped;

    // Resolve and serialize.
    let mut state = IntegrationState::new(params);
    let clusters: Vec<ClusterSet> = reg.iter().cloned().collect();
    let vetoes = BTreeSet::new();
    let accepts = BTreeSet::new();
    let ctx = ResolveContext {
        graph: Some(&kb.graph),
        anchors: &anchors,
        samples: &attrs,
        vetoes: &vetoes,
        accepts: &accepts,
    };
    let resolved = resolve_family(&clusters, &ctx, &params.resolve_config(), exec)?;
    report.review_queued = resolved.queued.len();
    state.review.items = resolved.queued.clone();
    state.clusters = docs_from_resolved(&resolved.clusters, &anchors, &attrs, Some(&kb.graph), &params);
    state.canonicalize();
    report.clusters = state.clusters.len();
    Ok((state, report))
}

// ---------------------------------------------------------------------------
// Incremental integration
// ---------------------------------------------------------------------------

/// Rebuilds a join-phase registry from state docs. Bridging attributes
/// (present in several docs) are owned by their first doc in canonical
/// order; `doc_cluster[i]` records which registry cluster doc `i` produced.
fn rebuild_registry(state: &IntegrationState) -> Result<(ClusterRegistry, Vec<Option<ClusterId>>)> {
    let mut reg = ClusterRegistry::new();
    let mut doc_cluster = Vec::with_capacity(state.clusters.len());
    for doc in &state.clusters {
        let fresh: Vec<&AttributeRecord> = doc
            .attributes
            .iter()
            .filter(|a| !reg.contains_attribute(&a.name))
            .collect();
        match fresh.split_first() {
            None => doc_cluster.push(None),
            Some((first, rest)) => {
                let frontier: BTreeMap<String, u32> =
                    doc.frontier.iter().map(|f| (f.concept.clone(), f.distance)).collect();
                let id = reg.insert_singleton(first.name.clone(), frontier)?;
                for attr in rest {
                    let other = reg.insert_singleton(attr.name.clone(), BTreeMap::new())?;
                    reg.pair_join(id, other)?;
                }
                doc_cluster.push(reg.locate_id(&first.name));
            }
        }
    }
    Ok((reg, doc_cluster))
}

/// Inserts one schema into an existing state.
pub fn incremental_integrate(
    schema: &Schema,
    state: &mut IntegrationState,
    kb: &KbHandle,
    dicts: &Dictionaries,
    exec: Exec,
) -> Result<RunReport> {
    let params = state.params;
    params.validate()?;
    let mut report = RunReport::default();
    let incoming = collect_attributes(std::slice::from_ref(schema), &mut report.failures);
    report.attributes_seen = incoming.len();

    // Fold new sample values into already-integrated attributes.
    let mut known: BTreeSet<String> = BTreeSet::new();
    for doc in &mut state.clusters {
        for attr in &mut doc.attributes {
            known.insert(attr.name.clone());
            if let Some(values) = incoming.get(&attr.name) {
                attr.values.extend(values.iter().cloned());
                attr.values.sort();
                attr.values.dedup();
            }
        }
    }
    let newcomers: BTreeMap<String, Vec<String>> = incoming
        .iter()
        .filter(|(name, _)| !known.contains(*name))
        .map(|(n, v)| (n.clone(), v.clone()))
        .collect();
    report.new_attributes = newcomers.len();
    if newcomers.is_empty() {
        // Idempotent re-insertion: nothing to join, nothing to resolve.
        state.canonicalize();
        report.clusters = state.clusters.len();
        return Ok(report);
    }

    let (mut reg, doc_cluster) = rebuild_registry(state)?;
    let existing_ids = reg.ids();
    let mut dirty: BTreeSet<ClusterId> = BTreeSet::new();

    let mut anchors = state.anchors();
    let mut samples = state.samples();
    let vetoes = state.vetoes();
    let accepts = state.accepts();

    // Register newcomers and anchor them.
    let tokenized = tokenize_corpus(&newcomers, dicts);
    let mut newcomer_ids = Vec::new();
    for (name, values) in &newcomers {
        let id = reg.insert_singleton(name.clone(), BTreeMap::new())?;
        newcomer_ids.push(id);
        dirty.insert(id);
        anchors.insert(name.clone(), kb.anchor_attribute(&tokenized[name], params.max_edit));
        samples.insert(name.clone(), values.clone());
    }

    // Literal join of the new attributes against the existing family, gated
    // by value verification and review verdicts.
    let candidates =
        ed_join::find_matches(&reg, &newcomer_ids, &existing_ids, &params.ed_config(), exec)?;
    let (confirmed, queued) = verify_candidates(&candidates, &samples, &vetoes, &accepts);
    report.review_queued += queued.len();
    for item in queued {
        if !state.review.items.iter().any(|i| i.id == item.id) {
            state.review.items.push(item);
        }
    }
    for c in &confirmed {
        dirty.insert(c.probe_cluster);
        dirty.insert(c.target_cluster);
    }
    report.literal_merges = ed_join::apply_matches(&mut reg, &confirmed)?;

    // Semantic join of the still-unmatched newcomers against everything,
    // with degree-capped frontiers for fresh clusters.
    let unmatched: Vec<ClusterId> =
        newcomer_ids.iter().copied().filter(|id| reg.get(*id).is_some()).collect();
    if !unmatched.is_empty() {
        let sem_cfg = SemanticJoinConfig {
            max_hops: params.max_hops,
            mode: ExpansionMode::Auto,
            frontier: FrontierMode::DegreeCapped(params.frontier_cap),
        };
        let sem = semantic_join::semantic_join(
            &mut reg,
            &unmatched,
            &anchors,
            &kb.table_refs(),
            &sem_cfg,
            exec,
        )?;
        report.semantic_merges = sem.merges;
        report.kb_absent = sem.skipped;
        for m in &sem.evidence {
            dirty.insert(m.probe_cluster);
            dirty.insert(m.target_cluster);
        }
        // Seeds absorb a frontier even without merging.
        for id in &unmatched {
            dirty.insert(*id);
        }
    }

    // Re-resolve only the clusters the insertion touched; untouched docs
    // pass through byte-identical.
    let doc_is_dirty = |id: &Option<ClusterId>| match id {
        Some(id) => dirty.contains(id) || reg.get(*id).is_none(),
        None => false,
    };
    let mut kept_docs: Vec<ClusterDoc> = Vec::new();
    for (i, doc) in state.clusters.iter().enumerate() {
        if !doc_is_dirty(&doc_cluster[i]) {
            kept_docs.push(doc.clone());
        }
    }
    let mut dirty_clusters: Vec<ClusterSet> = Vec::new();
    let mut seen_live: BTreeSet<ClusterId> = BTreeSet::new();
    for id in dirty {
        if let Some(c) = reg.get(id) {
            if seen_live.insert(c.id) {
                dirty_clusters.push(c.clone());
            }
        }
    }
    let ctx = ResolveContext {
        graph: Some(&kb.graph),
        anchors: &anchors,
        samples: &samples,
        vetoes: &vetoes,
        accepts: &accepts,
    };
    let resolved = resolve_family(&dirty_clusters, &ctx, &params.resolve_config(), exec)?;
    report.review_queued += resolved.queued.len();
    for item in &resolved.queued {
        if !state.review.items.iter().any(|i| i.id == item.id) {
            state.review.items.push(item.clone());
        }
    }
    kept_docs.extend(docs_from_resolved(
        &resolved.clusters,
        &anchors,
        &samples,
        Some(&kb.graph),
        &params,
    ));
    state.clusters = kept_docs;
    state.canonicalize();
    report.clusters = state.clusters.len();
    Ok(report)
}

/// Value verification plus review-verdict gating for literal candidates.
fn verify_candidates(
    candidates: &[MatchCandidate],
    samples: &BTreeMap<String, Vec<String>>,
    vetoes: &BTreeSet<(String, String)>,
    accepts: &BTreeSet<(String, String)>,
) -> (Vec<MatchCandidate>, Vec<ReviewItem>) {
    let mut confirmed = Vec::new();
    let mut queued: Vec<ReviewItem> = Vec::new();
    for cand in candidates {
        let key = pair_key(&cand.left, &cand.right);
        if vetoes.contains(&key) {
            continue;
        }
        if accepts.contains(&key) {
            confirmed.push(cand.clone());
            continue;
        }
        let left_values = samples.get(&cand.left).cloned().unwrap_or_default();
        let right_values = samples.get(&cand.right).cloned().unwrap_or_default();
        if crate::resolve::value_verify(&left_values, &right_values).pass {
            confirmed.push(cand.clone());
        } else {
            let id = review_id(&cand.left, &cand.right);
            if !queued.iter().any(|i| i.id == id) {
                queued.push(ReviewItem {
                    id,
                    left: cand.left.clone(),
                    right: cand.right.clone(),
                    literal_distance: Some(cand.distance),
                    semantic_distance: None,
                    left_values,
                    right_values,
                    verdict: ReviewVerdict::Pending,
                });
            }
        }
    }
    (confirmed, queued)
}

// ---------------------------------------------------------------------------
// Resolve re-runs and review application
// ---------------------------------------------------------------------------

/// Re-resolves every cluster document in place (used by the standalone
/// resolve command and after review imports).
pub fn full_resolve(
    state: &mut IntegrationState,
    kb: Option<&KbHandle>,
    tolerance_override: Option<f64>,
    exec: Exec,
) -> Result<ResolveReport> {
    let mut params = state.params;
    if let Some(t) = tolerance_override {
        params.tolerance = t;
    }
    params.validate()?;
    let anchors = state.anchors();
    let samples = state.samples();
    let vetoes = state.vetoes();
    let accepts = state.accepts();
    let clusters: Vec<ClusterSet> = state
        .clusters
        .iter()
        .enumerate()
        .map(|(i, doc)| ClusterSet {
            id: i as ClusterId,
            members: doc.attributes.iter().map(|a| a.name.clone()).collect(),
            frontier: doc.frontier.iter().map(|f| (f.concept.clone(), f.distance)).collect(),
        })
        .collect();
    let ctx = ResolveContext {
        graph: kb.map(|k| &k.graph),
        anchors: &anchors,
        samples: &samples,
        vetoes: &vetoes,
        accepts: &accepts,
    };
    let resolved = resolve_family(&clusters, &ctx, &params.resolve_config(), exec)?;
    for item in &resolved.queued {
        if !state.review.items.iter().any(|i| i.id == item.id) {
            state.review.items.push(item.clone());
        }
    }
    state.params.tolerance = params.tolerance;
    state.clusters = docs_from_resolved(
        &resolved.clusters,
        &anchors,
        &samples,
        kb.map(|k| &k.graph),
        &params,
    );
    state.canonicalize();
    Ok(resolved)
}

#[derive(Debug, Default)]
pub struct ImportReport {
    pub applied: usize,
    pub unchanged: usize,
    /// (id, reason) for records that could not be applied.
    pub skipped: Vec<(String, String)>,
}

/// Applies review verdicts. Accepting merges the pair's documents; rejects
/// become permanent vetoes. Either change re-runs resolve.
pub fn apply_review_decisions(
    state: &mut IntegrationState,
    decisions: &[(String, ReviewVerdict)],
    kb: Option<&KbHandle>,
    exec: Exec,
) -> Result<ImportReport> {
    let mut report = ImportReport::default();
    let mut changed = false;
    for (id, verdict) in decisions {
        let Some(item) = state.review.items.iter_mut().find(|i| &i.id == id) else {
            report.skipped.push((id.clone(), "unknown review item".to_string()));
            continue;
        };
        match (item.verdict, verdict) {
            (ReviewVerdict::Pending, ReviewVerdict::Pending) => report.unchanged += 1,
            (ReviewVerdict::Pending, v) => {
                item.verdict = *v;
                changed = true;
                report.applied += 1;
            }
            (cur, v) if cur == *v => report.unchanged += 1,
            (cur, v) => {
                report.skipped.push((
                    id.clone(),
                    format!("verdict already {cur:?}; cannot change to {v:?}"),
                ));
            }
        }
    }
    if changed {
        // Accepted pairs whose attributes live in different documents merge
        // those documents before resolve re-runs.
        let accepts = state.accepts();
        merge_docs_for_accepts(state, &accepts);
        full_resolve(state, kb, None, exec)?;
    } else {
        state.canonicalize();
    }
    Ok(report)
}

fn merge_docs_for_accepts(state: &mut IntegrationState, accepts: &BTreeSet<(String, String)>) {
    for (a, b) in accepts {
        let find = |state: &IntegrationState, name: &str| {
            state
                .clusters
                .iter()
                .position(|d| d.attributes.iter().any(|x| x.name == name))
        };
        let (Some(ia), Some(ib)) = (find(state, a), find(state, b)) else { continue };
        if ia == ib {
            continue;
        }
        let (keep, drop) = (ia.min(ib), ia.max(ib));
        let absorbed = state.clusters.remove(drop);
        let target = &mut state.clusters[keep];
        for attr in absorbed.attributes {
            if !target.attributes.iter().any(|x| x.name == attr.name) {
                target.attributes.push(attr);
            }
        }
        for entry in absorbed.frontier {
            match target.frontier.iter_mut().find(|f| f.concept == entry.concept) {
                Some(existing) => existing.distance = existing.distance.min(entry.distance),
                None => target.frontier.push(entry),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Document building
// ---------------------------------------------------------------------------

fn docs_from_resolved(
    resolved: &[ResolvedCluster],
    anchors: &BTreeMap<String, Option<String>>,
    samples: &BTreeMap<String, Vec<String>>,
    graph: Option<&KnowledgeGraph>,
    params: &IntegrationParams,
) -> Vec<ClusterDoc> {
    resolved
        .iter()
        .map(|cluster| {
            let representative =
                representative(&cluster.members, anchors, graph, params.resolve_config());
            let attributes = cluster
                .members
                .iter()
                .map(|name| AttributeRecord {
                    name: name.clone(),
                    anchor: anchors.get(name).cloned().flatten(),
                    values: samples.get(name).cloned().unwrap_or_default(),
                })
                .collect();
            let frontier = cluster
                .frontier
                .iter()
                .map(|(concept, &distance)| FrontierEntry { concept: concept.clone(), distance })
                .collect();
            ClusterDoc { id: String::new(), representative, attributes, frontier }
        })
        .collect()
}

/// The member with minimal distance sum to its co-members; unreachable
/// pairs count heavily, ties break lexicographically.
fn representative(
    members: &BTreeSet<String>,
    anchors: &BTreeMap<String, Option<String>>,
    graph: Option<&KnowledgeGraph>,
    cfg: ResolveConfig,
) -> String {
    if members.len() == 1 {
        return members.first().unwrap().clone();
    }
    const UNREACHABLE: u64 = 1_000_000;
    let radius = cfg.semantic_diameter();
    let anchor_of = |m: &String| anchors.get(m).and_then(|a| a.clone());
    let mut best: Option<(u64, &String)> = None;
    for m in members {
        let ball = match (graph, anchor_of(m)) {
            (Some(g), Some(anchor)) => Some(g.bfs_ball(&anchor, radius)),
            _ => None,
        };
        let mut score: u64 = 0;
        for other in members {
            if other == m {
                continue;
            }
            let d = match (&ball, anchor_of(other)) {
                (Some(ball), Some(other_anchor)) => {
                    ball.get(&other_anchor).map(|&d| u64::from(d)).unwrap_or(UNREACHABLE)
                }
                _ => u64::from(edit_distance(&m.to_lowercase(), &other.to_lowercase())),
            };
            score += d;
        }
        let better = match best {
            None => true,
            Some((bs, bm)) => score < bs || (score == bs && m < bm),
        };
        if better {
            best = Some((score, m));
        }
    }
    best.map(|(_, m)| m.clone()).unwrap_or_default()
}
