//! Knowledge-base storage: "is a" edge ingest, the in-memory graph, and
//! bucket-hashed neighbor tables for power-of-two hop counts.
//!
//! Edges are ingested from six-field TSV records
//! (`subId  subName  subType  superId  superName  superType`). The worked
//! similarity examples require traversing "is a" links in both directions
//! (two concepts are related through a shared parent), so the graph keeps an
//! undirected adjacency view and all path lengths are undirected shortest
//! distances.

mod bucket;
mod neighbor_table;

pub use bucket::{bucket_hash, fold_mod};
pub use neighbor_table::{NeighborTable, NeighborTableReader};

use std::collections::VecDeque;
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::exec::{self, Exec};

/// Default polynomial hash seed used by the bucket layout.
pub const DEFAULT_SEED: u64 = 13;
/// Default number of record slots per bucket.
pub const DEFAULT_BUCKET_LENGTH: u64 = 10_000;

/// A knowledge-base node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: String,
    pub name: String,
    /// Provenance class, e.g. "wikicategory".
    pub type_tag: String,
}

/// Outcome of inserting one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeInsert {
    Added,
    Duplicate,
    SelfLoop,
}

/// The concept graph, keyed by concept name.
///
/// Immutable once built; safe to share across threads for reads.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    concepts: BTreeMap<String, Concept>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
    edge_count: usize,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a concept. The first occurrence of a name wins; later
    /// duplicates keep the original id and type tag.
    pub fn add_concept(&mut self, concept: Concept) {
        self.adjacency.entry(concept.name.clone()).or_default();
        self.concepts.entry(concept.name.clone()).or_insert(concept);
    }

    /// Inserts an undirected edge between two registered concepts.
    pub fn insert_edge(&mut self, sub: Concept, sup: Concept) -> EdgeInsert {
        if sub.name == sup.name {
            return EdgeInsert::SelfLoop;
        }
        let (a, b) = (sub.name.clone(), sup.name.clone());
        self.add_concept(sub);
        self.add_concept(sup);
        let new = self.adjacency.get_mut(&a).unwrap().insert(b.clone());
        if !new {
            return EdgeInsert::Duplicate;
        }
        self.adjacency.get_mut(&b).unwrap().insert(a);
        self.edge_count += 1;
        EdgeInsert::Added
    }

    /// Fixture-friendly edge insert: concepts are auto-registered with their
    /// name as id and an empty type tag.
    pub fn link(&mut self, a: &str, b: &str) -> EdgeInsert {
        self.insert_edge(
            Concept { id: a.to_string(), name: a.to_string(), type_tag: String::new() },
            Concept { id: b.to_string(), name: b.to_string(), type_tag: String::new() },
        )
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn concept(&self, name: &str) -> Option<&Concept> {
        self.concepts.get(name)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn concept_names(&self) -> impl Iterator<Item = &String> {
        self.concepts.keys()
    }

    pub fn neighbors(&self, name: &str) -> Option<&BTreeSet<String>> {
        self.adjacency.get(name)
    }

    pub fn degree(&self, name: &str) -> usize {
        self.adjacency.get(name).map_or(0, |n| n.len())
    }

    /// Breadth-first ball: every concept within `radius` hops of `start`,
    /// mapped to its exact shortest distance. Includes `start` at distance 0.
    pub fn bfs_ball(&self, start: &str, radius: u32) -> BTreeMap<String, u32> {
        let mut dist = BTreeMap::new();
        if !self.contains(start) {
            return dist;
        }
        dist.insert(start.to_string(), 0);
        let mut queue = VecDeque::new();
        queue.push_back((start.to_string(), 0u32));
        while let Some((node, d)) = queue.pop_front() {
            if d == radius {
                continue;
            }
            if let Some(nbrs) = self.adjacency.get(&node) {
                for nb in nbrs {
                    if !dist.contains_key(nb) {
                        dist.insert(nb.clone(), d + 1);
                        queue.push_back((nb.clone(), d + 1));
                    }
                }
            }
        }
        dist
    }

    /// Serializes the graph back to the six-field TSV form, one undirected
    /// edge per line, canonically ordered.
    pub fn write_edges_tsv(&self, mut w: impl std::io::Write) -> Result<()> {
        for (a, nbrs) in &self.adjacency {
            for b in nbrs {
                if a < b {
                    let ca = &self.concepts[a];
                    let cb = &self.concepts[b];
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        ca.id, ca.name, ca.type_tag, cb.id, cb.name, cb.type_tag
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// One rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedLine {
    pub line: usize,
    pub reason: String,
}

/// Result of [`ingest_edges`]: the graph plus bookkeeping counts.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub graph: KnowledgeGraph,
    pub edges_kept: usize,
    pub duplicates: usize,
    pub self_loops: usize,
    pub rejects: Vec<RejectedLine>,
}

/// Ingests six-field TSV edge records. Malformed lines are recorded in the
/// reject list and ingest continues; an empty stream yields an empty graph.
pub fn ingest_edges(reader: impl BufRead) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            report.rejects.push(RejectedLine {
                line: line_no,
                reason: format!("expected 6 tab-separated fields, found {}", fields.len()),
            });
            continue;
        }
        if fields[1].is_empty() || fields[4].is_empty() {
            report.rejects.push(RejectedLine {
                line: line_no,
                reason: "empty concept name".to_string(),
            });
            continue;
        }
        let sub = Concept {
            id: fields[0].to_string(),
            name: fields[1].to_string(),
            type_tag: fields[2].to_string(),
        };
        let sup = Concept {
            id: fields[3].to_string(),
            name: fields[4].to_string(),
            type_tag: fields[5].to_string(),
        };
        match report.graph.insert_edge(sub, sup) {
            EdgeInsert::Added => report.edges_kept += 1,
            EdgeInsert::Duplicate => report.duplicates += 1,
            EdgeInsert::SelfLoop => report.self_loops += 1,
        }
    }
    Ok(report)
}

/// Builds neighbor tables for each requested hop count in one BFS pass per
/// concept. Every `k` must be a power of two.
pub fn build_neighbor_tables(
    graph: &KnowledgeGraph,
    hop_counts: &[u32],
    seed: u64,
    bucket_length: u64,
    exec: Exec,
) -> Result<Vec<NeighborTable>> {
    if hop_counts.is_empty() {
        return Err(Error::parameter("at least one hop count is required"));
    }
    let mut ks: Vec<u32> = hop_counts.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &k in &ks {
        if k == 0 || !k.is_power_of_two() {
            return Err(Error::parameter(format!(
                "hop count {k} is not a power of two"
            )));
        }
    }
    let max_k = *ks.last().unwrap();
    let names: Vec<&String> = graph.concept_names().collect();
    // Exact-distance rings, one BFS per source concept.
    let rings: Vec<Vec<Vec<String>>> = exec::map_collect(exec, &names, |name| {
        let ball = graph.bfs_ball(name, max_k);
        ks.iter()
            .map(|&k| {
                let mut ring: Vec<String> = ball
                    .iter()
                    .filter(|&(_, &d)| d == k)
                    .map(|(n, _)| n.clone())
                    .collect();
                ring.sort();
                ring
            })
            .collect()
    });
    let mut tables = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let mut entries = BTreeMap::new();
        for (ni, name) in names.iter().enumerate() {
            let ring = &rings[ni][ki];
            if !ring.is_empty() {
                entries.insert((*name).clone(), ring.clone());
            }
        }
        tables.push(NeighborTable::new(k, seed, bucket_length, entries)?);
    }
    Ok(tables)
}

/// Expands `concept` to every concept reachable within `radius`, with exact
/// minimal distances, by chaining the power-of-two tables along the binary
/// decomposition of each distance. The start concept itself is excluded.
///
/// Requires a table for every power of two not exceeding `radius`.
pub fn compose_neighbors(
    tables: &[&NeighborTable],
    concept: &str,
    radius: u32,
) -> Result<Vec<(String, u32)>> {
    if radius == 0 {
        return Err(Error::parameter("radius must be >= 1"));
    }
    let mut by_k: BTreeMap<u32, &NeighborTable> = BTreeMap::new();
    for t in tables {
        by_k.insert(t.hop_count(), t);
    }
    let mut missing = Vec::new();
    let mut p = 1u32;
    while p <= radius {
        if !by_k.contains_key(&p) {
            missing.push(p.to_string());
        }
        p <<= 1;
    }
    if !missing.is_empty() {
        return Err(Error::parameter(format!(
            "missing neighbor tables for hop counts: {}",
            missing.join(", ")
        )));
    }

    let mut best: BTreeMap<String, u32> = BTreeMap::new();
    let seed: BTreeSet<String> = std::iter::once(concept.to_string()).collect();
    // Largest power of two not exceeding the radius.
    let top = 1u32 << (31 - radius.leading_zeros());
    descend(&by_k, &seed, 0, top, radius, &mut best);
    best.remove(concept);
    Ok(best.into_iter().collect())
}

/// Walks the prefix tree of strictly-descending power-of-two sums, folding
/// each reached layer into `best` with per-concept minimum labels.
fn descend(
    by_k: &BTreeMap<u32, &NeighborTable>,
    frontier: &BTreeSet<String>,
    sum: u32,
    max_power: u32,
    radius: u32,
    best: &mut BTreeMap<String, u32>,
) {
    let mut p = max_power;
    while p >= 1 {
        if sum + p <= radius {
            let table = by_k[&p];
            let mut next: BTreeSet<String> = BTreeSet::new();
            for c in frontier {
                if let Some(nbrs) = table.get(c) {
                    next.extend(nbrs.iter().cloned());
                }
            }
            if !next.is_empty() {
                let label = sum + p;
                for c in &next {
                    best.entry(c.clone())
                        .and_modify(|d| *d = (*d).min(label))
                        .or_insert(label);
                }
                if p > 1 {
                    descend(by_k, &next, label, p >> 1, radius, best);
                }
            }
        }
        p >>= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ingest_single_line() {
        let input = "id1\tSweet pies\twikicategory\tid2\tpie\twikicategory\n";
        let report = ingest_edges(input.as_bytes()).unwrap();
        assert_eq!(report.graph.concept_count(), 2);
        assert_eq!(report.edges_kept, 1);
        assert!(report.rejects.is_empty());
    }

    #[test]
    fn ingest_empty_stream() {
        let report = ingest_edges("".as_bytes()).unwrap();
        assert_eq!(report.graph.concept_count(), 0);
        assert_eq!(report.graph.edge_count(), 0);
    }

    #[test]
    fn ingest_dedups_repeats() {
        let line = "a\tx\tt\tb\ty\tt\n";
        let input = line.repeat(3);
        let report = ingest_edges(input.as_bytes()).unwrap();
        assert_eq!(report.edges_kept, 1);
        assert_eq!(report.duplicates, 2);
        assert_eq!(report.graph.edge_count(), 1);
    }

    #[test]
    fn ingest_rejects_malformed_and_continues() {
        let input = "a\tx\tt\tb\ty\tt\nnot-enough-fields\na\t\tt\tb\ty\tt\nc\tz\tt\td\tw\tt\n";
        let report = ingest_edges(input.as_bytes()).unwrap();
        assert_eq!(report.edges_kept, 2);
        assert_eq!(report.rejects.len(), 2);
        assert_eq!(report.rejects[0].line, 2);
        assert_eq!(report.rejects[1].line, 3);
    }

    #[test]
    fn ingest_drops_self_loops() {
        let input = "a\tx\tt\ta\tx\tt\n";
        let report = ingest_edges(input.as_bytes()).unwrap();
        assert_eq!(report.self_loops, 1);
        assert_eq!(report.graph.edge_count(), 0);
    }

    #[test]
    fn h1_of_single_edge() {
        let mut g = KnowledgeGraph::new();
        g.link("A", "B");
        let tables = build_neighbor_tables(&g, &[1], 13, 64, Exec::Sequential).unwrap();
        assert_eq!(tables[0].get("A").unwrap(), ["B"]);
        assert_eq!(tables[0].get("B").unwrap(), ["A"]);
    }

    #[test]
    fn h1_of_pie_sample() {
        let g = fixtures::pie_sample();
        let tables = build_neighbor_tables(&g, &[1], 13, 64, Exec::Sequential).unwrap();
        assert_eq!(
            tables[0].get("Sweet pies").unwrap(),
            ["Blackberry pie", "Strawberry pie", "pie"]
        );
    }

    #[test]
    fn exact_distance_on_path_graph() {
        let mut g = KnowledgeGraph::new();
        for (a, b) in [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E")] {
            g.link(a, b);
        }
        let tables = build_neighbor_tables(&g, &[4], 13, 64, Exec::Sequential).unwrap();
        assert_eq!(tables[0].get("A").unwrap(), ["E"]);
        assert_eq!(tables[0].get("C"), None);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut g = KnowledgeGraph::new();
        g.link("A", "B");
        assert!(matches!(
            build_neighbor_tables(&g, &[3], 13, 64, Exec::Sequential),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn table_symmetry() {
        let g = random_graph(60, 120, 7);
        for k in [1u32, 2] {
            let t = &build_neighbor_tables(&g, &[k], 13, 64, Exec::Sequential).unwrap()[0];
            for name in g.concept_names() {
                for nb in t.get(name).unwrap_or(&[]) {
                    assert!(
                        t.get(nb).unwrap().contains(name),
                        "H_{k} not symmetric for {name} / {nb}"
                    );
                }
            }
        }
    }

    #[test]
    fn compose_radius_one_is_h1() {
        let g = fixtures::pie_sample();
        let tables = build_neighbor_tables(&g, &[1], 13, 64, Exec::Sequential).unwrap();
        let refs: Vec<&NeighborTable> = tables.iter().collect();
        let out = compose_neighbors(&refs, "Sweet pies", 1).unwrap();
        assert_eq!(
            out,
            vec![
                ("Blackberry pie".to_string(), 1),
                ("Strawberry pie".to_string(), 1),
                ("pie".to_string(), 1)
            ]
        );
    }

    #[test]
    fn compose_reports_missing_table() {
        let g = fixtures::pie_sample();
        let tables = build_neighbor_tables(&g, &[1], 13, 64, Exec::Sequential).unwrap();
        let refs: Vec<&NeighborTable> = tables.iter().collect();
        let err = compose_neighbors(&refs, "pie", 6).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('4'), "{msg}");
    }

    #[test]
    fn compose_matches_bfs_on_random_graphs() {
        for seed in 0..6u64 {
            let g = random_graph(80, 160, seed);
            let tables =
                build_neighbor_tables(&g, &[1, 2, 4], 13, 128, Exec::Sequential).unwrap();
            let refs: Vec<&NeighborTable> = tables.iter().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
            let names: Vec<&String> = g.concept_names().collect();
            for _ in 0..8 {
                let start = names[rng.random_range(0..names.len())];
                for radius in [1u32, 3, 5, 6] {
                    let got = compose_neighbors(&refs, start, radius).unwrap();
                    let mut want = g.bfs_ball(start, radius);
                    want.remove(start.as_str());
                    let want: Vec<(String, u32)> = want.into_iter().collect();
                    assert_eq!(got, want, "seed {seed} start {start} radius {radius}");
                }
            }
        }
    }

    fn random_graph(nodes: usize, edges: usize, seed: u64) -> KnowledgeGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = KnowledgeGraph::new();
        for i in 0..nodes {
            g.add_concept(Concept {
                id: format!("n{i}"),
                name: format!("n{i}"),
                type_tag: String::new(),
            });
        }
        for _ in 0..edges {
            let a = rng.random_range(0..nodes);
            let b = rng.random_range(0..nodes);
            g.link(&format!("n{a}"), &format!("n{b}"));
        }
        g
    }
}
