//! Knowledge-graph similarity join via path-set expansion over neighbor
//! tables.
//!
//! Every member attribute is anchored to a knowledge-base concept; paths
//! grow outward from the anchors through the exact-distance neighbor tables,
//! keeping only the shortest known length per (start, end) pair. Whenever a
//! path reaches another cluster's member anchor, or a frontier entry `(r, d)`
//! with `len + d` within the hop threshold, the two clusters are joined.
//!
//! Expansion normally steps through the 1-hop table; when larger power-of-two
//! tables exist they are chained instead, which reaches the same set of
//! concepts with the same minimal distances in fewer table passes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::cluster::{apply_merges, ClusterId, ClusterRegistry};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kb::NeighborTable;

/// Binary decomposition of a hop threshold: set bits, descending.
///
/// The returned powers always sum to the input.
pub fn decompose_threshold(radius: u32) -> Result<Vec<u32>> {
    if radius == 0 {
        return Err(Error::parameter("hop threshold must be >= 1"));
    }
    let mut out = Vec::new();
    let mut bit = 1u32 << (31 - radius.leading_zeros());
    while bit >= 1 {
        if radius & bit != 0 {
            out.push(bit);
        }
        bit >>= 1;
    }
    Ok(out)
}

/// All known shortest walks, grouped by their end concept.
///
/// For each end concept the frontier holds one entry per start (a seed
/// index) carrying the minimal walk length discovered so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathFrontier {
    sets: BTreeMap<String, BTreeMap<u32, u32>>,
}

impl PathFrontier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds each start at its anchor concept with length 0.
    pub fn seed(anchors: &[String]) -> Self {
        let mut f = PathFrontier::new();
        for (i, anchor) in anchors.iter().enumerate() {
            f.add(anchor, i as u32, 0);
        }
        f
    }

    /// Records a walk; keeps the minimum length per (start, end). Returns
    /// whether the entry improved.
    pub fn add(&mut self, end: &str, start: u32, len: u32) -> bool {
        let starts = self.sets.entry(end.to_string()).or_default();
        match starts.get(&start) {
            Some(&cur) if cur <= len => false,
            _ => {
                starts.insert(start, len);
                true
            }
        }
    }

    pub fn length_of(&self, end: &str, start: u32) -> Option<u32> {
        self.sets.get(end).and_then(|s| s.get(&start)).copied()
    }

    pub fn ends(&self) -> impl Iterator<Item = (&String, &BTreeMap<u32, u32>)> {
        self.sets.iter()
    }

    pub fn end_count(&self) -> usize {
        self.sets.len()
    }

    /// Inverts into one distance map per start.
    pub fn per_start(&self, start_count: usize) -> Vec<BTreeMap<String, u32>> {
        let mut out = vec![BTreeMap::new(); start_count];
        for (end, starts) in &self.sets {
            for (&s, &len) in starts {
                out[s as usize].insert(end.clone(), len);
            }
        }
        out
    }
}

/// One expansion step: extends every known path by one `table` hop,
/// discarding lengths beyond `max_hops` and keeping minimal lengths.
/// The input paths are retained (the result is cumulative).
pub fn expand(frontier: &PathFrontier, table: &NeighborTable, max_hops: u32) -> PathFrontier {
    let mut out = frontier.clone();
    let k = table.hop_count();
    for (end, starts) in frontier.ends() {
        if let Some(nbrs) = table.get(end) {
            for nb in nbrs {
                for (&start, &len) in starts {
                    let extended = len + k;
                    if extended <= max_hops {
                        out.add(nb, start, extended);
                    }
                }
            }
        }
    }
    out
}

/// How the reach computation steps through the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionMode {
    /// One 1-hop table pass per level.
    SingleHop,
    /// Chain every available power-of-two table.
    MultiHop,
    /// MultiHop when larger tables exist and the threshold warrants them.
    #[default]
    Auto,
}

/// Computes the full reach of every start: each concept within `max_hops` of
/// a start's anchor, with its exact minimal distance.
///
/// Expansion is level-synchronous: entries settled at distance `d` extend by
/// every selected table `k` into distance `d + k`, with minimum-dedup; a
/// (start, end) pair whose minimal length is already at or below the
/// candidate is not re-expanded, so cyclic graphs terminate.
pub fn reach(
    anchors: &[String],
    tables: &[&NeighborTable],
    max_hops: u32,
    mode: ExpansionMode,
    exec: Exec,
) -> Result<PathFrontier> {
    if max_hops == 0 {
        return Err(Error::parameter("hop threshold must be >= 1"));
    }
    let mut by_k: BTreeMap<u32, &NeighborTable> = BTreeMap::new();
    for t in tables {
        by_k.insert(t.hop_count(), t);
    }
    if !by_k.contains_key(&1) {
        return Err(Error::parameter("the 1-hop neighbor table is required"));
    }
    let powers: Vec<u32> = match mode {
        ExpansionMode::SingleHop => vec![1],
        ExpansionMode::MultiHop => by_k.keys().copied().filter(|&k| k <= max_hops).collect(),
        ExpansionMode::Auto => {
            if max_hops >= 4 && by_k.keys().any(|&k| k > 1 && k <= max_hops) {
                by_k.keys().copied().filter(|&k| k <= max_hops).collect()
            } else {
                vec![1]
            }
        }
    };

    let mut cumulative = PathFrontier::seed(anchors);
    // levels[d]: entries whose minimal length settled at exactly d.
    let mut levels: Vec<BTreeMap<String, BTreeSet<u32>>> =
        vec![BTreeMap::new(); max_hops as usize + 1];
    for (i, anchor) in anchors.iter().enumerate() {
        levels[0].entry(anchor.clone()).or_default().insert(i as u32);
    }
    for level in 0..max_hops {
        let layer = std::mem::take(&mut levels[level as usize]);
        if layer.is_empty() {
            continue;
        }
        let entries: Vec<(String, Vec<u32>)> = layer
            .into_iter()
            .map(|(end, starts)| {
                // Drop entries improved below this level since insertion.
                let live: Vec<u32> = starts
                    .into_iter()
                    .filter(|&s| cumulative.length_of(&end, s) == Some(level))
                    .collect();
                (end, live)
            })
            .filter(|(_, live)| !live.is_empty())
            .collect();
        let extensions: Vec<Vec<(String, u32, u32)>> =
            exec::map_collect(exec, &entries, |(end, starts)| {
                let mut out = Vec::new();
                for &k in &powers {
                    if level + k > max_hops {
                        continue;
                    }
                    if let Some(nbrs) = by_k[&k].get(end) {
                        for nb in nbrs {
                            for &s in starts {
                                out.push((nb.clone(), s, level + k));
                            }
                        }
                    }
                }
                out
            });
        for (end, start, len) in extensions.into_iter().flatten() {
            if cumulative.add(&end, start, len) {
                levels[len as usize].entry(end).or_default().insert(start);
            }
        }
    }
    Ok(cumulative)
}

/// How merged and newly created clusters materialize their frontiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierMode {
    /// Every reached concept within the hop threshold (batch integration).
    FullBall,
    /// The anchor plus at most this many highest-degree 1-hop neighbors
    /// (incremental insertion, where full balls are rarely consulted).
    DegreeCapped(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SemanticJoinConfig {
    pub max_hops: u32,
    pub mode: ExpansionMode,
    pub frontier: FrontierMode,
}

/// Evidence for one semantic join candidate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SemanticMatch {
    pub start_attr: String,
    pub end_concept: String,
    pub path_len: u32,
    /// Distance the target held the end concept at, for frontier hits.
    pub frontier_distance: Option<u32>,
    pub probe_cluster: ClusterId,
    pub target_cluster: ClusterId,
}

#[derive(Debug, Default)]
pub struct SemanticJoinReport {
    pub evidence: Vec<SemanticMatch>,
    pub merges: usize,
    /// Seed members with no knowledge-base anchor; their clusters still
    /// participate through anchored co-members.
    pub skipped: Vec<String>,
}

/// Semantic join of the `seeds` clusters against every live cluster.
///
/// `anchors` maps attribute names to their knowledge-base anchor concept
/// (`None` marks a KB-absent attribute). For batch integration the seeds are
/// all clusters; incremental insertion seeds only the new singletons.
pub fn semantic_join(
    reg: &mut ClusterRegistry,
    seeds: &[ClusterId],
    anchors: &BTreeMap<String, Option<String>>,
    tables: &[&NeighborTable],
    cfg: &SemanticJoinConfig,
    exec: Exec,
) -> Result<SemanticJoinReport> {
    let mut report = SemanticJoinReport::default();
    // Collect anchored starts from the seed clusters.
    let mut starts: Vec<(String, String, ClusterId)> = Vec::new();
    for &id in seeds {
        let Some(cluster) = reg.get(id) else { continue };
        for member in &cluster.members {
            match anchors.get(member).and_then(|a| a.as_ref()) {
                Some(anchor) => starts.push((member.clone(), anchor.clone(), id)),
                None => report.skipped.push(member.clone()),
            }
        }
    }
    if starts.is_empty() {
        report.skipped.sort();
        report.skipped.dedup();
        return Ok(report);
    }
    let anchor_list: Vec<String> = starts.iter().map(|(_, a, _)| a.clone()).collect();
    let reached = reach(&anchor_list, tables, cfg.max_hops, cfg.mode, exec)?;

    // Hit maps over every live cluster: member anchors and frontier entries.
    let mut anchor_clusters: HashMap<&str, BTreeSet<ClusterId>> = HashMap::new();
    let mut frontier_entries: HashMap<&str, Vec<(ClusterId, u32)>> = HashMap::new();
    for cluster in reg.iter() {
        for member in &cluster.members {
            if let Some(Some(anchor)) = anchors.get(member) {
                anchor_clusters.entry(anchor).or_default().insert(cluster.id);
            }
        }
        for (concept, &d) in &cluster.frontier {
            frontier_entries.entry(concept).or_default().push((cluster.id, d));
        }
    }

    for (end, end_starts) in reached.ends() {
        let member_hits = anchor_clusters.get(end.as_str());
        let frontier_hits = frontier_entries.get(end.as_str());
        if member_hits.is_none() && frontier_hits.is_none() {
            continue;
        }
        for (&start_idx, &len) in end_starts {
            let (attr, _, seed_cluster) = &starts[start_idx as usize];
            if let Some(hits) = member_hits {
                for &target in hits {
                    if target != *seed_cluster {
                        report.evidence.push(SemanticMatch {
                            start_attr: attr.clone(),
                            end_concept: end.clone(),
                            path_len: len,
                            frontier_distance: None,
                            probe_cluster: *seed_cluster,
                            target_cluster: target,
                        });
                    }
                }
            }
            if let Some(hits) = frontier_hits {
                for &(target, d) in hits {
                    if target != *seed_cluster && len + d <= cfg.max_hops {
                        report.evidence.push(SemanticMatch {
                            start_attr: attr.clone(),
                            end_concept: end.clone(),
                            path_len: len,
                            frontier_distance: Some(d),
                            probe_cluster: *seed_cluster,
                            target_cluster: target,
                        });
                    }
                }
            }
        }
    }
    report.evidence.sort();
    report.evidence.dedup();
    report.merges = apply_merges(
        reg,
        report.evidence.iter().map(|m| (m.probe_cluster, m.target_cluster)),
    )?;

    // Materialize discovered frontiers into the (possibly merged) clusters.
    let balls = reached.per_start(starts.len());
    for (i, (attr, anchor, _)) in starts.iter().enumerate() {
        let Some(current) = reg.locate_id(attr) else { continue };
        let entries: Vec<(String, u32)> = match cfg.frontier {
            FrontierMode::FullBall => balls[i].iter().map(|(c, &d)| (c.clone(), d)).collect(),
            FrontierMode::DegreeCapped(cap) => {
                let h1 = tables.iter().find(|t| t.hop_count() == 1).unwrap();
                let mut hops: Vec<&String> =
                    h1.get(anchor).map(|n| n.iter().collect()).unwrap_or_default();
                // Highest degree first, name as tie-break.
                hops.sort_by(|a, b| {
                    let da = h1.get(a).map_or(0, <[String]>::len);
                    let db = h1.get(b).map_or(0, <[String]>::len);
                    db.cmp(&da).then_with(|| a.cmp(b))
                });
                std::iter::once((anchor.clone(), 0))
                    .chain(hops.into_iter().take(cap).map(|c| (c.clone(), 1)))
                    .collect()
            }
        };
        if let Some(cluster) = reg.get_mut(current) {
            cluster.absorb_frontier(entries);
        }
    }
    report.skipped.sort();
    report.skipped.dedup();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::kb::{build_neighbor_tables, KnowledgeGraph};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tables_for(g: &KnowledgeGraph, ks: &[u32]) -> Vec<NeighborTable> {
        build_neighbor_tables(g, ks, 13, 256, Exec::Sequential).unwrap()
    }

    fn refs(tables: &[NeighborTable]) -> Vec<&NeighborTable> {
        tables.iter().collect()
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose_threshold(6).unwrap(), vec![4, 2]);
        assert_eq!(decompose_threshold(1).unwrap(), vec![1]);
        assert_eq!(decompose_threshold(7).unwrap(), vec![4, 2, 1]);
        assert!(decompose_threshold(0).is_err());
        for r in 1..40u32 {
            assert_eq!(decompose_threshold(r).unwrap().iter().sum::<u32>(), r);
        }
    }

    #[test]
    fn pie_expansion_reaches_expected_ends() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let reached = reach(
            &["Blackberry pie".to_string()],
            &refs(&tables),
            4,
            ExpansionMode::SingleHop,
            Exec::Sequential,
        )
        .unwrap();
        let ball = &reached.per_start(1)[0];
        let want: BTreeMap<String, u32> = [
            ("American pies", 1),
            ("Sweet pies", 1),
            ("Key lime pie", 2),
            ("pie", 2),
            ("Natchitoches meat pie", 2),
            ("Strawberry pie", 2),
            ("Savoury pies", 3),
            ("Tiropita", 4),
        ]
        .into_iter()
        .map(|(c, d)| (c.to_string(), d))
        .collect();
        let got: BTreeMap<String, u32> = ball
            .iter()
            .filter(|&(_, &d)| d >= 1)
            .map(|(c, &d)| (c.clone(), d))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn duplicate_paths_keep_shortest() {
        // Both a 2-walk and a 4-walk lead from Blackberry pie to the meat
        // pie; the retained length is 2.
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let reached = reach(
            &["Blackberry pie".to_string()],
            &refs(&tables),
            4,
            ExpansionMode::SingleHop,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(reached.length_of("Natchitoches meat pie", 0), Some(2));
    }

    #[test]
    fn single_expand_step_adds_two_hop_ends() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let seeded = expand(
            &PathFrontier::seed(&["Blackberry pie".to_string()]),
            &tables[0],
            4,
        );
        let stepped = expand(&seeded, &tables[0], 4);
        for end in ["Key lime pie", "pie", "Natchitoches meat pie", "Strawberry pie"] {
            assert_eq!(seeded.length_of(end, 0), None, "{end} too early");
            assert_eq!(stepped.length_of(end, 0), Some(2), "{end}");
        }
    }

    #[test]
    fn expanding_empty_frontier_is_empty() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let out = expand(&PathFrontier::new(), &tables[0], 4);
        assert_eq!(out.end_count(), 0);
    }

    #[test]
    fn repeated_expand_matches_reach() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let mut frontier = PathFrontier::seed(&["Blackberry pie".to_string()]);
        for _ in 0..4 {
            frontier = expand(&frontier, &tables[0], 4);
        }
        let reached = reach(
            &["Blackberry pie".to_string()],
            &refs(&tables),
            4,
            ExpansionMode::SingleHop,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(frontier, reached);
    }

    #[test]
    fn multi_hop_tables_match_single_hop_and_bfs() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = KnowledgeGraph::new();
            for i in 0..120usize {
                let a = rng.random_range(0..120);
                g.link(&format!("n{i}"), &format!("n{a}"));
            }
            let tables = tables_for(&g, &[1, 2, 4]);
            let anchor = vec!["n0".to_string(), format!("n{}", rng.random_range(1..120))];
            for gamma in [2u32, 3, 4, 6] {
                let single = reach(
                    &anchor,
                    &refs(&tables[..1]),
                    gamma,
                    ExpansionMode::SingleHop,
                    Exec::Sequential,
                )
                .unwrap();
                let multi = reach(
                    &anchor,
                    &refs(&tables),
                    gamma,
                    ExpansionMode::MultiHop,
                    Exec::default(),
                )
                .unwrap();
                assert_eq!(single, multi, "seed {seed} gamma {gamma}");
                for (i, a) in anchor.iter().enumerate() {
                    let ball = g.bfs_ball(a, gamma);
                    let got = &single.per_start(anchor.len())[i];
                    assert_eq!(got, &ball, "bfs mismatch seed {seed} gamma {gamma}");
                }
            }
        }
    }

    fn registry_with_anchored(
        attrs: &[(&str, &str)],
    ) -> (ClusterRegistry, BTreeMap<String, Option<String>>) {
        let mut reg = ClusterRegistry::new();
        let mut anchors = BTreeMap::new();
        for (attr, anchor) in attrs {
            reg.insert_singleton(*attr, BTreeMap::new()).unwrap();
            anchors.insert(attr.to_string(), Some(anchor.to_string()));
        }
        (reg, anchors)
    }

    #[test]
    fn gamma_one_yields_one_hop_frontier_without_multihop_merges() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let (mut reg, anchors) = registry_with_anchored(&[
            ("Blackberry pie", "Blackberry pie"),
            ("Tiropita", "Tiropita"),
        ]);
        let ids = reg.ids();
        let cfg = SemanticJoinConfig {
            max_hops: 1,
            mode: ExpansionMode::SingleHop,
            frontier: FrontierMode::FullBall,
        };
        let report =
            semantic_join(&mut reg, &ids, &anchors, &refs(&tables), &cfg, Exec::Sequential)
                .unwrap();
        // Distance 5 apart: no merge at radius 1.
        assert_eq!(report.merges, 0);
        let c = reg.locate("Blackberry pie").unwrap();
        let want: BTreeMap<String, u32> = [
            ("Blackberry pie", 0),
            ("American pies", 1),
            ("Sweet pies", 1),
        ]
        .into_iter()
        .map(|(c, d)| (c.to_string(), d))
        .collect();
        assert_eq!(c.frontier, want);
    }

    #[test]
    fn clusters_merge_when_anchors_are_close() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let (mut reg, anchors) = registry_with_anchored(&[
            ("blackberry", "Blackberry pie"),
            ("strawberry", "Strawberry pie"),
            ("cheese pastry", "Tiropita"),
        ]);
        let ids = reg.ids();
        let cfg = SemanticJoinConfig {
            max_hops: 3,
            mode: ExpansionMode::SingleHop,
            frontier: FrontierMode::FullBall,
        };
        let report =
            semantic_join(&mut reg, &ids, &anchors, &refs(&tables), &cfg, Exec::Sequential)
                .unwrap();
        // blackberry and strawberry anchors sit 3 apart and merge; Tiropita
        // is at least 4 from both anchors.
        assert_eq!(report.merges, 1);
        assert_eq!(
            reg.locate("blackberry").unwrap().id,
            reg.locate("strawberry").unwrap().id
        );
        assert_ne!(
            reg.locate("blackberry").unwrap().id,
            reg.locate("cheese pastry").unwrap().id
        );
    }

    #[test]
    fn frontier_hit_merges_with_budget() {
        // Existing cluster holds "pie" in its frontier at distance 2; a new
        // attribute anchored at "Savoury pies" reaches "pie" with len 1, and
        // 1 + 2 <= 3 joins them.
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let mut reg = ClusterRegistry::new();
        reg.insert_singleton("blackberry", BTreeMap::from([("pie".to_string(), 2)]))
            .unwrap();
        let newcomer = reg.insert_singleton("savoury", BTreeMap::new()).unwrap();
        let anchors = BTreeMap::from([
            ("blackberry".to_string(), Some("Blackberry pie".to_string())),
            ("savoury".to_string(), Some("Savoury pies".to_string())),
        ]);
        let cfg = SemanticJoinConfig {
            max_hops: 3,
            mode: ExpansionMode::SingleHop,
            frontier: FrontierMode::FullBall,
        };
        let report = semantic_join(
            &mut reg,
            &[newcomer],
            &anchors,
            &refs(&tables),
            &cfg,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(report.merges, 1);
        assert!(report
            .evidence
            .iter()
            .any(|m| m.frontier_distance == Some(2) && m.end_concept == "pie"));
    }

    #[test]
    fn unanchored_members_are_skipped_not_fatal() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let mut reg = ClusterRegistry::new();
        reg.insert_singleton("mystery", BTreeMap::new()).unwrap();
        let anchors = BTreeMap::from([("mystery".to_string(), None)]);
        let ids = reg.ids();
        let cfg = SemanticJoinConfig {
            max_hops: 3,
            mode: ExpansionMode::SingleHop,
            frontier: FrontierMode::FullBall,
        };
        let report =
            semantic_join(&mut reg, &ids, &anchors, &refs(&tables), &cfg, Exec::Sequential)
                .unwrap();
        assert_eq!(report.skipped, vec!["mystery".to_string()]);
        assert_eq!(report.merges, 0);
    }

    #[test]
    fn degree_capped_frontier_takes_highest_degree_neighbors() {
        let g = fixtures::pie_sample();
        let tables = tables_for(&g, &[1]);
        let (mut reg, anchors) = registry_with_anchored(&[("blackberry", "American pies")]);
        let ids = reg.ids();
        let cfg = SemanticJoinConfig {
            max_hops: 3,
            mode: ExpansionMode::SingleHop,
            frontier: FrontierMode::DegreeCapped(2),
        };
        semantic_join(&mut reg, &ids, &anchors, &refs(&tables), &cfg, Exec::Sequential)
            .unwrap();
        let c = reg.locate("blackberry").unwrap();
        // American pies has neighbors Blackberry pie (deg 2), Key lime pie
        // (deg 1), Natchitoches meat pie (deg 2), pie (deg 3). Top two by
        // degree: pie, then Blackberry pie on the name tie-break.
        let want: BTreeMap<String, u32> = [
            ("American pies", 0),
            ("pie", 1),
            ("Blackberry pie", 1),
        ]
        .into_iter()
        .map(|(c, d)| (c.to_string(), d))
        .collect();
        assert_eq!(c.frontier, want);
    }

    /// Random-graph oracle: clusters merge exactly when the minimal
    /// cross-pair anchor distance is within the threshold.
    #[test]
    fn merges_match_min_cross_distance_oracle() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 17 + 3);
            let mut g = KnowledgeGraph::new();
            for i in 0..150usize {
                let a = rng.random_range(0..150);
                g.link(&format!("n{i}"), &format!("n{a}"));
            }
            let tables = tables_for(&g, &[1]);
            let gamma = 3u32;
            // Ten clusters of two anchored attributes each.
            let mut reg = ClusterRegistry::new();
            let mut anchors = BTreeMap::new();
            let mut cluster_anchor_sets: Vec<(ClusterId, Vec<String>)> = Vec::new();
            for ci in 0..10 {
                let a1 = format!("n{}", rng.random_range(0..150));
                let a2 = format!("n{}", rng.random_range(0..150));
                let attr1 = format!("attr{ci}a");
                let attr2 = format!("attr{ci}b");
                let id = reg.insert_singleton(attr1.clone(), BTreeMap::new()).unwrap();
                let id2 = reg.insert_singleton(attr2.clone(), BTreeMap::new()).unwrap();
                reg.pair_join(id, id2).unwrap();
                let merged = reg.locate_id(&attr1).unwrap();
                anchors.insert(attr1, Some(a1.clone()));
                anchors.insert(attr2, Some(a2.clone()));
                cluster_anchor_sets.push((merged, vec![a1, a2]));
            }
            let ids = reg.ids();
            let cfg = SemanticJoinConfig {
                max_hops: gamma,
                mode: ExpansionMode::SingleHop,
                frontier: FrontierMode::FullBall,
            };
            let mut reg_out = reg.clone();
            semantic_join(&mut reg_out, &ids, &anchors, &refs(&tables), &cfg, Exec::default())
                .unwrap();

            // Oracle: union-find over cluster pairs whose min cross anchor
            // distance is within gamma.
            let n = cluster_anchor_sets.len();
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            for i in 0..n {
                for j in i + 1..n {
                    let mut within = false;
                    for a in &cluster_anchor_sets[i].1 {
                        let ball = g.bfs_ball(a, gamma);
                        for b in &cluster_anchor_sets[j].1 {
                            if ball.contains_key(b) {
                                within = true;
                            }
                        }
                    }
                    if within {
                        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                        if ri != rj {
                            parent[ri] = rj;
                        }
                    }
                }
            }
            let mut oracle_groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
            for (i, (id, _)) in cluster_anchor_sets.iter().enumerate() {
                let root = find(&mut parent, i);
                let members = reg.get(*id).unwrap().members.clone();
                oracle_groups.entry(root).or_default().extend(members);
            }
            let oracle: BTreeSet<BTreeSet<String>> = oracle_groups.into_values().collect();
            let got: BTreeSet<BTreeSet<String>> =
                reg_out.iter().map(|c| c.members.clone()).collect();
            assert_eq!(got, oracle, "seed {seed}");
        }
    }
}
