//! Post-join transitivity repair and verification.
//!
//! Similarity joins are not transitive: a chain of close pairs can pull
//! attributes into one cluster whose ends have nothing in common. Resolve
//! splits such clusters until every member pair sits within the tolerance
//! diameter (`tolerance * max_hops` for anchored pairs, the edit threshold
//! for literal-only pairs). Splitting is pivot-based: the worst violating
//! pair seeds two parts, every other member joins each part it is compatible
//! with, and members compatible with both sides stay in both (bridging), so
//! no relationship knowledge is lost.
//!
//! Verification folds in here as well: pairs whose attribute values disagree
//! on type or affix are treated as infinitely far apart (forcing a split)
//! and are queued for manual review; an imported reject verdict becomes a
//! permanent veto enforced the same way.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterSet;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::kb::KnowledgeGraph;
use crate::text::edit_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolveConfig {
    /// Diameter tolerance multiplier (> 1) applied to the hop threshold.
    pub tolerance: f64,
    pub max_hops: u32,
    pub max_edit: u32,
}

impl ResolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance <= 1.0 {
            return Err(Error::parameter("tolerance must be > 1"));
        }
        Ok(())
    }

    /// Largest integer distance within `tolerance * max_hops`.
    pub fn semantic_diameter(&self) -> u32 {
        (self.tolerance * f64::from(self.max_hops)).floor() as u32
    }
}

// ---------------------------------------------------------------------------
// Value verification
// ---------------------------------------------------------------------------

/// Inferred structural type of one sample value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Integer,
    Decimal,
    Date,
    List,
    Text,
}

/// Which judgment rule decided a verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleFired {
    /// No samples on one side, or no dominant structure; nothing to judge.
    Inapplicable,
    Type,
    Affix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueVerdict {
    pub pass: bool,
    pub rule: RuleFired,
}

fn is_integer(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let mut parts = body.splitn(2, '.');
    let (int, frac) = (parts.next().unwrap_or(""), parts.next());
    match frac {
        Some(frac) => {
            (int.is_empty() || int.bytes().all(|b| b.is_ascii_digit()))
                && (frac.is_empty() || frac.bytes().all(|b| b.is_ascii_digit()))
                && !(int.is_empty() && frac.is_empty())
        }
        None => false,
    }
}

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

fn is_month(s: &str) -> bool {
    let s = s.to_lowercase();
    MONTHS.iter().any(|m| *m == s)
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Small built-in date pattern set: numeric triplets such as `2011-07-10` or
/// `10/07/2011`, and month-name pairs such as `Jul-10`.
fn is_date(s: &str) -> bool {
    let short_number = |x: &str| all_digits(x) && x.len() <= 4;
    for sep in ['-', '/', ' '] {
        let parts: Vec<&str> = s.split(sep).collect();
        match parts.as_slice() {
            [a, b, c]
                if short_number(a)
                    && short_number(b)
                    && short_number(c)
                    && (a.len() == 4 || c.len() == 4) =>
            {
                return true;
            }
            [a, b]
                if (is_month(a) && short_number(b)) || (short_number(a) && is_month(b)) =>
            {
                return true;
            }
            _ => {}
        }
    }
    false
}

fn is_list(s: &str) -> bool {
    for sep in [',', ';', '|'] {
        let parts: Vec<&str> = s.split(sep).collect();
        if parts.len() >= 2 && parts.iter().all(|p| !p.trim().is_empty()) {
            return true;
        }
    }
    false
}

pub fn infer_type(sample: &str) -> ValueType {
    if is_integer(sample) {
        ValueType::Integer
    } else if is_decimal(sample) {
        ValueType::Decimal
    } else if is_date(sample) {
        ValueType::Date
    } else if is_list(sample) {
        ValueType::List
    } else {
        ValueType::Text
    }
}

/// Share of samples that must agree before a structure counts as dominant.
const DOMINANCE: f64 = 0.8;

fn dominant_type(samples: &[String]) -> Option<ValueType> {
    if samples.is_empty() {
        return None;
    }
    let mut counts: Vec<(ValueType, usize)> = Vec::new();
    for s in samples {
        let t = infer_type(s);
        match counts.iter_mut().find(|(ty, _)| *ty == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts
        .into_iter()
        .find(|&(_, c)| c as f64 >= DOMINANCE * samples.len() as f64)
        .map(|(t, _)| t)
}

fn compatible_types(a: ValueType, b: ValueType) -> bool {
    use ValueType::*;
    a == b || matches!((a, b), (Integer, Decimal) | (Decimal, Integer))
}

/// Longest affix shared by at least [`DOMINANCE`] of the samples. `forward`
/// selects prefix vs suffix.
fn dominant_affix(samples: &[String], forward: bool) -> Option<String> {
    if samples.is_empty() {
        return None;
    }
    let chars: Vec<Vec<char>> = samples
        .iter()
        .map(|s| {
            let mut v: Vec<char> = s.chars().collect();
            if !forward {
                v.reverse();
            }
            v
        })
        .collect();
    let need = DOMINANCE * samples.len() as f64;
    let mut affix: Vec<char> = Vec::new();
    loop {
        let pos = affix.len();
        // Most common next character among samples still matching the affix.
        let mut freq: BTreeMap<char, usize> = BTreeMap::new();
        for cs in &chars {
            if cs.len() > pos && cs[..pos] == affix[..] {
                *freq.entry(cs[pos]).or_insert(0) += 1;
            }
        }
        match freq.into_iter().max_by_key(|&(c, n)| (n, std::cmp::Reverse(c))) {
            Some((c, n)) if n as f64 >= need => affix.push(c),
            _ => break,
        }
    }
    if affix.is_empty() {
        None
    } else {
        if !forward {
            affix.reverse();
        }
        Some(affix.into_iter().collect())
    }
}

fn affixes_compatible(a: &str, b: &str, forward: bool) -> bool {
    if forward {
        a.starts_with(b) || b.starts_with(a)
    } else {
        a.ends_with(b) || b.ends_with(a)
    }
}

/// Value-based verification of one attribute pair.
///
/// The type rule fires first: dominant value types on both sides must be
/// compatible. The affix rule fires second: when both sides exhibit a
/// dominant prefix (or suffix), the affixes must agree. A side without
/// samples makes the rules inapplicable and the pair passes by default.
pub fn value_verify(left: &[String], right: &[String]) -> ValueVerdict {
    if left.is_empty() || right.is_empty() {
        return ValueVerdict { pass: true, rule: RuleFired::Inapplicable };
    }
    let (lt, rt) = (dominant_type(left), dominant_type(right));
    if let (Some(lt), Some(rt)) = (lt, rt) {
        if !compatible_types(lt, rt) {
            return ValueVerdict { pass: false, rule: RuleFired::Type };
        }
    }
    let mut affix_applied = false;
    for forward in [true, false] {
        let (la, ra) = (dominant_affix(left, forward), dominant_affix(right, forward));
        if let (Some(la), Some(ra)) = (la, ra) {
            affix_applied = true;
            if !affixes_compatible(&la, &ra, forward) {
                return ValueVerdict { pass: false, rule: RuleFired::Affix };
            }
        }
    }
    let rule = if affix_applied {
        RuleFired::Affix
    } else if lt.is_some() && rt.is_some() {
        RuleFired::Type
    } else {
        RuleFired::Inapplicable
    };
    ValueVerdict { pass: true, rule }
}

// ---------------------------------------------------------------------------
// Review queue
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewVerdict {
    Pending,
    Accept,
    Reject,
}

/// One pair awaiting (or having received) a manual decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub left: String,
    pub right: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_distance: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_distance: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub left_values: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub right_values: Vec<String>,
    pub verdict: ReviewVerdict,
}

/// Stable id for an attribute pair, independent of order.
pub fn review_id(a: &str, b: &str) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in x.bytes().chain([0x1f]).chain(y.bytes()) {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("rv{h:016x}")
}

/// Canonical unordered pair.
pub fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Serializes pending items as one JSON document per line.
pub fn review_export(items: &[ReviewItem]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        if item.verdict == ReviewVerdict::Pending {
            out.push_str(
                &serde_json::to_string(item).map_err(|e| Error::data(e.to_string()))?,
            );
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct DecisionRecord {
    id: String,
    verdict: ReviewVerdict,
}

/// Parses a decisions document (JSONL with `id` and `verdict` fields).
pub fn parse_decisions(input: &str) -> Result<Vec<(String, ReviewVerdict)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DecisionRecord = serde_json::from_str(line)
            .map_err(|e| Error::data(format!("decisions line {}: {e}", i + 1)))?;
        out.push((rec.id, rec.verdict));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cluster splitting
// ---------------------------------------------------------------------------

/// Distance context handed to resolve.
pub struct ResolveContext<'a> {
    pub graph: Option<&'a KnowledgeGraph>,
    /// Attribute -> knowledge-base anchor (None = KB-absent).
    pub anchors: &'a BTreeMap<String, Option<String>>,
    /// Attribute -> sample values.
    pub samples: &'a BTreeMap<String, Vec<String>>,
    /// Canonically-ordered pairs that must never share a cluster.
    pub vetoes: &'a BTreeSet<(String, String)>,
    /// Canonically-ordered pairs a reviewer confirmed; they bypass value
    /// verification and count as distance zero.
    pub accepts: &'a BTreeSet<(String, String)>,
}

/// A resolved output cluster (ids are reassigned by the caller).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResolvedCluster {
    pub members: BTreeSet<String>,
    pub frontier: BTreeMap<String, u32>,
}

#[derive(Debug, Default)]
pub struct ResolveReport {
    pub clusters: Vec<ResolvedCluster>,
    /// Pairs dropped by value verification, pending manual review.
    pub queued: Vec<ReviewItem>,
    pub splits: usize,
}

/// Pairwise distance with its applicable threshold. `None` distance means
/// unreachable (or vetoed), which always violates.
#[derive(Debug, Clone, Copy)]
struct PairCheck {
    distance: Option<u32>,
    threshold: f64,
}

impl PairCheck {
    fn violates(&self) -> bool {
        match self.distance {
            None => true,
            Some(d) => f64::from(d) > self.threshold,
        }
    }

    /// Sort key so the worst pair splits first; unreachable pairs dominate.
    fn severity(&self) -> u64 {
        self.distance.map_or(u64::MAX, u64::from)
    }
}

struct ClusterScope<'a> {
    ctx: &'a ResolveContext<'a>,
    cfg: &'a ResolveConfig,
    /// Cached BFS balls per anchor, radius = semantic diameter.
    balls: HashMap<&'a str, BTreeMap<String, u32>>,
    value_failures: Vec<(String, String)>,
}

impl<'a> ClusterScope<'a> {
    fn new(ctx: &'a ResolveContext<'a>, cfg: &'a ResolveConfig, members: &[&'a String]) -> Self {
        let mut balls = HashMap::new();
        if let Some(graph) = ctx.graph {
            let radius = cfg.semantic_diameter();
            for m in members {
                if let Some(Some(anchor)) = ctx.anchors.get(*m) {
                    balls
                        .entry(anchor.as_str())
                        .or_insert_with(|| graph.bfs_ball(anchor, radius));
                }
            }
        }
        ClusterScope { ctx, cfg, balls, value_failures: Vec::new() }
    }

    fn anchor_of(&self, attr: &str) -> Option<&'a String> {
        match self.ctx.anchors.get(attr) {
            Some(Some(anchor)) => Some(anchor),
            _ => None,
        }
    }

    fn check(&mut self, a: &str, b: &str) -> PairCheck {
        let key = pair_key(a, b);
        if self.ctx.vetoes.contains(&key) {
            return PairCheck { distance: None, threshold: 0.0 };
        }
        if self.ctx.accepts.contains(&key) {
            return PairCheck { distance: Some(0), threshold: 0.0 };
        }
        let samples_a = self.ctx.samples.get(a).map_or(&[][..], Vec::as_slice);
        let samples_b = self.ctx.samples.get(b).map_or(&[][..], Vec::as_slice);
        if !value_verify(samples_a, samples_b).pass {
            self.value_failures.push(key);
            return PairCheck { distance: None, threshold: 0.0 };
        }
        match (self.anchor_of(a), self.anchor_of(b)) {
            (Some(ca), Some(cb)) => {
                let threshold = self.cfg.tolerance * f64::from(self.cfg.max_hops);
                let distance = if self.ctx.graph.is_some() {
                    self.balls.get(ca.as_str()).and_then(|ball| ball.get(cb.as_str())).copied()
                } else {
                    // No graph: only identical anchors are decidable.
                    if ca == cb {
                        Some(0)
                    } else {
                        None
                    }
                };
                PairCheck { distance, threshold }
            }
            _ => PairCheck {
                distance: Some(edit_distance(&a.to_lowercase(), &b.to_lowercase())),
                threshold: f64::from(self.cfg.max_edit),
            },
        }
    }

    /// Recursive pivot split; emits parts whose pairs all satisfy the
    /// diameter. Returns the number of splits performed.
    fn split(&mut self, members: Vec<&'a String>, out: &mut Vec<Vec<&'a String>>) -> usize {
        if members.len() <= 1 {
            out.push(members);
            return 0;
        }
        // Worst violating pair.
        let mut worst: Option<(usize, usize, u64)> = None;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let check = self.check(members[i], members[j]);
                if check.violates() {
                    let sev = check.severity();
                    let better = match worst {
                        None => true,
                        Some((_, _, cur)) => sev > cur,
                    };
                    if better {
                        worst = Some((i, j, sev));
                    }
                }
            }
        }
        let Some((xi, yi, _)) = worst else {
            out.push(members);
            return 0;
        };
        let (x, y) = (members[xi], members[yi]);
        let mut part_x = vec![x];
        let mut part_y = vec![y];
        let mut leftovers = Vec::new();
        for &m in &members {
            if m == x || m == y {
                continue;
            }
            let near_x = !self.check(m, x).violates();
            let near_y = !self.check(m, y).violates();
            if near_x {
                part_x.push(m);
            }
            if near_y {
                part_y.push(m);
            }
            if !near_x && !near_y {
                leftovers.push(m);
            }
        }
        let mut splits = 1;
        splits += self.split(part_x, out);
        splits += self.split(part_y, out);
        if !leftovers.is_empty() {
            splits += self.split(leftovers, out);
        }
        splits
    }
}

/// Splits every cluster violating the tolerance diameter. Bridging members
/// appear in each part they fit; coverage of the input attributes is
/// preserved. Value-rule failures and vetoes force splits, and the former
/// are queued for review.
/// Per-cluster resolve output: parts, value-rule failures, split count.
type ClusterResolution = (Vec<ResolvedCluster>, Vec<(String, String)>, usize);

pub fn resolve_family(
    clusters: &[ClusterSet],
    ctx: &ResolveContext,
    cfg: &ResolveConfig,
    exec: Exec,
) -> Result<ResolveReport> {
    cfg.validate()?;
    let results: Vec<ClusterResolution> =
        exec::map_collect(exec, clusters, |cluster| {
            let members: Vec<&String> = cluster.members.iter().collect();
            let mut scope = ClusterScope::new(ctx, cfg, &members);
            let mut parts: Vec<Vec<&String>> = Vec::new();
            let splits = scope.split(members, &mut parts);
            // Deduplicate and drop parts contained in a sibling part.
            let mut sets: Vec<BTreeSet<String>> = parts
                .into_iter()
                .map(|p| p.into_iter().cloned().collect::<BTreeSet<String>>())
                .collect();
            sets.sort_by_key(|s| std::cmp::Reverse(s.len()));
            let mut kept: Vec<BTreeSet<String>> = Vec::new();
            for s in sets {
                if !kept.iter().any(|k| s.is_subset(k)) {
                    kept.push(s);
                }
            }
            kept.sort();
            let resolved = kept
                .into_iter()
                .map(|members| {
                    let frontier = part_frontier(&members, cluster, &scope, cfg);
                    ResolvedCluster { members, frontier }
                })
                .collect();
            (resolved, scope.value_failures, splits)
        });

    let mut report = ResolveReport::default();
    for (resolved, failures, splits) in results {
        report.clusters.extend(resolved);
        report.splits += splits;
        for (left, right) in failures {
            report.queued.push(ReviewItem {
                id: review_id(&left, &right),
                literal_distance: Some(edit_distance(
                    &left.to_lowercase(),
                    &right.to_lowercase(),
                )),
                semantic_distance: semantic_distance(&left, &right, ctx, cfg),
                left_values: ctx.samples.get(&left).cloned().unwrap_or_default(),
                right_values: ctx.samples.get(&right).cloned().unwrap_or_default(),
                left,
                right,
                verdict: ReviewVerdict::Pending,
            });
        }
    }
    report.clusters.sort();
    report.clusters.dedup();
    report.queued.sort_by(|a, b| a.id.cmp(&b.id));
    report.queued.dedup_by(|a, b| a.id == b.id);
    Ok(report)
}

fn semantic_distance(
    a: &str,
    b: &str,
    ctx: &ResolveContext,
    cfg: &ResolveConfig,
) -> Option<u32> {
    let graph = ctx.graph?;
    let ca = ctx.anchors.get(a)?.as_ref()?;
    let cb = ctx.anchors.get(b)?.as_ref()?;
    graph.bfs_ball(ca, cfg.semantic_diameter()).get(cb.as_str()).copied()
}

/// Frontier of a split part. The materialized concept set stays what the
/// original cluster held; only the minimum distances are recomputed over the
/// part's members (entries beyond the hop threshold drop out). Without a
/// graph, distances of a strict subset cannot be re-proven and are dropped.
fn part_frontier(
    members: &BTreeSet<String>,
    original: &ClusterSet,
    scope: &ClusterScope,
    cfg: &ResolveConfig,
) -> BTreeMap<String, u32> {
    if scope.ctx.graph.is_none() {
        return if members.len() == original.members.len() {
            original.frontier.clone()
        } else {
            BTreeMap::new()
        };
    }
    let mut out: BTreeMap<String, u32> = BTreeMap::new();
    for concept in original.frontier.keys() {
        let mut best: Option<u32> = None;
        for m in members {
            if let Some(Some(anchor)) = scope.ctx.anchors.get(m) {
                if let Some(d) =
                    scope.balls.get(anchor.as_str()).and_then(|b| b.get(concept)).copied()
                {
                    best = Some(best.map_or(d, |cur| cur.min(d)));
                }
            }
        }
        if let Some(d) = best {
            if d <= cfg.max_hops {
                out.insert(concept.clone(), d);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cluster_of(members: &[&str]) -> ClusterSet {
        ClusterSet {
            id: 0,
            members: members.iter().map(|s| s.to_string()).collect(),
            frontier: BTreeMap::new(),
        }
    }

    fn identity_anchors(names: &[&str]) -> BTreeMap<String, Option<String>> {
        names.iter().map(|n| (n.to_string(), Some(n.to_string()))).collect()
    }

    #[test]
    fn housing_cluster_splits_into_two_bridged_parts() {
        let graph = fixtures::housing_sample();
        let anchors = identity_anchors(&["house", "home", "building", "family"]);
        let samples = BTreeMap::new();
        let vetoes = BTreeSet::new();
        let accepts = BTreeSet::new();
        let ctx = ResolveContext { graph: Some(&graph), anchors: &anchors, samples: &samples, vetoes: &vetoes, accepts: &accepts };
        let cfg = ResolveConfig { tolerance: 1.5, max_hops: 2, max_edit: 1 };
        let report = resolve_family(
            &[cluster_of(&["house", "home", "building", "family"])],
            &ctx,
            &cfg,
            Exec::Sequential,
        )
        .unwrap();
        let got: BTreeSet<BTreeSet<String>> =
            report.clusters.iter().map(|c| c.members.clone()).collect();
        let want: BTreeSet<BTreeSet<String>> = [
            ["building", "house", "home"].as_slice(),
            ["family", "house", "home"].as_slice(),
        ]
        .iter()
        .map(|c| c.iter().map(|s| s.to_string()).collect())
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn compliant_cluster_is_unchanged() {
        let graph = fixtures::housing_sample();
        let anchors = identity_anchors(&["house", "home", "workplace"]);
        let samples = BTreeMap::new();
        let vetoes = BTreeSet::new();
        let accepts = BTreeSet::new();
        let ctx = ResolveContext { graph: Some(&graph), anchors: &anchors, samples: &samples, vetoes: &vetoes, accepts: &accepts };
        let cfg = ResolveConfig { tolerance: 1.5, max_hops: 2, max_edit: 1 };
        let input = cluster_of(&["house", "home", "workplace"]);
        let report =
            resolve_family(std::slice::from_ref(&input), &ctx, &cfg, Exec::Sequential).unwrap();
        assert_eq!(report.clusters.len(), 1);
        assert_eq!(report.clusters[0].members, input.members);
        assert_eq!(report.splits, 0);
    }

    #[test]
    fn value_type_mismatch_forces_split_and_queues() {
        let anchors = BTreeMap::from([
            ("count".to_string(), None),
            ("cpunt".to_string(), None),
        ]);
        let samples = BTreeMap::from([
            ("count".to_string(), vec!["1".to_string(), "2".to_string()]),
            ("cpunt".to_string(), vec!["abc".to_string()]),
        ]);
        let vetoes = BTreeSet::new();
        let accepts = BTreeSet::new();
        let ctx = ResolveContext { graph: None, anchors: &anchors, samples: &samples, vetoes: &vetoes, accepts: &accepts };
        let cfg = ResolveConfig { tolerance: 1.5, max_hops: 3, max_edit: 1 };
        let report =
            resolve_family(&[cluster_of(&["count", "cpunt"])], &ctx, &cfg, Exec::Sequential)
                .unwrap();
        assert_eq!(report.clusters.len(), 2);
        assert_eq!(report.queued.len(), 1);
        assert_eq!(report.queued[0].verdict, ReviewVerdict::Pending);
        assert_eq!(report.queued[0].literal_distance, Some(1));
    }

    #[test]
    fn veto_keeps_pair_apart() {
        let anchors = BTreeMap::from([
            ("works".to_string(), None),
            ("words".to_string(), None),
        ]);
        let samples = BTreeMap::new();
        let vetoes = BTreeSet::from([pair_key("works", "words")]);
        let accepts = BTreeSet::new();
        let ctx = ResolveContext { graph: None, anchors: &anchors, samples: &samples, vetoes: &vetoes, accepts: &accepts };
        let cfg = ResolveConfig { tolerance: 1.5, max_hops: 3, max_edit: 1 };
        let report =
            resolve_family(&[cluster_of(&["works", "words"])], &ctx, &cfg, Exec::Sequential)
                .unwrap();
        for c in &report.clusters {
            assert!(
                !(c.members.contains("works") && c.members.contains("words")),
                "vetoed pair co-occurs"
            );
        }
    }

    #[test]
    fn value_verify_affix_and_type_rules() {
        // Shared "$" prefix passes the affix rule.
        let money_a = vec!["$12".to_string(), "$9".to_string()];
        let money_b = vec!["$40".to_string()];
        let v = value_verify(&money_a, &money_b);
        assert!(v.pass);
        assert_eq!(v.rule, RuleFired::Affix);

        // Integers vs text fails the type rule.
        let ints = vec!["1".to_string(), "2".to_string()];
        let text = vec!["abc".to_string()];
        let v = value_verify(&ints, &text);
        assert!(!v.pass);
        assert_eq!(v.rule, RuleFired::Type);

        // An empty side is inapplicable and passes.
        let v = value_verify(&[], &text);
        assert!(v.pass);
        assert_eq!(v.rule, RuleFired::Inapplicable);

        // Conflicting dominant prefixes fail the affix rule.
        let dollars = vec!["$1".to_string(), "$2".to_string()];
        let euros = vec!["€1".to_string(), "€2".to_string()];
        let v = value_verify(&dollars, &euros);
        assert!(!v.pass);
        assert_eq!(v.rule, RuleFired::Affix);
    }

    #[test]
    fn type_inference_samples() {
        assert_eq!(infer_type("42"), ValueType::Integer);
        assert_eq!(infer_type("-7"), ValueType::Integer);
        assert_eq!(infer_type("3.14"), ValueType::Decimal);
        assert_eq!(infer_type("2011-07-10"), ValueType::Date);
        assert_eq!(infer_type("Jul-10"), ValueType::Date);
        assert_eq!(infer_type("a,b,c"), ValueType::List);
        assert_eq!(infer_type("plain words"), ValueType::Text);
    }

    #[test]
    fn review_roundtrip_and_unknown_ids() {
        let items = vec![ReviewItem {
            id: review_id("a", "b"),
            left: "a".to_string(),
            right: "b".to_string(),
            literal_distance: Some(1),
            semantic_distance: None,
            left_values: vec![],
            right_values: vec![],
            verdict: ReviewVerdict::Pending,
        }];
        let doc = review_export(&items).unwrap();
        assert_eq!(doc.lines().count(), 1);
        let parsed: ReviewItem = serde_json::from_str(doc.lines().next().unwrap()).unwrap();
        assert_eq!(parsed, items[0]);
        // Decisions parse, including ids no exporter produced.
        let decisions =
            parse_decisions("{\"id\":\"rvdeadbeef00000000\",\"verdict\":\"reject\"}\n").unwrap();
        assert_eq!(decisions, vec![("rvdeadbeef00000000".to_string(), ReviewVerdict::Reject)]);
        assert!(parse_decisions("not json\n").is_err());
    }

    #[test]
    fn empty_queue_exports_empty_document() {
        assert_eq!(review_export(&[]).unwrap(), "");
    }

    #[test]
    fn review_id_is_order_independent() {
        assert_eq!(review_id("a", "b"), review_id("b", "a"));
        assert_ne!(review_id("a", "b"), review_id("a", "c"));
    }

    /// Randomized post-condition check: diameter, coverage, and
    /// bridging-only duplication against a quadratic oracle.
    #[test]
    fn randomized_clusters_satisfy_postconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for round in 0..10 {
            let n_nodes = 60;
            let mut g = crate::kb::KnowledgeGraph::new();
            for i in 0..n_nodes {
                let a = rng.random_range(0..n_nodes);
                g.link(&format!("n{i}"), &format!("n{a}"));
            }
            let cfg = ResolveConfig { tolerance: 1.5, max_hops: 2, max_edit: 1 };
            let size = rng.random_range(3..10);
            let mut anchors = BTreeMap::new();
            let mut members = Vec::new();
            for i in 0..size {
                let attr = format!("attr{i}");
                anchors
                    .insert(attr.clone(), Some(format!("n{}", rng.random_range(0..n_nodes))));
                members.push(attr);
            }
            let member_refs: Vec<&str> = members.iter().map(String::as_str).collect();
            let samples = BTreeMap::new();
            let vetoes = BTreeSet::new();
            let accepts = BTreeSet::new();
            let ctx = ResolveContext { graph: Some(&g), anchors: &anchors, samples: &samples, vetoes: &vetoes, accepts: &accepts };
            let report =
                resolve_family(&[cluster_of(&member_refs)], &ctx, &cfg, Exec::default())
                    .unwrap();

            let diameter = cfg.semantic_diameter();
            let dist = |a: &str, b: &str| -> Option<u32> {
                let ca = anchors[a].as_ref().unwrap();
                let cb = anchors[b].as_ref().unwrap();
                g.bfs_ball(ca, diameter).get(cb.as_str()).copied()
            };
            // Coverage.
            let mut covered: BTreeSet<&str> = BTreeSet::new();
            for c in &report.clusters {
                for m in &c.members {
                    covered.insert(m.as_str());
                }
            }
            assert_eq!(covered.len(), size, "round {round}: coverage lost");
            // Diameter.
            for c in &report.clusters {
                let ms: Vec<&String> = c.members.iter().collect();
                for i in 0..ms.len() {
                    for j in i + 1..ms.len() {
                        let d = dist(ms[i], ms[j]);
                        assert!(
                            d.is_some_and(|d| f64::from(d) <= cfg.tolerance * 2.0),
                            "round {round}: pair {}/{} too far",
                            ms[i],
                            ms[j]
                        );
                    }
                }
            }
            // Bridging-only duplication: a member in k > 1 clusters is within
            // the diameter of every member of each cluster it appears in
            // (already implied by the diameter check), and clusters are
            // pairwise distinct.
            let sets: BTreeSet<&BTreeSet<String>> =
                report.clusters.iter().map(|c| &c.members).collect();
            assert_eq!(sets.len(), report.clusters.len(), "round {round}: duplicate parts");
        }
    }
}
