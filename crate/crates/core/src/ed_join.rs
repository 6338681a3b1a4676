//! Literal similarity join over cluster families.
//!
//! Two clusters join when (1) some member pair is within the edit budget,
//! (2) a member of one side is within `budget - d` of a frontier concept the
//! other side holds at distance `d`, or (3) the mirror of (2). Candidates
//! come from q-gram count filtering over inverted indexes of the member and
//! frontier name sets; every candidate is verified with true edit distance
//! before any merge, so the join is exact. Probing runs in parallel; merges
//! are serialized through the registry.

use std::collections::HashMap;

use crate::cluster::{ClusterId, ClusterRegistry};
use crate::error::Result;
use crate::exec::{self, Exec};
use crate::gram_index::{InvertedIndex, ProbeResult};
use crate::text::edit_distance;

#[derive(Debug, Clone, Copy)]
pub struct EdJoinConfig {
    /// Maximum tolerated edit distance between member strings.
    pub max_edit: u32,
    /// Gram length for the candidate indexes.
    pub gram_len: usize,
}

impl Default for EdJoinConfig {
    fn default() -> Self {
        EdJoinConfig { max_edit: 1, gram_len: 2 }
    }
}

/// Which join constraint produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintForm {
    MemberMember,
    /// member of the probe side vs frontier concept of the target side
    MemberFrontier,
    /// frontier concept of the probe side vs member of the target side
    FrontierMember,
}

/// A verified join candidate between two clusters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MatchCandidate {
    pub left: String,
    pub right: String,
    pub probe_cluster: ClusterId,
    pub target_cluster: ClusterId,
    pub form: ConstraintForm,
    /// Case-folded edit distance between `left` and `right`.
    pub distance: u32,
    /// Edit budget the pair had to meet (`max_edit`, or `max_edit - d` for
    /// frontier forms).
    pub budget: u32,
}

#[derive(Debug, Default)]
pub struct EdJoinReport {
    /// Verified candidates, including ones whose clusters were already equal
    /// by the time they applied.
    pub evidence: Vec<MatchCandidate>,
    pub merges: usize,
}

/// One side of the index pair: member strings and frontier concept names of
/// a cluster family.
struct FamilyIndex {
    members: Vec<(String, ClusterId)>,
    member_index: InvertedIndex,
    /// Frontier concepts with distance within the edit budget, by name.
    frontier: HashMap<String, Vec<(ClusterId, u32)>>,
    frontier_index: InvertedIndex,
}

impl FamilyIndex {
    fn build(reg: &ClusterRegistry, family: &[ClusterId], cfg: &EdJoinConfig) -> Result<Self> {
        let mut members = Vec::new();
        let mut frontier: HashMap<String, Vec<(ClusterId, u32)>> = HashMap::new();
        for &id in family {
            let Some(cluster) = reg.get(id) else { continue };
            for m in &cluster.members {
                members.push((m.clone(), id));
            }
            for (concept, &d) in &cluster.frontier {
                // Entries farther than the whole budget can never join.
                if d <= cfg.max_edit {
                    frontier.entry(concept.clone()).or_default().push((id, d));
                }
            }
        }
        members.sort();
        let member_index =
            InvertedIndex::build(members.iter().map(|(m, _)| m.clone()), cfg.gram_len)?;
        let mut frontier_names: Vec<String> = frontier.keys().cloned().collect();
        frontier_names.sort();
        let frontier_index = InvertedIndex::build(frontier_names, cfg.gram_len)?;
        Ok(FamilyIndex { members, member_index, frontier, frontier_index })
    }
}

/// Candidate pairs a probe string generates against one family side.
fn probe_side(
    probe: &str,
    probe_cluster: ClusterId,
    side: &FamilyIndex,
    cfg: &EdJoinConfig,
    out: &mut Vec<MatchCandidate>,
) {
    // Members: budget is the full edit threshold.
    let ids: Vec<u32> = match side.member_index.probe(probe, cfg.max_edit) {
        ProbeResult::Counted(counted) => counted.into_iter().map(|(id, _)| id).collect(),
        ProbeResult::NeedsVerification(ids) => ids,
    };
    for id in ids {
        let (attr, cluster) = &side.members[id as usize];
        if *cluster == probe_cluster {
            continue;
        }
        let d = edit_distance(&probe.to_lowercase(), &attr.to_lowercase());
        if d <= cfg.max_edit {
            out.push(MatchCandidate {
                left: probe.to_string(),
                right: attr.clone(),
                probe_cluster,
                target_cluster: *cluster,
                form: ConstraintForm::MemberMember,
                distance: d,
                budget: cfg.max_edit,
            });
        }
    }
    // Frontier concepts: each entry carries its own remaining budget.
    let ids: Vec<u32> = match side.frontier_index.probe(probe, cfg.max_edit) {
        ProbeResult::Counted(counted) => counted.into_iter().map(|(id, _)| id).collect(),
        ProbeResult::NeedsVerification(ids) => ids,
    };
    for id in ids {
        let concept = side.frontier_index.name(id);
        let d = edit_distance(&probe.to_lowercase(), &concept.to_lowercase());
        for &(cluster, frontier_d) in &side.frontier[concept] {
            if cluster == probe_cluster {
                continue;
            }
            let budget = cfg.max_edit - frontier_d;
            if d <= budget {
                out.push(MatchCandidate {
                    left: probe.to_string(),
                    right: concept.to_string(),
                    probe_cluster,
                    target_cluster: cluster,
                    form: ConstraintForm::MemberFrontier,
                    distance: d,
                    budget,
                });
            }
        }
    }
}

/// Generates every verified candidate between the two families without
/// touching the registry.
pub fn find_matches(
    reg: &ClusterRegistry,
    probes: &[ClusterId],
    targets: &[ClusterId],
    cfg: &EdJoinConfig,
    exec: Exec,
) -> Result<Vec<MatchCandidate>> {
    let target_side = FamilyIndex::build(reg, targets, cfg)?;
    let probe_members: Vec<(String, ClusterId)> = {
        let mut v = Vec::new();
        for &id in probes {
            if let Some(c) = reg.get(id) {
                for m in &c.members {
                    v.push((m.clone(), id));
                }
            }
        }
        v.sort();
        v
    };
    let mut candidates: Vec<MatchCandidate> =
        exec::map_collect(exec, &probe_members, |(probe, cluster)| {
            let mut out = Vec::new();
            probe_side(probe, *cluster, &target_side, cfg, &mut out);
            out
        })
        .into_iter()
        .flatten()
        .collect();

    // Mirror constraint: probe-side frontier concepts vs target members.
    // On a self-join the pass above already covered it.
    let self_join = probes == targets;
    if !self_join {
        let probe_side_index = FamilyIndex::build(reg, probes, cfg)?;
        if !probe_side_index.frontier.is_empty() {
            let mirrored = exec::map_collect(exec, &target_side.members, |(attr, cluster)| {
                let mut out = Vec::new();
                let ids: Vec<u32> =
                    match probe_side_index.frontier_index.probe(attr, cfg.max_edit) {
                        ProbeResult::Counted(counted) => {
                            counted.into_iter().map(|(id, _)| id).collect()
                        }
                        ProbeResult::NeedsVerification(ids) => ids,
                    };
                for id in ids {
                    let concept = probe_side_index.frontier_index.name(id);
                    let d = edit_distance(&attr.to_lowercase(), &concept.to_lowercase());
                    for &(probe_cluster, frontier_d) in &probe_side_index.frontier[concept] {
                        if probe_cluster == *cluster {
                            continue;
                        }
                        let budget = cfg.max_edit - frontier_d;
                        if d <= budget {
                            out.push(MatchCandidate {
                                left: concept.to_string(),
                                right: attr.clone(),
                                probe_cluster,
                                target_cluster: *cluster,
                                form: ConstraintForm::FrontierMember,
                                distance: d,
                                budget,
                            });
                        }
                    }
                }
                out
            });
            candidates.extend(mirrored.into_iter().flatten());
        }
    }
    candidates.sort();
    candidates.dedup();
    Ok(candidates)
}

/// Applies verified candidates through the registry, following merges as
/// cluster ids retire. Returns the number of actual merges.
pub fn apply_matches(reg: &mut ClusterRegistry, candidates: &[MatchCandidate]) -> Result<usize> {
    crate::cluster::apply_merges(
        reg,
        candidates.iter().map(|c| (c.probe_cluster, c.target_cluster)),
    )
}

/// Full literal join: find candidates, verify, merge. An empty probe or
/// target family leaves the registry unchanged.
pub fn ed_join(
    reg: &mut ClusterRegistry,
    probes: &[ClusterId],
    targets: &[ClusterId],
    cfg: &EdJoinConfig,
    exec: Exec,
) -> Result<EdJoinReport> {
    let evidence = find_matches(reg, probes, targets, cfg, exec)?;
    let merges = apply_matches(reg, &evidence)?;
    Ok(EdJoinReport { evidence, merges })
}

/// Literal self-join over every live cluster.
pub fn self_join(
    reg: &mut ClusterRegistry,
    cfg: &EdJoinConfig,
    exec: Exec,
) -> Result<EdJoinReport> {
    let ids = reg.ids();
    ed_join(reg, &ids, &ids, cfg, exec)
}
