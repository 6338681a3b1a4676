//! Cluster sets and their registry.
//!
//! A cluster set pairs integrated attribute members with a frontier of
//! knowledge-base concepts annotated with the minimal distance from any
//! member. The registry owns every live cluster and maps each attribute to
//! the single cluster containing it; joins retire merged inputs and register
//! the merged output.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

pub type ClusterId = u64;

/// Attribute members plus a concept frontier with minimal distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSet {
    pub id: ClusterId,
    pub members: BTreeSet<String>,
    /// Concept -> minimal distance from any member. Each concept appears
    /// once; distances never exceed the hop threshold the frontier was
    /// materialized under.
    pub frontier: BTreeMap<String, u32>,
}

impl ClusterSet {
    /// Folds frontier entries in, keeping the minimum distance per concept.
    pub fn absorb_frontier<I: IntoIterator<Item = (String, u32)>>(&mut self, entries: I) {
        for (concept, d) in entries {
            self.frontier
                .entry(concept)
                .and_modify(|cur| *cur = (*cur).min(d))
                .or_insert(d);
        }
    }
}

/// Outcome of joining two clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    Merged(ClusterId),
    /// Both ids named the same live cluster; nothing changed.
    SelfJoin(ClusterId),
}

/// Owner of all live clusters.
#[derive(Debug, Clone, Default)]
pub struct ClusterRegistry {
    clusters: BTreeMap<ClusterId, ClusterSet>,
    owner: HashMap<String, ClusterId>,
    next_id: ClusterId,
}

impl ClusterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a fresh singleton cluster. Errors if the attribute is
    /// already owned.
    pub fn insert_singleton(
        &mut self,
        attribute: impl Into<String>,
        frontier: BTreeMap<String, u32>,
    ) -> Result<ClusterId> {
        let attribute = attribute.into();
        if self.owner.contains_key(&attribute) {
            return Err(Error::parameter(format!(
                "attribute {attribute:?} is already registered"
            )));
        }
        let id = self.next_id;
        self.next_id += 1;
        self.owner.insert(attribute.clone(), id);
        self.clusters.insert(
            id,
            ClusterSet { id, members: BTreeSet::from([attribute]), frontier },
        );
        Ok(id)
    }

    /// The cluster that owns `attribute`.
    pub fn locate(&self, attribute: &str) -> Result<&ClusterSet> {
        let id = self
            .owner
            .get(attribute)
            .ok_or_else(|| Error::NotFound(format!("attribute {attribute:?}")))?;
        Ok(&self.clusters[id])
    }

    pub fn locate_id(&self, attribute: &str) -> Option<ClusterId> {
        self.owner.get(attribute).copied()
    }

    pub fn contains_attribute(&self, attribute: &str) -> bool {
        self.owner.contains_key(attribute)
    }

    pub fn get(&self, id: ClusterId) -> Option<&ClusterSet> {
        self.clusters.get(&id)
    }

    pub fn get_mut(&mut self, id: ClusterId) -> Option<&mut ClusterSet> {
        self.clusters.get_mut(&id)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClusterSet> {
        self.clusters.values()
    }

    pub fn ids(&self) -> Vec<ClusterId> {
        self.clusters.keys().copied().collect()
    }

    pub fn attribute_count(&self) -> usize {
        self.owner.len()
    }

    /// Joins two clusters: members are unioned, frontiers are unioned with
    /// the minimum distance kept per concept, the inputs are retired and the
    /// merged cluster is registered. Joining a cluster with itself is a
    /// flagged no-op.
    pub fn pair_join(&mut self, a: ClusterId, b: ClusterId) -> Result<MergeOutcome> {
        if a == b {
            if !self.clusters.contains_key(&a) {
                return Err(Error::NotFound(format!("cluster {a}")));
            }
            return Ok(MergeOutcome::SelfJoin(a));
        }
        if !self.clusters.contains_key(&a) || !self.clusters.contains_key(&b) {
            return Err(Error::NotFound(format!("cluster {a} or {b}")));
        }
        // Drain the smaller side into the larger.
        let (into, from) = {
            let la = self.clusters[&a].members.len();
            let lb = self.clusters[&b].members.len();
            if la >= lb { (a, b) } else { (b, a) }
        };
        let absorbed = self.clusters.remove(&from).unwrap();
        let target = self.clusters.get_mut(&into).unwrap();
        for m in &absorbed.members {
            target.members.insert(m.clone());
        }
        target.absorb_frontier(absorbed.frontier);
        for m in absorbed.members {
            self.owner.insert(m, into);
        }
        Ok(MergeOutcome::Merged(into))
    }
}

/// Applies a batch of merge pairs, following ids through retirements.
/// Returns the number of actual merges performed.
pub fn apply_merges(
    reg: &mut ClusterRegistry,
    pairs: impl IntoIterator<Item = (ClusterId, ClusterId)>,
) -> Result<usize> {
    let mut forward: HashMap<ClusterId, ClusterId> = HashMap::new();
    let resolve = |forward: &HashMap<ClusterId, ClusterId>, mut id: ClusterId| {
        while let Some(&next) = forward.get(&id) {
            id = next;
        }
        id
    };
    let mut merges = 0;
    for (left, right) in pairs {
        let a = resolve(&forward, left);
        let b = resolve(&forward, right);
        if a == b {
            continue;
        }
        match reg.pair_join(a, b)? {
            MergeOutcome::Merged(into) => {
                let retired = if into == a { b } else { a };
                forward.insert(retired, into);
                merges += 1;
            }
            MergeOutcome::SelfJoin(_) => {}
        }
    }
    Ok(merges)
}
