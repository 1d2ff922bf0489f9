//! Core Entity Graph: one node per entity, edges weighted by the number of
//! shared concepts, sparsified by a threshold and repaired to a single
//! connected component.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingestion::{AnnotationTable, EntityRecord};
use crate::{ConceptId, EntityId};

pub const DEFAULT_THRESHOLD: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CegError {
    #[error("annotation table is empty")]
    EmptyCorpus,
    #[error("similarity threshold must be at least 1, got {0}")]
    InvalidThreshold(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimilarityEdge {
    pub a: EntityId,
    pub b: EntityId,
    pub weight: u32,
    #[serde(default)]
    pub synthetic: bool,
}

impl SimilarityEdge {
    /// Orders the endpoints so that `a < b`.
    pub fn new(x: &str, y: &str, weight: u32, synthetic: bool) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        SimilarityEdge {
            a: a.to_string(),
            b: b.to_string(),
            weight,
            synthetic,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreGraph {
    pub nodes: BTreeSet<EntityId>,
    /// Sorted by `(a, b)`.
    pub edges: Vec<SimilarityEdge>,
    pub threshold: u32,
}

impl CoreGraph {
    pub fn synthetic_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.synthetic).count()
    }

    pub fn neighbours(&self) -> BTreeMap<&str, Vec<&SimilarityEdge>> {
        let mut adj: BTreeMap<&str, Vec<&SimilarityEdge>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for e in &self.edges {
            adj.entry(&e.a).or_default().push(e);
            adj.entry(&e.b).or_default().push(e);
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<EntityId>> {
        let ids: Vec<&EntityId> = self.nodes.iter().collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut uf = UnionFind::new(ids.len());
        for e in &self.edges {
            uf.union(index[e.a.as_str()], index[e.b.as_str()]);
        }
        let mut groups: BTreeMap<usize, Vec<EntityId>> = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            groups.entry(uf.find(i)).or_default().push((*id).clone());
        }
        let mut comps: Vec<Vec<EntityId>> = groups.into_values().collect();
        comps.sort();
        comps
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }
}

/// |a ∩ b| via a merge walk over the sorted sets.
pub fn shared_concepts(a: &BTreeSet<ConceptId>, b: &BTreeSet<ConceptId>) -> u32 {
    let (mut ia, mut ib) = (a.iter(), b.iter());
    let (mut x, mut y) = (ia.next(), ib.next());
    let mut n = 0;
    while let (Some(p), Some(q)) = (x, y) {
        match p.cmp(q) {
            std::cmp::Ordering::Less => x = ia.next(),
            std::cmp::Ordering::Greater => y = ib.next(),
            std::cmp::Ordering::Equal => {
                n += 1;
                x = ia.next();
                y = ib.next();
            }
        }
    }
    n
}

/// Every pair with a positive shared-concept count, as `(i, j, w)` with `i < j`
/// indices into the sorted entity list. Uses a concept → entity inverted index.
fn positive_pair_weights(sets: &[(&EntityId, BTreeSet<ConceptId>)]) -> Vec<(usize, usize, u32)> {
    let mut postings: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (_, concepts)) in sets.iter().enumerate() {
        for c in concepts {
            postings.entry(c.as_str()).or_default().push(i);
        }
    }
    (0..sets.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for c in &sets[i].1 {
                for &j in &postings[c.as_str()] {
                    if j > i {
                        *counts.entry(j).or_insert(0) += 1;
                    }
                }
            }
            counts.into_iter().map(move |(j, w)| (i, j, w))
        })
        .collect()
}

fn sorted_sets(eat: &AnnotationTable) -> Vec<(&EntityId, BTreeSet<ConceptId>)> {
    eat.rows
        .iter()
        .map(|(id, row)| (id, row.keys().cloned().collect()))
        .collect()
}

pub fn build_ceg(eat: &AnnotationTable, threshold: u32) -> Result<CoreGraph, CegError> {
    if threshold < 1 {
        return Err(CegError::InvalidThreshold(threshold));
    }
    if eat.is_empty() {
        return Err(CegError::EmptyCorpus);
    }
    let sets = sorted_sets(eat);
    let mut edges: Vec<SimilarityEdge> = positive_pair_weights(&sets)
        .into_iter()
        .filter(|&(_, _, w)| w >= threshold)
        .map(|(i, j, w)| SimilarityEdge::new(sets[i].0, sets[j].0, w, false))
        .collect();
    edges.sort();
    Ok(CoreGraph {
        nodes: eat.rows.keys().cloned().collect(),
        edges,
        threshold,
    })
}

/// Number of leading path segments two folder paths share.
fn common_prefix_len(a: &str, b: &str) -> usize {
    a.split('/').zip(b.split('/')).take_while(|(x, y)| x == y).count()
}

fn folder_affinity(a: &[String], b: &[String]) -> usize {
    a.iter()
        .flat_map(|p| b.iter().map(move |q| common_prefix_len(p, q)))
        .max()
        .unwrap_or(0)
}

/// Join all components into one.
///
/// First a maximum spanning forest over sub-threshold cross-component pairs
/// (weight ≥ 1). Components still isolated share no concept with anything
/// else; each is attached by a weight-0 edge to the outside entity with the
/// longest common folder prefix (ties: smallest id). Added edges are synthetic.
pub fn ensure_connected(graph: CoreGraph, eat: &AnnotationTable, records: &[EntityRecord]) -> CoreGraph {
    let mut graph = graph;
    if graph.nodes.len() <= 1 || graph.component_count() == 1 {
        return graph;
    }
    let ids: Vec<EntityId> = graph.nodes.iter().cloned().collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for e in &graph.edges {
        uf.union(index[e.a.as_str()], index[e.b.as_str()]);
    }

    let sets: Vec<(&EntityId, BTreeSet<ConceptId>)> =
        ids.iter().map(|id| (id, eat.concept_set(id))).collect();
    let mut candidates: Vec<(usize, usize, u32)> = positive_pair_weights(&sets)
        .into_iter()
        .filter(|&(i, j, _)| uf.find(i) != uf.find(j))
        .collect();
    // Heaviest first; ties by endpoint ids (indices follow id order).
    candidates.sort_by(|x, y| y.2.cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut added = Vec::new();
    for (i, j, w) in candidates {
        if uf.union(i, j) {
            added.push(SimilarityEdge::new(&ids[i], &ids[j], w, true));
        }
    }

    let folders: HashMap<&str, &[String]> = records
        .iter()
        .map(|r| (r.id.as_str(), r.folder_paths.as_slice()))
        .collect();
    let folders_of = |i: usize| folders.get(ids[i].as_str()).copied().unwrap_or(&[]);
    loop {
        let mut roots: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..ids.len() {
            roots.entry(uf.find(i)).or_default().push(i);
        }
        if roots.len() <= 1 {
            break;
        }
        // Attach the component that does not hold the smallest id, in order
        // of their smallest member.
        let mut comps: Vec<Vec<usize>> = roots.into_values().collect();
        comps.sort();
        let comp = &comps[1];
        let root = uf.find(comp[0]);
        let mut best: Option<(usize, usize, usize)> = None;
        for &x in comp {
            for y in 0..ids.len() {
                if uf.find(y) == root {
                    continue;
                }
                let aff = folder_affinity(folders_of(x), folders_of(y));
                let better = match best {
                    None => true,
                    Some((ba, by, bx)) => aff > ba || (aff == ba && (y, x) < (by, bx)),
                };
                if better {
                    best = Some((aff, y, x));
                }
            }
        }
        let (_, y, x) = best.expect("another component exists");
        uf.union(x, y);
        added.push(SimilarityEdge::new(&ids[x], &ids[y], 0, true));
    }

    graph.edges.extend(added);
    graph.edges.sort();
    graph
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two distinct sets were merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}
