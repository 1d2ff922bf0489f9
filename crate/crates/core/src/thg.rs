//! Topic Hierarchy Graph.
//!
//! Two builders share one tree type: [`build_mthg`] mirrors a curated folder
//! tree, [`build_dthg`] discovers a level pyramid of concept clusters and
//! stitches the levels together by entity-set similarity. Either way entity
//! annotations are propagated to every ancestor with [`backpropagate`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingestion::FolderTree;
use crate::{ConceptId, EntityId, TopicId};

/// Id of the synthetic root topic. Normalised folder paths never start with
/// `/`, so this cannot collide with a folder.
pub const ROOT_ID: &str = "/";

/// Topic counts per level, top level first.
pub const DEFAULT_PYRAMID: [usize; 5] = [10, 25, 60, 120, 200];

/// Minimum concept overlap for a non-argmax topic assignment.
pub const MIN_ASSIGNMENT_OVERLAP: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ThgError {
    #[error("unknown topic {0:?}")]
    UnknownTopic(TopicId),
    #[error("document-concept matrix is empty")]
    EmptyMatrix,
    #[error("invalid topic pyramid {0:?}: counts must be positive and strictly increase from top to bottom")]
    InvalidPyramid(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchyMode {
    #[default]
    Manual,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicNode {
    pub id: TopicId,
    pub label: String,
    pub level: u32,
    pub parent: Option<TopicId>,
    pub children: Vec<TopicId>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub concept_signature: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicHierarchy {
    pub mode: HierarchyMode,
    pub nodes: BTreeMap<TopicId, TopicNode>,
    pub max_depth: u32,
}

impl TopicHierarchy {
    fn with_root(mode: HierarchyMode) -> Self {
        let mut nodes = BTreeMap::new();
        nodes.insert(
            ROOT_ID.to_string(),
            TopicNode {
                id: ROOT_ID.to_string(),
                label: "root".to_string(),
                level: 0,
                parent: None,
                children: Vec::new(),
                concept_signature: BTreeSet::new(),
            },
        );
        TopicHierarchy {
            mode,
            nodes,
            max_depth: 0,
        }
    }

    pub fn get(&self, id: &str) -> Option<&TopicNode> {
        self.nodes.get(id)
    }

    pub fn root(&self) -> Option<&TopicNode> {
        self.nodes.get(ROOT_ID)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn level_of(&self, id: &str) -> Option<u32> {
        self.nodes.get(id).map(|n| n.level)
    }

    pub fn at_level(&self, level: u32) -> impl Iterator<Item = &TopicNode> {
        self.nodes.values().filter(move |n| n.level == level)
    }

    /// Proper ancestors below the root, nearest first.
    pub fn ancestors(&self, id: &str) -> Vec<&TopicNode> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(id).and_then(|n| n.parent.as_deref());
        while let Some(p) = cur {
            let node = &self.nodes[p];
            if node.level == 0 {
                break;
            }
            out.push(node);
            cur = node.parent.as_deref();
        }
        out
    }

    /// The ancestor-or-self of `id` at `level`, if `id` is that deep.
    pub fn ancestor_at_level(&self, id: &str, level: u32) -> Option<&TopicNode> {
        let mut node = self.nodes.get(id)?;
        if node.level < level {
            return None;
        }
        while node.level > level {
            node = &self.nodes[node.parent.as_deref()?];
        }
        Some(node)
    }

    pub fn is_proper_ancestor(&self, ancestor: &str, id: &str) -> bool {
        let mut cur = self.nodes.get(id).and_then(|n| n.parent.as_deref());
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.nodes.get(p).and_then(|n| n.parent.as_deref());
        }
        false
    }

    /// Number of parent → child edges.
    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.children.len()).sum()
    }

    /// Pre-order walk from the root.
    pub fn preorder(&self) -> Vec<&TopicNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<&str> = self.root().map(|r| vec![r.id.as_str()]).unwrap_or_default();
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            out.push(node);
            stack.extend(node.children.iter().rev().map(String::as_str));
        }
        out
    }

    /// Union of a topic's own signature and all of its descendants'.
    pub fn aggregate_signature(&self, id: &str) -> BTreeSet<ConceptId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(t) = stack.pop() {
            if let Some(node) = self.nodes.get(t) {
                out.extend(node.concept_signature.iter().cloned());
                stack.extend(node.children.iter().map(String::as_str));
            }
        }
        out
    }
}

pub fn build_mthg(tree: &FolderTree) -> TopicHierarchy {
    let mut thg = TopicHierarchy::with_root(HierarchyMode::Manual);
    for (path, folder) in &tree.nodes {
        let level = path.split('/').count() as u32;
        thg.max_depth = thg.max_depth.max(level);
        thg.nodes.insert(
            path.clone(),
            TopicNode {
                id: path.clone(),
                label: folder.label.clone(),
                level,
                parent: Some(folder.parent.clone().unwrap_or_else(|| ROOT_ID.to_string())),
                children: folder.children.iter().cloned().collect(),
                concept_signature: BTreeSet::new(),
            },
        );
    }
    let top: Vec<TopicId> = tree.top_level().map(str::to_string).collect();
    thg.nodes.get_mut(ROOT_ID).expect("root").children = top;
    thg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Direct,
    Induced,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicAssignment {
    /// level → entity → topics at that level.
    pub by_level: BTreeMap<u32, BTreeMap<EntityId, BTreeSet<TopicId>>>,
    /// entity → topic → how the entity got there.
    pub provenance: BTreeMap<EntityId, BTreeMap<TopicId, Provenance>>,
}

impl TopicAssignment {
    pub fn topics_at(&self, entity: &str, level: u32) -> Option<&BTreeSet<TopicId>> {
        self.by_level.get(&level).and_then(|m| m.get(entity))
    }

    pub fn direct_topics(&self, entity: &str) -> BTreeSet<&str> {
        self.provenance
            .get(entity)
            .map(|m| {
                m.iter()
                    .filter(|(_, p)| **p == Provenance::Direct)
                    .map(|(t, _)| t.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn tag(&self, entity: &str, topic: &str) -> Option<Provenance> {
        self.provenance.get(entity).and_then(|m| m.get(topic)).copied()
    }

    /// Topics an entity occupies when the map is viewed at `level`.
    ///
    /// Its level-`level` topics, plus every direct topic shallower than
    /// `level` that has no direct descendant (the entity stays in that topic
    /// as the view deepens).
    pub fn occupancy(&self, entity: &str, level: u32, thg: &TopicHierarchy) -> BTreeSet<TopicId> {
        let mut out: BTreeSet<TopicId> = self.topics_at(entity, level).cloned().unwrap_or_default();
        let direct = self.direct_topics(entity);
        for &p in &direct {
            let Some(pl) = thg.level_of(p) else { continue };
            if pl == 0 || pl >= level {
                continue;
            }
            if !direct.iter().any(|q| thg.is_proper_ancestor(p, q)) {
                out.insert(p.to_string());
            }
        }
        out
    }

    pub fn entities(&self) -> BTreeSet<&str> {
        self.provenance.keys().map(String::as_str).collect()
    }
}

/// Annotate each entity to every ancestor of each direct topic.
pub fn backpropagate(
    direct: &BTreeMap<EntityId, BTreeSet<TopicId>>,
    thg: &TopicHierarchy,
) -> Result<TopicAssignment, ThgError> {
    let mut out = TopicAssignment::default();
    for (entity, topics) in direct {
        for topic in topics {
            let node = thg.get(topic).ok_or_else(|| ThgError::UnknownTopic(topic.clone()))?;
            if node.level == 0 {
                continue;
            }
            let prov = out.provenance.entry(entity.clone()).or_default();
            prov.insert(topic.clone(), Provenance::Direct);
            out.by_level
                .entry(node.level)
                .or_default()
                .entry(entity.clone())
                .or_default()
                .insert(topic.clone());
            for anc in thg.ancestors(topic) {
                prov.entry(anc.id.clone()).or_insert(Provenance::Induced);
                out.by_level
                    .entry(anc.level)
                    .or_default()
                    .entry(entity.clone())
                    .or_default()
                    .insert(anc.id.clone());
            }
        }
    }
    Ok(out)
}

/// Binary entity × concept matrix.
#[derive(Debug, Clone, Default)]
pub struct ConceptMatrix {
    pub entities: Vec<EntityId>,
    pub concepts: Vec<ConceptId>,
    /// Display name per concept column.
    pub labels: Vec<String>,
    /// Sorted concept column indices per entity row.
    pub rows: Vec<Vec<usize>>,
}

impl ConceptMatrix {
    pub fn from_sets(
        sets: &BTreeMap<EntityId, BTreeSet<ConceptId>>,
        names: &BTreeMap<ConceptId, String>,
    ) -> Self {
        let concepts: Vec<ConceptId> = sets
            .values()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let col: BTreeMap<&str, usize> = concepts.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let rows = sets
            .values()
            .map(|s| s.iter().map(|c| col[c.as_str()]).collect())
            .collect();
        let labels = concepts
            .iter()
            .map(|c| names.get(c).cloned().unwrap_or_else(|| c.clone()))
            .collect();
        ConceptMatrix {
            entities: sets.keys().cloned().collect(),
            concepts,
            labels,
            rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() || self.concepts.is_empty()
    }

    fn document_frequency(&self) -> Vec<u32> {
        let mut df = vec![0u32; self.concepts.len()];
        for row in &self.rows {
            for &c in row {
                df[c] += 1;
            }
        }
        df
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveredTopic {
    pub id: TopicId,
    pub label: String,
    pub signature: BTreeSet<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discovery {
    pub topics: Vec<DiscoveredTopic>,
    pub assignments: BTreeMap<EntityId, BTreeSet<TopicId>>,
}

/// Normalised pointwise mutual information from raw counts over `n` documents.
pub fn npmi(co: u32, df_x: u32, df_y: u32, n: u32) -> f64 {
    if co == 0 || df_x == 0 || df_y == 0 {
        return -1.0;
    }
    let n = n as f64;
    let pxy = co as f64 / n;
    if co as f64 >= n {
        return 1.0;
    }
    let px = df_x as f64 / n;
    let py = df_y as f64 / n;
    (pxy / (px * py)).ln() / -pxy.ln()
}

/// Average-linkage agglomeration of concept columns under NPMI. Returns
/// clusters of column indices, each sorted, ordered by smallest member.
pub fn cluster_concepts(matrix: &ConceptMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = matrix.concepts.len();
    let docs = matrix.entities.len() as u32;
    let df = matrix.document_frequency();
    let mut co = vec![0u32; n * n];
    for row in &matrix.rows {
        for (i, &a) in row.iter().enumerate() {
            for &b in &row[i + 1..] {
                co[a * n + b] += 1;
                co[b * n + a] += 1;
            }
        }
    }
    // sums[a*n+b]: sum of pairwise NPMI between members of clusters a and b.
    let mut sums: Vec<f64> = (0..n * n)
        .map(|ix| {
            let (a, b) = (ix / n, ix % n);
            if a == b {
                0.0
            } else {
                npmi(co[ix], df[a], df[b], docs)
            }
        })
        .collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let k = k.max(1);
    while active.len() > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let avg = sums[a * n + b] / (members[a].len() * members[b].len()) as f64;
                if best.is_none_or(|(s, _, _)| avg > s) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two active clusters");
        for &c in &active {
            if c != a && c != b {
                let merged = sums[a * n + c] + sums[b * n + c];
                sums[a * n + c] = merged;
                sums[c * n + a] = merged;
            }
        }
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        members[a].sort_unstable();
        active.retain(|&c| c != b);
    }
    active.into_iter().map(|a| members[a].clone()).collect()
}

/// Cluster concepts into at most `k` topics and assign entities to them.
pub fn discover_topics(matrix: &ConceptMatrix, k: usize) -> Result<Discovery, ThgError> {
    if matrix.is_empty() {
        return Err(ThgError::EmptyMatrix);
    }
    let df = matrix.document_frequency();
    let clusters = cluster_concepts(matrix, k);
    let width = 4.max(clusters.len().to_string().len());
    let topics: Vec<DiscoveredTopic> = clusters
        .iter()
        .enumerate()
        .map(|(i, cols)| {
            let mut ranked = cols.clone();
            ranked.sort_by(|&x, &y| df[y].cmp(&df[x]).then(matrix.concepts[x].cmp(&matrix.concepts[y])));
            let label = ranked
                .iter()
                .take(3)
                .map(|&c| matrix.labels[c].as_str())
                .collect::<Vec<_>>()
                .join(", ");
            DiscoveredTopic {
                id: format!("T{i:0width$}"),
                label,
                signature: cols.iter().map(|&c| matrix.concepts[c].clone()).collect(),
            }
        })
        .collect();

    let mut cluster_of = vec![0usize; matrix.concepts.len()];
    for (t, cols) in clusters.iter().enumerate() {
        for &c in cols {
            cluster_of[c] = t;
        }
    }
    let assignments = matrix
        .entities
        .iter()
        .zip(&matrix.rows)
        .map(|(entity, row)| {
            let mut scores = vec![0usize; topics.len()];
            for &c in row {
                scores[cluster_of[c]] += 1;
            }
            // Topic ids sort in index order, so the first maximum is the smallest id.
            let best = (0..scores.len())
                .fold(0, |b, t| if scores[t] > scores[b] { t } else { b });
            let set: BTreeSet<TopicId> = (0..scores.len())
                .filter(|&t| t == best || scores[t] >= MIN_ASSIGNMENT_OVERLAP)
                .map(|t| topics[t].id.clone())
                .collect();
            (entity.clone(), set)
        })
        .collect();
    Ok(Discovery { topics, assignments })
}

/// Jaccard as an exact fraction `(intersection, union)`.
fn jaccard(a: &BTreeSet<EntityId>, b: &BTreeSet<EntityId>) -> (u64, u64) {
    let inter = a.intersection(b).count() as u64;
    (inter, a.len() as u64 + b.len() as u64 - inter)
}

fn cmp_fraction((n1, d1): (u64, u64), (n2, d2): (u64, u64)) -> Ordering {
    // 0/0 counts as 0.
    let (n1, d1) = if d1 == 0 { (0, 1) } else { (n1, d1) };
    let (n2, d2) = if d2 == 0 { (0, 1) } else { (n2, d2) };
    (n1 * d2).cmp(&(n2 * d1))
}

/// Link every lower-level topic to the upper-level topic whose entity set is
/// most similar (Jaccard); ties go to the smaller upper id.
pub fn link_levels(
    lower: &BTreeMap<TopicId, BTreeSet<EntityId>>,
    upper: &BTreeMap<TopicId, BTreeSet<EntityId>>,
) -> BTreeMap<TopicId, TopicId> {
    let mut out = BTreeMap::new();
    for (low, low_set) in lower {
        let mut best: Option<(&TopicId, (u64, u64))> = None;
        for (up, up_set) in upper {
            let score = jaccard(low_set, up_set);
            if best.is_none_or(|(_, s)| cmp_fraction(score, s) == Ordering::Greater) {
                best = Some((up, score));
            }
        }
        if let Some((up, _)) = best {
            out.insert(low.clone(), up.clone());
        }
    }
    out
}

pub fn validate_pyramid(pyramid: &[usize]) -> Result<(), ThgError> {
    let ok = !pyramid.is_empty()
        && pyramid.iter().all(|&k| k >= 1)
        && pyramid.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(ThgError::InvalidPyramid(pyramid.to_vec()))
    }
}

/// Data-driven hierarchy. `pyramid` lists topic counts from the top level down.
pub fn build_dthg(matrix: &ConceptMatrix, pyramid: &[usize]) -> Result<(TopicHierarchy, TopicAssignment), ThgError> {
    validate_pyramid(pyramid)?;
    if matrix.is_empty() {
        return Err(ThgError::EmptyMatrix);
    }
    let levels: Vec<Discovery> = pyramid
        .par_iter()
        .map(|&k| discover_topics(matrix, k))
        .collect::<Result<_, _>>()?;

    let mut thg = TopicHierarchy::with_root(HierarchyMode::Data);
    thg.max_depth = levels.len() as u32;
    let qualify = |level: usize, id: &str| format!("L{level}.{id}");
    let mut members: Vec<BTreeMap<TopicId, BTreeSet<EntityId>>> = Vec::new();
    let mut direct: BTreeMap<EntityId, BTreeSet<TopicId>> = BTreeMap::new();
    for (i, disc) in levels.iter().enumerate() {
        let level = i + 1;
        let mut sets: BTreeMap<TopicId, BTreeSet<EntityId>> = BTreeMap::new();
        for t in &disc.topics {
            let id = qualify(level, &t.id);
            sets.insert(id.clone(), BTreeSet::new());
            thg.nodes.insert(
                id.clone(),
                TopicNode {
                    id,
                    label: t.label.clone(),
                    level: level as u32,
                    parent: None,
                    children: Vec::new(),
                    concept_signature: t.signature.clone(),
                },
            );
        }
        for (entity, topics) in &disc.assignments {
            for t in topics {
                let id = qualify(level, t);
                sets.get_mut(&id).expect("assigned topic exists").insert(entity.clone());
                direct.entry(entity.clone()).or_default().insert(id);
            }
        }
        members.push(sets);
    }

    let mut parent_of: BTreeMap<TopicId, TopicId> = members[0]
        .keys()
        .map(|t| (t.clone(), ROOT_ID.to_string()))
        .collect();
    for l in (1..members.len()).rev() {
        parent_of.extend(link_levels(&members[l], &members[l - 1]));
    }
    for (child, parent) in parent_of {
        thg.nodes.get_mut(&child).expect("child").parent = Some(parent.clone());
        thg.nodes.get_mut(&parent).expect("parent").children.push(child);
    }
    for node in thg.nodes.values_mut() {
        node.children.sort();
    }
    let assignment = backpropagate(&direct, &thg)?;
    Ok((thg, assignment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{parse_folder_tree, EntityRecord};

    fn tree(paths: &[&str]) -> FolderTree {
        let mut r = EntityRecord::new("x");
        r.folder_paths = paths.iter().map(|s| s.to_string()).collect();
        parse_folder_tree(&[r])
    }

    fn direct(rows: &[(&str, &[&str])]) -> BTreeMap<EntityId, BTreeSet<TopicId>> {
        rows.iter()
            .map(|(e, ts)| (e.to_string(), ts.iter().map(|t| t.to_string()).collect()))
            .collect()
    }

    fn ids(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mthg_levels() {
        let thg = build_mthg(&tree(&["A/B", "A/C"]));
        assert_eq!(thg.len(), 4);
        assert_eq!(thg.level_of(ROOT_ID), Some(0));
        assert_eq!(thg.level_of("A"), Some(1));
        assert_eq!(thg.level_of("A/B"), Some(2));
        assert_eq!(thg.level_of("A/C"), Some(2));
        assert_eq!(thg.max_depth, 2);
        assert_eq!(thg.edge_count(), 3);
    }

    #[test]
    fn mthg_single_and_empty() {
        assert_eq!(build_mthg(&tree(&["A"])).len(), 2);
        let empty = build_mthg(&FolderTree::default());
        assert_eq!(empty.len(), 1);
        assert_eq!(empty.max_depth, 0);
    }

    #[test]
    fn backprop_path_to_root() {
        let thg = build_mthg(&tree(&["A/B/C"]));
        let asg = backpropagate(&direct(&[("e", &["A/B/C"])]), &thg).unwrap();
        assert_eq!(asg.topics_at("e", 1), Some(&ids(&["A"])));
        assert_eq!(asg.topics_at("e", 2), Some(&ids(&["A/B"])));
        assert_eq!(asg.topics_at("e", 3), Some(&ids(&["A/B/C"])));
        assert_eq!(asg.tag("e", "A"), Some(Provenance::Induced));
        assert_eq!(asg.tag("e", "A/B"), Some(Provenance::Induced));
        assert_eq!(asg.tag("e", "A/B/C"), Some(Provenance::Direct));
    }

    #[test]
    fn backprop_level_one_only() {
        let thg = build_mthg(&tree(&["A/B"]));
        let asg = backpropagate(&direct(&[("e", &["A"])]), &thg).unwrap();
        assert_eq!(asg.by_level.len(), 1);
        assert_eq!(asg.topics_at("e", 1), Some(&ids(&["A"])));
        assert_eq!(asg.tag("e", "A"), Some(Provenance::Direct));
    }

    #[test]
    fn backprop_deduplicates_shared_ancestors() {
        let thg = build_mthg(&tree(&["A/B", "A/C"]));
        let asg = backpropagate(&direct(&[("e", &["A/B", "A/C"])]), &thg).unwrap();
        assert_eq!(asg.topics_at("e", 2), Some(&ids(&["A/B", "A/C"])));
        assert_eq!(asg.topics_at("e", 1), Some(&ids(&["A"])));
    }

    #[test]
    fn backprop_direct_ancestor_keeps_tag() {
        let thg = build_mthg(&tree(&["A/B"]));
        for order in [["A", "A/B"], ["A/B", "A"]] {
            let asg = backpropagate(&direct(&[("e", &order)]), &thg).unwrap();
            assert_eq!(asg.tag("e", "A"), Some(Provenance::Direct));
        }
    }

    #[test]
    fn backprop_unknown_topic() {
        let thg = build_mthg(&tree(&["A"]));
        assert_eq!(
            backpropagate(&direct(&[("e", &["Z"])]), &thg),
            Err(ThgError::UnknownTopic("Z".into()))
        );
    }

    #[test]
    fn occupancy_carries_shallow_topics_down() {
        let thg = build_mthg(&tree(&["A/B/C", "D"]));
        let asg = backpropagate(&direct(&[("e", &["A/B/C", "D"]), ("f", &["A", "A/B"])]), &thg).unwrap();
        assert_eq!(asg.occupancy("e", 1, &thg), ids(&["A", "D"]));
        assert_eq!(asg.occupancy("e", 3, &thg), ids(&["A/B/C", "D"]));
        // A is subsumed by the direct A/B below it.
        assert_eq!(asg.occupancy("f", 3, &thg), ids(&["A/B"]));
        assert_eq!(asg.occupancy("f", 1, &thg), ids(&["A"]));
    }

    #[test]
    fn npmi_bounds() {
        assert_eq!(npmi(0, 3, 3, 10), -1.0);
        assert_eq!(npmi(10, 10, 10, 10), 1.0);
        // Perfectly co-occurring but not universal: NPMI = 1.
        assert!((npmi(4, 4, 4, 10) - 1.0).abs() < 1e-12);
        // Independent columns: NPMI = 0.
        assert!(npmi(1, 2, 5, 10).abs() < 1e-12);
    }

    fn matrix(rows: &[&[&str]]) -> ConceptMatrix {
        let sets: BTreeMap<EntityId, BTreeSet<ConceptId>> = rows
            .iter()
            .enumerate()
            .map(|(i, cs)| (format!("e{i}"), cs.iter().map(|c| c.to_string()).collect()))
            .collect();
        ConceptMatrix::from_sets(&sets, &BTreeMap::new())
    }

    #[test]
    fn k_equals_concepts_gives_singletons() {
        let m = matrix(&[&["a", "b"], &["b", "c"], &["c"]]);
        let d = discover_topics(&m, 3).unwrap();
        assert_eq!(d.topics.len(), 3);
        assert!(d.topics.iter().all(|t| t.signature.len() == 1));
    }

    #[test]
    fn k_one_gives_single_topic() {
        let m = matrix(&[&["a", "b"], &["c"], &["d", "e"]]);
        let d = discover_topics(&m, 1).unwrap();
        assert_eq!(d.topics.len(), 1);
        assert_eq!(d.topics[0].signature.len(), 5);
        assert!(d.assignments.values().all(|s| s.len() == 1));
    }

    #[test]
    fn empty_matrix_rejected() {
        assert_eq!(discover_topics(&ConceptMatrix::default(), 2), Err(ThgError::EmptyMatrix));
    }

    #[test]
    fn entity_without_concepts_gets_argmax_fallback() {
        let m = matrix(&[&["a", "b"], &[], &["c", "d"]]);
        let d = discover_topics(&m, 2).unwrap();
        assert_eq!(d.assignments["e1"].len(), 1);
        assert!(d.assignments["e1"].contains(&d.topics[0].id));
    }

    #[test]
    fn labels_rank_by_document_frequency() {
        let m = matrix(&[&["a", "b", "c", "d"], &["b", "c", "d"], &["c", "d"], &["d"]]);
        let d = discover_topics(&m, 1).unwrap();
        assert_eq!(d.topics[0].label, "d, c, b");
    }

    fn sets(rows: &[(&str, &[&str])]) -> BTreeMap<TopicId, BTreeSet<EntityId>> {
        direct(rows)
    }

    #[test]
    fn link_unique_maximum() {
        let lower = sets(&[("l", &["e1", "e2"])]);
        let upper = sets(&[("u1", &["e1", "e2", "e3"]), ("u2", &["e4"])]);
        assert_eq!(link_levels(&lower, &upper)["l"], "u1");
    }

    #[test]
    fn link_identity() {
        let lower = sets(&[("l", &["e1", "e2"])]);
        let upper = sets(&[("u0", &["e1"]), ("u1", &["e1", "e2"])]);
        assert_eq!(link_levels(&lower, &upper)["l"], "u1");
    }

    #[test]
    fn link_tie_goes_to_smaller_upper() {
        // {A,B,C,D} vs {A,B} and {C,D}: Jaccard 2/4 each.
        let lower = sets(&[("l", &["A", "B", "C", "D"])]);
        let upper = sets(&[("U2", &["C", "D"]), ("U1", &["A", "B"])]);
        assert_eq!(link_levels(&lower, &upper)["l"], "U1");
    }

    #[test]
    fn pyramid_validation() {
        assert!(validate_pyramid(&[1]).is_ok());
        assert!(validate_pyramid(&DEFAULT_PYRAMID).is_ok());
        assert_eq!(validate_pyramid(&[4, 2]), Err(ThgError::InvalidPyramid(vec![4, 2])));
        assert!(validate_pyramid(&[]).is_err());
        assert!(validate_pyramid(&[0, 2]).is_err());
        assert!(validate_pyramid(&[2, 2]).is_err());
    }

    #[test]
    fn dthg_single_level() {
        let m = matrix(&[&["a", "b"], &["c"], &["d", "e"]]);
        let (thg, asg) = build_dthg(&m, &[1]).unwrap();
        assert_eq!(thg.len(), 2);
        assert_eq!(thg.max_depth, 1);
        let only = thg.at_level(1).next().unwrap().id.clone();
        for e in &m.entities {
            assert_eq!(asg.topics_at(e, 1), Some(&ids(&[only.as_str()])));
        }
    }

    #[test]
    fn dthg_rejects_increasing_pyramid() {
        let m = matrix(&[&["a"]]);
        assert!(matches!(build_dthg(&m, &[4, 2]), Err(ThgError::InvalidPyramid(_))));
    }
}
