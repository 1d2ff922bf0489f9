//! Topic Occupancy Graph: per-level entity instances (one original plus a
//! clone for every further topic), matching stars, and similarity edges
//! expanded across all instance pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ceg::{CoreGraph, SimilarityEdge};
use crate::ingestion::EntityRecord;
use crate::thg::{HierarchyMode, Provenance, TopicAssignment, TopicHierarchy};
use crate::{ConceptId, EntityId, TopicId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TogError {
    #[error("entity {entity:?} has no topic at level {level}")]
    MissingLevel { entity: EntityId, level: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Original,
    Clone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceNode {
    pub instance_id: String,
    pub entity_id: EntityId,
    pub topic_id: TopicId,
    pub level: u32,
    pub kind: InstanceKind,
    pub tag: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    WithinTopic,
    BetweenTopic,
    Matching,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceEdge {
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
    pub weight: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyLevel {
    /// Sorted by instance id.
    pub instances: Vec<InstanceNode>,
    /// Sorted by `(a, b)`.
    pub edges: Vec<InstanceEdge>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyGraph {
    pub levels: BTreeMap<u32, OccupancyLevel>,
}

impl OccupancyGraph {
    pub fn level(&self, level: u32) -> Option<&OccupancyLevel> {
        self.levels.get(&level)
    }

    pub fn instance_count(&self) -> usize {
        self.levels.values().map(|l| l.instances.len()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.levels.values().map(|l| l.edges.len()).sum()
    }

    pub fn instances_of<'a>(&'a self, entity: &'a str) -> impl Iterator<Item = &'a InstanceNode> + 'a {
        self.levels
            .values()
            .flat_map(|l| l.instances.iter())
            .filter(move |i| i.entity_id == entity)
    }

    /// Contract each entity's instances at `level` to one node and drop
    /// matching edges; returns the undirected entity pairs that remain.
    pub fn projected_edges(&self, level: u32) -> BTreeSet<(EntityId, EntityId)> {
        let Some(lvl) = self.levels.get(&level) else {
            return BTreeSet::new();
        };
        let owner: HashMap<&str, &str> = lvl
            .instances
            .iter()
            .map(|i| (i.instance_id.as_str(), i.entity_id.as_str()))
            .collect();
        lvl.edges
            .iter()
            .filter(|e| e.kind != EdgeKind::Matching)
            .map(|e| {
                let (x, y) = (owner[e.a.as_str()], owner[e.b.as_str()]);
                if x <= y {
                    (x.to_string(), y.to_string())
                } else {
                    (y.to_string(), x.to_string())
                }
            })
            .collect()
    }
}

pub fn instance_id(entity: &str, topic: &str) -> String {
    format!("{entity}::{topic}")
}

/// What the spawner needs to know about one entity.
#[derive(Debug, Clone, Copy)]
pub struct EntityProfile<'a> {
    pub id: &'a str,
    /// Direct folder paths in record order (manual hierarchies).
    pub folders: &'a [String],
    pub concepts: &'a BTreeSet<ConceptId>,
}

impl<'a> EntityProfile<'a> {
    pub fn from_record(record: &'a EntityRecord) -> Self {
        EntityProfile {
            id: &record.id,
            folders: &record.folder_paths,
            concepts: &record.concepts,
        }
    }
}

/// Spawning context: the hierarchy, its assignment and cached aggregate
/// topic signatures.
pub struct Spawner<'a> {
    thg: &'a TopicHierarchy,
    assignment: &'a TopicAssignment,
    signatures: HashMap<&'a str, BTreeSet<ConceptId>>,
}

impl<'a> Spawner<'a> {
    pub fn new(thg: &'a TopicHierarchy, assignment: &'a TopicAssignment) -> Self {
        let signatures = match thg.mode {
            HierarchyMode::Data => thg
                .nodes
                .keys()
                .map(|id| (id.as_str(), thg.aggregate_signature(id)))
                .collect(),
            HierarchyMode::Manual => HashMap::new(),
        };
        Spawner {
            thg,
            assignment,
            signatures,
        }
    }

    fn primary_topic<'t>(&self, profile: &EntityProfile<'_>, level: u32, topics: &'t BTreeSet<TopicId>) -> &'t TopicId {
        let first = topics.iter().next().expect("non-empty topic set");
        match self.thg.mode {
            HierarchyMode::Manual => profile
                .folders
                .iter()
                .filter_map(|p| {
                    let candidate = match self.thg.ancestor_at_level(p, level) {
                        Some(node) => node.id.as_str(),
                        None => p.as_str(),
                    };
                    topics.get(candidate)
                })
                .next()
                .unwrap_or(first),
            HierarchyMode::Data => {
                let mut best = first;
                let mut best_score = 0;
                for t in topics {
                    let score = self
                        .signatures
                        .get(t.as_str())
                        .map(|sig| sig.intersection(profile.concepts).count())
                        .unwrap_or(0);
                    if score > best_score {
                        best = t;
                        best_score = score;
                    }
                }
                best
            }
        }
    }

    /// Instances of one entity at one level.
    pub fn spawn_level(&self, profile: &EntityProfile<'_>, level: u32) -> Result<Vec<InstanceNode>, TogError> {
        let topics = self.assignment.occupancy(profile.id, level, self.thg);
        if topics.is_empty() {
            return Err(TogError::MissingLevel {
                entity: profile.id.to_string(),
                level,
            });
        }
        let primary = self.primary_topic(profile, level, &topics).clone();
        Ok(topics
            .iter()
            .map(|t| InstanceNode {
                instance_id: instance_id(profile.id, t),
                entity_id: profile.id.to_string(),
                topic_id: t.clone(),
                level,
                kind: if *t == primary {
                    InstanceKind::Original
                } else {
                    InstanceKind::Clone
                },
                tag: self.assignment.tag(profile.id, t).unwrap_or(Provenance::Direct),
            })
            .collect())
    }

    /// Instances of one entity at every level of the hierarchy.
    pub fn spawn_instances(&self, profile: &EntityProfile<'_>) -> Result<Vec<InstanceNode>, TogError> {
        let mut out = Vec::new();
        for level in 1..=self.thg.max_depth {
            out.extend(self.spawn_level(profile, level)?);
        }
        Ok(out)
    }
}

pub fn spawn_instances(
    profile: &EntityProfile<'_>,
    thg: &TopicHierarchy,
    assignment: &TopicAssignment,
) -> Result<Vec<InstanceNode>, TogError> {
    Spawner::new(thg, assignment).spawn_instances(profile)
}

/// Star from the original to every clone. Input shares entity and level.
pub fn matching_edges(instances: &[InstanceNode]) -> Vec<InstanceEdge> {
    let Some(original) = instances.iter().find(|i| i.kind == InstanceKind::Original) else {
        return Vec::new();
    };
    instances
        .iter()
        .filter(|i| i.kind == InstanceKind::Clone)
        .map(|c| InstanceEdge {
            a: original.instance_id.clone(),
            b: c.instance_id.clone(),
            kind: EdgeKind::Matching,
            weight: 0,
        })
        .collect()
}

/// Full bipartite expansion of one similarity edge.
pub fn expand_edges(edge: &SimilarityEdge, of_a: &[InstanceNode], of_b: &[InstanceNode]) -> Vec<InstanceEdge> {
    let mut out = Vec::with_capacity(of_a.len() * of_b.len());
    for x in of_a {
        for y in of_b {
            out.push(InstanceEdge {
                a: x.instance_id.clone(),
                b: y.instance_id.clone(),
                kind: if x.topic_id == y.topic_id {
                    EdgeKind::WithinTopic
                } else {
                    EdgeKind::BetweenTopic
                },
                weight: edge.weight,
            });
        }
    }
    out
}

pub fn build_tog(
    ceg: &CoreGraph,
    thg: &TopicHierarchy,
    assignment: &TopicAssignment,
    records: &[EntityRecord],
) -> Result<OccupancyGraph, TogError> {
    let spawner = Spawner::new(thg, assignment);
    let by_id: HashMap<&str, &EntityRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let empty_concepts = BTreeSet::new();
    let profiles: Vec<EntityProfile<'_>> = ceg
        .nodes
        .iter()
        .map(|id| match by_id.get(id.as_str()) {
            Some(r) => EntityProfile::from_record(r),
            None => EntityProfile {
                id,
                folders: &[],
                concepts: &empty_concepts,
            },
        })
        .collect();

    let levels: Vec<(u32, OccupancyLevel)> = (1..=thg.max_depth)
        .into_par_iter()
        .map(|level| {
            let mut per_entity: BTreeMap<&str, Vec<InstanceNode>> = BTreeMap::new();
            let mut edges = Vec::new();
            for p in &profiles {
                let instances = spawner.spawn_level(p, level)?;
                edges.extend(matching_edges(&instances));
                per_entity.insert(p.id, instances);
            }
            for e in &ceg.edges {
                edges.extend(expand_edges(e, &per_entity[e.a.as_str()], &per_entity[e.b.as_str()]));
            }
            edges.sort();
            let mut instances: Vec<InstanceNode> = per_entity.into_values().flatten().collect();
            instances.sort_by(|x, y| x.instance_id.cmp(&y.instance_id));
            Ok((level, OccupancyLevel { instances, edges }))
        })
        .collect::<Result<_, TogError>>()?;
    Ok(OccupancyGraph {
        levels: levels.into_iter().collect(),
    })
}
