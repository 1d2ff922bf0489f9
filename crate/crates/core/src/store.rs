//! Graph bundle persistence (gzip-compressed JSON) and graph-database export.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use crate::ceg::CoreGraph;
use crate::ingestion::{AnnotationTable, EntityRecord};
use crate::layout::LayoutTree;
use crate::thg::{HierarchyMode, TopicAssignment, TopicHierarchy, ROOT_ID};
use crate::tog::{EdgeKind, OccupancyGraph};
use crate::topography::{ColorScale, ContourSet, ElevationGrid, TopographyParams};
use crate::ConceptId;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bundle format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt bundle: {0}")]
    CorruptBundle(String),
}

/// Parameters the bundle was built with, after defaults were applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub mode: HierarchyMode,
    pub threshold: u32,
    #[serde(default)]
    pub pyramid: Vec<usize>,
    pub padding_ratio: f64,
    pub entity_radius: f64,
    pub seed: u64,
    pub topography: TopographyParams,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            mode: HierarchyMode::Manual,
            threshold: crate::ceg::DEFAULT_THRESHOLD,
            pyramid: Vec::new(),
            padding_ratio: crate::layout::DEFAULT_PADDING,
            entity_radius: crate::layout::DEFAULT_ENTITY_RADIUS,
            seed: crate::layout::DEFAULT_ENCLOSE_SEED,
            topography: TopographyParams::default(),
        }
    }
}

/// Everything the server needs, in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphBundle {
    pub format_version: u32,
    pub params: BuildParams,
    pub records: Vec<EntityRecord>,
    #[serde(default)]
    pub concept_names: BTreeMap<ConceptId, String>,
    pub annotations: AnnotationTable,
    pub ceg: CoreGraph,
    pub thg: TopicHierarchy,
    pub assignment: TopicAssignment,
    pub tog: OccupancyGraph,
    pub layout: LayoutTree,
    pub elevation: ElevationGrid,
    pub contours: ContourSet,
    pub color_scale: ColorScale,
}

impl Default for GraphBundle {
    fn default() -> Self {
        GraphBundle {
            format_version: FORMAT_VERSION,
            params: BuildParams::default(),
            records: Vec::new(),
            concept_names: BTreeMap::new(),
            annotations: AnnotationTable::default(),
            ceg: CoreGraph::default(),
            thg: TopicHierarchy::default(),
            assignment: TopicAssignment::default(),
            tog: OccupancyGraph::default(),
            layout: LayoutTree::default(),
            elevation: ElevationGrid::default(),
            contours: ContourSet::default(),
            color_scale: ColorScale::default(),
        }
    }
}

impl GraphBundle {
    /// Cross-reference problems, empty when the bundle is consistent.
    pub fn dangling_references(&self) -> Vec<String> {
        let mut out = Vec::new();
        let entities: HashSet<&str> = self.ceg.nodes.iter().map(String::as_str).collect();
        for r in &self.records {
            if !entities.contains(r.id.as_str()) {
                out.push(format!("record {} is not a graph node", r.id));
            }
        }
        for e in &self.ceg.edges {
            for end in [&e.a, &e.b] {
                if !entities.contains(end.as_str()) {
                    out.push(format!("similarity edge endpoint {end} is not a graph node"));
                }
            }
        }
        for (id, node) in &self.thg.nodes {
            if let Some(p) = &node.parent {
                if !self.thg.nodes.contains_key(p) {
                    out.push(format!("topic {id} has unknown parent {p}"));
                }
            } else if id != ROOT_ID {
                out.push(format!("topic {id} has no parent"));
            }
            for c in &node.children {
                if !self.thg.nodes.contains_key(c) {
                    out.push(format!("topic {id} has unknown child {c}"));
                }
            }
        }
        for (entity, topics) in &self.assignment.provenance {
            if !entities.contains(entity.as_str()) {
                out.push(format!("assignment for unknown entity {entity}"));
            }
            for t in topics.keys() {
                if !self.thg.nodes.contains_key(t) {
                    out.push(format!("entity {entity} assigned to unknown topic {t}"));
                }
            }
        }
        for (level, occ) in &self.tog.levels {
            let ids: HashSet<&str> = occ.instances.iter().map(|i| i.instance_id.as_str()).collect();
            for inst in &occ.instances {
                if !entities.contains(inst.entity_id.as_str()) {
                    out.push(format!("instance {} refers to unknown entity", inst.instance_id));
                }
                if !self.thg.nodes.contains_key(&inst.topic_id) {
                    out.push(format!("instance {} refers to unknown topic", inst.instance_id));
                }
                if !self.layout.per_instance.contains_key(&inst.instance_id) {
                    out.push(format!("instance {} has no layout circle", inst.instance_id));
                }
            }
            for e in &occ.edges {
                for end in [&e.a, &e.b] {
                    if !ids.contains(end.as_str()) {
                        out.push(format!("level {level} edge endpoint {end} is not an instance"));
                    }
                }
            }
        }
        for id in self.thg.nodes.keys() {
            if !self.layout.per_topic.contains_key(id) {
                out.push(format!("topic {id} has no layout circle"));
            }
        }
        if self.contours.iso_levels.len() != self.contours.polylines.len() {
            out.push("contour levels and polyline lists differ in length".to_string());
        }
        if self.elevation.values.len() != self.elevation.width * self.elevation.height {
            out.push("elevation grid size does not match its dimensions".to_string());
        }
        out
    }
}

/// JSON with fixed gzip header fields, so equal bundles give equal bytes.
pub fn encode_bundle(bundle: &GraphBundle) -> Result<Vec<u8>, StoreError> {
    let json = serde_json::to_vec(bundle).map_err(|e| StoreError::CorruptBundle(e.to_string()))?;
    let mut enc: GzEncoder<Vec<u8>> = GzBuilder::new().mtime(0).write(Vec::new(), Compression::default());
    enc.write_all(&json)?;
    Ok(enc.finish()?)
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
}

pub fn decode_bundle(bytes: &[u8]) -> Result<GraphBundle, StoreError> {
    let mut json = Vec::new();
    GzDecoder::new(bytes)
        .read_to_end(&mut json)
        .map_err(|e| StoreError::CorruptBundle(format!("gzip: {e}")))?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| StoreError::CorruptBundle(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(StoreError::VersionMismatch {
            found: header.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let bundle: GraphBundle = serde_json::from_slice(&json).map_err(|e| StoreError::CorruptBundle(e.to_string()))?;
    if let Some(problem) = bundle.dangling_references().into_iter().next() {
        return Err(StoreError::CorruptBundle(problem));
    }
    Ok(bundle)
}

pub fn save_bundle(bundle: &GraphBundle, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let bytes = encode_bundle(bundle)?;
    let path = path.as_ref();
    let tmp = path.with_extension("kcb.tmp");
    let mut f = File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    drop(f);
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<GraphBundle, StoreError> {
    let bytes = std::fs::read(path)?;
    decode_bundle(&bytes)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn rel_name(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::WithinTopic => "WITHIN_TOPIC",
        EdgeKind::BetweenTopic => "BETWEEN_TOPIC",
        EdgeKind::Matching => "MATCHES",
    }
}

/// Number of node and relationship statements [`graphdb_script`] emits.
pub fn graphdb_counts(bundle: &GraphBundle) -> (usize, usize) {
    let nodes = bundle.ceg.nodes.len() + bundle.thg.len() + bundle.tog.instance_count();
    let annotated: usize = bundle.assignment.provenance.values().map(BTreeMap::len).sum();
    let edges = bundle.ceg.edges.len() + bundle.thg.edge_count() + annotated + bundle.tog.edge_count();
    (nodes, edges)
}

/// Cypher import script: `//` header lines, then one `MERGE` statement per
/// node followed by one per relationship.
pub fn graphdb_script(bundle: &GraphBundle) -> String {
    let (n_nodes, n_edges) = graphdb_counts(bundle);
    let mut s = String::new();
    let _ = writeln!(s, "// knowmap graph export, format {}", bundle.format_version);
    let _ = writeln!(s, "// nodes: {n_nodes}, relationships: {n_edges}");

    let titles: BTreeMap<&str, &EntityRecord> = bundle.records.iter().map(|r| (r.id.as_str(), r)).collect();
    for id in &bundle.ceg.nodes {
        match titles.get(id.as_str()) {
            Some(r) => {
                let _ = writeln!(
                    s,
                    "MERGE (n:Entity {{id: {}}}) SET n.title = {}, n.year = {};",
                    quote(id),
                    quote(&r.title),
                    r.year
                );
            }
            None => {
                let _ = writeln!(s, "MERGE (n:Entity {{id: {}}});", quote(id));
            }
        }
    }
    for t in bundle.thg.nodes.values() {
        let _ = writeln!(
            s,
            "MERGE (n:Topic {{id: {}}}) SET n.label = {}, n.level = {};",
            quote(&t.id),
            quote(&t.label),
            t.level
        );
    }
    for (level, occ) in &bundle.tog.levels {
        for i in &occ.instances {
            let _ = writeln!(
                s,
                "MERGE (n:Instance {{id: {}, level: {level}}}) SET n.entityId = {}, n.topicId = {}, n.kind = {}, n.tag = {};",
                quote(&i.instance_id),
                quote(&i.entity_id),
                quote(&i.topic_id),
                quote(kind_name(i.kind)),
                quote(tag_name(i.tag))
            );
        }
    }

    for e in &bundle.ceg.edges {
        let _ = writeln!(
            s,
            "MATCH (a:Entity {{id: {}}}), (b:Entity {{id: {}}}) MERGE (a)-[r:SIMILAR_TO]->(b) SET r.weight = {}, r.synthetic = {};",
            quote(&e.a),
            quote(&e.b),
            e.weight,
            e.synthetic
        );
    }
    for t in bundle.thg.nodes.values() {
        if let Some(p) = &t.parent {
            let _ = writeln!(
                s,
                "MATCH (c:Topic {{id: {}}}), (p:Topic {{id: {}}}) MERGE (c)-[:SUBTOPIC_OF]->(p);",
                quote(&t.id),
                quote(p)
            );
        }
    }
    for (entity, topics) in &bundle.assignment.provenance {
        for (topic, prov) in topics {
            let _ = writeln!(
                s,
                "MATCH (e:Entity {{id: {}}}), (t:Topic {{id: {}}}) MERGE (e)-[r:ANNOTATED_TO]->(t) SET r.provenance = {};",
                quote(entity),
                quote(topic),
                quote(tag_name(*prov))
            );
        }
    }
    for (level, occ) in &bundle.tog.levels {
        for e in &occ.edges {
            let _ = writeln!(
                s,
                "MATCH (a:Instance {{id: {}, level: {level}}}), (b:Instance {{id: {}, level: {level}}}) MERGE (a)-[r:{}]->(b) SET r.weight = {};",
                quote(&e.a),
                quote(&e.b),
                rel_name(e.kind),
                e.weight
            );
        }
    }
    s
}

fn kind_name(kind: crate::tog::InstanceKind) -> &'static str {
    match kind {
        crate::tog::InstanceKind::Original => "original",
        crate::tog::InstanceKind::Clone => "clone",
    }
}

fn tag_name(tag: crate::thg::Provenance) -> &'static str {
    match tag {
        crate::thg::Provenance::Direct => "direct",
        crate::thg::Provenance::Induced => "induced",
    }
}

pub fn export_graphdb_script(bundle: &GraphBundle, path: impl AsRef<Path>) -> Result<(), StoreError> {
    std::fs::write(path, graphdb_script(bundle))?;
    Ok(())
}
