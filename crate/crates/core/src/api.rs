//! HTTP read API over an immutable, precomputed snapshot of a bundle.
//!
//! Map payloads for every depth are serialised and gzipped once when the
//! snapshot is built; requests only pick bytes. A snapshot can be swapped
//! atomically while requests are in flight.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use flate2::{Compression, GzBuilder};
use rayon::prelude::*;
use serde::Serialize;

use crate::ingestion::{normalise_text, EntityRecord};
use crate::layout::Circle;
use crate::store::{load_bundle, GraphBundle, StoreError};
use crate::thg::{Provenance, ROOT_ID};
use crate::tog::{EdgeKind, InstanceKind};
use crate::topography::{colorize, ColorScale, Polyline};
use crate::{ConceptId, EntityId, TopicId};

pub const DEFAULT_SEARCH_LIMIT: usize = 20;
pub const MAX_SEARCH_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("no map is loaded yet")]
    Unavailable,
    #[error("depth must be an integer in 1..={max}, got {got:?}")]
    InvalidDepth { got: String, max: u32 },
    #[error("query is empty")]
    EmptyQuery,
    #[error("limit must be an integer in 1..={MAX_SEARCH_LIMIT}, got {0:?}")]
    InvalidLimit(String),
    #[error("no entity with id {0:?}")]
    NotFound(String),
    #[error("export needs at least one entity id")]
    EmptyList,
    #[error("request body must be a JSON array of entity ids: {0}")]
    InvalidBody(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unavailable => "SnapshotNotReady",
            ApiError::InvalidDepth { .. } => "InvalidDepth",
            ApiError::EmptyQuery => "EmptyQuery",
            ApiError::InvalidLimit(_) => "InvalidLimit",
            ApiError::NotFound(_) => "UnknownEntity",
            ApiError::EmptyList => "EmptyList",
            ApiError::InvalidBody(_) => "InvalidBody",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code(), "message": self.to_string() });
        let mut resp = (self.status(), axum::Json(body)).into_response();
        if self == ApiError::Unavailable {
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from_static("1"));
        }
        resp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PayloadTopic {
    pub id: TopicId,
    pub label: String,
    pub level: u32,
    pub parent: Option<TopicId>,
    pub circle: Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PayloadInstance {
    pub id: String,
    pub entity_id: EntityId,
    pub topic_id: TopicId,
    pub label: String,
    pub kind: InstanceKind,
    pub tag: Provenance,
    pub circle: Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayloadEdge {
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PayloadContour {
    pub iso: f64,
    pub color: [u8; 3],
    pub polylines: Vec<Polyline>,
}

/// Everything the map view needs to draw one depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MapPayload {
    pub depth: u32,
    pub max_depth: u32,
    pub world_radius: f64,
    pub topics: Vec<PayloadTopic>,
    pub instances: Vec<PayloadInstance>,
    pub edges: Vec<PayloadEdge>,
    pub contours: Vec<PayloadContour>,
    pub color_scale: ColorScale,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TopicHit {
    pub topic_id: TopicId,
    pub label: String,
    pub level: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityHit {
    pub entity_id: EntityId,
    pub title: String,
    pub year: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub query: String,
    pub topics: Vec<TopicHit>,
    pub entities: Vec<EntityHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConceptRef {
    pub id: ConceptId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceLocation {
    pub level: u32,
    pub instance_id: String,
    pub topic_id: TopicId,
    pub topic_label: String,
    pub kind: InstanceKind,
    pub tag: Provenance,
    pub circle: Option<Circle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityDetail {
    #[serde(flatten)]
    pub record: EntityRecord,
    pub concept_names: Vec<ConceptRef>,
    pub instances: Vec<InstanceLocation>,
}

/// JSON bytes and their gzip encoding.
#[derive(Debug, Clone)]
pub struct CachedBody {
    pub json: Bytes,
    pub gzip: Bytes,
}

impl CachedBody {
    fn new(json: Vec<u8>) -> Self {
        let gzip = gzip_bytes(&json);
        CachedBody {
            json: Bytes::from(json),
            gzip: Bytes::from(gzip),
        }
    }
}

/// Deterministic gzip (zero mtime, no name).
pub fn gzip_bytes(data: &[u8]) -> Vec<u8> {
    let mut enc = GzBuilder::new().mtime(0).write(Vec::new(), Compression::default());
    enc.write_all(data).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

struct EntityText {
    title: String,
    abstract_text: String,
    authors: Vec<String>,
    topics: Vec<String>,
}

struct SearchIndex {
    entities: Vec<EntityText>,
    topics: Vec<(TopicId, String)>,
    entity_tokens: BTreeMap<String, BTreeSet<usize>>,
    topic_tokens: BTreeMap<String, BTreeSet<usize>>,
}

fn index_tokens(index: &mut BTreeMap<String, BTreeSet<usize>>, text: &str, doc: usize) {
    for tok in normalise_text(text) {
        index.entry(tok).or_default().insert(doc);
    }
}

/// Documents holding, for every query token, some token containing it.
/// `None` when the query has no tokens and every document must be scanned.
fn candidates(index: &BTreeMap<String, BTreeSet<usize>>, query: &str) -> Option<BTreeSet<usize>> {
    let tokens = normalise_text(query);
    if tokens.is_empty() {
        return None;
    }
    let mut out: Option<BTreeSet<usize>> = None;
    for q in tokens {
        let docs: BTreeSet<usize> = index
            .iter()
            .filter(|(tok, _)| tok.contains(&q))
            .flat_map(|(_, d)| d.iter().copied())
            .collect();
        out = Some(match out {
            None => docs,
            Some(prev) => prev.intersection(&docs).copied().collect(),
        });
    }
    out
}

/// Does `q` occur in `field` at the start of a word?
fn word_start_match(field: &str, q: &str) -> bool {
    field.match_indices(q).any(|(i, _)| {
        field[..i]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric())
    })
}

impl SearchIndex {
    fn build(bundle: &GraphBundle) -> Self {
        let mut topics = Vec::new();
        let mut topic_tokens = BTreeMap::new();
        let mut topic_label: HashMap<&str, String> = HashMap::new();
        for t in bundle.thg.nodes.values() {
            if t.id == ROOT_ID {
                continue;
            }
            let lc = t.label.to_lowercase();
            index_tokens(&mut topic_tokens, &lc, topics.len());
            topic_label.insert(t.id.as_str(), lc.clone());
            topics.push((t.id.clone(), lc));
        }
        let mut entities = Vec::new();
        let mut entity_tokens = BTreeMap::new();
        for (i, r) in bundle.records.iter().enumerate() {
            let labels: Vec<String> = bundle
                .assignment
                .provenance
                .get(&r.id)
                .into_iter()
                .flat_map(|m| m.keys())
                .filter_map(|t| topic_label.get(t.as_str()).cloned())
                .collect();
            let text = EntityText {
                title: r.title.to_lowercase(),
                abstract_text: r.abstract_text.to_lowercase(),
                authors: r.authors.iter().map(|a| a.to_lowercase()).collect(),
                topics: labels,
            };
            index_tokens(&mut entity_tokens, &text.title, i);
            index_tokens(&mut entity_tokens, &text.abstract_text, i);
            for s in text.authors.iter().chain(&text.topics) {
                index_tokens(&mut entity_tokens, s, i);
            }
            entities.push(text);
        }
        SearchIndex {
            entities,
            topics,
            entity_tokens,
            topic_tokens,
        }
    }

    fn entity_score(&self, i: usize, q: &str) -> u32 {
        let t = &self.entities[i];
        let title = t.title.contains(q);
        let topic = t.topics.iter().any(|s| s.contains(q));
        let other = t.abstract_text.contains(q) || t.authors.iter().any(|s| s.contains(q));
        let score = 3 * title as u32 + 2 * topic as u32 + other as u32;
        if score == 0 {
            return 0;
        }
        let prefix = word_start_match(&t.title, q)
            || t.topics.iter().any(|s| word_start_match(s, q))
            || word_start_match(&t.abstract_text, q)
            || t.authors.iter().any(|s| word_start_match(s, q));
        score + prefix as u32
    }
}

/// Immutable, precomputed view of one bundle.
pub struct Snapshot {
    bundle: Arc<GraphBundle>,
    maps: BTreeMap<u32, CachedBody>,
    search: SearchIndex,
    record_index: HashMap<EntityId, usize>,
}

impl Snapshot {
    pub fn new(bundle: GraphBundle) -> Self {
        let bundle = Arc::new(bundle);
        let depths: Vec<u32> = (1..=bundle.thg.max_depth).collect();
        let maps = depths
            .par_iter()
            .map(|&d| {
                let json = serde_json::to_vec(&map_payload(&bundle, d)).expect("payload serialises");
                (d, CachedBody::new(json))
            })
            .collect();
        let search = SearchIndex::build(&bundle);
        let record_index = bundle
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Snapshot {
            bundle,
            maps,
            search,
            record_index,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Ok(Snapshot::new(load_bundle(path)?))
    }

    pub fn bundle(&self) -> &GraphBundle {
        &self.bundle
    }

    pub fn max_depth(&self) -> u32 {
        self.bundle.thg.max_depth
    }

    pub fn map_body(&self, depth: u32) -> Option<&CachedBody> {
        self.maps.get(&depth)
    }

    pub fn search(&self, query: &str, limit: usize) -> Result<SearchResult, ApiError> {
        let trimmed = query.trim();
        if trimmed.is_empty() {
            return Err(ApiError::EmptyQuery);
        }
        let q = trimmed.to_lowercase();

        let topic_docs: Vec<usize> = match candidates(&self.search.topic_tokens, &q) {
            Some(set) => set.into_iter().collect(),
            None => (0..self.search.topics.len()).collect(),
        };
        let mut topics: Vec<(TopicHit, bool)> = topic_docs
            .into_iter()
            .filter_map(|i| {
                let (id, label_lc) = &self.search.topics[i];
                if !label_lc.contains(&q) {
                    return None;
                }
                let node = self.bundle.thg.get(id)?;
                let score = 2 + word_start_match(label_lc, &q) as u32;
                Some((
                    TopicHit {
                        topic_id: id.clone(),
                        label: node.label.clone(),
                        level: node.level,
                        score,
                    },
                    *label_lc == q,
                ))
            })
            .collect();
        topics.sort_by(|(a, ea), (b, eb)| {
            b.score
                .cmp(&a.score)
                .then(eb.cmp(ea))
                .then(a.topic_id.cmp(&b.topic_id))
        });

        let entity_docs: Vec<usize> = match candidates(&self.search.entity_tokens, &q) {
            Some(set) => set.into_iter().collect(),
            None => (0..self.search.entities.len()).collect(),
        };
        let mut entities: Vec<EntityHit> = entity_docs
            .into_iter()
            .filter_map(|i| {
                let score = self.search.entity_score(i, &q);
                (score > 0).then(|| {
                    let r = &self.bundle.records[i];
                    EntityHit {
                        entity_id: r.id.clone(),
                        title: r.title.clone(),
                        year: r.year,
                        score,
                    }
                })
            })
            .collect();
        entities.sort_by(|a, b| b.score.cmp(&a.score).then(a.entity_id.cmp(&b.entity_id)));

        Ok(SearchResult {
            query: trimmed.to_string(),
            topics: topics.into_iter().take(limit).map(|(t, _)| t).collect(),
            entities: entities.into_iter().take(limit).collect(),
        })
    }

    pub fn entity_detail(&self, id: &str) -> Option<EntityDetail> {
        let record = &self.bundle.records[*self.record_index.get(id)?];
        let concept_names = record
            .concepts
            .iter()
            .map(|c| ConceptRef {
                id: c.clone(),
                name: self.bundle.concept_names.get(c).cloned().unwrap_or_else(|| c.clone()),
            })
            .collect();
        let instances = self
            .bundle
            .tog
            .levels
            .iter()
            .flat_map(|(level, occ)| {
                occ.instances
                    .iter()
                    .filter(|i| i.entity_id == id)
                    .map(move |i| (*level, i))
            })
            .map(|(level, i)| InstanceLocation {
                level,
                instance_id: i.instance_id.clone(),
                topic_id: i.topic_id.clone(),
                topic_label: self
                    .bundle
                    .thg
                    .get(&i.topic_id)
                    .map(|t| t.label.clone())
                    .unwrap_or_default(),
                kind: i.kind,
                tag: i.tag,
                circle: self.bundle.layout.per_instance.get(&i.instance_id).copied(),
            })
            .collect();
        Some(EntityDetail {
            record: record.clone(),
            concept_names,
            instances,
        })
    }

    /// CSV of the known ids in request order (duplicates dropped), plus the
    /// ids that were skipped.
    pub fn export_csv(&self, ids: &[String]) -> (String, Vec<String>) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "title", "authors", "year", "venue", "doi", "url"])
            .expect("in-memory csv");
        let mut seen = BTreeSet::new();
        let mut unknown = Vec::new();
        for id in ids {
            if !seen.insert(id.as_str()) {
                continue;
            }
            let Some(&i) = self.record_index.get(id) else {
                unknown.push(id.clone());
                continue;
            };
            let r = &self.bundle.records[i];
            let year = if r.year == 0 { String::new() } else { r.year.to_string() };
            w.write_record([
                r.id.as_str(),
                r.title.as_str(),
                r.authors.join("; ").as_str(),
                year.as_str(),
                r.venue.as_deref().unwrap_or(""),
                r.doi.as_deref().unwrap_or(""),
                r.url.as_deref().unwrap_or(""),
            ])
            .expect("in-memory csv");
        }
        let bytes = w.into_inner().expect("in-memory csv");
        (String::from_utf8(bytes).expect("csv of utf-8 fields"), unknown)
    }
}

/// Build the payload for one depth from scratch.
pub fn map_payload(bundle: &GraphBundle, depth: u32) -> MapPayload {
    let titles: HashMap<&str, &str> = bundle
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.title.as_str()))
        .collect();
    let topics = bundle
        .thg
        .nodes
        .values()
        .filter(|t| t.level <= depth)
        .filter_map(|t| {
            Some(PayloadTopic {
                id: t.id.clone(),
                label: t.label.clone(),
                level: t.level,
                parent: t.parent.clone(),
                circle: *bundle.layout.per_topic.get(&t.id)?,
            })
        })
        .collect();
    let (instances, edges) = match bundle.tog.level(depth) {
        Some(occ) => (
            occ.instances
                .iter()
                .filter_map(|i| {
                    Some(PayloadInstance {
                        id: i.instance_id.clone(),
                        entity_id: i.entity_id.clone(),
                        topic_id: i.topic_id.clone(),
                        label: titles.get(i.entity_id.as_str()).copied().unwrap_or("").to_string(),
                        kind: i.kind,
                        tag: i.tag,
                        circle: *bundle.layout.per_instance.get(&i.instance_id)?,
                    })
                })
                .collect(),
            occ.edges
                .iter()
                .map(|e| PayloadEdge {
                    a: e.a.clone(),
                    b: e.b.clone(),
                    kind: e.kind,
                    weight: e.weight,
                })
                .collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    let contours = bundle
        .contours
        .iso_levels
        .iter()
        .zip(&bundle.contours.polylines)
        .map(|(&iso, lines)| PayloadContour {
            iso,
            color: colorize(iso.clamp(0.0, 1.0), &bundle.color_scale).unwrap_or([0, 0, 0]),
            polylines: lines.clone(),
        })
        .collect();
    MapPayload {
        depth,
        max_depth: bundle.thg.max_depth,
        world_radius: bundle.layout.world_radius,
        topics,
        instances,
        edges,
        contours,
        color_scale: bundle.color_scale.clone(),
    }
}

/// Shared server state: the current snapshot, if any.
#[derive(Default)]
pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
}

impl AppState {
    pub fn empty() -> Self {
        AppState::default()
    }

    pub fn with_snapshot(snapshot: Snapshot) -> Self {
        AppState {
            snapshot: RwLock::new(Some(Arc::new(snapshot))),
        }
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Install a new snapshot; in-flight requests keep the old one.
    pub fn swap(&self, snapshot: Snapshot) -> Option<Arc<Snapshot>> {
        let mut guard = self.snapshot.write().unwrap_or_else(|e| e.into_inner());
        guard.replace(Arc::new(snapshot))
    }

    /// Load a bundle and swap it in. On failure the old snapshot stays.
    pub fn reload(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let snapshot = Snapshot::load(path)?;
        self.swap(snapshot);
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/map", get(map))
        .route("/api/search", get(search))
        .route("/api/entity/{id}", get(entity))
        .route("/api/export", post(export))
        .with_state(state)
}

fn snapshot(state: &AppState) -> Result<Arc<Snapshot>, ApiError> {
    state.current().ok_or(ApiError::Unavailable)
}

/// Does the client accept a gzip response?
pub fn accepts_gzip(headers: &HeaderMap) -> bool {
    let Some(value) = headers.get(header::ACCEPT_ENCODING).and_then(|v| v.to_str().ok()) else {
        return false;
    };
    let mut gzip = None;
    let mut star = None;
    for part in value.split(',') {
        let mut fields = part.split(';');
        let coding = fields.next().unwrap_or("").trim().to_ascii_lowercase();
        let q = fields
            .filter_map(|f| f.trim().strip_prefix("q="))
            .filter_map(|q| q.trim().parse::<f64>().ok())
            .next()
            .unwrap_or(1.0);
        match coding.as_str() {
            "gzip" | "x-gzip" => gzip = Some(q > 0.0),
            "*" => star = Some(q > 0.0),
            _ => {}
        }
    }
    gzip.or(star).unwrap_or(false)
}

fn json_response(body: &CachedBody, gzip: bool, cached: bool) -> Response {
    let bytes = if gzip { body.gzip.clone() } else { body.json.clone() };
    let mut resp = Response::new(Body::from(bytes));
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    h.insert(header::VARY, HeaderValue::from_static("accept-encoding"));
    if gzip {
        h.insert(header::CONTENT_ENCODING, HeaderValue::from_static("gzip"));
    }
    if cached {
        h.insert("x-cache", HeaderValue::from_static("HIT"));
    }
    resp
}

fn fresh_json<T: Serialize>(value: &T, headers: &HeaderMap) -> Response {
    let body = CachedBody::new(serde_json::to_vec(value).expect("response serialises"));
    json_response(&body, accepts_gzip(headers), false)
}

async fn health(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let b = snap.bundle();
    let body = serde_json::json!({
        "status": "ok",
        "maxDepth": b.thg.max_depth,
        "entities": b.ceg.nodes.len(),
        "topics": b.thg.len().saturating_sub(1),
    });
    Ok(axum::Json(body).into_response())
}

async fn map(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let raw = params.get("depth").cloned().unwrap_or_default();
    let invalid = || ApiError::InvalidDepth {
        got: raw.clone(),
        max: snap.max_depth(),
    };
    let depth: u32 = raw.trim().parse().map_err(|_| invalid())?;
    let body = snap.map_body(depth).ok_or_else(invalid)?;
    Ok(json_response(body, accepts_gzip(&headers), true))
}

async fn search(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let limit = match params.get("limit") {
        None => DEFAULT_SEARCH_LIMIT,
        Some(raw) => raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| (1..=MAX_SEARCH_LIMIT).contains(n))
            .ok_or_else(|| ApiError::InvalidLimit(raw.clone()))?,
    };
    let q = params.get("q").map(String::as_str).unwrap_or("");
    let result = snap.search(q, limit)?;
    Ok(fresh_json(&result, &headers))
}

async fn entity(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let detail = snap.entity_detail(&id).ok_or(ApiError::NotFound(id))?;
    Ok(fresh_json(&detail, &headers))
}

/// Percent-encode everything outside visible ASCII, plus `,` and `%`.
fn header_safe(id: &str) -> String {
    let mut out = String::new();
    for b in id.bytes() {
        if (0x21..=0x7e).contains(&b) && b != b',' && b != b'%' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

async fn export(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let snap = snapshot(&state)?;
    let ids: Vec<String> = serde_json::from_slice(&body).map_err(|e| ApiError::InvalidBody(e.to_string()))?;
    if ids.is_empty() {
        return Err(ApiError::EmptyList);
    }
    let (csv, unknown) = snap.export_csv(&ids);
    let gzip = accepts_gzip(&headers);
    let mut resp = Response::new(Body::from(if gzip { gzip_bytes(csv.as_bytes()) } else { csv.into_bytes() }));
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8"));
    h.insert(header::VARY, HeaderValue::from_static("accept-encoding"));
    if gzip {
        h.insert(header::CONTENT_ENCODING, HeaderValue::from_static("gzip"));
    }
    h.insert(
        header::CONTENT_DISPOSITION,
        HeaderValue::from_static("attachment; filename=\"export.csv\""),
    );
    if !unknown.is_empty() {
        let list: Vec<String> = unknown.iter().map(|id| header_safe(id)).collect();
        if let Ok(v) = HeaderValue::from_str(&list.join(",")) {
            h.insert("x-unknown-ids", v);
        }
        let warning = format!("199 knowmap \"skipped {} unknown id(s)\"", unknown.len());
        h.insert(header::WARNING, HeaderValue::from_str(&warning).expect("ascii"));
    }
    Ok(resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn headers(v: &str) -> HeaderMap {
        let mut h = HeaderMap::new();
        h.insert(header::ACCEPT_ENCODING, HeaderValue::from_str(v).unwrap());
        h
    }

    #[test]
    fn gzip_negotiation() {
        assert!(accepts_gzip(&headers("gzip")));
        assert!(accepts_gzip(&headers("br, gzip;q=0.5")));
        assert!(!accepts_gzip(&headers("gzip;q=0")));
        assert!(accepts_gzip(&headers("*")));
        assert!(!accepts_gzip(&headers("*, gzip;q=0")));
        assert!(!accepts_gzip(&headers("identity")));
        assert!(!accepts_gzip(&HeaderMap::new()));
    }

    #[test]
    fn word_start() {
        assert!(word_start_match("k-ras mutation", "ras"));
        assert!(word_start_match("lung cancer", "lung"));
        assert!(!word_start_match("bras", "ras"));
    }

    #[test]
    fn header_encoding() {
        assert_eq!(header_safe("a,b%c d"), "a%2Cb%25c%20d");
    }

    #[test]
    fn empty_bundle_snapshot() {
        let snap = Snapshot::new(GraphBundle::default());
        assert!(snap.map_body(1).is_none());
        assert_eq!(snap.search("x", 5).unwrap().entities.len(), 0);
        assert_eq!(snap.search("  ", 5), Err(ApiError::EmptyQuery));
    }
}
