#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::OnceLock;

use knowmap::ingestion::{load_gazetteer, parse_corpus, AnnotationTable, EntityRecord};
use knowmap::pipeline::build_from_parts;
use knowmap::{build_bundle, BuildConfig, GraphBundle};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

pub fn demo_config() -> BuildConfig {
    BuildConfig {
        corpus: Some(demo_dir().join("corpus.jsonl")),
        gazetteer: Some(demo_dir().join("gazetteer.tsv")),
        ..BuildConfig::default()
    }
}

/// The shipped demo corpus built with default settings, once per test binary.
pub fn demo_bundle() -> &'static GraphBundle {
    static BUNDLE: OnceLock<GraphBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| build_bundle(&demo_config()).expect("demo corpus builds"))
}

pub fn demo_records() -> Vec<EntityRecord> {
    parse_corpus(demo_dir().join("corpus.jsonl")).expect("demo corpus parses")
}

pub fn demo_gazetteer_len() -> usize {
    load_gazetteer(demo_dir().join("gazetteer.tsv")).expect("demo gazetteer").len()
}

/// Records with random folders and an annotation table over `n_concepts`
/// concepts. About one entity in ten gets no concepts at all.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_entities: usize, n_concepts: usize) -> (Vec<EntityRecord>, AnnotationTable) {
    let folders = random_folders(rng);
    let mut records = Vec::new();
    let mut table = AnnotationTable::default();
    for i in 0..n_entities {
        let id = format!("e{i:03}");
        let mut r = EntityRecord::new(id.clone());
        let n_paths = rng.random_range(1..=2);
        let mut paths = BTreeSet::new();
        for _ in 0..n_paths {
            paths.insert(folders.choose(rng).unwrap().clone());
        }
        r.folder_paths = paths.into_iter().collect();
        let mut row = BTreeMap::new();
        if rng.random_bool(0.9) {
            let k = rng.random_range(1..=12.min(n_concepts));
            for _ in 0..k {
                let c = format!("C{:03}", rng.random_range(0..n_concepts));
                *row.entry(c).or_insert(0) += 1;
            }
        }
        table.rows.insert(id, row);
        records.push(r);
    }
    (records, table)
}

/// Folder paths over a random tree of depth 1 to 3, both leaves and inner nodes.
pub fn random_folders(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out = Vec::new();
    let tops = rng.random_range(1..=4);
    for t in 0..tops {
        let top = format!("T{t}");
        out.push(top.clone());
        for m in 0..rng.random_range(0..=3) {
            let mid = format!("{top}/M{m}");
            out.push(mid.clone());
            for l in 0..rng.random_range(0..=3) {
                out.push(format!("{mid}/L{l}"));
            }
        }
    }
    out
}

/// Build every stage from an in-memory corpus with a small grid.
pub fn bundle_from(records: Vec<EntityRecord>, table: AnnotationTable, threshold: u32) -> GraphBundle {
    let cfg = BuildConfig {
        threshold,
        grid: 64,
        ..BuildConfig::default()
    };
    build_from_parts(records, table, BTreeMap::new(), &cfg).expect("random corpus builds")
}

/// Brute-force similarity edges: every pair, intersection counted by lookup.
pub fn oracle_edges(table: &AnnotationTable, tau: u32) -> BTreeSet<(String, String, u32)> {
    let ids: Vec<&String> = table.rows.keys().collect();
    let mut out = BTreeSet::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let a = &table.rows[ids[i]];
            let b = &table.rows[ids[j]];
            let shared = a.keys().filter(|c| b.contains_key(*c)).count() as u32;
            if shared >= tau {
                let (x, y) = if ids[i] < ids[j] { (ids[i], ids[j]) } else { (ids[j], ids[i]) };
                out.insert((x.clone(), y.clone(), shared));
            }
        }
    }
    out
}

/// Number of connected components, by repeated flood fill.
pub fn oracle_components(nodes: &BTreeSet<String>, edges: &[(String, String)]) -> usize {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut count = 0;
    for n in nodes {
        if seen.contains(n.as_str()) {
            continue;
        }
        count += 1;
        let mut stack = vec![n.as_str()];
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            for (a, b) in edges {
                if a == x && !seen.contains(b.as_str()) {
                    stack.push(b);
                }
                if b == x && !seen.contains(a.as_str()) {
                    stack.push(a);
                }
            }
        }
    }
    count
}

fn depth(path: &str) -> usize {
    path.split('/').count()
}

fn prefix(path: &str, n: usize) -> String {
    path.split('/').take(n).collect::<Vec<_>>().join("/")
}

/// Topics an entity with these folder paths occupies at `level` in a
/// folder-derived hierarchy, from the paths alone: the level-`level`
/// prefix of each deep enough path, plus every shallower path that no other
/// path of the entity extends.
pub fn oracle_occupancy(folders: &[String], level: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in folders {
        if depth(p) >= level {
            out.insert(prefix(p, level));
        } else {
            let extended = folders
                .iter()
                .any(|q| q != p && q.starts_with(p.as_str()) && q.as_bytes().get(p.len()) == Some(&b'/'));
            if !extended {
                out.insert(p.clone());
            }
        }
    }
    out
}

/// Every (from, to) lattice-space segment marching squares should emit,
/// computed cell by cell. Crossed edges are those whose corners differ in
/// `v >= iso`; two crossed edges form one segment, four form a saddle split
/// around the corners on the side the centre average is not on.
pub fn oracle_segments(values: &[f64], w: usize, h: usize, iso: f64) -> Vec<([f64; 2], [f64; 2])> {
    let at = |i: usize, j: usize| values[j * w + i];
    let cross = |(i0, j0): (usize, usize), (i1, j1): (usize, usize)| -> [f64; 2] {
        let (v0, v1) = (at(i0, j0), at(i1, j1));
        let t = (iso - v0) / (v1 - v0);
        [i0 as f64 + t * (i1 as f64 - i0 as f64), j0 as f64 + t * (j1 as f64 - j0 as f64)]
    };
    let mut out = Vec::new();
    for j in 0..h.saturating_sub(1) {
        for i in 0..w.saturating_sub(1) {
            // Corners counter-clockwise from bottom-left; edge k joins corner k and k+1.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let above: Vec<bool> = c.iter().map(|&(x, y)| at(x, y) >= iso).collect();
            let edge_pt = |k: usize| {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                // Canonical direction: from the smaller lattice point.
                if (a.1, a.0) <= (b.1, b.0) {
                    cross(a, b)
                } else {
                    cross(b, a)
                }
            };
            let crossed: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match crossed.len() {
                0 => {}
                2 => out.push((edge_pt(crossed[0]), edge_pt(crossed[1]))),
                4 => {
                    let centre = c.iter().map(|&(x, y)| at(x, y)).sum::<f64>() / 4.0 >= iso;
                    for (k, &corner) in above.iter().enumerate() {
                        if corner != centre {
                            // Corner k is cut off: its two incident edges are k-1 and k.
                            out.push((edge_pt((k + 3) % 4), edge_pt(k)));
                        }
                    }
                }
                n => panic!("{n} crossed edges"),
            }
        }
    }
    out
}

/// Order-independent key for a segment, at 1e-9 resolution.
pub fn segment_key(a: [f64; 2], b: [f64; 2]) -> [i64; 4] {
    let q = |v: f64| (v * 1e9).round() as i64;
    let (p, r) = ([q(a[0]), q(a[1])], [q(b[0]), q(b[1])]);
    if p <= r {
        [p[0], p[1], r[0], r[1]]
    } else {
        [r[0], r[1], p[0], p[1]]
    }
}

/// One in-process request; returns status, headers and raw body bytes.
pub async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    accept_gzip: bool,
    body: Option<&str>,
) -> (axum::http::StatusCode, axum::http::HeaderMap, Vec<u8>) {
    use http_body_util::BodyExt;
    use tower::ServiceExt;
    let mut req = axum::http::Request::builder().method(method).uri(uri);
    if accept_gzip {
        req = req.header("accept-encoding", "gzip");
    }
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req
        .body(axum::body::Body::from(body.unwrap_or("").to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let (parts, body) = resp.into_parts();
    let bytes = body.collect().await.unwrap().to_bytes().to_vec();
    (parts.status, parts.headers, bytes)
}

pub fn gunzip(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    std::io::Read::read_to_end(&mut flate2::read::GzDecoder::new(bytes), &mut out).unwrap();
    out
}
