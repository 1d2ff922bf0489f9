mod common;

use std::collections::{BTreeMap, BTreeSet};

use flate2::read::GzDecoder;
use knowmap::ceg::{CoreGraph, SimilarityEdge};
use knowmap::ingestion::{parse_folder_tree, EntityRecord};
use knowmap::store::{decode_bundle, encode_bundle, graphdb_counts, graphdb_script, StoreError};
use knowmap::thg::{backpropagate, build_mthg};
use knowmap::{load_bundle, save_bundle, GraphBundle};

use common::demo_bundle;

fn statements(script: &str) -> Vec<&str> {
    script.lines().filter(|l| !l.starts_with("//")).collect()
}

#[test]
fn demo_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.kcb");
    save_bundle(demo_bundle(), &path).unwrap();
    let back = load_bundle(&path).unwrap();
    assert_eq!(&back, demo_bundle());
    assert!(back.dangling_references().is_empty());
}

#[test]
fn saving_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.kcb"), dir.path().join("b.kcb"));
    save_bundle(demo_bundle(), &a).unwrap();
    save_bundle(demo_bundle(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // A reloaded bundle re-encodes to the same bytes.
    let again = encode_bundle(&load_bundle(&a).unwrap()).unwrap();
    assert_eq!(again, std::fs::read(&a).unwrap());
}

#[test]
fn container_is_gzip_json() {
    let bytes = encode_bundle(demo_bundle()).unwrap();
    let mut json = String::new();
    std::io::Read::read_to_string(&mut GzDecoder::new(&bytes[..]), &mut json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["format_version"], 1);
}

#[test]
fn future_version_is_rejected() {
    let mut b = demo_bundle().clone();
    b.format_version = 99;
    let bytes = encode_bundle(&b).unwrap();
    match decode_bundle(&bytes) {
        Err(StoreError::VersionMismatch { found: 99, expected: 1 }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn truncated_file_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.kcb");
    let bytes = encode_bundle(demo_bundle()).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_bundle(&path), Err(StoreError::CorruptBundle(_))));
}

#[test]
fn dangling_instance_is_corrupt() {
    let mut b = demo_bundle().clone();
    let level = b.tog.levels.get_mut(&1).unwrap();
    level.instances[0].topic_id = "No/Such/Topic".into();
    let bytes = encode_bundle(&b).unwrap();
    assert!(matches!(decode_bundle(&bytes), Err(StoreError::CorruptBundle(_))));
}

#[test]
fn unwritable_path_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("deeper").join("x.kcb");
    assert!(matches!(save_bundle(demo_bundle(), &path), Err(StoreError::Io(_))));
    assert!(matches!(load_bundle(dir.path().join("absent.kcb")), Err(StoreError::Io(_))));
}

#[test]
fn script_line_count_matches_tally() {
    let b = demo_bundle();
    let script = graphdb_script(b);
    let (nodes, edges) = graphdb_counts(b);
    assert_eq!(statements(&script).len(), nodes + edges);
    assert_eq!(script.lines().count(), 2 + nodes + edges);
    let entity_nodes = script.lines().filter(|l| l.starts_with("MERGE (n:Entity")).count();
    assert_eq!(entity_nodes, b.records.len());
    for l in statements(&script) {
        assert!(l.contains("MERGE") && l.ends_with(';'), "{l}");
    }
}

#[test]
fn two_entities_root_only_hierarchy() {
    let records = vec![EntityRecord::new("a"), EntityRecord::new("b")];
    let thg = build_mthg(&parse_folder_tree(&records));
    assert_eq!(thg.len(), 1);
    let b = GraphBundle {
        records,
        ceg: CoreGraph {
            nodes: ["a".to_string(), "b".to_string()].into(),
            edges: vec![SimilarityEdge::new("a", "b", 7, false)],
            threshold: 5,
        },
        thg,
        ..GraphBundle::default()
    };
    let script = graphdb_script(&b);
    let s = statements(&script);
    let node_lines = s.iter().filter(|l| l.starts_with("MERGE")).count();
    let edge_lines = s.iter().filter(|l| l.starts_with("MATCH")).count();
    assert_eq!(node_lines, 3);
    assert_eq!(edge_lines, 1);
    assert!(s.iter().any(|l| l.contains("SIMILAR_TO") && l.contains("r.weight = 7")));
    assert_eq!(graphdb_counts(&b), (3, 1));
}

#[test]
fn one_annotation_per_entity_topic_pair() {
    let mut r = EntityRecord::new("e");
    r.folder_paths = vec!["A/B".into(), "A/C".into()];
    let records = vec![r];
    let thg = build_mthg(&parse_folder_tree(&records));
    let direct: BTreeMap<String, BTreeSet<String>> =
        [("e".to_string(), ["A/B".to_string(), "A/C".to_string()].into_iter().collect())].into();
    let assignment = backpropagate(&direct, &thg).unwrap();
    let b = GraphBundle {
        ceg: CoreGraph {
            nodes: ["e".to_string()].into(),
            edges: Vec::new(),
            threshold: 5,
        },
        records,
        thg,
        assignment,
        ..GraphBundle::default()
    };
    let script = graphdb_script(&b);
    let annotated: Vec<&str> = script.lines().filter(|l| l.contains("ANNOTATED_TO")).collect();
    // A is reached twice through back-propagation but written once.
    assert_eq!(annotated.len(), 3);
    let topics: BTreeSet<&str> = annotated
        .iter()
        .map(|l| l.split("(t:Topic {id: \"").nth(1).unwrap().split('"').next().unwrap())
        .collect();
    assert_eq!(topics, ["A", "A/B", "A/C"].into_iter().collect());
    assert_eq!(annotated.iter().filter(|l| l.contains("\"induced\"")).count(), 1);
}

#[test]
fn empty_bundle_script_is_header_only() {
    let script = graphdb_script(&GraphBundle::default());
    assert!(statements(&script).is_empty());
    assert_eq!(script.lines().count(), 2);
}
