mod common;

use std::collections::{BTreeMap, BTreeSet};

use knowmap::ceg::CoreGraph;
use knowmap::ingestion::{parse_folder_tree, EntityRecord};
use knowmap::layout::{layout_hierarchy, Circle, LayoutParams};
use knowmap::thg::{backpropagate, build_mthg, TopicHierarchy};
use knowmap::tog::{build_tog, OccupancyGraph};
use knowmap::topography::{
    colorize, elevation_grid, extract_contours, march, on_lattice_boundary, ColorScale, ElevationGrid,
    TopographyParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{oracle_segments, segment_key};

fn segment_keys(lines: &[knowmap::topography::Polyline]) -> Vec<[i64; 4]> {
    let mut keys: Vec<[i64; 4]> = lines
        .iter()
        .flat_map(|l| l.segments())
        .map(|(a, b)| segment_key(a, b))
        .collect();
    keys.sort();
    keys
}

fn oracle_keys(values: &[f64], w: usize, h: usize, iso: f64) -> Vec<[i64; 4]> {
    let mut keys: Vec<[i64; 4]> = oracle_segments(values, w, h, iso)
        .into_iter()
        .map(|(a, b)| segment_key(a, b))
        .collect();
    keys.sort();
    keys
}

fn assert_well_formed(values: &[f64], w: usize, h: usize, iso: f64) {
    let grid = ElevationGrid::new(w, h, 1.0, values.to_vec());
    for line in march(values, w, h, iso) {
        assert!(line.points.len() >= 2);
        if !line.closed {
            assert!(on_lattice_boundary(line.points[0], w, h));
            assert!(on_lattice_boundary(*line.points.last().unwrap(), w, h));
        }
        for p in &line.points {
            assert!((grid.sample(p[0], p[1]) - iso).abs() <= 1e-6);
        }
    }
}

#[test]
fn random_grids_match_cell_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let w = rng.random_range(2..=32);
        let h = rng.random_range(2..=32);
        let values: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        for iso in [0.1, 0.35, 0.5, 0.8] {
            assert_eq!(segment_keys(&march(&values, w, h, iso)), oracle_keys(&values, w, h, iso));
            assert_well_formed(&values, w, h, iso);
        }
    }
}

#[test]
fn quantised_grids_with_exact_iso_hits() {
    // Values on a coarse lattice so corners often equal the iso value.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let (w, h) = (rng.random_range(2..=12), rng.random_range(2..=12));
        let values: Vec<f64> = (0..w * h).map(|_| rng.random_range(0..=4) as f64 / 4.0).collect();
        for iso in [0.25, 0.5, 0.75] {
            assert_eq!(segment_keys(&march(&values, w, h, iso)), oracle_keys(&values, w, h, iso));
        }
    }
}

#[test]
fn single_hot_corner_cell() {
    let mut values = vec![0.0; 9];
    values[0] = 1.0;
    let lines = march(&values, 3, 3, 0.5);
    assert_eq!(lines.len(), 1);
    let l = &lines[0];
    assert!(!l.closed);
    let ends: BTreeSet<[i64; 2]> = [l.points[0], l.points[1]]
        .iter()
        .map(|p| [(p[0] * 1e9) as i64, (p[1] * 1e9) as i64])
        .collect();
    let expected: BTreeSet<[i64; 2]> = [[500_000_000, 0], [0, 500_000_000]].into_iter().collect();
    assert_eq!(ends, expected);
}

fn bump(n: usize) -> Vec<f64> {
    let c = (n - 1) as f64 / 2.0;
    let mut v = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            v.push((-d2 / (n as f64 * 1.5)).exp());
        }
    }
    v
}

#[test]
fn radial_bump_gives_nested_closed_rings() {
    let n = 31;
    let values = bump(n);
    let grid = ElevationGrid::new(n, n, 10.0, values.clone());
    let set = extract_contours(&grid, &[0.2, 0.4, 0.6, 0.8]);
    let mut prev_max = f64::INFINITY;
    for (iso, lines) in set.iso_levels.iter().zip(&set.polylines) {
        assert_eq!(lines.len(), 1, "iso {iso}");
        assert!(lines[0].closed);
        let reach = lines[0].points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        assert!(reach < prev_max);
        prev_max = lines[0].points.iter().map(|p| p[0].hypot(p[1])).fold(f64::INFINITY, f64::min);
        assert_eq!(segment_keys(&march(&values, n, n, *iso)), oracle_keys(&values, n, n, *iso));
    }
}

fn graphs(records: &[EntityRecord]) -> (TopicHierarchy, OccupancyGraph) {
    let thg = build_mthg(&parse_folder_tree(records));
    let direct: BTreeMap<String, BTreeSet<String>> = records
        .iter()
        .map(|r| (r.id.clone(), r.folder_paths.iter().cloned().collect()))
        .collect();
    let asg = backpropagate(&direct, &thg).unwrap();
    let ceg = CoreGraph {
        nodes: records.iter().map(|r| r.id.clone()).collect(),
        edges: Vec::new(),
        threshold: 5,
    };
    let tog = build_tog(&ceg, &thg, &asg, records).unwrap();
    (thg, tog)
}

fn filed(id: &str, folder: &str) -> EntityRecord {
    let mut r = EntityRecord::new(id);
    r.folder_paths = vec![folder.to_string()];
    r
}

#[test]
fn single_instance_peak_is_at_instance() {
    let records = vec![filed("p", "A")];
    let (thg, tog) = graphs(&records);
    let layout = layout_hierarchy(&thg, &tog, LayoutParams::default()).unwrap();
    let params = TopographyParams {
        width: 65,
        height: 65,
        ..TopographyParams::default()
    };
    let g = elevation_grid(&layout, &thg, &tog, &params);
    assert_eq!(g.max(), 1.0);
    let (col, row) = g.argmax();
    let (x, y) = g.grid_to_world(col as f64, row as f64);
    let inst = layout.per_instance["p::A"];
    assert!((x - inst.x).abs() < 1e-9 && (y - inst.y).abs() < 1e-9);
    // Lattice corners lie outside the root circle.
    assert_eq!(g.at(0, 0), 0.0);
    assert_eq!(g.at(64, 64), 0.0);
    assert!(g.values.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn denser_topic_has_higher_peak() {
    let mut records: Vec<EntityRecord> = (0..10).map(|i| filed(&format!("a{i}"), "X/A")).collect();
    records.extend((0..2).map(|i| filed(&format!("b{i}"), "X/B")));
    let (thg, tog) = graphs(&records);
    let mut layout = layout_hierarchy(&thg, &tog, LayoutParams::default()).unwrap();
    // Same-size leaves, side by side; instances evenly spread on a small ring.
    layout.per_topic.insert("X/A".into(), Circle::new(-6.0, 0.0, 5.0));
    layout.per_topic.insert("X/B".into(), Circle::new(6.0, 0.0, 5.0));
    layout.per_topic.insert("X".into(), Circle::new(0.0, 0.0, 12.0));
    layout.per_topic.insert("/".into(), Circle::new(0.0, 0.0, 13.0));
    layout.world_radius = 13.0;
    for (centre, prefix, n) in [(-6.0, "a", 10), (6.0, "b", 2)] {
        for i in 0..n {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let topic = if prefix == "a" { "X/A" } else { "X/B" };
            layout.per_instance.insert(
                format!("{prefix}{i}::{topic}"),
                Circle::new(centre + 1.5 * t.cos(), 1.5 * t.sin(), 1.0),
            );
        }
    }
    let params = TopographyParams {
        width: 129,
        height: 129,
        ..TopographyParams::default()
    };
    let g = elevation_grid(&layout, &thg, &tog, &params);
    let peak_in = |c: Circle| {
        let mut best: f64 = 0.0;
        for row in 0..g.height {
            for col in 0..g.width {
                let (x, y) = g.grid_to_world(col as f64, row as f64);
                if c.contains_point(x, y) {
                    best = best.max(g.at(col, row));
                }
            }
        }
        best
    };
    let (a, b) = (peak_in(layout.per_topic["X/A"]), peak_in(layout.per_topic["X/B"]));
    assert!(a > b, "{a} <= {b}");
}

proptest! {
    #[test]
    fn contours_reinterpolate_to_iso(seed in 0u64..500, iso in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let values: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let grid = ElevationGrid::new(w, h, 1.0, values.clone());
        for line in march(&values, w, h, iso) {
            for p in &line.points {
                prop_assert!((grid.sample(p[0], p[1]) - iso).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn colour_scale_examples() {
    let s = ColorScale::default();
    assert!(s.is_valid());
    assert_eq!(colorize(0.0, &s).unwrap(), [18, 58, 112]);
    assert_eq!(colorize(0.05, &s).unwrap(), [206, 228, 168]);
    assert_eq!(colorize(1.0, &s).unwrap(), [250, 250, 248]);
    assert!(colorize(-0.01, &s).is_err());
    assert!(colorize(1.01, &s).is_err());
    let mut broken = s.clone();
    broken.land.reverse();
    assert!(!broken.is_valid());
}
