//! Elevation field, marching-squares contours, colour ramp and SVG export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::layout::{Circle, LayoutTree};
use crate::thg::{TopicHierarchy, ROOT_ID};
use crate::tog::OccupancyGraph;

pub const DEFAULT_GRID: usize = 512;
/// Kernel contributions beyond this many bandwidths are dropped (< 2e-8).
const KERNEL_CUTOFF: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopographyError {
    #[error("elevation {0} outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopographyParams {
    pub width: usize,
    pub height: usize,
    /// Gaussian kernel bandwidth in layout units.
    pub bandwidth: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl TopographyParams {
    pub fn for_entity_radius(entity_radius: f64) -> Self {
        TopographyParams {
            width: DEFAULT_GRID,
            height: DEFAULT_GRID,
            bandwidth: 1.5 * entity_radius,
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

impl Default for TopographyParams {
    fn default() -> Self {
        Self::for_entity_radius(crate::layout::DEFAULT_ENTITY_RADIUS)
    }
}

/// Row-major samples on a regular lattice over `[-R, R]²`; row 0 is `y = -R`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ElevationGrid {
    pub width: usize,
    pub height: usize,
    pub world_radius: f64,
    pub values: Vec<f64>,
}

impl ElevationGrid {
    pub fn new(width: usize, height: usize, world_radius: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "grid size mismatch");
        ElevationGrid {
            width,
            height,
            world_radius,
            values,
        }
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    fn step(&self) -> (f64, f64) {
        let span = 2.0 * self.world_radius;
        (
            span / (self.width.max(2) - 1) as f64,
            span / (self.height.max(2) - 1) as f64,
        )
    }

    pub fn grid_to_world(&self, gx: f64, gy: f64) -> (f64, f64) {
        let (sx, sy) = self.step();
        (-self.world_radius + gx * sx, -self.world_radius + gy * sy)
    }

    pub fn world_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.step();
        ((x + self.world_radius) / sx, (y + self.world_radius) / sy)
    }

    /// Bilinear interpolation at fractional grid coordinates.
    pub fn sample(&self, gx: f64, gy: f64) -> f64 {
        let i = (gx.floor() as usize).min(self.width - 2);
        let j = (gy.floor() as usize).min(self.height - 2);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let v00 = self.at(i, j);
        let v10 = self.at(i + 1, j);
        let v01 = self.at(i, j + 1);
        let v11 = self.at(i + 1, j + 1);
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

struct TopicDisk {
    circle: Circle,
    children: Vec<usize>,
}

/// `E = α·nest/maxDepth + β·kde/max(kde)`, zero outside every top-level
/// topic, then scaled so the maximum is 1.
pub fn elevation_grid(
    layout: &LayoutTree,
    thg: &TopicHierarchy,
    tog: &OccupancyGraph,
    params: &TopographyParams,
) -> ElevationGrid {
    let (w, h) = (params.width.max(2), params.height.max(2));
    let radius = if layout.world_radius > 0.0 { layout.world_radius } else { 1.0 };
    let mut grid = ElevationGrid::new(w, h, radius, vec![0.0; w * h]);
    if thg.root().is_none() {
        return grid;
    }

    // Flattened topic tree for containment descent.
    let mut disks: Vec<TopicDisk> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for node in thg.preorder() {
        index.insert(node.id.as_str(), disks.len());
        disks.push(TopicDisk {
            circle: layout.per_topic.get(&node.id).copied().unwrap_or(Circle::new(0.0, 0.0, 0.0)),
            children: Vec::new(),
        });
    }
    for node in thg.nodes.values() {
        let parent = index[node.id.as_str()];
        disks[parent].children = node.children.iter().map(|c| index[c.as_str()]).collect();
    }
    let root = index[ROOT_ID];

    let mut points: Vec<(f64, f64)> = tog
        .level(thg.max_depth)
        .map(|l| {
            l.instances
                .iter()
                .filter_map(|i| layout.per_instance.get(&i.instance_id).map(|c| (c.x, c.y)))
                .collect()
        })
        .unwrap_or_default();
    points.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));

    let bw = params.bandwidth.max(f64::MIN_POSITIVE);
    let reach = KERNEL_CUTOFF * bw;
    let inv = 1.0 / (2.0 * bw * bw);
    let (sx, _) = grid.step();
    let depth_norm = if thg.max_depth > 0 { thg.max_depth as f64 } else { 1.0 };

    // Nesting depth and kernel density per lattice point.
    let mut nest = vec![0.0f64; w * h];
    let mut kde = vec![0.0f64; w * h];
    let template = grid.clone();
    nest.par_chunks_mut(w)
        .zip(kde.par_chunks_mut(w))
        .enumerate()
        .for_each(|(row, (nest_row, kde_row))| {
            let (_, y) = template.grid_to_world(0.0, row as f64);
            for (col, slot) in nest_row.iter_mut().enumerate() {
                let (x, _) = template.grid_to_world(col as f64, row as f64);
                let mut depth = 0usize;
                let mut current = root;
                'descend: loop {
                    for &child in &disks[current].children {
                        if disks[child].circle.contains_point(x, y) {
                            depth += 1;
                            current = child;
                            continue 'descend;
                        }
                    }
                    break;
                }
                *slot = depth as f64;
            }
            let lo = points.partition_point(|p| p.1 < y - reach);
            let hi = points.partition_point(|p| p.1 <= y + reach);
            for &(px, py) in &points[lo..hi] {
                let dy2 = (py - y) * (py - y);
                let (gx, _) = template.world_to_grid(px, py);
                let span = reach / sx;
                let c0 = (gx - span).floor().max(0.0) as usize;
                let c1 = ((gx + span).ceil().max(0.0) as usize).min(w - 1);
                for (col, slot) in kde_row.iter_mut().enumerate().take(c1 + 1).skip(c0) {
                    let (x, _) = template.grid_to_world(col as f64, row as f64);
                    let d2 = (px - x) * (px - x) + dy2;
                    if d2 <= reach * reach {
                        *slot += (-d2 * inv).exp();
                    }
                }
            }
        });

    let kde_max = kde.iter().copied().fold(0.0, f64::max);
    for (i, v) in grid.values.iter_mut().enumerate() {
        if nest[i] == 0.0 {
            continue;
        }
        let density = if kde_max > 0.0 { kde[i] / kde_max } else { 0.0 };
        *v = params.alpha * nest[i] / depth_norm + params.beta * density;
    }
    let max = grid.max();
    if max > 0.0 {
        for v in &mut grid.values {
            *v = (*v / max).clamp(0.0, 1.0);
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    /// When closed the last point connects back to the first (not repeated).
    pub closed: bool,
}

impl Polyline {
    /// Consecutive vertex pairs, including the closing pair.
    pub fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let mut out: Vec<_> = self.points.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed && self.points.len() > 2 {
            out.push((self.points[self.points.len() - 1], self.points[0]));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub iso_levels: Vec<f64>,
    /// One list of polylines per iso level, in world coordinates.
    pub polylines: Vec<Vec<Polyline>>,
}

pub fn default_iso_levels() -> Vec<f64> {
    (0..10).map(|i| (2 * i + 1) as f64 / 20.0).collect()
}

/// Edge identifiers: horizontal edges first, then vertical.
struct Edges {
    w: usize,
    h: usize,
}

impl Edges {
    fn horizontal(&self, i: usize, j: usize) -> usize {
        j * (self.w - 1) + i
    }

    fn vertical(&self, i: usize, j: usize) -> usize {
        self.h * (self.w - 1) + j * self.w + i
    }

    /// The two lattice points an edge joins, in canonical order.
    fn endpoints(&self, id: usize) -> ((usize, usize), (usize, usize)) {
        let hcount = self.h * (self.w - 1);
        if id < hcount {
            let (i, j) = (id % (self.w - 1), id / (self.w - 1));
            ((i, j), (i + 1, j))
        } else {
            let v = id - hcount;
            let (i, j) = (v % self.w, v / self.w);
            ((i, j), (i, j + 1))
        }
    }
}

// Segment table by case (bit 0 = bottom-left, 1 = bottom-right,
// 2 = top-right, 3 = top-left). Edge slots: 0 bottom, 1 right, 2 top, 3 left.
const BOTTOM: usize = 0;
const RIGHT: usize = 1;
const TOP: usize = 2;
const LEFT: usize = 3;

fn cell_segments(case: u8, centre_above: bool) -> &'static [(usize, usize)] {
    match case {
        0 | 15 => &[],
        1 | 14 => &[(LEFT, BOTTOM)],
        2 | 13 => &[(BOTTOM, RIGHT)],
        3 | 12 => &[(LEFT, RIGHT)],
        4 | 11 => &[(RIGHT, TOP)],
        6 | 9 => &[(BOTTOM, TOP)],
        7 | 8 => &[(TOP, LEFT)],
        5 if centre_above => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        5 => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 if centre_above => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 => &[(BOTTOM, RIGHT), (TOP, LEFT)],
        _ => unreachable!("4-bit case"),
    }
}

/// Marching squares on a row-major lattice; output in lattice coordinates
/// (x = column, y = row). A corner counts as above when `v >= iso`.
pub fn march(values: &[f64], width: usize, height: usize, iso: f64) -> Vec<Polyline> {
    if width < 2 || height < 2 {
        return Vec::new();
    }
    let at = |i: usize, j: usize| values[j * width + i];
    let edges = Edges { w: width, h: height };
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for j in 0..height - 1 {
        for i in 0..width - 1 {
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let case = corners
                .iter()
                .enumerate()
                .fold(0u8, |acc, (bit, &v)| if v >= iso { acc | (1 << bit) } else { acc });
            if case == 0 || case == 15 {
                continue;
            }
            let centre_above = corners.iter().sum::<f64>() / 4.0 >= iso;
            let slot = [
                edges.horizontal(i, j),
                edges.vertical(i + 1, j),
                edges.horizontal(i, j + 1),
                edges.vertical(i, j),
            ];
            for &(p, q) in cell_segments(case, centre_above) {
                adjacency.entry(slot[p]).or_default().push(slot[q]);
                adjacency.entry(slot[q]).or_default().push(slot[p]);
            }
        }
    }

    let crossing = |id: usize| -> [f64; 2] {
        let ((i0, j0), (i1, j1)) = edges.endpoints(id);
        let (v0, v1) = (at(i0, j0), at(i1, j1));
        let t = (iso - v0) / (v1 - v0);
        [i0 as f64 + t * (i1 - i0) as f64, j0 as f64 + t * (j1 - j0) as f64]
    };

    let mut visited: HashMap<usize, bool> = adjacency.keys().map(|&k| (k, false)).collect();
    let mut out = Vec::new();
    let walk = |start: usize, visited: &mut HashMap<usize, bool>| -> Vec<usize> {
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = adjacency[&cur].iter().copied().find(|n| !visited[n]);
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    chain.push(n);
                    cur = n;
                }
                None => break,
            }
        }
        chain
    };
    let starts: Vec<usize> = adjacency
        .iter()
        .filter(|(_, n)| n.len() == 1)
        .map(|(&k, _)| k)
        .collect();
    for s in starts {
        if !visited[&s] {
            let chain = walk(s, &mut visited);
            out.push(Polyline {
                points: chain.into_iter().map(crossing).collect(),
                closed: false,
            });
        }
    }
    let rest: Vec<usize> = adjacency.keys().copied().collect();
    for s in rest {
        if !visited[&s] {
            let chain = walk(s, &mut visited);
            out.push(Polyline {
                points: chain.into_iter().map(crossing).collect(),
                closed: true,
            });
        }
    }
    out
}

/// Is a lattice-space point on the outer boundary of a `width × height` lattice?
pub fn on_lattice_boundary(p: [f64; 2], width: usize, height: usize) -> bool {
    p[0] == 0.0 || p[1] == 0.0 || p[0] == (width - 1) as f64 || p[1] == (height - 1) as f64
}

pub fn extract_contours(grid: &ElevationGrid, iso_levels: &[f64]) -> ContourSet {
    let mut levels = iso_levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let polylines = levels
        .par_iter()
        .map(|&iso| {
            march(&grid.values, grid.width, grid.height, iso)
                .into_iter()
                .map(|mut line| {
                    for p in &mut line.points {
                        let (x, y) = grid.grid_to_world(p[0], p[1]);
                        *p = [x, y];
                    }
                    line
                })
                .collect()
        })
        .collect();
    ContourSet {
        iso_levels: levels,
        polylines,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorStop {
    pub at: f64,
    pub rgb: [u8; 3],
}

/// Water ramp below `sea_level`, land ramp from `sea_level` up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub sea_level: f64,
    pub water: Vec<ColorStop>,
    pub land: Vec<ColorStop>,
}

impl Default for ColorScale {
    fn default() -> Self {
        let stop = |at, rgb| ColorStop { at, rgb };
        ColorScale {
            sea_level: 0.05,
            water: vec![stop(0.0, [18, 58, 112]), stop(0.05, [92, 156, 206])],
            land: vec![
                stop(0.05, [206, 228, 168]),
                stop(0.3, [132, 184, 100]),
                stop(0.6, [200, 176, 112]),
                stop(0.85, [150, 116, 84]),
                stop(1.0, [250, 250, 248]),
            ],
        }
    }
}

impl ColorScale {
    pub fn is_valid(&self) -> bool {
        let ascending = |s: &[ColorStop]| s.windows(2).all(|w| w[0].at < w[1].at);
        !self.water.is_empty()
            && !self.land.is_empty()
            && ascending(&self.water)
            && ascending(&self.land)
            && self.water.last().map(|s| s.at) == Some(self.sea_level)
            && self.land.first().map(|s| s.at) == Some(self.sea_level)
    }
}

fn ramp(stops: &[ColorStop], e: f64) -> [u8; 3] {
    let first = stops[0];
    if e <= first.at {
        return first.rgb;
    }
    for w in stops.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if e <= hi.at {
            let t = (e - lo.at) / (hi.at - lo.at);
            return std::array::from_fn(|ch| {
                let v = lo.rgb[ch] as f64 + t * (hi.rgb[ch] as f64 - lo.rgb[ch] as f64);
                v.round().clamp(0.0, 255.0) as u8
            });
        }
    }
    stops[stops.len() - 1].rgb
}

pub fn colorize(elevation: f64, scale: &ColorScale) -> Result<[u8; 3], TopographyError> {
    if !(0.0..=1.0).contains(&elevation) {
        return Err(TopographyError::OutOfRange(elevation));
    }
    if elevation < scale.sea_level {
        Ok(ramp(&scale.water, elevation))
    } else {
        Ok(ramp(&scale.land, elevation))
    }
}

fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Standalone SVG: water background, filled contour lines, topic circles
/// down to `max_level`. One `<path>` per polyline.
pub fn render_svg(
    layout: &LayoutTree,
    thg: &TopicHierarchy,
    contours: &ContourSet,
    scale: &ColorScale,
    max_level: u32,
) -> String {
    let r = if layout.world_radius > 0.0 { layout.world_radius } else { 1.0 };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        -r,
        -r,
        2.0 * r,
        2.0 * r
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
        -r,
        -r,
        2.0 * r,
        2.0 * r,
        hex(scale.water[0].rgb)
    );
    // Flip y so north is up.
    let _ = writeln!(svg, r#"<g transform="scale(1,-1)">"#);
    for (iso, lines) in contours.iso_levels.iter().zip(&contours.polylines) {
        let colour = hex(colorize(iso.clamp(0.0, 1.0), scale).unwrap_or(scale.water[0].rgb));
        for line in lines {
            let mut d = String::new();
            for (i, p) in line.points.iter().enumerate() {
                let _ = write!(d, "{}{:.3},{:.3} ", if i == 0 { 'M' } else { 'L' }, p[0], p[1]);
            }
            if line.closed {
                d.push('Z');
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="{:.3}"/>"#,
                d.trim_end(),
                r / 400.0
            );
        }
    }
    for node in thg.preorder() {
        if node.level == 0 || node.level > max_level {
            continue;
        }
        if let Some(c) = layout.per_topic.get(&node.id) {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="#33415588" stroke-width="{:.3}"/>"##,
                c.x,
                c.y,
                c.r,
                r / 600.0 * (max_level + 1 - node.level) as f64
            );
        }
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
