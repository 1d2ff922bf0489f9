//! Nested circle-packing layout of topics and entity instances, plus the
//! lon/lat/alt view codec used for shareable map URLs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::thg::{TopicHierarchy, ROOT_ID};
use crate::tog::OccupancyGraph;
use crate::TopicId;

pub const DEFAULT_PADDING: f64 = 0.08;
pub const DEFAULT_ENTITY_RADIUS: f64 = 1.0;
pub const DEFAULT_ENCLOSE_SEED: u64 = 0x6b6d_6170;

/// Relative slack allowed when testing sibling overlap during packing.
const OVERLAP_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("no circles given")]
    EmptyInput,
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Circle {
    pub const fn new(x: f64, y: f64, r: f64) -> Self {
        Circle { x, y, r }
    }

    pub fn distance(&self, other: &Circle) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `other` lies inside `self`, allowing `tol · self.r` of slack.
    pub fn contains(&self, other: &Circle, tol: f64) -> bool {
        self.distance(other) + other.r <= self.r + tol * self.r
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.x, y - self.y);
        dx * dx + dy * dy <= self.r * self.r
    }

    /// Overlap beyond `tol · max(r1, r2)`.
    pub fn overlaps(&self, other: &Circle, tol: f64) -> bool {
        self.distance(other) < self.r + other.r - tol * self.r.max(other.r)
    }
}

fn validate_radius(r: f64) -> Result<(), LayoutError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(LayoutError::InvalidRadius(r))
    }
}

/// Position for a circle of radius `r` tangent to both `b` and `a`.
fn place(b: &Circle, a: &Circle, r: f64) -> (f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let d2 = dx * dx + dy * dy;
    if d2 > 0.0 {
        let a2 = (a.r + r) * (a.r + r);
        let b2 = (b.r + r) * (b.r + r);
        if a2 > b2 {
            let x = (d2 + b2 - a2) / (2.0 * d2);
            let y = (b2 / d2 - x * x).max(0.0).sqrt();
            (b.x - x * dx - y * dy, b.y - x * dy + y * dx)
        } else {
            let x = (d2 + a2 - b2) / (2.0 * d2);
            let y = (a2 / d2 - x * x).max(0.0).sqrt();
            (a.x + x * dx - y * dy, a.y + x * dy + y * dx)
        }
    } else {
        (a.x + r, a.y)
    }
}

fn intersects(a: &Circle, b: &Circle) -> bool {
    let dr = a.r + b.r - OVERLAP_EPS * a.r.max(b.r);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dr > 0.0 && dr * dr > dx * dx + dy * dy
}

/// Front-chain packing. Output order matches input; circles are not
/// recentred (the first two sit astride the origin).
pub fn pack_siblings(radii: &[f64]) -> Result<Vec<Circle>, LayoutError> {
    if radii.is_empty() {
        return Err(LayoutError::EmptyInput);
    }
    for &r in radii {
        validate_radius(r)?;
    }
    let n = radii.len();
    let mut c: Vec<Circle> = radii.iter().map(|&r| Circle::new(0.0, 0.0, r)).collect();
    if n == 1 {
        return Ok(c);
    }
    c[0].x = -c[1].r;
    c[1].x = c[0].r;
    if n == 2 {
        return Ok(c);
    }
    let (x, y) = place(&c[1], &c[0], c[2].r);
    c[2].x = x;
    c[2].y = y;

    // Circular doubly-linked front chain over indices.
    let mut next = vec![0usize; n];
    let mut prev = vec![0usize; n];
    let (mut a, mut b) = (0usize, 1usize);
    next[0] = 1;
    prev[2] = 1;
    next[1] = 2;
    prev[0] = 2;
    next[2] = 0;
    prev[1] = 0;

    // Squared distance from the origin of the weighted midpoint of a front pair.
    let score = |c: &[Circle], next: &[usize], i: usize| {
        let (p, q) = (&c[i], &c[next[i]]);
        let ab = p.r + q.r;
        let dx = (p.x * q.r + q.x * p.r) / ab;
        let dy = (p.y * q.r + q.y * p.r) / ab;
        dx * dx + dy * dy
    };

    let mut i = 3;
    'pack: while i < n {
        let (x, y) = place(&c[a], &c[b], c[i].r);
        c[i].x = x;
        c[i].y = y;

        // Closest intersecting front circle, measured along the chain.
        let (mut j, mut k) = (next[b], prev[a]);
        let (mut sj, mut sk) = (c[b].r, c[a].r);
        loop {
            if sj <= sk {
                if intersects(&c[j], &c[i]) {
                    b = j;
                    next[a] = b;
                    prev[b] = a;
                    continue 'pack;
                }
                sj += c[j].r;
                j = next[j];
            } else {
                if intersects(&c[k], &c[i]) {
                    a = k;
                    next[a] = b;
                    prev[b] = a;
                    continue 'pack;
                }
                sk += c[k].r;
                k = prev[k];
            }
            if j == next[k] {
                break;
            }
        }

        prev[i] = a;
        next[i] = b;
        next[a] = i;
        prev[b] = i;
        b = i;

        let mut best = score(&c, &next, a);
        let mut cur = i;
        loop {
            cur = next[cur];
            if cur == b {
                break;
            }
            let s = score(&c, &next, cur);
            if s < best {
                a = cur;
                best = s;
            }
        }
        b = next[a];
        i += 1;
    }
    Ok(c)
}

fn encloses_weak(a: &Circle, b: &Circle) -> bool {
    let dr = a.r - b.r + a.r.max(b.r).max(1.0) * 1e-9;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dr > 0.0 && dr * dr > dx * dx + dy * dy
}

fn encloses_not(a: &Circle, b: &Circle) -> bool {
    let dr = a.r - b.r;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dr < 0.0 || dr * dr < dx * dx + dy * dy
}

fn encloses_weak_all(a: &Circle, basis: &[Circle]) -> bool {
    basis.iter().all(|b| encloses_weak(a, b))
}

fn enclose_two(a: &Circle, b: &Circle) -> Circle {
    let (x21, y21, r21) = (b.x - a.x, b.y - a.y, b.r - a.r);
    let l = x21.hypot(y21);
    if l == 0.0 {
        return if a.r >= b.r { *a } else { *b };
    }
    Circle::new(
        (a.x + b.x + x21 / l * r21) / 2.0,
        (a.y + b.y + y21 / l * r21) / 2.0,
        (l + a.r + b.r) / 2.0,
    )
}

fn enclose_three(a: &Circle, b: &Circle, c: &Circle) -> Circle {
    let (x1, y1, r1) = (a.x, a.y, a.r);
    let (x2, y2, r2) = (b.x, b.y, b.r);
    let (x3, y3, r3) = (c.x, c.y, c.r);
    let a2 = x1 - x2;
    let a3 = x1 - x3;
    let b2 = y1 - y2;
    let b3 = y1 - y3;
    let c2 = r2 - r1;
    let c3 = r3 - r1;
    let d1 = x1 * x1 + y1 * y1 - r1 * r1;
    let d2 = d1 - x2 * x2 - y2 * y2 + r2 * r2;
    let d3 = d1 - x3 * x3 - y3 * y3 + r3 * r3;
    let ab = a3 * b2 - a2 * b3;
    let xa = (b2 * d3 - b3 * d2) / (ab * 2.0) - x1;
    let xb = (b3 * c2 - b2 * c3) / ab;
    let ya = (a3 * d2 - a2 * d3) / (ab * 2.0) - y1;
    let yb = (a2 * c3 - a3 * c2) / ab;
    let qa = xb * xb + yb * yb - 1.0;
    let qb = 2.0 * (r1 + xa * xb + ya * yb);
    let qc = xa * xa + ya * ya - r1 * r1;
    let r = -(if qa.abs() > 1e-6 {
        (qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
    } else {
        qc / qb
    });
    Circle::new(x1 + xa + xb * r, y1 + ya + yb * r, r)
}

fn enclose_basis(basis: &[Circle]) -> Circle {
    match basis {
        [a] => *a,
        [a, b] => enclose_two(a, b),
        [a, b, c] => enclose_three(a, b, c),
        _ => bounding_circle(basis),
    }
}

/// Centroid-centred circle containing everything; used only when the exact
/// basis update fails numerically.
fn bounding_circle(circles: &[Circle]) -> Circle {
    let n = circles.len() as f64;
    let cx = circles.iter().map(|c| c.x).sum::<f64>() / n;
    let cy = circles.iter().map(|c| c.y).sum::<f64>() / n;
    let r = circles
        .iter()
        .map(|c| (c.x - cx).hypot(c.y - cy) + c.r)
        .fold(0.0, f64::max);
    Circle::new(cx, cy, r)
}

fn extend_basis(basis: &[Circle], p: &Circle) -> Vec<Circle> {
    if encloses_weak_all(p, basis) {
        return vec![*p];
    }
    for b in basis {
        if encloses_not(p, b) && encloses_weak_all(&enclose_two(b, p), basis) {
            return vec![*b, *p];
        }
    }
    for i in 0..basis.len().saturating_sub(1) {
        for j in i + 1..basis.len() {
            let (bi, bj) = (&basis[i], &basis[j]);
            if encloses_not(&enclose_two(bi, bj), p)
                && encloses_not(&enclose_two(bi, p), bj)
                && encloses_not(&enclose_two(bj, p), bi)
                && encloses_weak_all(&enclose_three(bi, bj, p), basis)
            {
                return vec![*bi, *bj, *p];
            }
        }
    }
    let mut all = basis.to_vec();
    all.push(*p);
    all
}

/// Smallest circle enclosing all inputs (randomised incremental algorithm
/// with a fixed shuffle seed).
pub fn enclosing_circle(circles: &[Circle]) -> Result<Circle, LayoutError> {
    enclosing_circle_seeded(circles, DEFAULT_ENCLOSE_SEED)
}

pub fn enclosing_circle_seeded(circles: &[Circle], seed: u64) -> Result<Circle, LayoutError> {
    if circles.is_empty() {
        return Err(LayoutError::EmptyInput);
    }
    for c in circles {
        validate_radius(c.r)?;
    }
    let mut order = circles.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut basis: Vec<Circle> = Vec::new();
    let mut e: Option<Circle> = None;
    let mut i = 0;
    while i < order.len() {
        let p = &order[i];
        match e {
            Some(ref enc) if encloses_weak(enc, p) => i += 1,
            _ => {
                basis = extend_basis(&basis, p);
                e = Some(enclose_basis(&basis));
                i = 0;
            }
        }
    }
    Ok(e.expect("non-empty input"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutTree {
    pub per_topic: BTreeMap<TopicId, Circle>,
    pub per_instance: BTreeMap<String, Circle>,
    pub world_radius: f64,
    pub padding_ratio: f64,
    pub entity_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    pub padding_ratio: f64,
    pub entity_radius: f64,
    pub seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            padding_ratio: DEFAULT_PADDING,
            entity_radius: DEFAULT_ENTITY_RADIUS,
            seed: DEFAULT_ENCLOSE_SEED,
        }
    }
}

enum Item<'a> {
    Topic(&'a str),
    Instance(&'a str),
}

/// Pack circles of `radii` and return them recentred on their enclosing
/// circle, together with that circle's radius.
fn pack_centred(radii: &[f64], seed: u64) -> Result<(Vec<Circle>, f64), LayoutError> {
    let mut packed = pack_siblings(radii)?;
    let enc = enclosing_circle_seeded(&packed, seed)?;
    for c in &mut packed {
        c.x -= enc.x;
        c.y -= enc.y;
    }
    Ok((packed, enc.r))
}

/// Bottom-up nested packing: every topic packs its child topics and the
/// deepest-level instances that sit directly in it.
pub fn layout_hierarchy(thg: &TopicHierarchy, tog: &OccupancyGraph, params: LayoutParams) -> Result<LayoutTree, LayoutError> {
    validate_radius(params.entity_radius)?;
    let pad = 1.0 + params.padding_ratio.max(0.0);
    let mut tree = LayoutTree {
        padding_ratio: params.padding_ratio,
        entity_radius: params.entity_radius,
        ..LayoutTree::default()
    };
    if thg.root().is_none() {
        return Ok(tree);
    }
    let deepest = thg.max_depth;
    let mut residents: HashMap<&str, Vec<&str>> = HashMap::new();
    if let Some(level) = tog.level(deepest) {
        for inst in &level.instances {
            residents.entry(inst.topic_id.as_str()).or_default().push(inst.instance_id.as_str());
        }
    }

    let order = thg.preorder();
    let mut count: HashMap<&str, usize> = HashMap::new();
    for node in order.iter().rev() {
        let own = residents.get(node.id.as_str()).map_or(0, Vec::len);
        let below: usize = node.children.iter().map(|c| count[c.as_str()]).sum();
        count.insert(node.id.as_str(), own + below);
    }

    // Radii and offsets relative to the parent's centre.
    let mut radius: HashMap<&str, f64> = HashMap::new();
    let mut offset: HashMap<&str, (f64, f64)> = HashMap::new();
    let mut inst_offset: HashMap<&str, (&str, f64, f64)> = HashMap::new();
    for node in order.iter().rev() {
        let mut children: Vec<&str> = node.children.iter().map(String::as_str).collect();
        children.sort_by(|a, b| count[b].cmp(&count[a]).then(a.cmp(b)));
        let mut items: Vec<Item<'_>> = children.into_iter().map(Item::Topic).collect();
        if let Some(ids) = residents.get(node.id.as_str()) {
            let mut ids = ids.clone();
            ids.sort_unstable();
            items.extend(ids.into_iter().map(Item::Instance));
        }
        let inner = if items.is_empty() {
            params.entity_radius
        } else {
            let radii: Vec<f64> = items
                .iter()
                .map(|it| match it {
                    Item::Topic(t) => radius[t],
                    Item::Instance(_) => params.entity_radius,
                })
                .collect();
            let (packed, r) = pack_centred(&radii, params.seed)?;
            for (it, c) in items.iter().zip(&packed) {
                match it {
                    Item::Topic(t) => {
                        offset.insert(t, (c.x, c.y));
                    }
                    Item::Instance(id) => {
                        inst_offset.insert(id, (node.id.as_str(), c.x, c.y));
                    }
                }
            }
            r
        };
        radius.insert(node.id.as_str(), inner * pad);
    }

    for node in &order {
        let (x, y) = match node.parent.as_deref() {
            None => (0.0, 0.0),
            Some(p) => {
                let parent = tree.per_topic[p];
                let (dx, dy) = offset[node.id.as_str()];
                (parent.x + dx, parent.y + dy)
            }
        };
        tree.per_topic.insert(node.id.clone(), Circle::new(x, y, radius[node.id.as_str()]));
    }
    tree.world_radius = tree.per_topic[ROOT_ID].r;

    for (id, (topic, dx, dy)) in &inst_offset {
        let t = tree.per_topic[*topic];
        tree.per_instance
            .insert(id.to_string(), Circle::new(t.x + dx, t.y + dy, params.entity_radius));
    }

    place_shallow_instances(&mut tree, thg, tog, params, pad)?;
    Ok(tree)
}

/// Instances above the deepest level reuse the circle of the same entity's
/// deepest instance inside their topic's subtree. Those without one are
/// packed afresh inside their topic.
fn place_shallow_instances(
    tree: &mut LayoutTree,
    thg: &TopicHierarchy,
    tog: &OccupancyGraph,
    params: LayoutParams,
    pad: f64,
) -> Result<(), LayoutError> {
    let deepest = thg.max_depth;
    let mut deep_of: HashMap<&str, Vec<(&str, &str)>> = HashMap::new();
    if let Some(level) = tog.level(deepest) {
        for inst in &level.instances {
            deep_of
                .entry(inst.entity_id.as_str())
                .or_default()
                .push((inst.topic_id.as_str(), inst.instance_id.as_str()));
        }
    }
    for level in 1..deepest {
        let Some(lvl) = tog.level(level) else { continue };
        let mut orphans: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for inst in &lvl.instances {
            if tree.per_instance.contains_key(&inst.instance_id) {
                continue;
            }
            let t = inst.topic_id.as_str();
            let follow = deep_of
                .get(inst.entity_id.as_str())
                .into_iter()
                .flatten()
                .filter(|(topic, _)| *topic == t || thg.is_proper_ancestor(t, topic))
                .map(|(_, id)| *id)
                .min();
            match follow {
                Some(id) => {
                    let c = tree.per_instance[id];
                    tree.per_instance.insert(inst.instance_id.clone(), c);
                }
                None => orphans.entry(t).or_default().push(inst.instance_id.as_str()),
            }
        }
        for (topic, ids) in orphans {
            let host = tree.per_topic[topic];
            let radii = vec![params.entity_radius; ids.len()];
            let (packed, r) = pack_centred(&radii, params.seed)?;
            let scale = (host.r / pad / r).min(1.0);
            for (id, c) in ids.iter().zip(packed) {
                tree.per_instance.insert(
                    id.to_string(),
                    Circle::new(host.x + c.x * scale, host.y + c.y * scale, c.r * scale),
                );
            }
        }
    }
    Ok(())
}

impl LayoutTree {
    /// Geometric invariant violations: sibling overlap, child containment and
    /// instance containment, each at relative tolerance `tol`.
    pub fn violations(&self, thg: &TopicHierarchy, tog: &OccupancyGraph, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let deepest = tog.level(thg.max_depth);
        let mut residents: HashMap<&str, Vec<&Circle>> = HashMap::new();
        if let Some(level) = deepest {
            for inst in &level.instances {
                if let Some(c) = self.per_instance.get(&inst.instance_id) {
                    residents.entry(inst.topic_id.as_str()).or_default().push(c);
                }
            }
        }
        for node in thg.nodes.values() {
            let Some(parent) = self.per_topic.get(&node.id) else {
                out.push(format!("topic {} has no circle", node.id));
                continue;
            };
            let mut siblings: Vec<&Circle> = Vec::new();
            for child in &node.children {
                match self.per_topic.get(child) {
                    Some(c) => siblings.push(c),
                    None => out.push(format!("topic {child} has no circle")),
                }
            }
            siblings.extend(residents.get(node.id.as_str()).into_iter().flatten().copied());
            let shrunk = Circle::new(parent.x, parent.y, parent.r / (1.0 + self.padding_ratio.max(0.0)));
            for (i, a) in siblings.iter().enumerate() {
                if !shrunk.contains(a, tol) {
                    out.push(format!("child of {} escapes its padded circle", node.id));
                }
                for b in &siblings[i + 1..] {
                    if a.overlaps(b, tol) {
                        out.push(format!("siblings overlap inside {}", node.id));
                    }
                }
            }
        }
        for level in tog.levels.values() {
            for inst in &level.instances {
                match (self.per_instance.get(&inst.instance_id), self.per_topic.get(&inst.topic_id)) {
                    (Some(c), Some(t)) if t.contains(c, tol) => {}
                    (Some(_), Some(_)) => out.push(format!("instance {} escapes its topic", inst.instance_id)),
                    _ => out.push(format!("instance {} has no circle", inst.instance_id)),
                }
            }
        }
        out
    }

    /// Layout point → (lon, lat).
    pub fn to_lon_lat(&self, x: f64, y: f64) -> (f64, f64) {
        (180.0 * x / self.world_radius, 85.0 * y / self.world_radius)
    }

    pub fn from_lon_lat(&self, lon: f64, lat: f64) -> (f64, f64) {
        (lon * self.world_radius / 180.0, lat * self.world_radius / 85.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ViewError {
    #[error("malformed view fragment: {0}")]
    MalformedFragment(String),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
}

/// Camera position: longitude, latitude and normalised altitude (1 = whole world).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewState {
    pub lon: f64,
    pub lat: f64,
    pub alt: f64,
}

impl ViewState {
    pub fn new(lon: f64, lat: f64, alt: f64) -> Result<Self, ViewError> {
        let s = ViewState { lon, lat, alt };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        for (field, value, lo, hi) in [
            ("lon", self.lon, -180.0, 180.0),
            ("lat", self.lat, -85.0, 85.0),
            ("alt", self.alt, 0.0, 1.0),
        ] {
            if !value.is_finite() {
                return Err(ViewError::MalformedFragment(format!("{field} is not finite")));
            }
            if !(lo..=hi).contains(&value) {
                return Err(ViewError::OutOfRange { field, value });
            }
        }
        Ok(())
    }

    /// `lon=<f6>&lat=<f6>&alt=<f6>`.
    pub fn encode(&self) -> String {
        format!("lon={}&lat={}&alt={}", fixed6(self.lon), fixed6(self.lat), fixed6(self.alt))
    }

    pub fn decode(fragment: &str) -> Result<Self, ViewError> {
        let fragment = fragment.strip_prefix('#').unwrap_or(fragment);
        let mut fields: [Option<f64>; 3] = [None; 3];
        for part in fragment.split('&') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| ViewError::MalformedFragment(format!("missing '=' in {part:?}")))?;
            let slot = match key {
                "lon" => 0,
                "lat" => 1,
                "alt" => 2,
                other => return Err(ViewError::MalformedFragment(format!("unknown key {other:?}"))),
            };
            if fields[slot].is_some() {
                return Err(ViewError::MalformedFragment(format!("repeated key {key:?}")));
            }
            let v: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ViewError::MalformedFragment(format!("bad number {value:?} for {key}")))?;
            fields[slot] = Some(v);
        }
        match fields {
            [Some(lon), Some(lat), Some(alt)] => ViewState::new(lon, lat, alt),
            _ => Err(ViewError::MalformedFragment("lon, lat and alt are all required".into())),
        }
    }
}

impl fmt::Display for ViewState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for ViewState {
    type Err = ViewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewState::decode(s)
    }
}

/// Six decimals, never "-0.000000".
fn fixed6(v: f64) -> String {
    let rounded = (v * 1e6).round() / 1e6;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.6}")
}
