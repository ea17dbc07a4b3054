//! T-graphs: finite families of disjoint open segments whose endpoints tee
//! into other segments, except for a few roots on the outer boundary.
//!
//! The arrangement is cut into subsegments at every vertex. Subsegment `e`
//! owns darts `2e` (increasing segment parameter) and `2e + 1`; faces lie
//! on the right of their darts, as in [`crate::planarmap`]. The
//! unbounded face of a plane T-graph is split at the roots into `m` outer
//! faces, so the face list has `n + 1` entries.

use std::collections::{BTreeMap, VecDeque};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{rational_from_f64, Rational};
use crate::planarmap::{twin, Color, PlanarMap, RawEdge, RawMap, Surface};

pub type Dart = usize;

/// An open segment from `p` to `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p: [f64; 2],
    pub q: [f64; 2],
}

impl Segment {
    pub fn new(p: [f64; 2], q: [f64; 2]) -> Self {
        Segment { p, q }
    }

    pub fn direction(&self) -> [f64; 2] {
        [self.q[0] - self.p[0], self.q[1] - self.p[1]]
    }

    pub fn length(&self) -> f64 {
        let d = self.direction();
        d[0].hypot(d[1])
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        let d = self.direction();
        [self.p[0] + t * d[0], self.p[1] + t * d[1]]
    }

    fn translated(&self, k: [i64; 2]) -> Segment {
        let (x, y) = (k[0] as f64, k[1] as f64);
        Segment::new([self.p[0] + x, self.p[1] + y], [self.q[0] + x, self.q[1] + y])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    Plane,
    Torus,
}

/// The on-disk segment list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFile {
    pub ambient: Ambient,
    pub segments: Vec<Segment>,
}

impl SegmentFile {
    pub fn from_json(text: &str) -> Result<Self, TGraphError> {
        serde_json::from_str(text).map_err(|e| TGraphError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("segments serialize")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TGraphError {
    #[error("malformed segment file: {0}")]
    Parse(String),
    #[error("segment {0} has zero length")]
    Degenerate(usize),
    #[error("not a T-graph: {0}")]
    NotTGraph(String),
    #[error("segments {0} and {1} overlap or cross")]
    Overlapping(usize, usize),
    #[error("face {0} is not an outer face and cannot be the dual root")]
    BadDualRoot(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Root,
    /// Lies inside `segment`, at position `index` of that segment's chain.
    Interior { segment: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TVertex {
    pub pos: [f64; 2],
    pub kind: VertexKind,
}

/// A piece of a segment between consecutive vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct SubSegment {
    pub segment: usize,
    /// Position along the segment, counted from `p`.
    pub index: usize,
    pub from: usize,
    pub to: usize,
    /// Exact parameter length.
    pub dt: Rational,
    pub length: f64,
    /// Lattice translation from `from` to `to` (always zero in the plane).
    pub shift: [i64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TFace {
    pub darts: Vec<Dart>,
    pub outer: bool,
}

#[derive(Clone, Debug)]
pub struct TGraph {
    ambient: Ambient,
    segments: Vec<Segment>,
    eps: f64,
    vertices: Vec<TVertex>,
    /// Vertex at each chain position of every segment, endpoints included.
    chains: Vec<Vec<usize>>,
    chain_t: Vec<Vec<Rational>>,
    /// Subsegment ids along every segment.
    seg_edges: Vec<Vec<usize>>,
    edges: Vec<SubSegment>,
    rotation: Vec<Vec<Dart>>,
    next_ccw: Vec<Dart>,
    faces: Vec<TFace>,
    face_of: Vec<usize>,
    /// Roots in clockwise order along the outer boundary.
    roots: Vec<usize>,
    /// Outer faces in clockwise order; `outer_faces[k]` lies between
    /// `roots[k]` and `roots[k + 1]`.
    outer_faces: Vec<usize>,
    stability: f64,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Parameter of `x` on the closed segment, if within `eps` of it.
fn closed_param(x: [f64; 2], s: &Segment, eps: f64) -> Option<f64> {
    let d = s.direction();
    let len = norm(d);
    let t = dot(sub(x, s.p), d) / (len * len);
    if t * len < -eps || (1.0 - t) * len < -eps {
        return None;
    }
    (norm(sub(x, s.at(t))) < eps).then_some(t)
}

fn open_param(x: [f64; 2], s: &Segment, eps: f64) -> Option<f64> {
    let len = s.length();
    closed_param(x, s, eps).filter(|t| t * len > eps && (1.0 - t) * len > eps)
}

/// True when the open segments share a point or a collinear stretch.
fn interiors_meet(a: &Segment, b: &Segment, eps: f64) -> bool {
    let (da, db) = (a.direction(), b.direction());
    let (la, lb) = (norm(da), norm(db));
    let c = cross(da, db);
    if c.abs() <= 1e-12 * la * lb {
        if cross(da, sub(b.p, a.p)).abs() / la >= eps {
            return false;
        }
        let t0 = dot(sub(b.p, a.p), da) / la;
        let t1 = dot(sub(b.q, a.p), da) / la;
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        return hi.min(la) - lo.max(0.0) > eps;
    }
    let w = sub(b.p, a.p);
    let ta = cross(w, db) / c;
    let tb = cross(w, da) / c;
    ta * la > eps && (1.0 - ta) * la > eps && tb * lb > eps && (1.0 - tb) * lb > eps
}

fn angle(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0])
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Integer translates of `b` whose bounding box can meet that of `a`.
fn translates(a: &Segment, b: &Segment, ambient: Ambient) -> Vec<[i64; 2]> {
    if ambient == Ambient::Plane {
        return vec![[0, 0]];
    }
    let range = |k: usize| {
        let (a0, a1) = (a.p[k].min(a.q[k]), a.p[k].max(a.q[k]));
        let (b0, b1) = (b.p[k].min(b.q[k]), b.p[k].max(b.q[k]));
        ((a0 - b1).floor() as i64 - 1)..=((a1 - b0).ceil() as i64 + 1)
    };
    let mut out = Vec::new();
    for x in range(0) {
        for y in range(1) {
            out.push([x, y]);
        }
    }
    out
}

fn wrap(x: [f64; 2]) -> [f64; 2] {
    [x[0].rem_euclid(1.0), x[1].rem_euclid(1.0)]
}

impl TGraph {
    /// Builds and validates a T-graph. Torus segments live in the unit
    /// square with wraparound, so a segment may be longer than the square.
    pub fn build(segments: &[Segment], ambient: Ambient) -> Result<TGraph, TGraphError> {
        let n = segments.len();
        if n == 0 {
            return Err(TGraphError::NotTGraph("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.length() > 0.0) || !s.p.iter().chain(&s.q).all(|c| c.is_finite()) {
                return Err(TGraphError::Degenerate(i));
            }
        }
        let diameter = {
            let pts: Vec<[f64; 2]> = segments.iter().flat_map(|s| [s.p, s.q]).collect();
            let min_x = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let max_x = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let min_y = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let max_y = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            (max_x - min_x).hypot(max_y - min_y).max(f64::MIN_POSITIVE)
        };
        let eps = 1e-9 * diameter;

        for i in 0..n {
            for j in i..n {
                for k in translates(&segments[i], &segments[j], ambient) {
                    if i == j && k == [0, 0] {
                        continue;
                    }
                    if interiors_meet(&segments[i], &segments[j].translated(k), eps) {
                        return Err(TGraphError::Overlapping(i, j));
                    }
                }
            }
        }

        // Merge endpoints into vertices.
        let home = |x: [f64; 2]| match ambient {
            Ambient::Plane => x,
            Ambient::Torus => wrap(x),
        };
        let ends: Vec<[f64; 2]> = segments.iter().flat_map(|s| [home(s.p), home(s.q)]).collect();
        let close = |a: [f64; 2], b: [f64; 2]| {
            let mut d = sub(a, b);
            if ambient == Ambient::Torus {
                d = [d[0] - d[0].round(), d[1] - d[1].round()];
            }
            norm(d) < eps
        };
        let mut uf = UnionFind::new(ends.len());
        for a in 0..ends.len() {
            for b in a + 1..ends.len() {
                if close(ends[a], ends[b]) {
                    uf.union(a, b);
                }
            }
        }
        let mut vertex_of_end = vec![usize::MAX; ends.len()];
        let mut positions: Vec<[f64; 2]> = Vec::new();
        for a in 0..ends.len() {
            let r = uf.find(a);
            if vertex_of_end[r] == usize::MAX {
                vertex_of_end[r] = positions.len();
                positions.push(ends[r]);
            }
            vertex_of_end[a] = vertex_of_end[r];
        }

        // Place every vertex on the segments that contain it.
        let mut on_segment: Vec<Vec<(f64, usize, [i64; 2])>> = vec![Vec::new(); n];
        let mut interior_of: Vec<Vec<usize>> = vec![Vec::new(); positions.len()];
        for (v, &x) in positions.iter().enumerate() {
            for (j, s) in segments.iter().enumerate() {
                let point = Segment::new(x, x);
                for k in translates(s, &point, ambient) {
                    let y = [x[0] + k[0] as f64, x[1] + k[1] as f64];
                    if let Some(t) = open_param(y, s, eps) {
                        on_segment[j].push((t, v, k));
                        interior_of[v].push(j);
                    }
                }
            }
            if interior_of[v].len() > 1 {
                let (a, b) = (interior_of[v][0], interior_of[v][1]);
                return Err(TGraphError::Overlapping(a, b));
            }
        }
        for (j, s) in segments.iter().enumerate() {
            let shift = |x: [f64; 2]| {
                let h = home(x);
                [(x[0] - h[0]).round() as i64, (x[1] - h[1]).round() as i64]
            };
            on_segment[j].push((0.0, vertex_of_end[2 * j], shift(s.p)));
            on_segment[j].push((1.0, vertex_of_end[2 * j + 1], shift(s.q)));
            on_segment[j].sort_by(|a, b| a.0.total_cmp(&b.0));
        }

        let mut vertices: Vec<TVertex> = positions
            .iter()
            .map(|&pos| TVertex {
                pos,
                kind: VertexKind::Root,
            })
            .collect();
        let mut chains = Vec::with_capacity(n);
        let mut chain_t = Vec::with_capacity(n);
        let mut seg_edges = Vec::with_capacity(n);
        let mut edges: Vec<SubSegment> = Vec::new();
        for (j, s) in segments.iter().enumerate() {
            let d = s.direction();
            let (dx, dy) = (rational_from_f64(d[0]), rational_from_f64(d[1]));
            let dd = &dx * &dx + &dy * &dy;
            let (px, py) = (rational_from_f64(s.p[0]), rational_from_f64(s.p[1]));
            let list = &on_segment[j];
            let mut chain = Vec::with_capacity(list.len());
            let mut ts = Vec::with_capacity(list.len());
            for (idx, &(_, v, k)) in list.iter().enumerate() {
                let t = if idx == 0 {
                    Rational::zero()
                } else if idx + 1 == list.len() {
                    Rational::one()
                } else {
                    let x = rational_from_f64(positions[v][0]) + Rational::from_integer(k[0].into());
                    let y = rational_from_f64(positions[v][1]) + Rational::from_integer(k[1].into());
                    ((x - &px) * &dx + (y - &py) * &dy) / &dd
                };
                if idx > 0 && idx + 1 < list.len() {
                    vertices[v].kind = VertexKind::Interior {
                        segment: j,
                        index: idx,
                    };
                }
                chain.push(v);
                ts.push(t);
            }
            let mut ids = Vec::with_capacity(list.len() - 1);
            for idx in 0..list.len() - 1 {
                let dt = &ts[idx + 1] - &ts[idx];
                let (ka, kb) = (list[idx].2, list[idx + 1].2);
                ids.push(edges.len());
                edges.push(SubSegment {
                    segment: j,
                    index: idx,
                    from: chain[idx],
                    to: chain[idx + 1],
                    length: (list[idx + 1].0 - list[idx].0) * s.length(),
                    dt,
                    shift: [kb[0] - ka[0], kb[1] - ka[1]],
                });
            }
            chains.push(chain);
            chain_t.push(ts);
            seg_edges.push(ids);
        }
        if let Some(e) = edges.iter().position(|e| e.length <= eps) {
            return Err(TGraphError::NotTGraph(format!(
                "segment {} has two vertices closer than the tolerance",
                edges[e].segment
            )));
        }

        // Rotation system by angle.
        let dir = |d: Dart| {
            let v = segments[edges[d / 2].segment].direction();
            if d % 2 == 0 {
                v
            } else {
                [-v[0], -v[1]]
            }
        };
        let mut rotation: Vec<Vec<Dart>> = vec![Vec::new(); vertices.len()];
        for (e, sub) in edges.iter().enumerate() {
            rotation[sub.from].push(2 * e);
            rotation[sub.to].push(2 * e + 1);
        }
        for rot in &mut rotation {
            rot.sort_by(|&a, &b| angle(dir(a)).total_cmp(&angle(dir(b))));
        }
        let mut next_ccw = vec![0; 2 * edges.len()];
        for rot in &rotation {
            for (i, &d) in rot.iter().enumerate() {
                next_ccw[d] = rot[(i + 1) % rot.len()];
            }
        }
        let tail = |d: Dart| {
            let e = &edges[d / 2];
            if d % 2 == 0 {
                e.from
            } else {
                e.to
            }
        };

        // Connectivity of the arrangement.
        {
            let mut seen = vec![false; vertices.len()];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(v) = queue.pop_front() {
                for &d in &rotation[v] {
                    let w = tail(twin(d));
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(TGraphError::NotTGraph("the segments are not connected".into()));
            }
        }

        // Raw face walks.
        let mut walk_of = vec![usize::MAX; 2 * edges.len()];
        let mut walks: Vec<Vec<Dart>> = Vec::new();
        for start in 0..2 * edges.len() {
            if walk_of[start] != usize::MAX {
                continue;
            }
            let mut darts = Vec::new();
            let mut d = start;
            loop {
                walk_of[d] = walks.len();
                darts.push(d);
                d = next_ccw[twin(d)];
                if d == start {
                    break;
                }
            }
            walks.push(darts);
        }

        let mut roots = Vec::new();
        let mut faces: Vec<TFace> = Vec::new();
        match ambient {
            Ambient::Torus => {
                if let Some(v) = vertices.iter().position(|v| v.kind == VertexKind::Root) {
                    return Err(TGraphError::NotTGraph(format!(
                        "vertex at ({}, {}) is not interior to any segment",
                        positions[v][0], positions[v][1]
                    )));
                }
                for walk in walks {
                    let mut total = [0i64; 2];
                    for &d in &walk {
                        let s = edges[d / 2].shift;
                        let sign = if d % 2 == 0 { 1 } else { -1 };
                        total[0] += sign * s[0];
                        total[1] += sign * s[1];
                    }
                    if total != [0, 0] {
                        return Err(TGraphError::NotTGraph(
                            "a face wraps around the torus".into(),
                        ));
                    }
                    faces.push(TFace {
                        darts: walk,
                        outer: false,
                    });
                }
                if faces.len() != n {
                    return Err(TGraphError::NotTGraph(format!(
                        "{} faces for {} segments on the torus",
                        faces.len(),
                        n
                    )));
                }
            }
            Ambient::Plane => {
                // The unbounded face is right of the dart leaving the
                // lowest-leftmost vertex along its first edge
                // counterclockwise from straight down.
                let low = (0..vertices.len())
                    .min_by(|&a, &b| {
                        let (pa, pb) = (positions[a], positions[b]);
                        pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
                    })
                    .expect("vertices exist");
                let from_down = |d: Dart| {
                    (angle(dir(d)) + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::TAU)
                };
                let first = *rotation[low]
                    .iter()
                    .min_by(|&&a, &&b| from_down(a).total_cmp(&from_down(b)))
                    .expect("vertex has darts");
                let outer_walk = walk_of[first];

                let root_set: Vec<usize> = (0..vertices.len())
                    .filter(|&v| vertices[v].kind == VertexKind::Root)
                    .collect();
                let walk = &walks[outer_walk];
                let mut cuts = Vec::new();
                for (i, &d) in walk.iter().enumerate() {
                    if vertices[tail(d)].kind == VertexKind::Root {
                        cuts.push(i);
                    }
                }
                for &r in &root_set {
                    let visits = walk.iter().filter(|&&d| tail(d) == r).count();
                    let p = positions[r];
                    if visits == 0 {
                        return Err(TGraphError::NotTGraph(format!(
                            "endpoint ({}, {}) is neither inside a segment nor on the outer boundary",
                            p[0], p[1]
                        )));
                    }
                    if visits > 1 {
                        return Err(TGraphError::NotTGraph(format!(
                            "endpoint ({}, {}) touches the outer boundary from several sides",
                            p[0], p[1]
                        )));
                    }
                }
                if cuts.is_empty() {
                    return Err(TGraphError::NotTGraph("no root vertices".into()));
                }
                for (w, darts) in walks.iter().enumerate() {
                    if w != outer_walk {
                        faces.push(TFace {
                            darts: darts.clone(),
                            outer: false,
                        });
                    }
                }
                // Split the counterclockwise outer walk at its root visits,
                // then list roots clockwise starting from the smallest.
                let m = cuts.len();
                for k in 0..m {
                    let a = cuts[k];
                    let b = cuts[(k + 1) % m];
                    let mut darts = Vec::new();
                    let mut i = a;
                    loop {
                        darts.push(walk[i]);
                        i = (i + 1) % walk.len();
                        if i == b {
                            break;
                        }
                    }
                    roots.push(tail(walk[a]));
                    faces.push(TFace { darts, outer: true });
                }
                roots.reverse();
                let start = (0..m).min_by_key(|&k| roots[k]).expect("roots exist");
                roots.rotate_left(start);
                if faces.len() != n + 1 {
                    return Err(TGraphError::NotTGraph(format!(
                        "{} faces for {} segments (expected n + 1)",
                        faces.len(),
                        n
                    )));
                }
            }
        }

        // Canonical face order: by smallest dart.
        let mut order: Vec<usize> = (0..faces.len()).collect();
        order.sort_by_key(|&f| faces[f].darts.iter().min().copied());
        let mut rank = vec![0; faces.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let mut face_of = vec![0; 2 * edges.len()];
        let mut sorted = vec![None; faces.len()];
        for (old, face) in faces.into_iter().enumerate() {
            for &d in &face.darts {
                face_of[d] = rank[old];
            }
            sorted[rank[old]] = Some(face);
        }
        let faces: Vec<TFace> = sorted.into_iter().map(|f| f.expect("every face placed")).collect();
        let m = roots.len();
        let outer_faces: Vec<usize> = (0..m)
            .map(|k| {
                // The piece walked counterclockwise out of the next root.
                let r = roots[(k + 1) % m];
                let d = rotation[r]
                    .iter()
                    .copied()
                    .find(|&d| faces[face_of[d]].outer && faces[face_of[d]].darts[0] == d)
                    .expect("outer face starts at its root");
                face_of[d]
            })
            .collect();

        let mut graph = TGraph {
            ambient,
            segments: segments.to_vec(),
            eps,
            vertices,
            chains,
            chain_t,
            seg_edges,
            edges,
            rotation,
            next_ccw,
            faces,
            face_of,
            roots,
            outer_faces,
            stability: 0.0,
        };
        graph.stability = graph.compute_stability();
        Ok(graph)
    }

    pub fn from_file(file: &SegmentFile) -> Result<TGraph, TGraphError> {
        TGraph::build(&file.segments, file.ambient)
    }

    pub fn to_file(&self) -> SegmentFile {
        SegmentFile {
            ambient: self.ambient,
            segments: self.segments.clone(),
        }
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn vertices(&self) -> &[TVertex] {
        &self.vertices
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.vertices[v].kind == VertexKind::Root
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| !self.is_root(v)).collect()
    }

    pub fn chain(&self, segment: usize) -> &[usize] {
        &self.chains[segment]
    }

    pub fn chain_params(&self, segment: usize) -> &[Rational] {
        &self.chain_t[segment]
    }

    /// Subsegment ids along a segment, from `p` to `q`.
    pub fn segment_edges(&self, segment: usize) -> &[usize] {
        &self.seg_edges[segment]
    }

    pub fn edges(&self) -> &[SubSegment] {
        &self.edges
    }

    pub fn tail(&self, d: Dart) -> usize {
        let e = &self.edges[d / 2];
        if d % 2 == 0 {
            e.from
        } else {
            e.to
        }
    }

    pub fn head(&self, d: Dart) -> usize {
        self.tail(twin(d))
    }

    /// Lattice translation carried by a dart.
    pub fn shift(&self, d: Dart) -> [i64; 2] {
        let s = self.edges[d / 2].shift;
        if d % 2 == 0 {
            s
        } else {
            [-s[0], -s[1]]
        }
    }

    pub fn rotation(&self, v: usize) -> &[Dart] {
        &self.rotation[v]
    }

    pub fn face_next(&self, d: Dart) -> Dart {
        self.next_ccw[twin(d)]
    }

    pub fn faces(&self) -> &[TFace] {
        &self.faces
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Face to the right of a dart.
    pub fn face_of(&self, d: Dart) -> usize {
        self.face_of[d]
    }

    /// Outer faces in clockwise order around the T-graph.
    pub fn outer_faces(&self) -> &[usize] {
        &self.outer_faces
    }

    /// Perturbation size below which the combinatorics cannot change.
    pub fn stability_margin(&self) -> f64 {
        self.stability
    }

    /// The two darts out of an interior vertex, toward the previous and the
    /// next vertex on its segment.
    pub fn transition_darts(&self, v: usize) -> Option<[Dart; 2]> {
        let VertexKind::Interior { segment, index } = self.vertices[v].kind else {
            return None;
        };
        let ids = &self.seg_edges[segment];
        Some([2 * ids[index - 1] + 1, 2 * ids[index]])
    }

    /// The two transitions out of an interior vertex, toward the previous
    /// and the next vertex on its segment: `(dart, exact probability)`.
    /// Probabilities are inversely proportional to distance.
    pub fn transitions(&self, v: usize) -> Option<[(Dart, Rational); 2]> {
        let VertexKind::Interior { segment, index } = self.vertices[v].kind else {
            return None;
        };
        let ids = &self.seg_edges[segment];
        let (back, ahead) = (ids[index - 1], ids[index]);
        let (d1, d2) = (&self.edges[back].dt, &self.edges[ahead].dt);
        let total = d1 + d2;
        Some([(2 * back + 1, d2 / &total), (2 * ahead, d1 / &total)])
    }

    /// Row-stochastic transition matrix over all vertices; roots absorb.
    pub fn transition_chain(&self) -> Vec<Vec<f64>> {
        let nv = self.vertices.len();
        let mut matrix = vec![vec![0.0; nv]; nv];
        for v in 0..nv {
            match self.transitions(v) {
                None => matrix[v][v] = 1.0,
                Some(moves) => {
                    for (d, p) in moves {
                        matrix[v][self.head(d)] += crate::linalg::rational_to_f64(&p);
                    }
                }
            }
        }
        matrix
    }

    /// Lifted position of the head of `d` relative to its tail.
    pub fn displacement(&self, d: Dart) -> [f64; 2] {
        let s = self.shift(d);
        let (a, b) = (self.vertices[self.tail(d)].pos, self.vertices[self.head(d)].pos);
        [b[0] + s[0] as f64 - a[0], b[1] + s[1] as f64 - a[1]]
    }

    /// Largest `|sum p_i (v_i - v)|` over interior vertices.
    pub fn martingale_residual(&self) -> f64 {
        self.interior_vertices()
            .into_iter()
            .map(|v| {
                let moves = self.transitions(v).expect("interior");
                let mut acc = [0.0, 0.0];
                for (d, p) in moves {
                    let p = crate::linalg::rational_to_f64(&p);
                    let step = self.displacement(d);
                    acc[0] += p * step[0];
                    acc[1] += p * step[1];
                }
                norm(acc)
            })
            .fold(0.0, f64::max)
    }

    /// True when every vertex can walk to a root.
    pub fn roots_reachable(&self) -> bool {
        let nv = self.vertices.len();
        let mut reach = vec![false; nv];
        let mut queue: VecDeque<usize> = self.roots.iter().copied().collect();
        for &r in &self.roots {
            reach[r] = true;
        }
        // Walk transitions backwards.
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for v in 0..nv {
            if let Some(moves) = self.transitions(v) {
                for (d, _) in moves {
                    incoming[self.head(d)].push(v);
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            for &u in &incoming[v] {
                if !reach[u] {
                    reach[u] = true;
                    queue.push_back(u);
                }
            }
        }
        reach.into_iter().all(|r| r)
    }

    /// Polygon of a face, lifted so that consecutive corners are adjacent
    /// in the plane (relevant on the torus). An outer face runs from root
    /// to root and closes along the chord between them.
    pub fn face_polygon(&self, f: usize) -> Vec<[f64; 2]> {
        let darts = &self.faces[f].darts;
        let mut at = self.vertices[self.tail(darts[0])].pos;
        let mut out = Vec::with_capacity(darts.len() + 1);
        for &d in darts {
            out.push(at);
            let step = self.displacement(d);
            at = [at[0] + step[0], at[1] + step[1]];
        }
        if self.faces[f].outer {
            out.push(at);
        }
        out
    }

    /// Canonical fingerprint of the combinatorics: chains and face walks.
    pub fn combinatorics(&self) -> (Vec<Vec<usize>>, Vec<Vec<Dart>>) {
        (
            self.chains.clone(),
            self.faces.iter().map(|f| f.darts.clone()).collect(),
        )
    }

    fn compute_stability(&self) -> f64 {
        let mut margin = f64::INFINITY;
        let nv = self.vertices.len();
        for a in 0..nv {
            for b in a + 1..nv {
                let mut d = sub(self.vertices[a].pos, self.vertices[b].pos);
                if self.ambient == Ambient::Torus {
                    d = [d[0] - d[0].round(), d[1] - d[1].round()];
                }
                margin = margin.min(norm(d));
            }
        }
        for (v, vert) in self.vertices.iter().enumerate() {
            for (j, s) in self.segments.iter().enumerate() {
                if self.chains[j].contains(&v) {
                    continue;
                }
                let x = vert.pos;
                for k in translates(s, &Segment::new(x, x), self.ambient) {
                    let y = [x[0] + k[0] as f64, x[1] + k[1] as f64];
                    let d = s.direction();
                    let t = (dot(sub(y, s.p), d) / dot(d, d)).clamp(0.0, 1.0);
                    margin = margin.min(norm(sub(y, s.at(t))));
                }
            }
        }
        for e in &self.edges {
            margin = margin.min(e.length);
        }
        (margin.min(self.eps) / 4.0).max(0.0)
    }

    /// Default dual root: the outer face with the smallest id.
    pub fn default_dual_root(&self) -> Option<usize> {
        self.outer_faces.iter().copied().min()
    }

    /// The face/segment incidence graph, with the dual root removed in the
    /// plane. On the torus there is no dual root.
    pub fn derived_dimer_graph(&self, dual_root: Option<usize>) -> Result<DerivedDimerGraph, TGraphError> {
        let n = self.segments.len();
        let dual_root = match self.ambient {
            Ambient::Torus => None,
            Ambient::Plane => {
                let r = dual_root.unwrap_or_else(|| self.default_dual_root().expect("plane T-graph has roots"));
                if r >= self.faces.len() || !self.faces[r].outer {
                    return Err(TGraphError::BadDualRoot(r));
                }
                Some(r)
            }
        };

        // Collect incidences: (face, segment) -> subsegments, in order of
        // first appearance along the segment.
        let mut incidence: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut seg_rotation: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            // Counterclockwise around the segment: left side by decreasing
            // parameter, then right side by increasing parameter.
            let ids = &self.seg_edges[s];
            let mut around = Vec::new();
            for &e in ids.iter().rev() {
                around.push((self.face_of[2 * e + 1], e));
            }
            for &e in ids {
                around.push((self.face_of[2 * e], e));
            }
            for &(f, e) in &around {
                incidence.entry((f, s)).or_default().push(e);
            }
            let mut faces: Vec<usize> = Vec::new();
            for &(f, _) in &around {
                if !faces.contains(&f) {
                    faces.push(f);
                }
            }
            seg_rotation[s] = faces;
        }

        let mut edges = Vec::new();
        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (&(face, segment), subs) in &incidence {
            let dt = subs.iter().fold(Rational::zero(), |acc, &e| acc + &self.edges[e].dt);
            let length = subs.iter().map(|&e| self.edges[e].length).sum();
            edge_index.insert((face, segment), edges.len());
            edges.push(DerivedEdge {
                face,
                segment,
                subsegments: subs.clone(),
                dt,
                length,
            });
        }

        let (full, map) = if self.ambient == Ambient::Plane {
            // Face walks are clockwise, so segments appear in reverse.
            let mut face_rotation: Vec<Vec<usize>> = vec![Vec::new(); self.faces.len()];
            for (f, face) in self.faces.iter().enumerate() {
                for &d in face.darts.iter().rev() {
                    let s = self.edges[d / 2].segment;
                    if !face_rotation[f].contains(&s) {
                        face_rotation[f].push(s);
                    }
                }
            }
            let white_id = |f: usize| (n + f) as i64;
            let build = |skip: Option<usize>| -> Result<PlanarMap, TGraphError> {
                let mut raw = RawMap {
                    surface: Surface::Plane,
                    vertices: Vec::new(),
                    edges: Vec::new(),
                    rotations: BTreeMap::new(),
                    outer_face_dart: None,
                };
                for s in 0..n {
                    raw.vertices.push((s as i64, Color::Black));
                }
                for f in 0..self.faces.len() {
                    if Some(f) != skip {
                        raw.vertices.push((white_id(f), Color::White));
                    }
                }
                for (i, e) in edges.iter().enumerate() {
                    if Some(e.face) == skip {
                        continue;
                    }
                    raw.edges.push(RawEdge {
                        id: i as i64,
                        u: e.segment as i64,
                        v: white_id(e.face),
                        weight: rational_from_f64(e.length),
                        crossing: None,
                    });
                }
                for s in 0..n {
                    let rot: Vec<i64> = seg_rotation[s]
                        .iter()
                        .filter(|&&f| Some(f) != skip)
                        .map(|&f| edge_index[&(f, s)] as i64)
                        .collect();
                    raw.rotations.insert(s as i64, rot);
                }
                for f in 0..self.faces.len() {
                    if Some(f) == skip {
                        continue;
                    }
                    let rot: Vec<i64> = face_rotation[f].iter().map(|&s| edge_index[&(f, s)] as i64).collect();
                    raw.rotations.insert(white_id(f), rot);
                }
                if let Some(r) = skip {
                    // The corner at a neighbouring black that held the dual
                    // root becomes part of the outer face.
                    let (s, i) = seg_rotation
                        .iter()
                        .enumerate()
                        .find_map(|(s, rot)| rot.iter().position(|&f| f == r).map(|i| (s, i)))
                        .expect("dual root touches a segment");
                    let rot = &seg_rotation[s];
                    if rot.len() > 1 {
                        let prev = rot[(i + rot.len() - 1) % rot.len()];
                        raw.outer_face_dart = Some((edge_index[&(prev, s)] as i64, white_id(prev)));
                    }
                }
                raw.build_plane().map_err(|e| TGraphError::NotTGraph(format!("derived dimer graph: {e}")))
            };
            (Some(build(None)?), Some(build(dual_root)?))
        } else {
            (None, None)
        };

        Ok(DerivedDimerGraph {
            num_segments: n,
            num_faces: self.faces.len(),
            dual_root,
            edges,
            full,
            map,
        })
    }
}

/// An edge between face `face` and segment `segment`, made of the
/// subsegments of the segment bordering that face.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedEdge {
    pub face: usize,
    pub segment: usize,
    /// The subsegments `S_e`; one listed twice if the face lies on both sides.
    pub subsegments: Vec<usize>,
    pub dt: Rational,
    pub length: f64,
}

/// Black vertices are segments, white vertices faces. Plane maps have
/// vertex id `s` for segment `s` and `n + f` for face `f`.
#[derive(Clone, Debug)]
pub struct DerivedDimerGraph {
    pub num_segments: usize,
    pub num_faces: usize,
    pub dual_root: Option<usize>,
    /// All incidences, including those at the dual root.
    pub edges: Vec<DerivedEdge>,
    /// The graph with every face present (plane only).
    pub full: Option<PlanarMap>,
    /// The balanced graph with the dual root removed (plane only).
    pub map: Option<PlanarMap>,
}

impl DerivedDimerGraph {
    /// Faces that are white vertices of the balanced graph.
    pub fn whites(&self) -> Vec<usize> {
        (0..self.num_faces).filter(|&f| Some(f) != self.dual_root).collect()
    }

    /// Edges of the balanced graph.
    pub fn live_edges(&self) -> impl Iterator<Item = (usize, &DerivedEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| Some(e.face) != self.dual_root)
    }

    pub fn edge_between(&self, face: usize, segment: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.face == face && e.segment == segment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::linalg::rational_to_f64;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn single_segment_has_two_roots_and_two_faces() {
        let t = TGraph::build(&gallery::single_segment(), Ambient::Plane).unwrap();
        assert_eq!(t.roots().len(), 2);
        assert!(t.interior_vertices().is_empty());
        assert_eq!(t.num_faces(), 2);
        let g = t.derived_dimer_graph(None).unwrap();
        let full = g.full.as_ref().unwrap();
        assert_eq!((full.num_vertices(), full.num_edges()), (3, 2));
        let map = g.map.as_ref().unwrap();
        assert_eq!((map.num_vertices(), map.num_edges()), (2, 1));
        assert_eq!(rational_to_f64(&map.edge(0).weight), 1.0);
    }

    #[test]
    fn triangle_has_three_roots_and_four_faces() {
        let t = TGraph::build(&gallery::triangle(), Ambient::Plane).unwrap();
        assert_eq!(t.roots().len(), 3);
        assert_eq!(t.num_faces(), 4);
        assert_eq!(t.faces().iter().filter(|f| f.outer).count(), 3);
    }

    #[test]
    fn t_shape_has_three_faces() {
        let t = TGraph::build(&gallery::t_shape(), Ambient::Plane).unwrap();
        assert_eq!(t.num_faces(), 3);
        let g = t.derived_dimer_graph(None).unwrap();
        let full = g.full.unwrap();
        assert_eq!(full.black_vertices().len(), 2);
        assert_eq!(full.white_vertices().len(), 3);
    }

    #[test]
    fn endpoints_meeting_is_rejected() {
        let v = vec![
            Segment::new([0.0, 0.0], [1.0, 0.0]),
            Segment::new([1.0, 0.0], [2.0, 1.0]),
        ];
        assert!(matches!(
            TGraph::build(&v, Ambient::Plane),
            Err(TGraphError::NotTGraph(_))
        ));
        let crossing = vec![
            Segment::new([0.0, 0.0], [2.0, 0.0]),
            Segment::new([1.0, -1.0], [1.0, 1.0]),
        ];
        assert_eq!(
            TGraph::build(&crossing, Ambient::Plane).unwrap_err(),
            TGraphError::Overlapping(0, 1)
        );
        let collinear = vec![
            Segment::new([0.0, 0.0], [2.0, 0.0]),
            Segment::new([1.0, 0.0], [3.0, 0.0]),
        ];
        assert!(matches!(
            TGraph::build(&collinear, Ambient::Plane),
            Err(TGraphError::Overlapping(..))
        ));
    }

    #[test]
    fn cevian_transition_probabilities() {
        let t = TGraph::build(&gallery::cevian(), Ambient::Plane).unwrap();
        let inner = t.interior_vertices();
        assert_eq!(inner.len(), 1);
        let v = inner[0];
        assert_eq!(t.vertices()[v].pos, [1.0, 0.0]);
        let moves = t.transitions(v).unwrap();
        for (d, p) in &moves {
            let to = t.vertices()[t.head(*d)].pos;
            if to == [0.0, 0.0] {
                assert_eq!(*p, q(3, 4));
            } else {
                assert_eq!(to, [4.0, 0.0]);
                assert_eq!(*p, q(1, 4));
            }
        }
        assert!(t.martingale_residual() < 1e-15);
        let chain = t.transition_chain();
        for (v, row) in chain.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            if t.is_root(v) {
                assert_eq!(row[v], 1.0);
            }
        }
        assert!(t.roots_reachable());
    }

    #[test]
    fn derived_weights_sum_to_twice_the_length() {
        for segs in [gallery::cevian(), gallery::framed_square(), gallery::t_shape()] {
            let t = TGraph::build(&segs, Ambient::Plane).unwrap();
            let g = t.derived_dimer_graph(None).unwrap();
            for (s, seg) in t.segments().iter().enumerate() {
                let total: f64 = g.edges.iter().filter(|e| e.segment == s).map(|e| e.length).sum();
                assert!((total - 2.0 * seg.length()).abs() < 1e-12);
                let dt = g
                    .edges
                    .iter()
                    .filter(|e| e.segment == s)
                    .fold(Rational::zero(), |a, e| a + &e.dt);
                assert_eq!(dt, q(2, 1));
            }
            let map = g.map.unwrap();
            assert_eq!(map.black_vertices().len(), map.white_vertices().len());
        }
    }

    #[test]
    fn torus_examples_have_n_faces() {
        for segs in [gallery::torus_pair(), gallery::torus_pair_skew(), gallery::torus_grid()] {
            let t = TGraph::build(&segs, Ambient::Torus).unwrap();
            assert_eq!(t.num_faces(), segs.len());
            assert!(t.roots().is_empty());
            assert!(t.martingale_residual() < 1e-12);
        }
    }

    #[test]
    fn bad_dual_root_is_rejected() {
        let t = TGraph::build(&gallery::triangle(), Ambient::Plane).unwrap();
        let inner = (0..t.num_faces()).find(|&f| !t.faces()[f].outer).unwrap();
        assert_eq!(
            t.derived_dimer_graph(Some(inner)).unwrap_err(),
            TGraphError::BadDualRoot(inner)
        );
    }

    #[test]
    fn json_round_trip() {
        let file = SegmentFile {
            ambient: Ambient::Plane,
            segments: gallery::cevian(),
        };
        let again = SegmentFile::from_json(&file.to_json()).unwrap();
        assert_eq!(again, file);
    }
}
