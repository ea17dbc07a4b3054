//! Bipartite weighted maps given as rotation systems.
//!
//! Every edge `e` owns two darts: `2e` runs from `u` to `v` and `2e + 1`
//! runs back. The rotation at a vertex lists its outgoing darts in
//! counterclockwise order, and faces are the orbits of
//! `d -> rotation_next(twin(d))`. With that convention a face lies on the
//! right of each of its darts, so bounded faces are walked clockwise and the
//! outer face counterclockwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Deref;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{format_rational, parse_rational, Rational};

pub type Dart = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    fn code(self) -> &'static str {
        match self {
            Color::Black => "b",
            Color::White => "w",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("malformed graph file: {0}")]
    Parse(String),
    #[error("bad rotation at vertex {vertex}: {reason}")]
    BadRotation { vertex: i64, reason: String },
    #[error("edge {edge} joins two vertices of the same color")]
    NotBipartite { edge: i64 },
    #[error("edge {edge} has non-positive weight {weight}")]
    NonPositiveWeight { edge: i64, weight: String },
    #[error("Euler characteristic is {found}, expected {expected} (V={v}, E={e}, F={f})")]
    EulerMismatch {
        found: i64,
        expected: i64,
        v: usize,
        e: usize,
        f: usize,
    },
    #[error("crossing labels: {0}")]
    Crossing(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: i64,
    pub u: usize,
    pub v: usize,
    pub weight: Rational,
}

/// A face as the cyclic sequence of darts that have it on their right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub darts: Vec<Dart>,
}

impl Face {
    pub fn degree(&self) -> usize {
        self.darts.len()
    }
}

#[inline]
pub fn twin(d: Dart) -> Dart {
    d ^ 1
}

#[inline]
pub fn edge_of(d: Dart) -> usize {
    d / 2
}

/// The combinatorial part shared by plane and torus maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    vertex_ids: Vec<i64>,
    colors: Vec<Color>,
    edges: Vec<Edge>,
    rotations: Vec<Vec<Dart>>,
    next_ccw: Vec<Dart>,
    prev_ccw: Vec<Dart>,
    faces: Vec<Face>,
    face_of: Vec<usize>,
    vertex_index: HashMap<i64, usize>,
    edge_index: HashMap<i64, usize>,
}

impl Embedding {
    pub fn num_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn vertex_id(&self, v: usize) -> i64 {
        self.vertex_ids[v]
    }

    pub fn vertex_ids(&self) -> &[i64] {
        &self.vertex_ids
    }

    pub fn vertex_index(&self, id: i64) -> Option<usize> {
        self.vertex_index.get(&id).copied()
    }

    pub fn edge_index(&self, id: i64) -> Option<usize> {
        self.edge_index.get(&id).copied()
    }

    pub fn color(&self, v: usize) -> Color {
        self.colors[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn tail(&self, d: Dart) -> usize {
        let e = &self.edges[edge_of(d)];
        if d % 2 == 0 {
            e.u
        } else {
            e.v
        }
    }

    pub fn head(&self, d: Dart) -> usize {
        self.tail(twin(d))
    }

    /// Next dart counterclockwise around the tail of `d`.
    pub fn rotation_next(&self, d: Dart) -> Dart {
        self.next_ccw[d]
    }

    pub fn rotation_prev(&self, d: Dart) -> Dart {
        self.prev_ccw[d]
    }

    /// Outgoing darts of `v` in counterclockwise order.
    pub fn rotation(&self, v: usize) -> &[Dart] {
        &self.rotations[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rotations[v].len()
    }

    /// Successor of `d` along the face on its right.
    pub fn face_next(&self, d: Dart) -> Dart {
        self.next_ccw[twin(d)]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Index of the face lying to the right of `d`.
    pub fn face_of(&self, d: Dart) -> usize {
        self.face_of[d]
    }

    /// Index of the face lying to the left of `d`.
    pub fn left_face(&self, d: Dart) -> usize {
        self.face_of[twin(d)]
    }

    pub fn black_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.colors[v] == Color::Black)
            .collect()
    }

    pub fn white_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.colors[v] == Color::White)
            .collect()
    }

    /// The black endpoint and white endpoint of edge `e`.
    pub fn black_white(&self, e: usize) -> (usize, usize) {
        let edge = &self.edges[e];
        if self.colors[edge.u] == Color::Black {
            (edge.u, edge.v)
        } else {
            (edge.v, edge.u)
        }
    }

    /// The dart of edge `e` that leaves its black endpoint.
    pub fn black_dart(&self, e: usize) -> Dart {
        if self.colors[self.edges[e].u] == Color::Black {
            2 * e
        } else {
            2 * e + 1
        }
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &d in &self.rotations[v] {
                let w = self.head(d);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A bipartite weighted map on the sphere with a designated outer face.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarMap {
    embedding: Embedding,
    outer_face: usize,
}

impl Deref for PlanarMap {
    type Target = Embedding;
    fn deref(&self) -> &Embedding {
        &self.embedding
    }
}

/// The outer boundary read off in clockwise order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryProfile {
    /// Vertex indices in clockwise order (repeats possible for non-simple boundaries).
    pub cycle: Vec<usize>,
    /// Number of distinct white vertices on the boundary.
    pub m: usize,
}

impl PlanarMap {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn outer_face(&self) -> usize {
        self.outer_face
    }

    pub fn is_outer(&self, face: usize) -> bool {
        face == self.outer_face
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_faces()).filter(move |&f| f != self.outer_face)
    }

    /// Outer-face vertex cycle in clockwise order, starting at the smallest vertex index.
    pub fn boundary_profile(&self) -> BoundaryProfile {
        let face = &self.faces()[self.outer_face];
        // The outer face is walked counterclockwise; reverse for clockwise order.
        let mut cycle: Vec<usize> = face.darts.iter().rev().map(|&d| self.head(d)).collect();
        if let Some(start) = (0..cycle.len()).min_by_key(|&i| cycle[i]) {
            cycle.rotate_left(start);
        }
        let mut whites: Vec<usize> = cycle
            .iter()
            .copied()
            .filter(|&v| self.color(v) == Color::White)
            .collect();
        whites.sort_unstable();
        whites.dedup();
        BoundaryProfile {
            cycle,
            m: whites.len(),
        }
    }

    /// Vertices appearing on the outer face.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = self.faces()[self.outer_face]
            .darts
            .iter()
            .map(|&d| self.tail(d))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// True when the outer face walk visits no vertex twice.
    pub fn has_simple_boundary(&self) -> bool {
        let walk = &self.faces()[self.outer_face].darts;
        let mut vs: Vec<usize> = walk.iter().map(|&d| self.tail(d)).collect();
        let len = vs.len();
        vs.sort_unstable();
        vs.dedup();
        vs.len() == len
    }

    pub fn to_raw(&self) -> RawMap {
        let mut raw = raw_from_embedding(&self.embedding, Surface::Plane);
        let d = self.faces()[self.outer_face].darts[0];
        raw.outer_face_dart = Some((
            self.edge(edge_of(d)).id,
            self.vertex_id(self.tail(d)),
        ));
        raw
    }

    pub fn to_json(&self) -> String {
        self.to_raw().to_json()
    }

    /// Same map with new edge weights, indexed by edge.
    pub fn with_weights(&self, weights: &[Rational]) -> Result<PlanarMap, MapError> {
        let mut raw = self.to_raw();
        for (e, w) in raw.edges.iter_mut().zip(weights) {
            e.weight = w.clone();
        }
        raw.build_plane()
    }
}

/// A bipartite weighted map on the torus; each dart carries the number of
/// times it crosses the two sides of the fundamental domain.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusMap {
    embedding: Embedding,
    crossings: Vec<[i32; 2]>,
}

impl Deref for TorusMap {
    type Target = Embedding;
    fn deref(&self) -> &Embedding {
        &self.embedding
    }
}

impl TorusMap {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    /// Homology crossing of a dart; the twin carries the negation.
    pub fn crossing(&self, d: Dart) -> [i32; 2] {
        let c = self.crossings[edge_of(d)];
        if d % 2 == 0 {
            c
        } else {
            [-c[0], -c[1]]
        }
    }

    pub fn to_raw(&self) -> RawMap {
        let mut raw = raw_from_embedding(&self.embedding, Surface::Torus);
        for (edge, c) in raw.edges.iter_mut().zip(&self.crossings) {
            edge.crossing = Some(*c);
        }
        raw
    }

    pub fn to_json(&self) -> String {
        self.to_raw().to_json()
    }

    pub fn with_weights(&self, weights: &[Rational]) -> Result<TorusMap, MapError> {
        let mut raw = self.to_raw();
        for (e, w) in raw.edges.iter_mut().zip(weights) {
            e.weight = w.clone();
        }
        raw.build_torus()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Plane,
    Torus,
}

/// Either kind of map read from a graph file.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphFile {
    Plane(PlanarMap),
    Torus(TorusMap),
}

impl GraphFile {
    pub fn embedding(&self) -> &Embedding {
        match self {
            GraphFile::Plane(m) => m.embedding(),
            GraphFile::Torus(m) => m.embedding(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawEdge {
    pub id: i64,
    pub u: i64,
    pub v: i64,
    pub weight: Rational,
    pub crossing: Option<[i32; 2]>,
}

/// Unvalidated map description; the single entry point for building maps.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMap {
    pub surface: Surface,
    pub vertices: Vec<(i64, Color)>,
    pub edges: Vec<RawEdge>,
    /// Counterclockwise edge ids around each vertex id.
    pub rotations: BTreeMap<i64, Vec<i64>>,
    /// `(edge id, from-vertex id)` of a dart on the outer face (plane only).
    pub outer_face_dart: Option<(i64, i64)>,
}

#[derive(Serialize, Deserialize)]
struct VertexJson {
    id: i64,
    color: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    id: i64,
    u: i64,
    v: i64,
    weight: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crossing: Option<[i32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    #[serde(rename = "type")]
    surface: Surface,
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
    rotations: BTreeMap<String, Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outer_face_dart: Option<[i64; 2]>,
}

impl RawMap {
    pub fn from_json(text: &str) -> Result<RawMap, MapError> {
        let json: GraphJson =
            serde_json::from_str(text).map_err(|e| MapError::Parse(e.to_string()))?;
        let vertices = json
            .vertices
            .iter()
            .map(|v| match v.color.as_str() {
                "b" => Ok((v.id, Color::Black)),
                "w" => Ok((v.id, Color::White)),
                other => Err(MapError::Parse(format!("unknown color {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let edges = json
            .edges
            .iter()
            .map(|e| {
                let weight = parse_rational(&e.weight)
                    .ok_or_else(|| MapError::Parse(format!("bad weight {:?}", e.weight)))?;
                Ok(RawEdge {
                    id: e.id,
                    u: e.u,
                    v: e.v,
                    weight,
                    crossing: e.crossing,
                })
            })
            .collect::<Result<Vec<_>, MapError>>()?;
        let rotations = json
            .rotations
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i64>()
                    .map(|id| (id, v))
                    .map_err(|_| MapError::Parse(format!("bad rotation key {k:?}")))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(RawMap {
            surface: json.surface,
            vertices,
            edges,
            rotations,
            outer_face_dart: json.outer_face_dart.map(|[e, v]| (e, v)),
        })
    }

    pub fn to_json(&self) -> String {
        let json = GraphJson {
            surface: self.surface,
            vertices: self
                .vertices
                .iter()
                .map(|&(id, c)| VertexJson {
                    id,
                    color: c.code().to_string(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    id: e.id,
                    u: e.u,
                    v: e.v,
                    weight: format_rational(&e.weight),
                    crossing: if self.surface == Surface::Torus {
                        e.crossing
                    } else {
                        None
                    },
                })
                .collect(),
            rotations: self
                .rotations
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            outer_face_dart: self.outer_face_dart.map(|(e, v)| [e, v]),
        };
        serde_json::to_string_pretty(&json).expect("graph serializes")
    }

    /// Fills `rotations` by sorting incident edges by angle, given vertex
    /// positions. For torus maps, `periods` are the two translation vectors
    /// and each edge's crossing shifts its `v` endpoint accordingly.
    pub fn with_geometric_rotations(
        mut self,
        positions: &HashMap<i64, [f64; 2]>,
        periods: Option<([f64; 2], [f64; 2])>,
    ) -> RawMap {
        let mut incident: BTreeMap<i64, Vec<(f64, i64)>> = BTreeMap::new();
        for e in &self.edges {
            let pu = positions[&e.u];
            let mut pv = positions[&e.v];
            if let (Some((a, b)), Some([h, k])) = (periods, e.crossing) {
                pv[0] += h as f64 * a[0] + k as f64 * b[0];
                pv[1] += h as f64 * a[1] + k as f64 * b[1];
            }
            let out = (pv[1] - pu[1]).atan2(pv[0] - pu[0]);
            let back = (pu[1] - pv[1]).atan2(pu[0] - pv[0]);
            incident.entry(e.u).or_default().push((out, e.id));
            incident.entry(e.v).or_default().push((back, e.id));
        }
        self.rotations = incident
            .into_iter()
            .map(|(v, mut list)| {
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
                (v, list.into_iter().map(|(_, id)| id).collect())
            })
            .collect();
        self
    }

    /// Validates and builds the map.
    pub fn build(&self) -> Result<GraphFile, MapError> {
        let embedding = self.build_embedding()?;
        match self.surface {
            Surface::Plane => {
                let chi = embedding.euler_characteristic();
                if chi != 2 || !embedding.is_connected() {
                    return Err(MapError::EulerMismatch {
                        found: chi,
                        expected: 2,
                        v: embedding.num_vertices(),
                        e: embedding.num_edges(),
                        f: embedding.num_faces(),
                    });
                }
                let outer_face = match self.outer_face_dart {
                    Some((eid, from)) => {
                        let e = embedding.edge_index(eid).ok_or_else(|| {
                            MapError::Parse(format!("outer_face_dart names unknown edge {eid}"))
                        })?;
                        let from = embedding.vertex_index(from).ok_or_else(|| {
                            MapError::Parse(format!("outer_face_dart names unknown vertex {from}"))
                        })?;
                        let d = if embedding.edges[e].u == from {
                            2 * e
                        } else if embedding.edges[e].v == from {
                            2 * e + 1
                        } else {
                            return Err(MapError::Parse(
                                "outer_face_dart vertex is not an endpoint of its edge".into(),
                            ));
                        };
                        embedding.face_of(d)
                    }
                    // Largest face, smallest index on ties.
                    None => (0..embedding.num_faces())
                        .max_by_key(|&f| (embedding.faces[f].degree(), std::cmp::Reverse(f)))
                        .unwrap_or(0),
                };
                Ok(GraphFile::Plane(PlanarMap {
                    embedding,
                    outer_face,
                }))
            }
            Surface::Torus => {
                let crossings = self
                    .edges
                    .iter()
                    .map(|e| {
                        e.crossing.ok_or_else(|| {
                            MapError::Crossing(format!("edge {} lacks a crossing label", e.id))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let chi = embedding.euler_characteristic();
                if chi != 0 || !embedding.is_connected() {
                    return Err(MapError::EulerMismatch {
                        found: chi,
                        expected: 0,
                        v: embedding.num_vertices(),
                        e: embedding.num_edges(),
                        f: embedding.num_faces(),
                    });
                }
                Ok(GraphFile::Torus(TorusMap {
                    embedding,
                    crossings,
                }))
            }
        }
    }

    pub fn build_plane(&self) -> Result<PlanarMap, MapError> {
        match self.build()? {
            GraphFile::Plane(m) => Ok(m),
            GraphFile::Torus(_) => Err(MapError::Parse("expected a plane map".into())),
        }
    }

    pub fn build_torus(&self) -> Result<TorusMap, MapError> {
        match self.build()? {
            GraphFile::Torus(m) => Ok(m),
            GraphFile::Plane(_) => Err(MapError::Parse("expected a torus map".into())),
        }
    }

    fn build_embedding(&self) -> Result<Embedding, MapError> {
        let mut vertex_index = HashMap::new();
        for (i, &(id, _)) in self.vertices.iter().enumerate() {
            if vertex_index.insert(id, i).is_some() {
                return Err(MapError::Parse(format!("duplicate vertex id {id}")));
            }
        }
        let colors: Vec<Color> = self.vertices.iter().map(|&(_, c)| c).collect();
        let mut edge_index = HashMap::new();
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            if edge_index.insert(e.id, i).is_some() {
                return Err(MapError::Parse(format!("duplicate edge id {}", e.id)));
            }
            let u = *vertex_index
                .get(&e.u)
                .ok_or_else(|| MapError::Parse(format!("edge {} names unknown vertex {}", e.id, e.u)))?;
            let v = *vertex_index
                .get(&e.v)
                .ok_or_else(|| MapError::Parse(format!("edge {} names unknown vertex {}", e.id, e.v)))?;
            if colors[u] == colors[v] {
                return Err(MapError::NotBipartite { edge: e.id });
            }
            if !e.weight.is_positive() || e.weight.is_zero() {
                return Err(MapError::NonPositiveWeight {
                    edge: e.id,
                    weight: format_rational(&e.weight),
                });
            }
            edges.push(Edge {
                id: e.id,
                u,
                v,
                weight: e.weight.clone(),
            });
        }

        let n = self.vertices.len();
        let mut rotations: Vec<Vec<Dart>> = vec![Vec::new(); n];
        for (&vid, list) in &self.rotations {
            let v = *vertex_index.get(&vid).ok_or_else(|| MapError::BadRotation {
                vertex: vid,
                reason: "rotation given for unknown vertex".into(),
            })?;
            for &eid in list {
                let e = *edge_index.get(&eid).ok_or_else(|| MapError::BadRotation {
                    vertex: vid,
                    reason: format!("unknown edge {eid}"),
                })?;
                let d = if edges[e].u == v {
                    2 * e
                } else if edges[e].v == v {
                    2 * e + 1
                } else {
                    return Err(MapError::BadRotation {
                        vertex: vid,
                        reason: format!("edge {eid} is not incident"),
                    });
                };
                rotations[v].push(d);
            }
        }
        // Every dart must appear exactly once, at its own tail.
        let mut seen = vec![false; 2 * edges.len()];
        for (v, rot) in rotations.iter().enumerate() {
            for &d in rot {
                if seen[d] {
                    return Err(MapError::BadRotation {
                        vertex: self.vertices[v].0,
                        reason: format!("edge {} appears twice", edges[edge_of(d)].id),
                    });
                }
                seen[d] = true;
            }
        }
        if let Some(d) = seen.iter().position(|s| !s) {
            let e = &edges[edge_of(d)];
            let tail = if d % 2 == 0 { e.u } else { e.v };
            return Err(MapError::BadRotation {
                vertex: self.vertices[tail].0,
                reason: format!("edge {} missing from rotation", e.id),
            });
        }

        let mut next_ccw = vec![0; 2 * edges.len()];
        let mut prev_ccw = vec![0; 2 * edges.len()];
        for rot in &rotations {
            for (i, &d) in rot.iter().enumerate() {
                let nxt = rot[(i + 1) % rot.len()];
                next_ccw[d] = nxt;
                prev_ccw[nxt] = d;
            }
        }

        let mut face_of = vec![usize::MAX; 2 * edges.len()];
        let mut faces = Vec::new();
        for start in 0..2 * edges.len() {
            if face_of[start] != usize::MAX {
                continue;
            }
            let mut darts = Vec::new();
            let mut d = start;
            loop {
                face_of[d] = faces.len();
                darts.push(d);
                d = next_ccw[twin(d)];
                if d == start {
                    break;
                }
            }
            faces.push(Face { darts });
        }

        Ok(Embedding {
            vertex_ids: self.vertices.iter().map(|&(id, _)| id).collect(),
            colors,
            edges,
            rotations,
            next_ccw,
            prev_ccw,
            faces,
            face_of,
            vertex_index,
            edge_index,
        })
    }
}

fn raw_from_embedding(emb: &Embedding, surface: Surface) -> RawMap {
    RawMap {
        surface,
        vertices: (0..emb.num_vertices())
            .map(|v| (emb.vertex_ids[v], emb.colors[v]))
            .collect(),
        edges: emb
            .edges
            .iter()
            .map(|e| RawEdge {
                id: e.id,
                u: emb.vertex_ids[e.u],
                v: emb.vertex_ids[e.v],
                weight: e.weight.clone(),
                crossing: None,
            })
            .collect(),
        rotations: (0..emb.num_vertices())
            .map(|v| {
                (
                    emb.vertex_ids[v],
                    emb.rotations[v]
                        .iter()
                        .map(|&d| emb.edges[edge_of(d)].id)
                        .collect(),
                )
            })
            .collect(),
        outer_face_dart: None,
    }
}

/// Parses a JSON graph file into a validated map.
pub fn parse_graph(text: &str) -> Result<GraphFile, MapError> {
    RawMap::from_json(text)?.build()
}

impl fmt::Display for PlanarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "plane map: V={} E={} F={}",
            self.num_vertices(),
            self.num_edges(),
            self.num_faces()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn single_edge_has_one_face() {
        let map = gallery::single_edge(Rational::from_integer(1.into()));
        assert_eq!((map.num_vertices(), map.num_edges(), map.num_faces()), (2, 1, 1));
        let profile = map.boundary_profile();
        assert_eq!(profile.m, 1);
        assert_eq!(profile.cycle.len(), 2);
    }

    #[test]
    fn four_cycle_faces() {
        let map = gallery::four_cycle_unit();
        assert_eq!(map.num_faces(), 2);
        assert!(map.faces().iter().all(|f| f.degree() == 4));
        let profile = map.boundary_profile();
        assert_eq!(profile.m, 2);
        let colors: Vec<Color> = profile.cycle.iter().map(|&v| map.color(v)).collect();
        assert_eq!(
            colors,
            vec![Color::Black, Color::White, Color::Black, Color::White]
        );
        // Clockwise from (0,0): up to (0,1), across to (1,1), down to (1,0).
        let ids: Vec<i64> = profile.cycle.iter().map(|&v| map.vertex_id(v)).collect();
        assert_eq!(ids, vec![0, 3, 2, 1]);
    }

    #[test]
    fn grid_minus_corner_faces_and_boundary() {
        let map = gallery::grid_minus_corner();
        assert_eq!(map.num_vertices(), 8);
        assert_eq!(map.num_edges(), 10);
        let interior: Vec<usize> = map.interior_faces().collect();
        assert_eq!(interior.len(), 3);
        assert!(interior.iter().all(|&f| map.faces()[f].degree() == 4));
        assert_eq!(map.faces()[map.outer_face()].degree(), 8);
        assert_eq!(map.boundary_profile().m, 4);
        assert!(map.has_simple_boundary());
    }

    #[test]
    fn torus_honeycomb_has_one_hexagon() {
        let one = Rational::from_integer(1.into());
        let map = gallery::honeycomb_torus(one.clone(), one.clone(), one);
        assert_eq!(map.num_faces(), 1);
        assert_eq!(map.faces()[0].degree(), 6);
        assert_eq!(map.euler_characteristic(), 0);
        for d in 0..6 {
            let c = map.crossing(d);
            let t = map.crossing(twin(d));
            assert_eq!([c[0] + t[0], c[1] + t[1]], [0, 0]);
        }
    }

    #[test]
    fn duplicate_dart_in_rotation_is_rejected() {
        let text = r#"{"type":"plane",
            "vertices":[{"id":0,"color":"b"},{"id":1,"color":"w"}],
            "edges":[{"id":0,"u":0,"v":1,"weight":"1"}],
            "rotations":{"0":[0,0],"1":[0]}}"#;
        assert!(matches!(parse_graph(text), Err(MapError::BadRotation { .. })));
    }

    #[test]
    fn validation_errors() {
        let same_color = r#"{"type":"plane",
            "vertices":[{"id":0,"color":"b"},{"id":1,"color":"b"}],
            "edges":[{"id":0,"u":0,"v":1,"weight":"1"}],
            "rotations":{"0":[0],"1":[0]}}"#;
        assert_eq!(parse_graph(same_color), Err(MapError::NotBipartite { edge: 0 }));
        let zero_weight = same_color.replace(r#""color":"b"},{"id":1,"color":"b"}"#, r#""color":"b"},{"id":1,"color":"w"}"#).replace(r#""weight":"1""#, r#""weight":"0""#);
        assert!(matches!(
            parse_graph(&zero_weight),
            Err(MapError::NonPositiveWeight { .. })
        ));
        // Two disjoint edges: V - E + F = 4 - 2 + 2 = 4.
        let disconnected = r#"{"type":"plane",
            "vertices":[{"id":0,"color":"b"},{"id":1,"color":"w"},{"id":2,"color":"b"},{"id":3,"color":"w"}],
            "edges":[{"id":0,"u":0,"v":1,"weight":"1"},{"id":1,"u":2,"v":3,"weight":"1"}],
            "rotations":{"0":[0],"1":[0],"2":[1],"3":[1]}}"#;
        assert!(matches!(
            parse_graph(disconnected),
            Err(MapError::EulerMismatch { .. })
        ));
        assert!(matches!(parse_graph("{"), Err(MapError::Parse(_))));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let map = gallery::grid_minus_corner();
        let again = parse_graph(&map.to_json()).unwrap();
        assert_eq!(again, GraphFile::Plane(map));
        let t = gallery::square_octagon_torus(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]);
        let again = parse_graph(&t.to_json()).unwrap();
        assert_eq!(again, GraphFile::Torus(t));
    }
}
