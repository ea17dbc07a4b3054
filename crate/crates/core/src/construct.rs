//! T-graphs from dimer graphs by integrating the gauge-normalized
//! Kasteleyn flow.
//!
//! The outer face of the map is cut at every boundary white and at `b0`
//! into `m + 1` pieces. Together with the interior faces these are the
//! dual vertices. Crossing an edge `(b, w)` from the face on the right of
//! the dart `b -> w` to the face on its left changes `psi` by `±K̃(b, w)`.
//! A quarter turn of every step would only rotate the picture, so it is
//! left out and the sign is chosen so that the pieces land on the corners
//! of `Q` in order.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::correspondence::{verify_measure_preservation, CorrespondenceError, MeasureReport};
use crate::kasteleyn::{assign_signs, gauge_normalize, Bipartite, Cut, KasteleynError};
use crate::linalg::{rational_to_f64, Rational};
use crate::planarmap::{twin, Color, Dart, PlanarMap};
use crate::tgraph::{Ambient, Segment, TGraph, TGraphError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructError {
    #[error("a polygon needs at least three corners, got {0}")]
    DegeneratePolygon(usize),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("flow does not integrate: mismatch {0:e}")]
    NotClosed(f64),
    #[error("weights are not generic: {0}")]
    NonGeneric(String),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
    #[error(transparent)]
    TGraph(#[from] TGraphError),
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
}

/// A convex polygon given by its corners in counterclockwise order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    /// Edge vector `q_i = v_i - v_{i-1}`, with `q_0 = v_0 - v_m`.
    pub fn edge(&self, i: usize) -> Complex64 {
        let n = self.vertices.len();
        c(self.vertices[i]) - c(self.vertices[(i + n - 1) % n])
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        n >= 3 && (0..n).all(|i| cross(self.edge(i), self.edge((i + 1) % n)) > 0.0)
    }
}

/// A jittered regular `(m + 1)`-gon of circumradius one.
pub fn choose_polygon(m: usize, seed: u64) -> Result<Polygon, ConstructError> {
    if m < 2 {
        return Err(ConstructError::DegeneratePolygon(m + 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m + 1;
    loop {
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let vertices: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let a = phase + std::f64::consts::TAU * k as f64 / n as f64;
                let jx: f64 = rng.random_range(-1e-3..1e-3);
                let jy: f64 = rng.random_range(-1e-3..1e-3);
                [a.cos() + jx, a.sin() + jy]
            })
            .collect();
        let q = Polygon { vertices };
        if q.is_convex() {
            return Ok(q);
        }
    }
}

/// A vertex of the dual: an interior face, or one piece of the cut-up
/// outer face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DualVertex {
    Face(usize),
    Outer(usize),
}

#[derive(Clone, Debug)]
pub struct PsiMapping {
    pub map: PlanarMap,
    pub polygon: Polygon,
    pub b0: usize,
    /// Row order of `kt`; segment `i` belongs to `blacks[i]`.
    pub blacks: Vec<usize>,
    /// Column order of `kt`.
    pub whites: Vec<usize>,
    pub kt: DMatrix<Complex64>,
    pub dual: Vec<DualVertex>,
    pub psi: Vec<[f64; 2]>,
    pub segments: Vec<Segment>,
    /// Boundary whites in the order they receive `q_1, ..., q_m`.
    pub boundary_whites: Vec<usize>,
    /// Largest distance from an outer piece to its corner of `Q`.
    pub root_error: f64,
    /// Largest integration mismatch over all edges.
    pub closure_error: f64,
    /// `(right, left)` dual vertices across each edge, seen from black.
    crossings: Vec<(usize, usize)>,
    /// Dual vertices around each vertex, counterclockwise.
    sectors: Vec<Vec<usize>>,
}

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            p[0] * q[1] - p[1] * q[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Default `b0`: the boundary black with the smallest id.
pub fn default_b0(map: &PlanarMap) -> Option<usize> {
    map.boundary_vertices()
        .into_iter()
        .filter(|&v| map.color(v) == Color::Black)
        .min_by_key(|&v| map.vertex_id(v))
}

/// Integrates the flow of `K̃` into `psi` and reads off one segment per
/// black vertex.
pub fn build_psi(map: &PlanarMap, polygon: &Polygon, b0: Option<usize>) -> Result<PsiMapping, ConstructError> {
    if !map.has_simple_boundary() {
        return Err(ConstructError::Unsupported("the outer boundary must be a simple cycle".into()));
    }
    let b0 = match b0 {
        Some(b) => b,
        None => default_b0(map).ok_or_else(|| ConstructError::Unsupported("no black vertex on the boundary".into()))?,
    };
    let outer = map.outer_face();
    let mut walk = map.faces()[outer].darts.clone();
    let start = walk
        .iter()
        .position(|&d| map.tail(d) == b0)
        .ok_or_else(|| ConstructError::Unsupported("b0 is not a boundary black vertex".into()))?;
    if map.color(b0) != Color::Black {
        return Err(ConstructError::Unsupported("b0 must be black".into()));
    }
    walk.rotate_left(start);

    let is_cut = |v: usize| v == b0 || map.color(v) == Color::White;
    let mut piece_of = HashMap::new();
    let mut boundary_whites = Vec::new();
    let mut piece = 0;
    for (i, &d) in walk.iter().enumerate() {
        let v = map.tail(d);
        if i > 0 && is_cut(v) {
            piece += 1;
        }
        if map.color(v) == Color::White {
            boundary_whites.push(v);
        }
        piece_of.insert(d, piece);
    }
    let m = boundary_whites.len();
    if polygon.vertices.len() != m + 1 {
        return Err(ConstructError::Unsupported(format!(
            "polygon has {} corners but the boundary needs {}",
            polygon.vertices.len(),
            m + 1
        )));
    }

    let k = assign_signs(map)?;
    let n = k.size();
    let mut a_b = vec![Rational::zero(); n];
    a_b[k.row_of(b0).expect("b0 is black")] = Rational::one();
    let mut a_w = vec![Complex64::zero(); n];
    for (i, &w) in boundary_whites.iter().enumerate() {
        a_w[k.col_of(w).expect("white")] = polygon.edge(i + 1);
    }
    let gn = gauge_normalize(&k, &a_b, &a_w)?;

    let mut dual = Vec::new();
    let mut face_index = vec![usize::MAX; map.num_faces()];
    for f in map.interior_faces() {
        face_index[f] = dual.len();
        dual.push(DualVertex::Face(f));
    }
    let first_piece = dual.len();
    dual.extend((0..=m).map(DualVertex::Outer));
    let right_of = |d: Dart| -> usize {
        let f = map.face_of(d);
        if f == outer {
            first_piece + piece_of[&d]
        } else {
            face_index[f]
        }
    };

    let mut crossings = Vec::with_capacity(map.num_edges());
    let mut steps: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dual.len()];
    for e in 0..map.num_edges() {
        let db = map.black_dart(e);
        let (b, w) = map.black_white(e);
        let delta = gn.kt[(k.row_of(b).unwrap(), k.col_of(w).unwrap())];
        let (r, l) = (right_of(db), right_of(twin(db)));
        crossings.push((r, l));
        steps[r].push((l, delta));
        steps[l].push((r, -delta));
    }
    let mut psi = vec![None::<Complex64>; dual.len()];
    psi[first_piece] = Some(Complex64::zero());
    let mut queue = VecDeque::from([first_piece]);
    while let Some(x) = queue.pop_front() {
        let z = psi[x].unwrap();
        for &(y, delta) in &steps[x] {
            if psi[y].is_none() {
                psi[y] = Some(z + delta);
                queue.push_back(y);
            }
        }
    }
    let mut psi: Vec<Complex64> = psi
        .into_iter()
        .map(|z| z.ok_or_else(|| ConstructError::Unsupported("dual graph is disconnected".into())))
        .collect::<Result<_, _>>()?;
    let scale = (0..=m).map(|i| polygon.edge(i).norm()).fold(0.0, f64::max);
    let closure_error = (0..map.num_edges())
        .map(|e| {
            let (b, w) = map.black_white(e);
            let delta = gn.kt[(k.row_of(b).unwrap(), k.col_of(w).unwrap())];
            let (r, l) = crossings[e];
            (psi[l] - psi[r] - delta).norm()
        })
        .fold(0.0, f64::max);
    if closure_error > 1e-9 * scale {
        return Err(ConstructError::NotClosed(closure_error));
    }
    let step = psi[first_piece + 1] - psi[first_piece];
    if (step + polygon.edge(1)).norm() < (step - polygon.edge(1)).norm() {
        psi.iter_mut().for_each(|z| *z = -*z);
    }
    let shift = c(polygon.vertices[0]) - psi[first_piece];
    psi.iter_mut().for_each(|z| *z += shift);
    let root_error = (0..=m)
        .map(|i| (psi[first_piece + i] - c(polygon.vertices[i])).norm())
        .fold(0.0, f64::max);

    // Dual vertices around each vertex, counterclockwise; a cut vertex on
    // the boundary sees the outer face as two pieces.
    let sectors: Vec<Vec<usize>> = (0..map.num_vertices())
        .map(|v| {
            let mut out = Vec::new();
            for &d in map.rotation(v) {
                out.push(right_of(twin(d)));
                if map.face_of(twin(d)) == outer && is_cut(v) {
                    out.push(right_of(map.rotation_next(d)));
                }
            }
            out
        })
        .collect();

    let points: Vec<[f64; 2]> = psi.iter().map(|z| [z.re, z.im]).collect();
    let segments = k
        .blacks
        .iter()
        .enumerate()
        .map(|(r, &b)| {
            let u = (0..n)
                .map(|col| gn.kt[(r, col)])
                .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                .expect("nonempty row");
            let u = u / u.norm();
            let base = psi[sectors[b][0]];
            let ts: Vec<f64> = sectors[b].iter().map(|&x| ((psi[x] - base) * u.conj()).re).collect();
            let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (p, q) = (base + u * lo, base + u * hi);
            Segment::new([p.re, p.im], [q.re, q.im])
        })
        .collect();

    Ok(PsiMapping {
        map: map.clone(),
        polygon: polygon.clone(),
        b0,
        blacks: k.blacks.clone(),
        whites: k.whites.clone(),
        kt: gn.kt,
        dual,
        psi: points,
        segments,
        boundary_whites,
        root_error,
        closure_error,
        crossings,
        sectors,
    })
}

impl PsiMapping {
    /// The image of a vertex: a polygon for whites, a back-and-forth path
    /// along the segment for blacks.
    pub fn image(&self, v: usize) -> Vec<[f64; 2]> {
        self.sectors[v].iter().map(|&x| self.psi[x]).collect()
    }

    pub fn white_area(&self, w: usize) -> f64 {
        signed_area(&self.image(w))
    }

    fn scale(&self) -> f64 {
        self.polygon.area().abs().sqrt()
    }

    /// Whites whose image has (numerically) no area.
    pub fn flat_whites(&self) -> Vec<usize> {
        let tol = 1e-9 * self.polygon.area().abs();
        self.whites
            .iter()
            .copied()
            .filter(|&w| self.white_area(w).abs() <= tol)
            .collect()
    }

    /// Net flow into interior whites and out of blacks other than `b0`.
    pub fn flow_residual(&self) -> f64 {
        let n = self.blacks.len();
        let mut worst: f64 = 0.0;
        for (r, &b) in self.blacks.iter().enumerate() {
            if b != self.b0 {
                worst = worst.max((0..n).map(|col| self.kt[(r, col)]).sum::<Complex64>().norm());
            }
        }
        for (col, w) in self.whites.iter().enumerate() {
            if !self.boundary_whites.contains(w) {
                worst = worst.max((0..n).map(|r| self.kt[(r, col)]).sum::<Complex64>().norm());
            }
        }
        worst
    }

    /// `|sum of white areas| - area(Q)`.
    pub fn area_error(&self) -> f64 {
        let total: f64 = self.whites.iter().map(|&w| self.white_area(w)).sum();
        (total.abs() - self.polygon.area().abs()).abs()
    }

    /// Every non-flat white image is convex, all with the same orientation.
    pub fn faces_convex(&self) -> bool {
        let tol = 1e-9 * self.scale() * self.scale();
        let flat = self.flat_whites();
        let mut orientation = 0.0;
        for &w in &self.whites {
            if flat.contains(&w) {
                continue;
            }
            let pts = self.image(w);
            let a = signed_area(&pts).signum();
            if orientation == 0.0 {
                orientation = a;
            } else if a != orientation {
                return false;
            }
            let k = pts.len();
            for i in 0..k {
                let e1 = c(pts[(i + 1) % k]) - c(pts[i]);
                let e2 = c(pts[(i + 2) % k]) - c(pts[(i + 1) % k]);
                if cross(e1, e2) * a < -tol {
                    return false;
                }
            }
        }
        true
    }

    /// For seeded directions `u`, no interior dual vertex is a strict local
    /// extremum of `<psi, u>`.
    pub fn maximum_principle(&self, directions: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nbrs = vec![Vec::new(); self.dual.len()];
        for &(r, l) in &self.crossings {
            nbrs[r].push(l);
            nbrs[l].push(r);
        }
        let tol = 1e-12 * self.scale();
        (0..directions).all(|_| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let u = [a.cos(), a.sin()];
            let h = |x: usize| self.psi[x][0] * u[0] + self.psi[x][1] * u[1];
            self.dual.iter().enumerate().all(|(x, dv)| {
                matches!(dv, DualVertex::Outer(_))
                    || (nbrs[x].iter().any(|&y| h(y) > h(x) + tol) && nbrs[x].iter().any(|&y| h(y) < h(x) - tol))
            })
        })
    }

    /// Pairs of black rows of `K̃` whose directions coincide.
    pub fn parallel_rows(&self) -> Vec<(usize, usize)> {
        let dirs: Vec<Complex64> = self.segments.iter().map(|s| {
            let d = s.direction();
            c(d) / c(d).norm()
        }).collect();
        let mut out = Vec::new();
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                if cross(dirs[i], dirs[j]).abs() < 1e-9 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Vertices whose images lie on one line, joined through flat whites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParallelComponent {
    /// Color-class indices, as in [`Cut`].
    pub cut: Cut,
    pub vertex_ids: Vec<i64>,
    /// Union of the component's images.
    pub extended_edge: Segment,
    pub is_one_cut: bool,
    /// At each end of the extended edge: blacks minus whites having an
    /// endpoint there.
    pub extreme_excess: [i64; 2],
}

pub fn detect_flat_faces(psi: &PsiMapping) -> Vec<ParallelComponent> {
    let map = &psi.map;
    let flat = psi.flat_whites();
    if flat.is_empty() {
        return Vec::new();
    }
    let blacks = map.black_vertices();
    let whites = map.white_vertices();
    let bi: HashMap<usize, usize> = blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let wi: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let mut parent: Vec<usize> = (0..map.num_vertices()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for e in 0..map.num_edges() {
        let (b, w) = map.black_white(e);
        if flat.contains(&w) {
            let (x, y) = (find(&mut parent, b), find(&mut parent, w));
            parent[x] = y;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &w in &flat {
        let root = find(&mut parent, w);
        groups.entry(root).or_default();
    }
    for v in 0..map.num_vertices() {
        let root = find(&mut parent, v);
        if let Some(g) = groups.get_mut(&root) {
            g.push(v);
        }
    }
    let bip = Bipartite::from_embedding(map);
    let row_of: HashMap<usize, usize> = psi.blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut out: Vec<ParallelComponent> = groups
        .into_values()
        .map(|vs| {
            let mut cut = Cut {
                blacks: vs.iter().filter_map(|v| bi.get(v).copied()).collect(),
                whites: vs.iter().filter_map(|v| wi.get(v).copied()).collect(),
            };
            cut.blacks.sort_unstable();
            cut.whites.sort_unstable();
            let pts: Vec<[f64; 2]> = vs.iter().flat_map(|&v| psi.image(v)).collect();
            let d = psi.segments[row_of[&vs.iter().copied().find(|v| bi.contains_key(v)).expect("has a black")]]
                .direction();
            let u = c(d) / c(d).norm();
            let base = c(pts[0]);
            let proj = |p: [f64; 2]| ((c(p) - base) * u.conj()).re;
            let lo = pts.iter().map(|&p| proj(p)).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|&p| proj(p)).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-9 * (hi - lo).abs().max(1e-300);
            let mut excess = [0i64; 2];
            for &v in &vs {
                let ts: Vec<f64> = psi.image(v).iter().map(|&p| proj(p)).collect();
                let sign = if map.color(v) == Color::Black { 1 } else { -1 };
                if ts.iter().any(|&t| (t - lo).abs() <= tol) {
                    excess[0] += sign;
                }
                if ts.iter().any(|&t| (t - hi).abs() <= tol) {
                    excess[1] += sign;
                }
            }
            let (p, q) = (base + u * lo, base + u * hi);
            let mut vertex_ids: Vec<i64> = vs.iter().map(|&v| map.vertex_id(v)).collect();
            vertex_ids.sort_unstable();
            ParallelComponent {
                is_one_cut: bip.is_k_cut(&cut, 1),
                cut,
                vertex_ids,
                extended_edge: Segment::new([p.re, p.im], [q.re, q.im]),
                extreme_excess: excess,
            }
        })
        .collect();
    out.sort_by(|a, b| a.cut.cmp(&b.cut));
    out
}

/// What the round trip through a T-graph established.
#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub segments: usize,
    pub faces: usize,
    pub root_error: f64,
    /// The derived graph has exactly the input's edges under the
    /// construction's vertex correspondence.
    pub isomorphic: bool,
    /// Largest residual of `log(weight / length) = x_b + y_w`.
    pub gauge_residual: f64,
    pub convex_faces: bool,
    pub area_error: f64,
    pub flow_residual: f64,
    pub maximum_principle: bool,
    pub measure: Option<MeasureReport>,
}

impl RoundTripReport {
    pub fn passed(&self) -> bool {
        self.isomorphic
            && self.gauge_residual < 1e-9
            && self.convex_faces
            && self.area_error < 1e-9
            && self.maximum_principle
            && self.measure.as_ref().is_none_or(MeasureReport::passed)
    }
}

fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if x > p[0] {
                inside = !inside;
            }
        }
    }
    inside
}

/// The T-graph read off from `psi`, with the face holding each white and
/// the leftover outer face used as dual root.
pub fn tgraph_of(psi: &PsiMapping) -> Result<(TGraph, Vec<usize>, usize), ConstructError> {
    if !psi.flat_whites().is_empty() {
        return Err(ConstructError::NonGeneric("some white faces are flat".into()));
    }
    let t = TGraph::build(&psi.segments, Ambient::Plane)?;
    let polys: Vec<Vec<[f64; 2]>> = (0..t.num_faces()).map(|f| t.face_polygon(f)).collect();
    let mut face_of_white = Vec::with_capacity(psi.whites.len());
    let mut used = vec![false; t.num_faces()];
    for &w in &psi.whites {
        let pts = psi.image(w);
        let k = pts.len() as f64;
        let centroid = [
            pts.iter().map(|p| p[0]).sum::<f64>() / k,
            pts.iter().map(|p| p[1]).sum::<f64>() / k,
        ];
        let hits: Vec<usize> = (0..t.num_faces()).filter(|&f| point_in_polygon(centroid, &polys[f])).collect();
        match hits.as_slice() {
            [f] if !used[*f] => {
                used[*f] = true;
                face_of_white.push(*f);
            }
            _ => {
                return Err(ConstructError::NonGeneric(format!(
                    "white {} does not sit in a single face",
                    psi.map.vertex_id(w)
                )))
            }
        }
    }
    let rest: Vec<usize> = (0..t.num_faces()).filter(|&f| !used[f]).collect();
    match rest.as_slice() {
        [root] if t.faces()[*root].outer => Ok((t, face_of_white, *root)),
        _ => Err(ConstructError::NonGeneric("faces and whites do not correspond".into())),
    }
}

/// Builds the T-graph, compares its derived graph with the input and runs
/// the exhaustive measure check when small enough.
pub fn roundtrip_check(map: &PlanarMap, polygon: &Polygon, b0: Option<usize>) -> Result<RoundTripReport, ConstructError> {
    let psi = build_psi(map, polygon, b0)?;
    let (t, face_of_white, root) = tgraph_of(&psi)?;
    let g = t.derived_dimer_graph(Some(root))?;
    let col: HashMap<usize, usize> = psi.whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let row: HashMap<usize, usize> = psi.blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();

    let mut isomorphic = g.live_edges().count() == map.num_edges();
    let mut ratios = Vec::new();
    for e in 0..map.num_edges() {
        let (b, w) = map.black_white(e);
        match g.edge_between(face_of_white[col[&w]], row[&b]) {
            Some(i) => ratios.push((row[&b], col[&w], rational_to_f64(&map.edge(e).weight) / g.edges[i].length)),
            None => isomorphic = false,
        }
    }
    let gauge_residual = if isomorphic { gauge_fit(psi.blacks.len(), &ratios) } else { f64::INFINITY };
    let measure = if t.num_segments() <= 8 && t.interior_vertices().len() <= 20 {
        Some(verify_measure_preservation(&t, Some(root))?)
    } else {
        None
    };
    Ok(RoundTripReport {
        segments: t.num_segments(),
        faces: t.num_faces(),
        root_error: psi.root_error,
        isomorphic,
        gauge_residual,
        convex_faces: psi.faces_convex(),
        area_error: psi.area_error(),
        flow_residual: psi.flow_residual(),
        maximum_principle: psi.maximum_principle(8, 0),
        measure,
    })
}

/// Least-squares fit of `log r = x_b + y_w`; returns the worst residual.
fn gauge_fit(n: usize, ratios: &[(usize, usize, f64)]) -> f64 {
    let a = DMatrix::from_fn(ratios.len() + 1, 2 * n, |i, j| {
        if i == ratios.len() {
            // Pin the free additive constant.
            f64::from(j == n)
        } else {
            let (b, w, _) = ratios[i];
            f64::from(j == b || j == n + w)
        }
    });
    let rhs = DVector::from_fn(ratios.len() + 1, |i, _| if i == ratios.len() { 0.0 } else { ratios[i].2.ln() });
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&rhs, 1e-12).expect("svd solve");
    (&a * x - rhs).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::kasteleyn::randomize_weights;

    #[test]
    fn polygon_closes_and_is_convex() {
        for m in 2..8 {
            let q = choose_polygon(m, 7).unwrap();
            assert_eq!(q.vertices.len(), m + 1);
            let sum: Complex64 = (0..=m).map(|i| q.edge(i)).sum();
            assert!(sum.norm() < 1e-14);
            assert!(q.is_convex());
        }
        assert_eq!(choose_polygon(1, 0), Err(ConstructError::DegeneratePolygon(2)));
    }

    #[test]
    fn four_cycle_gives_two_segments() {
        let map = randomize_weights(&gallery::four_cycle_unit(), 3);
        let q = choose_polygon(2, 1).unwrap();
        let psi = build_psi(&map, &q, None).unwrap();
        assert!(psi.root_error < 1e-12);
        assert!(psi.flow_residual() < 1e-12);
        assert_eq!(psi.segments.len(), 2);
        let report = roundtrip_check(&map, &q, None).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.faces, 3);
    }

    #[test]
    fn grid_round_trip() {
        let map = randomize_weights(&gallery::grid_minus_corner(), 11);
        let m = map.boundary_profile().m;
        let q = choose_polygon(m, 2).unwrap();
        let report = roundtrip_check(&map, &q, None).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn honeycomb_faces_are_convex() {
        let w = |x: i64| Rational::from_integer(x.into());
        let map = gallery::honeycomb_patch(7, 2, [w(4), w(5), w(6)]);
        let q = choose_polygon(map.boundary_profile().m, 5).unwrap();
        let psi = build_psi(&map, &q, None).unwrap();
        assert!(psi.flat_whites().is_empty());
        assert!(psi.faces_convex());
        assert!(psi.area_error() < 1e-9);
        assert!(psi.maximum_principle(8, 1));
    }

    #[test]
    fn split_vertex_gives_one_flat_component() {
        // (1, 1) is an interior black of the 4x4 grid.
        let base = gallery::grid_with(4, 4, &[], |_, _| Rational::one());
        let b = base.vertex_index(gallery::grid_id(1, 1, 4)).unwrap();
        assert!(!base.boundary_vertices().contains(&b));
        let map = randomize_weights(&gallery::split_black(&base, base.vertex_id(b), 2, 100, 101), 4);
        let q = choose_polygon(map.boundary_profile().m, 9).unwrap();
        let psi = build_psi(&map, &q, None).unwrap();
        let comps = detect_flat_faces(&psi);
        assert_eq!(comps.len(), 1);
        assert!(comps[0].is_one_cut);
        assert!(comps[0].vertex_ids.contains(&100) && comps[0].vertex_ids.contains(&101));
        assert_eq!(comps[0].extreme_excess, [1, 1]);
    }

    #[test]
    fn deterministic_segments() {
        let map = randomize_weights(&gallery::grid_minus_corner(), 1);
        let q = choose_polygon(map.boundary_profile().m, 3).unwrap();
        let a = build_psi(&map, &q, None).unwrap();
        let b = build_psi(&map, &q, None).unwrap();
        assert_eq!(a.segments, b.segments);
    }
}
