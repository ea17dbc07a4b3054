//! Small named instances used throughout the tests, the guide and the CLI.
//!
//! Every builder places vertices in the plane and derives the rotation
//! system from angles, so the instances are honest plane (or torus)
//! embeddings.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;

use crate::linalg::Rational;
use crate::planarmap::{Color, PlanarMap, RawEdge, RawMap, Surface, TorusMap};
use crate::tgraph::Segment;

fn int(n: i64) -> Rational {
    BigRational::from_integer(n.into())
}

/// Incremental builder for geometrically embedded bipartite maps.
#[derive(Clone, Debug, Default)]
pub struct GeoMap {
    vertices: Vec<(i64, Color)>,
    positions: HashMap<i64, [f64; 2]>,
    edges: Vec<RawEdge>,
}

impl GeoMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, id: i64, color: Color, at: [f64; 2]) -> &mut Self {
        self.vertices.push((id, color));
        self.positions.insert(id, at);
        self
    }

    pub fn edge(&mut self, u: i64, v: i64, weight: Rational) -> &mut Self {
        let id = self.edges.len() as i64;
        self.edges.push(RawEdge {
            id,
            u,
            v,
            weight,
            crossing: None,
        });
        self
    }

    pub fn torus_edge(&mut self, u: i64, v: i64, weight: Rational, crossing: [i32; 2]) -> &mut Self {
        let id = self.edges.len() as i64;
        self.edges.push(RawEdge {
            id,
            u,
            v,
            weight,
            crossing: Some(crossing),
        });
        self
    }

    pub fn has_vertex(&self, id: i64) -> bool {
        self.positions.contains_key(&id)
    }

    /// Plane map with the unbounded face designated as outer.
    pub fn plane(&self) -> PlanarMap {
        let raw = RawMap {
            surface: Surface::Plane,
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            rotations: BTreeMap::new(),
            outer_face_dart: None,
        }
        .with_geometric_rotations(&self.positions, None);
        let outer = self.outer_dart();
        RawMap {
            outer_face_dart: Some(outer),
            ..raw
        }
        .build_plane()
        .expect("gallery plane map is valid")
    }

    pub fn torus(&self, periods: ([f64; 2], [f64; 2])) -> TorusMap {
        RawMap {
            surface: Surface::Torus,
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            rotations: BTreeMap::new(),
            outer_face_dart: None,
        }
        .with_geometric_rotations(&self.positions, Some(periods))
        .build_torus()
        .expect("gallery torus map is valid")
    }

    /// A dart with the unbounded face on its right. From the lowest (then
    /// leftmost) vertex take the incident edge of smallest angle measured
    /// counterclockwise from straight down; the region just clockwise of it
    /// is exterior.
    fn outer_dart(&self) -> (i64, i64) {
        let (&start, _) = self
            .positions
            .iter()
            .min_by(|a, b| {
                a.1[1]
                    .total_cmp(&b.1[1])
                    .then(a.1[0].total_cmp(&b.1[0]))
                    .then(a.0.cmp(b.0))
            })
            .expect("non-empty map");
        let p = self.positions[&start];
        let angle_from_down = |q: [f64; 2]| {
            let a = (q[1] - p[1]).atan2(q[0] - p[0]) + std::f64::consts::FRAC_PI_2;
            a.rem_euclid(std::f64::consts::TAU)
        };
        let best = self
            .edges
            .iter()
            .filter(|e| e.u == start || e.v == start)
            .min_by(|a, b| {
                let qa = self.positions[&if a.u == start { a.v } else { a.u }];
                let qb = self.positions[&if b.u == start { b.v } else { b.u }];
                angle_from_down(qa).total_cmp(&angle_from_down(qb))
            })
            .expect("start vertex has an edge");
        (best.id, start)
    }
}

pub fn single_edge(weight: Rational) -> PlanarMap {
    let mut g = GeoMap::new();
    g.vertex(0, Color::Black, [0.0, 0.0])
        .vertex(1, Color::White, [1.0, 0.0])
        .edge(0, 1, weight);
    g.plane()
}

/// The 4-cycle b0 w1 b2 w3 on the unit square with the given edge weights
/// (edges in order b0w1, w1b2, b2w3, w3b0).
pub fn four_cycle(weights: [Rational; 4]) -> PlanarMap {
    let [a, b, c, d] = weights;
    let mut g = GeoMap::new();
    g.vertex(0, Color::Black, [0.0, 0.0])
        .vertex(1, Color::White, [1.0, 0.0])
        .vertex(2, Color::Black, [1.0, 1.0])
        .vertex(3, Color::White, [0.0, 1.0])
        .edge(0, 1, a)
        .edge(1, 2, b)
        .edge(2, 3, c)
        .edge(3, 0, d);
    g.plane()
}

pub fn four_cycle_unit() -> PlanarMap {
    four_cycle([int(1), int(1), int(1), int(1)])
}

/// Regular hexagon with alternating colors and the given weights.
pub fn six_cycle(weights: [Rational; 6]) -> PlanarMap {
    let mut g = GeoMap::new();
    for k in 0..6 {
        let a = std::f64::consts::PI / 3.0 * k as f64;
        let color = if k % 2 == 0 { Color::Black } else { Color::White };
        g.vertex(k, color, [a.cos(), a.sin()]);
    }
    for (k, w) in weights.into_iter().enumerate() {
        let k = k as i64;
        g.edge(k, (k + 1) % 6, w);
    }
    g.plane()
}

pub fn six_cycle_unit() -> PlanarMap {
    six_cycle([int(1), int(1), int(1), int(1), int(1), int(1)])
}

/// Vertex id of grid point `(x, y)` in a grid with `cols` columns.
pub fn grid_id(x: i64, y: i64, cols: i64) -> i64 {
    y * cols + x
}

/// Rectangular grid graph on `cols x rows` points minus `removed`, with
/// `(x + y)` even coloured black. `weight` receives the two endpoints.
pub fn grid_with(
    cols: i64,
    rows: i64,
    removed: &[(i64, i64)],
    mut weight: impl FnMut((i64, i64), (i64, i64)) -> Rational,
) -> PlanarMap {
    let mut g = GeoMap::new();
    let present = |x: i64, y: i64| !removed.contains(&(x, y));
    for y in 0..rows {
        for x in 0..cols {
            if present(x, y) {
                let color = if (x + y) % 2 == 0 {
                    Color::Black
                } else {
                    Color::White
                };
                g.vertex(grid_id(x, y, cols), color, [x as f64, y as f64]);
            }
        }
    }
    for y in 0..rows {
        for x in 0..cols {
            if !present(x, y) {
                continue;
            }
            if x + 1 < cols && present(x + 1, y) {
                let w = weight((x, y), (x + 1, y));
                g.edge(grid_id(x, y, cols), grid_id(x + 1, y, cols), w);
            }
            if y + 1 < rows && present(x, y + 1) {
                let w = weight((x, y), (x, y + 1));
                g.edge(grid_id(x, y, cols), grid_id(x, y + 1, cols), w);
            }
        }
    }
    g.plane()
}

/// The 3x3 grid with the corner (2, 2) removed, unit weights.
pub fn grid_minus_corner() -> PlanarMap {
    grid_with(3, 3, &[(2, 2)], |_, _| int(1))
}

/// Brick-wall honeycomb patch on a `cols x rows` point grid: every
/// horizontal edge is present, vertical edges only where `x + y` is even.
/// Weights are assigned by direction as seen from the black endpoint:
/// east, west, vertical.
pub fn honeycomb_patch(cols: i64, rows: i64, weights: [Rational; 3]) -> PlanarMap {
    let [east, west, vertical] = weights;
    let mut g = GeoMap::new();
    for y in 0..rows {
        for x in 0..cols {
            let color = if (x + y) % 2 == 0 {
                Color::Black
            } else {
                Color::White
            };
            g.vertex(grid_id(x, y, cols), color, [x as f64, y as f64]);
        }
    }
    for y in 0..rows {
        for x in 0..cols {
            if x + 1 < cols {
                let black_left = (x + y) % 2 == 0;
                let w = if black_left { east.clone() } else { west.clone() };
                g.edge(grid_id(x, y, cols), grid_id(x + 1, y, cols), w);
            }
            if y + 1 < rows && (x + y) % 2 == 0 {
                g.edge(grid_id(x, y, cols), grid_id(x, y + 1, cols), vertical.clone());
            }
        }
    }
    g.plane()
}

/// Honeycomb fundamental domain: one black, one white and three edges
/// with crossings (0,0), (1,0), (0,1) carrying weights `a`, `b`, `c`.
pub fn honeycomb_torus(a: Rational, b: Rational, c: Rational) -> TorusMap {
    let e1 = [1.0, 0.0];
    let e2 = [0.5, 3f64.sqrt() / 2.0];
    let w = [-(e1[0] + e2[0]) / 3.0, -(e1[1] + e2[1]) / 3.0];
    let mut g = GeoMap::new();
    g.vertex(0, Color::Black, [0.0, 0.0])
        .vertex(1, Color::White, w)
        .torus_edge(0, 1, a, [0, 0])
        .torus_edge(0, 1, b, [1, 0])
        .torus_edge(0, 1, c, [0, 1]);
    g.torus((e1, e2))
}

/// Square lattice with a 2x2 fundamental domain; `weights` has eight
/// entries, one per edge.
pub fn square_torus(weights: &[i64; 8]) -> TorusMap {
    let mut g = GeoMap::new();
    // (0,0) b, (1,0) w, (0,1) w, (1,1) b
    g.vertex(0, Color::Black, [0.0, 0.0])
        .vertex(1, Color::White, [1.0, 0.0])
        .vertex(2, Color::White, [0.0, 1.0])
        .vertex(3, Color::Black, [1.0, 1.0]);
    let w = |i: usize| int(weights[i]);
    g.torus_edge(0, 1, w(0), [0, 0])
        .torus_edge(0, 1, w(1), [-1, 0])
        .torus_edge(0, 2, w(2), [0, 0])
        .torus_edge(0, 2, w(3), [0, -1])
        .torus_edge(3, 2, w(4), [0, 0])
        .torus_edge(3, 2, w(5), [1, 0])
        .torus_edge(3, 1, w(6), [0, 0])
        .torus_edge(3, 1, w(7), [0, 1]);
    g.torus(([2.0, 0.0], [0.0, 2.0]))
}

/// Square-octagon lattice: a square with corners at the four compass
/// points sits at every point of Z^2; north links to the south corner of
/// the square above and east to the west corner of the square to the right.
/// Colours alternate between neighbouring squares, so the fundamental
/// domain holds two squares and has periods (1,1) and (1,-1).
/// `weights` has twelve entries.
pub fn square_octagon_torus(weights: &[i64; 12]) -> TorusMap {
    let r = 0.3;
    let corner = |k: usize| -> [f64; 2] {
        match k {
            0 => [r, 0.0],  // east
            1 => [0.0, r],  // north
            2 => [-r, 0.0], // west
            _ => [0.0, -r], // south
        }
    };
    let mut g = GeoMap::new();
    // Square s at (s, 0); corner k of square s has id 4s + k.
    // Square 0: east/west black, north/south white; square 1 swaps.
    for s in 0..2usize {
        for k in 0..4usize {
            let black = (k % 2 == 0) == (s == 0);
            let c = corner(k);
            g.vertex(
                (4 * s + k) as i64,
                if black { Color::Black } else { Color::White },
                [s as f64 + c[0], c[1]],
            );
        }
    }
    let w = |i: usize| int(weights[i]);
    let id = |s: usize, k: usize| (4 * s + k) as i64;
    let mut i = 0;
    for s in 0..2 {
        for k in 0..4 {
            g.torus_edge(id(s, k), id(s, (k + 1) % 4), w(i), [0, 0]);
            i += 1;
        }
    }
    // Periods a = (1,1), b = (1,-1). Square 0 at origin, square 1 at (1,0) = (a+b)/2.
    // East of square 0 is square 1 (same cell); east of square 1 is square 0 at (2,0) = a + b.
    g.torus_edge(id(0, 0), id(1, 2), w(8), [0, 0]);
    g.torus_edge(id(1, 0), id(0, 2), w(9), [1, 1]);
    // North of square 0 is at (0,1) = (a - b)/2 + ... = square 1 shifted by (a-b)/2 - (a+b)/2 = -b.
    g.torus_edge(id(0, 1), id(1, 3), w(10), [0, -1]);
    // North of square 1 at (1,1) = a: square 0 shifted by a.
    g.torus_edge(id(1, 1), id(0, 3), w(11), [1, 0]);
    g.torus(([1.0, 1.0], [1.0, -1.0]))
}

/// Splits black vertex `target` of a plane map in two, inserting a new
/// degree-two white between the halves. The first `keep` darts of the
/// target's rotation (counterclockwise from its first dart) stay on the
/// original vertex; the rest move to the new black. The new white and its
/// two neighbours form a 1-cut whenever the new white is interior.
pub fn split_black(map: &PlanarMap, target: i64, keep: usize, new_black: i64, new_white: i64) -> PlanarMap {
    let mut raw = map.to_raw();
    let t = map.vertex_index(target).expect("target vertex exists");
    assert_eq!(map.color(t), Color::Black);
    let rot: Vec<i64> = map
        .rotation(t)
        .iter()
        .map(|&d| map.edge(d / 2).id)
        .collect();
    assert!(keep >= 1 && keep < rot.len());
    let next_edge = raw.edges.iter().map(|e| e.id).max().unwrap_or(0) + 1;
    raw.vertices.push((new_black, Color::Black));
    raw.vertices.push((new_white, Color::White));
    let moved: Vec<i64> = rot[keep..].to_vec();
    for e in raw.edges.iter_mut() {
        if moved.contains(&e.id) {
            if e.u == target {
                e.u = new_black;
            } else {
                e.v = new_black;
            }
        }
    }
    let ea = next_edge;
    let eb = next_edge + 1;
    raw.edges.push(RawEdge {
        id: ea,
        u: target,
        v: new_white,
        weight: int(1),
        crossing: None,
    });
    raw.edges.push(RawEdge {
        id: eb,
        u: new_black,
        v: new_white,
        weight: int(1),
        crossing: None,
    });
    // Counterclockwise: target keeps rot[..keep] then the link to the new
    // white; the new black has rot[keep..] then its link.
    let mut kept = rot[..keep].to_vec();
    kept.push(ea);
    let mut other = moved.clone();
    other.push(eb);
    raw.rotations.insert(target, kept);
    raw.rotations.insert(new_black, other);
    raw.rotations.insert(new_white, vec![eb, ea]);
    raw.build_plane().expect("split keeps the map valid")
}

/// Single open segment from (0,0) to (1,0).
pub fn single_segment() -> Vec<Segment> {
    vec![Segment::new([0.0, 0.0], [1.0, 0.0])]
}

/// The letter T: a horizontal bar and a stem teeing into its midpoint.
pub fn t_shape() -> Vec<Segment> {
    vec![
        Segment::new([0.0, 0.0], [2.0, 0.0]),
        Segment::new([1.0, 0.0], [1.0, 1.0]),
    ]
}

/// The three open sides of a triangle.
pub fn triangle() -> Vec<Segment> {
    vec![
        Segment::new([0.0, 0.0], [4.0, 0.0]),
        Segment::new([4.0, 0.0], [0.0, 4.0]),
        Segment::new([0.0, 4.0], [0.0, 0.0]),
    ]
}

/// Triangle with one cevian from the apex (0,4) down to (1,0), which tees
/// into the base at distances 1 and 3 from its ends. Four segments.
pub fn cevian() -> Vec<Segment> {
    vec![
        Segment::new([0.0, 0.0], [4.0, 0.0]),
        Segment::new([4.0, 0.0], [0.0, 4.0]),
        Segment::new([0.0, 4.0], [0.0, 0.0]),
        Segment::new([0.0, 4.0], [1.0, 0.0]),
    ]
}

/// Square frame with two inner segments, six segments in all.
pub fn framed_square() -> Vec<Segment> {
    vec![
        Segment::new([0.0, 0.0], [4.0, 0.0]),
        Segment::new([4.0, 0.0], [4.0, 4.0]),
        Segment::new([4.0, 4.0], [0.0, 4.0]),
        Segment::new([0.0, 4.0], [0.0, 0.0]),
        Segment::new([1.0, 0.0], [1.0, 4.0]),
        Segment::new([1.0, 2.0], [4.0, 2.0]),
    ]
}

/// Torus T-graph with a horizontal loop and a slope-two loop, each teeing
/// into the other.
pub fn torus_pair() -> Vec<Segment> {
    vec![
        Segment::new([0.0, 0.0], [1.0, 0.0]),
        Segment::new([0.5, 0.0], [1.5, 2.0]),
    ]
}

/// Torus T-graph: a vertical loop and a loop of direction (2,1).
pub fn torus_pair_skew() -> Vec<Segment> {
    vec![
        Segment::new([0.25, 0.0], [0.25, 1.0]),
        Segment::new([0.25, 0.5], [2.25, 1.5]),
    ]
}

/// Torus T-graph from two horizontal and two vertical loops.
pub fn torus_grid() -> Vec<Segment> {
    vec![
        Segment::new([0.25, 0.0], [1.25, 0.0]),
        Segment::new([0.75, 0.5], [1.75, 0.5]),
        Segment::new([0.25, 0.5], [0.25, 1.5]),
        Segment::new([0.75, 0.0], [0.75, 1.0]),
    ]
}
