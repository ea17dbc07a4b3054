//! Kasteleyn signs, partition functions, matching enumeration, gauge
//! normalization and degeneracy diagnostics.
//!
//! Rows of a Kasteleyn matrix are black vertices and columns are white
//! vertices, both in increasing vertex-index order.

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{det_rational, format_rational, rational_to_f64, solve_rational, Rational};
use crate::planarmap::{edge_of, Color, Embedding, PlanarMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KasteleynError {
    #[error("graph is unbalanced: {black} black and {white} white vertices")]
    Unbalanced { black: usize, white: usize },
    #[error("too large for exhaustive search ({0} vertices)")]
    TooLarge(usize),
    #[error("Kasteleyn matrix is singular")]
    Singular,
    #[error("gauge solve has a zero component at {side} index {index}")]
    ZeroComponent { side: &'static str, index: usize },
}

/// Exact signed weight matrix together with the per-edge signs.
#[derive(Clone, Debug, PartialEq)]
pub struct KasteleynMatrix {
    /// Vertex index of each row.
    pub blacks: Vec<usize>,
    /// Vertex index of each column.
    pub whites: Vec<usize>,
    pub entries: Vec<Vec<Rational>>,
    /// `+1` or `-1` for each edge of the map.
    pub signs: Vec<i8>,
}

impl KasteleynMatrix {
    pub fn size(&self) -> usize {
        self.blacks.len()
    }

    pub fn row_of(&self, black: usize) -> Option<usize> {
        self.blacks.iter().position(|&b| b == black)
    }

    pub fn col_of(&self, white: usize) -> Option<usize> {
        self.whites.iter().position(|&w| w == white)
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |r, c| Complex64::new(rational_to_f64(&self.entries[r][c]), 0.0))
    }

    /// Entries as `"p/q"` strings, row by row.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect()
    }
}

/// Required sign product around a face of the given dart count.
fn required_sign(degree: usize) -> i8 {
    if (degree / 2 + 1) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Signs satisfying the face rule on every face except `skip_face` (the
/// outer face in the plane). On the torus pass `None`; the rule then holds
/// on every face of a balanced map.
///
/// Spanning-tree edges get `+`; the remaining edges are fixed face by face
/// from the leaves of a dual spanning tree toward its root.
pub fn face_rule_signs(emb: &Embedding, skip_face: Option<usize>) -> Vec<i8> {
    let ne = emb.num_edges();
    let nv = emb.num_vertices();
    let mut in_tree = vec![false; ne];
    let mut seen = vec![false; nv];
    let mut queue = VecDeque::new();
    if nv > 0 {
        seen[0] = true;
        queue.push_back(0);
    }
    while let Some(v) = queue.pop_front() {
        for &d in emb.rotation(v) {
            let w = emb.head(d);
            if !seen[w] {
                seen[w] = true;
                in_tree[edge_of(d)] = true;
                queue.push_back(w);
            }
        }
    }

    let nf = emb.num_faces();
    let root = skip_face.unwrap_or(0);
    let mut parent_edge: Vec<Option<usize>> = vec![None; nf];
    let mut dual_tree = vec![false; ne];
    let mut reached = vec![false; nf];
    let mut order = vec![root];
    reached[root] = true;
    let mut i = 0;
    while i < order.len() {
        let f = order[i];
        i += 1;
        for &d in &emb.faces()[f].darts {
            let e = edge_of(d);
            if in_tree[e] {
                continue;
            }
            let g = emb.left_face(d);
            if !reached[g] {
                reached[g] = true;
                parent_edge[g] = Some(e);
                dual_tree[e] = true;
                order.push(g);
            }
        }
    }

    let mut signs = vec![1i8; ne];
    let mut fixed: Vec<bool> = (0..ne).map(|e| !dual_tree[e]).collect();
    for &f in order.iter().rev() {
        let Some(pe) = parent_edge[f] else { continue };
        let mut product = 1i8;
        for &d in &emb.faces()[f].darts {
            let e = edge_of(d);
            if e != pe {
                debug_assert!(fixed[e]);
                product *= signs[e];
            }
        }
        // The parent edge may appear twice on a face only if it is a
        // bridge, and bridges are tree edges.
        signs[pe] = required_sign(emb.faces()[f].degree()) * product;
        fixed[pe] = true;
    }
    signs
}

/// True when every face other than `skip_face` satisfies the sign rule.
pub fn signs_satisfy_rule(emb: &Embedding, signs: &[i8], skip_face: Option<usize>) -> bool {
    emb.faces().iter().enumerate().all(|(f, face)| {
        Some(f) == skip_face
            || face.darts.iter().map(|&d| signs[edge_of(d)]).product::<i8>() == required_sign(face.degree())
    })
}

fn balanced_sides(emb: &Embedding) -> Result<(Vec<usize>, Vec<usize>), KasteleynError> {
    let blacks = emb.black_vertices();
    let whites = emb.white_vertices();
    if blacks.len() != whites.len() {
        return Err(KasteleynError::Unbalanced {
            black: blacks.len(),
            white: whites.len(),
        });
    }
    Ok((blacks, whites))
}

/// Kasteleyn matrix of a plane map.
pub fn assign_signs(map: &PlanarMap) -> Result<KasteleynMatrix, KasteleynError> {
    let (blacks, whites) = balanced_sides(map)?;
    let signs = face_rule_signs(map, Some(map.outer_face()));
    Ok(matrix_with_signs(map, blacks, whites, signs))
}

pub(crate) fn matrix_with_signs(
    emb: &Embedding,
    blacks: Vec<usize>,
    whites: Vec<usize>,
    signs: Vec<i8>,
) -> KasteleynMatrix {
    let n = blacks.len();
    let row: HashMap<usize, usize> = blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let col: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let mut entries = vec![vec![Rational::zero(); n]; n];
    for e in 0..emb.num_edges() {
        let (b, w) = emb.black_white(e);
        let weight = &emb.edge(e).weight;
        let term = if signs[e] > 0 { weight.clone() } else { -weight.clone() };
        entries[row[&b]][col[&w]] += term;
    }
    KasteleynMatrix {
        blacks,
        whites,
        entries,
        signs,
    }
}

/// `|det K|`, which is the weighted number of perfect matchings.
pub fn partition_function(k: &KasteleynMatrix) -> Rational {
    det_rational(&k.entries).abs()
}

/// A bipartite graph given by edge list, used where no embedding exists.
#[derive(Clone, Debug, PartialEq)]
pub struct Bipartite {
    pub num_black: usize,
    pub num_white: usize,
    /// `(black, white)` per edge.
    pub edges: Vec<(usize, usize)>,
}

impl Bipartite {
    /// Blacks and whites numbered by their order among vertices of that color.
    pub fn from_embedding(emb: &Embedding) -> Bipartite {
        let blacks = emb.black_vertices();
        let whites = emb.white_vertices();
        let bi: HashMap<usize, usize> = blacks.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let wi: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        Bipartite {
            num_black: blacks.len(),
            num_white: whites.len(),
            edges: (0..emb.num_edges())
                .map(|e| {
                    let (b, w) = emb.black_white(e);
                    (bi[&b], wi[&w])
                })
                .collect(),
        }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_black];
        for (e, &(b, w)) in self.edges.iter().enumerate() {
            adj[b].push((w, e));
        }
        adj
    }

    /// All perfect matchings as sorted edge lists: the lowest unmatched
    /// black is matched through each of its edges in edge order.
    pub fn perfect_matchings(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if self.num_black != self.num_white {
            return out;
        }
        let adj = self.adjacency();
        let mut used = vec![false; self.num_white];
        let mut chosen = Vec::with_capacity(self.num_black);
        fn go(
            b: usize,
            adj: &[Vec<(usize, usize)>],
            used: &mut [bool],
            chosen: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if b == adj.len() {
                let mut m = chosen.clone();
                m.sort_unstable();
                out.push(m);
                return;
            }
            for &(w, e) in &adj[b] {
                if !used[w] {
                    used[w] = true;
                    chosen.push(e);
                    go(b + 1, adj, used, chosen, out);
                    chosen.pop();
                    used[w] = false;
                }
            }
        }
        go(0, &adj, &mut used, &mut chosen, &mut out);
        out
    }

    /// Maximum matching by augmenting paths; `mate_of_white[w]` is the
    /// matched edge. Vertices in `removed` are ignored.
    fn max_matching(&self, removed_black: &[bool], removed_white: &[bool]) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut mate_w: Vec<Option<usize>> = vec![None; self.num_white];
        fn augment(
            b: usize,
            adj: &[Vec<(usize, usize)>],
            edges: &[(usize, usize)],
            removed_white: &[bool],
            visited: &mut [bool],
            mate_w: &mut [Option<usize>],
        ) -> bool {
            for &(w, e) in &adj[b] {
                if removed_white[w] || visited[w] {
                    continue;
                }
                visited[w] = true;
                let free = match mate_w[w] {
                    None => true,
                    Some(m) => augment(edges[m].0, adj, edges, removed_white, visited, mate_w),
                };
                if free {
                    mate_w[w] = Some(e);
                    return true;
                }
            }
            false
        }
        for b in 0..self.num_black {
            if removed_black[b] {
                continue;
            }
            let mut visited = vec![false; self.num_white];
            augment(b, &adj, &self.edges, removed_white, &mut visited, &mut mate_w);
        }
        mate_w
    }

    fn perfect_without(&self, removed_black: &[bool], removed_white: &[bool]) -> bool {
        let nb = removed_black.iter().filter(|r| !**r).count();
        let nw = removed_white.iter().filter(|r| !**r).count();
        if nb != nw {
            return false;
        }
        let mate = self.max_matching(removed_black, removed_white);
        mate.iter().filter(|m| m.is_some()).count() == nw
    }

    pub fn has_perfect_matching(&self) -> bool {
        self.perfect_without(&vec![false; self.num_black], &vec![false; self.num_white])
    }

    /// A `(-1)`-cut when no perfect matching exists (ignoring removed
    /// vertices): whites reachable from an unmatched white by alternating
    /// paths, with their neighbours.
    fn minus_one_cut_without(&self, removed_black: &[bool], removed_white: &[bool]) -> Option<Cut> {
        let mate_w = self.max_matching(removed_black, removed_white);
        let start = (0..self.num_white).find(|&w| !removed_white[w] && mate_w[w].is_none())?;
        let mut mate_b: Vec<Option<usize>> = vec![None; self.num_black];
        for (w, m) in mate_w.iter().enumerate() {
            if let Some(e) = m {
                mate_b[self.edges[*e].0] = Some(w);
            }
        }
        let mut white_adj = vec![Vec::new(); self.num_white];
        for &(b, w) in &self.edges {
            if !removed_black[b] {
                white_adj[w].push(b);
            }
        }
        let mut in_w = vec![false; self.num_white];
        let mut in_b = vec![false; self.num_black];
        in_w[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(w) = queue.pop_front() {
            for &b in &white_adj[w] {
                if in_b[b] {
                    continue;
                }
                in_b[b] = true;
                if let Some(w2) = mate_b[b] {
                    if !in_w[w2] {
                        in_w[w2] = true;
                        queue.push_back(w2);
                    }
                }
            }
        }
        Some(Cut {
            blacks: (0..self.num_black).filter(|&b| in_b[b]).collect(),
            whites: (0..self.num_white).filter(|&w| in_w[w]).collect(),
        })
    }

    pub fn minus_one_cut(&self) -> Option<Cut> {
        if self.num_black == self.num_white && self.has_perfect_matching() {
            return None;
        }
        self.minus_one_cut_without(&vec![false; self.num_black], &vec![false; self.num_white])
    }

    /// Edges contained in no perfect matching.
    pub fn unused_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| {
                let (b, w) = self.edges[e];
                let mut rb = vec![false; self.num_black];
                let mut rw = vec![false; self.num_white];
                rb[b] = true;
                rw[w] = true;
                !self.perfect_without(&rb, &rw)
            })
            .collect()
    }

    /// A 0-cut witnessing that edge `e` is unused.
    fn zero_cut_for(&self, e: usize) -> Option<Cut> {
        let (b, w) = self.edges[e];
        let mut rb = vec![false; self.num_black];
        let mut rw = vec![false; self.num_white];
        rb[b] = true;
        rw[w] = true;
        let mut cut = self.minus_one_cut_without(&rb, &rw)?;
        cut.blacks.push(b);
        cut.blacks.sort_unstable();
        Some(cut)
    }

    fn white_neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_white];
        for &(b, w) in &self.edges {
            if !adj[w].contains(&b) {
                adj[w].push(b);
            }
        }
        adj
    }

    /// True when `cut` is a `k`-cut: at least one white, `k` more blacks
    /// than whites, and no edge from a white inside to a black outside.
    pub fn is_k_cut(&self, cut: &Cut, k: i64) -> bool {
        if cut.whites.is_empty() || cut.blacks.len() as i64 - cut.whites.len() as i64 != k {
            return false;
        }
        self.edges
            .iter()
            .all(|&(b, w)| !cut.whites.contains(&w) || cut.blacks.contains(&b))
    }

    /// Tight 1-cuts `W ∪ N(W)` with `|N(W)| = |W| + 1` and at least two
    /// whites outside, found by subset search over whites.
    pub fn tight_one_cuts(&self) -> Result<Vec<Cut>, KasteleynError> {
        let nw = self.num_white;
        if nw > 20 {
            return Err(KasteleynError::TooLarge(self.num_black + nw));
        }
        let adj = self.white_neighbours();
        let mut out = Vec::new();
        for mask in 1u32..(1u32 << nw) {
            let size = mask.count_ones() as usize;
            if size + 2 > nw {
                continue;
            }
            let mut nb = vec![false; self.num_black];
            for (w, list) in adj.iter().enumerate() {
                if mask >> w & 1 == 1 {
                    for &b in list {
                        nb[b] = true;
                    }
                }
            }
            let blacks: Vec<usize> = (0..self.num_black).filter(|&b| nb[b]).collect();
            if blacks.len() == size + 1 {
                out.push(Cut {
                    blacks,
                    whites: (0..nw).filter(|&w| mask >> w & 1 == 1).collect(),
                });
            }
        }
        Ok(out)
    }
}

/// A vertex subset, split by color (indices within each color class).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Cut {
    pub blacks: Vec<usize>,
    pub whites: Vec<usize>,
}

impl Cut {
    pub fn size(&self) -> usize {
        self.blacks.len() + self.whites.len()
    }
}

/// A perfect matching as a sorted list of edge indices, with its weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub edges: Vec<usize>,
    pub weight: Rational,
}

/// Every perfect matching of a plane map with its weight, plus the
/// partition function. Limited to 24 vertices.
pub fn enumerate_matchings(map: &PlanarMap) -> Result<(Vec<Matching>, Rational), KasteleynError> {
    enumerate_matchings_of(map)
}

pub fn enumerate_matchings_of(emb: &Embedding) -> Result<(Vec<Matching>, Rational), KasteleynError> {
    if emb.num_vertices() > 24 {
        return Err(KasteleynError::TooLarge(emb.num_vertices()));
    }
    let bip = Bipartite::from_embedding(emb);
    let matchings: Vec<Matching> = bip
        .perfect_matchings()
        .into_iter()
        .map(|edges| {
            let weight = edges
                .iter()
                .fold(Rational::one(), |acc, &e| acc * &emb.edge(e).weight);
            Matching { edges, weight }
        })
        .collect();
    let z = matchings.iter().fold(Rational::zero(), |acc, m| acc + &m.weight);
    Ok((matchings, z))
}

/// The gauge-normalized matrix and the scalings that produce it:
/// `kt = diag(g) K diag(f)` with `K f = A_b` and `1ᵗ kt = A_w`.
#[derive(Clone, Debug)]
pub struct GaugeNormalized {
    pub kt: DMatrix<Complex64>,
    /// Column scaling, one per white.
    pub f: Vec<Rational>,
    /// Row scaling, one per black.
    pub g: Vec<Complex64>,
    /// `kt · 1 = scalar · A_b`.
    pub scalar: Complex64,
}

pub fn gauge_normalize(
    k: &KasteleynMatrix,
    a_b: &[Rational],
    a_w: &[Complex64],
) -> Result<GaugeNormalized, KasteleynError> {
    let n = k.size();
    let f = solve_rational(&k.entries, a_b).ok_or(KasteleynError::Singular)?;
    if let Some(index) = f.iter().position(|x| x.is_zero()) {
        return Err(KasteleynError::ZeroComponent { side: "white", index });
    }
    let kf = DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(rational_to_f64(&(&k.entries[r][c] * &f[c])), 0.0)
    });
    let rhs = DMatrix::from_fn(n, 1, |r, _| a_w[r]);
    let gt = kf
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(KasteleynError::Singular)?;
    let g: Vec<Complex64> = gt.iter().copied().collect();
    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(index) = g.iter().position(|z| z.norm() <= 1e-12 * scale) {
        return Err(KasteleynError::ZeroComponent { side: "black", index });
    }
    let kt = DMatrix::from_fn(n, n, |r, c| g[r] * kf[(r, c)]);
    let b0 = a_b.iter().position(|x| !x.is_zero()).unwrap_or(0);
    let row_sum: Complex64 = (0..n).map(|c| kt[(b0, c)]).sum();
    let scalar = row_sum / rational_to_f64(&a_b[b0]);
    Ok(GaugeNormalized { kt, f, g, scalar })
}

/// Everything the degeneracy analysis found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub has_perfect_matching: bool,
    pub minus_one_cut: Option<Cut>,
    /// Edge indices that lie in no perfect matching.
    pub unused_edges: Vec<usize>,
    pub zero_cuts: Vec<Cut>,
    pub one_cuts: Vec<Cut>,
    /// Whether `K` is `k`-non-degenerate for generic weights, `k = 0, 1, 2`.
    pub k_nondegenerate: [bool; 3],
    /// True when the 2-non-degeneracy flag comes from a randomized test.
    pub probabilistic: bool,
}

pub fn degeneracy_report(map: &PlanarMap, seed: u64) -> DegeneracyReport {
    degeneracy_report_of(&Bipartite::from_embedding(map), seed)
}

pub fn degeneracy_report_of(bip: &Bipartite, seed: u64) -> DegeneracyReport {
    let balanced = bip.num_black == bip.num_white;
    let has_pm = balanced && bip.has_perfect_matching();
    let minus_one_cut = if has_pm { None } else { bip.minus_one_cut() };
    let (unused_edges, zero_cuts) = if has_pm {
        let unused = bip.unused_edges();
        let mut cuts: Vec<Cut> = unused.iter().filter_map(|&e| bip.zero_cut_for(e)).collect();
        cuts.sort();
        cuts.dedup();
        (unused, cuts)
    } else {
        (Vec::new(), Vec::new())
    };
    let k1 = has_pm && unused_edges.is_empty();
    let (one_cuts, k2, probabilistic) = if !k1 {
        (Vec::new(), false, false)
    } else {
        match bip.tight_one_cuts() {
            Ok(cuts) => {
                let none = cuts.is_empty();
                (cuts, none, false)
            }
            Err(_) => (Vec::new(), randomized_two_nondegenerate(bip, seed), true),
        }
    };
    DegeneracyReport {
        has_perfect_matching: has_pm,
        minus_one_cut,
        unused_edges,
        zero_cuts,
        one_cuts,
        k_nondegenerate: [has_pm, k1, k2],
        probabilistic,
    }
}

/// Draws a positive rational with numerator and denominator in `1..=10^6`.
pub fn random_weight<R: Rng>(rng: &mut R) -> Rational {
    let num: i64 = rng.random_range(1..=1_000_000);
    let den: i64 = rng.random_range(1..=1_000_000);
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Plane map with every weight replaced by a seeded random rational.
pub fn randomize_weights(map: &PlanarMap, seed: u64) -> PlanarMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Rational> = (0..map.num_edges()).map(|_| random_weight(&mut rng)).collect();
    map.with_weights(&weights).expect("reweighting keeps the map valid")
}

/// Random-weight Kasteleyn-style matrix (signs chosen at random, which
/// keeps generic minors nonzero with high probability) and an exact check
/// that every 2x2 minor of its inverse is nonzero.
fn randomized_two_nondegenerate(bip: &Bipartite, seed: u64) -> bool {
    let n = bip.num_black;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![vec![Rational::zero(); n]; n];
    for &(b, w) in &bip.edges {
        let x = random_weight(&mut rng);
        m[b][w] += if rng.random_bool(0.5) { x } else { -x };
    }
    let Some(inv) = inverse_rational(&m) else {
        return false;
    };
    for r1 in 0..n {
        for r2 in r1 + 1..n {
            for c1 in 0..n {
                for c2 in c1 + 1..n {
                    let minor = &inv[r1][c1] * &inv[r2][c2] - &inv[r1][c2] * &inv[r2][c1];
                    if minor.is_zero() {
                        return false;
                    }
                }
            }
        }
    }
    true
}

pub fn inverse_rational(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Rational> = (0..n)
            .map(|i| if i == j { Rational::one() } else { Rational::zero() })
            .collect();
        cols.push(solve_rational(m, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Color class of a vertex index in `emb`, for report rendering.
pub fn cut_vertex_ids(emb: &Embedding, cut: &Cut) -> Vec<i64> {
    let blacks = emb.black_vertices();
    let whites = emb.white_vertices();
    let mut ids: Vec<i64> = cut
        .blacks
        .iter()
        .map(|&b| emb.vertex_id(blacks[b]))
        .chain(cut.whites.iter().map(|&w| emb.vertex_id(whites[w])))
        .collect();
    ids.sort_unstable();
    ids
}

/// The color of each vertex index as seen by the rows and columns.
pub fn color_of(emb: &Embedding, v: usize) -> Color {
    emb.color(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn single_edge_matrix() {
        let map = gallery::single_edge(q(5, 2));
        let k = assign_signs(&map).unwrap();
        assert_eq!(k.entries, vec![vec![q(5, 2)]]);
        assert_eq!(partition_function(&k), q(5, 2));
    }

    #[test]
    fn four_cycle_signs_and_partition_function() {
        let map = gallery::four_cycle_unit();
        let k = assign_signs(&map).unwrap();
        let product: i8 = k.signs.iter().product();
        assert_eq!(product, -1);
        assert!(signs_satisfy_rule(&map, &k.signs, Some(map.outer_face())));
        assert_eq!(partition_function(&k), q(2, 1));
        let (ms, z) = enumerate_matchings(&map).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(z, q(2, 1));
    }

    #[test]
    fn hexagon_allows_all_positive_signs() {
        let map = gallery::six_cycle_unit();
        assert!(signs_satisfy_rule(&map, &[1; 6], Some(map.outer_face())));
        let k = assign_signs(&map).unwrap();
        assert_eq!(partition_function(&k), q(2, 1));
        assert_eq!(enumerate_matchings(&map).unwrap().0.len(), 2);
    }

    #[test]
    fn grid_minus_corner_has_four_matchings() {
        let map = gallery::grid_minus_corner();
        let k = assign_signs(&map).unwrap();
        assert_eq!(partition_function(&k), q(4, 1));
        assert_eq!(enumerate_matchings(&map).unwrap().0.len(), 4);
        assert_eq!(assign_signs(&map).unwrap(), k);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let map = gallery::grid_with(3, 1, &[], |_, _| q(1, 1));
        assert_eq!(
            assign_signs(&map).unwrap_err(),
            KasteleynError::Unbalanced { black: 2, white: 1 }
        );
    }

    #[test]
    fn hall_violation_gives_minus_one_cut() {
        // b0 and b1 both see only w0; w1 sees nothing.
        let bip = Bipartite {
            num_black: 2,
            num_white: 2,
            edges: vec![(0, 0), (1, 0)],
        };
        let report = degeneracy_report_of(&bip, 1);
        assert!(!report.has_perfect_matching);
        let cut = report.minus_one_cut.unwrap();
        assert_eq!(cut, Cut { blacks: vec![], whites: vec![1] });
        assert!(bip.is_k_cut(&cut, -1));
    }

    #[test]
    fn forced_edge_makes_neighbours_unused() {
        // The path b0 - w0 - b1 - w1 has the single matching {b0w0, b1w1}.
        let map = gallery::grid_with(4, 1, &[], |_, _| q(1, 1));
        let report = degeneracy_report(&map, 1);
        assert!(report.has_perfect_matching);
        assert_eq!(report.unused_edges, vec![1]);
        let bip = Bipartite::from_embedding(&map);
        for cut in &report.zero_cuts {
            assert!(bip.is_k_cut(cut, 0));
        }
        assert!(!report.zero_cuts.is_empty());
    }

    #[test]
    fn four_cycle_is_fully_nondegenerate() {
        let report = degeneracy_report(&gallery::four_cycle_unit(), 1);
        assert!(report.unused_edges.is_empty());
        assert!(report.zero_cuts.is_empty());
        assert_eq!(report.k_nondegenerate, [true, true, true]);
    }

    #[test]
    fn split_vertex_creates_a_one_cut() {
        let base = gallery::grid_with(4, 4, &[], |_, _| q(1, 1));
        let target = gallery::grid_id(1, 1, 4);
        let map = gallery::split_black(&base, target, 2, 100, 101);
        let report = degeneracy_report(&map, 1);
        assert_eq!(report.k_nondegenerate, [true, true, false]);
        let bip = Bipartite::from_embedding(&map);
        for cut in &report.one_cuts {
            assert!(bip.is_k_cut(cut, 1));
        }
        let new_white = map
            .white_vertices()
            .iter()
            .position(|&w| map.vertex_id(w) == 101)
            .unwrap();
        assert!(report.one_cuts.iter().any(|c| c.whites == vec![new_white]));
    }

    #[test]
    fn gauge_one_by_one() {
        let map = gallery::single_edge(q(3, 1));
        let k = assign_signs(&map).unwrap();
        let qw = Complex64::new(0.5, -2.0);
        let out = gauge_normalize(&k, &[q(1, 1)], &[qw]).unwrap();
        assert!((out.kt[(0, 0)] - qw).norm() < 1e-15);
    }

    #[test]
    fn gauge_four_cycle_postconditions() {
        let map = gallery::four_cycle([q(2, 3), q(5, 7), q(11, 13), q(3, 17)]);
        let k = assign_signs(&map).unwrap();
        let a_b = vec![q(1, 1), q(0, 1)];
        let a_w = vec![Complex64::new(1.0, 0.3), Complex64::new(-0.4, 1.1)];
        let out = gauge_normalize(&k, &a_b, &a_w).unwrap();
        for c in 0..2 {
            let col: Complex64 = (0..2).map(|r| out.kt[(r, c)]).sum();
            assert!((col - a_w[c]).norm() < 1e-12);
        }
        let rows: Vec<Complex64> = (0..2).map(|r| (0..2).map(|c| out.kt[(r, c)]).sum()).collect();
        assert!(rows[1].norm() < 1e-12);
        assert!((rows[0] - out.scalar).norm() < 1e-12);
        for r in 0..2 {
            for c in 0..2 {
                let expect = out.g[r] * rational_to_f64(&(&k.entries[r][c] * &out.f[c]));
                assert!((out.kt[(r, c)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn forced_edge_gives_zero_component() {
        // Path b0 - w0 - b1 - w1: the inverse of K has a zero entry, so
        // pinning the flow at b1 forces f(w0) = 0.
        let map = gallery::grid_with(4, 1, &[], |_, _| q(1, 1));
        let k = assign_signs(&map).unwrap();
        let a_b = vec![q(0, 1), q(1, 1)];
        let a_w = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert_eq!(
            gauge_normalize(&k, &a_b, &a_w).unwrap_err(),
            KasteleynError::ZeroComponent { side: "white", index: 0 }
        );
    }
}
