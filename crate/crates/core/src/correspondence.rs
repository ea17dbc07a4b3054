//! Marked matchings of the derived dimer graph versus directed spanning
//! forests of the T-graph.
//!
//! A marked matching pairs every segment with a face along it and marks one
//! subsegment of the shared boundary. Deleting the marked subsegments leaves
//! a forest in which every interior vertex steps away from the mark on its
//! own segment. Going back, each segment has a unique unused subsegment (its
//! gap); the gaps form a spanning tree of the faces, and orienting that tree
//! toward the dual root matches each face with the segment whose gap it
//! leaves through.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::kasteleyn::Bipartite;
use crate::linalg::{format_rational, Rational};
use crate::planarmap::twin;
use crate::tgraph::{Ambient, Dart, DerivedDimerGraph, TGraph, TGraphError, VertexKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrespondenceError {
    #[error("invalid marked matching: {0}")]
    InvalidMarking(String),
    #[error("invalid spanning forest: {0}")]
    InvalidForest(String),
    #[error("too large to enumerate: {0}")]
    TooLarge(String),
    #[error(transparent)]
    TGraph(#[from] TGraphError),
}

/// A perfect matching of the derived graph with one marked subsegment per
/// matched edge, both indexed by segment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MarkedMatching {
    pub face: Vec<usize>,
    pub mark: Vec<usize>,
}

/// One outgoing dart per non-root vertex, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SpanningForest {
    pub darts: Vec<Dart>,
}

impl SpanningForest {
    pub fn new(mut darts: Vec<Dart>) -> Self {
        darts.sort_unstable();
        SpanningForest { darts }
    }

    /// Outgoing dart per vertex, or an error if some vertex has two.
    fn successors(&self, t: &TGraph) -> Result<Vec<Option<Dart>>, CorrespondenceError> {
        let mut next = vec![None; t.vertices().len()];
        for &d in &self.darts {
            let v = t.tail(d);
            if next[v].replace(d).is_some() {
                return Err(CorrespondenceError::InvalidForest(format!(
                    "vertex {v} has two outgoing edges"
                )));
            }
        }
        Ok(next)
    }
}

/// Product of the transition probabilities along a forest's edges.
pub fn forest_probability(t: &TGraph, forest: &SpanningForest) -> Rational {
    let mut p = Rational::one();
    for &d in &forest.darts {
        let moves = t.transitions(t.tail(d)).expect("forest darts leave interior vertices");
        let (_, q) = moves.iter().find(|(m, _)| *m == d).expect("dart is a transition");
        p *= q;
    }
    p
}

/// Unnormalized weight of a marked matching: product of marked parameter
/// lengths. Segment lengths are common to every matching and cancel.
pub fn marked_weight(t: &TGraph, m: &MarkedMatching) -> Rational {
    m.mark
        .iter()
        .fold(Rational::one(), |acc, &e| acc * &t.edges()[e].dt)
}

fn check_marking(t: &TGraph, g: &DerivedDimerGraph, m: &MarkedMatching) -> Result<(), CorrespondenceError> {
    let n = t.num_segments();
    if m.face.len() != n || m.mark.len() != n {
        return Err(CorrespondenceError::InvalidMarking("one face and one mark per segment".into()));
    }
    let mut seen = vec![false; g.num_faces];
    for s in 0..n {
        let f = m.face[s];
        if f >= g.num_faces || Some(f) == g.dual_root || std::mem::replace(&mut seen[f], true) {
            return Err(CorrespondenceError::InvalidMarking(format!(
                "face {f} is not a free white vertex"
            )));
        }
        let Some(e) = g.edge_between(f, s) else {
            return Err(CorrespondenceError::InvalidMarking(format!(
                "face {f} does not border segment {s}"
            )));
        };
        if !g.edges[e].subsegments.contains(&m.mark[s]) {
            return Err(CorrespondenceError::InvalidMarking(format!(
                "subsegment {} is not on the boundary between face {f} and segment {s}",
                m.mark[s]
            )));
        }
    }
    Ok(())
}

/// Every interior vertex steps away from the mark on its segment.
pub fn forest_from_marked_matching(
    t: &TGraph,
    g: &DerivedDimerGraph,
    m: &MarkedMatching,
) -> Result<SpanningForest, CorrespondenceError> {
    check_marking(t, g, m)?;
    let darts = forest_from_gaps(t, &m.mark);
    let forest = SpanningForest::new(darts);
    match t.ambient() {
        Ambient::Plane => {
            if !is_rooted_forest(t, &forest) {
                return Err(CorrespondenceError::InvalidMarking(
                    "the unmarked subsegments contain a cycle".into(),
                ));
            }
        }
        Ambient::Torus => {
            if !is_crsf(t, &forest) {
                return Err(CorrespondenceError::InvalidMarking(
                    "the unmarked subsegments contain a contractible cycle".into(),
                ));
            }
        }
    }
    Ok(forest)
}

fn forest_from_gaps(t: &TGraph, gaps: &[usize]) -> Vec<Dart> {
    let mut darts = Vec::new();
    for v in t.interior_vertices() {
        let VertexKind::Interior { segment, index } = t.vertices()[v].kind else {
            unreachable!()
        };
        let ids = t.segment_edges(segment);
        let gap = t.edges()[gaps[segment]].index;
        darts.push(if index <= gap {
            2 * ids[index - 1] + 1
        } else {
            2 * ids[index]
        });
    }
    darts
}

/// The unique unused subsegment of each segment.
fn gaps_of(t: &TGraph, forest: &SpanningForest) -> Result<Vec<usize>, CorrespondenceError> {
    let next = forest.successors(t)?;
    for v in 0..t.vertices().len() {
        match (t.is_root(v), next[v]) {
            (true, Some(_)) => {
                return Err(CorrespondenceError::InvalidForest(format!("root {v} has an outgoing edge")))
            }
            (false, None) => {
                return Err(CorrespondenceError::InvalidForest(format!(
                    "interior vertex {v} has no outgoing edge"
                )))
            }
            (false, Some(d)) => {
                if !t.transition_darts(v).expect("interior").contains(&d) {
                    return Err(CorrespondenceError::InvalidForest(format!(
                        "dart {d} does not follow the segment of vertex {v}"
                    )));
                }
            }
            (true, None) => {}
        }
    }
    let mut used = vec![false; t.edges().len()];
    for &d in &forest.darts {
        if std::mem::replace(&mut used[d / 2], true) {
            return Err(CorrespondenceError::InvalidForest(format!(
                "subsegment {} is used in both directions",
                d / 2
            )));
        }
    }
    (0..t.num_segments())
        .map(|s| {
            let free: Vec<usize> = t.segment_edges(s).iter().copied().filter(|&e| !used[e]).collect();
            match free.as_slice() {
                [e] => Ok(*e),
                _ => Err(CorrespondenceError::InvalidForest(format!(
                    "segment {s} has {} unused subsegments",
                    free.len()
                ))),
            }
        })
        .collect()
}

/// Inverse of [`forest_from_marked_matching`] in the plane.
pub fn marked_matching_from_forest(
    t: &TGraph,
    g: &DerivedDimerGraph,
    forest: &SpanningForest,
) -> Result<MarkedMatching, CorrespondenceError> {
    if !is_rooted_forest(t, forest) {
        forest.successors(t)?;
        return Err(CorrespondenceError::InvalidForest("not a forest rooted at the roots".into()));
    }
    let gaps = gaps_of(t, forest)?;
    let root = g
        .dual_root
        .ok_or_else(|| CorrespondenceError::InvalidForest("no dual root on the torus".into()))?;
    // Orient the gap tree toward the dual root.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.num_faces];
    for (s, &e) in gaps.iter().enumerate() {
        let (a, b) = (t.face_of(2 * e), t.face_of(2 * e + 1));
        adj[a].push((b, s));
        adj[b].push((a, s));
    }
    let mut face = vec![usize::MAX; t.num_segments()];
    let mut seen = vec![false; g.num_faces];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(f) = queue.pop_front() {
        for &(h, s) in &adj[f] {
            if !seen[h] {
                seen[h] = true;
                face[s] = h;
                queue.push_back(h);
            }
        }
    }
    if seen.iter().any(|s| !s) || face.contains(&usize::MAX) {
        return Err(CorrespondenceError::InvalidForest(
            "the gaps do not form a spanning tree of the faces".into(),
        ));
    }
    let m = MarkedMatching { face, mark: gaps };
    check_marking(t, g, &m)?;
    Ok(m)
}

/// Acyclic with every interior vertex reaching a root.
pub fn is_rooted_forest(t: &TGraph, forest: &SpanningForest) -> bool {
    let Ok(next) = forest.successors(t) else {
        return false;
    };
    let nv = t.vertices().len();
    // 0 unknown, 1 in progress, 2 reaches a root.
    let mut state = vec![0u8; nv];
    for start in 0..nv {
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if state[v] == 2 {
                break;
            }
            if state[v] == 1 {
                return false;
            }
            match next[v] {
                None => {
                    if !t.is_root(v) {
                        return false;
                    }
                    break;
                }
                Some(d) => {
                    state[v] = 1;
                    path.push(v);
                    v = t.head(d);
                }
            }
        }
        for u in path {
            state[u] = 2;
        }
        state[v] = 2;
    }
    true
}

/// Cycles of the functional graph, each as its list of darts.
fn cycles(t: &TGraph, next: &[Option<Dart>]) -> Vec<Vec<Dart>> {
    let nv = t.vertices().len();
    let mut color = vec![0u8; nv];
    let mut out = Vec::new();
    for start in 0..nv {
        let mut path = Vec::new();
        let mut v = start;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            match next[v] {
                Some(d) => v = t.head(d),
                None => break,
            }
        }
        if color[v] == 1 && next[v].is_some() {
            let pos = path.iter().position(|&u| u == v).expect("on the current path");
            out.push(path[pos..].iter().map(|&u| next[u].expect("on a cycle")).collect());
        }
        for u in path {
            color[u] = 2;
        }
    }
    out
}

/// Torus: one outgoing edge per vertex and no contractible cycle.
pub fn is_crsf(t: &TGraph, forest: &SpanningForest) -> bool {
    let Ok(next) = forest.successors(t) else {
        return false;
    };
    if next.iter().any(Option::is_none) {
        return false;
    }
    cycles(t, &next).iter().all(|c| {
        let total = c.iter().fold([0i64; 2], |acc, &d| {
            let s = t.shift(d);
            [acc[0] + s[0], acc[1] + s[1]]
        });
        total != [0, 0]
    })
}

fn transition_choices(t: &TGraph, limit: usize) -> Result<Vec<(usize, [Dart; 2])>, CorrespondenceError> {
    let inner: Vec<(usize, [Dart; 2])> = t
        .interior_vertices()
        .into_iter()
        .map(|v| (v, t.transition_darts(v).expect("interior")))
        .collect();
    if inner.len() > limit {
        return Err(CorrespondenceError::TooLarge(format!("{} interior vertices", inner.len())));
    }
    Ok(inner)
}

/// All directed spanning forests (plane) or cycle-rooted spanning forests
/// without contractible cycles (torus), by per-vertex choice with rejection.
pub fn enumerate_forests(t: &TGraph) -> Result<Vec<SpanningForest>, CorrespondenceError> {
    let inner = transition_choices(t, 22)?;
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << inner.len()) {
        let darts: Vec<Dart> = inner
            .iter()
            .enumerate()
            .map(|(i, (_, ds))| ds[(mask >> i & 1) as usize])
            .collect();
        let forest = SpanningForest::new(darts);
        let ok = match t.ambient() {
            Ambient::Plane => is_rooted_forest(t, &forest),
            Ambient::Torus => is_crsf(t, &forest),
        };
        if ok {
            out.push(forest);
        }
    }
    out.sort();
    Ok(out)
}

fn derived_bipartite(g: &DerivedDimerGraph) -> (Bipartite, Vec<usize>, Vec<usize>) {
    let whites = g.whites();
    let index: HashMap<usize, usize> = whites.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut edge_ids = Vec::new();
    let mut edges = Vec::new();
    for (i, e) in g.live_edges() {
        edge_ids.push(i);
        edges.push((e.segment, index[&e.face]));
    }
    (
        Bipartite {
            num_black: g.num_segments,
            num_white: whites.len(),
            edges,
        },
        whites,
        edge_ids,
    )
}

/// All marked matchings, matchings in lexicographic order and marks in
/// subsegment order.
pub fn enumerate_marked_matchings(
    t: &TGraph,
    g: &DerivedDimerGraph,
) -> Result<Vec<MarkedMatching>, CorrespondenceError> {
    if t.num_segments() > 12 {
        return Err(CorrespondenceError::TooLarge(format!("{} segments", t.num_segments())));
    }
    let (bip, _, edge_ids) = derived_bipartite(g);
    let mut out = Vec::new();
    for matching in bip.perfect_matchings() {
        let n = t.num_segments();
        let mut face = vec![0; n];
        let mut options: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &i in &matching {
            let e = &g.edges[edge_ids[i]];
            face[e.segment] = e.face;
            let mut subs = e.subsegments.clone();
            subs.sort_unstable();
            subs.dedup();
            options[e.segment] = subs;
        }
        let mut pick = vec![0usize; n];
        loop {
            out.push(MarkedMatching {
                face: face.clone(),
                mark: (0..n).map(|s| options[s][pick[s]]).collect(),
            });
            let mut s = 0;
            while s < n {
                pick[s] += 1;
                if pick[s] < options[s].len() {
                    break;
                }
                pick[s] = 0;
                s += 1;
            }
            if s == n {
                break;
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Outcome of the exhaustive plane check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub marked_matchings: usize,
    pub forests: usize,
    pub bijective: bool,
    pub round_trip: bool,
    /// Every forest's gaps form a spanning tree of the faces.
    pub duality: bool,
    /// Largest `|mu(M') - mu_F(F)|` over corresponding pairs, exact.
    #[serde(serialize_with = "ser_rational")]
    pub max_discrepancy: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub total_matching_mass: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub total_forest_mass: Rational,
    /// Sum over forests of the product of transition probabilities. Below
    /// one when some choices of steps close a cycle.
    #[serde(serialize_with = "ser_rational")]
    pub forest_partition: Rational,
}

fn ser_rational<S: serde::Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(x))
}

impl MeasureReport {
    pub fn passed(&self) -> bool {
        self.bijective
            && self.round_trip
            && self.duality
            && self.max_discrepancy.is_zero()
            && self.total_matching_mass.is_one()
            && self.total_forest_mass.is_one()
    }
}

/// Exhaustive check that the bijection holds and preserves measure.
pub fn verify_measure_preservation(t: &TGraph, dual_root: Option<usize>) -> Result<MeasureReport, CorrespondenceError> {
    if t.ambient() != Ambient::Plane {
        return Err(CorrespondenceError::InvalidForest("use the torus check for torus T-graphs".into()));
    }
    if t.num_segments() > 10 {
        return Err(CorrespondenceError::TooLarge(format!("{} segments", t.num_segments())));
    }
    let g = t.derived_dimer_graph(dual_root)?;
    let marked = enumerate_marked_matchings(t, &g)?;
    let forests = enumerate_forests(t)?;

    let weights: Vec<Rational> = marked.iter().map(|m| marked_weight(t, m)).collect();
    let z = weights.iter().fold(Rational::zero(), |a, w| a + w);
    let total_matching_mass = weights.iter().fold(Rational::zero(), |a, w| a + w / &z);
    let raw: Vec<Rational> = forests.iter().map(|f| forest_probability(t, f)).collect();
    let forest_partition = raw.iter().fold(Rational::zero(), |a, p| a + p);
    let forest_mass: BTreeMap<&SpanningForest, Rational> =
        forests.iter().zip(raw).map(|(f, p)| (f, p / &forest_partition)).collect();
    let total_forest_mass = forest_mass.values().fold(Rational::zero(), |a, p| a + p);

    let mut bijective = marked.len() == forests.len();
    let mut round_trip = true;
    let mut max_discrepancy = Rational::zero();
    let mut hit: BTreeMap<&SpanningForest, usize> = BTreeMap::new();
    for (m, w) in marked.iter().zip(&weights) {
        match forest_from_marked_matching(t, &g, m) {
            Ok(forest) => {
                match forests.binary_search(&forest) {
                    Ok(i) => {
                        *hit.entry(&forests[i]).or_default() += 1;
                        let diff = (w / &z - &forest_mass[&forests[i]]).abs();
                        if diff > max_discrepancy {
                            max_discrepancy = diff;
                        }
                    }
                    Err(_) => bijective = false,
                }
                if marked_matching_from_forest(t, &g, &forest).as_ref() != Ok(m) {
                    round_trip = false;
                }
            }
            Err(_) => {
                bijective = false;
                round_trip = false;
            }
        }
    }
    bijective &= hit.len() == forests.len() && hit.values().all(|&c| c == 1);

    let duality = forests.iter().all(|f| gaps_span_faces(t, f));

    Ok(MeasureReport {
        marked_matchings: marked.len(),
        forests: forests.len(),
        bijective,
        round_trip,
        duality,
        max_discrepancy,
        total_matching_mass,
        total_forest_mass,
        forest_partition,
    })
}

/// The complement of the forest, read as dual edges, is a spanning tree.
fn gaps_span_faces(t: &TGraph, forest: &SpanningForest) -> bool {
    let Ok(gaps) = gaps_of(t, forest) else {
        return false;
    };
    let nf = t.num_faces();
    if gaps.len() + 1 != nf {
        return false;
    }
    let mut parent: Vec<usize> = (0..nf).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &e in &gaps {
        let (a, b) = (find(&mut parent, t.face_of(2 * e)), find(&mut parent, t.face_of(2 * e + 1)));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Outcome of the exhaustive torus check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusReport {
    pub perfect_matchings: usize,
    pub marked_matchings: usize,
    pub crsfs: usize,
    /// Number of dual cycle orientations summed over all CRSFs.
    pub oriented_total: usize,
    /// How many CRSFs have a dual with `j` cycles, keyed by `j`.
    pub dual_cycle_histogram: BTreeMap<usize, usize>,
    pub bijective: bool,
    /// Marked weight over forest probability is the same for every pair.
    pub weights_match: bool,
    /// Every CRSF and every dual cycle winds around the torus.
    pub cycles_noncontractible: bool,
}

impl TorusReport {
    pub fn passed(&self) -> bool {
        self.bijective && self.weights_match && self.cycles_noncontractible && self.marked_matchings == self.oriented_total
    }
}

/// Translation from face `a` to face `b` across dart `d` (with `a` on its
/// right), using lifted face walks.
fn dual_shift(t: &TGraph, d: Dart, offsets: &[HashMap<Dart, [i64; 2]>]) -> [i64; 2] {
    let a = t.face_of(d);
    let b = t.face_of(twin(d));
    let oa = offsets[a][&d];
    let ob = offsets[b][&twin(d)];
    let s = t.shift(d);
    [oa[0] + s[0] - ob[0], oa[1] + s[1] - ob[1]]
}

/// Exhaustive torus check: every marked matching arises from exactly one
/// CRSF together with one orientation of each cycle of the dual.
pub fn torus_correspondence_check(t: &TGraph) -> Result<TorusReport, CorrespondenceError> {
    if t.ambient() != Ambient::Torus {
        return Err(CorrespondenceError::InvalidForest("expected a torus T-graph".into()));
    }
    if t.num_segments() > 8 {
        return Err(CorrespondenceError::TooLarge(format!("{} segments", t.num_segments())));
    }
    let g = t.derived_dimer_graph(None)?;
    let (bip, _, _) = derived_bipartite(&g);
    let perfect_matchings = bip.perfect_matchings().len();
    let marked = enumerate_marked_matchings(t, &g)?;
    let forests = enumerate_forests(t)?;

    // Lift offsets of each dart's tail within its face walk.
    let offsets: Vec<HashMap<Dart, [i64; 2]>> = t
        .faces()
        .iter()
        .map(|face| {
            let mut at = [0i64; 2];
            let mut map = HashMap::new();
            for &d in &face.darts {
                map.insert(d, at);
                let s = t.shift(d);
                at = [at[0] + s[0], at[1] + s[1]];
            }
            map
        })
        .collect();

    let nf = t.num_faces();
    let mut produced: BTreeMap<MarkedMatching, usize> = BTreeMap::new();
    let mut oriented_total = 0usize;
    let mut histogram = BTreeMap::new();
    let mut cycles_noncontractible = true;
    let mut ratio: Option<Rational> = None;
    let mut weights_match = true;
    for forest in &forests {
        let gaps = gaps_of(t, forest)?;
        // Dual: one edge per gap between the faces on its two sides.
        let mut adj: Vec<Vec<(usize, usize, Dart)>> = vec![Vec::new(); nf];
        for (s, &e) in gaps.iter().enumerate() {
            let (a, b) = (t.face_of(2 * e), t.face_of(2 * e + 1));
            adj[a].push((b, s, 2 * e));
            adj[b].push((a, s, 2 * e + 1));
        }
        let dual_cycles = unicyclic_orientations(nf, &adj);
        let Some(orientations) = dual_cycles else {
            cycles_noncontractible = false;
            continue;
        };
        let j = orientations.cycle_count;
        *histogram.entry(j).or_insert(0) += 1;
        oriented_total += 1 << j;
        for cycle in &orientations.cycles {
            let total = cycle.iter().fold([0i64; 2], |acc, &d| {
                let s = dual_shift(t, d, &offsets);
                [acc[0] + s[0], acc[1] + s[1]]
            });
            if total == [0, 0] {
                cycles_noncontractible = false;
            }
        }
        let w = forests_weight_ratio(t, forest, &gaps);
        match &ratio {
            None => ratio = Some(w),
            Some(r) => weights_match &= *r == w,
        }
        for face_of_segment in orientations.matchings {
            let m = MarkedMatching {
                face: face_of_segment,
                mark: gaps.clone(),
            };
            *produced.entry(m).or_insert(0) += 1;
        }
    }
    let bijective = produced.len() == marked.len()
        && produced.values().all(|&c| c == 1)
        && marked.iter().all(|m| produced.contains_key(m));
    Ok(TorusReport {
        perfect_matchings,
        marked_matchings: marked.len(),
        crsfs: forests.len(),
        oriented_total,
        dual_cycle_histogram: histogram,
        bijective,
        weights_match,
        cycles_noncontractible,
    })
}

fn forests_weight_ratio(t: &TGraph, forest: &SpanningForest, gaps: &[usize]) -> Rational {
    let mark = gaps.iter().fold(Rational::one(), |a, &e| a * &t.edges()[e].dt);
    mark / forest_probability(t, forest)
}

struct Orientations {
    cycle_count: usize,
    /// Each cycle as darts (face-side darts of the gap subsegments).
    cycles: Vec<Vec<Dart>>,
    /// Face matched to each segment, one entry per orientation choice.
    matchings: Vec<Vec<usize>>,
}

/// For a dual graph with as many edges as vertices, checks each component
/// is unicyclic and lists all in-directed orientations: trees point toward
/// their cycle and each cycle takes either direction.
fn unicyclic_orientations(nf: usize, adj: &[Vec<(usize, usize, Dart)>]) -> Option<Orientations> {
    let num_segments: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    // Peel leaves; what remains are the cycles.
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; nf];
    let mut out_edge: Vec<Option<(usize, usize)>> = vec![None; nf];
    let mut queue: VecDeque<usize> = (0..nf).filter(|&f| degree[f] == 1).collect();
    if (0..nf).any(|f| degree[f] == 0) {
        return None;
    }
    while let Some(f) = queue.pop_front() {
        removed[f] = true;
        let &(h, s, _) = adj[f].iter().find(|(h, _, _)| !removed[*h])?;
        out_edge[f] = Some((h, s));
        degree[h] -= 1;
        if degree[h] == 1 {
            queue.push_back(h);
        } else if degree[h] == 0 {
            return None;
        }
    }
    // Remaining vertices have degree exactly two and form disjoint cycles.
    let mut cycles: Vec<Vec<(usize, usize, Dart)>> = Vec::new();
    let mut on_cycle = vec![false; nf];
    for start in 0..nf {
        if removed[start] || on_cycle[start] {
            continue;
        }
        let live: Vec<&(usize, usize, Dart)> = adj[start].iter().filter(|(h, _, _)| !removed[*h]).collect();
        if live.len() != 2 {
            return None;
        }
        let mut cycle = Vec::new();
        let mut f = start;
        let mut via: Option<usize> = None;
        loop {
            on_cycle[f] = true;
            let &(h, s, d) = adj[f]
                .iter()
                .find(|(h, s, _)| !removed[*h] && Some(*s) != via)
                .expect("cycle continues");
            cycle.push((f, s, d));
            via = Some(s);
            f = h;
            if f == start {
                break;
            }
        }
        cycles.push(cycle);
    }
    let j = cycles.len();
    let mut matchings = Vec::with_capacity(1 << j);
    for mask in 0..(1usize << j) {
        let mut face = vec![usize::MAX; num_segments];
        for f in 0..nf {
            if let Some((_, s)) = out_edge[f] {
                face[s] = f;
            }
        }
        for (c, cycle) in cycles.iter().enumerate() {
            let k = cycle.len();
            for i in 0..k {
                let (f, s, _) = cycle[i];
                if mask >> c & 1 == 0 {
                    // Forward: f leaves through s.
                    face[s] = f;
                } else {
                    // Backward: the next face leaves through s.
                    face[s] = cycle[(i + 1) % k].0;
                }
            }
        }
        matchings.push(face);
    }
    Some(Orientations {
        cycle_count: j,
        cycles: cycles
            .into_iter()
            .map(|c| c.into_iter().map(|(_, _, d)| d).collect())
            .collect(),
        matchings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn plane(segs: Vec<crate::tgraph::Segment>) -> TGraph {
        TGraph::build(&segs, Ambient::Plane).unwrap()
    }

    #[test]
    fn single_segment_has_one_of_each() {
        let t = plane(gallery::single_segment());
        let g = t.derived_dimer_graph(None).unwrap();
        let marked = enumerate_marked_matchings(&t, &g).unwrap();
        assert_eq!(marked.len(), 1);
        let forest = forest_from_marked_matching(&t, &g, &marked[0]).unwrap();
        assert!(forest.darts.is_empty());
        assert_eq!(marked_matching_from_forest(&t, &g, &forest).unwrap(), marked[0]);
        let report = verify_measure_preservation(&t, None).unwrap();
        assert!(report.passed());
        assert_eq!((report.marked_matchings, report.forests), (1, 1));
    }

    #[test]
    fn cevian_bijection_is_exact() {
        let t = plane(gallery::cevian());
        let report = verify_measure_preservation(&t, None).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.forests, 2);
    }

    #[test]
    fn triangle_and_framed_square() {
        for segs in [gallery::triangle(), gallery::framed_square(), gallery::t_shape()] {
            let t = plane(segs);
            let report = verify_measure_preservation(&t, None).unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn every_dual_root_works() {
        let t = plane(gallery::framed_square());
        for &r in t.outer_faces() {
            assert!(verify_measure_preservation(&t, Some(r)).unwrap().passed());
        }
    }

    #[test]
    fn two_outgoing_edges_is_invalid() {
        let t = plane(gallery::cevian());
        let g = t.derived_dimer_graph(None).unwrap();
        let v = t.interior_vertices()[0];
        let moves = t.transitions(v).unwrap();
        let forest = SpanningForest::new(vec![moves[0].0, moves[1].0]);
        assert!(matches!(
            marked_matching_from_forest(&t, &g, &forest),
            Err(CorrespondenceError::InvalidForest(_))
        ));
    }

    #[test]
    fn torus_examples_correspond() {
        for segs in [gallery::torus_pair(), gallery::torus_pair_skew(), gallery::torus_grid()] {
            let t = TGraph::build(&segs, Ambient::Torus).unwrap();
            let report = torus_correspondence_check(&t).unwrap();
            assert!(report.passed(), "{report:?}");
            assert!(report.crsfs > 0);
        }
    }
}
