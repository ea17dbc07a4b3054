//! Wilson's algorithm on the T-graph walk, and dimer samples pushed through
//! the forest/marked-matching bijection.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::correspondence::{
    enumerate_forests, enumerate_marked_matchings, forest_probability, marked_matching_from_forest,
    marked_weight, CorrespondenceError, MarkedMatching, SpanningForest,
};
use crate::linalg::{rational_to_f64, Rational};
use crate::tgraph::{Ambient, Dart, DerivedDimerGraph, TGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("some vertex cannot reach a root")]
    NoRootReachable,
    #[error("only plane T-graphs can be sampled")]
    Torus,
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
}

/// Samples are drawn in blocks; block `i` uses stream `i` of ChaCha8
/// seeded with `seed`, so results do not depend on thread count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngConfig {
    pub seed: u64,
}

impl RngConfig {
    pub const ALGORITHM: &'static str = "chacha8";
    pub const BLOCK: usize = 1024;

    pub fn new(seed: u64) -> Self {
        RngConfig { seed }
    }

    pub fn stream(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block);
        rng
    }
}

/// Precomputed walk on one T-graph.
pub struct Walker<'a> {
    t: &'a TGraph,
    moves: Vec<Option<[(Dart, usize, f64); 2]>>,
}

impl<'a> Walker<'a> {
    pub fn new(t: &'a TGraph) -> Result<Self, SamplerError> {
        if t.ambient() != Ambient::Plane {
            return Err(SamplerError::Torus);
        }
        if !t.roots_reachable() {
            return Err(SamplerError::NoRootReachable);
        }
        let moves = (0..t.vertices().len())
            .map(|v| {
                t.transitions(v).map(|[(d1, p1), (d2, _)]| {
                    let p = rational_to_f64(&p1);
                    [(d1, t.head(d1), p), (d2, t.head(d2), 1.0 - p)]
                })
            })
            .collect();
        Ok(Walker { t, moves })
    }

    /// One forest by loop-erased walks started from each vertex in id
    /// order. Also returns the number of walk steps taken.
    pub fn forest<R: Rng>(&self, rng: &mut R) -> (SpanningForest, u64) {
        let nv = self.moves.len();
        let mut in_tree: Vec<bool> = (0..nv).map(|v| self.t.is_root(v)).collect();
        let mut next: Vec<Option<(Dart, usize)>> = vec![None; nv];
        let mut steps = 0u64;
        for start in 0..nv {
            let mut u = start;
            while !in_tree[u] {
                let [a, b] = self.moves[u].expect("interior vertex");
                let (d, h, _) = if rng.random::<f64>() < a.2 { a } else { b };
                next[u] = Some((d, h));
                u = h;
                steps += 1;
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                u = next[u].expect("on the erased path").1;
            }
        }
        let darts = next.iter().enumerate().filter(|(v, _)| !self.t.is_root(*v)).map(|(_, x)| x.unwrap().0).collect();
        (SpanningForest::new(darts), steps)
    }
}

pub fn wilson_sample_forest(t: &TGraph, config: RngConfig) -> Result<SpanningForest, SamplerError> {
    let walker = Walker::new(t)?;
    Ok(walker.forest(&mut config.stream(0)).0)
}

/// A marked matching and its underlying matching as derived-edge ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchingSample {
    pub marked: MarkedMatching,
    pub edges: Vec<usize>,
}

fn matching_edges(g: &DerivedDimerGraph, m: &MarkedMatching) -> Vec<usize> {
    let mut edges: Vec<usize> = m
        .face
        .iter()
        .enumerate()
        .map(|(s, &f)| g.edge_between(f, s).expect("matched pair is an edge"))
        .collect();
    edges.sort_unstable();
    edges
}

pub fn sample_matching(t: &TGraph, g: &DerivedDimerGraph, config: RngConfig) -> Result<MatchingSample, SamplerError> {
    let forest = wilson_sample_forest(t, config)?;
    let marked = marked_matching_from_forest(t, g, &forest)?;
    let edges = matching_edges(g, &marked);
    Ok(MatchingSample { marked, edges })
}

/// Draws `n` matchings, in parallel blocks.
pub fn sample_matchings(
    t: &TGraph,
    g: &DerivedDimerGraph,
    n: usize,
    config: RngConfig,
) -> Result<(Vec<MatchingSample>, u64), SamplerError> {
    let walker = Walker::new(t)?;
    let blocks = n.div_ceil(RngConfig::BLOCK);
    let chunks: Vec<Result<(Vec<MatchingSample>, u64), SamplerError>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = config.stream(b as u64);
            let count = RngConfig::BLOCK.min(n - b * RngConfig::BLOCK);
            let mut out = Vec::with_capacity(count);
            let mut steps = 0;
            for _ in 0..count {
                let (forest, s) = walker.forest(&mut rng);
                steps += s;
                let marked = marked_matching_from_forest(t, g, &forest)?;
                let edges = matching_edges(g, &marked);
                out.push(MatchingSample { marked, edges });
            }
            Ok((out, steps))
        })
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut steps = 0;
    for chunk in chunks {
        let (s, k) = chunk?;
        samples.extend(s);
        steps += k;
    }
    Ok((samples, steps))
}

/// Empirical versus exact law of one kind of outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub total_variation: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

fn compare<K: Ord>(hist: &BTreeMap<K, u64>, exact: &BTreeMap<K, f64>, n: u64) -> Comparison {
    let nf = n as f64;
    let mut tv = 0.0;
    let mut chi = 0.0;
    for (k, &p) in exact {
        let obs = hist.get(k).copied().unwrap_or(0) as f64;
        tv += (obs / nf - p).abs();
        if p > 0.0 {
            chi += (obs - nf * p).powi(2) / (nf * p);
        }
    }
    // Outcomes the exact law does not know about.
    let stray: u64 = hist.iter().filter(|(k, _)| !exact.contains_key(k)).map(|(_, &c)| c).sum();
    tv += stray as f64 / nf;
    if stray > 0 {
        chi = f64::INFINITY;
    }
    let df = exact.len().saturating_sub(1).max(1);
    let p_value = if chi.is_finite() {
        ChiSquared::new(df as f64).expect("positive dof").sf(chi)
    } else {
        0.0
    };
    Comparison {
        total_variation: tv / 2.0,
        chi_square: chi,
        degrees_of_freedom: df,
        p_value,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub samples: usize,
    pub seed: u64,
    /// Counts keyed by the sorted derived-edge ids of each matching.
    pub histogram: BTreeMap<Vec<usize>, u64>,
    pub mean_steps: f64,
    /// Present when exhaustive enumeration was feasible.
    pub matchings: Option<Comparison>,
    pub forests: Option<Comparison>,
}

/// Exact law of matchings (summing over marks) and of forests.
pub fn exact_laws(
    t: &TGraph,
    g: &DerivedDimerGraph,
) -> Result<(BTreeMap<Vec<usize>, f64>, BTreeMap<SpanningForest, f64>), CorrespondenceError> {
    let marked = enumerate_marked_matchings(t, g)?;
    let weights: Vec<Rational> = marked.iter().map(|m| marked_weight(t, m)).collect();
    let z: Rational = weights.iter().sum();
    let mut matchings: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    for (m, w) in marked.iter().zip(weights) {
        *matchings.entry(matching_edges(g, m)).or_default() += w / &z;
    }
    let forests = enumerate_forests(t)?;
    let raw: Vec<Rational> = forests.iter().map(|f| forest_probability(t, f)).collect();
    let total: Rational = raw.iter().sum();
    Ok((
        matchings.into_iter().map(|(k, v)| (k, rational_to_f64(&v))).collect(),
        forests.into_iter().zip(raw).map(|(f, p)| (f, rational_to_f64(&(p / &total)))).collect(),
    ))
}

pub fn empirical_report(
    t: &TGraph,
    g: &DerivedDimerGraph,
    n: usize,
    config: RngConfig,
) -> Result<EmpiricalReport, SamplerError> {
    let (samples, steps) = sample_matchings(t, g, n, config)?;
    let mut histogram = BTreeMap::new();
    for s in &samples {
        *histogram.entry(s.edges.clone()).or_insert(0u64) += 1;
    }
    let small = t.num_segments() <= 8 && t.interior_vertices().len() <= 20;
    let (matchings, forests) = if n > 0 && small {
        let (exact_m, exact_f) = exact_laws(t, g)?;
        // Rebuild forests from the marked matchings to compare both laws.
        let mut forest_hist = BTreeMap::new();
        for s in &samples {
            let f = crate::correspondence::forest_from_marked_matching(t, g, &s.marked)?;
            *forest_hist.entry(f).or_insert(0u64) += 1;
        }
        (
            Some(compare(&histogram, &exact_m, n as u64)),
            Some(compare(&forest_hist, &exact_f, n as u64)),
        )
    } else {
        (None, None)
    };
    Ok(EmpiricalReport {
        samples: n,
        seed: config.seed,
        histogram,
        mean_steps: if n > 0 { steps as f64 / n as f64 } else { 0.0 },
        matchings,
        forests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::is_rooted_forest;
    use crate::gallery;

    fn plane(segs: Vec<crate::tgraph::Segment>) -> TGraph {
        TGraph::build(&segs, Ambient::Plane).unwrap()
    }

    #[test]
    fn near_neighbour_three_quarters() {
        let t = plane(gallery::cevian());
        let v = t.interior_vertices()[0];
        let near = t
            .transitions(v)
            .unwrap()
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1))
            .unwrap()
            .0;
        let walker = Walker::new(&t).unwrap();
        let mut rng = RngConfig::new(5).stream(0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| walker.forest(&mut rng).0.darts.contains(&near))
            .count();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn forests_are_valid_and_deterministic() {
        let t = plane(gallery::framed_square());
        let walker = Walker::new(&t).unwrap();
        let mut rng = RngConfig::new(1).stream(0);
        for _ in 0..200 {
            assert!(is_rooted_forest(&t, &walker.forest(&mut rng).0));
        }
        let a = wilson_sample_forest(&t, RngConfig::new(9)).unwrap();
        let b = wilson_sample_forest(&t, RngConfig::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_segment_always_same() {
        let t = plane(gallery::single_segment());
        let g = t.derived_dimer_graph(None).unwrap();
        let r = empirical_report(&t, &g, 50, RngConfig::new(0)).unwrap();
        assert_eq!(r.histogram.len(), 1);
    }

    #[test]
    fn empty_run() {
        let t = plane(gallery::cevian());
        let g = t.derived_dimer_graph(None).unwrap();
        let r = empirical_report(&t, &g, 0, RngConfig::new(0)).unwrap();
        assert!(r.histogram.is_empty());
        assert!(r.matchings.is_none());
    }

    #[test]
    fn block_streams_do_not_depend_on_threads() {
        let t = plane(gallery::framed_square());
        let g = t.derived_dimer_graph(None).unwrap();
        let (a, _) = sample_matchings(&t, &g, 3000, RngConfig::new(4)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (b, _) = pool.install(|| sample_matchings(&t, &g, 3000, RngConfig::new(4))).unwrap();
        assert_eq!(a, b);
    }
}
