//! Acceptance checks, one line per criterion.
//!
//! Runs without the test harness so the report is always printed; exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dimer_forge::construct::{build_psi, choose_polygon, detect_flat_faces, roundtrip_check, tgraph_of};
use dimer_forge::correspondence::{torus_correspondence_check, verify_measure_preservation};
use dimer_forge::gallery::{self, GeoMap};
use dimer_forge::kasteleyn::{assign_signs, partition_function, random_weight, randomize_weights, cut_vertex_ids, Bipartite};
use dimer_forge::linalg::Rational;
use dimer_forge::periodic::{almost_periodic_patch, find_unit_roots, spectral_polynomial, unit_torus_roots};
use dimer_forge::planarmap::{Color, PlanarMap};
use dimer_forge::sampler::{empirical_report, RngConfig};
use dimer_forge::tgraph::{Ambient, Segment, TGraph};

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Oracles

/// Weighted count of perfect matchings by trying every white for every black.
fn brute_force_matchings(map: &PlanarMap) -> (usize, Rational) {
    let blacks: Vec<usize> = (0..map.num_vertices()).filter(|&v| map.color(v) == Color::Black).collect();
    let whites: Vec<usize> = (0..map.num_vertices()).filter(|&v| map.color(v) == Color::White).collect();
    if blacks.len() != whites.len() {
        return (0, Rational::zero());
    }
    let mut adj: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); map.num_vertices()];
    for e in map.edges() {
        let (u, v) = (e.u, e.v);
        let (b, w) = if map.color(u) == Color::Black { (u, v) } else { (v, u) };
        adj[b].push((w, e.weight.clone()));
    }
    fn go(i: usize, blacks: &[usize], adj: &[Vec<(usize, Rational)>], used: &mut Vec<bool>, acc: &Rational) -> (usize, Rational) {
        if i == blacks.len() {
            return (1, acc.clone());
        }
        let mut total = (0, Rational::zero());
        for (w, x) in &adj[blacks[i]] {
            if !used[*w] {
                used[*w] = true;
                let (c, z) = go(i + 1, blacks, adj, used, &(acc * x));
                total.0 += c;
                total.1 += z;
                used[*w] = false;
            }
        }
        total
    }
    go(0, &blacks, &adj, &mut vec![false; map.num_vertices()], &Rational::one())
}

/// Spanning trees of a graph on `n` vertices by checking every edge subset.
fn brute_force_spanning_trees(n: usize, edges: &[(usize, usize)]) -> usize {
    let mut count = 0;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        let mut acyclic = true;
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    acyclic = false;
                    break;
                }
                parent[ra] = rb;
            }
        }
        count += acyclic as usize;
    }
    count
}

/// 1-cuts all of whose whites are interior vertices, minimal under
/// inclusion, as sorted vertex-id sets. Computed from the graph alone.
fn interior_one_cuts(map: &PlanarMap) -> BTreeSet<Vec<i64>> {
    let boundary: BTreeSet<usize> = map.boundary_vertices().into_iter().collect();
    let whites = map.white_vertices();
    let cuts = Bipartite::from_embedding(map).tight_one_cuts().expect("small enough");
    let interior: Vec<BTreeSet<i64>> = cuts
        .iter()
        .filter(|c| c.whites.iter().all(|&w| !boundary.contains(&whites[w])))
        .map(|c| cut_vertex_ids(map, c).into_iter().collect())
        .collect();
    interior
        .iter()
        .filter(|c| !interior.iter().any(|d| d != *c && d.is_subset(c)))
        .map(|c| c.iter().copied().collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Instances

/// A random connected, balanced subgraph of a small grid with random
/// rational weights and at most 12 vertices.
fn random_plane_map(rng: &mut ChaCha8Rng) -> PlanarMap {
    loop {
        let (cols, rows) = [(2i64, 3i64), (3, 3), (2, 4), (3, 4), (2, 5), (2, 6), (4, 3)][rng.random_range(0..7)];
        let mut present = vec![true; (cols * rows) as usize];
        for _ in 0..rng.random_range(0..3) {
            let i = rng.random_range(0..present.len());
            present[i] = false;
        }
        let id = |x: i64, y: i64| y * cols + x;
        let mut g = GeoMap::new();
        let mut edges = Vec::new();
        for y in 0..rows {
            for x in 0..cols {
                if present[id(x, y) as usize] {
                    let color = if (x + y) % 2 == 0 { Color::Black } else { Color::White };
                    g.vertex(id(x, y), color, [x as f64, y as f64]);
                }
            }
        }
        for y in 0..rows {
            for x in 0..cols {
                for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                    if nx < cols && ny < rows && present[id(x, y) as usize] && present[id(nx, ny) as usize] && rng.random_bool(0.85) {
                        edges.push((id(x, y), id(nx, ny)));
                    }
                }
            }
        }
        // Keep only connected, balanced candidates.
        let ids: Vec<i64> = (0..cols * rows).filter(|&i| present[i as usize]).collect();
        let mut comp: HashMap<i64, i64> = ids.iter().map(|&i| (i, i)).collect();
        fn root(c: &mut HashMap<i64, i64>, x: i64) -> i64 {
            let p = c[&x];
            if p == x {
                x
            } else {
                let r = root(c, p);
                c.insert(x, r);
                r
            }
        }
        for &(a, b) in &edges {
            let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
            comp.insert(ra, rb);
        }
        let r0 = root(&mut comp, ids[0]);
        let connected = ids.iter().all(|&i| root(&mut comp, i) == r0);
        let blacks = ids.iter().filter(|&&i| ((i % cols) + (i / cols)) % 2 == 0).count();
        if !connected || edges.is_empty() || 2 * blacks != ids.len() {
            continue;
        }
        for &(a, b) in &edges {
            let w = random_weight(rng);
            g.edge(a, b, w);
        }
        return g.plane();
    }
}

fn unit_grid(cols: i64, rows: i64) -> PlanarMap {
    gallery::grid_with(cols, rows, &[], |_, _| int(1))
}

/// Small plane graphs of at most ten vertices with no interior 1-cuts.
fn small_generic_bases() -> Vec<PlanarMap> {
    vec![
        gallery::four_cycle_unit(),
        gallery::six_cycle_unit(),
        unit_grid(2, 3),
        unit_grid(2, 4),
        gallery::grid_minus_corner(),
        unit_grid(2, 5),
    ]
}

/// Torus T-graphs: a horizontal loop with a loop of direction `(1, 2)`
/// through its endpoint, or two horizontal and two vertical loops at random
/// positions. A `(1, k)` loop with `k > 2` would cross the horizontal one.
fn random_torus_segments(rng: &mut ChaCha8Rng) -> Vec<Segment> {
    if rng.random_bool(0.5) {
        let b: f64 = rng.random_range(0.0..1.0);
        let h: f64 = rng.random_range(0.0..1.0);
        let a = b + 0.5;
        vec![
            Segment::new([a, h], [a + 1.0, h]),
            Segment::new([b, h], [b + 1.0, h + 2.0]),
        ]
    } else {
        let x1: f64 = rng.random_range(0.05..0.45);
        let x2: f64 = rng.random_range(0.55..0.95);
        let y1: f64 = rng.random_range(0.05..0.45);
        let y2: f64 = rng.random_range(0.55..0.95);
        vec![
            Segment::new([x1, y1], [x1 + 1.0, y1]),
            Segment::new([x2, y2], [x2 + 1.0, y2]),
            Segment::new([x1, y2], [x1, y2 + 1.0]),
            Segment::new([x2, y1], [x2, y1 + 1.0]),
        ]
    }
}

// ---------------------------------------------------------------------------
// Criteria

fn kasteleyn_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agree = 0;
    let mut with_matchings = 0;
    for _ in 0..50 {
        let map = random_plane_map(&mut rng);
        let (count, brute) = brute_force_matchings(&map);
        let det = partition_function(&assign_signs(&map).expect("balanced"));
        with_matchings += (count > 0) as usize;
        agree += (det == brute) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree == 50 && secs < 10.0,
        format!("{agree}/50 maps agree exactly ({with_matchings} with matchings), {secs:.2} s"),
    )
}

fn face_count_law() -> Outcome {
    let bases = small_generic_bases();
    let mut failures = 0;
    let mut built = 0;
    for seed in 0..80u64 {
        let base = &bases[seed as usize % bases.len()];
        let map = randomize_weights(base, 1000 + seed);
        let q = choose_polygon(map.boundary_profile().m, seed).unwrap();
        match build_psi(&map, &q, None).map_err(|e| e.to_string()).and_then(|psi| tgraph_of(&psi).map_err(|e| e.to_string())) {
            Ok((t, _, _)) => {
                built += 1;
                failures += (t.num_faces() != t.num_segments() + 1) as usize;
            }
            Err(_) => failures += 1,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let segs = random_torus_segments(&mut rng);
        match TGraph::build(&segs, Ambient::Torus) {
            Ok(t) => {
                built += 1;
                failures += (t.num_faces() != t.num_segments()) as usize;
            }
            Err(_) => failures += 1,
        }
    }
    outcome(failures == 0, format!("{built}/100 T-graphs built (80 plane, 20 torus), {failures} failures"))
}

fn bijection() -> Outcome {
    let start = Instant::now();
    let mut cases: Vec<(String, TGraph, Option<usize>)> = Vec::new();
    for (name, segs) in [
        ("single segment", gallery::single_segment()),
        ("T", gallery::t_shape()),
        ("triangle", gallery::triangle()),
        ("cevian", gallery::cevian()),
        ("framed square", gallery::framed_square()),
    ] {
        let t = TGraph::build(&segs, Ambient::Plane).unwrap();
        let root = t.default_dual_root();
        cases.push((name.into(), t, root));
    }
    for (name, map, seed) in [
        ("4-cycle", gallery::four_cycle_unit(), 3),
        ("6-cycle", gallery::six_cycle_unit(), 4),
        ("grid minus corner", gallery::grid_minus_corner(), 5),
        ("2x4 grid", unit_grid(2, 4), 6),
    ] {
        let map = randomize_weights(&map, seed);
        let q = choose_polygon(map.boundary_profile().m, seed).unwrap();
        let (t, _, root) = tgraph_of(&build_psi(&map, &q, None).unwrap()).unwrap();
        cases.push((name.into(), t, Some(root)));
    }
    let mut bad = Vec::new();
    let mut total = 0;
    for (name, t, root) in &cases {
        assert!(t.num_segments() <= 8);
        match verify_measure_preservation(t, *root) {
            Ok(r) if r.passed() => total += r.marked_matchings,
            _ => bad.push(name.clone()),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 60.0,
        format!(
            "{} T-graphs, {total} marked matchings, zero discrepancy, {secs:.2} s{}",
            cases.len(),
            if bad.is_empty() { String::new() } else { format!("; failed: {bad:?}") }
        ),
    )
}

fn construction_round_trip() -> Outcome {
    let bases = small_generic_bases();
    let degenerate: Vec<usize> = (0..bases.len()).filter(|&i| !interior_one_cuts(&bases[i]).is_empty()).collect();
    let mut passed = 0;
    let mut worst = [0.0f64; 2];
    for seed in 0..20u64 {
        let base = &bases[seed as usize % bases.len()];
        let map = randomize_weights(base, 500 + seed);
        let q = choose_polygon(map.boundary_profile().m, seed).unwrap();
        if let Ok(r) = roundtrip_check(&map, &q, None) {
            worst[0] = worst[0].max(r.gauge_residual);
            worst[1] = worst[1].max(r.area_error);
            passed += (r.passed() && r.faces == r.segments + 1) as usize;
        }
    }
    outcome(
        passed == 20 && degenerate.is_empty(),
        format!(
            "{passed}/20 round trips, max log-residual {:.1e}, max area error {:.1e}",
            worst[0], worst[1]
        ),
    )
}

fn flat_face_law() -> Outcome {
    let g44 = unit_grid(4, 4);
    let g54 = unit_grid(5, 4);
    let double = gallery::split_black(
        &gallery::split_black(&g54, gallery::grid_id(1, 1, 5), 2, 100, 101),
        gallery::grid_id(3, 1, 5),
        2,
        102,
        103,
    );
    let instances = [
        gallery::split_black(&g44, gallery::grid_id(1, 1, 4), 1, 100, 101),
        gallery::split_black(&g44, gallery::grid_id(1, 1, 4), 2, 100, 101),
        gallery::split_black(&g44, gallery::grid_id(1, 1, 4), 3, 100, 101),
        gallery::split_black(&g44, gallery::grid_id(2, 2, 4), 2, 100, 101),
        double,
    ];
    let mut matched = 0;
    let mut components = 0;
    for (i, base) in instances.iter().enumerate() {
        let map = randomize_weights(base, 40 + i as u64);
        let expected = interior_one_cuts(&map);
        let q = choose_polygon(map.boundary_profile().m, i as u64).unwrap();
        let Ok(psi) = build_psi(&map, &q, None) else { continue };
        let found: BTreeSet<Vec<i64>> = detect_flat_faces(&psi)
            .into_iter()
            .filter(|c| c.is_one_cut)
            .map(|c| {
                let mut ids = c.vertex_ids;
                ids.sort_unstable();
                ids
            })
            .collect();
        components += found.len();
        matched += (!expected.is_empty() && found == expected) as usize;
    }
    outcome(matched == 5, format!("{matched}/5 instances match, {components} parallel components"))
}

/// Unit weights perturbed by at most one percent. Exactly unit weights make
/// vertices of the T-graph coincide, and the walk length grows like the
/// inverse of the perturbation.
fn near_unit(map: &PlanarMap, seed: u64) -> PlanarMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Rational> = map
        .edges()
        .iter()
        .map(|_| int(1) + frac(rng.random_range(1..=10), 1000))
        .collect();
    map.with_weights(&weights).unwrap()
}

fn sampler_fidelity() -> Outcome {
    let start = Instant::now();
    let cevian = TGraph::build(&gallery::cevian(), Ambient::Plane).unwrap();
    let cevian_root = cevian.default_dual_root();
    let map = near_unit(&gallery::grid_minus_corner(), 3);
    let q = choose_polygon(map.boundary_profile().m, 3).unwrap();
    let (grid, _, grid_root) = tgraph_of(&build_psi(&map, &q, None).unwrap()).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, t, root) in [("cevian", &cevian, cevian_root), ("3x3 minus corner", &grid, Some(grid_root))] {
        let g = t.derived_dimer_graph(root).unwrap();
        let r = empirical_report(t, &g, 100_000, RngConfig::new(11)).unwrap();
        let c = r.matchings.expect("small enough for the exact law");
        ok &= c.total_variation < 0.02 && c.p_value > 0.001;
        if root == Some(grid_root) {
            // Nearly uniform over the four matchings.
            ok &= r.histogram.len() == 4 && r.histogram.values().all(|&k| (k as f64 / 1e5 - 0.25).abs() < 0.01);
        }
        lines.push(format!("{name}: {} matchings, tv {:.4}, p {:.3}", r.histogram.len(), c.total_variation, c.p_value));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && secs < 30.0, format!("{}, {secs:.1} s", lines.join("; ")))
}

fn temperley_count() -> Outcome {
    // 2x2 grid: vertices 0..4 around a square.
    let trees = brute_force_spanning_trees(4, &[(0, 1), (1, 3), (3, 2), (2, 0)]);
    let (matchings, _) = brute_force_matchings(&gallery::grid_minus_corner());
    outcome(trees == 4 && matchings == 4, format!("{trees} spanning trees, {matchings} perfect matchings"))
}

fn spectral_classification() -> Outcome {
    let roots = unit_torus_roots(&spectral_polynomial(&gallery::honeycomb_torus(int(4), int(5), int(6))).unwrap()).unwrap();
    let conjugate = roots.len() == 2
        && (roots[0].theta + roots[1].theta).rem_euclid(std::f64::consts::TAU).min(
            std::f64::consts::TAU - (roots[0].theta + roots[1].theta).rem_euclid(std::f64::consts::TAU),
        ) < 1e-9;
    let re_ok = roots.iter().all(|r| (r.alpha().re + 0.125).abs() < 1e-9 && (r.beta().norm() - 1.0).abs() < 1e-10);
    let none = unit_torus_roots(&spectral_polynomial(&gallery::honeycomb_torus(int(1), int(1), int(3))).unwrap()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut histogram: BTreeMap<(&str, usize), usize> = BTreeMap::new();
    let mut bad = 0;
    for _ in 0..50 {
        let mut w = [0i64; 3];
        for x in w.iter_mut() {
            *x = rng.random_range(50..=200);
        }
        let hc = gallery::honeycomb_torus(frac(w[0], 100), frac(w[1], 100), frac(w[2], 100));
        let mut so = [0i64; 12];
        for x in so.iter_mut() {
            *x = rng.random_range(50..=200);
        }
        for (name, tm) in [("honeycomb", hc), ("square-octagon", gallery::square_octagon_torus(&so))] {
            let search = find_unit_roots(&spectral_polynomial(&tm).unwrap()).unwrap();
            let n = search.roots.len();
            if !search.warnings.is_empty() || !(n == 0 || n == 2) {
                bad += 1;
            }
            *histogram.entry((name, n)).or_default() += 1;
        }
    }
    let hist: Vec<String> = histogram.iter().map(|((name, n), c)| format!("{name} {n} roots x{c}")).collect();
    outcome(
        conjugate && re_ok && none.is_empty() && bad == 0,
        format!(
            "(4,5,6): {} conjugate roots, Re(alpha) = {:.12}; (1,1,3): {} roots; trials: {}",
            roots.len(),
            roots.first().map_or(f64::NAN, |r| r.alpha().re),
            none.len(),
            hist.join(", ")
        ),
    )
}

fn almost_periodic_patch_law() -> Outcome {
    let tm = gallery::honeycomb_torus(int(4), int(5), int(6));
    let roots = unit_torus_roots(&spectral_polynomial(&tm).unwrap()).unwrap();
    let patch = almost_periodic_patch(&tm, &roots[0], [10, 10], 1).unwrap();
    let diameters: Vec<f64> = [10usize, 15, 20]
        .iter()
        .map(|&n| almost_periodic_patch(&tm, &roots[0], [n, n], 1).unwrap().diameter)
        .collect();
    let increasing = diameters.windows(2).all(|w| w[1] > w[0]);
    outcome(
        patch.checked_vertices > 0 && patch.martingale_residual < 1e-6 && patch.rotation_residual < 1e-6 && increasing,
        format!(
            "{} interior vertices, martingale {:.1e}, rotation {:.1e}, diameters {:.1} < {:.1} < {:.1}",
            patch.checked_vertices, patch.martingale_residual, patch.rotation_residual, diameters[0], diameters[1], diameters[2]
        ),
    )
}

fn torus_correspondence() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, segs) in [
        ("pair", gallery::torus_pair()),
        ("skew pair", gallery::torus_pair_skew()),
        ("grid", gallery::torus_grid()),
    ] {
        let t = TGraph::build(&segs, Ambient::Torus).unwrap();
        match torus_correspondence_check(&t) {
            Ok(r) => {
                ok &= r.passed();
                parts.push(format!("{name}: {} marked = {} oriented CRSFs", r.marked_matchings, r.oriented_total));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kasteleyn identity", kasteleyn_identity),
        ("face-count law", face_count_law),
        ("bijection and measure", bijection),
        ("construction round trip", construction_round_trip),
        ("flat-face law", flat_face_law),
        ("sampler fidelity", sampler_fidelity),
        ("temperley count", temperley_count),
        ("spectral classification", spectral_classification),
        ("almost periodic patch", almost_periodic_patch_law),
        ("torus correspondence", torus_correspondence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        failed += !result.passed as usize;
        println!(
            "acceptance {:>2} {:<24} {}  {}",
            i + 1,
            name,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
