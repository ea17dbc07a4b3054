use num_bigint::BigInt;
use proptest::prelude::*;

use dimer_forge::construct::{build_psi, choose_polygon};
use dimer_forge::correspondence::{forest_from_marked_matching, is_rooted_forest, marked_matching_from_forest};
use dimer_forge::gallery;
use dimer_forge::kasteleyn::{assign_signs, enumerate_matchings, face_rule_signs, partition_function, signs_satisfy_rule};
use dimer_forge::linalg::Rational;
use dimer_forge::periodic::{find_unit_roots, spectral_polynomial};
use dimer_forge::planarmap::{parse_graph, GraphFile, PlanarMap};
use dimer_forge::sampler::{wilson_sample_forest, RngConfig};
use dimer_forge::tgraph::{Ambient, Segment, TGraph};

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn bases() -> Vec<PlanarMap> {
    vec![
        gallery::four_cycle_unit(),
        gallery::six_cycle_unit(),
        gallery::grid_minus_corner(),
        gallery::grid_with(2, 4, &[], |_, _| int(1)),
        gallery::grid_with(3, 4, &[(0, 0), (2, 3)], |_, _| int(1)),
    ]
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((1i64..60, 1i64..60), n).prop_map(|v| {
        v.into_iter()
            .map(|(p, q)| Rational::new(BigInt::from(p), BigInt::from(q)))
            .collect()
    })
}

fn weighted_base() -> impl Strategy<Value = PlanarMap> {
    (0..bases().len()).prop_flat_map(|i| {
        let base = bases()[i].clone();
        weights(base.num_edges()).prop_map(move |w| base.with_weights(&w).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_counts_matchings(map in weighted_base()) {
        let k = assign_signs(&map).unwrap();
        let (_, z) = enumerate_matchings(&map).unwrap();
        prop_assert_eq!(partition_function(&k), z);
    }

    #[test]
    fn signs_follow_the_face_rule(map in weighted_base()) {
        let signs = face_rule_signs(&map, Some(map.outer_face()));
        prop_assert!(signs_satisfy_rule(&map, &signs, Some(map.outer_face())));
    }

    #[test]
    fn gauge_scales_the_partition_function(map in weighted_base(), v in 0usize..4, c in 2i64..9) {
        // Multiplying every weight at one vertex by c multiplies Z by c.
        let v = v % map.num_vertices();
        let scaled: Vec<Rational> = map
            .edges()
            .iter()
            .map(|e| if e.u == v || e.v == v { &e.weight * int(c) } else { e.weight.clone() })
            .collect();
        let (_, z) = enumerate_matchings(&map).unwrap();
        let (_, zc) = enumerate_matchings(&map.with_weights(&scaled).unwrap()).unwrap();
        prop_assert_eq!(zc, z * int(c));
    }

    #[test]
    fn graph_files_round_trip(map in weighted_base()) {
        let back = parse_graph(&map.to_json()).unwrap();
        prop_assert_eq!(back, GraphFile::Plane(map));
    }

    #[test]
    fn chosen_polygons_are_convex(m in 2usize..12, seed in any::<u64>()) {
        let q = choose_polygon(m, seed).unwrap();
        prop_assert_eq!(q.vertices.len(), m + 1);
        prop_assert!(q.is_convex());
        prop_assert!(q.area() > 0.0);
    }

    #[test]
    fn tiles_cover_the_polygon(map in weighted_base(), seed in 0u64..1000) {
        let q = choose_polygon(map.boundary_profile().m, seed).unwrap();
        let psi = build_psi(&map, &q, None).unwrap();
        prop_assert_eq!(psi.segments.len(), map.black_vertices().len());
        prop_assert!(psi.area_error() < 1e-9);
        prop_assert!(psi.root_error < 1e-9);
    }

    #[test]
    fn sampled_forests_survive_the_bijection(which in 0usize..3, seed in any::<u64>()) {
        let segs = [gallery::cevian(), gallery::framed_square(), gallery::triangle()][which].clone();
        let t = TGraph::build(&segs, Ambient::Plane).unwrap();
        let g = t.derived_dimer_graph(t.default_dual_root()).unwrap();
        let forest = wilson_sample_forest(&t, RngConfig::new(seed)).unwrap();
        prop_assert!(is_rooted_forest(&t, &forest));
        let m = marked_matching_from_forest(&t, &g, &forest).unwrap();
        prop_assert_eq!(forest_from_marked_matching(&t, &g, &m).unwrap(), forest);
    }

    #[test]
    fn torus_grids_have_one_face_per_segment(
        x1 in 0.05f64..0.45, x2 in 0.55f64..0.95, y1 in 0.05f64..0.45, y2 in 0.55f64..0.95,
    ) {
        let segs = vec![
            Segment::new([x1, y1], [x1 + 1.0, y1]),
            Segment::new([x2, y2], [x2 + 1.0, y2]),
            Segment::new([x1, y2], [x1, y2 + 1.0]),
            Segment::new([x2, y1], [x2, y1 + 1.0]),
        ];
        let t = TGraph::build(&segs, Ambient::Torus).unwrap();
        prop_assert_eq!(t.num_faces(), 4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `a + bα + cβ` vanishes on the unit torus exactly when `a, b, c` are
    /// the sides of a triangle.
    #[test]
    fn honeycomb_roots_follow_the_triangle_inequality(a in 1i64..40, b in 1i64..40, c in 1i64..40) {
        let mut s = [a, b, c];
        s.sort_unstable();
        prop_assume!(s[2] != s[0] + s[1]);
        let tm = gallery::honeycomb_torus(int(a), int(b), int(c));
        let search = find_unit_roots(&spectral_polynomial(&tm).unwrap()).unwrap();
        prop_assert!(search.warnings.is_empty());
        let expected = if s[2] < s[0] + s[1] { 2 } else { 0 };
        prop_assert_eq!(search.roots.len(), expected);
    }
}
