mod common;

use common::{moved, naive_match, random_tree, rng};
use neuroqc::matching::{find_match_exhaustive, resolve_matches};
use neuroqc::{find_match, match_map, parse_swc, serialize_swc, Error, MatchConfig, NeuronPoint, PointKind, SpatialIndex};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn serialize_then_parse_is_identity(n in 1usize..400, seed in any::<u64>(), extent in 1.0f64..5000.0) {
        let r = random_tree(3, n, extent, seed);
        let back = parse_swc(&serialize_swc(&r), 3, r.label()).unwrap();
        prop_assert_eq!(back.points(), r.points());
    }

    #[test]
    fn children_count_is_points_minus_roots(n in 1usize..400, seed in any::<u64>()) {
        let r = random_tree(1, n, 100.0, seed);
        let total: usize = r.points().iter().map(|p| r.children(p.id).unwrap().len()).sum();
        prop_assert_eq!(total, r.len() - r.roots().count());
    }

    #[test]
    fn children_are_exactly_the_points_naming_the_parent(n in 1usize..200, seed in any::<u64>()) {
        let r = random_tree(1, n, 100.0, seed);
        for p in r.points() {
            let mut expect: Vec<u64> = r.points().iter().filter(|c| c.parent == Some(p.id)).map(|c| c.id).collect();
            expect.sort_unstable();
            let got: Vec<u64> = r.children(p.id).unwrap().iter().map(|c| c.id).collect();
            prop_assert_eq!(got, expect);
        }
    }

    #[test]
    fn indexed_matching_equals_exhaustive(a in 1usize..1500, b in 1usize..1500, seed in any::<u64>(), extent in 5.0f64..200.0, t in 0.5f64..12.0) {
        let src = random_tree(1, a, extent, seed);
        let dst = random_tree(1, b, extent, seed ^ 0xabcdef);
        let cfg = MatchConfig::new(t).unwrap();
        let index = SpatialIndex::build(&dst).unwrap();
        for p in src.points() {
            let fast = find_match(p, &index, &cfg).map(|n| (n.id, n.distance));
            prop_assert_eq!(fast, naive_match(p, &dst, t));
            prop_assert_eq!(find_match(p, &index, &cfg), find_match_exhaustive(p, &dst, &cfg));
        }
    }

    #[test]
    fn self_map_is_identity(n in 1usize..800, seed in any::<u64>()) {
        let r = random_tree(2, n, 50.0, seed);
        let m = match_map(&r, &r, &MatchConfig::default()).unwrap();
        for e in &m.entries {
            prop_assert_eq!(e.dst_id, Some(e.src_id));
            prop_assert_eq!(e.distance, Some(0.0));
        }
    }

    #[test]
    fn matched_pairs_certify_a_reverse_match(n in 1usize..500, seed in any::<u64>()) {
        let a = random_tree(1, n, 60.0, seed);
        let b = random_tree(1, n, 60.0, seed.wrapping_add(1));
        let cfg = MatchConfig::default();
        let ab = match_map(&a, &b, &cfg).unwrap();
        let ba = match_map(&b, &a, &cfg).unwrap();
        for e in ab.entries.iter().filter(|e| e.dst_id.is_some()) {
            prop_assert!(ba.get(e.dst_id.unwrap()).unwrap().dst_id.is_some());
        }
    }
}

#[test]
fn jitter_below_two_voxels_matches_everything() {
    let mut rng = rng(17);
    for seed in 0..20 {
        let r = random_tree(4, 2000, 300.0, seed);
        // each axis below 2/sqrt(3) keeps the displacement under 2
        let lim = 2.0 / 3f64.sqrt() - 1e-9;
        let dst = moved(&r, "jit", |p| {
            [
                p[0] + rng.random_range(-lim..lim),
                p[1] + rng.random_range(-lim..lim),
                p[2] + rng.random_range(-lim..lim),
            ]
        });
        for (p, q) in r.points().iter().zip(dst.points()) {
            assert!(common::d2(p, q).sqrt() < 2.0);
        }
        let m = match_map(&r, &dst, &MatchConfig::default()).unwrap();
        assert_eq!(m.matched_count(), r.len());
        for p in r.points() {
            assert_eq!(m.get(p.id).unwrap().dst_id, naive_match(p, &dst, 4.0).map(|x| x.0));
        }
    }
}

#[test]
fn nearest_queries_match_a_scan() {
    let r = random_tree(1, 5000, 100.0, 99);
    let index = SpatialIndex::build(&r).unwrap();
    let mut rng = rng(5);
    for _ in 0..1000 {
        let q = [rng.random_range(-10.0..110.0), rng.random_range(-10.0..110.0), rng.random_range(-10.0..110.0)];
        let probe = NeuronPoint::new(1, PointKind::Other(0), q, 1.0, None);
        let fast = index.nearest(q).unwrap();
        let slow = naive_match(&probe, &r, f64::INFINITY).unwrap();
        assert_eq!((fast.id, fast.distance), slow);
    }
}

#[test]
fn radius_query_matches_a_scan() {
    let r = random_tree(1, 3000, 60.0, 4);
    let index = SpatialIndex::build(&r).unwrap();
    let mut rng = rng(6);
    for _ in 0..200 {
        let q = [rng.random_range(0.0..60.0), rng.random_range(0.0..60.0), rng.random_range(0.0..60.0)];
        let rad = rng.random_range(0.5..8.0);
        let probe = NeuronPoint::new(1, PointKind::Other(0), q, 1.0, None);
        let mut expect: Vec<u64> = r.points().iter().filter(|p| common::d2(p, &probe).sqrt() < rad).map(|p| p.id).collect();
        expect.sort_unstable();
        let got: Vec<u64> = index.within_radius(q, rad).iter().map(|n| n.id).collect();
        assert_eq!(got, expect);
    }
}

#[test]
fn parallel_and_sequential_resolution_agree() {
    let a = random_tree(1, 4000, 80.0, 1);
    let b = random_tree(1, 4000, 80.0, 2);
    let cfg = MatchConfig::default();
    let first = match_map(&a, &b, &cfg).unwrap();
    for threads in [1, 2, 7] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let m = pool.install(|| match_map(&a, &b, &cfg).unwrap());
        assert_eq!(m.to_json().unwrap(), first.to_json().unwrap());
    }
    let aligned = resolve_matches(&a, &b, &cfg).unwrap();
    assert_eq!(aligned.iter().filter(|m| m.is_some()).count(), first.matched_count());
}

#[test]
fn mismatched_neurons_and_empty_trees() {
    let a = random_tree(1, 10, 10.0, 1);
    let b = random_tree(2, 10, 10.0, 1);
    assert!(matches!(match_map(&a, &b, &MatchConfig::default()), Err(Error::NeuronMismatch(1, 2))));
    // an empty tree never gets as far as the index
    assert!(neuroqc::NeuronReconstruction::new(1, "e", vec![]).is_err());
}

#[test]
fn crlf_tabs_and_extra_fields_parse() {
    let text = "# c\r\n1\t1  0 0 0\t1 -1 extra\r\n\r\n2 3 1.5 2 3 0.5 1\r\n";
    let r = parse_swc(text, 1, "x").unwrap();
    assert_eq!(r.len(), 2);
    assert_eq!(r.get(2).unwrap().kind, PointKind::Dendrite);
}
