mod common;

use hiertrack::eval::evaluate;
use hiertrack::rounding::{exact_round, extract_chains, edge_pairs, greedy_round, surplus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{brute_force_surplus, feasible, oracle_hota, random_graph, random_instance};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn exact_rounding_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 7, 12);
        let acc = exact_round(&g, 0.5, 200).unwrap();
        prop_assert!(feasible(&g, &acc));
        let best = brute_force_surplus(&g, 0.5);
        prop_assert!((surplus(&g, &acc, 0.5) - best).abs() < 1e-9);
    }

    #[test]
    fn greedy_rounding_is_feasible_and_above_threshold(seed in any::<u64>(), t in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 8, 12);
        let acc = greedy_round(&g, t);
        prop_assert!(feasible(&g, &acc));
        prop_assert!(acc.iter().all(|&i| g.edges[i].score as f64 >= t));
        // accepted edges decompose into vertex-disjoint chains covering every node once
        let chains = extract_chains(g.nodes.len(), &edge_pairs(&g, &acc)).unwrap();
        let mut seen: Vec<usize> = chains.concat();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..g.nodes.len()).collect::<Vec<_>>());
        // greedy never beats the optimum
        prop_assert!(surplus(&g, &acc, t) <= brute_force_surplus(&g, t) + 1e-9);
    }

    #[test]
    fn hota_matches_exhaustive_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_instance(&mut rng, 3, 3);
        let m = evaluate(&pred, &gt).unwrap();
        let o = oracle_hota(&pred, &gt);
        prop_assert!((m.hota - o.hota).abs() < 1e-9, "hota {} vs {}", m.hota, o.hota);
        prop_assert!((m.deta - o.deta).abs() < 1e-9);
        prop_assert!((m.assa - o.assa).abs() < 1e-9);
    }

    #[test]
    fn hota_is_bounded_and_perfect_on_itself(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_instance(&mut rng, 5, 5);
        let m = evaluate(&pred, &gt).unwrap();
        for v in [m.hota, m.deta, m.assa] {
            prop_assert!((0.0..=100.0 + 1e-9).contains(&v));
        }
        if gt.num_points() > 0 {
            let s = evaluate(&gt, &gt).unwrap();
            prop_assert!((s.hota - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hota_ignores_track_id_values(seed in any::<u64>(), shift in 1u32..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, gt) = random_instance(&mut rng, 4, 4);
        let mut renamed = pred.clone();
        renamed.tracks = pred.tracks.iter().map(|(&k, v)| ((k + shift) * 7 % 10_007, v.clone())).collect();
        let a = evaluate(&pred, &gt).unwrap();
        let b = evaluate(&renamed, &gt).unwrap();
        prop_assert!((a.hota - b.hota).abs() < 1e-9);
    }
}

#[test]
fn greedy_equals_exact_without_conflicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 200 {
        let g = random_graph(&mut rng, 8, 8);
        let above: Vec<usize> = (0..g.edges.len()).filter(|&i| g.edges[i].score > 0.5).collect();
        if !feasible(&g, &above) {
            continue;
        }
        assert_eq!(greedy_round(&g, 0.5), above);
        assert_eq!(exact_round(&g, 0.5, 200).unwrap(), above);
        checked += 1;
    }
}
