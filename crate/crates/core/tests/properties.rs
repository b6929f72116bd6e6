use proptest::prelude::*;

use nearpot_dfp::analysis::{avg_ne_distance, lipschitz_bound, EquilibriumAtlas};
use nearpot_dfp::dfp::{empirical_update, run, Communication, RunConfig};
use nearpot_dfp::game::{expected_utility, mpd, regret, JointMixedProfile, MixedStrategy, NormalFormGame};
use nearpot_dfp::netcomm::{build_weights, GraphSchedule, WeightRule};

fn game(n: usize, k: usize) -> impl Strategy<Value = NormalFormGame> {
    let size = k.pow(n as u32);
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, size), n)
        .prop_map(move |u| NormalFormGame::new(n, k, u).unwrap())
}

fn simplex(k: usize) -> impl Strategy<Value = MixedStrategy> {
    prop::collection::vec(0.001..1.0f64, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        MixedStrategy::new(w.iter().map(|x| x / s).collect()).unwrap()
    })
}

fn profile(n: usize, k: usize) -> impl Strategy<Value = JointMixedProfile> {
    prop::collection::vec(simplex(k), n).prop_map(|s| JointMixedProfile::new(s).unwrap())
}

proptest! {
    #[test]
    fn mpd_is_a_pseudometric(a in game(2, 3), b in game(2, 3), c in game(2, 3)) {
        let ab = mpd(&a, &b).unwrap();
        prop_assert!((ab - mpd(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(mpd(&a, &a).unwrap().abs() <= 1e-12);
        prop_assert!(ab <= mpd(&a, &c).unwrap() + mpd(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn empirical_update_stays_on_simplex(f in simplex(4), action in 0usize..4, t in 1usize..500) {
        let g = empirical_update(&f, action, t).unwrap();
        let sum: f64 = g.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(g.probs().iter().all(|&p| p >= 0.0));
        for (i, (&new, &old)) in g.probs().iter().zip(f.probs()).enumerate() {
            let hit = if i == action { 1.0 } else { 0.0 };
            prop_assert!((new - (old + (hit - old) / t as f64)).abs() <= 1e-12);
        }
    }

    #[test]
    fn regret_is_nonnegative_and_matches_deviation(g in game(3, 2), f in profile(3, 2)) {
        let r = regret(&g, &f).unwrap();
        prop_assert!(r.overall >= 0.0);
        for i in 0..3 {
            let current = expected_utility(&g, i, &f).unwrap();
            let best = (0..2)
                .map(|a| {
                    let mut s = f.strategies().to_vec();
                    s[i] = MixedStrategy::pure(a, 2);
                    expected_utility(&g, i, &JointMixedProfile::new(s).unwrap()).unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((r.per_agent[i] - (best - current).max(0.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn ne_distance_ignores_list_order(f in profile(3, 3), picks in prop::collection::btree_set(0usize..27, 1..6), rot in 0usize..6) {
        let profiles: Vec<Vec<usize>> = picks.iter().map(|&p| vec![p / 9, (p / 3) % 3, p % 3]).collect();
        let mut shuffled = profiles.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        let a = EquilibriumAtlas::from_profiles(3, 3, profiles).unwrap();
        let b = EquilibriumAtlas::from_profiles(3, 3, shuffled).unwrap();
        let (da, db) = (avg_ne_distance(f.strategies(), &a), avg_ne_distance(f.strategies(), &b));
        prop_assert!((da - db).abs() <= 1e-12);
    }

    #[test]
    fn network_runs_respect_step_size_bound(g in game(4, 3), seed in 0u64..1000) {
        let weights = build_weights(&GraphSchedule::ring(4), WeightRule::SelfWeight { self_weight: 0.75 }, 60).unwrap();
        let cfg = RunConfig { horizon: 60, tiebreak_seed: seed, ..Default::default() };
        let traj = run(&g, &Communication::Network(weights), &cfg).unwrap();
        let mut prev = traj.initial_frequencies.clone();
        for s in &traj.steps {
            if s.t > 1 {
                let sq: f64 = prev
                    .strategies()
                    .iter()
                    .zip(s.frequencies.strategies())
                    .flat_map(|(a, b)| a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).powi(2)))
                    .sum();
                prop_assert!(sq.sqrt() <= 8.0 / s.t as f64 + 1e-12);
            }
            prev = s.frequencies.clone();
        }
    }
}

#[test]
fn lipschitz_bound_holds_on_sampled_pairs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mixed = |rng: &mut rand_chacha::ChaCha8Rng| {
        let s = (0..2)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-9).collect();
                let t: f64 = w.iter().sum();
                MixedStrategy::new(w.iter().map(|x| x / t).collect()).unwrap()
            })
            .collect();
        JointMixedProfile::new(s).unwrap()
    };
    for _ in 0..20 {
        let u: Vec<Vec<f64>> = (0..2).map(|_| (0..9).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let g = NormalFormGame::new(2, 3, u).unwrap();
        let l = lipschitz_bound(&g);
        for _ in 0..50 {
            let (a, b) = (mixed(&mut rng), mixed(&mut rng));
            let gap = a.distance(&b);
            for i in 0..2 {
                let du = (expected_utility(&g, i, &a).unwrap() - expected_utility(&g, i, &b).unwrap()).abs();
                assert!(du <= l * gap + 1e-12, "agent {i}: {du} > {l}·{gap}");
            }
        }
    }
}
