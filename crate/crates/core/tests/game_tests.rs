//! Congestion-game semantics against exhaustive oracles: subset sums for the
//! fractional layer, full pure-profile products for expectations, finite
//! differences for the gradient, and brute-force deviation checks for the
//! equilibrium quantities.

mod common;

use std::sync::Arc;

use common::*;
use congame::game::{CongestionGame, JointProfile, PROFILE_CAP};
use congame::graph::Path;
use congame::polytope::{FractionalStrategy, PathPolytope};
use congame::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_tables(m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..=n).map(|l| l as f64).collect())
        .collect()
}

/// 2 agents on 2 parallel edges with c(l) = l.
fn two_agent_parallel() -> CongestionGame {
    CongestionGame::new(parallel(2), vec![(0, 1), (0, 1)], linear_tables(2, 2)).unwrap()
}

fn pure(paths: Vec<Vec<usize>>) -> Vec<Path> {
    paths.into_iter().map(Path::new).collect()
}

/// A random little game plus explicit per-agent path mixtures for oracles.
fn random_game_with_mixes(
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (CongestionGame, Vec<Vec<f64>>, Vec<Vec<(Path, f64)>>) {
    let (g, s, t) = random_layered_dag(rng, 2, 2);
    let m = g.edge_count();
    let tables = random_cost_tables(rng, m, n);
    let game = CongestionGame::new(g.clone(), vec![(s, t); n], tables.clone()).unwrap();
    let polytope = PathPolytope::new(g, s, t).unwrap();
    let mixes: Vec<Vec<(Path, f64)>> = (0..n)
        .map(|_| random_mixture_point(&polytope, rng, 3).1)
        .collect();
    (game, tables, mixes)
}

fn mix_marginals(mixes: &[Vec<(Path, f64)>], m: usize) -> Vec<FractionalStrategy> {
    mixes
        .iter()
        .map(|mix| {
            let mut x = vec![0.0; m];
            for (path, w) in mix {
                for &e in path.edges() {
                    x[e] += w;
                }
            }
            FractionalStrategy::new(x)
        })
        .collect()
}

#[test]
fn constructor_validates_cost_tables() {
    let g = parallel(2);
    let bad_count = CongestionGame::new(g.clone(), vec![(0, 1)], vec![vec![0.0, 1.0]]);
    assert!(matches!(bad_count, Err(Error::InvalidCosts { .. })));

    let bad_len = CongestionGame::new(
        g.clone(),
        vec![(0, 1)],
        vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]],
    );
    assert!(matches!(bad_len, Err(Error::InvalidCosts { .. })));

    let decreasing = CongestionGame::new(
        g.clone(),
        vec![(0, 1)],
        vec![vec![0.0, 1.0], vec![1.0, 0.5]],
    );
    assert!(matches!(decreasing, Err(Error::InvalidCosts { .. })));

    let negative = CongestionGame::new(
        g.clone(),
        vec![(0, 1)],
        vec![vec![-0.1, 1.0], vec![0.0, 1.0]],
    );
    assert!(matches!(negative, Err(Error::InvalidCosts { .. })));

    let unreachable = CongestionGame::new(
        Arc::new(congame::graph::build_dag(3, &[(0, 1)]).unwrap()),
        vec![(0, 2)],
        vec![vec![0.0, 1.0]],
    );
    assert!(matches!(unreachable, Err(Error::Unreachable { .. })));
}

#[test]
fn c_max_is_max_cost_at_full_load() {
    let game = CongestionGame::new(
        parallel(2),
        vec![(0, 1), (0, 1)],
        vec![vec![0.0, 1.0, 5.0], vec![0.0, 4.0, 4.5]],
    )
    .unwrap();
    assert_eq!(game.c_max(), 5.0);
}

#[test]
fn loads_count_shared_edges() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let game = CongestionGame::new(g, vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    assert_eq!(game.pure_loads(&pure(vec![vec![0], vec![0]])), vec![2]);
}

#[test]
fn loads_split_across_parallel_edges() {
    let game = two_agent_parallel();
    assert_eq!(game.pure_loads(&pure(vec![vec![0], vec![1]])), vec![1, 1]);
}

#[test]
fn loads_match_recount_on_random_profiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let (game, _, mixes) = random_game_with_mixes(&mut rng, 4);
        let profile: Vec<Path> = mixes.iter().map(|mix| mix[0].0.clone()).collect();
        let loads = game.pure_loads(&profile);
        for e in 0..game.edge_count() {
            let count = profile.iter().filter(|p| p.contains(e)).count() as u32;
            assert_eq!(loads[e], count);
        }
    }
}

#[test]
fn agent_cost_at_load_one_and_two() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let single = CongestionGame::new(g.clone(), vec![(0, 1)], vec![vec![0.0, 1.0]]).unwrap();
    assert_eq!(single.agent_cost(&pure(vec![vec![0]])), vec![1.0]);

    let shared = CongestionGame::new(g, vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    assert_eq!(
        shared.agent_cost(&pure(vec![vec![0], vec![0]])),
        vec![2.0, 2.0]
    );
}

#[test]
fn agent_cost_matches_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let profile: Vec<Path> = mixes.iter().map(|mix| mix[0].0.clone()).collect();
        let loads = game.pure_loads(&profile);
        let costs = game.agent_cost(&profile);
        for (i, path) in profile.iter().enumerate() {
            let expect: f64 = path
                .edges()
                .iter()
                .map(|&e| tables[e][loads[e] as usize])
                .sum();
            assert!(approx(costs[i], expect, 1e-12));
        }
    }
}

#[test]
fn load_distribution_degenerate_cases() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let game = CongestionGame::new(g.clone(), vec![(0, 1)], vec![vec![0.0, 1.0]]).unwrap();
    let x = vec![FractionalStrategy::new(vec![1.0])];
    let ld = game.load_distribution(&x, None);
    assert_eq!(ld.edge(0), &[0.0, 1.0]);

    let game2 = CongestionGame::new(g, vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    let x2 = vec![
        FractionalStrategy::new(vec![0.5]),
        FractionalStrategy::new(vec![0.5]),
    ];
    let ld2 = game2.load_distribution(&x2, None);
    assert!(max_abs_diff(ld2.edge(0), &[0.25, 0.5, 0.25]) <= 1e-15);
}

#[test]
fn load_distribution_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..20 {
        let (game, _, mixes) = random_game_with_mixes(&mut rng, 4);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let ld = game.load_distribution(&marginals, None);
        for e in 0..game.edge_count() {
            let probs: Vec<f64> = marginals.iter().map(|x| x[e]).collect();
            let oracle = load_dist_subset_oracle(&probs);
            assert!(max_abs_diff(ld.edge(e), &oracle) <= 1e-12);
            assert!(approx(ld.edge(e).iter().sum::<f64>(), 1.0, 1e-12));
            assert!(ld.edge(e).iter().all(|&p| p >= -1e-15));
        }
    }
}

#[test]
fn potential_on_degenerate_profiles() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let game =
        CongestionGame::new(g.clone(), vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    let both = vec![
        FractionalStrategy::new(vec![1.0]),
        FractionalStrategy::new(vec![1.0]),
    ];
    assert!(approx(game.potential(&both), 3.0, 1e-15));

    // With zero selection probability only the c(0) offset term remains.
    let game0 = CongestionGame::new(g, vec![(0, 1)], vec![vec![0.7, 1.0]]).unwrap();
    let none = vec![FractionalStrategy::new(vec![0.0])];
    assert!(approx(game0.potential(&none), 0.7, 1e-15));
}

#[test]
fn potential_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..30 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let flat: Vec<Vec<f64>> = marginals.iter().map(|x| x.as_slice().to_vec()).collect();
        let oracle = potential_subset_oracle(&tables, &flat);
        assert!(
            approx(game.potential(&marginals), oracle, 1e-12),
            "{} vs {oracle}",
            game.potential(&marginals)
        );
    }
}

#[test]
fn gradient_on_single_shared_edge() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let game =
        CongestionGame::new(g.clone(), vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    let x = vec![
        FractionalStrategy::new(vec![0.3]),
        FractionalStrategy::new(vec![0.5]),
    ];
    let grads = game.grad_potential(&x);
    // Other agent present with probability 0.5: 0.5 * c(1) + 0.5 * c(2).
    assert!(approx(grads[0][0], 1.5, 1e-15));

    let solo = CongestionGame::new(g, vec![(0, 1)], vec![vec![0.0, 0.9]]).unwrap();
    let grads = solo.grad_potential(&[FractionalStrategy::new(vec![0.4])]);
    assert!(approx(grads[0][0], 0.9, 1e-15));
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(39);
    for _ in 0..100 {
        let n = rng.random_range(2..=3);
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, n);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let flat: Vec<Vec<f64>> = marginals.iter().map(|x| x.as_slice().to_vec()).collect();
        let grads = game.grad_potential(&marginals);
        for i in 0..n {
            for e in 0..game.edge_count() {
                if !game.polytope(i).is_active(e) {
                    assert_eq!(grads[i][e], 0.0);
                    continue;
                }
                let fd = {
                    let mut f = flat.clone();
                    central_diff(
                        |v| {
                            f[i] = v.to_vec();
                            potential_subset_oracle(&tables, &f)
                        },
                        &flat[i],
                        e,
                        1e-5,
                    )
                };
                let rel = (grads[i][e] - fd).abs() / grads[i][e].abs().max(1e-6);
                assert!(
                    rel <= 1e-6,
                    "agent {i} edge {e}: {} vs fd {fd}",
                    grads[i][e]
                );
            }
        }
    }
}

#[test]
fn expected_cost_on_forced_profiles() {
    let g = Arc::new(congame::graph::build_dag(2, &[(0, 1)]).unwrap());
    let game = CongestionGame::new(g, vec![(0, 1), (0, 1)], vec![vec![0.0, 1.0, 2.0]]).unwrap();
    let x = vec![
        FractionalStrategy::new(vec![1.0]),
        FractionalStrategy::new(vec![1.0]),
    ];
    assert!(approx(game.expected_agent_cost(&x, 0), 2.0, 1e-15));
    assert!(approx(game.expected_agent_cost(&x, 1), 2.0, 1e-15));

    let two_hop = Arc::new(congame::graph::build_dag(3, &[(0, 1), (1, 2)]).unwrap());
    let game =
        CongestionGame::new(two_hop, vec![(0, 2)], vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let x = vec![FractionalStrategy::new(vec![1.0, 1.0])];
    assert!(approx(game.expected_agent_cost(&x, 0), 2.0, 1e-15));
}

#[test]
fn expected_cost_matches_product_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..25 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let marginals = mix_marginals(&mixes, game.edge_count());
        for i in 0..3 {
            let ours = game.expected_agent_cost(&marginals, i);
            let oracle = expected_cost_product_oracle(&tables, &mixes, i, game.edge_count());
            assert!(approx(ours, oracle, 1e-9), "agent {i}: {ours} vs {oracle}");
        }
    }
}

#[test]
fn best_response_against_pinned_opponent() {
    let game = two_agent_parallel();
    let x = vec![
        FractionalStrategy::new(vec![1.0, 0.0]),
        FractionalStrategy::new(vec![1.0, 0.0]),
    ];
    let (path, value) = game.best_response_value(&x, 1).unwrap();
    assert_eq!(path.edges(), &[1]);
    assert!(approx(value, 1.0, 1e-15));
}

#[test]
fn best_response_tie_breaks_to_lowest_edge() {
    let game = two_agent_parallel();
    let x = vec![
        FractionalStrategy::new(vec![0.5, 0.5]),
        FractionalStrategy::new(vec![0.5, 0.5]),
    ];
    let (path, value) = game.best_response_value(&x, 0).unwrap();
    assert_eq!(path.edges(), &[0]);
    assert!(approx(value, 1.5, 1e-15));
}

#[test]
fn best_response_matches_enumerated_deviations() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..25 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let (s, t) = game.agents()[0];
        let paths = congame::graph::enumerate_paths(game.graph(), s, t, 10_000).unwrap();
        for i in 0..3 {
            let (_, ours) = game.best_response_value(&marginals, i).unwrap();
            let mut deviated = mixes.clone();
            let best = paths
                .iter()
                .map(|p| {
                    deviated[i] = vec![(p.clone(), 1.0)];
                    expected_cost_product_oracle(&tables, &deviated, i, game.edge_count())
                })
                .fold(f64::INFINITY, f64::min);
            assert!(approx(ours, best, 1e-9), "agent {i}: {ours} vs {best}");
        }
    }
}

#[test]
fn exploitability_zero_at_anti_aligned_profile() {
    let game = two_agent_parallel();
    let profile = JointProfile::Pure(pure(vec![vec![0], vec![1]]));
    let ex = game.exploitability(&profile.marginals(2)).unwrap();
    assert_eq!(ex.absolute, 0.0);
    assert_eq!(ex.relative, Some(0.0));
}

#[test]
fn exploitability_of_clashing_profile() {
    let game = two_agent_parallel();
    let profile = JointProfile::Pure(pure(vec![vec![0], vec![0]]));
    let ex = game.exploitability(&profile.marginals(2)).unwrap();
    assert!(approx(ex.absolute, 1.0, 1e-15));
    assert!(approx(ex.relative.unwrap(), 1.0, 1e-15));
}

#[test]
fn exploitability_flags_zero_denominator() {
    let game = CongestionGame::new(
        parallel(2),
        vec![(0, 1), (0, 1)],
        vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
    )
    .unwrap();
    let profile = JointProfile::Pure(pure(vec![vec![0], vec![0]]));
    let ex = game.exploitability(&profile.marginals(2)).unwrap();
    assert_eq!(ex.absolute, 0.0);
    assert_eq!(ex.relative, None);
}

#[test]
fn exploitability_matches_brute_force_deviations() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..25 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let (s, t) = game.agents()[0];
        let paths = congame::graph::enumerate_paths(game.graph(), s, t, 10_000).unwrap();
        let mut abs: f64 = 0.0;
        let mut rel: f64 = 0.0;
        for i in 0..3 {
            let current = expected_cost_product_oracle(&tables, &mixes, i, game.edge_count());
            let mut deviated = mixes.clone();
            let best = paths
                .iter()
                .map(|p| {
                    deviated[i] = vec![(p.clone(), 1.0)];
                    expected_cost_product_oracle(&tables, &deviated, i, game.edge_count())
                })
                .fold(f64::INFINITY, f64::min);
            let gain = (current - best).max(0.0);
            abs = abs.max(gain);
            rel = rel.max(gain / best);
        }
        let ex = game.exploitability(&marginals).unwrap();
        assert!(approx(ex.absolute, abs, 1e-9));
        assert!(approx(ex.relative.unwrap(), rel, 1e-9));
    }
}

#[test]
fn stationarity_vanishes_at_symmetric_mixed_ne() {
    let game = two_agent_parallel();
    let x = vec![
        FractionalStrategy::new(vec![0.5, 0.5]),
        FractionalStrategy::new(vec![0.5, 0.5]),
    ];
    let gap = game.stationarity_gap(&x, 0.25).unwrap();
    assert!(gap <= 1e-6, "gap {gap}");
}

#[test]
fn stationarity_gap_matches_hand_computed_value() {
    // x = (0.6, 0.4) for both agents, linear costs, mu = 0.1. The gradient is
    // (1.6, 1.4) per agent; the simplex projection of x - lambda * grad moves
    // each agent by 0.1 * lambda * sqrt(2), so the stacked gap is
    // 0.2 * lambda with lambda = 1 / (2 * n^2 * c_max * sqrt(m)).
    let game = two_agent_parallel();
    let x = vec![
        FractionalStrategy::new(vec![0.6, 0.4]),
        FractionalStrategy::new(vec![0.6, 0.4]),
    ];
    let gap = game.stationarity_gap(&x, 0.1).unwrap();
    let lambda = 1.0 / (2.0 * 4.0 * 2.0 * 2.0_f64.sqrt());
    assert!(
        approx(gap, 0.2 * lambda, 1e-9),
        "gap {gap} vs {}",
        0.2 * lambda
    );
}

#[test]
fn stationarity_gap_matches_oracle_recomputation() {
    // Small fixed graphs keep the oracle's 3^k face enumeration cheap.
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for round in 0..10 {
        let g = match round % 4 {
            0 => diamond(),
            1 => diamond_with_chord(),
            2 => chain(3, 2),
            _ => parallel(3),
        };
        let m = g.edge_count();
        let sink = g.node_count() - 1;
        let tables = random_cost_tables(&mut rng, m, 3);
        let game = CongestionGame::new(g.clone(), vec![(0, sink); 3], tables.clone()).unwrap();
        let polytope = PathPolytope::new(g, 0, sink).unwrap();
        let mixes: Vec<Vec<(Path, f64)>> = (0..3)
            .map(|_| random_mixture_point(&polytope, &mut rng, 3).1)
            .collect();
        let marginals = mix_marginals(&mixes, m);
        let mu_cap = (0..3)
            .map(|i| game.polytope(i).max_mu())
            .fold(f64::INFINITY, f64::min);
        let mu = 0.5 * mu_cap;
        let ours = game.stationarity_gap(&marginals, mu).unwrap();

        let n = 3.0;
        let lambda = 1.0 / (2.0 * n * n * game.c_max() * (m as f64).sqrt());
        let flat: Vec<Vec<f64>> = marginals.iter().map(|x| x.as_slice().to_vec()).collect();
        let mut gap_sq = 0.0;
        for i in 0..3 {
            let mut grad = deviation_weight_oracle(&tables, &flat, i);
            for (e, g) in grad.iter_mut().enumerate() {
                if !game.polytope(i).is_active(e) {
                    *g = 0.0;
                }
            }
            let y: Vec<f64> = flat[i]
                .iter()
                .zip(&grad)
                .map(|(&xe, &ge)| xe - lambda * ge)
                .collect();
            let proj = projection_oracle(game.polytope(i), mu, &y);
            gap_sq += flat[i]
                .iter()
                .zip(&proj)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let oracle = gap_sq.sqrt();
        assert!(approx(ours, oracle, 1e-6), "{ours} vs {oracle}");
    }
}

#[test]
fn pure_ne_of_two_agent_parallel_game() {
    let game = two_agent_parallel();
    let nes = game.brute_force_pure_ne(0.0).unwrap();
    let expected: Vec<JointProfile> = vec![
        JointProfile::Pure(pure(vec![vec![0], vec![1]])),
        JointProfile::Pure(pure(vec![vec![1], vec![0]])),
    ];
    assert_eq!(nes, expected);
}

#[test]
fn pure_ne_single_agent_returns_min_cost_paths() {
    let game = CongestionGame::new(
        parallel(3),
        vec![(0, 1)],
        vec![vec![0.0, 2.0], vec![0.0, 1.0], vec![0.0, 1.0]],
    )
    .unwrap();
    let nes = game.brute_force_pure_ne(0.0).unwrap();
    let expected: Vec<JointProfile> = vec![
        JointProfile::Pure(pure(vec![vec![1]])),
        JointProfile::Pure(pure(vec![vec![2]])),
    ];
    assert_eq!(nes, expected);
}

#[test]
fn pure_ne_exists_on_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    for _ in 0..20 {
        let n = rng.random_range(1..=3);
        let (game, _, _) = random_game_with_mixes(&mut rng, n);
        let nes = game.brute_force_pure_ne(0.0).unwrap();
        assert!(!nes.is_empty(), "a congestion game must have a pure NE");
    }
}

#[test]
fn pure_ne_enumeration_cap() {
    // Two agents on a 10-segment chain: 2^10 paths each, 2^20 profiles.
    let game =
        CongestionGame::new(chain(10, 2), vec![(0, 10), (0, 10)], linear_tables(20, 2)).unwrap();
    match game.brute_force_pure_ne(0.0) {
        Err(Error::TooLarge { size, cap }) => {
            assert_eq!(size, 1 << 20);
            assert_eq!(cap, PROFILE_CAP);
        }
        other => panic!("expected TooLarge, got {other:?}"),
    }
}

#[test]
fn potential_difference_tracks_deviating_agent_cost_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..25 {
        let (game, _, mixes) = random_game_with_mixes(&mut rng, 3);
        let m = game.edge_count();
        let base: Vec<Path> = mixes.iter().map(|mix| mix[0].0.clone()).collect();
        let (s, t) = game.agents()[1];
        let alts = congame::graph::enumerate_paths(game.graph(), s, t, 10_000).unwrap();
        for alt in alts {
            let mut dev = base.clone();
            dev[1] = alt;
            let d_cost = game.agent_cost(&dev)[1] - game.agent_cost(&base)[1];
            let d_phi = game.potential(&JointProfile::Pure(dev).marginals(m))
                - game.potential(&JointProfile::Pure(base.clone()).marginals(m));
            assert!(approx(d_cost, d_phi, 1e-9), "{d_cost} vs {d_phi}");
        }
    }
}

#[test]
fn potential_difference_tracks_deviating_agent_cost_fractional() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..20 {
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, 3);
        let m = game.edge_count();
        let marginals = mix_marginals(&mixes, m);
        // replace agent 2's mixture wholesale
        let polytope = game.polytope(2).clone();
        let (_, alt_mix) = random_mixture_point(&polytope, &mut rng, 3);
        let mut dev_mixes = mixes.clone();
        dev_mixes[2] = alt_mix;
        let dev_marginals = mix_marginals(&dev_mixes, m);

        let d_phi = game.potential(&dev_marginals) - game.potential(&marginals);
        let d_cost =
            game.expected_agent_cost(&dev_marginals, 2) - game.expected_agent_cost(&marginals, 2);
        assert!(approx(d_phi, d_cost, 1e-9), "{d_phi} vs {d_cost}");

        // and the fully independent product-enumeration version
        let d_phi_oracle = potential_product_oracle(&tables, &dev_mixes, m)
            - potential_product_oracle(&tables, &mixes, m);
        assert!(approx(d_phi, d_phi_oracle, 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // DP layer versus 2^n enumeration for up to 5 agents, and the potential
    // bound 0 <= Phi <= m n c_max + sum_e c_e(0).
    #[test]
    fn potential_dp_equals_subset_enumeration(seed in 0u64..1_000_000, n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (game, tables, mixes) = random_game_with_mixes(&mut rng, n);
        let m = game.edge_count();
        let marginals = mix_marginals(&mixes, m);
        let flat: Vec<Vec<f64>> = marginals.iter().map(|x| x.as_slice().to_vec()).collect();
        let phi = game.potential(&marginals);
        prop_assert!((phi - potential_subset_oracle(&tables, &flat)).abs() <= 1e-12);
        let offset: f64 = tables.iter().map(|t| t[0]).sum();
        prop_assert!(phi >= 0.0);
        prop_assert!(phi <= (m * n) as f64 * game.c_max() + offset + 1e-12);
    }

    // Absolute exploitability vanishes exactly when every agent is already
    // best-responding.
    #[test]
    fn exploitability_zero_iff_best_responding(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (game, _, mixes) = random_game_with_mixes(&mut rng, 2);
        let marginals = mix_marginals(&mixes, game.edge_count());
        let ex = game.exploitability(&marginals).unwrap();
        let all_br = (0..2).all(|i| {
            let current = game.expected_agent_cost(&marginals, i);
            let (_, br) = game.best_response_value(&marginals, i).unwrap();
            current - br <= 1e-9
        });
        prop_assert_eq!(ex.absolute <= 1e-9, all_br);
    }
}
