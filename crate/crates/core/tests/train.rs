mod common;

use asor_lab::analysis::accessible_states;
use asor_lab::lavaworld::{LavaLayout, LavaRow, LavaWorld};
use asor_lab::mdp::{occupancy, optimal_policy, StateId};
use asor_lab::train::{
    exact_episodic_return, rollout, rollout_one, train, Algorithm, EvalMode, TrainerConfig,
    DEFAULT_HORIZON,
};
use common::Grid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Small single-hazard world: lava on row 1 except column 0, on row 3
/// except column 3, goal in the far corner.
fn winding_layout() -> LavaLayout {
    LavaLayout {
        rows: 5,
        cols: 4,
        start: (0, 0),
        goal: (4, 0),
        step_reward: -0.02,
        goal_reward: 1.0,
        gamma: 0.99,
        fixed_lava: LavaRow {
            row: 1,
            gaps: vec![0],
        },
        movable_lava: vec![LavaRow {
            row: 3,
            gaps: vec![3],
        }],
        reward_overrides: Vec::new(),
    }
}

/// Undiscounted return of a shortest safe walk.
fn shortest_episode_return(grid: &Grid, t: usize) -> f64 {
    let len = grid.shortest_goal_path(t).expect("goal reachable");
    len as f64 * grid.step_reward + grid.goal_reward
}

#[test]
fn hidden_parameters_are_drawn_at_their_weights() {
    let world = LavaWorld::new(LavaLayout::canonical()).unwrap();
    let mdp = world.build_hipmdp().unwrap();
    let pi = asor_lab::mdp::TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = rollout(&mdp, &pi, n, 1, &mut rng).unwrap();
    for (t, param) in mdp.thetas().iter().enumerate() {
        let hits = eps.iter().filter(|e| e.theta == t).count() as f64;
        let sd = (n as f64 * param.weight * (1.0 - param.weight)).sqrt();
        assert!(
            (hits - n as f64 * param.weight).abs() <= 3.0 * sd,
            "θ{t}: {hits}"
        );
    }
}

#[test]
fn optimal_rollouts_walk_a_shortest_safe_path() {
    for layout in [LavaLayout::canonical(), winding_layout()] {
        let world = LavaWorld::new(layout.clone()).unwrap();
        let mdp = world.build_hipmdp().unwrap();
        let grid = Grid::new(&layout);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..mdp.num_thetas() {
            let (pi, _) = optimal_policy(&mdp, t, 1e-12).unwrap();
            let ep = rollout_one(&mdp, &pi, t, DEFAULT_HORIZON, &mut rng).unwrap();
            let want = shortest_episode_return(&grid, t);
            assert!(ep.terminated());
            assert!((ep.undiscounted_return() - want).abs() < 1e-12);
            assert!(
                (exact_episodic_return(&mdp, t, &pi, DEFAULT_HORIZON).unwrap() - want).abs()
                    < 1e-12
            );
        }
    }
}

/// Lava on rows 1 and 3 with two-cell gaps; seven steps to the goal.
fn corridor_layout() -> LavaLayout {
    LavaLayout {
        goal: (4, 3),
        fixed_lava: LavaRow {
            row: 1,
            gaps: vec![0, 1],
        },
        movable_lava: vec![LavaRow {
            row: 3,
            gaps: vec![2, 3],
        }],
        ..winding_layout()
    }
}

fn quick(algorithm: Algorithm, seed: u64) -> TrainerConfig {
    TrainerConfig {
        algorithm,
        seed,
        iterations: 150,
        ..TrainerConfig::default()
    }
}

#[test]
fn ppo_solves_a_single_parameter_world() {
    let layout = corridor_layout();
    let mdp = LavaWorld::new(layout.clone())
        .unwrap()
        .build_hipmdp()
        .unwrap();
    let want = shortest_episode_return(&Grid::new(&layout), 0);
    for seed in 0..3 {
        let cfg = TrainerConfig {
            algorithm: Algorithm::Ppo,
            seed,
            ..TrainerConfig::default()
        };
        let out = train(&mdp, &cfg).unwrap();
        let got = exact_episodic_return(&mdp, 0, &out.policy.greedy(), DEFAULT_HORIZON).unwrap();
        assert!(
            (got - want).abs() <= 0.02,
            "seed {seed}: greedy return {got}, optimum {want}"
        );
    }
}

#[test]
fn iteration_statistics_decompose_into_reward_and_bonus() {
    let mdp = LavaWorld::new(LavaLayout::canonical())
        .unwrap()
        .build_hipmdp()
        .unwrap();
    let cfg = TrainerConfig {
        iterations: 20,
        eval_mode: EvalMode::Greedy,
        ..quick(Algorithm::PpoAsor, 3)
    };
    let out = train(&mdp, &cfg).unwrap();
    assert_eq!(out.report.iterations.len(), 20);
    for it in &out.report.iterations {
        let rebuilt = (it.mean_augmented_reward - it.mean_bonus) * it.mean_length;
        assert!((rebuilt - it.mean_return).abs() < 1e-9, "{it:?}");
        assert!(it.mean_bonus <= 0.0);
    }
    let total: u64 = out.visits.counts.iter().sum();
    assert_eq!(total, out.visits.total);
}

#[test]
fn training_is_reproducible_per_seed() {
    let mdp = LavaWorld::new(winding_layout())
        .unwrap()
        .build_hipmdp()
        .unwrap();
    let cfg = TrainerConfig {
        iterations: 10,
        ..quick(Algorithm::PpoAsor, 4)
    };
    let a = train(&mdp, &cfg).unwrap();
    let b = train(&mdp, &cfg).unwrap();
    assert_eq!(a.report.without_timing(), b.report.without_timing());
    assert_eq!(a.policy, b.policy);
}

/// Visit-weighted mean of `ω` over the states selected by `keep`.
fn weighted_omega(out: &asor_lab::train::TrainOutcome, keep: impl Fn(StateId) -> bool) -> f64 {
    let disc = out.discriminator.as_ref().unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (s, &c) in out.visits.counts.iter().enumerate() {
        if c > 0 && keep(StateId(s)) {
            num += c as f64 * disc.omega(StateId(s));
            den += c as f64;
        }
    }
    num / den
}

#[test]
fn discriminator_favours_accessible_optimal_states() {
    let mdp = LavaWorld::new(LavaLayout::canonical())
        .unwrap()
        .build_hipmdp()
        .unwrap();
    let set = accessible_states(&mdp);
    let (pi0, _) = optimal_policy(&mdp, 0, 1e-10).unwrap();
    let d0 = occupancy(&mdp, 0, &pi0).unwrap();
    let out = train(&mdp, &quick(Algorithm::PpoAsor, 0)).unwrap();
    let inside = weighted_omega(&out, |s| set.contains(s) && d0.get(s) > 0.0);
    let outside = weighted_omega(&out, |s| !set.contains(s));
    assert!(inside > outside, "inside {inside}, outside {outside}");
}
