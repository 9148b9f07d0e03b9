mod common;

use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use asor_lab::analysis::{accessible_distribution, accessible_states, reachable_states};
use asor_lab::lavaworld::{LavaLayout, LavaWorld};
use asor_lab::mdp::{
    occupancy, optimal_policy, policy_evaluation, value_iteration, value_iteration_from, ActionId,
    HiddenParam, HipMdp, RewardTable, StateDistribution, StateId, TabularDynamics, TabularPolicy,
};
use asor_lab::Tolerances;
use common::{ids, mc_discounted, random_layouts, total_variation, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn world(layout: &LavaLayout) -> (LavaWorld, HipMdp) {
    let w = LavaWorld::new(layout.clone()).unwrap();
    let m = w.build_hipmdp().unwrap();
    (w, m)
}

#[test]
fn accessible_set_matches_grid_search_on_canonical_and_random_layouts() {
    let mut layouts = vec![LavaLayout::canonical()];
    layouts.extend(random_layouts(20, 99));
    for layout in &layouts {
        let (w, mdp) = world(layout);
        let grid = Grid::new(layout);
        assert_eq!(
            accessible_states(&mdp).members,
            ids(&w, &grid.accessible()),
            "{layout:?}"
        );
        for t in 0..mdp.num_thetas() {
            let want: BTreeSet<StateId> = grid
                .reachable_cells(t)
                .into_iter()
                .map(|c| w.encode(grid.grid_state(t, c)).unwrap())
                .collect();
            assert_eq!(reachable_states(&mdp, t).unwrap(), want);
        }
    }
}

#[test]
fn canonical_accessible_set_excludes_rows_behind_the_movable_lava() {
    let (w, mdp) = world(&LavaLayout::canonical());
    let set = accessible_states(&mdp);
    for s in &set.members {
        assert!(w.decode(*s).unwrap().row <= 2, "{:?}", w.decode(*s));
    }
}

#[test]
fn single_parameter_family_accessible_equals_reachable() {
    let layout = LavaLayout::canonical().with_movable_rows(&[4]).unwrap();
    let (_, mdp) = world(&layout);
    assert_eq!(
        accessible_states(&mdp).members,
        reachable_states(&mdp, 0).unwrap()
    );
}

#[test]
fn optimal_start_value_is_the_shortest_safe_path_return() {
    let layout = LavaLayout::canonical();
    let (w, mdp) = world(&layout);
    let grid = Grid::new(&layout);
    for t in 0..mdp.num_thetas() {
        let len = grid.shortest_goal_path(t).unwrap();
        let v = value_iteration(&mdp, t, 1e-12).unwrap();
        assert_abs_diff_eq!(
            v.v[w.start_state().0],
            grid.shortest_path_value(len),
            epsilon = 1e-9
        );
        assert!(v.v[w.start_state().0] > 0.0);
    }
}

#[test]
fn greedy_policy_attains_optimal_values_and_is_a_fixed_point() {
    let (_, mdp) = world(&LavaLayout::canonical());
    let tol = 1e-10;
    for t in 0..mdp.num_thetas() {
        let (pi, vstar) = optimal_policy(&mdp, t, tol).unwrap();
        let vpi = policy_evaluation(&mdp, t, &pi, tol).unwrap();
        for (a, b) in vpi.v.iter().zip(&vstar.v) {
            assert!((a - b).abs() <= 10.0 * tol, "{a} vs {b}");
        }
        let again = value_iteration_from(&mdp, t, tol, &vstar.v).unwrap();
        for (a, b) in again.v.iter().zip(&vstar.v) {
            assert!((a - b).abs() <= tol);
        }
    }
}

/// Random 4-state, 2-action MDP with a positive-probability row everywhere.
fn small_mdp(rng: &mut ChaCha8Rng) -> HipMdp {
    let (ns, na) = (4, 2);
    let mut rows = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            let w: Vec<f64> = (0..ns).map(|_| rng.random::<f64>() + 0.01).collect();
            let total: f64 = w.iter().sum();
            rows.push(
                w.iter()
                    .enumerate()
                    .map(|(n, x)| (StateId(n), x / total))
                    .collect::<Vec<_>>(),
            );
            for n in 0..ns {
                rewards.push((
                    StateId(s),
                    ActionId(a),
                    StateId(n),
                    rng.random_range(-1.0..1.0),
                ));
            }
        }
    }
    let tol = Tolerances::DEFAULT;
    let dynamics = TabularDynamics::new(ns, na, rows, vec![false; ns], &tol).unwrap();
    let rewards = RewardTable::from_triples(ns, na, rewards, 0.0).unwrap();
    HipMdp::new(
        vec![HiddenParam {
            index: 0,
            weight: 1.0,
            label: "only".into(),
        }],
        vec![dynamics],
        rewards,
        0.9,
        StateDistribution::point(ns, StateId(0)),
        &tol,
    )
    .unwrap()
}

/// `V^π` by plain repeated Bellman backups, independent of the library solvers.
fn iterate_policy_value(mdp: &HipMdp, actions: &[usize]) -> Vec<f64> {
    let d = mdp.dynamics(0).unwrap();
    let mut v = vec![0.0; mdp.num_states()];
    for _ in 0..2000 {
        v = (0..mdp.num_states())
            .map(|s| {
                let a = ActionId(actions[s]);
                d.successors(StateId(s), a)
                    .iter()
                    .map(|&(n, p)| p * (mdp.rewards().get(StateId(s), a, n) + mdp.gamma() * v[n.0]))
                    .sum()
            })
            .collect();
    }
    v
}

#[test]
fn value_iteration_matches_enumeration_of_deterministic_policies() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let mdp = small_mdp(&mut rng);
        let mut best = vec![f64::NEG_INFINITY; 4];
        for code in 0..16usize {
            let actions: Vec<usize> = (0..4).map(|s| (code >> s) & 1).collect();
            let v = iterate_policy_value(&mdp, &actions);
            best.iter_mut().zip(&v).for_each(|(b, x)| *b = b.max(*x));
        }
        let vi = value_iteration(&mdp, 0, 1e-12).unwrap();
        for (a, b) in vi.v.iter().zip(&best) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-8);
        }
    }
}

#[test]
fn uniform_policy_value_matches_monte_carlo() {
    let layout = LavaLayout::canonical();
    let (w, mdp) = world(&layout);
    let pi = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    let grid = Grid::new(&layout);
    for t in [0, 3] {
        let v = policy_evaluation(&mdp, t, &pi, 1e-12).unwrap();
        let (_, ret) = mc_discounted(&grid, &w, t, &pi, 1_000_000, 17 + t as u64);
        assert!(
            (v.v[w.start_state().0] - ret).abs() < 0.01,
            "θ{t}: {} vs {ret}",
            v.v[w.start_state().0]
        );
    }
}

#[test]
fn accessible_distribution_matches_restricted_monte_carlo() {
    let layout = LavaLayout::canonical();
    let (w, mdp) = world(&layout);
    let set = accessible_states(&mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (pi_opt, _) = optimal_policy(&mdp, 0, 1e-10).unwrap();
    let noisy = common::random_policy(mdp.num_states(), mdp.num_actions(), 1.0, &mut rng);
    for pi in [pi_opt, noisy] {
        let exact = accessible_distribution(&mdp, 0, &pi).unwrap();
        let (mc, _) = mc_discounted(&Grid::new(&layout), &w, 0, &pi, 1_000_000, 5);
        let mut restricted: Vec<f64> = mc
            .iter()
            .enumerate()
            .map(|(s, x)| if set.contains(StateId(s)) { *x } else { 0.0 })
            .collect();
        let z: f64 = restricted.iter().sum();
        restricted.iter_mut().for_each(|x| *x /= z);
        assert!(total_variation(exact.mass(), &restricted) < 0.01);
    }
}

#[test]
fn occupancy_is_a_distribution_on_random_layouts() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for layout in random_layouts(5, 8) {
        let (_, mdp) = world(&layout);
        let pi = common::random_policy(mdp.num_states(), mdp.num_actions(), 1.5, &mut rng);
        for t in 0..mdp.num_thetas() {
            let d = occupancy(&mdp, t, &pi).unwrap();
            assert!((d.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.mass().iter().all(|&x| x >= -1e-15));
        }
    }
}
