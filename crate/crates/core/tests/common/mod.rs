//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's dynamics, value or analysis code; layouts are read field by field
//! and simulated from scratch.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use asor_lab::lavaworld::{GridState, LavaLayout, LavaRow, LavaWorld};
use asor_lab::mdp::{StateId, TabularPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Cell = (usize, usize);

/// Straightforward re-implementation of the grid rules.
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub goal: Cell,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub gamma: f64,
    overrides: HashMap<Cell, f64>,
    /// Lava cells per hidden parameter.
    lava: Vec<BTreeSet<Cell>>,
}

fn row_cells(row: &LavaRow, cols: usize) -> impl Iterator<Item = Cell> + '_ {
    (0..cols)
        .filter(|c| !row.gaps.contains(c))
        .map(move |c| (row.row, c))
}

impl Grid {
    pub fn new(l: &LavaLayout) -> Self {
        let lava = l
            .movable_lava
            .iter()
            .map(|m| {
                row_cells(&l.fixed_lava, l.cols)
                    .chain(row_cells(m, l.cols))
                    .collect()
            })
            .collect();
        Self {
            rows: l.rows,
            cols: l.cols,
            start: l.start,
            goal: l.goal,
            step_reward: l.step_reward,
            goal_reward: l.goal_reward,
            gamma: l.gamma,
            overrides: l
                .reward_overrides
                .iter()
                .map(|o| ((o.row, o.col), o.reward))
                .collect(),
            lava,
        }
    }

    pub fn thetas(&self) -> usize {
        self.lava.len()
    }

    pub fn is_lava(&self, t: usize, c: Cell) -> bool {
        self.lava[t].contains(&c)
    }

    pub fn terminal(&self, t: usize, c: Cell) -> bool {
        c == self.goal || self.is_lava(t, c)
    }

    /// Actions: 0 up, 1 down, 2 left, 3 right; walls leave the agent in place.
    pub fn step(&self, (r, c): Cell, a: usize) -> Cell {
        match a {
            0 if r > 0 => (r - 1, c),
            1 if r + 1 < self.rows => (r + 1, c),
            2 if c > 0 => (r, c - 1),
            3 if c + 1 < self.cols => (r, c + 1),
            _ => (r, c),
        }
    }

    pub fn bit(&self, t: usize, (r, c): Cell) -> bool {
        let mut n = Vec::new();
        if r > 0 {
            n.push((r - 1, c));
        }
        if r + 1 < self.rows {
            n.push((r + 1, c));
        }
        if c > 0 {
            n.push((r, c - 1));
        }
        if c + 1 < self.cols {
            n.push((r, c + 1));
        }
        n.into_iter().any(|x| self.is_lava(t, x))
    }

    pub fn reward_entering(&self, c: Cell) -> f64 {
        if let Some(&r) = self.overrides.get(&c) {
            return r;
        }
        self.step_reward
            + if c == self.goal {
                self.goal_reward
            } else {
                0.0
            }
    }

    pub fn grid_state(&self, t: usize, c: Cell) -> GridState {
        GridState {
            row: c.0,
            col: c.1,
            lava_adjacent: self.bit(t, c),
        }
    }

    /// Cells reachable from the start under `t`; terminal cells are entered
    /// but not expanded.
    pub fn reachable_cells(&self, t: usize) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([self.start]);
        let mut queue = VecDeque::from([self.start]);
        while let Some(c) = queue.pop_front() {
            if self.terminal(t, c) {
                continue;
            }
            for a in 0..4 {
                let n = self.step(c, a);
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Globally accessible states as grid states: reachable under every θ.
    pub fn accessible(&self) -> BTreeSet<GridState> {
        let per: Vec<BTreeSet<GridState>> = (0..self.thetas())
            .map(|t| {
                self.reachable_cells(t)
                    .into_iter()
                    .map(|c| self.grid_state(t, c))
                    .collect()
            })
            .collect();
        per[0]
            .iter()
            .filter(|g| per.iter().all(|p| p.contains(g)))
            .copied()
            .collect()
    }

    /// Length of the shortest path from start to goal avoiding lava under `t`.
    pub fn shortest_goal_path(&self, t: usize) -> Option<usize> {
        let mut dist = HashMap::from([(self.start, 0usize)]);
        let mut queue = VecDeque::from([self.start]);
        while let Some(c) = queue.pop_front() {
            if c == self.goal {
                return Some(dist[&c]);
            }
            if self.terminal(t, c) {
                continue;
            }
            for a in 0..4 {
                let n = self.step(c, a);
                if !self.is_lava(t, n) && !dist.contains_key(&n) {
                    dist.insert(n, dist[&c] + 1);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Discounted return of walking a shortest safe path of `len` steps.
    pub fn shortest_path_value(&self, len: usize) -> f64 {
        (0..len - 1)
            .map(|k| self.gamma.powi(k as i32) * self.step_reward)
            .sum::<f64>()
            + self.gamma.powi(len as i32 - 1) * (self.step_reward + self.goal_reward)
    }
}

fn sample(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Monte-Carlo estimate of the normalized discounted visitation and of the
/// mean discounted return from the start, terminal states absorbing.
pub fn mc_discounted(
    grid: &Grid,
    world: &LavaWorld,
    t: usize,
    pi: &TabularPolicy,
    episodes: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    const CHUNKS: usize = 64;
    let ns = world.num_states();
    let id = |c: Cell| world.encode(grid.grid_state(t, c)).expect("encodable").0;
    let gamma = grid.gamma;
    let (occ, ret) = (0..CHUNKS)
        .into_par_iter()
        .map(|k| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
            let n = episodes / CHUNKS + usize::from(k < episodes % CHUNKS);
            let mut occ = vec![0.0; ns];
            let mut ret = 0.0;
            for _ in 0..n {
                let mut c = grid.start;
                let mut disc = 1.0;
                loop {
                    let s = id(c);
                    if grid.terminal(t, c) {
                        occ[s] += disc;
                        break;
                    }
                    if disc < 1e-14 {
                        occ[s] += disc;
                        break;
                    }
                    occ[s] += (1.0 - gamma) * disc;
                    let a = sample(pi.row(StateId(s)), &mut rng);
                    let n = grid.step(c, a);
                    ret += disc * grid.reward_entering(n);
                    disc *= gamma;
                    c = n;
                }
            }
            (occ, ret)
        })
        .reduce(
            || (vec![0.0; ns], 0.0),
            |(mut a, ra), (b, rb)| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                (a, ra + rb)
            },
        );
    let n = episodes as f64;
    (occ.into_iter().map(|x| x / n).collect(), ret / n)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Jensen-Shannon divergence in nats, straight from the definition.
pub fn js(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            acc += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            acc += 0.5 * b * (b / m).ln();
        }
    }
    acc
}

/// Random valid layouts: rows and columns in 4..=7, fixed lava on row 1, one
/// to four movable rows below it. Draws are rejected until the library
/// accepts them (goal reachable, shared start flag).
pub fn random_layouts(n: usize, seed: u64) -> Vec<LavaLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let rows = rng.random_range(4..=7usize);
        let cols = rng.random_range(4..=7usize);
        let gap = |rng: &mut ChaCha8Rng| {
            let k = rng.random_range(1..=2usize);
            let mut g: Vec<usize> = (0..k).map(|_| rng.random_range(0..cols)).collect();
            g.sort_unstable();
            g.dedup();
            g
        };
        let fixed = LavaRow {
            row: 1,
            gaps: gap(&mut rng),
        };
        let mut candidates: Vec<usize> = (2..rows - 1).collect();
        let k = rng.random_range(1..=candidates.len().min(4));
        let mut movable = Vec::new();
        for _ in 0..k {
            let i = rng.random_range(0..candidates.len());
            let row = candidates.remove(i);
            movable.push(LavaRow {
                row,
                gaps: gap(&mut rng),
            });
        }
        movable.sort_by_key(|r| r.row);
        let layout = LavaLayout {
            rows,
            cols,
            start: (0, rng.random_range(0..cols)),
            goal: (rows - 1, rng.random_range(0..cols)),
            step_reward: -0.02,
            goal_reward: 1.0,
            gamma: 0.99,
            fixed_lava: fixed,
            movable_lava: movable,
            reward_overrides: Vec::new(),
        };
        if LavaWorld::new(layout.clone()).is_ok() {
            out.push(layout);
        }
    }
    out
}

/// Softmax policy over i.i.d. uniform logits in `[-scale, scale]`.
pub fn random_policy(ns: usize, na: usize, scale: f64, rng: &mut ChaCha8Rng) -> TabularPolicy {
    let logits: Vec<f64> = (0..ns * na)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    TabularPolicy::softmax(ns, na, &logits)
}

pub fn layouts_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../layouts")
}

pub fn ids(world: &LavaWorld, states: &BTreeSet<GridState>) -> BTreeSet<StateId> {
    states
        .iter()
        .map(|g| world.encode(*g).expect("encodable"))
        .collect()
}
