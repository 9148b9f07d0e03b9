//! Grid family with one fixed and one movable lava row.
//!
//! Rows and columns are 0-based, row 0 at the top. Each hidden parameter
//! places the movable lava row at one of the candidate rows. A state is
//! `(row, col, lava_adjacent)`, where the flag says whether a 4-neighbour of
//! the cell is lava under the active parameter. Only combinations realized by
//! at least one parameter are encoded, in lexicographic order.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Tolerances, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::mdp::{
    ActionId, HiddenParam, HipMdp, RewardTable, StateDistribution, StateId, TabularDynamics,
};

pub const NUM_ACTIONS: usize = 4;
pub const ACTION_NAMES: [&str; NUM_ACTIONS] = ["up", "down", "left", "right"];

/// Row and column offsets of the four move actions, in action order.
const MOVES: [(isize, isize); NUM_ACTIONS] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

const CANONICAL_TOML: &str = include_str!("../../../layouts/canonical.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LavaRow {
    pub row: usize,
    pub gaps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOverride {
    pub row: usize,
    pub col: usize,
    pub reward: f64,
}

/// Declarative description of a lava-world family, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LavaLayout {
    pub rows: usize,
    pub cols: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub step_reward: f64,
    pub goal_reward: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub fixed_lava: LavaRow,
    pub movable_lava: Vec<LavaRow>,
    /// Rewards that replace the usual one for any transition entering the cell.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reward_overrides: Vec<RewardOverride>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl LavaLayout {
    /// The 6x6 layout shipped as `layouts/canonical.toml`.
    pub fn canonical() -> Self {
        Self::from_toml_str(CANONICAL_TOML).expect("bundled canonical layout parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let layout: Self = toml::from_str(text)?;
        layout.check_shape()?;
        Ok(layout)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }

    /// Same layout with a -100 reward for entering cell (3, 4).
    pub fn failure_case(&self) -> Result<Self> {
        if self.rows <= 3 || self.cols <= 4 {
            return Err(Error::InvalidLayout(
                "cell (3, 4) lies outside the grid".into(),
            ));
        }
        let mut out = self.clone();
        out.reward_overrides.retain(|o| (o.row, o.col) != (3, 4));
        out.reward_overrides.push(RewardOverride {
            row: 3,
            col: 4,
            reward: -100.0,
        });
        out.reward_overrides.sort_by_key(|o| (o.row, o.col));
        Ok(out)
    }

    /// Keeps only the movable rows listed, in the given order.
    pub fn with_movable_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.movable_lava = rows
            .iter()
            .map(|&r| {
                self.movable_lava
                    .iter()
                    .find(|m| m.row == r)
                    .cloned()
                    .ok_or_else(|| {
                        Error::InvalidLayout(format!("row {r} is not a movable lava row"))
                    })
            })
            .collect::<Result<_>>()?;
        out.check_shape()?;
        Ok(out)
    }

    fn inside(&self, (r, c): (usize, usize)) -> bool {
        r < self.rows && c < self.cols
    }

    /// Static checks that need no dynamics.
    fn check_shape(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if self.rows == 0 || self.cols == 0 {
            return bad("grid must be non-empty".into());
        }
        if !self.inside(self.start) || !self.inside(self.goal) {
            return bad("start and goal must lie inside the grid".into());
        }
        if self.start == self.goal {
            return bad("start and goal coincide".into());
        }
        if self.movable_lava.is_empty() {
            return bad("at least one movable lava row is required".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("discount {} must lie in (0, 1)", self.gamma));
        }
        if !self.step_reward.is_finite() || !self.goal_reward.is_finite() {
            return bad("rewards must be finite".into());
        }
        let mut seen = BTreeSet::new();
        for lava in std::iter::once(&self.fixed_lava).chain(&self.movable_lava) {
            if lava.row >= self.rows {
                return bad(format!("lava row {} outside the grid", lava.row));
            }
            if let Some(g) = lava.gaps.iter().find(|&&g| g >= self.cols) {
                return bad(format!(
                    "gap column {g} of row {} outside the grid",
                    lava.row
                ));
            }
            if !seen.insert(lava.row) {
                return bad(format!("lava row {} listed twice", lava.row));
            }
        }
        for o in &self.reward_overrides {
            if !self.inside((o.row, o.col)) || !o.reward.is_finite() {
                return bad(format!(
                    "reward override at ({}, {}) is invalid",
                    o.row, o.col
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub row: usize,
    pub col: usize,
    pub lava_adjacent: bool,
}

impl std::fmt::Display for GridState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})",
            self.row,
            self.col,
            u8::from(self.lava_adjacent)
        )
    }
}

/// A validated layout together with its state encoding.
#[derive(Debug, Clone)]
pub struct LavaWorld {
    layout: LavaLayout,
    /// `lava[θ][row * cols + col]`.
    lava: Vec<Vec<bool>>,
    states: Vec<GridState>,
    index: HashMap<GridState, StateId>,
}

impl LavaWorld {
    pub fn new(layout: LavaLayout) -> Result<Self> {
        layout.check_shape()?;
        let (rows, cols) = (layout.rows, layout.cols);
        let lava: Vec<Vec<bool>> = layout
            .movable_lava
            .iter()
            .map(|movable| {
                let mut grid = vec![false; rows * cols];
                for lr in [&layout.fixed_lava, movable] {
                    for c in 0..cols {
                        grid[lr.row * cols + c] = !lr.gaps.contains(&c);
                    }
                }
                grid
            })
            .collect();
        let mut world = Self {
            layout,
            lava,
            states: Vec::new(),
            index: HashMap::new(),
        };
        let mut realized = BTreeSet::new();
        for theta in 0..world.num_thetas() {
            for r in 0..rows {
                for c in 0..cols {
                    realized.insert(world.grid_state(theta, r, c));
                }
            }
        }
        world.states = realized.into_iter().collect();
        world.index = world
            .states
            .iter()
            .enumerate()
            .map(|(i, &gs)| (gs, StateId(i)))
            .collect();
        world.validate()?;
        Ok(world)
    }

    fn validate(&self) -> Result<()> {
        let l = &self.layout;
        for theta in 0..self.num_thetas() {
            for (name, (r, c)) in [("start", l.start), ("goal", l.goal)] {
                if self.is_lava(theta, r, c) {
                    return Err(Error::InvalidLayout(format!(
                        "{name} cell ({r}, {c}) is lava under {}",
                        self.theta_label(theta)
                    )));
                }
            }
        }
        let start_bits: BTreeSet<bool> = (0..self.num_thetas())
            .map(|t| self.lava_adjacent(t, l.start.0, l.start.1))
            .collect();
        if start_bits.len() > 1 {
            return Err(Error::InvalidLayout(
                "the start cell's lava flag differs across hidden parameters, so the initial state is not shared".into(),
            ));
        }
        for theta in 0..self.num_thetas() {
            if !self.goal_reachable(theta) {
                return Err(Error::GoalUnreachable {
                    theta,
                    label: self.theta_label(theta),
                });
            }
        }
        Ok(())
    }

    fn goal_reachable(&self, theta: usize) -> bool {
        let l = &self.layout;
        let mut seen = vec![false; l.rows * l.cols];
        let mut queue = VecDeque::from([l.start]);
        seen[l.start.0 * l.cols + l.start.1] = true;
        while let Some((r, c)) = queue.pop_front() {
            if (r, c) == l.goal {
                return true;
            }
            for a in 0..NUM_ACTIONS {
                let (nr, nc) = self.step_cell(r, c, a);
                if !seen[nr * l.cols + nc] && !self.is_lava(theta, nr, nc) {
                    seen[nr * l.cols + nc] = true;
                    queue.push_back((nr, nc));
                }
            }
        }
        false
    }

    pub fn layout(&self) -> &LavaLayout {
        &self.layout
    }

    pub fn num_thetas(&self) -> usize {
        self.lava.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn theta_label(&self, theta: usize) -> String {
        format!("row{}", self.layout.movable_lava[theta].row)
    }

    /// Row index of the movable lava under `theta`.
    pub fn movable_row(&self, theta: usize) -> usize {
        self.layout.movable_lava[theta].row
    }

    pub fn is_lava(&self, theta: usize, row: usize, col: usize) -> bool {
        self.lava[theta][row * self.layout.cols + col]
    }

    pub fn is_goal(&self, row: usize, col: usize) -> bool {
        (row, col) == self.layout.goal
    }

    /// Whether any 4-neighbour of the cell is lava under `theta`. The cell
    /// itself does not count.
    pub fn lava_adjacent(&self, theta: usize, row: usize, col: usize) -> bool {
        MOVES.iter().any(|&(dr, dc)| {
            let (nr, nc) = (row as isize + dr, col as isize + dc);
            nr >= 0
                && nc >= 0
                && (nr as usize) < self.layout.rows
                && (nc as usize) < self.layout.cols
                && self.is_lava(theta, nr as usize, nc as usize)
        })
    }

    fn grid_state(&self, theta: usize, row: usize, col: usize) -> GridState {
        GridState {
            row,
            col,
            lava_adjacent: self.lava_adjacent(theta, row, col),
        }
    }

    /// Target cell of a move; bumping into a wall leaves the agent in place.
    pub fn step_cell(&self, row: usize, col: usize, action: usize) -> (usize, usize) {
        let (dr, dc) = MOVES[action];
        let (nr, nc) = (row as isize + dr, col as isize + dc);
        if nr < 0 || nc < 0 || nr as usize >= self.layout.rows || nc as usize >= self.layout.cols {
            (row, col)
        } else {
            (nr as usize, nc as usize)
        }
    }

    pub fn encode(&self, gs: GridState) -> Result<StateId> {
        self.index.get(&gs).copied().ok_or(Error::UnknownGridState {
            row: gs.row,
            col: gs.col,
            lava_adjacent: gs.lava_adjacent,
        })
    }

    pub fn decode(&self, id: StateId) -> Result<GridState> {
        self.states
            .get(id.0)
            .copied()
            .ok_or(Error::StateOutOfRange(id.0))
    }

    pub fn states(&self) -> &[GridState] {
        &self.states
    }

    /// State id the agent occupies at `(row, col)` under `theta`.
    pub fn state_at(&self, theta: usize, row: usize, col: usize) -> StateId {
        self.index[&self.grid_state(theta, row, col)]
    }

    pub fn start_state(&self) -> StateId {
        self.state_at(0, self.layout.start.0, self.layout.start.1)
    }

    /// Whether an encoded state absorbs under `theta`.
    pub fn is_terminal(&self, theta: usize, id: StateId) -> bool {
        let gs = self.states[id.0];
        self.is_goal(gs.row, gs.col) || self.is_lava(theta, gs.row, gs.col)
    }

    /// Reward for any transition that lands on `(row, col)`.
    pub fn entry_reward(&self, row: usize, col: usize) -> f64 {
        let l = &self.layout;
        if let Some(o) = l
            .reward_overrides
            .iter()
            .find(|o| (o.row, o.col) == (row, col))
        {
            return o.reward;
        }
        if self.is_goal(row, col) {
            l.step_reward + l.goal_reward
        } else {
            l.step_reward
        }
    }

    /// Successor of `(id, action)` under `theta`.
    pub fn successor(&self, theta: usize, id: StateId, action: ActionId) -> StateId {
        if self.is_terminal(theta, id) {
            return id;
        }
        let gs = self.states[id.0];
        let (r, c) = self.step_cell(gs.row, gs.col, action.0);
        self.state_at(theta, r, c)
    }

    pub fn build_hipmdp(&self) -> Result<HipMdp> {
        let tol = Tolerances::DEFAULT;
        let ns = self.num_states();
        let nt = self.num_thetas();
        let mut dynamics = Vec::with_capacity(nt);
        let mut reward_triples = BTreeSet::new();
        for theta in 0..nt {
            let mut rows = Vec::with_capacity(ns * NUM_ACTIONS);
            let terminal: Vec<bool> = (0..ns)
                .map(|s| self.is_terminal(theta, StateId(s)))
                .collect();
            for s in 0..ns {
                for a in 0..NUM_ACTIONS {
                    let next = self.successor(theta, StateId(s), ActionId(a));
                    if !terminal[s] {
                        reward_triples.insert((s, a, next.0));
                    }
                    rows.push(vec![(next, 1.0)]);
                }
            }
            dynamics.push(TabularDynamics::new(ns, NUM_ACTIONS, rows, terminal, &tol)?);
        }
        let rewards = RewardTable::from_triples(
            ns,
            NUM_ACTIONS,
            reward_triples.into_iter().map(|(s, a, n)| {
                let gs = self.states[n];
                (
                    StateId(s),
                    ActionId(a),
                    StateId(n),
                    self.entry_reward(gs.row, gs.col),
                )
            }),
            0.0,
        )?;
        let thetas = (0..nt)
            .map(|i| HiddenParam {
                index: i,
                weight: 1.0 / nt as f64,
                label: self.theta_label(i),
            })
            .collect();
        let rho0 = StateDistribution::point(ns, self.start_state());
        HipMdp::new(thetas, dynamics, rewards, self.layout.gamma, rho0, &tol)?
            .with_state_labels(self.states.iter().map(ToString::to_string).collect())?
            .with_state_features(
                self.states
                    .iter()
                    .map(|gs| {
                        vec![
                            gs.row as f64,
                            gs.col as f64,
                            f64::from(u8::from(gs.lava_adjacent)),
                        ]
                    })
                    .collect(),
            )
    }
}

pub fn build_hipmdp(layout: &LavaLayout) -> Result<HipMdp> {
    LavaWorld::new(layout.clone())?.build_hipmdp()
}

pub fn encode_state(layout: &LavaLayout, gs: GridState) -> Result<StateId> {
    LavaWorld::new(layout.clone())?.encode(gs)
}

pub fn decode_state(layout: &LavaLayout, id: StateId) -> Result<GridState> {
    LavaWorld::new(layout.clone())?.decode(id)
}

pub fn failure_case_layout(layout: &LavaLayout) -> Result<LavaLayout> {
    layout.failure_case()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::value_iteration;

    fn world() -> LavaWorld {
        LavaWorld::new(LavaLayout::canonical()).unwrap()
    }

    #[test]
    fn canonical_has_four_uniform_thetas() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        assert_eq!(mdp.num_thetas(), 4);
        assert!(mdp.thetas().iter().all(|t| t.weight == 0.25));
        let rows: Vec<usize> = (0..4).map(|t| world().movable_row(t)).collect();
        assert_eq!(rows, vec![2, 3, 4, 5]);
    }

    #[test]
    fn rewards_are_step_plus_goal_bonus() {
        let w = world();
        let mdp = w.build_hipmdp().unwrap();
        for t in 0..mdp.num_thetas() {
            let d = mdp.dynamics(t).unwrap();
            for (s, a, n, _) in d.transitions() {
                if d.is_terminal(s) {
                    continue;
                }
                let gs = w.decode(n).unwrap();
                let expected = if w.is_goal(gs.row, gs.col) {
                    0.98
                } else {
                    -0.02
                };
                assert!((mdp.reward(t, s, a, n) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn encoding_round_trips() {
        let w = world();
        for k in 0..w.num_states() {
            assert_eq!(w.encode(w.decode(StateId(k)).unwrap()).unwrap(), StateId(k));
        }
        assert!(w.decode(StateId(w.num_states())).is_err());
    }

    #[test]
    fn adjacency_splits_cells() {
        let w = world();
        let split = w
            .states()
            .windows(2)
            .any(|p| (p[0].row, p[0].col) == (p[1].row, p[1].col));
        assert!(split);
    }

    #[test]
    fn deterministic_and_shifting() {
        let w = world();
        let mdp = w.build_hipmdp().unwrap();
        for t in 0..mdp.num_thetas() {
            assert!(mdp.dynamics(t).unwrap().is_deterministic());
        }
        let shift = (0..mdp.num_states()).any(|s| {
            (0..NUM_ACTIONS).any(|a| {
                let first = w.successor(0, StateId(s), ActionId(a));
                (1..mdp.num_thetas()).any(|t| w.successor(t, StateId(s), ActionId(a)) != first)
            })
        });
        assert!(shift);
    }

    #[test]
    fn solvable_under_every_theta() {
        let w = world();
        let mdp = w.build_hipmdp().unwrap();
        for t in 0..mdp.num_thetas() {
            let v = value_iteration(&mdp, t, 1e-10).unwrap();
            assert!(v.value(w.start_state()) > 0.0);
        }
    }

    #[test]
    fn failure_case_is_idempotent_with_large_penalty() {
        let base = LavaLayout::canonical();
        let once = base.failure_case().unwrap();
        assert_eq!(once.failure_case().unwrap(), once);
        let mdp = build_hipmdp(&once).unwrap();
        assert_eq!(mdp.rewards().r_max(), 100.0);
        let w = LavaWorld::new(once).unwrap();
        assert_eq!(w.entry_reward(3, 4), -100.0);
        assert_eq!(w.entry_reward(3, 3), -0.02);
    }

    #[test]
    fn rejects_blocked_goal() {
        let mut layout = LavaLayout::canonical();
        layout.movable_lava[0].gaps.clear();
        match LavaWorld::new(layout) {
            Err(Error::GoalUnreachable { label, .. }) => assert_eq!(label, "row2"),
            other => panic!("expected GoalUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn rejects_lava_on_goal() {
        let mut layout = LavaLayout::canonical();
        layout.movable_lava[3].gaps = vec![0];
        assert!(matches!(
            LavaWorld::new(layout),
            Err(Error::InvalidLayout(_))
        ));
    }

    #[test]
    fn toml_round_trip() {
        let layout = LavaLayout::canonical().failure_case().unwrap();
        let back = LavaLayout::from_toml_str(&layout.to_toml_string()).unwrap();
        assert_eq!(back, layout);
    }
}
