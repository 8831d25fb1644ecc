//! Two-dimensional Grid-World used as the policy-evaluation benchmark.
//!
//! Cells are indexed `s = y * width + x`. The agent moves up/down/left/right;
//! bumping into the border leaves it in place. The policy favours the
//! directions that strictly decrease the Manhattan distance to the goal.
//! The goal is not absorbing: leaving it teleports the agent to a uniformly
//! random cell, which keeps the chain irreducible and aperiodic.
//!
//! Rewards are tied to occupancy: every visit to the goal or a trap earns that
//! cell's reward once, on the transition out of it.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::markov::stream_rng;
use crate::policy_eval::{ChainStream, FiniteMdp, InducedChain, Outcome, Policy};
use crate::vi_core::check_dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    fn manhattan(&self, other: &Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Traps {
    /// `count` traps drawn without replacement from the non-goal cells.
    Random { count: usize },
    Fixed(Vec<Cell>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub goal: Cell,
    pub traps: Traps,
    pub reward_goal: f64,
    pub reward_trap: f64,
    pub p_toward: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            goal: Cell::new(19, 19),
            traps: Traps::Random { count: 30 },
            reward_goal: 1.0,
            reward_trap: -0.2,
            p_toward: 0.95,
            beta: 0.9,
            seed: 0,
        }
    }
}

/// A built scenario: the MDP, the goal-seeking policy and the trap cells.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub spec: GridSpec,
    pub mdp: FiniteMdp,
    pub policy: Policy,
    pub traps: Vec<Cell>,
}

impl GridSpec {
    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell(&self, s: usize) -> Cell {
        Cell::new(s % self.width, s / self.width)
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Destination of `action` from `c`, staying in place at the border.
    pub fn step(&self, c: Cell, action: Action) -> Cell {
        let moved = match action {
            Action::Up => c.y.checked_sub(1).map(|y| Cell::new(c.x, y)),
            Action::Down => Some(Cell::new(c.x, c.y + 1)),
            Action::Left => c.x.checked_sub(1).map(|x| Cell::new(x, c.y)),
            Action::Right => Some(Cell::new(c.x + 1, c.y)),
        };
        moved.filter(|m| self.in_bounds(*m)).unwrap_or(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: "grid must have at least one cell".into(),
            });
        }
        if !self.in_bounds(self.goal) {
            return Err(Error::InvalidParameter {
                name: "goal",
                reason: format!("{:?} is outside the {}×{} grid", self.goal, self.width, self.height),
            });
        }
        if !(self.p_toward > 0.0 && self.p_toward <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_toward",
                reason: format!("must lie in (0, 1], got {}", self.p_toward),
            });
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must lie in (0, 1), got {}", self.beta),
            });
        }
        if !self.reward_goal.is_finite() || !self.reward_trap.is_finite() {
            return Err(Error::NonFinite("grid rewards"));
        }
        match &self.traps {
            Traps::Random { count } => {
                if *count >= self.n_states() {
                    return Err(Error::InvalidParameter {
                        name: "traps",
                        reason: format!("{count} traps do not fit beside the goal"),
                    });
                }
            }
            Traps::Fixed(cells) => {
                for c in cells {
                    if !self.in_bounds(*c) {
                        return Err(Error::InvalidParameter {
                            name: "traps",
                            reason: format!("{c:?} is out of bounds"),
                        });
                    }
                    if *c == self.goal {
                        return Err(Error::InvalidParameter {
                            name: "traps",
                            reason: "the goal cannot be a trap".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn place_traps(&self) -> Vec<Cell> {
        match &self.traps {
            Traps::Fixed(cells) => {
                let set: BTreeSet<Cell> = cells.iter().copied().collect();
                set.into_iter().collect()
            }
            Traps::Random { count } => {
                let goal = self.index(self.goal);
                let mut rng = stream_rng(self.seed, u64::MAX);
                let mut picked: Vec<Cell> = sample_indices(&mut rng, self.n_states() - 1, *count)
                    .into_iter()
                    .map(|i| self.cell(if i >= goal { i + 1 } else { i }))
                    .collect();
                picked.sort();
                picked
            }
        }
    }

    /// Action probabilities at `c`: `p_toward` spread over the improving
    /// directions, the rest uniformly over all four.
    pub fn action_probs(&self, c: Cell) -> [f64; 4] {
        let d0 = c.manhattan(&self.goal);
        let improving: Vec<bool> = Action::ALL
            .iter()
            .map(|&a| self.step(c, a).manhattan(&self.goal) < d0)
            .collect();
        let n_imp = improving.iter().filter(|b| **b).count();
        let mut probs = [0.0; 4];
        for (p, imp) in probs.iter_mut().zip(&improving) {
            *p = if n_imp == 0 {
                0.25
            } else {
                let base = (1.0 - self.p_toward) / 4.0;
                if *imp {
                    base + self.p_toward / n_imp as f64
                } else {
                    base
                }
            };
        }
        probs
    }
}

/// Build the scenario MDP and its goal-seeking policy.
pub fn build(spec: &GridSpec) -> Result<GridWorld> {
    spec.validate()?;
    let n = spec.n_states();
    let traps = spec.place_traps();
    let mut reward = vec![0.0; n];
    for c in &traps {
        reward[spec.index(*c)] = spec.reward_trap;
    }
    let goal = spec.index(spec.goal);
    reward[goal] = spec.reward_goal;

    let mut outcomes = Vec::with_capacity(4 * n);
    let mut nu = Vec::with_capacity(4 * n);
    for s in 0..n {
        let c = spec.cell(s);
        for action in Action::ALL {
            if s == goal {
                let p = 1.0 / n as f64;
                outcomes.push((0..n).map(|j| Outcome { next: j, prob: p, reward: reward[s] }).collect());
            } else {
                let next = spec.index(spec.step(c, action));
                outcomes.push(vec![Outcome { next, prob: 1.0, reward: reward[s] }]);
            }
        }
        nu.extend_from_slice(&spec.action_probs(c));
    }
    let mdp = FiniteMdp::new(n, 4, spec.beta, outcomes)?;
    let policy = Policy::new(n, 4, nu)?;
    Ok(GridWorld {
        spec: spec.clone(),
        mdp,
        policy,
        traps,
    })
}

/// Lazily sampled `steps` transitions from `start`.
pub fn sample_trajectory(
    chain: &InducedChain,
    start: usize,
    steps: usize,
    seed: u64,
) -> Result<core::iter::Take<ChainStream<'_>>> {
    if start >= chain.n_states() {
        return Err(Error::IndexOutOfRange {
            what: "start state",
            index: start,
            size: chain.n_states(),
        });
    }
    Ok(chain.stream(start, stream_rng(seed, 0)).take(steps))
}

/// `n × d` features with orthonormal columns from a Gaussian draw.
pub fn random_projection(n: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || d > n {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: format!("need 1 <= d <= n = {n}, got {d}"),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let g = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    check_dims(d, q.ncols())?;
    Ok(q)
}
