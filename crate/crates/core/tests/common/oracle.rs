/// Deterministic finite MDP for value-iteration oracles.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    pub states: usize,
    pub actions: usize,
    /// `next[s][a]`, `None` when the transition ends the episode.
    pub next: Vec<Vec<Option<usize>>>,
    pub reward: Vec<Vec<f64>>,
}

impl TabularMdp {
    /// Q* by value iteration until the update is below `tol`.
    pub fn q_star(&self, gamma: f64, tol: f64) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.actions]; self.states];
        loop {
            let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            let mut delta = 0.0f64;
            for s in 0..self.states {
                for a in 0..self.actions {
                    let target = self.reward[s][a] + self.next[s][a].map_or(0.0, |n| gamma * v[n]);
                    delta = delta.max((target - q[s][a]).abs());
                    q[s][a] = target;
                }
            }
            if delta < tol {
                return q;
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        for row in &mut m.reward {
            for r in row {
                *r *= c;
            }
        }
        m
    }
}

/// Every action achieving the row maximum (within `tol`).
pub fn argmax_set(row: &[f64], tol: f64) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..row.len()).filter(|&a| row[a] >= best - tol).collect()
}

/// Lowest-index greedy action.
pub fn greedy(row: &[f64]) -> usize {
    argmax_set(row, 0.0)[0]
}

/// Four states in a line; stepping right off the last one reaches the goal.
pub fn chain4() -> TabularMdp {
    let n = 4;
    let mut next = vec![vec![None; 2]; n];
    let mut reward = vec![vec![-0.05; 2]; n];
    for s in 0..n {
        next[s][0] = Some(s.saturating_sub(1));
        if s == n - 1 {
            reward[s][1] += 5.0;
        } else {
            next[s][1] = Some(s + 1);
        }
    }
    TabularMdp {
        states: n,
        actions: 2,
        next,
        reward,
    }
}

/// 5×5 open room, goal in a corner; actions up/right/down/left, walls block.
pub fn grid5() -> TabularMdp {
    let (w, h) = (5usize, 5usize);
    let goal = (4usize, 4usize);
    let idx = |x: usize, y: usize| y * w + x;
    let mut next = vec![vec![None; 4]; w * h];
    let mut reward = vec![vec![-0.05; 4]; w * h];
    for y in 0..h {
        for x in 0..w {
            let s = idx(x, y);
            let moves = [(0i32, -1i32), (1, 0), (0, 1), (-1, 0)];
            for (a, (dx, dy)) in moves.iter().enumerate() {
                let nx = x as i32 + dx;
                let ny = y as i32 + dy;
                let (nx, ny) = if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                    (x, y)
                } else {
                    (nx as usize, ny as usize)
                };
                if (nx, ny) == goal && (x, y) != goal {
                    next[s][a] = None;
                    reward[s][a] += 5.0;
                } else {
                    next[s][a] = Some(idx(nx, ny));
                }
            }
        }
    }
    TabularMdp {
        states: w * h,
        actions: 4,
        next,
        reward,
    }
}

/// One-hot encoding of state `s`.
pub fn one_hot(s: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// Runs the DQN update loop on `mdp` with a one-hot linear Q-function and a
/// uniform behaviour policy, annealing the learning rate geometrically from
/// `lr0` to `lr1`. Returns the learned Q table.
pub fn train_linear_dqn(mdp: &TabularMdp, gamma: f64, steps: u64, lr0: f64, lr1: f64, seed: u64) -> Vec<Vec<f64>> {
    use icl_nav::agent::{DqnAgent, DqnConfig, LinearQ, QFunction, Transition};
    use icl_nav::neuralnet::{seeded_rng, RmsPropConfig};
    use rand::Rng;

    let n = mdp.states;
    let cfg = DqnConfig {
        gamma,
        batch_size: 32,
        replay_capacity: 20_000,
        warmup: 500,
        sync_interval: 25,
        train_every: 1,
        optimizer: RmsPropConfig {
            learning_rate: lr0,
            ..RmsPropConfig::default()
        },
    };
    let mut agent = DqnAgent::new(LinearQ::zeros(n, mdp.actions), cfg, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0xabcd);
    let mut s = rng.random_range(0..n);
    let mut len = 0;
    for t in 0..steps {
        let frac = t as f64 / steps as f64;
        agent.optimizer.config.learning_rate = lr0 * (lr1 / lr0).powf(frac);
        let a = rng.random_range(0..mdp.actions);
        let next = mdp.next[s][a];
        agent
            .record(Transition {
                state: one_hot(s, n),
                action: a,
                reward: mdp.reward[s][a],
                next_state: one_hot(next.unwrap_or(s), n),
                terminal: next.is_none(),
            })
            .unwrap();
        len += 1;
        match next {
            Some(ns) if len < 50 => s = ns,
            _ => {
                s = rng.random_range(0..n);
                len = 0;
            }
        }
    }
    (0..n).map(|s| agent.model.q_values(&one_hot(s, n)).unwrap()).collect()
}
