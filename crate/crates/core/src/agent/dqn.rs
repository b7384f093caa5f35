use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, QFunction, ReplayBuffer, Transition};
use crate::neuralnet::{seeded_rng, NetError, RmsPropConfig, RmsPropState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_capacity")]
    pub replay_capacity: usize,
    /// Transitions stored before the first update.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Train steps between target-network copies.
    #[serde(default = "default_sync")]
    pub sync_interval: u64,
    /// Environment steps per train step.
    #[serde(default = "default_train_every")]
    pub train_every: u64,
    #[serde(default)]
    pub optimizer: RmsPropConfig,
}

fn default_gamma() -> f64 {
    0.99
}
fn default_batch() -> usize {
    32
}
fn default_capacity() -> usize {
    10_000
}
fn default_warmup() -> usize {
    1_000
}
fn default_sync() -> u64 {
    500
}
fn default_train_every() -> u64 {
    1
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: default_gamma(),
            batch_size: default_batch(),
            replay_capacity: default_capacity(),
            warmup: default_warmup(),
            sync_interval: default_sync(),
            train_every: default_train_every(),
            optimizer: RmsPropConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity");
        }
        if self.sync_interval == 0 || self.train_every == 0 {
            return bad("sync_interval and train_every must be positive");
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy over the model's actions.
pub fn select_action<Q: QFunction, R: Rng + ?Sized>(
    model: &Q,
    input: &Q::Input,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, AgentError> {
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..model.action_count()));
    }
    Ok(argmax(&model.q_values(input)?))
}

/// `r` for terminal transitions, `r + γ max_a Q_target(s', a)` otherwise.
pub fn td_targets<Q: QFunction>(
    batch: &[&Transition<Q::Input>],
    target: &Q,
    gamma: f64,
) -> Result<Vec<f64>, AgentError> {
    let live: Vec<&Q::Input> = batch.iter().filter(|t| !t.terminal).map(|t| &t.next_state).collect();
    let q_next = if live.is_empty() {
        Tensor::zeros(&[0, target.action_count()])
    } else {
        target.q_values_batch(&live)?
    };
    let mut row = 0;
    Ok(batch
        .iter()
        .map(|t| {
            if t.terminal {
                t.reward
            } else {
                let best = q_next.row(row).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row += 1;
                t.reward + gamma * best
            }
        })
        .collect())
}

/// One minibatch update: squared TD error on the taken actions, one
/// backward pass, one optimizer step. Returns the mean loss.
pub fn train_step<Q: QFunction, R: Rng + ?Sized>(
    model: &mut Q,
    target: &Q,
    buffer: &ReplayBuffer<Transition<Q::Input>>,
    optimizer: &mut RmsPropState,
    batch_size: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<f64, AgentError> {
    let batch = buffer.sample(batch_size, rng)?;
    let y = td_targets(&batch, target, gamma)?;
    let inputs: Vec<&Q::Input> = batch.iter().map(|t| &t.state).collect();
    model.zero_grads();
    let q = model.forward_train(&inputs)?;
    let n = batch.len() as f64;
    let mut dq = Tensor::zeros(q.shape());
    let mut loss = 0.0;
    for (i, (t, yi)) in batch.iter().zip(&y).enumerate() {
        let err = q.row(i)[t.action] - yi;
        loss += err * err;
        dq.row_mut(i)[t.action] = 2.0 * err / n;
    }
    loss /= n;
    model.backward(&dq)?;
    optimizer.step(model)?;
    if !loss.is_finite() {
        return Err(NetError::NonFinite(format!("loss {loss}")).into());
    }
    model.all_finite().map_err(NetError::NonFinite)?;
    Ok(loss)
}

/// Makes `target` an exact copy of `model`.
pub fn sync_target<Q: QFunction>(model: &Q, target: &mut Q) {
    *target = model.clone();
}

/// Online network, target network, replay and optimizer bundled with the
/// update cadence.
#[derive(Clone, Debug)]
pub struct DqnAgent<Q: QFunction> {
    pub model: Q,
    pub target: Q,
    pub buffer: ReplayBuffer<Transition<Q::Input>>,
    pub optimizer: RmsPropState,
    pub config: DqnConfig,
    rng: ChaCha8Rng,
    env_steps: u64,
    train_steps: u64,
}

impl<Q: QFunction> DqnAgent<Q> {
    pub fn new(model: Q, config: DqnConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(DqnAgent {
            target: model.clone(),
            model,
            buffer: ReplayBuffer::new(config.replay_capacity),
            optimizer: RmsPropState::new(config.optimizer.clone()),
            config,
            rng: seeded_rng(seed),
            env_steps: 0,
            train_steps: 0,
        })
    }

    pub fn action_count(&self) -> usize {
        self.model.action_count()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn set_counters(&mut self, env_steps: u64, train_steps: u64) {
        self.env_steps = env_steps;
        self.train_steps = train_steps;
    }

    pub fn act(&mut self, input: &Q::Input, epsilon: f64) -> Result<usize, AgentError> {
        select_action(&self.model, input, epsilon, &mut self.rng)
    }

    pub fn greedy(&self, input: &Q::Input) -> Result<usize, AgentError> {
        Ok(argmax(&self.model.q_values(input)?))
    }

    /// Stores a transition and runs an update when the cadence says so.
    /// Returns the loss of that update, if any.
    pub fn record(&mut self, t: Transition<Q::Input>) -> Result<Option<f64>, AgentError> {
        if t.action >= self.action_count() || !t.reward.is_finite() {
            return Err(AgentError::Config(format!(
                "invalid transition: action {} of {}, reward {}",
                t.action,
                self.action_count(),
                t.reward
            )));
        }
        self.buffer.push(t);
        self.env_steps += 1;
        let ready = self.buffer.len() >= self.config.warmup.max(self.config.batch_size);
        if !ready || self.env_steps % self.config.train_every != 0 {
            return Ok(None);
        }
        let loss = train_step(
            &mut self.model,
            &self.target,
            &self.buffer,
            &mut self.optimizer,
            self.config.batch_size,
            self.config.gamma,
            &mut self.rng,
        )?;
        self.train_steps += 1;
        if self.train_steps % self.config.sync_interval == 0 {
            sync_target(&self.model, &mut self.target);
        }
        Ok(Some(loss))
    }

    /// Widens the head of both networks (same new rows) and the optimizer slots.
    pub fn grow_head(&mut self, new_action_count: usize) -> Result<(), AgentError> {
        let mut twin = self.rng.clone();
        self.model.grow_head(new_action_count, &mut self.rng)?;
        self.target.grow_head(new_action_count, &mut twin)?;
        let names = self.model.head_param_names();
        let optimizer = &mut self.optimizer;
        self.model.visit_params("", &mut |name, p| {
            if names.iter().any(|n| n == name) {
                optimizer.grow_param(name, p.value.shape());
            }
        });
        Ok(())
    }
}
