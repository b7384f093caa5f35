use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, RunConfig};
use crate::agent::{read_agent_checkpoint, DqnAgent, DqnConfig, MdqnModel};
use crate::curriculum::{run_episode, Policy};
use crate::gridworld::ObjectKind;
use crate::instruction::sample_task;
use crate::neuralnet::seeded_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectEval {
    pub object: ObjectKind,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub stage: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_length: f64,
    pub per_object: Vec<ObjectEval>,
}

/// Reads a checkpoint and checks it against the network `cfg` would build.
pub fn load_checkpoint_model(cfg: &RunConfig, bytes: &[u8]) -> Result<MdqnModel, HarnessError> {
    let mismatch = |m: String| HarnessError::CheckpointMismatch(m);
    let ck = read_agent_checkpoint(bytes).map_err(|e| mismatch(e.to_string()))?;
    let model = MdqnModel::from_named_tensors(&ck.tensors).map_err(|e| mismatch(e.to_string()))?;
    let res = cfg.resolve()?;
    let stage = res.schedule.last().expect("validated schedule is non-empty");
    let want = stage.enabled_actions.len();
    if ck.header.action_count as usize != want || crate::agent::QFunction::action_count(&model) != want {
        return Err(mismatch(format!(
            "checkpoint head has {} actions, config's stage {} needs {want}",
            ck.header.action_count, stage.index
        )));
    }
    if model.config() != cfg.model {
        return Err(mismatch(format!(
            "checkpoint network {:?} differs from config's {:?}",
            model.config(),
            cfg.model
        )));
    }
    if model.observation_dim() != res.env.observation_dim() {
        return Err(mismatch(format!(
            "checkpoint expects observations of length {}, config produces {}",
            model.observation_dim(),
            res.env.observation_dim()
        )));
    }
    if model.embedding().rows() != res.vocab.len() || model.embedding().dim() != res.vocab.embedding_dim() {
        return Err(mismatch(format!(
            "checkpoint embedding is {}x{}, config vocabulary is {}x{}",
            model.embedding().rows(),
            model.embedding().dim(),
            res.vocab.len(),
            res.vocab.embedding_dim()
        )));
    }
    Ok(model)
}

/// `episodes` greedy rollouts of the config's final stage; objects are cycled
/// in pool order so each gets an equal share.
pub fn evaluate(cfg: &RunConfig, checkpoint: &Path, episodes: usize, seed: u64) -> Result<EvalReport, HarnessError> {
    let bytes = std::fs::read(checkpoint).map_err(|e| HarnessError::input(checkpoint, e))?;
    let model = load_checkpoint_model(cfg, &bytes)?;
    let res = cfg.resolve()?;
    let stage = res.schedule.last().expect("validated schedule is non-empty").clone();
    let mut agent = DqnAgent::new(
        model,
        DqnConfig {
            replay_capacity: DqnConfig::default().batch_size,
            ..DqnConfig::default()
        },
        seed,
    )
    .map_err(|e| HarnessError::Internal(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    let objects = &res.settings.objects;
    let mut per_object: Vec<ObjectEval> = Vec::new();
    let (mut wins, mut steps) = (0usize, 0u64);
    for i in 0..episodes {
        let object = objects[i % objects.len()];
        let task_seed: u64 = rng.random();
        let env_seed: u64 = rng.random();
        let task = sample_task(&res.templates, &[object], &res.settings.receptacles, task_seed)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let r = run_episode(
            &res.env,
            &mut agent,
            &res.vocab,
            &task,
            &stage,
            res.settings.variant,
            Policy::Greedy,
            env_seed,
        )
        .map_err(|e| HarnessError::Internal(format!("evaluation episode {i}: {e}")))?;
        wins += r.success as usize;
        steps += r.steps as u64;
        let slot = match per_object.iter().position(|o| o.object == object) {
            Some(k) => k,
            None => {
                per_object.push(ObjectEval {
                    object,
                    episodes: 0,
                    successes: 0,
                    success_rate: 0.0,
                    mean_length: 0.0,
                });
                per_object.len() - 1
            }
        };
        let o = &mut per_object[slot];
        o.mean_length = (o.mean_length * o.episodes as f64 + r.steps as f64) / (o.episodes + 1) as f64;
        o.episodes += 1;
        o.successes += r.success as usize;
        o.success_rate = o.successes as f64 / o.episodes as f64;
    }
    let n = episodes.max(1) as f64;
    Ok(EvalReport {
        stage: stage.index,
        episodes,
        successes: wins,
        success_rate: if episodes == 0 { 0.0 } else { wins as f64 / n },
        mean_length: if episodes == 0 { 0.0 } else { steps as f64 / n },
        per_object,
    })
}
