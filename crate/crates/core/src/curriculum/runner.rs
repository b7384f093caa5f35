use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    maybe_advance, reward_for, validate_schedule, AdvanceOutcome, CurriculumError, CurriculumState, EpisodeError,
    RewardVariant, StageSpec,
};
use crate::agent::{DqnAgent, EpsilonSchedule, MdqnInput, QFunction, Transition};
use crate::gridworld::{Action, Environment, Event, ObjectKind, ReceptacleKind};
use crate::instruction::{encode_stage, sample_task, InstructionTask, InstructionTemplate, Vocabulary};
use crate::neuralnet::seeded_rng;

/// Everything about a run that is not the network or the schedule.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub objects: Vec<ObjectKind>,
    pub receptacles: Vec<ReceptacleKind>,
    pub templates: Vec<InstructionTemplate>,
    pub variant: RewardVariant,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Fraction of the budget over which ε decays to its floor.
    pub decay_fraction: f64,
    /// Restart ε at each stage; otherwise decay once over the whole run.
    pub reset_epsilon_per_stage: bool,
}

impl RunSettings {
    pub fn epsilon(&self, state: &CurriculumState, schedule: &[StageSpec]) -> f64 {
        let (budget, episode) = if self.reset_epsilon_per_stage {
            (schedule[state.current].episode_budget, state.episodes_in_stage)
        } else {
            (schedule.iter().map(|s| s.episode_budget).sum(), state.total_episodes)
        };
        let decay = (budget as f64 * self.decay_fraction).ceil() as u64;
        let floor = self.epsilon_floor.min(self.epsilon_start);
        EpsilonSchedule {
            start: self.epsilon_start,
            floor,
            decay_episodes: decay,
        }
        .value(episode)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub stage: usize,
    /// Global episode index (0-based).
    pub episode: u64,
    pub episode_in_stage: u64,
    pub object: ObjectKind,
    pub success: bool,
    pub steps: u32,
    #[serde(rename = "return")]
    pub ret: f64,
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub episodes: Vec<EpisodeOutcome>,
}

impl StageReport {
    pub fn success_rate(&self) -> f64 {
        rate(self.episodes.iter().map(|e| e.success))
    }

    /// Success rate over the last `n` episodes.
    pub fn final_success_rate(&self, n: usize) -> f64 {
        let k = self.episodes.len().saturating_sub(n);
        rate(self.episodes[k..].iter().map(|e| e.success))
    }
}

fn rate(xs: impl Iterator<Item = bool>) -> f64 {
    let (mut n, mut w) = (0usize, 0usize);
    for x in xs {
        n += 1;
        w += x as usize;
    }
    if n == 0 {
        0.0
    } else {
        w as f64 / n as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurriculumReport {
    pub stages: Vec<StageReport>,
    pub advanced_at: Vec<u64>,
}

/// How an episode picks its actions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Policy {
    /// ε-greedy with learning from every transition.
    Learn { epsilon: f64 },
    /// ε = 0, nothing stored.
    Greedy,
}

/// Result of a single rollout before curriculum bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub success: bool,
    pub steps: u32,
    pub ret: f64,
    pub mean_loss: Option<f64>,
    pub events: Vec<Event>,
}

/// Plays one episode of `task` truncated to `stage`.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<Q: QFunction<Input = MdqnInput>>(
    env: &Environment,
    agent: &mut DqnAgent<Q>,
    vocab: &Vocabulary,
    task: &InstructionTask,
    stage: &StageSpec,
    variant: RewardVariant,
    policy: Policy,
    env_seed: u64,
) -> Result<Rollout, EpisodeError> {
    let staged = task.truncated(stage.instruction_stage)?;
    let (mut state, obs) = env.reset(&staged, env_seed)?;
    let instruction = Arc::new(encode_stage(&staged, stage.instruction_stage, vocab)?);
    let mut input = MdqnInput {
        observation: Arc::new(obs),
        instruction: Arc::clone(&instruction),
    };
    let reward = |ev: &[Event], success: bool| reward_for(ev, stage, variant, success);
    let mut ret = 0.0;
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);
    let mut events = Vec::new();
    loop {
        let a = match policy {
            Policy::Learn { epsilon } => agent.act(&input, epsilon)?,
            Policy::Greedy => agent.greedy(&input)?,
        };
        let action = *stage
            .enabled_actions
            .get(a)
            .ok_or_else(|| EpisodeError::Action(format!("head chose action {a} outside the stage's action set")))?;
        debug_assert_eq!(Action::from_index(a), Some(action));
        let (next, out) = state.step(action, &reward)?;
        let next_input = MdqnInput {
            observation: Arc::new(out.observation),
            instruction: Arc::clone(&instruction),
        };
        ret += out.reward;
        events.extend(out.events.iter().copied());
        if let Policy::Learn { .. } = policy {
            let t = Transition {
                state: input,
                action: a,
                reward: out.reward,
                next_state: next_input.clone(),
                terminal: out.terminal,
            };
            if let Some(l) = agent.record(t)? {
                loss_sum += l;
                loss_n += 1;
            }
        }
        input = next_input;
        state = next;
        if out.terminal {
            return Ok(Rollout {
                success: out.success,
                steps: state.steps_taken,
                ret,
                mean_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
                events,
            });
        }
    }
}

/// Per-episode callback: metrics sinks, checkpoint writers.
pub type EpisodeSink<'a, Q> = dyn FnMut(&EpisodeOutcome, &CurriculumState, &DqnAgent<Q>) -> Result<(), String> + 'a;

/// Trains on the current stage until it is mastered or its budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn run_stage<Q: QFunction<Input = MdqnInput>, R: Rng>(
    env: &Environment,
    agent: &mut DqnAgent<Q>,
    vocab: &Vocabulary,
    schedule: &[StageSpec],
    state: &mut CurriculumState,
    settings: &RunSettings,
    rng: &mut R,
    sink: &mut EpisodeSink<'_, Q>,
) -> Result<(StageReport, AdvanceOutcome), CurriculumError> {
    let spec = &schedule[state.current];
    let mut report = StageReport {
        stage: spec.index,
        episodes: Vec::new(),
    };
    loop {
        let episode = state.total_episodes;
        let ctx = |source: EpisodeError| CurriculumError::Episode {
            stage: spec.index,
            episode,
            source,
        };
        let epsilon = settings.epsilon(state, schedule);
        let task_seed: u64 = rng.random();
        let env_seed: u64 = rng.random();
        let task = sample_task(&settings.templates, &settings.objects, &settings.receptacles, task_seed)
            .map_err(|e| ctx(e.into()))?;
        let r = run_episode(
            env,
            agent,
            vocab,
            &task,
            spec,
            settings.variant,
            Policy::Learn { epsilon },
            env_seed,
        )
        .map_err(ctx)?;
        let outcome = EpisodeOutcome {
            stage: spec.index,
            episode,
            episode_in_stage: state.episodes_in_stage,
            object: task.target_object,
            success: r.success,
            steps: r.steps,
            ret: r.ret,
            epsilon,
            mean_loss: r.mean_loss,
        };
        state.record(r.success, schedule);
        sink(&outcome, state, agent).map_err(|m| ctx(EpisodeError::Sink(m)))?;
        report.episodes.push(outcome);
        let adv = maybe_advance(state, schedule, settings.reset_epsilon_per_stage);
        if adv.advanced || adv.finished {
            return Ok((report, adv));
        }
    }
}

/// Runs every stage of `schedule` in order, transferring weights between stages.
pub fn run_curriculum<Q: QFunction<Input = MdqnInput>>(
    env: &Environment,
    agent: &mut DqnAgent<Q>,
    vocab: &Vocabulary,
    schedule: &[StageSpec],
    settings: &RunSettings,
    seed: u64,
    sink: &mut EpisodeSink<'_, Q>,
) -> Result<CurriculumReport, CurriculumError> {
    validate_schedule(schedule)?;
    if agent.action_count() != schedule[0].enabled_actions.len() {
        return Err(CurriculumError::Schedule(format!(
            "agent head has {} outputs but stage {} enables {} actions",
            agent.action_count(),
            schedule[0].index,
            schedule[0].enabled_actions.len()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut state = CurriculumState::new();
    let mut report = CurriculumReport::default();
    loop {
        let (stage, adv) = run_stage(env, agent, vocab, schedule, &mut state, settings, &mut rng, sink)?;
        report.stages.push(stage);
        if let Some(n) = adv.transfer.and_then(|t| t.grow_head_to) {
            agent.grow_head(n).map_err(|e| CurriculumError::Episode {
                stage: schedule[state.current].index,
                episode: state.total_episodes,
                source: e.into(),
            })?;
        }
        if adv.finished {
            break;
        }
    }
    report.advanced_at = state.advanced_at;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{DqnConfig, MdqnModel, ModelConfig};
    use crate::curriculum::{curriculum_schedule, RewardVariant};
    use crate::gridworld::{load_map, EnvConfig};
    use crate::instruction::{bundled_stop_words, bundled_templates, EmbeddingTable};

    fn setup(map: &str, maxtime: u32) -> (Environment, DqnAgent<MdqnModel>, Vocabulary, RunSettings) {
        let env = Environment::new(
            load_map(map).unwrap(),
            EnvConfig {
                maxtime,
                ..EnvConfig::default()
            },
        )
        .unwrap();
        let templates = bundled_templates();
        let vocab = Vocabulary::for_templates(&templates, bundled_stop_words(), 8);
        let cfg = ModelConfig {
            visual_dim: 8,
            text_hidden: 4,
            trunk: vec![8],
            value_head: false,
        };
        let model = MdqnModel::new(&cfg, env.observation_dim(), EmbeddingTable::seeded(&vocab), 3, 3).unwrap();
        let dqn = DqnConfig {
            warmup: 16,
            batch_size: 8,
            replay_capacity: 64,
            ..DqnConfig::default()
        };
        let agent = DqnAgent::new(model, dqn, 4).unwrap();
        let settings = RunSettings {
            objects: vec![ObjectKind::Bread],
            receptacles: vec![ReceptacleKind::Fridge],
            templates,
            variant: RewardVariant::Neutral,
            epsilon_start: 0.9,
            epsilon_floor: 0.05,
            decay_fraction: 0.8,
            reset_epsilon_per_stage: true,
        };
        (env, agent, vocab, settings)
    }

    fn run(map: &str, maxtime: u32, episodes: u64) -> (CurriculumReport, u64) {
        let (env, mut agent, vocab, settings) = setup(map, maxtime);
        let sched = curriculum_schedule(1, episodes, None);
        let mut seen = 0u64;
        let report = run_curriculum(&env, &mut agent, &vocab, &sched, &settings, 9, &mut |o, st, _| {
            assert_eq!(o.episode, seen);
            assert_eq!(st.total_episodes, seen + 1);
            seen += 1;
            Ok(())
        })
        .unwrap();
        (report, seen)
    }

    #[test]
    fn goal_next_to_every_spawn_always_succeeds() {
        // every floor cell touches the centre, where the bread lies
        let map = "grid 3 3\nF.F\n...\nF.F\nrecept fridge f 0 0\nspawn bread 1 1\n";
        let (report, seen) = run(map, 200, 30);
        assert_eq!(seen, 30);
        let stage = &report.stages[0];
        assert_eq!(stage.episodes.len(), 30);
        assert_eq!(stage.success_rate(), 1.0);
        for e in &stage.episodes {
            assert!((e.ret - (5.0 - 0.05 * e.steps as f64)).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn unreachable_goal_times_out_every_episode() {
        let map = "grid 3 1\n.F.\nrecept fridge f 1 0\nspawn bread 2 0\n";
        let (report, _) = run(map, 100, 12);
        let stage = &report.stages[0];
        assert_eq!(stage.episodes.len(), 12);
        for e in &stage.episodes {
            assert!(!e.success);
            assert_eq!(e.steps, 100);
            assert!((e.ret - 100.0 * -0.05).abs() < 1e-9);
        }
        assert_eq!(report.advanced_at, Vec::<u64>::new());
    }

    #[test]
    fn head_grows_when_stage_two_starts() {
        let map = "grid 3 3\nF.F\n...\nF.F\nrecept fridge f 0 0\nspawn bread 1 1\n";
        let (env, mut agent, vocab, settings) = setup(map, 30);
        let sched = curriculum_schedule(2, 5, None);
        let report = run_curriculum(&env, &mut agent, &vocab, &sched, &settings, 1, &mut |_, _, _| Ok(())).unwrap();
        assert_eq!(report.advanced_at, vec![5]);
        assert_eq!(report.stages.len(), 2);
        assert_eq!(agent.action_count(), 4);
        assert!(report.stages[1].episodes.iter().all(|e| e.stage == 2));
    }

    #[test]
    fn mismatched_head_is_rejected() {
        let map = "grid 3 3\nF.F\n...\nF.F\nrecept fridge f 0 0\nspawn bread 1 1\n";
        let (env, mut agent, vocab, settings) = setup(map, 30);
        let sched = crate::curriculum::baseline_schedule(2, 5);
        let err = run_curriculum(&env, &mut agent, &vocab, &sched, &settings, 1, &mut |_, _, _| Ok(()));
        assert!(matches!(err, Err(CurriculumError::Schedule(_))));
    }

    #[test]
    fn sink_errors_carry_episode_context() {
        let map = "grid 3 3\nF.F\n...\nF.F\nrecept fridge f 0 0\nspawn bread 1 1\n";
        let (env, mut agent, vocab, settings) = setup(map, 30);
        let sched = curriculum_schedule(1, 10, None);
        let err = run_curriculum(&env, &mut agent, &vocab, &sched, &settings, 1, &mut |o, _, _| {
            if o.episode == 3 {
                Err("disk full".into())
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert_eq!(
            err,
            CurriculumError::Episode {
                stage: 1,
                episode: 3,
                source: EpisodeError::Sink("disk full".into())
            }
        );
    }
}
