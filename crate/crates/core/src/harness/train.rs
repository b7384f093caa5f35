use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, CurriculumMode};
use super::{create_dir, write_file, EpisodeRecord, HarnessError, MetricsWriter, RunConfig, METRICS_SCHEMA};
use crate::agent::{write_agent_checkpoint, AgentCheckpoint, AgentHeader, DqnAgent, MdqnModel};
use crate::curriculum::{run_curriculum, CurriculumReport, CurriculumState, EpisodeOutcome, Mastery};
use crate::neuralnet::seeded_rng;

/// Summary written to `manifest.json` once a run finishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
    pub mode: CurriculumMode,
    pub final_stage: usize,
    pub episodes: u64,
    pub env_steps: u64,
    pub train_steps: u64,
    pub advanced_at: Vec<u64>,
    /// Success rate over the last 100 episodes of the last stage.
    pub final_success_rate: f64,
    pub final_checkpoint: String,
    pub final_checkpoint_sha256: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub manifest: Manifest,
    pub report: CurriculumReport,
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Trains `cfg` with `seed` into its default run directory.
pub fn train(cfg: &RunConfig, seed: u64) -> Result<TrainOutcome, HarnessError> {
    train_in(cfg, seed, &cfg.run_dir(seed), &cfg.run_id(seed))
}

/// Trains into `run_dir`, writing `metrics.jsonl`, `checkpoints/`, `final.ckpt`,
/// `config.toml` and `manifest.json`.
pub fn train_in(cfg: &RunConfig, seed: u64, run_dir: &Path, run_id: &str) -> Result<TrainOutcome, HarnessError> {
    let res = cfg.resolve()?;
    create_dir(run_dir)?;
    let ckpt_dir = run_dir.join("checkpoints");
    if cfg.checkpoint.every > 0 {
        create_dir(&ckpt_dir)?;
    }
    write_file(&run_dir.join("config.toml"), cfg.to_toml_string())?;

    let mut seeds = seeded_rng(seed);
    let (model_seed, agent_seed, run_seed): (u64, u64, u64) = (seeds.random(), seeds.random(), seeds.random());
    let first = &res.schedule[0];
    let model = MdqnModel::new(
        &cfg.model,
        res.env.observation_dim(),
        res.embedding.clone(),
        first.enabled_actions.len(),
        model_seed,
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut agent =
        DqnAgent::new(model, cfg.agent.dqn_config(), agent_seed).map_err(|e| HarnessError::Config(e.to_string()))?;

    let metrics_path = run_dir.join("metrics.jsonl");
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let started = Instant::now();
    let every = cfg.checkpoint.every;
    let mut sink = |o: &EpisodeOutcome, st: &CurriculumState, a: &DqnAgent<MdqnModel>| -> Result<(), String> {
        let rec = EpisodeRecord {
            schema: METRICS_SCHEMA,
            run_id: run_id.to_string(),
            stage: o.stage,
            episode: o.episode,
            episode_in_stage: o.episode_in_stage,
            object: o.object,
            success: o.success,
            steps: o.steps,
            ret: o.ret,
            epsilon: o.epsilon,
            loss: o.mean_loss,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        writer.append(&rec).map_err(|e| e.to_string())?;
        if every > 0 && (o.episode + 1) % every == 0 {
            let path = ckpt_dir.join(format!("ep{:06}.ckpt", o.episode + 1));
            let bytes = checkpoint_bytes(a, o.stage, st.episodes_in_stage);
            std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(())
    };
    let report = run_curriculum(
        &res.env,
        &mut agent,
        &res.vocab,
        &res.schedule,
        &res.settings,
        run_seed,
        &mut sink,
    )?;

    let last = report.stages.last().expect("a finished run has a stage");
    let bytes = checkpoint_bytes(&agent, last.stage, last.episodes.len() as u64);
    let checkpoint_path = run_dir.join("final.ckpt");
    write_file(&checkpoint_path, &bytes)?;
    let manifest = Manifest {
        run_id: run_id.to_string(),
        seed,
        config_sha256: cfg.hash(),
        version: version_string(),
        mode: cfg.curriculum.mode,
        final_stage: cfg.curriculum.final_stage,
        episodes: report.stages.iter().map(|s| s.episodes.len() as u64).sum(),
        env_steps: agent.env_steps(),
        train_steps: agent.train_steps(),
        advanced_at: report.advanced_at.clone(),
        final_success_rate: last.final_success_rate(100),
        final_checkpoint: "final.ckpt".into(),
        final_checkpoint_sha256: hex(&Sha256::digest(&bytes)),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Internal(e.to_string()))?;
    write_file(&run_dir.join("manifest.json"), json)?;
    Ok(TrainOutcome {
        run_dir: run_dir.to_path_buf(),
        metrics_path,
        checkpoint_path,
        manifest,
        report,
    })
}

fn checkpoint_bytes(agent: &DqnAgent<MdqnModel>, stage: usize, epsilon_episode: u64) -> Vec<u8> {
    write_agent_checkpoint(&AgentCheckpoint {
        header: AgentHeader {
            stage: stage as u32,
            action_count: agent.action_count() as u32,
            epsilon_episode,
            train_steps: agent.train_steps(),
        },
        tensors: agent.model.named_tensors(),
    })
}

/// Episodes of `stage` until the trailing success rate first reaches the
/// mastery threshold (counted within the stage, 1-based), if it ever does.
pub fn episodes_to_threshold(records: &[EpisodeRecord], stage: usize, mastery: Mastery) -> Option<u64> {
    let xs: Vec<bool> = records.iter().filter(|r| r.stage == stage).map(|r| r.success).collect();
    let w = mastery.window;
    if w == 0 || xs.len() < w {
        return None;
    }
    let mut wins = xs[..w].iter().filter(|&&s| s).count();
    let need = mastery.threshold * w as f64;
    if wins as f64 >= need {
        return Some(w as u64);
    }
    for i in w..xs.len() {
        wins += xs[i] as usize;
        wins -= xs[i - w] as usize;
        if wins as f64 >= need {
            return Some(i as u64 + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::ObjectKind;

    fn recs(successes: &[bool]) -> Vec<EpisodeRecord> {
        successes
            .iter()
            .enumerate()
            .map(|(i, &s)| EpisodeRecord {
                schema: METRICS_SCHEMA,
                run_id: "r".into(),
                stage: 2,
                episode: i as u64,
                episode_in_stage: i as u64,
                object: ObjectKind::Bowl,
                success: s,
                steps: 1,
                ret: 0.0,
                epsilon: 0.0,
                loss: None,
                wall_time_s: 0.0,
            })
            .collect()
    }

    #[test]
    fn threshold_crossing() {
        let m = Mastery {
            window: 4,
            threshold: 0.75,
        };
        let xs = recs(&[false, false, true, true, true, false, true]);
        // windows ending at 4, 5, 6, 7 have 2, 3, 2, 3 wins
        assert_eq!(episodes_to_threshold(&xs, 2, m), Some(5));
        assert_eq!(episodes_to_threshold(&xs, 1, m), None);
        assert_eq!(episodes_to_threshold(&recs(&[true; 3]), 2, m), None);
        assert_eq!(episodes_to_threshold(&recs(&[true; 4]), 2, m), Some(4));
    }
}
