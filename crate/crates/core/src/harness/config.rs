use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agent::{DqnConfig, ModelConfig};
use crate::curriculum::{
    baseline_schedule, curriculum_schedule, Mastery, RewardVariant, RunSettings, StageSpec,
};
use crate::gridworld::{load_map, EnvConfig, Environment, GridMap, ObjectKind, ObservationWindow, ReceptacleKind};
use crate::instruction::{
    bundled_stop_words, bundled_templates, parse_templates, EmbeddingTable, InstructionTemplate, Vocabulary,
    DEFAULT_EMBEDDING_DIM,
};
use crate::neuralnet::RmsPropConfig;

/// Environment variable that replaces `run.output_dir` as the root of all run directories.
pub const OUTPUT_ROOT_ENV: &str = "ICL_NAV_OUTPUT_ROOT";

/// A training run as described by a TOML config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub curriculum: CurriculumSection,
    #[serde(default)]
    pub exploration: ExplorationSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub observation: ObservationSection,
    #[serde(default)]
    pub instruction: InstructionSection,
    #[serde(default)]
    pub checkpoint: CheckpointSection,
    /// Directory relative paths resolve against; the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub map: PathBuf,
    pub objects: Vec<ObjectKind>,
    /// Receptacle pool for tasks; every receptacle kind on the map when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receptacles: Option<Vec<ReceptacleKind>>,
    #[serde(default = "default_maxtime")]
    pub maxtime: u32,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Config of the opposite mode whose total budget must match this one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_with: Option<PathBuf>,
}

fn default_maxtime() -> u32 {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumMode {
    /// Stages `1..=final_stage` in order with weight transfer.
    #[default]
    Icl,
    /// The final stage only, from scratch, for the same total budget.
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSection {
    #[serde(default)]
    pub mode: CurriculumMode,
    #[serde(default = "default_final_stage")]
    pub final_stage: usize,
    /// Episodes per stage; the baseline gets `final_stage` times this in one stage.
    #[serde(default = "default_stage_budget")]
    pub stage_budget: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mastery: Option<Mastery>,
    #[serde(default)]
    pub reward: RewardVariant,
    #[serde(default = "yes")]
    pub reset_epsilon: bool,
}

fn default_final_stage() -> usize {
    4
}
fn default_stage_budget() -> u64 {
    3000
}
fn yes() -> bool {
    true
}

impl Default for CurriculumSection {
    fn default() -> Self {
        CurriculumSection {
            mode: CurriculumMode::Icl,
            final_stage: default_final_stage(),
            stage_budget: default_stage_budget(),
            mastery: None,
            reward: RewardVariant::Neutral,
            reset_epsilon: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSection {
    #[serde(default = "default_eps_start")]
    pub start: f64,
    #[serde(default = "default_eps_floor")]
    pub floor: f64,
    /// Fraction of the stage (or run) budget over which ε falls to its floor.
    #[serde(default = "default_decay_fraction")]
    pub decay_fraction: f64,
}

fn default_eps_start() -> f64 {
    0.9
}
fn default_eps_floor() -> f64 {
    0.05
}
fn default_decay_fraction() -> f64 {
    0.8
}

impl Default for ExplorationSection {
    fn default() -> Self {
        ExplorationSection {
            start: default_eps_start(),
            floor: default_eps_floor(),
            decay_fraction: default_decay_fraction(),
        }
    }
}

/// DQN hyperparameters, flattened for the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub sync_interval: u64,
    pub train_every: u64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let d = DqnConfig::default();
        AgentSection {
            gamma: d.gamma,
            batch_size: d.batch_size,
            replay_capacity: d.replay_capacity,
            warmup: d.warmup,
            sync_interval: d.sync_interval,
            train_every: d.train_every,
            learning_rate: d.optimizer.learning_rate,
            rmsprop_decay: d.optimizer.decay,
            rmsprop_epsilon: d.optimizer.epsilon,
        }
    }
}

impl AgentSection {
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            gamma: self.gamma,
            batch_size: self.batch_size,
            replay_capacity: self.replay_capacity,
            warmup: self.warmup,
            sync_interval: self.sync_interval,
            train_every: self.train_every,
            optimizer: RmsPropConfig {
                learning_rate: self.learning_rate,
                decay: self.rmsprop_decay,
                epsilon: self.rmsprop_epsilon,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationSection {
    pub depth: usize,
    pub width: usize,
}

impl Default for ObservationSection {
    fn default() -> Self {
        let w = ObservationWindow::default();
        ObservationSection {
            depth: w.depth,
            width: w.width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionSection {
    /// Template file; the bundled templates when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// Word-vector text file; deterministic seeded vectors when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
}

fn default_embedding_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

impl Default for InstructionSection {
    fn default() -> Self {
        InstructionSection {
            templates: None,
            embeddings: None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckpointSection {
    /// Write a checkpoint every this many episodes; 0 writes only the final one.
    pub every: u64,
}

/// Everything a run needs, loaded from the files a config points at.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub map: GridMap,
    pub env: Environment,
    pub templates: Vec<InstructionTemplate>,
    pub vocab: Vocabulary,
    pub embedding: EmbeddingTable,
    pub schedule: Vec<StageSpec>,
    pub settings: RunSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::Config(format!("{path}: {}", e.into_inner().message().trim()))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::input(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical re-serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn map_path(&self) -> PathBuf {
        self.resolve_path(&self.run.map)
    }

    /// Root under which `<name>/seed-<seed>` run directories go. Unlike the
    /// input files, a relative `output_dir` is taken from the working directory.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => self.run.output_dir.clone(),
        }
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_root().join(&self.run.name).join(format!("seed-{seed}"))
    }

    pub fn run_id(&self, seed: u64) -> String {
        format!("{}-s{seed}", self.run.name)
    }

    pub fn window(&self) -> ObservationWindow {
        ObservationWindow {
            depth: self.observation.depth,
            width: self.observation.width,
        }
    }

    pub fn schedule(&self) -> Vec<StageSpec> {
        let c = &self.curriculum;
        match c.mode {
            CurriculumMode::Icl => curriculum_schedule(c.final_stage, c.stage_budget, c.mastery),
            CurriculumMode::Baseline => baseline_schedule(c.final_stage, self.total_budget()),
        }
    }

    /// Episodes the run may use in total; identical for both modes by construction.
    pub fn total_budget(&self) -> u64 {
        self.curriculum.stage_budget * self.curriculum.final_stage as u64
    }

    pub fn templates(&self) -> Result<Vec<InstructionTemplate>, HarnessError> {
        match &self.instruction.templates {
            None => Ok(bundled_templates()),
            Some(p) => {
                let p = self.resolve_path(p);
                let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::input(&p, e))?;
                parse_templates(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Loads the map, templates and embeddings and builds the environment and schedule.
    pub fn resolve(&self) -> Result<Resolved, HarnessError> {
        let map_path = self.map_path();
        let text = std::fs::read_to_string(&map_path).map_err(|e| HarnessError::input(&map_path, e))?;
        let map = load_map(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", map_path.display())))?;
        let env = Environment::new(
            map.clone(),
            EnvConfig {
                maxtime: self.run.maxtime,
                window: self.window(),
            },
        )
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        let templates = self.templates()?;
        let vocab = Vocabulary::for_templates(&templates, bundled_stop_words(), self.instruction.embedding_dim);
        let embedding = match &self.instruction.embeddings {
            None => EmbeddingTable::seeded(&vocab),
            Some(p) => {
                let p = self.resolve_path(p);
                let text = std::fs::read_to_string(&p).map_err(|e| HarnessError::input(&p, e))?;
                EmbeddingTable::from_vector_file(&vocab, &text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
            }
        };
        let receptacles = match &self.run.receptacles {
            Some(r) => r.clone(),
            None => ReceptacleKind::ALL
                .into_iter()
                .filter(|&k| map.has_receptacle_kind(k))
                .collect(),
        };
        let settings = RunSettings {
            objects: self.run.objects.clone(),
            receptacles,
            templates: templates.clone(),
            variant: self.curriculum.reward,
            epsilon_start: self.exploration.start,
            epsilon_floor: self.exploration.floor,
            decay_fraction: self.exploration.decay_fraction,
            reset_epsilon_per_stage: self.curriculum.reset_epsilon,
        };
        Ok(Resolved {
            map,
            env,
            templates,
            vocab,
            embedding,
            schedule: self.schedule(),
            settings,
        })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[run]
name = "toy"
map = "maps/open5.map"
objects = ["bread"]
seeds = [7]
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_toml_str(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.run.maxtime, 100);
        assert_eq!(cfg.curriculum.final_stage, 4);
        assert_eq!(cfg.exploration.start, 0.9);
        assert_eq!(cfg.model.trunk, vec![640, 512, 256]);
        assert_eq!(cfg.map_path(), PathBuf::from("/data/maps/open5.map"));
        assert_eq!(cfg.total_budget(), 12_000);
        assert_eq!(cfg.schedule().len(), 4);
    }

    #[test]
    fn unknown_field_names_its_path() {
        let text = format!("{MINIMAL}\n[agent]\ngama = 0.9\n");
        let err = RunConfig::from_toml_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("agent"), "{err}");
        assert!(err.contains("gama"), "{err}");
    }

    #[test]
    fn wrong_type_names_its_path() {
        let text = MINIMAL.replace("seeds = [7]", "seeds = [7]\nmaxtime = \"long\"");
        let err = RunConfig::from_toml_str(&text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("run.maxtime"), "{err}");
    }

    #[test]
    fn baseline_has_same_total_budget() {
        let text = format!("{MINIMAL}\n[curriculum]\nmode = \"baseline\"\nfinal_stage = 2\nstage_budget = 50\n");
        let cfg = RunConfig::from_toml_str(&text, Path::new(".")).unwrap();
        let sched = cfg.schedule();
        assert_eq!(sched.len(), 1);
        assert_eq!(sched[0].index, 2);
        assert_eq!(sched[0].episode_budget, 100);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml_str(MINIMAL, Path::new(".")).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run.maxtime = 101;
        assert_ne!(a.hash(), b.hash());
        let back = RunConfig::from_toml_str(&a.to_toml_string(), Path::new(".")).unwrap();
        assert_eq!(back, a);
    }
}
