//! Config files, training and evaluation runs, sweeps, metrics and plots.

mod config;
mod eval;
mod metrics;
mod plot;
mod sweep;
mod train;
mod validate;

pub use config::{
    AgentSection, CheckpointSection, CurriculumMode, CurriculumSection, ExplorationSection, InstructionSection,
    ObservationSection, Resolved, RunConfig, RunSection, OUTPUT_ROOT_ENV,
};
pub use eval::{evaluate, load_checkpoint_model, EvalReport, ObjectEval};
pub use metrics::{read_metrics, read_metrics_file, EpisodeRecord, MetricsWriter, METRICS_SCHEMA};
pub use plot::{line_chart, moving_average, plot_metrics, PlotOutput, Series, DEFAULT_SMOOTHING};
pub use sweep::{run_sweep, Axis, SweepCell, SweepReport, SweepSpec};
pub use train::{episodes_to_threshold, train, train_in, Manifest, TrainOutcome};
pub use validate::{budget_parity, validate_config, validate_map, validate_path, Finding, Severity};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::curriculum::CurriculumError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("no input records: {0}")]
    EmptyInput(String),
    #[error("mixed or malformed metrics schema: {0}")]
    MixedSchema(String),
    #[error("run failed: {0}")]
    Runtime(#[from] CurriculumError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl HarnessError {
    pub(crate) fn input(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Input {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn output(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 1 for problems with what the user supplied, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Input { .. }
            | HarnessError::CheckpointMismatch(_)
            | HarnessError::EmptyInput(_)
            | HarnessError::MixedSchema(_) => 1,
            HarnessError::Output { .. } | HarnessError::Runtime(_) | HarnessError::Internal(_) => 2,
        }
    }
}

pub(crate) fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::output(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::output(path, e))
}
