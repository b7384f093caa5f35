use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gridworld::ObjectKind;

pub const METRICS_SCHEMA: u32 = 1;

/// One line of a run's `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub schema: u32,
    pub run_id: String,
    pub stage: usize,
    /// Global episode index, 0-based.
    pub episode: u64,
    pub episode_in_stage: u64,
    pub object: ObjectKind,
    pub success: bool,
    pub steps: u32,
    #[serde(rename = "return")]
    pub ret: f64,
    pub epsilon: f64,
    pub loss: Option<f64>,
    /// Seconds since the run started; the only nondeterministic field.
    pub wall_time_s: f64,
}

impl EpisodeRecord {
    /// Copy with the wall-clock field zeroed, for determinism comparisons.
    pub fn without_time(&self) -> EpisodeRecord {
        EpisodeRecord {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Append-only JSONL writer; every record is flushed as soon as it is written.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last: Option<(usize, u64)>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let f = File::create(path).map_err(|e| HarnessError::output(path, e))?;
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
            last: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, rec: &EpisodeRecord) -> Result<(), HarnessError> {
        if let Some((stage, episode)) = self.last {
            if rec.episode <= episode || rec.stage < stage {
                return Err(HarnessError::Internal(format!(
                    "metrics out of order: stage {} episode {} after stage {stage} episode {episode}",
                    rec.stage, rec.episode
                )));
            }
        }
        self.last = Some((rec.stage, rec.episode));
        let line = serde_json::to_string(rec).map_err(|e| HarnessError::Internal(e.to_string()))?;
        let io = |e| HarnessError::output(&self.path, e);
        writeln!(self.out, "{line}").map_err(io)?;
        self.out.flush().map_err(|e| HarnessError::output(&self.path, e))
    }
}

/// Parses a JSONL stream; every line must be a record of the current schema.
pub fn read_metrics(text: &str, source: &str) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(line)
            .map_err(|e| HarnessError::MixedSchema(format!("{source}:{}: {e}", i + 1)))?;
        if rec.schema != METRICS_SCHEMA {
            return Err(HarnessError::MixedSchema(format!(
                "{source}:{}: schema {} (expected {METRICS_SCHEMA})",
                i + 1,
                rec.schema
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_metrics_file(path: &Path) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::input(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(f).lines() {
        text.push_str(&line.map_err(|e| HarnessError::input(path, e))?);
        text.push('\n');
    }
    read_metrics(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(episode: u64, stage: usize, success: bool) -> EpisodeRecord {
        EpisodeRecord {
            schema: METRICS_SCHEMA,
            run_id: "r".into(),
            stage,
            episode,
            episode_in_stage: episode,
            object: ObjectKind::Bread,
            success,
            steps: 10,
            ret: if success { 4.5 } else { -5.0 },
            epsilon: 0.5,
            loss: None,
            wall_time_s: 0.25,
        }
    }

    #[test]
    fn roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut w = MetricsWriter::create(&path).unwrap();
        let recs: Vec<_> = (0..5).map(|i| record(i, 1 + (i as usize) / 3, i % 2 == 0)).collect();
        for r in &recs {
            w.append(r).unwrap();
        }
        drop(w);
        assert_eq!(read_metrics_file(&path).unwrap(), recs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("\"return\":"));
    }

    #[test]
    fn order_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = MetricsWriter::create(&dir.path().join("m.jsonl")).unwrap();
        w.append(&record(3, 2, true)).unwrap();
        assert!(w.append(&record(3, 2, true)).is_err());
        assert!(w.append(&record(4, 1, true)).is_err());
    }

    #[test]
    fn foreign_lines_are_mixed_schema() {
        let good = serde_json::to_string(&record(0, 1, true)).unwrap();
        let other = good.replace("\"schema\":1", "\"schema\":2");
        assert!(matches!(
            read_metrics(&format!("{good}\n{other}\n"), "x"),
            Err(HarnessError::MixedSchema(_))
        ));
        assert!(matches!(read_metrics("{\"a\":1}\n", "x"), Err(HarnessError::MixedSchema(_))));
        assert!(read_metrics("", "x").unwrap().is_empty());
    }
}
