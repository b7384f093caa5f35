use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::validate::{validate_config, Severity};
use super::{
    create_dir, episodes_to_threshold, line_chart, moving_average, read_metrics_file, train_in, write_file,
    HarnessError, RunConfig, Series, DEFAULT_SMOOTHING,
};

/// Grid of overrides applied to a base run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    /// Base run config, relative to the spec file.
    pub base: PathBuf,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Cells run at once; defaults to the cell count capped at the core count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(rename = "axis")]
    pub axes: Vec<Axis>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> usize {
    1
}

/// One swept config key, written as a dotted path such as `run.maxtime`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub index: usize,
    pub repetition: usize,
    pub seed: u64,
    pub run_id: String,
    /// One rendered value per axis.
    pub values: Vec<String>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub repetition: usize,
    pub run_id: String,
    pub seed: u64,
    pub status: String,
    pub final_success_rate: Option<f64>,
    pub mean_return: Option<f64>,
    pub episodes_to_threshold: Option<u64>,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub dir: PathBuf,
    pub summary: PathBuf,
    pub rows: Vec<SweepRow>,
    pub plots: Vec<PathBuf>,
}

/// Episodes in the final window used for the summary columns.
const FINAL_WINDOW: usize = 100;

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::input(path, e))?;
        let de = toml::Deserializer::parse(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let p = e.path().to_string();
            HarnessError::Config(format!("{}: {p}: {}", path.display(), e.into_inner().message().trim()))
        })?;
        spec.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(spec)
    }

    pub fn base_path(&self) -> PathBuf {
        if self.base.is_absolute() {
            self.base.clone()
        } else {
            self.base_dir.join(&self.base)
        }
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product::<usize>() * self.repetitions
    }

    /// Expands the grid; every derived config must validate.
    pub fn cells(&self) -> Result<Vec<SweepCell>, HarnessError> {
        if self.axes.is_empty() {
            return Err(HarnessError::Config("sweep has no axes".into()));
        }
        if let Some(a) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(HarnessError::Config(format!("axis `{}` has no values", a.path)));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        let base_path = self.base_path();
        let text = std::fs::read_to_string(&base_path).map_err(|e| HarnessError::input(&base_path, e))?;
        let base: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("{}: {e}", base_path.display())))?;
        let base_dir = base_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let base_cfg = RunConfig::from_toml_str(&text, &base_dir)?;
        let base_seed = *base_cfg
            .run
            .seeds
            .first()
            .ok_or_else(|| HarnessError::Config("base config has no seeds".into()))?;

        let mut cells = Vec::with_capacity(self.cell_count());
        let combos: usize = self.axes.iter().map(|a| a.values.len()).product();
        for combo in 0..combos {
            let mut picks = Vec::with_capacity(self.axes.len());
            let mut rest = combo;
            for a in self.axes.iter().rev() {
                picks.push(rest % a.values.len());
                rest /= a.values.len();
            }
            picks.reverse();
            for rep in 0..self.repetitions {
                let index = cells.len();
                let mut table = base.clone();
                let mut values = Vec::new();
                for (a, &k) in self.axes.iter().zip(&picks) {
                    set_path(&mut table, &a.path, a.values[k].clone())?;
                    values.push(render(&a.values[k]));
                }
                let seed = base_seed ^ index as u64;
                let run_id = format!("{}-c{index:03}", self.name);
                set_path(&mut table, "run.name", toml::Value::String(run_id.clone()))?;
                set_path(&mut table, "run.seeds", toml::Value::Array(vec![toml::Value::Integer(seed as i64)]))?;
                let text = toml::to_string(&table).map_err(|e| HarnessError::Internal(e.to_string()))?;
                let config = RunConfig::from_toml_str(&text, &base_dir)
                    .map_err(|e| HarnessError::Config(format!("cell {index}: {e}")))?;
                let errors: Vec<String> = validate_config(&config)
                    .into_iter()
                    .filter(|f| f.severity == Severity::Error)
                    .map(|f| f.message)
                    .collect();
                if !errors.is_empty() {
                    return Err(HarnessError::Config(format!("cell {index}: {}", errors.join("; "))));
                }
                cells.push(SweepCell {
                    index,
                    repetition: rep,
                    seed,
                    run_id,
                    values,
                    config,
                });
            }
        }
        Ok(cells)
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), HarnessError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!("bad axis path `{path}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for p in parents {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("axis path `{path}`: `{p}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every cell into `<output root>/<sweep name>/<run id>` and writes
/// `summary.csv` plus one success-curve SVG per cell under `plots/`.
pub fn run_sweep(spec: &SweepSpec, out_root: Option<&Path>) -> Result<SweepReport, HarnessError> {
    let cells = spec.cells()?;
    let root = match out_root {
        Some(r) => r.to_path_buf(),
        None => cells[0].config.output_root(),
    };
    let dir = root.join(&spec.name);
    let plots_dir = dir.join("plots");
    create_dir(&plots_dir)?;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let jobs = spec.jobs.unwrap_or(cells.len().min(cores)).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Internal(e.to_string()))?;
    let results: Vec<(SweepRow, Option<PathBuf>)> =
        pool.install(|| cells.par_iter().map(|c| run_cell(c, &dir, &plots_dir)).collect());

    let summary = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary).map_err(|e| HarnessError::Internal(e.to_string()))?;
    let mut header = vec!["cell".to_string(), "repetition".into(), "run_id".into(), "seed".into()];
    header.extend(spec.axes.iter().map(|a| a.path.clone()));
    header.extend(
        ["status", "final_success_rate", "mean_return", "episodes_to_threshold", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    let csv_err = |e: csv::Error| HarnessError::Internal(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (cell, (row, _)) in cells.iter().zip(&results) {
        let mut rec = vec![
            row.cell.to_string(),
            row.repetition.to_string(),
            row.run_id.clone(),
            row.seed.to_string(),
        ];
        rec.extend(cell.values.iter().cloned());
        rec.push(row.status.clone());
        rec.push(opt(row.final_success_rate));
        rec.push(opt(row.mean_return));
        rec.push(row.episodes_to_threshold.map(|v| v.to_string()).unwrap_or_default());
        rec.push(row.error.clone());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::output(&summary, e))?;
    let (rows, plots): (Vec<SweepRow>, Vec<Option<PathBuf>>) = results.into_iter().unzip();
    Ok(SweepReport {
        dir,
        summary,
        rows,
        plots: plots.into_iter().flatten().collect(),
    })
}

fn run_cell(cell: &SweepCell, dir: &Path, plots_dir: &Path) -> (SweepRow, Option<PathBuf>) {
    let mut row = SweepRow {
        cell: cell.index,
        repetition: cell.repetition,
        run_id: cell.run_id.clone(),
        seed: cell.seed,
        status: "ok".into(),
        ..SweepRow::default()
    };
    let run_dir = dir.join(&cell.run_id);
    let result = train_in(&cell.config, cell.seed, &run_dir, &cell.run_id).and_then(|out| {
        let recs = read_metrics_file(&out.metrics_path)?;
        let last_stage = recs.last().map(|r| r.stage).unwrap_or(0);
        let fin: Vec<_> = recs.iter().filter(|r| r.stage == last_stage).collect();
        let tail = &fin[fin.len().saturating_sub(FINAL_WINDOW)..];
        let n = tail.len().max(1) as f64;
        row.final_success_rate = Some(tail.iter().filter(|r| r.success).count() as f64 / n);
        row.mean_return = Some(tail.iter().map(|r| r.ret).sum::<f64>() / n);
        let mastery = cell.config.curriculum.mastery.unwrap_or_default();
        row.episodes_to_threshold = episodes_to_threshold(&recs, last_stage, mastery);
        let raw: Vec<f64> = recs.iter().map(|r| r.success as u8 as f64).collect();
        let series = Series {
            label: cell.run_id.clone(),
            x: recs.iter().map(|r| r.episode as f64).collect(),
            y: moving_average(&raw, DEFAULT_SMOOTHING),
        };
        let title = format!("{} [{}]", cell.run_id, cell.values.join(", "));
        let path = plots_dir.join(format!("{}.svg", cell.run_id));
        write_file(&path, line_chart(&title, "episode", "success rate", &[series]))?;
        Ok(path)
    });
    match result {
        Ok(p) => (row, Some(p)),
        Err(e) => {
            row.status = "error".into();
            row.error = e.to_string();
            (row, None)
        }
    }
}
