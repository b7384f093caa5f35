use std::fmt;
use std::path::Path;

use super::config::CurriculumMode;
use super::sweep::SweepSpec;
use super::{HarnessError, RunConfig};
use crate::curriculum::validate_schedule;
use crate::gridworld::{load_map, GridMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl Finding {
    fn error(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Error,
            message: message.into(),
        }
    }

    fn warning(message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn validate_map(text: &str) -> Vec<Finding> {
    match load_map(text) {
        Ok(_) => Vec::new(),
        Err(e) => vec![Finding::error(e.to_string())],
    }
}

/// Every check a run would hit before its first episode, collected rather than
/// stopping at the first.
pub fn validate_config(cfg: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut err = |m: String| out.push(Finding::error(m));
    if cfg.run.name.trim().is_empty() {
        err("run.name must not be empty".into());
    }
    if cfg.run.maxtime < 1 {
        err(format!("run.maxtime: maxtime ≥ 1 required, got {}", cfg.run.maxtime));
    }
    if cfg.run.seeds.is_empty() {
        err("run.seeds: at least one seed is required".into());
    }
    if cfg.run.objects.is_empty() {
        err("run.objects: the object pool is empty".into());
    }
    let c = &cfg.curriculum;
    if !(1..=4).contains(&c.final_stage) {
        err(format!("curriculum.final_stage must be 1 to 4, got {}", c.final_stage));
    } else if let Err(e) = validate_schedule(&cfg.schedule()) {
        err(format!("curriculum: {e}"));
    }
    let x = &cfg.exploration;
    if !(0.0..=1.0).contains(&x.start) || !(0.0..=x.start).contains(&x.floor) {
        err(format!(
            "exploration: need 0 ≤ floor ≤ start ≤ 1, got start {} floor {}",
            x.start, x.floor
        ));
    }
    if !(x.decay_fraction > 0.0 && x.decay_fraction <= 1.0) {
        err(format!("exploration.decay_fraction must lie in (0, 1], got {}", x.decay_fraction));
    }
    if let Err(e) = cfg.agent.dqn_config().validate() {
        err(format!("agent: {e}"));
    }
    if cfg.model.trunk.is_empty() || cfg.model.trunk.contains(&0) || cfg.model.visual_dim == 0 || cfg.model.text_hidden == 0 {
        err("model: visual_dim, text_hidden and every trunk width must be positive".into());
    }
    if let Err(e) = cfg.window().validate() {
        err(format!("observation: {e}"));
    }
    if cfg.instruction.embedding_dim == 0 {
        err("instruction.embedding_dim must be positive".into());
    }
    for p in [&cfg.instruction.templates, &cfg.instruction.embeddings].into_iter().flatten() {
        let full = cfg.resolve_path(p);
        if !full.is_file() {
            err(format!("file not found: {}", full.display()));
        }
    }
    let map_path = cfg.map_path();
    let map = match std::fs::read_to_string(&map_path) {
        Err(e) => {
            err(format!("map file not found: {} ({e})", map_path.display()));
            None
        }
        Ok(text) => match load_map(&text) {
            Ok(m) => Some(m),
            Err(e) => {
                err(format!("{}: {e}", map_path.display()));
                None
            }
        },
    };
    if let Some(map) = map {
        out.extend(check_pools(cfg, &map));
        if out.iter().all(|f| f.severity != Severity::Error) {
            if let Err(e) = cfg.resolve() {
                out.push(Finding::error(e.to_string()));
            }
        }
    }
    if let Some(other) = &cfg.run.compare_with {
        let p = cfg.resolve_path(other);
        match RunConfig::load(&p) {
            Ok(o) => out.extend(budget_parity(cfg, &o)),
            Err(e) => out.push(Finding::error(format!("run.compare_with: {e}"))),
        }
    }
    out
}

fn check_pools(cfg: &RunConfig, map: &GridMap) -> Vec<Finding> {
    let mut out = Vec::new();
    for o in &cfg.run.objects {
        if map.spawn_for(*o).is_none() {
            out.push(Finding::error(format!("run.objects: map has no spawn cell for `{o}`")));
        }
    }
    if let Some(rs) = &cfg.run.receptacles {
        for r in rs {
            if !map.has_receptacle_kind(*r) {
                out.push(Finding::error(format!("run.receptacles: map has no `{r}`")));
            }
        }
    }
    if cfg.curriculum.final_stage >= 3 {
        let none = match &cfg.run.receptacles {
            Some(rs) => rs.is_empty(),
            None => map.receptacles().is_empty(),
        };
        if none {
            out.push(Finding::error("stages 3 and 4 need at least one receptacle on the map"));
        }
    }
    out
}

/// An ICL run and its no-curriculum counterpart must spend the same number of episodes.
pub fn budget_parity(a: &RunConfig, b: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if a.curriculum.mode == b.curriculum.mode {
        out.push(Finding::warning(format!(
            "`{}` and `{}` use the same curriculum mode; parity only matters between ICL and baseline",
            a.run.name, b.run.name
        )));
    }
    if a.total_budget() != b.total_budget() {
        out.push(Finding::error(format!(
            "budget parity: `{}` ({}) spends {} episodes but `{}` ({}) spends {}",
            a.run.name,
            mode_name(a.curriculum.mode),
            a.total_budget(),
            b.run.name,
            mode_name(b.curriculum.mode),
            b.total_budget()
        )));
    }
    if a.curriculum.final_stage != b.curriculum.final_stage {
        out.push(Finding::error(format!(
            "budget parity: final stages differ ({} vs {})",
            a.curriculum.final_stage, b.curriculum.final_stage
        )));
    }
    out
}

fn mode_name(m: CurriculumMode) -> &'static str {
    match m {
        CurriculumMode::Icl => "icl",
        CurriculumMode::Baseline => "baseline",
    }
}

/// Validates a map (`.map`), a sweep spec (TOML with a `base` key) or a run config.
pub fn validate_path(path: &Path) -> Vec<Finding> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![Finding::error(format!("cannot read {}: {e}", path.display()))],
    };
    if path.extension().is_some_and(|e| e == "map") {
        return validate_map(&text);
    }
    let table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return vec![Finding::error(format!("{}: {e}", path.display()))],
    };
    if table.contains_key("base") {
        return match SweepSpec::load(path).and_then(|s| s.cells()) {
            Ok(_) => Vec::new(),
            Err(e) => vec![Finding::error(e.to_string())],
        };
    }
    match RunConfig::load(path) {
        Ok(cfg) => validate_config(&cfg),
        Err(HarnessError::Config(m)) => vec![Finding::error(m)],
        Err(e) => vec![Finding::error(e.to_string())],
    }
}
