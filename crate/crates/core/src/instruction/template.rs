use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InstructionError;
use crate::gridworld::{ObjectKind, ReceptacleKind};

pub const BUNDLED_TEMPLATES: &str = include_str!("../../data/templates.txt");

const OBJ: &str = "{obj}";
const REC: &str = "{rec}";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    TargetObject,
    TargetReceptacle,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub pattern: String,
    pub slot: Slot,
}

/// Clause list of a compound instruction; clause k states the stage-k goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionTemplate {
    pub id: String,
    pub clauses: Vec<Clause>,
}

impl InstructionTemplate {
    /// Builds a template from clause patterns, inferring each clause's slot.
    pub fn new(id: &str, patterns: &[&str]) -> Result<Self, InstructionError> {
        let invalid = |m: &str| InstructionError::InvalidTemplate {
            id: id.to_string(),
            message: m.to_string(),
        };
        if patterns.is_empty() {
            return Err(invalid("needs at least one clause"));
        }
        if patterns.len() > 4 {
            return Err(invalid("at most four clauses (one per curriculum stage)"));
        }
        let mut seen_obj = false;
        let mut seen_rec = false;
        let mut clauses = Vec::with_capacity(patterns.len());
        for p in patterns {
            let p = p.trim();
            if p.is_empty() {
                return Err(invalid("empty clause"));
            }
            let slot = if p.contains(OBJ) && !seen_obj {
                seen_obj = true;
                Slot::TargetObject
            } else if p.contains(REC) && !seen_rec {
                seen_rec = true;
                Slot::TargetReceptacle
            } else {
                Slot::None
            };
            if p.contains(OBJ) && p.contains(REC) && slot != Slot::None {
                return Err(invalid("a clause may introduce only one slot"));
            }
            clauses.push(Clause {
                pattern: p.to_string(),
                slot,
            });
        }
        if !seen_obj || !matches!(clauses[0].slot, Slot::TargetObject) {
            return Err(invalid("the first clause must introduce {obj}"));
        }
        if clauses.len() >= 3 && !seen_rec {
            return Err(invalid("stages 3 and 4 need a {rec} slot"));
        }
        Ok(InstructionTemplate {
            id: id.to_string(),
            clauses,
        })
    }

    pub fn stage_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn needs_receptacle(&self) -> bool {
        self.clauses.iter().any(|c| c.slot == Slot::TargetReceptacle)
    }

    /// 1-based stage at which the receptacle is introduced.
    pub fn receptacle_stage(&self) -> Option<usize> {
        self.clauses
            .iter()
            .position(|c| c.slot == Slot::TargetReceptacle)
            .map(|i| i + 1)
    }

    /// Clause texts with slots filled in, first letter capitalized.
    pub fn fill(&self, object: ObjectKind, receptacle: Option<ReceptacleKind>) -> Vec<String> {
        let rec = receptacle.map(|r| r.phrase()).unwrap_or("");
        let mut out: Vec<String> = self
            .clauses
            .iter()
            .map(|c| c.pattern.replace(OBJ, object.name()).replace(REC, rec))
            .collect();
        if let Some(first) = out.first_mut() {
            *first = capitalize(first);
        }
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Canonical rendering of the first `k` of `n` clauses: comma-joined, with
/// `and` before the last clause only when the whole instruction is rendered.
pub fn render_prefix(clauses: &[String], k: usize) -> String {
    let n = clauses.len();
    if k == n && n >= 2 {
        format!("{}, and {}", clauses[..n - 1].join(", "), clauses[n - 1])
    } else {
        clauses[..k].join(", ")
    }
}

/// Parses the line-oriented template file format.
pub fn parse_templates(text: &str) -> Result<Vec<InstructionTemplate>, InstructionError> {
    let mut out: Vec<InstructionTemplate> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let (id, rest) = line.split_once(char::is_whitespace).ok_or(InstructionError::Parse {
            line: i + 1,
            message: "expected `<id> <clauses>`".into(),
        })?;
        let patterns: Vec<&str> = rest.split('|').collect();
        let t = InstructionTemplate::new(id, &patterns)?;
        if out.iter().any(|o| o.id == t.id) {
            return Err(InstructionError::Parse {
                line: i + 1,
                message: format!("duplicate template id `{id}`"),
            });
        }
        out.push(t);
    }
    Ok(out)
}

pub fn bundled_templates() -> Vec<InstructionTemplate> {
    parse_templates(BUNDLED_TEMPLATES).expect("bundled templates parse")
}

/// A sampled instruction with its stage decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionTask {
    pub template_id: String,
    pub full_text: String,
    pub stages: Vec<String>,
    pub target_object: ObjectKind,
    pub target_receptacle: Option<ReceptacleKind>,
}

impl InstructionTask {
    pub fn from_template(
        template: &InstructionTemplate,
        object: ObjectKind,
        receptacle: Option<ReceptacleKind>,
    ) -> Result<Self, InstructionError> {
        if template.needs_receptacle() && receptacle.is_none() {
            return Err(InstructionError::UnsatisfiableTemplate(format!(
                "template `{}` needs a receptacle",
                template.id
            )));
        }
        let clauses = template.fill(object, receptacle);
        let n = clauses.len();
        let stages: Vec<String> = (1..=n).map(|k| render_prefix(&clauses, k)).collect();
        Ok(InstructionTask {
            template_id: template.id.clone(),
            full_text: stages[n - 1].clone(),
            stages,
            target_object: object,
            target_receptacle: if template.needs_receptacle() { receptacle } else { None },
        })
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    /// The sub-task whose goal is stage `k`: first `k` stages, `full_text = stages[k-1]`.
    pub fn truncated(&self, k: usize) -> Result<InstructionTask, InstructionError> {
        if k == 0 || k > self.stage_count() {
            return Err(InstructionError::StageOutOfRange {
                stage: k,
                count: self.stage_count(),
            });
        }
        let stages = self.stages[..k].to_vec();
        let uses_receptacle = self
            .target_receptacle
            .is_some_and(|r| stages[k - 1].contains(r.phrase()));
        Ok(InstructionTask {
            template_id: self.template_id.clone(),
            full_text: stages[k - 1].clone(),
            stages,
            target_object: self.target_object,
            target_receptacle: if uses_receptacle { self.target_receptacle } else { None },
        })
    }
}

/// Uniform draw of template, object and receptacle; deterministic in `seed`.
pub fn sample_task(
    templates: &[InstructionTemplate],
    objects: &[ObjectKind],
    receptacles: &[ReceptacleKind],
    seed: u64,
) -> Result<InstructionTask, InstructionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = templates
        .choose(&mut rng)
        .ok_or_else(|| InstructionError::UnsatisfiableTemplate("no templates".into()))?;
    let object = *objects
        .choose(&mut rng)
        .ok_or_else(|| InstructionError::UnsatisfiableTemplate("object pool is empty".into()))?;
    let receptacle = if template.needs_receptacle() {
        Some(*receptacles.choose(&mut rng).ok_or_else(|| {
            InstructionError::UnsatisfiableTemplate(format!(
                "template `{}` needs a receptacle but the pool is empty",
                template.id
            ))
        })?)
    } else {
        None
    };
    InstructionTask::from_template(template, object, receptacle)
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches('.')
        .to_lowercase()
}

/// Splits a full instruction into its canonical stage prefixes.
pub fn decompose(full_text: &str, template: &InstructionTemplate) -> Result<Vec<String>, InstructionError> {
    let wanted = normalize(full_text);
    let receptacles: Vec<Option<ReceptacleKind>> = if template.needs_receptacle() {
        ReceptacleKind::ALL.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    for object in ObjectKind::ALL {
        for &rec in &receptacles {
            let task = InstructionTask::from_template(template, object, rec)?;
            if normalize(&task.full_text) == wanted {
                return Ok(task.stages);
            }
        }
    }
    Err(InstructionError::TemplateMismatch {
        text: full_text.to_string(),
        template: template.id.clone(),
    })
}
