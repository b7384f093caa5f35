use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StageSpec;
use crate::gridworld::Event;

pub const STEP_PENALTY: f64 = -0.05;
pub const MAX_GOAL_REWARD: f64 = 20.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    #[default]
    Neutral,
    PositiveIncremental,
    Norm,
    Div10,
}

impl RewardVariant {
    pub const ALL: [RewardVariant; 4] = [
        RewardVariant::Neutral,
        RewardVariant::PositiveIncremental,
        RewardVariant::Norm,
        RewardVariant::Div10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardVariant::Neutral => "neutral",
            RewardVariant::PositiveIncremental => "positive_incremental",
            RewardVariant::Norm => "norm",
            RewardVariant::Div10 => "div10",
        }
    }

    /// Divisor applied to the assembled reward.
    pub fn scale(self) -> f64 {
        match self {
            RewardVariant::Norm => MAX_GOAL_REWARD,
            RewardVariant::Div10 => 10.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "neutral" => Ok(RewardVariant::Neutral),
            "positive_incremental" | "positive" | "incremental" => Ok(RewardVariant::PositiveIncremental),
            "norm" => Ok(RewardVariant::Norm),
            "div10" => Ok(RewardVariant::Div10),
            other => Err(format!("unknown reward variant `{other}`")),
        }
    }
}

/// Goal reward of stage `index`: 5, 10, 15, 20.
pub fn stage_goal_reward(index: usize) -> f64 {
    5.0 * index as f64
}

/// Step penalty, plus the stage goal reward on success, plus earlier-stage
/// goal rewards for sub-goal events under `PositiveIncremental`; then scaled
/// by the variant divisor.
pub fn reward_for(events: &[Event], stage: &StageSpec, variant: RewardVariant, success: bool) -> f64 {
    let mut r = STEP_PENALTY;
    if success {
        r += stage.goal_reward;
    }
    if variant == RewardVariant::PositiveIncremental {
        for e in events {
            if let Event::SubGoalReached(k) = *e {
                if k < stage.instruction_stage {
                    r += stage_goal_reward(k);
                }
            }
        }
    }
    r / variant.scale()
}
