use serde::{Deserialize, Serialize};

use super::AgentError;

/// Linear ε decay from `start` to `floor` over `decay_episodes`, flat afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub floor: f64,
    pub decay_episodes: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, floor: f64, decay_episodes: u64) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=start).contains(&floor) {
            return Err(AgentError::Config(format!(
                "epsilon needs 0 <= floor <= start <= 1, got start {start}, floor {floor}"
            )));
        }
        Ok(EpsilonSchedule {
            start,
            floor,
            decay_episodes,
        })
    }

    /// Default floor 0.05, reaching it after 80% of `budget` episodes.
    pub fn for_budget(start: f64, budget: u64) -> Result<Self, AgentError> {
        Self::new(start, 0.05f64.min(start), (budget * 4).div_ceil(5))
    }

    pub fn value(&self, episode: u64) -> f64 {
        if episode >= self.decay_episodes {
            return self.floor;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        (self.start - (self.start - self.floor) * frac).max(self.floor)
    }
}
