use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{stage_goal_reward, CurriculumError};
use crate::gridworld::Action;

/// Success-rate criterion over the most recent `window` episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mastery {
    pub window: usize,
    pub threshold: f64,
}

impl Default for Mastery {
    fn default() -> Self {
        Mastery {
            window: 200,
            threshold: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub index: usize,
    /// Which prefix of the task's stages is the goal.
    pub instruction_stage: usize,
    pub enabled_actions: Vec<Action>,
    pub goal_reward: f64,
    pub episode_budget: u64,
    pub mastery: Option<Mastery>,
}

/// Stage 1: move and turn; stages 2–3 add Pickup; stage 4 adds Place.
pub fn enabled_actions(index: usize) -> Vec<Action> {
    let n = match index {
        0 | 1 => 3,
        2 | 3 => 4,
        _ => 5,
    };
    Action::ALL[..n].to_vec()
}

/// Stage `index` with the default action set and goal reward.
pub fn stage_spec(index: usize, episode_budget: u64) -> StageSpec {
    StageSpec {
        index,
        instruction_stage: index,
        enabled_actions: enabled_actions(index),
        goal_reward: stage_goal_reward(index),
        episode_budget,
        mastery: None,
    }
}

/// Stages `1..=last`, each with `budget` episodes.
pub fn curriculum_schedule(last: usize, budget: u64, mastery: Option<Mastery>) -> Vec<StageSpec> {
    (1..=last)
        .map(|k| StageSpec {
            mastery,
            ..stage_spec(k, budget)
        })
        .collect()
}

/// The final stage alone, trained from scratch for `budget` episodes.
pub fn baseline_schedule(last: usize, budget: u64) -> Vec<StageSpec> {
    vec![stage_spec(last, budget)]
}

pub fn validate_schedule(schedule: &[StageSpec]) -> Result<(), CurriculumError> {
    let bad = |m: String| Err(CurriculumError::Schedule(m));
    if schedule.is_empty() {
        return bad("schedule has no stages".into());
    }
    for (i, s) in schedule.iter().enumerate() {
        if !(1..=4).contains(&s.index) || !(1..=4).contains(&s.instruction_stage) {
            return bad(format!("stage index {} outside 1..=4", s.index));
        }
        if !(5.0..=20.0).contains(&s.goal_reward) {
            return bad(format!("stage {}: goal reward {} outside [5, 20]", s.index, s.goal_reward));
        }
        if s.enabled_actions.is_empty() || s.enabled_actions != Action::ALL[..s.enabled_actions.len()] {
            return bad(format!("stage {}: enabled actions must be a prefix of the action list", s.index));
        }
        if s.episode_budget == 0 {
            return bad(format!("stage {}: episode budget must be positive", s.index));
        }
        if let Some(m) = s.mastery {
            if m.window == 0 || !(0.0..=1.0).contains(&m.threshold) {
                return bad(format!("stage {}: mastery needs window > 0 and threshold in [0, 1]", s.index));
            }
        }
        if i > 0 {
            let prev = &schedule[i - 1];
            if s.index != prev.index + 1 {
                return bad(format!("stage {} follows stage {}", s.index, prev.index));
            }
            if s.enabled_actions.len() < prev.enabled_actions.len() {
                return bad(format!("stage {} removes actions", s.index));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumState {
    /// Position in the schedule (0-based).
    pub current: usize,
    pub episodes_in_stage: u64,
    pub total_episodes: u64,
    pub history: VecDeque<bool>,
    /// Global episode counts at which each advance happened.
    pub advanced_at: Vec<u64>,
}

impl CurriculumState {
    pub fn new() -> Self {
        CurriculumState {
            current: 0,
            episodes_in_stage: 0,
            total_episodes: 0,
            history: VecDeque::new(),
            advanced_at: Vec::new(),
        }
    }

    /// Logs one finished episode of the current stage.
    pub fn record(&mut self, success: bool, schedule: &[StageSpec]) {
        self.episodes_in_stage += 1;
        self.total_episodes += 1;
        if let Some(m) = schedule[self.current].mastery {
            self.history.push_back(success);
            while self.history.len() > m.window {
                self.history.pop_front();
            }
        }
    }

    pub fn mastered(&self, spec: &StageSpec) -> bool {
        match spec.mastery {
            Some(m) if self.history.len() == m.window => {
                let wins = self.history.iter().filter(|&&s| s).count();
                wins as f64 >= m.threshold * m.window as f64
            }
            _ => false,
        }
    }
}

impl Default for CurriculumState {
    fn default() -> Self {
        Self::new()
    }
}

/// What to do with the network when moving to the next stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransferDirective {
    /// New head width when the action set grows.
    pub grow_head_to: Option<usize>,
    pub reset_epsilon: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdvanceOutcome {
    pub advanced: bool,
    pub transfer: Option<TransferDirective>,
    /// The final stage ended; the run is over.
    pub finished: bool,
}

/// Moves to the next stage once the current one is mastered or its budget is spent.
/// The final stage runs until the schedule's total budget is spent, so episodes
/// saved by early mastery carry over to it.
pub fn maybe_advance(state: &mut CurriculumState, schedule: &[StageSpec], reset_epsilon: bool) -> AdvanceOutcome {
    let spec = &schedule[state.current];
    let done = if state.current + 1 == schedule.len() {
        state.total_episodes >= schedule.iter().map(|s| s.episode_budget).sum::<u64>()
    } else {
        state.episodes_in_stage >= spec.episode_budget || state.mastered(spec)
    };
    if !done {
        return AdvanceOutcome {
            advanced: false,
            transfer: None,
            finished: false,
        };
    }
    let Some(next) = schedule.get(state.current + 1) else {
        return AdvanceOutcome {
            advanced: false,
            transfer: None,
            finished: true,
        };
    };
    let grow = (next.enabled_actions.len() > spec.enabled_actions.len()).then_some(next.enabled_actions.len());
    state.current += 1;
    state.episodes_in_stage = 0;
    state.history.clear();
    state.advanced_at.push(state.total_episodes);
    AdvanceOutcome {
        advanced: true,
        transfer: Some(TransferDirective {
            grow_head_to: grow,
            reset_epsilon,
        }),
        finished: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn action_sets() {
        assert_eq!(enabled_actions(1), vec![Action::MoveAhead, Action::RotateLeft, Action::RotateRight]);
        assert_eq!(enabled_actions(2).len(), 4);
        assert!(enabled_actions(2).contains(&Action::Pickup));
        assert_eq!(enabled_actions(3), enabled_actions(2));
        assert_eq!(enabled_actions(4).len(), 5);
        for k in 1..4 {
            let next = enabled_actions(k + 1);
            assert!(enabled_actions(k).iter().all(|a| next.contains(a)));
            assert!(stage_goal_reward(k) < stage_goal_reward(k + 1));
        }
    }

    #[test]
    fn schedules_validate() {
        validate_schedule(&curriculum_schedule(4, 3000, None)).unwrap();
        validate_schedule(&baseline_schedule(2, 6000)).unwrap();
        let mut bad = curriculum_schedule(2, 10, None);
        bad[1].index = 3;
        assert!(validate_schedule(&bad).is_err());
        assert!(validate_schedule(&[]).is_err());
    }

    #[test]
    fn budget_exhaustion_advances() {
        let sched = curriculum_schedule(2, 3000, None);
        let mut st = CurriculumState::new();
        for _ in 0..2999 {
            st.record(false, &sched);
            assert!(!maybe_advance(&mut st, &sched, true).advanced);
        }
        st.record(false, &sched);
        let out = maybe_advance(&mut st, &sched, true);
        assert!(out.advanced);
        assert_eq!(out.transfer.unwrap().grow_head_to, Some(4));
        assert_eq!(st.current, 1);
        assert_eq!(st.advanced_at, vec![3000]);
    }

    #[test]
    fn mastery_threshold_arithmetic() {
        let m = Mastery {
            window: 200,
            threshold: 0.9,
        };
        let sched = curriculum_schedule(2, 100_000, Some(m));
        for (wins, expect) in [(185, true), (180, true), (179, false)] {
            let mut st = CurriculumState::new();
            for i in 0..200 {
                st.record(i < wins, &sched);
            }
            assert_eq!(maybe_advance(&mut st, &sched, true).advanced, expect, "{wins}");
        }
    }

    #[test]
    fn final_stage_never_advances() {
        let sched = curriculum_schedule(1, 5, None);
        let mut st = CurriculumState::new();
        for _ in 0..5 {
            st.record(true, &sched);
        }
        let out = maybe_advance(&mut st, &sched, true);
        assert!(!out.advanced && out.finished);
        assert_eq!(st.current, 0);
    }

    #[test]
    fn final_stage_inherits_unspent_budget() {
        let m = Mastery {
            window: 2,
            threshold: 1.0,
        };
        let sched = curriculum_schedule(2, 10, Some(m));
        let mut st = CurriculumState::new();
        for _ in 0..2 {
            st.record(true, &sched);
        }
        assert!(maybe_advance(&mut st, &sched, true).advanced);
        for i in 0..18 {
            st.record(true, &sched);
            let out = maybe_advance(&mut st, &sched, true);
            assert_eq!(out.finished, i == 17, "{i}");
        }
        assert_eq!(st.total_episodes, 20);
    }

    #[test]
    fn no_growth_between_stages_two_and_three() {
        let sched = curriculum_schedule(3, 1, None);
        let mut st = CurriculumState::new();
        st.record(true, &sched);
        maybe_advance(&mut st, &sched, false);
        st.record(true, &sched);
        let out = maybe_advance(&mut st, &sched, false);
        assert_eq!(
            out.transfer,
            Some(TransferDirective {
                grow_head_to: None,
                reset_epsilon: false
            })
        );
    }

    proptest! {
        #[test]
        fn advancement_is_sound(
            outcomes in proptest::collection::vec(any::<bool>(), 1..400),
            window in 1usize..50,
            threshold in 0.0f64..=1.0,
            budget in 1u64..300,
        ) {
            let m = Mastery { window, threshold };
            let sched = curriculum_schedule(2, budget, Some(m));
            let mut st = CurriculumState::new();
            for (i, &s) in outcomes.iter().enumerate() {
                st.record(s, &sched);
                prop_assert!(st.history.len() <= window);
                let out = maybe_advance(&mut st, &sched, true);
                let n = i + 1;
                let recent = &outcomes[n.saturating_sub(window)..n];
                let mastered = n >= window && recent.iter().filter(|&&x| x).count() as f64 >= threshold * window as f64;
                let should = n as u64 >= budget || mastered;
                prop_assert_eq!(out.advanced, should, "episode {}", n);
                if out.advanced {
                    break;
                }
            }
        }
    }
}
