use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::observation::{observe, Observation, ObservationWindow};
use super::{Cell, GridError, GridMap, ObjectKind, Terrain};
use crate::instruction::InstructionTask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    /// Unit step along the heading (y grows downward).
    pub fn forward(self) -> (i32, i32) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    /// Unit step to the agent's right.
    pub fn right(self) -> (i32, i32) {
        self.rotate_right().forward()
    }

    pub fn rotate_left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    pub fn rotate_right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading: Heading,
}

impl AgentPose {
    pub fn faced_cell(&self) -> Cell {
        let (dx, dy) = self.heading.forward();
        self.cell.offset(dx, dy)
    }
}

/// The five command-level actions. The discriminant is the Q-head index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateLeft,
    RotateRight,
    Pickup,
    Place,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::MoveAhead,
        Action::RotateLeft,
        Action::RotateRight,
        Action::Pickup,
        Action::Place,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Cell(Cell),
    Held,
    InsideReceptacle(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectInstance {
    pub kind: ObjectKind,
    pub location: Location,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    /// Stage index (1-based) whose goal predicate became true for the first time this episode.
    SubGoalReached(usize),
    Collision,
    InvalidInteraction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    pub success: bool,
    pub events: Vec<Event>,
}

/// Turns the events of one step into a scalar reward.
pub trait RewardFn {
    fn reward(&self, events: &[Event], success: bool) -> f64;
}

impl<F: Fn(&[Event], bool) -> f64> RewardFn for F {
    fn reward(&self, events: &[Event], success: bool) -> f64 {
        self(events, success)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvConfig {
    pub maxtime: u32,
    pub window: ObservationWindow,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            maxtime: 100,
            window: ObservationWindow::default(),
        }
    }
}

/// A map plus episode settings; hands out fresh episodes.
#[derive(Clone, Debug)]
pub struct Environment {
    map: Arc<GridMap>,
    config: EnvConfig,
}

/// Complete simulator state for one episode.
#[derive(Clone, Debug)]
pub struct WorldState {
    map: Arc<GridMap>,
    config: EnvConfig,
    task: Arc<InstructionTask>,
    pub agent: AgentPose,
    pub objects: Vec<ObjectInstance>,
    pub held: Option<ObjectKind>,
    pub steps_taken: u32,
    reached: Vec<bool>,
    terminal: bool,
    rng: ChaCha8Rng,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map
            && self.config == other.config
            && self.task == other.task
            && self.agent == other.agent
            && self.objects == other.objects
            && self.held == other.held
            && self.steps_taken == other.steps_taken
            && self.reached == other.reached
            && self.terminal == other.terminal
            && self.rng == other.rng
    }
}

impl Environment {
    pub fn new(map: GridMap, config: EnvConfig) -> Result<Self, GridError> {
        config.window.validate()?;
        if config.maxtime == 0 {
            return Err(GridError::Config("maxtime must be at least 1".into()));
        }
        Ok(Environment {
            map: Arc::new(map),
            config,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> EnvConfig {
        self.config
    }

    pub fn observation_dim(&self) -> usize {
        self.config.window.dim()
    }

    /// Starts an episode: uniform agent pose over floor cells × headings, then
    /// each spawn kind placed uniformly over its free allowed cells.
    pub fn reset(&self, task: &InstructionTask, seed: u64) -> Result<(WorldState, Observation), GridError> {
        if self.map.spawn_for(task.target_object).is_none() {
            return Err(GridError::TaskMapMismatch(format!(
                "object `{}` has no spawn cell in the map",
                task.target_object
            )));
        }
        if let Some(r) = task.target_receptacle {
            if !self.map.has_receptacle_kind(r) {
                return Err(GridError::TaskMapMismatch(format!("receptacle `{r}` is not in the map")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let floor = self.map.floor_cells();
        let cell = *floor.choose(&mut rng).expect("validated map has floor");
        let heading = Heading::ALL[rng.random_range(0..4)];

        let mut objects: Vec<ObjectInstance> = Vec::new();
        for spawn in self.map.object_spawns() {
            let free: Vec<Cell> = spawn
                .cells
                .iter()
                .copied()
                .filter(|c| !objects.iter().any(|o| o.location == Location::Cell(*c)))
                .collect();
            let pool = if free.is_empty() { &spawn.cells } else { &free };
            let c = *pool.choose(&mut rng).expect("spawn lists are non-empty");
            objects.push(ObjectInstance {
                kind: spawn.kind,
                location: Location::Cell(c),
            });
        }

        let state = WorldState {
            map: Arc::clone(&self.map),
            config: self.config,
            task: Arc::new(task.clone()),
            agent: AgentPose { cell, heading },
            objects,
            held: None,
            steps_taken: 0,
            reached: vec![false; task.stage_count()],
            terminal: false,
            rng,
        };
        let obs = observe(&state);
        Ok((state, obs))
    }
}

impl WorldState {
    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn task(&self) -> &InstructionTask {
        &self.task
    }

    pub fn window(&self) -> ObservationWindow {
        self.config.window
    }

    pub fn maxtime(&self) -> u32 {
        self.config.maxtime
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Objects resting loose on `c`.
    pub fn loose_objects_at(&self, c: Cell) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter().filter(move |o| o.location == Location::Cell(c))
    }

    /// Objects that are visible on `c`: loose ones plus contents of an open-surface receptacle there.
    pub fn visible_objects_at(&self, c: Cell) -> impl Iterator<Item = &ObjectInstance> {
        let open = self
            .map
            .receptacle_at(c)
            .filter(|r| r.kind.open_surface())
            .map(|r| r.name.clone());
        self.objects.iter().filter(move |o| match &o.location {
            Location::Cell(oc) => *oc == c,
            Location::InsideReceptacle(name) => open.as_deref() == Some(name.as_str()),
            Location::Held => false,
        })
    }

    fn apply(&mut self, action: Action, events: &mut Vec<Event>) {
        match action {
            Action::MoveAhead => {
                let target = self.agent.faced_cell();
                if self.map.terrain(target) == Terrain::Floor {
                    self.agent.cell = target;
                } else {
                    events.push(Event::Collision);
                }
            }
            Action::RotateLeft => self.agent.heading = self.agent.heading.rotate_left(),
            Action::RotateRight => self.agent.heading = self.agent.heading.rotate_right(),
            Action::Pickup => {
                let faced = self.agent.faced_cell();
                let loose = self.objects.iter().position(|o| o.location == Location::Cell(faced));
                let contained = || {
                    let r = self.map.receptacle_at(faced).filter(|r| r.kind.open_surface())?;
                    self.objects
                        .iter()
                        .position(|o| o.location == Location::InsideReceptacle(r.name.clone()))
                };
                match (self.held, loose.or_else(contained)) {
                    (None, Some(i)) => {
                        self.objects[i].location = Location::Held;
                        self.held = Some(self.objects[i].kind);
                    }
                    _ => events.push(Event::InvalidInteraction),
                }
            }
            Action::Place => {
                let faced = self.agent.faced_cell();
                let recept = self.map.receptacle_at(faced).map(|r| r.name.clone());
                match (self.held, recept) {
                    (Some(_), Some(name)) => {
                        let i = self
                            .objects
                            .iter()
                            .position(|o| o.location == Location::Held)
                            .expect("held mirrors a Held object");
                        self.objects[i].location = Location::InsideReceptacle(name);
                        self.held = None;
                    }
                    _ => events.push(Event::InvalidInteraction),
                }
            }
        }
    }

    /// Advances one step. `reward` assembles the scalar from this step's events.
    pub fn step(&self, action: Action, reward: &dyn RewardFn) -> Result<(WorldState, StepOutcome), GridError> {
        if self.terminal {
            return Err(GridError::SteppedAfterTerminal);
        }
        let mut next = self.clone();
        let mut events = Vec::new();
        next.apply(action, &mut events);
        next.steps_taken += 1;

        let task = Arc::clone(&next.task);
        for stage in 1..=task.stage_count() {
            if !next.reached[stage - 1] && success_predicate(&next, stage, &task) {
                next.reached[stage - 1] = true;
                events.push(Event::SubGoalReached(stage));
            }
        }
        let success = success_predicate(&next, task.stage_count(), &task);
        next.terminal = success || next.steps_taken >= next.config.maxtime;
        let outcome = StepOutcome {
            observation: observe(&next),
            reward: reward.reward(&events, success),
            terminal: next.terminal,
            success,
            events,
        };
        Ok((next, outcome))
    }
}

/// Goal predicate of curriculum stage `stage` (1-based) for `task`.
///
/// 1: facing the target object from an adjacent cell; 2: holding it;
/// 3: holding it while facing the target receptacle; 4: target inside that receptacle.
pub fn success_predicate(state: &WorldState, stage: usize, task: &InstructionTask) -> bool {
    let target = task.target_object;
    let faced = state.agent.faced_cell();
    let facing_receptacle = || match task.target_receptacle {
        Some(kind) => state.map.receptacle_at(faced).is_some_and(|r| r.kind == kind),
        None => false,
    };
    match stage {
        1 => state.loose_objects_at(faced).any(|o| o.kind == target),
        2 => state.held == Some(target),
        3 => state.held == Some(target) && facing_receptacle(),
        4 => match task.target_receptacle {
            Some(kind) => state.objects.iter().any(|o| {
                o.kind == target
                    && matches!(&o.location, Location::InsideReceptacle(name)
                        if state.map.receptacle(name).is_some_and(|r| r.kind == kind))
            }),
            None => false,
        },
        _ => false,
    }
}
