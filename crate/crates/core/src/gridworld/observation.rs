use super::world::WorldState;
use super::{GridError, ObjectKind, ReceptacleKind, Terrain};

/// Forward-facing view: the agent's own row plus `depth` rows ahead, `width` cells across (odd).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationWindow {
    pub depth: usize,
    pub width: usize,
}

impl Default for ObservationWindow {
    fn default() -> Self {
        ObservationWindow { depth: 3, width: 3 }
    }
}

/// Features per window cell: terrain, object kinds, receptacle kinds.
pub const CELL_FEATURES: usize = Terrain::COUNT + ObjectKind::COUNT + ReceptacleKind::COUNT;

impl ObservationWindow {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.depth == 0 || self.width == 0 || self.width % 2 == 0 {
            return Err(GridError::Config(format!(
                "observation window {}x{} must have depth >= 1 and odd width",
                self.depth, self.width
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cells() * CELL_FEATURES + ObjectKind::COUNT
    }

    pub fn cells(&self) -> usize {
        (self.depth + 1) * self.width
    }

    /// Slot offset of window cell (row `d` in 0..=depth, 0 being the agent's row;
    /// lateral `l` in -w/2..=w/2).
    pub fn cell_offset(&self, d: usize, l: i32) -> usize {
        let half = (self.width / 2) as i32;
        (d * self.width + (l + half) as usize) * CELL_FEATURES
    }

    pub fn held_offset(&self) -> usize {
        self.cells() * CELL_FEATURES
    }
}

/// Egocentric multi-hot encoding of a world state.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub visual: Vec<f64>,
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.visual.len()
    }
}

pub fn observe(state: &WorldState) -> Observation {
    let window = state.window();
    let map = state.map();
    let mut v = vec![0.0; window.dim()];
    let (fx, fy) = state.agent.heading.forward();
    let (rx, ry) = state.agent.heading.right();
    let half = (window.width / 2) as i32;
    for d in 0..=window.depth {
        for l in -half..=half {
            let di = d as i32;
            let c = state.agent.cell.offset(fx * di + rx * l, fy * di + ry * l);
            let base = window.cell_offset(d, l);
            v[base + map.terrain(c).index()] = 1.0;
            if !map.contains(c) {
                continue;
            }
            for o in state.visible_objects_at(c) {
                v[base + Terrain::COUNT + o.kind.index()] = 1.0;
            }
            if let Some(r) = map.receptacle_at(c) {
                v[base + Terrain::COUNT + ObjectKind::COUNT + r.kind.index()] = 1.0;
            }
        }
    }
    if let Some(h) = state.held {
        v[window.held_offset() + h.index()] = 1.0;
    }
    Observation { visual: v }
}
