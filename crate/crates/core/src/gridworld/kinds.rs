use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Pick-up-able object kinds known to the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Bowl,
    Bread,
    Vase,
    Apple,
    Cup,
    Mug,
    Potato,
    Ladle,
    Plate,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 9] = [
        ObjectKind::Bowl,
        ObjectKind::Bread,
        ObjectKind::Vase,
        ObjectKind::Apple,
        ObjectKind::Cup,
        ObjectKind::Mug,
        ObjectKind::Potato,
        ObjectKind::Ladle,
        ObjectKind::Plate,
    ];
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Bowl => "bowl",
            ObjectKind::Bread => "bread",
            ObjectKind::Vase => "vase",
            ObjectKind::Apple => "apple",
            ObjectKind::Cup => "cup",
            ObjectKind::Mug => "mug",
            ObjectKind::Potato => "potato",
            ObjectKind::Ladle => "ladle",
            ObjectKind::Plate => "plate",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        ObjectKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| format!("unknown object kind `{s}`"))
    }
}

/// Receptacle kinds that can be navigated to and placed into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceptacleKind {
    Fridge,
    Sink,
    Table,
    Countertop,
    Shelf,
    CoffeeMachine,
}

impl ReceptacleKind {
    pub const ALL: [ReceptacleKind; 6] = [
        ReceptacleKind::Fridge,
        ReceptacleKind::Sink,
        ReceptacleKind::Table,
        ReceptacleKind::Countertop,
        ReceptacleKind::Shelf,
        ReceptacleKind::CoffeeMachine,
    ];
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    /// Identifier used in map files and configs.
    pub fn key(self) -> &'static str {
        match self {
            ReceptacleKind::Fridge => "fridge",
            ReceptacleKind::Sink => "sink",
            ReceptacleKind::Table => "table",
            ReceptacleKind::Countertop => "countertop",
            ReceptacleKind::Shelf => "shelf",
            ReceptacleKind::CoffeeMachine => "coffeemachine",
        }
    }

    /// Rendering inside instruction text.
    pub fn phrase(self) -> &'static str {
        match self {
            ReceptacleKind::CoffeeMachine => "coffee machine",
            other => other.key(),
        }
    }

    /// Contents of open-surface receptacles stay visible and reachable.
    pub fn open_surface(self) -> bool {
        matches!(
            self,
            ReceptacleKind::Table | ReceptacleKind::Countertop | ReceptacleKind::Shelf
        )
    }
}

impl fmt::Display for ReceptacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ReceptacleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        ReceptacleKind::ALL
            .into_iter()
            .find(|k| k.key() == key)
            .ok_or_else(|| format!("unknown receptacle kind `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for k in ObjectKind::ALL {
            assert_eq!(k.name().parse::<ObjectKind>().unwrap(), k);
        }
        for k in ReceptacleKind::ALL {
            assert_eq!(k.key().parse::<ReceptacleKind>().unwrap(), k);
            assert_eq!(k.phrase().parse::<ReceptacleKind>().unwrap(), k);
        }
        assert_eq!("Coffee_Machine".parse::<ReceptacleKind>().unwrap(), ReceptacleKind::CoffeeMachine);
        assert!("toaster".parse::<ReceptacleKind>().is_err());
    }
}
