use std::collections::HashSet;
use std::fmt;

use super::{GridError, ObjectKind, ReceptacleKind};

/// Integer grid coordinate; x grows rightward, y downward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Terrain {
    Floor,
    Wall,
    Furniture,
}

impl Terrain {
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Terrain::Floor => 0,
            Terrain::Wall => 1,
            Terrain::Furniture => 2,
        }
    }

    fn from_glyph(c: char) -> Option<Terrain> {
        match c {
            '.' => Some(Terrain::Floor),
            '#' => Some(Terrain::Wall),
            'F' => Some(Terrain::Furniture),
            _ => None,
        }
    }

    fn glyph(self) -> char {
        match self {
            Terrain::Floor => '.',
            Terrain::Wall => '#',
            Terrain::Furniture => 'F',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Receptacle {
    pub kind: ReceptacleKind,
    pub name: String,
    pub cell: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectSpawn {
    pub kind: ObjectKind,
    pub cells: Vec<Cell>,
}

/// Static kitchen layout: terrain, named receptacles and object spawn cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Terrain>,
    receptacles: Vec<Receptacle>,
    object_spawns: Vec<ObjectSpawn>,
}

impl GridMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn receptacles(&self) -> &[Receptacle] {
        &self.receptacles
    }

    pub fn object_spawns(&self) -> &[ObjectSpawn] {
        &self.object_spawns
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Terrain at `c`; anything outside the grid reads as wall.
    pub fn terrain(&self, c: Cell) -> Terrain {
        if self.contains(c) {
            self.cells[c.y as usize * self.width + c.x as usize]
        } else {
            Terrain::Wall
        }
    }

    pub fn floor_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let c = Cell::new(x, y);
                if self.terrain(c) == Terrain::Floor {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn receptacle_at(&self, c: Cell) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.cell == c)
    }

    pub fn receptacle(&self, name: &str) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.name == name)
    }

    pub fn has_receptacle_kind(&self, kind: ReceptacleKind) -> bool {
        self.receptacles.iter().any(|r| r.kind == kind)
    }

    pub fn spawn_for(&self, kind: ObjectKind) -> Option<&ObjectSpawn> {
        self.object_spawns.iter().find(|s| s.kind == kind)
    }

    /// Renders the map back into its text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("grid {} {}\n", self.width, self.height);
        for y in 0..self.height {
            let row: String = self.cells[y * self.width..(y + 1) * self.width]
                .iter()
                .map(|t| t.glyph())
                .collect();
            out.push_str(&row);
            out.push('\n');
        }
        for r in &self.receptacles {
            out.push_str(&format!("recept {} {} {} {}\n", r.kind, r.name, r.cell.x, r.cell.y));
        }
        for s in &self.object_spawns {
            for c in &s.cells {
                out.push_str(&format!("spawn {} {} {}\n", s.kind, c.x, c.y));
            }
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> GridError {
    GridError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_coord(tok: Option<&str>, line: usize, what: &str) -> Result<i32, GridError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse::<i32>()
        .map_err(|_| parse_err(line, format!("{what} `{tok}` is not an integer")))
}

/// Parses and validates a map file.
///
/// Blank lines and lines starting with `;` are ignored.
pub fn load_map(text: &str) -> Result<GridMap, GridError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with(';'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty map file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("grid") {
        return Err(parse_err(hline, "expected header `grid W H`"));
    }
    let width = parse_coord(toks.next(), hline, "width")?;
    let height = parse_coord(toks.next(), hline, "height")?;
    if width <= 0 || height <= 0 {
        return Err(parse_err(hline, "grid dimensions must be positive"));
    }
    if toks.next().is_some() {
        return Err(parse_err(hline, "trailing tokens after grid header"));
    }
    let (width, height) = (width as usize, height as usize);

    let mut cells = Vec::with_capacity(width * height);
    for _ in 0..height {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(hline, format!("expected {height} terrain rows")))?;
        let row = row.trim();
        if row.chars().count() != width {
            return Err(parse_err(ln, format!("terrain row has {} glyphs, expected {width}", row.chars().count())));
        }
        for ch in row.chars() {
            cells.push(Terrain::from_glyph(ch).ok_or_else(|| parse_err(ln, format!("unknown terrain glyph `{ch}`")))?);
        }
    }

    let mut receptacles = Vec::new();
    let mut object_spawns: Vec<ObjectSpawn> = Vec::new();
    let mut positions = Vec::new();
    for (ln, l) in lines {
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("recept") => {
                let kind: ReceptacleKind = toks
                    .next()
                    .ok_or_else(|| parse_err(ln, "missing receptacle kind"))?
                    .parse()
                    .map_err(|e: String| parse_err(ln, e))?;
                let name = toks.next().ok_or_else(|| parse_err(ln, "missing receptacle name"))?.to_string();
                let x = parse_coord(toks.next(), ln, "x")?;
                let y = parse_coord(toks.next(), ln, "y")?;
                if toks.next().is_some() {
                    return Err(parse_err(ln, "trailing tokens"));
                }
                receptacles.push(Receptacle { kind, name, cell: Cell::new(x, y) });
                positions.push(ln);
            }
            Some("spawn") => {
                let kind: ObjectKind = toks
                    .next()
                    .ok_or_else(|| parse_err(ln, "missing object kind"))?
                    .parse()
                    .map_err(|e: String| parse_err(ln, e))?;
                let x = parse_coord(toks.next(), ln, "x")?;
                let y = parse_coord(toks.next(), ln, "y")?;
                if toks.next().is_some() {
                    return Err(parse_err(ln, "trailing tokens"));
                }
                let c = Cell::new(x, y);
                match object_spawns.iter_mut().find(|s| s.kind == kind) {
                    Some(s) => s.cells.push(c),
                    None => object_spawns.push(ObjectSpawn { kind, cells: vec![c] }),
                }
            }
            Some(other) => return Err(parse_err(ln, format!("unknown directive `{other}`"))),
            None => unreachable!("blank lines filtered"),
        }
    }

    let map = GridMap {
        width,
        height,
        cells,
        receptacles,
        object_spawns,
    };
    validate(&map, &positions)?;
    Ok(map)
}

fn validate(map: &GridMap, recept_lines: &[usize]) -> Result<(), GridError> {
    let invalid = |entity: String, message: String| GridError::Validation { entity, message };
    let mut names = HashSet::new();
    for (r, ln) in map.receptacles.iter().zip(recept_lines) {
        let entity = format!("receptacle `{}` (line {ln})", r.name);
        if !map.contains(r.cell) {
            return Err(invalid(entity, format!("cell {} is outside the grid", r.cell)));
        }
        if map.terrain(r.cell) == Terrain::Wall {
            return Err(invalid(entity, format!("cell {} is a wall", r.cell)));
        }
        if !names.insert(r.name.as_str()) {
            return Err(invalid(entity, "duplicate receptacle name".into()));
        }
    }
    for s in &map.object_spawns {
        for &c in &s.cells {
            let entity = format!("spawn `{}` at {c}", s.kind);
            if !map.contains(c) {
                return Err(invalid(entity, "cell is outside the grid".into()));
            }
            if map.terrain(c) == Terrain::Wall {
                return Err(invalid(entity, "cell is a wall".into()));
            }
        }
    }
    if !map.cells.contains(&Terrain::Floor) {
        return Err(invalid("grid".into(), "no floor cell for the agent to spawn on".into()));
    }
    Ok(())
}
