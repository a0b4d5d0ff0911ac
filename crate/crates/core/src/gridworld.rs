//! The 11×11 food-gathering gridworld: layout parsing and validation,
//! deterministic dynamics, and a breadth-first path-length oracle.
//!
//! Layout files are 11 lines of 11 characters. `#` is a barrier, `.` a free
//! cell, and `F`, `H`, `L`, `R` mark the (free) food source, home, left tunnel
//! and right tunnel respectively.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::types::{apply_action_delta, Action, Observation, Poi, Position};

pub const GRID_SIZE: usize = 11;
pub const FREE_CELLS: usize = 74;
/// Upper bound on the shortest route for every goal leg; equals the episode
/// time limit used by all shipped reward machines.
pub const MAX_GOAL_LEG: u32 = 24;

/// The shipped layout.
pub const CANONICAL_LAYOUT: &str = include_str!("../assets/canonical.layout");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutInvariant {
    FreeCellCount {
        found: usize,
    },
    TunnelsSeparateHomeAndFood,
    RightRouteShorter {
        via_right: Option<u32>,
        via_left: Option<u32>,
    },
    GoalLegTooLong {
        leg: &'static str,
        steps: Option<u32>,
    },
}

impl fmt::Display for LayoutInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayoutInvariant::FreeCellCount { found } => {
                write!(f, "expected {FREE_CELLS} free cells, found {found}")
            }
            LayoutInvariant::TunnelsSeparateHomeAndFood => {
                write!(f, "home reaches food without passing through L or R")
            }
            LayoutInvariant::RightRouteShorter { via_right, via_left } => write!(
                f,
                "route through R ({via_right:?}) must be strictly shorter than through L ({via_left:?})"
            ),
            LayoutInvariant::GoalLegTooLong { leg, steps } => {
                write!(f, "goal leg {leg} needs {steps:?} steps, limit is {MAX_GOAL_LEG}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("layout must be {GRID_SIZE}x{GRID_SIZE}: {0}")]
    WrongDimensions(String),
    #[error("unknown character {ch:?} at row {row}, column {col}")]
    UnknownCharacter { row: usize, col: usize, ch: char },
    #[error("layout has no {0:?} cell")]
    MissingPoi(Poi),
    #[error("layout has more than one {0:?} cell")]
    DuplicatePoi(Poi),
    #[error("layout invariant violated: {0}")]
    InvariantViolation(LayoutInvariant),
}

/// Mutable part of the environment: where the agent stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub position: Position,
}

/// A validated, immutable gridworld layout.
///
/// Besides the barrier mask it precomputes a dense index over free cells and a
/// transition table over that index, which the lifetime loop uses directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    barrier: [[bool; GRID_SIZE]; GRID_SIZE],
    poi_coords: [Position; 4],
    free_cells: Vec<Position>,
    free_index: [[Option<u8>; GRID_SIZE]; GRID_SIZE],
    next: Vec<[u8; 4]>,
    poi_by_index: Vec<Poi>,
}

fn poi_slot(poi: Poi) -> usize {
    match poi {
        Poi::Food => 0,
        Poi::Home => 1,
        Poi::LeftTunnel => 2,
        Poi::RightTunnel => 3,
        Poi::None => unreachable!("NONE has no coordinate"),
    }
}

impl GridLayout {
    /// Parses and validates a layout. Trailing whitespace on lines and a
    /// trailing newline are ignored.
    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
        let lines: Vec<&str> = match lines.iter().rposition(|l| !l.is_empty()) {
            Some(last) => lines[..=last].to_vec(),
            None => Vec::new(),
        };
        if lines.len() != GRID_SIZE {
            return Err(LayoutError::WrongDimensions(format!("{} lines", lines.len())));
        }

        let mut barrier = [[false; GRID_SIZE]; GRID_SIZE];
        let mut poi_found: [Option<Position>; 4] = [None; 4];
        for (row, line) in lines.iter().enumerate() {
            let width = line.chars().count();
            if width != GRID_SIZE {
                return Err(LayoutError::WrongDimensions(format!(
                    "line {} has {width} characters",
                    row + 1
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                let pos = Position::new(row as i32, col as i32);
                match ch {
                    '#' => barrier[row][col] = true,
                    '.' => {}
                    _ => match Poi::from_symbol(ch) {
                        Some(poi) => {
                            let slot = &mut poi_found[poi_slot(poi)];
                            if slot.is_some() {
                                return Err(LayoutError::DuplicatePoi(poi));
                            }
                            *slot = Some(pos);
                        }
                        None => return Err(LayoutError::UnknownCharacter { row, col, ch }),
                    },
                }
            }
        }

        let mut poi_coords = [Position::new(0, 0); 4];
        for poi in Poi::MARKED {
            poi_coords[poi_slot(poi)] = poi_found[poi_slot(poi)].ok_or(LayoutError::MissingPoi(poi))?;
        }

        let layout = Self::from_parts(barrier, poi_coords);
        layout.check_invariants()?;
        Ok(layout)
    }

    pub fn canonical() -> Self {
        Self::parse(CANONICAL_LAYOUT).expect("shipped layout is valid")
    }

    fn from_parts(barrier: [[bool; GRID_SIZE]; GRID_SIZE], poi_coords: [Position; 4]) -> Self {
        let mut free_cells = Vec::new();
        let mut free_index = [[None; GRID_SIZE]; GRID_SIZE];
        for (row, cells) in barrier.iter().enumerate() {
            for (col, &blocked) in cells.iter().enumerate() {
                if !blocked {
                    free_index[row][col] = Some(free_cells.len() as u8);
                    free_cells.push(Position::new(row as i32, col as i32));
                }
            }
        }
        let mut layout = Self {
            barrier,
            poi_coords,
            free_cells,
            free_index,
            next: Vec::new(),
            poi_by_index: Vec::new(),
        };
        layout.next = layout
            .free_cells
            .iter()
            .map(|&p| {
                Action::ALL.map(|a| {
                    let dest = layout.step_position(p, a);
                    layout.free_index(dest).expect("step stays on free cells") as u8
                })
            })
            .collect();
        layout.poi_by_index = layout.free_cells.iter().map(|&p| layout.poi_at(p)).collect();
        layout
    }

    fn check_invariants(&self) -> Result<(), LayoutError> {
        let violation = |inv| Err(LayoutError::InvariantViolation(inv));
        if self.free_cells.len() != FREE_CELLS {
            return violation(LayoutInvariant::FreeCellCount {
                found: self.free_cells.len(),
            });
        }
        let (home, food) = (self.poi(Poi::Home), self.poi(Poi::Food));
        let (left, right) = (self.poi(Poi::LeftTunnel), self.poi(Poi::RightTunnel));
        if self.shortest_path(home, food, &[left, right]).is_some() {
            return violation(LayoutInvariant::TunnelsSeparateHomeAndFood);
        }
        let via_right = self.shortest_path(home, food, &[left]);
        let via_left = self.shortest_path(home, food, &[right]);
        match (via_right, via_left) {
            (Some(r), Some(l)) if r < l => {}
            _ => return violation(LayoutInvariant::RightRouteShorter { via_right, via_left }),
        }
        for leg in self.goal_legs() {
            match leg.steps {
                Some(s) if s <= MAX_GOAL_LEG => {}
                steps => return violation(LayoutInvariant::GoalLegTooLong { leg: leg.name, steps }),
            }
        }
        Ok(())
    }

    /// Shortest route lengths of the four goal legs (H→F and F→H, each via
    /// either tunnel).
    pub fn goal_legs(&self) -> [GoalLeg; 4] {
        let (home, food) = (self.poi(Poi::Home), self.poi(Poi::Food));
        let (left, right) = (self.poi(Poi::LeftTunnel), self.poi(Poi::RightTunnel));
        [
            GoalLeg {
                name: "H->F via R",
                steps: self.shortest_path(home, food, &[left]),
            },
            GoalLeg {
                name: "H->F via L",
                steps: self.shortest_path(home, food, &[right]),
            },
            GoalLeg {
                name: "F->H via R",
                steps: self.shortest_path(food, home, &[left]),
            },
            GoalLeg {
                name: "F->H via L",
                steps: self.shortest_path(food, home, &[right]),
            },
        ]
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        (0..GRID_SIZE as i32).contains(&p.row) && (0..GRID_SIZE as i32).contains(&p.col)
    }

    /// True for free, in-bounds cells.
    pub fn is_free(&self, p: Position) -> bool {
        self.in_bounds(p) && !self.barrier[p.row as usize][p.col as usize]
    }

    pub fn poi(&self, poi: Poi) -> Position {
        self.poi_coords[poi_slot(poi)]
    }

    pub fn poi_at(&self, p: Position) -> Poi {
        Poi::MARKED
            .into_iter()
            .find(|&poi| self.poi(poi) == p)
            .unwrap_or(Poi::None)
    }

    pub fn free_cells(&self) -> &[Position] {
        &self.free_cells
    }

    pub fn free_count(&self) -> usize {
        self.free_cells.len()
    }

    /// Dense index of a free cell, `None` for barriers and out-of-bounds.
    pub fn free_index(&self, p: Position) -> Option<usize> {
        if !self.in_bounds(p) {
            return None;
        }
        self.free_index[p.row as usize][p.col as usize].map(usize::from)
    }

    pub fn position_of(&self, index: usize) -> Position {
        self.free_cells[index]
    }

    /// Transition over free-cell indices; same semantics as [`env_step`].
    #[inline]
    pub fn step_index(&self, index: usize, action: Action) -> usize {
        self.next[index][action as usize] as usize
    }

    #[inline]
    pub fn poi_of_index(&self, index: usize) -> Poi {
        self.poi_by_index[index]
    }

    /// Free 4-neighbours of a free cell, by index.
    pub fn neighbours(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.free_cells[index];
        Action::ALL
            .into_iter()
            .filter_map(move |a| self.free_index(apply_action_delta(p, a)))
    }

    fn step_position(&self, p: Position, action: Action) -> Position {
        let dest = apply_action_delta(p, action);
        if self.is_free(dest) {
            dest
        } else {
            p
        }
    }

    /// Breadth-first shortest 4-connected path length from `from` to `to`
    /// avoiding barriers and every cell in `forbidden`. `None` when
    /// unreachable.
    pub fn shortest_path(&self, from: Position, to: Position, forbidden: &[Position]) -> Option<u32> {
        let blocked = |p: Position| !self.is_free(p) || forbidden.contains(&p);
        if blocked(from) || blocked(to) {
            return None;
        }
        let mut dist = [[u32::MAX; GRID_SIZE]; GRID_SIZE];
        let mut queue = VecDeque::new();
        dist[from.row as usize][from.col as usize] = 0;
        queue.push_back(from);
        while let Some(p) = queue.pop_front() {
            let d = dist[p.row as usize][p.col as usize];
            if p == to {
                return Some(d);
            }
            for a in Action::ALL {
                let n = apply_action_delta(p, a);
                if blocked(n) || dist[n.row as usize][n.col as usize] != u32::MAX {
                    continue;
                }
                dist[n.row as usize][n.col as usize] = d + 1;
                queue.push_back(n);
            }
        }
        None
    }

    /// Renders the layout back to its file format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(GRID_SIZE * (GRID_SIZE + 1));
        for row in 0..GRID_SIZE {
            for col in 0..GRID_SIZE {
                let p = Position::new(row as i32, col as i32);
                out.push(if self.barrier[row][col] {
                    '#'
                } else {
                    self.poi_at(p).symbol()
                });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoalLeg {
    pub name: &'static str,
    pub steps: Option<u32>,
}

pub fn load_layout(text: &str) -> Result<GridLayout, LayoutError> {
    GridLayout::parse(text)
}

/// Moves the agent one cell; barriers and the grid border block movement.
pub fn env_step(layout: &GridLayout, state: EnvState, action: Action) -> EnvState {
    EnvState {
        position: layout.step_position(state.position, action),
    }
}

pub fn observe(layout: &GridLayout, state: EnvState) -> Observation {
    Observation {
        position: state.position,
        poi: layout.poi_at(state.position),
    }
}
