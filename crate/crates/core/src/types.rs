//! Domain values shared by the environment, the reward machine and the learner.

use std::fmt;

/// Grid coordinate as `(row, col)`, `(0, 0)` being the top-left cell.
///
/// Signed so that displacements off the grid stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position {
    pub row: i32,
    pub col: i32,
}

impl Position {
    pub const fn new(row: i32, col: i32) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Position) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Right, Action::Down, Action::Left];

    pub const fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (-1, 0),
            Action::Right => (0, 1),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
        }
    }

    pub const fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Right => Action::Left,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
        }
    }

    pub fn from_index(index: usize) -> Action {
        Self::ALL[index & 3]
    }
}

/// Shifts `position` by the unit displacement of `action`. The result may lie
/// outside the grid; blocking is the environment's concern.
pub fn apply_action_delta(position: Position, action: Action) -> Position {
    let (dr, dc) = action.delta();
    Position::new(position.row + dr, position.col + dc)
}

/// Point-of-interest signal attached to an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Poi {
    None,
    Food,
    Home,
    LeftTunnel,
    RightTunnel,
}

impl Poi {
    pub const MARKED: [Poi; 4] = [Poi::Food, Poi::Home, Poi::LeftTunnel, Poi::RightTunnel];

    pub fn symbol(self) -> char {
        match self {
            Poi::None => '.',
            Poi::Food => 'F',
            Poi::Home => 'H',
            Poi::LeftTunnel => 'L',
            Poi::RightTunnel => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Poi> {
        match c {
            'F' => Some(Poi::Food),
            'H' => Some(Poi::Home),
            'L' => Some(Poi::LeftTunnel),
            'R' => Some(Poi::RightTunnel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub position: Position,
    pub poi: Poi,
}

/// An episode-wise stationary policy: one action per free cell of a layout.
///
/// Cells are addressed by their dense free-cell index (see
/// [`GridLayout::free_index`](crate::gridworld::GridLayout::free_index)), so the
/// table is total by construction and equality is extensional.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    actions: Box<[Action]>,
}

impl Policy {
    pub fn from_actions(actions: Vec<Action>) -> Self {
        Self {
            actions: actions.into_boxed_slice(),
        }
    }

    pub fn constant(cells: usize, action: Action) -> Self {
        Self::from_actions(vec![action; cells])
    }

    #[inline]
    pub fn action(&self, free_index: usize) -> Action {
        self.actions[free_index]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Builds a modified copy; `self` is left untouched.
    pub fn with_changes(&self, f: impl FnOnce(&mut [Action])) -> Policy {
        let mut actions = self.actions.clone();
        f(&mut actions);
        Policy { actions }
    }

    /// Number of cells on which the two policies agree.
    pub fn agreement(&self, other: &Policy) -> usize {
        self.actions
            .iter()
            .zip(other.actions.iter())
            .filter(|(a, b)| a == b)
            .count()
    }
}

/// Reward value emitted at a timestep. `Null` is distinct from a zero value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RewardValue {
    #[default]
    Null,
    Value(f64),
}

impl RewardValue {
    pub fn is_null(self) -> bool {
        matches!(self, RewardValue::Null)
    }

    pub fn value(self) -> Option<f64> {
        match self {
            RewardValue::Null => None,
            RewardValue::Value(v) => Some(v),
        }
    }
}

/// Truth assignment over a machine's Boolean goal variables, packed as bits in
/// declaration order (bit `i` is variable `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RewardState(u32);

impl RewardState {
    pub const fn from_bits(bits: u32) -> Self {
        Self(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn get(self, var: usize) -> bool {
        self.0 & (1 << var) != 0
    }

    pub fn with(self, var: usize, value: bool) -> Self {
        if value {
            Self(self.0 | (1 << var))
        } else {
            Self(self.0 & !(1 << var))
        }
    }
}
