//! Fixed street lattice: four horizontal and four vertical one-way,
//! single-lane streets crossing at sixteen unsignalized intersections.
//!
//! Coordinates: `x` grows eastwards, `y` grows southwards (north is up).
//! Crossing positions are physical coordinates along the axis, so the same
//! position list places vertical streets at `x = pos[c]` and horizontal
//! streets at `y = pos[r]`. Cell indices on a street are counted in travel
//! order, so cell 0 is always the entry cell.

use crate::error::{Error, Result};

pub type StreetId = usize;
pub type IntersectionId = usize;

pub const STREETS_PER_AXIS: usize = 4;
pub const NUM_STREETS: usize = 2 * STREETS_PER_AXIS;
pub const NUM_INTERSECTIONS: usize = STREETS_PER_AXIS * STREETS_PER_AXIS;

pub const DEFAULT_STREET_LENGTH: usize = 50;
pub const DEFAULT_CROSSINGS: [usize; STREETS_PER_AXIS] = [9, 19, 29, 39];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub fn orientation(self) -> Orientation {
        match self {
            Direction::East | Direction::West => Orientation::Horizontal,
            Direction::North | Direction::South => Orientation::Vertical,
        }
    }

    /// Unit step in lattice coordinates (`y` grows southwards).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    /// The heading a driver facing `self` has on their right-hand side.
    pub fn clockwise(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn is_perpendicular(self, other: Direction) -> bool {
        self.orientation() != other.orientation()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Priority {
    AHasPriority,
    BHasPriority,
}

/// Right-hand rule at an unsigned junction: the driver who sees the other
/// vehicle on their left goes first.
///
/// A vehicle heading `b` arrives from the side opposite to `b`. It sits on
/// the left of a driver heading `a` exactly when `b` is `a` turned
/// clockwise, so in that case `a` has priority.
pub fn right_of_way(dir_a: Direction, dir_b: Direction) -> Result<Priority> {
    if !dir_a.is_perpendicular(dir_b) {
        return Err(Error::Domain(format!(
            "{dir_a:?} and {dir_b:?} are parallel and never meet"
        )));
    }
    if dir_a.clockwise() == dir_b {
        Ok(Priority::AHasPriority)
    } else {
        Ok(Priority::BHasPriority)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreetSpec {
    pub street_id: StreetId,
    pub orientation: Orientation,
    pub direction: Direction,
    pub length: usize,
    /// Cells (travel order) where this street meets a perpendicular one.
    pub crossing_cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Intersection {
    pub intersection_id: IntersectionId,
    pub h_street: StreetId,
    pub h_cell: usize,
    pub v_street: StreetId,
    pub v_cell: usize,
}

/// Direction phase for the alternating streets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionPhase {
    /// Heading of horizontal streets 0 and 2 (1 and 3 go the other way).
    pub first_horizontal: Direction,
    /// Heading of vertical streets 4 and 6 (5 and 7 go the other way).
    pub first_vertical: Direction,
}

impl Default for DirectionPhase {
    fn default() -> Self {
        DirectionPhase {
            first_horizontal: Direction::East,
            first_vertical: Direction::South,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridNetwork {
    length: usize,
    crossing_positions: Vec<usize>,
    streets: Vec<StreetSpec>,
    intersections: Vec<Intersection>,
    cell_to_intersection: Vec<Vec<Option<IntersectionId>>>,
}

impl GridNetwork {
    pub fn build(street_length: usize, crossing_positions: &[usize]) -> Result<Self> {
        Self::build_with_phase(street_length, crossing_positions, DirectionPhase::default())
    }

    pub fn build_with_phase(
        street_length: usize,
        crossing_positions: &[usize],
        phase: DirectionPhase,
    ) -> Result<Self> {
        if street_length == 0 {
            return Err(Error::Config("street length must be positive".into()));
        }
        if crossing_positions.len() != STREETS_PER_AXIS {
            return Err(Error::Config(format!(
                "expected {STREETS_PER_AXIS} crossing positions, got {}",
                crossing_positions.len()
            )));
        }
        if crossing_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "crossing positions must be strictly increasing: {crossing_positions:?}"
            )));
        }
        if crossing_positions.iter().any(|&p| p >= street_length) {
            return Err(Error::Config(format!(
                "crossing positions {crossing_positions:?} exceed street length {street_length}"
            )));
        }
        if phase.first_horizontal.orientation() != Orientation::Horizontal
            || phase.first_vertical.orientation() != Orientation::Vertical
        {
            return Err(Error::Config("direction phase has the wrong orientation".into()));
        }

        let opposite = |d: Direction| d.clockwise().clockwise();
        let mut streets = Vec::with_capacity(NUM_STREETS);
        for k in 0..NUM_STREETS {
            let (orientation, base) = if k < STREETS_PER_AXIS {
                (Orientation::Horizontal, phase.first_horizontal)
            } else {
                (Orientation::Vertical, phase.first_vertical)
            };
            let direction = if k % 2 == 0 { base } else { opposite(base) };
            let crossing_cells = if runs_forward(direction) {
                crossing_positions.to_vec()
            } else {
                crossing_positions
                    .iter()
                    .rev()
                    .map(|&p| street_length - 1 - p)
                    .collect()
            };
            streets.push(StreetSpec {
                street_id: k,
                orientation,
                direction,
                length: street_length,
                crossing_cells,
            });
        }

        let mut cell_to_intersection = vec![vec![None; street_length]; NUM_STREETS];
        let mut intersections = Vec::with_capacity(NUM_INTERSECTIONS);
        for row in 0..STREETS_PER_AXIS {
            for col in 0..STREETS_PER_AXIS {
                let h_street = row;
                let v_street = STREETS_PER_AXIS + col;
                let x = crossing_positions[col];
                let y = crossing_positions[row];
                let h_cell = to_cell(streets[h_street].direction, x, street_length);
                let v_cell = to_cell(streets[v_street].direction, y, street_length);
                let id = intersections.len();
                cell_to_intersection[h_street][h_cell] = Some(id);
                cell_to_intersection[v_street][v_cell] = Some(id);
                intersections.push(Intersection {
                    intersection_id: id,
                    h_street,
                    h_cell,
                    v_street,
                    v_cell,
                });
            }
        }

        Ok(GridNetwork {
            length: street_length,
            crossing_positions: crossing_positions.to_vec(),
            streets,
            intersections,
            cell_to_intersection,
        })
    }

    pub fn street_length(&self) -> usize {
        self.length
    }

    pub fn crossing_positions(&self) -> &[usize] {
        &self.crossing_positions
    }

    pub fn streets(&self) -> &[StreetSpec] {
        &self.streets
    }

    pub fn street(&self, id: StreetId) -> &StreetSpec {
        &self.streets[id]
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn intersection(&self, id: IntersectionId) -> &Intersection {
        &self.intersections[id]
    }

    #[inline]
    pub fn intersection_at(&self, street: StreetId, cell: usize) -> Option<IntersectionId> {
        self.cell_to_intersection
            .get(street)
            .and_then(|cells| cells.get(cell))
            .copied()
            .flatten()
    }

    #[inline]
    pub fn is_crossing(&self, street: StreetId, cell: usize) -> bool {
        self.intersection_at(street, cell).is_some()
    }

    /// Lattice coordinates `(x, y)` of a street cell.
    pub fn point(&self, street: StreetId, cell: usize) -> (usize, usize) {
        let spec = &self.streets[street];
        let along = if runs_forward(spec.direction) {
            cell
        } else {
            self.length - 1 - cell
        };
        let index = street % STREETS_PER_AXIS;
        let across = self.crossing_positions[index];
        match spec.orientation {
            Orientation::Horizontal => (along, across),
            Orientation::Vertical => (across, along),
        }
    }

    /// Distance (in cells) to the next crossing strictly ahead of `cell`.
    pub fn cells_to_next_crossing(&self, street: StreetId, cell: usize) -> Option<usize> {
        self.streets[street]
            .crossing_cells
            .iter()
            .find(|&&c| c > cell)
            .map(|&c| c - cell)
    }
}

/// East- and southbound streets count cells along growing coordinates.
fn runs_forward(direction: Direction) -> bool {
    matches!(direction, Direction::East | Direction::South)
}

fn to_cell(direction: Direction, coordinate: usize, length: usize) -> usize {
    if runs_forward(direction) {
        coordinate
    } else {
        length - 1 - coordinate
    }
}
