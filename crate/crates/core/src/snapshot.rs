//! Plain-text picture of the lattice, north at the top.

use crate::network::{Orientation, NUM_STREETS};
use crate::state::{DriverType, SimState};

pub const OFF_ROAD: char = ' ';
pub const EMPTY: char = '.';
pub const JUNCTION: char = '+';
pub const CO_VEHICLE: char = 'o';
pub const DE_VEHICLE: char = 'x';

/// One line per lattice row, one glyph per cell, followed by a newline.
pub fn snapshot(state: &SimState) -> String {
    let net = state.network();
    let len = net.street_length();
    let mut grid = vec![vec![OFF_ROAD; len]; len];
    for street in 0..NUM_STREETS {
        for cell in 0..len {
            let (x, y) = net.point(street, cell);
            let glyph = match state.occupant(street, cell) {
                Some(id) => match state.vehicle(id).driver_type {
                    DriverType::Co => CO_VEHICLE,
                    DriverType::De => DE_VEHICLE,
                },
                None if net.is_crossing(street, cell) => JUNCTION,
                None => EMPTY,
            };
            grid[y][x] = glyph;
        }
    }
    let mut out = String::with_capacity(len * (len + 1) + 64);
    out.push_str(&format!("# step {}\n", state.step_count()));
    for row in grid {
        out.extend(row);
        out.push('\n');
    }
    out
}

/// Arrow legend for the street directions, e.g. `0:> 1:< ... 4:v 5:^`.
pub fn direction_legend(state: &SimState) -> String {
    use crate::network::Direction::*;
    state
        .network()
        .streets()
        .iter()
        .map(|s| {
            let arrow = match s.direction {
                North => '^',
                East => '>',
                South => 'v',
                West => '<',
            };
            let axis = match s.orientation {
                Orientation::Horizontal => 'h',
                Orientation::Vertical => 'v',
            };
            format!("{}{}:{}", axis, s.street_id, arrow)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorModel;
    use crate::state::SimConfig;

    fn state() -> SimState {
        let mut c = SimConfig::new(BehaviorModel::FixedRatio { p_co: 1.0 });
        c.max_vehicles = 5;
        SimState::new(c).unwrap()
    }

    fn body(s: &str) -> Vec<&str> {
        s.lines().skip(1).collect()
    }

    #[test]
    fn empty_network_has_streets_and_junctions() {
        let s = state();
        let text = snapshot(&s);
        let rows = body(&text);
        assert_eq!(rows.len(), 50);
        assert!(rows.iter().all(|r| r.chars().count() == 50));
        let junctions = text.chars().filter(|&c| c == JUNCTION).count();
        assert_eq!(junctions, 16);
        assert_eq!(rows[9].chars().nth(19), Some(JUNCTION));
        assert_eq!(rows[9].chars().next(), Some(EMPTY));
        assert_eq!(rows[0].chars().next(), Some(OFF_ROAD));
        assert_eq!(rows[0].chars().nth(9), Some(EMPTY));
    }

    #[test]
    fn single_vehicle_glyph() {
        let mut s = state();
        // westbound street 1 sits at y = 19; cell 5 is x = 44
        s.place_vehicle(0, 1, 5, 0).unwrap();
        let text = snapshot(&s);
        assert_eq!(text.chars().filter(|&c| c == CO_VEHICLE).count(), 1);
        assert_eq!(body(&text)[19].chars().nth(44), Some(CO_VEHICLE));
    }

    #[test]
    fn identical_states_identical_text() {
        let mut a = state();
        let mut b = state();
        a.run(30);
        b.run(30);
        assert_eq!(snapshot(&a), snapshot(&b));
    }

    #[test]
    fn legend() {
        assert_eq!(direction_legend(&state()), "h0:> h1:< h2:> h3:< v4:v v5:^ v6:v v7:^");
    }
}
