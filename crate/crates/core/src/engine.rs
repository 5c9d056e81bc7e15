//! Nagel–Schreckenberg dynamics on every street plus the full network step.
//!
//! Within one street all vehicles see the street as it was at the start of
//! its update (parallel update). Streets themselves are updated one after
//! another in a fresh random order each step, so junction points reflect
//! whatever perpendicular traffic has already done this step.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::behavior::{jam_check, BehaviorModel};
use crate::network::StreetId;
use crate::state::{Position, SimState, VehicleId};

/// Acceleration capped by the maximum speed and the free gap ahead.
pub fn accelerate_brake(v: u32, v_max: u32, gap: u32) -> u32 {
    (v + 1).min(v_max).min(gap)
}

pub fn random_slowdown(v: u32, p_slow: f64, draw: f64) -> u32 {
    if draw < p_slow {
        v.saturating_sub(1)
    } else {
        v
    }
}

/// New cell index; a result at or past the street length means the vehicle
/// left the street.
pub fn advance(cell: usize, v: u32) -> usize {
    cell + v as usize
}

impl SimState {
    /// Free cells ahead of `cell`, looking at most `limit` cells. Cells past
    /// the end of the street are always free. `staying[c]` marks cells whose
    /// occupant has already been given speed 0 this step; a junction in front
    /// of such a cell may not be entered when `clear_junction` is set.
    fn gap_ahead(&self, street: StreetId, cell: usize, limit: u32, staying: &[bool]) -> u32 {
        let len = self.network.street_length();
        let mut gap = 0;
        for k in 1..=limit as usize {
            let target = cell + k;
            if target < len && self.lattice.get(&self.network, street, target).is_some() {
                break;
            }
            if self.config.clear_junction
                && target + 1 < len
                && staying[target + 1]
                && self.network.is_crossing(street, target)
            {
                break;
            }
            gap += 1;
        }
        gap
    }

    fn vehicles_on_street(&self, street: StreetId) -> Vec<VehicleId> {
        (0..self.network.street_length())
            .rev()
            .filter_map(|c| {
                let id = self.lattice.get(&self.network, street, c)?;
                let pos = self.vehicles[id].position?;
                (pos.street == street).then_some(id)
            })
            .collect()
    }

    /// One NaSch update of a single street. Returns the vehicles that left
    /// the street; they are already back in the queue.
    pub fn step_street(&mut self, street: StreetId) -> Vec<VehicleId> {
        let ids = self.vehicles_on_street(street);
        let v_max = self.config.v_max;
        let p_slow = self.config.p_slow;

        let len = self.network.street_length();
        let mut staying = vec![false; len];
        let mut speeds = Vec::with_capacity(ids.len());
        for &id in &ids {
            let v = &self.vehicles[id];
            let cell = v.position.expect("vehicle on street").cell;
            let speed = if v.hold_steps > 0 {
                0
            } else {
                let gap = self.gap_ahead(street, cell, v_max, &staying);
                let accelerated = accelerate_brake(v.speed, v_max, gap);
                let draw: f64 = self.rng.random();
                random_slowdown(accelerated, p_slow, draw)
            };
            staying[cell] = speed == 0;
            speeds.push(speed);
        }

        let mut exited = Vec::new();
        for (&id, &speed) in ids.iter().zip(&speeds) {
            let cell = self.vehicles[id].position.expect("vehicle on street").cell;
            let target = advance(cell, speed);
            let crossed = speed > 0
                && self.network.street(street).crossing_cells.iter().any(|&c| c >= cell && c < target);
            {
                let v = &mut self.vehicles[id];
                if v.hold_steps > 0 {
                    v.hold_steps -= 1;
                }
                v.speed = speed;
                v.speed_history.push(speed);
                if speed > 0 {
                    v.met_with = None;
                }
                if crossed {
                    v.waiting_time = 0;
                    if matches!(self.config.behavior, BehaviorModel::Impatience { .. }) {
                        v.driver_type = crate::state::DriverType::Co;
                    }
                }
            }
            if target >= len {
                self.recycle_vehicle(id);
                exited.push(id);
                continue;
            }
            if speed > 0 {
                self.lattice.set(&self.network, street, cell, None);
                self.lattice.set(&self.network, street, target, Some(id));
                self.vehicles[id].position = Some(Position { street, cell: target });
            }
            let approaching = self
                .network
                .cells_to_next_crossing(street, target)
                .is_some_and(|d| d <= self.config.approach_window);
            let v = &mut self.vehicles[id];
            v.waiting_now = speed == 0 && (approaching || jam_check(v.speed_history.as_slice()));
            if v.waiting_now {
                v.waiting_time += 1;
            }
        }
        exited
    }

    /// One full simulation step.
    pub fn step_network(&mut self) {
        self.counters = Default::default();
        let mut order = std::mem::take(&mut self.street_order);
        order.shuffle(&mut self.rng);
        self.street_order = order;

        for k in 0..self.street_order.len() {
            let street = self.street_order[k];
            self.step_street(street);
        }

        let changes = self.impatience_step();
        self.counters.type_changes += changes;
        self.type_changes_total += changes;

        let meetings = self.detect_meetings();
        self.resolve_and_apply(&meetings);

        self.spawn_from_queue();

        let t = self.step;
        self.step += 1;
        if t >= self.config.warmup_steps {
            let metrics = self.collect_step(t);
            self.recorder.record(&metrics);
            if let BehaviorModel::Imitation { tau, .. } = self.config.behavior {
                if (self.step - self.config.warmup_steps).is_multiple_of(tau) {
                    self.imitation_update();
                    let q = self.population_ratio_q();
                    self.recorder.record_cycle(q);
                }
            }
        }
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step_network();
        }
    }
}
