//! Mutable simulation state: the driver population, the lattice occupancy,
//! the entry queue and the RNG stream, plus the spawn/recycle lifecycle.
//!
//! The population is fixed at `max_vehicles` drivers, all of whom start in
//! the entry queue. A vehicle that drives past the last cell of its street
//! leaves the lattice and rejoins the back of the queue; queued drivers enter
//! at cell 0 of whichever street offers them a free entry first.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::behavior::{assign_type_fixed, BehaviorModel};
use crate::error::{Error, Result};
use crate::games::{MeetingRecord, PayoffTable};
use crate::network::{DirectionPhase, GridNetwork, StreetId, DEFAULT_CROSSINGS, DEFAULT_STREET_LENGTH, NUM_STREETS};
use crate::stats::Recorder;

pub type VehicleId = usize;

/// Number of past speeds kept for the traffic-jam test.
pub const SPEED_HISTORY_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriverType {
    /// Complies with the right-hand rule.
    Co,
    /// Ignores priority.
    De,
}

impl DriverType {
    pub fn as_str(self) -> &'static str {
        match self {
            DriverType::Co => "CO",
            DriverType::De => "DE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub street: StreetId,
    pub cell: usize,
}

/// Fixed-capacity record of the most recent speeds, oldest first.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeedHistory {
    speeds: [u32; SPEED_HISTORY_LEN],
    len: usize,
}

impl SpeedHistory {
    pub fn push(&mut self, speed: u32) {
        if self.len == SPEED_HISTORY_LEN {
            self.speeds.copy_within(1.., 0);
            self.speeds[SPEED_HISTORY_LEN - 1] = speed;
        } else {
            self.speeds[self.len] = speed;
            self.len += 1;
        }
    }

    pub fn clear(&mut self) {
        self.len = 0;
    }

    /// Oldest first.
    pub fn as_slice(&self) -> &[u32] {
        &self.speeds[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl PartialEq for SpeedHistory {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl Eq for SpeedHistory {}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    /// `None` while the driver waits in the entry queue.
    pub position: Option<Position>,
    pub speed: u32,
    pub driver_type: DriverType,
    pub is_core: bool,
    /// Remaining steps during which the vehicle stays put.
    pub hold_steps: u32,
    /// Steps spent waiting since the last crossed intersection.
    pub waiting_time: u32,
    pub speed_history: SpeedHistory,
    // Observation counters in half-units so that ambiguous sightings stay exact.
    obs_halves_co: u32,
    obs_halves_de: u32,
    /// Opponent of the last meeting at the current approach cell.
    pub(crate) met_with: Option<VehicleId>,
    /// Judged waiting during the current step.
    pub(crate) waiting_now: bool,
}

impl Vehicle {
    pub fn new(id: VehicleId, driver_type: DriverType, is_core: bool) -> Self {
        Vehicle {
            id,
            position: None,
            speed: 0,
            driver_type,
            is_core,
            hold_steps: 0,
            waiting_time: 0,
            speed_history: SpeedHistory::default(),
            obs_halves_co: 0,
            obs_halves_de: 0,
            met_with: None,
            waiting_now: false,
        }
    }

    pub fn obs_count_co(&self) -> f64 {
        f64::from(self.obs_halves_co) / 2.0
    }

    pub fn obs_count_de(&self) -> f64 {
        f64::from(self.obs_halves_de) / 2.0
    }

    pub(crate) fn add_obs_halves(&mut self, co: u32, de: u32) {
        self.obs_halves_co += co;
        self.obs_halves_de += de;
    }

    pub(crate) fn reset_observations(&mut self) {
        self.obs_halves_co = 0;
        self.obs_halves_de = 0;
    }

    pub fn is_waiting(&self) -> bool {
        self.waiting_now
    }

    pub fn on_lattice(&self) -> bool {
        self.position.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub street_length: usize,
    pub crossing_positions: [usize; 4],
    pub phase: DirectionPhase,
    pub v_max: u32,
    /// Random slowdown probability.
    pub p_slow: f64,
    /// Per-street entry probability for a queued driver.
    pub p_new: f64,
    pub max_vehicles: usize,
    pub warmup_steps: u64,
    /// A stopped vehicle this many cells (or fewer) before a crossing is waiting.
    pub approach_window: usize,
    /// A vehicle may not enter a junction while the cell just past it is taken.
    pub clear_junction: bool,
    pub behavior: BehaviorModel,
    pub payoffs: PayoffTable,
    pub seed: u64,
    /// Keep a log of every resolved meeting.
    pub record_meetings: bool,
    /// Keep the per-step metrics series.
    pub record_series: bool,
}

impl SimConfig {
    pub fn new(behavior: BehaviorModel) -> Self {
        SimConfig {
            street_length: DEFAULT_STREET_LENGTH,
            crossing_positions: DEFAULT_CROSSINGS,
            phase: DirectionPhase::default(),
            v_max: 1,
            p_slow: 0.1,
            p_new: 0.3,
            max_vehicles: 350,
            warmup_steps: 50,
            approach_window: 1,
            clear_junction: true,
            payoffs: PayoffTable::default_for(&behavior),
            behavior,
            seed: 0,
            record_meetings: false,
            record_series: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_slow", self.p_slow), ("p_new", self.p_new)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.v_max == 0 {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if self.max_vehicles == 0 {
            return Err(Error::Config("max_vehicles must be positive".into()));
        }
        if self.approach_window == 0 {
            return Err(Error::Config("approach_window must be positive".into()));
        }
        self.behavior.validate()?;
        Ok(())
    }
}

/// Occupancy of every lattice point. Crossing cells of both streets map to
/// one shared junction slot.
#[derive(Debug, Clone)]
pub(crate) struct Lattice {
    streets: Vec<Vec<Option<VehicleId>>>,
    junctions: Vec<Option<VehicleId>>,
}

impl Lattice {
    fn new(network: &GridNetwork) -> Self {
        Lattice {
            streets: vec![vec![None; network.street_length()]; NUM_STREETS],
            junctions: vec![None; network.intersections().len()],
        }
    }

    #[inline]
    fn slot_mut(&mut self, network: &GridNetwork, street: StreetId, cell: usize) -> &mut Option<VehicleId> {
        match network.intersection_at(street, cell) {
            Some(j) => &mut self.junctions[j],
            None => &mut self.streets[street][cell],
        }
    }

    #[inline]
    pub(crate) fn get(&self, network: &GridNetwork, street: StreetId, cell: usize) -> Option<VehicleId> {
        match network.intersection_at(street, cell) {
            Some(j) => self.junctions[j],
            None => self.streets[street][cell],
        }
    }

    pub(crate) fn junction(&self, id: usize) -> Option<VehicleId> {
        self.junctions[id]
    }

    #[inline]
    pub(crate) fn set(&mut self, network: &GridNetwork, street: StreetId, cell: usize, v: Option<VehicleId>) {
        *self.slot_mut(network, street, cell) = v;
    }
}

/// Counters of the step in progress.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct StepCounters {
    pub conflicts: u64,
    pub type_changes: u64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub(crate) network: GridNetwork,
    pub(crate) vehicles: Vec<Vehicle>,
    pub(crate) queue: VecDeque<VehicleId>,
    pub(crate) lattice: Lattice,
    pub(crate) step: u64,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) config: SimConfig,
    pub(crate) street_order: Vec<StreetId>,
    pub(crate) counters: StepCounters,
    pub(crate) conflicts_total: u64,
    pub(crate) type_changes_total: u64,
    pub(crate) meeting_log: Vec<MeetingRecord>,
    pub(crate) recorder: Recorder,
}

impl SimState {
    /// Builds the network and fills the entry queue to `max_vehicles`.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let network = GridNetwork::build_with_phase(config.street_length, &config.crossing_positions, config.phase)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut vehicles = Vec::with_capacity(config.max_vehicles);
        for id in 0..config.max_vehicles {
            let (driver_type, is_core) = initial_driver(&config.behavior, &mut rng);
            vehicles.push(Vehicle::new(id, driver_type, is_core));
        }
        let queue = (0..config.max_vehicles).collect();
        Ok(SimState {
            lattice: Lattice::new(&network),
            network,
            vehicles,
            queue,
            step: 0,
            rng,
            street_order: (0..NUM_STREETS).collect(),
            counters: StepCounters::default(),
            conflicts_total: 0,
            type_changes_total: 0,
            meeting_log: Vec::new(),
            recorder: Recorder::new(config.record_series),
            config,
        })
    }

    pub fn network(&self) -> &GridNetwork {
        &self.network
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> &Vehicle {
        &self.vehicles[id]
    }

    pub fn queue(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.queue.iter().copied()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn on_lattice(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.iter().filter(|v| v.position.is_some())
    }

    pub fn on_lattice_count(&self) -> usize {
        self.on_lattice().count()
    }

    pub fn population(&self) -> usize {
        self.on_lattice_count() + self.queue.len()
    }

    pub fn occupant(&self, street: StreetId, cell: usize) -> Option<VehicleId> {
        self.lattice.get(&self.network, street, cell)
    }

    pub fn conflicts_total(&self) -> u64 {
        self.conflicts_total
    }

    pub fn type_changes_total(&self) -> u64 {
        self.type_changes_total
    }

    pub fn meeting_log(&self) -> &[MeetingRecord] {
        &self.meeting_log
    }

    pub fn recorder(&self) -> &Recorder {
        &self.recorder
    }

    /// Order in which streets were updated during the last step.
    pub fn street_order(&self) -> &[StreetId] {
        &self.street_order
    }

    /// Moves a queued driver onto a free cell. Used for scripted scenarios.
    pub fn place_vehicle(&mut self, id: VehicleId, street: StreetId, cell: usize, speed: u32) -> Result<()> {
        if street >= NUM_STREETS || cell >= self.network.street_length() {
            return Err(Error::Domain(format!("no cell {cell} on street {street}")));
        }
        if speed > self.config.v_max {
            return Err(Error::Domain(format!("speed {speed} exceeds v_max")));
        }
        let Some(qpos) = self.queue.iter().position(|&q| q == id) else {
            return Err(Error::Domain(format!("vehicle {id} is not queued")));
        };
        if self.lattice.get(&self.network, street, cell).is_some() {
            return Err(Error::Domain(format!("cell {cell} on street {street} is occupied")));
        }
        self.queue.remove(qpos);
        self.lattice.set(&self.network, street, cell, Some(id));
        let v = &mut self.vehicles[id];
        v.position = Some(Position { street, cell });
        v.speed = speed;
        Ok(())
    }

    /// Overrides mutable per-driver attributes; for scripted scenarios.
    pub fn set_driver(&mut self, id: VehicleId, driver_type: DriverType, hold_steps: u32) {
        let v = &mut self.vehicles[id];
        v.driver_type = driver_type;
        v.hold_steps = hold_steps;
    }

    /// Enters queued drivers on free entry cells, visiting streets in this
    /// step's update order.
    pub fn spawn_from_queue(&mut self) {
        if self.config.p_new <= 0.0 {
            return;
        }
        for k in 0..self.street_order.len() {
            let street = self.street_order[k];
            if self.queue.is_empty() {
                break;
            }
            if self.lattice.get(&self.network, street, 0).is_some() {
                continue;
            }
            if self.rng.random::<f64>() >= self.config.p_new {
                continue;
            }
            let id = self.queue.pop_front().expect("queue checked non-empty");
            self.lattice.set(&self.network, street, 0, Some(id));
            let v = &mut self.vehicles[id];
            v.position = Some(Position { street, cell: 0 });
            v.speed = 0;
        }
    }

    /// Takes a vehicle off the lattice and appends it to the queue.
    pub(crate) fn recycle_vehicle(&mut self, id: VehicleId) {
        if let Some(pos) = self.vehicles[id].position {
            if self.lattice.get(&self.network, pos.street, pos.cell) == Some(id) {
                self.lattice.set(&self.network, pos.street, pos.cell, None);
            }
        }
        let redraw = match self.config.behavior {
            BehaviorModel::FixedRatio { p_co } => Some(assign_type_fixed(p_co, self.rng.random())),
            BehaviorModel::Imitation { .. } => None,
            BehaviorModel::Impatience { .. } => Some(DriverType::Co),
        };
        let v = &mut self.vehicles[id];
        v.position = None;
        v.speed = 0;
        v.hold_steps = 0;
        v.waiting_time = 0;
        v.waiting_now = false;
        v.met_with = None;
        v.speed_history.clear();
        if let Some(t) = redraw {
            v.driver_type = t;
        }
        self.queue.push_back(id);
    }

    /// Checks occupancy consistency, speed bounds and population size.
    pub fn check_invariants(&self) -> Result<()> {
        let net = &self.network;
        let mut seen = vec![false; self.vehicles.len()];
        for v in &self.vehicles {
            if v.speed > self.config.v_max {
                return Err(Error::Invariant(format!("vehicle {} speed {} > v_max", v.id, v.speed)));
            }
            if let Some(pos) = v.position {
                if self.lattice.get(net, pos.street, pos.cell) != Some(v.id) {
                    return Err(Error::Invariant(format!(
                        "vehicle {} at {:?} is not recorded in the lattice",
                        v.id, pos
                    )));
                }
            }
            if v.is_core && v.driver_type != DriverType::Co {
                return Err(Error::Invariant(format!("core vehicle {} is not CO", v.id)));
            }
        }
        let mut occupied = 0usize;
        for s in 0..NUM_STREETS {
            for c in 0..net.street_length() {
                if net.is_crossing(s, c) {
                    continue;
                }
                if let Some(id) = self.lattice.get(net, s, c) {
                    occupied += 1;
                    if self.vehicles[id].position != Some(Position { street: s, cell: c }) {
                        return Err(Error::Invariant(format!("stale occupant {id} at street {s} cell {c}")));
                    }
                    if std::mem::replace(&mut seen[id], true) {
                        return Err(Error::Invariant(format!("vehicle {id} occupies two cells")));
                    }
                }
            }
        }
        for j in 0..net.intersections().len() {
            if let Some(id) = self.lattice.junction(j) {
                occupied += 1;
                let pos = self.vehicles[id]
                    .position
                    .ok_or_else(|| Error::Invariant(format!("queued vehicle {id} in junction {j}")))?;
                if net.intersection_at(pos.street, pos.cell) != Some(j) {
                    return Err(Error::Invariant(format!("vehicle {id} in junction {j} has position {pos:?}")));
                }
                if std::mem::replace(&mut seen[id], true) {
                    return Err(Error::Invariant(format!("vehicle {id} occupies two cells")));
                }
            }
        }
        if occupied != self.on_lattice_count() {
            return Err(Error::Invariant(format!(
                "{occupied} occupied points for {} vehicles on the lattice",
                self.on_lattice_count()
            )));
        }
        for &q in &self.queue {
            if self.vehicles[q].position.is_some() {
                return Err(Error::Invariant(format!("queued vehicle {q} has a position")));
            }
        }
        if self.population() != self.config.max_vehicles {
            return Err(Error::Invariant(format!(
                "population {} != {}",
                self.population(),
                self.config.max_vehicles
            )));
        }
        Ok(())
    }
}

fn initial_driver(behavior: &BehaviorModel, rng: &mut ChaCha8Rng) -> (DriverType, bool) {
    match *behavior {
        BehaviorModel::FixedRatio { p_co } => (assign_type_fixed(p_co, rng.random()), false),
        BehaviorModel::Imitation {
            initial_p_de,
            core_fraction,
            ..
        } => {
            let is_core = rng.random::<f64>() < core_fraction;
            let de = rng.random::<f64>() < initial_p_de;
            if is_core || !de {
                (DriverType::Co, is_core)
            } else {
                (DriverType::De, false)
            }
        }
        BehaviorModel::Impatience { .. } => (DriverType::Co, false),
    }
}
