#![allow(dead_code)]

use trafficgame::{BehaviorModel, SimConfig, SimState};

/// A car of the reference model: `(id, cell, speed)`.
pub type Car = (usize, usize, u32);

/// Straight-road NaSch without random slowdown. `cars` is front first and
/// cars reaching `len` leave the road. With `junctions`, a car may not move
/// onto a junction cell whose next cell holds a car that stays put.
pub fn reference_step(cars: &[Car], len: usize, v_max: u32, junctions: Option<&[usize]>) -> Vec<Car> {
    let mut new_speed: Vec<u32> = Vec::with_capacity(cars.len());
    for (i, &(_, x, v)) in cars.iter().enumerate() {
        let mut gap = if i == 0 { u32::MAX } else { (cars[i - 1].1 - x - 1) as u32 };
        if let (Some(js), true) = (junctions, i > 0) {
            let leader = cars[i - 1].1;
            if new_speed[i - 1] == 0 && js.contains(&(leader - 1)) && leader - 1 > x {
                gap = gap.min((leader - 1 - x - 1) as u32);
            }
        }
        new_speed.push((v + 1).min(v_max).min(gap));
    }
    cars.iter()
        .zip(new_speed)
        .map(|(&(id, x, _), v)| (id, x + v as usize, v))
        .filter(|&(_, x, _)| x < len)
        .collect()
}

/// Simulator with one populated street, no spawning and no randomness.
pub fn quiet_engine(len: usize, crossings: [usize; 4], v_max: u32, clear_junction: bool, pool: usize) -> SimState {
    let mut c = SimConfig::new(BehaviorModel::FixedRatio { p_co: 1.0 });
    c.street_length = len;
    c.crossing_positions = crossings;
    c.v_max = v_max;
    c.p_slow = 0.0;
    c.p_new = 0.0;
    c.max_vehicles = pool;
    c.warmup_steps = 0;
    c.clear_junction = clear_junction;
    SimState::new(c).expect("valid quiet config")
}

/// Cars on `street`, front first.
pub fn street_cars(state: &SimState, street: usize) -> Vec<Car> {
    let mut cars: Vec<Car> = state
        .vehicles()
        .iter()
        .filter_map(|v| {
            let p = v.position?;
            (p.street == street).then_some((v.id, p.cell, v.speed))
        })
        .collect();
    cars.sort_by_key(|c| std::cmp::Reverse(c.1));
    cars
}

/// Minimal deterministic generator so test scenarios do not depend on the
/// simulator's own RNG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Result of comparing engine and reference over a scripted run.
pub struct Comparison {
    pub steps: usize,
    pub mismatch: Option<String>,
    pub cars_seen: usize,
}

/// Drives street 0 of the engine and the reference side by side. Cars are
/// placed initially from `initial`, and one more enters at cell 0 (speed 0)
/// whenever `schedule` says so and the cell is free.
pub fn compare_with_reference(
    len: usize,
    crossings: [usize; 4],
    v_max: u32,
    clear_junction: bool,
    initial: &[(usize, u32)],
    schedule: &[bool],
) -> Comparison {
    let pool = initial.len() + schedule.iter().filter(|&&b| b).count() + 1;
    let mut engine = quiet_engine(len, crossings, v_max, clear_junction, pool);
    let mut next_id = 0;
    let mut reference: Vec<Car> = Vec::new();
    let mut sorted: Vec<(usize, u32)> = initial.to_vec();
    sorted.sort_by_key(|c| std::cmp::Reverse(c.0));
    for &(cell, v) in &sorted {
        engine.place_vehicle(next_id, 0, cell, v).expect("free cell");
        reference.push((next_id, cell, v));
        next_id += 1;
    }
    let junctions: Vec<usize> = engine.network().street(0).crossing_cells.clone();
    let mut cars_seen = next_id;
    for (t, &enter) in schedule.iter().enumerate() {
        engine.step_network();
        reference = reference_step(&reference, len, v_max, clear_junction.then_some(&junctions[..]));
        let got = street_cars(&engine, 0);
        if got != reference {
            return Comparison {
                steps: t + 1,
                mismatch: Some(format!("step {}: engine {got:?} vs reference {reference:?}", t + 1)),
                cars_seen,
            };
        }
        if enter && reference.last().is_none_or(|c| c.1 > 0) {
            // the engine recycles exited cars into the queue; use the queue front
            let id = engine.queue().next().expect("pool is large enough");
            engine.place_vehicle(id, 0, 0, 0).expect("entry cell free");
            reference.push((id, 0, 0));
            cars_seen += 1;
        }
    }
    Comparison {
        steps: schedule.len(),
        mismatch: None,
        cars_seen,
    }
}
