//! Meetings of two drivers in front of a free junction and their
//! resolution through a 2×2 payoff table.
//!
//! A meeting happens when both approach cells of a junction (the cell right
//! before it on the horizontal and on the vertical street) are occupied and
//! the junction point itself is empty. The right-hand rule decides who is
//! the *left* (yielding) and who is the *right* (priority) driver; the
//! payoff table then turns the pair of driver types into hold penalties.

use rand::seq::SliceRandom;

use crate::behavior::{record_interaction, BehaviorModel, Observation};
use crate::network::{right_of_way, IntersectionId, Priority};
use crate::state::{DriverType, SimState, VehicleId};

/// Time losses `(left, right)` for each `(left type, right type)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayoffTable {
    pub co_co: (u32, u32),
    pub co_de: (u32, u32),
    pub de_co: (u32, u32),
    pub de_de: (u32, u32),
    /// Costs include the step needed to cross, so holds are one less.
    pub costs_are_crossing_inclusive: bool,
}

impl PayoffTable {
    /// Fixed-ratio and imitation drivers: yielding costs 2 (1 wait + 1
    /// crossing), a defecting yielder costs both 3, two defectors 50.
    pub fn model1(conflict_cost: u32, collision_cost: u32) -> Self {
        PayoffTable {
            co_co: (2, 1),
            co_de: (2, 1),
            de_co: (conflict_cost, conflict_cost),
            de_de: (collision_cost, collision_cost),
            costs_are_crossing_inclusive: true,
        }
    }

    /// Impatient drivers: costs are direct waiting times.
    pub fn model3() -> Self {
        PayoffTable {
            co_co: (2, 0),
            co_de: (2, 0),
            de_co: (0, 2),
            de_de: (3, 1),
            costs_are_crossing_inclusive: false,
        }
    }

    pub fn default_for(behavior: &BehaviorModel) -> Self {
        match behavior {
            BehaviorModel::FixedRatio { .. } | BehaviorModel::Imitation { .. } => Self::model1(3, 50),
            BehaviorModel::Impatience { .. } => Self::model3(),
        }
    }

    pub fn costs(&self, left: DriverType, right: DriverType) -> (u32, u32) {
        match (left, right) {
            (DriverType::Co, DriverType::Co) => self.co_co,
            (DriverType::Co, DriverType::De) => self.co_de,
            (DriverType::De, DriverType::Co) => self.de_co,
            (DriverType::De, DriverType::De) => self.de_de,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Meeting {
    pub intersection_id: IntersectionId,
    /// Yields under the right-hand rule.
    pub left_vehicle: VehicleId,
    /// Has priority under the right-hand rule.
    pub right_vehicle: VehicleId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    BothCooperate,
    PriorityDefects,
    YielderDefects,
    BothDefect,
}

impl Scenario {
    pub fn of(left: DriverType, right: DriverType) -> Self {
        match (left, right) {
            (DriverType::Co, DriverType::Co) => Scenario::BothCooperate,
            (DriverType::Co, DriverType::De) => Scenario::PriorityDefects,
            (DriverType::De, DriverType::Co) => Scenario::YielderDefects,
            (DriverType::De, DriverType::De) => Scenario::BothDefect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingOutcome {
    pub left_hold: u32,
    pub right_hold: u32,
    pub is_conflict: bool,
    pub scenario: Scenario,
}

/// One resolved meeting, kept for the driver-ratio estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingRecord {
    pub step: u64,
    pub intersection_id: IntersectionId,
    pub left_vehicle: VehicleId,
    pub right_vehicle: VehicleId,
    pub left_type: DriverType,
    pub right_type: DriverType,
    pub left_hold: u32,
    pub right_hold: u32,
    pub is_conflict: bool,
}

pub fn resolve_meeting(payoffs: &PayoffTable, left: DriverType, right: DriverType) -> MeetingOutcome {
    let (lc, rc) = payoffs.costs(left, right);
    let to_hold = |c: u32| {
        if payoffs.costs_are_crossing_inclusive {
            c.saturating_sub(1)
        } else {
            c
        }
    };
    let scenario = Scenario::of(left, right);
    MeetingOutcome {
        left_hold: to_hold(lc),
        right_hold: to_hold(rc),
        is_conflict: scenario == Scenario::BothDefect,
        scenario,
    }
}

/// What each participant learns about the other. A cooperating yielder
/// gives way to anyone and cannot tell the types apart.
pub fn observations(left: DriverType, right: DriverType) -> (Observation, Observation) {
    let saw = |t: DriverType| match t {
        DriverType::Co => Observation::SawCo,
        DriverType::De => Observation::SawDe,
    };
    let left_obs = if left == DriverType::Co {
        Observation::Ambiguous
    } else {
        saw(right)
    };
    (left_obs, saw(left))
}

impl SimState {
    /// Vehicle sitting on the cell right before the junction, if any.
    fn approacher(&self, street: usize, junction_cell: usize) -> Option<VehicleId> {
        let cell = junction_cell.checked_sub(1)?;
        let id = self.lattice.get(&self.network, street, cell)?;
        let pos = self.vehicles[id].position?;
        let exit = junction_cell + 1;
        let blocked = self.config.clear_junction
            && exit < self.network.street_length()
            && self.lattice.get(&self.network, street, exit).is_some();
        let free = self.vehicles[id].hold_steps == 0;
        (pos.street == street && pos.cell == cell && !blocked && free).then_some(id)
    }

    /// Meetings at free junctions, visiting junctions in a fresh random order.
    pub fn detect_meetings(&mut self) -> Vec<Meeting> {
        let mut order: Vec<IntersectionId> = (0..self.network.intersections().len()).collect();
        order.shuffle(&mut self.rng);
        let mut meetings = Vec::new();
        for j in order {
            if self.lattice.junction(j).is_some() {
                continue;
            }
            let ix = *self.network.intersection(j);
            let (Some(h), Some(v)) = (
                self.approacher(ix.h_street, ix.h_cell),
                self.approacher(ix.v_street, ix.v_cell),
            ) else {
                continue;
            };
            if self.vehicles[h].met_with == Some(v) && self.vehicles[v].met_with == Some(h) {
                continue;
            }
            let h_dir = self.network.street(ix.h_street).direction;
            let v_dir = self.network.street(ix.v_street).direction;
            let (left, right) = match right_of_way(h_dir, v_dir).expect("streets are perpendicular") {
                Priority::AHasPriority => (v, h),
                Priority::BHasPriority => (h, v),
            };
            meetings.push(Meeting {
                intersection_id: j,
                left_vehicle: left,
                right_vehicle: right,
            });
        }
        meetings
    }

    /// Resolves and applies every meeting. Returns the number of conflicts.
    pub fn resolve_and_apply(&mut self, meetings: &[Meeting]) -> u64 {
        let outcomes: Vec<MeetingOutcome> = meetings
            .iter()
            .map(|m| {
                let l = self.vehicles[m.left_vehicle].driver_type;
                let r = self.vehicles[m.right_vehicle].driver_type;
                resolve_meeting(&self.config.payoffs, l, r)
            })
            .collect();
        self.apply_outcomes(meetings, &outcomes)
    }

    pub fn apply_outcomes(&mut self, meetings: &[Meeting], outcomes: &[MeetingOutcome]) -> u64 {
        let observe = matches!(self.config.behavior, BehaviorModel::Imitation { .. })
            && self.step >= self.config.warmup_steps;
        let mut conflicts = 0;
        for (m, o) in meetings.iter().zip(outcomes) {
            let left_type = self.vehicles[m.left_vehicle].driver_type;
            let right_type = self.vehicles[m.right_vehicle].driver_type;
            {
                let l = &mut self.vehicles[m.left_vehicle];
                l.hold_steps = l.hold_steps.max(o.left_hold);
                l.met_with = Some(m.right_vehicle);
            }
            {
                let r = &mut self.vehicles[m.right_vehicle];
                r.hold_steps = r.hold_steps.max(o.right_hold);
                r.met_with = Some(m.left_vehicle);
            }
            if observe {
                let (lo, ro) = observations(left_type, right_type);
                record_interaction(&mut self.vehicles[m.left_vehicle], lo);
                record_interaction(&mut self.vehicles[m.right_vehicle], ro);
            }
            if o.is_conflict {
                conflicts += 1;
            }
            if self.config.record_meetings {
                self.meeting_log.push(MeetingRecord {
                    step: self.step,
                    intersection_id: m.intersection_id,
                    left_vehicle: m.left_vehicle,
                    right_vehicle: m.right_vehicle,
                    left_type,
                    right_type,
                    left_hold: o.left_hold,
                    right_hold: o.right_hold,
                    is_conflict: o.is_conflict,
                });
            }
        }
        self.conflicts_total += conflicts;
        self.counters.conflicts += conflicts;
        conflicts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{HazardMode, WeibullParams};
    use crate::state::SimConfig;
    use DriverType::{Co, De};

    fn m1() -> PayoffTable {
        PayoffTable::model1(3, 50)
    }

    #[test]
    fn model1_outcomes() {
        let o = resolve_meeting(&m1(), Co, Co);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (1, 0, false));
        let o = resolve_meeting(&m1(), Co, De);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (1, 0, false));
        let o = resolve_meeting(&m1(), De, Co);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (2, 2, false));
        let o = resolve_meeting(&m1(), De, De);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (49, 49, true));
        assert_eq!(o.scenario, Scenario::BothDefect);
    }

    #[test]
    fn model3_outcomes() {
        let t = PayoffTable::model3();
        for r in [Co, De] {
            let o = resolve_meeting(&t, Co, r);
            assert_eq!((o.left_hold, o.right_hold), (2, 0));
        }
        let o = resolve_meeting(&t, De, Co);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (0, 2, false));
        let o = resolve_meeting(&t, De, De);
        assert_eq!((o.left_hold, o.right_hold, o.is_conflict), (3, 1, true));
    }

    #[test]
    fn model1_symmetry_properties() {
        for l in [Co, De] {
            for r in [Co, De] {
                let o = resolve_meeting(&m1(), l, r);
                assert_eq!(o.left_hold == o.right_hold, l == De);
                assert_eq!(o.is_conflict, l == De && r == De);
                if l == Co {
                    assert_eq!(o.right_hold, 0);
                }
            }
        }
    }

    #[test]
    fn observation_rules() {
        assert_eq!(observations(Co, De), (Observation::Ambiguous, Observation::SawCo));
        assert_eq!(observations(De, Co), (Observation::SawCo, Observation::SawDe));
        assert_eq!(observations(De, De), (Observation::SawDe, Observation::SawDe));
    }

    fn state(behavior: BehaviorModel) -> SimState {
        let mut c = SimConfig::new(behavior);
        c.max_vehicles = 10;
        c.warmup_steps = 0;
        c.record_meetings = true;
        SimState::new(c).unwrap()
    }

    #[test]
    fn meeting_roles_follow_right_hand_rule() {
        let mut s = state(BehaviorModel::FixedRatio { p_co: 1.0 });
        // junction (row 3, col 1): street 3 is westbound, street 5 northbound
        let ix = *s.network().intersection(13);
        assert_eq!((ix.h_street, ix.v_street), (3, 5));
        s.place_vehicle(0, 3, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, 5, ix.v_cell - 1, 0).unwrap();
        let m = s.detect_meetings();
        assert_eq!(m.len(), 1);
        // a northbound driver sees a westbound one on its right: westbound goes first
        assert_eq!(m[0].right_vehicle, 0);
        assert_eq!(m[0].left_vehicle, 1);

        // eastbound meets northbound: the northbound driver has priority
        let mut s = state(BehaviorModel::FixedRatio { p_co: 1.0 });
        let ix = *s.network().intersection(1);
        assert_eq!((ix.h_street, ix.v_street), (0, 5));
        s.place_vehicle(0, 0, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, 5, ix.v_cell - 1, 0).unwrap();
        let m = s.detect_meetings();
        assert_eq!((m[0].right_vehicle, m[0].left_vehicle), (1, 0));
    }

    #[test]
    fn single_approacher_or_busy_junction_gives_no_meeting() {
        let mut s = state(BehaviorModel::FixedRatio { p_co: 1.0 });
        let ix = *s.network().intersection(0);
        s.place_vehicle(0, ix.h_street, ix.h_cell - 1, 0).unwrap();
        assert!(s.detect_meetings().is_empty());
        s.place_vehicle(1, ix.v_street, ix.v_cell - 1, 0).unwrap();
        s.place_vehicle(2, ix.h_street, ix.h_cell, 0).unwrap();
        assert!(s.detect_meetings().is_empty());
    }

    #[test]
    fn held_or_blocked_approacher_does_not_meet() {
        let mut s = state(BehaviorModel::FixedRatio { p_co: 1.0 });
        let ix = *s.network().intersection(5);
        s.place_vehicle(0, ix.h_street, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, ix.v_street, ix.v_cell - 1, 0).unwrap();
        s.vehicles[0].hold_steps = 1;
        assert!(s.detect_meetings().is_empty());
        s.vehicles[0].hold_steps = 0;
        s.place_vehicle(2, ix.v_street, ix.v_cell + 1, 0).unwrap();
        assert!(s.detect_meetings().is_empty());
        s.config.clear_junction = false;
        assert_eq!(s.detect_meetings().len(), 1);
    }

    #[test]
    fn holds_compose_by_max_and_conflicts_count() {
        let mut s = state(BehaviorModel::FixedRatio { p_co: 0.0 });
        let ix = *s.network().intersection(5);
        s.place_vehicle(0, ix.h_street, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, ix.v_street, ix.v_cell - 1, 0).unwrap();
        let meetings = s.detect_meetings();
        let left = meetings[0].left_vehicle;
        s.vehicles[left].hold_steps = 60;
        let conflicts = s.resolve_and_apply(&meetings);
        assert_eq!(conflicts, 1);
        assert_eq!(s.conflicts_total(), 1);
        assert_eq!(s.vehicle(left).hold_steps, 60);
        assert_eq!(s.vehicle(meetings[0].right_vehicle).hold_steps, 49);
        assert_eq!(s.meeting_log().len(), 1);
        // the same pair is not resolved twice
        assert!(s.detect_meetings().is_empty());
    }

    #[test]
    fn small_hold_does_not_shorten_existing_one() {
        let mut s = state(BehaviorModel::Impatience {
            weibull: WeibullParams::default(),
            hazard_mode: HazardMode::DiscreteConditional,
        });
        let ix = *s.network().intersection(10);
        s.place_vehicle(0, ix.h_street, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, ix.v_street, ix.v_cell - 1, 0).unwrap();
        let meetings = s.detect_meetings();
        let right = meetings[0].right_vehicle;
        s.vehicles[right].hold_steps = 3;
        s.resolve_and_apply(&meetings);
        assert_eq!(s.vehicle(right).hold_steps, 3);
        assert_eq!(s.vehicle(meetings[0].left_vehicle).hold_steps, 2);
    }

    #[test]
    fn imitation_meetings_feed_counters() {
        let mut s = state(BehaviorModel::Imitation {
            initial_p_de: 0.0,
            core_fraction: 0.0,
            tau: 500,
        });
        let ix = *s.network().intersection(6);
        s.place_vehicle(0, ix.h_street, ix.h_cell - 1, 0).unwrap();
        s.place_vehicle(1, ix.v_street, ix.v_cell - 1, 0).unwrap();
        let meetings = s.detect_meetings();
        let (l, r) = (meetings[0].left_vehicle, meetings[0].right_vehicle);
        s.vehicles[r].driver_type = De;
        s.resolve_and_apply(&meetings);
        assert_eq!((s.vehicle(l).obs_count_co(), s.vehicle(l).obs_count_de()), (0.5, 0.5));
        assert_eq!((s.vehicle(r).obs_count_co(), s.vehicle(r).obs_count_de()), (1.0, 0.0));
    }
}
