//! Driver-type dynamics.
//!
//! Three behavior models are supported:
//!
//! * [`BehaviorModel::FixedRatio`]: every driver entering the queue is drawn
//!   CO with a fixed probability.
//! * [`BehaviorModel::Imitation`]: drivers count what kind of opponents they
//!   meet and, every `tau` steps, copy a type with probability proportional
//!   to those counts. A core of drivers always stays CO.
//! * [`BehaviorModel::Impatience`]: everyone starts CO; a waiting driver
//!   turns DE according to a Weibull waiting-threshold distribution and
//!   returns to CO after crossing an intersection.

use rand::Rng;

use crate::error::{Error, Result};
use crate::state::{DriverType, SimState, Vehicle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardMode {
    /// Probability that the threshold falls in `(w, w + 1]` given it exceeds `w`.
    DiscreteConditional,
    /// The hazard rate itself, clipped to 1.
    RawClipped,
}

impl std::str::FromStr for HazardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete_conditional" | "discrete" => Ok(HazardMode::DiscreteConditional),
            "raw_clipped" | "raw" => Ok(HazardMode::RawClipped),
            other => Err(Error::Config(format!("unknown hazard mode '{other}'"))),
        }
    }
}

impl HazardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HazardMode::DiscreteConditional => "discrete_conditional",
            HazardMode::RawClipped => "raw_clipped",
        }
    }
}

/// Scale and shape of the waiting-threshold distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub a: f64,
    pub b: f64,
}

impl Default for WeibullParams {
    fn default() -> Self {
        WeibullParams { a: 30.0, b: 2.92 }
    }
}

impl WeibullParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("Weibull parameters must be positive, got a={a}, b={b}")));
        }
        Ok(WeibullParams { a, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorModel {
    FixedRatio {
        p_co: f64,
    },
    Imitation {
        initial_p_de: f64,
        core_fraction: f64,
        tau: u64,
    },
    Impatience {
        weibull: WeibullParams,
        hazard_mode: HazardMode,
    },
}

impl BehaviorModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability")))
            }
        };
        match *self {
            BehaviorModel::FixedRatio { p_co } => prob("p_co", p_co),
            BehaviorModel::Imitation {
                initial_p_de,
                core_fraction,
                tau,
            } => {
                prob("initial_p_de", initial_p_de)?;
                prob("core_fraction", core_fraction)?;
                if tau == 0 {
                    return Err(Error::Config("tau must be at least 1".into()));
                }
                Ok(())
            }
            BehaviorModel::Impatience { weibull, .. } => WeibullParams::new(weibull.a, weibull.b).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BehaviorModel::FixedRatio { .. } => "fixed_ratio",
            BehaviorModel::Imitation { .. } => "imitation",
            BehaviorModel::Impatience { .. } => "impatience",
        }
    }
}

pub fn assign_type_fixed(p_co: f64, draw: f64) -> DriverType {
    if draw < p_co {
        DriverType::Co
    } else {
        DriverType::De
    }
}

/// What a driver could tell about the opponent of a meeting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    SawCo,
    SawDe,
    /// A yielding cooperator cannot tell what the other driver was.
    Ambiguous,
}

pub fn record_interaction(observer: &mut Vehicle, observed: Observation) {
    match observed {
        Observation::SawCo => observer.add_obs_halves(2, 0),
        Observation::SawDe => observer.add_obs_halves(0, 2),
        Observation::Ambiguous => observer.add_obs_halves(1, 1),
    }
}

/// `(P_C, P_D)` from the observation counts, `None` when nothing was seen.
pub fn imitation_probability(f_c: f64, f_d: f64) -> Option<(f64, f64)> {
    let total = f_c + f_d;
    if total <= 0.0 {
        return None;
    }
    let p_d = f_d / total;
    Some((1.0 - p_d, p_d))
}

pub fn weibull_cdf(x: f64, params: WeibullParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -(-(x / params.a).powf(params.b)).exp_m1()
}

/// `1 - F(x)`, computed directly so it keeps full relative precision in
/// the far tail.
pub fn weibull_survival(x: f64, params: WeibullParams) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    (-(x / params.a).powf(params.b)).exp()
}

pub fn hazard(x: f64, params: WeibullParams) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("hazard is defined for x > 0, got {x}")));
    }
    Ok(params.b / params.a * (x / params.a).powf(params.b - 1.0))
}

/// Per-step probability that a driver who has waited `waiting_time` steps
/// turns DE.
pub fn change_probability(waiting_time: u32, params: WeibullParams, mode: HazardMode) -> f64 {
    let w = f64::from(waiting_time);
    match mode {
        HazardMode::DiscreteConditional => {
            // 1 - S(w+1)/S(w) with S = 1 - F, evaluated in log space.
            let cum = |x: f64| (x / params.a).powf(params.b);
            let p = -(-(cum(w + 1.0) - cum(w))).exp_m1();
            p.clamp(0.0, 1.0)
        }
        HazardMode::RawClipped => {
            let h = hazard(w.max(1.0), params).expect("argument is at least 1");
            h.min(1.0)
        }
    }
}

/// True when the mean of the recorded speeds is at most 0.2.
pub fn jam_check(speed_history: &[u32]) -> bool {
    if speed_history.is_empty() {
        return false;
    }
    let sum: u32 = speed_history.iter().sum();
    // mean <= 0.2  <=>  5 * sum <= n
    5 * sum as usize <= speed_history.len()
}

impl SimState {
    /// Redraws the type of every non-core driver from its observation
    /// counts and starts a new counting cycle.
    pub fn imitation_update(&mut self) {
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            if v.is_core {
                self.vehicles[i].driver_type = DriverType::Co;
                self.vehicles[i].reset_observations();
                continue;
            }
            if let Some((_, p_d)) = imitation_probability(v.obs_count_co(), v.obs_count_de()) {
                let draw: f64 = self.rng.random();
                self.vehicles[i].driver_type = if draw < p_d { DriverType::De } else { DriverType::Co };
            }
            self.vehicles[i].reset_observations();
        }
    }

    /// Lets waiting cooperators lose patience. Returns the number of
    /// CO→DE changes.
    pub fn impatience_step(&mut self) -> u64 {
        let BehaviorModel::Impatience { weibull, hazard_mode } = self.config.behavior else {
            return 0;
        };
        let mut changes = 0;
        for i in 0..self.vehicles.len() {
            let v = &self.vehicles[i];
            if v.position.is_none() || !v.waiting_now || v.driver_type != DriverType::Co {
                continue;
            }
            let p = change_probability(v.waiting_time, weibull, hazard_mode);
            if self.rng.random::<f64>() < p {
                self.vehicles[i].driver_type = DriverType::De;
                changes += 1;
            }
        }
        changes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const STANDARD: WeibullParams = WeibullParams { a: 30.0, b: 2.92 };

    #[test]
    fn fixed_assignment_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let d: f64 = rng.random();
            assert_eq!(assign_type_fixed(1.0, d), DriverType::Co);
            assert_eq!(assign_type_fixed(0.0, d), DriverType::De);
        }
    }

    #[test]
    fn fixed_assignment_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let co = (0..n)
            .filter(|_| assign_type_fixed(0.75, rng.random()) == DriverType::Co)
            .count();
        let frac = co as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }

    #[test]
    fn interaction_counts() {
        let mut v = Vehicle::new(0, DriverType::Co, false);
        record_interaction(&mut v, Observation::Ambiguous);
        assert_eq!((v.obs_count_co(), v.obs_count_de()), (0.5, 0.5));
        record_interaction(&mut v, Observation::SawCo);
        assert_eq!((v.obs_count_co(), v.obs_count_de()), (1.5, 0.5));
        record_interaction(&mut v, Observation::SawDe);
        assert_eq!((v.obs_count_co(), v.obs_count_de()), (1.5, 1.5));
    }

    #[test]
    fn imitation_probabilities() {
        assert_eq!(imitation_probability(1.0, 1.0), Some((0.5, 0.5)));
        assert_eq!(imitation_probability(3.0, 1.0), Some((0.75, 0.25)));
        assert_eq!(imitation_probability(0.0, 0.0), None);
        assert_eq!(imitation_probability(0.0, 4.0), Some((0.0, 1.0)));
    }

    #[test]
    fn weibull_cdf_values() {
        let f = weibull_cdf(30.0, STANDARD);
        assert!((f - (1.0 - (-1.0f64).exp())).abs() <= 2.0 * f64::EPSILON);
        assert_eq!(weibull_cdf(0.0, STANDARD), 0.0);
        assert_eq!(weibull_cdf(-3.0, STANDARD), 0.0);
        assert_eq!(weibull_cdf(1e6, STANDARD), 1.0);
    }

    #[test]
    fn hazard_values() {
        let h = hazard(30.0, STANDARD).unwrap();
        assert!((h - 2.92 / 30.0).abs() < 1e-15);
        let exp = WeibullParams { a: 12.0, b: 1.0 };
        for x in [0.1, 1.0, 7.0, 100.0] {
            assert!((hazard(x, exp).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        }
        assert!(matches!(hazard(0.0, STANDARD), Err(Error::Domain(_))));
        let mut prev = 0.0;
        for k in 1..200 {
            let h = hazard(k as f64 * 0.5, STANDARD).unwrap();
            assert!(h > prev);
            prev = h;
        }
    }

    #[test]
    fn change_probability_at_zero_wait() {
        // F(1) = 1 - exp(-(1/30)^2.92), evaluated independently
        let expected = 1.0 - (-(1.0f64 / 30.0).powf(2.92)).exp();
        let p = change_probability(0, STANDARD, HazardMode::DiscreteConditional);
        assert!((p - expected).abs() < 1e-12);
        // frozen from an independent evaluation (Python math): 4.861780851384001e-05
        assert!((p - 4.861780851384001e-05).abs() < 1e-15, "{p}");
    }

    #[test]
    fn change_probability_matches_cdf_ratio() {
        for w in [1u32, 5, 10, 30, 60] {
            let f0 = weibull_cdf(w as f64, STANDARD);
            let f1 = weibull_cdf(w as f64 + 1.0, STANDARD);
            let expected = (f1 - f0) / (1.0 - f0);
            let p = change_probability(w, STANDARD, HazardMode::DiscreteConditional);
            assert!((p - expected).abs() < 1e-10, "w={w}: {p} vs {expected}");
        }
    }

    #[test]
    fn change_probability_tends_to_one() {
        let p = change_probability(500, STANDARD, HazardMode::DiscreteConditional);
        assert!(p > 0.999_999);
        assert_eq!(change_probability(500, STANDARD, HazardMode::RawClipped), 1.0);
        let raw0 = change_probability(0, STANDARD, HazardMode::RawClipped);
        assert!((raw0 - hazard(1.0, STANDARD).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn jam_rule() {
        assert!(jam_check(&[0, 0, 0, 0, 1]));
        assert!(!jam_check(&[1, 1, 1, 1, 1]));
        assert!(jam_check(&[0, 0, 0, 0, 0]));
        assert!(!jam_check(&[0, 0, 0, 1, 1]));
        assert!(jam_check(&[0]));
        assert!(!jam_check(&[1]));
        assert!(!jam_check(&[]));
    }

    #[test]
    fn hazard_mode_parse() {
        assert_eq!("raw_clipped".parse::<HazardMode>().unwrap(), HazardMode::RawClipped);
        assert!("nope".parse::<HazardMode>().is_err());
    }

    /// Composite Simpson on the hazard after substituting t = s², which
    /// turns the t^(b-1) endpoint behavior into a smooth s^(2b-1).
    fn integrated_hazard(x: f64, p: WeibullParams) -> f64 {
        let n = 20_000;
        let upper = x.sqrt();
        let step = upper / n as f64;
        let g = |s: f64| if s <= 0.0 { 0.0 } else { 2.0 * s * hazard(s * s, p).unwrap() };
        let mut acc = g(0.0) + g(upper);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(k as f64 * step);
        }
        acc * step / 3.0
    }

    #[test]
    fn survival_equals_exp_of_integrated_hazard() {
        for k in 1..=400 {
            let x = 0.5 * k as f64;
            let survival = weibull_survival(x, STANDARD);
            let via_hazard = (-integrated_hazard(x, STANDARD)).exp();
            let rel = ((survival - via_hazard) / via_hazard).abs();
            assert!(rel < 1e-9, "x={x}: rel {rel}");
            assert!(((1.0 - weibull_cdf(x, STANDARD)) - survival).abs() <= 2.0 * f64::EPSILON);
        }
    }

    proptest! {
        #[test]
        fn imitation_is_scale_invariant(fc in 0u32..200, fd in 0u32..200, k in 1u32..50) {
            let a = imitation_probability(fc as f64 / 2.0, fd as f64 / 2.0);
            let b = imitation_probability((fc * k) as f64 / 2.0, (fd * k) as f64 / 2.0);
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    prop_assert!((a.0 - b.0).abs() < 1e-15);
                    prop_assert!((a.1 - b.1).abs() < 1e-15);
                }
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn imitation_probabilities_sum_to_one(fc in 0u32..1000, fd in 0u32..1000) {
            if let Some((pc, pd)) = imitation_probability(fc as f64 / 2.0, fd as f64 / 2.0) {
                prop_assert_eq!(pc + pd, 1.0);
            }
        }

        #[test]
        fn change_probability_in_unit_interval(w in 0u32..10_000, a in 0.5f64..100.0, b in 0.3f64..6.0) {
            let p = WeibullParams { a, b };
            for mode in [HazardMode::DiscreteConditional, HazardMode::RawClipped] {
                let c = change_probability(w, p, mode);
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }
    }
}
