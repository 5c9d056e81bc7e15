//! Estimating the share of rule-abiding drivers from observed meetings.
//!
//! Each meeting contributes two Bernoulli trials (one per driver, success =
//! CO), so `n` meetings give `m = 2n` trials with `Σξ` successes.

use crate::error::{Error, Result};
use crate::games::MeetingRecord;
use crate::state::DriverType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeetingObservation {
    pub eta_a: u8,
    pub eta_b: u8,
}

impl MeetingObservation {
    pub fn new(a: DriverType, b: DriverType) -> Self {
        let eta = |t: DriverType| u8::from(t == DriverType::Co);
        MeetingObservation {
            eta_a: eta(a),
            eta_b: eta(b),
        }
    }

    pub fn xi(&self) -> u64 {
        u64::from(self.eta_a + self.eta_b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObservationBatch {
    pub n: u64,
    pub sigma_xi: u64,
}

impl ObservationBatch {
    pub fn new(n: u64, sigma_xi: u64) -> Result<Self> {
        if sigma_xi > 2 * n {
            return Err(Error::Domain(format!("Σξ = {sigma_xi} exceeds 2n = {}", 2 * n)));
        }
        Ok(ObservationBatch { n, sigma_xi })
    }

    pub fn push(&mut self, obs: MeetingObservation) {
        self.n += 1;
        self.sigma_xi += obs.xi();
    }
}

impl FromIterator<MeetingObservation> for ObservationBatch {
    fn from_iter<I: IntoIterator<Item = MeetingObservation>>(iter: I) -> Self {
        let mut batch = ObservationBatch::default();
        for o in iter {
            batch.push(o);
        }
        batch
    }
}

/// Constants of `(α + Σξ) / (β + 2n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinimaxConstants {
    /// `α = √m / 2`, `β = √m` with `m = 2n`: constant squared-error risk.
    SquaredError,
    Fixed { alpha: f64, beta: f64 },
}

pub fn minimax_estimate(batch: ObservationBatch) -> Result<f64> {
    minimax_estimate_with(batch, MinimaxConstants::SquaredError)
}

pub fn minimax_estimate_with(batch: ObservationBatch, constants: MinimaxConstants) -> Result<f64> {
    if batch.n == 0 {
        return Err(Error::NoData("minimax estimate needs at least one meeting".into()));
    }
    let m = 2.0 * batch.n as f64;
    let (alpha, beta) = match constants {
        MinimaxConstants::SquaredError => (m.sqrt() / 2.0, m.sqrt()),
        MinimaxConstants::Fixed { alpha, beta } => (alpha, beta),
    };
    Ok((alpha + batch.sigma_xi as f64) / (beta + m))
}

/// Posterior mean under a `Beta(prior_alpha, prior_beta)` prior.
pub fn bayes_estimate(batch: ObservationBatch, prior_alpha: f64, prior_beta: f64) -> Result<f64> {
    if !(prior_alpha > 0.0 && prior_beta > 0.0) {
        return Err(Error::Config(format!(
            "prior parameters must be positive, got ({prior_alpha}, {prior_beta})"
        )));
    }
    Ok((prior_alpha + batch.sigma_xi as f64) / (prior_alpha + prior_beta + 2.0 * batch.n as f64))
}

/// Turns logged meetings into a batch using the drivers' true types.
pub fn harvest_observations(log: &[MeetingRecord]) -> Result<ObservationBatch> {
    if log.is_empty() {
        return Err(Error::NoData("no meetings were logged".into()));
    }
    Ok(log
        .iter()
        .map(|r| MeetingObservation::new(r.left_type, r.right_type))
        .collect())
}
