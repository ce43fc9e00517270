//! Closed-form stability theory of the two-station adaptive polling system.
//!
//! Station 2 is served exhaustively. Station 1 gets one service per cycle, or
//! up to `1 + m` when the server found station 2 empty at the cycle start.
//! With infinitely many customers at station 1 the indicator "station 2 is
//! non-empty when the server returns" is a two-state Markov chain; its
//! regeneration cycle gives the maximal station-1 throughput `r`, and the
//! system is stable exactly when `lambda2 * b2 < 1` and `r > lambda1`.

use serde::{Deserialize, Serialize};

use crate::distributions::ServiceDistribution;
use crate::error::{Error, Result};

/// All primitives of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Poisson arrival rate at station 1.
    pub lambda1: f64,
    /// Poisson arrival rate at station 2.
    pub lambda2: f64,
    /// Mean of the exponential one-way travel time; zero means instantaneous.
    pub gamma: f64,
    /// Extra station-1 services granted in a modified cycle.
    pub m: u32,
    pub b1: ServiceDistribution,
    pub b2: ServiceDistribution,
}

impl SystemParams {
    pub fn new(
        lambda1: f64,
        lambda2: f64,
        gamma: f64,
        m: u32,
        b1: ServiceDistribution,
        b2: ServiceDistribution,
    ) -> Result<Self> {
        let params = Self {
            lambda1,
            lambda2,
            gamma,
            m,
            b1,
            b2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("rate must be finite and > 0, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(
                "gamma",
                format!("mean travel time must be finite and >= 0, got {}", self.gamma),
            ));
        }
        for (field, d) in [("b1", &self.b1), ("b2", &self.b2)] {
            d.validate().map_err(|e| Error::invalid(field, e.to_string()))?;
        }
        Ok(())
    }

    /// Same system with a different station-1 arrival rate.
    pub fn with_lambda1(&self, lambda1: f64) -> Result<Self> {
        let mut p = self.clone();
        p.lambda1 = lambda1;
        p.validate()?;
        Ok(p)
    }

    pub fn b1_mean(&self) -> f64 {
        self.b1.mean()
    }

    pub fn b2_mean(&self) -> f64 {
        self.b2.mean()
    }

    /// Load of station 2, `lambda2 * b2`.
    pub fn rho(&self) -> f64 {
        self.lambda2 * self.b2_mean()
    }

    /// Total load, `lambda1 * b1 + lambda2 * b2`.
    pub fn rho0(&self) -> f64 {
        self.lambda1 * self.b1_mean() + self.rho()
    }

    fn require_station2_stable(&self) -> Result<f64> {
        let rho = self.rho();
        if rho < 1.0 {
            Ok(rho)
        } else {
            Err(Error::Unstable2 { rho })
        }
    }
}

/// Transition probabilities of the two-state indicator chain (0 = station 2
/// found empty).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionProbs {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryChainQuantities {
    /// Probability of no station-2 arrival during both travels of a cycle.
    pub q: f64,
    /// Transform of the station-1 service time at `lambda2`.
    pub beta: f64,
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub e_nu: f64,
    pub e_t: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub rho: f64,
    pub rho0: f64,
    pub stab1_holds: bool,
    /// Saturated station-1 service rate; absent when station 2 is overloaded.
    pub r: Option<f64>,
    /// `r - lambda1`.
    pub margin: Option<f64>,
    pub stable: bool,
    pub stab3_holds: bool,
}

/// Probability that no station-2 customer arrives during one travel,
/// `1 / (1 + lambda2 * gamma)`.
pub fn travel_no_arrival_prob(params: &SystemParams) -> f64 {
    1.0 / (1.0 + params.lambda2 * params.gamma)
}

/// `B1*(lambda2)`: probability of no station-2 arrival during one station-1 service.
pub fn beta(params: &SystemParams) -> Result<f64> {
    params.b1.laplace(params.lambda2)
}

fn transition_probs_from(q: f64, beta: f64, m: u32) -> TransitionProbs {
    let p10 = q * beta;
    let p00 = p10 * beta.powi(m as i32);
    TransitionProbs {
        p00,
        p01: 1.0 - p00,
        p10,
        p11: 1.0 - p10,
    }
}

pub fn transition_probs(params: &SystemParams) -> Result<TransitionProbs> {
    let a = travel_no_arrival_prob(params);
    Ok(transition_probs_from(a * a, beta(params)?, params.m))
}

fn nu_from(p: &TransitionProbs) -> f64 {
    1.0 + p.p01 / p.p10
}

/// Mean number of cycles between successive visits to "station 2 empty".
pub fn expected_nu(params: &SystemParams) -> Result<f64> {
    Ok(nu_from(&transition_probs(params)?))
}

/// Mean M/G/1 busy period at station 2, `b2 / (1 - rho)`.
pub fn busy_period_mean(params: &SystemParams) -> Result<f64> {
    let rho = params.require_station2_stable()?;
    Ok(params.b2_mean() / (1.0 - rho))
}

/// Mean regeneration period of the saturated system.
pub fn expected_cycle_time(params: &SystemParams) -> Result<f64> {
    let rho = params.require_station2_stable()?;
    let e_nu = expected_nu(params)?;
    let b1 = params.b1_mean();
    let m = params.m as f64;
    Ok(((2.0 * params.gamma + b1) * e_nu + m * b1) / (1.0 - rho))
}

/// Saturated station-1 service rate `r = (E nu + m) / E T`.
pub fn service_rate(params: &SystemParams) -> Result<f64> {
    let rho = params.require_station2_stable()?;
    let e_nu = expected_nu(params)?;
    Ok(rate_from(params, rho, e_nu))
}

fn rate_from(params: &SystemParams, rho: f64, e_nu: f64) -> f64 {
    let b1 = params.b1_mean();
    let m = params.m as f64;
    (e_nu + m) * (1.0 - rho) / ((2.0 * params.gamma + b1) * e_nu + m * b1)
}

/// Full auxiliary-chain bundle; requires `rho < 1`.
pub fn auxiliary_chain(params: &SystemParams) -> Result<AuxiliaryChainQuantities> {
    let rho = params.require_station2_stable()?;
    let a = travel_no_arrival_prob(params);
    let q = a * a;
    let beta = beta(params)?;
    let p = transition_probs_from(q, beta, params.m);
    let e_nu = nu_from(&p);
    let b1 = params.b1_mean();
    let m = params.m as f64;
    Ok(AuxiliaryChainQuantities {
        q,
        beta,
        p00: p.p00,
        p01: p.p01,
        p10: p.p10,
        p11: p.p11,
        e_nu,
        e_t: ((2.0 * params.gamma + b1) * e_nu + m * b1) / (1.0 - rho),
        r: rate_from(params, rho, e_nu),
    })
}

/// Stability through the saturated service rate: stable iff `rho < 1` and
/// `r > lambda1`. The rearranged closed form is evaluated alongside as an
/// independent cross-check.
pub fn is_stable_rate(params: &SystemParams) -> Result<StabilityVerdict> {
    let rho = params.rho();
    let stab1_holds = rho < 1.0;
    let r = if stab1_holds {
        Some(service_rate(params)?)
    } else {
        None
    };
    let margin = r.map(|r| r - params.lambda1);
    Ok(StabilityVerdict {
        rho,
        rho0: params.rho0(),
        stab1_holds,
        r,
        margin,
        stable: stab1_holds && margin.is_some_and(|d| d > 0.0),
        stab3_holds: is_stable_closed_form(params)?,
    })
}

/// The stability condition rearranged in terms of the total load `rho0`:
///
/// `2 gamma lambda1 + rho0 - 1 < (1 - rho0) m a beta / (1 + a beta (1 - beta^m))`
///
/// with `a` the squared no-arrival-during-travel probability. Implies `rho0 < 1`.
pub fn is_stable_closed_form(params: &SystemParams) -> Result<bool> {
    let rho0 = params.rho0();
    let t = travel_no_arrival_prob(params);
    let a = t * t;
    let beta = beta(params)?;
    let m = params.m as f64;
    let lhs = 2.0 * params.gamma * params.lambda1 + rho0 - 1.0;
    let rhs = (1.0 - rho0) * m * a * beta / (1.0 + a * beta * (1.0 - beta.powi(params.m as i32)));
    Ok(lhs < rhs)
}

/// Supremum of stable `lambda1`; `r` does not depend on `lambda1`.
pub fn critical_lambda1(params: &SystemParams) -> Result<f64> {
    service_rate(params)
}

/// Limit of the expected change of the station-1 queue over one regeneration
/// period, `lambda1 E T - (E nu + m)`. Negative iff `r > lambda1`.
pub fn drift_per_regeneration(params: &SystemParams) -> Result<f64> {
    let aux = auxiliary_chain(params)?;
    Ok(params.lambda1 * aux.e_t - (aux.e_nu + params.m as f64))
}
