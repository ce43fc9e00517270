//! Saturated auxiliary system: station 1 never empties.
//!
//! Every cycle record carries the station-2 queue found at its start and at
//! its end, which is all the regenerative estimators need: the indicator
//! chain `X = [q2 > 0]` at cycle boundaries, the number of cycles `nu` and
//! the duration `T` between arrivals at an empty station 2, and the
//! station-1 services completed in between.

use serde::{Deserialize, Serialize};

use super::{CycleRecord, CycleType, Engine, Mode, Observer, SimState, DEFAULT_EXPLOSION_CAP};
use crate::analysis::SystemParams;
use crate::error::{Error, Result};
use crate::stats::{Estimate, RatioEstimator, RunningMoments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatedStats {
    pub n_cycles: u64,
    pub n_regenerations: u64,
    pub est_p00: Estimate,
    pub est_p10: Estimate,
    pub est_e_nu: Estimate,
    pub est_e_t: Estimate,
    /// Station-1 services per unit time (regenerative ratio estimator).
    pub est_r: Estimate,
}

#[derive(Debug, Default)]
struct Collector {
    cycles: u64,
    // transitions[from][to], state 0 = station 2 empty
    transitions: [[u64; 2]; 2],
    nu: RunningMoments,
    duration: RunningMoments,
    rate: RatioEstimator,
    current_nu: u64,
    current_t: f64,
    current_services: u64,
}

impl Observer for Collector {
    fn on_cycle(&mut self, record: &CycleRecord) {
        self.cycles += 1;
        let from = usize::from(record.q2_at_start > 0);
        let to = usize::from(record.q2_at_end > 0);
        self.transitions[from][to] += 1;

        self.current_nu += 1;
        self.current_t += record.end - record.start;
        self.current_services += u64::from(record.services_at_1);
        if to == 0 {
            self.nu.push(self.current_nu as f64);
            self.duration.push(self.current_t);
            self.rate.push(self.current_services as f64, self.current_t);
            self.current_nu = 0;
            self.current_t = 0.0;
            self.current_services = 0;
        }
    }
}

fn empty_return_frequency(row: [u64; 2]) -> Estimate {
    let n = (row[0] + row[1]) as f64;
    let p = row[0] as f64 / n;
    Estimate::new(p, (p * (1.0 - p) / n).sqrt())
}

impl Collector {
    fn finish(&self) -> SaturatedStats {
        SaturatedStats {
            n_cycles: self.cycles,
            n_regenerations: self.nu.count(),
            est_p00: empty_return_frequency(self.transitions[0]),
            est_p10: empty_return_frequency(self.transitions[1]),
            est_e_nu: self.nu.estimate(),
            est_e_t: self.duration.estimate(),
            est_r: self.rate.estimate(),
        }
    }
}

/// Runs the saturated system until `n_regenerations` arrivals of the server
/// at an empty station 2 (the start at time 0 excluded) and estimates the
/// auxiliary-chain quantities.
pub fn run_saturated(params: &SystemParams, n_regenerations: u64, seed: u64) -> Result<SaturatedStats> {
    let mut collector = Collector::default();
    run_saturated_observed(params, n_regenerations, seed, &mut collector)?;
    Ok(collector.finish())
}

/// Saturated run streaming embedded samples and cycles to `observer`.
pub fn run_saturated_observed<O: Observer>(
    params: &SystemParams,
    n_regenerations: u64,
    seed: u64,
    observer: O,
) -> Result<SimState> {
    params.validate()?;
    let rho = params.rho();
    if rho >= 1.0 {
        return Err(Error::Unstable2 { rho });
    }
    if n_regenerations == 0 {
        return Err(Error::invalid("n_regenerations", "must be >= 1"));
    }
    let mut engine = Engine::new(
        params,
        Mode::Saturated,
        seed,
        0,
        0,
        DEFAULT_EXPLOSION_CAP,
        observer,
    );
    debug_assert_eq!(engine.current_cycle_type(), CycleType::Modified);
    engine.run(|e| e.regenerations >= n_regenerations)?;
    Ok(engine.snapshot())
}

/// The indicator sequence `[q2 > 0]` at the start of each cycle.
pub fn extract_x_chain(records: &[CycleRecord]) -> Vec<u8> {
    records.iter().map(|r| u8::from(r.q2_at_start > 0)).collect()
}
