//! Experiment harness: simulation versus closed forms, empirical stability
//! boundaries, and the matched-moments demonstration.
//!
//! Stability is detected through the growth rate of the station-1 queue at
//! the server's arrivals there. After discarding a warm-up the window is cut
//! into equal-time batches, a least-squares slope is fitted per batch, and the
//! batch slopes give both the drift estimate and its standard error. In
//! overload station 1 saturates, so the slope should approach `lambda1 - r`.

use serde::{Deserialize, Serialize};

use crate::analysis::{self, AuxiliaryChainQuantities, SystemParams};
use crate::distributions::{match_two_point, MomentMatchSpec, ServiceDistribution};
use crate::error::{Error, Result};
use crate::simulator::{
    run_full_observed, run_saturated, CycleRecord, CycleType, EmbeddedSample, FullConfig,
    Observer, SaturatedStats, SimState, Station,
};
use crate::stats::{LineFit, RunningMoments};

pub const WARMUP_FRACTION: f64 = 0.2;
pub const BATCHES: usize = 20;
/// A drift counts as positive when it exceeds this many standard errors.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub lambda1: f64,
    /// Mean of the per-batch least-squares slopes of q1 against time.
    pub slope: f64,
    pub stderr: f64,
    /// Single least-squares slope over the whole post-warm-up window.
    pub slope_full_window: f64,
    pub horizon: f64,
    pub warmup_discarded: f64,
    /// Server arrivals at station 1 that found it empty, over the whole run.
    pub zero_hits: u64,
    pub station1_visits: u64,
    pub modified_fraction: f64,
}

impl DriftEstimate {
    /// `slope > 3 stderr`.
    pub fn is_growing(&self) -> bool {
        self.slope > Z_THRESHOLD * self.stderr
    }

    /// `|slope| <= 3 stderr`.
    pub fn is_flat(&self) -> bool {
        self.slope.abs() <= Z_THRESHOLD * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOptions {
    pub warmup_fraction: f64,
    pub batches: usize,
    pub explosion_cap: u64,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self {
            warmup_fraction: WARMUP_FRACTION,
            batches: BATCHES,
            explosion_cap: crate::simulator::DEFAULT_EXPLOSION_CAP,
        }
    }
}

/// Streaming drift estimator over station-1 embedded samples.
#[derive(Debug, Clone)]
pub struct DriftObserver {
    warmup: f64,
    horizon: f64,
    width: f64,
    full: LineFit,
    batches: Vec<LineFit>,
    zero_hits: u64,
    visits: u64,
    cycles: u64,
    modified: u64,
}

impl DriftObserver {
    pub fn new(horizon: f64, options: &DriftOptions) -> Result<Self> {
        let warmup = horizon * options.warmup_fraction;
        if !(0.0..1.0).contains(&options.warmup_fraction)
            || options.batches < 2
            || !(horizon.is_finite() && horizon > warmup)
        {
            return Err(Error::InsufficientHorizon { horizon, warmup });
        }
        let width = (horizon - warmup) / options.batches as f64;
        Ok(Self {
            warmup,
            horizon,
            width,
            full: LineFit::new(warmup),
            batches: (0..options.batches)
                .map(|b| LineFit::new(warmup + b as f64 * width))
                .collect(),
            zero_hits: 0,
            visits: 0,
            cycles: 0,
            modified: 0,
        })
    }

    pub fn finish(&self, lambda1: f64) -> Result<DriftEstimate> {
        let insufficient = || Error::InsufficientHorizon {
            horizon: self.horizon,
            warmup: self.warmup,
        };
        let mut slopes = RunningMoments::default();
        for b in &self.batches {
            slopes.push(b.slope().ok_or_else(insufficient)?);
        }
        Ok(DriftEstimate {
            lambda1,
            slope: slopes.mean(),
            stderr: slopes.stderr(),
            slope_full_window: self.full.slope().ok_or_else(insufficient)?,
            horizon: self.horizon,
            warmup_discarded: self.warmup,
            zero_hits: self.zero_hits,
            station1_visits: self.visits,
            modified_fraction: self.modified as f64 / self.cycles.max(1) as f64,
        })
    }
}

impl Observer for DriftObserver {
    fn on_embedded(&mut self, s: &EmbeddedSample) {
        if s.station != Station::One {
            return;
        }
        self.visits += 1;
        if s.q_at_arrival == 0 {
            self.zero_hits += 1;
        }
        if s.time < self.warmup || s.time > self.horizon {
            return;
        }
        let q = s.q_at_arrival as f64;
        self.full.push(s.time, q);
        let idx = (((s.time - self.warmup) / self.width) as usize).min(self.batches.len() - 1);
        self.batches[idx].push(s.time, q);
    }

    fn on_cycle(&mut self, r: &CycleRecord) {
        self.cycles += 1;
        if r.cycle_type == CycleType::Modified {
            self.modified += 1;
        }
    }
}

/// Full-mode run from an empty system; drift of q1 after a 20% warm-up.
pub fn estimate_drift(params: &SystemParams, horizon: f64, seed: u64) -> Result<DriftEstimate> {
    estimate_drift_with(params, horizon, seed, &DriftOptions::default()).map(|(d, _)| d)
}

pub fn estimate_drift_with(
    params: &SystemParams,
    horizon: f64,
    seed: u64,
    options: &DriftOptions,
) -> Result<(DriftEstimate, SimState)> {
    let mut observer = DriftObserver::new(horizon, options)?;
    let mut config = FullConfig::new(horizon, seed);
    config.explosion_cap = options.explosion_cap;
    let state = run_full_observed(params, &config, &mut observer)?;
    Ok((observer.finish(params.lambda1)?, state))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub passed: bool,
    pub stats: SaturatedStats,
    pub reference: AuxiliaryChainQuantities,
}

impl ValidationReport {
    /// Compares saturated-mode estimates against reference values; passes
    /// iff every `|z| <= 3`.
    pub fn compare(stats: SaturatedStats, reference: AuxiliaryChainQuantities) -> Self {
        let rows = [
            ("p00", stats.est_p00, reference.p00),
            ("p10", stats.est_p10, reference.p10),
            ("e_nu", stats.est_e_nu, reference.e_nu),
            ("e_t", stats.est_e_t, reference.e_t),
            ("r", stats.est_r, reference.r),
        ];
        let entries: Vec<_> = rows
            .iter()
            .map(|(name, est, reference)| ValidationEntry {
                name: (*name).to_string(),
                estimate: est.value,
                stderr: est.stderr,
                reference: *reference,
                z: est.z_score(*reference),
            })
            .collect();
        let passed = entries.iter().all(|e| e.z.abs() <= Z_THRESHOLD);
        Self {
            entries,
            passed,
            stats,
            reference,
        }
    }

    pub fn entry(&self, name: &str) -> Option<&ValidationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn validate_against_analysis(
    params: &SystemParams,
    n_regenerations: u64,
    seed: u64,
) -> Result<ValidationReport> {
    let reference = analysis::auxiliary_chain(params)?;
    let stats = run_saturated(params, n_regenerations, seed)?;
    Ok(ValidationReport::compare(stats, reference))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub lo: f64,
    pub hi: f64,
    pub iterations: u32,
    pub points: Vec<DriftEstimate>,
}

/// Bisection on `lambda1` with the sign test `slope > 3 stderr`. The
/// `lambda1` inside `params` is ignored.
pub fn find_boundary(
    params: &SystemParams,
    lo: f64,
    hi: f64,
    iterations: u32,
    horizon: f64,
    seed: u64,
) -> Result<BoundaryEstimate> {
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::BadBracket(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let drift_at = |lambda1: f64| estimate_drift(&params.with_lambda1(lambda1)?, horizon, seed);
    let at_lo = drift_at(lo)?;
    if at_lo.is_growing() {
        return Err(Error::BadBracket(format!(
            "queue grows at lo = {lo} (slope {:.3e} +- {:.1e})",
            at_lo.slope, at_lo.stderr
        )));
    }
    let at_hi = drift_at(hi)?;
    if !at_hi.is_growing() {
        return Err(Error::BadBracket(format!(
            "no significant growth at hi = {hi} (slope {:.3e} +- {:.1e})",
            at_hi.slope, at_hi.stderr
        )));
    }
    let mut points = vec![at_lo, at_hi];
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let d = drift_at(mid)?;
        if d.is_growing() {
            hi = mid;
        } else {
            lo = mid;
        }
        points.push(d);
    }
    Ok(BoundaryEstimate {
        lo,
        hi,
        iterations,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSystem {
    pub distribution: ServiceDistribution,
    /// Raw moments of orders `1..=k_matched`.
    pub moments: Vec<f64>,
    pub beta: f64,
    pub r: f64,
    pub analytic_stable: bool,
    pub drift: DriftEstimate,
}

impl DemoSystem {
    /// Empirical verdict agrees with the analytic one: growth iff unstable.
    pub fn consistent(&self) -> bool {
        self.drift.is_growing() != self.analytic_stable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDemoReport {
    pub k_matched: u32,
    pub lambda1: f64,
    pub base: DemoSystem,
    pub alternative: DemoSystem,
    pub beta_difference: f64,
    pub succeeded: bool,
}

/// Distribution matching the first `k_matched` raw moments of `base`: the
/// deterministic law with the same mean (k = 1) or a two-point law with an
/// atom at zero (k = 2).
pub fn matched_alternative(base: &ServiceDistribution, k_matched: u32) -> Result<ServiceDistribution> {
    match k_matched {
        1 => ServiceDistribution::deterministic(base.mean()),
        2 => match_two_point(MomentMatchSpec::new(base.mean(), base.moment(2)?)?),
        k => Err(Error::invalid("k_matched", format!("must be 1 or 2, got {k}"))),
    }
}

/// Two systems that differ only in the station-1 service law, whose first
/// `k_matched` moments agree, evaluated analytically and by full-mode drift
/// at a `lambda1` between their service rates (midpoint when `None`).
pub fn moment_demo(
    k_matched: u32,
    base: &ServiceDistribution,
    params: &SystemParams,
    lambda1: Option<f64>,
    horizon: f64,
    seed: u64,
) -> Result<MomentDemoReport> {
    let alternative = matched_alternative(base, k_matched)?;
    moment_demo_with(k_matched, base, &alternative, params, lambda1, horizon, seed)
}

pub fn moment_demo_with(
    k_matched: u32,
    base: &ServiceDistribution,
    alternative: &ServiceDistribution,
    params: &SystemParams,
    lambda1: Option<f64>,
    horizon: f64,
    seed: u64,
) -> Result<MomentDemoReport> {
    base.validate()?;
    alternative.validate()?;
    let moments = |d: &ServiceDistribution| (1..=k_matched).map(|k| d.moment(k)).collect::<Result<Vec<_>>>();
    let (m_base, m_alt) = (moments(base)?, moments(alternative)?);
    for (k, (a, b)) in m_base.iter().zip(&m_alt).enumerate() {
        if ((a - b) / a).abs() >= 1e-12 {
            return Err(Error::invalid(
                "alternative",
                format!("moment {} differs: {a} vs {b}", k + 1),
            ));
        }
    }

    let mut p_base = params.clone();
    p_base.b1 = base.clone();
    let mut p_alt = params.clone();
    p_alt.b1 = alternative.clone();
    let r_base = analysis::service_rate(&p_base)?;
    let r_alt = analysis::service_rate(&p_alt)?;
    if r_base == r_alt {
        return Err(Error::DegenerateDemo(r_base));
    }
    let lambda1 = lambda1.unwrap_or(0.5 * (r_base + r_alt));
    if !(lambda1 > r_base.min(r_alt) && lambda1 < r_base.max(r_alt)) {
        return Err(Error::NotSeparating {
            lambda1,
            r_base,
            r_alt,
        });
    }
    let p_base = p_base.with_lambda1(lambda1)?;
    let p_alt = p_alt.with_lambda1(lambda1)?;

    let (d_base, d_alt) = std::thread::scope(|scope| {
        let h = scope.spawn(|| estimate_drift(&p_base, horizon, seed));
        let d_alt = estimate_drift(&p_alt, horizon, seed);
        (h.join().expect("drift thread panicked"), d_alt)
    });

    let system = |p: &SystemParams, moments: Vec<f64>, r: f64, drift: DriftEstimate| -> Result<DemoSystem> {
        Ok(DemoSystem {
            distribution: p.b1.clone(),
            moments,
            beta: analysis::beta(p)?,
            r,
            analytic_stable: r > lambda1,
            drift,
        })
    };
    let base_sys = system(&p_base, m_base, r_base, d_base?)?;
    let alt_sys = system(&p_alt, m_alt, r_alt, d_alt?)?;
    let succeeded = base_sys.consistent() && alt_sys.consistent();
    Ok(MomentDemoReport {
        k_matched,
        lambda1,
        beta_difference: base_sys.beta - alt_sys.beta,
        base: base_sys,
        alternative: alt_sys,
        succeeded,
    })
}
