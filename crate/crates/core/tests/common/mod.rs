#![allow(dead_code)]

use polling_core::analysis;
use polling_core::{Branch, ServiceDistribution, SystemParams};
use rand::Rng;

pub fn exp(rate: f64) -> ServiceDistribution {
    ServiceDistribution::exponential(rate).unwrap()
}

pub fn det(value: f64) -> ServiceDistribution {
    ServiceDistribution::deterministic(value).unwrap()
}

/// lambda2 = 1, b2 = Exp(2), gamma = 0.5, b1 = Exp(2), m = 1.
pub fn baseline(lambda1: f64) -> SystemParams {
    SystemParams::new(lambda1, 1.0, 0.5, 1, exp(2.0), exp(2.0)).unwrap()
}

/// Reference values for the baseline system, worked out by hand in exact
/// rational arithmetic: q = 4/9, beta = 2/3, rho = 1/2.
pub mod baseline_exact {
    pub const P10: f64 = 8.0 / 27.0;
    pub const P00: f64 = 16.0 / 81.0;
    pub const E_NU: f64 = 89.0 / 24.0;
    pub const E_T: f64 = 97.0 / 8.0;
    pub const R: f64 = 113.0 / 291.0;
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// A random law from one of the closed-form families.
pub fn random_closed_form<R: Rng>(rng: &mut R) -> ServiceDistribution {
    match rng.random_range(0..6) {
        0 => ServiceDistribution::deterministic(rng.random_range(0.05..2.0)).unwrap(),
        1 => exp(rng.random_range(0.5..10.0)),
        2 => ServiceDistribution::erlang(rng.random_range(1..=6), rng.random_range(0.5..10.0)).unwrap(),
        3 => {
            let w = rng.random_range(0.05..0.95);
            ServiceDistribution::hyper_exponential(vec![
                Branch { weight: w, rate: rng.random_range(0.2..5.0) },
                Branch { weight: 1.0 - w, rate: rng.random_range(2.0..20.0) },
            ])
            .unwrap()
        }
        4 => {
            let a = rng.random_range(0.0..1.0);
            let b = a + rng.random_range(0.01..2.0);
            ServiceDistribution::two_point(a, b, rng.random_range(0.0..0.99)).unwrap()
        }
        _ => ServiceDistribution::gamma(rng.random_range(0.2..5.0), rng.random_range(0.5..10.0)).unwrap(),
    }
}

/// Any family, including the quadrature-backed ones.
pub fn random_any<R: Rng>(rng: &mut R) -> ServiceDistribution {
    match rng.random_range(0..8) {
        6 => ServiceDistribution::lognormal(rng.random_range(-2.0..0.5), rng.random_range(0.1..1.5)).unwrap(),
        7 => ServiceDistribution::pareto(rng.random_range(0.05..1.0), rng.random_range(1.2..4.0)).unwrap(),
        _ => random_closed_form(rng),
    }
}

/// Station 2 load drawn in (0.01, 0.99), gamma in [0, 5] with an atom at 0,
/// m in 0..=10, lambda1 spread around the saturated rate.
pub fn random_stable_station2<R: Rng>(rng: &mut R, any_family: bool) -> SystemParams {
    let draw = |rng: &mut R| if any_family { random_any(rng) } else { random_closed_form(rng) };
    let b1 = draw(rng);
    let b2 = draw(rng);
    let rho = rng.random_range(0.01..0.99);
    let lambda2 = rho / b2.mean();
    let gamma = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) };
    let m = rng.random_range(0..=10);
    let mut p = SystemParams::new(1.0, lambda2, gamma, m, b1, b2).unwrap();
    let r = analysis::service_rate(&p).unwrap();
    p.lambda1 = r * rng.random_range(0.01..2.0);
    p
}

use polling_core::simulator::{CycleRecord, CycleType, EmbeddedSample, Observer};
use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

/// Streams structural checks over a full run and fingerprints its output.
#[derive(Debug)]
pub struct StructureChecker {
    pub m: u32,
    pub violations: Vec<String>,
    pub samples: u64,
    pub cycles: u64,
    last_time: [f64; 2],
    last_n: [u64; 2],
    last_cycle: Option<CycleRecord>,
    hasher: DefaultHasher,
}

impl StructureChecker {
    pub fn new(m: u32) -> Self {
        Self {
            m,
            violations: Vec::new(),
            samples: 0,
            cycles: 0,
            last_time: [0.0; 2],
            last_n: [0; 2],
            last_cycle: None,
            hasher: DefaultHasher::new(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.hasher.finish()
    }

    fn fail(&mut self, msg: String) {
        if self.violations.len() < 10 {
            self.violations.push(msg);
        }
    }
}

impl Observer for StructureChecker {
    fn on_embedded(&mut self, s: &EmbeddedSample) {
        self.samples += 1;
        let i = s.station.index();
        if s.time < self.last_time[i] {
            self.fail(format!("station {} time went back at n={}", i + 1, s.n));
        }
        self.last_time[i] = s.time;
        if s.n != self.last_n[i] + 1 {
            self.fail(format!("station {} visit count jumped {} -> {}", i + 1, self.last_n[i], s.n));
        }
        self.last_n[i] = s.n;
        self.hasher.write_u64(s.n);
        self.hasher.write_u64(s.time.to_bits());
        self.hasher.write_u64(s.q_at_arrival);
        self.hasher.write_u64(s.q_other);
    }

    fn on_cycle(&mut self, c: &CycleRecord) {
        self.cycles += 1;
        if c.end < c.start {
            self.fail(format!("cycle {} ends before it starts", c.index));
        }
        match c.cycle_type {
            CycleType::Standard => {
                if c.q2_at_start == 0 || c.services_at_1 > 1 || c.services_at_2 < c.q2_at_start {
                    self.fail(format!("standard cycle {} breaks caps: {c:?}", c.index));
                }
            }
            CycleType::Modified => {
                if c.q2_at_start != 0 || c.services_at_1 > 1 + self.m || c.services_at_2 != 0 {
                    self.fail(format!("modified cycle {} breaks caps: {c:?}", c.index));
                }
            }
        }
        if let Some(prev) = self.last_cycle {
            if prev.end != c.start || prev.q2_at_end != c.q2_at_start || prev.index + 1 != c.index {
                self.fail(format!("cycles {} and {} do not tile", prev.index, c.index));
            }
        }
        self.last_cycle = Some(*c);
        self.hasher.write_u64(c.end.to_bits());
        self.hasher.write_u32(c.services_at_1);
        self.hasher.write_u64(c.services_at_2);
    }
}
