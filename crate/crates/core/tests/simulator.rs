mod common;

use common::{baseline, baseline_exact, StructureChecker};
use polling_core::analysis;
use polling_core::simulator::{
    extract_x_chain, run_full, run_full_observed, run_saturated, run_saturated_observed, CycleType,
    EmbeddedSample, FullConfig, Observer, Recorder, Station,
};
use polling_core::stats::{Estimate, LineFit, RunningMoments};
use polling_core::{Error, SystemParams};

#[derive(Default)]
struct Station1Counts {
    visits: u64,
    empty: u64,
    modified: u64,
    cycles: u64,
}

impl Observer for Station1Counts {
    fn on_embedded(&mut self, s: &EmbeddedSample) {
        if s.station == Station::One {
            self.visits += 1;
            self.empty += u64::from(s.q_at_arrival == 0);
        }
    }

    fn on_cycle(&mut self, c: &polling_core::simulator::CycleRecord) {
        self.cycles += 1;
        self.modified += u64::from(c.cycle_type == CycleType::Modified);
    }
}

#[test]
fn stable_full_run_keeps_emptying() {
    let p = baseline(0.3);
    let mut counts = Station1Counts::default();
    let mut checker = StructureChecker::new(p.m);
    let state = run_full_observed(&p, &FullConfig::new(1e6, 7), (&mut counts, &mut checker)).unwrap();
    assert!(checker.violations.is_empty(), "{:?}", checker.violations);
    assert!(state.conserved(Station::One) && state.conserved(Station::Two));
    assert!(counts.empty > 10_000, "station 1 found empty {} times", counts.empty);
    let fraction = counts.modified as f64 / counts.cycles as f64;
    assert!(fraction > 0.0 && fraction < 1.0);
}

struct LastHalfSlope {
    from: f64,
    fit: LineFit,
}

impl Observer for LastHalfSlope {
    fn on_embedded(&mut self, s: &EmbeddedSample) {
        if s.time >= self.from {
            self.fit.push(s.time, s.q1() as f64);
        }
    }
}

#[test]
fn overloaded_queue_grows_at_rate_gap() {
    let horizon = 1e7;
    let mut obs = LastHalfSlope {
        from: 0.5 * horizon,
        fit: LineFit::new(0.5 * horizon),
    };
    run_full_observed(&baseline(0.45), &FullConfig::new(horizon, 1), &mut obs).unwrap();
    let slope = obs.fit.slope().unwrap();
    let target = 0.45 - baseline_exact::R;
    assert!((target - 0.061_684).abs() < 1e-6);
    assert!(common::relative_error(slope, target) < 0.1, "slope {slope} vs {target}");
}

#[test]
fn x_chain_transitions_match_analysis() {
    let p = baseline(0.3);
    let mut rec = Recorder::new(1);
    run_saturated_observed(&p, 300_000, 21, &mut rec).unwrap();
    let x = extract_x_chain(&rec.cycles);
    assert!(x.len() >= 1_000_000);

    let mut pairs = [[0u64; 2]; 2];
    let mut triples = [[[0u64; 2]; 2]; 2];
    for w in x.windows(2) {
        pairs[w[0] as usize][w[1] as usize] += 1;
    }
    for w in x.windows(3) {
        triples[w[0] as usize][w[1] as usize][w[2] as usize] += 1;
    }

    let tp = analysis::transition_probs(&p).unwrap();
    for (from, expected) in [(0, tp.p00), (1, tp.p10)] {
        let n = (pairs[from][0] + pairs[from][1]) as f64;
        let freq = pairs[from][0] as f64 / n;
        let se = (expected * (1.0 - expected) / n).sqrt();
        assert!((freq - expected).abs() <= 3.0 * se, "from {from}: {freq} vs {expected}");
    }

    // given the current state, the next one must not depend on the previous
    for mid in 0..2 {
        let t = [
            [triples[0][mid][0] as f64, triples[0][mid][1] as f64],
            [triples[1][mid][0] as f64, triples[1][mid][1] as f64],
        ];
        let total: f64 = t.iter().flatten().sum();
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = (t[i][0] + t[i][1]) * (t[0][j] + t[1][j]) / total;
                chi2 += (t[i][j] - expected).powi(2) / expected;
            }
        }
        assert!(chi2 < 10.83, "second-order dependence at state {mid}: chi2 = {chi2}");
    }
}

#[test]
fn saturated_estimates_are_coherent() {
    let p = baseline(0.3);
    let s = run_saturated(&p, 200_000, 31).unwrap();
    let combined = s.est_p00.stderr.hypot(s.est_p10.stderr);
    assert!(s.est_p00.value <= s.est_p10.value + 4.0 * combined);
    for e in [s.est_p00, s.est_p10] {
        assert!((0.0..=1.0).contains(&e.value));
    }
    assert!(s.est_e_nu.value >= 1.0 && s.est_e_t.value > 0.0 && s.est_r.value > 0.0);
    assert!(s.n_cycles >= s.n_regenerations);
}

#[test]
fn standard_errors_shrink_with_square_root() {
    let p = baseline(0.3);
    let small = run_saturated(&p, 10_000, 41).unwrap();
    let large = run_saturated(&p, 1_000_000, 42).unwrap();
    let pick = |s: &polling_core::simulator::SaturatedStats| -> [Estimate; 5] {
        [s.est_p00, s.est_p10, s.est_e_nu, s.est_e_t, s.est_r]
    };
    for (a, b) in pick(&small).iter().zip(pick(&large).iter()) {
        let ratio = a.stderr / b.stderr;
        assert!((5.0..=20.0).contains(&ratio), "stderr ratio {ratio}");
    }
}

#[test]
fn arrivals_see_time_averages() {
    let p = baseline(0.3);
    let mut diffs = RunningMoments::default();
    for seed in 0..20 {
        let s = run_full(&p, &FullConfig::new(1e5, 500 + seed)).unwrap().final_state;
        let time_avg = s.area_content[1] / s.clock;
        let seen_avg = s.content2_seen_by_arrivals as f64 / s.arrivals[1] as f64;
        diffs.push(time_avg - seen_avg);
    }
    let d = diffs.estimate();
    assert!(d.z_score(0.0).abs() <= 3.0, "{d:?}");
}

#[test]
fn negligible_arrival_rate_leaves_station_one_empty() {
    let p = SystemParams::new(1e-9, 1.0, 0.5, 1, common::exp(2.0), common::exp(2.0)).unwrap();
    let out = run_full(&p, &FullConfig::new(100.0, 3)).unwrap();
    assert_eq!(out.final_state.arrivals[0], 0);
    assert!(out.cycles.iter().all(|c| c.services_at_1 == 0));
}

#[test]
fn zero_rates_are_rejected() {
    let err = SystemParams::new(0.0, 1.0, 0.5, 1, common::exp(2.0), common::exp(2.0)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { field: "lambda1", .. }));
    let err = SystemParams::new(0.3, 0.0, 0.5, 1, common::exp(2.0), common::exp(2.0)).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { field: "lambda2", .. }));
}

#[test]
fn deterministic_services_and_instant_travel() {
    let p = SystemParams::new(0.2, 0.5, 0.0, 3, common::det(1.0), common::det(0.5)).unwrap();
    let cfg = FullConfig::new(1e4, 8);
    let mut a = StructureChecker::new(p.m);
    let sa = run_full_observed(&p, &cfg, &mut a).unwrap();
    let mut b = StructureChecker::new(p.m);
    let sb = run_full_observed(&p, &cfg, &mut b).unwrap();
    assert!(a.violations.is_empty(), "{:?}", a.violations);
    assert_eq!(sa, sb);
    assert_eq!(a.fingerprint(), b.fingerprint());
}
