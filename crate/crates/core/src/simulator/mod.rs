//! Event-driven simulation of the two-station polling system.
//!
//! A cycle starts whenever the server arrives at station 2. If station 2 is
//! non-empty the cycle is *standard*: station 2 is emptied (arrivals during
//! the visit included), the server travels to station 1, serves at most one
//! customer and travels back. If station 2 is empty the cycle is *modified*:
//! the server travels straight to station 1 and serves until it has completed
//! `1 + m` services or station 1 is empty, then travels back.
//!
//! The same engine runs in two modes. [`Mode::Full`] simulates both Poisson
//! streams up to a time horizon. [`Mode::Saturated`] models an inexhaustible
//! station 1 (its arrivals are never generated) and stops after a given
//! number of regenerations, a regeneration being an arrival of the server at
//! an empty station 2.
//!
//! At most three events are pending at any time: the next arrival to each
//! station and the completion of the server's current activity. Ties are
//! broken completion first, then station-2 arrival, then station-1 arrival.

mod saturated;
pub mod trace;

pub use saturated::{extract_x_chain, run_saturated, run_saturated_observed, SaturatedStats};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::analysis::SystemParams;
use crate::error::{Error, Result};
use crate::streams::Streams;

pub const DEFAULT_EXPLOSION_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleType {
    Standard,
    Modified,
}

impl CycleType {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleType::Standard => "standard",
            CycleType::Modified => "modified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Station {
    One,
    Two,
}

impl Station {
    pub fn number(self) -> u8 {
        match self {
            Station::One => 1,
            Station::Two => 2,
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.number() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Full,
    Saturated,
}

/// Location and remaining work of the server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ServerPhase {
    /// About to arrive at station 2. Also the parked state of a server with
    /// zero travel time facing an empty system.
    ArrivingAtStation2,
    ServingStation2 { residual: f64 },
    TravelingTo1 { residual: f64 },
    ServingStation1 { residual: f64, served_this_visit: u32 },
    TravelingTo2 { residual: f64 },
}

/// Server arrival at a station: the embedded-chain observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    /// 1-based count of server arrivals at this station.
    pub n: u64,
    pub station: Station,
    pub time: f64,
    /// Queue found by the server at this station.
    pub q_at_arrival: u64,
    /// Queue at the other station at the same instant.
    pub q_other: u64,
    pub cycle_type: CycleType,
}

impl EmbeddedSample {
    pub fn q1(&self) -> u64 {
        match self.station {
            Station::One => self.q_at_arrival,
            Station::Two => self.q_other,
        }
    }

    pub fn q2(&self) -> u64 {
        match self.station {
            Station::One => self.q_other,
            Station::Two => self.q_at_arrival,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// 0-based cycle index.
    pub index: u64,
    pub start: f64,
    pub end: f64,
    pub cycle_type: CycleType,
    pub services_at_1: u32,
    pub services_at_2: u64,
    pub q2_at_start: u64,
    /// Station-2 queue found when the server returns, i.e. the next cycle's start.
    pub q2_at_end: u64,
}

/// Receives embedded samples and completed cycles as the run progresses.
pub trait Observer {
    fn on_embedded(&mut self, _sample: &EmbeddedSample) {}
    fn on_cycle(&mut self, _record: &CycleRecord) {}
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_embedded(&mut self, sample: &EmbeddedSample) {
        self.0.on_embedded(sample);
        self.1.on_embedded(sample);
    }

    fn on_cycle(&mut self, record: &CycleRecord) {
        self.0.on_cycle(record);
        self.1.on_cycle(record);
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_embedded(&mut self, sample: &EmbeddedSample) {
        (**self).on_embedded(sample);
    }

    fn on_cycle(&mut self, record: &CycleRecord) {
        (**self).on_cycle(record);
    }
}

/// Keeps every `every`-th embedded sample and cycle record.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    every: u64,
    seen_samples: u64,
    seen_cycles: u64,
    pub samples: Vec<EmbeddedSample>,
    pub cycles: Vec<CycleRecord>,
}

impl Recorder {
    pub fn new(every: u64) -> Self {
        Self {
            every: every.max(1),
            ..Self::default()
        }
    }
}

impl Observer for Recorder {
    fn on_embedded(&mut self, sample: &EmbeddedSample) {
        if self.seen_samples % self.every == 0 {
            self.samples.push(*sample);
        }
        self.seen_samples += 1;
    }

    fn on_cycle(&mut self, record: &CycleRecord) {
        if self.seen_cycles % self.every == 0 {
            self.cycles.push(*record);
        }
        self.seen_cycles += 1;
    }
}

/// Snapshot of the simulated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub clock: f64,
    /// Customers waiting at each station, excluding one in service.
    pub q1: u64,
    pub q2: u64,
    pub phase: ServerPhase,
    pub cycle_type: CycleType,
    pub next_arrival1: Option<f64>,
    pub next_arrival2: Option<f64>,
    pub next_completion: Option<f64>,
    pub arrivals: [u64; 2],
    pub departures: [u64; 2],
    pub in_service: [bool; 2],
    pub cycles_standard: u64,
    pub cycles_modified: u64,
    pub regenerations: u64,
    /// Time integrals of the station contents (waiting plus in service).
    pub area_content: [f64; 2],
    /// Sum over station-2 arrivals of the station-2 content they found.
    pub content2_seen_by_arrivals: u64,
}

impl SimState {
    /// Customers at station `i` (1-based), including one in service.
    pub fn content(&self, station: Station) -> u64 {
        let i = station.index();
        let waiting = if i == 0 { self.q1 } else { self.q2 };
        waiting + u64::from(self.in_service[i])
    }

    /// Arrivals = departures + waiting + in service, at both stations.
    /// Meaningless for station 1 in saturated mode.
    pub fn conserved(&self, station: Station) -> bool {
        let i = station.index();
        self.arrivals[i] == self.departures[i] + self.content(station)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullConfig {
    pub horizon: f64,
    pub seed: u64,
    /// Keep every k-th embedded sample and cycle in [`FullOutput`].
    pub sample_every: u64,
    pub initial_q1: u64,
    pub initial_q2: u64,
    pub explosion_cap: u64,
}

impl FullConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            sample_every: 1,
            initial_q1: 0,
            initial_q2: 0,
            explosion_cap: DEFAULT_EXPLOSION_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullOutput {
    pub samples: Vec<EmbeddedSample>,
    pub cycles: Vec<CycleRecord>,
    pub final_state: SimState,
}

/// Simulates the full system and records (thinned) embedded samples and cycles.
pub fn run_full(params: &SystemParams, config: &FullConfig) -> Result<FullOutput> {
    let mut recorder = Recorder::new(config.sample_every);
    let final_state = run_full_observed(params, config, &mut recorder)?;
    Ok(FullOutput {
        samples: recorder.samples,
        cycles: recorder.cycles,
        final_state,
    })
}

/// Simulates the full system up to `config.horizon`, streaming every embedded
/// sample and completed cycle to `observer`.
pub fn run_full_observed<O: Observer>(
    params: &SystemParams,
    config: &FullConfig,
    observer: O,
) -> Result<SimState> {
    params.validate()?;
    if !(config.horizon.is_finite() && config.horizon > 0.0) {
        return Err(Error::invalid(
            "horizon",
            format!("must be finite and > 0, got {}", config.horizon),
        ));
    }
    let mut engine = Engine::new(
        params,
        Mode::Full,
        config.seed,
        config.initial_q1,
        config.initial_q2,
        config.explosion_cap,
        observer,
    );
    engine.run(|e| e.peek_time() > config.horizon)?;
    engine.close_horizon(config.horizon);
    Ok(engine.snapshot())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Activity {
    Idle,
    Serving2,
    TravelTo1,
    Serving1 { served: u32 },
    TravelTo2,
}

#[derive(Debug, Clone, Copy)]
struct OpenCycle {
    index: u64,
    start: f64,
    cycle_type: CycleType,
    services_at_1: u32,
    services_at_2: u64,
    q2_at_start: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Completion,
    Arrival2,
    Arrival1,
}

struct Engine<'a, O> {
    params: &'a SystemParams,
    mode: Mode,
    streams: Streams,
    observer: O,
    explosion_cap: u64,
    clock: f64,
    q: [u64; 2],
    in_service: [bool; 2],
    activity: Activity,
    completion: f64,
    next_arrival: [f64; 2],
    cycle: Option<OpenCycle>,
    cycles_started: u64,
    cycles_by_type: [u64; 2],
    visits: [u64; 2],
    arrivals: [u64; 2],
    departures: [u64; 2],
    regenerations: u64,
    area: [f64; 2],
    content2_seen: u64,
}

fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e * mean
}

impl<'a, O: Observer> Engine<'a, O> {
    fn new(
        params: &'a SystemParams,
        mode: Mode,
        seed: u64,
        initial_q1: u64,
        initial_q2: u64,
        explosion_cap: u64,
        observer: O,
    ) -> Self {
        let mut streams = Streams::new(seed);
        let next1 = match mode {
            Mode::Full => exponential(&mut streams.arrivals1, 1.0 / params.lambda1),
            Mode::Saturated => f64::INFINITY,
        };
        let next2 = exponential(&mut streams.arrivals2, 1.0 / params.lambda2);
        let mut engine = Self {
            params,
            mode,
            streams,
            observer,
            explosion_cap,
            clock: 0.0,
            q: [initial_q1, initial_q2],
            in_service: [false; 2],
            activity: Activity::Idle,
            completion: f64::INFINITY,
            next_arrival: [next1, next2],
            cycle: None,
            cycles_started: 0,
            cycles_by_type: [0; 2],
            visits: [0; 2],
            arrivals: [initial_q1, initial_q2],
            departures: [0; 2],
            regenerations: 0,
            area: [0.0; 2],
            content2_seen: 0,
        };
        engine.arrive_at_station2();
        engine
    }

    fn saturated(&self) -> bool {
        self.mode == Mode::Saturated
    }

    fn peek(&self) -> (f64, Event) {
        let mut best = (self.completion, Event::Completion);
        if self.next_arrival[1] < best.0 {
            best = (self.next_arrival[1], Event::Arrival2);
        }
        if self.next_arrival[0] < best.0 {
            best = (self.next_arrival[0], Event::Arrival1);
        }
        best
    }

    fn peek_time(&self) -> f64 {
        self.peek().0
    }

    fn run(&mut self, mut stop: impl FnMut(&Self) -> bool) -> Result<()> {
        while !stop(self) {
            let (time, event) = self.peek();
            debug_assert!(time >= self.clock, "event clock went backwards");
            if !time.is_finite() {
                break;
            }
            self.advance_clock(time);
            match event {
                Event::Completion => self.complete_activity(),
                Event::Arrival2 => self.arrival(Station::Two)?,
                Event::Arrival1 => self.arrival(Station::One)?,
            }
        }
        Ok(())
    }

    fn advance_clock(&mut self, time: f64) {
        let dt = time - self.clock;
        for i in 0..2 {
            self.area[i] += dt * (self.q[i] + u64::from(self.in_service[i])) as f64;
        }
        self.clock = time;
    }

    fn close_horizon(&mut self, horizon: f64) {
        if horizon > self.clock {
            self.advance_clock(horizon);
        }
    }

    fn arrival(&mut self, station: Station) -> Result<()> {
        let i = station.index();
        let mean_gap = if i == 0 {
            1.0 / self.params.lambda1
        } else {
            1.0 / self.params.lambda2
        };
        if i == 1 {
            self.content2_seen += self.q[1] + u64::from(self.in_service[1]);
        }
        self.arrivals[i] += 1;
        self.q[i] += 1;
        let rng = if i == 0 {
            &mut self.streams.arrivals1
        } else {
            &mut self.streams.arrivals2
        };
        self.next_arrival[i] = self.clock + exponential(rng, mean_gap);

        let total = self.q[0] + self.q[1];
        if total > self.explosion_cap {
            return Err(Error::ExplosionGuard {
                total,
                cap: self.explosion_cap,
                time: self.clock,
            });
        }
        if self.activity == Activity::Idle {
            // Parked server with zero travel time: the pending return to
            // station 2 happens now.
            self.arrive_at_station2();
        }
        Ok(())
    }

    fn complete_activity(&mut self) {
        let activity = self.activity;
        self.activity = Activity::Idle;
        self.completion = f64::INFINITY;
        match activity {
            Activity::Serving2 => {
                self.in_service[1] = false;
                self.departures[1] += 1;
                if let Some(c) = self.cycle.as_mut() {
                    c.services_at_2 += 1;
                }
                if self.q[1] > 0 {
                    self.start_service2();
                } else {
                    self.start_travel_to1();
                }
            }
            Activity::TravelTo1 => self.arrive_at_station1(),
            Activity::Serving1 { served } => {
                self.in_service[0] = false;
                self.departures[0] += 1;
                if let Some(c) = self.cycle.as_mut() {
                    c.services_at_1 += 1;
                }
                self.try_serve1(served + 1);
            }
            Activity::TravelTo2 => self.arrive_at_station2(),
            Activity::Idle => unreachable!("idle server has no completion event"),
        }
    }

    fn schedule(&mut self, activity: Activity, duration: f64) {
        self.activity = activity;
        self.completion = self.clock + duration;
    }

    fn emit_sample(&mut self, station: Station, cycle_type: CycleType) {
        let i = station.index();
        self.visits[i] += 1;
        let sample = EmbeddedSample {
            n: self.visits[i],
            station,
            time: self.clock,
            q_at_arrival: self.q[i],
            q_other: self.q[1 - i],
            cycle_type,
        };
        self.observer.on_embedded(&sample);
    }

    fn arrive_at_station2(&mut self) {
        let q2 = self.q[1];
        if let Some(c) = self.cycle.take() {
            let record = CycleRecord {
                index: c.index,
                start: c.start,
                end: self.clock,
                cycle_type: c.cycle_type,
                services_at_1: c.services_at_1,
                services_at_2: c.services_at_2,
                q2_at_start: c.q2_at_start,
                q2_at_end: q2,
            };
            self.observer.on_cycle(&record);
            if q2 == 0 {
                self.regenerations += 1;
            }
        }
        let cycle_type = if q2 > 0 {
            CycleType::Standard
        } else {
            CycleType::Modified
        };
        self.cycle = Some(OpenCycle {
            index: self.cycles_started,
            start: self.clock,
            cycle_type,
            services_at_1: 0,
            services_at_2: 0,
            q2_at_start: q2,
        });
        self.cycles_started += 1;
        self.cycles_by_type[usize::from(cycle_type == CycleType::Modified)] += 1;
        self.emit_sample(Station::Two, cycle_type);
        if q2 > 0 {
            self.start_service2();
        } else {
            self.start_travel_to1();
        }
    }

    fn start_service2(&mut self) {
        self.q[1] -= 1;
        self.in_service[1] = true;
        let d = self.params.b2.sample(&mut self.streams.services2);
        self.schedule(Activity::Serving2, d);
    }

    fn travel_time(&mut self) -> Option<f64> {
        if self.params.gamma > 0.0 {
            Some(exponential(&mut self.streams.travels, self.params.gamma))
        } else {
            None
        }
    }

    fn start_travel_to1(&mut self) {
        match self.travel_time() {
            Some(d) => self.schedule(Activity::TravelTo1, d),
            None => self.arrive_at_station1(),
        }
    }

    fn arrive_at_station1(&mut self) {
        let cycle_type = self.current_cycle_type();
        self.emit_sample(Station::One, cycle_type);
        self.try_serve1(0);
    }

    fn current_cycle_type(&self) -> CycleType {
        self.cycle.map_or(CycleType::Modified, |c| c.cycle_type)
    }

    fn visit_limit(&self) -> u32 {
        match self.current_cycle_type() {
            CycleType::Standard => 1,
            CycleType::Modified => 1 + self.params.m,
        }
    }

    fn try_serve1(&mut self, served: u32) {
        let available = self.saturated() || self.q[0] > 0;
        if served < self.visit_limit() && available {
            if !self.saturated() {
                self.q[0] -= 1;
            }
            self.in_service[0] = true;
            let d = self.params.b1.sample(&mut self.streams.services1);
            self.schedule(Activity::Serving1 { served }, d);
        } else {
            self.start_travel_to2();
        }
    }

    fn start_travel_to2(&mut self) {
        match self.travel_time() {
            Some(d) => self.schedule(Activity::TravelTo2, d),
            None => {
                let idle_cycle = self.cycle.is_some_and(|c| {
                    c.start == self.clock && c.services_at_1 == 0 && c.services_at_2 == 0
                });
                if idle_cycle && self.q == [0, 0] {
                    // Zero travel time and nothing to do: park until the next
                    // arrival instead of cycling endlessly at one instant.
                    self.activity = Activity::Idle;
                    self.completion = f64::INFINITY;
                } else {
                    self.arrive_at_station2();
                }
            }
        }
    }

    fn snapshot(&self) -> SimState {
        let residual = (self.completion - self.clock).max(0.0);
        let phase = match self.activity {
            Activity::Idle => ServerPhase::ArrivingAtStation2,
            Activity::Serving2 => ServerPhase::ServingStation2 { residual },
            Activity::TravelTo1 => ServerPhase::TravelingTo1 { residual },
            Activity::Serving1 { served } => ServerPhase::ServingStation1 {
                residual,
                served_this_visit: served,
            },
            Activity::TravelTo2 => ServerPhase::TravelingTo2 { residual },
        };
        let finite = |t: f64| t.is_finite().then_some(t);
        SimState {
            clock: self.clock,
            q1: self.q[0],
            q2: self.q[1],
            phase,
            cycle_type: self.current_cycle_type(),
            next_arrival1: finite(self.next_arrival[0]),
            next_arrival2: finite(self.next_arrival[1]),
            next_completion: finite(self.completion),
            arrivals: self.arrivals,
            departures: self.departures,
            in_service: self.in_service,
            cycles_standard: self.cycles_by_type[0],
            cycles_modified: self.cycles_by_type[1],
            regenerations: self.regenerations,
            area_content: self.area,
            content2_seen_by_arrivals: self.content2_seen,
        }
    }
}
