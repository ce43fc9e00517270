//! Subcommand implementations. Each returns the process exit code on
//! success; errors map to exit code 2, or 3 for the explosion guard.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polling_core::analysis;
use polling_core::experiments::{self, DriftEstimate, DriftObserver, DriftOptions};
use polling_core::simulator::trace::TraceWriter;
use polling_core::simulator::{run_full_observed, FullConfig};
use polling_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, RunConfig, SweepMode};
use crate::output::{sig17, sig6, write_atomic, write_json, AtomicFile};

pub const EXIT_OK: u8 = 0;
/// Unstable verdict, failed validation, or failed demo.
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_ERROR: u8 = 2;
pub const EXIT_EXPLOSION: u8 = 3;

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ExplosionGuard { .. }) => EXIT_EXPLOSION,
        _ => EXIT_ERROR,
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    /// Output directory; `analyze` writes nothing when absent.
    pub out: Option<PathBuf>,
    /// Worker threads for independent sweep points.
    pub jobs: usize,
}

pub fn run(command: Command, config: &RunConfig, ctx: &RunContext, stdout: &mut impl Write) -> Result<u8> {
    config.validate(command)?;
    let mut text = String::new();
    let code = match command {
        Command::Analyze => analyze(config, ctx, &mut text)?,
        Command::Simulate => simulate(config, &out_dir(ctx)?, &mut text)?,
        Command::Saturate => saturate(config, &out_dir(ctx)?, &mut text)?,
        Command::Sweep => sweep(config, &out_dir(ctx)?, ctx.jobs, &mut text)?,
        Command::DemoMoments => demo(config, &out_dir(ctx)?, &mut text)?,
    };
    stdout.write_all(text.as_bytes())?;
    Ok(code)
}

fn out_dir(ctx: &RunContext) -> Result<PathBuf> {
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn line(text: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(text, "{key:<12}{value}");
}

fn holds(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

#[derive(Serialize)]
struct AnalyzeResult {
    verdict: polling_core::StabilityVerdict,
    chain: Option<polling_core::AuxiliaryChainQuantities>,
}

fn analyze(config: &RunConfig, ctx: &RunContext, text: &mut String) -> Result<u8> {
    let p = &config.params;
    let verdict = analysis::is_stable_rate(p)?;
    let chain = if verdict.stab1_holds {
        Some(analysis::auxiliary_chain(p)?)
    } else {
        None
    };
    line(text, "rho", sig6(verdict.rho));
    line(text, "rho0", sig6(verdict.rho0));
    if let Some(c) = &chain {
        line(text, "q", sig6(c.q));
        line(text, "beta", sig6(c.beta));
        line(text, "p00", sig6(c.p00));
        line(text, "p10", sig6(c.p10));
        line(text, "E[nu]", sig6(c.e_nu));
        line(text, "E[T]", sig6(c.e_t));
        line(text, "r", sig6(c.r));
    }
    line(text, "stab1", holds(verdict.stab1_holds));
    match verdict.margin {
        Some(margin) => line(text, "stab2", format!("{} (margin {})", holds(margin > 0.0), sig6(margin))),
        None => line(text, "stab2", "undefined (station 2 overloaded)"),
    }
    line(text, "stab3", holds(verdict.stab3_holds));
    line(text, "verdict", if verdict.stable { "STABLE" } else { "UNSTABLE" });
    if let Some(dir) = &ctx.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("analysis.json"), "analyze", config, &AnalyzeResult { verdict, chain })?;
    }
    Ok(if verdict.stable { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Serialize)]
struct SimulateResult {
    final_state: polling_core::simulator::SimState,
    drift: Option<DriftEstimate>,
}

fn simulate(config: &RunConfig, dir: &Path, text: &mut String) -> Result<u8> {
    let s = &config.simulate;
    let full = FullConfig {
        horizon: s.horizon,
        seed: config.seed,
        sample_every: s.sample_every,
        initial_q1: s.initial_q1,
        initial_q2: s.initial_q2,
        explosion_cap: s.explosion_cap,
    };
    let embedded = AtomicFile::create(&dir.join("embedded.csv"))?;
    let cycles = AtomicFile::create(&dir.join("cycles.csv"))?;
    let mut trace = TraceWriter::new(embedded, cycles, s.sample_every)?;
    let mut drift = DriftObserver::new(s.horizon, &DriftOptions::default())?;
    let state = run_full_observed(&config.params, &full, (&mut trace, &mut drift))?;
    let (embedded, cycles) = trace.finish()?;
    embedded.commit()?;
    cycles.commit()?;
    let drift = drift.finish(config.params.lambda1).ok();

    line(text, "time", sig6(state.clock));
    line(text, "q1", state.content(polling_core::simulator::Station::One));
    line(text, "q2", state.content(polling_core::simulator::Station::Two));
    line(text, "standard", state.cycles_standard);
    line(text, "modified", state.cycles_modified);
    match &drift {
        Some(d) => {
            let shape = if d.is_growing() {
                "growing"
            } else if d.is_flat() {
                "flat"
            } else {
                "decreasing"
            };
            line(text, "drift", format!("{} +- {} ({shape})", sig6(d.slope), sig6(d.stderr)));
        }
        None => line(text, "drift", "n/a (horizon too short)"),
    }
    write_json(
        &dir.join("simulate.json"),
        "simulate",
        config,
        &SimulateResult {
            final_state: state,
            drift,
        },
    )?;
    Ok(EXIT_OK)
}

fn saturate(config: &RunConfig, dir: &Path, text: &mut String) -> Result<u8> {
    let report = experiments::validate_against_analysis(&config.params, config.saturate.n_regenerations, config.seed)?;
    let _ = writeln!(text, "{:<8}{:>14}{:>14}{:>14}{:>9}", "name", "estimate", "stderr", "reference", "z");
    for e in &report.entries {
        let _ = writeln!(
            text,
            "{:<8}{:>14}{:>14}{:>14}{:>9.2}",
            e.name,
            sig6(e.estimate),
            sig6(e.stderr),
            sig6(e.reference),
            e.z
        );
    }
    line(text, "cycles", report.stats.n_cycles);
    line(text, "agreement", if report.passed { "PASS" } else { "FAIL" });
    write_json(&dir.join("saturate.json"), "saturate", config, &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Serialize)]
struct SweepRow {
    lambda1: f64,
    analytic_r: f64,
    analytic_stable: bool,
    slope: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct SweepResult {
    mode: SweepMode,
    lo: f64,
    hi: f64,
    /// Final bracket in bisect mode.
    bracket: Option<[f64; 2]>,
    rows: Vec<SweepRow>,
}

fn sweep(config: &RunConfig, dir: &Path, jobs: usize, text: &mut String) -> Result<u8> {
    let s = &config.sweep;
    let p = &config.params;
    let r = analysis::service_rate(p)?;
    let lo = s.lo.unwrap_or(0.5 * r);
    let hi = s.hi.unwrap_or(1.5 * r);
    let row = |d: &DriftEstimate| SweepRow {
        lambda1: d.lambda1,
        analytic_r: r,
        analytic_stable: r > d.lambda1,
        slope: d.slope,
        stderr: d.stderr,
    };

    let (rows, bracket) = match s.mode {
        SweepMode::Grid => {
            let step = (hi - lo) / (s.points - 1) as f64;
            let grid: Vec<f64> = (0..s.points).map(|i| lo + i as f64 * step).collect();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
            let drifts: Vec<DriftEstimate> = pool.install(|| {
                grid.par_iter()
                    .map(|&l| experiments::estimate_drift(&p.with_lambda1(l)?, s.horizon, config.seed))
                    .collect::<polling_core::Result<_>>()
            })?;
            (drifts.iter().map(row).collect::<Vec<_>>(), None)
        }
        SweepMode::Bisect => {
            let b = experiments::find_boundary(p, lo, hi, s.iterations, s.horizon, config.seed)?;
            (b.points.iter().map(row).collect(), Some([b.lo, b.hi]))
        }
    };

    let mut csv = String::from("lambda1,analytic_r,analytic_stable,slope,stderr\n");
    let _ = writeln!(text, "{:>12}{:>12}{:>9}{:>14}{:>14}", "lambda1", "r", "stable", "slope", "stderr");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            sig17(row.lambda1),
            sig17(row.analytic_r),
            row.analytic_stable,
            sig17(row.slope),
            sig17(row.stderr)
        );
        let _ = writeln!(
            text,
            "{:>12}{:>12}{:>9}{:>14}{:>14}",
            sig6(row.lambda1),
            sig6(row.analytic_r),
            if row.analytic_stable { "yes" } else { "no" },
            sig6(row.slope),
            sig6(row.stderr)
        );
    }
    if let Some([blo, bhi]) = bracket {
        line(text, "bracket", format!("[{}, {}]", sig6(blo), sig6(bhi)));
        line(text, "contains r", if blo <= r && r <= bhi { "yes" } else { "no" });
    }
    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
    write_json(
        &dir.join("sweep.json"),
        "sweep",
        config,
        &SweepResult {
            mode: s.mode,
            lo,
            hi,
            bracket,
            rows,
        },
    )?;
    Ok(EXIT_OK)
}

fn demo(config: &RunConfig, dir: &Path, text: &mut String) -> Result<u8> {
    let d = &config.demo;
    let base = d.base.clone().unwrap_or_else(|| config.params.b1.clone());
    let report = experiments::moment_demo(d.k_matched, &base, &config.params, d.lambda1, d.horizon, config.seed)?;
    line(text, "k_matched", report.k_matched);
    line(text, "lambda1", sig6(report.lambda1));
    let _ = writeln!(text, "{:<12}{:>16}{:>16}", "", "base", "alternative");
    let (b, a) = (&report.base, &report.alternative);
    let mut pair = |key: &str, x: String, y: String| {
        let _ = writeln!(text, "{key:<12}{x:>16}{y:>16}");
    };
    pair("family", b.distribution.family().to_string(), a.distribution.family().to_string());
    for (k, (mb, ma)) in b.moments.iter().zip(&a.moments).enumerate() {
        pair(&format!("moment {}", k + 1), sig6(*mb), sig6(*ma));
    }
    pair("beta", sig6(b.beta), sig6(a.beta));
    pair("r", sig6(b.r), sig6(a.r));
    let yes_no = |v: bool| if v { "yes" } else { "no" }.to_string();
    pair("stable", yes_no(b.analytic_stable), yes_no(a.analytic_stable));
    pair("slope", sig6(b.drift.slope), sig6(a.drift.slope));
    pair("stderr", sig6(b.drift.stderr), sig6(a.drift.stderr));
    pair("consistent", yes_no(b.consistent()), yes_no(a.consistent()));
    line(text, "demo", if report.succeeded { "SUCCEEDED" } else { "FAILED" });
    write_json(&dir.join("demo.json"), "demo-moments", config, &report)?;
    Ok(if report.succeeded { EXIT_OK } else { EXIT_NEGATIVE })
}
