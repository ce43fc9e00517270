//! CSV traces of embedded samples and cycle records.
//!
//! Embedded samples: `n,time,station,q1,q2,cycle_type`.
//! Cycle records: `index,start,end,type,s1,s2,q2_start`.
//! Times are written with 17 significant digits.

use std::io::{self, Write};

use super::{CycleRecord, EmbeddedSample, Observer};

pub const EMBEDDED_HEADER: &str = "n,time,station,q1,q2,cycle_type";
pub const CYCLE_HEADER: &str = "index,start,end,type,s1,s2,q2_start";

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_embedded_row<W: Write>(out: &mut W, s: &EmbeddedSample) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{}",
        s.n,
        fmt17(s.time),
        s.station.number(),
        s.q1(),
        s.q2(),
        s.cycle_type.as_str()
    )
}

pub fn write_cycle_row<W: Write>(out: &mut W, c: &CycleRecord) -> io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        c.index,
        fmt17(c.start),
        fmt17(c.end),
        c.cycle_type.as_str(),
        c.services_at_1,
        c.services_at_2,
        c.q2_at_start
    )
}

pub fn write_embedded<W: Write>(mut out: W, samples: &[EmbeddedSample]) -> io::Result<()> {
    writeln!(out, "{EMBEDDED_HEADER}")?;
    samples.iter().try_for_each(|s| write_embedded_row(&mut out, s))
}

pub fn write_cycles<W: Write>(mut out: W, cycles: &[CycleRecord]) -> io::Result<()> {
    writeln!(out, "{CYCLE_HEADER}")?;
    cycles.iter().try_for_each(|c| write_cycle_row(&mut out, c))
}

/// Observer streaming every `every`-th sample and cycle to two CSV sinks.
/// The first I/O error stops further writes and is reported by [`finish`].
///
/// [`finish`]: TraceWriter::finish
#[derive(Debug)]
pub struct TraceWriter<A: Write, B: Write> {
    embedded: A,
    cycles: B,
    every: u64,
    seen: [u64; 2],
    error: Option<io::Error>,
}

impl<A: Write, B: Write> TraceWriter<A, B> {
    /// Writes both headers immediately.
    pub fn new(mut embedded: A, mut cycles: B, every: u64) -> io::Result<Self> {
        writeln!(embedded, "{EMBEDDED_HEADER}")?;
        writeln!(cycles, "{CYCLE_HEADER}")?;
        Ok(Self {
            embedded,
            cycles,
            every: every.max(1),
            seen: [0; 2],
            error: None,
        })
    }

    pub fn finish(mut self) -> io::Result<(A, B)> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.embedded.flush()?;
        self.cycles.flush()?;
        Ok((self.embedded, self.cycles))
    }

    fn keep(&mut self, i: usize) -> bool {
        let keep = self.error.is_none() && self.seen[i] % self.every == 0;
        self.seen[i] += 1;
        keep
    }
}

impl<A: Write, B: Write> Observer for TraceWriter<A, B> {
    fn on_embedded(&mut self, sample: &EmbeddedSample) {
        if self.keep(0) {
            if let Err(e) = write_embedded_row(&mut self.embedded, sample) {
                self.error = Some(e);
            }
        }
    }

    fn on_cycle(&mut self, record: &CycleRecord) {
        if self.keep(1) {
            if let Err(e) = write_cycle_row(&mut self.cycles, record) {
                self.error = Some(e);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{CycleType, Station};

    #[test]
    fn layout() {
        let sample = EmbeddedSample {
            n: 3,
            station: Station::One,
            time: 1.5,
            q_at_arrival: 4,
            q_other: 0,
            cycle_type: CycleType::Modified,
        };
        let mut buf = Vec::new();
        write_embedded(&mut buf, &[sample]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n,time,station,q1,q2,cycle_type\n3,1.5000000000000000e0,1,4,0,modified\n"
        );
        let rec = CycleRecord {
            index: 0,
            start: 0.0,
            end: 0.1,
            cycle_type: CycleType::Standard,
            services_at_1: 1,
            services_at_2: 2,
            q2_at_start: 1,
            q2_at_end: 0,
        };
        let mut buf = Vec::new();
        write_cycles(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "0,0.0000000000000000e0,1.0000000000000001e-1,standard,1,2,1"
        );
        assert_eq!("0.1".parse::<f64>().unwrap(), "1.0000000000000001e-1".parse::<f64>().unwrap());
    }

    #[test]
    fn streaming_matches_recorded() {
        use crate::simulator::{run_full, run_full_observed, FullConfig};
        use crate::{ServiceDistribution, SystemParams};
        let exp = |r| ServiceDistribution::exponential(r).unwrap();
        let p = SystemParams::new(0.3, 1.0, 0.5, 1, exp(2.0), exp(2.0)).unwrap();
        let mut cfg = FullConfig::new(500.0, 3);
        cfg.sample_every = 3;
        let out = run_full(&p, &cfg).unwrap();
        let mut writer = TraceWriter::new(Vec::new(), Vec::new(), 3).unwrap();
        run_full_observed(&p, &cfg, &mut writer).unwrap();
        let (e, c) = writer.finish().unwrap();
        let (mut e2, mut c2) = (Vec::new(), Vec::new());
        write_embedded(&mut e2, &out.samples).unwrap();
        write_cycles(&mut c2, &out.cycles).unwrap();
        assert_eq!(e, e2);
        assert_eq!(c, c2);
    }
}
