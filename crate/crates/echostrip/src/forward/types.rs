//! Receiver-side data containers shared by all forward solvers.

use crate::{Error, Result};
use std::io::{BufRead, Write as _};
use std::path::Path;

/// The sharp front in the measured field: when it arrives and, if finite,
/// the coefficient of the delta it carries.  A coincident source/receiver
/// pair has arrival 0 and no finite amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPart {
    pub arrival: f64,
    pub amplitude: Option<f64>,
}

/// Tail of the field at a fixed receiver on a uniform time grid, together
/// with the front bookkeeping and a tag naming the solver that produced it.
#[derive(Debug, Clone)]
pub struct ReceiverWaveform {
    pub source: [f64; 3],
    pub receiver: [f64; 3],
    pub start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub singular: SingularPart,
    pub solver: String,
}

impl ReceiverWaveform {
    pub fn time(&self, k: usize) -> f64 {
        self.start + self.dt * k as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }

    /// Linear interpolation of the tail; zero before the front arrives and
    /// outside the sampled window.
    pub fn sample(&self, t: f64) -> f64 {
        if t < self.singular.arrival {
            return 0.0;
        }
        let s = (t - self.start) / self.dt;
        if s < 0.0 || self.values.is_empty() {
            return 0.0;
        }
        let i = s.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let f = s - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn sup_difference(&self, other: &ReceiverWaveform) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# echostrip waveform")?;
        writeln!(f, "# solver = {}", self.solver)?;
        writeln!(
            f,
            "# source = {:.17e} {:.17e} {:.17e}",
            self.source[0], self.source[1], self.source[2]
        )?;
        writeln!(
            f,
            "# receiver = {:.17e} {:.17e} {:.17e}",
            self.receiver[0], self.receiver[1], self.receiver[2]
        )?;
        writeln!(f, "# arrival = {:.17e}", self.singular.arrival)?;
        match self.singular.amplitude {
            Some(a) => writeln!(f, "# front_amplitude = {:.17e}", a)?,
            None => writeln!(f, "# front_amplitude = none")?,
        }
        writeln!(f, "# start = {:.17e}", self.start)?;
        writeln!(f, "# dt = {:.17e}", self.dt)?;
        writeln!(f, "time,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(f, "{:.17e},{:.17e}", self.time(k), v)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<ReceiverWaveform> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut source = None;
        let mut receiver = None;
        let mut arrival = None;
        let mut amplitude = None;
        let mut start = 0.0;
        let mut dt = None;
        let mut solver = String::from("unknown");
        let mut values = Vec::new();
        let parse_vec = |v: &str| -> Result<[f64; 3]> {
            let parts: Vec<f64> = v
                .split_whitespace()
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Invalid(format!("bad vector {v:?}: {e}")))?;
            if parts.len() != 3 {
                return Err(Error::Invalid(format!("bad vector {v:?}")));
            }
            Ok([parts[0], parts[1], parts[2]])
        };
        for line in f.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "time,value" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    let (k, v) = (k.trim(), v.trim());
                    match k {
                        "solver" => solver = v.to_string(),
                        "source" => source = Some(parse_vec(v)?),
                        "receiver" => receiver = Some(parse_vec(v)?),
                        "arrival" => arrival = Some(parse_num(v)?),
                        "front_amplitude" => {
                            amplitude = if v == "none" { None } else { Some(parse_num(v)?) }
                        }
                        "start" => start = parse_num(v)?,
                        "dt" => dt = Some(parse_num(v)?),
                        _ => {}
                    }
                }
                continue;
            }
            let (_, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Invalid(format!("bad waveform row {line:?}")))?;
            values.push(parse_num(v)?);
        }
        Ok(ReceiverWaveform {
            source: source.ok_or_else(|| Error::Invalid("waveform missing source".into()))?,
            receiver: receiver
                .ok_or_else(|| Error::Invalid("waveform missing receiver".into()))?,
            start,
            dt: dt.ok_or_else(|| Error::Invalid("waveform missing dt".into()))?,
            values,
            singular: SingularPart {
                arrival: arrival
                    .ok_or_else(|| Error::Invalid("waveform missing arrival".into()))?,
                amplitude,
            },
            solver,
        })
    }
}

fn parse_num(v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|e| Error::Invalid(format!("bad number {v:?}: {e}")))
}
