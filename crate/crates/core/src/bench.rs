//! Proposal cost estimation and the timing harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::bdp::sample_kpgm_bdp;
use crate::edges::{EdgeHeader, EdgeList};
use crate::error::{arg_err, Error, Result};
use crate::magm::{
    build_color_index, sample_colors, sample_magm_ar, sample_magm_simple, ColorAssignment,
    MagmSampler,
};
use crate::oracle::{sample_kpgm_exact, sample_magm_exact};
use crate::params::{expected_edges, InitiatorMatrix, ModelConfig, MuVector, ParamStack};
use crate::rng::RngStream;

/// Sampling algorithm selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Bdp,
    Ar,
    Simple,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Bdp => "bdp",
            Mode::Ar => "ar",
            Mode::Simple => "simple",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "bdp" => Ok(Mode::Bdp),
            "ar" => Ok(Mode::Ar),
            "simple" => Ok(Mode::Simple),
            _ => arg_err(format!("unknown mode '{s}' (exact, bdp, ar, simple)")),
        }
    }
}

/// Expected proposal balls per block and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    /// `m_F² e_M`, `m_F m_I e_MK`, `m_I m_F e_KM`, `m_I² e_K`.
    pub blocks: [f64; 4],
    pub total: f64,
}

/// Proposal volume of the accept-reject sampler for fixed colors, in O(nd).
pub fn estimate_cost(config: &ModelConfig, colors: &ColorAssignment) -> Result<CostEstimate> {
    let mu = config.require_mu()?;
    let index = build_color_index(colors, mu)?;
    let e = expected_edges(&config.theta, Some(mu), u64::from(config.n))?;
    let (mf, mi) = (index.m_f(), f64::from(index.m_i()));
    let blocks = [
        mf * mf * e.e_m.expect("mu given"),
        mf * mi * e.e_mk.expect("mu given"),
        mi * mf * e.e_km.expect("mu given"),
        mi * mi * e.e_k,
    ];
    Ok(CostEstimate {
        blocks,
        total: blocks.iter().sum(),
    })
}

/// One sample of the selected mode. KPGM modes ignore `mu` and `n`.
pub fn sample_mode(
    mode: Mode,
    config: &ModelConfig,
    stream: &mut RngStream,
    colors: Option<ColorAssignment>,
    threads: usize,
) -> Result<(EdgeList, Option<ColorAssignment>)> {
    if config.mu.is_none() {
        return match mode {
            Mode::Exact => Ok((sample_kpgm_exact(&config.theta, stream)?, None)),
            Mode::Bdp => Ok((sample_kpgm_bdp(&config.theta, stream, threads)?, None)),
            _ => arg_err(format!("mode {mode} needs mu")),
        };
    }
    match mode {
        Mode::Ar => {
            let (e, c) = sample_magm_ar_threads(config, stream, colors, threads)?;
            Ok((e, Some(c)))
        }
        Mode::Simple => {
            let (e, c) = sample_magm_simple(config, stream, colors)?;
            Ok((e, Some(c)))
        }
        Mode::Exact => {
            let colors = match colors {
                Some(c) => c,
                None => sample_colors(
                    config.require_mu()?,
                    config.n,
                    &mut stream.fork("colors"),
                ),
            };
            let e = sample_magm_exact(config, &colors, stream)?;
            Ok((e, Some(colors)))
        }
        Mode::Bdp => arg_err("mode bdp samples KPGM; use ar or simple for MAGM"),
    }
}

fn sample_magm_ar_threads(
    config: &ModelConfig,
    stream: &mut RngStream,
    colors: Option<ColorAssignment>,
    threads: usize,
) -> Result<(EdgeList, ColorAssignment)> {
    if threads <= 1 {
        return sample_magm_ar(config, stream, colors);
    }
    config.theta.require_bernoulli_valid()?;
    let mu = config.require_mu()?;
    let colors = match colors {
        Some(c) => c,
        None => sample_colors(mu, config.n, &mut stream.fork("colors")),
    };
    let sampler = MagmSampler::new(&config.theta, mu, colors)?.with_threads(threads);
    let (edges, _) = sampler.sample(stream)?;
    let header = EdgeHeader::for_config(config, "ar", stream.seed());
    Ok((EdgeList::new(header, edges), sampler.colors().clone()))
}

/// Swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    Mu,
    D,
}

/// Parsed `--sweep`, e.g. `mu=0.2:0.9:0.1`, `d=10:16:2` or `mu=0.3,0.5`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("bad sweep '{s}', expected mu=lo:hi:step or d=lo:hi:step"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let var = match name.trim() {
            "mu" => SweepVar::Mu,
            "d" => SweepVar::D,
            _ => return Err(bad()),
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = range.split(':').collect();
        let mut values = match parts.as_slice() {
            [lo, hi, step] => {
                let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
                if !(step > 0.0) || hi < lo {
                    return Err(bad());
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                // round away representation noise such as 0.30000000000000004
                (0..count)
                    .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
                    .collect::<Vec<_>>()
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
            _ => return Err(bad()),
        };
        values.sort_by(f64::total_cmp);
        if values.is_empty() {
            return Err(bad());
        }
        if var == SweepVar::D && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(bad());
        }
        if var == SweepVar::Mu && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(bad());
        }
        Ok(Self { var, values })
    }
}

/// Fixed settings of a sweep; the swept variable overrides `mu` or `d`.
#[derive(Clone, Debug)]
pub struct BenchSettings {
    pub theta: InitiatorMatrix,
    pub d: usize,
    /// Node count; `None` means `2^d`.
    pub n: Option<u32>,
    pub mu: f64,
    pub mode: Mode,
    pub reps: usize,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub mu: f64,
    pub d: usize,
    pub n: u32,
    pub mode: Mode,
    pub reps: usize,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
    pub mean_edges: f64,
    /// Expected edges of the sampled model (`e_K` for KPGM modes).
    pub e_m: f64,
}

pub const CSV_HEADER: &str = "mu,d,n,mode,reps,mean_seconds,stddev_seconds,mean_edges,e_M";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{},{}",
            self.mu,
            self.d,
            self.n,
            self.mode,
            self.reps,
            self.mean_seconds,
            self.stddev_seconds,
            self.mean_edges,
            self.e_m
        )
    }
}

fn mean_and_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Times one point: `reps` samples with seeds `seed + rep`, in memory.
pub fn bench_point(settings: &BenchSettings, mu: f64, d: usize) -> Result<BenchRecord> {
    if settings.reps < 1 {
        return arg_err("reps must be at least 1");
    }
    let theta = ParamStack::replicated(settings.theta, d)?;
    let kpgm = settings.mode == Mode::Bdp;
    let config = if kpgm {
        ModelConfig::kpgm(theta, settings.seed)?
    } else {
        let n = match settings.n {
            Some(n) => n,
            None if d <= 31 => 1u32 << d,
            None => return arg_err(format!("d = {d} needs an explicit n")),
        };
        ModelConfig::magm(theta, MuVector::uniform(mu, d)?, n, settings.seed)?
    };
    let e = expected_edges(&config.theta, config.mu.as_ref(), u64::from(config.n))?;
    let expected = e.e_m.unwrap_or(e.e_k);

    let mut seconds = Vec::with_capacity(settings.reps);
    let mut edges = Vec::with_capacity(settings.reps);
    for rep in 0..settings.reps {
        let mut stream = RngStream::new(settings.seed.wrapping_add(rep as u64), "bench");
        let start = Instant::now();
        let (list, _) = sample_mode(settings.mode, &config, &mut stream, None, settings.threads)?;
        seconds.push(start.elapsed().as_secs_f64());
        edges.push(list.len() as f64);
    }
    let (mean_seconds, stddev_seconds) = mean_and_stddev(&seconds);
    let (mean_edges, _) = mean_and_stddev(&edges);
    Ok(BenchRecord {
        mu: if kpgm { f64::NAN } else { mu },
        d,
        n: config.n,
        mode: settings.mode,
        reps: settings.reps,
        mean_seconds,
        stddev_seconds,
        mean_edges,
        e_m: expected,
    })
}

/// Runs every point of the sweep. Records come back sorted by the sweep value.
pub fn run_bench(settings: &BenchSettings, sweep: &Sweep) -> Result<Vec<BenchRecord>> {
    if settings.reps < 3 {
        return arg_err(format!("bench needs reps >= 3, got {}", settings.reps));
    }
    sweep
        .values
        .iter()
        .map(|&v| match sweep.var {
            SweepVar::Mu => bench_point(settings, v, settings.d),
            SweepVar::D => bench_point(settings, settings.mu, v as usize),
        })
        .collect()
}

pub fn write_csv<W: Write>(records: &[BenchRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}
