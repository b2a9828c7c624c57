//! Statistical and exact checks of the samplers.
//!
//! Each `verify_*` function is deterministic given its seed.

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::bdp::{sample_bdp, Ball};
use crate::error::{arg_err, Result};
use crate::magm::{
    build_color_index, effective_lambda, sample_colors, ColorAssignment, MagmSampler,
};
use crate::oracle::sample_poisson_exact;
use crate::params::{InitiatorMatrix, ModelConfig, MuVector, ParamStack};
use crate::rng::RngStream;

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// Smallest expected count allowed in a chi-square bin.
const MIN_EXPECTED: f64 = 5.0;

/// Outcome of one goodness-of-fit test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GofReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub pass: bool,
}

impl GofReport {
    pub fn from_statistic(statistic: f64, degrees_of_freedom: usize, alpha: f64) -> Self {
        let p_value = chi_square_sf(statistic, degrees_of_freedom);
        Self {
            statistic,
            degrees_of_freedom,
            p_value,
            pass: p_value >= alpha,
        }
    }
}

/// Upper tail `P[χ²_df >= x]`.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 || x <= 0.0 {
        return 1.0;
    }
    if !x.is_finite() {
        return 0.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

pub fn poisson_pmf(k: u64, rate: f64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * rate.ln() - rate - ln_gamma(k + 1.0)).exp()
}

/// `P[X >= k]` for `X ~ Poisson(rate)`.
pub fn poisson_sf(k: u64, rate: f64) -> f64 {
    if k == 0 {
        1.0
    } else if rate == 0.0 {
        0.0
    } else {
        gamma_lr(k as f64, rate)
    }
}

/// Pearson statistic of observed against expected counts, `df = bins - 1`.
pub fn chi_square_counts(observed: &[u64], expected: &[f64], alpha: f64) -> Result<GofReport> {
    if observed.len() != expected.len() || observed.is_empty() {
        return arg_err("observed and expected must be non-empty and equal length");
    }
    let stat = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    Ok(GofReport::from_statistic(stat, observed.len() - 1, alpha))
}

/// Goodness of fit of integer samples to `Poisson(rate)`. Bins are merged
/// (tail last) until every expected count is at least 5.
pub fn chi_square_poisson(samples: &[u64], rate: f64, alpha: f64) -> Result<GofReport> {
    if samples.len() < 1000 {
        return arg_err(format!(
            "chi-square Poisson test needs at least 1000 samples, got {}",
            samples.len()
        ));
    }
    if !rate.is_finite() || rate < 0.0 {
        return arg_err(format!("rate {rate} must be finite and non-negative"));
    }
    if rate == 0.0 {
        let stat = if samples.iter().all(|&s| s == 0) { 0.0 } else { f64::INFINITY };
        let p_value = if stat == 0.0 { 1.0 } else { 0.0 };
        return Ok(GofReport {
            statistic: stat,
            degrees_of_freedom: 0,
            p_value,
            pass: p_value >= alpha,
        });
    }
    let total = samples.len() as f64;
    let max_k = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; max_k + 2];
    for &s in samples {
        hist[s as usize] += 1;
    }
    let observed_from = |k: usize| -> u64 { hist.iter().skip(k).sum() };

    let mut bins: Vec<(f64, u64)> = Vec::new();
    let (mut acc_e, mut acc_o) = (0.0, 0u64);
    let mut k = 0usize;
    loop {
        acc_e += total * poisson_pmf(k as u64, rate);
        acc_o += hist.get(k).copied().unwrap_or(0);
        let tail = total * poisson_sf(k as u64 + 1, rate);
        if tail < MIN_EXPECTED {
            bins.push((acc_e + tail, acc_o + observed_from(k + 1)));
            break;
        }
        if acc_e >= MIN_EXPECTED {
            bins.push((acc_e, acc_o));
            acc_e = 0.0;
            acc_o = 0;
        }
        k += 1;
    }
    if bins.len() > 1 && bins[bins.len() - 1].0 < MIN_EXPECTED {
        let (e, o) = bins.pop().expect("non-empty");
        let last = bins.last_mut().expect("non-empty");
        last.0 += e;
        last.1 += o;
    }
    let (expected, observed): (Vec<f64>, Vec<u64>) = bins.into_iter().unzip();
    chi_square_counts(&observed, &expected, alpha)
}

/// Two-sample homogeneity test of histograms over the same categories.
/// Adjacent categories are pooled (left to right) until each bin holds at
/// least 10 observations across both samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], alpha: f64) -> Result<GofReport> {
    let (stat, df) = two_sample_statistic(a, b)?;
    Ok(GofReport::from_statistic(stat, df, alpha))
}

fn two_sample_statistic(a: &[u64], b: &[u64]) -> Result<(f64, usize)> {
    let len = a.len().max(b.len());
    let at = |h: &[u64], k: usize| h.get(k).copied().unwrap_or(0);
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return arg_err("two-sample test needs observations in both samples");
    }
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let (mut pa, mut pb) = (0u64, 0u64);
    for k in 0..len {
        pa += at(a, k);
        pb += at(b, k);
        if pa + pb >= 2 * MIN_EXPECTED as u64 {
            bins.push((pa, pb));
            pa = 0;
            pb = 0;
        }
    }
    if pa + pb > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += pa;
                last.1 += pb;
            }
            None => bins.push((pa, pb)),
        }
    }
    let ka = (nb as f64 / na as f64).sqrt();
    let kb = (na as f64 / nb as f64).sqrt();
    let stat = bins
        .iter()
        .map(|&(x, y)| {
            let (x, y) = (x as f64, y as f64);
            (ka * x - kb * y).powi(2) / (x + y)
        })
        .sum();
    Ok((stat, bins.len() - 1))
}

pub fn pearson_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Per-cell Poisson fits and sampled cell-pair correlations of a BDP.
#[derive(Clone, Debug)]
pub struct BdpPoissonReport {
    /// Indexed by `c * 2^d + c2`.
    pub cells: Vec<GofReport>,
    pub correlations: Vec<((Ball, Ball), f64)>,
}

impl BdpPoissonReport {
    pub fn all_cells_pass(&self) -> bool {
        self.cells.iter().all(|r| r.pass)
    }

    pub fn max_abs_correlation(&self) -> f64 {
        self.correlations.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }
}

/// Number of random cell pairs whose correlation is reported.
pub const CORRELATION_PAIRS: usize = 10;

/// Runs `runs` BDP realizations on a stack with `d <= 3` and tests every
/// cell count against `Poisson(Γ_{c c2})`.
pub fn verify_theorem1(theta: &ParamStack, runs: usize, alpha: f64, seed: u64) -> Result<BdpPoissonReport> {
    let d = theta.depth();
    if d > 3 {
        return arg_err(format!("verify_theorem1 supports d <= 3, got {d}"));
    }
    let side = 1usize << d;
    let cells = side * side;
    let mut stream = RngStream::new(seed, "theorem1");
    let mut counts = vec![vec![0u64; runs]; cells];
    for run in 0..runs {
        for b in sample_bdp(theta, &mut stream)? {
            counts[b.source_color as usize * side + b.target_color as usize][run] += 1;
        }
    }
    let reports = (0..cells)
        .map(|cell| {
            let rate = theta.gamma((cell / side) as u64, (cell % side) as u64);
            chi_square_poisson(&counts[cell], rate, alpha)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut correlations = Vec::with_capacity(CORRELATION_PAIRS);
    let as_ball = |cell: usize| Ball::new((cell / side) as u64, (cell % side) as u64);
    if cells > 1 {
        let mut pick = RngStream::new(seed, "theorem1/pairs");
        while correlations.len() < CORRELATION_PAIRS {
            let x = pick.draw_uniform_index(cells as u64)? as usize;
            let y = pick.draw_uniform_index(cells as u64)? as usize;
            if x == y {
                continue;
            }
            let fx: Vec<f64> = counts[x].iter().map(|&v| v as f64).collect();
            let fy: Vec<f64> = counts[y].iter().map(|&v| v as f64).collect();
            correlations.push(((as_ball(x), as_ball(y)), pearson_correlation(&fx, &fy)));
        }
    }
    Ok(BdpPoissonReport {
        cells: reports,
        correlations,
    })
}

fn random_stack(d: usize, stream: &mut RngStream) -> Result<ParamStack> {
    let levels = (0..d)
        .map(|_| {
            InitiatorMatrix::new(
                stream.draw_uniform(),
                stream.draw_uniform(),
                stream.draw_uniform(),
                stream.draw_uniform(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ParamStack::new(levels)
}

/// Counts pairs with target above the proposal bound, over all `4^d` pairs.
pub fn count_theorem3_violations(theta: &ParamStack, mu: &MuVector, colors: &ColorAssignment) -> Result<u64> {
    let index = build_color_index(colors, mu)?;
    let side = theta.num_colors();
    let mut violations = 0;
    for c in 0..side {
        for c2 in 0..side {
            let e = effective_lambda(&index, theta, c, c2)?;
            if e.target > e.bound {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// Randomized exhaustive check that every target rate is below its bound.
/// Instances draw θ entries and μ uniformly from [0, 1] (with occasional
/// 0, 1/2 and 1 levels) and `n` uniformly from `1..=2^(d+1)`.
pub fn verify_theorem3(d: usize, trials: usize, seed: u64) -> Result<bool> {
    if d == 0 || d > 8 {
        return arg_err(format!("verify_theorem3 supports 1 <= d <= 8, got {d}"));
    }
    let mut stream = RngStream::new(seed, "theorem3");
    for _ in 0..trials {
        let theta = random_stack(d, &mut stream)?;
        let mu = (0..d)
            .map(|_| match stream.draw_uniform_index(8).expect("k > 0") {
                0 => 0.0,
                1 => 1.0,
                2 => 0.5,
                _ => stream.draw_uniform(),
            })
            .collect();
        let mu = MuVector::new(mu)?;
        let n = 1 + stream.draw_uniform_index(1 << (d + 1))? as u32;
        let colors = sample_colors(&mu, n, &mut stream);
        if count_theorem3_violations(&theta, &mu, &colors)? > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest node count accepted by [`verify_sampler_equivalence`].
pub const MAX_EQUIVALENCE_NODES: u32 = 16;

/// Two-sample test of per-pair count distributions: accept-reject sampler
/// against the exact Poisson oracle, both conditioned on `colors`.
///
/// Each ordered node pair contributes one homogeneity statistic over its
/// count histogram; pairs are independent under both samplers, so the
/// statistics and degrees of freedom add up. `acceptance_scale` below 1
/// deliberately breaks the sampler.
pub fn verify_sampler_equivalence(
    config: &ModelConfig,
    colors: &ColorAssignment,
    runs: usize,
    alpha: f64,
    acceptance_scale: f64,
) -> Result<GofReport> {
    let n = config.n;
    if n > MAX_EQUIVALENCE_NODES {
        return arg_err(format!(
            "verify_sampler_equivalence supports n <= {MAX_EQUIVALENCE_NODES}, got {n}"
        ));
    }
    let mu = config.require_mu()?;
    let pairs = (n * n) as usize;
    let sampler = MagmSampler::new(&config.theta, mu, colors.clone())?
        .with_acceptance_scale(acceptance_scale);

    let mut ar_stream = RngStream::new(config.seed, "equivalence/ar");
    let mut oracle_stream = RngStream::new(config.seed, "equivalence/oracle");
    let mut hist_ar: Vec<Vec<u64>> = vec![Vec::new(); pairs];
    let mut hist_oracle: Vec<Vec<u64>> = vec![Vec::new(); pairs];
    let mut tally = vec![0usize; pairs];

    let mut record = |edges: &[(u32, u32)], hist: &mut Vec<Vec<u64>>| {
        tally.iter_mut().for_each(|t| *t = 0);
        for &(i, j) in edges {
            tally[(i * n + j) as usize] += 1;
        }
        for (h, &t) in hist.iter_mut().zip(tally.iter()) {
            if h.len() <= t {
                h.resize(t + 1, 0);
            }
            h[t] += 1;
        }
    };
    for _ in 0..runs {
        let (edges, _) = sampler.sample(&mut ar_stream)?;
        record(&edges, &mut hist_ar);
        let oracle = sample_poisson_exact(config, colors, &mut oracle_stream)?;
        record(&oracle.edges, &mut hist_oracle);
    }

    let mut statistic = 0.0;
    let mut df = 0;
    for (a, b) in hist_ar.iter().zip(&hist_oracle) {
        let (s, k) = two_sample_statistic(a, b)?;
        statistic += s;
        df += k;
    }
    Ok(GofReport::from_statistic(statistic, df, alpha))
}

/// Fraction of seeds whose colors satisfy `m_F <= log2 n` and `m_I <= log2 n`.
pub fn verify_theorem2(n: u32, mu: &MuVector, seeds: impl IntoIterator<Item = u64>) -> Result<f64> {
    if n < 1 << 10 {
        return arg_err(format!("verify_theorem2 needs n >= 2^10, got {n}"));
    }
    let limit = f64::from(n).log2();
    let mut total = 0usize;
    let mut ok = 0usize;
    for seed in seeds {
        let colors = sample_colors(mu, n, &mut RngStream::new(seed, "theorem2"));
        let index = build_color_index(&colors, mu)?;
        total += 1;
        if index.m_f() <= limit && f64::from(index.m_i()) <= limit {
            ok += 1;
        }
    }
    if total == 0 {
        return arg_err("verify_theorem2 needs at least one seed");
    }
    Ok(ok as f64 / total as f64)
}
