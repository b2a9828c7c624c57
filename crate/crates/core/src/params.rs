//! Model parameters and the closed-form quantities shared by every sampler.
//!
//! Colors and node ids are zero-based. Bit `k = 1` of a `d`-bit color is the
//! most significant one, so the first initiator matrix of a stack selects the
//! coarsest quadrant of the Kronecker product.

use std::fmt;
use std::str::FromStr;

use crate::error::{arg_err, Error, Result};
use crate::magm::ColorAssignment;

/// Largest supported number of levels; a color must fit a `u64` with headroom.
pub const MAX_LEVELS: usize = 62;

/// A 2x2 matrix of non-negative weights, indexed `[a][b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitiatorMatrix {
    entries: [[f64; 2]; 2],
}

impl InitiatorMatrix {
    pub fn new(theta_00: f64, theta_01: f64, theta_10: f64, theta_11: f64) -> Result<Self> {
        let entries = [[theta_00, theta_01], [theta_10, theta_11]];
        for (a, row) in entries.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return arg_err(format!(
                        "initiator entry ({a},{b}) = {v} must be finite and non-negative"
                    ));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::new(value, value, value, value)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a][b]
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }

    /// True iff every entry is at most 1, i.e. usable as edge probabilities.
    pub fn is_bernoulli_valid(&self) -> bool {
        self.entries.iter().flatten().all(|&v| v <= 1.0)
    }

    /// Entry-wise product with `weights`, all scaled by `scale`.
    pub(crate) fn weighted(&self, weights: [[f64; 2]; 2], scale: f64) -> Self {
        let mut entries = self.entries;
        for a in 0..2 {
            for b in 0..2 {
                entries[a][b] = scale * weights[a][b] * entries[a][b];
            }
        }
        Self { entries }
    }
}

impl fmt::Display for InitiatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.entries;
        write!(f, "{},{};{},{}", e[0][0], e[0][1], e[1][0], e[1][1])
    }
}

impl FromStr for InitiatorMatrix {
    type Err = Error;

    /// Parses `a,b;c,d` (row-major, semicolon between rows).
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.trim().split(';').collect();
        if rows.len() != 2 {
            return Err(Error::Parse(format!("expected `a,b;c,d`, got `{s}`")));
        }
        let mut vals = Vec::with_capacity(4);
        for row in rows {
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!("expected `a,b;c,d`, got `{s}`")));
            }
            for c in cols {
                let v: f64 = c
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{}` in `{s}`", c.trim())))?;
                vals.push(v);
            }
        }
        Self::new(vals[0], vals[1], vals[2], vals[3])
    }
}

/// The ordered stack of `d` initiator matrices, one per attribute level.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStack {
    levels: Vec<InitiatorMatrix>,
}

impl ParamStack {
    pub fn new(levels: Vec<InitiatorMatrix>) -> Result<Self> {
        if levels.is_empty() || levels.len() > MAX_LEVELS {
            return arg_err(format!(
                "stack depth {} outside 1..={MAX_LEVELS}",
                levels.len()
            ));
        }
        Ok(Self { levels })
    }

    pub fn replicated(matrix: InitiatorMatrix, d: usize) -> Result<Self> {
        Self::new(vec![matrix; d])
    }

    /// Parses one `a,b;c,d` matrix per non-empty line. With `replicate`, a
    /// single line is repeated `d` times.
    pub fn parse(text: &str, d: usize, replicate: bool) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let levels = lines
            .iter()
            .map(|l| l.parse())
            .collect::<Result<Vec<InitiatorMatrix>>>()?;
        match (levels.len(), replicate) {
            (1, true) => Self::replicated(levels[0], d),
            (k, _) if k == d => Self::new(levels),
            (k, true) => arg_err(format!("--replicate needs exactly one matrix, got {k}")),
            (k, false) => arg_err(format!("theta has {k} levels but d = {d}")),
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[InitiatorMatrix] {
        &self.levels
    }

    /// `∏_k Σ_ab θ^(k)_ab`, the expected ball count of a BDP on this stack.
    pub fn total_weight(&self) -> f64 {
        self.levels.iter().map(InitiatorMatrix::total).product()
    }

    pub fn is_bernoulli_valid(&self) -> bool {
        self.levels.iter().all(InitiatorMatrix::is_bernoulli_valid)
    }

    /// Fails with [`Error::Validity`] naming the first entry above 1.
    pub fn require_bernoulli_valid(&self) -> Result<()> {
        for (k, m) in self.levels.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    if m.get(a, b) > 1.0 {
                        return Err(Error::Validity {
                            level: k + 1,
                            row: a,
                            col: b,
                            value: m.get(a, b),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_colors(&self) -> u64 {
        1u64 << self.depth()
    }

    /// `Γ_{c,c2}` without range checks.
    #[inline]
    pub(crate) fn gamma(&self, c: u64, c2: u64) -> f64 {
        let d = self.depth();
        let mut p = 1.0;
        for (k, m) in self.levels.iter().enumerate() {
            let shift = d - 1 - k;
            p *= m.get(((c >> shift) & 1) as usize, ((c2 >> shift) & 1) as usize);
        }
        p
    }
}

impl fmt::Display for ParamStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, m) in self.levels.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

/// Per-level attribute probabilities `μ^(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MuVector {
    values: Vec<f64>,
}

impl MuVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() > MAX_LEVELS {
            return arg_err(format!("mu length {} outside 1..={MAX_LEVELS}", values.len()));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return arg_err(format!("mu[{}] = {v} is not in [0, 1]", k + 1));
        }
        Ok(Self { values })
    }

    pub fn uniform(mu: f64, d: usize) -> Result<Self> {
        Self::new(vec![mu; d])
    }

    /// Comma-separated list of `d` values, or a single value replicated.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        let values = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad mu value `{}`", s.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        match values.len() {
            1 => Self::uniform(values[0], d),
            k if k == d => Self::new(values),
            k => arg_err(format!("mu has {k} values but d = {d}")),
        }
    }

    pub fn depth(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl fmt::Display for MuVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Everything needed to sample one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d: usize,
    pub n: u32,
    pub theta: ParamStack,
    /// Absent for a pure KPGM.
    pub mu: Option<MuVector>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn magm(theta: ParamStack, mu: MuVector, n: u32, seed: u64) -> Result<Self> {
        if n == 0 {
            return arg_err("n must be at least 1");
        }
        if mu.depth() != theta.depth() {
            return arg_err(format!(
                "mu has {} levels but theta has {}",
                mu.depth(),
                theta.depth()
            ));
        }
        Ok(Self {
            d: theta.depth(),
            n,
            theta,
            mu: Some(mu),
            seed,
        })
    }

    /// KPGM configuration with `n = 2^d`.
    pub fn kpgm(theta: ParamStack, seed: u64) -> Result<Self> {
        let d = theta.depth();
        if d > 32 {
            return Err(Error::Size(format!(
                "KPGM with d = {d} has more nodes than 32-bit node ids allow"
            )));
        }
        let n = u32::try_from(1u64 << d)
            .map_err(|_| Error::Size(format!("2^{d} nodes exceed 32-bit node ids")))?;
        Ok(Self {
            d,
            n,
            theta,
            mu: None,
            seed,
        })
    }

    pub fn require_mu(&self) -> Result<&MuVector> {
        self.mu
            .as_ref()
            .ok_or_else(|| Error::Argument("MAGM sampling needs mu".into()))
    }
}

/// Expected edge counts. Only `e_k` is available without `mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedEdgeSummary {
    pub e_k: f64,
    pub e_m: Option<f64>,
    pub e_mk: Option<f64>,
    pub e_km: Option<f64>,
}

/// Bit `k` (1-based, most significant first) of a `d`-bit index.
pub fn bit_of(index: u64, k: usize, d: usize) -> Result<u8> {
    if d == 0 || d > MAX_LEVELS {
        return arg_err(format!("d = {d} outside 1..={MAX_LEVELS}"));
    }
    if k == 0 || k > d {
        return arg_err(format!("level {k} outside 1..={d}"));
    }
    if index >= 1u64 << d {
        return arg_err(format!("index {index} is not a {d}-bit color"));
    }
    Ok(((index >> (d - k)) & 1) as u8)
}

/// Entry `(c, c2)` of the Kronecker product of the stack, in O(d).
pub fn gamma_entry(theta: &ParamStack, c: u64, c2: u64) -> Result<f64> {
    let limit = theta.num_colors();
    if c >= limit || c2 >= limit {
        return arg_err(format!(
            "color pair ({c}, {c2}) outside [0, {limit})"
        ));
    }
    Ok(theta.gamma(c, c2))
}

/// Edge weight between nodes `i` and `j` given their colors.
pub fn psi_entry(theta: &ParamStack, colors: &ColorAssignment, i: u32, j: u32) -> Result<f64> {
    if colors.depth() != theta.depth() {
        return arg_err("colors and theta disagree on d");
    }
    let ci = colors.color(i)?;
    let cj = colors.color(j)?;
    Ok(theta.gamma(ci, cj))
}

/// `e_K`, and with `mu` also `e_M`, `e_MK` and `e_KM` for `n` nodes.
pub fn expected_edges(
    theta: &ParamStack,
    mu: Option<&MuVector>,
    n: u64,
) -> Result<ExpectedEdgeSummary> {
    let e_k = theta.total_weight();
    let Some(mu) = mu else {
        return Ok(ExpectedEdgeSummary {
            e_k,
            e_m: None,
            e_mk: None,
            e_km: None,
        });
    };
    if mu.depth() != theta.depth() {
        return arg_err("mu and theta disagree on d");
    }
    let n = n as f64;
    let (mut m, mut mk, mut km) = (1.0, 1.0, 1.0);
    for (t, &p) in theta.levels().iter().zip(mu.values()) {
        let w = [1.0 - p, p];
        let mut lm = 0.0;
        let mut lmk = 0.0;
        let mut lkm = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let v = t.get(a, b);
                lm += w[a] * w[b] * v;
                lmk += w[a] * v;
                lkm += w[b] * v;
            }
        }
        m *= lm;
        mk *= lmk;
        km *= lkm;
    }
    Ok(ExpectedEdgeSummary {
        e_k,
        e_m: Some(n * n * m),
        e_mk: Some(n * mk),
        e_km: Some(n * km),
    })
}
