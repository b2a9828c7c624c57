//! Brute-force Θ(n²) references used as test oracles.
//!
//! These materialize the full edge probability matrix or visit every node
//! pair. They refuse inputs above their size caps rather than approximate.

use crate::edges::{EdgeHeader, EdgeList};
use crate::error::{arg_err, Error, Result};
use crate::magm::ColorAssignment;
use crate::params::{ModelConfig, ParamStack};
use crate::rng::RngStream;

/// Cap on materialized matrix entries.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;
/// Largest `d` accepted by [`build_gamma`] and [`sample_kpgm_exact`].
pub const MAX_ORACLE_LEVELS: usize = 13;
/// Largest `n` accepted by the exact MAGM samplers.
pub const MAX_ORACLE_NODES: u32 = 1 << 13;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return arg_err("matrix dimensions must be positive");
        }
        if entries.len() != rows * cols {
            return arg_err(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            ));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Zero-based entry access.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// Standard Kronecker product `x ⊗ y`.
pub fn kronecker_product(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = x.rows.checked_mul(y.rows);
    let cols = x.cols.checked_mul(y.cols);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some_and(|t| t <= MAX_DENSE_ENTRIES) => (r, c),
        _ => {
            return Err(Error::Size(format!(
                "Kronecker product of {}x{} and {}x{} exceeds {MAX_DENSE_ENTRIES} entries",
                x.rows, x.cols, y.rows, y.cols
            )))
        }
    };
    let mut entries = vec![0.0; rows * cols];
    for i in 0..x.rows {
        for j in 0..x.cols {
            let s = x.get(i, j);
            for p in 0..y.rows {
                let row = (i * y.rows + p) * cols + j * y.cols;
                for q in 0..y.cols {
                    entries[row + q] = s * y.get(p, q);
                }
            }
        }
    }
    DenseMatrix::new(rows, cols, entries)
}

/// `Θ^(1) ⊗ … ⊗ Θ^(d)` for `d <= 13`.
pub fn build_gamma(theta: &ParamStack) -> Result<DenseMatrix> {
    if theta.depth() > MAX_ORACLE_LEVELS {
        return Err(Error::Size(format!(
            "build_gamma supports d <= {MAX_ORACLE_LEVELS}, got {}",
            theta.depth()
        )));
    }
    let as_dense = |k: usize| {
        let e = theta.levels()[k].entries();
        DenseMatrix::new(2, 2, vec![e[0][0], e[0][1], e[1][0], e[1][1]])
    };
    let mut g = as_dense(0)?;
    for k in 1..theta.depth() {
        g = kronecker_product(&g, &as_dense(k)?)?;
    }
    Ok(g)
}

/// Exact KPGM: each `(i, j)` is an edge independently with probability `Γ_ij`.
pub fn sample_kpgm_exact(theta: &ParamStack, stream: &mut RngStream) -> Result<EdgeList> {
    theta.require_bernoulli_valid()?;
    if theta.depth() > MAX_ORACLE_LEVELS {
        return Err(Error::Size(format!(
            "exact KPGM supports d <= {MAX_ORACLE_LEVELS}, got {}",
            theta.depth()
        )));
    }
    let n = 1u32 << theta.depth();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if stream.draw_uniform() < theta.gamma(u64::from(i), u64::from(j)) {
                edges.push((i, j));
            }
        }
    }
    let config = ModelConfig::kpgm(theta.clone(), stream.seed())?;
    Ok(EdgeList::new(
        EdgeHeader::for_config(&config, "exact", stream.seed()),
        edges,
    ))
}

fn check_oracle_input(config: &ModelConfig, colors: &ColorAssignment) -> Result<()> {
    if config.n > MAX_ORACLE_NODES {
        return Err(Error::Size(format!(
            "exact MAGM samplers support n <= {MAX_ORACLE_NODES}, got {}",
            config.n
        )));
    }
    if colors.len() != config.n as usize || colors.depth() != config.d {
        return arg_err("colors do not match n and d of the configuration");
    }
    Ok(())
}

/// Exact MAGM given colors: independent `Bernoulli(Ψ_ij)` per ordered pair.
pub fn sample_magm_exact(
    config: &ModelConfig,
    colors: &ColorAssignment,
    stream: &mut RngStream,
) -> Result<EdgeList> {
    config.theta.require_bernoulli_valid()?;
    check_oracle_input(config, colors)?;
    let c = colors.colors();
    let mut edges = Vec::new();
    for i in 0..config.n {
        for j in 0..config.n {
            let p = config.theta.gamma(c[i as usize], c[j as usize]);
            if stream.draw_uniform() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(EdgeList::new(
        EdgeHeader::for_config(config, "exact", stream.seed()),
        edges,
    ))
}

/// Poisson MAGM given colors: `A_ij ~ Poisson(Ψ_ij)` independently.
pub fn sample_poisson_exact(
    config: &ModelConfig,
    colors: &ColorAssignment,
    stream: &mut RngStream,
) -> Result<EdgeList> {
    check_oracle_input(config, colors)?;
    let c = colors.colors();
    let mut edges = Vec::new();
    for i in 0..config.n {
        for j in 0..config.n {
            let rate = config.theta.gamma(c[i as usize], c[j as usize]);
            for _ in 0..stream.draw_poisson(rate)? {
                edges.push((i, j));
            }
        }
    }
    Ok(EdgeList::new(
        EdgeHeader::for_config(config, "poisson-exact", stream.seed()),
        edges,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magm::sample_colors;
    use crate::params::{expected_edges, gamma_entry, InitiatorMatrix, MuVector};
    use approx::assert_relative_eq;

    fn fig1(d: usize) -> ParamStack {
        ParamStack::replicated(InitiatorMatrix::new(0.4, 0.7, 0.7, 0.9).unwrap(), d).unwrap()
    }

    fn theta1(d: usize) -> ParamStack {
        ParamStack::replicated(InitiatorMatrix::new(0.15, 0.7, 0.7, 0.85).unwrap(), d).unwrap()
    }

    #[test]
    fn kronecker_small_cases() {
        let x = DenseMatrix::new(1, 1, vec![2.0]).unwrap();
        let y = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(kronecker_product(&x, &y).unwrap().entries(), &[2.0, 4.0, 6.0, 8.0]);

        let id2 = DenseMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let id4 = kronecker_product(&id2, &id2).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(id4.get(r, c), if r == c { 1.0 } else { 0.0 });
            }
        }

        let g = build_gamma(&fig1(2)).unwrap();
        assert_relative_eq!(g.get(3, 3), 0.81, max_relative = 1e-12);
        // block expansion: the (0,1) block is 0.7 * Θ
        assert_relative_eq!(g.get(0, 2), 0.7 * 0.4, max_relative = 1e-12);
        assert_relative_eq!(g.get(1, 3), 0.7 * 0.9, max_relative = 1e-12);

        let rect = DenseMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let k = kronecker_product(&rect, &y).unwrap();
        assert_eq!((k.rows(), k.cols()), (2, 6));
        assert_eq!(k.get(1, 5), 12.0);
    }

    #[test]
    fn size_guards() {
        assert!(DenseMatrix::new(0, 1, vec![]).is_err());
        let big = DenseMatrix::new(1 << 13, 1, vec![1.0; 1 << 13]).unwrap();
        let wide = DenseMatrix::new(1, 1 << 14, vec![1.0; 1 << 14]).unwrap();
        assert!(matches!(kronecker_product(&big, &wide), Err(Error::Size(_))));
        assert!(matches!(build_gamma(&fig1(14)), Err(Error::Size(_))));
    }

    #[test]
    fn gamma_matrix_matches_entries() {
        let g = build_gamma(&fig1(1)).unwrap();
        assert_eq!(g.entries(), &[0.4, 0.7, 0.7, 0.9]);
        let g = build_gamma(&fig1(3)).unwrap();
        assert_relative_eq!(g.sum(), 19.683, max_relative = 1e-12);
        let mixed = ParamStack::new(vec![
            InitiatorMatrix::new(0.2, 0.3, 0.4, 0.5).unwrap(),
            InitiatorMatrix::new(0.6, 0.7, 0.8, 0.9).unwrap(),
        ])
        .unwrap();
        let g = build_gamma(&mixed).unwrap();
        assert_relative_eq!(g.get(0, 0), 0.2 * 0.6, max_relative = 1e-12);
        for c in 0..4 {
            for c2 in 0..4 {
                assert_relative_eq!(
                    g.get(c, c2),
                    gamma_entry(&mixed, c as u64, c2 as u64).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn exact_kpgm_degenerate() {
        let mut rng = RngStream::new(1, "k");
        let zero = ParamStack::replicated(InitiatorMatrix::uniform(0.0).unwrap(), 3).unwrap();
        assert!(sample_kpgm_exact(&zero, &mut rng).unwrap().is_empty());
        let ones = ParamStack::replicated(InitiatorMatrix::uniform(1.0).unwrap(), 2).unwrap();
        let e = sample_kpgm_exact(&ones, &mut rng).unwrap();
        assert_eq!(e.len(), 16);
        let over = ParamStack::replicated(InitiatorMatrix::uniform(1.1).unwrap(), 2).unwrap();
        assert!(matches!(sample_kpgm_exact(&over, &mut rng), Err(Error::Validity { .. })));
    }

    #[test]
    fn exact_kpgm_mean() {
        let theta = fig1(3);
        let g = build_gamma(&theta).unwrap();
        let sigma = g.entries().iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt();
        let mut rng = RngStream::new(2, "k");
        let runs = 10_000;
        let total: usize = (0..runs)
            .map(|_| sample_kpgm_exact(&theta, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        assert!((mean - 19.683).abs() < 3.0 * sigma / 100.0, "mean {mean}");
    }

    #[test]
    fn exact_kpgm_cell_frequencies() {
        let theta = fig1(2);
        let g = build_gamma(&theta).unwrap();
        let mut rng = RngStream::new(3, "k");
        let runs = 100_000;
        let mut hits = vec![0usize; 16];
        for _ in 0..runs {
            for (i, j) in sample_kpgm_exact(&theta, &mut rng).unwrap().edges {
                hits[(i * 4 + j) as usize] += 1;
            }
        }
        for (cell, &h) in hits.iter().enumerate() {
            let p = g.entries()[cell];
            let se = (p * (1.0 - p) / runs as f64).sqrt();
            assert!((h as f64 / runs as f64 - p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn exact_magm_small_cases() {
        let mut rng = RngStream::new(4, "m");
        let zero = ParamStack::replicated(InitiatorMatrix::uniform(0.0).unwrap(), 2).unwrap();
        let cfg = ModelConfig::magm(zero, MuVector::uniform(0.5, 2).unwrap(), 5, 0).unwrap();
        let colors = ColorAssignment::new(vec![1; 5], 2).unwrap();
        assert!(sample_magm_exact(&cfg, &colors, &mut rng).unwrap().is_empty());
        assert!(sample_poisson_exact(&cfg, &colors, &mut rng).unwrap().is_empty());

        let cfg = ModelConfig::magm(theta1(2), MuVector::uniform(0.5, 2).unwrap(), 1, 0).unwrap();
        let colors = ColorAssignment::new(vec![3], 2).unwrap();
        let runs = 20_000;
        let mut loops = 0;
        for _ in 0..runs {
            let e = sample_magm_exact(&cfg, &colors, &mut rng).unwrap();
            assert!(e.len() <= 1);
            loops += e.len();
        }
        let p = 0.85 * 0.85;
        let se = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((loops as f64 / runs as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn exact_magm_mean_edges() {
        let d = 8;
        let mu = MuVector::uniform(0.5, d).unwrap();
        let cfg = ModelConfig::magm(theta1(d), mu.clone(), 1 << d, 0).unwrap();
        let e_m = expected_edges(&cfg.theta, Some(&mu), 1 << d).unwrap().e_m.unwrap();
        let mut rng = RngStream::new(5, "m");
        let counts: Vec<f64> = (0..1000)
            .map(|_| {
                let colors = sample_colors(&mu, cfg.n, &mut rng);
                sample_magm_exact(&cfg, &colors, &mut rng).unwrap().len() as f64
            })
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let se = (var / counts.len() as f64).sqrt();
        assert!((mean - e_m).abs() < 4.0 * se, "mean {mean} e_M {e_m} se {se}");
    }

    #[test]
    fn poisson_oracle_mean() {
        let d = 3;
        let mu = MuVector::uniform(0.6, d).unwrap();
        let cfg = ModelConfig::magm(fig1(d), mu.clone(), 12, 0).unwrap();
        let mut rng = RngStream::new(6, "m");
        let colors = sample_colors(&mu, 12, &mut rng);
        let rate: f64 = colors
            .colors()
            .iter()
            .flat_map(|&a| colors.colors().iter().map(move |&b| (a, b)))
            .map(|(a, b)| cfg.theta.gamma(a, b))
            .sum();
        let runs = 20_000;
        let total: usize = (0..runs)
            .map(|_| sample_poisson_exact(&cfg, &colors, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        assert!((mean - rate).abs() < 5.0 * (rate / runs as f64).sqrt());
    }

    #[test]
    fn oracle_caps() {
        let cfg = ModelConfig::magm(theta1(2), MuVector::uniform(0.5, 2).unwrap(), (1 << 13) + 1, 0).unwrap();
        let colors = ColorAssignment::new(vec![0; (1 << 13) + 1], 2).unwrap();
        let mut rng = RngStream::new(1, "m");
        assert!(matches!(sample_poisson_exact(&cfg, &colors, &mut rng), Err(Error::Size(_))));
    }
}
