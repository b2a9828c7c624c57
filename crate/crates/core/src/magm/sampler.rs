//! Accept-reject sampling of MAGM graphs on top of BDP proposals.
//!
//! Each proposal ball `(c, c2)` from block `(A, B)` is kept with probability
//! `Λ_{c c2} / Λ^(AB)_{c c2}`, which factorizes as
//! `(|V_c| / bound_c) (|V_c2| / bound_c2)` because `Γ_{c c2}` cancels. A kept
//! ball becomes an edge between a uniform member of `V_c` and a uniform member
//! of `V_c2`. Thinning a Poisson process keeps it Poisson, so the per pair
//! counts are independent `Poisson(Ψ_ij)`.

use crate::bdp::{multinomial_split, Ball, BallDropper};
use crate::edges::{Edge, EdgeHeader, EdgeList};
use crate::error::Result;
use crate::params::{ModelConfig, MuVector, ParamStack};
use crate::rng::RngStream;

use super::colors::{build_color_index, sample_colors, ColorAssignment, ColorIndex, Probe};
use super::proposal::{build_proposals, Block, ProposalFamily};

/// Proposal and acceptance counts of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleStats {
    /// Balls dropped per block, indexed by [`Block::index`].
    pub proposals: [u64; 4],
    pub accepted: u64,
}

impl SampleStats {
    pub fn total_proposals(&self) -> u64 {
        self.proposals.iter().sum()
    }
}

/// Slack for acceptance ratios computed above 1 by rounding.
const RATIO_SLACK: f64 = 8.0 * f64::EPSILON;

#[inline]
fn clamp_ratio(ratio: f64) -> f64 {
    debug_assert!(
        (0.0..=1.0 + RATIO_SLACK).contains(&ratio),
        "acceptance ratio {ratio} outside [0, 1]"
    );
    ratio.min(1.0)
}

/// Drops `balls` balls and thins them with `ratio`, which returns `None`
/// when the ball falls outside the block.
fn drop_and_thin<F>(
    index: &ColorIndex,
    dropper: &BallDropper,
    balls: u64,
    stream: &mut RngStream,
    out: &mut Vec<Edge>,
    ratio: F,
) -> u64
where
    F: Fn(Ball, Probe, Probe) -> Option<f64>,
{
    let mut accepted = 0;
    for _ in 0..balls {
        let ball = dropper.drop(stream);
        let Some(p) = index.probe(ball.source_color) else { continue };
        let Some(q) = index.probe(ball.target_color) else { continue };
        let Some(r) = ratio(ball, p, q) else { continue };
        if stream.draw_uniform() < clamp_ratio(r) {
            let s = index.slot(ball.source_color).expect("probed");
            let t = index.slot(ball.target_color).expect("probed");
            let i = index.node_at(s, pick(stream, s.len));
            let j = index.node_at(t, pick(stream, t.len));
            out.push((i, j));
            accepted += 1;
        }
    }
    accepted
}

#[inline]
fn pick(stream: &mut RngStream, len: u32) -> u64 {
    if len == 1 {
        0
    } else {
        stream
            .draw_uniform_index(u64::from(len))
            .expect("color slots are never empty")
    }
}

/// Runs one proposal component, optionally split over worker threads.
fn run_component<F>(
    index: &ColorIndex,
    dropper: &BallDropper,
    stream: &mut RngStream,
    threads: usize,
    out: &mut Vec<Edge>,
    ratio: F,
) -> Result<(u64, u64)>
where
    F: Fn(Ball, Probe, Probe) -> Option<f64> + Sync,
{
    let balls = stream.draw_poisson(dropper.rate())?;
    if threads <= 1 || balls == 0 {
        let accepted = drop_and_thin(index, dropper, balls, stream, out, ratio);
        return Ok((balls, accepted));
    }
    let shares = multinomial_split(balls, threads, stream)?;
    let workers: Vec<RngStream> = (0..threads)
        .map(|t| stream.fork(&format!("worker{t}")))
        .collect();
    let ratio = &ratio;
    let parts: Vec<(Vec<Edge>, u64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .into_iter()
            .zip(shares)
            .map(|(mut rng, share)| {
                scope.spawn(move || {
                    let mut part = Vec::new();
                    let acc = drop_and_thin(index, dropper, share, &mut rng, &mut part, ratio);
                    (part, acc)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler worker panicked"))
            .collect()
    });
    let mut accepted = 0;
    for (part, acc) in parts {
        out.extend_from_slice(&part);
        accepted += acc;
    }
    Ok((balls, accepted))
}

/// MAGM sampler conditioned on a fixed color assignment.
#[derive(Clone, Debug)]
pub struct MagmSampler {
    colors: ColorAssignment,
    index: ColorIndex,
    proposals: ProposalFamily,
    droppers: [Option<BallDropper>; 4],
    threads: usize,
    acceptance_scale: f64,
}

impl MagmSampler {
    /// Fails with a validity error if any θ entry exceeds 1.
    pub fn new(theta: &ParamStack, mu: &MuVector, colors: ColorAssignment) -> Result<Self> {
        theta.require_bernoulli_valid()?;
        let index = build_color_index(&colors, mu)?;
        let proposals = build_proposals(&index, theta, mu)?;
        let mut droppers: [Option<BallDropper>; 4] = Default::default();
        for block in Block::ALL {
            if let Some(stack) = proposals.stack(block) {
                if stack.total_weight() > 0.0 {
                    droppers[block.index()] = Some(BallDropper::new(stack)?);
                }
            }
        }
        Ok(Self {
            colors,
            index,
            proposals,
            droppers,
            threads: 1,
            acceptance_scale: 1.0,
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Multiplies every acceptance ratio by `scale` in `[0, 1]`. Only useful
    /// for checking that the statistical tests detect a broken sampler.
    pub fn with_acceptance_scale(mut self, scale: f64) -> Self {
        self.acceptance_scale = scale.clamp(0.0, 1.0);
        self
    }

    pub fn colors(&self) -> &ColorAssignment {
        &self.colors
    }

    pub fn index(&self) -> &ColorIndex {
        &self.index
    }

    pub fn proposals(&self) -> &ProposalFamily {
        &self.proposals
    }

    /// `m_F² e_M`, `m_F m_I e_MK`, `m_I m_F e_KM`, `m_I² e_K`.
    pub fn expected_proposals(&self) -> [f64; 4] {
        self.proposals.expected_balls()
    }

    pub fn sample(&self, stream: &mut RngStream) -> Result<(Vec<Edge>, SampleStats)> {
        let mut edges = Vec::new();
        let mut stats = SampleStats::default();
        let scale = self.acceptance_scale;
        for block in Block::ALL {
            let Some(dropper) = &self.droppers[block.index()] else { continue };
            let mut sub = stream.fork(block.name());
            let (src, dst) = (block.source(), block.target());
            let (balls, accepted) = run_component(
                &self.index,
                dropper,
                &mut sub,
                self.threads,
                &mut edges,
                |_, p, q| (p.class() == src && q.class() == dst).then(|| p.accept() * q.accept() * scale),
            )?;
            stats.proposals[block.index()] = balls;
            stats.accepted += accepted;
        }
        Ok((edges, stats))
    }
}

/// Single-proposal variant: one BDP on `m^{2/d} Θ`, bound `m² Γ`.
#[derive(Clone, Debug)]
pub struct SimpleSampler {
    colors: ColorAssignment,
    index: ColorIndex,
    dropper: Option<BallDropper>,
    threads: usize,
}

impl SimpleSampler {
    pub fn new(theta: &ParamStack, mu: &MuVector, colors: ColorAssignment) -> Result<Self> {
        theta.require_bernoulli_valid()?;
        let index = build_color_index(&colors, mu)?;
        let m = f64::from(index.m());
        let d = theta.depth() as f64;
        let scale = (2.0 * m.ln() / d).exp();
        let stack = ParamStack::new(
            theta
                .levels()
                .iter()
                .map(|t| t.weighted([[1.0; 2]; 2], scale))
                .collect(),
        )?;
        let dropper = if m > 0.0 && stack.total_weight() > 0.0 {
            Some(BallDropper::new(&stack)?)
        } else {
            None
        };
        Ok(Self {
            colors,
            index,
            dropper,
            threads: 1,
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn colors(&self) -> &ColorAssignment {
        &self.colors
    }

    pub fn index(&self) -> &ColorIndex {
        &self.index
    }

    /// `m² e_K`.
    pub fn expected_proposals(&self) -> f64 {
        self.dropper.as_ref().map_or(0.0, BallDropper::rate)
    }

    pub fn sample(&self, stream: &mut RngStream) -> Result<(Vec<Edge>, SampleStats)> {
        let mut edges = Vec::new();
        let mut stats = SampleStats::default();
        if let Some(dropper) = &self.dropper {
            let mut sub = stream.fork("simple");
            let (balls, accepted) = run_component(
                &self.index,
                dropper,
                &mut sub,
                self.threads,
                &mut edges,
                |ball, _, _| {
                    let s = self.index.slot(ball.source_color)?;
                    let t = self.index.slot(ball.target_color)?;
                    Some(s.simple_accept * t.simple_accept)
                },
            )?;
            stats.proposals[Block::FF.index()] = balls;
            stats.accepted = accepted;
        }
        Ok((edges, stats))
    }
}

fn colors_or_sample(
    config: &ModelConfig,
    stream: &mut RngStream,
    colors: Option<ColorAssignment>,
) -> Result<ColorAssignment> {
    let mu = config.require_mu()?;
    match colors {
        Some(c) if c.len() != config.n as usize => crate::error::arg_err(format!(
            "{} colors supplied for n = {}",
            c.len(),
            config.n
        )),
        Some(c) => Ok(c),
        None => Ok(sample_colors(mu, config.n, &mut stream.fork("colors"))),
    }
}

/// Accept-reject MAGM sample. Colors are drawn from `mu` unless supplied.
pub fn sample_magm_ar(
    config: &ModelConfig,
    stream: &mut RngStream,
    colors: Option<ColorAssignment>,
) -> Result<(EdgeList, ColorAssignment)> {
    config.theta.require_bernoulli_valid()?;
    let colors = colors_or_sample(config, stream, colors)?;
    let sampler = MagmSampler::new(&config.theta, config.require_mu()?, colors)?;
    let (edges, _) = sampler.sample(stream)?;
    let header = EdgeHeader::for_config(config, "ar", stream.seed());
    Ok((EdgeList::new(header, edges), sampler.colors))
}

/// MAGM sample through the single `m^{2/d}` proposal.
pub fn sample_magm_simple(
    config: &ModelConfig,
    stream: &mut RngStream,
    colors: Option<ColorAssignment>,
) -> Result<(EdgeList, ColorAssignment)> {
    config.theta.require_bernoulli_valid()?;
    let colors = colors_or_sample(config, stream, colors)?;
    let sampler = SimpleSampler::new(&config.theta, config.require_mu()?, colors)?;
    let (edges, _) = sampler.sample(stream)?;
    let header = EdgeHeader::for_config(config, "simple", stream.seed());
    Ok((EdgeList::new(header, edges), sampler.colors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InitiatorMatrix;
    use crate::Error;

    fn theta1(d: usize) -> ParamStack {
        ParamStack::replicated(InitiatorMatrix::new(0.15, 0.7, 0.7, 0.85).unwrap(), d).unwrap()
    }

    #[test]
    fn rejects_non_probabilities() {
        let theta = ParamStack::replicated(InitiatorMatrix::new(0.5, 1.5, 0.5, 0.5).unwrap(), 2).unwrap();
        let cfg = ModelConfig::magm(theta, MuVector::uniform(0.5, 2).unwrap(), 4, 1).unwrap();
        let mut rng = RngStream::new(1, "t");
        assert!(matches!(
            sample_magm_ar(&cfg, &mut rng, None),
            Err(Error::Validity { level: 1, row: 0, col: 1, .. })
        ));
        assert!(matches!(
            sample_magm_simple(&cfg, &mut rng, None),
            Err(Error::Validity { .. })
        ));
    }

    #[test]
    fn zero_mu_gives_single_color() {
        let cfg = ModelConfig::magm(theta1(2), MuVector::uniform(0.0, 2).unwrap(), 4, 7).unwrap();
        let mut rng = RngStream::new(7, "t");
        let (edges, colors) = sample_magm_ar(&cfg, &mut rng, None).unwrap();
        assert!(colors.colors().iter().all(|&c| c == 0));
        assert!(edges.edges.iter().all(|&(i, j)| i < 4 && j < 4));
    }

    #[test]
    fn edges_stay_in_range_and_ratios_valid() {
        // debug builds assert every ratio lies in [0, 1]
        let d = 8;
        let mut rng = RngStream::new(3, "t");
        for mu in [0.1, 0.3, 0.5, 0.8, 0.95] {
            let cfg = ModelConfig::magm(theta1(d), MuVector::uniform(mu, d).unwrap(), 300, 3).unwrap();
            let (edges, _) = sample_magm_ar(&cfg, &mut rng, None).unwrap();
            assert!(edges.edges.iter().all(|&(i, j)| i < 300 && j < 300));
            let (edges, _) = sample_magm_simple(&cfg, &mut rng, None).unwrap();
            assert!(edges.edges.iter().all(|&(i, j)| i < 300 && j < 300));
        }
    }

    #[test]
    fn supplied_colors_must_match_n() {
        let cfg = ModelConfig::magm(theta1(2), MuVector::uniform(0.5, 2).unwrap(), 4, 1).unwrap();
        let colors = ColorAssignment::new(vec![0, 1, 2], 2).unwrap();
        assert!(sample_magm_ar(&cfg, &mut RngStream::new(1, "t"), Some(colors)).is_err());
    }

    #[test]
    fn same_seed_same_graph() {
        let cfg = ModelConfig::magm(theta1(6), MuVector::uniform(0.6, 6).unwrap(), 64, 9).unwrap();
        let a = sample_magm_ar(&cfg, &mut RngStream::new(9, "t"), None).unwrap();
        let b = sample_magm_ar(&cfg, &mut RngStream::new(9, "t"), None).unwrap();
        assert_eq!(a, b);
        let sampler = MagmSampler::new(&cfg.theta, cfg.mu.as_ref().unwrap(), a.1.clone())
            .unwrap()
            .with_threads(3);
        let x = sampler.sample(&mut RngStream::new(2, "p")).unwrap();
        let y = sampler.sample(&mut RngStream::new(2, "p")).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn distinct_colors_make_simple_proposal_plain_bdp() {
        let d = 3;
        let colors = ColorAssignment::new((0..8).collect(), d).unwrap();
        let s = SimpleSampler::new(&theta1(d), &MuVector::uniform(0.5, d).unwrap(), colors).unwrap();
        assert_eq!(s.index().m(), 1);
        approx::assert_relative_eq!(s.expected_proposals(), 2.4f64.powi(3), max_relative = 1e-12);
    }
}
