//! The ball-dropping process.
//!
//! A BDP on a stack draws a Poisson number of balls with rate `∏_k Σθ^(k)`
//! and places each ball by one weighted quadrant choice per level. The
//! quadrant choice at level `k` fixes bit `k` of the source and target
//! colors, most significant first, which is the same as halving the row and
//! column intervals of the `2^d x 2^d` grid.
//!
//! [`BallDropper`] precomputes the per-level normalization once per stack and
//! merges up to [`LEVELS_PER_TABLE`] consecutive levels into one alias table,
//! so a ball costs `ceil(d / 4)` table draws instead of `d` quadrant draws.
//! Levels are independent, so the joint law of a chunk is the product of
//! its per-level laws and the output distribution is unchanged.

use rand::RngCore;

use crate::edges::{EdgeHeader, EdgeList};
use crate::error::{arg_err, Result};
use crate::params::{ModelConfig, ParamStack};
use crate::rng::RngStream;

pub const LEVELS_PER_TABLE: usize = 6;

/// Cell of the `2^d x 2^d` grid a ball lands in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ball {
    pub source_color: u64,
    pub target_color: u64,
}

impl Ball {
    pub fn new(source_color: u64, target_color: u64) -> Self {
        Self {
            source_color,
            target_color,
        }
    }
}

/// Reference placement: one [`RngStream::draw_quadrant`] per level.
pub fn drop_one_ball(theta: &ParamStack, stream: &mut RngStream) -> Result<Ball> {
    let mut ball = Ball::new(0, 0);
    for (k, m) in theta.levels().iter().enumerate() {
        if !(m.total() > 0.0) {
            return arg_err(format!("level {} has zero total weight", k + 1));
        }
        let (a, b) = stream.draw_quadrant(m)?;
        ball.source_color = (ball.source_color << 1) | u64::from(a);
        ball.target_color = (ball.target_color << 1) | u64::from(b);
    }
    Ok(ball)
}

/// Walker alias table over the `4^L` outcomes of `L` merged levels.
#[derive(Clone, Debug)]
struct ChunkTable {
    levels: u32,
    index_shift: u32,
    /// Low bits of the draw compared against thresholds; disjoint from the
    /// index bits.
    fraction_mask: u64,
    entries: Vec<AliasEntry>,
}

/// One alias slot. Cells are packed as `source_bits << 16 | target_bits`.
#[derive(Clone, Copy, Debug)]
struct AliasEntry {
    /// Probability of keeping `own`, scaled to 2^53.
    threshold: u64,
    own: u32,
    alias: u32,
}

/// Threshold precision, capped so index and fraction bits never overlap.
const MAX_FRACTION_BITS: u32 = 53;

impl ChunkTable {
    fn new(theta: &ParamStack, first: usize, levels: usize) -> Result<Self> {
        let outcomes = 1usize << (2 * levels);
        let mut weight = vec![1.0f64; outcomes];
        let mut source_bits = vec![0u16; outcomes];
        let mut target_bits = vec![0u16; outcomes];
        for o in 0..outcomes {
            // outcome digits: (a_1 b_1)(a_2 b_2)... most significant level first
            for l in 0..levels {
                let digit = (o >> (2 * (levels - 1 - l))) & 3;
                let (a, b) = (digit >> 1, digit & 1);
                weight[o] *= theta.levels()[first + l].get(a, b);
                source_bits[o] = (source_bits[o] << 1) | a as u16;
                target_bits[o] = (target_bits[o] << 1) | b as u16;
            }
        }
        let total: f64 = weight.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return arg_err(format!(
                "levels {}..={} have zero total weight",
                first + 1,
                first + levels
            ));
        }

        // Vose's construction
        let scale = outcomes as f64 / total;
        let mut prob: Vec<f64> = weight.iter().map(|w| w * scale).collect();
        let mut alias: Vec<u16> = (0..outcomes as u16).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..outcomes).partition(|&i| prob[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u16;
            prob[l] -= 1.0 - prob[s];
            if prob[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for i in large.into_iter().chain(small) {
            if weight[i] > 0.0 {
                prob[i] = 1.0;
            } else {
                // rounding left a zero-weight outcome unpaired; route it to
                // any positive outcome
                let to = weight.iter().position(|&w| w > 0.0).unwrap_or(0);
                prob[i] = 0.0;
                alias[i] = to as u16;
            }
        }
        let index_shift = 64 - 2 * levels as u32;
        let fraction_bits = MAX_FRACTION_BITS.min(index_shift);
        let one = 1u64 << fraction_bits;
        let cell = |o: usize| (u32::from(source_bits[o]) << 16) | u32::from(target_bits[o]);
        let entries = (0..outcomes)
            .map(|o| AliasEntry {
                threshold: if prob[o] >= 1.0 {
                    one
                } else {
                    (prob[o] * one as f64) as u64
                },
                own: cell(o),
                alias: cell(alias[o] as usize),
            })
            .collect();
        Ok(Self {
            levels: levels as u32,
            index_shift,
            fraction_mask: one - 1,
            entries,
        })
    }

    /// Packed cell of one draw.
    #[inline]
    fn draw<R: RngCore>(&self, rng: &mut R) -> u32 {
        let r = rng.next_u64();
        let e = &self.entries[(r >> self.index_shift) as usize];
        if (r & self.fraction_mask) < e.threshold {
            e.own
        } else {
            e.alias
        }
    }
}

/// Precomputed O(d) ball placement for one stack.
#[derive(Clone, Debug)]
pub struct BallDropper {
    chunks: Vec<ChunkTable>,
    rate: f64,
}

impl BallDropper {
    pub fn new(theta: &ParamStack) -> Result<Self> {
        let d = theta.depth();
        let mut chunks = Vec::with_capacity(d.div_ceil(LEVELS_PER_TABLE));
        let mut first = 0;
        while first < d {
            let levels = LEVELS_PER_TABLE.min(d - first);
            chunks.push(ChunkTable::new(theta, first, levels)?);
            first += levels;
        }
        Ok(Self {
            chunks,
            rate: theta.total_weight(),
        })
    }

    /// Expected number of balls, `∏_k Σθ^(k)`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    #[inline]
    pub fn drop<R: RngCore>(&self, rng: &mut R) -> Ball {
        let mut src = 0u64;
        let mut dst = 0u64;
        for chunk in &self.chunks {
            let cell = chunk.draw(rng);
            src = (src << chunk.levels) | u64::from(cell >> 16);
            dst = (dst << chunk.levels) | u64::from(cell & 0xffff);
        }
        Ball::new(src, dst)
    }
}

/// One BDP realization: a Poisson number of i.i.d. balls. Duplicates are kept.
pub fn sample_bdp(theta: &ParamStack, stream: &mut RngStream) -> Result<Vec<Ball>> {
    let rate = theta.total_weight();
    let count = stream.draw_poisson(rate)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let dropper = BallDropper::new(theta)?;
    Ok((0..count).map(|_| dropper.drop(stream)).collect())
}

/// Splits `total` into `parts` equal-probability multinomial shares.
pub(crate) fn multinomial_split(total: u64, parts: usize, stream: &mut RngStream) -> Result<Vec<u64>> {
    let mut left = total;
    let mut shares = Vec::with_capacity(parts);
    for k in 0..parts {
        let remaining = parts - k;
        let share = if remaining == 1 {
            left
        } else {
            stream.draw_binomial(left, 1.0 / remaining as f64)?
        };
        shares.push(share);
        left -= share;
    }
    Ok(shares)
}

/// Parallel BDP: the Poisson total is split into per-worker multinomial
/// shares, each worker dropping its share on its own labelled stream. The
/// output is deterministic for a fixed `threads`.
pub fn sample_bdp_parallel(
    theta: &ParamStack,
    stream: &mut RngStream,
    threads: usize,
) -> Result<Vec<Ball>> {
    if threads <= 1 {
        return sample_bdp(theta, stream);
    }
    let count = stream.draw_poisson(theta.total_weight())?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let dropper = BallDropper::new(theta)?;
    let shares = multinomial_split(count, threads, stream)?;
    let workers: Vec<RngStream> = (0..threads)
        .map(|t| stream.fork(&format!("worker{t}")))
        .collect();
    let parts: Vec<Vec<Ball>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .into_iter()
            .zip(&shares)
            .map(|(mut rng, &share)| {
                let dropper = &dropper;
                scope.spawn(move || (0..share).map(|_| dropper.drop(&mut rng)).collect())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("BDP worker panicked"))
            .collect()
    });
    Ok(parts.concat())
}

/// KPGM multigraph through the BDP; ball colors are node ids (`d <= 32`).
pub fn sample_kpgm_bdp(theta: &ParamStack, stream: &mut RngStream, threads: usize) -> Result<EdgeList> {
    let config = ModelConfig::kpgm(theta.clone(), stream.seed())?;
    let balls = sample_bdp_parallel(theta, stream, threads)?;
    let edges = balls
        .into_iter()
        .map(|b| (b.source_color as u32, b.target_color as u32))
        .collect();
    Ok(EdgeList::new(
        EdgeHeader::for_config(&config, "bdp", stream.seed()),
        edges,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::InitiatorMatrix;

    fn fig1(d: usize) -> ParamStack {
        ParamStack::replicated(InitiatorMatrix::new(0.4, 0.7, 0.7, 0.9).unwrap(), d).unwrap()
    }

    #[test]
    fn degenerate_corner() {
        let s = ParamStack::replicated(InitiatorMatrix::new(0.0, 0.0, 0.0, 1.0).unwrap(), 1).unwrap();
        let mut rng = RngStream::new(1, "t");
        let dropper = BallDropper::new(&s).unwrap();
        for _ in 0..1000 {
            assert_eq!(drop_one_ball(&s, &mut rng).unwrap(), Ball::new(1, 1));
            assert_eq!(dropper.drop(&mut rng), Ball::new(1, 1));
        }
    }

    #[test]
    fn zero_level_is_rejected() {
        let s = ParamStack::new(vec![
            InitiatorMatrix::uniform(1.0).unwrap(),
            InitiatorMatrix::uniform(0.0).unwrap(),
        ])
        .unwrap();
        let mut rng = RngStream::new(1, "t");
        assert!(drop_one_ball(&s, &mut rng).is_err());
        assert!(BallDropper::new(&s).is_err());
        assert!(sample_bdp(&s, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn corner_cell_frequency() {
        let s = fig1(3);
        let mut rng = RngStream::new(2, "t");
        let dropper = BallDropper::new(&s).unwrap();
        let n = 1_000_000;
        let hits = (0..n).filter(|_| dropper.drop(&mut rng) == Ball::new(7, 7)).count();
        let expected = 0.729 / 19.683;
        assert!((hits as f64 / n as f64 - expected).abs() < 0.001);
        let hits = (0..n)
            .filter(|_| drop_one_ball(&s, &mut rng).unwrap() == Ball::new(7, 7))
            .count();
        assert!((hits as f64 / n as f64 - expected).abs() < 0.001);
    }

    #[test]
    fn full_chunk_matches_gamma() {
        // a skewed full-width chunk; every cell probability is Γ / e_K
        let s = ParamStack::replicated(InitiatorMatrix::new(0.8, 0.1, 0.05, 0.05).unwrap(), LEVELS_PER_TABLE)
            .unwrap();
        let dropper = BallDropper::new(&s).unwrap();
        let side = s.num_colors() as usize;
        let mut counts = vec![0u64; side * side];
        let mut rng = RngStream::new(8, "t");
        let n = 4_000_000;
        for _ in 0..n {
            let b = dropper.drop(&mut rng);
            counts[b.source_color as usize * side + b.target_color as usize] += 1;
        }
        let total = s.total_weight();
        let (mut observed, mut expected) = (Vec::new(), Vec::new());
        let (mut pooled_o, mut pooled_e) = (0u64, 0.0);
        for (cell, &o) in counts.iter().enumerate() {
            let e = n as f64 * s.gamma((cell / side) as u64, (cell % side) as u64) / total;
            if e >= 5.0 {
                observed.push(o);
                expected.push(e);
            } else {
                pooled_o += o;
                pooled_e += e;
            }
        }
        observed.push(pooled_o);
        expected.push(pooled_e);
        let r = crate::stats::chi_square_counts(&observed, &expected, 1e-4).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn chunks_cover_long_stacks() {
        // two full chunks and a partial trailing one
        let d = 2 * LEVELS_PER_TABLE + 3;
        let s = fig1(d);
        let dropper = BallDropper::new(&s).unwrap();
        assert_eq!(dropper.chunks.len(), 3);
        let mut rng = RngStream::new(4, "t");
        let n = 200_000;
        let mut low_bits_set = 0;
        for _ in 0..n {
            let b = dropper.drop(&mut rng);
            assert!(b.source_color < 1 << d && b.target_color < 1 << d);
            low_bits_set += (b.source_color & b.target_color & 1) as usize;
        }
        // the last level lands in (1,1) with probability 0.9 / 2.7
        let p = 0.9 / 2.7;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((low_bits_set as f64 / n as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn zero_weights_never_drawn() {
        let m = InitiatorMatrix::new(0.0, 0.3, 0.0, 2.5).unwrap();
        let s = ParamStack::replicated(m, 6).unwrap();
        let dropper = BallDropper::new(&s).unwrap();
        let mut rng = RngStream::new(9, "t");
        for _ in 0..100_000 {
            // b must be 1 at every level
            assert_eq!(dropper.drop(&mut rng).target_color, 63);
        }
    }

    #[test]
    fn ball_count_mean() {
        let s = fig1(2);
        let mut rng = RngStream::new(3, "t");
        let runs = 100_000;
        let total: usize = (0..runs).map(|_| sample_bdp(&s, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / runs as f64;
        let se = (7.29f64 / runs as f64).sqrt();
        assert!((mean - 7.29).abs() < 5.0 * se, "mean {mean}");
    }

    #[test]
    fn parallel_split_is_deterministic() {
        let s = fig1(5);
        let a = sample_bdp_parallel(&s, &mut RngStream::new(5, "p"), 3).unwrap();
        let b = sample_bdp_parallel(&s, &mut RngStream::new(5, "p"), 3).unwrap();
        assert_eq!(a, b);
        let mut rng = RngStream::new(6, "p");
        let shares = multinomial_split(1000, 4, &mut rng).unwrap();
        assert_eq!(shares.iter().sum::<u64>(), 1000);
    }
}
