//! Seedable random streams with exact target distributions.
//!
//! Every stream is a xoshiro256++ generator keyed by a 64-bit seed and a
//! string label. Forking consumes one draw from the parent, so repeated calls
//! of a sampler on the same stream see fresh sub-streams while the whole run
//! stays reproducible from the root seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{arg_err, Result};
use crate::params::InitiatorMatrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single-owner random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: Xoshiro256PlusPlus,
    seed: u64,
    label: String,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        Self::keyed(seed, label, splitmix(seed))
    }

    fn keyed(seed: u64, label: &str, key: u64) -> Self {
        let rng = Xoshiro256PlusPlus::seed_from_u64(splitmix(key ^ fnv1a(label)));
        Self {
            rng,
            seed,
            label: label.to_owned(),
        }
    }

    /// Derives an independent child stream labelled `parent/label`.
    pub fn fork(&mut self, label: &str) -> RngStream {
        let key = self.rng.next_u64();
        let full = format!("{}/{}", self.label, label);
        Self::keyed(self.seed, &full, key)
    }

    /// Root seed this stream descends from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn draw_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn draw_poisson(&mut self, rate: f64) -> Result<u64> {
        if !rate.is_finite() || rate < 0.0 {
            return arg_err(format!("Poisson rate {rate} must be finite and non-negative"));
        }
        if rate == 0.0 {
            return Ok(0);
        }
        let dist = Poisson::new(rate)
            .map_err(|e| crate::Error::Argument(format!("Poisson rate {rate}: {e}")))?;
        Ok(dist.sample(&mut self.rng) as u64)
    }

    pub(crate) fn draw_binomial(&mut self, trials: u64, p: f64) -> Result<u64> {
        let dist = Binomial::new(trials, p)
            .map_err(|e| crate::Error::Argument(format!("binomial({trials}, {p}): {e}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// `(a, b)` with probability `θ_ab / Σθ`.
    pub fn draw_quadrant(&mut self, m: &InitiatorMatrix) -> Result<(u8, u8)> {
        let total = m.total();
        if !(total > 0.0) {
            return arg_err("cannot draw a quadrant from an all-zero matrix");
        }
        let u = self.draw_uniform() * total;
        let mut acc = 0.0;
        let mut last = (0, 0);
        for a in 0..2u8 {
            for b in 0..2u8 {
                let w = m.get(a as usize, b as usize);
                if w > 0.0 {
                    acc += w;
                    last = (a, b);
                    if u < acc {
                        return Ok((a, b));
                    }
                }
            }
        }
        // u * total rounded up to the total
        Ok(last)
    }

    pub fn draw_bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return arg_err(format!("Bernoulli probability {p} not in [0, 1]"));
        }
        Ok(self.draw_uniform() < p)
    }

    pub fn draw_uniform_index(&mut self, k: u64) -> Result<u64> {
        if k == 0 {
            return arg_err("uniform index needs k >= 1");
        }
        Ok(self.rng.random_range(0..k))
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
