//! The four BDP proposal stacks and their closed-form rates.

use std::collections::HashMap;

use crate::bdp::Ball;
use crate::error::{arg_err, Result};
use crate::params::{MuVector, ParamStack};

use super::colors::{ColorClass, ColorIndex};

/// Source and target color classes of one proposal component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    FF,
    FI,
    IF,
    II,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::FF, Block::FI, Block::IF, Block::II];

    pub fn of(source: ColorClass, target: ColorClass) -> Block {
        use ColorClass::*;
        match (source, target) {
            (Frequent, Frequent) => Block::FF,
            (Frequent, Infrequent) => Block::FI,
            (Infrequent, Frequent) => Block::IF,
            (Infrequent, Infrequent) => Block::II,
        }
    }

    pub fn source(self) -> ColorClass {
        match self {
            Block::FF | Block::FI => ColorClass::Frequent,
            Block::IF | Block::II => ColorClass::Infrequent,
        }
    }

    pub fn target(self) -> ColorClass {
        match self {
            Block::FF | Block::IF => ColorClass::Frequent,
            Block::FI | Block::II => ColorClass::Infrequent,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::FF => "FF",
            Block::FI => "FI",
            Block::IF => "IF",
            Block::II => "II",
        }
    }
}

/// Proposal stacks, one per block. A block is `None` when its Poisson rate
/// is identically zero (`m_F = 0` or `m_I = 0`).
#[derive(Clone, Debug)]
pub struct ProposalFamily {
    stacks: [Option<ParamStack>; 4],
    m_f: f64,
    m_i: u32,
    n: u32,
}

impl ProposalFamily {
    pub fn stack(&self, block: Block) -> Option<&ParamStack> {
        self.stacks[block.index()].as_ref()
    }

    pub fn m_f(&self) -> f64 {
        self.m_f
    }

    pub fn m_i(&self) -> u32 {
        self.m_i
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Expected ball count of each block's BDP.
    pub fn expected_balls(&self) -> [f64; 4] {
        Block::ALL.map(|b| self.stack(b).map_or(0.0, ParamStack::total_weight))
    }
}

/// `exp(log(x) * power / d)`, the per-level share of a global scale factor.
fn level_scale(x: f64, power: f64, d: usize) -> f64 {
    (x.ln() * power / d as f64).exp()
}

/// Builds the FF/FI/IF/II stacks from the color statistics in `index`.
pub fn build_proposals(
    index: &ColorIndex,
    theta: &ParamStack,
    mu: &MuVector,
) -> Result<ProposalFamily> {
    let d = theta.depth();
    if mu.depth() != d || index.depth() != d {
        return arg_err("index, theta and mu disagree on d");
    }
    let n = f64::from(index.n());
    let m_f = index.m_f();
    let m_i = f64::from(index.m_i());

    let build = |scale: f64, weights: &dyn Fn(f64) -> [[f64; 2]; 2]| -> Result<ParamStack> {
        let levels = theta
            .levels()
            .iter()
            .zip(mu.values())
            .map(|(t, &p)| t.weighted(weights(p), scale))
            .collect();
        ParamStack::new(levels)
    };

    let mut stacks: [Option<ParamStack>; 4] = Default::default();
    if m_f > 0.0 {
        stacks[Block::FF.index()] = Some(build(level_scale(n * m_f, 2.0, d), &|p| {
            [[(1.0 - p) * (1.0 - p), (1.0 - p) * p], [p * (1.0 - p), p * p]]
        })?);
    }
    if m_f > 0.0 && m_i > 0.0 {
        let s = level_scale(n * m_f * m_i, 1.0, d);
        stacks[Block::FI.index()] = Some(build(s, &|p| [[1.0 - p, 1.0 - p], [p, p]])?);
        stacks[Block::IF.index()] = Some(build(s, &|p| [[1.0 - p, p], [1.0 - p, p]])?);
    }
    if m_i > 0.0 {
        stacks[Block::II.index()] = Some(build(level_scale(m_i, 2.0, d), &|_| [[1.0; 2]; 2])?);
    }
    Ok(ProposalFamily {
        stacks,
        m_f,
        m_i: index.m_i(),
        n: index.n(),
    })
}

/// Target rate, proposal bound and block of one color pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaEntry {
    /// `|V_c| |V_c2| Γ_{c c2}`.
    pub target: f64,
    /// Closed-form rate of the block's proposal at `(c, c2)`.
    pub bound: f64,
    pub block: Block,
}

/// Target and bound at `(c, c2)`.
///
/// Both sides are evaluated in the same multiplication order, so
/// `|V_c| <= scaled_bound(c)` carries over to `target <= bound` exactly.
pub fn effective_lambda(index: &ColorIndex, theta: &ParamStack, c: u64, c2: u64) -> Result<LambdaEntry> {
    let gamma = crate::params::gamma_entry(theta, c, c2)?;
    let block = Block::of(index.class(c), index.class(c2));
    let counts = f64::from(index.count(c)) * f64::from(index.count(c2));
    let bound = index.scaled_bound(c) * index.scaled_bound(c2);
    Ok(LambdaEntry {
        target: counts * gamma,
        bound: bound * gamma,
        block,
    })
}

/// Ball counts aggregated per color pair; only nonzero cells are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountMatrixView {
    cells: HashMap<(u64, u64), u64>,
}

impl CountMatrixView {
    pub fn from_balls<'a>(balls: impl IntoIterator<Item = &'a Ball>) -> Self {
        let mut view = Self::default();
        for b in balls {
            view.add(b.source_color, b.target_color);
        }
        view
    }

    pub fn add(&mut self, c: u64, c2: u64) {
        *self.cells.entry((c, c2)).or_default() += 1;
    }

    pub fn get(&self, c: u64, c2: u64) -> u64 {
        self.cells.get(&(c, c2)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    pub fn nonzero(&self) -> usize {
        self.cells.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), u64)> + '_ {
        self.cells.iter().map(|(&k, &v)| (k, v))
    }
}
