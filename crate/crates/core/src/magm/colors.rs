use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;

use crate::error::{arg_err, Error, Result};
use crate::params::{MuVector, MAX_LEVELS};
use crate::rng::RngStream;

/// One `d`-bit color per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorAssignment {
    colors: Vec<u64>,
    d: usize,
}

impl ColorAssignment {
    pub fn new(colors: Vec<u64>, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_LEVELS {
            return arg_err(format!("d = {d} outside 1..={MAX_LEVELS}"));
        }
        if colors.len() > u32::MAX as usize {
            return Err(Error::Size("more nodes than 32-bit node ids allow".into()));
        }
        if let Some((i, c)) = colors.iter().enumerate().find(|(_, &c)| c >> d != 0) {
            return arg_err(format!("node {i} has color {c}, not a {d}-bit value"));
        }
        Ok(Self { colors, d })
    }

    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[u64] {
        &self.colors
    }

    pub fn color(&self, node: u32) -> Result<u64> {
        self.colors
            .get(node as usize)
            .copied()
            .ok_or_else(|| Error::Argument(format!("node {node} outside [0, {})", self.len())))
    }

    /// Writes `node_id<TAB>color` lines.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, c) in self.colors.iter().enumerate() {
            writeln!(out, "{i}\t{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads `node_id<TAB>color` lines; node ids must be exactly `0..n` in order.
    pub fn read_tsv<R: BufRead>(input: R, d: usize) -> Result<Self> {
        let mut colors = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("colors line {}: `{line}`", lineno + 1));
            let (node, color) = line.split_once('\t').ok_or_else(bad)?;
            let node: usize = node.trim().parse().map_err(|_| bad())?;
            let color: u64 = color.trim().parse().map_err(|_| bad())?;
            if node != colors.len() {
                return Err(Error::Parse(format!(
                    "colors line {}: expected node {}, found {node}",
                    lineno + 1,
                    colors.len()
                )));
            }
            colors.push(color);
        }
        Self::new(colors, d)
    }
}

/// Draws `n` colors with bit `k` of each color set with probability `μ^(k)`.
pub fn sample_colors(mu: &MuVector, n: u32, stream: &mut RngStream) -> ColorAssignment {
    let p = mu.values();
    let colors = (0..n)
        .map(|_| {
            p.iter()
                .fold(0u64, |c, &pk| (c << 1) | u64::from(stream.draw_uniform() < pk))
        })
        .collect();
    ColorAssignment {
        colors,
        d: mu.depth(),
    }
}

/// Frequent colors have `E[|V_c|] >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorClass {
    Frequent,
    Infrequent,
}

/// `E[|V_c|] = n ∏_k (μ^(k))^{b_k} (1 - μ^(k))^{1 - b_k}`.
pub fn expected_count(mu: &MuVector, n: u32, c: u64) -> f64 {
    let d = mu.depth();
    let p = mu
        .values()
        .iter()
        .enumerate()
        .fold(1.0, |acc, (k, &pk)| {
            if (c >> (d - 1 - k)) & 1 == 1 {
                acc * pk
            } else {
                acc * (1.0 - pk)
            }
        });
    f64::from(n) * p
}

/// Per realized color data.
#[derive(Clone, Debug)]
pub(crate) struct ColorSlot {
    pub color: u64,
    pub start: u32,
    pub len: u32,
    pub expected: f64,
    pub class: ColorClass,
    /// `m_F E[|V_c|]` for frequent colors, `m_I` for infrequent ones; never
    /// below `len`.
    pub scaled_bound: f64,
    /// `len / scaled_bound`.
    pub accept: f64,
    /// `len / m`.
    pub simple_accept: f64,
}

impl ColorSlot {
    fn probe(&self) -> Probe {
        match self.class {
            ColorClass::Frequent => Probe(self.accept),
            ColorClass::Infrequent => Probe(-self.accept),
        }
    }
}

/// Acceptance factor of a realized color with its class in the sign bit:
/// positive for frequent colors, negative for infrequent ones. Zero means
/// the color is not realized. One `f64` per color keeps the dense lookup
/// small enough to stay in cache.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Probe(f64);

impl Probe {
    const ABSENT: Probe = Probe(0.0);

    #[inline]
    pub fn accept(self) -> f64 {
        self.0.abs()
    }

    #[inline]
    pub fn class(self) -> ColorClass {
        if self.0 > 0.0 {
            ColorClass::Frequent
        } else {
            ColorClass::Infrequent
        }
    }
}

const NO_SLOT: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum SlotLookup {
    Dense { probes: Vec<Probe>, slots: Vec<u32> },
    Sparse(FxHashMap<u64, (Probe, u32)>),
}

/// Nodes grouped by color plus the frequency statistics `m`, `m_F`, `m_I`.
///
/// Only realized colors are stored. When `2^d <= 8n` the color to slot map
/// is a flat array (still O(n) to build), otherwise a hash map.
#[derive(Clone, Debug)]
pub struct ColorIndex {
    d: usize,
    n: u32,
    mu: MuVector,
    nodes: Vec<u32>,
    slots: Vec<ColorSlot>,
    lookup: SlotLookup,
    m: u32,
    m_f: f64,
    m_i: u32,
}

/// Groups `colors` by value and classifies each realized color against `mu`.
pub fn build_color_index(colors: &ColorAssignment, mu: &MuVector) -> Result<ColorIndex> {
    if colors.depth() != mu.depth() {
        return arg_err(format!(
            "colors have d = {} but mu has {} levels",
            colors.depth(),
            mu.depth()
        ));
    }
    let d = colors.depth();
    let n = colors.len() as u32;
    let mut order: Vec<(u64, u32)> = colors
        .colors()
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u32))
        .collect();
    order.sort_unstable();

    let mut slots: Vec<ColorSlot> = Vec::new();
    for (pos, &(c, _)) in order.iter().enumerate() {
        match slots.last_mut() {
            Some(s) if s.color == c => s.len += 1,
            _ => {
                let expected = expected_count(mu, n, c);
                slots.push(ColorSlot {
                    color: c,
                    start: pos as u32,
                    len: 1,
                    expected,
                    class: if expected >= 1.0 {
                        ColorClass::Frequent
                    } else {
                        ColorClass::Infrequent
                    },
                    scaled_bound: 0.0,
                    accept: 0.0,
                    simple_accept: 0.0,
                });
            }
        }
    }
    let nodes = order.into_iter().map(|(_, i)| i).collect();

    let m = slots.iter().map(|s| s.len).max().unwrap_or(0);
    let m_i = slots
        .iter()
        .filter(|s| s.class == ColorClass::Infrequent)
        .map(|s| s.len)
        .max()
        .unwrap_or(0);
    let frequent = || slots.iter().filter(|s| s.class == ColorClass::Frequent);
    let mut m_f = frequent()
        .map(|s| f64::from(s.len) / s.expected)
        .fold(0.0, f64::max);
    // Make m_F E[|V_c|] >= |V_c| hold after rounding, so every acceptance
    // ratio is at most one.
    for s in frequent() {
        while m_f * s.expected < f64::from(s.len) {
            m_f = m_f.next_up();
        }
    }
    for s in &mut slots {
        s.scaled_bound = match s.class {
            ColorClass::Frequent => m_f * s.expected,
            ColorClass::Infrequent => f64::from(m_i),
        };
        s.accept = f64::from(s.len) / s.scaled_bound;
        s.simple_accept = f64::from(s.len) / f64::from(m);
    }

    let lookup = if d <= 32 && (1u64 << d) <= 8 * u64::from(n.max(1)) {
        let mut probes = vec![Probe::ABSENT; 1usize << d];
        let mut table = vec![NO_SLOT; 1usize << d];
        for (k, s) in slots.iter().enumerate() {
            probes[s.color as usize] = s.probe();
            table[s.color as usize] = k as u32;
        }
        SlotLookup::Dense {
            probes,
            slots: table,
        }
    } else {
        SlotLookup::Sparse(
            slots
                .iter()
                .enumerate()
                .map(|(k, s)| (s.color, (s.probe(), k as u32)))
                .collect(),
        )
    };

    Ok(ColorIndex {
        d,
        n,
        mu: mu.clone(),
        nodes,
        slots,
        lookup,
        m,
        m_f,
        m_i,
    })
}

impl ColorIndex {
    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mu(&self) -> &MuVector {
        &self.mu
    }

    #[inline]
    pub(crate) fn probe(&self, c: u64) -> Option<Probe> {
        let p = match &self.lookup {
            SlotLookup::Dense { probes, .. } => *probes.get(c as usize)?,
            SlotLookup::Sparse(h) => h.get(&c)?.0,
        };
        (p != Probe::ABSENT).then_some(p)
    }

    pub(crate) fn slot(&self, c: u64) -> Option<&ColorSlot> {
        let k = match &self.lookup {
            SlotLookup::Dense { slots, .. } => *slots.get(c as usize)?,
            SlotLookup::Sparse(h) => h.get(&c)?.1,
        };
        (k != NO_SLOT).then(|| &self.slots[k as usize])
    }

    #[inline]
    pub(crate) fn node_at(&self, slot: &ColorSlot, offset: u64) -> u32 {
        self.nodes[slot.start as usize + offset as usize]
    }

    /// `|V_c|`, zero for colors no node has.
    pub fn count(&self, c: u64) -> u32 {
        self.slot(c).map_or(0, |s| s.len)
    }

    pub fn members(&self, c: u64) -> &[u32] {
        self.slot(c).map_or(&[], |s| {
            &self.nodes[s.start as usize..(s.start + s.len) as usize]
        })
    }

    /// `E[|V_c|]` under the model, in O(d).
    pub fn expected(&self, c: u64) -> f64 {
        expected_count(&self.mu, self.n, c)
    }

    pub fn class(&self, c: u64) -> ColorClass {
        if self.expected(c) >= 1.0 {
            ColorClass::Frequent
        } else {
            ColorClass::Infrequent
        }
    }

    pub fn is_frequent(&self, c: u64) -> bool {
        self.class(c) == ColorClass::Frequent
    }

    /// Upper bound on `|V_c|` used by the proposal of `c`'s class:
    /// `m_F E[|V_c|]` or `m_I`.
    pub fn scaled_bound(&self, c: u64) -> f64 {
        match self.class(c) {
            ColorClass::Frequent => self.m_f * self.expected(c),
            ColorClass::Infrequent => f64::from(self.m_i),
        }
    }

    /// Largest number of nodes sharing one color.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Largest `|V_c| / E[|V_c|]` over realized frequent colors, 0 if none.
    pub fn m_f(&self) -> f64 {
        self.m_f
    }

    /// Largest `|V_c|` over infrequent colors.
    pub fn m_i(&self) -> u32 {
        self.m_i
    }

    pub fn realized_colors(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.iter().map(|s| s.color)
    }

    pub fn num_realized(&self) -> usize {
        self.slots.len()
    }
}
