//! Edge lists and their text format.
//!
//! A file starts with `#`-prefixed `key=value` header lines, followed by one
//! `source<TAB>target` line per edge with zero-based decimal node ids.
//! Multigraphs repeat lines.

use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ModelConfig;

pub type Edge = (u32, u32);

/// Provenance recorded in the file header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeHeader {
    pub mode: String,
    pub seed: Option<u64>,
    pub d: usize,
    pub n: u64,
    pub theta_digest: String,
    pub mu_digest: Option<String>,
}

/// Short SHA-256 digest of a canonical parameter string.
pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    let hex: String = hash.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

impl EdgeHeader {
    pub fn for_config(config: &ModelConfig, mode: &str, seed: u64) -> Self {
        Self {
            mode: mode.to_owned(),
            seed: Some(seed),
            d: config.d,
            n: u64::from(config.n),
            theta_digest: digest(&config.theta.to_string()),
            mu_digest: config.mu.as_ref().map(|m| digest(&m.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub header: EdgeHeader,
    pub edges: Vec<Edge>,
}

impl EdgeList {
    pub fn new(header: EdgeHeader, edges: Vec<Edge>) -> Self {
        Self { header, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let h = &self.header;
        writeln!(out, "# kronmag edge list")?;
        writeln!(out, "# mode={}", h.mode)?;
        match h.seed {
            Some(s) => writeln!(out, "# seed={s}")?,
            None => writeln!(out, "# seed=none")?,
        }
        writeln!(out, "# d={}", h.d)?;
        writeln!(out, "# n={}", h.n)?;
        writeln!(out, "# theta={}", h.theta_digest)?;
        writeln!(out, "# mu={}", h.mu_digest.as_deref().unwrap_or("none"))?;
        writeln!(out, "# edges={}", self.edges.len())?;
        for (i, j) in &self.edges {
            writeln!(out, "{i}\t{j}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut list = EdgeList::default();
        let mut declared: Option<usize> = None;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let bad = |what: &str| Error::Parse(format!("edge list line {}: {what}", lineno + 1));
            if let Some(meta) = line.strip_prefix('#') {
                let Some((key, value)) = meta.trim().split_once('=') else { continue };
                let h = &mut list.header;
                let num = |v: &str| v.parse::<u64>().map_err(|_| bad("bad header value"));
                match key.trim() {
                    "mode" => h.mode = value.to_owned(),
                    "seed" if value == "none" => h.seed = None,
                    "seed" => h.seed = Some(num(value)?),
                    "d" => h.d = num(value)? as usize,
                    "n" => h.n = num(value)?,
                    "theta" => h.theta_digest = value.to_owned(),
                    "mu" if value == "none" => h.mu_digest = None,
                    "mu" => h.mu_digest = Some(value.to_owned()),
                    "edges" => declared = Some(num(value)? as usize),
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = line.split_once('\t').ok_or_else(|| bad("expected source<TAB>target"))?;
            let s: u32 = s.trim().parse().map_err(|_| bad("bad source id"))?;
            let t: u32 = t.trim().parse().map_err(|_| bad("bad target id"))?;
            list.edges.push((s, t));
        }
        if let Some(k) = declared {
            if k != list.edges.len() {
                return Err(Error::Parse(format!(
                    "header declares {k} edges, found {}",
                    list.edges.len()
                )));
            }
        }
        if list.header.n > 0 {
            if let Some(&(s, t)) = list
                .edges
                .iter()
                .find(|&&(s, t)| u64::from(s.max(t)) >= list.header.n)
            {
                return Err(Error::Parse(format!(
                    "edge ({s}, {t}) outside [0, {})",
                    list.header.n
                )));
            }
        }
        Ok(list)
    }
}

/// Collapses repeated pairs; the result is sorted lexicographically.
pub fn dedupe(edges: &EdgeList) -> EdgeList {
    let mut out = edges.edges.clone();
    out.sort_unstable();
    out.dedup();
    EdgeList::new(edges.header.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn header() -> EdgeHeader {
        EdgeHeader {
            mode: "bdp".into(),
            seed: Some(12),
            d: 3,
            n: 8,
            theta_digest: digest("0.4,0.7;0.7,0.9"),
            mu_digest: None,
        }
    }

    #[test]
    fn dedupe_examples() {
        assert!(dedupe(&EdgeList::default()).is_empty());
        let e = EdgeList::new(header(), vec![(1, 2), (1, 2), (0, 3)]);
        assert_eq!(dedupe(&e).edges, vec![(0, 3), (1, 2)]);
    }

    #[test]
    fn format_is_stable() {
        let e = EdgeList::new(header(), vec![(7, 1), (0, 0)]);
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("# edges=2\n7\t1\n0\t0\n"));
        assert!(text.contains("# mu=none\n"));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(EdgeList::read_from(&b"# n=4\n1\t9\n"[..]).is_err());
        assert!(EdgeList::read_from(&b"# edges=2\n1\t2\n"[..]).is_err());
        assert!(EdgeList::read_from(&b"1 2\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(edges in prop::collection::vec((0u32..8, 0u32..8), 0..200)) {
            let e = EdgeList::new(header(), edges);
            let mut buf = Vec::new();
            e.write_to(&mut buf).unwrap();
            prop_assert_eq!(EdgeList::read_from(&buf[..]).unwrap(), e);
        }

        #[test]
        fn dedupe_counts_distinct_pairs(edges in prop::collection::vec((0u32..6, 0u32..6), 0..100)) {
            let distinct: BTreeSet<_> = edges.iter().copied().collect();
            let out = dedupe(&EdgeList::new(header(), edges));
            prop_assert_eq!(out.len(), distinct.len());
            prop_assert!(out.edges.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
