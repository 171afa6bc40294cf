use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Counts of individuals (or cliques) per integer score, taken at step `n`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub n: u64,
    pub counts: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn new(n: u64) -> Self {
        Histogram { n, counts: BTreeMap::new() }
    }

    pub fn from_values<I: IntoIterator<Item = u64>>(n: u64, values: I) -> Self {
        let mut h = Histogram::new(n);
        for v in values {
            *h.counts.entry(v).or_insert(0) += 1;
        }
        h
    }

    pub fn get(&self, s: u64) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Σ s·count(s).
    pub fn weighted_total(&self) -> u64 {
        self.counts.iter().map(|(s, c)| s * c).sum()
    }

    pub fn min_key(&self) -> Option<u64> {
        self.counts.keys().next().copied()
    }

    /// `s,count` rows, one per nonzero bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,count\n");
        for (s, c) in &self.counts {
            writeln!(out, "{s},{c}").unwrap();
        }
        out
    }

    /// `M,w,count,n` rows for a clique-weight histogram of size `m`.
    pub fn to_clique_csv_rows(&self, m: usize, out: &mut String) {
        for (w, c) in &self.counts {
            writeln!(out, "{m},{w},{c},{}", self.n).unwrap();
        }
    }

    pub fn parse_csv(n: u64, text: &str) -> Option<Histogram> {
        let mut lines = text.lines();
        if lines.next()?.trim() != "s,count" {
            return None;
        }
        let mut h = Histogram::new(n);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (s, c) = line.split_once(',')?;
            h.counts.insert(s.trim().parse().ok()?, c.trim().parse().ok()?);
        }
        Some(h)
    }
}

pub const CLIQUE_CSV_HEADER: &str = "M,w,count,n\n";
