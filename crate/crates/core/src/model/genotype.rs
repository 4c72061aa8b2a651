use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Orders allele designations numerically when both parse as numbers
/// ("9.3" < "12.2" < "25.2"), otherwise as strings.
pub fn allele_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Unordered pair of alleles at one marker, stored in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Genotype {
    first: String,
    second: String,
}

impl Genotype {
    pub fn new(a: &str, b: &str) -> Self {
        if allele_cmp(a, b) == Ordering::Greater {
            Genotype { first: b.to_string(), second: a.to_string() }
        } else {
            Genotype { first: a.to_string(), second: b.to_string() }
        }
    }

    pub fn alleles(&self) -> (&str, &str) {
        (&self.first, &self.second)
    }

    pub fn is_homozygous(&self) -> bool {
        self.first == self.second
    }

    /// Number of copies of `allele` carried (0, 1 or 2).
    pub fn count(&self, allele: &str) -> u8 {
        (self.first == allele) as u8 + (self.second == allele) as u8
    }

    pub fn contains(&self, allele: &str) -> bool {
        self.first == allele || self.second == allele
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.first, self.second)
    }
}

type IndexPair = ((usize, usize), (usize, usize));

/// Ordered genotype pairs over `n` observed alleles (as index pairs `i <= j`)
/// whose combined alleles are exactly `{0, .., n-1}`.
pub fn enumerate_pair_indices(n: usize) -> Vec<IndexPair> {
    if n == 0 || n > 4 {
        return Vec::new();
    }
    let genotypes: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let full = (1u32 << n) - 1;
    let mut out = Vec::new();
    for &g1 in &genotypes {
        for &g2 in &genotypes {
            let cover = (1u32 << g1.0) | (1 << g1.1) | (1 << g2.0) | (1 << g2.1);
            if cover == full {
                out.push((g1, g2));
            }
        }
    }
    out
}

/// All ordered pairs `(g1, g2)` of genotypes built from `observed` that
/// explain exactly the observed allele set. Empty for more than four alleles.
pub fn enumerate_genotype_pairs(observed: &[String]) -> Vec<(Genotype, Genotype)> {
    enumerate_pair_indices(observed.len())
        .into_iter()
        .map(|((a, b), (c, d))| {
            (
                Genotype::new(&observed[a], &observed[b]),
                Genotype::new(&observed[c], &observed[d]),
            )
        })
        .collect()
}
