use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::genotype::Genotype;
use super::Profile;
use crate::error::{Error, Result};

/// Number of individuals assumed behind a frequency table when converting
/// frequencies back to allele counts for augmentation.
pub const DEFAULT_DATABASE_SIZE: f64 = 302.0;

/// Population allele frequencies per marker.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrequencyTable {
    freqs: BTreeMap<String, BTreeMap<String, f64>>,
}

impl FrequencyTable {
    /// A table with no markers. Enough for hypotheses that fix both contributors.
    pub fn empty() -> Self {
        FrequencyTable::default()
    }

    /// Strict constructor: every entry positive and each marker summing to one.
    pub fn new(freqs: BTreeMap<String, BTreeMap<String, f64>>) -> Result<Self> {
        for (marker, alleles) in &freqs {
            Self::check_marker(marker, alleles)?;
            let total: f64 = alleles.values().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidData(format!(
                    "frequencies at marker {marker} sum to {total}, not 1"
                )));
            }
        }
        Ok(FrequencyTable { freqs })
    }

    /// Like [`FrequencyTable::new`] but rescales each marker to sum to one.
    pub fn normalized(mut freqs: BTreeMap<String, BTreeMap<String, f64>>) -> Result<Self> {
        for (marker, alleles) in freqs.iter_mut() {
            Self::check_marker(marker, alleles)?;
            let total: f64 = alleles.values().sum();
            alleles.values_mut().for_each(|q| *q /= total);
        }
        Ok(FrequencyTable { freqs })
    }

    fn check_marker(marker: &str, alleles: &BTreeMap<String, f64>) -> Result<()> {
        if alleles.is_empty() {
            return Err(Error::InvalidData(format!("marker {marker} has no frequencies")));
        }
        if let Some((a, q)) = alleles.iter().find(|(_, q)| !(q.is_finite() && **q > 0.0)) {
            return Err(Error::InvalidData(format!(
                "frequency of {a} at marker {marker} must be positive, got {q}"
            )));
        }
        Ok(())
    }

    /// Equal frequencies over each marker's observed alleles plus `extra`
    /// unobserved placeholders (`other0`, `other1`, ...).
    pub fn uniform_over(ds: &super::MixtureDataset, extra: usize) -> Self {
        let freqs = ds
            .markers
            .iter()
            .map(|m| {
                let q = 1.0 / (m.n_alleles() + extra) as f64;
                let mut alleles: BTreeMap<String, f64> = m.alleles.iter().map(|a| (a.clone(), q)).collect();
                for i in 0..extra {
                    alleles.insert(format!("other{i}"), q);
                }
                (m.marker.clone(), alleles)
            })
            .collect();
        FrequencyTable { freqs }
    }

    pub fn get(&self, marker: &str, allele: &str) -> Result<f64> {
        self.freqs
            .get(marker)
            .and_then(|m| m.get(allele))
            .copied()
            .ok_or_else(|| Error::MissingAllele { marker: marker.into(), allele: allele.into() })
    }

    pub fn marker(&self, marker: &str) -> Option<&BTreeMap<String, f64>> {
        self.freqs.get(marker)
    }

    pub fn markers(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, f64>)> {
        self.freqs.iter()
    }
}

/// Hardy–Weinberg log genotype probability: `q_a²` or `2·q_a·q_b`.
pub fn hw_genotype_log_prior(g: &Genotype, marker: &str, freqs: &FrequencyTable) -> Result<f64> {
    let (a, b) = g.alleles();
    let qa = freqs.get(marker, a)?;
    if g.is_homozygous() {
        Ok(2.0 * qa.ln())
    } else {
        let qb = freqs.get(marker, b)?;
        Ok(2f64.ln() + qa.ln() + qb.ln())
    }
}

/// Adds profiles to the database behind `freqs`.
///
/// Existing frequencies are turned into allele counts assuming
/// `database_size` individuals, each allele copy in `profiles` adds `weight`
/// counts, and every marker is renormalized. Alleles not yet in the table
/// get positive frequency.
pub fn augment_frequencies(
    freqs: &FrequencyTable,
    profiles: &[Profile],
    weight: f64,
    database_size: f64,
) -> Result<FrequencyTable> {
    if !(weight > 0.0) || !(database_size > 0.0) {
        return Err(Error::Domain(format!(
            "augmentation weight and database size must be positive, got {weight} and {database_size}"
        )));
    }
    if profiles.is_empty() {
        return Ok(freqs.clone());
    }
    let total_alleles = 2.0 * database_size;
    let mut counts: BTreeMap<String, BTreeMap<String, f64>> = freqs
        .freqs
        .iter()
        .map(|(m, alleles)| {
            (m.clone(), alleles.iter().map(|(a, q)| (a.clone(), q * total_alleles)).collect())
        })
        .collect();
    for profile in profiles {
        for (marker, g) in &profile.genotypes {
            let entry = counts.entry(marker.clone()).or_default();
            let (a, b) = g.alleles();
            for allele in [a, b] {
                *entry.entry(allele.to_string()).or_insert(0.0) += weight;
            }
        }
    }
    FrequencyTable::normalized(counts)
}
