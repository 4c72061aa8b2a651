//! Domain types and the density machinery of the gamma/Dirichlet model.

mod dirichlet;
mod frequency;
mod genotype;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dirichlet::{
    beta_from_sigma, hb_prediction_interval, log_dirichlet_density, mean_fractions,
    sigma_from_beta, MeanFractions,
};
pub use frequency::{augment_frequencies, hw_genotype_log_prior, FrequencyTable, DEFAULT_DATABASE_SIZE};
pub use genotype::{allele_cmp, enumerate_genotype_pairs, enumerate_pair_indices, Genotype};

/// Which contributor a known profile is fixed as. Contributor 1 is the one
/// whose DNA fraction is `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    pub fn from_index(i: u8) -> Result<Slot> {
        match i {
            1 => Ok(Slot::First),
            2 => Ok(Slot::Second),
            _ => Err(Error::InvalidData(format!("contributor slot must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Slot::First => 1,
            Slot::Second => 2,
        }
    }
}

/// A person's genotypes over a set of markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub genotypes: BTreeMap<String, Genotype>,
}

impl Profile {
    pub fn new(name: impl Into<String>) -> Self {
        Profile { name: name.into(), genotypes: BTreeMap::new() }
    }

    pub fn with(mut self, marker: impl Into<String>, a: &str, b: &str) -> Self {
        self.genotypes.insert(marker.into(), Genotype::new(a, b));
        self
    }

    pub fn genotype(&self, marker: &str) -> Result<&Genotype> {
        self.genotypes.get(marker).ok_or_else(|| Error::MissingGenotype {
            profile: self.name.clone(),
            marker: marker.to_string(),
        })
    }
}

/// Observed alleles and relative peak sizes at one marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerData {
    pub marker: String,
    pub alleles: Vec<String>,
    pub rel_sizes: Vec<f64>,
}

impl MarkerData {
    /// Validates and renormalizes the sizes so they sum to one.
    pub fn new(marker: impl Into<String>, alleles: Vec<String>, sizes: Vec<f64>) -> Result<Self> {
        let marker = marker.into();
        if alleles.is_empty() {
            return Err(Error::InvalidData(format!("marker {marker} has no alleles")));
        }
        if alleles.len() != sizes.len() {
            return Err(Error::InvalidData(format!(
                "marker {marker}: {} alleles but {} sizes",
                alleles.len(),
                sizes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for a in &alleles {
            if a.is_empty() {
                return Err(Error::InvalidData(format!("marker {marker}: empty allele label")));
            }
            if !seen.insert(a.as_str()) {
                return Err(Error::InvalidData(format!("marker {marker}: duplicate allele {a}")));
            }
        }
        if let Some(bad) = sizes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidData(format!(
                "marker {marker}: peak sizes must be positive, got {bad}"
            )));
        }
        let total: f64 = sizes.iter().sum();
        let rel_sizes = sizes.iter().map(|s| s / total).collect();
        Ok(MarkerData { marker, alleles, rel_sizes })
    }

    pub fn from_pairs(marker: &str, pairs: &[(&str, f64)]) -> Result<Self> {
        MarkerData::new(
            marker,
            pairs.iter().map(|(a, _)| a.to_string()).collect(),
            pairs.iter().map(|(_, r)| *r).collect(),
        )
    }

    pub fn n_alleles(&self) -> usize {
        self.alleles.len()
    }

    pub fn allele_index(&self, label: &str) -> Option<usize> {
        self.alleles.iter().position(|a| a == label)
    }
}

/// Relative peak sizes for every marker of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MixtureDataset {
    pub markers: Vec<MarkerData>,
}

impl MixtureDataset {
    pub fn new(markers: Vec<MarkerData>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for m in &markers {
            if !seen.insert(m.marker.as_str()) {
                return Err(Error::InvalidData(format!("marker {} appears twice", m.marker)));
            }
        }
        Ok(MixtureDataset { markers })
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn marker(&self, id: &str) -> Option<&MarkerData> {
        self.markers.iter().find(|m| m.marker == id)
    }

    pub fn marker_ids(&self) -> Vec<String> {
        self.markers.iter().map(|m| m.marker.clone()).collect()
    }
}

/// The continuous unknowns: mixture proportion `θ` and peak imbalance `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("theta must lie in (0,1), got {theta}")));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Domain(format!("sigma must lie in (0,1), got {sigma}")));
        }
        Ok(ModelParams { theta, sigma })
    }

    pub fn beta(&self) -> f64 {
        1.0 / (self.sigma * self.sigma) - 1.0
    }
}

/// Which contributors are fixed to known profiles. An unfixed contributor is
/// a random, unrelated member of the population in Hardy–Weinberg equilibrium.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hypothesis {
    pub known1: Option<Profile>,
    pub known2: Option<Profile>,
}

impl Hypothesis {
    /// Two unknown contributors.
    pub fn unknown() -> Self {
        Hypothesis::default()
    }

    pub fn with(mut self, slot: Slot, profile: Profile) -> Self {
        match slot {
            Slot::First => self.known1 = Some(profile),
            Slot::Second => self.known2 = Some(profile),
        }
        self
    }

    pub fn known(&self, slot: Slot) -> Option<&Profile> {
        match slot {
            Slot::First => self.known1.as_ref(),
            Slot::Second => self.known2.as_ref(),
        }
    }

    pub fn both_unknown(&self) -> bool {
        self.known1.is_none() && self.known2.is_none()
    }

    pub fn both_known(&self) -> bool {
        self.known1.is_some() && self.known2.is_some()
    }
}

/// One ordered genotype pair per marker, in dataset marker order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenotypeConfig {
    pub markers: Vec<String>,
    pub pairs: Vec<(Genotype, Genotype)>,
}

impl GenotypeConfig {
    pub fn pair(&self, marker: &str) -> Option<&(Genotype, Genotype)> {
        self.markers.iter().position(|m| m == marker).map(|i| &self.pairs[i])
    }

    /// The profile of one contributor under this configuration.
    pub fn profile(&self, slot: Slot, name: &str) -> Profile {
        let mut p = Profile::new(name);
        for (m, (g1, g2)) in self.markers.iter().zip(&self.pairs) {
            let g = match slot {
                Slot::First => g1,
                Slot::Second => g2,
            };
            p.genotypes.insert(m.clone(), g.clone());
        }
        p
    }
}
