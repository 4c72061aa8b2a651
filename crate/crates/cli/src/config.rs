use std::path::PathBuf;

use dnamix_core::bootstrap::LrMode;
use dnamix_core::mcmc::BetaPrior;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Analysis {
    Fit,
    Evidence,
    Bootstrap,
    Gibbs,
    Deconvolve,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `σ` by maximum likelihood with `θ` summed over the grid.
    MleSigma,
    /// `(θ, σ)` jointly by maximum likelihood.
    #[default]
    MleJoint,
    /// Gibbs sampling under the gamma prior on `β`.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub name: String,
    pub path: PathBuf,
}

/// Profile names fixed in each contributor slot; `None` is an unknown person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct HypothesisSpec {
    pub slot1: Option<String>,
    pub slot2: Option<String>,
}

impl HypothesisSpec {
    /// Parses `1=NAME,2=NAME` (either part optional; empty means two unknowns).
    pub fn parse(s: &str) -> CliResult<Self> {
        let mut h = HypothesisSpec::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (slot, name) = part
                .split_once('=')
                .ok_or_else(|| CliError::Data(format!("hypothesis part {part:?} is not SLOT=NAME")))?;
            let target = match slot.trim() {
                "1" => &mut h.slot1,
                "2" => &mut h.slot2,
                other => return Err(CliError::Data(format!("contributor slot must be 1 or 2, got {other:?}"))),
            };
            if target.replace(name.trim().to_string()).is_some() {
                return Err(CliError::Data(format!("slot {slot} assigned twice in {s:?}")));
            }
        }
        Ok(h)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.slot1.iter().chain(self.slot2.iter())
    }

    pub fn has_unknown(&self) -> bool {
        self.slot1.is_none() || self.slot2.is_none()
    }
}

/// Parses `NAME=PATH[:SLOT]`, returning the slot when one is given.
pub fn parse_profile_arg(s: &str) -> CliResult<(ProfileSpec, Option<u8>)> {
    let (name, rest) = s
        .split_once('=')
        .ok_or_else(|| CliError::Data(format!("profile argument {s:?} is not NAME=PATH[:SLOT]")))?;
    let (path, slot) = match rest.rsplit_once(':') {
        Some((p, "1")) => (p, Some(1)),
        Some((p, "2")) => (p, Some(2)),
        _ => (rest, None),
    };
    if name.trim().is_empty() || path.is_empty() {
        return Err(CliError::Data(format!("profile argument {s:?} has an empty name or path")));
    }
    Ok((ProfileSpec { name: name.trim().to_string(), path: PathBuf::from(path) }, slot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub n: usize,
    pub lr_mode: LrMode,
    /// Keep the most probable configuration fixed instead of redrawing genotypes.
    pub fixed_genotypes: bool,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings { n: 2000, lr_mode: LrMode::Shared, fixed_genotypes: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub n: usize,
    pub burnin: usize,
    pub thin: usize,
    /// Use the prosecution chain's `σ` draws for both marginal likelihoods.
    pub shared_lr: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { n: 55_000, burnin: 5_000, thin: 5, shared_lr: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub analysis: Analysis,
    pub method: Method,
    pub peaks: PathBuf,
    pub freqs: Option<PathBuf>,
    pub repeat_correct: bool,
    pub repeat_numbers: Option<PathBuf>,
    pub profiles: Vec<ProfileSpec>,
    pub hypothesis: HypothesisSpec,
    pub defence: HypothesisSpec,
    /// Profiles to compare deconvolution results against.
    pub truth: Option<HypothesisSpec>,
    /// Adds the declared profiles' alleles to the frequency table, treating
    /// it as drawn from this many individuals.
    pub augment_database_size: Option<f64>,
    pub theta_step: f64,
    pub prior: BetaPrior,
    pub bootstrap: BootstrapSettings,
    pub chain: ChainSettings,
    pub deconvolution_samples: usize,
    /// `(θ, σ)` for `simulate`; the joint estimate when absent.
    pub simulate_params: Option<(f64, f64)>,
    pub seed: u64,
    pub out: PathBuf,
}

impl CaseConfig {
    pub fn new(analysis: Analysis, peaks: PathBuf, out: PathBuf) -> Self {
        CaseConfig {
            analysis,
            method: Method::default(),
            peaks,
            freqs: None,
            repeat_correct: false,
            repeat_numbers: None,
            profiles: Vec::new(),
            hypothesis: HypothesisSpec::default(),
            defence: HypothesisSpec::default(),
            truth: None,
            augment_database_size: None,
            theta_step: 0.01,
            prior: BetaPrior::default(),
            bootstrap: BootstrapSettings::default(),
            chain: ChainSettings::default(),
            deconvolution_samples: 100_000,
            simulate_params: None,
            seed: 1,
            out,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let truth = self.truth.iter().flat_map(|t| t.names());
        for name in self.hypothesis.names().chain(self.defence.names()).chain(truth) {
            if !self.profiles.iter().any(|p| &p.name == name) {
                return Err(CliError::Data(format!("hypothesis refers to undeclared profile {name:?}")));
            }
        }
        let mut names: Vec<&str> = self.profiles.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Data("profile names must be unique".into()));
        }
        if !(self.theta_step > 0.0 && self.theta_step < 0.5) {
            return Err(CliError::Data(format!("theta grid step must lie in (0, 0.5), got {}", self.theta_step)));
        }
        let needs_freqs = self.hypothesis.has_unknown()
            || (matches!(self.analysis, Analysis::Evidence | Analysis::Bootstrap) && self.defence.has_unknown());
        if needs_freqs && self.freqs.is_none() {
            return Err(CliError::Data("an allele frequency table (--freqs) is required when a contributor is unknown".into()));
        }
        if self.chain.n <= self.chain.burnin || self.chain.thin == 0 {
            return Err(CliError::Data("chain needs n > burnin and thin >= 1".into()));
        }
        if matches!(self.analysis, Analysis::Bootstrap) && self.bootstrap.n == 0 {
            return Err(CliError::Data("bootstrap needs at least one replicate".into()));
        }
        Ok(())
    }
}
