//! Sampled top-k deconvolution with a probability certificate.
//!
//! Configurations are sampled, deduplicated and scored exactly. If the scored
//! ones carry total mass `p`, no unseen configuration can exceed `1 − p`, so
//! every scored entry above that bound is certainly among the most probable.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::sample_log_weights;
use crate::error::{Error, Result};
use crate::likelihood::{CaseModel, KindTable, ThetaGrid};
use crate::mcmc::ChainSamples;
use crate::model::{beta_from_sigma, GenotypeConfig, ModelParams, Profile};
use crate::rng::stream;
use crate::stats::log_sum_exp;

/// Scores configurations at one `β` with `θ` summed over a grid, which keeps
/// a single `θ` shared by all markers.
pub struct SigmaMixtureScorer<'a> {
    model: &'a CaseModel,
    grid: &'a ThetaGrid,
}

impl<'a> SigmaMixtureScorer<'a> {
    pub fn new(model: &'a CaseModel, grid: &'a ThetaGrid) -> Self {
        SigmaMixtureScorer { model, grid }
    }

    /// `Pr(c | R, β)` for each configuration.
    pub fn probabilities(&self, configs: &[Vec<usize>], beta: f64) -> Vec<f64> {
        let markers = self.model.markers();
        let mut terms: Vec<Vec<f64>> = vec![Vec::new(); markers.len()];
        let mut denom = Vec::with_capacity(self.grid.len());
        let mut num: Vec<Vec<f64>> = vec![Vec::with_capacity(self.grid.len()); configs.len()];
        for (&t, &w) in self.grid.points().iter().zip(self.grid.weights()) {
            let table = KindTable::new(t, beta);
            let mut d = w.ln();
            for (m, buf) in markers.iter().zip(terms.iter_mut()) {
                m.terms_into(&table, buf);
                d += log_sum_exp(buf);
            }
            denom.push(d);
            for (c, out) in configs.iter().zip(num.iter_mut()) {
                out.push(w.ln() + c.iter().zip(&terms).map(|(&i, buf)| buf[i]).sum::<f64>());
            }
        }
        let z = log_sum_exp(&denom);
        num.iter().map(|n| (log_sum_exp(n) - z).exp()).collect()
    }
}

/// How configuration probabilities are computed.
#[derive(Debug, Clone, PartialEq)]
pub enum Scoring {
    /// At fixed `(θ, σ)`: a product of per-marker posteriors.
    Fixed(ModelParams),
    /// Averaged over `σ` draws (one value for the plain `σ`-only mode), `θ`
    /// summed over the grid for each.
    SigmaMixture { sigmas: Vec<f64>, grid: ThetaGrid },
}

/// Exact probabilities of pair-index configurations.
pub fn score_configs(model: &CaseModel, configs: &[Vec<usize>], scoring: &Scoring) -> Vec<f64> {
    match scoring {
        Scoring::Fixed(p) => {
            let beta = p.beta();
            let post: Vec<Vec<f64>> = model.markers().iter().map(|m| m.log_posterior(p.theta, beta)).collect();
            configs
                .iter()
                .map(|c| c.iter().zip(&post).map(|(&i, lp)| lp[i]).sum::<f64>().exp())
                .collect()
        }
        Scoring::SigmaMixture { sigmas, grid } => crate::mcmc::bayes_pair_probabilities(configs, model, sigmas, grid),
    }
}

/// `Pr(cfg | R)` under `scoring`; zero for configurations outside the support.
pub fn exact_pair_probability(cfg: &GenotypeConfig, model: &CaseModel, scoring: &Scoring) -> f64 {
    match model.config_indices(cfg) {
        Some(idx) => score_configs(model, &[idx], scoring)[0],
        None => 0.0,
    }
}

/// Draws `n` configurations, marker by marker, from the posterior at `params`
/// and returns the distinct ones. Sequential from one stream, so a larger `n`
/// extends the same draws.
pub fn sample_profile_pairs_mle<R: Rng + ?Sized>(
    model: &CaseModel,
    params: &ModelParams,
    n: usize,
    rng: &mut R,
) -> Result<BTreeSet<Vec<usize>>> {
    if let Some(m) = model.unexplained_marker() {
        return Err(Error::ZeroLikelihood(format!("marker {m} has no admissible genotype pair")));
    }
    let beta = params.beta();
    let post: Vec<Vec<f64>> = model.markers().iter().map(|m| m.log_posterior(params.theta, beta)).collect();
    let mut seen = BTreeSet::new();
    for _ in 0..n {
        seen.insert(post.iter().map(|lp| sample_log_weights(lp, rng)).collect::<Vec<usize>>());
    }
    Ok(seen)
}

/// Exact draws from `Pr(c | R, σ)`: `θ` from its grid posterior, then the
/// pairs given `θ`.
pub fn sample_profile_pairs_sigma<R: Rng + ?Sized>(
    model: &CaseModel,
    sigma: f64,
    grid: &ThetaGrid,
    n: usize,
    rng: &mut R,
) -> Result<BTreeSet<Vec<usize>>> {
    if let Some(m) = model.unexplained_marker() {
        return Err(Error::ZeroLikelihood(format!("marker {m} has no admissible genotype pair")));
    }
    let beta = beta_from_sigma(sigma)?;
    let lw = model.grid_logliks(beta, grid);
    let posts: Vec<Vec<Vec<f64>>> = grid
        .points()
        .iter()
        .map(|&t| model.markers().iter().map(|m| m.log_posterior(t, beta)).collect())
        .collect();
    let mut seen = BTreeSet::new();
    for _ in 0..n {
        let j = sample_log_weights(&lw, rng);
        seen.insert(posts[j].iter().map(|lp| sample_log_weights(lp, rng)).collect::<Vec<usize>>());
    }
    Ok(seen)
}

/// The distinct configurations visited by the first `n` recorded chain sweeps.
pub fn sample_profile_pairs_chain(samples: &ChainSamples, n: usize) -> BTreeSet<Vec<usize>> {
    samples.pairs.iter().take(n).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub config: GenotypeConfig,
    pub probability: f64,
    /// Per marker, whether each contributor's genotype equals the supplied
    /// truth profile (absent when no truth was given).
    pub matches: Option<Vec<(bool, bool)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPairList {
    pub entries: Vec<RankedEntry>,
    pub total_mass: f64,
    pub certified_k: usize,
    pub n_samples: usize,
}

impl RankedPairList {
    /// Upper bound on the probability of any configuration not listed.
    pub fn bound(&self) -> f64 {
        (1.0 - self.total_mass).max(0.0)
    }
}

fn truth_matches(cfg: &GenotypeConfig, truth: (&Profile, &Profile)) -> Vec<(bool, bool)> {
    cfg.markers
        .iter()
        .zip(&cfg.pairs)
        .map(|(m, (g1, g2))| {
            (
                truth.0.genotype(m).is_ok_and(|t| t == g1),
                truth.1.genotype(m).is_ok_and(|t| t == g2),
            )
        })
        .collect()
}

/// Scores the discovered set, sorts by probability and counts the certified
/// prefix.
pub fn rank_configs(
    model: &CaseModel,
    discovered: &BTreeSet<Vec<usize>>,
    scoring: &Scoring,
    truth: Option<(&Profile, &Profile)>,
    n_samples: usize,
) -> RankedPairList {
    let configs: Vec<Vec<usize>> = discovered.iter().cloned().collect();
    let probs = score_configs(model, &configs, scoring);
    let mut order: Vec<usize> = (0..configs.len()).collect();
    // stable sort keeps canonical order among ties
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(std::cmp::Ordering::Equal));
    let total_mass: f64 = probs.iter().sum();
    let bound = 1.0 - total_mass;
    let entries: Vec<RankedEntry> = order
        .iter()
        .map(|&i| {
            let config = model.config_from_indices(&configs[i]);
            let matches = truth.map(|t| truth_matches(&config, t));
            RankedEntry { config, probability: probs[i], matches }
        })
        .collect();
    let certified_k = entries.iter().filter(|e| e.probability > bound).count();
    RankedPairList { entries, total_mass, certified_k, n_samples }
}

/// Where candidate configurations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DeconvolutionMode {
    /// Sample at the fitted parameters and score at the same point.
    Mle { params: ModelParams, n_samples: usize, seed: u64 },
    /// Sample and score at fixed `σ` with `θ` summed over the grid.
    Sigma { sigma: f64, grid: ThetaGrid, n_samples: usize, seed: u64 },
    /// Take the chain's configurations and score them averaged over its `σ` draws.
    Bayes { samples: ChainSamples, grid: ThetaGrid },
}

pub fn certified_topk(
    model: &CaseModel,
    mode: &DeconvolutionMode,
    truth: Option<(&Profile, &Profile)>,
) -> Result<RankedPairList> {
    match mode {
        DeconvolutionMode::Mle { params, n_samples, seed } => {
            let mut rng = stream(*seed, 0);
            let found = sample_profile_pairs_mle(model, params, *n_samples, &mut rng)?;
            Ok(rank_configs(model, &found, &Scoring::Fixed(*params), truth, *n_samples))
        }
        DeconvolutionMode::Sigma { sigma, grid, n_samples, seed } => {
            let mut rng = stream(*seed, 0);
            let found = sample_profile_pairs_sigma(model, *sigma, grid, *n_samples, &mut rng)?;
            let scoring = Scoring::SigmaMixture { sigmas: vec![*sigma], grid: grid.clone() };
            Ok(rank_configs(model, &found, &scoring, truth, *n_samples))
        }
        DeconvolutionMode::Bayes { samples, grid } => {
            if samples.is_empty() {
                return Err(Error::Domain("chain recorded no samples".into()));
            }
            let found = sample_profile_pairs_chain(samples, samples.len());
            let scoring = Scoring::SigmaMixture { sigmas: samples.sigma.clone(), grid: grid.clone() };
            Ok(rank_configs(model, &found, &scoring, truth, samples.len()))
        }
    }
}

/// Every configuration of the model, for exhaustive checks on small cases.
pub fn enumerate_configs(model: &CaseModel) -> Vec<Vec<usize>> {
    let sizes: Vec<usize> = model.markers().iter().map(|m| m.n_pairs()).collect();
    if sizes.contains(&0) {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for &n in &sizes {
        out = out
            .into_par_iter()
            .flat_map_iter(|prefix: Vec<usize>| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hypothesis, MarkerData, MixtureDataset, Slot};
    use crate::FrequencyTable;

    fn toy() -> (CaseModel, FrequencyTable) {
        let ds = MixtureDataset::new(vec![
            MarkerData::from_pairs("A", &[("1", 0.5), ("2", 0.3), ("3", 0.2)]).unwrap(),
            MarkerData::from_pairs("B", &[("7", 0.62), ("8", 0.38)]).unwrap(),
        ])
        .unwrap();
        let freqs = FrequencyTable::uniform_over(&ds, 2);
        (CaseModel::new(&ds, &Hypothesis::unknown(), &freqs).unwrap(), freqs)
    }

    #[test]
    fn enumeration_sums_to_one() {
        let (model, _) = toy();
        let all = enumerate_configs(&model);
        assert_eq!(all.len(), 12 * 7);
        let fixed = Scoring::Fixed(ModelParams::new(0.65, 0.1).unwrap());
        let mix = Scoring::SigmaMixture { sigmas: vec![0.1], grid: ThetaGrid::default() };
        for s in [fixed, mix] {
            let total: f64 = score_configs(&model, &all, &s).iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn fixed_mode_is_a_product_of_markers() {
        let (model, _) = toy();
        let p = ModelParams::new(0.7, 0.08).unwrap();
        let beta = p.beta();
        for c in enumerate_configs(&model) {
            let joint = score_configs(&model, &[c.clone()], &Scoring::Fixed(p))[0];
            let product: f64 = model
                .markers()
                .iter()
                .zip(&c)
                .map(|(m, &i)| m.log_posterior(0.7, beta)[i].exp())
                .product();
            assert!((joint - product).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_mode_couples_markers() {
        // with θ summed out, the joint is not the product of per-marker marginals
        let (model, _) = toy();
        let grid = ThetaGrid::default();
        let all = enumerate_configs(&model);
        let s = Scoring::SigmaMixture { sigmas: vec![0.05], grid };
        let probs = score_configs(&model, &all, &s);
        let mut marg_a = vec![0.0; 12];
        let mut marg_b = vec![0.0; 7];
        for (c, p) in all.iter().zip(&probs) {
            marg_a[c[0]] += p;
            marg_b[c[1]] += p;
        }
        let max_gap = all
            .iter()
            .zip(&probs)
            .map(|(c, p)| (p - marg_a[c[0]] * marg_b[c[1]]).abs())
            .fold(0.0, f64::max);
        assert!(max_gap > 1e-4);
    }

    #[test]
    fn certificate_is_sound() {
        let (model, _) = toy();
        let all = enumerate_configs(&model);
        for (seed, n) in [(1u64, 5usize), (2, 20), (3, 200)] {
            for scoring in [
                Scoring::Fixed(ModelParams::new(0.7, 0.1).unwrap()),
                Scoring::SigmaMixture { sigmas: vec![0.07, 0.12], grid: ThetaGrid::uniform(0.05).unwrap() },
            ] {
                let params = ModelParams::new(0.7, 0.1).unwrap();
                let found = sample_profile_pairs_mle(&model, &params, n, &mut stream(seed, 0)).unwrap();
                let list = rank_configs(&model, &found, &scoring, None, n);
                assert!(list.total_mass <= 1.0 + 1e-9);
                let exact = score_configs(&model, &all, &scoring);
                for (c, p) in all.iter().zip(&exact) {
                    if !found.contains(c) {
                        assert!(*p <= list.bound() + 1e-12);
                    }
                }
                assert!(list.entries.windows(2).all(|w| w[0].probability >= w[1].probability));
                let k = list.entries.iter().filter(|e| e.probability > 1.0 - list.total_mass).count();
                assert_eq!(k, list.certified_k);
            }
        }
    }

    #[test]
    fn more_samples_never_lose_mass() {
        let (model, _) = toy();
        let params = ModelParams::new(0.6, 0.15).unwrap();
        let mut prev = (0.0, 0usize);
        for n in [1usize, 3, 10, 30, 100, 300] {
            let found = sample_profile_pairs_mle(&model, &params, n, &mut stream(11, 0)).unwrap();
            let list = rank_configs(&model, &found, &Scoring::Fixed(params), None, n);
            assert!(list.total_mass >= prev.0 - 1e-15);
            assert!(list.certified_k >= prev.1);
            prev = (list.total_mass, list.certified_k);
        }
    }

    #[test]
    fn sampled_frequencies_match_exact() {
        let md = MarkerData::from_pairs("A", &[("1", 0.5), ("2", 0.3), ("3", 0.2)]).unwrap();
        let ds = MixtureDataset::new(vec![md]).unwrap();
        let model = CaseModel::new(&ds, &Hypothesis::unknown(), &FrequencyTable::uniform_over(&ds, 2)).unwrap();
        let params = ModelParams::new(0.7, 0.12).unwrap();
        let exact = model.markers()[0].log_posterior(0.7, params.beta());
        let mut rng = stream(13, 0);
        let n = 100_000;
        let mut counts = vec![0usize; exact.len()];
        for _ in 0..n {
            counts[sample_log_weights(&exact, &mut rng)] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let p = exact[i].exp();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * se + 1e-12);
        }
    }

    #[test]
    fn sigma_sampler_matches_mixture_scores() {
        let (model, _) = toy();
        let grid = ThetaGrid::uniform(0.1).unwrap();
        let all = enumerate_configs(&model);
        let exact = score_configs(&model, &all, &Scoring::SigmaMixture { sigmas: vec![0.1], grid: grid.clone() });
        // the probability that n draws miss a config is (1-p)^n
        let found = sample_profile_pairs_sigma(&model, 0.1, &grid, 5000, &mut stream(3, 0)).unwrap();
        for (c, p) in all.iter().zip(&exact) {
            if *p > 0.01 {
                assert!(found.contains(c));
            }
        }
    }

    #[test]
    fn deterministic_dataset_has_one_certified_config() {
        let ds = MixtureDataset::new(vec![
            MarkerData::from_pairs("A", &[("5", 1.0)]).unwrap(),
            MarkerData::from_pairs("B", &[("8", 1.0)]).unwrap(),
        ])
        .unwrap();
        let p = Profile::new("x").with("A", "5", "5").with("B", "8", "8");
        let h = Hypothesis::unknown().with(Slot::First, p.clone()).with(Slot::Second, p.clone());
        let model = CaseModel::new(&ds, &h, &FrequencyTable::empty()).unwrap();
        let mode = DeconvolutionMode::Mle { params: ModelParams::new(0.7, 0.1).unwrap(), n_samples: 50, seed: 1 };
        let list = certified_topk(&model, &mode, Some((&p, &p))).unwrap();
        assert_eq!(list.entries.len(), 1);
        assert_eq!(list.certified_k, 1);
        assert!((list.total_mass - 1.0).abs() < 1e-12);
        assert_eq!(list.entries[0].matches, Some(vec![(true, true), (true, true)]));
    }

    #[test]
    fn seeded_runs_repeat() {
        let (model, _) = toy();
        let mode = DeconvolutionMode::Mle { params: ModelParams::new(0.7, 0.1).unwrap(), n_samples: 500, seed: 5 };
        assert_eq!(certified_topk(&model, &mode, None).unwrap(), certified_topk(&model, &mode, None).unwrap());
    }

    #[test]
    fn out_of_support_config_scores_zero() {
        let (model, _) = toy();
        let mut cfg = model.config_from_indices(&[0, 0]);
        cfg.pairs[0].0 = crate::Genotype::new("1", "9");
        let s = Scoring::Fixed(ModelParams::new(0.7, 0.1).unwrap());
        assert_eq!(exact_pair_probability(&cfg, &model, &s), 0.0);
    }
}
