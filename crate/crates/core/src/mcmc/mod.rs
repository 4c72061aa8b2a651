//! Gibbs sampling over `(genotype configuration, θ, β)`.
//!
//! One sweep draws `θ` from its grid conditional with the genotypes summed
//! out, then each marker's genotype pair, then `β` by adaptive rejection
//! sampling from its log-concave full conditional.

pub mod ars;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::bootstrap::sample_log_weights;
use crate::deconvolution::SigmaMixtureScorer;
use crate::error::{Error, Result};
use crate::likelihood::{CaseModel, ThetaGrid};
use crate::model::{sigma_from_beta, GenotypeConfig};
use crate::optimize::brent_max;
use crate::rng::{stream, RNG_ALGORITHM};
use crate::stats::{correlation, log_sum_exp, mean, quantile_type7, sorted, variance};

pub use ars::{ars_sample, Ars, FnDensity, LogConcave, NumericDerivative};

/// Upper end of the `β` support, i.e. `σ >= 0.005`.
pub const BETA_MAX: f64 = 4e4;

/// Gamma prior on `β` in shape/scale form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for BetaPrior {
    fn default() -> Self {
        BetaPrior { shape: 3.6, scale: 49.0 }
    }
}

impl BetaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::Domain(format!("prior shape and scale must be positive, got ({shape}, {scale})")));
        }
        Ok(BetaPrior { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    /// Unnormalized log density and its derivative.
    pub fn log_density(&self, beta: f64) -> (f64, f64) {
        ((self.shape - 1.0) * beta.ln() - beta / self.scale, (self.shape - 1.0) / beta - 1.0 / self.scale)
    }

    fn gamma(&self) -> Gamma {
        Gamma::new(self.shape, 1.0 / self.scale).expect("validated parameters")
    }

    /// Central interval for `σ = 1/√(β+1)` induced by the prior.
    pub fn sigma_interval(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("level must lie in (0,1), got {level}")));
        }
        let g = self.gamma();
        let b_hi = g.inverse_cdf((1.0 + level) / 2.0);
        let b_lo = g.inverse_cdf((1.0 - level) / 2.0);
        Ok((sigma_from_beta(b_hi), sigma_from_beta(b_lo)))
    }
}

/// Current sweep state. `pairs[m]` indexes the admissible pairs of marker `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub pairs: Vec<usize>,
    pub theta_index: usize,
    pub beta: f64,
}

impl ChainState {
    pub fn sigma(&self) -> f64 {
        sigma_from_beta(self.beta)
    }

    pub fn genotypes(&self, model: &CaseModel) -> GenotypeConfig {
        model.config_from_indices(&self.pairs)
    }
}

pub struct GibbsSampler<'a> {
    model: &'a CaseModel,
    grid: &'a ThetaGrid,
    prior: BetaPrior,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(model: &'a CaseModel, grid: &'a ThetaGrid, prior: BetaPrior) -> Result<Self> {
        if let Some(m) = model.unexplained_marker() {
            return Err(Error::ZeroLikelihood(format!("marker {m} has no admissible genotype pair")));
        }
        Ok(GibbsSampler { model, grid, prior })
    }

    /// Grid midpoint, prior mean for `β`, most probable pair per marker there.
    pub fn initial_state(&self) -> ChainState {
        let theta_index = self.grid.len() / 2;
        let beta = self.prior.mean().min(BETA_MAX);
        let theta = self.grid.points()[theta_index];
        let pairs = self
            .model
            .markers()
            .iter()
            .map(|m| {
                let lp = m.log_posterior(theta, beta);
                (0..lp.len()).fold(0, |best, i| if lp[i] > lp[best] { i } else { best })
            })
            .collect();
        ChainState { pairs, theta_index, beta }
    }

    /// Draws a grid index from `p(θ_j | β, R)` with genotypes summed out.
    pub fn sample_theta<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Result<usize> {
        let lw = self.model.grid_logliks(beta, self.grid);
        if log_sum_exp(&lw) == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood(format!("every grid point is impossible at beta = {beta}")));
        }
        Ok(sample_log_weights(&lw, rng))
    }

    pub fn sample_pairs<R: Rng + ?Sized>(&self, theta: f64, beta: f64, rng: &mut R) -> Vec<usize> {
        self.model
            .markers()
            .iter()
            .map(|m| sample_log_weights(&m.log_posterior(theta, beta), rng))
            .collect()
    }

    /// Full conditional of `β` given genotypes and `θ`.
    pub fn beta_conditional(&self, pairs: &[usize], theta: f64) -> BetaConditional {
        let mut n_multi = 0.0;
        let mut parts = Vec::new();
        for (m, &i) in self.model.markers().iter().zip(pairs) {
            if m.data().n_alleles() < 2 {
                continue;
            }
            n_multi += 1.0;
            parts.extend(m.fractions(i, theta));
        }
        BetaConditional { prior: self.prior, n_multi, parts }
    }

    pub fn sample_beta<R: Rng + ?Sized>(&self, pairs: &[usize], theta: f64, rng: &mut R) -> Result<f64> {
        let cond = self.beta_conditional(pairs, theta);
        let init = cond.initial_points();
        ars_sample(&cond, 0.0, BETA_MAX, &init, rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        state.theta_index = self.sample_theta(state.beta, rng)?;
        let theta = self.grid.points()[state.theta_index];
        state.pairs = self.sample_pairs(theta, state.beta, rng);
        state.beta = self.sample_beta(&state.pairs, theta, rng).map_err(|e| match e {
            Error::NotConcave { x, detail } => Error::NotConcave {
                x,
                detail: format!("{detail}; state theta={theta} pairs={:?}", state.pairs),
            },
            other => other,
        })?;
        Ok(())
    }
}

/// `log p(β | c, θ, R)` up to a constant, with derivative.
pub struct BetaConditional {
    prior: BetaPrior,
    n_multi: f64,
    /// `(μ_a, log r_a)` over all alleles of markers with two or more alleles.
    parts: Vec<(f64, f64)>,
}

impl LogConcave for BetaConditional {
    fn eval(&self, beta: f64) -> (f64, f64) {
        let (mut h, mut dh) = self.prior.log_density(beta);
        h += self.n_multi * ln_gamma(beta);
        dh += self.n_multi * digamma(beta);
        for &(mu, lr) in &self.parts {
            let a = beta * mu;
            h += (a - 1.0) * lr - ln_gamma(a);
            dh += mu * (lr - digamma(a));
        }
        (h, dh)
    }
}

impl BetaConditional {
    pub fn log_density(&self, beta: f64) -> f64 {
        self.eval(beta).0
    }

    /// Mode and mode ± one curvature-based spread, inside `(0, BETA_MAX]`.
    fn initial_points(&self) -> Vec<f64> {
        let f = |u: f64| self.log_density(u.exp());
        let opt = brent_max(f, (1e-3f64).ln(), BETA_MAX.ln(), 1e-4, 200);
        let m = opt.x.exp().min(BETA_MAX);
        let d = 1e-3 * m;
        let d2 = (self.eval(m + d).1 - self.eval((m - d).max(m / 2.0)).1) / (2.0 * d);
        let sd = if d2 < 0.0 { (-1.0 / d2).sqrt() } else { 0.5 * m };
        let lo = if m - sd > 0.0 { m - sd } else { m / 2.0 };
        let hi = (m + sd).min(BETA_MAX * (1.0 - 1e-9));
        let mut pts = vec![lo, m.min(BETA_MAX * (1.0 - 1e-6)), hi];
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * b.abs());
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    pub n: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// RNG stream index, so several chains can share a seed.
    pub chain: u64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { n: 55_000, burnin: 5_000, thin: 5, seed: 1, chain: 0 }
    }
}

/// Recorded sweeps after burn-in and thinning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainSamples {
    pub iteration: Vec<usize>,
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub pairs: Vec<Vec<usize>>,
}

impl ChainSamples {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub sigma_mean: f64,
    pub theta_mean: f64,
    pub sigma_cri99: (f64, f64),
    pub theta_cri99: (f64, f64),
    pub sigma_sd: f64,
    pub theta_sd: f64,
    pub corr: f64,
    pub n_samples: usize,
    pub n: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub chain: u64,
    pub rng: String,
}

fn central(xs: &[f64], level: f64) -> (f64, f64) {
    let s = sorted(xs);
    let a = (1.0 - level) / 2.0;
    (quantile_type7(&s, a), quantile_type7(&s, 1.0 - a))
}

impl PosteriorSummary {
    pub fn from_samples(samples: &ChainSamples, opts: &ChainOptions) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("no samples recorded".into()));
        }
        Ok(PosteriorSummary {
            sigma_mean: mean(&samples.sigma),
            theta_mean: mean(&samples.theta),
            sigma_cri99: central(&samples.sigma, 0.99),
            theta_cri99: central(&samples.theta, 0.99),
            sigma_sd: variance(&samples.sigma).sqrt(),
            theta_sd: variance(&samples.theta).sqrt(),
            corr: correlation(&samples.sigma, &samples.theta),
            n_samples: samples.len(),
            n: opts.n,
            burnin: opts.burnin,
            thin: opts.thin,
            seed: opts.seed,
            chain: opts.chain,
            rng: RNG_ALGORITHM.to_string(),
        })
    }
}

/// Runs one chain of `opts.n` sweeps and keeps every `thin`-th after `burnin`.
pub fn run_chain(
    model: &CaseModel,
    grid: &ThetaGrid,
    prior: BetaPrior,
    opts: &ChainOptions,
) -> Result<(ChainSamples, PosteriorSummary)> {
    if opts.n <= opts.burnin || opts.thin == 0 {
        return Err(Error::Domain(format!(
            "need n > burnin and thin >= 1, got n={} burnin={} thin={}",
            opts.n, opts.burnin, opts.thin
        )));
    }
    let sampler = GibbsSampler::new(model, grid, prior)?;
    let mut rng = stream(opts.seed, opts.chain);
    let mut state = sampler.initial_state();
    let mut out = ChainSamples::default();
    for t in 1..=opts.n {
        sampler.step(&mut state, &mut rng)?;
        if t > opts.burnin && (t - opts.burnin).is_multiple_of(opts.thin) {
            out.iteration.push(t);
            out.sigma.push(state.sigma());
            out.theta.push(grid.points()[state.theta_index]);
            out.beta.push(state.beta);
            out.pairs.push(state.pairs.clone());
        }
    }
    let summary = PosteriorSummary::from_samples(&out, opts)?;
    Ok((out, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BayesLrOptions {
    pub chain: ChainOptions,
    /// Use the `H_p` chain's `σ` draws for both hypotheses.
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesLr {
    pub log10_lr: f64,
    /// Delta-method standard error treating the draws as independent.
    pub stderr: f64,
    pub log_marginal_p: f64,
    pub log_marginal_d: f64,
    pub n_samples_p: usize,
    pub n_samples_d: usize,
}

/// `log((1/N)·Σ exp ℓ(σ_i))` and its delta-method standard error.
pub fn log_mean_profile(model: &CaseModel, sigmas: &[f64], grid: &ThetaGrid) -> (f64, f64) {
    let ls: Vec<f64> = sigmas.iter().map(|&s| model.loglik_sigma_profile(s, grid)).collect();
    let n = ls.len() as f64;
    let lme = log_sum_exp(&ls) - n.ln();
    if !lme.is_finite() {
        return (lme, f64::NAN);
    }
    let w: Vec<f64> = ls.iter().map(|l| (l - lme).exp()).collect();
    let se = (variance(&w) / n).sqrt();
    (lme, se)
}

/// Monte Carlo estimate of `log10 den(R|H_p)/den(R|H_d)` from `σ` draws.
pub fn bayes_log10_lr_from_samples(
    model_p: &CaseModel,
    model_d: &CaseModel,
    sigma_p: &[f64],
    sigma_d: &[f64],
    grid: &ThetaGrid,
) -> Result<BayesLr> {
    let (lp, sp) = log_mean_profile(model_p, sigma_p, grid);
    let (ld, sd) = log_mean_profile(model_d, sigma_d, grid);
    if ld == f64::NEG_INFINITY {
        return Err(Error::UndefinedRatio);
    }
    Ok(BayesLr {
        log10_lr: (lp - ld) / std::f64::consts::LN_10,
        stderr: (sp * sp + sd * sd).sqrt() / std::f64::consts::LN_10,
        log_marginal_p: lp,
        log_marginal_d: ld,
        n_samples_p: sigma_p.len(),
        n_samples_d: sigma_d.len(),
    })
}

/// Runs a chain per hypothesis (streams 0 and 1 of the seed) and averages
/// the exact `σ`-conditional likelihoods.
pub fn bayes_log10_lr(
    model_p: &CaseModel,
    model_d: &CaseModel,
    grid: &ThetaGrid,
    prior: BetaPrior,
    opts: &BayesLrOptions,
) -> Result<BayesLr> {
    let cp = ChainOptions { chain: 0, ..opts.chain };
    let (sp, _) = run_chain(model_p, grid, prior, &cp)?;
    if opts.shared {
        return bayes_log10_lr_from_samples(model_p, model_d, &sp.sigma, &sp.sigma, grid);
    }
    let cd = ChainOptions { chain: 1, ..opts.chain };
    let (sd, _) = run_chain(model_d, grid, prior, &cd)?;
    bayes_log10_lr_from_samples(model_p, model_d, &sp.sigma, &sd.sigma, grid)
}

/// `(1/N)·Σ_i Pr(c | R, σ_i)` with `θ` summed over the grid. Zero when `cfg`
/// is not admissible.
pub fn bayes_pair_probability(cfg: &GenotypeConfig, model: &CaseModel, sigmas: &[f64], grid: &ThetaGrid) -> f64 {
    match model.config_indices(cfg) {
        Some(idx) => bayes_pair_probabilities(&[idx], model, sigmas, grid)[0],
        None => 0.0,
    }
}

/// Batch version over pair-index configurations.
pub fn bayes_pair_probabilities(configs: &[Vec<usize>], model: &CaseModel, sigmas: &[f64], grid: &ThetaGrid) -> Vec<f64> {
    if sigmas.is_empty() {
        return vec![0.0; configs.len()];
    }
    let scorer = SigmaMixtureScorer::new(model, grid);
    let per_sample: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        sigmas
            .par_iter()
            .map(|&s| scorer.probabilities(configs, 1.0 / (s * s) - 1.0))
            .collect()
    };
    let n = sigmas.len() as f64;
    (0..configs.len()).map(|c| per_sample.iter().map(|p| p[c]).sum::<f64>() / n).collect()
}
