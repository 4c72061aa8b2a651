//! Parametric bootstrap of `(σ̂, θ̂)` and of the plug-in `log10 LR`.
//!
//! Each replicate draws a genotype pair per marker, then relative sizes from
//! `Dirichlet(β·μ)` at the baseline estimate, refits and recomputes the ratio.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit_joint_model, FitResult, JointFitOptions};
use crate::likelihood::{lr_from_logliks, CaseModel};
use crate::model::{
    mean_fractions, FrequencyTable, GenotypeConfig, Hypothesis, MarkerData, MixtureDataset,
    ModelParams,
};
use crate::rng::{stream, RNG_ALGORITHM};
use crate::stats::{quantile_type7, sorted, Histogram};

/// How the genotypes behind each simulated marker are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum SimulationMode {
    /// Draw a pair per marker from its posterior at the simulation parameters.
    #[default]
    Posterior,
    /// Keep one configuration fixed for every replicate.
    Fixed(GenotypeConfig),
}

/// Index drawn with probability proportional to `exp(log_weights)`.
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if u < *wi {
            return i;
        }
        u -= wi;
    }
    w.iter().rposition(|x| *x > 0.0).unwrap_or(0)
}

/// One draw from `Dirichlet(alpha)` via normalized gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    for _ in 0..100 {
        let mut draws = Vec::with_capacity(alpha.len());
        for &a in alpha {
            let g = Gamma::new(a, 1.0).map_err(|e| Error::Domain(format!("gamma shape {a}: {e}")))?;
            draws.push(g.sample(rng));
        }
        let total: f64 = draws.iter().sum();
        if draws.iter().all(|x| *x > 0.0) && total.is_finite() {
            return Ok(draws.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::Numerical("dirichlet draw kept underflowing".into()))
}

fn simulate_marker<R: Rng + ?Sized>(
    marker: &str,
    pair: &(crate::model::Genotype, crate::model::Genotype),
    params: &ModelParams,
    rng: &mut R,
) -> Result<MarkerData> {
    let mu = mean_fractions(&pair.0, &pair.1, params.theta);
    let beta = params.beta();
    let alpha: Vec<f64> = mu.entries.iter().map(|(_, m)| beta * m).collect();
    let r = sample_dirichlet(&alpha, rng)?;
    MarkerData::new(marker, mu.entries.iter().map(|(a, _)| a.clone()).collect(), r)
}

/// Simulates relative sizes for every marker of a compiled case.
pub fn simulate_from_model<R: Rng + ?Sized>(
    model: &CaseModel,
    params: &ModelParams,
    mode: &SimulationMode,
    rng: &mut R,
) -> Result<MixtureDataset> {
    let beta = params.beta();
    let mut markers = Vec::with_capacity(model.markers().len());
    for mm in model.markers() {
        let pair = match mode {
            SimulationMode::Posterior => {
                if mm.n_pairs() == 0 {
                    return Err(Error::ZeroLikelihood(mm.marker().to_string()));
                }
                let i = sample_log_weights(&mm.log_posterior(params.theta, beta), rng);
                mm.pair(i)
            }
            SimulationMode::Fixed(cfg) => cfg
                .pair(mm.marker())
                .cloned()
                .ok_or_else(|| Error::InvalidData(format!("configuration lacks marker {}", mm.marker())))?,
        };
        markers.push(simulate_marker(mm.marker(), &pair, params, rng)?);
    }
    MixtureDataset::new(markers)
}

pub fn simulate_dataset<R: Rng + ?Sized>(
    template: &MixtureDataset,
    h: &Hypothesis,
    params: &ModelParams,
    freqs: &FrequencyTable,
    mode: &SimulationMode,
    rng: &mut R,
) -> Result<MixtureDataset> {
    simulate_from_model(&CaseModel::new(template, h, freqs)?, params, mode, rng)
}

/// Which parameters enter numerator and denominator of the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LrMode {
    /// The `H_p` estimate in both.
    #[default]
    Shared,
    /// Each hypothesis at its own estimate.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n: usize,
    pub seed: u64,
    pub fit: JointFitOptions,
    pub simulation: SimulationMode,
    pub lr_mode: LrMode,
    pub level: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            n: 2000,
            seed: 1,
            fit: JointFitOptions::default(),
            simulation: SimulationMode::Posterior,
            lr_mode: LrMode::Shared,
            level: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub sigma_hat: f64,
    pub theta_hat: f64,
    pub log10_lr: f64,
    pub error: Option<String>,
}

impl Replicate {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub n: usize,
    pub seed: u64,
    pub rng: String,
    pub level: f64,
    pub baseline: FitResult,
    pub baseline_log10_lr: f64,
    pub replicates: Vec<Replicate>,
    pub failures: usize,
    pub ci_log10_lr: (f64, f64),
    pub ci_sigma: (f64, f64),
    pub ci_theta: (f64, f64),
    pub histograms: BootstrapHistograms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapHistograms {
    pub sigma: Histogram,
    pub theta: Histogram,
    pub log10_lr: Histogram,
}

/// Central percentile interval (type-7 quantiles).
pub fn percentile_interval(values: &[f64], level: f64) -> (f64, f64) {
    let s = sorted(values);
    if s.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let a = (1.0 - level) / 2.0;
    (quantile_type7(&s, a), quantile_type7(&s, 1.0 - a))
}

fn fit_and_lr(
    model_p: &CaseModel,
    model_d: &CaseModel,
    opts: &JointFitOptions,
    lr_mode: LrMode,
) -> Result<(FitResult, f64)> {
    let fit = fit_joint_model(model_p, opts)?;
    let p = fit
        .params()
        .ok_or_else(|| Error::Numerical("joint fit returned parameters outside (0,1)".into()))?;
    let ld = match lr_mode {
        LrMode::Shared => model_d.loglik(p.theta, p.sigma),
        LrMode::Separate => fit_joint_model(model_d, opts)?.loglik,
    };
    let lr = lr_from_logliks(model_p.loglik(p.theta, p.sigma), ld)?;
    Ok((fit, lr))
}

/// Fits under `hp`, then refits `opts.n` datasets simulated under `hp` at the
/// baseline estimate. Replicates run in parallel on independent streams.
pub fn bootstrap_lr(
    ds: &MixtureDataset,
    hp: &Hypothesis,
    hd: &Hypothesis,
    freqs: &FrequencyTable,
    opts: &BootstrapOptions,
) -> Result<BootstrapReport> {
    let model_p = CaseModel::new(ds, hp, freqs)?;
    let model_d = CaseModel::new(ds, hd, freqs)?;
    let (baseline, baseline_lr) = fit_and_lr(&model_p, &model_d, &opts.fit, opts.lr_mode)?;
    let p_hat = baseline.params().expect("checked in fit_and_lr");
    let refit_opts = JointFitOptions { start: Some(p_hat), ..opts.fit };

    let replicates: Vec<Replicate> = (0..opts.n)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream(opts.seed, index as u64);
            let mut run = || -> Result<(FitResult, f64)> {
                let sim = simulate_from_model(&model_p, &p_hat, &opts.simulation, &mut rng)?;
                let mp = CaseModel::new(&sim, hp, freqs)?;
                let md = CaseModel::new(&sim, hd, freqs)?;
                let (fit, lr) = fit_and_lr(&mp, &md, &refit_opts, opts.lr_mode)?;
                if !fit.converged {
                    return Err(Error::Numerical("refit did not converge".into()));
                }
                Ok((fit, lr))
            };
            match run() {
                Ok((fit, lr)) => Replicate {
                    index,
                    sigma_hat: fit.sigma(),
                    theta_hat: fit.theta().unwrap_or(f64::NAN),
                    log10_lr: lr,
                    error: None,
                },
                Err(e) => Replicate {
                    index,
                    sigma_hat: f64::NAN,
                    theta_hat: f64::NAN,
                    log10_lr: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let failures = replicates.iter().filter(|r| !r.ok()).count();
    if failures * 10 > opts.n {
        return Err(Error::TooManyFailures { failed: failures, total: opts.n });
    }
    let good: Vec<&Replicate> = replicates.iter().filter(|r| r.ok()).collect();
    let col = |f: fn(&Replicate) -> f64| good.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let (sig, th, lr) = (col(|r| r.sigma_hat), col(|r| r.theta_hat), col(|r| r.log10_lr));
    Ok(BootstrapReport {
        n: opts.n,
        seed: opts.seed,
        rng: RNG_ALGORITHM.to_string(),
        level: opts.level,
        baseline,
        baseline_log10_lr: baseline_lr,
        failures,
        ci_log10_lr: percentile_interval(&lr, opts.level),
        ci_sigma: percentile_interval(&sig, opts.level),
        ci_theta: percentile_interval(&th, opts.level),
        histograms: BootstrapHistograms {
            sigma: Histogram::build(&sig, 30),
            theta: Histogram::build(&th, 30),
            log10_lr: Histogram::build(&lr, 30),
        },
        replicates,
    })
}
