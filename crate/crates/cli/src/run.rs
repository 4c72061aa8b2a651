//! Executes one configured analysis and writes its report files.

use std::path::{Path, PathBuf};

use dnamix_core::bootstrap::{bootstrap_lr, simulate_dataset, BootstrapOptions, SimulationMode};
use dnamix_core::deconvolution::{certified_topk, DeconvolutionMode, RankedPairList};
use dnamix_core::estimator::{fit_joint_model, fit_sigma_model, FitResult, JointFitOptions, SigmaFitOptions};
use dnamix_core::likelihood::lr_from_logliks;
use dnamix_core::mcmc::{bayes_log10_lr, run_chain, BayesLrOptions, ChainOptions, ChainSamples, PosteriorSummary};
use dnamix_core::model::augment_frequencies;
use dnamix_core::rng::{stream, RNG_ALGORITHM};
use dnamix_core::{CaseModel, FrequencyTable, Hypothesis, MixtureDataset, ModelParams, Profile, Slot, ThetaGrid};
use serde::Serialize;
use serde_json::json;

use crate::config::{Analysis, CaseConfig, HypothesisSpec, Method};
use crate::error::{CliError, CliResult};
use crate::io::{ingest_peaks, peaks_csv, read_frequencies, read_profile, read_repeat_numbers};

/// Loaded inputs of a case.
pub struct Case {
    pub dataset: MixtureDataset,
    pub freqs: FrequencyTable,
    pub profiles: Vec<Profile>,
    pub hp: Hypothesis,
    pub hd: Hypothesis,
    pub grid: ThetaGrid,
}

impl Case {
    pub fn load(cfg: &CaseConfig) -> CliResult<Case> {
        let repeats = cfg.repeat_numbers.as_deref().map(read_repeat_numbers).transpose()?;
        let dataset = ingest_peaks(&cfg.peaks, cfg.repeat_correct, repeats.as_ref())?;
        let profiles = cfg
            .profiles
            .iter()
            .map(|p| read_profile(&p.path, &p.name))
            .collect::<CliResult<Vec<_>>>()?;
        let mut freqs = match &cfg.freqs {
            Some(path) => read_frequencies(path)?,
            None => FrequencyTable::empty(),
        };
        if let Some(n) = cfg.augment_database_size {
            freqs = augment_frequencies(&freqs, &profiles, 1.0, n)?;
        }
        let hp = hypothesis(&cfg.hypothesis, &profiles);
        let hd = hypothesis(&cfg.defence, &profiles);
        let grid = ThetaGrid::uniform(cfg.theta_step)?;
        Ok(Case { dataset, freqs, profiles, hp, hd, grid })
    }

    pub fn model(&self, h: &Hypothesis) -> CliResult<CaseModel> {
        let model = CaseModel::new(&self.dataset, h, &self.freqs)?;
        if let Some(m) = model.unexplained_marker() {
            return Err(CliError::Data(format!("hypothesis cannot explain the alleles observed at marker {m}")));
        }
        Ok(model)
    }

    /// With two unknown contributors, contributor 1 is taken as the major one.
    pub fn grid_for(&self, model: &CaseModel) -> ThetaGrid {
        if model.is_symmetric() {
            self.grid.major_half()
        } else {
            self.grid.clone()
        }
    }

    fn profile(&self, name: &str) -> &Profile {
        self.profiles.iter().find(|p| p.name == name).expect("validated profile name")
    }
}

fn hypothesis(spec: &HypothesisSpec, profiles: &[Profile]) -> Hypothesis {
    let find = |n: &String| profiles.iter().find(|p| &p.name == n).cloned().expect("validated profile name");
    let mut h = Hypothesis::unknown();
    if let Some(n) = &spec.slot1 {
        h = h.with(Slot::First, find(n));
    }
    if let Some(n) = &spec.slot2 {
        h = h.with(Slot::Second, find(n));
    }
    h
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    config: &'a CaseConfig,
    seed: u64,
    rng: &'a str,
    result: T,
}

struct Writer<'a> {
    cfg: &'a CaseConfig,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn put(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Output { path: path.clone(), message: e.to_string() })?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, result: T) -> CliResult<()> {
        let report = Report { config: self.cfg, seed: self.cfg.seed, rng: RNG_ALGORITHM, result };
        let s = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Output { path: self.path(name), message: e.to_string() })?;
        self.put(name, &(s + "\n"))
    }

    /// CSV preceded by a `#` line holding the resolved configuration.
    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let err = |e: csv::Error| CliError::Output { path: self.path(name), message: e.to_string() };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
        let meta = json!({ "config": self.cfg, "seed": self.cfg.seed, "rng": RNG_ALGORITHM });
        self.put(name, &format!("# {meta}\n{body}"))
    }

    fn trace(&mut self, samples: &ChainSamples) -> CliResult<()> {
        let header = ["iteration", "sigma", "theta"].map(String::from);
        let rows: Vec<Vec<String>> = samples
            .iteration
            .iter()
            .zip(samples.sigma.iter().zip(&samples.theta))
            .map(|(i, (s, t))| vec![i.to_string(), s.to_string(), t.to_string()])
            .collect();
        self.csv("trace.csv", &header, &rows)
    }
}

fn mle_fit(case: &Case, model: &CaseModel, method: Method) -> CliResult<FitResult> {
    Ok(match method {
        Method::MleSigma => fit_sigma_model(model, &case.grid, &SigmaFitOptions::default())?,
        _ => fit_joint_model(model, &JointFitOptions::default())?,
    })
}

fn chain_options(cfg: &CaseConfig) -> ChainOptions {
    ChainOptions { n: cfg.chain.n, burnin: cfg.chain.burnin, thin: cfg.chain.thin, seed: cfg.seed, chain: 0 }
}

fn chain(case: &Case, cfg: &CaseConfig, model: &CaseModel) -> CliResult<(ChainSamples, PosteriorSummary)> {
    Ok(run_chain(model, &case.grid_for(model), cfg.prior, &chain_options(cfg))?)
}

/// Runs the configured analysis; returns the files written.
pub fn run_case(cfg: &CaseConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate()?;
    let case = Case::load(cfg)?;
    std::fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io { path: cfg.out.clone(), source })?;
    let mut w = Writer { cfg, written: Vec::new() };
    let model_p = case.model(&case.hp)?;

    match cfg.analysis {
        Analysis::Gibbs | Analysis::Fit if cfg.analysis == Analysis::Gibbs || cfg.method == Method::Bayes => {
            let (samples, summary) = chain(&case, cfg, &model_p)?;
            w.json("fit.json", json!({ "method": "bayes", "summary": summary }))?;
            w.trace(&samples)?;
        }
        Analysis::Fit | Analysis::Gibbs => {
            let fit = mle_fit(&case, &model_p, cfg.method)?;
            w.json("fit.json", json!({ "method": cfg.method, "fit": fit }))?;
        }
        Analysis::Evidence => {
            let model_d = case.model(&case.hd)?;
            let result = evidence(&case, cfg, &model_p, &model_d)?;
            w.json("lr.json", result)?;
        }
        Analysis::Bootstrap => bootstrap(&case, cfg, &model_p, &mut w)?,
        Analysis::Deconvolve => {
            let list = deconvolve(&case, cfg, &model_p, &mut w)?;
            write_ranked(&mut w, &list)?;
        }
        Analysis::Simulate => {
            let params = match cfg.simulate_params {
                Some((t, s)) => ModelParams::new(t, s)?,
                None => fit_joint_model(&model_p, &JointFitOptions::default())?
                    .params()
                    .ok_or_else(|| CliError::Data("joint fit gave no parameters".into()))?,
            };
            let mut rng = stream(cfg.seed, 0);
            let sim = simulate_dataset(&case.dataset, &case.hp, &params, &case.freqs, &SimulationMode::Posterior, &mut rng)?;
            let meta = json!({ "config": cfg, "seed": cfg.seed, "rng": RNG_ALGORITHM, "theta": params.theta, "sigma": params.sigma });
            w.put("simulated.csv", &format!("# {meta}\n{}", peaks_csv(&sim)?))?;
        }
    }
    Ok(w.written)
}

fn evidence(case: &Case, cfg: &CaseConfig, model_p: &CaseModel, model_d: &CaseModel) -> CliResult<serde_json::Value> {
    match cfg.method {
        Method::Bayes => {
            let opts = BayesLrOptions { chain: chain_options(cfg), shared: cfg.chain.shared_lr };
            let lr = bayes_log10_lr(model_p, model_d, &case.grid, cfg.prior, &opts)?;
            Ok(json!({ "method": "bayes", "log10_lr": lr.log10_lr, "stderr": lr.stderr, "detail": lr }))
        }
        Method::MleJoint => {
            let fp = fit_joint_model(model_p, &JointFitOptions::default())?;
            let fd = fit_joint_model(model_d, &JointFitOptions::default())?;
            let p = fp.params().ok_or_else(|| CliError::Data("joint fit gave no parameters".into()))?;
            let shared = lr_from_logliks(model_p.loglik(p.theta, p.sigma), model_d.loglik(p.theta, p.sigma))?;
            let separate = lr_from_logliks(fp.loglik, fd.loglik)?;
            Ok(json!({ "method": "mle-joint", "log10_lr": shared, "log10_lr_separate": separate, "fit_p": fp, "fit_d": fd }))
        }
        Method::MleSigma => {
            let fp = fit_sigma_model(model_p, &case.grid, &SigmaFitOptions::default())?;
            let fd = fit_sigma_model(model_d, &case.grid, &SigmaFitOptions::default())?;
            let s = fp.sigma();
            let shared = lr_from_logliks(
                model_p.loglik_sigma_profile(s, &case.grid),
                model_d.loglik_sigma_profile(s, &case.grid),
            )?;
            let separate = lr_from_logliks(fp.loglik, fd.loglik)?;
            Ok(json!({ "method": "mle-sigma", "log10_lr": shared, "log10_lr_separate": separate, "fit_p": fp, "fit_d": fd }))
        }
    }
}

fn bootstrap(case: &Case, cfg: &CaseConfig, model_p: &CaseModel, w: &mut Writer) -> CliResult<()> {
    if cfg.method != Method::MleJoint {
        return Err(CliError::Data("the bootstrap refits (θ, σ) jointly; use --method mle-joint".into()));
    }
    let simulation = if cfg.bootstrap.fixed_genotypes {
        let fit = fit_joint_model(model_p, &JointFitOptions::default())?;
        let p = fit.params().ok_or_else(|| CliError::Data("joint fit gave no parameters".into()))?;
        let idx: Vec<usize> = model_p
            .markers()
            .iter()
            .map(|m| {
                let lp = m.log_posterior(p.theta, p.beta());
                (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b })
            })
            .collect();
        SimulationMode::Fixed(model_p.config_from_indices(&idx))
    } else {
        SimulationMode::Posterior
    };
    let opts = BootstrapOptions {
        n: cfg.bootstrap.n,
        seed: cfg.seed,
        simulation,
        lr_mode: cfg.bootstrap.lr_mode,
        ..BootstrapOptions::default()
    };
    let report = bootstrap_lr(&case.dataset, &case.hp, &case.hd, &case.freqs, &opts)?;
    let header = ["replicate", "sigma_hat", "theta_hat", "log10_lr", "error"].map(String::from);
    let rows: Vec<Vec<String>> = report
        .replicates
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.sigma_hat.to_string(),
                r.theta_hat.to_string(),
                r.log10_lr.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    w.csv("bootstrap.csv", &header, &rows)?;
    w.json(
        "lr.json",
        json!({
            "method": "mle-joint",
            "log10_lr": report.baseline_log10_lr,
            "bootstrap_ci": report.ci_log10_lr,
            "level": report.level,
            "sigma_ci": report.ci_sigma,
            "theta_ci": report.ci_theta,
            "n": report.n,
            "failures": report.failures,
            "baseline": report.baseline,
        }),
    )?;
    w.json("histograms.json", &report.histograms)
}

fn deconvolve(case: &Case, cfg: &CaseConfig, model: &CaseModel, w: &mut Writer) -> CliResult<RankedPairList> {
    let truth: Option<(&Profile, &Profile)> = match &cfg.truth {
        Some(HypothesisSpec { slot1: Some(a), slot2: Some(b) }) => Some((case.profile(a), case.profile(b))),
        Some(_) => return Err(CliError::Data("--truth needs a profile for both slots".into())),
        None => None,
    };
    let mode = match cfg.method {
        Method::MleJoint => {
            let fit = fit_joint_model(model, &JointFitOptions::default())?;
            let params = fit.params().ok_or_else(|| CliError::Data("joint fit gave no parameters".into()))?;
            DeconvolutionMode::Mle { params, n_samples: cfg.deconvolution_samples, seed: cfg.seed }
        }
        Method::MleSigma => {
            let grid = case.grid_for(model);
            let fit = fit_sigma_model(model, &grid, &SigmaFitOptions::default())?;
            DeconvolutionMode::Sigma { sigma: fit.sigma(), grid, n_samples: cfg.deconvolution_samples, seed: cfg.seed }
        }
        Method::Bayes => {
            let (samples, _) = chain(case, cfg, model)?;
            w.trace(&samples)?;
            DeconvolutionMode::Bayes { samples, grid: case.grid_for(model) }
        }
    };
    Ok(certified_topk(model, &mode, truth)?)
}

fn write_ranked(w: &mut Writer, list: &RankedPairList) -> CliResult<()> {
    let markers = list.entries.first().map(|e| e.config.markers.clone()).unwrap_or_default();
    let mut header: Vec<String> = ["rank", "probability", "cumulative", "certified"].map(String::from).to_vec();
    for m in &markers {
        header.push(format!("{m}_1"));
        header.push(format!("{m}_2"));
    }
    let bound = list.bound();
    let mut cumulative = 0.0;
    let rows: Vec<Vec<String>> = list
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            cumulative += e.probability;
            let mut row = vec![
                (i + 1).to_string(),
                e.probability.to_string(),
                cumulative.to_string(),
                (e.probability > bound).to_string(),
            ];
            for (g1, g2) in &e.config.pairs {
                let (a, b) = g1.alleles();
                row.push(format!("{a}/{b}"));
                let (a, b) = g2.alleles();
                row.push(format!("{a}/{b}"));
            }
            row
        })
        .collect();
    w.csv("deconvolution.csv", &header, &rows)?;
    w.json("deconvolution.json", list)
}

/// Default output directory when none is given.
pub fn default_out() -> &'static Path {
    Path::new("dnamix-out")
}
