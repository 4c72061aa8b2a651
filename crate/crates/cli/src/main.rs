use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dnamix_cli::{parse_profile_arg, run_case, Analysis, CaseConfig, CliError, CliResult, HypothesisSpec, Method};
use dnamix_core::bootstrap::LrMode;
use dnamix_core::mcmc::BetaPrior;

#[derive(Parser)]
#[command(name = "dnamix", version, about = "Two-person DNA mixture analysis under the gamma/Dirichlet peak model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate mixing proportion and peak variability.
    Fit(Common),
    /// Likelihood ratio between the prosecution and defence hypotheses.
    Evidence {
        #[command(flatten)]
        common: Common,
        /// Evaluate both Bayes marginal likelihoods on the prosecution chain.
        #[arg(long)]
        shared_lr: bool,
    },
    /// Parametric bootstrap of the likelihood ratio.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        replicates: usize,
        #[arg(long, value_enum, default_value_t = LrModeArg::Shared)]
        lr_mode: LrModeArg,
        /// Simulate from the most probable genotypes instead of redrawing them.
        #[arg(long)]
        fixed_genotypes: bool,
    },
    /// Gibbs sampler over mixing proportion, genotypes and variability.
    Gibbs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Rank genotype configurations by posterior probability.
    Deconvolve {
        #[command(flatten)]
        common: Common,
        /// Posterior draws used with the Bayes method.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Draw a synthetic peak profile from the model.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "sigma")]
        theta: Option<f64>,
        #[arg(long, requires = "theta")]
        sigma: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Peak table: marker,allele,area or marker,allele,rel.
    #[arg(long)]
    peaks: PathBuf,
    /// Allele frequencies: marker,allele,freq.
    #[arg(long)]
    freqs: Option<PathBuf>,
    /// NAME=PATH[:SLOT]; a slot fixes the profile in the prosecution hypothesis.
    #[arg(long = "profile")]
    profiles: Vec<String>,
    /// Prosecution hypothesis, e.g. "1=suspect" (overrides profile slots).
    #[arg(long)]
    hypothesis: Option<String>,
    /// Defence hypothesis; empty means two unknown contributors.
    #[arg(long, default_value = "")]
    defence: String,
    /// Known contributors to compare deconvolution results against.
    #[arg(long)]
    truth: Option<String>,
    /// Spacing of the mixing proportion grid.
    #[arg(long, default_value_t = 0.01)]
    theta_grid: f64,
    /// Gamma prior on the Dirichlet precision, as SHAPE,SCALE.
    #[arg(long, value_parser = parse_prior)]
    prior: Option<BetaPrior>,
    #[arg(long, value_enum, default_value_t = MethodArg::MleJoint)]
    method: MethodArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "DNAMIX_OUT", default_value = "dnamix-out")]
    out: PathBuf,
    /// Divide peak areas by repeat number before normalizing.
    #[arg(long)]
    repeat_correct: bool,
    /// Repeat number overrides: marker,allele,repeats.
    #[arg(long)]
    repeat_numbers: Option<PathBuf>,
    /// Add the declared profiles to the frequency table, as if it came from N people.
    #[arg(long, value_name = "N")]
    augment: Option<f64>,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, default_value_t = 55_000)]
    iterations: usize,
    #[arg(long, default_value_t = 5_000)]
    burnin: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    MleSigma,
    MleJoint,
    Bayes,
}

#[derive(Clone, Copy, ValueEnum)]
enum LrModeArg {
    Shared,
    Separate,
}

fn parse_prior(s: &str) -> Result<BetaPrior, String> {
    let (a, b) = s.split_once(',').ok_or("expected SHAPE,SCALE")?;
    let shape: f64 = a.trim().parse().map_err(|_| format!("bad shape {a:?}"))?;
    let scale: f64 = b.trim().parse().map_err(|_| format!("bad scale {b:?}"))?;
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err("shape and scale must be positive".into());
    }
    Ok(BetaPrior { shape, scale })
}

fn base_config(analysis: Analysis, c: Common) -> CliResult<CaseConfig> {
    let mut cfg = CaseConfig::new(analysis, c.peaks, c.out);
    cfg.freqs = c.freqs;
    cfg.repeat_correct = c.repeat_correct;
    cfg.repeat_numbers = c.repeat_numbers;
    cfg.augment_database_size = c.augment;
    cfg.theta_step = c.theta_grid;
    cfg.seed = c.seed;
    cfg.method = match c.method {
        MethodArg::MleSigma => Method::MleSigma,
        MethodArg::MleJoint => Method::MleJoint,
        MethodArg::Bayes => Method::Bayes,
    };
    if let Some(p) = c.prior {
        cfg.prior = p;
    }
    let mut slotted = HypothesisSpec::default();
    for arg in &c.profiles {
        let (spec, slot) = parse_profile_arg(arg)?;
        let target = match slot {
            Some(1) => Some(&mut slotted.slot1),
            Some(_) => Some(&mut slotted.slot2),
            None => None,
        };
        if let Some(t) = target {
            if t.replace(spec.name.clone()).is_some() {
                return Err(CliError::Data(format!("two profiles assigned to the same slot ({arg})")));
            }
        }
        cfg.profiles.push(spec);
    }
    cfg.hypothesis = match &c.hypothesis {
        Some(h) => HypothesisSpec::parse(h)?,
        None => slotted,
    };
    cfg.defence = HypothesisSpec::parse(&c.defence)?;
    cfg.truth = c.truth.as_deref().map(HypothesisSpec::parse).transpose()?;
    Ok(cfg)
}

fn apply_chain(cfg: &mut CaseConfig, ch: ChainArgs) {
    cfg.chain.n = ch.iterations;
    cfg.chain.burnin = ch.burnin;
    cfg.chain.thin = ch.thin;
}

fn build(cli: Cli) -> CliResult<CaseConfig> {
    Ok(match cli.command {
        Command::Fit(c) => base_config(Analysis::Fit, c)?,
        Command::Evidence { common, shared_lr } => {
            let mut cfg = base_config(Analysis::Evidence, common)?;
            cfg.chain.shared_lr = shared_lr;
            cfg
        }
        Command::Bootstrap { common, replicates, lr_mode, fixed_genotypes } => {
            let mut cfg = base_config(Analysis::Bootstrap, common)?;
            cfg.bootstrap.n = replicates;
            cfg.bootstrap.lr_mode = match lr_mode {
                LrModeArg::Shared => LrMode::Shared,
                LrModeArg::Separate => LrMode::Separate,
            };
            cfg.bootstrap.fixed_genotypes = fixed_genotypes;
            cfg
        }
        Command::Gibbs { common, chain } => {
            let mut cfg = base_config(Analysis::Gibbs, common)?;
            apply_chain(&mut cfg, chain);
            cfg
        }
        Command::Deconvolve { common, samples, chain } => {
            let mut cfg = base_config(Analysis::Deconvolve, common)?;
            cfg.deconvolution_samples = samples;
            apply_chain(&mut cfg, chain);
            cfg
        }
        Command::Simulate { common, theta, sigma } => {
            let mut cfg = base_config(Analysis::Simulate, common)?;
            cfg.simulate_params = theta.zip(sigma);
            cfg
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build(cli).and_then(|cfg| run_case(&cfg)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
