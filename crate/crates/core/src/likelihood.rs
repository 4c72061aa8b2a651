//! Exact likelihoods by per-marker marginalization over genotype pairs.
//!
//! With `θ` and `σ` fixed, genotypes and peak sizes are independent between
//! markers, so `log L(θ,σ)` is a sum of per-marker log-sum-exps over the
//! admissible ordered pairs `(g1, g2)`. [`CaseModel`] compiles a dataset and
//! a hypothesis once (pair supports, allele-count patterns, log priors) so the
//! estimators and samplers can re-evaluate it cheaply.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{
    enumerate_pair_indices, hw_genotype_log_prior, FrequencyTable, Genotype, GenotypeConfig,
    Hypothesis, MarkerData, MixtureDataset, ModelParams,
};
use crate::stats::log_sum_exp;

/// Natural-log likelihood. `-inf` when the hypothesis cannot explain the data.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogLik(pub f64);

impl LogLik {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_impossible(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// Discretized support and prior masses for `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for ThetaGrid {
    /// `{0.01, 0.02, …, 0.99}` with equal weights.
    fn default() -> Self {
        ThetaGrid::uniform(0.01).expect("default grid is valid")
    }
}

impl ThetaGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Domain("theta grid needs matching, non-empty points and weights".into()));
        }
        if points.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Domain("theta grid points must lie in (0,1)".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("theta grid points must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("theta grid weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("theta grid weights sum to {total}, not 1")));
        }
        Ok(ThetaGrid { points, weights })
    }

    /// Equally weighted points `step, 2·step, …` strictly below one.
    pub fn uniform(step: f64) -> Result<Self> {
        if !(step > 0.0 && step < 0.5) {
            return Err(Error::Domain(format!("theta grid step must lie in (0, 0.5), got {step}")));
        }
        let n = ((1.0 - 1e-9) / step).floor() as usize;
        let points: Vec<f64> = (1..=n).map(|k| k as f64 * step).filter(|t| *t < 1.0 - 1e-12).collect();
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        ThetaGrid::new(points, weights)
    }

    pub fn single(theta: f64) -> Result<Self> {
        ThetaGrid::new(vec![theta], vec![1.0])
    }

    /// Keeps `θ >= 0.5` (contributor 1 is the major one), halving the mass of
    /// a point sitting exactly at 0.5, and renormalizes.
    pub fn major_half(&self) -> ThetaGrid {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (&t, &w) in self.points.iter().zip(&self.weights) {
            if (t - 0.5).abs() < 1e-12 {
                points.push(t);
                weights.push(w / 2.0);
            } else if t > 0.5 {
                points.push(t);
                weights.push(w);
            }
        }
        if points.is_empty() {
            return self.clone();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        ThetaGrid { points, weights }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Step between the first two points, or zero for a single point.
    pub fn resolution(&self) -> f64 {
        if self.points.len() < 2 {
            0.0
        } else {
            self.points[1] - self.points[0]
        }
    }
}

/// Allele-count pattern `(n¹, n²)` packed as `3·n¹ + n²`.
const N_KINDS: usize = 9;

fn kind_mu(kind: u8, theta: f64) -> f64 {
    let n1 = (kind / 3) as f64;
    let n2 = (kind % 3) as f64;
    (theta * n1 + (1.0 - theta) * n2) / 2.0
}

/// `ln Γ(β·μ_k)` and `β·μ_k − 1` for each count pattern at one `(θ, β)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KindTable {
    lg_beta: f64,
    lg: [f64; N_KINDS],
    coef: [f64; N_KINDS],
}

impl KindTable {
    pub(crate) fn new(theta: f64, beta: f64) -> KindTable {
        let mut lg = [0.0; N_KINDS];
        let mut coef = [0.0; N_KINDS];
        for k in 1..N_KINDS as u8 {
            let a = beta * kind_mu(k, theta);
            lg[k as usize] = ln_gamma(a);
            coef[k as usize] = a - 1.0;
        }
        KindTable { lg_beta: ln_gamma(beta), lg, coef }
    }
}

#[derive(Debug, Clone)]
struct PairTerm {
    g1: (u8, u8),
    g2: (u8, u8),
    kinds: [u8; 4],
    log_prior: f64,
}

/// One marker compiled against a hypothesis: the admissible ordered pairs,
/// their allele-count patterns and the log prior of the unfixed contributors.
#[derive(Debug, Clone)]
pub struct MarkerModel {
    data: MarkerData,
    log_r: Vec<f64>,
    terms: Vec<PairTerm>,
}

impl MarkerModel {
    pub fn compile(md: &MarkerData, h: &Hypothesis, freqs: &FrequencyTable) -> Result<MarkerModel> {
        let n = md.n_alleles();
        let fixed1 = h.known1.as_ref().map(|p| p.genotype(&md.marker)).transpose()?;
        let fixed2 = h.known2.as_ref().map(|p| p.genotype(&md.marker)).transpose()?;
        let label = |(i, j): (usize, usize)| Genotype::new(&md.alleles[i], &md.alleles[j]);

        let mut terms = Vec::new();
        for (i1, i2) in enumerate_pair_indices(n) {
            let (g1, g2) = (label(i1), label(i2));
            if fixed1.is_some_and(|f| *f != g1) || fixed2.is_some_and(|f| *f != g2) {
                continue;
            }
            let mut log_prior = 0.0;
            if fixed1.is_none() {
                log_prior += hw_genotype_log_prior(&g1, &md.marker, freqs)?;
            }
            if fixed2.is_none() {
                log_prior += hw_genotype_log_prior(&g2, &md.marker, freqs)?;
            }
            let mut kinds = [0u8; 4];
            for (a, k) in kinds.iter_mut().enumerate().take(n) {
                let n1 = (i1.0 == a) as u8 + (i1.1 == a) as u8;
                let n2 = (i2.0 == a) as u8 + (i2.1 == a) as u8;
                *k = 3 * n1 + n2;
            }
            terms.push(PairTerm { g1: (i1.0 as u8, i1.1 as u8), g2: (i2.0 as u8, i2.1 as u8), kinds, log_prior });
        }
        Ok(MarkerModel {
            data: md.clone(),
            log_r: md.rel_sizes.iter().map(|r| r.ln()).collect(),
            terms,
        })
    }

    pub fn data(&self) -> &MarkerData {
        &self.data
    }

    pub fn marker(&self) -> &str {
        &self.data.marker
    }

    /// Number of admissible genotype pairs.
    pub fn n_pairs(&self) -> usize {
        self.terms.len()
    }

    pub fn pair(&self, i: usize) -> (Genotype, Genotype) {
        let t = &self.terms[i];
        let a = &self.data.alleles;
        (
            Genotype::new(&a[t.g1.0 as usize], &a[t.g1.1 as usize]),
            Genotype::new(&a[t.g2.0 as usize], &a[t.g2.1 as usize]),
        )
    }

    pub fn pair_index(&self, pair: &(Genotype, Genotype)) -> Option<usize> {
        (0..self.terms.len()).find(|&i| self.pair(i) == *pair)
    }

    pub fn log_prior(&self, i: usize) -> f64 {
        self.terms[i].log_prior
    }

    fn log_density(&self, term: &PairTerm, table: &KindTable) -> f64 {
        let mut v = table.lg_beta;
        for (a, &lr) in self.log_r.iter().enumerate() {
            let k = term.kinds[a] as usize;
            v += table.coef[k] * lr - table.lg[k];
        }
        v
    }

    pub(crate) fn terms_into(&self, table: &KindTable, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.terms.iter().map(|t| self.log_density(t, table) + t.log_prior));
    }

    pub(crate) fn loglik_table(&self, table: &KindTable) -> f64 {
        let mut buf = Vec::with_capacity(self.terms.len());
        self.terms_into(table, &mut buf);
        log_sum_exp(&buf)
    }

    /// Per-pair log terms at `(θ, β)`.
    pub fn log_terms(&self, theta: f64, beta: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.terms_into(&KindTable::new(theta, beta), &mut out);
        out
    }

    /// Normalized per-pair log posterior weights at `(θ, β)`.
    pub fn log_posterior(&self, theta: f64, beta: f64) -> Vec<f64> {
        let mut t = self.log_terms(theta, beta);
        let z = log_sum_exp(&t);
        t.iter_mut().for_each(|x| *x -= z);
        t
    }

    /// `(μ_a, log r_a)` for every observed allele under pair `i` at `θ`.
    pub fn fractions(&self, i: usize, theta: f64) -> Vec<(f64, f64)> {
        let t = &self.terms[i];
        self.log_r.iter().enumerate().map(|(a, &lr)| (kind_mu(t.kinds[a], theta), lr)).collect()
    }
}

/// A dataset compiled against one hypothesis and frequency table.
#[derive(Debug, Clone)]
pub struct CaseModel {
    markers: Vec<MarkerModel>,
    symmetric: bool,
}

impl CaseModel {
    pub fn new(ds: &MixtureDataset, h: &Hypothesis, freqs: &FrequencyTable) -> Result<CaseModel> {
        let markers = ds
            .markers
            .iter()
            .map(|md| MarkerModel::compile(md, h, freqs))
            .collect::<Result<Vec<_>>>()?;
        Ok(CaseModel { markers, symmetric: h.both_unknown() })
    }

    pub fn markers(&self) -> &[MarkerModel] {
        &self.markers
    }

    pub fn marker_ids(&self) -> Vec<String> {
        self.markers.iter().map(|m| m.marker().to_string()).collect()
    }

    /// True when both contributors are unknown, making `L(θ) = L(1−θ)`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// First marker with no admissible pair, if any.
    pub fn unexplained_marker(&self) -> Option<&str> {
        self.markers.iter().find(|m| m.n_pairs() == 0).map(|m| m.marker())
    }

    pub fn loglik_beta(&self, theta: f64, beta: f64) -> f64 {
        let table = KindTable::new(theta, beta);
        self.loglik_table(&table)
    }

    pub(crate) fn loglik_table(&self, table: &KindTable) -> f64 {
        let mut buf = Vec::with_capacity(12);
        let mut total = 0.0;
        for m in &self.markers {
            m.terms_into(table, &mut buf);
            total += log_sum_exp(&buf);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// `ℓ(θ, σ)`. Out-of-domain parameters give `-inf`.
    pub fn loglik(&self, theta: f64, sigma: f64) -> f64 {
        if !(theta > 0.0 && theta < 1.0 && sigma > 0.0 && sigma < 1.0) {
            return f64::NEG_INFINITY;
        }
        self.loglik_beta(theta, 1.0 / (sigma * sigma) - 1.0)
    }

    pub fn marker_logliks(&self, theta: f64, beta: f64) -> Vec<f64> {
        let table = KindTable::new(theta, beta);
        self.markers.iter().map(|m| m.loglik_table(&table)).collect()
    }

    /// Per grid point `log w_j + ℓ(θ_j, β)`.
    pub fn grid_logliks(&self, beta: f64, grid: &ThetaGrid) -> Vec<f64> {
        grid.points()
            .iter()
            .zip(grid.weights())
            .map(|(&t, &w)| w.ln() + self.loglik_beta(t, beta))
            .collect()
    }

    /// `ℓ(σ) = log Σ_j w_j·L(θ_j, σ)`.
    pub fn loglik_sigma_profile(&self, sigma: f64, grid: &ThetaGrid) -> f64 {
        if !(sigma > 0.0 && sigma < 1.0) {
            return f64::NEG_INFINITY;
        }
        log_sum_exp(&self.grid_logliks(1.0 / (sigma * sigma) - 1.0, grid))
    }

    /// Pair indices of `cfg` in each marker, `None` if some pair is not admissible.
    pub fn config_indices(&self, cfg: &GenotypeConfig) -> Option<Vec<usize>> {
        if cfg.pairs.len() != self.markers.len() {
            return None;
        }
        self.markers
            .iter()
            .zip(cfg.markers.iter().zip(&cfg.pairs))
            .map(|(m, (id, pair))| if id == m.marker() { m.pair_index(pair) } else { None })
            .collect()
    }

    pub fn config_from_indices(&self, idx: &[usize]) -> GenotypeConfig {
        GenotypeConfig {
            markers: self.marker_ids(),
            pairs: self.markers.iter().zip(idx).map(|(m, &i)| m.pair(i)).collect(),
        }
    }
}

/// Genotype-pair distribution at one marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerGenotypeDist {
    pub marker: String,
    pub entries: Vec<PairWeight>,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWeight {
    pub first: Genotype,
    pub second: Genotype,
    pub log_weight: f64,
}

impl MarkerGenotypeDist {
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_weight.exp()).collect()
    }

    pub fn probability(&self, first: &Genotype, second: &Genotype) -> f64 {
        self.entries
            .iter()
            .find(|e| e.first == *first && e.second == *second)
            .map_or(0.0, |e| e.log_weight.exp())
    }
}

pub fn marker_loglik(
    md: &MarkerData,
    h: &Hypothesis,
    params: &ModelParams,
    freqs: &FrequencyTable,
) -> Result<LogLik> {
    let m = MarkerModel::compile(md, h, freqs)?;
    Ok(LogLik(m.loglik_table(&KindTable::new(params.theta, params.beta()))))
}

pub fn loglik_joint(
    ds: &MixtureDataset,
    h: &Hypothesis,
    params: &ModelParams,
    freqs: &FrequencyTable,
) -> Result<LogLik> {
    Ok(LogLik(CaseModel::new(ds, h, freqs)?.loglik(params.theta, params.sigma)))
}

pub fn loglik_sigma_profile(
    ds: &MixtureDataset,
    h: &Hypothesis,
    sigma: f64,
    grid: &ThetaGrid,
    freqs: &FrequencyTable,
) -> Result<LogLik> {
    crate::model::beta_from_sigma(sigma)?;
    Ok(LogLik(CaseModel::new(ds, h, freqs)?.loglik_sigma_profile(sigma, grid)))
}

pub fn genotype_posterior(
    md: &MarkerData,
    h: &Hypothesis,
    params: &ModelParams,
    freqs: &FrequencyTable,
) -> Result<MarkerGenotypeDist> {
    let m = MarkerModel::compile(md, h, freqs)?;
    let logw = m.log_posterior(params.theta, params.beta());
    if m.n_pairs() == 0 || logw.iter().all(|w| w.is_nan()) {
        return Err(Error::ZeroLikelihood(md.marker.clone()));
    }
    let entries = logw
        .into_iter()
        .enumerate()
        .map(|(i, log_weight)| {
            let (first, second) = m.pair(i);
            PairWeight { first, second, log_weight }
        })
        .collect();
    Ok(MarkerGenotypeDist { marker: md.marker.clone(), entries, normalized: true })
}

/// `log10 LR` of `hp` against `hd`. Pass the same parameters twice for the
/// shared-MLE convention.
pub fn log10_lr(
    ds: &MixtureDataset,
    hp: &Hypothesis,
    hd: &Hypothesis,
    params_p: &ModelParams,
    params_d: &ModelParams,
    freqs: &FrequencyTable,
) -> Result<f64> {
    let lp = loglik_joint(ds, hp, params_p, freqs)?.value();
    let ld = loglik_joint(ds, hd, params_d, freqs)?.value();
    lr_from_logliks(lp, ld)
}

/// `log10` of `exp(lp)/exp(ld)`; undefined when both likelihoods vanish.
pub fn lr_from_logliks(lp: f64, ld: f64) -> Result<f64> {
    if lp == f64::NEG_INFINITY && ld == f64::NEG_INFINITY {
        return Err(Error::UndefinedRatio);
    }
    Ok((lp - ld) / std::f64::consts::LN_10)
}
