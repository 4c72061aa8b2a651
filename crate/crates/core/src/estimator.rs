//! Maximum likelihood for `σ` (θ integrated over a grid) and for `(θ, σ)`
//! jointly, with standard errors from a central-difference Hessian and Wald
//! intervals.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{CaseModel, ThetaGrid};
use crate::model::{FrequencyTable, Hypothesis, MixtureDataset, ModelParams};
use crate::optimize::{brent_max, nelder_mead_max};

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.5758;

/// Smallest distance kept between an interval endpoint and the domain edge.
const DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaFitOptions {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for SigmaFitOptions {
    fn default() -> Self {
        SigmaFitOptions { lo: 0.005, hi: 0.5, tol: 1e-6, max_evals: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointFitOptions {
    /// Convergence tolerance on the log-likelihood across the simplex.
    pub tol: f64,
    pub max_evals: usize,
    /// Starting point; a coarse grid scan picks one when absent.
    pub start: Option<ModelParams>,
}

impl Default for JointFitOptions {
    fn default() -> Self {
        JointFitOptions { tol: 1e-7, max_evals: 2000, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub ci99: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// `sigma` alone, or `theta` then `sigma`.
    pub estimates: Vec<Estimate>,
    pub loglik: f64,
    pub cov: Option<Vec<Vec<f64>>>,
    pub corr: Option<f64>,
    /// Central-difference gradient of the log-likelihood at the estimate.
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub boundary: bool,
    pub hessian_ok: bool,
    pub evals: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn sigma(&self) -> f64 {
        self.estimate("sigma").map(|e| e.value).unwrap_or(f64::NAN)
    }

    pub fn theta(&self) -> Option<f64> {
        self.estimate("theta").map(|e| e.value)
    }

    /// `(θ̂, σ̂)` for a joint fit.
    pub fn params(&self) -> Option<ModelParams> {
        self.theta().and_then(|t| ModelParams::new(t, self.sigma()).ok())
    }
}

/// Symmetric central-difference Hessian of `f` at `x`.
pub fn numerical_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], steps: &[f64]) -> Result<Vec<Vec<f64>>> {
    if steps.len() != x.len() {
        return Err(Error::Domain("one step per coordinate required".into()));
    }
    if let Some(h) = steps.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let k = x.len();
    let at = |d: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in d {
            p[i] += s;
        }
        f(&p)
    };
    let f0 = f(x);
    let mut hess = vec![vec![0.0; k]; k];
    for i in 0..k {
        let h = steps[i];
        hess[i][i] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let (hi, hj) = (steps[i], steps[j]);
            let v = (at(&[(i, hi), (j, hj)]) - at(&[(i, hi), (j, -hj)]) - at(&[(i, -hi), (j, hj)])
                + at(&[(i, -hi), (j, -hj)]))
                / (4.0 * hi * hj);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    for i in 0..k {
        for j in 0..i {
            let avg = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = avg;
            hess[j][i] = avg;
        }
    }
    Ok(hess)
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], steps: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += steps[i];
            let up = f(&p);
            p[i] -= 2.0 * steps[i];
            (up - f(&p)) / (2.0 * steps[i])
        })
        .collect()
}

fn fd_step(value: f64) -> f64 {
    (1e-3 * value.abs()).max(1e-4)
}

/// Smaller than the Hessian step: the likelihood is sharply peaked in `θ` and
/// the third-derivative error at `fd_step` swamps the true first derivative.
fn grad_step(value: f64) -> f64 {
    (1e-5 * value.abs()).max(1e-7)
}

fn wald(value: f64, se: f64) -> (f64, f64) {
    (
        (value - Z99 * se).max(DOMAIN_MARGIN),
        (value + Z99 * se).min(1.0 - DOMAIN_MARGIN),
    )
}

pub fn fit_sigma(
    ds: &MixtureDataset,
    h: &Hypothesis,
    grid: &ThetaGrid,
    freqs: &FrequencyTable,
    opts: &SigmaFitOptions,
) -> Result<FitResult> {
    fit_sigma_model(&CaseModel::new(ds, h, freqs)?, grid, opts)
}

/// Maximizes the profile `ℓ(σ) = log Σ_j w_j L(θ_j, σ)` over `[lo, hi]`.
pub fn fit_sigma_model(model: &CaseModel, grid: &ThetaGrid, opts: &SigmaFitOptions) -> Result<FitResult> {
    if let Some(m) = model.unexplained_marker() {
        return Err(Error::ZeroLikelihood(m.to_string()));
    }
    if !(opts.lo > 0.0 && opts.lo < opts.hi && opts.hi < 1.0) {
        return Err(Error::Domain(format!("bad sigma bracket [{}, {}]", opts.lo, opts.hi)));
    }
    let evals = Cell::new(0usize);
    let ell = |s: f64| {
        evals.set(evals.get() + 1);
        model.loglik_sigma_profile(s, grid)
    };
    let opt = brent_max(ell, opts.lo, opts.hi, opts.tol, opts.max_evals);
    if !opt.fx.is_finite() {
        return Err(Error::Numerical("profile log-likelihood is not finite at the optimum".into()));
    }
    let sigma = opt.x;
    let edge = (10.0 * opts.tol).max(1e-5);
    let boundary = sigma - opts.lo < edge || opts.hi - sigma < edge;

    let step = fd_step(sigma);
    let f1 = |x: &[f64]| ell(x[0]);
    let hess = numerical_hessian(f1, &[sigma], &[step])?;
    let gradient = central_gradient(f1, &[sigma], &[grad_step(sigma)]);
    let d2 = hess[0][0];
    let hessian_ok = d2.is_finite() && d2 < 0.0;
    let (stderr, ci99, cov) = if hessian_ok {
        let var = -1.0 / d2;
        let se = var.sqrt();
        (Some(se), Some(wald(sigma, se)), Some(vec![vec![var]]))
    } else {
        (None, None, None)
    };
    let mut warnings = Vec::new();
    if boundary {
        warnings.push(format!("sigma estimate {sigma:.6} is at the search bracket edge"));
    }
    if !opt.converged {
        warnings.push("sigma search hit the evaluation limit".into());
    }
    Ok(FitResult {
        estimates: vec![Estimate { name: "sigma".into(), value: sigma, stderr, ci99 }],
        loglik: opt.fx,
        cov,
        corr: None,
        gradient,
        converged: opt.converged,
        boundary,
        hessian_ok,
        evals: evals.get(),
        warnings,
    })
}

pub fn fit_joint(
    ds: &MixtureDataset,
    h: &Hypothesis,
    freqs: &FrequencyTable,
    opts: &JointFitOptions,
) -> Result<FitResult> {
    fit_joint_model(&CaseModel::new(ds, h, freqs)?, opts)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Coarse scan for a starting point; only `θ >= 0.5` when the model is symmetric.
fn scan_start(model: &CaseModel) -> (f64, f64) {
    let thetas: Vec<f64> = (1..20).map(|k| k as f64 * 0.05).filter(|t| !model.is_symmetric() || *t >= 0.5).collect();
    let sigmas = [0.02, 0.04, 0.07, 0.1, 0.15, 0.25, 0.4];
    let mut best = (f64::NEG_INFINITY, 0.5, 0.1);
    for &t in &thetas {
        for &s in &sigmas {
            let v = model.loglik(t, s);
            if v > best.0 {
                best = (v, t, s);
            }
        }
    }
    (best.1, best.2)
}

/// Maximizes `ℓ(θ, σ)`: Nelder–Mead on `(logit θ, log σ)`, then coordinate-wise
/// Brent polishing on the original scale.
pub fn fit_joint_model(model: &CaseModel, opts: &JointFitOptions) -> Result<FitResult> {
    if let Some(m) = model.unexplained_marker() {
        return Err(Error::ZeroLikelihood(m.to_string()));
    }
    let evals = Cell::new(0usize);
    let ell = |theta: f64, sigma: f64| {
        evals.set(evals.get() + 1);
        model.loglik(theta, sigma)
    };
    let (t0, s0) = match opts.start {
        Some(p) => (p.theta, p.sigma),
        None => scan_start(model),
    };
    let transformed = |u: &[f64]| ell(expit(u[0]), u[1].exp());
    let mut nm = nelder_mead_max(transformed, &[logit(t0), s0.ln()], &[0.3, 0.3], opts.tol, 1e-7, opts.max_evals);
    let restart = nelder_mead_max(transformed, &nm.x, &[0.05, 0.05], opts.tol, 1e-7, opts.max_evals);
    if restart.fx >= nm.fx {
        nm = restart;
    }
    let mut theta = expit(nm.x[0]);
    let mut sigma = nm.x[1].exp();
    let mut best = nm.fx;
    if !best.is_finite() {
        return Err(Error::Numerical("joint log-likelihood is not finite at the optimum".into()));
    }

    for _ in 0..3 {
        let dt = 0.01f64.min(theta / 2.0).min((1.0 - theta) / 2.0);
        let r = brent_max(|t| ell(t, sigma), theta - dt, theta + dt, 1e-10, 100);
        if r.fx >= best {
            theta = r.x;
            best = r.fx;
        }
        let ds = 0.1 * sigma;
        let r = brent_max(|s| ell(theta, s), sigma - ds, (sigma + ds).min(1.0 - 1e-9), 1e-10, 100);
        if r.fx >= best {
            sigma = r.x;
            best = r.fx;
        }
    }

    let mut warnings = Vec::new();
    if model.is_symmetric() {
        warnings.push("both contributors unknown: likelihood is symmetric under theta -> 1 - theta; reporting theta >= 0.5".into());
        if theta < 0.5 {
            theta = 1.0 - theta;
        }
    }

    let steps = [fd_step(theta), fd_step(sigma)];
    let f2 = |x: &[f64]| model.loglik(x[0], x[1]);
    let hess = numerical_hessian(f2, &[theta, sigma], &steps)?;
    let gradient = central_gradient(f2, &[theta, sigma], &[grad_step(theta), grad_step(sigma)]);
    evals.set(evals.get() + 13);

    // covariance = inverse of the negative Hessian
    let (a, b, d) = (-hess[0][0], -hess[0][1], -hess[1][1]);
    let det = a * d - b * b;
    let hessian_ok = a > 0.0 && d > 0.0 && det > 0.0 && det.is_finite();
    let (cov, corr, se) = if hessian_ok {
        let cov = vec![vec![d / det, -b / det], vec![-b / det, a / det]];
        let se = [cov[0][0].sqrt(), cov[1][1].sqrt()];
        let corr = cov[0][1] / (se[0] * se[1]);
        (Some(cov), Some(corr), Some(se))
    } else {
        warnings.push("Hessian is not negative definite; standard errors omitted".into());
        (None, None, None)
    };
    let boundary = !(1e-3..=1.0 - 1e-3).contains(&theta) || sigma < 1e-3;
    if !nm.converged {
        warnings.push("Nelder-Mead hit the evaluation limit".into());
    }
    let estimate = |name: &str, value: f64, se: Option<f64>| Estimate {
        name: name.into(),
        value,
        stderr: se,
        ci99: se.map(|s| wald(value, s)),
    };
    Ok(FitResult {
        estimates: vec![estimate("theta", theta, se.map(|s| s[0])), estimate("sigma", sigma, se.map(|s| s[1]))],
        loglik: model.loglik(theta, sigma),
        cov,
        corr,
        gradient,
        converged: nm.converged,
        boundary,
        hessian_ok,
        evals: evals.get(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::model::{MarkerData, Profile, Slot};

    #[test]
    fn hessian_of_quadratics() {
        let h = numerical_hessian(|x| -x[0] * x[0], &[0.0], &[1e-3]).unwrap();
        assert!((h[0][0] + 2.0).abs() < 1e-6);
        let f = |x: &[f64]| {
            let (t, s) = (x[0] - 0.7, x[1] - 0.07);
            -t * t - 10.0 * s * s - t * s
        };
        let h = numerical_hessian(f, &[0.69, 0.071], &[1e-3, 1e-4]).unwrap();
        let want = [[-2.0, -1.0], [-1.0, -20.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[i][j] - want[i][j]).abs() < 1e-5, "{i}{j}: {}", h[i][j]);
            }
        }
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn hessian_rejects_bad_steps() {
        assert!(numerical_hessian(|x| x[0], &[0.0], &[0.0]).is_err());
        assert!(numerical_hessian(|x| x[0], &[0.0], &[-1.0]).is_err());
    }

    fn both_known() -> Hypothesis {
        Hypothesis::unknown()
            .with(Slot::First, datasets::perlin_major())
            .with(Slot::Second, datasets::perlin_minor())
    }

    #[test]
    fn perlin_both_known_joint_fit() {
        let fit = fit_joint(&datasets::perlin(), &both_known(), &FrequencyTable::empty(), &Default::default()).unwrap();
        assert!(fit.converged && fit.hessian_ok);
        let t = fit.estimate("theta").unwrap();
        let s = fit.estimate("sigma").unwrap();
        assert!((s.value - 0.067).abs() < 0.002, "{}", s.value);
        assert!((t.value - 0.696).abs() < 0.002, "{}", t.value);
        let (lo, hi) = s.ci99.unwrap();
        assert!((lo - 0.041).abs() < 0.002 && (hi - 0.094).abs() < 0.002, "{lo} {hi}");
        let (lo, hi) = t.ci99.unwrap();
        assert!((lo - 0.667).abs() < 0.002 && (hi - 0.725).abs() < 0.002, "{lo} {hi}");
        assert!((fit.corr.unwrap() + 0.042).abs() < 0.01, "{}", fit.corr.unwrap());
    }

    #[test]
    fn profile_curvature_matches_joint_marginal() {
        let model = CaseModel::new(&datasets::perlin(), &both_known(), &FrequencyTable::empty()).unwrap();
        let fit = fit_joint_model(&model, &Default::default()).unwrap();
        let p = fit.params().unwrap();
        // conditional curvature in sigma vs the sigma entry of the inverse covariance
        let h = numerical_hessian(|x| model.loglik(p.theta, x[0]), &[p.sigma], &[fd_step(p.sigma)]).unwrap();
        let cov = fit.cov.clone().unwrap();
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[0][1];
        let info_ss = cov[0][0] / det;
        assert!(((-h[0][0]) / info_ss - 1.0).abs() < 0.05);
        // and ℓ''(σ̂) against 1/stderr² of the marginal, as the correlation is small
        let se = fit.estimate("sigma").unwrap().stderr.unwrap();
        assert!((-h[0][0] * se * se - 1.0).abs() < 0.05);
    }

    #[test]
    fn joint_fit_start_invariance() {
        let model = CaseModel::new(&datasets::perlin(), &both_known(), &FrequencyTable::empty()).unwrap();
        let reference = fit_joint_model(&model, &Default::default()).unwrap();
        for t in [0.3, 0.6, 0.9] {
            for s in [0.02, 0.1, 0.3] {
                let opts = JointFitOptions { start: Some(ModelParams::new(t, s).unwrap()), ..Default::default() };
                let fit = fit_joint_model(&model, &opts).unwrap();
                assert!((fit.sigma() - reference.sigma()).abs() < 1e-4, "start ({t},{s})");
                assert!((fit.theta().unwrap() - reference.theta().unwrap()).abs() < 1e-4, "start ({t},{s})");
            }
        }
    }

    #[test]
    fn balanced_marker_hits_lower_bracket() {
        let md = MarkerData::from_pairs("M", &[("a", 0.5), ("b", 0.5)]).unwrap();
        let ds = MixtureDataset::new(vec![md]).unwrap();
        let p = Profile::new("p").with("M", "a", "b");
        let h = Hypothesis::unknown().with(Slot::First, p.clone()).with(Slot::Second, p);
        let fit = fit_sigma(&ds, &h, &ThetaGrid::default(), &FrequencyTable::empty(), &Default::default()).unwrap();
        assert!(fit.boundary);
        assert!(fit.sigma() < 0.005 + 1e-4);
    }

    #[test]
    fn sigma_fit_gradient_vanishes() {
        let ds = datasets::perlin();
        let fit = fit_sigma(&ds, &both_known(), &ThetaGrid::default(), &FrequencyTable::empty(), &Default::default()).unwrap();
        assert!(fit.converged && !fit.boundary);
        assert!(fit.gradient[0].abs() < 1e-3 * fit.loglik.abs().max(1.0));
        let (lo, hi) = fit.estimate("sigma").unwrap().ci99.unwrap();
        assert!(0.0 < lo && lo < hi && hi < 1.0);
    }
}
