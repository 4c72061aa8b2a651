use statrs::function::beta::inv_beta_reg;
use statrs::function::gamma::ln_gamma;

use super::genotype::{allele_cmp, Genotype};
use crate::error::{Error, Result};

/// Expected relative peak size of each allele carried by either contributor.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFractions {
    pub entries: Vec<(String, f64)>,
}

impl MeanFractions {
    pub fn get(&self, allele: &str) -> f64 {
        self.entries.iter().find(|(a, _)| a == allele).map_or(0.0, |(_, m)| *m)
    }

    pub fn alleles(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(a, _)| a.as_str())
    }
}

/// `μ_a = (θ·n¹_a + (1−θ)·n²_a) / 2` over the union of both genotypes' alleles.
pub fn mean_fractions(g1: &Genotype, g2: &Genotype, theta: f64) -> MeanFractions {
    let (a, b) = g1.alleles();
    let (c, d) = g2.alleles();
    let mut support: Vec<&str> = vec![a, b, c, d];
    support.sort_by(|x, y| allele_cmp(x, y));
    support.dedup();
    let entries = support
        .into_iter()
        .map(|allele| {
            let n1 = g1.count(allele) as f64;
            let n2 = g2.count(allele) as f64;
            (allele.to_string(), (theta * n1 + (1.0 - theta) * n2) / 2.0)
        })
        .collect();
    MeanFractions { entries }
}

pub fn beta_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Domain(format!("sigma must lie in (0,1), got {sigma}")));
    }
    Ok(1.0 / (sigma * sigma) - 1.0)
}

pub fn sigma_from_beta(beta: f64) -> f64 {
    1.0 / (beta + 1.0).sqrt()
}

/// Log Dirichlet density of `r` with concentration `alpha`.
///
/// Returns `-inf` when some `r_a <= 0` meets `alpha_a >= 1`.
pub fn log_dirichlet_density(r: &[f64], alpha: &[f64]) -> Result<f64> {
    if r.is_empty() || r.len() != alpha.len() {
        return Err(Error::Domain(format!(
            "dirichlet: {} sizes vs {} concentrations",
            r.len(),
            alpha.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::Domain(format!("dirichlet concentration must be positive, got {a}")));
    }
    let total: f64 = alpha.iter().sum();
    let mut log_density = ln_gamma(total);
    for (&x, &a) in r.iter().zip(alpha) {
        log_density -= ln_gamma(a);
        if x <= 0.0 {
            if a >= 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
            return Ok(f64::INFINITY);
        }
        if a != 1.0 {
            log_density += (a - 1.0) * x.ln();
        }
    }
    Ok(log_density)
}

/// Central prediction interval for the heterozygote balance, which is
/// `F(β, β)` distributed. Uses `Hb = X/(1−X)` with `X ~ Beta(β/2, β/2)`.
pub fn hb_prediction_interval(sigma: f64, level: f64) -> Result<(f64, f64)> {
    let beta = beta_from_sigma(sigma)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0,1), got {level}")));
    }
    let quantile = |p: f64| {
        let x = inv_beta_reg(beta / 2.0, beta / 2.0, p);
        x / (1.0 - x)
    };
    Ok((quantile((1.0 - level) / 2.0), quantile((1.0 + level) / 2.0)))
}
