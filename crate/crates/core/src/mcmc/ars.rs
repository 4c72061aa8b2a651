//! Adaptive rejection sampling for log-concave densities on an interval.
//!
//! The upper hull is built from tangents at the abscissae, the squeeze from
//! secants between them. Every rejected point is added to the hull.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::log_sum_exp;

/// Relative slack before a density value above the upper hull is reported as
/// a concavity violation. Absorbs rounding in the tangent evaluation.
const HULL_SLACK: f64 = 1e-7;
const MAX_POINTS: usize = 60;

/// Log density and its derivative at `x`.
pub trait LogConcave {
    fn eval(&self, x: f64) -> (f64, f64);
}

impl<D: LogConcave + ?Sized> LogConcave for &D {
    fn eval(&self, x: f64) -> (f64, f64) {
        (**self).eval(x)
    }
}

/// A closure returning `(log density, derivative)`.
pub struct FnDensity<F>(pub F);

impl<F: Fn(f64) -> (f64, f64)> LogConcave for FnDensity<F> {
    fn eval(&self, x: f64) -> (f64, f64) {
        (self.0)(x)
    }
}

/// Wraps a log density without an analytic derivative; uses central differences.
pub struct NumericDerivative<F>(pub F);

impl<F: Fn(f64) -> f64> LogConcave for NumericDerivative<F> {
    fn eval(&self, x: f64) -> (f64, f64) {
        let h = 1e-6 * x.abs().max(1.0);
        let d = ((self.0)(x + h) - (self.0)(x - h)) / (2.0 * h);
        ((self.0)(x), d)
    }
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    x: f64,
    h: f64,
    dh: f64,
}

/// Reusable sampler: the hull keeps its refinements across draws.
pub struct Ars<D> {
    density: D,
    lo: f64,
    hi: f64,
    knots: Vec<Knot>,
    z: Vec<f64>,
    log_mass: Vec<f64>,
}

impl<D: LogConcave> Ars<D> {
    /// `lo`/`hi` may be infinite, in which case the outermost initial points
    /// must have a derivative pointing into the domain.
    pub fn new(density: D, lo: f64, hi: f64, init: &[f64]) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("empty sampling interval [{lo}, {hi}]")));
        }
        let mut xs: Vec<f64> = init.iter().copied().filter(|x| *x > lo && *x < hi).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        if xs.is_empty() {
            return Err(Error::Domain("no initial abscissa inside the interval".into()));
        }
        let mut knots = Vec::with_capacity(xs.len());
        for x in xs {
            let (h, dh) = density.eval(x);
            if !h.is_finite() || !dh.is_finite() {
                return Err(Error::Numerical(format!("log density not finite at initial point {x}")));
            }
            knots.push(Knot { x, h, dh });
        }
        if lo == f64::NEG_INFINITY && knots[0].dh <= 0.0 {
            return Err(Error::Domain("leftmost initial point must have positive slope".into()));
        }
        if hi == f64::INFINITY && knots[knots.len() - 1].dh >= 0.0 {
            return Err(Error::Domain("rightmost initial point must have negative slope".into()));
        }
        let mut ars = Ars { density, lo, hi, knots, z: Vec::new(), log_mass: Vec::new() };
        ars.check_slopes()?;
        ars.rebuild();
        Ok(ars)
    }

    pub fn n_points(&self) -> usize {
        self.knots.len()
    }

    fn check_slopes(&self) -> Result<()> {
        for w in self.knots.windows(2) {
            let tol = HULL_SLACK * (w[0].dh.abs() + w[1].dh.abs() + 1.0);
            if w[1].dh > w[0].dh + tol {
                return Err(Error::NotConcave {
                    x: w[1].x,
                    detail: format!("slope rises from {} at {} to {} at {}", w[0].dh, w[0].x, w[1].dh, w[1].x),
                });
            }
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        let k = self.knots.len();
        self.z.clear();
        self.z.push(self.lo);
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let ddh = a.dh - b.dh;
            let z = if ddh.abs() <= 1e-12 * (a.dh.abs() + b.dh.abs() + 1.0) {
                0.5 * (a.x + b.x)
            } else {
                (b.h - a.h - b.x * b.dh + a.x * a.dh) / ddh
            };
            self.z.push(z.clamp(a.x, b.x));
        }
        self.z.push(self.hi);
        self.log_mass = (0..k).map(|j| segment_log_mass(&self.knots[j], self.z[j], self.z[j + 1])).collect();
    }

    fn upper(&self, x: f64) -> f64 {
        let j = self.z[1..self.knots.len()].partition_point(|z| *z < x);
        let k = &self.knots[j];
        k.h + (x - k.x) * k.dh
    }

    fn lower(&self, x: f64) -> f64 {
        let first = self.knots[0].x;
        let last = self.knots[self.knots.len() - 1].x;
        if x < first || x > last {
            return f64::NEG_INFINITY;
        }
        let j = self.knots.partition_point(|k| k.x <= x);
        if j == 0 || j >= self.knots.len() {
            return self.knots[self.knots.len() - 1].h;
        }
        let (a, b) = (&self.knots[j - 1], &self.knots[j]);
        ((b.x - x) * a.h + (x - a.x) * b.h) / (b.x - a.x)
    }

    fn draw_from_hull<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = log_sum_exp(&self.log_mass);
        let mut u = rng.random::<f64>();
        let mut j = self.log_mass.len() - 1;
        for (i, lm) in self.log_mass.iter().enumerate() {
            let p = (lm - total).exp();
            if u < p {
                j = i;
                break;
            }
            u -= p;
        }
        let k = &self.knots[j];
        let (a, b) = (self.z[j], self.z[j + 1]);
        let v = rng.random::<f64>();
        let x = if k.dh.abs() < 1e-300 || (b - a) * k.dh.abs() < 1e-12 {
            a + v * (b - a)
        } else if k.dh < 0.0 {
            a + decaying_exponential(-k.dh, b - a, v)
        } else {
            b - decaying_exponential(k.dh, b - a, v)
        };
        x.clamp(a, b)
    }

    /// One exact draw.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        for _ in 0..10_000 {
            let x = self.draw_from_hull(rng);
            let u = self.upper(x);
            let log_v = rng.random::<f64>().ln();
            if log_v <= self.lower(x) - u {
                return Ok(x);
            }
            let (h, dh) = self.density.eval(x);
            if h > u + HULL_SLACK * (1.0 + u.abs()) {
                return Err(Error::NotConcave {
                    x,
                    detail: format!("log density {h} exceeds upper hull {u}"),
                });
            }
            let accept = log_v <= h - u;
            if h.is_finite() && dh.is_finite() && self.knots.len() < MAX_POINTS {
                let pos = self.knots.partition_point(|k| k.x < x);
                if self.knots.get(pos).is_none_or(|k| k.x != x) {
                    self.knots.insert(pos, Knot { x, h, dh });
                    self.check_slopes()?;
                    self.rebuild();
                }
            }
            if accept {
                return Ok(x);
            }
        }
        Err(Error::Numerical("adaptive rejection sampling made no progress".into()))
    }
}

/// Offset in `[0, w]` with density ∝ `exp(-λ·y)`, by inversion.
fn decaying_exponential(lambda: f64, w: f64, v: f64) -> f64 {
    let span = if w.is_finite() { -(-lambda * w).exp_m1() } else { 1.0 };
    -(-v * span).ln_1p() / lambda
}

/// `log ∫_a^b exp(h + (x − x₀)·h') dx`.
fn segment_log_mass(k: &Knot, a: f64, b: f64) -> f64 {
    let w = b - a;
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = k.dh;
    if d.abs() * w.min(1e300) < 1e-12 || d == 0.0 {
        return k.h + (a.max(k.x.min(b)) - k.x) * d + w.ln();
    }
    if d < 0.0 {
        let ua = k.h + (a - k.x) * d;
        let span = if w.is_finite() { (-(d * w).exp_m1()).ln() } else { 0.0 };
        ua + span - (-d).ln()
    } else {
        let ub = k.h + (b - k.x) * d;
        let span = if w.is_finite() { (-(-d * w).exp_m1()).ln() } else { 0.0 };
        ub + span - d.ln()
    }
}

/// One draw with a fresh hull.
pub fn ars_sample<D: LogConcave, R: Rng + ?Sized>(density: D, lo: f64, hi: f64, init: &[f64], rng: &mut R) -> Result<f64> {
    Ars::new(density, lo, hi, init)?.sample(rng)
}
