//! Derivative-free maximizers: Brent's golden-section/parabolic search in one
//! dimension and Nelder–Mead in several.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum1D {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maximizes `f` on `[lo, hi]` to absolute tolerance `tol` in `x`.
pub fn brent_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Optimum1D {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let eps = f64::EPSILON.sqrt();
    let mut neg = |x: f64| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = neg(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evals = 1;
    let mut converged = false;

    while evals < max_evals {
        let m = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.is_finite() && q.is_finite() && p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = neg(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Optimum1D { x, fx: -fx, evals, converged }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumND {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead maximization from `x0` with initial simplex offsets `step`.
///
/// Stops when the spread of objective values across the simplex is below
/// `ftol` and every vertex is within `xtol` of the best one.
pub fn nelder_mead_max(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    ftol: f64,
    xtol: f64,
    max_evals: usize,
) -> OptimumND {
    let n = x0.len();
    let mut neg = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| neg(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= ftol && size <= xtol {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };

        let xr = along(-1.0);
        let fr = neg(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = neg(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = neg(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = neg(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let p: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            values[i] = neg(&p);
            simplex[i] = p;
        }
        evals += n;
    }
    OptimumND { x: simplex[0].clone(), fx: -values[0], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_quadratic() {
        let r = brent_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-8, 200);
        assert!(r.converged);
        assert!((r.x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn brent_boundary_maximum() {
        let r = brent_max(|x| -x, 0.1, 1.0, 1e-6, 200);
        assert!((r.x - 0.1).abs() < 1e-5);
    }

    #[test]
    fn brent_handles_infinite_region() {
        let r = brent_max(|x| if x < 0.5 { f64::NEG_INFINITY } else { -(x - 0.7).powi(2) }, 0.0, 1.0, 1e-8, 300);
        assert!((r.x - 0.7).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = nelder_mead_max(f, &[-1.2, 1.0], &[0.5, 0.5], 1e-14, 1e-8, 5000);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }
}
