use crate::error::{Error, Result};

const SAMPLES: usize = 300;

/// Parameters of the low-dimensional similarity `1 / (1 + a d^(2b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    pub rmse: f64,
}

impl CurveFit {
    pub fn eval(&self, d: f64) -> f64 {
        curve(self.a, self.b, d)
    }
}

fn curve(a: f64, b: f64, d: f64) -> f64 {
    if d <= 0.0 {
        1.0
    } else {
        1.0 / (1.0 + a * d.powf(2.0 * b))
    }
}

fn target(d: f64, min_dist: f64, spread: f64) -> f64 {
    if d < min_dist {
        1.0
    } else {
        (-(d - min_dist) / spread).exp()
    }
}

fn sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (curve(a, b, x) - y).powi(2))
        .sum()
}

/// Least-squares fit of the curve to the target profile over 300 evenly
/// spaced samples of `[0, 3 spread]`, by Levenberg-Marquardt in `(ln a, ln b)`.
pub fn fit_curve(min_dist: f64, spread: f64) -> Result<CurveFit> {
    if !(spread > 0.0) || !(min_dist >= 0.0) || min_dist >= 3.0 * spread {
        return Err(Error::Parameter(format!(
            "curve fit needs spread > 0 and 0 <= min_dist < 3 spread, got min_dist={min_dist}, spread={spread}"
        )));
    }
    let xs: Vec<f64> = (0..SAMPLES)
        .map(|i| 3.0 * spread * i as f64 / (SAMPLES - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| target(x, min_dist, spread)).collect();

    let (mut p, mut q) = (0.0f64, 0.0f64); // ln a, ln b
    let mut lambda = 1e-3;
    let mut cost = sse(&xs, &ys, p.exp(), q.exp());
    let mut converged = false;
    for _ in 0..500 {
        let (a, b) = (p.exp(), q.exp());
        // J^T J and J^T r for residual r = f - y
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x <= 0.0 {
                continue;
            }
            let t = x.powf(2.0 * b);
            let f = 1.0 / (1.0 + a * t);
            let df_dp = -f * f * a * t;
            let df_dq = -f * f * a * t * 2.0 * b * x.ln();
            let g = [df_dp, df_dq];
            for r in 0..2 {
                jtr[r] += g[r] * (f - y);
                for c in 0..2 {
                    jtj[r][c] += g[r] * g[c];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let m = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let dp = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
            let dq = -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
            let next = sse(&xs, &ys, (p + dp).exp(), (q + dq).exp());
            if next.is_finite() && next <= cost {
                let gain = cost - next;
                p += dp;
                q += dq;
                cost = next;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if gain <= 1e-15 * cost.max(1e-300) || (dp.abs() < 1e-12 && dq.abs() < 1e-12) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
        }
        if converged {
            break;
        }
    }
    let (a, b) = (p.exp(), q.exp());
    let rmse = (cost / SAMPLES as f64).sqrt();
    if !converged || !a.is_finite() || !b.is_finite() || !rmse.is_finite() {
        return Err(Error::Convergence(format!(
            "curve fit for min_dist={min_dist}, spread={spread} did not converge (a={a}, b={b}, rmse={rmse})"
        )));
    }
    Ok(CurveFit { a, b, rmse })
}
