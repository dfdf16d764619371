use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostBounds {
    /// Upper bound on walk-sum operations.
    pub walk_sum: f64,
    /// Dense order-`K` Taylor cost `K · d^N`.
    pub taylor: f64,
}

/// Operation-count bounds for local dimension `d`, `n` atoms, at most `q`
/// excitations per configuration and `k` orders.
pub fn cost_bounds(d: usize, n: usize, q: usize, k: usize) -> CostBounds {
    let df = d as f64;
    let kf = k as f64;
    let ln_choose = ln_binomial(n as f64, q as f64);
    let ln_inner = (q as f64).ln() + ln_choose + q as f64 * (df - 1.0).ln();
    let ln_walk =
        -2.0 * df.ln() + (2.0 * kf * df.powi(3) + df * df).ln() + kf * ln_inner;
    CostBounds {
        walk_sum: ln_walk.exp(),
        taylor: kf * df.powf(n as f64),
    }
}

fn ln_binomial(n: f64, k: f64) -> f64 {
    if k < 0.0 || k > n {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    let mut i = 0.0;
    while i < k {
        acc += (n - i).ln() - (i + 1.0).ln();
        i += 1.0;
    }
    acc
}

/// Least-squares line through `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Fit `y = c · x^p` on log-log axes; `slope` is `p`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> LineFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// Fit `y = c · b^x` on semilog axes; `slope` is `ln b`.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> LineFit {
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(xs, &ly)
}
