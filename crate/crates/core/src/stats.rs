//! Sample statistics used by the diagnostics and the sweep aggregates.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Central moments `(m2, m3, m4)` with the `1/n` normalization.
pub fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = x.len() as f64;
    (m2 / n, m3 / n, m4 / n)
}

/// `m4 / m2² - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(x);
    m4 / (m2 * m2) - 3.0
}

pub fn skewness(x: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(x);
    m3 / m2.powf(1.5)
}

/// Pearson correlation; zero when either input is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}
