//! Small statistics helpers: mean/stderr, medians, and weighted least
//! squares with per-point errors. Hand-rolled because the formulas are
//! three lines each and the fits must be reproducible bit-for-bit.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sample mean and its standard error (sample sd / sqrt(n)).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 1, "mean of an empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Median; even-length samples average the two central order statistics.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaNs in medians"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

/// Weighted least squares line fit y ~ intercept + slope * x with known
/// per-point standard deviations `sigma` (weights 1/sigma^2). Standard
/// errors come from the exact inverse normal matrix, not a residual
/// estimate, since the point errors are known.
pub fn wls_line(xs: &[f64], ys: &[f64], sigma: &[f64]) -> WlsFit {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), sigma.len());
    assert!(xs.len() >= 2, "line fit needs at least two points");
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut swxx = 0.0;
    let mut swxy = 0.0;
    for ((&x, &y), &s) in xs.iter().zip(ys).zip(sigma) {
        assert!(s > 0.0, "point errors must be positive");
        let w = 1.0 / (s * s);
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let delta = sw * swxx - swx * swx;
    assert!(delta > 0.0, "degenerate abscissae in line fit");
    WlsFit {
        slope: (sw * swxy - swx * swy) / delta,
        intercept: (swxx * swy - swx * swxy) / delta,
        slope_se: (sw / delta).sqrt(),
        intercept_se: (swxx / delta).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    #[test]
    fn mean_stderr_basics() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        // sample sd = sqrt(5/3), se = sd/2
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        let (_, se1) = mean_stderr(&[7.0]);
        assert_eq!(se1, 0.0);
    }

    #[test]
    fn wls_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let sigma = [0.1; 4];
        let fit = wls_line(&xs, &ys, &sigma);
        assert!((fit.slope - 2.5).abs() < 1e-12);
        assert!((fit.intercept + 1.0).abs() < 1e-12);
    }

    #[test]
    fn wls_weights_downweight_noisy_points() {
        // two tight points fix the line; one wild point with huge sigma
        // should barely move it
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 100.0];
        let sigma = [1e-3, 1e-3, 1e3];
        let fit = wls_line(&xs, &ys, &sigma);
        assert!((fit.slope - 1.0).abs() < 1e-3);
    }

    #[test]
    fn wls_slope_se_matches_hand_formula() {
        // equal sigmas: se(slope) = sigma / sqrt(sum (x - xbar)^2)
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 2.0, 2.0, 4.0, 5.0];
        let sigma = [0.5; 5];
        let fit = wls_line(&xs, &ys, &sigma);
        let expect = 0.5 / 10.0f64.sqrt();
        assert!((fit.slope_se - expect).abs() < 1e-12);
    }
}
