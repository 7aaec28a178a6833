//! Small statistics toolkit: moments, least squares and bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the mean for i.i.d. samples.
pub fn std_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Standard error of the mean of a correlated series from non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
    std_error(&means)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n: usize,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if n > 2 { (rss / (n as f64 - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, slope_se, n }
}

/// Slope standard error by resampling the residuals of the least-squares fit.
pub fn residual_bootstrap_slope_se(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> f64 {
    let fit = linear_fit(x, y);
    let fitted: Vec<f64> = x.iter().map(|a| fit.intercept + fit.slope * a).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(b, f)| b - f).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes: Vec<f64> = (0..resamples)
        .map(|_| {
            let yb: Vec<f64> = fitted.iter().map(|f| f + resid[rng.random_range(0..resid.len())]).collect();
            linear_fit(x, &yb).slope
        })
        .collect();
    variance(&slopes).sqrt()
}

/// 95% percentile interval for the mean of a correlated series by the moving-block bootstrap.
pub fn block_bootstrap_ci(x: &[f64], block: usize, resamples: usize, seed: u64) -> (f64, f64) {
    let n = x.len();
    let block = block.clamp(1, n);
    let starts = n - block + 1;
    let blocks_needed = n.div_ceil(block);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            let mut count = 0;
            for _ in 0..blocks_needed {
                let st = rng.random_range(0..starts);
                for v in &x[st..st + block] {
                    if count < n {
                        s += v;
                        count += 1;
                    }
                }
            }
            s / count as f64
        })
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (q(0.025), q(0.975))
}

/// Block length from the integrated autocorrelation time, at least `n^{1/3}`.
pub fn block_length(x: &[f64]) -> usize {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1;
    }
    let mut tau = 1.0;
    for lag in 1..n / 4 {
        let c: f64 = (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64;
        let r = c / c0;
        if r <= 0.05 {
            break;
        }
        tau += 2.0 * r;
    }
    (2.0 * tau).ceil().max((n as f64).cbrt().ceil()) as usize
}

/// Histogram on fixed bin edges, normalized to probabilities.
pub fn histogram(x: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in x {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor();
        let b = (b.max(0.0) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    h.iter_mut().for_each(|c| *c /= x.len() as f64);
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-12);
        assert!(residual_bootstrap_slope_se(&x, &y, 50, 1) < 1e-12);
    }

    #[test]
    fn bootstrap_interval_covers_the_mean_of_a_constant() {
        let x = vec![2.0; 100];
        assert_eq!(block_bootstrap_ci(&x, 5, 100, 0), (2.0, 2.0));
        assert_eq!(block_length(&x), 1);
    }

    #[test]
    fn histogram_sums_to_one() {
        let h = histogram(&[0.1, 0.5, 0.9, 2.0, -1.0], 0.0, 1.0, 4);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(h[0], 0.4);
    }
}
