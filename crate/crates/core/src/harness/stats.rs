//! Sample statistics used by the experiment reports.

/// Number of points on every reported CDF grid.
pub const CDF_POINTS: usize = 200;

/// Sample mean and standard error `s / sqrt(n)`; the error is 0 for a
/// single sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical CDF on `CDF_POINTS` equally spaced points spanning the
/// observed range. The last point is always 1.
pub fn cdf_grid(xs: &[f64]) -> Vec<[f64; 2]> {
    if xs.is_empty() {
        return Vec::new();
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let n = sorted.len() as f64;
    (0..CDF_POINTS)
        .map(|i| {
            let x = if i + 1 == CDF_POINTS { hi } else { lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64 };
            let count = sorted.partition_point(|&s| s <= x);
            [x, count as f64 / n]
        })
        .collect()
}

/// Least-squares slope of `log2 y` against `x`; `None` with fewer than two
/// points or a nonpositive `y`.
pub fn log2_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_se_small() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // s^2 = 5/3
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x = [4.0, 6.0, 8.0, 10.0];
        let y: Vec<f64> = x.iter().map(|b: &f64| 3.0 * (-b / 2.0).exp2()).collect();
        assert!((log2_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(log2_slope(&[4.0], &[1.0]), None);
    }

    #[test]
    fn constant_sample_cdf() {
        let g = cdf_grid(&[2.0, 2.0]);
        assert_eq!(g.len(), CDF_POINTS);
        assert!(g.iter().all(|p| p == &[2.0, 1.0]));
    }

    proptest! {
        #[test]
        fn cdf_monotone_to_one(xs in prop::collection::vec(-10.0f64..10.0, 1..60)) {
            let g = cdf_grid(&xs);
            prop_assert_eq!(g.len(), CDF_POINTS);
            for w in g.windows(2) {
                prop_assert!(w[0][0] <= w[1][0]);
                prop_assert!(w[0][1] <= w[1][1]);
            }
            prop_assert!(g[0][1] > 0.0);
            prop_assert_eq!(g[CDF_POINTS - 1][1], 1.0);
        }
    }
}
