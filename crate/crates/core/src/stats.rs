//! Goodness-of-fit helpers: Kolmogorov-Smirnov and chi-square tests, sample
//! moments and quantiles.

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// sup |F_n(x) − F(x)| against a continuous CDF.
pub fn ks_statistic_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(xs);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// sup |F_a(x) − F_b(x)| between two empirical CDFs.
pub fn ks_statistic_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic coefficient c(α) = sqrt(−ln(α/2) / 2) of the KS critical value.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Critical value of the one-sample statistic for sample size `n`.
pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Critical value of the two-sample statistic for sizes `n` and `m`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Survival function of the Kolmogorov distribution, P(K > x).
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected counts.
pub fn chi_square_test(observed: &[usize], expected: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum::<f64>();
    let dof = observed.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN);
    ChiSquareResult { statistic, dof, p_value }
}

/// Uniformity test for ranks in `0..=max_rank`, grouped into at most
/// `n_bins` bins. When the rank count does not divide evenly the bins are
/// unequal and their expected counts are weighted accordingly.
pub fn rank_uniformity_test(ranks: &[usize], max_rank: usize, n_bins: usize) -> (Vec<usize>, Vec<f64>, ChiSquareResult) {
    let n_values = max_rank + 1;
    let n_bins = n_bins.min(n_values).max(1);
    let bin_of = |r: usize| r * n_bins / n_values;
    let mut observed = vec![0usize; n_bins];
    for &r in ranks {
        observed[bin_of(r.min(max_rank))] += 1;
    }
    let mut width = vec![0usize; n_bins];
    for r in 0..n_values {
        width[bin_of(r)] += 1;
    }
    let total = ranks.len() as f64;
    let expected: Vec<f64> = width.iter().map(|&w| total * w as f64 / n_values as f64).collect();
    let result = chi_square_test(&observed, &expected);
    (observed, expected, result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_coefficient_matches_tables() {
        assert!((ks_coefficient(0.05) - 1.358).abs() < 1e-3);
        assert!((ks_coefficient(0.01) - 1.628).abs() < 1e-3);
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_statistic_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let d = ks_statistic_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5]);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_sample_ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn rank_bins_with_uneven_widths() {
        // 64 rank values into 20 bins: widths 3 or 4
        let ranks: Vec<usize> = (0..64).collect();
        let (obs, exp, res) = rank_uniformity_test(&ranks, 63, 20);
        assert_eq!(obs.iter().sum::<usize>(), 64);
        for (o, e) in obs.iter().zip(&exp) {
            assert!((*o as f64 - e).abs() < 1e-12);
        }
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.dof, 19);

        let spiked = vec![0usize; 300];
        let (_, _, res) = rank_uniformity_test(&spiked, 63, 20);
        assert!(res.p_value < 1e-10);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
    }
}
