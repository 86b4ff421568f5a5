//! Small descriptive statistics and the one-sample Kolmogorov–Smirnov test.

/// Median of an unsorted sample; `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Quantile by linear interpolation between order statistics: with the
/// sample sorted as `x_0 <= ... <= x_{n-1}`, `h = (n - 1) p` and the result is
/// `x_⌊h⌋ + (h - ⌊h⌋)(x_⌊h⌋+1 - x_⌊h⌋)`.
pub fn quantile_linear(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Sample mean and standard deviation (n − 1 denominator; zero for n = 1).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `sample` against the unit exponential distribution.
pub fn ks_test_exp1(sample: &[f64]) -> KsResult {
    ks_test(sample, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })
}

/// One-sample KS test against an arbitrary continuous CDF. The p-value uses
/// the asymptotic Kolmogorov distribution with Stephens' small-sample
/// correction `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    let n = sample.len();
    if n == 0 {
        return KsResult {
            statistic: f64::NAN,
            p_value: f64::NAN,
            n,
        };
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0_f64, f64::max);
    let sqrt_n = nf.sqrt();
    let p = kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    KsResult {
        statistic: d,
        p_value: p,
        n,
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev_term = 0.0_f64;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * 2.0 * (a2 * kf * kf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev_term.abs() || term.abs() <= 1e-16 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev_term = term;
    }
    // Series failed to converge (only for tiny λ, handled above).
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn quantiles_by_interpolation() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert!((quantile_linear(&v, 0.2).unwrap() - 1.8).abs() < 1e-12);
        assert!((quantile_linear(&v, 0.8).unwrap() - 4.2).abs() < 1e-12);
        assert_eq!(quantile_linear(&v, 0.0), Some(1.0));
        assert_eq!(quantile_linear(&v, 1.0), Some(5.0));
        assert_eq!(quantile_linear(&v, 1.5), None);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Critical values of the limiting distribution.
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_rejects_wrong_scale() {
        // Deterministic exponential quantiles: a perfect Exp(1) sample.
        let n = 200;
        let good: Vec<f64> = (0..n)
            .map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln())
            .collect();
        assert!(ks_test_exp1(&good).p_value > 0.5);
        let bad: Vec<f64> = good.iter().map(|x| x * 3.0).collect();
        assert!(ks_test_exp1(&bad).p_value < 1e-6);
    }
}
