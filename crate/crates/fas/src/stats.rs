//! Small statistics helpers used by evaluation code and tests.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by n).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    mean(&xs.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
}

/// Excess kurtosis: fourth standardized moment minus 3. Zero for a Gaussian,
/// positive for heavy-tailed distributions.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in xs {
        let d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    m4 / (m2 * m2) - 3.0
}

/// Total variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kurtosis_of_uniform_is_negative() {
        let xs: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        let k = excess_kurtosis(&xs);
        assert!((k - (-1.2)).abs() < 0.05, "kurtosis {k}");
    }

    #[test]
    fn kurtosis_of_two_sided_spike_mix_is_positive() {
        // Mostly tiny values with rare large ones: heavy-tailed.
        let mut xs = vec![0.01; 990];
        xs.extend(vec![5.0; 5]);
        xs.extend(vec![-5.0; 5]);
        assert!(excess_kurtosis(&xs) > 10.0);
    }

    #[test]
    fn tv_identical_and_disjoint() {
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert!((total_variation(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
