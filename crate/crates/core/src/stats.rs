//! Small Monte Carlo summary helpers.

/// Sample mean and the standard error of the mean, assuming i.i.d. values.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean and batch-means standard error for a correlated sequence (e.g. a
/// Markov chain). Falls back to the i.i.d. formula when there are too few
/// values to form `batches` batches of size at least two.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let batches = batches.max(2);
    let size = n / batches;
    if size < 2 {
        return mean_and_std_error(values);
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, se) = mean_and_std_error(&means);
    let mean = values.iter().sum::<f64>() / n as f64;
    (mean, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_error_of_constant_is_zero() {
        let (m, se) = mean_and_std_error(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn std_error_matches_hand_value() {
        // var = 1 (unbiased) for [0, 1, 2], se = sqrt(1/3)
        let (m, se) = mean_and_std_error(&[0.0, 1.0, 2.0]);
        assert!((m - 1.0).abs() < 1e-15);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn batch_means_falls_back_on_short_input() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(batch_means(&v, 10), mean_and_std_error(&v));
    }
}
