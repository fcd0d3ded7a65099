//! Small statistics helpers for the experiment harness.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("ConstantInput: Pearson correlation undefined for a constant vector")]
    ConstantInput,
    #[error("LengthMismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("TooFewPoints: need at least 2")]
    TooFewPoints,
}

/// Sample Pearson correlation coefficient, clamped into [-1, 1] against
/// floating-point overshoot.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Normal-approximation 95% interval: (mean, 1.96 * sd / sqrt(n)) with the
/// sample standard deviation.
pub fn confidence95(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var =
        values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    (m, 1.96 * (var / values.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_correlate_perfectly() {
        let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_vector_anticorrelates() {
        let r = pearson_r(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_value() {
        // xs=(1,2,3,4), ys=(2,1,4,3): means 2.5, sxy = 2, sxx = syy = 5,
        // so r = 2/5 + ... worked through the definition r = 0.6.
        let r = pearson_r(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let xs = [0.3, -1.2, 2.2, 0.9, -0.5];
        let ys = [1.1, 0.4, -0.6, 2.0, 0.1];
        assert_eq!(
            pearson_r(&xs, &ys).unwrap().to_bits(),
            pearson_r(&ys, &xs).unwrap().to_bits()
        );
    }

    #[test]
    fn constant_input_is_an_error() {
        assert_eq!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err(),
            StatsError::ConstantInput
        );
    }

    #[test]
    fn matches_straight_line_recomputation() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 17) as f64 * 0.3 - 2.0).collect();
        let ys: Vec<f64> = (0..50).map(|i| ((i * 23) % 11) as f64 * 0.7 + 1.0).collect();
        let r = pearson_r(&xs, &ys).unwrap();
        // Definition-level recomputation.
        let n = xs.len() as f64;
        let mx: f64 = xs.iter().sum::<f64>() / n;
        let my: f64 = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let sx = (xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n).sqrt();
        let sy = (ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n).sqrt();
        assert!((r - cov / (sx * sy)).abs() < 1e-12);
    }

    #[test]
    fn confidence_interval_shrinks_with_more_data() {
        let few: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let many: Vec<f64> = (0..1000).map(|i| (i % 3) as f64).collect();
        assert!(confidence95(&many).1 < confidence95(&few).1);
    }
}
