/// Mean over components of squared differences.
pub fn mse_loss(pred: &[f32], label: &[f32]) -> f64 {
    assert_eq!(
        pred.len(),
        label.len(),
        "prediction and label lengths differ"
    );
    assert!(!pred.is_empty());
    pred.iter()
        .zip(label)
        .map(|(&p, &y)| {
            let d = p as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / pred.len() as f64
}

/// d mse / d pred.
pub fn mse_grad(pred: &[f32], label: &[f32]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter()
        .zip(label)
        .map(|(&p, &y)| 2.0 * (p as f64 - y as f64) / n)
        .collect()
}

/// Loss terms of one batch. `combined` is `w0 * prediction + w1 * constraint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub prediction: f64,
    pub constraint: f64,
    pub combined: f64,
}

impl LossBreakdown {
    pub fn new(prediction: f64, constraint: f64, weights: [f64; 2]) -> Self {
        Self {
            prediction,
            constraint,
            combined: weights[0] * prediction + weights[1] * constraint,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(mse_loss(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 0.0]), 0.5);
        let v = mse_loss(&[0.3, -0.4], &[0.1, 0.2]);
        assert!((v - 0.20).abs() < 1e-7, "{v}");
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let (p, y) = ([0.3f32, -0.4], [0.1f32, 0.2]);
        let g = mse_grad(&p, &y);
        for i in 0..2 {
            let h = 1e-3f32;
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (mse_loss(&a, &y) - mse_loss(&b, &y)) / (a[i] as f64 - b[i] as f64);
            assert!((fd - g[i]).abs() < 1e-5, "{fd} {}", g[i]);
        }
    }

    #[test]
    fn combined_weighting() {
        let l = LossBreakdown::new(0.5, 0.25, [1.5, 0.5]);
        assert_eq!(l.combined, 0.875);
    }
}
