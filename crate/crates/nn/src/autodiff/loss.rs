//! Loss terms evaluated in `f64` on embedding rows.

/// Numerically stable softmax (the row maximum is subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy of `logits` against class `target`, with its
/// gradient `softmax(logits) - onehot(target)`.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    (log_sum - logits[target], grad)
}

/// Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Contrastive loss `d^2` (similar) or `max(0, margin - d)^2` (dissimilar)
/// and its gradient with respect to `a`; the gradient for `b` is the negation.
/// At `d = 0` the dissimilar gradient direction is undefined and taken as zero.
pub fn contrastive(a: &[f64], b: &[f64], similar: bool, margin: f64) -> (f64, Vec<f64>) {
    let d = distance(a, b);
    if similar {
        let grad = a.iter().zip(b).map(|(x, y)| 2.0 * (x - y)).collect();
        (d * d, grad)
    } else if d >= margin {
        (0.0, vec![0.0; a.len()])
    } else {
        let gap = margin - d;
        let scale = if d > 0.0 { -2.0 * gap / d } else { 0.0 };
        let grad = a.iter().zip(b).map(|(x, y)| scale * (x - y)).collect();
        (gap * gap, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_two_class_example() {
        let p = softmax(&[3.0, 1.0]);
        let e3 = 3f64.exp();
        let e1 = 1f64.exp();
        assert!((p[0] - e3 / (e3 + e1)).abs() < 1e-12);
        assert!((p[0] - 0.8808).abs() < 1e-4 && (p[1] - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn softmax_large_logits_stay_finite() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_matches_differences() {
        let z = [0.3, -1.2, 2.0, 0.1];
        let (_, g) = cross_entropy(&z, 2);
        for i in 0..z.len() {
            let mut up = z;
            let mut dn = z;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (cross_entropy(&up, 2).0 - cross_entropy(&dn, 2).0) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn contrastive_zero_cases() {
        let a = [0.5, -0.25];
        assert_eq!(contrastive(&a, &a, true, 1.0).0, 0.0);
        assert_eq!(contrastive(&[0.0, 0.0], &[3.0, 4.0], false, 1.0), (0.0, vec![0.0, 0.0]));
        let (l, g) = contrastive(&a, &a, false, 1.0);
        assert_eq!(l, 1.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn contrastive_is_symmetric() {
        let a = [0.1, 0.2, -0.3];
        let b = [0.0, 0.5, 0.1];
        for similar in [true, false] {
            assert_eq!(contrastive(&a, &b, similar, 1.0).0, contrastive(&b, &a, similar, 1.0).0);
        }
    }
}
