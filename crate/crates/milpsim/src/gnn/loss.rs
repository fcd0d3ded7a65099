//! Triplet hinge loss over squared Euclidean distances.

use super::model::Embedding;

/// Squared Euclidean distance between two embeddings.
pub fn squared_distance(a: &Embedding, b: &Embedding) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// `max(0, ||a-p||^2 - ||a-n||^2 + alpha)`: zero exactly when the
/// anchor-negative squared distance exceeds the anchor-positive one by at
/// least the margin.
pub fn triplet_loss(ea: &Embedding, ep: &Embedding, en: &Embedding, alpha: f64) -> f64 {
    debug_assert!(alpha >= 0.0);
    (squared_distance(ea, ep) - squared_distance(ea, en) + alpha).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_embeddings_leave_the_margin() {
        let e = vec![1.0, -2.0, 0.5];
        assert_eq!(triplet_loss(&e, &e, &e, 0.1), 0.1);
    }

    #[test]
    fn satisfied_margin_gives_zero() {
        let a = vec![0.0, 0.0];
        let p = vec![0.0, 0.0];
        let n = vec![1.0, 0.0]; // d_an^2 = 1 >= alpha
        assert_eq!(triplet_loss(&a, &p, &n, 0.1), 0.0);
    }

    #[test]
    fn active_hinge_arithmetic() {
        // d_ap = 0.5, d_an = 0.2: 0.25 - 0.04 + 0.1 = 0.31.
        let a = vec![0.0];
        let p = vec![0.5];
        let n = vec![0.2];
        assert!((triplet_loss(&a, &p, &n, 0.1) - 0.31).abs() < 1e-15);
    }

    #[test]
    fn loss_is_never_negative() {
        for i in 0..100 {
            let t = i as f64 * 0.37;
            let a = vec![t.sin(), t.cos()];
            let p = vec![(t * 2.0).sin(), (t * 2.0).cos()];
            let n = vec![(t * 3.0).sin(), (t * 3.0).cos()];
            assert!(triplet_loss(&a, &p, &n, 0.1) >= 0.0);
        }
    }
}
