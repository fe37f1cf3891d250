//! Entropy and Jensen-Shannon measures in bits.

use std::collections::BTreeMap;

/// Counts scaled to a probability vector over the union of keys.
pub fn normalize_counts<K: Ord + Clone>(counts: &BTreeMap<K, f64>) -> BTreeMap<K, f64> {
    let total: f64 = counts.values().sum();
    counts
        .iter()
        .map(|(k, v)| (k.clone(), if total > 0.0 { v / total } else { 0.0 }))
        .collect()
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

fn kl_bits(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).log2())
        .sum()
}

/// Jensen-Shannon divergence in bits, in `[0, 1]`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl_bits(p, &m) + 0.5 * kl_bits(q, &m)).clamp(0.0, 1.0)
}

/// Jensen-Shannon distance: square root of the divergence.
pub fn js_distance(p: &[f64], q: &[f64]) -> f64 {
    js_divergence(p, q).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_masses() {
        assert_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(js_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert!((entropy_bits(&[0.25; 4]) - 2.0).abs() < 1e-15);
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0f64, n).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-9).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn jsd_properties((p, q) in (2usize..8).prop_flat_map(|n| (dist(n), dist(n)))) {
            let a = js_divergence(&p, &q);
            let b = js_divergence(&q, &p);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(js_divergence(&p, &p).abs() < 1e-12);
            if p.iter().zip(&q).any(|(x, y)| (x - y).abs() > 1e-6) {
                prop_assert!(a > 0.0);
            }
        }
    }
}
