use std::collections::BTreeMap;

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items. Identical
/// partitions score 1 regardless of label names.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both labelings are trivial (all one cluster or all singletons).
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabeled_partition_scores_one() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1, 2], &[2, 2, 0, 0, 1]), 1.0);
    }

    #[test]
    fn hand_value() {
        // Contingency [[2,1],[0,2]]: index 1+0+0+1 = 2, rows 3+1 = 4 (3C2=3, 2C2=1),
        // cols 2C2 + 3C2 = 1 + 3 = 4, total 10; expected 1.6, max 4.
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]);
        assert!((ari - (2.0 - 1.6) / (4.0 - 1.6)).abs() < 1e-12);
    }

    #[test]
    fn independent_labelings_near_zero() {
        let a: Vec<usize> = (0..400).map(|i| i % 2).collect();
        let b: Vec<usize> = (0..400).map(|i| (i / 2) % 2).collect();
        assert!(adjusted_rand_index(&a, &b).abs() < 0.01);
    }
}
