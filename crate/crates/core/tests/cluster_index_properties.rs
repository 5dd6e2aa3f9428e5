mod common;

use common::{ci_oracle, gaussian, rotate_shift, rows};
use proptest::prelude::*;
use shc::cluster_index::{kmeans_two_ci, linkage_index, stronger_than, two_means_ci};
use shc::hclust::{agglomerate, node_split, ClusterAssignment, LinkageKind};
use shc::{CiValue, DataMatrix};

/// Minimum CI over all 2^(N-1) - 1 bipartitions.
fn exhaustive_min(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    (1u32..(1 << (n - 1)))
        .map(|mask| {
            // Point n-1 always sits in the second cluster, so each split is seen once.
            let first: Vec<bool> = (0..n).map(|i| i < n - 1 && mask & (1 << i) != 0).collect();
            ci_oracle(points, &first)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn kmeans_finds_the_exhaustive_minimum() {
    for case in 0..100u64 {
        let n = 2 + (case as usize % 7);
        let p = 1 + (case as usize % 3);
        let data = gaussian(n, p, 1000 + case);
        let (ci, assignment) = kmeans_two_ci(&data, 20, 100, case).unwrap();
        let best = exhaustive_min(&rows(&data));
        assert!((ci.value - best).abs() <= 1e-9, "case {case}: {} vs {best}", ci.value);
        let first: Vec<bool> = assignment.labels.iter().map(|&l| l == 0).collect();
        assert!((ci_oracle(&rows(&data), &first) - ci.value).abs() <= 1e-9);
    }
}

#[test]
fn separated_pairs_are_split() {
    let data = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]]).unwrap();
    let (ci, a) = kmeans_two_ci(&data, 10, 100, 3).unwrap();
    assert_eq!(a.labels[0], a.labels[1]);
    assert_eq!(a.labels[2], a.labels[3]);
    assert_ne!(a.labels[0], a.labels[2]);
    assert!((ci.value - exhaustive_min(&rows(&data))).abs() < 1e-12);
    assert!((ci.value - 1.0 / 101.0).abs() < 1e-12);
}

#[test]
fn kmeans_never_exceeds_the_ward_split() {
    for seed in 0..30 {
        let data = gaussian(25, 4, seed);
        let ward = agglomerate(&data, LinkageKind::Ward).unwrap();
        let (left, _) = node_split(&ward, ward.root()).unwrap();
        let ward_ci = two_means_ci(&data, &ClusterAssignment::from_split(25, &left).unwrap()).unwrap();
        let (ci, _) = kmeans_two_ci(&data, 0, 100, seed).unwrap();
        assert!(ci.value <= ward_ci.value + 1e-12);
    }
}

#[test]
fn two_points_have_zero_ci() {
    let data = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![4.0, -1.0]]).unwrap();
    assert_eq!(kmeans_two_ci(&data, 5, 100, 0).unwrap().0.value, 0.0);
}

#[test]
fn root_linkage_index_is_the_last_height() {
    for seed in 0..10 {
        let data = gaussian(12, 3, seed);
        let dend = agglomerate(&data, LinkageKind::Ward).unwrap();
        let idx = linkage_index(&dend, dend.root()).unwrap();
        assert_eq!(idx.value, dend.merges.last().unwrap().height);
        assert!(linkage_index(&dend, 0).is_err());
    }
}

#[test]
fn strength_comparison_is_strict_and_typed() {
    assert!(stronger_than(&CiValue::two_means(0.3), &CiValue::two_means(0.5)).unwrap());
    assert!(!stronger_than(&CiValue::linkage(10.0), &CiValue::linkage(12.0)).unwrap());
    assert!(!stronger_than(&CiValue::two_means(0.4), &CiValue::two_means(0.4)).unwrap());
    assert!(stronger_than(&CiValue::two_means(0.4), &CiValue::linkage(0.4)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ci_matches_sum_of_squares_oracle(seed in any::<u64>(), mask in 1u32..255) {
        let data = gaussian(8, 2, seed);
        let first: Vec<bool> = (0..8).map(|i| mask & (1 << i) != 0).collect();
        let labels: Vec<usize> = first.iter().map(|&f| if f { 0 } else { 1 }).collect();
        let ci = two_means_ci(&data, &ClusterAssignment::new(labels, 2).unwrap()).unwrap();
        prop_assert!((ci.value - ci_oracle(&rows(&data), &first)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ci.value));
    }

    #[test]
    fn more_restarts_never_hurt(seed in any::<u64>(), n in 6usize..40) {
        let data = gaussian(n, 3, seed);
        let mut last = f64::INFINITY;
        for restarts in [0, 1, 2, 5, 10, 20] {
            let (ci, _) = kmeans_two_ci(&data, restarts, 100, seed).unwrap();
            prop_assert!(ci.value <= last);
            last = ci.value;
        }
    }

    #[test]
    fn indices_are_rotation_and_translation_invariant(seed in any::<u64>(), n in 5usize..30) {
        let data = gaussian(n, 3, seed);
        let moved = rotate_shift(&data, seed.wrapping_mul(3));
        let (a, la) = kmeans_two_ci(&data, 10, 100, 7).unwrap();
        let (b, _) = kmeans_two_ci(&moved, 10, 100, 7).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9);
        let fixed = two_means_ci(&moved, &la).unwrap();
        prop_assert!((fixed.value - a.value).abs() <= 1e-9);
        let da = agglomerate(&data, LinkageKind::Ward).unwrap();
        let db = agglomerate(&moved, LinkageKind::Ward).unwrap();
        let (ha, hb) = (linkage_index(&da, da.root()).unwrap().value, linkage_index(&db, db.root()).unwrap().value);
        prop_assert!((ha - hb).abs() <= 1e-9 * ha.max(1.0));
    }
}
