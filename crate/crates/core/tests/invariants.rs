//! Property tests for the structural invariants: enumeration order and
//! counts, rank round trips, shell symmetry, and the phase partition.

use proptest::prelude::*;

use fanova_select::combinatorics::{
    binomial, enumerate_frequencies, enumerate_subsets, smoothness_coefficient, Frequency, Subset,
};
use fanova_select::risk::{exact_boundary, hamming_sorted, phase_classify, PhaseRegion};

proptest! {
    #[test]
    fn subset_rank_round_trips(d in 1u32..28, seed in any::<u64>()) {
        let k = 1 + (seed % u64::from(d)) as usize;
        let total = binomial(u64::from(d), k as u64);
        let rank = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) % total;
        let u = Subset::from_rank(d, k, rank);
        prop_assert_eq!(u.rank(d), rank);
        prop_assert_eq!(u.cardinality(), k);
        prop_assert!(u.coords().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subset_stream_count_and_order(d in 1u32..16, k_off in 0u32..15) {
        let k = 1 + (k_off % d) as usize;
        let mut count = 0u64;
        let mut prev: Option<Subset> = None;
        for u in enumerate_subsets(d, k).unwrap() {
            if let Some(p) = &prev {
                prop_assert!(p < &u, "not lexicographic at {p} vs {u}");
            }
            prop_assert_eq!(u.rank(d), count);
            prev = Some(u);
            count += 1;
        }
        prop_assert_eq!(count, binomial(u64::from(d), k as u64));
    }

    #[test]
    fn frequency_enumeration_counts_match_brute_force(k in 1usize..4, radius in 0.5f64..8.0) {
        let fast = enumerate_frequencies(k, radius).unwrap();
        // brute force over the integer box
        let bound = radius.ceil() as i64 + 1;
        let mut brute = 0usize;
        let mut stack = vec![(0usize, 0f64)];
        // depth-first count without materializing vectors
        fn count(depth: usize, norm: f64, k: usize, bound: i64, r_sq: f64) -> usize {
            if depth == k {
                return usize::from(norm < r_sq);
            }
            let mut total = 0;
            for l in -bound..=bound {
                if l != 0 {
                    total += count(depth + 1, norm + (l * l) as f64, k, bound, r_sq);
                }
            }
            total
        }
        stack.clear();
        brute += count(0, 0.0, k, bound, radius * radius);
        prop_assert_eq!(fast.len(), brute);
        for f in &fast {
            prop_assert!((f.norm_sq() as f64) < radius * radius);
            prop_assert!(f.norm_sq() >= k as u64);
        }
    }

    #[test]
    fn smoothness_is_orbit_invariant(
        entries in prop::collection::vec(-40i32..40, 1..5),
        sigma in 0.3f64..3.0,
        seed in any::<u64>(),
    ) {
        let entries: Vec<i32> = entries.into_iter().map(|l| if l == 0 { 1 } else { l }).collect();
        let f = Frequency::new(entries.clone()).unwrap();
        // permute and flip signs deterministically from the seed
        let mut permuted = entries;
        let n = permuted.len();
        for i in 0..n {
            let j = i + (seed as usize + i) % (n - i);
            permuted.swap(i, j);
            if (seed >> i) & 1 == 1 {
                permuted[i] = -permuted[i];
            }
        }
        let g = Frequency::new(permuted).unwrap();
        let a = smoothness_coefficient(&f, sigma);
        let b = smoothness_coefficient(&g, sigma);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn phase_partition_is_exhaustive_and_exclusive(beta in 1e-6f64..0.999999, gamma in 1e-6f64..6.0) {
        let region = phase_classify(beta, gamma).unwrap();
        let expected = if gamma == beta {
            PhaseRegion::AlmostFullBoundary
        } else if gamma == exact_boundary(beta) {
            PhaseRegion::ExactBoundary
        } else if gamma > exact_boundary(beta) {
            PhaseRegion::Exact
        } else if gamma > beta {
            PhaseRegion::AlmostFull
        } else {
            PhaseRegion::NoSelection
        };
        prop_assert_eq!(region, expected);
    }

    #[test]
    fn hamming_sorted_is_a_metric_on_sets(
        a in prop::collection::btree_set(0u64..40, 0..12),
        b in prop::collection::btree_set(0u64..40, 0..12),
        c in prop::collection::btree_set(0u64..40, 0..12),
    ) {
        let av: Vec<u64> = a.iter().copied().collect();
        let bv: Vec<u64> = b.iter().copied().collect();
        let cv: Vec<u64> = c.iter().copied().collect();
        let dab = hamming_sorted(&av, &bv);
        prop_assert_eq!(dab, hamming_sorted(&bv, &av));
        prop_assert_eq!(hamming_sorted(&av, &av), 0);
        prop_assert_eq!(dab, a.symmetric_difference(&b).count() as u64);
        // triangle inequality
        prop_assert!(dab <= hamming_sorted(&av, &cv) + hamming_sorted(&cv, &bv));
    }
}
