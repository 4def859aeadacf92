use approx::assert_abs_diff_eq;
use matchdid::did::{
    group_means_did, paired_did, regression_did, MatchedPair, PanelDataset, PanelRecord,
};
use matchdid::matching::{
    apply_caliper, logistic_fit, optimal_match, optimal_match_sorted, rank_mahalanobis_distances,
    standardized_differences, CovariateSample, DistanceMatrix, PairAssignment,
};
use matchdid::stats::{
    cholesky_lower, rank_transform, std_normal_cdf, std_normal_quantile, student_t_cdf,
    student_t_quantile, RealMatrix,
};
use proptest::prelude::*;

fn brute_force_min(dist: &[Vec<f64>]) -> f64 {
    fn go(dist: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == dist.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(dist, row + 1, used, acc + dist[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(dist, 0, &mut vec![false; dist[0].len()], 0.0, &mut best);
    best
}

fn distance_rows(max_t: usize, max_c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_t, 0..=max_c).prop_flat_map(move |(n, extra)| {
        let m = (n + extra).min(max_c).max(n);
        prop::collection::vec(prop::collection::vec(0.0..50.0f64, m), n)
    })
}

/// Treated flags with at least `min` of each group.
fn flags(n: usize, min: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), n).prop_filter("both groups", move |f| {
        let t = f.iter().filter(|&&v| v).count();
        t >= min && f.len() - t >= min
    })
}

fn covariate_sample(n: usize, d: usize) -> impl Strategy<Value = CovariateSample> {
    (flags(n, 2), prop::collection::vec(-10.0..10.0f64, n * d)).prop_filter_map(
        "distinct, non-collinear ranks",
        move |(t, x)| {
            let m = RealMatrix::new(n, d, x).ok()?;
            let s = CovariateSample::from_matrix(t, m).ok()?;
            rank_mahalanobis_distances(&s).ok().map(|_| s)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normal_cdf_quantile_round_trip(p in 0.001..0.999f64) {
        let x = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(x).unwrap() - p).abs() < 1e-8);
    }

    #[test]
    fn normal_quantile_inverts_cdf(x in -3.0..3.0f64) {
        let p = std_normal_cdf(x).unwrap();
        prop_assert!((std_normal_quantile(p).unwrap() - x).abs() < 1e-8);
    }

    #[test]
    fn normal_cdf_monotone(a in -8.0..8.0f64, b in -8.0..8.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(std_normal_cdf(lo).unwrap() <= std_normal_cdf(hi).unwrap());
    }

    #[test]
    fn t_cdf_quantile_round_trip(p in 0.001..0.999f64, df in 1u32..200) {
        let q = student_t_quantile(p, df as f64).unwrap();
        prop_assert!((student_t_cdf(q, df as f64).unwrap() - p).abs() < 1e-8);
    }

    #[test]
    fn cholesky_reconstructs(a in prop::collection::vec(-2.0..2.0f64, 16), shift in 0.1..3.0f64) {
        // A A^T + shift I is symmetric positive definite.
        let a = RealMatrix::new(4, 4, a).unwrap();
        let mut spd = a.matmul(&a.transpose()).unwrap();
        for i in 0..4 {
            spd[(i, i)] += shift;
        }
        let l = cholesky_lower(&spd).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                prop_assert_eq!(l[(i, j)], 0.0);
            }
        }
        prop_assert!(l.matmul(&l.transpose()).unwrap().max_abs_diff(&spd) < 1e-10);
    }

    #[test]
    fn ranks_ignore_monotone_transforms(x in prop::collection::vec(-5.0..5.0f64, 1..30)) {
        let n = x.len();
        let a = RealMatrix::new(n, 1, x.clone()).unwrap();
        let b = RealMatrix::new(n, 1, x.iter().map(|v| v.exp()).collect()).unwrap();
        prop_assert_eq!(rank_transform(&a), rank_transform(&b));
    }

    #[test]
    fn rank_mahalanobis_monotone_invariance(s in covariate_sample(12, 3), col in 0usize..3) {
        let x = s.covariates();
        let mut cubed = x.clone();
        for i in 0..x.rows() {
            let v = x[(i, col)];
            cubed[(i, col)] = v * v * v + 2.0 * v;
        }
        let t = CovariateSample::from_matrix(s.treated().to_vec(), cubed).unwrap();
        let a = rank_mahalanobis_distances(&s).unwrap();
        let b = rank_mahalanobis_distances(&t).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn assignment_matches_enumeration(rows in distance_rows(6, 8)) {
        let a = optimal_match(&DistanceMatrix::from_rows(&rows).unwrap(), 1).unwrap();
        prop_assert!((a.total_distance - brute_force_min(&rows)).abs() < 1e-9);
        let mut used: Vec<usize> = a.pairs.iter().flat_map(|(_, c)| c.clone()).collect();
        used.sort();
        used.dedup();
        prop_assert_eq!(used.len(), rows.len());
    }

    #[test]
    fn control_permutation_keeps_total(rows in distance_rows(5, 7), seed in any::<u64>()) {
        let m = rows[0].len();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut s = seed;
        for i in (1..m).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let a = optimal_match(&DistanceMatrix::from_rows(&rows).unwrap(), 1).unwrap();
        let b = optimal_match(&DistanceMatrix::from_rows(&permuted).unwrap(), 1).unwrap();
        prop_assert!((a.total_distance - b.total_distance).abs() < 1e-9);
    }

    #[test]
    fn one_to_k_is_replicated_assignment(rows in distance_rows(3, 8), k in 1usize..3) {
        prop_assume!(rows[0].len() >= k * rows.len());
        let a = optimal_match(&DistanceMatrix::from_rows(&rows).unwrap(), k).unwrap();
        let replicated: Vec<Vec<f64>> = rows.iter().flat_map(|r| std::iter::repeat_n(r.clone(), k)).collect();
        prop_assert!((a.total_distance - brute_force_min(&replicated)).abs() < 1e-9);
        prop_assert!(a.pairs.iter().all(|(_, c)| c.len() == k));
    }

    #[test]
    fn sorted_solver_agrees_with_general(
        t in prop::collection::vec(-5.0..5.0f64, 1..12),
        c in prop::collection::vec(-5.0..5.0f64, 12..30),
    ) {
        let rows: Vec<Vec<f64>> = t.iter().map(|a| c.iter().map(|b| (a - b).abs()).collect()).collect();
        let general = optimal_match(&DistanceMatrix::from_rows(&rows).unwrap(), 1).unwrap();
        let sorted = optimal_match_sorted(&t, &c, 1, f64::abs).unwrap();
        prop_assert!((general.total_distance - sorted.total_distance).abs() < 1e-9);
    }

    #[test]
    fn caliper_never_decreases(s in covariate_sample(14, 2), scale in 1e-9..1e4f64) {
        let m = logistic_fit(&s).unwrap();
        let d = rank_mahalanobis_distances(&s).unwrap();
        let p = apply_caliper(&d, &m, scale).unwrap();
        for i in 0..d.n_treated() {
            for j in 0..d.n_control() {
                prop_assert!(p.get(i, j) >= d.get(i, j));
                if scale < 1e-8 {
                    prop_assert!(p.get(i, j) - d.get(i, j) < 1e-6);
                }
            }
        }
    }

    #[test]
    fn self_matched_clones_are_balanced(x in prop::collection::vec(-10.0..10.0f64, 4..20)) {
        // Treated rows followed by exact copies as controls.
        let n = x.len() / 2;
        let mut data = x[..n].to_vec();
        data.extend_from_slice(&x[..n]);
        data.extend_from_slice(&x[n..2 * n]);
        let t: Vec<bool> = (0..3 * n).map(|i| i < n).collect();
        let s = CovariateSample::from_matrix(t, RealMatrix::new(3 * n, 1, data).unwrap()).unwrap();
        let a = PairAssignment { pairs: (0..n).map(|i| (i, vec![i])).collect(), total_distance: 0.0, controls_per_treated: 1 };
        let b = standardized_differences(&s, Some(&a)).unwrap();
        if let Some(after) = b.rows[0].std_diff_after {
            prop_assert!(after.abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_score_equations(s in covariate_sample(40, 2)) {
        let m = logistic_fit(&s).unwrap();
        prop_assume!(!m.ridge_fallback);
        let p = m.fitted_probabilities();
        let x = s.covariates();
        let resid: Vec<f64> = s.treated().iter().zip(&p).map(|(&t, &pi)| f64::from(u8::from(t)) - pi).collect();
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-6);
        for j in 0..x.cols() {
            let g: f64 = (0..x.rows()).map(|i| resid[i] * x[(i, j)]).sum();
            prop_assert!(g.abs() < 1e-6, "column {} score {}", j, g);
        }
    }
}

fn pair_strategy() -> impl Strategy<Value = Vec<MatchedPair>> {
    prop::collection::vec(prop::array::uniform4(-100.0..100.0f64), 2..40).prop_map(|v| {
        v.into_iter()
            .map(|[a, b, c, d]| MatchedPair {
                treated_after: a,
                treated_before: b,
                control_after: c,
                control_before: d,
            })
            .collect()
    })
}

fn panel_from(pre: &[f64], post: &[f64], treated: &[bool]) -> PanelDataset {
    let mut recs = Vec::new();
    for i in 0..pre.len() {
        for (period, y) in [(0, pre[i]), (1, post[i])] {
            recs.push(PanelRecord {
                unit_id: format!("u{i}"),
                group: treated[i],
                period,
                outcome: y,
            });
        }
    }
    PanelDataset::new(recs).unwrap()
}

fn group_mean(values: &[f64], treated: &[bool], group: bool) -> f64 {
    let v: Vec<f64> = values
        .iter()
        .zip(treated)
        .filter(|(_, &t)| t == group)
        .map(|(&y, _)| y)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn paired_equals_group_means(pairs in pair_strategy()) {
        let e = paired_did(&pairs, 0.05).unwrap();
        let n = pairs.len() as f64;
        let m = |f: fn(&MatchedPair) -> f64| pairs.iter().map(f).sum::<f64>() / n;
        let g = group_means_did(
            m(|p| p.treated_after), m(|p| p.treated_before), m(|p| p.control_after), m(|p| p.control_before),
        );
        prop_assert!((e.point - g).abs() < 1e-10);
    }

    #[test]
    fn paired_shift_and_scale(pairs in pair_strategy(), c in -50.0..50.0f64, lambda in 0.1..10.0f64) {
        let e = paired_did(&pairs, 0.05).unwrap();
        let shifted: Vec<MatchedPair> = pairs.iter().map(|p| MatchedPair {
            treated_after: p.treated_after + c, treated_before: p.treated_before,
            control_after: p.control_after + c, control_before: p.control_before,
        }).collect();
        prop_assert!((paired_did(&shifted, 0.05).unwrap().point - e.point).abs() < 1e-9);
        let scaled: Vec<MatchedPair> = pairs.iter().map(|p| MatchedPair {
            treated_after: lambda * p.treated_after, treated_before: lambda * p.treated_before,
            control_after: lambda * p.control_after, control_before: lambda * p.control_before,
        }).collect();
        let s = paired_did(&scaled, 0.05).unwrap();
        prop_assert!((s.point - lambda * e.point).abs() < 1e-8 * (1.0 + e.point.abs() * lambda));
        prop_assert!((s.se - lambda * e.se).abs() < 1e-8 * (1.0 + e.se * lambda));
        prop_assert!((s.ci_low - lambda * e.ci_low).abs() < 1e-7 * (1.0 + e.ci_low.abs() * lambda));
        prop_assert!((s.ci_high - lambda * e.ci_high).abs() < 1e-7 * (1.0 + e.ci_high.abs() * lambda));
    }

    #[test]
    fn regression_equals_group_means_on_balanced_panel(
        t in flags(12, 2),
        ys in prop::collection::vec(-100.0..100.0f64, 24),
        c in -50.0..50.0f64,
    ) {
        let (pre, post) = ys.split_at(12);
        let e = regression_did(&panel_from(pre, post, &t), 0.05).unwrap();
        let g = group_means_did(
            group_mean(post, &t, true), group_mean(pre, &t, true),
            group_mean(post, &t, false), group_mean(pre, &t, false),
        );
        prop_assert!((e.point - g).abs() < 1e-10);
        prop_assert_eq!(e.df, 10);
        // Shocks common to every unit cancel.
        let pre_c: Vec<f64> = pre.iter().map(|y| y + c).collect();
        let post_c: Vec<f64> = post.iter().map(|y| y + 2.0 * c).collect();
        let shifted = regression_did(&panel_from(&pre_c, &post_c, &t), 0.05).unwrap();
        prop_assert!((shifted.point - e.point).abs() < 1e-9);
        prop_assert!((shifted.se - e.se).abs() < 1e-9);
    }
}

#[test]
fn four_cell_panel_matches_published_estimate() {
    let e = regression_did(
        &panel_from(
            &[1141.0, 1141.0, 1022.0, 1022.0],
            &[1134.0, 1134.0, 921.0, 921.0],
            &[true, true, false, false],
        ),
        0.05,
    )
    .unwrap();
    assert_abs_diff_eq!(e.point, 94.0, epsilon = 1e-9);
    assert!(e.se < 1e-9);
}
