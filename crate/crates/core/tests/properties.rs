use matboost::baselines::{score_hcn, score_hkatz, score_random, KatzConfig};
use matboost::boost::{ensemble_average, iterate_fixed_point, run_matboost, MatBoostConfig, StopReason};
use matboost::eval::{auc, generate_negative_pool, generate_synthetic, make_split, recovered_number};
use matboost::hypermatrix::{decompose, mask_off, mask_on, project, AdjacencyMatrix, IncidenceMatrix};
use matboost::matching::{rank_candidates, MatchConfig, MatchingProblem, ScoreVector};
use proptest::prelude::*;

fn incidence(max_vertices: usize, max_columns: usize) -> impl Strategy<Value = IncidenceMatrix> {
    (1..=max_vertices).prop_flat_map(move |m| {
        prop::collection::vec(prop::collection::btree_set(0..m, 1..=m), 0..=max_columns).prop_map(
            move |cols| IncidenceMatrix::new(m, cols.into_iter().map(|c| c.into_iter().collect()).collect()).unwrap(),
        )
    })
}

fn adjacency(m: usize) -> impl Strategy<Value = AdjacencyMatrix> {
    prop::collection::vec((0..m, 0..m, -4i32..=4), 0..3 * m).prop_map(move |t| {
        let triplets: Vec<_> = t.into_iter().map(|(i, j, v)| (i, j, f64::from(v) * 0.5)).collect();
        AdjacencyMatrix::from_triplets(m, &triplets).unwrap()
    })
}

fn adjacency_pair(max: usize) -> impl Strategy<Value = (AdjacencyMatrix, AdjacencyMatrix)> {
    (1..=max).prop_flat_map(|m| (adjacency(m), adjacency(m)))
}

fn dense_product(s: &IncidenceMatrix) -> Vec<Vec<f64>> {
    let d = s.to_dense();
    let m = s.num_vertices();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            out[i][j] = (0..s.num_columns()).map(|c| d[i][c] * d[j][c]).sum();
        }
    }
    out
}

fn is_symmetric(x: &AdjacencyMatrix) -> bool {
    let d = x.to_dense();
    (0..d.len()).all(|i| (0..d.len()).all(|j| d[i][j] == d[j][i]))
}

proptest! {
    #[test]
    fn mask_partition((x, a) in adjacency_pair(15)) {
        let on = mask_on(&x, &a).unwrap();
        let off = mask_off(&x, &a).unwrap();
        prop_assert_eq!(on.add(&off).unwrap(), x);
        for (i, j, _) in on.iter() {
            prop_assert!(a.is_nonempty(i, j) && !off.is_nonempty(i, j));
        }
        prop_assert!(is_symmetric(&on) && is_symmetric(&off));
    }

    #[test]
    fn decomposition_sum_and_support((a, delta) in adjacency_pair(15)) {
        let (plus, minus) = decompose(&a, &delta).unwrap();
        prop_assert_eq!(plus.add(&minus).unwrap(), a.add(&delta).unwrap());
        for (i, j, _) in minus.iter() {
            prop_assert!(!a.is_nonempty(i, j));
        }
        prop_assert!(is_symmetric(&plus) && is_symmetric(&minus));
    }

    #[test]
    fn projection_matches_dense_product(s in incidence(20, 12)) {
        prop_assert_eq!(project(&s).to_dense(), dense_product(&s));
    }

    #[test]
    fn auc_invariant_under_increasing_maps(
        data in prop::collection::vec((0u8..20, any::<bool>()), 2..40)
    ) {
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let raw: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
        let mapped: Vec<f64> = raw.iter().map(|x| (0.3 * x).exp() - 7.0).collect();
        prop_assert_eq!(auc(&raw, &labels).unwrap(), auc(&mapped, &labels).unwrap());
        prop_assert_eq!(
            recovered_number(&raw, &labels).unwrap(),
            recovered_number(&mapped, &labels).unwrap()
        );
        let a = auc(&raw, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn lasso_stays_in_box(
        u in incidence(8, 6),
        targets in prop::collection::vec(0u8..4, 64),
        alpha in 0.0f64..1.0,
    ) {
        prop_assume!(!u.is_empty());
        let m = u.num_vertices();
        let a = project(&u.select(&[0]));
        let mut t = AdjacencyMatrix::new(m);
        for i in 0..m {
            for j in i + 1..m {
                t.insert(i, j, f64::from(targets[i * 8 + j])).unwrap();
            }
        }
        let problem = MatchingProblem::new(&u, &t, &a, alpha).unwrap();
        let (lambda, history) = problem.solve(&MatchConfig { l1_penalty: alpha, ..Default::default() }).unwrap();
        prop_assert!(lambda.iter().all(|&l| (0.0..=1.0).contains(&l)));
        prop_assert!(history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn neighbourhood_scores_nonnegative_and_katz_grows_with_length(
        s in incidence(10, 8),
        beta in 0.001f64..0.5,
    ) {
        let u = s.clone();
        prop_assert!(score_hcn(&s, &u).unwrap().iter().all(|&x| x >= 0.0));
        let mut prev = vec![0.0; u.num_columns()];
        for l in 1..=5 {
            let cur = score_hkatz(&s, &u, &KatzConfig { beta, max_path_length: l }).unwrap().into_inner();
            prop_assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
            prev = cur;
        }
    }

    #[test]
    fn strictly_decreasing_drift_runs_to_cap(steps in prop::collection::vec(0.01f64..1.0, 1..8)) {
        // scores move by strictly shrinking amounts
        let cap = steps.len();
        let mut sorted = steps.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.dedup();
        prop_assume!(sorted.len() == cap);
        let mut value = 0.0;
        let seq: Vec<f64> = sorted.iter().map(|d| { value += d; value }).collect();
        let (out, trace) =
            iterate_fixed_point(1, cap, |k, _| ScoreVector::new(vec![seq[k - 1]])).unwrap();
        prop_assert_eq!(trace.stop_reason, StopReason::IterationCap);
        prop_assert_eq!(trace.iterations(), cap);
        if cap > 2 {
            let mean = seq[..cap - 2].iter().sum::<f64>() / (cap - 2) as f64;
            prop_assert_eq!(out[0], mean);
        }
    }

    #[test]
    fn driver_output_is_trace_mean(
        seq in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..10)
    ) {
        let cap = seq.len();
        let (out, trace) =
            iterate_fixed_point(3, cap, |k, _| ScoreVector::new(seq[k - 1].clone())).unwrap();
        prop_assert!(trace.drifts.iter().all(|&d| d >= 0.0));
        prop_assert!(trace.iterations() <= cap);
        let k = trace.iterations();
        let expected: Vec<f64> = if k <= 2 {
            trace.scores[k - 1].to_vec()
        } else {
            (0..3)
                .map(|c| trace.scores[..k - 2].iter().map(|s| s[c]).sum::<f64>() / (k - 2) as f64)
                .collect()
        };
        prop_assert_eq!(out.as_slice(), expected.as_slice());
        prop_assert_eq!(out, ensemble_average(&trace));
    }
}

#[test]
fn matboost_is_reproducible() {
    let s = IncidenceMatrix::new(
        8,
        vec![vec![0, 1, 2], vec![1, 2, 3], vec![3, 4], vec![4, 5, 6], vec![5, 6, 7], vec![0, 7]],
    )
    .unwrap();
    let u = IncidenceMatrix::new(8, vec![vec![2, 3, 4], vec![0, 5], vec![1, 6, 7]]).unwrap();
    let cfg = MatBoostConfig::default();
    let first = run_matboost(&s, &u, &cfg).unwrap();
    let second = run_matboost(&s, &u, &cfg).unwrap();
    assert_eq!(first, second);
}

#[test]
fn random_recovered_matches_expectation() {
    // 3 positives among 10 candidates: E[recovered] = 3 * 3 / 10
    let labels: Vec<bool> = (0..10).map(|i| i < 3).collect();
    let draws: Vec<f64> = (0..200)
        .map(|t| recovered_number(&score_random(10, t), &labels).unwrap() as f64)
        .collect();
    let mean = draws.iter().sum::<f64>() / 200.0;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 199.0;
    let se = (var / 200.0).sqrt();
    assert!((mean - 0.9).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn planted_positives_rank_above_chance() {
    // 10 vertices, 6 training and 2 deleted hyperlinks, 4 negatives;
    // random scoring puts the positives at mean rank 3.5
    let mut total = 0.0;
    for seed in 0..12u64 {
        let full = generate_synthetic(10, 8, (2, 4), 0.5, seed).unwrap();
        let neg = generate_negative_pool(&full, 4, (2, 4), 0.5, seed).unwrap();
        let split = make_split(&full, &neg, 2, seed).unwrap();
        let mut cfg = MatBoostConfig::default();
        cfg.completion.seed = seed;
        let (scores, _) = run_matboost(&split.train, &split.candidates, &cfg).unwrap();
        for (rank, c) in rank_candidates(&scores).into_iter().enumerate() {
            if split.labels[c] {
                total += (rank + 1) as f64;
            }
        }
    }
    let mean_rank = total / 24.0;
    assert!(mean_rank < 3.5, "mean positive rank {mean_rank}");
}
