mod common;

use std::collections::BTreeSet;

use hawkfs::baselines::knn_train;
use hawkfs::dataset::{self, Dataset, SplitSpec};
use hawkfs::hho::{decode, SolutionLayout};
use hawkfs::linalg::pseudoinverse;
use hawkfs::metrics::{evaluate, Averaging};
use hawkfs::wrapper::{fitness_value, FitnessWeights};
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Array2<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1e3..1e3f64, r * c).prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    })
}

fn labelled(max_rows: usize, max_classes: usize) -> impl Strategy<Value = (Vec<usize>, usize)> {
    (2..=max_classes).prop_flat_map(move |k| (prop::collection::vec(0..k, k..=max_rows), Just(k)))
}

fn dataset_from(x: Array2<f64>, labels: Vec<usize>, k: usize) -> Dataset {
    let names = (0..x.ncols()).map(|j| format!("c{j}")).collect();
    Dataset::new(x, labels, names, (0..k).map(|c| c.to_string()).collect()).unwrap()
}

fn assert_exact_cover(parts: &[&[usize]], n: usize) {
    let mut seen = BTreeSet::new();
    for p in parts {
        for &i in *p {
            assert!(i < n);
            assert!(seen.insert(i), "index {i} appears twice");
        }
    }
    assert_eq!(seen.len(), n);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_values_stay_in_the_unit_interval(train in matrix(1..=30, 1..=6), shift in -5e3..5e3f64) {
        let d = dataset_from(train.clone(), vec![0; train.nrows()], 1);
        let params = dataset::fit_normalizer(&d);
        let n = dataset::apply_normalizer(&d, &params).unwrap();
        prop_assert!(n.features.iter().all(|v| (0.0..=1.0).contains(v)));
        let unseen = dataset_from(train.mapv(|v| v * 3.0 + shift), vec![0; train.nrows()], 1);
        let m = dataset::apply_normalizer(&unseen, &params).unwrap();
        prop_assert!(m.features.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn splits_are_exact_covers((labels, k) in labelled(300, 4), seed in any::<u64>(), stratified in any::<bool>()) {
        let names: Vec<String> = (0..k).map(|c| c.to_string()).collect();
        let spec = SplitSpec { stratified, seed, ..SplitSpec::default() };
        if let Ok(idx) = dataset::split_indices(&labels, &names, &spec) {
            assert_exact_cover(&[&idx.train, &idx.validation, &idx.test], labels.len());
            let n = labels.len() as f64;
            let expected_train = (n * 0.66 + 1e-9).floor() as usize;
            prop_assert_eq!(idx.train.len() + idx.validation.len(), expected_train);
            let again = dataset::split_indices(&labels, &names, &spec).unwrap();
            prop_assert_eq!(idx, again);
        }
    }

    #[test]
    fn client_partitions_are_balanced_exact_covers((labels, k) in labelled(200, 3), clients in 1usize..8, seed in any::<u64>()) {
        prop_assume!(clients <= labels.len());
        let parts = dataset::partition_client_indices(&labels, k, clients, seed).unwrap();
        prop_assert_eq!(parts.len(), clients);
        let refs: Vec<&[usize]> = parts.iter().map(|p| p.as_slice()).collect();
        assert_exact_cover(&refs, labels.len());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn decode_is_pure_and_well_formed(position in prop::collection::vec(0.0..=1.0f64, 13), bits in 1usize..=10) {
        let l = 13 - bits;
        prop_assume!(l >= 1);
        let layout = SolutionLayout::new(l, bits).unwrap();
        let a = decode(&position, &layout);
        prop_assert_eq!(&a, &decode(&position.clone(), &layout));
        prop_assert!(a.n_selected() >= 1);
        prop_assert!((1..=1usize << bits).contains(&a.n_hidden));
        for j in 0..l {
            if position[j] >= 0.5 {
                prop_assert!(a.feature_mask[j]);
            }
        }
    }

    #[test]
    fn metrics_are_bounded_and_order_free(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..200),
        rotation in 0usize..200,
    ) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let r = rotation % pairs.len();
        let mut t2 = t.clone();
        let mut p2 = p.clone();
        t2.rotate_left(r);
        p2.rotate_left(r);
        for (k, avg) in [(3, Averaging::Macro), (3, Averaging::BinaryPositiveClass)] {
            let a = evaluate(&t, &p, k, avg).unwrap();
            let b = evaluate(&t2, &p2, k, avg).unwrap();
            prop_assert_eq!(&a, &b);
            for v in [a.accuracy, a.precision, a.recall, a.f_measure] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let correct = t.iter().zip(&p).filter(|(x, y)| x == y).count();
            prop_assert!((a.accuracy - correct as f64 / t.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn knn_matches_brute_force(
        train in matrix(1..=60, 1..=4),
        labels_seed in any::<u64>(),
        k in 1usize..8,
        queries in matrix(1..=10, 4..=4),
    ) {
        let n = train.nrows();
        let d = train.ncols();
        let labels: Vec<usize> = (0..n).map(|i| ((labels_seed >> (i % 64)) as usize + i / 64) % 3).collect();
        let k = k.min(n);
        let model = knn_train(train.view(), &labels, 3, k).unwrap();
        let q = queries.slice(ndarray::s![.., ..d]).to_owned();
        let got = model.predict(q.view()).unwrap();
        for (qi, row) in q.rows().into_iter().enumerate() {
            let mut order: Vec<(f64, usize)> = train
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, t)| (t.iter().zip(row.iter()).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = [0usize; 3];
            for &(_, i) in &order[..k] {
                votes[labels[i]] += 1;
            }
            let top = *votes.iter().max().unwrap();
            let expected = votes.iter().position(|&v| v == top).unwrap();
            prop_assert_eq!(got[qi], expected);
        }
    }

    #[test]
    fn fitness_increases_in_each_term(
        e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64,
        f1 in 1usize..=50, f2 in 1usize..=50,
        n1 in 1usize..=1024, n2 in 1usize..=1024,
    ) {
        let w = FitnessWeights::default();
        let fit = |e, f, n| fitness_value(e, f, 50, n, 1024, &w).unwrap();
        if e1 < e2 { prop_assert!(fit(e1, 10, 10) < fit(e2, 10, 10)); }
        if f1 < f2 { prop_assert!(fit(0.3, f1, 10) < fit(0.3, f2, 10)); }
        if n1 < n2 { prop_assert!(fit(0.3, 10, n1) < fit(0.3, 10, n2)); }
        let v = fit(e1, f1, n1);
        let direct = 0.99 * e1 + 0.01 * f1 as f64 / 50.0 + 0.01 * n1 as f64 / 1024.0;
        prop_assert!((v - direct).abs() < 1e-15);
    }

    #[test]
    fn penrose_conditions(rows in 1usize..=12, cols in 1usize..=12, rank_cut in 0usize..=12, seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let rank = rank_cut.min(rows.min(cols));
        let a = common::matrix_of_rank(rows, cols, rank, &mut r);
        let x = pseudoinverse(&a).unwrap();
        prop_assert_eq!(x.dim(), (cols, rows));
        let rel = |m: Array2<f64>, reference: &Array2<f64>| {
            let scale = common::frobenius(reference);
            if scale == 0.0 { common::frobenius(&m) } else { common::frobenius(&m) / scale }
        };
        let ax = a.dot(&x);
        let xa = x.dot(&a);
        prop_assert!(rel(ax.dot(&a) - &a, &a) <= 1e-8);
        prop_assert!(rel(xa.dot(&x) - &x, &x) <= 1e-8);
        prop_assert!(rel(ax.t().to_owned() - &ax, &ax) <= 1e-8);
        prop_assert!(rel(xa.t().to_owned() - &xa, &xa) <= 1e-8);
    }
}
