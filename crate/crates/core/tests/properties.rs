mod common;

use common::*;
use opf_activeset_core::active_set::{extract_active_set, recover_solution, ActiveSet};
use opf_activeset_core::dcopf::{solve_dcopf, SolveStatus};
use opf_activeset_core::linalg::Matrix;
use opf_activeset_core::network::{Branch, Bus, Generator, Network};
use opf_activeset_core::nn::{init_model, rank_classes, Masks, TrainConfig};
use opf_activeset_core::policy::{
    accuracy_from_ranked, ensemble_policy, fixed_status_report, frequency_distribution, relative_gap,
};
use opf_activeset_core::polytope::{assemble_polytope, Polytope};
use opf_activeset_core::ptdf::{compute_ptdf, compute_ptdf_with_slack};
use opf_activeset_core::scenario::{build_distribution, generate_dataset, solve_sample};
use proptest::prelude::*;

fn polytope(net: &Network) -> Polytope {
    let ptdf = compute_ptdf(net).unwrap();
    assemble_polytope(net, &ptdf, &vec![0.0; net.n_bus()]).unwrap()
}

/// Connected network: a random spanning tree plus extra lines.
fn arb_network() -> impl Strategy<Value = Network> {
    (3usize..7)
        .prop_flat_map(|n| {
            let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|i| (0..i).boxed()).collect();
            (
                Just(n),
                parents,
                prop::collection::vec((0..n, 0..n), 0..4),
                prop::collection::vec(0.05f64..0.5, n + 4),
            )
        })
        .prop_map(|(n, parents, extra, xs)| {
            let mut branches: Vec<Branch> = parents
                .iter()
                .enumerate()
                .map(|(i, &p)| Branch { from: p, to: i + 1, susceptance: 1.0 / xs[i], f_max: 1.0 })
                .collect();
            for (k, (a, b)) in extra.into_iter().enumerate() {
                if a != b {
                    branches.push(Branch { from: a, to: b, susceptance: 1.0 / xs[n - 1 + k], f_max: 1.0 });
                }
            }
            Network {
                name: "random".into(),
                base_mva: 100.0,
                buses: (0..n).map(|i| Bus { id: i + 1, demand: 0.1 * i as f64, is_load: i > 0 }).collect(),
                generators: vec![Generator { bus: 0, p_min: 0.0, p_max: 10.0, cost: 1.0 }],
                branches,
                slack_bus: 0,
            }
        })
}

fn seeded_omega(net: &Network, seed: u64) -> Vec<f64> {
    random_omega(net, 0.3, &mut test_rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn balanced_flows_do_not_depend_on_slack(net in arb_network(), seed in any::<u64>(), slack in 0usize..6) {
        let slack = slack % net.n_bus();
        let a = compute_ptdf_with_slack(&net, 0).unwrap();
        let b = compute_ptdf_with_slack(&net, slack).unwrap();
        let mut inj = random_omega(&net, 1.0, &mut test_rng(seed));
        inj[0] += 0.3;
        let total: f64 = inj.iter().sum();
        inj[slack] -= total;
        for (x, y) in a.flows(&inj).iter().zip(b.flows(&inj)) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn recovery_inverts_extraction(which in 0usize..3, seed in any::<u64>()) {
        let net = hand_networks().swap_remove(which);
        let poly = polytope(&net);
        let omega = seeded_omega(&net, seed);
        let lp = solve_dcopf(&poly, &omega).unwrap();
        if lp.status == SolveStatus::Optimal {
            let aset = lp.active_set.clone().unwrap();
            let p = recover_solution(&aset, &poly, &omega).unwrap();
            for (a, b) in p.iter().zip(&lp.p_star) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
            let direct = extract_active_set(&poly, &lp.p_star, &omega, None).unwrap();
            let q = recover_solution(&direct, &poly, &omega).unwrap();
            for (a, b) in q.iter().zip(&lp.p_star) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn solving_is_deterministic(which in 0usize..3, seed in any::<u64>()) {
        let net = hand_networks().swap_remove(which);
        let poly = polytope(&net);
        let omega = seeded_omega(&net, seed);
        let (a, b) = (solve_dcopf(&poly, &omega).unwrap(), solve_dcopf(&poly, &omega).unwrap());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        prop_assert_eq!(a.active_set, b.active_set);
        prop_assert!(a.p_star.iter().zip(&b.p_star).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn samples_independent_of_order(seed in any::<u64>(), idx in prop::collection::vec(0u64..1000, 1..8)) {
        let net = four_gen_mesh();
        let poly = polytope(&net);
        let model = build_distribution(&net, 0.1).unwrap();
        let forward: Vec<_> = idx.iter().map(|&i| solve_sample(&poly, &model, seed, i).unwrap()).collect();
        let backward: Vec<_> = idx.iter().rev().map(|&i| solve_sample(&poly, &model, seed, i).unwrap()).collect();
        prop_assert!(forward.iter().eq(backward.iter().rev()));
    }

    #[test]
    fn full_dictionary_ensemble_never_beats_lp(seed in any::<u64>()) {
        let net = four_bus_ring();
        let poly = polytope(&net);
        let model = build_distribution(&net, 0.3).unwrap();
        let ds = generate_dataset(&net, &poly, &model, 40, seed).unwrap();
        for s in &ds.samples {
            let r = ensemble_policy(&poly, ds.dictionary.sets(), &s.omega);
            prop_assert!(r.feasible);
            prop_assert!(relative_gap(r.cost, s.cost).abs() <= 1e-9);
        }
        let probe = seeded_omega(&net, seed ^ 1);
        let lp = solve_dcopf(&poly, &probe).unwrap();
        let r = ensemble_policy(&poly, ds.dictionary.sets(), &probe);
        if lp.status == SolveStatus::Optimal && r.feasible {
            prop_assert!(relative_gap(r.cost, lp.cost) >= -1e-9);
        }
    }

    #[test]
    fn fixed_rows_shrink_as_samples_grow(seed in any::<u64>(), cut in 1usize..60) {
        let net = four_bus_ring();
        let poly = polytope(&net);
        let model = build_distribution(&net, 0.3).unwrap();
        let ds = generate_dataset(&net, &poly, &model, 60, seed).unwrap();
        let small = fixed_status_report(&ds.truncated(cut), &poly);
        let large = fixed_status_report(&ds, &poly);
        for (s, l) in small.rows.iter().zip(&large.rows) {
            prop_assert!(!l.is_fixed() || s.is_fixed());
        }
        for pct in [large.generator_fixed_pct(), large.flow_fixed_pct()] {
            prop_assert!((0.0..=100.0).contains(&pct));
        }
        let freq = frequency_distribution(&ds);
        let total: f64 = freq.iter().map(|f| f.frequency).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(freq.windows(2).all(|w| w[0].count >= w[1].count));
    }

    #[test]
    fn active_set_is_canonical(mut rows in prop::collection::vec(0usize..40, 0..10)) {
        let a = ActiveSet::new(rows.clone());
        rows.reverse();
        let b = ActiveSet::new(rows);
        prop_assert!(a.rows().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn softmax_normalizes_and_relu_batchnorm_hold(seed in any::<u64>(), scale in 0.1f64..50.0) {
        let cfg = TrainConfig { layer_widths: vec![6, 5], dropout_rate: 0.0, seed, ..TrainConfig::default() };
        let mut model = init_model(&cfg, 4, 5).unwrap();
        model.output.weights.iter_mut().for_each(|w| *w *= scale);
        let mut rng = test_rng(seed);
        let x: Vec<f64> = (0..16 * 4).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let x = Matrix::from_vec(16, 4, x);
        let (cache, stats) = model.forward_train_with(&x, Masks::Fixed(&[None, None])).unwrap();
        for i in 0..16 {
            let s: f64 = cache.probs().row(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        // batch-normalized columns have zero mean and variance var/(var+ε)
        for (layer, (_, var)) in stats.iter().enumerate() {
            let xh = cache.normalized(layer);
            for j in 0..xh.cols() {
                let col = xh.column(j);
                let mean = col.iter().sum::<f64>() / 16.0;
                let v = col.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / 16.0;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((v - var[j] / (var[j] + 1e-3)).abs() < 1e-9);
            }
        }
        let p = model.forward_eval(&x).unwrap();
        prop_assert!(p.as_slice().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn dropout_masks_are_inverted_bernoulli(seed in any::<u64>(), rate in 0.05f64..0.8) {
        let cfg = TrainConfig { layer_widths: vec![64], dropout_rate: rate, seed, ..TrainConfig::default() };
        let model = init_model(&cfg, 2, 2).unwrap();
        let x = Matrix::from_vec(64, 2, (0..128).map(|i| (i % 7) as f64 - 3.0).collect());
        let mut rng = test_rng(seed);
        let (cache, _) = model.forward_train_with(&x, Masks::Draw(&mut rng)).unwrap();
        let mask = cache.masks()[0].clone().unwrap();
        let keep = 1.0 / (1.0 - rate);
        prop_assert!(mask.as_slice().iter().all(|&m| m == 0.0 || (m - keep).abs() < 1e-15));
        // 4096 Bernoulli draws: the mean lies within 6 standard errors of 1
        let mean = mask.as_slice().iter().sum::<f64>() / 4096.0;
        let se = (rate / (1.0 - rate) / 4096.0).sqrt();
        prop_assert!((mean - 1.0).abs() < 6.0 * se);
    }

    #[test]
    fn topk_accuracy_is_monotone(seed in any::<u64>(), k in 2usize..8, n in 1usize..40) {
        let mut rng = test_rng(seed);
        let mut ranked = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..n {
            let probs: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            ranked.push(rank_classes(&probs, k).unwrap());
            let t = rand::Rng::random_range(&mut rng, 0..k + 1);
            truth.push((t < k).then_some(t));
        }
        let ks: Vec<usize> = (1..=k).collect();
        let eta = accuracy_from_ranked(&ranked, &truth, &ks);
        prop_assert!(eta.windows(2).all(|w| w[0].1 <= w[1].1));
        let covered = truth.iter().filter(|t| t.is_some()).count() as f64 / n as f64;
        prop_assert!((eta[k - 1].1 - covered).abs() < 1e-12);
    }
}
