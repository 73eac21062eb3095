mod common;

use std::collections::BTreeSet;

use common::*;
use opf_activeset_core::active_set::{check_feasible, extract_active_set, recover_solution, ActiveSet};
use opf_activeset_core::dcopf::{solve_dcopf, SolveStatus};
use opf_activeset_core::network::Network;
use opf_activeset_core::policy::{ensemble_policy, relative_gap};
use opf_activeset_core::polytope::{assemble_polytope, Polytope};
use opf_activeset_core::ptdf::compute_ptdf;

fn polytope(net: &Network) -> Polytope {
    let ptdf = compute_ptdf(net).unwrap();
    assemble_polytope(net, &ptdf, &vec![0.0; net.n_bus()]).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ptdf_matches_angle_solve() {
    for net in hand_networks() {
        let ptdf = compute_ptdf(&net).unwrap();
        let mut rng = test_rng(11);
        for _ in 0..20 {
            let mut inj = random_omega(&net, 1.0, &mut rng);
            inj.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 * i as f64);
            let total: f64 = inj.iter().sum();
            inj[net.slack_bus] -= total;
            let want = dc_flows(&net, &inj);
            let got = ptdf.matrix.mul_vec(&inj);
            assert!(max_abs_diff(&want, &got) < 1e-12, "{}", net.name);
        }
    }
}

#[test]
fn dcopf_matches_vertex_enumeration() {
    for net in hand_networks() {
        let poly = polytope(&net);
        let mut rng = test_rng(2024);
        let mut sets = BTreeSet::new();
        let mut solved = 0;
        for _ in 0..100 {
            let omega = random_omega(&net, 0.3, &mut rng);
            let lp = solve_dcopf(&poly, &omega).unwrap();
            match vertex_oracle(&net, &omega) {
                None => assert_eq!(lp.status, SolveStatus::Infeasible, "{}", net.name),
                Some(best) => {
                    assert_eq!(lp.status, SolveStatus::Optimal, "{}", net.name);
                    assert!(relative_gap(lp.cost, best.cost).abs() <= 1e-9, "{} cost", net.name);
                    assert!(max_abs_diff(&lp.p_star, &best.p) <= 1e-8, "{} dispatch", net.name);
                    sets.insert(lp.active_set.unwrap());
                    solved += 1;
                }
            }
        }
        assert!(solved >= 90, "{}: only {solved} feasible draws", net.name);
        assert!(sets.len() >= 2, "{}: draws never changed the active set", net.name);
        eprintln!("{}: {solved} feasible, {} active sets", net.name, sets.len());
    }
}

#[test]
fn recovery_round_trip_on_hand_networks() {
    for net in hand_networks() {
        let poly = polytope(&net);
        let mut rng = test_rng(5);
        for _ in 0..100 {
            let omega = random_omega(&net, 0.3, &mut rng);
            let lp = solve_dcopf(&poly, &omega).unwrap();
            if lp.status != SolveStatus::Optimal {
                continue;
            }
            let aset = lp.active_set.unwrap();
            assert_eq!(aset.len(), net.n_gen() - 1);
            let p = recover_solution(&aset, &poly, &omega).unwrap();
            assert!(max_abs_diff(&p, &lp.p_star) <= 1e-8, "{}", net.name);
            let again = extract_active_set(&poly, &lp.p_star, &omega, None).unwrap();
            let q = recover_solution(&again, &poly, &omega).unwrap();
            assert!(max_abs_diff(&q, &lp.p_star) <= 1e-8, "{}", net.name);
        }
    }
}

fn all_row_subsets(n: usize, k: usize) -> Vec<ActiveSet> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<ActiveSet>) {
        if cur.len() == k {
            out.push(ActiveSet::new(cur.clone()));
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

#[test]
fn ensemble_over_every_row_subset_reproduces_oracle() {
    let net = three_bus();
    let poly = polytope(&net);
    let candidates = all_row_subsets(poly.n_rows(), net.n_gen() - 1);
    let mut rng = test_rng(77);
    for _ in 0..100 {
        let omega = random_omega(&net, 0.3, &mut rng);
        let res = ensemble_policy(&poly, &candidates, &omega);
        match vertex_oracle(&net, &omega) {
            None => assert!(!res.feasible),
            Some(best) => {
                assert!(res.feasible);
                assert!(relative_gap(res.cost, best.cost).abs() <= 1e-9);
                assert!(max_abs_diff(&res.p_hat, &best.p) <= 1e-8);
                assert_eq!(res.candidates_evaluated, candidates.len());
                assert!(check_feasible(&res.p_hat, &poly, &omega, 1e-6).feasible);
            }
        }
    }
}
