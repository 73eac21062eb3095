//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the crate's PTDF, polytope or LP code: flows come
//! from a direct angle solve and optima from enumerating every vertex.

#![allow(dead_code)]

use opf_activeset_core::network::{Branch, Bus, Generator, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Branch flows for nodal injections `inj` (must sum to zero) by solving the
/// bus angle equations with the slack angle pinned at zero.
pub fn dc_flows(net: &Network, inj: &[f64]) -> Vec<f64> {
    let n = net.n_bus();
    let s = net.slack_bus;
    let mut bbus = vec![vec![0.0; n]; n];
    for br in &net.branches {
        let b = br.susceptance;
        bbus[br.from][br.from] += b;
        bbus[br.to][br.to] += b;
        bbus[br.from][br.to] -= b;
        bbus[br.to][br.from] -= b;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != s).collect();
    let a: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| keep.iter().map(|&j| bbus[i][j]).collect())
        .collect();
    let rhs: Vec<f64> = keep.iter().map(|&i| inj[i]).collect();
    let th = gauss_solve(a, rhs).expect("connected network");
    let mut theta = vec![0.0; n];
    for (k, &i) in keep.iter().enumerate() {
        theta[i] = th[k];
    }
    net.branches
        .iter()
        .map(|br| br.susceptance * (theta[br.from] - theta[br.to]))
        .collect()
}

/// Inequalities `G p ≤ h` of the dispatch problem at `ω`, plus the balance
/// total, derived from scratch.
pub struct Inequalities {
    pub g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub total: f64,
}

pub fn inequalities(net: &Network, omega: &[f64]) -> Inequalities {
    let n = net.n_bus();
    let ng = net.n_gen();
    let mut g = Vec::new();
    let mut h = Vec::new();
    for (k, gen) in net.generators.iter().enumerate() {
        let mut row = vec![0.0; ng];
        row[k] = 1.0;
        g.push(row.clone());
        h.push(gen.p_max);
        row[k] = -1.0;
        g.push(row);
        h.push(-gen.p_min);
    }
    // flow = Σ_k sens_k p_k + flow of the fixed net load, each balanced at the slack
    let mut sens = Vec::with_capacity(ng);
    for gen in &net.generators {
        let mut inj = vec![0.0; n];
        inj[gen.bus] += 1.0;
        inj[net.slack_bus] -= 1.0;
        sens.push(dc_flows(net, &inj));
    }
    let mut load_inj: Vec<f64> = (0..n).map(|i| -net.buses[i].demand + omega[i]).collect();
    let total: f64 = net.buses.iter().zip(omega).map(|(b, w)| b.demand - w).sum();
    load_inj[net.slack_bus] += total;
    let base = dc_flows(net, &load_inj);
    for (l, br) in net.branches.iter().enumerate() {
        if !br.f_max.is_finite() {
            continue;
        }
        let row: Vec<f64> = (0..ng).map(|k| sens[k][l]).collect();
        g.push(row.clone());
        h.push(br.f_max - base[l]);
        g.push(row.iter().map(|v| -v).collect());
        h.push(br.f_max + base[l]);
    }
    Inequalities { g, h, total }
}

pub struct VertexOptimum {
    pub cost: f64,
    pub p: Vec<f64>,
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Every vertex of the feasible set at `ω`: each choice of `n_g − 1`
/// inequalities plus the balance equation whose solution is feasible.
pub fn feasible_vertices(net: &Network, omega: &[f64]) -> Vec<(Vec<usize>, Vec<f64>)> {
    let ineq = inequalities(net, omega);
    let ng = net.n_gen();
    let mut out = Vec::new();
    combinations(ineq.g.len(), ng - 1, &mut |rows| {
        let mut a: Vec<Vec<f64>> = rows.iter().map(|&r| ineq.g[r].clone()).collect();
        a.push(vec![1.0; ng]);
        let mut b: Vec<f64> = rows.iter().map(|&r| ineq.h[r]).collect();
        b.push(ineq.total);
        if let Some(p) = gauss_solve(a, b) {
            let ok = ineq
                .g
                .iter()
                .zip(&ineq.h)
                .all(|(row, h)| row.iter().zip(&p).map(|(a, x)| a * x).sum::<f64>() <= h + 1e-9);
            if ok {
                out.push((rows.to_vec(), p));
            }
        }
    });
    out
}

/// Cheapest vertex, or `None` when the feasible set is empty.
pub fn vertex_oracle(net: &Network, omega: &[f64]) -> Option<VertexOptimum> {
    let cost: Vec<f64> = net.generators.iter().map(|g| g.cost).collect();
    feasible_vertices(net, omega)
        .into_iter()
        .map(|(_, p)| VertexOptimum {
            cost: p.iter().zip(&cost).map(|(a, b)| a * b).sum(),
            p,
        })
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
}

fn bus(id: usize, demand: f64) -> Bus {
    Bus { id, demand, is_load: demand > 0.0 }
}

fn gen(bus: usize, p_min: f64, p_max: f64, cost: f64) -> Generator {
    Generator { bus, p_min, p_max, cost }
}

fn line(from: usize, to: usize, x: f64, f_max: f64) -> Branch {
    Branch { from, to, susceptance: 1.0 / x, f_max }
}

/// Triangle with one cheap remote generator and a weak direct line.
pub fn three_bus() -> Network {
    Network {
        name: "three".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 0.0), bus(3, 1.0)],
        generators: vec![gen(0, 0.0, 2.0, 10.0), gen(1, 0.0, 2.0, 30.0)],
        branches: vec![line(0, 1, 1.0, 1.0), line(1, 2, 1.0, 1.0), line(0, 2, 1.0, 0.5)],
        slack_bus: 0,
    }
}

/// Four-bus ring with a chord, three generators and two loads.
pub fn four_bus_ring() -> Network {
    Network {
        name: "ring4".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.0), bus(2, 0.6), bus(3, 0.9), bus(4, 0.0)],
        generators: vec![gen(0, 0.1, 1.2, 12.0), gen(3, 0.0, 0.8, 20.0), gen(2, 0.0, 0.5, 41.0)],
        branches: vec![
            line(0, 1, 0.10, 0.70),
            line(1, 2, 0.20, 0.50),
            line(2, 3, 0.15, 0.60),
            line(3, 0, 0.25, 0.50),
            line(0, 2, 0.30, 0.55),
        ],
        slack_bus: 0,
    }
}

/// Radial-plus-loop network with four generators, two of them sharing a bus.
pub fn four_gen_mesh() -> Network {
    Network {
        name: "mesh4".into(),
        base_mva: 100.0,
        buses: vec![bus(1, 0.2), bus(2, 0.0), bus(3, 0.7), bus(4, 0.5)],
        generators: vec![
            gen(1, 0.0, 0.9, 8.0),
            gen(1, 0.0, 0.4, 9.5),
            gen(0, 0.05, 0.6, 15.0),
            gen(3, 0.0, 0.7, 27.0),
        ],
        branches: vec![
            line(0, 1, 0.12, f64::INFINITY),
            line(1, 2, 0.18, 0.65),
            line(2, 3, 0.22, 0.30),
            line(1, 3, 0.20, 0.45),
        ],
        slack_bus: 1,
    }
}

/// Nodal ω with `N(0, (frac·d_i)²)` entries at load buses.
pub fn random_omega(net: &Network, frac: f64, rng: &mut impl Rng) -> Vec<f64> {
    net.buses
        .iter()
        .map(|b| {
            if b.demand > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                frac * b.demand * z
            } else {
                0.0
            }
        })
        .collect()
}

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hand_networks() -> Vec<Network> {
    vec![three_bus(), four_bus_ring(), four_gen_mesh()]
}
