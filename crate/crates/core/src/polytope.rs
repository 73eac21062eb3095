//! The feasible set of the DC-OPF in matrix form,
//! `P(ω) = { p : A p ≤ b + C ω,  eᵀp = eᵀ(d − μ − ω) }`.
//!
//! Row blocks, in this order:
//!
//! | block       | A rows | C rows | b rows              |
//! |-------------|--------|--------|---------------------|
//! | `GenUpper`  | `I`    | `0`    | `p_max`             |
//! | `GenLower`  | `−I`   | `0`    | `−p_min`            |
//! | `FlowUpper` | `MH`   | `−M`   | `f_max − M(μ − d)`  |
//! | `FlowLower` | `−MH`  | `M`    | `f_max + M(μ − d)`  |
//!
//! Within a block rows follow generator or branch order. Rows whose limit is
//! infinite (unrated branches, unbounded generators) are left out and listed
//! in [`Polytope::excluded`], so an active set can never reference them.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::network::Network;
use crate::ptdf::Ptdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowKind {
    GenUpper(usize),
    GenLower(usize),
    FlowUpper(usize),
    FlowLower(usize),
}

impl RowKind {
    pub fn is_generator(self) -> bool {
        matches!(self, RowKind::GenUpper(_) | RowKind::GenLower(_))
    }

    pub fn is_flow(self) -> bool {
        !self.is_generator()
    }

    /// Generator or branch index.
    pub fn element(self) -> usize {
        match self {
            RowKind::GenUpper(i)
            | RowKind::GenLower(i)
            | RowKind::FlowUpper(i)
            | RowKind::FlowLower(i) => i,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, RowKind::GenUpper(_) | RowKind::FlowUpper(_))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolytopeError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Flow rows of one rated branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRows {
    pub branch: usize,
    pub upper: usize,
    pub lower: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Matrix,
    /// `eᵀ(d − μ)`; the balance right-hand side is this minus `eᵀω`.
    pub balance_rhs_base: f64,
    pub cost: Vec<f64>,
    pub row_labels: Vec<RowKind>,
    /// Rows dropped because their limit is infinite.
    pub excluded: Vec<RowKind>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// `MH`, one row per rated branch in `flow_rows` order.
    pub flow_gen: Matrix,
    /// `M`, one row per rated branch in `flow_rows` order.
    pub flow_bus: Matrix,
    pub flow_rows: Vec<FlowRows>,
    pub n_bus: usize,
}

impl Polytope {
    pub fn n_gen(&self) -> usize {
        self.a.cols()
    }

    pub fn n_rows(&self) -> usize {
        self.a.rows()
    }

    /// `b + C ω`.
    pub fn rhs(&self, omega: &[f64]) -> Vec<f64> {
        let cw = self.c.mul_vec(omega);
        self.b.iter().zip(cw).map(|(b, c)| b + c).collect()
    }

    pub fn balance_rhs(&self, omega: &[f64]) -> f64 {
        self.balance_rhs_base - omega.iter().sum::<f64>()
    }

    pub fn row_of(&self, kind: RowKind) -> Option<usize> {
        self.row_labels.iter().position(|k| *k == kind)
    }

    pub fn generator_rows(&self) -> usize {
        self.row_labels.iter().filter(|k| k.is_generator()).count()
    }

    pub fn flow_row_count(&self) -> usize {
        self.row_labels.iter().filter(|k| k.is_flow()).count()
    }

    pub fn check_omega(&self, omega: &[f64]) -> Result<(), PolytopeError> {
        if omega.len() != self.n_bus {
            return Err(PolytopeError::DimensionMismatch {
                what: "omega",
                got: omega.len(),
                expected: self.n_bus,
            });
        }
        Ok(())
    }
}

/// Builds `A`, `b`, `C` for the network. `mu` is the forecast non-dispatchable
/// injection per bus (all zeros when there is none).
pub fn assemble_polytope(net: &Network, ptdf: &Ptdf, mu: &[f64]) -> Result<Polytope, PolytopeError> {
    let n = net.n_bus();
    let ng = net.n_gen();
    if mu.len() != n {
        return Err(PolytopeError::DimensionMismatch {
            what: "mu",
            got: mu.len(),
            expected: n,
        });
    }
    if ptdf.matrix.rows() != net.n_branch() || ptdf.matrix.cols() != n {
        return Err(PolytopeError::DimensionMismatch {
            what: "ptdf rows",
            got: ptdf.matrix.rows(),
            expected: net.n_branch(),
        });
    }

    let demand = net.demand();
    let mu_minus_d: Vec<f64> = mu.iter().zip(&demand).map(|(m, d)| m - d).collect();
    let base_flow = ptdf.matrix.mul_vec(&mu_minus_d);

    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut c_rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut labels = Vec::new();
    let mut excluded = Vec::new();

    for (g, gen) in net.generators.iter().enumerate() {
        if gen.p_max.is_finite() {
            let mut row = vec![0.0; ng];
            row[g] = 1.0;
            a_rows.push(row);
            c_rows.push(vec![0.0; n]);
            b.push(gen.p_max);
            labels.push(RowKind::GenUpper(g));
        } else {
            excluded.push(RowKind::GenUpper(g));
        }
    }
    for (g, gen) in net.generators.iter().enumerate() {
        if gen.p_min.is_finite() {
            let mut row = vec![0.0; ng];
            row[g] = -1.0;
            a_rows.push(row);
            c_rows.push(vec![0.0; n]);
            b.push(-gen.p_min);
            labels.push(RowKind::GenLower(g));
        } else {
            excluded.push(RowKind::GenLower(g));
        }
    }

    // MH: column g of MH is the PTDF column of generator g's bus
    let rated: Vec<usize> = (0..net.n_branch())
        .filter(|&l| net.branches[l].is_rated())
        .collect();
    let mut flow_gen = Matrix::zeros(rated.len(), ng);
    let mut flow_bus = Matrix::zeros(rated.len(), n);
    for (r, &l) in rated.iter().enumerate() {
        let m_row = ptdf.matrix.row(l);
        flow_bus.row_mut(r).copy_from_slice(m_row);
        for (g, gen) in net.generators.iter().enumerate() {
            flow_gen[(r, g)] = m_row[gen.bus];
        }
    }
    for l in 0..net.n_branch() {
        if !net.branches[l].is_rated() {
            excluded.push(RowKind::FlowUpper(l));
            excluded.push(RowKind::FlowLower(l));
        }
    }

    let first_upper = a_rows.len();
    for (r, &l) in rated.iter().enumerate() {
        a_rows.push(flow_gen.row(r).to_vec());
        c_rows.push(flow_bus.row(r).iter().map(|v| -v).collect());
        b.push(net.branches[l].f_max - base_flow[l]);
        labels.push(RowKind::FlowUpper(l));
    }
    let first_lower = a_rows.len();
    for (r, &l) in rated.iter().enumerate() {
        a_rows.push(flow_gen.row(r).iter().map(|v| -v).collect());
        c_rows.push(flow_bus.row(r).to_vec());
        b.push(net.branches[l].f_max + base_flow[l]);
        labels.push(RowKind::FlowLower(l));
    }
    let flow_rows = rated
        .iter()
        .enumerate()
        .map(|(r, &l)| FlowRows {
            branch: l,
            upper: first_upper + r,
            lower: first_lower + r,
        })
        .collect();

    let rows = a_rows.len();
    let a = if rows == 0 {
        Matrix::zeros(0, ng)
    } else {
        Matrix::from_rows(&a_rows)
    };
    let c = if rows == 0 {
        Matrix::zeros(0, n)
    } else {
        Matrix::from_rows(&c_rows)
    };

    Ok(Polytope {
        a,
        b,
        c,
        balance_rhs_base: -mu_minus_d.iter().sum::<f64>(),
        cost: net.generators.iter().map(|g| g.cost).collect(),
        row_labels: labels,
        excluded,
        p_min: net.generators.iter().map(|g| g.p_min).collect(),
        p_max: net.generators.iter().map(|g| g.p_max).collect(),
        flow_gen,
        flow_bus,
        flow_rows,
        n_bus: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::three_bus;
    use crate::ptdf::compute_ptdf;

    #[test]
    fn block_structure() {
        let net = three_bus();
        let ptdf = compute_ptdf(&net).unwrap();
        let poly = assemble_polytope(&net, &ptdf, &[0.0; 3]).unwrap();
        assert_eq!(poly.n_rows(), 2 * (2 + 3));
        assert_eq!(poly.n_gen(), 2);
        assert_eq!(poly.row_labels[0], RowKind::GenUpper(0));
        assert_eq!(poly.row_labels[3], RowKind::GenLower(1));
        assert_eq!(poly.row_labels[4], RowKind::FlowUpper(0));
        assert_eq!(poly.row_labels[9], RowKind::FlowLower(2));
        for r in 4..7 {
            for j in 0..3 {
                assert_eq!(poly.c[(r, j)], -ptdf.matrix[(r - 4, j)]);
                assert_eq!(poly.c[(r + 3, j)], ptdf.matrix[(r - 4, j)]);
            }
        }
        assert_eq!(poly.balance_rhs_base, 1.0);
    }

    #[test]
    fn unrated_branch_rows_are_excluded() {
        let mut net = three_bus();
        net.branches[1].f_max = f64::INFINITY;
        let ptdf = compute_ptdf(&net).unwrap();
        let poly = assemble_polytope(&net, &ptdf, &[0.0; 3]).unwrap();
        assert_eq!(poly.n_rows(), 8);
        assert!(poly.row_of(RowKind::FlowUpper(1)).is_none());
        assert_eq!(
            poly.excluded,
            vec![RowKind::FlowUpper(1), RowKind::FlowLower(1)]
        );
        assert!(poly.b.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn wrong_mu_length_rejected() {
        let net = three_bus();
        let ptdf = compute_ptdf(&net).unwrap();
        assert!(matches!(
            assemble_polytope(&net, &ptdf, &[0.0; 2]),
            Err(PolytopeError::DimensionMismatch { .. })
        ));
    }
}
