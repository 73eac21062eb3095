//! Power transfer distribution factors from the DC susceptance model.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Lu, Matrix};
use crate::network::{first_unreachable, Network};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PtdfError {
    #[error("reduced susceptance matrix is singular (disconnected or degenerate network)")]
    SingularSusceptance,
    #[error("slack bus {0} out of range")]
    SlackOutOfRange(usize),
}

/// Branch flows per unit nodal injection, withdrawn at the slack bus.
///
/// Rows are branches (oriented from → to), columns are buses. The slack
/// column is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptdf {
    pub matrix: Matrix,
    pub slack_bus: usize,
}

impl Ptdf {
    /// Flows `M u` for a nodal injection vector.
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(injection)
    }
}

pub fn compute_ptdf(net: &Network) -> Result<Ptdf, PtdfError> {
    compute_ptdf_with_slack(net, net.slack_bus)
}

/// Same as [`compute_ptdf`] with an explicit reference bus.
pub fn compute_ptdf_with_slack(net: &Network, slack: usize) -> Result<Ptdf, PtdfError> {
    let n = net.n_bus();
    if slack >= n {
        return Err(PtdfError::SlackOutOfRange(slack));
    }
    if first_unreachable(n, slack, &net.branches).is_some() {
        return Err(PtdfError::SingularSusceptance);
    }
    // position of each bus in the reduced system
    let reduced: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&slack) {
            core::cmp::Ordering::Less => Some(i),
            core::cmp::Ordering::Equal => None,
            core::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();

    let m = net.n_branch();
    let mut ptdf = Matrix::zeros(m, n);
    if n == 1 {
        return Ok(Ptdf { matrix: ptdf, slack_bus: slack });
    }

    let mut bred = Matrix::zeros(n - 1, n - 1);
    for br in &net.branches {
        let b = br.susceptance;
        let (f, t) = (reduced[br.from], reduced[br.to]);
        if let Some(f) = f {
            bred[(f, f)] += b;
        }
        if let Some(t) = t {
            bred[(t, t)] += b;
        }
        if let (Some(f), Some(t)) = (f, t) {
            bred[(f, t)] -= b;
            bred[(t, f)] -= b;
        }
    }
    let lu = Lu::factor(&bred).map_err(|_| PtdfError::SingularSusceptance)?;

    // Row l of M is Bf_l · Bred⁻¹; Bred is symmetric so solve Bred x = Bf_lᵀ.
    let mut rhs = vec![0.0; n - 1];
    for (l, br) in net.branches.iter().enumerate() {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        if let Some(f) = reduced[br.from] {
            rhs[f] += br.susceptance;
        }
        if let Some(t) = reduced[br.to] {
            rhs[t] -= br.susceptance;
        }
        let x = lu.solve(&rhs);
        let row = ptdf.row_mut(l);
        for (bus, pos) in reduced.iter().enumerate() {
            if let Some(p) = pos {
                row[bus] = x[*p];
            }
        }
    }
    Ok(Ptdf { matrix: ptdf, slack_bus: slack })
}
