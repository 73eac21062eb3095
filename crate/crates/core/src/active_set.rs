//! Active sets, basis recovery and feasibility checks.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Lu, Matrix};
use crate::polytope::Polytope;

/// Absolute tolerance for calling a row tight, p.u.
pub const TOL_ACTIVE: f64 = 1e-6;
/// Absolute feasibility tolerance, p.u.
pub const TOL_FEASIBLE: f64 = 1e-6;

/// Sorted, deduplicated row indices into the polytope's `A`.
///
/// Together with the balance row these pin a vertex. Two sets with the same
/// rows compare equal and hash identically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActiveSet {
    rows: Vec<usize>,
}

impl ActiveSet {
    pub fn new(mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Self { rows }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.rows.binary_search(&row).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ActiveSetError {
    #[error("tight rows cannot form a nonsingular basis")]
    DegenerateUnresolvable,
    #[error("singular basis for active set {0:?}")]
    SingularBasis(ActiveSet),
    #[error("active set has {got} rows, expected {expected}")]
    WrongCardinality { got: usize, expected: usize },
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
}

/// `B = [A_rows; eᵀ]`.
pub fn basis_matrix(poly: &Polytope, rows: &[usize]) -> Matrix {
    let ng = poly.n_gen();
    let mut b = Matrix::zeros(rows.len() + 1, ng);
    for (k, &r) in rows.iter().enumerate() {
        b.row_mut(k).copy_from_slice(poly.a.row(r));
    }
    b.row_mut(rows.len()).iter_mut().for_each(|v| *v = 1.0);
    b
}

fn is_nonsingular(poly: &Polytope, rows: &[usize]) -> bool {
    Lu::factor(&basis_matrix(poly, rows)).is_ok()
}

/// Per-row slack `b_i + C_i ω − A_i p` (nonnegative when satisfied).
pub fn row_slacks(poly: &Polytope, p: &[f64], omega: &[f64]) -> Vec<f64> {
    let rhs = poly.rhs(omega);
    (0..poly.n_rows())
        .map(|i| rhs[i] - dot(poly.a.row(i), p))
        .collect()
}

/// Picks the `n_g − 1` rows that define the optimal vertex `p_star`.
///
/// With a basis hint (the rows at which the simplex left its nonbasic
/// variables) the hint is used as-is after checking it is tight and
/// nonsingular. Without a hint, the tight rows are used when they are exactly
/// `n_g − 1`; a surplus of tight rows is reduced greedily in row order, keeping
/// each row that stays linearly independent of the ones already chosen.
pub fn extract_active_set(
    poly: &Polytope,
    p_star: &[f64],
    omega: &[f64],
    basis_hint: Option<&[usize]>,
) -> Result<ActiveSet, ActiveSetError> {
    let need = poly.n_gen().saturating_sub(1);
    let slacks = row_slacks(poly, p_star, omega);
    let tight: Vec<usize> = (0..poly.n_rows())
        .filter(|&i| slacks[i].abs() <= TOL_ACTIVE)
        .collect();

    if let Some(hint) = basis_hint {
        let set = ActiveSet::new(hint.to_vec());
        if set.len() == need
            && set.rows.iter().all(|&r| r < poly.n_rows() && slacks[r].abs() <= TOL_ACTIVE)
            && is_nonsingular(poly, &set.rows)
        {
            return Ok(set);
        }
    }

    if tight.len() == need && is_nonsingular(poly, &tight) {
        return Ok(ActiveSet::new(tight));
    }
    if tight.len() < need {
        return Err(ActiveSetError::DegenerateUnresolvable);
    }

    // Greedy independent subset: the balance row first, then tight rows in order.
    let ng = poly.n_gen();
    let mut reduced: Vec<Vec<f64>> = vec![vec![1.0; ng]];
    let mut chosen = Vec::with_capacity(need);
    for &r in &tight {
        if chosen.len() == need {
            break;
        }
        let mut v = poly.a.row(r).to_vec();
        for basis_row in &reduced {
            let lead = leading_index(basis_row);
            if let Some(k) = lead {
                let f = v[k] / basis_row[k];
                if f != 0.0 {
                    for (vi, bi) in v.iter_mut().zip(basis_row) {
                        *vi -= f * bi;
                    }
                }
            }
        }
        let norm = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if norm > 1e-9 {
            reduced.push(v);
            chosen.push(r);
        }
    }
    if chosen.len() == need && is_nonsingular(poly, &chosen) {
        Ok(ActiveSet::new(chosen))
    } else {
        Err(ActiveSetError::DegenerateUnresolvable)
    }
}

fn leading_index(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > 1e-12 && best.is_none_or(|(_, b)| x.abs() > b) {
            best = Some((i, x.abs()));
        }
    }
    best.map(|(i, _)| i)
}

/// Vertex defined by an active set: solves
/// `B p = [b_A + C_A ω; eᵀ(d − μ) − eᵀω]`.
///
/// No feasibility guarantee; see [`check_feasible`].
pub fn recover_solution(
    aset: &ActiveSet,
    poly: &Polytope,
    omega: &[f64],
) -> Result<Vec<f64>, ActiveSetError> {
    let need = poly.n_gen().saturating_sub(1);
    if aset.len() != need {
        return Err(ActiveSetError::WrongCardinality {
            got: aset.len(),
            expected: need,
        });
    }
    if let Some(&r) = aset.rows.iter().find(|&&r| r >= poly.n_rows()) {
        return Err(ActiveSetError::RowOutOfRange(r));
    }
    let b = basis_matrix(poly, &aset.rows);
    let lu = Lu::factor(&b).map_err(|_| ActiveSetError::SingularBasis(aset.clone()))?;
    let mut rhs = Vec::with_capacity(aset.len() + 1);
    for &r in &aset.rows {
        rhs.push(poly.b[r] + dot(poly.c.row(r), omega));
    }
    rhs.push(poly.balance_rhs(omega));
    Ok(lu.solve(&rhs))
}

/// Outcome of [`check_feasible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Largest `A_i p − b_i − C_i ω` over inequality rows; `≤ 0` when all hold.
    pub max_violation: f64,
    /// `|eᵀp − eᵀ(d − μ − ω)|`.
    pub balance_residual: f64,
}

pub fn check_feasible(p: &[f64], poly: &Polytope, omega: &[f64], tol: f64) -> Feasibility {
    let slacks = row_slacks(poly, p, omega);
    let max_violation = slacks
        .iter()
        .map(|s| -s)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_violation = if slacks.is_empty() { 0.0 } else { max_violation };
    let balance_residual = (p.iter().sum::<f64>() - poly.balance_rhs(omega)).abs();
    Feasibility {
        feasible: max_violation <= tol && balance_residual <= tol,
        max_violation,
        balance_residual,
    }
}
