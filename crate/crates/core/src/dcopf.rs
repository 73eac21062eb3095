//! DC-OPF solve for one uncertainty realization.
//!
//! The LP handed to the simplex has one column per generator and one slack
//! column per rated branch:
//!
//! ```text
//! minimize  cᵀp
//! s.t.      eᵀp           = eᵀ(d − μ − ω)
//!           (MH)_l p − s_l = 0                       for each rated branch l
//!           p_min ≤ p ≤ p_max
//!           −(b_lo + C_lo ω)_l ≤ s_l ≤ (b_up + C_up ω)_l
//! ```
//!
//! The basis has `1 + m_rated` columns, so exactly `n_g − 1` columns are
//! nonbasic at a bound. Each of them names one row of the polytope, and that
//! row list is the active-set label. Equal-cost alternative optima therefore
//! resolve to whichever vertex the deterministic pivoting reaches.

use alloc::vec::Vec;

use crate::active_set::{extract_active_set, ActiveSet, ActiveSetError};
use crate::linalg::Matrix;
use crate::polytope::{Polytope, PolytopeError, RowKind};
use crate::simplex::{self, BoundedLp, LpStatus, SimplexOptions, VarState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPoint {
    pub status: SolveStatus,
    pub p_star: Vec<f64>,
    pub cost: f64,
    /// `Some` exactly when `status` is `Optimal`.
    pub active_set: Option<ActiveSet>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcopfError {
    #[error(transparent)]
    Dimension(#[from] PolytopeError),
    #[error(transparent)]
    ActiveSet(#[from] ActiveSetError),
    #[error("simplex stopped without a verdict: {0:?}")]
    Solver(LpStatus),
}

/// Builds the simplex input for `ω`.
pub fn build_lp(poly: &Polytope, omega: &[f64]) -> BoundedLp {
    let ng = poly.n_gen();
    let mf = poly.flow_rows.len();
    let n = ng + mf;
    let mut a = Matrix::zeros(1 + mf, n);
    for g in 0..ng {
        a[(0, g)] = 1.0;
    }
    for r in 0..mf {
        a.row_mut(1 + r)[..ng].copy_from_slice(poly.flow_gen.row(r));
        a[(1 + r, ng + r)] = -1.0;
    }
    let mut rhs = Vec::with_capacity(1 + mf);
    rhs.push(poly.balance_rhs(omega));
    rhs.extend(core::iter::repeat_n(0.0, mf));

    let mut cost = poly.cost.clone();
    cost.extend(core::iter::repeat_n(0.0, mf));

    let full_rhs = poly.rhs(omega);
    let mut lower = poly.p_min.clone();
    let mut upper = poly.p_max.clone();
    for fr in &poly.flow_rows {
        lower.push(-full_rhs[fr.lower]);
        upper.push(full_rhs[fr.upper]);
    }
    BoundedLp {
        a,
        rhs,
        cost,
        lower,
        upper,
    }
}

/// Maps nonbasic simplex columns to polytope rows.
fn basis_rows(poly: &Polytope, states: &[VarState]) -> Vec<usize> {
    let ng = poly.n_gen();
    let mut rows = Vec::with_capacity(ng.saturating_sub(1));
    for (j, state) in states.iter().enumerate() {
        let row = match (*state, j < ng) {
            (VarState::AtUpper, true) => poly.row_of(RowKind::GenUpper(j)),
            (VarState::AtLower, true) => poly.row_of(RowKind::GenLower(j)),
            (VarState::AtUpper, false) => Some(poly.flow_rows[j - ng].upper),
            (VarState::AtLower, false) => Some(poly.flow_rows[j - ng].lower),
            _ => None,
        };
        if let Some(r) = row {
            rows.push(r);
        }
    }
    rows
}

pub fn solve_dcopf(poly: &Polytope, omega: &[f64]) -> Result<OptimalPoint, DcopfError> {
    solve_dcopf_with(poly, omega, &SimplexOptions::default())
}

pub fn solve_dcopf_with(
    poly: &Polytope,
    omega: &[f64],
    opts: &SimplexOptions,
) -> Result<OptimalPoint, DcopfError> {
    poly.check_omega(omega)?;
    let lp = build_lp(poly, omega);
    let sol = simplex::solve(&lp, opts);
    let ng = poly.n_gen();
    let not_optimal = |status| OptimalPoint {
        status,
        p_star: Vec::new(),
        cost: f64::NAN,
        active_set: None,
    };
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(not_optimal(SolveStatus::Infeasible)),
        LpStatus::Unbounded => return Ok(not_optimal(SolveStatus::Unbounded)),
        other => return Err(DcopfError::Solver(other)),
    }
    let p_star = sol.x[..ng].to_vec();
    let hint = basis_rows(poly, &sol.states);
    let active_set = extract_active_set(poly, &p_star, omega, Some(&hint))?;
    let cost = p_star.iter().zip(&poly.cost).map(|(p, c)| p * c).sum();
    Ok(OptimalPoint {
        status: SolveStatus::Optimal,
        p_star,
        cost,
        active_set: Some(active_set),
    })
}
