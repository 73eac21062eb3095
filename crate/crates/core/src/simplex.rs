//! Bounded-variable revised simplex for
//!
//! ```text
//! minimize cᵀx  subject to  A x = rhs,  lower ≤ x ≤ upper
//! ```
//!
//! Phase 1 starts from an all-artificial basis and minimizes the sum of
//! artificials; any artificial still basic at zero afterwards is pivoted
//! out, so the final basis contains structural columns only and every
//! nonbasic column sits at one of its bounds.
//!
//! Pricing is Dantzig's rule (largest reduced-cost magnitude, lowest column
//! index on ties). After `bland_after` consecutive degenerate pivots it
//! switches to Bland's rule (lowest eligible column, lowest leaving variable
//! index on ratio ties) until a nondegenerate step is taken. The whole
//! procedure is deterministic for a given input.
//!
//! The basis inverse is held explicitly and updated by row operations,
//! with a fresh LU refactorization every `refactor_every` pivots.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, Lu, Matrix};

#[derive(Debug, Clone)]
pub struct BoundedLp {
    pub a: Matrix,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    /// Relative to the largest cost magnitude.
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_every: usize,
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-11,
            pivot_tol: 1e-9,
            max_iterations: 50_000,
            refactor_every: 64,
            bland_after: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic column per row, structural columns only when `status` is `Optimal`.
    pub basis: Vec<usize>,
    pub states: Vec<VarState>,
    pub iterations: usize,
}

const TIE_EPS: f64 = 1e-12;

struct Work<'a> {
    lp: &'a BoundedLp,
    opts: SimplexOptions,
    m: usize,
    n: usize,
    /// sign of each artificial column (`±e_i`)
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    states: Vec<VarState>,
    basis: Vec<usize>,
    binv: Matrix,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Work<'a> {
    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            self.lp.a.column(j)
        } else {
            let mut c = vec![0.0; self.m];
            c[j - self.n] = self.art_sign[j - self.n];
            c
        }
    }

    fn col_dot(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for i in 0..self.m {
                s += y[i] * self.lp.a[(i, j)];
            }
            s
        } else {
            y[j - self.n] * self.art_sign[j - self.n]
        }
    }

    fn refactor(&mut self) -> bool {
        let mut b = Matrix::zeros(self.m, self.m);
        for (r, &j) in self.basis.iter().enumerate() {
            let col = self.column(j);
            for i in 0..self.m {
                b[(i, r)] = col[i];
            }
        }
        match Lu::factor(&b) {
            Ok(lu) => {
                self.binv = lu.inverse();
                self.since_refactor = 0;
                true
            }
            Err(_) => false,
        }
    }

    fn update_basic_values(&mut self) {
        let mut r = self.lp.rhs.clone();
        for j in 0..self.n + self.m {
            if self.states[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                if j < self.n {
                    for i in 0..self.m {
                        r[i] -= self.lp.a[(i, j)] * xj;
                    }
                } else {
                    r[j - self.n] -= self.art_sign[j - self.n] * xj;
                }
            }
        }
        let xb = self.binv.mul_vec(&r);
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
    }

    fn pivot(&mut self, row: usize, alpha: &[f64]) {
        let piv = alpha[row];
        let m = self.m;
        {
            let prow = self.binv.row_mut(row);
            prow.iter_mut().for_each(|v| *v /= piv);
        }
        let prow = self.binv.row(row).to_vec();
        for i in 0..m {
            if i != row && alpha[i] != 0.0 {
                let f = alpha[i];
                let dst = self.binv.row_mut(i);
                for (d, p) in dst.iter_mut().zip(&prow) {
                    *d -= f * p;
                }
            }
        }
        self.since_refactor += 1;
    }

    /// Runs simplex iterations for the given cost vector (length n + m).
    fn iterate(&mut self, cost: &[f64]) -> LpStatus {
        let scale = cost.iter().fold(1.0_f64, |s, c| s.max(c.abs()));
        let opt_tol = self.opts.optimality_tol * scale;
        let mut degenerate_streak = 0usize;
        loop {
            if self.since_refactor >= self.opts.refactor_every && !self.refactor() {
                return LpStatus::NumericalFailure;
            }
            self.update_basic_values();

            let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let y = self.binv.tr_mul_vec(&cb);

            let bland = degenerate_streak >= self.opts.bland_after;
            let mut entering: Option<(usize, f64, f64)> = None; // (j, dir, |d|)
            for j in 0..self.n + self.m {
                let state = self.states[j];
                if state == VarState::Basic {
                    continue;
                }
                let room = self.upper[j] > self.lower[j];
                let d = cost[j] - self.col_dot(&y, j);
                let dir = match state {
                    VarState::AtLower if room && d < -opt_tol => 1.0,
                    VarState::AtUpper if room && d > opt_tol => -1.0,
                    VarState::Free if d.abs() > opt_tol => -d.signum(),
                    _ => continue,
                };
                let better = match entering {
                    None => true,
                    Some((_, _, best)) => !bland && d.abs() > best,
                };
                if better {
                    entering = Some((j, dir, d.abs()));
                }
                if bland && entering.is_some() {
                    break;
                }
            }
            let Some((j, dir, _)) = entering else {
                return LpStatus::Optimal;
            };

            let alpha = self.binv.mul_vec(&self.column(j));
            let mut t_best = self.upper[j] - self.lower[j];
            if !t_best.is_finite() {
                t_best = f64::INFINITY;
            }
            let mut leaving: Option<(usize, bool)> = None; // (row, hits_upper)
            for (i, &a) in alpha.iter().enumerate() {
                let delta = -dir * a;
                let bvar = self.basis[i];
                let (lim, hits_upper) = if delta < -self.opts.pivot_tol {
                    if !self.lower[bvar].is_finite() {
                        continue;
                    }
                    ((self.x[bvar] - self.lower[bvar]) / -delta, false)
                } else if delta > self.opts.pivot_tol {
                    if !self.upper[bvar].is_finite() {
                        continue;
                    }
                    ((self.upper[bvar] - self.x[bvar]) / delta, true)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let take = if lim < t_best - TIE_EPS {
                    true
                } else if lim <= t_best + TIE_EPS {
                    match leaving {
                        None => false,
                        Some((r, _)) => {
                            if bland {
                                bvar < self.basis[r]
                            } else {
                                let (cur, new) = (alpha[r].abs(), a.abs());
                                new > cur || (new == cur && bvar < self.basis[r])
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    t_best = lim;
                    leaving = Some((i, hits_upper));
                }
            }
            if !t_best.is_finite() {
                return LpStatus::Unbounded;
            }

            if t_best <= TIE_EPS {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            match leaving {
                None => {
                    // bound flip
                    self.states[j] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((r, hits_upper)) => {
                    let out = self.basis[r];
                    self.x[j] += dir * t_best;
                    self.pivot(r, &alpha);
                    self.basis[r] = j;
                    self.states[j] = VarState::Basic;
                    if hits_upper && self.upper[out] > self.lower[out] {
                        self.states[out] = VarState::AtUpper;
                        self.x[out] = self.upper[out];
                    } else {
                        self.states[out] = VarState::AtLower;
                        self.x[out] = self.lower[out];
                    }
                }
            }

            self.iterations += 1;
            if self.iterations >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
        }
    }

    /// Replaces basic artificials (at zero after phase 1) by structural columns.
    fn drive_out_artificials(&mut self) -> bool {
        for r in 0..self.m {
            let bj = self.basis[r];
            if bj < self.n {
                continue;
            }
            let rho = self.binv.row(r).to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.states[j] == VarState::Basic {
                    continue;
                }
                let a = self.col_dot(&rho, j);
                if a.abs() > 1e-9 && best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((j, a.abs()));
                }
            }
            let Some((j, _)) = best else {
                // redundant row; leave the artificial basic at zero
                continue;
            };
            let alpha = self.binv.mul_vec(&self.column(j));
            self.pivot(r, &alpha);
            self.basis[r] = j;
            self.states[j] = VarState::Basic;
            self.states[bj] = VarState::AtLower;
            self.x[bj] = 0.0;
        }
        self.basis.iter().all(|&j| j < self.n)
    }
}

pub fn solve(lp: &BoundedLp, opts: &SimplexOptions) -> LpSolution {
    let m = lp.a.rows();
    let n = lp.a.cols();
    assert_eq!(lp.rhs.len(), m);
    assert_eq!(lp.cost.len(), n);
    assert_eq!(lp.lower.len(), n);
    assert_eq!(lp.upper.len(), n);

    let fail = |status| LpSolution {
        status,
        x: vec![0.0; n],
        objective: f64::NAN,
        basis: Vec::new(),
        states: vec![VarState::AtLower; n],
        iterations: 0,
    };
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return fail(LpStatus::Infeasible);
    }

    let mut x = vec![0.0; n + m];
    let mut states = vec![VarState::AtLower; n + m];
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            x[j] = l;
        } else if u.is_finite() {
            x[j] = u;
            states[j] = VarState::AtUpper;
        } else {
            states[j] = VarState::Free;
        }
    }
    let mut resid = lp.rhs.clone();
    for i in 0..m {
        resid[i] -= dot(lp.a.row(i), &x[..n]);
    }
    let art_sign: Vec<f64> = resid
        .iter()
        .map(|r| if *r < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    lower.extend(core::iter::repeat_n(0.0, m));
    upper.extend(core::iter::repeat_n(f64::INFINITY, m));
    let mut binv = Matrix::zeros(m, m);
    for i in 0..m {
        binv[(i, i)] = art_sign[i];
        states[n + i] = VarState::Basic;
        x[n + i] = resid[i].abs();
    }

    let mut w = Work {
        lp,
        opts: *opts,
        m,
        n,
        art_sign,
        lower,
        upper,
        x,
        states,
        basis: (n..n + m).collect(),
        binv,
        iterations: 0,
        since_refactor: 0,
    };

    let mut phase1_cost = vec![0.0; n + m];
    phase1_cost[n..].iter_mut().for_each(|c| *c = 1.0);
    let status = w.iterate(&phase1_cost);
    if status != LpStatus::Optimal {
        return LpSolution {
            status,
            ..fail(status)
        };
    }
    w.update_basic_values();
    let infeas: f64 = w.x[n..].iter().sum();
    let rhs_scale = lp.rhs.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    if infeas > opts.feasibility_tol * rhs_scale * (m.max(1) as f64) {
        return LpSolution {
            iterations: w.iterations,
            ..fail(LpStatus::Infeasible)
        };
    }

    w.drive_out_artificials();
    for i in 0..m {
        w.upper[n + i] = 0.0;
        if w.states[n + i] != VarState::Basic {
            w.x[n + i] = 0.0;
        }
    }
    if !w.refactor() {
        return fail(LpStatus::NumericalFailure);
    }

    let mut phase2_cost = lp.cost.clone();
    phase2_cost.extend(core::iter::repeat_n(0.0, m));
    let status = w.iterate(&phase2_cost);
    w.update_basic_values();

    let xs = w.x[..n].to_vec();
    let objective = dot(&lp.cost, &xs);
    LpSolution {
        status,
        x: xs,
        objective,
        basis: w.basis.clone(),
        states: w.states[..n].to_vec(),
        iterations: w.iterations,
    }
}
