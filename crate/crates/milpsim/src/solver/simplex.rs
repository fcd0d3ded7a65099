//! Dense bounded-variable primal simplex with Bland's pivot rule.
//!
//! Two phases: phase 1 drives artificial variables (added only on rows whose
//! slack cannot absorb the initial residual) to zero, phase 2 minimizes the
//! real objective. Bland's smallest-index rule everywhere makes the method
//! anti-cycling and fully deterministic. Intended for desk-scale instances;
//! no factorization, the full tableau is updated on every pivot.

use thiserror::Error;

use crate::milp::instance::{MilpInstance, Sense};

const REDUCED_COST_TOL: f64 = 1e-9;
const RATIO_TOL: f64 = 1e-12;
const PIVOT_MIN: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// Vertex solution over the structural variables and its objective.
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("NumericalBreakdown: {0}")]
    NumericalBreakdown(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variable parked at zero.
    FreeAtZero,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major B^-1 * A over every column.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    /// Current value of every variable (basic or at its nonbasic position).
    value: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.cols + c]
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        for r in 0..self.rows {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                d -= cb * self.at(r, j);
            }
        }
        d
    }

    /// Smallest-index nonbasic variable with a favorable reduced cost,
    /// together with its movement direction (+1 up, -1 down).
    fn entering(&self) -> Option<(usize, f64)> {
        for j in 0..self.cols {
            let state = self.state[j];
            if matches!(state, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            match state {
                VarState::AtLower if d < -REDUCED_COST_TOL => return Some((j, 1.0)),
                VarState::AtUpper if d > REDUCED_COST_TOL => return Some((j, -1.0)),
                VarState::FreeAtZero if d < -REDUCED_COST_TOL => return Some((j, 1.0)),
                VarState::FreeAtZero if d > REDUCED_COST_TOL => return Some((j, -1.0)),
                _ => {}
            }
        }
        None
    }

    /// One simplex step. Ok(true) = pivoted or flipped, Ok(false) = optimal.
    fn step(&mut self) -> Result<bool, LpError> {
        let (q, dir) = match self.entering() {
            Some(e) => e,
            None => return Ok(false),
        };

        // Ratio test: largest t >= 0 such that every basic variable stays
        // inside its bounds and q stays inside its own.
        let own_span = self.upper[q] - self.lower[q];
        let mut t_best = if own_span.is_finite() { own_span } else { f64::INFINITY };
        let mut leave: Option<usize> = None; // row index
        for r in 0..self.rows {
            let coeff = dir * self.at(r, q);
            if coeff.abs() <= RATIO_TOL {
                continue;
            }
            let b = self.basis[r];
            let limit = if coeff > 0.0 {
                if self.lower[b] == f64::NEG_INFINITY {
                    continue;
                }
                ((self.value[b] - self.lower[b]) / coeff).max(0.0)
            } else {
                if self.upper[b] == f64::INFINITY {
                    continue;
                }
                ((self.value[b] - self.upper[b]) / coeff).max(0.0)
            };
            // Bland tie-break: smallest basic variable index among blockers.
            if limit < t_best - RATIO_TOL
                || (limit < t_best + RATIO_TOL
                    && leave.is_some_and(|lr| b < self.basis[lr]))
            {
                t_best = limit.max(0.0);
                leave = Some(r);
            }
        }

        if t_best == f64::INFINITY {
            return Err(LpError::NumericalBreakdown("unbounded direction"));
        }

        match leave {
            None => {
                // Bound flip: q runs to its opposite bound, basis unchanged.
                for r in 0..self.rows {
                    let coeff = dir * self.at(r, q);
                    let b = self.basis[r];
                    self.value[b] -= coeff * t_best;
                }
                self.value[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
            }
            Some(r) => {
                let pivot = self.at(r, q);
                if pivot.abs() < PIVOT_MIN {
                    return Err(LpError::NumericalBreakdown("pivot magnitude below 1e-11"));
                }
                // Move values.
                for row in 0..self.rows {
                    let coeff = dir * self.at(row, q);
                    let b = self.basis[row];
                    self.value[b] -= coeff * t_best;
                }
                let new_q_value = self.value[q] + dir * t_best;
                // Leaving variable lands exactly on the bound it hit.
                let b_leave = self.basis[r];
                let hit_lower = dir * self.at(r, q) > 0.0;
                self.value[b_leave] = if hit_lower {
                    self.lower[b_leave]
                } else {
                    self.upper[b_leave]
                };
                self.state[b_leave] = if hit_lower {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };

                // Gauss-Jordan update of the tableau on column q.
                let inv = 1.0 / pivot;
                for c in 0..self.cols {
                    self.t[r * self.cols + c] *= inv;
                }
                for row in 0..self.rows {
                    if row == r {
                        continue;
                    }
                    let factor = self.at(row, q);
                    if factor != 0.0 {
                        for c in 0..self.cols {
                            let delta = factor * self.t[r * self.cols + c];
                            self.t[row * self.cols + c] -= delta;
                        }
                    }
                }
                self.basis[r] = q;
                self.state[q] = VarState::Basic(r);
                self.value[q] = new_q_value;
            }
        }

        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(LpError::NumericalBreakdown("pivot limit exceeded"));
        }
        Ok(true)
    }

    fn run(&mut self) -> Result<(), LpError> {
        while self.step()? {}
        Ok(())
    }
}

/// Solves the LP relaxation of `instance` under `local_bounds` (the
/// branch-and-bound node's tightened variable bounds).
pub fn solve_lp_relaxation(
    instance: &MilpInstance,
    local_bounds: &[(f64, f64)],
) -> Result<LpOutcome, LpError> {
    let n = instance.num_vars();
    let m = instance.num_constraints();
    debug_assert_eq!(local_bounds.len(), n);
    for &(lo, up) in local_bounds {
        if lo > up {
            return Ok(LpOutcome::Infeasible);
        }
    }

    // Columns: structurals, then one slack per row, then any artificials.
    // Row i reads  a_i . x + s_i = b_i  with the slack sign encoding the sense.
    let mut lower: Vec<f64> = local_bounds.iter().map(|&(lo, _)| lo).collect();
    let mut upper: Vec<f64> = local_bounds.iter().map(|&(_, up)| up).collect();
    for sense in &instance.senses {
        match sense {
            Sense::Le => {
                lower.push(0.0);
                upper.push(f64::INFINITY);
            }
            Sense::Ge => {
                lower.push(f64::NEG_INFINITY);
                upper.push(0.0);
            }
            Sense::Eq => {
                lower.push(0.0);
                upper.push(0.0);
            }
        }
    }

    // Nonbasic start: every structural parked at a finite bound (or zero if
    // free); slack basic where it can absorb the row residual, an artificial
    // column otherwise.
    let mut state = Vec::with_capacity(n + m);
    let mut value = Vec::with_capacity(n + m);
    for j in 0..n {
        let (lo, up) = (lower[j], upper[j]);
        if lo.is_finite() {
            state.push(VarState::AtLower);
            value.push(lo);
        } else if up.is_finite() {
            state.push(VarState::AtUpper);
            value.push(up);
        } else {
            state.push(VarState::FreeAtZero);
            value.push(0.0);
        }
    }

    let mut residual = instance.rhs.clone();
    for &(r, c, a) in &instance.constraints {
        residual[r] -= a * value[c];
    }

    let mut basis = Vec::with_capacity(m);
    let mut artificial_rows: Vec<(usize, f64)> = Vec::new(); // (row, sign)
    for (i, &res) in residual.iter().enumerate() {
        let s = n + i;
        let (slo, sup) = (lower[s], upper[s]);
        if res >= slo && res <= sup {
            state.push(VarState::Basic(i));
            value.push(res);
            basis.push(s);
        } else {
            let clamped = res.clamp(slo, sup.max(slo));
            state.push(if clamped == slo { VarState::AtLower } else { VarState::AtUpper });
            value.push(clamped);
            let d = res - clamped;
            artificial_rows.push((i, d.signum()));
            basis.push(usize::MAX); // patched below
        }
    }

    let n_art = artificial_rows.len();
    let cols = n + m + n_art;
    let mut t = vec![0.0; m * cols];
    for &(r, c, a) in &instance.constraints {
        t[r * cols + c] = a;
    }
    for i in 0..m {
        t[i * cols + n + i] = 1.0;
    }
    let mut art_values: Vec<f64> = Vec::new();
    for (k, &(row, sign)) in artificial_rows.iter().enumerate() {
        let col = n + m + k;
        t[row * cols + col] = sign;
        lower.push(0.0);
        upper.push(f64::INFINITY);
        let slack = n + row;
        let d = residual[row] - value[slack];
        art_values.push(d * sign); // = |d|
        basis[row] = col;
        state.push(VarState::Basic(row));
    }
    value.extend(art_values);

    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        lower,
        upper,
        cost: vec![0.0; cols],
        state,
        value,
        basis,
        pivots: 0,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for k in 0..n_art {
            tab.cost[n + m + k] = 1.0;
        }
        tab.run()?;
        let infeasibility: f64 = (0..n_art).map(|k| tab.value[n + m + k]).sum();
        if infeasibility > 1e-7 {
            return Ok(LpOutcome::Infeasible);
        }
        // Freeze artificials at zero; fixed variables never re-enter.
        for k in 0..n_art {
            let col = n + m + k;
            tab.upper[col] = 0.0;
            if !matches!(tab.state[col], VarState::Basic(_)) {
                tab.value[col] = 0.0;
                tab.state[col] = VarState::AtLower;
            }
        }
        tab.cost.iter_mut().for_each(|c| *c = 0.0);
    }

    // Phase 2: the real objective.
    tab.cost[..n].copy_from_slice(&instance.objective);
    match tab.run() {
        Ok(()) => {}
        Err(LpError::NumericalBreakdown("unbounded direction")) => {
            return Ok(LpOutcome::Unbounded)
        }
        Err(e) => return Err(e),
    }

    let values: Vec<f64> = tab.value[..n].to_vec();
    let mut objective = 0.0;
    for (c, v) in instance.objective.iter().zip(&values) {
        objective += c * v;
    }
    Ok(LpOutcome::Optimal { values, objective })
}
