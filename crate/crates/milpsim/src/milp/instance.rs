//! MILP instance representation and assignment evaluation.

use thiserror::Error;

/// Relation between a constraint row's left-hand side and its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

impl Sense {
    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Ge => "GE",
            Sense::Le => "LE",
            Sense::Eq => "EQ",
        }
    }
}

/// Domain of a decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Binary => "BINARY",
            VarKind::Integer => "INTEGER",
            VarKind::Continuous => "CONTINUOUS",
        }
    }
}

/// A minimization MILP: min c'x subject to Ax {>=,<=,=} b with per-variable
/// kinds and bounds. The constraint matrix is stored as (row, col, value)
/// triples sorted by (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub name: String,
    pub objective: Vec<f64>,
    pub constraints: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub senses: Vec<Sense>,
    pub var_kinds: Vec<VarKind>,
    pub var_bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("InvalidShape: need at least one variable, senses/rhs lengths must match")]
    InvalidShape,
    #[error("IndexOutOfRange: entry ({0}, {1}) outside {2} rows x {3} cols")]
    IndexOutOfRange(usize, usize, usize, usize),
    #[error("DuplicateEntry: coefficient ({0}, {1}) appears twice")]
    DuplicateEntry(usize, usize),
    #[error("BoundOrder: variable {0} has lower {1} > upper {2}")]
    BoundOrder(usize, f64, f64),
    #[error("BinaryBounds: variable {0} is binary but bounded [{1}, {2}]")]
    BinaryBounds(usize, f64, f64),
    #[error("DimensionMismatch: assignment has {0} values, instance has {1} variables")]
    DimensionMismatch(usize, usize),
}

impl MilpInstance {
    /// Validates all structural invariants and returns the instance with its
    /// coefficient triples in canonical (row, col) order.
    pub fn new(
        name: impl Into<String>,
        objective: Vec<f64>,
        mut constraints: Vec<(usize, usize, f64)>,
        rhs: Vec<f64>,
        senses: Vec<Sense>,
        var_kinds: Vec<VarKind>,
        var_bounds: Vec<(f64, f64)>,
    ) -> Result<Self, InstanceError> {
        let n = objective.len();
        let m = rhs.len();
        if n == 0
            || senses.len() != m
            || var_kinds.len() != n
            || var_bounds.len() != n
        {
            return Err(InstanceError::InvalidShape);
        }
        constraints.sort_by_key(|&(r, c, _)| (r, c));
        for w in constraints.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(InstanceError::DuplicateEntry(w[0].0, w[0].1));
            }
        }
        for &(r, c, _) in &constraints {
            if r >= m || c >= n {
                return Err(InstanceError::IndexOutOfRange(r, c, m, n));
            }
        }
        for (j, &(lo, up)) in var_bounds.iter().enumerate() {
            if lo > up {
                return Err(InstanceError::BoundOrder(j, lo, up));
            }
            if var_kinds[j] == VarKind::Binary && (lo < 0.0 || up > 1.0) {
                return Err(InstanceError::BinaryBounds(j, lo, up));
            }
        }
        Ok(MilpInstance {
            name: name.into(),
            objective,
            constraints,
            rhs,
            senses,
            var_kinds,
            var_bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn nnz(&self) -> usize {
        self.constraints.len()
    }

    /// Number of integer-restricted variables (the p of the formulation).
    pub fn num_integral(&self) -> usize {
        self.var_kinds.iter().filter(|k| k.is_integral()).count()
    }

    /// Content hash of the canonical serialization; the instance identity
    /// used by cost tables and the config store.
    pub fn instance_id(&self) -> String {
        crate::numeric::content_hash(crate::milp::mps::write_mps(self).as_bytes())
    }

    /// Row activities Ax for a full assignment.
    pub fn row_activity(&self, values: &[f64]) -> Vec<f64> {
        let mut activity = vec![0.0; self.num_constraints()];
        for &(r, c, a) in &self.constraints {
            activity[r] += a * values[c];
        }
        activity
    }
}

/// A candidate assignment of all decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<f64>,
}

impl Assignment {
    pub fn new(values: Vec<f64>) -> Self {
        Assignment { values }
    }
}

/// Outcome of checking an assignment against an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub cost: f64,
    pub max_violation: f64,
    pub integrality_ok: bool,
}

/// Default tolerance for both constraint feasibility and integrality.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Scores an assignment: exact objective dot product, worst constraint/bound
/// violation, and integrality of the integer-kind variables.
pub fn evaluate_assignment(
    instance: &MilpInstance,
    assignment: &Assignment,
    tol: f64,
) -> Result<FeasibilityReport, InstanceError> {
    let x = &assignment.values;
    if x.len() != instance.num_vars() {
        return Err(InstanceError::DimensionMismatch(
            x.len(),
            instance.num_vars(),
        ));
    }
    let mut cost = 0.0;
    for (c, v) in instance.objective.iter().zip(x) {
        cost += c * v;
    }
    let activity = instance.row_activity(x);
    let mut max_violation: f64 = 0.0;
    for (i, (&act, &b)) in activity.iter().zip(&instance.rhs).enumerate() {
        let v = match instance.senses[i] {
            Sense::Ge => (b - act).max(0.0),
            Sense::Le => (act - b).max(0.0),
            Sense::Eq => (act - b).abs(),
        };
        max_violation = max_violation.max(v);
    }
    for (j, &(lo, up)) in instance.var_bounds.iter().enumerate() {
        max_violation = max_violation.max(lo - x[j]).max(x[j] - up);
    }
    let integrality_ok = instance
        .var_kinds
        .iter()
        .zip(x)
        .all(|(k, &v)| !k.is_integral() || (v - v.round()).abs() <= tol);
    Ok(FeasibilityReport {
        feasible: max_violation <= tol && integrality_ok,
        cost,
        max_violation,
        integrality_ok,
    })
}
