//! Sparse linear programs solved with the Clarabel interior-point method.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

/// One sparse row `sum coeff * x[index]`.
pub type Row = Vec<(usize, f64)>;

/// `minimize c^T x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub` and per
/// variable bounds.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq: Vec<(Row, f64)>,
    pub ub: Vec<(Row, f64)>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// A program over `n` free variables with zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            eq: Vec::new(),
            ub: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// Solved to reduced accuracy.
    Inaccurate,
}

/// Primal point, objective and multipliers with `c + A_eq^T y + A_ub^T z + bound terms = 0`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub eq_duals: Vec<f64>,
    /// Nonnegative multipliers of the `<=` rows.
    pub ub_duals: Vec<f64>,
}

pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    if lp.lower.len() != n || lp.upper.len() != n {
        return Err(Error::InvalidParameter(
            "bound vectors do not match the variable count".into(),
        ));
    }
    let finite = lp.objective.iter().all(|v| v.is_finite())
        && lp
            .eq
            .iter()
            .chain(&lp.ub)
            .all(|(row, b)| b.is_finite() && row.iter().all(|&(j, v)| j < n && v.is_finite()));
    if !finite {
        return Err(Error::InvalidParameter(
            "LP data must be finite and in range".into(),
        ));
    }

    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut push = |row: &Row, rhs: f64, b: &mut Vec<f64>| {
        let i = b.len();
        for &(j, v) in row {
            ii.push(i);
            jj.push(j);
            vv.push(v);
        }
        b.push(rhs);
    };
    for (row, rhs) in &lp.eq {
        push(row, *rhs, &mut b);
    }
    for (row, rhs) in &lp.ub {
        push(row, *rhs, &mut b);
    }
    for j in 0..n {
        if let Some(lo) = lp.lower[j] {
            push(&vec![(j, -1.0)], -lo, &mut b);
        }
        if let Some(hi) = lp.upper[j] {
            push(&vec![(j, 1.0)], hi, &mut b);
        }
    }
    let rows = b.len();
    let a = CscMatrix::new_from_triplets(rows, n, ii, jj, vv);
    let p = CscMatrix::zeros((n, n));
    let mut cones = Vec::new();
    if !lp.eq.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(lp.eq.len()));
    }
    if rows > lp.eq.len() {
        cones.push(SupportedConeT::NonnegativeConeT(rows - lp.eq.len()));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .map_err(|e| Error::LpFailed(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &lp.objective, &a, &b, &cones, settings)
        .map_err(|e| Error::LpFailed(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => LpStatus::Optimal,
        SolverStatus::AlmostSolved => LpStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            return Err(Error::LpInfeasible)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            return Err(Error::LpUnbounded)
        }
        other => return Err(Error::LpFailed(format!("{other:?}"))),
    };
    let m_eq = lp.eq.len();
    let m_ub = lp.ub.len();
    Ok(LpSolution {
        status,
        objective: lp.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum(),
        x: sol.x.clone(),
        eq_duals: sol.z[..m_eq].to_vec(),
        ub_duals: sol.z[m_eq..m_eq + m_ub].to_vec(),
    })
}
