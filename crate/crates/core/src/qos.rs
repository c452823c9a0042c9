//! Per-commodity rate floors as soft constraints: the solver maximizes the
//! min-rate of the unconstrained commodities minus the weighted total
//! violation `sum alpha_q` of the floors.

use crate::admm::AdmmParams;
use crate::error::{Error, Result};
use crate::maxmin::{n_maxmin_solve, run_outer, DemandSpec, OuterParams, SolveReport};
use crate::model::Instance;

#[derive(Clone, Debug, PartialEq)]
pub struct QosSpec {
    /// Floor of every commodity in nats/s; `None` puts it in the max-min set.
    pub floors: Vec<Option<f64>>,
    /// Weight of the total violation.
    pub weight: f64,
}

impl QosSpec {
    /// No floors: the plain max-min problem.
    pub fn none(num_commodities: usize) -> Self {
        Self {
            floors: vec![None; num_commodities],
            weight: 1.0,
        }
    }

    /// Floors taken from the commodity demands of the instance.
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            floors: inst.commodities().iter().map(|c| c.demand).collect(),
            weight: 1.0,
        }
    }

    pub fn with_floor(mut self, commodity: usize, floor: f64) -> Self {
        self.floors[commodity] = Some(floor);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.floors.iter().all(Option::is_none)
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.floors.len() != inst.num_commodities() {
            return Err(Error::InvalidParameter(format!(
                "{} floors for {} commodities",
                self.floors.len(),
                inst.num_commodities()
            )));
        }
        if let Some(m) = self
            .floors
            .iter()
            .position(|f| f.is_some_and(|v| !(v >= 0.0 && v.is_finite())))
        {
            return Err(Error::InvalidParameter(format!(
                "floor of commodity {m} must be finite and nonnegative"
            )));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidParameter(
                "violation weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Solves the soft-floor problem. Returns the report and the violations in
/// rate units (also stored in `report.alpha`). An empty floor set runs the
/// plain max-min solver, so its report matches that solver exactly.
pub fn qos_solve(
    inst: &Instance,
    spec: &QosSpec,
    outer: &OuterParams,
    admm: &AdmmParams,
) -> Result<(SolveReport, Vec<f64>)> {
    spec.validate(inst)?;
    if spec.is_empty() {
        let report = n_maxmin_solve(inst, outer, admm)?;
        return Ok((report, vec![0.0; inst.num_commodities()]));
    }
    let unit = inst.rate_unit();
    let demands = DemandSpec {
        floors: spec.floors.iter().map(|f| f.map(|v| v / unit)).collect(),
        weight: spec.weight,
    };
    let run = run_outer(inst, outer, admm, Some(demands))?;
    let alpha = run.state.alpha.clone();
    Ok((run.report, alpha))
}

/// Largest `alpha_q * |r_q + alpha_q - floor_q|` over the floored commodities,
/// in rate units.
pub fn complementarity_residual(inst: &Instance, spec: &QosSpec, report: &SolveReport) -> f64 {
    let alpha = match &report.alpha {
        Some(a) => a,
        None => return 0.0,
    };
    let unit = inst.rate_unit();
    spec.floors
        .iter()
        .enumerate()
        .filter_map(|(q, f)| f.map(|v| (q, v / unit)))
        .map(|(q, floor)| alpha[q] * (report.flow.commodity_rates[q] + alpha[q] - floor).abs())
        .fold(0.0, f64::max)
}
