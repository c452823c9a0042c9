//! Outer loop: alternate closed-form receiver updates with inner solves of the
//! `(r, p)` block, then check stationarity of the result.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admm::{
    admm_iterate, build_layout, AdmmOutcome, AdmmParams, AdmmProblem, AdmmState, AdmmStatus,
    DemandTerms, StackingLayout, WirelessMode,
};
use crate::error::{Error, Result};
use crate::model::{
    validate_flow, Complex, FlowState, Instance, LinkKind, NodeId, PrecoderState, ValidationReport,
};
use crate::parallel;
use crate::wmmse::{
    all_coefficients, mse_coefficients, surrogate_rate, update_receivers, ReceiverState,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterParams {
    pub max_outer: usize,
    /// Relative change of `r + rhat` between outer iterations.
    pub obj_tol: f64,
    /// Bound on the stacked primal residuals at the end of an inner solve.
    pub res_tol: f64,
    /// Number of leading outer iterations run with `warmup_cap` inner iterations.
    pub warmup_outer: usize,
    pub warmup_cap: usize,
    /// Stop only when both tests pass; otherwise either one suffices.
    pub require_both: bool,
}

impl Default for OuterParams {
    fn default() -> Self {
        Self {
            max_outer: 100,
            obj_tol: 1e-3,
            res_tol: 5e-4,
            warmup_outer: 5,
            warmup_cap: 500,
            require_both: true,
        }
    }
}

impl OuterParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter(
                "max_outer must be at least 1".into(),
            ));
        }
        for (name, v) in [("obj_tol", self.obj_tol), ("res_tol", self.res_tol)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.warmup_outer > 0 && self.warmup_cap == 0 {
            return Err(Error::InvalidParameter(
                "warmup_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Initialization {
    pub flow: FlowState,
    pub precoders: PrecoderState,
    pub warnings: Vec<String>,
}

/// Zero flows and uniform, zero-phase power over each base station's links.
pub fn initialize(inst: &Instance) -> Initialization {
    let mut p = PrecoderState::zeros(inst.num_wireless());
    let mut warnings = Vec::new();
    for bs in inst.base_stations() {
        let (a, b) = inst.bs_wireless_range(bs);
        if b == a {
            continue;
        }
        let budget = inst.power_budget(bs);
        if budget <= 0.0 {
            warnings.push(format!(
                "base station {} has no power budget; its precoders stay at zero",
                inst.topology().name(bs)
            ));
            continue;
        }
        let amp = (budget / (b - a) as f64).sqrt();
        for x in &mut p.0[a..b] {
            *x = Complex::new(amp, 0.0);
        }
    }
    Initialization {
        flow: FlowState::zeros(inst.num_links(), inst.num_commodities()),
        precoders: p,
        warnings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRow {
    pub outer_iter: usize,
    pub inner_iters: usize,
    /// Min-rate `r` in rate units after this outer iteration.
    pub objective: f64,
    pub r_residual: f64,
    pub p_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings {
    pub total_secs: f64,
    pub inner_secs: Vec<f64>,
}

/// Result of a solve. Rates are in rate units; `min_rate_nats` is in nats/s.
///
/// Wall-clock timings are kept out of the serialized form so that identical
/// runs serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub min_rate: f64,
    pub min_rate_nats: f64,
    pub rate_unit: f64,
    pub outer: Vec<OuterRow>,
    pub flow: FlowState,
    pub precoders: PrecoderState,
    /// Demand violation per commodity in rate units, for QoS solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    pub validation: ValidationReport,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

impl SolveReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("outer_iter,inner_iters,objective,r_residual,p_residual\n");
        for r in &self.outer {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e}\n",
                r.outer_iter, r.inner_iters, r.objective, r.r_residual, r.p_residual
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Everything a finished outer loop leaves behind.
#[derive(Clone, Debug)]
pub struct MaxMinRun {
    pub report: SolveReport,
    pub state: AdmmState,
    pub receivers: ReceiverState,
    pub layout: StackingLayout,
}

/// Soft demands in rate units for the QoS variant of the outer loop.
#[derive(Clone, Debug)]
pub(crate) struct DemandSpec {
    pub floors: Vec<Option<f64>>,
    pub weight: f64,
}

pub fn n_maxmin_solve(
    inst: &Instance,
    outer: &OuterParams,
    admm: &AdmmParams,
) -> Result<SolveReport> {
    Ok(n_maxmin_run(inst, outer, admm)?.report)
}

pub fn n_maxmin_run(inst: &Instance, outer: &OuterParams, admm: &AdmmParams) -> Result<MaxMinRun> {
    run_outer(inst, outer, admm, None)
}

pub(crate) fn run_outer(
    inst: &Instance,
    outer: &OuterParams,
    admm: &AdmmParams,
    demands: Option<DemandSpec>,
) -> Result<MaxMinRun> {
    outer.validate()?;
    admm.validate()?;
    if inst.num_commodities() == 0 {
        return Err(Error::InvalidParameter(
            "the instance has no commodities".into(),
        ));
    }
    let start = Instant::now();
    let layout = build_layout(inst);
    let init = initialize(inst);
    if inst.num_wireless() > 0 && init.precoders.0.iter().all(|p| p.norm_sqr() == 0.0) {
        return Err(Error::ZeroPrecoderStart);
    }
    let mut state = AdmmState::new(&layout, init.flow, init.precoders)?;
    let mut rows = Vec::new();
    let mut inner_secs = Vec::new();
    let mut status = SolveStatus::IterationCap;

    let receivers = parallel::run(admm.workers, || {
        let mut prev_sum: Option<f64> = None;
        let mut rx = update_receivers(inst, &state.precoders)?;
        for t in 1..=outer.max_outer {
            if t > 1 {
                rx = update_receivers(inst, &state.precoders)?;
            }
            let coeffs = all_coefficients(inst, &rx)?;
            let problem = AdmmProblem {
                instance: inst,
                layout: &layout,
                wireless: WirelessMode::Joint(&coeffs),
                demands: demands.as_ref().map(|d| DemandTerms {
                    floors: &d.floors,
                    weight: d.weight,
                }),
            };
            let cap = if t <= outer.warmup_outer {
                outer.warmup_cap.min(admm.max_iters)
            } else {
                admm.max_iters
            };
            let tic = Instant::now();
            let out = admm_iterate(&problem, &mut state, admm, cap)?;
            inner_secs.push(tic.elapsed().as_secs_f64());
            rows.push(OuterRow {
                outer_iter: t,
                inner_iters: out.iterations,
                objective: state.flow.min_rate,
                r_residual: out.r_residual,
                p_residual: out.p_residual,
            });
            let sum = outer_value(&problem, &state);
            let rel = match prev_sum {
                None => f64::INFINITY,
                Some(p) if p == sum => 0.0,
                Some(p) => (sum - p).abs() / p.abs(),
            };
            prev_sum = Some(sum);
            let objective_ok = rel < outer.obj_tol;
            let residual_ok = out.r_residual.max(out.p_residual) < outer.res_tol;
            let stop = if outer.require_both {
                objective_ok && residual_ok
            } else {
                objective_ok || residual_ok
            };
            if stop {
                status = SolveStatus::Converged;
                break;
            }
        }
        Ok(rx)
    })?;

    let validation = validate_flow(inst, &state.flow, &state.precoders)?;
    let kkt = if demands.is_none() {
        let mult = LagrangeMultipliers::from_state(&layout, &state);
        Some(kkt_residual(
            inst,
            &state.flow,
            &state.precoders,
            &receivers,
            &mult,
        )?)
    } else {
        None
    };
    let report = SolveReport {
        status,
        min_rate: state.flow.min_rate,
        min_rate_nats: state.flow.min_rate * inst.rate_unit(),
        rate_unit: inst.rate_unit(),
        outer: rows,
        flow: state.flow.clone(),
        precoders: state.precoders.clone(),
        alpha: demands.as_ref().map(|_| state.alpha.clone()),
        kkt_residual: kkt,
        validation,
        warnings: init.warnings,
        timings: Timings {
            total_secs: start.elapsed().as_secs_f64(),
            inner_secs,
        },
    };
    Ok(MaxMinRun {
        report,
        state,
        receivers,
        layout,
    })
}

/// Value tracked by the outer stopping test: `r + rhat`, less the violation
/// penalty when demands are present.
fn outer_value(problem: &AdmmProblem<'_>, state: &AdmmState) -> f64 {
    2.0 * crate::admm::objective(problem, state)
}

/// Routing with every wireless capacity fixed.
#[derive(Clone, Debug)]
pub struct RoutingRun {
    pub flow: FlowState,
    pub outcome: AdmmOutcome,
    pub state: AdmmState,
}

/// Max-min routing with fixed wireless capacities `caps` (rate units).
pub fn solve_routing(inst: &Instance, caps: &[f64], admm: &AdmmParams) -> Result<RoutingRun> {
    admm.validate()?;
    if inst.num_commodities() == 0 {
        return Err(Error::InvalidParameter(
            "the instance has no commodities".into(),
        ));
    }
    let layout = build_layout(inst);
    let flow = FlowState::zeros(inst.num_links(), inst.num_commodities());
    let mut state = AdmmState::new(&layout, flow, PrecoderState::zeros(inst.num_wireless()))?;
    let outcome = parallel::run(admm.workers, || {
        let problem = AdmmProblem {
            instance: inst,
            layout: &layout,
            wireless: WirelessMode::Fixed(caps),
            demands: None,
        };
        admm_iterate(&problem, &mut state, admm, admm.max_iters)
    })?;
    Ok(RoutingRun {
        flow: state.flow.clone(),
        outcome,
        state,
    })
}

impl AdmmOutcome {
    pub fn converged(&self) -> bool {
        self.status == AdmmStatus::Converged
    }
}

/// Lagrange multipliers of the joint problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeMultipliers {
    /// Capacity or rate-MSE multiplier per unified link.
    pub link: Vec<f64>,
    /// Conservation multiplier per `(node, commodity)`, node-major.
    pub node: Vec<f64>,
    /// Power-budget multiplier per base station.
    pub power: Vec<(NodeId, f64)>,
}

impl LagrangeMultipliers {
    /// Reads the multipliers off the last inner iteration.
    pub fn from_state(layout: &StackingLayout, state: &AdmmState) -> Self {
        Self {
            link: state.multipliers.link.clone(),
            node: state.multipliers.node.clone(),
            power: layout
                .stations
                .iter()
                .zip(&state.multipliers.station)
                .map(|(s, &e)| (s.0, e))
                .collect(),
        }
    }
}

/// Largest violation of the first-order conditions of the joint problem at
/// `(flow, precoders)` with receivers `rx` and multipliers `mult`.
pub fn kkt_residual(
    inst: &Instance,
    flow: &FlowState,
    precoders: &PrecoderState,
    rx: &ReceiverState,
    mult: &LagrangeMultipliers,
) -> Result<f64> {
    Ok(kkt_breakdown(inst, flow, precoders, rx, mult)?.worst())
}

/// Per-family breakdown of [`kkt_residual`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktBreakdown {
    pub precoder_stationarity: f64,
    pub receiver: f64,
    pub weight: f64,
    pub normalization: f64,
    pub endpoint_balance: f64,
    pub link_balance: f64,
    pub complementarity: f64,
    pub primal: f64,
}

impl KktBreakdown {
    pub fn worst(&self) -> f64 {
        [
            self.precoder_stationarity,
            self.receiver,
            self.weight,
            self.normalization,
            self.endpoint_balance,
            self.link_balance,
            self.complementarity,
            self.primal,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn kkt_breakdown(
    inst: &Instance,
    flow: &FlowState,
    precoders: &PrecoderState,
    rx: &ReceiverState,
    mult: &LagrangeMultipliers,
) -> Result<KktBreakdown> {
    let mc = inst.num_commodities();
    let nl = inst.num_links();
    let nw = inst.num_wireless();
    if mult.link.len() != nl {
        return Err(Error::MissingMultipliers(format!(
            "{} link multipliers for {nl} links",
            mult.link.len()
        )));
    }
    if mult.node.len() != inst.num_nodes() * mc {
        return Err(Error::MissingMultipliers(
            "conservation multipliers do not cover every node".into(),
        ));
    }
    if rx.u.len() != nw || rx.w.len() != nw {
        return Err(Error::MissingMultipliers(
            "receivers do not cover every wireless link".into(),
        ));
    }
    inst.check_flow_dims(flow)?;
    inst.check_precoder_dims(precoders)?;
    let mut eps = vec![0.0; inst.num_nodes()];
    for &(bs, e) in &mult.power {
        if bs.0 >= eps.len() {
            return Err(Error::MissingMultipliers(format!(
                "power multiplier for unknown node {bs}"
            )));
        }
        eps[bs.0] = e;
    }
    let neg = |x: f64| (-x).max(0.0);
    let p = &precoders.0;
    let mut k = KktBreakdown::default();
    let coeffs: Vec<_> = (0..nw)
        .map(|l| mse_coefficients(inst, rx.u[l], rx.w[l], l))
        .collect::<Result<_>>()?;
    let theta_w = |l: usize| mult.link[inst.wireless_link_index(l)];

    for n in 0..nw {
        let bs = inst.wireless_link(n).bs;
        let own = theta_w(n) * coeffs[n].c2.conj() * 0.5;
        let mut quad = 0.0;
        for &(l, j) in inst.victims(n)? {
            quad += theta_w(l) * coeffs[l].c3[j];
        }
        let g = own - p[n] * (quad + eps[bs.0]);
        k.precoder_stationarity = k.precoder_stationarity.max(g.norm());

        let set = inst.interference_set(n)?;
        let total: f64 = set
            .iter()
            .map(|it| it.gain_sq * p[it.link].norm_sqr())
            .sum::<f64>()
            + inst.noise_of_link(n);
        let hp = inst.direct_gain(n) * p[n];
        let th = theta_w(n).abs();
        k.receiver = k.receiver.max(th * (rx.u[n] * total - hp).norm());
        let e = 1.0 - 2.0 * (rx.u[n].conj() * hp).re + rx.u[n].norm_sqr() * total;
        k.weight = k.weight.max(th * (1.0 / rx.w[n] - e).abs());
    }

    let kappa = |v: NodeId, m: usize| mult.node[v.0 * mc + m];
    let mut sum_delta = 0.0;
    for (m, c) in inst.commodities().iter().enumerate() {
        let d = kappa(c.dest, m) - kappa(c.source, m);
        sum_delta += d;
        k.endpoint_balance = k.endpoint_balance.max(neg(d));
        k.complementarity = k
            .complementarity
            .max((d * (flow.commodity_rates[m] - flow.min_rate)).abs());
        k.primal = k.primal.max(neg(flow.commodity_rates[m] - flow.min_rate));
    }
    let d0 = sum_delta - 1.0;
    k.normalization = neg(d0).max((d0 * flow.min_rate).abs());
    k.primal = k.primal.max(neg(flow.min_rate));

    for (l, link) in inst.links().iter().enumerate() {
        let th = mult.link[l];
        k.complementarity = k.complementarity.max(neg(th));
        let rates = &flow.link_rates[l * mc..(l + 1) * mc];
        for (m, &r) in rates.iter().enumerate() {
            let mu = th + kappa(link.source, m) - kappa(link.dest, m);
            k.link_balance = k.link_balance.max(neg(mu));
            k.complementarity = k.complementarity.max((mu * r).abs());
            k.primal = k.primal.max(neg(r));
        }
        let load: f64 = rates.iter().sum();
        let cap = match link.kind {
            LinkKind::Wired { capacity } => capacity,
            LinkKind::Wireless { index } => surrogate_rate(inst, &coeffs[index], precoders, index)?,
        };
        k.complementarity = k.complementarity.max((th * (cap - load)).abs());
        k.primal = k.primal.max(neg(cap - load));
    }
    for bs in inst.base_stations() {
        let (a, b) = inst.bs_wireless_range(bs);
        let used: f64 = p[a..b].iter().map(|x| x.norm_sqr()).sum();
        let slack = inst.power_budget(bs) - used;
        k.complementarity = k
            .complementarity
            .max(neg(eps[bs.0]))
            .max((eps[bs.0] * slack).abs());
        k.primal = k.primal.max(neg(slack));
    }
    let v = validate_flow(inst, flow, precoders)?;
    k.primal = k.primal.max(v.conservation.abs());
    Ok(k)
}
