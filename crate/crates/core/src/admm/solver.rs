use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{
    balance_multiplier, consensus_target, dual_step, minrate_in_place, solve_bs_power,
    solve_rhat_scalar, wired_in_place, wireless_in_place, DemandTerms, Endpoint,
};
use super::layout::{SlotSide, StackingLayout};
use crate::error::{Error, Result};
use crate::model::{Complex, FlowState, Instance, LinkKind, PrecoderState};
use crate::parallel;
use crate::wmmse::MseCoefficients;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub rho1: f64,
    pub rho2: f64,
    pub max_iters: usize,
    /// Bound on the stacked primal residuals.
    pub tol: f64,
    /// Bound on the per-iteration change of the second block (dual residual).
    pub change_tol: f64,
    pub bisection_tol: f64,
    pub workers: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho1: 0.1,
            rho2: 0.001,
            max_iters: 2000,
            tol: 5e-4,
            change_tol: 5e-4,
            bisection_tol: super::kernels::BISECTION_TOL,
            workers: 1,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("tol", self.tol),
            ("change_tol", self.change_tol),
            ("bisection_tol", self.bisection_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// How wireless capacities enter the inner problem.
#[derive(Clone, Copy, Debug)]
pub enum WirelessMode<'a> {
    /// Rate-MSE constraints with the given surrogate coefficients; precoders are optimized.
    Joint(&'a MseCoefficients),
    /// Fixed capacity per wireless link in rate units; precoders are left untouched.
    Fixed(&'a [f64]),
}

#[derive(Clone, Copy, Debug)]
pub struct AdmmProblem<'a> {
    pub instance: &'a Instance,
    pub layout: &'a StackingLayout,
    pub wireless: WirelessMode<'a>,
    pub demands: Option<DemandTerms<'a>>,
}

/// Consensus copies; see the layout module for the ordering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitState {
    pub rhat: f64,
    pub rhat_src: Vec<f64>,
    pub rhat_dst: Vec<f64>,
    pub rhat_links: Vec<f64>,
    pub phat: Vec<Complex>,
}

/// Scaled duals of the consensus equalities, shaped like [`SplitState`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub delta: f64,
    pub delta_src: Vec<f64>,
    pub delta_dst: Vec<f64>,
    pub delta_links: Vec<f64>,
    pub theta: Vec<Complex>,
}

/// Multipliers of the hard constraints inside the last block solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMultipliers {
    /// Capacity (wired) or rate-MSE (wireless) multiplier per link.
    pub link: Vec<f64>,
    /// Conservation multiplier per `(node, commodity)`, node-major.
    pub node: Vec<f64>,
    /// Power-budget multiplier per station of the layout.
    pub station: Vec<f64>,
    link_search: Vec<f64>,
    station_search: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub flow: FlowState,
    pub precoders: PrecoderState,
    /// Demand violation per commodity (zero without demands).
    pub alpha: Vec<f64>,
    pub split: SplitState,
    pub duals: DualState,
    pub multipliers: KernelMultipliers,
}

impl AdmmState {
    /// Starts from `flow` and `precoders` with consistent copies and zero duals.
    pub fn new(layout: &StackingLayout, flow: FlowState, precoders: PrecoderState) -> Result<Self> {
        let m = layout.num_commodities;
        if flow.commodity_rates.len() != m || flow.link_rates.len() != m * layout.num_links {
            return Err(
                crate::error::ModelError::Dimension("flow does not match layout".into()).into(),
            );
        }
        if precoders.0.len() != layout.p_stack_len() {
            return Err(crate::error::ModelError::Dimension(
                "precoders do not match layout".into(),
            )
            .into());
        }
        let mut rhat_links = vec![0.0; layout.slots.len() * m];
        for (j, slot) in layout.slots.iter().enumerate() {
            rhat_links[j * m..(j + 1) * m]
                .copy_from_slice(&flow.link_rates[slot.link * m..(slot.link + 1) * m]);
        }
        let split = SplitState {
            rhat: flow.min_rate,
            rhat_src: flow.commodity_rates.clone(),
            rhat_dst: flow.commodity_rates.clone(),
            rhat_links,
            phat: layout.apply_d(&precoders.0),
        };
        let duals = DualState {
            delta: 0.0,
            delta_src: vec![0.0; m],
            delta_dst: vec![0.0; m],
            delta_links: vec![0.0; layout.slots.len() * m],
            theta: vec![Complex::new(0.0, 0.0); layout.phat_stack_len()],
        };
        let multipliers = KernelMultipliers {
            link: vec![0.0; layout.num_links],
            node: vec![0.0; layout.num_nodes * m],
            station: vec![0.0; layout.stations.len()],
            link_search: vec![0.0; layout.num_links],
            station_search: vec![0.0; layout.stations.len()],
        };
        Ok(Self {
            flow,
            precoders,
            alpha: vec![0.0; m],
            split,
            duals,
            multipliers,
        })
    }

    /// `r_stack` in layout order.
    pub fn r_stack(&self) -> Vec<f64> {
        let mut v =
            Vec::with_capacity(1 + self.flow.commodity_rates.len() + self.flow.link_rates.len());
        v.push(self.flow.min_rate);
        v.extend_from_slice(&self.flow.commodity_rates);
        v.extend_from_slice(&self.flow.link_rates);
        v
    }

    /// `rhat_stack` in layout order.
    pub fn rhat_stack(&self) -> Vec<f64> {
        let s = &self.split;
        let mut v = Vec::with_capacity(1 + 2 * s.rhat_src.len() + s.rhat_links.len());
        v.push(s.rhat);
        v.extend_from_slice(&s.rhat_src);
        v.extend_from_slice(&s.rhat_dst);
        v.extend_from_slice(&s.rhat_links);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub r_residual: f64,
    pub p_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace(pub Vec<TraceRow>);

impl ResidualTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,objective,r_residual,p_residual\n");
        for r in &self.0 {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                r.iteration, r.objective, r.r_residual, r.p_residual
            ));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmmStatus {
    Converged,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmOutcome {
    pub status: AdmmStatus,
    pub iterations: usize,
    pub objective: f64,
    pub r_residual: f64,
    pub p_residual: f64,
    pub trace: ResidualTrace,
}

/// Runs the inner solver on its own pool of `params.workers` threads.
pub fn admm_solve(
    problem: &AdmmProblem<'_>,
    state: &mut AdmmState,
    params: &AdmmParams,
) -> Result<AdmmOutcome> {
    params.validate()?;
    parallel::run(params.workers, || {
        admm_iterate(problem, state, params, params.max_iters)
    })
}

/// Inner iterations on the current thread pool, stopping after `max_iters`.
pub(crate) fn admm_iterate(
    problem: &AdmmProblem<'_>,
    state: &mut AdmmState,
    params: &AdmmParams,
    max_iters: usize,
) -> Result<AdmmOutcome> {
    let inst = problem.instance;
    let layout = problem.layout;
    if layout.num_commodities == 0 {
        return Err(Error::InvalidParameter(
            "the inner problem needs at least one commodity".into(),
        ));
    }
    if let WirelessMode::Fixed(caps) = problem.wireless {
        if caps.len() != inst.num_wireless() {
            return Err(crate::error::ModelError::Dimension(
                "fixed capacities do not match wireless links".into(),
            )
            .into());
        }
    }
    if let WirelessMode::Joint(c) = problem.wireless {
        if c.0.len() != inst.num_wireless() {
            return Err(crate::error::ModelError::Dimension(
                "coefficients do not match wireless links".into(),
            )
            .into());
        }
    }
    let mut trace = Vec::with_capacity(max_iters.min(4096));
    let mut scratch = Vec::new();
    let mut outcome = None;
    for it in 1..=max_iters {
        let (r_res, p_res, change) = iteration(problem, state, params, &mut scratch)?;
        let objective = objective(problem, state);
        trace.push(TraceRow {
            iteration: it,
            objective,
            r_residual: r_res,
            p_residual: p_res,
        });
        if r_res < params.tol && p_res < params.tol && change < params.change_tol {
            outcome = Some(AdmmStatus::Converged);
            break;
        }
    }
    let last = *trace.last().expect("at least one iteration");
    Ok(AdmmOutcome {
        status: outcome.unwrap_or(AdmmStatus::IterationCap),
        iterations: last.iteration,
        objective: last.objective,
        r_residual: last.r_residual,
        p_residual: last.p_residual,
        trace: ResidualTrace(trace),
    })
}

fn scalar_active(problem: &AdmmProblem<'_>) -> bool {
    match problem.demands {
        None => true,
        Some(d) => d.floors.iter().any(Option::is_none),
    }
}

/// `(r + rhat) / 2 - weight * sum(alpha)`.
pub(crate) fn objective(problem: &AdmmProblem<'_>, state: &AdmmState) -> f64 {
    let base = 0.5 * (state.flow.min_rate + state.split.rhat);
    match problem.demands {
        None => base,
        Some(d) => base - d.weight * state.alpha.iter().sum::<f64>(),
    }
}

/// One pass of steps 3, 4 and the dual update. Returns the primal residuals
/// and the largest change of the second block.
fn iteration(
    problem: &AdmmProblem<'_>,
    state: &mut AdmmState,
    params: &AdmmParams,
    scratch: &mut Vec<f64>,
) -> Result<(f64, f64, f64)> {
    let inst = problem.instance;
    let layout = problem.layout;
    let mc = layout.num_commodities;
    let (rho1, rho2) = (params.rho1, params.rho2);
    let active = scalar_active(problem);
    let AdmmState {
        flow,
        precoders,
        alpha,
        split,
        duals,
        multipliers,
    } = state;

    // Step 3 (i): min-rate block.
    for m in 0..mc {
        flow.commodity_rates[m] = consensus_target(
            split.rhat_src[m],
            split.rhat_dst[m],
            duals.delta_src[m],
            duals.delta_dst[m],
            rho1,
        );
    }
    flow.min_rate = minrate_in_place(
        split.rhat,
        duals.delta,
        rho1,
        &mut flow.commodity_rates,
        alpha,
        problem.demands,
        scratch,
    );

    // Step 3 (ii)/(iii): link blocks.
    let mut phat_chunks: Vec<&mut [Complex]> = Vec::with_capacity(layout.num_links);
    {
        let mut rest: &mut [Complex] = &mut split.phat;
        for _ in 0..layout.num_wired {
            phat_chunks.push(Default::default());
        }
        for l in 0..inst.num_wireless() {
            let len = layout.phat_off[l + 1] - layout.phat_off[l];
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            phat_chunks.push(head);
            rest = tail;
        }
    }
    let rhat_links = &split.rhat_links;
    let delta_links = &duals.delta_links;
    let theta = &duals.theta;
    let p_now = &precoders.0;
    flow.link_rates
        .par_chunks_mut(mc)
        .zip(multipliers.link.par_iter_mut())
        .zip(multipliers.link_search.par_iter_mut())
        .zip(phat_chunks.into_par_iter())
        .enumerate()
        .try_for_each_init(
            || (Vec::new(), Vec::new()),
            |(buf, weights), (l, (((rates, mult), search), phat))| -> Result<()> {
                let s = layout.link_src_slot[l] * mc;
                let d = layout.link_dst_slot[l] * mc;
                for m in 0..mc {
                    rates[m] = consensus_target(
                        rhat_links[s + m],
                        rhat_links[d + m],
                        delta_links[s + m],
                        delta_links[d + m],
                        rho1,
                    );
                }
                match (inst.links()[l].kind, problem.wireless) {
                    (LinkKind::Wired { capacity }, _) => {
                        let lam = wired_in_place(rates, capacity, buf);
                        *search = lam;
                        *mult = 0.5 * rho1 * lam;
                    }
                    (LinkKind::Wireless { index }, WirelessMode::Fixed(caps)) => {
                        let lam = wired_in_place(rates, caps[index], buf);
                        *search = lam;
                        *mult = 0.5 * rho1 * lam;
                    }
                    (LinkKind::Wireless { index }, WirelessMode::Joint(coeffs)) => {
                        let off = layout.phat_off[index];
                        for (j, x) in phat.iter_mut().enumerate() {
                            let c = off + j;
                            *x = p_now[layout.phat_source[c]] - theta[c] / rho2;
                        }
                        let lam = wireless_in_place(
                            &coeffs.0[index],
                            inst.self_position(index),
                            rates,
                            phat,
                            rho1,
                            rho2,
                            *search,
                            params.bisection_tol,
                            weights,
                        )?;
                        *search = lam;
                        *mult = lam;
                    }
                }
                Ok(())
            },
        )?;

    // Step 4 (i): scalar copy.
    let mut change: f64 = 0.0;
    let new_rhat = if active {
        solve_rhat_scalar(flow.min_rate, duals.delta, rho1)
    } else {
        0.0
    };
    change = change.max((new_rhat - split.rhat).abs());
    split.rhat = new_rhat;

    // Step 4 (ii): conservation at every node and commodity.
    let commodities = &inst.commodities().0;
    let link_rates = &flow.link_rates;
    let commodity_rates = &flow.commodity_rates;
    let delta_src = &duals.delta_src;
    let delta_dst = &duals.delta_dst;
    let mut node_chunks: Vec<&mut [f64]> = Vec::with_capacity(layout.num_nodes);
    {
        let mut rest: &mut [f64] = &mut split.rhat_links;
        for v in 0..layout.num_nodes {
            let len = (layout.node_off[v + 1] - layout.node_off[v]) * mc;
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            node_chunks.push(head);
            rest = tail;
        }
    }
    let node_change = node_chunks
        .into_par_iter()
        .zip(multipliers.node.par_chunks_mut(mc))
        .enumerate()
        .map_init(
            || (vec![0.0; mc], vec![0.0; mc]),
            |(sum_in, sum_out), (v, (copies, kappa))| {
                let slots = &layout.slots[layout.slot_range(v)];
                let base = layout.node_off[v];
                sum_in.iter_mut().for_each(|x| *x = 0.0);
                sum_out.iter_mut().for_each(|x| *x = 0.0);
                for (j, slot) in slots.iter().enumerate() {
                    let rates = &link_rates[slot.link * mc..(slot.link + 1) * mc];
                    let duals = &delta_links[(base + j) * mc..(base + j + 1) * mc];
                    let sums = match slot.side {
                        SlotSide::In => &mut *sum_in,
                        SlotSide::Out => &mut *sum_out,
                    };
                    for m in 0..mc {
                        sums[m] += rates[m] + duals[m] / rho1;
                    }
                }
                // The balancing shift of every commodity, kept in `sum_in`.
                for m in 0..mc {
                    let c = &commodities[m];
                    let endpoint = if c.source.0 == v {
                        Some((Endpoint::Source, commodity_rates[m] + delta_src[m] / rho1))
                    } else if c.dest.0 == v {
                        Some((Endpoint::Dest, commodity_rates[m] + delta_dst[m] / rho1))
                    } else {
                        None
                    };
                    let lam = if slots.is_empty() && endpoint.is_none() {
                        0.0
                    } else {
                        balance_multiplier(sum_in[m], sum_out[m], endpoint, slots.len())
                    };
                    sum_in[m] = lam;
                    kappa[m] = rho1 * lam;
                }
                let mut local: f64 = 0.0;
                for (j, slot) in slots.iter().enumerate() {
                    let rates = &link_rates[slot.link * mc..(slot.link + 1) * mc];
                    let duals = &delta_links[(base + j) * mc..(base + j + 1) * mc];
                    let out = &mut copies[j * mc..(j + 1) * mc];
                    let sign = match slot.side {
                        SlotSide::In => 1.0,
                        SlotSide::Out => -1.0,
                    };
                    for m in 0..mc {
                        let x = rates[m] + duals[m] / rho1 + sign * sum_in[m];
                        local = local.max((x - out[m]).abs());
                        out[m] = x;
                    }
                }
                local
            },
        )
        .reduce(|| 0.0, f64::max);
    change = change.max(node_change);
    for (m, c) in commodities.iter().enumerate() {
        let lam_s = multipliers.node[c.source.0 * mc + m] / rho1;
        let lam_d = multipliers.node[c.dest.0 * mc + m] / rho1;
        let src = commodity_rates[m] + delta_src[m] / rho1 + lam_s;
        let dst = commodity_rates[m] + delta_dst[m] / rho1 - lam_d;
        change = change
            .max((src - split.rhat_src[m]).abs())
            .max((dst - split.rhat_dst[m]).abs());
        split.rhat_src[m] = src;
        split.rhat_dst[m] = dst;
    }

    // Step 4 (iii): per-BS power.
    if let WirelessMode::Joint(_) = problem.wireless {
        let mut p_chunks: Vec<&mut [Complex]> = Vec::with_capacity(layout.stations.len());
        {
            let mut rest: &mut [Complex] = &mut precoders.0;
            let mut at = 0;
            for &(_, _, a, b) in &layout.stations {
                let (_, tail) = std::mem::take(&mut rest).split_at_mut(a - at);
                let (head, tail) = tail.split_at_mut(b - a);
                p_chunks.push(head);
                rest = tail;
                at = b;
            }
        }
        let phat = &split.phat;
        let p_change = p_chunks
            .into_par_iter()
            .zip(multipliers.station.par_iter_mut())
            .zip(multipliers.station_search.par_iter_mut())
            .enumerate()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(agg, counts), (i, ((p, eps), search))| -> Result<f64> {
                    let (_, budget, a, b) = layout.stations[i];
                    agg.clear();
                    counts.clear();
                    for n in a..b {
                        let copies = &layout.copy_index[layout.copy_off[n]..layout.copy_off[n + 1]];
                        let s: Complex = copies.iter().map(|&c| phat[c] + theta[c] / rho2).sum();
                        agg.push(s);
                        counts.push(copies.len());
                    }
                    let old: Vec<Complex> = p.to_vec();
                    let lam = solve_bs_power(agg, counts, budget, p, *search)?;
                    *search = lam;
                    *eps = 0.5 * rho2 * lam;
                    Ok(old
                        .iter()
                        .zip(p.iter())
                        .fold(0.0f64, |acc, (o, n)| acc.max((o - n).norm_sqr()))
                        .sqrt())
                },
            )
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        change = change.max(p_change);
    }

    // Step 5: dual update and residuals.
    let mut r_res: f64 = 0.0;
    if active {
        let d = split.rhat - flow.min_rate;
        duals.delta = dual_step(duals.delta, d, rho1);
        r_res = d.abs();
    }
    for m in 0..mc {
        let ds = split.rhat_src[m] - flow.commodity_rates[m];
        let dd = split.rhat_dst[m] - flow.commodity_rates[m];
        duals.delta_src[m] = dual_step(duals.delta_src[m], ds, rho1);
        duals.delta_dst[m] = dual_step(duals.delta_dst[m], dd, rho1);
        r_res = r_res.max(ds.abs()).max(dd.abs());
    }
    let link_rates = &flow.link_rates;
    let slot_res = duals
        .delta_links
        .par_chunks_mut(mc)
        .zip(split.rhat_links.par_chunks(mc))
        .zip(layout.slots.par_iter())
        .map(|((dual, copy), slot)| {
            let orig = &link_rates[slot.link * mc..(slot.link + 1) * mc];
            let mut worst: f64 = 0.0;
            for m in 0..mc {
                let d = copy[m] - orig[m];
                dual[m] = dual_step(dual[m], d, rho1);
                worst = worst.max(d.abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    r_res = r_res.max(slot_res);

    let mut p_res: f64 = 0.0;
    if let WirelessMode::Joint(_) = problem.wireless {
        let p = &precoders.0;
        p_res = duals
            .theta
            .par_iter_mut()
            .zip(split.phat.par_iter())
            .zip(layout.phat_source.par_iter())
            .map(|((th, &ph), &n)| {
                let dp = p[n];
                *th -= (dp - ph) * rho2;
                (dp * dp - ph * ph).norm_sqr()
            })
            .reduce(|| 0.0f64, f64::max)
            .sqrt();
    }
    Ok((r_res, p_res, change))
}
