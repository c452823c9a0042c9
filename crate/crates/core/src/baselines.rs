//! Comparison baselines: greedy strongest-channel association followed by
//! routing, and the orthogonal-transmission LP relaxation.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::admm::AdmmParams;
use crate::error::{Error, Result};
use crate::lp::{lp_solve, LinearProgram, Row};
use crate::maxmin::{solve_routing, OuterRow, SolveReport, SolveStatus, Timings};
use crate::model::{
    link_rate, validate_flow, validate_flow_with_capacities, Complex, FlowState, Instance,
    LinkKind, NodeId, NodeKind, PrecoderState,
};

/// Serving link of every user and the resulting uniform power split.
#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    /// User to wireless link index.
    pub serving: BTreeMap<NodeId, usize>,
    /// Power reserved for each `(bs, tone)`: the budget split evenly over the tones.
    pub tone_power: BTreeMap<(NodeId, usize), f64>,
    /// Power of every wireless link (zero when the link is not serving).
    pub link_power: Vec<f64>,
}

impl Association {
    /// `(bs, tone)` serving `user`.
    pub fn serving_pair(&self, inst: &Instance, user: NodeId) -> Option<(NodeId, usize)> {
        self.serving.get(&user).map(|&l| {
            let w = inst.wireless_link(l);
            (w.bs, w.tone)
        })
    }

    pub fn precoders(&self) -> PrecoderState {
        PrecoderState(
            self.link_power
                .iter()
                .map(|&p| Complex::new(p.sqrt(), 0.0))
                .collect(),
        )
    }
}

/// Strongest-channel association: every user takes its wireless link with the
/// largest `|h|`, ties going to the lower link index. Users without a link are
/// reported in the second return value.
pub fn associate(inst: &Instance) -> (Association, Vec<NodeId>) {
    let topo = inst.topology();
    let mut best: BTreeMap<NodeId, (usize, f64)> = BTreeMap::new();
    for l in 0..inst.num_wireless() {
        let w = inst.wireless_link(l);
        let g = inst.direct_gain(l).norm();
        match best.get(&w.user) {
            Some(&(_, cur)) if cur >= g => {}
            _ => {
                best.insert(w.user, (l, g));
            }
        }
    }
    let serving: BTreeMap<NodeId, usize> = best.into_iter().map(|(u, (l, _))| (u, l)).collect();
    let orphans = topo
        .nodes_of(NodeKind::User)
        .filter(|u| !serving.contains_key(u))
        .collect();

    let k = topo.num_tones as f64;
    let mut tone_power = BTreeMap::new();
    for bs in inst.base_stations() {
        for tone in 0..topo.num_tones {
            tone_power.insert((bs, tone), inst.power_budget(bs) / k);
        }
    }
    let mut served: BTreeMap<(NodeId, usize), usize> = BTreeMap::new();
    for &l in serving.values() {
        let w = inst.wireless_link(l);
        *served.entry((w.bs, w.tone)).or_insert(0) += 1;
    }
    let mut link_power = vec![0.0; inst.num_wireless()];
    for &l in serving.values() {
        let w = inst.wireless_link(l);
        link_power[l] = tone_power[&(w.bs, w.tone)] / served[&(w.bs, w.tone)] as f64;
    }
    (
        Association {
            serving,
            tone_power,
            link_power,
        },
        orphans,
    )
}

/// Greedy association, uniform power, then max-min routing over the fixed
/// wireless capacities.
pub fn heuristic_greedy(inst: &Instance, admm: &AdmmParams) -> Result<(Association, SolveReport)> {
    let start = Instant::now();
    let (assoc, orphans) = associate(inst);
    let mut warnings: Vec<String> = orphans
        .iter()
        .map(|&u| Error::NoAdmissibleLink(u).to_string() + "; its commodities get rate 0")
        .collect();
    let precoders = assoc.precoders();
    let caps = (0..inst.num_wireless())
        .map(|l| {
            if assoc.link_power[l] > 0.0 {
                link_rate(inst, &precoders, l)
            } else {
                Ok(0.0)
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let run = solve_routing(inst, &caps, admm)?;
    if !run.outcome.converged() {
        warnings.push(format!(
            "routing stopped at the iteration cap ({})",
            run.outcome.iterations
        ));
    }
    let validation = validate_flow(inst, &run.flow, &precoders)?;
    let report = SolveReport {
        status: if run.outcome.converged() {
            SolveStatus::Converged
        } else {
            SolveStatus::IterationCap
        },
        min_rate: run.flow.min_rate,
        min_rate_nats: run.flow.min_rate * inst.rate_unit(),
        rate_unit: inst.rate_unit(),
        outer: vec![OuterRow {
            outer_iter: 1,
            inner_iters: run.outcome.iterations,
            objective: run.flow.min_rate,
            r_residual: run.outcome.r_residual,
            p_residual: run.outcome.p_residual,
        }],
        flow: run.flow,
        precoders,
        alpha: None,
        kkt_residual: None,
        validation,
        warnings,
        timings: Timings {
            total_secs: start.elapsed().as_secs_f64(),
            inner_secs: Vec::new(),
        },
    };
    Ok((assoc, report))
}

/// Relaxed activation `beta_l` of every wireless link.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationVector(pub Vec<f64>);

impl ActivationVector {
    /// Largest `|sum_{n in I(l)} beta_n - 1|` and bound violation.
    pub fn violation(&self, inst: &Instance) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for l in 0..inst.num_wireless() {
            let s: f64 = inst
                .interference_set(l)?
                .iter()
                .map(|it| self.0[it.link])
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
        for &b in &self.0 {
            worst = worst.max((-b).max(b - 1.0).max(0.0));
        }
        Ok(worst)
    }
}

/// Interference-free capacity `ln(1 + |h|^2 budget / (K noise))` of every
/// wireless link, in rate units.
pub fn orthogonal_capacities(inst: &Instance) -> Vec<f64> {
    let k = inst.topology().num_tones as f64;
    (0..inst.num_wireless())
        .map(|l| {
            let w = inst.wireless_link(l);
            let snr = inst.direct_gain(l).norm_sqr() * inst.power_budget(w.bs)
                / (k * inst.noise_of_link(l));
            snr.ln_1p()
        })
        .collect()
}

/// How wireless capacities enter a routing LP.
#[derive(Clone, Copy, Debug)]
pub enum WirelessCapacities<'a> {
    /// Fixed capacities in rate units.
    Fixed(&'a [f64]),
    /// Capacities scaled by relaxed activations tied by the interference sets.
    Activated(&'a [f64]),
}

/// Variables: `[r, r_m (M), r_l(m) link-major (L M), beta (W, activated only)]`.
pub fn routing_lp(inst: &Instance, wireless: WirelessCapacities<'_>) -> Result<LinearProgram> {
    let mc = inst.num_commodities();
    let nl = inst.num_links();
    let w = inst.num_wireless();
    let caps = match wireless {
        WirelessCapacities::Fixed(c) | WirelessCapacities::Activated(c) => c,
    };
    if caps.len() != w {
        return Err(crate::error::ModelError::Dimension(
            "wireless capacities do not match wireless links".into(),
        )
        .into());
    }
    let activated = matches!(wireless, WirelessCapacities::Activated(_));
    let flow_var = |l: usize, m: usize| 1 + mc + l * mc + m;
    let beta_var = |i: usize| 1 + mc + nl * mc + i;
    let n = 1 + mc + nl * mc + if activated { w } else { 0 };
    let mut lp = LinearProgram::new(n);
    lp.objective[0] = -1.0;
    lp.lower = vec![Some(0.0); n];
    if activated {
        for i in 0..w {
            lp.upper[beta_var(i)] = Some(1.0);
        }
    }
    for m in 0..mc {
        lp.ub.push((vec![(0, 1.0), (1 + m, -1.0)], 0.0));
    }
    for (l, link) in inst.links().iter().enumerate() {
        let mut row: Row = (0..mc).map(|m| (flow_var(l, m), 1.0)).collect();
        let rhs = match link.kind {
            LinkKind::Wired { capacity } => capacity,
            LinkKind::Wireless { index } if activated => {
                row.push((beta_var(index), -caps[index]));
                0.0
            }
            LinkKind::Wireless { index } => caps[index],
        };
        lp.ub.push((row, rhs));
    }
    // The destination row of each commodity is implied by the others.
    for v in 0..inst.num_nodes() {
        let node = NodeId(v);
        for (m, c) in inst.commodities().iter().enumerate() {
            if c.dest == node {
                continue;
            }
            let mut row: Row = Vec::new();
            row.extend(inst.in_links(node).iter().map(|&l| (flow_var(l, m), 1.0)));
            row.extend(inst.out_links(node).iter().map(|&l| (flow_var(l, m), -1.0)));
            if c.source == node {
                row.push((1 + m, 1.0));
            }
            if c.dest == node {
                row.push((1 + m, -1.0));
            }
            if !row.is_empty() {
                lp.eq.push((row, 0.0));
            }
        }
    }
    if activated {
        let mut seen = std::collections::BTreeSet::new();
        for l in 0..w {
            let mut members: Vec<usize> =
                inst.interference_set(l)?.iter().map(|it| it.link).collect();
            members.sort_unstable();
            if seen.insert(members.clone()) {
                lp.eq.push((
                    members.into_iter().map(|n| (beta_var(n), 1.0)).collect(),
                    1.0,
                ));
            }
        }
    }
    Ok(lp)
}

/// Optimal flow of a routing LP, with the activations when present.
pub fn solve_routing_lp(
    inst: &Instance,
    wireless: WirelessCapacities<'_>,
) -> Result<(FlowState, Option<ActivationVector>)> {
    let lp = routing_lp(inst, wireless)?;
    let sol = lp_solve(&lp)?;
    let mc = inst.num_commodities();
    let nl = inst.num_links();
    // Interior-point iterates can sit a hair below zero.
    let x: Vec<f64> = sol.x.iter().map(|v| v.max(0.0)).collect();
    let flow = FlowState {
        min_rate: x[0],
        commodity_rates: x[1..1 + mc].to_vec(),
        link_rates: x[1 + mc..1 + mc + nl * mc].to_vec(),
    };
    let beta = match wireless {
        WirelessCapacities::Activated(_) => Some(ActivationVector(
            x[1 + mc + nl * mc..].iter().map(|b| b.min(1.0)).collect(),
        )),
        WirelessCapacities::Fixed(_) => None,
    };
    Ok((flow, beta))
}

/// Relaxed orthogonal-transmission LP. The value is an upper bound of the
/// binary-activation problem. The report carries zero precoders; its
/// validation uses the activated capacities `beta_l * cap_l`.
pub fn heuristic_orthogonal(inst: &Instance) -> Result<(ActivationVector, SolveReport)> {
    let start = Instant::now();
    let caps = orthogonal_capacities(inst);
    let (flow, beta) = solve_routing_lp(inst, WirelessCapacities::Activated(&caps))?;
    let beta = beta.expect("activated program returns activations");
    let induced: Vec<f64> = caps.iter().zip(&beta.0).map(|(c, b)| c * b).collect();
    let validation = validate_flow_with_capacities(inst, &flow, &induced)?;
    let report = SolveReport {
        status: SolveStatus::Converged,
        min_rate: flow.min_rate,
        min_rate_nats: flow.min_rate * inst.rate_unit(),
        rate_unit: inst.rate_unit(),
        outer: Vec::new(),
        flow,
        precoders: PrecoderState::zeros(inst.num_wireless()),
        alpha: None,
        kkt_residual: None,
        validation,
        warnings: Vec::new(),
        timings: Timings {
            total_secs: start.elapsed().as_secs_f64(),
            inner_secs: Vec::new(),
        },
    };
    Ok((beta, report))
}
