//! Experiment drivers: method comparison on generated scenarios and
//! sequential versus parallel timing of the routing-only inner solver.

use std::time::Instant;

use serde::Serialize;

use crate::admm::AdmmParams;
use crate::baselines::{heuristic_greedy, heuristic_orthogonal};
use crate::error::{Error, Result};
use crate::maxmin::{n_maxmin_solve, solve_routing, OuterParams, SolveReport};
use crate::model::{Instance, NodeKind};
use crate::parallel;
use crate::scenario::{self, ScenarioConfig};

/// Size of the routing problem: one rate per commodity and link, the
/// per-commodity rates, and the common minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemSize {
    pub variables: usize,
    /// Link capacities, flow conservation at every node for every commodity,
    /// and the min-rate rows.
    pub constraints: usize,
}

pub fn problem_size(inst: &Instance) -> ProblemSize {
    let m = inst.num_commodities();
    let l = inst.num_links();
    let bs = inst.topology().nodes_of(NodeKind::BaseStation).count();
    ProblemSize {
        variables: l * m + m + 1,
        constraints: l + inst.num_nodes() * m + m + if inst.num_wireless() > 0 { bs } else { 0 },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRun {
    pub workers: usize,
    pub seconds: f64,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

/// Solves the wired routing problem once per worker count.
pub fn bench_routing(
    inst: &Instance,
    admm: &AdmmParams,
    workers: &[usize],
) -> Result<Vec<BenchRun>> {
    if inst.num_wireless() > 0 {
        return Err(Error::InvalidParameter(
            "the benchmark needs a routing-only instance".into(),
        ));
    }
    workers
        .iter()
        .map(|&w| {
            let params = AdmmParams {
                workers: w,
                ..admm.clone()
            };
            let start = Instant::now();
            let run = solve_routing(inst, &[], &params)?;
            Ok(BenchRun {
                workers: w,
                seconds: start.elapsed().as_secs_f64(),
                iterations: run.outcome.iterations,
                objective: run.flow.min_rate,
                converged: run.outcome.converged(),
            })
        })
        .collect()
}

/// Min-rates (nats/s) of the three methods on one generated instance.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub commodities: usize,
    pub seed: u64,
    pub n_maxmin: Result<f64, String>,
    pub greedy: Result<f64, String>,
    pub orthogonal: Result<f64, String>,
    pub seconds: f64,
}

impl Comparison {
    /// Largest amount by which a heuristic beats the joint solver, if any.
    pub fn heuristic_excess(&self) -> Option<f64> {
        let n = *self.n_maxmin.as_ref().ok()?;
        [&self.greedy, &self.orthogonal]
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|h| h - n)
            .reduce(f64::max)
    }
}

/// Runs the joint solver and both heuristics on the instance generated from
/// `config`. Per-method failures are kept as messages.
pub fn compare_methods(
    config: &ScenarioConfig,
    outer: &OuterParams,
    admm: &AdmmParams,
) -> Result<Comparison> {
    let start = Instant::now();
    let scen = scenario::generate(config)?;
    let inst = &scen.instance;
    let nats = |r: Result<SolveReport>| r.map(|rep| rep.min_rate_nats).map_err(|e| e.to_string());
    Ok(Comparison {
        commodities: config.commodities,
        seed: config.seed,
        n_maxmin: nats(n_maxmin_solve(inst, outer, admm)),
        greedy: nats(heuristic_greedy(inst, admm).map(|(_, rep)| rep)),
        orthogonal: nats(
            parallel::run(admm.workers, || heuristic_orthogonal(inst)).map(|(_, rep)| rep),
        ),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean min-rates per commodity count over the seeds; failed cells are
/// skipped and counted.
#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub commodities: usize,
    pub seeds: usize,
    pub n_maxmin: f64,
    pub greedy: f64,
    pub orthogonal: f64,
    /// Joint mean over the larger heuristic mean.
    pub ratio: f64,
    pub failures: usize,
}

pub fn summarize(cells: &[Comparison]) -> Vec<CompareRow> {
    let mut ms: Vec<usize> = cells.iter().map(|c| c.commodities).collect();
    ms.sort_unstable();
    ms.dedup();
    ms.into_iter()
        .map(|m| {
            let group: Vec<&Comparison> = cells.iter().filter(|c| c.commodities == m).collect();
            let mut failures = 0;
            let mut mean = |pick: fn(&Comparison) -> &Result<f64, String>| {
                let ok: Vec<f64> = group
                    .iter()
                    .filter_map(|c| pick(c).as_ref().ok().copied())
                    .collect();
                failures += group.len() - ok.len();
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().sum::<f64>() / ok.len() as f64
                }
            };
            let n_maxmin = mean(|c| &c.n_maxmin);
            let greedy = mean(|c| &c.greedy);
            let orthogonal = mean(|c| &c.orthogonal);
            CompareRow {
                commodities: m,
                seeds: group.len(),
                n_maxmin,
                greedy,
                orthogonal,
                ratio: n_maxmin / greedy.max(orthogonal),
                failures,
            }
        })
        .collect()
}
