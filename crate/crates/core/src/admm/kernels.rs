//! Closed-form and one-dimensional-search solutions of the ADMM subproblems.
//!
//! All kernels maximize the augmented Lagrangian over one block with the
//! other block and the duals fixed. Duals enter through the combined target
//! `a = (copy_s + copy_d - (dual_s + dual_d) / rho1) / 2`, the
//! unconstrained maximizer of the two consensus terms of a rate.

use crate::error::Result;
use crate::model::Complex;
use crate::roots::increasing_root;
use crate::wmmse::LinkCoefficients;

/// Width tolerance of multiplier searches.
pub const BISECTION_TOL: f64 = 1e-10;

/// Consensus target of one rate given its two copies and their duals.
#[inline]
pub fn consensus_target(copy_s: f64, copy_d: f64, dual_s: f64, dual_d: f64, rho1: f64) -> f64 {
    0.5 * (copy_s + copy_d - (dual_s + dual_d) / rho1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinRateSolution {
    pub min_rate: f64,
    pub rates: Vec<f64>,
    /// Demand violations; zero for commodities without a demand.
    pub alpha: Vec<f64>,
}

/// Soft demand floors for the min-rate block.
#[derive(Clone, Copy, Debug)]
pub struct DemandTerms<'a> {
    /// `Some(floor)` marks a commodity with a soft demand instead of `r_m >= r`.
    pub floors: &'a [Option<f64>],
    /// Price of one unit of violation in the objective.
    pub weight: f64,
}

/// Best `(r_q, alpha_q)` for `max -rho1 (r_q - a)^2 - weight alpha_q`
/// subject to `r_q + alpha_q >= floor`, `alpha_q >= 0`, `r_q >= 0`.
#[inline]
pub fn demand_pair(a: f64, floor: f64, weight: f64, rho1: f64) -> (f64, f64) {
    if a >= floor {
        return (a, 0.0);
    }
    // The floor binds: trade rate against violation along r + alpha = floor.
    let rate = (a + weight / (2.0 * rho1)).clamp(0.0, floor);
    (rate, floor - rate)
}

/// Root of the decreasing piecewise-linear derivative
/// `base - rho1 r - 2 rho1 sum_{a_m <= r} (r - a_m)` over `r >= 0`.
fn piecewise_root(base: f64, targets: &mut [f64], rho1: f64) -> f64 {
    if base <= 0.0 {
        return 0.0;
    }
    targets.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for k in 0..=targets.len() {
        let r = (base + 2.0 * rho1 * acc) / (rho1 * (1.0 + 2.0 * k as f64));
        let upper = targets.get(k).copied().unwrap_or(f64::INFINITY);
        if r < upper {
            return r.max(0.0);
        }
        acc += targets[k];
    }
    unreachable!("the last segment is unbounded")
}

/// In-place min-rate block. `targets` holds each commodity's consensus target
/// and is overwritten with its rate; `alpha` receives demand violations.
pub(crate) fn minrate_in_place(
    rhat: f64,
    delta: f64,
    rho1: f64,
    targets: &mut [f64],
    alpha: &mut [f64],
    demands: Option<DemandTerms<'_>>,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.clear();
    let mut any_free = false;
    for (m, &a) in targets.iter().enumerate() {
        match demands.and_then(|d| d.floors[m]) {
            Some(_) => {}
            None => {
                any_free = true;
                scratch.push(a);
            }
        }
    }
    let r = if any_free {
        piecewise_root(0.5 - delta + rho1 * rhat, scratch, rho1)
    } else {
        0.0
    };
    for (m, t) in targets.iter_mut().enumerate() {
        match demands.and_then(|d| d.floors[m].map(|f| (f, d.weight))) {
            Some((floor, weight)) => {
                let (rate, a) = demand_pair(*t, floor, weight, rho1);
                *t = rate;
                alpha[m] = a;
            }
            None => {
                *t = t.max(r);
                alpha[m] = 0.0;
            }
        }
    }
    r
}

/// Exact maximizer of the min-rate block over `(r, r_m)` with `r_m >= r >= 0`.
pub fn solve_minrate_block(
    rhat: f64,
    rhat_src: &[f64],
    rhat_dst: &[f64],
    delta: f64,
    delta_src: &[f64],
    delta_dst: &[f64],
    rho1: f64,
) -> MinRateSolution {
    qos_minrate_block(
        rhat, rhat_src, rhat_dst, delta, delta_src, delta_dst, rho1, None,
    )
}

/// Min-rate block where commodities with a floor trade `r_m >= r` for a soft
/// demand. With `demands = None` this is [`solve_minrate_block`].
#[allow(clippy::too_many_arguments)]
pub fn qos_minrate_block(
    rhat: f64,
    rhat_src: &[f64],
    rhat_dst: &[f64],
    delta: f64,
    delta_src: &[f64],
    delta_dst: &[f64],
    rho1: f64,
    demands: Option<DemandTerms<'_>>,
) -> MinRateSolution {
    let mut rates: Vec<f64> = (0..rhat_src.len())
        .map(|m| consensus_target(rhat_src[m], rhat_dst[m], delta_src[m], delta_dst[m], rho1))
        .collect();
    let mut alpha = vec![0.0; rates.len()];
    let min_rate = minrate_in_place(
        rhat,
        delta,
        rho1,
        &mut rates,
        &mut alpha,
        demands,
        &mut Vec::new(),
    );
    MinRateSolution {
        min_rate,
        rates,
        alpha,
    }
}

/// Capacity-constrained rates `r_m = (a_m - lambda/4)^+` with `sum r_m <= cap`.
///
/// `targets` is overwritten with the rates. Returns `lambda` in the scale of
/// the formula above; the capacity constraint's own multiplier is `rho1 lambda / 2`.
pub(crate) fn wired_in_place(targets: &mut [f64], cap: f64, scratch: &mut Vec<f64>) -> f64 {
    let free: f64 = targets.iter().map(|a| a.max(0.0)).sum();
    if free <= cap {
        targets.iter_mut().for_each(|a| *a = a.max(0.0));
        return 0.0;
    }
    scratch.clear();
    scratch.extend(targets.iter().copied().filter(|&a| a > 0.0));
    scratch.sort_by(|a, b| b.total_cmp(a));
    // With the k largest targets active, sum_{i<k} a_i - k t = cap.
    let mut acc = 0.0;
    let mut shift = 0.0;
    for k in 1..=scratch.len() {
        acc += scratch[k - 1];
        shift = (acc - cap) / k as f64;
        let next = scratch.get(k).copied().unwrap_or(f64::NEG_INFINITY);
        if shift >= next {
            break;
        }
    }
    targets.iter_mut().for_each(|a| *a = (*a - shift).max(0.0));
    4.0 * shift
}

#[derive(Clone, Debug, PartialEq)]
pub struct WiredSolution {
    pub rates: Vec<f64>,
    pub lambda: f64,
}

pub fn solve_wired_link_block(
    copies_s: &[f64],
    copies_d: &[f64],
    duals_s: &[f64],
    duals_d: &[f64],
    rho1: f64,
    capacity: f64,
) -> WiredSolution {
    let mut rates: Vec<f64> = (0..copies_s.len())
        .map(|m| consensus_target(copies_s[m], copies_d[m], duals_s[m], duals_d[m], rho1))
        .collect();
    let lambda = wired_in_place(&mut rates, capacity, &mut Vec::new());
    WiredSolution { rates, lambda }
}

/// Rate-MSE constrained block of one wireless link.
///
/// `targets` holds the rate consensus targets and receives the rates;
/// `phat` holds `p_n - theta_n / rho2` for every member of the interference
/// set and receives the copies. Returns the multiplier of the constraint
/// `sum_m r_m <= E(phat)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn wireless_in_place(
    coeffs: &LinkCoefficients,
    self_pos: usize,
    targets: &mut [f64],
    phat: &mut [Complex],
    rho1: f64,
    rho2: f64,
    hint: f64,
    tol: f64,
    weights: &mut Vec<f64>,
) -> Result<f64> {
    let c2s = coeffs.c2.conj();
    let c3 = &coeffs.c3;
    // Interferer copies only enter through `c3 |t|^2`.
    weights.clear();
    weights.extend(c3.iter().zip(phat.iter()).map(|(c, t)| c * t.norm_sqr()));
    weights[self_pos] = 0.0;
    let t_self = phat[self_pos];
    let c3_self = c3[self_pos];
    let w: &[f64] = weights;
    // Surrogate value at the copies for multiplier `lam`, plus its derivative.
    let surrogate = |lam: f64| -> (f64, f64) {
        let mut e = coeffs.c1;
        let mut de = 0.0;
        for (&cj, &wj) in c3.iter().zip(w) {
            let inv = 1.0 / (rho2 + 2.0 * lam * cj);
            let s = rho2 * inv;
            let s2w = s * s * wj;
            e -= s2w;
            de += 4.0 * cj * s2w * inv;
        }
        let den = rho2 + 2.0 * lam * c3_self;
        let num = t_self * rho2 + c2s * lam;
        let x = num / den;
        e += (coeffs.c2 * x).re - c3_self * x.norm_sqr();
        let dx = (c2s * den - num * (2.0 * c3_self)) / (den * den);
        de += ((coeffs.c2 - x.conj() * (2.0 * c3_self)) * dx).re;
        (e, de)
    };
    let load = |lam: f64, a: &[f64]| -> (f64, f64) {
        let shift = lam / (2.0 * rho1);
        let mut s = 0.0;
        let mut active = 0usize;
        for &x in a {
            if x > shift {
                s += x - shift;
                active += 1;
            }
        }
        (s, active as f64 / (2.0 * rho1))
    };

    let (e0, _) = surrogate(0.0);
    let (s0, _) = load(0.0, targets);
    let lam = if e0 - s0 >= 0.0 {
        0.0
    } else {
        let a: &[f64] = targets;
        increasing_root(
            |lam| {
                let (e, de) = surrogate(lam);
                let (s, ds) = load(lam, a);
                (e - s, de + ds)
            },
            hint,
            tol,
            1e-13,
            "rate-MSE constraint",
        )?
    };
    let shift = lam / (2.0 * rho1);
    targets.iter_mut().for_each(|a| *a = (*a - shift).max(0.0));
    for (j, x) in phat.iter_mut().enumerate() {
        *x = copy_at(coeffs, self_pos, lam, rho2, j, *x);
    }
    Ok(lam)
}

/// Copy of the `j`-th interference-set member at multiplier `lam`, given its
/// consensus target `t = p - theta / rho2`.
#[inline]
pub fn copy_at(
    coeffs: &LinkCoefficients,
    self_pos: usize,
    lam: f64,
    rho2: f64,
    j: usize,
    t: Complex,
) -> Complex {
    let den = rho2 + 2.0 * lam * coeffs.c3[j];
    if j == self_pos {
        (t * rho2 + coeffs.c2.conj() * lam) / den
    } else {
        t * (rho2 / den)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WirelessSolution {
    pub rates: Vec<f64>,
    pub copies: Vec<Complex>,
    pub lambda: f64,
}

/// Rate-MSE block of one wireless link. `precoders[j]` and `thetas[j]` belong
/// to the `j`-th member of the link's interference set.
#[allow(clippy::too_many_arguments)]
pub fn solve_wireless_link_block(
    coeffs: &LinkCoefficients,
    self_pos: usize,
    copies_s: &[f64],
    copies_d: &[f64],
    duals_s: &[f64],
    duals_d: &[f64],
    precoders: &[Complex],
    thetas: &[Complex],
    rho1: f64,
    rho2: f64,
) -> Result<WirelessSolution> {
    let mut rates: Vec<f64> = (0..copies_s.len())
        .map(|m| consensus_target(copies_s[m], copies_d[m], duals_s[m], duals_d[m], rho1))
        .collect();
    let mut copies: Vec<Complex> = precoders
        .iter()
        .zip(thetas)
        .map(|(p, th)| p - th / rho2)
        .collect();
    let lambda = wireless_in_place(
        coeffs,
        self_pos,
        &mut rates,
        &mut copies,
        rho1,
        rho2,
        0.0,
        BISECTION_TOL,
        &mut Vec::new(),
    )?;
    Ok(WirelessSolution {
        rates,
        copies,
        lambda,
    })
}

/// Dual ascent on one consensus equality; `gap` is copy minus original.
#[inline]
pub fn dual_step(dual: f64, gap: f64, rho: f64) -> f64 {
    dual - rho * gap
}

/// Scalar copy `rhat = r + (1 + 2 delta) / (2 rho1)`.
#[inline]
pub fn solve_rhat_scalar(r: f64, delta: f64, rho1: f64) -> f64 {
    r + (1.0 + 2.0 * delta) / (2.0 * rho1)
}

/// Role of a node for one commodity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Source,
    Dest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSolution {
    pub lambda: f64,
    pub in_copies: Vec<f64>,
    pub out_copies: Vec<f64>,
    pub endpoint_copy: Option<f64>,
}

/// Projection multiplier onto `sum_in + [src] e - sum_out - [dst] e = 0`.
#[inline]
pub(crate) fn balance_multiplier(
    sum_in: f64,
    sum_out: f64,
    endpoint: Option<(Endpoint, f64)>,
    count: usize,
) -> f64 {
    let e = match endpoint {
        Some((Endpoint::Dest, e)) => e,
        Some((Endpoint::Source, e)) => -e,
        None => 0.0,
    };
    let n = count + usize::from(endpoint.is_some());
    (sum_out - sum_in + e) / n as f64
}

/// Copies of one node's conservation subproblem.
///
/// `in_targets` and `out_targets` are `r_l(m) + dual / rho1` for the node's
/// incoming and outgoing links; `endpoint` is `r_m + dual / rho1` when the
/// node is the commodity's source or destination. Returns `None` for an
/// isolated node with nothing to balance.
pub fn solve_node_conservation(
    in_targets: &[f64],
    out_targets: &[f64],
    endpoint: Option<(Endpoint, f64)>,
) -> Option<NodeSolution> {
    let count = in_targets.len() + out_targets.len();
    if count == 0 && endpoint.is_none() {
        return None;
    }
    let lambda = balance_multiplier(
        in_targets.iter().sum(),
        out_targets.iter().sum(),
        endpoint,
        count,
    );
    Some(NodeSolution {
        lambda,
        in_copies: in_targets.iter().map(|a| a + lambda).collect(),
        out_copies: out_targets.iter().map(|a| a - lambda).collect(),
        endpoint_copy: endpoint.map(|(kind, e)| match kind {
            Endpoint::Source => e + lambda,
            Endpoint::Dest => e - lambda,
        }),
    })
}

/// Per-BS power block: `p_l = b_l / (n_l + lambda)` with `sum |p_l|^2 <= budget`.
///
/// `aggregates[l]` is `sum (phat + theta / rho2)` over the copies of `p_l`
/// and `counts[l]` their number. Writes the precoders to `out` and returns
/// `lambda`; the power constraint's own multiplier is `rho2 lambda / 2`.
pub fn solve_bs_power(
    aggregates: &[Complex],
    counts: &[usize],
    budget: f64,
    out: &mut [Complex],
    hint: f64,
) -> Result<f64> {
    if budget <= 0.0 {
        out.iter_mut().for_each(|p| *p = Complex::new(0.0, 0.0));
        return Ok(0.0);
    }
    let power = |lam: f64| -> (f64, f64) {
        let mut used = 0.0;
        let mut d = 0.0;
        for (b, &n) in aggregates.iter().zip(counts) {
            let den = n as f64 + lam;
            if den > 0.0 {
                let q = b.norm_sqr() / (den * den);
                used += q;
                d += 2.0 * q / den;
            }
        }
        (used, d)
    };
    let lam = if power(0.0).0 <= budget {
        0.0
    } else {
        increasing_root(
            |lam| {
                let (used, d) = power(lam);
                (budget - used, d)
            },
            hint,
            BISECTION_TOL,
            1e-13 * budget.max(1.0),
            "power budget",
        )?
    };
    for ((p, b), &n) in out.iter_mut().zip(aggregates).zip(counts) {
        let den = n as f64 + lam;
        *p = if den > 0.0 {
            b / den
        } else {
            Complex::new(0.0, 0.0)
        };
    }
    Ok(lam)
}
