//! Instance builders and independent oracles shared by the integration tests.
#![allow(
    dead_code,
    clippy::type_complexity,
    clippy::too_many_arguments,
    clippy::needless_range_loop
)]

use hetnet::model::{
    ChannelState, Commodity, CommoditySet, Complex, Instance, NetworkTopology, NodeKind, WiredLink,
    WirelessLink,
};

/// Router -> BS (wired, `cap`) -> user (one tone, gain `h`, noise `noise`, budget `budget`).
pub fn chain(cap: f64, h: f64, noise: f64, budget: f64) -> Instance {
    let mut t = NetworkTopology {
        num_tones: 1,
        ..Default::default()
    };
    let r = t.add_node("router", NodeKind::Router);
    let b = t.add_node("bs", NodeKind::BaseStation);
    let u = t.add_node("user", NodeKind::User);
    t.power_budget.insert(b, budget);
    t.wired_links.push(WiredLink {
        source: r,
        dest: b,
        capacity: cap,
    });
    t.wireless_links.push(WirelessLink {
        bs: b,
        user: u,
        tone: 0,
    });
    let mut ch = ChannelState::default();
    ch.gains.insert((b, u, 0), Complex::new(h, 0.0));
    ch.noise.insert(u, noise);
    let comm = CommoditySet(vec![Commodity {
        source: r,
        dest: u,
        demand: None,
    }]);
    Instance::new(t, ch, comm, 1.0).unwrap()
}

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cone of a block of rows `b - A x`.
pub enum Cone {
    Zero,
    Nonneg,
    Soc,
}

/// `minimize sum_i diag_i x_i^2 / 2 + q^T x` over blocks `b - A x in K`,
/// solved by an interior-point method with tight tolerances.
pub fn conic_min(
    diag: &[f64],
    q: &[f64],
    blocks: &[(Vec<(Vec<(usize, f64)>, f64)>, Cone)],
) -> Vec<f64> {
    let n = q.len();
    let p = {
        let idx: Vec<usize> = (0..n).filter(|&i| diag[i] != 0.0).collect();
        CscMatrix::new_from_triplets(
            n,
            n,
            idx.clone(),
            idx.clone(),
            idx.iter().map(|&i| diag[i]).collect(),
        )
    };
    let (mut ii, mut jj, mut vv, mut b, mut cones) = (vec![], vec![], vec![], vec![], vec![]);
    for (rows, cone) in blocks {
        for (row, rhs) in rows {
            for &(j, v) in row {
                ii.push(b.len());
                jj.push(j);
                vv.push(v);
            }
            b.push(*rhs);
        }
        cones.push(match cone {
            Cone::Zero => SupportedConeT::ZeroConeT(rows.len()),
            Cone::Nonneg => SupportedConeT::NonnegativeConeT(rows.len()),
            Cone::Soc => SupportedConeT::SecondOrderConeT(rows.len()),
        });
    }
    let a = CscMatrix::new_from_triplets(b.len(), n, ii, jj, vv);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-11)
        .tol_gap_rel(1e-11)
        .tol_feas(1e-11)
        .max_iter(400)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(&p, q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(
            solver.solution.status,
            SolverStatus::Solved | SolverStatus::AlmostSolved
        ),
        "oracle status {:?}",
        solver.solution.status
    );
    solver.solution.x.clone()
}

/// Maximizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
        if hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Wired-only network on `n` routers: a bidirectional path backbone plus
/// random extra arcs, and `m` commodities between distinct routers.
pub fn random_routing(rng: &mut impl Rng, n: usize, m: usize) -> Instance {
    let mut t = NetworkTopology {
        num_tones: 1,
        ..Default::default()
    };
    let nodes: Vec<_> = (0..n)
        .map(|i| t.add_node(format!("r{i}"), NodeKind::Router))
        .collect();
    let mut arcs = std::collections::BTreeSet::new();
    for i in 1..n {
        arcs.insert((i - 1, i));
        arcs.insert((i, i - 1));
    }
    for _ in 0..n {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            arcs.insert((a, b));
        }
    }
    for (a, b) in arcs {
        t.wired_links.push(WiredLink {
            source: nodes[a],
            dest: nodes[b],
            capacity: rng.random_range(0.5..5.0),
        });
    }
    let comm = (0..m)
        .map(|_| {
            let s = rng.random_range(0..n);
            let d = (s + rng.random_range(1..n)) % n;
            Commodity {
                source: nodes[s],
                dest: nodes[d],
                demand: None,
            }
        })
        .collect();
    Instance::new(t, ChannelState::default(), CommoditySet(comm), 1.0).unwrap()
}

/// Two routers feeding `bs` base stations that serve `users` users on
/// `tones` tones; every station reaches every user and all gains are kept.
pub fn random_cell(rng: &mut impl Rng, bs: usize, users: usize, tones: usize) -> Instance {
    let (t, ch, comm) = cell_parts(rng, bs, users, tones);
    Instance::new(t, ch, CommoditySet(comm), 1.0).unwrap()
}

pub fn cell_parts(
    rng: &mut impl Rng,
    bs: usize,
    users: usize,
    tones: usize,
) -> (NetworkTopology, ChannelState, Vec<Commodity>) {
    let mut t = NetworkTopology {
        num_tones: tones,
        ..Default::default()
    };
    let r0 = t.add_node("r0", NodeKind::Router);
    let r1 = t.add_node("r1", NodeKind::Router);
    for (a, b) in [(r0, r1), (r1, r0)] {
        t.wired_links.push(WiredLink {
            source: a,
            dest: b,
            capacity: 5.0,
        });
    }
    let stations: Vec<_> = (0..bs)
        .map(|i| t.add_node(format!("b{i}"), NodeKind::BaseStation))
        .collect();
    let us: Vec<_> = (0..users)
        .map(|i| t.add_node(format!("u{i}"), NodeKind::User))
        .collect();
    let mut ch = ChannelState::default();
    for (i, &b) in stations.iter().enumerate() {
        let r = if i % 2 == 0 { r0 } else { r1 };
        t.wired_links.push(WiredLink {
            source: r,
            dest: b,
            capacity: rng.random_range(1.0..4.0),
        });
        t.power_budget.insert(b, rng.random_range(1.0..10.0));
        for (j, &u) in us.iter().enumerate() {
            for k in 0..tones {
                // Stronger gains on the diagonal keep every user served.
                let scale = if i % users == j { 1.0 } else { 0.3 };
                let h =
                    Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
                ch.gains.insert((b, u, k), h);
                t.wireless_links.push(WirelessLink {
                    bs: b,
                    user: u,
                    tone: k,
                });
            }
        }
    }
    for &u in &us {
        ch.noise.insert(u, rng.random_range(0.1..1.0));
    }
    let comm = us
        .iter()
        .enumerate()
        .map(|(j, &u)| Commodity {
            source: if j % 2 == 0 { r0 } else { r1 },
            dest: u,
            demand: None,
        })
        .collect();
    (t, ch, comm)
}

/// Appends an isolated router -> BS -> user chain on tone 0 with one
/// commodity and returns the chain's capacity `min(cap, ln(1 + budget |h|^2 / noise))`.
pub fn add_chain(
    t: &mut NetworkTopology,
    ch: &mut ChannelState,
    comm: &mut Vec<Commodity>,
    tag: &str,
    (cap, h, noise, budget): (f64, f64, f64, f64),
) -> f64 {
    let r = t.add_node(format!("r{tag}"), NodeKind::Router);
    let b = t.add_node(format!("b{tag}"), NodeKind::BaseStation);
    let u = t.add_node(format!("u{tag}"), NodeKind::User);
    t.wired_links.push(WiredLink {
        source: r,
        dest: b,
        capacity: cap,
    });
    t.wireless_links.push(WirelessLink {
        bs: b,
        user: u,
        tone: 0,
    });
    t.power_budget.insert(b, budget);
    ch.gains.insert((b, u, 0), Complex::new(h, 0.0));
    ch.noise.insert(u, noise);
    comm.push(Commodity {
        source: r,
        dest: u,
        demand: None,
    });
    cap.min((budget * h * h / noise).ln_1p())
}

/// `interferers + 1` base stations, each serving its own user on one tone,
/// with every cross gain present.
pub fn star(rng: &mut impl Rng, interferers: usize) -> Instance {
    let n = interferers + 1;
    let mut t = NetworkTopology {
        num_tones: 1,
        ..Default::default()
    };
    let r = t.add_node("r", NodeKind::Router);
    let bs: Vec<_> = (0..n)
        .map(|i| t.add_node(format!("b{i}"), NodeKind::BaseStation))
        .collect();
    let us: Vec<_> = (0..n)
        .map(|i| t.add_node(format!("u{i}"), NodeKind::User))
        .collect();
    let mut ch = ChannelState::default();
    for i in 0..n {
        t.wired_links.push(WiredLink {
            source: r,
            dest: bs[i],
            capacity: 1.0,
        });
        t.power_budget.insert(bs[i], 4.0);
        t.wireless_links.push(WirelessLink {
            bs: bs[i],
            user: us[i],
            tone: 0,
        });
        ch.noise.insert(us[i], rng.random_range(0.05..2.0));
        for j in 0..n {
            let h = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            ch.gains
                .insert((bs[i], us[j], 0), if i == j { h * 2.0 } else { h });
        }
    }
    let comm = us
        .iter()
        .map(|&u| Commodity {
            source: r,
            dest: u,
            demand: None,
        })
        .collect();
    Instance::new(t, ch, CommoditySet(comm), 1.0).unwrap()
}

/// Root of an increasing function on `[lo, hi]` by plain bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `minimize sum_l n_l |p_l|^2 / 2 - Re(conj(p_l) b_l)` over `sum |p_l|^2 <= budget`
/// by projected gradient descent.
pub fn ball_qp(counts: &[usize], b: &[Complex], budget: f64) -> Vec<Complex> {
    let step = 1.0 / counts.iter().copied().max().unwrap() as f64;
    let mut p = vec![Complex::new(0.0, 0.0); b.len()];
    for _ in 0..1_000_000 {
        let mut next: Vec<Complex> = p
            .iter()
            .zip(b)
            .zip(counts)
            .map(|((x, bl), &n)| x - (x * n as f64 - bl) * step)
            .collect();
        let norm: f64 = next.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > budget.sqrt() {
            let s = budget.sqrt() / norm;
            next.iter_mut().for_each(|x| *x *= s);
        }
        let change = next
            .iter()
            .zip(&p)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        p = next;
        if change < 1e-15 {
            break;
        }
    }
    p
}

/// Rates and copies maximizing `-rho1 sum (r_m - a_m)^2 - rho2/2 sum |x_j - t_j|^2`
/// subject to `r >= 0` and `sum r <= c1 + Re(c2 x_s) - sum c3_j |x_j|^2`.
///
/// Searches over the level `s = sum r`: the rates are a shifted projection of
/// `a` with total `s`, the copies the nearest point with surrogate `>= s`,
/// and `s` balances the two marginal costs.
pub fn level_search(
    c1: f64,
    c2: Complex,
    c3: &[f64],
    self_pos: usize,
    a: &[f64],
    t: &[Complex],
    rho1: f64,
    rho2: f64,
) -> (Vec<f64>, Vec<Complex>) {
    let surrogate = |x: &[Complex]| {
        c1 + (c2 * x[self_pos]).re - c3.iter().zip(x).map(|(c, v)| c * v.norm_sqr()).sum::<f64>()
    };
    let copies = |mu: f64| -> Vec<Complex> {
        (0..t.len())
            .map(|j| {
                let den = rho2 + 2.0 * mu * c3[j];
                if j == self_pos {
                    (t[j] * rho2 + c2.conj() * mu) / den
                } else {
                    t[j] * (rho2 / den)
                }
            })
            .collect()
    };
    // Multiplier of the surrogate floor `s`, zero when `t` already clears it.
    let copy_price = |s: f64| -> f64 {
        if surrogate(t) >= s {
            return 0.0;
        }
        let mut hi = 1.0;
        while surrogate(&copies(hi)) < s {
            hi *= 2.0;
        }
        bisect(|mu| surrogate(&copies(mu)) - s, 0.0, hi)
    };
    // Shift `nu` with `sum (a - nu)^+ = s`.
    let shift = |s: f64| -> f64 {
        let total = |nu: f64| a.iter().map(|x| (x - nu).max(0.0)).sum::<f64>();
        let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        bisect(|nu| s - total(nu), top - s - 1.0, top)
    };
    let slope = |s: f64| copy_price(s) - 2.0 * rho1 * shift(s);
    let ceiling = c1 + c2.norm_sqr() / (4.0 * c3[self_pos]);
    let s = if slope(0.0) >= 0.0 {
        0.0
    } else {
        bisect(slope, 0.0, ceiling * (1.0 - 1e-12))
    };
    let nu = shift(s);
    let rates = if s == 0.0 {
        vec![0.0; a.len()]
    } else {
        a.iter().map(|x| (x - nu).max(0.0)).collect()
    };
    (rates, copies(copy_price(s)))
}
