//! Synthetic experiment instances: a 57-BS / 11-router backhaul template with
//! hop-tiered capacities, Rayleigh access channels and random commodities.
//!
//! The template geometry is fixed (it is drawn from a constant seed); the
//! scenario seed drives user placement, channels and commodities.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ChannelState, Commodity, CommoditySet, Complex, Instance, NetworkTopology, NodeId, NodeKind,
    WiredLink, WirelessLink,
};

const TEMPLATE_SEED: u64 = 0x4e65_744d_6178;
const AREA: f64 = 2000.0;
const GRID: usize = 8;
const JITTER: f64 = 60.0;
const NUM_ROUTERS: usize = 11;
const EXTRA_EDGES: usize = 8;
const NEIGHBOR_RADIUS: f64 = 300.0;

const CORE_CAPACITY: f64 = 1e9;
const TIER1_CAPACITY: f64 = 1e8;
const TIER2_RANGE: (f64, f64) = (10e6, 50e6);
const TIER3_RANGE: (f64, f64) = (2e6, 5e6);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// 57 base stations (8 gateways) and 11 routers.
    Hetnet57,
    /// Two copies of the 57-BS network joined through a common set of 12 routers.
    Doubled114,
}

impl std::str::FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hetnet57" | "57" | "hetnet-57" => Ok(Template::Hetnet57),
            "doubled114" | "114" | "doubled-114" => Ok(Template::Doubled114),
            other => Err(Error::UnknownTemplate(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub template: Template,
    pub commodities: usize,
    /// Per-BS power budget in dB (linear budget `10^(dB/10)`).
    pub power_db: f64,
    /// Users are served by base stations within this distance (m).
    pub serving_radius: f64,
    /// Interference is kept from base stations within this distance; `None` keeps all.
    pub interference_radius: Option<f64>,
    pub seed: u64,
    pub num_tones: usize,
    /// Bandwidth of one tone in Hz; also the rate unit of the instance.
    pub bandwidth: f64,
    /// Number of users; defaults to one per commodity.
    pub users: Option<usize>,
    /// Drop the radio access: destinations are base stations.
    pub routing_only: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            template: Template::Hetnet57,
            commodities: 10,
            power_db: 20.0,
            serving_radius: 300.0,
            interference_radius: None,
            seed: 0,
            num_tones: 3,
            bandwidth: 1e6,
            users: None,
            routing_only: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.commodities == 0 {
            return Err(Error::InvalidParameter(
                "at least one commodity is required".into(),
            ));
        }
        if self.serving_radius.is_nan() || self.serving_radius <= 0.0 {
            return Err(Error::InvalidParameter(
                "serving radius must be positive".into(),
            ));
        }
        if let Some(r) = self.interference_radius {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::InvalidParameter(
                    "interference radius must be positive".into(),
                ));
            }
        }
        if self.num_tones == 0 {
            return Err(Error::InvalidParameter(
                "at least one tone is required".into(),
            ));
        }
        if self.bandwidth.is_nan() || self.bandwidth <= 0.0 {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        if self.users == Some(0) {
            return Err(Error::InvalidParameter(
                "at least one user is required".into(),
            ));
        }
        Ok(())
    }
}

/// Backhaul topology with node positions (routers have none) and hop counts
/// to the nearest gateway.
#[derive(Clone, Debug)]
pub struct ScenarioTopology {
    pub topology: NetworkTopology,
    pub positions: Vec<Option<(f64, f64)>>,
    pub hops: Vec<Option<usize>>,
    pub gateways: Vec<NodeId>,
    pub warnings: Vec<String>,
}

impl ScenarioTopology {
    /// Base stations with a positive-capacity path to the core.
    pub fn reachable_stations(&self) -> Vec<NodeId> {
        self.topology
            .nodes_of(NodeKind::BaseStation)
            .filter(|v| self.hops[v.0].is_some_and(|h| h <= 3))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub instance: Instance,
    pub positions: Vec<Option<(f64, f64)>>,
    pub warnings: Vec<String>,
}

/// Base station sites plus undirected BS-BS edges of one 57-BS block.
struct Block {
    sites: Vec<(f64, f64)>,
    gateways: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

fn block() -> Block {
    let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED);
    let spacing = AREA / GRID as f64;
    let mut sites = Vec::new();
    for i in 0..GRID * GRID {
        if i % 9 == 4 {
            continue;
        }
        let (row, col) = (i / GRID, i % GRID);
        let x = (col as f64 + 0.5) * spacing + rng.random_range(-JITTER..JITTER);
        let y = (row as f64 + 0.5) * spacing + rng.random_range(-JITTER..JITTER);
        sites.push((x, y));
    }
    debug_assert_eq!(sites.len(), 57);

    let anchors = [
        (0.15, 0.15),
        (0.5, 0.12),
        (0.85, 0.15),
        (0.12, 0.5),
        (0.88, 0.5),
        (0.15, 0.85),
        (0.5, 0.88),
        (0.85, 0.85),
    ];
    let mut gateways = Vec::new();
    for (ax, ay) in anchors {
        let (ax, ay) = (ax * AREA, ay * AREA);
        let best = (0..sites.len())
            .filter(|i| !gateways.contains(i))
            .min_by(|&a, &b| dist(sites[a], (ax, ay)).total_cmp(&dist(sites[b], (ax, ay))))
            .expect("sites exist");
        gateways.push(best);
    }

    // Neighbor graph, then a breadth-first spanning forest rooted at the gateways.
    let n = sites.len();
    let mut neighbors = vec![Vec::new(); n];
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let d = dist(sites[a], sites[b]);
            if d <= NEIGHBOR_RADIUS {
                neighbors[a].push(b);
                neighbors[b].push(a);
                candidates.push((d, a, b));
            }
        }
    }
    let mut hop = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &g in &gateways {
        hop[g] = 0;
        queue.push_back(g);
    }
    let mut edges = BTreeSet::new();
    loop {
        while let Some(v) = queue.pop_front() {
            let mut next: Vec<usize> = neighbors[v]
                .iter()
                .copied()
                .filter(|&u| hop[u] == usize::MAX)
                .collect();
            next.sort_by(|&a, &b| dist(sites[v], sites[a]).total_cmp(&dist(sites[v], sites[b])));
            for u in next {
                if hop[u] == usize::MAX {
                    hop[u] = hop[v] + 1;
                    edges.insert((v.min(u), v.max(u)));
                    queue.push_back(u);
                }
            }
        }
        // Isolated sites join their closest reached site.
        let bridge = (0..n)
            .filter(|&u| hop[u] == usize::MAX)
            .flat_map(|u| {
                (0..n)
                    .filter(|&v| hop[v] != usize::MAX)
                    .map(move |v| (u, v))
            })
            .min_by(|a, b| dist(sites[a.0], sites[a.1]).total_cmp(&dist(sites[b.0], sites[b.1])));
        match bridge {
            Some((u, v)) => {
                hop[u] = hop[v] + 1;
                edges.insert((u.min(v), u.max(v)));
                queue.push_back(u);
            }
            None => break,
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut spare: Vec<(usize, usize)> = candidates
        .iter()
        .map(|&(_, a, b)| (a, b))
        .filter(|e| !edges.contains(e))
        .collect();
    spare.shuffle(&mut rng);
    for e in spare.into_iter().take(EXTRA_EDGES) {
        edges.insert(e);
    }
    Block {
        sites,
        gateways,
        edges: edges.into_iter().collect(),
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Builds the backhaul of a template with hop-tiered capacities.
pub fn generate_topology(config: &ScenarioConfig) -> Result<ScenarioTopology> {
    config.validate()?;
    let blk = block();
    let (copies, routers) = match config.template {
        Template::Hetnet57 => (1, NUM_ROUTERS),
        Template::Doubled114 => (2, NUM_ROUTERS + 1),
    };
    let mut topo = NetworkTopology {
        num_tones: config.num_tones,
        ..Default::default()
    };
    let mut positions = Vec::new();
    let router_ids: Vec<NodeId> = (0..routers)
        .map(|i| {
            positions.push(None);
            topo.add_node(format!("router{i}"), NodeKind::Router)
        })
        .collect();
    let budget = 10f64.powf(config.power_db / 10.0);
    let mut bs_ids = Vec::new();
    for c in 0..copies {
        let ids: Vec<NodeId> = blk
            .sites
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                positions.push(Some((x + c as f64 * (AREA + 500.0), y)));
                let id = topo.add_node(
                    format!("bs{}", c * blk.sites.len() + i),
                    NodeKind::BaseStation,
                );
                topo.power_budget.insert(id, budget);
                id
            })
            .collect();
        bs_ids.push(ids);
    }

    // Undirected edges with their capacity class.
    let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED ^ 0xca9a);
    let mut undirected: Vec<(NodeId, NodeId)> = Vec::new();
    for i in 0..routers {
        undirected.push((router_ids[i], router_ids[(i + 1) % routers]));
    }
    if copies == 1 {
        undirected.push((router_ids[0], router_ids[routers / 2]));
    }
    let mut gateways = Vec::new();
    for (c, ids) in bs_ids.iter().enumerate() {
        for (g, &site) in blk.gateways.iter().enumerate() {
            let r = router_ids[(g + c * 4) % routers];
            undirected.push((ids[site], r));
            gateways.push(ids[site]);
        }
        for &(a, b) in &blk.edges {
            undirected.push((ids[a], ids[b]));
        }
    }

    let n = topo.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &undirected {
        let both_bs = topo.nodes[a.0].kind == NodeKind::BaseStation
            && topo.nodes[b.0].kind == NodeKind::BaseStation;
        if both_bs {
            adj[a.0].push(b.0);
            adj[b.0].push(a.0);
        }
    }
    let mut hops: Vec<Option<usize>> = vec![None; n];
    let mut queue = VecDeque::new();
    for g in &gateways {
        hops[g.0] = Some(0);
        queue.push_back(g.0);
    }
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if hops[u].is_none() {
                hops[u] = Some(hops[v].unwrap_or(0) + 1);
                queue.push_back(u);
            }
        }
    }

    let mut warnings = Vec::new();
    for &(a, b) in &undirected {
        let kinds = (topo.nodes[a.0].kind, topo.nodes[b.0].kind);
        let capacity = match kinds {
            (NodeKind::BaseStation, NodeKind::BaseStation) => {
                let tier = hops[a.0]
                    .unwrap_or(usize::MAX)
                    .max(hops[b.0].unwrap_or(usize::MAX))
                    .max(1);
                tier_capacity(tier, &mut rng)
            }
            _ => CORE_CAPACITY,
        };
        if capacity == 0.0 {
            warnings.push(format!(
                "link {}-{} is four or more hops from every gateway; its capacity is zero",
                topo.name(a),
                topo.name(b)
            ));
        }
        topo.wired_links.push(WiredLink {
            source: a,
            dest: b,
            capacity,
        });
        topo.wired_links.push(WiredLink {
            source: b,
            dest: a,
            capacity,
        });
    }
    // Hop counts above 3 mean no positive-capacity path; record them as unreachable.
    for h in hops.iter_mut() {
        if h.is_some_and(|x| x > 3) {
            *h = None;
        }
    }
    Ok(ScenarioTopology {
        topology: topo,
        positions,
        hops,
        gateways,
        warnings,
    })
}

/// Capacity in nats/s of a BS-BS link whose farther endpoint is `tier` hops out.
pub fn tier_capacity(tier: usize, rng: &mut impl Rng) -> f64 {
    match tier {
        0 | 1 => TIER1_CAPACITY,
        2 => rng.random_range(TIER2_RANGE.0..=TIER2_RANGE.1),
        3 => rng.random_range(TIER3_RANGE.0..=TIER3_RANGE.1),
        _ => 0.0,
    }
}

/// Mean-square channel gain `(200 / dist)^3`, with the distance floored at 1 m.
pub fn path_gain(distance: f64) -> f64 {
    (200.0 / distance.max(1.0)).powi(3)
}

/// Draws `CN(0, var)`.
pub fn rayleigh(rng: &mut impl Rng, var: f64) -> Complex {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(s * re, s * im)
}

/// Drops `count` users uniformly in the serving disk of random reachable base stations.
pub fn place_users(
    scen: &mut ScenarioTopology,
    count: usize,
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<Vec<NodeId>> {
    let stations = scen.reachable_stations();
    if stations.is_empty() {
        return Err(Error::InvalidParameter(
            "no base station is reachable from the core".into(),
        ));
    }
    let mut users = Vec::with_capacity(count);
    for i in 0..count {
        let anchor = stations[rng.random_range(0..stations.len())];
        let (x, y) = scen.positions[anchor.0].expect("base stations have positions");
        let radius = config.serving_radius * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let id = scen.topology.add_node(format!("user{i}"), NodeKind::User);
        scen.positions
            .push(Some((x + radius * angle.cos(), y + radius * angle.sin())));
        scen.hops.push(None);
        users.push(id);
    }
    Ok(users)
}

/// Wireless links to base stations within the serving radius, with Rayleigh
/// gains from every base station within the interference radius.
pub fn sample_channels(
    scen: &mut ScenarioTopology,
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> ChannelState {
    let topo = &mut scen.topology;
    let stations: Vec<NodeId> = topo.nodes_of(NodeKind::BaseStation).collect();
    let users: Vec<NodeId> = topo.nodes_of(NodeKind::User).collect();
    let mut ch = ChannelState::default();
    let mut links = Vec::new();
    for &u in &users {
        let pu = scen.positions[u.0].expect("users have positions");
        for &s in &stations {
            let d = dist(
                pu,
                scen.positions[s.0].expect("base stations have positions"),
            );
            if d <= config.serving_radius {
                for k in 0..config.num_tones {
                    links.push(WirelessLink {
                        bs: s,
                        user: u,
                        tone: k,
                    });
                }
            }
        }
        ch.noise.insert(u, 1.0);
    }
    let transmitters: BTreeSet<NodeId> = links.iter().map(|l| l.bs).collect();
    for &u in &users {
        let pu = scen.positions[u.0].expect("users have positions");
        for &s in &transmitters {
            let d = dist(
                pu,
                scen.positions[s.0].expect("base stations have positions"),
            );
            let serving = d <= config.serving_radius;
            let heard = config.interference_radius.is_none_or(|r| d <= r);
            if serving || heard {
                let var = path_gain(d);
                for k in 0..config.num_tones {
                    ch.gains.insert((s, u, k), rayleigh(rng, var));
                }
            }
        }
    }
    topo.wireless_links = links;
    ch
}

/// `m` commodities: sources uniform over routers, destinations drawn from
/// `destinations` without repetition while possible.
pub fn sample_commodities(
    routers: &[NodeId],
    destinations: &[NodeId],
    m: usize,
    rng: &mut impl Rng,
) -> Result<CommoditySet> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "at least one commodity is required".into(),
        ));
    }
    if routers.is_empty() || destinations.is_empty() {
        return Err(Error::InvalidParameter(
            "commodities need routers and destinations".into(),
        ));
    }
    let mut pool: Vec<NodeId> = Vec::new();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        if pool.is_empty() {
            pool = destinations.to_vec();
            pool.shuffle(rng);
        }
        let dest = pool.pop().expect("refilled");
        let source = routers[rng.random_range(0..routers.len())];
        out.push(Commodity {
            source,
            dest,
            demand: None,
        });
    }
    Ok(CommoditySet(out))
}

/// Generates a complete validated instance.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    let mut scen = generate_topology(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let routers: Vec<NodeId> = scen.topology.nodes_of(NodeKind::Router).collect();
    let (channels, commodities) = if config.routing_only {
        let dests = scen.reachable_stations();
        let comm = sample_commodities(&routers, &dests, config.commodities, &mut rng)?;
        (ChannelState::default(), comm)
    } else {
        let count = config.users.unwrap_or(config.commodities);
        let users = place_users(&mut scen, count, config, &mut rng)?;
        let ch = sample_channels(&mut scen, config, &mut rng);
        let comm = sample_commodities(&routers, &users, config.commodities, &mut rng)?;
        (ch, comm)
    };
    let instance = Instance::new(scen.topology, channels, commodities, config.bandwidth)?;
    Ok(Scenario {
        instance,
        positions: scen.positions,
        warnings: scen.warnings,
    })
}

/// Number of stations per hop tier, for diagnostics.
pub fn tier_counts(scen: &ScenarioTopology) -> BTreeMap<Option<usize>, usize> {
    let mut out = BTreeMap::new();
    for v in scen.topology.nodes_of(NodeKind::BaseStation) {
        *out.entry(scen.hops[v.0]).or_insert(0) += 1;
    }
    out
}
