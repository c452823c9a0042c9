//! Network model: nodes, wired backhaul and wireless access links, channels,
//! commodities, and evaluation of every constraint of the joint routing and
//! precoding problem.
//!
//! All capacities handed to the solver are expressed in *rate units*: one
//! rate unit equals [`Instance::rate_unit`] nats/s, which is the bandwidth of
//! one tone. Wired capacities are stored in nats/s on the topology and divided
//! by the rate unit when the [`Instance`] is built, so that a wireless link's
//! `log(1 + SINR)` and a wired capacity live on the same scale.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type Complex = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Router,
    BaseStation,
    User,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

/// Directed wired link with a fixed capacity in nats/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WiredLink {
    pub source: NodeId,
    pub dest: NodeId,
    pub capacity: f64,
}

/// Wireless link from a base station to a user on one tone (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WirelessLink {
    pub bs: NodeId,
    pub user: NodeId,
    pub tone: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub nodes: Vec<Node>,
    pub wired_links: Vec<WiredLink>,
    pub wireless_links: Vec<WirelessLink>,
    pub num_tones: usize,
    /// Total transmit power budget per base station (linear units).
    pub power_budget: BTreeMap<NodeId, f64>,
}

impl NetworkTopology {
    pub fn add_node(&mut self, name: impl Into<String>, kind: NodeKind) -> NodeId {
        self.nodes.push(Node {
            name: name.into(),
            kind,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    pub fn name(&self, id: NodeId) -> &str {
        self.nodes.get(id.0).map(|n| n.name.as_str()).unwrap_or("?")
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == kind)
            .map(|(i, _)| NodeId(i))
    }
}

/// Complex channel taps `h[(bs, user, tone)]` and per-user noise powers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub gains: BTreeMap<(NodeId, NodeId, usize), Complex>,
    pub noise: BTreeMap<NodeId, f64>,
}

impl ChannelState {
    pub fn gain(&self, bs: NodeId, user: NodeId, tone: usize) -> Complex {
        self.gains
            .get(&(bs, user, tone))
            .copied()
            .unwrap_or_default()
    }

    pub fn noise(&self, user: NodeId) -> f64 {
        self.noise.get(&user).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub source: NodeId,
    pub dest: NodeId,
    /// Optional QoS floor in nats/s.
    pub demand: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommoditySet(pub Vec<Commodity>);

impl CommoditySet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Commodity> {
        self.0.iter()
    }
}

/// Min-rate, per-commodity rates and per-(link, commodity) rates, all in
/// rate units. `link_rates` is link-major: entry `l * M + m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub min_rate: f64,
    pub commodity_rates: Vec<f64>,
    pub link_rates: Vec<f64>,
}

impl FlowState {
    pub fn zeros(num_links: usize, num_commodities: usize) -> Self {
        Self {
            min_rate: 0.0,
            commodity_rates: vec![0.0; num_commodities],
            link_rates: vec![0.0; num_links * num_commodities],
        }
    }
}

/// One complex precoder per wireless link, in canonical wireless order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecoderState(pub Vec<Complex>);

impl PrecoderState {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex::new(0.0, 0.0); n])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinkKind {
    /// Fixed capacity in rate units.
    Wired { capacity: f64 },
    /// Index into the canonical wireless link list.
    Wireless { index: usize },
}

/// A link in the unified list: wired links first, then wireless links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub source: NodeId,
    pub dest: NodeId,
    pub kind: LinkKind,
}

/// Entry of an interference set: wireless link index plus the squared
/// magnitude of the channel from that link's BS to the victim user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interferer {
    pub link: usize,
    pub gain_sq: f64,
}

/// A validated problem instance plus the derived indexes the solver needs.
///
/// Immutable after construction; safe to share between worker threads.
#[derive(Clone, Debug)]
pub struct Instance {
    topology: NetworkTopology,
    channels: ChannelState,
    commodities: CommoditySet,
    rate_unit: f64,
    links: Vec<Link>,
    num_wired: usize,
    in_links: Vec<Vec<usize>>,
    out_links: Vec<Vec<usize>>,
    interference: Vec<Vec<Interferer>>,
    self_pos: Vec<usize>,
    reverse: Vec<Vec<(usize, usize)>>,
    direct_gain: Vec<Complex>,
    bs_ranges: HashMap<NodeId, (usize, usize)>,
}

impl Instance {
    /// Validates the inputs and sorts links into canonical order.
    pub fn new(
        mut topology: NetworkTopology,
        channels: ChannelState,
        commodities: CommoditySet,
        rate_unit: f64,
    ) -> Result<Self, ModelError> {
        if !(rate_unit.is_finite() && rate_unit > 0.0) {
            return Err(ModelError::BadRateUnit(rate_unit));
        }
        if topology.num_tones == 0 {
            return Err(ModelError::NoTones);
        }
        let mut names = std::collections::HashSet::new();
        for n in &topology.nodes {
            if !names.insert(n.name.as_str()) {
                return Err(ModelError::DuplicateNode(n.name.clone()));
            }
        }
        let kind_of = |id: NodeId| -> Result<NodeKind, ModelError> {
            topology
                .nodes
                .get(id.0)
                .map(|n| n.kind)
                .ok_or_else(|| ModelError::UnknownNode(format!("#{}", id.0)))
        };

        topology.wired_links.sort_by_key(|w| (w.source, w.dest));
        topology.wireless_links.sort();

        for pair in topology.wired_links.windows(2) {
            if (pair[0].source, pair[0].dest) == (pair[1].source, pair[1].dest) {
                return Err(ModelError::DuplicateLink(wired_label(&topology, &pair[0])));
            }
        }
        for pair in topology.wireless_links.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicateLink(wireless_label(
                    &topology, &pair[0],
                )));
            }
        }
        for w in &topology.wired_links {
            let ok = |k| matches!(k, NodeKind::Router | NodeKind::BaseStation);
            if !ok(kind_of(w.source)?) || !ok(kind_of(w.dest)?) || w.source == w.dest {
                return Err(ModelError::BadWiredEndpoint(wired_label(&topology, w)));
            }
            if w.capacity.is_nan() || w.capacity < 0.0 {
                return Err(ModelError::NegativeCapacity {
                    link: wired_label(&topology, w),
                    capacity: w.capacity,
                });
            }
        }
        for wl in &topology.wireless_links {
            if kind_of(wl.bs)? != NodeKind::BaseStation || kind_of(wl.user)? != NodeKind::User {
                return Err(ModelError::BadWirelessEndpoint(wireless_label(
                    &topology, wl,
                )));
            }
            if wl.tone >= topology.num_tones {
                return Err(ModelError::ToneOutOfRange {
                    link: wireless_label(&topology, wl),
                    tone: wl.tone,
                    num_tones: topology.num_tones,
                });
            }
            if channels.gain(wl.bs, wl.user, wl.tone) == Complex::new(0.0, 0.0) {
                return Err(ModelError::ZeroDirectChannel(wireless_label(&topology, wl)));
            }
        }
        for user in topology.nodes_of(NodeKind::User) {
            let noise = channels.noise(user);
            if !(noise > 0.0 && noise.is_finite()) {
                return Err(ModelError::NonPositiveNoise(
                    topology.name(user).to_string(),
                ));
            }
        }
        for bs in topology.nodes_of(NodeKind::BaseStation) {
            let p = topology.power_budget.get(&bs).copied().unwrap_or(0.0);
            if !(p >= 0.0 && p.is_finite()) {
                return Err(ModelError::BadPowerBudget(topology.name(bs).to_string()));
            }
        }
        for (m, c) in commodities.iter().enumerate() {
            kind_of(c.source)?;
            kind_of(c.dest)?;
            if c.source == c.dest {
                return Err(ModelError::SameEndpoints(m));
            }
            if let Some(d) = c.demand {
                if d.is_nan() || d < 0.0 {
                    return Err(ModelError::NegativeDemand(m));
                }
            }
        }

        let num_wired = topology.wired_links.len();
        let mut links = Vec::with_capacity(num_wired + topology.wireless_links.len());
        for w in &topology.wired_links {
            links.push(Link {
                source: w.source,
                dest: w.dest,
                kind: LinkKind::Wired {
                    capacity: w.capacity / rate_unit,
                },
            });
        }
        for (i, wl) in topology.wireless_links.iter().enumerate() {
            links.push(Link {
                source: wl.bs,
                dest: wl.user,
                kind: LinkKind::Wireless { index: i },
            });
        }
        let n = topology.nodes.len();
        let mut in_links = vec![Vec::new(); n];
        let mut out_links = vec![Vec::new(); n];
        for (l, link) in links.iter().enumerate() {
            out_links[link.source.0].push(l);
            in_links[link.dest.0].push(l);
        }

        let wls = &topology.wireless_links;
        let mut by_tone: Vec<Vec<usize>> = vec![Vec::new(); topology.num_tones];
        for (i, wl) in wls.iter().enumerate() {
            by_tone[wl.tone].push(i);
        }
        let mut interference = Vec::with_capacity(wls.len());
        let mut self_pos = Vec::with_capacity(wls.len());
        let mut direct_gain = Vec::with_capacity(wls.len());
        for (i, wl) in wls.iter().enumerate() {
            let mut set = Vec::new();
            for &j in &by_tone[wl.tone] {
                let h = channels.gain(wls[j].bs, wl.user, wl.tone);
                if h != Complex::new(0.0, 0.0) {
                    if j == i {
                        self_pos.push(set.len());
                    }
                    set.push(Interferer {
                        link: j,
                        gain_sq: h.norm_sqr(),
                    });
                }
            }
            interference.push(set);
            direct_gain.push(channels.gain(wl.bs, wl.user, wl.tone));
        }
        let mut reverse = vec![Vec::new(); wls.len()];
        for (l, set) in interference.iter().enumerate() {
            for (j, it) in set.iter().enumerate() {
                reverse[it.link].push((l, j));
            }
        }
        let mut bs_ranges = HashMap::new();
        let mut start = 0;
        while start < wls.len() {
            let bs = wls[start].bs;
            let mut end = start;
            while end < wls.len() && wls[end].bs == bs {
                end += 1;
            }
            bs_ranges.insert(bs, (start, end));
            start = end;
        }

        let inst = Self {
            topology,
            channels,
            commodities,
            rate_unit,
            links,
            num_wired,
            in_links,
            out_links,
            interference,
            self_pos,
            reverse,
            direct_gain,
            bs_ranges,
        };
        inst.check_connectivity()?;
        Ok(inst)
    }

    fn check_connectivity(&self) -> Result<(), ModelError> {
        let usable = |l: &Link| match l.kind {
            LinkKind::Wired { capacity } => capacity > 0.0,
            LinkKind::Wireless { .. } => self.power_budget(l.source) > 0.0,
        };
        for (m, c) in self.commodities.iter().enumerate() {
            let mut seen = vec![false; self.topology.nodes.len()];
            let mut queue = VecDeque::from([c.source]);
            seen[c.source.0] = true;
            while let Some(v) = queue.pop_front() {
                for &l in &self.out_links[v.0] {
                    let link = &self.links[l];
                    if usable(link) && !seen[link.dest.0] {
                        seen[link.dest.0] = true;
                        queue.push_back(link.dest);
                    }
                }
            }
            if !seen[c.dest.0] {
                return Err(ModelError::Disconnected {
                    commodity: m,
                    source_node: self.topology.name(c.source).to_string(),
                    dest: self.topology.name(c.dest).to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn channels(&self) -> &ChannelState {
        &self.channels
    }

    pub fn commodities(&self) -> &CommoditySet {
        &self.commodities
    }

    /// Nats/s represented by one rate unit.
    pub fn rate_unit(&self) -> f64 {
        self.rate_unit
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.nodes.len()
    }

    pub fn num_commodities(&self) -> usize {
        self.commodities.len()
    }

    /// Unified links: `0..num_wired()` are wired, the rest wireless.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_wired(&self) -> usize {
        self.num_wired
    }

    pub fn num_wireless(&self) -> usize {
        self.links.len() - self.num_wired
    }

    pub fn wireless_link(&self, i: usize) -> &WirelessLink {
        &self.topology.wireless_links[i]
    }

    /// Unified index of wireless link `i`.
    pub fn wireless_link_index(&self, i: usize) -> usize {
        self.num_wired + i
    }

    pub fn in_links(&self, v: NodeId) -> &[usize] {
        &self.in_links[v.0]
    }

    pub fn out_links(&self, v: NodeId) -> &[usize] {
        &self.out_links[v.0]
    }

    pub fn power_budget(&self, bs: NodeId) -> f64 {
        self.topology.power_budget.get(&bs).copied().unwrap_or(0.0)
    }

    /// Direct channel `h^k_{ds}` of wireless link `i`.
    pub fn direct_gain(&self, i: usize) -> Complex {
        self.direct_gain[i]
    }

    pub fn noise_of_link(&self, i: usize) -> f64 {
        self.channels.noise(self.topology.wireless_links[i].user)
    }

    /// Interference set `I(l)` of wireless link `l` (which contains `l`).
    pub fn interference_set(&self, l: usize) -> Result<&[Interferer], ModelError> {
        self.interference
            .get(l)
            .map(Vec::as_slice)
            .ok_or(ModelError::UnknownLink(l))
    }

    /// Position of `l` itself inside its own interference set.
    pub fn self_position(&self, l: usize) -> usize {
        self.self_pos[l]
    }

    /// Reverse relation `Ī(l) = { l' : l ∈ I(l') }` as `(l', position of l in I(l'))`.
    pub fn victims(&self, l: usize) -> Result<&[(usize, usize)], ModelError> {
        self.reverse
            .get(l)
            .map(Vec::as_slice)
            .ok_or(ModelError::UnknownLink(l))
    }

    /// Wireless links `Ī(l)` whose rate-MSE constraint contains `p_l`.
    pub fn reverse_interference_set(&self, l: usize) -> Result<Vec<usize>, ModelError> {
        Ok(self.victims(l)?.iter().map(|&(v, _)| v).collect())
    }

    /// Contiguous range of wireless indices transmitted by `bs`.
    pub fn bs_wireless_range(&self, bs: NodeId) -> (usize, usize) {
        self.bs_ranges.get(&bs).copied().unwrap_or((0, 0))
    }

    pub fn base_stations(&self) -> Vec<NodeId> {
        self.topology.nodes_of(NodeKind::BaseStation).collect()
    }

    /// Fixed capacity of a unified link, `None` for wireless links.
    pub fn wired_capacity(&self, l: usize) -> Option<f64> {
        match self.links[l].kind {
            LinkKind::Wired { capacity } => Some(capacity),
            LinkKind::Wireless { .. } => None,
        }
    }

    /// Same network with every wireless link removed.
    pub fn without_wireless(&self) -> Result<Instance, ModelError> {
        let mut topo = self.topology.clone();
        topo.wireless_links.clear();
        Instance::new(
            topo,
            self.channels.clone(),
            self.commodities.clone(),
            self.rate_unit,
        )
    }

    pub fn with_commodities(&self, commodities: CommoditySet) -> Result<Instance, ModelError> {
        Instance::new(
            self.topology.clone(),
            self.channels.clone(),
            commodities,
            self.rate_unit,
        )
    }

    pub fn link_label(&self, l: usize) -> String {
        let link = &self.links[l];
        match link.kind {
            LinkKind::Wired { .. } => format!(
                "{}->{}",
                self.topology.name(link.source),
                self.topology.name(link.dest)
            ),
            LinkKind::Wireless { index } => {
                wireless_label(&self.topology, &self.topology.wireless_links[index])
            }
        }
    }

    pub(crate) fn check_flow_dims(&self, flow: &FlowState) -> Result<(), ModelError> {
        let m = self.num_commodities();
        if flow.commodity_rates.len() != m || flow.link_rates.len() != m * self.num_links() {
            return Err(ModelError::Dimension(format!(
                "flow has {} commodity and {} link rates, expected {} and {}",
                flow.commodity_rates.len(),
                flow.link_rates.len(),
                m,
                m * self.num_links()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_precoder_dims(&self, p: &PrecoderState) -> Result<(), ModelError> {
        if p.0.len() != self.num_wireless() {
            return Err(ModelError::Dimension(format!(
                "{} precoders for {} wireless links",
                p.0.len(),
                self.num_wireless()
            )));
        }
        Ok(())
    }
}

fn wired_label(t: &NetworkTopology, w: &WiredLink) -> String {
    format!("{}->{}", t.name(w.source), t.name(w.dest))
}

fn wireless_label(t: &NetworkTopology, w: &WirelessLink) -> String {
    format!("{}->{}@{}", t.name(w.bs), t.name(w.user), w.tone)
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Received power of every member of `I(l)` and the total over `I(l)`.
fn received_powers(inst: &Instance, p: &[Complex], l: usize) -> (f64, f64) {
    let set = &inst.interference[l];
    let own = set[inst.self_pos[l]].gain_sq * p[l].norm_sqr();
    let total: f64 = set
        .iter()
        .map(|it| it.gain_sq * p[it.link].norm_sqr())
        .sum();
    (own, total)
}

/// Achievable rate `log(1 + SINR)` of wireless link `l` in nats/s/Hz (rate units).
pub fn link_rate(inst: &Instance, precoders: &PrecoderState, l: usize) -> Result<f64, ModelError> {
    if l >= inst.num_wireless() {
        return Err(ModelError::UnknownLink(l));
    }
    inst.check_precoder_dims(precoders)?;
    let (own, total) = received_powers(inst, &precoders.0, l);
    let interference = (total - own).max(0.0);
    Ok((own / (interference + inst.noise_of_link(l))).ln_1p())
}

/// Worst-case violation of each constraint family.
///
/// Inequalities report the positive part of the largest `lhs - rhs`, so a
/// feasible state reports zero. `conservation` is the signed node residual
/// of largest magnitude.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub wired_capacity: f64,
    pub wireless_capacity: f64,
    pub power_budget: f64,
    pub conservation: f64,
    pub nonnegativity: f64,
    pub min_rate_bound: f64,
}

impl ValidationReport {
    pub fn worst(&self) -> f64 {
        [
            self.wired_capacity,
            self.wireless_capacity,
            self.power_budget,
            self.conservation.abs(),
            self.nonnegativity,
            self.min_rate_bound,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Evaluates capacity, power, conservation and sign constraints.
pub fn validate_flow(
    inst: &Instance,
    flow: &FlowState,
    precoders: &PrecoderState,
) -> Result<ValidationReport, ModelError> {
    inst.check_precoder_dims(precoders)?;
    let caps = (0..inst.num_wireless())
        .map(|l| link_rate(inst, precoders, l))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rep = validate_flow_with_capacities(inst, flow, &caps)?;
    let pos = |x: f64| x.max(0.0);
    for bs in inst.base_stations() {
        let (a, b) = inst.bs_wireless_range(bs);
        let used: f64 = precoders.0[a..b].iter().map(|p| p.norm_sqr()).sum();
        rep.power_budget = rep.power_budget.max(pos(used - inst.power_budget(bs)));
    }
    Ok(rep)
}

/// Like [`validate_flow`] with every wireless capacity given in rate units;
/// the power budget is not checked.
pub fn validate_flow_with_capacities(
    inst: &Instance,
    flow: &FlowState,
    caps: &[f64],
) -> Result<ValidationReport, ModelError> {
    inst.check_flow_dims(flow)?;
    if caps.len() != inst.num_wireless() {
        return Err(ModelError::Dimension(format!(
            "{} wireless capacities for {} wireless links",
            caps.len(),
            inst.num_wireless()
        )));
    }
    let m_count = inst.num_commodities();
    let mut rep = ValidationReport::default();
    let pos = |x: f64| x.max(0.0);

    for (l, link) in inst.links.iter().enumerate() {
        let load: f64 = flow.link_rates[l * m_count..(l + 1) * m_count].iter().sum();
        match link.kind {
            LinkKind::Wired { capacity } => {
                rep.wired_capacity = rep.wired_capacity.max(pos(load - capacity));
            }
            LinkKind::Wireless { index } => {
                rep.wireless_capacity = rep.wireless_capacity.max(pos(load - caps[index]));
            }
        }
    }
    for v in 0..inst.num_nodes() {
        let node = NodeId(v);
        for (m, c) in inst.commodities.iter().enumerate() {
            let inflow: f64 = inst.in_links[v]
                .iter()
                .map(|&l| flow.link_rates[l * m_count + m])
                .sum();
            let outflow: f64 = inst.out_links[v]
                .iter()
                .map(|&l| flow.link_rates[l * m_count + m])
                .sum();
            let rm = flow.commodity_rates[m];
            let src = if c.source == node { rm } else { 0.0 };
            let dst = if c.dest == node { rm } else { 0.0 };
            let res = inflow + src - outflow - dst;
            if res.abs() > rep.conservation.abs() {
                rep.conservation = res;
            }
        }
    }
    let negs = flow
        .link_rates
        .iter()
        .chain(std::iter::once(&flow.min_rate))
        .fold(0.0f64, |acc, &x| acc.max(pos(-x)));
    rep.nonnegativity = negs;
    for &rm in &flow.commodity_rates {
        rep.min_rate_bound = rep.min_rate_bound.max(pos(flow.min_rate - rm));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `n` base stations, one user each, all on tone 0, with full cross gains.
    pub(crate) fn same_tone_cell(n: usize, cross: f64) -> Instance {
        let mut t = NetworkTopology {
            num_tones: 1,
            ..Default::default()
        };
        let r = t.add_node("r", NodeKind::Router);
        let mut ch = ChannelState::default();
        let bss: Vec<_> = (0..n)
            .map(|i| t.add_node(format!("bs{i}"), NodeKind::BaseStation))
            .collect();
        let users: Vec<_> = (0..n)
            .map(|i| t.add_node(format!("u{i}"), NodeKind::User))
            .collect();
        for (i, &b) in bss.iter().enumerate() {
            t.power_budget.insert(b, 1.0);
            t.wired_links.push(WiredLink {
                source: r,
                dest: b,
                capacity: 10.0,
            });
            t.wireless_links.push(WirelessLink {
                bs: b,
                user: users[i],
                tone: 0,
            });
            for (j, &u) in users.iter().enumerate() {
                let g = if i == j { 1.0 } else { cross };
                if g != 0.0 {
                    ch.gains.insert((b, u, 0), Complex::new(g, 0.0));
                }
            }
        }
        for &u in &users {
            ch.noise.insert(u, 1.0);
        }
        let comm = CommoditySet(vec![Commodity {
            source: r,
            dest: users[0],
            demand: None,
        }]);
        Instance::new(t, ch, comm, 1.0).unwrap()
    }

    #[test]
    fn isolated_link_interferes_only_with_itself() {
        let inst = same_tone_cell(1, 0.0);
        let set = inst.interference_set(0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].link, 0);
    }

    #[test]
    fn different_tones_do_not_interfere() {
        let mut t = NetworkTopology {
            num_tones: 2,
            ..Default::default()
        };
        let r = t.add_node("r", NodeKind::Router);
        let b = t.add_node("b", NodeKind::BaseStation);
        let u = t.add_node("u", NodeKind::User);
        t.power_budget.insert(b, 1.0);
        t.wired_links.push(WiredLink {
            source: r,
            dest: b,
            capacity: 1.0,
        });
        let mut ch = ChannelState::default();
        for k in 0..2 {
            t.wireless_links.push(WirelessLink {
                bs: b,
                user: u,
                tone: k,
            });
            ch.gains.insert((b, u, k), Complex::new(1.0, 0.0));
        }
        ch.noise.insert(u, 1.0);
        let inst = Instance::new(
            t,
            ch,
            CommoditySet(vec![Commodity {
                source: r,
                dest: u,
                demand: None,
            }]),
            1.0,
        )
        .unwrap();
        for l in 0..2 {
            let set = inst.interference_set(l).unwrap();
            assert_eq!(set.len(), 1);
            assert_eq!(set[0].link, l);
        }
    }

    #[test]
    fn full_cross_gains_give_symmetric_sets() {
        let inst = same_tone_cell(3, 0.5);
        // Enumerate all ordered pairs directly from the gain table.
        for l in 0..3 {
            let wl = *inst.wireless_link(l);
            let mut expect = Vec::new();
            for n in 0..3 {
                let other = inst.wireless_link(n);
                if other.tone == wl.tone
                    && inst.channels().gain(other.bs, wl.user, wl.tone) != Complex::new(0.0, 0.0)
                {
                    expect.push(n);
                }
            }
            let got: Vec<_> = inst
                .interference_set(l)
                .unwrap()
                .iter()
                .map(|i| i.link)
                .collect();
            assert_eq!(got, expect);
            assert_eq!(got.len(), 3);
            let mut rev = inst.reverse_interference_set(l).unwrap();
            rev.sort();
            assert_eq!(rev, got);
        }
    }

    #[test]
    fn unknown_link_is_rejected() {
        let inst = same_tone_cell(1, 0.0);
        assert_eq!(inst.interference_set(5), Err(ModelError::UnknownLink(5)));
        let p = PrecoderState::zeros(1);
        assert!(link_rate(&inst, &p, 3).is_err());
    }

    #[test]
    fn link_rate_examples() {
        let inst = same_tone_cell(1, 0.0);
        let p = PrecoderState(vec![Complex::new(1.0, 0.0)]);
        assert!((link_rate(&inst, &p, 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let p0 = PrecoderState::zeros(1);
        assert_eq!(link_rate(&inst, &p0, 0).unwrap(), 0.0);

        let inst2 = same_tone_cell(2, 1.0);
        let p2 = PrecoderState(vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)]);
        assert!((link_rate(&inst2, &p2, 0).unwrap() - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_state_is_feasible() {
        let inst = same_tone_cell(2, 0.3);
        let flow = FlowState::zeros(inst.num_links(), inst.num_commodities());
        let rep = validate_flow(&inst, &flow, &PrecoderState::zeros(2)).unwrap();
        assert_eq!(rep, ValidationReport::default());
        assert!(rep.is_feasible(0.0));
    }

    fn path_instance(cap: f64) -> Instance {
        try_path(cap).unwrap()
    }

    fn try_path(cap: f64) -> Result<Instance, ModelError> {
        let mut t = NetworkTopology {
            num_tones: 1,
            ..Default::default()
        };
        let s = t.add_node("s", NodeKind::Router);
        let v = t.add_node("v", NodeKind::Router);
        let d = t.add_node("d", NodeKind::Router);
        t.wired_links.push(WiredLink {
            source: s,
            dest: v,
            capacity: cap,
        });
        t.wired_links.push(WiredLink {
            source: v,
            dest: d,
            capacity: cap,
        });
        Instance::new(
            t,
            ChannelState::default(),
            CommoditySet(vec![Commodity {
                source: s,
                dest: d,
                demand: None,
            }]),
            1.0,
        )
    }

    #[test]
    fn over_capacity_reports_excess() {
        let inst = path_instance(2.0);
        let flow = FlowState {
            min_rate: 3.0,
            commodity_rates: vec![3.0],
            link_rates: vec![3.0, 3.0],
        };
        let rep = validate_flow(&inst, &flow, &PrecoderState::zeros(0)).unwrap();
        assert_eq!(rep.wired_capacity, 1.0);
        assert_eq!(rep.conservation, 0.0);
    }

    #[test]
    fn balanced_path_conserves() {
        let inst = path_instance(5.0);
        let flow = FlowState {
            min_rate: 1.0,
            commodity_rates: vec![1.0],
            link_rates: vec![1.0, 1.0],
        };
        let rep = validate_flow(&inst, &flow, &PrecoderState::zeros(0)).unwrap();
        assert!(rep.is_feasible(0.0));
    }

    #[test]
    fn rejects_zero_direct_channel() {
        let mut t = NetworkTopology {
            num_tones: 1,
            ..Default::default()
        };
        let b = t.add_node("b", NodeKind::BaseStation);
        let u = t.add_node("u", NodeKind::User);
        t.wireless_links.push(WirelessLink {
            bs: b,
            user: u,
            tone: 0,
        });
        let mut ch = ChannelState::default();
        ch.noise.insert(u, 1.0);
        let err = Instance::new(t, ch, CommoditySet::default(), 1.0).unwrap_err();
        assert!(matches!(err, ModelError::ZeroDirectChannel(_)));
    }

    #[test]
    fn rejects_disconnected_commodity() {
        let err = try_path(0.0).unwrap_err();
        assert!(matches!(err, ModelError::Disconnected { commodity: 0, .. }));
    }

    #[test]
    fn links_are_sorted_canonically() {
        let mut t = NetworkTopology {
            num_tones: 1,
            ..Default::default()
        };
        let a = t.add_node("a", NodeKind::Router);
        let b = t.add_node("b", NodeKind::Router);
        t.wired_links.push(WiredLink {
            source: b,
            dest: a,
            capacity: 1.0,
        });
        t.wired_links.push(WiredLink {
            source: a,
            dest: b,
            capacity: 1.0,
        });
        let inst = Instance::new(t, ChannelState::default(), CommoditySet::default(), 1.0).unwrap();
        assert_eq!(inst.links()[0].source, a);
        assert_eq!(inst.links()[1].source, b);
    }
}
