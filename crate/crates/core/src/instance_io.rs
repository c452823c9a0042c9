//! TOML instance files.
//!
//! ```toml
//! num_tones = 1
//! rate_unit = 1.0          # nats/s per rate unit (the tone bandwidth)
//!
//! [[node]]
//! name = "r"
//! kind = "router"          # router | base_station | user
//!
//! [[node]]
//! name = "b"
//! kind = "base_station"
//! power_budget = 1.0
//!
//! [[node]]
//! name = "u"
//! kind = "user"
//! noise = 1.0
//!
//! [[wired]]
//! source = "r"
//! dest = "b"
//! capacity = 10.0          # nats/s
//!
//! [[wireless]]
//! bs = "b"
//! user = "u"
//! tone = 0                 # 0-based
//!
//! [[gain]]
//! bs = "b"
//! user = "u"
//! tone = 0
//! re = 1.0
//! im = 0.0
//!
//! [[commodity]]
//! source = "r"
//! dest = "u"
//! demand = 0.1             # optional floor, nats/s
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{
    ChannelState, Commodity, CommoditySet, Complex, Instance, NetworkTopology, NodeId, NodeKind,
    WiredLink, WirelessLink,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    num_tones: usize,
    #[serde(default = "one")]
    rate_unit: f64,
    #[serde(default)]
    node: Vec<NodeIn>,
    #[serde(default)]
    wired: Vec<WiredIn>,
    #[serde(default)]
    wireless: Vec<WirelessIn>,
    #[serde(default)]
    gain: Vec<GainIn>,
    #[serde(default)]
    commodity: Vec<CommodityIn>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeIn {
    name: Spanned<String>,
    kind: NodeKind,
    power_budget: Option<f64>,
    noise: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WiredIn {
    source: Spanned<String>,
    dest: Spanned<String>,
    capacity: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WirelessIn {
    bs: Spanned<String>,
    user: Spanned<String>,
    tone: Spanned<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainIn {
    bs: Spanned<String>,
    user: Spanned<String>,
    tone: Spanned<usize>,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommodityIn {
    source: Spanned<String>,
    dest: Spanned<String>,
    demand: Option<f64>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    num_tones: usize,
    rate_unit: f64,
    node: Vec<NodeOut<'a>>,
    wired: Vec<WiredOut<'a>>,
    wireless: Vec<WirelessOut<'a>>,
    gain: Vec<GainOut<'a>>,
    commodity: Vec<CommodityOut<'a>>,
}

#[derive(Serialize)]
struct NodeOut<'a> {
    name: &'a str,
    kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    power_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<f64>,
}

#[derive(Serialize)]
struct WiredOut<'a> {
    source: &'a str,
    dest: &'a str,
    capacity: f64,
}

#[derive(Serialize)]
struct WirelessOut<'a> {
    bs: &'a str,
    user: &'a str,
    tone: usize,
}

#[derive(Serialize)]
struct GainOut<'a> {
    bs: &'a str,
    user: &'a str,
    tone: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct CommodityOut<'a> {
    source: &'a str,
    dest: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    demand: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

struct Resolver<'a> {
    text: &'a str,
    ids: BTreeMap<String, NodeId>,
    kinds: Vec<NodeKind>,
}

impl Resolver<'_> {
    fn err<T>(&self, at: &Spanned<T>, message: impl Into<String>) -> Error {
        Error::Parse {
            line: line_of(self.text, at.span().start),
            message: message.into(),
        }
    }

    fn node(&self, name: &Spanned<String>, want: Option<NodeKind>, role: &str) -> Result<NodeId> {
        let id = *self
            .ids
            .get(name.get_ref())
            .ok_or_else(|| self.err(name, format!("unknown node `{}`", name.get_ref())))?;
        if let Some(kind) = want {
            if self.kinds[id.0] != kind {
                return Err(self.err(
                    name,
                    format!("{role} `{}` must be a {kind:?}", name.get_ref()),
                ));
            }
        }
        Ok(id)
    }
}

/// Parses an instance document. Syntax and reference errors carry the line.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let file: FileIn = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let mut topo = NetworkTopology {
        num_tones: file.num_tones,
        ..Default::default()
    };
    let mut res = Resolver {
        text,
        ids: BTreeMap::new(),
        kinds: Vec::new(),
    };
    let mut channels = ChannelState::default();
    for n in &file.node {
        if res.ids.contains_key(n.name.get_ref()) {
            return Err(res.err(&n.name, format!("duplicate node `{}`", n.name.get_ref())));
        }
        let id = topo.add_node(n.name.get_ref().clone(), n.kind);
        res.ids.insert(n.name.get_ref().clone(), id);
        res.kinds.push(n.kind);
        match n.kind {
            NodeKind::BaseStation => {
                let budget = n
                    .power_budget
                    .ok_or_else(|| res.err(&n.name, "base station needs `power_budget`"))?;
                topo.power_budget.insert(id, budget);
            }
            NodeKind::User => {
                let noise = n
                    .noise
                    .ok_or_else(|| res.err(&n.name, "user needs `noise`"))?;
                channels.noise.insert(id, noise);
            }
            NodeKind::Router => {}
        }
        if n.kind != NodeKind::BaseStation && n.power_budget.is_some() {
            return Err(res.err(&n.name, "only base stations have a `power_budget`"));
        }
        if n.kind != NodeKind::User && n.noise.is_some() {
            return Err(res.err(&n.name, "only users have a `noise`"));
        }
    }
    for w in &file.wired {
        let source = res.node(&w.source, None, "source")?;
        let dest = res.node(&w.dest, None, "dest")?;
        if !(w.capacity >= 0.0 && w.capacity.is_finite()) {
            return Err(res.err(&w.source, "wired capacity must be finite and nonnegative"));
        }
        topo.wired_links.push(WiredLink {
            source,
            dest,
            capacity: w.capacity,
        });
    }
    let tone_check = |t: &Spanned<usize>| -> Result<usize> {
        if *t.get_ref() >= file.num_tones {
            Err(res.err(
                t,
                format!("tone {} out of range 0..{}", t.get_ref(), file.num_tones),
            ))
        } else {
            Ok(*t.get_ref())
        }
    };
    for w in &file.wireless {
        let bs = res.node(&w.bs, Some(NodeKind::BaseStation), "bs")?;
        let user = res.node(&w.user, Some(NodeKind::User), "user")?;
        let tone = tone_check(&w.tone)?;
        topo.wireless_links.push(WirelessLink { bs, user, tone });
    }
    for g in &file.gain {
        let bs = res.node(&g.bs, Some(NodeKind::BaseStation), "bs")?;
        let user = res.node(&g.user, Some(NodeKind::User), "user")?;
        let tone = tone_check(&g.tone)?;
        if channels
            .gains
            .insert((bs, user, tone), Complex::new(g.re, g.im))
            .is_some()
        {
            return Err(res.err(&g.bs, "duplicate gain entry"));
        }
    }
    let mut commodities = Vec::new();
    for c in &file.commodity {
        let source = res.node(&c.source, None, "source")?;
        let dest = res.node(&c.dest, None, "dest")?;
        commodities.push(Commodity {
            source,
            dest,
            demand: c.demand,
        });
    }
    Ok(Instance::new(
        topo,
        channels,
        CommoditySet(commodities),
        file.rate_unit,
    )?)
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

/// Serializes an instance; parsing the result gives back an equal instance.
pub fn instance_to_toml(inst: &Instance) -> Result<String> {
    let topo = inst.topology();
    let ch = inst.channels();
    let name = |v: NodeId| topo.nodes[v.0].name.as_str();
    let file = FileOut {
        num_tones: topo.num_tones,
        rate_unit: inst.rate_unit(),
        node: topo
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeOut {
                name: &n.name,
                kind: n.kind,
                power_budget: topo.power_budget.get(&NodeId(i)).copied(),
                noise: ch.noise.get(&NodeId(i)).copied(),
            })
            .collect(),
        wired: topo
            .wired_links
            .iter()
            .map(|w| WiredOut {
                source: name(w.source),
                dest: name(w.dest),
                capacity: w.capacity,
            })
            .collect(),
        wireless: topo
            .wireless_links
            .iter()
            .map(|w| WirelessOut {
                bs: name(w.bs),
                user: name(w.user),
                tone: w.tone,
            })
            .collect(),
        gain: ch
            .gains
            .iter()
            .map(|(&(bs, user, tone), h)| GainOut {
                bs: name(bs),
                user: name(user),
                tone,
                re: h.re,
                im: h.im,
            })
            .collect(),
        commodity: inst
            .commodities()
            .iter()
            .map(|c| CommodityOut {
                source: name(c.source),
                dest: name(c.dest),
                demand: c.demand,
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_toml(inst)?)?;
    Ok(())
}
