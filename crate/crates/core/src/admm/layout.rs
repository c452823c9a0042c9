//! Index bookkeeping for the consensus copies.
//!
//! Stacked vectors:
//!
//! * `r_stack = [r, r_1..r_M, r_l(m) link-major]`, length `1 + M + L M`.
//! * `rhat_stack = [rhat, rhat_m^S (M), rhat_m^D (M), link copies]`, where the
//!   link copies are node-major: every node owns one *slot* per incident link
//!   and each slot holds `M` commodity entries. Length `1 + 2M + 2 L M`.
//! * `p_stack` holds one precoder per wireless link.
//! * `phat_stack` is grouped by rate-MSE constraint: constraint `l` owns one
//!   copy for every member of its interference set.

use crate::model::{Complex, Instance, NodeId};

/// Direction of a link relative to the node owning a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotSide {
    /// The link leaves the node.
    Out,
    /// The link enters the node.
    In,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub link: usize,
    pub side: SlotSide,
}

#[derive(Clone, Debug)]
pub struct StackingLayout {
    pub num_commodities: usize,
    pub num_links: usize,
    pub num_wired: usize,
    pub num_nodes: usize,
    /// `node_off[v]..node_off[v + 1]` are the slots of node `v`.
    pub node_off: Vec<usize>,
    pub slots: Vec<Slot>,
    /// Slot of each link at its source and at its destination node.
    pub link_src_slot: Vec<usize>,
    pub link_dst_slot: Vec<usize>,
    /// `phat_off[l]..phat_off[l + 1]` are the copies of constraint `l`.
    pub phat_off: Vec<usize>,
    /// Precoder replicated into each copy.
    pub phat_source: Vec<usize>,
    /// `copy_off[n]..copy_off[n + 1]` index into `copy_index`: every copy of precoder `n`.
    pub copy_off: Vec<usize>,
    pub copy_index: Vec<usize>,
    /// Base stations with their budget and contiguous precoder range.
    pub stations: Vec<(NodeId, f64, usize, usize)>,
}

impl StackingLayout {
    pub fn r_stack_len(&self) -> usize {
        1 + self.num_commodities + self.num_links * self.num_commodities
    }

    pub fn rhat_stack_len(&self) -> usize {
        1 + 2 * self.num_commodities + self.slots.len() * self.num_commodities
    }

    pub fn p_stack_len(&self) -> usize {
        self.copy_off.len() - 1
    }

    pub fn phat_stack_len(&self) -> usize {
        self.phat_source.len()
    }

    pub fn slot_range(&self, v: usize) -> std::ops::Range<usize> {
        self.node_off[v]..self.node_off[v + 1]
    }

    pub fn phat_range(&self, l: usize) -> std::ops::Range<usize> {
        self.phat_off[l]..self.phat_off[l + 1]
    }

    /// Applies the replication map `C`: `rhat_stack = C r_stack`.
    pub fn apply_c(&self, r_stack: &[f64]) -> Vec<f64> {
        let m_count = self.num_commodities;
        let mut out = vec![0.0; self.rhat_stack_len()];
        out[0] = r_stack[0];
        out[1..1 + m_count].copy_from_slice(&r_stack[1..1 + m_count]);
        out[1 + m_count..1 + 2 * m_count].copy_from_slice(&r_stack[1..1 + m_count]);
        let base = 1 + 2 * m_count;
        for (j, slot) in self.slots.iter().enumerate() {
            for m in 0..m_count {
                out[base + j * m_count + m] = r_stack[1 + m_count + slot.link * m_count + m];
            }
        }
        out
    }

    /// Applies the replication map `D`: `phat_stack = D p_stack`.
    pub fn apply_d(&self, p: &[Complex]) -> Vec<Complex> {
        self.phat_source.iter().map(|&n| p[n]).collect()
    }

    /// Diagonal of `C^T C`: how many copies each `r_stack` entry has.
    pub fn ctc_diagonal(&self) -> Vec<usize> {
        let m_count = self.num_commodities;
        let mut d = vec![0; self.r_stack_len()];
        d[0] = 1;
        for m in 0..m_count {
            d[1 + m] = 2;
        }
        for slot in &self.slots {
            for m in 0..m_count {
                d[1 + m_count + slot.link * m_count + m] += 1;
            }
        }
        d
    }

    /// Diagonal of `D^T D`: `|Ibar(n)|` for every precoder.
    pub fn dtd_diagonal(&self) -> Vec<usize> {
        self.copy_off.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Builds the deterministic copy layout of an instance.
pub fn build_layout(inst: &Instance) -> StackingLayout {
    let nodes = inst.num_nodes();
    let mut node_off = Vec::with_capacity(nodes + 1);
    let mut slots = Vec::new();
    let mut link_src_slot = vec![0; inst.num_links()];
    let mut link_dst_slot = vec![0; inst.num_links()];
    node_off.push(0);
    for v in 0..nodes {
        let mut incident: Vec<Slot> = inst
            .out_links(NodeId(v))
            .iter()
            .map(|&link| Slot {
                link,
                side: SlotSide::Out,
            })
            .chain(inst.in_links(NodeId(v)).iter().map(|&link| Slot {
                link,
                side: SlotSide::In,
            }))
            .collect();
        incident.sort_by_key(|s| s.link);
        for s in incident {
            match s.side {
                SlotSide::Out => link_src_slot[s.link] = slots.len(),
                SlotSide::In => link_dst_slot[s.link] = slots.len(),
            }
            slots.push(s);
        }
        node_off.push(slots.len());
    }

    let w = inst.num_wireless();
    let mut phat_off = Vec::with_capacity(w + 1);
    let mut phat_source = Vec::new();
    phat_off.push(0);
    for l in 0..w {
        let set = inst.interference_set(l).expect("wireless index in range");
        phat_source.extend(set.iter().map(|it| it.link));
        phat_off.push(phat_source.len());
    }
    let mut copy_off = Vec::with_capacity(w + 1);
    let mut copy_index = Vec::new();
    copy_off.push(0);
    for n in 0..w {
        for &(l, j) in inst.victims(n).expect("wireless index in range") {
            copy_index.push(phat_off[l] + j);
        }
        copy_off.push(copy_index.len());
    }
    let stations = inst
        .base_stations()
        .into_iter()
        .map(|bs| {
            let (a, b) = inst.bs_wireless_range(bs);
            (bs, inst.power_budget(bs), a, b)
        })
        .filter(|&(_, _, a, b)| b > a)
        .collect();

    StackingLayout {
        num_commodities: inst.num_commodities(),
        num_links: inst.num_links(),
        num_wired: inst.num_wired(),
        num_nodes: nodes,
        node_off,
        slots,
        link_src_slot,
        link_dst_slot,
        phat_off,
        phat_source,
        copy_off,
        copy_index,
        stations,
    }
}
