//! Flows, flow sets, encoding delays, and the node-coverage sets they
//! induce.
//!
//! A flow `f(s,d)` is an ordered sequence of hops `Z_1 -k1-> Z_2 -k2-> ...
//! -kq-> d` where `Z_1 = {s}`, the hop sets are pairwise disjoint and never
//! contain the destination, and each `k` is the one-hop encoding delay in
//! blocks. Only the final delay may be infinite.

use std::fmt;

use thiserror::Error;

use crate::node::{render_set, ChannelRoles, NodeId, NodeSet};

/// An encoding delay in blocks: a finite positive count or the
/// distinguished infinite value. Arithmetic saturates at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Delay {
    Finite(u64),
    Infinite,
}

impl Delay {
    pub fn is_finite(&self) -> bool {
        matches!(self, Delay::Finite(_))
    }

    pub fn as_finite(&self) -> Option<u64> {
        match self {
            Delay::Finite(k) => Some(*k),
            Delay::Infinite => None,
        }
    }

    /// Saturating sum: anything plus infinity is infinity.
    pub fn plus(self, other: Delay) -> Delay {
        match (self, other) {
            (Delay::Finite(a), Delay::Finite(b)) => Delay::Finite(a.saturating_add(b)),
            _ => Delay::Infinite,
        }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Finite(k) => write!(f, "{k}"),
            Delay::Infinite => write!(f, "inf"),
        }
    }
}

/// One hop of a flow: the set of nodes transmitting the message in the same
/// block, and the delay until the next hop (or the destination) transmits
/// it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub nodes: NodeSet,
    pub delay: Delay,
}

impl Hop {
    pub fn new(nodes: NodeSet, delay: Delay) -> Self {
        Hop { nodes, delay }
    }
}

/// Render a hop sequence in the flow-spec body format:
/// `{1} k=1 ; {2} k=2 ; {3} k=inf`.
pub fn render_hops(hops: &[Hop]) -> String {
    let parts: Vec<String> = hops
        .iter()
        .map(|h| format!("{} k={}", render_set(&h.nodes), h.delay))
        .collect();
    parts.join(" ; ")
}

/// A flow from one source to one destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub source: NodeId,
    pub destination: NodeId,
    pub hops: Vec<Hop>,
}

impl Flow {
    /// The hop count `||f(s,d)||`.
    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    /// All nodes appearing in some hop set (the `i in f(s,d)` relation).
    pub fn nodes(&self) -> NodeSet {
        let mut out = NodeSet::new();
        for hop in &self.hops {
            out.extend(hop.nodes.iter().copied());
        }
        out
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.hops.iter().any(|h| h.nodes.contains(&node))
    }

    /// Zero-based index of the hop containing `node`.
    pub fn hop_index_of(&self, node: NodeId) -> Option<usize> {
        self.hops.iter().position(|h| h.nodes.contains(&node))
    }

    /// Cumulative delay from the source to the nodes of hop `l`
    /// (zero-based): the sum of the delays of all earlier hops. Always
    /// finite because only the terminal delay may be infinite.
    pub fn prefix_delay(&self, hop_index: usize) -> u64 {
        self.hops[..hop_index]
            .iter()
            .map(|h| h.delay.as_finite().expect("non-terminal delay is finite"))
            .sum()
    }

    /// Sum of hop delays from hop `from` (inclusive) to hop `to`
    /// (exclusive), saturating at infinity; `to == hop_count()` reaches the
    /// destination and may therefore be infinite.
    pub fn span_delay(&self, from: usize, to: usize) -> Delay {
        self.hops[from..to]
            .iter()
            .fold(Delay::Finite(0), |acc, h| acc.plus(h.delay))
    }
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "flow {} -> {} : {}",
            self.source,
            self.destination,
            render_hops(&self.hops)
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("node {0} is not part of the flow set")]
    UnknownNode(NodeId),
    #[error("no flow from {from} to {to}")]
    MissingFlow { from: NodeId, to: NodeId },
    #[error("a flow may not have equal source and destination (node {0})")]
    SourceEqualsDestination(NodeId),
    #[error("duplicate flow for pair {from} -> {to}")]
    DuplicateFlow { from: NodeId, to: NodeId },
}

/// One named violation from `FlowSet::validate`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub flow: Option<(NodeId, NodeId)>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.flow {
            Some((s, d)) => write!(f, "flow {s} -> {d}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// A flow set: one flow per source-destination pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowSet {
    flows: std::collections::BTreeMap<(NodeId, NodeId), Flow>,
}

impl FlowSet {
    pub fn new() -> Self {
        FlowSet::default()
    }

    pub fn insert(&mut self, flow: Flow) -> Result<(), FlowError> {
        if flow.source == flow.destination {
            return Err(FlowError::SourceEqualsDestination(flow.source));
        }
        let key = (flow.source, flow.destination);
        if self.flows.contains_key(&key) {
            return Err(FlowError::DuplicateFlow {
                from: flow.source,
                to: flow.destination,
            });
        }
        self.flows.insert(key, flow);
        Ok(())
    }

    pub fn from_flows<I: IntoIterator<Item = Flow>>(flows: I) -> Result<Self, FlowError> {
        let mut set = FlowSet::new();
        for f in flows {
            set.insert(f)?;
        }
        Ok(set)
    }

    pub fn flow(&self, source: NodeId, destination: NodeId) -> Option<&Flow> {
        self.flows.get(&(source, destination))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Flow> {
        self.flows.values()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn sources(&self) -> NodeSet {
        self.flows.keys().map(|(s, _)| *s).collect()
    }

    pub fn destinations(&self) -> NodeSet {
        self.flows.keys().map(|(_, d)| *d).collect()
    }

    /// Flows terminating at `destination`, keyed by source.
    pub fn flows_to(&self, destination: NodeId) -> impl Iterator<Item = &Flow> {
        self.flows
            .values()
            .filter(move |f| f.destination == destination)
    }

    /// Every node that appears in some hop set of some flow.
    pub fn all_flow_nodes(&self) -> NodeSet {
        let mut out = NodeSet::new();
        for f in self.iter() {
            out.extend(f.nodes());
        }
        out
    }

    /// Check every structural invariant and report the violated ones.
    ///
    /// Covers the per-flow shape (initial hop is the source alone, hop sets
    /// disjoint and destination-free, delays positive with infinity only in
    /// terminal position), completeness over sources x destinations, role
    /// containments, hop membership in the relay set, and consistency of
    /// the per-source cumulative delays across flows.
    pub fn validate(&self, roles: &ChannelRoles) -> Vec<Violation> {
        let mut out: Vec<Violation> = roles
            .check()
            .into_iter()
            .map(|message| Violation {
                flow: None,
                message,
            })
            .collect();

        for ((s, d), flow) in &self.flows {
            let key = Some((*s, *d));
            let mut push = |message: String| out.push(Violation { flow: key, message });

            if flow.hops.is_empty() {
                push("flow has no hops".to_string());
                continue;
            }
            let first = &flow.hops[0];
            if first.nodes.len() != 1 || !first.nodes.contains(s) {
                push(format!(
                    "first hop set must be exactly {{{s}}}, got {}",
                    render_set(&first.nodes)
                ));
            }
            let mut seen = NodeSet::new();
            for (l, hop) in flow.hops.iter().enumerate() {
                if hop.nodes.is_empty() {
                    push(format!("hop {} has an empty node set", l + 1));
                }
                if hop.nodes.contains(d) {
                    push(format!("destination {d} inside hop set {}", l + 1));
                }
                if !seen.is_disjoint(&hop.nodes) {
                    let repeat: NodeSet = seen.intersection(&hop.nodes).copied().collect();
                    push(format!(
                        "node(s) {} repeated across hop sets",
                        render_set(&repeat)
                    ));
                }
                seen.extend(hop.nodes.iter().copied());
                match hop.delay {
                    Delay::Finite(0) => push(format!("hop {} delay must be at least 1", l + 1)),
                    Delay::Infinite if l + 1 < flow.hops.len() => {
                        push(format!("infinite delay on non-terminal hop {}", l + 1))
                    }
                    _ => {}
                }
                if l > 0 {
                    let foreign: NodeSet = hop
                        .nodes
                        .iter()
                        .copied()
                        .filter(|n| !roles.relays.contains(n) || n == s || n == d)
                        .collect();
                    if !foreign.is_empty() {
                        push(format!(
                            "hop {} contains non-relay node(s) {}",
                            l + 1,
                            render_set(&foreign)
                        ));
                    }
                }
            }
        }

        // One flow per (source, destination) pair with s != d.
        for s in &roles.sources {
            for d in &roles.destinations {
                if s != d && !self.flows.contains_key(&(*s, *d)) {
                    out.push(Violation {
                        flow: None,
                        message: format!("missing flow for pair {s} -> {d}"),
                    });
                }
            }
        }

        // Each node forwards a source's message with one well-defined
        // delay, so the cumulative delay must agree across flows.
        for s in &roles.sources {
            let mut seen: std::collections::BTreeMap<NodeId, u64> = Default::default();
            for flow in self.flows_to_any_from(*s) {
                for (l, hop) in flow.hops.iter().enumerate() {
                    // Malformed prefixes (infinite inner delay) are
                    // reported above; skip them here.
                    let Some(k) = flow.span_delay(0, l).as_finite() else {
                        continue;
                    };
                    for i in &hop.nodes {
                        if let Some(prev) = seen.insert(*i, k) {
                            if prev != k {
                                out.push(Violation {
                                    flow: Some((*s, flow.destination)),
                                    message: format!(
                                        "node {i} carries source {s} with conflicting delays {prev} and {k}"
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn flows_to_any_from(&self, source: NodeId) -> impl Iterator<Item = &Flow> {
        self.flows.values().filter(move |f| f.source == source)
    }

    /// The cumulative encoding delay `k_{s,i}` from node `s` to node `i`:
    /// zero when `i == s`, the prefix sum of hop delays when `i` lies on a
    /// flow from `s`, and infinite when `i` forwards no message from `s`.
    pub fn cumulative_delay(&self, s: NodeId, i: NodeId) -> Result<Delay, FlowError> {
        let known: bool = self.all_flow_nodes().contains(&s)
            || self.sources().contains(&s)
            || self.destinations().contains(&s);
        if !known {
            return Err(FlowError::UnknownNode(s));
        }
        let i_known = self.all_flow_nodes().contains(&i)
            || self.sources().contains(&i)
            || self.destinations().contains(&i);
        if !i_known {
            return Err(FlowError::UnknownNode(i));
        }
        if s == i {
            return Ok(Delay::Finite(0));
        }
        for flow in self.flows_to_any_from(s) {
            if let Some(l) = flow.hop_index_of(i) {
                return Ok(Delay::Finite(flow.prefix_delay(l)));
            }
        }
        Ok(Delay::Infinite)
    }

    /// `F_d(S)`: the nodes covered by the flows from `S` terminating at
    /// `d`.
    pub fn covered_nodes(&self, destination: NodeId, subset: &NodeSet) -> NodeSet {
        let mut out = NodeSet::new();
        for s in subset {
            if let Some(flow) = self.flow(*s, destination) {
                out.extend(flow.nodes());
            }
        }
        out
    }

    /// The complement helper `~F_d(S)`: input nodes not covered by `S`'s
    /// flows to `d`.
    pub fn complement_covered(
        &self,
        inputs: &NodeSet,
        destination: NodeId,
        subset: &NodeSet,
    ) -> NodeSet {
        let covered = self.covered_nodes(destination, subset);
        inputs.difference(&covered).copied().collect()
    }

    /// The message vector `w_i(b)` encoded by node `i` in block `b`: one
    /// entry per source whose cumulative delay to `i` is finite, at block
    /// `b - k_{s,i}`.
    pub fn encoded_vector(&self, i: NodeId, b: i64) -> Vec<(NodeId, i64)> {
        let mut out = Vec::new();
        for s in self.sources() {
            if let Ok(Delay::Finite(k)) = self.cumulative_delay(s, i) {
                out.push((s, b - k as i64));
            }
        }
        out
    }
}

impl fmt::Display for FlowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for flow in self.flows.values() {
            writeln!(f, "{flow}")?;
        }
        Ok(())
    }
}
