//! Node identifiers and the role sets of a channel.

use std::collections::BTreeSet;
use std::fmt;

use crate::flow::FlowSet;

/// A node label, unique within one channel description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(id: u32) -> Self {
        NodeId(id)
    }
}

/// Ordered node set; every set in this crate is a `BTreeSet` so that
/// iteration order, renderings, and tie-breaks are deterministic.
pub type NodeSet = BTreeSet<NodeId>;

/// Build a `NodeSet` from raw integer labels.
pub fn nodes<I: IntoIterator<Item = u32>>(ids: I) -> NodeSet {
    ids.into_iter().map(NodeId).collect()
}

/// Render a node set as `{1,2,3}` (ascending ids, no spaces).
pub fn render_set(set: &NodeSet) -> String {
    let inner: Vec<String> = set.iter().map(|n| n.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// The role structure of a channel: which nodes feed the channel, which
/// originate messages, which decode, and which forward.
///
/// Relays decode in order to forward, so they act as destinations in the
/// decoding sense even when they are not listed among the final
/// destinations; the two sets are kept as declared and no containment
/// between them is enforced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelRoles {
    pub all_nodes: NodeSet,
    /// Nodes with inputs into the channel.
    pub inputs: NodeSet,
    pub sources: NodeSet,
    pub destinations: NodeSet,
    pub relays: NodeSet,
}

impl ChannelRoles {
    pub fn new(
        all_nodes: NodeSet,
        inputs: NodeSet,
        sources: NodeSet,
        destinations: NodeSet,
        relays: NodeSet,
    ) -> Self {
        ChannelRoles {
            all_nodes,
            inputs,
            sources,
            destinations,
            relays,
        }
    }

    /// Derive roles from a flow set: sources and destinations are the flow
    /// endpoints, relays are the nodes of every non-initial hop, and the
    /// input set is sources plus relays.
    pub fn infer(flows: &FlowSet) -> Self {
        let sources = flows.sources();
        let destinations = flows.destinations();
        let mut relays = NodeSet::new();
        for flow in flows.iter() {
            for hop in flow.hops.iter().skip(1) {
                relays.extend(hop.nodes.iter().copied());
            }
        }
        let mut inputs = sources.clone();
        inputs.extend(relays.iter().copied());
        let mut all_nodes = inputs.clone();
        all_nodes.extend(destinations.iter().copied());
        ChannelRoles {
            all_nodes,
            inputs,
            sources,
            destinations,
            relays,
        }
    }

    /// Containment checks from the role definitions. Returned strings name
    /// the violated containment; empty on success.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.sources.is_subset(&self.inputs) {
            out.push("sources must be a subset of inputs".to_string());
        }
        if !self.inputs.is_subset(&self.all_nodes) {
            out.push("inputs must be a subset of all nodes".to_string());
        }
        if !self.relays.is_subset(&self.inputs) {
            out.push("relays must be a subset of inputs".to_string());
        }
        if !self.destinations.is_subset(&self.all_nodes) {
            out.push("destinations must be a subset of all nodes".to_string());
        }
        out
    }
}

/// Enumerate the nonempty subsets of `set` in canonical order: by
/// cardinality first, then lexicographically on the sorted ids. Regions
/// list one constraint per subset in exactly this order.
pub fn nonempty_subsets(set: &NodeSet) -> Vec<NodeSet> {
    let items: Vec<NodeId> = set.iter().copied().collect();
    let n = items.len();
    let mut subsets: Vec<NodeSet> = Vec::with_capacity((1usize << n).saturating_sub(1));
    for mask in 1u32..(1u32 << n) {
        let s: NodeSet = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| items[i])
            .collect();
        subsets.push(s);
    }
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}
