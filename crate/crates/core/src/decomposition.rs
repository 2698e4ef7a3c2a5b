//! Flow decompositions: layered partitions, virtual sources and flows,
//! splitting checks, active sets, completeness, and bifurcation.
//!
//! A layered partition of the nodes covering a destination assigns each
//! covered node to a layer; layer `l` corresponds to block `b - l` during
//! decoding, so deeper layers reach deeper into the past. The partition
//! determines, for every source, a *virtual source* (the hop the
//! destination effectively decodes the source from) and an acyclic
//! *virtual flow* (the sub-flow the destination actually exploits).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::flow::{FlowSet, Hop};
use crate::node::{render_set, NodeId, NodeSet};

/// An ordered partition of `F_d(S)` into layers, some possibly empty. The
/// last layer must be nonempty; leading and interior empty layers are
/// allowed (shifting can create a leading one).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredPartition {
    pub destination: NodeId,
    layers: Vec<NodeSet>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("no flow from {from} to {to}")]
    MissingFlow { from: NodeId, to: NodeId },
    #[error("node {0} appears in more than one layer")]
    OverlappingLayers(NodeId),
    #[error("the last layer of a partition must be nonempty")]
    EmptyLastLayer,
    #[error(
        "partition does not match the covered nodes: missing {missing}, extra {extra}",
        missing = render_set(missing),
        extra = render_set(extra)
    )]
    PartitionCoverage { missing: NodeSet, extra: NodeSet },
    #[error("virtual source of {node} is malformed: {detail}")]
    MalformedVirtualSource { node: NodeId, detail: String },
    #[error("derived layer for node {0} is negative")]
    NegativeLayer(NodeId),
    #[error("conflicting layer assignments for node {0}")]
    ConflictingLayer(NodeId),
    #[error("no initial layer given for source {0}")]
    MissingInitialLayer(NodeId),
    #[error("no disjoint spanning selection of virtual flows exists: {0}")]
    NoDisjointSpanning(String),
}

impl LayeredPartition {
    pub fn new(destination: NodeId, layers: Vec<NodeSet>) -> Result<Self, DecompositionError> {
        let mut seen = NodeSet::new();
        for layer in &layers {
            for node in layer {
                if !seen.insert(*node) {
                    return Err(DecompositionError::OverlappingLayers(*node));
                }
            }
        }
        if let Some(last) = layers.last() {
            if last.is_empty() {
                return Err(DecompositionError::EmptyLastLayer);
            }
        }
        Ok(LayeredPartition {
            destination,
            layers,
        })
    }

    /// Build a partition from a layer index per node.
    pub fn from_layer_map(
        destination: NodeId,
        assignment: &BTreeMap<NodeId, usize>,
    ) -> Result<Self, DecompositionError> {
        let depth = assignment.values().copied().max().map_or(0, |m| m + 1);
        let mut layers = vec![NodeSet::new(); depth];
        for (node, layer) in assignment {
            layers[*layer].insert(*node);
        }
        LayeredPartition::new(destination, layers)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[NodeSet] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &NodeSet {
        &self.layers[l]
    }

    pub fn layer_of(&self, node: NodeId) -> Option<usize> {
        self.layers.iter().position(|layer| layer.contains(&node))
    }

    /// All nodes the partition places.
    pub fn covered(&self) -> NodeSet {
        let mut out = NodeSet::new();
        for layer in &self.layers {
            out.extend(layer.iter().copied());
        }
        out
    }

    /// The union of layers `0..=l`.
    pub fn union_up_to(&self, l: usize) -> NodeSet {
        let mut out = NodeSet::new();
        for layer in &self.layers[..=l] {
            out.extend(layer.iter().copied());
        }
        out
    }

    /// The sequence of nonempty layers, in order.
    pub fn nonempty_layers(&self) -> Vec<&NodeSet> {
        self.layers.iter().filter(|l| !l.is_empty()).collect()
    }
}

impl fmt::Display for LayeredPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.layers.iter().map(render_set).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The virtual source of one original source: the hop set the destination
/// decodes the source from, with its shared delay and layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualSourceResult {
    pub source: NodeId,
    pub v_set: NodeSet,
    /// `k_{s,v(s)}`, the encoding delay from the source to its virtual
    /// source.
    pub delay_to_v: u64,
    pub layer_of_v: usize,
    /// Zero-based index of the hop of `f(s,d)` containing `v(s)`.
    pub hop_index: usize,
}

/// The acyclic sub-flow a destination effectively sees for one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualFlow {
    pub source: NodeId,
    pub destination: NodeId,
    pub hops: Vec<Hop>,
}

impl VirtualFlow {
    pub fn nodes(&self) -> NodeSet {
        let mut out = NodeSet::new();
        for hop in &self.hops {
            out.extend(hop.nodes.iter().copied());
        }
        out
    }

    /// Hop node sets without delays; equivalence of decompositions is
    /// judged on these.
    pub fn hop_sets(&self) -> Vec<&NodeSet> {
        self.hops.iter().map(|h| &h.nodes).collect()
    }
}

impl fmt::Display for VirtualFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "g {} -> {} : {}",
            self.source,
            self.destination,
            crate::flow::render_hops(&self.hops)
        )
    }
}

/// Per-layer fresh/known sets and per-source decode offsets: in block `b`
/// the destination decodes message `b - offset_s` of source `s`, checking
/// layer `l` against block `b - l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodePlan {
    /// `(A_l(S), A~_l(S))` for the full source set, indexed by layer.
    pub layers: Vec<(NodeSet, NodeSet)>,
    pub offsets: BTreeMap<NodeId, i64>,
}

/// One violated splitting inequality. Minimality of the virtual source
/// forces both inequalities, so a violation marks an implementation bug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplittingViolation {
    pub source: NodeId,
    pub node: NodeId,
    pub detail: String,
}

/// A flow set paired with a layered partition for one destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowDecomposition {
    flow_set: FlowSet,
    partition: LayeredPartition,
}

impl FlowDecomposition {
    /// Pair a flow set with a partition; the partition must place exactly
    /// the nodes covered by the flows into the destination.
    pub fn new(
        flow_set: FlowSet,
        partition: LayeredPartition,
    ) -> Result<Self, DecompositionError> {
        let d = partition.destination;
        let sources: NodeSet = flow_set.flows_to(d).map(|f| f.source).collect();
        let covered = flow_set.covered_nodes(d, &sources);
        let placed = partition.covered();
        if covered != placed {
            return Err(DecompositionError::PartitionCoverage {
                missing: covered.difference(&placed).copied().collect(),
                extra: placed.difference(&covered).copied().collect(),
            });
        }
        Ok(FlowDecomposition {
            flow_set,
            partition,
        })
    }

    pub fn destination(&self) -> NodeId {
        self.partition.destination
    }

    pub fn flow_set(&self) -> &FlowSet {
        &self.flow_set
    }

    pub fn partition(&self) -> &LayeredPartition {
        &self.partition
    }

    /// Sources with a flow into this decomposition's destination.
    pub fn sources(&self) -> NodeSet {
        self.flow_set
            .flows_to(self.destination())
            .map(|f| f.source)
            .collect()
    }

    /// `F_d(S)` restricted to this destination.
    pub fn covered(&self, subset: &NodeSet) -> NodeSet {
        self.flow_set.covered_nodes(self.destination(), subset)
    }

    fn layer_of(&self, node: NodeId) -> usize {
        self.partition
            .layer_of(node)
            .expect("every covered node is layered (checked at construction)")
    }

    /// The virtual source `v(s)`: among the flow nodes minimizing
    /// `layer(i) + k_{s,i}`, those with the shortest hop prefix. All
    /// members share one hop, one delay, and one layer; anything else
    /// marks the decomposition malformed.
    pub fn virtual_source(&self, s: NodeId) -> Result<VirtualSourceResult, DecompositionError> {
        let d = self.destination();
        let flow = self
            .flow_set
            .flow(s, d)
            .ok_or(DecompositionError::MissingFlow { from: s, to: d })?;
        let mut best: Option<(u64, usize)> = None;
        for (l, hop) in flow.hops.iter().enumerate() {
            let k = flow.prefix_delay(l);
            for &i in &hop.nodes {
                let u = self.layer_of(i) as u64 + k;
                let key = (u, l);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        let (min_u, hop_index) = best.expect("flows have at least one hop");
        let k = flow.prefix_delay(hop_index);
        let v_set: NodeSet = flow.hops[hop_index]
            .nodes
            .iter()
            .copied()
            .filter(|&i| self.layer_of(i) as u64 + k == min_u)
            .collect();
        let layers: std::collections::BTreeSet<usize> =
            v_set.iter().map(|&i| self.layer_of(i)).collect();
        if layers.len() != 1 {
            return Err(DecompositionError::MalformedVirtualSource {
                node: s,
                detail: format!(
                    "members {} of the minimizing hop sit in different layers",
                    render_set(&v_set)
                ),
            });
        }
        let layer_of_v = (min_u - k) as usize;
        Ok(VirtualSourceResult {
            source: s,
            v_set,
            delay_to_v: k,
            layer_of_v,
            hop_index,
        })
    }

    /// The virtual flow `g(s,d)`: the subsequence of hops downstream of
    /// the virtual source whose layer drop from `v(s)` equals their delay
    /// distance, with delays re-accumulated over the skipped hops.
    pub fn virtual_flow(&self, s: NodeId) -> Result<VirtualFlow, DecompositionError> {
        let d = self.destination();
        let vs = self.virtual_source(s)?;
        let flow = self.flow_set.flow(s, d).expect("checked by virtual_source");
        let layer_v = vs.layer_of_v as i64;
        let k_sv = vs.delay_to_v as i64;

        let mut retained: Vec<(usize, NodeSet)> = Vec::new();
        for (l, hop) in flow.hops.iter().enumerate().skip(vs.hop_index) {
            let k = flow.prefix_delay(l) as i64;
            let keep: NodeSet = hop
                .nodes
                .iter()
                .copied()
                .filter(|&i| layer_v - self.layer_of(i) as i64 == k - k_sv)
                .collect();
            if !keep.is_empty() {
                retained.push((l, keep));
            }
        }
        debug_assert_eq!(retained[0].1, vs.v_set, "first virtual hop is v(s)");

        let q = flow.hop_count();
        let mut hops = Vec::with_capacity(retained.len());
        for (pos, (l, nodes)) in retained.iter().enumerate() {
            let end = retained.get(pos + 1).map_or(q, |(next, _)| *next);
            let delay = flow.span_delay(*l, end);
            hops.push(Hop::new(nodes.clone(), delay));
        }
        Ok(VirtualFlow {
            source: s,
            destination: d,
            hops,
        })
    }

    /// `G_d(S)`: nodes covered by the virtual flows of `S`.
    pub fn virtual_cover(&self, subset: &NodeSet) -> NodeSet {
        let mut out = NodeSet::new();
        for &s in subset {
            if let Ok(g) = self.virtual_flow(s) {
                out.extend(g.nodes());
            }
        }
        out
    }

    /// `(A_l(S), A~_l(S))`: the fresh nodes of layer `l` serving `S`, and
    /// the already-known context among layers `0..=l`.
    pub fn active_sets(&self, subset: &NodeSet, l: usize) -> (NodeSet, NodeSet) {
        let g = self.virtual_cover(subset);
        let fresh: NodeSet = g
            .intersection(self.partition.layer(l))
            .copied()
            .collect();
        let known: NodeSet = self
            .partition
            .union_up_to(l)
            .difference(&fresh)
            .copied()
            .collect();
        (fresh, known)
    }

    /// Known-context variant that also conditions on deeper-layer nodes
    /// whose block `b - l` transmissions are already side information
    /// (every message they encode at that block has been decoded before
    /// block `b`). Used only for rendering the side-information
    /// annotation.
    pub fn side_info_active_sets(&self, subset: &NodeSet, l: usize) -> (NodeSet, NodeSet) {
        let (fresh, mut known) = self.active_sets(subset, l);
        let plan = self.decode_plan();
        let all_fresh = self.virtual_cover(&self.sources());
        for i in self.covered(&self.sources()) {
            if fresh.contains(&i) || known.contains(&i) || all_fresh.contains(&i) {
                continue;
            }
            let decodable = self
                .flow_set
                .encoded_vector(i, 0)
                .iter()
                .all(|(s, block)| {
                    // Entry <s, b - l - k_{s,i}> is side information when
                    // it was decoded strictly before block b.
                    let k = -block;
                    plan.offsets
                        .get(s)
                        .is_some_and(|offset| *offset < l as i64 + k)
                });
            if decodable {
                known.insert(i);
            }
        }
        (fresh, known)
    }

    /// Per-source decode offsets and per-layer fresh/known sets.
    pub fn decode_plan(&self) -> DecodePlan {
        let sources = self.sources();
        let mut offsets = BTreeMap::new();
        for &s in &sources {
            let vs = self
                .virtual_source(s)
                .expect("sources with flows have virtual sources");
            offsets.insert(s, vs.delay_to_v as i64 + vs.layer_of_v as i64);
        }
        let layers = (0..self.partition.layer_count())
            .map(|l| self.active_sets(&sources, l))
            .collect();
        DecodePlan { layers, offsets }
    }

    /// Verify the splitting inequalities for every source and every flow
    /// node: downstream of the virtual source the layer drop is bounded by
    /// the delay distance, upstream the layer excess strictly exceeds it.
    /// Both follow from the minimality of the virtual source, so this is a
    /// self-check: violations never occur for well-formed inputs.
    pub fn check_splitting(&self) -> Vec<SplittingViolation> {
        let mut out = Vec::new();
        let d = self.destination();
        for s in self.sources() {
            let flow = self.flow_set.flow(s, d).expect("source has flow");
            let vs = match self.virtual_source(s) {
                Ok(vs) => vs,
                Err(e) => {
                    out.push(SplittingViolation {
                        source: s,
                        node: s,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let layer_v = vs.layer_of_v as i64;
            let k_sv = vs.delay_to_v as i64;
            for (l, hop) in flow.hops.iter().enumerate() {
                let k = flow.prefix_delay(l) as i64;
                for &i in &hop.nodes {
                    let layer_i = self.layer_of(i) as i64;
                    if l >= vs.hop_index {
                        if layer_v - layer_i > k - k_sv {
                            out.push(SplittingViolation {
                                source: s,
                                node: i,
                                detail: format!(
                                    "downstream: layer(v)-layer({i}) = {} > k = {}",
                                    layer_v - layer_i,
                                    k - k_sv
                                ),
                            });
                        }
                    } else if layer_i - layer_v <= k_sv - k {
                        out.push(SplittingViolation {
                            source: s,
                            node: i,
                            detail: format!(
                                "upstream: layer({i})-layer(v) = {} <= k = {}",
                                layer_i - layer_v,
                                k_sv - k
                            ),
                        });
                    }
                }
            }
        }
        out
    }

    /// Complete on `S`: the virtual flows of `S` cover everything the
    /// original flows of `S` cover.
    pub fn is_complete_on(&self, subset: &NodeSet) -> bool {
        self.covered(subset) == self.virtual_cover(subset)
    }

    /// Complete: complete on the full source set.
    pub fn is_complete(&self) -> bool {
        self.is_complete_on(&self.sources())
    }

    /// `E(S)`: the partition bifurcates the covered nodes into `F_d(S)`
    /// (deep layers) and the rest (shallow layers), with overlap allowed
    /// at one boundary layer.
    pub fn bifurcates(&self, subset: &NodeSet) -> bool {
        let f_s = self.covered(subset);
        let rest: NodeSet = self
            .covered(&self.sources())
            .difference(&f_s)
            .copied()
            .collect();
        let min_fs = f_s.iter().map(|&i| self.layer_of(i)).min();
        let max_rest = rest.iter().map(|&i| self.layer_of(i)).max();
        match (min_fs, max_rest) {
            (Some(a), Some(b)) => b <= a,
            _ => true,
        }
    }

    /// Equivalence: same destination and sources, identical virtual-flow
    /// hop sequences (node sets, delays ignored), and identical nonempty
    /// layers in order. Equivalent decompositions recover the same region.
    pub fn equivalent(&self, other: &FlowDecomposition) -> bool {
        if self.destination() != other.destination() || self.sources() != other.sources() {
            return false;
        }
        for s in self.sources() {
            match (self.virtual_flow(s), other.virtual_flow(s)) {
                (Ok(a), Ok(b)) => {
                    if a.hop_sets() != b.hop_sets() {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        self.partition.nonempty_layers() == other.partition.nonempty_layers()
    }
}

/// Derive the partition realized by a set of virtual flows and initial
/// layers for their virtual sources: each hop sits its flow's delay-sum
/// below the virtual source. Fails on negative or conflicting layers.
pub fn partition_from_virtual(
    destination: NodeId,
    virtual_flows: &[VirtualFlow],
    initial_layers: &BTreeMap<NodeId, usize>,
) -> Result<LayeredPartition, DecompositionError> {
    let mut assignment: BTreeMap<NodeId, usize> = BTreeMap::new();
    for g in virtual_flows {
        let top = *initial_layers
            .get(&g.source)
            .ok_or(DecompositionError::MissingInitialLayer(g.source))?;
        let mut offset: u64 = 0;
        for (m, hop) in g.hops.iter().enumerate() {
            let layer = (top as i64) - (offset as i64);
            for &i in &hop.nodes {
                if layer < 0 {
                    return Err(DecompositionError::NegativeLayer(i));
                }
                let layer = layer as usize;
                if let Some(prev) = assignment.insert(i, layer) {
                    if prev != layer {
                        return Err(DecompositionError::ConflictingLayer(i));
                    }
                }
            }
            if m + 1 < g.hops.len() {
                offset += hop
                    .delay
                    .as_finite()
                    .expect("inner virtual delays are finite");
            }
        }
    }
    LayeredPartition::from_layer_map(destination, &assignment)
}

/// Construct a complete decomposition for `(flows, destination)`.
///
/// Searches, smallest source first, for per-source hop subsequences whose
/// unclaimed nodes form disjoint spanning virtual flows, places each
/// retained hop at the delay-distance above the deepest retained hop, and
/// keeps the first selection whose derived decomposition verifies as
/// complete. Fails only when no disjoint spanning selection exists.
pub fn construct_complete(
    flow_set: &FlowSet,
    destination: NodeId,
) -> Result<FlowDecomposition, DecompositionError> {
    let sources: Vec<NodeId> = flow_set
        .flows_to(destination)
        .map(|f| f.source)
        .collect();
    if sources.is_empty() {
        return Err(DecompositionError::NoDisjointSpanning(format!(
            "no flows terminate at {destination}"
        )));
    }
    let target: NodeSet = flow_set.covered_nodes(destination, &sources.iter().copied().collect());

    // Candidate hop-index subsequences, longest first then lexicographic,
    // so the first success keeps whole flows intact where possible.
    let candidates_for = |q: usize| -> Vec<Vec<usize>> {
        let mut subs: Vec<Vec<usize>> = Vec::new();
        for mask in 1u32..(1 << q) {
            subs.push((0..q).filter(|i| mask & (1 << i) != 0).collect());
        }
        subs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        subs
    };

    struct Search<'a> {
        flow_set: &'a FlowSet,
        destination: NodeId,
        sources: &'a [NodeId],
        target: &'a NodeSet,
        stuck: Vec<NodeId>,
    }

    impl Search<'_> {
        fn run(
            &mut self,
            idx: usize,
            claimed: &NodeSet,
            chosen: &mut Vec<Vec<(usize, NodeSet)>>,
            candidates_for: &dyn Fn(usize) -> Vec<Vec<usize>>,
        ) -> Option<FlowDecomposition> {
            if idx == self.sources.len() {
                if claimed != self.target {
                    return None;
                }
                return self.realize(chosen);
            }
            let s = self.sources[idx];
            let flow = self.flow_set.flow(s, self.destination).expect("source has flow");
            let mut any = false;
            for subseq in candidates_for(flow.hop_count()) {
                let mut hops: Vec<(usize, NodeSet)> = Vec::with_capacity(subseq.len());
                let mut grabbed = NodeSet::new();
                let mut ok = true;
                for &l in &subseq {
                    let avail: NodeSet = flow.hops[l]
                        .nodes
                        .iter()
                        .copied()
                        .filter(|n| !claimed.contains(n) && !grabbed.contains(n))
                        .collect();
                    if avail.is_empty() {
                        ok = false;
                        break;
                    }
                    grabbed.extend(avail.iter().copied());
                    hops.push((l, avail));
                }
                if !ok {
                    continue;
                }
                any = true;
                let mut next_claimed = claimed.clone();
                next_claimed.extend(grabbed.iter().copied());
                chosen.push(hops);
                if let Some(found) = self.run(idx + 1, &next_claimed, chosen, candidates_for) {
                    return Some(found);
                }
                chosen.pop();
            }
            if !any {
                self.stuck.push(s);
            }
            None
        }

        fn realize(&self, chosen: &[Vec<(usize, NodeSet)>]) -> Option<FlowDecomposition> {
            let mut assignment: BTreeMap<NodeId, usize> = BTreeMap::new();
            for (idx, hops) in chosen.iter().enumerate() {
                let s = self.sources[idx];
                let flow = self.flow_set.flow(s, self.destination).expect("source has flow");
                let deepest = hops.last().expect("candidates are nonempty").0;
                for (l, nodes) in hops {
                    // Layer = delay distance down to the deepest retained
                    // hop, placing that hop at layer zero.
                    let layer = flow
                        .span_delay(*l, deepest)
                        .as_finite()
                        .expect("inner delays are finite") as usize;
                    for &i in nodes {
                        assignment.insert(i, layer);
                    }
                }
            }
            let partition =
                LayeredPartition::from_layer_map(self.destination, &assignment).ok()?;
            let decomp = FlowDecomposition::new(self.flow_set.clone(), partition).ok()?;
            if decomp.is_complete() {
                Some(decomp)
            } else {
                None
            }
        }
    }

    let mut search = Search {
        flow_set,
        destination,
        sources: &sources,
        target: &target,
        stuck: Vec::new(),
    };
    let mut chosen = Vec::new();
    search
        .run(0, &NodeSet::new(), &mut chosen, &candidates_for)
        .ok_or_else(|| {
            let stuck: NodeSet = search.stuck.iter().copied().collect();
            DecompositionError::NoDisjointSpanning(format!(
                "sources {} could not claim any hop",
                render_set(&stuck)
            ))
        })
}
