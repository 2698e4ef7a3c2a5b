//! Slow, independent reference implementations and instance generators
//! used by the verification suites. Nothing here is on any production
//! code path; the point of each function is to agree with (or exhaustively
//! cross-check) the fast path while sharing as little code with it as
//! possible.

use std::collections::BTreeMap;

use rand::Rng;

use crate::channel::{DmChannel, InputDist};
use crate::decomposition::{FlowDecomposition, LayeredPartition};
use crate::flow::{Delay, Flow, FlowSet, Hop};
use crate::node::{ChannelRoles, NodeId, NodeSet};
use crate::region::MiTerm;

/// Independent mutual-information oracle: enumerates every `(x, y)` tuple
/// with its own odometer, accumulates the four marginals in maps keyed by
/// digit tuples, and combines their entropies as
/// `H(AB) + H(BY) - H(B) - H(ABY)`.
pub fn oracle_mutual_info(term: &MiTerm, channel: &DmChannel, inputs: &InputDist) -> f64 {
    if term.is_zero() {
        return 0.0;
    }
    let in_nodes: Vec<NodeId> = channel.input_nodes().into_iter().collect();
    let out_nodes: Vec<NodeId> = channel.output_nodes().into_iter().collect();
    let in_sizes: Vec<usize> = in_nodes
        .iter()
        .map(|n| channel.input_alphabet(*n).expect("input node"))
        .collect();
    let out_sizes: Vec<usize> = out_nodes
        .iter()
        .map(|n| channel.output_alphabet(*n).expect("output node"))
        .collect();

    let a_idx: Vec<usize> = in_nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| term.fresh().contains(n))
        .map(|(i, _)| i)
        .collect();
    let b_idx: Vec<usize> = in_nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| term.given().contains(n))
        .map(|(i, _)| i)
        .collect();
    let y_idx = out_nodes
        .iter()
        .position(|n| *n == term.dest)
        .expect("destination is an output node");

    let mut h_ab: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut h_by: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut h_b: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut h_aby: BTreeMap<Vec<usize>, f64> = BTreeMap::new();

    let mut x = vec![0usize; in_sizes.len()];
    loop {
        let px: f64 = x
            .iter()
            .zip(&in_nodes)
            .map(|(&xi, n)| inputs.pmf(*n).expect("pmf per input")[xi])
            .product();
        let row_base = x.iter().zip(&in_sizes).fold(0usize, |acc, (&xi, &s)| {
            acc * s + xi
        });
        let mut y = vec![0usize; out_sizes.len()];
        loop {
            let col = y.iter().zip(&out_sizes).fold(0usize, |acc, (&yi, &s)| {
                acc * s + yi
            });
            let out_states: usize = out_sizes.iter().product();
            let p = px * channel.cond_pmf()[row_base * out_states + col];
            if p > 0.0 {
                let ka: Vec<usize> = a_idx.iter().map(|&i| x[i]).collect();
                let kb: Vec<usize> = b_idx.iter().map(|&i| x[i]).collect();
                let yv = y[y_idx];
                let mut kab = kb.clone();
                kab.extend(&ka);
                let mut kby = kb.clone();
                kby.push(yv);
                let mut kaby = kab.clone();
                kaby.push(yv);
                *h_ab.entry(kab).or_insert(0.0) += p;
                *h_by.entry(kby).or_insert(0.0) += p;
                *h_b.entry(kb).or_insert(0.0) += p;
                *h_aby.entry(kaby).or_insert(0.0) += p;
            }
            if !advance(&mut y, &out_sizes) {
                break;
            }
        }
        if !advance(&mut x, &in_sizes) {
            break;
        }
    }

    let ent = |m: &BTreeMap<Vec<usize>, f64>| -> f64 {
        m.values()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    };
    ent(&h_ab) + ent(&h_by) - ent(&h_b) - ent(&h_aby)
}

fn advance(digits: &mut [usize], sizes: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < sizes[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Every layered partition of `covered` with at most `max_layers` layers,
/// as layer maps (the trailing layer is nonempty by construction since
/// depth is the deepest occupied layer plus one).
pub fn enumerate_partitions(covered: &NodeSet, max_layers: usize) -> Vec<LayeredPartition> {
    let nodes: Vec<NodeId> = covered.iter().copied().collect();
    let mut out = Vec::new();
    if nodes.is_empty() {
        return out;
    }
    let mut digits = vec![0usize; nodes.len()];
    let sizes = vec![max_layers; nodes.len()];
    loop {
        let assignment: BTreeMap<NodeId, usize> = nodes
            .iter()
            .copied()
            .zip(digits.iter().copied())
            .collect();
        out.push(
            LayeredPartition::from_layer_map(NodeId(0), &assignment)
                .expect("layer maps are disjoint"),
        );
        if !advance(&mut digits, &sizes) {
            break;
        }
    }
    out
}

/// All decompositions of a flow set against one destination with at most
/// `max_layers` layers.
pub fn all_decompositions(
    flow_set: &FlowSet,
    destination: NodeId,
    max_layers: usize,
) -> Vec<FlowDecomposition> {
    let sources: NodeSet = flow_set.flows_to(destination).map(|f| f.source).collect();
    let covered = flow_set.covered_nodes(destination, &sources);
    enumerate_partitions(&covered, max_layers)
        .into_iter()
        .filter_map(|p| {
            let relabeled = LayeredPartition::new(destination, p.layers().to_vec()).ok()?;
            FlowDecomposition::new(flow_set.clone(), relabeled).ok()
        })
        .collect()
}

/// A random single-destination flow set on at most `max_nodes` nodes with
/// singleton hops and delays up to `max_delay`. Returns the flow set, the
/// inferred roles, and the destination.
pub fn random_flow_set(
    rng: &mut impl Rng,
    max_nodes: usize,
    max_delay: u64,
) -> (FlowSet, ChannelRoles, NodeId) {
    let n = rng.random_range(2..=max_nodes.max(2));
    let dest = NodeId(n as u32);
    let source_count = rng.random_range(1..=((n - 1).min(2)));
    let mut set = FlowSet::new();
    for s in 1..=source_count {
        let source = NodeId(s as u32);
        // Relay pool: every non-destination node except the source itself.
        let pool: Vec<NodeId> = (1..n)
            .map(|i| NodeId(i as u32))
            .filter(|&i| i != source)
            .collect();
        let hops_beyond = if pool.is_empty() {
            0
        } else {
            rng.random_range(0..=pool.len().min(3))
        };
        let mut chosen = pool;
        // Partial shuffle, then truncate.
        for i in (1..chosen.len()).rev() {
            let j = rng.random_range(0..=i);
            chosen.swap(i, j);
        }
        chosen.truncate(hops_beyond);

        let mut hops = vec![Hop::new([source].into_iter().collect(), Delay::Finite(0))];
        for relay in chosen {
            hops.push(Hop::new([relay].into_iter().collect(), Delay::Finite(0)));
        }
        let q = hops.len();
        for (l, hop) in hops.iter_mut().enumerate() {
            hop.delay = if l + 1 == q && rng.random_bool(0.5) {
                Delay::Infinite
            } else {
                Delay::Finite(rng.random_range(1..=max_delay))
            };
        }
        set.insert(Flow {
            source,
            destination: dest,
            hops,
        })
        .expect("distinct pairs");
    }
    let roles = ChannelRoles::infer(&set);
    (set, roles, dest)
}

/// A uniformly random layer assignment of `covered` into at most
/// `max_layers` layers.
pub fn random_partition(
    destination: NodeId,
    covered: &NodeSet,
    max_layers: usize,
    rng: &mut impl Rng,
) -> LayeredPartition {
    let assignment: BTreeMap<NodeId, usize> = covered
        .iter()
        .map(|&n| (n, rng.random_range(0..max_layers)))
        .collect();
    LayeredPartition::from_layer_map(destination, &assignment).expect("assignments are disjoint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{joint_distribution, mutual_info};
    use crate::node::nodes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_agrees_with_fast_path_on_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let ch = DmChannel::random(
                &[(NodeId(1), 2), (NodeId(2), 2), (NodeId(3), 3)],
                &[(NodeId(9), 3)],
                &mut rng,
            );
            let inp = InputDist::random(&ch, &mut rng);
            let joint = joint_distribution(&ch, &inp).unwrap();
            let term = MiTerm::new(nodes([1, 3]), nodes([2]), NodeId(9));
            let fast = mutual_info(&term, &joint).unwrap();
            let slow = oracle_mutual_info(&term, &ch, &inp);
            assert!((fast - slow).abs() < 1e-12, "fast {fast} vs oracle {slow}");
        }
    }

    #[test]
    fn partition_enumeration_counts() {
        // Two nodes, up to three layers: 9 assignments.
        let parts = enumerate_partitions(&nodes([1, 2]), 3);
        assert_eq!(parts.len(), 9);
        for p in &parts {
            assert!(!p.layers().last().unwrap().is_empty());
        }
    }

    #[test]
    fn random_flow_sets_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (set, roles, _) = random_flow_set(&mut rng, 5, 3);
            let report = set.validate(&roles);
            assert!(report.is_empty(), "{report:?}\n{set}");
        }
    }
}
