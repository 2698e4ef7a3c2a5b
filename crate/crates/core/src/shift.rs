//! The shift operator and the covering loop.
//!
//! Shifting a complete decomposition by a source subset `S` pushes every
//! node serving `S` one layer deeper, unless the partition already
//! bifurcates the covered nodes into `F_d(S)`, in which case nothing
//! moves. The covering loop starts from a complete decomposition and
//! repeatedly shifts by the largest violating subset; it terminates with a
//! decomposition whose region contains the requested rate vector.

use std::fmt;

use thiserror::Error;

use crate::channel::{
    eval_region, joint_distribution, ChannelError, DmChannel, InputDist, JointDist, RateVector,
};
use crate::decomposition::{construct_complete, DecompositionError, FlowDecomposition};
use crate::flow::FlowSet;
use crate::node::{nonempty_subsets, render_set, ChannelRoles, NodeId, NodeSet};
use crate::region::df_region;

/// Float tolerance for the runtime invariant assertions. The asserted
/// inequalities hold exactly in real arithmetic, so anything beyond
/// accumulated rounding marks a bug.
const ASSERT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("shift requires a complete decomposition")]
    NotComplete,
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
}

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("rate vector outside the outer region; violated subsets: {}",
        .violated.iter().map(render_set).collect::<Vec<_>>().join(" "))]
    OutsideOuterRegion { violated: Vec<NodeSet> },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error("step {step}: {detail}")]
    InvariantViolation { step: usize, detail: String },
    #[error("covering loop exceeded {max_steps} steps")]
    MaxStepsExceeded {
        max_steps: usize,
        trace: Box<ShiftTrace>,
    },
}

/// One recorded state of the covering loop: the partition before the
/// shift, the violating subset driving it (`None` marks the terminal
/// state), and the satisfied closure at that point.
#[derive(Debug, Clone)]
pub struct ShiftStep {
    pub partition: crate::decomposition::LayeredPartition,
    pub violating: Option<NodeSet>,
    pub satisfied: NodeSet,
}

/// The full covering trace; `steps` includes the terminal state, so a
/// rate vector covered without shifting yields a trace of length one.
#[derive(Debug, Clone)]
pub struct ShiftTrace {
    pub steps: Vec<ShiftStep>,
    pub terminal: FlowDecomposition,
}

impl ShiftTrace {
    /// Number of shifts applied.
    pub fn shift_count(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

impl fmt::Display for ShiftTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, step) in self.steps.iter().enumerate() {
            let u = step
                .violating
                .as_ref()
                .map_or("none".to_string(), render_set);
            writeln!(f, "step {k}: U={u} partition={}", step.partition)?;
        }
        Ok(())
    }
}

/// Apply one shift: every node of `G_d(S)` moves one layer deeper unless
/// the partition bifurcates into `F_d(S)` (then nothing moves and the
/// input is returned unchanged). Requires a complete decomposition;
/// completeness is preserved.
pub fn shift(
    decomp: &FlowDecomposition,
    subset: &NodeSet,
) -> Result<FlowDecomposition, ShiftError> {
    if !decomp.is_complete() {
        return Err(ShiftError::NotComplete);
    }
    let delta: usize = if decomp.bifurcates(subset) { 0 } else { 1 };
    if delta == 0 {
        return Ok(decomp.clone());
    }
    let moving = decomp.virtual_cover(subset);
    let mut assignment = std::collections::BTreeMap::new();
    for node in decomp.covered(&decomp.sources()) {
        let layer = decomp
            .partition()
            .layer_of(node)
            .expect("covered nodes are layered");
        let layer = if moving.contains(&node) {
            layer + 1
        } else {
            layer
        };
        assignment.insert(node, layer);
    }
    let partition = crate::decomposition::LayeredPartition::from_layer_map(
        decomp.destination(),
        &assignment,
    )?;
    Ok(FlowDecomposition::new(decomp.flow_set().clone(), partition)?)
}

/// The margins of a decomposition's region against a rate vector, keyed
/// by subset in canonical order.
fn region_margins(
    decomp: &FlowDecomposition,
    roles: &ChannelRoles,
    joint: &JointDist,
    rates: &RateVector,
) -> Result<Vec<(NodeSet, f64)>, ChannelError> {
    let region = df_region(decomp, roles);
    Ok(eval_region(&region, joint, rates, 0.0)?.margins)
}

/// The largest subset violating the decomposition's region under slack
/// `eps` (margin below `eps`), ties broken toward the lexicographically
/// smallest id sequence; `None` when every subset is satisfied.
pub fn largest_violating_subset(
    decomp: &FlowDecomposition,
    roles: &ChannelRoles,
    joint: &JointDist,
    rates: &RateVector,
    eps: f64,
) -> Result<Option<NodeSet>, ChannelError> {
    let margins = region_margins(decomp, roles, joint, rates)?;
    let violated: Vec<&NodeSet> = margins
        .iter()
        .filter(|(_, m)| *m < eps)
        .map(|(s, _)| s)
        .collect();
    let max_len = violated.iter().map(|s| s.len()).max();
    // Margins come in canonical (cardinality, lexicographic) order, so the
    // first subset of maximal cardinality is the canonical pick.
    Ok(max_len.and_then(|len| {
        violated
            .into_iter()
            .find(|s| s.len() == len)
            .cloned()
    }))
}

/// The largest source subset all of whose nonempty subsets are satisfied
/// under slack `eps` (the `V` of the covering loop), ties broken toward
/// the lexicographically smallest. Empty when even a singleton violates.
pub fn satisfied_closure(
    decomp: &FlowDecomposition,
    roles: &ChannelRoles,
    joint: &JointDist,
    rates: &RateVector,
    eps: f64,
) -> Result<NodeSet, ChannelError> {
    let margins = region_margins(decomp, roles, joint, rates)?;
    let satisfied: std::collections::BTreeSet<&NodeSet> = margins
        .iter()
        .filter(|(_, m)| *m >= eps)
        .map(|(s, _)| s)
        .collect();
    let mut candidates = nonempty_subsets(&decomp.sources());
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    for candidate in candidates {
        let closed = nonempty_subsets(&candidate)
            .iter()
            .all(|s| satisfied.contains(s));
        if closed {
            return Ok(candidate);
        }
    }
    Ok(NodeSet::new())
}

/// An engineering guard on the number of shifts: sources times total
/// finite delay (plus one) times covered nodes. Convergence is proven, so
/// exceeding this is an error, never a silent truncation.
pub fn default_max_steps(flow_set: &FlowSet, destination: NodeId) -> usize {
    let sources: NodeSet = flow_set.flows_to(destination).map(|f| f.source).collect();
    let covered = flow_set.covered_nodes(destination, &sources);
    let total_delay: u64 = flow_set
        .iter()
        .flat_map(|f| f.hops.iter())
        .filter_map(|h| h.delay.as_finite())
        .sum();
    sources.len().max(1) * (1 + total_delay as usize) * covered.len().max(1)
}

/// The covering loop: starting from a constructed complete decomposition,
/// shift by the largest violating subset until none remains. The terminal
/// decomposition's region contains `rates`.
///
/// Two exact inequalities are asserted after every shift and fail the run
/// if violated: every subset of `(S \ U) + V` must be satisfied by the
/// shifted decomposition, and the new largest violator must not strictly
/// contain the old one. Completeness is also re-checked per step.
#[allow(clippy::too_many_arguments)]
pub fn cover(
    flow_set: &FlowSet,
    roles: &ChannelRoles,
    destination: NodeId,
    rates: &RateVector,
    channel: &DmChannel,
    inputs: &InputDist,
    eps: f64,
    max_steps: usize,
) -> Result<ShiftTrace, CoverError> {
    let joint = joint_distribution(channel, inputs)?;
    let outer = crate::region::outer_region(flow_set, roles, destination);
    let membership = eval_region(&outer, &joint, rates, eps)?;
    if !membership.member {
        return Err(CoverError::OutsideOuterRegion {
            violated: membership.violated,
        });
    }

    let mut decomp = construct_complete(flow_set, destination)?;
    let mut steps: Vec<ShiftStep> = Vec::new();

    for step_index in 0..=max_steps {
        let violating = largest_violating_subset(&decomp, roles, &joint, rates, eps)?;
        let satisfied = satisfied_closure(&decomp, roles, &joint, rates, eps)?;
        steps.push(ShiftStep {
            partition: decomp.partition().clone(),
            violating: violating.clone(),
            satisfied: satisfied.clone(),
        });
        let Some(u) = violating else {
            return Ok(ShiftTrace {
                steps,
                terminal: decomp,
            });
        };

        let next = shift(&decomp, &u)?;
        if !next.is_complete() {
            return Err(CoverError::InvariantViolation {
                step: step_index,
                detail: "shift broke completeness".to_string(),
            });
        }

        // Induction: every nonempty subset of (S \ U) + V holds in the
        // shifted decomposition.
        let sources = decomp.sources();
        let mut protected: NodeSet = sources.difference(&u).copied().collect();
        protected.extend(satisfied.iter().copied());
        let next_margins = region_margins(&next, roles, &joint, rates)?;
        for subset in nonempty_subsets(&protected) {
            let margin = next_margins
                .iter()
                .find(|(s, _)| *s == subset)
                .map(|(_, m)| *m)
                .expect("margins cover every subset");
            if margin < -ASSERT_TOL {
                return Err(CoverError::InvariantViolation {
                    step: step_index,
                    detail: format!(
                        "induction failed: subset {} has margin {margin} after shifting by {}",
                        render_set(&subset),
                        render_set(&u)
                    ),
                });
            }
        }

        // Termination: the next violator never strictly contains the
        // current one.
        if let Some(u_next) = largest_violating_subset(&next, roles, &joint, rates, eps)? {
            if u.is_subset(&u_next) && u != u_next {
                return Err(CoverError::InvariantViolation {
                    step: step_index,
                    detail: format!(
                        "termination failed: violator grew from {} to {}",
                        render_set(&u),
                        render_set(&u_next)
                    ),
                });
            }
        }

        decomp = next;
    }

    let terminal = decomp;
    Err(CoverError::MaxStepsExceeded {
        max_steps,
        trace: Box::new(ShiftTrace {
            steps,
            terminal,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_instances;
    use crate::decomposition::LayeredPartition;
    use crate::node::nodes;
    use crate::text::{parse_flow_file, parse_partition_literal};

    const DIAMOND: &str = "flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf\n\
                           flow 2 -> 5 : {2} k=1 ; {4} k=inf";

    fn diamond_decomp(partition: &str) -> FlowDecomposition {
        let set = parse_flow_file(DIAMOND).unwrap();
        let layers = parse_partition_literal(partition).unwrap();
        let p = LayeredPartition::new(NodeId(5), layers).unwrap();
        FlowDecomposition::new(set, p).unwrap()
    }

    #[test]
    fn diamond_shift_chain_reproduces_schemes() {
        let s1 = diamond_decomp("({3,4},{},{2},{1})");
        let s2 = shift(&s1, &nodes([2])).unwrap();
        assert_eq!(s2.partition().to_string(), "({3},{4},{2},{1})");
        let s3 = shift(&s2, &nodes([2])).unwrap();
        assert_eq!(s3.partition().to_string(), "({3},{},{4},{1,2})");
        let s4 = shift(&s3, &nodes([2])).unwrap();
        assert_eq!(s4.partition().to_string(), "({3},{},{},{1,4},{2})");
    }

    #[test]
    fn bifurcated_subsets_are_fixed_points() {
        let s4 = diamond_decomp("({3},{},{},{1,4},{2})");
        assert!(s4.bifurcates(&nodes([2])));
        let shifted = shift(&s4, &nodes([2])).unwrap();
        assert_eq!(shifted.partition(), s4.partition());
        let s1 = diamond_decomp("({3,4},{},{2},{1})");
        assert!(s1.bifurcates(&nodes([1])));
        let shifted = shift(&s1, &nodes([1])).unwrap();
        assert_eq!(shifted.partition(), s1.partition());
    }

    #[test]
    fn shifting_by_an_unsatisfied_source_grows_the_partition() {
        // Shifting scheme 3 by {1} adds a deeper layer and leaves layer 0
        // empty; the result is equivalent to scheme 2 (same nonempty
        // layers, same virtual flows).
        let s3 = diamond_decomp("({3},{},{4},{1,2})");
        let shifted = shift(&s3, &nodes([1])).unwrap();
        assert_eq!(shifted.partition().to_string(), "({},{3},{4},{2},{1})");
        let g1 = shifted.virtual_flow(NodeId(1)).unwrap();
        assert_eq!(
            crate::flow::render_hops(&g1.hops),
            "{1} k=1 ; {2} k=2 ; {3} k=inf"
        );
        let s2 = diamond_decomp("({3},{4},{2},{1})");
        assert!(shifted.equivalent(&s2));
        assert!(shifted.is_complete_on(&nodes([1])));
    }

    #[test]
    fn shift_rejects_incomplete_decompositions() {
        let set = parse_flow_file("flow 1 -> 3 : {1} k=1 ; {2} k=inf").unwrap();
        let p = LayeredPartition::new(
            NodeId(3),
            parse_partition_literal("({2},{},{1})").unwrap(),
        )
        .unwrap();
        let incomplete = FlowDecomposition::new(set, p).unwrap();
        assert!(matches!(
            shift(&incomplete, &nodes([1])),
            Err(ShiftError::NotComplete)
        ));
    }

    #[test]
    fn zero_rates_cover_immediately() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 17)
            .pop()
            .unwrap();
        let zero = RateVector::zero(&roles.sources);
        let trace = cover(
            &set,
            &roles,
            NodeId(5),
            &zero,
            &ch,
            &inp,
            1e-6,
            default_max_steps(&set, NodeId(5)),
        )
        .unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.shift_count(), 0);
    }

    #[test]
    fn rates_outside_the_outer_region_are_rejected() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 17)
            .pop()
            .unwrap();
        let huge = RateVector::new(
            [(NodeId(1), 50.0), (NodeId(2), 50.0)].into_iter().collect(),
        );
        match cover(&set, &roles, NodeId(5), &huge, &ch, &inp, 1e-6, 64) {
            Err(CoverError::OutsideOuterRegion { violated }) => {
                assert!(violated.contains(&nodes([1, 2])));
            }
            other => panic!("expected outer-region rejection, got {other:?}"),
        }
    }

    #[test]
    fn near_face_rate_vector_drives_the_loop_to_scheme4() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 23)
            .pop()
            .unwrap();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let outer = crate::region::outer_region(&set, &roles, NodeId(5));
        let bound = |s: &NodeSet| {
            crate::channel::constraint_bound(outer.constraint_for(s).unwrap(), &joint).unwrap()
        };
        let r2 = bound(&nodes([2]));
        let sum = bound(&nodes([1, 2]));
        let rates = RateVector::new(
            [(NodeId(1), 0.99 * (sum - r2)), (NodeId(2), 0.99 * r2)]
                .into_iter()
                .collect(),
        );
        let trace = cover(
            &set,
            &roles,
            NodeId(5),
            &rates,
            &ch,
            &inp,
            1e-6,
            default_max_steps(&set, NodeId(5)),
        )
        .unwrap();
        let s4 = diamond_decomp("({3},{},{},{1,4},{2})");
        assert!(
            trace.terminal.equivalent(&s4),
            "terminal {} not equivalent to scheme 4",
            trace.terminal.partition()
        );
    }

    #[test]
    fn largest_violator_takes_cardinality_then_lexicographic_order() {
        // Three-source relay channel, shallow layering: drive the rate of
        // source 2 past its bound and the pair {2,3} past theirs, keeping
        // everything else inside. The largest violator is then {2,3}, and
        // the satisfied closure cannot contain source 2.
        let set = parse_flow_file(
            "flow 1 -> 5 : {1} k=1 ; {4} k=inf\n\
             flow 2 -> 5 : {2} k=1 ; {4} k=inf\n\
             flow 3 -> 5 : {3} k=1 ; {4} k=inf",
        )
        .unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let decomp = FlowDecomposition::new(
            set.clone(),
            LayeredPartition::new(
                NodeId(5),
                parse_partition_literal("({2,3,4},{1})").unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 41)
            .pop()
            .unwrap();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let bounds: std::collections::BTreeMap<NodeSet, f64> =
            crate::channel::region_bounds(&df_region(&decomp, &roles), &joint)
                .unwrap()
                .into_iter()
                .collect();
        let r2 = bounds[&nodes([2])] * 1.05;
        let r3 = (bounds[&nodes([2, 3])] * 1.05 - r2).max(0.0);
        let rates = RateVector::new(
            [(NodeId(1), 1e-4), (NodeId(2), r2), (NodeId(3), r3)]
                .into_iter()
                .collect(),
        );
        // The construction must produce exactly the intended pattern on
        // this channel; fail loudly if the instance is unsuitable.
        let margins = crate::channel::eval_region(&df_region(&decomp, &roles), &joint, &rates, 1e-6)
            .unwrap();
        assert!(margins.violated.contains(&nodes([2])), "{margins:?}");
        assert!(margins.violated.contains(&nodes([2, 3])), "{margins:?}");
        assert!(!margins.violated.contains(&nodes([1, 2, 3])), "{margins:?}");

        let u = largest_violating_subset(&decomp, &roles, &joint, &rates, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(u, nodes([2, 3]));
        let v = satisfied_closure(&decomp, &roles, &joint, &rates, 1e-6).unwrap();
        assert!(!v.contains(&NodeId(2)), "V = {v:?} must avoid source 2");

        // A vector violating only the singleton {1} yields U = {1}.
        let shallow = FlowDecomposition::new(
            set,
            LayeredPartition::new(
                NodeId(5),
                parse_partition_literal("({2,4},{1,3})").unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        let bounds: std::collections::BTreeMap<NodeSet, f64> =
            crate::channel::region_bounds(&df_region(&shallow, &roles), &joint)
                .unwrap()
                .into_iter()
                .collect();
        let rates = RateVector::new(
            [
                (NodeId(1), bounds[&nodes([1])] * 1.02),
                (NodeId(2), 0.0),
                (NodeId(3), 0.0),
            ]
            .into_iter()
            .collect(),
        );
        let margins =
            crate::channel::eval_region(&df_region(&shallow, &roles), &joint, &rates, 1e-6)
                .unwrap();
        assert_eq!(margins.violated, vec![nodes([1])], "{margins:?}");
        let u = largest_violating_subset(&shallow, &roles, &joint, &rates, 1e-6)
            .unwrap()
            .unwrap();
        assert_eq!(u, nodes([1]));
        let v = satisfied_closure(&shallow, &roles, &joint, &rates, 1e-6).unwrap();
        assert_eq!(v, nodes([2, 3]));
    }

    #[test]
    fn deep_interior_rates_have_no_violator() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let decomp = diamond_decomp("({3,4},{},{2},{1})");
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 17)
            .pop()
            .unwrap();
        let joint = joint_distribution(&ch, &inp).unwrap();
        let zero = RateVector::zero(&roles.sources);
        assert_eq!(
            largest_violating_subset(&decomp, &roles, &joint, &zero, 1e-6).unwrap(),
            None
        );
    }

    #[test]
    fn trace_rendering_lists_steps() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = crate::node::ChannelRoles::infer(&set);
        let (ch, inp) = random_instances(&roles.inputs, NodeId(5), 2, 4, 1, 17)
            .pop()
            .unwrap();
        let zero = RateVector::zero(&roles.sources);
        let trace = cover(&set, &roles, NodeId(5), &zero, &ch, &inp, 1e-6, 64).unwrap();
        let text = trace.to_string();
        assert!(text.starts_with("step 0: U=none partition=({3,4},{},{2},{1})"));
    }
}
