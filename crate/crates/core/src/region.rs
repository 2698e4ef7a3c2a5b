//! Symbolic rate-region constraints.
//!
//! Both regions bound every nonempty source subset `S` by a sum of
//! conditional mutual-information terms against one destination: the outer
//! bound uses a single cut-set term per subset, the per-decomposition
//! region one term per layer. Terms stay symbolic here; `channel`
//! evaluates them on concrete channels.

use std::fmt;

use crate::decomposition::FlowDecomposition;
use crate::flow::FlowSet;
use crate::node::{nonempty_subsets, render_set, ChannelRoles, NodeId, NodeSet};

/// `I(X_A ; Y_d | X_B)` with `A` fresh and `B` given. Construction
/// normalizes `A := A \ B`, so conditioning on a fresh variable leaves a
/// zero-valued term rather than an ill-formed one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MiTerm {
    fresh: NodeSet,
    given: NodeSet,
    pub dest: NodeId,
}

impl MiTerm {
    pub fn new(fresh: NodeSet, given: NodeSet, dest: NodeId) -> Self {
        let fresh = fresh.difference(&given).copied().collect();
        MiTerm { fresh, given, dest }
    }

    pub fn fresh(&self) -> &NodeSet {
        &self.fresh
    }

    pub fn given(&self) -> &NodeSet {
        &self.given
    }

    /// True when the fresh set is empty; such terms evaluate to exactly 0.
    pub fn is_zero(&self) -> bool {
        self.fresh.is_empty()
    }
}

impl fmt::Display for MiTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.given.is_empty() {
            write!(f, "I(X{};Y{})", render_set(&self.fresh), self.dest)
        } else {
            write!(
                f,
                "I(X{};Y{}|X{})",
                render_set(&self.fresh),
                self.dest,
                render_set(&self.given)
            )
        }
    }
}

/// `R_S < sum of terms` for one source subset. The inequality is strict;
/// numeric membership applies a configurable slack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub subset: NodeSet,
    pub terms: Vec<MiTerm>,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{} < ", render_set(&self.subset))?;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// A rate region for one destination: one constraint per nonempty subset
/// of the sources (excluding the destination), in canonical subset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub destination: NodeId,
    pub sources: NodeSet,
    pub constraints: Vec<Constraint>,
}

impl Region {
    pub fn constraint_for(&self, subset: &NodeSet) -> Option<&Constraint> {
        self.constraints.iter().find(|c| &c.subset == subset)
    }

    pub fn render(&self) -> String {
        let lines: Vec<String> = self.constraints.iter().map(|c| c.to_string()).collect();
        lines.join("\n")
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

fn region_subsets(roles: &ChannelRoles, destination: NodeId) -> Vec<NodeSet> {
    let mut sources = roles.sources.clone();
    sources.remove(&destination);
    nonempty_subsets(&sources)
}

/// The cut-set outer bound for destination `d`: for each subset `S`, the
/// rate of the super-source `F_d(S)` is bounded by the point-to-point
/// capacity term `I(X_{F_d(S)}; Y_d | X_{~F_d(S)})`.
pub fn outer_region(flows: &FlowSet, roles: &ChannelRoles, destination: NodeId) -> Region {
    let mut sources = roles.sources.clone();
    sources.remove(&destination);
    let constraints = region_subsets(roles, destination)
        .into_iter()
        .map(|subset| {
            let covered = flows.covered_nodes(destination, &subset);
            let rest = flows.complement_covered(&roles.inputs, destination, &subset);
            Constraint {
                terms: vec![MiTerm::new(covered, rest, destination)],
                subset,
            }
        })
        .collect();
    Region {
        destination,
        sources,
        constraints,
    }
}

/// The decode-forward region of one flow decomposition: for each subset
/// `S`, one term per layer bounding `R_S` by
/// `sum_l I(X_{A_l(S)}; Y_d | X_{A~_l(S)})`, zero-valued layers omitted.
pub fn df_region(decomp: &FlowDecomposition, roles: &ChannelRoles) -> Region {
    let destination = decomp.destination();
    let mut sources = roles.sources.clone();
    sources.remove(&destination);
    let constraints = region_subsets(roles, destination)
        .into_iter()
        .map(|subset| {
            let terms = (0..decomp.partition().layer_count())
                .filter_map(|l| {
                    let (fresh, known) = decomp.active_sets(&subset, l);
                    if fresh.is_empty() {
                        None
                    } else {
                        Some(MiTerm::new(fresh, known, destination))
                    }
                })
                .collect();
            Constraint { subset, terms }
        })
        .collect();
    Region {
        destination,
        sources,
        constraints,
    }
}

/// The side-information variant of the decode-forward region: each layer
/// additionally conditions on covered nodes outside the virtual flows
/// whose transmissions in that layer's block are already decoded. Emitted
/// only as an annotation next to the main region, never in place of it.
pub fn df_region_side_info(decomp: &FlowDecomposition, roles: &ChannelRoles) -> Region {
    let destination = decomp.destination();
    let mut sources = roles.sources.clone();
    sources.remove(&destination);
    let constraints = region_subsets(roles, destination)
        .into_iter()
        .map(|subset| {
            let terms = (0..decomp.partition().layer_count())
                .filter_map(|l| {
                    let (fresh, known) = decomp.side_info_active_sets(&subset, l);
                    if fresh.is_empty() {
                        None
                    } else {
                        Some(MiTerm::new(fresh, known, destination))
                    }
                })
                .collect();
            Constraint { subset, terms }
        })
        .collect();
    Region {
        destination,
        sources,
        constraints,
    }
}

/// The intersection of several single-destination regions: a rate vector
/// belongs to it when it belongs to every part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionIntersection {
    pub parts: Vec<Region>,
}

pub fn intersect_regions(parts: Vec<Region>) -> RegionIntersection {
    RegionIntersection { parts }
}

impl RegionIntersection {
    /// All constraints, tagged with their destination.
    pub fn constraints(&self) -> impl Iterator<Item = (&Region, &Constraint)> {
        self.parts
            .iter()
            .flat_map(|r| r.constraints.iter().map(move |c| (r, c)))
    }
}

/// Text rendering of the decoding plan, one line per layer mirroring the
/// per-block typicality checks: the fresh codewords of layer `l` are
/// checked against block `b - l` with the earlier layers as known context.
pub fn render_decoding_plan(decomp: &FlowDecomposition) -> String {
    let plan = decomp.decode_plan();
    let mut out = String::new();
    let offsets: Vec<String> = plan
        .offsets
        .iter()
        .map(|(s, k)| format!("{s}: b-{k}"))
        .collect();
    out.push_str(&format!("decode blocks: {}\n", offsets.join(", ")));
    for (l, (fresh, known)) in plan.layers.iter().enumerate() {
        out.push_str(&format!(
            "layer {l} (block b-{l}): fresh {}, known {}\n",
            render_set(fresh),
            render_set(known)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::LayeredPartition;
    use crate::node::nodes;
    use crate::text::{parse_flow_file, parse_partition_literal};

    const DIAMOND: &str = "flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf\n\
                           flow 2 -> 5 : {2} k=1 ; {4} k=inf";

    fn diamond_decomp(partition: &str) -> (FlowDecomposition, ChannelRoles) {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = ChannelRoles::infer(&set);
        let layers = parse_partition_literal(partition).unwrap();
        let p = LayeredPartition::new(NodeId(5), layers).unwrap();
        (FlowDecomposition::new(set, p).unwrap(), roles)
    }

    #[test]
    fn outer_region_diamond_renders_exactly() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = ChannelRoles::infer(&set);
        let region = outer_region(&set, &roles, NodeId(5));
        assert_eq!(
            region.render(),
            "R{1} < I(X{1,2,3};Y5|X{4})\n\
             R{2} < I(X{2,4};Y5|X{1,3})\n\
             R{1,2} < I(X{1,2,3,4};Y5)"
        );
    }

    #[test]
    fn outer_region_single_flow_line() {
        let set = parse_flow_file("flow 1 -> 3 : {1} k=1 ; {2} k=inf").unwrap();
        let roles = ChannelRoles::infer(&set);
        let region = outer_region(&set, &roles, NodeId(3));
        assert_eq!(region.render(), "R{1} < I(X{1,2};Y3)");
    }

    #[test]
    fn outer_region_three_sources_has_seven_constraints() {
        let set = parse_flow_file(
            "flow 1 -> 5 : {1} k=1 ; {4} k=inf\n\
             flow 2 -> 5 : {2} k=1 ; {4} k=inf\n\
             flow 3 -> 5 : {3} k=1 ; {4} k=inf",
        )
        .unwrap();
        let roles = ChannelRoles::infer(&set);
        let region = outer_region(&set, &roles, NodeId(5));
        assert_eq!(region.constraints.len(), 7);
        assert_eq!(
            region.constraints.last().unwrap().to_string(),
            "R{1,2,3} < I(X{1,2,3,4};Y5)"
        );
    }

    #[test]
    fn df_region_line_examples() {
        let set = parse_flow_file("flow 1 -> 3 : {1} k=1 ; {2} k=inf").unwrap();
        let roles = ChannelRoles::infer(&set);
        let two = FlowDecomposition::new(
            set.clone(),
            LayeredPartition::new(NodeId(3), parse_partition_literal("({2},{1})").unwrap())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(
            df_region(&two, &roles).render(),
            "R{1} < I(X{2};Y3) + I(X{1};Y3|X{2})"
        );
        let three = FlowDecomposition::new(
            set,
            LayeredPartition::new(NodeId(3), parse_partition_literal("({2},{},{1})").unwrap())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(df_region(&three, &roles).render(), "R{1} < I(X{2};Y3)");
    }

    #[test]
    fn df_region_diamond_scheme2() {
        let (d, roles) = diamond_decomp("({3},{4},{2},{1})");
        let region = df_region(&d, &roles);
        assert_eq!(
            region.constraint_for(&nodes([2])).unwrap().to_string(),
            "R{2} < I(X{4};Y5|X{3}) + I(X{2};Y5|X{3,4})"
        );
    }

    #[test]
    fn df_terms_are_well_formed() {
        let (d, roles) = diamond_decomp("({3},{},{4},{1,2})");
        for c in df_region(&d, &roles).constraints {
            for t in &c.terms {
                assert!(!t.is_zero());
                assert!(t.fresh().is_disjoint(t.given()));
            }
        }
    }

    #[test]
    fn side_info_variant_conditions_on_excluded_known_node() {
        // Layering that pushes the relay out of the virtual flow while its
        // transmissions are already decoded: the variant conditions on it.
        let set = parse_flow_file("flow 1 -> 3 : {1} k=1 ; {2} k=inf").unwrap();
        let roles = ChannelRoles::infer(&set);
        let d = FlowDecomposition::new(
            set,
            LayeredPartition::new(NodeId(3), parse_partition_literal("({1},{2})").unwrap())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(df_region(&d, &roles).render(), "R{1} < I(X{1};Y3)");
        assert_eq!(
            df_region_side_info(&d, &roles).render(),
            "R{1} < I(X{1};Y3|X{2})"
        );
    }

    #[test]
    fn decoding_plan_mirrors_scheme_listings() {
        let (s1, _) = diamond_decomp("({3,4},{},{2},{1})");
        let plan = render_decoding_plan(&s1);
        assert!(plan.contains("layer 0 (block b-0): fresh {3,4}, known {}"));
        assert!(plan.contains("layer 1 (block b-1): fresh {}, known {3,4}"));
        let (s4, _) = diamond_decomp("({3},{},{},{1,4},{2})");
        let plan = render_decoding_plan(&s4);
        assert!(plan.contains("layer 3 (block b-3): fresh {1,4}, known {3}"));
    }

    #[test]
    fn mi_term_normalizes_overlap() {
        let t = MiTerm::new(nodes([1]), nodes([1, 2]), NodeId(3));
        assert!(t.is_zero());
        assert_eq!(t.to_string(), "I(X{};Y3|X{1,2})");
    }

    #[test]
    fn intersection_concatenates() {
        let set = parse_flow_file(DIAMOND).unwrap();
        let roles = ChannelRoles::infer(&set);
        let r = outer_region(&set, &roles, NodeId(5));
        let both = intersect_regions(vec![r.clone(), r]);
        assert_eq!(both.constraints().count(), 6);
    }
}
