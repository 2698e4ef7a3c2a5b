//! Golden fixtures: machine-readable encodings of the worked channels and
//! decoding schemes, with their expected virtual sources, virtual flows,
//! decode offsets, constraint renderings, completeness and bifurcation
//! flags, shift relations, and inequality chains.
//!
//! Flow sets and partitions ship as data files in the text formats;
//! expectations live in the catalog below. `run_fixture` recomputes every
//! populated field and reports a per-field diff. Collapsed constraint
//! forms are checked by numeric identity over a seeded battery of random
//! channels, so both the raw per-layer emission and the printed
//! simplification are exercised.

use thiserror::Error;

use crate::channel::{random_instances, verify_identity_on, DmChannel, IdentityMode, InputDist};
use crate::decomposition::{FlowDecomposition, LayeredPartition};
use crate::flow::{render_hops, FlowSet};
use crate::node::{render_set, ChannelRoles, NodeId, NodeSet};
use crate::region::{df_region, df_region_side_info, outer_region};
use crate::shift::shift;
use crate::text::{
    parse_flow_file, parse_partition_file, parse_set_literal, parse_terms,
};

const FLOWS_SFD: &str = include_str!("../fixtures/sfd.flows");
const FLOWS_SFD_SLOW: &str = include_str!("../fixtures/sfd-slow.flows");
const FLOWS_DIAMOND: &str = include_str!("../fixtures/diamond.flows");
const FLOWS_COOPMAC: &str = include_str!("../fixtures/coopmac.flows");
const FLOWS_MARC2: &str = include_str!("../fixtures/marc2.flows");
const FLOWS_MARC3: &str = include_str!("../fixtures/marc3.flows");

/// Seed for the per-fixture battery of random channels used in identity
/// checks.
pub const BATTERY_SEED: u64 = 0xf10e5;
/// Trials per identity check.
pub const BATTERY_TRIALS: usize = 20;
/// Tolerance for identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture `{0}`")]
    Unknown(String),
}

/// A symbolic inequality chain checked numerically.
#[derive(Debug, Clone)]
pub struct GeqChain {
    pub label: &'static str,
    pub lhs: &'static str,
    pub rhs: &'static str,
    pub mode: IdentityMode,
}

/// Expected values for one fixture; empty fields are skipped.
#[derive(Debug, Clone, Default)]
pub struct Expected {
    /// `(source, members of v(source))`
    pub virtual_sources: &'static [(u32, &'static [u32])],
    /// `(source, hop body rendering of g(source, d))`
    pub virtual_flows: &'static [(u32, &'static str)],
    /// `(source, block offset)`
    pub decode_offsets: &'static [(u32, i64)],
    /// `(subset literal, layer, fresh-set literal)`
    pub active_sets: &'static [(&'static str, usize, &'static str)],
    /// Golden rendering of the decode-forward region (newline-joined).
    pub region: Option<&'static str>,
    /// Golden rendering of the outer region.
    pub outer: Option<&'static str>,
    /// `(subset literal, collapsed term list)` equal to the raw bound.
    pub collapsed: &'static [(&'static str, &'static str)],
    /// `(subset literal, term list)` only guaranteed `>=` the raw bound.
    pub collapsed_geq: &'static [(&'static str, &'static str)],
    /// `(subset literal, expected completeness flag)`
    pub complete_on: &'static [(&'static str, bool)],
    /// `(subset literal, expected bifurcation flag)`
    pub bifurcates: &'static [(&'static str, bool)],
    /// `(subset literal, partition literal after shifting by it)`
    pub shift_to: &'static [(&'static str, &'static str)],
    /// Names of fixtures this decomposition is equivalent to.
    pub equivalent_to: &'static [&'static str],
    /// Golden rendering of the side-information region variant.
    pub side_info_region: Option<&'static str>,
    /// Inequality chains (proof-step patterns) checked in geq/eq mode.
    pub geq_chains: &'static [(&'static str, &'static str, &'static str, bool)],
    /// `(from, to, delay rendering)` cumulative-delay expectations.
    pub cumulative_delays: &'static [(u32, u32, &'static str)],
}

/// One catalog entry: a channel, optionally a partition, and expectations.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub flow_set: FlowSet,
    pub roles: ChannelRoles,
    pub destination: NodeId,
    pub partition: Option<LayeredPartition>,
    pub expected: Expected,
}

impl Fixture {
    pub fn decomposition(&self) -> Option<FlowDecomposition> {
        self.partition.as_ref().map(|p| {
            FlowDecomposition::new(self.flow_set.clone(), p.clone())
                .expect("fixture partitions cover their flows")
        })
    }
}

struct Entry {
    name: &'static str,
    flows: &'static str,
    partition: Option<&'static str>,
    expected: Expected,
}

fn catalog() -> Vec<Entry> {
    vec![
        Entry {
            name: "sfd-i",
            flows: FLOWS_SFD,
            partition: None,
            expected: Expected {
                cumulative_delays: &[(1, 2, "1"), (2, 3, "inf"), (1, 3, "inf"), (1, 1, "0")],
                outer: Some("R{1} < I(X{1,2};Y3)"),
                ..Default::default()
            },
        },
        Entry {
            name: "sfd-ii",
            flows: FLOWS_SFD,
            partition: Some(include_str!("../fixtures/partitions/sfd-ii.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1])],
                virtual_flows: &[(1, "{1} k=1 ; {2} k=inf")],
                decode_offsets: &[(1, 1)],
                active_sets: &[("{1}", 0, "{2}"), ("{1}", 1, "{1}")],
                region: Some("R{1} < I(X{2};Y3) + I(X{1};Y3|X{2})"),
                collapsed: &[("{1}", "I(X{1,2};Y3)")],
                complete_on: &[("{1}", true)],
                equivalent_to: &["sfd-v"],
                ..Default::default()
            },
        },
        Entry {
            name: "sfd-iii",
            flows: FLOWS_SFD,
            partition: Some(include_str!("../fixtures/partitions/sfd-iii.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[2])],
                virtual_flows: &[(1, "{2} k=inf")],
                decode_offsets: &[(1, 1)],
                active_sets: &[("{1}", 0, "{2}"), ("{1}", 1, "{}"), ("{1}", 2, "{}")],
                region: Some("R{1} < I(X{2};Y3)"),
                complete_on: &[("{1}", false)],
                ..Default::default()
            },
        },
        Entry {
            name: "sfd-iv",
            flows: FLOWS_SFD,
            partition: Some(include_str!("../fixtures/partitions/sfd-iv.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1])],
                virtual_flows: &[(1, "{1} k=inf")],
                decode_offsets: &[(1, 0)],
                active_sets: &[("{1}", 0, "{1}"), ("{1}", 1, "{}")],
                region: Some("R{1} < I(X{1};Y3)"),
                side_info_region: Some("R{1} < I(X{1};Y3|X{2})"),
                complete_on: &[("{1}", false)],
                ..Default::default()
            },
        },
        Entry {
            name: "sfd-v",
            flows: FLOWS_SFD_SLOW,
            partition: Some(include_str!("../fixtures/partitions/sfd-v.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1])],
                virtual_flows: &[(1, "{1} k=2 ; {2} k=inf")],
                decode_offsets: &[(1, 2)],
                active_sets: &[("{1}", 0, "{2}"), ("{1}", 2, "{1}")],
                region: Some("R{1} < I(X{2};Y3) + I(X{1};Y3|X{2})"),
                collapsed: &[("{1}", "I(X{1,2};Y3)")],
                complete_on: &[("{1}", true)],
                equivalent_to: &["sfd-ii"],
                ..Default::default()
            },
        },
        Entry {
            name: "diamond-s1",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/diamond-s1.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[4])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {2} k=2 ; {3} k=inf"),
                    (2, "{4} k=inf"),
                ],
                decode_offsets: &[(1, 3), (2, 1)],
                region: Some(
                    "R{1} < I(X{3};Y5|X{4}) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{4};Y5|X{3})\n\
                     R{1,2} < I(X{3,4};Y5) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})",
                ),
                outer: Some(
                    "R{1} < I(X{1,2,3};Y5|X{4})\n\
                     R{2} < I(X{2,4};Y5|X{1,3})\n\
                     R{1,2} < I(X{1,2,3,4};Y5)",
                ),
                collapsed: &[
                    ("{1}", "I(X{1,2,3};Y5|X{4})"),
                    ("{1,2}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[("{1}", true), ("{2}", false), ("{1,2}", true)],
                bifurcates: &[("{1}", true), ("{2}", false), ("{1,2}", true)],
                shift_to: &[
                    ("{2}", "({3},{4},{2},{1})"),
                    ("{1}", "({3,4},{},{2},{1})"),
                ],
                ..Default::default()
            },
        },
        Entry {
            name: "diamond-s2",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/diamond-s2.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {2} k=2 ; {3} k=inf"),
                    (2, "{2} k=1 ; {4} k=inf"),
                ],
                decode_offsets: &[(1, 3), (2, 2)],
                region: Some(
                    "R{1} < I(X{3};Y5) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{4};Y5|X{3}) + I(X{2};Y5|X{3,4})\n\
                     R{1,2} < I(X{3};Y5) + I(X{4};Y5|X{3}) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})",
                ),
                collapsed: &[
                    ("{1}", "I(X{3};Y5) + I(X{1,2};Y5|X{3,4})"),
                    ("{1,2}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[("{1}", true), ("{2}", true), ("{1,2}", true)],
                shift_to: &[("{2}", "({3},{},{4},{1,2})")],
                ..Default::default()
            },
        },
        Entry {
            name: "diamond-s3",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/diamond-s3.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[
                    (1, "{1} k=3 ; {3} k=inf"),
                    (2, "{2} k=1 ; {4} k=inf"),
                ],
                decode_offsets: &[(1, 3), (2, 3)],
                region: Some(
                    "R{1} < I(X{3};Y5) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{4};Y5|X{3}) + I(X{2};Y5|X{1,3,4})\n\
                     R{1,2} < I(X{3};Y5) + I(X{4};Y5|X{3}) + I(X{1,2};Y5|X{3,4})",
                ),
                collapsed: &[("{1,2}", "I(X{1,2,3,4};Y5)")],
                complete_on: &[("{1}", false), ("{2}", true), ("{1,2}", true)],
                bifurcates: &[("{2}", false)],
                shift_to: &[
                    ("{2}", "({3},{},{},{1,4},{2})"),
                    ("{1}", "({},{3},{4},{2},{1})"),
                ],
                ..Default::default()
            },
        },
        Entry {
            name: "diamond-s4",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/diamond-s4.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[
                    (1, "{1} k=3 ; {3} k=inf"),
                    (2, "{2} k=1 ; {4} k=inf"),
                ],
                decode_offsets: &[(1, 3), (2, 4)],
                active_sets: &[("{1,2}", 3, "{1,4}"), ("{1,2}", 0, "{3}")],
                region: Some(
                    "R{1} < I(X{3};Y5) + I(X{1};Y5|X{3,4})\n\
                     R{2} < I(X{4};Y5|X{1,3}) + I(X{2};Y5|X{1,3,4})\n\
                     R{1,2} < I(X{3};Y5) + I(X{1,4};Y5|X{3}) + I(X{2};Y5|X{1,3,4})",
                ),
                collapsed: &[
                    ("{2}", "I(X{2,4};Y5|X{1,3})"),
                    ("{1,2}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[("{1}", false), ("{2}", true), ("{1,2}", true)],
                bifurcates: &[("{2}", true), ("{1}", false)],
                shift_to: &[("{2}", "({3},{},{},{1,4},{2})")],
                ..Default::default()
            },
        },
        Entry {
            name: "coopmac-s1",
            flows: FLOWS_COOPMAC,
            partition: Some(include_str!("../fixtures/partitions/coopmac-s1.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=inf"), (2, "{2} k=1 ; {1} k=inf")],
                decode_offsets: &[(1, 0), (2, 1)],
                region: Some(
                    "R{1} < I(X{1};Y3)\n\
                     R{2} < I(X{1};Y3) + I(X{2};Y3|X{1})\n\
                     R{1,2} < I(X{1};Y3) + I(X{2};Y3|X{1})",
                ),
                outer: Some(
                    "R{1} < I(X{1,2};Y3)\n\
                     R{2} < I(X{1,2};Y3)\n\
                     R{1,2} < I(X{1,2};Y3)",
                ),
                collapsed: &[
                    ("{2}", "I(X{1,2};Y3)"),
                    ("{1,2}", "I(X{1,2};Y3)"),
                ],
                complete_on: &[("{1}", false), ("{2}", true), ("{1,2}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "coopmac-s2",
            flows: FLOWS_COOPMAC,
            partition: Some(include_str!("../fixtures/partitions/coopmac-s2.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=inf"), (2, "{2} k=inf")],
                decode_offsets: &[(1, 0), (2, 0)],
                region: Some(
                    "R{1} < I(X{1};Y3|X{2})\n\
                     R{2} < I(X{2};Y3|X{1})\n\
                     R{1,2} < I(X{1,2};Y3)",
                ),
                complete_on: &[("{1}", false), ("{2}", false), ("{1,2}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "coopmac-s3",
            flows: FLOWS_COOPMAC,
            partition: Some(include_str!("../fixtures/partitions/coopmac-s3.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=1 ; {2} k=inf"), (2, "{2} k=inf")],
                decode_offsets: &[(1, 1), (2, 0)],
                region: Some(
                    "R{1} < I(X{2};Y3) + I(X{1};Y3|X{2})\n\
                     R{2} < I(X{2};Y3)\n\
                     R{1,2} < I(X{2};Y3) + I(X{1};Y3|X{2})",
                ),
                collapsed: &[
                    ("{1}", "I(X{1,2};Y3)"),
                    ("{1,2}", "I(X{1,2};Y3)"),
                ],
                complete_on: &[("{1}", true), ("{2}", false), ("{1,2}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "marc2-s1",
            flows: FLOWS_MARC2,
            partition: Some(include_str!("../fixtures/partitions/marc2-s1.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=1 ; {3} k=inf"), (2, "{2} k=inf")],
                decode_offsets: &[(1, 1), (2, 0)],
                region: Some(
                    "R{1} < I(X{3};Y4|X{2}) + I(X{1};Y4|X{2,3})\n\
                     R{2} < I(X{2};Y4|X{3})\n\
                     R{1,2} < I(X{2,3};Y4) + I(X{1};Y4|X{2,3})",
                ),
                outer: Some(
                    "R{1} < I(X{1,3};Y4|X{2})\n\
                     R{2} < I(X{2,3};Y4|X{1})\n\
                     R{1,2} < I(X{1,2,3};Y4)",
                ),
                collapsed: &[
                    ("{1}", "I(X{1,3};Y4|X{2})"),
                    ("{1,2}", "I(X{1,2,3};Y4)"),
                ],
                complete_on: &[("{1}", true), ("{2}", false), ("{1,2}", true)],
                bifurcates: &[("{1}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "marc2-s2",
            flows: FLOWS_MARC2,
            partition: Some(include_str!("../fixtures/partitions/marc2-s2.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=1 ; {3} k=inf"), (2, "{2} k=1 ; {3} k=inf")],
                decode_offsets: &[(1, 1), (2, 1)],
                region: Some(
                    "R{1} < I(X{3};Y4) + I(X{1};Y4|X{2,3})\n\
                     R{2} < I(X{3};Y4) + I(X{2};Y4|X{1,3})\n\
                     R{1,2} < I(X{3};Y4) + I(X{1,2};Y4|X{3})",
                ),
                collapsed: &[("{1,2}", "I(X{1,2,3};Y4)")],
                // The single-source collapses printed alongside this
                // scheme only hold as upper bounds on the raw emission:
                // conditioning an unconditioned relay term can only grow.
                collapsed_geq: &[
                    ("{1}", "I(X{1,3};Y4|X{2})"),
                    ("{2}", "I(X{2,3};Y4|X{1})"),
                ],
                complete_on: &[("{1}", true), ("{2}", true), ("{1,2}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "marc2-s3",
            flows: FLOWS_MARC2,
            partition: Some(include_str!("../fixtures/partitions/marc2-s3.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[(1, "{1} k=inf"), (2, "{2} k=1 ; {3} k=inf")],
                decode_offsets: &[(1, 0), (2, 1)],
                region: Some(
                    "R{1} < I(X{1};Y4|X{3})\n\
                     R{2} < I(X{3};Y4|X{1}) + I(X{2};Y4|X{1,3})\n\
                     R{1,2} < I(X{1,3};Y4) + I(X{2};Y4|X{1,3})",
                ),
                collapsed: &[
                    ("{2}", "I(X{2,3};Y4|X{1})"),
                    ("{1,2}", "I(X{1,2,3};Y4)"),
                ],
                complete_on: &[("{1}", false), ("{2}", true), ("{1,2}", true)],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-s1",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s1.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2]), (3, &[3])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {4} k=inf"),
                    (2, "{2} k=inf"),
                    (3, "{3} k=1 ; {4} k=inf"),
                ],
                decode_offsets: &[(1, 1), (2, 0), (3, 1)],
                region: Some(
                    "R{1} < I(X{4};Y5|X{2}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{2};Y5|X{4})\n\
                     R{3} < I(X{4};Y5|X{2}) + I(X{3};Y5|X{1,2,4})\n\
                     R{1,2} < I(X{2,4};Y5) + I(X{1};Y5|X{2,3,4})\n\
                     R{1,3} < I(X{4};Y5|X{2}) + I(X{1,3};Y5|X{2,4})\n\
                     R{2,3} < I(X{2,4};Y5) + I(X{3};Y5|X{1,2,4})\n\
                     R{1,2,3} < I(X{2,4};Y5) + I(X{1,3};Y5|X{2,4})",
                ),
                outer: Some(
                    "R{1} < I(X{1,4};Y5|X{2,3})\n\
                     R{2} < I(X{2,4};Y5|X{1,3})\n\
                     R{3} < I(X{3,4};Y5|X{1,2})\n\
                     R{1,2} < I(X{1,2,4};Y5|X{3})\n\
                     R{1,3} < I(X{1,3,4};Y5|X{2})\n\
                     R{2,3} < I(X{2,3,4};Y5|X{1})\n\
                     R{1,2,3} < I(X{1,2,3,4};Y5)",
                ),
                collapsed: &[
                    ("{1,3}", "I(X{1,3,4};Y5|X{2})"),
                    ("{1,2,3}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[
                    ("{1}", true),
                    ("{2}", false),
                    ("{3}", true),
                    ("{1,2,3}", true),
                ],
                shift_to: &[("{1}", "({2},{3,4},{1})")],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-s2",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s2.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2]), (3, &[3])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {4} k=inf"),
                    (2, "{2} k=1 ; {4} k=inf"),
                    (3, "{3} k=1 ; {4} k=inf"),
                ],
                decode_offsets: &[(1, 1), (2, 1), (3, 1)],
                region: Some(
                    "R{1} < I(X{4};Y5) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{4};Y5) + I(X{2};Y5|X{1,3,4})\n\
                     R{3} < I(X{4};Y5) + I(X{3};Y5|X{1,2,4})\n\
                     R{1,2} < I(X{4};Y5) + I(X{1,2};Y5|X{3,4})\n\
                     R{1,3} < I(X{4};Y5) + I(X{1,3};Y5|X{2,4})\n\
                     R{2,3} < I(X{4};Y5) + I(X{2,3};Y5|X{1,4})\n\
                     R{1,2,3} < I(X{4};Y5) + I(X{1,2,3};Y5|X{4})",
                ),
                collapsed: &[("{1,2,3}", "I(X{1,2,3,4};Y5)")],
                complete_on: &[
                    ("{1}", true),
                    ("{2}", true),
                    ("{3}", true),
                    ("{1,2,3}", true),
                ],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-s3",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s3.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2]), (3, &[3])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {4} k=inf"),
                    (2, "{2} k=inf"),
                    (3, "{3} k=inf"),
                ],
                decode_offsets: &[(1, 1), (2, 0), (3, 0)],
                region: Some(
                    "R{1} < I(X{4};Y5|X{2,3}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{2};Y5|X{3,4})\n\
                     R{3} < I(X{3};Y5|X{2,4})\n\
                     R{1,2} < I(X{2,4};Y5|X{3}) + I(X{1};Y5|X{2,3,4})\n\
                     R{1,3} < I(X{3,4};Y5|X{2}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2,3} < I(X{2,3};Y5|X{4})\n\
                     R{1,2,3} < I(X{2,3,4};Y5) + I(X{1};Y5|X{2,3,4})",
                ),
                collapsed: &[
                    ("{1}", "I(X{1,4};Y5|X{2,3})"),
                    ("{1,2}", "I(X{1,2,4};Y5|X{3})"),
                    ("{1,3}", "I(X{1,3,4};Y5|X{2})"),
                    ("{1,2,3}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[
                    ("{1}", true),
                    ("{2}", false),
                    ("{3}", false),
                    ("{1,2,3}", true),
                ],
                bifurcates: &[("{1}", true)],
                shift_to: &[("{2,3}", "({4},{1,2,3})")],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-s4",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s4.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2]), (3, &[3])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {4} k=inf"),
                    (2, "{2} k=inf"),
                    (3, "{3} k=inf"),
                ],
                decode_offsets: &[(1, 2), (2, 0), (3, 1)],
                region: Some(
                    "R{1} < I(X{4};Y5|X{2,3}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{2};Y5)\n\
                     R{3} < I(X{3};Y5|X{2,4})\n\
                     R{1,2} < I(X{2};Y5) + I(X{4};Y5|X{2,3}) + I(X{1};Y5|X{2,3,4})\n\
                     R{1,3} < I(X{3,4};Y5|X{2}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2,3} < I(X{2};Y5) + I(X{3};Y5|X{2,4})\n\
                     R{1,2,3} < I(X{2};Y5) + I(X{3,4};Y5|X{2}) + I(X{1};Y5|X{2,3,4})",
                ),
                collapsed: &[
                    ("{1}", "I(X{1,4};Y5|X{2,3})"),
                    ("{1,2}", "I(X{1,4};Y5|X{2,3}) + I(X{2};Y5)"),
                    ("{1,3}", "I(X{1,3,4};Y5|X{2})"),
                    ("{1,2,3}", "I(X{1,2,3,4};Y5)"),
                ],
                complete_on: &[("{1}", true), ("{2}", false), ("{3}", false)],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-scenario1",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s3.partition")),
            expected: Expected {
                shift_to: &[("{2,3}", "({4},{1,2,3})")],
                geq_chains: &[
                    (
                        "case1-collapse",
                        "I(X{1};Y5|X{2,3,4}) + I(X{4};Y5) + I(X{2,3};Y5|X{4})",
                        "I(X{1,2,3,4};Y5)",
                        false,
                    ),
                    (
                        "case1-largest-violator",
                        "I(X{2,3};Y5|X{4}) + I(X{4};Y5) + I(X{1};Y5|X{2,3,4})",
                        "I(X{2,3,4};Y5) + I(X{1};Y5|X{2,3,4})",
                        true,
                    ),
                    (
                        "case2-chain-rule",
                        "I(X{1};Y5|X{2,3,4}) + I(X{4};Y5) + I(X{2};Y5|X{3,4})",
                        "I(X{1,2};Y5|X{3,4}) + I(X{4};Y5)",
                        true,
                    ),
                    (
                        "case2-residual",
                        "I(X{1,2};Y5|X{3,4})",
                        "I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})",
                        true,
                    ),
                ],
                ..Default::default()
            },
        },
        Entry {
            name: "marc3-scenario2",
            flows: FLOWS_MARC3,
            partition: Some(include_str!("../fixtures/partitions/marc3-s1.partition")),
            expected: Expected {
                shift_to: &[("{1}", "({2},{3,4},{1})")],
                geq_chains: &[(
                    "violator-transfer",
                    "I(X{1,4};Y5|X{2,3}) + I(X{2};Y5)",
                    "I(X{1};Y5|X{2,3,4}) + I(X{2,4};Y5)",
                    true,
                )],
                ..Default::default()
            },
        },
        Entry {
            name: "figure9-i",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/diamond-s3.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1])],
                virtual_flows: &[(1, "{1} k=3 ; {3} k=inf")],
                complete_on: &[("{1}", false)],
                shift_to: &[("{1}", "({},{3},{4},{2},{1})")],
                ..Default::default()
            },
        },
        Entry {
            name: "figure9-ii",
            flows: FLOWS_DIAMOND,
            partition: Some(include_str!("../fixtures/partitions/figure9-ii.partition")),
            expected: Expected {
                virtual_sources: &[(1, &[1]), (2, &[2])],
                virtual_flows: &[
                    (1, "{1} k=1 ; {2} k=2 ; {3} k=inf"),
                    (2, "{2} k=1 ; {4} k=inf"),
                ],
                region: Some(
                    "R{1} < I(X{3};Y5) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})\n\
                     R{2} < I(X{4};Y5|X{3}) + I(X{2};Y5|X{3,4})\n\
                     R{1,2} < I(X{3};Y5) + I(X{4};Y5|X{3}) + I(X{2};Y5|X{3,4}) + I(X{1};Y5|X{2,3,4})",
                ),
                complete_on: &[("{1}", true), ("{2}", true), ("{1,2}", true)],
                equivalent_to: &["diamond-s2"],
                ..Default::default()
            },
        },
    ]
}

/// The catalog names, in order.
pub fn fixture_names() -> Vec<&'static str> {
    catalog().iter().map(|e| e.name).collect()
}

/// Load one fixture by name.
pub fn load_fixture(name: &str) -> Result<Fixture, FixtureError> {
    let entry = catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| FixtureError::Unknown(name.to_string()))?;
    let flow_set = parse_flow_file(entry.flows).expect("fixture flow files parse");
    let roles = ChannelRoles::infer(&flow_set);
    let (destination, partition) = match entry.partition {
        Some(text) => {
            let (d, layers) = parse_partition_file(text).expect("fixture partition files parse");
            (
                d,
                Some(LayeredPartition::new(d, layers).expect("fixture partitions are valid")),
            )
        }
        None => {
            let d = *flow_set
                .destinations()
                .iter()
                .next()
                .expect("fixture flows have a destination");
            (d, None)
        }
    };
    Ok(Fixture {
        name: entry.name,
        flow_set,
        roles,
        destination,
        partition,
        expected: entry.expected,
    })
}

/// One comparison inside a fixture run.
#[derive(Debug, Clone)]
pub struct FixtureCheck {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

/// The per-field diff report of one fixture.
#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub name: &'static str,
    pub checks: Vec<FixtureCheck>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {}{}\n",
                if c.pass { "pass" } else { "FAIL" },
                self.name,
                c.label,
                if c.detail.is_empty() || c.pass {
                    String::new()
                } else {
                    format!(" ({})", c.detail)
                }
            ));
        }
        out
    }
}

fn battery(fixture: &Fixture) -> Vec<(DmChannel, InputDist)> {
    random_instances(
        &fixture.roles.inputs,
        fixture.destination,
        2,
        4,
        BATTERY_TRIALS,
        BATTERY_SEED,
    )
}

fn check(checks: &mut Vec<FixtureCheck>, label: String, pass: bool, detail: String) {
    checks.push(FixtureCheck {
        label,
        pass,
        detail,
    });
}

fn identity_check(
    checks: &mut Vec<FixtureCheck>,
    instances: &[(DmChannel, InputDist)],
    label: String,
    lhs: &str,
    rhs: &str,
    mode: IdentityMode,
) {
    let lhs = parse_terms(lhs).expect("catalog term lists parse");
    let rhs = parse_terms(rhs).expect("catalog term lists parse");
    let verdict = verify_identity_on(&lhs, &rhs, mode, instances, IDENTITY_TOL)
        .expect("identity checks evaluate");
    check(
        checks,
        label,
        verdict.holds,
        format!("worst margin {:.3e}", verdict.worst),
    );
}

/// Recompute every populated expectation and diff it against the catalog.
pub fn run_fixture(fixture: &Fixture) -> FixtureReport {
    let mut checks: Vec<FixtureCheck> = Vec::new();

    let violations = fixture.flow_set.validate(&fixture.roles);
    check(
        &mut checks,
        "flow-set validates".to_string(),
        violations.is_empty(),
        format!("{violations:?}"),
    );

    for (s, i, want) in fixture.expected.cumulative_delays {
        let got = fixture
            .flow_set
            .cumulative_delay(NodeId(*s), NodeId(*i))
            .map(|d| d.to_string())
            .unwrap_or_else(|e| e.to_string());
        check(
            &mut checks,
            format!("k[{s},{i}] = {want}"),
            &got == want,
            format!("got {got}"),
        );
    }

    if let Some(want) = fixture.expected.outer {
        let got = outer_region(&fixture.flow_set, &fixture.roles, fixture.destination).render();
        check(&mut checks, "outer region".to_string(), got == want, format!("got\n{got}"));
    }

    let Some(decomp) = fixture.decomposition() else {
        return FixtureReport {
            name: fixture.name,
            checks,
        };
    };

    let splitting = decomp.check_splitting();
    check(
        &mut checks,
        "splitting inequalities".to_string(),
        splitting.is_empty(),
        format!("{splitting:?}"),
    );

    for (s, want) in fixture.expected.virtual_sources {
        let want_set: NodeSet = want.iter().map(|&n| NodeId(n)).collect();
        let got = decomp.virtual_source(NodeId(*s));
        let pass = got.as_ref().map(|v| v.v_set == want_set).unwrap_or(false);
        check(
            &mut checks,
            format!("v({s}) = {}", render_set(&want_set)),
            pass,
            format!("got {got:?}"),
        );
    }

    for (s, want) in fixture.expected.virtual_flows {
        let got = decomp
            .virtual_flow(NodeId(*s))
            .map(|g| render_hops(&g.hops))
            .unwrap_or_else(|e| e.to_string());
        check(
            &mut checks,
            format!("g({s},{}) = {want}", fixture.destination),
            &got == want,
            format!("got {got}"),
        );
    }

    if !fixture.expected.decode_offsets.is_empty() {
        let plan = decomp.decode_plan();
        for (s, want) in fixture.expected.decode_offsets {
            let got = plan.offsets.get(&NodeId(*s)).copied();
            check(
                &mut checks,
                format!("decode offset of {s} = {want}"),
                got == Some(*want),
                format!("got {got:?}"),
            );
        }
    }

    for (subset, layer, want) in fixture.expected.active_sets {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let (fresh, _) = decomp.active_sets(&subset_set, *layer);
        let got = render_set(&fresh);
        check(
            &mut checks,
            format!("A_{layer}({subset}) = {want}"),
            &got == want,
            format!("got {got}"),
        );
    }

    let region = df_region(&decomp, &fixture.roles);
    if let Some(want) = fixture.expected.region {
        let got = region.render();
        check(&mut checks, "region rendering".to_string(), got == want, format!("got\n{got}"));
    }

    if let Some(want) = fixture.expected.side_info_region {
        let got = df_region_side_info(&decomp, &fixture.roles).render();
        check(
            &mut checks,
            "side-information variant".to_string(),
            got == want,
            format!("got {got}"),
        );
    }

    let instances = battery(fixture);

    for (subset, terms) in fixture.expected.collapsed {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let raw = region
            .constraint_for(&subset_set)
            .expect("constraint per subset");
        let raw_text: Vec<String> = raw.terms.iter().map(|t| t.to_string()).collect();
        identity_check(
            &mut checks,
            &instances,
            format!("collapsed bound for R{subset}"),
            &raw_text.join(" + "),
            terms,
            IdentityMode::Equality,
        );
    }

    for (subset, terms) in fixture.expected.collapsed_geq {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let raw = region
            .constraint_for(&subset_set)
            .expect("constraint per subset");
        let raw_text: Vec<String> = raw.terms.iter().map(|t| t.to_string()).collect();
        identity_check(
            &mut checks,
            &instances,
            format!("claimed bound dominates R{subset}"),
            terms,
            &raw_text.join(" + "),
            IdentityMode::Geq,
        );
    }

    for (label, lhs, rhs, geq) in fixture.expected.geq_chains {
        identity_check(
            &mut checks,
            &instances,
            format!("chain {label}"),
            lhs,
            rhs,
            if *geq {
                IdentityMode::Geq
            } else {
                IdentityMode::Equality
            },
        );
    }

    for (subset, want) in fixture.expected.complete_on {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let got = decomp.is_complete_on(&subset_set);
        check(
            &mut checks,
            format!("complete on {subset} = {want}"),
            got == *want,
            format!("got {got}"),
        );
    }

    for (subset, want) in fixture.expected.bifurcates {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let got = decomp.bifurcates(&subset_set);
        check(
            &mut checks,
            format!("bifurcates into F({subset}) = {want}"),
            got == *want,
            format!("got {got}"),
        );
    }

    for (subset, want) in fixture.expected.shift_to {
        let subset_set = parse_set_literal(subset).expect("catalog literals parse");
        let got = shift(&decomp, &subset_set)
            .map(|d| d.partition().to_string())
            .unwrap_or_else(|e| e.to_string());
        check(
            &mut checks,
            format!("shift by {subset} -> {want}"),
            &got == want,
            format!("got {got}"),
        );
    }

    for other_name in fixture.expected.equivalent_to {
        let other = load_fixture(other_name).expect("catalog names resolve");
        let other_decomp = other.decomposition().expect("equivalence targets have partitions");
        check(
            &mut checks,
            format!("equivalent to {other_name}"),
            decomp.equivalent(&other_decomp),
            String::new(),
        );
    }

    // Throughput coincidence: for complete decompositions the full-set
    // decode-forward bound equals the full-set outer bound.
    if decomp.is_complete() {
        let outer = outer_region(&fixture.flow_set, &fixture.roles, fixture.destination);
        let full = decomp.sources();
        let raw: Vec<String> = region
            .constraint_for(&full)
            .expect("full-set constraint")
            .terms
            .iter()
            .map(|t| t.to_string())
            .collect();
        let cut: Vec<String> = outer
            .constraint_for(&full)
            .expect("full-set constraint")
            .terms
            .iter()
            .map(|t| t.to_string())
            .collect();
        identity_check(
            &mut checks,
            &instances,
            "full-set bound matches outer bound".to_string(),
            &raw.join(" + "),
            &cut.join(" + "),
            IdentityMode::Equality,
        );

        // Boundary coincidence: complete on S plus bifurcation into F(S)
        // pins the S bound to the outer bound.
        for (subset, complete) in fixture.expected.complete_on {
            if !complete {
                continue;
            }
            let subset_set = parse_set_literal(subset).expect("catalog literals parse");
            if subset_set == full || !decomp.bifurcates(&subset_set) {
                continue;
            }
            let raw: Vec<String> = region
                .constraint_for(&subset_set)
                .expect("constraint per subset")
                .terms
                .iter()
                .map(|t| t.to_string())
                .collect();
            let cut: Vec<String> = outer
                .constraint_for(&subset_set)
                .expect("constraint per subset")
                .terms
                .iter()
                .map(|t| t.to_string())
                .collect();
            identity_check(
                &mut checks,
                &instances,
                format!("boundary bound for R{subset} matches outer"),
                &raw.join(" + "),
                &cut.join(" + "),
                IdentityMode::Equality,
            );
        }
    }

    FixtureReport {
        name: fixture.name,
        checks,
    }
}
