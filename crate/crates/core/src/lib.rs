//! Flow decompositions for multi-source multi-relay all-cast channels.
//!
//! A *flow* routes one source's messages to one destination through an
//! ordered sequence of relay hops, each hop annotated with an encoding delay
//! measured in blocks. A *flow set* fixes one flow per source-destination
//! pair and induces a cut-set outer bound on the decode-forward region. A
//! *flow decomposition* pairs a flow set with a layered partition of the
//! covered nodes and yields an achievable region, one mutual-information
//! constraint per source subset. The `shift` module implements the covering
//! loop that, given any rate vector inside the outer bound, produces a
//! decomposition whose region contains it.
//!
//! All regions are symbolic; the `channel` module evaluates them exactly on
//! finite discrete memoryless channels with independent inputs.

pub mod channel;
pub mod decomposition;
pub mod fixtures;
pub mod flow;
pub mod node;
pub mod reference;
pub mod region;
pub mod shift;
pub mod text;

pub use channel::{DmChannel, InputDist, JointDist, RateVector};
pub use decomposition::{
    DecodePlan, FlowDecomposition, LayeredPartition, VirtualFlow, VirtualSourceResult,
};
pub use flow::{Delay, Flow, FlowSet, Hop};
pub use node::{ChannelRoles, NodeId, NodeSet};
pub use region::{Constraint, MiTerm, Region};
pub use shift::{ShiftStep, ShiftTrace};
