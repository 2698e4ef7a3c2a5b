//! Shared setup for the benchmarks: the diamond relay channel with a
//! seeded random binary-input channel instance.

use flowdec_core::channel::{random_instances, DmChannel, InputDist};
use flowdec_core::node::{ChannelRoles, NodeId};
use flowdec_core::text::parse_flow_file;
use flowdec_core::FlowSet;

pub const DIAMOND: &str = "flow 1 -> 5 : {1} k=1 ; {2} k=2 ; {3} k=inf\n\
                           flow 2 -> 5 : {2} k=1 ; {4} k=inf";

pub fn diamond() -> (FlowSet, ChannelRoles) {
    let set = parse_flow_file(DIAMOND).expect("diamond parses");
    let roles = ChannelRoles::infer(&set);
    (set, roles)
}

pub fn diamond_channel(seed: u64) -> (DmChannel, InputDist) {
    let (_, roles) = diamond();
    random_instances(&roles.inputs, NodeId(5), 2, 4, 1, seed)
        .pop()
        .expect("one instance")
}
