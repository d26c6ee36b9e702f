//! Network simulation: topologies, message exchange and bit accounting.

mod board;
mod cost;
mod ledger;
mod topology;

pub use board::{exchange, Inbox};
pub use cost::{bits_per_round, RoundCost};
pub use ledger::{BitsConvention, CommLedger, MessageRecord};
pub use topology::{
    gen_topology, parse_edge_list, write_edge_list, Topology, TopologyKind, TopologySpec,
    MAX_RESAMPLES,
};
