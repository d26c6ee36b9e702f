//! Synchronous neighbor-to-neighbor message exchange.

use nalgebra::DVector;

use super::ledger::CommLedger;
use crate::error::{Error, Result};
use crate::sheaf::Graph;

/// Messages received by every client, indexed `[client][slot]` where `slot`
/// is the sender's position in the receiver's adjacency list.
#[derive(Debug, Clone, PartialEq)]
pub struct Inbox {
    slots: Vec<Vec<Option<DVector<f64>>>>,
    round: usize,
}

impl Inbox {
    /// The message from the neighbor at `slot`, or an error naming the
    /// missing sender.
    pub fn get(&self, graph: &Graph, client: usize, slot: usize) -> Result<&DVector<f64>> {
        self.slots[client][slot]
            .as_ref()
            .ok_or_else(|| Error::MissingMessage {
                client,
                neighbor: graph.adjacency(client)[slot].neighbor,
                round: self.round,
            })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Discards one delivered message, simulating a lost packet.
    pub fn drop_message(&mut self, client: usize, slot: usize) -> Option<DVector<f64>> {
        self.slots[client][slot].take()
    }

    pub fn n_delivered(&self) -> usize {
        self.slots.iter().flatten().filter(|m| m.is_some()).count()
    }
}

/// Delivers `outgoing[i][slot]` (client `i`'s payload for its neighbor at
/// `slot`) to that neighbor, and records every message in `ledger`.
///
/// All sends of a phase complete before any client reads its inbox, so the
/// exchange behaves like a barrier-synchronized round.
pub fn exchange(
    graph: &Graph,
    outgoing: Vec<Vec<DVector<f64>>>,
    ledger: &mut CommLedger,
    round: usize,
    phase: usize,
) -> Result<Inbox> {
    if outgoing.len() != graph.n_vertices() {
        return Err(Error::shape(
            "outgoing clients",
            graph.n_vertices(),
            outgoing.len(),
        ));
    }
    let mut slots: Vec<Vec<Option<DVector<f64>>>> = (0..graph.n_vertices())
        .map(|v| vec![None; graph.degree(v)])
        .collect();
    for (i, msgs) in outgoing.into_iter().enumerate() {
        if msgs.len() != graph.degree(i) {
            return Err(Error::shape(
                format!("outgoing messages of client {i}"),
                graph.degree(i),
                msgs.len(),
            ));
        }
        for (slot, payload) in msgs.into_iter().enumerate() {
            let j = graph.adjacency(i)[slot].neighbor;
            ledger.record(round, phase, i, j, payload.len());
            slots[j][graph.mirror_slot(i, slot)] = Some(payload);
        }
    }
    Ok(Inbox { slots, round })
}
