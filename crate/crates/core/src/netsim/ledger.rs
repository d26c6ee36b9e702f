//! Per-round, per-client communication accounting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which exchanges count toward the reported communication cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitsConvention {
    /// Only the first exchange of each round (`Σ_j d_ij` scalars per
    /// client for the sheaf method).
    #[default]
    FirstExchange,
    /// Every exchange, including the one that precedes the map update.
    Exact,
}

/// One logged message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: usize,
    pub phase: usize,
    pub from: usize,
    pub to: usize,
    pub scalars: usize,
}

/// Scalars sent by each client, split by exchange phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLedger {
    n_clients: usize,
    scalar_bits: u32,
    /// `[round][client][phase]`; phase 0 precedes the model update, phase 1
    /// precedes the map update.
    sent: Vec<Vec<[u64; 2]>>,
    log: Option<Vec<MessageRecord>>,
}

impl CommLedger {
    pub fn new(n_clients: usize, scalar_bits: u32) -> Self {
        CommLedger {
            n_clients,
            scalar_bits,
            sent: Vec::new(),
            log: None,
        }
    }

    /// Also keeps every individual message.
    pub fn with_message_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    fn ensure_round(&mut self, round: usize) {
        while self.sent.len() <= round {
            self.sent.push(vec![[0; 2]; self.n_clients]);
        }
    }

    /// Marks `round` as having happened, even if nothing was sent.
    pub fn open_round(&mut self, round: usize) {
        self.ensure_round(round);
    }

    pub fn record(&mut self, round: usize, phase: usize, from: usize, to: usize, scalars: usize) {
        assert!(phase < 2, "phase {phase} out of range");
        self.ensure_round(round);
        self.sent[round][from][phase] += scalars as u64;
        if let Some(log) = &mut self.log {
            log.push(MessageRecord {
                round,
                phase,
                from,
                to,
                scalars,
            });
        }
    }

    pub fn scalar_bits(&self) -> u32 {
        self.scalar_bits
    }

    pub fn n_rounds(&self) -> usize {
        self.sent.len()
    }

    pub fn messages(&self) -> Option<&[MessageRecord]> {
        self.log.as_deref()
    }

    fn count(entry: &[u64; 2], conv: BitsConvention) -> u64 {
        match conv {
            BitsConvention::FirstExchange => entry[0],
            BitsConvention::Exact => entry[0] + entry[1],
        }
    }

    /// Scalars sent by each client in `round`.
    pub fn round_scalars(&self, round: usize, conv: BitsConvention) -> Vec<u64> {
        match self.sent.get(round) {
            Some(r) => r.iter().map(|e| Self::count(e, conv)).collect(),
            None => vec![0; self.n_clients],
        }
    }

    /// Total bits sent by all clients in rounds `0..rounds`.
    pub fn cumulative_bits(&self, rounds: usize, conv: BitsConvention) -> u64 {
        self.sent
            .iter()
            .take(rounds)
            .flatten()
            .map(|e| Self::count(e, conv))
            .sum::<u64>()
            * self.scalar_bits as u64
    }

    /// CSV with columns `round,client,scalars,cumulative_bits`, where the
    /// cumulative column is per client.
    pub fn write_csv<W: Write>(&self, out: W, conv: BitsConvention) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "client", "scalars", "cumulative_bits"])?;
        let mut cum = vec![0u64; self.n_clients];
        for (round, per_client) in self.sent.iter().enumerate() {
            for (client, e) in per_client.iter().enumerate() {
                let s = Self::count(e, conv);
                cum[client] += s * self.scalar_bits as u64;
                w.write_record([
                    round.to_string(),
                    client.to_string(),
                    s.to_string(),
                    cum[client].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
