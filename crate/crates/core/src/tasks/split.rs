//! Train/test splitting with data reduction for a subset of clients.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::loss::{ClientData, Federation, Targets};
use crate::error::{Error, Result};
use crate::rng;

const EPS: f64 = 1e-9;

fn default_train() -> f64 {
    0.75
}
fn default_reduced() -> f64 {
    0.5
}
fn default_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default = "default_train")]
    pub train_fraction: f64,
    /// Fraction of clients whose training set is reduced.
    #[serde(default = "default_reduced")]
    pub reduced_fraction: f64,
    /// Fraction of the training set removed on reduced clients.
    #[serde(default = "default_ratio")]
    pub reduction_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: default_train(),
            reduced_fraction: default_reduced(),
            reduction_ratio: default_ratio(),
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_fraction", self.train_fraction),
            ("reduced_fraction", self.reduced_fraction),
            ("reduction_ratio", self.reduction_ratio),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("{v} is outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Federation,
    pub test: Federation,
    /// Which clients had their training set reduced.
    pub reduced: Vec<bool>,
}

/// Train-set size after reduction: `max(1, ⌊n_train · (1 − ratio)⌋)`.
pub fn reduced_size(n_train: usize, ratio: f64) -> usize {
    ((n_train as f64 * (1.0 - ratio) + EPS).floor() as usize).max(1)
}

/// Per-class train quotas summing to `total`, by largest remainder
/// (ties to the lower class index).
fn stratified_quotas(counts: &[usize], frac: f64, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * frac).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| (x + EPS).floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - q[a] as f64;
        let rb = exact[b] - q[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut missing = total.saturating_sub(q.iter().sum());
    for &c in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if q[c] < counts[c] {
            q[c] += 1;
            missing -= 1;
        }
    }
    q
}

fn split_client(
    client: &ClientData,
    spec: &SplitSpec,
    rng: &mut rand_chacha::ChaCha8Rng,
    id: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = client.n_samples();
    let n_train = (n as f64 * spec.train_fraction + EPS).floor() as usize;
    if n_train < 1 || n_train >= n {
        return Err(Error::param(
            format!("client {id}"),
            format!("{n} samples cannot be split into non-empty train and test sets"),
        ));
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    let by_class = match client.targets() {
        Targets::Labels(y) => {
            let classes = y.iter().max().map_or(0, |m| m + 1);
            let mut buckets = vec![Vec::new(); classes];
            for (i, &c) in y.iter().enumerate() {
                buckets[c].push(i);
            }
            buckets.retain(|b| !b.is_empty());
            if buckets.iter().all(|b| b.len() >= 4) {
                Some(buckets)
            } else {
                None
            }
        }
        Targets::Real(_) => None,
    };
    match by_class {
        Some(mut buckets) => {
            let counts: Vec<usize> = buckets.iter().map(|b| b.len()).collect();
            let quotas = stratified_quotas(&counts, spec.train_fraction, n_train);
            for (b, q) in buckets.iter_mut().zip(quotas) {
                b.shuffle(rng);
                train.extend_from_slice(&b[..q]);
                test.extend_from_slice(&b[q..]);
            }
        }
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            train.extend_from_slice(&all[..n_train]);
            test.extend_from_slice(&all[n_train..]);
        }
    }
    Ok((train, test))
}

/// Splits every client into train/test and reduces the training data of a
/// seeded random subset of clients. Test sets are never reduced.
pub fn apply_split(fed: &Federation, spec: &SplitSpec) -> Result<SplitOutcome> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::SPLIT);
    let n = fed.n_clients();
    let n_reduced = (n as f64 * spec.reduced_fraction + EPS).floor() as usize;
    let mut reduced = vec![false; n];
    for i in index::sample(&mut rng, n, n_reduced) {
        reduced[i] = true;
    }
    let mut train = Vec::with_capacity(n);
    let mut test = Vec::with_capacity(n);
    for (id, client) in fed.clients.iter().enumerate() {
        let (mut tr, mut te) = split_client(client, spec, &mut rng, id)?;
        if reduced[id] {
            tr.shuffle(&mut rng);
            tr.truncate(reduced_size(tr.len(), spec.reduction_ratio));
        }
        tr.sort_unstable();
        te.sort_unstable();
        train.push(client.subset(&tr));
        test.push(client.subset(&te));
    }
    Ok(SplitOutcome {
        train: Federation::new(train)?,
        test: Federation::new(test)?,
        reduced,
    })
}

/// Per-client z-scoring of features using training statistics; columns with
/// zero variance are only centered.
pub fn standardize(train: &Federation, test: &Federation) -> Result<(Federation, Federation)> {
    let mut tr_out = Vec::with_capacity(train.n_clients());
    let mut te_out = Vec::with_capacity(test.n_clients());
    for (a, b) in train.clients.iter().zip(&test.clients) {
        let x = a.features();
        let n = x.nrows() as f64;
        let mean = x.row_mean();
        let std: Vec<f64> = (0..x.ncols())
            .map(|k| {
                let v = x
                    .column(k)
                    .iter()
                    .map(|v| (v - mean[k]).powi(2))
                    .sum::<f64>()
                    / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scale = |m: &nalgebra::DMatrix<f64>| {
            let mut m = m.clone();
            for (k, mut col) in m.column_iter_mut().enumerate() {
                col.apply(|v| *v = (*v - mean[k]) / std[k]);
            }
            m
        };
        tr_out.push(
            ClientData::new(scale(a.features()), a.targets().clone(), a.kind(), a.l2())?
                .with_group(a.group),
        );
        te_out.push(
            ClientData::new(scale(b.features()), b.targets().clone(), b.kind(), b.l2())?
                .with_group(b.group),
        );
    }
    Ok((Federation::new(tr_out)?, Federation::new(te_out)?))
}
