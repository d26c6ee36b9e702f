//! Test-set evaluation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{self, Execution};
use crate::sheaf::Section;
use crate::tasks::Federation;

/// Per-client metric (accuracy or MSE) and its unweighted summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub per_client: Vec<f64>,
}

/// Linear-interpolation percentile of an unsorted sample, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn evaluate(fed: &Federation, theta: &Section, exec: Execution) -> Result<MetricSummary> {
    let per_client = exec::try_map_indexed(exec, fed.n_clients(), |i| {
        fed.clients[i].metric(&theta.0[i])
    })?;
    Ok(MetricSummary {
        mean: per_client.iter().sum::<f64>() / per_client.len() as f64,
        p10: percentile(&per_client, 0.1),
        p50: percentile(&per_client, 0.5),
        p90: percentile(&per_client, 0.9),
        per_client,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert!((percentile(&v, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
    }
}
