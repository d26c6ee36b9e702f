//! Synthetic federations with controlled statistical heterogeneity.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::loss::{ClientData, Federation, LossKind, Targets};
use crate::error::{Error, Result};
use crate::rng;

/// How client distributions differ from one another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Heterogeneity {
    /// Every client draws from the same distribution.
    Iid,
    /// Clients are split evenly at random into `groups`; group `g` sees its
    /// features rotated by `2πg/groups` in the (0, 1) coordinate plane.
    FeatureRotationGroups { groups: usize },
    /// Each client only observes a random subset of the classes
    /// (default `⌈C/2⌉`).
    LabelSkew {
        #[serde(default)]
        classes_per_client: Option<usize>,
    },
    /// Same inputs, group-dependent labelling: labels are cyclically shifted
    /// by the group index (classification) or the regression weights are
    /// perturbed per group.
    ConceptShift { groups: usize },
    /// Client sizes decay geometrically so that largest / smallest = `ratio`.
    QuantitySkew { ratio: f64 },
}

/// Prediction task of a synthetic federation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    Regression,
    Classification { classes: usize },
}

fn default_l2() -> f64 {
    1e-3
}
fn default_noise() -> f64 {
    1.0
}
fn default_sep() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub heterogeneity: Heterogeneity,
    pub clients: usize,
    pub features: usize,
    pub task: TaskSpec,
    pub samples_per_client: usize,
    #[serde(default = "default_l2")]
    pub l2: f64,
    /// Feature noise std (classification) or target noise std (regression).
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Typical norm of a class mean.
    #[serde(default = "default_sep")]
    pub class_separation: f64,
    /// Per-client feature counts, cycled over clients; a client with `k`
    /// features sees the first `k` coordinates. Empty means all features.
    #[serde(default)]
    pub client_features: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(
        heterogeneity: Heterogeneity,
        clients: usize,
        features: usize,
        task: TaskSpec,
        samples_per_client: usize,
        seed: u64,
    ) -> Self {
        SynthSpec {
            heterogeneity,
            clients,
            features,
            task,
            samples_per_client,
            l2: default_l2(),
            noise: default_noise(),
            class_separation: default_sep(),
            client_features: Vec::new(),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.clients < 2 {
            return Err(Error::param("clients", "need at least 2 clients"));
        }
        if self.features < 2 {
            return Err(Error::param("features", "need at least 2 features"));
        }
        if self.samples_per_client < 2 {
            return Err(Error::param(
                "samples_per_client",
                "each client needs at least 2 samples (one train, one test)",
            ));
        }
        if let TaskSpec::Classification { classes } = self.task {
            if classes < 2 {
                return Err(Error::param("classes", "need at least 2 classes"));
            }
        }
        if !(self.noise >= 0.0 && self.class_separation >= 0.0) {
            return Err(Error::param(
                "noise",
                "noise and separation must be nonnegative",
            ));
        }
        for &k in &self.client_features {
            if k < 2 || k > self.features {
                return Err(Error::param(
                    "client_features",
                    format!("{k} outside [2, {}]", self.features),
                ));
            }
        }
        match self.heterogeneity {
            Heterogeneity::FeatureRotationGroups { groups }
            | Heterogeneity::ConceptShift { groups } => {
                if groups == 0 || groups > self.clients {
                    return Err(Error::param(
                        "groups",
                        format!("{groups} outside [1, {}]", self.clients),
                    ));
                }
            }
            Heterogeneity::LabelSkew { classes_per_client } => {
                let TaskSpec::Classification { classes } = self.task else {
                    return Err(Error::param(
                        "heterogeneity",
                        "label skew needs a classification task",
                    ));
                };
                let k = classes_per_client.unwrap_or(classes.div_ceil(2));
                if k == 0 || k > classes {
                    return Err(Error::param(
                        "classes_per_client",
                        format!("{k} outside [1, {classes}]"),
                    ));
                }
            }
            Heterogeneity::QuantitySkew { ratio } => {
                if !(ratio >= 1.0 && ratio.is_finite()) {
                    return Err(Error::param("ratio", "imbalance ratio must be ≥ 1"));
                }
                if (self.samples_per_client as f64 / ratio) < 2.0 {
                    return Err(Error::param(
                        "ratio",
                        "smallest client would have fewer than 2 samples",
                    ));
                }
            }
            Heterogeneity::Iid => {}
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rotate_plane(x: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    let (a, b) = (x[0], x[1]);
    x[0] = c * a - s * b;
    x[1] = s * a + c * b;
}

/// Group index per client: a random balanced partition.
fn balanced_groups(rng: &mut ChaCha8Rng, n: usize, groups: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut out = vec![0; n];
    for (k, &client) in perm.iter().enumerate() {
        out[client] = k % groups;
    }
    out
}

/// Generates a federation; identical specs give bit-identical output.
pub fn synth_federation(spec: &SynthSpec) -> Result<Federation> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::DATA);
    let n = spec.clients;
    let p = spec.features;

    // Shared ground truth.
    let classes = match spec.task {
        TaskSpec::Classification { classes } => classes,
        TaskSpec::Regression => 0,
    };
    let mean_scale = spec.class_separation / (p as f64).sqrt();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..p).map(|_| mean_scale * gaussian(&mut rng)).collect())
        .collect();
    let weights: Vec<f64> = if classes == 0 {
        (0..p).map(|_| gaussian(&mut rng)).collect()
    } else {
        Vec::new()
    };

    let (groups, n_groups) = match spec.heterogeneity {
        Heterogeneity::FeatureRotationGroups { groups }
        | Heterogeneity::ConceptShift { groups } => (balanced_groups(&mut rng, n, groups), groups),
        _ => (vec![0; n], 1),
    };
    let sizes: Vec<usize> = match spec.heterogeneity {
        Heterogeneity::QuantitySkew { ratio } => {
            let mut s: Vec<usize> = (0..n)
                .map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    ((spec.samples_per_client as f64 * ratio.powf(-t)).round() as usize).max(2)
                })
                .collect();
            s.shuffle(&mut rng);
            s
        }
        _ => vec![spec.samples_per_client; n],
    };
    let concept_offsets: Vec<Vec<f64>> = match (spec.heterogeneity.clone(), classes) {
        (Heterogeneity::ConceptShift { groups }, 0) => (0..groups)
            .map(|g| {
                if g == 0 {
                    vec![0.0; p]
                } else {
                    (0..p).map(|_| gaussian(&mut rng)).collect()
                }
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut clients = Vec::with_capacity(n);
    for i in 0..n {
        let g = groups[i];
        let allowed: Vec<usize> = match spec.heterogeneity {
            Heterogeneity::LabelSkew { classes_per_client } => {
                let k = classes_per_client.unwrap_or(classes.div_ceil(2));
                let mut v = index::sample(&mut rng, classes, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..classes).collect(),
        };
        let p_i = if spec.client_features.is_empty() {
            p
        } else {
            spec.client_features[i % spec.client_features.len()]
        };
        let angle = match spec.heterogeneity {
            Heterogeneity::FeatureRotationGroups { .. } => {
                std::f64::consts::TAU * g as f64 / n_groups as f64
            }
            _ => 0.0,
        };
        let m = sizes[i];
        let mut x = DMatrix::zeros(m, p_i);
        let mut row = vec![0.0; p];
        let targets = if classes > 0 {
            let mut labels = Vec::with_capacity(m);
            for r in 0..m {
                let c = allowed[rng.random_range(0..allowed.len())];
                for (k, v) in row.iter_mut().enumerate() {
                    *v = means[c][k] + spec.noise * gaussian(&mut rng);
                }
                rotate_plane(&mut row, angle);
                x.row_mut(r).copy_from_slice(&row[..p_i]);
                let label = match spec.heterogeneity {
                    Heterogeneity::ConceptShift { .. } => (c + g) % classes,
                    _ => c,
                };
                labels.push(label);
            }
            Targets::Labels(labels)
        } else {
            let w: Vec<f64> = match spec.heterogeneity {
                Heterogeneity::ConceptShift { .. } => weights
                    .iter()
                    .zip(&concept_offsets[g])
                    .map(|(a, b)| a + b)
                    .collect(),
                _ => weights.clone(),
            };
            let mut y = Vec::with_capacity(m);
            for r in 0..m {
                for v in row.iter_mut() {
                    *v = gaussian(&mut rng);
                }
                rotate_plane(&mut row, angle);
                // The client only observes its first p_i coordinates; the
                // remaining ones act as unexplained variance.
                let target: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                    + spec.noise * gaussian(&mut rng);
                x.row_mut(r).copy_from_slice(&row[..p_i]);
                y.push(target);
            }
            Targets::Real(y)
        };
        let kind = if classes > 0 {
            LossKind::Multinomial { classes }
        } else {
            LossKind::LinearRegression
        };
        clients.push(ClientData::new(x, targets, kind, spec.l2)?.with_group(g));
    }
    Federation::new(clients)
}

/// Per-class sample counts of a client.
pub fn label_histogram(client: &ClientData, classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    if let Targets::Labels(y) = client.targets() {
        for &c in y {
            h[c] += 1;
        }
    }
    h
}

/// Feature mean of a client, used to compare group statistics.
pub fn feature_mean(client: &ClientData) -> DVector<f64> {
    client.features().row_mean().transpose()
}
