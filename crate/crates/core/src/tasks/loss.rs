//! Client datasets and their convex losses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local model family of a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// `θ ∈ R^p`, loss `‖Xθ − y‖² / 2n + (l2/2)‖θ‖²`.
    LinearRegression,
    /// `θ ∈ R^{C·p}` laid out class-major (`θ[c·p + k]`), mean cross-entropy
    /// plus `(l2/2)‖θ‖²`.
    Multinomial { classes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Real(v) => Targets::Real(idx.iter().map(|&i| v[i]).collect()),
            Targets::Labels(v) => Targets::Labels(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// One client's local dataset together with its loss specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientData {
    features: DMatrix<f64>,
    targets: Targets,
    kind: LossKind,
    l2: f64,
    /// Ground-truth cluster of a synthetic client; 0 when unknown.
    pub group: usize,
}

impl ClientData {
    pub fn new(features: DMatrix<f64>, targets: Targets, kind: LossKind, l2: f64) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::param("samples", "client has no samples"));
        }
        if targets.len() != n {
            return Err(Error::shape("targets", n, targets.len()));
        }
        if features.ncols() == 0 {
            return Err(Error::param("features", "client has no feature columns"));
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::param(
                "features",
                format!("non-finite value at row {}, column {}", pos % n, pos / n),
            ));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::param(
                "l2",
                format!("{l2} must be a finite nonnegative number"),
            ));
        }
        match (&kind, &targets) {
            (LossKind::LinearRegression, Targets::Real(y)) => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("targets", "non-finite regression target"));
                }
            }
            (LossKind::Multinomial { classes }, Targets::Labels(y)) => {
                if *classes < 2 {
                    return Err(Error::param("classes", "need at least 2 classes"));
                }
                if let Some(bad) = y.iter().find(|&&c| c >= *classes) {
                    return Err(Error::param(
                        "targets",
                        format!("label {bad} outside [0, {classes})"),
                    ));
                }
            }
            _ => {
                return Err(Error::param(
                    "targets",
                    "target type does not match loss kind",
                ))
            }
        }
        Ok(ClientData {
            features,
            targets,
            kind,
            l2,
            group: 0,
        })
    }

    pub fn with_group(mut self, group: usize) -> Self {
        self.group = group;
        self
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Length of the model vector `d_i`.
    pub fn model_dim(&self) -> usize {
        match self.kind {
            LossKind::LinearRegression => self.n_features(),
            LossKind::Multinomial { classes } => classes * self.n_features(),
        }
    }

    /// Rows `idx` as a new client with the same loss.
    pub fn subset(&self, idx: &[usize]) -> ClientData {
        ClientData {
            features: self.features.select_rows(idx),
            targets: self.targets.select(idx),
            kind: self.kind,
            l2: self.l2,
            group: self.group,
        }
    }

    fn check_dim(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.model_dim() {
            return Err(Error::shape("model vector", self.model_dim(), theta.len()));
        }
        Ok(())
    }

    pub fn loss(&self, theta: &DVector<f64>) -> Result<f64> {
        Ok(self.loss_and_grad(theta, None)?.0)
    }

    pub fn grad(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.loss_and_grad(theta, None)?.1)
    }

    /// Loss and gradient on all samples, or on the rows in `batch`.
    pub fn loss_and_grad(
        &self,
        theta: &DVector<f64>,
        batch: Option<&[usize]>,
    ) -> Result<(f64, DVector<f64>)> {
        self.check_dim(theta)?;
        let owned;
        let (x, targets) = match batch {
            None => (&self.features, &self.targets),
            Some(idx) => {
                owned = (self.features.select_rows(idx), self.targets.select(idx));
                (&owned.0, &owned.1)
            }
        };
        let n = x.nrows() as f64;
        let (data_loss, mut grad) = match (self.kind, targets) {
            (LossKind::LinearRegression, Targets::Real(y)) => {
                let mut r = x * theta;
                for (ri, yi) in r.iter_mut().zip(y) {
                    *ri -= yi;
                }
                (r.norm_squared() / (2.0 * n), x.tr_mul(&r) / n)
            }
            (LossKind::Multinomial { classes }, Targets::Labels(y)) => {
                let p = x.ncols();
                let w = DMatrix::from_row_slice(classes, p, theta.as_slice());
                let mut scores = x * w.transpose();
                let mut total = 0.0;
                for (row, &label) in y.iter().enumerate() {
                    let mut r = scores.row_mut(row);
                    let m = r.max();
                    let own = r[label];
                    r.apply(|s| *s = (*s - m).exp());
                    let z = r.sum();
                    total += z.ln() + m - own;
                    r /= z;
                    r[label] -= 1.0;
                }
                // d/dW = (S − Y)ᵀ X / n, flattened row-major
                let gw = scores.tr_mul(x) / n;
                (
                    total / n,
                    DVector::from_row_slice(gw.transpose().as_slice()),
                )
            }
            _ => unreachable!("validated at construction"),
        };
        grad.axpy(self.l2, theta, 1.0);
        Ok((data_loss + 0.5 * self.l2 * theta.norm_squared(), grad))
    }

    /// Upper bound on the gradient Lipschitz constant of the full-batch loss:
    /// `λ_max(XᵀX)/n + l2` for regression, `λ_max(XᵀX)/(2n) + l2` for
    /// softmax cross-entropy (the logit Hessian is bounded by `I/2`).
    pub fn smoothness(&self) -> f64 {
        let n = self.n_samples() as f64;
        let gram = self.features.tr_mul(&self.features) / n;
        let top = gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        match self.kind {
            LossKind::LinearRegression => top + self.l2,
            LossKind::Multinomial { .. } => 0.5 * top + self.l2,
        }
    }

    /// Predicted class per sample (argmax, lowest index on ties).
    pub fn predict_labels(&self, theta: &DVector<f64>) -> Result<Vec<usize>> {
        self.check_dim(theta)?;
        let LossKind::Multinomial { classes } = self.kind else {
            return Err(Error::param(
                "kind",
                "label prediction needs a classification client",
            ));
        };
        let w = DMatrix::from_row_slice(classes, self.n_features(), theta.as_slice());
        let scores = &self.features * w.transpose();
        Ok(scores
            .row_iter()
            .map(|r| {
                let mut best = 0;
                for c in 1..classes {
                    if r[c] > r[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    /// Accuracy for classification clients, mean squared error for regression.
    pub fn metric(&self, theta: &DVector<f64>) -> Result<f64> {
        match &self.targets {
            Targets::Labels(y) => {
                let pred = self.predict_labels(theta)?;
                let hits = pred.iter().zip(y).filter(|(a, b)| a == b).count();
                Ok(hits as f64 / y.len() as f64)
            }
            Targets::Real(y) => {
                self.check_dim(theta)?;
                let r = &self.features * theta;
                Ok(r.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
            }
        }
    }
}

/// The collection of client datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    pub clients: Vec<ClientData>,
}

impl Federation {
    pub fn new(clients: Vec<ClientData>) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::param("clients", "federation has no clients"));
        }
        Ok(Federation { clients })
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn model_dims(&self) -> Vec<usize> {
        self.clients.iter().map(|c| c.model_dim()).collect()
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.clients[0].kind(), LossKind::Multinomial { .. })
    }

    /// Largest per-client smoothness bound; the `L` of the convergence analysis.
    pub fn smoothness(&self) -> f64 {
        self.clients
            .iter()
            .map(|c| c.smoothness())
            .fold(0.0, f64::max)
    }

    pub fn groups(&self) -> Vec<usize> {
        self.clients.iter().map(|c| c.group).collect()
    }

    pub fn total_samples(&self) -> usize {
        self.clients.iter().map(|c| c.n_samples()).sum()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::{dmatrix, dvector};

    use super::*;

    #[test]
    fn regression_zero_point() {
        let c = ClientData::new(
            dmatrix![1.0, 0.0],
            Targets::Real(vec![0.0]),
            LossKind::LinearRegression,
            0.0,
        )
        .unwrap();
        let (l, g) = c.loss_and_grad(&dvector![0.0, 0.0], None).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, dvector![0.0, 0.0]);
    }

    #[test]
    fn uniform_softmax_is_ln2() {
        let x = dmatrix![1.0, -2.0; 0.5, 3.0; -1.0, 0.0];
        let c = ClientData::new(
            x,
            Targets::Labels(vec![0, 1, 1]),
            LossKind::Multinomial { classes: 2 },
            0.3,
        )
        .unwrap();
        let l = c.loss(&DVector::zeros(4)).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let c = ClientData::new(
            dmatrix![1.0, 0.0],
            Targets::Real(vec![0.0]),
            LossKind::LinearRegression,
            0.0,
        )
        .unwrap();
        assert!(matches!(
            c.loss(&dvector![1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn construction_rejections() {
        let k = LossKind::Multinomial { classes: 2 };
        assert!(ClientData::new(dmatrix![1.0], Targets::Labels(vec![2]), k, 0.0).is_err());
        assert!(ClientData::new(dmatrix![f64::NAN], Targets::Labels(vec![0]), k, 0.0).is_err());
        assert!(ClientData::new(dmatrix![1.0], Targets::Real(vec![0.0]), k, 0.0).is_err());
        assert!(ClientData::new(DMatrix::zeros(0, 2), Targets::Labels(vec![]), k, 0.0).is_err());
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let c = ClientData::new(
            dmatrix![1.0],
            Targets::Labels(vec![1]),
            LossKind::Multinomial { classes: 3 },
            0.0,
        )
        .unwrap();
        assert_eq!(c.predict_labels(&dvector![0.5, 2.0, 2.0]).unwrap(), vec![1]);
        assert_eq!(c.predict_labels(&dvector![0.0, 0.0, 0.0]).unwrap(), vec![0]);
    }

    #[test]
    fn zero_model_mse_is_mean_square_target() {
        let y = vec![1.0, -2.0, 3.0];
        let c = ClientData::new(
            dmatrix![1.0; 2.0; 3.0],
            Targets::Real(y),
            LossKind::LinearRegression,
            0.0,
        )
        .unwrap();
        let mse = c.metric(&dvector![0.0]).unwrap();
        assert!((mse - 14.0 / 3.0).abs() < 1e-15);
    }
}
