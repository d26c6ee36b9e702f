//! Step-size conditions of the convergence guarantee.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub n_clients: usize,
    pub smoothness: f64,
    pub lambda: f64,
    pub d_theta: f64,
    /// `2 / (N L)`.
    pub alpha_max: f64,
    /// `2 / (λ D²)`, infinite when `λ = 0`.
    pub eta_max: f64,
}

impl StepBounds {
    /// `min{α(1 − αNL/2), η(1 − ηλD²/2)}`.
    pub fn rho(&self, alpha: f64, eta: f64) -> f64 {
        let n_l = self.n_clients as f64 * self.smoothness;
        let a = alpha * (1.0 - alpha * n_l / 2.0);
        let e = eta * (1.0 - eta * self.lambda * self.d_theta * self.d_theta / 2.0);
        a.min(e)
    }

    /// Whether both strict inequalities hold.
    pub fn admissible(&self, alpha: f64, eta: f64) -> bool {
        alpha > 0.0 && alpha < self.alpha_max && eta > 0.0 && eta < self.eta_max
    }
}

pub fn step_bounds(
    n_clients: usize,
    smoothness: f64,
    lambda: f64,
    d_theta: f64,
) -> Result<StepBounds> {
    if n_clients == 0 {
        return Err(Error::param("n_clients", "must be positive"));
    }
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(Error::param(
            "smoothness",
            format!("{smoothness} must be positive"),
        ));
    }
    if !(d_theta > 0.0 && d_theta.is_finite()) {
        return Err(Error::param(
            "d_theta",
            format!("{d_theta} must be positive"),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(
            "lambda",
            format!("{lambda} must be nonnegative"),
        ));
    }
    let eta_max = if lambda == 0.0 {
        f64::INFINITY
    } else {
        2.0 / (lambda * d_theta * d_theta)
    };
    Ok(StepBounds {
        n_clients,
        smoothness,
        lambda,
        d_theta,
        alpha_max: 2.0 / (n_clients as f64 * smoothness),
        eta_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let b = step_bounds(10, 1.0, 0.05, 10.0).unwrap();
        assert!((b.alpha_max - 0.2).abs() < 1e-15);
        assert!((b.eta_max - 0.4).abs() < 1e-15);
        let rho = b.rho(b.alpha_max / 2.0, b.eta_max / 2.0);
        // both terms equal x(1 - 1/2) at half the bound
        assert!((rho - (0.05f64).min(0.1)).abs() < 1e-15);
        assert!(rho > 0.0);
        assert!(b.admissible(0.1, 0.2));
        assert!(!b.admissible(0.2, 0.2));
    }

    #[test]
    fn rho_sign_tracks_bounds() {
        let b = step_bounds(4, 2.0, 0.5, 3.0).unwrap();
        assert!(b.rho(0.9 * b.alpha_max, 0.9 * b.eta_max) > 0.0);
        assert!(b.rho(1.1 * b.alpha_max, 0.5 * b.eta_max) < 0.0);
        assert!(b.rho(0.5 * b.alpha_max, 1.1 * b.eta_max) < 0.0);
    }

    #[test]
    fn zero_lambda_leaves_eta_free() {
        let b = step_bounds(3, 1.0, 0.0, 1.0).unwrap();
        assert!(b.eta_max.is_infinite());
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(step_bounds(0, 1.0, 1.0, 1.0).is_err());
        assert!(step_bounds(2, 0.0, 1.0, 1.0).is_err());
        assert!(step_bounds(2, 1.0, -1.0, 1.0).is_err());
        assert!(step_bounds(2, 1.0, 1.0, 0.0).is_err());
    }
}
