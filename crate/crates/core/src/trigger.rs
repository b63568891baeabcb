//! Output-based event-triggering rule.
//!
//! With deviations `ẽ = e(t_k) − e(t)`, `η̃ = η(t_k) − η(t)` and
//! `ϑ̃_r = ϑ_r(ξ̌_r(t_k)) − ϑ_r(ξ̌_r(t))`, the next sample is taken at the
//! first `t > t_k` where
//!
//! ```text
//! g = ϑ̃_r² + π_r(η̃, ẽ) − σ²ρ_r(ξ̌_r)ξ̌_r² − δ² ≥ 0.
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::regulation::{checked_last, BackstepLaw, Latched, PolyGain};

pub type PiFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// The nonnegative deviation penalty `π_r(η̃, ẽ)`.
#[derive(Clone)]
pub enum PiRule {
    /// `5‖BΨη̃ − λẽ‖⁴ + |λ_r ẽ|²` with `BΨη̃ = (0, …, 0, Ψη̃)`.
    OutputInjection { psi: Vec<f64>, lambda: Vec<f64> },
    /// `a‖η̃‖² + b ẽ²`.
    Quadratic { eta_weight: f64, e_weight: f64 },
    Custom(PiFn),
}

impl fmt::Debug for PiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PiRule::OutputInjection { psi, lambda } => f
                .debug_struct("OutputInjection")
                .field("psi", psi)
                .field("lambda", lambda)
                .finish(),
            PiRule::Quadratic { eta_weight, e_weight } => f
                .debug_struct("Quadratic")
                .field("eta_weight", eta_weight)
                .field("e_weight", e_weight)
                .finish(),
            PiRule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PiRule {
    pub fn eval(&self, eta_tilde: &[f64], e_tilde: f64) -> f64 {
        match self {
            PiRule::OutputInjection { psi, lambda } => lorenz_pi(eta_tilde, e_tilde, psi, lambda),
            PiRule::Quadratic { eta_weight, e_weight } => {
                eta_weight * eta_tilde.iter().map(|x| x * x).sum::<f64>() + e_weight * e_tilde * e_tilde
            }
            PiRule::Custom(f) => f(eta_tilde, e_tilde),
        }
    }
}

/// `π₂(χ̃) = 5‖BΨη̃ − λẽ‖⁴ + |λ_r ẽ|²` for an r-dimensional observer.
pub fn lorenz_pi(eta_tilde: &[f64], e_tilde: f64, psi: &[f64], lambda: &[f64]) -> f64 {
    let r = lambda.len();
    let psi_eta: f64 = psi.iter().zip(eta_tilde).map(|(a, b)| a * b).sum();
    let sq: f64 = lambda
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let b = if i + 1 == r { psi_eta } else { 0.0 };
            let d = b - l * e_tilde;
            d * d
        })
        .sum();
    let last = lambda[r - 1] * e_tilde;
    5.0 * sq * sq + last * last
}

/// Trigger parameters `(σ, δ, π_r, ρ_r)`.
#[derive(Debug, Clone)]
pub struct TriggerPolicy {
    sigma: f64,
    delta: f64,
    pi: PiRule,
    rho_r: PolyGain,
}

impl TriggerPolicy {
    pub fn new(sigma: f64, delta: f64, pi: PiRule, rho_r: PolyGain) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParams(format!("sigma = {sigma} must lie in (0, 1)")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParams(format!("delta = {delta} must be nonnegative")));
        }
        let policy = Self { sigma, delta, pi, rho_r };
        if let PiRule::OutputInjection { psi, lambda } = &policy.pi {
            if lambda.is_empty() {
                return Err(Error::InvalidParams("pi rule needs observer gains".into()));
            }
            policy.validate(psi.len())?;
        }
        Ok(policy)
    }

    /// Policy sharing `σ` and `ρ_r` with a backstepping law.
    pub fn for_law(law: &BackstepLaw, delta: f64, pi: PiRule) -> Result<Self> {
        Self::new(law.sigma(), delta, pi, law.rho_last().clone())
    }

    /// Spot checks `π_r(0, 0) = 0` and `π_r ≥ 0` for an internal model of
    /// order `eta_dim`.
    pub fn validate(&self, eta_dim: usize) -> Result<()> {
        let at_zero = self.pi.eval(&vec![0.0; eta_dim], 0.0);
        if at_zero != 0.0 {
            return Err(Error::InvalidParams(format!("pi(0, 0) = {at_zero} must vanish")));
        }
        for k in 0..64 {
            let a = (k as f64 * 0.731).sin() * 3.0;
            let eta: Vec<f64> = (0..eta_dim)
                .map(|j| ((k * (j + 2)) as f64 * 0.37).cos() * a)
                .collect();
            let e = (k as f64 * 1.3).cos() * a;
            let p = self.pi.eval(&eta, e);
            if !(p >= 0.0) {
                return Err(Error::InvalidParams(format!("pi = {p} is negative on the probe grid")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pi(&self) -> &PiRule {
        &self.pi
    }

    pub fn rho_r(&self) -> &PolyGain {
        &self.rho_r
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.sigma, delta, self.pi.clone(), self.rho_r.clone())
    }

    /// `−σ²ρ_r(ξ̌_r)ξ̌_r² − δ²`, the value of `g` right after a latch.
    pub fn reset_value(&self, xi_check_r: f64) -> f64 {
        -self.sigma * self.sigma * self.rho_r.eval(xi_check_r) * xi_check_r * xi_check_r - self.delta * self.delta
    }
}

/// Sampled-minus-current deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviations {
    pub e_tilde: f64,
    pub eta_tilde: Vec<f64>,
    pub xi_tilde: Vec<f64>,
    pub vartheta_tilde_r: f64,
}

pub fn deviations(e: f64, eta: &[f64], xi_hat: &[f64], latched: &Latched, law: &BackstepLaw) -> Deviations {
    let xr_now = checked_last(e, xi_hat, law);
    let xr_k = latched.xi_check_last(law);
    Deviations {
        e_tilde: latched.e_k - e,
        eta_tilde: latched.eta_k.iter().zip(eta).map(|(a, b)| a - b).collect(),
        xi_tilde: latched.xi_hat_k.iter().zip(xi_hat).map(|(a, b)| a - b).collect(),
        vartheta_tilde_r: law.vartheta_last(xr_k) - law.vartheta_last(xr_now),
    }
}

/// `g = ϑ̃_r² + π_r(η̃, ẽ) − σ²ρ_r(ξ̌_r)ξ̌_r² − δ²`; fire when `g ≥ 0`.
pub fn trigger_value(dev: &Deviations, xi_check_r: f64, pol: &TriggerPolicy) -> f64 {
    dev.vartheta_tilde_r * dev.vartheta_tilde_r + pol.pi.eval(&dev.eta_tilde, dev.e_tilde)
        + pol.reset_value(xi_check_r)
}

pub fn fires(g: f64) -> bool {
    g >= 0.0
}

/// The Lorenz rule evaluated the way it is written for that example:
/// `f̃ − σ²|ϑ₂(ξ̌₂)ξ̌₂| − δ²` with `ϑ₂(s) = −12(s² + 1)s`.
#[allow(clippy::too_many_arguments)]
pub fn lorenz_rule_value(
    vartheta_tilde_2: f64,
    eta_tilde: &[f64],
    e_tilde: f64,
    xi_check_2: f64,
    psi: &[f64],
    lambda: &[f64],
    sigma: f64,
    delta: f64,
) -> f64 {
    let vartheta_2 = -12.0 * (xi_check_2 * xi_check_2 + 1.0) * xi_check_2;
    let f_tilde = vartheta_tilde_2.powi(2) + lorenz_pi(eta_tilde, e_tilde, psi, lambda);
    f_tilde - sigma.powi(2) * (vartheta_2 * xi_check_2).abs() - delta.powi(2)
}
