//! Sampled-output observer, recursive backstepping coordinates and the
//! event-held control law.
//!
//! Between triggering instants `t_k` the controller runs
//!
//! ```text
//! u      = ϑ_r(ξ̌_r(t_k)) + Ψη(t_k)
//! ξ̂̇     = A_o ξ̂ + λ e(t_k) + B(u − Ψη(t_k))
//! η̇      = Mη + Nu
//! ```
//!
//! with `ξ̌₁ = e`, `ξ̌ᵢ₊₁ = ξ̂ᵢ₊₁ − ϑᵢ(ξ̌ᵢ)` and `ϑᵢ(s) = −ρᵢ(s)s`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::exogen::InternalModel;
use crate::matlib::{self, Matrix};

/// Polynomial gain `ρ(s) = Σ c_k s^k`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyGain {
    coeffs: Vec<f64>,
}

impl PolyGain {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(
                "gain polynomial needs at least one finite coefficient".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// The logarithmic probe grid `±|s| ∈ [1e−6, 1e3]` plus the origin.
    pub fn probe_grid() -> impl Iterator<Item = f64> {
        let per_side = 91;
        let mags = (0..per_side).map(move |k| 10f64.powf(-6.0 + 9.0 * k as f64 / (per_side - 1) as f64));
        std::iter::once(0.0).chain(mags.flat_map(|m| [m, -m]))
    }

    /// Smallest value seen on the probe grid.
    pub fn min_on_grid(&self) -> f64 {
        Self::probe_grid().map(|s| self.eval(s)).fold(f64::INFINITY, f64::min)
    }
}

/// `ρ₁(s) = 6(s⁶ + 1)` of the Lorenz design.
pub fn lorenz_rho1() -> PolyGain {
    PolyGain::new(vec![6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.0]).expect("static")
}

/// `ρ₂(s) = 12(s² + 1)` of the Lorenz design.
pub fn lorenz_rho2() -> PolyGain {
    PolyGain::new(vec![12.0, 0.0, 12.0]).expect("static")
}

/// Observer gains `λ` and the matrix `A_o` with `−λ` in its first column
/// and ones on the superdiagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    lambda: Vec<f64>,
    a_o: Matrix,
}

impl ObserverGains {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn a_o(&self) -> &Matrix {
        &self.a_o
    }

    pub fn order(&self) -> usize {
        self.lambda.len()
    }
}

pub fn observer_matrix(lambda: &[f64]) -> Matrix {
    let r = lambda.len();
    let mut a_o = Matrix::zeros(r, r);
    for (i, &l) in lambda.iter().enumerate() {
        a_o[(i, 0)] = -l;
        if i + 1 < r {
            a_o[(i, i + 1)] = 1.0;
        }
    }
    a_o
}

pub fn build_observer(lambda: Vec<f64>) -> Result<ObserverGains> {
    if lambda.is_empty() {
        return Err(Error::InvalidParams("observer needs r ≥ 1 gains".into()));
    }
    let a_o = observer_matrix(&lambda);
    if !matlib::is_hurwitz(&a_o) {
        return Err(Error::NotHurwitz(format!("A_o (lambda = {lambda:?})")));
    }
    Ok(ObserverGains { lambda, a_o })
}

/// Form of the first virtual control.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    /// `ϑ₁(s) = −ρ₁(s)s`, vanishing at the origin.
    #[default]
    Structural,
    /// `ϑ₁(s) = −ρ₁(s)`, the printed Lorenz variant `ξ̌₂ = ξ̂₂ + 6(e⁶ + 1)`.
    PaperLiteral,
}

/// Backstepping gains `ρ₁..ρ_r` and the trigger margin `σ ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackstepLaw {
    rho: Vec<PolyGain>,
    sigma: f64,
    first_stage: FirstStage,
}

impl BackstepLaw {
    pub fn new(rho: Vec<PolyGain>, sigma: f64) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidParams("backstepping law needs r ≥ 1 gains".into()));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParams(format!("sigma = {sigma} must lie in (0, 1)")));
        }
        for (i, g) in rho.iter().enumerate() {
            let min = g.min_on_grid();
            if !(min > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "rho_{} is not positive on the probe grid (min {min})",
                    i + 1
                )));
            }
        }
        Ok(Self {
            rho,
            sigma,
            first_stage: FirstStage::Structural,
        })
    }

    /// The Lorenz design `ρ₁ = 6(s⁶+1)`, `ρ₂ = 12(s²+1)`.
    pub fn lorenz(sigma: f64) -> Result<Self> {
        Self::new(vec![lorenz_rho1(), lorenz_rho2()], sigma)
    }

    pub fn with_first_stage(mut self, first_stage: FirstStage) -> Self {
        self.first_stage = first_stage;
        self
    }

    pub fn first_stage(&self) -> FirstStage {
        self.first_stage
    }

    pub fn order(&self) -> usize {
        self.rho.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self, i: usize) -> &PolyGain {
        &self.rho[i]
    }

    pub fn rho_last(&self) -> &PolyGain {
        self.rho.last().expect("non-empty")
    }

    /// Virtual control `ϑᵢ(s)` for zero-based stage `i`.
    pub fn vartheta(&self, i: usize, s: f64) -> f64 {
        if i == 0 && self.first_stage == FirstStage::PaperLiteral && self.rho.len() > 1 {
            -self.rho[0].eval(s)
        } else {
            -self.rho[i].eval(s) * s
        }
    }

    pub fn vartheta_last(&self, s: f64) -> f64 {
        self.vartheta(self.rho.len() - 1, s)
    }
}

/// `ξ̌₁ = e`, `ξ̌ᵢ₊₁ = ξ̂ᵢ₊₁ − ϑᵢ(ξ̌ᵢ)`.
pub fn checked_coords(e: f64, xi_hat: &[f64], law: &BackstepLaw) -> Vec<f64> {
    let mut out = Vec::with_capacity(xi_hat.len());
    let mut cur = e;
    out.push(cur);
    for i in 1..xi_hat.len() {
        cur = xi_hat[i] - law.vartheta(i - 1, cur);
        out.push(cur);
    }
    out
}

/// `ξ̌_r` alone, without allocating the chain.
pub fn checked_last(e: f64, xi_hat: &[f64], law: &BackstepLaw) -> f64 {
    (1..xi_hat.len()).fold(e, |cur, i| xi_hat[i] - law.vartheta(i - 1, cur))
}

/// Continuous controller states `(η, ξ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub eta: Vec<f64>,
    pub xi_hat: Vec<f64>,
}

/// Values frozen at the triggering instant `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Latched {
    pub t_k: f64,
    pub k: usize,
    pub e_k: f64,
    pub eta_k: Vec<f64>,
    pub xi_hat_k: Vec<f64>,
    /// Held control, computed once when the sample is taken.
    pub u_k: f64,
}

impl Latched {
    pub fn capture(
        t_k: f64,
        k: usize,
        e_k: f64,
        cs: &ControllerState,
        law: &BackstepLaw,
        im: &InternalModel,
    ) -> Self {
        let mut latched = Self {
            t_k,
            k,
            e_k,
            eta_k: cs.eta.clone(),
            xi_hat_k: cs.xi_hat.clone(),
            u_k: 0.0,
        };
        latched.u_k = control_input(&latched, law, im);
        latched
    }

    pub fn xi_check_last(&self, law: &BackstepLaw) -> f64 {
        checked_last(self.e_k, &self.xi_hat_k, law)
    }
}

/// `u = ϑ_r(ξ̌_r(t_k)) + Ψη(t_k)`, i.e. `−ρ_r(ξ̌_r)ξ̌_r + Ψη` at the latch.
pub fn control_input(latched: &Latched, law: &BackstepLaw, im: &InternalModel) -> f64 {
    let xr = checked_last(latched.e_k, &latched.xi_hat_k, law);
    law.vartheta_last(xr) + im.output(&latched.eta_k)
}

/// `(η̇, ξ̂̇)` with the latched sample and held input `u`.
pub fn controller_rates(
    cs: &ControllerState,
    latched: &Latched,
    gains: &ObserverGains,
    im: &InternalModel,
    u: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("controller_rates(eta)", im.order(), cs.eta.len())?;
    ensure_len("controller_rates(xi_hat)", gains.order(), cs.xi_hat.len())?;
    ensure_len("controller_rates(eta_k)", im.order(), latched.eta_k.len())?;
    let mut deta = vec![0.0; cs.eta.len()];
    let mut dxi = vec![0.0; cs.xi_hat.len()];
    controller_rates_into(&cs.eta, &cs.xi_hat, latched, gains, im, u, &mut deta, &mut dxi);
    Ok((deta, dxi))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn controller_rates_into(
    eta: &[f64],
    xi_hat: &[f64],
    latched: &Latched,
    gains: &ObserverGains,
    im: &InternalModel,
    u: f64,
    deta: &mut [f64],
    dxi: &mut [f64],
) {
    im.rates_into(eta, u, deta);
    gains.a_o.mul_vec_into(xi_hat, dxi).expect("observer dimension");
    for (d, l) in dxi.iter_mut().zip(&gains.lambda) {
        *d += l * latched.e_k;
    }
    let r = dxi.len();
    dxi[r - 1] += u - im.output(&latched.eta_k);
}

/// Exact update of `(η, ξ̂)` over `[t_k, t_k + Δ]` starting from the latched
/// values, via zero-order-hold discretization of both linear subsystems.
pub fn controller_zoh_step(
    latched: &Latched,
    gains: &ObserverGains,
    im: &InternalModel,
    law: &BackstepLaw,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("controller_zoh_step(eta_k)", im.order(), latched.eta_k.len())?;
    ensure_len("controller_zoh_step(xi_hat_k)", gains.order(), latched.xi_hat_k.len())?;
    ensure_len("controller_zoh_step(law)", gains.order(), law.order())?;
    let r = gains.order();

    // observer input λe_k + B(u_k − Ψη_k) = λe_k − Bρ_r(ξ̌_r)ξ̌_r
    let mut obs_in = gains.lambda.iter().map(|l| l * latched.e_k).collect::<Vec<_>>();
    obs_in[r - 1] += latched.u_k - im.output(&latched.eta_k);
    let (ad, bd) = matlib::zoh_discretize(&gains.a_o, &Matrix::identity(r), dt)?;
    let xi_next: Vec<f64> = ad
        .mul_vec(&latched.xi_hat_k)?
        .iter()
        .zip(bd.mul_vec(&obs_in)?)
        .map(|(a, b)| a + b)
        .collect();

    let (md, nd) = matlib::zoh_discretize(im.m(), &Matrix::column(im.n()), dt)?;
    let eta_next: Vec<f64> = md
        .mul_vec(&latched.eta_k)?
        .iter()
        .zip(nd.col_vec(0))
        .map(|(a, b)| a + b * latched.u_k)
        .collect();
    Ok((eta_next, xi_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogen::{synthesize, SteadyStateGenerator};

    fn lorenz_im() -> InternalModel {
        let g = SteadyStateGenerator::new(vec![-9.0, 0.0, -10.0, 0.0]).unwrap();
        let m = Matrix::from_rows(&[
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-4.0, -12.0, -13.0, -6.0],
        ])
        .unwrap();
        synthesize(&g, m, vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn latched(e_k: f64, eta_k: Vec<f64>, xi_hat_k: Vec<f64>) -> Latched {
        let law = BackstepLaw::lorenz(0.4).unwrap();
        let cs = ControllerState {
            eta: eta_k,
            xi_hat: xi_hat_k,
        };
        Latched::capture(0.0, 0, e_k, &cs, &law, &lorenz_im())
    }

    #[test]
    fn observer_examples() {
        let g = build_observer(vec![2.0, 2.0]).unwrap();
        assert_eq!(g.a_o().to_rows(), vec![vec![-2.0, 1.0], vec![-2.0, 0.0]]);
        assert!(matches!(build_observer(vec![0.0, 0.0]), Err(Error::NotHurwitz(_))));
        let g = build_observer(vec![3.0, 2.0]).unwrap();
        assert_eq!(matlib::char_poly(g.a_o()).unwrap(), vec![1.0, 3.0, 2.0]);
        assert!(build_observer(vec![]).is_err());
    }

    #[test]
    fn poly_gain_eval() {
        assert_eq!(lorenz_rho1().eval(1.0), 12.0);
        assert_eq!(lorenz_rho2().eval(1.0), 24.0);
        assert_eq!(lorenz_rho2().eval(0.0), 12.0);
        assert!(lorenz_rho1().min_on_grid() >= 6.0);
    }

    #[test]
    fn law_validation() {
        assert!(BackstepLaw::lorenz(0.0).is_err());
        assert!(BackstepLaw::lorenz(1.0).is_err());
        let bad = PolyGain::new(vec![1.0, 1.0]).unwrap(); // 1 + s < 0 for s < −1
        assert!(BackstepLaw::new(vec![bad], 0.5).is_err());
    }

    #[test]
    fn checked_coords_examples() {
        let law = BackstepLaw::lorenz(0.4).unwrap();
        assert_eq!(checked_coords(0.0, &[0.0, 0.0], &law), vec![0.0, 0.0]);
        assert_eq!(checked_coords(1.0, &[0.0, 2.0], &law), vec![1.0, 14.0]);
        assert_eq!(checked_coords(-1.0, &[0.0, 12.0], &law), vec![-1.0, 0.0]);
        assert_eq!(checked_last(1.0, &[0.0, 2.0], &law), 14.0);
    }

    #[test]
    fn paper_literal_first_stage() {
        let law = BackstepLaw::lorenz(0.4).unwrap().with_first_stage(FirstStage::PaperLiteral);
        // ξ̌₂ = ξ̂₂ + 6(e⁶ + 1)
        assert_eq!(checked_coords(0.0, &[0.0, 0.0], &law), vec![0.0, 6.0]);
        assert_eq!(checked_coords(1.0, &[0.0, 2.0], &law), vec![1.0, 14.0]);
    }

    #[test]
    fn control_input_examples() {
        let im = lorenz_im();
        let law = BackstepLaw::lorenz(0.4).unwrap();
        let z = latched(0.0, vec![0.0; 4], vec![0.0; 2]);
        assert_eq!(z.u_k, 0.0);
        let l = latched(0.0, vec![0.0; 4], vec![0.0, 1.0]);
        assert_eq!(control_input(&l, &law, &im), -24.0);
        assert_eq!(l.u_k, -24.0);
        let l = latched(0.0, vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0]);
        assert!((l.u_k + 5.0).abs() < 1e-9);
    }

    #[test]
    fn controller_rates_examples() {
        let im = lorenz_im();
        let gains = build_observer(vec![2.0, 2.0]).unwrap();
        let zero = ControllerState {
            eta: vec![0.0; 4],
            xi_hat: vec![0.0; 2],
        };
        let l0 = latched(0.0, vec![0.0; 4], vec![0.0; 2]);
        let (de, dx) = controller_rates(&zero, &l0, &gains, &im, 0.0).unwrap();
        assert_eq!(de, vec![0.0; 4]);
        assert_eq!(dx, vec![0.0; 2]);

        let l = latched(1.0, vec![0.3, 0.1, 0.0, 0.2], vec![0.0; 2]);
        let u = im.output(&l.eta_k);
        let (_, dx) = controller_rates(&zero, &l, &gains, &im, u).unwrap();
        assert_eq!(dx, vec![2.0, 2.0]);

        let (de, _) = controller_rates(&zero, &l0, &gains, &im, -24.0).unwrap();
        assert_eq!(de, vec![0.0, 0.0, 0.0, -24.0]);
    }

    #[test]
    fn zoh_zero_state_stays_zero() {
        let im = lorenz_im();
        let gains = build_observer(vec![2.0, 2.0]).unwrap();
        let law = BackstepLaw::lorenz(0.4).unwrap();
        let l0 = latched(0.0, vec![0.0; 4], vec![0.0; 2]);
        let (eta, xi) = controller_zoh_step(&l0, &gains, &im, &law, 0.01).unwrap();
        assert!(eta.iter().chain(&xi).all(|&x| x == 0.0));
    }

    #[test]
    fn zoh_small_step_matches_one_rk4_step() {
        let im = lorenz_im();
        let gains = build_observer(vec![2.0, 2.0]).unwrap();
        let law = BackstepLaw::lorenz(0.4).unwrap();
        let l = latched(0.84, vec![-0.35, 1.5, -1.49, 0.31], vec![-1.4, -5.96]);
        let dt = 1e-6;
        let (eta_z, xi_z) = controller_zoh_step(&l, &gains, &im, &law, dt).unwrap();

        let f = |cs: &ControllerState| controller_rates(cs, &l, &gains, &im, l.u_k).unwrap();
        let shift = |cs: &ControllerState, k: &(Vec<f64>, Vec<f64>), h: f64| ControllerState {
            eta: cs.eta.iter().zip(&k.0).map(|(a, b)| a + h * b).collect(),
            xi_hat: cs.xi_hat.iter().zip(&k.1).map(|(a, b)| a + h * b).collect(),
        };
        let s0 = ControllerState {
            eta: l.eta_k.clone(),
            xi_hat: l.xi_hat_k.clone(),
        };
        let k1 = f(&s0);
        let k2 = f(&shift(&s0, &k1, dt / 2.0));
        let k3 = f(&shift(&s0, &k2, dt / 2.0));
        let k4 = f(&shift(&s0, &k3, dt));
        let comb = |i: usize, a: &[f64], p: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| {
            a[i] + dt / 6.0 * (p(&k1)[i] + 2.0 * p(&k2)[i] + 2.0 * p(&k3)[i] + p(&k4)[i])
        };
        for i in 0..4 {
            let want = comb(i, &s0.eta, |k| &k.0);
            assert!((eta_z[i] - want).abs() < 1e-12, "eta[{i}]");
        }
        for i in 0..2 {
            let want = comb(i, &s0.xi_hat, |k| &k.1);
            assert!((xi_z[i] - want).abs() < 1e-12, "xi_hat[{i}]");
        }
    }
}
