//! Plants in output feedback form and the hyper-chaotic Lorenz benchmark.
//!
//! A plant has zero dynamics `ż = f(z, y, v, w)` and an integrator chain
//! `ẋᵢ = xᵢ₊₁ + gᵢ(z, y, v, w)`, `ẋ_r = g_r(z, y, v, w) + b(w)u`, `y = x₁`.

use crate::error::{ensure_len, Error, Result};
use crate::exogen::Exosystem;
use crate::matlib::Matrix;

/// Output-feedback-form dynamics.
///
/// Implementations are evaluated concurrently from parallel sweeps and must
/// not carry interior mutable state.
pub trait OutputFeedbackPlant: Send + Sync {
    /// Relative degree `r` (length of the `x` chain).
    fn relative_degree(&self) -> usize;

    /// Dimension of `z`.
    fn zero_dynamics_dim(&self) -> usize;

    /// Writes `f(z, y, v, w)` into `out`.
    fn zero_dynamics(&self, z: &[f64], y: f64, v: &[f64], w: &[f64], out: &mut [f64]);

    /// `gᵢ(z, y, v, w)` for the zero-based chain index `i`.
    fn chain_term(&self, i: usize, z: &[f64], y: f64, v: &[f64], w: &[f64]) -> f64;

    /// High-frequency gain `b(w) > 0`.
    fn input_gain(&self, w: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

impl PlantState {
    pub fn output(&self) -> f64 {
        self.x[0]
    }
}

/// `(ż, ẋ)` for the given state, input, exosystem state and uncertainty.
pub fn plant_rates(
    plant: &dyn OutputFeedbackPlant,
    st: &PlantState,
    u: f64,
    v: &[f64],
    w: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("plant_rates(z)", plant.zero_dynamics_dim(), st.z.len())?;
    ensure_len("plant_rates(x)", plant.relative_degree(), st.x.len())?;
    let mut dz = vec![0.0; st.z.len()];
    let mut dx = vec![0.0; st.x.len()];
    plant_rates_into(plant, &st.z, &st.x, u, v, w, &mut dz, &mut dx);
    Ok((dz, dx))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn plant_rates_into(
    plant: &dyn OutputFeedbackPlant,
    z: &[f64],
    x: &[f64],
    u: f64,
    v: &[f64],
    w: &[f64],
    dz: &mut [f64],
    dx: &mut [f64],
) {
    let y = x[0];
    let r = x.len();
    plant.zero_dynamics(z, y, v, w, dz);
    for i in 0..r {
        let g = plant.chain_term(i, z, y, v, w);
        dx[i] = if i + 1 < r {
            x[i + 1] + g
        } else {
            g + plant.input_gain(w) * u
        };
    }
}

/// Spot checks `b(w) > 0` and the equilibrium conditions `f(0,0,0,w) = 0`,
/// `gᵢ(0,0,0,w) = 0` at each sample.
pub fn validate_plant(plant: &dyn OutputFeedbackPlant, n_v: usize, w_samples: &[Vec<f64>]) -> Result<()> {
    let z = vec![0.0; plant.zero_dynamics_dim()];
    let v = vec![0.0; n_v];
    let mut dz = vec![0.0; z.len()];
    for w in w_samples {
        let b = plant.input_gain(w);
        if !(b > 0.0) {
            return Err(Error::InvalidGain(b));
        }
        plant.zero_dynamics(&z, 0.0, &v, w, &mut dz);
        let g_max = (0..plant.relative_degree())
            .map(|i| plant.chain_term(i, &z, 0.0, &v, w).abs())
            .fold(0.0, f64::max);
        let f_max = dz.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if f_max > 1e-12 || g_max > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "origin is not an equilibrium at w = {w:?}"
            )));
        }
    }
    Ok(())
}

/// Nominal Lorenz coefficients `(a₁, …, a₆, b)`.
pub const LORENZ_NOMINAL: [f64; 7] = [-8.0, 1.0, -6.0, 2.0, -1.0, -2.0, 1.0];

/// Uncertainty used in the reference benchmark runs.
pub const LORENZ_BENCHMARK_W: [f64; 7] = [0.5, -0.4, 0.1, -0.3, 0.2, -0.3, 0.4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub a_bar: [f64; 7],
    pub w: [f64; 7],
}

impl LorenzParams {
    pub fn new(w: [f64; 7]) -> Self {
        Self {
            a_bar: LORENZ_NOMINAL,
            w,
        }
    }

    /// `a = ā + w`.
    pub fn coefficients(&self) -> [f64; 7] {
        std::array::from_fn(|i| self.a_bar[i] + self.w[i])
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.coefficients();
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("Lorenz coefficients must be finite".into()));
        }
        if !(a[0] < 0.0) {
            return Err(Error::InvalidParams(format!("a1 = {} must be negative", a[0])));
        }
        if !(a[2] < 0.0) {
            return Err(Error::InvalidParams(format!("a3 = {} must be negative", a[2])));
        }
        if !(a[6] > 0.0) {
            return Err(Error::InvalidParams(format!("b = {} must be positive", a[6])));
        }
        Ok(())
    }
}

/// Controlled hyper-chaotic Lorenz system, relative degree 2:
///
/// ```text
/// ż₁ = a₁z₁ + a₂x₁          ẋ₁ = x₂ + a₄z₁ + a₅x₁ − z₁z₂
/// ż₂ = a₃z₂ + z₁x₁          ẋ₂ = bu + a₆z₁
/// ```
///
/// Coefficients are `ā + w` with `w` supplied at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzPlant {
    a_bar: [f64; 7],
}

impl LorenzPlant {
    fn coeff(&self, i: usize, w: &[f64]) -> f64 {
        self.a_bar[i] + w.get(i).copied().unwrap_or(0.0)
    }
}

impl OutputFeedbackPlant for LorenzPlant {
    fn relative_degree(&self) -> usize {
        2
    }

    fn zero_dynamics_dim(&self) -> usize {
        2
    }

    fn zero_dynamics(&self, z: &[f64], y: f64, _v: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] = self.coeff(0, w) * z[0] + self.coeff(1, w) * y;
        out[1] = self.coeff(2, w) * z[1] + z[0] * y;
    }

    fn chain_term(&self, i: usize, z: &[f64], y: f64, _v: &[f64], w: &[f64]) -> f64 {
        match i {
            0 => self.coeff(3, w) * z[0] + self.coeff(4, w) * y - z[0] * z[1],
            1 => self.coeff(5, w) * z[0],
            _ => 0.0,
        }
    }

    fn input_gain(&self, w: &[f64]) -> f64 {
        self.coeff(6, w)
    }
}

/// Lorenz plant for parameters `p`; validated at `p.w` and on the corners of
/// the half-width uncertainty box around the nominal values.
pub fn lorenz_plant(p: &LorenzParams) -> Result<LorenzPlant> {
    p.validate()?;
    let plant = LorenzPlant { a_bar: p.a_bar };
    let mut samples = vec![p.w.to_vec()];
    samples.extend((0..1u32 << 7).map(|mask| {
        (0..7)
            .map(|i| if mask >> i & 1 == 1 { 0.5 } else { -0.5 })
            .collect::<Vec<_>>()
    }));
    validate_plant(&plant, 2, &samples)?;
    Ok(plant)
}

/// Harmonic exosystem `v̇₁ = v₂, v̇₂ = −v₁` with `y₀ = v₁`.
pub fn lorenz_exosystem() -> Exosystem {
    let s = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).expect("static matrix");
    Exosystem::linear(s, vec![1.0, 0.0]).expect("static exosystem")
}
