//! Run metrics and the coordinate-chain diagnostics of the augmented system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exogen::InternalModel;
use crate::hybridsim::{ClosedLoopState, SimResult, SimStatus};
use crate::matlib::Matrix;

/// Width of the bins used for `trigger_counts_windowed`.
pub const COUNT_BIN: f64 = 5.0;

/// Default tail window length, ending at `t_end`.
pub const TAIL_LENGTH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub status: String,
    pub tail_window: (f64, f64),
    pub tail_sup_error: f64,
    pub trigger_count_total: usize,
    /// Triggers per consecutive `COUNT_BIN`-second bin starting at 0.
    pub trigger_counts_windowed: Vec<usize>,
    pub min_dwell: Option<f64>,
    pub mean_dwell: Option<f64>,
}

pub fn default_tail_window(t_end: f64) -> (f64, f64) {
    ((t_end - TAIL_LENGTH).max(0.0), t_end)
}

pub fn compute_metrics(res: &SimResult, tail_window: (f64, f64)) -> Result<Metrics> {
    let (t_a, t_b) = tail_window;
    if !(t_a < t_b) {
        return Err(Error::EmptyWindow { t_a, t_b });
    }
    let tail = res
        .trace
        .iter()
        .filter(|row| row.t >= t_a && row.t <= t_b)
        .map(|row| row.e.abs())
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |m| m.max(e))));
    let tail_sup_error = tail.ok_or(Error::EmptyWindow { t_a, t_b })?;

    let n_bins = ((res.t_end / COUNT_BIN).ceil() as usize).max(1);
    let mut bins = vec![0usize; n_bins];
    for rec in &res.trigger_log {
        let idx = ((rec.t_k / COUNT_BIN) as usize).min(n_bins - 1);
        bins[idx] += 1;
    }
    let dwell = res.trigger_log.iter().map(|r| r.dwell);
    let min_dwell = dwell.clone().reduce(f64::min);
    let mean_dwell = if res.trigger_log.is_empty() {
        None
    } else {
        Some(dwell.sum::<f64>() / res.trigger_log.len() as f64)
    };
    Ok(Metrics {
        status: match res.status {
            SimStatus::Completed => "Completed",
            SimStatus::ZenoGuard => "ZenoGuard",
            SimStatus::MaxTriggers => "MaxTriggers",
        }
        .to_string(),
        tail_window,
        tail_sup_error,
        trigger_count_total: res.trigger_log.len(),
        trigger_counts_windowed: bins,
        min_dwell,
        mean_dwell,
    })
}

/// Chain `c_r = b⁻¹N`, `c_{i−1} = Mc_i`, gains `dᵢ = bΨc_{r+1−i}`, and the
/// matrices `U_d`, `A_d`, `A_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordChain {
    /// `c[0] = c₁ … c[r−1] = c_r`.
    pub c: Vec<Vec<f64>>,
    /// `d[0] = d₁ … d[r−1] = d_r`.
    pub d: Vec<f64>,
    /// Unit lower triangular, `(U_d)_{ij} = −d_{i−j}` below the diagonal.
    pub u_d: Matrix,
    /// Shift matrix with last row `(d_r, …, d₁)`.
    pub a_d: Matrix,
    /// Pure shift (the chain of integrators).
    pub a_c: Matrix,
}

impl CoordChain {
    /// `C x̄ = Σ cᵢ x̄ᵢ`, the block row `[c₁ … c_r]` applied to `x̄`.
    pub fn c_times(&self, x_bar: &[f64]) -> Vec<f64> {
        let s = self.c[0].len();
        let mut out = vec![0.0; s];
        for (ci, xi) in self.c.iter().zip(x_bar) {
            for (o, c) in out.iter_mut().zip(ci) {
                *o += c * xi;
            }
        }
        out
    }

    /// `C` as an s×r matrix (column i is cᵢ).
    pub fn c_matrix(&self) -> Matrix {
        let (s, r) = (self.c[0].len(), self.c.len());
        let mut m = Matrix::zeros(s, r);
        for (j, cj) in self.c.iter().enumerate() {
            for (i, &v) in cj.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

pub fn coord_chain(b: f64, im: &InternalModel, r: usize) -> Result<CoordChain> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidGain(b));
    }
    if r == 0 {
        return Err(Error::InvalidParams("relative degree must be at least 1".into()));
    }
    let mut c = vec![Vec::new(); r];
    c[r - 1] = im.n().iter().map(|n| n / b).collect();
    for i in (1..r).rev() {
        c[i - 1] = im.m().mul_vec(&c[i])?;
    }
    let d: Vec<f64> = (1..=r).map(|i| b * im.output(&c[r - i])).collect();

    let mut u_d = Matrix::identity(r);
    for i in 1..r {
        for j in 0..i {
            u_d[(i, j)] = -d[i - j - 1];
        }
    }
    let mut a_c = Matrix::zeros(r, r);
    for i in 0..r.saturating_sub(1) {
        a_c[(i, i + 1)] = 1.0;
    }
    let mut a_d = a_c.clone();
    for j in 0..r {
        a_d[(r - 1, j)] += d[r - 1 - j];
    }
    Ok(CoordChain { c, d, u_d, a_d, a_c })
}

/// Inverse of a unit lower triangular matrix by forward substitution.
pub fn unit_lower_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::identity(n);
    for j in 0..n {
        for i in j + 1..n {
            let s: f64 = (j..i).map(|k| l[(i, k)] * inv[(k, j)]).sum();
            inv[(i, j)] = -s;
        }
    }
    inv
}

/// Steady-state manifold `(𝐳(v,w), 𝐱(v,w), θ(v,w))` solving the regulator
/// equations. Supplied by the user; not derived here.
pub trait RegulatorSolution: Send + Sync {
    fn zz(&self, v: &[f64], w: &[f64]) -> Vec<f64>;
    fn xx(&self, v: &[f64], w: &[f64]) -> Vec<f64>;
    fn theta(&self, v: &[f64], w: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedView {
    pub z_bar: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub eta_bar: Vec<f64>,
    pub xi: Vec<f64>,
}

/// `z̄ = z − 𝐳`, `x̄ = x − 𝐱`, `η̄ = η − θ − Cx̄`, `ξ = b⁻¹U_d x̄`.
pub fn transformed_view(
    state: &ClosedLoopState,
    sol: Option<&dyn RegulatorSolution>,
    chain: &CoordChain,
    b: f64,
    w: &[f64],
) -> Result<TransformedView> {
    let sol = sol.ok_or(Error::MissingSolution)?;
    if !(b > 0.0) {
        return Err(Error::InvalidGain(b));
    }
    let diff = |a: &[f64], b: Vec<f64>| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let z_bar = diff(&state.z, sol.zz(&state.v, w));
    let x_bar = diff(&state.x, sol.xx(&state.v, w));
    let cx = chain.c_times(&x_bar);
    let eta_bar: Vec<f64> = diff(&state.eta, sol.theta(&state.v, w))
        .into_iter()
        .zip(cx)
        .map(|(a, c)| a - c)
        .collect();
    let xi = chain.u_d.mul_vec(&x_bar)?.into_iter().map(|x| x / b).collect();
    Ok(TransformedView {
        z_bar,
        x_bar,
        eta_bar,
        xi,
    })
}

/// `x̄ = b·U_d⁻¹ξ`.
pub fn untransform_x(chain: &CoordChain, xi: &[f64], b: f64) -> Result<Vec<f64>> {
    Ok(unit_lower_inverse(&chain.u_d)
        .mul_vec(xi)?
        .into_iter()
        .map(|x| x * b)
        .collect())
}
