//! Exosystem description and linear internal-model synthesis.
//!
//! The steady-state input generator `d^s u/dt^s = ϱ₁u + ϱ₂u' + … + ϱ_s u^{(s−1)}`
//! is realized by the companion pair `(Φ, Γ)`. Given a Hurwitz, controllable
//! `(M, N)`, the Sylvester equation `TΦ − MT = NΓ` yields the output map
//! `Ψ = ΓT⁻¹` used by the compensator `η̇ = Mη + Nu`.

use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_len, Error, Result};
use crate::matlib::{self, Matrix, RANK_TOL};

/// Reference output `y₀ = q(v, w)`.
pub type OutputMap = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Linear exosystem `v̇ = Sv` with reference output `q(v, w)`.
#[derive(Clone)]
pub struct Exosystem {
    s: Matrix,
    q: OutputMap,
}

impl fmt::Debug for Exosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Exosystem").field("s", &self.s).finish_non_exhaustive()
    }
}

impl Exosystem {
    pub fn new(s: Matrix, q: OutputMap) -> Result<Self> {
        if !s.is_square() || s.rows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "Exosystem::new",
                expected: s.rows(),
                actual: s.cols(),
            });
        }
        Ok(Self { s, q })
    }

    /// Exosystem whose reference output is the linear form `c·v`.
    pub fn linear(s: Matrix, c: Vec<f64>) -> Result<Self> {
        ensure_len("Exosystem::linear output", s.rows(), c.len())?;
        Self::new(s, Arc::new(move |v, _w| c.iter().zip(v).map(|(a, b)| a * b).sum()))
    }

    pub fn dim(&self) -> usize {
        self.s.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.s
    }

    pub fn output(&self, v: &[f64], w: &[f64]) -> f64 {
        (self.q)(v, w)
    }

    pub fn rates_into(&self, v: &[f64], out: &mut [f64]) {
        self.s
            .mul_vec_into(v, out)
            .expect("exosystem state dimension");
    }

    /// Spot checks of the neutral-stability requirement on `S` and of
    /// `q(0, w) = 0` at the supplied parameter samples.
    pub fn validate(&self, w_samples: &[Vec<f64>]) -> Result<()> {
        if matlib::is_hurwitz(&self.s) || matlib::is_hurwitz(&-&self.s) {
            return Err(Error::InvalidParams(
                "exosystem matrix S must have its spectrum on the imaginary axis".into(),
            ));
        }
        let zero = vec![0.0; self.dim()];
        for w in w_samples {
            let y0 = self.output(&zero, w);
            if y0.abs() > 1e-12 {
                return Err(Error::InvalidParams(format!(
                    "reference output q(0, w) = {y0} must vanish"
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients `ϱ₁..ϱ_s` of `P(λ) = λˢ − ϱ₁ − ϱ₂λ − ⋯ − ϱ_sλ^{s−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateGenerator {
    pub varrho: Vec<f64>,
}

impl SteadyStateGenerator {
    pub fn new(varrho: Vec<f64>) -> Result<Self> {
        if varrho.is_empty() {
            return Err(Error::InvalidParams("generator order must be at least 1".into()));
        }
        if varrho.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("generator coefficients must be finite".into()));
        }
        Ok(Self { varrho })
    }

    pub fn order(&self) -> usize {
        self.varrho.len()
    }

    /// Rejects generators with roots off the imaginary axis: neither `Φ`
    /// nor `−Φ` may be Hurwitz.
    pub fn validate(&self) -> Result<()> {
        let (phi, _) = companion_from_generator(self);
        if matlib::is_hurwitz(&phi) || matlib::is_hurwitz(&-&phi) {
            return Err(Error::InvalidParams(
                "generator polynomial must have its roots on the imaginary axis".into(),
            ));
        }
        Ok(())
    }
}

/// Companion matrix with superdiagonal ones and last row `(ϱ₁, …, ϱ_s)`,
/// together with `Γ = (1, 0, …, 0)`.
pub fn companion_from_generator(g: &SteadyStateGenerator) -> (Matrix, Vec<f64>) {
    (companion(&g.varrho), unit_vector(g.order(), 0))
}

fn companion(last_row: &[f64]) -> Matrix {
    let s = last_row.len();
    let mut phi = Matrix::zeros(s, s);
    for i in 0..s.saturating_sub(1) {
        phi[(i, i + 1)] = 1.0;
    }
    for (j, &c) in last_row.iter().enumerate() {
        phi[(s - 1, j)] = c;
    }
    phi
}

fn unit_vector(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Default `(M, N)`: companion realization with distinct poles `−1, −2, …, −s`
/// and `N = (0, …, 0, 1)ᵀ`.
pub fn default_pair(s: usize) -> (Matrix, Vec<f64>) {
    // descending coefficients of ∏ (λ + k)
    let mut poly = vec![1.0];
    for k in 1..=s {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c * k as f64;
        }
        poly = next;
    }
    let last_row: Vec<f64> = (0..s).map(|j| -poly[s - j]).collect();
    (companion(&last_row), unit_vector(s, s - 1))
}

/// `[N, MN, …, M^{s−1}N]`.
pub fn controllability_matrix(m: &Matrix, n: &[f64]) -> Result<Matrix> {
    let s = m.rows();
    ensure_len("controllability_matrix", s, n.len())?;
    let mut out = Matrix::zeros(s, s);
    let mut col = n.to_vec();
    for j in 0..s {
        for i in 0..s {
            out[(i, j)] = col[i];
        }
        col = m.mul_vec(&col)?;
    }
    Ok(out)
}

pub fn controllability_rank(m: &Matrix, n: &[f64]) -> Result<usize> {
    Ok(matlib::rank(&controllability_matrix(m, n)?, RANK_TOL))
}

/// Matrices of the linear internal model.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    phi: Matrix,
    gamma: Vec<f64>,
    m: Matrix,
    n: Vec<f64>,
    t: Matrix,
    psi: Vec<f64>,
}

/// Builds the internal model for generator `g` and compensator pair `(M, N)`.
pub fn synthesize(g: &SteadyStateGenerator, m: Matrix, n: Vec<f64>) -> Result<InternalModel> {
    let s = g.order();
    if m.rows() != s || m.cols() != s {
        return Err(Error::DimensionMismatch {
            context: "synthesize(M)",
            expected: s,
            actual: m.rows().max(m.cols()),
        });
    }
    ensure_len("synthesize(N)", s, n.len())?;
    if !matlib::is_hurwitz(&m) {
        return Err(Error::NotHurwitz("M".into()));
    }
    let rank = controllability_rank(&m, &n)?;
    if rank < s {
        return Err(Error::NotControllable { rank, order: s });
    }
    let (phi, gamma) = companion_from_generator(g);
    let n_gamma = &Matrix::column(&n) * &Matrix::row(&gamma);
    let t = matlib::solve_sylvester(&phi, &m, &n_gamma)?;
    let t_inv = matlib::inverse(&t)?;
    let psi = (&Matrix::row(&gamma) * &t_inv).as_slice().to_vec();
    Ok(InternalModel {
        phi,
        gamma,
        m,
        n,
        t,
        psi,
    })
}

impl InternalModel {
    pub fn order(&self) -> usize {
        self.gamma.len()
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn n(&self) -> &[f64] {
        &self.n
    }

    pub fn t(&self) -> &Matrix {
        &self.t
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// `Ψ·η`.
    pub fn output(&self, eta: &[f64]) -> f64 {
        self.psi.iter().zip(eta).map(|(a, b)| a * b).sum()
    }

    /// `‖TΦ − MT − NΓ‖_F`.
    pub fn sylvester_residual(&self) -> f64 {
        let n_gamma = &Matrix::column(&self.n) * &Matrix::row(&self.gamma);
        matlib::sylvester_residual(&self.t, &self.phi, &self.m, &n_gamma)
    }

    /// `‖ΨT − Γ‖₂`.
    pub fn psi_residual(&self) -> f64 {
        let pt = &Matrix::row(&self.psi) * &self.t;
        pt.as_slice()
            .iter()
            .zip(&self.gamma)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Compensator rates `Mη + Nu`.
    pub fn rates(&self, eta: &[f64], u: f64) -> Result<Vec<f64>> {
        ensure_len("internal_model_rates", self.order(), eta.len())?;
        let mut out = vec![0.0; self.order()];
        self.rates_into(eta, u, &mut out);
        Ok(out)
    }

    pub(crate) fn rates_into(&self, eta: &[f64], u: f64, out: &mut [f64]) {
        self.m.mul_vec_into(eta, out).expect("internal model dimension");
        for (o, n) in out.iter_mut().zip(&self.n) {
            *o += n * u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn lorenz_generator() -> SteadyStateGenerator {
        SteadyStateGenerator::new(vec![-9.0, 0.0, -10.0, 0.0]).unwrap()
    }

    pub(crate) fn lorenz_pair() -> (Matrix, Vec<f64>) {
        let m = Matrix::from_rows(&[
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-4.0, -12.0, -13.0, -6.0],
        ])
        .unwrap();
        (m, vec![0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn companion_matches_lorenz_display() {
        let (phi, gamma) = companion_from_generator(&lorenz_generator());
        assert_eq!(phi.row_slice(3), &[-9.0, 0.0, -10.0, 0.0]);
        assert_eq!(phi.row_slice(0), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(gamma, vec![1.0, 0.0, 0.0, 0.0]);
        lorenz_generator().validate().unwrap();
    }

    #[test]
    fn companion_scalar() {
        let g = SteadyStateGenerator::new(vec![0.0]).unwrap();
        let (phi, gamma) = companion_from_generator(&g);
        assert_eq!(phi, Matrix::zeros(1, 1));
        assert_eq!(gamma, vec![1.0]);
    }

    #[test]
    fn generator_char_poly_roots_on_imaginary_axis() {
        let (phi, _) = companion_from_generator(&lorenz_generator());
        let p = matlib::char_poly(&phi).unwrap();
        // λ⁴ + 10λ² + 9 = (μ + 1)(μ + 9) with μ = λ²
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[3].abs() < 1e-12);
        let (b, c) = (p[2], p[4]);
        let disc = (b * b - 4.0 * c).sqrt();
        let mut mu = [(-b + disc) / 2.0, (-b - disc) / 2.0];
        mu.sort_by(f64::total_cmp);
        assert!((mu[0] + 9.0).abs() < 1e-12 && (mu[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_with_stable_root_rejected() {
        // P(λ) = λ + 1
        let g = SteadyStateGenerator::new(vec![-1.0]).unwrap();
        assert!(g.validate().is_err());
    }

    #[test]
    fn lorenz_psi() {
        let (m, n) = lorenz_pair();
        let im = synthesize(&lorenz_generator(), m, n).unwrap();
        for (got, want) in im.psi().iter().zip([-5.0, 12.0, 3.0, 6.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(im.sylvester_residual() <= 1e-10);
        assert!(im.psi_residual() <= 1e-9);
    }

    #[test]
    fn scalar_synthesis() {
        let g = SteadyStateGenerator::new(vec![0.0]).unwrap();
        let im = synthesize(&g, Matrix::diag(&[-1.0]), vec![1.0]).unwrap();
        assert!((im.t()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((im.psi()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn synthesis_rejects_bad_pairs() {
        let (m, _) = lorenz_pair();
        let err = synthesize(&lorenz_generator(), m.clone(), vec![0.0; 4]).unwrap_err();
        assert_eq!(err, Error::NotControllable { rank: 0, order: 4 });

        let unstable = &m + &Matrix::identity(4).scale(5.0);
        let err = synthesize(&lorenz_generator(), unstable, vec![0.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz(_)));

        let err = synthesize(&lorenz_generator(), Matrix::identity(3), vec![1.0; 3]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn default_pair_has_distinct_stable_poles() {
        let (m, n) = default_pair(4);
        // ∏(λ+k), k=1..4 = λ⁴ + 10λ³ + 35λ² + 50λ + 24
        assert_eq!(m.row_slice(3), &[-24.0, -50.0, -35.0, -10.0]);
        assert_eq!(n, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(matlib::is_hurwitz(&m));
        assert_eq!(controllability_rank(&m, &n).unwrap(), 4);
        let im = synthesize(&lorenz_generator(), m, n).unwrap();
        assert!(im.sylvester_residual() <= 1e-10);
    }

    #[test]
    fn internal_model_rates_examples() {
        let (m, n) = lorenz_pair();
        let im = synthesize(&lorenz_generator(), m, n).unwrap();
        assert_eq!(im.rates(&[0.0; 4], 0.0).unwrap(), vec![0.0; 4]);
        assert_eq!(im.rates(&[1.0, 0.0, 0.0, 0.0], 0.0).unwrap(), vec![0.0, 0.0, 0.0, -4.0]);
        assert_eq!(im.rates(&[0.0; 4], 1.0).unwrap(), im.n().to_vec());
        assert!(matches!(im.rates(&[0.0; 3], 0.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn similarity_preserves_generator_spectrum() {
        // M with char poly (λ+1)(λ+3), ϱ from roots ±i
        let g = SteadyStateGenerator::new(vec![-1.0, 0.0]).unwrap();
        let m = Matrix::from_rows(&[[0.0, 1.0], [-3.0, -4.0]]).unwrap();
        let im = synthesize(&g, m, vec![0.0, 1.0]).unwrap();
        let t_inv = matlib::inverse(im.t()).unwrap();
        let similar = &(im.t() * im.phi()) * &t_inv;
        let p1 = matlib::char_poly(&similar).unwrap();
        let p2 = matlib::char_poly(im.phi()).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-10);
        }
        // TΦT⁻¹ = M + NΨ
        let mnpsi = im.m() + &(&Matrix::column(im.n()) * &Matrix::row(im.psi()));
        assert!((&similar - &mnpsi).max_abs() < 1e-10);
    }

    #[test]
    fn exosystem_validation() {
        let s = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let exo = Exosystem::linear(s, vec![1.0, 0.0]).unwrap();
        exo.validate(&[vec![0.0; 7]]).unwrap();
        assert_eq!(exo.output(&[0.3, 0.7], &[]), 0.3);

        let stable = Exosystem::linear(Matrix::diag(&[-1.0, -2.0]), vec![1.0, 0.0]).unwrap();
        assert!(stable.validate(&[]).is_err());

        let s = Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let biased = Exosystem::new(s, Arc::new(|v, _| v[0] + 1.0)).unwrap();
        assert!(biased.validate(&[vec![]]).is_err());
    }
}
