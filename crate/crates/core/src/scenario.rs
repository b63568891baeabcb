//! TOML scenario files: parsing, validation and assembly of run components.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{compute_metrics, coord_chain, default_tail_window, Metrics};
use crate::error::{Error, Result};
use crate::exogen::{self, controllability_rank, synthesize, Exosystem, InternalModel, SteadyStateGenerator};
use crate::hybridsim::{simulate, ClosedLoop, InitialConditions, SimConfig, SimResult};
use crate::matlib::{self, Matrix};
use crate::plant::{lorenz_plant, LorenzParams, OutputFeedbackPlant, LORENZ_BENCHMARK_W};
use crate::regulation::{build_observer, lorenz_rho1, lorenz_rho2, BackstepLaw, FirstStage, ObserverGains, PolyGain};
use crate::trigger::{PiRule, TriggerPolicy};

pub const LORENZ_D01: &str = include_str!("../scenarios/lorenz_d01.toml");
pub const LORENZ_D001: &str = include_str!("../scenarios/lorenz_d001.toml");

/// Bundled scenario text by file name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".toml") {
        "lorenz_d01" => Some(LORENZ_D01),
        "lorenz_d001" => Some(LORENZ_D001),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub plant: PlantSpec,
    pub exosystem: ExoSpec,
    pub observer: ObserverSpec,
    pub law: LawSpec,
    pub internal_model: InternalModelSpec,
    pub trigger: TriggerSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSpec {
    Lorenz {
        #[serde(default = "benchmark_w")]
        w: [f64; 7],
    },
}

fn benchmark_w() -> [f64; 7] {
    LORENZ_BENCHMARK_W
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExoSpec {
    /// `v̇₁ = ωv₂, v̇₂ = −ωv₁`, `y₀ = v₁`.
    Harmonic {
        #[serde(default = "one")]
        omega: f64,
    },
    /// `v̇ = Sv`, `y₀ = c·v`.
    Linear { s: Vec<Vec<f64>>, c: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    /// A catalog name, currently only `"lorenz"`.
    Named(String),
    /// Ascending coefficients of each `ρᵢ`.
    Coeffs(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub rho: RhoSpec,
    #[serde(default)]
    pub first_stage: FirstStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalModelSpec {
    pub varrho: Vec<f64>,
    #[serde(default)]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub n: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PiSpec {
    /// `"lorenz"`: the output-injection penalty built from Ψ and λ.
    Named(String),
    Quadratic { eta_weight: f64, e_weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub sigma: f64,
    pub delta: f64,
    #[serde(default = "lorenz_pi_spec")]
    pub pi: PiSpec,
}

fn lorenz_pi_spec() -> PiSpec {
    PiSpec::Named("lorenz".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub t_end: f64,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub event_tol: Option<f64>,
    #[serde(default)]
    pub max_triggers: Option<usize>,
    #[serde(default)]
    pub min_dwell_guard: Option<f64>,
    #[serde(default)]
    pub report_stride: Option<usize>,
    #[serde(default)]
    pub tail_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi_hat: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default = "trace_name")]
    pub trace: String,
    #[serde(default = "triggers_name")]
    pub triggers: String,
    #[serde(default = "metrics_name")]
    pub metrics: String,
}

fn trace_name() -> String {
    "trace.csv".into()
}
fn triggers_name() -> String {
    "triggers.csv".into()
}
fn metrics_name() -> String {
    "metrics.json".into()
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        let mut s = self.clone();
        s.trigger.delta = delta;
        s
    }

    pub fn with_step(&self, h: f64) -> Self {
        let mut s = self.clone();
        s.sim.h = Some(h);
        s
    }

    pub fn build(&self) -> Result<Components> {
        let plant: Box<dyn OutputFeedbackPlant> = match &self.plant {
            PlantSpec::Lorenz { w } => Box::new(lorenz_plant(&LorenzParams::new(*w))?),
        };
        let w = match &self.plant {
            PlantSpec::Lorenz { w } => w.to_vec(),
        };
        let r = plant.relative_degree();
        let exo = build_exosystem(&self.exosystem)?;
        exo.validate(std::slice::from_ref(&w))?;

        let gains = build_observer(self.observer.lambda.clone())?;
        if gains.order() != r {
            return Err(Error::Validation(format!(
                "observer has {} gains but the plant has relative degree {r}",
                gains.order()
            )));
        }
        let law = build_law(&self.law, self.trigger.sigma)?;
        if law.order() != r {
            return Err(Error::Validation(format!(
                "law has {} rho gains but the plant has relative degree {r}",
                law.order()
            )));
        }
        let im = build_internal_model(&self.internal_model)?;
        let pi = match &self.trigger.pi {
            PiSpec::Named(name) if name == "lorenz" => PiRule::OutputInjection {
                psi: im.psi().to_vec(),
                lambda: gains.lambda().to_vec(),
            },
            PiSpec::Named(name) => return Err(Error::Validation(format!("unknown pi rule '{name}'"))),
            PiSpec::Quadratic { eta_weight, e_weight } => PiRule::Quadratic {
                eta_weight: *eta_weight,
                e_weight: *e_weight,
            },
        };
        let policy = TriggerPolicy::for_law(&law, self.trigger.delta, pi)?;
        policy.validate(im.order())?;

        let s = im.order();
        let init = match &self.init {
            Some(i) => InitialConditions {
                v: i.v.clone(),
                z: i.z.clone(),
                x: i.x.clone(),
                eta: i.eta.clone(),
                xi_hat: i.xi_hat.clone(),
            },
            None => InitialConditions::zeros(exo.dim(), plant.zero_dynamics_dim(), r, s),
        };
        let mut cfg = SimConfig::new(self.sim.t_end, w, init);
        if let Some(h) = self.sim.h {
            cfg.h = h;
        }
        if let Some(t) = self.sim.event_tol {
            cfg.event_tol = t;
        }
        if let Some(m) = self.sim.max_triggers {
            cfg.max_triggers = m;
        }
        if let Some(g) = self.sim.min_dwell_guard {
            cfg.min_dwell_guard = g;
        }
        if let Some(st) = self.sim.report_stride {
            cfg.report_stride = st;
        }
        cfg.validate()?;
        let tail_window = self.sim.tail_window.unwrap_or(default_tail_window(cfg.t_end));
        if !(tail_window.0 < tail_window.1 && tail_window.0 >= 0.0 && tail_window.1 <= cfg.t_end) {
            return Err(Error::Validation(format!(
                "tail_window {tail_window:?} must satisfy 0 <= t_a < t_b <= t_end"
            )));
        }
        let comps = Components {
            plant,
            exo,
            gains,
            law,
            im,
            policy,
            cfg,
            tail_window,
        };
        crate::hybridsim::check_dimensions(&comps.closed_loop(), &comps.cfg)?;
        Ok(comps)
    }

    /// Step-by-step design checks. Stops at the first failing check.
    pub fn verify(&self) -> VerifyReport {
        let mut rep = VerifyReport::default();
        let _ = self.verify_into(&mut rep);
        rep
    }

    fn verify_into(&self, rep: &mut VerifyReport) -> std::result::Result<(), ()> {
        let PlantSpec::Lorenz { w: w_arr } = &self.plant;
        let w = w_arr.to_vec();
        let plant = rep.step("plant", lorenz_plant(&LorenzParams::new(*w_arr)), |_| {
            "parameters valid".to_string()
        })?;
        rep.step("exosystem", build_exosystem(&self.exosystem).and_then(|e| e.validate(std::slice::from_ref(&w))), |_| {
            "S and -S not Hurwitz, q(0, w) = 0".to_string()
        })?;

        let g = rep.step("generator", SteadyStateGenerator::new(self.internal_model.varrho.clone()), |g| {
            let (phi, _) = exogen::companion_from_generator(g);
            format!("char poly of Phi = {:?}", matlib::char_poly(&phi))
        })?;
        let (m, n) = rep.step("internal model pair", im_pair(&self.internal_model, g.order()), |_| {
            "dimensions consistent".to_string()
        })?;
        rep.step(
            "M Hurwitz",
            match matlib::hurwitz_verdict(&m) {
                Ok(matlib::HurwitzVerdict::Hurwitz) => Ok(()),
                Ok(v) => Err(Error::NotHurwitz(format!("M ({v})"))),
                Err(e) => Err(e),
            },
            |_| "Hurwitz".to_string(),
        )?;
        let rank = controllability_rank(&m, &n).unwrap_or(0);
        rep.step(
            "controllability",
            if rank == m.rows() {
                Ok(rank)
            } else {
                Err(Error::NotControllable { rank, order: m.rows() })
            },
            |r| format!("rank {r} of {}", m.rows()),
        )?;
        let im = rep.step("Psi", synthesize(&g, m, n), |im| format_rounded(im.psi()))?;
        let res = im.sylvester_residual();
        rep.step(
            "Sylvester residual",
            if res <= 1e-10 {
                Ok(res)
            } else {
                Err(Error::Validation(format!("Sylvester residual {res:e} exceeds 1e-10")))
            },
            |r| format!("{r:e}"),
        )?;

        rep.step("A_o Hurwitz", build_observer(self.observer.lambda.clone()), |o| {
            format!("lambda = {:?}", o.lambda())
        })?;
        let law = rep.step("rho positivity", build_law(&self.law, self.trigger.sigma), |l| {
            let mins: Vec<f64> = (0..l.order()).map(|i| l.rho(i).min_on_grid()).collect();
            format!("grid minima {mins:?}")
        })?;

        let b = plant.input_gain(&w);
        let chain = rep.step("coordinate chain", coord_chain(b, &im, law.order()), |c| {
            format!("d = {:?}", c.d)
        })?;
        let mut worst = 0.0f64;
        for i in 1..chain.c.len() {
            let mc = im.m().mul_vec(&chain.c[i]).map_err(|_| ())?;
            for (a, e) in chain.c[i - 1].iter().zip(&mc) {
                worst = worst.max((a - e).abs());
            }
        }
        for i in 0..chain.d.len() {
            let d = b * im.output(&chain.c[chain.c.len() - 1 - i]);
            worst = worst.max((d - chain.d[i]).abs());
        }
        rep.step(
            "chain identities",
            if worst <= 1e-13 {
                Ok(worst)
            } else {
                Err(Error::Validation(format!("chain identity defect {worst:e}")))
            },
            |d| format!("max defect {d:e}"),
        )?;
        Ok(())
    }
}

fn build_exosystem(spec: &ExoSpec) -> Result<Exosystem> {
    match spec {
        ExoSpec::Harmonic { omega } => {
            let s = Matrix::from_rows(&[[0.0, *omega], [-omega, 0.0]])?;
            Exosystem::linear(s, vec![1.0, 0.0])
        }
        ExoSpec::Linear { s, c } => Exosystem::linear(matrix_from(s, "exosystem.s")?, c.clone()),
    }
}

fn build_law(spec: &LawSpec, sigma: f64) -> Result<BackstepLaw> {
    let rho = match &spec.rho {
        RhoSpec::Named(name) if name == "lorenz" => vec![lorenz_rho1(), lorenz_rho2()],
        RhoSpec::Named(name) => return Err(Error::Validation(format!("unknown rho catalog entry '{name}'"))),
        RhoSpec::Coeffs(list) => list.iter().cloned().map(PolyGain::new).collect::<Result<_>>()?,
    };
    Ok(BackstepLaw::new(rho, sigma)?.with_first_stage(spec.first_stage))
}

fn im_pair(spec: &InternalModelSpec, s: usize) -> Result<(Matrix, Vec<f64>)> {
    match (&spec.m, &spec.n) {
        (None, None) => Ok(exogen::default_pair(s)),
        (Some(m), Some(n)) => {
            let m = matrix_from(m, "internal_model.m")?;
            if m.rows() != s || !m.is_square() || n.len() != s {
                return Err(Error::Validation(format!(
                    "internal_model.m must be {s}x{s} and internal_model.n of length {s}"
                )));
            }
            Ok((m, n.clone()))
        }
        _ => Err(Error::Validation(
            "internal_model.m and internal_model.n must be given together".into(),
        )),
    }
}

fn build_internal_model(spec: &InternalModelSpec) -> Result<InternalModel> {
    let g = SteadyStateGenerator::new(spec.varrho.clone())?;
    let (m, n) = im_pair(spec, g.order())?;
    synthesize(&g, m, n)
}

/// `[a, b, …]` with entries rounded to 10 decimals.
fn format_rounded(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| ((x * 1e10).round() / 1e10 + 0.0).to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn matrix_from(rows: &[Vec<f64>], field: &str) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(|e| Error::Validation(format!("{field}: {e}")))
}

/// Owned run components assembled from a scenario.
pub struct Components {
    pub plant: Box<dyn OutputFeedbackPlant>,
    pub exo: Exosystem,
    pub gains: ObserverGains,
    pub law: BackstepLaw,
    pub im: InternalModel,
    pub policy: TriggerPolicy,
    pub cfg: SimConfig,
    pub tail_window: (f64, f64),
}

impl Components {
    pub fn closed_loop(&self) -> ClosedLoop<'_> {
        ClosedLoop {
            plant: self.plant.as_ref(),
            exo: &self.exo,
            gains: &self.gains,
            law: &self.law,
            im: &self.im,
            policy: &self.policy,
        }
    }

    pub fn simulate(&self) -> Result<SimResult> {
        simulate(self.closed_loop(), &self.cfg)
    }

    /// Simulates and computes metrics over the configured tail window.
    pub fn run(&self) -> Result<(SimResult, Metrics)> {
        let res = self.simulate()?;
        let m = compute_metrics(&res, self.tail_window)?;
        Ok((res, m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn step<T>(
        &mut self,
        name: &str,
        r: Result<T>,
        detail: impl FnOnce(&T) -> String,
    ) -> std::result::Result<T, ()> {
        match r {
            Ok(v) => {
                self.checks.push(Check {
                    name: name.into(),
                    passed: true,
                    detail: detail(&v),
                });
                Ok(v)
            }
            Err(e) => {
                self.checks.push(Check {
                    name: name.into(),
                    passed: false,
                    detail: e.to_string(),
                });
                Err(())
            }
        }
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<5} {:<20} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_build() {
        for (text, delta) in [(LORENZ_D01, 0.1), (LORENZ_D001, 0.01)] {
            let sc = Scenario::from_toml_str(text).unwrap();
            assert_eq!(sc.trigger.delta, delta);
            let c = sc.build().unwrap();
            assert_eq!(c.cfg.h, 1e-4);
            assert_eq!(c.cfg.t_end, 30.0);
            assert_eq!(c.tail_window, (25.0, 30.0));
            assert_eq!(c.cfg.init.v, vec![-0.34, -0.94]);
        }
        assert!(bundled("lorenz_d01.toml").is_some());
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn verify_lorenz() {
        let rep = Scenario::from_toml_str(LORENZ_D01).unwrap().verify();
        assert!(rep.all_passed(), "{rep}");
        assert_eq!(rep.check("Psi").unwrap().detail, "[-5, 12, 3, 6]");
    }

    #[test]
    fn parse_error_names_line() {
        let bad = LORENZ_D01.replace("sigma = 0.4", "sigma = \"x\"");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        let Error::Parse(msg) = err else { panic!() };
        assert!(msg.contains("line"), "{msg}");
        assert!(msg.contains("sigma"), "{msg}");
        let unknown = format!("{LORENZ_D01}\n[extra]\nx = 1\n");
        assert!(matches!(Scenario::from_toml_str(&unknown), Err(Error::Parse(_))));
    }

    #[test]
    fn validation_errors() {
        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.sim.event_tol = Some(1e-3);
        let Err(Error::Validation(msg)) = sc.build() else { panic!() };
        assert!(msg.contains("event_tol < h"));

        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.init.as_mut().unwrap().eta = vec![0.0; 3];
        assert!(matches!(sc.build(), Err(Error::DimensionMismatch { .. })));

        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.law.rho = RhoSpec::Named("other".into());
        assert!(matches!(sc.build(), Err(Error::Validation(_))));

        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.internal_model.n = None;
        assert!(matches!(sc.build(), Err(Error::Validation(_))));
    }

    #[test]
    fn verify_failures() {
        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.observer.lambda = vec![0.0, 0.0];
        let rep = sc.verify();
        let f = rep.first_failure().unwrap();
        assert_eq!(f.name, "A_o Hurwitz");
        assert!(f.detail.contains("A_o"));

        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.internal_model.n = Some(vec![0.0; 4]);
        let rep = sc.verify();
        let f = rep.first_failure().unwrap();
        assert_eq!(f.name, "controllability");
        assert!(f.detail.contains("rank 0"), "{}", f.detail);
    }

    #[test]
    fn default_pair_when_omitted() {
        let mut sc = Scenario::from_toml_str(LORENZ_D01).unwrap();
        sc.internal_model.m = None;
        sc.internal_model.n = None;
        let c = sc.build().unwrap();
        assert_eq!(c.im.m().row_slice(3), &[-24.0, -50.0, -35.0, -10.0]);
    }

    #[test]
    fn toml_roundtrip() {
        let sc = Scenario::from_toml_str(LORENZ_D001).unwrap();
        let back = Scenario::from_toml_str(&sc.to_toml_string()).unwrap();
        assert_eq!(sc, back);
    }
}
