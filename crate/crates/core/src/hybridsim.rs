//! Hybrid closed-loop execution: fixed-step RK4 between events, bisection
//! localization of trigger crossings, sample latching and Zeno guarding.
//!
//! The stacked continuous state is `(v, z, x, η, ξ̂)`; the latched sample
//! `(e(t_k), η(t_k), ξ̂(t_k), u_k)` is frozen between events. After every
//! accepted RK4 node the trigger function is evaluated against the *old*
//! latch; a sign change to `g ≥ 0` is bisected inside that step, the state
//! is advanced to the crossing and a new sample is taken.

use std::ops::Range;

use crate::error::{ensure_len, Error, Result};
use crate::exogen::{Exosystem, InternalModel};
use crate::plant::{plant_rates_into, OutputFeedbackPlant};
use crate::regulation::{
    checked_last, controller_rates_into, BackstepLaw, ControllerState, Latched, ObserverGains,
};
use crate::trigger::{deviations, fires, trigger_value, TriggerPolicy};

/// Borrowed view of every component of the closed loop.
#[derive(Clone, Copy)]
pub struct ClosedLoop<'a> {
    pub plant: &'a dyn OutputFeedbackPlant,
    pub exo: &'a Exosystem,
    pub gains: &'a ObserverGains,
    pub law: &'a BackstepLaw,
    pub im: &'a InternalModel,
    pub policy: &'a TriggerPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi_hat: Vec<f64>,
}

impl InitialConditions {
    /// Everything at the origin.
    pub fn zeros(n_v: usize, n_z: usize, r: usize, s: usize) -> Self {
        Self {
            v: vec![0.0; n_v],
            z: vec![0.0; n_z],
            x: vec![0.0; r],
            eta: vec![0.0; s],
            xi_hat: vec![0.0; r],
        }
    }
}

pub const DEFAULT_STEP: f64 = 1e-4;
pub const DEFAULT_EVENT_TOL: f64 = 1e-9;
pub const DEFAULT_MIN_DWELL_GUARD: f64 = 1e-7;
pub const DEFAULT_MAX_TRIGGERS: usize = 1_000_000;
pub const DEFAULT_REPORT_STRIDE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub h: f64,
    pub event_tol: f64,
    pub max_triggers: usize,
    pub min_dwell_guard: f64,
    /// Trace rows are emitted every `report_stride` grid nodes.
    pub report_stride: usize,
    pub w: Vec<f64>,
    pub init: InitialConditions,
}

impl SimConfig {
    pub fn new(t_end: f64, w: Vec<f64>, init: InitialConditions) -> Self {
        Self {
            t_end,
            h: DEFAULT_STEP,
            event_tol: DEFAULT_EVENT_TOL,
            max_triggers: DEFAULT_MAX_TRIGGERS,
            min_dwell_guard: DEFAULT_MIN_DWELL_GUARD,
            report_stride: DEFAULT_REPORT_STRIDE,
            w,
            init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.event_tol > 0.0 && self.event_tol < self.h && self.h < self.t_end;
        if !ok || !self.t_end.is_finite() {
            return Err(Error::Validation(format!(
                "require 0 < event_tol < h < t_end (event_tol = {}, h = {}, t_end = {})",
                self.event_tol, self.h, self.t_end
            )));
        }
        if self.max_triggers < 1 {
            return Err(Error::Validation("require max_triggers >= 1".into()));
        }
        if self.report_stride < 1 {
            return Err(Error::Validation("require report_stride >= 1".into()));
        }
        if !(self.min_dwell_guard >= 0.0) {
            return Err(Error::Validation("require min_dwell_guard >= 0".into()));
        }
        Ok(())
    }

    /// Number of integration nodes after `t = 0`.
    pub fn steps(&self) -> usize {
        let n = (self.t_end / self.h).round() as usize;
        if (n as f64) * self.h < self.t_end * (1.0 - 1e-12) {
            n + 1
        } else {
            n.max(1)
        }
    }
}

/// Full hybrid state. The regulated error `e = x₁ − q(v, w)` is derived, not
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub t: f64,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub latched: Latched,
}

impl ClosedLoopState {
    pub fn error(&self, exo: &Exosystem, w: &[f64]) -> f64 {
        self.x[0] - exo.output(&self.v, w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub e: f64,
    pub y: f64,
    pub y0: f64,
    pub u: f64,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi_hat: Vec<f64>,
    /// Trigger function against the active latch.
    pub trigger_value: f64,
}

/// One triggering instant `t_k`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerRecord {
    pub k: usize,
    pub t_k: f64,
    /// `t_k − t_{k−1}`.
    pub dwell: f64,
    /// Trigger value at the localized instant, against the previous latch.
    pub g_pre: f64,
    /// Trigger value at the left end of the final bisection bracket.
    pub g_lo: f64,
    /// Width of the final bisection bracket.
    pub bracket: f64,
    /// Trigger value right after re-latching.
    pub g_post: f64,
    /// `ξ̌_r(t_k)`.
    pub xi_check_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimStatus {
    Completed,
    ZenoGuard,
    MaxTriggers,
}

impl std::fmt::Display for SimStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimStatus::Completed => "Completed",
            SimStatus::ZenoGuard => "ZenoGuard",
            SimStatus::MaxTriggers => "MaxTriggers",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub trace: Vec<TraceRow>,
    pub trigger_log: Vec<TriggerRecord>,
    pub status: SimStatus,
    pub final_state: ClosedLoopState,
    /// Largest trigger value seen at an accepted node that did not fire.
    pub max_quiet_value: f64,
    pub t_end: f64,
}

impl SimResult {
    pub fn trigger_count(&self) -> usize {
        self.trigger_log.len()
    }
}

/// Final bisection bracket around a trigger crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventBracket {
    pub t_lo: f64,
    pub g_lo: f64,
    pub t_hi: f64,
    pub g_hi: f64,
}

impl EventBracket {
    /// First time with `g ≥ 0`, to tolerance.
    pub fn time(&self) -> f64 {
        self.t_hi
    }
}

/// Bisects `[lo, hi]` (with `g(lo) < 0 ≤ g(hi)`) until the bracket is no
/// wider than `event_tol`.
pub fn locate_event(
    lo: (f64, f64),
    hi: (f64, f64),
    mut evaluator: impl FnMut(f64) -> f64,
    event_tol: f64,
) -> Result<EventBracket> {
    let (mut t_lo, mut g_lo) = lo;
    let (mut t_hi, mut g_hi) = hi;
    if !(t_lo < t_hi) || fires(g_lo) || !fires(g_hi) || !(event_tol > 0.0) {
        return Err(Error::BracketInvalid {
            t_lo,
            g_lo,
            t_hi,
            g_hi,
        });
    }
    while t_hi - t_lo > event_tol {
        let mid = 0.5 * (t_lo + t_hi);
        if mid <= t_lo || mid >= t_hi {
            break;
        }
        let g = evaluator(mid);
        if fires(g) {
            t_hi = mid;
            g_hi = g;
        } else {
            t_lo = mid;
            g_lo = g;
        }
    }
    Ok(EventBracket {
        t_lo,
        g_lo,
        t_hi,
        g_hi,
    })
}

struct Layout {
    v: Range<usize>,
    z: Range<usize>,
    x: Range<usize>,
    eta: Range<usize>,
    xi: Range<usize>,
}

impl Layout {
    fn new(n_v: usize, n_z: usize, r: usize, s: usize) -> Self {
        let v = 0..n_v;
        let z = v.end..v.end + n_z;
        let x = z.end..z.end + r;
        let eta = x.end..x.end + s;
        let xi = eta.end..eta.end + r;
        Self { v, z, x, eta, xi }
    }

    fn len(&self) -> usize {
        self.xi.end
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: &impl Fn(&[f64], &mut [f64]), y: &[f64], h: f64, out: &mut [f64]) {
        f(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            out[i] = y[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

struct Engine<'a> {
    cl: ClosedLoop<'a>,
    w: &'a [f64],
    lay: Layout,
}

impl Engine<'_> {
    fn rates(&self, s: &[f64], latched: &Latched, out: &mut [f64]) {
        let lay = &self.lay;
        let (out_v, rest) = out.split_at_mut(lay.z.start);
        let (out_z, rest) = rest.split_at_mut(lay.x.start - lay.z.start);
        let (out_x, rest) = rest.split_at_mut(lay.eta.start - lay.x.start);
        let (out_eta, out_xi) = rest.split_at_mut(lay.xi.start - lay.eta.start);
        let v = &s[lay.v.clone()];
        self.cl.exo.rates_into(v, out_v);
        plant_rates_into(
            self.cl.plant,
            &s[lay.z.clone()],
            &s[lay.x.clone()],
            latched.u_k,
            v,
            self.w,
            out_z,
            out_x,
        );
        controller_rates_into(
            &s[lay.eta.clone()],
            &s[lay.xi.clone()],
            latched,
            self.cl.gains,
            self.cl.im,
            latched.u_k,
            out_eta,
            out_xi,
        );
    }

    fn error(&self, s: &[f64]) -> f64 {
        s[self.lay.x.start] - self.cl.exo.output(&s[self.lay.v.clone()], self.w)
    }

    fn trigger(&self, s: &[f64], latched: &Latched) -> f64 {
        let e = self.error(s);
        let eta = &s[self.lay.eta.clone()];
        let xi = &s[self.lay.xi.clone()];
        let dev = deviations(e, eta, xi, latched, self.cl.law);
        trigger_value(&dev, checked_last(e, xi, self.cl.law), self.cl.policy)
    }

    fn latch(&self, s: &[f64], t: f64, k: usize) -> Latched {
        let cs = ControllerState {
            eta: s[self.lay.eta.clone()].to_vec(),
            xi_hat: s[self.lay.xi.clone()].to_vec(),
        };
        Latched::capture(t, k, self.error(s), &cs, self.cl.law, self.cl.im)
    }

    fn row(&self, s: &[f64], t: f64, latched: &Latched) -> TraceRow {
        let lay = &self.lay;
        let y = s[lay.x.start];
        let y0 = self.cl.exo.output(&s[lay.v.clone()], self.w);
        TraceRow {
            t,
            e: y - y0,
            y,
            y0,
            u: latched.u_k,
            v: s[lay.v.clone()].to_vec(),
            z: s[lay.z.clone()].to_vec(),
            x: s[lay.x.clone()].to_vec(),
            eta: s[lay.eta.clone()].to_vec(),
            xi_hat: s[lay.xi.clone()].to_vec(),
            trigger_value: self.trigger(s, latched),
        }
    }

    fn snapshot(&self, s: &[f64], t: f64, latched: Latched) -> ClosedLoopState {
        let lay = &self.lay;
        ClosedLoopState {
            t,
            v: s[lay.v.clone()].to_vec(),
            z: s[lay.z.clone()].to_vec(),
            x: s[lay.x.clone()].to_vec(),
            eta: s[lay.eta.clone()].to_vec(),
            xi_hat: s[lay.xi.clone()].to_vec(),
            latched,
        }
    }
}

pub(crate) fn check_dimensions(cl: &ClosedLoop<'_>, cfg: &SimConfig) -> Result<()> {
    let r = cl.plant.relative_degree();
    let s = cl.im.order();
    ensure_len("observer order vs relative degree", r, cl.gains.order())?;
    ensure_len("backstepping gains vs relative degree", r, cl.law.order())?;
    ensure_len("initial v", cl.exo.dim(), cfg.init.v.len())?;
    ensure_len("initial z", cl.plant.zero_dynamics_dim(), cfg.init.z.len())?;
    ensure_len("initial x", r, cfg.init.x.len())?;
    ensure_len("initial eta", s, cfg.init.eta.len())?;
    ensure_len("initial xi_hat", r, cfg.init.xi_hat.len())?;
    let init = &cfg.init;
    let all = init.v.iter().chain(&init.z).chain(&init.x).chain(&init.eta).chain(&init.xi_hat);
    if all.into_iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("initial conditions must be finite".into()));
    }
    cl.policy.validate(s)
}

/// Runs the closed loop from `t₀ = 0` (itself a latch instant) to `t_end`.
///
/// Guard trips end the run early with the matching [`SimStatus`]; the
/// partial trajectory is returned. Integration blow-up is an error.
pub fn simulate(cl: ClosedLoop<'_>, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    check_dimensions(&cl, cfg)?;
    let r = cl.plant.relative_degree();
    let eng = Engine {
        cl,
        w: &cfg.w,
        lay: Layout::new(cl.exo.dim(), cl.plant.zero_dynamics_dim(), r, cl.im.order()),
    };
    let n = eng.lay.len();
    let mut state: Vec<f64> = [&cfg.init.v, &cfg.init.z, &cfg.init.x, &cfg.init.eta, &cfg.init.xi_hat]
        .into_iter()
        .flatten()
        .copied()
        .collect();
    let mut next = vec![0.0; n];
    let mut probe = vec![0.0; n];
    let mut rk = Rk4::new(n);

    let mut latched = eng.latch(&state, 0.0, 0);
    let mut g_cur = eng.trigger(&state, &latched);
    let mut trace = vec![eng.row(&state, 0.0, &latched)];
    let mut log: Vec<TriggerRecord> = Vec::new();
    let mut status = SimStatus::Completed;
    let mut max_quiet = f64::NEG_INFINITY;

    let steps = cfg.steps();
    let mut node = 0usize;
    let mut t = 0.0;
    'run: while node < steps {
        let target = if node + 1 == steps {
            cfg.t_end
        } else {
            (node + 1) as f64 * cfg.h
        };
        let dt = target - t;
        {
            let f = |y: &[f64], out: &mut [f64]| eng.rates(y, &latched, out);
            rk.step(&f, &state, dt, &mut next);
        }
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { t: target });
        }
        let g_next = eng.trigger(&next, &latched);
        if !g_next.is_finite() {
            return Err(Error::NonFiniteState { t: target });
        }

        if fires(g_next) && dt > 0.0 {
            let bracket = {
                let eval = |tau: f64| {
                    let f = |y: &[f64], out: &mut [f64]| eng.rates(y, &latched, out);
                    rk.step(&f, &state, tau, &mut probe);
                    eng.trigger(&probe, &latched)
                };
                locate_event((0.0, g_cur), (dt, g_next), eval, cfg.event_tol)?
            };
            let tau = bracket.time();
            if tau >= dt {
                std::mem::swap(&mut state, &mut next);
                t = target;
            } else {
                let f = |y: &[f64], out: &mut [f64]| eng.rates(y, &latched, out);
                rk.step(&f, &state, tau, &mut next);
                std::mem::swap(&mut state, &mut next);
                t += tau;
            }
            let dwell = t - latched.t_k;
            let k = log.len() + 1;
            if k > cfg.max_triggers {
                status = SimStatus::MaxTriggers;
                break 'run;
            }
            let g_pre = eng.trigger(&state, &latched);
            latched = eng.latch(&state, t, k);
            let g_post = eng.trigger(&state, &latched);
            log.push(TriggerRecord {
                k,
                t_k: t,
                dwell,
                g_pre,
                g_lo: bracket.g_lo,
                bracket: bracket.t_hi - bracket.t_lo,
                g_post,
                xi_check_r: latched.xi_check_last(cl.law),
            });
            g_cur = g_post;
            if dwell < cfg.min_dwell_guard {
                status = SimStatus::ZenoGuard;
                break 'run;
            }
            if t < target {
                continue;
            }
        } else {
            std::mem::swap(&mut state, &mut next);
            t = target;
            g_cur = g_next;
            max_quiet = max_quiet.max(g_next);
        }
        node += 1;
        if node % cfg.report_stride == 0 || node == steps {
            trace.push(eng.row(&state, t, &latched));
        }
    }

    if trace.last().map(|row| row.t) != Some(t) {
        trace.push(eng.row(&state, t, &latched));
    }
    Ok(SimResult {
        trace,
        trigger_log: log,
        status,
        final_state: eng.snapshot(&state, t, latched),
        max_quiet_value: max_quiet,
        t_end: cfg.t_end,
    })
}
