//! Single-path building blocks: state stepping under a feedback control,
//! hedging strategies, the P&L process, utilities and the penalty.
//!
//! Normal draws are supplied by the caller so this module stays free of any
//! random number generator.

use alloc::vec::Vec;

use crate::analytics::ValueSurface;
use crate::controls::{ControlBox, ControlVector, FeedbackControl, VolBand};
use crate::problem::{Problem, Snapshot};
use crate::vgvv::{check_vega, PenaltyWeights};
use crate::{Error, MarketState, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UtilityKind {
    /// `U(y) = −exp(−a y) / a`.
    Exponential,
    /// `U(y) = ((y + shift)^{1−a} − 1)/(1 − a)`, logarithmic at `a = 1`;
    /// defined for `y > −shift`.
    ShiftedPower { shift: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Utility {
    pub kind: UtilityKind,
    pub a: f64,
}

impl Default for Utility {
    fn default() -> Self {
        Self {
            kind: UtilityKind::Exponential,
            a: 1.0,
        }
    }
}

impl Utility {
    pub fn exponential(a: f64) -> Self {
        Self {
            kind: UtilityKind::Exponential,
            a,
        }
    }

    pub fn shifted_power(a: f64, shift: f64) -> Self {
        Self {
            kind: UtilityKind::ShiftedPower { shift },
            a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::domain("risk aversion a", self.a));
        }
        if let UtilityKind::ShiftedPower { shift } = self.kind {
            if !(shift > 0.0 && shift.is_finite()) {
                return Err(Error::domain("utility shift", shift));
            }
        }
        Ok(())
    }

    fn base(&self, y: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential => y,
            UtilityKind::ShiftedPower { shift } => y + shift,
        }
    }

    pub fn u(&self, y: f64) -> f64 {
        let a = self.a;
        match self.kind {
            UtilityKind::Exponential => -libm::exp(-a * y) / a,
            UtilityKind::ShiftedPower { .. } => {
                let x = self.base(y);
                if a == 1.0 {
                    libm::log(x)
                } else {
                    (libm::pow(x, 1.0 - a) - 1.0) / (1.0 - a)
                }
            }
        }
    }

    pub fn du(&self, y: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential => libm::exp(-self.a * y),
            UtilityKind::ShiftedPower { .. } => libm::pow(self.base(y), -self.a),
        }
    }

    pub fn d2u(&self, y: f64) -> f64 {
        match self.kind {
            UtilityKind::Exponential => -self.a * libm::exp(-self.a * y),
            UtilityKind::ShiftedPower { .. } => -self.a * libm::pow(self.base(y), -self.a - 1.0),
        }
    }

    pub fn d3u(&self, y: f64) -> f64 {
        let a = self.a;
        match self.kind {
            UtilityKind::Exponential => a * a * libm::exp(-a * y),
            UtilityKind::ShiftedPower { .. } => a * (a + 1.0) * libm::pow(self.base(y), -a - 2.0),
        }
    }

    /// `−U″/U′`.
    pub fn risk_aversion(&self, y: f64) -> f64 {
        -self.d2u(y) / self.du(y)
    }
}

/// `f = ½(ζ − ζ⁰(Σ))ᵀΨ⁻¹(ζ − ζ⁰(Σ))`.
pub fn penalty(sigma: f64, z: &ControlVector, weights: &PenaltyWeights) -> f64 {
    let d = z.deviation(sigma);
    let w = weights.as_array();
    0.5 * (0..4).map(|i| d[i] * d[i] / w[i]).sum::<f64>()
}

/// Units of stock (`theta`) and of the traded call (`phi`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HedgePosition {
    pub theta: f64,
    pub phi: f64,
}

/// `φ* = 𝒱_Σ/𝒞_Σ`, `θ* = Δ − φ*𝒞_S`.
pub fn delta_vega_hedge(snap: &Snapshot) -> Result<HedgePosition> {
    check_vega(snap.call.d_sigma, snap.state.s)?;
    let phi = snap.target.greeks.d_sigma / snap.call.d_sigma;
    Ok(HedgePosition {
        theta: snap.eff.delta - phi * snap.call.d_s,
        phi,
    })
}

pub fn delta_hedge(snap: &Snapshot) -> HedgePosition {
    HedgePosition {
        theta: snap.eff.delta,
        phi: 0.0,
    }
}

/// A predictable trading rule.
pub trait HedgeRule {
    fn position(&self, snap: &Snapshot) -> Result<HedgePosition>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    DeltaVega,
    DeltaOnly,
    Unhedged,
}

impl HedgeRule for Strategy {
    fn position(&self, snap: &Snapshot) -> Result<HedgePosition> {
        match self {
            Strategy::DeltaVega => delta_vega_hedge(snap),
            Strategy::DeltaOnly => Ok(delta_hedge(snap)),
            Strategy::Unhedged => Ok(HedgePosition::default()),
        }
    }
}

/// Initial state and admissible region of a simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Market {
    pub s0: f64,
    pub sigma0: f64,
    pub a0: f64,
    pub band: VolBand,
    pub bounds: ControlBox,
}

impl Market {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::domain("S₀", self.s0));
        }
        self.band.check_initial(self.sigma0)?;
        self.bounds.check_band(&self.band)
    }

    pub fn initial_state(&self) -> MarketState {
        MarketState::new(0.0, self.s0, self.sigma0).with_aux(self.a0, self.s0)
    }
}

/// One Euler–Maruyama step of `(ln S, Σ)` with `A` and `M` updated alongside.
pub fn advance<V: ValueSurface>(
    target: &V,
    st: &MarketState,
    z: &ControlVector,
    band: &VolBand,
    dt: f64,
    w0: f64,
    w1: f64,
) -> MarketState {
    let rdt = libm::sqrt(dt);
    let s = st.s * libm::exp(-0.5 * z.sigma * z.sigma * dt + z.sigma * rdt * w0);
    let sigma = band.clamp(st.sigma + z.nu * dt + z.eta * rdt * w0 + libm::sqrt(z.xi.max(0.0)) * rdt * w1);
    let m = st.m.max(s);
    let c = target.coefficients(st);
    let a = st.a + (c.alpha + 0.5 * c.beta * z.sigma * z.sigma) * dt + c.gamma * (s - st.s) + c.delta * (m - st.m);
    MarketState {
        t: st.t + dt,
        s,
        a,
        m,
        sigma,
    }
}

/// A stored path on a uniform time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Path {
    pub id: u64,
    pub states: Vec<MarketState>,
    /// Control applied on `[t_k, t_{k+1})`.
    pub controls: Vec<ControlVector>,
}

impl Path {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

fn grid_time(horizon: f64, k: usize, steps: usize) -> f64 {
    horizon * k as f64 / steps as f64
}

/// Simulates one path. `normals` yields the pair `(ΔW⁰, ΔW¹)/√Δt`.
pub fn simulate_path<V, C, F>(
    problem: &Problem<V>,
    control: &C,
    market: &Market,
    steps: usize,
    path_id: u64,
    mut normals: F,
) -> Result<Path>
where
    V: ValueSurface,
    C: FeedbackControl,
    F: FnMut() -> (f64, f64),
{
    if steps == 0 {
        return Err(Error::domain("steps", 0.0));
    }
    let horizon = problem.horizon();
    let dt = horizon / steps as f64;
    let mut st = market.initial_state();
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    for k in 0..steps {
        st.t = grid_time(horizon, k, steps);
        states.push(st);
        let z = if control.is_reference() {
            crate::controls::reference_control(st.sigma)
        } else {
            let snap = problem.snapshot(&st).map_err(|e| e.at_path(path_id, k))?;
            control
                .control(&snap, &market.band)
                .map_err(|e| e.at_path(path_id, k))?
        };
        market.bounds.check(&z).map_err(|e| e.at_path(path_id, k))?;
        controls.push(z);
        let (w0, w1) = normals();
        st = advance(&problem.target, &st, &z, &market.band, dt, w0, w1);
    }
    st.t = horizon;
    states.push(st);
    Ok(Path {
        id: path_id,
        states,
        controls,
    })
}

/// P&L along a path: `Y = Y₀ + V₀ + ∫θ dS + ∫φ d𝒞 − V_t`, positions taken at
/// the left end of each step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PnlPath {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub positions: Vec<HedgePosition>,
    /// Target value `V_t` (payoff at the horizon).
    pub target_value: Vec<f64>,
    /// Traded call value `𝒞_t`.
    pub call_value: Vec<f64>,
    /// Penalty integrand `f(Σ_t, ζ_t)` per step.
    pub penalty: Vec<f64>,
    /// `b^𝒱(ζ_t)` per step.
    pub target_drift: Vec<f64>,
}

impl PnlPath {
    /// `(1/ψ) Σ U′(Y_k) f_k Δt`; zero at `ψ = 0`, where `f ≡ 0`.
    pub fn penalty_integral(&self, utility: &Utility, psi: f64) -> f64 {
        if psi == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 0..self.penalty.len() {
            let dt = self.times[k + 1] - self.times[k];
            acc += utility.du(self.y[k]) * self.penalty[k] * dt;
        }
        acc / psi
    }

    pub fn terminal(&self) -> f64 {
        *self.y.last().unwrap_or(&0.0)
    }
}

pub fn pnl<V: ValueSurface, H: HedgeRule>(strategy: &H, path: &Path, problem: &Problem<V>, y0: f64) -> Result<PnlPath> {
    let steps = path.steps();
    let n = steps + 1;
    let mut out = PnlPath {
        times: path.states.iter().map(|s| s.t).collect(),
        y: Vec::with_capacity(n),
        positions: Vec::with_capacity(steps),
        target_value: Vec::with_capacity(n),
        call_value: Vec::with_capacity(n),
        penalty: Vec::with_capacity(steps),
        target_drift: Vec::with_capacity(steps),
    };
    let mut y = y0;
    out.y.push(y);
    for k in 0..steps {
        let st = &path.states[k];
        let snap = problem.snapshot(st).map_err(|e| e.at_path(path.id, k))?;
        let pos = strategy.position(&snap).map_err(|e| e.at_path(path.id, k))?;
        let z = &path.controls[k];
        out.penalty.push(penalty(st.sigma, z, &problem.weights));
        out.target_drift.push(crate::controls::drift_bv(&snap, z));
        let next = &path.states[k + 1];
        let v_next = value_at(problem, next)?;
        let c_next = crate::analytics::closed_form_value(&problem.call, next.t, next.s, next.sigma)?;
        let v_now = snap.target.greeks.value;
        let c_now = snap.call.value;
        y += pos.theta * (next.s - st.s) + pos.phi * (c_next - c_now) - (v_next - v_now);
        out.positions.push(pos);
        out.target_value.push(v_now);
        out.call_value.push(c_now);
        out.y.push(y);
    }
    let last = &path.states[steps];
    out.target_value.push(value_at(problem, last)?);
    out.call_value.push(crate::analytics::closed_form_value(
        &problem.call,
        last.t,
        last.s,
        last.sigma,
    )?);
    Ok(out)
}

fn value_at<V: ValueSurface>(problem: &Problem<V>, st: &MarketState) -> Result<f64> {
    if st.t >= problem.horizon() {
        Ok(problem.target.payoff(st))
    } else {
        problem.target.partials(st).map(|p| p.greeks.value)
    }
}

/// Per-strategy result of [`run_path`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Outcome {
    pub y_terminal: f64,
    /// `Σ U′(Y_k) f_k Δt`, not yet divided by `ψ`.
    pub weighted_penalty: f64,
    /// `max_k |Y_k − Y₀|`.
    pub max_excursion: f64,
}

impl Outcome {
    /// One sample of `U(Y_T) + (1/ψ)∫U′(Y_t) f dt`.
    pub fn objective(&self, utility: &Utility, psi: f64) -> f64 {
        let pen = if psi == 0.0 { 0.0 } else { self.weighted_penalty / psi };
        utility.u(self.y_terminal) + pen
    }
}

/// Simulation and P&L of several strategies on one path in a single sweep,
/// sharing the greeks at each state. Returns `∫ g̃ dt` along the path.
#[allow(clippy::too_many_arguments)]
pub fn run_path<V, C, F>(
    problem: &Problem<V>,
    control: &C,
    strategies: &[Strategy],
    market: &Market,
    steps: usize,
    utility: &Utility,
    y0: f64,
    path_id: u64,
    mut normals: F,
    out: &mut [Outcome],
) -> Result<f64>
where
    V: ValueSurface,
    C: FeedbackControl,
    F: FnMut() -> (f64, f64),
{
    assert!(strategies.len() == out.len() && strategies.len() <= 3);
    let horizon = problem.horizon();
    let dt = horizon / steps as f64;
    let mut st = market.initial_state();
    let mut positions = [HedgePosition::default(); 3];
    for o in out.iter_mut() {
        *o = Outcome {
            y_terminal: y0,
            ..Outcome::default()
        };
    }
    let mut snap = problem.snapshot(&st).map_err(|e| e.at_path(path_id, 0))?;
    let mut source = 0.0;
    for k in 0..steps {
        let z = control
            .control(&snap, &market.band)
            .map_err(|e| e.at_path(path_id, k))?;
        market.bounds.check(&z).map_err(|e| e.at_path(path_id, k))?;
        let f = penalty(st.sigma, &z, &problem.weights);
        source += snap.perturbation.g * dt;
        for (i, s) in strategies.iter().enumerate() {
            positions[i] = s.position(&snap).map_err(|e| e.at_path(path_id, k))?;
            out[i].weighted_penalty += utility.du(out[i].y_terminal) * f * dt;
        }
        let (w0, w1) = normals();
        let mut next = advance(&problem.target, &st, &z, &market.band, dt, w0, w1);
        next.t = grid_time(horizon, k + 1, steps);
        let (v_next, c_next, next_snap) = if k + 1 < steps {
            let ns = problem.snapshot(&next).map_err(|e| e.at_path(path_id, k + 1))?;
            (ns.target.greeks.value, ns.call.value, Some(ns))
        } else {
            let c = crate::analytics::closed_form_value(&problem.call, next.t, next.s, next.sigma)?;
            (problem.target.payoff(&next), c, None)
        };
        let dv = v_next - snap.target.greeks.value;
        let dc = c_next - snap.call.value;
        let ds = next.s - st.s;
        for i in 0..strategies.len() {
            let o = &mut out[i];
            o.y_terminal += positions[i].theta * ds + positions[i].phi * dc - dv;
            o.max_excursion = o.max_excursion.max(libm::fabs(o.y_terminal - y0));
        }
        st = next;
        if let Some(ns) = next_snap {
            snap = ns;
        }
    }
    Ok(source)
}
