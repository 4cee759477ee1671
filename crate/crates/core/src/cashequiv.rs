//! The cash equivalent `w̃₀`: the first-order premium per unit of uncertainty
//! aversion. Two routes are provided, a Crank–Nicolson solve of
//! `w̃_t + ½Σ₀²S²w̃_SS + ½g̃ = 0`, `w̃(T) = 0`, and a per-path Feynman–Kac
//! integrand for Monte Carlo.

use alloc::vec::Vec;

use crate::analytics::ValueSurface;
use crate::controls::VolBand;
use crate::problem::Problem;
use crate::{Error, MarketState, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeGrid {
    /// Number of log-spot nodes, boundaries included.
    pub space_nodes: usize,
    pub time_steps: usize,
    /// Half-width of the grid in standard deviations `Σ₀√T` around `ln S₀`.
    pub span_sd: f64,
}

impl Default for PdeGrid {
    fn default() -> Self {
        Self {
            space_nodes: 400,
            time_steps: 400,
            span_sd: 6.0,
        }
    }
}

impl PdeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.space_nodes < 50 {
            return Err(Error::InvalidGrid("at least 50 space nodes"));
        }
        if self.time_steps < 50 {
            return Err(Error::InvalidGrid("at least 50 time steps"));
        }
        if !(self.span_sd >= 5.0 && self.span_sd.is_finite()) {
            return Err(Error::InvalidGrid("span of at least 5 standard deviations"));
        }
        Ok(())
    }

    /// Halves both the log-spot spacing and the time step.
    pub fn refined(&self) -> Self {
        Self {
            space_nodes: 2 * self.space_nodes - 1,
            time_steps: 2 * self.time_steps,
            span_sd: self.span_sd,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution {
    pub log_spot: Vec<f64>,
    /// Time levels `0 = t₀ < … < t_N = T`.
    pub times: Vec<f64>,
    values: Vec<f64>,
    pub w0: f64,
}

impl PdeSolution {
    /// `w̃(t_k, ·)` on the log-spot nodes.
    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.log_spot.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation of `w̃(0, S)`.
    pub fn at_time_zero(&self, s: f64) -> f64 {
        interpolate(&self.log_spot, self.level(0), libm::log(s))
    }
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return y[0];
    }
    if at >= x[n - 1] {
        return y[n - 1];
    }
    let h = x[1] - x[0];
    let i = (((at - x[0]) / h) as usize).min(n - 2);
    let u = (at - x[i]) / h;
    (1.0 - u) * y[i] + u * y[i + 1]
}

/// Crank–Nicolson in `x = ln S` and time to maturity, zero Dirichlet data at
/// both ends, source evaluated at mid-step times so `t = T` is never touched.
pub fn cash_equivalent_pde<V: ValueSurface>(
    problem: &Problem<V>,
    band: &VolBand,
    s0: f64,
    sigma0: f64,
    grid: &PdeGrid,
) -> Result<PdeSolution> {
    grid.validate()?;
    band.check_initial(sigma0)?;
    if problem.target.path_dependent() {
        return Err(Error::Capability(
            "the PDE route needs a (t, S)-only target; use the Monte Carlo route",
        ));
    }
    if !(s0 > 0.0) {
        return Err(Error::domain("S₀", s0));
    }
    let horizon = problem.horizon();
    let n = grid.space_nodes;
    let half = grid.span_sd * sigma0 * libm::sqrt(horizon);
    let x0 = libm::log(s0);
    let h = 2.0 * half / (n - 1) as f64;
    let log_spot: Vec<f64> = (0..n).map(|i| x0 - half + h * i as f64).collect();
    let steps = grid.time_steps;
    let k = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect();

    // L w = a (w_xx − w_x)
    let a = 0.5 * sigma0 * sigma0;
    let lo = a * (1.0 / (h * h) + 0.5 / h);
    let di = -2.0 * a / (h * h);
    let up = a * (1.0 / (h * h) - 0.5 / h);

    let m = n - 2;
    let mut values = alloc::vec![0.0; (steps + 1) * n];
    let mut w = alloc::vec![0.0; n];
    let mut rhs = alloc::vec![0.0; m];
    let mut cprime = alloc::vec![0.0; m];
    let mut source = alloc::vec![0.0; m];
    // implicit side: constant tridiagonal (−½k lo, 1 − ½k di, −½k up)
    let (al, ad, au) = (-0.5 * k * lo, 1.0 - 0.5 * k * di, -0.5 * k * up);
    for j in (0..steps).rev() {
        let t_mid = 0.5 * (times[j] + times[j + 1]);
        for i in 0..m {
            let st = MarketState::new(t_mid, libm::exp(log_spot[i + 1]), sigma0);
            let g = problem.source(&st).map_err(|e| e.at_state(&st))?;
            source[i] = 0.5 * g;
        }
        for i in 0..m {
            let wi = w[i + 1];
            let lw = lo * w[i] + di * wi + up * w[i + 2];
            rhs[i] = wi + 0.5 * k * lw + k * source[i];
        }
        // Thomas
        cprime[0] = au / ad;
        rhs[0] /= ad;
        for i in 1..m {
            let denom = ad - al * cprime[i - 1];
            cprime[i] = au / denom;
            rhs[i] = (rhs[i] - al * rhs[i - 1]) / denom;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cprime[i] * rhs[i + 1];
        }
        w[1..n - 1].copy_from_slice(&rhs);
        values[j * n..(j + 1) * n].copy_from_slice(&w);
    }
    let w0 = interpolate(&log_spot, &values[..n], x0);
    Ok(PdeSolution {
        log_spot,
        times,
        values,
        w0,
    })
}

/// `∫₀ᵀ g̃ dt` along one reference-model path, left-endpoint rule.
///
/// The spot follows exact geometric Brownian motion at `Σ₀`; `A` and `M`
/// follow their Euler updates. `normal` supplies standard normal draws.
pub fn feynman_kac_path<V: ValueSurface, F: FnMut() -> f64>(
    problem: &Problem<V>,
    s0: f64,
    sigma0: f64,
    a0: f64,
    steps: usize,
    path_id: u64,
    mut normal: F,
) -> Result<f64> {
    let horizon = problem.horizon();
    let dt = horizon / steps as f64;
    let sd = sigma0 * libm::sqrt(dt);
    let drift = -0.5 * sigma0 * sigma0 * dt;
    let mut st = MarketState::new(0.0, s0, sigma0).with_aux(a0, s0);
    let mut integral = 0.0;
    for j in 0..steps {
        st.t = horizon * j as f64 / steps as f64;
        let g = problem.source(&st).map_err(|e| e.at_state(&st).at_path(path_id, j))?;
        integral += g * dt;
        let coeffs = problem.target.coefficients(&st);
        let s_next = st.s * libm::exp(drift + sd * normal());
        let m_next = st.m.max(s_next);
        st.a += (coeffs.alpha + 0.5 * coeffs.beta * sigma0 * sigma0) * dt
            + coeffs.gamma * (s_next - st.s)
            + coeffs.delta * (m_next - st.m);
        st.s = s_next;
        st.m = m_next;
    }
    Ok(integral)
}

/// First-order indifference ask `V₀ + w̃₀ψ`.
pub fn indifference_ask(v0: f64, w0: f64, psi: f64) -> Result<f64> {
    if !(w0 >= 0.0) {
        return Err(Error::Invariant {
            what: "cash equivalent w̃₀ (must be nonnegative)",
            value: w0,
        });
    }
    if !(psi >= 0.0 && psi.is_finite() && v0.is_finite()) {
        return Err(Error::domain("ψ", psi));
    }
    Ok(v0 + w0 * psi)
}
