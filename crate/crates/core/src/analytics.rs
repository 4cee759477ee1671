//! Black–Scholes values and sensitivities with zero interest rates.
//!
//! Everything is parametrised by the implied volatility `Σ` and the residual
//! maturity `τ = T − t`. Internally the vanilla formulas work in total variance
//! `w = Σ²τ (+ w₀)`, which makes the `Σ` derivatives mechanical:
//! `V_Σ = 2Στ V_w`, `V_SΣ = 2Στ V_Sw`, `V_ΣΣ = 2τ V_w + 4Σ²τ² V_ww`.

use crate::normal::{cdf, pdf};
use crate::quadrature::{Feature, NormalIntegrator};
use crate::{Error, MarketState, Result};

/// Residual maturity used to smooth the put payoff.
pub const SMOOTHING_MATURITY: f64 = 0.01;
/// Volatility used to smooth the put payoff.
pub const SMOOTHING_VOL: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payoff {
    Call {
        strike: f64,
    },
    Put {
        strike: f64,
    },
    /// The Black–Scholes put value with residual maturity
    /// [`SMOOTHING_MATURITY`] and volatility [`SMOOTHING_VOL`].
    SmoothPut {
        strike: f64,
    },
    /// `K (S/K)^p`.
    Power {
        strike: f64,
        exponent: f64,
    },
    /// `ln S`.
    LogContract,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VanillaSpec {
    pub payoff: Payoff,
    pub maturity: f64,
}

impl VanillaSpec {
    pub fn call(strike: f64, maturity: f64) -> Self {
        Self {
            payoff: Payoff::Call { strike },
            maturity,
        }
    }

    pub fn put(strike: f64, maturity: f64) -> Self {
        Self {
            payoff: Payoff::Put { strike },
            maturity,
        }
    }

    pub fn smooth_put(strike: f64, maturity: f64) -> Self {
        Self {
            payoff: Payoff::SmoothPut { strike },
            maturity,
        }
    }

    pub fn power(strike: f64, exponent: f64, maturity: f64) -> Self {
        Self {
            payoff: Payoff::Power { strike, exponent },
            maturity,
        }
    }

    pub fn log_contract(maturity: f64) -> Self {
        Self {
            payoff: Payoff::LogContract,
            maturity,
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self.payoff {
            Payoff::Call { strike }
            | Payoff::Put { strike }
            | Payoff::SmoothPut { strike }
            | Payoff::Power { strike, .. } => Some(strike),
            Payoff::LogContract => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::domain("maturity", self.maturity));
        }
        if let Some(k) = self.strike() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::domain("strike", k));
            }
        }
        if let Payoff::Power { exponent, .. } = self.payoff {
            if !exponent.is_finite() {
                return Err(Error::domain("exponent", exponent));
            }
        }
        Ok(())
    }

    /// Terminal payoff at spot `s`.
    pub fn payoff(&self, s: f64) -> f64 {
        match self.payoff {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::SmoothPut { strike } => {
                let w = SMOOTHING_VOL * SMOOTHING_VOL * SMOOTHING_MATURITY;
                vanilla_sw(false, strike, s, w).v
            }
            Payoff::Power { strike, exponent } => strike * libm::pow(s / strike, exponent),
            Payoff::LogContract => libm::log(s),
        }
    }

    fn extra_variance(&self) -> f64 {
        match self.payoff {
            Payoff::SmoothPut { .. } => SMOOTHING_VOL * SMOOTHING_VOL * SMOOTHING_MATURITY,
            _ => 0.0,
        }
    }
}

/// Value and first/second sensitivities in `S` and `Σ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GreekBundle {
    pub value: f64,
    pub d_s: f64,
    pub d_ss: f64,
    pub d_sigma: f64,
    pub d_s_sigma: f64,
    pub d_sigma_sigma: f64,
}

impl GreekBundle {
    pub fn is_finite(&self) -> bool {
        [
            self.value,
            self.d_s,
            self.d_ss,
            self.d_sigma,
            self.d_s_sigma,
            self.d_sigma_sigma,
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    fn scaled(self, k: f64) -> Self {
        Self {
            value: k * self.value,
            d_s: k * self.d_s,
            d_ss: k * self.d_ss,
            d_sigma: k * self.d_sigma,
            d_s_sigma: k * self.d_s_sigma,
            d_sigma_sigma: k * self.d_sigma_sigma,
        }
    }
}

fn check_point(s: f64, sigma: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain("S", s));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("Σ", sigma));
    }
    Ok(())
}

/// Value and derivatives in `(S, w)`.
#[derive(Clone, Copy, Debug)]
struct SwGreeks {
    v: f64,
    v_s: f64,
    v_ss: f64,
    v_w: f64,
    v_sw: f64,
    v_ww: f64,
}

fn vanilla_sw(is_call: bool, k: f64, s: f64, w: f64) -> SwGreeks {
    let sw = libm::sqrt(w);
    let d1 = (libm::log(s / k) + 0.5 * w) / sw;
    let d2 = d1 - sw;
    let n1 = pdf(d1);
    let (v, v_s) = if is_call {
        (s * cdf(d1) - k * cdf(d2), cdf(d1))
    } else {
        (k * cdf(-d2) - s * cdf(-d1), -cdf(-d1))
    };
    SwGreeks {
        v,
        v_s,
        v_ss: n1 / (s * sw),
        v_w: s * n1 / (2.0 * sw),
        v_sw: -n1 * d2 / (2.0 * w),
        v_ww: s * n1 * (d1 * d2 - 1.0) / (4.0 * w * sw),
    }
}

fn sw_greeks(spec: &VanillaSpec, s: f64, w: f64) -> SwGreeks {
    match spec.payoff {
        Payoff::Call { strike } => vanilla_sw(true, strike, s, w),
        Payoff::Put { strike } | Payoff::SmoothPut { strike } => vanilla_sw(false, strike, s, w),
        Payoff::Power { strike, exponent: p } => {
            let q = 0.5 * p * (p - 1.0);
            let v = strike * libm::pow(s / strike, p) * libm::exp(q * w);
            SwGreeks {
                v,
                v_s: p * v / s,
                v_ss: p * (p - 1.0) * v / (s * s),
                v_w: q * v,
                v_sw: p * q * v / s,
                v_ww: q * q * v,
            }
        }
        Payoff::LogContract => SwGreeks {
            v: libm::log(s) - 0.5 * w,
            v_s: 1.0 / s,
            v_ss: -1.0 / (s * s),
            v_w: -0.5,
            v_sw: 0.0,
            v_ww: 0.0,
        },
    }
}

fn to_bundle(g: SwGreeks, sigma: f64, tau: f64) -> GreekBundle {
    let dw = 2.0 * sigma * tau;
    GreekBundle {
        value: g.v,
        d_s: g.v_s,
        d_ss: g.v_ss,
        d_sigma: dw * g.v_w,
        d_s_sigma: dw * g.v_sw,
        d_sigma_sigma: 2.0 * tau * g.v_w + dw * dw * g.v_ww,
    }
}

/// Sensitivities at (or after) maturity: one-sided limits where they exist.
fn terminal_greeks(spec: &VanillaSpec, s: f64, sigma: f64) -> Result<GreekBundle> {
    let kinked = |strike: f64, sign: f64| {
        if s == strike {
            return Err(Error::NotDifferentiable("vanilla payoff at its strike at maturity"));
        }
        let itm = sign * (s - strike) > 0.0;
        Ok(GreekBundle {
            value: spec.payoff(s),
            d_s: if itm { sign } else { 0.0 },
            ..GreekBundle::default()
        })
    };
    match spec.payoff {
        Payoff::Call { strike } => kinked(strike, 1.0),
        Payoff::Put { strike } => kinked(strike, -1.0),
        _ => Ok(to_bundle(sw_greeks(spec, s, spec.extra_variance()), sigma, 0.0)),
    }
}

/// Closed-form value and greeks. These are the fast path used inside
/// simulations and PDE sources; [`european_greeks`] is the quadrature route.
pub fn closed_form_greeks(spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> Result<GreekBundle> {
    check_point(s, sigma)?;
    let tau = spec.maturity - t;
    if tau <= 0.0 {
        return terminal_greeks(spec, s, sigma);
    }
    let w = sigma * sigma * tau + spec.extra_variance();
    Ok(to_bundle(sw_greeks(spec, s, w), sigma, tau))
}

pub fn closed_form_value(spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> Result<f64> {
    check_point(s, sigma)?;
    let tau = spec.maturity - t;
    if tau <= 0.0 {
        return Ok(spec.payoff(s));
    }
    let w = sigma * sigma * tau + spec.extra_variance();
    Ok(sw_greeks(spec, s, w).v)
}

/// Value by Gauss quadrature over the terminal log-normal distribution.
pub fn european_value(spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> Result<f64> {
    european_value_with(&NormalIntegrator::default(), spec, t, s, sigma)
}

pub fn european_value_with(q: &NormalIntegrator, spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> Result<f64> {
    check_point(s, sigma)?;
    spec.validate()?;
    if t >= spec.maturity {
        return Ok(spec.payoff(s));
    }
    Ok(quadrature_moments(q, spec, t, s, sigma)[0])
}

/// Greeks by differentiating the Gaussian density under the integral sign.
pub fn european_greeks(spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> Result<GreekBundle> {
    european_greeks_with(&NormalIntegrator::default(), spec, t, s, sigma)
}

pub fn european_greeks_with(
    q: &NormalIntegrator,
    spec: &VanillaSpec,
    t: f64,
    s: f64,
    sigma: f64,
) -> Result<GreekBundle> {
    check_point(s, sigma)?;
    spec.validate()?;
    let tau = spec.maturity - t;
    if tau <= 0.0 {
        return terminal_greeks(spec, s, sigma);
    }
    let m = quadrature_moments(q, spec, t, s, sigma);
    let sd = sigma * libm::sqrt(tau);
    let rt = libm::sqrt(tau);
    // derivatives in the mean and standard deviation of ln S_T
    let v_m = m[1] / sd;
    let v_mm = (m[2] - m[0]) / (sd * sd);
    let v_sd = (m[2] - m[0]) / sd;
    let v_sdsd = (m[4] - 5.0 * m[2] + 2.0 * m[0]) / (sd * sd);
    let v_msd = (m[3] - 3.0 * m[1]) / (sd * sd);
    Ok(GreekBundle {
        value: m[0],
        d_s: v_m / s,
        d_ss: (v_mm - v_m) / (s * s),
        d_sigma: -sigma * tau * v_m + rt * v_sd,
        d_s_sigma: (-sigma * tau * v_mm + rt * v_msd) / s,
        d_sigma_sigma: sigma * sigma * tau * tau * v_mm - 2.0 * sigma * tau * rt * v_msd + tau * v_sdsd - tau * v_m,
    })
}

fn quadrature_moments(q: &NormalIntegrator, spec: &VanillaSpec, t: f64, s: f64, sigma: f64) -> [f64; 5] {
    let tau = spec.maturity - t;
    let sd = sigma * libm::sqrt(tau);
    let center = |k: f64| (libm::log(k / s) + 0.5 * sd * sd) / sd;
    let feature = match spec.payoff {
        Payoff::Call { strike } | Payoff::Put { strike } => Some(Feature::Kink(center(strike))),
        Payoff::SmoothPut { strike } => Some(Feature::Layer {
            center: center(strike),
            width: libm::sqrt(spec.extra_variance()) / sd,
        }),
        Payoff::Power { .. } | Payoff::LogContract => None,
    };
    let h = |x: f64| spec.payoff(s * libm::exp(sd * x - 0.5 * sd * sd));
    match feature {
        Some(f) => q.moments(h, &[f]),
        None => q.moments(h, &[]),
    }
}

/// Forward-start call paying `(S_T − S_{T_reset})⁺`, with `A_t = S_{t ∧ T_reset}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardStart {
    pub reset: f64,
    pub maturity: f64,
}

impl ForwardStart {
    pub fn new(reset: f64, maturity: f64) -> Result<Self> {
        if !(reset > 0.0 && reset < maturity) {
            return Err(Error::domain("T_reset", reset));
        }
        Ok(Self { reset, maturity })
    }

    /// Value, greeks and the `A` partials at `(t, S, A, Σ)`.
    pub fn partials(&self, t: f64, s: f64, a: f64, sigma: f64) -> Result<Partials> {
        check_point(s, sigma)?;
        if !(a > 0.0) {
            return Err(Error::domain("A", a));
        }
        if t < self.reset {
            let tau = self.maturity - self.reset;
            let unit = to_bundle(vanilla_sw(true, 1.0, 1.0, sigma * sigma * tau), sigma, tau);
            let g = GreekBundle {
                value: s * unit.value,
                d_s: unit.value,
                d_ss: 0.0,
                d_sigma: s * unit.d_sigma,
                d_s_sigma: unit.d_sigma,
                d_sigma_sigma: s * unit.d_sigma_sigma,
            };
            return Ok(Partials {
                greeks: g,
                aux: Some(AuxPartials::default()),
            });
        }
        let call = VanillaSpec::call(a, self.maturity);
        let greeks = closed_form_greeks(&call, t, s, sigma)?;
        let tau = self.maturity - t;
        let aux = if tau > 0.0 {
            let w = sigma * sigma * tau;
            let sw = libm::sqrt(w);
            let d1 = (libm::log(s / a) + 0.5 * w) / sw;
            let d2 = d1 - sw;
            AuxPartials {
                d_a: -cdf(d2),
                d_s_a: -pdf(d2) / (s * sw),
                d_a_a: pdf(d2) / (a * sw),
                d_a_sigma: pdf(d2) * d1 / sigma,
            }
        } else {
            AuxPartials {
                d_a: if s > a { -1.0 } else { 0.0 },
                ..AuxPartials::default()
            }
        };
        Ok(Partials { greeks, aux: Some(aux) })
    }
}

/// Forward-start value and greeks in `(S, Σ)`.
pub fn forward_start_value(t: f64, s: f64, a: f64, sigma: f64, reset: f64, maturity: f64) -> Result<GreekBundle> {
    if !(t >= 0.0 && t < maturity) {
        return Err(Error::domain("t", t));
    }
    Ok(ForwardStart::new(reset, maturity)?.partials(t, s, a, sigma)?.greeks)
}

/// Derivatives involving the auxiliary state `A`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuxPartials {
    pub d_a: f64,
    pub d_s_a: f64,
    pub d_a_a: f64,
    pub d_a_sigma: f64,
}

/// Everything a value surface reports at a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Partials {
    pub greeks: GreekBundle,
    /// `None` when the surface cannot supply `A` derivatives.
    pub aux: Option<AuxPartials>,
}

impl Partials {
    pub fn plain(greeks: GreekBundle) -> Self {
        Self {
            greeks,
            aux: Some(AuxPartials::default()),
        }
    }
}

/// The functions `(α, β, γ, δ)` driving `dA = (α + ½βσ²)dt + γ dS + δ dM`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Coefficients {
    pub const ZERO: Self = Self {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

/// A Black–Scholes value function `𝒱(t, S, A, M, Σ)` of a (possibly exotic)
/// option, together with the dynamics of its auxiliary state.
pub trait ValueSurface {
    fn maturity(&self) -> f64;

    fn partials(&self, state: &MarketState) -> Result<Partials>;

    fn payoff(&self, state: &MarketState) -> f64;

    fn coefficients(&self, _state: &MarketState) -> Coefficients {
        Coefficients::ZERO
    }

    /// True when the value depends on `A` or `M`.
    fn path_dependent(&self) -> bool {
        false
    }
}

impl<T: ValueSurface + ?Sized> ValueSurface for &T {
    fn maturity(&self) -> f64 {
        (**self).maturity()
    }
    fn partials(&self, state: &MarketState) -> Result<Partials> {
        (**self).partials(state)
    }
    fn payoff(&self, state: &MarketState) -> f64 {
        (**self).payoff(state)
    }
    fn coefficients(&self, state: &MarketState) -> Coefficients {
        (**self).coefficients(state)
    }
    fn path_dependent(&self) -> bool {
        (**self).path_dependent()
    }
}

impl<T: ValueSurface + ?Sized> ValueSurface for alloc::boxed::Box<T> {
    fn maturity(&self) -> f64 {
        (**self).maturity()
    }
    fn partials(&self, state: &MarketState) -> Result<Partials> {
        (**self).partials(state)
    }
    fn payoff(&self, state: &MarketState) -> f64 {
        (**self).payoff(state)
    }
    fn coefficients(&self, state: &MarketState) -> Coefficients {
        (**self).coefficients(state)
    }
    fn path_dependent(&self) -> bool {
        (**self).path_dependent()
    }
}

impl ValueSurface for VanillaSpec {
    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn partials(&self, state: &MarketState) -> Result<Partials> {
        closed_form_greeks(self, state.t, state.s, state.sigma).map(Partials::plain)
    }

    fn payoff(&self, state: &MarketState) -> f64 {
        VanillaSpec::payoff(self, state.s)
    }
}

/// A vanilla surface evaluated by quadrature instead of closed forms.
#[derive(Clone, Debug)]
pub struct QuadratureSurface {
    pub spec: VanillaSpec,
    integrator: NormalIntegrator,
}

impl QuadratureSurface {
    pub fn new(spec: VanillaSpec, nodes: usize) -> Self {
        Self {
            spec,
            integrator: NormalIntegrator::new(nodes),
        }
    }
}

impl ValueSurface for QuadratureSurface {
    fn maturity(&self) -> f64 {
        self.spec.maturity
    }

    fn partials(&self, state: &MarketState) -> Result<Partials> {
        european_greeks_with(&self.integrator, &self.spec, state.t, state.s, state.sigma).map(Partials::plain)
    }

    fn payoff(&self, state: &MarketState) -> f64 {
        self.spec.payoff(state.s)
    }
}

impl ValueSurface for ForwardStart {
    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn partials(&self, state: &MarketState) -> Result<Partials> {
        ForwardStart::partials(self, state.t, state.s, state.a, state.sigma)
    }

    fn payoff(&self, state: &MarketState) -> f64 {
        (state.s - state.a).max(0.0)
    }

    fn coefficients(&self, state: &MarketState) -> Coefficients {
        Coefficients {
            gamma: if state.t < self.reset { 1.0 } else { 0.0 },
            ..Coefficients::ZERO
        }
    }

    fn path_dependent(&self) -> bool {
        true
    }
}

/// Any of the built-in targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptionSpec {
    Vanilla(VanillaSpec),
    ForwardStart(ForwardStart),
}

impl From<VanillaSpec> for OptionSpec {
    fn from(v: VanillaSpec) -> Self {
        OptionSpec::Vanilla(v)
    }
}

impl From<ForwardStart> for OptionSpec {
    fn from(f: ForwardStart) -> Self {
        OptionSpec::ForwardStart(f)
    }
}

impl ValueSurface for OptionSpec {
    fn maturity(&self) -> f64 {
        match self {
            OptionSpec::Vanilla(v) => v.maturity,
            OptionSpec::ForwardStart(f) => f.maturity,
        }
    }

    fn partials(&self, state: &MarketState) -> Result<Partials> {
        match self {
            OptionSpec::Vanilla(v) => ValueSurface::partials(v, state),
            OptionSpec::ForwardStart(f) => ValueSurface::partials(f, state),
        }
    }

    fn payoff(&self, state: &MarketState) -> f64 {
        match self {
            OptionSpec::Vanilla(v) => ValueSurface::payoff(v, state),
            OptionSpec::ForwardStart(f) => ValueSurface::payoff(f, state),
        }
    }

    fn coefficients(&self, state: &MarketState) -> Coefficients {
        match self {
            OptionSpec::Vanilla(v) => v.coefficients(state),
            OptionSpec::ForwardStart(f) => f.coefficients(state),
        }
    }

    fn path_dependent(&self) -> bool {
        matches!(self, OptionSpec::ForwardStart(_))
    }
}

/// The short position in a surface: `−𝒱`.
#[derive(Clone, Copy, Debug)]
pub struct Negated<V>(pub V);

impl<V: ValueSurface> ValueSurface for Negated<V> {
    fn maturity(&self) -> f64 {
        self.0.maturity()
    }

    fn partials(&self, state: &MarketState) -> Result<Partials> {
        let p = self.0.partials(state)?;
        Ok(Partials {
            greeks: p.greeks.scaled(-1.0),
            aux: p.aux.map(|a| AuxPartials {
                d_a: -a.d_a,
                d_s_a: -a.d_s_a,
                d_a_a: -a.d_a_a,
                d_a_sigma: -a.d_a_sigma,
            }),
        })
    }

    fn payoff(&self, state: &MarketState) -> f64 {
        -self.0.payoff(state)
    }

    fn coefficients(&self, state: &MarketState) -> Coefficients {
        self.0.coefficients(state)
    }

    fn path_dependent(&self) -> bool {
        self.0.path_dependent()
    }
}

/// Residual of `𝒱_t + (α + ½βΣ²)𝒱_A + ½Σ²S²(𝒱_SS + 2γ𝒱_SA + γ²𝒱_AA)` at an
/// interior point. `𝒱_t` is a central difference; missing `A` derivatives
/// are differenced too.
pub fn pde_residual<V: ValueSurface + ?Sized>(surface: &V, point: &MarketState) -> Result<f64> {
    let tau = surface.maturity() - point.t;
    if tau <= 0.0 {
        return Err(Error::domain("t", point.t));
    }
    let value = |st: &MarketState| surface.partials(st).map(|p| p.greeks.value);
    let ht = (1e-4 * tau).min(1e-4);
    let v_t = (value(&MarketState {
        t: point.t + ht,
        ..*point
    })? - value(&MarketState {
        t: point.t - ht,
        ..*point
    })?) / (2.0 * ht);
    let p = surface.partials(point)?;
    let aux = match p.aux {
        Some(a) => a,
        None => {
            let ha = 1e-4 * libm::fabs(point.a).max(1.0);
            let up = surface.partials(&MarketState {
                a: point.a + ha,
                ..*point
            })?;
            let dn = surface.partials(&MarketState {
                a: point.a - ha,
                ..*point
            })?;
            let v0 = p.greeks.value;
            AuxPartials {
                d_a: (up.greeks.value - dn.greeks.value) / (2.0 * ha),
                d_s_a: (up.greeks.d_s - dn.greeks.d_s) / (2.0 * ha),
                d_a_a: (up.greeks.value - 2.0 * v0 + dn.greeks.value) / (ha * ha),
                d_a_sigma: (up.greeks.d_sigma - dn.greeks.d_sigma) / (2.0 * ha),
            }
        }
    };
    let c = surface.coefficients(point);
    let sig2 = point.sigma * point.sigma;
    let g = &p.greeks;
    Ok(v_t
        + (c.alpha + 0.5 * c.beta * sig2) * aux.d_a
        + 0.5 * sig2 * point.s * point.s * (g.d_ss + 2.0 * c.gamma * aux.d_s_a + c.gamma * c.gamma * aux.d_a_a))
}
