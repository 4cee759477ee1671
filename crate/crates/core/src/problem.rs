//! A hedging problem: a non-traded target, the traded call used to hedge its
//! vega, and the penalty weights of the adversary.

use crate::analytics::{closed_form_greeks, Coefficients, GreekBundle, Partials, ValueSurface, VanillaSpec};
use crate::vgvv::{
    call_vgvv_unchecked, effective_greeks, perturbation_or_void, vgvv_from, EffectiveGreeks, PenaltyWeights,
    Perturbation, Vgvv,
};
use crate::{Error, MarketState, Result};

#[derive(Clone, Debug)]
pub struct Problem<V> {
    pub call: VanillaSpec,
    pub target: V,
    pub weights: PenaltyWeights,
}

impl<V: ValueSurface> Problem<V> {
    pub fn new(call: VanillaSpec, target: V, weights: PenaltyWeights) -> Result<Self> {
        call.validate()?;
        weights.validate()?;
        if call.maturity < target.maturity() {
            return Err(Error::domain(
                "call maturity (must not precede the target's)",
                call.maturity,
            ));
        }
        Ok(Self { call, target, weights })
    }

    pub fn horizon(&self) -> f64 {
        self.target.maturity()
    }

    pub fn call_greeks(&self, state: &MarketState) -> Result<GreekBundle> {
        closed_form_greeks(&self.call, state.t, state.s, state.sigma)
    }

    /// Everything the controls and hedges need at one state.
    ///
    /// No vega floor is applied here: `g̃` and `ζ̃` never divide by the call's
    /// vega, so states where its greeks have underflowed are admitted. The
    /// consumers that do divide (`ν̂`, the modified control, the delta-vega
    /// hedge) check the floor themselves.
    pub fn snapshot(&self, state: &MarketState) -> Result<Snapshot> {
        let call = self.call_greeks(state)?;
        let target = self.target.partials(state)?;
        let coeffs = self.target.coefficients(state);
        let eff = effective_greeks(&target, &coeffs)?;
        let c = call_vgvv_unchecked(state.s, state.sigma, &call);
        let v = vgvv_from(state.s, state.sigma, &target, &coeffs, &eff)?;
        let perturbation = perturbation_or_void(&c, &v, &self.weights)?;
        Ok(Snapshot {
            state: *state,
            call,
            target,
            coeffs,
            eff,
            c,
            v,
            perturbation,
        })
    }

    /// `g̃` at a state.
    pub fn source(&self, state: &MarketState) -> Result<f64> {
        self.snapshot(state).map(|s| s.perturbation.g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub state: MarketState,
    pub call: GreekBundle,
    pub target: Partials,
    pub coeffs: Coefficients,
    pub eff: EffectiveGreeks,
    pub c: Vgvv,
    pub v: Vgvv,
    pub perturbation: Perturbation,
}
