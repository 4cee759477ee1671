//! Vega-gamma-vanna-volga vectors and the leading-order model perturbation.
//!
//! Coordinates are ordered like a control `(ν, σ, η, ξ)`: vega, `Σ` times the
//! cash gamma, `Σ` times the cash vanna, half the volga.

use crate::analytics::{Coefficients, GreekBundle, Partials};
use crate::{Error, Result};

pub type Vgvv = [f64; 4];

/// Vegas smaller than `VEGA_FLOOR · S` are treated as zero.
pub const VEGA_FLOOR: f64 = 1e-10;

/// Diagonal of the penalty matrix `Ψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyWeights {
    pub nu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub xi: f64,
}

impl PenaltyWeights {
    pub fn new(nu: f64, sigma: f64, eta: f64, xi: f64) -> Result<Self> {
        let w = Self { nu, sigma, eta, xi };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(x: f64) -> Self {
        Self {
            nu: x,
            sigma: x,
            eta: x,
            xi: x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("ψ_ν", self.nu),
            ("ψ_σ", self.sigma),
            ("ψ_η", self.eta),
            ("ψ_ξ", self.xi),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::domain(name, x));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.nu, self.sigma, self.eta, self.xi]
    }

    pub fn max(&self) -> f64 {
        self.nu.max(self.sigma).max(self.eta).max(self.xi)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nu: s * self.nu,
            sigma: s * self.sigma,
            eta: s * self.eta,
            xi: s * self.xi,
        }
    }
}

/// Delta, gamma and vanna corrected for the `γ`-loading of the auxiliary state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveGreeks {
    pub delta: f64,
    pub gamma: f64,
    pub vanna: f64,
}

pub fn effective_greeks(p: &Partials, coeffs: &Coefficients) -> Result<EffectiveGreeks> {
    let g = &p.greeks;
    let k = coeffs.gamma;
    if k == 0.0 {
        return Ok(EffectiveGreeks {
            delta: g.d_s,
            gamma: g.d_ss,
            vanna: g.d_s_sigma,
        });
    }
    let a = p.aux.ok_or(Error::MissingPartial("𝒱_A, 𝒱_SA, 𝒱_AA and 𝒱_AΣ"))?;
    Ok(EffectiveGreeks {
        delta: g.d_s + k * a.d_a,
        gamma: g.d_ss + 2.0 * k * a.d_s_a + k * k * a.d_a_a,
        vanna: g.d_s_sigma + k * a.d_a_sigma,
    })
}

pub fn check_vega(vega: f64, s: f64) -> Result<()> {
    if !(libm::fabs(vega) >= VEGA_FLOOR * s) {
        return Err(Error::DegenerateVega { vega, spot: s });
    }
    Ok(())
}

/// `c = (𝒞_Σ, ΣS²𝒞_SS, ΣS𝒞_SΣ, ½𝒞_ΣΣ)`.
pub fn call_vgvv(s: f64, sigma: f64, g: &GreekBundle) -> Result<Vgvv> {
    check_vega(g.d_sigma, s)?;
    Ok(call_vgvv_unchecked(s, sigma, g))
}

pub(crate) fn call_vgvv_unchecked(s: f64, sigma: f64, g: &GreekBundle) -> Vgvv {
    [
        g.d_sigma,
        // same association as the target's vector, so collinear pairs agree bitwise
        sigma * (s * s * g.d_ss),
        sigma * s * g.d_s_sigma,
        0.5 * g.d_sigma_sigma,
    ]
}

/// `v = (𝒱_Σ, Σ(β𝒱_A + S²Γ), ΣS ∂Δ/∂Σ, ½𝒱_ΣΣ)` with effective greeks.
pub fn option_vgvv(s: f64, sigma: f64, p: &Partials, coeffs: &Coefficients) -> Result<Vgvv> {
    let eff = effective_greeks(p, coeffs)?;
    vgvv_from(s, sigma, p, coeffs, &eff)
}

pub(crate) fn vgvv_from(
    s: f64,
    sigma: f64,
    p: &Partials,
    coeffs: &Coefficients,
    eff: &EffectiveGreeks,
) -> Result<Vgvv> {
    let beta_term = if coeffs.beta == 0.0 {
        0.0
    } else {
        coeffs.beta * p.aux.ok_or(Error::MissingPartial("𝒱_A"))?.d_a
    };
    Ok([
        p.greeks.d_sigma,
        sigma * (beta_term + s * s * eff.gamma),
        sigma * s * eff.vanna,
        0.5 * p.greeks.d_sigma_sigma,
    ])
}

/// Which multiplier formula applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// The sign constraint on `ξ` is slack.
    Free,
    /// The sign constraint binds and `μ` lifts the fourth coordinate.
    Clipped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangePair {
    pub lambda: f64,
    pub mu: f64,
    pub branch: Branch,
}

pub fn lagrange_pair(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<LagrangePair> {
    let (pair, kappa) = scaled_pair(c, v, w)?;
    Ok(LagrangePair {
        lambda: pair.lambda / kappa,
        ..pair
    })
}

/// The pair for `c/κ` together with `κ`, a power of two near `max |cᵢ|`.
/// Normalising keeps the bilinear forms clear of underflow when the call's
/// greeks are tiny; `μ` and `ζ̃` do not depend on the scale of `c`, and a
/// power of two keeps the rescaling exact.
fn scaled_pair(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<(LagrangePair, f64)> {
    let big = c.iter().fold(0.0, |m: f64, x| m.max(libm::fabs(*x)));
    if !(big > 0.0 && big.is_finite()) || c[..3].iter().all(|x| *x == 0.0) {
        return Err(Error::DegenerateConstraint("c vanishes on the first three coordinates"));
    }
    let kappa = libm::ldexp(1.0, libm::frexp(big).1);
    let c = c.map(|x| x / kappa);
    let psi = w.as_array();
    let mut cv_head = 0.0;
    let mut cc_head = 0.0;
    for i in 0..3 {
        cv_head += psi[i] * c[i] * v[i];
        cc_head += psi[i] * c[i] * c[i];
    }
    let cv = cv_head + psi[3] * c[3] * v[3];
    let cc = cc_head + psi[3] * c[3] * c[3];
    let free = cv / cc;
    if v[3] - free * c[3] >= 0.0 {
        let pair = LagrangePair {
            lambda: free,
            mu: 0.0,
            branch: Branch::Free,
        };
        return Ok((pair, kappa));
    }
    // cᵀΨc − ψ_ξ c₄² is the head sum; forming it by subtraction loses digits
    let lambda = cv_head / cc_head;
    let pair = LagrangePair {
        lambda,
        mu: (lambda * c[3] - v[3]).max(0.0),
        branch: Branch::Clipped,
    };
    Ok((pair, kappa))
}

/// `λ`, `μ`, `ζ̃ = Ψ(v − λc + μe₄)` and `g̃ = vᵀζ̃` at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub pair: LagrangePair,
    pub zeta: Vgvv,
    pub g: f64,
}

pub fn perturbation(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<Perturbation> {
    let (pair, kappa) = scaled_pair(c, v, w)?;
    let psi = w.as_array();
    let mut r = [0.0; 4];
    for i in 0..4 {
        r[i] = v[i] - pair.lambda * (c[i] / kappa);
    }
    r[3] += pair.mu;
    let mut zeta = [0.0; 4];
    let mut g = 0.0;
    for i in 0..4 {
        zeta[i] = psi[i] * r[i];
        // vᵀζ̃ = ζ̃ᵀΨ⁻¹ζ̃ by feasibility and complementary slackness; the
        // quadratic form cannot round below zero
        g += psi[i] * r[i] * r[i];
    }
    let pair = LagrangePair {
        lambda: pair.lambda / kappa,
        ..pair
    };
    Ok(Perturbation { pair, zeta, g })
}

/// As [`perturbation`], but also defined when `c` has vanished on its first
/// three coordinates (the call's greeks have underflowed far from the money).
/// The equality constraint then only involves `ξ`: it pins `ξ̃ = 0` when
/// `c₄ ≠ 0` and is void otherwise, leaving the sign constraint.
pub(crate) fn perturbation_or_void(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<Perturbation> {
    if !c[..3].iter().all(|x| *x == 0.0) {
        return perturbation(c, v, w);
    }
    let psi = w.as_array();
    let (pair, r4) = if c[3] != 0.0 {
        let pair = LagrangePair {
            lambda: v[3] / c[3],
            mu: 0.0,
            branch: Branch::Free,
        };
        (pair, 0.0)
    } else if v[3] >= 0.0 {
        (
            LagrangePair {
                lambda: 0.0,
                mu: 0.0,
                branch: Branch::Free,
            },
            v[3],
        )
    } else {
        (
            LagrangePair {
                lambda: 0.0,
                mu: -v[3],
                branch: Branch::Clipped,
            },
            0.0,
        )
    };
    let r = [v[0], v[1], v[2], r4];
    let zeta = [psi[0] * r[0], psi[1] * r[1], psi[2] * r[2], psi[3] * r[3]];
    let g = (0..4).map(|i| psi[i] * r[i] * r[i]).sum();
    Ok(Perturbation { pair, zeta, g })
}

pub fn zeta_tilde(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<Vgvv> {
    perturbation(c, v, w).map(|p| p.zeta)
}

/// The source term `g̃ ≥ 0` of the cash-equivalent equation.
pub fn source_term(c: &Vgvv, v: &Vgvv, w: &PenaltyWeights) -> Result<f64> {
    perturbation(c, v, w).map(|p| p.g)
}

/// `g̃` written through net greeks of the delta-vega hedged book, with
/// `φ* = 𝒱_Σ/𝒞_Σ`:
/// `−Σ(φ*S²𝒞_SS − (β𝒱_A+S²Γ))σ̃ − Σ(φ*S𝒞_SΣ − S∂Δ/∂Σ)η̃ − ½(φ*𝒞_ΣΣ − 𝒱_ΣΣ)ξ̃`.
pub fn source_term_net_greeks(s: f64, sigma: f64, call: &GreekBundle, v: &Vgvv, zeta: &Vgvv) -> Result<f64> {
    check_vega(call.d_sigma, s)?;
    let phi = v[0] / call.d_sigma;
    let net_gamma = phi * s * s * call.d_ss - v[1] / sigma;
    let net_vanna = phi * s * call.d_s_sigma - v[2] / sigma;
    let net_volga = phi * call.d_sigma_sigma - 2.0 * v[3];
    Ok(-sigma * net_gamma * zeta[1] - sigma * net_vanna * zeta[2] - 0.5 * net_volga * zeta[3])
}

pub fn dot(a: &Vgvv, b: &Vgvv) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}
