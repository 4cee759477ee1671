//! Feedback controls of the adversary and the drift functionals `b^𝒞`, `b^𝒱`.

use crate::analytics::{GreekBundle, ValueSurface};
use crate::problem::{Problem, Snapshot};
use crate::vgvv::{check_vega, Vgvv};
use crate::{Error, MarketState, Result};

/// `ζ = (ν, σ, η, ξ)`: drift of `Σ`, spot vol, correlated vol-of-vol and
/// squared uncorrelated vol-of-vol.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlVector {
    pub nu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub xi: f64,
}

impl ControlVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.nu, self.sigma, self.eta, self.xi]
    }

    /// `ζ − ζ⁰(Σ)`.
    pub fn deviation(&self, sigma: f64) -> [f64; 4] {
        [self.nu, self.sigma - sigma, self.eta, self.xi]
    }
}

/// `ζ⁰(Σ) = (0, Σ, 0, 0)`: the recalibrated Black–Scholes belief.
pub fn reference_control(sigma: f64) -> ControlVector {
    ControlVector {
        nu: 0.0,
        sigma,
        eta: 0.0,
        xi: 0.0,
    }
}

/// Implied-vol band outside of which the adversary falls back to `ζ⁰`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolBand {
    pub lo: f64,
    pub hi: f64,
}

impl VolBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::domain("band lower edge", lo));
        }
        Ok(Self { lo, hi })
    }

    /// Checks `Σ̲ < Σ₀ < Σ̄`.
    pub fn check_initial(&self, sigma0: f64) -> Result<()> {
        if !(self.lo < sigma0 && sigma0 < self.hi) {
            return Err(Error::domain("Σ₀ (must lie inside the band)", sigma0));
        }
        Ok(())
    }

    pub fn contains(&self, sigma: f64) -> bool {
        self.lo < sigma && sigma < self.hi
    }

    pub fn clamp(&self, sigma: f64) -> f64 {
        sigma.max(self.lo).min(self.hi)
    }
}

/// Coordinate bounds `[ν̲,ν̄]×[σ̲,σ̄]×[η̲,η̄]×[0,ξ̄]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlBox {
    pub nu: (f64, f64),
    pub sigma: (f64, f64),
    pub eta: (f64, f64),
    pub xi_max: f64,
}

impl ControlBox {
    pub fn unbounded() -> Self {
        Self {
            nu: (f64::NEG_INFINITY, f64::INFINITY),
            sigma: (0.0, f64::INFINITY),
            eta: (f64::NEG_INFINITY, f64::INFINITY),
            xi_max: f64::INFINITY,
        }
    }

    pub fn check(&self, z: &ControlVector) -> Result<()> {
        let coords = [
            ("ν", z.nu, self.nu),
            ("σ", z.sigma, self.sigma),
            ("η", z.eta, self.eta),
            ("ξ", z.xi, (0.0, self.xi_max)),
        ];
        for (coordinate, value, (lo, hi)) in coords {
            if !(lo <= value && value <= hi) {
                return Err(Error::ControlOutOfBox {
                    coordinate,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: &ControlVector) -> bool {
        self.check(z).is_ok()
    }

    /// The reference controls of the band must be admissible.
    pub fn check_band(&self, band: &VolBand) -> Result<()> {
        self.check(&reference_control(band.lo))?;
        self.check(&reference_control(band.hi))
    }
}

/// The four terms of a drift functional, returned separately so callers can
/// judge cancellation.
fn drift_terms(vega: f64, cash_gamma: f64, cash_vanna: f64, volga: f64, sigma: f64, z: &ControlVector) -> [f64; 4] {
    [
        z.nu * vega,
        0.5 * cash_gamma * (z.sigma - sigma) * (z.sigma + sigma),
        z.sigma * z.eta * cash_vanna,
        0.5 * (z.eta * z.eta + z.xi.max(0.0)) * volga,
    ]
}

fn call_terms(call: &GreekBundle, s: f64, sigma: f64, z: &ControlVector) -> [f64; 4] {
    drift_terms(
        call.d_sigma,
        s * s * call.d_ss,
        s * call.d_s_sigma,
        call.d_sigma_sigma,
        sigma,
        z,
    )
}

/// `b^𝒞 = ν𝒞_Σ + ½S²𝒞_SS(σ²−Σ²) + σηS𝒞_SΣ + ½(η²+ξ)𝒞_ΣΣ`, the drift of the
/// call price under `ζ`.
pub fn drift_bc(call: &GreekBundle, s: f64, sigma: f64, z: &ControlVector) -> f64 {
    call_terms(call, s, sigma, z).iter().sum()
}

/// Sum of the absolute terms of `b^𝒞`; the natural scale for its residual.
pub fn drift_bc_scale(call: &GreekBundle, s: f64, sigma: f64, z: &ControlVector) -> f64 {
    call_terms(call, s, sigma, z).iter().map(|x| libm::fabs(*x)).sum()
}

/// `b^𝒱 = ν𝒱_Σ + ½(β𝒱_A+S²Γ)(σ²−Σ²) + σηS∂Δ/∂Σ + ½(η²+ξ)𝒱_ΣΣ`.
pub fn drift_bv(snap: &Snapshot, z: &ControlVector) -> f64 {
    let st = &snap.state;
    // v₂/Σ = β𝒱_A + S²Γ; rebuilt without the division
    let beta_term = match snap.target.aux {
        Some(a) if snap.coeffs.beta != 0.0 => snap.coeffs.beta * a.d_a,
        _ => 0.0,
    };
    drift_terms(
        snap.target.greeks.d_sigma,
        beta_term + st.s * st.s * snap.eff.gamma,
        st.s * snap.eff.vanna,
        snap.target.greeks.d_sigma_sigma,
        st.sigma,
        z,
    )
    .iter()
    .sum()
}

fn shifted(sigma: f64, step: &Vgvv) -> ControlVector {
    ControlVector {
        nu: step[0],
        sigma: sigma + step[1],
        eta: step[2],
        xi: step[3].max(0.0),
    }
}

/// `ζ^ψ = ζ⁰(Σ) + ψζ̃` inside the band, `ζ⁰(Σ)` outside.
pub fn candidate_control(snap: &Snapshot, band: &VolBand, psi: f64) -> ControlVector {
    let sigma = snap.state.sigma;
    if !band.contains(sigma) {
        return reference_control(sigma);
    }
    let zt = &snap.perturbation.zeta;
    shifted(sigma, &[psi * zt[0], psi * zt[1], psi * zt[2], psi * zt[3]])
}

/// Second-order drift correction
/// `ν̂ = −(σ̃, η̃)ᵀ[[S²𝒞_SS, S𝒞_SΣ], [S𝒞_SΣ, 𝒞_ΣΣ]](σ̃, η̃) / (2𝒞_Σ)`.
pub fn nu_hat(call: &GreekBundle, s: f64, zeta: &Vgvv) -> Result<f64> {
    check_vega(call.d_sigma, s)?;
    let (a, b) = (zeta[1], zeta[2]);
    let q = s * s * call.d_ss * a * a + 2.0 * s * call.d_s_sigma * a * b + call.d_sigma_sigma * b * b;
    Ok(-q / (2.0 * call.d_sigma))
}

/// `ζ̌^ψ = ζ⁰(Σ) + ψζ̃ + ψ²ν̂e₁` inside the band, `ζ⁰(Σ)` outside; keeps the
/// call price driftless exactly.
///
/// `ν` is obtained by solving `b^𝒞 = 0` for it. Given `cᵀζ̃ = 0` this is the
/// same number as `ψζ̃₁ + ψ²ν̂`, but it does not inherit the rounding of `cᵀζ̃`,
/// which is relative to `|v|` rather than to the (possibly much smaller) drift
/// terms.
pub fn modified_control(snap: &Snapshot, band: &VolBand, psi: f64) -> Result<ControlVector> {
    let sigma = snap.state.sigma;
    if !band.contains(sigma) {
        return Ok(reference_control(sigma));
    }
    check_vega(snap.call.d_sigma, snap.state.s)?;
    let zt = &snap.perturbation.zeta;
    let mut z = shifted(sigma, &[0.0, psi * zt[1], psi * zt[2], psi * zt[3]]);
    let rest = drift_bc(&snap.call, snap.state.s, sigma, &z);
    z.nu = -rest / snap.call.d_sigma;
    Ok(z)
}

/// A state-feedback rule for the adversary's control.
pub trait FeedbackControl {
    fn control(&self, snap: &Snapshot, band: &VolBand) -> Result<ControlVector>;

    /// Whether the rule can leave the reference model.
    fn is_reference(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlRule {
    Reference,
    Candidate { psi: f64 },
    Modified { psi: f64 },
}

impl FeedbackControl for ControlRule {
    fn control(&self, snap: &Snapshot, band: &VolBand) -> Result<ControlVector> {
        match *self {
            ControlRule::Reference => Ok(reference_control(snap.state.sigma)),
            ControlRule::Candidate { psi } => Ok(candidate_control(snap, band, psi)),
            ControlRule::Modified { psi } => modified_control(snap, band, psi),
        }
    }

    fn is_reference(&self) -> bool {
        match *self {
            ControlRule::Reference => true,
            ControlRule::Candidate { psi } | ControlRule::Modified { psi } => psi == 0.0,
        }
    }
}

/// Largest `ψ ≤ psi_max` (to bisection accuracy) for which the modified
/// control stays inside `bounds` at every given state.
pub fn validity_threshold<V: ValueSurface>(
    problem: &Problem<V>,
    states: &[MarketState],
    band: &VolBand,
    bounds: &ControlBox,
    psi_max: f64,
) -> Result<f64> {
    bounds.check_band(band)?;
    let snaps = states
        .iter()
        .map(|s| problem.snapshot(s))
        .collect::<Result<alloc::vec::Vec<_>>>()?;
    let ok = |psi: f64| -> Result<bool> {
        for snap in &snaps {
            if !bounds.contains(&modified_control(snap, band, psi)?) {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if ok(psi_max)? {
        return Ok(psi_max);
    }
    let (mut lo, mut hi) = (0.0, psi_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::VanillaSpec;
    use crate::vgvv::{dot, PenaltyWeights};
    use std::vec::Vec;

    fn problem() -> Problem<VanillaSpec> {
        Problem::new(
            VanillaSpec::call(100.0, 1.5),
            VanillaSpec::smooth_put(90.0, 1.0),
            PenaltyWeights::new(0.5, 1.0, 2.0, 0.25).unwrap(),
        )
        .unwrap()
    }

    fn band() -> VolBand {
        VolBand::new(0.05, 0.6).unwrap()
    }

    fn states() -> Vec<MarketState> {
        let mut out = Vec::new();
        for &t in &[0.0, 0.3, 0.6, 0.9] {
            for &s in &[70.0, 85.0, 100.0, 115.0, 130.0] {
                for &sigma in &[0.12, 0.2, 0.35] {
                    out.push(MarketState::new(t, s, sigma));
                }
            }
        }
        out
    }

    #[test]
    fn reference_is_driftless_and_unpenalised() {
        let z = reference_control(0.2);
        assert_eq!(
            z,
            ControlVector {
                nu: 0.0,
                sigma: 0.2,
                eta: 0.0,
                xi: 0.0
            }
        );
        assert_eq!(z.deviation(0.2), [0.0; 4]);
        let p = problem();
        for st in states() {
            let snap = p.snapshot(&st).unwrap();
            let z = reference_control(st.sigma);
            assert_eq!(drift_bc(&snap.call, st.s, st.sigma, &z), 0.0);
            assert_eq!(drift_bv(&snap, &z), 0.0);
        }
    }

    #[test]
    fn nu_shift_is_linear() {
        let p = problem();
        let st = MarketState::new(0.2, 95.0, 0.22);
        let snap = p.snapshot(&st).unwrap();
        let z = ControlVector {
            nu: 0.03,
            ..reference_control(0.22)
        };
        assert_eq!(drift_bc(&snap.call, st.s, st.sigma, &z), 0.03 * snap.call.d_sigma);
    }

    #[test]
    fn call_target_has_call_drift() {
        let p = Problem::new(
            VanillaSpec::call(100.0, 1.0),
            VanillaSpec::call(100.0, 1.0),
            PenaltyWeights::uniform(1.0),
        )
        .unwrap();
        let st = MarketState::new(0.2, 95.0, 0.22);
        let snap = p.snapshot(&st).unwrap();
        let z = ControlVector {
            nu: 0.01,
            sigma: 0.3,
            eta: -0.2,
            xi: 0.04,
        };
        assert_eq!(drift_bv(&snap, &z), drift_bc(&snap.call, st.s, st.sigma, &z));
    }

    #[test]
    fn modified_control_is_exactly_driftless() {
        let p = problem();
        for st in states() {
            let snap = p.snapshot(&st).unwrap();
            for &psi in &[0.01, 0.1, 1.0] {
                let z = modified_control(&snap, &band(), psi).unwrap();
                let b = drift_bc(&snap.call, st.s, st.sigma, &z);
                let scale = drift_bc_scale(&snap.call, st.s, st.sigma, &z);
                assert!(b.abs() <= 1e-12 * scale.max(1e-300), "{st:?} ψ={psi}: {b} vs {scale}");
                assert!(z.xi >= 0.0);
            }
        }
    }

    #[test]
    fn candidate_drift_is_second_order() {
        let p = problem();
        for st in states() {
            let snap = p.snapshot(&st).unwrap();
            let b = |psi: f64| drift_bc(&snap.call, st.s, st.sigma, &candidate_control(&snap, &band(), psi));
            let (b1, b2) = (b(0.1), b(0.05));
            if b1.abs() < 1e-14 * snap.call.d_sigma {
                continue;
            }
            let ratio = b1 / b2;
            assert!((ratio - 4.0).abs() < 0.8, "{st:?}: {ratio}");
        }
    }

    #[test]
    fn distance_between_candidate_and_modified() {
        let p = problem();
        let st = MarketState::new(0.3, 90.0, 0.25);
        let snap = p.snapshot(&st).unwrap();
        let nh = nu_hat(&snap.call, st.s, &snap.perturbation.zeta).unwrap();
        for &psi in &[0.2, 0.05] {
            let a = candidate_control(&snap, &band(), psi);
            let b = modified_control(&snap, &band(), psi).unwrap();
            let gap = (b.nu - a.nu).abs();
            assert!((gap - nh.abs() * psi * psi).abs() < 1e-9 * a.nu.abs().max(gap), "{gap}");
            assert_eq!((a.sigma, a.eta, a.xi), (b.sigma, b.eta, b.xi));
        }
    }

    #[test]
    fn band_edges_fall_back() {
        let p = problem();
        let narrow = VolBand::new(0.1, 0.2).unwrap();
        for sigma in [0.1, 0.2, 0.25] {
            let snap = p.snapshot(&MarketState::new(0.0, 100.0, sigma)).unwrap();
            assert_eq!(candidate_control(&snap, &narrow, 0.5), reference_control(sigma));
            assert_eq!(modified_control(&snap, &narrow, 0.5).unwrap(), reference_control(sigma));
        }
    }

    #[test]
    fn collinear_target_stays_at_reference() {
        let p = Problem::new(
            VanillaSpec::call(100.0, 1.0),
            VanillaSpec::put(100.0, 1.0),
            PenaltyWeights::uniform(1.0),
        )
        .unwrap();
        for st in states().into_iter().filter(|s| s.t < 0.75) {
            let snap = p.snapshot(&st).unwrap();
            let z = modified_control(&snap, &band(), 0.3).unwrap();
            let d = z.deviation(st.sigma);
            assert!(d.iter().all(|x| x.abs() < 1e-12 * snap.c[0].abs()), "{d:?}");
        }
    }

    #[test]
    fn perturbation_size_bound() {
        let p = problem();
        let psi_max = p.weights.max();
        for st in states() {
            let snap = p.snapshot(&st).unwrap();
            let dev = candidate_control(&snap, &band(), 0.1).deviation(st.sigma);
            let norm = dot(&dev, &dev).sqrt();
            let bound = psi_max * dot(&snap.v, &snap.v).sqrt() * 0.1;
            assert!(norm <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn nu_hat_examples() {
        let call = crate::analytics::closed_form_greeks(&VanillaSpec::call(100.0, 1.0), 0.0, 100.0, 0.2).unwrap();
        assert_eq!(nu_hat(&call, 100.0, &[0.0; 4]).unwrap(), 0.0);
        let nh = nu_hat(&call, 100.0, &[0.3, 1.0, 0.0, 0.7]).unwrap();
        assert_eq!(nh, -(1e4 * call.d_ss) / (2.0 * call.d_sigma));
    }

    #[test]
    fn target_drift_expansion() {
        let p = problem();
        for st in states() {
            let snap = p.snapshot(&st).unwrap();
            let lead = dot(&snap.v, &snap.perturbation.zeta);
            let rem = |psi: f64| (drift_bv(&snap, &candidate_control(&snap, &band(), psi)) - lead * psi) / (psi * psi);
            let (r1, r2) = (rem(1e-2), rem(1e-3));
            assert!(
                (r1 - r2).abs() <= 0.05 * r1.abs().max(1e-8 * snap.v[0].abs()),
                "{r1} {r2}"
            );
        }
    }

    #[test]
    fn continuity_in_implied_vol() {
        let p = problem();
        let jump = |n: usize| {
            let mut worst: f64 = 0.0;
            let mut prev: Option<ControlVector> = None;
            for i in 0..=n {
                let sigma = 0.15 + 0.1 * i as f64 / n as f64;
                let snap = p.snapshot(&MarketState::new(0.3, 95.0, sigma)).unwrap();
                let z = modified_control(&snap, &band(), 0.1).unwrap();
                if let Some(q) = prev {
                    for (a, b) in z.as_array().iter().zip(q.as_array().iter()) {
                        worst = worst.max((a - b).abs());
                    }
                }
                prev = Some(z);
            }
            worst
        };
        let (coarse, fine) = (jump(100), jump(1000));
        assert!(fine < 0.2 * coarse, "{coarse} {fine}");
    }

    #[test]
    fn box_threshold() {
        let p = problem();
        let bounds = ControlBox {
            nu: (-0.5, 0.5),
            sigma: (0.01, 1.0),
            eta: (-1.0, 1.0),
            xi_max: 1.0,
        };
        let sts = states();
        let psi0 = validity_threshold(&p, &sts, &band(), &bounds, 10.0).unwrap();
        assert!(psi0 > 0.0 && psi0 < 10.0);
        let inside = |psi: f64| {
            sts.iter()
                .all(|s| bounds.contains(&modified_control(&p.snapshot(s).unwrap(), &band(), psi).unwrap()))
        };
        assert!(inside(psi0));
        assert!(!inside(psi0 * 1.001));
        let z = ControlVector {
            xi: 2.0,
            ..reference_control(0.2)
        };
        assert!(matches!(
            bounds.check(&z),
            Err(Error::ControlOutOfBox { coordinate: "ξ", .. })
        ));
    }
}
