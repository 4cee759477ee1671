use proptest::prelude::*;
use uvhedge_core::analytics::{closed_form_greeks, european_greeks, european_value, VanillaSpec};
use uvhedge_core::controls::{drift_bc, drift_bc_scale, modified_control, VolBand};
use uvhedge_core::problem::Problem;
use uvhedge_core::vgvv::{dot, perturbation, PenaltyWeights};
use uvhedge_core::MarketState;

fn spec() -> impl Strategy<Value = VanillaSpec> {
    (0usize..5, 70.0f64..130.0, 0.5f64..2.0, -1.5f64..2.5).prop_map(|(kind, k, tau, p)| match kind {
        0 => VanillaSpec::call(k, tau),
        1 => VanillaSpec::put(k, tau),
        2 => VanillaSpec::smooth_put(k, tau),
        3 => VanillaSpec::power(k, p, tau),
        _ => VanillaSpec::log_contract(tau),
    })
}

/// Five-point central difference.
fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

fn weights() -> impl Strategy<Value = PenaltyWeights> {
    (0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0, 0.01f64..10.0)
        .prop_map(|(a, b, c, d)| PenaltyWeights::new(a, b, c, d).unwrap())
}

fn vector() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-50.0f64..50.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn quadrature_greeks_match_differences(spec in spec(), frac in 0.0f64..0.8, s in 60.0f64..140.0, sigma in 0.1f64..0.5) {
        let t = frac * spec.maturity;
        let g = european_greeks(&spec, t, s, sigma).unwrap();
        let (hs, hv) = (1e-3 * s, 1e-3);
        let v = |s: f64, sg: f64| european_value(&spec, t, s, sg).unwrap();
        let gr = |s: f64, sg: f64| closed_form_greeks(&spec, t, s, sg).unwrap();
        let fd_s = central(|x| v(x, sigma), s, hs);
        let fd_v = central(|x| v(s, x), sigma, hv);
        let fd_ss = central(|x| gr(x, sigma).d_s, s, hs);
        let fd_sv = central(|x| gr(s, x).d_s, sigma, hv);
        let fd_vv = central(|x| gr(s, x).d_sigma, sigma, hv);
        let scale = g.value.abs().max(1.0);
        let checks = [
            (g.d_s, fd_s, scale / s),
            (g.d_sigma, fd_v, scale),
            (g.d_ss, fd_ss, scale / (s * s)),
            (g.d_s_sigma, fd_sv, scale / s),
            (g.d_sigma_sigma, fd_vv, scale),
        ];
        for (i, (a, b, floor)) in checks.iter().enumerate() {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(*floor), "{spec:?} entry {i}: {a} vs {b}");
        }
    }

    #[test]
    fn perturbation_is_feasible(c in vector(), v in vector(), w in weights()) {
        prop_assume!(c[..3].iter().any(|x| x.abs() > 1e-3));
        let p = perturbation(&c, &v, &w).unwrap();
        let z = p.zeta;
        let scale = c.iter().zip(&z).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1e-300);
        prop_assert!(dot(&c, &z).abs() <= 1e-12 * scale.max(w.max() * dot(&c, &c).sqrt() * dot(&v, &v).sqrt()));
        prop_assert!(z[3] >= 0.0);
        prop_assert!(p.pair.mu >= 0.0);
        prop_assert!(p.pair.mu * z[3] == 0.0);
        prop_assert!(p.g >= 0.0);
        let psi = w.as_array();
        let quad: f64 = (0..4).map(|i| z[i] * z[i] / psi[i]).sum();
        prop_assert!((quad - p.g).abs() <= 1e-10 * p.g.max(1e-300));
        let vz = dot(&v, &z);
        let vz_scale: f64 = (0..4).map(|i| (v[i] * z[i]).abs()).sum();
        prop_assert!((vz - p.g).abs() <= 1e-10 * vz_scale.max(1e-300));
        prop_assert!(p.g <= w.max() * dot(&v, &v) * (1.0 + 1e-12));
    }

    #[test]
    fn weights_scale_the_source(c in vector(), v in vector(), w in weights(), k in 0.1f64..10.0) {
        prop_assume!(c[..3].iter().any(|x| x.abs() > 1e-3));
        let a = perturbation(&c, &v, &w).unwrap();
        let b = perturbation(&c, &v, &w.scaled(k)).unwrap();
        prop_assert!((b.g - k * a.g).abs() <= 1e-10 * (k * a.g).max(1e-12 * w.max() * dot(&v, &v)));
    }

    #[test]
    fn modified_control_is_driftless(frac in 0.0f64..0.95, s in 60.0f64..150.0, sigma in 0.11f64..0.39,
                                     k in 80.0f64..120.0, psi in 0.0f64..0.3, w in weights()) {
        let p = Problem::new(VanillaSpec::call(100.0, 1.5), VanillaSpec::smooth_put(k, 1.0), w).unwrap();
        let st = MarketState::new(frac, s, sigma);
        let snap = p.snapshot(&st).unwrap();
        let z = modified_control(&snap, &VolBand::new(0.1, 0.4).unwrap(), psi).unwrap();
        let b = drift_bc(&snap.call, s, sigma, &z);
        prop_assert!(b.abs() <= 1e-12 * drift_bc_scale(&snap.call, s, sigma, &z).max(1e-300));
        prop_assert!(z.xi >= 0.0);
    }

    #[test]
    fn put_call_parity_everywhere(k in 70.0f64..130.0, tau in 0.2f64..2.0, frac in 0.0f64..0.99, s in 50.0f64..160.0, sigma in 0.05f64..0.6) {
        let t = frac * tau;
        let c = european_value(&VanillaSpec::call(k, tau), t, s, sigma).unwrap();
        let p = european_value(&VanillaSpec::put(k, tau), t, s, sigma).unwrap();
        prop_assert!(((c - p) - (s - k)).abs() <= 1e-12 * s.max(k));
    }
}
