//! Gaussian quadrature for expectations of functions of a standard normal.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Nodes and weights of a Gauss rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Hermite rule normalised for the standard normal density: the weights
/// sum to one and `Σ wᵢ f(xᵢ) ≈ E[f(X)]`, `X ~ N(0,1)`.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1);
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let pim4 = 1.0 / libm::pow(PI, 0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -0.16667),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / jf) * p2 - libm::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if libm::fabs(z - z1) <= 1e-14 * libm::fabs(z).max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let scale = 1.0 / libm::sqrt(PI);
    GaussRule {
        nodes: x.iter().map(|v| v * core::f64::consts::SQRT_2).collect(),
        weights: w.iter().map(|v| v * scale).collect(),
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if libm::fabs(z - z1) <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    GaussRule { nodes: x, weights: w }
}

/// Where an integrand loses smoothness, in standard-normal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Feature {
    /// A kink at `x`.
    Kink(f64),
    /// A smooth transition layer of the given width.
    Layer { center: f64, width: f64 },
}

const LEGENDRE_ORDER: usize = 16;
const HALF_WIDTH: f64 = 12.0;

/// Computes `E[f(X) Xᵏ]` for `k = 0..=4`.
///
/// Integrands without features use Gauss–Hermite with `nodes` points. Otherwise
/// the truncated line `[-12, 12]` is cut at every feature and integrated with
/// composite Gauss–Legendre on `nodes / 2` base panels, refined across layers.
#[derive(Clone, Debug)]
pub struct NormalIntegrator {
    nodes: usize,
    hermite: GaussRule,
    legendre: GaussRule,
}

impl NormalIntegrator {
    pub fn new(nodes: usize) -> Self {
        assert!(nodes >= 4, "at least four quadrature nodes");
        Self {
            nodes,
            hermite: gauss_hermite(nodes),
            legendre: gauss_legendre(LEGENDRE_ORDER),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn moments<F: Fn(f64) -> f64>(&self, f: F, features: &[Feature]) -> [f64; 5] {
        if features.is_empty() {
            let mut m = [0.0; 5];
            for (&x, &w) in self.hermite.nodes.iter().zip(&self.hermite.weights) {
                accumulate(&mut m, x, w * f(x));
            }
            return m;
        }
        let cuts = self.cuts(features);
        let norm = 1.0 / libm::sqrt(2.0 * PI);
        let mut m = [0.0; 5];
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&u, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
                let x = mid + half * u;
                let dens = norm * libm::exp(-0.5 * x * x);
                accumulate(&mut m, x, w * half * dens * f(x));
            }
        }
        m
    }

    fn cuts(&self, features: &[Feature]) -> Vec<f64> {
        let panels = (self.nodes / 2).max(2);
        let h = 2.0 * HALF_WIDTH / panels as f64;
        let mut cuts: Vec<f64> = (0..=panels).map(|i| -HALF_WIDTH + h * i as f64).collect();
        for feature in features {
            match *feature {
                Feature::Kink(x) => cuts.push(x),
                Feature::Layer { center, width } => {
                    let step = (0.5 * width).min(h);
                    let reach = (12.0 * width).min(2.0 * HALF_WIDTH);
                    let count = libm::ceil(reach / step) as i64;
                    for k in -count..=count {
                        cuts.push(center + step * k as f64);
                    }
                }
            }
        }
        cuts.retain(|x| x.is_finite() && libm::fabs(*x) <= HALF_WIDTH);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| libm::fabs(*a - *b) < 1e-12);
        cuts
    }
}

impl Default for NormalIntegrator {
    fn default() -> Self {
        Self::new(64)
    }
}

fn accumulate(m: &mut [f64; 5], x: f64, fw: f64) {
    let mut p = fw;
    for slot in m.iter_mut() {
        *slot += p;
        p *= x;
    }
}
