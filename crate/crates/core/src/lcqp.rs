//! Closed-form solution of
//!
//! ```text
//! minimise ½ zᵀDz − vᵀz   subject to   cᵀz = 0,  z_n ≥ 0
//! ```
//!
//! for diagonal positive `D`, with its dual multipliers. The sign-constrained
//! coordinate is always the last one.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Ratios `d_max / d_min` above this are flagged on the solution.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct QpInstance {
    d: Vec<f64>,
    v: Vec<f64>,
    c: Vec<f64>,
}

impl QpInstance {
    pub fn new(d: Vec<f64>, v: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if n < 2 {
            return Err(Error::InvalidInstance("dimension must be at least 2"));
        }
        if v.len() != n || c.len() != n {
            return Err(Error::InvalidInstance("d, v and c must have equal length"));
        }
        if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInstance("diagonal entries must be positive and finite"));
        }
        if v.iter().chain(&c).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInstance("v and c must be finite"));
        }
        if c[..n - 1].iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInstance("c must have a nonzero entry before the last"));
        }
        Ok(Self { d, v, c })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn condition(&self) -> f64 {
        let (lo, hi) = self
            .d
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi / lo
    }

    /// `½ zᵀDz − vᵀz`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.d)
            .zip(&self.v)
            .map(|((z, d), v)| 0.5 * d * z * z - v * z)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z_star: Vec<f64>,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub primal_value: f64,
    /// Whether the sign constraint binds in the multiplier formula.
    pub active: bool,
    /// `d_max / d_min` exceeded [`CONDITION_WARNING`].
    pub ill_conditioned: bool,
}

pub fn solve(inst: &QpInstance) -> QpSolution {
    let n = inst.n();
    let last = n - 1;
    let (d, v, c) = (&inst.d, &inst.v, &inst.c);
    // Sums over the unconstrained coordinates; adding the last term gives the
    // full quadratic forms. Keeping them apart avoids cancellation when the
    // sign constraint is active.
    let mut cv_head = 0.0;
    let mut cc_head = 0.0;
    for i in 0..last {
        cv_head += c[i] * v[i] / d[i];
        cc_head += c[i] * c[i] / d[i];
    }
    let cv = cv_head + c[last] * v[last] / d[last];
    let cc = cc_head + c[last] * c[last] / d[last];
    let lambda_free = cv / cc;
    let active = v[last] - lambda_free * c[last] < 0.0;
    let lambda = if active { cv_head / cc_head } else { lambda_free };
    let resid = v[last] - lambda * c[last];
    let mu = (-resid).max(0.0);
    let mut z: Vec<f64> = (0..n).map(|i| (v[i] - lambda * c[i]) / d[i]).collect();
    z[last] = (resid + mu) / d[last];
    let primal_value = -0.5 * v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
    QpSolution {
        z_star: z,
        lambda_star: lambda,
        mu_star: mu,
        primal_value,
        active,
        ill_conditioned: inst.condition() > CONDITION_WARNING,
    }
}

/// `−½ (v − λc + μeₙ)ᵀ D⁻¹ (v − λc + μeₙ)`.
pub fn dual_value(inst: &QpInstance, lambda: f64, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::domain("μ", mu));
    }
    let last = inst.n() - 1;
    let mut acc = 0.0;
    for i in 0..inst.n() {
        let mut r = inst.v[i] - lambda * inst.c[i];
        if i == last {
            r += mu;
        }
        acc += r * r / inst.d[i];
    }
    Ok(-0.5 * acc)
}

/// Residuals of the optimality system, each scaled to be dimensionless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub sign: f64,
    pub multiplier_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.sign)
            .max(self.multiplier_sign)
            .max(self.complementarity)
    }
}

pub fn kkt_residuals(inst: &QpInstance, sol: &QpSolution) -> KktResiduals {
    let n = inst.n();
    let last = n - 1;
    let z = &sol.z_star;
    let vn = norm(&inst.v);
    let cn = norm(&inst.c);
    let zn = norm(z);
    let dmax = inst.d.iter().cloned().fold(0.0, f64::max);
    let mut stat: f64 = 0.0;
    let mut stat_scale = vn;
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        let mut r = inst.d[i] * z[i] - inst.v[i] + sol.lambda_star * inst.c[i];
        if i == last {
            r -= sol.mu_star;
        }
        stat = stat.max(libm::fabs(r));
        stat_scale = stat_scale
            .max(libm::fabs(inst.d[i] * z[i]))
            .max(libm::fabs(sol.lambda_star * inst.c[i]));
    }
    let cz: f64 = inst.c.iter().zip(z).map(|(a, b)| a * b).sum();
    let unit = |x: f64| if x > 0.0 { x } else { 1.0 };
    let zscale = unit(zn.max(vn / dmax));
    KktResiduals {
        stationarity: stat / unit(stat_scale),
        feasibility: libm::fabs(cz) / unit(cn * zscale),
        sign: (-z[last]).max(0.0) / zscale,
        multiplier_sign: (-sol.mu_star).max(0.0),
        complementarity: libm::fabs(sol.mu_star * z[last]) / unit(vn * zscale),
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    libm::sqrt(x.iter().map(|a| a * a).sum())
}

/// Euclidean projection onto `{cᵀz = 0, z_n ≥ 0}`.
fn project(c: &[f64], c_head_sq: f64, c_sq: f64, y: &mut [f64]) {
    let last = y.len() - 1;
    let t: f64 = c.iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>() / c_sq;
    if y[last] - t * c[last] >= 0.0 {
        for (yi, ci) in y.iter_mut().zip(c) {
            *yi -= t * ci;
        }
        return;
    }
    y[last] = 0.0;
    let t: f64 = c[..last].iter().zip(y[..last].iter()).map(|(a, b)| a * b).sum::<f64>() / c_head_sq;
    for (yi, ci) in y[..last].iter_mut().zip(&c[..last]) {
        *yi -= t * ci;
    }
}

/// Projected gradient descent, independent of the closed form. Stops when an
/// iteration moves `z` by less than `1e-13 (1 + ‖z‖)`.
pub fn oracle_solve(inst: &QpInstance, iterations: usize, step: f64) -> Result<QpSolution> {
    if !(step > 0.0) {
        return Err(Error::domain("step", step));
    }
    let n = inst.n();
    let last = n - 1;
    let c_head_sq: f64 = inst.c[..last].iter().map(|x| x * x).sum();
    let c_sq = c_head_sq + inst.c[last] * inst.c[last];
    let mut z = alloc::vec![0.0; n];
    let mut next = alloc::vec![0.0; n];
    let mut moved = f64::INFINITY;
    let mut converged = false;
    for _ in 0..iterations {
        for i in 0..n {
            next[i] = z[i] - step * (inst.d[i] * z[i] - inst.v[i]);
        }
        project(&inst.c, c_head_sq, c_sq, &mut next);
        let mut diff = 0.0;
        let mut size = 0.0;
        for i in 0..n {
            diff += (next[i] - z[i]) * (next[i] - z[i]);
            size += next[i] * next[i];
        }
        core::mem::swap(&mut z, &mut next);
        moved = libm::sqrt(diff);
        if moved <= 1e-13 * (1.0 + libm::sqrt(size)) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::OracleFailure {
            iterations,
            last_step: moved,
        });
    }
    // multipliers from stationarity, least squares over the free coordinates
    let g: Vec<f64> = (0..n).map(|i| inst.d[i] * z[i] - inst.v[i]).collect();
    let lambda = -g[..last].iter().zip(&inst.c[..last]).map(|(a, b)| a * b).sum::<f64>() / c_head_sq;
    let mu = (g[last] + lambda * inst.c[last]).max(0.0);
    let primal_value = inst.objective(&z);
    Ok(QpSolution {
        z_star: z,
        lambda_star: lambda,
        mu_star: mu,
        primal_value,
        active: mu > 0.0,
        ill_conditioned: inst.condition() > CONDITION_WARNING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit(n: usize, i: usize, k: f64) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = k;
        e
    }

    #[test]
    fn already_feasible_projection() {
        let inst = QpInstance::new(vec![1.0; 4], unit(4, 3, 1.0), unit(4, 0, 1.0)).unwrap();
        let sol = solve(&inst);
        assert_eq!(sol.z_star, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(sol.lambda_star, 0.0);
        assert_eq!(sol.mu_star, 0.0);
        assert_eq!(sol.primal_value, -0.5);
    }

    #[test]
    fn clipped_last_coordinate() {
        let inst = QpInstance::new(vec![1.0; 4], unit(4, 3, -1.0), unit(4, 0, 1.0)).unwrap();
        let sol = solve(&inst);
        assert!(sol.z_star.iter().all(|z| *z == 0.0));
        assert_eq!(sol.lambda_star, 0.0);
        assert_eq!(sol.mu_star, 1.0);
        assert_eq!(sol.primal_value, 0.0);
        let oracle = oracle_solve(&inst, 10_000, 1.0).unwrap();
        assert!(oracle.z_star.iter().all(|z| z.abs() < 1e-12));
    }

    #[test]
    fn collinear_data_gives_zero() {
        let c = vec![0.3, -1.2, 0.7, 0.5];
        let v: Vec<f64> = c.iter().map(|x| 2.5 * x).collect();
        let sol = solve(&QpInstance::new(vec![1.0, 2.0, 3.0, 4.0], v, c).unwrap());
        assert!((sol.lambda_star - 2.5).abs() < 1e-15);
        assert!(sol.z_star.iter().all(|z| z.abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(QpInstance::new(vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(QpInstance::new(vec![1.0, -1.0], vec![1.0; 2], vec![1.0; 2]).is_err());
        assert!(QpInstance::new(vec![1.0; 3], vec![1.0; 3], vec![0.0, 0.0, 1.0]).is_err());
        let ok = QpInstance::new(vec![1.0; 2], vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(dual_value(&ok, 0.0, -1.0).is_err());
    }

    #[test]
    fn flags_poor_conditioning() {
        let inst = QpInstance::new(vec![1.0, 1e9], vec![1.0; 2], vec![1.0; 2]).unwrap();
        assert!(solve(&inst).ill_conditioned);
    }

    #[test]
    fn huge_negative_last_component_is_clipped() {
        let inst = QpInstance::new(vec![1.0, 2.0, 3.0], vec![0.1, 0.2, -1e6], vec![1.0, 1.0, 1.0]).unwrap();
        let sol = solve(&inst);
        assert_eq!(sol.z_star[2], 0.0);
        let oracle = oracle_solve(&inst, 100_000, 1.0 / 3.0).unwrap();
        assert!(oracle.z_star[2].abs() < 1e-9);
    }
}
