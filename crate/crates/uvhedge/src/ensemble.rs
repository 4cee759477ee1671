//! Path ensembles: the Monte Carlo cash equivalent, the penalised objective,
//! the value-expansion fit and the discrete-hedging error study.

use serde::Serialize;
use uvhedge_core::analytics::{closed_form_value, ValueSurface};
use uvhedge_core::cashequiv::feynman_kac_path;
use uvhedge_core::controls::ControlRule;
use uvhedge_core::problem::Problem;
use uvhedge_core::simulator::{run_path, simulate_path, Market, Outcome, Strategy, Utility};

use crate::error::{Error, Result};
use crate::mc::{column, map_units, Estimate, McConfig};

/// Everything a simulation needs besides the Monte Carlo settings.
#[derive(Clone, Debug)]
pub struct Experiment<V> {
    pub problem: Problem<V>,
    pub market: Market,
    pub utility: Utility,
    /// Initial capital `Y₀`.
    pub y0: f64,
}

impl<V: ValueSurface + Sync> Experiment<V> {
    /// `w̃₀ = ½E[∫₀ᵀ g̃ dt]` under the reference model.
    pub fn cash_equivalent_mc(&self, mc: &McConfig) -> Result<Estimate> {
        let m = &self.market;
        let rows = map_units(mc, |id, src| {
            let mut n = src.draws();
            let i = feynman_kac_path(&self.problem, m.s0, m.sigma0, m.a0, mc.steps, id, || n.draw())?;
            Ok(vec![0.5 * i])
        })?;
        Ok(Estimate::from_samples(&column(&rows, 0)))
    }

    fn outcomes(
        &self,
        rule: &ControlRule,
        strategies: &[Strategy],
        steps: usize,
        id: u64,
        src: crate::mc::NormalSource,
    ) -> Result<([Outcome; 3], f64)> {
        let mut out = [Outcome::default(); 3];
        let mut n = src.draws();
        let g = run_path(
            &self.problem,
            rule,
            strategies,
            &self.market,
            steps,
            &self.utility,
            self.y0,
            id,
            || n.pair(),
            &mut out[..strategies.len()],
        )?;
        Ok((out, g))
    }

    /// Each strategy against the modified control at a single `ψ`.
    pub fn hedge_sim(&self, psi: f64, strategies: &[Strategy], mc: &McConfig) -> Result<HedgeSimReport> {
        check_strategies(strategies)?;
        let rule = ControlRule::Modified { psi };
        let k = strategies.len();
        let rows = map_units(mc, |id, src| {
            let (out, g) = self.outcomes(&rule, strategies, mc.steps, id, src)?;
            let mut row = Vec::with_capacity(3 * k + 1);
            for o in &out[..k] {
                row.extend([o.objective(&self.utility, psi), o.y_terminal, o.max_excursion]);
            }
            row.push(0.5 * g);
            Ok(row)
        })?;
        let results = strategies
            .iter()
            .enumerate()
            .map(|(i, s)| StrategyResult {
                strategy: strategy_name(*s),
                objective: Estimate::from_samples(&column(&rows, 3 * i)),
                terminal_pnl: Estimate::from_samples(&column(&rows, 3 * i + 1)),
                max_excursion: Estimate::from_samples(&column(&rows, 3 * i + 2)),
            })
            .collect();
        Ok(HedgeSimReport {
            psi,
            utility_at_y0: self.utility.u(self.y0),
            strategies: results,
            half_source_integral: Estimate::from_samples(&column(&rows, 3 * k)),
        })
    }

    /// Objective of the delta-vega hedge against the modified control over a
    /// `ψ` grid, with the first-order fit `(J − U(Y₀))/(−U′(Y₀)) ≈ b + w ψ`.
    ///
    /// All `ψ` share the same draws on a path, so the fit is done path by path
    /// and its coefficients get honest standard errors. With a challenger the
    /// paired differences `J_challenger − J_delta-vega` are reported too.
    pub fn expansion_report(
        &self,
        psi_grid: &[f64],
        mc: &McConfig,
        challenger: Option<Strategy>,
        w0: Option<f64>,
    ) -> Result<ExpansionReport> {
        check_psi_grid(psi_grid)?;
        let m = psi_grid.len();
        let mut strategies = vec![Strategy::DeltaVega];
        strategies.extend(challenger);
        let u0 = self.utility.u(self.y0);
        let du0 = self.utility.du(self.y0);
        let xbar = psi_grid.iter().sum::<f64>() / m as f64;
        let sxx: f64 = psi_grid.iter().map(|p| (p - xbar) * (p - xbar)).sum();
        let rows = map_units(mc, |id, src| {
            let mut x = Vec::with_capacity(m);
            let mut diff = Vec::with_capacity(m);
            let mut jc = Vec::with_capacity(m);
            for &psi in psi_grid {
                let (out, _) = self.outcomes(&ControlRule::Modified { psi }, &strategies, mc.steps, id, src)?;
                let j = out[0].objective(&self.utility, psi);
                x.push((j - u0) / -du0);
                if strategies.len() > 1 {
                    let c = out[1].objective(&self.utility, psi);
                    jc.push(c);
                    diff.push(c - j);
                }
            }
            let ybar = x.iter().sum::<f64>() / m as f64;
            let sxy: f64 = psi_grid.iter().zip(&x).map(|(p, y)| (p - xbar) * (y - ybar)).sum();
            let slope = sxy / sxx;
            let mut row = x;
            row.push(slope);
            row.push(ybar - slope * xbar);
            row.extend(jc);
            row.extend(diff);
            Ok(row)
        })?;
        let mut points = Vec::with_capacity(m);
        for (j, &psi) in psi_grid.iter().enumerate() {
            let x = Estimate::from_samples(&column(&rows, j));
            let objective = Estimate {
                mean: u0 - du0 * x.mean,
                stderr: du0 * x.stderr,
                samples: x.samples,
            };
            let (challenger, difference) = if challenger.is_some() {
                (
                    Some(Estimate::from_samples(&column(&rows, m + 2 + j))),
                    Some(Estimate::from_samples(&column(&rows, 2 * m + 2 + j))),
                )
            } else {
                (None, None)
            };
            points.push(ExpansionPoint {
                psi,
                objective,
                scaled: x,
                challenger,
                difference,
            });
        }
        let slope = Estimate::from_samples(&column(&rows, m));
        let intercept = Estimate::from_samples(&column(&rows, m + 1));
        let ybar = points.iter().map(|p| p.scaled.mean).sum::<f64>() / m as f64;
        let sst: f64 = points.iter().map(|p| (p.scaled.mean - ybar).powi(2)).sum();
        let sse: f64 = points
            .iter()
            .map(|p| (p.scaled.mean - intercept.mean - slope.mean * p.psi).powi(2))
            .sum();
        let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { f64::NAN };
        Ok(ExpansionReport {
            utility_at_y0: u0,
            marginal_utility_at_y0: du0,
            challenger: challenger.map(strategy_name),
            points,
            slope,
            intercept,
            r_squared,
            w0,
            slope_relative_error: w0.map(|w| (slope.mean - w) / w),
        })
    }

    /// `max_t |Y_t − Y₀|` of the delta-vega hedge under the reference model
    /// on nested time grids. Every level sees the same Brownian path: the
    /// finest grid's increments are summed in blocks for the coarser ones.
    pub fn excursion_study(&self, coarsest: usize, levels: usize, paths: u64, seed: u64) -> Result<ExcursionStudy> {
        if coarsest == 0 || levels < 2 {
            return Err(Error::config(
                "numerics.steps",
                "need a positive step count and at least two levels",
            ));
        }
        let finest = coarsest << (levels - 1);
        let mc = McConfig {
            paths,
            steps: finest,
            seed,
            antithetic: false,
        };
        let rows = map_units(&mc, |id, src| {
            let mut n = src.draws();
            let fine: Vec<f64> = (0..finest).map(|_| n.draw()).collect();
            let mut row = Vec::with_capacity(levels);
            for l in 0..levels {
                let steps = coarsest << l;
                let block = finest / steps;
                let scale = 1.0 / (block as f64).sqrt();
                let mut k = 0;
                let mut out = [Outcome::default()];
                run_path(
                    &self.problem,
                    &ControlRule::Reference,
                    &[Strategy::DeltaVega],
                    &self.market,
                    steps,
                    &self.utility,
                    self.y0,
                    id,
                    || {
                        let z: f64 = fine[k..k + block].iter().sum::<f64>() * scale;
                        k += block;
                        (z, 0.0)
                    },
                    &mut out,
                )?;
                row.push(out[0].max_excursion);
            }
            Ok(row)
        })?;
        let horizon = self.problem.horizon();
        let levels: Vec<ExcursionLevel> = (0..levels)
            .map(|l| {
                let col = column(&rows, l);
                ExcursionLevel {
                    steps: coarsest << l,
                    dt: horizon / (coarsest << l) as f64,
                    mean: Estimate::from_samples(&col),
                    worst: col.iter().cloned().fold(0.0, f64::max),
                }
            })
            .collect();
        let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.dt.ln(), l.mean.mean.ln())).collect();
        let worst: Vec<(f64, f64)> = levels.iter().map(|l| (l.dt.ln(), l.worst.ln())).collect();
        Ok(ExcursionStudy {
            slope: fit_line(&pts).1,
            worst_slope: fit_line(&worst).1,
            levels,
        })
    }

    /// `𝒞(T, S_T, Σ_T) − 𝒞(0, S₀, Σ₀)` under a control rule; a local
    /// martingale call price has mean zero.
    pub fn call_drift(&self, rule: &ControlRule, mc: &McConfig) -> Result<Estimate> {
        let call = self.problem.call;
        let st0 = self.market.initial_state();
        let c0 = closed_form_value(&call, 0.0, st0.s, st0.sigma)?;
        let rows = map_units(mc, |id, src| {
            let mut n = src.draws();
            let path = simulate_path(&self.problem, rule, &self.market, mc.steps, id, || n.pair())?;
            let last = path.states.last().expect("at least one state");
            Ok(vec![closed_form_value(&call, last.t, last.s, last.sigma)? - c0])
        })?;
        Ok(Estimate::from_samples(&column(&rows, 0)))
    }
}

/// Least squares `y = a + b x`; returns `(a, b)`.
pub fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn check_strategies(s: &[Strategy]) -> Result<()> {
    if s.is_empty() || s.len() > 3 {
        return Err(Error::config("strategies", "between one and three strategies"));
    }
    Ok(())
}

pub fn check_psi_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::config("penalty.psi_grid", "needs at least four points"));
    }
    if grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::config("penalty.psi_grid", "values must be positive and finite"));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if hi == lo {
        return Err(Error::config(
            "penalty.psi_grid",
            "all values equal; the fit is degenerate",
        ));
    }
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::config("penalty.psi_grid", "must span at least a decade"));
    }
    Ok(())
}

pub fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::DeltaVega => "delta-vega",
        Strategy::DeltaOnly => "delta",
        Strategy::Unhedged => "unhedged",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyResult {
    pub strategy: &'static str,
    pub objective: Estimate,
    pub terminal_pnl: Estimate,
    pub max_excursion: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct HedgeSimReport {
    pub psi: f64,
    pub utility_at_y0: f64,
    pub strategies: Vec<StrategyResult>,
    /// `½∫g̃ dt` along the simulated (modified-control) paths.
    pub half_source_integral: Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionPoint {
    pub psi: f64,
    /// `J^ψ` of the delta-vega hedge.
    pub objective: Estimate,
    /// `(J^ψ − U(Y₀))/(−U′(Y₀))`.
    pub scaled: Estimate,
    pub challenger: Option<Estimate>,
    /// Paired `J_challenger − J_delta-vega`.
    pub difference: Option<Estimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub utility_at_y0: f64,
    pub marginal_utility_at_y0: f64,
    pub challenger: Option<&'static str>,
    pub points: Vec<ExpansionPoint>,
    pub slope: Estimate,
    pub intercept: Estimate,
    pub r_squared: f64,
    /// Independently computed cash equivalent, when supplied.
    pub w0: Option<f64>,
    pub slope_relative_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExcursionLevel {
    pub steps: usize,
    pub dt: f64,
    pub mean: Estimate,
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExcursionStudy {
    pub levels: Vec<ExcursionLevel>,
    /// Log-log slope of the mean excursion against `Δt`.
    pub slope: f64,
    /// Same for the worst path.
    pub worst_slope: f64,
}
