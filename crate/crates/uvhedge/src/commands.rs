//! The subcommands. Each takes a validated [`Config`] and returns a
//! [`Report`]; none of them prints.

use serde::Serialize;
use uvhedge_core::analytics::{GreekBundle, ValueSurface};
use uvhedge_core::cashequiv::{cash_equivalent_pde, indifference_ask, PdeGrid};
use uvhedge_core::simulator::Strategy;

use crate::config::{Config, RawConfig, Route, Side, Target};
use crate::ensemble::{strategy_name, Experiment};
use crate::error::{Error, Result};
use crate::mc::Estimate;
use crate::report::{num, Report, Stopwatch, Table};
use crate::selftest;

/// Command-line values that replace their config-file counterparts before
/// validation (and so enter the config hash).
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub route: Option<Route>,
    pub psi_grid: Option<Vec<f64>>,
    pub paths: Option<u64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, raw: &mut RawConfig) {
        if let Some(r) = self.route {
            raw.numerics.route = r;
        }
        if let Some(g) = &self.psi_grid {
            raw.penalty.psi_grid = Some(g.clone());
        }
        if let Some(p) = self.paths {
            raw.numerics.paths = p;
        }
        if let Some(s) = self.steps {
            raw.numerics.steps = s;
        }
        if let Some(s) = self.seed {
            raw.numerics.seed = s;
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Greeks {
    value: f64,
    delta: f64,
    gamma: f64,
    vega: f64,
    vanna: f64,
    volga: f64,
}

impl From<GreekBundle> for Greeks {
    fn from(g: GreekBundle) -> Self {
        Self {
            value: g.value,
            delta: g.d_s,
            gamma: g.d_ss,
            vega: g.d_sigma,
            vanna: g.d_s_sigma,
            volga: g.d_sigma_sigma,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
struct GridEcho {
    space_nodes: usize,
    time_steps: usize,
    span_sd: f64,
}

impl From<PdeGrid> for GridEcho {
    fn from(g: PdeGrid) -> Self {
        Self {
            space_nodes: g.space_nodes,
            time_steps: g.time_steps,
            span_sd: g.span_sd,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CashEquivalent {
    pub route: &'static str,
    pub w0: f64,
    /// Monte Carlo only.
    pub stderr: Option<f64>,
}

fn pde_w0(cfg: &Config, exp: &Experiment<Target>, grid: &PdeGrid) -> Result<f64> {
    let m = &cfg.market;
    Ok(cash_equivalent_pde(&exp.problem, &m.band, m.s0, m.sigma0, grid)?.w0)
}

/// `w̃₀` by the configured route; `both` prefers the PDE where it applies.
fn cash_equivalent(cfg: &Config, exp: &Experiment<Target>) -> Result<CashEquivalent> {
    let use_pde = match cfg.route {
        Route::Pde => true,
        Route::Mc => false,
        Route::Both => !exp.problem.target.path_dependent(),
    };
    if use_pde {
        Ok(CashEquivalent {
            route: "pde",
            w0: pde_w0(cfg, exp, &cfg.grid)?,
            stderr: None,
        })
    } else {
        let e = exp.cash_equivalent_mc(&cfg.mc)?;
        Ok(CashEquivalent {
            route: "mc",
            w0: e.mean,
            stderr: Some(e.stderr),
        })
    }
}

fn uses_mc(c: &CashEquivalent) -> bool {
    c.stderr.is_some()
}

#[derive(Debug, Serialize)]
struct PriceResults {
    side: Side,
    /// Value and greeks of the target itself, whichever side is held.
    target: Greeks,
    call: Greeks,
    cash_equivalent: CashEquivalent,
    psi: f64,
    /// `w̃₀ψ`.
    premium: f64,
    quote: &'static str,
    /// `V₀ + w̃₀ψ` for a seller, `V₀ − w̃₀ψ` for a buyer.
    price: f64,
}

pub fn price(cfg: &Config) -> Result<Report> {
    let clock = Stopwatch::start();
    let exp = cfg.experiment()?;
    let st0 = cfg.market.initial_state();
    let target = cfg.target.partials(&st0)?.greeks;
    let call = exp.problem.call_greeks(&st0)?;
    let ce = cash_equivalent(cfg, &exp)?;
    let premium = ce.w0 * cfg.psi;
    let (quote, price) = match cfg.side {
        Side::Seller => ("ask", indifference_ask(target.value, ce.w0, cfg.psi)?),
        // the buyer's liability is −V, whose ask is −bid
        Side::Buyer => ("bid", -indifference_ask(-target.value, ce.w0, cfg.psi)?),
    };
    let results = PriceResults {
        side: cfg.side,
        target: target.into(),
        call: call.into(),
        cash_equivalent: ce,
        psi: cfg.psi,
        premium,
        quote,
        price,
    };
    let seed = uses_mc(&ce).then_some(cfg.mc.seed);
    clock.finish("price", Some(cfg.hash()), seed, results, None)
}

#[derive(Debug, Serialize)]
struct PdeResult {
    w0: f64,
    grid: GridEcho,
    refined: Option<Refinement>,
}

#[derive(Debug, Serialize)]
struct Refinement {
    w0: f64,
    grid: GridEcho,
    relative_change: f64,
}

#[derive(Debug, Serialize)]
struct McResult {
    w0: f64,
    stderr: f64,
    paths: u64,
    steps: usize,
    antithetic: bool,
}

#[derive(Debug, Serialize)]
struct Discrepancy {
    absolute: f64,
    relative: f64,
    /// `max(3·stderr, 1%·|w̃₀^PDE|)`.
    tolerance: f64,
    within: bool,
}

#[derive(Debug, Serialize)]
struct CashEquivResults {
    route: Route,
    pde: Option<PdeResult>,
    mc: Option<McResult>,
    discrepancy: Option<Discrepancy>,
}

pub fn cashequiv(cfg: &Config, refine: bool) -> Result<Report> {
    let clock = Stopwatch::start();
    let exp = cfg.experiment()?;
    let pde = match cfg.route {
        Route::Pde | Route::Both => {
            let w0 = pde_w0(cfg, &exp, &cfg.grid)?;
            let refined = if refine {
                let g = cfg.grid.refined();
                let w = pde_w0(cfg, &exp, &g)?;
                Some(Refinement {
                    w0: w,
                    grid: g.into(),
                    relative_change: if w == w0 {
                        0.0
                    } else {
                        (w - w0).abs() / w0.abs().max(w.abs())
                    },
                })
            } else {
                None
            };
            Some(PdeResult {
                w0,
                grid: cfg.grid.into(),
                refined,
            })
        }
        Route::Mc => None,
    };
    let mc = match cfg.route {
        Route::Mc | Route::Both => {
            let e = exp.cash_equivalent_mc(&cfg.mc)?;
            Some(McResult {
                w0: e.mean,
                stderr: e.stderr,
                paths: cfg.mc.paths,
                steps: cfg.mc.steps,
                antithetic: cfg.mc.antithetic,
            })
        }
        Route::Pde => None,
    };
    let discrepancy = match (&pde, &mc) {
        (Some(p), Some(m)) => {
            let absolute = (p.w0 - m.w0).abs();
            let tolerance = (3.0 * m.stderr).max(0.01 * p.w0.abs());
            Some(Discrepancy {
                absolute,
                relative: if absolute == 0.0 { 0.0 } else { absolute / p.w0.abs() },
                tolerance,
                within: absolute <= tolerance,
            })
        }
        _ => None,
    };
    let seed = mc.as_ref().map(|_| cfg.mc.seed);
    let results = CashEquivResults {
        route: cfg.route,
        pde,
        mc,
        discrepancy,
    };
    clock.finish("cashequiv", Some(cfg.hash()), seed, results, None)
}

#[derive(Debug, Serialize)]
struct SweepResults {
    cash_equivalent: CashEquivalent,
    expansion: crate::ensemble::ExpansionReport,
}

pub fn sweep(cfg: &Config) -> Result<Report> {
    let clock = Stopwatch::start();
    let grid = cfg
        .psi_grid
        .as_deref()
        .ok_or_else(|| Error::config("penalty.psi_grid", "required by sweep (or pass --psi-grid)"))?;
    let exp = cfg.experiment()?;
    let ce = cash_equivalent(cfg, &exp)?;
    let rep = exp.expansion_report(grid, &cfg.mc, cfg.challenger, Some(ce.w0))?;
    let mut headers = vec!["psi", "objective", "objective_stderr", "scaled", "scaled_stderr"];
    if cfg.challenger.is_some() {
        headers.extend(["challenger", "challenger_stderr", "difference", "difference_stderr"]);
    }
    let mut table = Table::new(headers);
    for p in &rep.points {
        let mut row = vec![
            num(p.psi),
            num(p.objective.mean),
            num(p.objective.stderr),
            num(p.scaled.mean),
            num(p.scaled.stderr),
        ];
        if let (Some(c), Some(d)) = (p.challenger, p.difference) {
            row.extend([num(c.mean), num(c.stderr), num(d.mean), num(d.stderr)]);
        }
        table.push(row);
    }
    let results = SweepResults {
        cash_equivalent: ce,
        expansion: rep,
    };
    clock.finish("sweep", Some(cfg.hash()), Some(cfg.mc.seed), results, Some(table))
}

pub fn hedge_sim(cfg: &Config) -> Result<Report> {
    let clock = Stopwatch::start();
    let exp = cfg.experiment()?;
    let strategies = [Strategy::DeltaVega, Strategy::DeltaOnly, Strategy::Unhedged];
    let rep = exp.hedge_sim(cfg.psi, &strategies, &cfg.mc)?;
    let mut table = Table::new([
        "strategy",
        "objective",
        "objective_stderr",
        "terminal_pnl",
        "terminal_pnl_stderr",
        "max_excursion",
        "max_excursion_stderr",
    ]);
    for r in &rep.strategies {
        let cols = |e: &Estimate| [num(e.mean), num(e.stderr)];
        let mut row = vec![r.strategy.to_string()];
        row.extend(cols(&r.objective));
        row.extend(cols(&r.terminal_pnl));
        row.extend(cols(&r.max_excursion));
        table.push(row);
    }
    debug_assert_eq!(rep.strategies[0].strategy, strategy_name(Strategy::DeltaVega));
    clock.finish("hedge-sim", Some(cfg.hash()), Some(cfg.mc.seed), rep, Some(table))
}

pub fn selftest(fault: Option<&str>) -> Result<Report> {
    let clock = Stopwatch::start();
    let res = selftest::run(fault)?;
    let mut table = Table::new(["property", "measured", "tolerance", "passed"]);
    for p in &res.properties {
        table.push(vec![
            p.name.to_string(),
            num(p.measured),
            num(p.tolerance),
            p.passed.to_string(),
        ]);
    }
    let failed: Vec<&str> = res.properties.iter().filter(|p| !p.passed).map(|p| p.name).collect();
    let mut report = clock.finish("selftest", None, Some(selftest::SEED), res, Some(table))?;
    if !failed.is_empty() {
        report.failure = Some(format!("failed properties: {}", failed.join(", ")));
    }
    Ok(report)
}
