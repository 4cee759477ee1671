//! TOML experiment configuration. Parsing is two-staged: serde reads the raw
//! blocks, then [`RawConfig::validate`] checks every module invariant and
//! names the offending field.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uvhedge_core::analytics::{ForwardStart, Negated, OptionSpec, ValueSurface, VanillaSpec};
use uvhedge_core::cashequiv::PdeGrid;
use uvhedge_core::controls::{ControlBox, VolBand};
use uvhedge_core::problem::Problem;
use uvhedge_core::simulator::{Market, Strategy, Utility};
use uvhedge_core::vgvv::PenaltyWeights;

use crate::ensemble::{check_psi_grid, Experiment};
use crate::error::{Error, Result};
use crate::mc::McConfig;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub market: MarketBlock,
    pub call: InstrumentBlock,
    pub target: InstrumentBlock,
    pub penalty: PenaltyBlock,
    #[serde(default)]
    pub utility: UtilityBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketBlock {
    pub s0: f64,
    pub sigma0: f64,
    /// Initial auxiliary state; defaults to `s0`.
    pub a0: Option<f64>,
    /// `[Σ̲, Σ̄]`.
    pub band: [f64; 2],
    pub bounds: Option<BoundsBlock>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    pub nu: [f64; 2],
    pub sigma: [f64; 2],
    pub eta: [f64; 2],
    pub xi_max: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Call,
    Put,
    SmoothPut,
    Power,
    LogContract,
    ForwardStart,
}

/// Which side of the target the hedger holds.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Short the target (has sold it); quotes an ask.
    #[default]
    Seller,
    /// Long the target; quotes a bid.
    Buyer,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstrumentBlock {
    pub kind: Kind,
    pub maturity: f64,
    pub strike: Option<f64>,
    pub exponent: Option<f64>,
    pub reset: Option<f64>,
    pub side: Option<Side>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PenaltyBlock {
    /// `(ψ_ν, ψ_σ, ψ_η, ψ_ξ)`.
    pub weights: [f64; 4],
    #[serde(default)]
    pub psi: f64,
    pub psi_grid: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum UtilityName {
    #[default]
    Exponential,
    ShiftedPower,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UtilityBlock {
    #[serde(default)]
    pub kind: UtilityName,
    #[serde(default = "one")]
    pub a: f64,
    pub shift: Option<f64>,
    #[serde(default)]
    pub y0: f64,
}

impl Default for UtilityBlock {
    fn default() -> Self {
        Self {
            kind: UtilityName::Exponential,
            a: 1.0,
            shift: None,
            y0: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Pde,
    Mc,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Challenger {
    Delta,
    Unhedged,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "default_grid_nodes")]
    pub pde_nodes: usize,
    #[serde(default = "default_grid_nodes")]
    pub pde_steps: usize,
    #[serde(default = "default_span")]
    pub pde_span: f64,
    #[serde(default)]
    pub route: Route,
    pub challenger: Option<Challenger>,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            steps: default_steps(),
            seed: 0,
            antithetic: false,
            pde_nodes: default_grid_nodes(),
            pde_steps: default_grid_nodes(),
            pde_span: default_span(),
            route: Route::Both,
            challenger: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_paths() -> u64 {
    100_000
}
fn default_steps() -> usize {
    250
}
fn default_grid_nodes() -> usize {
    400
}
fn default_span() -> f64 {
    6.0
}

/// A checked configuration, ready to run.
#[derive(Clone, Debug)]
pub struct Config {
    pub raw: RawConfig,
    pub market: Market,
    pub call: VanillaSpec,
    pub target: OptionSpec,
    pub side: Side,
    pub weights: PenaltyWeights,
    pub psi: f64,
    pub psi_grid: Option<Vec<f64>>,
    pub utility: Utility,
    pub y0: f64,
    pub mc: McConfig,
    pub grid: PdeGrid,
    pub route: Route,
    pub challenger: Option<Strategy>,
}

pub type Target = Box<dyn ValueSurface + Send + Sync>;

impl Config {
    /// Hex SHA-256 of the effective configuration (after command-line
    /// overrides), in canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&self.raw).expect("config serialises");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    /// The hedger's liability: `V` for a seller, `−V` for a buyer.
    pub fn liability(&self) -> Target {
        match self.side {
            Side::Seller => Box::new(self.target),
            Side::Buyer => Box::new(Negated(self.target)),
        }
    }

    pub fn experiment(&self) -> Result<Experiment<Target>> {
        let problem = Problem::new(self.call, self.liability(), self.weights)
            .map_err(|e| Error::config("call.maturity", e.to_string()))?;
        Ok(Experiment {
            problem,
            market: self.market,
            utility: self.utility,
            y0: self.y0,
        })
    }
}

pub fn parse(text: &str) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "(document)".to_string());
        Error::config(at, msg)
    })
}

pub fn load(path: &std::path::Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

fn positive(path: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {x}")))
    }
}

fn need(path: &str, x: Option<f64>) -> Result<f64> {
    x.ok_or_else(|| Error::config(path, "required for this kind"))
}

fn forbid(path: &str, present: bool) -> Result<()> {
    if present {
        return Err(Error::config(path, "not used by this kind"));
    }
    Ok(())
}

fn instrument(block: &InstrumentBlock, at: &str) -> Result<OptionSpec> {
    let p = |f: &str| format!("{at}.{f}");
    let maturity = positive(&p("maturity"), block.maturity)?;
    let k = block.kind;
    forbid(&p("exponent"), block.exponent.is_some() && k != Kind::Power)?;
    forbid(&p("reset"), block.reset.is_some() && k != Kind::ForwardStart)?;
    forbid(
        &p("strike"),
        block.strike.is_some() && matches!(k, Kind::LogContract | Kind::ForwardStart),
    )?;
    let strike = || positive(&p("strike"), need(&p("strike"), block.strike)?);
    let spec = match k {
        Kind::Call => VanillaSpec::call(strike()?, maturity).into(),
        Kind::Put => VanillaSpec::put(strike()?, maturity).into(),
        Kind::SmoothPut => VanillaSpec::smooth_put(strike()?, maturity).into(),
        Kind::Power => {
            let e = need(&p("exponent"), block.exponent)?;
            if !e.is_finite() {
                return Err(Error::config(p("exponent"), "must be finite"));
            }
            VanillaSpec::power(strike()?, e, maturity).into()
        }
        Kind::LogContract => VanillaSpec::log_contract(maturity).into(),
        Kind::ForwardStart => {
            let reset = need(&p("reset"), block.reset)?;
            ForwardStart::new(reset, maturity)
                .map_err(|_| Error::config(p("reset"), "must lie strictly inside (0, maturity)"))?
                .into()
        }
    };
    Ok(spec)
}

fn pair(path: &str, x: [f64; 2]) -> Result<(f64, f64)> {
    if x[0] <= x[1] && !x[0].is_nan() {
        Ok((x[0], x[1]))
    } else {
        Err(Error::config(path, format!("lower bound above upper bound: {x:?}")))
    }
}

impl RawConfig {
    pub fn validate(self) -> Result<Config> {
        let m = &self.market;
        let s0 = positive("market.s0", m.s0)?;
        let sigma0 = positive("market.sigma0", m.sigma0)?;
        let a0 = m.a0.unwrap_or(s0);
        if !a0.is_finite() {
            return Err(Error::config("market.a0", "must be finite"));
        }
        let band =
            VolBand::new(m.band[0], m.band[1]).map_err(|_| Error::config("market.band", "need 0 < lower < upper"))?;
        band.check_initial(sigma0)
            .map_err(|_| Error::config("market.sigma0", "must lie strictly inside market.band"))?;
        let bounds = match &m.bounds {
            None => ControlBox::unbounded(),
            Some(b) => ControlBox {
                nu: pair("market.bounds.nu", b.nu)?,
                sigma: pair("market.bounds.sigma", b.sigma)?,
                eta: pair("market.bounds.eta", b.eta)?,
                xi_max: positive("market.bounds.xi_max", b.xi_max)?,
            },
        };
        bounds
            .check_band(&band)
            .map_err(|_| Error::config("market.bounds.sigma", "must contain the whole band"))?;
        let market = Market {
            s0,
            sigma0,
            a0,
            band,
            bounds,
        };

        let call = match instrument(&self.call, "call")? {
            OptionSpec::Vanilla(v) => v,
            OptionSpec::ForwardStart(_) => {
                return Err(Error::config("call.kind", "the hedging instrument must be a vanilla"))
            }
        };
        forbid("call.side", self.call.side.is_some())?;
        let target = instrument(&self.target, "target")?;
        let side = self.target.side.unwrap_or_default();
        if call.maturity < target.maturity() {
            return Err(Error::config("call.maturity", "must not precede the target's maturity"));
        }

        let w = self.penalty.weights;
        for (i, name) in ["psi_nu", "psi_sigma", "psi_eta", "psi_xi"].iter().enumerate() {
            positive(&format!("penalty.weights[{i}] ({name})"), w[i])?;
        }
        let weights = PenaltyWeights::new(w[0], w[1], w[2], w[3]).expect("checked above");
        let psi = self.penalty.psi;
        if !(psi >= 0.0 && psi.is_finite()) {
            return Err(Error::config("penalty.psi", "must be nonnegative and finite"));
        }
        if let Some(g) = &self.penalty.psi_grid {
            check_psi_grid(g)?;
        }

        let u = &self.utility;
        if !u.y0.is_finite() {
            return Err(Error::config("utility.y0", "must be finite"));
        }
        let utility = match u.kind {
            UtilityName::Exponential => {
                forbid("utility.shift", u.shift.is_some())?;
                Utility::exponential(positive("utility.a", u.a)?)
            }
            UtilityName::ShiftedPower => {
                let shift = positive("utility.shift", need("utility.shift", u.shift)?)?;
                if u.y0 <= -shift {
                    return Err(Error::config("utility.y0", "must exceed −shift"));
                }
                Utility::shifted_power(positive("utility.a", u.a)?, shift)
            }
        };
        let n = &self.numerics;
        let mc = McConfig {
            paths: n.paths,
            steps: n.steps,
            seed: n.seed,
            antithetic: n.antithetic,
        };
        mc.validate()?;
        let grid = PdeGrid {
            space_nodes: n.pde_nodes,
            time_steps: n.pde_steps,
            span_sd: n.pde_span,
        };
        grid.validate().map_err(|e| {
            let field = match e {
                uvhedge_core::Error::InvalidGrid(m) if m.contains("space") => "numerics.pde_nodes",
                uvhedge_core::Error::InvalidGrid(m) if m.contains("time") => "numerics.pde_steps",
                _ => "numerics.pde_span",
            };
            Error::config(field, e.to_string())
        })?;
        let challenger = n.challenger.map(|c| match c {
            Challenger::Delta => Strategy::DeltaOnly,
            Challenger::Unhedged => Strategy::Unhedged,
        });

        Ok(Config {
            market,
            call,
            target,
            side,
            weights,
            psi,
            psi_grid: self.penalty.psi_grid.clone(),
            utility,
            y0: u.y0,
            mc,
            grid,
            route: n.route,
            challenger,
            raw: self,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[market]
s0 = 100.0
sigma0 = 0.2
band = [0.1, 0.4]

[call]
kind = "call"
strike = 100.0
maturity = 2.0

[target]
kind = "smooth_put"
strike = 90.0
maturity = 1.0

[penalty]
weights = [0.5, 1.0, 2.0, 0.25]
psi = 0.1
"#;

    fn field_of(text: &str) -> String {
        match parse(text).and_then(|r| r.validate()) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn base_config_is_valid() {
        let c = parse(BASE).unwrap().validate().unwrap();
        assert_eq!(c.market.a0, 100.0);
        assert_eq!(c.mc.paths, 100_000);
        assert_eq!(c.route, Route::Both);
        assert_eq!(c.hash(), parse(BASE).unwrap().validate().unwrap().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn errors_name_their_field() {
        assert_eq!(field_of(&BASE.replace("sigma0 = 0.2", "sigma0 = 0.5")), "market.sigma0");
        assert_eq!(
            field_of(&BASE.replace("strike = 90.0", "strike = -90.0")),
            "target.strike"
        );
        assert_eq!(
            field_of(&BASE.replace("maturity = 2.0", "maturity = 0.5")),
            "call.maturity"
        );
        assert_eq!(
            field_of(&BASE.replace("[0.5, 1.0, 2.0, 0.25]", "[0.5, 0.0, 2.0, 0.25]")),
            "penalty.weights[1] (psi_sigma)"
        );
        assert_eq!(
            field_of(&BASE.replace("psi = 0.1", "psi_grid = [0.1, 0.1, 0.1, 0.1]")),
            "penalty.psi_grid"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[numerics]\npde_nodes = 10\n")),
            "numerics.pde_nodes"
        );
        assert_eq!(field_of(&format!("{BASE}\n[numerics]\npaths = 0\n")), "numerics.paths");
        assert_eq!(
            field_of(&BASE.replace("kind = \"smooth_put\"", "kind = \"power\"")),
            "target.exponent"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse(&BASE.replace("psi = 0.1", "psi = 0.1\ncolour = 3")).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn buyer_side_negates() {
        let c = parse(&BASE.replace("maturity = 1.0", "maturity = 1.0\nside = \"buyer\""))
            .unwrap()
            .validate()
            .unwrap();
        let st = uvhedge_core::MarketState::new(0.0, 100.0, 0.2);
        let v = c.liability().partials(&st).unwrap().greeks.value;
        assert!(v < 0.0);
    }
}
