//! Scenario configuration: a line-oriented `key = value` format whose keys
//! double as long command-line flags.
//!
//! ```text
//! # ellipse positivity run
//! command = verify-positivity
//! domain = ellipse:5,1
//! h = 0.0078125
//! pairs = 20000
//! ```
//!
//! Blank lines and everything after `#` are ignored; values are unquoted.

use anyhow::{anyhow, bail, Context, Result};
use plate_green::analysis::Regime;
use plate_green::geometry::Ball;
use plate_green::solver::SolveMethod;
use plate_green::{Dimension, DomainKind, DomainSpec, PairStrategy};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kernel,
    Solve,
    VerifyEstimate,
    VerifyPositivity,
    Nehari,
    Blowup,
    Duffin,
    Convergence,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Kernel,
        Command::Solve,
        Command::VerifyEstimate,
        Command::VerifyPositivity,
        Command::Nehari,
        Command::Blowup,
        Command::Duffin,
        Command::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Solve => "solve",
            Command::VerifyEstimate => "verify-estimate",
            Command::VerifyPositivity => "verify-positivity",
            Command::Nehari => "nehari",
            Command::Blowup => "blowup",
            Command::Duffin => "duffin",
            Command::Convergence => "convergence",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Kernel => "Evaluate the exact half-space or ball kernel at one pair",
            Command::Solve => "Compute one discrete Green column and evaluate it at x",
            Command::VerifyEstimate => "Fit the two-sided band constants c1, c2 and check every sample",
            Command::VerifyPositivity => "Estimate the positivity radius and bound the negative part",
            Command::Nehari => "Check the near-diagonal lower bound and report c3",
            Command::Blowup => "Rescale towards a boundary point and compare with the half-plane kernel",
            Command::Duffin => "Reflect clamped data across a flat boundary and measure the residual",
            Command::Convergence => "Grid refinement study of the discrete Green function",
        }
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| anyhow!("unknown command '{s}'"))
    }
}

/// One configuration key; `default: None` means unset unless given.
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key(
        "domain",
        Some("disk:1"),
        "disk:R, ellipse:a,b, limacon:a,b or rect:w,h, optionally @x,y; for n >= 3, ball:R",
    ),
    key("n", Some("2"), "Space dimension"),
    key("h", Some("0.015625"), "Grid spacing for discrete solves"),
    key(
        "h-list",
        Some("0.03125,0.015625,0.0078125"),
        "Decreasing grid spacings for convergence and duffin",
    ),
    key("pairs", Some("1000"), "Number of sampled pairs"),
    key("seed", Some("42"), "Sampling seed"),
    key(
        "strategy",
        Some("boundary-stratified"),
        "Pair sampling: uniform, boundary-stratified or near-diagonal",
    ),
    key(
        "sources",
        Some("64"),
        "Size of the source pool for discrete samples (one solve each)",
    ),
    key(
        "exact",
        Some("false"),
        "Use the exact kernel instead of the grid solver (disk or ball only)",
    ),
    key("epsilon", Some("0.01"), "Margin added to c1 before c2 is fitted"),
    key("tol", Some("1e-10"), "Relative residual tolerance of linear solves"),
    key("method", Some("auto"), "Linear solver: auto, direct or cg"),
    key("delta", Some("0.5"), "Near-diagonal region parameter in (0, 1)"),
    key("geometry", Some("halfspace"), "Kernel geometry: halfspace or ball"),
    key("radius", Some("1"), "Ball radius for the kernel command"),
    key(
        "xi",
        Some("-1,0"),
        "First kernel point, or first rescaled blow-up point",
    ),
    key(
        "eta",
        Some("-2,0"),
        "Second kernel point, or second rescaled blow-up point",
    ),
    key("x", Some("0,0"), "Evaluation point for solve"),
    key("y", Some("0.5,0"), "Source point for solve"),
    key("x0", Some("1,0"), "Boundary point for blow-up"),
    key(
        "regime",
        Some("A"),
        "Blow-up scaling: A (pair distance) or B (boundary distance)",
    ),
    key("steps", Some("4"), "Blow-up steps"),
    key("s0", Some("0.5"), "Blow-up scale of step 0"),
    key("nodes-per-scale", Some("16"), "Blow-up grid nodes per unit of scale"),
    key("node-budget", Some("1000000"), "Largest blow-up solve in unknowns"),
    key(
        "function",
        Some("halfspace"),
        "Duffin input: quadratic (y1^2) or halfspace (kernel slice with pole xi)",
    ),
    key(
        "boundary-tol",
        Some("1e-6"),
        "Relative tolerance of the clamped boundary-data check",
    ),
    key("output", None, "JSON report path"),
    key("csv", None, "CSV dump of samples (or of the field for solve)"),
    key("band-csv", None, "Band plot data for verify-estimate"),
    key(
        "band-axis",
        Some("pair-distance"),
        "Band abscissa: pair-distance or boundary-distance",
    ),
];

/// Keys naming output files; left out of the report's config echo so
/// reruns into different files still compare equal.
const PATH_KEYS: [&str; 3] = ["output", "csv", "band-csv"];

/// Parses the `key = value` text format. Unknown keys are errors.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{line}'", no + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key != "command" && !KEYS.iter().any(|k| k.name == key) {
            bail!("line {}: unknown key '{key}'", no + 1);
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            bail!("line {}: key '{key}' given twice", no + 1);
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Halfspace,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DuffinInput {
    Quadratic,
    Halfspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandAxis {
    PairDistance,
    BoundaryDistance,
}

impl FromStr for BandAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair-distance" => Ok(BandAxis::PairDistance),
            "boundary-distance" => Ok(BandAxis::BoundaryDistance),
            _ => bail!("unknown band axis '{s}'"),
        }
    }
}

/// The region a scenario runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Planar(DomainSpec),
    Ball(Ball),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub command: Command,
    pub region: Region,
    pub n: Dimension,
    pub h: f64,
    pub h_list: Vec<f64>,
    pub pairs: usize,
    pub seed: u64,
    pub strategy: PairStrategy,
    pub sources: usize,
    pub exact: bool,
    pub epsilon: f64,
    pub tol: f64,
    pub method: SolveMethod,
    pub delta: f64,
    pub geometry: Geometry,
    pub radius: f64,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub x0: [f64; 2],
    pub regime: Regime,
    pub steps: usize,
    pub s0: f64,
    pub nodes_per_scale: usize,
    pub node_budget: usize,
    pub function: DuffinInput,
    pub boundary_tol: f64,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub band_csv: Option<PathBuf>,
    pub band_axis: BandAxis,
    /// Every resolved key as text, defaults included.
    pub values: BTreeMap<String, String>,
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("{key}: '{t}' is not a number"))
        })
        .collect()
}

fn parse_point(key: &str, s: &str) -> Result<[f64; 2]> {
    match parse_list(key, s)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => bail!("{key}: expected two comma-separated numbers, got '{s}'"),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{key} must be positive and finite, got {v}")
    }
}

fn parse_region(domain: &str, n: Dimension) -> Result<Region> {
    if n.get() == 2 {
        let spec = domain.strip_prefix("ball:").map(|r| format!("disk:{r}"));
        let spec: DomainSpec = spec.as_deref().unwrap_or(domain).parse()?;
        return Ok(Region::Planar(spec));
    }
    let radius = domain
        .strip_prefix("ball:")
        .or_else(|| domain.strip_prefix("disk:"))
        .ok_or_else(|| anyhow!("dimension {} needs a ball domain 'ball:R', got '{domain}'", n.get()))?;
    let radius: f64 = radius
        .trim()
        .parse()
        .with_context(|| format!("bad ball radius in '{domain}'"))?;
    Ok(Region::Ball(Ball::new(n, radius)?))
}

impl ScenarioConfig {
    /// Resolves keys in order of precedence: `flags`, then `file`, then the
    /// documented defaults.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for key in KEYS {
            let value = flags
                .get(key.name)
                .or_else(|| file.get(key.name))
                .cloned()
                .or_else(|| key.default.map(str::to_string));
            if let Some(v) = value {
                values.insert(key.name.to_string(), v);
            }
        }
        Self::from_values(command, values)
    }

    fn from_values(command: Command, values: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| values.get(k).map(String::as_str).unwrap_or_default();
        fn num<T: FromStr>(key: &str, s: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            s.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse '{s}': {e}"))
        }
        let n = Dimension::new(num::<usize>("n", get("n"))?)?;
        let region = parse_region(get("domain"), n)?;
        let h_list = parse_list("h-list", get("h-list"))?;
        for &h in &h_list {
            positive("h-list entries", h)?;
        }
        let delta: f64 = num("delta", get("delta"))?;
        if !(delta > 0.0 && delta < 1.0) {
            bail!("delta must lie in (0, 1), got {delta}");
        }
        let geometry = match get("geometry") {
            "halfspace" => Geometry::Halfspace,
            "ball" => Geometry::Ball,
            other => bail!("unknown geometry '{other}'"),
        };
        let function = match get("function") {
            "quadratic" => DuffinInput::Quadratic,
            "halfspace" => DuffinInput::Halfspace,
            other => bail!("unknown duffin function '{other}'"),
        };
        let exact = match get("exact") {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            other => bail!("exact: expected true or false, got '{other}'"),
        };
        let path = |k: &str| values.get(k).map(PathBuf::from);
        Ok(ScenarioConfig {
            command,
            region,
            n,
            h: positive("h", num("h", get("h"))?)?,
            h_list,
            pairs: num("pairs", get("pairs"))?,
            seed: num("seed", get("seed"))?,
            strategy: get("strategy").parse()?,
            sources: num("sources", get("sources"))?,
            exact,
            epsilon: positive("epsilon", num("epsilon", get("epsilon"))?)?,
            tol: positive("tol", num("tol", get("tol"))?)?,
            method: get("method").parse()?,
            delta,
            geometry,
            radius: positive("radius", num("radius", get("radius"))?)?,
            xi: parse_list("xi", get("xi"))?,
            eta: parse_list("eta", get("eta"))?,
            x: parse_point("x", get("x"))?,
            y: parse_point("y", get("y"))?,
            x0: parse_point("x0", get("x0"))?,
            regime: get("regime").parse()?,
            steps: num("steps", get("steps"))?,
            s0: positive("s0", num("s0", get("s0"))?)?,
            nodes_per_scale: num("nodes-per-scale", get("nodes-per-scale"))?,
            node_budget: num("node-budget", get("node-budget"))?,
            function,
            boundary_tol: positive("boundary-tol", num("boundary-tol", get("boundary-tol"))?)?,
            output: path("output"),
            csv: path("csv"),
            band_csv: path("band-csv"),
            band_axis: get("band-axis").parse()?,
            values,
        })
    }

    /// The resolved keys without output paths.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut echo = self.values.clone();
        echo.retain(|k, _| !PATH_KEYS.contains(&k.as_str()));
        echo.insert("command".into(), self.command.name().into());
        echo
    }

    pub fn planar(&self) -> Result<&DomainSpec> {
        match &self.region {
            Region::Planar(d) => Ok(d),
            Region::Ball(_) => bail!("{} runs on planar domains only (n = 2)", self.command.name()),
        }
    }

    /// The disk radius when `exact` is usable on a planar domain.
    pub fn exact_disk(&self) -> Result<Option<f64>> {
        if !self.exact {
            return Ok(None);
        }
        match self.planar()?.kind() {
            DomainKind::Disk { radius } => Ok(Some(radius)),
            _ => bail!("exact kernels exist only on disks and balls"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# header\n\ndomain = ellipse:5,1  # trailing\n pairs=200\ncommand = nehari\n";
        let m = parse_config_text(text).unwrap();
        assert_eq!(m["domain"], "ellipse:5,1");
        assert_eq!(m["pairs"], "200");
        assert_eq!(m["command"], "nehari");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config_text("domain disk:1").is_err());
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = map(&[("seed", "7"), ("pairs", "10")]);
        let flags = map(&[("seed", "9")]);
        let c = ScenarioConfig::resolve(Command::VerifyEstimate, &file, &flags).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.pairs, 10);
        assert_eq!(c.h, 0.015625);
    }

    #[test]
    fn every_default_parses() {
        let c = ScenarioConfig::resolve(Command::Kernel, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert_eq!(c.region, Region::Planar(DomainSpec::disk(1.0).unwrap()));
        assert_eq!(c.h_list.len(), 3);
        assert!(c.output.is_none());
        assert!(!c.echo().contains_key("output"));
    }

    #[test]
    fn ball_domains_follow_dimension() {
        let c = ScenarioConfig::resolve(
            Command::Nehari,
            &map(&[("n", "3"), ("domain", "ball:1")]),
            &BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(c.region, Region::Ball(_)));
        assert!(ScenarioConfig::resolve(
            Command::Nehari,
            &map(&[("n", "3"), ("domain", "ellipse:2,1")]),
            &BTreeMap::new()
        )
        .is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            ("domain", "square:1"),
            ("h", "-1"),
            ("delta", "1.5"),
            ("x", "1"),
            ("exact", "maybe"),
            ("n", "1"),
        ];
        for (k, v) in bad {
            assert!(
                ScenarioConfig::resolve(Command::Solve, &map(&[(k, v)]), &BTreeMap::new()).is_err(),
                "{k} = {v}"
            );
        }
    }
}
