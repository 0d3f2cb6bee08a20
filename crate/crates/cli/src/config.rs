//! Run configuration: flags layered over an optional JSON file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Solve2d,
    Flow,
    Blaschke,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Solve2d => "solve2d",
            Command::Flow => "flow",
            Command::Blaschke => "blaschke",
            Command::Spectrum => "spectrum",
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Torus dimension n.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// metrisable | sym-shift | random[:AMP] | near-metrisable[:EPS] | cubic[:C]
    #[arg(long)]
    pub structure: Option<String>,
    /// flat | conformal[:AMP] | random[:AMP]
    #[arg(long)]
    pub metric: Option<String>,
    /// Cubic differential: const | const:RE,IM | wave
    #[arg(long)]
    pub c: Option<String>,
}

/// Keys accepted in a `--config` file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub dim: Option<usize>,
    #[serde(alias = "N")]
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub structure: Option<String>,
    pub metric: Option<String>,
    pub c: Option<String>,
    /// Tolerance overrides keyed by check id.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    Flat,
    /// `exp(2f) delta` with a random band-limited `f` of the given amplitude.
    Conformal(f64),
    /// Random positive-definite metric of the given amplitude.
    Random(Option<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CubicKind {
    Const(Complex64),
    /// `c = cos x`, not holomorphic.
    Wave,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StructureKind {
    /// The Levi-Civita connection of the metric.
    Metrisable,
    /// Levi-Civita connection shifted by `Sym(beta)` for a random one-form.
    SymShift,
    Random(f64),
    NearMetrisable(f64),
    Cubic(CubicKind),
}

fn split_arg(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((head, arg)) => (head, Some(arg)),
        None => (s, None),
    }
}

fn parse_number(what: &str, s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{what}: '{s}' is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{what}: expected a non-negative number, got {s}"))
    }
}

impl FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match split_arg(s) {
            ("flat", None) => Ok(MetricKind::Flat),
            ("conformal", arg) => Ok(MetricKind::Conformal(arg.map_or(Ok(0.3), |a| parse_number("metric", a))?)),
            ("random" | "random-spd", arg) => {
                Ok(MetricKind::Random(arg.map(|a| parse_number("metric", a)).transpose()?))
            }
            _ => Err(format!("unknown metric '{s}' (expected flat, conformal[:AMP] or random[:AMP])")),
        }
    }
}

impl FromStr for CubicKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match split_arg(s) {
            ("const", None) => Ok(CubicKind::Const(Complex64::new(1.0, 0.5))),
            ("const", Some(arg)) => {
                let (re, im) = arg.split_once(',').ok_or_else(|| format!("expected const:RE,IM, got '{s}'"))?;
                let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("'{v}' is not a number"));
                Ok(CubicKind::Const(Complex64::new(parse(re)?, parse(im)?)))
            }
            ("wave", None) => Ok(CubicKind::Wave),
            _ => Err(format!("unknown cubic differential '{s}' (expected const, const:RE,IM or wave)")),
        }
    }
}

impl FromStr for StructureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match split_arg(s) {
            ("metrisable", None) => Ok(StructureKind::Metrisable),
            ("sym-shift", None) => Ok(StructureKind::SymShift),
            ("random", arg) => Ok(StructureKind::Random(arg.map_or(Ok(0.3), |a| parse_number("structure", a))?)),
            ("near-metrisable", arg) => {
                Ok(StructureKind::NearMetrisable(arg.map_or(Ok(0.05), |a| parse_number("structure", a))?))
            }
            ("cubic", None) => Ok(StructureKind::Cubic(CubicKind::from_str("const")?)),
            ("cubic", Some(c)) => Ok(StructureKind::Cubic(CubicKind::from_str(c)?)),
            _ => Err(format!(
                "unknown structure '{s}' (expected metrisable, sym-shift, random[:AMP], near-metrisable[:EPS] or cubic[:C])"
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub structure: StructureKind,
    pub metric: MetricKind,
    pub c: CubicKind,
    pub out: PathBuf,
    pub overrides: BTreeMap<String, f64>,
}

struct Defaults {
    dim: usize,
    n: fn(usize) -> usize,
    tol: f64,
    max_iter: usize,
    structure: &'static str,
    metric: &'static str,
}

fn defaults(command: Command) -> Defaults {
    let by_dim: fn(usize) -> usize = |d| if d == 2 { 32 } else { 16 };
    match command {
        Command::Verify => Defaults { dim: 2, n: by_dim, tol: 0.0, max_iter: 0, structure: "random", metric: "random" },
        Command::Solve2d => {
            Defaults { dim: 2, n: |_| 64, tol: 1e-8, max_iter: 2000, structure: "random", metric: "random" }
        }
        Command::Flow => {
            Defaults { dim: 3, n: |_| 16, tol: 1e-6, max_iter: 500, structure: "near-metrisable", metric: "random" }
        }
        Command::Blaschke => {
            Defaults { dim: 2, n: |_| 32, tol: 1e-9, max_iter: 0, structure: "cubic", metric: "flat" }
        }
        Command::Spectrum => {
            Defaults { dim: 3, n: |_| 12, tol: 1e-8, max_iter: 0, structure: "random", metric: "random" }
        }
    }
}

fn usage<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

impl RunConfig {
    pub fn resolve(command: Command, args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(c) = &file.command {
            if c != command.name() {
                return Err(CliError::Usage(format!("config is for '{c}', not '{}'", command.name())));
            }
        }
        let d = defaults(command);
        let dim = args.dim.or(file.dim).unwrap_or(d.dim);
        if dim < 2 {
            return Err(CliError::Usage(format!("--dim must be at least 2, got {dim}")));
        }
        let n = args.n.or(file.n).unwrap_or((d.n)(dim));
        if n < 8 || n % 2 != 0 {
            return Err(CliError::Usage(format!("--n must be even and at least 8, got {n}")));
        }
        let tol = args.tol.or(file.tol).unwrap_or(d.tol);
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!("--tol must be non-negative, got {tol}")));
        }
        let structure = args.structure.clone().or(file.structure).unwrap_or_else(|| d.structure.to_string());
        let metric = args.metric.clone().or(file.metric).unwrap_or_else(|| d.metric.to_string());
        let c = args.c.clone().or(file.c).unwrap_or_else(|| "const".to_string());
        Ok(RunConfig {
            command,
            dim,
            n,
            seed: args.seed.or(file.seed).unwrap_or(0),
            tol,
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(d.max_iter),
            structure: usage(structure.parse())?,
            metric: usage(metric.parse())?,
            c: usage(c.parse())?,
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("projlab-out")),
            overrides: file.overrides,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"dim": 3, "n": 12, "seed": 5, "metric": "flat"}"#).unwrap();
        let args = CommonArgs { config: Some(path), n: Some(16), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Spectrum, &args).unwrap();
        assert_eq!((cfg.dim, cfg.n, cfg.seed), (3, 16, 5));
        assert_eq!(cfg.metric, MetricKind::Flat);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"dimension": 3}"#).unwrap();
        let args = CommonArgs { config: Some(path), ..Default::default() };
        assert!(matches!(RunConfig::resolve(Command::Verify, &args), Err(CliError::Usage(_))));
    }

    #[test]
    fn parses_specs() {
        assert_eq!("conformal:0.1".parse::<MetricKind>().unwrap(), MetricKind::Conformal(0.1));
        assert_eq!("random".parse::<MetricKind>().unwrap(), MetricKind::Random(None));
        assert_eq!(
            "cubic:const:2,-1".parse::<StructureKind>().unwrap(),
            StructureKind::Cubic(CubicKind::Const(Complex64::new(2.0, -1.0)))
        );
        assert_eq!("near-metrisable".parse::<StructureKind>().unwrap(), StructureKind::NearMetrisable(0.05));
        assert!("spiral".parse::<StructureKind>().is_err());
        assert!("conformal:-1".parse::<MetricKind>().is_err());
    }
}
