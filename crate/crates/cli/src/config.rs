//! Flags, the flat `key=value` config file, and their resolution into a
//! [`RunConfig`]. Command-line flags win over the config file, which wins
//! over the built-in defaults.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thinfilm::evolution::EvolutionConfig;
use thinfilm::steady_state::ModelParams;

pub const OUTPUT_ENV: &str = "THINFILM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "thinfilm-out";

#[derive(Debug, Parser)]
#[command(
    name = "thinfilm",
    version,
    about = "Thin-film steady states, evolution and convergence diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Energy minimizer of the given mass, with its certificates.
    Steady,
    /// Regularized evolution from an initial profile.
    Evolve,
    /// Invariant checks, reported as JSON groups.
    Verify,
    /// Minimizers (and optionally evolutions) over an (alpha, mass) grid.
    Sweep,
    /// Mass against support half-length for each alpha.
    MassTau,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Evolve => "evolve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::MassTau => "mass-tau",
        }
    }
}

/// Every flag is optional so that unset flags can fall back to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Geometric constant alpha (comma-separated list for sweep and mass-tau).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Mass (comma-separated list for sweep).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mass: Option<String>,
    /// Mobility exponent.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub n: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<String>,
    /// Number of grid points (even, at least 16).
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Initial profile: const:<c>, steady, steady+perturb:<amplitude> or file:<path>.
    #[arg(long, global = true)]
    pub u0: Option<String>,
    #[arg(long, global = true)]
    pub tfinal: Option<String>,
    /// Mobility regularization.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    /// Initial time step.
    #[arg(long, global = true)]
    pub dt: Option<String>,
    #[arg(long = "dt-min", global = true)]
    pub dt_min: Option<String>,
    #[arg(long = "dt-max", global = true)]
    pub dt_max: Option<String>,
    /// Comma-separated snapshot times (default: log-spaced up to tfinal).
    #[arg(long, global = true)]
    pub snapshots: Option<String>,
    /// Output directory (default: $THINFILM_OUTPUT_DIR or ./thinfilm-out).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Number of tau samples per mass-tau curve.
    #[arg(long, global = true)]
    pub samples: Option<String>,
    /// Relative perturbation of the minimizer coefficient used by verify.
    #[arg(long = "inject-perturbation", global = true, num_args = 0..=1, default_missing_value = "0.1")]
    pub inject_perturbation: Option<String>,
    /// Flat key=value file whose keys mirror the long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "mass",
    "n",
    "omega",
    "grid",
    "u0",
    "tfinal",
    "eps",
    "dt",
    "dt-min",
    "dt-max",
    "snapshots",
    "output",
    "seed",
    "samples",
    "inject-perturbation",
];

pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("config line {}: expected key=value, got '{raw}'", i + 1))?;
        let k = k.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&k.as_str()) {
            bail!("config line {}: unknown key '{k}'", i + 1);
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

impl Options {
    /// Fills unset flags from the config file, if one was given.
    pub fn merge_config(mut self) -> Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let map = parse_config_file(&text)?;
        let fill = |slot: &mut Option<String>, key: &str| {
            if slot.is_none() {
                *slot = map.get(key).cloned();
            }
        };
        fill(&mut self.alpha, "alpha");
        fill(&mut self.mass, "mass");
        fill(&mut self.n, "n");
        fill(&mut self.omega, "omega");
        fill(&mut self.grid, "grid");
        fill(&mut self.u0, "u0");
        fill(&mut self.tfinal, "tfinal");
        fill(&mut self.eps, "eps");
        fill(&mut self.dt, "dt");
        fill(&mut self.dt_min, "dt-min");
        fill(&mut self.dt_max, "dt-max");
        fill(&mut self.snapshots, "snapshots");
        fill(&mut self.seed, "seed");
        fill(&mut self.samples, "samples");
        fill(&mut self.inject_perturbation, "inject-perturbation");
        if self.output.is_none() {
            self.output = map.get("output").map(PathBuf::from);
        }
        Ok(self)
    }
}

fn parse_one<T: FromStr>(name: &str, raw: &Option<String>) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    raw.as_deref()
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("--{name} '{s}': {e}"))
        })
        .transpose()
}

/// Parses a comma-separated list. Accepts `pi` multiples such as `2pi`.
pub fn parse_list(name: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_real(s).with_context(|| format!("--{name}: bad value '{s}'")))
        .collect()
}

fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(coef) = s.strip_suffix("pi") {
        let c = if coef.is_empty() {
            1.0
        } else {
            coef.trim_end_matches('*').parse::<f64>()?
        };
        return Ok(c * PI);
    }
    Ok(s.parse::<f64>()?)
}

fn parse_scalar(name: &str, raw: &Option<String>) -> Result<Option<f64>> {
    match raw {
        None => Ok(None),
        Some(s) => {
            let v = parse_list(name, s)?;
            if v.len() != 1 {
                bail!("--{name} expects a single value for this command, got '{s}'");
            }
            Ok(Some(v[0]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialProfile {
    Const { value: f64 },
    Steady,
    SteadyPerturb { amplitude: f64 },
    File { path: PathBuf },
}

impl FromStr for InitialProfile {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "steady" {
            return Ok(InitialProfile::Steady);
        }
        if let Some(v) = s.strip_prefix("const:") {
            let value = parse_real(v)?;
            if !(value > 0.0 && value.is_finite()) {
                bail!("const initial profile needs a positive value, got {value}");
            }
            return Ok(InitialProfile::Const { value });
        }
        if let Some(v) = s.strip_prefix("steady+perturb:") {
            return Ok(InitialProfile::SteadyPerturb {
                amplitude: parse_real(v)?,
            });
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(InitialProfile::File {
                path: PathBuf::from(p),
            });
        }
        bail!("unknown u0 '{s}'; use const:<c>, steady, steady+perturb:<a> or file:<path>")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelParams,
    pub grid_points: usize,
    pub evolution: Option<EvolutionConfig>,
    pub u0: Option<InitialProfile>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub masses: Vec<f64>,
    pub samples: usize,
    pub inject_perturbation: Option<f64>,
}

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_MASS: f64 = 2.0 * PI;
pub const DEFAULT_N: f64 = 3.0;

/// Landmark snapshot times, `{0, 1e−2, …, 1e3}`,
/// rescaled so that 1e3 maps to `t_final`, merged with ten log-spaced times
/// per decade over the same range.
pub fn default_snapshots(t_final: f64) -> Vec<f64> {
    if t_final <= 0.0 {
        return vec![0.0];
    }
    let scale = t_final / 1e3;
    let mut times = vec![0.0];
    for k in 0..=50 {
        times.push(scale * 10f64.powf(-2.0 + k as f64 / 10.0));
    }
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    *times.last_mut().unwrap() = t_final;
    times
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

pub fn resolve(command: Command, opts: Options) -> Result<RunConfig> {
    let opts = opts.merge_config()?;
    let multi = matches!(command, Command::Sweep | Command::MassTau);
    let alphas = match &opts.alpha {
        Some(s) => parse_list("alpha", s)?,
        None if command == Command::MassTau => vec![0.5, 1.0, 2.0],
        None => vec![DEFAULT_ALPHA],
    };
    let masses = match &opts.mass {
        Some(s) => parse_list("mass", s)?,
        None if command == Command::Sweep => vec![PI, 2.0 * PI, 4.0 * PI],
        None => vec![DEFAULT_MASS],
    };
    if !multi && (alphas.len() != 1 || masses.len() != 1) {
        bail!("{} takes a single --alpha and --mass", command.name());
    }
    let n = parse_scalar("n", &opts.n)?.unwrap_or(DEFAULT_N);
    let omega = parse_scalar("omega", &opts.omega)?.unwrap_or(0.0);
    let default_grid = match command {
        Command::Steady | Command::Verify | Command::Sweep => 1024,
        _ => 256,
    };
    let grid_points = parse_one::<usize>("grid", &opts.grid)?.unwrap_or(default_grid);
    if grid_points < 16 || grid_points % 2 != 0 {
        bail!("--grid must be even and >= 16, got {grid_points}");
    }
    let u0 = opts
        .u0
        .as_deref()
        .map(InitialProfile::from_str)
        .transpose()?;
    let mut mass = masses.first().copied().unwrap_or(DEFAULT_MASS);
    if let Some(InitialProfile::Const { value }) = &u0 {
        let implied = 2.0 * PI * value;
        if opts.mass.is_some() && (implied - mass).abs() > 1e-9 * implied {
            log::warn!("--mass {mass} ignored: const:{value} fixes the mass to {implied}");
        }
        mass = implied;
    }
    let alpha = alphas.first().copied().unwrap_or(DEFAULT_ALPHA);
    let model = if multi {
        ModelParams {
            alpha,
            n,
            omega,
            mass,
        }
    } else {
        ModelParams::new(alpha, n, omega, mass)?
    };
    if multi {
        for &a in &alphas {
            if !(a > 0.0 && a.is_finite()) {
                bail!("invalid parameter: alpha must be > 0 (alpha = 0 is not supported), got {a}");
            }
        }
    }

    let tfinal = parse_one::<f64>("tfinal", &opts.tfinal)?;
    let wants_evolution =
        command == Command::Evolve || (command == Command::Sweep && tfinal.is_some());
    let evolution = if wants_evolution {
        let t_final = tfinal.unwrap_or(1.0);
        let mut cfg = EvolutionConfig::new(model, t_final);
        if let Some(v) = parse_one("eps", &opts.eps)? {
            cfg.eps = v;
        }
        if let Some(v) = parse_one("dt", &opts.dt)? {
            cfg.dt_initial = v;
        }
        if let Some(v) = parse_one("dt-min", &opts.dt_min)? {
            cfg.dt_min = v;
        }
        if let Some(v) = parse_one("dt-max", &opts.dt_max)? {
            cfg.dt_max = v;
        }
        cfg.dt_initial = cfg.dt_initial.clamp(cfg.dt_min, cfg.dt_max.max(cfg.dt_min));
        cfg.snapshot_times = match &opts.snapshots {
            Some(s) => {
                let mut v = parse_list("snapshots", s)?;
                v.sort_by(f64::total_cmp);
                v
            }
            None => default_snapshots(t_final),
        };
        if multi {
            // cell parameters are validated per cell
            let mut probe = cfg.clone();
            probe.params = ModelParams::new(DEFAULT_ALPHA, DEFAULT_N, 0.0, DEFAULT_MASS)?;
            probe.validate()?;
        } else {
            cfg.validate()?;
        }
        Some(cfg)
    } else {
        None
    };

    let samples = parse_one::<usize>("samples", &opts.samples)?.unwrap_or(200);
    if command == Command::MassTau && samples < 2 {
        bail!("--samples must be >= 2, got {samples}");
    }
    let inject_perturbation = parse_one::<f64>("inject-perturbation", &opts.inject_perturbation)?;
    Ok(RunConfig {
        command,
        model,
        grid_points,
        evolution,
        u0,
        output_dir: output_root(opts.output),
        seed: parse_one("seed", &opts.seed)?.unwrap_or(0),
        alphas,
        masses,
        samples,
        inject_perturbation,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options {
            output: Some(PathBuf::from("/tmp/x")),
            ..Options::default()
        }
    }

    #[test]
    fn u0_specifiers() {
        assert_eq!(
            "const:1".parse::<InitialProfile>().unwrap(),
            InitialProfile::Const { value: 1.0 }
        );
        assert_eq!(
            "steady".parse::<InitialProfile>().unwrap(),
            InitialProfile::Steady
        );
        assert_eq!(
            "steady+perturb:0.25".parse::<InitialProfile>().unwrap(),
            InitialProfile::SteadyPerturb { amplitude: 0.25 }
        );
        assert_eq!(
            "file:a/b.csv".parse::<InitialProfile>().unwrap(),
            InitialProfile::File {
                path: "a/b.csv".into()
            }
        );
        assert!("const:-1".parse::<InitialProfile>().is_err());
        assert!("bump".parse::<InitialProfile>().is_err());
    }

    #[test]
    fn lists_accept_pi_multiples() {
        let v = parse_list("mass", "pi, 2pi,4*pi,20").unwrap();
        assert_eq!(v, vec![PI, 2.0 * PI, 4.0 * PI, 20.0]);
        assert!(parse_list("mass", "1,x").is_err());
        assert!(parse_list("alpha", "").unwrap().is_empty());
    }

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# comment\nalpha = 0.5\ndt_max=0.1 # trailing\n\n").unwrap();
        assert_eq!(m["alpha"], "0.5");
        assert_eq!(m["dt-max"], "0.1");
        assert!(parse_config_file("bogus=1").is_err());
        assert!(parse_config_file("alpha").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let path = std::env::temp_dir().join(format!("thinfilm-cfg-{}.txt", std::process::id()));
        fs::write(&path, "alpha=0.5\nmass=20\ngrid=128\n").unwrap();
        let o = Options {
            config: Some(path.clone()),
            grid: Some("64".into()),
            ..opts()
        };
        let cfg = resolve(Command::Steady, o).unwrap();
        assert_eq!(cfg.model.alpha, 0.5);
        assert_eq!(cfg.model.mass, 20.0);
        assert_eq!(cfg.grid_points, 64);
        fs::remove_file(&path).unwrap();
    }

    #[test]
    fn const_profile_fixes_mass() {
        let o = Options {
            u0: Some("const:1".into()),
            tfinal: Some("10".into()),
            ..opts()
        };
        let cfg = resolve(Command::Evolve, o).unwrap();
        assert!((cfg.model.mass - 2.0 * PI).abs() < 1e-15);
        let ev = cfg.evolution.unwrap();
        assert_eq!(ev.t_final, 10.0);
        assert_eq!(*ev.snapshot_times.last().unwrap(), 10.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad = |o: Options, c: Command| resolve(c, o).is_err();
        assert!(bad(
            Options {
                alpha: Some("0".into()),
                ..opts()
            },
            Command::Steady
        ));
        assert!(bad(
            Options {
                grid: Some("15".into()),
                ..opts()
            },
            Command::Steady
        ));
        assert!(bad(
            Options {
                alpha: Some("0.5,1".into()),
                ..opts()
            },
            Command::Steady
        ));
        assert!(bad(
            Options {
                samples: Some("1".into()),
                ..opts()
            },
            Command::MassTau
        ));
        assert!(bad(
            Options {
                alpha: Some("1,0".into()),
                ..opts()
            },
            Command::MassTau
        ));
    }

    #[test]
    fn default_snapshots_contain_landmark_times() {
        let s = default_snapshots(1e3);
        for t in [0.0, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3] {
            assert!(
                s.iter().any(|x| (x - t).abs() <= 1e-9 * t.max(1.0)),
                "missing {t}"
            );
        }
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(default_snapshots(0.0), vec![0.0]);
        let short = default_snapshots(2.0);
        assert_eq!(*short.last().unwrap(), 2.0);
        assert!((short[1] - 2e-5).abs() < 1e-15);
    }
}
