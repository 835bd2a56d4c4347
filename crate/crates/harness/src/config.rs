//! Run configuration: per-experiment defaults, `key=value` overrides and
//! validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pfdesign::estimation::EstimatorKind;
use pfdesign::optimize::Objective;

use crate::{config_err, HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    PassiveSweep,
    UniformSweep,
    ActiveCompare,
    ConstrainedSweep,
    MisspecifiedSweep,
    FractionalCompare,
    Emulate,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::PassiveSweep,
        Experiment::UniformSweep,
        Experiment::ActiveCompare,
        Experiment::ConstrainedSweep,
        Experiment::MisspecifiedSweep,
        Experiment::FractionalCompare,
        Experiment::Emulate,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::PassiveSweep => "passive_sweep",
            Experiment::UniformSweep => "uniform_sweep",
            Experiment::ActiveCompare => "active_compare",
            Experiment::ConstrainedSweep => "constrained_sweep",
            Experiment::MisspecifiedSweep => "misspecified_sweep",
            Experiment::FractionalCompare => "fractional_compare",
            Experiment::Emulate => "emulate",
        }
    }

    /// Sweeps whose grid holds ℓ∞ distances rather than dosage values.
    fn sweeps_distance(self) -> bool {
        matches!(
            self,
            Experiment::PassiveSweep | Experiment::ConstrainedSweep | Experiment::MisspecifiedSweep
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == norm)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Dosage policy compared in `active_compare`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Optimal,
    Random,
    Half,
    Partial,
}

impl Strategy {
    pub fn id(self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::Random => "random",
            Strategy::Half => "half",
            Strategy::Partial => "partial",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Strategy {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Strategy::Optimal),
            "random" => Ok(Strategy::Random),
            "half" => Ok(Strategy::Half),
            "partial" => Ok(Strategy::Partial),
            other => config_err(format!(
                "unknown strategy `{other}` (expected optimal, random, half or partial)"
            )),
        }
    }
}

/// Fully resolved settings of one run.
///
/// `p`, `n` and `k_assumed` are lists: an experiment runs one series per
/// entry of the longest list, and single-entry lists are broadcast.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub p: Vec<usize>,
    pub k: usize,
    pub k_assumed: Vec<usize>,
    pub n: Vec<usize>,
    pub rounds: usize,
    pub sigma: f64,
    /// Supply budget `L` for the constrained sweep.
    pub budget: f64,
    pub trials: usize,
    pub dosages: usize,
    /// ℓ∞ distances, or dosage values for `uniform_sweep`.
    pub grid: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    pub out: PathBuf,
    pub estimator: EstimatorKind,
    /// Replaces `‖β‖` as the estimator's norm bound.
    pub bound: Option<f64>,
    pub comparators: usize,
    pub target: Option<PathBuf>,
    /// Acquisition objective; by default chosen from `p`.
    pub objective: Option<Objective>,
    pub restarts: usize,
}

/// Keys accepted by [`RunConfig::set`], in manifest order.
pub const KEYS: [&str; 19] = [
    "p",
    "k",
    "k-assumed",
    "n",
    "rounds",
    "sigma",
    "budget",
    "trials",
    "dosages",
    "grid",
    "strategies",
    "seed",
    "out",
    "estimator",
    "bound",
    "comparators",
    "target",
    "objective",
    "restarts",
];

const DISTANCES: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = RunConfig {
            experiment,
            p: vec![10],
            k: 2,
            k_assumed: vec![],
            n: vec![200],
            rounds: 1,
            sigma: 1.0,
            budget: 2.0,
            trials: 20,
            dosages: 1,
            grid: vec![],
            strategies: vec![],
            seed: 0,
            out: PathBuf::from("results").join(experiment.id()),
            estimator: EstimatorKind::TruncatedOls,
            bound: None,
            comparators: 100,
            target: None,
            objective: None,
            restarts: 5,
        };
        match experiment {
            Experiment::PassiveSweep => RunConfig {
                dosages: 100,
                grid: DISTANCES.to_vec(),
                ..base
            },
            Experiment::UniformSweep => RunConfig {
                trials: 500,
                grid: vec![0.40, 0.45, 0.50, 0.55, 0.60],
                ..base
            },
            Experiment::ActiveCompare => RunConfig {
                p: vec![15],
                n: vec![75],
                rounds: 10,
                strategies: vec![Strategy::Optimal, Strategy::Random, Strategy::Half],
                ..base
            },
            Experiment::ConstrainedSweep => RunConfig {
                p: vec![8, 9, 10],
                n: vec![1000],
                trials: 40,
                dosages: 50,
                grid: vec![0.0, 0.05, 0.1, 0.15, 0.2],
                ..base
            },
            Experiment::MisspecifiedSweep => RunConfig {
                p: vec![5],
                k: 5,
                k_assumed: vec![2, 3, 4],
                n: vec![300, 100, 200],
                dosages: 50,
                grid: DISTANCES.to_vec(),
                ..base
            },
            Experiment::FractionalCompare => RunConfig {
                p: vec![8],
                k: 1,
                n: vec![64],
                trials: 300,
                ..base
            },
            Experiment::Emulate => RunConfig {
                p: vec![],
                n: vec![],
                ..base
            },
        }
    }

    /// Applies one `key=value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "p" => self.p = parse_list(&key, value)?,
            "k" => self.k = parse_one(&key, value)?,
            "k-assumed" => self.k_assumed = parse_list(&key, value)?,
            "n" => self.n = parse_list(&key, value)?,
            "rounds" | "t" => self.rounds = parse_one(&key, value)?,
            "sigma" => self.sigma = parse_one(&key, value)?,
            "budget" | "l" => self.budget = parse_one(&key, value)?,
            "trials" => self.trials = parse_one(&key, value)?,
            "dosages" | "dosages-per-distance" => self.dosages = parse_one(&key, value)?,
            "grid" => self.grid = parse_list(&key, value)?,
            "strategies" => self.strategies = parse_list(&key, value)?,
            "seed" | "master-seed" => self.seed = parse_one(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "estimator" => {
                self.estimator = value
                    .parse()
                    .map_err(|e: pfdesign::Error| HarnessError::Config(e.to_string()))?
            }
            "bound" => self.bound = optional(value, |v| parse_one(&key, v))?,
            "comparators" => self.comparators = parse_one(&key, value)?,
            "target" => self.target = optional(value, |v| Ok(PathBuf::from(v)))?,
            "objective" => self.objective = optional(value, parse_objective)?,
            "restarts" => self.restarts = parse_one(&key, value)?,
            _ => return config_err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies a `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let file_err = |message: String| HarnessError::ConfigFile {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| file_err(format!("expected `key = value`, got `{line}`")))?;
            if key.trim().replace('_', "-") == "experiment" {
                let named: Experiment = value.trim().parse().map_err(|e: HarnessError| file_err(e.to_string()))?;
                if named != self.experiment {
                    return Err(file_err(format!(
                        "file is for `{named}` but the run is `{}`",
                        self.experiment
                    )));
                }
                continue;
            }
            self.set(key, value).map_err(|e| file_err(e.to_string()))?;
        }
        Ok(())
    }

    /// Number of series: the length of the longest list-valued setting.
    pub fn series_count(&self) -> usize {
        match self.experiment {
            Experiment::MisspecifiedSweep => self.k_assumed.len().max(self.n.len()),
            _ => self.p.len().max(self.n.len()),
        }
    }

    pub fn p_at(&self, series: usize) -> usize {
        broadcast(&self.p, series)
    }

    pub fn n_at(&self, series: usize) -> usize {
        broadcast(&self.n, series)
    }

    pub fn k_assumed_at(&self, series: usize) -> usize {
        broadcast(&self.k_assumed, series)
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.experiment;
        if e == Experiment::Emulate {
            if self.target.is_none() {
                return config_err("emulate needs a target distribution file (--target)");
            }
            return positive("comparators", self.comparators);
        }
        positive("trials", self.trials)?;
        positive("k", self.k)?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return config_err(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if let Some(b) = self.bound {
            if !(b > 0.0 && b.is_finite()) {
                return config_err(format!("bound must be positive, got {b}"));
            }
        }
        check_list("p", &self.p)?;
        check_list("n", &self.n)?;
        let lists: &[(&str, usize)] = if e == Experiment::MisspecifiedSweep {
            check_list("k-assumed", &self.k_assumed)?;
            if self.p.len() != 1 {
                return config_err("misspecified_sweep takes a single p");
            }
            &[("k-assumed", self.k_assumed.len()), ("n", self.n.len())]
        } else {
            &[("p", self.p.len()), ("n", self.n.len())]
        };
        let len = self.series_count();
        for (name, l) in lists {
            if *l != 1 && *l != len {
                return config_err(format!("list `{name}` has {l} entries, expected 1 or {len}"));
            }
        }
        for s in 0..len {
            let p = self.p_at(s);
            if e == Experiment::MisspecifiedSweep {
                let ka = self.k_assumed_at(s);
                if ka >= p {
                    return config_err(format!("k-assumed {ka} must be below p = {p}"));
                }
            } else if self.k > p {
                return config_err(format!("k = {} exceeds p = {p}", self.k));
            }
        }
        if e.sweeps_distance() || e == Experiment::UniformSweep {
            if self.grid.is_empty() {
                return config_err("grid is empty");
            }
            let (lo, hi, what) = if e == Experiment::UniformSweep {
                (0.0, 1.0, "dosage values must lie in [0, 1]")
            } else {
                (0.0, 0.5, "distances must lie in [0, 0.5)")
            };
            for &g in &self.grid {
                let inside = g >= lo && if e == Experiment::UniformSweep { g <= hi } else { g < hi };
                if !inside {
                    return config_err(format!("grid value {g}: {what}"));
                }
            }
        }
        if e.sweeps_distance() {
            positive("dosages", self.dosages)?;
        }
        if e == Experiment::ConstrainedSweep && !(self.budget > 0.0 && self.budget.is_finite()) {
            return config_err(format!("budget must be positive, got {}", self.budget));
        }
        if e == Experiment::ActiveCompare {
            positive("rounds", self.rounds)?;
            positive("restarts", self.restarts)?;
            if self.strategies.is_empty() {
                return config_err("active_compare needs at least one strategy");
            }
        }
        Ok(())
    }

    /// Resolved settings as `key = value` lines, in [`KEYS`] order.
    pub fn manifest(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let nums = |v: &[usize]| join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let mut out = format!("experiment = {}\n", self.experiment);
        for key in KEYS {
            let value = match key {
                "p" => nums(&self.p),
                "k" => self.k.to_string(),
                "k-assumed" => nums(&self.k_assumed),
                "n" => nums(&self.n),
                "rounds" => self.rounds.to_string(),
                "sigma" => self.sigma.to_string(),
                "budget" => self.budget.to_string(),
                "trials" => self.trials.to_string(),
                "dosages" => self.dosages.to_string(),
                "grid" => join(&self.grid.iter().map(|g| g.to_string()).collect::<Vec<_>>()),
                "strategies" => join(&self.strategies.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                "seed" => self.seed.to_string(),
                "out" => self.out.display().to_string(),
                "estimator" => match self.estimator {
                    EstimatorKind::TruncatedOls => "ols".into(),
                    EstimatorKind::OlsRidge => "ridge".into(),
                },
                "bound" => self.bound.map(|b| b.to_string()).unwrap_or_default(),
                "comparators" => self.comparators.to_string(),
                "target" => self.target.as_ref().map(|t| t.display().to_string()).unwrap_or_default(),
                "objective" => match self.objective {
                    None => String::new(),
                    Some(Objective::EigenSum) => "eigen_sum".into(),
                    Some(Objective::MinEigProxy) => "min_eig".into(),
                },
                "restarts" => self.restarts.to_string(),
                _ => unreachable!(),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}

fn broadcast(list: &[usize], i: usize) -> usize {
    if list.len() == 1 {
        list[0]
    } else {
        list[i]
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return config_err(format!("{name} must be positive"));
    }
    Ok(())
}

fn check_list(name: &str, list: &[usize]) -> Result<()> {
    if list.is_empty() {
        return config_err(format!("list `{name}` is empty"));
    }
    if list.contains(&0) {
        return config_err(format!("list `{name}` must hold positive values"));
    }
    Ok(())
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn optional<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        f(value).map(Some)
    }
}

fn parse_objective(value: &str) -> Result<Objective> {
    match value {
        "eigen_sum" | "eigen-sum" => Ok(Objective::EigenSum),
        "min_eig" | "min-eig" | "proxy" => Ok(Objective::MinEigProxy),
        other => config_err(format!("unknown objective `{other}` (expected eigen_sum or min_eig)")),
    }
}
