//! Experiment configuration (TOML, `config_version = 1`).
//!
//! ```toml
//! config_version = 1
//! seeds = [0, 1, 2]
//! budget = 100000            # consumed samples, or updates with budget_kind = "iterations"
//! metrics = ["weighted_error", "bellman_residual"]
//! output = "results"
//! trace_stride = 100
//! tau = 8                    # optional; defaults to the mixing-based lower bound
//!
//! [problem]
//! kind = "gridworld"         # or "mdp" (path, policy) or "glm"
//! beta = 0.99
//!
//! [[algorithms]]
//! name = "FTD-3"             # presets TD, CTD-1..3, FTD-1..4 double as schedules
//!
//! [[algorithms]]
//! name = "ctd-fast"
//! schedule = "ctd-diminishing"
//! L = 0.5
//! batch = 4
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use markov_vi::gridworld::{Cell, GridSpec, Traps};
use markov_vi::solvers::Algorithm;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    WeightedError,
    BregmanToStar,
    BellmanResidual,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Self::WeightedError, Self::BregmanToStar, Self::BellmanResidual];

    pub fn name(&self) -> &'static str {
        match self {
            Self::WeightedError => "weighted_error",
            Self::BregmanToStar => "bregman_to_star",
            Self::BellmanResidual => "bellman_residual",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Self::WeightedError => 0,
            Self::BregmanToStar => 1,
            Self::BellmanResidual => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    #[default]
    Samples,
    Iterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Features {
    Named(String),
    Projection { projection: usize, seed: u64 },
}

impl Default for Features {
    fn default() -> Self {
        Self::Named("tabular".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrapsConfig {
    Count(usize),
    Cells(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    /// Defaults to the corner opposite the origin.
    pub goal: Option<[usize; 2]>,
    #[serde(default = "default_traps")]
    pub traps: TrapsConfig,
    #[serde(default = "default_reward_goal")]
    pub reward_goal: f64,
    #[serde(default = "default_reward_trap")]
    pub reward_trap: f64,
    #[serde(default = "default_p_toward")]
    pub p_toward: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub features: Features,
}

impl Default for GridConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl GridConfig {
    pub fn to_spec(&self) -> GridSpec {
        let goal = self
            .goal
            .unwrap_or([self.width.saturating_sub(1), self.height.saturating_sub(1)]);
        GridSpec {
            width: self.width,
            height: self.height,
            goal: Cell::new(goal[0], goal[1]),
            traps: match &self.traps {
                TrapsConfig::Count(count) => Traps::Random { count: *count },
                TrapsConfig::Cells(cells) => Traps::Fixed(cells.iter().map(|c| Cell::new(c[0], c[1])).collect()),
            },
            reward_goal: self.reward_goal,
            reward_trap: self.reward_trap,
            p_toward: self.p_toward,
            beta: self.beta,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    pub path: PathBuf,
    /// Uniform over actions when absent.
    pub policy: Option<PathBuf>,
    #[serde(default)]
    pub features: Features,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkConfig {
    #[default]
    Identity,
    Ramp,
}

/// AR(1) covariates `η' = ρQDη + ε` with a random orthogonal `Q` and
/// `D = diag(1 − i/(2d))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlmConfig {
    pub dim: usize,
    #[serde(default = "default_ar_coef")]
    pub ar_coef: f64,
    #[serde(default = "default_unit")]
    pub noise_var: f64,
    #[serde(default = "default_label_sd")]
    pub label_noise_sd: f64,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub seed: u64,
    /// Mixing constant `C` paired with `ρ = ar_coef`.
    #[serde(default = "default_unit")]
    pub c_mix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemConfig {
    Gridworld(GridConfig),
    Mdp(MdpConfig),
    Glm(GlmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    /// Defaults to `name`, which must then be a preset.
    pub schedule: Option<String>,
    #[serde(rename = "L")]
    pub lip: Option<f64>,
    pub tau: Option<usize>,
    pub batch: Option<usize>,
    pub budget: Option<u64>,
    /// Horizon for constant and robust schedules; derived from the budget when absent.
    pub k: Option<u64>,
    /// Forces every extrapolation weight to this value.
    pub lambda: Option<f64>,
}

impl AlgorithmConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            schedule: None,
            lip: None,
            tau: None,
            batch: None,
            budget: None,
            k: None,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub problem: ProblemConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    pub seeds: Vec<u64>,
    pub budget: u64,
    #[serde(default)]
    pub budget_kind: BudgetKind,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_stride")]
    pub trace_stride: u64,
    /// Points recorded at the full stride before logarithmic thinning.
    #[serde(default = "default_trace_points")]
    pub trace_points: usize,
    #[serde(rename = "L")]
    pub lip: Option<f64>,
    pub tau: Option<usize>,
    pub batch: Option<usize>,
    /// Radius of the origin-centred feasible ball; a default is derived from the problem.
    pub region_radius: Option<f64>,
    #[serde(default)]
    pub unconstrained: bool,
}

fn default_side() -> usize {
    20
}
fn default_traps() -> TrapsConfig {
    TrapsConfig::Count(30)
}
fn default_reward_goal() -> f64 {
    1.0
}
fn default_reward_trap() -> f64 {
    -0.2
}
fn default_p_toward() -> f64 {
    0.95
}
fn default_beta() -> f64 {
    0.9
}
fn default_ar_coef() -> f64 {
    0.5
}
fn default_unit() -> f64 {
    1.0
}
fn default_label_sd() -> f64 {
    0.1
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::WeightedError]
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_stride() -> u64 {
    1
}
fn default_trace_points() -> usize {
    200
}

/// A named stepsize policy together with its update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    TdDiminishing,
    TdConstant,
    CtdDiminishing,
    CtdConstant,
    CtdRestart,
    FtdDiminishing,
    FtdConstant,
    FtdRestart,
    FtdProjectedWarmup,
    FtdBatchWarmup,
    FtdRobust,
}

impl ScheduleKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "TD" | "td-diminishing" => Self::TdDiminishing,
            "td-constant" => Self::TdConstant,
            "CTD-1" | "ctd-diminishing" => Self::CtdDiminishing,
            "CTD-2" | "ctd-constant" => Self::CtdConstant,
            "CTD-3" | "ctd-restart" => Self::CtdRestart,
            "FTD-1" | "ftd-diminishing" => Self::FtdDiminishing,
            "FTD-2" | "ftd-constant" => Self::FtdConstant,
            "FTD-3" | "ftd-restart" => Self::FtdRestart,
            "FTD-4" | "ftd-robust" => Self::FtdRobust,
            "ftd-projected-warmup" => Self::FtdProjectedWarmup,
            "ftd-batch-warmup" => Self::FtdBatchWarmup,
            _ => return None,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::TdDiminishing | Self::TdConstant => Algorithm::Td,
            Self::CtdDiminishing | Self::CtdConstant | Self::CtdRestart => Algorithm::Ctd,
            _ => Algorithm::Ftd,
        }
    }

    pub fn needs_horizon(&self) -> bool {
        matches!(self, Self::TdConstant | Self::CtdConstant | Self::FtdConstant | Self::FtdRobust)
    }
}

/// The eight policies compared on the Grid-World.
pub const PRESETS: [&str; 8] = ["TD", "CTD-1", "CTD-2", "CTD-3", "FTD-1", "FTD-2", "FTD-3", "FTD-4"];

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub budget: Option<u64>,
    pub budget_kind: Option<BudgetKind>,
    pub lip: Option<f64>,
    pub tau: Option<usize>,
    pub batch: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("at byte {}", s.start)).unwrap_or_else(|| "<root>".into());
            BenchError::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::config("<file>", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ProblemConfig::Mdp(m) = &mut cfg.problem {
            m.path = base.join(&m.path);
            if let Some(p) = &mut m.policy {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(b) = o.budget {
            self.budget = b;
            self.algorithms.iter_mut().for_each(|a| a.budget = None);
        }
        if let Some(k) = o.budget_kind {
            self.budget_kind = k;
        }
        if let Some(l) = o.lip {
            self.lip = Some(l);
            self.algorithms.iter_mut().for_each(|a| a.lip = None);
        }
        if let Some(t) = o.tau {
            self.tau = Some(t);
            self.algorithms.iter_mut().for_each(|a| a.tau = None);
        }
        if let Some(m) = o.batch {
            self.batch = Some(m);
            self.algorithms.iter_mut().for_each(|a| a.batch = None);
        }
        if let Some(out) = &o.output {
            self.output = out.clone();
        }
        self.validate()
    }

    /// Field-level checks that need no problem construction.
    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(BenchError::config(
                "config_version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.config_version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::config("seeds", "at least one seed is required"));
        }
        if self.algorithms.is_empty() {
            return Err(BenchError::config("algorithms", "at least one algorithm is required"));
        }
        if self.metrics.is_empty() {
            return Err(BenchError::config("metrics", "at least one metric is required"));
        }
        if self.trace_stride == 0 {
            return Err(BenchError::config("trace_stride", "must be positive"));
        }
        if self.trace_points == 0 {
            return Err(BenchError::config("trace_points", "must be positive"));
        }
        positive_opt("L", self.lip)?;
        nonzero_opt("tau", self.tau)?;
        nonzero_opt("batch", self.batch)?;
        positive_opt("region_radius", self.region_radius)?;
        let mut seen_seeds = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen_seeds.insert(**s)) {
            return Err(BenchError::config("seeds", format!("seed {s} listed twice")));
        }
        let mut names = HashSet::new();
        let mut files = HashSet::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            let field = |f: &str| format!("algorithms[{i}].{f}");
            if !names.insert(a.name.as_str()) {
                return Err(BenchError::config(field("name"), format!("duplicate name `{}`", a.name)));
            }
            if !files.insert(file_stem(&a.name)) {
                return Err(BenchError::config(field("name"), format!("`{}` collides with another output file", a.name)));
            }
            let sched = a.schedule.as_deref().unwrap_or(&a.name);
            if ScheduleKind::parse(sched).is_none() {
                return Err(BenchError::config(field("schedule"), format!("unknown schedule `{sched}`")));
            }
            positive_opt(&field("L"), a.lip)?;
            nonzero_opt(&field("tau"), a.tau)?;
            nonzero_opt(&field("batch"), a.batch)?;
            nonzero_opt(&field("k"), a.k)?;
            if let Some(l) = a.lambda {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(BenchError::config(field("lambda"), "must be finite and >= 0"));
                }
            }
        }
        match &self.problem {
            ProblemConfig::Gridworld(g) => g.to_spec().validate().map_err(|e| BenchError::config("problem", e.to_string()))?,
            ProblemConfig::Mdp(_) => {}
            ProblemConfig::Glm(g) => {
                if g.dim == 0 {
                    return Err(BenchError::config("problem.dim", "must be positive"));
                }
                if !(g.ar_coef >= 0.0 && g.ar_coef < 1.0) {
                    return Err(BenchError::config("problem.ar_coef", "must lie in [0, 1)"));
                }
                positive_opt("problem.noise_var", Some(g.noise_var))?;
                positive_opt("problem.c_mix", Some(g.c_mix))?;
                if self.metrics.contains(&Metric::WeightedError) {
                    return Err(BenchError::config("metrics", "weighted_error needs a policy-evaluation problem"));
                }
                if g.link == LinkConfig::Ramp && self.metrics.contains(&Metric::BellmanResidual) {
                    return Err(BenchError::config("metrics", "bellman_residual needs the identity link"));
                }
            }
        }
        Ok(())
    }
}

/// Output file stem for an algorithm label.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn positive_opt(field: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(BenchError::config(field, format!("must be finite and > 0, got {x}"))),
        _ => Ok(()),
    }
}

fn nonzero_opt<T: PartialEq + Default>(field: &str, v: Option<T>) -> Result<()> {
    match v {
        Some(x) if x == T::default() => Err(BenchError::config(field, "must be positive")),
        _ => Ok(()),
    }
}

/// Parses `N` (the first N seeds), `a..b`, or `a,b,c`.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let bad = || format!("invalid seed list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect();
    }
    let n: u64 = s.trim().parse().map_err(|_| bad())?;
    Ok((0..n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
config_version = 1
seeds = [0]
budget = 10
[problem]
kind = "gridworld"
[[algorithms]]
name = "TD"
"#;

    fn field_of(e: BenchError) -> String {
        match e {
            BenchError::Config { field, .. } => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.metrics, vec![Metric::WeightedError]);
        assert_eq!(cfg.budget_kind, BudgetKind::Samples);
        let ProblemConfig::Gridworld(g) = &cfg.problem else { panic!() };
        assert_eq!(g.to_spec(), GridSpec::default());
    }

    #[test]
    fn field_level_errors() {
        let e = ExperimentConfig::from_toml(&MINIMAL.replace("seeds = [0]", "seeds = []")).unwrap_err();
        assert_eq!(field_of(e), "seeds");
        let e = ExperimentConfig::from_toml(&MINIMAL.replace("\"TD\"", "\"XTD\"")).unwrap_err();
        assert_eq!(field_of(e), "algorithms[0].schedule");
        let e = ExperimentConfig::from_toml(&MINIMAL.replace("config_version = 1", "config_version = 7")).unwrap_err();
        assert_eq!(field_of(e), "config_version");
        let dup = format!("{MINIMAL}[[algorithms]]\nname = \"TD\"\n");
        assert_eq!(field_of(ExperimentConfig::from_toml(&dup).unwrap_err()), "algorithms[1].name");
        let unknown = format!("{MINIMAL}bogus = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(BenchError::Config { .. })));
        let glm = MINIMAL.replace("kind = \"gridworld\"", "kind = \"glm\"\ndim = 3");
        assert_eq!(field_of(ExperimentConfig::from_toml(&glm).unwrap_err()), "metrics");
    }

    #[test]
    fn overrides_replace_per_algorithm_values() {
        let text = MINIMAL.replace("name = \"TD\"", "name = \"TD\"\ntau = 3\nL = 2.0");
        let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
        cfg.apply(&Overrides { tau: Some(8), lip: Some(0.5), seeds: Some(vec![4, 5]), ..Overrides::default() })
            .unwrap();
        assert_eq!((cfg.tau, cfg.lip, cfg.algorithms[0].tau, cfg.algorithms[0].lip), (Some(8), Some(0.5), None, None));
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert!(cfg.apply(&Overrides { seeds: Some(vec![]), ..Overrides::default() }).is_err());
    }

    #[test]
    fn presets_and_seed_lists() {
        for p in PRESETS {
            assert!(ScheduleKind::parse(p).is_some(), "{p}");
        }
        assert_eq!(ScheduleKind::parse("FTD-4").unwrap().algorithm(), Algorithm::Ftd);
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5..7").unwrap(), vec![5, 6]);
        assert_eq!(parse_seeds("9,2").unwrap(), vec![9, 2]);
        assert!(parse_seeds("x").is_err());
        assert_eq!(file_stem("FTD-3 (m=4)"), "ftd-3--m-4-");
    }

    #[test]
    fn features_forms() {
        let g: GridConfig = toml::from_str("features = { projection = 5, seed = 2 }").unwrap();
        assert_eq!(g.features, Features::Projection { projection: 5, seed: 2 });
        let g: GridConfig = toml::from_str("traps = [[1, 2]]").unwrap();
        assert_eq!(g.traps, TrapsConfig::Cells(vec![[1, 2]]));
    }
}
