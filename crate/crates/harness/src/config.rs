//! Experiment grid configuration: presets, TOML files, CLI overrides.

use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use rcs_core::adversary::Regime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    Cs,
    Rcs,
    RcsCoin,
    Frcs,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Cs,
        ProtocolKind::Rcs,
        ProtocolKind::RcsCoin,
        ProtocolKind::Frcs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Cs => "CS",
            ProtocolKind::Rcs => "RCS",
            ProtocolKind::RcsCoin => "RCS_COIN",
            ProtocolKind::Frcs => "FRCS",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "cs" => Ok(ProtocolKind::Cs),
            "rcs" => Ok(ProtocolKind::Rcs),
            "rcs_coin" | "rcs-coin" => Ok(ProtocolKind::RcsCoin),
            "frcs" | "f-rcs" => Ok(ProtocolKind::Frcs),
            other => Err(ConfigError::Invalid(format!("unknown protocol {other:?}"))),
        }
    }
}

pub fn parse_regime(s: &str) -> Result<Regime, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "general" => Ok(Regime::General),
        "collusion" => Ok(Regime::Collusion),
        "half_resilience" | "half-resilience" => Ok(Regime::HalfResilience),
        other => Err(ConfigError::Invalid(format!("unknown regime {other:?}"))),
    }
}

/// Adversary knobs shared by every cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryKnobs {
    /// Per-model perturbation budget (total-variation distance) for safe
    /// models.
    pub jitter: f64,
    /// Mass-shift strength for Byzantine models, and the collusion
    /// concentration.
    pub strength: f64,
    /// Minimum safe-set mass each safe model keeps.
    pub psi_floor: f64,
    /// Optional distribution file supplying the output space and safe seeds.
    pub distributions: Option<PathBuf>,
}

impl Default for AdversaryKnobs {
    fn default() -> Self {
        Self {
            jitter: 0.01,
            strength: 0.97,
            psi_floor: 0.6,
            distributions: None,
        }
    }
}

/// The full experiment grid: the cartesian product of lambdas, group
/// sizes, regimes, and protocols, plus everything the cells share.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub lambdas: Vec<u64>,
    pub n_values: Vec<usize>,
    pub regimes: Vec<Regime>,
    pub protocols: Vec<ProtocolKind>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    /// Constants of the `n = k * lambda + b` derivation used when
    /// `n_values` is not given explicitly.
    pub k: usize,
    pub b: usize,
    pub adversary: AdversaryKnobs,
    pub latency: rcs_core::LatencyModel,
    /// Trials behind each cell's risk report.
    pub risk_trials: usize,
    /// Logical delay before a delivery's safety verdict reaches the
    /// feedback registry, in trials.
    pub eval_delay: usize,
    /// Trials per task class in feedback cells: consecutive prompts in one
    /// episode count as similar, and exclusions apply within the episode.
    pub episode_len: usize,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self::preset_paper()
    }
}

impl ExperimentGrid {
    /// Full-scale grid: every regime and protocol over the published
    /// parameter ranges at 8000 trials per cell.
    pub fn preset_paper() -> Self {
        Self {
            lambdas: vec![2, 4, 8, 16, 32],
            n_values: vec![5, 9, 17, 33, 65, 129],
            regimes: vec![Regime::General, Regime::HalfResilience, Regime::Collusion],
            protocols: ProtocolKind::ALL.to_vec(),
            trials_per_cell: 8000,
            base_seed: 42,
            k: 4,
            b: 1,
            adversary: AdversaryKnobs::default(),
            latency: rcs_core::LatencyModel::default(),
            risk_trials: 2000,
            eval_delay: 1,
            episode_len: 50,
        }
    }

    /// Reduced grid for quick runs: small lambdas and group sizes, 1000
    /// trials per cell.
    pub fn preset_ci() -> Self {
        Self {
            lambdas: vec![2, 4, 8],
            n_values: vec![5, 9, 17],
            trials_per_cell: 1000,
            ..Self::preset_paper()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "paper" => Ok(Self::preset_paper()),
            "ci" => Ok(Self::preset_ci()),
            other => Err(ConfigError::Invalid(format!("unknown preset {other:?}"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawGrid = toml::from_str(text)?;
        raw.into_grid()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lambdas.is_empty() {
            return Err(ConfigError::Invalid("no lambdas".into()));
        }
        for l in &self.lambdas {
            if !l.is_power_of_two() {
                return Err(ConfigError::Invalid(format!(
                    "lambda {l} is not a power of two"
                )));
            }
        }
        if self.n_values.is_empty() {
            return Err(ConfigError::Invalid("no group sizes".into()));
        }
        if self.n_values.iter().any(|n| *n < 2) {
            return Err(ConfigError::Invalid("group sizes must be >= 2".into()));
        }
        if self.trials_per_cell == 0 {
            return Err(ConfigError::Invalid("trials must be >= 1".into()));
        }
        if self.protocols.is_empty() || self.regimes.is_empty() {
            return Err(ConfigError::Invalid(
                "need at least one protocol and one regime".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.adversary.strength)
            || !(0.0..=1.0).contains(&self.adversary.psi_floor)
            || self.adversary.jitter < 0.0
        {
            return Err(ConfigError::Invalid("adversary knobs out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lambdas: Option<Vec<u64>>,
    n_values: Option<Vec<usize>>,
    regimes: Option<Vec<String>>,
    protocols: Option<Vec<String>>,
    trials: Option<usize>,
    seed: Option<u64>,
    k: Option<usize>,
    b: Option<usize>,
    risk_trials: Option<usize>,
    adversary: Option<RawAdversary>,
    latency: Option<RawLatency>,
    feedback: Option<RawFeedback>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    jitter: Option<f64>,
    strength: Option<f64>,
    psi_floor: Option<f64>,
    distributions: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLatency {
    round_cost: Option<f64>,
    trace_coeff: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeedback {
    eval_delay: Option<usize>,
    episode_len: Option<usize>,
}

impl RawGrid {
    fn into_grid(self) -> Result<ExperimentGrid, ConfigError> {
        let mut grid = ExperimentGrid::preset_paper();
        if let Some(l) = self.lambdas {
            grid.lambdas = l;
        }
        if let Some(k) = self.k {
            grid.k = k;
        }
        if let Some(b) = self.b {
            grid.b = b;
        }
        match self.n_values {
            Some(n) if !n.is_empty() => grid.n_values = n,
            // Without explicit sizes, derive one group size per lambda.
            _ => {
                grid.n_values = grid
                    .lambdas
                    .iter()
                    .map(|l| grid.k * *l as usize + grid.b)
                    .collect();
                grid.n_values.sort_unstable();
                grid.n_values.dedup();
            }
        }
        if let Some(r) = self.regimes {
            grid.regimes = r
                .iter()
                .map(|s| parse_regime(s))
                .collect::<Result<_, _>>()?;
        }
        if let Some(p) = self.protocols {
            grid.protocols = p
                .iter()
                .map(|s| ProtocolKind::parse(s))
                .collect::<Result<_, _>>()?;
        }
        if let Some(t) = self.trials {
            grid.trials_per_cell = t;
        }
        if let Some(s) = self.seed {
            grid.base_seed = s;
        }
        if let Some(rt) = self.risk_trials {
            grid.risk_trials = rt;
        }
        if let Some(adv) = self.adversary {
            if let Some(j) = adv.jitter {
                grid.adversary.jitter = j;
            }
            if let Some(s) = adv.strength {
                grid.adversary.strength = s;
            }
            if let Some(p) = adv.psi_floor {
                grid.adversary.psi_floor = p;
            }
            grid.adversary.distributions = adv.distributions;
        }
        if let Some(lat) = self.latency {
            if let Some(rc) = lat.round_cost {
                grid.latency.round_cost = rc;
            }
            if let Some(tc) = lat.trace_coeff {
                grid.latency.trace_coeff = tc;
            }
        }
        if let Some(fb) = self.feedback {
            if let Some(d) = fb.eval_delay {
                grid.eval_delay = d;
            }
            if let Some(e) = fb.episode_len {
                grid.episode_len = e.max(1);
            }
        }
        grid.validate()?;
        Ok(grid)
    }
}
