//! Solver configuration parameters, their space, and sampling.

use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchingRule {
    MostFractional,
    Pseudocost,
    Random,
}

impl BranchingRule {
    pub const ALL: [BranchingRule; 3] = [
        BranchingRule::MostFractional,
        BranchingRule::Pseudocost,
        BranchingRule::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BranchingRule::MostFractional => "MOST_FRACTIONAL",
            BranchingRule::Pseudocost => "PSEUDOCOST",
            BranchingRule::Random => "RANDOM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeSelection {
    BestBound,
    Dfs,
    Hybrid,
}

impl NodeSelection {
    pub const ALL: [NodeSelection; 3] = [
        NodeSelection::BestBound,
        NodeSelection::Dfs,
        NodeSelection::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeSelection::BestBound => "BEST_BOUND",
            NodeSelection::Dfs => "DFS",
            NodeSelection::Hybrid => "HYBRID",
        }
    }
}

pub const PLUNGE_DEPTH_MAX: u32 = 10;

/// A point in the branch-and-bound parameter space.
///
/// `plunge_depth` only has an effect under [`NodeSelection::Hybrid`]; the
/// two real-valued parameters are clamped to `[0, 1]` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub branching_rule: BranchingRule,
    pub node_selection: NodeSelection,
    pub plunge_depth: u32,
    pub rounding_heuristic_freq: f64,
    pub branching_score_factor: f64,
}

impl SolverConfig {
    pub fn new(
        branching_rule: BranchingRule,
        node_selection: NodeSelection,
        plunge_depth: u32,
        rounding_heuristic_freq: f64,
        branching_score_factor: f64,
    ) -> Self {
        SolverConfig {
            branching_rule,
            node_selection,
            plunge_depth: plunge_depth.min(PLUNGE_DEPTH_MAX),
            rounding_heuristic_freq: rounding_heuristic_freq.clamp(0.0, 1.0),
            branching_score_factor: branching_score_factor.clamp(0.0, 1.0),
        }
    }

    /// Flat key-value record with stable key order; the wire format shared
    /// with the config store.
    pub fn to_kv(&self) -> String {
        format!(
            "branching_rule={},node_selection={},plunge_depth={},rounding_heuristic_freq={},branching_score_factor={}",
            self.branching_rule.as_str(),
            self.node_selection.as_str(),
            self.plunge_depth,
            self.rounding_heuristic_freq,
            self.branching_score_factor,
        )
    }

    pub fn from_kv(s: &str) -> Result<Self, ConfigParseError> {
        let mut branching_rule = None;
        let mut node_selection = None;
        let mut plunge_depth = None;
        let mut rounding = None;
        let mut factor = None;
        for field in s.split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| ConfigParseError::Malformed(field.to_string()))?;
            match key {
                "branching_rule" => {
                    branching_rule = Some(
                        BranchingRule::ALL
                            .iter()
                            .copied()
                            .find(|r| r.as_str() == value)
                            .ok_or_else(|| ConfigParseError::BadValue(value.to_string()))?,
                    )
                }
                "node_selection" => {
                    node_selection = Some(
                        NodeSelection::ALL
                            .iter()
                            .copied()
                            .find(|r| r.as_str() == value)
                            .ok_or_else(|| ConfigParseError::BadValue(value.to_string()))?,
                    )
                }
                "plunge_depth" => {
                    plunge_depth = Some(
                        value
                            .parse::<u32>()
                            .map_err(|_| ConfigParseError::BadValue(value.to_string()))?,
                    )
                }
                "rounding_heuristic_freq" => {
                    rounding = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| ConfigParseError::BadValue(value.to_string()))?,
                    )
                }
                "branching_score_factor" => {
                    factor = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| ConfigParseError::BadValue(value.to_string()))?,
                    )
                }
                other => return Err(ConfigParseError::UnknownKey(other.to_string())),
            }
        }
        match (branching_rule, node_selection, plunge_depth, rounding, factor) {
            (Some(b), Some(n), Some(p), Some(r), Some(f)) => Ok(SolverConfig::new(b, n, p, r, f)),
            _ => Err(ConfigParseError::MissingKey),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigParseError {
    #[error("malformed config field `{0}`")]
    Malformed(String),
    #[error("bad config value `{0}`")]
    BadValue(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("missing config key")]
    MissingKey,
}

/// Domain descriptors for every parameter plus the default configuration.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    pub branching_rules: Vec<BranchingRule>,
    pub node_selections: Vec<NodeSelection>,
    pub plunge_depth_range: (u32, u32),
    pub rounding_freq_range: (f64, f64),
    pub score_factor_range: (f64, f64),
    pub default_config: SolverConfig,
}

impl Default for ConfigSpace {
    fn default() -> Self {
        ConfigSpace {
            branching_rules: BranchingRule::ALL.to_vec(),
            node_selections: NodeSelection::ALL.to_vec(),
            plunge_depth_range: (0, PLUNGE_DEPTH_MAX),
            rounding_freq_range: (0.0, 1.0),
            score_factor_range: (0.0, 1.0),
            default_config: SolverConfig::new(
                BranchingRule::Pseudocost,
                NodeSelection::BestBound,
                0,
                0.1,
                0.5,
            ),
        }
    }
}

impl ConfigSpace {
    /// Uniform draw over every parameter domain, deterministic under seed.
    pub fn sample(&self, seed: u64) -> SolverConfig {
        let mut rng = SeededRng::new(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with(&self, rng: &mut SeededRng) -> SolverConfig {
        let branching = *rng.choose(&self.branching_rules);
        let selection = *rng.choose(&self.node_selections);
        let (plo, phi) = self.plunge_depth_range;
        let plunge = plo + rng.index((phi - plo + 1) as usize) as u32;
        let (rlo, rhi) = self.rounding_freq_range;
        let rounding = rng.uniform(rlo, rhi);
        let (flo, fhi) = self.score_factor_range;
        let factor = rng.uniform(flo, fhi);
        SolverConfig::new(branching, selection, plunge, rounding, factor)
    }

    /// Redraws exactly one uniformly chosen parameter of `base`.
    pub fn perturb_with(&self, base: &SolverConfig, rng: &mut SeededRng) -> SolverConfig {
        let mut cfg = *base;
        match rng.index(5) {
            0 => cfg.branching_rule = *rng.choose(&self.branching_rules),
            1 => cfg.node_selection = *rng.choose(&self.node_selections),
            2 => {
                let (plo, phi) = self.plunge_depth_range;
                cfg.plunge_depth = plo + rng.index((phi - plo + 1) as usize) as u32;
            }
            3 => {
                let (rlo, rhi) = self.rounding_freq_range;
                cfg.rounding_heuristic_freq = rng.uniform(rlo, rhi);
            }
            _ => {
                let (flo, fhi) = self.score_factor_range;
                cfg.branching_score_factor = rng.uniform(flo, fhi);
            }
        }
        cfg
    }
}

/// Uniform configuration sample, deterministic under seed.
pub fn sample_config(space: &ConfigSpace, seed: u64) -> SolverConfig {
    space.sample(seed)
}
