//! Experiment configuration and per-experiment defaults.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use netgame_core::dynamics::Selection;
use netgame_core::network::Scaled;
use netgame_core::Family;
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Table2,
    Table3,
    Table4,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Table2,
        Experiment::Table3,
        Experiment::Table4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::Table4 => "table4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Experiments built on the learning setup: `β = 0`, `γ = 1`, box
    /// `[−1, 1]`, signed complete networks.
    pub fn is_dynamics(self) -> bool {
        matches!(self, Experiment::Fig4 | Experiment::Table3 | Experiment::Table4)
    }
}

/// A family with an optional display label; the label defaults to the
/// family name and must be unique within a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub family: Family,
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        FamilySpec { label: None, family }
    }

    pub fn labelled(label: &str, family: Family) -> Self {
        FamilySpec {
            label: Some(label.to_string()),
            family,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.family.name())
    }
}

/// User-facing configuration. Unset fields take the experiment's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<FamilySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    /// Aggregate sensitivity for the game-based experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Iteration cap for the learning runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Step size of the gradient-play runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Which player moves in the best-response runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    /// Slack in the high-probability asymmetry bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Trials traced by `fig4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_ids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_base_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            families: None,
            sizes: None,
            trials: None,
            base_seed: default_base_seed(),
            gamma: None,
            max_iters: None,
            eta: None,
            selection: None,
            t: None,
            trial_ids: None,
            out: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<Plan, BenchError> {
        let e = self.experiment;
        let families = match &self.families {
            Some(f) => f.clone(),
            None => default_families(e),
        };
        let sizes = self.sizes.clone().unwrap_or_else(|| default_sizes(e));
        let trials = self.trials.unwrap_or(match e {
            Experiment::Fig1 => 1,
            _ => 100,
        });
        let plan = Plan {
            experiment: e,
            families,
            sizes,
            trials,
            base_seed: self.base_seed,
            gamma: self.gamma.unwrap_or(match e {
                Experiment::Fig3 => 0.25,
                _ => 1.0,
            }),
            max_iters: self.max_iters.unwrap_or(10_000),
            eta: self.eta.unwrap_or(0.1),
            selection: self.selection.unwrap_or(Selection::RandomProbe),
            t: self.t.unwrap_or(0.05),
            trial_ids: self.trial_ids.clone().unwrap_or_else(|| match e {
                Experiment::Fig4 => vec![0, 1, 2, 3],
                _ => Vec::new(),
            }),
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub experiment: Experiment,
    pub families: Vec<FamilySpec>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub gamma: f64,
    pub max_iters: usize,
    pub eta: f64,
    pub selection: Selection,
    pub t: f64,
    pub trial_ids: Vec<usize>,
}

impl Plan {
    fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.experiment != Experiment::Fig1 {
            if self.families.is_empty() {
                return bad("no families configured".into());
            }
            if self.sizes.is_empty() {
                return bad("no sizes configured".into());
            }
            if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
                return bad(format!("network size {n} is below 2"));
            }
        }
        let mut labels = BTreeSet::new();
        for f in &self.families {
            if !labels.insert(f.label()) {
                return bad(format!("duplicate family label {:?}", f.label()));
            }
            if f.label().contains(['\n', '\r']) {
                return bad("family labels must be single-line".into());
            }
        }
        if !(self.gamma.is_finite() && self.eta.is_finite() && self.eta > 0.0) {
            return bad("gamma must be finite and eta positive".into());
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return bad("t must be non-negative".into());
        }
        if self.experiment == Experiment::Fig4 {
            if let Some(t) = self.trial_ids.iter().find(|&&t| t >= self.trials) {
                return bad(format!("trial id {t} is not below trials = {}", self.trials));
            }
        }
        Ok(())
    }

    /// Seed of trial `t`, independent of family, size and worker count.
    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

fn default_sizes(e: Experiment) -> Vec<usize> {
    match e {
        Experiment::Fig1 => Vec::new(),
        Experiment::Fig2 => vec![10, 50, 200, 500, 1000],
        Experiment::Fig3 => vec![5, 10, 20, 50, 100],
        Experiment::Fig4 | Experiment::Table2 | Experiment::Table3 | Experiment::Table4 => vec![100],
    }
}

/// The signed complete network used by the learning experiments.
pub fn signed_complete() -> Family {
    Family::RandomSigns {
        eps: Scaled::InvPow(3.0),
        delta: Scaled::InvPow(3.0),
    }
}

/// The six families with the parameters plotted in the scaling figure.
pub fn scaling_figure_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::new(Family::CompleteErrors { eps: Scaled::InvPow(2.0) }),
        FamilySpec::new(Family::Influential {
            eps: Scaled::InvPow(2.0),
            w: 3.0,
        }),
        FamilySpec::new(signed_complete()),
        FamilySpec::new(Family::ErdosRenyi {
            p: Scaled::OneMinusInvPow(2.5),
            weight: Scaled::Const(1.0),
        }),
        FamilySpec::new(Family::SmallWorld {
            d_frac: 0.1,
            p: Scaled::InvPow(2.0),
        }),
        FamilySpec::new(Family::StarErased { p: Scaled::InvPow(1.5) }),
    ]
}

/// The six families with exponents inside the range where the tabulated
/// asymmetry bounds are claimed: `r = 2` for the complete families and `r = 3`
/// for the random ones, small world at `d = N/8`.
pub fn admissible_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::new(Family::CompleteErrors { eps: Scaled::InvPow(2.0) }),
        FamilySpec::new(Family::Influential {
            eps: Scaled::InvPow(2.0),
            w: 3.0,
        }),
        FamilySpec::new(signed_complete()),
        FamilySpec::new(Family::ErdosRenyi {
            p: Scaled::OneMinusInvPow(3.0),
            weight: Scaled::Const(1.0),
        }),
        FamilySpec::new(Family::SmallWorld {
            d_frac: 0.125,
            p: Scaled::InvPow(3.0),
        }),
        FamilySpec::new(Family::StarErased { p: Scaled::InvPow(3.0) }),
    ]
}

/// Sparse and dense Erdős–Rényi with weights `1/N`.
pub fn welfare_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::labelled(
            "erdos_renyi_sparse",
            Family::ErdosRenyi {
                p: Scaled::OverN(1.0),
                weight: Scaled::OverN(1.0),
            },
        ),
        FamilySpec::labelled(
            "erdos_renyi_dense",
            Family::ErdosRenyi {
                p: Scaled::OneMinusInvPow(1.0),
                weight: Scaled::OverN(1.0),
            },
        ),
    ]
}

fn default_families(e: Experiment) -> Vec<FamilySpec> {
    match e {
        Experiment::Fig1 => Vec::new(),
        Experiment::Fig2 => scaling_figure_families(),
        Experiment::Fig3 => welfare_families(),
        Experiment::Fig4 | Experiment::Table2 | Experiment::Table3 | Experiment::Table4 => {
            vec![FamilySpec::new(signed_complete())]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let p = ExperimentConfig::new(Experiment::Fig2).resolve().unwrap();
        assert_eq!(p.families.len(), 6);
        assert_eq!(p.sizes, vec![10, 50, 200, 500, 1000]);
        assert_eq!((p.trials, p.base_seed), (100, 1));
        let p = ExperimentConfig::new(Experiment::Fig3).resolve().unwrap();
        assert_eq!(p.gamma, 0.25);
        assert_eq!(p.families[1].label(), "erdos_renyi_dense");
    }

    #[test]
    fn parses_flattened_families() {
        let cfg = ExperimentConfig::parse(
            r#"{"experiment":"fig2","sizes":[50],"trials":3,
                "families":[{"family":"erdos_renyi","p":{"one_minus_inv_pow":2.5}},
                            {"label":"sw8","family":"small_world","d_frac":0.125,"p":{"inv_pow":3}}]}"#,
        )
        .unwrap();
        let p = cfg.resolve().unwrap();
        assert_eq!(p.families[0].label(), "erdos_renyi");
        assert_eq!(p.families[1].label(), "sw8");
        assert!(matches!(p.families[1].family, Family::SmallWorld { d_frac, .. } if d_frac == 0.125));
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"experiment":"fig2","trials":0}"#,
            r#"{"experiment":"fig9"}"#,
            r#"{"experiment":"fig2","families":[{"family":"hypercube"}]}"#,
            r#"{"experiment":"fig2","sizes":[1]}"#,
            r#"{"experiment":"fig2","typo":1}"#,
            r#"{"experiment":"fig4","trials":2,"trial_ids":[5]}"#,
            r#"{"experiment":"fig3","families":[{"family":"star_erased","p":{"const":0.1}},{"family":"star_erased","p":{"const":0.2}}]}"#,
        ] {
            let r = ExperimentConfig::parse(text).and_then(|c| c.resolve());
            assert!(matches!(r, Err(BenchError::Config(_))), "{text}");
        }
    }

    #[test]
    fn seeds_depend_only_on_trial() {
        let p = ExperimentConfig::new(Experiment::Table2).resolve().unwrap();
        assert_eq!(p.seed(0), 1);
        assert_eq!(p.seed(41), 42);
    }
}
