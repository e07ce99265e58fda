//! Per-unit computations. A unit is one (family, N, trial) cell; each
//! returns named metrics and, for the trace experiment, φ trajectories.

use netgame_core::dynamics::{self, Algorithm, LearnerConfig, RunTrace, Termination};
use netgame_core::game::{max_abs_utility, relative_ne_gap, social_welfare};
use netgame_core::network::{example_clique, example_clique_with_hub};
use netgame_core::potential::{alpha_general, alpha_lq, phi_max_lq};
use netgame_core::welfare::welfare_ratio;
use netgame_core::{Family, Interval, LqGame, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, Plan};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub family: String,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    /// Index into the plan's families; `None` for the fixed examples.
    family_index: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitOutput {
    pub metrics: Vec<(String, f64)>,
    /// (algorithm, iteration, φ)
    pub traces: Vec<(String, usize, f64)>,
}

impl UnitOutput {
    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    fn flag(&mut self, name: impl Into<String>, value: bool) {
        self.push(name, if value { 1.0 } else { 0.0 });
    }
}

/// Metrics whose name ends in this suffix flag an invariant; a zero value
/// is an invariant failure.
pub const INVARIANT_SUFFIX: &str = "_ok";

/// Monotonicity slack for the recorded φ trajectories.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Slack for the final φ against its maximum.
pub const PHI_MAX_TOL: f64 = 1e-9;

/// The Table-3 algorithms in reporting order.
pub const LEARNERS: [Algorithm; 4] = [Algorithm::Br, Algorithm::Gp, Algorithm::ExactBr, Algorithm::ExactGp];

/// All units of a plan, ordered by (family label, N, trial).
pub fn units(plan: &Plan) -> Vec<Unit> {
    let mut out = Vec::new();
    match plan.experiment {
        Experiment::Fig1 => {
            for (label, net) in fig1_networks() {
                out.push(Unit {
                    family: label.to_string(),
                    n: net.n(),
                    trial: 0,
                    seed: plan.seed(0),
                    family_index: None,
                });
            }
        }
        e => {
            let trials: Vec<usize> = if e == Experiment::Fig4 {
                plan.trial_ids.clone()
            } else {
                (0..plan.trials).collect()
            };
            for (k, f) in plan.families.iter().enumerate() {
                for &n in &plan.sizes {
                    for &t in &trials {
                        out.push(Unit {
                            family: f.label().to_string(),
                            n,
                            trial: t,
                            seed: plan.seed(t),
                            family_index: Some(k),
                        });
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| (&a.family, a.n, a.trial).cmp(&(&b.family, b.n, b.trial)));
    out.dedup_by(|a, b| (&a.family, a.n, a.trial) == (&b.family, b.n, b.trial));
    out
}

pub fn fig1_networks() -> [(&'static str, Network); 2] {
    [("G1", example_clique()), ("G2", example_clique_with_hub())]
}

fn unit_box() -> Interval {
    Interval::symmetric(1.0).expect("static interval")
}

pub fn compute(plan: &Plan, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let family = unit.family_index.map(|k| &plan.families[k].family);
    match (plan.experiment, family) {
        (Experiment::Fig1, _) => fig1(plan, unit),
        (Experiment::Fig2, Some(f)) => fig2(plan, f, unit),
        (Experiment::Table2, Some(f)) => table2(f, unit),
        (Experiment::Fig3, Some(f)) => fig3(plan, f, unit),
        (Experiment::Table3, Some(f)) => table3(plan, f, unit),
        (Experiment::Table4, Some(f)) => table4(plan, f, unit),
        (Experiment::Fig4, Some(f)) => fig4(plan, f, unit),
        (_, None) => Err(BenchError::Config("experiment needs a family".into())),
    }
}

fn fig1(plan: &Plan, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let (_, net) = fig1_networks()
        .into_iter()
        .find(|(l, _)| *l == unit.family)
        .ok_or_else(|| BenchError::Config(format!("unknown example network {}", unit.family)))?;
    let mut out = UnitOutput::default();
    out.flag("symmetric", net.is_symmetric());
    let m = net.metrics()?;
    out.push("norm2", m.norm2);
    out.push("norm_inf", m.norm_inf);
    out.push("asym_inf", m.asym_inf);
    let g = LqGame::uniform(net, 0.0, plan.gamma, unit_box())?;
    let a_lq = alpha_lq(&g);
    let a_gen = alpha_general(&g);
    let scale = g.a_delta() / g.a_bar();
    out.push("alpha_lq", a_lq);
    out.push("alpha_general", a_gen.value);
    out.push("alpha_ratio", a_gen.value / a_lq);
    out.push("a_delta_over_a_bar", scale);
    out.flag("alpha_consistent_ok", (a_gen.value - scale * a_lq).abs() <= 1e-12 * a_gen.value.abs().max(1.0));
    out.push("max_abs_utility", max_abs_utility(&g)?);
    Ok(out)
}

fn fig2(plan: &Plan, family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let net = family.generate(unit.n, unit.seed)?;
    let m = net.metrics()?;
    let bound = family.asymmetry_bound(unit.n, plan.t);
    let mut out = UnitOutput::default();
    out.push("asym_inf", m.asym_inf);
    out.push("norm2", m.norm2);
    out.push("norm_inf", m.norm_inf);
    out.push("bound", bound);
    out.flag("bound_holds", m.asym_inf <= bound);
    Ok(out)
}

fn table2(family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let m = family.generate(unit.n, unit.seed)?.metrics()?;
    let mut out = UnitOutput::default();
    out.push("asym_inf", m.asym_inf);
    out.push("norm2", m.norm2);
    out.push("norm_inf", m.norm_inf);
    Ok(out)
}

/// Biases for the welfare experiment, uniform in this range.
pub const WELFARE_BETA: (f64, f64) = (0.1, 0.5);

fn fig3(plan: &Plan, family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(unit.seed);
    let net = family.sample(unit.n, &mut rng)?;
    let beta = (0..unit.n).map(|_| rng.gen_range(WELFARE_BETA.0..=WELFARE_BETA.1)).collect();
    let g = LqGame::new(net, beta, plan.gamma, vec![unit_box(); unit.n])?;
    let r = welfare_ratio(&g)?;
    let mut out = UnitOutput::default();
    out.push("pos_lambda", r.pos_lambda);
    out.push("pos_G", r.pos_g);
    out.push("pos_gamma", r.pos_gamma);
    out.push("ratio", r.ratio);
    out.push("lam_min", r.lam_min);
    out.push("lam_max", r.lam_max);
    out.flag("chain_ok", r.chain_holds);
    Ok(out)
}

/// One trial of the learning setup: game, the α its network induces, a
/// shared uniform start, and selection seeds for the two best-response runs.
pub struct LearningTrial {
    pub game: LqGame,
    pub alpha: f64,
    pub a0: Vec<f64>,
    pub br_seed: u64,
    pub exact_br_seed: u64,
}

impl LearningTrial {
    /// Draws network, start and selection seeds, in that order, from one
    /// stream seeded by `seed`.
    pub fn new(family: &Family, n: usize, gamma: f64, seed: u64) -> Result<Self, BenchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = family.sample(n, &mut rng)?;
        let game = LqGame::uniform(net, 0.0, gamma, unit_box())?;
        let a0 = dynamics::random_start(&game, &mut rng);
        let br_seed = rng.gen();
        let exact_br_seed = rng.gen();
        Ok(LearningTrial {
            alpha: alpha_lq(&game),
            game,
            a0,
            br_seed,
            exact_br_seed,
        })
    }

    /// Gated runs use `ε = α`; exact runs use `α = ε = 0`.
    pub fn config(&self, plan: &Plan, algorithm: Algorithm) -> LearnerConfig {
        let base = match algorithm {
            Algorithm::Br | Algorithm::Gp => LearnerConfig::new(self.alpha, self.alpha),
            _ => LearnerConfig::new(0.0, 0.0),
        };
        let base = base.with_max_iters(plan.max_iters).with_record_every(0);
        match algorithm {
            Algorithm::Br => base.with_selection(plan.selection, self.br_seed),
            Algorithm::ExactBr => base.with_selection(plan.selection, self.exact_br_seed),
            _ => base.with_eta(plan.eta),
        }
    }

    pub fn run(&self, plan: &Plan, algorithm: Algorithm) -> Result<RunTrace, BenchError> {
        Ok(dynamics::run(algorithm, &self.game, &self.config(plan, algorithm), &self.a0)?)
    }
}

/// Gate silence for the gated runs, the numeric tolerance for the exact ones.
pub fn converged(trace: &RunTrace) -> bool {
    matches!(
        trace.terminated_by,
        Termination::GateSilent | Termination::NumericConvergence
    )
}

fn table3(plan: &Plan, family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let trial = LearningTrial::new(family, unit.n, plan.gamma, unit.seed)?;
    let mut out = UnitOutput::default();
    out.push("alpha", trial.alpha);
    let mut results = Vec::new();
    for alg in LEARNERS {
        let tr = trial.run(plan, alg)?;
        let welfare = social_welfare(&trial.game, tr.final_profile.as_slice());
        let name = alg.name();
        out.flag(format!("{name}.converged"), converged(&tr));
        out.push(format!("{name}.iters"), tr.iters as f64);
        out.push(format!("{name}.welfare"), welfare);
        out.push(format!("{name}.ne_gap"), tr.ne_gap_final);
        results.push((name, converged(&tr), tr.iters, welfare));
    }
    let all = results.iter().all(|r| r.1);
    out.flag("all_converged", all);
    // emitted only for jointly converged trials, so their means are the
    // jointly conditioned means
    if all {
        for (name, _, iters, welfare) in results {
            out.push(format!("{name}.iters_joint"), iters as f64);
            out.push(format!("{name}.welfare_joint"), welfare);
        }
    }
    Ok(out)
}

fn table4(plan: &Plan, family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let trial = LearningTrial::new(family, unit.n, plan.gamma, unit.seed)?;
    let mut out = UnitOutput::default();
    out.push("alpha", trial.alpha);
    for alg in [Algorithm::Br, Algorithm::Gp] {
        let tr = trial.run(plan, alg)?;
        let rel = relative_ne_gap(&trial.game, tr.final_profile.as_slice());
        let name = alg.name();
        out.push(format!("{name}.relative_gap"), rel.value);
        out.push(format!("{name}.guarded_players"), rel.flagged.len() as f64);
        out.flag(format!("{name}.converged"), converged(&tr));
    }
    Ok(out)
}

fn fig4(plan: &Plan, family: &Family, unit: &Unit) -> Result<UnitOutput, BenchError> {
    let trial = LearningTrial::new(family, unit.n, plan.gamma, unit.seed)?;
    let pm = phi_max_lq(&trial.game)?;
    // the ascent value is only a local maximum, so fall back to the bound
    let ceiling = if pm.certified { pm.value } else { pm.abs_upper_bound };
    let mut out = UnitOutput::default();
    out.push("alpha", trial.alpha);
    out.push("phi_max", pm.value);
    out.flag("phi_max_certified", pm.certified);
    out.push("phi_ceiling", ceiling);
    for alg in [Algorithm::Br, Algorithm::Gp] {
        let tr = trial.run(plan, alg)?;
        let name = alg.name();
        let last = *tr.phi_values.last().expect("initial value");
        out.push(format!("{name}.phi_initial"), tr.phi_values[0]);
        out.push(format!("{name}.phi_final"), last);
        out.push(format!("{name}.iters"), tr.iters as f64);
        out.push(format!("{name}.max_phi_decrease"), tr.max_phi_decrease);
        out.flag(format!("{name}.monotone_ok"), is_monotone(&tr.phi_values, MONOTONE_TOL));
        out.flag(format!("{name}.below_max_ok"), last <= ceiling + PHI_MAX_TOL);
        out.traces
            .extend(tr.phi_values.iter().enumerate().map(|(k, &phi)| (name.to_string(), k, phi)));
    }
    Ok(out)
}

/// Every step decreases by at most `tol`.
pub fn is_monotone(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - tol)
}
