//! Gated learning dynamics: sequential best response, simultaneous gradient
//! play, their ungated exact variants, and ascent on the potential.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionProfile, LqGame};
use crate::potential::{self, alpha_lq, grad_phi_lq, phi_abs_upper_bound, phi_delta, phi_delta_unilateral};

/// Which player moves when several pass the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// First gated player after the last updater, wrapping around.
    #[default]
    Cyclic,
    /// Uniform among the gated players.
    RandomImproving,
    /// One uniform player per iteration, who moves only if gated. Iterations
    /// that probe an ungated player still count.
    RandomProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub eps: f64,
    /// One step size per player, or a single value for everyone.
    pub etas: Vec<f64>,
    pub max_iters: usize,
    pub selection: Selection,
    pub seed: u64,
    /// Stride for recorded iterates; `Some(0)` records none, `None` picks 1
    /// up to 100 players and 10 beyond.
    pub record_every: Option<usize>,
}

impl LearnerConfig {
    pub fn new(alpha: f64, eps: f64) -> Self {
        LearnerConfig {
            alpha,
            eps,
            etas: Vec::new(),
            max_iters: 10_000,
            selection: Selection::Cyclic,
            seed: 0,
            record_every: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.etas = vec![eta];
        self
    }

    pub fn with_etas(mut self, etas: Vec<f64>) -> Self {
        self.etas = etas;
        self
    }

    pub fn with_max_iters(mut self, k: usize) -> Self {
        self.max_iters = k;
        self
    }

    pub fn with_selection(mut self, selection: Selection, seed: u64) -> Self {
        self.selection = selection;
        self.seed = seed;
        self
    }

    pub fn with_record_every(mut self, stride: usize) -> Self {
        self.record_every = Some(stride);
        self
    }

    fn stride(&self, n: usize) -> usize {
        self.record_every.unwrap_or(if n <= 100 { 1 } else { 10 })
    }

    fn eta(&self, i: usize) -> f64 {
        if self.etas.len() == 1 {
            self.etas[0]
        } else {
            self.etas[i]
        }
    }

    fn check_etas(&self, n: usize) -> Result<()> {
        if !(self.etas.len() == 1 || self.etas.len() == n) {
            return Err(Error::invalid(format!(
                "expected 1 or {n} step sizes, got {}",
                self.etas.len()
            )));
        }
        if self.etas.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        Ok(())
    }

    fn check_gate(&self, needs_eps: bool) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("alpha must be finite and non-negative"));
        }
        if needs_eps && !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Br,
    Gp,
    ExactBr,
    ExactGp,
    PhiGp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Br => "br",
            Algorithm::Gp => "gp",
            Algorithm::ExactBr => "exact-br",
            Algorithm::ExactGp => "exact-gp",
            Algorithm::PhiGp => "phi-gp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GateSilent,
    MaxIters,
    NumericConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iter: usize,
    pub phi: f64,
    pub ne_gap: f64,
    pub actions: ActionProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    /// Thinned iterates; always includes the first and the last.
    pub iterates: Vec<TracePoint>,
    /// `φ(a^k)` for every `k = 0..=iters`.
    pub phi_values: Vec<f64>,
    pub final_profile: ActionProfile,
    pub iters: usize,
    /// Iterations in which some action changed.
    pub updates: usize,
    pub terminated_by: Termination,
    pub ne_gap_final: f64,
    /// Gate silence reached with parameters the guarantees cover.
    pub certified: bool,
    /// Smallest `φ` increase over iterations that moved; `None` if none did.
    pub min_update_increase: Option<f64>,
    /// Largest `φ` decrease over all iterations, `0` if monotone.
    pub max_phi_decrease: f64,
}

/// Relative-plus-absolute stopping tolerance, with `|a_i|` in the scale.
pub fn converged(a_prev: &[f64], a_next: &[f64]) -> bool {
    a_prev
        .iter()
        .zip(a_next)
        .all(|(p, q)| (q - p).abs() <= 1e-8 + 1e-5 * p.abs())
}

#[inline]
fn moved(prev: f64, next: f64) -> bool {
    (next - prev).abs() > 1e-8 + 1e-5 * prev.abs()
}

struct Recorder {
    stride: usize,
    points: Vec<TracePoint>,
    phi_values: Vec<f64>,
    min_increase: Option<f64>,
    max_decrease: f64,
    updates: usize,
}

impl Recorder {
    fn new(stride: usize, phi0: f64) -> Self {
        Recorder {
            stride,
            points: Vec::new(),
            phi_values: vec![phi0],
            min_increase: None,
            max_decrease: 0.0,
            updates: 0,
        }
    }

    fn phi(&self) -> f64 {
        *self.phi_values.last().expect("initial value")
    }

    fn step(&mut self, delta: f64, updated: bool) {
        if updated {
            self.updates += 1;
            self.min_increase = Some(self.min_increase.map_or(delta, |m| m.min(delta)));
        }
        if -delta > self.max_decrease {
            self.max_decrease = -delta;
        }
        let next = self.phi() + delta;
        self.phi_values.push(next);
    }

    fn wants(&self, k: usize) -> bool {
        self.stride > 0 && k % self.stride == 0
    }

    fn record(&mut self, k: usize, gap: f64, a: &[f64]) {
        if self.points.last().is_some_and(|p| p.iter == k) {
            return;
        }
        self.points.push(TracePoint {
            iter: k,
            phi: self.phi(),
            ne_gap: gap,
            actions: a.to_vec().into(),
        });
    }
}

fn check_start(g: &LqGame, a0: &[f64]) -> Result<()> {
    g.check_profile(a0)
}

#[derive(Clone, Copy)]
enum BrGate {
    Improvement(f64),
    Exact,
}

/// Sequential best response gated on utility improvement above `α + ε`.
pub fn run_sequential_br(g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    cfg.check_gate(true)?;
    let mut trace = best_response_loop(g, cfg, a0, BrGate::Improvement(cfg.alpha + cfg.eps))?;
    trace.certified = trace.terminated_by == Termination::GateSilent && cfg.alpha >= alpha_lq(g);
    Ok(trace)
}

/// Ungated sequential best response; stops when no best response moves by
/// more than the convergence tolerance.
pub fn run_exact_br(g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    best_response_loop(g, cfg, a0, BrGate::Exact)
}

fn best_response_loop(g: &LqGame, cfg: &LearnerConfig, a0: &[f64], gate: BrGate) -> Result<RunTrace> {
    check_start(g, a0)?;
    let n = g.n();
    let w_mat = g.network().weights();
    let mut a = a0.to_vec();
    let mut z = w_mat.mul_vec(&a);
    let mut w = w_mat.tr_mul_vec(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder::new(cfg.stride(n), potential::phi_lq(g, &a));
    let fires = |i: usize, a: &[f64], z: &[f64]| match gate {
        BrGate::Improvement(level) => g.gain_at(i, a[i], z[i]) > level,
        BrGate::Exact => moved(a[i], g.best_response_at(i, z[i])),
    };
    let gap_of = |a: &[f64], z: &[f64]| (0..n).map(|i| g.gain_at(i, a[i], z[i])).fold(0.0, f64::max);

    let mut last: Option<usize> = None;
    let mut k = 0;
    let terminated_by = loop {
        if rec.wants(k) {
            rec.record(k, gap_of(&a, &z), &a);
        }
        let chosen = match cfg.selection {
            Selection::Cyclic => {
                let start = last.map_or(0, |l| l + 1);
                (0..n).map(|off| (start + off) % n).find(|&i| fires(i, &a, &z)).map(Some)
            }
            Selection::RandomImproving => {
                let gated: Vec<usize> = (0..n).filter(|&i| fires(i, &a, &z)).collect();
                (!gated.is_empty()).then(|| Some(gated[rng.gen_range(0..gated.len())]))
            }
            Selection::RandomProbe => {
                if (0..n).any(|i| fires(i, &a, &z)) {
                    let i = rng.gen_range(0..n);
                    Some(fires(i, &a, &z).then_some(i))
                } else {
                    None
                }
            }
        };
        let Some(choice) = chosen else {
            break match gate {
                BrGate::Improvement(_) => Termination::GateSilent,
                BrGate::Exact => Termination::NumericConvergence,
            };
        };
        if k == cfg.max_iters {
            break Termination::MaxIters;
        }
        match choice {
            Some(i) => {
                let b = g.best_response_at(i, z[i]);
                let d = b - a[i];
                let delta = phi_delta_unilateral(g, i, a[i], z[i], w[i], d);
                a[i] = b;
                for j in 0..n {
                    z[j] += w_mat[(j, i)] * d;
                    w[j] += w_mat[(i, j)] * d;
                }
                rec.step(delta, true);
                last = Some(i);
            }
            None => rec.step(0.0, false),
        }
        k += 1;
    };
    // refresh aggregates to shed accumulated rounding before the final gap
    let z = w_mat.mul_vec(&a);
    let gap = gap_of(&a, &z);
    if rec.stride > 0 {
        rec.record(k, gap, &a);
    }
    Ok(finish(
        match gate {
            BrGate::Improvement(_) => Algorithm::Br,
            BrGate::Exact => Algorithm::ExactBr,
        },
        rec,
        a,
        k,
        terminated_by,
        gap,
    ))
}

fn finish(
    algorithm: Algorithm,
    rec: Recorder,
    a: Vec<f64>,
    iters: usize,
    terminated_by: Termination,
    ne_gap_final: f64,
) -> RunTrace {
    RunTrace {
        algorithm,
        iterates: rec.points,
        phi_values: rec.phi_values,
        final_profile: a.into(),
        iters,
        updates: rec.updates,
        terminated_by,
        ne_gap_final,
        certified: false,
        min_update_increase: rec.min_increase,
        max_phi_decrease: rec.max_decrease,
    }
}

/// One synchronous gated step: from the gradients at `a`, every player whose
/// `|∂u_i/∂a_i|` exceeds `threshold` takes a projected step.
pub fn gradient_step(g: &LqGame, a: &[f64], threshold: f64, eta: impl Fn(usize) -> f64) -> Vec<f64> {
    let z = g.aggregates(a);
    (0..a.len())
        .map(|i| {
            let gr = g.grad_at(i, a[i], z[i]);
            if gr.abs() > threshold {
                g.action_bounds()[i].project(a[i] + eta(i) * gr)
            } else {
                a[i]
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum GpMode {
    Gated,
    Exact,
    Potential,
}

/// Simultaneous projected gradient play gated on `|∂u_i/∂a_i| > 2α/a_δ`.
///
/// The run is gate-silent once a full iteration leaves the profile
/// unchanged; a gated player pinned at a bound by an outward gradient does
/// not move.
pub fn run_gradient_play(g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    cfg.check_gate(false)?;
    let mut trace = gradient_loop(g, cfg, a0, GpMode::Gated)?;
    let covered = cfg.alpha >= alpha_lq(g)
        && step_bound(g, cfg.alpha).is_ok_and(|b| (0..g.n()).all(|i| cfg.eta(i) <= b.eta_bar_max));
    trace.certified = trace.terminated_by == Termination::GateSilent && covered;
    Ok(trace)
}

/// Ungated simultaneous gradient play, stopped by [`converged`].
pub fn run_exact_gp(g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    gradient_loop(g, cfg, a0, GpMode::Exact)
}

/// Projected gradient ascent on `φ_lq`, stopped by [`converged`].
pub fn run_phi_gradient(g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    gradient_loop(g, cfg, a0, GpMode::Potential)
}

fn gradient_loop(g: &LqGame, cfg: &LearnerConfig, a0: &[f64], mode: GpMode) -> Result<RunTrace> {
    check_start(g, a0)?;
    let n = g.n();
    cfg.check_etas(n)?;
    let threshold = match mode {
        GpMode::Gated => 2.0 * cfg.alpha / g.a_delta(),
        _ => 0.0,
    };
    let w_mat = g.network().weights();
    let mut a = a0.to_vec();
    let mut rec = Recorder::new(cfg.stride(n), potential::phi_lq(g, &a));
    let mut next = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut k = 0;
    let mut z = w_mat.mul_vec(&a);
    let gap_of = |a: &[f64], z: &[f64]| (0..n).map(|i| g.gain_at(i, a[i], z[i])).fold(0.0, f64::max);
    let terminated_by = loop {
        if rec.wants(k) {
            rec.record(k, gap_of(&a, &z), &a);
        }
        let grad_phi = grad_phi_lq(g, &a);
        for i in 0..n {
            let dir = match mode {
                GpMode::Potential => grad_phi[i],
                _ => g.grad_at(i, a[i], z[i]),
            };
            next[i] = if dir.abs() > threshold {
                g.action_bounds()[i].project(a[i] + cfg.eta(i) * dir)
            } else {
                a[i]
            };
        }
        let stop = match mode {
            GpMode::Gated => (next == a).then_some(Termination::GateSilent),
            _ => converged(&a, &next).then_some(Termination::NumericConvergence),
        };
        if let Some(t) = stop {
            break t;
        }
        if k == cfg.max_iters {
            break Termination::MaxIters;
        }
        for i in 0..n {
            d[i] = next[i] - a[i];
        }
        let delta = phi_delta(g, &grad_phi, &d);
        std::mem::swap(&mut a, &mut next);
        z = w_mat.mul_vec(&a);
        rec.step(delta, true);
        k += 1;
    };
    let gap = gap_of(&a, &z);
    if rec.stride > 0 {
        rec.record(k, gap, &a);
    }
    let algorithm = match mode {
        GpMode::Gated => Algorithm::Gp,
        GpMode::Exact => Algorithm::ExactGp,
        GpMode::Potential => Algorithm::PhiGp,
    };
    Ok(finish(algorithm, rec, a, k, terminated_by, gap))
}

/// Dispatches on the algorithm name.
pub fn run(algorithm: Algorithm, g: &LqGame, cfg: &LearnerConfig, a0: &[f64]) -> Result<RunTrace> {
    match algorithm {
        Algorithm::Br => run_sequential_br(g, cfg, a0),
        Algorithm::Gp => run_gradient_play(g, cfg, a0),
        Algorithm::ExactBr => run_exact_br(g, cfg, a0),
        Algorithm::ExactGp => run_exact_gp(g, cfg, a0),
        Algorithm::PhiGp => run_phi_gradient(g, cfg, a0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepBoundReport {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub eta_bar_max: f64,
}

/// Largest step size covered by the gradient-play guarantee.
pub fn step_bound(g: &LqGame, alpha: f64) -> Result<StepBoundReport> {
    step_bound_from_constants(g.a_delta(), potential::smoothness_l(g)?, g.grad_bound(), alpha)
}

pub fn step_bound_from_constants(a_delta: f64, l: f64, d: f64, alpha: f64) -> Result<StepBoundReport> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("step bound needs alpha > 0"));
    }
    if !(a_delta > 0.0 && l > 0.0 && d > 0.0) {
        return Err(Error::invalid("a_delta, L and D must be positive"));
    }
    let xi1 = 1.0 / a_delta;
    let xi2 = (2.0 * xi1 / l).min(1.0 / d);
    let a2 = alpha * alpha;
    let eta_bar_max = (1.0 / l)
        .min(2.0 * xi1 * xi1 * a2 / (l * d * d))
        .min(l * xi2 * xi2 * a2 / (2.0 * (xi1 * alpha * d + xi1 * xi1 * a2)));
    Ok(StepBoundReport {
        l,
        d,
        xi1,
        xi2,
        eta_bar_max,
    })
}

/// `⌈2 max|φ| / ε⌉` with the interval bound on `max|φ|`.
pub fn iteration_bound(g: &LqGame, eps: f64) -> Result<u64> {
    iteration_bound_from(phi_abs_upper_bound(g), eps)
}

pub fn iteration_bound_from(phi_abs_max: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let k = (2.0 * phi_abs_max / eps).ceil();
    Ok(if k >= u64::MAX as f64 { u64::MAX } else { k as u64 })
}

/// Writes `iter,phi,ne_gap,a_1..a_N` for every recorded iterate.
pub fn write_trace_csv<W: Write>(trace: &RunTrace, out: W) -> Result<()> {
    let n = trace.final_profile.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string(), "phi".into(), "ne_gap".into()];
    header.extend((1..=n).map(|i| format!("a_{i}")));
    let io = |e: csv::Error| Error::format("trace", e.to_string());
    w.write_record(&header).map_err(io)?;
    for p in &trace.iterates {
        let mut row = vec![p.iter.to_string(), p.phi.to_string(), p.ne_gap.to_string()];
        row.extend(p.actions.as_slice().iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::format("trace", e.to_string()))
}

/// Uniform start profile for experiments.
pub fn random_start<R: Rng + ?Sized>(g: &LqGame, rng: &mut R) -> Vec<f64> {
    ActionProfile::sample(g.action_bounds(), rng).into_vec()
}

/// `max_i |∂u_i/∂a_i|`, used to check gradient-play silence externally.
pub fn max_abs_gradient(g: &LqGame, a: &[f64]) -> f64 {
    let z = g.aggregates(a);
    (0..g.n()).map(|i| g.grad_at(i, a[i], z[i]).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Interval, SmoothGame};
    use crate::linalg::Matrix;
    use crate::network::Network;

    fn unit() -> Interval {
        Interval::symmetric(1.0).unwrap()
    }

    fn random_game(rng: &mut ChaCha8Rng, n: usize) -> LqGame {
        let m = Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) / n as f64 });
        let beta = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        LqGame::new(Network::new(m).unwrap(), beta, rng.gen_range(-1.5..1.5), vec![unit(); n]).unwrap()
    }

    fn one_player(beta: f64) -> LqGame {
        LqGame::new(Network::from_rows(vec![vec![0.0]]).unwrap(), vec![beta], 0.0, vec![unit()]).unwrap()
    }

    #[test]
    fn converged_examples() {
        assert!(converged(&[0.3, -0.2], &[0.3, -0.2]));
        assert!(!converged(&[1.0, 1.0], &[1.0 + 2e-5, 1.0]));
        assert!(converged(&[-1.0], &[-1.0 + 5e-6]));
    }

    #[test]
    fn single_player_best_response() {
        let g = one_player(0.0);
        let cfg = LearnerConfig::new(0.01, 0.01);
        let t = run_sequential_br(&g, &cfg, &[1.0]).unwrap();
        assert_eq!(t.updates, 1);
        assert_eq!(t.final_profile.as_slice(), &[0.0]);
        assert_eq!(t.terminated_by, Termination::GateSilent);
        assert_eq!(t.ne_gap_final, 0.0);
        assert!(t.certified);
    }

    #[test]
    fn symmetric_pair_reaches_fixed_point() {
        let net = Network::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = LqGame::uniform(net, 0.3, 0.4, unit()).unwrap();
        let cfg = LearnerConfig::new(0.0, 1e-6);
        let t = run_sequential_br(&g, &cfg, &[-1.0, 1.0]).unwrap();
        assert_eq!(t.terminated_by, Termination::GateSilent);
        for x in t.final_profile.as_slice() {
            assert!((x - 0.5).abs() < 1e-3);
        }
        let t = run_exact_br(&g, &cfg, &[-1.0, 1.0]).unwrap();
        assert_eq!(t.terminated_by, Termination::NumericConvergence);
        // stops once moves fall under 1e−8 + 1e−5|a|; the map contracts by γ
        for x in t.final_profile.as_slice() {
            assert!((x - 0.5).abs() < 2e-5);
        }
    }

    #[test]
    fn gradient_play_silent_at_start() {
        let g = one_player(0.3);
        let cfg = LearnerConfig::new(0.5, 0.0).with_eta(0.1);
        // |grad| = 0.1 ≤ 2α/a_δ = 0.5
        let t = run_gradient_play(&g, &cfg, &[0.2]).unwrap();
        assert_eq!((t.iters, t.updates), (0, 0));
        assert_eq!(t.terminated_by, Termination::GateSilent);
    }

    #[test]
    fn gradient_play_scalar_ascent() {
        let g = one_player(0.4);
        let alpha = 0.05;
        let sb = step_bound(&g, alpha).unwrap();
        let cfg = LearnerConfig::new(alpha, 0.0)
            .with_eta(sb.eta_bar_max)
            .with_max_iters(1_000_000)
            .with_record_every(0);
        let t = run_gradient_play(&g, &cfg, &[-1.0]).unwrap();
        assert_eq!(t.terminated_by, Termination::GateSilent);
        assert!(t.certified);
        assert!(t.ne_gap_final <= 2.0 * alpha);
        assert!((t.final_profile[0] - 0.4).abs() <= 2.0 * alpha / g.a_delta() + 1e-12);
    }

    #[test]
    fn exact_variants_single_player() {
        let g = one_player(0.4);
        let cfg = LearnerConfig::new(0.0, 0.0).with_eta(1.0);
        let t = run_exact_br(&g, &cfg, &[-0.7]).unwrap();
        assert!(t.iters <= 2 && t.terminated_by == Termination::NumericConvergence);
        let t = run_exact_gp(&g, &cfg, &[-0.7]).unwrap();
        assert!(t.iters <= 2 && t.terminated_by == Termination::NumericConvergence);
    }

    #[test]
    fn step_bound_examples() {
        let r = step_bound_from_constants(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((r.xi1, r.xi2), (0.5, 1.0));
        assert!((r.eta_bar_max - 0.5).abs() < 1e-15);
        assert!(step_bound_from_constants(2.0, 1.0, 1.0, 0.0).is_err());

        let mut last = 0.0;
        for k in 1..=200 {
            let eta = step_bound_from_constants(2.0, 3.0, 5.0, k as f64 * 0.01).unwrap().eta_bar_max;
            assert!(eta >= last);
            last = eta;
        }
        for d in [0.5, 1.0, 2.0, 7.0] {
            for alpha in [0.01, 0.3, 2.0] {
                let a = step_bound_from_constants(2.0, 3.0, d, alpha).unwrap().eta_bar_max;
                let b = step_bound_from_constants(2.0, 3.0, 2.0 * d, alpha).unwrap().eta_bar_max;
                assert!(b <= a);
            }
        }
    }

    #[test]
    fn iteration_bound_examples() {
        assert_eq!(iteration_bound_from(1.0, 0.5).unwrap(), 4);
        assert_eq!(iteration_bound_from(1.0, 1.0).unwrap(), 2);
        assert!(iteration_bound_from(1.0, 0.0).is_err());
    }

    #[test]
    fn br_phi_increments_exceed_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let g = random_game(&mut rng, 12);
            let alpha = alpha_lq(&g);
            let eps = alpha.max(1e-4);
            let cfg = LearnerConfig::new(alpha, eps).with_max_iters(1_000_000);
            let a0 = random_start(&g, &mut rng);
            let t = run_sequential_br(&g, &cfg, &a0).unwrap();
            assert_eq!(t.terminated_by, Termination::GateSilent);
            assert!(t.updates as u64 <= iteration_bound(&g, eps).unwrap());
            assert!(t.ne_gap_final <= alpha + eps + 1e-9);
            if let Some(m) = t.min_update_increase {
                assert!(m > eps - 1e-12);
            }
            // the accumulated φ agrees with direct evaluation
            let direct = potential::phi_lq(&g, t.final_profile.as_slice());
            assert!((t.phi_values.last().unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn selection_rules_all_certify() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_game(&mut rng, 10);
        let alpha = alpha_lq(&g);
        let a0 = random_start(&g, &mut rng);
        for sel in [Selection::Cyclic, Selection::RandomImproving, Selection::RandomProbe] {
            let cfg = LearnerConfig::new(alpha, alpha).with_selection(sel, 7).with_max_iters(100_000);
            let t = run_sequential_br(&g, &cfg, &a0).unwrap();
            assert!(t.certified, "{sel:?}");
            assert!(t.iters >= t.updates);
        }
    }

    #[test]
    fn deterministic_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_game(&mut rng, 8);
        let a0 = random_start(&g, &mut rng);
        let alpha = alpha_lq(&g);
        for sel in [Selection::Cyclic, Selection::RandomProbe] {
            let cfg = LearnerConfig::new(alpha, 1e-3).with_selection(sel, 11);
            assert_eq!(run_sequential_br(&g, &cfg, &a0).unwrap(), run_sequential_br(&g, &cfg, &a0).unwrap());
        }
    }

    #[test]
    fn gradient_step_is_relabeling_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 7;
        let g = random_game(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let w = g.network().weights();
        let pw = Matrix::from_fn(n, |i, j| w[(perm[i], perm[j])]);
        let pbeta = perm.iter().map(|&p| g.beta()[p]).collect();
        let pg = LqGame::new(Network::new(pw).unwrap(), pbeta, g.gamma(), vec![unit(); n]).unwrap();
        let a = random_start(&g, &mut rng);
        let pa: Vec<f64> = perm.iter().map(|&p| a[p]).collect();
        let etas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.5)).collect();
        let step = gradient_step(&g, &a, 0.05, |i| etas[i]);
        let pstep = gradient_step(&pg, &pa, 0.05, |i| etas[perm[i]]);
        for i in 0..n {
            assert_eq!(pstep[i], step[perm[i]]);
        }
    }

    #[test]
    fn phi_gradient_reaches_potential_maximizer() {
        let net = Network::from_rows(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let g = LqGame::uniform(net, 0.1, 0.25, unit()).unwrap();
        let l = potential::smoothness_l(&g).unwrap();
        let cfg = LearnerConfig::new(0.0, 0.0).with_eta(1.0 / l).with_max_iters(100_000);
        let t = run_phi_gradient(&g, &cfg, &[0.9, -0.8]).unwrap();
        assert_eq!(t.terminated_by, Termination::NumericConvergence);
        for x in t.final_profile.as_slice() {
            assert!((x - 0.1 / 0.875).abs() < 1e-5);
        }
    }

    #[test]
    fn phi_gradient_equals_exact_gp_on_symmetric_games() {
        let net = Network::from_rows(vec![vec![0.0, 0.3, -0.2], vec![0.3, 0.0, 0.1], vec![-0.2, 0.1, 0.0]]).unwrap();
        let g = LqGame::uniform(net, 0.2, 0.8, unit()).unwrap();
        let cfg = LearnerConfig::new(0.0, 0.0).with_eta(0.3);
        let a0 = [0.5, -0.5, 0.1];
        let x = run_exact_gp(&g, &cfg, &a0).unwrap();
        let y = run_phi_gradient(&g, &cfg, &a0).unwrap();
        assert_eq!(x.iters, y.iters);
        for (p, q) in x.iterates.iter().zip(&y.iterates) {
            for (u, v) in p.actions.as_slice().iter().zip(q.actions.as_slice()) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn payments_vary_by_at_most_alpha_in_own_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_game(&mut rng, 6);
            let alpha = alpha_lq(&g);
            let l = potential::smoothness_l(&g).unwrap();
            let cfg = LearnerConfig::new(0.0, 0.0).with_eta(1.0 / l).with_max_iters(2000);
            let t = run_phi_gradient(&g, &cfg, &random_start(&g, &mut rng)).unwrap();
            let first = &t.iterates.first().unwrap().actions;
            let last = &t.final_profile;
            for i in 0..6 {
                let e = |a: &ActionProfile| potential::phi_lq(&g, a.as_slice()) - g.utility(i, a.as_slice());
                let mut own = first.clone();
                own.as_mut_slice()[i] = last[i];
                assert!((e(&own) - e(first)).abs() <= alpha + 1e-12);
            }
        }
    }

    #[test]
    fn payments_are_not_bounded_by_n_alpha_overall() {
        // symmetric network: α = 0, yet e_1 = φ − u_1 moves with a_2
        let net = Network::from_rows(vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let g = LqGame::uniform(net, 0.1, 0.25, unit()).unwrap();
        assert_eq!(alpha_lq(&g), 0.0);
        let e = |a: &[f64]| potential::phi_lq(&g, a) - g.utility(0, a);
        assert!((e(&[0.0, 0.8]) - e(&[0.0, 0.0])).abs() > 0.1);
    }

    #[test]
    fn trace_csv_layout() {
        let g = one_player(0.0);
        let t = run_sequential_br(&g, &LearnerConfig::new(0.01, 0.01), &[1.0]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,phi,ne_gap,a_1");
        assert_eq!(lines[1], "0,-0.5,0.5,1");
        assert_eq!(lines[2], "1,0,0,0");
    }

    #[test]
    fn rejects_bad_configs() {
        let g = one_player(0.0);
        assert!(run_sequential_br(&g, &LearnerConfig::new(0.0, 0.0), &[0.0]).is_err());
        assert!(run_gradient_play(&g, &LearnerConfig::new(0.1, 0.0), &[0.0]).is_err());
        assert!(run_gradient_play(&g, &LearnerConfig::new(0.1, 0.0).with_eta(-1.0), &[0.0]).is_err());
        assert!(run_sequential_br(&g, &LearnerConfig::new(0.1, 0.1), &[2.0]).is_err());
    }
}
