//! Linear-quadratic network games and the generic smooth-game interface.
//!
//! Player `i` earns `u_i(a) = −½ a_i² + β_i a_i + γ z_i a_i` where
//! `z_i = Σ_j G_ij a_j` is the local aggregate of its in-neighbours.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{load_network, Network, NetworkFile};

/// Compact action interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("degenerate action interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(-half, half)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `max(|lo|, |hi|)`
    #[inline]
    pub fn abs_max(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    #[inline]
    pub fn project(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    /// Affine map of `t ∈ [0, 1]` into the interval.
    #[inline]
    pub fn lerp(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

/// One action per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(Vec<f64>);

impl ActionProfile {
    pub fn new(actions: Vec<f64>) -> Self {
        ActionProfile(actions)
    }

    pub fn zeros(n: usize) -> Self {
        ActionProfile(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Uniform random point of the product of `bounds`.
    pub fn sample<R: rand::Rng + ?Sized>(bounds: &[Interval], rng: &mut R) -> Self {
        ActionProfile(bounds.iter().map(|b| b.lerp(rng.gen::<f64>())).collect())
    }

    pub fn is_feasible(&self, bounds: &[Interval]) -> bool {
        self.0.len() == bounds.len() && self.0.iter().zip(bounds).all(|(a, b)| b.contains(*a))
    }
}

impl From<Vec<f64>> for ActionProfile {
    fn from(v: Vec<f64>) -> Self {
        ActionProfile(v)
    }
}

impl AsRef<[f64]> for ActionProfile {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for ActionProfile {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A game with scalar interval actions and twice-differentiable utilities.
///
/// Implementations panic on out-of-range player indices, like slices do; the
/// checked free functions in this module return [`Error::IndexOutOfRange`].
pub trait SmoothGame {
    fn num_players(&self) -> usize;
    fn bounds(&self, i: usize) -> Interval;
    fn utility(&self, i: usize, a: &[f64]) -> f64;
    /// `∂u_i/∂a_i`
    fn grad_own(&self, i: usize, a: &[f64]) -> f64;
    /// `∂²u_i/(∂a_i ∂a_j)`
    fn cross_second(&self, i: usize, j: usize, a: &[f64]) -> f64;

    /// Whether each `u_i` is concave in its own action.
    fn own_concave(&self) -> bool {
        false
    }

    /// Whether `cross_second` does not depend on the profile.
    fn constant_cross_second(&self) -> bool {
        false
    }

    /// False when derivatives come from finite differences.
    fn exact_derivatives(&self) -> bool {
        true
    }

    /// Closed-form best response, when one is known.
    fn best_response(&self, _i: usize, _a: &[f64]) -> Option<f64> {
        None
    }

    fn all_bounds(&self) -> Vec<Interval> {
        (0..self.num_players()).map(|i| self.bounds(i)).collect()
    }

    /// `a_δ = max_i (hi_i − lo_i)`
    fn action_spread(&self) -> f64 {
        (0..self.num_players())
            .map(|i| self.bounds(i).width())
            .fold(0.0, f64::max)
    }

    /// `ā = max_i max(|lo_i|, |hi_i|)`
    fn action_radius(&self) -> f64 {
        (0..self.num_players())
            .map(|i| self.bounds(i).abs_max())
            .fold(0.0, f64::max)
    }
}

/// LQ network game with cached problem constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LqGame {
    net: Network,
    beta: Vec<f64>,
    gamma: f64,
    bounds: Vec<Interval>,
    a_bar: f64,
    a_delta: f64,
    grad_bound: f64,
}

impl LqGame {
    pub fn new(net: Network, beta: Vec<f64>, gamma: f64, bounds: Vec<Interval>) -> Result<Self> {
        let n = net.n();
        if beta.len() != n || bounds.len() != n {
            return Err(Error::invalid(format!(
                "network has {n} players but beta has {} and bounds has {}",
                beta.len(),
                bounds.len()
            )));
        }
        if !gamma.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("gamma and beta must be finite"));
        }
        let a_bar = bounds.iter().map(Interval::abs_max).fold(0.0, f64::max);
        let a_delta = bounds.iter().map(Interval::width).fold(0.0, f64::max);
        // |−a_i + β_i + γ z_i| ≤ m_i + |β_i| + |γ| Σ_j |G_ij| m_j
        let grad_bound = (0..n)
            .map(|i| {
                let coupling: f64 = (0..n)
                    .map(|j| net.weight(i, j).abs() * bounds[j].abs_max())
                    .sum();
                bounds[i].abs_max() + beta[i].abs() + gamma.abs() * coupling
            })
            .fold(0.0, f64::max);
        Ok(LqGame {
            net,
            beta,
            gamma,
            bounds,
            a_bar,
            a_delta,
            grad_bound,
        })
    }

    /// Same interval and bias for every player.
    pub fn uniform(net: Network, beta: f64, gamma: f64, bounds: Interval) -> Result<Self> {
        let n = net.n();
        Self::new(net, vec![beta; n], gamma, vec![bounds; n])
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn action_bounds(&self) -> &[Interval] {
        &self.bounds
    }

    /// `ā`
    pub fn a_bar(&self) -> f64 {
        self.a_bar
    }

    /// `a_δ`
    pub fn a_delta(&self) -> f64 {
        self.a_delta
    }

    /// Interval-arithmetic bound `D ≥ sup |∂u_i/∂a_i|` over the action box.
    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }

    pub fn check_profile(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.n() {
            return Err(Error::invalid(format!(
                "profile has {} actions, game has {} players",
                a.len(),
                self.n()
            )));
        }
        if let Some(i) = (0..a.len()).find(|&i| !self.bounds[i].contains(a[i])) {
            return Err(Error::invalid(format!(
                "action {} of player {} is outside [{}, {}]",
                a[i],
                i + 1,
                self.bounds[i].lo(),
                self.bounds[i].hi()
            )));
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, len: self.n() });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn aggregate_unchecked(&self, i: usize, a: &[f64]) -> f64 {
        crate::linalg::dot(self.net.weights().row(i), a)
    }

    /// All local aggregates `G a`.
    pub fn aggregates(&self, a: &[f64]) -> Vec<f64> {
        self.net.weights().mul_vec(a)
    }

    /// `u_i` as a function of own action `x` and local aggregate `z`.
    #[inline]
    pub fn utility_at(&self, i: usize, x: f64, z: f64) -> f64 {
        -0.5 * x * x + self.beta[i] * x + self.gamma * z * x
    }

    #[inline]
    pub fn grad_at(&self, i: usize, x: f64, z: f64) -> f64 {
        -x + self.beta[i] + self.gamma * z
    }

    #[inline]
    pub fn best_response_at(&self, i: usize, z: f64) -> f64 {
        self.bounds[i].project(self.beta[i] + self.gamma * z)
    }

    /// Unilateral improvement available to player `i` at aggregate `z`.
    #[inline]
    pub fn gain_at(&self, i: usize, x: f64, z: f64) -> f64 {
        let b = self.best_response_at(i, z);
        (self.utility_at(i, b, z) - self.utility_at(i, x, z)).max(0.0)
    }

    /// Per-player gaps at `a` using exact best responses.
    pub fn nash_gap(&self, a: &[f64]) -> NashGap {
        let z = self.aggregates(a);
        let per_player: Vec<f64> = (0..self.n()).map(|i| self.gain_at(i, a[i], z[i])).collect();
        NashGap::from_per_player(per_player)
    }
}

impl SmoothGame for LqGame {
    fn num_players(&self) -> usize {
        self.n()
    }

    fn bounds(&self, i: usize) -> Interval {
        self.bounds[i]
    }

    fn utility(&self, i: usize, a: &[f64]) -> f64 {
        self.utility_at(i, a[i], self.aggregate_unchecked(i, a))
    }

    fn grad_own(&self, i: usize, a: &[f64]) -> f64 {
        self.grad_at(i, a[i], self.aggregate_unchecked(i, a))
    }

    fn cross_second(&self, i: usize, j: usize, _a: &[f64]) -> f64 {
        if i == j {
            -1.0
        } else {
            self.gamma * self.net.weight(i, j)
        }
    }

    fn own_concave(&self) -> bool {
        true
    }

    fn constant_cross_second(&self) -> bool {
        true
    }

    fn best_response(&self, i: usize, a: &[f64]) -> Option<f64> {
        Some(self.best_response_at(i, self.aggregate_unchecked(i, a)))
    }

    fn action_spread(&self) -> f64 {
        self.a_delta
    }

    fn action_radius(&self) -> f64 {
        self.a_bar
    }
}

// ── checked operations ──────────────────────────────────────────────

/// `z_i = Σ_j G_ij a_j`
pub fn local_aggregate(g: &LqGame, i: usize, a: &[f64]) -> Result<f64> {
    g.check_index(i)?;
    Ok(g.aggregate_unchecked(i, a))
}

pub fn utility(g: &LqGame, i: usize, a: &[f64]) -> Result<f64> {
    g.check_index(i)?;
    Ok(SmoothGame::utility(g, i, a))
}

pub fn grad_own(g: &LqGame, i: usize, a: &[f64]) -> Result<f64> {
    g.check_index(i)?;
    Ok(SmoothGame::grad_own(g, i, a))
}

pub fn best_response(g: &LqGame, i: usize, a: &[f64]) -> Result<f64> {
    g.check_index(i)?;
    Ok(g.best_response_at(i, g.aggregate_unchecked(i, a)))
}

/// `SW(a) = Σ_i u_i(a)`
pub fn social_welfare(g: &LqGame, a: &[f64]) -> f64 {
    let z = g.aggregates(a);
    (0..g.n()).map(|i| g.utility_at(i, a[i], z[i])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashGap {
    /// `max_i per_player[i]`
    pub eps: f64,
    pub per_player: Vec<f64>,
}

impl NashGap {
    fn from_per_player(per_player: Vec<f64>) -> Self {
        let eps = per_player.iter().copied().fold(0.0, f64::max);
        NashGap { eps, per_player }
    }
}

const GOLDEN_TOL: f64 = 1e-10;

/// Maximizes a concave function on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, iv: Interval) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (iv.lo(), iv.hi());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(mid, f(mid)), (iv.lo(), f(iv.lo())), (iv.hi(), f(iv.hi()))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Largest unilateral improvement for every player.
///
/// Uses closed-form best responses when the game has them, otherwise
/// golden-section search, which is only valid for own-concave games.
pub fn ne_gap(g: &dyn SmoothGame, a: &[f64]) -> Result<NashGap> {
    let n = g.num_players();
    if a.len() != n {
        return Err(Error::invalid(format!("profile length {} != {n}", a.len())));
    }
    let mut work = a.to_vec();
    let mut per_player = Vec::with_capacity(n);
    for i in 0..n {
        let current = g.utility(i, a);
        let best = match g.best_response(i, a) {
            Some(b) => {
                work[i] = b;
                let v = g.utility(i, &work);
                work[i] = a[i];
                v
            }
            None if g.own_concave() => {
                let (_, v) = golden_section_max(
                    |x| {
                        let mut p = a.to_vec();
                        p[i] = x;
                        g.utility(i, &p)
                    },
                    g.bounds(i),
                );
                v
            }
            None => {
                return Err(Error::Unsupported(
                    "unilateral maximization needs own-concave utilities".into(),
                ))
            }
        };
        per_player.push((best - current).max(0.0));
    }
    Ok(NashGap::from_per_player(per_player))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeGap {
    pub value: f64,
    /// Players whose utility magnitude fell below the guard; their term is
    /// the absolute gap.
    pub flagged: Vec<usize>,
}

const RELATIVE_GUARD: f64 = 1e-12;

/// `max_i gap_i / |u_i(a)|`.
pub fn relative_ne_gap(g: &LqGame, a: &[f64]) -> RelativeGap {
    let z = g.aggregates(a);
    let mut flagged = Vec::new();
    let mut value = 0.0f64;
    for i in 0..g.n() {
        let u = g.utility_at(i, a[i], z[i]);
        let gap = g.gain_at(i, a[i], z[i]);
        let term = if u.abs() < RELATIVE_GUARD {
            flagged.push(i);
            gap
        } else {
            gap / u.abs()
        };
        value = value.max(term);
    }
    RelativeGap { value, flagged }
}

/// `max_{i, a ∈ 𝒜} |u_i(a)|` by enumeration.
///
/// For fixed `a_i`, `u_i` is affine in `a_{−i}`, so its extremes sit on
/// vertices of the other players' box; over `a_i` the candidates are the two
/// endpoints and the stationary point. Exponential in `n`, capped at 24.
pub fn max_abs_utility(g: &LqGame) -> Result<f64> {
    let n = g.n();
    if n > 24 {
        return Err(Error::invalid("vertex enumeration is limited to 24 players"));
    }
    let mut best = 0.0f64;
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for mask in 0u32..(1u32 << others.len()) {
            let z: f64 = others
                .iter()
                .enumerate()
                .map(|(k, &j)| {
                    let b = g.bounds[j];
                    let aj = if mask >> k & 1 == 1 { b.hi() } else { b.lo() };
                    g.net.weight(i, j) * aj
                })
                .sum();
            let b = g.bounds[i];
            for x in [b.lo(), b.hi(), b.project(g.beta[i] + g.gamma * z)] {
                best = best.max(g.utility_at(i, x, z).abs());
            }
        }
    }
    Ok(best)
}

// ── game files ──────────────────────────────────────────────────────

/// The network of a game file, inline or as a path relative to the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkRef {
    Path(PathBuf),
    Inline(NetworkFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub network: NetworkRef,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub bounds: Vec<Interval>,
}

impl From<&LqGame> for GameFile {
    fn from(g: &LqGame) -> Self {
        GameFile {
            network: NetworkRef::Inline(NetworkFile::from(&g.net)),
            beta: g.beta.clone(),
            gamma: g.gamma,
            bounds: g.bounds.clone(),
        }
    }
}

impl GameFile {
    /// `base` resolves relative network paths.
    pub fn into_game(self, base: Option<&Path>, source_name: &str) -> Result<LqGame> {
        let net = match self.network {
            NetworkRef::Inline(file) => file.into_network(source_name)?,
            NetworkRef::Path(p) => {
                let p = match base {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                };
                load_network(p)?
            }
        };
        LqGame::new(net, self.beta, self.gamma, self.bounds)
            .map_err(|e| Error::format(source_name, e.to_string()))
    }
}

pub fn parse_game(text: &str, source_name: &str) -> Result<LqGame> {
    let file: GameFile =
        serde_json::from_str(text).map_err(|e| Error::format(source_name, e.to_string()))?;
    file.into_game(None, source_name)
}

pub fn load_game(path: impl AsRef<Path>) -> Result<LqGame> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path.display().to_string();
    let file: GameFile =
        serde_json::from_str(&text).map_err(|e| Error::format(&name, e.to_string()))?;
    file.into_game(path.parent(), &name)
}

/// Writes the game with its network inline.
pub fn save_game(g: &LqGame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(&GameFile::from(g))
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    fs::write(path, body + "\n").map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

type UtilityFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;
type CrossFn = dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync;

/// A smooth game assembled from closures. Missing derivatives fall back to
/// central finite differences and the game reports inexact derivatives.
pub struct ClosureGame {
    bounds: Vec<Interval>,
    utility: Box<UtilityFn>,
    grad: Option<Box<GradFn>>,
    cross: Option<Box<CrossFn>>,
    concave: bool,
}

const FD_STEP_GRAD: f64 = 1e-6;
const FD_STEP_CROSS: f64 = 1e-4;

impl ClosureGame {
    pub fn new(
        bounds: Vec<Interval>,
        utility: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ClosureGame {
            bounds,
            utility: Box::new(utility),
            grad: None,
            cross: None,
            concave: false,
        }
    }

    pub fn with_grad(mut self, f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(f));
        self
    }

    pub fn with_cross(
        mut self,
        f: impl Fn(usize, usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.cross = Some(Box::new(f));
        self
    }

    /// Declares own-action concavity, enabling golden-section best responses.
    pub fn concave(mut self, yes: bool) -> Self {
        self.concave = yes;
        self
    }

    fn fd_grad(&self, i: usize, k: usize, a: &[f64]) -> f64 {
        let h = FD_STEP_GRAD * (1.0 + a[k].abs());
        let mut p = a.to_vec();
        p[k] = a[k] + h;
        let up = (self.utility)(i, &p);
        p[k] = a[k] - h;
        let down = (self.utility)(i, &p);
        (up - down) / (2.0 * h)
    }
}

impl SmoothGame for ClosureGame {
    fn num_players(&self) -> usize {
        self.bounds.len()
    }

    fn bounds(&self, i: usize) -> Interval {
        self.bounds[i]
    }

    fn utility(&self, i: usize, a: &[f64]) -> f64 {
        (self.utility)(i, a)
    }

    fn grad_own(&self, i: usize, a: &[f64]) -> f64 {
        match &self.grad {
            Some(f) => f(i, a),
            None => self.fd_grad(i, i, a),
        }
    }

    fn cross_second(&self, i: usize, j: usize, a: &[f64]) -> f64 {
        if let Some(f) = &self.cross {
            return f(i, j, a);
        }
        let h = FD_STEP_CROSS * (1.0 + a[j].abs());
        let mut p = a.to_vec();
        p[j] = a[j] + h;
        let up = self.grad_own(i, &p);
        p[j] = a[j] - h;
        let down = self.grad_own(i, &p);
        (up - down) / (2.0 * h)
    }

    fn own_concave(&self) -> bool {
        self.concave
    }

    fn exact_derivatives(&self) -> bool {
        self.grad.is_some() && self.cross.is_some()
    }
}
