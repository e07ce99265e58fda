//! Social welfare under the contraction assumption: closed-form optimizers
//! and the three price-of-stability bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{social_welfare, ActionProfile, Interval, LqGame};
use crate::linalg::{self, norm_inf, Matrix};
use crate::potential::projected_ascent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub holds: bool,
    pub gamma_ok: bool,
    pub entries_ok: bool,
    /// Largest `ã` with `[−ã, ã]` inside every action set; `None` when some
    /// set excludes the origin.
    pub a_tilde: Option<f64>,
    pub beta_ok: bool,
}

/// `|γ| < ½`, `|G_ij| ≤ 1/N`, and `max_i |β_i| ≤ (1 − 2|γ|) ã`.
pub fn check_contraction(g: &LqGame) -> ContractionCheck {
    let n = g.n();
    let gamma_ok = g.gamma().abs() < 0.5;
    let cap = 1.0 / n as f64;
    let entries_ok = g.network().weights().as_slice().iter().all(|w| w.abs() <= cap);
    let a_tilde = g
        .action_bounds()
        .iter()
        .map(|b| (b.lo() <= 0.0 && b.hi() >= 0.0).then(|| (-b.lo()).min(b.hi())))
        .try_fold(f64::INFINITY, |acc, m| m.map(|m| acc.min(m)));
    let beta_max = norm_inf(g.beta());
    let beta_ok = a_tilde.is_some_and(|t| beta_max <= (1.0 - 2.0 * g.gamma().abs()) * t);
    ContractionCheck {
        holds: gamma_ok && entries_ok && beta_ok,
        gamma_ok,
        entries_ok,
        a_tilde,
        beta_ok,
    }
}

fn require_contraction(g: &LqGame) -> Result<()> {
    let c = check_contraction(g);
    if c.holds {
        return Ok(());
    }
    let mut failed = Vec::new();
    if !c.gamma_ok {
        failed.push("|gamma| < 1/2");
    }
    if !c.entries_ok {
        failed.push("|G_ij| <= 1/N");
    }
    if !c.beta_ok {
        failed.push("max |beta_i| <= (1 - 2|gamma|) a_tilde");
    }
    Err(Error::Precondition(format!(
        "contraction assumption fails: {}",
        failed.join(", ")
    )))
}

fn solve_in_box(g: &LqGame, m: &Matrix) -> Result<ActionProfile> {
    let sol = linalg::solve(m, g.beta())?;
    let tol = 1e-9 * (1.0 + norm_inf(g.beta()));
    if sol.residual_inf > tol {
        return Err(Error::numeric("linear solve residual above tolerance", sol.residual_inf));
    }
    let a = ActionProfile::new(sol.x);
    if !a.is_feasible(g.action_bounds()) {
        return Err(Error::numeric(
            "optimizer left the action space",
            norm_inf(a.as_slice()),
        ));
    }
    Ok(a)
}

/// `a^opt = (I − γ(G + Gᵀ))⁻¹ β`
pub fn social_optimum(g: &LqGame) -> Result<ActionProfile> {
    require_contraction(g)?;
    let m = g.network().weights().shifted_symmetric_part(1.0, -g.gamma());
    solve_in_box(g, &m)
}

/// `a^α = (I − (γ/2)(G + Gᵀ))⁻¹ β`
pub fn phi_maximizer(g: &LqGame) -> Result<ActionProfile> {
    require_contraction(g)?;
    let m = g.network().weights().shifted_symmetric_part(1.0, -0.5 * g.gamma());
    solve_in_box(g, &m)
}

/// `∇SW(a) = −a + β + γ(G + Gᵀ)a`
pub fn welfare_gradient(g: &LqGame, a: &[f64]) -> Vec<f64> {
    let w = g.network().weights();
    let z = w.mul_vec(a);
    let zt = w.tr_mul_vec(a);
    (0..a.len())
        .map(|i| -a[i] + g.beta()[i] + g.gamma() * (z[i] + zt[i]))
        .collect()
}

/// Maximizes SW over the box by 20-start projected gradient ascent, with no
/// use of the closed form.
pub fn maximize_welfare_numerically(g: &LqGame) -> Result<ActionProfile> {
    let hessian = g.network().weights().shifted_symmetric_part(-1.0, g.gamma());
    let l = linalg::sym_eigs(&hessian)?.abs_max();
    let (a, _) = projected_ascent(
        g.action_bounds(),
        l,
        |a| social_welfare(g, a),
        |a| welfare_gradient(g, a),
    );
    Ok(a.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosBounds {
    pub lam_min: f64,
    pub lam_max: f64,
    pub pos_lambda: f64,
    #[serde(rename = "pos_G")]
    pub pos_g: f64,
    pub pos_gamma: f64,
}

/// The three bounds on `SW(a^opt)/SW(a^α)`, sharpest first.
pub fn pos_bounds(g: &LqGame) -> Result<PosBounds> {
    require_contraction(g)?;
    let w = g.network().weights();
    let n = g.n();
    let spectrum = linalg::sym_eigs(&w.shifted_symmetric_part(0.0, g.gamma()))?;
    let (lmin, lmax) = (spectrum.min(), spectrum.max());
    let pos_lambda = (1.0 - lmin) * (1.0 - 0.5 * lmin).powi(2) / (1.0 - lmax).powi(2);
    let m = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| w[(i, j)].abs() + w[(j, i)].abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let gm = g.gamma().abs() * m;
    let pos_g = (1.0 + gm).powi(3) / (1.0 - gm).powi(2);
    let two_g = 2.0 * g.gamma().abs();
    let pos_gamma = (1.0 + two_g).powi(3) / (1.0 - two_g).powi(2);
    Ok(PosBounds {
        lam_min: lmin,
        lam_max: lmax,
        pos_lambda,
        pos_g,
        pos_gamma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub a_opt: ActionProfile,
    pub a_alpha: ActionProfile,
    pub sw_opt: f64,
    pub sw_alpha: f64,
    pub ratio: f64,
    pub lam_min: f64,
    pub lam_max: f64,
    pub pos_lambda: f64,
    #[serde(rename = "pos_G")]
    pub pos_g: f64,
    pub pos_gamma: f64,
    /// `1 ≤ ratio ≤ pos_lambda ≤ pos_G ≤ pos_gamma` up to `1e−9`.
    pub chain_holds: bool,
}

const CHAIN_TOL: f64 = 1e-9;

pub fn welfare_ratio(g: &LqGame) -> Result<WelfareReport> {
    let a_opt = social_optimum(g)?;
    let a_alpha = phi_maximizer(g)?;
    let sw_opt = social_welfare(g, a_opt.as_slice());
    let sw_alpha = social_welfare(g, a_alpha.as_slice());
    if sw_alpha <= 0.0 {
        return Err(Error::numeric("welfare at the potential maximizer is not positive", sw_alpha));
    }
    let ratio = sw_opt / sw_alpha;
    let b = pos_bounds(g)?;
    let chain_holds = ratio >= 1.0 - CHAIN_TOL
        && ratio <= b.pos_lambda + CHAIN_TOL
        && b.pos_lambda <= b.pos_g + CHAIN_TOL
        && b.pos_g <= b.pos_gamma + CHAIN_TOL;
    Ok(WelfareReport {
        a_opt,
        a_alpha,
        sw_opt,
        sw_alpha,
        ratio,
        lam_min: b.lam_min,
        lam_max: b.lam_max,
        pos_lambda: b.pos_lambda,
        pos_g: b.pos_g,
        pos_gamma: b.pos_gamma,
        chain_holds,
    })
}

/// Random game satisfying the contraction assumption: `|γ| < ½`, entries in
/// `[−1/N, 1/N]`, box `[−1, 1]`, and biases of one sign within the allowed
/// radius, so both optimizers have positive welfare.
pub fn sample_contraction_game<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LqGame> {
    let cap = 1.0 / n as f64;
    let weights = Matrix::from_fn(n, |i, j| if i == j { 0.0 } else { rng.gen_range(-cap..=cap) });
    let gamma = rng.gen_range(-0.45..0.45);
    let radius = 1.0 - 2.0 * f64::abs(gamma);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let beta = (0..n).map(|_| sign * rng.gen_range(0.1..=1.0) * radius).collect();
    LqGame::new(
        crate::network::Network::new(weights)?,
        beta,
        gamma,
        vec![Interval::symmetric(1.0)?; n],
    )
}
