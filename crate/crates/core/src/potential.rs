//! α-potential functions: the LQ closed form, the general line-integral
//! construction, their α bounds, and Monte-Carlo validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{ActionProfile, Interval, LqGame, SmoothGame};
use crate::linalg::{self, dot};
use crate::network::asymmetry_inf_norm;
use crate::welfare;

/// `φ(a) = −½|a|² + βᵀa + (γ/2) aᵀGa`
pub fn phi_lq(g: &LqGame, a: &[f64]) -> f64 {
    let z = g.aggregates(a);
    phi_with_aggregates(g, a, &z)
}

pub(crate) fn phi_with_aggregates(g: &LqGame, a: &[f64], z: &[f64]) -> f64 {
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut inter = 0.0;
    for i in 0..a.len() {
        quad += a[i] * a[i];
        lin += g.beta()[i] * a[i];
        inter += z[i] * a[i];
    }
    -0.5 * quad + lin + 0.5 * g.gamma() * inter
}

/// `∇φ(a) = −a + β + (γ/2)(G + Gᵀ)a`
pub fn grad_phi_lq(g: &LqGame, a: &[f64]) -> Vec<f64> {
    let w = g.network().weights();
    let z = w.mul_vec(a);
    let zt = w.tr_mul_vec(a);
    (0..a.len())
        .map(|i| -a[i] + g.beta()[i] + 0.5 * g.gamma() * (z[i] + zt[i]))
        .collect()
}

/// `(ā a_δ |γ| / 2) ‖G − Gᵀ‖∞`
pub fn alpha_lq(g: &LqGame) -> f64 {
    0.5 * g.a_bar() * g.a_delta() * g.gamma().abs() * asymmetry_inf_norm(g.network())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    LqClosedForm,
    GeneralIntegral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Anchor of the line integral.
    pub z_ref: ActionProfile,
    pub quad_nodes: usize,
}

pub const DEFAULT_QUAD_NODES: usize = 16;

impl PotentialSpec {
    pub fn integral(z_ref: impl Into<ActionProfile>) -> Self {
        PotentialSpec {
            kind: PotentialKind::GeneralIntegral,
            z_ref: z_ref.into(),
            quad_nodes: DEFAULT_QUAD_NODES,
        }
    }

    pub fn with_nodes(mut self, quad_nodes: usize) -> Self {
        self.quad_nodes = quad_nodes;
        self
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 quadrature nodes, got {n}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = 0.5 * (1.0 - x);
        nodes[n - 1 - k] = 0.5 * (1.0 + x);
        weights[k] = 0.5 * w;
        weights[n - 1 - k] = 0.5 * w;
    }
    Ok((nodes, weights))
}

/// `φ(a) = ∫₀¹ Σ_j ∂u_j/∂a_j(z + r(a − z)) (a_j − z_j) dr` by quadrature.
pub fn phi_general(g: &dyn SmoothGame, spec: &PotentialSpec, a: &[f64]) -> Result<f64> {
    let n = g.num_players();
    let z = spec.z_ref.as_slice();
    if z.len() != n || a.len() != n {
        return Err(Error::invalid("anchor and profile must have one action per player"));
    }
    if !spec.z_ref.is_feasible(&g.all_bounds()) {
        return Err(Error::invalid("anchor lies outside the action space"));
    }
    let (nodes, weights) = gauss_legendre(spec.quad_nodes)?;
    let d: Vec<f64> = a.iter().zip(z).map(|(x, y)| x - y).collect();
    let mut point = vec![0.0; n];
    let mut total = 0.0;
    for (r, w) in nodes.iter().zip(&weights) {
        for j in 0..n {
            point[j] = z[j] + r * d[j];
        }
        let integrand: f64 = (0..n).map(|j| g.grad_own(j, &point) * d[j]).sum();
        total += w * integrand;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaGeneral {
    pub value: f64,
    /// True when the cross derivatives are constant and the max is exact.
    pub exact: bool,
    /// The grid was truncated at the evaluation budget.
    pub partial: bool,
    pub evaluations: usize,
}

const ALPHA_GRID_POINTS: usize = 9;
const ALPHA_GRID_BUDGET: usize = 1_000_000;

fn asymmetry_at(g: &dyn SmoothGame, a: &[f64]) -> f64 {
    let n = g.num_players();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (g.cross_second(i, j, a) - g.cross_second(j, i, a)).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `(a_δ²/2) max_{i,a} Σ_j |∂²u_i/∂a_i∂a_j − ∂²u_j/∂a_j∂a_i|`
///
/// Exact when cross derivatives are constant. Otherwise the max is taken over
/// a uniform grid and is a lower bound of the true value.
pub fn alpha_general(g: &dyn SmoothGame) -> AlphaGeneral {
    let n = g.num_players();
    let bounds = g.all_bounds();
    let scale = 0.5 * g.action_spread().powi(2);
    if g.constant_cross_second() {
        let mid: Vec<f64> = bounds.iter().map(|b| b.lerp(0.5)).collect();
        return AlphaGeneral {
            value: scale * asymmetry_at(g, &mid),
            exact: true,
            partial: false,
            evaluations: 1,
        };
    }
    let mut idx = vec![0usize; n];
    let mut point: Vec<f64> = bounds.iter().map(Interval::lo).collect();
    let mut best = 0.0f64;
    let mut evaluations = 0;
    let partial = loop {
        if evaluations == ALPHA_GRID_BUDGET {
            break true;
        }
        best = best.max(asymmetry_at(g, &point));
        evaluations += 1;
        // odometer increment
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < ALPHA_GRID_POINTS {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break false;
        }
        for j in 0..=k.min(n - 1) {
            point[j] = bounds[j].lerp(idx[j] as f64 / (ALPHA_GRID_POINTS - 1) as f64);
        }
    };
    AlphaGeneral {
        value: scale * best,
        exact: false,
        partial,
        evaluations,
    }
}

/// Closed form of [`alpha_general`] for LQ games.
pub fn alpha_general_lq(g: &LqGame) -> f64 {
    0.5 * g.a_delta() * g.a_delta() * g.gamma().abs() * asymmetry_inf_norm(g.network())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationCheck {
    pub alpha: f64,
    pub empirical_violation: f64,
    pub samples: usize,
    pub pass: bool,
}

const ALPHA_SLACK: f64 = 1e-9;

/// Largest `|Δu_i − Δφ|` over `count` uniform triples `(i, a, a′_i)`.
pub fn check_alpha_potential<R: Rng + ?Sized>(
    g: &dyn SmoothGame,
    phi: impl Fn(&[f64]) -> f64,
    alpha: f64,
    rng: &mut R,
    count: usize,
) -> ViolationCheck {
    let n = g.num_players();
    let bounds = g.all_bounds();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let i = rng.gen_range(0..n);
        let mut a = ActionProfile::sample(&bounds, rng).into_vec();
        let dev = bounds[i].lerp(rng.gen());
        let u0 = g.utility(i, &a);
        let p0 = phi(&a);
        a[i] = dev;
        let u1 = g.utility(i, &a);
        let p1 = phi(&a);
        worst = worst.max(((u0 - u1) - (p0 - p1)).abs());
    }
    ViolationCheck {
        alpha,
        empirical_violation: worst,
        samples: count,
        pass: worst <= alpha + ALPHA_SLACK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub gap: f64,
    /// `α / a_δ`
    pub bound: f64,
    pub pass: bool,
}

const DERIVATIVE_SLACK: f64 = 1e-7;

/// Largest `|∂φ/∂a_i − ∂u_i/∂a_i|` over sampled `(i, a)`, using the closed
/// form gradient of `φ`.
pub fn check_derivative_relation<R: Rng + ?Sized>(
    g: &LqGame,
    alpha: f64,
    rng: &mut R,
    count: usize,
) -> DerivativeCheck {
    let n = g.n();
    let mut gap = 0.0f64;
    for _ in 0..count {
        let a = ActionProfile::sample(g.action_bounds(), rng).into_vec();
        let i = rng.gen_range(0..n);
        let dphi = grad_phi_lq(g, &a)[i];
        gap = gap.max((dphi - g.grad_own(i, &a)).abs());
    }
    let bound = alpha / g.a_delta();
    DerivativeCheck {
        gap,
        bound,
        pass: gap <= bound + DERIVATIVE_SLACK,
    }
}

/// As [`check_derivative_relation`] for the integral potential, whose
/// gradient is taken by central differences.
pub fn check_derivative_relation_general<R: Rng + ?Sized>(
    g: &dyn SmoothGame,
    spec: &PotentialSpec,
    alpha: f64,
    rng: &mut R,
    count: usize,
) -> Result<DerivativeCheck> {
    let n = g.num_players();
    let bounds = g.all_bounds();
    let mut gap = 0.0f64;
    for _ in 0..count {
        let mut a = ActionProfile::sample(&bounds, rng).into_vec();
        let i = rng.gen_range(0..n);
        let du = g.grad_own(i, &a);
        let h = 1e-5 * bounds[i].width();
        let x = a[i];
        let (lo, hi) = ((x - h).max(bounds[i].lo()), (x + h).min(bounds[i].hi()));
        a[i] = hi;
        let up = phi_general(g, spec, &a)?;
        a[i] = lo;
        let down = phi_general(g, spec, &a)?;
        gap = gap.max(((up - down) / (hi - lo) - du).abs());
    }
    let bound = alpha / g.action_spread();
    Ok(DerivativeCheck {
        gap,
        bound,
        pass: gap <= bound + DERIVATIVE_SLACK,
    })
}

/// `‖−I + (γ/2)(G + Gᵀ)‖₂`, the Lipschitz constant of `∇φ`.
pub fn smoothness_l(g: &LqGame) -> Result<f64> {
    let hessian = g
        .network()
        .weights()
        .shifted_symmetric_part(-1.0, 0.5 * g.gamma());
    Ok(linalg::sym_eigs(&hessian)?.abs_max())
}

/// Interval bound on `max_{a∈𝒜} |φ(a)|`.
pub fn phi_abs_upper_bound(g: &LqGame) -> f64 {
    let m: Vec<f64> = g.action_bounds().iter().map(Interval::abs_max).collect();
    let w = g.network().weights();
    let mut total = 0.0;
    for i in 0..g.n() {
        let coupling: f64 = w.row(i).iter().zip(&m).map(|(gij, mj)| gij.abs() * mj).sum();
        total += 0.5 * m[i] * m[i] + g.beta()[i].abs() * m[i] + 0.5 * g.gamma().abs() * m[i] * coupling;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiMax {
    pub value: f64,
    pub argmax: ActionProfile,
    /// True when the maximizer comes from the closed form.
    pub certified: bool,
    pub abs_upper_bound: f64,
}

const PGA_STARTS: usize = 20;
const PGA_TOL: f64 = 1e-10;
const PGA_MAX_STEPS: usize = 100_000;
const PGA_SEED: u64 = 0x5eed;

/// Multi-start projected gradient ascent with step `1/L`. The first start is
/// the centre of the box, the others are uniform.
pub(crate) fn projected_ascent(
    bounds: &[Interval],
    l: f64,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(PGA_SEED);
    let eta = 1.0 / l;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..PGA_STARTS {
        let mut a: Vec<f64> = if start == 0 {
            bounds.iter().map(|b| b.lerp(0.5)).collect()
        } else {
            ActionProfile::sample(bounds, &mut rng).into_vec()
        };
        for _ in 0..PGA_MAX_STEPS {
            let gr = grad(&a);
            let next: Vec<f64> = (0..a.len()).map(|i| bounds[i].project(a[i] + eta * gr[i])).collect();
            let moved: f64 = a.iter().zip(&next).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            a = next;
            if moved / eta < PGA_TOL {
                break;
            }
        }
        let v = f(&a);
        if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best = Some((a, v));
        }
    }
    best.expect("at least one start")
}

/// Maximum of `φ_lq` over the action box.
///
/// Under the contraction assumption the maximizer is the interior closed
/// form. Otherwise multi-start projected ascent gives a local maximum and
/// the result is not certified.
pub fn phi_max_lq(g: &LqGame) -> Result<PhiMax> {
    let abs_upper_bound = phi_abs_upper_bound(g);
    if welfare::check_contraction(g).holds {
        let a = welfare::phi_maximizer(g)?;
        return Ok(PhiMax {
            value: phi_lq(g, a.as_slice()),
            argmax: a,
            certified: true,
            abs_upper_bound,
        });
    }
    let l = smoothness_l(g)?;
    let (a, value) = projected_ascent(g.action_bounds(), l, |a| phi_lq(g, a), |a| grad_phi_lq(g, a));
    Ok(PhiMax {
        value,
        argmax: a.into(),
        certified: false,
        abs_upper_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Failed,
}

/// Summary emitted by `potential report`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaReport {
    pub alpha_lq: f64,
    pub alpha_general: f64,
    pub empirical_violation: f64,
    pub derivative_gap: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub samples: usize,
    pub status: Verdict,
}

pub fn alpha_report(g: &LqGame, samples: usize, seed: u64) -> Result<AlphaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_lq = alpha_lq(g);
    let a_gen = alpha_general_lq(g);
    // the sampled potential is φ_lq, whose guarantee is alpha_lq
    let violation = check_alpha_potential(g, |a| phi_lq(g, a), a_lq, &mut rng, samples);
    let deriv = check_derivative_relation(g, a_lq, &mut rng, samples);
    Ok(AlphaReport {
        alpha_lq: a_lq,
        alpha_general: a_gen,
        empirical_violation: violation.empirical_violation,
        derivative_gap: deriv.gap,
        l: smoothness_l(g)?,
        samples,
        status: if violation.pass && deriv.pass {
            Verdict::Pass
        } else {
            Verdict::Failed
        },
    })
}

/// Value of `φ` changed only in coordinate `i`, in `O(1)` given both local
/// aggregates `z_i = (Ga)_i` and `w_i = (Gᵀa)_i`.
#[inline]
pub(crate) fn phi_delta_unilateral(g: &LqGame, i: usize, x: f64, z: f64, w: f64, d: f64) -> f64 {
    (g.beta()[i] - x + 0.5 * g.gamma() * (z + w)) * d - 0.5 * d * d
}

/// `φ(a + d) − φ(a)` for a general move `d`.
pub(crate) fn phi_delta(g: &LqGame, grad: &[f64], d: &[f64]) -> f64 {
    let gd = g.network().weights().mul_vec(d);
    dot(grad, d) + 0.5 * (-dot(d, d) + g.gamma() * dot(d, &gd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::ClosureGame;
    use crate::linalg::Matrix;
    use crate::network::Network;

    fn unit() -> Interval {
        Interval::symmetric(1.0).unwrap()
    }

    fn lq(rows: Vec<Vec<f64>>, beta: Vec<f64>, gamma: f64) -> LqGame {
        let n = rows.len();
        LqGame::new(Network::from_rows(rows).unwrap(), beta, gamma, vec![unit(); n]).unwrap()
    }

    fn random_game(rng: &mut ChaCha8Rng, n: usize, symmetric: bool) -> LqGame {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (!symmetric || i < j) {
                    m[(i, j)] = rng.gen_range(-1.0..1.0);
                    if symmetric {
                        m[(j, i)] = m[(i, j)];
                    }
                }
            }
        }
        let bounds = (0..n)
            .map(|_| {
                let lo = rng.gen_range(-1.5..0.0);
                Interval::new(lo, rng.gen_range(0.1..1.5)).unwrap()
            })
            .collect();
        let beta = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        LqGame::new(Network::new(m).unwrap(), beta, rng.gen_range(-1.0..1.0), bounds).unwrap()
    }

    #[test]
    fn phi_examples() {
        let g = lq(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0; 2], 1.0);
        assert_eq!(phi_lq(&g, &[0.0, 0.0]), 0.0);
        assert_eq!(phi_lq(&g, &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn grad_phi_examples_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_game(&mut rng, 5, false);
        assert_eq!(grad_phi_lq(&g, &[0.0; 5]), g.beta());
        for _ in 0..50 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let gr = grad_phi_lq(&g, &a);
            for i in 0..5 {
                let h = 1e-5;
                let mut p = a.clone();
                p[i] += h;
                let up = phi_lq(&g, &p);
                p[i] -= 2.0 * h;
                let fd = (up - phi_lq(&g, &p)) / (2.0 * h);
                assert!((fd - gr[i]).abs() < 1e-8);
            }
        }
        let s = random_game(&mut rng, 5, true);
        let a = ActionProfile::sample(s.action_bounds(), &mut rng).into_vec();
        let gr = grad_phi_lq(&s, &a);
        for i in 0..5 {
            assert!((gr[i] - s.grad_own(i, &a)).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_lq_examples() {
        let g = lq(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![0.0; 2], 1.0);
        assert_eq!(alpha_lq(&g), 1.0);
        assert_eq!(alpha_general_lq(&g), 2.0);
        assert_eq!(alpha_general(&g).value, 2.0);
        let g2 = lq(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![0.0; 2], 2.0);
        assert_eq!(alpha_lq(&g2), 2.0);
        let s = lq(vec![vec![0.0, 0.3], vec![0.3, 0.0]], vec![0.0; 2], 1.0);
        assert_eq!(alpha_lq(&s), 0.0);
        assert_eq!(alpha_general(&s).value, 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        assert!(gauss_legendre(1).is_err());
        for n in 2..=20 {
            let (x, w) = gauss_legendre(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg + 1) as f64).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn phi_general_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_game(&mut rng, 4, false);
        let spec = PotentialSpec::integral(vec![0.0; 4]).with_nodes(2);
        let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
        assert!((phi_general(&g, &spec, &a).unwrap() - phi_lq(&g, &a)).abs() < 1e-12);
        let anchor = ActionProfile::sample(g.action_bounds(), &mut rng);
        let spec = PotentialSpec::integral(anchor.clone());
        assert_eq!(phi_general(&g, &spec, anchor.as_slice()).unwrap(), 0.0);
        assert!(phi_general(&g, &spec.clone().with_nodes(1), &a).is_err());
        assert!(phi_general(&g, &PotentialSpec::integral(vec![5.0; 4]), &a).is_err());

        let f = |x: f64| -0.5 * x * x + 0.3 * x;
        let one = ClosureGame::new(vec![unit()], move |_, a| f(a[0])).with_grad(|_, a| -a[0] + 0.3);
        let spec = PotentialSpec::integral(vec![-0.4]);
        let v = phi_general(&one, &spec, &[0.9]).unwrap();
        assert!((v - (f(0.9) - f(-0.4))).abs() < 1e-14);
    }

    #[test]
    fn alpha_general_grid_for_nonconstant_cross() {
        // ∂²u_0/∂a_0∂a_1 = a_1, ∂²u_1/∂a_1∂a_0 = 0: max over [−1, 1] is 1
        let g = ClosureGame::new(vec![unit(); 2], |i, a| {
            if i == 0 {
                -0.5 * a[0] * a[0] + 0.5 * a[0] * a[1] * a[1]
            } else {
                -0.5 * a[1] * a[1]
            }
        })
        .with_grad(|i, a| if i == 0 { -a[0] + 0.5 * a[1] * a[1] } else { -a[1] })
        .with_cross(|i, j, a| match (i, j) {
            (0, 1) => a[1],
            (i, j) if i == j => -1.0,
            _ => 0.0,
        });
        let r = alpha_general(&g);
        assert!(!r.exact && !r.partial);
        assert_eq!(r.evaluations, 81);
        assert!((r.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_check_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_game(&mut rng, 6, true);
        let r = check_alpha_potential(&s, |a| phi_lq(&s, a), 0.0, &mut rng, 10_000);
        assert!(r.pass && r.empirical_violation <= 1e-10);

        let g = random_game(&mut rng, 6, false);
        let r = check_alpha_potential(&g, |a| phi_lq(&g, a), alpha_lq(&g), &mut rng, 10_000);
        assert!(r.pass, "{r:?}");
        let half = r.empirical_violation / 2.0;
        let r = check_alpha_potential(&g, |a| phi_lq(&g, a), half, &mut rng, 10_000);
        assert!(!r.pass);
    }

    #[test]
    fn derivative_relation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = random_game(&mut rng, 5, true);
        assert!(check_derivative_relation(&s, 0.0, &mut rng, 1000).gap < 1e-14);

        let g = lq(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![0.0; 2], 1.0);
        let a = [0.3, 1.0];
        let gap = (grad_phi_lq(&g, &a)[0] - g.grad_own(0, &a)).abs();
        assert!((gap - 0.5).abs() < 1e-15);
        assert_eq!(alpha_lq(&g) / g.a_delta(), 0.5);

        for _ in 0..20 {
            let g = random_game(&mut rng, 6, false);
            let r = check_derivative_relation(&g, alpha_lq(&g), &mut rng, 500);
            assert!(r.pass);
            let spec = PotentialSpec::integral(vec![0.0; 6]).with_nodes(2);
            let r = check_derivative_relation_general(&g, &spec, alpha_lq(&g), &mut rng, 50).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn smoothness_examples() {
        let g = lq(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0; 2], 0.0);
        assert!((smoothness_l(&g).unwrap() - 1.0).abs() < 1e-14);
        let g = lq(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0; 2], 1.0);
        // Hessian −I + G has eigenvalues {−2, 0}
        assert!((smoothness_l(&g).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_lower_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_game(&mut rng, 5, false);
            let l = smoothness_l(&g).unwrap();
            for _ in 0..500 {
                let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
                let b = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                let lower = phi_lq(&g, &b) + dot(&grad_phi_lq(&g, &b), &d) - 0.5 * l * dot(&d, &d);
                assert!(phi_lq(&g, &a) >= lower - 1e-12);
            }
        }
    }

    #[test]
    fn phi_max_examples() {
        let g = lq(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0; 2], 0.0);
        let m = phi_max_lq(&g).unwrap();
        assert!(m.value.abs() < 1e-15 && m.argmax.as_slice().iter().all(|x| x.abs() < 1e-15));

        let g = lq(vec![vec![0.0, 0.5], vec![0.5, 0.0]], vec![0.1, 0.1], 0.25);
        let m = phi_max_lq(&g).unwrap();
        assert!(m.certified);
        for x in m.argmax.as_slice() {
            assert!((x - 0.1 / 0.875).abs() < 1e-15);
        }
        let l = smoothness_l(&g).unwrap();
        let (pga, v) = projected_ascent(g.action_bounds(), l, |a| phi_lq(&g, a), |a| grad_phi_lq(&g, a));
        for (x, y) in pga.iter().zip(m.argmax.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((v - m.value).abs() < 1e-12);
    }

    #[test]
    fn phi_abs_bound_dominates_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let g = random_game(&mut rng, 6, false);
            let b = phi_abs_upper_bound(&g);
            let m = phi_max_lq(&g).unwrap();
            assert!(m.value <= b);
            for _ in 0..500 {
                let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
                assert!(phi_lq(&g, &a).abs() <= b);
            }
        }
    }

    #[test]
    fn incremental_phi_deltas_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let g = random_game(&mut rng, 7, false);
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let i = rng.gen_range(0..7);
            let mut b = a.clone();
            b[i] = g.action_bounds()[i].lerp(rng.gen());
            let z = g.aggregates(&a)[i];
            let w = g.network().weights().tr_mul_vec(&a)[i];
            let exact = phi_lq(&g, &b) - phi_lq(&g, &a);
            let fast = phi_delta_unilateral(&g, i, a[i], z, w, b[i] - a[i]);
            assert!((exact - fast).abs() < 1e-12);

            let c = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let d: Vec<f64> = c.iter().zip(&a).map(|(x, y)| x - y).collect();
            let fast = phi_delta(&g, &grad_phi_lq(&g, &a), &d);
            assert!((phi_lq(&g, &c) - phi_lq(&g, &a) - fast).abs() < 1e-12);
        }
    }

    #[test]
    fn report_passes_on_random_game() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = random_game(&mut rng, 5, false);
        let r = alpha_report(&g, 2000, 1).unwrap();
        assert_eq!(r.status, Verdict::Pass);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["alpha_lq", "alpha_general", "empirical_violation", "derivative_gap", "L"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
