use netgame_core::dynamics::{self, step_bound, LearnerConfig, Termination};
use netgame_core::game::{best_response, grad_own, utility, ActionProfile};
use netgame_core::linalg::{self, Matrix};
use netgame_core::network::{asymmetry_inf_norm, inf_norm, spectral_norm, Scaled};
use netgame_core::potential::{
    alpha_lq, check_alpha_potential, grad_phi_lq, phi_general, phi_lq, smoothness_l, PotentialSpec,
};
use netgame_core::welfare::{sample_contraction_game, social_optimum, welfare_ratio};
use netgame_core::{Family, Interval, LqGame, Network};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64, n: usize, symmetric: bool) -> (LqGame, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && (!symmetric || j > i) {
                g[(i, j)] = rng.gen_range(-1.0..1.0);
                if symmetric {
                    g[(j, i)] = g[(i, j)];
                }
            }
        }
    }
    let beta = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gamma = rng.gen_range(-1.0..1.0);
    let bounds = (0..n)
        .map(|_| {
            let lo = rng.gen_range(-2.0..1.0);
            Interval::new(lo, lo + rng.gen_range(0.2..2.0)).unwrap()
        })
        .collect();
    (LqGame::new(Network::new(g).unwrap(), beta, gamma, bounds).unwrap(), rng)
}

fn families() -> Vec<Family> {
    vec![
        Family::CompleteErrors { eps: Scaled::Const(0.1) },
        Family::Influential {
            eps: Scaled::Const(0.1),
            w: 2.0,
        },
        Family::RandomSigns {
            eps: Scaled::Const(0.1),
            delta: Scaled::Const(0.2),
        },
        Family::ErdosRenyi {
            p: Scaled::Const(0.3),
            weight: Scaled::Const(1.0),
        },
        Family::SmallWorld {
            d_frac: 0.2,
            p: Scaled::Const(0.3),
        },
        Family::StarErased { p: Scaled::Const(0.3) },
    ]
}

fn symmetric_families() -> Vec<Family> {
    vec![
        Family::CompleteErrors { eps: Scaled::Const(0.0) },
        Family::ErdosRenyi {
            p: Scaled::Const(0.0),
            weight: Scaled::Const(1.0),
        },
        Family::ErdosRenyi {
            p: Scaled::Const(1.0),
            weight: Scaled::Const(1.0),
        },
        Family::SmallWorld {
            d_frac: 0.2,
            p: Scaled::Const(0.0),
        },
        Family::StarErased { p: Scaled::Const(0.0) },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_zero_diagonal_and_deterministic(seed in any::<u64>(), n in 5usize..30) {
        for f in families() {
            let a = f.generate(n, seed).unwrap();
            prop_assert!((0..n).all(|i| a.weight(i, i) == 0.0));
            prop_assert_eq!(&a, &f.generate(n, seed).unwrap());
        }
        for f in symmetric_families() {
            prop_assert_eq!(asymmetry_inf_norm(&f.generate(n, seed).unwrap()), 0.0);
        }
    }

    #[test]
    fn asymmetry_obeys_triangle_inequality(seed in any::<u64>(), n in 2usize..15) {
        let (g, _) = random_game(seed, n, false);
        let net = g.network();
        let t = Network::new(net.weights().transpose()).unwrap();
        prop_assert!(asymmetry_inf_norm(net) <= inf_norm(net) + inf_norm(&t) + 1e-12);
    }

    #[test]
    fn spectral_norm_matches_gram_eigenvalues(seed in any::<u64>(), n in 2usize..20) {
        let (g, _) = random_game(seed, n, false);
        let w = g.network().weights();
        let gram = Matrix::from_fn(n, |i, j| (0..n).map(|k| w[(k, i)] * w[(k, j)]).sum());
        let oracle = linalg::sym_eigs(&gram).unwrap().max().max(0.0).sqrt();
        let s = spectral_norm(g.network()).unwrap();
        prop_assert!((s - oracle).abs() <= 1e-8 * oracle.max(1.0), "{} vs {}", s, oracle);
    }

    #[test]
    fn utility_strictly_concave_in_own_action(seed in any::<u64>(), n in 2usize..10) {
        let (g, mut rng) = random_game(seed, n, false);
        for _ in 0..20 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let i = rng.gen_range(0..n);
            let b = g.action_bounds()[i];
            let (x, z) = (b.lerp(0.1), b.lerp(0.9));
            let y = b.lerp(rng.gen_range(0.2..0.8));
            let at = |v: f64| { let mut p = a.clone(); p[i] = v; utility(&g, i, &p).unwrap() };
            let t = (y - x) / (z - x);
            prop_assert!(at(y) > (1.0 - t) * at(x) + t * at(z));
        }
    }

    #[test]
    fn best_response_ignores_own_action(seed in any::<u64>(), n in 2usize..10) {
        let (g, mut rng) = random_game(seed, n, false);
        let mut a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
        let i = rng.gen_range(0..n);
        let before = best_response(&g, i, &a).unwrap();
        a[i] = g.action_bounds()[i].lerp(rng.gen());
        prop_assert_eq!(before, best_response(&g, i, &a).unwrap());
    }

    #[test]
    fn own_gradient_matches_differences_and_is_bounded(seed in any::<u64>(), n in 2usize..10) {
        let (g, mut rng) = random_game(seed, n, false);
        for _ in 0..20 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let i = rng.gen_range(0..n);
            let h = 1e-6;
            let mut p = a.clone();
            p[i] += h;
            let mut m = a.clone();
            m[i] -= h;
            let fd = (utility(&g, i, &p).unwrap() - utility(&g, i, &m).unwrap()) / (2.0 * h);
            let gr = grad_own(&g, i, &a).unwrap();
            prop_assert!((fd - gr).abs() <= 1e-5 * gr.abs().max(1.0));
            prop_assert!(gr.abs() <= g.grad_bound() + 1e-12);
        }
    }

    #[test]
    fn symmetric_games_have_an_exact_potential(seed in any::<u64>(), n in 2usize..12) {
        let (g, mut rng) = random_game(seed, n, true);
        for _ in 0..50 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let i = rng.gen_range(0..n);
            let mut b = a.clone();
            b[i] = g.action_bounds()[i].lerp(rng.gen());
            let du = utility(&g, i, &b).unwrap() - utility(&g, i, &a).unwrap();
            let dphi = phi_lq(&g, &b) - phi_lq(&g, &a);
            prop_assert!((du - dphi).abs() <= 1e-12 * (1.0 + du.abs()).max(n as f64));
        }
    }

    #[test]
    fn alpha_bounds_sampled_violations(seed in any::<u64>(), n in 2usize..12) {
        let (g, mut rng) = random_game(seed, n, false);
        let a = alpha_lq(&g);
        let v = check_alpha_potential(&g, |x| phi_lq(&g, x), a, &mut rng, 500);
        prop_assert!(v.empirical_violation <= a + 1e-9);
    }

    #[test]
    fn quadrature_is_exact_for_any_node_count(seed in any::<u64>(), n in 2usize..8, nodes in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g0, _) = random_game(seed, n, false);
        let g = LqGame::new(
            g0.network().clone(), g0.beta().to_vec(), g0.gamma(), vec![Interval::new(-1.0, 1.5).unwrap(); n],
        ).unwrap();
        let spec = PotentialSpec::integral(vec![0.0; n]).with_nodes(nodes);
        for _ in 0..10 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            prop_assert!((phi_general(&g, &spec, &a).unwrap() - phi_lq(&g, &a)).abs() <= 1e-12 * n as f64);
        }
    }

    #[test]
    fn potential_is_l_smooth(seed in any::<u64>(), n in 2usize..12) {
        let (g, mut rng) = random_game(seed, n, false);
        let l = smoothness_l(&g).unwrap();
        for _ in 0..20 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let b = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            let gr = grad_phi_lq(&g, &a);
            let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
            let lin: f64 = gr.iter().zip(&d).map(|(p, q)| p * q).sum();
            let sq: f64 = d.iter().map(|x| x * x).sum();
            prop_assert!(phi_lq(&g, &b) >= phi_lq(&g, &a) + lin - 0.5 * l * sq - 1e-9);
        }
    }

    #[test]
    fn gated_best_response_monotone_feasible_certified(seed in any::<u64>(), n in 2usize..20) {
        let (g, mut rng) = random_game(seed, n, false);
        let alpha = alpha_lq(&g);
        let cfg = LearnerConfig::new(alpha, alpha).with_max_iters(1_000_000).with_record_every(1);
        let a0 = dynamics::random_start(&g, &mut rng);
        let tr = dynamics::run_sequential_br(&g, &cfg, &a0).unwrap();
        prop_assert_eq!(tr.terminated_by, Termination::GateSilent);
        prop_assert!(tr.certified);
        prop_assert!(tr.ne_gap_final <= 2.0 * alpha + 1e-9);
        prop_assert!(tr.min_update_increase.is_none_or(|m| m > alpha - 1e-12));
        for w in tr.phi_values.windows(2) {
            prop_assert!(w[1] == w[0] || w[1] - w[0] > alpha - 1e-12);
        }
        prop_assert!(tr.iterates.iter().all(|p| p.actions.is_feasible(g.action_bounds())));
    }

    #[test]
    fn certified_gradient_play_is_monotone(seed in any::<u64>(), n in 2usize..20) {
        let (g, mut rng) = random_game(seed, n, false);
        let alpha = alpha_lq(&g);
        let eta = step_bound(&g, alpha).unwrap().eta_bar_max;
        let cfg = LearnerConfig::new(alpha, alpha).with_eta(eta).with_max_iters(500_000).with_record_every(1);
        let a0 = dynamics::random_start(&g, &mut rng);
        let tr = dynamics::run_gradient_play(&g, &cfg, &a0).unwrap();
        prop_assert!(tr.max_phi_decrease <= 1e-12);
        prop_assert!(tr.iterates.iter().all(|p| p.actions.is_feasible(g.action_bounds())));
        if tr.terminated_by == Termination::GateSilent {
            prop_assert!(tr.certified);
            prop_assert!(tr.ne_gap_final <= 2.0 * alpha + 1e-9);
        }
    }

    #[test]
    fn welfare_chain_and_global_optimum(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = sample_contraction_game(n, &mut rng).unwrap();
        let r = welfare_ratio(&g).unwrap();
        prop_assert!(r.chain_holds);
        let opt = social_optimum(&g).unwrap();
        let best = netgame_core::game::social_welfare(&g, opt.as_slice());
        for _ in 0..50 {
            let a = ActionProfile::sample(g.action_bounds(), &mut rng).into_vec();
            prop_assert!(netgame_core::game::social_welfare(&g, &a) <= best + 1e-12);
        }
    }
}
