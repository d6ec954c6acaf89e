mod common;

use common::{neumaier_sum, rel_err};
use proptest::prelude::*;
use sudas::channel::{effective_cnrs, generate, EffectiveChannels};
use sudas::config::SystemConfig;
use sudas::model::*;
use sudas::solver::{dinkelbach_solve, SolverOptions, Variant};

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Random policy with one winner per subcarrier and link.
fn random_policy(seed: u64, n_f: usize, n_k: usize, n_s: usize) -> AllocationPolicy {
    use rand::Rng;
    let mut r = common::rng(seed);
    let mut p = AllocationPolicy::zeros(n_f, n_k, n_s);
    p.alpha = r.gen_range(0.05..0.9);
    p.beta = r.gen_range(0.0..(1.0 - p.alpha));
    for i in 0..n_f {
        let (kd, ku) = (r.gen_range(0..n_k), r.gen_range(0..n_k));
        p.s_dl[i][kd] = p.alpha;
        p.s_ul[i][ku] = p.beta;
        for n in 0..n_s {
            for t in [&mut p.e_bs, &mut p.e_sue, &mut p.e_ues, &mut p.e_sb] {
                t.set(i, kd, n, r.gen_range(0.0..0.01));
                t.set(i, ku, n, r.gen_range(0.0..0.01));
            }
        }
    }
    p
}

#[test]
fn throughput_matches_independent_summation() {
    let mut cfg = SystemConfig::default();
    cfg.shrink_subcarriers(16);
    let eff = effective_cnrs(&generate(&cfg, 3), &cfg);
    let pol = random_policy(5, 16, cfg.n_ues, eff.n_s);
    for mode in [RateMode::Exact, RateMode::Approx] {
        let mut terms = Vec::new();
        for i in 0..16 {
            for k in 0..cfg.n_ues {
                for n in 0..eff.n_s {
                    for (s, a, b) in [
                        (pol.s_dl[i][k], eff.g_bs[i][n] * pol.e_bs.get(i, k, n), eff.g_sue[i][k][n] * pol.e_sue.get(i, k, n)),
                        (pol.s_ul[i][k], eff.g_sb[i][n] * pol.e_sb.get(i, k, n), eff.g_ues[i][k][n] * pol.e_ues.get(i, k, n)),
                    ] {
                        if s > 0.0 {
                            let (x, y) = (a / s, b / s);
                            let snr = match mode {
                                RateMode::Exact => x * y / (1.0 + x + y),
                                RateMode::Approx if x + y > 0.0 => x * y / (x + y),
                                RateMode::Approx => 0.0,
                            };
                            terms.push(s * log2_1p(snr) * cfg.bandwidth_hz);
                        }
                    }
                }
            }
        }
        let oracle = neumaier_sum(terms);
        assert!(rel_err(throughput(&pol, &eff, &cfg, mode), oracle) < 1e-12);
    }
}

#[test]
fn power_and_efficiency_follow_the_consumption_model() {
    let cfg = SystemConfig::default();
    let eff = EffectiveChannels::flat(4, 4, 2, 10.0, 20.0);
    let pol = random_policy(11, 4, 4, 2);
    let transmit = cfg.eps_bs * pol.e_bs.sum()
        + cfg.eps_sudac * (pol.e_sue.sum() + pol.e_sb.sum())
        + (0..4).map(|k| cfg.eps_ue[k] * pol.e_ues.sum_ue(k)).sum::<f64>();
    let p = power_consumption(&pol, &cfg);
    assert!(rel_err(p, 15.0 + 8.0 * 0.975 + 8.0 * 0.1 + 4.0 + transmit) < 1e-14);
    let ee = energy_efficiency(&pol, &eff, &cfg, RateMode::Exact);
    assert!(rel_err(ee, throughput(&pol, &eff, &cfg, RateMode::Exact) / p) < 1e-14);
}

#[test]
fn feasibility_flags_each_constraint() {
    let mut cfg = SystemConfig::default();
    cfg.shrink_subcarriers(4);
    let eff = EffectiveChannels::flat(4, 4, 2, 1e3, 1e3);
    let mut pol = random_policy(2, 4, 4, 2);
    let f = feasibility(&pol, &eff, &cfg, RateMode::Exact);
    assert!(f.worst_budget_ratio(&cfg) < 0.0);
    assert!(f.worst_structural() <= 1e-15);
    pol.e_bs.set(0, 0, 0, 2.0 * cfg.p_bs_max);
    pol.s_dl[1] = vec![pol.alpha; 4];
    let f = feasibility(&pol, &eff, &cfg, RateMode::Exact);
    assert!(f.c1 > 0.0);
    assert!((f.c7[1] - 3.0 * pol.alpha).abs() < 1e-15);
    assert!(!f.holds(&cfg, 1e-6));
}

#[test]
fn solver_residuals_agree_with_the_model() {
    let mut cfg = SystemConfig::default().desk_scale();
    cfg.shrink_subcarriers(16);
    let eff = effective_cnrs(&generate(&cfg, 8), &cfg);
    let rep = dinkelbach_solve(&eff, &cfg, &SolverOptions::default(), Variant::Optimal).unwrap();
    let f = feasibility(&rep.final_policy, &eff, &cfg, RateMode::Approx);
    assert!(f.holds(&cfg, 1e-6));
    assert!((f.c1 - rep.residuals.c1).abs() <= 1e-12 * cfg.p_bs_max);
    assert!(rel_err(throughput(&rep.final_policy, &eff, &cfg, RateMode::Approx), rep.throughput) < 1e-9);
    assert!(rel_err(power_consumption(&rep.final_policy, &cfg), rep.power) < 1e-12);
}

proptest! {
    #[test]
    fn exact_rate_never_exceeds_the_approximation(g1 in 1e-3f64..1e4, g2 in 1e-3f64..1e4, p1 in 0.0f64..10.0, p2 in 0.0f64..10.0) {
        let e = rate_exact_dl(g1, g2, p1, p2).unwrap();
        let a = rate_approx_dl(g1, g2, p1, p2).unwrap();
        prop_assert!(e <= a + 1e-15);
        prop_assert!(e >= 0.0);
        prop_assert_eq!(rate_exact_ul(g1, g2, p1, p2).unwrap(), e);
    }

    #[test]
    fn rates_grow_with_either_power(g1 in 1e-3f64..1e4, g2 in 1e-3f64..1e4, p1 in 0.0f64..10.0, p2 in 0.0f64..10.0, d in 0.0f64..1.0) {
        for f in [rate_exact_dl, rate_approx_dl] {
            let base = f(g1, g2, p1, p2).unwrap();
            prop_assert!(f(g1, g2, p1 + d, p2).unwrap() >= base);
            prop_assert!(f(g1, g2, p1, p2 + d).unwrap() >= base);
        }
    }

    #[test]
    fn shared_rate_is_positively_homogeneous(s in 1e-3f64..1.0, ea in 0.0f64..1e3, eb in 0.0f64..1e3, t in 1e-2f64..1e2) {
        for mode in [RateMode::Exact, RateMode::Approx] {
            let base = shared_rate(s, ea, eb, mode);
            let scaled = shared_rate(t * s, t * ea, t * eb, mode);
            prop_assert!((scaled - t * base).abs() <= 1e-12 * (t * base).max(1e-300));
        }
    }

    #[test]
    fn negative_inputs_are_rejected(g in 0.0f64..10.0, p in 1e-9f64..10.0) {
        prop_assert!(rate_exact_dl(g, g, -p, p).is_err());
        prop_assert!(rate_approx_ul(-g - 1e-9, g, p, p).is_err());
    }
}
