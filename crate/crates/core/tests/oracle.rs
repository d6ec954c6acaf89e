mod common;

use common::rel_err;
use sudas::channel::{effective_cnrs, generate, trial_seed};
use sudas::config::{dbm_to_watt, SystemConfig};
use sudas::error::Error;
use sudas::model::{energy_efficiency, feasibility, RateMode};
use sudas::oracle::*;
use sudas::solver::Variant;

fn tiny(n_f: usize, p_t_dbm: f64) -> SystemConfig {
    let mut cfg = SystemConfig::with_ues(2);
    cfg.shrink_subcarriers(n_f);
    cfg.n_streams_cap = 2;
    cfg.p_bs_max = dbm_to_watt(p_t_dbm);
    cfg
}

#[test]
fn golden_section_finds_interior_and_boundary_maxima() {
    let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10).unwrap();
    assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
    assert_eq!(golden_max(|x| x, 0.0, 2.0, 1e-6).unwrap().0, 2.0);
    assert_eq!(golden_max(|x| -x, 0.0, 2.0, 1e-6).unwrap().0, 0.0);
}

#[test]
fn golden_section_stops_below_ulp_resolution() {
    let x0 = 1.0 + 1e-15;
    let (x, _) = golden_max(|x| -(x - 1.0).abs(), x0 - 1e-14, x0 + 1e-14, 1e-9).unwrap();
    assert!((x - 1.0).abs() < 1e-14);
}

#[test]
fn golden_section_rejects_bad_brackets() {
    assert!(matches!(golden_max(|x| x, 1.0, 1.0, 1e-6), Err(Error::InvalidInput(_))));
    assert!(matches!(golden_max(|x| x, 0.0, 1.0, 0.0), Err(Error::InvalidInput(_))));
    assert!(matches!(golden_max(|x| x, 0.0, f64::NAN, 1e-6), Err(Error::InvalidInput(_))));
}

#[test]
fn instances_beyond_the_search_limits_are_refused() {
    let cfg = SystemConfig::with_ues(3);
    let mut small = cfg.clone();
    small.shrink_subcarriers(4);
    let eff = effective_cnrs(&generate(&small, 1), &small);
    assert!(matches!(exhaustive_small(&eff, &small, &OracleGrids::default(), Variant::Optimal), Err(Error::SizeLimit(_))));
    let cfg = tiny(4, 37.0);
    let eff = effective_cnrs(&generate(&cfg, 1), &cfg);
    let bad = OracleGrids { power_fractions: vec![0.0, 1.0], shares: vec![0.5] };
    assert!(matches!(exhaustive_small(&eff, &cfg, &bad, Variant::Optimal), Err(Error::InvalidInput(_))));
}

#[test]
fn oracle_policy_is_feasible_and_consistent() {
    let grids = OracleGrids::log_spaced(8, 1e-3, 6);
    for (t, variant) in [(0, Variant::Optimal), (1, Variant::Suboptimal)] {
        let cfg = tiny(4, 31.0);
        let eff = effective_cnrs(&generate(&cfg, trial_seed(9, t)), &cfg);
        let o = exhaustive_small(&eff, &cfg, &grids, variant).unwrap();
        let mode = if variant == Variant::Optimal { RateMode::Approx } else { RateMode::Exact };
        assert!(feasibility(&o.policy, &eff, &cfg, mode).holds(&cfg, 1e-9));
        assert!(rel_err(o.eta, o.throughput / o.power) < 1e-12);
        assert!(rel_err(o.eta, energy_efficiency(&o.policy, &eff, &cfg, mode)) < 1e-9);
    }
}

#[test]
fn finer_nested_grids_never_do_worse() {
    // 1e-2 to 1 in 3 and 5 log steps, shares in steps of 1/2 and 1/4
    let coarse = OracleGrids::log_spaced(3, 1e-2, 3);
    let fine = OracleGrids::log_spaced(5, 1e-2, 5);
    let cfg = tiny(4, 37.0);
    let eff = effective_cnrs(&generate(&cfg, 12), &cfg);
    let a = exhaustive_small(&eff, &cfg, &coarse, Variant::Optimal).unwrap();
    let b = exhaustive_small(&eff, &cfg, &fine, Variant::Optimal).unwrap();
    assert!(b.eta >= a.eta * (1.0 - 1e-12));
}
