mod common;

use common::singular_values;
use proptest::prelude::*;
use sudas::channel::{bs_cnrs, effective_cnrs, generate, splitmix, sue_cnrs, trial_seed};
use sudas::config::SystemConfig;

fn small(k: usize, m: usize, n_f: usize) -> SystemConfig {
    let mut cfg = SystemConfig::with_ues(k);
    cfg.n_sudacs = m;
    cfg.shrink_subcarriers(n_f);
    cfg
}

#[test]
fn trial_seeds_follow_splitmix() {
    for t in 0..10 {
        assert_eq!(trial_seed(42, t), 42 ^ splitmix(t));
    }
    // splitmix64 reference values
    assert_eq!(splitmix(0), 0xE220_A839_7B1D_CDAF);
    assert_eq!(splitmix(1), 0x910A_2DEC_8902_5CC1);
}

#[test]
fn realization_shapes() {
    let cfg = small(3, 5, 6);
    let ch = generate(&cfg, 9);
    assert_eq!(ch.h_bs.len(), 6);
    assert!(ch.h_bs.iter().all(|h| h.rows() == 5 && h.cols() == cfg.n_antennas));
    assert!(ch.h_sue.iter().all(|per| per.len() == 3 && per.iter().all(|d| d.len() == 5)));
    assert!(ch.h_direct.iter().all(|per| per.len() == 3 && per.iter().all(|h| h.rows() == cfg.n_antennas && h.is_square())));
}

#[test]
fn fewer_sudacs_give_a_sub_block() {
    let big = generate(&small(2, 8, 4), 5);
    let little = generate(&small(2, 3, 4), 5);
    for i in 0..4 {
        for r in 0..3 {
            for c in 0..8 {
                assert_eq!(big.h_bs[i][(r, c)], little.h_bs[i][(r, c)]);
            }
        }
        for k in 0..2 {
            assert_eq!(&big.h_sue[i][k][..3], &little.h_sue[i][k][..]);
        }
    }
}

#[test]
fn cnrs_are_squared_singular_values() {
    let cfg = small(2, 4, 3);
    let ch = generate(&cfg, 17);
    for i in 0..3 {
        let oracle: Vec<f64> = singular_values(&ch.h_bs[i]).iter().map(|s| s * s).collect();
        for (x, y) in bs_cnrs(&ch, i).iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-11 * oracle[0]);
        }
        for k in 0..2 {
            let g = sue_cnrs(&ch, i, k);
            assert!(g.windows(2).all(|w| w[0] >= w[1]));
            let mut oracle: Vec<f64> = ch.h_sue[i][k].iter().map(|z| z.norm_sqr()).collect();
            oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(g, oracle);
        }
    }
}

#[test]
fn stream_count_respects_the_cap() {
    let mut cfg = small(2, 4, 3);
    cfg.n_streams_cap = 2;
    let eff = effective_cnrs(&generate(&cfg, 1), &cfg);
    assert_eq!(eff.n_s, 2);
    assert!(eff.g_bs.iter().all(|r| r.len() == 2));
    assert_eq!(eff.g_sb, eff.g_bs);
    assert_eq!(eff.g_ues, eff.g_sue);
}

#[test]
fn mean_gain_matches_the_path_loss() {
    let cfg = small(1, 8, 64);
    let (mut acc, mut n) = (0.0, 0usize);
    for seed in 0..20 {
        let ch = generate(&cfg, seed);
        for h in &ch.h_bs {
            for z in h.as_slice() {
                acc += z.norm_sqr();
                n += 1;
            }
        }
    }
    let ratio = acc / n as f64 / cfg.channel.bs_mean_gain();
    // 81 920 unit-mean draws, correlated across subcarriers
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generation_is_a_pure_function_of_the_seed(seed in any::<u64>()) {
        let cfg = small(2, 3, 2);
        prop_assert_eq!(generate(&cfg, seed), generate(&cfg, seed));
    }

    #[test]
    fn effective_cnrs_are_sorted_and_positive(seed in any::<u64>()) {
        let cfg = small(2, 4, 3);
        let eff = effective_cnrs(&generate(&cfg, seed), &cfg);
        for row in &eff.g_bs {
            prop_assert!(row.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(row.iter().all(|&g| g > 0.0));
        }
    }
}
