//! Random channel realizations and their reduction to per-stream CNRs.
//!
//! Every matrix entry comes from a dedicated ChaCha stream keyed by
//! `(seed, hop, subcarrier, row)`, so a realization for fewer SUDACs,
//! antennas or UEs is an exact sub-block of a larger one with the same seed.
//! Amplitudes are pre-divided by the noise standard deviation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::numerics::{svd, ComplexMatrix};

const HOP_BS: u64 = 1;
const HOP_SUE: u64 = 2;
const HOP_DIRECT: u64 = 3;

/// SplitMix64 finalizer.
pub fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of Monte Carlo trial `index`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    master ^ splitmix(index)
}

fn stream(seed: u64, hop: u64, a: u64, b: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed ^ splitmix(hop)) ^ a) ^ b);
    ChaCha8Rng::seed_from_u64(key)
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One draw of all hops. Uplink channels are the conjugate transposes of
/// these downlink matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `[i]`: M×N, BS→SUDAS.
    pub h_bs: Vec<ComplexMatrix>,
    /// `[i][k]`: diagonal of the M×M SUDAS→UE matrix.
    pub h_sue: Vec<Vec<Vec<Complex64>>>,
    /// `[i][k]`: N×N BS→UE matrix for an N-antenna UE without SUDAS.
    pub h_direct: Vec<Vec<ComplexMatrix>>,
}

impl ChannelRealization {
    pub fn h_sue_matrix(&self, i: usize, k: usize) -> ComplexMatrix {
        let d = &self.h_sue[i][k];
        let mut m = ComplexMatrix::zeros(d.len(), d.len());
        for (j, z) in d.iter().enumerate() {
            m[(j, j)] = *z;
        }
        m
    }

    /// All-zero channels of the configured shape.
    pub fn zeros(cfg: &SystemConfig) -> Self {
        let (n, m, k, nf) = (cfg.n_antennas, cfg.n_sudacs, cfg.n_ues, cfg.n_subcarriers);
        Self {
            h_bs: vec![ComplexMatrix::zeros(m, n); nf],
            h_sue: vec![vec![vec![Complex64::new(0.0, 0.0); m]; k]; nf],
            h_direct: vec![vec![ComplexMatrix::zeros(n, n); k]; nf],
        }
    }
}

// AR(1) smoothing across subcarriers; keeps unit variance per entry.
fn correlate(draws: &mut [Complex64], rho: f64, stride: usize) {
    if rho == 0.0 {
        return;
    }
    let w = (1.0 - rho * rho).sqrt();
    for idx in stride..draws.len() {
        draws[idx] = draws[idx - stride] * rho + draws[idx] * w;
    }
}

pub fn generate(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
    let p = &cfg.channel;
    let (n, m, k, nf) = (cfg.n_antennas, cfg.n_sudacs, cfg.n_ues, cfg.n_subcarriers);
    let amp_bs = p.bs_mean_gain().sqrt();
    let amp_sue = p.sue_mean_gain().sqrt();
    let kf = 10f64.powf(p.rician_k_db / 10.0);
    let los = (kf / (kf + 1.0)).sqrt();
    let nlos = (1.0 / (kf + 1.0)).sqrt();

    let scatter = |rng: &mut ChaCha8Rng| if p.fading { cn(rng) } else { Complex64::new(1.0, 0.0) };

    // i-major flat buffers, one entry per (i, row, col)
    let mut bs = Vec::with_capacity(nf * m * n);
    for i in 0..nf {
        for r in 0..m {
            let mut rng = stream(seed, HOP_BS, i as u64, r as u64);
            for _ in 0..n {
                bs.push(scatter(&mut rng));
            }
        }
    }
    let mut direct = Vec::with_capacity(nf * k * n * n);
    for i in 0..nf {
        for u in 0..k {
            for r in 0..n {
                let mut rng = stream(seed, HOP_DIRECT, i as u64, (u * 64 + r) as u64);
                for _ in 0..n {
                    direct.push(scatter(&mut rng));
                }
            }
        }
    }
    let mut sue_scatter = Vec::with_capacity(nf * k * m);
    let mut sue_phase = Vec::with_capacity(nf * k * m);
    for i in 0..nf {
        for u in 0..k {
            let mut rng = stream(seed, HOP_SUE, i as u64, u as u64);
            for _ in 0..m {
                sue_scatter.push(scatter(&mut rng));
                let theta: f64 = if p.fading { rng.gen_range(0.0..std::f64::consts::TAU) } else { 0.0 };
                sue_phase.push(Complex64::from_polar(1.0, theta));
            }
        }
    }
    if p.fading {
        correlate(&mut bs, p.freq_correlation, m * n);
        correlate(&mut direct, p.freq_correlation, k * n * n);
        correlate(&mut sue_scatter, p.freq_correlation, k * m);
    }

    let h_bs = (0..nf)
        .map(|i| ComplexMatrix::from_vec(m, n, bs[i * m * n..(i + 1) * m * n].iter().map(|z| z * amp_bs).collect()))
        .collect();
    let h_direct = (0..nf)
        .map(|i| {
            (0..k)
                .map(|u| {
                    let off = (i * k + u) * n * n;
                    ComplexMatrix::from_vec(n, n, direct[off..off + n * n].iter().map(|z| z * amp_bs).collect())
                })
                .collect()
        })
        .collect();
    let h_sue = (0..nf)
        .map(|i| {
            (0..k)
                .map(|u| {
                    (0..m)
                        .map(|j| {
                            let idx = (i * k + u) * m + j;
                            let entry = if p.fading { sue_phase[idx] * los + sue_scatter[idx] * nlos } else { sue_scatter[idx] };
                            entry * amp_sue
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    ChannelRealization { h_bs, h_sue, h_direct }
}

/// Per-stream CNR tensors, all sorted descending in the stream index.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    pub n_f: usize,
    pub n_ues: usize,
    pub n_s: usize,
    /// `[i][n]`
    pub g_bs: Vec<Vec<f64>>,
    /// `[i][k][n]`
    pub g_sue: Vec<Vec<Vec<f64>>>,
    /// `[i][n]`
    pub g_sb: Vec<Vec<f64>>,
    /// `[i][k][n]`
    pub g_ues: Vec<Vec<Vec<f64>>>,
}

impl EffectiveChannels {
    /// Uniform CNRs, handy for hand-built instances.
    pub fn flat(n_f: usize, n_ues: usize, n_s: usize, g_bs: f64, g_sue: f64) -> Self {
        Self {
            n_f,
            n_ues,
            n_s,
            g_bs: vec![vec![g_bs; n_s]; n_f],
            g_sue: vec![vec![vec![g_sue; n_s]; n_ues]; n_f],
            g_sb: vec![vec![g_bs; n_s]; n_f],
            g_ues: vec![vec![vec![g_sue; n_s]; n_ues]; n_f],
        }
    }
}

/// Squared singular values of `h_bs[i]` (descending).
pub fn bs_cnrs(ch: &ChannelRealization, i: usize) -> Vec<f64> {
    svd(&ch.h_bs[i]).expect("channel entries are finite").sigma.iter().map(|s| s * s).collect()
}

/// Squared moduli of the SUDAS→UE diagonal, sorted descending.
pub fn sue_cnrs(ch: &ChannelRealization, i: usize, k: usize) -> Vec<f64> {
    let mut g: Vec<f64> = ch.h_sue[i][k].iter().map(|z| z.norm_sqr()).collect();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    g
}

pub fn effective_cnrs(ch: &ChannelRealization, cfg: &SystemConfig) -> EffectiveChannels {
    let nf = ch.h_bs.len();
    let k = ch.h_sue.first().map_or(0, |v| v.len());
    let bs: Vec<Vec<f64>> = (0..nf).map(|i| bs_cnrs(ch, i)).collect();
    let sue: Vec<Vec<Vec<f64>>> = (0..nf).map(|i| (0..k).map(|u| sue_cnrs(ch, i, u)).collect()).collect();

    let mut n_s = cfg.stream_cap();
    for row in &bs {
        n_s = n_s.min(row.iter().filter(|&&g| g > 0.0).count());
    }
    for per_ue in &sue {
        for row in per_ue {
            n_s = n_s.min(row.iter().filter(|&&g| g > 0.0).count());
        }
    }
    let g_bs: Vec<Vec<f64>> = bs.iter().map(|r| r[..n_s].to_vec()).collect();
    let g_sue: Vec<Vec<Vec<f64>>> =
        sue.iter().map(|per| per.iter().map(|r| r[..n_s].to_vec()).collect()).collect();
    EffectiveChannels { n_f: nf, n_ues: k, n_s, g_sb: g_bs.clone(), g_ues: g_sue.clone(), g_bs, g_sue }
}
