//! Allocation policies and the objective/constraint evaluators.
//!
//! Rates of individual streams are in bit/s/Hz; aggregates carry the
//! subcarrier bandwidth so they compare directly with floors in bit/s.

use crate::channel::EffectiveChannels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateMode {
    /// SINR = ab / (1 + a + b).
    Exact,
    /// High-SNR form ab / (a + b).
    Approx,
}

fn check_nonneg(vals: [f64; 4]) -> Result<()> {
    if vals.iter().all(|v| *v >= 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidInput("CNRs and powers must be nonnegative".into()))
    }
}

/// End-to-end SINR of one stream given the two hop SNRs `a` and `b`.
pub fn sinr(a: f64, b: f64, mode: RateMode) -> f64 {
    match mode {
        RateMode::Exact => a * b / (1.0 + a + b),
        RateMode::Approx => {
            if a + b == 0.0 {
                0.0
            } else if a.is_infinite() {
                b
            } else if b.is_infinite() {
                a
            } else {
                a * b / (a + b)
            }
        }
    }
}

pub fn rate_exact_dl(g_bs: f64, g_sue: f64, p_bs: f64, p_sue: f64) -> Result<f64> {
    check_nonneg([g_bs, g_sue, p_bs, p_sue])?;
    Ok(sinr(g_bs * p_bs, g_sue * p_sue, RateMode::Exact).ln_1p() / std::f64::consts::LN_2)
}

pub fn rate_approx_dl(g_bs: f64, g_sue: f64, p_bs: f64, p_sue: f64) -> Result<f64> {
    check_nonneg([g_bs, g_sue, p_bs, p_sue])?;
    Ok(sinr(g_bs * p_bs, g_sue * p_sue, RateMode::Approx).ln_1p() / std::f64::consts::LN_2)
}

pub fn rate_exact_ul(g_sb: f64, g_ues: f64, p_sb: f64, p_ues: f64) -> Result<f64> {
    rate_exact_dl(g_sb, g_ues, p_sb, p_ues)
}

pub fn rate_approx_ul(g_sb: f64, g_ues: f64, p_sb: f64, p_ues: f64) -> Result<f64> {
    rate_approx_dl(g_sb, g_ues, p_sb, p_ues)
}

/// `s·log₂(1 + SINR(e_a/s, e_b/s))` with gains folded into `ea`, `eb`.
/// Zero time share contributes zero.
pub fn shared_rate(s: f64, ea: f64, eb: f64, mode: RateMode) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    s * sinr(ea / s, eb / s, mode).ln_1p() / std::f64::consts::LN_2
}

/// Flat `[i][k][n]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub n_f: usize,
    pub n_k: usize,
    pub n_s: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n_f: usize, n_k: usize, n_s: usize) -> Self {
        Self { n_f, n_k, n_s, data: vec![0.0; n_f * n_k * n_s] }
    }

    pub fn filled(n_f: usize, n_k: usize, n_s: usize, v: f64) -> Self {
        Self { n_f, n_k, n_s, data: vec![v; n_f * n_k * n_s] }
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize, n: usize) -> usize {
        (i * self.n_k + k) * self.n_s + n
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, n: usize) -> f64 {
        self.data[self.idx(i, k, n)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, n: usize, v: f64) {
        let j = self.idx(i, k, n);
        self.data[j] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sum over `(i, n)` for UE `k`.
    pub fn sum_ue(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_f {
            for n in 0..self.n_s {
                s += self.get(i, k, n);
            }
        }
        s
    }
}

/// Energies P̃ = s·P for all four hops plus the time shares.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPolicy {
    pub e_bs: Tensor3,
    pub e_sue: Tensor3,
    pub e_ues: Tensor3,
    pub e_sb: Tensor3,
    /// `[i][k]`
    pub s_dl: Vec<Vec<f64>>,
    pub s_ul: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
}

impl AllocationPolicy {
    pub fn zeros(n_f: usize, n_k: usize, n_s: usize) -> Self {
        Self {
            e_bs: Tensor3::zeros(n_f, n_k, n_s),
            e_sue: Tensor3::zeros(n_f, n_k, n_s),
            e_ues: Tensor3::zeros(n_f, n_k, n_s),
            e_sb: Tensor3::zeros(n_f, n_k, n_s),
            s_dl: vec![vec![0.0; n_k]; n_f],
            s_ul: vec![vec![0.0; n_k]; n_f],
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.e_bs.n_f, self.e_bs.n_k, self.e_bs.n_s)
    }
}

/// DL and UL rate of UE `k` in bit/s.
pub fn ue_rates(policy: &AllocationPolicy, eff: &EffectiveChannels, cfg: &SystemConfig, k: usize, mode: RateMode) -> (f64, f64) {
    let (n_f, _, n_s) = policy.dims();
    let (mut dl, mut ul) = (0.0, 0.0);
    for i in 0..n_f {
        let (sd, su) = (policy.s_dl[i][k], policy.s_ul[i][k]);
        for n in 0..n_s {
            dl += shared_rate(sd, eff.g_bs[i][n] * policy.e_bs.get(i, k, n), eff.g_sue[i][k][n] * policy.e_sue.get(i, k, n), mode);
            ul += shared_rate(su, eff.g_sb[i][n] * policy.e_sb.get(i, k, n), eff.g_ues[i][k][n] * policy.e_ues.get(i, k, n), mode);
        }
    }
    (dl * cfg.bandwidth_hz, ul * cfg.bandwidth_hz)
}

/// System throughput in bit/s.
pub fn throughput(policy: &AllocationPolicy, eff: &EffectiveChannels, cfg: &SystemConfig, mode: RateMode) -> f64 {
    let (_, n_k, _) = policy.dims();
    (0..n_k)
        .map(|k| {
            let (d, u) = ue_rates(policy, eff, cfg, k, mode);
            d + u
        })
        .sum()
}

/// Total consumed power in Watt.
pub fn power_consumption(policy: &AllocationPolicy, cfg: &SystemConfig) -> f64 {
    let (_, n_k, _) = policy.dims();
    let mut p = cfg.static_power();
    p += cfg.eps_bs * policy.e_bs.sum();
    p += cfg.eps_sudac * (policy.e_sue.sum() + policy.e_sb.sum());
    for k in 0..n_k {
        p += cfg.eps_ue[k] * policy.e_ues.sum_ue(k);
    }
    p
}

/// Bits per Joule.
pub fn energy_efficiency(policy: &AllocationPolicy, eff: &EffectiveChannels, cfg: &SystemConfig, mode: RateMode) -> f64 {
    throughput(policy, eff, cfg, mode) / power_consumption(policy, cfg)
}

/// Constraint residuals; a residual ≤ 0 means the constraint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub c1: f64,
    pub c2: f64,
    pub c3: Vec<f64>,
    pub c4: f64,
    /// `R_min − R` in bit/s, only for UEs with a floor.
    pub c5: Vec<f64>,
    pub c6: Vec<f64>,
    /// Per subcarrier `Σ_k s_dl − α`.
    pub c7: Vec<f64>,
    pub c8: Vec<f64>,
    /// Largest violation of `0 ≤ s_dl ≤ α`.
    pub c9: f64,
    pub c10: f64,
    pub c11: f64,
    pub c12: f64,
}

impl Feasibility {
    /// Budget residuals C1–C4 divided by their budgets.
    pub fn worst_budget_ratio(&self, cfg: &SystemConfig) -> f64 {
        let mut w = (self.c1 / cfg.p_bs_max).max(self.c2 / cfg.p_sudac_dl_total()).max(self.c4 / cfg.p_sudas_ul_max);
        for (r, b) in self.c3.iter().zip(&cfg.p_ue_max) {
            w = w.max(r / b);
        }
        w
    }

    /// Rate-floor residuals divided by the floors.
    pub fn worst_floor_ratio(&self, cfg: &SystemConfig) -> f64 {
        let mut w = f64::NEG_INFINITY;
        for (r, f) in self.c5.iter().zip(&cfg.r_min_dl).chain(self.c6.iter().zip(&cfg.r_min_ul)) {
            if *f > 0.0 {
                w = w.max(r / f);
            }
        }
        w
    }

    /// Budgets within `tol`·budget, floors within `tol`·floor, structure
    /// exact up to rounding.
    pub fn holds(&self, cfg: &SystemConfig, tol: f64) -> bool {
        self.worst_budget_ratio(cfg) <= tol && self.worst_floor_ratio(cfg) <= tol && self.worst_structural() <= 1e-12
    }

    pub fn worst_structural(&self) -> f64 {
        let mut w = self.c9.max(self.c10).max(self.c11).max(self.c12);
        for r in self.c7.iter().chain(&self.c8) {
            w = w.max(*r);
        }
        w
    }
}

pub fn feasibility(policy: &AllocationPolicy, eff: &EffectiveChannels, cfg: &SystemConfig, mode: RateMode) -> Feasibility {
    let (_, n_k, _) = policy.dims();
    let c3 = (0..n_k).map(|k| policy.e_ues.sum_ue(k) - cfg.p_ue_max[k]).collect();
    let mut c5 = vec![0.0; n_k];
    let mut c6 = vec![0.0; n_k];
    for k in 0..n_k {
        if cfg.r_min_dl[k] > 0.0 || cfg.r_min_ul[k] > 0.0 {
            let (d, u) = ue_rates(policy, eff, cfg, k, mode);
            if cfg.r_min_dl[k] > 0.0 {
                c5[k] = cfg.r_min_dl[k] - d;
            }
            if cfg.r_min_ul[k] > 0.0 {
                c6[k] = cfg.r_min_ul[k] - u;
            }
        }
    }
    let c7 = policy.s_dl.iter().map(|row| row.iter().sum::<f64>() - policy.alpha).collect();
    let c8 = policy.s_ul.iter().map(|row| row.iter().sum::<f64>() - policy.beta).collect();
    let box_violation = |s: &Vec<Vec<f64>>, cap: f64| {
        s.iter().flatten().fold(f64::NEG_INFINITY, |w, &x| w.max(x - cap).max(-x))
    };
    Feasibility {
        c1: policy.e_bs.sum() - cfg.p_bs_max,
        c2: policy.e_sue.sum() - cfg.p_sudac_dl_total(),
        c3,
        c4: policy.e_sb.sum() - cfg.p_sudas_ul_max,
        c5,
        c6,
        c7,
        c8,
        c9: box_violation(&policy.s_dl, policy.alpha),
        c10: box_violation(&policy.s_ul, policy.beta),
        c11: policy.alpha + policy.beta - 1.0,
        c12: (-policy.alpha).max(-policy.beta),
    }
}
