//! Brute-force references: golden-section search and an exhaustive
//! small-instance optimizer.
//!
//! `exhaustive_small` searches a finite family: every subcarrier assignment
//! on each link, every time split on a grid, and per hop a fraction of the
//! budget from a log-spaced grid spread evenly over that hop's active
//! streams (per UE for the UE hop). The best ratio over the family is found
//! exactly by a Dinkelbach iteration on the finite set, which terminates
//! once the maximizer repeats.

use std::f64::consts::LN_2;

use crate::channel::EffectiveChannels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{sinr, AllocationPolicy, RateMode};
use crate::solver::Variant;

const PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("golden_max needs lo < hi, got [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("golden_max tolerance must be positive".into()));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - PHI * (b - a);
    let mut d = a + PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // the count bounds the loop once the bracket reaches ulp scale
    let max_iter = (tol.ln() / PHI.ln()).ceil().max(0.0) as usize + 2;
    let mut iter = 0;
    while b - a > tol * (hi - lo) && iter < max_iter {
        iter += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + PHI * (b - a);
            fd = f(d);
        }
    }
    // the endpoints are candidates too when the optimum sits on the boundary
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrids {
    /// Budget fractions tried on every hop, each in (0, 1].
    pub power_fractions: Vec<f64>,
    /// DL/UL slot fractions tried, each in [0, 1].
    pub shares: Vec<f64>,
}

impl Default for OracleGrids {
    fn default() -> Self {
        Self::log_spaced(32, 1e-4, 21)
    }
}

impl OracleGrids {
    /// `n_power` fractions log-spaced on `[min_fraction, 1]`, shares on a
    /// uniform grid with `n_share` points.
    pub fn log_spaced(n_power: usize, min_fraction: f64, n_share: usize) -> Self {
        let power_fractions = (0..n_power)
            .map(|j| if n_power == 1 { 1.0 } else { min_fraction.powf(1.0 - j as f64 / (n_power - 1) as f64) })
            .collect();
        let shares = (0..n_share).map(|j| j as f64 / (n_share - 1).max(1) as f64).collect();
        Self { power_fractions, shares }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub policy: AllocationPolicy,
    pub eta: f64,
    pub throughput: f64,
    pub power: f64,
}

// One candidate configuration of a link.
#[derive(Debug, Clone, Copy, Default)]
struct LinkPick {
    value: f64,
    rate: f64,
    energy: f64,
    share_idx: usize,
    assign: usize,
    // budget-fraction indices: first hop (or UE 0), second hop, UE 1
    f: [usize; 3],
}

struct Instance<'a> {
    eff: &'a EffectiveChannels,
    cfg: &'a SystemConfig,
    grids: &'a OracleGrids,
    /// `[share][f1·F + f2]`: best-rate floor-feasible assignment and its
    /// (rate, energy); energy does not depend on the assignment.
    dl: Vec<Vec<Option<(f64, f64, usize)>>>,
    /// `[share]`: rate of UE k on subcarrier i, flattened over
    /// `(fs, fu, count, i, k)`.
    ul: Vec<Vec<f64>>,
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

fn winner(assign: usize, i: usize) -> usize {
    (assign >> i) & 1
}

impl<'a> Instance<'a> {
    fn new(eff: &'a EffectiveChannels, cfg: &'a SystemConfig, grids: &'a OracleGrids, mode: RateMode) -> Self {
        let mut inst = Self { eff, cfg, grids, dl: Vec::new(), ul: Vec::new() };
        inst.dl = grids.shares.iter().map(|&s| inst.dl_table(s, mode)).collect();
        inst.ul = grids.shares.iter().map(|&s| inst.ul_table(s, mode)).collect();
        inst
    }

    fn n_assign(&self) -> usize {
        if self.cfg.n_ues == 1 {
            1
        } else {
            1 << self.eff.n_f
        }
    }

    fn dl_table(&self, s: f64, mode: RateMode) -> Vec<Option<(f64, f64, usize)>> {
        let (nf, ns, cfg) = (self.eff.n_f, self.eff.n_s, self.cfg);
        let fr = &self.grids.power_fractions;
        let streams = (nf * ns) as f64;
        let mut out = Vec::with_capacity(fr.len() * fr.len());
        for &x1 in fr {
            for &x2 in fr {
                if s == 0.0 || ns == 0 {
                    let ok = cfg.r_min_dl.iter().all(|&f| f <= 0.0);
                    out.push(ok.then_some((0.0, 0.0, 0)));
                    continue;
                }
                let p1 = x1 * cfg.p_bs_max / (s * streams);
                let p2 = x2 * cfg.p_sudac_dl_total() / (s * streams);
                let energy = cfg.eps_bs * x1 * cfg.p_bs_max + cfg.eps_sudac * x2 * cfg.p_sudac_dl_total();
                let r: Vec<[f64; 2]> = (0..nf)
                    .map(|i| {
                        let mut o = [0.0; 2];
                        for (k, v) in o.iter_mut().enumerate().take(cfg.n_ues) {
                            *v = (0..ns)
                                .map(|n| log2_1p(sinr(self.eff.g_bs[i][n] * p1, self.eff.g_sue[i][k][n] * p2, mode)))
                                .sum::<f64>()
                                * s
                                * cfg.bandwidth_hz;
                        }
                        o
                    })
                    .collect();
                let mut best: Option<(f64, f64, usize)> = None;
                for a in 0..self.n_assign() {
                    let mut per_ue = [0.0; 2];
                    for (i, ri) in r.iter().enumerate() {
                        let k = winner(a, i);
                        per_ue[k] += ri[k];
                    }
                    if (0..cfg.n_ues).any(|k| per_ue[k] < cfg.r_min_dl[k]) {
                        continue;
                    }
                    let rate = per_ue[0] + per_ue[1];
                    if best.map_or(true, |b| rate > b.0) {
                        best = Some((rate, energy, a));
                    }
                }
                out.push(best);
            }
        }
        out
    }

    fn ul_index(&self, fs: usize, fu: usize, count: usize, i: usize, k: usize) -> usize {
        let (nf, nk, f) = (self.eff.n_f, self.cfg.n_ues, self.grids.power_fractions.len());
        (((fs * f + fu) * (nf + 1) + count) * nf + i) * nk + k
    }

    fn ul_table(&self, s: f64, mode: RateMode) -> Vec<f64> {
        let (nf, ns, nk, cfg) = (self.eff.n_f, self.eff.n_s, self.cfg.n_ues, self.cfg);
        let fr = &self.grids.power_fractions;
        let streams = (nf * ns) as f64;
        let mut t = vec![0.0; fr.len() * fr.len() * (nf + 1) * nf * nk];
        if s == 0.0 || ns == 0 {
            return t;
        }
        for (fs, &xs) in fr.iter().enumerate() {
            let p_sb = xs * cfg.p_sudas_ul_max / (s * streams);
            for (fu, &xu) in fr.iter().enumerate() {
                for count in 1..=nf {
                    for i in 0..nf {
                        for k in 0..nk {
                            let p_ue = xu * cfg.p_ue_max[k] / (s * (count * ns) as f64);
                            let r: f64 = (0..ns)
                                .map(|n| log2_1p(sinr(self.eff.g_sb[i][n] * p_sb, self.eff.g_ues[i][k][n] * p_ue, mode)))
                                .sum();
                            let j = self.ul_index(fs, fu, count, i, k);
                            t[j] = r * s * cfg.bandwidth_hz;
                        }
                    }
                }
            }
        }
        t
    }

    fn best_dl(&self, eta: f64) -> Vec<Option<LinkPick>> {
        let f = self.grids.power_fractions.len();
        self.dl
            .iter()
            .enumerate()
            .map(|(si, tab)| {
                let mut best: Option<LinkPick> = None;
                for (c, entry) in tab.iter().enumerate() {
                    if let Some((rate, energy, a)) = *entry {
                        let value = rate - eta * energy;
                        if best.map_or(true, |b| value > b.value) {
                            best = Some(LinkPick { value, rate, energy, share_idx: si, assign: a, f: [c / f, c % f, 0] });
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// Best UL candidate per share value. UE budgets are chosen per UE.
    fn best_ul(&self, eta: f64) -> Vec<Option<LinkPick>> {
        let (nf, ns, cfg) = (self.eff.n_f, self.eff.n_s, self.cfg);
        let nk = cfg.n_ues;
        let fr = &self.grids.power_fractions;
        self.grids
            .shares
            .iter()
            .enumerate()
            .map(|(si, &s)| {
                if s == 0.0 || ns == 0 {
                    return (cfg.r_min_ul.iter().all(|&f| f <= 0.0)).then(LinkPick::default);
                }
                let tab = &self.ul[si];
                let mut best: Option<LinkPick> = None;
                for a in 0..self.n_assign() {
                    let count: Vec<usize> = (0..nk).map(|k| (0..nf).filter(|&i| winner(a, i) == k).count()).collect();
                    for (fs, &xs) in fr.iter().enumerate() {
                        let e_sb = cfg.eps_sudac * xs * cfg.p_sudas_ul_max;
                        let mut value = -eta * e_sb;
                        let mut rate = 0.0;
                        let mut energy = e_sb;
                        let mut picks = [0usize; 2];
                        let mut ok = true;
                        for k in 0..nk {
                            if count[k] == 0 {
                                ok &= cfg.r_min_ul[k] <= 0.0;
                                continue;
                            }
                            let mut bk: Option<(f64, f64, f64, usize)> = None;
                            for (fu, &xu) in fr.iter().enumerate() {
                                let r: f64 = (0..nf)
                                    .filter(|&i| winner(a, i) == k)
                                    .map(|i| tab[self.ul_index(fs, fu, count[k], i, k)])
                                    .sum();
                                if r < cfg.r_min_ul[k] {
                                    continue;
                                }
                                let e = cfg.eps_ue[k] * xu * cfg.p_ue_max[k];
                                let v = r - eta * e;
                                if bk.map_or(true, |x| v > x.0) {
                                    bk = Some((v, r, e, fu));
                                }
                            }
                            match bk {
                                Some((v, r, e, fu)) => {
                                    value += v;
                                    rate += r;
                                    energy += e;
                                    picks[k] = fu;
                                }
                                None => ok = false,
                            }
                        }
                        if ok && best.map_or(true, |bp| value > bp.value) {
                            best = Some(LinkPick { value, rate, energy, share_idx: si, assign: a, f: [picks[0], fs, picks[1]] });
                        }
                    }
                }
                best
            })
            .collect()
    }

    fn policy(&self, dl: &LinkPick, ul: &LinkPick) -> AllocationPolicy {
        let (nf, nk, ns, cfg) = (self.eff.n_f, self.cfg.n_ues, self.eff.n_s, self.cfg);
        let fr = &self.grids.power_fractions;
        let mut pol = AllocationPolicy::zeros(nf, nk, ns);
        let alpha = self.grids.shares[dl.share_idx];
        let beta = self.grids.shares[ul.share_idx];
        pol.alpha = alpha;
        pol.beta = beta;
        let streams = (nf * ns) as f64;
        let count: Vec<usize> = (0..nk).map(|k| (0..nf).filter(|&i| winner(ul.assign, i) == k).count()).collect();
        for i in 0..nf {
            let kd = winner(dl.assign, i);
            let ku = winner(ul.assign, i);
            pol.s_dl[i][kd] = alpha;
            pol.s_ul[i][ku] = beta;
            for n in 0..ns {
                if alpha > 0.0 {
                    pol.e_bs.set(i, kd, n, fr[dl.f[0]] * cfg.p_bs_max / streams);
                    pol.e_sue.set(i, kd, n, fr[dl.f[1]] * cfg.p_sudac_dl_total() / streams);
                }
                if beta > 0.0 {
                    let fu = if ku == 0 { ul.f[0] } else { ul.f[2] };
                    pol.e_ues.set(i, ku, n, fr[fu] * cfg.p_ue_max[ku] / (count[ku] * ns) as f64);
                    pol.e_sb.set(i, ku, n, fr[ul.f[1]] * cfg.p_sudas_ul_max / streams);
                }
            }
        }
        pol
    }
}

/// Exhaustive search over the grid family for K ≤ 2, n_F ≤ 16, N_S ≤ 2.
pub fn exhaustive_small(eff: &EffectiveChannels, cfg: &SystemConfig, grids: &OracleGrids, variant: Variant) -> Result<OracleResult> {
    cfg.validate()?;
    if cfg.n_ues > 2 || eff.n_f > 16 || eff.n_s > 2 {
        return Err(Error::SizeLimit(format!(
            "exhaustive search supports K <= 2, n_F <= 16, N_S <= 2; got K = {}, n_F = {}, N_S = {}",
            cfg.n_ues, eff.n_f, eff.n_s
        )));
    }
    if eff.n_f != cfg.n_subcarriers || eff.n_ues != cfg.n_ues {
        return Err(Error::InvalidInput("channels do not match the configuration".into()));
    }
    if grids.power_fractions.iter().any(|&x| !(x > 0.0 && x <= 1.0)) || grids.shares.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidInput("oracle grids must lie in (0, 1] and [0, 1]".into()));
    }
    let mode = match variant {
        Variant::Optimal => RateMode::Approx,
        Variant::Suboptimal => RateMode::Exact,
    };
    let inst = Instance::new(eff, cfg, grids, mode);
    let p_static = cfg.static_power();
    let mut eta = 0.0;
    let mut last: Option<(f64, f64)> = None;
    for _ in 0..200 {
        let dl = inst.best_dl(eta);
        let ul = inst.best_ul(eta);
        let mut best: Option<(f64, LinkPick, LinkPick)> = None;
        for d in dl.iter().flatten() {
            for u in ul.iter().flatten() {
                if grids.shares[d.share_idx] + grids.shares[u.share_idx] > 1.0 + 1e-12 {
                    continue;
                }
                let v = d.value + u.value;
                if best.as_ref().map_or(true, |b| v > b.0) {
                    best = Some((v, *d, *u));
                }
            }
        }
        let Some((_, d, u)) = best else {
            return Err(Error::Infeasible("no grid point meets the rate floors".into()));
        };
        let rate = d.rate + u.rate;
        let power = p_static + d.energy + u.energy;
        let ratio = rate / power;
        if ratio <= eta || last == Some((rate, power)) {
            return Ok(OracleResult { policy: inst.policy(&d, &u), eta: ratio.max(eta), throughput: rate, power });
        }
        last = Some((rate, power));
        eta = ratio;
    }
    Err(Error::Numerical("oracle ratio search did not settle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, _) = golden_max(|x| -(x - 3.0) * (x - 3.0), 0.0, 10.0, 1e-9).unwrap();
        assert!((x - 3.0).abs() < 1e-8);
    }

    #[test]
    fn golden_rate_minus_power() {
        let f = |x: f64| (1.0 + x).log2() - x;
        let (x, v) = golden_max(f, 0.0, 10.0, 1e-10).unwrap();
        let x_star = 1.0 / LN_2 - 1.0;
        // values only resolve the argmax to about sqrt(eps)
        assert!((x - x_star).abs() < 1e-7);
        assert!(f(x_star) - v < 1e-15);
    }

    #[test]
    fn golden_rejects_empty_interval() {
        assert!(matches!(golden_max(|x| x, 1.0, 1.0, 1e-6), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn grids_are_log_spaced() {
        let g = OracleGrids::default();
        assert_eq!(g.power_fractions.len(), 32);
        assert!((g.power_fractions[0] - 1e-4).abs() < 1e-18);
        assert_eq!(*g.power_fractions.last().unwrap(), 1.0);
        assert_eq!(g.shares.len(), 21);
        assert!((g.shares[1] - 0.05).abs() < 1e-15);
    }
}
