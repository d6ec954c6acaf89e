//! Energy-efficiency maximization for the SUDAS system: Dinkelbach outer
//! loop around an alternating optimization of powers, subcarriers and the
//! DL/UL time split.

pub mod closed_form;
pub mod engine;

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

pub use closed_form::{
    dl_power_bs, dl_power_sudas, relay_power_approx, relay_power_exact, single_hop_power, suboptimal_dl_power_bs,
    suboptimal_dl_power_sudas, suboptimal_ul_power_sudas, suboptimal_ul_power_ue, ul_power_sudas, ul_power_ue,
};
pub use engine::{solve_time_split, Budget, Hop, Link, Problem, Role, Shape, State, TimeSplitLp, DL, UL};

use crate::channel::EffectiveChannels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{AllocationPolicy, Feasibility, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// High-SNR rate model, closed forms derived from it.
    Optimal,
    /// Exact SINR model, arbitrary-SNR closed forms.
    Suboptimal,
}

impl Variant {
    pub fn shape(self) -> Shape {
        match self {
            Variant::Optimal => Shape::Approx,
            Variant::Suboptimal => Shape::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Dinkelbach stop: `|U − η·U_TP| <` this, in bit/s.
    pub eta_tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Largest per-sweep change (W for powers, fraction for shares) that
    /// counts as converged.
    pub inner_tolerance: f64,
    /// Multiplier bisection stops once `hi/lo ≤ 1 + tol`.
    pub bisection_rel_tol: f64,
    /// Accepted budget slack, relative.
    pub budget_rel_tol: f64,
    /// Bracket expansions (×4) before giving up.
    pub max_doublings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eta_tolerance: 1e-6,
            max_outer: 30,
            max_inner: 50,
            inner_tolerance: 1e-7,
            bisection_rel_tol: 1e-13,
            budget_rel_tol: 1e-9,
            max_doublings: 200,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.eta_tolerance, self.inner_tolerance, self.bisection_rel_tol, self.budget_rel_tol];
        if pos.iter().any(|t| !(*t > 0.0)) || self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Config("solver tolerances and iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Lagrange multipliers in (bit/s/Hz)/W; floor weights are dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: f64,
    pub delta: f64,
    pub psi: Vec<f64>,
    pub phi: f64,
    pub w_dl: Vec<f64>,
    pub w_ul: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub outer: usize,
    /// Alternating sweeps spent so far.
    pub sweeps: usize,
    /// Ratio in the solver's own rate model.
    pub eta: f64,
    /// Ratio re-evaluated with exact SINR.
    pub ee_exact: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub eta_trajectory: Vec<f64>,
    pub final_policy: AllocationPolicy,
    /// bit/s in the solver's rate model.
    pub throughput: f64,
    /// W
    pub power: f64,
    /// bit/J
    pub ee: f64,
    pub throughput_exact: f64,
    pub ee_exact: f64,
    pub residuals: Feasibility,
    pub multipliers: Multipliers,
    pub iterations_used: usize,
    pub inner_sweeps: usize,
    pub converged: bool,
    /// Final `U − η·U_TP` in bit/s.
    pub dinkelbach_residual: f64,
    pub trace: Vec<TracePoint>,
}

fn broadcast(n_k: usize, per_i: &[Vec<f64>], n_s: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(per_i.len(), n_k, n_s);
    for (i, row) in per_i.iter().enumerate() {
        for k in 0..n_k {
            for n in 0..n_s {
                t.set(i, k, n, row[n]);
            }
        }
    }
    t
}

fn per_ue(per_ik: &[Vec<Vec<f64>>], n_k: usize, n_s: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(per_ik.len(), n_k, n_s);
    for (i, row) in per_ik.iter().enumerate() {
        for k in 0..n_k {
            for n in 0..n_s {
                t.set(i, k, n, row[k][n]);
            }
        }
    }
    t
}

fn check_dims(eff: &EffectiveChannels, cfg: &SystemConfig) -> Result<()> {
    cfg.validate()?;
    if eff.n_f != cfg.n_subcarriers || eff.n_ues != cfg.n_ues {
        return Err(Error::InvalidInput(format!(
            "channels have {} subcarriers and {} UEs, config expects {} and {}",
            eff.n_f, eff.n_ues, cfg.n_subcarriers, cfg.n_ues
        )));
    }
    Ok(())
}

/// Two-hop SUDAS problem, hops in update order.
pub fn sudas_problem(eff: &EffectiveChannels, cfg: &SystemConfig, variant: Variant) -> Result<Problem> {
    check_dims(eff, cfg)?;
    let (nk, ns) = (cfg.n_ues, eff.n_s);
    let shape = variant.shape();
    let dl = Link {
        hops: vec![
            Hop { gain: broadcast(nk, &eff.g_bs, ns), budget: Budget::Total(cfg.p_bs_max), eps: vec![cfg.eps_bs; nk], role: Role::Bs },
            Hop {
                gain: per_ue(&eff.g_sue, nk, ns),
                budget: Budget::Total(cfg.p_sudac_dl_total()),
                eps: vec![cfg.eps_sudac; nk],
                role: Role::SudasDl,
            },
        ],
        shape,
        floors: cfg.r_min_dl.clone(),
    };
    let ul = Link {
        hops: vec![
            Hop { gain: per_ue(&eff.g_ues, nk, ns), budget: Budget::PerUe(cfg.p_ue_max.clone()), eps: cfg.eps_ue.clone(), role: Role::Ue },
            Hop {
                gain: broadcast(nk, &eff.g_sb, ns),
                budget: Budget::Total(cfg.p_sudas_ul_max),
                eps: vec![cfg.eps_sudac; nk],
                role: Role::SudasUl,
            },
        ],
        shape,
        floors: cfg.r_min_ul.clone(),
    };
    Ok(Problem { n_f: eff.n_f, n_k: nk, n_s: ns, links: [dl, ul], static_power: cfg.static_power(), bandwidth: cfg.bandwidth_hz })
}

/// Largest sum rate (bit/s/Hz) of water-filling `budget` over `gains`.
pub fn water_filling_rate(gains: &[f64], budget: f64) -> f64 {
    let mut g: Vec<f64> = gains.iter().copied().filter(|&x| x > 0.0).collect();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut best = 0.0;
    let mut inv_sum = 0.0;
    for (m, &gm) in g.iter().enumerate() {
        inv_sum += 1.0 / gm;
        let level = (budget + inv_sum) / (m + 1) as f64;
        if level <= 1.0 / gm {
            break;
        }
        best = g[..=m].iter().map(|x| (level * x).log2()).sum();
    }
    best
}

/// Rejects floors that exceed what either hop could carry alone at full
/// budget over the whole slot.
fn check_floors(p: &Problem) -> Result<()> {
    for (l, name) in [(DL, "DL rate floor"), (UL, "UL rate floor")] {
        let link = &p.links[l];
        for k in 0..p.n_k {
            let f = link.floors[k];
            if f <= 0.0 {
                continue;
            }
            let mut cap = f64::INFINITY;
            for hop in &link.hops {
                let gains: Vec<f64> = (0..p.n_f).flat_map(|i| (0..p.n_s).map(move |n| (i, n))).map(|(i, n)| hop.gain.get(i, k, n)).collect();
                let budget = match &hop.budget {
                    Budget::Total(b) => *b,
                    Budget::PerUe(v) => v[k],
                };
                cap = cap.min(water_filling_rate(&gains, budget) * p.bandwidth);
            }
            if f > cap {
                return Err(Error::Infeasible(format!("{name} of UE {k}: {f:.3e} bit/s exceeds the attainable {cap:.3e} bit/s")));
            }
        }
    }
    Ok(())
}

pub(crate) fn multipliers(p: &Problem, st: &State) -> Multipliers {
    let mut m = Multipliers { lambda: 0.0, delta: 0.0, psi: vec![0.0; p.n_k], phi: 0.0, w_dl: st.w[DL].clone(), w_ul: st.w[UL].clone() };
    for l in [DL, UL] {
        for (h, hop) in p.links[l].hops.iter().enumerate() {
            let lam = &st.lam[l][h];
            match hop.role {
                Role::Bs => m.lambda = lam[0],
                Role::SudasDl => m.delta = lam[0],
                Role::Ue => m.psi = lam.clone(),
                Role::SudasUl => m.phi = lam[0],
            }
        }
    }
    m
}

/// Dinkelbach solve of an arbitrary engine problem.
pub fn solve_problem(p: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    check_floors(p)?;
    let out = p.dinkelbach(opts)?;
    let (u, pw) = p.totals(&out.state, false);
    let (u_exact, _) = p.totals(&out.state, true);
    let trace = out
        .trace
        .iter()
        .enumerate()
        .map(|(o, &(sweeps, eta, ee_exact))| TracePoint { outer: o + 1, sweeps, eta, ee_exact })
        .collect::<Vec<_>>();
    Ok(SolveReport {
        eta_trajectory: out.trajectory,
        final_policy: p.policy(&out.state),
        throughput: u,
        power: pw,
        ee: u / pw,
        throughput_exact: u_exact,
        ee_exact: u_exact / pw,
        residuals: p.feasibility(&out.state),
        multipliers: multipliers(p, &out.state),
        iterations_used: out.outer_iterations,
        inner_sweeps: trace.last().map_or(0, |t| t.sweeps),
        converged: out.converged,
        dinkelbach_residual: out.residual,
        trace,
    })
}

/// Throughput maximization: one alternating optimization with no power price.
pub fn tp_max_solve(p: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    check_floors(p)?;
    let res = p.inner(0.0, opts, None)?;
    let (u, pw) = p.totals(&res.state, false);
    let (u_exact, _) = p.totals(&res.state, true);
    Ok(SolveReport {
        eta_trajectory: vec![0.0, u / pw],
        final_policy: p.policy(&res.state),
        throughput: u,
        power: pw,
        ee: u / pw,
        throughput_exact: u_exact,
        ee_exact: u_exact / pw,
        residuals: p.feasibility(&res.state),
        multipliers: multipliers(p, &res.state),
        iterations_used: 1,
        inner_sweeps: res.sweeps,
        converged: res.converged,
        dinkelbach_residual: 0.0,
        trace: vec![TracePoint { outer: 1, sweeps: res.sweeps, eta: u / pw, ee_exact: u_exact / pw }],
    })
}

pub fn dinkelbach_solve(eff: &EffectiveChannels, cfg: &SystemConfig, opts: &SolverOptions, variant: Variant) -> Result<SolveReport> {
    solve_problem(&sudas_problem(eff, cfg, variant)?, opts)
}

/// Alternating optimization at a fixed price `eta` (bit/J).
pub fn inner_solve(eta: f64, eff: &EffectiveChannels, cfg: &SystemConfig, opts: &SolverOptions, variant: Variant) -> Result<AllocationPolicy> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput("eta must be nonnegative".into()));
    }
    let p = sudas_problem(eff, cfg, variant)?;
    Ok(p.policy(&p.inner(eta, opts, None)?.state))
}

/// Multipliers reached by the alternating optimization at price `eta`.
pub fn search_multipliers(eff: &EffectiveChannels, cfg: &SystemConfig, eta: f64, variant: Variant, opts: &SolverOptions) -> Result<Multipliers> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidInput("eta must be nonnegative".into()));
    }
    let p = sudas_problem(eff, cfg, variant)?;
    let res = p.inner(eta, opts, None)?;
    Ok(multipliers(&p, &res.state))
}

/// Subcarrier metric of one stream, `log₂(1+S) − S/(1+S)`.
pub fn stream_metric(sinr: f64) -> f64 {
    (sinr.ln_1p() / LN_2) - engine::METRIC_SCALE * sinr / (1.0 + sinr)
}

fn assign(metrics: &[Vec<f64>], w: &[f64], share: f64) -> Vec<Vec<f64>> {
    metrics
        .iter()
        .map(|row| {
            let k = engine::argmax_lowest(row.iter().zip(w).map(|(m, w)| (1.0 + w) * m));
            let mut s = vec![0.0; row.len()];
            s[k] = share;
            s
        })
        .collect()
}

/// `metrics[i][k]` unweighted; each subcarrier goes whole to the UE with the
/// largest `(1+w_k)·metric`, ties to the lowest index.
pub fn assign_subcarriers_dl(metrics: &[Vec<f64>], w_dl: &[f64], alpha: f64) -> Vec<Vec<f64>> {
    assign(metrics, w_dl, alpha)
}

pub fn assign_subcarriers_ul(metrics: &[Vec<f64>], w_ul: &[f64], beta: f64) -> Vec<Vec<f64>> {
    assign(metrics, w_ul, beta)
}

/// Reconstructs engine state (per-time powers, winners) from a policy.
pub fn state_from_policy(p: &Problem, pol: &AllocationPolicy) -> State {
    let mut st = p.initial_state();
    st.share = [pol.alpha, pol.beta];
    for l in [DL, UL] {
        let s_rows = if l == DL { &pol.s_dl } else { &pol.s_ul };
        for i in 0..p.n_f {
            st.win[l][i] = engine::argmax_lowest(s_rows[i].iter().copied());
        }
        for (h, hop) in p.links[l].hops.iter().enumerate() {
            let src = match hop.role {
                Role::Bs => &pol.e_bs,
                Role::SudasDl => &pol.e_sue,
                Role::Ue => &pol.e_ues,
                Role::SudasUl => &pol.e_sb,
            };
            for i in 0..p.n_f {
                for k in 0..p.n_k {
                    let s = s_rows[i][k];
                    for n in 0..p.n_s {
                        let v = if s > 0.0 { src.get(i, k, n) / s } else { 0.0 };
                        st.p[l][h].set(i, k, n, v);
                    }
                }
            }
        }
    }
    st
}

/// Optimal (α, β) with per-time powers and subcarrier winners held fixed.
pub fn update_time_split(policy: &AllocationPolicy, eff: &EffectiveChannels, cfg: &SystemConfig, eta: f64, variant: Variant) -> Result<(f64, f64)> {
    let p = sudas_problem(eff, cfg, variant)?;
    let st = state_from_policy(&p, policy);
    solve_time_split(&p.time_split_lp(&st, eta, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn water_filling_single_channel() {
        // level = 1 + 1/2, rate = log2(1.5 * 2)
        assert!((water_filling_rate(&[2.0], 1.0) - 3f64.log2()).abs() < 1e-14);
        assert_eq!(water_filling_rate(&[0.0, 0.0], 5.0), 0.0);
    }

    #[test]
    fn single_ue_wins_everything() {
        let s = assign_subcarriers_dl(&[vec![0.1], vec![0.0]], &[0.0], 0.4);
        assert_eq!(s, vec![vec![0.4], vec![0.4]]);
    }

    #[test]
    fn metric_is_nonnegative() {
        for s in [0.0, 1e-6, 0.5, 3.0, 1e6] {
            assert!(stream_metric(s) >= 0.0);
        }
    }
}
