//! Reference systems without SUDAS and the noise-free bound.
//!
//! Both baselines serve UEs straight from the BS in the licensed band with
//! the same OFDMA scheduling, time split and floors as the SUDAS system.
//! The MIMO benchmark gives each UE N antennas (N eigen-streams of the
//! direct channel); the plain baseline gives each UE one antenna and lets
//! the BS beamform to it. UE circuit power does not grow with antennas.

use crate::channel::{ChannelRealization, EffectiveChannels};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::Tensor3;
use crate::numerics::svd;
use crate::solver::{solve_problem, tp_max_solve, Budget, Hop, Link, Problem, Role, Shape, SolveReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineTag {
    MimoBenchmark,
    NoSudas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    EeMax,
    TpMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineKind {
    pub tag: BaselineTag,
    pub objective: Objective,
}

impl BaselineKind {
    pub fn n_ue_antennas(&self, cfg: &SystemConfig) -> usize {
        match self.tag {
            BaselineTag::MimoBenchmark => cfg.n_antennas,
            BaselineTag::NoSudas => 1,
        }
    }
}

/// Per-stream CNRs `[i][k][n]` of the direct BS–UE channel.
fn direct_cnrs(ch: &ChannelRealization, tag: BaselineTag) -> Result<Vec<Vec<Vec<f64>>>> {
    ch.h_direct
        .iter()
        .map(|per_ue| {
            per_ue
                .iter()
                .map(|h| match tag {
                    BaselineTag::MimoBenchmark => Ok(svd(h)?.sigma.iter().map(|s| s * s).collect()),
                    // maximum-ratio transmission to the first UE antenna
                    BaselineTag::NoSudas => Ok(vec![(0..h.cols()).map(|c| h[(0, c)].norm_sqr()).sum()]),
                })
                .collect()
        })
        .collect()
}

fn tensor(g: &[Vec<Vec<f64>>], n_k: usize, n_s: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(g.len(), n_k, n_s);
    for (i, per_ue) in g.iter().enumerate() {
        for k in 0..n_k {
            for n in 0..n_s {
                t.set(i, k, n, per_ue[k][n]);
            }
        }
    }
    t
}

pub fn baseline_problem(tag: BaselineTag, ch: &ChannelRealization, cfg: &SystemConfig) -> Result<Problem> {
    cfg.validate()?;
    if ch.h_direct.len() != cfg.n_subcarriers || ch.h_direct.iter().any(|v| v.len() != cfg.n_ues) {
        return Err(Error::InvalidInput("direct channels do not match the configuration".into()));
    }
    let nk = cfg.n_ues;
    let g = direct_cnrs(ch, tag)?;
    let cap = match tag {
        BaselineTag::MimoBenchmark => cfg.n_antennas,
        BaselineTag::NoSudas => 1,
    };
    let n_s = g.iter().flatten().map(|row| row.iter().filter(|&&x| x > 0.0).count()).min().unwrap_or(0).min(cap);
    let gain = tensor(&g, nk, n_s);
    let dl = Link {
        hops: vec![Hop { gain: gain.clone(), budget: Budget::Total(cfg.p_bs_max), eps: vec![cfg.eps_bs; nk], role: Role::Bs }],
        shape: Shape::Single,
        floors: cfg.r_min_dl.clone(),
    };
    let ul = Link {
        hops: vec![Hop { gain, budget: Budget::PerUe(cfg.p_ue_max.clone()), eps: cfg.eps_ue.clone(), role: Role::Ue }],
        shape: Shape::Single,
        floors: cfg.r_min_ul.clone(),
    };
    let static_power = cfg.p_circuit_bs + cfg.n_antennas as f64 * cfg.p_antenna_bs + nk as f64 * cfg.p_circuit_ue;
    Ok(Problem { n_f: cfg.n_subcarriers, n_k: nk, n_s, links: [dl, ul], static_power, bandwidth: cfg.bandwidth_hz })
}

pub fn solve_baseline(kind: BaselineKind, ch: &ChannelRealization, cfg: &SystemConfig, opts: &SolverOptions) -> Result<SolveReport> {
    let p = baseline_problem(kind.tag, ch, cfg)?;
    match kind.objective {
        Objective::EeMax => solve_problem(&p, opts),
        Objective::TpMax => tp_max_solve(&p, opts),
    }
}

/// SUDAS problem with receiver and forwarded noise removed: each link
/// collapses to its licensed hop, so the SUDAC side costs nothing.
pub fn noise_free_problem(eff: &EffectiveChannels, cfg: &SystemConfig) -> Result<Problem> {
    cfg.validate()?;
    let (nk, ns) = (cfg.n_ues, eff.n_s);
    let bcast = |g: &Vec<Vec<f64>>| {
        let mut t = Tensor3::zeros(eff.n_f, nk, ns);
        for (i, row) in g.iter().enumerate() {
            for k in 0..nk {
                for n in 0..ns {
                    t.set(i, k, n, row[n]);
                }
            }
        }
        t
    };
    let dl = Link {
        hops: vec![Hop { gain: bcast(&eff.g_bs), budget: Budget::Total(cfg.p_bs_max), eps: vec![cfg.eps_bs; nk], role: Role::Bs }],
        shape: Shape::Single,
        floors: cfg.r_min_dl.clone(),
    };
    let ul = Link {
        hops: vec![Hop {
            gain: bcast(&eff.g_sb),
            budget: Budget::Total(cfg.p_sudas_ul_max),
            eps: vec![cfg.eps_sudac; nk],
            role: Role::SudasUl,
        }],
        shape: Shape::Single,
        floors: cfg.r_min_ul.clone(),
    };
    Ok(Problem { n_f: eff.n_f, n_k: nk, n_s: ns, links: [dl, ul], static_power: cfg.static_power(), bandwidth: cfg.bandwidth_hz })
}

pub fn noise_free_upper_bound(eff: &EffectiveChannels, cfg: &SystemConfig, opts: &SolverOptions) -> Result<f64> {
    Ok(solve_problem(&noise_free_problem(eff, cfg)?, opts)?.ee)
}
