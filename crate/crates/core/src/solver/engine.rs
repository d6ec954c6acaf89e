//! Alternating optimization over per-stream powers, subcarrier winners and
//! the DL/UL time split, shared by every system variant.
//!
//! A problem has two links (DL, UL). Each link has one or two hops; a hop
//! carries its CNR tensor, a budget, amplifier factors and the role that
//! maps it back onto [`AllocationPolicy`] energies. Internally rates are in
//! bit/s/Hz and prices in (bit/s/Hz)/W, i.e. `η/B`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{sinr, AllocationPolicy, Feasibility, RateMode, Tensor3};

use super::closed_form::{relay_power_approx, relay_power_exact, single_hop_power};
use super::SolverOptions;

pub const DL: usize = 0;
pub const UL: usize = 1;

/// Weight of the `S/(1+S)` term in the subcarrier metric.
#[cfg(not(feature = "selection-ln2"))]
pub const METRIC_SCALE: f64 = 1.0;
#[cfg(feature = "selection-ln2")]
pub const METRIC_SCALE: f64 = 1.0 / LN_2;

const W_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Two hops, high-SNR SINR.
    Approx,
    /// Two hops, exact SINR.
    Exact,
    /// One hop, SINR = g·P.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Budget {
    Total(f64),
    PerUe(Vec<f64>),
}

impl Budget {
    fn for_ue(&self, k: usize) -> f64 {
        match self {
            Budget::Total(b) => *b,
            Budget::PerUe(v) => v[k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Bs,
    SudasDl,
    Ue,
    SudasUl,
}

#[derive(Debug, Clone)]
pub struct Hop {
    pub gain: Tensor3,
    pub budget: Budget,
    pub eps: Vec<f64>,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub hops: Vec<Hop>,
    pub shape: Shape,
    /// Rate floors in bit/s, 0 for none.
    pub floors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub n_f: usize,
    pub n_k: usize,
    pub n_s: usize,
    pub links: [Link; 2],
    pub static_power: f64,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Per-time-unit powers `[link][hop]`, defined for every tuple.
    pub p: Vec<Vec<Tensor3>>,
    /// Winning UE per subcarrier `[link][i]`.
    pub win: [Vec<usize>; 2],
    /// `[alpha, beta]`
    pub share: [f64; 2],
    /// Budget multipliers `[link][hop][k]`, normalized per Hz.
    pub lam: Vec<Vec<Vec<f64>>>,
    /// Floor multipliers of the latest power step.
    pub w: [Vec<f64>; 2],
    /// Floor multipliers of the latest subcarrier step.
    pub w_sel: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub state: State,
    pub sweeps: usize,
    pub converged: bool,
    /// `U − η·U_TP` after every full sweep.
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OuterResult {
    pub state: State,
    pub trajectory: Vec<f64>,
    /// `(cumulative sweeps, ratio in the solver's own rate model, exact ratio)`
    pub trace: Vec<(usize, f64, f64)>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Coefficients of the time-split LP: maximize `c_alpha·α + c_beta·β`
/// subject to box bounds and `α + β ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSplitLp {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
}

impl TimeSplitLp {
    pub fn unconstrained(c_alpha: f64, c_beta: f64) -> Self {
        Self { c_alpha, c_beta, alpha_lo: 0.0, alpha_hi: 1.0, beta_lo: 0.0, beta_hi: 1.0 }
    }
}

/// Exact vertex enumeration. Ties resolve to the optimal point closest to
/// `α = β = ½`.
pub fn solve_time_split(lp: &TimeSplitLp) -> Result<(f64, f64)> {
    let (alo, ahi) = (lp.alpha_lo.max(0.0), lp.alpha_hi.min(1.0));
    let (blo, bhi) = (lp.beta_lo.max(0.0), lp.beta_hi.min(1.0));
    if alo > ahi || blo > bhi || alo + blo > 1.0 {
        return Err(Error::Infeasible(format!(
            "time split: alpha in [{alo:.3e}, {ahi:.3e}], beta in [{blo:.3e}, {bhi:.3e}] with alpha+beta <= 1"
        )));
    }
    let mut verts = vec![(alo, blo), (ahi.min(1.0 - blo), blo), (alo, bhi.min(1.0 - alo))];
    if 1.0 - ahi >= blo {
        verts.push((ahi, bhi.min(1.0 - ahi)));
    }
    if 1.0 - bhi >= alo {
        verts.push((ahi.min(1.0 - bhi), bhi));
    }
    let f = |(a, b): (f64, f64)| lp.c_alpha * a + lp.c_beta * b;
    let best = verts.iter().map(|&v| f(v)).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (lp.c_alpha.abs() + lp.c_beta.abs()) + f64::MIN_POSITIVE;
    let tied: Vec<(f64, f64)> = verts.iter().copied().filter(|&v| f(v) >= best - tol).collect();
    let target = (0.5, 0.5);
    let mut cands = tied.clone();
    for x in 0..tied.len() {
        for y in (x + 1)..tied.len() {
            cands.push(project_segment(target, tied[x], tied[y]));
        }
    }
    let dist = |(a, b): (f64, f64)| (a - target.0).powi(2) + (b - target.1).powi(2);
    let mut pick = cands[0];
    for &c in &cands[1..] {
        if dist(c) < dist(pick) - 1e-15 {
            pick = c;
        }
    }
    Ok(pick)
}

fn project_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0);
    (a.0 + t * d.0, a.1 + t * d.1)
}

/// Index of the largest weighted metric; ties go to the lowest index.
pub fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}

/// One active (subcarrier, stream) of a link, split into the parts that
/// follow the share and the parts that stay fixed.
struct Term {
    k: usize,
    a: [f64; 2],
    scaled: [bool; 2],
    cost_scaled: f64,
    cost_fixed: f64,
}

/// Brent maximizer (golden section with parabolic steps) of a concave
/// function on `[lo, hi]`; endpoints are checked too.
fn golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= 0.0 {
        return lo;
    }
    const C: f64 = 0.381_966_011_250_105_1;
    let g = |x: f64| -f(x);
    // concave: a non-decreasing step into an endpoint settles it
    let h = 1e-9 * (hi - lo);
    let (g_hi, g_lo) = (g(hi), g(lo));
    if g_hi <= g(hi - h) {
        return hi;
    }
    if g_lo <= g(lo + h) {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = a + C * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let tol = 1e-10 * (hi - lo) + 1e-12 * x.abs();
        if (x - m).abs() <= 2.0 * tol - 0.5 * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let q0 = (x - v) * (fx - fw);
            let mut p = (x - v) * q0 - (x - w) * r;
            let mut q = 2.0 * (q0 - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < 2.0 * tol || b - u < 2.0 * tol {
                    d = if m >= x { tol } else { -tol };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= m { a - x } else { b - x };
            d = C * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    let mut best = (x, fx);
    for (y, gy) in [(lo, g_lo), (hi, g_hi)] {
        if gy < best.1 {
            best = (y, gy);
        }
    }
    best.0
}

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

impl Problem {
    fn mode(shape: Shape) -> RateMode {
        if shape == Shape::Exact {
            RateMode::Exact
        } else {
            RateMode::Approx
        }
    }

    fn snr(&self, st: &State, l: usize, h: usize, j: usize) -> f64 {
        self.links[l].hops[h].gain.data[j] * st.p[l][h].data[j]
    }

    /// Stream SINR at flat index `j` under `shape`.
    fn stream_sinr(&self, st: &State, l: usize, j: usize, shape: Shape) -> f64 {
        let a = self.snr(st, l, 0, j);
        match shape {
            Shape::Single => a,
            _ => sinr(a, self.snr(st, l, 1, j), Self::mode(shape)),
        }
    }

    fn tuple_rate(&self, st: &State, l: usize, i: usize, k: usize, shape: Shape) -> f64 {
        let base = (i * self.n_k + k) * self.n_s;
        (0..self.n_s).map(|n| log2_1p(self.stream_sinr(st, l, base + n, shape))).sum()
    }

    fn tuple_power(&self, st: &State, l: usize, i: usize, k: usize) -> f64 {
        let base = (i * self.n_k + k) * self.n_s;
        let mut p = 0.0;
        for (h, hop) in self.links[l].hops.iter().enumerate() {
            let e = hop.eps[k];
            for n in 0..self.n_s {
                p += e * st.p[l][h].data[base + n];
            }
        }
        p
    }

    fn eval_shape(&self, l: usize, exact: bool) -> Shape {
        let s = self.links[l].shape;
        if exact && s == Shape::Approx {
            Shape::Exact
        } else {
            s
        }
    }

    /// Throughput (bit/s) and consumed power (W).
    pub fn totals(&self, st: &State, exact: bool) -> (f64, f64) {
        let mut rate = 0.0;
        let mut power = self.static_power;
        for l in [DL, UL] {
            let s = st.share[l];
            if s <= 0.0 {
                continue;
            }
            let shape = self.eval_shape(l, exact);
            for i in 0..self.n_f {
                let k = st.win[l][i];
                rate += s * self.tuple_rate(st, l, i, k, shape);
                power += s * self.tuple_power(st, l, i, k);
            }
        }
        (rate * self.bandwidth, power)
    }

    pub fn objective(&self, st: &State, eta: f64) -> f64 {
        let (u, p) = self.totals(st, false);
        u - eta * p
    }

    pub fn ue_rate(&self, st: &State, l: usize, k: usize, shape: Shape) -> f64 {
        let s = st.share[l];
        if s <= 0.0 {
            return 0.0;
        }
        let mut r = 0.0;
        for i in 0..self.n_f {
            if st.win[l][i] == k {
                r += s * self.tuple_rate(st, l, i, k, shape);
            }
        }
        r * self.bandwidth
    }

    fn count_won(&self, st: &State, l: usize, k: usize) -> usize {
        st.win[l].iter().filter(|&&w| w == k).count()
    }

    /// Round-robin winners, α = β = ½, half of every budget spread evenly.
    pub fn initial_state(&self) -> State {
        let (nf, nk, ns) = (self.n_f, self.n_k, self.n_s);
        let win: Vec<usize> = (0..nf).map(|i| i % nk.max(1)).collect();
        let share = [0.5, 0.5];
        let mut p = Vec::new();
        let mut lam = Vec::new();
        for (l, link) in self.links.iter().enumerate() {
            let mut per_hop = Vec::new();
            for hop in &link.hops {
                let mut t = Tensor3::zeros(nf, nk, ns);
                for k in 0..nk {
                    let slots = match hop.budget {
                        Budget::Total(_) => nf,
                        Budget::PerUe(_) => win.iter().filter(|&&w| w == k).count().max(1),
                    };
                    let v = 0.5 * hop.budget.for_ue(k) / (share[l] * (slots * ns.max(1)) as f64);
                    for i in 0..nf {
                        for n in 0..ns {
                            t.set(i, k, n, v);
                        }
                    }
                }
                per_hop.push(t);
            }
            lam.push(vec![vec![0.0; nk]; link.hops.len()]);
            p.push(per_hop);
        }
        State {
            p,
            win: [win.clone(), win],
            share,
            lam,
            w: [vec![0.0; nk], vec![0.0; nk]],
            w_sel: [vec![0.0; nk], vec![0.0; nk]],
        }
    }

    /// Closed-form power of one stream.
    #[allow(clippy::too_many_arguments)]
    fn stream_power(&self, l: usize, h: usize, j: usize, k: usize, partner: f64, w: f64, lam: f64, eta_n: f64, cap: f64) -> f64 {
        let hop = &self.links[l].hops[h];
        let g = hop.gain.data[j];
        let price = lam + eta_n * hop.eps[k];
        let x = match self.links[l].shape {
            Shape::Single => single_hop_power(g, w, price),
            Shape::Approx => relay_power_approx(g, partner, w, price),
            Shape::Exact => relay_power_exact(g, partner, w, price),
        };
        x.min(cap)
    }

    fn partner_snr(&self, st: &State, l: usize, h: usize) -> Vec<f64> {
        if self.links[l].hops.len() < 2 {
            return vec![0.0; self.n_f * self.n_k * self.n_s];
        }
        let o = 1 - h;
        let g = &self.links[l].hops[o].gain.data;
        g.iter().zip(&st.p[l][o].data).map(|(a, b)| a * b).collect()
    }

    /// Energy spent on the won tuples of UE `k` (or all UEs) at multiplier `lam`.
    #[allow(clippy::too_many_arguments)]
    fn spent(&self, st: &State, l: usize, h: usize, only: Option<usize>, partner: &[f64], w: &[f64], lam: f64, eta_n: f64, s_eff: f64) -> f64 {
        let hop = &self.links[l].hops[h];
        let mut e = 0.0;
        for i in 0..self.n_f {
            let k = st.win[l][i];
            if only.is_some_and(|o| o != k) {
                continue;
            }
            let cap = hop.budget.for_ue(k) / s_eff;
            let base = (i * self.n_k + k) * self.n_s;
            for n in 0..self.n_s {
                let j = base + n;
                e += self.stream_power(l, h, j, k, partner[j], w[k], lam, eta_n, cap);
            }
        }
        s_eff * e
    }

    /// Smallest multiplier (to bisection precision) meeting the budget.
    #[allow(clippy::too_many_arguments)]
    fn search_lambda(&self, st: &State, l: usize, h: usize, only: Option<usize>, partner: &[f64], w: &[f64], eta_n: f64, s_eff: f64, start: f64, opts: &SolverOptions) -> Result<f64> {
        let budget = match only {
            Some(k) => self.links[l].hops[h].budget.for_ue(k),
            None => self.links[l].hops[h].budget.for_ue(0),
        };
        let resid = |lam: f64| self.spent(st, l, h, only, partner, w, lam, eta_n, s_eff) - budget;
        if resid(0.0) <= 0.0 {
            return Ok(0.0);
        }
        let mut hi = if start > 0.0 { start } else { 1e-12 };
        let mut lo = 0.0;
        let mut doublings = 0;
        while resid(hi) > 0.0 {
            lo = hi;
            hi *= 4.0;
            doublings += 1;
            if doublings > opts.max_doublings || !hi.is_finite() {
                return Err(Error::Numerical(format!("budget multiplier bracket failed after {doublings} expansions")));
            }
        }
        if lo == 0.0 {
            lo = hi;
            loop {
                lo *= 0.25;
                if resid(lo) > 0.0 {
                    break;
                }
                hi = lo;
                if lo < 1e-300 {
                    return Ok(0.0);
                }
            }
        }
        // Illinois false position on log λ; the residual is monotone
        let tol = opts.budget_rel_tol * budget;
        let (mut rl, mut rh) = (resid(lo), resid(hi));
        if rh >= -tol {
            return Ok(hi);
        }
        let mut side = 0;
        for _ in 0..200 {
            if hi <= lo * (1.0 + opts.bisection_rel_tol) {
                break;
            }
            let (x0, x1) = (lo.ln(), hi.ln());
            let mut x = x1 - rh * (x1 - x0) / (rh - rl);
            if !(x > x0 && x < x1) {
                x = 0.5 * (x0 + x1);
            }
            let mid = x.exp();
            let r = resid(mid);
            if r > 0.0 {
                lo = mid;
                rl = r;
                if side < 0 {
                    rh *= 0.5;
                }
                side = -1;
            } else {
                hi = mid;
                rh = r;
                if r >= -tol {
                    break;
                }
                if side > 0 {
                    rl *= 0.5;
                }
                side = 1;
            }
        }
        Ok(hi)
    }

    /// Multipliers for every UE group of hop `h` at floor weights `w`.
    #[allow(clippy::too_many_arguments)]
    fn lambdas(&self, st: &State, l: usize, h: usize, partner: &[f64], w: &[f64], eta_n: f64, s_eff: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
        match &self.links[l].hops[h].budget {
            Budget::Total(_) => {
                let start = st.lam[l][h][0];
                let lam = self.search_lambda(st, l, h, None, partner, w, eta_n, s_eff, start, opts)?;
                Ok(vec![lam; self.n_k])
            }
            Budget::PerUe(_) => (0..self.n_k)
                .map(|k| self.search_lambda(st, l, h, Some(k), partner, w, eta_n, s_eff, st.lam[l][h][k], opts))
                .collect(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(&self, st: &mut State, l: usize, h: usize, partner: &[f64], w: &[f64], lam: &[f64], eta_n: f64, s_eff: f64) {
        let hop = &self.links[l].hops[h];
        for i in 0..self.n_f {
            for k in 0..self.n_k {
                let cap = hop.budget.for_ue(k) / s_eff;
                let base = (i * self.n_k + k) * self.n_s;
                for n in 0..self.n_s {
                    let j = base + n;
                    st.p[l][h].data[j] = self.stream_power(l, h, j, k, partner[j], w[k], lam[k], eta_n, cap);
                }
            }
        }
        st.lam[l][h] = lam.to_vec();
        st.w[l] = w.to_vec();
    }

    /// Rate of UE `k` (bit/s) if hop `h` used `w`, `lam` and the partner stayed.
    #[allow(clippy::too_many_arguments)]
    fn trial_rate(&self, st: &State, l: usize, h: usize, k: usize, partner: &[f64], w: &[f64], lam: &[f64], eta_n: f64, s_eff: f64) -> f64 {
        let s = st.share[l];
        let hop = &self.links[l].hops[h];
        let shape = self.links[l].shape;
        let cap = hop.budget.for_ue(k) / s_eff;
        let mut r = 0.0;
        for i in 0..self.n_f {
            if st.win[l][i] != k {
                continue;
            }
            let base = (i * self.n_k + k) * self.n_s;
            for n in 0..self.n_s {
                let j = base + n;
                let x = self.stream_power(l, h, j, k, partner[j], w[k], lam[k], eta_n, cap);
                let own = hop.gain.data[j] * x;
                let sn = match shape {
                    Shape::Single => own,
                    _ => sinr(own, partner[j], Self::mode(shape)),
                };
                r += log2_1p(sn);
            }
        }
        s * r * self.bandwidth
    }

    /// Closed-form update of hop `h` with bisection on its budget and floor
    /// multipliers.
    pub fn power_step(&self, st: &mut State, l: usize, h: usize, eta: f64, opts: &SolverOptions) -> Result<()> {
        let eta_n = eta / self.bandwidth;
        let s = st.share[l];
        // a zero share prices power as if the whole slot were used
        let s_eff = if s > 0.0 { s } else { 1.0 };
        let partner = self.partner_snr(st, l, h);
        let mut w = vec![0.0; self.n_k];
        let mut lam = self.lambdas(st, l, h, &partner, &w, eta_n, s_eff, opts)?;
        let floors = self.links[l].floors.clone();
        for k in 0..self.n_k {
            if floors[k] <= 0.0 || s <= 0.0 || self.count_won(st, l, k) == 0 {
                continue;
            }
            let rate_at = |wk: f64, w: &mut Vec<f64>| -> Result<(f64, Vec<f64>)> {
                w[k] = wk;
                let lam = self.lambdas(st, l, h, &partner, w, eta_n, s_eff, opts)?;
                Ok((self.trial_rate(st, l, h, k, &partner, w, &lam, eta_n, s_eff), lam))
            };
            if self.trial_rate(st, l, h, k, &partner, &w, &lam, eta_n, s_eff) >= floors[k] {
                continue;
            }
            let mut lo = 0.0;
            let mut hi = 1.0;
            let mut reached = None;
            while hi <= W_CAP {
                let (r, lm) = rate_at(hi, &mut w)?;
                if r >= floors[k] {
                    reached = Some(lm);
                    break;
                }
                lo = hi;
                hi *= 4.0;
            }
            match reached {
                None => {
                    // floor out of reach for this block; the time split enforces it
                    w[k] = W_CAP;
                    lam = self.lambdas(st, l, h, &partner, &w, eta_n, s_eff, opts)?;
                }
                Some(mut best) => {
                    for _ in 0..60 {
                        if hi - lo <= 1e-9 * hi {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        let (r, lm) = rate_at(mid, &mut w)?;
                        if r >= floors[k] {
                            hi = mid;
                            best = lm;
                        } else {
                            lo = mid;
                        }
                    }
                    w[k] = hi;
                    lam = best;
                }
            }
        }
        self.fill(st, l, h, &partner, &w, &lam, eta_n, s_eff);
        Ok(())
    }

    fn stream_metric(s: f64) -> f64 {
        log2_1p(s) - METRIC_SCALE * s / (1.0 + s)
    }

    /// Per-(i, k) selection metric without the floor weight.
    pub fn selection_metrics(&self, st: &State, l: usize) -> Vec<Vec<f64>> {
        let shape = self.links[l].shape;
        (0..self.n_f)
            .map(|i| {
                (0..self.n_k)
                    .map(|k| {
                        let base = (i * self.n_k + k) * self.n_s;
                        (0..self.n_s).map(|n| Self::stream_metric(self.stream_sinr(st, l, base + n, shape))).sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Winner-takes-all subcarrier assignment; floor weights are raised to
    /// the smallest value that hands a floored UE enough subcarriers.
    pub fn select_step(&self, st: &mut State, l: usize) {
        let m = self.selection_metrics(st, l);
        let mut wt = vec![0.0; self.n_k];
        let assign = |wt: &[f64]| -> Vec<usize> {
            m.iter().map(|row| argmax_lowest(row.iter().zip(wt).map(|(v, w)| (1.0 + w) * v))).collect()
        };
        st.win[l] = assign(&wt);
        let s = st.share[l];
        let floors = &self.links[l].floors;
        for k in 0..self.n_k {
            if floors[k] <= 0.0 || s <= 0.0 {
                continue;
            }
            let shape = self.links[l].shape;
            let rate_of = |i: usize| s * self.tuple_rate(st, l, i, k, shape) * self.bandwidth;
            let mut have: f64 = (0..self.n_f).filter(|&i| st.win[l][i] == k).map(rate_of).sum();
            if have >= floors[k] {
                continue;
            }
            let mut cands: Vec<(f64, usize)> = (0..self.n_f)
                .filter(|&i| st.win[l][i] != k && m[i][k] > 0.0)
                .map(|i| {
                    let other = (0..self.n_k)
                        .filter(|&j| j != k)
                        .map(|j| (1.0 + wt[j]) * m[i][j])
                        .fold(0.0, f64::max);
                    ((other / m[i][k] - 1.0).max(0.0), i)
                })
                .collect();
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut need = 0.0;
            for (t, i) in cands {
                need = t;
                have += rate_of(i);
                if have >= floors[k] {
                    break;
                }
            }
            wt[k] = need * (1.0 + 1e-9) + 1e-12;
            st.win[l] = assign(&wt);
        }
        st.w_sel[l] = wt;
    }

    /// LP coefficients for the current powers and winners.
    pub fn time_split_lp(&self, st: &State, eta: f64, with_floors: bool) -> TimeSplitLp {
        let eta_n = eta / self.bandwidth;
        let mut c = [0.0; 2];
        let mut lo = [0.0f64; 2];
        let mut hi = [1.0f64; 2];
        for l in [DL, UL] {
            let shape = self.links[l].shape;
            for i in 0..self.n_f {
                let k = st.win[l][i];
                c[l] += self.tuple_rate(st, l, i, k, shape) - eta_n * self.tuple_power(st, l, i, k);
            }
            for (h, hop) in self.links[l].hops.iter().enumerate() {
                let groups: Vec<Option<usize>> = match hop.budget {
                    Budget::Total(_) => vec![None],
                    Budget::PerUe(_) => (0..self.n_k).map(Some).collect(),
                };
                for g in groups {
                    let mut e = 0.0;
                    for i in 0..self.n_f {
                        let k = st.win[l][i];
                        if g.is_some_and(|o| o != k) {
                            continue;
                        }
                        let base = (i * self.n_k + k) * self.n_s;
                        e += st.p[l][h].data[base..base + self.n_s].iter().sum::<f64>();
                    }
                    if e > 0.0 {
                        hi[l] = hi[l].min(hop.budget.for_ue(g.unwrap_or(0)) / e);
                    }
                }
            }
            if with_floors {
                for k in 0..self.n_k {
                    let f = self.links[l].floors[k];
                    if f <= 0.0 {
                        continue;
                    }
                    let mut r = 0.0;
                    for i in 0..self.n_f {
                        if st.win[l][i] == k {
                            r += self.tuple_rate(st, l, i, k, shape);
                        }
                    }
                    r *= self.bandwidth;
                    lo[l] = lo[l].max(if r > 0.0 { f / r } else { f64::INFINITY });
                }
            }
        }
        TimeSplitLp { c_alpha: c[DL], c_beta: c[UL], alpha_lo: lo[DL], alpha_hi: hi[DL], beta_lo: lo[UL], beta_hi: hi[UL] }
    }

    /// Per-time powers of link `l` at share `s`: hops whose budget binds keep
    /// their energy, the others keep their power.
    fn rescaled_powers(&self, st: &State, l: usize, s: f64) -> Vec<Tensor3> {
        let cur = st.share[l];
        let mut out = st.p[l].clone();
        if cur <= 0.0 || s <= 0.0 {
            return out;
        }
        for (h, t) in out.iter_mut().enumerate() {
            for i in 0..self.n_f {
                let k = st.win[l][i];
                if st.lam[l][h][k] <= 0.0 {
                    continue;
                }
                let base = (i * self.n_k + k) * self.n_s;
                for v in &mut t.data[base..base + self.n_s] {
                    *v *= cur / s;
                }
            }
        }
        out
    }

    /// Per-(subcarrier, stream) terms of link `l` for evaluating shares
    /// without touching the full tensors.
    fn rescaled_terms(&self, st: &State, l: usize) -> Vec<Term> {
        let link = &self.links[l];
        let mut out = Vec::with_capacity(self.n_f * self.n_s);
        for i in 0..self.n_f {
            let k = st.win[l][i];
            let base = (i * self.n_k + k) * self.n_s;
            for n in 0..self.n_s {
                let j = base + n;
                let mut t = Term { k, a: [0.0; 2], scaled: [false; 2], cost_scaled: 0.0, cost_fixed: 0.0 };
                for (h, hop) in link.hops.iter().enumerate() {
                    let p = st.p[l][h].data[j];
                    t.scaled[h] = st.lam[l][h][k] > 0.0;
                    t.a[h] = hop.gain.data[j] * p;
                    if t.scaled[h] {
                        t.cost_scaled += hop.eps[k] * p;
                    } else {
                        t.cost_fixed += hop.eps[k] * p;
                    }
                }
                if t.a.iter().any(|&x| x > 0.0) || t.cost_fixed > 0.0 || t.cost_scaled > 0.0 {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Link value in bit/s/Hz net of the power price, and per-UE rates
    /// (bit/s), at share `s` with rescaled powers.
    fn rescaled_value(&self, terms: &[Term], l: usize, cur: f64, s: f64, eta_n: f64, rates: Option<&mut Vec<f64>>) -> f64 {
        if s <= 0.0 {
            if let Some(r) = rates {
                r.iter_mut().for_each(|x| *x = 0.0);
            }
            return 0.0;
        }
        let link = &self.links[l];
        let mode = Self::mode(link.shape);
        let ratio = if cur > 0.0 { cur / s } else { 1.0 };
        let scale = |on: bool| if on { ratio } else { 1.0 };
        let mut r_sum = 0.0;
        let mut cost = 0.0;
        let mut per_ue = rates;
        if let Some(r) = per_ue.as_deref_mut() {
            r.clear();
            r.resize(self.n_k, 0.0);
        }
        for t in terms {
            let a = t.a[0] * scale(t.scaled[0]);
            let sn = match link.shape {
                Shape::Single => a,
                _ => sinr(a, t.a[1] * scale(t.scaled[1]), mode),
            };
            let r = log2_1p(sn);
            r_sum += r;
            cost += t.cost_scaled * ratio + t.cost_fixed;
            if let Some(v) = per_ue.as_deref_mut() {
                v[t.k] += s * r * self.bandwidth;
            }
        }
        s * (r_sum - eta_n * cost)
    }

    /// Admissible share interval of link `l` under rescaling, or `None` when
    /// a floor cannot be met.
    fn rescaled_range(&self, st: &State, terms: &[Term], l: usize, eta_n: f64) -> Option<(f64, f64)> {
        let mut hi: f64 = 1.0;
        for (h, hop) in self.links[l].hops.iter().enumerate() {
            let groups: Vec<Option<usize>> = match hop.budget {
                Budget::Total(_) => vec![None],
                Budget::PerUe(_) => (0..self.n_k).map(Some).collect(),
            };
            for g in groups {
                let kb = g.unwrap_or(0);
                if st.lam[l][h][kb] > 0.0 {
                    continue;
                }
                let mut e = 0.0;
                for i in 0..self.n_f {
                    let k = st.win[l][i];
                    if g.is_some_and(|o| o != k) {
                        continue;
                    }
                    let base = (i * self.n_k + k) * self.n_s;
                    e += st.p[l][h].data[base..base + self.n_s].iter().sum::<f64>();
                }
                if e > 0.0 {
                    hi = hi.min(hop.budget.for_ue(kb) / e);
                }
            }
        }
        let floors = &self.links[l].floors;
        if floors.iter().all(|&f| f <= 0.0) {
            return Some((0.0, hi));
        }
        let mut r = Vec::with_capacity(self.n_k);
        // worst relative floor margin; increasing in the share
        let mut margin = |s: f64| {
            self.rescaled_value(terms, l, st.share[l], s, eta_n, Some(&mut r));
            r.iter().zip(floors).filter(|(_, f)| **f > 0.0).map(|(r, f)| r / f - 1.0).fold(f64::INFINITY, f64::min)
        };
        let g_hi = margin(hi);
        if g_hi < 0.0 {
            return None;
        }
        // Illinois false position on the bracket [a, b], g(a) < 0 <= g(b)
        let (mut a, mut b, mut ga, mut gb) = (0.0, hi, -1.0, g_hi);
        let mut side = 0i8;
        for _ in 0..200 {
            if b - a <= 1e-14 * hi {
                break;
            }
            let mut m = (a * gb - b * ga) / (gb - ga);
            if !(m > a && m < b) {
                m = 0.5 * (a + b);
            }
            let gm = margin(m);
            if gm >= 0.0 {
                (b, gb) = (m, gm);
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            } else {
                (a, ga) = (m, gm);
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            }
        }
        Some((b, hi))
    }

    /// Concave maximization of the two link values over `α + β ≤ 1`.
    fn rescaled_split(&self, st: &State, eta: f64) -> Option<(f64, f64)> {
        let eta_n = eta / self.bandwidth;
        let (td, tu) = (self.rescaled_terms(st, DL), self.rescaled_terms(st, UL));
        let (alo, ahi) = self.rescaled_range(st, &td, DL, eta_n)?;
        let (blo, bhi) = self.rescaled_range(st, &tu, UL, eta_n)?;
        if alo + blo > 1.0 {
            return None;
        }
        let jd = |a: f64| self.rescaled_value(&td, DL, st.share[DL], a, eta_n, None);
        let ju = |b: f64| self.rescaled_value(&tu, UL, st.share[UL], b, eta_n, None);
        let a = golden(jd, alo, ahi);
        let b = golden(ju, blo, bhi);
        if a + b <= 1.0 {
            return Some((a, b));
        }
        let lo = alo.max(1.0 - bhi);
        let hi = ahi.min(1.0 - blo);
        if lo > hi {
            return None;
        }
        let a = golden(|a| jd(a) + ju(1.0 - a), lo, hi);
        Some((a, (1.0 - a).max(blo)))
    }

    /// LP over the time split with per-time powers fixed; a second candidate
    /// keeps the energy of budget-limited hops instead, so a binding budget
    /// does not freeze the split. The better of the two is kept.
    pub fn split_step(&self, st: &mut State, eta: f64) {
        let (a, b) = match solve_time_split(&self.time_split_lp(st, eta, true)) {
            Ok(v) => v,
            // floors unreachable with these powers: keep budgets, drop floors
            Err(_) => solve_time_split(&self.time_split_lp(st, eta, false)).expect("budget-only split is feasible"),
        };
        let mut lp = st.clone();
        lp.share = [a, b];
        let Some((ra, rb)) = self.rescaled_split(st, eta) else {
            *st = lp;
            return;
        };
        let mut alt = st.clone();
        alt.p[DL] = self.rescaled_powers(st, DL, ra);
        alt.p[UL] = self.rescaled_powers(st, UL, rb);
        alt.share = [ra, rb];
        *st = if self.rank(&alt, eta) > self.rank(&lp, eta) { alt } else { lp };
    }

    fn floors_met(&self, st: &State) -> bool {
        [DL, UL].iter().all(|&l| {
            (0..self.n_k).all(|k| {
                let f = self.links[l].floors[k];
                f <= 0.0 || self.ue_rate(st, l, k, self.links[l].shape) >= f * (1.0 - 1e-12)
            })
        })
    }

    /// Floors first, then the objective.
    fn rank(&self, st: &State, eta: f64) -> (bool, f64) {
        (self.floors_met(st), self.objective(st, eta))
    }

    fn delta(prev: &State, cur: &State) -> f64 {
        let mut d: f64 = 0.0;
        for (pl, cl) in prev.p.iter().zip(&cur.p) {
            for (ph, ch) in pl.iter().zip(cl) {
                for (x, y) in ph.data.iter().zip(&ch.data) {
                    d = d.max((x - y).abs());
                }
            }
        }
        for l in [DL, UL] {
            if prev.win[l] != cur.win[l] {
                d = d.max(prev.share[l].max(cur.share[l]));
            }
            d = d.max((prev.share[l] - cur.share[l]).abs());
        }
        d
    }

    /// One full alternating sweep in the fixed order: DL hop powers, DL
    /// subcarriers, UL hop powers, UL subcarriers, time split. A link whose
    /// winners changed gets its powers refit, so the split never sees a
    /// UE holding powers sized for a different subcarrier set.
    pub fn sweep(&self, st: &mut State, eta: f64, opts: &SolverOptions) -> Result<()> {
        for l in [DL, UL] {
            // block updates are exact only up to the search tolerances; the
            // exact model promises ascent, so it keeps the better point
            let exact = self.links[l].shape == Shape::Exact;
            for h in 0..self.links[l].hops.len() {
                let before = exact.then(|| st.clone());
                self.power_step(st, l, h, eta, opts)?;
                self.keep_better(st, before, eta);
            }
            let before = st.clone();
            self.select_step(st, l);
            if st.win[l] != before.win[l] {
                for h in 0..self.links[l].hops.len() {
                    self.power_step(st, l, h, eta, opts)?;
                }
                // ascent only where the metric can cycle (per-UE budgets) and
                // where the exact model promises a local optimum
                let per_ue = self.links[l].hops.iter().any(|h| matches!(h.budget, Budget::PerUe(_)));
                if per_ue || exact {
                    self.keep_better(st, Some(before), eta);
                }
            }
        }
        let before = self.links.iter().all(|l| l.shape == Shape::Exact).then(|| st.clone());
        self.split_step(st, eta);
        self.keep_better(st, before, eta);
        Ok(())
    }

    fn keep_better(&self, st: &mut State, before: Option<State>, eta: f64) {
        if let Some(b) = before {
            if self.rank(st, eta) < self.rank(&b, eta) {
                *st = b;
            }
        }
    }

    pub fn inner(&self, eta: f64, opts: &SolverOptions, init: Option<State>) -> Result<InnerResult> {
        let mut st = init.unwrap_or_else(|| self.initial_state());
        let mut objectives = Vec::new();
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < opts.max_inner {
            let prev = st.clone();
            self.sweep(&mut st, eta, opts)?;
            sweeps += 1;
            objectives.push(self.objective(&st, eta));
            if Self::delta(&prev, &st) <= opts.inner_tolerance {
                converged = true;
                break;
            }
        }
        Ok(InnerResult { state: st, sweeps, converged, objectives })
    }

    pub fn ratio(&self, st: &State, exact: bool) -> f64 {
        let (u, p) = self.totals(st, exact);
        u / p
    }

    /// Dinkelbach iterations starting from η = 0.
    pub fn dinkelbach(&self, opts: &SolverOptions) -> Result<OuterResult> {
        let mut eta = 0.0;
        let mut trajectory = vec![eta];
        let mut trace = Vec::new();
        let mut total_sweeps = 0;
        let mut last = None;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut outer = 0;
        while outer < opts.max_outer {
            let res = self.inner(eta, opts, None)?;
            outer += 1;
            total_sweeps += res.sweeps;
            // keep the previous point when the fresh solve falls short of it,
            // polished by a warm solve so the kept point is a fixed point too
            let state = match last.take() {
                Some(prev) if self.objective(&prev, eta) > self.objective(&res.state, eta) => {
                    let warm = self.inner(eta, opts, Some(prev.clone()))?;
                    total_sweeps += warm.sweeps;
                    if self.objective(&warm.state, eta) > self.objective(&prev, eta) {
                        warm.state
                    } else {
                        prev
                    }
                }
                _ => res.state,
            };
            let (u, p) = self.totals(&state, false);
            residual = u - eta * p;
            trace.push((total_sweeps, u / p, self.ratio(&state, true)));
            last = Some(state);
            if residual.abs() < opts.eta_tolerance {
                converged = true;
                break;
            }
            eta = u / p;
            trajectory.push(eta);
        }
        let state = last.expect("at least one outer iteration");
        let final_ratio = self.ratio(&state, false);
        if final_ratio > eta {
            trajectory.push(final_ratio);
        }
        Ok(OuterResult { state, trajectory, trace, outer_iterations: outer, converged, residual })
    }

    /// Energies and time shares in the common policy layout.
    pub fn policy(&self, st: &State) -> AllocationPolicy {
        let mut pol = AllocationPolicy::zeros(self.n_f, self.n_k, self.n_s);
        pol.alpha = st.share[DL];
        pol.beta = st.share[UL];
        for l in [DL, UL] {
            let s = st.share[l];
            for i in 0..self.n_f {
                let k = st.win[l][i];
                if l == DL {
                    pol.s_dl[i][k] = s;
                } else {
                    pol.s_ul[i][k] = s;
                }
                for (h, hop) in self.links[l].hops.iter().enumerate() {
                    let dst = match hop.role {
                        Role::Bs => &mut pol.e_bs,
                        Role::SudasDl => &mut pol.e_sue,
                        Role::Ue => &mut pol.e_ues,
                        Role::SudasUl => &mut pol.e_sb,
                    };
                    for n in 0..self.n_s {
                        let j = dst.idx(i, k, n);
                        dst.data[j] = s * st.p[l][h].data[j];
                    }
                }
            }
        }
        pol
    }

    pub fn feasibility(&self, st: &State) -> Feasibility {
        let pol = self.policy(st);
        let mut c = [f64::NEG_INFINITY; 4];
        let mut c3 = vec![f64::NEG_INFINITY; self.n_k];
        for link in &self.links {
            for hop in &link.hops {
                match (hop.role, &hop.budget) {
                    (Role::Bs, b) => c[0] = pol.e_bs.sum() - b.for_ue(0),
                    (Role::SudasDl, b) => c[1] = pol.e_sue.sum() - b.for_ue(0),
                    (Role::SudasUl, b) => c[3] = pol.e_sb.sum() - b.for_ue(0),
                    (Role::Ue, b) => {
                        for (k, r) in c3.iter_mut().enumerate() {
                            *r = pol.e_ues.sum_ue(k) - b.for_ue(k);
                        }
                    }
                }
            }
        }
        let floor_resid = |l: usize| -> Vec<f64> {
            let shape = self.links[l].shape;
            (0..self.n_k)
                .map(|k| {
                    let f = self.links[l].floors[k];
                    if f > 0.0 {
                        f - self.ue_rate(st, l, k, shape)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let box_violation = |s: &Vec<Vec<f64>>, cap: f64| {
            s.iter().flatten().fold(f64::NEG_INFINITY, |w, &x| w.max(x - cap).max(-x))
        };
        Feasibility {
            c1: c[0],
            c2: c[1],
            c3,
            c4: c[3],
            c5: floor_resid(DL),
            c6: floor_resid(UL),
            c7: pol.s_dl.iter().map(|r| r.iter().sum::<f64>() - pol.alpha).collect(),
            c8: pol.s_ul.iter().map(|r| r.iter().sum::<f64>() - pol.beta).collect(),
            c9: box_violation(&pol.s_dl, pol.alpha),
            c10: box_violation(&pol.s_ul, pol.beta),
            c11: pol.alpha + pol.beta - 1.0,
            c12: (-pol.alpha).max(-pol.beta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dl_only_objective_takes_whole_slot() {
        let (a, b) = solve_time_split(&TimeSplitLp::unconstrained(3.0, 0.0)).unwrap();
        assert_eq!((a, b), (1.0, 0.0));
    }

    #[test]
    fn symmetric_coefficients_split_evenly() {
        let (a, b) = solve_time_split(&TimeSplitLp::unconstrained(2.0, 2.0)).unwrap();
        assert_eq!((a, b), (0.5, 0.5));
    }

    #[test]
    fn empty_polytope_is_infeasible() {
        let lp = TimeSplitLp { c_alpha: 1.0, c_beta: 1.0, alpha_lo: 0.7, alpha_hi: 1.0, beta_lo: 0.6, beta_hi: 1.0 };
        assert!(matches!(solve_time_split(&lp), Err(Error::Infeasible(_))));
    }

    #[test]
    fn negative_coefficients_shut_the_link() {
        let (a, b) = solve_time_split(&TimeSplitLp::unconstrained(-1.0, 2.0)).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_lowest([1.0, 3.0, 3.0].into_iter()), 1);
        assert_eq!(argmax_lowest([0.0, 0.0].into_iter()), 0);
    }
}
