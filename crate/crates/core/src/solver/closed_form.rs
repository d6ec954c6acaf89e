//! Per-stream power updates.
//!
//! Each update maximizes `(1+w)·log₂(1+SINR(x)) − price·x` over `x ≥ 0`
//! with the partner hop fixed, where `price = multiplier + η·ε`. The
//! square-root differences are evaluated in cancellation-free form.

use std::f64::consts::LN_2;

/// Maximizer for the high-SNR SINR `ab/(a+b)`, `a = g·x`, `b` the partner
/// SNR. Returns `+∞` for a zero price with a usable channel.
pub fn relay_power_approx(g: f64, b: f64, w: f64, price: f64) -> f64 {
    if g <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    if price <= 0.0 {
        return f64::INFINITY;
    }
    let c = 4.0 * (1.0 + w) * g * (1.0 + b) / (LN_2 * price);
    let omega = (b * b + c).sqrt();
    // Ω − b − 2 without cancellation
    let x = b * (c / (omega + b) - 2.0) / (2.0 * g * (1.0 + b));
    x.max(0.0)
}

/// Maximizer for the exact SINR `ab/(1+a+b)`.
pub fn relay_power_exact(g: f64, b: f64, w: f64, price: f64) -> f64 {
    if g <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    if price <= 0.0 {
        return f64::INFINITY;
    }
    let t = 4.0 * g * (1.0 + w) / (b * LN_2 * price);
    let inner = 2.0 * g * (1.0 + w) / (LN_2 * price * ((1.0 + t).sqrt() + 1.0));
    ((inner - 1.0) / g).max(0.0)
}

/// Classic water-filling for a single hop with SNR `g·x`.
pub fn single_hop_power(g: f64, w: f64, price: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    if price <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 + w) / (LN_2 * price) - 1.0 / g).max(0.0)
}

/// BS power of one DL stream for a fixed SUDAS power `p_sue`.
pub fn dl_power_bs(g1: f64, g2: f64, p_sue: f64, w_dl: f64, lambda: f64, eta: f64, eps_b: f64) -> f64 {
    relay_power_approx(g1, g2 * p_sue, w_dl, lambda + eta * eps_b)
}

/// SUDAS power of one DL stream for a fixed BS power `p_bs`.
pub fn dl_power_sudas(g1: f64, g2: f64, p_bs: f64, w_dl: f64, delta: f64, eta: f64, eps_s: f64) -> f64 {
    relay_power_approx(g2, g1 * p_bs, w_dl, delta + eta * eps_s)
}

/// UE power of one UL stream for a fixed SUDAS power `p_sb`.
pub fn ul_power_ue(g_sb: f64, g_ues: f64, p_sb: f64, w_ul: f64, psi: f64, eta: f64, eps_k: f64) -> f64 {
    relay_power_approx(g_ues, g_sb * p_sb, w_ul, psi + eta * eps_k)
}

/// SUDAS power of one UL stream for a fixed UE power `p_ues`.
pub fn ul_power_sudas(g_sb: f64, g_ues: f64, p_ues: f64, w_ul: f64, phi: f64, eta: f64, eps_s: f64) -> f64 {
    relay_power_approx(g_sb, g_ues * p_ues, w_ul, phi + eta * eps_s)
}

pub fn suboptimal_dl_power_bs(g1: f64, g2: f64, p_sue: f64, w_dl: f64, lambda: f64, eta: f64, eps_b: f64) -> f64 {
    relay_power_exact(g1, g2 * p_sue, w_dl, lambda + eta * eps_b)
}

pub fn suboptimal_dl_power_sudas(g1: f64, g2: f64, p_bs: f64, w_dl: f64, delta: f64, eta: f64, eps_s: f64) -> f64 {
    relay_power_exact(g2, g1 * p_bs, w_dl, delta + eta * eps_s)
}

pub fn suboptimal_ul_power_ue(g_sb: f64, g_ues: f64, p_sb: f64, w_ul: f64, psi: f64, eta: f64, eps_k: f64) -> f64 {
    relay_power_exact(g_ues, g_sb * p_sb, w_ul, psi + eta * eps_k)
}

pub fn suboptimal_ul_power_sudas(g_sb: f64, g_ues: f64, p_ues: f64, w_ul: f64, phi: f64, eta: f64, eps_s: f64) -> f64 {
    relay_power_exact(g_sb, g_ues * p_ues, w_ul, phi + eta * eps_s)
}
