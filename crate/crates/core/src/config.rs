//! Scenario constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Knobs of the statistical channel generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Small-scale fading on; off gives deterministic path-gain amplitudes.
    pub fading: bool,
    pub bs_distance_m: f64,
    /// Loss at 1 m for the licensed band, wall penetration included.
    pub bs_ref_loss_db: f64,
    pub bs_exponent: f64,
    pub sue_distance_m: f64,
    /// Loss at 1 m for the unlicensed band, antenna gains subtracted.
    pub sue_ref_loss_db: f64,
    pub sue_exponent: f64,
    pub rician_k_db: f64,
    /// Noise power per subcarrier in the licensed band.
    pub licensed_noise_dbm: f64,
    /// Noise power per subcarrier-wide slice of an unlicensed sub-band.
    pub unlicensed_noise_dbm: f64,
    /// AR(1) correlation of consecutive subcarriers, 0 for i.i.d.
    pub freq_correlation: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            fading: true,
            bs_distance_m: 100.0,
            bs_ref_loss_db: 50.5,
            bs_exponent: 3.5,
            sue_distance_m: 4.0,
            sue_ref_loss_db: 48.0,
            sue_exponent: 2.0,
            rician_k_db: 6.0,
            licensed_noise_dbm: -125.0,
            unlicensed_noise_dbm: -122.0,
            freq_correlation: 0.0,
        }
    }
}

impl ChannelParams {
    /// Mean CNR per Watt of one BS→SUDAS (or BS→UE) entry.
    pub fn bs_mean_gain(&self) -> f64 {
        let loss = self.bs_ref_loss_db + 10.0 * self.bs_exponent * self.bs_distance_m.log10();
        10f64.powf(-loss / 10.0) / dbm_to_watt(self.licensed_noise_dbm)
    }

    /// Mean CNR per Watt of one SUDAC→UE diagonal entry.
    pub fn sue_mean_gain(&self) -> f64 {
        let loss = self.sue_ref_loss_db + 10.0 * self.sue_exponent * self.sue_distance_m.log10();
        10f64.powf(-loss / 10.0) / dbm_to_watt(self.unlicensed_noise_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_sudacs: usize,
    pub n_ues: usize,
    pub n_subcarriers: usize,
    /// Upper bound on spatial streams; 0 means min(N, M).
    pub n_streams_cap: usize,
    /// C1 budget P_T.
    pub p_bs_max: f64,
    /// Per-SUDAC DL allowance; the C2 budget is M times this.
    pub p_sudac_max: f64,
    /// C3 budgets, one per UE.
    pub p_ue_max: Vec<f64>,
    /// C4 budget.
    pub p_sudas_ul_max: f64,
    /// DL rate floors in bit/s; 0 marks a UE without a floor.
    pub r_min_dl: Vec<f64>,
    pub r_min_ul: Vec<f64>,
    pub p_circuit_bs: f64,
    pub p_antenna_bs: f64,
    pub p_circuit_sudac: f64,
    pub p_circuit_ue: f64,
    pub eps_bs: f64,
    pub eps_sudac: f64,
    pub eps_ue: Vec<f64>,
    pub bandwidth_hz: f64,
    pub channel: ChannelParams,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::with_ues(4)
    }
}

impl SystemConfig {
    /// Full-scale scenario with `k` UEs, the first of them delay sensitive.
    pub fn with_ues(k: usize) -> Self {
        let mut r_min = vec![0.0; k];
        if k > 0 {
            r_min[0] = 20e6;
        }
        Self {
            n_antennas: 8,
            n_sudacs: 8,
            n_ues: k,
            n_subcarriers: 1200,
            n_streams_cap: 0,
            p_bs_max: dbm_to_watt(37.0),
            p_sudac_max: dbm_to_watt(23.0) / 8.0,
            p_ue_max: vec![dbm_to_watt(23.0); k],
            p_sudas_ul_max: dbm_to_watt(23.0),
            r_min_dl: r_min.clone(),
            r_min_ul: r_min,
            p_circuit_bs: 15.0,
            p_antenna_bs: 0.975,
            p_circuit_sudac: 0.1,
            p_circuit_ue: 1.0,
            eps_bs: 4.0,
            eps_sudac: 4.0,
            eps_ue: vec![4.0; k],
            bandwidth_hz: 15e3,
            channel: ChannelParams::default(),
        }
    }

    /// Shrinks the subcarrier count to `n_f`, scaling rate floors by the
    /// bandwidth ratio.
    pub fn shrink_subcarriers(&mut self, n_f: usize) {
        let ratio = n_f as f64 / self.n_subcarriers as f64;
        for r in self.r_min_dl.iter_mut().chain(self.r_min_ul.iter_mut()) {
            *r *= ratio;
        }
        self.n_subcarriers = n_f;
    }

    pub fn desk_scale(mut self) -> Self {
        self.shrink_subcarriers(64);
        self
    }

    pub fn stream_cap(&self) -> usize {
        let hard = self.n_antennas.min(self.n_sudacs);
        if self.n_streams_cap == 0 {
            hard
        } else {
            self.n_streams_cap.min(hard)
        }
    }

    /// C2 budget M·P_max.
    pub fn p_sudac_dl_total(&self) -> f64 {
        self.n_sudacs as f64 * self.p_sudac_max
    }

    pub fn static_power(&self) -> f64 {
        self.p_circuit_bs
            + self.n_antennas as f64 * self.p_antenna_bs
            + self.n_sudacs as f64 * self.p_circuit_sudac
            + self.n_ues as f64 * self.p_circuit_ue
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.n_antennas == 0 || self.n_sudacs == 0 || self.n_ues == 0 || self.n_subcarriers == 0 {
            return bad("n_antennas, n_sudacs, n_ues and n_subcarriers must be positive");
        }
        if self.n_antennas > 16 || self.n_sudacs > 16 {
            return bad("n_antennas and n_sudacs are limited to 16");
        }
        let k = self.n_ues;
        for (name, len) in [
            ("p_ue_max", self.p_ue_max.len()),
            ("r_min_dl", self.r_min_dl.len()),
            ("r_min_ul", self.r_min_ul.len()),
            ("eps_ue", self.eps_ue.len()),
        ] {
            if len != k {
                return Err(Error::Config(format!("{name} has {len} entries, expected n_ues = {k}")));
            }
        }
        let positive = [
            ("p_bs_max", self.p_bs_max),
            ("p_sudac_max", self.p_sudac_max),
            ("p_sudas_ul_max", self.p_sudas_ul_max),
            ("p_circuit_bs", self.p_circuit_bs),
            ("p_antenna_bs", self.p_antenna_bs),
            ("p_circuit_sudac", self.p_circuit_sudac),
            ("p_circuit_ue", self.p_circuit_ue),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if self.p_ue_max.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("p_ue_max entries must be positive");
        }
        if self.r_min_dl.iter().chain(&self.r_min_ul).any(|&r| !(r >= 0.0 && r.is_finite())) {
            return bad("rate floors must be nonnegative");
        }
        if self.eps_bs < 1.0 || self.eps_sudac < 1.0 || self.eps_ue.iter().any(|&e| e < 1.0) {
            return bad("amplifier factors must be at least 1");
        }
        let c = &self.channel;
        if !(0.0..1.0).contains(&c.freq_correlation) {
            return bad("channel.freq_correlation must lie in [0, 1)");
        }
        if !(c.bs_distance_m > 0.0 && c.sue_distance_m > 0.0) {
            return bad("channel distances must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_power_matches_reference_constants() {
        let cfg = SystemConfig::default();
        assert!((cfg.static_power() - 27.6).abs() < 1e-12);
    }

    #[test]
    fn desk_scale_keeps_floor_per_hz() {
        let full = SystemConfig::default();
        let desk = full.clone().desk_scale();
        assert_eq!(desk.n_subcarriers, 64);
        let per_hz_full = full.r_min_dl[0] / full.n_subcarriers as f64;
        let per_hz_desk = desk.r_min_dl[0] / desk.n_subcarriers as f64;
        assert!((per_hz_full - per_hz_desk).abs() < 1e-9);
    }

    #[test]
    fn validation_catches_length_mismatch() {
        let mut cfg = SystemConfig::default();
        cfg.p_ue_max.pop();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(SystemConfig::default().validate().is_ok());
    }

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((watt_to_dbm(dbm_to_watt(23.0)) - 23.0).abs() < 1e-12);
    }
}
