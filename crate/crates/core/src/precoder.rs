//! Jointly diagonalizing precoder/forwarding matrices and MMSE processing.
//!
//! The scalar variables are per-stream transmit powers. A SUDAC forwarding
//! stream `n` with gain λ² transmits λ²·(γ_in·P_in + 1), so the forwarding
//! entries are `√(P_fwd / (γ_in·P_in + 1))` for a target transmit power
//! `P_fwd`. With that choice the matrix rate equals the scalar SINR form.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerics::{inverse_hpd, solve_hpd, svd, ComplexMatrix, Svd};

/// Scalar per-stream powers of one (subcarrier, UE) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamPowers {
    pub p_bs: Vec<f64>,
    pub p_sue: Vec<f64>,
    pub p_ues: Vec<f64>,
    pub p_sb: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// N×N_S
    pub p_dl: ComplexMatrix,
    /// M×M
    pub f_dl: ComplexMatrix,
    /// M×N_S
    pub p_ul: ComplexMatrix,
    /// M×M
    pub f_ul: ComplexMatrix,
    pub lambda_b_dl: Vec<f64>,
    pub lambda_f_dl: Vec<f64>,
    pub lambda_ue_ul: Vec<f64>,
    pub lambda_f_ul: Vec<f64>,
}

/// SVD factors of the two hops on one (subcarrier, UE) pair.
#[derive(Debug, Clone)]
pub struct HopFactors {
    pub bs: Svd,
    pub sue: Svd,
}

impl HopFactors {
    pub fn new(ch: &ChannelRealization, i: usize, k: usize) -> Result<Self> {
        Ok(Self { bs: svd(&ch.h_bs[i])?, sue: svd(&ch.h_sue_matrix(i, k))? })
    }

    pub fn gamma_bs(&self, n: usize) -> f64 {
        self.bs.sigma[n] * self.bs.sigma[n]
    }

    pub fn gamma_sue(&self, n: usize) -> f64 {
        self.sue.sigma[n] * self.sue.sigma[n]
    }
}

fn sqrt_all(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidInput("stream powers must be nonnegative".into()));
    }
    Ok(v.iter().map(|x| x.sqrt()).collect())
}

pub fn build(f: &HopFactors, pw: &StreamPowers) -> Result<PrecoderSet> {
    let n_s = pw.p_bs.len();
    if [pw.p_sue.len(), pw.p_ues.len(), pw.p_sb.len()].iter().any(|&l| l != n_s) {
        return Err(Error::InvalidInput("stream power vectors differ in length".into()));
    }
    if n_s > f.bs.rank() || n_s > f.sue.rank() {
        return Err(Error::Config(format!(
            "{n_s} streams exceed channel ranks ({}, {})",
            f.bs.rank(),
            f.sue.rank()
        )));
    }
    let lambda_b_dl = sqrt_all(&pw.p_bs)?;
    let lambda_ue_ul = sqrt_all(&pw.p_ues)?;
    sqrt_all(&pw.p_sue)?;
    sqrt_all(&pw.p_sb)?;
    let lambda_f_dl: Vec<f64> =
        (0..n_s).map(|n| (pw.p_sue[n] / (f.gamma_bs(n) * pw.p_bs[n] + 1.0)).sqrt()).collect();
    let lambda_f_ul: Vec<f64> =
        (0..n_s).map(|n| (pw.p_sb[n] / (f.gamma_sue(n) * pw.p_ues[n] + 1.0)).sqrt()).collect();

    let v_bs = f.bs.v.leading_cols(n_s);
    let u_bs = f.bs.u.leading_cols(n_s);
    let v_sue = f.sue.v.leading_cols(n_s);
    let u_sue = f.sue.u.leading_cols(n_s);

    let p_dl = &v_bs * &ComplexMatrix::from_real_diag(&lambda_b_dl);
    let f_dl = &(&v_sue * &ComplexMatrix::from_real_diag(&lambda_f_dl)) * &u_bs.adjoint();
    let p_ul = &u_sue * &ComplexMatrix::from_real_diag(&lambda_ue_ul);
    let f_ul = &(&u_bs * &ComplexMatrix::from_real_diag(&lambda_f_ul)) * &v_sue.adjoint();
    Ok(PrecoderSet { p_dl, f_dl, p_ul, f_ul, lambda_b_dl, lambda_f_dl, lambda_ue_ul, lambda_f_ul })
}

/// E = [I + Γᴴ Θ⁻¹ Γ]⁻¹.
pub fn mse_matrix(gamma: &ComplexMatrix, theta: &ComplexMatrix) -> Result<ComplexMatrix> {
    let x = solve_hpd(theta, gamma)?;
    let a = &ComplexMatrix::identity(gamma.cols()) + &(&gamma.adjoint() * &x);
    // symmetrize away rounding before the Cholesky
    let a = (&a + &a.adjoint()).scale(0.5);
    inverse_hpd(&a)
}

/// W = (ΓΓᴴ + Θ)⁻¹ Γ.
pub fn mmse_receiver(gamma: &ComplexMatrix, theta: &ComplexMatrix) -> Result<ComplexMatrix> {
    let a = &(gamma * &gamma.adjoint()) + theta;
    solve_hpd(&a, gamma)
}

/// Tr(F (H P Pᴴ Hᴴ + I) Fᴴ).
pub fn sudas_forward_power(f: &ComplexMatrix, h_in: &ComplexMatrix, p_in: &ComplexMatrix) -> f64 {
    let hp = h_in * p_in;
    let cov = &(&hp * &hp.adjoint()) + &ComplexMatrix::identity(hp.rows());
    (&(f * &cov) * &f.adjoint()).trace().re
}

/// End-to-end effective channel Γ and interference-plus-noise covariance Θ.
#[derive(Debug, Clone)]
pub struct LinkMatrices {
    pub gamma_dl: ComplexMatrix,
    pub theta_dl: ComplexMatrix,
    pub gamma_ul: ComplexMatrix,
    pub theta_ul: ComplexMatrix,
}

pub fn link_matrices(ch: &ChannelRealization, i: usize, k: usize, pre: &PrecoderSet) -> LinkMatrices {
    let h_bs = &ch.h_bs[i];
    let h_sue = ch.h_sue_matrix(i, k);
    let h_sb = h_bs.adjoint();
    let h_ues = h_sue.adjoint();

    let relay_dl = &h_sue * &pre.f_dl;
    let gamma_dl = &(&relay_dl * h_bs) * &pre.p_dl;
    let theta_dl = &(&relay_dl * &relay_dl.adjoint()) + &ComplexMatrix::identity(relay_dl.rows());

    let relay_ul = &h_sb * &pre.f_ul;
    let gamma_ul = &(&relay_ul * &h_ues) * &pre.p_ul;
    let theta_ul = &(&relay_ul * &relay_ul.adjoint()) + &ComplexMatrix::identity(relay_ul.rows());
    LinkMatrices { gamma_dl, theta_dl, gamma_ul, theta_ul }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn scalar_mse_examples() {
        let g = ComplexMatrix::from_vec(1, 1, vec![Complex64::new(2.0, 0.0)]);
        let t = ComplexMatrix::identity(1);
        let e = mse_matrix(&g, &t).unwrap();
        assert!((e[(0, 0)].re - 0.2).abs() < 1e-15);
        let g1 = ComplexMatrix::identity(1);
        let w = mmse_receiver(&g1, &t).unwrap();
        assert!((w[(0, 0)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gamma_gives_identity_mse() {
        let e = mse_matrix(&ComplexMatrix::zeros(3, 2), &ComplexMatrix::identity(3)).unwrap();
        assert!((&e - &ComplexMatrix::identity(2)).frobenius() < 1e-15);
        let w = mmse_receiver(&ComplexMatrix::zeros(3, 2), &ComplexMatrix::identity(3)).unwrap();
        assert_eq!(w.frobenius(), 0.0);
    }

    #[test]
    fn non_hpd_theta_is_domain_error() {
        let bad = ComplexMatrix::from_real_diag(&[1.0, -2.0]);
        assert!(matches!(mse_matrix(&ComplexMatrix::identity(2), &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_forwarding_has_no_power() {
        let f = ComplexMatrix::zeros(2, 2);
        assert_eq!(sudas_forward_power(&f, &ComplexMatrix::identity(2), &ComplexMatrix::identity(2)), 0.0);
    }

    #[test]
    fn forward_power_scalar_expansion() {
        // γ₁P₁ = 3 on one stream, forwarding gain 2
        let h = ComplexMatrix::from_real_diag(&[3f64.sqrt()]);
        let p = ComplexMatrix::identity(1);
        let f = ComplexMatrix::from_real_diag(&[2f64.sqrt()]);
        assert!((sudas_forward_power(&f, &h, &p) - 8.0).abs() < 1e-14);
    }
}
