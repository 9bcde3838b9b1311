//! SINR evaluation for the downlink, uplink, and radar paths, plus the
//! closed-form optimal receive beamformers.
//!
//! The radar and uplink receive filters are whitened matched filters:
//! `u* = Psi^{-1} a_r(theta_0)` and `w* = Phi^{-1} h`. Both SINR expressions
//! are generalized Rayleigh quotients, so the beamformers are returned
//! unnormalized — every metric downstream is invariant to their scale.

use thiserror::Error;

use crate::numerics::{hermitian_solve, ComplexVector, HermitianMatrix};
use crate::scenario::{assemble_phi, assemble_psi, steering_rx, steering_tx, ChannelSet};

#[derive(Debug, Error)]
pub enum BeamformingError {
    #[error("receive beamformer must be nonzero")]
    ZeroBeamformer,
    #[error("whitening matrix is singular: {0}")]
    SingularWhitening(String),
}

/// Which transmit covariance enters the radar SINR numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadarSinrMode {
    /// Full transmit covariance `V_t = V_s + V_c`.
    Total,
    /// Sensing covariance `V_s` only — the regime where the communication
    /// signal contributes negligibly to detection.
    SensingOnly,
}

/// The transmit-side optimization variables: sensing covariance,
/// communication covariance, and uplink power.
#[derive(Debug, Clone)]
pub struct TransmitDesign {
    pub v_s: HermitianMatrix,
    pub v_c: HermitianMatrix,
    /// Uplink transmit power, watts.
    pub p: f64,
}

impl TransmitDesign {
    /// `V_t = V_s + V_c`.
    pub fn total_covariance(&self) -> HermitianMatrix {
        self.v_s.add(&self.v_c)
    }

    /// Budget and PSD invariants against the given limits.
    pub fn check_budgets(&self, bs_power_max: f64, ul_power_max: f64) -> bool {
        self.v_s.trace() + self.v_c.trace() <= bs_power_max + 1e-9
            && self.p >= 0.0
            && self.p <= ul_power_max + 1e-12
            && self.v_s.psd_within_tolerance()
            && self.v_c.psd_within_tolerance()
    }
}

/// Downlink SINR `g^H V_c g / (g^H V_s g + sigma^2)`.
pub fn sinr_dl(d: &TransmitDesign, ch: &ChannelSet, sigma2: f64) -> f64 {
    d.v_c.quadratic_form(&ch.g) / (d.v_s.quadratic_form(&ch.g) + sigma2)
}

/// Optimal radar receive beamformer `Psi^{-1} a_r(theta_0)`, unnormalized.
pub fn opt_rx_radar(
    d: &TransmitDesign,
    ch: &ChannelSet,
    sigma2: f64,
    theta0_deg: f64,
) -> Result<ComplexVector, BeamformingError> {
    let psi = assemble_psi(d.p, &d.total_covariance(), ch, sigma2);
    let ar = steering_rx(theta0_deg, ch.h.len());
    hermitian_solve(&psi, &ar).map_err(|e| BeamformingError::SingularWhitening(e.to_string()))
}

/// Optimal uplink receive beamformer `Phi^{-1} h`, unnormalized.
pub fn opt_rx_ul(
    d: &TransmitDesign,
    ch: &ChannelSet,
    sigma2: f64,
) -> Result<ComplexVector, BeamformingError> {
    let phi = assemble_phi(&d.total_covariance(), ch, sigma2);
    hermitian_solve(&phi, &ch.h).map_err(|e| BeamformingError::SingularWhitening(e.to_string()))
}

/// Radar SINR for an explicit receive beamformer `u`:
/// `|beta_0|^2 u^H A V_t A^H u / u^H Psi_0 u` with `Psi_0` the whitening
/// matrix without the target term.
pub fn sinr_radar(
    u: &ComplexVector,
    d: &TransmitDesign,
    ch: &ChannelSet,
    sigma2: f64,
    theta0_deg: f64,
    beta0_sq: f64,
) -> Result<f64, BeamformingError> {
    if u.norm_squared() == 0.0 {
        return Err(BeamformingError::ZeroBeamformer);
    }
    let v_t = d.total_covariance();
    let ar = steering_rx(theta0_deg, ch.h.len());
    let at = steering_tx(theta0_deg, ch.g.len());
    // u^H A V_t A^H u = |a_r^H u|^2 * (a_t^H V_t a_t)
    let ar_u = (ar.adjoint() * u)[(0, 0)].norm_sqr();
    let numer = beta0_sq * v_t.quadratic_form(&at) * ar_u;
    let psi = assemble_psi(d.p, &v_t, ch, sigma2);
    Ok(numer / psi.quadratic_form(u))
}

/// Radar SINR at the optimal receive beamformer, in closed form:
/// `|beta_0|^2 (a_t^H V a_t)(a_r^H Psi^{-1} a_r)` with `V` chosen by `mode`.
pub fn sinr_radar_opt(
    d: &TransmitDesign,
    ch: &ChannelSet,
    sigma2: f64,
    theta0_deg: f64,
    beta0_sq: f64,
    mode: RadarSinrMode,
) -> Result<f64, BeamformingError> {
    let v_t = d.total_covariance();
    let at = steering_tx(theta0_deg, ch.g.len());
    let tx_gain = match mode {
        RadarSinrMode::Total => v_t.quadratic_form(&at),
        RadarSinrMode::SensingOnly => d.v_s.quadratic_form(&at),
    };
    let psi = assemble_psi(d.p, &v_t, ch, sigma2);
    let ar = steering_rx(theta0_deg, ch.h.len());
    let y = hermitian_solve(&psi, &ar)
        .map_err(|e| BeamformingError::SingularWhitening(e.to_string()))?;
    let rx_gain = (ar.adjoint() * &y)[(0, 0)].re;
    Ok(beta0_sq * tx_gain * rx_gain)
}

/// Uplink SINR at the optimal receive beamformer, `p h^H Phi^{-1} h`.
pub fn sinr_ul_opt(d: &TransmitDesign, ch: &ChannelSet, sigma2: f64) -> Result<f64, BeamformingError> {
    let phi = assemble_phi(&d.total_covariance(), ch, sigma2);
    let z = hermitian_solve(&phi, &ch.h)
        .map_err(|e| BeamformingError::SingularWhitening(e.to_string()))?;
    Ok(d.p * (ch.h.adjoint() * &z)[(0, 0)].re)
}

/// Uplink SINR for an explicit receive beamformer `w`:
/// `p |w^H h|^2 / w^H Phi_0 w` with `Phi_0 = C V_t C^H + sigma^2 I`.
pub fn sinr_ul(
    w: &ComplexVector,
    d: &TransmitDesign,
    ch: &ChannelSet,
    sigma2: f64,
) -> Result<f64, BeamformingError> {
    if w.norm_squared() == 0.0 {
        return Err(BeamformingError::ZeroBeamformer);
    }
    let numer = d.p * (ch.h.adjoint() * w)[(0, 0)].norm_sqr();
    let phi = assemble_phi(&d.total_covariance(), ch, sigma2);
    Ok(numer / phi.quadratic_form(w))
}

/// Transmit beampattern `a_t(theta)^H V a_t(theta)` over an angle grid,
/// in dB. Gains below 1e-30 W are floored at -300 dB so the output stays
/// finite for zero covariances.
pub fn beampattern_gain(v: &HermitianMatrix, theta_grid_deg: &[f64]) -> Vec<(f64, f64)> {
    theta_grid_deg
        .iter()
        .map(|&theta| {
            let at = steering_tx(theta, v.dim());
            let gain = v.quadratic_form(&at).max(1e-30);
            (theta, 10.0 * gain.log10())
        })
        .collect()
}

/// Default beampattern grid: 721 points over [-90, 90] degrees.
pub fn default_beampattern_grid() -> Vec<f64> {
    (0..721).map(|i| -90.0 + 0.25 * i as f64).collect()
}
