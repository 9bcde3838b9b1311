//! Array geometry, channel generation, and assembly of the interference and
//! whitening matrices from a declarative scenario description.
//!
//! Angles are taken in degrees at every public boundary and converted to
//! radians exactly once, inside the steering-vector kernel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::{ComplexVector, HermitianMatrix};

/// RNG sub-stream used for self-interference channel draws.
const STREAM_CHANNELS: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// One environmental interferer: a point scatterer at a fixed angle.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferer {
    pub angle_deg: f64,
    pub amplitude: Complex64,
}

/// Complete physical configuration of the link: arrays, powers, noise,
/// target, interferers, and the user geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Base-station transmit power budget, watts.
    pub bs_power_max: f64,
    /// Uplink user transmit power budget, watts.
    pub ul_power_max: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    pub target_angle_deg: f64,
    /// Target power reflectivity |beta_0|^2, linear.
    pub target_reflectivity: f64,
    pub interferers: Vec<Interferer>,
    /// Total residual self-interference channel power, linear.
    pub si_power: f64,
    pub dl_angle_deg: f64,
    /// Downlink path loss, linear power gain.
    pub dl_pathloss: f64,
    pub ul_angle_deg: f64,
    /// Uplink path loss, linear power gain.
    pub ul_pathloss: f64,
    pub rng_seed: u64,
}

impl Scenario {
    /// Check the structural invariants; every consumer calls this before use.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_tx < 1 || self.n_rx < 1 {
            return Err(ScenarioError::Invalid("antenna counts must be >= 1".into()));
        }
        if !(self.bs_power_max > 0.0) {
            return Err(ScenarioError::Invalid("bs_power_max must be > 0".into()));
        }
        if self.ul_power_max < 0.0 {
            return Err(ScenarioError::Invalid("ul_power_max must be >= 0".into()));
        }
        if !(self.noise_power > 0.0) {
            return Err(ScenarioError::Invalid("noise_power must be > 0".into()));
        }
        if !(self.target_reflectivity > 0.0 && self.target_reflectivity < 1.0) {
            return Err(ScenarioError::Invalid(
                "target_reflectivity must lie in (0, 1)".into(),
            ));
        }
        if self.si_power < 0.0 {
            return Err(ScenarioError::Invalid("si_power must be >= 0".into()));
        }
        if !(self.dl_pathloss > 0.0 && self.ul_pathloss > 0.0) {
            return Err(ScenarioError::Invalid("path losses must be > 0".into()));
        }
        for a in [self.target_angle_deg, self.dl_angle_deg, self.ul_angle_deg]
            .iter()
            .chain(self.interferers.iter().map(|i| &i.angle_deg))
        {
            if !(*a > -90.0 && *a < 90.0) {
                return Err(ScenarioError::Invalid(format!(
                    "angle {a} deg outside the open interval (-90, 90)"
                )));
            }
        }
        Ok(())
    }
}

/// Channels and derived matrices for one scenario realization.
///
/// `b` collects the interferer responses plus self-interference and `c`
/// adds the target response on top; the whitening matrices for the radar
/// and uplink receivers are built from these by [`assemble_psi`] and
/// [`assemble_phi`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Downlink channel, length `n_tx`.
    pub g: ComplexVector,
    /// Uplink channel, length `n_rx`.
    pub h: ComplexVector,
    /// Residual self-interference channel, `n_rx x n_tx`.
    pub h_si: DMatrix<Complex64>,
    /// Interference response `sum_i beta_i A(theta_i) + H_SI`.
    pub b: DMatrix<Complex64>,
    /// `b + beta_0 A(theta_0)`.
    pub c: DMatrix<Complex64>,
}

/// Receive steering vector of a half-wavelength uniform linear array:
/// entry k is `exp(j pi k sin(theta)) / sqrt(n)`, unit norm.
pub fn steering_rx(theta_deg: f64, n: usize) -> ComplexVector {
    steering(theta_deg, n)
}

/// Transmit steering vector; same kernel as [`steering_rx`] with the
/// transmit array size.
pub fn steering_tx(theta_deg: f64, n: usize) -> ComplexVector {
    steering(theta_deg, n)
}

fn steering(theta_deg: f64, n: usize) -> ComplexVector {
    assert!(n >= 1, "steering vector needs at least one element");
    let s = theta_deg.to_radians().sin();
    let scale = 1.0 / (n as f64).sqrt();
    DVector::from_fn(n, |k, _| {
        let phase = std::f64::consts::PI * k as f64 * s;
        Complex64::from_polar(scale, phase)
    })
}

/// Rank-one array response `A(theta) = a_r(theta) a_t(theta)^H`.
pub fn response_matrix(theta_deg: f64, n_rx: usize, n_tx: usize) -> DMatrix<Complex64> {
    let ar = steering_rx(theta_deg, n_rx);
    let at = steering_tx(theta_deg, n_tx);
    ar * at.adjoint()
}

/// Build the line-of-sight channels and interference matrices for a
/// scenario. Deterministic given `rng_seed`: the self-interference draw is
/// the only randomness and comes from a dedicated ChaCha sub-stream.
pub fn build_channels(s: &Scenario) -> Result<ChannelSet, ScenarioError> {
    s.validate()?;
    for i in &s.interferers {
        if i.angle_deg == s.target_angle_deg {
            log::warn!(
                "interferer at {} deg coincides exactly with the target angle; \
                 geometry is degenerate",
                i.angle_deg
            );
        }
    }

    // LOS channels: scaled steering vectors with array gain sqrt(N), so the
    // per-element power is exactly the configured path loss.
    let g = steering_tx(s.dl_angle_deg, s.n_tx).scale((s.dl_pathloss * s.n_tx as f64).sqrt());
    let h = steering_rx(s.ul_angle_deg, s.n_rx).scale((s.ul_pathloss * s.n_rx as f64).sqrt());

    // Rayleigh self-interference: i.i.d. complex Gaussian entries scaled so
    // E[||H_SI||_F^2] equals the configured total power.
    let mut rng = ChaCha12Rng::seed_from_u64(s.rng_seed);
    rng.set_stream(STREAM_CHANNELS);
    let per_entry = (s.si_power / (s.n_rx * s.n_tx) as f64).sqrt();
    let h_si = DMatrix::from_fn(s.n_rx, s.n_tx, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im).scale(per_entry / std::f64::consts::SQRT_2)
    });

    let mut b = h_si.clone();
    for intf in &s.interferers {
        b += response_matrix(intf.angle_deg, s.n_rx, s.n_tx).map(|e| e * intf.amplitude);
    }
    let beta0 = Complex64::new(s.target_reflectivity.sqrt(), 0.0);
    let c = &b + response_matrix(s.target_angle_deg, s.n_rx, s.n_tx).map(|e| e * beta0);

    Ok(ChannelSet { g, h, h_si, b, c })
}

/// Radar-receiver whitening matrix
/// `Psi = p h h^H + B V_t B^H + sigma_n^2 I`, positive definite.
pub fn assemble_psi(
    p: f64,
    v_t: &HermitianMatrix,
    ch: &ChannelSet,
    sigma2: f64,
) -> HermitianMatrix {
    let n_rx = ch.h.len();
    let mut m = (&ch.h * ch.h.adjoint()).scale(p);
    m += &ch.b * v_t.matrix() * ch.b.adjoint();
    for i in 0..n_rx {
        m[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    HermitianMatrix::from_congruence(m, true)
}

/// Uplink-receiver whitening matrix
/// `Phi = C V_t C^H + sigma_n^2 I`, positive definite.
pub fn assemble_phi(v_t: &HermitianMatrix, ch: &ChannelSet, sigma2: f64) -> HermitianMatrix {
    let n_rx = ch.h.len();
    let mut m = &ch.c * v_t.matrix() * ch.c.adjoint();
    for i in 0..n_rx {
        m[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    HermitianMatrix::from_congruence(m, true)
}
