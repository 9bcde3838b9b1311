//! Sum-rate maximization under a radar SINR constraint, by successive
//! convex approximation (SCA).
//!
//! Each iteration linearizes the nonconvex pieces around the previous
//! iterate — the concave-minus-concave downlink rate, the matrix-inverse
//! quadratic form in the radar constraint, and the uplink SINR — and
//! maximizes the resulting concave surrogate over the transmit covariances,
//! uplink power, and two scalar auxiliaries. The surrogate is tangent to
//! the true objective at the linearization point and under-estimates it
//! elsewhere, so accepted iterates ascend the true sum rate and any iterate
//! feasible for the linearized radar constraint satisfies the true one.
//!
//! The convex subproblem is solved by a purpose-built log-barrier
//! interior-point method; see [`subproblem`] for the reduction that makes
//! it cheap.

mod subproblem;

use thiserror::Error;

use crate::beamforming::{sinr_dl, sinr_radar_opt, sinr_ul_opt, RadarSinrMode, TransmitDesign};
use crate::detection::{required_sinr, thermal_photons, DetectionError, DetectionSpec};
use crate::numerics::{
    hermitian_solve, principal_eigenpair, ComplexVector, HermitianMatrix, NumericsError,
};
use crate::scenario::{assemble_phi, assemble_psi, steering_rx, steering_tx, ChannelSet, Scenario};

pub use subproblem::SolverStatus;

#[derive(Debug, Error)]
pub enum ScaError {
    #[error("radar SINR threshold is unattainable: best achievable {best_db:.3} dB < required {required_db:.3} dB")]
    Infeasible { best_db: f64, required_db: f64, trace: SCATrace },
    #[error("subproblem solver failed at iteration {iteration}: {message}")]
    SolverFailure { iteration: usize, message: String },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

/// Which covariance the radar SINR constraint sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizationMode {
    /// Constraint on the full transmit covariance `V_t`.
    Conventional,
    /// Constraint on the sensing covariance `V_s` only; valid when the
    /// communication signal contributes negligibly to detection.
    Iqscc,
}

impl OptimizationMode {
    pub fn radar_sinr_mode(self) -> RadarSinrMode {
        match self {
            OptimizationMode::Conventional => RadarSinrMode::Total,
            OptimizationMode::Iqscc => RadarSinrMode::SensingOnly,
        }
    }
}

impl std::fmt::Display for OptimizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizationMode::Conventional => write!(f, "conventional"),
            OptimizationMode::Iqscc => write!(f, "iqscc"),
        }
    }
}

/// Solver knobs. The defaults implement the documented convergence rule:
/// relative surrogate change below 1e-4 or 50 iterations.
#[derive(Debug, Clone)]
pub struct ScaSettings {
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Target duality gap of each barrier solve, in objective units (bits).
    pub subproblem_gap: f64,
    pub restoration_max_iterations: usize,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            convergence_tol: 1e-4,
            max_iterations: 50,
            subproblem_gap: 1e-9,
            restoration_max_iterations: 40,
        }
    }
}

/// Full problem statement for one optimization run.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub scenario: Scenario,
    pub channels: ChannelSet,
    /// Minimum required radar SINR, linear.
    pub rho_s: f64,
    pub mode: OptimizationMode,
    pub settings: ScaSettings,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), ScaError> {
        self.scenario
            .validate()
            .map_err(|e| ScaError::InvalidProblem(e.to_string()))?;
        if !(self.rho_s > 0.0) {
            return Err(ScaError::InvalidProblem("rho_s must be > 0".into()));
        }
        Ok(())
    }
}

/// One SCA iterate: the design plus the auxiliaries and cached whitening
/// matrices that define the next linearization.
#[derive(Debug, Clone)]
pub struct SCAState {
    pub iteration: usize,
    pub design: TransmitDesign,
    /// Auxiliary: sqrt of the uplink beamformer-output SNR product,
    /// `x = sqrt(p h^H Phi^{-1} h)`, kept consistent at accepted iterates.
    pub x: f64,
    /// Auxiliary uplink-SINR lower bound, `u = x^2` at accepted iterates.
    pub u: f64,
    pub psi: HermitianMatrix,
    pub phi: HermitianMatrix,
    /// Noise power the caches were built with.
    pub sigma2: f64,
}

/// Per-iteration convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Surrogate objective value at the accepted iterate, bits/s/Hz.
    pub surrogate_objective: f64,
    /// True sum rate at the accepted iterate, bits/s/Hz.
    pub sum_rate: f64,
    /// True radar SINR (mode-dependent expression), dB.
    pub radar_sinr_db: f64,
    /// True radar constraint held at this iterate.
    pub feasible: bool,
    pub solver_status: SolverStatus,
}

/// Convergence trace: one row per completed iteration.
pub type SCATrace = Vec<TraceRow>;

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub design: TransmitDesign,
    pub trace: SCATrace,
    /// Iterations spent in the feasibility-restoration pre-phase.
    pub restoration_iterations: usize,
    /// True sum rate of the final design, bits/s/Hz.
    pub sum_rate: f64,
    /// True radar SINR of the final design, linear.
    pub radar_sinr: f64,
}

/// Rank-one weight `scale * w w^H` applied to a covariance through
/// `scale * Re(w^H V w)`.
#[derive(Debug, Clone)]
pub struct RankOneWeight {
    pub vector: ComplexVector,
    pub scale: f64,
}

impl RankOneWeight {
    fn eval(&self, v: &HermitianMatrix) -> f64 {
        self.scale * v.quadratic_form(&self.vector)
    }
}

/// Affine functional of the design `(p, V_s, V_c)`.
#[derive(Debug, Clone)]
pub struct AffineForm {
    pub constant: f64,
    pub p_coeff: f64,
    pub vs_weight: Option<RankOneWeight>,
    pub vc_weight: Option<RankOneWeight>,
}

impl AffineForm {
    pub fn eval(&self, d: &TransmitDesign) -> f64 {
        let mut v = self.constant + self.p_coeff * d.p;
        if let Some(w) = &self.vs_weight {
            v += w.eval(&d.v_s);
        }
        if let Some(w) = &self.vc_weight {
            v += w.eval(&d.v_c);
        }
        v
    }
}

/// Linearized radar SINR constraint: `lhs(design) >= rhs_scale / gain(design)`.
///
/// `lhs` is the first-order expansion of `a_r^H Psi^{-1} a_r` around the
/// cached `Psi` — an affine under-estimate, so satisfying it implies the
/// true constraint. `gain` is `a_t^H V a_t` with `V` picked by the mode.
#[derive(Debug, Clone)]
pub struct RadarConstraintTerms {
    pub lhs: AffineForm,
    pub rhs_scale: f64,
    pub gain: AffineForm,
}

/// Linearized uplink constraints: `x^2 / p <= t_lin(design)` plus the
/// tangent bound `u <= x_prev^2 + 2 x_prev (x - x_prev)`.
#[derive(Debug, Clone)]
pub struct UlConstraintTerms {
    pub t_lin: AffineForm,
    pub x_prev: f64,
}

/// Concave lower bound on the downlink rate term, tangent at `v_s_prev`:
///
/// `log2(g^H V_t g + s2) - log2(g^H Vsp g + s2) - g^H (V_s - Vsp) g / ((g^H Vsp g + s2) ln 2)`
pub fn dl_rate_lower_bound(
    v_s: &HermitianMatrix,
    v_c: &HermitianMatrix,
    v_s_prev: &HermitianMatrix,
    g: &ComplexVector,
    sigma2: f64,
) -> f64 {
    let total = v_s.quadratic_form(g) + v_c.quadratic_form(g) + sigma2;
    let prev = v_s_prev.quadratic_form(g) + sigma2;
    let diff = v_s.quadratic_form(g) - v_s_prev.quadratic_form(g);
    total.log2() - prev.log2() - diff / (prev * std::f64::consts::LN_2)
}

/// Build the linearized radar constraint at the state's cached `Psi`.
pub fn radar_constraint_terms(
    state: &SCAState,
    ch: &ChannelSet,
    theta0_deg: f64,
    rho_s: f64,
    beta0_sq: f64,
    mode: OptimizationMode,
) -> Result<RadarConstraintTerms, ScaError> {
    if !(beta0_sq > 0.0) || !(rho_s > 0.0) {
        return Err(ScaError::InvalidProblem(
            "radar constraint needs rho_s > 0 and |beta_0|^2 > 0".into(),
        ));
    }
    let n_rx = ch.h.len();
    let ar = steering_rx(theta0_deg, n_rx);
    let at = steering_tx(theta0_deg, ch.g.len());
    let y = hermitian_solve(&state.psi, &ar)?;
    let sigma2 = state.sigma2;
    // lhs(p, V) = 2 Re(a^H y) - p |h^H y|^2 - <V_t, (B^H y)(B^H y)^H> - s2 ||y||^2
    let a_y = (ar.adjoint() * &y)[(0, 0)].re;
    let h_y = (ch.h.adjoint() * &y)[(0, 0)].norm_sqr();
    let by = ch.b.adjoint() * &y;
    let lhs = AffineForm {
        constant: 2.0 * a_y - sigma2 * y.norm_squared(),
        p_coeff: -h_y,
        vs_weight: Some(RankOneWeight { vector: by.clone(), scale: -1.0 }),
        vc_weight: Some(RankOneWeight { vector: by, scale: -1.0 }),
    };
    let gain = AffineForm {
        constant: 0.0,
        p_coeff: 0.0,
        vs_weight: Some(RankOneWeight { vector: at.clone(), scale: 1.0 }),
        vc_weight: match mode {
            OptimizationMode::Conventional => Some(RankOneWeight { vector: at, scale: 1.0 }),
            OptimizationMode::Iqscc => None,
        },
    };
    Ok(RadarConstraintTerms { lhs, rhs_scale: rho_s / beta0_sq, gain })
}

/// Build the linearized uplink constraints at the state's cached `Phi`.
pub fn ul_constraint_terms(state: &SCAState, ch: &ChannelSet) -> Result<UlConstraintTerms, ScaError> {
    let z = hermitian_solve(&state.phi, &ch.h)?;
    let sigma2 = state.sigma2;
    let h_z = (ch.h.adjoint() * &z)[(0, 0)].re;
    let cz = ch.c.adjoint() * &z;
    let t_lin = AffineForm {
        constant: 2.0 * h_z - sigma2 * z.norm_squared(),
        p_coeff: 0.0,
        vs_weight: Some(RankOneWeight { vector: cz.clone(), scale: -1.0 }),
        vc_weight: Some(RankOneWeight { vector: cz, scale: -1.0 }),
    };
    Ok(UlConstraintTerms { t_lin, x_prev: state.x })
}

impl SCAState {
    /// Build a consistent state at a design: caches `Psi`/`Phi` and sets the
    /// auxiliaries to their exact values, so every linearization built from
    /// this state is tangent.
    pub fn at_design(
        design: TransmitDesign,
        spec: &ProblemSpec,
        iteration: usize,
    ) -> Result<Self, ScaError> {
        let s = &spec.scenario;
        let v_t = design.total_covariance();
        let psi = assemble_psi(design.p, &v_t, &spec.channels, s.noise_power);
        let phi = assemble_phi(&v_t, &spec.channels, s.noise_power);
        // Clamp p away from zero for the x^2/p linearization only.
        let p_lin = if s.ul_power_max > 0.0 {
            design.p.max(1e-9 * s.ul_power_max)
        } else {
            0.0
        };
        let (x, u) = if s.ul_power_max > 0.0 {
            let z = hermitian_solve(&phi, &spec.channels.h)?;
            let t = (spec.channels.h.adjoint() * &z)[(0, 0)].re;
            let x = (p_lin * t).sqrt();
            (x, design.p * t)
        } else {
            (0.0, 0.0)
        };
        Ok(Self { iteration, design, x, u, psi, phi, sigma2: s.noise_power })
    }
}

/// Solve the convex subproblem at the state's linearization and return the
/// next accepted state.
pub fn solve_subproblem(state: &SCAState, spec: &ProblemSpec) -> Result<(SCAState, f64, SolverStatus), ScaError> {
    let (sol, status) = subproblem::maximize_surrogate(state, spec)?;
    let next = SCAState::at_design(sol.design, spec, state.iteration + 1)?;
    Ok((next, sol.surrogate_bits, status))
}

/// Run the full ascent loop (with a feasibility-restoration pre-phase when
/// the initial design violates the radar constraint).
pub fn run_sca(spec: &ProblemSpec, init: Option<TransmitDesign>) -> Result<ScaOutcome, ScaError> {
    spec.validate()?;
    let s = &spec.scenario;
    let n_t = s.n_tx;

    let init_design = init.unwrap_or_else(|| TransmitDesign {
        v_s: HermitianMatrix::scaled_identity(n_t, s.bs_power_max / (2.0 * n_t as f64)),
        v_c: HermitianMatrix::scaled_identity(n_t, s.bs_power_max / (2.0 * n_t as f64)),
        p: s.ul_power_max,
    });
    if !init_design.check_budgets(s.bs_power_max, s.ul_power_max) {
        return Err(ScaError::InvalidProblem(
            "initial design violates the power budgets".into(),
        ));
    }
    let mut state = SCAState::at_design(init_design, spec, 0)?;

    // Restoration pre-phase: push the linearized radar SINR up until the
    // true constraint holds, or declare the threshold unattainable.
    let mut restoration_iterations = 0;
    let mut gamma = true_radar_sinr(&state.design, spec)?;
    if gamma < spec.rho_s {
        let mut best = gamma;
        for _ in 0..spec.settings.restoration_max_iterations {
            restoration_iterations += 1;
            let sol = subproblem::maximize_radar_margin(&state, spec)?;
            state = SCAState::at_design(sol.design, spec, 0)?;
            gamma = true_radar_sinr(&state.design, spec)?;
            if gamma >= spec.rho_s * (1.0 + 1e-7) {
                break;
            }
            if gamma <= best * (1.0 + 1e-9) {
                // Stalled below the threshold.
                break;
            }
            best = best.max(gamma);
        }
        if gamma < spec.rho_s {
            return Err(ScaError::Infeasible {
                best_db: 10.0 * gamma.log10(),
                required_db: 10.0 * spec.rho_s.log10(),
                trace: Vec::new(),
            });
        }
    }

    let mut trace: SCATrace = Vec::new();
    let mut prev_surrogate = f64::NEG_INFINITY;
    for j in 1..=spec.settings.max_iterations {
        let (next, surrogate, status) = solve_subproblem(&state, spec).map_err(|e| match e {
            ScaError::SolverFailure { message, .. } => ScaError::SolverFailure { iteration: j, message },
            other => other,
        })?;
        state = next;
        state.iteration = j;
        let gamma = true_radar_sinr(&state.design, spec)?;
        let rate = true_sum_rate(&state.design, spec)?;
        trace.push(TraceRow {
            iteration: j,
            surrogate_objective: surrogate,
            sum_rate: rate,
            radar_sinr_db: 10.0 * gamma.max(f64::MIN_POSITIVE).log10(),
            feasible: gamma >= spec.rho_s * (1.0 - 1e-9),
            solver_status: status,
        });
        if !trace.last().unwrap().feasible {
            log::warn!(
                "iteration {j}: true radar SINR {:.6} dB fell below the threshold",
                10.0 * gamma.log10()
            );
        }
        let converged = (surrogate - prev_surrogate).abs()
            <= spec.settings.convergence_tol * surrogate.abs().max(1.0);
        prev_surrogate = surrogate;
        if converged && j >= 2 {
            break;
        }
    }

    let sum_rate = true_sum_rate(&state.design, spec)?;
    let radar_sinr = true_radar_sinr(&state.design, spec)?;
    Ok(ScaOutcome {
        design: state.design,
        trace,
        restoration_iterations,
        sum_rate,
        radar_sinr,
    })
}

/// True radar SINR of a design under the spec's mode (not the linearization).
pub fn true_radar_sinr(d: &TransmitDesign, spec: &ProblemSpec) -> Result<f64, ScaError> {
    let s = &spec.scenario;
    sinr_radar_opt(
        d,
        &spec.channels,
        s.noise_power,
        s.target_angle_deg,
        s.target_reflectivity,
        spec.mode.radar_sinr_mode(),
    )
    .map_err(|e| ScaError::InvalidProblem(e.to_string()))
}

/// True sum rate `log2(1 + ul) + log2(1 + dl)` of a design, bits/s/Hz.
pub fn true_sum_rate(d: &TransmitDesign, spec: &ProblemSpec) -> Result<f64, ScaError> {
    let s = &spec.scenario;
    let ul = sinr_ul_opt(d, &spec.channels, s.noise_power)
        .map_err(|e| ScaError::InvalidProblem(e.to_string()))?;
    let dl = sinr_dl(d, &spec.channels, s.noise_power);
    Ok((1.0 + ul).log2() + (1.0 + dl).log2())
}

/// Principal-component beamformer of the (relaxed) communication covariance
/// and the rank-one gap `1 - lambda_1 / trace`, in [0, 1]. The gap is
/// reported, never enforced.
pub fn extract_rank1(v_c: &HermitianMatrix) -> (ComplexVector, f64) {
    let trace = v_c.trace();
    if trace <= 0.0 {
        return (ComplexVector::zeros(v_c.dim()), 0.0);
    }
    let (lam, v) = principal_eigenpair(v_c);
    let gap = (1.0 - lam / trace).clamp(0.0, 1.0);
    (v.scale(lam.max(0.0).sqrt()), gap)
}

/// Translate a detection requirement into the radar SINR threshold:
/// the thermal occupation comes from the spec's (f, T) and the smallest
/// SINR reaching (pd_min, pf_max) is found by bisection.
pub fn derive_rho_s(ds: &DetectionSpec) -> Result<f64, DetectionError> {
    ds.validate()?;
    let n_n = thermal_photons(ds.frequency_hz, ds.temperature_k);
    required_sinr(ds.protocol, ds.pd_min, ds.pf_max, ds.k, n_n, ds.transmissivity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn small_spec(seed: u64, mode: OptimizationMode, rho_db: f64) -> ProblemSpec {
        let scenario = Scenario {
            n_tx: 8,
            n_rx: 8,
            bs_power_max: 1.0,
            ul_power_max: 0.2,
            noise_power: 5e-12,
            target_angle_deg: 0.0,
            target_reflectivity: 1e-11,
            interferers: vec![
                crate::scenario::Interferer {
                    angle_deg: -50.0,
                    amplitude: Complex64::new(10f64.powf(-65.0 / 20.0), 0.0),
                },
                crate::scenario::Interferer {
                    angle_deg: 40.0,
                    amplitude: Complex64::new(10f64.powf(-65.0 / 20.0), 0.0),
                },
            ],
            si_power: 10f64.powf(-115.0 / 10.0),
            dl_angle_deg: 30.0,
            dl_pathloss: 10f64.powf(-95.0 / 10.0),
            ul_angle_deg: -30.0,
            ul_pathloss: 10f64.powf(-95.0 / 10.0),
            rng_seed: seed,
        };
        let channels = crate::scenario::build_channels(&scenario).unwrap();
        ProblemSpec {
            scenario,
            channels,
            rho_s: 10f64.powf(rho_db / 10.0),
            mode,
            settings: ScaSettings::default(),
        }
    }

    fn random_psd(n: usize, trace: f64, rng: &mut ChaCha12Rng) -> HermitianMatrix {
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let raw = &a * a.adjoint();
        let tr = raw.trace().re;
        HermitianMatrix::from_congruence(raw, true).scale(trace / tr)
    }

    fn isotropic_state(spec: &ProblemSpec) -> SCAState {
        let n = spec.scenario.n_tx;
        let design = TransmitDesign {
            v_s: HermitianMatrix::scaled_identity(n, spec.scenario.bs_power_max / (2.0 * n as f64)),
            v_c: HermitianMatrix::scaled_identity(n, spec.scenario.bs_power_max / (2.0 * n as f64)),
            p: spec.scenario.ul_power_max,
        };
        SCAState::at_design(design, spec, 0).unwrap()
    }

    #[test]
    fn dl_bound_tight_at_point_and_below_elsewhere() {
        let spec = small_spec(1, OptimizationMode::Iqscc, -3.5);
        let s2 = spec.scenario.noise_power;
        let g = &spec.channels.g;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let v_s_prev = random_psd(8, 0.4, &mut rng);
            let v_c = random_psd(8, 0.4, &mut rng);
            // Tight at the expansion point.
            let lb = dl_rate_lower_bound(&v_s_prev, &v_c, &v_s_prev, g, s2);
            let exact = ((v_s_prev.quadratic_form(g) + v_c.quadratic_form(g) + s2)
                / (v_s_prev.quadratic_form(g) + s2))
                .log2();
            assert_relative_eq!(lb, exact, max_relative = 1e-10);
            // Below the true rate anywhere else.
            let v_s = random_psd(8, 0.5, &mut rng);
            let lb = dl_rate_lower_bound(&v_s, &v_c, &v_s_prev, g, s2);
            let exact = ((v_s.quadratic_form(g) + v_c.quadratic_form(g) + s2)
                / (v_s.quadratic_form(g) + s2))
                .log2();
            assert!(lb <= exact + 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn dl_bound_zero_sensing_case() {
        let spec = small_spec(2, OptimizationMode::Iqscc, -3.5);
        let s2 = spec.scenario.noise_power;
        let g = &spec.channels.g;
        let zero = HermitianMatrix::zeros(8);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let v_c = random_psd(8, 0.7, &mut rng);
        let lb = dl_rate_lower_bound(&zero, &v_c, &zero, g, s2);
        assert_relative_eq!(lb, (1.0 + v_c.quadratic_form(g) / s2).log2(), max_relative = 1e-12);
    }

    #[test]
    fn radar_lhs_tangent_and_under_estimates() {
        let spec = small_spec(3, OptimizationMode::Conventional, 2.9);
        let state = isotropic_state(&spec);
        let terms = radar_constraint_terms(
            &state,
            &spec.channels,
            spec.scenario.target_angle_deg,
            spec.rho_s,
            spec.scenario.target_reflectivity,
            spec.mode,
        )
        .unwrap();
        // Tangent at the expansion point.
        let ar = steering_rx(spec.scenario.target_angle_deg, spec.scenario.n_rx);
        let y = hermitian_solve(&state.psi, &ar).unwrap();
        let exact0 = (ar.adjoint() * &y)[(0, 0)].re;
        assert_relative_eq!(terms.lhs.eval(&state.design), exact0, max_relative = 1e-10);
        // Under-estimates the true quadratic form at perturbed designs.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = TransmitDesign {
                v_s: random_psd(8, rng.gen::<f64>() * 0.5, &mut rng),
                v_c: random_psd(8, rng.gen::<f64>() * 0.5, &mut rng),
                p: rng.gen::<f64>() * spec.scenario.ul_power_max,
            };
            let psi = crate::scenario::assemble_psi(
                d.p,
                &d.total_covariance(),
                &spec.channels,
                spec.scenario.noise_power,
            );
            let y = hermitian_solve(&psi, &ar).unwrap();
            let exact = (ar.adjoint() * &y)[(0, 0)].re;
            assert!(
                terms.lhs.eval(&d) <= exact * (1.0 + 1e-10),
                "linearization over-estimated: {} vs {exact}",
                terms.lhs.eval(&d)
            );
        }
        // RHS gain at a pure matched covariance.
        let at = steering_tx(spec.scenario.target_angle_deg, spec.scenario.n_tx);
        let c = 0.37;
        let d = TransmitDesign {
            v_s: HermitianMatrix::from_outer(&at, c),
            v_c: HermitianMatrix::zeros(8),
            p: 0.0,
        };
        assert_relative_eq!(terms.gain.eval(&d), c, max_relative = 1e-12);
        assert_relative_eq!(
            terms.rhs_scale / terms.gain.eval(&d),
            spec.rho_s / (spec.scenario.target_reflectivity * c),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ul_terms_tangent_and_tangent_bound_below_square() {
        let spec = small_spec(4, OptimizationMode::Iqscc, -3.5);
        let state = isotropic_state(&spec);
        let terms = ul_constraint_terms(&state, &spec.channels).unwrap();
        // Constraint 1 tight at the consistent point: x^2 = p h' Phi^{-1} h.
        let t0 = terms.t_lin.eval(&state.design);
        assert_relative_eq!(state.x * state.x / state.design.p, t0, max_relative = 1e-9);
        // u-bound equals x_prev^2 at x = x_prev and sits below x^2 elsewhere.
        let xp = terms.x_prev;
        let bound = |x: f64| xp * xp + 2.0 * xp * (x - xp);
        assert_relative_eq!(bound(xp), xp * xp, max_relative = 1e-12);
        for i in 0..100 {
            let x = 0.02 * i as f64 * xp;
            assert!(bound(x) <= x * x + 1e-12 * (1.0 + x * x));
        }
        // T under-estimates the true value at perturbed designs.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..50 {
            let d = TransmitDesign {
                v_s: random_psd(8, rng.gen::<f64>() * 0.5, &mut rng),
                v_c: random_psd(8, rng.gen::<f64>() * 0.5, &mut rng),
                p: state.design.p,
            };
            let phi = crate::scenario::assemble_phi(
                &d.total_covariance(),
                &spec.channels,
                spec.scenario.noise_power,
            );
            let z = hermitian_solve(&phi, &spec.channels.h).unwrap();
            let exact = (spec.channels.h.adjoint() * &z)[(0, 0)].re;
            assert!(terms.t_lin.eval(&d) <= exact * (1.0 + 1e-10));
        }
    }

    #[test]
    fn extract_rank1_recovers_pure_beamformer() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let v = ComplexVector::from_fn(6, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let v_c = HermitianMatrix::from_outer(&v, 1.0);
        let (rec, gap) = extract_rank1(&v_c);
        assert!(gap < 1e-12);
        // Recovered up to a global phase.
        let overlap = (v.adjoint() * &rec)[(0, 0)].norm() / (v.norm() * rec.norm());
        assert_relative_eq!(overlap, 1.0, max_relative = 1e-10);
        assert_relative_eq!(rec.norm_squared(), v.norm_squared(), max_relative = 1e-10);
    }

    #[test]
    fn extract_rank1_identity_gap_and_residual() {
        let id = HermitianMatrix::scaled_identity(2, 0.5);
        let (_, gap) = extract_rank1(&id);
        assert_relative_eq!(gap, 0.5, max_relative = 1e-12);
        let (_, zero_gap) = extract_rank1(&HermitianMatrix::zeros(3));
        assert_eq!(zero_gap, 0.0);
        // Residual of the rank-1 approximation matches the trailing
        // eigenvalues.
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let v_c = random_psd(5, 1.0, &mut rng);
        let (vec, _) = extract_rank1(&v_c);
        let approx_m = HermitianMatrix::from_outer(&vec, 1.0);
        let resid = (v_c.matrix() - approx_m.matrix()).norm();
        let eigs = v_c.eigenvalues_desc();
        let tail: f64 = eigs[1..].iter().map(|e| e * e).sum::<f64>().sqrt();
        assert_relative_eq!(resid, tail, max_relative = 1e-8);
    }

    #[test]
    fn derive_rho_s_cs_paper_point() {
        let ds = DetectionSpec {
            pd_min: 2.7e-3,
            pf_max: 1e-6,
            k: 1,
            protocol: crate::detection::Protocol::Cs,
            frequency_hz: 24e9,
            temperature_k: 293.0,
            transmissivity: 1e-11,
            signal_photons: None,
        };
        let rho = derive_rho_s(&ds).unwrap();
        assert!((10.0 * rho.log10() - 2.9).abs() < 0.05);
    }

    #[test]
    fn subproblem_beats_brute_force_grid() {
        // Two-antenna toy instance (interference-free: a 2-element receive
        // array cannot null three clutter sources, which would make the
        // isotropic start radar-infeasible): the barrier optimum must
        // dominate an exhaustive grid over diagonal-plus-rank-one
        // covariance pairs evaluated on the same surrogate.
        let mut spec = small_spec(11, OptimizationMode::Conventional, -10.0);
        spec.scenario.n_tx = 2;
        spec.scenario.n_rx = 2;
        spec.scenario.interferers.clear();
        spec.scenario.si_power = 0.0;
        spec.channels = crate::scenario::build_channels(&spec.scenario).unwrap();
        let state = isotropic_state(&spec);
        let (next, surrogate, _) = solve_subproblem(&state, &spec).unwrap();
        assert!(next.design.check_budgets(1.0, 0.2));

        let radar = radar_constraint_terms(
            &state, &spec.channels, 0.0, spec.rho_s, spec.scenario.target_reflectivity, spec.mode,
        )
        .unwrap();
        let ul = ul_constraint_terms(&state, &spec.channels).unwrap();
        let g = &spec.channels.g;
        let s2 = spec.scenario.noise_power;

        let unit = |phi: f64, psi: f64| {
            ComplexVector::from_vec(vec![
                Complex64::new(phi.cos(), 0.0),
                Complex64::from_polar(phi.sin(), psi),
            ])
        };
        let mut best = f64::NEG_INFINITY;
        let steps = 6;
        for ds in 0..steps {
            for bs in 0..steps {
                for dc in 0..steps {
                    for bc in 0..steps {
                        let (a_s, b_s) = (0.5 * ds as f64 / steps as f64, 0.9 * bs as f64 / steps as f64);
                        let (a_c, b_c) = (0.5 * dc as f64 / steps as f64, 0.9 * bc as f64 / steps as f64);
                        if 2.0 * (a_s + a_c) + b_s + b_c > 1.0 {
                            continue;
                        }
                        for phis in 0..4 {
                            for phic in 0..4 {
                                for &p in &[1e-4, 0.1, 0.2] {
                                    let v_s = HermitianMatrix::scaled_identity(2, a_s)
                                        .add(&HermitianMatrix::from_outer(
                                            &unit(0.4 * phis as f64, 0.7), b_s,
                                        ));
                                    let v_c = HermitianMatrix::scaled_identity(2, a_c)
                                        .add(&HermitianMatrix::from_outer(
                                            &unit(0.4 * phic as f64, -0.3), b_c,
                                        ));
                                    let d = TransmitDesign { v_s, v_c, p };
                                    // Linearized feasibility.
                                    let z = radar.gain.eval(&d);
                                    if z <= 0.0 || radar.lhs.eval(&d) < radar.rhs_scale / z {
                                        continue;
                                    }
                                    let t = ul.t_lin.eval(&d);
                                    if t <= 0.0 {
                                        continue;
                                    }
                                    let x = (p * t).sqrt();
                                    let u = (ul.x_prev * ul.x_prev
                                        + 2.0 * ul.x_prev * (x - ul.x_prev))
                                        .max(0.0);
                                    let val = (1.0 + u).log2()
                                        + dl_rate_lower_bound(&d.v_s, &d.v_c, &state.design.v_s, g, s2);
                                    best = best.max(val);
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(
            surrogate >= best - 1e-3,
            "solver {surrogate} vs grid {best}"
        );
    }
}
