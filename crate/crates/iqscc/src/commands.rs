//! Experiment orchestration and persistence: every CLI subcommand is a
//! function here that computes one campaign and writes CSV/JSON artifacts.
//!
//! Output contract: CSV files are UTF-8 with a fixed header row, '.' decimal
//! separator, and empty fields for missing values; the design report is
//! JSON with eigenvalues sorted descending and complex entries as [re, im]
//! pairs. Identical config + seed produces byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{beampattern_gain, default_beampattern_grid, TransmitDesign};
use crate::config::{ConfigError, RunConfig};
use crate::detection::{
    cs_params, cw_params, kay_pd, marcum_pd, mc_validate, qi_moment_oracle, qi_params,
    required_sinr, roc_pd, thermal_photons, DetectionError, Protocol,
};
use crate::numerics::HermitianMatrix;
use crate::par;
use crate::sca::{
    dl_rate_lower_bound, extract_rank1, radar_constraint_terms, run_sca, ul_constraint_terms,
    OptimizationMode, ProblemSpec, SCAState, ScaError,
};
use crate::scenario::build_channels;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no design report found at {0}; run `optimize` first")]
    MissingDesign(PathBuf),
    #[error("{failures} validation check(s) failed")]
    ValidationFailed { failures: usize },
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

impl CliError {
    /// Stable process exit codes: 0 success, 2 infeasible, 3 solver
    /// failure, 4 config error, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sca(ScaError::Infeasible { .. }) => 2,
            CliError::Sca(ScaError::SolverFailure { .. }) => 3,
            CliError::Config(_) | CliError::BadArgument(_) | CliError::MissingDesign(_) => 4,
            CliError::Detection(_) => 4,
            CliError::Sca(_) => 3,
            CliError::Io { .. } | CliError::ValidationFailed { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Deterministic, readable float formatting for CSV fields.
fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-4..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut buf = String::with_capacity(rows.len() * 48 + header.len() + 1);
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(buf.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

fn parse_protocol_list(s: &str) -> Result<Vec<Protocol>, CliError> {
    s.split(',')
        .map(|p| match p.trim() {
            "cw" => Ok(Protocol::Cw),
            "cs" => Ok(Protocol::Cs),
            "qi" => Ok(Protocol::Qi),
            other => Err(CliError::BadArgument(format!(
                "unknown protocol \"{other}\" (expected cw, cs, or qi)"
            ))),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// thermal
// ---------------------------------------------------------------------------

/// Sweep the thermal photon occupation over a log-spaced frequency grid for
/// each temperature. Writes `thermal.csv`.
pub fn cmd_thermal(
    f_min_hz: f64,
    f_max_hz: f64,
    points: usize,
    temperatures_k: &[f64],
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    if !(f_min_hz > 0.0 && f_max_hz > f_min_hz && points >= 2) {
        return Err(CliError::BadArgument(
            "thermal sweep needs 0 < f_min < f_max and at least 2 points".into(),
        ));
    }
    let log_min = f_min_hz.log10();
    let log_max = f_max_hz.log10();
    let mut rows = Vec::new();
    for &t in temperatures_k {
        for i in 0..points {
            let f = 10f64.powf(log_min + (log_max - log_min) * i as f64 / (points - 1) as f64);
            rows.push(vec![fmt_f64(f), fmt_f64(t), fmt_f64(thermal_photons(f, t))]);
        }
    }
    let path = out_dir.join("thermal.csv");
    write_csv(&path, "frequency_hz,temperature_k,thermal_photons", &rows)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// roc
// ---------------------------------------------------------------------------

/// Detection probability versus SINR for each protocol and false-alarm
/// level; CW rows carry the coherent and non-coherent reference columns.
/// Writes `roc.csv`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_roc(
    protocols: &str,
    gamma_min_db: f64,
    gamma_max_db: f64,
    points: usize,
    pf_list: &[f64],
    k: u32,
    n_n: f64,
    eta: f64,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let protocols = parse_protocol_list(protocols)?;
    if points < 2 || gamma_max_db <= gamma_min_db {
        return Err(CliError::BadArgument("roc sweep needs points >= 2 and a nonempty range".into()));
    }
    let mut rows = Vec::new();
    for &protocol in &protocols {
        for &pf in pf_list {
            for i in 0..points {
                let gamma_db =
                    gamma_min_db + (gamma_max_db - gamma_min_db) * i as f64 / (points - 1) as f64;
                let gamma = 10f64.powf(gamma_db / 10.0);
                let params = match protocol {
                    Protocol::Cw => cw_params(gamma, k),
                    Protocol::Cs => cs_params(gamma, n_n, k),
                    Protocol::Qi => qi_params(gamma, n_n, eta, k)?,
                };
                let pd = roc_pd(&params, pf)?;
                let (kay_ref, marcum_ref) = if protocol == Protocol::Cw {
                    (
                        fmt_f64(kay_pd(gamma, k, pf)?),
                        fmt_f64(marcum_pd(gamma, pf)?),
                    )
                } else {
                    (String::new(), String::new())
                };
                rows.push(vec![
                    fmt_f64(gamma_db),
                    protocol.to_string(),
                    fmt_f64(pf),
                    fmt_f64(pd),
                    kay_ref,
                    marcum_ref,
                ]);
            }
        }
    }
    let path = out_dir.join("roc.csv");
    write_csv(&path, "gamma_db,protocol,pf,pd,pd_kay_ref,pd_marcum_ref", &rows)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// required-sinr
// ---------------------------------------------------------------------------

/// Required SINR versus detection probability at fixed false-alarm level.
/// Rows where the inversion fails (non-monotone regime or unattainable Pd)
/// keep the grid point and leave the SINR field empty. Writes
/// `required_sinr.csv`.
#[allow(clippy::too_many_arguments)]
pub fn cmd_required_sinr(
    protocols: &str,
    pd_min: f64,
    pd_max: f64,
    points: usize,
    pf: f64,
    k: u32,
    n_n: f64,
    eta: f64,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let protocols = parse_protocol_list(protocols)?;
    if !(pd_min > 0.0 && pd_max < 1.0 && pd_max > pd_min && points >= 2) {
        return Err(CliError::BadArgument(
            "required-sinr sweep needs 0 < pd_min < pd_max < 1 and points >= 2".into(),
        ));
    }
    let mut rows = Vec::new();
    for &protocol in &protocols {
        for i in 0..points {
            let pd = pd_min + (pd_max - pd_min) * i as f64 / (points - 1) as f64;
            let field = match required_sinr(protocol, pd, pf, k, n_n, eta) {
                Ok(gamma) if gamma > 0.0 => fmt_f64(10.0 * gamma.log10()),
                // Met at zero SINR: no finite dB value.
                Ok(_) => String::new(),
                Err(e) => {
                    log::warn!("required-sinr {protocol} at pd={pd}: {e}");
                    String::new()
                }
            };
            rows.push(vec![fmt_f64(pd), protocol.to_string(), field]);
        }
    }
    let path = out_dir.join("required_sinr.csv");
    write_csv(&path, "pd,protocol,required_sinr_db", &rows)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

/// Serialized Hermitian matrix: eigenvalues descending, eigenvectors as
/// columns with [re, im] entry pairs.
#[derive(Debug, Serialize, Deserialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<[f64; 2]>>,
}

impl EigenReport {
    fn from_matrix(m: &HermitianMatrix) -> Self {
        let eig = m.matrix().clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = order
            .iter()
            .map(|&i| {
                eig.eigenvectors
                    .column(i)
                    .iter()
                    .map(|c| [c.re, c.im])
                    .collect()
            })
            .collect();
        Self { eigenvalues, eigenvectors }
    }

    fn to_matrix(&self) -> Result<HermitianMatrix, CliError> {
        let n = self.eigenvalues.len();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for (lam, vec) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            if vec.len() != n {
                return Err(CliError::BadArgument("inconsistent eigenvector length".into()));
            }
            let v = nalgebra::DVector::from_iterator(
                n,
                vec.iter().map(|&[re, im]| Complex64::new(re, im)),
            );
            m += (&v * v.adjoint()).scale(*lam);
        }
        Ok(HermitianMatrix::from_congruence(m, true))
    }
}

/// Final-design report written next to the convergence trace.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignReport {
    pub mode: String,
    pub seed: u64,
    pub rho_s_db: f64,
    pub sum_rate_bps_hz: f64,
    pub radar_sinr_db: f64,
    pub ul_power_watt: f64,
    pub rank1_gap: f64,
    pub iterations: usize,
    pub restoration_iterations: usize,
    pub v_s: EigenReport,
    pub v_c: EigenReport,
}

fn formats_enabled(cfg: &RunConfig) -> (bool, bool) {
    let csv = cfg.output.formats.iter().any(|f| f == "csv");
    let json = cfg.output.formats.iter().any(|f| f == "json");
    (csv, json)
}

/// Run the optimizer for one mode and persist the trace and design report.
/// With `sweep > 1`, fans `sweep` consecutive seeds across the thread pool,
/// each into its own `run_<seed>` subdirectory.
pub fn cmd_optimize(
    cfg: &RunConfig,
    mode: OptimizationMode,
    out_dir: &Path,
    seed_override: Option<u64>,
    sweep: usize,
) -> Result<Vec<PathBuf>, CliError> {
    let base_seed = seed_override.unwrap_or(cfg.seed);
    if sweep <= 1 {
        return optimize_single(cfg, mode, out_dir, base_seed).map(|p| vec![p]);
    }
    let results = par::map_indexed(sweep, |i| {
        let seed = base_seed + i as u64;
        let dir = out_dir.join(format!("run_{seed}"));
        optimize_single(cfg, mode, &dir, seed)
    });
    let mut paths = Vec::new();
    for r in results {
        paths.push(r?);
    }
    Ok(paths)
}

fn optimize_single(
    cfg: &RunConfig,
    mode: OptimizationMode,
    out_dir: &Path,
    seed: u64,
) -> Result<PathBuf, CliError> {
    let scenario = cfg.to_scenario(seed);
    let channels = build_channels(&scenario).map_err(|e| ScaError::InvalidProblem(e.to_string()))?;
    let rho_s = cfg.rho_s_linear(mode)?;
    let spec = ProblemSpec {
        scenario,
        channels,
        rho_s,
        mode,
        settings: cfg.sca_settings(),
    };
    let outcome = run_sca(&spec, None)?;

    let (csv, json) = formats_enabled(cfg);
    let trace_path = out_dir.join(format!("trace_{mode}.csv"));
    if csv {
        let rows: Vec<Vec<String>> = outcome
            .trace
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    fmt_f64(r.surrogate_objective),
                    fmt_f64(r.sum_rate),
                    fmt_f64(r.radar_sinr_db),
                    (r.feasible as u8).to_string(),
                    r.solver_status.to_string(),
                ]
            })
            .collect();
        write_csv(
            &trace_path,
            "iteration,surrogate_objective_bps_hz,sum_rate_bps_hz,radar_sinr_db,feasible,solver_status",
            &rows,
        )?;
    }
    if json {
        let (_, gap) = extract_rank1(&outcome.design.v_c);
        let report = DesignReport {
            mode: mode.to_string(),
            seed,
            rho_s_db: 10.0 * rho_s.log10(),
            sum_rate_bps_hz: outcome.sum_rate,
            radar_sinr_db: 10.0 * outcome.radar_sinr.log10(),
            ul_power_watt: outcome.design.p,
            rank1_gap: gap,
            iterations: outcome.trace.len(),
            restoration_iterations: outcome.restoration_iterations,
            v_s: EigenReport::from_matrix(&outcome.design.v_s),
            v_c: EigenReport::from_matrix(&outcome.design.v_c),
        };
        let path = out_dir.join(format!("design_{mode}.json"));
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(trace_path)
}

// ---------------------------------------------------------------------------
// beampattern
// ---------------------------------------------------------------------------

/// Evaluate the transmit beampatterns of a completed optimize run (its
/// design report is consumed from the output directory). Writes
/// `beampattern_<mode>.csv` with communication and sensing gains in dB.
pub fn cmd_beampattern(
    cfg: &RunConfig,
    mode: OptimizationMode,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let design_path = out_dir.join(format!("design_{mode}.json"));
    let text = fs::read_to_string(&design_path)
        .map_err(|_| CliError::MissingDesign(design_path.clone()))?;
    let report: DesignReport = serde_json::from_str(&text)
        .map_err(|e| CliError::BadArgument(format!("cannot parse {design_path:?}: {e}")))?;
    let v_s = report.v_s.to_matrix()?;
    let v_c = report.v_c.to_matrix()?;
    let _ = cfg;

    let grid = default_beampattern_grid();
    let comm = beampattern_gain(&v_c, &grid);
    let sens = beampattern_gain(&v_s, &grid);
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, &angle)| vec![fmt_f64(angle), fmt_f64(comm[i].1), fmt_f64(sens[i].1)])
        .collect();
    let path = out_dir.join(format!("beampattern_{mode}.csv"));
    write_csv(&path, "angle_deg,comm_gain_db,sens_gain_db", &rows)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

type CheckResult = Result<(), String>;

fn check(name: &str, result: CheckResult, failures: &mut usize) {
    match result {
        Ok(()) => println!("PASS {name}"),
        Err(msg) => {
            println!("FAIL {name}: {msg}");
            *failures += 1;
        }
    }
}

/// Run the property and oracle suite against a configuration: closed-form
/// beamformer optimality, the quantum-moment oracle, the reference ROC
/// identities, Monte-Carlo agreement, and the SCA linearization tangency.
/// Prints one PASS/FAIL line per property.
pub fn cmd_validate(cfg: &RunConfig, seed_override: Option<u64>) -> Result<(), CliError> {
    let seed = seed_override.unwrap_or(cfg.seed);
    let mut failures = 0;
    check("beamformer_radar_optimality", validate_radar_optimality(seed), &mut failures);
    check("beamformer_ul_optimality", validate_ul_optimality(seed), &mut failures);
    check("qi_moment_closed_forms", validate_qi_moments(seed), &mut failures);
    check("kay_cw_equivalence", validate_kay_equivalence(0.0), &mut failures);
    check("cs_cw_ratio", validate_cs_ratio(), &mut failures);
    check("mc_roc_agreement", validate_mc_roc(seed), &mut failures);
    check("sca_tangency", validate_tangency(cfg, seed), &mut failures);
    check("channel_determinism", validate_channel_determinism(cfg, seed), &mut failures);
    if failures > 0 {
        return Err(CliError::ValidationFailed { failures });
    }
    Ok(())
}

fn validation_scenario(seed: u64) -> crate::scenario::Scenario {
    crate::scenario::Scenario {
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
    }
}

fn random_psd(n: usize, trace: f64, rng: &mut rand_chacha::ChaCha12Rng) -> HermitianMatrix {
    use rand::Rng;
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let raw = &a * a.adjoint();
    let tr = raw.trace().re;
    HermitianMatrix::from_congruence(raw, true).scale(trace / tr)
}

fn random_design(
    s: &crate::scenario::Scenario,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> TransmitDesign {
    use rand::Rng;
    TransmitDesign {
        v_s: random_psd(s.n_tx, 0.4 * s.bs_power_max, rng),
        v_c: random_psd(s.n_tx, 0.4 * s.bs_power_max, rng),
        p: rng.gen::<f64>() * s.ul_power_max,
    }
}

fn validate_radar_optimality(seed: u64) -> CheckResult {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    for trial in 0..20 {
        let s = validation_scenario(seed.wrapping_add(trial));
        let ch = build_channels(&s).map_err(|e| e.to_string())?;
        let d = random_design(&s, &mut rng);
        let u_star = crate::beamforming::opt_rx_radar(&d, &ch, s.noise_power, s.target_angle_deg)
            .map_err(|e| e.to_string())?;
        let best = crate::beamforming::sinr_radar(
            &u_star, &d, &ch, s.noise_power, s.target_angle_deg, s.target_reflectivity,
        )
        .map_err(|e| e.to_string())?;
        let closed = crate::beamforming::sinr_radar_opt(
            &d, &ch, s.noise_power, s.target_angle_deg, s.target_reflectivity,
            crate::beamforming::RadarSinrMode::Total,
        )
        .map_err(|e| e.to_string())?;
        if (best - closed).abs() > 1e-9 * closed {
            return Err(format!("closed form mismatch: {best} vs {closed}"));
        }
        for _ in 0..200 {
            let u = nalgebra::DVector::from_fn(s.n_rx, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let v = crate::beamforming::sinr_radar(
                &u, &d, &ch, s.noise_power, s.target_angle_deg, s.target_reflectivity,
            )
            .map_err(|e| e.to_string())?;
            if v > best * (1.0 + 1e-9) {
                return Err(format!("random beamformer beat the optimum: {v} > {best}"));
            }
        }
    }
    Ok(())
}

fn validate_ul_optimality(seed: u64) -> CheckResult {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x5c5c);
    for trial in 0..20 {
        let s = validation_scenario(seed.wrapping_add(100 + trial));
        let ch = build_channels(&s).map_err(|e| e.to_string())?;
        let mut d = random_design(&s, &mut rng);
        d.p = d.p.max(0.01 * s.ul_power_max);
        let w_star = crate::beamforming::opt_rx_ul(&d, &ch, s.noise_power).map_err(|e| e.to_string())?;
        let best = crate::beamforming::sinr_ul(&w_star, &d, &ch, s.noise_power).map_err(|e| e.to_string())?;
        let closed = crate::beamforming::sinr_ul_opt(&d, &ch, s.noise_power).map_err(|e| e.to_string())?;
        if (best - closed).abs() > 1e-9 * closed {
            return Err(format!("closed form mismatch: {best} vs {closed}"));
        }
        for _ in 0..200 {
            let w = nalgebra::DVector::from_fn(s.n_rx, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let v = crate::beamforming::sinr_ul(&w, &d, &ch, s.noise_power).map_err(|e| e.to_string())?;
            if v > best * (1.0 + 1e-9) {
                return Err(format!("random beamformer beat the optimum: {v} > {best}"));
            }
        }
    }
    Ok(())
}

fn validate_qi_moments(seed: u64) -> CheckResult {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for _ in 0..50 {
        let n_q = 10f64.powf(rng.gen_range(-4.0..2.0));
        let eta = 10f64.powf(rng.gen_range(-6.0..-0.05));
        let n_n = 10f64.powf(rng.gen_range(-1.0..3.0));
        let m = qi_moment_oracle(n_q, eta, n_n);
        let mean = 4.0 * (eta * n_q * (n_q + 1.0)).sqrt();
        let var1 = 4.0 * (n_q * (4.0 * eta * n_q + 3.0 * eta + 2.0 * n_n + 1.0) + n_n + 1.0);
        if (m.mean_h1 - mean).abs() > 1e-9 * mean.abs().max(1e-30)
            || (m.var_h1 - var1).abs() > 1e-9 * var1
        {
            return Err(format!("oracle mismatch at N_q={n_q}, eta={eta}, N_n={n_n}"));
        }
    }
    Ok(())
}

/// Kay-reference identity; `perturbation` shifts one side and exists so the
/// suite's sensitivity is itself testable.
fn validate_kay_equivalence(perturbation: f64) -> CheckResult {
    for &gamma in &[0.1, 1.0, 5.0] {
        for &k in &[1u32, 16, 256] {
            for &pf in &[1e-2, 1e-4, 1e-6] {
                let a = roc_pd(&cw_params(gamma, k), pf).map_err(|e| e.to_string())? + perturbation;
                let b = kay_pd(2.0 * gamma, k, pf).map_err(|e| e.to_string())?;
                if (a - b).abs() > 1e-12 {
                    return Err(format!("gamma={gamma} k={k} pf={pf}: {a} vs {b}"));
                }
            }
        }
    }
    Ok(())
}

fn validate_cs_ratio() -> CheckResult {
    for &n_n in &[0.5, 10.0, 253.9, 1e6] {
        let ratio = cs_params(1.7, n_n, 4).a2 / cw_params(1.7, 4).a2;
        let expect = (2.0 * n_n / (2.0 * n_n + 1.0)).sqrt();
        if (ratio - expect).abs() > 1e-12 {
            return Err(format!("N_n={n_n}: ratio {ratio} vs {expect}"));
        }
    }
    Ok(())
}

fn validate_mc_roc(seed: u64) -> CheckResult {
    let params = cw_params(1.0, 16);
    let pf = 1e-2;
    let trials = 200_000;
    let analytic = roc_pd(&params, pf).map_err(|e| e.to_string())?;
    let r1 = mc_validate(&params, pf, 16, trials, seed).map_err(|e| e.to_string())?;
    let r2 = mc_validate(&params, pf, 16, trials, seed).map_err(|e| e.to_string())?;
    if r1 != r2 {
        return Err("seeded Monte Carlo is not reproducible".into());
    }
    let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    if (r1.pd_hat - analytic).abs() > 4.0 * sigma {
        return Err(format!("pd_hat {} vs analytic {analytic} (4-sigma {})", r1.pd_hat, 4.0 * sigma));
    }
    Ok(())
}

fn validate_tangency(cfg: &RunConfig, seed: u64) -> CheckResult {
    let scenario = cfg.to_scenario(seed);
    let channels = build_channels(&scenario).map_err(|e| e.to_string())?;
    let rho_s = cfg
        .rho_s_linear(OptimizationMode::Conventional)
        .map_err(|e| e.to_string())?;
    let spec = ProblemSpec {
        scenario: scenario.clone(),
        channels,
        rho_s,
        mode: OptimizationMode::Conventional,
        settings: cfg.sca_settings(),
    };
    let design = TransmitDesign {
        v_s: HermitianMatrix::scaled_identity(scenario.n_tx, scenario.bs_power_max / (2.0 * scenario.n_tx as f64)),
        v_c: HermitianMatrix::scaled_identity(scenario.n_tx, scenario.bs_power_max / (2.0 * scenario.n_tx as f64)),
        p: scenario.ul_power_max,
    };
    let state = SCAState::at_design(design.clone(), &spec, 0).map_err(|e| e.to_string())?;

    // Downlink bound is tight at the expansion point.
    let lb = dl_rate_lower_bound(&design.v_s, &design.v_c, &design.v_s, &spec.channels.g, scenario.noise_power);
    let exact = (1.0 + crate::beamforming::sinr_dl(&design, &spec.channels, scenario.noise_power)).log2();
    if (lb - exact).abs() > 1e-10 * exact.abs().max(1.0) {
        return Err(format!("dl bound not tangent: {lb} vs {exact}"));
    }
    // Radar LHS tangency.
    let radar = radar_constraint_terms(
        &state, &spec.channels, scenario.target_angle_deg, rho_s,
        scenario.target_reflectivity, OptimizationMode::Conventional,
    )
    .map_err(|e| e.to_string())?;
    let lhs_at_point = radar.lhs.eval(&design);
    let ar = crate::scenario::steering_rx(scenario.target_angle_deg, scenario.n_rx);
    let y = crate::numerics::hermitian_solve(&state.psi, &ar).map_err(|e| e.to_string())?;
    let exact = (ar.adjoint() * &y)[(0, 0)].re;
    if (lhs_at_point - exact).abs() > 1e-10 * exact {
        return Err(format!("radar lhs not tangent: {lhs_at_point} vs {exact}"));
    }
    // Uplink constraint 1 tight at the consistent auxiliaries.
    let ul = ul_constraint_terms(&state, &spec.channels).map_err(|e| e.to_string())?;
    let t_at_point = ul.t_lin.eval(&design);
    let lhs = state.x * state.x / design.p;
    if (t_at_point - lhs).abs() > 1e-9 * t_at_point {
        return Err(format!("ul constraint not tangent: {t_at_point} vs {lhs}"));
    }
    Ok(())
}

fn validate_channel_determinism(cfg: &RunConfig, seed: u64) -> CheckResult {
    let s = cfg.to_scenario(seed);
    let a = build_channels(&s).map_err(|e| e.to_string())?;
    let b = build_channels(&s).map_err(|e| e.to_string())?;
    if a != b {
        return Err("channel generation is not deterministic".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const CFG: &str = r#"
seed = 3

[scenario]
n_tx = 8
n_rx = 8
bs_power_max_watt = 1.0
ul_power_max_watt = 0.2
noise_power_watt = 5.0e-12
target_reflectivity_db = -110.0
dl_pathloss_db = -95.0
ul_pathloss_db = -95.0
si_power_db = -115.0

[radar.rho_s_db]
conventional = 2.9
iqscc = -3.5
"#;

    #[test]
    fn thermal_csv_shape_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = cmd_thermal(1e9, 1e12, 10, &[0.0, 293.0], dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "frequency_hz,temperature_k,thermal_photons");
        assert_eq!(lines.len(), 1 + 20);
        // T = 0 rows report zero photons.
        for l in lines.iter().skip(1).take(10) {
            assert!(l.ends_with(",0"), "{l}");
        }
        // Monotone decreasing in frequency at fixed T.
        let photons: Vec<f64> = lines
            .iter()
            .skip(11)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        for w in photons.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn roc_csv_reference_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = cmd_roc("cw,cs", -5.0, 10.0, 4, &[1e-4], 1, 253.9, 0.01, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "gamma_db,protocol,pf,pd,pd_kay_ref,pd_marcum_ref");
        let cw_rows: Vec<&&str> = lines.iter().filter(|l| l.contains(",cw,")).collect();
        let cs_rows: Vec<&&str> = lines.iter().filter(|l| l.contains(",cs,")).collect();
        assert_eq!(cw_rows.len(), 4);
        assert_eq!(cs_rows.len(), 4);
        for r in cw_rows {
            let fields: Vec<&str> = r.split(',').collect();
            assert!(!fields[4].is_empty() && !fields[5].is_empty());
        }
        for r in cs_rows {
            let fields: Vec<&str> = r.split(',').collect();
            assert!(fields[4].is_empty() && fields[5].is_empty());
        }
    }

    #[test]
    fn required_sinr_csv_missing_values_for_qi() {
        let dir = tempfile::tempdir().unwrap();
        let path = cmd_required_sinr(
            "cs,qi", 1e-3, 0.99, 5, 1e-6, 1, 253.9, 1e-11, dir.path(),
        )
        .unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        // CS rows resolve; QI rows in this regime cannot be inverted and
        // stay empty rather than wrong.
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields[1] == "cs" {
                assert!(!fields[2].is_empty());
            } else {
                assert!(fields[2].is_empty());
            }
        }
    }

    #[test]
    fn validation_suite_passes_and_detects_perturbation() {
        assert!(validate_kay_equivalence(0.0).is_ok());
        assert!(validate_kay_equivalence(1e-9).is_err());
        assert!(validate_cs_ratio().is_ok());
        assert!(validate_qi_moments(11).is_ok());
        let cfg = parse_config(CFG).unwrap();
        assert!(validate_tangency(&cfg, 3).is_ok());
        assert!(validate_channel_determinism(&cfg, 3).is_ok());
    }

    #[test]
    fn fmt_f64_is_stable() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(2.9), "2.9");
        assert_eq!(fmt_f64(5e-12), "5e-12");
        assert_eq!(fmt_f64(-17.25), "-17.25");
        assert_eq!(fmt_f64(1.5e9), "1.5e9");
    }
}
