//! The convex subproblem behind each SCA iteration, solved by a log-barrier
//! interior-point method.
//!
//! Every way the subproblem sees a covariance is a quadratic form against
//! one of four fixed vectors — the downlink channel, the target transmit
//! steering vector, and the two whitened interference images `B^H y` and
//! `C^H z` — plus the trace in the power budget. Projecting a feasible
//! covariance onto the span of those vectors preserves all of them and can
//! only shrink the trace, so the subproblem restricted to that span (rank
//! <= 4) attains the same optimum. The solver therefore works on two r x r
//! Hermitian blocks with r <= 4 and three scalars, independent of the
//! antenna count, and lifts the blocks back at the end.
//!
//! The barrier is exact: log-det terms for the two PSD blocks, logs of the
//! scalar slacks (budget, boxes, the linearized radar constraint
//! `L >= c / z`, the quadratic-over-linear uplink constraint
//! `x^2 / p <= T`, and the tangent bound on `u`). Newton steps use analytic
//! gradients and Hessians; problems this size solve in microseconds and the
//! whole path is deterministic.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    radar_constraint_terms, ul_constraint_terms, AffineForm, ProblemSpec, SCAState, ScaError,
};
use crate::beamforming::TransmitDesign;
use crate::numerics::{ComplexVector, HermitianMatrix};

const LN_2: f64 = std::f64::consts::LN_2;

/// Outcome quality of one barrier solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    /// Central path followed to the target duality gap.
    Converged,
    /// Iteration caps hit before the gap target; the iterate is feasible
    /// but may be short of the KKT tolerance.
    MaxIterations,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverStatus::Converged => write!(f, "converged"),
            SolverStatus::MaxIterations => write!(f, "max_iterations"),
        }
    }
}

pub(crate) struct Solution {
    pub design: TransmitDesign,
    pub surrogate_bits: f64,
}

// ---------------------------------------------------------------------------
// Hermitian parameterization: an r x r Hermitian matrix as r^2 real numbers
// (diagonal first, then (re, im) pairs for i < j in row-major order).
// ---------------------------------------------------------------------------

struct HermBasis {
    r: usize,
}

impl HermBasis {
    fn count(&self) -> usize {
        self.r * self.r
    }

    fn off_diag_index(&self, i: usize, j: usize) -> usize {
        // Position of the (re, im) pair for entry (i, j), i < j.
        let mut idx = self.r;
        for a in 0..i {
            idx += 2 * (self.r - a - 1);
        }
        idx + 2 * (j - i - 1)
    }

    fn to_matrix(&self, q: &[f64]) -> DMatrix<Complex64> {
        let r = self.r;
        let mut m = DMatrix::zeros(r, r);
        for i in 0..r {
            m[(i, i)] = Complex64::new(q[i], 0.0);
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let k = self.off_diag_index(i, j);
                m[(i, j)] = Complex64::new(q[k], q[k + 1]);
                m[(j, i)] = Complex64::new(q[k], -q[k + 1]);
            }
        }
        m
    }

    fn from_matrix(&self, m: &DMatrix<Complex64>) -> Vec<f64> {
        let r = self.r;
        let mut q = vec![0.0; self.count()];
        for i in 0..r {
            q[i] = m[(i, i)].re;
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let k = self.off_diag_index(i, j);
                q[k] = m[(i, j)].re;
                q[k + 1] = m[(i, j)].im;
            }
        }
        q
    }

    /// Coefficients c with `w^H X(q) w = c . q`.
    fn quad_coeffs(&self, w: &ComplexVector) -> DVector<f64> {
        let r = self.r;
        let mut c = DVector::zeros(self.count());
        for i in 0..r {
            c[i] = w[i].norm_sqr();
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let k = self.off_diag_index(i, j);
                let cross = w[i].conj() * w[j];
                c[k] = 2.0 * cross.re;
                c[k + 1] = -2.0 * cross.im;
            }
        }
        c
    }

    /// Trace coefficients (ones on the diagonal parameters).
    fn trace_coeffs(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.count());
        for i in 0..self.r {
            c[i] = 1.0;
        }
        c
    }

    /// Gradient of `ln det X(q)` given `X^{-1}`.
    fn lndet_grad(&self, x_inv: &DMatrix<Complex64>) -> DVector<f64> {
        let r = self.r;
        let mut g = DVector::zeros(self.count());
        for i in 0..r {
            g[i] = x_inv[(i, i)].re;
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let k = self.off_diag_index(i, j);
                g[k] = 2.0 * x_inv[(i, j)].re;
                g[k + 1] = 2.0 * x_inv[(i, j)].im;
            }
        }
        g
    }

    /// Hessian of `ln det X(q)`: `H_kl = -Re tr(X^{-1} E_k X^{-1} E_l)`.
    fn lndet_hess(&self, x_inv: &DMatrix<Complex64>) -> DMatrix<f64> {
        let r = self.r;
        let n = self.count();
        // Materialize M_k = X^{-1} E_k for each parameter's basis matrix.
        let mut basis_products: Vec<DMatrix<Complex64>> = Vec::with_capacity(n);
        for k in 0..n {
            let e = self.basis_matrix(k);
            basis_products.push(x_inv * e);
        }
        let mut h = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in k..n {
                let mut tr = Complex64::new(0.0, 0.0);
                for a in 0..r {
                    for b in 0..r {
                        tr += basis_products[k][(a, b)] * basis_products[l][(b, a)];
                    }
                }
                h[(k, l)] = -tr.re;
                h[(l, k)] = -tr.re;
            }
        }
        h
    }

    fn basis_matrix(&self, k: usize) -> DMatrix<Complex64> {
        let r = self.r;
        let mut e = DMatrix::zeros(r, r);
        if k < r {
            e[(k, k)] = Complex64::new(1.0, 0.0);
            return e;
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let base = self.off_diag_index(i, j);
                if k == base {
                    e[(i, j)] = Complex64::new(1.0, 0.0);
                    e[(j, i)] = Complex64::new(1.0, 0.0);
                    return e;
                }
                if k == base + 1 {
                    e[(i, j)] = Complex64::new(0.0, 1.0);
                    e[(j, i)] = Complex64::new(0.0, -1.0);
                    return e;
                }
            }
        }
        unreachable!("basis index {k} out of range");
    }
}

// ---------------------------------------------------------------------------
// Reduced problem data
// ---------------------------------------------------------------------------

/// A scalar affine functional `coeffs . theta + constant`.
#[derive(Clone)]
struct Affine {
    coeffs: DVector<f64>,
    constant: f64,
}

impl Affine {
    fn eval(&self, theta: &DVector<f64>) -> f64 {
        self.coeffs.dot(theta) + self.constant
    }
}

struct Reduced {
    r: usize,
    has_ul: bool,
    basis: DMatrix<Complex64>,
    herm: HermBasis,
    /// `d(theta) = g^H V_t g + sigma^2`.
    dl_gain: Affine,
    /// Coefficients of `g^H V_s g` (the linearized concave-minus part).
    dl_slope: DVector<f64>,
    /// `1 / (d_prev ln 2)`.
    dl_gs: f64,
    /// Constant completing the surrogate, in bits.
    obj_const_bits: f64,
    /// Budget slack `P_b - tr(X_s) - tr(X_c)`.
    budget: Affine,
    /// Radar linearized LHS.
    radar_l: Affine,
    /// Radar gain `a_t^H V a_t` (mode-dependent V).
    radar_gain: Affine,
    /// `rho_s / |beta_0|^2`.
    radar_rhs: f64,
    /// Uplink linearized bound `T`.
    ul_t: Option<Affine>,
    x_prev: f64,
    p_max: f64,
}

impl Reduced {
    fn n(&self) -> usize {
        2 * self.herm.count() + if self.has_ul { 3 } else { 0 }
    }

    fn idx_p(&self) -> Option<usize> {
        self.has_ul.then(|| 2 * self.herm.count())
    }

    fn idx_x(&self) -> Option<usize> {
        self.has_ul.then(|| 2 * self.herm.count() + 1)
    }

    fn idx_u(&self) -> Option<usize> {
        self.has_ul.then(|| 2 * self.herm.count() + 2)
    }

    fn x_s(&self, theta: &DVector<f64>) -> DMatrix<Complex64> {
        self.herm.to_matrix(&theta.as_slice()[0..self.herm.count()])
    }

    fn x_c(&self, theta: &DVector<f64>) -> DMatrix<Complex64> {
        self.herm
            .to_matrix(&theta.as_slice()[self.herm.count()..2 * self.herm.count()])
    }

    /// Reduce a full-space affine form to coefficients over theta.
    fn reduce_form(&self, form: &AffineForm) -> Affine {
        let n = self.n();
        let m = self.herm.count();
        let mut coeffs = DVector::zeros(n);
        if let Some(w) = &form.vs_weight {
            let wt = self.basis.adjoint() * &w.vector;
            let c = self.herm.quad_coeffs(&wt) * w.scale;
            for k in 0..m {
                coeffs[k] += c[k];
            }
        }
        if let Some(w) = &form.vc_weight {
            let wt = self.basis.adjoint() * &w.vector;
            let c = self.herm.quad_coeffs(&wt) * w.scale;
            for k in 0..m {
                coeffs[m + k] += c[k];
            }
        }
        if let Some(ip) = self.idx_p() {
            coeffs[ip] = form.p_coeff;
        }
        Affine { coeffs, constant: form.constant }
    }
}

/// Orthonormal basis (modified Gram-Schmidt) for the span of the given
/// vectors, dropping directions below a relative tolerance.
fn orthonormal_span(vectors: &[ComplexVector]) -> DMatrix<Complex64> {
    let n = vectors[0].len();
    let mut cols: Vec<ComplexVector> = Vec::new();
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.unscale(norm0);
        // Two projection passes keep orthogonality tight for nearly
        // dependent inputs.
        for _ in 0..2 {
            for c in &cols {
                let proj = (c.adjoint() * &w)[(0, 0)];
                w -= c.clone().map(|e| e * proj);
            }
        }
        let norm = w.norm();
        if norm > 1e-10 {
            cols.push(w.unscale(norm));
        }
    }
    if cols.is_empty() {
        // Degenerate but harmless: keep a one-dimensional space.
        let mut e = ComplexVector::zeros(n);
        e[0] = Complex64::new(1.0, 0.0);
        cols.push(e);
    }
    DMatrix::from_columns(&cols)
}

// ---------------------------------------------------------------------------
// Barrier machinery
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Objective {
    Surrogate,
    RadarMargin,
}

struct BarrierSettings {
    t_init: f64,
    mu: f64,
    gap: f64,
    newton_tol: f64,
    max_newton: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self { t_init: 1.0, mu: 20.0, gap: 1e-9, newton_tol: 1e-11, max_newton: 300 }
    }
}

/// Scalar barrier terms present for a given objective.
fn scalar_slacks(red: &Reduced, theta: &DVector<f64>, objective: Objective) -> Vec<f64> {
    let mut s = vec![red.budget.eval(theta)];
    if let Some(ip) = red.idx_p() {
        let p = theta[ip];
        s.push(p);
        s.push(red.p_max - p);
    }
    match objective {
        Objective::Surrogate => {
            let z = red.radar_gain.eval(theta);
            s.push(red.radar_l.eval(theta) - red.radar_rhs / z);
            if red.has_ul {
                let p = theta[red.idx_p().unwrap()];
                let x = theta[red.idx_x().unwrap()];
                let u = theta[red.idx_u().unwrap()];
                s.push(red.ul_t.as_ref().unwrap().eval(theta) - x * x / p);
                s.push(2.0 * red.x_prev * x - red.x_prev * red.x_prev - u);
                s.push(u);
                s.push(x);
            }
        }
        Objective::RadarMargin => {
            if red.has_ul {
                // Idle x and u: keep them boxed so the Hessian stays
                // nonsingular; they carry no objective.
                let x = theta[red.idx_x().unwrap()];
                let u = theta[red.idx_u().unwrap()];
                s.extend_from_slice(&[1.0 - x, 1.0 + x, 1.0 - u, 1.0 + u]);
            }
        }
    }
    s
}

/// Number of barrier terms (self-concordance parameter).
fn barrier_nu(red: &Reduced, objective: Objective) -> f64 {
    let scalars = match objective {
        Objective::Surrogate => 1 + if red.has_ul { 2 + 1 + 4 } else { 1 },
        Objective::RadarMargin => 1 + if red.has_ul { 2 + 4 } else { 0 },
    };
    (2 * red.r + scalars) as f64
}

/// Objective value in nats-scale units (Surrogate) or linear slack units
/// (RadarMargin); `None` off the domain.
fn objective_value(red: &Reduced, theta: &DVector<f64>, objective: Objective) -> Option<f64> {
    match objective {
        Objective::Surrogate => {
            let d = red.dl_gain.eval(theta);
            if d <= 0.0 {
                return None;
            }
            let mut f = d.ln() / LN_2 - red.dl_gs * red.dl_slope.dot(theta);
            if let Some(iu) = red.idx_u() {
                let u = theta[iu];
                if u <= -1.0 {
                    return None;
                }
                f += (1.0 + u).ln() / LN_2;
            }
            Some(f)
        }
        Objective::RadarMargin => {
            let z = red.radar_gain.eval(theta);
            if z <= 0.0 {
                return None;
            }
            Some(red.radar_l.eval(theta) - red.radar_rhs / z)
        }
    }
}

/// Total barrier objective `t * objective + sum ln(slacks) + ln det blocks`.
fn barrier_value(red: &Reduced, theta: &DVector<f64>, t: f64, objective: Objective) -> Option<f64> {
    let obj = objective_value(red, theta, objective)?;
    let mut val = t * obj;
    for s in scalar_slacks(red, theta, objective) {
        if s <= 0.0 {
            return None;
        }
        val += s.ln();
    }
    for m in [red.x_s(theta), red.x_c(theta)] {
        match crate::numerics::cholesky_pd(m) {
            Some(ch) => {
                let mut lndet = 0.0;
                for i in 0..red.r {
                    lndet += 2.0 * ch.l_dirty()[(i, i)].re.ln();
                }
                val += lndet;
            }
            None => return None,
        }
    }
    Some(val)
}

struct GradHess {
    g: DVector<f64>,
    h: DMatrix<f64>,
}

impl GradHess {
    fn new(n: usize) -> Self {
        Self { g: DVector::zeros(n), h: DMatrix::zeros(n, n) }
    }

    /// Accumulate `w * ln(a . theta + c)` at value `v`.
    fn add_log_affine(&mut self, a: &Affine, v: f64, w: f64) {
        self.g.axpy(w / v, &a.coeffs, 1.0);
        self.h.ger(-w / (v * v), &a.coeffs, &a.coeffs, 1.0);
    }

    /// Accumulate `ln(s)` for a general slack with explicit first/second
    /// derivatives of s.
    fn add_log_general(&mut self, s: f64, ds: &DVector<f64>, d2s: &DMatrix<f64>) {
        self.g.axpy(1.0 / s, ds, 1.0);
        self.h += d2s / s;
        self.h.ger(-1.0 / (s * s), ds, ds, 1.0);
    }
}

/// Gradient and Hessian of the barrier objective at a feasible point.
fn barrier_grad_hess(
    red: &Reduced,
    theta: &DVector<f64>,
    t: f64,
    objective: Objective,
) -> Option<GradHess> {
    let n = red.n();
    let mut gh = GradHess::new(n);

    // Objective.
    match objective {
        Objective::Surrogate => {
            let d = red.dl_gain.eval(theta);
            if d <= 0.0 {
                return None;
            }
            gh.add_log_affine(&red.dl_gain, d, t / LN_2);
            gh.g.axpy(-t * red.dl_gs, &red.dl_slope, 1.0);
            if let Some(iu) = red.idx_u() {
                let u = theta[iu];
                gh.g[iu] += t / (LN_2 * (1.0 + u));
                gh.h[(iu, iu)] -= t / (LN_2 * (1.0 + u) * (1.0 + u));
            }
        }
        Objective::RadarMargin => {
            let z = red.radar_gain.eval(theta);
            if z <= 0.0 {
                return None;
            }
            // t * (L - c/z): gradient t*(dL + (c/z^2) dz), curvature -2tc/z^3.
            gh.g.axpy(t, &red.radar_l.coeffs, 1.0);
            gh.g.axpy(t * red.radar_rhs / (z * z), &red.radar_gain.coeffs, 1.0);
            gh.h.ger(
                -2.0 * t * red.radar_rhs / (z * z * z),
                &red.radar_gain.coeffs,
                &red.radar_gain.coeffs,
                1.0,
            );
        }
    }

    // Budget and box barriers.
    let b = red.budget.eval(theta);
    if b <= 0.0 {
        return None;
    }
    gh.add_log_affine(&red.budget, b, 1.0);
    if let Some(ip) = red.idx_p() {
        let p = theta[ip];
        if p <= 0.0 || p >= red.p_max {
            return None;
        }
        gh.g[ip] += 1.0 / p - 1.0 / (red.p_max - p);
        gh.h[(ip, ip)] += -1.0 / (p * p) - 1.0 / ((red.p_max - p) * (red.p_max - p));
    }

    match objective {
        Objective::Surrogate => {
            // Radar: ln(L - c/z).
            let z = red.radar_gain.eval(theta);
            if z <= 0.0 {
                return None;
            }
            let l = red.radar_l.eval(theta);
            let s = l - red.radar_rhs / z;
            if s <= 0.0 {
                return None;
            }
            let mut ds = red.radar_l.coeffs.clone();
            ds.axpy(red.radar_rhs / (z * z), &red.radar_gain.coeffs, 1.0);
            let mut d2s = DMatrix::zeros(n, n);
            d2s.ger(
                -2.0 * red.radar_rhs / (z * z * z),
                &red.radar_gain.coeffs,
                &red.radar_gain.coeffs,
                1.0,
            );
            gh.add_log_general(s, &ds, &d2s);

            if red.has_ul {
                let ip = red.idx_p().unwrap();
                let ix = red.idx_x().unwrap();
                let iu = red.idx_u().unwrap();
                let p = theta[ip];
                let x = theta[ix];
                let u = theta[iu];
                // Uplink: ln(T - x^2/p).
                let tt = red.ul_t.as_ref().unwrap();
                let tv = tt.eval(theta);
                let s = tv - x * x / p;
                if s <= 0.0 {
                    return None;
                }
                let mut ds = tt.coeffs.clone();
                ds[ix] += -2.0 * x / p;
                ds[ip] += x * x / (p * p);
                let mut d2s = DMatrix::zeros(n, n);
                d2s[(ix, ix)] = -2.0 / p;
                d2s[(ix, ip)] = 2.0 * x / (p * p);
                d2s[(ip, ix)] = 2.0 * x / (p * p);
                d2s[(ip, ip)] = -2.0 * x * x / (p * p * p);
                gh.add_log_general(s, &ds, &d2s);

                // Tangent bound: ln(2 x_prev x - x_prev^2 - u).
                let s = 2.0 * red.x_prev * x - red.x_prev * red.x_prev - u;
                if s <= 0.0 {
                    return None;
                }
                let mut ds = DVector::zeros(n);
                ds[ix] = 2.0 * red.x_prev;
                ds[iu] = -1.0;
                gh.add_log_general(s, &ds, &DMatrix::zeros(n, n));

                // Positivity of u and x.
                if u <= 0.0 || x <= 0.0 {
                    return None;
                }
                gh.g[iu] += 1.0 / u;
                gh.h[(iu, iu)] += -1.0 / (u * u);
                gh.g[ix] += 1.0 / x;
                gh.h[(ix, ix)] += -1.0 / (x * x);
            }
        }
        Objective::RadarMargin => {
            if red.has_ul {
                let ix = red.idx_x().unwrap();
                let iu = red.idx_u().unwrap();
                for (idx, sign) in [(ix, 1.0), (ix, -1.0), (iu, 1.0), (iu, -1.0)] {
                    let v = 1.0 - sign * theta[idx];
                    if v <= 0.0 {
                        return None;
                    }
                    gh.g[idx] += -sign / v;
                    gh.h[(idx, idx)] += -1.0 / (v * v);
                }
            }
        }
    }

    // Log-det blocks.
    let m = red.herm.count();
    for (block, offset) in [(red.x_s(theta), 0usize), (red.x_c(theta), m)] {
        let chol = crate::numerics::cholesky_pd(block)?;
        let inv = chol.inverse();
        let g = red.herm.lndet_grad(&inv);
        let h = red.herm.lndet_hess(&inv);
        for k in 0..m {
            gh.g[offset + k] += g[k];
            for l in 0..m {
                gh.h[(offset + k, offset + l)] += h[(k, l)];
            }
        }
    }

    Some(gh)
}

/// Maximize the barrier objective by damped Newton from a strictly feasible
/// start; returns the final iterate and status.
///
/// The Newton stopping rule scales with the path parameter t: a squared
/// decrement of lambda^2 costs at most lambda^2 / t in the original
/// objective, so centering accuracy can relax as t grows without hurting
/// the final gap.
fn solve_barrier(
    red: &Reduced,
    theta0: DVector<f64>,
    objective: Objective,
    settings: &BarrierSettings,
) -> Result<(DVector<f64>, SolverStatus), String> {
    let mut theta = theta0;
    if barrier_value(red, &theta, settings.t_init, objective).is_none() {
        return Err("barrier start point is not strictly feasible".into());
    }
    let nu = barrier_nu(red, objective);
    let mut t = settings.t_init;
    let mut status = SolverStatus::Converged;
    loop {
        let newton_stop = settings.newton_tol.max(1e-12 * t);
        let stall_accept = 1e-6f64.max(1e-10 * t);
        let mut converged_stage = false;
        for _ in 0..settings.max_newton {
            let gh = match barrier_grad_hess(red, &theta, t, objective) {
                Some(gh) => gh,
                None => return Err("iterate left the barrier domain".into()),
            };
            // Newton direction: (-H) d = g, with a ridge fallback (relative
            // to the Hessian scale) when the factorization is marginal.
            let diag_scale = (0..red.n())
                .map(|i| gh.h[(i, i)].abs())
                .fold(1e-300, f64::max);
            let mut ridge = 0.0;
            let dir = loop {
                let mut neg_h = -gh.h.clone();
                if ridge > 0.0 {
                    for i in 0..red.n() {
                        neg_h[(i, i)] += ridge;
                    }
                }
                match neg_h.cholesky() {
                    Some(ch) => break ch.solve(&gh.g),
                    None => {
                        ridge = if ridge == 0.0 { 1e-14 * diag_scale } else { ridge * 100.0 };
                        if ridge > 1e-2 * diag_scale {
                            return Err("Newton system is numerically singular".into());
                        }
                    }
                }
            };
            let decrement = gh.g.dot(&dir);
            if decrement <= newton_stop {
                converged_stage = true;
                break;
            }
            // Backtracking line search with strict-feasibility checks.
            let base = barrier_value(red, &theta, t, objective)
                .ok_or_else(|| "lost feasibility".to_string())?;
            let mut alpha = 1.0;
            let mut stepped = false;
            while alpha > 1e-14 {
                let cand = &theta + &dir * alpha;
                if let Some(v) = barrier_value(red, &cand, t, objective) {
                    if v >= base + 0.25 * alpha * decrement {
                        theta = cand;
                        stepped = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !stepped {
                if decrement < stall_accept {
                    converged_stage = true;
                    break;
                }
                return Err(format!(
                    "line search failed with Newton decrement {decrement:.3e} at t = {t:.1e}"
                ));
            }
        }
        if !converged_stage {
            status = SolverStatus::MaxIterations;
        }
        if nu / t <= settings.gap {
            break;
        }
        t *= settings.mu;
    }
    Ok((theta, status))
}

// ---------------------------------------------------------------------------
// Problem assembly and public entry points
// ---------------------------------------------------------------------------

fn build_reduced(state: &SCAState, spec: &ProblemSpec) -> Result<Reduced, ScaError> {
    let s = &spec.scenario;
    let ch = &spec.channels;
    let has_ul = s.ul_power_max > 0.0;

    let radar = radar_constraint_terms(
        state,
        ch,
        s.target_angle_deg,
        spec.rho_s,
        s.target_reflectivity,
        spec.mode,
    )?;
    let ul = if has_ul { Some(ul_constraint_terms(state, ch)?) } else { None };

    // Span of every vector the subproblem probes the covariances with.
    let at = crate::scenario::steering_tx(s.target_angle_deg, s.n_tx);
    let mut span = vec![at, ch.g.clone()];
    if let Some(w) = &radar.lhs.vs_weight {
        span.push(w.vector.clone());
    }
    if let Some(ul) = &ul {
        if let Some(w) = &ul.t_lin.vs_weight {
            span.push(w.vector.clone());
        }
    }
    let basis = orthonormal_span(&span);
    let r = basis.ncols();
    let herm = HermBasis { r };
    let m = herm.count();
    let n = 2 * m + if has_ul { 3 } else { 0 };

    let mut red = Reduced {
        r,
        has_ul,
        basis,
        herm,
        dl_gain: Affine { coeffs: DVector::zeros(n), constant: s.noise_power },
        dl_slope: DVector::zeros(n),
        dl_gs: 0.0,
        obj_const_bits: 0.0,
        budget: Affine { coeffs: DVector::zeros(n), constant: s.bs_power_max },
        radar_l: Affine { coeffs: DVector::zeros(n), constant: 0.0 },
        radar_gain: Affine { coeffs: DVector::zeros(n), constant: 0.0 },
        radar_rhs: radar.rhs_scale,
        ul_t: None,
        x_prev: ul.as_ref().map_or(0.0, |u| u.x_prev),
        p_max: s.ul_power_max,
    };

    // Downlink pieces.
    let g_r = red.basis.adjoint() * &ch.g;
    let g_coeffs = red.herm.quad_coeffs(&g_r);
    for k in 0..m {
        red.dl_gain.coeffs[k] = g_coeffs[k];
        red.dl_gain.coeffs[m + k] = g_coeffs[k];
        red.dl_slope[k] = g_coeffs[k];
    }
    let d_prev = state.design.v_s.quadratic_form(&ch.g) + s.noise_power;
    red.dl_gs = 1.0 / (d_prev * LN_2);
    red.obj_const_bits =
        -d_prev.log2() + state.design.v_s.quadratic_form(&ch.g) / (d_prev * LN_2);

    // Budget.
    let tr = red.herm.trace_coeffs();
    for k in 0..m {
        red.budget.coeffs[k] = -tr[k];
        red.budget.coeffs[m + k] = -tr[k];
    }

    // Radar and uplink constraint reductions. The radar row is normalized
    // by sigma^2: its raw coefficients scale like the inverse noise power,
    // and `L >= c/z` is the same constraint as `s2 L >= s2 c / z` while the
    // rescaled coefficients keep the Newton system well conditioned.
    red.radar_l = red.reduce_form(&radar.lhs);
    red.radar_l.coeffs *= s.noise_power;
    red.radar_l.constant *= s.noise_power;
    red.radar_gain = red.reduce_form(&radar.gain);
    red.radar_rhs *= s.noise_power;
    if let Some(ul) = &ul {
        red.ul_t = Some(red.reduce_form(&ul.t_lin));
    }

    Ok(red)
}

/// Strictly feasible start for the surrogate problem, from the projected
/// previous iterate. Returns `None` when no shrink factor recovers strict
/// interiority (the caller then restores the radar margin first).
fn surrogate_start(red: &Reduced, state: &SCAState) -> Option<DVector<f64>> {
    let m = red.herm.count();
    let x0_s = red.basis.adjoint() * state.design.v_s.matrix() * &red.basis;
    let x0_c = red.basis.adjoint() * state.design.v_c.matrix() * &red.basis;
    for shrink in [1.0, 1.0 - 1e-6, 1.0 - 1e-4, 1.0 - 1e-2] {
        let mut theta = DVector::zeros(red.n());
        let qs = red.herm.from_matrix(&x0_s.scale(shrink));
        let qc = red.herm.from_matrix(&x0_c.scale(shrink));
        for k in 0..m {
            theta[k] = qs[k];
            theta[m + k] = qc[k];
        }
        // Keep the blocks comfortably positive definite.
        let floor = 1e-12 * red.budget.constant / red.r as f64;
        for k in 0..red.r {
            theta[k] += floor;
            theta[m + k] += floor;
        }
        if let Some(ip) = red.idx_p() {
            theta[ip] = state
                .design
                .p
                .clamp(1e-6 * red.p_max, (1.0 - 1e-6) * red.p_max);
            let tv = red.ul_t.as_ref().unwrap().eval(&theta);
            if tv <= 0.0 {
                continue;
            }
            let p = theta[ip];
            let x = 0.999 * (p * tv).sqrt();
            let ub = 2.0 * red.x_prev * x - red.x_prev * red.x_prev;
            if ub <= 0.0 {
                continue;
            }
            theta[red.idx_x().unwrap()] = x;
            theta[red.idx_u().unwrap()] = 0.99 * ub;
        }
        if barrier_value(red, &theta, 1.0, Objective::Surrogate).is_some() {
            return Some(theta);
        }
    }
    None
}

/// Interior start for the restoration problem: a small isotropic design.
fn margin_start(red: &Reduced) -> DVector<f64> {
    let m = red.herm.count();
    let mut theta = DVector::zeros(red.n());
    let per = red.budget.constant / (4.0 * red.r as f64);
    for k in 0..red.r {
        theta[k] = per;
        theta[m + k] = per;
    }
    if let Some(ip) = red.idx_p() {
        theta[ip] = 0.5 * red.p_max;
        theta[red.idx_x().unwrap()] = 0.0;
        theta[red.idx_u().unwrap()] = 0.0;
    }
    theta
}

fn lift(red: &Reduced, theta: &DVector<f64>) -> TransmitDesign {
    let x_s = red.x_s(theta);
    let x_c = red.x_c(theta);
    let v_s = HermitianMatrix::from_congruence(&red.basis * x_s * red.basis.adjoint(), true);
    let v_c = HermitianMatrix::from_congruence(&red.basis * x_c * red.basis.adjoint(), true);
    let p = red.idx_p().map_or(0.0, |ip| theta[ip]).max(0.0);
    TransmitDesign { v_s, v_c, p }
}

/// Maximize the SCA surrogate at the state's linearization.
pub(crate) fn maximize_surrogate(
    state: &SCAState,
    spec: &ProblemSpec,
) -> Result<(Solution, SolverStatus), ScaError> {
    let red = build_reduced(state, spec)?;
    let start = match surrogate_start(&red, state) {
        Some(s) => s,
        None => {
            return Err(ScaError::SolverFailure {
                iteration: state.iteration,
                message: "no strictly feasible start for the linearized subproblem".into(),
            })
        }
    };
    let settings = BarrierSettings {
        gap: spec.settings.subproblem_gap,
        ..BarrierSettings::default()
    };
    let (theta, status) = solve_barrier(&red, start, Objective::Surrogate, &settings)
        .map_err(|message| ScaError::SolverFailure { iteration: state.iteration, message })?;
    let surrogate_bits = objective_value(&red, &theta, Objective::Surrogate)
        .expect("solution is feasible")
        + red.obj_const_bits;
    Ok((Solution { design: lift(&red, &theta), surrogate_bits }, status))
}

/// Maximize the linearized radar margin `L - c/z` under the power budgets
/// (the feasibility-restoration step).
pub(crate) fn maximize_radar_margin(
    state: &SCAState,
    spec: &ProblemSpec,
) -> Result<Solution, ScaError> {
    let red = build_reduced(state, spec)?;
    let start = margin_start(&red);
    let settings = BarrierSettings::default();
    let (theta, _) = solve_barrier(&red, start, Objective::RadarMargin, &settings)
        .map_err(|message| ScaError::SolverFailure { iteration: state.iteration, message })?;
    Ok(Solution { design: lift(&red, &theta), surrogate_bits: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_herm(r: usize, rng: &mut ChaCha12Rng) -> DMatrix<Complex64> {
        let a = DMatrix::from_fn(r, r, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        &a * a.adjoint() + DMatrix::<Complex64>::identity(r, r).scale(0.3)
    }

    #[test]
    fn herm_basis_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for r in 1..=4 {
            let basis = HermBasis { r };
            let x = random_herm(r, &mut rng);
            let q = basis.from_matrix(&x);
            assert_eq!(q.len(), r * r);
            let back = basis.to_matrix(&q);
            assert!((back - x).norm() < 1e-12);
        }
    }

    #[test]
    fn quad_coeffs_match_direct_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let r = 4;
        let basis = HermBasis { r };
        for _ in 0..20 {
            let x = random_herm(r, &mut rng);
            let w = ComplexVector::from_fn(r, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let q = DVector::from_vec(basis.from_matrix(&x));
            let direct = (w.adjoint() * &x * &w)[(0, 0)].re;
            let via_coeffs = basis.quad_coeffs(&w).dot(&q);
            assert_relative_eq!(direct, via_coeffs, max_relative = 1e-12);
        }
    }

    #[test]
    fn lndet_grad_hess_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let r = 3;
        let basis = HermBasis { r };
        let x = random_herm(r, &mut rng);
        let q0 = basis.from_matrix(&x);
        let f = |q: &[f64]| {
            basis
                .to_matrix(q)
                .cholesky()
                .map(|ch| {
                    let mut v = 0.0;
                    for i in 0..r {
                        v += 2.0 * ch.l_dirty()[(i, i)].re.ln();
                    }
                    v
                })
                .unwrap()
        };
        let inv = basis.to_matrix(&q0).cholesky().unwrap().inverse();
        let grad = basis.lndet_grad(&inv);
        let hess = basis.lndet_hess(&inv);
        let eps = 1e-6;
        for k in 0..basis.count() {
            let mut qp = q0.clone();
            let mut qm = q0.clone();
            qp[k] += eps;
            qm[k] -= eps;
            let fd = (f(&qp) - f(&qm)) / (2.0 * eps);
            assert!((fd - grad[k]).abs() < 1e-5, "grad[{k}]: fd {fd} vs {}", grad[k]);
            for l in 0..basis.count() {
                let mut qpp = qp.clone();
                let mut qpm = qp.clone();
                qpp[l] += eps;
                qpm[l] -= eps;
                let mut qmp = qm.clone();
                let mut qmm = qm.clone();
                qmp[l] += eps;
                qmm[l] -= eps;
                let fd2 = (f(&qpp) - f(&qpm) - f(&qmp) + f(&qmm)) / (4.0 * eps * eps);
                assert!(
                    (fd2 - hess[(k, l)]).abs() < 2e-4 * (1.0 + hess[(k, l)].abs()),
                    "hess[({k},{l})]: fd {fd2} vs {}",
                    hess[(k, l)]
                );
            }
        }
    }

    #[test]
    fn orthonormal_span_drops_dependent_vectors() {
        let v1 = ComplexVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.5, 0.0),
        ]);
        let v2 = v1.scale(2.5);
        let v3 = ComplexVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let u = orthonormal_span(&[v1, v2, v3]);
        assert_eq!(u.ncols(), 2);
        let gram = u.adjoint() * &u;
        assert!((gram - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-12);
    }
}

