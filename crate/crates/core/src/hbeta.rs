//! Stability-vector analysis of reset control loops.
//!
//! Per frequency the loop is condensed into three complex factors
//! M1 = 1 + L(R + C3), M2 = L Cs (R - D_r), M3 = (1 + L(C3 + D_r))(R - D_r),
//! whose real pairings N_x = Re(M1* M2) and N_y = Re(M1* M3) form a plane
//! vector. The positivity function
//!
//!   H(jw) = (b' M2 + p' M3) / M1
//!
//! has Re H > 0 at w exactly when the parameter vector (b', p') makes an
//! acute angle with (N_x, N_y); stability of the reset loop reduces to the
//! existence of one such parameter direction valid at every frequency.
//! The same function is available in matrix form C0 (sI - A)^-1 B0 from the
//! realized closed loop, and `equivalence_check` verifies the two routes
//! agree on randomly generated loops.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delay::{ci_delay_precheck, FeasibilityKind, FeasibilityVerdict};
use crate::error::{Error, Result};
use crate::frf::{DelayMode, FrequencyGrid, PlantModel};
use crate::poly::{self, Polynomial, RationalTf, EPS_DIV};
use crate::reset::{
    assemble_closed_loop, ClosedLoopHybrid, DelayRealization, LoopComponents, ResetElement,
};

/// Samples whose vector magnitude falls below `EPS_NSV_REL * max|N|` over the
/// analyzed grid carry no reliable angle and are excluded from the extrema.
pub const EPS_NSV_REL: f64 = 1e-12;

/// Margin applied to the open sector bounds.
pub const DELTA_SECTOR: f64 = 1e-9;

/// Minimum grid density for a stable verdict; sparser grids cannot support a
/// universally quantified angle condition and report not-shown instead.
pub const MIN_POINTS_PER_DECADE: f64 = 20.0;

/// Frequency used for the numeric high-frequency limit cross-check.
const LIMIT_CHECK_OMEGA: f64 = 1e6;

/// The three loop factors at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MValues {
    pub m1: Complex64,
    pub m2: Complex64,
    pub m3: Complex64,
}

/// Evaluate M1, M2, M3 at `omega`, with the plant delay folded into L.
pub fn compute_m(lc: &LoopComponents, omega: f64, mode: DelayMode) -> Result<MValues> {
    let g = lc.plant.eval(omega, mode)?;
    let l = lc.c1.eval(omega)? * lc.c2.eval(omega)? * g;
    let r = lc.reset.base_linear_tf().eval(omega)?;
    let c3 = lc.c3.eval(omega)?;
    let cs = lc.cs.eval(omega)?;
    let dr = Complex64::new(lc.reset.d_r, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Ok(MValues {
        m1: one + l * (r + c3),
        m2: l * cs * (r - dr),
        m3: (one + l * (c3 + dr)) * (r - dr),
    })
}

/// One stability-vector sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsvSample {
    pub omega: f64,
    pub m: MValues,
    pub nx: f64,
    pub ny: f64,
    /// Angle wrapped into [-pi/2, 3pi/2).
    pub theta: f64,
    /// False when the vector magnitude is too small for a reliable angle.
    /// Grid-level analysis re-flags samples against the grid maximum.
    pub defined: bool,
}

/// Wrap atan2(ny, nx) into [-pi/2, 3pi/2).
pub fn wrap_theta(nx: f64, ny: f64) -> f64 {
    let mut th = ny.atan2(nx);
    if th < -FRAC_PI_2 {
        th += 2.0 * PI;
    }
    th
}

/// Stability-vector sample at one frequency.
pub fn nsv(lc: &LoopComponents, omega: f64, mode: DelayMode) -> Result<NsvSample> {
    let m = compute_m(lc, omega, mode)?;
    let nx = (m.m1.conj() * m.m2).re;
    let ny = (m.m1.conj() * m.m3).re;
    let mag = nx.hypot(ny);
    Ok(NsvSample {
        omega,
        m,
        nx,
        ny,
        theta: wrap_theta(nx, ny),
        defined: mag > 0.0,
    })
}

/// Parameter direction (b', p') of the positivity function; p' must be
/// strictly positive. The matrix-form parameters are recovered through the
/// reset element's input/output gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbetaParams {
    pub beta_prime: f64,
    pub rho_prime: f64,
}

impl HbetaParams {
    pub fn new(beta_prime: f64, rho_prime: f64) -> Result<Self> {
        if !beta_prime.is_finite() || !rho_prime.is_finite() || rho_prime <= 0.0 {
            return Err(Error::BadParams(
                "hbeta parameters need finite beta' and rho' > 0".into(),
            ));
        }
        Ok(HbetaParams {
            beta_prime,
            rho_prime,
        })
    }

    /// Unit parameter vector at angle `theta_xi` in (0, pi).
    pub fn from_angle(theta_xi: f64) -> Result<Self> {
        if !(theta_xi > 0.0 && theta_xi < PI) {
            return Err(Error::BadParams(format!(
                "theta_xi must lie in (0, pi), got {theta_xi}"
            )));
        }
        HbetaParams::new(theta_xi.cos(), theta_xi.sin())
    }

    pub fn angle(&self) -> f64 {
        self.rho_prime.atan2(self.beta_prime)
    }

    /// Map to the matrix-side pair (beta, rho): beta' = -beta/B_r and
    /// rho' = rho/(C_r B_r).
    pub fn matrix_params(&self, reset: &ResetElement) -> (f64, f64) {
        (
            -self.beta_prime * reset.b_r,
            self.rho_prime * reset.c_r * reset.b_r,
        )
    }
}

/// FRF-form positivity function (b' M2 + p' M3)/M1.
pub fn frf_hbeta(
    lc: &LoopComponents,
    omega: f64,
    params: &HbetaParams,
    mode: DelayMode,
) -> Result<Complex64> {
    let m = compute_m(lc, omega, mode)?;
    let mag = m.m1.norm();
    if mag < EPS_DIV {
        return Err(Error::DividedByLoopZero {
            omega,
            magnitude: mag,
        });
    }
    Ok((m.m2 * params.beta_prime + m.m3 * params.rho_prime) / m.m1)
}

/// Matrix-form positivity function C0 (sI - A)^-1 B0 from the realized loop.
#[derive(Debug, Clone)]
pub struct MatrixHbeta {
    pub a_bar: DMatrix<f64>,
    pub b0: DVector<f64>,
    pub c0: DMatrix<f64>,
}

impl MatrixHbeta {
    /// C0 = [rho, beta * C_e], B0 = e_1. rho must be positive.
    pub fn new(clh: &ClosedLoopHybrid, beta: f64, rho: f64) -> Result<Self> {
        if !rho.is_finite() || !beta.is_finite() || rho <= 0.0 {
            return Err(Error::BadParams("matrix hbeta needs rho > 0".into()));
        }
        let n = clh.n_states();
        let mut b0 = DVector::zeros(n);
        b0[0] = 1.0;
        let mut c0 = &clh.ce_bar * beta;
        c0[(0, 0)] = rho;
        Ok(MatrixHbeta {
            a_bar: clh.a_bar.clone(),
            b0,
            c0,
        })
    }

    /// Direct linear solve of (jwI - A) x = B0, then C0 x.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let n = self.a_bar.nrows();
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(-self.a_bar[(i, j)], 0.0);
            }
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let rhs =
            DVector::<Complex64>::from_iterator(n, self.b0.iter().map(|&v| Complex64::new(v, 0.0)));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularResolvent { omega })?;
        let mut y = Complex64::new(0.0, 0.0);
        for j in 0..n {
            y += Complex64::new(self.c0[(0, j)], 0.0) * x[j];
        }
        Ok(y)
    }
}

/// One-shot matrix-form evaluation.
pub fn matrix_hbeta(clh: &ClosedLoopHybrid, beta: f64, rho: f64, omega: f64) -> Result<Complex64> {
    MatrixHbeta::new(clh, beta, rho)?.eval(omega)
}

/// Angles theta_xi for which the acute-angle condition can hold at every
/// sampled frequency: [theta2 - pi/2, theta1 + pi/2] clipped to (0, pi).
/// Empty exactly when theta2 - theta1 >= pi.
pub fn feasible_xi_interval(theta1: f64, theta2: f64) -> Option<(f64, f64)> {
    if theta2 - theta1 >= PI {
        return None;
    }
    let lo = (theta2 - FRAC_PI_2).max(0.0);
    let hi = (theta1 + FRAC_PI_2).min(PI);
    if lo >= hi {
        return None;
    }
    Some((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone)]
pub struct ConditionResult {
    pub name: &'static str,
    pub status: ConditionStatus,
    pub detail: String,
    /// Frequency witnessing a failure, when one exists.
    pub witness_omega: Option<f64>,
}

impl ConditionResult {
    fn pass(name: &'static str, detail: impl Into<String>) -> Self {
        ConditionResult {
            name,
            status: ConditionStatus::Pass,
            detail: detail.into(),
            witness_omega: None,
        }
    }

    fn fail(name: &'static str, detail: impl Into<String>, witness: Option<f64>) -> Self {
        ConditionResult {
            name,
            status: ConditionStatus::Fail,
            detail: detail.into(),
            witness_omega: witness,
        }
    }

    fn na(name: &'static str, detail: impl Into<String>) -> Self {
        ConditionResult {
            name,
            status: ConditionStatus::NotApplicable,
            detail: detail.into(),
            witness_omega: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    NotShown,
    InfeasibleByDelay,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::NotShown => "not-shown",
            Verdict::InfeasibleByDelay => "infeasible-by-delay",
        }
    }
}

/// Outcome of the sector analysis over one frequency grid.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub samples: Vec<NsvSample>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub undefined_count: usize,
    pub conditions: Vec<ConditionResult>,
    pub feasible_xi: Option<(f64, f64)>,
    pub verdict: Verdict,
    pub band: (f64, f64),
    /// True when the conditions could only be checked on a finite measured
    /// band rather than the full frequency axis.
    pub band_limited: bool,
    pub notes: Vec<String>,
}

/// Knobs shared by the analysis entry points.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub delay_mode: DelayMode,
    /// Pade order used to test base-linear stability when the plant carries
    /// a delay and the analysis itself runs with the exact delay.
    pub stability_pade_order: u32,
    /// Grid evaluation fan-out; 1 = serial. Results are identical for any
    /// thread count.
    pub threads: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            delay_mode: DelayMode::Exact,
            stability_pade_order: 5,
            threads: 1,
        }
    }
}

fn eval_samples(
    lc: &LoopComponents,
    points: &[f64],
    mode: DelayMode,
    threads: usize,
) -> Vec<(f64, Result<NsvSample>)> {
    let worker = |chunk: &[f64]| -> Vec<(f64, Result<NsvSample>)> {
        chunk.iter().map(|&w| (w, nsv(lc, w, mode))).collect()
    };
    if threads <= 1 || points.len() < 2 * threads {
        return worker(points);
    }
    let chunk_size = points.len().div_ceil(threads);
    let mut out = Vec::with_capacity(points.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .chunks(chunk_size)
            .map(|chunk| scope.spawn(move || worker(chunk)))
            .collect();
        for h in handles {
            out.extend(h.join().expect("grid worker panicked"));
        }
    });
    out
}

fn sector_violation(samples: &[NsvSample], lo: f64, hi: f64) -> Option<(f64, f64)> {
    samples
        .iter()
        .filter(|s| s.defined)
        .find(|s| !(s.theta > lo + DELTA_SECTOR && s.theta < hi - DELTA_SECTOR))
        .map(|s| (s.omega, s.theta))
}

/// Evaluate the stability condition list over a frequency grid.
///
/// Failures are verdicts, not errors; grid points that cannot be evaluated
/// are skipped and reported in the notes.
pub fn check_stability_conditions(
    lc: &LoopComponents,
    grid: &FrequencyGrid,
    opts: &AnalysisOptions,
) -> Result<StabilityReport> {
    let rational = lc.plant.is_rational();
    let mut notes = Vec::new();
    let mut conditions = Vec::new();

    let raw = eval_samples(lc, grid.points(), opts.delay_mode, opts.threads.max(1));
    let mut samples = Vec::with_capacity(raw.len());
    let mut skipped = 0usize;
    let mut first_skip: Option<(f64, String)> = None;
    for (w, res) in raw {
        match res {
            Ok(s) => samples.push(s),
            Err(e) => {
                skipped += 1;
                if first_skip.is_none() {
                    first_skip = Some((w, e.to_string()));
                }
            }
        }
    }
    if let Some((w, msg)) = first_skip {
        notes.push(format!(
            "{skipped} grid point(s) skipped, first at omega = {w}: {msg}"
        ));
    }

    // zero-frequency probe; loops with free integrators sit on a pole there
    match nsv(lc, 0.0, opts.delay_mode) {
        Ok(s) => samples.insert(0, s),
        Err(e) => notes.push(format!("omega = 0 probe skipped: {e}")),
    }

    // angle reliability threshold relative to the grid maximum
    let max_mag = samples
        .iter()
        .map(|s| s.nx.hypot(s.ny))
        .fold(0.0f64, f64::max);
    let eps_nsv = EPS_NSV_REL * max_mag;
    for s in &mut samples {
        s.defined = s.nx.hypot(s.ny) > eps_nsv;
    }
    let undefined_count = samples.iter().filter(|s| !s.defined).count();

    let defined_thetas: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.defined)
        .map(|s| (s.omega, s.theta))
        .collect();
    let theta1 = defined_thetas
        .iter()
        .map(|&(_, t)| t)
        .fold(f64::INFINITY, f64::min);
    let theta2 = defined_thetas
        .iter()
        .map(|&(_, t)| t)
        .fold(f64::NEG_INFINITY, f64::max);
    let (theta1, theta2) = if defined_thetas.is_empty() {
        (None, None)
    } else {
        (Some(theta1), Some(theta2))
    };

    // 1. base-linear stability and cancellation. The flow matrix of the
    // assembled loop carries the base-linear dynamics (resets only alter
    // jumps), so its spectrum decides this without forming polynomial
    // products across wide coefficient scales.
    if rational {
        let delay = if lc.plant.delay_t > 0.0 {
            DelayRealization::Pade(opts.stability_pade_order)
        } else {
            DelayRealization::Omit
        };
        match assemble_closed_loop(lc, delay).and_then(|clh| clh.flow_eigenvalues()) {
            Ok(eigs) => {
                let margin = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if margin < -poly::EPS_HURWITZ {
                    conditions.push(ConditionResult::pass(
                        "base_linear_stable",
                        format!("max flow eigenvalue real part {margin:.6e}"),
                    ));
                } else {
                    conditions.push(ConditionResult::fail(
                        "base_linear_stable",
                        format!("max flow eigenvalue real part {margin:.6e}"),
                        None,
                    ));
                }
            }
            Err(e) => conditions.push(ConditionResult::fail(
                "base_linear_stable",
                format!("stability test failed: {e}"),
                None,
            )),
        }
        if lc.plant.delay_t > 0.0 && matches!(opts.delay_mode, DelayMode::Exact) {
            notes.push(format!(
                "base-linear stability tested with a Pade({}) delay model",
                opts.stability_pade_order
            ));
        }
        match cancellation_check(lc) {
            Ok(true) => conditions.push(ConditionResult::pass(
                "no_unstable_cancellation",
                "open-loop numerator and denominator share no closed-RHP root",
            )),
            Ok(false) => conditions.push(ConditionResult::fail(
                "no_unstable_cancellation",
                "open loop cancels a closed-RHP root",
                None,
            )),
            Err(e) => conditions.push(ConditionResult::fail(
                "no_unstable_cancellation",
                format!("cancellation test failed: {e}"),
                None,
            )),
        }
    } else {
        conditions.push(ConditionResult::na(
            "base_linear_stable",
            "not verifiable from measured FRF data; must be assured at design time",
        ));
        conditions.push(ConditionResult::na(
            "no_unstable_cancellation",
            "not verifiable from measured FRF data",
        ));
    }

    // 2. shaping filter proper and stable
    {
        let proper = lc.cs.is_proper();
        let stable = poly::is_hurwitz(&lc.cs.den)
            .map(|(h, _)| h)
            .unwrap_or(false);
        if proper && stable {
            conditions.push(ConditionResult::pass("shaping_filter_proper_stable", ""));
        } else {
            conditions.push(ConditionResult::fail(
                "shaping_filter_proper_stable",
                format!("proper = {proper}, stable = {stable}"),
                None,
            ));
        }
    }

    // 3. after-reset value inside the open unit interval
    let gamma = lc.reset.gamma;
    if gamma > -1.0 && gamma < 1.0 {
        conditions.push(ConditionResult::pass(
            "gamma_in_open_interval",
            format!("gamma = {gamma}"),
        ));
    } else {
        conditions.push(ConditionResult::fail(
            "gamma_in_open_interval",
            format!("gamma = {gamma} outside (-1, 1)"),
            None,
        ));
    }

    // 4. positive element gain product
    let wk = lc.reset.omega_k();
    if wk > 0.0 {
        conditions.push(ConditionResult::pass(
            "br_cr_positive",
            format!("B_r C_r = {wk}"),
        ));
    } else {
        conditions.push(ConditionResult::fail(
            "br_cr_positive",
            format!("B_r C_r = {wk}"),
            None,
        ));
    }

    // 5. angle span below pi
    match (theta1, theta2) {
        (Some(t1), Some(t2)) if t2 - t1 < PI => conditions.push(ConditionResult::pass(
            "theta_span_lt_pi",
            format!("theta2 - theta1 = {:.6}", t2 - t1),
        )),
        (Some(t1), Some(t2)) => conditions.push(ConditionResult::fail(
            "theta_span_lt_pi",
            format!("theta2 - theta1 = {:.6}", t2 - t1),
            None,
        )),
        _ => conditions.push(ConditionResult::fail(
            "theta_span_lt_pi",
            "no defined stability-vector samples on the grid",
            None,
        )),
    }

    // 6. sector membership
    let is_ci = lc.reset.omega_r() == 0.0;
    let mut ci_unverifiable = false;
    if !is_ci {
        let in_a = sector_violation(&samples, -FRAC_PI_2, PI);
        let in_b = sector_violation(&samples, 0.0, 3.0 * FRAC_PI_2);
        match (in_a, in_b) {
            (None, _) => conditions.push(ConditionResult::pass(
                "sector",
                "all defined theta inside (-pi/2, pi)",
            )),
            (_, None) => conditions.push(ConditionResult::pass(
                "sector",
                "all defined theta inside (0, 3pi/2)",
            )),
            (Some((w, t)), Some(_)) => conditions.push(ConditionResult::fail(
                "sector",
                format!("theta = {t:.6} outside both sectors"),
                Some(w),
            )),
        }
    } else {
        // reset integrator: relative degree of L must be 1, and the sector is
        // pinned by the sign of the leading coefficient ratio of L Cs
        match lc.loop_gain_tf().zip(lc.l_cs_tf()) {
            Some((l, lcs)) => {
                let rd = l.relative_degree();
                if rd != 1 {
                    conditions.push(ConditionResult::fail(
                        "ci_relative_degree",
                        format!("relative degree must be 1, got {rd}"),
                        None,
                    ));
                } else {
                    conditions.push(ConditionResult::pass(
                        "ci_relative_degree",
                        "relative degree of L is 1",
                    ));
                }
                if lcs.num.is_zero() {
                    conditions.push(ConditionResult::fail(
                        "ci_sector",
                        "loop gain is identically zero",
                        None,
                    ));
                } else {
                    let ratio = lcs.den.leading() / lcs.num.leading();
                    let (lo, hi, name) = if ratio > 0.0 {
                        (0.0, 3.0 * FRAC_PI_2, "(0, 3pi/2)")
                    } else {
                        (-FRAC_PI_2, PI, "(-pi/2, pi)")
                    };
                    match sector_violation(&samples, lo, hi) {
                        None => conditions.push(ConditionResult::pass(
                            "ci_sector",
                            format!("all defined theta inside {name}"),
                        )),
                        Some((w, t)) => conditions.push(ConditionResult::fail(
                            "ci_sector",
                            format!("theta = {t:.6} outside {name}"),
                            Some(w),
                        )),
                    }
                }
            }
            None => {
                ci_unverifiable = true;
                conditions.push(ConditionResult::na(
                    "ci_relative_degree",
                    "reset-integrator conditions need a parametric loop gain",
                ));
            }
        }
    }

    // artifact guard: a universally quantified angle condition needs samples
    let density = grid.points_per_decade();
    if density >= MIN_POINTS_PER_DECADE {
        conditions.push(ConditionResult::pass(
            "grid_density",
            format!("{density:.1} points/decade"),
        ));
    } else {
        conditions.push(ConditionResult::fail(
            "grid_density",
            format!("{density:.1} points/decade below the {MIN_POINTS_PER_DECADE} minimum"),
            None,
        ));
    }

    let band_limited = !rational;
    if band_limited {
        notes.push("measured plant: conditions checked on the analyzed band only".into());
    }

    let feasible_xi = match (theta1, theta2) {
        (Some(t1), Some(t2)) => feasible_xi_interval(t1, t2),
        _ => None,
    };

    let any_fail = conditions.iter().any(|c| c.status == ConditionStatus::Fail);
    let verdict = if any_fail || ci_unverifiable {
        Verdict::NotShown
    } else {
        Verdict::Stable
    };
    if ci_unverifiable {
        notes.push("reset-integrator loop on measured data: verdict withheld".into());
    }

    Ok(StabilityReport {
        samples,
        theta1,
        theta2,
        undefined_count,
        conditions,
        feasible_xi,
        verdict,
        band: grid.band(),
        band_limited,
        notes,
    })
}

/// High-frequency limit conditions for the positivity function.
#[derive(Debug, Clone)]
pub struct LimitConditions {
    pub applicable: bool,
    pub relative_degree: Option<i64>,
    pub analytic_limit: Option<f64>,
    pub numeric_limit: Option<f64>,
    pub conditions: Vec<ConditionResult>,
}

/// Check the w -> infinity behavior of w^2 Re H for the given parameters.
///
/// The analytic limit is -b' K + p' w_r w_k with K = w_k K_m / K_n when the
/// relative degree of L Cs is 1, and p' w_r w_k when it is larger; the reset
/// integrator only admits relative degree 1. A numeric evaluation at
/// w = 1e6 rad/s (delay stripped: its unit magnitude leaves the surviving
/// limit term untouched) cross-checks the analytic value.
pub fn limit_conditions(lc: &LoopComponents, params: &HbetaParams) -> Result<LimitConditions> {
    if !lc.plant.is_rational() {
        return Ok(LimitConditions {
            applicable: false,
            relative_degree: None,
            analytic_limit: None,
            numeric_limit: None,
            conditions: vec![ConditionResult::na(
                "high_frequency_limit",
                "limit conditions need a parametric plant",
            )],
        });
    }
    let lcs = lc.l_cs_tf().ok_or(Error::NotRealizable)?;
    let mut conditions = Vec::new();
    if lcs.num.is_zero() {
        conditions.push(ConditionResult::fail(
            "high_frequency_limit",
            "loop gain is identically zero",
            None,
        ));
        return Ok(LimitConditions {
            applicable: true,
            relative_degree: None,
            analytic_limit: None,
            numeric_limit: None,
            conditions,
        });
    }
    let rd = lcs.relative_degree();
    let k_m = lcs.num.leading();
    let k_n = lcs.den.leading();
    let wr = lc.reset.omega_r();
    let wk = lc.reset.omega_k();
    let is_ci = wr == 0.0;

    let analytic = if is_ci {
        if rd != 1 {
            conditions.push(ConditionResult::fail(
                "high_frequency_limit",
                format!("reset integrator: relative degree must be 1, got {rd}"),
                None,
            ));
            return Ok(LimitConditions {
                applicable: true,
                relative_degree: Some(rd),
                analytic_limit: None,
                numeric_limit: None,
                conditions,
            });
        }
        -params.beta_prime * wk * k_m / k_n
    } else if rd == 1 {
        -params.beta_prime * wk * k_m / k_n + params.rho_prime * wr * wk
    } else {
        params.rho_prime * wr * wk
    };

    if analytic > 0.0 {
        conditions.push(ConditionResult::pass(
            "high_frequency_limit",
            format!("w^2 Re H -> {analytic:.6e}"),
        ));
    } else {
        conditions.push(ConditionResult::fail(
            "high_frequency_limit",
            format!("w^2 Re H -> {analytic:.6e} <= 0"),
            None,
        ));
    }

    // numeric cross-check on the undelayed loop
    let mut lc_und = lc.clone();
    lc_und.plant.delay_t = 0.0;
    let numeric = frf_hbeta(&lc_und, LIMIT_CHECK_OMEGA, params, DelayMode::Exact)
        .map(|h| LIMIT_CHECK_OMEGA * LIMIT_CHECK_OMEGA * h.re)?;
    let tol = 0.01 * analytic.abs().max(1e-12);
    if (numeric - analytic).abs() <= tol {
        conditions.push(ConditionResult::pass(
            "high_frequency_limit_numeric",
            format!("numeric {numeric:.6e} vs analytic {analytic:.6e}"),
        ));
    } else {
        conditions.push(ConditionResult::fail(
            "high_frequency_limit_numeric",
            format!("numeric {numeric:.6e} vs analytic {analytic:.6e}"),
            Some(LIMIT_CHECK_OMEGA),
        ));
    }

    Ok(LimitConditions {
        applicable: true,
        relative_degree: Some(rd),
        analytic_limit: Some(analytic),
        numeric_limit: Some(numeric),
        conditions,
    })
}

/// True when the base-linear open loop L (R + C3) carries no pole-zero
/// cancellation in the closed right half plane (root match within 1e-6
/// relative).
pub fn cancellation_check(lc: &LoopComponents) -> Result<bool> {
    let g = lc.plant.rational_tf().ok_or(Error::NotRealizable)?;
    let l = poly::series(&poly::series(&lc.c1, &lc.c2)?, g)?;
    let r = lc.reset.base_linear_tf();
    let num = l
        .num
        .mul(&r.num.mul(&lc.c3.den).add(&lc.c3.num.mul(&r.den)));
    let den = l.den.mul(&r.den).mul(&lc.c3.den);
    if num.is_zero() {
        return Ok(true);
    }
    let num_roots = num.roots()?;
    let den_roots = den.roots()?;
    for zn in num_roots.iter().filter(|z| z.re >= -1e-9) {
        for zd in den_roots.iter() {
            if (zn - zd).norm() <= 1e-6 * zn.norm().max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Grid scan of Re H for fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct SprScan {
    pub pass: bool,
    pub min_re: f64,
    pub argmin_omega: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

pub fn spr_scan(
    lc: &LoopComponents,
    params: &HbetaParams,
    grid: &FrequencyGrid,
    mode: DelayMode,
) -> SprScan {
    let mut min_re = f64::INFINITY;
    let mut argmin = f64::NAN;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for &w in grid.points() {
        match frf_hbeta(lc, w, params, mode) {
            Ok(h) => {
                evaluated += 1;
                if h.re < min_re {
                    min_re = h.re;
                    argmin = w;
                }
            }
            Err(_) => skipped += 1,
        }
    }
    SprScan {
        pass: evaluated > 0 && min_re > 0.0,
        min_re,
        argmin_omega: argmin,
        evaluated,
        skipped,
    }
}

/// Full analysis pipeline: delay precheck, sector conditions, limit checks
/// and positivity scan at the feasible-interval midpoint.
#[derive(Debug, Clone)]
pub struct FullAnalysis {
    pub report: StabilityReport,
    pub delay_feasibility: FeasibilityVerdict,
    pub limits: Option<LimitConditions>,
    pub spr: Option<SprScan>,
    pub xi_params: Option<HbetaParams>,
}

pub fn analyze(
    lc: &LoopComponents,
    grid: &FrequencyGrid,
    opts: &AnalysisOptions,
) -> Result<FullAnalysis> {
    let delay_feasibility = ci_delay_precheck(lc, lc.plant.delay_t)?;
    let mut report = check_stability_conditions(lc, grid, opts)?;

    let xi_params = report
        .feasible_xi
        .and_then(|(lo, hi)| HbetaParams::from_angle(0.5 * (lo + hi)).ok());

    let mut limits = None;
    let mut spr = None;
    if let Some(params) = &xi_params {
        let lim = limit_conditions(lc, params)?;
        report.conditions.extend(lim.conditions.iter().cloned());
        if lim.applicable
            && lim
                .conditions
                .iter()
                .any(|c| c.status == ConditionStatus::Fail)
            && report.verdict == Verdict::Stable
        {
            report.verdict = Verdict::NotShown;
        }
        limits = Some(lim);

        let scan = spr_scan(lc, params, grid, opts.delay_mode);
        if scan.pass {
            report.conditions.push(ConditionResult::pass(
                "spr_scan",
                format!(
                    "min Re H = {:.6e} at omega = {}",
                    scan.min_re, scan.argmin_omega
                ),
            ));
        } else {
            report.conditions.push(ConditionResult::fail(
                "spr_scan",
                format!("min Re H = {:.6e}", scan.min_re),
                Some(scan.argmin_omega),
            ));
            if report.verdict == Verdict::Stable {
                report.verdict = Verdict::NotShown;
            }
        }
        spr = Some(scan);
    }

    if delay_feasibility.kind == FeasibilityKind::InfeasibleByDelay {
        report.verdict = Verdict::InfeasibleByDelay;
        report.notes.push(delay_feasibility.reason.clone());
    }

    Ok(FullAnalysis {
        report,
        delay_feasibility,
        limits,
        spr,
        xi_params,
    })
}

// ---------------------------------------------------------------------------
// randomized equivalence oracle
// ---------------------------------------------------------------------------

/// Statistics from one [`equivalence_check`] run.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub trials: usize,
    pub max_rel_dev: f64,
    pub worst_trial: usize,
    pub worst_omega: f64,
    pub d_r_nonzero_trials: usize,
    pub c3_nonzero_trials: usize,
    pub cs_nonunity_trials: usize,
    pub resamples: usize,
}

fn random_stable_poly(rng: &mut ChaCha8Rng, degree: usize) -> Polynomial {
    let mut p = Polynomial::constant(1.0);
    let mut left = degree;
    while left > 0 {
        if left >= 2 && rng.random_bool(0.5) {
            let zeta: f64 = rng.random_range(0.35..1.2);
            let wn: f64 = rng.random_range(0.4..3.0);
            p = p.mul(&Polynomial::new(vec![wn * wn, 2.0 * zeta * wn, 1.0]));
            left -= 2;
        } else {
            let a: f64 = rng.random_range(0.2..3.0);
            p = p.mul(&Polynomial::new(vec![a, 1.0]));
            left -= 1;
        }
    }
    p
}

fn random_proper_tf(rng: &mut ChaCha8Rng, den_deg: usize, strict: bool, gain: f64) -> RationalTf {
    let den = random_stable_poly(rng, den_deg);
    let max_num = if strict {
        den_deg.saturating_sub(1)
    } else {
        den_deg
    };
    let num_deg = if max_num == 0 {
        0
    } else {
        rng.random_range(0..=max_num)
    };
    let mut coeffs: Vec<f64> = (0..=num_deg).map(|_| rng.random_range(-2.0..2.0)).collect();
    if coeffs.iter().all(|c| c.abs() < 1e-3) {
        coeffs[0] = 1.0;
    }
    let num = Polynomial::new(coeffs).scale(gain);
    RationalTf::new(num, den).expect("stable denominator is nonzero")
}

/// One random admissible loop: stable blocks with bounded orders, resampled
/// until the assembled base-linear closed loop is Hurwitz and the loop
/// factor M1 stays away from zero on the comparison band.
pub fn random_admissible_system(
    rng: &mut ChaCha8Rng,
    grid: &FrequencyGrid,
) -> Result<(LoopComponents, ClosedLoopHybrid, usize)> {
    const MAX_RESAMPLE: usize = 500;
    for attempt in 0..MAX_RESAMPLE {
        let g_deg = rng.random_range(1..=3usize);
        let g_gain = rng.random_range(0.3..1.5);
        let g = random_proper_tf(rng, g_deg, true, g_gain);
        let c1 = if rng.random_bool(0.5) {
            let k = rng.random_range(0.2..1.5);
            RationalTf::constant(k)
        } else {
            let deg = rng.random_range(1..=2usize);
            random_proper_tf(rng, deg, false, 1.0)
        };
        let c2 = {
            let deg = rng.random_range(1..=3usize);
            let gain = rng.random_range(0.05..0.8);
            random_proper_tf(rng, deg, false, gain)
        };
        let c3 = if rng.random_bool(0.4) {
            RationalTf::zero()
        } else {
            let deg = rng.random_range(1..=2usize);
            let gain = rng.random_range(0.05..0.5);
            random_proper_tf(rng, deg, false, gain)
        };
        let cs = if rng.random_bool(0.4) {
            RationalTf::one()
        } else {
            let deg = rng.random_range(1..=2usize);
            random_proper_tf(rng, deg, false, 1.0)
        };
        let omega_r = if rng.random_bool(0.25) {
            0.0
        } else {
            rng.random_range(0.1..4.0)
        };
        let omega_k: f64 = rng.random_range(0.2..3.0);
        let b_r: f64 = rng.random_range(0.4..1.8);
        let d_r = if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        };
        let gamma: f64 = rng.random_range(-0.85..0.85);
        let reset = ResetElement::from_raw(-omega_r, b_r, omega_k / b_r, d_r, gamma);

        let lc = LoopComponents {
            c1,
            c2,
            c3,
            cs,
            plant: PlantModel::rational(g, 0.0)?,
            reset,
        };
        let Ok(clh) = assemble_closed_loop(&lc, DelayRealization::Omit) else {
            continue;
        };
        let Ok(eigs) = clh.flow_eigenvalues() else {
            continue;
        };
        let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if max_re >= -1e-4 {
            continue;
        }
        let mut min_m1 = f64::INFINITY;
        let mut ok = true;
        for &w in grid.points() {
            match compute_m(&lc, w, DelayMode::Exact) {
                Ok(m) => min_m1 = min_m1.min(m.m1.norm()),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || min_m1 < 1e-3 {
            continue;
        }
        return Ok((lc, clh, attempt));
    }
    Err(Error::BadParams(
        "random system generator exhausted its resampling budget".into(),
    ))
}

/// Compare the matrix-form and FRF-form positivity functions on random
/// admissible loops. Deterministic for a fixed seed.
pub fn equivalence_check(trials: usize, seed: u64) -> Result<EquivalenceReport> {
    if trials == 0 {
        return Err(Error::BadParams("trials must be >= 1".into()));
    }
    let grid = crate::frf::make_log_grid(1e-2, 1e3, 200)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport {
        trials,
        max_rel_dev: 0.0,
        worst_trial: 0,
        worst_omega: f64::NAN,
        d_r_nonzero_trials: 0,
        c3_nonzero_trials: 0,
        cs_nonunity_trials: 0,
        resamples: 0,
    };
    for trial in 0..trials {
        let trial_seed: u64 = master.random();
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let (lc, clh, resamples) = random_admissible_system(&mut rng, &grid)?;
        report.resamples += resamples;
        if lc.reset.d_r != 0.0 {
            report.d_r_nonzero_trials += 1;
        }
        if !lc.c3.is_zero() {
            report.c3_nonzero_trials += 1;
        }
        if lc.cs != RationalTf::one() {
            report.cs_nonunity_trials += 1;
        }
        let params = HbetaParams::new(rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0))?;
        let (beta, rho) = params.matrix_params(&lc.reset);
        let mh = MatrixHbeta::new(&clh, beta, rho)?;
        for &w in grid.points() {
            let m = mh.eval(w)?;
            let f = frf_hbeta(&lc, w, &params, DelayMode::Exact)?;
            let rel = (m - f).norm() / m.norm().max(f.norm()).max(1e-30);
            if rel > report.max_rel_dev {
                report.max_rel_dev = rel;
                report.worst_trial = trial;
                report.worst_omega = w;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frf::make_log_grid;
    use crate::reset::{build_example_controller, ControllerParams};

    fn msd_lc(delay_t: f64) -> LoopComponents {
        let plant = PlantModel::rational(
            RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap(),
            delay_t,
        )
        .unwrap();
        build_example_controller(
            &ControllerParams {
                k_p: 6.5,
                omega_i: 38.71,
                omega_d: 50.0,
                omega_t: 450.0,
                k_g: None,
                gamma: 0.0,
                d_r: 0.0,
                omega_r: 42.66,
                omega_k: 42.66,
            },
            plant,
        )
        .unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_theta(1.0, 0.0), 0.0);
        assert!((wrap_theta(0.0, 1.0) - FRAC_PI_2).abs() < 1e-15);
        assert!((wrap_theta(-1.0, 0.0) - PI).abs() < 1e-15);
        assert!((wrap_theta(-1.0, -1.0) - 5.0 * PI / 4.0).abs() < 1e-15);
        assert!((wrap_theta(1.0, -1.0) + PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn compute_m_with_zero_plant() {
        let mut lc = msd_lc(0.0);
        lc.plant = PlantModel::rational(RationalTf::zero(), 0.0).unwrap();
        lc.c3 = RationalTf::zero();
        let m = compute_m(&lc, 3.0, DelayMode::Exact).unwrap();
        let r = lc.reset.base_linear_tf().eval(3.0).unwrap();
        assert!((m.m1 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(m.m2.norm() < 1e-15);
        assert!((m.m3 - r).norm() < 1e-15);
    }

    #[test]
    fn compute_m_independent_arithmetic_at_resonance() {
        // independent evaluation path: raw complex arithmetic from the
        // defining formulas at omega = omega_r = 42.66, T = 0
        let lc = msd_lc(0.0);
        let w = 42.66;
        let jw = Complex64::new(0.0, w);
        let g = 900.0 / (jw * jw + 12.0 * jw + 900.0);
        let kg = crate::reset::compute_kg(0.0, 42.66).unwrap();
        let c2 = 6.5 * 38.71 * (kg + 1.0 / jw) * ((jw / 50.0 + 1.0) / (jw / 450.0 + 1.0));
        let l = c2 * g;
        let r = 42.66 / (jw + 42.66);
        let c3 = jw / ((kg * jw + 1.0) * 38.71);
        let m = compute_m(&lc, w, DelayMode::Exact).unwrap();
        assert!((r - Complex64::new(0.5, -0.5)).norm() < 1e-12);
        assert!((m.m1 - (1.0 + l * (r + c3))).norm() < 1e-10 * m.m1.norm());
        assert!((m.m2 - l * r).norm() < 1e-10 * m.m2.norm());
        assert!((m.m3 - (1.0 + l * c3) * r).norm() < 1e-10 * m.m3.norm());
    }

    #[test]
    fn compute_m_conjugate_symmetry() {
        let lc = msd_lc(0.0015);
        for &w in &[0.3, 7.7, 42.66, 951.0] {
            let a = compute_m(&lc, w, DelayMode::Exact).unwrap();
            let b = compute_m(&lc, -w, DelayMode::Exact).unwrap();
            assert!((a.m1.conj() - b.m1).norm() < 1e-12 * a.m1.norm());
            assert!((a.m2.conj() - b.m2).norm() < 1e-12 * a.m2.norm().max(1e-12));
            assert!((a.m3.conj() - b.m3).norm() < 1e-12 * a.m3.norm().max(1e-12));
        }
    }

    #[test]
    fn nsv_high_frequency_angle_near_half_pi() {
        // beyond the loop bandwidth N_y dominates and stays positive
        let lc = msd_lc(0.0);
        let s = nsv(&lc, 1e4, DelayMode::Exact).unwrap();
        assert!(s.ny > 0.0);
        assert!((s.theta - FRAC_PI_2).abs() < 0.1, "theta = {}", s.theta);
    }

    #[test]
    fn feasible_interval_examples() {
        let (lo, hi) = feasible_xi_interval(FRAC_PI_2, FRAC_PI_2).unwrap();
        assert!((lo - 0.0).abs() < 1e-15 && (hi - PI).abs() < 1e-15);
        assert!(feasible_xi_interval(0.0, PI).is_none());
        let (lo, hi) = feasible_xi_interval(0.2, 1.9).unwrap();
        assert!(lo < hi);
        assert!((lo - (1.9 - FRAC_PI_2)).abs() < 1e-15);
        assert!((hi - (0.2 + FRAC_PI_2)).abs() < 1e-15);
    }

    #[test]
    fn frf_hbeta_matches_nsv_identity() {
        // Re H = (b' N_x + p' N_y)/|M1|^2
        let lc = msd_lc(0.0);
        let params = HbetaParams::new(-0.7, 1.3).unwrap();
        for &w in &[0.05, 1.0, 42.66, 300.0, 2e4] {
            let s = nsv(&lc, w, DelayMode::Exact).unwrap();
            let h = frf_hbeta(&lc, w, &params, DelayMode::Exact).unwrap();
            let lhs = params.beta_prime * s.nx + params.rho_prime * s.ny;
            let rhs = h.re * s.m.m1.norm_sqr();
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn frf_hbeta_zero_loop_reduces_to_element() {
        let mut lc = msd_lc(0.0);
        lc.plant = PlantModel::rational(RationalTf::zero(), 0.0).unwrap();
        lc.c3 = RationalTf::zero();
        let params = HbetaParams::new(0.4, 2.0).unwrap();
        let w = 5.0;
        let h = frf_hbeta(&lc, w, &params, DelayMode::Exact).unwrap();
        let r = lc.reset.base_linear_tf().eval(w).unwrap();
        assert!((h - r * params.rho_prime).norm() < 1e-14 * h.norm());
    }

    #[test]
    fn matrix_hbeta_scalar_case() {
        // degenerate one-state check: A = [-1], C0 = [2], B0 = [1], w = 0
        let mh = MatrixHbeta {
            a_bar: DMatrix::from_element(1, 1, -1.0),
            b0: DVector::from_element(1, 1.0),
            c0: DMatrix::from_element(1, 1, 2.0),
        };
        let h = mh.eval(0.0).unwrap();
        assert!((h - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matrix_hbeta_conjugate_symmetry() {
        let lc = msd_lc(0.0);
        let clh = assemble_closed_loop(&lc, DelayRealization::Omit).unwrap();
        let params = HbetaParams::new(0.3, 0.9).unwrap();
        let (beta, rho) = params.matrix_params(&lc.reset);
        let mh = MatrixHbeta::new(&clh, beta, rho).unwrap();
        for &w in &[0.5, 12.0, 333.0] {
            let a = mh.eval(w).unwrap();
            let b = mh.eval(-w).unwrap();
            assert!((a.conj() - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn matrix_matches_frf_on_msd() {
        let lc = msd_lc(0.0);
        let clh = assemble_closed_loop(&lc, DelayRealization::Omit).unwrap();
        let params = HbetaParams::new(-0.25, 1.1).unwrap();
        let (beta, rho) = params.matrix_params(&lc.reset);
        let mh = MatrixHbeta::new(&clh, beta, rho).unwrap();
        let grid = make_log_grid(1e-2, 1e5, 500).unwrap();
        for &w in grid.points() {
            let m = mh.eval(w).unwrap();
            let f = frf_hbeta(&lc, w, &params, DelayMode::Exact).unwrap();
            assert!(
                (m - f).norm() <= 1e-8 * m.norm().max(f.norm()),
                "deviation at omega = {w}: {m} vs {f}"
            );
        }
    }

    #[test]
    fn cancellation_detection() {
        let mut lc = msd_lc(0.0);
        lc.c1 = RationalTf::one();
        lc.c3 = RationalTf::zero();
        lc.cs = RationalTf::one();
        // unstable cancellation at +1: L = (s-1)/((s-1)(s+2))
        lc.c2 = RationalTf::from_coeffs(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        lc.plant = PlantModel::rational(RationalTf::from_coeffs(&[1.0], &[2.0, 1.0]).unwrap(), 0.0)
            .unwrap();
        assert!(!cancellation_check(&lc).unwrap());

        // stable cancellation at -1 is permitted
        lc.c2 = RationalTf::from_coeffs(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(cancellation_check(&lc).unwrap());

        // the MSD fixture is cancellation-free
        assert!(cancellation_check(&msd_lc(0.0)).unwrap());
    }

    #[test]
    fn stability_conditions_msd_without_delay() {
        let lc = msd_lc(0.0);
        let grid = make_log_grid(1e-2, 1e6, 3201).unwrap();
        let report = check_stability_conditions(&lc, &grid, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Stable);
        let (t1, t2) = (report.theta1.unwrap(), report.theta2.unwrap());
        assert!(t1 > -FRAC_PI_2 && t2 < PI);
        assert!(t2 - t1 < PI);
        assert!(report.feasible_xi.is_some());
    }

    #[test]
    fn stability_conditions_gamma_boundary_fails() {
        let mut lc = msd_lc(0.0);
        lc.reset.gamma = 1.0;
        let grid = make_log_grid(1e-2, 1e4, 1000).unwrap();
        let report = check_stability_conditions(&lc, &grid, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::NotShown);
        let c = report
            .conditions
            .iter()
            .find(|c| c.name == "gamma_in_open_interval")
            .unwrap();
        assert_eq!(c.status, ConditionStatus::Fail);
    }

    #[test]
    fn stability_conditions_probe_zero_frequency() {
        // integrator-bearing loops skip omega = 0 with a note; loops whose
        // components are all finite at DC include it as an extra sample
        let lc = msd_lc(0.0);
        let grid = make_log_grid(1e-1, 1e4, 700).unwrap();
        let report = check_stability_conditions(&lc, &grid, &AnalysisOptions::default()).unwrap();
        assert!(report.samples[0].omega > 0.0);
        assert!(report.notes.iter().any(|n| n.contains("omega = 0")));

        let no_integrator = LoopComponents {
            c1: RationalTf::one(),
            c2: RationalTf::from_coeffs(&[2.0, 1.0], &[4.0, 1.0]).unwrap(),
            c3: RationalTf::zero(),
            cs: RationalTf::one(),
            plant: PlantModel::rational(RationalTf::from_coeffs(&[1.0], &[1.0, 1.0]).unwrap(), 0.0)
                .unwrap(),
            reset: ResetElement::gfore(2.0, 2.0, 0.0, 0.3),
        };
        let report =
            check_stability_conditions(&no_integrator, &grid, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.samples[0].omega, 0.0);
    }

    #[test]
    fn stability_conditions_sparse_grid_withholds_verdict() {
        let lc = msd_lc(0.0);
        let grid = make_log_grid(1e-2, 1e6, 40).unwrap();
        let report = check_stability_conditions(&lc, &grid, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::NotShown);
    }

    #[test]
    fn grid_parallelism_is_deterministic() {
        let lc = msd_lc(0.0015);
        let grid = make_log_grid(1e-1, 1e5, 600).unwrap();
        let serial = check_stability_conditions(
            &lc,
            &grid,
            &AnalysisOptions {
                threads: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let parallel = check_stability_conditions(
            &lc,
            &grid,
            &AnalysisOptions {
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(serial.samples.len(), parallel.samples.len());
        for (a, b) in serial.samples.iter().zip(&parallel.samples) {
            assert_eq!(a.omega, b.omega);
            assert_eq!(a.nx, b.nx);
            assert_eq!(a.ny, b.ny);
        }
    }

    #[test]
    fn limit_conditions_msd() {
        let lc = msd_lc(0.0);
        let params = HbetaParams::new(-0.2, 1.0).unwrap();
        let lim = limit_conditions(&lc, &params).unwrap();
        assert_eq!(lim.relative_degree, Some(2));
        let analytic = lim.analytic_limit.unwrap();
        assert!((analytic - 42.66 * 42.66).abs() < 1e-9);
        assert!(lim
            .conditions
            .iter()
            .all(|c| c.status == ConditionStatus::Pass));
    }

    #[test]
    fn limit_conditions_ci_wrong_degree() {
        let mut lc = msd_lc(0.0);
        lc.reset = ResetElement::ci(42.66, 0.0);
        let params = HbetaParams::new(-0.2, 1.0).unwrap();
        let lim = limit_conditions(&lc, &params).unwrap();
        let c = &lim.conditions[0];
        assert_eq!(c.status, ConditionStatus::Fail);
        assert!(c.detail.contains("relative degree must be 1"));
    }

    #[test]
    fn equivalence_small_run() {
        let report = equivalence_check(5, 7).unwrap();
        assert!(
            report.max_rel_dev < 1e-8,
            "max deviation {}",
            report.max_rel_dev
        );
    }

    #[test]
    fn params_reject_nonpositive_rho() {
        assert!(HbetaParams::new(0.5, 0.0).is_err());
        assert!(HbetaParams::new(0.5, -1.0).is_err());
        assert!(HbetaParams::from_angle(0.0).is_err());
        assert!(HbetaParams::from_angle(PI).is_err());
    }

    #[test]
    fn positive_scaling_preserves_sign_pattern() {
        // scaling (b', p') by c > 0 scales Re H by c pointwise
        let lc = msd_lc(0.0);
        let params = HbetaParams::new(-0.4, 0.9).unwrap();
        let scaled = HbetaParams::new(-0.4 * 3.5, 0.9 * 3.5).unwrap();
        let grid = make_log_grid(1e-2, 1e5, 200).unwrap();
        for &w in grid.points() {
            let a = frf_hbeta(&lc, w, &params, DelayMode::Exact).unwrap();
            let b = frf_hbeta(&lc, w, &scaled, DelayMode::Exact).unwrap();
            assert!((b.re - 3.5 * a.re).abs() <= 1e-12 * a.re.abs().max(1e-300));
        }
        let s1 = spr_scan(&lc, &params, &grid, DelayMode::Exact);
        let s2 = spr_scan(&lc, &scaled, &grid, DelayMode::Exact);
        assert_eq!(s1.pass, s2.pass);
        assert_eq!(s1.argmin_omega, s2.argmin_omega);
    }

    #[test]
    fn thinning_a_not_shown_grid_never_turns_stable() {
        // sector violations of the delayed reset-integrator loop are dense:
        // dropping every other point must not flip not-shown into stable
        let mut lc = msd_lc(0.0015);
        lc.reset = ResetElement::ci(42.66, 0.0);
        let dense = make_log_grid(1e-2, 1e6, 3201).unwrap();
        let opts = AnalysisOptions::default();
        let full = check_stability_conditions(&lc, &dense, &opts).unwrap();
        assert_eq!(full.verdict, Verdict::NotShown);
        let thinned: Vec<f64> = dense.points().iter().copied().step_by(2).collect();
        let thinned = crate::frf::FrequencyGrid::from_points(thinned).unwrap();
        let half = check_stability_conditions(&lc, &thinned, &opts).unwrap();
        assert_eq!(half.verdict, Verdict::NotShown);
    }

    #[test]
    fn ci_precheck_infeasible_for_random_loops() {
        let grid = make_log_grid(1e-2, 1e3, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let (mut lc, _, _) = random_admissible_system(&mut rng, &grid).unwrap();
            lc.reset = ResetElement::ci(lc.reset.omega_k().abs().max(0.5), lc.reset.gamma);
            lc.plant.delay_t = 0.002;
            let v = ci_delay_precheck(&lc, 0.002).unwrap();
            assert_eq!(v.kind, FeasibilityKind::InfeasibleByDelay);
        }
    }
}
