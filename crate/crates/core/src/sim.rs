//! Time-domain validation: fixed-step integration of the closed-loop flow,
//! bisection-localized trigger crossings, state jumps, and empirical
//! boundedness / convergence probes.
//!
//! Trajectories follow the left-continuous convention: the row recorded at
//! a reset instant holds the pre-jump state, and the post-jump state is
//! recorded at the same timestamp flagged as `post`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::reset::ClosedLoopHybrid;

/// Finite combination of step / ramp / sinusoid terms, closed under sums.
#[derive(Debug, Clone, PartialEq)]
pub enum BohlSignal {
    Step {
        amplitude: f64,
    },
    Ramp {
        slope: f64,
    },
    Sine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    Sum(Vec<BohlSignal>),
}

impl BohlSignal {
    pub fn step(amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::BadParams("step amplitude must be finite".into()));
        }
        Ok(BohlSignal::Step { amplitude })
    }

    pub fn ramp(slope: f64) -> Result<Self> {
        if !slope.is_finite() {
            return Err(Error::BadParams("ramp slope must be finite".into()));
        }
        Ok(BohlSignal::Ramp { slope })
    }

    pub fn sine(amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        if !amplitude.is_finite() || !omega.is_finite() || !phase.is_finite() {
            return Err(Error::BadParams("sine parameters must be finite".into()));
        }
        Ok(BohlSignal::Sine {
            amplitude,
            omega,
            phase,
        })
    }

    pub fn sum(terms: Vec<BohlSignal>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::BadParams("sum needs at least one term".into()));
        }
        Ok(BohlSignal::Sum(terms))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BohlSignal::Step { amplitude } => *amplitude,
            BohlSignal::Ramp { slope } => slope * t,
            BohlSignal::Sine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
            BohlSignal::Sum(terms) => terms.iter().map(|s| s.eval(t)).sum(),
        }
    }

    /// True when the signal stays bounded on [0, inf) (ramps do not).
    pub fn is_bounded(&self) -> bool {
        match self {
            BohlSignal::Step { .. } | BohlSignal::Sine { .. } => true,
            BohlSignal::Ramp { .. } => false,
            BohlSignal::Sum(terms) => terms.iter().all(|s| s.is_bounded()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputChannel {
    Reference,
    Disturbance,
}

/// A Bohl signal routed to one of the two exogenous channels.
#[derive(Debug, Clone, PartialEq)]
pub struct BohlInput {
    pub signal: BohlSignal,
    pub channel: InputChannel,
}

impl BohlInput {
    pub fn reference(signal: BohlSignal) -> Self {
        BohlInput {
            signal,
            channel: InputChannel::Reference,
        }
    }

    pub fn disturbance(signal: BohlSignal) -> Self {
        BohlInput {
            signal,
            channel: InputChannel::Disturbance,
        }
    }
}

fn input_values(inputs: &[BohlInput], t: f64) -> (f64, f64) {
    let mut r = 0.0;
    let mut d = 0.0;
    for input in inputs {
        match input.channel {
            InputChannel::Reference => r += input.signal.eval(t),
            InputChannel::Disturbance => d += input.signal.eval(t),
        }
    }
    (r, d)
}

/// Fixed-step integrator configuration (classic 4th-order Runge-Kutta).
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Minimum spacing between applied resets; violations are flagged,
    /// the offending jump is skipped.
    pub dwell_min: f64,
    /// Bisection window for trigger localization, in seconds.
    pub event_tol: f64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = SimConfig {
            dt,
            t_end,
            dwell_min: 1e-6,
            event_tol: 1e-9,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.event_tol > 0.0 && self.event_tol < self.dt && self.dt <= self.t_end)
            || self.dwell_min < 0.0
            || self.dwell_min.is_nan()
        {
            return Err(Error::BadParams(
                "need 0 < event_tol < dt <= t_end and dwell_min >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimFlags {
    pub dwell_violations: usize,
    /// Time at which the state left the finite range, if it did.
    pub nonfinite_at: Option<f64>,
    pub bisection_saturated: usize,
}

/// Recorded trajectory. Rows at reset instants come in pre/post pairs that
/// share a timestamp; `post_jump` marks the second row of each pair.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub y: Vec<f64>,
    pub e_r: Vec<f64>,
    pub u_r: Vec<f64>,
    pub u_1: Vec<f64>,
    pub post_jump: Vec<bool>,
    pub reset_instants: Vec<f64>,
    pub flags: SimFlags,
}

impl SimResult {
    pub fn sup_state_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Rows aligned with the plain integration grid i * dt (post-jump rows
    /// win when a reset lands exactly on a grid time), for trajectory
    /// comparisons across runs with different reset sequences.
    pub fn grid_rows(&self, cfg: &SimConfig) -> Vec<(f64, &DVector<f64>)> {
        let mut out = Vec::new();
        let n_steps = (cfg.t_end / cfg.dt).ceil() as usize;
        let mut idx = 0usize;
        for i in 0..=n_steps {
            let t = (i as f64 * cfg.dt).min(cfg.t_end);
            let mut found: Option<usize> = None;
            while idx < self.times.len() && self.times[idx] <= t {
                if self.times[idx] == t {
                    found = Some(idx);
                }
                idx += 1;
            }
            if let Some(row) = found {
                out.push((t, &self.states[row]));
            } else {
                break;
            }
        }
        out
    }
}

struct Outputs<'a> {
    clh: &'a ClosedLoopHybrid,
    inputs: &'a [BohlInput],
}

impl Outputs<'_> {
    fn w(&self, t: f64) -> (f64, f64) {
        input_values(self.inputs, t)
    }

    fn deriv(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let (r, d) = self.w(t);
        let mut dx = &self.clh.a_bar * x;
        for i in 0..dx.len() {
            dx[i] += self.clh.b_bar[(i, 0)] * r + self.clh.b_bar[(i, 1)] * d;
        }
        dx
    }

    fn rk4(&self, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
        let k1 = self.deriv(t, x);
        let k2 = self.deriv(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
        let k3 = self.deriv(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
        let k4 = self.deriv(t + h, &(x + &k3 * h));
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }

    fn e_r(&self, t: f64, x: &DVector<f64>) -> f64 {
        let (r, d) = self.w(t);
        let mut v = self.clh.de_bar[(0, 0)] * r + self.clh.de_bar[(0, 1)] * d;
        for j in 0..x.len() {
            v += self.clh.ce_bar[(0, j)] * x[j];
        }
        v
    }

    fn u_1(&self, t: f64, x: &DVector<f64>) -> f64 {
        let (r, d) = self.w(t);
        let mut v = self.clh.du_bar[(0, 0)] * r + self.clh.du_bar[(0, 1)] * d;
        for j in 0..x.len() {
            v += self.clh.cu_bar[(0, j)] * x[j];
        }
        v
    }

    fn y(&self, x: &DVector<f64>) -> f64 {
        let mut v = 0.0;
        for j in 0..x.len() {
            v += self.clh.c_bar[(0, j)] * x[j];
        }
        v
    }
}

const DIVERGENCE_NORM: f64 = 1e12;
/// Relative threshold on |(I - A_rho) x|: smaller jumps change nothing and
/// are skipped to keep the reset sequence well posed.
const EPS_JUMP_REL: f64 = 1e-12;

/// Integrate the hybrid closed loop from `x0` under the given inputs.
///
/// Divergence (non-finite state or norm above 1e12) truncates the run and
/// is reported through `flags.nonfinite_at` rather than an error so probes
/// can still inspect the partial trajectory.
pub fn simulate(
    clh: &ClosedLoopHybrid,
    inputs: &[BohlInput],
    x0: &DVector<f64>,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    let n = clh.n_states();
    if x0.len() != n {
        return Err(Error::BadParams(format!(
            "x0 has dimension {}, expected {n}",
            x0.len()
        )));
    }
    let out = Outputs { clh, inputs };
    let gamma = clh.reset.gamma;

    let mut res = SimResult {
        times: Vec::new(),
        states: Vec::new(),
        y: Vec::new(),
        e_r: Vec::new(),
        u_r: Vec::new(),
        u_1: Vec::new(),
        post_jump: Vec::new(),
        reset_instants: Vec::new(),
        flags: SimFlags::default(),
    };
    let record = |t: f64, x: &DVector<f64>, post: bool, res: &mut SimResult| {
        let u1 = out.u_1(t, x);
        res.times.push(t);
        res.y.push(out.y(x));
        res.e_r.push(out.e_r(t, x));
        res.u_1.push(u1);
        res.u_r.push(clh.reset.c_r * x[0] + clh.reset.d_r * u1);
        res.states.push(x.clone());
        res.post_jump.push(post);
    };

    let mut t_cur = 0.0f64;
    let mut x_cur = x0.clone();
    let mut last_reset: Option<f64> = None;
    record(t_cur, &x_cur, false, &mut res);

    let n_steps = (cfg.t_end / cfg.dt).ceil() as usize;
    'outer: for i in 1..=n_steps {
        let t_grid = (i as f64 * cfg.dt).min(cfg.t_end);
        // integrate up to the next grid time, handling any crossings inside
        loop {
            let h = t_grid - t_cur;
            if h <= 0.0 {
                break;
            }
            let x_trial = out.rk4(t_cur, &x_cur, h);
            let e0 = out.e_r(t_cur, &x_cur);
            let e1 = out.e_r(t_cur + h, &x_trial);
            let crossing = e0 * e1 < 0.0 || (e1 == 0.0 && e0 != 0.0);
            if !crossing {
                t_cur += h;
                x_cur = x_trial;
                break;
            }
            // bisect for the crossing offset in (0, h]
            let mut lo = 0.0f64;
            let mut hi = h;
            let mut x_hi = x_trial.clone();
            let mut iters = 0usize;
            while hi - lo > cfg.event_tol && iters < 128 {
                let mid = 0.5 * (lo + hi);
                let x_mid = out.rk4(t_cur, &x_cur, mid);
                let e_mid = out.e_r(t_cur + mid, &x_mid);
                if e0 * e_mid < 0.0 || e_mid == 0.0 {
                    hi = mid;
                    x_hi = x_mid;
                } else {
                    lo = mid;
                }
                iters += 1;
            }
            if iters >= 128 {
                res.flags.bisection_saturated += 1;
            }
            let t_star = t_cur + hi;
            let x_star = x_hi;

            let jump_size = ((1.0 - gamma) * x_star[0]).abs();
            let dwell_ok = last_reset.is_none_or(|tr| t_star - tr >= cfg.dwell_min);
            if jump_size > EPS_JUMP_REL * x_star.norm() {
                if dwell_ok {
                    record(t_star, &x_star, false, &mut res);
                    let mut x_post = x_star.clone();
                    x_post[0] *= gamma;
                    record(t_star, &x_post, true, &mut res);
                    res.reset_instants.push(t_star);
                    last_reset = Some(t_star);
                    t_cur = t_star;
                    x_cur = x_post;
                } else {
                    res.flags.dwell_violations += 1;
                    t_cur = t_star;
                    x_cur = x_star;
                }
            } else {
                // crossing without an effective state change: flow through
                t_cur = t_star;
                x_cur = x_star;
            }
            if !state_finite(&x_cur) {
                res.flags.nonfinite_at = Some(t_cur);
                break 'outer;
            }
        }
        record(t_cur, &x_cur, false, &mut res);
        if !state_finite(&x_cur) {
            res.flags.nonfinite_at = Some(t_cur);
            break;
        }
    }
    Ok(res)
}

fn state_finite(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite()) && x.norm() <= DIVERGENCE_NORM
}

/// Trajectory separation study between two initial conditions.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceProbe {
    /// Fitted exponential rate of |x_a - x_b| over the second half of the
    /// horizon; None when not estimable.
    pub decay_rate: Option<f64>,
    /// |x_a - x_b|(t_end) / |x_a - x_b|(0); None for identical starts.
    pub ratio_at_tend: Option<f64>,
    pub delta_start: f64,
    pub delta_end: f64,
}

pub fn convergence_probe(
    clh: &ClosedLoopHybrid,
    inputs: &[BohlInput],
    x0_a: &DVector<f64>,
    x0_b: &DVector<f64>,
    cfg: &SimConfig,
) -> Result<ConvergenceProbe> {
    let res_a = simulate(clh, inputs, x0_a, cfg)?;
    let res_b = simulate(clh, inputs, x0_b, cfg)?;
    let rows_a = res_a.grid_rows(cfg);
    let rows_b = res_b.grid_rows(cfg);
    let n = rows_a.len().min(rows_b.len());
    let delta_start = (x0_a - x0_b).norm();
    if delta_start == 0.0 {
        return Ok(ConvergenceProbe {
            decay_rate: None,
            ratio_at_tend: None,
            delta_start,
            delta_end: 0.0,
        });
    }
    let mut ts = Vec::with_capacity(n);
    let mut deltas = Vec::with_capacity(n);
    for k in 0..n {
        debug_assert_eq!(rows_a[k].0, rows_b[k].0);
        ts.push(rows_a[k].0);
        deltas.push((rows_a[k].1 - rows_b[k].1).norm());
    }
    let delta_end = *deltas.last().unwrap();

    // least-squares slope of ln delta over the second half
    let half = cfg.t_end * 0.5;
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(&deltas)
        .filter(|&(&t, &d)| t >= half && d > 0.0 && d.is_finite())
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    let decay_rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        (denom.abs() > 0.0).then(|| (n * sxy - sx * sy) / denom)
    } else {
        None
    };
    Ok(ConvergenceProbe {
        decay_rate,
        ratio_at_tend: Some(delta_end / delta_start),
        delta_start,
        delta_end,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct UbibsOutcome {
    pub pass: bool,
    pub sup_norm: f64,
    pub reset_count: usize,
}

/// Run a suite of bounded inputs from the origin and check the state stays
/// below `bound`. Ramp-bearing inputs are rejected: they are unbounded and
/// say nothing about bounded-input behavior.
pub fn ubibs_probe(
    clh: &ClosedLoopHybrid,
    suite: &[Vec<BohlInput>],
    cfg: &SimConfig,
    bound: f64,
) -> Result<Vec<UbibsOutcome>> {
    let mut out = Vec::with_capacity(suite.len());
    for inputs in suite {
        if inputs.iter().any(|i| !i.signal.is_bounded()) {
            return Err(Error::BadParams(
                "ubibs probe needs bounded inputs (no ramps)".into(),
            ));
        }
        let x0 = DVector::zeros(clh.n_states());
        let res = simulate(clh, inputs, &x0, cfg)?;
        let sup = res.sup_state_norm();
        out.push(UbibsOutcome {
            pass: res.flags.nonfinite_at.is_none() && sup <= bound,
            sup_norm: sup,
            reset_count: res.reset_instants.len(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frf::PlantModel;
    use crate::poly::RationalTf;
    use crate::reset::{
        assemble_closed_loop, build_example_controller, ControllerParams, DelayRealization,
    };

    fn msd_clh(gamma: f64) -> ClosedLoopHybrid {
        let plant = PlantModel::rational(
            RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let mut lc = build_example_controller(
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
        .unwrap();
        lc.reset.gamma = gamma;
        assemble_closed_loop(&lc, DelayRealization::Omit).unwrap()
    }

    #[test]
    fn bohl_values() {
        assert_eq!(BohlSignal::step(2.0).unwrap().eval(5.0), 2.0);
        let s = BohlSignal::sine(1.0, 3.0, 0.0).unwrap();
        assert!((s.eval(std::f64::consts::PI / 6.0) - 1.0).abs() < 1e-15);
        let sum = BohlSignal::sum(vec![
            BohlSignal::step(1.0).unwrap(),
            BohlSignal::sine(0.5, 10.0, 0.0).unwrap(),
        ])
        .unwrap();
        let t = 0.37;
        assert!((sum.eval(t) - (1.0 + 0.5 * (10.0 * t).sin())).abs() < 1e-15);
        assert!(BohlSignal::step(f64::NAN).is_err());
    }

    #[test]
    fn zero_input_zero_state_stays_at_rest() {
        let clh = msd_clh(0.0);
        let cfg = SimConfig::new(1e-3, 0.2).unwrap();
        let res = simulate(&clh, &[], &DVector::zeros(6), &cfg).unwrap();
        assert!(res.reset_instants.is_empty());
        assert!(res.sup_state_norm() == 0.0);
    }

    #[test]
    fn step_response_resets_and_stays_bounded() {
        let clh = msd_clh(0.0);
        let cfg = SimConfig::new(1e-4, 1.0).unwrap();
        let inputs = [BohlInput::reference(BohlSignal::step(1.0).unwrap())];
        let res = simulate(&clh, &inputs, &DVector::zeros(6), &cfg).unwrap();
        assert!(!res.reset_instants.is_empty());
        assert!(res.flags.nonfinite_at.is_none());
        assert!(res.sup_state_norm() < 100.0);
        // trigger is small at every recorded reset
        for (i, post) in res.post_jump.iter().enumerate() {
            if *post {
                assert!(res.e_r[i].abs() < 1e-3, "e_r = {} at reset", res.e_r[i]);
            }
        }
    }

    #[test]
    fn jump_scales_only_the_reset_state() {
        let clh = msd_clh(0.3);
        let cfg = SimConfig::new(1e-4, 0.5).unwrap();
        let inputs = [BohlInput::reference(BohlSignal::step(1.0).unwrap())];
        let res = simulate(&clh, &inputs, &DVector::zeros(6), &cfg).unwrap();
        assert!(!res.reset_instants.is_empty());
        let mut checked = 0;
        for i in 1..res.times.len() {
            if res.post_jump[i] {
                let pre = &res.states[i - 1];
                let post = &res.states[i];
                assert_eq!(post[0], 0.3 * pre[0]);
                for j in 1..pre.len() {
                    assert_eq!(post[j], pre[j], "x_l changed across jump");
                }
                checked += 1;
            }
        }
        assert_eq!(checked, res.reset_instants.len());
    }

    #[test]
    fn dwell_spacing_holds() {
        let clh = msd_clh(0.0);
        let mut cfg = SimConfig::new(1e-4, 1.0).unwrap();
        cfg.dwell_min = 1e-3;
        let inputs = [BohlInput::reference(
            BohlSignal::sine(1.0, 42.66, 0.0).unwrap(),
        )];
        let res = simulate(&clh, &inputs, &DVector::zeros(6), &cfg).unwrap();
        for pair in res.reset_instants.windows(2) {
            assert!(pair[1] - pair[0] >= cfg.dwell_min);
        }
    }

    #[test]
    fn gamma_one_never_jumps() {
        let clh = msd_clh(1.0);
        let cfg = SimConfig::new(1e-4, 0.5).unwrap();
        let inputs = [BohlInput::reference(BohlSignal::step(1.0).unwrap())];
        let res = simulate(&clh, &inputs, &DVector::zeros(6), &cfg).unwrap();
        assert!(res.reset_instants.is_empty());
    }

    #[test]
    fn refinement_is_fourth_order_between_resets() {
        // smooth segment: gamma = 1 keeps the flow linear throughout
        let clh = msd_clh(1.0);
        let inputs = [BohlInput::reference(
            BohlSignal::sine(1.0, 20.0, 0.0).unwrap(),
        )];
        let mut y_end = Vec::new();
        for &dt in &[4e-4, 2e-4, 1e-4] {
            let cfg = SimConfig::new(dt, 0.25).unwrap();
            let res = simulate(&clh, &inputs, &DVector::zeros(6), &cfg).unwrap();
            y_end.push(*res.y.last().unwrap());
        }
        let d1 = (y_end[0] - y_end[1]).abs();
        let d2 = (y_end[1] - y_end[2]).abs();
        assert!(
            d2 < d1 / 4.0,
            "halving dt shrank the error only {d1} -> {d2}"
        );
    }

    #[test]
    fn convergence_identical_starts() {
        let clh = msd_clh(0.0);
        let cfg = SimConfig::new(1e-4, 0.2).unwrap();
        let inputs = [BohlInput::reference(
            BohlSignal::sine(1.0, 10.0, 0.0).unwrap(),
        )];
        let x0 = DVector::zeros(6);
        let probe = convergence_probe(&clh, &inputs, &x0, &x0, &cfg).unwrap();
        assert!(probe.decay_rate.is_none());
        assert!(probe.ratio_at_tend.is_none());
        assert_eq!(probe.delta_end, 0.0);
    }

    #[test]
    fn perturbed_starts_converge() {
        let clh = msd_clh(0.0);
        let cfg = SimConfig::new(1e-4, 2.0).unwrap();
        let inputs = [BohlInput::reference(
            BohlSignal::sine(1.0, 10.0, 0.0).unwrap(),
        )];
        let x0a = DVector::zeros(6);
        let mut x0b = DVector::zeros(6);
        x0b[2] = 1e-3;
        let probe = convergence_probe(&clh, &inputs, &x0a, &x0b, &cfg).unwrap();
        let ratio = probe.ratio_at_tend.unwrap();
        assert!(ratio < 0.01, "ratio {ratio}");
    }

    #[test]
    fn unstable_loop_reports_separation_growth() {
        // flip the loop sign: positive feedback destabilizes the base loop
        let plant = PlantModel::rational(
            RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let mut lc = build_example_controller(
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
        .unwrap();
        lc.c2 = crate::poly::series(&lc.c2, &RationalTf::constant(-1.0)).unwrap();
        let clh = assemble_closed_loop(&lc, DelayRealization::Omit).unwrap();
        let max_re = clh
            .flow_eigenvalues()
            .unwrap()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re > 0.0, "fixture should be base-linear unstable");

        let cfg = SimConfig::new(1e-5, 0.3).unwrap();
        let inputs = [BohlInput::reference(
            BohlSignal::sine(1.0, 10.0, 0.0).unwrap(),
        )];
        let x0a = DVector::zeros(clh.n_states());
        let mut x0b = x0a.clone();
        x0b[2] = 1e-6;
        let probe = convergence_probe(&clh, &inputs, &x0a, &x0b, &cfg).unwrap();
        assert!(probe.ratio_at_tend.unwrap() > 1.0);
    }

    #[test]
    fn divergence_is_flagged_not_thrown() {
        let plant = PlantModel::rational(
            RationalTf::from_coeffs(&[900.0], &[900.0, 12.0, 1.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let mut lc = build_example_controller(
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
        .unwrap();
        lc.c2 = crate::poly::series(&lc.c2, &RationalTf::constant(-1.0)).unwrap();
        let clh = assemble_closed_loop(&lc, DelayRealization::Omit).unwrap();
        let cfg = SimConfig::new(1e-4, 2.0).unwrap();
        let inputs = [BohlInput::reference(BohlSignal::step(1.0).unwrap())];
        let res = simulate(&clh, &inputs, &DVector::zeros(clh.n_states()), &cfg).unwrap();
        let t_stop = res.flags.nonfinite_at.expect("divergence flagged");
        assert!(t_stop < cfg.t_end);
        assert!(*res.times.last().unwrap() <= t_stop);
    }

    #[test]
    fn ubibs_suite_on_msd() {
        let clh = msd_clh(0.0);
        let cfg = SimConfig::new(1e-4, 1.0).unwrap();
        let suite = vec![
            vec![BohlInput::reference(BohlSignal::step(1.0).unwrap())],
            vec![BohlInput::reference(
                BohlSignal::sine(1.0, 10.0, 0.0).unwrap(),
            )],
            vec![],
        ];
        let outcomes = ubibs_probe(&clh, &suite, &cfg, 50.0).unwrap();
        assert!(outcomes.iter().all(|o| o.pass));
        assert_eq!(outcomes[2].sup_norm, 0.0);

        let ramp_suite = vec![vec![BohlInput::reference(BohlSignal::ramp(1.0).unwrap())]];
        assert!(ubibs_probe(&clh, &ramp_suite, &cfg, 50.0).is_err());
    }
}
