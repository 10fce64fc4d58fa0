//! Command implementations. Exit codes: 0 = stable / success, 2 = not
//! shown, 3 = infeasible by delay, 1 = any error (including usage errors).

use std::path::PathBuf;

use nalgebra::DVector;
use serde::Serialize;

use rcstab_core::delay::FeasibilityKind;
use rcstab_core::frf::{make_density_grid, make_log_grid, DelayMode, FrequencyGrid};
use rcstab_core::hbeta::{analyze, equivalence_check, AnalysisOptions, Verdict};
use rcstab_core::reset::{assemble_closed_loop, DelayRealization};
use rcstab_core::sim::{
    convergence_probe, simulate, BohlInput, BohlSignal, InputChannel, SimConfig,
};

use crate::config::{parse_system_config, AnalysisSettings, SystemConfig};
use crate::report::{
    atomic_write, write_report, write_sim_trace, write_theta_trace, Meta, Report, ReportBody,
    REPORT_SCHEMA,
};
use crate::CliError;

fn thread_cap() -> usize {
    match std::env::var("RCS_HBETA_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .unwrap_or(1),
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(8),
    }
}

fn build_grid(
    cfg: &SystemConfig,
    s: &AnalysisSettings,
    points: Option<usize>,
) -> Result<FrequencyGrid, CliError> {
    let (mut lo, mut hi) = (s.wmin, s.wmax);
    if let Some((band_lo, band_hi)) = cfg.lc.plant.band() {
        lo = lo.max(band_lo);
        hi = hi.min(band_hi);
        if hi <= lo {
            return Err(CliError::Usage(format!(
                "requested band [{}, {}] does not overlap the measured band [{band_lo}, {band_hi}]",
                s.wmin, s.wmax
            )));
        }
    }
    let grid = match points {
        Some(n) => make_log_grid(lo, hi, n)?,
        None => make_density_grid(lo, hi, s.points_per_decade)?,
    };
    Ok(grid)
}

pub struct AnalyzeArgs {
    pub system: PathBuf,
    pub wmin: Option<f64>,
    pub wmax: Option<f64>,
    pub points: Option<usize>,
    pub delay_mode: Option<DelayMode>,
    pub out: PathBuf,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    let cfg = parse_system_config(&args.system)?;
    let mut settings = cfg.analysis;
    if let Some(v) = args.wmin {
        settings.wmin = v;
    }
    if let Some(v) = args.wmax {
        settings.wmax = v;
    }
    if let Some(m) = args.delay_mode {
        settings.delay_mode = m;
    }
    if !(settings.wmin > 0.0 && settings.wmax > settings.wmin) {
        return Err(CliError::Usage("need 0 < wmin < wmax".into()));
    }
    let grid = build_grid(&cfg, &settings, args.points)?;
    let opts = AnalysisOptions {
        delay_mode: settings.delay_mode,
        threads: thread_cap(),
        ..Default::default()
    };
    let analysis = analyze(&cfg.lc, &grid, &opts)?;

    let report = Report {
        schema: REPORT_SCHEMA,
        meta: Meta::now(None),
        body: ReportBody::from_analysis(&analysis),
    };
    write_report(&args.out.join("report.json"), &report)?;
    write_theta_trace(&args.out.join("theta_trace.csv"), &analysis.report.samples)?;

    println!(
        "verdict: {} (band [{}, {}] rad/s, {} samples, {} undefined)",
        analysis.report.verdict.as_str(),
        analysis.report.band.0,
        analysis.report.band.1,
        analysis.report.samples.len(),
        analysis.report.undefined_count,
    );
    for c in &analysis.report.conditions {
        println!(
            "  [{}] {}{}",
            match c.status {
                rcstab_core::hbeta::ConditionStatus::Pass => "pass",
                rcstab_core::hbeta::ConditionStatus::Fail => "FAIL",
                rcstab_core::hbeta::ConditionStatus::NotApplicable => "n/a ",
            },
            c.name,
            if c.detail.is_empty() {
                String::new()
            } else {
                format!(": {}", c.detail)
            }
        );
    }
    for n in &analysis.report.notes {
        println!("  note: {n}");
    }
    Ok(match analysis.report.verdict {
        Verdict::Stable => 0,
        Verdict::NotShown => 2,
        Verdict::InfeasibleByDelay => 3,
    })
}

/// Input spec grammar: `+`-separated terms, each `[d:]kind:args`:
/// `step:A`, `ramp:K`, `sine:A:W[:PHI]`. The `d:` prefix routes the term to
/// the disturbance channel.
pub fn parse_input_spec(spec: &str) -> Result<Vec<BohlInput>, CliError> {
    let mut inputs = Vec::new();
    for term in spec.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(CliError::Usage("empty input term".into()));
        }
        let (channel, rest) = if let Some(r) = term.strip_prefix("d:") {
            (InputChannel::Disturbance, r)
        } else if let Some(r) = term.strip_prefix("r:") {
            (InputChannel::Reference, r)
        } else {
            (InputChannel::Reference, term)
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad number `{s}` in input spec: {e}")))
        };
        let signal = match parts.as_slice() {
            ["step", a] => BohlSignal::step(num(a)?),
            ["ramp", k] => BohlSignal::ramp(num(k)?),
            ["sine", a, w] => BohlSignal::sine(num(a)?, num(w)?, 0.0),
            ["sine", a, w, p] => BohlSignal::sine(num(a)?, num(w)?, num(p)?),
            _ => {
                return Err(CliError::Usage(format!(
                    "bad input term `{term}`: expected step:A, ramp:K or sine:A:W[:PHI]"
                )))
            }
        }
        .map_err(CliError::Core)?;
        inputs.push(BohlInput { signal, channel });
    }
    Ok(inputs)
}

fn parse_x0(spec: &str, dim: usize) -> Result<DVector<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| CliError::Usage(format!("bad x0 list: {e}")))?;
    if vals.len() != dim {
        return Err(CliError::Usage(format!(
            "x0 has {} entries, the closed loop has {dim} states",
            vals.len()
        )));
    }
    Ok(DVector::from_vec(vals))
}

pub struct SimulateArgs {
    pub system: PathBuf,
    pub input: String,
    pub x0: Option<String>,
    pub x0b: Option<String>,
    pub convergence: bool,
    pub t_end: f64,
    pub dt: f64,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SimSummary {
    schema: &'static str,
    reset_count: usize,
    sup_state_norm: f64,
    dwell_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    nonfinite_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_ratio_at_tend: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_decay_rate: Option<f64>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let cfg = parse_system_config(&args.system)?;
    // time-domain runs need a realized delay: the exact-delay mode falls
    // back to the default Pade order
    let realization = if cfg.lc.plant.delay_t > 0.0 {
        match cfg.analysis.delay_mode {
            DelayMode::Pade(k) => DelayRealization::Pade(k),
            DelayMode::Exact => DelayRealization::Pade(5),
        }
    } else {
        DelayRealization::Omit
    };
    let clh = assemble_closed_loop(&cfg.lc, realization)?;
    let inputs = parse_input_spec(&args.input)?;
    let sim_cfg = SimConfig::new(args.dt, args.t_end)?;
    let x0 = match &args.x0 {
        Some(s) => parse_x0(s, clh.n_states())?,
        None => DVector::zeros(clh.n_states()),
    };

    let res = simulate(&clh, &inputs, &x0, &sim_cfg)?;
    write_sim_trace(&args.out.join("trace.csv"), &res)?;

    let mut summary = SimSummary {
        schema: "rcs-sim-summary/1",
        reset_count: res.reset_instants.len(),
        sup_state_norm: res.sup_state_norm(),
        dwell_violations: res.flags.dwell_violations,
        nonfinite_at: res.flags.nonfinite_at,
        convergence_ratio_at_tend: None,
        convergence_decay_rate: None,
    };
    if args.convergence {
        let x0b = match &args.x0b {
            Some(s) => parse_x0(s, clh.n_states())?,
            None => {
                let mut v = x0.clone();
                // default perturbation on the first non-reset state
                if v.len() > 1 {
                    v[1] += 1e-3;
                }
                v
            }
        };
        let probe = convergence_probe(&clh, &inputs, &x0, &x0b, &sim_cfg)?;
        summary.convergence_ratio_at_tend = probe.ratio_at_tend;
        summary.convergence_decay_rate = probe.decay_rate;
    }
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    atomic_write(&args.out.join("summary.json"), &json)?;

    println!(
        "simulated {} s: {} reset(s), sup |x| = {:.6e}{}",
        args.t_end,
        summary.reset_count,
        summary.sup_state_norm,
        match summary.nonfinite_at {
            Some(t) => format!(", DIVERGED at t = {t}"),
            None => String::new(),
        }
    );
    if let Some(r) = summary.convergence_ratio_at_tend {
        println!("convergence ratio at t_end: {r:.6e}");
    }
    Ok(0)
}

pub fn cmd_equiv_check(trials: usize, seed: u64) -> Result<i32, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let rep = equivalence_check(trials, seed)?;
    println!(
        "equivalence: trials={} seed={} max_rel_dev={:.3e} (worst trial {} at omega = {:.4e}; \
         {} D_r != 0, {} C3 != 0, {} Cs != 1)",
        rep.trials,
        seed,
        rep.max_rel_dev,
        rep.worst_trial,
        rep.worst_omega,
        rep.d_r_nonzero_trials,
        rep.c3_nonzero_trials,
        rep.cs_nonunity_trials,
    );
    Ok(if rep.max_rel_dev < 1e-8 { 0 } else { 1 })
}

pub struct DelayStudyArgs {
    pub system: PathBuf,
    pub delays: Vec<f64>,
    pub out: PathBuf,
}

pub fn cmd_delay_study(args: &DelayStudyArgs) -> Result<i32, CliError> {
    if args.delays.is_empty() {
        return Err(CliError::Usage("--delays needs at least one value".into()));
    }
    let cfg = parse_system_config(&args.system)?;
    let settings = cfg.analysis;
    let opts = AnalysisOptions {
        delay_mode: settings.delay_mode,
        threads: thread_cap(),
        ..Default::default()
    };
    let mut csv =
        String::from("delay_s,precheck,sign_changes_x,sign_changes_y,theta1,theta2,verdict\n");
    for &t in &args.delays {
        if t < 0.0 || !t.is_finite() {
            return Err(CliError::Usage(format!("bad delay {t}")));
        }
        let mut lc = cfg.lc.clone();
        lc.plant.delay_t = t;
        let grid = build_grid(&cfg, &settings, None)?;
        let analysis = analyze(&lc, &grid, &opts)?;
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t,
            match analysis.delay_feasibility.kind {
                FeasibilityKind::Feasible => "feasible",
                FeasibilityKind::InfeasibleByDelay => "infeasible-by-delay",
            },
            analysis.delay_feasibility.evidence.sign_changes_x,
            analysis.delay_feasibility.evidence.sign_changes_y,
            fmt_opt(analysis.report.theta1),
            fmt_opt(analysis.report.theta2),
            analysis.report.verdict.as_str(),
        ));
        println!(
            "T = {t} s: precheck {}, verdict {}",
            match analysis.delay_feasibility.kind {
                FeasibilityKind::Feasible => "feasible",
                FeasibilityKind::InfeasibleByDelay => "infeasible-by-delay",
            },
            analysis.report.verdict.as_str()
        );
    }
    atomic_write(&args.out.join("delay_study.csv"), csv.as_bytes())?;
    Ok(0)
}
