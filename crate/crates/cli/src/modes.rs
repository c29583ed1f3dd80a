//! Mode dispatch. Each mode returns its checks and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relulab::dynamics::{fmt_float, gf_run_with, normal_init, GfConfig, DIVERGENCE_RISK};
use relulab::hessian::{hessian_matrix, minor_matrix};
use relulab::linalg::{lu_det, sym_eigen};
use relulab::verify::{central_gradient, central_jacobian, max_rel_err, GRADIENT_STEP, RISK_STEP};
use relulab::{
    chart_to_params, det_product_formula, fit_rate, gd_run, generalized_gradient, hessian,
    moment_matrix, multistart_run, pad_width, risk, witness, FitOutcome, GdConfig, ManifoldChart,
    ParamVec, Problem, RunStatus, TrajectoryRecord,
};
use serde::Serialize;

use crate::config::{
    CertifyParams, CheckGradientParams, DescentParams, ExperimentConfig, FlowParams, HessianParams,
    Init, ManifoldParams, ModeConfig, MultistartParams, RatesParams,
};
use crate::error::{CliError, Result};
use crate::plotdata::{emit_plotdata, write_plotdata};
use crate::summary::Check;

/// Collects artifact files under one output directory.
pub struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Artifacts<'a> {
    pub fn new(dir: &'a Path) -> Self {
        Self { dir, names: Vec::new() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn into_names(self) -> Vec<String> {
        self.names
    }
}

pub fn dispatch(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let p = &cfg.problem;
    match &cfg.mode {
        ModeConfig::CheckGradient(c) => check_gradient(p, c, cfg.seed, out),
        ModeConfig::Hessian(c) => check_hessian(p, c, cfg.seed, out),
        ModeConfig::Manifold(c) => manifold(p, c, cfg.seed, out),
        ModeConfig::Gd(c) => descent(p, c, cfg.seed, out),
        ModeConfig::Gf(c) => flow(p, c, cfg.seed, out),
        ModeConfig::Multistart(c) => multistart(p, c, cfg.seed, out),
        ModeConfig::Rates(c) => rates(p, c, cfg.seed, out),
        ModeConfig::CertifyDets(c) => certify_dets(p, c, cfg.seed, out),
    }
}

/// Parameters with normal entries of standard deviation `scale`, kept only when regular.
/// Sample `i` draws from consecutive streams of `seed` until it lands in the regular region.
fn regular_samples(p: &Problem<f64>, seed: u64, count: usize, scale: f64) -> Vec<ParamVec<f64>> {
    let h = p.width();
    let mut out = Vec::with_capacity(count);
    let mut stream = 0u64;
    while out.len() < count {
        let raw = normal_init::<f64>(h, seed, stream);
        stream += 1;
        let theta = ParamVec::new(h, raw.into_vec().into_iter().map(|x| x * scale).collect())
            .expect("length matches width");
        if theta.in_region_v(p.a(), p.b()) {
            out.push(theta);
        }
    }
    out
}

fn check_gradient(p: &Problem<f64>, c: &CheckGradientParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let h = p.width();
    let mut csv = String::from("sample,rel_err\n");
    let mut worst = 0.0f64;
    for (i, theta) in regular_samples(p, seed, c.samples, c.scale).iter().enumerate() {
        let g = generalized_gradient(p, theta);
        let fd = central_gradient(
            |x: &[f64]| risk(p, &ParamVec::new(h, x.to_vec()).expect("length preserved")),
            theta.as_slice(),
            RISK_STEP,
        );
        let e = max_rel_err(&g, &fd);
        worst = worst.max(e);
        writeln!(csv, "{i},{}", fmt_float(e)).expect("string write");
    }
    out.write("gradient_check.csv", csv.as_bytes())?;
    Ok(vec![Check::below("gradient_max_rel_err", worst, c.tolerance)])
}

fn check_hessian(p: &Problem<f64>, c: &HessianParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let h = p.width();
    let d = p.dim();
    let mut csv = String::from("sample,rel_err,asymmetry,rank,lambda_max,frobenius\n");
    let (mut worst, mut asym, mut lam) = (0.0f64, 0.0f64, 0.0f64);
    for (i, theta) in regular_samples(p, seed, c.samples, c.scale).iter().enumerate() {
        let hr = hessian(p, theta)?;
        let jac = central_jacobian(
            |x: &[f64]| generalized_gradient(p, &ParamVec::new(h, x.to_vec()).expect("length preserved")),
            theta.as_slice(),
            GRADIENT_STEP,
        );
        let flat: Vec<f64> = jac.iter().flat_map(|row| row.iter().copied()).collect();
        debug_assert_eq!(flat.len(), d * d);
        let e = max_rel_err(&hessian_matrix(p, theta)?, &flat);
        worst = worst.max(e);
        asym = asym.max(hr.asymmetry());
        if hr.frobenius > 0.0 {
            lam = lam.max(hr.lambda_max / hr.frobenius);
        }
        writeln!(
            csv,
            "{i},{},{},{},{},{}",
            fmt_float(e),
            fmt_float(hr.asymmetry()),
            hr.numerical_rank,
            fmt_float(hr.lambda_max),
            fmt_float(hr.frobenius)
        )
        .expect("string write");
    }
    out.write("hessian_check.csv", csv.as_bytes())?;
    Ok(vec![
        Check::below("hessian_max_rel_err", worst, c.tolerance),
        Check::below("hessian_max_asymmetry", asym, c.symmetry_tolerance),
        Check::at_most("lambda_over_frobenius", lam, 1.0 + 1e-12),
    ])
}

/// The same problem at width `N`, where charts and witnesses live.
fn chart_problem(p: &Problem<f64>) -> Result<Problem<f64>> {
    let n = p.target().n();
    Ok(if p.width() == n { p.clone() } else { p.with_width(n)? })
}

fn widen(p: &Problem<f64>, theta: ParamVec<f64>) -> Result<ParamVec<f64>> {
    if theta.width() == p.width() {
        Ok(theta)
    } else {
        Ok(pad_width(&theta, p.width(), p.a())?)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn manifold(p: &Problem<f64>, c: &ManifoldParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let pc = chart_problem(p)?;
    let n = pc.width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![witness(&pc)?];
    for _ in 0..c.samples {
        let chart = ManifoldChart::random(&pc, &mut rng)?;
        points.push(chart_to_params(&pc, &chart)?);
    }
    let mut csv = String::from("sample,risk,gradient_norm,rank,gap_ratio\n");
    let (mut max_risk, mut max_grad, mut bad_rank, mut min_gap) = (0.0f64, 0.0f64, 0usize, f64::INFINITY);
    for (i, star) in points.into_iter().enumerate() {
        let theta = widen(p, star)?;
        let r = risk(p, &theta);
        let g = norm(&generalized_gradient(p, &theta));
        let hr = hessian(p, &theta)?;
        max_risk = max_risk.max(r);
        max_grad = max_grad.max(g);
        bad_rank += usize::from(hr.numerical_rank != 2 * n);
        min_gap = min_gap.min(hr.gap_ratio.unwrap_or(f64::INFINITY));
        let gap = hr.gap_ratio.map(fmt_float).unwrap_or_default();
        writeln!(csv, "{i},{},{},{},{gap}", fmt_float(r), fmt_float(g), hr.numerical_rank).expect("string write");
    }
    out.write("manifold.csv", csv.as_bytes())?;
    Ok(vec![
        Check::at_most("max_risk", max_risk, c.risk_tolerance),
        Check::at_most("max_gradient_norm", max_grad, c.gradient_tolerance),
        Check::at_most("rank_mismatches", bad_rank as f64, 0.0),
        Check::at_least("min_gap_ratio", min_gap, c.min_gap_ratio),
    ])
}

/// A chart point moved by `distance` along a random unit vector in the Hessian's range.
fn chart_offset(p: &Problem<f64>, distance: f64, seed: u64) -> Result<ParamVec<f64>> {
    let pc = chart_problem(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chart = ManifoldChart::random(&pc, &mut rng)?;
    let star = chart_to_params(&pc, &chart)?;
    let hr = hessian(&pc, &star)?;
    let e = sym_eigen(&hr.matrix)?;
    let d = star.dim();
    let mut dir = vec![0.0; d];
    for k in d - hr.numerical_rank..d {
        let w: f64 = rng.random_range(0.5..1.5);
        for (x, v) in dir.iter_mut().zip(&e.vectors[k]) {
            *x += w * v;
        }
    }
    let len = norm(&dir);
    let unit: Vec<f64> = dir.into_iter().map(|x| x / len).collect();
    widen(p, star.offset(distance, &unit))
}

fn initial_params(p: &Problem<f64>, init: &Init, seed: u64) -> Result<ParamVec<f64>> {
    match init {
        Init::ChartOffset { distance } => chart_offset(p, *distance, seed),
        Init::Normal => Ok(normal_init(p.width(), seed, 0)),
        Init::Explicit { theta } => Ok(ParamVec::new(p.width(), theta.clone())?),
    }
}

#[derive(Serialize)]
struct FinalState<'a> {
    #[serde(flatten)]
    status: RunStatus,
    gamma: Option<f64>,
    initial_risk: Option<f64>,
    final_risk: Option<f64>,
    params: &'a ParamVec<f64>,
}

fn final_state<'a>(rec: &'a TrajectoryRecord<f64>, gamma: Option<f64>) -> FinalState<'a> {
    FinalState {
        status: rec.status,
        gamma,
        initial_risk: rec.rows.first().map(|r| r.risk),
        final_risk: rec.final_risk(),
        params: &rec.last,
    }
}

fn descent_checks(rec: &TrajectoryRecord<f64>) -> Vec<Check> {
    let first = rec.rows.first().map_or(f64::NAN, |r| r.risk);
    let last = rec.rows.last().map_or(f64::NAN, |r| r.risk);
    let completed = rec.status == RunStatus::Completed;
    let ratio = if first == 0.0 && last == 0.0 { 0.0 } else { last / first };
    vec![
        Check::new("completed", completed && last.is_finite(), last, DIVERGENCE_RISK),
        Check::at_most("final_over_initial_risk", ratio, 1.0),
    ]
}

fn write_trajectory(rec: &TrajectoryRecord<f64>, rho_exp: f64, out: &mut Artifacts) -> Result<()> {
    let mut traj = Vec::new();
    rec.write_csv(&mut traj)?;
    out.write("trajectory.csv", &traj)?;
    let mut plot = Vec::new();
    emit_plotdata(rec, rho_exp, &mut plot)?;
    out.write("plotdata.csv", &plot)
}

fn gd_config(gamma: f64, rho_exp: f64, steps: usize, seed: u64, record_every: usize) -> GdConfig<f64> {
    GdConfig {
        seed,
        record_every,
        ..GdConfig::new(gamma, rho_exp, steps)
    }
}

fn descent(p: &Problem<f64>, c: &DescentParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let theta0 = initial_params(p, &c.init, seed)?;
    let gamma = c.gamma.resolve(p);
    let cfg = GdConfig {
        track_distance: c.track_distance,
        ..gd_config(gamma, c.rho_exp, c.steps, seed, c.record_every)
    };
    let rec = gd_run(p, &theta0, &cfg)?;
    write_trajectory(&rec, c.rho_exp, out)?;
    out.json("final.json", &final_state(&rec, Some(gamma)))?;
    Ok(descent_checks(&rec))
}

fn flow(p: &Problem<f64>, c: &FlowParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let theta0 = initial_params(p, &c.init, seed)?;
    let cfg = GfConfig {
        t_max: c.t_max,
        dt: c.dt,
        record_every: c.record_every,
        keep_states: false,
        track_distance: false,
    };
    let rec = gf_run_with(p, &theta0, &cfg)?;
    let mut csv = String::from("n,time,risk\n");
    for r in &rec.rows {
        writeln!(csv, "{},{},{}", r.n, fmt_float(r.time), fmt_float(r.risk)).expect("string write");
    }
    out.write("trajectory.csv", csv.as_bytes())?;
    out.json("final.json", &final_state(&rec, None))?;
    let r0 = rec.rows.first().map_or(0.0, |r| r.risk);
    let rise = rec
        .rows
        .windows(2)
        .map(|w| (w[1].risk - w[0].risk).max(0.0))
        .fold(0.0f64, f64::max);
    let rel = if r0 > 0.0 { rise / r0 } else { rise };
    let mut checks = descent_checks(&rec);
    checks.push(Check::at_most("max_relative_risk_increase", rel, c.monotone_tolerance));
    Ok(checks)
}

fn multistart(p: &Problem<f64>, c: &MultistartParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let gamma = c.gamma.resolve(p);
    let res = multistart_run(p, c.restarts, &gd_config(gamma, c.rho_exp, c.steps, seed, c.record_every))?;
    let mut runs = String::from("restart,status,final_risk\n");
    for (k, run) in res.runs.iter().enumerate() {
        let status = match run.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Diverged { step } => format!("diverged@{step}"),
        };
        let last = run.rows.last().map(|r| fmt_float(r.risk)).unwrap_or_default();
        writeln!(runs, "{k},{status},{last}").expect("string write");
    }
    out.write("restarts.csv", runs.as_bytes())?;
    let mut sel = String::from("n,index,risk\n");
    for s in &res.selected {
        writeln!(sel, "{},{},{}", s.n, s.index, fmt_float(s.risk)).expect("string write");
    }
    out.write("selection.csv", sel.as_bytes())?;
    let series: Vec<(usize, f64)> = res.selected.iter().map(|s| (s.n, s.risk)).collect();
    let mut plot = Vec::new();
    write_plotdata(&series, c.rho_exp, &mut plot)?;
    out.write("plotdata.csv", &plot)?;

    let violations = res
        .selected
        .iter()
        .enumerate()
        .filter(|(i, s)| res.runs.iter().any(|r| r.rows.get(*i).is_some_and(|row| row.risk < s.risk)))
        .count();
    let diverged = res.runs.iter().filter(|r| r.status != RunStatus::Completed).count();
    let best = res.final_selected_risk().unwrap_or(f64::NAN);
    Ok(vec![
        Check::at_most("selection_violations", violations as f64, 0.0),
        Check::new("best_final_risk_finite", best.is_finite() && best < DIVERGENCE_RISK, best, DIVERGENCE_RISK),
        Check::new("diverged_restarts", true, diverged as f64, c.restarts as f64),
    ])
}

#[derive(Serialize)]
struct RateReport {
    gamma: f64,
    rho_exp: f64,
    fit: Option<FitOutcome<f64>>,
    max_envelope_ratio: Option<f64>,
}

fn rates(p: &Problem<f64>, c: &RatesParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let theta0 = initial_params(p, &c.init, seed)?;
    let gamma = c.gamma.resolve(p);
    let rec = gd_run(p, &theta0, &gd_config(gamma, c.rho_exp, c.steps, seed, c.record_every))?;
    write_trajectory(&rec, c.rho_exp, out)?;
    let mut checks = descent_checks(&rec);
    let mut report = RateReport {
        gamma,
        rho_exp: c.rho_exp,
        fit: None,
        max_envelope_ratio: None,
    };
    match fit_rate(&rec, c.rho_exp) {
        Ok(FitOutcome::ExactConvergence) => {
            report.fit = Some(FitOutcome::ExactConvergence);
            checks.push(Check::new("exact_convergence", true, 0.0, 0.0));
        }
        Ok(FitOutcome::Fitted(fit)) => {
            let e = 1.0 - c.rho_exp;
            let ratio = rec
                .rows
                .iter()
                .map(|r| r.risk / (fit.big_c_fit * (-fit.c_fit * (r.n as f64).powf(e)).exp()))
                .fold(0.0f64, f64::max);
            report.fit = Some(FitOutcome::Fitted(fit));
            report.max_envelope_ratio = Some(ratio);
            checks.push(Check::new("fit_rate_positive", fit.c_fit > 0.0, fit.c_fit, 0.0));
            checks.push(Check::at_least("fit_r2", fit.r2, c.min_r2));
            checks.push(Check::at_most("envelope_ratio", ratio, c.envelope));
        }
        Err(relulab::Error::FitRows(k)) => checks.push(Check::at_least("fit_rows", k as f64, 10.0)),
        Err(e) => return Err(e.into()),
    }
    out.json("fit.json", &report)?;
    Ok(checks)
}

/// `N + 1` points spanning `[lo, hi]` with gaps in a 1:3 ratio band.
fn jittered_grid<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let gaps: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = gaps.iter().sum();
    let mut grid = vec![lo];
    let mut acc = 0.0;
    for g in &gaps[..n - 1] {
        acc += g;
        grid.push(lo + (hi - lo) * acc / total);
    }
    grid.push(hi);
    grid
}

fn certify_dets(p: &Problem<f64>, c: &CertifyParams, seed: u64, out: &mut Artifacts) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = p.density();
    let (lo, hi) = (p.a(), p.b());
    let mut csv = String::from("instance,n,det,product,minor_det,scaled_det\n");
    let (mut nonpositive, mut product_err, mut scaling_err) = (0usize, 0.0f64, 0.0f64);
    for i in 0..c.instances {
        let n = 1 + i % c.max_n;
        let grid = jittered_grid(&mut rng, n, lo, hi);
        let det = moment_matrix(density, &grid)?.determinant();
        let prod = det_product_formula(density, &grid)?;
        let v: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.3..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let minor = lu_det(&minor_matrix(&v, &grid, density)?)?;
        let scaled = 4f64.powi(n as i32) * v.iter().map(|x| x.powi(4)).product::<f64>() * det;
        nonpositive += usize::from(!(det > 0.0)) + usize::from(!(minor > 0.0));
        product_err = product_err.max((det - prod).abs() / prod.abs());
        scaling_err = scaling_err.max((minor - scaled).abs() / scaled.abs());
        writeln!(
            csv,
            "{i},{n},{},{},{},{}",
            fmt_float(det),
            fmt_float(prod),
            fmt_float(minor),
            fmt_float(scaled)
        )
        .expect("string write");
    }
    out.write("determinants.csv", csv.as_bytes())?;
    Ok(vec![
        Check::at_most("nonpositive_determinants", nonpositive as f64, 0.0),
        Check::below("product_formula_rel_err", product_err, c.tolerance),
        Check::below("scaling_identity_rel_err", scaling_err, c.tolerance),
    ])
}
