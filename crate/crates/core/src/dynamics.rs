//! Gradient descent, gradient flow, best-of-K restarts, rate fitting and the step-size sum.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minima::{distance_from, ManifoldChart};
use crate::network::ParamVec;
use crate::quad::adaptive_simpson;
use crate::risk::{risk_and_gradient, Problem};
use crate::scalar::Scalar;

/// Runs whose risk exceeds this value are stopped and flagged as divergent.
pub const DIVERGENCE_RISK: f64 = 1e12;

/// Rows with risk at or below this value are ignored by [`fit_rate`].
pub const FIT_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdConfig<S> {
    pub gamma: S,
    /// Exponent ρ of the schedule `γ / n^ρ`.
    pub rho_exp: S,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record every k-th iterate (the final one is always recorded).
    #[serde(default = "one")]
    pub record_every: usize,
    /// Keep parameter snapshots alongside recorded rows.
    #[serde(default)]
    pub keep_states: bool,
    /// Also estimate the distance to the minima manifold at recorded rows.
    #[serde(default)]
    pub track_distance: bool,
}

fn one() -> usize {
    1
}

impl<S: Scalar> GdConfig<S> {
    pub fn new(gamma: S, rho_exp: S, steps: usize) -> Self {
        Self {
            gamma,
            rho_exp,
            steps,
            seed: 0,
            record_every: 1,
            keep_states: false,
            track_distance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > S::zero()) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma = {} must be positive", self.gamma)));
        }
        if !(self.rho_exp >= S::zero() && self.rho_exp < S::one()) {
            return Err(Error::Config(format!(
                "rho_exp = {} must lie in [0, 1)",
                self.rho_exp
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size `γ / n^ρ` of update `n ≥ 1`.
    pub fn step(&self, n: usize) -> S {
        self.gamma / S::of_usize(n).powf(self.rho_exp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    /// Risk exceeded the divergence threshold or became non-finite at this step.
    Diverged { step: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow<S> {
    pub n: usize,
    /// Elapsed time: `Σ_{k≤n} γ/k^ρ` for descent, `t` for the flow.
    pub time: S,
    pub risk: S,
    pub dist: Option<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<S> {
    pub rows: Vec<TrajectoryRow<S>>,
    /// Snapshots matching `rows` when requested, otherwise empty.
    pub states: Vec<ParamVec<S>>,
    pub last: ParamVec<S>,
    pub status: RunStatus,
}

impl<S: Scalar> TrajectoryRecord<S> {
    pub fn risks(&self) -> Vec<S> {
        self.rows.iter().map(|r| r.risk).collect()
    }

    pub fn final_risk(&self) -> Option<S> {
        match self.status {
            RunStatus::Completed => self.rows.last().map(|r| r.risk),
            RunStatus::Diverged { .. } => None,
        }
    }

    /// CSV with columns `n,risk,dist`; `dist` is empty when not computed.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,risk,dist")?;
        for r in &self.rows {
            let dist = r.dist.map(fmt_float).unwrap_or_default();
            writeln!(out, "{},{},{}", r.n, fmt_float(r.risk), dist)?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn fmt_float<S: Scalar>(x: S) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

struct Recorder<'a, S> {
    p: &'a Problem<S>,
    every: usize,
    keep_states: bool,
    track_distance: bool,
    warm: Option<ManifoldChart<S>>,
    rows: Vec<TrajectoryRow<S>>,
    states: Vec<ParamVec<S>>,
}

impl<'a, S: Scalar> Recorder<'a, S> {
    fn new(p: &'a Problem<S>, every: usize, keep_states: bool, track_distance: bool) -> Self {
        Self {
            p,
            every,
            keep_states,
            track_distance,
            warm: None,
            rows: Vec::new(),
            states: Vec::new(),
        }
    }

    fn push(&mut self, n: usize, time: S, risk: S, theta: &ParamVec<S>, force: bool) -> Result<()> {
        if n % self.every != 0 && !force {
            return Ok(());
        }
        if self.rows.last().is_some_and(|r| r.n == n) {
            return Ok(());
        }
        let dist = if self.track_distance {
            let (d, foot) = distance_from(self.p, theta, self.warm.as_ref())?;
            let n_red = self.p.target().reduced().n();
            self.warm = Some(ManifoldChart::from_params(&foot, n_red)?);
            Some(d)
        } else {
            None
        };
        self.rows.push(TrajectoryRow { n, time, risk, dist });
        if self.keep_states {
            self.states.push(theta.clone());
        }
        Ok(())
    }
}

fn diverged<S: Scalar>(risk: S) -> bool {
    !risk.is_finite() || risk > S::of(DIVERGENCE_RISK)
}

/// Gradient descent `Θ_n = Θ_{n−1} − (γ/n^ρ)·G(Θ_{n−1})` for `n = 1, …, steps`.
pub fn gd_run<S: Scalar>(p: &Problem<S>, theta0: &ParamVec<S>, cfg: &GdConfig<S>) -> Result<TrajectoryRecord<S>> {
    cfg.validate()?;
    let mut rec = Recorder::new(p, cfg.record_every, cfg.keep_states, cfg.track_distance);
    let mut theta = theta0.clone();
    let mut time = S::zero();
    let mut status = RunStatus::Completed;
    for n in 1..=cfg.steps + 1 {
        let (risk, grad) = risk_and_gradient(p, &theta);
        if diverged(risk) {
            status = RunStatus::Diverged { step: n - 1 };
            break;
        }
        rec.push(n - 1, time, risk, &theta, n - 1 == cfg.steps)?;
        if n > cfg.steps {
            break;
        }
        let step = cfg.step(n);
        for (x, g) in theta.as_mut_slice().iter_mut().zip(&grad) {
            *x -= step * *g;
        }
        time += step;
    }
    Ok(TrajectoryRecord {
        rows: rec.rows,
        states: rec.states,
        last: theta,
        status,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfConfig<S> {
    pub t_max: S,
    pub dt: S,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub keep_states: bool,
    #[serde(default)]
    pub track_distance: bool,
}

/// Gradient flow `dΘ/dt = −G(Θ)` by classical RK4 with fixed step `dt`; risk is recorded at
/// every step.
pub fn gf_run<S: Scalar>(p: &Problem<S>, theta0: &ParamVec<S>, t_max: S, dt: S) -> Result<TrajectoryRecord<S>> {
    gf_run_with(
        p,
        theta0,
        &GfConfig {
            t_max,
            dt,
            record_every: 1,
            keep_states: false,
            track_distance: false,
        },
    )
}

pub fn gf_run_with<S: Scalar>(p: &Problem<S>, theta0: &ParamVec<S>, cfg: &GfConfig<S>) -> Result<TrajectoryRecord<S>> {
    if !(cfg.dt > S::zero()) || !(cfg.t_max >= S::zero()) || cfg.record_every == 0 {
        return Err(Error::Config(format!(
            "need dt > 0, t_max ≥ 0 and record_every ≥ 1 (dt = {}, t_max = {})",
            cfg.dt, cfg.t_max
        )));
    }
    let steps = (cfg.t_max / cfg.dt - S::of(1e-9))
        .ceil()
        .max(S::zero())
        .to_usize()
        .ok_or_else(|| Error::Config("step count overflow".into()))?;
    let mut rec = Recorder::new(p, cfg.record_every, cfg.keep_states, cfg.track_distance);
    let mut theta = theta0.clone();
    let mut t = S::zero();
    let mut status = RunStatus::Completed;
    let width = theta.width();
    let grad = |x: &[S]| {
        let th = ParamVec::new(width, x.to_vec()).expect("fixed length");
        risk_and_gradient(p, &th)
    };
    for n in 0..=steps {
        let (risk, k1) = grad(theta.as_slice());
        if diverged(risk) {
            status = RunStatus::Diverged { step: n };
            break;
        }
        rec.push(n, t, risk, &theta, n == steps)?;
        if n == steps {
            break;
        }
        let h = cfg.dt.min(cfg.t_max - t);
        let x = theta.as_slice().to_vec();
        let shifted = |k: &[S], s: S| -> Vec<S> { x.iter().zip(k).map(|(&a, &g)| a - s * g).collect() };
        let half = h / S::of(2.0);
        let (_, k2) = grad(&shifted(&k1, half));
        let (_, k3) = grad(&shifted(&k2, half));
        let (_, k4) = grad(&shifted(&k3, h));
        let six = S::of(6.0);
        for (i, xi) in theta.as_mut_slice().iter_mut().enumerate() {
            *xi -= h / six * (k1[i] + S::of(2.0) * k2[i] + S::of(2.0) * k3[i] + k4[i]);
        }
        t = if n + 1 == steps { cfg.t_max } else { t + h };
    }
    Ok(TrajectoryRecord {
        rows: rec.rows,
        states: rec.states,
        last: theta,
        status,
    })
}

/// Standard normal initialization for restart `stream` of the run seeded with `seed`.
pub fn normal_init<S: Scalar>(width: usize, seed: u64, stream: u64) -> ParamVec<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let theta = (0..3 * width + 1)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            S::of(z)
        })
        .collect();
    ParamVec::new(width, theta).expect("length matches width")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Selection<S> {
    pub n: usize,
    /// 0-based restart index.
    pub index: usize,
    pub risk: S,
}

#[derive(Clone, Debug)]
pub struct MultiStartResult<S> {
    pub k: usize,
    pub runs: Vec<TrajectoryRecord<S>>,
    pub selected: Vec<Selection<S>>,
}

impl<S: Scalar> MultiStartResult<S> {
    pub fn final_selected_risk(&self) -> Option<S> {
        self.selected.last().map(|s| s.risk)
    }
}

/// Per-row argmin over runs; missing rows (divergent runs) count as `+∞`, ties go to the
/// lowest index.
pub fn select_best<S: Scalar>(runs: &[TrajectoryRecord<S>]) -> Vec<Selection<S>> {
    let Some(longest) = runs.iter().map(|r| r.rows.len()).max() else {
        return Vec::new();
    };
    let template = runs
        .iter()
        .find(|r| r.rows.len() == longest)
        .expect("a longest run exists");
    (0..longest)
        .map(|i| {
            let n = template.rows[i].n;
            let mut best = Selection {
                n,
                index: 0,
                risk: S::infinity(),
            };
            for (k, run) in runs.iter().enumerate() {
                let r = run.rows.get(i).map_or(S::infinity(), |row| row.risk);
                if r < best.risk {
                    best = Selection { n, index: k, risk: r };
                }
            }
            best
        })
        .collect()
}

/// `K` independent descent runs from standard normal initializations and the running
/// best-of-K selection. Restart `k` uses stream `k` of the seed, independent of `K`.
pub fn multistart_run<S: Scalar>(p: &Problem<S>, k: usize, cfg: &GdConfig<S>) -> Result<MultiStartResult<S>> {
    if k == 0 {
        return Err(Error::Config("restart count must be at least 1".into()));
    }
    cfg.validate()?;
    let runs = (0..k)
        .into_par_iter()
        .map(|i| gd_run(p, &normal_init(p.width(), cfg.seed, i as u64), cfg))
        .collect::<Result<Vec<_>>>()?;
    let selected = select_best(&runs);
    Ok(MultiStartResult { k, runs, selected })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit<S> {
    /// Decay rate per unit of `n^{1−ρ}`.
    pub c_fit: S,
    /// Prefactor `exp(intercept)`.
    pub big_c_fit: S,
    pub r2: S,
    pub rows_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitOutcome<S> {
    Fitted(RateFit<S>),
    /// Every recorded value is zero.
    ExactConvergence,
}

/// Least squares fit of `ln y` against `x`; returns `(−slope, exp(intercept), r²)`.
pub fn fit_log_linear<S: Scalar>(xs: &[S], ys: &[S]) -> Result<RateFit<S>> {
    let pts: Vec<(S, S)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > S::of(FIT_FLOOR) && y.is_finite())
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::FitRows(pts.len()));
    }
    let m = S::of_usize(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<S>() / m;
    let my = pts.iter().map(|p| p.1).sum::<S>() / m;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<S>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<S>();
    let syy = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<S>();
    if sxx.is_zero() {
        return Err(Error::FitRows(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum::<S>();
    let r2 = if syy.is_zero() {
        S::one()
    } else {
        S::one() - ss_res / syy
    };
    Ok(RateFit {
        c_fit: -slope,
        big_c_fit: intercept.exp(),
        r2,
        rows_used: pts.len(),
    })
}

/// Fits `ln risk ≈ ln C − c·n^{1−ρ}` over the recorded rows.
pub fn fit_rate<S: Scalar>(rec: &TrajectoryRecord<S>, rho_exp: S) -> Result<FitOutcome<S>> {
    if !rec.rows.is_empty() && rec.rows.iter().all(|r| r.risk.is_zero()) {
        return Ok(FitOutcome::ExactConvergence);
    }
    let e = S::one() - rho_exp;
    let xs: Vec<S> = rec.rows.iter().map(|r| S::of_usize(r.n).powf(e)).collect();
    Ok(FitOutcome::Fitted(fit_log_linear(&xs, &rec.risks())?))
}

/// As [`fit_rate`] but on the distance column.
pub fn fit_distance_rate<S: Scalar>(rec: &TrajectoryRecord<S>, rho_exp: S) -> Result<FitOutcome<S>> {
    let rows: Vec<&TrajectoryRow<S>> = rec.rows.iter().filter(|r| r.dist.is_some()).collect();
    let ds: Vec<S> = rows.iter().map(|r| r.dist.expect("filtered")).collect();
    if !ds.is_empty() && ds.iter().all(|d| d.is_zero()) {
        return Ok(FitOutcome::ExactConvergence);
    }
    let e = S::one() - rho_exp;
    let xs: Vec<S> = rows.iter().map(|r| S::of_usize(r.n).powf(e)).collect();
    Ok(FitOutcome::Fitted(fit_log_linear(&xs, &ds)?))
}

const SUM_TOL: f64 = 1e-12;
const SUM_MAX_CUTOFF: usize = 1 << 22;

/// `Σ_{k≥1} γ k^{−ρ} exp(−cγ(k−1)^{1−ρ})`, summed directly until the integral tail bound
/// drops below 1e-12, otherwise closed with an Euler–Maclaurin tail.
pub fn step_sum(rho: f64, c: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) || !(c > 0.0) || !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "need ρ ∈ [0,1), c > 0, γ > 0 (got {rho}, {c}, {gamma})"
        )));
    }
    let e = 1.0 - rho;
    let phi = |k: f64| gamma * k.powf(-rho) * (-c * gamma * (k - 1.0).powf(e)).exp();
    let tail_bound = |k: f64| (-c * gamma * (k - 1.0).powf(e)).exp() / (c * e);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |x: f64, sum: &mut f64| {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            comp += (*sum - t) + x;
        } else {
            comp += (x - t) + *sum;
        }
        *sum = t;
    };
    let mut cutoff = 4096usize;
    let mut k = 1usize;
    loop {
        while k < cutoff {
            add(phi(k as f64), &mut sum);
            k += 1;
            if tail_bound(k as f64 - 1.0 + 1.0) < SUM_TOL && phi(k as f64) < SUM_TOL {
                // Σ_{j≥k} φ(j) ≤ φ(k) + ∫_k^∞ φ
                let rest = phi(k as f64) + tail_bound(k as f64);
                if rest < SUM_TOL {
                    return Ok(sum + comp);
                }
            }
        }
        let (tail, remainder) = euler_maclaurin_tail(rho, c, gamma, k as f64);
        if remainder < SUM_TOL {
            return Ok(sum + comp + tail);
        }
        if cutoff >= SUM_MAX_CUTOFF {
            return Err(Error::Tail(format!(
                "remainder {remainder:e} at cutoff {cutoff} for ρ = {rho}, c = {c}, γ = {gamma}"
            )));
        }
        cutoff *= 4;
    }
}

/// `Σ_{j≥K} φ(j)` via `∫_K^∞ φ + φ(K)/2 − φ′(K)/12 + φ‴(K)/720`, with the size of the last
/// correction as the remainder estimate.
fn euler_maclaurin_tail(rho: f64, c: f64, gamma: f64, k: f64) -> (f64, f64) {
    let e = 1.0 - rho;
    let cg = c * gamma;
    let phi = gamma * k.powf(-rho) * (-cg * (k - 1.0).powf(e)).exp();
    let y = k - 1.0;
    let d1 = -rho / k - cg * e * y.powf(-rho);
    let d2 = rho / (k * k) + cg * e * rho * y.powf(-rho - 1.0);
    let d3 = -2.0 * rho / (k * k * k) - cg * e * rho * (rho + 1.0) * y.powf(-rho - 2.0);
    let p1 = phi * d1;
    let p3 = phi * (d3 + 3.0 * d1 * d2 + d1 * d1 * d1);
    // ∫_K^∞ φ = (1/(c(1−ρ))) ∫_{u_K}^∞ e^{−u} ((x−1)/x)^ρ du with x = 1 + (u/(cγ))^{1/(1−ρ)}
    let u_k = cg * y.powf(e);
    let g = |u: f64| {
        let xm1 = (u / cg).powf(1.0 / e);
        (-u).exp() * (xm1 / (xm1 + 1.0)).powf(rho)
    };
    let integral =
        adaptive_simpson(&|s: f64| g(u_k + s), 0.0, 60.0, 1e-15, 48) / (c * e);
    let tail = integral + phi / 2.0 - p1 / 12.0 + p3 / 720.0;
    (tail, (p3 / 720.0).abs())
}

/// Maximum of [`step_sum`] over a grid of step sizes in `(0, g]`.
pub fn sum_estimate_check<S: Scalar>(rho_exp: S, c: S, g: S, gamma_grid: &[S]) -> Result<S> {
    if gamma_grid.is_empty() {
        return Err(Error::Config("empty step-size grid".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for &gam in gamma_grid {
        if !(gam > S::zero() && gam <= g) {
            return Err(Error::Config(format!("γ = {gam} lies outside (0, {g}]")));
        }
        let s = step_sum(rho_exp.to_f64_lossy(), c.to_f64_lossy(), gam.to_f64_lossy())?;
        best = best.max(s);
    }
    Ok(S::of(best))
}
