//! Per-AP analog beamforming: ADMM over the unit-modulus weights, auxiliary pattern
//! samples `h, g, q` with closed-form projections, a piecewise-quadratic solve for the
//! power scale `epsilon_l`, and scaled multiplier updates.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::{discretize_spec, steering_matrix, BeamSpec, DiscreteSpec, UlaGeometry};
use crate::error::{check_len, Error, Result};
use crate::linalg::{hermitian_row, ls_solve, norm, unit_modulus, CMat, CVec, HermitianFactor};
use crate::manifold::{rgd_solve, ArmijoParams, LsSystem, StepFlag};
use crate::unfold::{unfolded_solve, CvnnWeights};

const BREAKPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub rho: f64,
    pub itermax: usize,
    pub kappa: f64,
    pub alpha: f64,
    pub eta_z_lin: f64,
    pub eta_sl_lin: f64,
}

impl AdmmParams {
    pub fn from_spec(spec: &BeamSpec, rho: f64, itermax: usize, kappa: f64) -> Result<Self> {
        let p = Self {
            rho,
            itermax,
            kappa,
            alpha: spec.alpha,
            eta_z_lin: spec.eta_z_lin(),
            eta_sl_lin: spec.eta_sl_lin(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.itermax == 0 {
            return Err(Error::Config("itermax must be at least 1".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Config("kappa must be nonnegative".into()));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.eta_z_lin > 0.0 && self.eta_sl_lin > 0.0) {
            return Err(Error::Config("linear thresholds must be positive".into()));
        }
        Ok(())
    }
}

fn clamp_magnitude(x: Complex64, lo: f64, hi: f64) -> Complex64 {
    let m = x.norm();
    if m == 0.0 {
        return Complex64::new(lo, 0.0);
    }
    if m < lo {
        x * (lo / m)
    } else if m > hi {
        x * (hi / m)
    } else {
        x
    }
}

/// Closest point to `h_hat` with magnitude in `[sqrt(eps), sqrt(alpha eps)]`.
pub fn project_mainlobe(h_hat: Complex64, epsilon_l: f64, alpha: f64) -> Complex64 {
    let lo = epsilon_l.max(0.0).sqrt();
    clamp_magnitude(h_hat, lo, (alpha * epsilon_l.max(0.0)).sqrt())
}

pub fn project_sidelobe(g_hat: Complex64, epsilon_l: f64, eta_sl_lin: f64) -> Complex64 {
    clamp_magnitude(g_hat, 0.0, (eta_sl_lin * epsilon_l.max(0.0)).sqrt())
}

pub fn project_null(q_hat: Complex64, epsilon_l: f64, eta_z_lin: f64) -> Complex64 {
    clamp_magnitude(q_hat, 0.0, (eta_z_lin * epsilon_l.max(0.0)).sqrt())
}

/// Value of the scale subproblem at `s = sqrt(eps)`: `-s^2` plus the squared distances
/// of each sample magnitude to its feasible band.
pub fn epsilon_objective(s: f64, rh: &[f64], rg: &[f64], rq: &[f64], params: &AdmmParams) -> f64 {
    let sa = params.alpha.sqrt();
    let ss = params.eta_sl_lin.sqrt();
    let sz = params.eta_z_lin.sqrt();
    let mut v = -s * s;
    for &a in rh {
        if a < s {
            v += (s - a) * (s - a);
        } else if a > sa * s {
            v += (sa * s - a) * (sa * s - a);
        }
    }
    for &r in rg {
        if r > ss * s {
            v += (r - ss * s) * (r - ss * s);
        }
    }
    for &r in rq {
        if r > sz * s {
            v += (r - sz * s) * (r - sz * s);
        }
    }
    v
}

/// Quadratic `a s^2 + b s` (constant dropped) of the piece containing `mid`.
fn piece_coefficients(mid: f64, rh: &[f64], rg: &[f64], rq: &[f64], p: &AdmmParams) -> (f64, f64) {
    let sa = p.alpha.sqrt();
    let mut a = -1.0;
    let mut b = 0.0;
    for &m in rh {
        if m < mid {
            a += 1.0;
            b -= 2.0 * m;
        } else if m > sa * mid {
            a += p.alpha;
            b -= 2.0 * sa * m;
        }
    }
    for (vals, eta) in [(rg, p.eta_sl_lin), (rq, p.eta_z_lin)] {
        let se = eta.sqrt();
        for &r in vals {
            if r > se * mid {
                a += eta;
                b -= 2.0 * se * r;
            }
        }
    }
    (a, b)
}

/// Breakpoints of the piecewise quadratic in `s = sqrt(eps)`, sorted, deduplicated,
/// starting at 0.
pub fn epsilon_breakpoints(rh: &[f64], rg: &[f64], rq: &[f64], params: &AdmmParams) -> Vec<f64> {
    let sa = params.alpha.sqrt();
    let ss = params.eta_sl_lin.sqrt();
    let sz = params.eta_z_lin.sqrt();
    let mut e: Vec<f64> = std::iter::once(0.0)
        .chain(rh.iter().copied())
        .chain(rh.iter().map(|m| m / sa))
        .chain(rg.iter().map(|r| r / ss))
        .chain(rq.iter().map(|r| r / sz))
        .collect();
    e.sort_by(f64::total_cmp);
    e.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_TOL);
    e
}

fn magnitudes(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.norm()).collect()
}

/// Minimizer `eps_l` of [`epsilon_objective`] over `s >= 0`, by enumerating each piece's
/// endpoints and interior vertex. When the last piece decreases without bound the
/// search stops at the largest breakpoint.
pub fn solve_epsilon_analog(
    h_hat: &[Complex64],
    g_hat: &[Complex64],
    q_hat: &[Complex64],
    params: &AdmmParams,
) -> Result<f64> {
    if h_hat.is_empty() && g_hat.is_empty() && q_hat.is_empty() {
        return Err(Error::Config("scale subproblem has no terms".into()));
    }
    let (rh, rg, rq) = (magnitudes(h_hat), magnitudes(g_hat), magnitudes(q_hat));
    if rh.iter().chain(&rg).chain(&rq).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite pattern sample".into()));
    }
    Ok(solve_sqrt_epsilon(&rh, &rg, &rq, params).powi(2))
}

pub(crate) fn solve_sqrt_epsilon(rh: &[f64], rg: &[f64], rq: &[f64], params: &AdmmParams) -> f64 {
    let e = epsilon_breakpoints(rh, rg, rq, params);
    let mut cands = e.clone();
    for j in 0..e.len() {
        let lo = e[j];
        let hi = e.get(j + 1).copied();
        let mid = match hi {
            Some(h) => 0.5 * (lo + h),
            None => lo + 1.0 + lo,
        };
        let (a, b) = piece_coefficients(mid, rh, rg, rq, params);
        if a > 0.0 {
            let v = -b / (2.0 * a);
            if v > lo && hi.is_none_or(|h| v < h) {
                cands.push(v);
            }
        }
    }
    let mut best = (f64::INFINITY, 0.0);
    cands.sort_by(f64::total_cmp);
    for s in cands {
        let g = epsilon_objective(s, rh, rg, rq, params);
        if g < best.0 {
            best = (g, s);
        }
    }
    best.1
}

/// Sampled region layout: steering columns stacked as mainlobe, sidelobe, null.
#[derive(Debug, Clone)]
pub struct AnalogProblem {
    pub geom: UlaGeometry,
    pub spec: BeamSpec,
    pub discrete: DiscreteSpec,
    steering: CMat,
    factor: HermitianFactor,
}

impl AnalogProblem {
    pub fn new(geom: UlaGeometry, spec: BeamSpec) -> Result<Self> {
        let discrete = discretize_spec(&spec)?;
        let steering = steering_matrix(&geom, &discrete.stacked())?;
        let factor = HermitianFactor::new(&crate::linalg::gram(&steering))?;
        Ok(Self {
            geom,
            spec,
            discrete,
            steering,
            factor,
        })
    }

    pub fn steering(&self) -> &CMat {
        &self.steering
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.discrete.mainlobe.len(),
            self.discrete.sidelobe.len(),
            self.discrete.null.len(),
        )
    }

    /// `w^H a(theta)` at every sample, split into mainlobe, sidelobe, null parts.
    pub fn pattern(&self, w: &[Complex64]) -> Result<(CVec, CVec, CVec)> {
        check_len("weights vs antennas", self.geom.num_antennas, w.len())?;
        let row = hermitian_row(w, &self.steering);
        let (m, s, _) = self.counts();
        Ok((row[..m].to_vec(), row[m..m + s].to_vec(), row[m + s..].to_vec()))
    }

    /// Unit-modulus projection of the least-squares fit to the flat-top template.
    pub fn ls_start(&self) -> Result<CVec> {
        let (m, s, n) = self.counts();
        let mut u = vec![Complex64::new(0.0, 0.0); m + s + n];
        for v in u.iter_mut().take(m) {
            *v = Complex64::new(1.0, 0.0);
        }
        Ok(unit_modulus(&ls_solve(&self.steering, &u)?.x))
    }

    /// Least-squares subproblem the w-update faces once the auxiliaries have been
    /// projected around `w` (scale from the piecewise solve, zero multipliers).
    pub fn subproblem_at(&self, w: &[Complex64], params: &AdmmParams) -> Result<LsSystem> {
        let (pm, ps, pn) = self.pattern(w)?;
        let eps = solve_epsilon_analog(&pm, &ps, &pn, params)?;
        let mut u = Vec::with_capacity(pm.len() + ps.len() + pn.len());
        u.extend(pm.iter().map(|&z| project_mainlobe(z, eps, params.alpha)));
        u.extend(ps.iter().map(|&z| project_sidelobe(z, eps, params.eta_sl_lin)));
        u.extend(pn.iter().map(|&z| project_null(z, eps, params.eta_z_lin)));
        LsSystem::new(u, self.steering.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogState {
    pub w_rf: CVec,
    pub h: CVec,
    pub g: CVec,
    pub q: CVec,
    pub delta: CVec,
    pub lambda: CVec,
    pub xi: CVec,
    pub epsilon_l: f64,
}

impl AnalogState {
    /// Auxiliaries equal to the pattern of `w`, zero multipliers, `eps = mean |h|^2`.
    pub fn initial(problem: &AnalogProblem, w: CVec) -> Result<Self> {
        let (h, g, q) = problem.pattern(&w)?;
        let epsilon_l = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
        let zero = |n: usize| vec![Complex64::new(0.0, 0.0); n];
        Ok(Self {
            delta: zero(h.len()),
            lambda: zero(g.len()),
            xi: zero(q.len()),
            w_rf: w,
            h,
            g,
            q,
            epsilon_l,
        })
    }

    fn targets(&self) -> CVec {
        let mut u = Vec::with_capacity(self.h.len() + self.g.len() + self.q.len());
        u.extend(self.h.iter().zip(&self.delta).map(|(a, b)| a + b));
        u.extend(self.g.iter().zip(&self.lambda).map(|(a, b)| a + b));
        u.extend(self.q.iter().zip(&self.xi).map(|(a, b)| a + b));
        u
    }
}

fn ascend(mult: &mut [Complex64], aux: &[Complex64], pattern: &[Complex64], step: f64) {
    for ((d, a), p) in mult.iter_mut().zip(aux).zip(pattern) {
        *d += (a - p) * step;
    }
}

/// `delta += rho (h - w^H a)` and likewise for `lambda`, `xi`.
pub fn update_multipliers_analog(state: &mut AnalogState, problem: &AnalogProblem, rho: f64) -> Result<()> {
    let (pm, ps, pn) = problem.pattern(&state.w_rf)?;
    update_multipliers_blockwise(state, (&pm, &ps, &pn), rho, rho)
}

/// Multiplier update with one step for the mainlobe block and one for the sidelobe and
/// null blocks, given the current pattern samples.
pub fn update_multipliers_blockwise(
    state: &mut AnalogState,
    pattern: (&[Complex64], &[Complex64], &[Complex64]),
    mainlobe_step: f64,
    constraint_step: f64,
) -> Result<()> {
    let (pm, ps, pn) = pattern;
    check_len("mainlobe pattern", state.h.len(), pm.len())?;
    check_len("sidelobe pattern", state.g.len(), ps.len())?;
    check_len("null pattern", state.q.len(), pn.len())?;
    ascend(&mut state.delta, &state.h, pm, mainlobe_step);
    ascend(&mut state.lambda, &state.g, ps, constraint_step);
    ascend(&mut state.xi, &state.q, pn, constraint_step);
    Ok(())
}

/// Smallest uniform dB relaxation of the ripple bound `10 log10(alpha)` and of the two
/// thresholds under which the sampled pattern would satisfy the analog constraints,
/// all levels taken relative to the weakest mainlobe sample.
pub fn constraint_violation_db(pm: &[Complex64], ps: &[Complex64], pn: &[Complex64], params: &AdmmParams) -> f64 {
    let pw = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
    let (m, s, n) = (pw(pm), pw(ps), pw(pn));
    let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lo > 0.0) {
        return f64::INFINITY;
    }
    let db = |x: f64| 10.0 * (x / lo).log10();
    let hi = m.iter().cloned().fold(0.0, f64::max);
    let mut v = db(hi) - 10.0 * params.alpha.log10();
    if let Some(x) = s.iter().cloned().reduce(f64::max) {
        v = v.max(db(x) - 10.0 * params.eta_sl_lin.log10());
    }
    if let Some(x) = n.iter().cloned().reduce(f64::max) {
        v = v.max(db(x) - 10.0 * params.eta_z_lin.log10());
    }
    v
}

#[derive(Debug, Clone, Default)]
pub enum StepSource {
    #[default]
    Armijo,
    Unfolded(Arc<CvnnWeights>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualUpdate {
    /// Every multiplier block ascends with step `rho`.
    Uniform,
    /// Separate steps for the mainlobe block and for the sidelobe and null blocks.
    Blockwise { mainlobe: f64, constraint: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalogOptions {
    pub armijo: ArmijoParams,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub dual: DualUpdate,
    /// Number of ADMM runs. Run 0 starts from the least-squares fit; run k > 0 from a
    /// quadratic-phase chirp with seeded Gaussian phase jitter.
    pub starts: usize,
    pub chirp_rate: f64,
    pub jitter_rad: f64,
    pub seed: u64,
    /// Return the iterate with the smallest constraint violation over all runs and
    /// iterations instead of the final iterate of the best run.
    pub keep_best: bool,
}

impl Default for AnalogOptions {
    fn default() -> Self {
        Self {
            armijo: ArmijoParams::default(),
            inner_iters: 20,
            inner_tol: 1e-6,
            dual: DualUpdate::Blockwise {
                mainlobe: 0.02,
                constraint: 0.3,
            },
            starts: 32,
            chirp_rate: 0.2,
            jitter_rad: 0.3,
            seed: 0,
            keep_best: true,
        }
    }
}

impl AnalogOptions {
    /// Single run from the least-squares start, uniform multiplier step `rho`, final
    /// iterate returned.
    pub fn plain() -> Self {
        Self {
            dual: DualUpdate::Uniform,
            starts: 1,
            keep_best: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.armijo.validate()?;
        if self.starts == 0 {
            return Err(Error::Config("at least one start is required".into()));
        }
        if let DualUpdate::Blockwise { mainlobe, constraint } = self.dual {
            if !(mainlobe >= 0.0 && constraint >= 0.0) {
                return Err(Error::Config("dual steps must be nonnegative".into()));
            }
        }
        if !(self.jitter_rad >= 0.0 && self.chirp_rate.is_finite()) {
            return Err(Error::Config("invalid start perturbation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalogTraceRow {
    pub iter: usize,
    pub epsilon_l: f64,
    pub residual_h: f64,
    pub residual_g: f64,
    pub residual_q: f64,
    pub violation_db: f64,
}

#[derive(Debug, Clone)]
pub struct StartSummary {
    pub iterations: usize,
    pub final_violation_db: f64,
    pub best_violation_db: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverFlags {
    pub line_search_exhausted: usize,
    pub zero_gradient_exits: usize,
    pub ridge_regularized: bool,
}

#[derive(Debug, Clone)]
pub struct AnalogOutcome {
    pub w_rf: CVec,
    pub epsilon_l: f64,
    pub violation_db: f64,
    /// Run index and 1-based iteration that produced `w_rf`.
    pub start: usize,
    pub iteration: usize,
    /// Convergence trace of the selected run.
    pub trace: Vec<AnalogTraceRow>,
    pub starts: Vec<StartSummary>,
    pub flags: SolverFlags,
}

pub fn start_point(problem: &AnalogProblem, options: &AnalogOptions, k: usize) -> Result<CVec> {
    if k == 0 {
        return problem.ls_start();
    }
    let n = problem.geom.num_antennas;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
    let jitter = Normal::new(0.0, options.jitter_rad).map_err(|e| Error::Config(e.to_string()))?;
    let half = n as f64 / 2.0;
    Ok((0..n)
        .map(|i| {
            let x = i as f64 - half;
            Complex64::cis(PI * options.chirp_rate * x * x / n as f64 + jitter.sample(&mut rng))
        })
        .collect())
}

struct RunResult {
    best: (f64, usize, CVec, f64),
    last: (f64, usize, CVec, f64),
    trace: Vec<AnalogTraceRow>,
}

fn run_admm(
    problem: &AnalogProblem,
    params: &AdmmParams,
    source: &StepSource,
    options: &AnalogOptions,
    w0: CVec,
    flags: &mut SolverFlags,
) -> Result<RunResult> {
    let mut state = AnalogState::initial(problem, w0)?;
    let mut sys = LsSystem::new(state.targets(), problem.steering.clone())?;
    let (step_m, step_c) = match options.dual {
        DualUpdate::Uniform => (params.rho, params.rho),
        DualUpdate::Blockwise { mainlobe, constraint } => (mainlobe, constraint),
    };
    let mut trace = Vec::with_capacity(params.itermax);
    let mut best: Option<(f64, usize, CVec, f64)> = None;
    for t in 0..params.itermax {
        sys.retarget(state.targets())?;
        state.w_rf = match source {
            StepSource::Armijo => {
                let r = rgd_solve(&state.w_rf, &sys, &options.armijo, options.inner_iters, options.inner_tol)?;
                match r.stop {
                    StepFlag::Exhausted => flags.line_search_exhausted += 1,
                    StepFlag::NoProgress => flags.zero_gradient_exits += 1,
                    StepFlag::Accepted => {}
                }
                r.w
            }
            StepSource::Unfolded(weights) => {
                let (cand, _) = unfolded_solve(&sys, weights, Some(&problem.factor))?;
                if sys.objective_gram(&cand) <= sys.objective_gram(&state.w_rf) {
                    cand
                } else {
                    state.w_rf.clone()
                }
            }
        };
        let (pm, ps, pn) = problem.pattern(&state.w_rf)?;
        let sub = |p: &[Complex64], m: &[Complex64]| p.iter().zip(m).map(|(a, b)| a - b).collect::<CVec>();
        let (hh, gh, qh) = (sub(&pm, &state.delta), sub(&ps, &state.lambda), sub(&pn, &state.xi));
        let eps = solve_epsilon_analog(&hh, &gh, &qh, params)?;
        state.h = hh.iter().map(|&z| project_mainlobe(z, eps, params.alpha)).collect();
        state.g = gh.iter().map(|&z| project_sidelobe(z, eps, params.eta_sl_lin)).collect();
        state.q = qh.iter().map(|&z| project_null(z, eps, params.eta_z_lin)).collect();
        update_multipliers_blockwise(&mut state, (&pm, &ps, &pn), step_m, step_c)?;
        let resid = |a: &[Complex64], p: &[Complex64]| norm(&sub(a, p));
        let violation = constraint_violation_db(&pm, &ps, &pn, params);
        trace.push(AnalogTraceRow {
            iter: t + 1,
            epsilon_l: eps,
            residual_h: resid(&state.h, &pm),
            residual_g: resid(&state.g, &ps),
            residual_q: resid(&state.q, &pn),
            violation_db: violation,
        });
        if best.as_ref().is_none_or(|b| violation < b.0) {
            best = Some((violation, t + 1, state.w_rf.clone(), eps));
        }
        let converged = (eps - state.epsilon_l).abs() <= params.kappa;
        state.epsilon_l = eps;
        if converged {
            break;
        }
    }
    let last_row = trace.last().copied().expect("itermax >= 1");
    Ok(RunResult {
        best: best.expect("at least one iteration"),
        last: (last_row.violation_db, last_row.iter, state.w_rf, state.epsilon_l),
        trace,
    })
}

/// Analog synthesis on a prepared problem.
pub fn analog_beamforming_with(
    problem: &AnalogProblem,
    params: &AdmmParams,
    source: &StepSource,
    options: &AnalogOptions,
) -> Result<AnalogOutcome> {
    params.validate()?;
    options.validate()?;
    if let StepSource::Unfolded(w) = source {
        if w.num_antennas() != problem.geom.num_antennas {
            return Err(Error::Config(format!(
                "weights were trained for {} antennas, array has {}",
                w.num_antennas(),
                problem.geom.num_antennas
            )));
        }
    }
    let mut flags = SolverFlags {
        ridge_regularized: problem.factor.ridge > 0.0,
        ..SolverFlags::default()
    };
    let mut chosen: Option<(f64, usize, usize, CVec, f64, Vec<AnalogTraceRow>)> = None;
    let mut starts = Vec::with_capacity(options.starts);
    for k in 0..options.starts {
        let w0 = start_point(problem, options, k)?;
        let run = run_admm(problem, params, source, options, w0, &mut flags)?;
        starts.push(StartSummary {
            iterations: run.trace.len(),
            final_violation_db: run.last.0,
            best_violation_db: run.best.0,
        });
        let pick = if options.keep_best { run.best } else { run.last };
        if chosen.as_ref().is_none_or(|c| pick.0 < c.0) {
            chosen = Some((pick.0, k, pick.1, pick.2, pick.3, run.trace));
        }
    }
    let (violation_db, start, iteration, w_rf, epsilon_l, trace) = chosen.expect("starts >= 1");
    Ok(AnalogOutcome {
        w_rf,
        epsilon_l,
        violation_db,
        start,
        iteration,
        trace,
        starts,
        flags,
    })
}

/// Analog synthesis with the default solver options.
pub fn analog_beamforming(
    spec: &BeamSpec,
    geom: &UlaGeometry,
    params: &AdmmParams,
    source: &StepSource,
) -> Result<AnalogOutcome> {
    let problem = AnalogProblem::new(*geom, spec.clone())?;
    analog_beamforming_with(&problem, params, source, &AnalogOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Interval;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params() -> AdmmParams {
        AdmmParams {
            rho: 1e-5,
            itermax: 50,
            kappa: 1e-6,
            alpha: 1.05,
            eta_z_lin: 1e-3,
            eta_sl_lin: 10f64.powf(-1.5),
        }
    }

    #[test]
    fn mainlobe_projection_branches() {
        let inside = Complex64::from_polar(1.01, 0.3);
        assert_eq!(project_mainlobe(inside, 1.0, 1.05), inside);
        let up = project_mainlobe(c(0.5, 0.0), 1.0, 1.05);
        assert!((up - c(1.0, 0.0)).norm() < 1e-15);
        let down = project_mainlobe(c(2.0, 0.0), 1.0, 1.05);
        assert!((down.norm() - 1.05f64.sqrt()).abs() < 1e-15);
        assert!(down.arg().abs() < 1e-15);
        assert!((1.05f64.sqrt() - 1.02470).abs() < 1e-5);
        assert_eq!(project_mainlobe(c(0.0, 0.0), 4.0, 1.05), c(2.0, 0.0));
    }

    #[test]
    fn cap_projections() {
        let g = project_sidelobe(c(1.0, 0.0), 1.0, 10f64.powf(-1.5));
        assert!((g.norm() - 0.177828).abs() < 1e-6);
        let q = project_null(c(1.0, 0.0), 1.0, 1e-3);
        assert!((q.norm() - 0.0316228).abs() < 1e-6);
        assert_eq!(project_sidelobe(c(0.3, 0.4), 0.0, 0.03), c(0.0, 0.0));
        assert_eq!(project_null(c(0.01, 0.0), 1.0, 1e-3), c(0.01, 0.0));
    }

    #[test]
    fn single_mainlobe_scale_stops_at_top_breakpoint() {
        // -s^2 alone wins past |h|, the last piece is linear and decreasing
        let p = params();
        let eps = solve_epsilon_analog(&[c(1.0, 0.0)], &[], &[], &p).unwrap();
        assert!((eps - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_magnitudes_give_zero() {
        let p = params();
        let z = vec![c(0.0, 0.0); 3];
        assert_eq!(solve_epsilon_analog(&z, &z, &z, &p).unwrap(), 0.0);
    }

    #[test]
    fn empty_scale_problem_is_config_error() {
        assert!(matches!(solve_epsilon_analog(&[], &[], &[], &params()), Err(Error::Config(_))));
    }

    #[test]
    fn equal_mainlobe_magnitudes_vertex_beyond_breakpoints() {
        // g = -s^2 + M (s - 1)^2 past s = 1, vertex at M / (M - 1)
        let p = params();
        let h = vec![c(1.0, 0.0); 4];
        let eps = solve_epsilon_analog(&h, &[], &[], &p).unwrap();
        assert!((eps.sqrt() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn multiplier_hand_case() {
        let mut st = AnalogState {
            w_rf: vec![],
            h: vec![c(1.0, 0.0)],
            g: vec![],
            q: vec![],
            delta: vec![c(0.0, 0.0)],
            lambda: vec![],
            xi: vec![],
            epsilon_l: 1.0,
        };
        update_multipliers_blockwise(&mut st, (&[c(0.5, 0.0)], &[], &[]), 1.0, 1.0).unwrap();
        assert_eq!(st.delta, vec![c(0.5, 0.0)]);
        update_multipliers_blockwise(&mut st, (&[c(0.1, 0.0)], &[], &[]), 0.0, 0.0).unwrap();
        assert_eq!(st.delta, vec![c(0.5, 0.0)]);
    }

    #[test]
    fn itermax_one_records_one_row() {
        let geom = UlaGeometry::half_wavelength(16).unwrap();
        let spec = BeamSpec::with_regions(vec![Interval::new(-4.0, 4.0).unwrap()], vec![Interval::new(56.0, 64.0).unwrap()]);
        let mut p = AdmmParams::from_spec(&spec, 1e-5, 1, 1e-6).unwrap();
        p.itermax = 1;
        let problem = AnalogProblem::new(geom, spec).unwrap();
        let out = analog_beamforming_with(&problem, &p, &StepSource::Armijo, &AnalogOptions::plain()).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert!(out.w_rf.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn start_points_are_unit_modulus_and_seeded() {
        let geom = UlaGeometry::half_wavelength(8).unwrap();
        let spec = BeamSpec::with_regions(vec![Interval::new(-4.0, 4.0).unwrap()], vec![]);
        let problem = AnalogProblem::new(geom, spec).unwrap();
        let o = AnalogOptions::default();
        let a = start_point(&problem, &o, 3).unwrap();
        assert_eq!(a, start_point(&problem, &o, 3).unwrap());
        assert_ne!(a, start_point(&problem, &o, 4).unwrap());
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
