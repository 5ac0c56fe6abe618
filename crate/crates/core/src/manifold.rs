//! Riemannian gradient descent on the complex circle manifold for
//! `min_w ||u - w^H A||^2` subject to `|w_i| = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{a_conj, gram, hermitian_row, mat_vec, norm_sqr, CMat, CVec};

const UNIT_TOL: f64 = 1e-8;

/// Targets `u` and steering matrix `A` of one least-squares subproblem.
/// The Gram matrix `A A^H` and `A conj(u)` are cached.
#[derive(Debug, Clone)]
pub struct LsSystem {
    targets: CVec,
    steering: CMat,
    gram: CMat,
    rhs: CVec,
    target_energy: f64,
}

impl LsSystem {
    pub fn new(targets: CVec, steering: CMat) -> Result<Self> {
        check_len("targets vs steering columns", steering.ncols(), targets.len())?;
        let g = gram(&steering);
        Ok(Self::assemble(targets, steering, g))
    }

    fn assemble(targets: CVec, steering: CMat, gram: CMat) -> Self {
        let rhs = a_conj(&steering, &targets);
        let target_energy = norm_sqr(&targets);
        Self {
            targets,
            steering,
            gram,
            rhs,
            target_energy,
        }
    }

    /// Same steering matrix, new targets; the Gram matrix is reused.
    pub fn retarget(&mut self, targets: CVec) -> Result<()> {
        check_len("targets vs steering columns", self.steering.ncols(), targets.len())?;
        self.rhs = a_conj(&self.steering, &targets);
        self.target_energy = norm_sqr(&targets);
        self.targets = targets;
        Ok(())
    }

    pub fn targets(&self) -> &[Complex64] {
        &self.targets
    }

    pub fn steering(&self) -> &CMat {
        &self.steering
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    /// `A conj(u)`.
    pub fn rhs(&self) -> &[Complex64] {
        &self.rhs
    }

    pub fn num_antennas(&self) -> usize {
        self.steering.nrows()
    }

    /// Objective through the cached Gram form, `||u||^2 - 2 Re(w^H A conj(u)) + w^H G w`.
    pub(crate) fn objective_gram(&self, w: &[Complex64]) -> f64 {
        let gw = mat_vec(&self.gram, w);
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..w.len() {
            quad += (w[i].conj() * gw[i]).re;
            lin += (w[i].conj() * self.rhs[i]).re;
        }
        (self.target_energy - 2.0 * lin + quad).max(0.0)
    }

    pub(crate) fn gradient_unchecked(&self, w: &[Complex64]) -> CVec {
        let mut g = mat_vec(&self.gram, w);
        for (gi, bi) in g.iter_mut().zip(&self.rhs) {
            *gi -= bi;
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoParams {
    pub initial_step: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
        }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("Armijo initial step must be positive".into()));
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::Config("Armijo contraction must lie in (0, 1)".into()));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::Config("Armijo sufficient decrease must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

pub fn ls_objective(w: &[Complex64], sys: &LsSystem) -> Result<f64> {
    check_len("weights vs antennas", sys.num_antennas(), w.len())?;
    let row = hermitian_row(w, &sys.steering);
    Ok(row
        .iter()
        .zip(&sys.targets)
        .map(|(p, u)| (u - p).norm_sqr())
        .sum())
}

/// `A A^H w - A conj(u)`.
pub fn euclidean_gradient(w: &[Complex64], sys: &LsSystem) -> Result<CVec> {
    check_len("weights vs antennas", sys.num_antennas(), w.len())?;
    Ok(sys.gradient_unchecked(w))
}

fn check_unit(w: &[Complex64]) -> Result<()> {
    match w.iter().position(|z| (z.norm() - 1.0).abs() > UNIT_TOL) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!(
            "element {i} has modulus {} instead of 1",
            w[i].norm()
        ))),
    }
}

pub(crate) fn project_unchecked(egrad: &[Complex64], w: &[Complex64]) -> CVec {
    egrad
        .iter()
        .zip(w)
        .map(|(g, wi)| g - wi * (g * wi.conj()).re)
        .collect()
}

/// Tangent-space projection `egrad - Re(egrad . conj(w)) . w`.
pub fn riemannian_project(egrad: &[Complex64], w: &[Complex64]) -> Result<CVec> {
    check_len("gradient vs point", w.len(), egrad.len())?;
    check_unit(w)?;
    Ok(project_unchecked(egrad, w))
}

pub(crate) fn retract_unchecked(w: &[Complex64], direction: &[Complex64], step: f64) -> CVec {
    w.iter()
        .zip(direction)
        .map(|(wi, di)| {
            let z = wi - di * step;
            if z.re == 0.0 && z.im == 0.0 {
                *wi
            } else {
                Complex64::cis(z.arg())
            }
        })
        .collect()
}

/// `exp(j angle(w - step * direction))`. An element that lands exactly on zero keeps
/// its previous phase.
pub fn retract(w: &[Complex64], direction: &[Complex64], step: f64) -> Result<CVec> {
    check_len("direction vs point", w.len(), direction.len())?;
    check_unit(w)?;
    if !(step >= 0.0) {
        return Err(Error::Domain(format!("retraction step must be nonnegative, got {step}")));
    }
    Ok(retract_unchecked(w, direction, step))
}

/// Like [`retract`] but reports a zero element instead of repairing it.
pub fn retract_strict(w: &[Complex64], direction: &[Complex64], step: f64) -> Result<CVec> {
    check_len("direction vs point", w.len(), direction.len())?;
    check_unit(w)?;
    for (i, (wi, di)) in w.iter().zip(direction).enumerate() {
        let z = wi - di * step;
        if z.re == 0.0 && z.im == 0.0 {
            return Err(Error::Degenerate(format!("retraction hits zero at element {i}")));
        }
    }
    Ok(retract_unchecked(w, direction, step))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepFlag {
    Accepted,
    /// Riemannian gradient is zero; nothing to do.
    NoProgress,
    /// Backtracking budget ran out before the sufficient decrease test passed.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub flag: StepFlag,
    /// Accepted point and its objective, present only when `flag == Accepted`.
    pub accepted: Option<(CVec, f64)>,
    pub evaluations: usize,
}

pub fn armijo_step(
    w: &[Complex64],
    sys: &LsSystem,
    rgrad: &[Complex64],
    params: &ArmijoParams,
) -> Result<ArmijoOutcome> {
    check_len("weights vs antennas", sys.num_antennas(), w.len())?;
    check_len("gradient vs point", w.len(), rgrad.len())?;
    check_unit(w)?;
    params.validate()?;
    let f0 = sys.objective_gram(w);
    Ok(armijo_inner(w, f0, sys, rgrad, norm_sqr(rgrad), params))
}

fn armijo_inner(
    w: &[Complex64],
    f0: f64,
    sys: &LsSystem,
    rgrad: &[Complex64],
    gnorm_sqr: f64,
    params: &ArmijoParams,
) -> ArmijoOutcome {
    if gnorm_sqr == 0.0 {
        return ArmijoOutcome {
            step: params.initial_step,
            flag: StepFlag::NoProgress,
            accepted: None,
            evaluations: 0,
        };
    }
    let mut mu = params.initial_step;
    let mut evaluations = 0;
    for _ in 0..params.max_backtracks {
        let cand = retract_unchecked(w, rgrad, mu);
        let f = sys.objective_gram(&cand);
        evaluations += 1;
        if f <= f0 - params.sufficient_decrease * mu * gnorm_sqr {
            return ArmijoOutcome {
                step: mu,
                flag: StepFlag::Accepted,
                accepted: Some((cand, f)),
                evaluations,
            };
        }
        mu *= params.contraction;
    }
    ArmijoOutcome {
        step: mu,
        flag: StepFlag::Exhausted,
        accepted: None,
        evaluations,
    }
}

#[derive(Debug, Clone)]
pub struct RgdResult {
    pub w: CVec,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub steps: Vec<f64>,
    pub final_grad_norm: f64,
    pub stop: StepFlag,
    pub evaluations: usize,
}

impl RgdResult {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace always holds the initial value")
    }
}

/// Armijo-backtracked Riemannian gradient descent. Stops when the Riemannian gradient
/// norm drops below `tol`, after `max_iters` steps, or when a line search fails.
pub fn rgd_solve(
    w0: &[Complex64],
    sys: &LsSystem,
    params: &ArmijoParams,
    max_iters: usize,
    tol: f64,
) -> Result<RgdResult> {
    check_len("weights vs antennas", sys.num_antennas(), w0.len())?;
    check_unit(w0)?;
    params.validate()?;
    let mut w = w0.to_vec();
    let mut f = sys.objective_gram(&w);
    let mut trace = vec![f];
    let mut steps = Vec::new();
    let mut evaluations = 0;
    let mut stop = StepFlag::Accepted;
    let mut gnorm;
    loop {
        let rgrad = project_unchecked(&sys.gradient_unchecked(&w), &w);
        let gsq = norm_sqr(&rgrad);
        gnorm = gsq.sqrt();
        if !(gnorm >= tol) || steps.len() >= max_iters {
            if gsq == 0.0 {
                stop = StepFlag::NoProgress;
            }
            break;
        }
        let out = armijo_inner(&w, f, sys, &rgrad, gsq, params);
        evaluations += out.evaluations;
        match out.accepted {
            Some((cand, fc)) => {
                w = cand;
                f = fc;
                trace.push(f);
                steps.push(out.step);
            }
            None => {
                stop = out.flag;
                break;
            }
        }
    }
    Ok(RgdResult {
        w,
        trace,
        steps,
        final_grad_norm: gnorm,
        stop,
        evaluations,
    })
}

/// Fixed-schedule RGD: exactly `steps.len()` iterations of `w <- R(w, grad, steps[t])`.
pub fn fixed_step_rgd(w0: &[Complex64], sys: &LsSystem, steps: &[f64]) -> Result<CVec> {
    check_len("weights vs antennas", sys.num_antennas(), w0.len())?;
    check_unit(w0)?;
    if let Some(s) = steps.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Domain(format!("step sizes must be nonnegative, got {s}")));
    }
    let mut w = w0.to_vec();
    for &mu in steps {
        let rgrad = project_unchecked(&sys.gradient_unchecked(&w), &w);
        w = retract_unchecked(&w, &rgrad, mu);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_sys(a: f64, u: f64) -> LsSystem {
        LsSystem::new(vec![c(u, 0.0)], CMat::from_element(1, 1, c(a, 0.0))).unwrap()
    }

    #[test]
    fn objective_hand_values() {
        let sys = scalar_sys(1.0, 2.0);
        assert_eq!(ls_objective(&[c(1.0, 0.0)], &sys).unwrap(), 1.0);
        let two = LsSystem::new(vec![c(1.0, 0.0), c(1.0, 0.0)], CMat::from_element(1, 2, c(1.0, 0.0))).unwrap();
        assert_eq!(ls_objective(&[c(0.0, 0.0)], &two).unwrap(), 2.0);
    }

    #[test]
    fn objective_zero_when_exact() {
        let a = CMat::from_fn(2, 3, |i, j| Complex64::cis(0.3 * (i * j) as f64 + 0.1 * i as f64));
        let w = vec![Complex64::cis(0.4), Complex64::cis(-1.1)];
        let u = hermitian_row(&w, &a);
        let sys = LsSystem::new(u, a).unwrap();
        assert!(ls_objective(&w, &sys).unwrap() < 1e-24);
        assert!(crate::linalg::norm(&euclidean_gradient(&w, &sys).unwrap()) < 1e-12);
    }

    #[test]
    fn gradient_hand_value() {
        let sys = scalar_sys(1.0, 2.0);
        let g = euclidean_gradient(&[c(1.0, 0.0)], &sys).unwrap();
        assert_eq!(g, vec![c(-1.0, 0.0)]);
        let g0 = euclidean_gradient(&[c(0.0, 0.0)], &sys).unwrap();
        assert_eq!(g0, vec![c(-2.0, 0.0)]);
    }

    #[test]
    fn projection_examples() {
        let w = vec![Complex64::cis(0.7), Complex64::cis(-2.0)];
        let p = riemannian_project(&w, &w).unwrap();
        assert!(crate::linalg::norm(&p) < 1e-15);
        let ones = vec![c(1.0, 0.0); 3];
        let j = vec![c(0.0, 1.0); 3];
        assert_eq!(riemannian_project(&j, &ones).unwrap(), j);
        assert_eq!(riemannian_project(&[c(3.0, 4.0)], &[c(1.0, 0.0)]).unwrap(), vec![c(0.0, 4.0)]);
        assert!(riemannian_project(&[c(1.0, 0.0)], &[c(2.0, 0.0)]).is_err());
    }

    #[test]
    fn retraction_examples() {
        let w = vec![Complex64::cis(1.3)];
        assert_eq!(retract(&w, &[c(5.0, -2.0)], 0.0).unwrap(), w);
        let r = retract(&[c(1.0, 0.0)], &[c(0.0, -1.0)], 1.0).unwrap();
        assert!((r[0] - Complex64::cis(FRAC_PI_4)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_retraction_keeps_phase() {
        let w = vec![c(1.0, 0.0), Complex64::cis(0.5)];
        let d = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let r = retract(&w, &d, 1.0).unwrap();
        assert_eq!(r[0], w[0]);
        assert!(matches!(retract_strict(&w, &d, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn armijo_zero_gradient_and_zero_budget() {
        let sys = scalar_sys(1.0, 2.0);
        let p = ArmijoParams::default();
        let out = armijo_step(&[c(1.0, 0.0)], &sys, &[c(0.0, 0.0)], &p).unwrap();
        assert_eq!(out.flag, StepFlag::NoProgress);
        assert_eq!(out.step, p.initial_step);
        let zero = ArmijoParams { max_backtracks: 0, ..p };
        let out = armijo_step(&[Complex64::cis(1.0)], &sys, &[c(0.0, 0.3)], &zero).unwrap();
        assert_eq!(out.flag, StepFlag::Exhausted);
        assert_eq!(out.step, p.initial_step);
    }

    #[test]
    fn armijo_reduces_one_dimensional_quadratic() {
        // f(w) = |2 - conj(w)|^2 is minimized at w = 1
        let sys = scalar_sys(1.0, 2.0);
        let w = vec![Complex64::cis(2.0)];
        let rg = riemannian_project(&euclidean_gradient(&w, &sys).unwrap(), &w).unwrap();
        let out = armijo_step(&w, &sys, &rg, &ArmijoParams::default()).unwrap();
        assert_eq!(out.flag, StepFlag::Accepted);
        let (next, f) = out.accepted.unwrap();
        assert!(f < ls_objective(&w, &sys).unwrap());
        assert!((ls_objective(&next, &sys).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn rgd_stationary_and_infinite_tol() {
        let sys = scalar_sys(1.0, 2.0);
        let p = ArmijoParams::default();
        let r = rgd_solve(&[c(1.0, 0.0)], &sys, &p, 20, 1e-6).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.w, vec![c(1.0, 0.0)]);
        let w0 = vec![Complex64::cis(2.0)];
        let r = rgd_solve(&w0, &sys, &p, 20, f64::INFINITY).unwrap();
        assert_eq!(r.w, w0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn fixed_steps_zero_is_identity() {
        let sys = scalar_sys(1.0, 2.0);
        let w0 = vec![Complex64::cis(2.0)];
        assert_eq!(fixed_step_rgd(&w0, &sys, &[0.0; 15]).unwrap(), w0);
    }
}
