//! Central digital beamforming across APs. Each AP contributes one RF chain whose
//! response at a sampled angle is `(w_l^RF)^H a_l(theta^l)`; the CPU picks the combining
//! vector `w_bb` by an ADMM with a closed-form least-squares step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analog::{AdmmParams, DualUpdate};
use crate::array::{discretize_spec, BeamSpec, DiscreteSpec};
use crate::error::{check_len, Error, Result};
use crate::linalg::{a_conj, gram, hermitian_row, norm, CMat, CVec, HermitianFactor, HermitianSolve};

/// Upper limit on the ripple variable so the lower mainlobe bound stays real.
pub const MAX_EPSILON: f64 = 1.0 - 1e-9;

/// `L x K` matrix whose column `i` is `W^{RF,H} a(theta_i)` for the block-diagonal
/// analog weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveArray {
    a_cpu: CMat,
}

impl EffectiveArray {
    pub fn from_matrix(a_cpu: CMat) -> Result<Self> {
        if a_cpu.nrows() == 0 || a_cpu.ncols() == 0 {
            return Err(Error::Config("effective array is empty".into()));
        }
        Ok(Self { a_cpu })
    }

    pub fn matrix(&self) -> &CMat {
        &self.a_cpu
    }

    pub fn num_aps(&self) -> usize {
        self.a_cpu.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.a_cpu.ncols()
    }

    /// Composite response `w_bb^H a_cpu(theta_i)` at every column.
    pub fn response(&self, w_bb: &[Complex64]) -> Result<CVec> {
        check_len("digital weights vs APs", self.num_aps(), w_bb.len())?;
        Ok(hermitian_row(w_bb, &self.a_cpu))
    }
}

/// Entry `(l, i) = (w_l^RF)^H a_l(theta_i^l)` from per-AP analog weights and per-AP
/// steering matrices (`N_r x K`, columns at each AP's local angles).
pub fn effective_steering(analog_weights: &[CVec], per_ap_steering: &[CMat]) -> Result<EffectiveArray> {
    if analog_weights.is_empty() {
        return Err(Error::Config("need at least one AP".into()));
    }
    check_len("steering matrices vs APs", analog_weights.len(), per_ap_steering.len())?;
    let k = per_ap_steering[0].ncols();
    let mut a = CMat::zeros(analog_weights.len(), k);
    for (l, (w, s)) in analog_weights.iter().zip(per_ap_steering).enumerate() {
        check_len("angles per AP", k, s.ncols())?;
        check_len("analog weights vs antennas", s.nrows(), w.len())?;
        for (i, v) in hermitian_row(w, s).into_iter().enumerate() {
            a[(l, i)] = v;
        }
    }
    EffectiveArray::from_matrix(a)
}

/// `(A A^H + gamma I)^{-1} A conj(u)`, ridge only when the Gram matrix is singular.
pub fn digital_ls(eff: &EffectiveArray, u_cpu: &[Complex64]) -> Result<HermitianSolve> {
    check_len("targets vs samples", eff.num_samples(), u_cpu.len())?;
    let f = HermitianFactor::new(&gram(&eff.a_cpu))?;
    Ok(HermitianSolve {
        x: f.solve(&a_conj(&eff.a_cpu, u_cpu))?,
        ridge: f.ridge,
    })
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

/// Magnitude clamped into `[sqrt(1 - eps), sqrt(1 + eps)]`.
pub fn project_mainlobe_digital(h_hat: Complex64, epsilon: f64) -> Complex64 {
    let e = epsilon.clamp(0.0, MAX_EPSILON);
    clamp_magnitude(h_hat, (1.0 - e).sqrt(), (1.0 + e).sqrt())
}

/// Magnitude capped at `sqrt(eta)`; serves both sidelobe and null samples.
pub fn project_cap_digital(x_hat: Complex64, eta_lin: f64) -> Complex64 {
    clamp_magnitude(x_hat, 0.0, eta_lin.max(0.0).sqrt())
}

pub fn project_sidelobe_digital(g_hat: Complex64, eta_sl_lin: f64) -> Complex64 {
    project_cap_digital(g_hat, eta_sl_lin)
}

pub fn project_null_digital(q_hat: Complex64, eta_z_lin: f64) -> Complex64 {
    project_cap_digital(q_hat, eta_z_lin)
}

/// Ripple deviations `e_m = sqrt(|1 - |h_m|^2|)`.
pub fn ripple_deviations(h: &[Complex64]) -> Vec<f64> {
    h.iter().map(|z| (1.0 - z.norm_sqr()).abs().sqrt()).collect()
}

/// `eps + sum_m (sqrt(eps) - e_m)^2`.
pub fn epsilon_objective_digital(epsilon: f64, e: &[f64]) -> f64 {
    let s = epsilon.max(0.0).sqrt();
    epsilon + e.iter().map(|v| (s - v) * (s - v)).sum::<f64>()
}

/// Minimizer over `eps in [0, MAX_EPSILON]`: `sqrt(eps) = ||e||_1 / (M + 1)`, clamped.
pub fn solve_epsilon_digital(h_cpu: &[Complex64]) -> Result<f64> {
    if h_cpu.is_empty() {
        return Err(Error::Config("digital ripple needs at least one mainlobe sample".into()));
    }
    let e = ripple_deviations(h_cpu);
    let s = e.iter().sum::<f64>() / (e.len() + 1) as f64;
    Ok((s * s).min(MAX_EPSILON))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalState {
    pub w_bb: CVec,
    pub h_cpu: CVec,
    pub g_cpu: CVec,
    pub q_cpu: CVec,
    pub delta_cpu: CVec,
    pub lambda_cpu: CVec,
    pub xi_cpu: CVec,
    pub epsilon: f64,
}

/// Sample layout of the composite pattern plus its effective array.
#[derive(Debug, Clone)]
pub struct DigitalProblem {
    pub discrete: DiscreteSpec,
    pub eff: EffectiveArray,
}

impl DigitalProblem {
    pub fn new(spec: &BeamSpec, eff: EffectiveArray) -> Result<Self> {
        let discrete = discretize_spec(spec)?;
        check_len("effective array columns vs samples", discrete.total(), eff.num_samples())?;
        Ok(Self { discrete, eff })
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.discrete.mainlobe.len(),
            self.discrete.sidelobe.len(),
            self.discrete.null.len(),
        )
    }

    pub fn split(&self, row: &[Complex64]) -> (CVec, CVec, CVec) {
        let (m, s, _) = self.counts();
        (row[..m].to_vec(), row[m..m + s].to_vec(), row[m + s..].to_vec())
    }
}

fn ascend(mult: &mut [Complex64], aux: &[Complex64], pattern: &[Complex64], step: f64) {
    for ((d, a), p) in mult.iter_mut().zip(aux).zip(pattern) {
        *d += (a - p) * step;
    }
}

/// `delta += rho (h - w_bb^H a_cpu)` and likewise for the sidelobe and null blocks.
pub fn update_multipliers_digital(state: &mut DigitalState, problem: &DigitalProblem, rho: f64) -> Result<()> {
    let row = problem.eff.response(&state.w_bb)?;
    let (pm, ps, pn) = problem.split(&row);
    update_blocks(state, (&pm, &ps, &pn), rho, rho)
}

fn update_blocks(
    state: &mut DigitalState,
    pattern: (&[Complex64], &[Complex64], &[Complex64]),
    mainlobe_step: f64,
    constraint_step: f64,
) -> Result<()> {
    let (pm, ps, pn) = pattern;
    check_len("mainlobe pattern", state.h_cpu.len(), pm.len())?;
    check_len("sidelobe pattern", state.g_cpu.len(), ps.len())?;
    check_len("null pattern", state.q_cpu.len(), pn.len())?;
    ascend(&mut state.delta_cpu, &state.h_cpu, pm, mainlobe_step);
    ascend(&mut state.lambda_cpu, &state.g_cpu, ps, constraint_step);
    ascend(&mut state.xi_cpu, &state.q_cpu, pn, constraint_step);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DigitalOptions {
    pub dual: DualUpdate,
}

impl Default for DigitalOptions {
    fn default() -> Self {
        Self {
            dual: DualUpdate::Blockwise {
                mainlobe: 1.0,
                constraint: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitalTraceRow {
    pub iter: usize,
    pub epsilon: f64,
    pub residual_h: f64,
    pub residual_g: f64,
    pub residual_q: f64,
}

#[derive(Debug, Clone)]
pub struct DigitalOutcome {
    pub w_bb: CVec,
    pub epsilon: f64,
    pub trace: Vec<DigitalTraceRow>,
    pub ridge: f64,
    pub converged: bool,
}

pub fn digital_stage_with(
    problem: &DigitalProblem,
    params: &AdmmParams,
    options: &DigitalOptions,
) -> Result<DigitalOutcome> {
    params.validate()?;
    let a = problem.eff.matrix();
    let factor = HermitianFactor::new(&gram(a))?;
    let (m, s, n) = problem.counts();
    let mut template = vec![Complex64::new(0.0, 0.0); m + s + n];
    for v in template.iter_mut().take(m) {
        *v = Complex64::new(1.0, 0.0);
    }
    let w_bb = factor.solve(&a_conj(a, &template))?;
    let (h, g, q) = problem.split(&problem.eff.response(&w_bb)?);
    let zero = |k: usize| vec![Complex64::new(0.0, 0.0); k];
    let mut st = DigitalState {
        w_bb,
        h_cpu: h,
        g_cpu: g,
        q_cpu: q,
        delta_cpu: zero(m),
        lambda_cpu: zero(s),
        xi_cpu: zero(n),
        epsilon: 0.0,
    };
    let (step_m, step_c) = match options.dual {
        DualUpdate::Uniform => (params.rho, params.rho),
        DualUpdate::Blockwise { mainlobe, constraint } => (mainlobe, constraint),
    };
    let sub = |p: &[Complex64], d: &[Complex64]| p.iter().zip(d).map(|(a, b)| a - b).collect::<CVec>();
    let mut trace = Vec::with_capacity(params.itermax);
    let mut converged = false;
    for t in 0..params.itermax {
        let (pm, ps, pn) = problem.split(&problem.eff.response(&st.w_bb)?);
        let hh = sub(&pm, &st.delta_cpu);
        let eps = solve_epsilon_digital(&hh)?;
        st.h_cpu = hh.iter().map(|&z| project_mainlobe_digital(z, eps)).collect();
        st.g_cpu = sub(&ps, &st.lambda_cpu)
            .into_iter()
            .map(|z| project_sidelobe_digital(z, params.eta_sl_lin))
            .collect();
        st.q_cpu = sub(&pn, &st.xi_cpu)
            .into_iter()
            .map(|z| project_null_digital(z, params.eta_z_lin))
            .collect();
        let mut u = Vec::with_capacity(m + s + n);
        u.extend(st.h_cpu.iter().zip(&st.delta_cpu).map(|(a, b)| a + b));
        u.extend(st.g_cpu.iter().zip(&st.lambda_cpu).map(|(a, b)| a + b));
        u.extend(st.q_cpu.iter().zip(&st.xi_cpu).map(|(a, b)| a + b));
        st.w_bb = factor.solve(&a_conj(a, &u))?;
        let (pm, ps, pn) = problem.split(&problem.eff.response(&st.w_bb)?);
        update_blocks(&mut st, (&pm, &ps, &pn), step_m, step_c)?;
        trace.push(DigitalTraceRow {
            iter: t + 1,
            epsilon: eps,
            residual_h: norm(&sub(&st.h_cpu, &pm)),
            residual_g: norm(&sub(&st.g_cpu, &ps)),
            residual_q: norm(&sub(&st.q_cpu, &pn)),
        });
        let done = t > 0 && (eps - st.epsilon).abs() <= params.kappa;
        st.epsilon = eps;
        if done {
            converged = true;
            break;
        }
    }
    Ok(DigitalOutcome {
        w_bb: st.w_bb,
        epsilon: st.epsilon,
        trace,
        ridge: factor.ridge,
        converged,
    })
}

pub fn digital_stage(eff: &EffectiveArray, spec: &BeamSpec, params: &AdmmParams) -> Result<DigitalOutcome> {
    let problem = DigitalProblem::new(spec, eff.clone())?;
    digital_stage_with(&problem, params, &DigitalOptions::default())
}
