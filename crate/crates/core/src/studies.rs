//! Experiment drivers behind the CLI: step-size comparison, AP-count scaling,
//! impairment study and SINR evaluation.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analog::{analog_beamforming_with, AdmmParams, AnalogOptions, AnalogProblem, StepSource};
use crate::array::{BeamSpec, Interval, UlaGeometry, UpaGeometry};
use crate::config::{BenchConfig, CompareConfig, EvaluateConfig, ImpairmentConfig};
use crate::error::{Error, Result};
use crate::impairments::{
    impaired_pattern, resolution, sample_errors, ImpairedPattern, ImpairmentModel, PhaseMap,
};
use crate::linalg::CVec;
use crate::manifold::{ls_objective, rgd_solve, ArmijoParams, LsSystem};
use crate::metrics::{los_channel, normalized_gains_db, sinr, sum_rate};
use crate::pipeline::{synthesize, Scenario};
use crate::unfold::{predict_step_sizes, prepare, unfolded_rgd, CvnnWeights};

const MAX_DRAWS: usize = 1000;

/// Mainlobe and null of width `width_deg` with centers uniform in `[-range, range]`,
/// redrawn until the two regions (plus a guard step each side) do not overlap.
pub fn random_spec<R: Rng>(rng: &mut R, width_deg: f64, range_deg: f64, template: &BeamSpec) -> Result<BeamSpec> {
    let half = width_deg / 2.0;
    let gap = width_deg + 2.0 * template.grid_step_deg;
    for _ in 0..MAX_DRAWS {
        let cm: f64 = rng.random_range(-range_deg..=range_deg);
        let cn: f64 = rng.random_range(-range_deg..=range_deg);
        if (cm - cn).abs() <= gap {
            continue;
        }
        let (Ok(m), Ok(n)) = (Interval::new(cm - half, cm + half), Interval::new(cn - half, cn + half)) else {
            continue;
        };
        let spec = BeamSpec {
            mainlobe: vec![m],
            null: vec![n],
            sidelobe: None,
            ..template.clone()
        };
        if crate::array::discretize_spec(&spec).is_ok() {
            return Ok(spec);
        }
    }
    Err(Error::Config("could not draw a non-overlapping random spec".into()))
}

/// One least-squares subproblem as the analog solver meets it at its first iteration.
#[derive(Debug, Clone)]
pub struct SubproblemInstance {
    pub spec: BeamSpec,
    pub sys: LsSystem,
}

pub fn subproblem_instances(
    geom: &UlaGeometry,
    template: &BeamSpec,
    admm: (f64, usize, f64),
    cfg: &CompareConfig,
    seed: u64,
) -> Result<Vec<SubproblemInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.instances)
        .map(|_| {
            let spec = random_spec(&mut rng, cfg.width_deg, cfg.center_range_deg, template)?;
            let params = AdmmParams::from_spec(&spec, admm.0, admm.1, admm.2)?;
            let problem = AnalogProblem::new(*geom, spec.clone())?;
            let w = problem.ls_start()?;
            Ok(SubproblemInstance {
                sys: problem.subproblem_at(&w, &params)?,
                spec,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub instance: usize,
    pub start_objective: f64,
    pub armijo_objective: f64,
    pub unfolded_objective: f64,
    pub objective_ratio: f64,
    pub armijo_time_s: f64,
    pub unfolded_time_s: f64,
    pub armijo_iters: usize,
    pub unfolded_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub instances: usize,
    pub armijo_total_s: f64,
    pub unfolded_total_s: f64,
    /// Armijo total time over unfolded total time.
    pub speedup: f64,
    /// Share of instances with `objective_ratio <= ratio_limit`.
    pub within_ratio: f64,
    pub ratio_limit: f64,
}

fn min_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let v = f()?;
        best = best.min(t.elapsed().as_secs_f64());
        out = Some(v);
    }
    Ok((out.expect("at least one repeat"), best))
}

/// Paired Armijo and unfolded solves from the same projected least-squares start.
pub fn compare_stepsize(
    instances: &[SubproblemInstance],
    weights: &CvnnWeights,
    armijo: &ArmijoParams,
    cfg: &CompareConfig,
    ratio_limit: f64,
) -> Result<(Vec<CompareRow>, CompareSummary)> {
    let mut rows = Vec::with_capacity(instances.len());
    for (k, inst) in instances.iter().enumerate() {
        let sys = &inst.sys;
        let (w0, _) = prepare(sys, None)?;
        let (armijo_run, ta) = min_time(cfg.timing_repeats, || {
            let (w0, _) = prepare(sys, None)?;
            rgd_solve(&w0, sys, armijo, cfg.armijo_max_iters, cfg.armijo_tol)
        })?;
        let (wu, tu) = min_time(cfg.timing_repeats, || {
            let (w0, input) = prepare(sys, None)?;
            let steps = predict_step_sizes(&input, weights)?;
            unfolded_rgd(&w0, sys, &steps)
        })?;
        let fa = ls_objective(&armijo_run.w, sys)?;
        let fu = ls_objective(&wu, sys)?;
        rows.push(CompareRow {
            instance: k,
            start_objective: ls_objective(&w0, sys)?,
            armijo_objective: fa,
            unfolded_objective: fu,
            objective_ratio: fu / fa,
            armijo_time_s: ta,
            unfolded_time_s: tu,
            armijo_iters: armijo_run.iterations(),
            unfolded_iters: weights.horizon(),
        });
    }
    let ta: f64 = rows.iter().map(|r| r.armijo_time_s).sum();
    let tu: f64 = rows.iter().map(|r| r.unfolded_time_s).sum();
    let ok = rows.iter().filter(|r| r.objective_ratio <= ratio_limit).count();
    let summary = CompareSummary {
        instances: rows.len(),
        armijo_total_s: ta,
        unfolded_total_s: tu,
        speedup: ta / tu,
        within_ratio: ok as f64 / rows.len().max(1) as f64,
        ratio_limit,
    };
    Ok((rows, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndToEndTiming {
    pub armijo_s: f64,
    pub unfolded_s: f64,
    /// Armijo time over unfolded time.
    pub speedup: f64,
    pub armijo_violation_db: f64,
    pub unfolded_violation_db: f64,
}

/// Wall time of one complete analog synthesis under each step-size rule, best of `repeats`.
pub fn end_to_end_timing(
    problem: &AnalogProblem,
    params: &AdmmParams,
    options: &AnalogOptions,
    weights: &std::sync::Arc<CvnnWeights>,
    repeats: usize,
) -> Result<EndToEndTiming> {
    let armijo = StepSource::Armijo;
    let unfolded = StepSource::Unfolded(weights.clone());
    let (a, ta) = min_time(repeats, || analog_beamforming_with(problem, params, &armijo, options))?;
    let (u, tu) = min_time(repeats, || analog_beamforming_with(problem, params, &unfolded, options))?;
    Ok(EndToEndTiming {
        armijo_s: ta,
        unfolded_s: tu,
        speedup: ta / tu,
        armijo_violation_db: a.violation_db,
        unfolded_violation_db: u.violation_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub num_aps: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config("linear fit needs at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Scenario with `l` APs whose orientations spread evenly over the base scenario's range.
pub fn scaled_scenario(base: &Scenario, l: usize) -> Result<Scenario> {
    let lo = base.orientations_deg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = base.orientations_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let orient: Vec<f64> = (0..l)
        .map(|i| if l == 1 { 0.0 } else { lo + (hi - lo) * i as f64 / (l - 1) as f64 })
        .collect();
    let local = orient.iter().map(|&p| base.spec.rotated(p)).collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        orientations_deg: orient,
        local_specs: local,
        ..base.clone()
    })
}

/// Full two-stage synthesis timed per AP count, serially.
pub fn bench_scaling(base: &Scenario, cfg: &BenchConfig) -> Result<(Vec<BenchRow>, LinearFit)> {
    let mut rows = Vec::new();
    for &l in &cfg.num_aps {
        let mut scn = scaled_scenario(base, l)?;
        scn.workers = 1;
        scn.analog_options.starts = cfg.starts;
        let mut times = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            let t = Instant::now();
            synthesize(&scn)?;
            times.push(t.elapsed().as_secs_f64());
        }
        let min = times.iter().copied().fold(f64::INFINITY, f64::min);
        let max = times.iter().copied().fold(0.0, f64::max);
        rows.push(BenchRow {
            num_aps: l,
            median_s: median(&mut times),
            min_s: min,
            max_s: max,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.num_aps as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.median_s).collect();
    let fit = linear_fit(&x, &y)?;
    Ok((rows, fit))
}

/// Impairment model from configuration: a model file when given, otherwise sampled
/// channel errors plus a measured or synthetic phase map.
pub fn build_impairment_model(cfg: &ImpairmentConfig, seed: u64, base: Option<&std::path::Path>) -> Result<ImpairmentModel> {
    let resolve = |p: &std::path::Path| match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    };
    let upa = cfg.upa()?;
    let model = if let Some(p) = &cfg.model {
        ImpairmentModel::load(&resolve(p))?
    } else {
        let errors = sample_errors(&upa, cfg.sigma_a, cfg.sigma_p, seed)?;
        let phase_map = match (cfg.bits, &cfg.phase_map) {
            (None, _) => None,
            (Some(_), Some(p)) => Some(PhaseMap::read_csv(std::fs::File::open(resolve(p))?)?),
            (Some(b), None) => Some(PhaseMap::synthetic(
                upa.channels(),
                b,
                cfg.distortion_lsb * resolution(b),
                seed.wrapping_add(1),
            )?),
        };
        ImpairmentModel {
            errors,
            bits: cfg.bits,
            phase_map,
        }
    };
    model.validate()?;
    if model.errors.rows != upa.rows || model.errors.cols != upa.cols {
        return Err(Error::Config("impairment model shape does not match the configured array".into()));
    }
    Ok(model)
}

/// Ideal UPA weights: the azimuth cut is designed as a ULA along the columns with the
/// element phase step `sin(az)` of the UPA pattern, and rows are co-phased toward
/// `elevation_deg`.
pub fn design_upa_weights(cfg: &ImpairmentConfig, options: &AnalogOptions) -> Result<DMatrix<Complex64>> {
    let spec = cfg.design.to_spec()?;
    let line = UlaGeometry::new(cfg.cols, 1.0 / std::f64::consts::TAU)?;
    let params = AdmmParams::from_spec(&spec, 1e-5, cfg.itermax, 1e-6)?;
    let problem = AnalogProblem::new(line, spec)?;
    let out = analog_beamforming_with(&problem, &params, &StepSource::Armijo, options)?;
    let u0 = cfg.elevation_deg.to_radians().sin();
    Ok(DMatrix::from_fn(cfg.rows, cfg.cols, |m, n| {
        out.w_rf[n].conj() * Complex64::cis(-((m + 1) as f64) * u0)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentStudy {
    pub pattern: ImpairedPattern,
    pub ideal_db: Vec<f64>,
    pub uncorrected_db: Vec<f64>,
    pub compensated_db: Vec<f64>,
    pub null_ideal_db: f64,
    pub null_uncorrected_db: f64,
    pub null_compensated_db: f64,
}

impl ImpairmentStudy {
    /// How much deeper the compensated null is than the uncorrected one.
    pub fn null_improvement_db(&self) -> f64 {
        self.null_uncorrected_db - self.null_compensated_db
    }
}

pub fn impairment_study(
    cfg: &ImpairmentConfig,
    ideal: &DMatrix<Complex64>,
    model: &ImpairmentModel,
) -> Result<ImpairmentStudy> {
    let upa: UpaGeometry = cfg.upa()?;
    let steps = (180.0 / cfg.cut_step_deg).round() as usize;
    let points: Vec<(f64, f64)> = (0..=steps)
        .map(|i| ((-90.0 + i as f64 * cfg.cut_step_deg).min(90.0), cfg.elevation_deg))
        .collect();
    let pattern = impaired_pattern(ideal, model, &upa, &points, cfg.similarity)?;
    let ideal_db = normalized_gains_db(&pattern.ideal);
    let uncorrected_db = normalized_gains_db(&pattern.uncorrected);
    let compensated_db = normalized_gains_db(&pattern.compensated);
    let nulls = &cfg.design.null;
    let in_null = |az: f64| nulls.iter().any(|iv| iv.contains(az));
    let worst = |g: &[f64]| {
        points
            .iter()
            .zip(g)
            .filter(|(p, _)| in_null(p.0))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(ImpairmentStudy {
        null_ideal_db: worst(&ideal_db),
        null_uncorrected_db: worst(&uncorrected_db),
        null_compensated_db: worst(&compensated_db),
        pattern,
        ideal_db,
        uncorrected_db,
        compensated_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrRow {
    pub jsr_db: f64,
    pub jammer_bias_deg: f64,
    pub user: usize,
    pub user_deg: f64,
    pub sinr_db: f64,
    pub sinr_no_jammer_db: f64,
    /// Sum rate over all users at this JSR and bias.
    pub sum_rate: f64,
}

/// SINR of every user for every (JSR, jammer bias) point on line-of-sight channels.
pub fn sinr_table(
    geom: &UlaGeometry,
    orientations_deg: &[f64],
    analog_weights: &[CVec],
    w_bb: &[Complex64],
    cfg: &EvaluateConfig,
) -> Result<Vec<SinrRow>> {
    let gains = cfg
        .path_gains
        .clone()
        .unwrap_or_else(|| vec![1.0; orientations_deg.len()]);
    let biases = if cfg.jammer_bias_deg.is_empty() { vec![0.0] } else { cfg.jammer_bias_deg.clone() };
    let users: Vec<CVec> = cfg
        .users_deg
        .iter()
        .map(|&t| los_channel(geom, orientations_deg, t, &gains))
        .collect::<Result<_>>()?;
    let clean: Vec<f64> = users
        .iter()
        .map(|h| sinr(w_bb, analog_weights, h, &[], cfg.noise_var))
        .collect::<Result<_>>()?;
    let db = |x: f64| 10.0 * x.log10();
    let mut rows = Vec::new();
    for &jsr in &cfg.jsr_db {
        let amp = 10f64.powf(jsr / 20.0);
        for &bias in &biases {
            let jammers: Vec<CVec> = cfg
                .jammers_deg
                .iter()
                .map(|&t| {
                    let g: Vec<f64> = gains.iter().map(|v| v * amp).collect();
                    los_channel(geom, orientations_deg, (t + bias).clamp(-90.0, 90.0), &g)
                })
                .collect::<Result<_>>()?;
            let s: Vec<f64> = users
                .iter()
                .map(|h| sinr(w_bb, analog_weights, h, &jammers, cfg.noise_var))
                .collect::<Result<_>>()?;
            let rate = sum_rate(&s)?;
            for (k, v) in s.iter().enumerate() {
                rows.push(SinrRow {
                    jsr_db: jsr,
                    jammer_bias_deg: bias,
                    user: k,
                    user_deg: cfg.users_deg[k],
                    sinr_db: db(*v),
                    sinr_no_jammer_db: db(clean[k]),
                    sum_rate: rate,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_spec_regions_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = BeamSpec::with_regions(vec![Interval::new(-4.0, 4.0).unwrap()], vec![]);
        for _ in 0..50 {
            let s = random_spec(&mut rng, 8.0, 60.0, &t).unwrap();
            assert!((s.mainlobe[0].center() - s.null[0].center()).abs() > 10.0);
        }
    }
}
