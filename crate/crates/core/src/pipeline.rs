//! Two-stage synthesis over a set of APs: concurrent per-AP analog beamforming
//! followed by the central digital stage.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::analog::{analog_beamforming_with, AdmmParams, AnalogOptions, AnalogOutcome, AnalogProblem, StepSource};
use crate::array::{discretize_spec, BeamSpec, UlaGeometry};
use crate::digital::{effective_steering, digital_stage_with, DigitalOptions, DigitalOutcome, DigitalProblem};
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::metrics::{composite_pattern, per_ap_steering, pattern_report_on, PatternReport, Thresholds};

/// Everything needed to run one synthesis.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geom: UlaGeometry,
    /// Composite spec in the reference AP's frame.
    pub spec: BeamSpec,
    /// Orientation of each AP in the reference frame, degrees.
    pub orientations_deg: Vec<f64>,
    /// Per-AP spec in its own frame.
    pub local_specs: Vec<BeamSpec>,
    pub analog_params: AdmmParams,
    pub digital_params: AdmmParams,
    pub analog_options: AnalogOptions,
    pub digital_options: DigitalOptions,
    pub step_source: StepSource,
    pub thresholds: Thresholds,
    pub workers: usize,
}

impl Scenario {
    pub fn num_aps(&self) -> usize {
        self.local_specs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_specs.is_empty() {
            return Err(Error::Config("need at least one AP".into()));
        }
        if self.orientations_deg.len() != self.local_specs.len() {
            return Err(Error::Config(format!(
                "{} orientations for {} APs",
                self.orientations_deg.len(),
                self.local_specs.len()
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.spec.validate()?;
        self.analog_params.validate()?;
        self.digital_params.validate()?;
        self.analog_options.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub analog: Vec<AnalogOutcome>,
    pub digital: DigitalOutcome,
    /// Composite response at the stacked samples of the composite spec.
    pub response: CVec,
    pub report: PatternReport,
}

impl Synthesis {
    pub fn analog_weights(&self) -> Vec<CVec> {
        self.analog.iter().map(|a| a.w_rf.clone()).collect()
    }

    /// Any solver safeguard that fired: exhausted line searches or ridge fallbacks.
    pub fn degenerate(&self) -> bool {
        self.digital.ridge > 0.0
            || self
                .analog
                .iter()
                .any(|a| a.flags.ridge_regularized || a.flags.line_search_exhausted > 0)
    }
}

/// Runs `jobs` on at most `workers` threads; results come back in index order.
pub fn run_indexed<T, F>(jobs: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot poisoned").expect("every job ran"))
        .collect()
}

/// Analog stage for every AP.
pub fn analog_stage(scn: &Scenario) -> Result<Vec<AnalogOutcome>> {
    run_indexed(scn.num_aps(), scn.workers, |l| {
        let problem = AnalogProblem::new(scn.geom, scn.local_specs[l].clone())?;
        let mut options = scn.analog_options.clone();
        options.seed = options.seed.wrapping_add(l as u64);
        analog_beamforming_with(&problem, &scn.analog_params, &scn.step_source, &options)
    })
}

/// Digital stage and report for given analog weights.
pub fn digital_and_report(scn: &Scenario, analog_weights: &[CVec]) -> Result<(DigitalOutcome, CVec, PatternReport)> {
    let discrete = discretize_spec(&scn.spec)?;
    let steering = per_ap_steering(&scn.geom, &scn.orientations_deg, &discrete.stacked())?;
    let eff = effective_steering(analog_weights, &steering)?;
    let problem = DigitalProblem::new(&scn.spec, eff)?;
    let digital = digital_stage_with(&problem, &scn.digital_params, &scn.digital_options)?;
    let response = composite_pattern(&digital.w_bb, analog_weights, &steering)?;
    let report = pattern_report_on(&response, &discrete, &scn.thresholds)?;
    Ok((digital, response, report))
}

pub fn synthesize(scn: &Scenario) -> Result<Synthesis> {
    scn.validate()?;
    let analog = analog_stage(scn)?;
    let weights: Vec<CVec> = analog.iter().map(|a| a.w_rf.clone()).collect();
    let (digital, response, report) = digital_and_report(scn, &weights)?;
    Ok(Synthesis {
        analog,
        digital,
        response,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_indexed_keeps_order() {
        let out = run_indexed(17, 4, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn run_indexed_propagates_errors() {
        let r = run_indexed(5, 2, |i| if i == 3 { Err(Error::Config("x".into())) } else { Ok(i) });
        assert!(r.is_err());
    }
}
