//! TOML scenario configuration. Angles are in degrees and thresholds in dB; linear
//! values are derived when a [`Scenario`] is built.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analog::{AdmmParams, AnalogOptions, DualUpdate, StepSource};
use crate::array::{BeamSpec, Interval, UlaGeometry, UpaGeometry};
use crate::digital::DigitalOptions;
use crate::error::{Error, Result};
use crate::impairments::Similarity;
use crate::metrics::{Thresholds, DEFAULT_RIPPLE_DB};
use crate::pipeline::Scenario;
use crate::unfold::CvnnWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub system: SystemConfig,
    pub spec: SpecConfig,
    /// Per-AP spec overrides in the AP's own frame.
    #[serde(default, rename = "ap")]
    pub aps: Vec<ApOverride>,
    #[serde(default)]
    pub admm: AdmmConfig,
    #[serde(default)]
    pub analog: AnalogOptions,
    #[serde(default)]
    pub digital: DigitalConfig,
    #[serde(default)]
    pub unfolding: UnfoldingConfig,
    #[serde(default)]
    pub verdict: VerdictConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub evaluate: Option<EvaluateConfig>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub impairment: Option<ImpairmentConfig>,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub num_aps: usize,
    pub num_antennas: usize,
    pub spacing_over_wavelength: f64,
    /// When set, orientations are offsets from this AP and the spec is read in its
    /// frame; otherwise orientations are taken in the frame of the spec.
    pub reference_ap: Option<usize>,
    /// Orientation per AP.
    /// Defaults to all zeros.
    pub orientations_deg: Option<Vec<f64>>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_aps: 1,
            num_antennas: 64,
            spacing_over_wavelength: 0.5,
            reference_ap: None,
            orientations_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub mainlobe: Vec<Interval>,
    #[serde(default)]
    pub null: Vec<Interval>,
    #[serde(default)]
    pub sidelobe: Option<Vec<Interval>>,
    #[serde(default = "eta_sl")]
    pub eta_sl_db: f64,
    #[serde(default = "eta_z")]
    pub eta_z_db: f64,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "grid_step")]
    pub grid_step_deg: f64,
}

fn eta_sl() -> f64 {
    -15.0
}
fn eta_z() -> f64 {
    -30.0
}
fn alpha() -> f64 {
    1.05
}
fn grid_step() -> f64 {
    1.0
}

impl SpecConfig {
    pub fn to_spec(&self) -> Result<BeamSpec> {
        let spec = BeamSpec {
            mainlobe: self.mainlobe.clone(),
            sidelobe: self.sidelobe.clone(),
            null: self.null.clone(),
            eta_sl_db: self.eta_sl_db,
            eta_z_db: self.eta_z_db,
            alpha: self.alpha,
            grid_step_deg: self.grid_step_deg,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApOverride {
    pub index: usize,
    pub mainlobe: Vec<Interval>,
    #[serde(default)]
    pub null: Vec<Interval>,
    #[serde(default)]
    pub sidelobe: Option<Vec<Interval>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    pub rho: f64,
    pub itermax: usize,
    pub kappa: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1e-5,
            itermax: 50,
            kappa: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DigitalConfig {
    pub rho: f64,
    pub itermax: usize,
    pub kappa: f64,
    pub dual: DualUpdate,
}

impl Default for DigitalConfig {
    fn default() -> Self {
        Self {
            rho: 1e-5,
            itermax: 50,
            kappa: 1e-6,
            dual: DigitalOptions::default().dual,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    #[default]
    Armijo,
    Unfolded,
}

impl std::str::FromStr for StepMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "armijo" => Ok(Self::Armijo),
            "unfolded" => Ok(Self::Unfolded),
            other => Err(Error::Config(format!("unknown step mode {other:?}, expected armijo or unfolded"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnfoldingConfig {
    pub mode: StepMode,
    /// Relative paths resolve against the config file's directory.
    pub weights: Option<PathBuf>,
    /// Expected network output size; checked against the weights file when set.
    pub horizon: Option<usize>,
}

impl Default for UnfoldingConfig {
    fn default() -> Self {
        Self {
            mode: StepMode::Armijo,
            weights: None,
            horizon: Some(15),
        }
    }
}

/// Limits for the pass/fail verdicts; sidelobe and null default to the spec thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictConfig {
    pub ripple_db: f64,
    pub sidelobe_db: Option<f64>,
    pub null_db: Option<f64>,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            ripple_db: DEFAULT_RIPPLE_DB,
            sidelobe_db: None,
            null_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Grid step of the exported pattern CSV.
    pub pattern_step_deg: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            pattern_step_deg: 0.5,
        }
    }
}

/// SINR / sum-rate study on line-of-sight channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub users_deg: Vec<f64>,
    #[serde(default)]
    pub jammers_deg: Vec<f64>,
    #[serde(default = "default_jsr")]
    pub jsr_db: Vec<f64>,
    /// Offset added to every true jammer angle; the design stays fixed.
    #[serde(default)]
    pub jammer_bias_deg: Vec<f64>,
    #[serde(default = "one")]
    pub noise_var: f64,
    /// Per-AP path gain; all ones when absent.
    #[serde(default)]
    pub path_gains: Option<Vec<f64>>,
}

fn default_jsr() -> Vec<f64> {
    vec![10.0]
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub num_aps: Vec<usize>,
    pub repeats: usize,
    /// Starts per AP during timing.
    pub starts: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            num_aps: vec![2, 4, 6, 8, 10],
            repeats: 5,
            starts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub instances: usize,
    /// Region width of the random specs.
    pub width_deg: f64,
    /// Centers are drawn uniformly from `[-center_range_deg, center_range_deg]`.
    pub center_range_deg: f64,
    /// Upper bound on Armijo RGD iterations per instance.
    pub armijo_max_iters: usize,
    pub armijo_tol: f64,
    /// Timing repetitions per instance; the minimum is reported.
    pub timing_repeats: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            instances: 50,
            width_deg: 8.0,
            center_range_deg: 60.0,
            armijo_max_iters: 500,
            armijo_tol: 1e-6,
            timing_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub sigma_a: f64,
    #[serde(default)]
    pub sigma_p: f64,
    /// Quantizer resolution; absent means ideal phase shifters.
    #[serde(default)]
    pub bits: Option<u32>,
    /// Measured phase map CSV; when absent a synthetic map is generated.
    #[serde(default)]
    pub phase_map: Option<PathBuf>,
    /// Amplitude of the synthetic map distortion in units of the phase resolution.
    #[serde(default = "one")]
    pub distortion_lsb: f64,
    /// Full model file; overrides sigmas, bits and the phase map.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub similarity: Similarity,
    /// Azimuth cut of the ideal design; elevation is fixed at `elevation_deg`.
    pub design: SpecConfig,
    #[serde(default)]
    pub elevation_deg: f64,
    #[serde(default = "default_imp_itermax")]
    pub itermax: usize,
    #[serde(default = "default_cut_step")]
    pub cut_step_deg: f64,
    /// Required improvement of the compensated null over the uncorrected one.
    #[serde(default = "default_null_gain")]
    pub min_null_improvement_db: f64,
}

fn default_imp_itermax() -> usize {
    200
}
fn default_cut_step() -> f64 {
    0.1
}
fn default_null_gain() -> f64 {
    10.0
}

impl ImpairmentConfig {
    pub fn upa(&self) -> Result<UpaGeometry> {
        UpaGeometry::new(self.rows, self.cols)
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.num_aps == 0 {
            return Err(Error::Config("system.num_aps must be at least 1".into()));
        }
        UlaGeometry::new(s.num_antennas, s.spacing_over_wavelength)?;
        if let Some(r) = s.reference_ap.filter(|&r| r >= s.num_aps) {
            return Err(Error::Config(format!("reference AP {r} out of range for {} APs", s.num_aps)));
        }
        if let Some(o) = &s.orientations_deg {
            if o.len() != s.num_aps {
                return Err(Error::Config(format!("{} orientations for {} APs", o.len(), s.num_aps)));
            }
            if !o.iter().all(|v| v.is_finite()) {
                return Err(Error::Config("orientations must be finite".into()));
            }
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.spec.to_spec()?;
        for ap in &self.aps {
            if ap.index >= s.num_aps {
                return Err(Error::Config(format!("AP override index {} out of range", ap.index)));
            }
        }
        self.analog_params()?;
        self.digital_params()?;
        self.analog.validate()?;
        if !(self.output.pattern_step_deg > 0.0 && self.output.pattern_step_deg.is_finite()) {
            return Err(Error::Config("output.pattern_step_deg must be positive".into()));
        }
        if let Some(e) = &self.evaluate {
            if !(e.noise_var > 0.0) {
                return Err(Error::Config("evaluate.noise_var must be positive".into()));
            }
            if let Some(g) = &e.path_gains {
                if g.len() != s.num_aps {
                    return Err(Error::Config("evaluate.path_gains needs one gain per AP".into()));
                }
            }
        }
        if let Some(b) = &self.bench {
            if b.num_aps.is_empty() || b.num_aps.windows(2).any(|w| w[0] >= w[1]) || b.num_aps[0] == 0 {
                return Err(Error::Config("bench.num_aps must be nonempty, positive and ascending".into()));
            }
            if b.repeats == 0 || b.starts == 0 {
                return Err(Error::Config("bench.repeats and bench.starts must be positive".into()));
            }
        }
        if let Some(c) = &self.compare {
            if c.instances == 0 || c.timing_repeats == 0 || !(c.width_deg > 0.0) {
                return Err(Error::Config("compare section has a nonpositive count or width".into()));
            }
        }
        if let Some(i) = &self.impairment {
            i.upa()?;
            i.design.to_spec()?;
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<BeamSpec> {
        self.spec.to_spec()
    }

    pub fn geometry(&self) -> Result<UlaGeometry> {
        UlaGeometry::new(self.system.num_antennas, self.system.spacing_over_wavelength)
    }

    /// Orientation of every AP in the frame of the spec.
    pub fn relative_orientations(&self) -> Vec<f64> {
        match &self.system.orientations_deg {
            Some(o) => {
                let r = self.system.reference_ap.map_or(0.0, |i| o[i]);
                o.iter().map(|v| v - r).collect()
            }
            None => vec![0.0; self.system.num_aps],
        }
    }

    pub fn analog_params(&self) -> Result<AdmmParams> {
        AdmmParams::from_spec(&self.spec()?, self.admm.rho, self.admm.itermax, self.admm.kappa)
    }

    pub fn digital_params(&self) -> Result<AdmmParams> {
        AdmmParams::from_spec(&self.spec()?, self.digital.rho, self.digital.itermax, self.digital.kappa)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        let spec = self.spec()?;
        Ok(Thresholds {
            ripple_db: self.verdict.ripple_db,
            sidelobe_db: self.verdict.sidelobe_db.unwrap_or(spec.eta_sl_db),
            null_db: self.verdict.null_db.unwrap_or(spec.eta_z_db),
        })
    }

    /// Local spec of every AP: the override when given, otherwise the composite spec
    /// seen from the AP's orientation.
    pub fn local_specs(&self) -> Result<Vec<BeamSpec>> {
        let spec = self.spec()?;
        let orient = self.relative_orientations();
        (0..self.system.num_aps)
            .map(|l| match self.aps.iter().find(|a| a.index == l) {
                Some(o) => {
                    let s = BeamSpec {
                        mainlobe: o.mainlobe.clone(),
                        null: o.null.clone(),
                        sidelobe: o.sidelobe.clone(),
                        ..spec.clone()
                    };
                    s.validate()?;
                    Ok(s)
                }
                None => spec.rotated(orient[l]),
            })
            .collect()
    }

    /// Resolved weights path: an explicit override, else the config entry relative to `base`.
    pub fn weights_path(&self, base: Option<&Path>) -> Option<PathBuf> {
        self.unfolding.weights.as_ref().map(|p| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.clone(),
        })
    }

    /// Without a weights file, unfolded mode uses the bundled 64-antenna network.
    pub fn step_source(&self, weights: Option<&Path>) -> Result<StepSource> {
        match self.unfolding.mode {
            StepMode::Armijo => Ok(StepSource::Armijo),
            StepMode::Unfolded => {
                let w = match weights {
                    Some(path) => CvnnWeights::load(path)
                        .map_err(|e| Error::Config(format!("cannot load weights {}: {e}", path.display())))?,
                    None => CvnnWeights::bundled()?,
                };
                if let Some(t) = self.unfolding.horizon {
                    if w.horizon() != t {
                        return Err(Error::Config(format!(
                            "weights predict {} steps, config expects {t}",
                            w.horizon()
                        )));
                    }
                }
                if w.num_antennas() != self.system.num_antennas {
                    return Err(Error::Config(format!(
                        "weights were trained for {} antennas, config has {}",
                        w.num_antennas(),
                        self.system.num_antennas
                    )));
                }
                Ok(StepSource::Unfolded(Arc::new(w)))
            }
        }
    }

    pub fn scenario(&self, step_source: StepSource) -> Result<Scenario> {
        let mut analog_options = self.analog.clone();
        analog_options.seed = analog_options.seed.wrapping_add(self.seed);
        Ok(Scenario {
            geom: self.geometry()?,
            spec: self.spec()?,
            orientations_deg: self.relative_orientations(),
            local_specs: self.local_specs()?,
            analog_params: self.analog_params()?,
            digital_params: self.digital_params()?,
            analog_options,
            digital_options: DigitalOptions { dual: self.digital.dual },
            step_source,
            thresholds: self.thresholds()?,
            workers: self.workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[spec]
mainlobe = [[-4.0, 4.0]]
null = [[56.0, 64.0]]
"#;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let p = c.analog_params().unwrap();
        assert_eq!(p.rho, 1e-5);
        assert_eq!(p.itermax, 50);
        assert_eq!(p.alpha, 1.05);
        assert!((p.eta_z_lin - 1e-3).abs() < 1e-15);
        assert_eq!(c.system.num_antennas, 64);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{MINIMAL}\n[admm]\nrhoo = 1.0\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bad_reference_rejected() {
        let text = format!("[system]\nnum_aps = 2\nreference_ap = 2\n{MINIMAL}");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn orientations_are_relative_to_reference() {
        let text = format!("[system]\nnum_aps = 3\nreference_ap = 1\norientations_deg = [10.0, 12.0, 15.0]\n{MINIMAL}");
        let c = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(c.relative_orientations(), vec![-2.0, 0.0, 3.0]);
    }
}
