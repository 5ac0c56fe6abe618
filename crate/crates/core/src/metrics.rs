//! Pattern quality metrics, SINR and sum rate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{discretize_spec, local_angle, steering_vector, BeamSpec, DiscreteSpec, UlaGeometry};
use crate::error::{check_len, Error, Result};
use crate::linalg::{hermitian_row, CMat, CVec};

/// `w_bb^H W^{RF,H} a(theta)` at every grid angle, evaluated AP by AP.
pub fn composite_pattern(w_bb: &[Complex64], analog_weights: &[CVec], per_ap_steering: &[CMat]) -> Result<CVec> {
    check_len("digital weights vs APs", analog_weights.len(), w_bb.len())?;
    check_len("steering matrices vs APs", analog_weights.len(), per_ap_steering.len())?;
    let k = per_ap_steering.first().map_or(0, |s| s.ncols());
    let mut out = vec![Complex64::new(0.0, 0.0); k];
    for ((wb, w), s) in w_bb.iter().zip(analog_weights).zip(per_ap_steering) {
        check_len("angles per AP", k, s.ncols())?;
        check_len("analog weights vs antennas", s.nrows(), w.len())?;
        let c = wb.conj();
        for (o, v) in out.iter_mut().zip(hermitian_row(w, s)) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Steering matrices for a set of APs with orientations relative to the reference
/// frame: column `i` of entry `l` is `a(local_angle(angles[i], orientations[l]))`.
pub fn per_ap_steering(geom: &UlaGeometry, orientations_deg: &[f64], angles: &[f64]) -> Result<Vec<CMat>> {
    orientations_deg
        .iter()
        .map(|&phi| {
            let local: Vec<f64> = angles.iter().map(|&t| local_angle(t, phi)).collect();
            crate::array::steering_matrix(geom, &local)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Limit minus measured value in dB; positive means slack.
    pub margin_db: f64,
}

impl Verdict {
    fn upper(measured: f64, limit: f64) -> Self {
        Self {
            pass: measured <= limit,
            margin_db: limit - measured,
        }
    }
}

/// Ripple limit used when none is configured.
pub const DEFAULT_RIPPLE_DB: f64 = 1.0;

/// Limits applied by [`pattern_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ripple_db: f64,
    pub sidelobe_db: f64,
    pub null_db: f64,
}

impl Thresholds {
    /// The spec's sidelobe and null thresholds with the given ripple limit.
    pub fn from_spec(spec: &BeamSpec, ripple_db: f64) -> Self {
        Self {
            ripple_db,
            sidelobe_db: spec.eta_sl_db,
            null_db: spec.eta_z_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub ripple: Verdict,
    pub sidelobe: Verdict,
    pub null: Verdict,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.ripple.pass && self.sidelobe.pass && self.null.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    /// Normalized gain per sample in stacked mainlobe, sidelobe, null order.
    pub gains_db: Vec<f64>,
    pub ripple_db: f64,
    pub max_sidelobe_db: f64,
    /// `-inf` when the spec has no null samples.
    pub max_null_db: f64,
    pub verdicts: Verdicts,
}

fn gain_db(z: Complex64) -> f64 {
    20.0 * z.norm().log10()
}

/// Report for a response laid out as `discrete.stacked()`.
pub fn pattern_report_on(response: &[Complex64], discrete: &DiscreteSpec, limits: &Thresholds) -> Result<PatternReport> {
    check_len("response samples", discrete.total(), response.len())?;
    let m = discrete.mainlobe.len();
    let s = discrete.sidelobe.len();
    if m == 0 {
        return Err(Error::Config("mainlobe region has no samples".into()));
    }
    let raw: Vec<f64> = response.iter().map(|&z| gain_db(z)).collect();
    let peak = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Degenerate("pattern is identically zero".into()));
    }
    let gains_db: Vec<f64> = raw.iter().map(|g| g - peak).collect();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let main = &gains_db[..m];
    let ripple_db = max(main) - main.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sidelobe_db = max(&gains_db[m..m + s]);
    let max_null_db = max(&gains_db[m + s..]);
    let verdicts = Verdicts {
        ripple: Verdict::upper(ripple_db, limits.ripple_db),
        sidelobe: Verdict::upper(max_sidelobe_db, limits.sidelobe_db),
        null: Verdict::upper(max_null_db, limits.null_db),
    };
    Ok(PatternReport {
        gains_db,
        ripple_db,
        max_sidelobe_db,
        max_null_db,
        verdicts,
    })
}

pub fn pattern_report(response: &[Complex64], spec: &BeamSpec) -> Result<PatternReport> {
    pattern_report_on(response, &discretize_spec(spec)?, &Thresholds::from_spec(spec, DEFAULT_RIPPLE_DB))
}

/// Peak-normalized gain in dB on an arbitrary grid.
pub fn normalized_gains_db(response: &[Complex64]) -> Vec<f64> {
    let raw: Vec<f64> = response.iter().map(|&z| gain_db(z)).collect();
    let peak = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter().map(|g| g - peak).collect()
}

/// Combined per-antenna receive vector `W^RF w_bb`, stacked AP by AP.
pub fn combined_weights(w_bb: &[Complex64], analog_weights: &[CVec]) -> Result<CVec> {
    check_len("digital weights vs APs", analog_weights.len(), w_bb.len())?;
    Ok(analog_weights
        .iter()
        .zip(w_bb)
        .flat_map(|(w, b)| w.iter().map(move |x| x * b))
        .collect())
}

/// `|v^H h|^2 / (sum_j |v^H g_j|^2 + noise ||v||^2)` with `v = W^RF w_bb`.
pub fn sinr(
    w_bb: &[Complex64],
    analog_weights: &[CVec],
    user_channel: &[Complex64],
    jammer_channels: &[CVec],
    noise_var: f64,
) -> Result<f64> {
    if !(noise_var > 0.0) {
        return Err(Error::Domain(format!("noise variance must be positive, got {noise_var}")));
    }
    let v = combined_weights(w_bb, analog_weights)?;
    let inner = |h: &[Complex64]| -> Result<f64> {
        check_len("channel length", v.len(), h.len())?;
        Ok(v.iter().zip(h).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr())
    };
    let signal = inner(user_channel)?;
    let mut interference = 0.0;
    for g in jammer_channels {
        interference += inner(g)?;
    }
    let power: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    Ok(signal / (interference + noise_var * power))
}

pub fn sum_rate(sinrs: &[f64]) -> Result<f64> {
    let mut r = 0.0;
    for &s in sinrs {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("SINR must be nonnegative, got {s}")));
        }
        r += (1.0 + s).log2();
    }
    Ok(r)
}

/// Line-of-sight channel of a source at global angle `theta_deg`: concatenated
/// steering vectors at each AP's local angle, AP `l` scaled by `gains[l]`.
pub fn los_channel(geom: &UlaGeometry, orientations_deg: &[f64], theta_deg: f64, gains: &[f64]) -> Result<CVec> {
    check_len("path gains vs APs", orientations_deg.len(), gains.len())?;
    let mut h = Vec::with_capacity(orientations_deg.len() * geom.num_antennas);
    for (&phi, &g) in orientations_deg.iter().zip(gains) {
        h.extend(steering_vector(geom, local_angle(theta_deg, phi))?.into_iter().map(|z| z * g));
    }
    Ok(h)
}
