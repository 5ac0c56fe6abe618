//! Hardware non-idealities of a phased UPA: per-channel gain and phase errors, b-bit
//! phase quantization, nonlinear code-to-phase maps, and phase-only compensation by
//! cosine-similarity code selection.
//!
//! Channels are indexed row-major, `m * cols + n`. Pattern cuts use azimuth/elevation
//! with `theta = 90 - az` and `phi = el` in [`upa_pattern`].

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::array::{upa_pattern, UpaGeometry};
use crate::error::{Error, Result};

/// Phase resolution `2 pi / 2^b`.
pub fn resolution(bits: u32) -> f64 {
    TAU / (1u64 << bits) as f64
}

fn check_bits(bits: u32) -> Result<()> {
    if (1..=16).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Config(format!("phase shifter bits must be in 1..=16, got {bits}")))
    }
}

/// Gain and phase errors per channel, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelErrors {
    pub rows: usize,
    pub cols: usize,
    pub sigma_a: f64,
    pub sigma_p: f64,
    pub seed: u64,
    pub gain_err: Vec<f64>,
    pub phase_err: Vec<f64>,
}

impl ChannelErrors {
    pub fn zero(geom: &UpaGeometry) -> Self {
        let n = geom.channels();
        Self {
            rows: geom.rows,
            cols: geom.cols,
            sigma_a: 0.0,
            sigma_p: 0.0,
            seed: 0,
            gain_err: vec![0.0; n],
            phase_err: vec![0.0; n],
        }
    }

    pub fn channels(&self) -> usize {
        self.rows * self.cols
    }

    fn validate(&self) -> Result<()> {
        let n = self.rows.checked_mul(self.cols).unwrap_or(0);
        if n == 0 {
            return Err(Error::Config("impairment model has no channels".into()));
        }
        if self.gain_err.len() != n || self.phase_err.len() != n {
            return Err(Error::Config(format!(
                "expected {n} gain and phase errors, got {} and {}",
                self.gain_err.len(),
                self.phase_err.len()
            )));
        }
        if !self.gain_err.iter().chain(&self.phase_err).all(|v| v.is_finite()) {
            return Err(Error::Config("non-finite channel error".into()));
        }
        Ok(())
    }
}

/// Independent `N(0, sigma_a^2)` gain and `N(0, sigma_p^2)` phase errors per channel.
pub fn sample_errors(geom: &UpaGeometry, sigma_a: f64, sigma_p: f64, seed: u64) -> Result<ChannelErrors> {
    if !(sigma_a >= 0.0 && sigma_p >= 0.0 && sigma_a.is_finite() && sigma_p.is_finite()) {
        return Err(Error::Config("error standard deviations must be finite and nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = Normal::new(0.0, sigma_a).map_err(|e| Error::Config(e.to_string()))?;
    let np = Normal::new(0.0, sigma_p).map_err(|e| Error::Config(e.to_string()))?;
    let n = geom.channels();
    let gain_err = (0..n).map(|_| na.sample(&mut rng)).collect();
    let phase_err = (0..n).map(|_| np.sample(&mut rng)).collect();
    Ok(ChannelErrors {
        rows: geom.rows,
        cols: geom.cols,
        sigma_a,
        sigma_p,
        seed,
        gain_err,
        phase_err,
    })
}

/// Measured phase of every code on every channel, radians in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub bits: u32,
    pub tables: Vec<Vec<f64>>,
}

impl PhaseMap {
    /// Code `k` maps to `k * Delta_b` on every channel.
    pub fn linear(channels: usize, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        let d = resolution(bits);
        let table: Vec<f64> = (0..1usize << bits).map(|k| k as f64 * d).collect();
        Ok(Self {
            bits,
            tables: vec![table; channels],
        })
    }

    /// Linear map plus a per-channel sinusoidal distortion
    /// `beta_c sin(2 pi k / 2^b + psi_c)`, `beta_c ~ U(amplitude/2, amplitude)`.
    pub fn synthetic(channels: usize, bits: u32, amplitude_rad: f64, seed: u64) -> Result<Self> {
        check_bits(bits)?;
        if !(amplitude_rad >= 0.0 && amplitude_rad.is_finite()) {
            return Err(Error::Config("distortion amplitude must be nonnegative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase = Uniform::new(0.0, TAU).map_err(|e| Error::Config(e.to_string()))?;
        let levels = 1usize << bits;
        let d = resolution(bits);
        let tables = (0..channels)
            .map(|_| {
                let psi = phase.sample(&mut rng);
                let beta = amplitude_rad * (0.5 + 0.5 * rand::Rng::random::<f64>(&mut rng));
                (0..levels)
                    .map(|k| {
                        let x = k as f64 * d + beta * (TAU * k as f64 / levels as f64 + psi).sin();
                        wrap_2pi(x)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { bits, tables })
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn channels(&self) -> usize {
        self.tables.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_bits(self.bits)?;
        for (c, t) in self.tables.iter().enumerate() {
            if t.len() != self.levels() {
                return Err(Error::Config(format!(
                    "channel {c} has {} codes, expected {}",
                    t.len(),
                    self.levels()
                )));
            }
            if let Some(bad) = t.iter().find(|p| !(**p >= 0.0 && **p < TAU)) {
                return Err(Error::Config(format!("channel {c} phase {bad} outside [0, 2pi)")));
            }
        }
        Ok(())
    }

    /// CSV with header `channel,code,phase_rad`, one row per entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["channel", "code", "phase_rad"])?;
        for (c, t) in self.tables.iter().enumerate() {
            for (k, p) in t.iter().enumerate() {
                out.write_record([c.to_string(), k.to_string(), p.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`PhaseMap::write_csv`]. Every (channel, code) pair must appear
    /// exactly once, and the code count must be a power of two.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["channel", "code", "phase_rad"] {
            return Err(Error::Parse("phase map header must be channel,code,phase_rad".into()));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Parse(format!("expected 3 fields, got {}", rec.len())));
            }
            let c: usize = rec[0].parse().map_err(|_| Error::Parse(format!("bad channel {:?}", &rec[0])))?;
            let k: usize = rec[1].parse().map_err(|_| Error::Parse(format!("bad code {:?}", &rec[1])))?;
            let p: f64 = rec[2].parse().map_err(|_| Error::Parse(format!("bad phase {:?}", &rec[2])))?;
            entries.push((c, k, p));
        }
        if entries.is_empty() {
            return Err(Error::Parse("phase map is empty".into()));
        }
        let count = |key: fn(&(usize, usize, f64)) -> usize| {
            entries.iter().map(key).max().and_then(|m| m.checked_add(1)).unwrap_or(0)
        };
        let (channels, levels) = (count(|e| e.0), count(|e| e.1));
        if !levels.is_power_of_two() || levels < 2 {
            return Err(Error::Parse(format!("{levels} codes is not a power of two")));
        }
        if channels.checked_mul(levels) != Some(entries.len()) {
            return Err(Error::Parse(format!(
                "{} rows for {channels} channels x {levels} codes",
                entries.len()
            )));
        }
        let mut tables = vec![vec![f64::NAN; levels]; channels];
        for (c, k, p) in entries {
            if !tables[c][k].is_nan() {
                return Err(Error::Parse(format!("duplicate entry for channel {c} code {k}")));
            }
            tables[c][k] = p;
        }
        let map = Self {
            bits: levels.trailing_zeros(),
            tables,
        };
        map.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(map)
    }
}

fn wrap_2pi(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Full impairment description of one array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentModel {
    pub errors: ChannelErrors,
    /// `None` disables quantization: phases are applied exactly.
    pub bits: Option<u32>,
    #[serde(default)]
    pub phase_map: Option<PhaseMap>,
}

impl ImpairmentModel {
    pub fn ideal(geom: &UpaGeometry) -> Self {
        Self {
            errors: ChannelErrors::zero(geom),
            bits: None,
            phase_map: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.errors.validate()?;
        if let Some(b) = self.bits {
            check_bits(b)?;
        }
        if let Some(map) = &self.phase_map {
            map.validate()?;
            if Some(map.bits) != self.bits {
                return Err(Error::Config(format!(
                    "phase map has {} bits, model quantizes with {:?}",
                    map.bits, self.bits
                )));
            }
            if map.channels() != self.errors.channels() {
                return Err(Error::Config(format!(
                    "phase map has {} channels, array has {}",
                    map.channels(),
                    self.errors.channels()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `W^D_mn = (1 + dA_mn) exp(j dP_mn) W_mn`.
pub fn apply_channel_errors(weights: &DMatrix<Complex64>, errors: &ChannelErrors) -> Result<DMatrix<Complex64>> {
    errors.validate()?;
    check_shape(weights, errors.rows, errors.cols)?;
    Ok(DMatrix::from_fn(weights.nrows(), weights.ncols(), |m, n| {
        let c = m * errors.cols + n;
        weights[(m, n)] * Complex64::from_polar(1.0 + errors.gain_err[c], errors.phase_err[c])
    }))
}

fn check_shape<T>(w: &DMatrix<T>, rows: usize, cols: usize) -> Result<()> {
    if w.nrows() != rows || w.ncols() != cols {
        return Err(Error::Domain(format!(
            "weights are {}x{}, model is {rows}x{cols}",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Nearest code with ties rounded up, and the residual `phi - code * Delta_b` in
/// `[-Delta_b/2, Delta_b/2)`.
pub fn quantize_phase(phi: f64, bits: u32) -> Result<(u32, f64)> {
    check_bits(bits)?;
    if !phi.is_finite() {
        return Err(Error::Domain("phase must be finite".into()));
    }
    let d = resolution(bits);
    let p = wrap_2pi(phi);
    let mut k = (p / d + 0.5).floor();
    let mut err = p - k * d;
    if err >= d / 2.0 {
        err -= d;
        k += 1.0;
    } else if err < -d / 2.0 {
        err += d;
        k -= 1.0;
    }
    let code = (k as u64 % (1u64 << bits)) as u32;
    Ok((code, err))
}

pub fn nonlinear_map_phase(code: u32, channel: usize, model: &ImpairmentModel) -> Result<f64> {
    let map = model
        .phase_map
        .as_ref()
        .ok_or_else(|| Error::Config("impairment model has no phase map".into()))?;
    let table = map
        .tables
        .get(channel)
        .ok_or_else(|| Error::Domain(format!("channel {channel} out of range")))?;
    table
        .get(code as usize)
        .copied()
        .ok_or_else(|| Error::Domain(format!("code {code} out of range")))
}

/// Which cosine similarity code selection maximizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// `Re(w_ideal^H w_quant)`, separable across channels.
    #[default]
    RealPart,
    /// `|w_ideal^H w_quant|`, invariant to a common phase rotation.
    Magnitude,
}

fn realized_phases(model: &ImpairmentModel, bits: u32) -> Result<Vec<Vec<f64>>> {
    match &model.phase_map {
        Some(m) => Ok(m.tables.clone()),
        None => Ok(PhaseMap::linear(model.errors.channels(), bits)?.tables),
    }
}

fn best_code(table: &[f64], target: f64) -> u32 {
    let mut best = 0usize;
    let mut score = f64::NEG_INFINITY;
    for (k, p) in table.iter().enumerate() {
        let s = (p - target).cos();
        if s > score {
            score = s;
            best = k;
        }
    }
    best as u32
}

/// Code per channel maximizing `Re(conj(w_mn) exp(j map(code)))`; ties go to the
/// lowest code. Uses the model's phase map, or the linear map when none is present.
pub fn select_codes_cosine(ideal: &DMatrix<Complex64>, model: &ImpairmentModel) -> Result<DMatrix<u32>> {
    select_codes(ideal, model, Similarity::RealPart)
}

pub fn select_codes(ideal: &DMatrix<Complex64>, model: &ImpairmentModel, mode: Similarity) -> Result<DMatrix<u32>> {
    model.validate()?;
    let bits = model
        .bits
        .ok_or_else(|| Error::Config("code selection needs a quantizer bit count".into()))?;
    let (rows, cols) = (model.errors.rows, model.errors.cols);
    check_shape(ideal, rows, cols)?;
    let tables = realized_phases(model, bits)?;
    let targets: Vec<f64> = (0..rows * cols).map(|c| ideal[(c / cols, c % cols)].arg()).collect();
    let pick = |rot: f64| -> Vec<u32> {
        targets
            .iter()
            .zip(&tables)
            .map(|(t, table)| best_code(table, t + rot))
            .collect()
    };
    let codes = match mode {
        Similarity::RealPart => pick(0.0),
        Similarity::Magnitude => {
            // The selection for a common rotation c changes only where c crosses a
            // midpoint between adjacent mapped phases of some channel.
            let mut cuts = Vec::new();
            for (t, table) in targets.iter().zip(&tables) {
                let mut s = table.clone();
                s.sort_by(f64::total_cmp);
                for (i, a) in s.iter().enumerate() {
                    let b = if i + 1 < s.len() { s[i + 1] } else { s[0] + TAU };
                    cuts.push(wrap_2pi((a + b) / 2.0 - t));
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut best = (f64::NEG_INFINITY, pick(0.0));
            for (i, a) in cuts.iter().enumerate() {
                let b = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + TAU };
                let codes = pick((a + b) / 2.0);
                let sum: Complex64 = codes
                    .iter()
                    .zip(&tables)
                    .zip(&targets)
                    .map(|((k, table), t)| Complex64::cis(table[*k as usize] - t))
                    .sum();
                if sum.norm() > best.0 {
                    best = (sum.norm(), codes);
                }
            }
            best.1
        }
    };
    Ok(DMatrix::from_fn(rows, cols, |m, n| codes[m * cols + n]))
}

/// Code per channel from plain rounding of the ideal phase, as if the map were linear.
pub fn select_codes_naive(ideal: &DMatrix<Complex64>, bits: u32) -> Result<DMatrix<u32>> {
    let mut out = DMatrix::zeros(ideal.nrows(), ideal.ncols());
    for m in 0..ideal.nrows() {
        for n in 0..ideal.ncols() {
            out[(m, n)] = quantize_phase(ideal[(m, n)].arg(), bits)?.0;
        }
    }
    Ok(out)
}

/// `Re(a^H b) / (||a|| ||b||)`.
pub fn cosine_similarity(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    crate::error::check_len("similarity operands", a.len(), b.len())?;
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = crate::linalg::norm(a);
    let nb = crate::linalg::norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero vector".into()));
    }
    Ok(inner.re / (na * nb))
}

/// Unit-modulus weights realized by the hardware for the given codes, before channel errors.
pub fn realized_weights(codes: &DMatrix<u32>, model: &ImpairmentModel) -> Result<DMatrix<Complex64>> {
    let bits = model
        .bits
        .ok_or_else(|| Error::Config("code realization needs a quantizer bit count".into()))?;
    let tables = realized_phases(model, bits)?;
    let cols = codes.ncols();
    let mut out = DMatrix::from_element(codes.nrows(), cols, Complex64::new(0.0, 0.0));
    for m in 0..codes.nrows() {
        for n in 0..cols {
            let k = codes[(m, n)] as usize;
            let p = tables[m * cols + n]
                .get(k)
                .ok_or_else(|| Error::Domain(format!("code {k} out of range")))?;
            out[(m, n)] = Complex64::cis(*p);
        }
    }
    Ok(out)
}

/// Weights on the array under three treatments of the same ideal design.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpairedWeights {
    pub ideal: DMatrix<Complex64>,
    /// Plain rounding under an assumed linear map, no error knowledge.
    pub uncorrected: DMatrix<Complex64>,
    /// Measured phase errors removed, then cosine selection under the true map.
    pub compensated: DMatrix<Complex64>,
}

pub fn impaired_weights(ideal: &DMatrix<Complex64>, model: &ImpairmentModel, mode: Similarity) -> Result<ImpairedWeights> {
    model.validate()?;
    let e = &model.errors;
    check_shape(ideal, e.rows, e.cols)?;
    let (uncorrected, compensated) = match model.bits {
        None => {
            let pre = DMatrix::from_fn(e.rows, e.cols, |m, n| {
                let c = m * e.cols + n;
                ideal[(m, n)] * Complex64::cis(-e.phase_err[c])
            });
            (apply_channel_errors(ideal, e)?, apply_channel_errors(&pre, e)?)
        }
        Some(bits) => {
            let naive = select_codes_naive(ideal, bits)?;
            let pre = DMatrix::from_fn(e.rows, e.cols, |m, n| {
                let c = m * e.cols + n;
                Complex64::cis(ideal[(m, n)].arg() - e.phase_err[c])
            });
            let chosen = select_codes(&pre, model, mode)?;
            (
                apply_channel_errors(&realized_weights(&naive, model)?, e)?,
                apply_channel_errors(&realized_weights(&chosen, model)?, e)?,
            )
        }
    };
    Ok(ImpairedWeights {
        ideal: ideal.clone(),
        uncorrected,
        compensated,
    })
}

/// Pattern traces over `(az_deg, el_deg)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpairedPattern {
    pub points: Vec<(f64, f64)>,
    pub ideal: Vec<Complex64>,
    pub uncorrected: Vec<Complex64>,
    pub compensated: Vec<Complex64>,
}

/// `upa_pattern` at azimuth/elevation `(az, el)`.
pub fn upa_response(geom: &UpaGeometry, w: &DMatrix<Complex64>, az_deg: f64, el_deg: f64) -> Result<Complex64> {
    upa_pattern(geom, w, 90.0 - az_deg, el_deg)
}

pub fn impaired_pattern(
    ideal: &DMatrix<Complex64>,
    model: &ImpairmentModel,
    geom: &UpaGeometry,
    points: &[(f64, f64)],
    mode: Similarity,
) -> Result<ImpairedPattern> {
    let w = impaired_weights(ideal, model, mode)?;
    let eval = |m: &DMatrix<Complex64>| -> Result<Vec<Complex64>> {
        points.iter().map(|&(az, el)| upa_response(geom, m, az, el)).collect()
    };
    Ok(ImpairedPattern {
        points: points.to_vec(),
        ideal: eval(&w.ideal)?,
        uncorrected: eval(&w.uncorrected)?,
        compensated: eval(&w.compensated)?,
    })
}
