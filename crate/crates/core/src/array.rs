//! Array geometries, steering vectors, angle grids and beam specifications.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlaGeometry {
    pub num_antennas: usize,
    pub spacing_over_wavelength: f64,
}

impl UlaGeometry {
    pub fn new(num_antennas: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(Self {
            num_antennas,
            spacing_over_wavelength,
        })
    }

    pub fn half_wavelength(num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub rows: usize,
    pub cols: usize,
}

impl UpaGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("UPA must be at least 1x1, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols })
    }

    pub fn channels(&self) -> usize {
        self.rows * self.cols
    }
}

/// Strictly increasing set of angles in degrees, all within [-90, 90].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AngleGrid {
    angles: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        for (i, &a) in angles.iter().enumerate() {
            if !(-90.0..=90.0).contains(&a) {
                return Err(Error::Domain(format!("angle {a} outside [-90, 90]")));
            }
            if i > 0 && angles[i - 1] >= a {
                return Err(Error::Domain("angle grid must be strictly increasing".into()));
            }
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Uniform grid over [-90, 90] with both endpoints included.
    pub fn uniform(step_deg: f64) -> Result<Self> {
        Self::new(sample_interval(Interval::new(-90.0, 90.0)?, step_deg)?)
    }
}

/// Closed angular interval `[lo, hi]` in degrees. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Config(format!("invalid interval [{lo}, {hi}]")));
        }
        if lo < -90.0 || hi > 90.0 {
            return Err(Error::Config(format!("interval [{lo}, {hi}] leaves [-90, 90]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo - ANGLE_TOL && theta <= self.hi + ANGLE_TOL
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub mainlobe: Vec<Interval>,
    /// `None` means the complement of mainlobe and null regions, minus a guard band.
    #[serde(default)]
    pub sidelobe: Option<Vec<Interval>>,
    #[serde(default)]
    pub null: Vec<Interval>,
    pub eta_sl_db: f64,
    pub eta_z_db: f64,
    pub alpha: f64,
    pub grid_step_deg: f64,
}

impl BeamSpec {
    /// Single mainlobe and a list of nulls with the default thresholds
    /// (-15 dB sidelobes, -30 dB nulls, alpha 1.05, 1 degree grid).
    pub fn with_regions(mainlobe: Vec<Interval>, null: Vec<Interval>) -> Self {
        Self {
            mainlobe,
            sidelobe: None,
            null,
            eta_sl_db: -15.0,
            eta_z_db: -30.0,
            alpha: 1.05,
            grid_step_deg: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step_deg > 0.0 && self.grid_step_deg.is_finite()) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {}",
                self.grid_step_deg
            )));
        }
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.eta_sl_db.is_finite() && self.eta_z_db.is_finite()) {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        if self.eta_z_db > self.eta_sl_db {
            return Err(Error::Config(format!(
                "null threshold {} dB is above sidelobe threshold {} dB",
                self.eta_z_db, self.eta_sl_db
            )));
        }
        let all = self
            .mainlobe
            .iter()
            .chain(self.null.iter())
            .chain(self.sidelobe.iter().flatten());
        for iv in all {
            Interval::new(iv.lo, iv.hi)?;
        }
        Ok(())
    }

    pub fn eta_sl_lin(&self) -> f64 {
        db_to_lin(self.eta_sl_db)
    }

    pub fn eta_z_lin(&self) -> f64 {
        db_to_lin(self.eta_z_db)
    }

    /// Shift every region by `-offset_deg`, the view of an array rotated by `offset_deg`.
    /// Regions are clipped to [-90, 90]; a region pushed entirely outside is dropped.
    pub fn rotated(&self, offset_deg: f64) -> Result<Self> {
        let shift = |v: &[Interval]| -> Vec<Interval> {
            v.iter()
                .filter_map(|iv| {
                    let lo = (iv.lo - offset_deg).max(-90.0);
                    let hi = (iv.hi - offset_deg).min(90.0);
                    Interval::new(lo, hi).ok()
                })
                .collect()
        };
        let out = Self {
            mainlobe: shift(&self.mainlobe),
            sidelobe: self.sidelobe.as_ref().map(|s| shift(s)),
            null: shift(&self.null),
            ..self.clone()
        };
        if out.mainlobe.is_empty() {
            return Err(Error::Config(format!(
                "rotation by {offset_deg} deg moves the mainlobe out of view"
            )));
        }
        Ok(out)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Sampled constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpec {
    pub mainlobe: AngleGrid,
    pub sidelobe: AngleGrid,
    pub null: AngleGrid,
}

impl DiscreteSpec {
    pub fn total(&self) -> usize {
        self.mainlobe.len() + self.sidelobe.len() + self.null.len()
    }

    /// All samples in mainlobe, sidelobe, null order (the column order of the steering matrix).
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.total());
        v.extend_from_slice(self.mainlobe.angles());
        v.extend_from_slice(self.sidelobe.angles());
        v.extend_from_slice(self.null.angles());
        v
    }
}

fn sample_interval(iv: Interval, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    let count = ((iv.hi - iv.lo) / step + ANGLE_TOL).floor() as usize;
    let mut out: Vec<f64> = (0..=count).map(|k| iv.lo + k as f64 * step).collect();
    if iv.hi - out[out.len() - 1] > ANGLE_TOL {
        out.push(iv.hi);
    } else {
        let last = out.len() - 1;
        out[last] = iv.hi;
    }
    Ok(out)
}

fn sample_regions(regions: &[Interval], step: f64) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for iv in regions {
        v.extend(sample_interval(*iv, step)?);
    }
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= ANGLE_TOL);
    Ok(v)
}

fn overlaps(a: &[f64], b: &[f64]) -> bool {
    a.iter().any(|x| b.iter().any(|y| (x - y).abs() <= ANGLE_TOL))
}

pub fn discretize_spec(spec: &BeamSpec) -> Result<DiscreteSpec> {
    spec.validate()?;
    let step = spec.grid_step_deg;
    let main = sample_regions(&spec.mainlobe, step)?;
    if main.is_empty() {
        return Err(Error::Config("mainlobe set is empty".into()));
    }
    let null = sample_regions(&spec.null, step)?;
    let side = match &spec.sidelobe {
        Some(regions) => sample_regions(regions, step)?,
        None => {
            let guard: Vec<Interval> = spec
                .mainlobe
                .iter()
                .map(|iv| Interval {
                    lo: iv.lo - step,
                    hi: iv.hi + step,
                })
                .collect();
            sample_interval(Interval::new(-90.0, 90.0)?, step)?
                .into_iter()
                .filter(|&t| {
                    !guard.iter().any(|iv| iv.contains(t))
                        && !spec.null.iter().any(|iv| iv.contains(t))
                })
                .collect()
        }
    };
    if overlaps(&main, &null) || overlaps(&main, &side) || overlaps(&side, &null) {
        return Err(Error::Config("mainlobe, sidelobe and null samples overlap".into()));
    }
    Ok(DiscreteSpec {
        mainlobe: AngleGrid::new(main)?,
        sidelobe: AngleGrid::new(side)?,
        null: AngleGrid::new(null)?,
    })
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if (-90.0..=90.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {theta_deg} outside [-90, 90]")))
    }
}

pub fn steering_vector(geom: &UlaGeometry, theta_deg: f64) -> Result<Vec<Complex64>> {
    check_angle(theta_deg)?;
    let k = 2.0 * PI * geom.spacing_over_wavelength * theta_deg.to_radians().sin();
    Ok((0..geom.num_antennas)
        .map(|i| Complex64::cis(k * i as f64))
        .collect())
}

/// Steering vectors stacked as columns, `N_r x angles.len()`.
pub fn steering_matrix(geom: &UlaGeometry, angles: &[f64]) -> Result<DMatrix<Complex64>> {
    let mut a = DMatrix::zeros(geom.num_antennas, angles.len());
    for (j, &t) in angles.iter().enumerate() {
        let col = steering_vector(geom, t)?;
        for (i, v) in col.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    Ok(a)
}

/// Angle seen by an array rotated by `orientation_deg`, folded back into [-90, 90]
/// so that the steering vector is unchanged.
pub fn local_angle(theta_deg: f64, orientation_deg: f64) -> f64 {
    let s = (theta_deg - orientation_deg).to_radians().sin().clamp(-1.0, 1.0);
    s.asin().to_degrees().clamp(-90.0, 90.0)
}

/// `sum_{m,n} W_mn exp(j(m u + n v))` with 1-based indices, `u = sin(theta) sin(phi)`, `v = cos(theta)`.
pub fn upa_pattern(
    geom: &UpaGeometry,
    weights: &DMatrix<Complex64>,
    theta_deg: f64,
    phi_deg: f64,
) -> Result<Complex64> {
    if weights.nrows() != geom.rows || weights.ncols() != geom.cols {
        return Err(Error::Domain(format!(
            "weights are {}x{}, geometry is {}x{}",
            weights.nrows(),
            weights.ncols(),
            geom.rows,
            geom.cols
        )));
    }
    let (th, ph) = (theta_deg.to_radians(), phi_deg.to_radians());
    let u = th.sin() * ph.sin();
    let v = th.cos();
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..geom.rows {
        for n in 0..geom.cols {
            let phase = (m + 1) as f64 * u + (n + 1) as f64 * v;
            acc += weights[(m, n)] * Complex64::cis(phase);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let g = UlaGeometry::half_wavelength(4).unwrap();
        for v in steering_vector(&g, 0.0).unwrap() {
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn steering_endfire_two_elements() {
        let g = UlaGeometry::half_wavelength(2).unwrap();
        let a = steering_vector(&g, 90.0).unwrap();
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_thirty_degrees_quarter_turns() {
        let g = UlaGeometry::half_wavelength(4).unwrap();
        let a = steering_vector(&g, 30.0).unwrap();
        let expect = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        for (v, p) in a.iter().zip(expect) {
            assert!((v - Complex64::cis(p)).norm() < 1e-12);
        }
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let g = UlaGeometry::half_wavelength(4).unwrap();
        assert!(matches!(steering_vector(&g, 90.5), Err(Error::Domain(_))));
        assert!(matches!(steering_vector(&g, -91.0), Err(Error::Domain(_))));
    }

    #[test]
    fn discretize_counts() {
        let spec = BeamSpec::with_regions(vec![iv(-4.0, 4.0)], vec![iv(56.0, 64.0)]);
        let d = discretize_spec(&spec).unwrap();
        assert_eq!(d.mainlobe.len(), 9);
        assert_eq!(d.null.len(), 9);
        // 181 grid points minus 9 mainlobe, 2 guard and 9 null samples
        assert_eq!(d.sidelobe.len(), 181 - 9 - 2 - 9);
        assert!(!d.sidelobe.angles().iter().any(|&t| (t - 5.0).abs() < 1e-9));
        assert!(d.sidelobe.angles().iter().any(|&t| (t - 6.0).abs() < 1e-9));
    }

    #[test]
    fn coarse_step_keeps_endpoints() {
        let mut spec = BeamSpec::with_regions(vec![iv(-4.0, 4.0)], vec![iv(56.0, 64.0)]);
        spec.grid_step_deg = 8.0;
        let d = discretize_spec(&spec).unwrap();
        assert_eq!(d.null.angles(), &[56.0, 64.0]);
    }

    #[test]
    fn empty_mainlobe_is_config_error() {
        let spec = BeamSpec::with_regions(vec![], vec![iv(56.0, 64.0)]);
        assert!(matches!(discretize_spec(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn overlapping_regions_rejected() {
        let spec = BeamSpec::with_regions(vec![iv(-4.0, 4.0)], vec![iv(3.0, 10.0)]);
        assert!(matches!(discretize_spec(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn upa_single_element() {
        let g = UpaGeometry::new(1, 1).unwrap();
        let w = Complex64::new(0.3, -0.7);
        let wm = DMatrix::from_element(1, 1, w);
        let (th, ph) = (40.0f64, 25.0f64);
        let u = th.to_radians().sin() * ph.to_radians().sin();
        let v = th.to_radians().cos();
        let got = upa_pattern(&g, &wm, th, ph).unwrap();
        assert!((got - w * Complex64::cis(u + v)).norm() < 1e-14);
    }

    #[test]
    fn upa_uniform_two_by_two_at_endfire() {
        let g = UpaGeometry::new(2, 2).unwrap();
        let wm = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let got = upa_pattern(&g, &wm, 90.0, 0.0).unwrap();
        // u = 0 and v = cos(90) which is zero up to rounding
        let v = 90f64.to_radians().cos();
        let mut expect = Complex64::new(0.0, 0.0);
        for m in 1..=2 {
            for n in 1..=2 {
                expect += Complex64::cis(n as f64 * v + m as f64 * 0.0);
            }
        }
        assert!((got - expect).norm() < 1e-14);
        assert!((got - Complex64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn upa_zero_weights_and_mismatch() {
        let g = UpaGeometry::new(3, 2).unwrap();
        let wm = DMatrix::zeros(3, 2);
        assert_eq!(upa_pattern(&g, &wm, 10.0, 20.0).unwrap(), Complex64::new(0.0, 0.0));
        let bad = DMatrix::zeros(2, 3);
        assert!(upa_pattern(&g, &bad, 10.0, 20.0).is_err());
    }

    #[test]
    fn local_angle_round_trip() {
        assert!((local_angle(10.0, 4.0) - 6.0).abs() < 1e-12);
        assert!((local_angle(88.0, -5.0) - 87.0).abs() < 1e-9);
    }

    #[test]
    fn interval_serde_as_pair() {
        let i: Interval = serde_json::from_str("[-4, 4]").unwrap();
        assert_eq!(i, iv(-4.0, 4.0));
        assert!(serde_json::from_str::<Interval>("[5, 4]").is_err());
    }
}
