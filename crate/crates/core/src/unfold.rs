//! Deep-unfolded RGD: a complex-valued network predicts `T` step sizes from the
//! least-squares start point and its gradients, then `T` plain RGD iterations run
//! with those steps.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{unit_modulus, CMat, CVec, HermitianFactor};
use crate::manifold::{fixed_step_rgd, project_unchecked, LsSystem};

pub const FORMAT_VERSION: &str = "1";

/// Relative deviation from the recorded reference output tolerated on load.
pub const REFERENCE_TOL: f64 = 1e-5;

const BUNDLED_WEIGHTS: &str = include_str!("../assets/step_net_n64_t15.json");

pub fn crelu(z: &[Complex64]) -> CVec {
    z.iter()
        .map(|v| Complex64::new(v.re.max(0.0), v.im.max(0.0)))
        .collect()
}

pub fn abs_combine(z: &[Complex64]) -> Vec<f64> {
    z.iter().map(|v| (v.re + v.im).abs()).collect()
}

/// One complex affine layer `y = W x + b`, `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLayer {
    pub weight: CMat,
    pub bias: CVec,
}

impl ComplexLayer {
    pub fn forward(&self, x: &[Complex64]) -> CVec {
        let mut y = self.bias.clone();
        for (j, xj) in x.iter().enumerate() {
            for (yi, wij) in y.iter_mut().zip(self.weight.column(j).iter()) {
                *yi += wij * xj;
            }
        }
        y
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvnnWeights {
    layers: Vec<ComplexLayer>,
    num_antennas: usize,
    reference: Option<(CVec, Vec<f64>)>,
}

impl CvnnWeights {
    pub fn new(layers: Vec<ComplexLayer>, num_antennas: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        if num_antennas.checked_mul(3) != Some(layers[0].inputs()) {
            return Err(Error::Config(format!(
                "first layer takes {} inputs, expected 3 x {num_antennas}",
                layers[0].inputs()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Config(format!("layer {i} bias length mismatch")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::Config(format!(
                    "layer {i} takes {} inputs but layer {} emits {}",
                    l.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
        }
        Ok(Self {
            layers,
            num_antennas,
            reference: None,
        })
    }

    /// Network with every parameter zero; predicts all-zero steps.
    pub fn zeros(layer_dims: &[usize], num_antennas: usize) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config("layer_dims needs at least two entries".into()));
        }
        let layers = layer_dims
            .windows(2)
            .map(|d| ComplexLayer {
                weight: DMatrix::zeros(d[1], d[0]),
                bias: vec![Complex64::new(0.0, 0.0); d[1]],
            })
            .collect();
        Self::new(layers, num_antennas)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ComplexLayer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs()];
        d.extend(self.layers.iter().map(|l| l.outputs()));
        d
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    /// Number of unfolded iterations `T`.
    pub fn horizon(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn reference(&self) -> Option<(&[Complex64], &[f64])> {
        self.reference
            .as_ref()
            .map(|(i, o)| (i.as_slice(), o.as_slice()))
    }

    pub fn set_reference(&mut self, input: CVec, output: Vec<f64>) -> Result<()> {
        check_len("reference input", 3 * self.num_antennas, input.len())?;
        check_len("reference output", self.horizon(), output.len())?;
        self.reference = Some((input, output));
        Ok(())
    }

    /// Forward pass on a raw concatenated input.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<f64>> {
        check_len("network input", self.layers[0].inputs(), x.len())?;
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h = crelu(&h);
            }
        }
        Ok(abs_combine(&h))
    }

    /// Largest relative deviation between the recorded reference output and a fresh
    /// forward pass, `max |y - y_ref| / max(|y_ref|, 1e-12)`.
    pub fn reference_error(&self) -> Result<f64> {
        let (input, expected) = self
            .reference()
            .ok_or_else(|| Error::Config("weights carry no reference vectors".into()))?;
        let got = self.forward(input)?;
        Ok(got
            .iter()
            .zip(expected)
            .map(|(g, e)| (g - e).abs() / e.abs().max(1e-12))
            .fold(0.0, f64::max))
    }

    /// Network trained for 64-antenna arrays and 15 unfolded steps, shipped with the crate.
    pub fn bundled() -> Result<Self> {
        Self::from_json(BUNDLED_WEIGHTS)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightsFile = serde_json::from_str(text)?;
        file.into_weights()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&WeightsFile::from_weights(self))?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Matrix {
    Nested(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl Matrix {
    fn into_flat(self, rows: usize, cols: usize, what: &str) -> Result<Vec<f64>> {
        let flat = match self {
            Matrix::Flat(v) => v,
            Matrix::Nested(rs) => {
                if rs.len() != rows || rs.iter().any(|r| r.len() != cols) {
                    return Err(Error::Parse(format!("{what} is not {rows}x{cols}")));
                }
                rs.into_iter().flatten().collect()
            }
        };
        if rows.checked_mul(cols) != Some(flat.len()) {
            return Err(Error::Parse(format!(
                "{what} has {} entries, expected {rows}x{cols}",
                flat.len()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("{what} holds non-finite values")));
        }
        Ok(flat)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerFile {
    w_real: Matrix,
    w_imag: Matrix,
    b_real: Vec<f64>,
    b_imag: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComplexArray {
    real: Vec<f64>,
    imag: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    format_version: String,
    depth: usize,
    layer_dims: Vec<usize>,
    n_r: usize,
    #[serde(rename = "T")]
    t: usize,
    layers: Vec<LayerFile>,
    #[serde(default)]
    reference_input: Option<ComplexArray>,
    #[serde(default)]
    reference_output: Option<Vec<f64>>,
    #[serde(default)]
    meta: Option<serde_json::Value>,
}

impl WeightsFile {
    fn into_weights(self) -> Result<CvnnWeights> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported weights format_version {:?}",
                self.format_version
            )));
        }
        if self.layers.len() != self.depth || self.layer_dims.len() != self.depth + 1 {
            return Err(Error::Parse(format!(
                "depth {} disagrees with {} layers and {} layer_dims",
                self.depth,
                self.layers.len(),
                self.layer_dims.len()
            )));
        }
        if self.layer_dims.last() != Some(&self.t) {
            return Err(Error::Parse("last layer width must equal T".into()));
        }
        let mut layers = Vec::with_capacity(self.depth);
        for (i, lf) in self.layers.into_iter().enumerate() {
            let (cols, rows) = (self.layer_dims[i], self.layer_dims[i + 1]);
            let wr = lf.w_real.into_flat(rows, cols, "w_real")?;
            let wi = lf.w_imag.into_flat(rows, cols, "w_imag")?;
            if lf.b_real.len() != rows || lf.b_imag.len() != rows {
                return Err(Error::Parse(format!("layer {i} bias length differs from {rows}")));
            }
            if lf.b_real.iter().chain(&lf.b_imag).any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("layer {i} bias holds non-finite values")));
            }
            let weight = DMatrix::from_fn(rows, cols, |r, c| {
                Complex64::new(wr[r * cols + c], wi[r * cols + c])
            });
            let bias = lf
                .b_real
                .iter()
                .zip(&lf.b_imag)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
            layers.push(ComplexLayer { weight, bias });
        }
        let mut w = CvnnWeights::new(layers, self.n_r).map_err(|e| Error::Parse(e.to_string()))?;
        match (self.reference_input, self.reference_output) {
            (Some(inp), Some(out)) => {
                if inp.real.len() != inp.imag.len() {
                    return Err(Error::Parse("reference_input parts differ in length".into()));
                }
                let input = inp
                    .real
                    .iter()
                    .zip(&inp.imag)
                    .map(|(&re, &im)| Complex64::new(re, im))
                    .collect();
                w.set_reference(input, out)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                let err = w.reference_error()?;
                if !(err <= REFERENCE_TOL) {
                    return Err(Error::Parse(format!(
                        "forward pass deviates from the recorded reference output by {err:e} (relative)"
                    )));
                }
            }
            (None, None) => {}
            _ => return Err(Error::Parse("reference_input and reference_output come together".into())),
        }
        Ok(w)
    }

    fn from_weights(w: &CvnnWeights) -> Self {
        let layers = w
            .layers
            .iter()
            .map(|l| {
                let rows = |f: fn(&Complex64) -> f64| -> Matrix {
                    Matrix::Nested(
                        (0..l.outputs())
                            .map(|r| (0..l.inputs()).map(|c| f(&l.weight[(r, c)])).collect())
                            .collect(),
                    )
                };
                LayerFile {
                    w_real: rows(|z| z.re),
                    w_imag: rows(|z| z.im),
                    b_real: l.bias.iter().map(|z| z.re).collect(),
                    b_imag: l.bias.iter().map(|z| z.im).collect(),
                }
            })
            .collect();
        let (reference_input, reference_output) = match &w.reference {
            Some((i, o)) => (
                Some(ComplexArray {
                    real: i.iter().map(|z| z.re).collect(),
                    imag: i.iter().map(|z| z.im).collect(),
                }),
                Some(o.clone()),
            ),
            None => (None, None),
        };
        WeightsFile {
            format_version: FORMAT_VERSION.into(),
            depth: w.depth(),
            layer_dims: w.layer_dims(),
            n_r: w.num_antennas,
            t: w.horizon(),
            layers,
            reference_input,
            reference_output,
            meta: None,
        }
    }
}

/// Network inputs: the raw least-squares solution and the Euclidean and Riemannian
/// gradients at its unit-modulus projection.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldInput {
    pub ls_solution: CVec,
    pub egrad0: CVec,
    pub rgrad0: CVec,
}

impl UnfoldInput {
    pub fn concat(&self) -> CVec {
        let mut v = Vec::with_capacity(3 * self.ls_solution.len());
        v.extend_from_slice(&self.ls_solution);
        v.extend_from_slice(&self.egrad0);
        v.extend_from_slice(&self.rgrad0);
        v
    }
}

/// `(A A^H)^{-1} A conj(u)` (not yet projected to the manifold).
pub fn init_w0(sys: &LsSystem) -> Result<CVec> {
    HermitianFactor::new(sys.gram())?.solve(sys.rhs())
}

/// Start point and network input for one subproblem; `factor` is the Gram factorization
/// of `sys` when the caller already holds it.
pub fn prepare(sys: &LsSystem, factor: Option<&HermitianFactor>) -> Result<(CVec, UnfoldInput)> {
    let ls = match factor {
        Some(f) => f.solve(sys.rhs())?,
        None => init_w0(sys)?,
    };
    let w0 = unit_modulus(&ls);
    let egrad0 = sys.gradient_unchecked(&w0);
    let rgrad0 = project_unchecked(&egrad0, &w0);
    Ok((
        w0,
        UnfoldInput {
            ls_solution: ls,
            egrad0,
            rgrad0,
        },
    ))
}

pub fn predict_step_sizes(input: &UnfoldInput, weights: &CvnnWeights) -> Result<Vec<f64>> {
    let n = weights.num_antennas();
    check_len("ls_solution", n, input.ls_solution.len())?;
    check_len("egrad0", n, input.egrad0.len())?;
    check_len("rgrad0", n, input.rgrad0.len())?;
    weights.forward(&input.concat())
}

/// Exactly `steps.len()` RGD iterations with the given step sizes.
pub fn unfolded_rgd(w0: &[Complex64], sys: &LsSystem, steps: &[f64]) -> Result<CVec> {
    fixed_step_rgd(w0, sys, steps)
}

/// Full inference path: least-squares start, network steps, unfolded iterations.
pub fn unfolded_solve(
    sys: &LsSystem,
    weights: &CvnnWeights,
    factor: Option<&HermitianFactor>,
) -> Result<(CVec, Vec<f64>)> {
    let (w0, input) = prepare(sys, factor)?;
    let steps = predict_step_sizes(&input, weights)?;
    Ok((unfolded_rgd(&w0, sys, &steps)?, steps))
}
