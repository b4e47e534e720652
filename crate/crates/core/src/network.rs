//! Shallow network `f(x) = N^{-beta} sum_i c_i sigma(w_i . x + eta_i)`, its
//! random initialization, evaluation on grids and parameter gradients.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::par;

/// Hidden-unit activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

/// `tanh` through a single `exp`; absolute error below 1e-15 and several times
/// faster than the libm routine.
#[inline]
pub fn fast_tanh(z: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * z).exp() + 1.0)
}

impl Activation {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => fast_tanh(z),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = fast_tanh(z);
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
        }
    }

    /// `(sigma(z), sigma'(z))` sharing the transcendental evaluation.
    #[inline]
    pub fn eval_both(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let t = fast_tanh(z);
                (t, 1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                (s, s * (1.0 - s))
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Law of a single hidden unit `(c, w, eta)` at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    /// `c ~ U[-c_max, c_max]`, `w_j ~ N(0, w_std^2)`, `eta ~ N(0, eta_std^2)`, independent.
    Standard { c_max: f64, w_std: f64, eta_std: f64 },
    /// Every unit equal to `(c, w, ..., w, eta)`.
    PointMass { c: f64, w: f64, eta: f64 },
}

impl Default for Law {
    fn default() -> Self {
        Law::Standard {
            c_max: 1.0,
            w_std: 1.0,
            eta_std: 1.0,
        }
    }
}

/// Initialization distribution `mu_0` together with the seed used to draw from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InitDistribution {
    pub law: Law,
    pub seed: u64,
}

impl InitDistribution {
    pub fn standard(seed: u64) -> Self {
        InitDistribution {
            law: Law::default(),
            seed,
        }
    }

    pub fn point_mass(c: f64, w: f64, eta: f64) -> Self {
        InitDistribution {
            law: Law::PointMass { c, w, eta },
            seed: 0,
        }
    }

    /// Draw one unit; `w` receives the input weights.
    pub fn sample_unit<R: Rng>(&self, rng: &mut R, w: &mut [f64]) -> (f64, f64) {
        match self.law {
            Law::Standard {
                c_max,
                w_std,
                eta_std,
            } => {
                let c = if c_max > 0.0 {
                    rng.random_range(-c_max..=c_max)
                } else {
                    0.0
                };
                for wj in w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *wj = w_std * z;
                }
                let z: f64 = rng.sample(StandardNormal);
                (c, eta_std * z)
            }
            Law::PointMass { c, w: w0, eta } => {
                w.fill(w0);
                (c, eta)
            }
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Network parameters `theta = {(c_i, w_i, eta_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub n_hidden: usize,
    pub dim: usize,
    pub beta: f64,
    pub c: Vec<f64>,
    /// `n_hidden x dim`, row-major
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    pub activation: Activation,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.5 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "scaling exponent beta must lie in the open interval (1/2, 1), got {beta}"
        )))
    }
}

/// Draw `n_hidden` independent units from `dist`.
pub fn init(
    n_hidden: usize,
    dim: usize,
    beta: f64,
    activation: Activation,
    dist: &InitDistribution,
) -> Result<ParamSet> {
    check_beta(beta)?;
    if n_hidden == 0 {
        return Err(Error::InvalidParameter("need at least one hidden unit".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("input dimension must be positive".into()));
    }
    let mut rng = dist.rng();
    let mut c = Vec::with_capacity(n_hidden);
    let mut w = vec![0.0; n_hidden * dim];
    let mut eta = Vec::with_capacity(n_hidden);
    for i in 0..n_hidden {
        let (ci, ei) = dist.sample_unit(&mut rng, &mut w[i * dim..(i + 1) * dim]);
        c.push(ci);
        eta.push(ei);
    }
    Ok(ParamSet {
        n_hidden,
        dim,
        beta,
        c,
        w,
        eta,
        activation,
    })
}

/// Gradient of an objective with respect to every parameter class.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub c: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ParamGrad {
    pub fn norm_sq(&self) -> f64 {
        self.c.iter().chain(&self.w).chain(&self.eta).map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().chain(&self.w).chain(&self.eta).all(|v| v.is_finite())
    }

    /// Flattened as `c, w (row-major), eta`, the same order as [`ParamSet::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.c.clone();
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.eta);
        v
    }
}

/// Per-unit quadrature integrals against an adjoint field `u_hat`:
/// `∫ u_hat sigma`, `∫ u_hat sigma'` and `∫ u_hat sigma' x` (one per input dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitIntegrals {
    pub sig: Vec<f64>,
    pub dsig: Vec<f64>,
    pub dsig_x: Vec<f64>,
}

impl ParamSet {
    /// `N^{-beta}`
    pub fn scale(&self) -> f64 {
        (self.n_hidden as f64).powf(-self.beta)
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * (self.dim + 2)
    }

    #[inline]
    fn preact(&self, i: usize, x: &[f64]) -> f64 {
        let wi = &self.w[i * self.dim..(i + 1) * self.dim];
        wi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.eta[i]
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: grid.dim(),
            });
        }
        Ok(())
    }

    /// Evaluate at a single point.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.n_hidden)
            .map(|i| self.c[i] * self.activation.eval(self.preact(i, x)))
            .sum();
        self.scale() * s
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.c.clone();
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.eta);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        check_len(self.n_params(), v.len())?;
        let (n, d) = (self.n_hidden, self.dim);
        self.c.copy_from_slice(&v[..n]);
        self.w.copy_from_slice(&v[n..n + n * d]);
        self.eta.copy_from_slice(&v[n + n * d..]);
        Ok(())
    }

    /// `theta -= step * grad`
    pub fn descend(&mut self, grad: &ParamGrad, step: f64) {
        for (p, g) in self.c.iter_mut().zip(&grad.c) {
            *p -= step * g;
        }
        for (p, g) in self.w.iter_mut().zip(&grad.w) {
            *p -= step * g;
        }
        for (p, g) in self.eta.iter_mut().zip(&grad.eta) {
            *p -= step * g;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Write the flat binary checkpoint: magic, `N`, `d`, `beta`, activation tag, then
    /// `c`, `w` row-major and `eta` as little-endian `f64`.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(self.n_hidden as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        out.write_all(&self.beta.to_le_bytes())?;
        let tag: u8 = match self.activation {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
        };
        out.write_all(&[tag])?;
        for v in self.to_flat() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Parse("not a parameter checkpoint".into()));
        }
        let n_hidden = read_u64(&mut input)? as usize;
        let dim = read_u64(&mut input)? as usize;
        let beta = read_f64(&mut input)?;
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        let activation = match tag[0] {
            0 => Activation::Tanh,
            1 => Activation::Sigmoid,
            t => return Err(Error::Parse(format!("bad activation tag {t}"))),
        };
        let mut p = ParamSet {
            n_hidden,
            dim,
            beta,
            c: vec![0.0; n_hidden],
            w: vec![0.0; n_hidden * dim],
            eta: vec![0.0; n_hidden],
            activation,
        };
        let flat = (0..p.n_params())
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        p.set_flat(&flat)?;
        Ok(p)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"NNPDEPS1";

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Network output `g(x)` at every node of `grid`.
pub fn forward(params: &ParamSet, grid: &Grid) -> Result<Field> {
    params.check_grid(grid)?;
    let pts = grid.points();
    let d = params.dim;
    let mut out = Field::zeros(grid.len());
    par::fill_indexed(&mut out, |k| params.eval_at(&pts[k * d..(k + 1) * d]));
    Ok(out)
}

/// Per-unit integrals against `u_hat` with quadrature weights of `grid`.
pub fn unit_integrals(params: &ParamSet, grid: &Grid, u_hat: &[f64]) -> Result<UnitIntegrals> {
    params.check_grid(grid)?;
    check_len(grid.len(), u_hat.len())?;
    let d = params.dim;
    let pts = grid.points();
    let wq = grid.weights();
    // only nodes where the weighted adjoint is non-zero contribute
    let active: Vec<(usize, f64)> = wq
        .iter()
        .zip(u_hat)
        .enumerate()
        .filter_map(|(k, (w, u))| {
            let v = w * u;
            (v != 0.0).then_some((k, v))
        })
        .collect();
    let per_unit = par::map_indexed(params.n_hidden, |i| {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut sx = vec![0.0; d];
        for &(k, qu) in &active {
            let x = &pts[k * d..(k + 1) * d];
            let (s, ds) = params.activation.eval_both(params.preact(i, x));
            s0 += qu * s;
            s1 += qu * ds;
            for (a, xj) in sx.iter_mut().zip(x) {
                *a += qu * ds * xj;
            }
        }
        (s0, s1, sx)
    });
    let mut out = UnitIntegrals {
        sig: Vec::with_capacity(params.n_hidden),
        dsig: Vec::with_capacity(params.n_hidden),
        dsig_x: Vec::with_capacity(params.n_hidden * d),
    };
    for (s0, s1, sx) in per_unit {
        out.sig.push(s0);
        out.dsig.push(s1);
        out.dsig_x.extend(sx);
    }
    Ok(out)
}

/// `grad_theta J = ∫ u_hat grad_theta f dx`, componentwise per unit.
pub fn param_grads(params: &ParamSet, grid: &Grid, u_hat: &[f64]) -> Result<ParamGrad> {
    let ints = unit_integrals(params, grid, u_hat)?;
    Ok(grads_from_integrals(params, &ints))
}

pub fn grads_from_integrals(params: &ParamSet, ints: &UnitIntegrals) -> ParamGrad {
    let s = params.scale();
    let d = params.dim;
    let c: Vec<f64> = ints.sig.iter().map(|v| s * v).collect();
    let eta: Vec<f64> = ints
        .dsig
        .iter()
        .zip(&params.c)
        .map(|(v, ci)| s * ci * v)
        .collect();
    let w: Vec<f64> = ints
        .dsig_x
        .iter()
        .enumerate()
        .map(|(k, v)| s * params.c[k / d] * v)
        .collect();
    ParamGrad { c, w, eta }
}

/// Activation values `sigma(w_i . x_k + eta_i)` and derivatives for every unit and
/// node, stored unit-major. Lets one evaluation feed both the network output and
/// the gradient integrals.
#[derive(Debug, Clone)]
pub struct ActivationTable {
    n_nodes: usize,
    s: Vec<f64>,
    ds: Vec<f64>,
}

impl ActivationTable {
    pub fn new(params: &ParamSet, grid: &Grid) -> Result<Self> {
        params.check_grid(grid)?;
        let d = params.dim;
        let pts = grid.points();
        let n_nodes = grid.len();
        let mut s = vec![0.0; params.n_hidden * n_nodes];
        let mut ds = vec![0.0; params.n_hidden * n_nodes];
        let act = params.activation;
        par::zip_rows(&mut s, &mut ds, n_nodes, |i, s, ds| {
            let wi = &params.w[i * d..(i + 1) * d];
            let eta = params.eta[i];
            for ((x, a), b) in pts.chunks_exact(d).zip(s).zip(ds) {
                let z = wi.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + eta;
                (*a, *b) = act.eval_both(z);
            }
        });
        Ok(ActivationTable { n_nodes, s, ds })
    }

    /// Network output at every node.
    pub fn output(&self, params: &ParamSet) -> Field {
        let n = self.n_nodes;
        let scale = params.scale();
        let mut out = Field::zeros(n);
        par::fill_indexed(&mut out, |k| {
            let mut acc = 0.0;
            for (i, ci) in params.c.iter().enumerate() {
                acc += ci * self.s[i * n + k];
            }
            scale * acc
        });
        out
    }

    /// Same integrals as [`unit_integrals`], reusing the stored activations.
    pub fn integrals(&self, params: &ParamSet, grid: &Grid, u_hat: &[f64]) -> Result<UnitIntegrals> {
        check_len(self.n_nodes, u_hat.len())?;
        let d = params.dim;
        let n = self.n_nodes;
        let pts = grid.points();
        let qu: Vec<f64> = grid.weights().iter().zip(u_hat).map(|(w, u)| w * u).collect();
        let per_unit = par::map_indexed(params.n_hidden, |i| {
            let s = &self.s[i * n..(i + 1) * n];
            let ds = &self.ds[i * n..(i + 1) * n];
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            let mut sx = vec![0.0; d];
            for k in 0..n {
                let q = qu[k];
                s0 += q * s[k];
                let t = q * ds[k];
                s1 += t;
                for (a, xj) in sx.iter_mut().zip(&pts[k * d..(k + 1) * d]) {
                    *a += t * xj;
                }
            }
            (s0, s1, sx)
        });
        let mut out = UnitIntegrals {
            sig: Vec::with_capacity(params.n_hidden),
            dsig: Vec::with_capacity(params.n_hidden),
            dsig_x: Vec::with_capacity(params.n_hidden * d),
        };
        for (s0, s1, sx) in per_unit {
            out.sig.push(s0);
            out.dsig.push(s1);
            out.dsig_x.extend(sx);
        }
        Ok(out)
    }
}

/// `<f, mu^N> = (1/N) sum_i f(c_i, w_i, eta_i)`.
pub fn measure_pair(params: &ParamSet, f: impl Fn(f64, &[f64], f64) -> f64) -> f64 {
    let d = params.dim;
    let s: f64 = (0..params.n_hidden)
        .map(|i| f(params.c[i], &params.w[i * d..(i + 1) * d], params.eta[i]))
        .sum();
    s / params.n_hidden as f64
}
