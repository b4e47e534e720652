use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::network::{read_f64, read_u64};

/// Hidden widths of the gated closure network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub h1: usize,
    pub h2: usize,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape { h1: 8, h2: 8 }
    }
}

const N_IN: usize = 4;
const N_OUT: usize = 2;

impl NetShape {
    pub fn n_params(&self) -> usize {
        let (a, b) = (self.h1, self.h2);
        a * N_IN + a + b * a + b + b * N_IN + b + N_OUT * b + N_OUT
    }

    // offsets of W1, b1, W2, b2, W3, b3, W4, b4 in the flat vector
    fn offsets(&self) -> [usize; 8] {
        let (a, b) = (self.h1, self.h2);
        let sizes = [a * N_IN, a, b * a, b, b * N_IN, b, N_OUT * b, N_OUT];
        let mut o = [0usize; 8];
        for i in 1..8 {
            o[i] = o[i - 1] + sizes[i - 1];
        }
        o
    }
}

/// Per-input affine map `z = (x - offset) / scale` for `(y, k, eps, du/dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub offset: [f64; N_IN],
    pub scale: [f64; N_IN],
}

impl Default for Standardizer {
    fn default() -> Self {
        Standardizer {
            offset: [0.0; N_IN],
            scale: [1.0; N_IN],
        }
    }
}

impl Standardizer {
    /// `y` and `du/dy` are scaled by their max magnitude only, so flipping their sign
    /// commutes with the map; `k` and `eps` are mapped from `[min, max]` onto `[-1, 1]`.
    pub fn from_samples(samples: &[[f64; N_IN]]) -> Self {
        let mut s = Standardizer::default();
        if samples.is_empty() {
            return s;
        }
        for i in [0, 3] {
            let m = samples.iter().fold(0.0f64, |m, x| m.max(x[i].abs()));
            s.scale[i] = if m > 0.0 { m } else { 1.0 };
        }
        for i in [1, 2] {
            let lo = samples.iter().fold(f64::INFINITY, |m, x| m.min(x[i]));
            let hi = samples.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x[i]));
            s.offset[i] = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            s.scale[i] = if half > 0.0 { half } else { 1.0 };
        }
        s
    }

    pub fn apply(&self, x: &[f64; N_IN]) -> [f64; N_IN] {
        let mut z = [0.0; N_IN];
        for i in 0..N_IN {
            z[i] = (x[i] - self.offset[i]) / self.scale[i];
        }
        z
    }
}

#[inline]
fn elu(x: f64) -> (f64, f64) {
    if x > 0.0 {
        (x, 1.0)
    } else {
        let e = x.exp();
        (e - 1.0, e)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated two-hidden-layer network `f = W4 (sigmoid(W3 z + b3) ⊙ H2) + b4` with
/// `H2 = ELU(W2 ELU(W1 z + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureNet {
    pub shape: NetShape,
    pub params: Vec<f64>,
    pub standardizer: Standardizer,
}

struct Trace {
    z: [f64; N_IN],
    h1: Vec<f64>,
    d1: Vec<f64>,
    h2: Vec<f64>,
    d2: Vec<f64>,
    g: Vec<f64>,
}

impl ClosureNet {
    /// Random hidden layers with a zero output layer, so the initial output is zero.
    pub fn new(shape: NetShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; shape.n_params()];
        let o = shape.offsets();
        let fill = |p: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in p {
                *v = rng.random_range(-a..a);
            }
        };
        fill(&mut params[o[0]..o[1]], N_IN, &mut rng);
        fill(&mut params[o[2]..o[3]], shape.h1, &mut rng);
        fill(&mut params[o[4]..o[5]], N_IN, &mut rng);
        ClosureNet {
            shape,
            params,
            standardizer: Standardizer::default(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn trace(&self, x: &[f64; N_IN]) -> ([f64; N_OUT], Trace) {
        let NetShape { h1: a, h2: b } = self.shape;
        let o = self.shape.offsets();
        let p = &self.params;
        let z = self.standardizer.apply(x);
        let mut h1 = vec![0.0; a];
        let mut d1 = vec![0.0; a];
        for i in 0..a {
            let mut s = p[o[1] + i];
            for j in 0..N_IN {
                s += p[o[0] + i * N_IN + j] * z[j];
            }
            (h1[i], d1[i]) = elu(s);
        }
        let mut h2 = vec![0.0; b];
        let mut d2 = vec![0.0; b];
        let mut g = vec![0.0; b];
        for i in 0..b {
            let mut s = p[o[3] + i];
            for j in 0..a {
                s += p[o[2] + i * a + j] * h1[j];
            }
            (h2[i], d2[i]) = elu(s);
            let mut t = p[o[5] + i];
            for j in 0..N_IN {
                t += p[o[4] + i * N_IN + j] * z[j];
            }
            g[i] = sigmoid(t);
        }
        let mut f = [0.0; N_OUT];
        for (r, fr) in f.iter_mut().enumerate() {
            let mut s = p[o[7] + r];
            for i in 0..b {
                s += p[o[6] + r * b + i] * g[i] * h2[i];
            }
            *fr = s;
        }
        (f, Trace { z, h1, d1, h2, d2, g })
    }

    /// Raw network output for inputs `(y, k, eps, du/dy)`.
    pub fn eval_raw(&self, x: &[f64; N_IN]) -> [f64; N_OUT] {
        self.trace(x).0
    }

    fn mirror(x: &[f64; N_IN]) -> [f64; N_IN] {
        [-x[0], x[1], x[2], -x[3]]
    }

    /// `(f(x) - f(x'))/2` with `x' = (-y, k, eps, -du/dy)`: odd under reflection about
    /// the centreline, as the Reynolds stress is.
    pub fn eval(&self, x: &[f64; N_IN]) -> [f64; N_OUT] {
        let a = self.eval_raw(x);
        let b = self.eval_raw(&Self::mirror(x));
        [0.5 * (a[0] - b[0]), 0.5 * (a[1] - b[1])]
    }

    fn backprop_raw(&self, x: &[f64; N_IN], cot: [f64; N_OUT], grad: &mut [f64]) {
        let NetShape { h1: a, h2: b } = self.shape;
        let o = self.shape.offsets();
        let p = &self.params;
        let (_, t) = self.trace(x);
        let mut du = vec![0.0; b];
        for r in 0..N_OUT {
            grad[o[7] + r] += cot[r];
            for i in 0..b {
                grad[o[6] + r * b + i] += cot[r] * t.g[i] * t.h2[i];
                du[i] += p[o[6] + r * b + i] * cot[r];
            }
        }
        let mut dh1 = vec![0.0; a];
        for i in 0..b {
            let da3 = du[i] * t.h2[i] * t.g[i] * (1.0 - t.g[i]);
            grad[o[5] + i] += da3;
            for j in 0..N_IN {
                grad[o[4] + i * N_IN + j] += da3 * t.z[j];
            }
            let da2 = du[i] * t.g[i] * t.d2[i];
            grad[o[3] + i] += da2;
            for j in 0..a {
                grad[o[2] + i * a + j] += da2 * t.h1[j];
                dh1[j] += p[o[2] + i * a + j] * da2;
            }
        }
        for i in 0..a {
            let da1 = dh1[i] * t.d1[i];
            grad[o[1] + i] += da1;
            for j in 0..N_IN {
                grad[o[0] + i * N_IN + j] += da1 * t.z[j];
            }
        }
    }

    /// Accumulate `d(cot . eval(x)) / d theta` into `grad`.
    pub fn backprop(&self, x: &[f64; N_IN], cot: [f64; N_OUT], grad: &mut [f64]) {
        let half = [0.5 * cot[0], 0.5 * cot[1]];
        self.backprop_raw(x, half, grad);
        self.backprop_raw(&Self::mirror(x), [-half[0], -half[1]], grad);
    }

    /// Flat binary checkpoint: magic, format version, widths, standardizer, parameters.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(NET_MAGIC)?;
        out.write_all(&NET_VERSION.to_le_bytes())?;
        out.write_all(&(self.shape.h1 as u64).to_le_bytes())?;
        out.write_all(&(self.shape.h2 as u64).to_le_bytes())?;
        for v in self.standardizer.offset.iter().chain(&self.standardizer.scale) {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in &self.params {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != NET_MAGIC {
            return Err(Error::Parse("not a closure-network checkpoint".into()));
        }
        let mut v = [0u8; 4];
        input.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != NET_VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
        }
        let shape = NetShape {
            h1: read_u64(&mut input)? as usize,
            h2: read_u64(&mut input)? as usize,
        };
        let mut standardizer = Standardizer::default();
        for i in 0..N_IN {
            standardizer.offset[i] = read_f64(&mut input)?;
        }
        for i in 0..N_IN {
            standardizer.scale[i] = read_f64(&mut input)?;
        }
        let params = (0..shape.n_params())
            .map(|_| read_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClosureNet {
            shape,
            params,
            standardizer,
        })
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_len(self.params.len(), p.len())?;
        self.params.copy_from_slice(p);
        Ok(())
    }
}

const NET_MAGIC: &[u8; 8] = b"NNPDECN1";
const NET_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_output_at_init_and_odd_symmetry() {
        let mut net = ClosureNet::new(NetShape { h1: 5, h2: 3 }, 2);
        let x = [0.3, 0.01, 0.2, -4.0];
        assert_eq!(net.eval(&x), [0.0, 0.0]);
        for v in net.params.iter_mut() {
            *v += 0.1;
        }
        let a = net.eval(&x);
        let b = net.eval(&ClosureNet::mirror(&x));
        assert!((a[0] + b[0]).abs() < 1e-15 && (a[1] + b[1]).abs() < 1e-15);
        assert!(a[0] != 0.0);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut net = ClosureNet::new(NetShape { h1: 4, h2: 4 }, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in net.params.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        net.standardizer = Standardizer {
            offset: [0.0, 0.1, 0.5, 0.0],
            scale: [1.0, 0.1, 0.5, 20.0],
        };
        let x = [-0.4, 0.05, 0.3, 7.0];
        let cot = [0.7, -1.3];
        let mut grad = vec![0.0; net.n_params()];
        net.backprop(&x, cot, &mut grad);
        for k in 0..net.n_params() {
            let mut p = net.clone();
            p.params[k] += 1e-6;
            let fp = p.eval(&x);
            p.params[k] -= 2e-6;
            let fm = p.eval(&x);
            let fd = (cot[0] * (fp[0] - fm[0]) + cot[1] * (fp[1] - fm[1])) / 2e-6;
            assert!((fd - grad[k]).abs() < 1e-8 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn standardizer_ranges() {
        let s = Standardizer::from_samples(&[[-1.0, 0.0, 1.0, 5.0], [0.5, 2.0, 3.0, -10.0]]);
        let z = s.apply(&[0.5, 2.0, 1.0, -10.0]);
        assert_eq!(z, [0.5, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut net = ClosureNet::new(NetShape { h1: 3, h2: 2 }, 5);
        net.standardizer.scale[2] = 4.0;
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        assert_eq!(ClosureNet::read_checkpoint(&buf[..]).unwrap(), net);
        buf[9] ^= 0xff;
        assert!(ClosureNet::read_checkpoint(&buf[..]).is_err());
    }
}
