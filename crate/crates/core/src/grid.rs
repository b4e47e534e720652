//! Uniform grids on the unit interval/square, the stretched channel grid, and
//! trapezoid quadrature on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;

/// Uniform 1D grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub quad_weights: Vec<f64>,
    pub interior_index: Vec<usize>,
}

/// Build a uniform grid with `n` nodes including both endpoints.
pub fn uniform_grid(n: usize) -> Result<Grid1D> {
    if n < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 nodes for an interior, got {n}"
        )));
    }
    let h = 1.0 / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    nodes[n - 1] = 1.0;
    let mut quad_weights = vec![h; n];
    quad_weights[0] = 0.5 * h;
    quad_weights[n - 1] = 0.5 * h;
    Ok(Grid1D {
        n,
        nodes,
        spacing: h,
        quad_weights,
        interior_index: (1..n - 1).collect(),
    })
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        uniform_grid(n)
    }

    pub fn n_interior(&self) -> usize {
        self.n - 2
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.nodes.iter().map(|&x| f(x)).collect())
    }
}

/// Tensor-product grid on `[0, 1]^2`. Node `(ix, iy)` is stored at `ix * ny + iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        Ok(Grid2D {
            gx: uniform_grid(nx)?,
            gy: uniform_grid(ny)?,
        })
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.gy.n + iy
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut out = Vec::with_capacity(self.gx.n * self.gy.n);
        for &x in &self.gx.nodes {
            for &y in &self.gy.nodes {
                out.push(f(x, y));
            }
        }
        Field(out)
    }
}

/// A grid on the unit domain in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    OneD(Grid1D),
    TwoD(Grid2D),
}

/// Serializable grid description used by configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self.dim {
            1 => Ok(Grid::OneD(uniform_grid(self.n)?)),
            2 => Ok(Grid::TwoD(Grid2D::new(self.n, self.n)?)),
            d => Err(Error::InvalidGrid(format!("unsupported dimension {d}"))),
        }
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Grid::OneD(_) => 1,
            Grid::TwoD(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::OneD(g) => g.n,
            Grid::TwoD(g) => g.gx.n * g.gy.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates flattened as `len * dim` values.
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::OneD(g) => g.nodes.clone(),
            Grid::TwoD(g) => {
                let mut p = Vec::with_capacity(2 * self.len());
                for &x in &g.gx.nodes {
                    for &y in &g.gy.nodes {
                        p.push(x);
                        p.push(y);
                    }
                }
                p
            }
        }
    }

    /// Trapezoid weights per node.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Grid::OneD(g) => g.quad_weights.clone(),
            Grid::TwoD(g) => {
                let mut w = Vec::with_capacity(self.len());
                for &wx in &g.gx.quad_weights {
                    for &wy in &g.gy.quad_weights {
                        w.push(wx * wy);
                    }
                }
                w
            }
        }
    }

    /// True for nodes on the domain boundary.
    pub fn boundary_mask(&self) -> Vec<bool> {
        match self {
            Grid::OneD(g) => (0..g.n).map(|i| i == 0 || i == g.n - 1).collect(),
            Grid::TwoD(g) => {
                let (nx, ny) = (g.gx.n, g.gy.n);
                let mut m = Vec::with_capacity(nx * ny);
                for ix in 0..nx {
                    for iy in 0..ny {
                        m.push(ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1);
                    }
                }
                m
            }
        }
    }

    /// Sample a function of the node coordinates.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        let d = self.dim();
        Field(self.points().chunks(d).map(f).collect())
    }

    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        integrate(field, self)
    }

    /// Quadrature inner product `∫ a b dx`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_len(self.len(), a.len())?;
        check_len(self.len(), b.len())?;
        Ok(quad_inner(&self.weights(), a, b))
    }

    pub fn l2_norm(&self, a: &[f64]) -> Result<f64> {
        Ok(self.inner(a, a)?.max(0.0).sqrt())
    }

    /// Discrete H¹₀ seminorm from forward differences.
    pub fn h1_seminorm(&self, u: &[f64]) -> Result<f64> {
        check_len(self.len(), u.len())?;
        let s = match self {
            Grid::OneD(g) => {
                let h = g.spacing;
                u.windows(2).map(|w| (w[1] - w[0]).powi(2) / h).sum::<f64>()
            }
            Grid::TwoD(g) => {
                let (nx, ny) = (g.gx.n, g.gy.n);
                let (hx, hy) = (g.gx.spacing, g.gy.spacing);
                let mut s = 0.0;
                for ix in 0..nx {
                    for iy in 0..ny {
                        let v = u[g.index(ix, iy)];
                        if ix + 1 < nx {
                            let dx = (u[g.index(ix + 1, iy)] - v) / hx;
                            s += hx * g.gy.quad_weights[iy] * dx * dx;
                        }
                        if iy + 1 < ny {
                            let dy = (u[g.index(ix, iy + 1)] - v) / hy;
                            s += hy * g.gx.quad_weights[ix] * dy * dy;
                        }
                    }
                }
                s
            }
        };
        Ok(s.sqrt())
    }

    /// Full H¹₀ norm: gradient seminorm plus the L² term.
    pub fn h1_norm(&self, u: &[f64]) -> Result<f64> {
        let semi = self.h1_seminorm(u)?;
        let l2 = self.l2_norm(u)?;
        Ok((semi * semi + l2 * l2).sqrt())
    }

    /// Write node coordinates as CSV, one node per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            Grid::OneD(g) => {
                writeln!(out, "x")?;
                for x in &g.nodes {
                    writeln!(out, "{x:.17e}")?;
                }
            }
            Grid::TwoD(_) => {
                writeln!(out, "x,y")?;
                for p in self.points().chunks(2) {
                    writeln!(out, "{:.17e},{:.17e}", p[0], p[1])?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn quad_inner(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Trapezoid approximation of `∫_U field dx`.
pub fn integrate(field: &[f64], grid: &Grid) -> Result<f64> {
    check_len(grid.len(), field.len())?;
    Ok(grid.weights().iter().zip(field).map(|(w, f)| w * f).sum())
}

/// Stretched wall-normal grid for channel flow on `[-delta, delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrid {
    pub n_y: usize,
    pub delta: f64,
    pub eta: f64,
    /// `n_y + 1` face coordinates, wall to wall.
    pub faces: Vec<f64>,
    /// `n_y` cell centres, midpoints of adjacent faces.
    pub centers: Vec<f64>,
}

/// Faces follow `y = delta * sin(eta*pi*s/2) / sin(eta*pi/2)` for a uniform `s` in `[-1, 1]`.
pub fn channel_grid(n_y: usize, delta: f64, eta: f64) -> Result<ChannelGrid> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stretching eta must lie in (0, 1), got {eta}"
        )));
    }
    if n_y < 2 || n_y % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "channel cell count must be even and >= 2, got {n_y}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("half-height must be positive, got {delta}")));
    }
    let half = n_y / 2;
    let denom = (eta * std::f64::consts::FRAC_PI_2).sin();
    let mut faces = vec![0.0; n_y + 1];
    // lower half computed directly, upper half mirrored so the set is exactly odd
    for j in 0..half {
        let s = -1.0 + 2.0 * j as f64 / n_y as f64;
        faces[j] = delta * (eta * std::f64::consts::FRAC_PI_2 * s).sin() / denom;
        faces[n_y - j] = -faces[j];
    }
    faces[0] = -delta;
    faces[n_y] = delta;
    faces[half] = 0.0;
    let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Ok(ChannelGrid {
        n_y,
        delta,
        eta,
        faces,
        centers,
    })
}

impl ChannelGrid {
    /// Face spacing `faces[j+1] - faces[j]`, i.e. the width of cell `j`.
    pub fn cell_width(&self, j: usize) -> f64 {
        self.faces[j + 1] - self.faces[j]
    }

    /// Trapezoid weights on faces.
    pub fn face_weights(&self) -> Vec<f64> {
        let n = self.faces.len();
        let mut w = vec![0.0; n];
        for j in 0..n - 1 {
            let h = self.cell_width(j);
            w[j] += 0.5 * h;
            w[j + 1] += 0.5 * h;
        }
        w
    }

    /// Trapezoid integral of a face-sampled profile over `[-delta, delta]`.
    pub fn integrate_faces(&self, v: &[f64]) -> Result<f64> {
        check_len(self.faces.len(), v.len())?;
        Ok(quad_inner(&self.face_weights(), v, &vec![1.0; v.len()]))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "y")?;
        for y in &self.faces {
            writeln!(out, "{y:.17e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_node_grid() {
        let g = uniform_grid(3).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.quad_weights, vec![0.25, 0.5, 0.25]);
        assert_eq!(g.interior_index, vec![1]);
    }

    #[test]
    fn spacing_and_errors() {
        assert_eq!(uniform_grid(5).unwrap().spacing, 0.25);
        assert!(matches!(uniform_grid(2), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn weights_sum_to_measure() {
        for n in [3, 4, 17, 1000] {
            let g = Grid::OneD(uniform_grid(n).unwrap());
            assert!((g.integrate(&vec![1.0; n]).unwrap() - 1.0).abs() < 1e-13);
        }
        let g = Grid::TwoD(Grid2D::new(9, 13).unwrap());
        assert!((g.integrate(&vec![1.0; g.len()]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_linear_and_polynomial() {
        let g = Grid::OneD(uniform_grid(101).unwrap());
        let f = g.sample(|p| p[0]);
        assert!((g.integrate(&f).unwrap() - 0.5).abs() < 1e-12);

        // (1-x)x^5 + x(1-x)^5 integrates to 2 B(2,6) = 1/21
        let g = Grid::OneD(uniform_grid(1025).unwrap());
        let h = g.sample(|p| {
            let x = p[0];
            (1.0 - x) * x.powi(5) + x * (1.0 - x).powi(5)
        });
        assert!((g.integrate(&h).unwrap() - 1.0 / 21.0).abs() < 1e-6);
    }

    #[test]
    fn integrate_size_mismatch() {
        let g = Grid::OneD(uniform_grid(5).unwrap());
        assert!(matches!(g.integrate(&[1.0; 4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn h1_seminorm_of_sine() {
        // |sin(pi x)|_{H1}^2 = pi^2 / 2
        let g = Grid::OneD(uniform_grid(2049).unwrap());
        let u = g.sample(|p| (std::f64::consts::PI * p[0]).sin());
        let s = g.h1_seminorm(&u).unwrap();
        assert!((s * s - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-5);

        let g2 = Grid::TwoD(Grid2D::new(129, 129).unwrap());
        let u = g2.sample(|p| (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin());
        let s = g2.h1_seminorm(&u).unwrap();
        // 2 * (pi^2/2) * (1/2)
        assert!((s * s - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-3);
    }

    #[test]
    fn channel_faces() {
        let c = channel_grid(2, 1.0, 0.995).unwrap();
        assert_eq!(c.faces, vec![-1.0, 0.0, 1.0]);

        let c = channel_grid(32, 1.0, 0.995).unwrap();
        assert!(c.cell_width(0) < 2.0 / 32.0);
        assert!(c.cell_width(0) < c.cell_width(15));
        for j in 0..=32 {
            assert_eq!(c.faces[j], -c.faces[32 - j]);
        }
        assert!(c.faces.windows(2).all(|w| w[1] > w[0]));
        assert!((c.integrate_faces(&vec![1.0; 33]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn channel_eta_range() {
        assert!(channel_grid(32, 1.0, 1.0).is_err());
        assert!(channel_grid(32, 1.0, 0.0).is_err());
    }
}
