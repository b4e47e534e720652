//! The discrete operator `A = -mu * Lap_h + I` with homogeneous Dirichlet data,
//! assembled on interior nodes and factorized once by banded Cholesky.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Lower-triangular banded Cholesky factor. Row `i` stores `L(i, i-k)` for `k = 0..=bw`.
#[derive(Debug, Clone)]
struct BandCholesky {
    n: usize,
    bw: usize,
    lower: Vec<f64>,
}

impl BandCholesky {
    fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut lower = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = entry(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= lower[i * w + (i - k)] * lower[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Numeric(format!(
                            "operator not positive definite at row {i} (pivot {s})"
                        )));
                    }
                    lower[i * w] = s.sqrt();
                } else {
                    lower[i * w + (i - j)] = s / lower[j * w];
                }
            }
        }
        Ok(BandCholesky { n, bw, lower })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.lower[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.lower[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                s -= self.lower[k * w + (k - i)] * x[k];
            }
            x[i] = s / self.lower[i * w];
        }
    }
}

/// Assembled and factorized elliptic operator on a unit-domain grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub mu: f64,
    pub dim: usize,
    grid: Grid,
    /// interior unknown -> global node
    interior: Vec<usize>,
    /// global node -> interior unknown
    slot: Vec<Option<usize>>,
    diag: f64,
    off_x: f64,
    off_y: f64,
    /// interior extent along y (2D), used to locate stencil neighbours
    my: usize,
    bw: usize,
    factor: BandCholesky,
}

/// Assemble `-mu Lap_h + I` and factorize it.
pub fn assemble(grid: &Grid, mu: f64) -> Result<DiscreteOperator> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("diffusion constant must be positive, got {mu}")));
    }
    let mask = grid.boundary_mask();
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| !mask[i]).collect();
    let mut slot = vec![None; grid.len()];
    for (k, &g) in interior.iter().enumerate() {
        slot[g] = Some(k);
    }
    let (diag, off_x, off_y, my, bw) = match grid {
        Grid::OneD(g) => {
            let c = mu / (g.spacing * g.spacing);
            (2.0 * c + 1.0, -c, 0.0, 1, 1)
        }
        Grid::TwoD(g) => {
            let cx = mu / (g.gx.spacing * g.gx.spacing);
            let cy = mu / (g.gy.spacing * g.gy.spacing);
            let my = g.gy.n - 2;
            (2.0 * cx + 2.0 * cy + 1.0, -cx, -cy, my, my)
        }
    };
    let dim = grid.dim();
    let n = interior.len();
    let entry = |i: usize, j: usize| stencil_entry(dim, diag, off_x, off_y, my, i, j);
    let factor = BandCholesky::factor(n, bw, entry)?;
    Ok(DiscreteOperator {
        mu,
        dim,
        grid: grid.clone(),
        interior,
        slot,
        diag,
        off_x,
        off_y,
        my,
        bw,
        factor,
    })
}

fn stencil_entry(dim: usize, diag: f64, off_x: f64, off_y: f64, my: usize, i: usize, j: usize) -> f64 {
    if i == j {
        return diag;
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    match dim {
        1 => {
            if hi - lo == 1 {
                off_x
            } else {
                0.0
            }
        }
        _ => {
            if hi - lo == my {
                off_x
            } else if hi - lo == 1 && hi % my != 0 {
                off_y
            } else {
                0.0
            }
        }
    }
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        stencil_entry(self.dim, self.diag, self.off_x, self.off_y, self.my, i, j)
    }

    /// Solve `A u = rhs` on interior nodes; boundary values of the result are zero.
    pub fn solve(&self, rhs: &[f64]) -> Result<Field> {
        check_len(self.grid.len(), rhs.len())?;
        let mut x: Vec<f64> = self.interior.iter().map(|&g| rhs[g]).collect();
        self.factor.solve_in_place(&mut x);
        let mut out = Field::zeros(self.grid.len());
        for (k, &g) in self.interior.iter().enumerate() {
            out[g] = x[k];
        }
        if !out.is_finite() {
            return Err(Error::Numeric("non-finite elliptic solution".into()));
        }
        Ok(out)
    }

    /// Solve `A† v = rhs`. The operator is symmetric, so this is the same solve.
    pub fn solve_adjoint(&self, rhs: &[f64]) -> Result<Field> {
        self.solve(rhs)
    }

    /// `A u` on interior nodes (boundary values of `u` treated as zero); zero on the boundary.
    pub fn apply(&self, u: &[f64]) -> Result<Field> {
        check_len(self.grid.len(), u.len())?;
        let x: Vec<f64> = self.interior.iter().map(|&g| u[g]).collect();
        let n = x.len();
        let mut out = Field::zeros(self.grid.len());
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw + 1).min(n);
            let mut s = 0.0;
            for j in lo..hi {
                let a = self.entry(i, j);
                if a != 0.0 {
                    s += a * x[j];
                }
            }
            out[self.interior[i]] = s;
        }
        Ok(out)
    }

    /// Maximum interior residual `|A u - rhs|`.
    pub fn residual_max(&self, u: &[f64], rhs: &[f64]) -> Result<f64> {
        let au = self.apply(u)?;
        Ok(self
            .interior
            .iter()
            .map(|&g| (au[g] - rhs[g]).abs())
            .fold(0.0, f64::max))
    }

    /// Dense interior matrix, for inspection and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_interior();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// Interior slot of a global node, if it is interior.
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        self.slot[node]
    }
}
