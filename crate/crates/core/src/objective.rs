//! Moment bases, the weak (moment) and strong (L²) objectives and their adjoint
//! right-hand sides.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::grid::{quad_inner, Grid, Grid1D, Grid2D};

/// Which objective to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// `½ Σ_ℓ ⟨u − h, m_ℓ⟩²`
    #[default]
    Weak,
    /// `½ ‖u − h‖²`
    Strong,
}

/// Sampled moment functions, orthonormal in the quadrature inner product of `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBasis {
    pub samples: Vec<Field>,
    /// Scale applied to each raw cosine so its quadrature norm is one.
    pub normalization: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MomentBasis {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    /// `⟨v, m_ℓ⟩` for every ℓ.
    pub fn moments(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_nodes(), v.len())?;
        Ok(self
            .samples
            .iter()
            .map(|m| quad_inner(&self.weights, v, m))
            .collect())
    }

    /// `⟨m_i, m_j⟩` in the quadrature inner product.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|a| {
                self.samples
                    .iter()
                    .map(|b| quad_inner(&self.weights, a, b))
                    .collect()
            })
            .collect()
    }

    fn from_raw(raw: Vec<Field>, weights: Vec<f64>) -> Self {
        let mut samples = Vec::with_capacity(raw.len());
        let mut normalization = Vec::with_capacity(raw.len());
        for f in raw {
            let s = 1.0 / quad_inner(&weights, &f, &f).sqrt();
            normalization.push(s);
            samples.push(f.scaled(s));
        }
        MomentBasis {
            samples,
            normalization,
            weights,
        }
    }
}

/// `m_ℓ(x) ∝ cos(ℓπx)`, ℓ = 0..L-1.
pub fn cosine_basis_1d(grid: &Grid1D, n_moments: usize) -> Result<MomentBasis> {
    if n_moments == 0 {
        return Err(Error::InvalidParameter("need at least one moment".into()));
    }
    if n_moments > grid.n - 1 {
        // cos((n-1)πx) aliases to the grid's alternating mode
        return Err(Error::InvalidParameter(format!(
            "{n_moments} moments cannot be resolved on {} nodes",
            grid.n
        )));
    }
    let raw = (0..n_moments)
        .map(|l| grid.sample(|x| (l as f64 * PI * x).cos()))
        .collect();
    Ok(MomentBasis::from_raw(raw, grid.quad_weights.clone()))
}

/// Tensor products `cos(ℓ_x πx) cos(ℓ_y πy)`, ordered with ℓ_y fastest.
pub fn cosine_basis_2d(grid: &Grid2D, lx: usize, ly: usize) -> Result<MomentBasis> {
    let bx = cosine_basis_1d(&grid.gx, lx)?;
    let by = cosine_basis_1d(&grid.gy, ly)?;
    let mut raw = Vec::with_capacity(lx * ly);
    for mx in &bx.samples {
        for my in &by.samples {
            let mut f = Vec::with_capacity(grid.gx.n * grid.gy.n);
            for a in mx.iter() {
                for b in my.iter() {
                    f.push(a * b);
                }
            }
            raw.push(Field(f));
        }
    }
    let weights = Grid::TwoD(grid.clone()).weights();
    Ok(MomentBasis::from_raw(raw, weights))
}

/// Cosine basis of the appropriate dimension, `n_moments` per axis.
pub fn cosine_basis(grid: &Grid, n_moments: usize) -> Result<MomentBasis> {
    match grid {
        Grid::OneD(g) => cosine_basis_1d(g, n_moments),
        Grid::TwoD(g) => cosine_basis_2d(g, n_moments, n_moments),
    }
}

/// Objective value for state `u` against target `h`.
pub fn objective(u: &[f64], h: &[f64], basis: &MomentBasis, mode: ObjectiveMode) -> Result<f64> {
    check_len(basis.n_nodes(), u.len())?;
    check_len(basis.n_nodes(), h.len())?;
    let r: Vec<f64> = u.iter().zip(h).map(|(a, b)| a - b).collect();
    Ok(match mode {
        ObjectiveMode::Weak => 0.5 * basis.moments(&r)?.iter().map(|m| m * m).sum::<f64>(),
        ObjectiveMode::Strong => 0.5 * quad_inner(&basis.weights, &r, &r),
    })
}

/// Right-hand side of the adjoint equation, the Riesz representative of `dJ/du`.
pub fn adjoint_rhs(u: &[f64], h: &[f64], basis: &MomentBasis, mode: ObjectiveMode) -> Result<Field> {
    check_len(basis.n_nodes(), u.len())?;
    check_len(basis.n_nodes(), h.len())?;
    let r: Vec<f64> = u.iter().zip(h).map(|(a, b)| a - b).collect();
    match mode {
        ObjectiveMode::Weak => {
            let mut out = Field::zeros(r.len());
            for (coef, m) in basis.moments(&r)?.into_iter().zip(&basis.samples) {
                out.axpy(coef, m);
            }
            Ok(out)
        }
        ObjectiveMode::Strong => Ok(Field(r)),
    }
}

/// `h₁(x) = (1−x)x⁵ + x(1−x)⁵`
pub fn target_h1(x: f64) -> f64 {
    (1.0 - x) * x.powi(5) + x * (1.0 - x).powi(5)
}

/// `h₂(x, y) = (x − x²)(y − y²)`
pub fn target_h2(x: f64, y: f64) -> f64 {
    (x - x * x) * (y - y * y)
}

/// The built-in target for the grid's dimension.
pub fn default_target(grid: &Grid) -> Field {
    match grid {
        Grid::OneD(g) => g.sample(target_h1),
        Grid::TwoD(g) => g.sample(target_h2),
    }
}

/// Read a target sampled at the nodes of `grid` from CSV rows of coordinates and
/// one value (`x,value` or `x,y,value`). A header row is allowed. Rows must follow
/// the grid's node order.
pub fn load_target_csv<R: Read>(input: R, grid: &Grid) -> Result<Field> {
    let d = grid.dim();
    let pts = grid.points();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut values = Vec::with_capacity(grid.len());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", row + 1))),
        };
        if nums.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} columns, got {}",
                row + 1,
                d + 1,
                nums.len()
            )));
        }
        let k = values.len();
        if k >= grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: k + 1,
            });
        }
        for j in 0..d {
            if (nums[j] - pts[k * d + j]).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "row {}: coordinate {} does not match grid node {}",
                    row + 1,
                    nums[j],
                    pts[k * d + j]
                )));
            }
        }
        values.push(nums[d]);
    }
    check_len(grid.len(), values.len())?;
    Ok(Field(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_grid;

    #[test]
    fn basis_1d_orthonormal() {
        let g = uniform_grid(1025).unwrap();
        let b = cosine_basis_1d(&g, 10).unwrap();
        assert!((b.gram()[0][0] - 1.0).abs() < 1e-14);
        let gram = b.gram();
        assert!(gram[1][2].abs() <= 1e-8);
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12);
            }
        }
        // trapezoid is exact here, so the scaling is √2 for ℓ ≥ 1
        assert!((b.normalization[3] - 2f64.sqrt()).abs() < 1e-12);
        assert!((b.samples[0][5] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_2d_orthonormal() {
        let g = Grid2D::new(65, 65).unwrap();
        let b = cosine_basis_2d(&g, 10, 10).unwrap();
        assert_eq!(b.len(), 100);
        let gram = b.gram();
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-10);
            }
        }
        assert!(b.samples[0].iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(gram[10][1].abs() <= 1e-8);
    }

    #[test]
    fn weak_objective_examples() {
        let g = uniform_grid(1025).unwrap();
        let b = cosine_basis_1d(&g, 10).unwrap();
        let h = g.sample(target_h1);
        for mode in [ObjectiveMode::Weak, ObjectiveMode::Strong] {
            assert_eq!(objective(&h, &h, &b, mode).unwrap(), 0.0);
            assert!(adjoint_rhs(&h, &h, &b, mode).unwrap().iter().all(|&v| v == 0.0));
        }
        let u = h.add(&b.samples[1]);
        assert!((objective(&u, &h, &b, ObjectiveMode::Weak).unwrap() - 0.5).abs() < 1e-6);
        let rhs = adjoint_rhs(&u, &h, &b, ObjectiveMode::Weak).unwrap();
        for (a, m) in rhs.iter().zip(b.samples[1].iter()) {
            assert!((a - m).abs() < 1e-6);
        }
        // high-frequency perturbation is invisible to ten moments
        let base = g.sample(|x| x * x);
        let pert = base.add(&g.sample(|x| 2f64.sqrt() * (50.0 * PI * x).cos()));
        let j0 = objective(&base, &h, &b, ObjectiveMode::Weak).unwrap();
        let j1 = objective(&pert, &h, &b, ObjectiveMode::Weak).unwrap();
        assert!((j0 - j1).abs() < 1e-10);
    }

    #[test]
    fn adjoint_rhs_is_directional_derivative() {
        let g = uniform_grid(257).unwrap();
        let b = cosine_basis_1d(&g, 10).unwrap();
        let h = g.sample(target_h1);
        let u = g.sample(|x| (3.0 * x).sin());
        let v = g.sample(|x| x.exp() - 1.0);
        let eps = 1e-4;
        for mode in [ObjectiveMode::Weak, ObjectiveMode::Strong] {
            let rhs = adjoint_rhs(&u, &h, &b, mode).unwrap();
            let dir = quad_inner(&b.weights, &rhs, &v);
            let fd = (objective(&u.add(&v.scaled(eps)), &h, &b, mode).unwrap()
                - objective(&u, &h, &b, mode).unwrap())
                / eps;
            assert!((fd - dir).abs() < 10.0 * eps * (1.0 + dir.abs()));
        }
    }

    #[test]
    fn bessel_inequality() {
        let g = uniform_grid(129).unwrap();
        let b = cosine_basis_1d(&g, 10).unwrap();
        let z = Field::zeros(129);
        let u = g.sample(|x| (7.0 * x).cos() + x);
        let w = objective(&u, &z, &b, ObjectiveMode::Weak).unwrap();
        let s = objective(&u, &z, &b, ObjectiveMode::Strong).unwrap();
        assert!(w <= s + 1e-14);
    }

    #[test]
    fn csv_target_roundtrip() {
        let g = Grid::OneD(uniform_grid(5).unwrap());
        let text = "x,h\n0,0\n0.25,1\n0.5,2\n0.75,3\n1,4\n";
        let f = load_target_csv(text.as_bytes(), &g).unwrap();
        assert_eq!(f.0, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(load_target_csv("0,0\n0.3,1\n".as_bytes(), &g).is_err());
        assert!(load_target_csv("0,0\n".as_bytes(), &g).is_err());
    }

    #[test]
    fn too_many_moments() {
        let g = uniform_grid(5).unwrap();
        assert!(cosine_basis_1d(&g, 10).is_err());
        assert!(cosine_basis_1d(&g, 0).is_err());
    }
}
