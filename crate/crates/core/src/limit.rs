//! Mean-field limit: the kernel `B(x, x'; mu_0)`, its integral operator `T_B`,
//! the spectrum of `T_B`, and the non-local limit system for `(u*, u_hat*, g)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::Field;
use crate::grid::{quad_inner, Grid, GridSpec};
use crate::network::{Activation, InitDistribution, Law};
use crate::objective::{adjoint_rhs, objective, ObjectiveMode};
use crate::par;
use crate::trainer::Problem;

/// Samples per chunk; each chunk draws from its own RNG stream.
const CHUNK: usize = 512;
/// Fixed number of partial sums, independent of the thread count.
const GROUPS: usize = 16;

/// Quadrature-weighted discretization of `B` on the nodes of a grid.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub grid: Grid,
    pub values: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// Per-unit feature block: the rows `sigma`, `c sigma'` and `x_j c sigma'`.
fn feature_rows(
    act: Activation,
    c: f64,
    w: &[f64],
    eta: f64,
    pts: &[f64],
    d: usize,
    rows: &mut [Vec<f64>],
) {
    let n = pts.len() / d;
    for k in 0..n {
        let x = &pts[k * d..(k + 1) * d];
        let z = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + eta;
        let (s, ds) = act.eval_both(z);
        rows[0][k] = s;
        rows[1][k] = c * ds;
        for j in 0..d {
            rows[2 + j][k] = x[j] * c * ds;
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Sum of Gram matrices over the samples of one chunk.
fn chunk_gram(
    dist: &InitDistribution,
    act: Activation,
    pts: &[f64],
    d: usize,
    seed: u64,
    chunk: usize,
    count: usize,
) -> DMatrix<f64> {
    let n = pts.len() / d;
    let per = 2 + d;
    let mut rng = chunk_rng(seed, chunk);
    let mut feats = DMatrix::<f64>::zeros(count * per, n);
    let mut rows = vec![vec![0.0; n]; per];
    let mut w = vec![0.0; d];
    for m in 0..count {
        let (c, eta) = dist.sample_unit(&mut rng, &mut w);
        feature_rows(act, c, &w, eta, pts, d, &mut rows);
        for (r, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                feats[(m * per + r, k)] = *v;
            }
        }
    }
    feats.tr_mul(&feats)
}

/// Monte-Carlo estimate `B = alpha E[sigma sigma + c^2 sigma' sigma' (x.x' + 1)]`
/// over `mc_samples` draws from `dist`.
pub fn estimate_kernel(
    grid: &Grid,
    dist: &InitDistribution,
    activation: Activation,
    alpha: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<KernelMatrix> {
    if mc_samples == 0 {
        return Err(Error::InvalidParameter("need at least one Monte-Carlo sample".into()));
    }
    let d = grid.dim();
    let pts = grid.points();
    let n = grid.len();
    let n_chunks = mc_samples.div_ceil(CHUNK);
    let count = |c: usize| CHUNK.min(mc_samples - c * CHUNK);
    let partials = par::map_indexed(GROUPS.min(n_chunks), |g| {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        let mut c = g;
        while c < n_chunks {
            acc += chunk_gram(dist, activation, &pts, d, seed, c, count(c));
            c += GROUPS;
        }
        acc
    });
    let mut values = DMatrix::<f64>::zeros(n, n);
    for p in partials {
        values += p;
    }
    values *= alpha / mc_samples as f64;
    // exact symmetry: copy the upper triangle onto the lower one
    for j in 0..n {
        for i in j + 1..n {
            values[(i, j)] = values[(j, i)];
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite kernel entry".into()));
    }
    Ok(KernelMatrix {
        grid: grid.clone(),
        values,
        weights: grid.weights(),
        mc_samples,
        seed,
        alpha,
    })
}

/// `[T_B u](x) = ∫ B(x, x') u(x') dx'`
pub fn apply_tb(kernel: &KernelMatrix, field: &[f64]) -> Result<Field> {
    check_len(kernel.weights.len(), field.len())?;
    let wu = DVector::from_iterator(field.len(), field.iter().zip(&kernel.weights).map(|(u, w)| u * w));
    let out = &kernel.values * wu;
    Ok(Field(out.as_slice().to_vec()))
}

impl KernelMatrix {
    pub fn apply(&self, field: &[f64]) -> Result<Field> {
        apply_tb(self, field)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Row-per-node CSV of the kernel matrix, preceded by `x` columns.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.grid.dim();
        let pts = self.grid.points();
        let n = self.len();
        let coords = if d == 1 { "x" } else { "x,y" };
        write!(out, "{coords}")?;
        for j in 0..n {
            write!(out, ",b{j}")?;
        }
        writeln!(out)?;
        for i in 0..n {
            let c: Vec<String> = pts[i * d..(i + 1) * d].iter().map(|v| format!("{v:.17e}")).collect();
            write!(out, "{}", c.join(","))?;
            for j in 0..n {
                write!(out, ",{:.17e}", self.values[(i, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Eigenpairs of `T_B`, eigenvalues descending, eigenvectors quadrature-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Field>,
}

impl SpectralDecomposition {
    pub fn rank_above(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > threshold).count()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// CSV `k,lambda`, with k counted from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,lambda")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{:.17e}", k + 1, l)?;
        }
        Ok(())
    }
}

/// Diagonalize `W^{1/2} B W^{1/2}` and map eigenvectors back with `W^{-1/2}`.
pub fn spectrum(kernel: &KernelMatrix) -> Result<SpectralDecomposition> {
    let n = kernel.len();
    let sw: Vec<f64> = kernel.weights.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| sw[i] * kernel.values[(i, j)] * sw[j]);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| Field((0..n).map(|i| eig.eigenvectors[(i, k)] / sw[i]).collect()))
        .collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Monte-Carlo estimate of `∫ (∫sigma^2 + ∫|c sigma' x|^2 + ∫|c sigma'|^2) d mu_0`,
/// without the factor alpha.
pub fn c_sigma_bound(
    dist: &InitDistribution,
    activation: Activation,
    grid: &Grid,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::InvalidParameter("need at least one Monte-Carlo sample".into()));
    }
    let d = grid.dim();
    let pts = grid.points();
    let wq = grid.weights();
    let n = grid.len();
    let n_chunks = mc_samples.div_ceil(CHUNK);
    let sums = par::map_indexed(n_chunks, |c| {
        let count = CHUNK.min(mc_samples - c * CHUNK);
        let mut rng = chunk_rng(seed, c);
        let mut rows = vec![vec![0.0; n]; 2 + d];
        let mut w = vec![0.0; d];
        let mut s = 0.0;
        for _ in 0..count {
            let (cc, eta) = dist.sample_unit(&mut rng, &mut w);
            feature_rows(activation, cc, &w, eta, &pts, d, &mut rows);
            for r in &rows {
                s += quad_inner(&wq, r, r);
            }
        }
        s
    });
    Ok(sums.iter().sum::<f64>() / mc_samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    pub alpha: f64,
    pub mu: f64,
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: usize,
    pub n_moments: usize,
    pub mode: ObjectiveMode,
    pub activation: Activation,
    pub init: Law,
    pub mc_samples: usize,
    pub seed: u64,
    pub snapshot_every: usize,
    pub j_floor: f64,
    pub integrator: Integrator,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig {
            alpha: 1000.0,
            mu: 0.1,
            grid: GridSpec { dim: 1, n: 129 },
            dt: 1e-2,
            steps: 100_000,
            n_moments: 10,
            mode: ObjectiveMode::Weak,
            activation: Activation::Tanh,
            init: Law::default(),
            mc_samples: 100_000,
            seed: 0,
            snapshot_every: 10,
            j_floor: 0.0,
            integrator: Integrator::Euler,
        }
    }
}

impl LimitConfig {
    pub fn init_distribution(&self) -> InitDistribution {
        InitDistribution {
            law: self.init,
            seed: self.seed,
        }
    }

    pub fn kernel(&self) -> Result<KernelMatrix> {
        estimate_kernel(
            &self.grid.build()?,
            &self.init_distribution(),
            self.activation,
            self.alpha,
            self.mc_samples,
            self.seed,
        )
    }
}

/// Fields of the limit system at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSnapshot {
    pub step: usize,
    pub t: f64,
    pub u: Field,
    pub u_hat: Field,
    pub g: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitTrajectory {
    pub dt: f64,
    /// `J̄` at steps `0..=steps_taken`.
    pub j: Vec<f64>,
    /// `‖u_hat*‖_{L²}` at the same steps.
    pub u_hat_norm: Vec<f64>,
    /// `⟨u_hat*, T_B u_hat*⟩` at the same steps.
    pub dissipation: Vec<f64>,
    pub snapshots: Vec<LimitSnapshot>,
}

impl LimitTrajectory {
    pub fn steps_taken(&self) -> usize {
        self.j.len() - 1
    }

    pub fn final_objective(&self) -> f64 {
        *self.j.last().expect("trajectory has an initial record")
    }

    /// CSV `step,t,J,uhat_L2,dissipation`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,t,J,uhat_L2,dissipation")?;
        for (k, j) in self.j.iter().enumerate() {
            writeln!(
                out,
                "{k},{:.17e},{:.17e},{:.17e},{:.17e}",
                k as f64 * self.dt,
                j,
                self.u_hat_norm[k],
                self.dissipation[k]
            )?;
        }
        Ok(())
    }

    /// Long-format snapshot CSV `step,t,node,u,u_hat,g`.
    pub fn write_snapshots_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,t,node,u,u_hat,g")?;
        for s in &self.snapshots {
            for k in 0..s.u.len() {
                writeln!(
                    out,
                    "{},{:.17e},{k},{:.17e},{:.17e},{:.17e}",
                    s.step, s.t, s.u[k], s.u_hat[k], s.g[k]
                )?;
            }
        }
        Ok(())
    }
}

/// `(u*, u_hat*, J̄)` for a given network output `g`.
pub fn limit_state(g: &[f64], problem: &Problem, mode: ObjectiveMode) -> Result<(Field, Field, f64)> {
    let u = problem.op.solve(g)?;
    let j = objective(&u, &problem.h, &problem.basis, mode)?;
    let rhs = adjoint_rhs(&u, &problem.h, &problem.basis, mode)?;
    let u_hat = problem.op.solve_adjoint(&rhs)?;
    Ok((u, u_hat, j))
}

/// Integrate `dg/dt = -T_B u_hat*` from `g_0 = 0`.
pub fn integrate_limit(config: &LimitConfig, kernel: &KernelMatrix, problem: &Problem) -> Result<LimitTrajectory> {
    if !(config.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    check_len(problem.grid().len(), kernel.len())?;
    let n = kernel.len();
    let mode = config.mode;
    let rhs = |g: &[f64]| -> Result<(Field, Field, f64, Field)> {
        let (u, u_hat, j) = limit_state(g, problem, mode)?;
        let tb = kernel.apply(&u_hat)?;
        Ok((u, u_hat, j, tb))
    };
    let every = config.snapshot_every.max(1);
    let mut g = Field::zeros(n);
    let mut traj = LimitTrajectory {
        dt: config.dt,
        j: Vec::new(),
        u_hat_norm: Vec::new(),
        dissipation: Vec::new(),
        snapshots: Vec::new(),
    };
    let weights = &kernel.weights;
    for step in 0..=config.steps {
        let (u, u_hat, j, tb) = rhs(&g)?;
        if !(j.is_finite() && tb.is_finite()) {
            return Err(Error::Numeric(format!("non-finite limit state at step {step}")));
        }
        traj.j.push(j);
        traj.u_hat_norm.push(quad_inner(weights, &u_hat, &u_hat).sqrt());
        traj.dissipation.push(quad_inner(weights, &u_hat, &tb));
        let done = step == config.steps || j < config.j_floor;
        if step % every == 0 || done {
            traj.snapshots.push(LimitSnapshot {
                step,
                t: step as f64 * config.dt,
                u,
                u_hat,
                g: g.clone(),
            });
        }
        if done {
            break;
        }
        let dt = config.dt;
        match config.integrator {
            Integrator::Euler => g.axpy(-dt, &tb),
            Integrator::Rk4 => {
                let k1 = tb.scaled(-1.0);
                let k2 = rhs(&g.add(&k1.scaled(0.5 * dt)))?.3.scaled(-1.0);
                let k3 = rhs(&g.add(&k2.scaled(0.5 * dt)))?.3.scaled(-1.0);
                let k4 = rhs(&g.add(&k3.scaled(dt)))?.3.scaled(-1.0);
                for i in 0..n {
                    g[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
    Ok(traj)
}

/// Decay summary for one eigenmode of `T_B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeDecay {
    pub k: usize,
    pub lambda: f64,
    /// First recorded time with `c_k(t)^2 <= c_k(0)^2 / 2`.
    pub time_to_half: Option<f64>,
    /// `(1/t) ∫_0^t c_k^2` at the last snapshot.
    pub final_time_average: f64,
    /// Time average non-increasing over the last half of the run.
    pub tail_monotone: bool,
    /// `lambda_k` negligible, so the mode is not damped by the flow.
    pub null_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalDecayReport {
    pub modes: Vec<ModeDecay>,
    /// Among non-null modes with a finite half time, larger `lambda` never decays slower.
    pub ordered: bool,
    /// `c_k(t)` per snapshot (rows) and mode (columns).
    pub coefficients: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

/// Project `u_hat*(t)` on the leading `top` eigenvectors and summarize the decay.
pub fn modal_decay(traj: &LimitTrajectory, spec: &SpectralDecomposition, weights: &[f64], top: usize) -> ModalDecayReport {
    let top = top.min(spec.eigenvalues.len());
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    let coefficients: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| {
            spec.eigenvectors[..top]
                .iter()
                .map(|e| quad_inner(weights, &s.u_hat, e))
                .collect()
        })
        .collect();
    let lam_ref = spec.lambda_max().abs().max(f64::MIN_POSITIVE);
    let mut modes = Vec::with_capacity(top);
    for k in 0..top {
        let c: Vec<f64> = coefficients.iter().map(|row| row[k]).collect();
        let c0 = c.first().copied().unwrap_or(0.0);
        let time_to_half = (c0 != 0.0)
            .then(|| c.iter().zip(&times).find(|(v, _)| v.powi(2) <= 0.5 * c0 * c0).map(|(_, t)| *t))
            .flatten();
        // running time average by the trapezoid rule on the snapshot times
        let mut integral = 0.0;
        let mut avg = Vec::with_capacity(c.len());
        for i in 0..c.len() {
            if i > 0 {
                integral += 0.5 * (c[i].powi(2) + c[i - 1].powi(2)) * (times[i] - times[i - 1]);
            }
            avg.push(if times[i] > 0.0 { integral / times[i] } else { c[i].powi(2) });
        }
        let half = avg.len() / 2;
        let tail_monotone = avg[half..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        modes.push(ModeDecay {
            k: k + 1,
            lambda: spec.eigenvalues[k],
            time_to_half,
            final_time_average: avg.last().copied().unwrap_or(0.0),
            tail_monotone,
            null_mode: spec.eigenvalues[k] <= 1e-10 * lam_ref,
        });
    }
    let live: Vec<&ModeDecay> = modes.iter().filter(|m| !m.null_mode && m.time_to_half.is_some()).collect();
    let ordered = live.iter().enumerate().all(|(i, a)| {
        live[i + 1..]
            .iter()
            .all(|b| a.lambda < b.lambda || a.time_to_half <= b.time_to_half)
    });
    ModalDecayReport {
        modes,
        ordered,
        coefficients,
        times,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_grid;
    use crate::objective::default_target;

    fn grid1(n: usize) -> Grid {
        Grid::OneD(uniform_grid(n).unwrap())
    }

    #[test]
    fn point_mass_kernel_closed_form() {
        let g = grid1(17);
        let k = estimate_kernel(&g, &InitDistribution::point_mass(1.0, 0.0, 0.0), Activation::Tanh, 0.7, 3, 0).unwrap();
        let x = g.points();
        for i in 0..17 {
            for j in 0..17 {
                assert!((k.values[(i, j)] - 0.7 * (x[i] * x[j] + 1.0)).abs() < 1e-14);
            }
        }
        let z = estimate_kernel(&g, &InitDistribution::point_mass(0.0, 0.0, 0.0), Activation::Tanh, 1.0, 5, 0).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_kernel_action_and_rank() {
        let g = grid1(65);
        let k = estimate_kernel(&g, &InitDistribution::point_mass(1.0, 0.0, 0.0), Activation::Tanh, 2.0, 1, 0).unwrap();
        let ones = vec![1.0; 65];
        let tb = apply_tb(&k, &ones).unwrap();
        for (t, x) in tb.iter().zip(g.points()) {
            assert!((t - 2.0 * (x / 2.0 + 1.0)).abs() < 1e-12);
        }
        let s = spectrum(&k).unwrap();
        assert_eq!(s.rank_above(1e-10), 2);
        assert!(apply_tb(&k, &vec![0.0; 65]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_symmetric_deterministic_and_bounded() {
        let g = grid1(33);
        let d = InitDistribution::standard(3);
        let a = estimate_kernel(&g, &d, Activation::Tanh, 1.0, 2000, 9).unwrap();
        let b = estimate_kernel(&g, &d, Activation::Tanh, 1.0, 2000, 9).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values, a.values.transpose());
        assert!(a.values.iter().all(|v| v.abs() <= 3.0));
    }

    #[test]
    fn spectrum_psd_orthonormal_and_bounded() {
        let g = grid1(33);
        let d = InitDistribution::standard(0);
        let k = estimate_kernel(&g, &d, Activation::Tanh, 1.0, 4000, 1).unwrap();
        let s = spectrum(&k).unwrap();
        assert!(s.lambda_min() >= -1e-8);
        let cs = c_sigma_bound(&d, Activation::Tanh, &g, 4000, 1).unwrap();
        // same draws: the trace equals alpha * C_sigma
        let trace: f64 = s.eigenvalues.iter().sum();
        assert!((trace - cs).abs() < 1e-9 * cs);
        assert!(s.lambda_max() <= cs + 1e-6);
        let w = g.weights();
        for a in 0..4 {
            for b in 0..4 {
                let ip = quad_inner(&w, &s.eigenvectors[a], &s.eigenvectors[b]);
                assert!((ip - if a == b { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn c_sigma_point_masses() {
        let g = grid1(1025);
        let z = c_sigma_bound(&InitDistribution::point_mass(0.0, 0.0, 0.0), Activation::Tanh, &g, 10, 0).unwrap();
        assert_eq!(z, 0.0);
        let o = c_sigma_bound(&InitDistribution::point_mass(1.0, 0.0, 0.0), Activation::Tanh, &g, 10, 0).unwrap();
        assert!((o - 4.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_target_stays_at_rest() {
        let cfg = LimitConfig {
            grid: GridSpec { dim: 1, n: 33 },
            mc_samples: 500,
            steps: 20,
            ..LimitConfig::default()
        };
        let grid = cfg.grid.build().unwrap();
        let problem = Problem::new(grid.clone(), cfg.mu, cfg.n_moments, Field::zeros(33)).unwrap();
        let k = cfg.kernel().unwrap();
        let t = integrate_limit(&cfg, &k, &problem).unwrap();
        assert!(t.j.iter().all(|&j| j == 0.0));
        assert!(t.snapshots.iter().all(|s| s.g.iter().chain(s.u.iter()).chain(s.u_hat.iter()).all(|&v| v == 0.0)));
        let s = spectrum(&k).unwrap();
        let r = modal_decay(&t, &s, &k.weights, 5);
        assert!(r.coefficients.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn limit_objective_decreases_with_energy_identity() {
        let cfg = LimitConfig {
            grid: GridSpec { dim: 1, n: 65 },
            mc_samples: 4000,
            steps: 200,
            dt: 1e-5,
            ..LimitConfig::default()
        };
        let grid = cfg.grid.build().unwrap();
        let problem = Problem::new(grid.clone(), cfg.mu, cfg.n_moments, default_target(&grid)).unwrap();
        let k = cfg.kernel().unwrap();
        let t = integrate_limit(&cfg, &k, &problem).unwrap();
        for w in t.j.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let rate = (t.j[1] - t.j[0]) / cfg.dt;
        assert!(((rate + t.dissipation[0]) / t.dissipation[0]).abs() < 0.05);

        let rk = integrate_limit(&LimitConfig { integrator: Integrator::Rk4, ..cfg.clone() }, &k, &problem).unwrap();
        assert!((rk.final_objective() - t.final_objective()).abs() < 0.01 * t.j[0]);
    }
}
