use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::RansConfig;
use super::net::ClosureNet;
use crate::error::{Error, Result};
use crate::grid::ChannelGrid;

/// Channel-flow unknowns on the staggered grid: `u_bar` on faces (walls included,
/// held at zero), `k` and `eps` at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RansState {
    pub u_bar: Vec<f64>,
    pub k: Vec<f64>,
    pub eps: Vec<f64>,
    pub nu_t: Vec<f64>,
    pub dpdx: f64,
    /// Max-norm of the residual at the last evaluation.
    pub residual_norm: f64,
    pub steps: usize,
}

/// Residual blocks: momentum at interior faces, k and ε at centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub u: Vec<f64>,
    pub k: Vec<f64>,
    pub eps: Vec<f64>,
    pub dpdx: f64,
}

impl Residual {
    pub fn max_norm(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.k)
            .chain(&self.eps)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.k).chain(&self.eps).all(|v| v.is_finite())
    }
}

/// Geometry and constants precomputed for residual evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Ctx<'a> {
    pub cfg: &'a RansConfig,
    pub grid: ChannelGrid,
    pub nu: f64,
    /// cell widths
    pub dy: Vec<f64>,
    /// centre-to-centre distance across interior face j (index j-1)
    pub dc: Vec<f64>,
    /// wall distance of each centre
    pub wall_dist: Vec<f64>,
    pub face_w: Vec<f64>,
    pub net: Option<&'a ClosureNet>,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a RansConfig, net: Option<&'a ClosureNet>) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let n = grid.n_y;
        let dy: Vec<f64> = (0..n).map(|c| grid.cell_width(c)).collect();
        let dc: Vec<f64> = (1..n).map(|j| grid.centers[j] - grid.centers[j - 1]).collect();
        let wall_dist = grid.centers.iter().map(|y| cfg.delta - y.abs()).collect();
        let face_w = grid.face_weights();
        Ok(Ctx {
            cfg,
            nu: cfg.nu(),
            dy,
            dc,
            wall_dist,
            face_w,
            grid,
            net,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n_y
    }

    /// Trapezoid bulk velocity.
    pub fn bulk(&self, u: &[f64]) -> f64 {
        self.face_w.iter().zip(u).map(|(w, u)| w * u).sum::<f64>() / (2.0 * self.cfg.delta)
    }

    pub fn dudy(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|c| (u[c + 1] - u[c]) / self.dy[c]).collect()
    }

    pub fn nu_t(&self, k: &[f64], eps: &[f64]) -> Vec<f64> {
        if self.cfg.laminar {
            return vec![0.0; k.len()];
        }
        k.iter()
            .zip(eps)
            .map(|(k, e)| self.cfg.c_mu * k * k / e)
            .collect()
    }

    /// Network inputs `(y, k, eps, du/dy)` at every centre.
    pub fn net_inputs(&self, st: &RansState, dudy: &[f64]) -> Vec<[f64; 4]> {
        (0..self.n())
            .map(|c| [self.grid.centers[c], st.k[c], st.eps[c], dudy[c]])
            .collect()
    }

    /// `S = f1 + (C_R / Re) f2` at every centre.
    pub fn stress(&self, st: &RansState, dudy: &[f64]) -> Vec<f64> {
        match self.net {
            None => vec![0.0; self.n()],
            Some(net) => {
                let cr = self.cfg.c_r / self.cfg.re;
                self.net_inputs(st, dudy)
                    .iter()
                    .map(|x| {
                        let f = net.eval(x);
                        f[0] + cr * f[1]
                    })
                    .collect()
            }
        }
    }

    /// Central-difference `dS/d(du/dy)` at every centre; zero without a network.
    fn stress_slope(&self, st: &RansState) -> Vec<f64> {
        let Some(net) = self.net else {
            return vec![0.0; self.n()];
        };
        let cr = self.cfg.c_r / self.cfg.re;
        let dudy = self.dudy(&st.u_bar);
        self.net_inputs(st, &dudy)
            .iter()
            .map(|x| {
                let h = 1e-6 * x[3].abs().max(1.0);
                let (mut a, mut b) = (*x, *x);
                a[3] += h;
                b[3] -= h;
                let (fa, fb) = (net.eval(&a), net.eval(&b));
                ((fa[0] - fb[0]) + cr * (fa[1] - fb[1])) / (2.0 * h)
            })
            .collect()
    }

    /// Momentum fluxes `(nu + nu_t) du/dy - S` at centres.
    pub fn fluxes(&self, st: &RansState, nu_t: &[f64], dudy: &[f64]) -> Vec<f64> {
        let s = self.stress(st, dudy);
        (0..self.n())
            .map(|c| (self.nu + nu_t[c]) * dudy[c] - s[c])
            .collect()
    }

    /// Pressure gradient holding the mean flux balance plus a proportional term on
    /// the bulk velocity error.
    pub fn controller(&self, st: &RansState, flux: &[f64]) -> f64 {
        let n = self.n();
        let span = self.grid.centers[n - 1] - self.grid.centers[0];
        self.cfg.rho * (flux[n - 1] - flux[0]) / span
            + self.cfg.relax.gain * (self.bulk(&st.u_bar) - self.cfg.u_bulk)
    }

    pub fn residual(&self, st: &RansState, dpdx: Option<f64>) -> Residual {
        let n = self.n();
        let cfg = self.cfg;
        let nu = self.nu;
        let dudy = self.dudy(&st.u_bar);
        let nu_t = self.nu_t(&st.k, &st.eps);
        let flux = self.fluxes(st, &nu_t, &dudy);
        let dpdx = dpdx.unwrap_or_else(|| self.controller(st, &flux));
        let ru: Vec<f64> = (1..n)
            .map(|j| -dpdx / cfg.rho + (flux[j] - flux[j - 1]) / self.dc[j - 1])
            .collect();
        if cfg.laminar {
            return Residual {
                u: ru,
                k: vec![0.0; n],
                eps: vec![0.0; n],
                dpdx,
            };
        }
        // diffusive fluxes of k and eps on faces, walls included
        let face_diff = |phi: &[f64], sigma: f64, wall: f64| -> Vec<f64> {
            let mut d = vec![0.0; n + 1];
            d[0] = (nu + nu_t[0] / sigma) * (phi[0] - wall) / self.wall_dist[0];
            d[n] = (nu + nu_t[n - 1] / sigma) * (wall - phi[n - 1]) / self.wall_dist[n - 1];
            for j in 1..n {
                let nf = nu + 0.5 * (nu_t[j - 1] + nu_t[j]) / sigma;
                d[j] = nf * (phi[j] - phi[j - 1]) / self.dc[j - 1];
            }
            d
        };
        let dk = face_diff(&st.k, cfg.sigma_k, 0.0);
        let rk: Vec<f64> = (0..n)
            .map(|c| (dk[c + 1] - dk[c]) / self.dy[c] + nu_t[c] * dudy[c] * dudy[c] - st.eps[c])
            .collect();
        let de = face_diff(&st.eps, cfg.sigma_eps, 0.0);
        let re: Vec<f64> = (0..n)
            .map(|c| {
                if c == 0 || c == n - 1 {
                    self.wall_eps(st.k[c], c) - st.eps[c]
                } else {
                    (de[c + 1] - de[c]) / self.dy[c] + cfg.c_1eps * cfg.c_mu * st.k[c] * dudy[c] * dudy[c]
                        - cfg.c_2eps * st.eps[c] * st.eps[c] / st.k[c]
                }
            })
            .collect();
        Residual { u: ru, k: rk, eps: re, dpdx }
    }

    /// Near-wall dissipation `2 nu k / d^2` at the first centre off a wall.
    pub fn wall_eps(&self, k: f64, c: usize) -> f64 {
        let d = self.wall_dist[c];
        (2.0 * self.nu * k / (d * d)).max(self.cfg.eps_floor)
    }

    /// Clip to floors and pin the algebraic wall rows.
    pub fn project(&self, st: &mut RansState) {
        let n = self.n();
        st.u_bar[0] = 0.0;
        st.u_bar[n] = 0.0;
        if self.cfg.laminar {
            st.nu_t = vec![0.0; n];
            return;
        }
        for v in st.k.iter_mut() {
            *v = v.max(self.cfg.k_floor);
        }
        for v in st.eps.iter_mut() {
            *v = v.max(self.cfg.eps_floor);
        }
        st.eps[0] = self.wall_eps(st.k[0], 0);
        st.eps[n - 1] = self.wall_eps(st.k[n - 1], n - 1);
        st.nu_t = self.nu_t(&st.k, &st.eps);
    }

    /// Local pseudo-time steps from the diagonal stiffness of each equation.
    fn local_steps(&self, st: &RansState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let cfg = self.cfg;
        let cfl = cfg.relax.cfl;
        let nu = self.nu;
        let nu_t = &st.nu_t;
        // the network stress acts as an extra viscosity dS/d(du/dy) in the momentum rows
        let slope = self.stress_slope(st);
        let visc: Vec<f64> = (0..n).map(|c| nu + nu_t[c] + slope[c].abs()).collect();
        let tu = (1..n)
            .map(|j| {
                let d = (visc[j - 1] / self.dy[j - 1] + visc[j] / self.dy[j]) / self.dc[j - 1];
                cfl / d
            })
            .collect();
        let diff = |c: usize, sigma: f64| {
            let w = if c == 0 { self.wall_dist[0] } else { self.dc[c - 1] };
            let e = if c == n - 1 { self.wall_dist[n - 1] } else { self.dc[c] };
            (nu + nu_t[c] / sigma) * (1.0 / w + 1.0 / e) / self.dy[c]
        };
        let tk = (0..n)
            .map(|c| cfl / (diff(c, cfg.sigma_k) + st.eps[c] / st.k[c]))
            .collect();
        let te = (0..n)
            .map(|c| cfl / (diff(c, cfg.sigma_eps) + 2.0 * cfg.c_2eps * st.eps[c] / st.k[c]))
            .collect();
        (tu, tk, te)
    }

    /// Unknowns as one vector `[u_1..u_{n-1}, k, eps]`, or just `u` when laminar.
    pub fn pack(&self, st: &RansState) -> Vec<f64> {
        let n = self.n();
        let mut x = st.u_bar[1..n].to_vec();
        if !self.cfg.laminar {
            x.extend_from_slice(&st.k);
            x.extend_from_slice(&st.eps);
        }
        x
    }

    pub fn unpack(&self, x: &[f64], st: &mut RansState) {
        let n = self.n();
        st.u_bar[1..n].copy_from_slice(&x[..n - 1]);
        if !self.cfg.laminar {
            st.k.copy_from_slice(&x[n - 1..2 * n - 1]);
            st.eps.copy_from_slice(&x[2 * n - 1..3 * n - 1]);
        }
        st.nu_t = self.nu_t(&st.k, &st.eps);
    }

    pub fn pack_residual(&self, r: &Residual) -> Vec<f64> {
        let mut v = r.u.clone();
        if !self.cfg.laminar {
            v.extend_from_slice(&r.k);
            v.extend_from_slice(&r.eps);
        }
        v
    }

    /// Residual of the packed unknowns with the controller evaluated from the state.
    pub fn residual_vec(&self, x: &[f64], template: &RansState) -> Vec<f64> {
        let mut st = template.clone();
        self.unpack(x, &mut st);
        self.pack_residual(&self.residual(&st, None))
    }

    /// Central finite-difference Jacobian of [`Ctx::residual_vec`].
    pub fn jacobian(&self, st: &RansState) -> DMatrix<f64> {
        let x0 = self.pack(st);
        let m = x0.len();
        let mut jac = DMatrix::zeros(m, m);
        let mut x = x0.clone();
        for i in 0..m {
            let h = 1e-6 * x0[i].abs().max(1e-8);
            x[i] = x0[i] + h;
            let rp = self.residual_vec(&x, st);
            x[i] = x0[i] - h;
            let rm = self.residual_vec(&x, st);
            for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                jac[(row, i)] = (a - b) / (2.0 * h);
            }
            x[i] = x0[i];
        }
        jac
    }
}

/// Residual of `state` under `config`, with the optional closure network.
pub fn rans_residual(state: &RansState, config: &RansConfig, net: Option<&ClosureNet>) -> Result<Residual> {
    let ctx = Ctx::new(config, net)?;
    let r = ctx.residual(state, None);
    if !r.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite channel residual (dpdx = {}, max k = {:e}, max eps = {:e})",
            r.dpdx,
            state.k.iter().fold(0.0f64, |m, v| m.max(*v)),
            state.eps.iter().fold(0.0f64, |m, v| m.max(*v))
        )));
    }
    Ok(r)
}

/// Discrete Poiseuille profile with unit trapezoid bulk velocity, `nu_t = 0`.
pub fn laminar_state(config: &RansConfig) -> Result<RansState> {
    let grid = config.grid()?;
    let n = grid.n_y;
    let delta = config.delta;
    let shape: Vec<f64> = grid.faces.iter().map(|y| delta * delta - y * y).collect();
    let w = grid.face_weights();
    let bulk = w.iter().zip(&shape).map(|(w, s)| w * s).sum::<f64>() / (2.0 * delta);
    let mut u_bar: Vec<f64> = shape.iter().map(|s| config.u_bulk * s / bulk).collect();
    u_bar[0] = 0.0;
    u_bar[n] = 0.0;
    // u = -(dpdx / (2 rho nu)) (delta^2 - y^2)
    let dpdx = -2.0 * config.rho * config.nu() * config.u_bulk / bulk;
    Ok(RansState {
        u_bar,
        k: vec![config.k_floor; n],
        eps: vec![config.eps_floor; n],
        nu_t: vec![0.0; n],
        dpdx,
        residual_norm: f64::INFINITY,
        steps: 0,
    })
}

/// Laminar velocity with a uniform turbulence guess, the relaxation starting point.
pub fn initial_state(config: &RansConfig) -> Result<RansState> {
    let mut st = laminar_state(config)?;
    if !config.laminar {
        let k0 = 5e-3 * config.u_bulk * config.u_bulk;
        let ell = 0.1 * config.delta;
        let e0 = config.c_mu.powf(0.75) * k0.powf(1.5) / ell;
        st.k.fill(k0);
        st.eps.fill(e0);
    }
    let ctx = Ctx::new(config, None)?;
    ctx.project(&mut st);
    Ok(st)
}

/// Advance `steps` RK4 pseudo-time steps with local time stepping. The pressure
/// gradient is refreshed from the controller once per step.
pub fn relax(state: &RansState, config: &RansConfig, net: Option<&ClosureNet>, steps: usize) -> Result<RansState> {
    let ctx = Ctx::new(config, net)?;
    relax_ctx(&ctx, state, steps, 0.0)
}

fn relax_ctx(ctx: &Ctx, state: &RansState, steps: usize, floor: f64) -> Result<RansState> {
    let mut st = state.clone();
    ctx.project(&mut st);
    let r0 = ctx.residual(&st, None);
    let mut norm = r0.max_norm();
    let start = norm.max(1e-300);
    st.residual_norm = norm;
    for _ in 0..steps {
        if norm <= floor {
            break;
        }
        let dpdx = ctx.controller(&st, &ctx.fluxes(&st, &st.nu_t, &ctx.dudy(&st.u_bar)));
        let (tu, tk, te) = ctx.local_steps(&st);
        let stage = |s: &RansState| -> Residual { ctx.residual(s, Some(dpdx)) };
        let add = |base: &RansState, r: &Residual, a: f64| -> RansState {
            let mut s = base.clone();
            let n = ctx.n();
            for j in 1..n {
                s.u_bar[j] += a * tu[j - 1] * r.u[j - 1];
            }
            for c in 0..n {
                s.k[c] += a * tk[c] * r.k[c];
                s.eps[c] += a * te[c] * r.eps[c];
            }
            ctx.project(&mut s);
            s
        };
        let k1 = stage(&st);
        let s2 = add(&st, &k1, 0.5);
        let k2 = stage(&s2);
        let s3 = add(&st, &k2, 0.5);
        let k3 = stage(&s3);
        let s4 = add(&st, &k3, 1.0);
        let k4 = stage(&s4);
        let comb = Residual {
            u: (0..k1.u.len())
                .map(|i| (k1.u[i] + 2.0 * k2.u[i] + 2.0 * k3.u[i] + k4.u[i]) / 6.0)
                .collect(),
            k: (0..k1.k.len())
                .map(|i| (k1.k[i] + 2.0 * k2.k[i] + 2.0 * k3.k[i] + k4.k[i]) / 6.0)
                .collect(),
            eps: (0..k1.eps.len())
                .map(|i| (k1.eps[i] + 2.0 * k2.eps[i] + 2.0 * k3.eps[i] + k4.eps[i]) / 6.0)
                .collect(),
            dpdx,
        };
        st = add(&st, &comb, 1.0);
        st.dpdx = dpdx;
        st.steps += 1;
        let r = ctx.residual(&st, None);
        if !r.is_finite() {
            return Err(Error::Numeric(format!("non-finite residual after {} relaxation steps", st.steps)));
        }
        norm = r.max_norm();
        st.residual_norm = norm;
        st.dpdx = r.dpdx;
        if norm > ctx.cfg.relax.divergence_factor * start {
            return Err(Error::Numeric(format!(
                "relaxation diverged: residual grew from {start:e} to {norm:e} in {} steps",
                st.steps
            )));
        }
    }
    Ok(st)
}

/// Newton iterations on the packed residual with a finite-difference Jacobian.
pub(crate) fn newton(ctx: &Ctx, state: &RansState, iters: usize, floor: f64) -> Result<RansState> {
    let mut st = state.clone();
    for _ in 0..iters {
        let r = ctx.residual(&st, None);
        st.residual_norm = r.max_norm();
        st.dpdx = r.dpdx;
        if st.residual_norm <= floor {
            break;
        }
        let jac = ctx.jacobian(&st);
        let rhs = DVector::from_vec(ctx.pack_residual(&r));
        let dx = solve_shifted(jac, &rhs)?;
        let x0 = ctx.pack(&st);
        // damped step: halve until the residual does not grow
        let mut a = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let x: Vec<f64> = x0.iter().zip(dx.iter()).map(|(x, d)| x - a * d).collect();
            let mut trial = st.clone();
            ctx.unpack(&x, &mut trial);
            ctx.project(&mut trial);
            let rt = ctx.residual(&trial, None);
            if rt.is_finite() && rt.max_norm() < st.residual_norm {
                trial.residual_norm = rt.max_norm();
                trial.dpdx = rt.dpdx;
                st = trial;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(st)
}

/// LU solve, retried with a small diagonal shift when the matrix is singular.
pub(crate) fn solve_shifted(mut m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(x) = m.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    log::warn!("singular channel Jacobian; regularizing the diagonal by 1e-10");
    for i in 0..m.nrows() {
        m[(i, i)] += 1e-10;
    }
    m.lu()
        .solve(rhs)
        .ok_or_else(|| Error::Numeric("channel Jacobian singular after regularization".into()))
}

/// Relax until the residual floor is met, then polish with Newton.
pub fn converge(state: &RansState, config: &RansConfig, net: Option<&ClosureNet>) -> Result<RansState> {
    let ctx = Ctx::new(config, net)?;
    converge_ctx(&ctx, state)
}

pub(crate) fn converge_ctx(ctx: &Ctx, state: &RansState) -> Result<RansState> {
    let rc = &ctx.cfg.relax;
    // Newton straight away only from a warm start: from the initial guess it can
    // land on the turbulence-free root of the k-eps system
    let mut st = state.clone();
    st.residual_norm = ctx.residual(&st, None).max_norm();
    if st.residual_norm <= rc.newton_switch {
        st = newton(ctx, &st, rc.newton_steps, rc.newton_floor)?;
        if st.residual_norm <= rc.residual_floor {
            return Ok(st);
        }
    }
    // relax towards the Newton basin, halving the pseudo-time step on divergence
    let mut cfg = ctx.cfg.clone();
    let mut last = None;
    for _ in 0..4 {
        let c = Ctx { cfg: &cfg, ..ctx.clone() };
        match relax_ctx(&c, state, rc.max_steps, rc.newton_switch) {
            Ok(r) => {
                let mut polished = newton(&c, &r, rc.newton_steps, rc.newton_floor)?;
                if polished.residual_norm > rc.residual_floor {
                    polished = relax_ctx(&c, &polished, rc.max_steps, rc.residual_floor)?;
                }
                polished.steps = r.steps.max(polished.steps);
                st = polished;
                break;
            }
            Err(e) if e.is_numeric() => {
                log::debug!("relaxation failed at cfl {}: {e}", cfg.relax.cfl);
                cfg.relax.cfl *= 0.5;
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(e) = last {
        if !(st.residual_norm <= rc.residual_floor) {
            return Err(e);
        }
    }
    if !(st.residual_norm <= rc.residual_floor) {
        return Err(Error::Numeric(format!(
            "channel solve did not converge: residual {:e} after {} relaxation steps",
            st.residual_norm, st.steps
        )));
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laminar() -> RansConfig {
        RansConfig {
            laminar: true,
            ..RansConfig::default()
        }
    }

    #[test]
    fn parabola_is_discrete_steady_state() {
        let cfg = laminar();
        let st = laminar_state(&cfg).unwrap();
        let r = rans_residual(&st, &cfg, None).unwrap();
        assert!(r.u.iter().all(|v| v.abs() <= 1e-10), "{}", r.max_norm());
        assert!((r.dpdx - st.dpdx).abs() < 1e-12);
    }

    #[test]
    fn zero_steps_is_identity() {
        let cfg = RansConfig::default();
        let st = initial_state(&cfg).unwrap();
        let out = relax(&st, &cfg, None, 0).unwrap();
        assert_eq!(out.u_bar, st.u_bar);
        assert_eq!(out.k, st.k);
        assert_eq!(out.eps, st.eps);
    }

    #[test]
    fn floor_state_residual_is_finite() {
        let cfg = RansConfig::default();
        let mut st = laminar_state(&cfg).unwrap();
        st.k.fill(cfg.k_floor);
        st.eps.fill(cfg.eps_floor);
        let r = rans_residual(&st, &cfg, None).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn turbulent_solve_converges_symmetric_with_unit_bulk() {
        let cfg = RansConfig::default();
        let st = converge(&initial_state(&cfg).unwrap(), &cfg, None).unwrap();
        assert!(st.residual_norm <= cfg.relax.residual_floor);
        let r = rans_residual(&st, &cfg, None).unwrap();
        assert!(r.max_norm() <= cfg.relax.residual_floor);
        let g = cfg.grid().unwrap();
        let bulk = g.integrate_faces(&st.u_bar).unwrap() / 2.0;
        assert!((0.99..=1.01).contains(&bulk), "{bulk}");
        let n = cfg.n_y;
        let umax = st.u_bar.iter().cloned().fold(0.0, f64::max);
        for j in 0..=n {
            assert!((st.u_bar[j] - st.u_bar[n - j]).abs() <= 1e-6 * umax);
        }
        for c in 0..n {
            assert!((st.k[c] - st.k[n - 1 - c]).abs() <= 1e-6 * st.k[c].abs().max(1e-12));
        }
        assert!(st.k.iter().all(|&k| k >= cfg.k_floor));
        assert!(st.eps.iter().all(|&e| e >= cfg.eps_floor));
        // turbulence survives: the laminar root is not selected
        assert!(st.nu_t.iter().cloned().fold(0.0, f64::max) > cfg.nu());
    }

    #[test]
    fn zero_network_matches_plain_closure() {
        let cfg = RansConfig::default();
        let net = ClosureNet::new(Default::default(), 1);
        let st = initial_state(&cfg).unwrap();
        let a = relax(&st, &cfg, None, 50).unwrap();
        let b = relax(&st, &cfg, Some(&net), 50).unwrap();
        assert_eq!(a.u_bar, b.u_bar);
        assert_eq!(a.k, b.k);
    }
}
