use nalgebra::DVector;
use serde::Serialize;

use super::config::RansConfig;
use super::diagnostics::TargetProfile;
use super::net::ClosureNet;
use super::solver::{solve_shifted, Ctx, RansState};
use crate::error::{check_len, Error, Result};

/// Objective value, parameter gradient and adjoint of one converged case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RansGradient {
    pub objective: f64,
    pub grad: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// `J = 1/2 sum_j w_j (h_j - u_j)^2` with trapezoid weights on the faces.
pub fn rans_objective(state: &RansState, config: &RansConfig, target: &TargetProfile) -> Result<f64> {
    let grid = config.grid()?;
    check_len(grid.faces.len(), target.u.len())?;
    check_len(grid.faces.len(), state.u_bar.len())?;
    let w = grid.face_weights();
    Ok(0.5
        * w.iter()
            .zip(&target.u)
            .zip(&state.u_bar)
            .map(|((w, h), u)| w * (h - u) * (h - u))
            .sum::<f64>())
}

/// Discrete-adjoint gradient of [`rans_objective`] over the network parameters at a
/// converged state.
pub fn rans_grad(
    state: &RansState,
    config: &RansConfig,
    net: &ClosureNet,
    target: &TargetProfile,
) -> Result<RansGradient> {
    let ctx = Ctx::new(config, Some(net))?;
    let objective = rans_objective(state, config, target)?;
    let r = ctx.residual(state, None);
    if !(r.max_norm() <= config.relax.residual_floor) {
        return Err(Error::Numeric(format!(
            "adjoint requires a converged state, residual is {:e}",
            r.max_norm()
        )));
    }
    let n = ctx.n();
    let m = ctx.pack(state).len();
    let w = &ctx.face_w;
    let mut dj = vec![0.0; m];
    for j in 1..n {
        dj[j - 1] = -w[j] * (target.u[j] - state.u_bar[j]);
    }
    let jac = ctx.jacobian(state);
    let lambda = solve_shifted(jac.transpose(), &DVector::from_vec(dj))?;

    // momentum rows depend on the stress S_c through the flux difference and the
    // pressure-gradient controller
    let span = ctx.grid.centers[n - 1] - ctx.grid.centers[0];
    let mut a = vec![0.0; n];
    for j in 1..n {
        let l = lambda[j - 1];
        a[j] -= l / ctx.dc[j - 1];
        a[j - 1] += l / ctx.dc[j - 1];
        a[0] -= l / span;
        a[n - 1] += l / span;
    }
    let dudy = ctx.dudy(&state.u_bar);
    let inputs = ctx.net_inputs(state, &dudy);
    let cr = config.c_r / config.re;
    let mut grad = vec![0.0; net.n_params()];
    for (x, ac) in inputs.iter().zip(&a) {
        net.backprop(x, [-ac, -ac * cr], &mut grad);
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::Numeric("non-finite adjoint gradient".into()));
    }
    Ok(RansGradient {
        objective,
        grad,
        lambda: lambda.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rans::diagnostics::{synth_target, TargetSource};
    use crate::rans::net::{NetShape, Standardizer};
    use crate::rans::solver::{converge, initial_state};
    use crate::rans::train::feature_samples;

    fn setup() -> (RansConfig, ClosureNet, RansState) {
        let cfg = RansConfig::default();
        let base = converge(&initial_state(&cfg).unwrap(), &cfg, None).unwrap();
        let mut net = ClosureNet::new(NetShape { h1: 4, h2: 4 }, 2);
        net.standardizer = Standardizer::from_samples(&feature_samples(&base, &cfg));
        let p: Vec<f64> = net
            .params
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.02 * ((i as f64 * 0.7).sin()))
            .collect();
        net.set_params(&p).unwrap();
        let st = converge(&base, &cfg, Some(&net)).unwrap();
        (cfg, net, st)
    }

    #[test]
    fn target_at_solution_gives_zero_gradient() {
        let (cfg, net, st) = setup();
        let t = TargetProfile {
            re: cfg.re,
            u: st.u_bar.clone(),
            source: TargetSource::File,
        };
        let g = rans_grad(&st, &cfg, &net, &t).unwrap();
        assert_eq!(g.objective, 0.0);
        assert!(g.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_is_linear_in_the_mismatch() {
        let (cfg, net, st) = setup();
        let t = synth_target(&cfg).unwrap();
        let t2 = TargetProfile {
            u: st.u_bar.iter().zip(&t.u).map(|(u, h)| u + 2.0 * (h - u)).collect(),
            ..t.clone()
        };
        let g1 = rans_grad(&st, &cfg, &net, &t).unwrap();
        let g2 = rans_grad(&st, &cfg, &net, &t2).unwrap();
        for (a, b) in g1.grad.iter().zip(&g2.grad) {
            assert!((2.0 * a - b).abs() <= 1e-9 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn gradient_matches_reconverged_differences() {
        let (cfg, net, st) = setup();
        let t = synth_target(&cfg).unwrap();
        let g = rans_grad(&st, &cfg, &net, &t).unwrap();
        for i in [3usize, 17, 40] {
            let h = 1e-4 * net.params[i].abs().max(1e-2);
            let mut jv = [0.0; 2];
            for (s, sign) in [1.0, -1.0].iter().enumerate() {
                let mut n2 = net.clone();
                n2.params[i] += sign * h;
                let sol = converge(&st, &cfg, Some(&n2)).unwrap();
                jv[s] = rans_objective(&sol, &cfg, &t).unwrap();
            }
            let fd = (jv[0] - jv[1]) / (2.0 * h);
            assert!((g.grad[i] - fd).abs() <= 1e-4 * fd.abs(), "{i}: {} vs {fd}", g.grad[i]);
        }
    }

    #[test]
    fn unconverged_state_is_rejected() {
        let cfg = RansConfig::default();
        let st = initial_state(&cfg).unwrap();
        let net = ClosureNet::new(NetShape::default(), 0);
        let t = synth_target(&cfg).unwrap();
        assert!(rans_grad(&st, &cfg, &net, &t).unwrap_err().is_numeric());
    }
}
