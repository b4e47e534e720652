use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{channel_grid, ChannelGrid};

/// Pseudo-time relaxation controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    /// Local pseudo-time step as a fraction of each unknown's stiffness limit.
    pub cfl: f64,
    /// RK4 step budget for a full convergence.
    pub max_steps: usize,
    /// Max-norm residual at which a state counts as converged.
    pub residual_floor: f64,
    /// Newton iterations allowed after relaxation for tight convergence.
    pub newton_steps: usize,
    /// Residual reached by the Newton polish.
    pub newton_floor: f64,
    /// Relaxation hands over to Newton below this residual.
    pub newton_switch: f64,
    /// Proportional gain of the bulk-velocity controller.
    pub gain: f64,
    /// Abort when the residual grows by this factor over its initial value.
    pub divergence_factor: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            cfl: 0.4,
            max_steps: 50_000,
            residual_floor: 1e-8,
            newton_steps: 30,
            newton_floor: 1e-12,
            newton_switch: 1e-4,
            gain: 0.05,
            divergence_factor: 1e6,
        }
    }
}

/// One channel-flow case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansConfig {
    pub re: f64,
    pub delta: f64,
    pub rho: f64,
    pub u_bulk: f64,
    pub c_mu: f64,
    pub sigma_k: f64,
    pub sigma_eps: f64,
    pub c_1eps: f64,
    pub c_2eps: f64,
    pub c_r: f64,
    pub n_y: usize,
    pub eta: f64,
    pub k_floor: f64,
    pub eps_floor: f64,
    /// Laminar run: eddy viscosity fixed at zero and k, ε frozen.
    pub laminar: bool,
    pub relax: RelaxConfig,
}

impl Default for RansConfig {
    fn default() -> Self {
        RansConfig {
            re: 6001.0,
            delta: 1.0,
            rho: 1.0,
            u_bulk: 1.0,
            c_mu: 0.09,
            sigma_k: 1.0,
            sigma_eps: 1.3,
            c_1eps: 1.44,
            c_2eps: 1.92,
            c_r: 6001.0,
            n_y: 32,
            eta: 0.995,
            k_floor: 1e-10,
            eps_floor: 1e-10,
            laminar: false,
            relax: RelaxConfig::default(),
        }
    }
}

impl RansConfig {
    pub fn with_re(re: f64) -> Self {
        RansConfig {
            re,
            ..RansConfig::default()
        }
    }

    /// `nu = 2 delta U_b / Re`
    pub fn nu(&self) -> f64 {
        2.0 * self.delta * self.u_bulk / self.re
    }

    pub fn grid(&self) -> Result<ChannelGrid> {
        channel_grid(self.n_y, self.delta, self.eta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("re", self.re),
            ("delta", self.delta),
            ("rho", self.rho),
            ("u_bulk", self.u_bulk),
            ("c_mu", self.c_mu),
            ("sigma_k", self.sigma_k),
            ("sigma_eps", self.sigma_eps),
            ("c_1eps", self.c_1eps),
            ("c_2eps", self.c_2eps),
            ("c_r", self.c_r),
            ("k_floor", self.k_floor),
            ("eps_floor", self.eps_floor),
            ("cfl", self.relax.cfl),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_y < 8 {
            return Err(Error::InvalidGrid(format!("channel needs at least 8 cells, got {}", self.n_y)));
        }
        Ok(())
    }
}
