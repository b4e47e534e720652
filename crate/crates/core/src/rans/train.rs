use std::io::Write;

use serde::{Deserialize, Serialize};

use super::adjoint::{rans_grad, rans_objective};
use super::config::RansConfig;
use super::diagnostics::{synth_target, TargetProfile};
use super::net::{ClosureNet, NetShape, Standardizer};
use super::solver::{converge, initial_state, relax, RansState};
use crate::error::{Error, Result};
use crate::par;

/// Closure calibration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansTrainConfig {
    /// Case settings shared by every Reynolds number; `re` is overridden.
    pub base: RansConfig,
    pub train_re: Vec<f64>,
    pub test_re: Vec<f64>,
    pub shape: NetShape,
    pub seed: u64,
    pub iterations: usize,
    /// Pseudo-time steps taken per case before each gradient.
    pub relax_steps: usize,
    pub learning_rate: f64,
    /// The rate is multiplied by `decay` every `decay_every` iterations.
    pub decay: f64,
    pub decay_every: usize,
}

impl Default for RansTrainConfig {
    fn default() -> Self {
        RansTrainConfig {
            base: RansConfig::default(),
            train_re: vec![6001.0, 12000.0, 18000.0],
            test_re: vec![9000.0, 24000.0],
            shape: NetShape::default(),
            seed: 0,
            iterations: 60,
            relax_steps: 100,
            learning_rate: 0.1,
            decay: 0.5,
            decay_every: 30,
        }
    }
}

impl RansTrainConfig {
    pub fn case(&self, re: f64) -> RansConfig {
        RansConfig { re, ..self.base.clone() }
    }

    pub fn rate_at(&self, iter: usize) -> f64 {
        let every = self.decay_every.max(1);
        self.learning_rate * self.decay.powi((iter / every) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.train_re.is_empty() {
            return Err(Error::InvalidParameter("no training Reynolds numbers".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.decay > 0.0) {
            return Err(Error::InvalidParameter("learning rate and decay must be positive".into()));
        }
        for &re in self.train_re.iter().chain(&self.test_re) {
            self.case(re).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RansTrainRecord {
    pub iteration: usize,
    pub objective: f64,
    pub per_re: Vec<f64>,
    pub grad_norm: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RansTrainHistory {
    pub records: Vec<RansTrainRecord>,
}

impl RansTrainHistory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,J,grad_norm,rate")?;
        for r in &self.records {
            writeln!(out, "{},{:.10e},{:.10e},{:.6e}", r.iteration, r.objective, r.grad_norm, r.rate)?;
        }
        Ok(())
    }
}

/// Trained network and the before/after objectives per Reynolds number.
#[derive(Debug, Clone)]
pub struct RansTrainResult {
    pub net: ClosureNet,
    pub history: RansTrainHistory,
    pub best_iteration: usize,
    pub stopped_early: bool,
    pub baseline_train: Vec<f64>,
    pub trained_train: Vec<f64>,
    pub baseline_test: Vec<f64>,
    pub trained_test: Vec<f64>,
    pub train_states: Vec<RansState>,
    pub test_states: Vec<RansState>,
}

impl RansTrainResult {
    pub fn write_summary_csv<W: Write>(&self, cfg: &RansTrainConfig, mut out: W) -> Result<()> {
        writeln!(out, "Re,split,J_baseline,J_trained")?;
        for (i, re) in cfg.train_re.iter().enumerate() {
            writeln!(out, "{re},train,{:.10e},{:.10e}", self.baseline_train[i], self.trained_train[i])?;
        }
        for (i, re) in cfg.test_re.iter().enumerate() {
            writeln!(out, "{re},test,{:.10e},{:.10e}", self.baseline_test[i], self.trained_test[i])?;
        }
        Ok(())
    }
}

/// Synthetic law-of-the-wall targets for each Reynolds number.
pub fn synthetic_targets(cfg: &RansTrainConfig, res: &[f64]) -> Result<Vec<TargetProfile>> {
    res.iter().map(|&re| synth_target(&cfg.case(re))).collect()
}

fn baseline(cfg: &RansTrainConfig, res: &[f64]) -> Result<Vec<RansState>> {
    par::map_slice(res, |&re| {
        let case = cfg.case(re);
        converge(&initial_state(&case)?, &case, None)
    })
    .into_iter()
    .collect()
}

fn objectives(cfg: &RansTrainConfig, res: &[f64], states: &[RansState], targets: &[TargetProfile]) -> Result<Vec<f64>> {
    res.iter()
        .zip(states)
        .zip(targets)
        .map(|((&re, st), t)| rans_objective(st, &cfg.case(re), t))
        .collect()
}

/// Solve every case with `net`, warm-started from `states`.
fn solve_all(cfg: &RansTrainConfig, res: &[f64], states: &[RansState], net: &ClosureNet) -> Result<Vec<RansState>> {
    let jobs: Vec<(f64, &RansState)> = res.iter().copied().zip(states).collect();
    par::map_slice(&jobs, |&(re, st)| {
        let case = cfg.case(re);
        let st = relax(st, &case, Some(net), cfg.relax_steps)?;
        converge(&st, &case, Some(net))
    })
    .into_iter()
    .collect()
}

/// Gradient descent on the summed objective over the training cases. A failed
/// solve or an objective blow-up ends training at the best parameters seen.
pub fn train_rans(
    cfg: &RansTrainConfig,
    train_targets: &[TargetProfile],
    test_targets: &[TargetProfile],
) -> Result<RansTrainResult> {
    cfg.validate()?;
    if train_targets.len() != cfg.train_re.len() || test_targets.len() != cfg.test_re.len() {
        return Err(Error::InvalidParameter("one target profile is needed per Reynolds number".into()));
    }
    let base_train = baseline(cfg, &cfg.train_re)?;
    let base_test = baseline(cfg, &cfg.test_re)?;
    let baseline_train = objectives(cfg, &cfg.train_re, &base_train, train_targets)?;
    let baseline_test = objectives(cfg, &cfg.test_re, &base_test, test_targets)?;

    let mut net = ClosureNet::new(cfg.shape, cfg.seed);
    let samples: Vec<[f64; 4]> = base_train
        .iter()
        .zip(&cfg.train_re)
        .flat_map(|(st, &re)| feature_samples(st, &cfg.case(re)))
        .collect();
    net.standardizer = Standardizer::from_samples(&samples);

    let mut states = base_train.clone();
    let mut best = (f64::INFINITY, net.clone(), states.clone(), 0usize);
    let mut history = RansTrainHistory::default();
    let mut stopped_early = false;
    for iter in 0..=cfg.iterations {
        let solved = if iter == 0 {
            Ok(states.clone())
        } else {
            solve_all(cfg, &cfg.train_re, &states, &net)
        };
        let solved = match solved {
            Ok(s) => s,
            Err(e) if e.is_numeric() => {
                log::warn!("closure training stopped at iteration {iter}: {e}");
                stopped_early = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let jobs: Vec<(f64, &RansState, &TargetProfile)> = cfg
            .train_re
            .iter()
            .zip(&solved)
            .zip(train_targets)
            .map(|((&re, st), t)| (re, st, t))
            .collect();
        let grads = match par::map_slice(&jobs, |&(re, st, t)| rans_grad(st, &cfg.case(re), &net, t))
            .into_iter()
            .collect::<Result<Vec<_>>>()
        {
            Ok(g) => g,
            Err(e) if e.is_numeric() => {
                log::warn!("closure training stopped at iteration {iter}: {e}");
                stopped_early = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let per_re: Vec<f64> = grads.iter().map(|g| g.objective).collect();
        let total: f64 = per_re.iter().sum();
        let mut grad = vec![0.0; net.n_params()];
        for g in &grads {
            for (a, b) in grad.iter_mut().zip(&g.grad) {
                *a += b;
            }
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let rate = cfg.rate_at(iter);
        history.records.push(RansTrainRecord {
            iteration: iter,
            objective: total,
            per_re,
            grad_norm,
            rate,
        });
        log::debug!("closure iteration {iter}: J = {total:.6e}, |grad| = {grad_norm:.3e}");
        if !total.is_finite() || total > 10.0 * best.0 {
            stopped_early = true;
            break;
        }
        if total < best.0 {
            best = (total, net.clone(), solved.clone(), iter);
        }
        states = solved;
        if iter == cfg.iterations {
            break;
        }
        let p: Vec<f64> = net.params.iter().zip(&grad).map(|(p, g)| p - rate * g).collect();
        net.set_params(&p)?;
    }

    let (_, net, train_states, best_iteration) = best;
    let trained_train = objectives(cfg, &cfg.train_re, &train_states, train_targets)?;
    let test_states = match solve_all(cfg, &cfg.test_re, &base_test, &net) {
        Err(e) if e.is_numeric() => {
            log::warn!("warm-started evaluation failed ({e}); solving from the initial state");
            let fresh = cfg
                .test_re
                .iter()
                .map(|&re| initial_state(&cfg.case(re)))
                .collect::<Result<Vec<_>>>()?;
            solve_all(cfg, &cfg.test_re, &fresh, &net)?
        }
        r => r?,
    };
    let trained_test = objectives(cfg, &cfg.test_re, &test_states, test_targets)?;
    Ok(RansTrainResult {
        net,
        history,
        best_iteration,
        stopped_early,
        baseline_train,
        trained_train,
        baseline_test,
        trained_test,
        train_states,
        test_states,
    })
}

/// Network inputs `(y, k, eps, du/dy)` at the cell centres of `state`.
pub fn feature_samples(state: &RansState, config: &RansConfig) -> Vec<[f64; 4]> {
    let Ok(grid) = config.grid() else {
        return Vec::new();
    };
    (0..grid.n_y)
        .map(|c| {
            let dudy = (state.u_bar[c + 1] - state.u_bar[c]) / grid.cell_width(c);
            [grid.centers[c], state.k[c], state.eps[c], dudy]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_starts_at_baseline() {
        let cfg = RansTrainConfig {
            train_re: vec![6001.0],
            test_re: vec![],
            iterations: 2,
            ..RansTrainConfig::default()
        };
        let tr = synthetic_targets(&cfg, &cfg.train_re).unwrap();
        let r = train_rans(&cfg, &tr, &[]).unwrap();
        assert_eq!(r.history.records[0].objective, r.baseline_train[0]);
        assert!(r.trained_train[0] <= r.baseline_train[0]);
        assert_eq!(r.history.records.len(), 3);
    }

    #[test]
    fn rate_schedule_is_piecewise_constant() {
        let cfg = RansTrainConfig {
            learning_rate: 1.0,
            decay: 0.5,
            decay_every: 10,
            ..RansTrainConfig::default()
        };
        assert_eq!(cfg.rate_at(0), 1.0);
        assert_eq!(cfg.rate_at(9), 1.0);
        assert_eq!(cfg.rate_at(10), 0.5);
        assert_eq!(cfg.rate_at(25), 0.25);
    }

    #[test]
    fn target_count_must_match() {
        let cfg = RansTrainConfig::default();
        assert!(train_rans(&cfg, &[], &[]).is_err());
    }
}
