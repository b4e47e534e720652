//! Explicit Euler discretization of the parameter gradient flow with an adjoint
//! gradient, objective history and a monotonicity watchdog.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble, DiscreteOperator};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Grid, GridSpec};
use crate::network::{
    check_beta, grads_from_integrals, init, Activation, ActivationTable, InitDistribution, Law,
    ParamGrad, ParamSet, UnitIntegrals,
};
use crate::objective::{adjoint_rhs, cosine_basis, default_target, objective, MomentBasis, ObjectiveMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub steps: usize,
    pub mode: ObjectiveMode,
    pub n_hidden: usize,
    pub grid: GridSpec,
    pub mu: f64,
    pub seed: u64,
    pub monotonicity_tol: f64,
    pub activation: Activation,
    pub init: Law,
    pub n_moments: usize,
    pub j_floor: f64,
    pub grad_floor: f64,
    pub max_halvings: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1000.0,
            beta: 2.0 / 3.0,
            dt: 1e-2,
            steps: 100_000,
            mode: ObjectiveMode::Weak,
            n_hidden: 50,
            grid: GridSpec { dim: 1, n: 129 },
            mu: 0.1,
            seed: 0,
            monotonicity_tol: 1e-12,
            activation: Activation::Tanh,
            init: Law::default(),
            n_moments: 10,
            j_floor: 1e-14,
            grad_floor: 1e-12,
            max_halvings: 10,
        }
    }
}

impl TrainConfig {
    /// `alpha^N = alpha * N^{2 beta - 1}`
    pub fn effective_rate(&self) -> f64 {
        self.alpha * (self.n_hidden as f64).powf(2.0 * self.beta - 1.0)
    }

    pub fn init_distribution(&self) -> InitDistribution {
        InitDistribution {
            law: self.init,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        let positive = [("alpha", self.alpha), ("dt", self.dt), ("mu", self.mu)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_hidden == 0 {
            return Err(Error::InvalidParameter("n_hidden must be positive".into()));
        }
        if !(self.monotonicity_tol >= 0.0) {
            return Err(Error::InvalidParameter("monotonicity_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Discretized PDE, moment basis and target shared by every run on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub op: DiscreteOperator,
    pub basis: MomentBasis,
    pub h: Field,
}

impl Problem {
    pub fn new(grid: Grid, mu: f64, n_moments: usize, h: Field) -> Result<Self> {
        crate::error::check_len(grid.len(), h.len())?;
        let basis = cosine_basis(&grid, n_moments)?;
        let op = assemble(&grid, mu)?;
        Ok(Problem { op, basis, h })
    }

    /// Built-in target for the configured grid.
    pub fn from_config(config: &TrainConfig) -> Result<Self> {
        let grid = config.grid.build()?;
        let h = default_target(&grid);
        Problem::new(grid, config.mu, config.n_moments, h)
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }
}

/// Everything computed from one parameter vector.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub g: Field,
    pub u: Field,
    pub u_hat: Field,
    pub j: f64,
    pub integrals: UnitIntegrals,
    pub grad: ParamGrad,
}

/// One forward solve, one adjoint solve and one gradient assembly.
pub fn evaluate(params: &ParamSet, problem: &Problem, mode: ObjectiveMode) -> Result<Evaluation> {
    let grid = problem.grid();
    let table = ActivationTable::new(params, grid)?;
    let g = table.output(params);
    let u = problem.op.solve(&g)?;
    let j = objective(&u, &problem.h, &problem.basis, mode)?;
    let rhs = adjoint_rhs(&u, &problem.h, &problem.basis, mode)?;
    let u_hat = problem.op.solve_adjoint(&rhs)?;
    let integrals = table.integrals(params, grid, &u_hat)?;
    let grad = grads_from_integrals(params, &integrals);
    Ok(Evaluation {
        g,
        u,
        u_hat,
        j,
        integrals,
        grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRecord {
    pub step: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub dt: f64,
    pub seconds: f64,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    ObjectiveFloor,
    GradientFloor,
    /// Every halving of the step still increased the objective.
    Watchdog,
}

/// State before and after the most recent accepted step.
#[derive(Debug, Clone)]
pub struct StepSnapshot {
    pub j_before: f64,
    pub j_after: f64,
    pub dt: f64,
    pub alpha: f64,
    pub params_before: ParamSet,
    pub integrals_before: UnitIntegrals,
    pub grad_norm_sq_before: f64,
    pub effective_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ParamSet,
    pub step: usize,
    pub dt: f64,
    pub history: Vec<HistoryRecord>,
    pub current: Evaluation,
    pub last: Option<StepSnapshot>,
    pub stop: Option<StopReason>,
    started: Instant,
}

impl TrainState {
    /// Draw initial parameters from the configured distribution.
    pub fn new(config: &TrainConfig, problem: &Problem) -> Result<Self> {
        config.validate()?;
        let params = init(
            config.n_hidden,
            problem.grid().dim(),
            config.beta,
            config.activation,
            &config.init_distribution(),
        )?;
        TrainState::from_params(params, config, problem)
    }

    pub fn from_params(params: ParamSet, config: &TrainConfig, problem: &Problem) -> Result<Self> {
        let started = Instant::now();
        let current = evaluate(&params, problem, config.mode)?;
        check_finite(&current, 0, config.dt)?;
        let history = vec![HistoryRecord {
            step: 0,
            j: current.j,
            grad_norm: current.grad.norm(),
            dt: config.dt,
            seconds: 0.0,
        }];
        Ok(TrainState {
            params,
            step: 0,
            dt: config.dt,
            history,
            current,
            last: None,
            stop: None,
            started,
        })
    }

    pub fn objective(&self) -> f64 {
        self.current.j
    }

    /// Write the history as CSV: `step,J,grad_norm,dt,seconds`.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        write_history_csv(&self.history, out)
    }
}

pub fn write_history_csv<W: Write>(history: &[HistoryRecord], mut out: W) -> Result<()> {
    writeln!(out, "step,J,grad_norm,dt,seconds")?;
    for r in history {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e},{:.6}", r.step, r.j, r.grad_norm, r.dt, r.seconds)?;
    }
    Ok(())
}

fn check_finite(e: &Evaluation, step: usize, dt: f64) -> Result<()> {
    if e.j.is_finite() && e.grad.is_finite() && e.u.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "non-finite state at step {step} (dt = {dt:e}): J = {}, |g|_max = {:e}, |u_hat|_max = {:e}",
            e.j,
            e.g.max_abs(),
            e.u_hat.max_abs()
        )))
    }
}

/// Outcome of [`train_step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    Stopped(StopReason),
}

/// Advance by one Euler step `theta <- theta - dt * alpha^N * grad J`. The watchdog
/// halves `dt` and retries while the objective rises by more than the tolerance.
pub fn train_step(state: &mut TrainState, config: &TrainConfig, problem: &Problem) -> Result<StepStatus> {
    let rate = config.effective_rate();
    let j_old = state.current.j;
    let mut halvings = 0;
    loop {
        let mut trial = state.params.clone();
        trial.descend(&state.current.grad, state.dt * rate);
        let eval = evaluate(&trial, problem, config.mode)?;
        check_finite(&eval, state.step + 1, state.dt)?;
        if eval.j - j_old <= config.monotonicity_tol * j_old.abs() {
            let before = std::mem::replace(&mut state.current, eval);
            let params_before = std::mem::replace(&mut state.params, trial);
            state.step += 1;
            state.last = Some(StepSnapshot {
                j_before: j_old,
                j_after: state.current.j,
                dt: state.dt,
                alpha: config.alpha,
                params_before,
                integrals_before: before.integrals,
                grad_norm_sq_before: before.grad.norm_sq(),
                effective_rate: rate,
            });
            state.history.push(HistoryRecord {
                step: state.step,
                j: state.current.j,
                grad_norm: state.current.grad.norm(),
                dt: state.dt,
                seconds: state.started.elapsed().as_secs_f64(),
            });
            return Ok(StepStatus::Accepted);
        }
        if halvings == config.max_halvings {
            log::warn!(
                "objective kept rising after {halvings} step halvings at step {}; stopping",
                state.step
            );
            state.stop = Some(StopReason::Watchdog);
            return Ok(StepStatus::Stopped(StopReason::Watchdog));
        }
        halvings += 1;
        state.dt *= 0.5;
    }
}

fn stop_reason(state: &TrainState, config: &TrainConfig) -> Option<StopReason> {
    if state.current.j < config.j_floor {
        Some(StopReason::ObjectiveFloor)
    } else if state.current.grad.norm() < config.grad_floor {
        Some(StopReason::GradientFloor)
    } else if state.step >= config.steps {
        Some(StopReason::Budget)
    } else {
        None
    }
}

/// Run from a fresh initialization until a stopping rule fires.
pub fn train(config: &TrainConfig) -> Result<TrainState> {
    let problem = Problem::from_config(config)?;
    train_problem(config, &problem)
}

pub fn train_problem(config: &TrainConfig, problem: &Problem) -> Result<TrainState> {
    let mut state = TrainState::new(config, problem)?;
    run(&mut state, config, problem, |_| {})?;
    Ok(state)
}

/// Step `state` until it stops, calling `observe` after every accepted step.
pub fn run(
    state: &mut TrainState,
    config: &TrainConfig,
    problem: &Problem,
    mut observe: impl FnMut(&TrainState),
) -> Result<StopReason> {
    loop {
        if let Some(r) = state.stop.or_else(|| stop_reason(state, config)) {
            state.stop = Some(r);
            return Ok(r);
        }
        if let StepStatus::Stopped(r) = train_step(state, config, problem)? {
            return Ok(r);
        }
        observe(state);
    }
}

/// Observed and predicted objective rate over the last step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationReport {
    /// `(J_{k+1} - J_k) / dt`
    pub observed: f64,
    /// `-alpha <|∫u_hat sigma|^2 + |∫u_hat c sigma' x|^2 + |∫u_hat c sigma'|^2, mu^N>`
    pub predicted: f64,
    /// The same rate from the gradient, `-alpha^N |grad J|^2`.
    pub from_gradient: f64,
    pub rel_discrepancy: f64,
}

/// Compare the last step's objective change with the continuous dissipation rate.
pub fn dissipation_check(state: &TrainState) -> Option<DissipationReport> {
    let s = state.last.as_ref()?;
    let p = &s.params_before;
    let ints = &s.integrals_before;
    let d = p.dim;
    let mut total = 0.0;
    for i in 0..p.n_hidden {
        let c = p.c[i];
        let xs: f64 = ints.dsig_x[i * d..(i + 1) * d].iter().map(|v| (c * v).powi(2)).sum();
        total += ints.sig[i].powi(2) + xs + (c * ints.dsig[i]).powi(2);
    }
    let predicted = -s.alpha * total / p.n_hidden as f64;
    let observed = (s.j_after - s.j_before) / s.dt;
    let rel_discrepancy = if predicted == 0.0 {
        if observed == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((observed - predicted) / predicted).abs()
    };
    Some(DissipationReport {
        observed,
        predicted,
        from_gradient: -s.effective_rate * s.grad_norm_sq_before,
        rel_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n_hidden: usize, n: usize) -> TrainConfig {
        TrainConfig {
            n_hidden,
            grid: GridSpec { dim: 1, n },
            steps: 50,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn effective_rate_formula() {
        let c = TrainConfig {
            n_hidden: 1000,
            alpha: 2.0,
            beta: 0.75,
            ..TrainConfig::default()
        };
        assert!((c.effective_rate() - 2.0 * 1000f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn one_step_decreases() {
        let cfg = small_config(10, 129);
        let problem = Problem::from_config(&cfg).unwrap();
        let mut st = TrainState::new(&cfg, &problem).unwrap();
        let j0 = st.objective();
        assert_eq!(train_step(&mut st, &cfg, &problem).unwrap(), StepStatus::Accepted);
        assert!(st.objective() < j0);
        assert_eq!(st.history.len(), 2);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let cfg = small_config(4, 33);
        let grid = cfg.grid.build().unwrap();
        let problem = Problem::new(grid.clone(), cfg.mu, cfg.n_moments, Field::zeros(grid.len())).unwrap();
        let mut p = init(4, 1, cfg.beta, cfg.activation, &cfg.init_distribution()).unwrap();
        p.c.iter_mut().for_each(|c| *c = 0.0);
        let mut st = TrainState::from_params(p.clone(), &cfg, &problem).unwrap();
        assert_eq!(st.objective(), 0.0);
        train_step(&mut st, &cfg, &problem).unwrap();
        assert_eq!(st.params, p);
        assert_eq!(st.objective(), 0.0);
        let r = dissipation_check(&st).unwrap();
        assert_eq!((r.observed, r.predicted, r.rel_discrepancy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_and_monotone() {
        let cfg = small_config(8, 65);
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        let ja: Vec<f64> = a.history.iter().map(|r| r.j).collect();
        let jb: Vec<f64> = b.history.iter().map(|r| r.j).collect();
        assert_eq!(ja, jb);
        assert_eq!(a.stop, Some(StopReason::Budget));
        for w in ja.windows(2) {
            assert!(w[1] - w[0] <= 1e-12 * w[0]);
        }
    }

    #[test]
    fn dissipation_identities() {
        let cfg = TrainConfig {
            dt: 1e-4,
            ..small_config(10, 129)
        };
        let problem = Problem::from_config(&cfg).unwrap();
        let mut st = TrainState::new(&cfg, &problem).unwrap();
        train_step(&mut st, &cfg, &problem).unwrap();
        let r = dissipation_check(&st).unwrap();
        assert!(((r.predicted - r.from_gradient) / r.predicted).abs() < 1e-12);
        assert!(r.rel_discrepancy < 0.05, "{r:?}");
    }

    #[test]
    fn history_csv_header() {
        let cfg = small_config(3, 17);
        let st = train(&TrainConfig { steps: 2, ..cfg }).unwrap();
        let mut buf = Vec::new();
        st.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,J,grad_norm,dt,seconds\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            beta: 1.0,
            ..TrainConfig::default()
        };
        assert!(train(&cfg).is_err());
    }
}
