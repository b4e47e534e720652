//! Experiments across network widths: sweeps over `N`, pre-limit versus limit
//! comparisons, initialization-gap scaling and the desk-scale decay floor.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::quad_inner;
use crate::limit::{integrate_limit, KernelMatrix, LimitConfig};
use crate::network::{forward, init, measure_pair, ParamSet};
use crate::par;
use crate::trainer::{run, train_problem, train_step, HistoryRecord, Problem, StepStatus, TrainConfig, TrainState};

/// One trained `(N, seed)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub n_hidden: usize,
    pub seed: u64,
    /// `None` when the run failed; see `error`.
    pub final_j: Option<f64>,
    pub steps: usize,
    pub seconds: f64,
    pub error: Option<String>,
    /// Last few objective values.
    pub tail: Vec<f64>,
    #[serde(skip)]
    pub history: Vec<HistoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// `(N, median final J)` in the order of the requested widths.
    pub medians: Vec<(usize, f64)>,
}

const TAIL: usize = 10;

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Train every `(N, seed)` pair from `base`. Failed runs are recorded and skipped.
pub fn sweep_n(base: &TrainConfig, ns: &[usize], seeds: &[u64]) -> Result<SweepResult> {
    if ns.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one width and one seed".into()));
    }
    let problem = Problem::from_config(base)?;
    sweep_problem(base, &problem, ns, seeds)
}

pub fn sweep_problem(base: &TrainConfig, problem: &Problem, ns: &[usize], seeds: &[u64]) -> Result<SweepResult> {
    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let records = par::map_slice(&jobs, |&(n_hidden, seed)| {
        let cfg = TrainConfig {
            n_hidden,
            seed,
            ..base.clone()
        };
        match train_problem(&cfg, problem) {
            Ok(st) => {
                let js: Vec<f64> = st.history.iter().map(|r| r.j).collect();
                SweepRecord {
                    n_hidden,
                    seed,
                    final_j: Some(st.objective()),
                    steps: st.step,
                    seconds: st.history.last().map_or(0.0, |r| r.seconds),
                    error: None,
                    tail: js[js.len().saturating_sub(TAIL)..].to_vec(),
                    history: st.history,
                }
            }
            Err(e) => {
                log::warn!("run N={n_hidden} seed={seed} failed: {e}");
                SweepRecord {
                    n_hidden,
                    seed,
                    final_j: None,
                    steps: 0,
                    seconds: 0.0,
                    error: Some(e.to_string()),
                    tail: Vec::new(),
                    history: Vec::new(),
                }
            }
        }
    });
    let medians = ns
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.n_hidden == n)
                .filter_map(|r| r.final_j)
                .collect();
            (n, median(&mut v))
        })
        .collect();
    Ok(SweepResult { records, medians })
}

impl SweepResult {
    /// Median objective per width, strictly decreasing in the order given.
    pub fn strictly_decreasing(&self) -> bool {
        self.medians.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn median_for(&self, n: usize) -> Option<f64> {
        self.medians.iter().find(|m| m.0 == n).map(|m| m.1)
    }

    /// Table with columns `N,objective` (median over seeds).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,objective")?;
        for (n, j) in &self.medians {
            writeln!(out, "{n},{j:.6e}")?;
        }
        Ok(())
    }

    /// Per-run table `N,seed,objective,steps,seconds,status`.
    pub fn write_records_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,seed,objective,steps,seconds,status")?;
        for r in &self.records {
            let j = r.final_j.map_or_else(String::new, |j| format!("{j:.6e}"));
            let status = r.error.as_deref().map_or("ok".to_string(), |e| format!("\"{}\"", e.replace('"', "'")));
            writeln!(out, "{},{},{},{},{:.3},{}", r.n_hidden, r.seed, j, r.steps, r.seconds, status)?;
        }
        Ok(())
    }
}

/// Seed-averaged distances between the pre-limit run and the limit system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMetrics {
    pub n_hidden: usize,
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    pub err_u_h1: Vec<f64>,
    pub err_uhat_h1: Vec<f64>,
    pub err_g_l2: Vec<f64>,
    /// `Q^N(t) = sqrt(2 J^N_t)`
    pub q: Vec<f64>,
    pub max_err_u_h1: f64,
    pub max_err_uhat_h1: f64,
    pub max_err_g_l2: f64,
    /// `‖g^N_0‖_{L²}`, the part of the distance due to `g_0 = 0` in the limit.
    pub init_gap: f64,
}

impl ComparisonMetrics {
    /// CSV `t,err_u_H1,err_uhat_H1,err_g_L2,Q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,err_u_H1,err_uhat_H1,err_g_L2,Q")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i], self.err_u_h1[i], self.err_uhat_h1[i], self.err_g_l2[i], self.q[i]
            )?;
        }
        Ok(())
    }
}

/// Train width `n_hidden` for `steps` steps under each seed and measure its distance
/// to the limit trajectory built from `kernel` with the same time step.
pub fn compare_prelimit_limit(
    base: &TrainConfig,
    problem: &Problem,
    kernel: &KernelMatrix,
    n_hidden: usize,
    steps: usize,
    seeds: &[u64],
) -> Result<ComparisonMetrics> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("comparison needs at least one seed".into()));
    }
    if (kernel.alpha - base.alpha).abs() > 1e-12 * base.alpha.abs() {
        return Err(Error::InvalidParameter(format!(
            "kernel built with alpha = {} but training uses {}",
            kernel.alpha, base.alpha
        )));
    }
    let lcfg = LimitConfig {
        alpha: base.alpha,
        mu: base.mu,
        grid: base.grid,
        dt: base.dt,
        steps,
        n_moments: base.n_moments,
        mode: base.mode,
        activation: base.activation,
        init: base.init,
        mc_samples: kernel.mc_samples,
        seed: kernel.seed,
        snapshot_every: 1,
        j_floor: 0.0,
        integrator: crate::limit::Integrator::Euler,
    };
    let limit = integrate_limit(&lcfg, kernel, problem)?;
    let grid = problem.grid();
    let w = grid.weights();
    let per_seed = par::map_slice(seeds, |&seed| -> Result<Vec<[f64; 4]>> {
        let cfg = TrainConfig {
            n_hidden,
            seed,
            ..base.clone()
        };
        let mut st = TrainState::new(&cfg, problem)?;
        let mut rows = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let snap = &limit.snapshots[k];
            let e = &st.current;
            let du = e.u.sub(&snap.u);
            let duh = e.u_hat.sub(&snap.u_hat);
            let dg = e.g.sub(&snap.g);
            rows.push([
                grid.h1_norm(&du)?,
                grid.h1_norm(&duh)?,
                quad_inner(&w, &dg, &dg).sqrt(),
                (2.0 * e.j).sqrt(),
            ]);
            if k == steps {
                break;
            }
            if train_step(&mut st, &cfg, problem)? != StepStatus::Accepted || st.dt != base.dt {
                return Err(Error::InvalidParameter(format!(
                    "time mesh mismatch: pre-limit step size changed at step {k} (seed {seed})"
                )));
            }
        }
        Ok(rows)
    });
    let mut sums = vec![[0.0; 4]; steps + 1];
    for rows in per_seed {
        for (s, r) in sums.iter_mut().zip(rows?) {
            for i in 0..4 {
                s[i] += r[i];
            }
        }
    }
    let ns = seeds.len() as f64;
    let col = |i: usize| -> Vec<f64> { sums.iter().map(|r| r[i] / ns).collect() };
    let (err_u_h1, err_uhat_h1, err_g_l2, q) = (col(0), col(1), col(2), col(3));
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(*x));
    Ok(ComparisonMetrics {
        n_hidden,
        seeds: seeds.to_vec(),
        times: (0..=steps).map(|k| k as f64 * base.dt).collect(),
        max_err_u_h1: max(&err_u_h1),
        max_err_uhat_h1: max(&err_uhat_h1),
        max_err_g_l2: max(&err_g_l2),
        init_gap: err_g_l2[0],
        err_u_h1,
        err_uhat_h1,
        err_g_l2,
        q,
    })
}

/// Root-mean-square over seeds of `‖g^N_0‖_{L²}` for each width.
pub fn init_gap(base: &TrainConfig, problem: &Problem, ns: &[usize], seeds: &[u64]) -> Result<Vec<(usize, f64)>> {
    let grid = problem.grid();
    let w = grid.weights();
    ns.iter()
        .map(|&n| {
            let sq = par::map_slice(seeds, |&seed| -> Result<f64> {
                let cfg = TrainConfig {
                    n_hidden: n,
                    seed,
                    ..base.clone()
                };
                let p = init(n, grid.dim(), cfg.beta, cfg.activation, &cfg.init_distribution())?;
                let g = forward(&p, grid)?;
                Ok(quad_inner(&w, &g, &g))
            });
            let total: f64 = sq.into_iter().sum::<Result<f64>>()?;
            Ok((n, (total / seeds.len() as f64).sqrt()))
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Named bounded smooth test function of `(c, w, eta)`.
pub type TestFn = (&'static str, fn(f64, &[f64], f64) -> f64);

/// Test functions for the empirical-measure drift. Each is even under the joint
/// flip `(c, w, eta) -> -(c, w, eta)`; odd ones have zero leading-order drift
/// under a flip-symmetric initialization.
pub fn drift_test_functions() -> Vec<TestFn> {
    vec![
        ("tanh(c)tanh(w/2+eta)", |c, w, e| c.tanh() * (0.5 * w[0] + e).tanh()),
        ("sin(c)sin(w+eta)", |c, w, e| c.sin() * (w[0] + e).sin()),
        ("tanh(c)tanh(eta)", |c, _, e| c.tanh() * e.tanh()),
        ("tanh(c)tanh(w)", |c, w, _| c.tanh() * w[0].tanh()),
        ("sin(c)tanh(w+2eta)", |c, w, e| c.sin() * (w[0] + 2.0 * e).tanh()),
    ]
}

/// Seed-averaged signed change `⟨f, mu^N_T⟩ - ⟨f, mu^N_0⟩` after `steps` steps,
/// one entry per test function.
pub fn measure_drift(
    base: &TrainConfig,
    problem: &Problem,
    n_hidden: usize,
    steps: usize,
    seeds: &[u64],
    fns: &[TestFn],
) -> Result<Vec<f64>> {
    let per_seed = par::map_slice(seeds, |&seed| -> Result<Vec<f64>> {
        let cfg = TrainConfig {
            n_hidden,
            seed,
            steps,
            j_floor: 0.0,
            grad_floor: 0.0,
            ..base.clone()
        };
        let mut st = TrainState::new(&cfg, problem)?;
        let p0: ParamSet = st.params.clone();
        run(&mut st, &cfg, problem, |_| {})?;
        Ok(fns
            .iter()
            .map(|(_, f)| measure_pair(&st.params, f) - measure_pair(&p0, f))
            .collect())
    });
    let mut acc = vec![0.0; fns.len()];
    for v in per_seed {
        for (a, d) in acc.iter_mut().zip(v?) {
            *a += d;
        }
    }
    Ok(acc.into_iter().map(|a| a / seeds.len() as f64).collect())
}

/// Outcome of the desk-scale global decay test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorReport {
    pub epsilon: f64,
    pub success: bool,
    /// Smallest tested width whose seed-averaged objective stays below epsilon.
    pub n0: Option<usize>,
    /// First step after which that average never exceeds epsilon.
    pub tau_step: Option<usize>,
    /// Lowest seed-averaged final objective seen over all widths.
    pub best: f64,
}

/// Search the widths in increasing order for one whose seed-averaged objective
/// settles below `epsilon`.
pub fn global_floor_test(config: &TrainConfig, ns: &[usize], seeds: &[u64], epsilon: f64) -> Result<FloorReport> {
    if ns.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("floor test needs widths and seeds".into()));
    }
    let problem = Problem::from_config(config)?;
    let mut order = ns.to_vec();
    order.sort_unstable();
    let mut best = f64::INFINITY;
    for &n in &order {
        let sweep = sweep_problem(config, &problem, &[n], seeds)?;
        let hist: Vec<Vec<f64>> = sweep
            .records
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| r.history.iter().map(|h| h.j).collect())
            .collect();
        if hist.is_empty() {
            continue;
        }
        let len = hist.iter().map(Vec::len).max().unwrap_or(0);
        // a stopped run keeps its final value
        let avg: Vec<f64> = (0..len)
            .map(|k| hist.iter().map(|h| h[k.min(h.len() - 1)]).sum::<f64>() / hist.len() as f64)
            .collect();
        best = best.min(*avg.last().unwrap_or(&f64::INFINITY));
        if epsilon > 0.0 {
            // last index above epsilon; tau is the step after it
            let tau = match avg.iter().rposition(|&j| j > epsilon) {
                None => Some(0),
                Some(k) if k + 1 < len => Some(k + 1),
                Some(_) => None,
            };
            if let Some(t) = tau {
                return Ok(FloorReport {
                    epsilon,
                    success: true,
                    n0: Some(n),
                    tau_step: Some(t),
                    best,
                });
            }
        }
    }
    Ok(FloorReport {
        epsilon,
        success: false,
        n0: None,
        tau_step: None,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::limit::estimate_kernel;
    use crate::trainer::train;

    fn base() -> TrainConfig {
        TrainConfig {
            grid: GridSpec { dim: 1, n: 33 },
            steps: 30,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_entry_sweep_matches_direct_training() {
        let cfg = TrainConfig { n_hidden: 5, seed: 4, ..base() };
        let s = sweep_n(&cfg, &[5], &[4]).unwrap();
        let direct = train(&cfg).unwrap();
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].final_j, Some(direct.objective()));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("N,objective\n5,"));
    }

    #[test]
    fn empty_lists_rejected() {
        assert!(sweep_n(&base(), &[], &[1]).is_err());
        assert!(sweep_n(&base(), &[5], &[]).is_err());
    }

    #[test]
    fn failed_runs_are_recorded() {
        let s = sweep_n(&TrainConfig { beta: 0.5, ..base() }, &[5], &[0, 1]).unwrap();
        assert!(s.records.iter().all(|r| r.error.is_some()));
        assert!(s.medians[0].1.is_nan());
    }

    #[test]
    fn zero_target_comparison_is_zero() {
        let cfg = TrainConfig {
            init: crate::network::Law::Standard {
                c_max: 0.0,
                w_std: 1.0,
                eta_std: 1.0,
            },
            ..base()
        };
        let grid = cfg.grid.build().unwrap();
        let problem = Problem::new(grid.clone(), cfg.mu, cfg.n_moments, crate::Field::zeros(grid.len())).unwrap();
        let k = estimate_kernel(&grid, &cfg.init_distribution(), cfg.activation, cfg.alpha, 200, 0).unwrap();
        let m = compare_prelimit_limit(&cfg, &problem, &k, 10, 5, &[0, 1]).unwrap();
        assert_eq!(m.max_err_g_l2, 0.0);
        assert_eq!(m.max_err_u_h1, 0.0);
        assert!(m.q.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn init_gap_shrinks_with_width() {
        let cfg = base();
        let problem = Problem::from_config(&cfg).unwrap();
        let seeds: Vec<u64> = (0..40).collect();
        let gap = init_gap(&cfg, &problem, &[10, 1000], &seeds).unwrap();
        assert!(gap[1].1 < gap[0].1);
        let pts: Vec<(f64, f64)> = gap.iter().map(|&(n, g)| (n as f64, g)).collect();
        let s = loglog_slope(&pts);
        assert!((s + 1.0 / 6.0).abs() < 0.1, "slope {s}");
    }

    #[test]
    fn floor_trivial_cases() {
        let cfg = base();
        let r = global_floor_test(&cfg, &[5], &[0], 1e3).unwrap();
        assert!(r.success);
        assert_eq!(r.tau_step, Some(0));
        let r = global_floor_test(&cfg, &[5], &[0], 0.0).unwrap();
        assert!(!r.success);
        assert!(r.best.is_finite());
    }

    #[test]
    fn loglog_slope_exact() {
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-0.25))).collect();
        assert!((loglog_slope(&pts) + 0.25).abs() < 1e-12);
    }
}
