use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nnpde::grid::Grid;
use nnpde::lab;
use nnpde::limit::{self, LimitConfig};
use nnpde::rans::{self, RansConfig, TargetProfile};
use nnpde::trainer::{self, Problem, StopReason};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, Command, EXIT_NUMERIC, EXIT_USAGE};

/// Failure writing outputs, reported with its own exit code.
#[derive(Debug)]
struct OutputError;

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("cannot write output")
    }
}

impl std::error::Error for OutputError {}

/// A numeric failure detected by the command itself rather than the library.
#[derive(Debug)]
struct NumericFailure(String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<nnpde::Error>() {
            return if err.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE };
        }
        if cause.is::<NumericFailure>() {
            return EXIT_NUMERIC;
        }
        if cause.is::<OutputError>() {
            return 1;
        }
    }
    EXIT_USAGE
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .context(OutputError)?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> nnpde::Result<()>) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))
            .context(OutputError)?;
        let mut w = BufWriter::new(file);
        f(&mut w)
            .and_then(|_| w.flush().map_err(nnpde::Error::from))
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
            .context(OutputError)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed_override: Option<u64>,
    jobs: Option<usize>,
    workers: usize,
    parallel: bool,
    args: Vec<String>,
    config: &'a C,
}

fn write_manifest<C: Serialize>(out: &Out, cli: &Cli, config: &C) -> anyhow::Result<()> {
    let m = Manifest {
        tool: "nnpde",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        seed_override: cli.seed,
        jobs: cli.jobs,
        workers: nnpde::par::workers(),
        parallel: nnpde::par::PARALLEL,
        args: std::env::args().collect(),
        config,
    };
    let text = toml::to_string(&m).context("cannot serialize manifest")?;
    out.write("manifest.toml", |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn dispatch(cli: &Cli, cfg: &RunConfig, dir: &Path) -> anyhow::Result<()> {
    let out = Out::new(dir)?;
    match cli.command {
        Command::Train => train(cli, cfg, &out),
        Command::Sweep => sweep(cli, cfg, &out),
        Command::Limit => limit_run(cli, cfg, &out),
        Command::Spectra => spectra(cli, cfg, &out),
        Command::Compare => compare(cli, cfg, &out),
        Command::Rans { .. } => rans_run(cli, cfg, &out),
    }
}

fn write_fields(out: &Out, name: &str, grid: &Grid, cols: &[(&str, &[f64])]) -> anyhow::Result<()> {
    out.write(name, |w| {
        let coords = if grid.dim() == 1 { "x" } else { "x,y" };
        let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
        writeln!(w, "{coords},{}", names.join(","))?;
        let pts = grid.points();
        for (k, p) in pts.chunks(grid.dim()).enumerate() {
            let mut line: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            line.extend(cols.iter().map(|c| format!("{:.17e}", c.1[k])));
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

fn train(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        train: &'a trainer::TrainConfig,
    }
    let tc = &cfg.train;
    tc.validate()?;
    write_manifest(out, cli, &C { train: tc })?;
    let problem = Problem::from_config(tc)?;
    let st = trainer::train_problem(tc, &problem)?;
    out.write("history.csv", |w| st.write_history_csv(w))?;
    let e = &st.current;
    write_fields(
        out,
        "fields.csv",
        problem.grid(),
        &[("g", &e.g), ("u", &e.u), ("h", &problem.h), ("u_hat", &e.u_hat)],
    )?;
    out.write("params.bin", |w| st.params.write_checkpoint(w))?;
    println!(
        "N={} steps={} J={:.6e} stop={:?}",
        tc.n_hidden,
        st.step,
        st.objective(),
        st.stop.unwrap_or(StopReason::Budget)
    );
    if st.stop == Some(StopReason::Watchdog) {
        log::warn!("training ended by the step-size watchdog");
    }
    Ok(())
}

fn sweep(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        train: &'a trainer::TrainConfig,
        sweep: &'a crate::config::SweepSection,
    }
    cfg.train.validate()?;
    write_manifest(out, cli, &C { train: &cfg.train, sweep: &cfg.sweep })?;
    let res = lab::sweep_n(&cfg.train, &cfg.sweep.ns, &cfg.sweep.seeds)?;
    out.write("sweep.csv", |w| res.write_csv(w))?;
    out.write("sweep_runs.csv", |w| res.write_records_csv(w))?;
    for (n, j) in &res.medians {
        println!("N={n} median J={j:.6e}");
    }
    let failed: Vec<String> = res
        .records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("N={} seed={}: {e}", r.n_hidden, r.seed)))
        .collect();
    if !failed.is_empty() {
        bail!(NumericFailure(format!("{} run(s) failed: {}", failed.len(), failed.join("; "))));
    }
    Ok(())
}

fn limit_run(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        limit: &'a LimitConfig,
    }
    let lc = &cfg.limit;
    write_manifest(out, cli, &C { limit: lc })?;
    let grid = lc.grid.build()?;
    let problem = Problem::new(grid.clone(), lc.mu, lc.n_moments, nnpde::objective::default_target(&grid))?;
    let kernel = lc.kernel()?;
    let traj = limit::integrate_limit(lc, &kernel, &problem)?;
    out.write("limit.csv", |w| traj.write_csv(w))?;
    if let Some(s) = traj.snapshots.last() {
        write_fields(out, "limit_fields.csv", &grid, &[("g", &s.g), ("u", &s.u), ("h", &problem.h), ("u_hat", &s.u_hat)])?;
    }
    println!("limit steps={} J={:.6e}", traj.steps_taken(), traj.final_objective());
    Ok(())
}

fn spectra(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        limit: &'a LimitConfig,
        spectra: &'a crate::config::SpectraSection,
    }
    let lc = &cfg.limit;
    write_manifest(out, cli, &C { limit: lc, spectra: &cfg.spectra })?;
    let grid = lc.grid.build()?;
    let kernel = lc.kernel()?;
    let spec = limit::spectrum(&kernel)?;
    let samples = cfg.spectra.c_sigma_samples.unwrap_or(lc.mc_samples);
    let c_sigma = limit::c_sigma_bound(&lc.init_distribution(), lc.activation, &grid, samples, lc.seed)?;
    let threshold = cfg.spectra.threshold;
    out.write("spectra.csv", |w| {
        writeln!(w, "k,lambda")?;
        for (k, l) in spec.eigenvalues.iter().enumerate() {
            if threshold.is_none_or(|t| *l > t) {
                writeln!(w, "{k},{l:.17e}")?;
            }
        }
        Ok(())
    })?;
    let rank = spec.rank_above(threshold.unwrap_or(0.0));
    out.write("spectra_summary.csv", |w| {
        writeln!(w, "lambda_max,lambda_min,c_sigma,alpha_c_sigma,threshold,rank_above")?;
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{rank}",
            spec.lambda_max(),
            spec.lambda_min(),
            c_sigma,
            lc.alpha * c_sigma,
            threshold.map_or_else(String::new, |t| format!("{t:e}"))
        )?;
        Ok(())
    })?;
    println!(
        "lambda_max={:.6e} lambda_min={:.3e} alpha*C_sigma={:.6e} rank_above={rank}",
        spec.lambda_max(),
        spec.lambda_min(),
        lc.alpha * c_sigma
    );
    Ok(())
}

fn compare(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        train: &'a trainer::TrainConfig,
        compare: &'a crate::config::CompareSection,
    }
    let tc = &cfg.train;
    let cc = &cfg.compare;
    tc.validate()?;
    write_manifest(out, cli, &C { train: tc, compare: cc })?;
    let problem = Problem::from_config(tc)?;
    let kernel = limit::estimate_kernel(
        problem.grid(),
        &tc.init_distribution(),
        tc.activation,
        tc.alpha,
        cc.mc_samples,
        tc.seed,
    )?;
    let m = lab::compare_prelimit_limit(tc, &problem, &kernel, cc.n_hidden, cc.steps, &cc.seeds)?;
    out.write("compare.csv", |w| m.write_csv(w))?;
    println!(
        "N={} max err: u_H1={:.4e} uhat_H1={:.4e} g_L2={:.4e} init_gap={:.4e}",
        cc.n_hidden, m.max_err_u_h1, m.max_err_uhat_h1, m.max_err_g_l2, m.init_gap
    );
    if !cc.gap_ns.is_empty() {
        let seeds: Vec<u64> = (0..cc.gap_seeds.max(1) as u64).map(|s| s + tc.seed).collect();
        let gap = lab::init_gap(tc, &problem, &cc.gap_ns, &seeds)?;
        out.write("init_gap.csv", |w| {
            writeln!(w, "N,g0_L2_rms")?;
            for (n, g) in &gap {
                writeln!(w, "{n},{g:.17e}")?;
            }
            Ok(())
        })?;
        let pts: Vec<(f64, f64)> = gap.iter().map(|&(n, g)| (n as f64, g)).collect();
        if pts.len() >= 2 {
            println!("init gap log-log slope={:.4}", lab::loglog_slope(&pts));
        }
    }
    Ok(())
}

fn load_targets(cfg: &RunConfig, res: &[f64]) -> anyhow::Result<Vec<TargetProfile>> {
    let rt = &cfg.rans.train;
    res.iter()
        .map(|&re| {
            let case = rt.case(re);
            let key = cfg.rans.targets.iter().find(|(k, _)| k.parse::<f64>().ok() == Some(re));
            match key {
                Some((_, path)) => {
                    let f = File::open(path).with_context(|| format!("cannot open target {}", path.display()))?;
                    Ok(rans::load_target_csv(f, &case)?)
                }
                None => Ok(rans::synth_target(&case)?),
            }
        })
        .collect()
}

fn write_profile(out: &Out, name: &str, case: &RansConfig, cols: &[(&str, &[f64])]) -> anyhow::Result<()> {
    let grid = case.grid()?;
    out.write(name, |w| {
        let names: Vec<&str> = cols.iter().map(|c| c.0).collect();
        writeln!(w, "y,{}", names.join(","))?;
        for (j, y) in grid.faces.iter().enumerate() {
            let vals: Vec<String> = cols.iter().map(|c| format!("{:.17e}", c.1[j])).collect();
            writeln!(w, "{y:.17e},{}", vals.join(","))?;
        }
        Ok(())
    })
}

fn rans_run(cli: &Cli, cfg: &RunConfig, out: &Out) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct C<'a> {
        rans: &'a crate::config::RansSection,
    }
    let rt = &cfg.rans.train;
    rt.validate()?;
    write_manifest(out, cli, &C { rans: &cfg.rans })?;
    let all: Vec<f64> = rt.train_re.iter().chain(&rt.test_re).copied().collect();
    let targets = load_targets(cfg, &all)?;
    let ntr = rt.train_re.len();

    if !cfg.rans.net {
        let mut rows = Vec::new();
        for (&re, target) in all.iter().zip(&targets) {
            let case = rt.case(re);
            let st = rans::converge(&rans::initial_state(&case)?, &case, None)?;
            let d = rans::diagnostics(&st, &case)?;
            let j = rans::rans_objective(&st, &case, target)?;
            write_profile(out, &format!("profile_Re{re}.csv"), &case, &[("u_baseline", &st.u_bar), ("u_target", &target.u)])?;
            println!("Re={re} Re_tau={:.2} C_f={:.5e} J={j:.5e}", d.re_tau, d.c_f);
            rows.push((re, d.re_tau, d.c_f, j));
        }
        return out.write("diagnostics.csv", |w| {
            writeln!(w, "Re,Re_tau,C_f,J")?;
            for (re, rt, cf, j) in &rows {
                writeln!(w, "{re},{rt:.10e},{cf:.10e},{j:.10e}")?;
            }
            Ok(())
        });
    }

    let res = rans::train_rans(rt, &targets[..ntr], &targets[ntr..])?;
    out.write("rans_history.csv", |w| res.history.write_csv(w))?;
    out.write("rans_summary.csv", |w| res.write_summary_csv(rt, w))?;
    out.write("net.bin", |w| res.net.write_checkpoint(w))?;
    let states = res.train_states.iter().chain(&res.test_states);
    let mut rows = Vec::new();
    for ((&re, st), target) in all.iter().zip(states).zip(&targets) {
        let case = rt.case(re);
        let d = rans::diagnostics(st, &case)?;
        write_profile(out, &format!("profile_Re{re}.csv"), &case, &[("u_trained", &st.u_bar), ("u_target", &target.u)])?;
        rows.push((re, d.re_tau, d.c_f));
    }
    out.write("diagnostics.csv", |w| {
        writeln!(w, "Re,Re_tau,C_f")?;
        for (re, rt, cf) in &rows {
            writeln!(w, "{re},{rt:.10e},{cf:.10e}")?;
        }
        Ok(())
    })?;
    let bt: f64 = res.baseline_train.iter().sum();
    let tt: f64 = res.trained_train.iter().sum();
    println!(
        "training J {bt:.5e} -> {tt:.5e} (ratio {:.3}), best iteration {}{}",
        tt / bt,
        res.best_iteration,
        if res.stopped_early { ", stopped early" } else { "" }
    );
    for (i, re) in rt.test_re.iter().enumerate() {
        println!("out-of-sample Re={re}: J {:.5e} -> {:.5e}", res.baseline_test[i], res.trained_test[i]);
    }
    Ok(())
}
