//! Execution of a configured experiment sweep.

use std::io::Write;
use std::path::Path;
use std::sync::mpsc;

use nsdae::diagnostics::{fit_drift, fit_order, DiagnosticsReport};
use nsdae::error::{Error, Result};
use nsdae::mmio;
use nsdae::schemes::{run, SchemeConfig, SchemeKind, Trajectory};
use nsdae::system::{consistent_initial_pressure, solve_steady_stokes, SemiDiscreteSystem};

use crate::config::{ExperimentConfig, ProblemSpec};

pub struct RunOptions {
    pub jobs: usize,
    pub dump_states: bool,
    pub no_timestamp: bool,
}

fn scheme_config(cfg: &ExperimentConfig, scheme: &SchemeKind, tau: f64, lintol: f64) -> SchemeConfig {
    let mut sc = if lintol > 0.0 {
        SchemeConfig::iterative(scheme.clone(), tau, cfg.t_end, lintol)
    } else {
        SchemeConfig::direct(scheme.clone(), tau, cfg.t_end)
    };
    sc.picard_tol = cfg.picard_tol;
    sc
}

fn dump_states(dir: &Path, tag: &str, traj: &Trajectory) -> Result<()> {
    let dir = dir.join("states").join(tag);
    std::fs::create_dir_all(&dir)?;
    for k in 0..=traj.steps() {
        mmio::write_vector(dir.join(format!("step_{k:05}_v.mtx")), &traj.v[k])?;
        if let Some(p) = traj.pressure_at_node(k) {
            mmio::write_vector(dir.join(format!("step_{k:05}_p.mtx")), &p)?;
        }
    }
    Ok(())
}

fn tag_of(scheme: &SchemeKind, tau: f64, lintol: f64) -> String {
    format!("{}_tau{tau:e}_lintol{lintol:e}", scheme.name())
}

/// Run the whole sweep. Completed rows are flushed even when a later task
/// fails; the first hard error is returned after the flush.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<()> {
    let sys = match &cfg.problem {
        ProblemSpec::Mac(spec) => spec.build()?,
        ProblemSpec::Import(path) => nsdae::import::import_system(path)?,
    };
    let stokes = solve_steady_stokes(&sys, 0.0)?;
    let p0 = consistent_initial_pressure(&sys, &stokes.v_s, 0.0)?;
    let v0 = stokes.v_s;

    std::fs::create_dir_all(&cfg.output_dir)?;

    let ref_cfg = SchemeConfig {
        picard_tol: cfg.picard_tol,
        ..SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, cfg.ref_tau, cfg.t_end)
    };
    let reference = run(&sys, &ref_cfg, &v0, &p0)?;

    // task list in deterministic configuration order
    let tasks: Vec<(SchemeKind, f64, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|s| {
            cfg.taus.iter().flat_map(move |&tau| {
                cfg.lintols.iter().map(move |&lintol| (s.clone(), tau, lintol))
            })
        })
        .collect();

    let results = run_tasks(cfg, opts, &sys, &v0, &p0, &reference, &tasks);

    // attach per-(scheme, lintol) order fits where the tau grid allows it
    let mut reports: Vec<Option<DiagnosticsReport>> = Vec::with_capacity(tasks.len());
    let mut first_error = None;
    for r in results {
        match r {
            Some(Ok(rep)) => reports.push(Some(rep)),
            Some(Err(e)) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
                reports.push(None);
            }
            None => reports.push(None),
        }
    }
    for si in 0..cfg.schemes.len() {
        for &lintol in &cfg.lintols {
            let group: Vec<usize> = (0..tasks.len())
                .filter(|&i| {
                    tasks[i].0 == cfg.schemes[si] && tasks[i].2 == lintol && reports[i].is_some()
                })
                .collect();
            if group.len() < 3 {
                continue;
            }
            let mut pv: Vec<(f64, f64)> = group
                .iter()
                .map(|&i| {
                    let r = reports[i].as_ref().unwrap();
                    (r.tau, r.e_v)
                })
                .collect();
            pv.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let mut pp: Vec<(f64, f64)> = group
                .iter()
                .map(|&i| {
                    let r = reports[i].as_ref().unwrap();
                    (r.tau, r.e_p)
                })
                .collect();
            pp.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let order_v = fit_order(&pv).ok();
            let order_p = fit_order(&pp).ok();
            for &i in &group {
                let rep = reports[i].as_mut().unwrap();
                rep.order_v = order_v;
                rep.order_p = order_p;
            }
        }
    }

    let csv_path = cfg.output_dir.join("diagnostics.csv");
    let mut out = std::fs::File::create(&csv_path)?;
    if !opts.no_timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated at unix time {now}, seed {}", cfg.seed)?;
    }
    writeln!(out, "{}", DiagnosticsReport::csv_header())?;
    for rep in reports.iter().flatten() {
        writeln!(out, "{}", rep.csv_row())?;
    }
    eprintln!("wrote {}", csv_path.display());

    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

type TaskResult = Option<Result<DiagnosticsReport>>;

fn run_one(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    sys: &SemiDiscreteSystem,
    v0: &nalgebra::DVector<f64>,
    p0: &nalgebra::DVector<f64>,
    reference: &Trajectory,
    task: &(SchemeKind, f64, f64),
) -> Result<DiagnosticsReport> {
    let (scheme, tau, lintol) = task;
    let sc = scheme_config(cfg, scheme, *tau, *lintol);
    let traj = run(sys, &sc, v0, p0)?;
    if opts.dump_states {
        dump_states(&cfg.output_dir, &tag_of(scheme, *tau, *lintol), &traj)?;
    }
    let mut report = DiagnosticsReport::evaluate(&traj, reference, sys)?;
    if matches!(scheme, SchemeKind::DerivativeConstraint { .. }) {
        report.drift_slope = fit_drift(&traj, sys).ok();
    }
    Ok(report)
}

fn run_tasks(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    sys: &SemiDiscreteSystem,
    v0: &nalgebra::DVector<f64>,
    p0: &nalgebra::DVector<f64>,
    reference: &Trajectory,
    tasks: &[(SchemeKind, f64, f64)],
) -> Vec<TaskResult> {
    let jobs = opts.jobs.max(1);
    let mut results: Vec<TaskResult> = (0..tasks.len()).map(|_| None).collect();
    if jobs == 1 {
        for (i, task) in tasks.iter().enumerate() {
            let r = run_one(cfg, opts, sys, v0, p0, reference, task);
            let failed = r.is_err();
            results[i] = Some(r);
            if failed {
                break;
            }
        }
        return results;
    }
    // worker pool over a shared index counter; rows keep task order
    let next = std::sync::atomic::AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<DiagnosticsReport>)>();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let r = run_one(cfg, opts, sys, v0, p0, reference, &tasks[i]);
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        while let Ok((i, r)) = rx.recv() {
            results[i] = Some(r);
        }
    });
    results
}
