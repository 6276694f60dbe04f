//! Scratch probe of the full desk-scale sweep that backs the acceptance
//! criteria: order fits with exact solves, pressure behavior under inexact
//! solves, and the continuity-residual contrast.

use std::time::Instant;

use nsdae::diagnostics::{error_norms, fit_order, residual_norms};
use nsdae::mac::MacGridSpec;
use nsdae::schemes::{run, SchemeConfig, SchemeKind};
use nsdae::system::{consistent_initial_pressure, solve_steady_stokes};

fn main() {
    let t0 = Instant::now();
    let sys = MacGridSpec::obstacle_channel(16, 60.0, 1.0).build().unwrap();
    println!("desk system: n = {}, m = {}", sys.n(), sys.m());
    let stokes = solve_steady_stokes(&sys, 0.0).unwrap();
    let p0 = consistent_initial_pressure(&sys, &stokes.v_s, 0.0).unwrap();
    let v0 = stokes.v_s;
    println!("init done after {:?}", t0.elapsed());

    let t_end = 0.25;
    let tau_ref = t_end / 2048.0; // 2^-13
    let ref_cfg = SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, tau_ref, t_end);
    let t1 = Instant::now();
    let reference = run(&sys, &ref_cfg, &v0, &p0).unwrap();
    println!("reference (tau = {tau_ref:.2e}, 2048 steps) took {:?}", t1.elapsed());

    let taus: Vec<f64> = (7..=10).map(|k| 2.0f64.powi(-k)).collect();

    for scheme in [SchemeKind::ImexEuler, SchemeKind::Simple] {
        let mut pv = Vec::new();
        let mut pp = Vec::new();
        for &tau in &taus {
            let t2 = Instant::now();
            let cfg = SchemeConfig::direct(scheme.clone(), tau, t_end);
            let traj = run(&sys, &cfg, &v0, &p0).unwrap();
            let (e_v, e_p) = error_norms(&traj, &reference, sys.norm_m(), sys.norm_mp()).unwrap();
            let (r_m, r_c) = residual_norms(&traj, &sys).unwrap();
            println!(
                "{} direct tau=2^{:.0}: e_v={e_v:.4e} e_p={e_p:.4e} r_M={r_m:.2e} r_C={r_c:.2e} ({:?})",
                scheme.name(),
                tau.log2(),
                t2.elapsed()
            );
            pv.push((tau, e_v));
            pp.push((tau, e_p));
        }
        println!(
            "{}: order_v = {:.3}, order_p = {:.3}",
            scheme.name(),
            fit_order(&pv).unwrap(),
            fit_order(&pp).unwrap()
        );
    }

    for scheme in [SchemeKind::ImexEuler, SchemeKind::Simple] {
        for &tau in &taus {
            let t2 = Instant::now();
            let mut cfg = SchemeConfig::iterative(scheme.clone(), tau, t_end, 1e-6);
            cfg.momentum_solver.zero_start = std::env::var("ZERO_START").is_ok();
            cfg.pressure_solver.zero_start = cfg.momentum_solver.zero_start;
            let traj = run(&sys, &cfg, &v0, &p0).unwrap();
            let (e_v, e_p) = error_norms(&traj, &reference, sys.norm_m(), sys.norm_mp()).unwrap();
            let (r_m, r_c) = residual_norms(&traj, &sys).unwrap();
            let max_iters = traj
                .solver_log
                .iter()
                .flat_map(|l| [l.momentum, l.pressure, l.correction])
                .flatten()
                .map(|r| r.iters)
                .max()
                .unwrap_or(0);
            println!(
                "{} lintol=1e-6 tau=2^{:.0}: e_v={e_v:.4e} e_p={e_p:.4e} r_M={r_m:.2e} r_C={r_c:.2e} max_iters={max_iters} unconv={} ({:?})",
                scheme.name(),
                tau.log2(),
                traj.any_unconverged(),
                t2.elapsed()
            );
        }
    }
    println!("total {:?}", t0.elapsed());
}
