//! Scratch probe for picking honest test constants. Not part of the API.

use nalgebra::DVector;
use nsdae::mac::MacGridSpec;
use nsdae::schemes::{run, SchemeConfig, SchemeKind};
use nsdae::system::{consistent_initial_pressure, solve_steady_stokes, Convection};

fn main() {
    // penalty fixed point: signal vs numerical noise as beta grows
    let mut sys = MacGridSpec::lid_driven(8, 50.0, 1.0).build().unwrap();
    sys.convection = Convection::Zero;
    let stokes = solve_steady_stokes(&sys, 0.0).unwrap();
    let p0 = stokes.p_s.clone();
    let v0 = stokes.v_s.clone();
    println!("|v_S| = {:.3e}, |p_S| = {:.3e}", v0.norm(), p0.norm());
    for beta in [1e5, 1e6, 1e7, 3e7, 1e8, 3e8, 1e9] {
        let cfg = SchemeConfig::direct(SchemeKind::Penalty { beta }, 0.01, 0.01);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let change = (&traj.v[1] - &v0).norm() / v0.norm().max(1.0);
        println!("penalty beta = {beta:.0e}: rel velocity change {change:.3e}");
    }

    // artificial compressibility: residual scaling over the beta sweep
    let sys = MacGridSpec::obstacle_channel(6, 40.0, 1.0).build().unwrap();
    let stokes = solve_steady_stokes(&sys, 0.0).unwrap();
    let p0 = consistent_initial_pressure(&sys, &stokes.v_s, 0.0).unwrap();
    let v0 = stokes.v_s;
    let tau = 1.0 / 16.0;
    for beta in [1e2, 1e3, 1e4, 1e5, 1e6] {
        let cfg = SchemeConfig::direct(
            SchemeKind::ArtificialCompressibility { beta },
            tau,
            4.0 * tau,
        );
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let k = traj.steps();
        let res = sys.constraint_residual(&traj.v[k], traj.times[k]).unwrap();
        println!(
            "ac beta = {beta:.0e}: residual {res:.6e}, residual*beta = {:.6e}",
            res * beta
        );
    }

    // penalty sweep at the named betas
    for beta in [1e2, 1e3, 1e4] {
        let cfg = SchemeConfig::direct(SchemeKind::Penalty { beta }, tau, 4.0 * tau);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let k = traj.steps();
        let res = sys.constraint_residual(&traj.v[k], traj.times[k]).unwrap();
        println!("penalty beta = {beta:.0e}: residual {res:.6e}");
    }
    let _ = DVector::<f64>::zeros(1);
}
