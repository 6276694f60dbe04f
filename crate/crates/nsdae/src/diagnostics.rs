//! Integrated error and residual metrics over trajectories, convergence
//! order estimation, and constraint-drift fitting.
//!
//! Errors against a reference follow the protocol of the experiments: the
//! reference runs on a refinement of the coarse grid (its step must divide
//! the coarse step), is restricted to the coarse nodes by exact time-point
//! matching, and the pointwise weighted norms are integrated by the
//! piecewise trapezoidal rule with the coarse step. Pressure sequences are
//! aligned through [`Trajectory::pressure_at_node`], which respects each
//! scheme's own indexing; integrals run over the samples the scheme
//! actually defines, endpoints included.


use crate::error::{Error, Result};
use crate::schemes::{SchemeKind, Trajectory};
use crate::system::SemiDiscreteSystem;

/// Piecewise trapezoidal rule with constant step `tau`.
pub fn trapz(samples: &[f64], tau: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig(
            "trapezoidal rule needs at least two samples".into(),
        ));
    }
    Ok(samples.windows(2).map(|w| tau * (w[0] + w[1]) / 2.0).sum())
}

/// Map each coarse node of `traj` onto a node of the finer `ref_traj`.
fn refinement_ratio(traj: &Trajectory, ref_traj: &Trajectory) -> Result<usize> {
    let ratio = traj.tau / ref_traj.tau;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "reference step {} does not refine the trajectory step {}",
            ref_traj.tau, traj.tau
        )));
    }
    let ratio = rounded as usize;
    if ref_traj.steps() < traj.steps() * ratio {
        return Err(Error::InvalidConfig(
            "reference trajectory is shorter than the trajectory under study".into(),
        ));
    }
    Ok(ratio)
}

/// Integrated errors `(e_v, e_p)`: the trapezoidal integrals of
/// `||v_k - v_ref(t_k)||` in `norm_v` and of the matching pressure error
/// in `norm_p`, with the reference restricted to the coarse time nodes.
pub fn error_norms(
    traj: &Trajectory,
    ref_traj: &Trajectory,
    norm_v: &crate::norm::WeightedNorm,
    norm_p: &crate::norm::WeightedNorm,
) -> Result<(f64, f64)> {
    let ratio = refinement_ratio(traj, ref_traj)?;
    let steps = traj.steps();

    let mut v_err = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let diff = &traj.v[k] - &ref_traj.v[k * ratio];
        v_err.push(norm_v.norm(&diff)?);
    }
    let e_v = trapz(&v_err, traj.tau)?;

    let mut p_err = Vec::new();
    for k in 0..=steps {
        let (Some(p), Some(p_ref)) = (
            traj.pressure_at_node(k),
            ref_traj.pressure_at_node(k * ratio),
        ) else {
            break;
        };
        p_err.push(norm_p.norm(&(p - p_ref))?);
    }
    let e_p = trapz(&p_err, traj.tau)?;
    Ok((e_v, e_p))
}

/// Integrated residuals `(r_M, r_C)` of a trajectory in the system it was
/// produced with: the momentum residual
/// `(M/tau + A) v_{k+1} - M v_k / tau - B' p_k + N(v_k) - f_k` in the
/// `M^{-1}` norm and the continuity residual `B v_k - g_k` in the
/// `M_Q^{-1}` norm.
pub fn residual_norms(traj: &Trajectory, sys: &SemiDiscreteSystem) -> Result<(f64, f64)> {
    let steps = traj.steps();
    let tau = traj.tau;
    let f_mat = sys.mass.scaled(1.0 / tau).add_scaled(1.0, &sys.a_lin)?;

    let mut mom = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = traj.times[k];
        let p_k = traj
            .pressure_at_node(k)
            .ok_or_else(|| Error::InvalidConfig("trajectory lacks a pressure at a node".into()))?;
        let r = f_mat.matvec(&traj.v[k + 1])? - sys.mass.matvec(&traj.v[k])? / tau
            - sys.b.tr_matvec(&p_k)?
            + sys.convection.eval(&traj.v[k])
            - sys.f.eval(t);
        mom.push(sys.norm_m_inv().norm(&r)?);
    }
    let r_m = trapz(&mom, tau)?;

    let mut cont = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        cont.push(sys.constraint_residual(&traj.v[k], traj.times[k])?);
    }
    let r_c = trapz(&cont, tau)?;
    Ok((r_m, r_c))
}

/// Least-squares slope of `log e` against `log tau`. Expects at least
/// three points with strictly decreasing `tau` and positive errors.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(
            "order fit needs at least three (tau, error) points".into(),
        ));
    }
    if points.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidConfig(
            "order fit expects strictly decreasing tau".into(),
        ));
    }
    if points.iter().any(|&(tau, e)| !(tau > 0.0) || !(e > 0.0)) {
        return Err(Error::InvalidConfig(
            "order fit needs positive tau and errors".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(lsq_slope(&xs, &ys))
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let num: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let den: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    num / den
}

/// Least-squares slope of the constraint residual
/// `||B v_k - g_k||_{M_Q^{-1}}` against time: the drift rate of schemes
/// that only enforce the differentiated constraint.
pub fn fit_drift(traj: &Trajectory, sys: &SemiDiscreteSystem) -> Result<f64> {
    if traj.steps() < 3 {
        return Err(Error::InvalidConfig(
            "drift fit needs at least three steps".into(),
        ));
    }
    let mut xs = Vec::with_capacity(traj.steps() + 1);
    let mut ys = Vec::with_capacity(traj.steps() + 1);
    for k in 0..=traj.steps() {
        xs.push(traj.times[k]);
        ys.push(sys.constraint_residual(&traj.v[k], traj.times[k])?);
    }
    Ok(lsq_slope(&xs, &ys))
}

/// One row of the experiment output.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub scheme: SchemeKind,
    pub tau: f64,
    pub lintol: f64,
    pub e_v: f64,
    pub e_p: f64,
    pub r_m: f64,
    pub r_c: f64,
    pub order_v: Option<f64>,
    pub order_p: Option<f64>,
    pub drift_slope: Option<f64>,
}

impl DiagnosticsReport {
    /// Errors and residuals of one trajectory against a reference.
    pub fn evaluate(
        traj: &Trajectory,
        ref_traj: &Trajectory,
        sys: &SemiDiscreteSystem,
    ) -> Result<Self> {
        let (e_v, e_p) = error_norms(traj, ref_traj, sys.norm_m(), sys.norm_mp())?;
        let (r_m, r_c) = residual_norms(traj, sys)?;
        let report = DiagnosticsReport {
            scheme: traj.scheme.clone(),
            tau: traj.tau,
            lintol: traj.lintol,
            e_v,
            e_p,
            r_m,
            r_c,
            order_v: None,
            order_p: None,
            drift_slope: None,
        };
        report.validate()?;
        Ok(report)
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("e_v", self.e_v),
            ("e_p", self.e_p),
            ("r_M", self.r_m),
            ("r_C", self.r_c),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "diagnostics metric {name} = {value} is not a finite nonnegative number"
                )));
            }
        }
        Ok(())
    }

    pub fn csv_header() -> &'static str {
        "scheme,tau,lintol,e_v,e_p,r_M,r_C,order_v,order_p,drift_slope"
    }

    /// CSV row with 17 significant digits on every float.
    pub fn csv_row(&self) -> String {
        let opt = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v:.16e}"));
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            self.scheme.name(),
            self.tau,
            self.lintol,
            self.e_v,
            self.e_p,
            self.r_m,
            self.r_c,
            opt(self.order_v),
            opt(self.order_p),
            opt(self.drift_slope),
        )
    }
}

/// Trajectory CSV: one row per time node with either the full state (small
/// systems) or norm summaries, plus the per-step solver records.
pub fn trajectory_csv(traj: &Trajectory, sys: &SemiDiscreteSystem) -> Result<String> {
    let full_state = sys.n() + sys.m() <= 16;
    let mut out = String::new();
    if full_state {
        out.push('k');
        out.push_str(",t");
        for i in 0..sys.n() {
            out.push_str(&format!(",v{i}"));
        }
        for i in 0..sys.m() {
            out.push_str(&format!(",p{i}"));
        }
    } else {
        out.push_str("k,t,v_norm_M,p_norm_MP");
    }
    out.push_str(",mom_iters,mom_res,pres_iters,pres_res\n");
    for k in 0..=traj.steps() {
        out.push_str(&format!("{k},{:.16e}", traj.times[k]));
        let p = traj.pressure_at_node(k);
        if full_state {
            for i in 0..sys.n() {
                out.push_str(&format!(",{:.16e}", traj.v[k][i]));
            }
            for i in 0..sys.m() {
                match &p {
                    Some(p) => out.push_str(&format!(",{:.16e}", p[i])),
                    None => out.push(','),
                }
            }
        } else {
            out.push_str(&format!(",{:.16e}", sys.norm_m().norm(&traj.v[k])?));
            match &p {
                Some(p) => out.push_str(&format!(",{:.16e}", sys.norm_mp().norm(p)?)),
                None => out.push(','),
            }
        }
        if k < traj.steps() {
            let log = &traj.solver_log[k];
            for rec in [&log.momentum, &log.pressure] {
                match rec {
                    Some(r) => out.push_str(&format!(",{},{:.16e}", r.iters, r.rel_residual)),
                    None => out.push_str(",,"),
                }
            }
        } else {
            out.push_str(",,,,");
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapz_basics() {
        assert_relative_eq!(trapz(&[0.0, 1.0, 2.0], 1.0).unwrap(), 2.0);
        assert_relative_eq!(trapz(&[1.0, 3.0], 0.5).unwrap(), 1.0);
        // constant c over N steps integrates to c N tau
        let c = 2.5;
        let samples = vec![c; 9];
        assert_relative_eq!(trapz(&samples, 0.25).unwrap(), c * 8.0 * 0.25);
        assert!(trapz(&[1.0], 1.0).is_err());
    }

    #[test]
    fn fit_order_exact_power_laws() {
        let taus = [0.1, 0.05, 0.025, 0.0125];
        let linear: Vec<_> = taus.iter().map(|&t| (t, 3.0 * t)).collect();
        assert_relative_eq!(fit_order(&linear).unwrap(), 1.0, epsilon = 1e-10);
        let quadratic: Vec<_> = taus.iter().map(|&t| (t, 0.7 * t * t)).collect();
        assert_relative_eq!(fit_order(&quadratic).unwrap(), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn fit_order_input_validation() {
        assert!(fit_order(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(fit_order(&[(0.1, 1.0), (0.2, 0.5), (0.05, 0.2)]).is_err());
        assert!(fit_order(&[(0.1, 1.0), (0.05, 0.0), (0.025, 0.2)]).is_err());
    }

    #[test]
    fn fit_order_on_the_reported_error_table() {
        // velocity errors of the exact-solve runs against nested steps;
        // the least-squares slope over the four points is about 1.062
        let points = [
            (0.00390625, 0.00341974712593372),
            (0.001953125, 0.00156723623841947),
            (0.0009765625, 0.00075930797046964),
            (0.00048828125, 0.000374001701706994),
        ];
        let slope = fit_order(&points).unwrap();
        assert_relative_eq!(slope, 1.0624, epsilon = 2e-3);
    }
}
