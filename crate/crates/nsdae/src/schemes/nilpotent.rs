//! The analytic instability example: a recurrence driven purely by an
//! index-2 nilpotent matrix.
//!
//! For `N != 0` with `N^2 = 0`, the recurrence
//!
//! ```text
//!   (N/tau) x_{k+1} = (N/tau + I) x_k + g_k
//! ```
//!
//! has the unique solution `x_k = -g_k - (N g_{k+1} - N g_k) / tau`: the
//! state feeds on a divided difference of future data, so any perturbation
//! of `g` at one index moves neighboring states by its size over `tau`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_index2_nilpotent(n_mat: &DMatrix<f64>) -> Result<()> {
    if !n_mat.is_square() {
        return Err(Error::dim("nilpotent example needs a square matrix"));
    }
    let scale = n_mat.amax();
    if scale == 0.0 {
        return Err(Error::InvalidConfig(
            "N must be nonzero (otherwise the recurrence is causal)".into(),
        ));
    }
    let sq = n_mat * n_mat;
    if sq.amax() > 1e-13 * scale * scale {
        return Err(Error::InvalidConfig(
            "N^2 does not vanish: the matrix is not nilpotent of index 2".into(),
        ));
    }
    Ok(())
}

/// Closed-form solution sequence `x_0 .. x_{K-1}` for data `g_0 .. g_K`
/// (one fewer state than data, since each state looks one index ahead).
pub fn nilpotent_example_solve(
    n_mat: &DMatrix<f64>,
    g: &[DVector<f64>],
    tau: f64,
) -> Result<Vec<DVector<f64>>> {
    check_index2_nilpotent(n_mat)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    if g.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least two data samples".into(),
        ));
    }
    let dim = n_mat.nrows();
    if g.iter().any(|v| v.len() != dim) {
        return Err(Error::dim("data dimension does not match N"));
    }
    Ok(g
        .windows(2)
        .map(|w| -&w[0] - n_mat * (&w[1] - &w[0]) / tau)
        .collect())
}

/// Independent companion: simulate the recurrence *backwards* from a given
/// final state. Running forward is noncausal, but backwards the step matrix
/// `(N/tau + I)` is invertible with the exact inverse `I - N/tau`, so
///
/// ```text
///   x_k = (I - N/tau) ((N/tau) x_{k+1} - g_k).
/// ```
pub fn nilpotent_example_recursion(
    n_mat: &DMatrix<f64>,
    g: &[DVector<f64>],
    tau: f64,
    x_last: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    check_index2_nilpotent(n_mat)?;
    let dim = n_mat.nrows();
    let eye = DMatrix::identity(dim, dim);
    let inv = &eye - n_mat / tau;
    let count = g.len() - 1;
    let mut xs = vec![DVector::zeros(dim); count];
    xs[count - 1] = x_last.clone();
    for k in (0..count - 1).rev() {
        xs[k] = &inv * (n_mat * &xs[k + 1] / tau - &g[k]);
    }
    Ok(xs)
}

/// Residual of the forward recurrence at index `k` for a candidate
/// sequence: `(N/tau) x_{k+1} - (N/tau + I) x_k - g_k`.
pub fn nilpotent_recursion_residual(
    n_mat: &DMatrix<f64>,
    g: &[DVector<f64>],
    tau: f64,
    xs: &[DVector<f64>],
    k: usize,
) -> DVector<f64> {
    n_mat * &xs[k + 1] / tau - n_mat * &xs[k] / tau - &xs[k] - &g[k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn shift2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])
    }

    #[test]
    fn constant_data_kills_the_difference_term() {
        let g: Vec<_> = (0..6)
            .map(|_| DVector::from_vec(vec![0.0, 3.0]))
            .collect();
        let xs = nilpotent_example_solve(&shift2(), &g, 0.25).unwrap();
        for x in &xs {
            assert_relative_eq!(x, &DVector::from_vec(vec![0.0, -3.0]), epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_data_hand_evaluation() {
        // g_k = (0, k), tau = 1/2: x_k = (-2, -k)
        let g: Vec<_> = (0..8)
            .map(|k| DVector::from_vec(vec![0.0, k as f64]))
            .collect();
        let xs = nilpotent_example_solve(&shift2(), &g, 0.5).unwrap();
        for (k, x) in xs.iter().enumerate() {
            assert_relative_eq!(x, &DVector::from_vec(vec![-2.0, -(k as f64)]), epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_satisfies_recurrence_and_matches_backward_simulation() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..20 {
            // random index-2 nilpotent: S [0, R; 0, 0] S^{-1}
            let half = if rng.random_bool(0.5) { 1 } else { 2 };
            let d = 2 * half;
            let (n_mat, _) = loop {
                let s = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
                    + DMatrix::identity(d, d) * 2.0;
                let Some(s_inv) = s.clone().try_inverse() else {
                    continue;
                };
                let r = DMatrix::from_fn(half, half, |_, _| rng.random_range(-1.0..1.0))
                    + DMatrix::identity(half, half);
                let mut core = DMatrix::zeros(d, d);
                core.view_mut((0, half), (half, half)).copy_from(&r);
                break (&s * core * s_inv, ());
            };
            let tau = rng.random_range(0.05..0.5);
            let g: Vec<_> = (0..16)
                .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let xs = nilpotent_example_solve(&n_mat, &g, tau).unwrap();
            for k in 0..xs.len() - 1 {
                let r = nilpotent_recursion_residual(&n_mat, &g, tau, &xs, k);
                assert!(r.amax() <= 1e-12, "residual {} at k = {k}", r.amax());
            }
            let sim =
                nilpotent_example_recursion(&n_mat, &g, tau, xs.last().unwrap()).unwrap();
            for (a, b) in xs.iter().zip(&sim) {
                assert!((a - b).amax() <= 1e-11 * (1.0 + a.amax()));
            }
        }
    }

    #[test]
    fn perturbation_is_amplified_by_one_over_tau() {
        let n_mat = shift2();
        let tau = 0.125;
        let g: Vec<_> = (0..8)
            .map(|k| DVector::from_vec(vec![0.1 * k as f64, (k as f64).cos()]))
            .collect();
        let eps = 1e-3;
        let mut g_pert = g.clone();
        g_pert[4][1] += eps;
        let base = nilpotent_example_solve(&n_mat, &g, tau).unwrap();
        let pert = nilpotent_example_solve(&n_mat, &g_pert, tau).unwrap();
        // the state one index before the perturbed sample sees eps/tau
        // through the N-coupled component
        let diff3 = &pert[3] - &base[3];
        assert_relative_eq!(diff3[0].abs(), eps / tau, epsilon = 1e-12);
        // the perturbed index itself sees -eps directly and +eps/tau coupled
        let diff4 = &pert[4] - &base[4];
        assert_relative_eq!(diff4[1].abs(), eps, epsilon = 1e-12);
        assert_relative_eq!(diff4[0].abs(), eps / tau, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_nilpotent_input() {
        let not_nilpotent = DMatrix::identity(2, 2);
        let g = vec![DVector::zeros(2), DVector::zeros(2)];
        assert!(nilpotent_example_solve(&not_nilpotent, &g, 0.1).is_err());
        let zero = DMatrix::zeros(2, 2);
        assert!(nilpotent_example_solve(&zero, &g, 0.1).is_err());
    }
}
