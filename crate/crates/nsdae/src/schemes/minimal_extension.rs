//! Minimal-extension index reduction: append the differentiated constraint
//! and a dummy variable `w2` standing in for the derivative of the selected
//! velocity block, keeping the solution set of the original system.
//!
//! With a column permutation `[B1, B2]` of `B` whose trailing block `B2`
//! is invertible, one implicit-explicit Euler step solves the extended
//! square system over `[v1_new; v2_new; w2; p]`:
//!
//! ```text
//!   (M1/tau + A1) v1 + A2 v2 + M2 w2 - B' p = f - N(v_old) + M1 v1_old / tau
//!   B1 v1 + B2 v2                           = g_new
//!   (B1/tau) v1 + B2 w2                     = dg_new + B1 v1_old / tau
//! ```
//!
//! where `M1, M2, A1, A2` are the matching column selections and `dg` is
//! the exact derivative for constant data, otherwise the backward slope of
//! the tabulation.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::pencil::pivoted_row_selection;
use crate::solve::DirectSolver;
use crate::sparse::{BlockEntry, SparseMatrix};
use crate::system::SemiDiscreteSystem;

use super::{PressureIndexing, SchemeConfig, SolveRecord, State, StepLog, StepOutcome, Stepper};

/// Column reordering of the constraint matrix: the trailing `m` columns
/// form an invertible block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPermutation {
    /// New-position -> original-column map; length `n`.
    pub order: Vec<usize>,
    /// How many trailing columns belong to the invertible block.
    pub block_size: usize,
}

impl ColumnPermutation {
    pub fn leading(&self) -> &[usize] {
        &self.order[..self.order.len() - self.block_size]
    }

    pub fn trailing(&self) -> &[usize] {
        &self.order[self.order.len() - self.block_size..]
    }
}

/// Choose `m` columns of the full-row-rank `B` that form an invertible
/// `B2`, by column-pivoted factorization, and return the permutation that
/// moves them last. The selected block is checked to be far from singular.
pub fn find_b2_permutation(b: &SparseMatrix) -> Result<ColumnPermutation> {
    let (m, n) = (b.nrows(), b.ncols());
    let bd = b.to_dense();
    if crate::pencil::numerical_rank(&bd) != m {
        return Err(Error::RankDeficient(
            "B must have full row rank to select an invertible block".into(),
        ));
    }
    // columns of B are rows of B'
    let mut selected = pivoted_row_selection(&bd.transpose(), m);
    selected.sort_unstable();
    let chosen: std::collections::BTreeSet<usize> = selected.iter().copied().collect();
    let mut order: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
    order.extend(&selected);

    let b2 = b.select_cols(&selected)?.to_dense();
    let smin = b2
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, s| acc.min(*s));
    if !(smin > 0.0) || !smin.is_finite() {
        return Err(Error::RankDeficient(
            "pivoted column selection produced a singular block despite full row rank".into(),
        ));
    }
    Ok(ColumnPermutation {
        order,
        block_size: m,
    })
}

pub struct MinimalExtensionStepper {
    sys: SemiDiscreteSystem,
    tau: f64,
    perm: ColumnPermutation,
    m1: SparseMatrix,
    b1: SparseMatrix,
    solver: DirectSolver,
}

impl MinimalExtensionStepper {
    pub fn new(sys: &SemiDiscreteSystem, cfg: &SchemeConfig) -> Result<Self> {
        if !cfg.momentum_solver.is_direct() || !cfg.pressure_solver.is_direct() {
            return Err(Error::InvalidConfig(
                "the minimal-extension scheme runs with direct solves only".into(),
            ));
        }
        let tau = cfg.tau;
        let perm = find_b2_permutation(&sys.b)?;
        let (cols1, cols2) = (perm.leading().to_vec(), perm.trailing().to_vec());
        let m1 = sys.mass.select_cols(&cols1)?;
        let m2 = sys.mass.select_cols(&cols2)?;
        let a1 = sys.a_lin.select_cols(&cols1)?;
        let a2 = sys.a_lin.select_cols(&cols2)?;
        let b1 = sys.b.select_cols(&cols1)?;
        let b2 = sys.b.select_cols(&cols2)?;
        let neg_bt = sys.b.transpose().scaled(-1.0);

        let row1_v1 = m1.scaled(1.0 / tau).add_scaled(1.0, &a1)?;
        let b1_tau = b1.scaled(1.0 / tau);
        let (n, m) = (sys.n(), sys.m());
        let matrix = SparseMatrix::from_blocks(&[
            vec![
                BlockEntry::Mat(&row1_v1),
                BlockEntry::Mat(&a2),
                BlockEntry::Mat(&m2),
                BlockEntry::Mat(&neg_bt),
            ],
            vec![
                BlockEntry::Mat(&b1),
                BlockEntry::Mat(&b2),
                BlockEntry::ZeroSized(m, m),
                BlockEntry::ZeroSized(m, m),
            ],
            vec![
                BlockEntry::Mat(&b1_tau),
                BlockEntry::ZeroSized(m, m),
                BlockEntry::Mat(&b2),
                BlockEntry::ZeroSized(m, m),
            ],
        ])?;
        debug_assert_eq!(matrix.nrows(), n + 2 * m);
        let solver = DirectSolver::new(&matrix)?;
        Ok(MinimalExtensionStepper {
            sys: sys.clone(),
            tau,
            perm,
            m1,
            b1,
            solver,
        })
    }
}

impl Stepper for MinimalExtensionStepper {
    fn step(&mut self, state: &State, t: f64) -> Result<StepOutcome> {
        let sys = &self.sys;
        let (n, m) = (sys.n(), sys.m());
        let tau = self.tau;
        let cols1 = self.perm.leading();
        let v1_old = DVector::from_fn(n - m, |i, _| state.v[cols1[i]]);

        let mut rhs = DVector::zeros(n + 2 * m);
        let rhs_mom = sys.f.eval(t) - sys.convection.eval(&state.v)
            + self.m1.matvec(&v1_old)? / tau;
        rhs.rows_mut(0, n).copy_from(&rhs_mom);
        rhs.rows_mut(n, m).copy_from(&sys.g.eval(t + tau));
        let rhs_hidden = sys.g.derivative(t + tau) + self.b1.matvec(&v1_old)? / tau;
        rhs.rows_mut(n + m, m).copy_from(&rhs_hidden);

        let x = self.solver.solve(&rhs)?;
        let mut v_new = DVector::zeros(n);
        for (i, &c) in self.perm.leading().iter().enumerate() {
            v_new[c] = x[i];
        }
        for (i, &c) in self.perm.trailing().iter().enumerate() {
            v_new[c] = x[n - m + i];
        }
        let p_new = x.rows(n + m, m).into_owned();
        Ok(StepOutcome {
            v: v_new,
            p: p_new,
            log: StepLog {
                momentum: Some(SolveRecord::direct()),
                ..Default::default()
            },
        })
    }

    fn pressure_indexing(&self) -> PressureIndexing {
        PressureIndexing::AtCurrent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn permutation_identity_block_patterns() {
        // B = [I_2 | 0]: the identity columns are selected and moved last
        let b = SparseMatrix::from_triplets(2, 4, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let p = find_b2_permutation(&b).unwrap();
        assert_eq!(p.trailing(), &[0, 1]);
        assert_eq!(p.leading(), &[2, 3]);

        // B = [0 | I_2]: already in place, identity permutation
        let b = SparseMatrix::from_triplets(2, 4, vec![(0, 2, 1.0), (1, 3, 1.0)]).unwrap();
        let p = find_b2_permutation(&b).unwrap();
        assert_eq!(p.order, vec![0, 1, 2, 3]);

        // single row selecting its only nonzero column
        let b = SparseMatrix::from_triplets(1, 2, vec![(0, 1, 1.0)]).unwrap();
        let p = find_b2_permutation(&b).unwrap();
        assert_eq!(p.trailing(), &[1]);
    }

    #[test]
    fn permutation_random_full_rank_block_is_invertible() {
        let mut rng = StdRng::seed_from_u64(13);
        let bd = nalgebra::DMatrix::from_fn(3, 8, |_, _| rng.random_range(-1.0..1.0));
        let b = SparseMatrix::from_dense(&bd, 0.0);
        let p = find_b2_permutation(&b).unwrap();
        let b2 = b.select_cols(p.trailing()).unwrap().to_dense();
        let smin = b2
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |a, s| a.min(*s));
        assert!(smin > 1e-8);
    }

    #[test]
    fn rank_deficient_b_is_rejected() {
        let b = SparseMatrix::zeros(1, 3);
        assert!(matches!(
            find_b2_permutation(&b),
            Err(Error::RankDeficient(_))
        ));
    }
}
