//! Regularity, Kronecker index, and causality of matrix pairs, plus the
//! rank-based strangeness verification for saddle-structured DAE systems.
//!
//! A matrix pair `(E, A)` defines the recurrence `E x_{k+1} = A x_k + f_k`.
//! For a regular pair the Weierstrass form splits the recurrence into a
//! causal part and a nilpotent part; the nilpotency index is what decides
//! whether the recurrence is causal (index <= 1) or feeds on future inputs
//! (index >= 2). The index is computed here by rank stabilization of powers
//! of `(c E - A)^{-1} E` for a sampled nonsingular shift `c`, which is exact
//! for the dense, desk-scale pencils this module is meant for.
//!
//! Everything densifies its input, so a hard size cap applies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::norm::SpdFactor;
use crate::solve::DirectSolver;
use crate::sparse::{BlockEntry, SparseMatrix};

/// Hard cap on the number of rows a matrix may have before pencil analysis
/// refuses to densify it.
pub const DENSE_ANALYSIS_CAP: usize = 2000;

/// Default relative tolerance for the "vanishing equations" consistency
/// check during pressure-kernel deflation.
pub const DEFLATION_CONSISTENCY_TOL: f64 = 1e-10;

/// Numerical rank: singular values at or below `max(m, n) * eps * sigma_max`
/// count as zero.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, s| acc.max(*s));
    if smax == 0.0 {
        return 0;
    }
    let tol = (a.nrows().max(a.ncols()) as f64) * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, s| acc.max(*s))
}

/// Orthonormal basis of the kernel of `b`, from the right singular vectors
/// belonging to the zero singular values (computed as eigenvectors of
/// `b' b`, which carries the full right singular basis).
pub fn kernel_basis(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.ncols();
    let gram = b.transpose() * b;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(*l));
    // the rank rule applied to the Gram matrix: its numerical zeros sit at
    // eps * lambda_max, not at (eps * sigma_max)^2
    let ltol = (b.nrows().max(n) as f64) * f64::EPSILON * lmax;
    let null_cols: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= ltol)
        .collect();
    let mut c = DMatrix::zeros(n, null_cols.len());
    for (j, &i) in null_cols.iter().enumerate() {
        c.set_column(j, &eig.eigenvectors.column(i));
    }
    c
}

fn cap_check(size: usize) -> Result<()> {
    if size > DENSE_ANALYSIS_CAP {
        Err(Error::SizeCap {
            size,
            cap: DENSE_ANALYSIS_CAP,
        })
    } else {
        Ok(())
    }
}

/// A pencil `(E, A)` of equally sized square matrices.
#[derive(Debug, Clone)]
pub struct MatrixPair {
    pub e: SparseMatrix,
    pub a: SparseMatrix,
}

impl MatrixPair {
    pub fn new(e: SparseMatrix, a: SparseMatrix) -> Result<Self> {
        if !e.is_square() || !a.is_square() || e.nrows() != a.nrows() {
            return Err(Error::dim(format!(
                "matrix pair: E is {}x{}, A is {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(MatrixPair { e, a })
    }

    pub fn size(&self) -> usize {
        self.e.nrows()
    }

    /// Regularity via sampled shifts: the pair is reported regular iff
    /// `c E - A` has full numerical rank for one of the sampled `c`. A
    /// regular pencil has only finitely many singular shifts, so a failed
    /// sample set means singular for all practical purposes; the report
    /// carries the witness shift either way.
    pub fn is_regular(&self) -> Result<(bool, f64)> {
        cap_check(self.size())?;
        if self.size() == 0 {
            return Ok((true, 1.0));
        }
        let ed = self.e.to_dense();
        let ad = self.a.to_dense();
        let se = spectral_norm(&ed);
        let sa = spectral_norm(&ad);
        let mut shifts = vec![1.0, -1.0, 2.0, std::f64::consts::PI];
        if se > 0.0 {
            shifts.push(1.0 + sa / se);
        }
        let n = self.size();
        let mut last = shifts[0];
        for c in shifts {
            last = c;
            let shifted = &ed * c - &ad;
            if numerical_rank(&shifted) == n {
                return Ok((true, c));
            }
        }
        Ok((false, last))
    }

    /// Kronecker index of a regular pair: with a witness shift `c`, form
    /// `E_hat = (c E - A)^{-1} E` and return the smallest `k` at which
    /// `rank(E_hat^k)` stops decreasing. `E_hat` is normalized by its
    /// spectral norm first so that powers stay well scaled.
    pub fn kronecker_index(&self) -> Result<usize> {
        cap_check(self.size())?;
        let (regular, c) = self.is_regular()?;
        if !regular {
            return Err(Error::NotRegular);
        }
        let n = self.size();
        if n == 0 {
            return Ok(0);
        }
        let ed = self.e.to_dense();
        let shifted = SparseMatrix::from_dense(&(&ed * c - self.a.to_dense()), 0.0);
        let solver = DirectSolver::new(&shifted)?;
        let mut e_hat = DMatrix::zeros(n, n);
        for j in 0..n {
            e_hat.set_column(j, &solver.solve(&ed.column(j).into_owned())?);
        }
        let scale = spectral_norm(&e_hat);
        if scale == 0.0 {
            // E = 0: purely algebraic recurrence, nilpotent block is zero
            return Ok(1);
        }
        e_hat /= scale;

        let mut power = DMatrix::identity(n, n);
        let mut prev_rank = n;
        for k in 0..=n {
            let next = &power * &e_hat;
            let next_rank = numerical_rank(&next);
            if next_rank == prev_rank {
                return Ok(k);
            }
            power = next;
            prev_rank = next_rank;
        }
        // ranks strictly decrease at most n times
        Ok(n)
    }

    /// Full classification: regularity, index, causality.
    pub fn analyze(&self) -> Result<PencilReport> {
        let (regular, sample_shift) = self.is_regular()?;
        let kronecker_index = if regular {
            Some(self.kronecker_index()?)
        } else {
            None
        };
        Ok(PencilReport {
            regular,
            kronecker_index,
            sample_shift,
            causal: regular && kronecker_index.is_some_and(|nu| nu <= 1),
        })
    }
}

/// Outcome of analyzing one matrix pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilReport {
    pub regular: bool,
    /// `None` when the pair is not regular.
    pub kronecker_index: Option<usize>,
    /// The shift that witnessed regularity (or the last one tried).
    pub sample_shift: f64,
    /// Causal iff regular with Kronecker index <= 1.
    pub causal: bool,
}

impl std::fmt::Display for PencilReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let index = self
            .kronecker_index
            .map_or("undefined".to_string(), |i| i.to_string());
        write!(
            f,
            "regular={},index={},causal={},sample_shift={}",
            self.regular, index, self.causal, self.sample_shift
        )
    }
}

/// The ingredients of a linearized semi-discrete saddle system: SPD mass
/// `M`, momentum Jacobian `K_v`, and constraint matrix `B`.
#[derive(Debug, Clone)]
pub struct SaddleSystemDescriptor {
    pub mass: SparseMatrix,
    pub k_v: SparseMatrix,
    pub b: SparseMatrix,
}

impl SaddleSystemDescriptor {
    pub fn new(mass: SparseMatrix, k_v: SparseMatrix, b: SparseMatrix) -> Result<Self> {
        let n = mass.nrows();
        if !mass.is_square() || !k_v.is_square() || k_v.nrows() != n || b.ncols() != n {
            return Err(Error::dim(format!(
                "descriptor: M is {}x{}, K_v is {}x{}, B is {}x{}",
                mass.nrows(),
                mass.ncols(),
                k_v.nrows(),
                k_v.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(SaddleSystemDescriptor { mass, k_v, b })
    }

    pub fn n(&self) -> usize {
        self.mass.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    fn mass_factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(&self.mass)
    }

    fn require_full_rank_b(&self) -> Result<()> {
        if numerical_rank(&self.b.to_dense()) != self.m() {
            return Err(Error::RankDeficient(
                "B does not have full row rank; deflate the pressure kernel first".into(),
            ));
        }
        Ok(())
    }

    /// `M^{-1} B'` as a dense block.
    fn minv_bt(&self) -> Result<DMatrix<f64>> {
        let f = self.mass_factor()?;
        let bt = self.b.to_dense().transpose();
        let mut out = DMatrix::zeros(self.n(), self.m());
        for j in 0..self.m() {
            out.set_column(j, &f.solve(&bt.column(j).into_owned())?);
        }
        Ok(out)
    }
}

/// Pencil of the coupled implicit-explicit Euler recurrence over
/// `x = [v; p]`:
/// `([M/tau, 0; 0, 0], [M/tau + K_v, B'; B, 0])`.
pub fn build_imex_pencil(d: &SaddleSystemDescriptor, tau: f64) -> Result<MatrixPair> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    cap_check(d.n() + d.m())?;
    let (n, m) = (d.n(), d.m());
    let m_tau = d.mass.scaled(1.0 / tau);
    let f = m_tau.add_scaled(1.0, &d.k_v)?;
    let bt = d.b.transpose();
    let e = SparseMatrix::from_blocks(&[
        vec![BlockEntry::Mat(&m_tau), BlockEntry::ZeroSized(n, m)],
        vec![BlockEntry::ZeroSized(m, n), BlockEntry::ZeroSized(m, m)],
    ])?;
    let a = SparseMatrix::from_blocks(&[
        vec![BlockEntry::Mat(&f), BlockEntry::Mat(&bt)],
        vec![BlockEntry::Mat(&d.b), BlockEntry::ZeroSized(m, m)],
    ])?;
    MatrixPair::new(e, a)
}

/// Pencil of the projection scheme over `x = [v_tilde; phi; v; p]`, with
/// the projection multiplier carried in its `(2/tau)`-scaled form.
pub fn build_projection_pencil(d: &SaddleSystemDescriptor, tau: f64) -> Result<MatrixPair> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    cap_check(2 * (d.n() + d.m()))?;
    d.require_full_rank_b()?;
    let (n, m) = (d.n(), d.m());
    let m_tau = d.mass.scaled(1.0 / tau);
    let f = m_tau.add_scaled(1.0, &d.k_v)?;
    let bt = d.b.transpose();
    let minv_bt = d.minv_bt()?;
    let schur = SparseMatrix::from_dense(&(d.b.to_dense() * &minv_bt), 0.0); // B M^{-1} B'
    let neg_m = d.mass.scaled(-1.0);
    let neg_half_tau_bt = bt.scaled(-0.5 * tau);
    let neg_two_tau_b = d.b.scaled(-2.0 / tau);
    let neg_schur = schur.scaled(-1.0);
    let eye_m = SparseMatrix::identity(m);
    let neg_eye_m = eye_m.scaled(-1.0);

    let e = SparseMatrix::from_blocks(&[
        vec![
            BlockEntry::Mat(&m_tau),
            BlockEntry::ZeroSized(n, m),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::ZeroSized(m, n),
            BlockEntry::ZeroSized(m, m),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Mat(&neg_m),
            BlockEntry::Mat(&neg_half_tau_bt),
            BlockEntry::Mat(&d.mass),
            BlockEntry::ZeroSized(n, m),
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Mat(&neg_eye_m),
            BlockEntry::Zero,
            BlockEntry::Mat(&eye_m),
        ],
    ])?;
    let a = SparseMatrix::from_blocks(&[
        vec![
            BlockEntry::ZeroSized(n, n),
            BlockEntry::ZeroSized(n, m),
            BlockEntry::Mat(&f),
            BlockEntry::Mat(&bt),
        ],
        vec![
            BlockEntry::Mat(&neg_two_tau_b),
            BlockEntry::Mat(&neg_schur),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::ZeroSized(n, n),
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::Mat(&eye_m),
        ],
    ])?;
    MatrixPair::new(e, a)
}

/// Pencil of the SIMPLE scheme over `x = [v_tilde; p_delta; v; p]`, with
/// `S_A = B (M/tau + K_v)^{-1} B'` in the pressure-correction row.
pub fn build_simple_pencil(d: &SaddleSystemDescriptor, tau: f64) -> Result<MatrixPair> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("tau must be positive".into()));
    }
    cap_check(2 * (d.n() + d.m()))?;
    d.require_full_rank_b()?;
    let (n, m) = (d.n(), d.m());
    let m_tau = d.mass.scaled(1.0 / tau);
    let f = m_tau.add_scaled(1.0, &d.k_v)?;
    let bt = d.b.transpose();

    let f_lu = DirectSolver::new(&f)?;
    let bt_dense = bt.to_dense();
    let mut finv_bt = DMatrix::zeros(n, m);
    for j in 0..m {
        finv_bt.set_column(j, &f_lu.solve(&bt_dense.column(j).into_owned())?);
    }
    let finv_bt_sp = SparseMatrix::from_dense(&finv_bt, 0.0);
    let s_a = SparseMatrix::from_dense(&(d.b.to_dense() * &finv_bt), 0.0);

    let eye_n = SparseMatrix::identity(n);
    let neg_eye_n = eye_n.scaled(-1.0);
    let eye_m = SparseMatrix::identity(m);
    let neg_eye_m = eye_m.scaled(-1.0);
    let neg_b = d.b.scaled(-1.0);
    let neg_s_a = s_a.scaled(-1.0);

    let e = SparseMatrix::from_blocks(&[
        vec![
            BlockEntry::Mat(&m_tau),
            BlockEntry::ZeroSized(n, m),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::ZeroSized(m, n),
            BlockEntry::ZeroSized(m, m),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Mat(&eye_n),
            BlockEntry::Mat(&finv_bt_sp),
            BlockEntry::Mat(&neg_eye_n),
            BlockEntry::ZeroSized(n, m),
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Mat(&neg_eye_m),
            BlockEntry::Zero,
            BlockEntry::Mat(&eye_m),
        ],
    ])?;
    let a = SparseMatrix::from_blocks(&[
        vec![
            BlockEntry::ZeroSized(n, n),
            BlockEntry::ZeroSized(n, m),
            BlockEntry::Mat(&f),
            BlockEntry::Mat(&bt),
        ],
        vec![
            BlockEntry::Mat(&neg_b),
            BlockEntry::Mat(&neg_s_a),
            BlockEntry::Zero,
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::ZeroSized(n, n),
            BlockEntry::Zero,
        ],
        vec![
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::Zero,
            BlockEntry::Mat(&eye_m),
        ],
    ])?;
    MatrixPair::new(e, a)
}

/// Result of the rank-hypothesis verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrangenessReport {
    /// Whether all three rank conditions hold (hypothesis satisfied at
    /// one differentiation).
    pub mu_one_satisfied: bool,
    /// Number of algebraic variables, `a = 2m`.
    pub algebraic_count: usize,
    /// Number of differential variables, `d = n - m`.
    pub differential_count: usize,
}

/// Verify the three rank conditions under which the saddle DAE is
/// strangeness index 1:
///
/// 1. `rank M_1 = 2n` for the inflated pair, with annihilator
///    `Z_2 = [0, M^{-1}B'; I, 0; 0, 0; 0, I]`;
/// 2. `A_hat_2 = Z_2' N_1 [I; 0] = [B, 0; B M^{-1} K_v, B M^{-1} B']`
///    has rank `2m`, with kernel `T_2 = [C; C_2]` built from a kernel
///    basis `C` of `B` and `C_2 = -(B M^{-1} B')^{-1} B M^{-1} K_v C`;
/// 3. `rank(C' M C) = n - m`.
///
/// Requires `B` of full row rank; deflate the pressure kernel first
/// otherwise.
pub fn strangeness_hypothesis_check(d: &SaddleSystemDescriptor) -> Result<StrangenessReport> {
    cap_check(2 * (d.n() + d.m()))?;
    d.require_full_rank_b()?;
    let (n, m) = (d.n(), d.m());
    let algebraic_count = 2 * m;
    let differential_count = n - m;

    let md = d.mass.to_dense();
    let kd = d.k_v.to_dense();
    let bd = d.b.to_dense();
    let s = n + m;

    // E = [M, 0; 0, 0], A_x = [K_v, B'; B, 0]
    let mut e_full = DMatrix::zeros(s, s);
    e_full.view_mut((0, 0), (n, n)).copy_from(&md);
    let mut a_x = DMatrix::zeros(s, s);
    a_x.view_mut((0, 0), (n, n)).copy_from(&kd);
    a_x.view_mut((0, n), (n, m)).copy_from(&bd.transpose());
    a_x.view_mut((n, 0), (m, n)).copy_from(&bd);

    // M_1 = [E, 0; -A_x, E], N_1 = [A_x, 0; 0, 0]
    let mut m1 = DMatrix::zeros(2 * s, 2 * s);
    m1.view_mut((0, 0), (s, s)).copy_from(&e_full);
    m1.view_mut((s, 0), (s, s)).copy_from(&(-&a_x));
    m1.view_mut((s, s), (s, s)).copy_from(&e_full);

    let rank_m1_ok = numerical_rank(&m1) == 2 * n;

    // Z_2 = [0, M^{-1}B'; I_m, 0; 0, 0; 0, I_m]
    let minv_bt = d.minv_bt()?;
    let mut z2 = DMatrix::zeros(2 * s, 2 * m);
    z2.view_mut((0, m), (n, m)).copy_from(&minv_bt);
    z2.view_mut((n, 0), (m, m))
        .copy_from(&DMatrix::identity(m, m));
    z2.view_mut((s + n, m), (m, m))
        .copy_from(&DMatrix::identity(m, m));

    let mut n1 = DMatrix::zeros(2 * s, 2 * s);
    n1.view_mut((0, 0), (s, s)).copy_from(&a_x);
    let mut selector = DMatrix::zeros(2 * s, s);
    selector
        .view_mut((0, 0), (s, s))
        .copy_from(&DMatrix::identity(s, s));
    let a_hat_2 = z2.transpose() * &n1 * selector;
    let rank_a2_ok = numerical_rank(&a_hat_2) == 2 * m;

    // T_2 = [C; C_2] with B C = 0 and C_2 = -(B M^{-1} B')^{-1} B M^{-1} K_v C
    let c = kernel_basis(&bd);
    let kernel_ok = c.ncols() == n - m;
    let bminv = minv_bt.transpose(); // B M^{-1} (M symmetric)
    let s_m = &bd * &minv_bt; // B M^{-1} B'
    let s_lu = s_m.clone().lu();
    let rhs = &bminv * &kd * &c;
    let c2 = -(s_lu.solve(&rhs).ok_or(Error::Singular)?);
    let mut t2 = DMatrix::zeros(s, n - m);
    t2.view_mut((0, 0), (n, n - m)).copy_from(&c);
    t2.view_mut((n, 0), (m, n - m)).copy_from(&c2);
    // by construction A_hat_2 * T_2 = 0; the remaining condition is the
    // rank of the differential part
    let ctmc = c.transpose() * &md * &c;
    let rank_d_ok = numerical_rank(&ctmc) == n - m;

    Ok(StrangenessReport {
        mu_one_satisfied: rank_m1_ok && rank_a2_ok && kernel_ok && rank_d_ok,
        algebraic_count,
        differential_count,
    })
}

/// Outcome of removing redundant constraint rows.
#[derive(Debug, Clone)]
pub struct Deflation {
    pub b: SparseMatrix,
    pub g: DVector<f64>,
    /// Indices (in the original row numbering) of the kept rows, ascending.
    pub kept: Vec<usize>,
    /// Indices of the dropped rows, ascending.
    pub dropped: Vec<usize>,
}

/// Remove rows of `B` (and matching entries of `g`) until the remaining
/// constraint matrix has full row rank.
///
/// The rows to drop are chosen by a column-pivoted QR factorization of
/// `B'`: the first `rank` pivots mark a maximally independent row set.
/// Before anything is dropped the redundant equations are checked to be
/// consistent, i.e. the left-kernel components of `g` must vanish up to
/// `tol` relative to `||g||`; inconsistent constraints are an error.
pub fn deflate_pressure_kernel(
    b: &SparseMatrix,
    g: &DVector<f64>,
    tol: f64,
) -> Result<Deflation> {
    if g.len() != b.nrows() {
        return Err(Error::dim(format!(
            "deflation: B has {} rows, g has length {}",
            b.nrows(),
            g.len()
        )));
    }
    let m = b.nrows();
    let bd = b.to_dense();
    let rank = numerical_rank(&bd);
    if rank == m {
        return Ok(Deflation {
            b: b.clone(),
            g: g.clone(),
            kept: (0..m).collect(),
            dropped: Vec::new(),
        });
    }

    // consistency: the dropped equations must be vanishing equations
    let c0 = kernel_basis(&bd.transpose()); // B' C0 = 0
    let defect = c0.transpose() * g;
    let gscale = g.norm().max(1.0);
    if defect.norm() > tol * gscale {
        return Err(Error::InconsistentConstraint(format!(
            "redundant constraint rows carry data of size {:.3e} (tolerance {:.3e})",
            defect.norm(),
            tol * gscale
        )));
    }

    let mut kept = pivoted_row_selection(&bd, rank);
    kept.sort_unstable();
    let dropped: Vec<usize> = (0..m).filter(|i| !kept.contains(i)).collect();

    let b_kept = b.select_rows(&kept)?;
    if numerical_rank(&b_kept.to_dense()) != rank {
        return Err(Error::RankDeficient(
            "pivoted row selection failed to restore full rank".into(),
        ));
    }
    let g_kept = DVector::from_fn(kept.len(), |i, _| g[kept[i]]);
    Ok(Deflation {
        b: b_kept,
        g: g_kept,
        kept,
        dropped,
    })
}

/// Indices of `count` rows of `a` forming a maximally independent set,
/// chosen greedily by largest residual norm after orthogonalization
/// against the rows already picked (column-pivoted QR of the transpose,
/// written out directly).
pub(crate) fn pivoted_row_selection(a: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let m = a.nrows();
    let mut residual: Vec<DVector<f64>> = (0..m).map(|i| a.row(i).transpose()).collect();
    let mut available: Vec<usize> = (0..m).collect();
    let mut picked = Vec::with_capacity(count);
    for _ in 0..count {
        let (pos, _) = available
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, residual[i].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("count <= rank <= m");
        let i = available.swap_remove(pos);
        let mut q = residual[i].clone();
        let qn = q.norm();
        if qn == 0.0 {
            break;
        }
        q /= qn;
        for &j in &available {
            let proj = residual[j].dot(&q);
            residual[j].axpy(-proj, &q, 1.0);
        }
        picked.push(i);
    }
    picked
}
