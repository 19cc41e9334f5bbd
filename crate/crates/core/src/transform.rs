//! Linear transforms for the trace condition `tr(A M Aᵀ) > 2 λ_max(A M Aᵀ)`.
//!
//! Everything here is a pure function of its inputs. The searches are
//! deterministic: multi-start results are selected by best objective value with
//! ties broken by start index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Matrix, SymMatrix};
use crate::scalar::Real;

/// Relative threshold below which the smallest eigenvalue makes a matrix "singular".
pub const PD_REL_TOL: f64 = 1e-10;

/// Trace, top eigenvalue and margin of one transformed covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureMargin<T> {
    pub trace: T,
    pub lambda_max: T,
    /// `trace − 2·lambda_max`; positive iff the trace condition holds.
    pub margin: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformReport<T> {
    pub a: Matrix<T>,
    pub per_measure: Vec<MeasureMargin<T>>,
    /// `max_j λ_max / trace`.
    pub psi: T,
}

impl<T: Real> TransformReport<T> {
    /// Evaluates `a` against every covariance.
    pub fn evaluate(a: Matrix<T>, ms: &[SymMatrix<T>]) -> Result<Self> {
        if a.max_abs() == T::zero() {
            return Err(Error::ZeroMatrix);
        }
        let mut per_measure = Vec::with_capacity(ms.len());
        let mut psi = T::zero();
        for (j, m) in ms.iter().enumerate() {
            let t = a.congruence(m)?;
            let trace = t.trace();
            if !(trace > T::zero()) {
                return Err(Error::DegenerateTrace(j));
            }
            let lambda_max = t.lambda_max();
            psi = psi.max(lambda_max / trace);
            per_measure.push(MeasureMargin { trace, lambda_max, margin: trace - T::lit(2.0) * lambda_max });
        }
        Ok(Self { a, per_measure, psi })
    }

    pub fn margins(&self) -> Vec<T> {
        self.per_measure.iter().map(|m| m.margin).collect()
    }

    /// True when every transformed covariance satisfies the trace condition.
    pub fn satisfies_trace_condition(&self) -> bool {
        self.per_measure.iter().all(|m| m.margin > T::zero())
    }
}

impl<T: Real + Serialize> Serialize for TransformReport<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TransformReport", 5)?;
        st.serialize_field("A", &self.a)?;
        st.serialize_field("margins", &self.margins())?;
        st.serialize_field("traces", &self.per_measure.iter().map(|m| m.trace).collect::<Vec<_>>())?;
        st.serialize_field("lambda_max", &self.per_measure.iter().map(|m| m.lambda_max).collect::<Vec<_>>())?;
        st.serialize_field("psi", &self.psi)?;
        st.end()
    }
}

/// `tr(M) − 2 λ_max(M)`.
pub fn trace_condition_margin<T: Real>(m: &SymMatrix<T>) -> T {
    m.trace() - T::lit(2.0) * m.lambda_max()
}

/// Fails unless `λ_min > 1e−10 · tr`.
pub fn check_positive_definite<T: Real>(m: &SymMatrix<T>) -> Result<()> {
    let e = jacobi_eigen(m, T::lit(1e-13));
    let min = *e.values.last().expect("non-empty");
    let tr = m.trace();
    if min > T::tol_floor(T::lit(PD_REL_TOL), 16.0) * tr && tr > T::zero() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { min_eigenvalue: min.as_f64(), trace: tr.as_f64() })
    }
}

/// `W = D·U` with `U M Uᵀ = diag(λ)` and `D = diag(λ^{-1/2})`, so that `W M Wᵀ = I`.
pub fn whiten<T: Real>(m: &SymMatrix<T>, tol: T) -> Result<Matrix<T>> {
    let e = jacobi_eigen(m, T::lit(1e-13));
    let tr = m.trace();
    let min = *e.values.last().expect("non-empty");
    if !(min > tol * tr) || !(tr > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min.as_f64(), trace: tr.as_f64() });
    }
    let u = e.vectors.transpose();
    let d: Vec<T> = e.values.iter().map(|&l| T::one() / l.sqrt()).collect();
    Matrix::from_diag(&d).matmul(&u)
}

/// Explicit transform for two positive definite 3×3 covariances.
///
/// Whiten `M1`, rotate so that the whitened `M2` is `diag(λ1 ≥ λ2 ≥ λ3)`, and if
/// `λ1 ≥ λ2 + λ3` shrink the first axis by `√(λ2/λ1)`.
pub fn construct_joint_transform_3d<T: Real>(m1: &SymMatrix<T>, m2: &SymMatrix<T>) -> Result<TransformReport<T>> {
    for m in [m1, m2] {
        if m.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: m.dim() });
        }
        check_positive_definite(m)?;
    }
    let w = whiten(m1, T::tol_floor(T::lit(PD_REL_TOL), 16.0))?;
    let m2w = w.congruence(m2)?;
    let e = jacobi_eigen(&m2w, T::lit(1e-13));
    let v = e.vectors.transpose();
    let mut a = v.matmul(&w)?;
    let (l1, l2, l3) = (e.values[0], e.values[1], e.values[2]);
    if l1 >= l2 + l3 {
        let b = Matrix::from_diag(&[(l2 / l1).sqrt(), T::one(), T::one()]);
        a = b.matmul(&a)?;
    }
    TransformReport::evaluate(a, &[m1.clone(), m2.clone()])
}

/// `Ψ(A) = max_j λ_max(A M_j Aᵀ) / tr(A M_j Aᵀ)`.
pub fn psi_objective<T: Real>(a: &Matrix<T>, ms: &[SymMatrix<T>]) -> Result<T> {
    Ok(TransformReport::evaluate(a.clone(), ms)?.psi)
}

/// Largest pairwise commutator `‖M_i M_j − M_j M_i‖_F / (‖M_i‖_F ‖M_j‖_F)`.
pub fn max_relative_commutator<T: Real>(ms: &[SymMatrix<T>]) -> Result<T> {
    let mut worst = T::zero();
    for (i, a) in ms.iter().enumerate() {
        for b in &ms[i + 1..] {
            let ab = a.as_matrix().matmul(b.as_matrix())?;
            let ba = b.as_matrix().matmul(a.as_matrix())?;
            let scale = a.as_matrix().norm_fro() * b.as_matrix().norm_fro();
            if scale > T::zero() {
                worst = worst.max(ab.sub(&ba)?.norm_fro() / scale);
            }
        }
    }
    Ok(worst)
}

/// Orthogonal `Q` such that every `Qᵀ M_i Q` is diagonal, for a commuting family.
///
/// Diagonalizes the first matrix, then refines each cluster of (numerically)
/// equal eigenvalues with the next matrix, and so on.
pub fn joint_diagonalize<T: Real>(ms: &[SymMatrix<T>], tol: T) -> Result<Matrix<T>> {
    let n = match ms.first() {
        Some(m) => m.dim(),
        None => return Err(Error::InvalidArgument("empty family".into())),
    };
    if let Some(m) = ms.iter().find(|m| m.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
    }
    let comm = max_relative_commutator(ms)?;
    if comm > tol {
        return Err(Error::NonCommuting(comm.as_f64()));
    }

    let mut q = Matrix::<T>::identity(n);
    let mut blocks: Vec<Vec<usize>> = vec![(0..n).collect()];
    for m in ms {
        let b = q.transpose().congruence(m)?;
        let cluster_tol = T::tol_floor(T::lit(1e-9), 64.0) * m.as_matrix().norm_fro().max(T::min_positive_value());
        let mut next_blocks = Vec::with_capacity(blocks.len());
        for block in &blocks {
            if block.len() == 1 {
                next_blocks.push(block.clone());
                continue;
            }
            let sub_rows: Vec<Vec<T>> = block.iter().map(|&i| block.iter().map(|&j| b[(i, j)]).collect()).collect();
            let sub = SymMatrix::symmetrize(Matrix::from_rows(&sub_rows)?);
            let e = jacobi_eigen(&sub, T::lit(1e-14));
            // rotate the block's columns of q
            let old_cols: Vec<Vec<T>> = block.iter().map(|&c| q.column(c)).collect();
            for (new_pos, &col) in block.iter().enumerate() {
                for row in 0..n {
                    let mut s = T::zero();
                    for (k, oc) in old_cols.iter().enumerate() {
                        s = s + oc[row] * e.vectors[(k, new_pos)];
                    }
                    q[(row, col)] = s;
                }
            }
            let mut current = vec![block[0]];
            for k in 1..block.len() {
                if (e.values[k - 1] - e.values[k]).abs() <= cluster_tol {
                    current.push(block[k]);
                } else {
                    next_blocks.push(std::mem::replace(&mut current, vec![block[k]]));
                }
            }
            next_blocks.push(current);
        }
        blocks = next_blocks;
    }

    let qt = q.transpose();
    for m in ms {
        let d = qt.congruence(m)?;
        let limit = T::tol_floor(T::lit(1e-8), 1e3) * m.trace().abs();
        if d.off_diagonal_norm() > limit {
            return Err(Error::SearchFailed(format!(
                "joint diagonalization left off-diagonal mass {}",
                d.off_diagonal_norm()
            )));
        }
    }
    Ok(q)
}

/// Number of multi-starts used by [`minimize_psi_diagonal`].
pub const DIAGONAL_STARTS: usize = 8;
const DIAGONAL_SEED: u64 = 0x5eed_d1a6;

/// `log` of every ratio `u_i m_ji / Σ_l u_l m_jl` with `u = exp(w)` (squared diagonal of `A`);
/// `logs[j][i] = log m_ji`.
fn log_ratios<T: Real>(w: &[T], logs: &[Vec<T>], out: &mut Vec<T>) {
    out.clear();
    let wmax = w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    for l in logs {
        let start = out.len();
        let mut total = T::zero();
        for (&wi, &li) in w.iter().zip(l) {
            let t = wi - wmax + li;
            total = total + t.exp();
            out.push(t);
        }
        let lt = total.ln();
        for t in &mut out[start..] {
            *t = *t - lt;
        }
    }
}

/// Log-sum-exp smoothing of `log Ψ`; `temperature == 0` gives `log Ψ` itself.
fn surrogate<T: Real>(w: &[T], diags: &[Vec<T>], temperature: T, scratch: &mut Vec<T>) -> T {
    log_ratios(w, diags, scratch);
    let top = scratch.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    if temperature == T::zero() {
        return top;
    }
    let s: T = scratch.iter().map(|&x| ((x - top) / temperature).exp()).sum();
    top + temperature * s.ln()
}

/// Golden-section minimization of a scalar function on `[lo, hi]`.
fn golden_section<T: Real>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T, iters: usize) -> (T, T) {
    let g = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// [`surrogate`] as a function of the single coordinate `w_i`, with the other
/// terms of every row folded into a per-row maximum and weight.
struct CoordinateSlice<T> {
    /// `(Σ_{k≠i} e^{w_k + l_jk − shift}, max_{k≠i} (w_k + l_jk − shift), Σ_{k≠i} e^{(c − max)/τ}, l_ji)` per row.
    rows: Vec<(T, T, T, T)>,
    shift: T,
    temperature: T,
}

impl<T: Real> CoordinateSlice<T> {
    fn new(w: &[T], i: usize, logs: &[Vec<T>], temperature: T) -> Self {
        let shift = w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let rows = logs
            .iter()
            .map(|l| {
                let (mut sum, mut top) = (T::zero(), T::neg_infinity());
                for (k, (&wk, &lk)) in w.iter().zip(l).enumerate() {
                    if k != i {
                        let c = wk + lk - shift;
                        sum = sum + c.exp();
                        top = top.max(c);
                    }
                }
                let weight = if temperature == T::zero() || top == T::neg_infinity() {
                    T::zero()
                } else {
                    w.iter()
                        .zip(l)
                        .enumerate()
                        .filter(|&(k, _)| k != i)
                        .map(|(_, (&wk, &lk))| ((wk + lk - shift - top) / temperature).exp())
                        .sum()
                };
                (sum, top, weight, l[i])
            })
            .collect();
        Self { rows, shift, temperature }
    }

    fn eval(&self, x: T) -> T {
        let x = x - self.shift;
        let mut top = T::neg_infinity();
        for &(sum, rest, _, li) in &self.rows {
            let lt = (sum + (x + li).exp()).ln();
            top = top.max(rest - lt).max(x + li - lt);
        }
        if self.temperature == T::zero() {
            return top;
        }
        let mut s = T::zero();
        for &(sum, rest, weight, li) in &self.rows {
            let lt = (sum + (x + li).exp()).ln();
            if weight > T::zero() {
                s = s + weight * ((rest - lt - top) / self.temperature).exp();
            }
            s = s + ((x + li - lt - top) / self.temperature).exp();
        }
        top + self.temperature * s.ln()
    }
}

fn diagonal_descent<T: Real>(mut w: Vec<T>, diags: &[Vec<T>], sweeps: usize) -> Vec<T> {
    let mut scratch = Vec::new();
    let schedule = [0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0];
    let per_stage = (sweeps / schedule.len()).max(1);
    let span = T::lit(4.0);
    for &tau in &schedule {
        let tau = T::lit(tau);
        for _ in 0..per_stage {
            let start = surrogate(&w, diags, tau, &mut scratch);
            for i in 0..w.len() {
                let center = w[i];
                let slice = CoordinateSlice::new(&w, i, diags, tau);
                let current = slice.eval(center);
                let (best_x, best_f) = golden_section(
                    |x| slice.eval(x),
                    center - span,
                    center + span,
                    48,
                );
                if best_f < current {
                    w[i] = best_x;
                }
            }
            let wmax = w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
            for x in &mut w {
                *x = *x - wmax;
            }
            let end = surrogate(&w, diags, tau, &mut scratch);
            if start - end <= T::tol_floor(T::lit(1e-12), 8.0) * (T::one() + end.abs()) {
                break;
            }
        }
    }
    w
}

/// Minimizes `Ψ` over invertible diagonal matrices normalized to `‖A‖ = 1`.
///
/// Multi-start coordinate descent on the log-entries (identity plus seven
/// log-uniform starts in `[1e−2, 1e2]`), golden-section line search per
/// coordinate on a log-sum-exp smoothing of `log Ψ` whose temperature is driven
/// to zero. `budget` caps the descent sweeps per start. Always returns the best
/// matrix found; see [`minimize_psi_diagonal`] for the success contract.
pub fn minimize_psi_diagonal_best<T: Real>(ms: &[SymMatrix<T>], budget: usize) -> Result<TransformReport<T>> {
    let d = match ms.first() {
        Some(m) => m.dim(),
        None => return Err(Error::InvalidArgument("empty family".into())),
    };
    let mut diags = Vec::with_capacity(ms.len());
    for m in ms {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
        }
        if !m.is_diagonal() || m.diagonal().iter().any(|&x| !(x > T::zero())) {
            return Err(Error::InvalidArgument("minimize_psi_diagonal needs diagonal matrices with positive entries".into()));
        }
        diags.push(m.diagonal().into_iter().map(|x| x.ln()).collect::<Vec<T>>());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DIAGONAL_SEED);
    let lo = (1e-2f64).ln();
    let hi = (1e2f64).ln();
    // entries of A are log-uniform; w holds log(a_i²)
    let starts: Vec<Vec<T>> = (0..DIAGONAL_STARTS)
        .map(|start| {
            if start == 0 {
                vec![T::zero(); d]
            } else {
                (0..d).map(|_| T::lit(2.0 * rng.random_range(lo..hi))).collect()
            }
        })
        .collect();
    let best = starts
        .into_par_iter()
        .map(|w0| {
            let w = diagonal_descent(w0, &diags, budget);
            (surrogate(&w, &diags, T::zero(), &mut Vec::new()), w)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<(T, Vec<T>)>, |best, (value, w)| match best {
            Some((b, _)) if !(value < b) => best,
            _ => Some((value, w)),
        });
    let (_, w) = best.expect("at least one start");
    let wmax = w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let a: Vec<T> = w.iter().map(|&x| ((x - wmax) * T::lit(0.5)).exp()).collect();
    TransformReport::evaluate(Matrix::from_diag(&a), ms)
}

/// As [`minimize_psi_diagonal_best`], but fails with [`Error::SearchFailed`] unless `Ψ < ½`.
pub fn minimize_psi_diagonal<T: Real>(ms: &[SymMatrix<T>], budget: usize) -> Result<TransformReport<T>> {
    let report = minimize_psi_diagonal_best(ms, budget)?;
    if report.psi < T::lit(0.5) {
        Ok(report)
    } else {
        Err(Error::SearchFailed(format!("best diagonal transform has psi = {} >= 1/2", report.psi)))
    }
}

/// Commuting (not necessarily diagonal) family: rotate with [`joint_diagonalize`],
/// minimize on the diagonals, and report `A·Qᵀ` against the original matrices.
pub fn minimize_psi_commuting<T: Real>(ms: &[SymMatrix<T>], tol: T, budget: usize) -> Result<TransformReport<T>> {
    let q = joint_diagonalize(ms, tol)?;
    let qt = q.transpose();
    let rotated = ms.iter().map(|m| Ok(SymMatrix::from_diag(&qt.congruence(m)?.diagonal()))).collect::<Result<Vec<_>>>()?;
    let diag = minimize_psi_diagonal_best(&rotated, budget)?;
    let report = TransformReport::evaluate(diag.a.matmul(&qt)?, ms)?;
    if report.psi < T::lit(0.5) {
        Ok(report)
    } else {
        Err(Error::SearchFailed(format!("best transform has psi = {} >= 1/2", report.psi)))
    }
}

/// Budget for [`search_transform_general`].
#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    /// Random restarts beyond the structured starting points.
    pub restarts: usize,
    /// Objective evaluations per local descent.
    pub evaluations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { restarts: 16, evaluations: 4000, seed: 0x5ea4c4 }
    }
}

#[derive(Clone, Debug)]
pub struct GeneralSearch<T> {
    /// Best transform seen (if any start produced a finite objective).
    pub best: Option<TransformReport<T>>,
    pub success: bool,
    /// Label of the start that produced `best`.
    pub origin: String,
}

impl<T: Real> GeneralSearch<T> {
    /// The transform, only when it satisfies the trace condition.
    pub fn into_option(self) -> Option<TransformReport<T>> {
        if self.success {
            self.best
        } else {
            None
        }
    }
}

fn psi_or_inf<T: Real>(a: &Matrix<T>, ms: &[SymMatrix<T>]) -> T {
    psi_objective(a, ms).unwrap_or(T::infinity())
}

/// Pattern search on all entries of `A`, halving the step on failure.
fn pattern_descent<T: Real>(mut a: Matrix<T>, ms: &[SymMatrix<T>], evaluations: usize) -> (Matrix<T>, T) {
    let mut best = psi_or_inf(&a, ms);
    let mut step = T::lit(0.25) * a.max_abs().max(T::lit(1e-3));
    let mut used = 1;
    let n = a.rows();
    let m = a.cols();
    let floor = T::lit(1e-10) * a.max_abs().max(T::lit(1e-3));
    while used < evaluations && step > floor {
        let mut improved = false;
        'coords: for i in 0..n {
            for j in 0..m {
                for dir in [T::one(), -T::one()] {
                    let mut trial = a.clone();
                    trial[(i, j)] = trial[(i, j)] + dir * step;
                    let v = psi_or_inf(&trial, ms);
                    used += 1;
                    if v < best {
                        best = v;
                        a = trial;
                        improved = true;
                        break;
                    }
                    if used >= evaluations {
                        break 'coords;
                    }
                }
            }
        }
        if !improved {
            step = step * T::lit(0.5);
        } else {
            // keep entries O(1)
            let s = a.max_abs();
            if s > T::zero() {
                a = a.scale(T::one() / s);
                step = step / s;
            }
        }
    }
    (a, best)
}

/// Restricts `ms` to the span of their joint support when it is 3-dimensional
/// (and there are exactly two of them) and applies the explicit 3-D construction there.
fn subspace_construction<T: Real>(ms: &[SymMatrix<T>]) -> Option<Matrix<T>> {
    if ms.len() != 2 {
        return None;
    }
    let d = ms[0].dim();
    let mut total = ms[0].as_matrix().clone();
    for i in 0..d {
        for j in 0..d {
            total[(i, j)] = total[(i, j)] + ms[1][(i, j)];
        }
    }
    let total = SymMatrix::symmetrize(total);
    let e = jacobi_eigen(&total, T::lit(1e-14));
    let thresh = T::lit(1e-9) * total.trace();
    let basis: Vec<Vec<T>> = (0..d).filter(|&k| e.values[k] > thresh).map(|k| e.vectors.column(k)).collect();
    if basis.len() != 3 {
        return None;
    }
    let p = Matrix::from_rows(&basis).ok()?; // 3 × d
    let m1 = p.congruence(&ms[0]).ok()?;
    let m2 = p.congruence(&ms[1]).ok()?;
    let a3 = construct_joint_transform_3d(&m1, &m2).ok()?.a;
    p.transpose().matmul(&a3).ok()?.matmul(&p).ok()
}

/// Best-effort search for a common transform satisfying the trace condition.
///
/// Starting points: the identity, the whitening of each covariance, the
/// diagonal optimum after joint diagonalization (commuting families), the
/// explicit construction on a shared 3-D support (two measures), and seeded
/// random restarts. Each start is refined by pattern search on `Ψ`.
///
/// A failed search proves nothing about existence.
pub fn search_transform_general<T: Real>(ms: &[SymMatrix<T>], budget: SearchBudget) -> Result<GeneralSearch<T>> {
    let d = match ms.first() {
        Some(m) => m.dim(),
        None => return Err(Error::InvalidArgument("empty family".into())),
    };
    if let Some(m) = ms.iter().find(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
    }

    let mut starts: Vec<(String, Matrix<T>)> = vec![("identity".into(), Matrix::identity(d))];
    for (j, m) in ms.iter().enumerate() {
        if let Ok(w) = whiten(m, T::tol_floor(T::lit(PD_REL_TOL), 16.0)) {
            starts.push((format!("whiten[{j}]"), w));
        }
    }
    if let Ok(q) = joint_diagonalize(ms, T::lit(1e-9)) {
        let qt = q.transpose();
        let rotated: Option<Vec<SymMatrix<T>>> = ms
            .iter()
            .map(|m| qt.congruence(m).ok().map(|r| SymMatrix::from_diag(&r.diagonal())))
            .collect();
        if let Some(rotated) = rotated {
            if let Ok(rep) = minimize_psi_diagonal_best(&rotated, 200) {
                if let Ok(a) = rep.a.matmul(&qt) {
                    starts.push(("joint-diagonal".into(), a));
                }
            }
        }
    }
    if let Some(a) = subspace_construction(ms) {
        starts.push(("subspace-3d".into(), a));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    for r in 0..budget.restarts {
        let mut a = Matrix::identity(d);
        for i in 0..d {
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                a[(i, j)] = a[(i, j)] + T::lit(z);
            }
        }
        starts.push((format!("random[{r}]"), a));
    }

    let mut best: Option<(T, String, Matrix<T>)> = None;
    for (label, a0) in starts {
        let initial = psi_or_inf(&a0, ms);
        let (a, value) =
            if initial < T::lit(0.5) { (a0, initial) } else { pattern_descent(a0, ms, budget.evaluations) };
        if value.is_finite() && best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, label, a));
        }
    }
    Ok(match best {
        Some((_, origin, a)) => {
            let report = TransformReport::evaluate(a, ms)?;
            let success = report.psi < T::lit(0.5) && report.satisfies_trace_condition();
            GeneralSearch { best: Some(report), success, origin }
        }
        None => GeneralSearch { best: None, success: false, origin: String::new() },
    })
}
