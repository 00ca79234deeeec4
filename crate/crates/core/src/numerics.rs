//! Dense complex Hermitian kernels shared by every other module.
//!
//! The whole crate reduces to a few primitives: an eigendecomposition with a
//! deterministic column order, a PSD square root, Cholesky-backed positive
//! definite solves, and J0 for the temporal fading coefficient. Inverses are
//! never formed explicitly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, the working type for every array in the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Numerical guard rails, configurable per call site. Defaults suit the
/// matrix sizes this crate works with (up to a few hundred rows).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Adjacent eigenvalues closer than this, relative to the spectral
    /// radius, count as one degenerate cluster when ordering columns.
    pub eigen_cluster_rtol: f64,
    /// Most negative eigenvalue accepted by the PSD square root, relative
    /// to the spectral radius; anything above it clamps to zero.
    pub psd_slack: f64,
    /// Condition estimate above this aborts a positive definite solve.
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eigen_cluster_rtol: 1e-9,
            psd_slack: 1e-10,
            max_condition: 1e12,
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues non-increasing,
/// column k of `eigenvectors` paired with `eigenvalues[k]`.
///
/// Column order and phase are canonical: each eigenvector is scaled so its
/// largest-magnitude entry is real positive, and within a degenerate cluster
/// columns are ordered by the index of that entry. Repeated calls on equal
/// inputs therefore return identical decompositions.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMat,
}

impl EigenDecomposition {
    /// Number of eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.len() == 0
    }

    /// U f(Λ) Uᴴ.
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> CMat {
        let mut scaled = self.eigenvectors.clone();
        for k in 0..self.len() {
            let s = Complex64::new(f(self.eigenvalues[k]), 0.0);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= s;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    /// U Λ Uᴴ, the original matrix up to round-off.
    pub fn reconstruct(&self) -> CMat {
        self.rebuild_with(|l| l)
    }
}

/// (m + mᴴ)/2. Covariance recursions apply this after every update so
/// round-off never accumulates into asymmetry.
pub fn hermitize(m: &CMat) -> CMat {
    let mut out = m.adjoint();
    out += m;
    out.map(|z| z * 0.5)
}

/// Real part of the trace. The matrices this is used on are Hermitian, so
/// the imaginary part is round-off.
pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Eigendecomposition of a Hermitian matrix with default tolerances.
pub fn hermitian_eig(m: &CMat) -> Result<EigenDecomposition> {
    hermitian_eig_with(&Tolerances::default(), m)
}

pub fn hermitian_eig_with(tol: &Tolerances, m: &CMat) -> Result<EigenDecomposition> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "hermitian eigendecomposition needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });

    let mut values = DVector::zeros(n);
    let mut vectors = CMat::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[src];
        let col = canonical_phase(eig.eigenvectors.column(src).into_owned());
        vectors.set_column(k, &col);
    }

    let scale = values.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let gap = tol.eigen_cluster_rtol * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] <= gap {
            end += 1;
        }
        if end - start > 1 {
            order_cluster(&mut values, &mut vectors, start, end);
        }
        start = end;
    }

    Ok(EigenDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Scale a unit vector so its largest-magnitude entry (lowest index on
/// magnitude ties) is exactly real positive.
fn canonical_phase(mut v: CVec) -> CVec {
    let mut best = 0;
    let mut best_mag = 0.0f64;
    for (idx, z) in v.iter().enumerate() {
        let mag = z.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best = idx;
        }
    }
    let pivot = v[best];
    let mag = pivot.norm();
    if mag > 0.0 {
        let phase = pivot.conj() / mag;
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[best] = Complex64::new(mag, 0.0);
    }
    v
}

fn pivot_index(v: &CMat, col: usize) -> usize {
    let mut best = 0;
    let mut best_mag = 0.0f64;
    for (idx, z) in v.column(col).iter().enumerate() {
        let mag = z.norm_sqr();
        if mag > best_mag {
            best_mag = mag;
            best = idx;
        }
    }
    best
}

/// Deterministic order inside a degenerate eigenvalue cluster: sort columns
/// by pivot index, falling back to entrywise lexicographic comparison.
/// Eigenvalues travel with their columns; within the cluster they differ by
/// at most the cluster tolerance, so monotonicity holds to that tolerance.
fn order_cluster(values: &mut DVector<f64>, vectors: &mut CMat, start: usize, end: usize) {
    let mut cols: Vec<(usize, f64, CVec)> = (start..end)
        .map(|k| (pivot_index(vectors, k), values[k], vectors.column(k).into_owned()))
        .collect();
    cols.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            for (za, zb) in a.2.iter().zip(b.2.iter()) {
                let c = za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im));
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    for (offset, (_, value, col)) in cols.into_iter().enumerate() {
        values[start + offset] = value;
        vectors.set_column(start + offset, &col);
    }
}

/// Hermitian square root of a PSD matrix with default tolerances.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    psd_sqrt_with(&Tolerances::default(), m)
}

pub fn psd_sqrt_with(tol: &Tolerances, m: &CMat) -> Result<CMat> {
    let eig = hermitian_eig_with(tol, m)?;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let floor = -tol.psd_slack * scale;
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(Error::Domain(format!(
            "matrix is not positive semidefinite: eigenvalue {bad:.3e}"
        )));
    }
    Ok(hermitize(&eig.rebuild_with(|l| l.max(0.0).sqrt())))
}

pub(crate) fn guarded_cholesky(tol: &Tolerances, a: &CMat) -> Result<Cholesky<Complex64, Dyn>> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "positive definite solve needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let chol = Cholesky::new(hermitize(a)).ok_or_else(|| {
        Error::Singular("Cholesky factorization failed, matrix is not positive definite".into())
    })?;
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for z in chol.l_dirty().diagonal().iter() {
        let d = z.re;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let cond = (dmax / dmin).powi(2);
    if !cond.is_finite() || cond > tol.max_condition {
        return Err(Error::Singular(format!(
            "condition estimate {cond:.3e} exceeds limit {:.3e}",
            tol.max_condition
        )));
    }
    Ok(chol)
}

/// Solve a·x = b for Hermitian positive definite `a` via Cholesky.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    solve_hpd_with(&Tolerances::default(), a, b)
}

pub fn solve_hpd_with(tol: &Tolerances, a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve shapes disagree: a is {}x{}, b has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(guarded_cholesky(tol, a)?.solve(b))
}

/// Vector right-hand-side variant of [`solve_hpd`].
pub fn solve_hpd_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve shapes disagree: a is {}x{}, b has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(guarded_cholesky(&Tolerances::default(), a)?.solve(b))
}

/// Bessel function of the first kind, order zero. Absolute error is below
/// 1e-8 for |x| ≤ 100 (the implementation is good to near machine epsilon).
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}
