//! Dense complex matrix kernel: Hermitian eigendecomposition, PSD square roots,
//! tolerant spans and residual norms.
//!
//! Every Hilbert space in the workbench is finite-dimensional, so closures of
//! spans are plain linear spans and are realized by [`orthonormal_span`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Numerical thresholds shared by every construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_eps: f64,
    /// Threshold against which clause residuals are asserted.
    pub residual_tol: f64,
    /// Most negative admissible eigenvalue of a PSD matrix.
    pub psd_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_eps: 1e-10,
            residual_tol: 1e-8,
            psd_floor: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(rank_eps: f64, residual_tol: f64, psd_floor: f64) -> Result<Self> {
        let tol = Tolerance {
            rank_eps,
            residual_tol,
            psd_floor,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_eps", self.rank_eps),
            ("residual_tol", self.residual_tol),
            ("psd_floor", self.psd_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTolerance(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rank_eps > self.residual_tol {
            return Err(Error::InvalidTolerance(format!(
                "rank_eps {} exceeds residual_tol {}",
                self.rank_eps, self.residual_tol
            )));
        }
        Ok(())
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn check_finite(m: &CMat, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Largest singular value; zero for empty matrices.
///
/// Zero rows and columns are dropped first; the rest goes through the
/// eigenvalues of the smaller Gram matrix, with an SVD fallback.
pub fn spectral_norm(m: &CMat) -> f64 {
    let rows: Vec<usize> = (0..m.nrows()).filter(|&i| m.row(i).iter().any(|z| *z != ZERO)).collect();
    let cols: Vec<usize> = (0..m.ncols()).filter(|&j| m.column(j).iter().any(|z| *z != ZERO)).collect();
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let a = m.select_rows(&rows).select_columns(&cols);
    if a.ncols() == 1 || a.nrows() == 1 {
        return frobenius_norm(&a);
    }
    let gram = if a.nrows() <= a.ncols() { &a * a.adjoint() } else { a.adjoint() * &a };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s));
    if top.is_finite() {
        return top.max(0.0).sqrt();
    }
    a.svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s))
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖A − B‖ / (1 + max(‖A‖, ‖B‖))` in the spectral norm.
pub fn residual(a: &CMat, b: &CMat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "residual of {:?} against {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let diff = spectral_norm(&(a - b));
    Ok(diff / (1.0 + spectral_norm(a).max(spectral_norm(b))))
}

/// Spectral norm of `A − B`, panicking on shape mismatch (internal use).
pub fn diff_norm(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "diff_norm shape mismatch");
    spectral_norm(&(a - b))
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    spectral_norm(&(m - m.adjoint()))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), b.shape()).copy_from(b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Exactly decoupled index sets (connected components of the nonzero pattern)
/// are diagonalized separately.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * real(0.5);
    let mut values = Vec::with_capacity(n);
    let mut vectors = zeros(n, n);
    let mut col = 0;
    for comp in components(&sym) {
        let k = comp.len();
        let sub = CMat::from_fn(k, k, |i, j| sym[(comp[i], comp[j])]);
        let (vals, vecs) = dense_eigen(sub);
        for j in 0..k {
            values.push(vals[j]);
            for i in 0..k {
                vectors[(comp[i], col)] = vecs[(i, j)];
            }
            col += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let mut out = zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        out.set_column(k, &vectors.column(i));
    }
    (sorted, out)
}

fn components(m: &CMat) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

fn dense_eigen(sym: CMat) -> (Vec<f64>, CMat) {
    let n = sym.nrows();
    if n == 1 {
        return (vec![sym[(0, 0)].re], identity(1));
    }
    let eig = sym.clone().symmetric_eigen();
    if eig_is_finite(&eig) {
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    // the QL iteration can break down on sparse inputs; a fixed rotation avoids it
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(n as u64);
    let q = random_unitary(n, &mut rng);
    let rotated = (q.adjoint() * &sym * &q).symmetric_eigen();
    (rotated.eigenvalues.iter().copied().collect(), &q * rotated.eigenvectors)
}

fn eig_is_finite(eig: &nalgebra::linalg::SymmetricEigen<Complex64, nalgebra::Dyn>) -> bool {
    eig.eigenvalues.iter().all(|x| x.is_finite()) && eig.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn require_hermitian(m: &CMat, tol: &Tolerance) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("expected square matrix, got {:?}", m.shape())));
    }
    check_finite(m, "Hermitian input")?;
    let res = hermitian_residual(m);
    if res > tol.residual_tol * (1.0 + spectral_norm(m)) {
        return Err(Error::NotHermitian { residual: res });
    }
    Ok(())
}

/// Positive square root of a Hermitian PSD matrix.
///
/// Eigenvalues of magnitude at most `psd_floor` are clamped to zero, so exact
/// defects (for instance of a partial isometry) stay exactly rank deficient.
pub fn psd_sqrt(m: &CMat, tol: &Tolerance) -> Result<CMat> {
    require_hermitian(m, tol)?;
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&min) = values.first() {
        if min < -tol.psd_floor {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
    }
    let roots = DVector::from_iterator(
        values.len(),
        values
            .iter()
            .map(|&l| if l <= tol.psd_floor { ZERO } else { real(l.sqrt()) }),
    );
    let s = &vectors * CMat::from_diagonal(&roots) * vectors.adjoint();
    Ok((&s + s.adjoint()) * real(0.5))
}

/// Orthonormal basis of the span of the columns of `vectors`.
///
/// Modified Gram–Schmidt with column pivoting (largest remaining norm first,
/// ties to the earliest column) and one reorthogonalization pass. Columns whose
/// residual falls below `rank_eps` times the largest input norm are dropped.
pub fn orthonormal_span(vectors: &CMat, tol: &Tolerance) -> Result<(CMat, usize)> {
    let scale = (0..vectors.ncols())
        .map(|j| vectors.column(j).norm())
        .fold(0.0_f64, f64::max);
    orthonormal_span_scaled(vectors, tol, scale)
}

/// As [`orthonormal_span`], with the rank cutoff taken relative to `scale`.
pub fn orthonormal_span_scaled(vectors: &CMat, tol: &Tolerance, scale: f64) -> Result<(CMat, usize)> {
    check_finite(vectors, "span input")?;
    let dim = vectors.nrows();
    let mut work = vectors.clone();
    let mut basis: Vec<CVec> = Vec::new();
    let mut used = vec![false; work.ncols()];
    let cutoff = tol.rank_eps * scale;
    if scale > 0.0 {
        while basis.len() < dim {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..work.ncols() {
                if used[j] {
                    continue;
                }
                let n = work.column(j).norm();
                if best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((j, n));
                }
            }
            let Some((j, n)) = best else { break };
            if n <= cutoff {
                break;
            }
            used[j] = true;
            let mut q: CVec = work.column(j).into_owned();
            for b in &basis {
                let proj = b.dotc(&q);
                q -= b * proj;
            }
            let qn = q.norm();
            if qn <= cutoff {
                continue;
            }
            q /= real(qn);
            for k in 0..work.ncols() {
                if used[k] {
                    continue;
                }
                let proj = q.dotc(&work.column(k));
                let mut col = work.column_mut(k);
                col -= &q * proj;
            }
            basis.push(q);
        }
    }
    let rank = basis.len();
    let mut out = zeros(dim, rank);
    for (k, b) in basis.iter().enumerate() {
        out.set_column(k, b);
    }
    Ok((out, rank))
}

/// Numerical rank at `rank_eps` relative to the largest singular value.
pub fn numerical_rank(m: &CMat, tol: &Tolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let max = s.iter().fold(0.0_f64, |a, b| a.max(*b));
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol.rank_eps * max).count()
}

/// Rank at `rank_eps · max(1, σ_max)`: for operators of norm about one, where
/// a zero matrix polluted by roundoff must have rank zero.
pub fn absolute_rank(m: &CMat, tol: &Tolerance) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let max = s.iter().fold(1.0_f64, |a, b| a.max(*b));
    s.iter().filter(|&&v| v > tol.rank_eps * max).count()
}

/// Orthonormal basis of the orthogonal complement of the (orthonormal) columns
/// of `basis` inside `C^dim`.
pub fn complement_basis(basis: &CMat, tol: &Tolerance) -> Result<CMat> {
    let dim = basis.nrows();
    let proj = identity(dim) - basis * basis.adjoint();
    let (q, _) = orthonormal_span_scaled(&proj, tol, 1.0)?;
    Ok(q)
}

/// Moore–Penrose inverse of a Hermitian PSD matrix, cut at `rank_eps` relative
/// to its largest eigenvalue. Returns the inverse and the retained rank.
pub fn hermitian_pinv(m: &CMat, tol: &Tolerance) -> (CMat, usize) {
    let (values, vectors) = hermitian_eigen(m);
    let max = values.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let n = values.len();
    let mut inv = DVector::from_element(n, ZERO);
    let mut rank = 0;
    for (k, &l) in values.iter().enumerate() {
        if max > 0.0 && l > tol.rank_eps * max {
            inv[k] = real(1.0 / l);
            rank += 1;
        }
    }
    (&vectors * CMat::from_diagonal(&inv) * vectors.adjoint(), rank)
}

/// Low-rank factor `Y` (r × n) with `YᴴY ≈ G` for a PSD Gram matrix `G` that is
/// only available column by column.
///
/// Complete (diagonal) pivoting, ties to the lowest index; stops once the
/// largest remaining Schur-complement diagonal is at most `rank_eps` times the
/// largest initial diagonal. A Schur diagonal below `-psd_floor·scale` signals
/// an indefinite matrix.
pub fn pivoted_gram_factor<F>(diag: &[f64], mut column: F, tol: &Tolerance) -> Result<CMat>
where
    F: FnMut(usize) -> CVec,
{
    let n = diag.len();
    let scale = diag.iter().fold(0.0_f64, |a, b| a.max(*b));
    let mut remaining: Vec<f64> = diag.to_vec();
    let mut factors: Vec<CVec> = Vec::new();
    let mut picked = vec![false; n];
    if scale <= 0.0 {
        if diag.iter().any(|&d| d < -tol.psd_floor) {
            return Err(Error::NotCp("negative Gram diagonal".into()));
        }
        return Ok(zeros(0, n));
    }
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (j, &d) in remaining.iter().enumerate() {
            if picked[j] {
                continue;
            }
            if d < -tol.psd_floor * scale.max(1.0) {
                return Err(Error::NotCp(format!("Gram form has negative pivot {d:.3e}")));
            }
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((j, d));
            }
        }
        let Some((j, d)) = best else { break };
        if d <= tol.rank_eps * scale {
            break;
        }
        picked[j] = true;
        let mut col = column(j);
        if col.len() != n {
            return Err(Error::DimensionMismatch("Gram column length".into()));
        }
        for l in &factors {
            let coeff = l[j].conj();
            col -= l * coeff;
        }
        let root = d.sqrt();
        col /= real(root);
        for (k, rem) in remaining.iter_mut().enumerate() {
            if !picked[k] {
                *rem -= col[k].norm_sqr();
            }
        }
        factors.push(col);
    }
    let r = factors.len();
    let mut y = zeros(r, n);
    for (k, l) in factors.iter().enumerate() {
        for i in 0..n {
            y[(k, i)] = l[i].conj();
        }
    }
    Ok(y)
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let m = random_complex_matrix(n, 1, rng);
    let v: CVec = m.column(0).into_owned();
    let norm = v.norm();
    v / real(norm)
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    if n == 0 {
        return zeros(0, 0);
    }
    let g = random_complex_matrix(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / real(d.norm()) } else { ONE };
        let mut col = u.column_mut(j);
        col *= phase;
    }
    u
}

/// `‖UᴴU − I‖` and `‖UUᴴ − I‖`.
pub fn unitarity_residuals(u: &CMat) -> (f64, f64) {
    let n = u.ncols();
    let m = u.nrows();
    (
        diff_norm(&(u.adjoint() * u), &identity(n)),
        diff_norm(&(u * u.adjoint()), &identity(m)),
    )
}
