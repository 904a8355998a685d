//! Completely positive maps: Choi certification, transfer operators and
//! conditional expectations, and the minimal Stinespring dilation.

use std::collections::HashMap;
use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::algebra::{Algebra, Composed, DenseMap, Element, LinearMap, Representation, SharedMap};
use crate::error::{Error, Result};
use crate::numerics::{
    self, hermitian_eigen, orthonormal_span, pivoted_gram_factor, random_unitary, CMat, CVec, Tolerance,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpReport {
    /// Smallest Choi eigenvalue for each source block.
    pub min_choi_eig: Vec<f64>,
    pub passed: bool,
}

/// Per-block Choi test: `[Φ(E_pq)]_{pq} ≥ 0` for every block `M_{n_i}` of the source.
pub fn verify_completely_positive(phi: &dyn LinearMap, tol: &Tolerance) -> Result<CpReport> {
    let src = phi.source();
    let t = phi.target().matrix_size();
    let mut mins = Vec::with_capacity(src.num_blocks());
    for (i, &n) in src.block_sizes().iter().enumerate() {
        let mut choi = numerics::zeros(n * t, n * t);
        for p in 0..n {
            for q in 0..n {
                let img = phi.apply(&src.matrix_unit(i, p, q));
                phi.target().check_element(&img)?;
                choi.view_mut((p * t, q * t), (t, t)).copy_from(&img.to_matrix());
            }
        }
        let (vals, _) = hermitian_eigen(&choi);
        let herm = numerics::hermitian_residual(&choi);
        let min = vals.first().copied().unwrap_or(0.0);
        mins.push(if herm > tol.residual_tol { min - herm } else { min });
    }
    let passed = mins.iter().all(|&m| m >= -tol.psd_floor);
    Ok(CpReport {
        min_choi_eig: mins,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferReport {
    /// `max ‖τ(α(a)) − a‖` over the basis.
    pub left_inverse_residual: f64,
    /// `‖τ(1) − 1‖`.
    pub unit_residual: f64,
    pub cp: CpReport,
    pub passed: bool,
}

/// Checks that `τ` is a completely positive left inverse of `α`. Residuals are
/// absolute norm differences.
pub fn verify_transfer(tau: &dyn LinearMap, alpha: &dyn LinearMap, tol: &Tolerance) -> Result<TransferReport> {
    if tau.source() != alpha.target() || tau.target() != alpha.source() {
        return Err(Error::ShapeMismatch("transfer operator and endomorphism do not compose".into()));
    }
    let mut left: f64 = 0.0;
    for a in alpha.source().basis() {
        left = left.max(tau.apply(&alpha.apply(&a)).sub(&a).norm());
    }
    let unit = tau.apply(&tau.source().unit()).sub(&tau.target().unit()).norm();
    let cp = verify_completely_positive(tau, tol)?;
    let passed = left <= tol.residual_tol && unit <= tol.residual_tol && cp.passed;
    Ok(TransferReport {
        left_inverse_residual: left,
        unit_residual: unit,
        cp,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationReport {
    /// `max ‖E(E(b)) − E(b)‖` over the basis.
    pub idempotency_residual: f64,
    /// Distance of `E(b)` from the range of `α`, maximized over the basis.
    pub range_residual: f64,
}

/// `E = α ∘ τ`, the conditional expectation onto the range of `α`.
pub fn expectation_from_transfer(
    alpha: SharedMap,
    tau: SharedMap,
    tol: &Tolerance,
) -> Result<(SharedMap, ExpectationReport)> {
    let rep = verify_transfer(tau.as_ref(), alpha.as_ref(), tol)?;
    if !rep.passed {
        return Err(Error::TransferInvalid(format!(
            "left inverse {:.3e}, unit {:.3e}, min Choi eigenvalue {:?}",
            rep.left_inverse_residual, rep.unit_residual, rep.cp.min_choi_eig
        )));
    }
    let e: SharedMap = Arc::new(Composed::new(tau, alpha.clone())?);
    let (range, _) = orthonormal_span(&alpha.coordinate_matrix(), tol)?;
    let tgt = e.target().clone();
    let mut idem: f64 = 0.0;
    let mut off: f64 = 0.0;
    for b in tgt.basis() {
        let eb = e.apply(&b);
        idem = idem.max(e.apply(&eb).sub(&eb).norm());
        let c = tgt.coords(&eb);
        off = off.max((&c - &range * (range.adjoint() * &c)).norm());
    }
    Ok((
        e,
        ExpectationReport {
            idempotency_residual: idem,
            range_residual: off,
        },
    ))
}

/// `τ = α⁻¹ ∘ E`, solved on the injective coordinate map of `α`.
pub fn transfer_from_expectation(alpha: &dyn LinearMap, e: &dyn LinearMap, tol: &Tolerance) -> Result<DenseMap> {
    if e.source() != alpha.target() || e.target() != alpha.target() {
        return Err(Error::ShapeMismatch("expectation must act on the target of α".into()));
    }
    let a = alpha.coordinate_matrix();
    let rank = numerics::numerical_rank(&a, tol);
    if rank < a.ncols() {
        return Err(Error::NotInjective { rank, dim: a.ncols() });
    }
    let gram = a.adjoint() * &a;
    let gram_inv = gram
        .try_inverse()
        .ok_or(Error::NotInjective { rank, dim: a.ncols() })?;
    let pinv = gram_inv * a.adjoint();
    let em = e.coordinate_matrix();
    let tau = &pinv * &em;
    let back = &a * &tau;
    let mut worst: f64 = 0.0;
    for j in 0..em.ncols() {
        worst = worst.max((back.column(j) - em.column(j)).norm());
    }
    if worst > tol.residual_tol {
        return Err(Error::RangeNotInImage { residual: worst });
    }
    DenseMap::new(alpha.target().clone(), alpha.source().clone(), tau)
}

/// Minimal Stinespring dilation `Φ(a) = W* ρ(a) W`.
#[derive(Clone, Debug)]
pub struct Stinespring {
    /// Canonical representation on `K = ⊕ ℂ^{n_i} ⊗ ℂ^{r_i}`.
    pub rho: Representation,
    /// Isometry `H → K`, `W h = [1 ⊗ h]`.
    pub w: CMat,
    /// `max ‖W*ρ(a)W − Φ(a)‖` over the basis.
    pub reconstruction_residual: f64,
}

/// Minimal Stinespring dilation of a unital CP map into `B(H) = M_{dim H}`.
///
/// The Gram form `⟨E_pq ⊗ h, E_p'q' ⊗ h'⟩ = δ_pp' ⟨Φ(E_q'q) h, h'⟩` reduces per
/// block to `G[(q',h'), (q,h)] = Φ(E_q'q)[h', h]`, the Choi matrix. A lazily
/// pivoted Cholesky factor `G = Y*Y` gives `[E_pq ⊗ h] = e_p ⊗ y_{q,h}`, so `ρ`
/// is canonical and minimal by construction. Positivity of the pivots and the
/// reconstruction of `Φ` on the basis certify complete positivity.
pub fn stinespring_minimal(
    phi: &dyn LinearMap,
    tol: &Tolerance,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Stinespring> {
    let src = phi.source().clone();
    if phi.target().num_blocks() != 1 {
        return Err(Error::ShapeMismatch("Stinespring target must be a full matrix algebra".into()));
    }
    let dh = phi.target().block_sizes()[0];
    let eval = |a: &Element| -> CMat { phi.apply(a).blocks.swap_remove(0) };
    let one = eval(&src.unit());
    let unit_res = numerics::diff_norm(&one, &numerics::identity(dh));
    if unit_res > tol.residual_tol {
        return Err(Error::NotUnital { residual: unit_res });
    }
    let mut factors = Vec::with_capacity(src.num_blocks());
    for (i, &n) in src.block_sizes().iter().enumerate() {
        let size = n * dh;
        let mut diag = vec![0.0; size];
        for q in 0..n {
            let d = eval(&src.matrix_unit(i, q, q));
            for h in 0..dh {
                diag[q * dh + h] = d[(h, h)].re;
            }
        }
        let mut cache: HashMap<usize, Vec<CMat>> = HashMap::new();
        let column = |j: usize| -> CVec {
            let (q, h) = (j / dh, j % dh);
            let imgs = cache
                .entry(q)
                .or_insert_with(|| (0..n).map(|qq| eval(&src.matrix_unit(i, qq, q))).collect());
            let mut col = CVec::zeros(size);
            for (qq, img) in imgs.iter().enumerate() {
                for hh in 0..dh {
                    col[qq * dh + hh] = img[(hh, h)];
                }
            }
            col
        };
        let mut y = pivoted_gram_factor(&diag, column, tol)?;
        if let Some(g) = rng.as_deref_mut() {
            if y.nrows() > 1 {
                y = random_unitary(y.nrows(), g) * y;
            }
        }
        factors.push(y);
    }
    let mult: Vec<usize> = factors.iter().map(|y| y.nrows()).collect();
    let rho = Representation::canonical(src.clone(), mult)?;
    let mut w = numerics::zeros(rho.dim(), dh);
    for (i, y) in factors.iter().enumerate() {
        for p in 0..src.block_sizes()[i] {
            for j in 0..y.nrows() {
                let row = rho.canonical_index(i, p, j);
                for h in 0..dh {
                    w[(row, h)] = y[(j, p * dh + h)];
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for idx in 0..src.dim() {
        let (i, p, q) = src.unit_of(idx);
        let rw = rho.apply_unit(i, p, q, &w);
        let rec = w.adjoint() * rw;
        worst = worst.max(numerics::diff_norm(&rec, &eval(&src.matrix_unit(i, p, q))));
    }
    if worst > tol.residual_tol {
        return Err(Error::NotCp(format!("Stinespring reconstruction fails by {worst:.3e}")));
    }
    Ok(Stinespring {
        rho,
        w,
        reconstruction_residual: worst,
    })
}

/// Rank of `span ρ(A) W H`, computed from all matrix-unit images.
pub fn dilation_span_rank(rho: &Representation, w: &CMat, tol: &Tolerance) -> Result<usize> {
    let alg = rho.algebra();
    let mut cols: Vec<CMat> = Vec::new();
    for idx in 0..alg.dim() {
        let (i, p, q) = alg.unit_of(idx);
        cols.push(rho.apply_unit(i, p, q, w));
    }
    let total: usize = cols.iter().map(|c| c.ncols()).sum();
    let mut m = numerics::zeros(rho.dim(), total);
    let mut c0 = 0;
    for c in &cols {
        m.view_mut((0, c0), c.shape()).copy_from(c);
        c0 += c.ncols();
    }
    Ok(orthonormal_span(&m, tol)?.1)
}

/// `a ↦ π(Φ(a))` as a map into `M_{dim π}`.
#[derive(Clone, Debug)]
pub struct RepComposed {
    pub map: SharedMap,
    pub rep: Representation,
    target: Algebra,
}

impl RepComposed {
    pub fn new(map: SharedMap, rep: Representation) -> Result<Self> {
        if map.target() != rep.algebra() {
            return Err(Error::ShapeMismatch("map does not land in the represented algebra".into()));
        }
        let target = Algebra::full(rep.dim());
        Ok(RepComposed { map, rep, target })
    }
}

impl LinearMap for RepComposed {
    fn source(&self) -> &Algebra {
        self.map.source()
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        Element::single(self.rep.apply(&self.map.apply(a)))
    }
}
