use super::{Algebra, Representation, State};
use crate::error::{Error, Result};
use crate::numerics::{pivoted_gram_factor, CVec, Tolerance};

#[derive(Clone, Debug)]
pub struct GnsResult {
    /// Canonical representation on `K = ⊕ ℂ^{n_i} ⊗ ℂ^{r_i}`.
    pub rep: Representation,
    /// Class of the unit.
    pub cyclic: CVec,
    pub dim: usize,
}

/// GNS representation of a state.
///
/// Matrix units are orthogonal across rows, so the Gram form
/// `⟨[E_pq], [E_p'q']⟩ = δ_pp' ω(E_q'q)` reduces per block to the
/// `n_i × n_i` matrix `R[q', q] = ω(E_q'q)`. Factoring `R = Y*Y` gives
/// `[E_pq] = e_p ⊗ y_q`.
pub fn gns(algebra: &Algebra, omega: &State, tol: &Tolerance) -> Result<GnsResult> {
    if omega.algebra() != algebra {
        return Err(Error::ShapeMismatch("state belongs to another algebra".into()));
    }
    let mut factors = Vec::with_capacity(algebra.num_blocks());
    for (i, &n) in algebra.block_sizes().iter().enumerate() {
        // densities store ρ[q][p] = ω(E_pq), hence R = ρᵀ
        let r = omega.densities()[i].transpose();
        let diag: Vec<f64> = (0..n).map(|q| r[(q, q)].re).collect();
        let y = pivoted_gram_factor(&diag, |q| r.column(q).into_owned(), tol)
            .map_err(|e| Error::NotState(format!("Gram form is not positive: {e}")))?;
        factors.push(y);
    }
    let mult: Vec<usize> = factors.iter().map(|y| y.nrows()).collect();
    let rep = Representation::canonical(algebra.clone(), mult)?;
    let mut cyclic = CVec::zeros(rep.dim());
    for (i, y) in factors.iter().enumerate() {
        for p in 0..algebra.block_sizes()[i] {
            for j in 0..y.nrows() {
                cyclic[rep.canonical_index(i, p, j)] = y[(j, p)];
            }
        }
    }
    let dim = rep.dim();
    let res = GnsResult { rep, cyclic, dim };
    for a in algebra.basis() {
        let v = res.rep.apply(&a) * &res.cyclic;
        let val = res.cyclic.dotc(&v);
        if (val - omega.eval(&a)).norm() > tol.residual_tol {
            return Err(Error::NotState(format!(
                "GNS vector state deviates from ω by {:.3e}",
                (val - omega.eval(&a)).norm()
            )));
        }
    }
    Ok(res)
}
