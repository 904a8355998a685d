//! The tensor shift tower `A_d = M_k^{⊗d} = M_{k^d}` with `α(x) = I_k ⊗ x`.
//!
//! The shift is injective and unital but not onto, so transfer operators
//! `τ_φ = φ ⊗ id` form a genuine family indexed by states `φ` of `M_k`.

use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, Element, LinearMap, Representation, State};
use crate::error::{Error, Result};
use crate::numerics::{self, kron, CMat, Tolerance, ZERO};

pub const DEFAULT_SIZE_CAP: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftTower {
    pub k: usize,
    pub d_max: usize,
    pub cap: usize,
}

/// An element of `A_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedElement {
    pub depth: usize,
    pub matrix: CMat,
}

impl GradedElement {
    pub fn new(depth: usize, matrix: CMat, k: usize) -> Result<Self> {
        let n = k.pow(depth as u32);
        if matrix.shape() != (n, n) {
            return Err(Error::ShapeMismatch(format!(
                "depth {depth} element must be {n}×{n}, got {:?}",
                matrix.shape()
            )));
        }
        Ok(GradedElement { depth, matrix })
    }
}

impl ShiftTower {
    pub fn new(k: usize, d_max: usize, cap: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("local dimension k = {k} must be at least 2")));
        }
        let size = k
            .checked_pow(d_max as u32)
            .ok_or(Error::SizeCap { size: usize::MAX, cap })?;
        if size > cap {
            return Err(Error::SizeCap { size, cap });
        }
        Ok(ShiftTower { k, d_max, cap })
    }

    pub fn size(&self, depth: usize) -> usize {
        self.k.pow(depth as u32)
    }

    pub fn algebra(&self, depth: usize) -> Algebra {
        Algebra::full(self.size(depth))
    }

    pub fn check_depth(&self, depth: usize) -> Result<()> {
        if depth > self.d_max {
            return Err(Error::DepthExceeded(format!("depth {depth} exceeds D_max = {}", self.d_max)));
        }
        Ok(())
    }

    /// `x ↦ x ⊗ I_{k^{d'−d}}`.
    pub fn embed(&self, x: &GradedElement, to: usize) -> Result<GradedElement> {
        self.check_depth(to)?;
        if to < x.depth {
            return Err(Error::InvalidParameter(format!("cannot embed depth {} into {to}", x.depth)));
        }
        Ok(GradedElement {
            depth: to,
            matrix: kron(&x.matrix, &numerics::identity(self.size(to - x.depth))),
        })
    }

    /// `x ↦ I_k ⊗ x`.
    pub fn shift_alpha(&self, x: &GradedElement) -> Result<GradedElement> {
        self.check_depth(x.depth + 1)?;
        Ok(GradedElement {
            depth: x.depth + 1,
            matrix: kron(&numerics::identity(self.k), &x.matrix),
        })
    }

    /// `(φ ⊗ id)(y) = Σ_ij φ(E_ij) Y_ij` for `y = Σ E_ij ⊗ Y_ij`.
    pub fn transfer_phi(&self, phi: &CMat, y: &GradedElement) -> Result<GradedElement> {
        if y.depth == 0 {
            return Err(Error::DepthZero);
        }
        Ok(GradedElement {
            depth: y.depth - 1,
            matrix: partial_phi(phi, &y.matrix, self.k),
        })
    }

    /// `π_D(x) = x ⊗ I_m` on `ℂ^{k^D} ⊗ ℂ^m`; lower depths factor through the embedding.
    pub fn standard_rep(&self, depth: usize, m: usize) -> Result<Representation> {
        self.check_depth(depth)?;
        let size = self.size(depth) * m;
        if size > self.cap {
            return Err(Error::SizeCap { size, cap: self.cap });
        }
        Representation::canonical(self.algebra(depth), vec![m])
    }

    /// `R ⊗ I_m` scaled by `c`, with `R(ξ₁ ⊗ ξ') = ⟨ξ₁, u⟩ ξ' ⊗ v` on `ℂ^k ⊗ ℂ^{k^{D−1}}`.
    pub fn shift_down_operator(&self, depth: usize, m: usize, c: f64, u: &CMat, v: &CMat) -> Result<CMat> {
        if depth == 0 {
            return Err(Error::DepthZero);
        }
        let size = self.size(depth) * m;
        if size > self.cap {
            return Err(Error::SizeCap { size, cap: self.cap });
        }
        for (name, w) in [("u", u), ("v", v)] {
            if w.shape() != (self.k, 1) || (w.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{name} must be a unit vector in C^{}", self.k)));
            }
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("scale c = {c} must lie in [0, 1]")));
        }
        let rest = numerics::identity(self.size(depth - 1));
        let r = kron(&rest, v) * kron(&u.adjoint(), &rest);
        Ok(kron(&r, &numerics::identity(m)) * numerics::real(c))
    }

    /// General covariant operator for the standard representation at `depth`:
    /// `ξ₁ ⊗ ξ' ⊗ η ↦ ξ' ⊗ Z(ξ₁ ⊗ η)` for `Z` on `ℂ^k ⊗ ℂ^m`.
    pub fn shift_operator_from(&self, depth: usize, m: usize, z: &CMat) -> Result<CMat> {
        if depth == 0 {
            return Err(Error::DepthZero);
        }
        let (k, rest) = (self.k, self.size(depth - 1));
        if z.shape() != (k * m, k * m) {
            return Err(Error::ShapeMismatch(format!("Z must be {}×{}", k * m, k * m)));
        }
        let dim = k * rest * m;
        let mut t = numerics::zeros(dim, dim);
        // input index (a, b, l) = (a·rest + b)·m + l; output (b, c, l') = (b·k + c)·m + l'
        for a in 0..k {
            for b in 0..rest {
                for l in 0..m {
                    let col = (a * rest + b) * m + l;
                    for cc in 0..k {
                        for l2 in 0..m {
                            let zval = z[(cc * m + l2, a * m + l)];
                            if zval != ZERO {
                                t[((b * k + cc) * m + l2, col)] = zval;
                            }
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn trace_state(&self) -> CMat {
        numerics::identity(self.k) * numerics::real(1.0 / self.k as f64)
    }

    pub fn vector_state(&self, v: &CMat) -> Result<CMat> {
        if v.shape() != (self.k, 1) || v.norm() == 0.0 {
            return Err(Error::InvalidParameter("vector state needs a nonzero vector in C^k".into()));
        }
        let u = v / numerics::real(v.norm());
        Ok(&u * u.adjoint())
    }

    pub fn validate_phi(&self, phi: &CMat, tol: &Tolerance) -> Result<()> {
        if phi.shape() != (self.k, self.k) {
            return Err(Error::ShapeMismatch(format!("φ must be a {}×{} density", self.k, self.k)));
        }
        State::new(Algebra::full(self.k), vec![phi.clone()], tol).map(|_| ())
    }
}

/// `Σ_ij ρ[j, i] Y_ij` where `Y_ij` are the `k×k` grid of blocks of `y`.
fn partial_phi(phi: &CMat, y: &CMat, k: usize) -> CMat {
    let n = y.nrows() / k;
    let mut out = numerics::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            let w = phi[(j, i)];
            if w != ZERO {
                out += y.view((i * n, j * n), (n, n)) * w;
            }
        }
    }
    out
}

/// `α: A_d → A_{d+1}`.
#[derive(Clone, Debug)]
pub struct TowerShift {
    k: usize,
    source: Algebra,
    target: Algebra,
}

impl TowerShift {
    pub fn new(tower: &ShiftTower, depth: usize) -> Result<Self> {
        tower.check_depth(depth + 1)?;
        Ok(TowerShift {
            k: tower.k,
            source: tower.algebra(depth),
            target: tower.algebra(depth + 1),
        })
    }
}

impl LinearMap for TowerShift {
    fn source(&self) -> &Algebra {
        &self.source
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        Element::single(kron(&numerics::identity(self.k), a.matrix()))
    }
}

/// `ι: A_d → A_{d'}`, `x ↦ x ⊗ I`.
#[derive(Clone, Debug)]
pub struct TowerEmbed {
    factor: usize,
    source: Algebra,
    target: Algebra,
}

impl TowerEmbed {
    pub fn new(tower: &ShiftTower, from: usize, to: usize) -> Result<Self> {
        tower.check_depth(to)?;
        if to < from {
            return Err(Error::InvalidParameter(format!("cannot embed depth {from} into {to}")));
        }
        Ok(TowerEmbed {
            factor: tower.size(to - from),
            source: tower.algebra(from),
            target: tower.algebra(to),
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

impl LinearMap for TowerEmbed {
    fn source(&self) -> &Algebra {
        &self.source
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        Element::single(kron(a.matrix(), &numerics::identity(self.factor)))
    }
}

/// `τ_φ: A_{d+1} → A_d`.
#[derive(Clone, Debug)]
pub struct TowerTransfer {
    k: usize,
    phi: CMat,
    source: Algebra,
    target: Algebra,
}

impl TowerTransfer {
    pub fn new(tower: &ShiftTower, phi: CMat, depth: usize) -> Result<Self> {
        tower.check_depth(depth + 1)?;
        if phi.shape() != (tower.k, tower.k) {
            return Err(Error::ShapeMismatch("φ density has the wrong size".into()));
        }
        Ok(TowerTransfer {
            k: tower.k,
            phi,
            source: tower.algebra(depth + 1),
            target: tower.algebra(depth),
        })
    }

    pub fn phi(&self) -> &CMat {
        &self.phi
    }
}

impl LinearMap for TowerTransfer {
    fn source(&self) -> &Algebra {
        &self.source
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        Element::single(partial_phi(&self.phi, a.matrix(), self.k))
    }
}

/// `E_φ = α ∘ τ_φ` on `A_{d+1}`: `y ↦ I_k ⊗ τ_φ(y)`.
#[derive(Clone, Debug)]
pub struct TowerExpectation {
    k: usize,
    phi: CMat,
    algebra: Algebra,
}

impl TowerExpectation {
    pub fn new(tower: &ShiftTower, phi: CMat, depth: usize) -> Result<Self> {
        tower.check_depth(depth + 1)?;
        Ok(TowerExpectation {
            k: tower.k,
            phi,
            algebra: tower.algebra(depth + 1),
        })
    }
}

impl LinearMap for TowerExpectation {
    fn source(&self) -> &Algebra {
        &self.algebra
    }
    fn target(&self) -> &Algebra {
        &self.algebra
    }
    fn apply(&self, a: &Element) -> Element {
        let t = partial_phi(&self.phi, a.matrix(), self.k);
        Element::single(kron(&numerics::identity(self.k), &t))
    }
}

/// Inverse of the shift on its range: partial trace over the first factor, divided by `k`.
#[derive(Clone, Debug)]
pub struct TowerRangeInverse {
    k: usize,
    source: Algebra,
    target: Algebra,
}

impl TowerRangeInverse {
    pub fn new(tower: &ShiftTower, depth: usize) -> Result<Self> {
        tower.check_depth(depth + 1)?;
        Ok(TowerRangeInverse {
            k: tower.k,
            source: tower.algebra(depth + 1),
            target: tower.algebra(depth),
        })
    }
}

impl LinearMap for TowerRangeInverse {
    fn source(&self) -> &Algebra {
        &self.source
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        let phi = numerics::identity(self.k) * numerics::real(1.0 / self.k as f64);
        Element::single(partial_phi(&phi, a.matrix(), self.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{element_residual, range_subalgebra_basis, verify_star_hom};
    use crate::cpmaps::{expectation_from_transfer, transfer_from_expectation, verify_transfer};
    use crate::numerics::{diff_norm, hermitian_eigen, random_complex_matrix, real, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn tower() -> ShiftTower {
        ShiftTower::new(2, 4, 256).unwrap()
    }

    fn e(k: usize, i: usize, j: usize) -> CMat {
        let mut m = numerics::zeros(k, k);
        m[(i, j)] = ONE;
        m
    }

    #[test]
    fn size_cap_and_parameters() {
        assert!(matches!(ShiftTower::new(2, 9, 256), Err(Error::SizeCap { .. })));
        assert!(ShiftTower::new(1, 2, 256).is_err());
    }

    #[test]
    fn embed_properties() {
        let t = tower();
        let one = GradedElement::new(1, numerics::identity(2), 2).unwrap();
        assert_eq!(t.embed(&one, 3).unwrap().matrix, numerics::identity(8));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = GradedElement::new(1, random_complex_matrix(2, 2, &mut rng), 2).unwrap();
        let twice = t.embed(&t.embed(&x, 2).unwrap(), 3).unwrap();
        assert_eq!(twice, t.embed(&x, 3).unwrap());
        // spectrum is preserved (with multiplicity) under the embedding
        let h = GradedElement::new(1, &x.matrix + x.matrix.adjoint(), 2).unwrap();
        let (v0, _) = hermitian_eigen(&h.matrix);
        let (v1, _) = hermitian_eigen(&t.embed(&h, 2).unwrap().matrix);
        for (i, l) in v0.iter().enumerate() {
            assert!((v1[2 * i] - l).abs() < 1e-12 && (v1[2 * i + 1] - l).abs() < 1e-12);
        }
        assert!(t.embed(&x, 5).is_err());
    }

    #[test]
    fn shift_properties() {
        let t = tower();
        let one = GradedElement::new(2, numerics::identity(4), 2).unwrap();
        assert_eq!(t.shift_alpha(&one).unwrap().matrix, numerics::identity(8));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = GradedElement::new(1, random_complex_matrix(2, 2, &mut rng), 2).unwrap();
        let lhs = t.shift_alpha(&t.embed(&x, 2).unwrap()).unwrap();
        let rhs = t.embed(&t.shift_alpha(&x).unwrap(), 3).unwrap();
        assert!(diff_norm(&lhs.matrix, &rhs.matrix) < 1e-15);
        let alpha = TowerShift::new(&t, 2).unwrap();
        assert!(verify_star_hom(&alpha, &tol()).unwrap().passed);
        assert_eq!(range_subalgebra_basis(&alpha, &tol()).unwrap().1, 16);
    }

    #[test]
    fn transfer_examples() {
        let t = tower();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = GradedElement::new(1, random_complex_matrix(2, 2, &mut rng), 2).unwrap();
        let tr = t.trace_state();
        let back = t.transfer_phi(&tr, &t.shift_alpha(&x).unwrap()).unwrap();
        assert!(diff_norm(&back.matrix, &x.matrix) < 1e-15);
        let y = GradedElement::new(2, kron(&e(2, 0, 0), &x.matrix), 2).unwrap();
        let half = t.transfer_phi(&tr, &y).unwrap();
        assert!(diff_norm(&half.matrix, &(&x.matrix * real(0.5))) < 1e-15);
        // two distinct states separate on E11 ⊗ 1
        let vs = t.vector_state(&CMat::from_column_slice(2, 1, &[ONE, numerics::ZERO])).unwrap();
        let w = GradedElement::new(2, kron(&e(2, 0, 0), &numerics::identity(2)), 2).unwrap();
        let a = t.transfer_phi(&tr, &w).unwrap();
        let b = t.transfer_phi(&vs, &w).unwrap();
        assert!(diff_norm(&a.matrix, &b.matrix) > 0.4);
        assert!(matches!(t.transfer_phi(&tr, &GradedElement::new(0, numerics::identity(1), 2).unwrap()), Err(Error::DepthZero)));
    }

    #[test]
    fn transfers_are_cp_at_every_depth() {
        let t = tower();
        for d in 1..4 {
            let tau = TowerTransfer::new(&t, t.trace_state(), d).unwrap();
            let cp = crate::cpmaps::verify_completely_positive(&tau, &tol()).unwrap();
            assert!(cp.passed && cp.min_choi_eig.iter().all(|x| x.is_finite()), "{cp:?}");
        }
    }

    #[test]
    fn transfer_calculus_on_tower() {
        let t = tower();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_complex_matrix(2, 2, &mut rng);
        let phi = &g * g.adjoint() / (g.adjoint() * &g).trace();
        for d in 0..3 {
            let alpha: Arc<dyn LinearMap> = Arc::new(TowerShift::new(&t, d).unwrap());
            let tau: Arc<dyn LinearMap> = Arc::new(TowerTransfer::new(&t, phi.clone(), d).unwrap());
            let rep = verify_transfer(tau.as_ref(), alpha.as_ref(), &tol()).unwrap();
            assert!(rep.passed && rep.left_inverse_residual < 1e-12, "{rep:?}");
            let (e_map, er) = expectation_from_transfer(alpha.clone(), tau.clone(), &tol()).unwrap();
            assert!(er.idempotency_residual < 1e-12 && er.range_residual < 1e-12);
            let direct = TowerExpectation::new(&t, phi.clone(), d).unwrap();
            for b in e_map.source().basis() {
                assert!(element_residual(&e_map.apply(&b), &direct.apply(&b)) < 1e-14);
            }
            let back = transfer_from_expectation(alpha.as_ref(), e_map.as_ref(), &tol()).unwrap();
            assert!(diff_norm(back.matrix(), &tau.coordinate_matrix()) < 1e-10);
        }
    }

    #[test]
    fn range_inverse_undoes_shift() {
        let t = tower();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_complex_matrix(4, 4, &mut rng);
        let inv = TowerRangeInverse::new(&t, 2).unwrap();
        let y = Element::single(kron(&numerics::identity(2), &x));
        assert!(diff_norm(inv.apply(&y).matrix(), &x) < 1e-14);
    }

    #[test]
    fn standard_rep_and_shift_down_pair() {
        let t = ShiftTower::new(2, 3, 256).unwrap();
        let pi = t.standard_rep(3, 1).unwrap();
        assert_eq!(pi.apply(&pi.algebra().unit()), numerics::identity(8));
        assert!(pi.verify(&tol()).unwrap().mult_residual < 1e-12);
        let u = CMat::from_column_slice(2, 1, &[real(0.6), real(0.8)]);
        let v = CMat::from_column_slice(2, 1, &[numerics::ZERO, ONE]);
        let tm = t.shift_down_operator(3, 1, 1.0, &u, &v).unwrap();
        // R R* = I ⊗ |v⟩⟨v| on the last factor
        let expected = kron(&numerics::identity(4), &(&v * v.adjoint()));
        assert!(diff_norm(&(&tm * tm.adjoint()), &expected) < 1e-14);
        // covariance on the basis of A_2
        for x in t.algebra(2).basis() {
            let sx = Element::single(kron(&numerics::identity(2), x.matrix()));
            let ix = Element::single(kron(x.matrix(), &numerics::identity(2)));
            assert!(diff_norm(&(&tm * pi.apply(&sx)), &(pi.apply(&ix) * &tm)) < 1e-12);
        }
        let zero = t.shift_down_operator(3, 1, 0.0, &u, &v).unwrap();
        assert_eq!(numerics::spectral_norm(&zero), 0.0);
        let c = t.shift_down_operator(3, 2, 0.9, &u, &v).unwrap();
        assert!((numerics::spectral_norm(&c) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn general_shift_operator_is_covariant() {
        let t = ShiftTower::new(2, 3, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = random_complex_matrix(4, 4, &mut rng);
        let tm = t.shift_operator_from(2, 2, &z).unwrap();
        let pi = t.standard_rep(2, 2).unwrap();
        for x in t.algebra(1).basis() {
            let sx = Element::single(kron(&numerics::identity(2), x.matrix()));
            let ix = Element::single(kron(x.matrix(), &numerics::identity(2)));
            assert!(diff_norm(&(&tm * pi.apply(&sx)), &(pi.apply(&ix) * &tm)) < 1e-12);
        }
        assert!((numerics::spectral_norm(&tm) - numerics::spectral_norm(&z)).abs() < 1e-10);
        // the rank-one Z reproduces the shift-down operator
        let u = CMat::from_column_slice(2, 1, &[real(0.6), real(0.8)]);
        let v = CMat::from_column_slice(2, 1, &[ONE, numerics::ZERO]);
        let z1 = kron(&(&v * u.adjoint()), &numerics::identity(2));
        let a = t.shift_operator_from(2, 2, &z1).unwrap();
        let b = t.shift_down_operator(2, 2, 1.0, &u, &v).unwrap();
        assert!(diff_norm(&a, &b) < 1e-14);
    }
}
