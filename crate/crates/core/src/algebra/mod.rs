//! Finite-dimensional C*-algebras `⊕ M_{n_i}` with the matrix-unit basis, their
//! elements, linear maps between them, states and *-homomorphism checks.

mod gns;
mod representation;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, hermitian_eigen, orthonormal_span, spectral_norm, CMat, CVec, Tolerance, ONE, ZERO,
};

pub use gns::{gns, GnsResult};
pub use representation::{cyclic_decomposition, Frame, Representation};

/// `⊕ M_{n_i}`. Coordinates run over blocks, then matrix units `(p, q)` row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Algebra {
    blocks: Vec<usize>,
}

impl Algebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("at least one block is required".into()));
        }
        if blocks.contains(&0) {
            return Err(Error::InvalidAlgebra("block sizes must be positive".into()));
        }
        Ok(Algebra { blocks })
    }

    /// The full matrix algebra `M_n`, also used as `B(H)` for `dim H = n`.
    pub fn full(n: usize) -> Self {
        Algebra { blocks: vec![n.max(1)] }
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Linear dimension `Σ n_i²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    /// Size of the faithful block-diagonal matrix picture, `Σ n_i`.
    pub fn matrix_size(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn coord_offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|n| n * n).sum()
    }

    pub fn basis_index(&self, block: usize, p: usize, q: usize) -> usize {
        self.coord_offset(block) + p * self.blocks[block] + q
    }

    /// Inverse of [`Algebra::basis_index`].
    pub fn unit_of(&self, mut index: usize) -> (usize, usize, usize) {
        for (i, &n) in self.blocks.iter().enumerate() {
            if index < n * n {
                return (i, index / n, index % n);
            }
            index -= n * n;
        }
        panic!("basis index out of range");
    }

    pub fn zero(&self) -> Element {
        Element {
            blocks: self.blocks.iter().map(|&n| numerics::zeros(n, n)).collect(),
        }
    }

    pub fn unit(&self) -> Element {
        Element {
            blocks: self.blocks.iter().map(|&n| numerics::identity(n)).collect(),
        }
    }

    pub fn matrix_unit(&self, block: usize, p: usize, q: usize) -> Element {
        let mut e = self.zero();
        e.blocks[block][(p, q)] = ONE;
        e
    }

    pub fn basis(&self) -> Vec<Element> {
        (0..self.dim()).map(|j| self.basis_element(j)).collect()
    }

    pub fn basis_element(&self, index: usize) -> Element {
        let (i, p, q) = self.unit_of(index);
        self.matrix_unit(i, p, q)
    }

    /// A *-closed generating set: `E_00` of every block plus the neighbouring
    /// off-diagonal units `E_{p,p+1}`, `E_{p+1,p}`.
    pub fn generators(&self) -> Vec<Element> {
        let mut out = Vec::new();
        for (i, &n) in self.blocks.iter().enumerate() {
            out.push(self.matrix_unit(i, 0, 0));
            for p in 0..n.saturating_sub(1) {
                out.push(self.matrix_unit(i, p, p + 1));
                out.push(self.matrix_unit(i, p + 1, p));
            }
        }
        out
    }

    pub fn coords(&self, a: &Element) -> CVec {
        let mut v = CVec::zeros(self.dim());
        let mut k = 0;
        for b in &a.blocks {
            for p in 0..b.nrows() {
                for q in 0..b.ncols() {
                    v[k] = b[(p, q)];
                    k += 1;
                }
            }
        }
        v
    }

    pub fn from_coords(&self, v: &CVec) -> Element {
        let mut k = 0;
        let blocks = self
            .blocks
            .iter()
            .map(|&n| {
                let m = CMat::from_fn(n, n, |p, q| v[k + p * n + q]);
                k += n * n;
                m
            })
            .collect();
        Element { blocks }
    }

    pub fn check_element(&self, a: &Element) -> Result<()> {
        if a.blocks.len() != self.blocks.len()
            || a.blocks.iter().zip(&self.blocks).any(|(b, &n)| b.shape() != (n, n))
        {
            return Err(Error::ShapeMismatch(format!(
                "element does not belong to algebra with blocks {:?}",
                self.blocks
            )));
        }
        Ok(())
    }

    /// A single-block element from a full matrix (requires one block).
    pub fn element_from_matrix(&self, m: CMat) -> Result<Element> {
        let a = Element { blocks: vec![m] };
        self.check_element(&a)?;
        Ok(a)
    }
}

/// Element of `⊕ M_{n_i}`, one square matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub blocks: Vec<CMat>,
}

impl Element {
    pub fn from_blocks(blocks: Vec<CMat>) -> Self {
        Element { blocks }
    }

    pub fn single(m: CMat) -> Self {
        Element { blocks: vec![m] }
    }

    pub fn matrix(&self) -> &CMat {
        &self.blocks[0]
    }

    pub fn adjoint(&self) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn mul(&self, other: &Element) -> Element {
        Element {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn add(&self, other: &Element) -> Element {
        Element {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Element) -> Element {
        Element {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: numerics::C64) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b * s).collect(),
        }
    }

    /// C*-norm: the largest block spectral norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// Faithful block-diagonal matrix picture.
    pub fn to_matrix(&self) -> CMat {
        numerics::block_diag(&self.blocks)
    }
}

/// `‖a − b‖ / (1 + max(‖a‖, ‖b‖))` in the C*-norm.
pub fn element_residual(a: &Element, b: &Element) -> f64 {
    let diff = a.sub(b).norm();
    diff / (1.0 + a.norm().max(b.norm()))
}

/// Linear map between finite-dimensional algebras.
pub trait LinearMap: Send + Sync + fmt::Debug {
    fn source(&self) -> &Algebra;
    fn target(&self) -> &Algebra;
    fn apply(&self, a: &Element) -> Element;

    /// Matrix of the map in matrix-unit coordinates (target × source).
    fn coordinate_matrix(&self) -> CMat {
        let src = self.source();
        let tgt = self.target();
        let mut m = numerics::zeros(tgt.dim(), src.dim());
        for j in 0..src.dim() {
            let img = self.apply(&src.basis_element(j));
            m.set_column(j, &tgt.coords(&img));
        }
        m
    }
}

pub type SharedMap = Arc<dyn LinearMap>;

/// Map given by its coordinate matrix.
#[derive(Clone, Debug)]
pub struct DenseMap {
    source: Algebra,
    target: Algebra,
    matrix: CMat,
}

impl DenseMap {
    pub fn new(source: Algebra, target: Algebra, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (target.dim(), source.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "coordinate matrix {:?} for map {} -> {}",
                matrix.shape(),
                source.dim(),
                target.dim()
            )));
        }
        numerics::check_finite(&matrix, "coordinate matrix")?;
        Ok(DenseMap {
            source,
            target,
            matrix,
        })
    }

    pub fn from_map(map: &dyn LinearMap) -> Self {
        DenseMap {
            source: map.source().clone(),
            target: map.target().clone(),
            matrix: map.coordinate_matrix(),
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }
}

impl LinearMap for DenseMap {
    fn source(&self) -> &Algebra {
        &self.source
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        self.target.from_coords(&(&self.matrix * self.source.coords(a)))
    }
    fn coordinate_matrix(&self) -> CMat {
        self.matrix.clone()
    }
}

#[derive(Clone, Debug)]
pub struct IdentityMap(pub Algebra);

impl LinearMap for IdentityMap {
    fn source(&self) -> &Algebra {
        &self.0
    }
    fn target(&self) -> &Algebra {
        &self.0
    }
    fn apply(&self, a: &Element) -> Element {
        a.clone()
    }
}

/// `second ∘ first`.
#[derive(Clone, Debug)]
pub struct Composed {
    first: SharedMap,
    second: SharedMap,
}

impl Composed {
    pub fn new(first: SharedMap, second: SharedMap) -> Result<Self> {
        if first.target() != second.source() {
            return Err(Error::ShapeMismatch("composition of incompatible maps".into()));
        }
        Ok(Composed { first, second })
    }
}

impl LinearMap for Composed {
    fn source(&self) -> &Algebra {
        self.first.source()
    }
    fn target(&self) -> &Algebra {
        self.second.target()
    }
    fn apply(&self, a: &Element) -> Element {
        self.second.apply(&self.first.apply(a))
    }
}

/// Scalar multiple of a map (used to build deliberately broken examples).
#[derive(Clone, Debug)]
pub struct Scaled {
    pub map: SharedMap,
    pub factor: f64,
}

impl LinearMap for Scaled {
    fn source(&self) -> &Algebra {
        self.map.source()
    }
    fn target(&self) -> &Algebra {
        self.map.target()
    }
    fn apply(&self, a: &Element) -> Element {
        self.map.apply(a).scale(numerics::real(self.factor))
    }
}

/// `α(a)_i = u_i a_{σ(i)} u_i*`: the general *-automorphism of `⊕ M_{n_i}`.
#[derive(Clone, Debug)]
pub struct BlockAutomorphism {
    algebra: Algebra,
    perm: Vec<usize>,
    unitaries: Vec<CMat>,
}

impl BlockAutomorphism {
    pub fn new(algebra: Algebra, perm: Vec<usize>, unitaries: Vec<CMat>, tol: &Tolerance) -> Result<Self> {
        let k = algebra.num_blocks();
        let mut seen = vec![false; k];
        if perm.len() != k || unitaries.len() != k {
            return Err(Error::ShapeMismatch("automorphism data length".into()));
        }
        for (i, &j) in perm.iter().enumerate() {
            if j >= k || seen[j] {
                return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation")));
            }
            seen[j] = true;
            let n = algebra.block_sizes()[i];
            if algebra.block_sizes()[j] != n {
                return Err(Error::InvalidParameter(format!(
                    "block {i} (size {n}) cannot receive block {j}"
                )));
            }
            let u = &unitaries[i];
            if u.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!("unitary for block {i}")));
            }
            let (l, r) = numerics::unitarity_residuals(u);
            if l.max(r) > tol.residual_tol {
                return Err(Error::InvalidParameter(format!("block {i} matrix is not unitary")));
            }
        }
        Ok(BlockAutomorphism {
            algebra,
            perm,
            unitaries,
        })
    }

    pub fn identity(algebra: Algebra) -> Self {
        let perm = (0..algebra.num_blocks()).collect();
        let unitaries = algebra.block_sizes().iter().map(|&n| numerics::identity(n)).collect();
        BlockAutomorphism {
            algebra,
            perm,
            unitaries,
        }
    }

    pub fn inverse(&self) -> BlockAutomorphism {
        let k = self.perm.len();
        let mut perm = vec![0; k];
        let mut unitaries = vec![CMat::zeros(0, 0); k];
        for i in 0..k {
            let j = self.perm[i];
            perm[j] = i;
            unitaries[j] = self.unitaries[i].adjoint();
        }
        BlockAutomorphism {
            algebra: self.algebra.clone(),
            perm,
            unitaries,
        }
    }
}

impl LinearMap for BlockAutomorphism {
    fn source(&self) -> &Algebra {
        &self.algebra
    }
    fn target(&self) -> &Algebra {
        &self.algebra
    }
    fn apply(&self, a: &Element) -> Element {
        Element {
            blocks: (0..self.perm.len())
                .map(|i| &self.unitaries[i] * &a.blocks[self.perm[i]] * self.unitaries[i].adjoint())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomReport {
    pub mult_residual: f64,
    pub star_residual: f64,
    pub unit_residual: f64,
    pub passed: bool,
}

/// Checks multiplicativity over all ordered pairs of matrix units, adjoint
/// preservation over the basis, and unitality.
pub fn verify_star_hom(h: &dyn LinearMap, tol: &Tolerance) -> Result<HomReport> {
    let src = h.source();
    let basis = src.basis();
    let images: Vec<Element> = basis.iter().map(|b| h.apply(b)).collect();
    for img in &images {
        h.target().check_element(img)?;
    }
    let mut mult: f64 = 0.0;
    let mut star: f64 = 0.0;
    for (a, ha) in basis.iter().zip(&images) {
        star = star.max(element_residual(&h.apply(&a.adjoint()), &ha.adjoint()));
        for (b, hb) in basis.iter().zip(&images) {
            let prod = a.mul(b);
            // products of matrix units are either zero or a single unit
            let hab = if prod.norm() == 0.0 { h.target().zero() } else { h.apply(&prod) };
            mult = mult.max(element_residual(&hab, &ha.mul(hb)));
        }
    }
    let unit = element_residual(&h.apply(&src.unit()), &h.target().unit());
    let passed = mult <= tol.residual_tol && star <= tol.residual_tol && unit <= tol.residual_tol;
    Ok(HomReport {
        mult_residual: mult,
        star_residual: star,
        unit_residual: unit,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndomorphismReport {
    pub hom: HomReport,
    pub rank: usize,
    pub injective: bool,
    /// Injective unital endomorphisms of a finite-dimensional algebra are onto,
    /// so this always equals `injective`.
    pub automorphism: bool,
    pub note: &'static str,
}

pub fn verify_endomorphism(alpha: &dyn LinearMap, tol: &Tolerance) -> Result<EndomorphismReport> {
    if alpha.source() != alpha.target() {
        return Err(Error::ShapeMismatch("endomorphism must map an algebra to itself".into()));
    }
    let hom = verify_star_hom(alpha, tol)?;
    if !hom.passed {
        return Err(Error::NotStarHom(format!(
            "mult {:.3e}, star {:.3e}, unit {:.3e}",
            hom.mult_residual, hom.star_residual, hom.unit_residual
        )));
    }
    let rank = numerics::numerical_rank(&alpha.coordinate_matrix(), tol);
    let injective = rank == alpha.source().dim();
    Ok(EndomorphismReport {
        hom,
        rank,
        injective,
        automorphism: injective,
        note: "an injective linear endomorphism of a finite-dimensional space is surjective; \
               proper (non-surjective) endomorphisms need the shift tower",
    })
}

/// Orthonormal coordinate basis of `h(A)` and its rank.
pub fn range_subalgebra_basis(h: &dyn LinearMap, tol: &Tolerance) -> Result<(CMat, usize)> {
    orthonormal_span(&h.coordinate_matrix(), tol)
}

/// State given by one density block per algebra block: `ω(a) = Σ tr(ρ_i a_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    algebra: Algebra,
    densities: Vec<CMat>,
}

impl State {
    pub fn new(algebra: Algebra, densities: Vec<CMat>, tol: &Tolerance) -> Result<Self> {
        if densities.len() != algebra.num_blocks()
            || densities.iter().zip(algebra.block_sizes()).any(|(d, &n)| d.shape() != (n, n))
        {
            return Err(Error::ShapeMismatch("density blocks".into()));
        }
        let mut total = ZERO;
        for d in &densities {
            numerics::check_finite(d, "density")?;
            if numerics::hermitian_residual(d) > tol.residual_tol {
                return Err(Error::NotState("density is not Hermitian".into()));
            }
            let (vals, _) = hermitian_eigen(d);
            if let Some(&min) = vals.first() {
                if min < -tol.psd_floor {
                    return Err(Error::NotState(format!("negative density eigenvalue {min:.3e}")));
                }
            }
            total += d.trace();
        }
        if (total - ONE).norm() > tol.residual_tol {
            return Err(Error::NotState(format!("ω(1) = {:.6} ≠ 1", total.re)));
        }
        Ok(State { algebra, densities })
    }

    /// State from its values on the matrix units: `ρ_i[q][p] = ω(E^i_pq)`.
    pub fn from_functional<F>(algebra: Algebra, omega: F, tol: &Tolerance) -> Result<Self>
    where
        F: Fn(&Element) -> numerics::C64,
    {
        let densities = algebra
            .block_sizes()
            .iter()
            .enumerate()
            .map(|(i, &n)| CMat::from_fn(n, n, |q, p| omega(&algebra.matrix_unit(i, p, q))))
            .collect();
        State::new(algebra, densities, tol)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn densities(&self) -> &[CMat] {
        &self.densities
    }

    pub fn eval(&self, a: &Element) -> numerics::C64 {
        self.densities
            .iter()
            .zip(&a.blocks)
            .map(|(d, b)| (d * b).trace())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{random_unitary, real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug)]
    struct Transpose(Algebra);
    impl LinearMap for Transpose {
        fn source(&self) -> &Algebra {
            &self.0
        }
        fn target(&self) -> &Algebra {
            &self.0
        }
        fn apply(&self, a: &Element) -> Element {
            Element::from_blocks(a.blocks.iter().map(|b| b.transpose()).collect())
        }
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn coordinates_round_trip() {
        let alg = Algebra::new(vec![2, 1, 3]).unwrap();
        assert_eq!(alg.dim(), 14);
        for j in 0..alg.dim() {
            let e = alg.basis_element(j);
            let v = alg.coords(&e);
            assert_eq!(v[j], ONE);
            assert_eq!(alg.from_coords(&v), e);
            let (i, p, q) = alg.unit_of(j);
            assert_eq!(alg.basis_index(i, p, q), j);
        }
    }

    #[test]
    fn identity_is_star_hom() {
        let alg = Algebra::full(2);
        let r = verify_star_hom(&IdentityMap(alg), &tol()).unwrap();
        assert_eq!((r.mult_residual, r.star_residual, r.unit_residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn inner_automorphism_is_star_hom() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alg = Algebra::full(3);
        let u = random_unitary(3, &mut rng);
        let h = BlockAutomorphism::new(alg, vec![0], vec![u], &tol()).unwrap();
        let r = verify_star_hom(&h, &tol()).unwrap();
        assert!(r.passed && r.mult_residual < 1e-12);
    }

    #[test]
    fn transpose_is_not_multiplicative() {
        let alg = Algebra::full(2);
        let t = Transpose(alg.clone());
        let r = verify_star_hom(&t, &tol()).unwrap();
        assert!(r.mult_residual > 0.1);
        // explicit witness: t(E12 E21) = E11 but t(E12) t(E21) = E22
        let e12 = alg.matrix_unit(0, 0, 1);
        let e21 = alg.matrix_unit(0, 1, 0);
        let lhs = t.apply(&e12.mul(&e21));
        let rhs = t.apply(&e12).mul(&t.apply(&e21));
        assert!(element_residual(&lhs, &rhs) > 0.1);
    }

    #[test]
    fn endomorphism_flags() {
        let c2 = Algebra::new(vec![1, 1]).unwrap();
        let r = verify_endomorphism(&IdentityMap(c2.clone()), &tol()).unwrap();
        assert!(r.injective && r.automorphism);
        let swap = BlockAutomorphism::new(
            c2.clone(),
            vec![1, 0],
            vec![numerics::identity(1), numerics::identity(1)],
            &tol(),
        )
        .unwrap();
        let r = verify_endomorphism(&swap, &tol()).unwrap();
        assert!(r.injective && r.automorphism);
        // (a, b) -> (a, a)
        let m = CMat::from_row_slice(2, 2, &[ONE, ZERO, ONE, ZERO]);
        let diag = DenseMap::new(c2.clone(), c2, m).unwrap();
        let r = verify_endomorphism(&diag, &tol()).unwrap();
        assert!(!r.injective);
        assert_eq!(r.rank, 1);
        assert_eq!(range_subalgebra_basis(&diag, &tol()).unwrap().1, 1);
    }

    #[test]
    fn automorphism_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alg = Algebra::new(vec![2, 2]).unwrap();
        let us = vec![random_unitary(2, &mut rng), random_unitary(2, &mut rng)];
        let a = BlockAutomorphism::new(alg.clone(), vec![1, 0], us, &tol()).unwrap();
        let inv = a.inverse();
        for b in alg.basis() {
            assert!(element_residual(&inv.apply(&a.apply(&b)), &b) < 1e-14);
        }
    }

    #[test]
    fn state_validation() {
        let alg = Algebra::full(2);
        let rho = CMat::from_row_slice(2, 2, &[real(1.0), ZERO, ZERO, ZERO]);
        let s = State::new(alg.clone(), vec![rho], &tol()).unwrap();
        assert_eq!(s.eval(&alg.matrix_unit(0, 0, 0)), ONE);
        let bad = CMat::from_row_slice(2, 2, &[real(0.7), ZERO, ZERO, ZERO]);
        assert!(matches!(State::new(alg, vec![bad], &tol()), Err(Error::NotState(_))));
    }
}
