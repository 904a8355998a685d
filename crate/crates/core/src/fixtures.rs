//! Ready-made covariant pairs: the scalar contraction, a twisted block swap,
//! the shift tower, and random pairs over both backends.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{Algebra, BlockAutomorphism, Representation};
use crate::covariant::CovariantPair;
use crate::dynamics::{generator_units, Dynamics, FiniteDynamics};
use crate::error::{Error, Result};
use crate::numerics::{self, random_complex_matrix, random_unitary, real, spectral_norm, CMat, Tolerance, ONE};
use crate::tower::ShiftTower;

/// `A = ℂ`, `α = id`, `π` the identity on `ℂ^n` and `T` any contraction.
pub fn matrix_pair(t: CMat, tol: &Tolerance) -> Result<CovariantPair> {
    let alg = Algebra::new(vec![1])?;
    let pi = Representation::canonical(alg.clone(), vec![t.nrows()])?;
    CovariantPair::new(Dynamics::Finite(FiniteDynamics::identity(alg)), 0, pi, t, tol)
}

pub fn scalar_pair(t: f64, tol: &Tolerance) -> Result<CovariantPair> {
    matrix_pair(CMat::from_element(1, 1, real(t)), tol)
}

/// `M_2 ⊕ M_2 ⊕ ℂ` with `α` swapping the `M_2` blocks twisted by two unitaries,
/// `π` the identity representation and `T` the intertwiner of `π ∘ α` with `π`
/// scaled by `c·i`.
pub fn automorphism_pair<R: Rng + ?Sized>(rng: &mut R, c: f64, tol: &Tolerance) -> Result<CovariantPair> {
    let alg = Algebra::new(vec![2, 2, 1])?;
    let u0 = random_unitary(2, rng);
    let u1 = random_unitary(2, rng);
    let aut = BlockAutomorphism::new(alg.clone(), vec![1, 0, 2], vec![u0.clone(), u1.clone(), numerics::identity(1)], tol)?;
    let dynamics = Dynamics::Finite(FiniteDynamics::new(Arc::new(aut), tol)?);
    let pi = Representation::canonical(alg, vec![1, 1, 1])?;
    let mut t = numerics::zeros(5, 5);
    t.view_mut((0, 2), (2, 2)).copy_from(&u1.adjoint());
    t.view_mut((2, 0), (2, 2)).copy_from(&u0.adjoint());
    t[(4, 4)] = ONE;
    let t = t * real(c) * numerics::c(0.0, 1.0);
    CovariantPair::new(dynamics, 0, pi, t, tol)
}

/// The shift tower over `M_k` with the standard representation at `depth` and
/// `T = c·R`, `R(ξ₁ ⊗ ξ') = ⟨ξ₁, u⟩ ξ' ⊗ e_{k−1}` for `u = (0.6, 0.8, 0, …)`.
pub fn tower_pair(k: usize, d_max: usize, depth: usize, c: f64, tol: &Tolerance) -> Result<CovariantPair> {
    let tw = ShiftTower::new(k, d_max, crate::tower::DEFAULT_SIZE_CAP)?;
    let mut u = numerics::zeros(k, 1);
    u[(0, 0)] = real(0.6);
    u[(1, 0)] = real(0.8);
    let mut v = numerics::zeros(k, 1);
    v[(k - 1, 0)] = ONE;
    let t = tw.shift_down_operator(depth, 1, c, &u, &v)?;
    let pi = tw.standard_rep(depth, 1)?;
    CovariantPair::new(Dynamics::Tower(tw), depth, pi, t, tol)
}

/// Orthonormal basis (as `n×n` matrices) of `{T : T π(α(a)) = π(ι(a)) T}`.
///
/// With `A_u = π(α(g))`, `B_u = π(ι(g))` over generating units `g` and `vec`
/// column-major, the null space of `Σ_u M_u* M_u` for `M_u = A_uᵀ ⊗ I − I ⊗ B_u`
/// is assembled from Kronecker products instead of stacking the `M_u`.
pub fn covariant_operators(dynamics: &Dynamics, depth: usize, pi: &Representation, tol: &Tolerance) -> Result<Vec<CMat>> {
    let n = pi.dim();
    let lower = dynamics.below(depth, 1)?;
    let pa = dynamics.pullback_alpha(pi, lower, tol)?;
    let pe = dynamics.pullback_embed(pi, lower, depth)?;
    let eye = numerics::identity(n);
    let mut aa = numerics::zeros(n, n);
    let mut bb = numerics::zeros(n, n);
    let mut cross = numerics::zeros(n * n, n * n);
    for (i, p, q) in generator_units(&dynamics.algebra(lower)) {
        let a = pa.apply_unit(i, p, q, &eye);
        let b = pe.apply_unit(i, p, q, &eye);
        let abar = a.conjugate();
        aa += &abar * a.transpose();
        bb += b.adjoint() * &b;
        let k = numerics::kron(&abar, &b);
        cross += &k + k.adjoint();
    }
    let gram = numerics::kron(&aa, &eye) + numerics::kron(&eye, &bb) - cross;
    let (vals, vecs) = numerics::hermitian_eigen(&gram);
    let max = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mut out = Vec::new();
    for (j, &v) in vals.iter().enumerate() {
        if v <= tol.rank_eps * max.max(1.0) {
            out.push(CMat::from_column_slice(n, n, vecs.column(j).as_slice()));
        }
    }
    Ok(out)
}

/// A random combination of covariant operators, scaled to norm `c`.
pub fn random_covariant_operator<R: Rng + ?Sized>(
    dynamics: &Dynamics,
    depth: usize,
    pi: &Representation,
    c: f64,
    rng: &mut R,
    tol: &Tolerance,
) -> Result<CMat> {
    let basis = covariant_operators(dynamics, depth, pi, tol)?;
    if basis.is_empty() {
        return Err(Error::InvalidParameter("no nonzero covariant operator".into()));
    }
    let coeffs = random_complex_matrix(basis.len(), 1, rng);
    let mut t = numerics::zeros(pi.dim(), pi.dim());
    for (j, b) in basis.iter().enumerate() {
        t += b * coeffs[(j, 0)];
    }
    let norm = spectral_norm(&t);
    Ok(t * real(c / norm))
}

/// Random `⊕ M_{n_i}` (one to three blocks of size at most three), a random
/// automorphism permuting equal blocks, `π` with equal multiplicities in a
/// Haar frame, and a random covariant `T` of norm in `[0.3, 0.95]`.
pub fn random_finite_pair<R: Rng + ?Sized>(rng: &mut R, tol: &Tolerance) -> Result<CovariantPair> {
    let nb = rng.random_range(1..=3);
    let blocks: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=3)).collect();
    let alg = Algebra::new(blocks.clone())?;
    let mut perm: Vec<usize> = (0..nb).collect();
    for size in 1..=3 {
        let mut idx: Vec<usize> = (0..nb).filter(|&i| blocks[i] == size).collect();
        let orig = idx.clone();
        idx.shuffle(rng);
        for (a, b) in orig.iter().zip(&idx) {
            perm[*a] = *b;
        }
    }
    let unitaries = blocks.iter().map(|&n| random_unitary(n, rng)).collect();
    let aut = BlockAutomorphism::new(alg.clone(), perm, unitaries, tol)?;
    let dynamics = Dynamics::Finite(FiniteDynamics::new(Arc::new(aut), tol)?);
    let m = rng.random_range(1..=2);
    let dim: usize = blocks.iter().sum::<usize>() * m;
    let pi = Representation::with_frame(alg, vec![m; nb], random_unitary(dim, rng), tol)?;
    let c = rng.random_range(0.3..0.95);
    let t = random_covariant_operator(&dynamics, 0, &pi, c, rng, tol)?;
    CovariantPair::new(dynamics, 0, pi, t, tol)
}

/// The shift tower over `M_2` at depth 2 (`D_max = 4`), multiplicity one, with
/// `T ≅ Z ⊗ I` for a random `Z` on `ℂ^2` of norm in `[0.3, 0.95]`.
pub fn random_tower_pair<R: Rng + ?Sized>(rng: &mut R, tol: &Tolerance) -> Result<CovariantPair> {
    random_tower_pair_at(rng, 4, 2, tol)
}

pub fn random_tower_pair_at<R: Rng + ?Sized>(rng: &mut R, d_max: usize, depth: usize, tol: &Tolerance) -> Result<CovariantPair> {
    let tw = ShiftTower::new(2, d_max, crate::tower::DEFAULT_SIZE_CAP)?;
    let z = random_complex_matrix(2, 2, rng);
    let c = rng.random_range(0.3..0.95);
    let z = &z * real(c / spectral_norm(&z));
    let t = tw.shift_operator_from(depth, 1, &z)?;
    let pi = tw.standard_rep(depth, 1)?;
    CovariantPair::new(Dynamics::Tower(tw), depth, pi, t, tol)
}
