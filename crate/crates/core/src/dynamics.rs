//! A single interface over the two backends: a finite-dimensional algebra with
//! an automorphism, and the shift tower with its depth grading.
//!
//! Depths index the tower stage an object lives on. For the finite backend all
//! depths coincide, `embed` is the identity and `α⁻¹` is the only transfer operator.

use std::sync::Arc;

use crate::algebra::{
    verify_endomorphism, Algebra, DenseMap, IdentityMap, Representation, SharedMap,
};
use crate::cpmaps::transfer_from_expectation;
use crate::error::{Error, Result};
use crate::numerics::{CMat, Tolerance};
use crate::tower::{ShiftTower, TowerEmbed, TowerExpectation, TowerRangeInverse, TowerShift, TowerTransfer};

/// Above this many basis elements, relations closed under products and
/// adjoints are checked on generators only.
pub const BASIS_CHECK_LIMIT: usize = 1024;

/// Which transfer operator `τ` a construction is adapted to.
#[derive(Clone, Debug)]
pub enum TransferSpec {
    /// `τ = α⁻¹` (finite backend).
    Inverse,
    /// `τ_φ = φ ⊗ id` for a density `φ` on `M_k` (tower backend).
    Phi(CMat),
    /// An explicit map, used as is at every depth.
    Map(SharedMap),
}

/// Which conditional expectation onto `α(A)` drives the state-extension route.
#[derive(Clone, Debug)]
pub enum ExpectationSpec {
    /// `E = id` (finite backend, where `α(A) = A`).
    Identity,
    /// `E_φ = α ∘ τ_φ` (tower backend).
    Phi(CMat),
    /// An explicit map, used as is at every depth.
    Map(SharedMap),
}

#[derive(Clone, Debug)]
pub struct FiniteDynamics {
    algebra: Algebra,
    alpha: SharedMap,
    alpha_inverse: SharedMap,
    trivial: bool,
}

impl FiniteDynamics {
    /// Validates `α` as an injective unital *-endomorphism, hence an automorphism.
    pub fn new(alpha: SharedMap, tol: &Tolerance) -> Result<Self> {
        let rep = verify_endomorphism(alpha.as_ref(), tol)?;
        if !rep.injective {
            return Err(Error::NotInjective {
                rank: rep.rank,
                dim: alpha.source().dim(),
            });
        }
        let algebra = alpha.source().clone();
        let inv = transfer_from_expectation(alpha.as_ref(), &IdentityMap(algebra.clone()), tol)?;
        let trivial = algebra.basis().iter().all(|b| alpha.apply(b) == *b);
        Ok(FiniteDynamics {
            algebra,
            alpha,
            alpha_inverse: Arc::new(inv),
            trivial,
        })
    }

    pub fn identity(algebra: Algebra) -> Self {
        let id: SharedMap = Arc::new(IdentityMap(algebra.clone()));
        FiniteDynamics {
            algebra,
            alpha: id.clone(),
            alpha_inverse: id,
            trivial: true,
        }
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn alpha(&self) -> &SharedMap {
        &self.alpha
    }

    pub fn alpha_inverse(&self) -> &SharedMap {
        &self.alpha_inverse
    }
}

#[derive(Clone, Debug)]
pub enum Dynamics {
    Finite(FiniteDynamics),
    Tower(ShiftTower),
}

pub fn check_units(alg: &Algebra) -> Vec<(usize, usize, usize)> {
    if alg.dim() <= BASIS_CHECK_LIMIT {
        return (0..alg.dim()).map(|j| alg.unit_of(j)).collect();
    }
    generator_units(alg)
}

/// `E_00` of every block and the units `E_{p,p+1}`, `E_{p+1,p}`: they generate `A`.
pub fn generator_units(alg: &Algebra) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (i, &n) in alg.block_sizes().iter().enumerate() {
        out.push((i, 0, 0));
        for p in 0..n.saturating_sub(1) {
            out.push((i, p, p + 1));
            out.push((i, p + 1, p));
        }
    }
    out
}

impl Dynamics {
    pub fn is_tower(&self) -> bool {
        matches!(self, Dynamics::Tower(_))
    }

    pub fn tower(&self) -> Option<&ShiftTower> {
        match self {
            Dynamics::Tower(t) => Some(t),
            Dynamics::Finite(_) => None,
        }
    }

    pub fn algebra(&self, depth: usize) -> Algebra {
        match self {
            Dynamics::Finite(f) => f.algebra.clone(),
            Dynamics::Tower(t) => t.algebra(depth),
        }
    }

    /// `depth + n`, checked against the depth budget.
    pub fn above(&self, depth: usize, n: usize) -> Result<usize> {
        match self {
            Dynamics::Finite(_) => Ok(depth),
            Dynamics::Tower(t) => {
                let d = depth + n;
                t.check_depth(d)?;
                Ok(d)
            }
        }
    }

    /// `depth − n`, which must stay nonnegative.
    pub fn below(&self, depth: usize, n: usize) -> Result<usize> {
        match self {
            Dynamics::Finite(_) => Ok(depth),
            Dynamics::Tower(_) => depth.checked_sub(n).ok_or_else(|| {
                Error::DepthExceeded(format!("need {n} levels below depth {depth}"))
            }),
        }
    }

    /// `α: A_d → A_{d+1}`.
    pub fn alpha(&self, depth: usize) -> Result<SharedMap> {
        match self {
            Dynamics::Finite(f) => Ok(f.alpha.clone()),
            Dynamics::Tower(t) => Ok(Arc::new(TowerShift::new(t, depth)?)),
        }
    }

    /// `ι: A_from → A_to`.
    pub fn embed(&self, from: usize, to: usize) -> Result<SharedMap> {
        match self {
            Dynamics::Finite(f) => Ok(Arc::new(IdentityMap(f.algebra.clone()))),
            Dynamics::Tower(t) => Ok(Arc::new(TowerEmbed::new(t, from, to)?)),
        }
    }

    /// `τ: A_{d+1} → A_d`.
    pub fn transfer(&self, depth: usize, spec: &TransferSpec, tol: &Tolerance) -> Result<SharedMap> {
        match (self, spec) {
            (Dynamics::Finite(f), TransferSpec::Inverse) => Ok(f.alpha_inverse.clone()),
            (Dynamics::Tower(t), TransferSpec::Phi(phi)) => {
                t.validate_phi(phi, tol)?;
                Ok(Arc::new(TowerTransfer::new(t, phi.clone(), depth)?))
            }
            (_, TransferSpec::Map(m)) => {
                let above = self.above(depth, 1)?;
                if m.source() != &self.algebra(above) || m.target() != &self.algebra(depth) {
                    return Err(Error::StrategyInvalid(format!(
                        "transfer map does not act from depth {above} to depth {depth}"
                    )));
                }
                Ok(m.clone())
            }
            (Dynamics::Finite(_), TransferSpec::Phi(_)) => Err(Error::StrategyInvalid(
                "a slice state φ only defines a transfer operator on the shift tower".into(),
            )),
            (Dynamics::Tower(_), TransferSpec::Inverse) => Err(Error::StrategyInvalid(
                "the shift is not invertible; choose a state φ".into(),
            )),
        }
    }

    /// Conditional expectation on `A_{d+1}` onto `α(A_d)`.
    pub fn expectation(&self, depth: usize, spec: &ExpectationSpec, tol: &Tolerance) -> Result<SharedMap> {
        match (self, spec) {
            (Dynamics::Finite(f), ExpectationSpec::Identity) => Ok(Arc::new(IdentityMap(f.algebra.clone()))),
            (Dynamics::Tower(t), ExpectationSpec::Phi(phi)) => {
                t.validate_phi(phi, tol)?;
                Ok(Arc::new(TowerExpectation::new(t, phi.clone(), depth)?))
            }
            (_, ExpectationSpec::Map(m)) => {
                let above = self.above(depth, 1)?;
                let alg = self.algebra(above);
                if m.source() != &alg || m.target() != &alg {
                    return Err(Error::StrategyInvalid(format!(
                        "expectation does not act on depth {above}"
                    )));
                }
                Ok(m.clone())
            }
            (Dynamics::Finite(_), ExpectationSpec::Phi(_)) => Err(Error::StrategyInvalid(
                "a slice state φ only defines an expectation on the shift tower".into(),
            )),
            (Dynamics::Tower(_), ExpectationSpec::Identity) => Err(Error::StrategyInvalid(
                "the identity is not an expectation onto the range of the shift".into(),
            )),
        }
    }

    /// `α⁻¹` on the range of `α: A_d → A_{d+1}`.
    pub fn range_inverse(&self, depth: usize) -> Result<SharedMap> {
        match self {
            Dynamics::Finite(f) => Ok(f.alpha_inverse.clone()),
            Dynamics::Tower(t) => Ok(Arc::new(TowerRangeInverse::new(t, depth)?)),
        }
    }

    /// `π ∘ α` for a representation `π` of `A_{d+1}`.
    pub fn pullback_alpha(&self, rep: &Representation, depth: usize, tol: &Tolerance) -> Result<Representation> {
        match self {
            Dynamics::Finite(f) => {
                if f.trivial {
                    return Ok(rep.clone());
                }
                rep.pullback(f.alpha.as_ref(), tol)
            }
            Dynamics::Tower(t) => rep.shift_pullback(t.algebra(depth), t.k),
        }
    }

    /// `π ∘ α^n` for a representation of `A_{d+n}`, landing on `A_d`.
    pub fn pullback_alpha_power(
        &self,
        rep: &Representation,
        depth: usize,
        n: usize,
        tol: &Tolerance,
    ) -> Result<Representation> {
        let mut out = rep.clone();
        for j in (0..n).rev() {
            out = self.pullback_alpha(&out, self.above(depth, j)?, tol)?;
        }
        Ok(out)
    }

    /// `π ∘ ι` for a representation `π` of `A_to`, landing on `A_from`.
    pub fn pullback_embed(&self, rep: &Representation, from: usize, to: usize) -> Result<Representation> {
        match self {
            Dynamics::Finite(_) => Ok(rep.clone()),
            Dynamics::Tower(t) => {
                if to < from {
                    return Err(Error::InvalidParameter(format!("cannot pull depth {to} back to {from}")));
                }
                if to == from {
                    return Ok(rep.clone());
                }
                rep.inflate_pullback(t.algebra(from), t.size(to - from))
            }
        }
    }

    /// Matrix units `(block, p, q)` of `A_d` on which relations are checked: the
    /// whole basis, or the generating units once the basis exceeds
    /// [`BASIS_CHECK_LIMIT`] (enough for relations closed under products and adjoints).
    pub fn check_units(&self, depth: usize) -> Vec<(usize, usize, usize)> {
        check_units(&self.algebra(depth))
    }

    /// Coordinate-level representation of `α` as a dense map, for reports.
    pub fn alpha_dense(&self, depth: usize) -> Result<DenseMap> {
        Ok(DenseMap::from_map(self.alpha(depth)?.as_ref()))
    }
}
