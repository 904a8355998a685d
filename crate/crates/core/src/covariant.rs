//! Covariant pairs `(π, T)` with `T π(α(a)) = π(a) T`, their defect operators,
//! the extension step `W* ρ(α(a)) W = π(a)` and the two-step block.

use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::algebra::{cyclic_decomposition, gns, Composed, Representation, SharedMap, State};
use crate::cpmaps::{stinespring_minimal, verify_completely_positive, verify_transfer, RepComposed};
use crate::dynamics::{Dynamics, ExpectationSpec, TransferSpec};
use crate::error::{Error, Result};
use crate::numerics::{self, hermitian_pinv, psd_sqrt, spectral_norm, CMat, Tolerance};

/// `max ‖T π(α(a)) − π(ι(a)) T‖` over matrix units `a` of `A_{d−1}`, for `π` a
/// representation of `A_d`. `T` may be rectangular (`H → H'`) when `pi_out`
/// differs from `pi_in`.
pub fn intertwining_residual(
    dynamics: &Dynamics,
    depth: usize,
    pi_in: &Representation,
    pi_out: &Representation,
    t: &CMat,
    tol: &Tolerance,
) -> Result<f64> {
    if t.shape() != (pi_out.dim(), pi_in.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "operator of shape {:?} between spaces of dimension {} and {}",
            t.shape(),
            pi_in.dim(),
            pi_out.dim()
        )));
    }
    let lower = dynamics.below(depth, 1)?;
    let pa = dynamics.pullback_alpha(pi_in, lower, tol)?;
    let pe = dynamics.pullback_embed(pi_out, lower, depth)?;
    let ts = t.adjoint();
    let mut worst: f64 = 0.0;
    for (i, p, q) in dynamics.check_units(lower) {
        // T π(α(E_pq)) = (π(α(E_qp)) T*)*
        let left = pa.apply_unit(i, q, p, &ts).adjoint();
        let right = pe.apply_unit(i, p, q, t);
        worst = worst.max(numerics::diff_norm(&left, &right));
    }
    Ok(worst)
}

/// `max ‖[X, π(a)]‖` over matrix units, for Hermitian `X`.
pub fn hermitian_commutator_residual(rep: &Representation, x: &CMat, units: &[(usize, usize, usize)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(i, p, q) in units {
        let left = rep.apply_unit(i, q, p, x).adjoint();
        let right = rep.apply_unit(i, p, q, x);
        worst = worst.max(numerics::diff_norm(&left, &right));
    }
    worst
}

/// A contractive covariant representation `(π, T)` of `A_d`.
#[derive(Clone, Debug)]
pub struct CovariantPair {
    dynamics: Dynamics,
    depth: usize,
    pi: Representation,
    t: CMat,
    covariance_residual: f64,
}

impl CovariantPair {
    /// Validates shapes, `‖T‖ ≤ 1 + rank_eps` and the covariance relation.
    pub fn new(dynamics: Dynamics, depth: usize, pi: Representation, t: CMat, tol: &Tolerance) -> Result<Self> {
        if pi.algebra() != &dynamics.algebra(depth) {
            return Err(Error::ShapeMismatch(format!("π does not represent the algebra at depth {depth}")));
        }
        if t.shape() != (pi.dim(), pi.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "T is {:?} but π acts on dimension {}",
                t.shape(),
                pi.dim()
            )));
        }
        numerics::check_finite(&t, "T")?;
        let norm = spectral_norm(&t);
        if norm > 1.0 + tol.rank_eps {
            return Err(Error::NotContraction { norm });
        }
        let residual = intertwining_residual(&dynamics, depth, &pi, &pi, &t, tol)?;
        if residual > tol.residual_tol {
            return Err(Error::NotCovariant { residual });
        }
        Ok(CovariantPair {
            dynamics,
            depth,
            pi,
            t,
            covariance_residual: residual,
        })
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn pi(&self) -> &Representation {
        &self.pi
    }

    pub fn t(&self) -> &CMat {
        &self.t
    }

    pub fn dim(&self) -> usize {
        self.pi.dim()
    }

    pub fn covariance_residual(&self) -> f64 {
        self.covariance_residual
    }

    pub fn defect_operators(&self, tol: &Tolerance) -> Result<Defects> {
        defect_operators(self, tol)
    }
}

#[derive(Clone, Debug)]
pub struct Defects {
    /// `(I − T*T)^{1/2}`
    pub delta: CMat,
    /// `(I − TT*)^{1/2}`
    pub delta_star: CMat,
    pub report: DefectReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    /// `max ‖[Δ*, π(ι(a))]‖`
    pub delta_star_commutation: f64,
    /// `max ‖[Δ, π(α(a))]‖`
    pub delta_commutation: f64,
    /// `max ‖[TT*, π(ι(a))]‖`
    pub tt_star_commutation: f64,
}

/// Square root of `I − X` for `0 ≤ X ≤ (1 + rank_eps)²`, clamping the slack.
pub(crate) fn defect_root(x: &CMat, tol: &Tolerance) -> Result<CMat> {
    let n = x.nrows();
    let m = numerics::identity(n) - x;
    let slack = Tolerance {
        psd_floor: tol.psd_floor.max(3.0 * tol.rank_eps),
        ..*tol
    };
    let m = (&m + m.adjoint()) * numerics::real(0.5);
    psd_sqrt(&m, &slack)
}

pub fn defect_operators(pair: &CovariantPair, tol: &Tolerance) -> Result<Defects> {
    let t = &pair.t;
    let norm = spectral_norm(t);
    if norm > 1.0 + tol.rank_eps {
        return Err(Error::NotContraction { norm });
    }
    let tt = t * t.adjoint();
    let delta = defect_root(&(t.adjoint() * t), tol)?;
    let delta_star = defect_root(&tt, tol)?;
    let d = &pair.dynamics;
    // covariance only involves A_{d−1}, so that is where the commutation holds
    let lower = d.below(pair.depth, 1)?;
    let units = d.check_units(lower);
    let pa = d.pullback_alpha(&pair.pi, lower, tol)?;
    let pe = d.pullback_embed(&pair.pi, lower, pair.depth)?;
    let report = DefectReport {
        delta_star_commutation: hermitian_commutator_residual(&pe, &delta_star, &units),
        delta_commutation: hermitian_commutator_residual(&pa, &delta, &units),
        tt_star_commutation: hermitian_commutator_residual(&pe, &tt, &units),
    };
    Ok(Defects {
        delta,
        delta_star,
        report,
    })
}

/// How the extension step is realized.
#[derive(Clone, Debug)]
pub enum Strategy {
    /// Minimal Stinespring dilation of `π ∘ τ`.
    Adapted(TransferSpec),
    /// Per cyclic summand, the GNS representation of `ω₀ ∘ E`.
    Gns(ExpectationSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyTag {
    Adapted,
    GnsRoute,
}

impl Strategy {
    pub fn tag(&self) -> StrategyTag {
        match self {
            Strategy::Adapted(_) => StrategyTag::Adapted,
            Strategy::Gns(_) => StrategyTag::GnsRoute,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionReport {
    /// `‖W*W − I‖`
    pub isometry_residual: f64,
    /// `max ‖W* ρ(α(a)) W − π(a)‖`
    pub ext_residual: f64,
    /// `max ‖[WW*, ρ(α(a))]‖`
    pub commutation_residual: f64,
    pub passed: bool,
}

/// `(ρ, W)` with `W: H → K` isometric and `W* ρ(α(a)) W = π(a)`; `ρ` represents
/// the algebra one depth above `π`.
#[derive(Clone, Debug)]
pub struct HbExtension {
    pub rho: Representation,
    pub w: CMat,
    pub tag: StrategyTag,
    /// Depth of the extended representation `π`.
    pub depth: usize,
    pub report: ExtensionReport,
}

fn empty_extension(dynamics: &Dynamics, depth: usize, tag: StrategyTag) -> Result<HbExtension> {
    let alg = dynamics.algebra(dynamics.above(depth, 1)?);
    let rho = Representation::canonical(alg.clone(), vec![0; alg.num_blocks()])?;
    Ok(HbExtension {
        rho,
        w: numerics::zeros(0, 0),
        tag,
        depth,
        report: ExtensionReport {
            isometry_residual: 0.0,
            ext_residual: 0.0,
            commutation_residual: 0.0,
            passed: true,
        },
    })
}

/// Residuals of the extension relations for `(ρ, W)` over `π`.
pub fn verify_extension(
    dynamics: &Dynamics,
    depth: usize,
    pi: &Representation,
    rho: &Representation,
    w: &CMat,
    tol: &Tolerance,
) -> Result<ExtensionReport> {
    if w.shape() != (rho.dim(), pi.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "W is {:?}, expected {}×{}",
            w.shape(),
            rho.dim(),
            pi.dim()
        )));
    }
    let iso = numerics::diff_norm(&(w.adjoint() * w), &numerics::identity(pi.dim()));
    let ra = dynamics.pullback_alpha(rho, depth, tol)?;
    let proj = w * w.adjoint();
    let eye = numerics::identity(pi.dim());
    let mut ext: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for (i, p, q) in dynamics.check_units(depth) {
        let compressed = w.adjoint() * ra.apply_unit(i, p, q, w);
        ext = ext.max(numerics::diff_norm(&compressed, &pi.apply_unit(i, p, q, &eye)));
        let left = ra.apply_unit(i, q, p, &proj).adjoint();
        let right = ra.apply_unit(i, p, q, &proj);
        comm = comm.max(numerics::diff_norm(&left, &right));
    }
    Ok(ExtensionReport {
        isometry_residual: iso,
        ext_residual: ext,
        commutation_residual: comm,
        passed: iso <= tol.residual_tol && ext <= tol.residual_tol && comm <= tol.residual_tol,
    })
}

/// One extension step for the representation `pi` of `A_depth`.
pub fn hb_extend_rep(
    dynamics: &Dynamics,
    depth: usize,
    pi: &Representation,
    strategy: &Strategy,
    tol: &Tolerance,
    rng: Option<&mut dyn RngCore>,
) -> Result<HbExtension> {
    let tag = strategy.tag();
    if pi.dim() == 0 {
        return empty_extension(dynamics, depth, tag);
    }
    let (rho, w) = match strategy {
        Strategy::Adapted(spec) => adapted_step(dynamics, depth, pi, spec, tol, rng)?,
        Strategy::Gns(spec) => gns_step(dynamics, depth, pi, spec, tol)?,
    };
    let report = verify_extension(dynamics, depth, pi, &rho, &w, tol)?;
    if !report.passed {
        return Err(Error::StrategyInvalid(format!(
            "extension relations fail: isometry {:.3e}, compression {:.3e}, commutation {:.3e}",
            report.isometry_residual, report.ext_residual, report.commutation_residual
        )));
    }
    Ok(HbExtension {
        rho,
        w,
        tag,
        depth,
        report,
    })
}

pub fn hb_extend(
    pair: &CovariantPair,
    strategy: &Strategy,
    tol: &Tolerance,
    rng: Option<&mut dyn RngCore>,
) -> Result<HbExtension> {
    hb_extend_rep(&pair.dynamics, pair.depth, &pair.pi, strategy, tol, rng)
}

fn adapted_step(
    dynamics: &Dynamics,
    depth: usize,
    pi: &Representation,
    spec: &TransferSpec,
    tol: &Tolerance,
    rng: Option<&mut dyn RngCore>,
) -> Result<(Representation, CMat)> {
    let tau = dynamics.transfer(depth, spec, tol)?;
    let alpha = dynamics.alpha(depth)?;
    let check = verify_transfer(tau.as_ref(), alpha.as_ref(), tol)?;
    if !check.passed {
        return Err(Error::StrategyInvalid(format!(
            "not a transfer operator: left inverse {:.3e}, unit {:.3e}, Choi minimum {:?}",
            check.left_inverse_residual, check.unit_residual, check.cp.min_choi_eig
        )));
    }
    let phi = RepComposed::new(tau, pi.clone())?;
    let st = stinespring_minimal(&phi, tol, rng)?;
    Ok((st.rho, st.w))
}

fn gns_step(
    dynamics: &Dynamics,
    depth: usize,
    pi: &Representation,
    spec: &ExpectationSpec,
    tol: &Tolerance,
) -> Result<(Representation, CMat)> {
    let upper = dynamics.above(depth, 1)?;
    let e = dynamics.expectation(depth, spec, tol)?;
    let cp = verify_completely_positive(e.as_ref(), tol)?;
    if !cp.passed {
        return Err(Error::StrategyInvalid(format!("expectation is not CP: {:?}", cp.min_choi_eig)));
    }
    let inv = dynamics.range_inverse(depth)?;
    let alpha = dynamics.alpha(depth)?;
    // α⁻¹ ∘ E must undo α, otherwise E does not project onto the range
    let tau: SharedMap = Arc::new(Composed::new(e, inv)?);
    let check = verify_transfer(tau.as_ref(), alpha.as_ref(), tol)?;
    if check.left_inverse_residual > tol.residual_tol || check.unit_residual > tol.residual_tol {
        return Err(Error::StrategyInvalid(format!(
            "not an expectation onto the range of α (left inverse {:.3e})",
            check.left_inverse_residual
        )));
    }
    let src = dynamics.algebra(depth);
    let big = dynamics.algebra(upper);
    let summands = cyclic_decomposition(pi, tol)?;
    let mut reps = Vec::with_capacity(summands.len());
    let mut ws = Vec::with_capacity(summands.len());
    for s in &summands {
        let xi = CMat::from_column_slice(pi.dim(), 1, s.cyclic.as_slice());
        let norm = xi.norm();
        if norm < tol.rank_eps {
            return Err(Error::NullCyclicVector { norm });
        }
        let omega = State::from_functional(
            big.clone(),
            |b| {
                let v = pi.apply(&tau.apply(b)) * &xi;
                (xi.adjoint() * v)[(0, 0)]
            },
            tol,
        )?;
        let g = gns(&big, &omega, tol)?;
        let xi_k = CMat::from_column_slice(g.dim, 1, g.cyclic.as_slice());
        // W: π(a)ξ ↦ ρ(α(a))ξ_K on the summand, by least squares
        let n = src.dim();
        let mut x = numerics::zeros(s.basis.ncols(), n);
        let mut y = numerics::zeros(g.dim, n);
        for j in 0..n {
            let (i, p, q) = src.unit_of(j);
            let v = pi.apply_unit(i, p, q, &xi);
            x.set_column(j, &(s.basis.adjoint() * v).column(0));
            let img = alpha.apply(&src.matrix_unit(i, p, q));
            y.set_column(j, &(g.rep.apply(&img) * &xi_k).column(0));
        }
        let (inv_gram, rank) = hermitian_pinv(&(&x * x.adjoint()), tol);
        if rank < s.basis.ncols() {
            return Err(Error::NullCyclicVector { norm });
        }
        let local = &y * x.adjoint() * inv_gram;
        ws.push(local * s.basis.adjoint());
        reps.push(g.rep);
    }
    let rho = Representation::direct_sum(&reps)?;
    let total: usize = ws.iter().map(|w| w.nrows()).sum();
    let mut w = numerics::zeros(total, pi.dim());
    let mut row = 0;
    for part in &ws {
        w.view_mut((row, 0), part.shape()).copy_from(part);
        row += part.nrows();
    }
    // rows of W are in the concatenated summand coordinates, the ambient space of the sum
    Ok((rho, w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoStepReport {
    /// `‖MM* − (I_H ⊕ 0)‖`
    pub partial_isometry_residual: f64,
    /// `‖MM*M − M‖`
    pub mmm_residual: f64,
    /// covariance of `M` for `diag(π, π̂)`
    pub covariance_residual: f64,
    /// `ρ(A)`-invariance leakage of `𝒟*`
    pub invariance_leakage: f64,
    pub passed: bool,
}

/// `𝒟* = span ρ(A) W Δ* H`, `D* = Δ* W*|𝒟*`, `π̂ = ρ|𝒟*` and
/// `M = [[T, D*], [0, 0]]` on `H ⊕ 𝒟*`.
#[derive(Clone, Debug)]
pub struct TwoStepBlock {
    /// Orthonormal basis of `𝒟*` in `K`.
    pub basis: CMat,
    /// `D*: 𝒟* → H`.
    pub d_star: CMat,
    /// Representation of the algebra one depth above the pair, on `𝒟*`.
    pub pi_hat: Representation,
    /// `M` on `H ⊕ 𝒟*`.
    pub block: CMat,
    pub delta_star: CMat,
    pub report: TwoStepReport,
}

pub fn two_step(
    pair: &CovariantPair,
    ext: &HbExtension,
    tol: &Tolerance,
    rng: Option<&mut dyn RngCore>,
) -> Result<TwoStepBlock> {
    let defects = defect_operators(pair, tol)?;
    let n = pair.dim();
    let (basis, pi_hat) = if ext.rho.dim() == 0 {
        (numerics::zeros(0, 0), ext.rho.clone())
    } else {
        let seed_vectors = &ext.w * &defects.delta_star;
        ext.rho.cyclic_span(&seed_vectors, tol, rng)?
    };
    let leak = if basis.ncols() == 0 { 0.0 } else { ext.rho.invariance_leakage(&basis) };
    if leak > tol.residual_tol {
        return Err(Error::InvarianceViolation { leakage: leak });
    }
    let d_star = if basis.ncols() == 0 {
        numerics::zeros(n, 0)
    } else {
        &defects.delta_star * ext.w.adjoint() * &basis
    };
    let m = basis.ncols();
    let mut block = numerics::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&pair.t);
    block.view_mut((0, n), (n, m)).copy_from(&d_star);
    let mut target = numerics::zeros(n + m, n + m);
    target.view_mut((0, 0), (n, n)).copy_from(&numerics::identity(n));
    let mm = &block * block.adjoint();
    let d = &pair.dynamics;
    let upper = d.above(pair.depth, 1)?;
    let hat_down = d.pullback_embed(&pi_hat, pair.depth, upper)?;
    let sigma = Representation::direct_sum(&[pair.pi.clone(), hat_down])?;
    let cov = intertwining_residual(d, pair.depth, &sigma, &sigma, &block, tol)?;
    let pi_res = numerics::diff_norm(&mm, &target);
    let mmm = numerics::diff_norm(&(&mm * &block), &block);
    let report = TwoStepReport {
        partial_isometry_residual: pi_res,
        mmm_residual: mmm,
        covariance_residual: cov,
        invariance_leakage: leak,
        passed: pi_res <= tol.residual_tol && mmm <= tol.residual_tol && cov <= tol.residual_tol,
    };
    Ok(TwoStepBlock {
        basis,
        d_star,
        pi_hat,
        block,
        delta_star: defects.delta_star,
        report,
    })
}
