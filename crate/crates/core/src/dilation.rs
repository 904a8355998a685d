//! Minimal isometric dilations `(η, W)` built from the lower corner of the
//! Schäffer matrix, unitary dilations obtained by dilating a coisometric
//! extension, and the explicit two-sided block form of the latter.
//!
//! Everything is truncated: `K = H ⊕ 𝒟^{⊕M}` with the last copy of `𝒟` mapped
//! to zero. On the shift tower `η` represents `A_{p−M}` when the pair lives at
//! depth `p`, since the `j`-th copy carries `π ∘ α^j`.

use serde::Serialize;

use crate::algebra::Representation;
use crate::blocks::BlockIndex;
use crate::covariant::{defect_operators, intertwining_residual, CovariantPair};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::extension::{
    chain_label, coisometric_extend, defect_decomposition, verify_coisometric_extension, ChainOptions, ChainReport,
    DecompositionReport, DefectDecomposition, ExtensionChain,
};
use crate::numerics::{self, spectral_norm, CMat, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DilationKind {
    Isometric,
    UnitaryComposed,
    UnitaryExplicit,
}

#[derive(Clone, Debug)]
pub struct DilationRecord {
    pub kind: DilationKind,
    pub dynamics: Dynamics,
    /// `η` (or `σ`) represents the algebra at this depth.
    pub depth: usize,
    /// Depth of the dilated pair.
    pub source_depth: usize,
    pub copies: usize,
    /// Signed blocks: `0` for `H`, negative for the chain side, `1..=M` for the copies.
    pub index: BlockIndex,
    pub rep: Representation,
    /// `W` or `U`.
    pub op: CMat,
    /// Inclusion of the dilated space (`H`, or `K_V` in chain coordinates).
    pub source_embedding: CMat,
    /// Inclusion of `H`.
    pub h_embedding: CMat,
}

impl DilationRecord {
    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    /// Projection onto everything but the blocks named in `drop`.
    pub fn window(&self, drop: &[i64]) -> CMat {
        self.index.projector(|i| !drop.contains(&i))
    }

    fn last_copy(&self) -> i64 {
        self.copies as i64
    }

    fn last_chain_block(&self) -> Option<i64> {
        self.index.entries().iter().map(|e| e.index).filter(|&i| i < 0).min()
    }
}

fn copy_label(j: usize) -> String {
    format!("D+{j}")
}

fn check_copies(d: &Dynamics, depth: usize, copies: usize) -> Result<usize> {
    if copies == 0 {
        return Err(Error::InvalidParameter("at least one defect copy is needed".into()));
    }
    // covariance of the dilation is checked one depth further down
    d.below(depth, copies + 1)
        .map_err(|_| Error::DepthExceeded(format!("{copies} copies need depth at least {} (pair at depth {depth})", copies + 1)))?;
    d.below(depth, copies)
}

/// `rep ∘ α^{j−1} ∘ ι` on `A_target` for `j = 1..=copies`, where `rep` is a
/// representation of `A_{depth−1}`.
fn copy_reps(
    d: &Dynamics,
    rep: &Representation,
    depth: usize,
    target: usize,
    copies: usize,
    tol: &Tolerance,
) -> Result<Vec<Representation>> {
    let mut out = Vec::with_capacity(copies);
    for j in 1..=copies {
        let top = d.below(depth, j)?;
        let r = d.pullback_alpha_power(rep, top, j - 1, tol)?;
        out.push(d.pullback_embed(&r, target, top)?);
    }
    Ok(out)
}

/// The Schäffer corner `W = [[T, 0], [Δ, 0], [0, I, 0], …]` on
/// `H ⊕ 𝒟 ⊕ … ⊕ 𝒟` (`M` copies) with `η = diag(π, π∘α|𝒟, …, π∘α^M|𝒟)`.
pub fn schaffer_dilate(pair: &CovariantPair, copies: usize, tol: &Tolerance) -> Result<DilationRecord> {
    let d = pair.dynamics();
    let p = pair.depth();
    let q = check_copies(d, p, copies)?;
    let lower = d.below(p, 1)?;
    let defects = defect_operators(pair, tol)?;
    let delta = &defects.delta;
    let n = pair.dim();

    // 𝒟 = range Δ, which reduces π∘α
    let pa = d.pullback_alpha(pair.pi(), lower, tol)?;
    let (basis, rep_d) = if numerics::absolute_rank(delta, tol) == 0 {
        let nb = pa.algebra().num_blocks();
        (numerics::zeros(n, 0), Representation::canonical(pa.algebra().clone(), vec![0; nb])?)
    } else {
        pa.cyclic_span(delta, tol, None)?
    };
    let r = basis.ncols();

    let mut index = BlockIndex::new();
    index.push(0, "H", n);
    for j in 1..=copies {
        index.push(j as i64, copy_label(j), r);
    }
    let mut w = numerics::zeros(index.dim(), index.dim());
    index.set_block(&mut w, 0, 0, pair.t());
    index.set_block(&mut w, 1, 0, &(basis.adjoint() * delta));
    for j in 1..copies {
        index.set_block(&mut w, j as i64 + 1, j as i64, &numerics::identity(r));
    }

    let mut parts = vec![d.pullback_embed(pair.pi(), q, p)?];
    parts.extend(copy_reps(d, &rep_d, p, q, copies, tol)?);
    let rep = Representation::direct_sum(&parts)?;
    let h = index.inclusion(0);
    Ok(DilationRecord {
        kind: DilationKind::Isometric,
        dynamics: d.clone(),
        depth: q,
        source_depth: p,
        copies,
        index,
        rep,
        op: w,
        source_embedding: h.clone(),
        h_embedding: h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsometricReport {
    /// `max ‖W η(α(a)) − η(a) W‖`
    pub covariance_residual: f64,
    /// `max ‖η(a)E − E π(a)‖` for the inclusion `E` of the dilated space
    pub restriction_residual: f64,
    /// `‖W*W − P_{≤M−1}‖`
    pub isometry_residual: f64,
    /// `‖P Wⁿ|H − Tⁿ‖` for `n = 0..=M`
    pub dilation: Vec<f64>,
    /// `rank span{WⁿH : n ≤ M}` against `dim K`
    pub span_rank: usize,
    pub dim: usize,
    /// `‖(I − WW*)P_{≤M−1}‖`, reported when `T` is a coisometry
    pub coisometry_inheritance: Option<f64>,
    pub passed: bool,
}

/// `[E, WE, …, W^n E]`
fn krylov(op: &CMat, e: &CMat, n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(e.clone());
    for j in 0..n {
        let next = op * &out[j];
        out.push(next);
    }
    out
}

fn hstack(parts: &[CMat]) -> CMat {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = numerics::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(p);
        c += p.ncols();
    }
    out
}

fn restriction_residual(rec: &DilationRecord, pi: &Representation) -> Result<f64> {
    let d = &rec.dynamics;
    let pe = d.pullback_embed(pi, rec.depth, rec.source_depth)?;
    let e = &rec.source_embedding;
    let eye = numerics::identity(pi.dim());
    let mut worst: f64 = 0.0;
    for (i, a, b) in d.check_units(rec.depth) {
        let left = rec.rep.apply_unit(i, a, b, e);
        let right = e * pe.apply_unit(i, a, b, &eye);
        worst = worst.max(numerics::diff_norm(&left, &right));
    }
    Ok(worst)
}

/// Checks covariance, the truncated isometry relation, `Tⁿ = PWⁿ|H`, minimality
/// (`span{WⁿH}` fills `K`), and, for coisometric `T`, coisometry of `W` off the
/// last copy.
pub fn verify_isometric_dilation(rec: &DilationRecord, pair: &CovariantPair, tol: &Tolerance) -> Result<IsometricReport> {
    if rec.source_embedding.shape() != (rec.dim(), pair.dim()) {
        return Err(Error::DimensionMismatch("record does not dilate this pair".into()));
    }
    let d = &rec.dynamics;
    let w = &rec.op;
    let e = &rec.source_embedding;
    let m = rec.copies;
    let covariance = intertwining_residual(d, rec.depth, &rec.rep, &rec.rep, w, tol)?;
    let restriction = restriction_residual(rec, pair.pi())?;
    let keep = rec.index.projector(|i| i < m as i64);
    let isometry = numerics::diff_norm(&(w.adjoint() * w), &keep);

    let powers = krylov(w, e, m);
    let mut tn = numerics::identity(pair.dim());
    let mut dilation = Vec::with_capacity(m + 1);
    for wn in &powers {
        dilation.push(numerics::diff_norm(&(e.adjoint() * wn), &tn));
        tn = pair.t() * tn;
    }
    let span_rank = numerics::numerical_rank(&hstack(&powers), tol);

    let t = pair.t();
    let coisometric = numerics::diff_norm(&(t * t.adjoint()), &numerics::identity(pair.dim())) <= tol.residual_tol;
    let coisometry_inheritance = coisometric.then(|| {
        let gap = numerics::identity(rec.dim()) - w * w.adjoint();
        spectral_norm(&(gap * &keep))
    });
    let passed = [covariance, restriction, isometry]
        .iter()
        .chain(dilation.iter())
        .all(|&r| r <= tol.residual_tol)
        && span_rank == rec.dim()
        && coisometry_inheritance.is_none_or(|r| r <= tol.residual_tol);
    Ok(IsometricReport {
        covariance_residual: covariance,
        restriction_residual: restriction,
        isometry_residual: isometry,
        dilation,
        span_rank,
        dim: rec.dim(),
        coisometry_inheritance,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitaryReport {
    pub covariance_residual: f64,
    /// `max ‖σ(a)E_H − E_H π(a)‖`
    pub restriction_residual: f64,
    /// `‖P_H Uⁿ|H − Tⁿ‖` for `n = 0..=min(N, M)`
    pub dilation: Vec<f64>,
    /// `‖(U*U − I)P_int‖` with the last chain block and the last copy removed
    pub isometry_window: f64,
    /// `‖(UU* − I)P_int‖`
    pub coisometry_window: f64,
    /// `‖U*U − I‖` over the whole truncated space (not gated)
    pub isometry_boundary: f64,
    /// `‖UU* − I‖` over the whole truncated space (not gated)
    pub coisometry_boundary: f64,
    pub passed: bool,
}

pub fn verify_unitary_dilation(rec: &DilationRecord, pair: &CovariantPair, levels: usize, tol: &Tolerance) -> Result<UnitaryReport> {
    let d = &rec.dynamics;
    let u = &rec.op;
    let h = &rec.h_embedding;
    if h.shape() != (rec.dim(), pair.dim()) {
        return Err(Error::DimensionMismatch("record does not contain this H".into()));
    }
    let covariance = intertwining_residual(d, rec.depth, &rec.rep, &rec.rep, u, tol)?;
    let pe = d.pullback_embed(pair.pi(), rec.depth, rec.source_depth)?;
    let eye = numerics::identity(pair.dim());
    let mut restriction: f64 = 0.0;
    for (i, a, b) in d.check_units(rec.depth) {
        let left = rec.rep.apply_unit(i, a, b, h);
        restriction = restriction.max(numerics::diff_norm(&left, &(h * pe.apply_unit(i, a, b, &eye))));
    }
    let window = levels.min(rec.copies);
    let powers = krylov(u, h, window);
    let mut tn = eye.clone();
    let mut dilation = Vec::with_capacity(window + 1);
    for un in &powers {
        dilation.push(numerics::diff_norm(&(h.adjoint() * un), &tn));
        tn = pair.t() * tn;
    }
    let mut drop = vec![rec.last_copy()];
    drop.extend(rec.last_chain_block());
    let p_int = rec.window(&drop);
    let eye_k = numerics::identity(rec.dim());
    let uu = u.adjoint() * u;
    let uus = u * u.adjoint();
    let isometry_window = spectral_norm(&((&uu - &eye_k) * &p_int));
    let coisometry_window = spectral_norm(&((&uus - &eye_k) * &p_int));
    let passed = [covariance, restriction, isometry_window, coisometry_window]
        .iter()
        .chain(dilation.iter())
        .all(|&r| r <= tol.residual_tol);
    Ok(UnitaryReport {
        covariance_residual: covariance,
        restriction_residual: restriction,
        dilation,
        isometry_window,
        coisometry_window,
        isometry_boundary: numerics::diff_norm(&uu, &eye_k),
        coisometry_boundary: numerics::diff_norm(&uus, &eye_k),
        passed,
    })
}

#[derive(Clone, Debug)]
pub struct UnitaryDilation {
    pub chain: ExtensionChain,
    pub chain_report: ChainReport,
    pub record: DilationRecord,
    /// Verification of `(σ, U)` as the minimal isometric dilation of `(ρ_N, V_N)`.
    pub isometric: IsometricReport,
    pub report: UnitaryReport,
}

/// Relabels a Schäffer dilation of `(ρ_N, V_N)` so that `K_V` shows its chain blocks.
fn split_source_block(rec: &mut DilationRecord, chain: &ExtensionChain) {
    let mut index = BlockIndex::new();
    for e in chain.index.entries() {
        index.push(e.index, e.label.clone(), e.dim);
    }
    for e in rec.index.entries().iter().filter(|e| e.index > 0) {
        index.push(e.index, e.label.clone(), e.dim);
    }
    rec.h_embedding = rec.source_embedding.columns(0, chain.pair.dim()).into_owned();
    rec.index = index;
}

/// `(σ, U)`: the minimal isometric dilation of the truncated coisometric
/// extension `(ρ_N, V_N)` of `pair`.
pub fn unitary_dilate(pair: &CovariantPair, opts: &ChainOptions, copies: usize, tol: &Tolerance) -> Result<UnitaryDilation> {
    check_copies(pair.dynamics(), pair.depth(), copies)?;
    let chain = coisometric_extend(pair, opts, tol)?;
    unitary_from_chain(chain, copies, tol)
}

pub fn unitary_from_chain(chain: ExtensionChain, copies: usize, tol: &Tolerance) -> Result<UnitaryDilation> {
    let chain_report = verify_coisometric_extension(&chain, tol)?;
    let extended = chain.extended_pair(tol)?;
    let mut record = schaffer_dilate(&extended, copies, tol)?;
    let isometric = verify_isometric_dilation(&record, &extended, tol)?;
    record.kind = DilationKind::UnitaryComposed;
    split_source_block(&mut record, &chain);
    let report = verify_unitary_dilation(&record, &chain.pair, chain.levels.len(), tol)?;
    Ok(UnitaryDilation {
        chain,
        chain_report,
        record,
        isometric,
        report,
    })
}

#[derive(Clone, Debug)]
pub struct MatricialDilation {
    pub decomposition: DefectDecomposition,
    pub record: DilationRecord,
    pub decomposition_report: DecompositionReport,
    pub report: UnitaryReport,
}

/// The two-sided block matrix on `… ⊕ 𝒟_{1*} ⊕ 𝒟* ⊕ H ⊕ 𝒟_V ⊕ … ⊕ 𝒟_V`:
/// `V_N` on the chain side, the row `[… q₁ X Δ]` into the first copy of `𝒟_V`,
/// then identities, with `σ = diag(…, π̂₁, π̂, π, ρ₁, ρ₁∘α, …)`.
pub fn explicit_matricial_unitary(chain: &ExtensionChain, copies: usize, tol: &Tolerance) -> Result<MatricialDilation> {
    let pair = &chain.pair;
    let d = pair.dynamics();
    let p = pair.depth();
    let q = check_copies(d, p, copies)?;
    let dec = defect_decomposition(chain, tol)?;
    if !dec.report.passed {
        return Err(Error::DecompositionMismatch(format!("{:?}", dec.report)));
    }
    let nblocks = chain.num_blocks();
    let dim_v = dec.j.nrows();

    let mut index = BlockIndex::new();
    for k in (0..nblocks).rev() {
        index.push(-(k as i64), chain_label(k), chain.index.range(-(k as i64)).len());
    }
    for j in 1..=copies {
        index.push(j as i64, copy_label(j), dim_v);
    }
    let mut u = numerics::zeros(index.dim(), index.dim());
    for r in 0..nblocks as i64 {
        for c in 0..nblocks as i64 {
            let blk = chain.index.block(&chain.v, -r, -c);
            if blk.nrows() > 0 && blk.ncols() > 0 {
                index.set_block(&mut u, -r, -c, &blk);
            }
        }
    }
    for c in 0..nblocks as i64 {
        let cols = chain.index.range(-c);
        let blk = dec.j.columns(cols.start, cols.len()).into_owned();
        index.set_block(&mut u, 1, -c, &blk);
    }
    for j in 1..copies {
        index.set_block(&mut u, j as i64 + 1, j as i64, &numerics::identity(dim_v));
    }

    let mut parts = Vec::with_capacity(nblocks + copies);
    for k in (0..nblocks).rev() {
        parts.push(d.pullback_embed(&chain.block_reps[k], q, p)?);
    }
    parts.extend(copy_reps(d, &dec.rho1, p, q, copies, tol)?);
    let rep = Representation::direct_sum(&parts)?;

    let mut source = numerics::zeros(index.dim(), chain.dim());
    for k in 0..nblocks as i64 {
        let (r, c) = (index.range(-k), chain.index.range(-k));
        source.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(&numerics::identity(r.len()));
    }
    let h = source.columns(0, pair.dim()).into_owned();
    let record = DilationRecord {
        kind: DilationKind::UnitaryExplicit,
        dynamics: d.clone(),
        depth: q,
        source_depth: p,
        copies,
        index,
        rep,
        op: u,
        source_embedding: source,
        h_embedding: h,
    };
    let report = verify_unitary_dilation(&record, pair, chain.levels.len(), tol)?;
    Ok(MatricialDilation {
        decomposition_report: dec.report.clone(),
        decomposition: dec,
        record,
        report,
    })
}
