//! Truncated coisometric extension `(ρ_N, V_N)` of a covariant pair, its
//! verification, and the decomposition of the defect space of `V_N`.
//!
//! The chain lives on `H ⊕ 𝒟* ⊕ 𝒟_{1*} ⊕ … ⊕ 𝒟_{(N−1)*}` (block indices
//! `0, −1, …, −N`). The last row of `V_N` is zero, so `V_N V_N*` is the
//! projection onto the first `N` blocks.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::Representation;
use crate::blocks::BlockIndex;
use crate::covariant::{
    defect_operators, defect_root, hb_extend_rep, intertwining_residual, two_step, CovariantPair, ExtensionReport, HbExtension,
    Strategy, StrategyTag, TwoStepReport,
};
use crate::dynamics::generator_units;
use crate::error::{Error, Result};
use crate::numerics::{self, orthonormal_span, orthonormal_span_scaled, spectral_norm, CMat, Tolerance};

#[derive(Clone, Debug)]
pub struct ChainOptions {
    /// Number `N ≥ 1` of extension steps; the chain has `N + 1` blocks.
    pub levels: usize,
    pub strategy: Strategy,
    /// Optional strategy per level (length `N`), overriding `strategy`.
    pub per_level: Option<Vec<Strategy>>,
    /// Permit levels with different strategy kinds.
    pub allow_mixed: bool,
    /// Seed for the Haar rotations of the multiplicity spaces; `None` keeps
    /// the canonical bases.
    pub seed: Option<u64>,
}

impl ChainOptions {
    pub fn new(levels: usize, strategy: Strategy) -> Self {
        ChainOptions {
            levels,
            strategy,
            per_level: None,
            allow_mixed: false,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn strategies(&self) -> Result<Vec<Strategy>> {
        let list = match &self.per_level {
            Some(v) => {
                if v.len() != self.levels {
                    return Err(Error::StrategyInvalid(format!(
                        "{} per-level strategies for {} levels",
                        v.len(),
                        self.levels
                    )));
                }
                v.clone()
            }
            None => vec![self.strategy.clone(); self.levels],
        };
        if !self.allow_mixed {
            if let Some(first) = list.first() {
                if list.iter().any(|s| s.tag() != first.tag()) {
                    return Err(Error::StrategyInvalid(
                        "mixed strategies across levels need allow_mixed".into(),
                    ));
                }
            }
        }
        Ok(list)
    }
}

/// One rung: the extension `(π_k, W_k)` of the previous defect representation,
/// `𝒟_{k*} = span π_k(A) W_k 𝒟_{(k−1)*}` and `D_{k*}` back into the previous space.
#[derive(Clone, Debug)]
pub struct ChainLevel {
    pub ext: HbExtension,
    /// Orthonormal basis of `𝒟_{k*}` inside `K_k`.
    pub basis: CMat,
    /// `π̂_k`, canonical in `basis` coordinates, one depth above the extended representation.
    pub pi_hat: Representation,
    /// `D_{k*}` from `𝒟_{k*}` into the previous block (`D* = Δ*W*|𝒟*` at level 0).
    pub d: CMat,
}

#[derive(Clone, Debug)]
pub struct ExtensionChain {
    pub pair: CovariantPair,
    pub levels: Vec<ChainLevel>,
    pub delta_star: CMat,
    /// Block representations at the depth of the pair, in block order.
    pub block_reps: Vec<Representation>,
    pub rho: Representation,
    pub v: CMat,
    pub index: BlockIndex,
    pub tags: Vec<StrategyTag>,
    pub two_step: TwoStepReport,
}

impl ExtensionChain {
    pub fn num_blocks(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// The assembled pair `(ρ_N, V_N)`.
    pub fn extended_pair(&self, tol: &Tolerance) -> Result<CovariantPair> {
        CovariantPair::new(
            self.pair.dynamics().clone(),
            self.pair.depth(),
            self.rho.clone(),
            self.v.clone(),
            tol,
        )
    }
}

pub fn chain_label(block: usize) -> String {
    match block {
        0 => "H".to_string(),
        1 => "D*".to_string(),
        k => format!("D{}*", k - 1),
    }
}

fn rng_from(seed: Option<u64>) -> Option<ChaCha8Rng> {
    seed.map(ChaCha8Rng::seed_from_u64)
}

pub fn coisometric_extend(pair: &CovariantPair, opts: &ChainOptions, tol: &Tolerance) -> Result<ExtensionChain> {
    if opts.levels == 0 {
        return Err(Error::InvalidParameter(
            "at least one extension level is needed (the chain has levels + 1 blocks)".into(),
        ));
    }
    let strategies = opts.strategies()?;
    let d = pair.dynamics();
    let p = pair.depth();
    d.above(p, opts.levels)?;
    let mut rng = rng_from(opts.seed);
    let defects = defect_operators(pair, tol)?;

    let ext0 = hb_extend_rep(d, p, pair.pi(), &strategies[0], tol, rng.as_mut().map(|r| r as &mut dyn RngCore))?;
    let blk = two_step(pair, &ext0, tol, rng.as_mut().map(|r| r as &mut dyn RngCore))?;
    let mut levels = vec![ChainLevel {
        ext: ext0,
        basis: blk.basis.clone(),
        pi_hat: blk.pi_hat.clone(),
        d: blk.d_star.clone(),
    }];
    for (k, strategy) in strategies.iter().enumerate().skip(1) {
        let prev = &levels[k - 1];
        let depth = d.above(p, k)?;
        let ext = hb_extend_rep(d, depth, &prev.pi_hat, strategy, tol, rng.as_mut().map(|r| r as &mut dyn RngCore))?;
        let (basis, pi_hat) = if ext.rho.dim() == 0 {
            (numerics::zeros(0, 0), ext.rho.clone())
        } else {
            ext.rho
                .cyclic_span(&ext.w, tol, rng.as_mut().map(|r| r as &mut dyn RngCore))?
        };
        let dk = if basis.ncols() == 0 {
            numerics::zeros(prev.basis.ncols(), 0)
        } else {
            ext.w.adjoint() * &basis
        };
        levels.push(ChainLevel {
            ext,
            basis,
            pi_hat,
            d: dk,
        });
    }

    let mut block_reps = vec![pair.pi().clone()];
    for (k, lvl) in levels.iter().enumerate() {
        let from = d.above(p, k + 1)?;
        block_reps.push(d.pullback_embed(&lvl.pi_hat, p, from)?);
    }
    let rho = Representation::direct_sum(&block_reps)?;

    let mut index = BlockIndex::new();
    index.push(0, chain_label(0), pair.dim());
    for (k, lvl) in levels.iter().enumerate() {
        index.push(-(k as i64) - 1, chain_label(k + 1), lvl.basis.ncols());
    }
    let mut v = numerics::zeros(index.dim(), index.dim());
    index.set_block(&mut v, 0, 0, pair.t());
    for (k, lvl) in levels.iter().enumerate() {
        index.set_block(&mut v, -(k as i64), -(k as i64) - 1, &lvl.d);
    }
    Ok(ExtensionChain {
        pair: pair.clone(),
        levels,
        delta_star: defects.delta_star,
        block_reps,
        rho,
        v,
        index,
        tags: strategies.iter().map(|s| s.tag()).collect(),
        two_step: blk.report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub strategy: StrategyTag,
    pub extension: ExtensionReport,
    /// `dim 𝒟_{k*}`
    pub defect_dim: usize,
    /// `‖(I − P_{𝒟_{k*}}) W_k‖`: the range of `W_k` lies in `𝒟_{k*}`.
    pub range_containment: f64,
    /// `max ‖(I − W_kW_k*) π_k(g) W_k‖` over generating units `g`: how far
    /// `π_k(A)` moves `W_k𝒟_{(k−1)*}` out of itself (no bound is claimed).
    pub containment_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    /// `max ‖P_H ρ_N(a)|H − π(a)‖`
    pub restriction_rho: f64,
    /// `max ‖(I − P_H) ρ_N(a)|H‖`
    pub rho_leakage: f64,
    /// `‖P_H V_N|H − T‖`
    pub restriction_v: f64,
    /// `‖(I − P_H) V_N|H‖`
    pub v_leakage: f64,
    pub covariance_residual: f64,
    /// `‖V_N V_N* − P_{≤N−1}‖`
    pub coisometry_residual: f64,
    pub two_step: TwoStepReport,
    pub levels: Vec<LevelDiagnostics>,
    pub block_dims: Vec<usize>,
    pub passed: bool,
}

pub fn verify_coisometric_extension(chain: &ExtensionChain, tol: &Tolerance) -> Result<ChainReport> {
    let pair = &chain.pair;
    let d = pair.dynamics();
    let p = pair.depth();
    let idx = &chain.index;
    let n = pair.dim();
    let inc = idx.inclusion(0);
    let eye = numerics::identity(n);
    let mut restr: f64 = 0.0;
    let mut leak: f64 = 0.0;
    for (i, a, b) in d.check_units(p) {
        let img = chain.rho.apply_unit(i, a, b, &inc);
        let top = img.rows(0, n).into_owned();
        restr = restr.max(numerics::diff_norm(&top, &pair.pi().apply_unit(i, a, b, &eye)));
        let rest = img.rows(n, img.nrows() - n).into_owned();
        leak = leak.max(spectral_norm(&rest));
    }
    let vh = &chain.v * &inc;
    let restriction_v = numerics::diff_norm(&vh.rows(0, n).into_owned(), pair.t());
    let v_leakage = spectral_norm(&vh.rows(n, vh.nrows() - n).into_owned());
    let covariance = intertwining_residual(d, p, &chain.rho, &chain.rho, &chain.v, tol)?;
    let last = -(chain.levels.len() as i64);
    let proj = idx.projector(|k| k > last);
    let cois = numerics::diff_norm(&(&chain.v * chain.v.adjoint()), &proj);

    let mut levels = Vec::with_capacity(chain.levels.len());
    for (k, lvl) in chain.levels.iter().enumerate() {
        let w = &lvl.ext.w;
        let (range_containment, containment_defect) = if lvl.basis.ncols() == 0 || w.ncols() == 0 {
            (0.0, 0.0)
        } else {
            let seed = if k == 0 { w * &chain.delta_star } else { w.clone() };
            let pb = &lvl.basis * lvl.basis.adjoint();
            let rc = spectral_norm(&(&seed - &pb * &seed));
            let rho_k = &lvl.ext.rho;
            let pw = w * w.adjoint();
            let mut worst: f64 = 0.0;
            for (i, a, b) in generator_units(&d.algebra(d.above(p, k + 1)?)) {
                let img = rho_k.apply_unit(i, a, b, w);
                worst = worst.max(spectral_norm(&(&img - &pw * &img)));
            }
            (rc, worst)
        };
        levels.push(LevelDiagnostics {
            level: k,
            strategy: lvl.ext.tag,
            extension: lvl.ext.report.clone(),
            defect_dim: lvl.basis.ncols(),
            range_containment,
            containment_defect,
        });
    }
    let passed = [restr, leak, restriction_v, v_leakage, covariance, cois]
        .iter()
        .all(|&r| r <= tol.residual_tol)
        && chain.two_step.passed
        && levels
            .iter()
            .all(|l| l.extension.passed && l.range_containment <= tol.residual_tol);
    Ok(ChainReport {
        restriction_rho: restr,
        rho_leakage: leak,
        restriction_v,
        v_leakage,
        covariance_residual: covariance,
        coisometry_residual: cois,
        two_step: chain.two_step.clone(),
        levels,
        block_dims: idx.entries().iter().map(|e| e.dim).collect(),
        passed,
    })
}

/// `𝒟_V = ΔH ⊕ q₀𝒟* ⊕ q₁𝒟_{1*} ⊕ …` with `ρ₁` and the coisometry
/// `J: K_V → 𝒟_V`, `J*J = I − V*V`, whose restriction to `𝒟*` is `X`.
#[derive(Clone, Debug)]
pub struct DefectDecomposition {
    /// `(I − T*T)^{1/2}`
    pub delta: CMat,
    /// Per chain block, an orthonormal basis of its summand of `𝒟_V`
    /// (`ΔH` in `H`, then `q_k` ranges).
    pub summands: Vec<CMat>,
    /// `q_k` as projections on `𝒟_{k*}` coordinates.
    pub projections: Vec<CMat>,
    /// `𝒟_V` as a subspace of `K_V` (block-diagonal in the summands).
    pub embedding: CMat,
    /// Block table of `𝒟_V` coordinates, one entry per chain block.
    pub index: BlockIndex,
    /// `J: K_V → 𝒟_V`
    pub j: CMat,
    /// `X = J|𝒟*`
    pub x: CMat,
    /// `ρ₁`, one depth below the pair.
    pub rho1: Representation,
    pub report: DecompositionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub dim_direct: usize,
    /// rank of `I − V*V`
    pub dim_defect: usize,
    /// `‖J*J − (I − V*V)‖`
    pub defect_identity: f64,
    /// `‖JJ* − I‖`
    pub coisometry: f64,
    /// `‖T*Δ* − ΔT*‖`
    pub defect_swap: f64,
    /// `max ‖ρ_N(α(a)) E − E ρ₁(a)‖` for the inclusion `E` of `𝒟_V`
    pub restriction_residual: f64,
    /// `max ‖J ρ_N(α(a)) − ρ₁(a) J‖`
    pub j_intertwining: f64,
    pub passed: bool,
}

pub fn defect_decomposition(chain: &ExtensionChain, tol: &Tolerance) -> Result<DefectDecomposition> {
    let pair = &chain.pair;
    let d = pair.dynamics();
    let p = pair.depth();
    let lower = d.below(p, 1)?;
    let t = pair.t();
    let defects = defect_operators(pair, tol)?;
    let delta = defects.delta.clone();
    let delta_star = &chain.delta_star;
    let idx = &chain.index;
    let nblocks = chain.num_blocks();

    let alpha_reps: Vec<Representation> = chain
        .block_reps
        .iter()
        .map(|r| d.pullback_alpha(r, lower, tol))
        .collect::<Result<_>>()?;

    // ΔH and the q_k ranges, each spanned inside its invariant block
    let mut summands: Vec<CMat> = Vec::with_capacity(nblocks);
    let mut sub_reps: Vec<Representation> = Vec::with_capacity(nblocks);
    let mut projections: Vec<CMat> = Vec::with_capacity(nblocks - 1);
    let span_in = |rep: &Representation, vectors: &CMat| -> Result<(CMat, Representation)> {
        if rep.dim() == 0 {
            return Ok((numerics::zeros(0, 0), rep.clone()));
        }
        rep.cyclic_span(vectors, tol, None)
    };
    let (b_delta, r_delta) = span_in(&alpha_reps[0], &delta)?;
    summands.push(b_delta);
    sub_reps.push(r_delta);

    let lvl0 = &chain.levels[0];
    let m0 = lvl0.basis.ncols();
    // span(WΔ*H) inside 𝒟*, in 𝒟* coordinates
    let (b_s, _) = if m0 == 0 {
        (numerics::zeros(0, 0), 0)
    } else {
        let inside = lvl0.basis.adjoint() * &lvl0.ext.w * delta_star;
        let outside = &lvl0.ext.w * delta_star - &lvl0.basis * &inside;
        if spectral_norm(&outside) > tol.residual_tol {
            return Err(Error::DecompositionMismatch(format!(
                "WΔ*H leaves 𝒟* by {:.3e}",
                spectral_norm(&outside)
            )));
        }
        orthonormal_span(&inside, tol)?
    };
    let mut ranges: Vec<CMat> = vec![b_s.clone()];
    for k in 1..chain.levels.len() {
        let lvl = &chain.levels[k];
        if lvl.basis.ncols() == 0 {
            ranges.push(numerics::zeros(0, 0));
            continue;
        }
        // R_k = basis_k* W_k is an isometry from 𝒟_{(k−1)*} into 𝒟_{k*}
        let r = lvl.basis.adjoint() * &lvl.ext.w;
        let off = &lvl.ext.w - &lvl.basis * &r;
        if spectral_norm(&off) > tol.residual_tol {
            return Err(Error::DecompositionMismatch(format!(
                "W_{k} leaves 𝒟_{k}* by {:.3e}",
                spectral_norm(&off)
            )));
        }
        ranges.push(r);
    }
    for (k, range) in ranges.iter().enumerate() {
        let dim = chain.levels[k].basis.ncols();
        let q = if dim == 0 {
            numerics::zeros(0, 0)
        } else {
            numerics::identity(dim) - range * range.adjoint()
        };
        let (qb, qr) = if dim == 0 {
            (numerics::zeros(0, 0), alpha_reps[k + 1].clone())
        } else {
            let (basis, _) = orthonormal_span_scaled(&q, tol, 1.0)?;
            if basis.ncols() == 0 {
                (numerics::zeros(dim, 0), span_in(&alpha_reps[k + 1], &numerics::zeros(dim, 0))?.1)
            } else {
                span_in(&alpha_reps[k + 1], &basis)?
            }
        };
        projections.push(q);
        summands.push(qb);
        sub_reps.push(qr);
    }

    // 𝒟_V coordinates: one block per chain block
    let mut dv_index = BlockIndex::new();
    for (k, s) in summands.iter().enumerate() {
        dv_index.push(-(k as i64), format!("q{}", chain_label(k)), s.ncols());
    }
    let dim_v = dv_index.dim();
    let mut embedding = numerics::zeros(idx.dim(), dim_v);
    for (k, s) in summands.iter().enumerate() {
        if s.ncols() > 0 {
            let (r, c) = (idx.range(-(k as i64)), dv_index.range(-(k as i64)));
            embedding.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(s);
        }
    }
    let mut j = numerics::zeros(dim_v, idx.dim());
    let b_delta = &summands[0];
    if b_delta.ncols() > 0 {
        dv_index.set_block(&mut j, 0, 0, &(b_delta.adjoint() * &delta));
        if m0 > 0 && b_s.ncols() > 0 {
            let ps = &b_s * b_s.adjoint();
            let x_top = -(b_delta.adjoint() * t.adjoint() * lvl0.ext.w.adjoint() * &lvl0.basis * ps);
            let r = dv_index.range(0);
            let c = idx.range(-1);
            j.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(&x_top);
        }
    }
    for k in 1..nblocks {
        let s = &summands[k];
        if s.ncols() > 0 {
            let r = dv_index.range(-(k as i64));
            let c = idx.range(-(k as i64));
            j.view_mut((r.start, c.start), (r.len(), c.len())).copy_from(&s.adjoint());
        }
    }
    let x = if m0 == 0 {
        numerics::zeros(dim_v, 0)
    } else {
        let c = idx.range(-1);
        j.columns(c.start, c.len()).into_owned()
    };

    let rho1 = if sub_reps.iter().all(|r| r.dim() == 0) {
        sub_reps[0].clone()
    } else {
        let nonempty: Vec<Representation> = sub_reps.iter().filter(|r| r.dim() > 0).cloned().collect();
        Representation::direct_sum(&nonempty)?
    };
    // direct_sum orders ambient coordinates by summand, matching dv_index

    let vv = chain.v.adjoint() * &chain.v;
    let defect_v = numerics::identity(idx.dim()) - &vv;
    let dim_defect = numerics::absolute_rank(&defect_root(&vv, tol)?, tol);
    let defect_identity = numerics::diff_norm(&(j.adjoint() * &j), &defect_v);
    let coisometry = if dim_v == 0 { 0.0 } else { numerics::diff_norm(&(&j * j.adjoint()), &numerics::identity(dim_v)) };
    let defect_swap = numerics::diff_norm(&(t.adjoint() * delta_star), &(&delta * t.adjoint()));

    let mut restriction: f64 = 0.0;
    let mut j_int: f64 = 0.0;
    if dim_v > 0 {
        let rho_alpha = d.pullback_alpha(&chain.rho, lower, tol)?;
        let js = j.adjoint();
        for (i, a, b) in d.check_units(lower) {
            let left = rho_alpha.apply_unit(i, a, b, &embedding);
            let right = &embedding * rho1.apply_unit(i, a, b, &numerics::identity(dim_v));
            restriction = restriction.max(numerics::diff_norm(&left, &right));
            // J ρ(α(E_ab)) = (ρ(α(E_ba)) J*)*
            let jl = rho_alpha.apply_unit(i, b, a, &js).adjoint();
            let jr = rho1.apply_unit(i, a, b, &j);
            j_int = j_int.max(numerics::diff_norm(&jl, &jr));
        }
    }
    if dim_v != dim_defect {
        return Err(Error::DecompositionMismatch(format!(
            "direct sum has dimension {dim_v}, defect of V has rank {dim_defect}"
        )));
    }
    let passed = [defect_identity, coisometry, defect_swap, restriction, j_int]
        .iter()
        .all(|&r| r <= tol.residual_tol);
    Ok(DefectDecomposition {
        delta,
        summands,
        projections,
        embedding,
        index: dv_index,
        j,
        x,
        rho1,
        report: DecompositionReport {
            dim_direct: dim_v,
            dim_defect,
            defect_identity,
            coisometry,
            defect_swap,
            restriction_residual: restriction,
            j_intertwining: j_int,
            passed,
        },
    })
}
