//! Unitary equivalence certificates anchored on a common subspace.
//!
//! Each intertwiner is forced by the spanning relations (`ρ(A)WH = K`, or
//! `span{WⁿK₀} = K`), so it exists exactly when the Gram matrices of the two
//! spanning families agree. A Gram mismatch is reported as a witness.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algebra::Representation;
use crate::covariant::HbExtension;
use crate::dilation::DilationRecord;
use crate::dynamics::check_units;
use crate::error::{Error, Result};
use crate::extension::ExtensionChain;
use crate::numerics::{self, hermitian_pinv, CMat, Tolerance, C64};

/// Bound on `‖u*u − I‖` and `‖uu* − I‖` for an `equivalent` verdict.
pub const UNITARITY_BOUND: f64 = 1e-7;
/// Bound on every intertwining relation for an `equivalent` verdict.
pub const INTERTWINING_BOUND: f64 = 1e-6;
/// A witness must exceed `residual_tol` by this factor.
pub const WITNESS_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equivalent,
    Inequivalent,
    Inconclusive,
}

/// A Gram entry on which the two sides disagree: entry `vectors` of
/// `S* ρ(unit) S` for the seed `S`, or of `E* W^{n*} W^m E` for `powers = (n, m)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// Chain level, when the comparison is level by level.
    pub level: Option<usize>,
    /// Matrix unit `(block, p, q)` of the compared algebra.
    pub unit: Option<(usize, usize, usize)>,
    /// Powers `(n, m)` in `⟨Wⁿk, Wᵐk'⟩`.
    pub powers: Option<(usize, usize)>,
    /// Entry `(row, col)` in seed coordinates.
    pub vectors: (usize, usize),
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub mismatch: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceCertificate {
    pub verdict: Verdict,
    #[serde(skip)]
    pub intertwiner: Option<CMat>,
    /// Named residuals of the relations the intertwiner must satisfy.
    pub residuals: BTreeMap<String, f64>,
    /// Largest Gram disagreement found.
    pub gram_mismatch: f64,
    pub witness: Option<Witness>,
    pub threshold: f64,
}

impl EquivalenceCertificate {
    fn inequivalent(witness: Witness, threshold: f64) -> Self {
        EquivalenceCertificate {
            verdict: Verdict::Inequivalent,
            intertwiner: None,
            residuals: BTreeMap::new(),
            gram_mismatch: witness.mismatch,
            witness: Some(witness),
            threshold,
        }
    }

    fn judged(u: CMat, residuals: BTreeMap<String, f64>, gram_mismatch: f64, threshold: f64) -> Self {
        let ok = residuals.iter().all(|(name, &r)| {
            let bound = if name.starts_with("unitarity") { UNITARITY_BOUND } else { INTERTWINING_BOUND };
            r <= bound
        });
        EquivalenceCertificate {
            verdict: if ok { Verdict::Equivalent } else { Verdict::Inconclusive },
            intertwiner: ok.then_some(u),
            residuals,
            gram_mismatch,
            witness: None,
            threshold,
        }
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.residuals
            .iter()
            .filter(|(k, _)| k.starts_with("unitarity"))
            .fold(0.0, |a, (_, &v)| a.max(v))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().fold(0.0, |a, &v| a.max(v))
    }
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

/// Largest entrywise difference of two Gram matrices, with its position.
fn gram_gap(g1: &CMat, g2: &CMat) -> (f64, usize, usize) {
    let mut best = (0.0, 0, 0);
    for j in 0..g1.ncols() {
        for i in 0..g1.nrows() {
            let d = (g1[(i, j)] - g2[(i, j)]).norm();
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    best
}

fn unitarity(u: &CMat, residuals: &mut BTreeMap<String, f64>) {
    let (a, b) = numerics::unitarity_residuals(u);
    residuals.insert("unitarity u*u".into(), a);
    residuals.insert("unitarity uu*".into(), b);
}

/// `max ‖u ρ₁(a) − ρ₂(a) u‖` over the given units.
fn rep_intertwining(u: &CMat, rep1: &Representation, rep2: &Representation, units: &[(usize, usize, usize)]) -> f64 {
    let us = u.adjoint();
    let mut worst: f64 = 0.0;
    for &(i, p, q) in units {
        // u ρ₁(E_pq) = (ρ₁(E_qp) u*)*
        let left = rep1.apply_unit(i, q, p, &us).adjoint();
        let right = rep2.apply_unit(i, p, q, u);
        worst = worst.max(numerics::diff_norm(&left, &right));
    }
    worst
}

enum Corner {
    Mismatch(Witness),
    Built { u: CMat, gram: f64 },
}

/// The unitary `u` with `u ρ₁(a) S₁ = ρ₂(a) S₂` when `ρᵢ(A) Sᵢ` spans the
/// space of `ρᵢ`. It is fixed on the corners `ρᵢ(E_00)` of each block by least
/// squares on `ρᵢ(E_0q) Sᵢ` and transported by `ρ₂(E_p0) · ρ₁(E_0p)`.
fn corner_intertwiner(
    rep1: &Representation,
    s1: &CMat,
    rep2: &Representation,
    s2: &CMat,
    level: Option<usize>,
    tol: &Tolerance,
) -> Result<Corner> {
    if rep1.algebra() != rep2.algebra() || s1.ncols() != s2.ncols() {
        return Err(Error::LevelMismatch("spanning data of different shapes".into()));
    }
    let alg = rep1.algebra();
    let h = s1.ncols();
    let mut cols = Vec::new();
    for (i, &n) in alg.block_sizes().iter().enumerate() {
        for q in 0..n {
            cols.push((i, q));
        }
    }
    let mut x1 = numerics::zeros(rep1.dim(), cols.len() * h);
    let mut x2 = numerics::zeros(rep2.dim(), cols.len() * h);
    for (c, &(i, q)) in cols.iter().enumerate() {
        x1.columns_mut(c * h, h).copy_from(&rep1.apply_unit(i, 0, q, s1));
        x2.columns_mut(c * h, h).copy_from(&rep2.apply_unit(i, 0, q, s2));
    }
    let g1 = x1.adjoint() * &x1;
    let g2 = x2.adjoint() * &x2;
    let (gap, r, c) = gram_gap(&g1, &g2);
    if gap > WITNESS_FACTOR * tol.residual_tol {
        // ⟨ρ(E_0q)S e_a, ρ(E_0q')S e_b⟩ = ⟨e_a, S*ρ(E_qq')S e_b⟩
        let (ir, qr) = cols[r / h];
        let (_, qc) = cols[c / h];
        return Ok(Corner::Mismatch(Witness {
            level,
            unit: Some((ir, qr, qc)),
            powers: None,
            vectors: (r % h, c % h),
            left: pair(g1[(r, c)]),
            right: pair(g2[(r, c)]),
            mismatch: gap,
        }));
    }
    for (rep, x) in [(rep1, &x1), (rep2, &x2)] {
        let corner: usize = rep.multiplicities().iter().sum();
        let rank = numerics::numerical_rank(x, tol);
        if rank < corner {
            return Err(Error::SpanDeficient { rank, dim: corner });
        }
    }
    let (inv, _) = hermitian_pinv(&(&x1 * x1.adjoint()), tol);
    let u0 = &x2 * x1.adjoint() * inv;
    let mut u = numerics::zeros(rep2.dim(), rep1.dim());
    let eye1 = numerics::identity(rep1.dim());
    for (i, &n) in alg.block_sizes().iter().enumerate() {
        for p in 0..n {
            let right = rep1.apply_unit(i, 0, p, &eye1);
            u += rep2.apply_unit(i, p, 0, &(&u0 * right));
        }
    }
    Ok(Corner::Built { u, gram: gap })
}

/// Compares two extensions `(ρᵢ, Wᵢ)` of the same representation, anchored on
/// `H`: `u ρ₁(a) W₁ h = ρ₂(a) W₂ h`.
pub fn stinespring_intertwiner(ext1: &HbExtension, ext2: &HbExtension, tol: &Tolerance) -> Result<EquivalenceCertificate> {
    if ext1.depth != ext2.depth || ext1.w.ncols() != ext2.w.ncols() {
        return Err(Error::LevelMismatch("extensions of different representations".into()));
    }
    let threshold = tol.residual_tol;
    match corner_intertwiner(&ext1.rho, &ext1.w, &ext2.rho, &ext2.w, None, tol)? {
        Corner::Mismatch(w) => Ok(EquivalenceCertificate::inequivalent(w, threshold)),
        Corner::Built { u, gram } => {
            let mut res = BTreeMap::new();
            unitarity(&u, &mut res);
            res.insert("u W1 = W2".into(), numerics::diff_norm(&(&u * &ext1.w), &ext2.w));
            res.insert(
                "u rho1 = rho2 u".into(),
                rep_intertwining(&u, &ext1.rho, &ext2.rho, &check_units(ext1.rho.algebra())),
            );
            Ok(EquivalenceCertificate::judged(u, res, gram, threshold))
        }
    }
}

/// Compares two truncated coisometric extensions of the same pair, level by
/// level, with `u = I` on `H`.
pub fn chain_intertwiner(chain1: &ExtensionChain, chain2: &ExtensionChain, tol: &Tolerance) -> Result<EquivalenceCertificate> {
    let (p1, p2) = (&chain1.pair, &chain2.pair);
    if chain1.levels.len() != chain2.levels.len() {
        return Err(Error::LevelMismatch(format!(
            "{} against {} levels",
            chain1.levels.len(),
            chain2.levels.len()
        )));
    }
    if p1.depth() != p2.depth() || p1.dim() != p2.dim() || numerics::diff_norm(p1.t(), p2.t()) > tol.residual_tol {
        return Err(Error::LevelMismatch("chains over different pairs".into()));
    }
    let threshold = tol.residual_tol;
    let mut res = BTreeMap::new();
    let mut gram: f64 = 0.0;
    let mut blocks = vec![numerics::identity(p1.dim())];
    // v: identification of the previous defect block, starting from I_H
    let mut v = numerics::identity(p1.dim());
    for (k, (l1, l2)) in chain1.levels.iter().zip(&chain2.levels).enumerate() {
        let (s1, s2) = (l1.d.adjoint(), l2.d.adjoint() * &v);
        let (n1, n2) = (l1.basis.ncols(), l2.basis.ncols());
        let vk = if n1 == 0 && n2 == 0 {
            numerics::zeros(0, 0)
        } else if n1 == 0 || n2 == 0 {
            // one side has no defect block: the other side's seed Gram is the witness
            let g = if n1 == 0 { s2.adjoint() * &s2 } else { s1.adjoint() * &s1 };
            let zero = numerics::zeros(g.nrows(), g.ncols());
            let (gap, r, c) = gram_gap(&g, &zero);
            if gap <= WITNESS_FACTOR * threshold {
                res.insert(format!("level {k}: defect dimension"), gap);
                return Ok(EquivalenceCertificate {
                    verdict: Verdict::Inconclusive,
                    intertwiner: None,
                    residuals: res,
                    gram_mismatch: gap,
                    witness: None,
                    threshold,
                });
            }
            let (left, right) = if n1 == 0 { (C64::new(0.0, 0.0), g[(r, c)]) } else { (g[(r, c)], C64::new(0.0, 0.0)) };
            return Ok(EquivalenceCertificate::inequivalent(
                Witness {
                    level: Some(k),
                    unit: None,
                    powers: None,
                    vectors: (r, c),
                    left: pair(left),
                    right: pair(right),
                    mismatch: gap,
                },
                threshold,
            ));
        } else {
            match corner_intertwiner(&l1.pi_hat, &s1, &l2.pi_hat, &s2, Some(k), tol)? {
                Corner::Mismatch(w) => return Ok(EquivalenceCertificate::inequivalent(w, threshold)),
                Corner::Built { u, gram: g } => {
                    gram = gram.max(g);
                    res.insert(
                        format!("level {k}: u pi_hat1 = pi_hat2 u"),
                        rep_intertwining(&u, &l1.pi_hat, &l2.pi_hat, &check_units(l1.pi_hat.algebra())),
                    );
                    res.insert(format!("level {k}: u S1 = S2"), numerics::diff_norm(&(&u * &s1), &s2));
                    u
                }
            }
        };
        blocks.push(vk.clone());
        v = vk;
    }
    let u = numerics::block_diag(&blocks);
    unitarity(&u, &mut res);
    res.insert(
        "u V1 = V2 u".into(),
        numerics::diff_norm(&(&u * &chain1.v), &(&chain2.v * &u)),
    );
    let units = p1.dynamics().check_units(p1.depth());
    res.insert("u rho1 = rho2 u".into(), rep_intertwining(&u, &chain1.rho, &chain2.rho, &units));
    res.insert(
        "u = I on H".into(),
        numerics::diff_norm(
            &(&u * chain1.index.inclusion(0)),
            &chain2.index.inclusion(0),
        ),
    );
    Ok(EquivalenceCertificate::judged(u, res, gram, threshold))
}

fn krylov_stack(rec: &DilationRecord) -> CMat {
    let e = &rec.source_embedding;
    let h = e.ncols();
    let m = rec.copies;
    let mut out = numerics::zeros(rec.dim(), (m + 1) * h);
    let mut cur = e.clone();
    for n in 0..=m {
        out.columns_mut(n * h, h).copy_from(&cur);
        cur = &rec.op * cur;
    }
    out
}

/// Compares two isometric dilations of the same source, anchored on it:
/// `u W₁ⁿ k = W₂ⁿ k` for `n ≤ M`.
pub fn dilation_intertwiner(rec1: &DilationRecord, rec2: &DilationRecord, tol: &Tolerance) -> Result<EquivalenceCertificate> {
    if rec1.source_embedding.ncols() != rec2.source_embedding.ncols() || rec1.copies != rec2.copies {
        return Err(Error::LevelMismatch("dilations of different sources or truncations".into()));
    }
    if rec1.rep.algebra() != rec2.rep.algebra() {
        return Err(Error::LevelMismatch("dilations represent different algebras".into()));
    }
    let threshold = tol.residual_tol;
    let x1 = krylov_stack(rec1);
    let x2 = krylov_stack(rec2);
    let g1 = x1.adjoint() * &x1;
    let g2 = x2.adjoint() * &x2;
    let (gap, r, c) = gram_gap(&g1, &g2);
    let h = rec1.source_embedding.ncols();
    if gap > WITNESS_FACTOR * threshold {
        return Ok(EquivalenceCertificate::inequivalent(
            Witness {
                level: None,
                unit: None,
                powers: Some((r / h, c / h)),
                vectors: (r % h, c % h),
                left: pair(g1[(r, c)]),
                right: pair(g2[(r, c)]),
                mismatch: gap,
            },
            threshold,
        ));
    }
    for (rec, x) in [(rec1, &x1), (rec2, &x2)] {
        let rank = numerics::numerical_rank(x, tol);
        if rank < rec.dim() {
            return Err(Error::SpanDeficient { rank, dim: rec.dim() });
        }
    }
    let (inv, _) = hermitian_pinv(&(&x1 * x1.adjoint()), tol);
    let u = &x2 * x1.adjoint() * inv;
    let mut res = BTreeMap::new();
    unitarity(&u, &mut res);
    res.insert(
        "u fixes the source".into(),
        numerics::diff_norm(&(&u * &rec1.source_embedding), &rec2.source_embedding),
    );
    let window = rec1.window(&[rec1.copies as i64]);
    res.insert(
        "u W1 = W2 u (window)".into(),
        numerics::spectral_norm(&((&u * &rec1.op - &rec2.op * &u) * window)),
    );
    let units = rec1.dynamics.check_units(rec1.depth);
    res.insert("u eta1 = eta2 u".into(), rep_intertwining(&u, &rec1.rep, &rec2.rep, &units));
    Ok(EquivalenceCertificate::judged(u, res, gap, threshold))
}
