//! Representations in structured form `π(a) = F (⊕ a_i ⊗ I_{m_i}) F*`.
//!
//! Every unital *-representation of `⊕ M_{n_i}` on a finite-dimensional space
//! has this shape: `m_i` is the multiplicity of the block and `F` a unitary
//! frame. The canonical coordinate `(i, p, l)` sits at
//! `offset_i + p·m_i + l`. Invariant subspaces are then `⊕ ℂ^{n_i} ⊗ L_i`, which
//! is what [`Representation::cyclic_span`] exploits.

use rand::RngCore;

use super::{verify_star_hom, Algebra, Element, HomReport, LinearMap};
use crate::error::{Error, Result};
use crate::numerics::{
    self, diff_norm, kron, orthonormal_span_scaled, random_unitary, spectral_norm, CMat, CVec,
    Tolerance, ZERO,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Identity,
    /// `F e_c = e_{perm[c]}`.
    Permutation(Vec<usize>),
    Dense(CMat),
}

impl Frame {
    pub fn to_dense(&self, dim: usize) -> CMat {
        match self {
            Frame::Identity => numerics::identity(dim),
            Frame::Permutation(p) => {
                let mut m = numerics::zeros(dim, dim);
                for (c, &r) in p.iter().enumerate() {
                    m[(r, c)] = numerics::ONE;
                }
                m
            }
            Frame::Dense(f) => f.clone(),
        }
    }

    /// `F x` for canonical-coordinate columns `x`.
    pub fn forward(&self, x: &CMat) -> CMat {
        match self {
            Frame::Identity => x.clone(),
            Frame::Permutation(p) => {
                let mut out = numerics::zeros(x.nrows(), x.ncols());
                for (c, &r) in p.iter().enumerate() {
                    out.set_row(r, &x.row(c));
                }
                out
            }
            Frame::Dense(f) => f * x,
        }
    }

    /// `F* y` for ambient columns `y`.
    pub fn backward(&self, y: &CMat) -> CMat {
        match self {
            Frame::Identity => y.clone(),
            Frame::Permutation(p) => {
                let mut out = numerics::zeros(y.nrows(), y.ncols());
                for (c, &r) in p.iter().enumerate() {
                    out.set_row(c, &y.row(r));
                }
                out
            }
            Frame::Dense(f) => f.adjoint() * y,
        }
    }

    /// `F C F*`.
    pub fn conjugate(&self, c: &CMat) -> CMat {
        match self {
            Frame::Identity => c.clone(),
            Frame::Permutation(p) => {
                let n = p.len();
                let mut out = numerics::zeros(n, n);
                for (i, &ri) in p.iter().enumerate() {
                    for (j, &rj) in p.iter().enumerate() {
                        out[(ri, rj)] = c[(i, j)];
                    }
                }
                out
            }
            Frame::Dense(f) => f * c * f.adjoint(),
        }
    }

    /// `F P` where `P e_c = e_{perm[c]}`.
    pub fn compose_perm(&self, perm: &[usize]) -> Frame {
        match self {
            Frame::Identity => Frame::Permutation(perm.to_vec()),
            Frame::Permutation(q) => Frame::Permutation(perm.iter().map(|&c| q[c]).collect()),
            Frame::Dense(f) => {
                let mut out = numerics::zeros(f.nrows(), perm.len());
                for (c, &src) in perm.iter().enumerate() {
                    out.set_column(c, &f.column(src));
                }
                Frame::Dense(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    algebra: Algebra,
    mult: Vec<usize>,
    frame: Frame,
    dim: usize,
}

impl Representation {
    /// `a ↦ ⊕ a_i ⊗ I_{m_i}`.
    pub fn canonical(algebra: Algebra, mult: Vec<usize>) -> Result<Self> {
        if mult.len() != algebra.num_blocks() {
            return Err(Error::ShapeMismatch("one multiplicity per block is required".into()));
        }
        let dim = algebra.block_sizes().iter().zip(&mult).map(|(n, m)| n * m).sum();
        Ok(Representation {
            algebra,
            mult,
            frame: Frame::Identity,
            dim,
        })
    }

    /// Canonical representation conjugated by a unitary basis change.
    pub fn with_frame(algebra: Algebra, mult: Vec<usize>, frame: CMat, tol: &Tolerance) -> Result<Self> {
        let mut rep = Representation::canonical(algebra, mult)?;
        if frame.shape() != (rep.dim, rep.dim) {
            return Err(Error::ShapeMismatch(format!(
                "frame {:?} for representation of dimension {}",
                frame.shape(),
                rep.dim
            )));
        }
        let (l, r) = numerics::unitarity_residuals(&frame);
        if l.max(r) > tol.residual_tol {
            return Err(Error::InvalidParameter(format!("frame is not unitary ({:.3e})", l.max(r))));
        }
        rep.frame = Frame::Dense(frame);
        Ok(rep)
    }

    pub(crate) fn from_parts(algebra: Algebra, mult: Vec<usize>, frame: Frame) -> Self {
        let dim = algebra.block_sizes().iter().zip(&mult).map(|(n, m)| n * m).sum();
        Representation {
            algebra,
            mult,
            frame,
            dim,
        }
    }

    /// Decomposes a raw unital *-representation given as a matrix-valued map.
    ///
    /// The block images of `E_00` give the multiplicity spaces; the frame
    /// columns are `π(E_p0) q` for an orthonormal basis `q` of `π(E_00)H`.
    /// Agreement with `f` is then checked on a generating set.
    pub fn from_map<F>(algebra: Algebra, dim: usize, f: F, tol: &Tolerance) -> Result<Self>
    where
        F: Fn(&Element) -> CMat,
    {
        let mut mult = Vec::with_capacity(algebra.num_blocks());
        let mut columns: Vec<CMat> = Vec::new();
        for (i, &n) in algebra.block_sizes().iter().enumerate() {
            let p0 = f(&algebra.matrix_unit(i, 0, 0));
            if p0.shape() != (dim, dim) {
                return Err(Error::ShapeMismatch(format!(
                    "map returned {:?}, expected {dim}×{dim}",
                    p0.shape()
                )));
            }
            numerics::check_finite(&p0, "representation image")?;
            let idem = diff_norm(&(&p0 * &p0), &p0).max(numerics::hermitian_residual(&p0));
            if idem > tol.residual_tol * (1.0 + spectral_norm(&p0)) {
                return Err(Error::NotStarHom(format!(
                    "image of a minimal projection is not a projection ({idem:.3e})"
                )));
            }
            let (q, m) = orthonormal_span_scaled(&p0, tol, 1.0)?;
            mult.push(m);
            let mut block = numerics::zeros(dim, n * m);
            for p in 0..n {
                let e = f(&algebra.matrix_unit(i, p, 0));
                let cols = &e * &q;
                block.view_mut((0, p * m), (dim, m)).copy_from(&cols);
            }
            columns.push(block);
        }
        let total: usize = columns.iter().map(|c| c.ncols()).sum();
        if total != dim {
            return Err(Error::NotStarHom(format!(
                "block projections cover {total} of {dim} dimensions (not unital)"
            )));
        }
        let mut frame = numerics::zeros(dim, dim);
        let mut c0 = 0;
        for b in &columns {
            frame.view_mut((0, c0), b.shape()).copy_from(b);
            c0 += b.ncols();
        }
        let (l, r) = numerics::unitarity_residuals(&frame);
        if l.max(r) > tol.residual_tol * 10.0 {
            return Err(Error::NotStarHom(format!("frame fails unitarity ({:.3e})", l.max(r))));
        }
        let rep = Representation::from_parts(algebra, mult, Frame::Dense(frame));
        let mut worst: f64 = 0.0;
        for g in rep.algebra.generators() {
            worst = worst.max(diff_norm(&rep.apply(&g), &f(&g)));
        }
        if worst > tol.residual_tol * 10.0 {
            return Err(Error::NotStarHom(format!(
                "map disagrees with its structured form ({worst:.3e})"
            )));
        }
        Ok(rep)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mult
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.algebra.block_sizes()[..block]
            .iter()
            .zip(&self.mult)
            .map(|(n, m)| n * m)
            .sum()
    }

    pub fn canonical_index(&self, block: usize, p: usize, l: usize) -> usize {
        self.block_offset(block) + p * self.mult[block] + l
    }

    /// `⊕ a_i ⊗ I_{m_i}` without the frame.
    pub fn canonical_matrix(&self, a: &Element) -> CMat {
        let parts: Vec<CMat> = a
            .blocks
            .iter()
            .zip(&self.mult)
            .map(|(b, &m)| kron(b, &numerics::identity(m)))
            .collect();
        numerics::block_diag(&parts)
    }

    pub fn apply(&self, a: &Element) -> CMat {
        self.frame.conjugate(&self.canonical_matrix(a))
    }

    /// `π(E^i_pq) v` for a batch of column vectors, without forming `π(E^i_pq)`.
    pub fn apply_unit(&self, block: usize, p: usize, q: usize, v: &CMat) -> CMat {
        let c = self.frame.backward(v);
        let m = self.mult[block];
        let mut out = numerics::zeros(self.dim, v.ncols());
        let src = self.canonical_index(block, q, 0);
        let dst = self.canonical_index(block, p, 0);
        out.view_mut((dst, 0), (m, v.ncols())).copy_from(&c.view((src, 0), (m, v.ncols())));
        self.frame.forward(&out)
    }

    pub fn to_canonical(&self, v: &CMat) -> CMat {
        self.frame.backward(v)
    }

    pub fn from_canonical(&self, c: &CMat) -> CMat {
        self.frame.forward(c)
    }

    /// Smallest invariant subspace containing the columns of `vectors`.
    ///
    /// Returns an orthonormal basis `B` (ambient coordinates) in which the
    /// restriction is canonical, together with that restriction. When `rng`
    /// is given, each multiplicity space basis is rotated by a Haar unitary.
    pub fn cyclic_span(
        &self,
        vectors: &CMat,
        tol: &Tolerance,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(CMat, Representation)> {
        if vectors.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "vectors of length {} for representation of dimension {}",
                vectors.nrows(),
                self.dim
            )));
        }
        let scale = (0..vectors.ncols())
            .map(|j| vectors.column(j).norm())
            .fold(0.0_f64, f64::max);
        let c = self.frame.backward(vectors);
        let mut new_mult = Vec::with_capacity(self.mult.len());
        let mut spaces = Vec::with_capacity(self.mult.len());
        for (i, &n) in self.algebra.block_sizes().iter().enumerate() {
            let m = self.mult[i];
            let mut raw = numerics::zeros(m, n * c.ncols());
            for j in 0..c.ncols() {
                for p in 0..n {
                    let start = self.canonical_index(i, p, 0);
                    for l in 0..m {
                        raw[(l, j * n + p)] = c[(start + l, j)];
                    }
                }
            }
            let (mut basis, r) = orthonormal_span_scaled(&raw, tol, scale)?;
            if let Some(g) = rng.as_deref_mut() {
                if r > 1 {
                    basis = &basis * random_unitary(r, g);
                }
            }
            new_mult.push(r);
            spaces.push(basis);
        }
        let sub = Representation::canonical(self.algebra.clone(), new_mult.clone())?;
        let mut canon = numerics::zeros(self.dim, sub.dim);
        for (i, &n) in self.algebra.block_sizes().iter().enumerate() {
            let l_i = &spaces[i];
            for p in 0..n {
                let row0 = self.canonical_index(i, p, 0);
                for j in 0..new_mult[i] {
                    let col = sub.canonical_index(i, p, j);
                    for l in 0..self.mult[i] {
                        canon[(row0 + l, col)] = l_i[(l, j)];
                    }
                }
            }
        }
        Ok((self.frame.forward(&canon), sub))
    }

    /// Restriction to an invariant subspace with orthonormal basis `basis`.
    pub fn restrict(&self, basis: &CMat, tol: &Tolerance) -> Result<Representation> {
        let leak = self.invariance_leakage(basis);
        if leak > tol.residual_tol {
            return Err(Error::InvarianceViolation { leakage: leak });
        }
        let b = basis.clone();
        Representation::from_map(self.algebra.clone(), basis.ncols(), |a| b.adjoint() * self.apply(a) * &b, tol)
    }

    /// `max ‖(I − BB*) π(g) B‖` over a generating set.
    pub fn invariance_leakage(&self, basis: &CMat) -> f64 {
        let proj = basis * basis.adjoint();
        let mut worst: f64 = 0.0;
        for g in self.algebra.generators() {
            let img = self.apply(&g) * basis;
            worst = worst.max(spectral_norm(&(&img - &proj * &img)));
        }
        worst
    }

    /// Orthogonal direct sum, in the order given.
    pub fn direct_sum(parts: &[Representation]) -> Result<Representation> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidParameter("empty direct sum".into()));
        };
        let algebra = first.algebra.clone();
        if parts.iter().any(|p| p.algebra != algebra) {
            return Err(Error::ShapeMismatch("direct sum of representations of different algebras".into()));
        }
        let nb = algebra.num_blocks();
        let mult: Vec<usize> = (0..nb).map(|i| parts.iter().map(|p| p.mult[i]).sum()).collect();
        let sum = Representation::canonical(algebra.clone(), mult)?;
        // sum-canonical index -> concatenated part-canonical index
        let mut sigma = vec![0; sum.dim];
        let mut part_offsets = Vec::with_capacity(parts.len());
        let mut acc = 0;
        for p in parts {
            part_offsets.push(acc);
            acc += p.dim;
        }
        for (i, &n) in algebra.block_sizes().iter().enumerate() {
            for row in 0..n {
                let mut l = 0;
                for (s, p) in parts.iter().enumerate() {
                    for ls in 0..p.mult[i] {
                        sigma[sum.canonical_index(i, row, l)] = part_offsets[s] + p.canonical_index(i, row, ls);
                        l += 1;
                    }
                }
            }
        }
        let all_simple = parts.iter().all(|p| !matches!(p.frame, Frame::Dense(_)));
        let frame = if all_simple {
            let mut ambient = Vec::with_capacity(sum.dim);
            for (s, p) in parts.iter().enumerate() {
                for local in 0..p.dim {
                    let amb = match &p.frame {
                        Frame::Identity => local,
                        Frame::Permutation(q) => q[local],
                        Frame::Dense(_) => unreachable!(),
                    };
                    ambient.push(part_offsets[s] + amb);
                }
            }
            Frame::Permutation(sigma.iter().map(|&c| ambient[c]).collect())
        } else {
            let dense: Vec<CMat> = parts.iter().map(|p| p.frame.to_dense(p.dim)).collect();
            Frame::Dense(numerics::block_diag(&dense)).compose_perm(&sigma)
        };
        Ok(Representation::from_parts(algebra, sum.mult, frame))
    }

    /// Pullback `π ∘ h` along a unital *-homomorphism, decomposed afresh.
    pub fn pullback(&self, h: &dyn LinearMap, tol: &Tolerance) -> Result<Representation> {
        if h.target() != &self.algebra {
            return Err(Error::ShapeMismatch("pullback along a map into another algebra".into()));
        }
        Representation::from_map(h.source().clone(), self.dim, |a| self.apply(&h.apply(a)), tol)
    }

    /// For a single-block representation of `M_{n·f}`: the pullback along
    /// `x ↦ x ⊗ I_f`, which is canonical with multiplicity `f·m` in the same frame.
    pub fn inflate_pullback(&self, source: Algebra, f: usize) -> Result<Representation> {
        if self.algebra.num_blocks() != 1 || source.num_blocks() != 1 || source.block_sizes()[0] * f != self.algebra.block_sizes()[0] {
            return Err(Error::ShapeMismatch("tensor inflation needs matching single blocks".into()));
        }
        Ok(Representation::from_parts(source, vec![self.mult[0] * f], self.frame.clone()))
    }

    /// For a single-block representation of `M_{k·n}`: the pullback along
    /// `x ↦ I_k ⊗ x`, canonical with multiplicity `k·m` up to a permutation.
    pub fn shift_pullback(&self, source: Algebra, k: usize) -> Result<Representation> {
        let big = self.algebra.block_sizes()[0];
        if self.algebra.num_blocks() != 1 || source.num_blocks() != 1 || source.block_sizes()[0] * k != big {
            return Err(Error::ShapeMismatch("shift pullback needs matching single blocks".into()));
        }
        let n = source.block_sizes()[0];
        let m = self.mult[0];
        let mut perm = vec![0; self.dim];
        for p in 0..n {
            for t in 0..k {
                for l in 0..m {
                    let new = p * k * m + t * m + l;
                    perm[new] = (t * n + p) * m + l;
                }
            }
        }
        Ok(Representation::from_parts(source, vec![k * m], self.frame.compose_perm(&perm)))
    }

    /// Unital *-homomorphism residuals of `a ↦ π(a)` over the matrix-unit basis.
    pub fn verify(&self, tol: &Tolerance) -> Result<HomReport> {
        verify_star_hom(&RepresentationMap::new(self.clone()), tol)
    }
}

/// A representation viewed as a map into `M_{dim}`.
#[derive(Clone, Debug)]
pub struct RepresentationMap {
    rep: Representation,
    target: Algebra,
}

impl RepresentationMap {
    pub fn new(rep: Representation) -> Self {
        let target = Algebra::full(rep.dim);
        RepresentationMap { rep, target }
    }
}

impl LinearMap for RepresentationMap {
    fn source(&self) -> &Algebra {
        self.rep.algebra()
    }
    fn target(&self) -> &Algebra {
        &self.target
    }
    fn apply(&self, a: &Element) -> Element {
        Element::single(self.rep.apply(a))
    }
}

#[derive(Clone, Debug)]
pub struct CyclicSummand {
    pub basis: CMat,
    pub cyclic: CVec,
    pub rep: Representation,
}

/// Greedy decomposition into cyclic summands: repeatedly take the first
/// standard basis vector not yet covered, project it onto the complement and
/// close under `π(A)`.
pub fn cyclic_decomposition(rep: &Representation, tol: &Tolerance) -> Result<Vec<CyclicSummand>> {
    let dim = rep.dim();
    let mut covered = numerics::zeros(dim, 0);
    let mut out = Vec::new();
    for j in 0..dim {
        if covered.ncols() == dim {
            break;
        }
        let mut e = CVec::from_element(dim, ZERO);
        e[j] = numerics::ONE;
        let v = &e - &covered * (covered.adjoint() * &e);
        let n = v.norm();
        if n <= tol.rank_eps.sqrt() {
            continue;
        }
        let xi = v / numerics::real(n);
        let xi_m = CMat::from_column_slice(dim, 1, xi.as_slice());
        let (basis, sub) = rep.cyclic_span(&xi_m, tol, None)?;
        let mut grown = numerics::zeros(dim, covered.ncols() + basis.ncols());
        grown.view_mut((0, 0), covered.shape()).copy_from(&covered);
        grown.view_mut((0, covered.ncols()), basis.shape()).copy_from(&basis);
        covered = grown;
        out.push(CyclicSummand {
            basis,
            cyclic: xi,
            rep: sub,
        });
    }
    Ok(out)
}
