//! Chevalley–Eilenberg cohomology of sl2(C), viewed as a real Lie algebra,
//! with coefficients in homogeneous polynomials on its dual.
//!
//! Cochains in Λ^k g* ⊗ Poly_d are indexed by (wedge mask, exponent vector).
//! The same cochain is read as the multivector field m ∂_I on the coordinate
//! space, where d_EC becomes [π1, ·].

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{bit, indices, masks_of_degree, merge_sign, GradedField, Mask, Variance, DIM};
use crate::modp::{dense_rank, Modulus, PRIMES};
use crate::poisson::{cartan_cocycles, casimirs, poisson_bivectors};
use crate::poly::{monomials_of_degree, q, Poly6, Q};

pub const DEFAULT_DEGREE_CAP: u32 = 8;

/// Coefficient rings for the complex builder.
pub trait CoefRing: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn from_q(c: &Q) -> Self;
    fn from_i64(n: i64) -> Self {
        Self::from_q(&q(n))
    }
}

impl CoefRing for Q {
    fn zero() -> Self {
        q(0)
    }
    fn one() -> Self {
        q(1)
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        if CoefRing::is_zero(self) {
            None
        } else {
            Some(num_traits::Inv::inv(self.clone()))
        }
    }
    fn from_q(c: &Q) -> Self {
        c.clone()
    }
}

/// Gaussian rationals a + ib.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct GQ {
    pub re: Q,
    pub im: Q,
}

impl GQ {
    pub fn new(re: Q, im: Q) -> Self {
        GQ { re, im }
    }

    pub fn i() -> Self {
        GQ::new(q(0), q(1))
    }

    pub fn conj(&self) -> Self {
        GQ::new(self.re.clone(), -&self.im)
    }

    /// Image in F_p with i ↦ `sqrt_m1` (Montgomery form).
    pub fn mod_p(&self, m: &Modulus, sqrt_m1: u64) -> u64 {
        let re = m.from_rational(&self.re).expect("denominator divisible by p");
        let im = m.from_rational(&self.im).expect("denominator divisible by p");
        m.add(re, m.mul(im, sqrt_m1))
    }
}

impl CoefRing for GQ {
    fn zero() -> Self {
        GQ::new(q(0), q(0))
    }
    fn one() -> Self {
        GQ::new(q(1), q(0))
    }
    fn is_zero(&self) -> bool {
        CoefRing::is_zero(&self.re) && CoefRing::is_zero(&self.im)
    }
    fn add(&self, o: &Self) -> Self {
        GQ::new(&self.re + &o.re, &self.im + &o.im)
    }
    fn sub(&self, o: &Self) -> Self {
        GQ::new(&self.re - &o.re, &self.im - &o.im)
    }
    fn mul(&self, o: &Self) -> Self {
        GQ::new(&self.re * &o.re - &self.im * &o.im, &self.re * &o.im + &self.im * &o.re)
    }
    fn neg(&self) -> Self {
        GQ::new(-&self.re, -&self.im)
    }
    fn inv(&self) -> Option<Self> {
        let n = &self.re * &self.re + &self.im * &self.im;
        let ninv = CoefRing::inv(&n)?;
        Some(GQ::new(&self.re * &ninv, -&self.im * &ninv))
    }
    fn from_q(c: &Q) -> Self {
        GQ::new(c.clone(), q(0))
    }
}

/// Gauss–Jordan inverse of a square matrix; None if singular.
pub fn invert<R: CoefRing>(m: &[Vec<R>]) -> Option<Vec<Vec<R>>> {
    let n = m.len();
    let mut a: Vec<Vec<R>> = m.to_vec();
    let mut b: Vec<Vec<R>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { R::one() } else { R::zero() }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(piv, col);
        b.swap(piv, col);
        let inv = a[col][col].inv()?;
        for j in 0..n {
            a[col][j] = a[col][j].mul(&inv);
            b[col][j] = b[col][j].mul(&inv);
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                    b[r][j] = b[r][j].sub(&f.mul(&b[col][j]));
                }
            }
        }
    }
    Some(b)
}

/// Exact 2×2 matrix over the Gaussian rationals.
pub type GMat = [[GQ; 2]; 2];

fn gm_zero() -> GMat {
    [[GQ::zero(), GQ::zero()], [GQ::zero(), GQ::zero()]]
}

fn gm_mul(a: &GMat, b: &GMat) -> GMat {
    let mut c = gm_zero();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0].mul(&b[0][j]).add(&a[i][1].mul(&b[1][j]));
        }
    }
    c
}

fn gm_lin(a: &GMat, ca: &GQ, b: &GMat, cb: &GQ) -> GMat {
    let mut c = gm_zero();
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][j].mul(ca).add(&b[i][j].mul(cb));
        }
    }
    c
}

fn gm_bracket(a: &GMat, b: &GMat) -> GMat {
    gm_lin(&gm_mul(a, b), &GQ::one(), &gm_mul(b, a), &GQ::from_i64(-1))
}

fn gm_trace(a: &GMat) -> GQ {
    a[0][0].add(&a[1][1])
}

/// The matrix with coordinate vector e_j.
pub fn basis_matrix(j: usize) -> GMat {
    let mut z = [GQ::zero(), GQ::zero(), GQ::zero()];
    z[j / 2] = if j % 2 == 0 { GQ::one() } else { GQ::i() };
    let i = GQ::i();
    [
        [i.mul(&z[0]), z[1].neg().add(&i.mul(&z[2]))],
        [z[1].add(&i.mul(&z[2])), i.mul(&z[0]).neg()],
    ]
}

/// Real coordinates (x1, y1, ..., y3) of a traceless matrix.
pub fn matrix_coords(a: &GMat) -> [Q; 6] {
    let mi = GQ::new(q(0), q(-1));
    let half = GQ::from_q(&crate::poly::qr(1, 2));
    let z1 = mi.mul(&a[0][0].sub(&a[1][1])).mul(&half);
    let z2 = a[1][0].sub(&a[0][1]).mul(&half);
    let z3 = mi.mul(&a[0][1].add(&a[1][0])).mul(&half);
    [z1.re, z1.im, z2.re, z2.im, z3.re, z3.im]
}

/// Structure constants c_ij^k of the real Lie algebra in the basis dual to
/// the coordinate functions.
#[derive(Clone, Debug, PartialEq)]
pub struct LieStructure {
    pub c: Vec<Q>,
}

impl LieStructure {
    pub fn get(&self, i: usize, j: usize, k: usize) -> &Q {
        &self.c[(i * DIM + j) * DIM + k]
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..DIM).all(|i| (0..DIM).all(|j| (0..DIM).all(|k| *self.get(i, j, k) == -self.get(j, i, k))))
    }

    /// Largest |Jacobiator| coefficient; exactly zero for a Lie algebra.
    pub fn jacobi_residual(&self) -> Q {
        let mut worst = q(0);
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for m in 0..DIM {
                        let mut s = q(0);
                        for l in 0..DIM {
                            s += self.get(a, b, l) * self.get(l, c, m)
                                + self.get(b, c, l) * self.get(l, a, m)
                                + self.get(c, a, l) * self.get(l, b, m);
                        }
                        let s = num_traits::Signed::abs(&s);
                        if s > worst {
                            worst = s;
                        }
                    }
                }
            }
        }
        worst
    }

    /// The bracket polynomial Σ_k c_ij^k x_k.
    pub fn bracket_poly(&self, i: usize, j: usize) -> Poly6 {
        Poly6::from_terms((0..DIM).map(|k| {
            let mut e = [0; 6];
            e[k] = 1;
            (e, self.get(i, j, k).clone())
        }))
    }
}

/// Matrices X_a with Re tr(X_a A) = x_a(A).
pub fn dual_basis() -> [GMat; 6] {
    let b: Vec<GMat> = (0..DIM).map(basis_matrix).collect();
    let gram: Vec<Vec<Q>> = (0..DIM)
        .map(|a| (0..DIM).map(|c| gm_trace(&gm_mul(&b[a], &b[c])).re).collect())
        .collect();
    let ginv = invert(&gram).expect("trace form is nondegenerate");
    std::array::from_fn(|a| {
        let mut x = gm_zero();
        for c in 0..DIM {
            x = gm_lin(&x, &GQ::one(), &b[c], &GQ::from_q(&ginv[a][c]));
        }
        x
    })
}

/// Linear function l_X as a polynomial.
pub fn linear_function(x: &GMat) -> Poly6 {
    Poly6::from_terms((0..DIM).map(|j| {
        let mut e = [0; 6];
        e[j] = 1;
        (e, gm_trace(&gm_mul(x, &basis_matrix(j))).re)
    }))
}

/// Route (a): commutators of the dual basis matrices, read through the trace form.
pub fn structure_from_matrices() -> LieStructure {
    let x = dual_basis();
    let mut c = Vec::with_capacity(216);
    for a in 0..DIM {
        for b in 0..DIM {
            let br = gm_bracket(&x[a], &x[b]);
            for k in 0..DIM {
                c.push(gm_trace(&gm_mul(&br, &basis_matrix(k))).re);
            }
        }
    }
    LieStructure { c }
}

/// Route (b): coefficients of {x_i, x_j} under π1.
pub fn structure_from_poisson() -> Result<LieStructure> {
    let pi1 = poisson_bivectors().pi1;
    let mut c = Vec::with_capacity(216);
    for i in 0..DIM {
        for j in 0..DIM {
            let br = crate::exterior::poisson_bracket(&pi1, &Poly6::var(i), &Poly6::var(j))?;
            for k in 0..DIM {
                let mut e = [0; 6];
                e[k] = 1;
                c.push(br.coeff(&e));
            }
            if br.degree().is_some_and(|d| d != 1) {
                return Err(Error::StructureMismatch);
            }
        }
    }
    Ok(LieStructure { c })
}

pub fn derive_structure_constants() -> Result<LieStructure> {
    let a = structure_from_matrices();
    let b = structure_from_poisson()?;
    if a != b {
        return Err(Error::StructureMismatch);
    }
    Ok(a)
}

/// Number of basis pairs (i < j) with {l_Xi, l_Xj}_π1 = l_[Xi,Xj] as polynomials.
pub fn bracket_compatibility() -> Result<usize> {
    let x = dual_basis();
    let pi1 = poisson_bivectors().pi1;
    let mut ok = 0;
    for i in 0..DIM {
        for j in i + 1..DIM {
            let lhs = crate::exterior::poisson_bracket(&pi1, &linear_function(&x[i]), &linear_function(&x[j]))?;
            if lhs == linear_function(&gm_bracket(&x[i], &x[j])) {
                ok += 1;
            }
        }
    }
    Ok(ok)
}

/// Brackets of the complex basis Z_j dual to z_j under the complex trace
/// pairing: s[i][j][k] with [Z_i, Z_j] = Σ_k s_ijk Z_k.
pub fn complex_structure_constants() -> [[[GQ; 3]; 3]; 3] {
    let cm: Vec<GMat> = (0..3).map(|j| basis_matrix(2 * j)).collect();
    let gram: Vec<Vec<GQ>> = (0..3).map(|a| (0..3).map(|b| gm_trace(&gm_mul(&cm[a], &cm[b]))).collect()).collect();
    let ginv = invert(&gram).expect("complex trace form is nondegenerate");
    let z: Vec<GMat> = (0..3)
        .map(|a| (0..3).fold(gm_zero(), |acc, b| gm_lin(&acc, &GQ::one(), &cm[b], &ginv[a][b])))
        .collect();
    std::array::from_fn(|i| {
        std::array::from_fn(|j| std::array::from_fn(|k| gm_trace(&gm_mul(&gm_bracket(&z[i], &z[j]), &cm[k]))))
    })
}

/// Sparse matrix stored by columns; entries sorted by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat<R> {
    pub rows: usize,
    pub cols: usize,
    pub columns: Vec<Vec<(usize, R)>>,
}

impl<R: CoefRing> SparseMat<R> {
    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|c| c.is_empty())
    }

    pub fn apply(&self, v: &BTreeMap<usize, R>) -> BTreeMap<usize, R> {
        let mut out: BTreeMap<usize, R> = BTreeMap::new();
        for (j, x) in v {
            for (i, a) in &self.columns[*j] {
                let e = out.entry(*i).or_insert_with(R::zero);
                *e = e.add(&a.mul(x));
            }
        }
        out.retain(|_, x| !x.is_zero());
        out
    }

    /// self · other.
    pub fn compose(&self, other: &SparseMat<R>) -> SparseMat<R> {
        assert_eq!(self.cols, other.rows);
        let columns = other
            .columns
            .iter()
            .map(|col| self.apply(&col.iter().cloned().collect()).into_iter().collect())
            .collect();
        SparseMat { rows: self.rows, cols: other.cols, columns }
    }
}

/// Exact rank by elimination on sparse vectors, pivoting on the vector with
/// the fewest entries.
pub fn exact_rank<R: CoefRing>(vectors: Vec<BTreeMap<usize, R>>) -> usize {
    let mut vecs: Vec<BTreeMap<usize, R>> = vectors.into_iter().filter(|v| !v.is_empty()).collect();
    let mut rank = 0;
    while !vecs.is_empty() {
        let idx = (0..vecs.len()).min_by_key(|&i| vecs[i].len()).unwrap();
        let p = vecs.swap_remove(idx);
        let (pc, pv) = p.iter().next().map(|(c, v)| (*c, v.clone())).unwrap();
        let pinv = pv.inv().expect("nonzero pivot");
        for v in vecs.iter_mut() {
            if let Some(x) = v.get(&pc) {
                let f = x.mul(&pinv);
                for (c, val) in &p {
                    let e = v.entry(*c).or_insert_with(R::zero);
                    *e = e.sub(&f.mul(val));
                }
                v.retain(|_, x| !x.is_zero());
            }
        }
        vecs.retain(|v| !v.is_empty());
        rank += 1;
    }
    rank
}

/// Basis of Λ^k ⊗ Poly_d: masks in increasing order, each followed by all
/// monomials in graded-lex order.
#[derive(Clone, Debug)]
pub struct CeBasis {
    pub k: usize,
    pub d: u32,
    pub masks: Vec<Mask>,
    pub monos: Vec<[u32; 6]>,
    mask_pos: [usize; 64],
    mono_pos: HashMap<[u32; 6], usize>,
}

impl CeBasis {
    pub fn new(k: usize, d: u32) -> Self {
        let masks = if k <= DIM { masks_of_degree(k) } else { vec![] };
        let monos = monomials_of_degree::<6>(d);
        let mut mask_pos = [usize::MAX; 64];
        for (i, m) in masks.iter().enumerate() {
            mask_pos[*m as usize] = i;
        }
        let mono_pos = monos.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        CeBasis { k, d, masks, monos, mask_pos, mono_pos }
    }

    pub fn len(&self) -> usize {
        self.masks.len() * self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, mask: Mask, mono: &[u32; 6]) -> usize {
        self.mask_pos[mask as usize] * self.monos.len() + self.mono_pos[mono]
    }

    pub fn element(&self, i: usize) -> (Mask, [u32; 6]) {
        let n = self.monos.len();
        (self.masks[i / n], self.monos[i % n])
    }
}

/// Sorted mask of a sequence of indices and the sign of the sorting
/// permutation; None if an index repeats.
fn sequence_sign(seq: &[usize]) -> Option<(Mask, i32)> {
    let mut mask: Mask = 0;
    let mut inversions = 0;
    for (p, &a) in seq.iter().enumerate() {
        if mask & bit(a) != 0 {
            return None;
        }
        mask |= bit(a);
        inversions += seq[..p].iter().filter(|&&b| b > a).count();
    }
    Some((mask, if inversions % 2 == 0 { 1 } else { -1 }))
}

/// Matrix of d_EC: Λ^k ⊗ Poly_d → Λ^{k+1} ⊗ Poly_d for structure constants
/// `c` (216 entries, c[(i*6+j)*6+k]).
///
/// d(θ^I ⊗ m) = Σ_j θ^j ∧ θ^I ⊗ e_j·m + dθ^I ⊗ m with e_j·x_l = Σ_k c_jl^k x_k
/// acting as a derivation and dθ^k = −Σ_{a<b} c_ab^k θ^a ∧ θ^b.
pub fn ce_matrix<R: CoefRing>(c: &[R], k: usize, d: u32) -> SparseMat<R> {
    let src = CeBasis::new(k, d);
    let dst = CeBasis::new(k + 1, d);
    let mut act: Vec<Vec<(usize, R)>> = vec![Vec::new(); DIM * DIM];
    for j in 0..DIM {
        for l in 0..DIM {
            for kk in 0..DIM {
                let v = &c[(j * DIM + l) * DIM + kk];
                if !v.is_zero() {
                    act[j * DIM + l].push((kk, v.clone()));
                }
            }
        }
    }
    let mut dtheta: Vec<Vec<(usize, usize, R)>> = vec![Vec::new(); DIM];
    for (i, dt) in dtheta.iter_mut().enumerate() {
        for a in 0..DIM {
            for b in a + 1..DIM {
                let v = &c[(a * DIM + b) * DIM + i];
                if !v.is_zero() {
                    dt.push((a, b, v.neg()));
                }
            }
        }
    }
    let columns: Vec<Vec<(usize, R)>> = (0..src.len())
        .into_par_iter()
        .map(|col| {
            if dst.is_empty() {
                return Vec::new();
            }
            let (mask, alpha) = src.element(col);
            let mut acc: BTreeMap<usize, R> = BTreeMap::new();
            let mut push = |row: usize, v: R| {
                let e = acc.entry(row).or_insert_with(R::zero);
                *e = e.add(&v);
            };
            for j in 0..DIM {
                if mask & bit(j) != 0 {
                    continue;
                }
                let s = R::from_i64(merge_sign(bit(j), mask) as i64);
                let nm = mask | bit(j);
                for l in 0..DIM {
                    if alpha[l] == 0 {
                        continue;
                    }
                    let al = R::from_i64(alpha[l] as i64).mul(&s);
                    for (kk, v) in &act[j * DIM + l] {
                        let mut beta = alpha;
                        beta[l] -= 1;
                        beta[*kk] += 1;
                        push(dst.index(nm, &beta), al.mul(v));
                    }
                }
            }
            let idx = indices(mask);
            for s in 0..idx.len() {
                for (a, b, v) in &dtheta[idx[s]] {
                    let mut seq = idx[..s].to_vec();
                    seq.push(*a);
                    seq.push(*b);
                    seq.extend_from_slice(&idx[s + 1..]);
                    if let Some((nm, sg)) = sequence_sign(&seq) {
                        let sg = if s % 2 == 0 { sg } else { -sg };
                        push(dst.index(nm, &alpha), v.mul(&R::from_i64(sg as i64)));
                    }
                }
            }
            acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
        })
        .collect();
    SparseMat { rows: dst.len(), cols: src.len(), columns }
}

/// A real-basis cochain as a sparse coefficient map over CeBasis indices.
pub type Cochain = BTreeMap<usize, Q>;

/// Reads a polynomial multivector field of degree k with homogeneous
/// coefficients of degree d as a cochain.
pub fn field_to_cochain(f: &GradedField, d: u32) -> Result<Cochain> {
    if f.variance() != Variance::Multivector {
        return Err(Error::VarianceMismatch);
    }
    let basis = CeBasis::new(f.degree(), d);
    let mut out = Cochain::new();
    for (mask, p) in f.terms()? {
        for (e, c) in p.terms() {
            if e.iter().sum::<u32>() != d {
                return Err(Error::CrossCheckFail(format!("coefficient not homogeneous of degree {d}")));
            }
            out.insert(basis.index(*mask, e), c.clone());
        }
    }
    Ok(out)
}

pub fn cochain_to_field(c: &Cochain, k: usize, d: u32) -> GradedField {
    let basis = CeBasis::new(k, d);
    let mut terms: BTreeMap<Mask, Poly6> = BTreeMap::new();
    for (i, v) in c {
        let (mask, e) = basis.element(*i);
        terms.entry(mask).or_default().add_term(e, v.clone());
    }
    GradedField::from_terms(Variance::Multivector, k, terms)
}

/// Weight of a basis vector of the complexified algebra: eigenvalues under
/// the two Cartan elements H⁺, H⁻.
pub type Weight = (GQ, GQ);

fn weight_add(a: &Weight, b: &Weight) -> Weight {
    (a.0.add(&b.0), a.1.add(&b.1))
}

fn weight_neg(a: &Weight) -> Weight {
    (a.0.neg(), a.1.neg())
}

fn weight_zero() -> Weight {
    (GQ::zero(), GQ::zero())
}

/// How ranks are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    /// Fraction-free sparse elimination over ℚ in the real basis.
    Exact,
    /// Per-weight-block dense rank modulo three primes in the complexified
    /// weight basis.
    Modular,
}

#[derive(Clone, Debug)]
pub struct CohomologyConfig {
    pub degree_cap: u32,
    /// On prime disagreement, recompute the block exactly instead of failing.
    pub escalate: bool,
}

impl Default for CohomologyConfig {
    fn default() -> Self {
        CohomologyConfig { degree_cap: DEFAULT_DEGREE_CAP, escalate: true }
    }
}

/// The six weight vectors M⊗1 ∓ (iM)⊗i for M ∈ {E, H, F}, in the order
/// E⁺, E⁻, H⁺, H⁻, F⁺, F⁻, as rows of coordinates in the real basis.
pub fn weight_basis() -> Vec<Vec<GQ>> {
    let z = GQ::zero;
    let o = GQ::one;
    let e: GMat = [[z(), o()], [z(), z()]];
    let h: GMat = [[o(), z()], [z(), o().neg()]];
    let f: GMat = [[z(), z()], [o(), z()]];
    let coords = |m: &GMat| -> Vec<Q> { (0..DIM).map(|a| gm_trace(&gm_mul(m, &basis_matrix(a))).re).collect() };
    let mut rows = Vec::new();
    for m in [e, h, f] {
        let im = gm_lin(&m, &GQ::i(), &gm_zero(), &GQ::zero());
        let (a, b) = (coords(&m), coords(&im));
        for sign in [-1i64, 1] {
            rows.push((0..DIM).map(|j| GQ::new(a[j].clone(), &b[j] * q(sign))).collect());
        }
    }
    rows
}

/// Differential data in the weight basis.
pub struct WeightData {
    /// T: weight vector u = Σ_a T[u][a] X_a.
    pub t: Vec<Vec<GQ>>,
    pub t_inv: Vec<Vec<GQ>>,
    pub c: Vec<GQ>,
    pub weights: Vec<Weight>,
}

pub fn weight_data(real: &LieStructure) -> Result<WeightData> {
    let t = weight_basis();
    let t_inv = invert(&t).ok_or_else(|| Error::CrossCheckFail("weight basis is singular".into()))?;
    let cr: Vec<GQ> = real.c.iter().map(GQ::from_q).collect();
    let mut c = vec![GQ::zero(); 216];
    // c'_uv^k = Σ T_ua T_vb c_ab^l Tinv_lk
    for u in 0..DIM {
        for v in 0..DIM {
            let mut lin = vec![GQ::zero(); DIM];
            for a in 0..DIM {
                for b in 0..DIM {
                    let tt = t[u][a].mul(&t[v][b]);
                    if tt.is_zero() {
                        continue;
                    }
                    for (l, x) in lin.iter_mut().enumerate() {
                        *x = x.add(&tt.mul(&cr[(a * DIM + b) * DIM + l]));
                    }
                }
            }
            for kk in 0..DIM {
                let mut s = GQ::zero();
                for l in 0..DIM {
                    s = s.add(&lin[l].mul(&t_inv[l][kk]));
                }
                c[(u * DIM + v) * DIM + kk] = s;
            }
        }
    }
    let (hp, hm) = (2, 3);
    let mut weights = Vec::new();
    for u in 0..DIM {
        for (h, _) in [(hp, 0), (hm, 1)] {
            for kk in 0..DIM {
                if kk != u && !c[(h * DIM + u) * DIM + kk].is_zero() {
                    return Err(Error::CrossCheckFail("weight basis does not diagonalize the Cartan".into()));
                }
            }
        }
        weights.push((c[(hp * DIM + u) * DIM + u].clone(), c[(hm * DIM + u) * DIM + u].clone()));
    }
    Ok(WeightData { t, t_inv, c, weights })
}

/// Betti numbers as a k × d table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BettiTable {
    pub degrees: Vec<u32>,
    pub ks: Vec<usize>,
    /// rows[k index][d index]
    pub rows: Vec<Vec<usize>>,
}

/// Number of monomials f1^a f2^b of polynomial degree d.
pub fn m_of_d(d: u32) -> usize {
    if d % 2 == 0 {
        (d / 2 + 1) as usize
    } else {
        0
    }
}

/// m(d)·dim H^k(sl2(C)) with dim H^k = (1,0,0,2,0,0,1).
pub fn expected_betti(k: usize, d: u32) -> usize {
    const H: [usize; 7] = [1, 0, 0, 2, 0, 0, 1];
    m_of_d(d) * H.get(k).copied().unwrap_or(0)
}

/// Cohomology engine holding structure constants and cached ranks.
pub struct CeEngine {
    pub real: LieStructure,
    pub weights: WeightData,
    pub cfg: CohomologyConfig,
    rank_cache: Mutex<HashMap<(usize, u32, RankMethod), usize>>,
}

impl CeEngine {
    pub fn new(cfg: CohomologyConfig) -> Result<Self> {
        let real = derive_structure_constants()?;
        let weights = weight_data(&real)?;
        Ok(CeEngine { real, weights, cfg, rank_cache: Mutex::new(HashMap::new()) })
    }

    fn check_cap(&self, d: u32) -> Result<()> {
        if d > self.cfg.degree_cap {
            return Err(Error::DegreeCap(d, self.cfg.degree_cap));
        }
        Ok(())
    }

    /// d_EC on Λ^k ⊗ Poly_d in the real basis.
    pub fn ce_differential(&self, k: usize, d: u32) -> Result<SparseMat<Q>> {
        self.check_cap(d)?;
        Ok(ce_matrix(&self.real.c, k, d))
    }

    /// d_EC in the weight basis of the complexification.
    pub fn weight_differential(&self, k: usize, d: u32) -> Result<SparseMat<GQ>> {
        self.check_cap(d)?;
        Ok(ce_matrix(&self.weights.c, k, d))
    }

    fn basis_weights(&self, k: usize, d: u32) -> Vec<Weight> {
        let b = CeBasis::new(k, d);
        let w = &self.weights.weights;
        let mono_w: Vec<Weight> = b
            .monos
            .iter()
            .map(|e| {
                (0..DIM).fold(weight_zero(), |acc, u| {
                    let mut a = acc;
                    for _ in 0..e[u] {
                        a = weight_add(&a, &w[u]);
                    }
                    a
                })
            })
            .collect();
        let mut out = Vec::with_capacity(b.len());
        for m in &b.masks {
            let mw = indices(*m).iter().fold(weight_zero(), |acc, u| weight_add(&acc, &weight_neg(&w[*u])));
            for x in &mono_w {
                out.push(weight_add(&mw, x));
            }
        }
        out
    }

    /// Weight blocks of the weight-basis differential: (row ids, col ids).
    fn blocks(&self, k: usize, d: u32) -> Vec<(Vec<usize>, Vec<usize>)> {
        let cw = self.basis_weights(k, d);
        let rw = self.basis_weights(k + 1, d);
        let mut by: BTreeMap<Weight, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for (i, w) in rw.into_iter().enumerate() {
            by.entry(w).or_default().0.push(i);
        }
        for (j, w) in cw.into_iter().enumerate() {
            by.entry(w).or_default().1.push(j);
        }
        by.into_values().filter(|(r, c)| !r.is_empty() && !c.is_empty()).collect()
    }

    /// Rank of M_k; zero outside 0 ≤ k ≤ 5.
    pub fn rank(&self, k: isize, d: u32, method: RankMethod) -> Result<usize> {
        self.check_cap(d)?;
        if !(0..DIM as isize).contains(&k) {
            return Ok(0);
        }
        let k = k as usize;
        if let Some(r) = self.rank_cache.lock().unwrap().get(&(k, d, method)) {
            return Ok(*r);
        }
        let r = match method {
            RankMethod::Exact => {
                let m = self.ce_differential(k, d)?;
                exact_rank(m.columns.into_iter().map(|c| c.into_iter().collect()).collect())
            }
            RankMethod::Modular => self.modular_rank(k, d)?,
        };
        self.rank_cache.lock().unwrap().insert((k, d, method), r);
        Ok(r)
    }

    fn modular_rank(&self, k: usize, d: u32) -> Result<usize> {
        let m = self.weight_differential(k, d)?;
        let blocks = self.blocks(k, d);
        let mut row_block = vec![usize::MAX; m.rows];
        let mut row_local = vec![0; m.rows];
        for (b, (rows, _)) in blocks.iter().enumerate() {
            for (li, r) in rows.iter().enumerate() {
                row_block[*r] = b;
                row_local[*r] = li;
            }
        }
        let mut covered = 0;
        for (b, (_, cols)) in blocks.iter().enumerate() {
            for c in cols {
                for (r, _) in &m.columns[*c] {
                    if row_block[*r] != b {
                        return Err(Error::CrossCheckFail("differential leaves its weight space".into()));
                    }
                }
                covered += 1;
            }
        }
        // columns whose weight has no row partner must map to zero
        if covered < m.cols {
            let in_block: std::collections::HashSet<usize> = blocks.iter().flat_map(|(_, c)| c.iter().copied()).collect();
            for c in 0..m.cols {
                if !in_block.contains(&c) && !m.columns[c].is_empty() {
                    return Err(Error::CrossCheckFail("differential leaves its weight space".into()));
                }
            }
        }
        let moduli: Vec<(Modulus, u64)> = PRIMES
            .iter()
            .map(|p| {
                let md = Modulus::new(*p);
                let s = md.sqrt_minus_one();
                (md, s)
            })
            .collect();
        let ranks: Vec<Result<usize>> = blocks
            .par_iter()
            .map(|(rows, cols)| {
                let per: Vec<usize> = moduli
                    .iter()
                    .map(|(md, s)| {
                        let (nr, nc) = (rows.len(), cols.len());
                        // store the transpose when it has fewer rows
                        let transpose = nc < nr;
                        let (rr, cc) = if transpose { (nc, nr) } else { (nr, nc) };
                        let mut a = vec![0u64; rr * cc];
                        for (lj, c) in cols.iter().enumerate() {
                            for (r, v) in &m.columns[*c] {
                                let li = row_local[*r];
                                let pos = if transpose { lj * cc + li } else { li * cc + lj };
                                a[pos] = v.mod_p(md, *s);
                            }
                        }
                        dense_rank(md, rr, cc, &mut a)
                    })
                    .collect();
                if per.iter().all(|r| *r == per[0]) {
                    Ok(per[0])
                } else if self.cfg.escalate {
                    let vecs: Vec<BTreeMap<usize, GQ>> =
                        cols.iter().map(|c| m.columns[*c].iter().cloned().collect()).collect();
                    Ok(exact_rank(vecs))
                } else {
                    Err(Error::ModularDisagreement(per))
                }
            })
            .collect();
        let mut total = 0;
        for r in ranks {
            total += r?;
        }
        Ok(total)
    }

    /// dim ker M_k − rank M_{k−1}.
    pub fn betti(&self, k: usize, d: u32, method: RankMethod) -> Result<usize> {
        let dim = CeBasis::new(k, d).len();
        let rk = self.rank(k as isize, d, method)?;
        let rk1 = self.rank(k as isize - 1, d, method)?;
        Ok(dim - rk - rk1)
    }

    pub fn betti_table(&self, degrees: &[u32], ks: &[usize], method: RankMethod) -> Result<BettiTable> {
        let mut rows = Vec::new();
        for k in ks {
            let mut row = Vec::new();
            for d in degrees {
                row.push(self.betti(*k, *d, method)?);
            }
            rows.push(row);
        }
        Ok(BettiTable { degrees: degrees.to_vec(), ks: ks.to_vec(), rows })
    }

    /// The cochains f1^a f2^b C_R and f1^a f2^b C_I with 2(a+b) = d, after
    /// checking that they are closed and independent in H³.
    pub fn cocycle_witness(&self, d: u32) -> Result<Vec<Cochain>> {
        self.check_cap(d)?;
        let (f1, f2) = casimirs();
        let (cr, ci) = cartan_cocycles();
        let mut out = Vec::new();
        if d % 2 == 0 {
            for a in 0..=d / 2 {
                let g = f1.pow(a) * f2.pow(d / 2 - a);
                for c in [&cr, &ci] {
                    out.push(field_to_cochain(&c.mul_poly(&g)?, d)?);
                }
            }
        }
        let m3 = self.ce_differential(3, d)?;
        for w in &out {
            if !m3.apply(w).is_empty() {
                return Err(Error::WitnessNotClosed);
            }
        }
        let method = if d <= 2 { RankMethod::Exact } else { RankMethod::Modular };
        if self.class_rank(d, &out, method)? != out.len() {
            return Err(Error::WitnessNotIndependent);
        }
        Ok(out)
    }

    /// Dimension of the span of closed 3-cochains modulo im M_2. The modular
    /// route needs Cartan-invariant cochains.
    pub fn class_rank(&self, d: u32, cochains: &[Cochain], method: RankMethod) -> Result<usize> {
        if method == RankMethod::Exact {
            let m2 = self.ce_differential(2, d)?;
            let base = self.rank(2, d, RankMethod::Exact)?;
            let mut vecs: Vec<BTreeMap<usize, Q>> = m2.columns.into_iter().map(|c| c.into_iter().collect()).collect();
            vecs.extend(cochains.iter().cloned());
            return Ok(exact_rank(vecs) - base);
        }
        // Witnesses are Cartan-invariant, so only the weight-zero block of
        // the image matters; work there modulo the three primes.
        let zero = weight_zero();
        let w3 = self.basis_weights(3, d);
        let w2 = self.basis_weights(2, d);
        let rows: Vec<usize> = (0..w3.len()).filter(|i| w3[*i] == zero).collect();
        let cols: Vec<usize> = (0..w2.len()).filter(|i| w2[*i] == zero).collect();
        let mut local = HashMap::new();
        for (li, r) in rows.iter().enumerate() {
            local.insert(*r, li);
        }
        let m2 = self.weight_differential(2, d)?;
        let mut extra = Vec::new();
        for c in cochains {
            let t = self.to_weight_basis(c, 3, d);
            let mut v = Vec::new();
            for (i, x) in t {
                let li = *local.get(&i).ok_or(Error::WitnessNotIndependent)?;
                v.push((li, x));
            }
            extra.push(v);
        }
        let mut results = Vec::new();
        for p in PRIMES {
            let md = Modulus::new(p);
            let s = md.sqrt_minus_one();
            let nr = rows.len();
            let build = |with_extra: bool| {
                let nc = cols.len() + if with_extra { extra.len() } else { 0 };
                let mut a = vec![0u64; nc * nr];
                for (lj, c) in cols.iter().enumerate() {
                    for (r, v) in &m2.columns[*c] {
                        a[lj * nr + local[r]] = v.mod_p(&md, s);
                    }
                }
                if with_extra {
                    for (e, v) in extra.iter().enumerate() {
                        for (li, x) in v {
                            a[(cols.len() + e) * nr + li] = x.mod_p(&md, s);
                        }
                    }
                }
                (nc, a)
            };
            let (nc0, mut a0) = build(false);
            let (nc1, mut a1) = build(true);
            let r0 = dense_rank(&md, nc0, nr, &mut a0);
            let r1 = dense_rank(&md, nc1, nr, &mut a1);
            results.push(r1 - r0);
        }
        if results.iter().any(|r| *r != results[0]) {
            return Err(Error::ModularDisagreement(results));
        }
        Ok(results[0])
    }

    /// Rewrites a real-basis cochain in the weight basis: θ^a = Σ_u T_ua θ'^u
    /// and x_a = Σ_u Tinv_au x'_u.
    pub fn to_weight_basis(&self, c: &Cochain, k: usize, d: u32) -> BTreeMap<usize, GQ> {
        let b = CeBasis::new(k, d);
        let t = &self.weights.t;
        let ti = &self.weights.t_inv;
        let mut out: BTreeMap<(Mask, [u32; 6]), GQ> = BTreeMap::new();
        let mut mono_cache: HashMap<[u32; 6], BTreeMap<[u32; 6], GQ>> = HashMap::new();
        for (i, v) in c {
            let (mask, e) = b.element(*i);
            // wedge of the transformed θ's
            let mut form: BTreeMap<Mask, GQ> = BTreeMap::from([(0, GQ::one())]);
            for a in indices(mask) {
                let mut next = BTreeMap::new();
                for (m, x) in &form {
                    for u in 0..DIM {
                        if t[u][a].is_zero() || m & bit(u) != 0 {
                            continue;
                        }
                        let s = merge_sign(*m, bit(u));
                        let val = x.mul(&t[u][a]).mul(&GQ::from_i64(s as i64));
                        let en = next.entry(m | bit(u)).or_insert_with(GQ::zero);
                        *en = en.add(&val);
                    }
                }
                form = next;
            }
            let poly = mono_cache
                .entry(e)
                .or_insert_with(|| {
                    let mut p: BTreeMap<[u32; 6], GQ> = BTreeMap::from([([0; 6], GQ::one())]);
                    for a in 0..DIM {
                        for _ in 0..e[a] {
                            let mut next: BTreeMap<[u32; 6], GQ> = BTreeMap::new();
                            for (m, x) in &p {
                                for u in 0..DIM {
                                    if ti[a][u].is_zero() {
                                        continue;
                                    }
                                    let mut m2 = *m;
                                    m2[u] += 1;
                                    let en = next.entry(m2).or_insert_with(GQ::zero);
                                    *en = en.add(&x.mul(&ti[a][u]));
                                }
                            }
                            p = next;
                        }
                    }
                    p
                })
                .clone();
            let vq = GQ::from_q(v);
            for (m, x) in &form {
                for (mono, y) in &poly {
                    let en = out.entry((*m, *mono)).or_insert_with(GQ::zero);
                    *en = en.add(&x.mul(y).mul(&vq));
                }
            }
        }
        out.into_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|((m, e), v)| (b.index(m, &e), v))
            .collect()
    }

    /// Compares d_EC with [π1, ·] on `count` random cochains of bidegree
    /// (k, d). Returns the number of agreements.
    pub fn schouten_agreement(&self, k: usize, d: u32, count: usize, seed: u64) -> Result<usize> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = self.ce_differential(k, d)?;
        let basis = CeBasis::new(k, d);
        let lich = crate::exterior::Lichnerowicz::new(&poisson_bivectors().pi1)?;
        let mut agree = 0;
        for _ in 0..count {
            let mut c = Cochain::new();
            for _ in 0..4 {
                let i = rng.gen_range(0..basis.len());
                let v = rng.gen_range(-5i64..=5);
                if v != 0 {
                    c.insert(i, q(v));
                }
            }
            let lhs = m.apply(&c);
            let rhs = field_to_cochain(&lich.apply(&cochain_to_field(&c, k, d))?, d)?;
            if lhs == rhs {
                agree += 1;
            }
        }
        Ok(agree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> CeEngine {
        CeEngine::new(CohomologyConfig::default()).unwrap()
    }

    #[test]
    fn both_routes_agree_and_form_a_lie_algebra() {
        let s = derive_structure_constants().unwrap();
        assert!(s.is_antisymmetric());
        assert_eq!(s.jacobi_residual(), q(0));
        assert_eq!(bracket_compatibility().unwrap(), 15);
    }

    #[test]
    fn complex_basis_brackets_follow_levi_civita() {
        let s = complex_structure_constants();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let eps = if i == j || j == k || i == k {
                        0
                    } else if (i, j, k) == (0, 1, 2) || (i, j, k) == (1, 2, 0) || (i, j, k) == (2, 0, 1) {
                        1
                    } else {
                        -1
                    };
                    assert_eq!(s[i][j][k], GQ::from_i64(eps), "{i}{j}{k}");
                }
            }
        }
    }

    #[test]
    fn gaussian_inverse() {
        let z = GQ::new(q(3), q(-4));
        assert_eq!(z.mul(&z.inv().unwrap()), GQ::one());
    }

    #[test]
    fn differential_squares_to_zero() {
        let e = engine();
        for d in 0..=3 {
            for k in 0..DIM {
                let a = e.ce_differential(k, d).unwrap();
                let b = e.ce_differential(k + 1, d).unwrap();
                assert!(b.compose(&a).is_zero(), "k={k} d={d}");
            }
        }
        let a = e.weight_differential(2, 2).unwrap();
        let b = e.weight_differential(3, 2).unwrap();
        assert!(b.compose(&a).is_zero());
    }

    #[test]
    fn constants_are_invariant() {
        let e = engine();
        assert!(e.ce_differential(0, 0).unwrap().is_zero());
        assert_eq!(e.betti(0, 2, RankMethod::Exact).unwrap(), 2);
    }

    #[test]
    fn sequence_sign_examples() {
        assert_eq!(sequence_sign(&[0, 1]), Some((0b11, 1)));
        assert_eq!(sequence_sign(&[1, 0]), Some((0b11, -1)));
        assert_eq!(sequence_sign(&[2, 0, 1]), Some((0b111, 1)));
        assert_eq!(sequence_sign(&[1, 1]), None);
    }

    #[test]
    fn weights_are_as_expected() {
        let e = engine();
        let w = &e.weights.weights;
        // E and F carry opposite nonzero weights, H has weight zero
        assert_eq!(w[2], weight_zero());
        assert_eq!(w[3], weight_zero());
        assert_eq!(w[0], weight_neg(&w[4]));
        assert_eq!(w[1], weight_neg(&w[5]));
        assert_ne!(w[0], w[1]);
    }

    #[test]
    fn exact_and_modular_agree_low_degree() {
        let e = engine();
        for d in 0..=2 {
            for k in 0..DIM as isize {
                assert_eq!(
                    e.rank(k, d, RankMethod::Exact).unwrap(),
                    e.rank(k, d, RankMethod::Modular).unwrap(),
                    "k={k} d={d}"
                );
            }
        }
    }

    #[test]
    fn betti_low_degrees() {
        let e = engine();
        for d in 0..=3 {
            for k in 0..=DIM {
                assert_eq!(e.betti(k, d, RankMethod::Exact).unwrap(), expected_betti(k, d), "k={k} d={d}");
            }
        }
    }

    #[test]
    fn witnesses_low_degree() {
        let e = engine();
        assert_eq!(e.cocycle_witness(0).unwrap().len(), 2);
        let w = e.cocycle_witness(2).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(e.class_rank(2, &w, RankMethod::Modular).unwrap(), 4);
        assert_eq!(e.class_rank(2, &w[..3], RankMethod::Exact).unwrap(), 3);
    }

    #[test]
    fn schouten_matches() {
        let e = engine();
        for k in 0..3 {
            assert_eq!(e.schouten_agreement(k, 2, 5, 7).unwrap(), 5, "k={k}");
        }
    }

    #[test]
    fn degree_cap() {
        let e = CeEngine::new(CohomologyConfig { degree_cap: 2, escalate: true }).unwrap();
        assert_eq!(e.ce_differential(0, 3).unwrap_err(), Error::DegreeCap(3, 2));
    }
}
