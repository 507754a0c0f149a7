//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! `Poly<N>` is keyed by exponent vectors. Zero coefficients are never stored,
//! so structural equality is polynomial equality.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Renders a rational as "p/q", or "p" for integers.
pub fn q_to_string(c: &Q) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub fn q_parse(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Q::from_integer),
    }
}

pub fn q_to_f64(c: &Q) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly<const N: usize> {
    terms: BTreeMap<[u32; N], Q>,
}

pub type Poly6 = Poly<6>;
pub type Poly3 = Poly<3>;
pub type Poly2 = Poly<2>;

impl<const N: usize> Default for Poly<N> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const N: usize> Poly<N> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::monomial([0; N], c)
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(q(c))
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; N];
        e[i] = 1;
        Self::monomial(e, Q::one())
    }

    pub fn monomial(exps: [u32; N], c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        Poly { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = ([u32; N], Q)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in it {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, e: [u32; N], c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32; N], &Q)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &[u32; N]) -> Q {
        self.terms.get(e).cloned().unwrap_or_else(Q::zero)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn is_homogeneous(&self, d: u32) -> bool {
        self.terms.keys().all(|e| e.iter().sum::<u32>() == d)
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, exps: &[u32; N]) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, v)| {
                    let mut n = *e;
                    for i in 0..N {
                        n[i] += exps[i];
                    }
                    (n, v.clone())
                })
                .collect(),
        }
    }

    /// Exact division by a monomial; `None` when some term is not divisible.
    pub fn div_monomial(&self, exps: &[u32; N]) -> Option<Self> {
        let mut out = BTreeMap::new();
        for (e, v) in &self.terms {
            let mut n = *e;
            for i in 0..N {
                if n[i] < exps[i] {
                    return None;
                }
                n[i] -= exps[i];
            }
            out.insert(n, v.clone());
        }
        Some(Poly { terms: out })
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Plain partial derivative in variable `i`.
    pub fn deriv(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            if e[i] > 0 {
                let mut n = *e;
                n[i] -= 1;
                out.add_term(n, v * q(e[i] as i64));
            }
        }
        out
    }

    /// Substitutes polynomials (in `M` variables) for each variable.
    pub fn compose<const M: usize>(&self, subs: &[Poly<M>; N]) -> Poly<M> {
        let mut cache: Vec<Vec<Poly<M>>> = vec![vec![Poly::one()]; N];
        let mut out = Poly::<M>::zero();
        for (e, v) in &self.terms {
            let mut t = Poly::<M>::constant(v.clone());
            for i in 0..N {
                while cache[i].len() <= e[i] as usize {
                    let next = cache[i].last().unwrap() * &subs[i];
                    cache[i].push(next);
                }
                if e[i] > 0 {
                    t = &t * &cache[i][e[i] as usize];
                }
            }
            out = out + t;
        }
        out
    }

    /// Applies a signed variable map x_i -> s_i x_i (used for reflections).
    pub fn reflect(&self, signs: &[i8; N]) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(e, v)| {
                    let odd = (0..N).filter(|&i| signs[i] < 0 && e[i] % 2 == 1).count();
                    (*e, if odd % 2 == 1 { -v.clone() } else { v.clone() })
                })
                .collect(),
        }
    }

    pub fn eval_q(&self, x: &[Q; N]) -> Q {
        let mut s = Q::zero();
        for (e, v) in &self.terms {
            let mut t = v.clone();
            for i in 0..N {
                for _ in 0..e[i] {
                    t *= &x[i];
                }
            }
            s += t;
        }
        s
    }

    pub fn eval(&self, x: &[f64; N]) -> f64 {
        let mut s = 0.0;
        for (e, v) in &self.terms {
            let mut t = q_to_f64(v);
            for i in 0..N {
                if e[i] > 0 {
                    t *= x[i].powi(e[i] as i32);
                }
            }
            s += t;
        }
        s
    }

    /// Float copy for repeated evaluation in numeric sweeps.
    pub fn compile(&self) -> CompiledPoly<N> {
        CompiledPoly {
            terms: self.terms.iter().map(|(e, v)| (*e, q_to_f64(v))).collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> Q {
        self.terms.values().map(|v| v.abs()).max().unwrap_or_else(Q::zero)
    }
}

impl<const N: usize> fmt::Debug for Poly<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<const N: usize> fmt::Display for Poly<N> {
    /// Canonical text: terms in ascending exponent order, "c*[e1,e2,...]".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, v) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let es: Vec<String> = e.iter().map(|k| k.to_string()).collect();
            write!(f, "{}*[{}]", q_to_string(v), es.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CompiledPoly<const N: usize> {
    terms: Vec<([u32; N], f64)>,
}

impl<const N: usize> CompiledPoly<N> {
    pub fn eval(&self, x: &[f64; N]) -> f64 {
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for i in 0..N {
                match e[i] {
                    0 => {}
                    1 => t *= x[i],
                    2 => t *= x[i] * x[i],
                    k => t *= x[i].powi(k as i32),
                }
            }
            s += t;
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<const N: usize> Add for Poly<N> {
    type Output = Poly<N>;
    fn add(mut self, rhs: Poly<N>) -> Poly<N> {
        for (e, v) in rhs.terms {
            self.add_term(e, v);
        }
        self
    }
}

impl<const N: usize> Add<&Poly<N>> for &Poly<N> {
    type Output = Poly<N>;
    fn add(self, rhs: &Poly<N>) -> Poly<N> {
        self.clone() + rhs.clone()
    }
}

impl<const N: usize> AddAssign<&Poly<N>> for Poly<N> {
    fn add_assign(&mut self, rhs: &Poly<N>) {
        for (e, v) in &rhs.terms {
            self.add_term(*e, v.clone());
        }
    }
}

impl<const N: usize> SubAssign<&Poly<N>> for Poly<N> {
    fn sub_assign(&mut self, rhs: &Poly<N>) {
        for (e, v) in &rhs.terms {
            self.add_term(*e, -v.clone());
        }
    }
}

impl<const N: usize> Neg for Poly<N> {
    type Output = Poly<N>;
    fn neg(self) -> Poly<N> {
        Poly {
            terms: self.terms.into_iter().map(|(e, v)| (e, -v)).collect(),
        }
    }
}

impl<const N: usize> Neg for &Poly<N> {
    type Output = Poly<N>;
    fn neg(self) -> Poly<N> {
        -self.clone()
    }
}

impl<const N: usize> Sub for Poly<N> {
    type Output = Poly<N>;
    fn sub(self, rhs: Poly<N>) -> Poly<N> {
        self + (-rhs)
    }
}

impl<const N: usize> Sub<&Poly<N>> for &Poly<N> {
    type Output = Poly<N>;
    fn sub(self, rhs: &Poly<N>) -> Poly<N> {
        self.clone() - rhs.clone()
    }
}

impl<const N: usize> Mul<&Poly<N>> for &Poly<N> {
    type Output = Poly<N>;
    fn mul(self, rhs: &Poly<N>) -> Poly<N> {
        let mut out = Poly::zero();
        for (e1, v1) in &self.terms {
            for (e2, v2) in &rhs.terms {
                let mut e = *e1;
                for i in 0..N {
                    e[i] += e2[i];
                }
                out.add_term(e, v1 * v2);
            }
        }
        out
    }
}

impl<const N: usize> Mul for Poly<N> {
    type Output = Poly<N>;
    fn mul(self, rhs: Poly<N>) -> Poly<N> {
        &self * &rhs
    }
}

/// Squared Euclidean norm Σ x_i² as a polynomial.
pub fn norm_sq<const N: usize>() -> Poly<N> {
    let mut p = Poly::zero();
    for i in 0..N {
        let mut e = [0; N];
        e[i] = 2;
        p.add_term(e, Q::one());
    }
    p
}

/// All exponent vectors of total degree `d` in graded-lex order
/// (descending in the first variable, then the next, ...).
pub fn monomials_of_degree<const N: usize>(d: u32) -> Vec<[u32; N]> {
    fn rec<const N: usize>(i: usize, left: u32, cur: &mut [u32; N], out: &mut Vec<[u32; N]>) {
        if i == N - 1 {
            cur[i] = left;
            out.push(*cur);
            return;
        }
        for k in (0..=left).rev() {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
    }
    let mut out = Vec::new();
    if N == 0 {
        return out;
    }
    let mut cur = [0; N];
    rec(0, d, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Poly3 {
        Poly3::var(i)
    }

    #[test]
    fn ring_basics() {
        let p = &x(0) + &x(1);
        let sq = &p * &p;
        let expect = x(0).pow(2) + x(0).mul_monomial(&[0, 1, 0]).scale(&q(2)) + x(1).pow(2);
        assert_eq!(sq, expect);
        assert!((&p - &p).is_zero());
        assert_eq!(sq.degree(), Some(2));
        assert!(sq.is_homogeneous(2));
    }

    #[test]
    fn derivative_and_compose() {
        let p = x(0).pow(3).scale(&qr(1, 2)) + x(1);
        assert_eq!(p.deriv(0), x(0).pow(2).scale(&qr(3, 2)));
        let subs = [Poly2::var(0) + Poly2::var(1), Poly2::var(1), Poly2::zero()];
        let c = p.compose(&subs);
        assert_eq!(c.eval(&[1.0, 1.0]), 0.5 * 8.0 + 1.0);
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials_of_degree::<6>(2).len(), 21);
        assert_eq!(monomials_of_degree::<6>(8).len(), 1287);
        let m = monomials_of_degree::<3>(1);
        assert_eq!(m, vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
    }

    #[test]
    fn rational_text_round_trip() {
        for s in ["3/4", "-7", "0", "-1/2"] {
            assert_eq!(q_to_string(&q_parse(s).unwrap()), s);
        }
        assert!(q_parse("1/0").is_none());
    }

    #[test]
    fn monomial_division() {
        let p = x(0).mul_monomial(&[1, 1, 0]);
        assert_eq!(p.div_monomial(&[2, 0, 0]), Some(x(1)));
        assert_eq!(p.div_monomial(&[0, 0, 1]), None);
    }
}
