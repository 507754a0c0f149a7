//! Flat test functions and flat norms, the norm ring ℚ[x,y,s]/(s² − x² − y²)
//! with the ℳ/𝒦 module structure, the Y fields, and the parity decompositions
//! of polynomials on ℂ.

use num_traits::{One, Signed};
use rand::Rng;

use crate::error::{Error, Result};
use crate::poly::{norm_sq, q, q_to_f64, CompiledPoly, Poly, Poly2, Q};
use crate::sampling::{rng, unit_vector};

// ---------------------------------------------------------------------------
// Flat test functions

/// exp(−c/ρ)·P/ρ^m with ρ = Σ x_i², extended by 0 at the origin.
#[derive(Clone, Debug)]
pub struct FlatTestFunction<const N: usize> {
    pub c: Q,
    pub p: Poly<N>,
    pub m: u32,
    compiled: CompiledPoly<N>,
    c_f: f64,
}

impl<const N: usize> PartialEq for FlatTestFunction<N> {
    fn eq(&self, o: &Self) -> bool {
        self.c == o.c && self.p == o.p && self.m == o.m
    }
}

impl<const N: usize> FlatTestFunction<N> {
    pub fn new(c: Q, p: Poly<N>, m: u32) -> Self {
        assert!(c.is_positive(), "decay rate must be positive");
        let compiled = p.compile();
        let c_f = q_to_f64(&c);
        FlatTestFunction { c, p, m, compiled, c_f }
    }

    pub fn scale(&self, k: &Q) -> Self {
        Self::new(self.c.clone(), self.p.scale(k), self.m)
    }

    /// ∂_i stays in the family: P' = 2c x_i P + ρ² ∂_iP − 2mρ x_i P, m' = m + 2.
    pub fn partial(&self, i: usize) -> Self {
        let rho = norm_sq::<N>();
        let xi = Poly::<N>::var(i);
        let xp = &xi * &self.p;
        let p = xp.scale(&(q(2) * &self.c)) + &(&rho * &rho) * &self.p.deriv(i)
            - (&rho * &xp).scale(&q(2 * self.m as i64));
        Self::new(self.c.clone(), p, self.m + 2)
    }

    pub fn derivative(&self, a: &[u32; N]) -> Self {
        let mut f = self.clone();
        for (i, &k) in a.iter().enumerate() {
            for _ in 0..k {
                f = f.partial(i);
            }
        }
        f
    }

    pub fn eval(&self, x: &[f64; N]) -> f64 {
        self.eval_weighted(x, 0.0)
    }

    /// |x|^{−k} times the value, in log form so that underflow of the
    /// exponential is never multiplied against an overflowing ρ^{−m}.
    pub fn eval_weighted(&self, x: &[f64; N], k: f64) -> f64 {
        let rho: f64 = x.iter().map(|v| v * v).sum();
        if rho == 0.0 {
            return 0.0;
        }
        let p = self.compiled.eval(x);
        if p == 0.0 {
            return 0.0;
        }
        let l = p.abs().ln() - self.c_f / rho - (self.m as f64 + 0.5 * k) * rho.ln();
        p.signum() * l.exp()
    }
}

/// All multi-indices a ∈ ℕ^N with |a| ≤ n.
pub fn multi_indices<const N: usize>(n: u32) -> Vec<[u32; N]> {
    (0..=n).flat_map(crate::poly::monomials_of_degree::<N>).collect()
}

pub fn factorial_weight<const N: usize>(a: &[u32; N]) -> f64 {
    a.iter().map(|&k| (1..=k).map(|j| j as f64).product::<f64>()).product()
}

/// Sample points of the closed ball of radius r: geometric clustering at 0
/// (r·2^{−j}, j = 0..20), uniform radii, and a fixed direction set.
#[derive(Clone, Debug)]
pub struct FlatGrid<const N: usize> {
    pub r: f64,
    pub points: Vec<[f64; N]>,
}

impl<const N: usize> FlatGrid<N> {
    pub fn new(r: f64, n_radial: usize, n_dirs: usize) -> Self {
        assert!(r > 0.0);
        let mut radii: Vec<f64> = (0..=20).map(|j| r * 0.5f64.powi(j)).collect();
        radii.extend((1..n_radial).map(|i| r * i as f64 / n_radial as f64));
        let dirs: Vec<[f64; N]> = if N == 2 {
            (0..n_dirs)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n_dirs as f64;
                    std::array::from_fn(|j| if j == 0 { t.cos() } else { t.sin() })
                })
                .collect()
        } else {
            let mut g = rng(0x5eed);
            (0..n_dirs).map(|_| unit_vector::<N>(&mut g)).collect()
        };
        let points = radii
            .iter()
            .flat_map(|&rad| dirs.iter().map(move |d| d.map(|v| v * rad)))
            .collect();
        FlatGrid { r, points }
    }

    /// 64 angles on ℝ², 200 quasi-random directions on ℝ⁶.
    pub fn standard(r: f64) -> Self {
        if N == 2 {
            Self::new(r, 32, 64)
        } else {
            Self::new(r, 16, 200)
        }
    }
}

/// ‖s‖_{n,k,r} = max over the grid and |a| ≤ n of |x|^{−k}|D^a s(x)|, D^a = ∂^a/a!.
pub fn flat_norm<const N: usize>(s: &FlatTestFunction<N>, n: u32, k: u32, grid: &FlatGrid<N>) -> f64 {
    let mut best = 0.0f64;
    for a in multi_indices::<N>(n) {
        let d = s.derivative(&a);
        let w = factorial_weight(&a);
        for x in &grid.points {
            best = best.max(d.eval_weighted(x, k as f64).abs() / w);
        }
    }
    best
}

/// Flat norm of a point-evaluated function, with derivatives by Richardson
/// central differences. Orders above 2 are refused.
pub fn flat_norm_numeric<const N: usize, F>(s: F, n: u32, k: u32, grid: &FlatGrid<N>) -> Result<f64>
where
    F: Fn(&[f64; N]) -> f64 + Sync,
{
    if n > 2 {
        return Err(Error::NotDifferentiableInput);
    }
    let h0 = 1e-3 * grid.r;
    let d1 = |x: &[f64; N], i: usize, h: f64| {
        let mut p = *x;
        let mut m = *x;
        p[i] += h;
        m[i] -= h;
        (s(&p) - s(&m)) / (2.0 * h)
    };
    let rich1 = |x: &[f64; N], i: usize| (4.0 * d1(x, i, h0 / 2.0) - d1(x, i, h0)) / 3.0;
    let mut best = 0.0f64;
    for x in &grid.points {
        let rr: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rr == 0.0 {
            continue;
        }
        let wk = rr.powi(-(k as i32));
        best = best.max(s(x).abs() * wk);
        if n >= 1 {
            for i in 0..N {
                best = best.max(rich1(x, i).abs() * wk);
            }
        }
        if n >= 2 {
            for i in 0..N {
                for j in i..N {
                    let outer = |h: f64| {
                        let mut pp = *x;
                        pp[j] += h;
                        let mut mm = *x;
                        mm[j] -= h;
                        (rich1(&pp, i) - rich1(&mm, i)) / (2.0 * h)
                    };
                    let v = (4.0 * outer(h0 / 2.0) - outer(h0)) / 3.0;
                    let w = if i == j { 2.0 } else { 1.0 };
                    best = best.max(v.abs() * wk / w);
                }
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SlbResult {
    pub max_ratio: f64,
    pub samples: usize,
    pub skipped: usize,
}

/// max over the family of num(α)/den(α); samples with vanishing denominator
/// are skipped and counted.
pub fn slb_ratio<T, A, B>(family: &[T], num: A, den: B) -> Result<SlbResult>
where
    A: Fn(&T) -> Result<f64>,
    B: Fn(&T) -> Result<f64>,
{
    let mut max_ratio = 0.0f64;
    let mut skipped = 0;
    for a in family {
        let d = den(a)?;
        if d == 0.0 || !d.is_finite() {
            skipped += 1;
            continue;
        }
        max_ratio = max_ratio.max(num(a)? / d);
    }
    if skipped == family.len() {
        return Err(Error::DivisionByZeroNorm);
    }
    Ok(SlbResult { max_ratio, samples: family.len() - skipped, skipped })
}

/// A scalar family: ρ-powers and low-degree polynomial prefactors with decay
/// rates 1/2, 1, 2. `size` members, deterministic.
pub fn scalar_family<const N: usize>(size: usize) -> Vec<FlatTestFunction<N>> {
    let rates = [q(1) / q(2), q(1), q(2)];
    let mut g = rng(0xf1a7);
    (0..size)
        .map(|i| {
            let mut p = Poly::<N>::constant(q(1));
            let deg = i % 3;
            for _ in 0..deg {
                let v = g.gen_range(0..N);
                let c = q(g.gen_range(1..4));
                p = &p * &(Poly::<N>::var(v).scale(&c) + Poly::<N>::constant(q(1)));
            }
            FlatTestFunction::new(rates[i % 3].clone(), p, (i / 3 % 3) as u32)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// The norm ring

/// (a + s·b)/(2s)^k with a, b ∈ ℚ[x, y] and s² = x² + y².
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormRingElem {
    pub a: Poly2,
    pub b: Poly2,
    pub k: u32,
}

fn rho2() -> Poly2 {
    norm_sq::<2>()
}

impl NormRingElem {
    pub fn new(a: Poly2, b: Poly2, k: u32) -> Self {
        NormRingElem { a, b, k }
    }

    pub fn poly(p: Poly2) -> Self {
        Self::new(p, Poly2::zero(), 0)
    }

    pub fn zero() -> Self {
        Self::poly(Poly2::zero())
    }

    pub fn one() -> Self {
        Self::poly(Poly2::one())
    }

    pub fn x() -> Self {
        Self::poly(Poly2::var(0))
    }

    pub fn y() -> Self {
        Self::poly(Poly2::var(1))
    }

    pub fn s() -> Self {
        Self::new(Poly2::zero(), Poly2::one(), 0)
    }

    /// Numerator is zero; 1 and s are independent over ℚ(x, y).
    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    fn num_mul(a: &(Poly2, Poly2), b: &(Poly2, Poly2)) -> (Poly2, Poly2) {
        let aa = &a.0 * &b.0 + &(&a.1 * &b.1) * &rho2();
        let bb = &a.0 * &b.1 + &a.1 * &b.0;
        (aa, bb)
    }

    /// Same element with denominator (2s)^k, k ≥ self.k.
    pub fn raise(&self, k: u32) -> Self {
        assert!(k >= self.k);
        let two_s = (Poly2::zero(), Poly2::constant(q(2)));
        let mut n = (self.a.clone(), self.b.clone());
        for _ in self.k..k {
            n = Self::num_mul(&n, &two_s);
        }
        Self::new(n.0, n.1, k)
    }

    pub fn add(&self, o: &Self) -> Self {
        let k = self.k.max(o.k);
        let (x, y) = (self.raise(k), o.raise(k));
        Self::new(x.a + y.a, x.b + y.b, k)
    }

    pub fn neg(&self) -> Self {
        Self::new(-&self.a, -&self.b, self.k)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = Self::num_mul(&(self.a.clone(), self.b.clone()), &(o.a.clone(), o.b.clone()));
        Self::new(n.0, n.1, self.k + o.k)
    }

    pub fn scale(&self, c: &Q) -> Self {
        Self::new(self.a.scale(c), self.b.scale(c), self.k)
    }

    /// Equality as elements of the localized ring.
    pub fn same(&self, o: &Self) -> bool {
        self.sub(o).is_zero()
    }

    /// ∂ along variable i ∈ {0 = x, 1 = y}, using ∂s = x_i/s.
    pub fn deriv(&self, i: usize) -> Self {
        // N = a + s b, ∂N = (x_i b + s² ∂b + s ∂a)/s = 2M/(2s)
        let xi = Poly2::var(i);
        let m = NormRingElem::new(&xi * &self.b + &rho2() * &self.b.deriv(i), self.a.deriv(i), 0);
        // ∂[N (2s)^{-k}] = 2M (2s)^{-(k+1)} − 4k x_i N (2s)^{-(k+2)}
        let t1 = Self::new(m.a.scale(&q(2)), m.b.scale(&q(2)), self.k + 1);
        let n = Self::new(self.a.clone(), self.b.clone(), self.k + 2);
        let t2 = n.mul(&Self::poly(xi.scale(&q(4 * self.k as i64))));
        t1.sub(&t2)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s = (x * x + y * y).sqrt();
        (self.a.eval(&[x, y]) + s * self.b.eval(&[x, y])) / (2.0 * s).powi(self.k as i32)
    }

    /// Pullback along sq(λ) = λ²: x ↦ λ₁² − λ₂², y ↦ 2λ₁λ₂, s ↦ λ₁² + λ₂².
    /// Returns the numerator; the denominator is (2|λ|²)^k.
    pub fn pull_sq(&self) -> (Poly2, u32) {
        let subs = sq_map();
        let s = rho2();
        (self.a.compose(&subs) + &s * &self.b.compose(&subs), self.k)
    }
}

fn sq_map() -> [Poly2; 2] {
    let l1 = Poly2::var(0);
    let l2 = Poly2::var(1);
    [&l1 * &l1 - &l2 * &l2, (&l1 * &l2).scale(&q(2))]
}

/// y·g₁ + (s + x)·g₂ = 0.
pub fn membership_m(g1: &NormRingElem, g2: &NormRingElem) -> bool {
    let sx = NormRingElem::s().add(&NormRingElem::x());
    NormRingElem::y().mul(g1).add(&sx.mul(g2)).is_zero()
}

/// y·g₁ − (s − x)·g₂ = 0.
pub fn membership_k(g1: &NormRingElem, g2: &NormRingElem) -> bool {
    let sx = NormRingElem::s().sub(&NormRingElem::x());
    NormRingElem::y().mul(g1).sub(&sx.mul(g2)).is_zero()
}

pub type Pair = (NormRingElem, NormRingElem);

/// (p_ℳ(g), p_𝒦(g)), each with one extra factor 1/(2s).
pub fn project_mk(g1: &NormRingElem, g2: &NormRingElem) -> (Pair, Pair) {
    let s = NormRingElem::s();
    let x = NormRingElem::x();
    let y = NormRingElem::y();
    let inv = NormRingElem::new(Poly2::one(), Poly2::zero(), 1);
    let sp = s.add(&x);
    let sm = s.sub(&x);
    let m = (
        inv.mul(&sp.mul(g1).sub(&y.mul(g2))),
        inv.mul(&sm.mul(g2).sub(&y.mul(g1))),
    );
    let k = (
        inv.mul(&sm.mul(g1).add(&y.mul(g2))),
        inv.mul(&y.mul(g1).add(&sp.mul(g2))),
    );
    (m, k)
}

pub fn j_swap(g: &Pair) -> Pair {
    (g.1.neg(), g.0.clone())
}

pub fn pair_same(a: &Pair, b: &Pair) -> bool {
    a.0.same(&b.0) && a.1.same(&b.1)
}

pub fn pair_add(a: &Pair, b: &Pair) -> Pair {
    (a.0.add(&b.0), a.1.add(&b.1))
}

/// Vector field g_x ∂x + g_y ∂y on ℂ with norm-ring coefficients.
pub type RingField = [NormRingElem; 2];

pub fn y_fields() -> (RingField, RingField) {
    let s = NormRingElem::s();
    let x = NormRingElem::x();
    let y = NormRingElem::y();
    ([y.neg(), s.add(&x)], [s.sub(&x), y.neg()])
}

pub fn apply_field(v: &RingField, g: &NormRingElem) -> NormRingElem {
    v[0].mul(&g.deriv(0)).add(&v[1].mul(&g.deriv(1)))
}

pub fn bracket(u: &RingField, v: &RingField) -> RingField {
    std::array::from_fn(|j| apply_field(u, &v[j]).sub(&apply_field(v, &u[j])))
}

fn field_sub(u: &RingField, v: &RingField) -> RingField {
    [u[0].sub(&v[0]), u[1].sub(&v[1])]
}

fn field_scale(g: &NormRingElem, v: &RingField) -> RingField {
    [g.mul(&v[0]), g.mul(&v[1])]
}

#[derive(Clone, Debug)]
pub struct YRelations {
    /// [Y₁,Y₂] − Y₂ as stated.
    pub bracket_residual: RingField,
    /// (s − x)·Y₁ + y·Y₂.
    pub proportionality_residual: RingField,
    /// [Y₁,Y₂] + Y₁, i.e. the bracket read as [Y₂,Y₁] = Y₁.
    pub swapped_residual: RingField,
}

impl YRelations {
    pub fn bracket_holds(&self) -> bool {
        self.bracket_residual.iter().all(|c| c.is_zero())
    }
    pub fn proportionality_holds(&self) -> bool {
        self.proportionality_residual.iter().all(|c| c.is_zero())
    }
    pub fn swapped_holds(&self) -> bool {
        self.swapped_residual.iter().all(|c| c.is_zero())
    }
}

pub fn y_field_relations() -> YRelations {
    let (y1, y2) = y_fields();
    let br = bracket(&y1, &y2);
    let s = NormRingElem::s();
    let x = NormRingElem::x();
    let y = NormRingElem::y();
    let prop = field_scale(&s.sub(&x), &y1);
    let prop = [prop[0].add(&y.mul(&y2[0])), prop[1].add(&y.mul(&y2[1]))];
    YRelations {
        bracket_residual: field_sub(&br, &y2),
        proportionality_residual: prop,
        swapped_residual: [br[0].add(&y1[0]), br[1].add(&y1[1])],
    }
}

/// Numeric [Y₁,Y₂] at (x, y) ≠ 0 by central differences of the closed forms.
pub fn y_bracket_numeric(x: f64, y: f64) -> [f64; 2] {
    let y1 = |x: f64, y: f64| {
        let s = (x * x + y * y).sqrt();
        [-y, s + x]
    };
    let y2 = |x: f64, y: f64| {
        let s = (x * x + y * y).sqrt();
        [s - x, -y]
    };
    let h = 1e-6 * (1.0 + (x * x + y * y).sqrt());
    let d = |f: &dyn Fn(f64, f64) -> [f64; 2], dir: [f64; 2]| -> [f64; 2] {
        let p = f(x + h * dir[0], y + h * dir[1]);
        let m = f(x - h * dir[0], y - h * dir[1]);
        [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
    };
    let a = d(&y2, y1(x, y));
    let b = d(&y1, y2(x, y));
    [a[0] - b[0], a[1] - b[1]]
}

// ---------------------------------------------------------------------------
// Parity decompositions on ℂ

/// σ = −id and τ = conjugation, acting by pullback.
pub fn sigma(g: &Poly2) -> Poly2 {
    g.reflect(&[-1, -1])
}

pub fn tau(g: &Poly2) -> Poly2 {
    g.reflect(&[1, -1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parity {
    pub g0: Poly2,
    pub gx: Poly2,
    pub gy: Poly2,
    pub gxy: Poly2,
}

impl Parity {
    pub fn reconstruct(&self) -> Poly2 {
        let x = Poly2::var(0);
        let y = Poly2::var(1);
        self.g0.clone() + &x * &self.gx + &y * &self.gy + &(&x * &y) * &self.gxy
    }

    pub fn all_invariant(&self) -> bool {
        [&self.g0, &self.gx, &self.gy, &self.gxy].iter().all(|g| sigma(g) == **g && tau(g) == **g)
    }
}

/// g = g₀ + x·g_x + y·g_y + xy·g_xy with all parts σ- and τ-invariant.
pub fn eigenspace_decompose(g: &Poly2) -> Result<Parity> {
    let quarter = Q::one() / q(4);
    let proj = |ss: i64, ts: i64| {
        let a = g.clone() + sigma(g).scale(&q(ss));
        (a.clone() + tau(&a).scale(&q(ts))).scale(&quarter)
    };
    let div = |p: Poly2, e: [u32; 2]| p.div_monomial(&e).ok_or(Error::DivisionFails);
    Ok(Parity {
        g0: proj(1, 1),
        gx: div(proj(-1, 1), [1, 0])?,
        gy: div(proj(-1, -1), [0, 1])?,
        gxy: div(proj(1, -1), [1, 1])?,
    })
}

/// g ∘ sq, sq(λ) = λ².
pub fn sq_transport(g: &Poly2) -> Poly2 {
    g.compose(&sq_map())
}

/// −λ₁·g₁∘sq + λ₂·g₂∘sq, returned as a numerator over (2|λ|²)^k.
pub fn odd_lift(g1: &NormRingElem, g2: &NormRingElem) -> (Poly2, u32) {
    let k = g1.k.max(g2.k);
    let (n1, _) = g1.raise(k).pull_sq();
    let (n2, _) = g2.raise(k).pull_sq();
    (-(&Poly2::var(0) * &n1) + &Poly2::var(1) * &n2, k)
}

/// Random polynomial in two variables with small integer coefficients.
pub fn random_poly2(g: &mut crate::sampling::SweepRng, max_deg: u32, terms: usize) -> Poly2 {
    let mut p = Poly2::zero();
    for _ in 0..terms {
        let d = g.gen_range(0..=max_deg);
        let i = g.gen_range(0..=d);
        let c: i64 = g.gen_range(-5..=5);
        if c != 0 {
            p.add_term([i, d - i], q(c));
        }
    }
    p
}

pub fn random_ring(g: &mut crate::sampling::SweepRng) -> NormRingElem {
    NormRingElem::new(random_poly2(g, 3, 4), random_poly2(g, 2, 3), 0)
}
