//! Graded calculus on R^6: multivector fields and differential forms with
//! polynomial coefficients, and pointwise alternating tensors.
//!
//! Basis elements are keyed by a bit mask over the coordinates
//! (x1, y1, x2, y2, x3, y3); bit i set means the i-th coordinate appears.
//! Keys are always read in increasing index order.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{q, q_parse, q_to_string, CompiledPoly, Poly6, Q};

pub type Mask = u8;

pub const DIM: usize = 6;
pub const FULL: Mask = 0b11_1111;
pub const LABELS: [&str; 6] = ["x1", "y1", "x2", "y2", "x3", "y3"];

pub fn bit(i: usize) -> Mask {
    1 << i
}

pub fn mask_of(idx: &[usize]) -> Mask {
    idx.iter().fold(0, |m, &i| m | bit(i))
}

pub fn indices(m: Mask) -> Vec<usize> {
    (0..DIM).filter(|&i| m & bit(i) != 0).collect()
}

pub fn degree_of(m: Mask) -> usize {
    m.count_ones() as usize
}

/// All masks of a given cardinality, in increasing numeric order.
pub fn masks_of_degree(k: usize) -> Vec<Mask> {
    (0..=FULL).filter(|m| degree_of(*m) == k).collect()
}

/// Sign of the shuffle sorting (a, b) into a ∪ b; 0 if they overlap.
pub fn merge_sign(a: Mask, b: Mask) -> i32 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0;
    for j in indices(b) {
        inversions += (a >> (j + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Removes the elements of `small` from `big` one at a time, lowest first,
/// each removal contributing (-1)^(number of remaining elements below it).
/// This is the contraction of the basis element `big` by `small` through its
/// first slots.
pub fn contract_sign(small: Mask, big: Mask) -> Option<(i32, Mask)> {
    if small & !big != 0 {
        return None;
    }
    let mut cur = big;
    let mut sign = 1;
    for i in indices(small) {
        let below = (cur & (bit(i) - 1)).count_ones();
        if below % 2 == 1 {
            sign = -sign;
        }
        cur &= !bit(i);
    }
    Some((sign, cur))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Multivector,
    Form,
}

/// Region where a callable coefficient refuses evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SingularLocus {
    None,
    Origin,
    /// The cone f = 0, with a relative tolerance |f| ≤ tol·(1+R²).
    Cone(f64),
}

impl SingularLocus {
    pub fn contains(&self, p: &[f64; 6]) -> bool {
        let r2: f64 = 2.0 * p.iter().map(|v| v * v).sum::<f64>();
        match self {
            SingularLocus::None => false,
            SingularLocus::Origin => r2 == 0.0,
            SingularLocus::Cone(tol) => {
                let pt = crate::sl2::Sl2Point::new(*p);
                pt.casimir().norm() <= tol * (1.0 + r2)
            }
        }
    }

    pub fn check(&self, p: &[f64; 6]) -> Result<()> {
        if !self.contains(p) {
            return Ok(());
        }
        match self {
            SingularLocus::Origin => Err(Error::OriginSingularity),
            _ => Err(Error::OnCone(crate::sl2::Sl2Point::new(*p).casimir().norm())),
        }
    }
}

pub type PointFn = Arc<dyn Fn(&[f64; 6]) -> AltValue + Send + Sync>;

#[derive(Clone)]
pub enum Coeffs {
    Exact(BTreeMap<Mask, Poly6>),
    Numeric { eval: PointFn, locus: SingularLocus },
}

#[derive(Clone)]
pub struct GradedField {
    variance: Variance,
    degree: usize,
    coeffs: Coeffs,
}

impl PartialEq for GradedField {
    fn eq(&self, other: &Self) -> bool {
        match (&self.coeffs, &other.coeffs) {
            (Coeffs::Exact(a), Coeffs::Exact(b)) => {
                self.variance == other.variance
                    && (a == b && (self.degree == other.degree || a.is_empty()))
            }
            _ => false,
        }
    }
}

impl fmt::Debug for GradedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.coeffs {
            Coeffs::Exact(_) => write!(f, "{}", self.to_canonical_text()),
            Coeffs::Numeric { locus, .. } => write!(
                f,
                "GradedField({:?}, degree {}, callable, locus {:?})",
                self.variance, self.degree, locus
            ),
        }
    }
}

impl GradedField {
    pub fn zero(variance: Variance, degree: usize) -> Self {
        GradedField { variance, degree, coeffs: Coeffs::Exact(BTreeMap::new()) }
    }

    pub fn function(g: Poly6, variance: Variance) -> Self {
        let mut f = Self::zero(variance, 0);
        f.add_term(0, g);
        f
    }

    pub fn basis(variance: Variance, idx: &[usize], c: Poly6) -> Self {
        let m = mask_of(idx);
        assert_eq!(degree_of(m), idx.len(), "repeated index");
        let sign = permutation_sign(idx);
        let mut f = Self::zero(variance, idx.len());
        f.add_term(m, if sign < 0 { -c } else { c });
        f
    }

    pub fn from_terms<I>(variance: Variance, degree: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Mask, Poly6)>,
    {
        let mut f = Self::zero(variance, degree);
        for (m, c) in terms {
            assert_eq!(degree_of(m), degree, "key cardinality must match degree");
            f.add_term(m, c);
        }
        f
    }

    pub fn callable(variance: Variance, degree: usize, eval: PointFn, locus: SingularLocus) -> Self {
        GradedField { variance, degree, coeffs: Coeffs::Numeric { eval, locus } }
    }

    fn add_term(&mut self, m: Mask, c: Poly6) {
        if c.is_zero() {
            return;
        }
        if let Coeffs::Exact(map) = &mut self.coeffs {
            let e = map.entry(m).or_default();
            *e += &c;
            if e.is_zero() {
                map.remove(&m);
            }
        }
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coeffs, Coeffs::Exact(_))
    }

    pub fn terms(&self) -> Result<&BTreeMap<Mask, Poly6>> {
        match &self.coeffs {
            Coeffs::Exact(m) => Ok(m),
            Coeffs::Numeric { .. } => Err(Error::NumericCoeff),
        }
    }

    pub fn coeff(&self, m: Mask) -> Poly6 {
        match &self.coeffs {
            Coeffs::Exact(map) => map.get(&m).cloned().unwrap_or_default(),
            Coeffs::Numeric { .. } => Poly6::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.coeffs, Coeffs::Exact(m) if m.is_empty())
    }

    pub fn scale(&self, c: &Q) -> Result<Self> {
        self.map_coeffs(|p| p.scale(c))
    }

    pub fn mul_poly(&self, g: &Poly6) -> Result<Self> {
        self.map_coeffs(|p| p * g)
    }

    fn map_coeffs(&self, f: impl Fn(&Poly6) -> Poly6) -> Result<Self> {
        let t = self.terms()?;
        Ok(Self::from_terms(self.variance, self.degree, t.iter().map(|(m, c)| (*m, f(c)))))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (m, c) in other.terms()? {
            out.add_term(*m, c.clone());
        }
        if let Coeffs::Exact(map) = &out.coeffs {
            if map.is_empty() {
                out.degree = self.degree.max(other.degree);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&q(-1))?)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.variance != other.variance {
            return Err(Error::VarianceMismatch);
        }
        self.terms()?;
        other.terms()?;
        if self.degree != other.degree && !self.is_zero() && !other.is_zero() {
            return Err(Error::CrossCheckFail(format!(
                "adding degree {} to degree {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.variance != other.variance {
            return Err(Error::VarianceMismatch);
        }
        let deg = self.degree + other.degree;
        if deg > DIM {
            return Err(Error::DegreeOverflow(deg));
        }
        let (a, b) = (self.terms()?, other.terms()?);
        let mut out = Self::zero(self.variance, deg);
        for (ma, ca) in a {
            for (mb, cb) in b {
                let s = merge_sign(*ma, *mb);
                if s == 0 {
                    continue;
                }
                let c = ca * cb;
                out.add_term(ma | mb, if s > 0 { c } else { -c });
            }
        }
        Ok(out)
    }

    /// Exterior derivative of a form.
    pub fn ext_deriv(&self) -> Result<Self> {
        if self.variance != Variance::Form {
            return Err(Error::VarianceMismatch);
        }
        let t = self.terms()?;
        if self.degree + 1 > DIM {
            return Err(Error::DegreeOverflow(self.degree + 1));
        }
        let mut out = Self::zero(Variance::Form, self.degree + 1);
        for (m, c) in t {
            for i in 0..DIM {
                let s = merge_sign(bit(i), *m);
                if s == 0 {
                    continue;
                }
                let dc = c.deriv(i);
                out.add_term(m | bit(i), if s > 0 { dc } else { -dc });
            }
        }
        Ok(out)
    }

    /// Contraction of `self` by `other` of the opposite variance, filling the
    /// first slots of `self`. For X = ∂_I, i_X = i_{∂_{i_p}} ∘ … ∘ i_{∂_{i_1}},
    /// so that i_{∂_I} dx_I = 1.
    pub fn contract_by(&self, other: &Self) -> Result<Self> {
        if self.variance == other.variance {
            return Err(Error::VarianceMismatch);
        }
        if other.degree > self.degree {
            return Ok(Self::zero(self.variance, 0));
        }
        let (a, b) = (self.terms()?, other.terms()?);
        let mut out = Self::zero(self.variance, self.degree - other.degree);
        for (mb, cb) in b {
            for (ma, ca) in a {
                if let Some((s, rest)) = contract_sign(*mb, *ma) {
                    let c = ca * cb;
                    out.add_term(rest, if s > 0 { c } else { -c });
                }
            }
        }
        Ok(out)
    }

    pub fn partial(&self, i: usize) -> Result<Self> {
        self.map_coeffs(|p| p.deriv(i))
    }

    /// Evaluates all coefficients at a point.
    pub fn at(&self, p: &[f64; 6]) -> Result<AltValue> {
        match &self.coeffs {
            Coeffs::Exact(map) => {
                let mut v = AltValue::zero(self.variance, self.degree);
                for (m, c) in map {
                    v.c[*m as usize] = c.eval(p);
                }
                Ok(v)
            }
            Coeffs::Numeric { eval, locus } => {
                locus.check(p)?;
                Ok(eval(p))
            }
        }
    }

    pub fn compile(&self) -> Result<CompiledField> {
        Ok(CompiledField {
            variance: self.variance,
            degree: self.degree,
            terms: self.terms()?.iter().map(|(m, c)| (*m, c.compile())).collect(),
        })
    }

    /// Schouten–Nijenhuis bracket of multivector fields.
    ///
    /// Writing a multivector as a polynomial in odd variables θ_i = ∂_i,
    /// [P, Q] = Σ_i (P ∂⃖θ_i)(∂_i Q) − (−1)^{(p−1)(q−1)} (Q ∂⃖θ_i)(∂_i P),
    /// with ∂⃖ the right derivative. On vector fields this is the Lie bracket
    /// and [X, g] = X(g).
    pub fn schouten(&self, other: &Self) -> Result<Self> {
        if self.variance != Variance::Multivector || other.variance != Variance::Multivector {
            return Err(Error::VarianceMismatch);
        }
        let (p, qd) = (self.degree, other.degree);
        if p + qd == 0 {
            return Ok(Self::zero(Variance::Multivector, 0));
        }
        let deg = p + qd - 1;
        if deg > DIM {
            return Err(Error::DegreeOverflow(deg));
        }
        let mut out = Self::zero(Variance::Multivector, deg);
        half_schouten(self.terms()?, other.terms()?, 1, &mut out);
        let sign = if (p + 1) * (qd + 1) % 2 == 0 { 1 } else { -1 };
        // (p-1)(q-1) has the parity of (p+1)(q+1).
        half_schouten(other.terms()?, self.terms()?, -sign, &mut out);
        Ok(out)
    }

    /// Canonical JSON text: sorted keys, exact rationals as "p/q".
    pub fn to_canonical_text(&self) -> String {
        let mut terms: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        if let Coeffs::Exact(map) = &self.coeffs {
            for (m, c) in map {
                let key = if *m == 0 {
                    "1".to_string()
                } else {
                    indices(*m).iter().map(|i| LABELS[*i]).collect::<Vec<_>>().join("^")
                };
                let mut inner = BTreeMap::new();
                for (e, v) in c.terms() {
                    let ek = e.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
                    inner.insert(ek, q_to_string(v));
                }
                terms.insert(key, inner);
            }
        }
        let doc = CanonicalDoc { variance: self.variance, degree: self.degree, terms };
        serde_json::to_string(&doc).expect("canonical serialization")
    }

    pub fn from_canonical_text(s: &str) -> Result<Self> {
        let doc: CanonicalDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let mut out = Self::zero(doc.variance, doc.degree);
        for (key, inner) in doc.terms {
            let m = if key == "1" {
                0
            } else {
                let mut m = 0;
                for l in key.split('^') {
                    let i = LABELS
                        .iter()
                        .position(|x| *x == l)
                        .ok_or_else(|| Error::Parse(format!("unknown label {l}")))?;
                    m |= bit(i);
                }
                m
            };
            if degree_of(m) != doc.degree {
                return Err(Error::Parse(format!("key {key} does not have degree {}", doc.degree)));
            }
            let mut c = Poly6::zero();
            for (ek, v) in inner {
                let parts: Vec<u32> = ek
                    .split(',')
                    .map(|x| x.parse::<u32>().map_err(|e| Error::Parse(e.to_string())))
                    .collect::<Result<_>>()?;
                let e: [u32; 6] = parts
                    .try_into()
                    .map_err(|_| Error::Parse(format!("exponent {ek} needs 6 entries")))?;
                let val = q_parse(&v).ok_or_else(|| Error::Parse(format!("bad rational {v}")))?;
                c.add_term(e, val);
            }
            out.add_term(m, c);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct CanonicalDoc {
    variance: Variance,
    degree: usize,
    terms: BTreeMap<String, BTreeMap<String, String>>,
}

fn half_schouten(
    a: &BTreeMap<Mask, Poly6>,
    b: &BTreeMap<Mask, Poly6>,
    sign: i32,
    out: &mut GradedField,
) {
    for (ma, ca) in a {
        for i in indices(*ma) {
            // right derivative: move θ_i to the end of θ_{ma}
            let after = (ma >> (i + 1)).count_ones();
            let sd = if after % 2 == 0 { 1 } else { -1 };
            let rest = ma & !bit(i);
            for (mb, cb) in b {
                let dcb = cb.deriv(i);
                if dcb.is_zero() {
                    continue;
                }
                let sm = merge_sign(rest, *mb);
                if sm == 0 {
                    continue;
                }
                let c = ca * &dcb;
                out.add_term(rest | mb, if sd * sm * sign > 0 { c } else { -c });
            }
        }
    }
}

fn permutation_sign(idx: &[usize]) -> i32 {
    let mut s = 1;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] > idx[j] {
                s = -s;
            }
        }
    }
    s
}

/// d of a function as a 1-form.
pub fn differential(g: &Poly6) -> GradedField {
    GradedField::function(g.clone(), Variance::Form).ext_deriv().expect("exact function")
}

pub fn vector_field(components: &[Poly6; 6]) -> GradedField {
    GradedField::from_terms(
        Variance::Multivector,
        1,
        components.iter().enumerate().map(|(i, c)| (bit(i), c.clone())),
    )
}

/// Lichnerowicz differential d_π = [π, ·], refusing non-Poisson bivectors.
pub struct Lichnerowicz {
    pi: GradedField,
}

impl Lichnerowicz {
    pub fn new(pi: &GradedField) -> Result<Self> {
        if pi.variance != Variance::Multivector || pi.degree != 2 {
            return Err(Error::VarianceMismatch);
        }
        if !pi.schouten(pi)?.is_zero() {
            return Err(Error::NotPoisson);
        }
        Ok(Lichnerowicz { pi: pi.clone() })
    }

    pub fn apply(&self, p: &GradedField) -> Result<GradedField> {
        self.pi.schouten(p)
    }

    pub fn bivector(&self) -> &GradedField {
        &self.pi
    }
}

pub fn lichnerowicz(pi: &GradedField, p: &GradedField) -> Result<GradedField> {
    Lichnerowicz::new(pi)?.apply(p)
}

/// Poisson bracket {g, h} = π(dg, dh).
pub fn poisson_bracket(pi: &GradedField, g: &Poly6, h: &Poly6) -> Result<Poly6> {
    let v = pi.contract_by(&differential(g))?.contract_by(&differential(h))?;
    Ok(v.coeff(0))
}

/// Float coefficients for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    pub variance: Variance,
    pub degree: usize,
    terms: Vec<(Mask, CompiledPoly<6>)>,
}

impl CompiledField {
    pub fn at(&self, p: &[f64; 6]) -> AltValue {
        let mut v = AltValue::zero(self.variance, self.degree);
        for (m, c) in &self.terms {
            v.c[*m as usize] = c.eval(p);
        }
        v
    }
}

/// Field of the form numer / (R²)^pow with R² = 2 Σ x_i², singular at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalField {
    pub numer: GradedField,
    pub pow: u32,
}

pub fn r2_poly() -> Poly6 {
    crate::poly::norm_sq::<6>().scale(&q(2))
}

impl RationalField {
    pub fn new(numer: GradedField, pow: u32) -> Self {
        RationalField { numer, pow }
    }

    pub fn degree(&self) -> usize {
        self.numer.degree()
    }

    /// Quotient rule: d(N / S^k) = (S·dN − k dS ∧ N) / S^{k+1}.
    pub fn ext_deriv(&self) -> Result<Self> {
        let s = r2_poly();
        let dn = self.numer.ext_deriv()?.mul_poly(&s)?;
        let ds = differential(&s);
        let corr = ds.wedge(&self.numer)?.scale(&q(self.pow as i64))?;
        Ok(RationalField { numer: dn.sub(&corr)?, pow: self.pow + 1 })
    }

    pub fn contract_by(&self, other: &RationalField) -> Result<Self> {
        Ok(RationalField {
            numer: self.numer.contract_by(&other.numer)?,
            pow: self.pow + other.pow,
        })
    }

    pub fn wedge(&self, other: &RationalField) -> Result<Self> {
        Ok(RationalField { numer: self.numer.wedge(&other.numer)?, pow: self.pow + other.pow })
    }

    pub fn at(&self, p: &[f64; 6]) -> Result<AltValue> {
        SingularLocus::Origin.check(p)?;
        let s: f64 = 2.0 * p.iter().map(|v| v * v).sum::<f64>();
        Ok(self.numer.at(p)?.scale(s.powi(-(self.pow as i32))))
    }

    pub fn to_callable(&self) -> Result<GradedField> {
        let comp = self.numer.compile()?;
        let pow = self.pow as i32;
        let eval: PointFn = Arc::new(move |p: &[f64; 6]| {
            let s: f64 = 2.0 * p.iter().map(|v| v * v).sum::<f64>();
            comp.at(p).scale(s.powi(-pow))
        });
        Ok(GradedField::callable(self.numer.variance(), self.numer.degree(), eval, SingularLocus::Origin))
    }
}

/// Alternating tensor at a point: a k-vector or k-covector with dense
/// coefficients indexed by mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AltValue {
    pub variance: Variance,
    pub degree: usize,
    pub c: [f64; 64],
}

impl AltValue {
    pub fn zero(variance: Variance, degree: usize) -> Self {
        AltValue { variance, degree, c: [0.0; 64] }
    }

    pub fn scalar(variance: Variance, v: f64) -> Self {
        let mut a = Self::zero(variance, 0);
        a.c[0] = v;
        a
    }

    pub fn from_vector(variance: Variance, v: &[f64; 6]) -> Self {
        let mut a = Self::zero(variance, 1);
        for i in 0..DIM {
            a.c[bit(i) as usize] = v[i];
        }
        a
    }

    pub fn as_vector(&self) -> [f64; 6] {
        let mut v = [0.0; 6];
        for (i, x) in v.iter_mut().enumerate() {
            *x = self.c[bit(i) as usize];
        }
        v
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let m = mask_of(idx);
        if degree_of(m) != idx.len() {
            return 0.0;
        }
        permutation_sign(idx) as f64 * self.c[m as usize]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut o = *self;
        for x in o.c.iter_mut() {
            *x *= s;
        }
        o
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut o = *self;
        for i in 0..64 {
            o.c[i] += other.c[i];
        }
        o
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut o = Self::zero(self.variance, self.degree + other.degree);
        for ma in masks_of_degree(self.degree) {
            let a = self.c[ma as usize];
            if a == 0.0 {
                continue;
            }
            for mb in masks_of_degree(other.degree) {
                let s = merge_sign(ma, mb);
                if s != 0 {
                    o.c[(ma | mb) as usize] += s as f64 * a * other.c[mb as usize];
                }
            }
        }
        o
    }

    /// Contraction through the first slots, as in `GradedField::contract_by`.
    pub fn contract_by(&self, other: &Self) -> Self {
        if other.degree > self.degree {
            return Self::zero(self.variance, 0);
        }
        let mut o = Self::zero(self.variance, self.degree - other.degree);
        for mb in masks_of_degree(other.degree) {
            let b = other.c[mb as usize];
            if b == 0.0 {
                continue;
            }
            for ma in masks_of_degree(self.degree) {
                if let Some((s, rest)) = contract_sign(mb, ma) {
                    o.c[rest as usize] += s as f64 * b * self.c[ma as usize];
                }
            }
        }
        o
    }

    /// Value on k arguments of the dual variance: Σ_K c_K det[arg_i(K_j)].
    pub fn eval_on(&self, args: &[[f64; 6]]) -> f64 {
        assert_eq!(args.len(), self.degree, "argument count must equal degree");
        let mut s = 0.0;
        for m in masks_of_degree(self.degree) {
            let c = self.c[m as usize];
            if c == 0.0 {
                continue;
            }
            let idx = indices(m);
            s += c * minor(args, &idx);
        }
        s
    }

    /// Image under a linear map L (given as matrix rows L[i][j], acting on
    /// the underlying space), extended as L∧…∧L.
    pub fn push(&self, l: &[[f64; 6]; 6], variance: Variance) -> Self {
        let mut o = Self::zero(variance, self.degree);
        for m in masks_of_degree(self.degree) {
            let c = self.c[m as usize];
            if c == 0.0 {
                continue;
            }
            let cols: Vec<[f64; 6]> = indices(m)
                .iter()
                .map(|&j| {
                    let mut col = [0.0; 6];
                    for (i, x) in col.iter_mut().enumerate() {
                        *x = l[i][j];
                    }
                    col
                })
                .collect();
            for mo in masks_of_degree(self.degree) {
                o.c[mo as usize] += c * minor(&cols, &indices(mo));
            }
        }
        o
    }

    /// Antisymmetric matrix M with value(u, v) = uᵀ M v, for degree 2.
    pub fn as_matrix(&self) -> [[f64; 6]; 6] {
        let mut m = [[0.0; 6]; 6];
        for i in 0..DIM {
            for j in 0..DIM {
                m[i][j] = self.get(&[i, j]);
            }
        }
        m
    }
}

/// det[args_r(idx_s)] for r, s < k.
pub fn minor(args: &[[f64; 6]], idx: &[usize]) -> f64 {
    let k = idx.len();
    match k {
        0 => 1.0,
        1 => args[0][idx[0]],
        2 => args[0][idx[0]] * args[1][idx[1]] - args[0][idx[1]] * args[1][idx[0]],
        _ => {
            let mut a: Vec<Vec<f64>> =
                args.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
            determinant(&mut a)
        }
    }
}

pub fn determinant(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let fct = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= fct * a[col][c];
            }
        }
    }
    det
}

pub fn one() -> Poly6 {
    Poly6::one()
}

pub fn x(i: usize) -> Poly6 {
    Poly6::var(i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dxi(i: usize) -> GradedField {
        GradedField::basis(Variance::Form, &[i], one())
    }

    fn di(i: usize, c: Poly6) -> GradedField {
        GradedField::basis(Variance::Multivector, &[i], c)
    }

    #[test]
    fn wedge_examples() {
        assert!(dxi(0).wedge(&dxi(0)).unwrap().is_zero());
        let a = dxi(0).wedge(&dxi(1)).unwrap();
        let b = dxi(1).wedge(&dxi(0)).unwrap();
        assert_eq!(a, b.scale(&q(-1)).unwrap());
        assert!(matches!(
            dxi(0).wedge(&di(0, one())),
            Err(Error::VarianceMismatch)
        ));
    }

    #[test]
    fn lie_bracket_base_case() {
        let a = di(0, one());
        let b = di(2, x(0));
        assert_eq!(a.schouten(&b).unwrap(), di(2, one()));
        // [X, g] = X(g)
        let g = GradedField::function(x(0).pow(2), Variance::Multivector);
        let xg = a.schouten(&g).unwrap();
        assert_eq!(xg.coeff(0), x(0).scale(&q(2)));
    }

    #[test]
    fn contraction_pairing() {
        let p = GradedField::basis(Variance::Multivector, &[1, 3], one());
        let w = dxi(1).wedge(&dxi(3)).unwrap();
        assert_eq!(w.contract_by(&p).unwrap().coeff(0), one());
        assert_eq!(p.contract_by(&w).unwrap().coeff(0), one());
    }

    #[test]
    fn canonical_text_round_trip() {
        let f = GradedField::basis(Variance::Form, &[4, 1], x(2).scale(&crate::poly::qr(-3, 7)));
        let t = f.to_canonical_text();
        assert_eq!(GradedField::from_canonical_text(&t).unwrap(), f);
        // reordering (y3, y1) -> (y1, y3) flips the sign
        assert!(t.contains("\"3/7\""));
    }

    #[test]
    fn numeric_fields_refuse_exact_ops() {
        let r = RationalField::new(dxi(0), 1).to_callable().unwrap();
        assert!(matches!(r.ext_deriv(), Err(Error::NumericCoeff)));
        assert!(matches!(r.at(&[0.0; 6]), Err(Error::OriginSingularity)));
        assert!(r.at(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn alt_value_eval_matches_wedge() {
        let a = AltValue::from_vector(Variance::Form, &[1.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let b = AltValue::from_vector(Variance::Form, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let u = [1.0, 0.5, -1.0, 2.0, 0.0, 1.0];
        let v = [0.0, 1.0, 3.0, 0.0, 1.0, -2.0];
        let ab = a.wedge(&b);
        let dot = |p: &AltValue, w: &[f64; 6]| p.eval_on(&[*w]);
        let expect = dot(&a, &u) * dot(&b, &v) - dot(&a, &v) * dot(&b, &u);
        assert!((ab.eval_on(&[u, v]) - expect).abs() < 1e-12);
    }
}
