//! Quadrature-defined homotopy operators: h_t along the normalizing flow, its
//! limit h_𝔖 with a certified tail, p_𝔖 = r*, the SU(2) average p_SU(2) with
//! its homotopy h_SU(2), and the δ operator of the bigraded complex.

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{
    bit, degree_of, indices, masks_of_degree, merge_sign, AltValue, CompiledField, GradedField, Mask,
    SingularLocus, Variance,
};
use crate::flat::{slb_ratio, FlatGrid, FlatTestFunction, SlbResult};
use crate::flow::{flow_closed, retract, w_coords};
use crate::frame::{gamma_at, CONE_TOL};
use crate::poly::{q_parse, q_to_f64, Poly, Q};
use crate::sl2::{coords_to_matrix, matrix_to_coords, su2_from_quaternion, Mat2, Sl2Point, I};
use crate::skeleton::{phi_at, rho, rho_jacobian, DesingPoint};

pub type Vec6 = [f64; 6];

// ---------------------------------------------------------------------------
// Forms evaluated pointwise

pub trait NumericForm: Send + Sync {
    fn degree(&self) -> usize;

    /// Coefficients at x (form variance).
    fn at(&self, x: &Vec6) -> Result<AltValue>;

    fn locus(&self) -> SingularLocus {
        SingularLocus::None
    }

    /// Number of spatial derivatives the coefficients tolerate.
    fn derivative_budget(&self) -> u32 {
        0
    }

    /// dα in closed form, when the form knows it.
    fn ext_deriv(&self) -> Option<Arc<dyn NumericForm>> {
        None
    }

    /// sup over 0 < |q|² ≤ rho_max of mass(α(q))·|q|^{−2j}, where mass is the
    /// sum of absolute coefficients. Only forms with certified flat
    /// coefficients provide it.
    fn coefficient_bound(&self, _rho_max: f64, _j: u32) -> Option<f64> {
        None
    }

    fn eval(&self, x: &Vec6, vectors: &[Vec6]) -> Result<f64> {
        if vectors.len() != self.degree() {
            return Err(Error::Parse(format!(
                "form of degree {} fed {} vectors",
                self.degree(),
                vectors.len()
            )));
        }
        self.locus().check(x)?;
        Ok(self.at(x)?.eval_on(vectors))
    }
}

type AtFn = dyn Fn(&Vec6) -> Result<AltValue> + Send + Sync;

/// A form given by a closure.
#[derive(Clone)]
pub struct FnForm {
    pub degree: usize,
    pub f: Arc<AtFn>,
    pub locus: SingularLocus,
    pub budget: u32,
    pub d: Option<Arc<dyn NumericForm>>,
}

impl FnForm {
    pub fn new<F>(degree: usize, f: F) -> Self
    where
        F: Fn(&Vec6) -> Result<AltValue> + Send + Sync + 'static,
    {
        FnForm { degree, f: Arc::new(f), locus: SingularLocus::None, budget: u32::MAX, d: None }
    }

    pub fn with_budget(mut self, budget: u32) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_locus(mut self, locus: SingularLocus) -> Self {
        self.locus = locus;
        self
    }

    pub fn with_deriv(mut self, d: Arc<dyn NumericForm>) -> Self {
        self.d = Some(d);
        self
    }
}

impl NumericForm for FnForm {
    fn degree(&self) -> usize {
        self.degree
    }
    fn at(&self, x: &Vec6) -> Result<AltValue> {
        (self.f)(x)
    }
    fn locus(&self) -> SingularLocus {
        self.locus
    }
    fn derivative_budget(&self) -> u32 {
        self.budget
    }
    fn ext_deriv(&self) -> Option<Arc<dyn NumericForm>> {
        self.d.clone()
    }
}

/// A form with polynomial coefficients; d is exact.
#[derive(Clone)]
pub struct PolyForm {
    field: GradedField,
    compiled: CompiledField,
}

impl PolyForm {
    pub fn new(field: GradedField) -> Result<Self> {
        if field.variance() != Variance::Form {
            return Err(Error::VarianceMismatch);
        }
        let compiled = field.compile()?;
        Ok(PolyForm { field, compiled })
    }

    pub fn field(&self) -> &GradedField {
        &self.field
    }
}

impl NumericForm for PolyForm {
    fn degree(&self) -> usize {
        self.field.degree()
    }
    fn at(&self, x: &Vec6) -> Result<AltValue> {
        Ok(self.compiled.at(x))
    }
    fn derivative_budget(&self) -> u32 {
        u32::MAX
    }
    fn ext_deriv(&self) -> Option<Arc<dyn NumericForm>> {
        let d = self.field.ext_deriv().ok()?;
        Some(Arc::new(PolyForm::new(d).ok()?))
    }
}

/// dx_i as a form.
pub fn dx(i: usize) -> PolyForm {
    PolyForm::new(crate::exterior::differential(&crate::exterior::x(i))).expect("exact 1-form")
}

/// df₁ or df₂.
pub fn df(i: usize) -> PolyForm {
    let (f1, f2) = crate::poisson::casimirs();
    let g = if i == 1 { f1 } else { f2 };
    PolyForm::new(crate::exterior::differential(&g)).expect("exact 1-form")
}

/// φ = df₁∧df₂.
pub fn phi() -> PolyForm {
    PolyForm::new(crate::poisson::phi_form()).expect("exact 2-form")
}

// ---------------------------------------------------------------------------
// Flat forms: Σ_K g_K dx_K, optionally wedged on the left with φ, where every
// g_K is a flat test function exp(−c/ρ)P/ρ^m.

#[derive(Clone, Debug)]
pub struct FlatForm {
    pub name: String,
    pub degree: usize,
    pub phi_factor: bool,
    pub terms: Vec<(Mask, FlatTestFunction<6>)>,
}

#[derive(Deserialize)]
struct MonoSpec {
    exps: [u32; 6],
    coef: String,
}

#[derive(Deserialize)]
struct TermSpec {
    slots: Vec<usize>,
    c: String,
    m: u32,
    poly: Vec<MonoSpec>,
}

#[derive(Deserialize)]
struct FormSpec {
    name: String,
    degree: usize,
    phi_factor: bool,
    terms: Vec<TermSpec>,
}

fn parse_q(s: &str) -> Result<Q> {
    q_parse(s).ok_or_else(|| Error::Parse(format!("bad rational {s:?}")))
}

impl FlatForm {
    pub fn inner_degree(&self) -> usize {
        self.degree - if self.phi_factor { 2 } else { 0 }
    }

    /// Parses a JSON array of form descriptions.
    pub fn parse_family(text: &str) -> Result<Vec<FlatForm>> {
        let specs: Vec<FormSpec> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        specs.into_iter().map(FlatForm::from_spec).collect()
    }

    fn from_spec(s: FormSpec) -> Result<FlatForm> {
        let inner = s.degree.checked_sub(if s.phi_factor { 2 } else { 0 });
        let Some(inner) = inner else {
            return Err(Error::Parse(format!("{}: degree too small for a φ factor", s.name)));
        };
        let mut terms = Vec::new();
        for t in s.terms {
            if t.slots.len() != inner || t.slots.iter().any(|&i| i >= 6) {
                return Err(Error::Parse(format!("{}: bad slots {:?}", s.name, t.slots)));
            }
            let mut mask: Mask = 0;
            let mut sign = 1i64;
            for &i in &t.slots {
                let s2 = merge_sign(mask, bit(i));
                if s2 == 0 {
                    return Err(Error::Parse(format!("{}: repeated slot", s.name)));
                }
                sign *= s2 as i64;
                mask |= bit(i);
            }
            let c = parse_q(&t.c)?;
            if c <= Q::from_integer(0.into()) {
                return Err(Error::Parse(format!("{}: decay rate must be positive", s.name)));
            }
            let mut p = Poly::<6>::zero();
            for mono in &t.poly {
                p.add_term(mono.exps, parse_q(&mono.coef)?);
            }
            let g = FlatTestFunction::new(c, p, t.m);
            let g = if sign < 0 { g.scale(&Q::from_integer((-1).into())) } else { g };
            terms.push((mask, g));
        }
        Ok(FlatForm { name: s.name, degree: s.degree, phi_factor: s.phi_factor, terms })
    }

    /// dα in closed form: d(φ∧β) = φ∧dβ.
    pub fn differential(&self) -> FlatForm {
        let mut terms = Vec::new();
        for (k, g) in &self.terms {
            for i in 0..6 {
                let s = merge_sign(bit(i), *k);
                if s == 0 {
                    continue;
                }
                let d = g.partial(i);
                let d = if s < 0 { d.scale(&Q::from_integer((-1).into())) } else { d };
                if !d.p.is_zero() {
                    terms.push((bit(i) | k, d));
                }
            }
        }
        FlatForm {
            name: format!("d({})", self.name),
            degree: self.degree + 1,
            phi_factor: self.phi_factor,
            terms,
        }
    }
}

/// The five canonical flat 2-forms shipped with the crate.
pub fn canonical_flat_forms() -> &'static [FlatForm] {
    static CELL: OnceLock<Vec<FlatForm>> = OnceLock::new();
    CELL.get_or_init(|| {
        FlatForm::parse_family(include_str!("../data/flat_forms.json"))
            .expect("bundled flat family parses")
    })
}

/// sup over 0 < ρ ≤ ρ_max of ρ^e·exp(−c/ρ).
fn sup_power_exp(e: f64, c: f64, rho_max: f64) -> f64 {
    let rho = if e < 0.0 { rho_max.min(-c / e) } else { rho_max };
    (e * rho.ln() - c / rho).exp()
}

impl NumericForm for FlatForm {
    fn degree(&self) -> usize {
        self.degree
    }

    fn at(&self, x: &Vec6) -> Result<AltValue> {
        let mut v = AltValue::zero(Variance::Form, self.inner_degree());
        for (k, g) in &self.terms {
            v.c[*k as usize] += g.eval(x);
        }
        if self.phi_factor {
            Ok(phi_at(x).wedge(&v))
        } else {
            Ok(v)
        }
    }

    fn derivative_budget(&self) -> u32 {
        u32::MAX
    }

    fn ext_deriv(&self) -> Option<Arc<dyn NumericForm>> {
        Some(Arc::new(self.differential()))
    }

    /// mass(φ) ≤ |df₁|₁|df₂|₁ ≤ 24ρ and |x^a| ≤ ρ^{|a|/2}.
    fn coefficient_bound(&self, rho_max: f64, j: u32) -> Option<f64> {
        let (pf, pe) = if self.phi_factor { (24.0, 1.0) } else { (1.0, 0.0) };
        let mut total = 0.0;
        for (_, g) in &self.terms {
            let c = q_to_f64(&g.c);
            for (a, coef) in g.p.terms() {
                let deg: u32 = a.iter().sum();
                let e = 0.5 * deg as f64 + pe - g.m as f64 - j as f64;
                total += q_to_f64(coef).abs() * sup_power_exp(e, c, rho_max);
            }
        }
        Some(pf * total)
    }
}

// ---------------------------------------------------------------------------
// Quadrature

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AdaptiveSimpson,
    GaussLegendre { order: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::GaussLegendre { order: 10 },
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_subdivisions: 1 << 12,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A fixed list of (node, weight) pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Nodes(pub Vec<(f64, f64)>);

impl Nodes {
    /// `sub` Gauss–Legendre panels of the given order on each [b_i, b_{i+1}].
    pub fn panels(breaks: &[f64], sub: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut out = Vec::new();
        for win in breaks.windows(2) {
            let h = (win[1] - win[0]) / sub as f64;
            for s in 0..sub {
                let a = win[0] + s as f64 * h;
                for (x, w) in gx.iter().zip(&gw) {
                    out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
                }
            }
        }
        Nodes(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ w_i F(s_i) for a vector-valued integrand.
    pub fn integrate<F>(&self, dim: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Result<Vec<f64>> + Sync,
    {
        let parts: Vec<Vec<f64>> = self
            .0
            .par_iter()
            .map(|&(s, w)| f(s).map(|v| v.into_iter().map(|x| w * x).collect()))
            .collect::<Result<_>>()?;
        let mut acc = vec![0.0; dim];
        for p in parts {
            for (a, b) in acc.iter_mut().zip(p) {
                *a += b;
            }
        }
        Ok(acc)
    }
}

/// Breakpoints 0, τ, 2τ, 4τ, … capped at t: the integrands vary on the scale
/// 1/(1+R²) at first and slow down geometrically.
pub fn graded_breaks(t: f64, tau: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    if t <= 0.0 {
        return b;
    }
    let mut s = tau;
    while s < t {
        b.push(s);
        s *= 2.0;
    }
    b.push(t);
    b
}

/// Doubles the panel count per interval until successive vector estimates
/// agree to the spec tolerance; returns the nodes of the finer rule.
pub fn refine_panels<F>(breaks: &[f64], dim: usize, spec: &QuadratureSpec, f: F) -> Result<(Nodes, Vec<f64>, QuadResult)>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let order = match spec.scheme {
        Scheme::GaussLegendre { order } => order,
        Scheme::AdaptiveSimpson => 10,
    };
    let mut sub = 1;
    let mut nodes = Nodes::panels(breaks, sub, order);
    let mut prev = nodes.integrate(dim, &f)?;
    let mut evals = nodes.len();
    loop {
        let sub2 = sub * 2;
        let n2 = Nodes::panels(breaks, sub2, order);
        let cur = n2.integrate(dim, &f)?;
        evals += n2.len();
        let err = prev.iter().zip(&cur).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let scale = cur.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if err <= spec.target(scale) {
            let res = QuadResult { value: cur[0], error: err, evals };
            return Ok((n2, cur, res));
        }
        if sub2 * breaks.len() > spec.max_subdivisions {
            return Err(Error::QuadratureNonconverged { estimate: err, requested: spec.target(scale) });
        }
        sub = sub2;
        nodes = n2;
        prev = cur;
        let _ = &nodes;
    }
}

/// Recursive adaptive Simpson on [a, b].
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    struct St {
        evals: usize,
        err: f64,
        subdivisions: usize,
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> Result<f64>>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        st: &mut St,
        max_sub: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = f(lm)?;
        let frm = f(rm)?;
        st.evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol || st.subdivisions >= max_sub {
            if diff.abs() > 15.0 * tol {
                st.err += diff.abs();
            } else {
                st.err += diff.abs() / 15.0;
            }
            return Ok(left + right + diff / 15.0);
        }
        st.subdivisions += 1;
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, st, max_sub)?
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, st, max_sub)?)
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut st = St { evals: 3, err: 0.0, subdivisions: 0 };
    let tol = spec.abs_tol.max(spec.rel_tol * whole.abs());
    let v = rec(&f, a, b, fa, fm, fb, whole, tol, 50, &mut st, spec.max_subdivisions)?;
    let requested = spec.abs_tol.max(spec.rel_tol * v.abs());
    if st.err > requested {
        return Err(Error::QuadratureNonconverged { estimate: st.err, requested });
    }
    Ok(QuadResult { value: v, error: st.err, evals: st.evals })
}

// ---------------------------------------------------------------------------
// Maps and pullbacks

/// Smooth maps of sl2(ℂ) whose pullbacks are evaluated numerically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Map {
    Flow(f64),
    Retract,
}

/// Relative step of the map Jacobian stencil: h = STEP·(1 + R).
pub const JACOBIAN_STEP: f64 = 1e-5;
/// Relative step of derivatives of quadrature-defined quantities.
pub const OUTER_STEP: f64 = 1e-3;

fn norm6(v: &Vec6) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(x: &Vec6, h: f64, v: &Vec6) -> Vec6 {
    std::array::from_fn(|i| x[i] + h * v[i])
}

fn r_of(x: &Vec6) -> f64 {
    (2.0 * x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn abs_f(x: &Vec6) -> f64 {
    Sl2Point::new(*x).casimir().norm()
}

fn on_cone(x: &Vec6) -> bool {
    SingularLocus::Cone(CONE_TOL).contains(x)
}

impl Map {
    pub fn apply(&self, x: &Vec6) -> Result<Vec6> {
        let p = Sl2Point::new(*x);
        match self {
            Map::Flow(t) => {
                if *t < 0.0 {
                    return Err(Error::Parse("flow time must be non-negative".into()));
                }
                Ok(flow_closed(&p, *t).a_t.coords)
            }
            Map::Retract => {
                if on_cone(x) {
                    return Err(Error::OnCone(abs_f(x)));
                }
                Ok(retract(&p).coords)
            }
        }
    }

    /// d(map)_x(v) by central differences with two-level Richardson extrapolation.
    pub fn push(&self, x: &Vec6, v: &Vec6) -> Result<Vec6> {
        if let Map::Flow(t) = self {
            if *t == 0.0 {
                return Ok(*v);
            }
        }
        let nv = norm6(v);
        if nv == 0.0 {
            return Ok([0.0; 6]);
        }
        let h = JACOBIAN_STEP * (1.0 + r_of(x)) / nv;
        let at = |s: f64| -> Result<Vec6> {
            let y = axpy(x, s, v);
            if *self == Map::Retract && on_cone(&y) {
                return Err(Error::SingularStencil);
            }
            self.apply(&y)
        };
        let d = |h: f64| -> Result<Vec6> {
            let a = at(h)?;
            let b = at(-h)?;
            Ok(std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h)))
        };
        let d1 = d(h)?;
        let d2 = d(0.5 * h)?;
        Ok(std::array::from_fn(|i| (4.0 * d2[i] - d1[i]) / 3.0))
    }

    pub fn jacobian_columns(&self, x: &Vec6) -> Result<[Vec6; 6]> {
        let mut cols = [[0.0; 6]; 6];
        for (i, c) in cols.iter_mut().enumerate() {
            let mut e = [0.0; 6];
            e[i] = 1.0;
            *c = self.push(x, &e)?;
        }
        Ok(cols)
    }
}

fn check_image(form: &dyn NumericForm, y: &Vec6) -> Result<()> {
    if form.locus().contains(y) {
        return Err(Error::SingularStencil);
    }
    Ok(())
}

/// (map*ω)(p; v…) = ω(map(p); dmap(v)…).
pub fn pullback_eval(map: Map, form: &dyn NumericForm, p: &Vec6, vectors: &[Vec6]) -> Result<f64> {
    let y = map.apply(p)?;
    check_image(form, &y)?;
    let pushed: Vec<Vec6> = vectors.iter().map(|v| map.push(p, v)).collect::<Result<_>>()?;
    form.eval(&y, &pushed)
}

/// Coefficients of map*ω at p.
pub fn pullback_at(map: Map, form: &dyn NumericForm, p: &Vec6) -> Result<AltValue> {
    let y = map.apply(p)?;
    check_image(form, &y)?;
    let w = form.at(&y)?;
    let k = form.degree();
    let cols = map.jacobian_columns(p)?;
    let mut o = AltValue::zero(Variance::Form, k);
    for m in masks_of_degree(k) {
        let args: Vec<Vec6> = crate::exterior::indices(m).iter().map(|&i| cols[i]).collect();
        o.c[m as usize] = w.eval_on(&args);
    }
    Ok(o)
}

/// (ρ*ω)(d; u…) with chart vectors u in the basis (e_θ, e_φ, ∂λ₁, ∂λ₂);
/// the Jacobian of ρ is exact.
pub fn pullback_rho(form: &dyn NumericForm, d: &DesingPoint, chart_vectors: &[[f64; 4]]) -> Result<f64> {
    let y = rho(d)?.coords;
    check_image(form, &y)?;
    let jac = rho_jacobian(d)?;
    let pushed: Vec<Vec6> = chart_vectors
        .iter()
        .map(|u| std::array::from_fn(|i| (0..4).map(|k| u[k] * jac.columns[k][i]).sum()))
        .collect();
    form.eval(&y, &pushed)
}

/// map*ω as a form in its own right.
pub struct PullbackForm {
    pub map: Map,
    pub inner: Arc<dyn NumericForm>,
}

impl NumericForm for PullbackForm {
    fn degree(&self) -> usize {
        self.inner.degree()
    }
    fn at(&self, x: &Vec6) -> Result<AltValue> {
        pullback_at(self.map, self.inner.as_ref(), x)
    }
    fn locus(&self) -> SingularLocus {
        match self.map {
            Map::Retract => SingularLocus::Cone(CONE_TOL),
            Map::Flow(_) => self.inner.locus(),
        }
    }
    fn derivative_budget(&self) -> u32 {
        self.inner.derivative_budget().min(4)
    }
}

// ---------------------------------------------------------------------------
// Exterior derivative of a pointwise-evaluated form

/// dβ(p; v₀…v_k) = Σ_i (−1)^i ∂_{v_i}[β(·; v₀…v̂_i…v_k)](p) for a scalar
/// evaluator F(x, vectors), by Richardson-extrapolated central differences.
pub fn ext_deriv_fd<F>(eval: F, p: &Vec6, vectors: &[Vec6], budget: u32) -> Result<f64>
where
    F: Fn(&Vec6, &[Vec6]) -> Result<f64> + Sync,
{
    if budget < 1 {
        return Err(Error::DerivativeBudgetExceeded);
    }
    let terms: Vec<f64> = (0..vectors.len())
        .into_par_iter()
        .map(|i| {
            let rest: Vec<Vec6> =
                vectors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).collect();
            let d = directional_derivative(|x| eval(x, &rest), p, &vectors[i])?;
            Ok(if i % 2 == 0 { d } else { -d })
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

pub fn directional_derivative<F>(f: F, p: &Vec6, v: &Vec6) -> Result<f64>
where
    F: Fn(&Vec6) -> Result<f64>,
{
    let nv = norm6(v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    let h = OUTER_STEP * (1.0 + r_of(p)) / nv;
    let d = |h: f64| -> Result<f64> { Ok((f(&axpy(p, h, v))? - f(&axpy(p, -h, v))?) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

// ---------------------------------------------------------------------------
// h_t along the normalizing flow

/// s ↦ (i_W φ_s*α)(p; v…) = α(φ_s p; W(φ_s p), dφ_s v…).
pub fn h_integrand(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], s: f64) -> Result<f64> {
    if alpha.degree() == 0 {
        return Ok(0.0);
    }
    let map = Map::Flow(s);
    let y = map.apply(p)?;
    check_image(alpha, &y)?;
    let w = w_coords(&Sl2Point::new(y));
    let mut args = Vec::with_capacity(vectors.len() + 1);
    args.push(w);
    for v in vectors {
        args.push(map.push(p, v)?);
    }
    alpha.eval(&y, &args)
}

fn check_vectors(alpha: &dyn NumericForm, vectors: &[Vec6]) -> Result<()> {
    if alpha.degree() == 0 || vectors.len() + 1 != alpha.degree() {
        return Err(Error::Parse(format!(
            "h of a {}-form takes {} vectors, got {}",
            alpha.degree(),
            alpha.degree().saturating_sub(1),
            vectors.len()
        )));
    }
    Ok(())
}

fn time_scale(p: &Vec6) -> f64 {
    1.0 / (1.0 + 2.0 * p.iter().map(|v| v * v).sum::<f64>())
}

/// h_t(α)(p; v…) = ∫₀ᵗ (i_W φ_s*α)(p; v…) ds.
pub fn h_t_op(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], t: f64, q: &QuadratureSpec) -> Result<QuadResult> {
    if t < 0.0 {
        return Err(Error::Parse("t must be non-negative".into()));
    }
    check_vectors(alpha, vectors)?;
    if t == 0.0 {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0 });
    }
    match q.scheme {
        Scheme::AdaptiveSimpson => adaptive_simpson(|s| h_integrand(alpha, p, vectors, s), 0.0, t, q),
        Scheme::GaussLegendre { .. } => {
            let breaks = graded_breaks(t, time_scale(p));
            let (_, _, r) = refine_panels(&breaks, 1, q, |s| Ok(vec![h_integrand(alpha, p, vectors, s)?]))?;
            Ok(r)
        }
    }
}

/// All (v₀…v̂_i…v_k) subsets used by d of a (k)-form evaluated on k+1 vectors.
fn drop_one(vectors: &[Vec6]) -> Vec<Vec<Vec6>> {
    (0..vectors.len())
        .map(|i| vectors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).collect())
        .collect()
}

/// Nodes on [0, t] fine enough for every vector subset at p; frozen so that
/// the finite-difference stencil sees a smooth function of the base point.
fn frozen_nodes(alpha: &dyn NumericForm, p: &Vec6, subsets: &[Vec<Vec6>], t: f64, q: &QuadratureSpec) -> Result<(Nodes, usize)> {
    let breaks = graded_breaks(t, time_scale(p));
    let (nodes, _, r) = refine_panels(&breaks, subsets.len(), q, |s| {
        subsets.iter().map(|vs| h_integrand(alpha, p, vs, s)).collect()
    })?;
    // one extra halving of the panels for the displaced stencil points
    let order = match q.scheme {
        Scheme::GaussLegendre { order } => order,
        Scheme::AdaptiveSimpson => 10,
    };
    let sub = nodes.len() / (order * (breaks.len() - 1));
    Ok((Nodes::panels(&breaks, 2 * sub.max(1), order), r.evals))
}

fn h_with_nodes(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], nodes: &Nodes) -> Result<f64> {
    Ok(nodes.integrate(1, |s| Ok(vec![h_integrand(alpha, p, vectors, s)?]))?[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    /// |φ*α − α − d h α − h dα| at the point.
    pub residual: f64,
    /// the scale (1+R)^{deg+1} the tolerance is multiplied by
    pub scale: f64,
    pub pulled: f64,
    pub evals: usize,
}

impl Residual {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual <= tol * self.scale
    }
}

fn need_d(alpha: &dyn NumericForm) -> Result<Arc<dyn NumericForm>> {
    if alpha.derivative_budget() < 5 {
        return Err(Error::DerivativeBudgetExceeded);
    }
    alpha.ext_deriv().ok_or(Error::NumericCoeff)
}

/// φ_t*α − α − d h_t α − h_t dα at (p; v₁…v_k).
pub fn homotopy_residual_t(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], t: f64, q: &QuadratureSpec) -> Result<Residual> {
    let k = alpha.degree();
    if vectors.len() != k {
        return Err(Error::Parse(format!("{k}-form fed {} vectors", vectors.len())));
    }
    let dalpha = need_d(alpha)?;
    let scale = (1.0 + r_of(p)).powi(k as i32 + 1);
    let base = alpha.eval(p, vectors)?;
    let pulled = pullback_eval(Map::Flow(t), alpha, p, vectors)?;
    if t == 0.0 {
        return Ok(Residual { residual: (pulled - base).abs(), scale, pulled, evals: 0 });
    }
    let mut evals = 0;
    let dh = if k == 0 {
        0.0
    } else {
        let (nodes, e) = frozen_nodes(alpha, p, &drop_one(vectors), t, q)?;
        evals += e;
        let v = ext_deriv_fd(|x, vs| h_with_nodes(alpha, x, vs, &nodes), p, vectors, alpha.derivative_budget())?;
        evals += nodes.len() * 4 * k;
        v
    };
    let hd = h_t_op(dalpha.as_ref(), p, vectors, t, q)?;
    evals += hd.evals;
    Ok(Residual { residual: (pulled - base - dh - hd.value).abs(), scale, pulled, evals })
}

// ---------------------------------------------------------------------------
// h_𝔖 with certified tail truncation

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailBranch {
    /// |f| > 0: exponential decay e^{−2|f|s} of |W| along the flow
    Exponential,
    /// f = 0: R_s² = R²/(1+sR²) and the flat surplus j of the coefficients
    FlatSurplus { j: u32 },
    /// W vanishes at p
    Skeleton,
    /// the coefficient bound underflows to 0 on the ball |q|² ≤ |p|², which
    /// contains the whole flow line
    Vanishing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailCertificate {
    pub branch: TailBranch,
    pub t_trunc: f64,
    /// certified bound on ∫_T^∞ of the integrand
    pub bound: f64,
    /// sampled bound on Π|dφ_s v_i| used in the certificate
    pub push_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SkeletonResult {
    pub value: f64,
    pub quad: QuadResult,
    pub tail: TailCertificate,
    /// |h_{2T} − h_T|, which the certificate bounds by the tail
    pub doubling_diff: f64,
}

/// Largest T the exponential branch accepts.
pub const T_MAX: f64 = 1e7;
/// |f| ≤ CONE_F_TOL·(1+R²) selects the flat-surplus branch.
pub const CONE_F_TOL: f64 = 1e-14;

/// |W(φ_s p)| ≤ x·√((x−a)/2)·e^{−2|f|s} with x = R², a = 2|f|.
pub fn w_decay_bound(x: f64, abs_f: f64, s: f64) -> f64 {
    let a = 2.0 * abs_f;
    x * ((x - a).max(0.0) / 2.0).sqrt() * (-2.0 * abs_f * s).exp()
}

/// Sampled bound on Π_i |dφ_s v_i| over s ≥ 0, with a safety factor 2 per
/// vector. In the f = 0 branch each factor is normalized by (1+sR²)^{1/2}.
fn push_bound(p: &Vec6, vectors: &[Vec6], horizon: f64, cone: bool) -> Result<f64> {
    let x = 2.0 * p.iter().map(|v| v * v).sum::<f64>();
    let mut ss: Vec<f64> = vec![0.0];
    let mut s = time_scale(p) / 8.0;
    while s < horizon {
        ss.push(s);
        s *= 1.5;
    }
    ss.push(horizon);
    let mut total = 1.0;
    for v in vectors {
        let mut m = norm6(v);
        for &s in &ss {
            let pv = norm6(&Map::Flow(s).push(p, v)?);
            let n = if cone { pv / (1.0 + s * x).sqrt() } else { pv };
            m = m.max(n);
        }
        if !cone && !on_cone(p) {
            // the limit map; skipped when its stencil reaches the cone tolerance
            match Map::Retract.push(p, v) {
                Ok(w) => m = m.max(norm6(&w)),
                Err(Error::SingularStencil) => {}
                Err(e) => return Err(e),
            }
        }
        total *= 2.0 * m;
    }
    Ok(total)
}

/// Tail certificate for h_𝔖(α)(p; v…) at tolerance tol (bound ≤ tol/4).
pub fn tail_certificate(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], tol: f64) -> Result<TailCertificate> {
    let pt = Sl2Point::new(*p);
    let x = pt.r2();
    let af = pt.casimir().norm();
    let rho_max = 0.5 * x;
    let unavailable = || Error::TailBoundUnavailable("form has no certified flat coefficient bound".into());
    if alpha.coefficient_bound(rho_max, 0) == Some(0.0) {
        return Ok(TailCertificate { branch: TailBranch::Vanishing, t_trunc: 0.0, bound: 0.0, push_bound: 0.0 });
    }
    if x - 2.0 * af <= 1e-15 * (1.0 + x) {
        alpha.coefficient_bound(rho_max.max(1e-300), 0).ok_or_else(unavailable)?;
        return Ok(TailCertificate { branch: TailBranch::Skeleton, t_trunc: 0.0, bound: 0.0, push_bound: 0.0 });
    }
    if af > CONE_F_TOL * (1.0 + x) {
        let c = alpha.coefficient_bound(rho_max, 0).ok_or_else(unavailable)?;
        // first pass with the horizon 1/|f| to size T, second with the horizon T
        let mut horizon = 1.0 / af;
        let mut t_trunc = 0.0;
        let mut jb = 0.0;
        let mut bound = 0.0;
        for _ in 0..2 {
            jb = push_bound(p, vectors, horizon, false)?;
            let k0 = c * jb * w_decay_bound(x, af, 0.0) / (2.0 * af);
            t_trunc = if k0 <= tol / 4.0 { 0.0 } else { (4.0 * k0 / tol).ln() / (2.0 * af) };
            t_trunc = t_trunc.max(time_scale(p));
            bound = k0 * (-2.0 * af * t_trunc).exp();
            if t_trunc > T_MAX {
                return Err(Error::TailBoundUnavailable(format!("truncation time {t_trunc:e} exceeds {T_MAX:e}")));
            }
            if t_trunc <= horizon {
                break;
            }
            horizon = 2.0 * t_trunc;
        }
        return Ok(TailCertificate { branch: TailBranch::Exponential, t_trunc, bound, push_bound: jb });
    }
    // f = 0: |W_s| = R_s³/(2√2), ρ_s = R_s²/2, |dφ_s v| ≤ J(1+sx)^{1/2} = J(x/R_s²)^{1/2}
    let kv = vectors.len() as f64;
    let mut best: Option<TailCertificate> = None;
    let mut horizon = 1e3 / x;
    for _ in 0..3 {
        let jb = push_bound(p, vectors, horizon, true)?;
        for j in 1..=40u32 {
            let Some(c) = alpha.coefficient_bound(rho_max, j) else {
                return Err(unavailable());
            };
            // integrand ≤ c·2^{−j}·R_s^{2j}·R_s³/(2√2)·jb·x^{kv/2}·R_s^{−kv}
            let m = j as f64 + 1.5 - 0.5 * kv;
            if m <= 1.0 {
                continue;
            }
            let pref = c * 0.5f64.powi(j as i32) / (2.0 * SQRT_2) * jb * x.powf(0.5 * kv);
            // ∫_T^∞ (x/(1+sx))^m ds = x^{m−1}/((m−1)(1+Tx)^{m−1})
            let k0 = pref * x.powf(m - 1.0) / (m - 1.0);
            let t_trunc = if k0 <= tol / 4.0 {
                0.0
            } else {
                ((4.0 * k0 / tol).powf(1.0 / (m - 1.0)) - 1.0) / x
            };
            let t_trunc = t_trunc.max(time_scale(p));
            let bound = k0 / (1.0 + t_trunc * x).powf(m - 1.0);
            let cand = TailCertificate { branch: TailBranch::FlatSurplus { j }, t_trunc, bound, push_bound: jb };
            if best.map_or(true, |b| cand.t_trunc < b.t_trunc) {
                best = Some(cand);
            }
        }
        let b = best.expect("some j gives an integrable bound");
        if b.t_trunc <= horizon {
            return Ok(b);
        }
        horizon = 2.0 * b.t_trunc;
        best = None;
    }
    Err(Error::TailBoundUnavailable("push-forward bound does not stabilize".into()))
}

/// h_𝔖(α)(p; v…) = ∫₀^∞ (i_W φ_s*α)(p; v…) ds.
pub fn h_skeleton(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], tol: f64) -> Result<SkeletonResult> {
    check_vectors(alpha, vectors)?;
    let tail = tail_certificate(alpha, p, vectors, tol)?;
    if matches!(tail.branch, TailBranch::Skeleton | TailBranch::Vanishing) {
        let quad = QuadResult { value: 0.0, error: 0.0, evals: 0 };
        return Ok(SkeletonResult { value: 0.0, quad, tail, doubling_diff: 0.0 });
    }
    let q = QuadratureSpec::default().with_tol(tol / 4.0);
    let quad = h_t_op(alpha, p, vectors, tail.t_trunc, &q)?;
    let doubled = h_t_op(alpha, p, vectors, 2.0 * tail.t_trunc, &q)?;
    let doubling_diff = (doubled.value - quad.value).abs();
    if doubling_diff > 2.0 * tol {
        return Err(Error::CrossCheckFail(format!(
            "h_S changes by {doubling_diff:e} when T doubles (tol {tol:e})"
        )));
    }
    Ok(SkeletonResult { value: quad.value, quad, tail, doubling_diff })
}

/// p_𝔖(α) = r*α at a point off the cone.
pub fn p_skeleton(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6]) -> Result<f64> {
    if on_cone(p) {
        return Err(Error::OnCone(abs_f(p)));
    }
    pullback_eval(Map::Retract, alpha, p, vectors)
}

/// p_𝔖(α) − α − d h_𝔖 α − h_𝔖 dα at (p; v…), with h_𝔖 truncated at a
/// certified T frozen across the stencil.
pub fn homotopy_residual_skeleton(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], tol: f64) -> Result<Residual> {
    if on_cone(p) {
        return Err(Error::OnCone(abs_f(p)));
    }
    let k = alpha.degree();
    if vectors.len() != k || k == 0 {
        return Err(Error::Parse(format!("{k}-form fed {} vectors", vectors.len())));
    }
    let dalpha = need_d(alpha)?;
    let scale = (1.0 + r_of(p)).powi(k as i32 + 1);
    let base = alpha.eval(p, vectors)?;
    let pulled = p_skeleton(alpha, p, vectors)?;
    let inner = tol * 1e-2;
    // the truncation for d h_𝔖 must cover every displaced evaluation: take
    // the longest certificate over the subsets and add a margin for the
    // s-polynomial factors that p-derivatives of the flow bring in
    let subsets = drop_one(vectors);
    let mut t_trunc: f64 = 0.0;
    for vs in &subsets {
        t_trunc = t_trunc.max(tail_certificate(alpha, p, vs, inner)?.t_trunc);
    }
    let t_d = tail_certificate(dalpha.as_ref(), p, vectors, inner)?.t_trunc;
    let t_trunc = 1.5 * t_trunc.max(t_d);
    let q = QuadratureSpec::default().with_tol(inner);
    let (nodes, e) = frozen_nodes(alpha, p, &subsets, t_trunc, &q)?;
    let dh = ext_deriv_fd(|x, vs| h_with_nodes(alpha, x, vs, &nodes), p, vectors, alpha.derivative_budget())?;
    let hd = h_t_op(dalpha.as_ref(), p, vectors, t_trunc, &q)?;
    let evals = e + nodes.len() * 4 * k + hd.evals;
    Ok(Residual { residual: (pulled - base - dh - hd.value).abs(), scale, pulled, evals })
}

// ---------------------------------------------------------------------------
// SU(2) averaging

/// Product rule on S³ ⊂ ℍ in Hopf coordinates q = (cos η e^{iξ₁}, sin η e^{iξ₂}):
/// Gauss–Legendre(n) in u = sin²η, trapezoid(2n+1) in each ξ. Weights sum to 1.
pub fn s3_rule(n: usize) -> Vec<([f64; 4], f64)> {
    let (gx, gw) = gauss_legendre(n);
    let m = 2 * n + 1;
    let mut out = Vec::with_capacity(n * m * m);
    for (x, w) in gx.iter().zip(&gw) {
        let u = 0.5 * (x + 1.0);
        let (c, s) = ((1.0 - u).sqrt(), u.sqrt());
        for a in 0..m {
            let xi1 = 2.0 * PI * a as f64 / m as f64;
            for b in 0..m {
                let xi2 = 2.0 * PI * b as f64 / m as f64;
                let q = [c * xi1.cos(), c * xi1.sin(), s * xi2.cos(), s * xi2.sin()];
                out.push((q, 0.5 * w / (m * m) as f64));
            }
        }
    }
    out
}

/// (Ad_U*α)(p; v…) = α(U p U*; U v U*…).
fn ad_pullback(alpha: &dyn NumericForm, u: &Mat2, p: &Vec6, vectors: &[Vec6]) -> Result<f64> {
    let ad = |v: &Vec6| crate::sl2::adjoint_action_vec(u, v);
    let y = ad(p);
    let vs: Vec<Vec6> = vectors.iter().map(ad).collect();
    alpha.eval(&y, &vs)
}

/// ∫_{SU(2)} (Ad_U*α)(p; v…) dμ(U) with the S³ product rule of strength n.
pub fn p_su2(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], n_quad: usize) -> Result<f64> {
    let rule = s3_rule(n_quad);
    let parts: Vec<f64> = rule
        .par_iter()
        .map(|(q, w)| Ok(w * ad_pullback(alpha, &su2_from_quaternion(q), p, vectors)?))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// Basis e_a = iσ_a/√2 of su(2).
pub fn su2_basis() -> [Mat2; 3] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let s = 1.0 / SQRT_2;
    [
        Mat2::new(o, I, I, o).scale_re(s),
        Mat2::new(o, one, -one, o).scale_re(s),
        Mat2::new(I, o, o, -I).scale_re(s),
    ]
}

pub fn su2_element(a: &[f64; 3]) -> Mat2 {
    let b = su2_basis();
    b[0].scale_re(a[0]) + b[1].scale_re(a[1]) + b[2].scale_re(a[2])
}

/// exp(X) = cos θ + sin θ·X/θ with θ = |X|/√2 (X² = −θ²).
pub fn su2_exp(a: &[f64; 3]) -> Mat2 {
    let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let th = r / SQRT_2;
    let sinc = if th < 1e-8 { 1.0 - th * th / 6.0 } else { th.sin() / th };
    Mat2::identity().scale_re(th.cos()) + su2_element(a).scale_re(sinc)
}

/// Radius of the ball ℐ on which exp is a diffeomorphism onto SU(2)∖{−1}.
pub const BALL_RADIUS: f64 = SQRT_2 * PI;

/// Unnormalized Haar density sin²θ/θ² in exponential coordinates.
pub fn haar_shape(r: f64) -> f64 {
    let th = r / SQRT_2;
    if th < 1e-8 {
        1.0 - th * th / 3.0
    } else {
        (th.sin() / th).powi(2)
    }
}

/// N with ∫_ℐ N·sin²θ/θ² dX = 1, by radial Gauss–Legendre quadrature.
pub fn haar_normalization() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let (gx, gw) = gauss_legendre(40);
        let h = BALL_RADIUS / 2.0;
        let mut s = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let r = h * (x + 1.0);
            s += h * w * 4.0 * PI * r * r * haar_shape(r);
        }
        1.0 / s
    })
}

pub fn haar_density(a: &[f64; 3]) -> f64 {
    haar_normalization() * haar_shape((a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt())
}

/// Quadrature on the ball ℐ: Gauss–Legendre in r, and on S² Gauss–Legendre in
/// cos ϑ times trapezoid in the azimuth. Weights include r² and the Haar density.
pub fn ball_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let (rx, rw) = gauss_legendre(n + 4);
    let (zx, zw) = gauss_legendre(n);
    let m = 2 * n;
    let h = BALL_RADIUS / 2.0;
    let mut out = Vec::new();
    for (x, w) in rx.iter().zip(&rw) {
        let r = h * (x + 1.0);
        let wr = h * w * r * r;
        for (z, wz) in zx.iter().zip(&zw) {
            let st = (1.0 - z * z).sqrt();
            for k in 0..m {
                let ph = 2.0 * PI * k as f64 / m as f64;
                let a = [r * st * ph.cos(), r * st * ph.sin(), r * z];
                out.push((a, wr * wz * 2.0 * PI / m as f64 * haar_density(&a)));
            }
        }
    }
    out
}

/// p_SU(2) computed through (exp, Haar density) on the ball ℐ.
pub fn p_su2_exp(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], n_quad: usize) -> Result<f64> {
    let rule = ball_rule(n_quad);
    let parts: Vec<f64> = rule
        .par_iter()
        .map(|(a, w)| Ok(w * ad_pullback(alpha, &su2_exp(a), p, vectors)?))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

fn commutator_coords(x: &Mat2, p: &Vec6) -> Vec6 {
    matrix_to_coords(&x.commutator(&coords_to_matrix(p)))
}

/// h_SU(2)(α)(p; v…) = ∫_ℐ ∫₀¹ α(Ad_U p; [X, Ad_U p], Ad_U v…) dt λ(X) dX,
/// U = exp(tX).
pub fn h_su2(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], n_quad: usize) -> Result<f64> {
    check_vectors(alpha, vectors)?;
    let rule = ball_rule(n_quad);
    let (tx, tw) = gauss_legendre(n_quad + 2);
    let parts: Vec<f64> = rule
        .par_iter()
        .map(|(a, w)| {
            let xm = su2_element(a);
            let mut acc = 0.0;
            for (t, wt) in tx.iter().zip(&tw) {
                let t = 0.5 * (t + 1.0);
                let u = su2_exp(&a.map(|v| v * t));
                let ad = |v: &Vec6| crate::sl2::adjoint_action_vec(&u, v);
                let y = ad(p);
                let mut args = vec![commutator_coords(&xm, &y)];
                args.extend(vectors.iter().map(ad));
                acc += 0.5 * wt * alpha.eval(&y, &args)?;
            }
            Ok(w * acc)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// p_SU(2)α − α − d h_SU(2)α − h_SU(2)dα at (p; v…).
pub fn homotopy_residual_su2(alpha: &dyn NumericForm, p: &Vec6, vectors: &[Vec6], n_quad: usize) -> Result<Residual> {
    let k = alpha.degree();
    if vectors.len() != k {
        return Err(Error::Parse(format!("{k}-form fed {} vectors", vectors.len())));
    }
    let dalpha = need_d(alpha)?;
    let scale = (1.0 + r_of(p)).powi(k as i32 + 1);
    let base = alpha.eval(p, vectors)?;
    let avg = p_su2(alpha, p, vectors, n_quad)?;
    let dh = if k == 0 {
        0.0
    } else {
        ext_deriv_fd(|x, vs| h_su2(alpha, x, vs, n_quad), p, vectors, alpha.derivative_budget())?
    };
    let hd = h_su2(dalpha.as_ref(), p, vectors, n_quad)?;
    let evals = ball_rule(n_quad).len() * (n_quad + 2) * (4 * k + 1);
    Ok(Residual { residual: (avg - base - dh - hd).abs(), scale, pulled: avg, evals })
}

/// p_SU(2)α as a form.
pub struct AveragedForm {
    pub inner: Arc<dyn NumericForm>,
    pub n_quad: usize,
}

impl NumericForm for AveragedForm {
    fn degree(&self) -> usize {
        self.inner.degree()
    }
    fn at(&self, x: &Vec6) -> Result<AltValue> {
        let k = self.inner.degree();
        let rule = s3_rule(self.n_quad);
        let parts: Vec<AltValue> = rule
            .par_iter()
            .map(|(q, w)| {
                let u = su2_from_quaternion(q);
                let y = crate::sl2::adjoint_action_vec(&u, x);
                let val = self.inner.at(&y)?;
                let cols: [Vec6; 6] = std::array::from_fn(|i| {
                    let mut e = [0.0; 6];
                    e[i] = 1.0;
                    crate::sl2::adjoint_action_vec(&u, &e)
                });
                let mut o = AltValue::zero(Variance::Form, k);
                for m in masks_of_degree(k) {
                    let args: Vec<Vec6> = crate::exterior::indices(m).iter().map(|&i| cols[i]).collect();
                    o.c[m as usize] = w * val.eval_on(&args);
                }
                Ok(o)
            })
            .collect::<Result<_>>()?;
        Ok(parts.iter().fold(AltValue::zero(Variance::Form, k), |a, b| a.add(b)))
    }
    fn locus(&self) -> SingularLocus {
        self.inner.locus()
    }
}

// ---------------------------------------------------------------------------
// δ on forms with values in Λ•ℝ²

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    One,
    E1,
    E2,
    E12,
}

/// η₀ + η₁⊗e₁ + η₂⊗e₂ + η₃⊗e₁∧e₂ at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tagged {
    pub one: AltValue,
    pub e1: AltValue,
    pub e2: AltValue,
    pub e12: AltValue,
}

impl Tagged {
    pub fn zero(p: usize) -> Self {
        let z = AltValue::zero(Variance::Form, p);
        Tagged { one: z, e1: z, e2: z, e12: z }
    }

    pub fn single(tag: Tag, eta: AltValue) -> Self {
        let mut t = Tagged::zero(eta.degree);
        *t.get_mut(tag) = eta;
        t
    }

    pub fn get(&self, tag: Tag) -> &AltValue {
        match tag {
            Tag::One => &self.one,
            Tag::E1 => &self.e1,
            Tag::E2 => &self.e2,
            Tag::E12 => &self.e12,
        }
    }

    pub fn get_mut(&mut self, tag: Tag) -> &mut AltValue {
        match tag {
            Tag::One => &mut self.one,
            Tag::E1 => &mut self.e1,
            Tag::E2 => &mut self.e2,
            Tag::E12 => &mut self.e12,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [self.one, self.e1, self.e2, self.e12].iter().fold(0.0, |a, v| a.max(v.max_abs()))
    }
}

/// δ(η⊗e_i) = (−1)^p γ_i∧η and δ(η⊗e₁∧e₂) = (−1)^p(γ₁∧η⊗e₂ − γ₂∧η⊗e₁);
/// the untagged part has no ℝ² leg and goes to 0. All components of the
/// input are p-forms.
pub fn delta_at(x: &Vec6, eta: &Tagged) -> Result<Tagged> {
    if on_cone(x) {
        return Err(Error::OnCone(abs_f(x)));
    }
    let p = eta.one.degree;
    let g1 = gamma_at(0, x)?;
    let g2 = gamma_at(1, x)?;
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let mut out = Tagged::zero(p + 2);
    out.one = g1.wedge(&eta.e1).add(&g2.wedge(&eta.e2)).scale(sign);
    out.e2 = g1.wedge(&eta.e12).scale(sign);
    out.e1 = g2.wedge(&eta.e12).scale(-sign);
    Ok(out)
}

/// δ(η⊗tag) evaluated on p+2 vectors, one value per output tag.
pub fn delta_op(eta: &dyn NumericForm, tag: Tag, p: &Vec6, vectors: &[Vec6]) -> Result<Vec<(Tag, f64)>> {
    if vectors.len() != eta.degree() + 2 {
        return Err(Error::Parse(format!(
            "δ of a {}-form is evaluated on {} vectors",
            eta.degree(),
            eta.degree() + 2
        )));
    }
    let out = delta_at(p, &Tagged::single(tag, eta.at(p)?))?;
    let tags: &[Tag] = match tag {
        Tag::One => &[],
        Tag::E1 | Tag::E2 => &[Tag::One],
        Tag::E12 => &[Tag::E1, Tag::E2],
    };
    Ok(tags.iter().map(|&t| (t, out.get(t).eval_on(vectors))).collect())
}

// ---------------------------------------------------------------------------
// Flat norms of forms and SLB ratios

/// Relative step for first derivatives inside form flat norms.
pub const FORM_NORM_STEP: f64 = 1e-3;

/// Per-point data of a form on a grid: (|x|, max_K |α_K(x)|, max_{K,i} |∂_i α_K(x)|).
#[derive(Clone, Debug, Default, Serialize)]
pub struct NormProfile {
    pub points: Vec<(f64, f64, f64)>,
}

impl NormProfile {
    /// ‖α‖_{n,k,r}: max over the grid of |x|^{−k} times the order ≤ n data.
    pub fn norm(&self, n: u32, k: f64) -> f64 {
        self.points
            .iter()
            .map(|&(r, v0, v1)| {
                let v = if n >= 1 { v0.max(v1) } else { v0 };
                if v == 0.0 {
                    0.0
                } else {
                    v * r.powf(-k)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Samples a pointwise-evaluated form of the given degree on the grid, with
/// first derivatives (n = 1) by Richardson central differences, step ∝ |x|.
pub fn form_norm_profile<F>(eval: F, degree: usize, n: u32, grid: &FlatGrid<6>) -> Result<NormProfile>
where
    F: Fn(&Vec6, &[Vec6]) -> Result<f64> + Sync,
{
    if n > 1 {
        return Err(Error::NotDifferentiableInput);
    }
    let comps: Vec<Vec<Vec6>> = masks_of_degree(degree)
        .into_iter()
        .map(|m| {
            indices(m)
                .into_iter()
                .map(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let per_point: Vec<Result<(f64, f64, f64)>> = grid
        .points
        .par_iter()
        .map(|x| {
            let rr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rr == 0.0 {
                return Ok((0.0, 0.0, 0.0));
            }
            let h0 = FORM_NORM_STEP * rr;
            let (mut v0, mut v1) = (0.0f64, 0.0f64);
            for vs in &comps {
                v0 = v0.max(eval(x, vs)?.abs());
                if n == 0 {
                    continue;
                }
                for i in 0..6 {
                    let d = |h: f64| -> Result<f64> {
                        let mut a = *x;
                        let mut b = *x;
                        a[i] += h;
                        b[i] -= h;
                        Ok((eval(&a, vs)? - eval(&b, vs)?) / (2.0 * h))
                    };
                    v1 = v1.max(((4.0 * d(h0 / 2.0)? - d(h0)?) / 3.0).abs());
                }
            }
            Ok((rr, v0, v1))
        })
        .collect();
    Ok(NormProfile { points: per_point.into_iter().collect::<Result<_>>()? })
}

/// ‖α‖_{n,k,r} of a pointwise-evaluated form, n ≤ 1.
pub fn form_flat_norm<F>(eval: F, degree: usize, n: u32, k: f64, grid: &FlatGrid<6>) -> Result<f64>
where
    F: Fn(&Vec6, &[Vec6]) -> Result<f64> + Sync,
{
    Ok(form_norm_profile(eval, degree, n, grid)?.norm(n, k))
}

#[derive(Clone, Debug, Serialize)]
pub struct SlbEntry {
    pub n: u32,
    pub k: u32,
    pub result: SlbResult,
}

/// max over the family of ‖h_𝔖α‖_{n,k,r} / ‖α‖_{n+a, k+bn+c, r} for every
/// n ≤ n_max (≤ 1 together with a) and k in `ks`, from one sampling pass per form.
pub fn slb_h_skeleton(
    family: &[FlatForm],
    triple: (u32, u32, u32),
    n_max: u32,
    ks: &[u32],
    grid: &FlatGrid<6>,
    tol: f64,
) -> Result<Vec<SlbEntry>> {
    let (a, b, c) = triple;
    if n_max + a > 1 {
        return Err(Error::NotDifferentiableInput);
    }
    let mut profiles = Vec::with_capacity(family.len());
    for alpha in family {
        let h = |x: &Vec6, v: &[Vec6]| Ok(h_skeleton(alpha, x, v, tol)?.value);
        let num = form_norm_profile(h, alpha.degree - 1, n_max, grid)?;
        let den = form_norm_profile(|x, v| alpha.eval(x, v), alpha.degree, n_max + a, grid)?;
        profiles.push((num, den));
    }
    let mut out = Vec::new();
    for n in 0..=n_max {
        for &k in ks {
            let result = slb_ratio(
                &profiles,
                |(num, _)| Ok(num.norm(n, k as f64)),
                |(_, den)| Ok(den.norm(n + a, (k + b * n + c) as f64)),
            )?;
            out.push(SlbEntry { n, k, result });
        }
    }
    Ok(out)
}

/// Degree of a mask, re-exported for report code.
pub fn mask_degree(m: Mask) -> usize {
    degree_of(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rng, unit_vector, SweepRng};
    use crate::sl2::adjoint_action_vec;

    fn random_point(g: &mut SweepRng, r: f64, min_f: f64) -> Vec6 {
        loop {
            let u = unit_vector::<6>(g);
            let rad = crate::sampling::uniform(g, 0.4, 1.0) * r;
            let x = u.map(|v| v * rad);
            if abs_f(&x) >= min_f {
                return x;
            }
        }
    }

    fn vecs(g: &mut SweepRng, k: usize) -> Vec<Vec6> {
        (0..k).map(|_| unit_vector::<6>(g)).collect()
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(7);
        for k in 0..14 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn adaptive_simpson_integrates_exp() {
        let q = QuadratureSpec { scheme: Scheme::AdaptiveSimpson, ..QuadratureSpec::default() };
        let r = adaptive_simpson(|s| Ok((-s).exp()), 0.0, 3.0, &q).unwrap();
        assert!((r.value - (1.0 - (-3.0f64).exp())).abs() < 1e-9);
        assert!(r.error <= 1e-9);
    }

    #[test]
    fn family_loads_and_is_alternating() {
        let fam = canonical_flat_forms();
        assert_eq!(fam.len(), 5);
        let mut g = rng(1);
        for a in fam {
            assert_eq!(a.degree, 2);
            let x = random_point(&mut g, 1.5, 0.0);
            let v = vecs(&mut g, 2);
            let ab = a.eval(&x, &[v[0], v[1]]).unwrap();
            let ba = a.eval(&x, &[v[1], v[0]]).unwrap();
            assert!((ab + ba).abs() <= 1e-10 * ab.abs().max(1e-300), "{}", a.name);
        }
    }

    #[test]
    fn flat_differential_matches_finite_differences() {
        let mut g = rng(2);
        for a in canonical_flat_forms() {
            let da = a.differential();
            let x = random_point(&mut g, 1.5, 0.0);
            let v = vecs(&mut g, 3);
            let exact = da.eval(&x, &v).unwrap();
            let fd = ext_deriv_fd(|y, vs| a.eval(y, vs), &x, &v, 5).unwrap();
            assert!((exact - fd).abs() < 1e-8, "{}: {exact} vs {fd}", a.name);
            // d² = 0
            let dda = da.differential();
            let w = vecs(&mut g, 4);
            assert!(dda.eval(&x, &w).unwrap().abs() < 1e-10, "{}", a.name);
        }
    }

    #[test]
    fn coefficient_bound_dominates_samples() {
        let mut g = rng(3);
        for a in canonical_flat_forms() {
            for j in [0u32, 2, 5] {
                let rmax = 1.2;
                let b = a.coefficient_bound(rmax, j).unwrap();
                for _ in 0..200 {
                    let x = random_point(&mut g, rmax.sqrt(), 0.0);
                    let rho: f64 = x.iter().map(|v| v * v).sum();
                    let mass: f64 = a.at(&x).unwrap().c.iter().map(|c| c.abs()).sum();
                    assert!(mass / rho.powi(j as i32) <= b * (1.0 + 1e-12), "{} j={j}", a.name);
                }
            }
        }
    }

    #[test]
    fn flow_zero_pullback_is_identity() {
        let mut g = rng(4);
        let a = &canonical_flat_forms()[2];
        let x = random_point(&mut g, 1.5, 0.0);
        let v = vecs(&mut g, 2);
        let pb = pullback_eval(Map::Flow(0.0), a, &x, &v).unwrap();
        assert_eq!(pb, a.eval(&x, &v).unwrap());
    }

    #[test]
    fn df_is_invariant_under_flow_and_retraction() {
        let mut g = rng(5);
        for i in [1, 2] {
            let f = df(i);
            for _ in 0..10 {
                let x = random_point(&mut g, 1.5, 0.1);
                let v = vecs(&mut g, 1);
                let base = f.eval(&x, &v).unwrap();
                let t = crate::sampling::uniform(&mut g, 0.1, 5.0);
                assert!((pullback_eval(Map::Flow(t), &f, &x, &v).unwrap() - base).abs() < 1e-8);
                assert!((pullback_eval(Map::Retract, &f, &x, &v).unwrap() - base).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn retract_refuses_the_cone() {
        let x = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert!(abs_f(&x) < 1e-15);
        assert!(matches!(p_skeleton(&dx(0), &x, &[[1.0, 0., 0., 0., 0., 0.]]), Err(Error::OnCone(_))));
    }

    #[test]
    fn rho_pullback_of_phi() {
        let mut g = rng(6);
        let ph = phi();
        for _ in 0..20 {
            let d = DesingPoint::random(&mut g, 2.0);
            let v = pullback_rho(&ph, &d, &[[0., 0., 1., 0.], [0., 0., 0., 1.]]).unwrap();
            assert!((v - 4.0 * d.lambda.norm_sqr()).abs() < 1e-10 * (1.0 + d.lambda.norm_sqr()));
        }
    }

    #[test]
    fn h_t_trivial_cases() {
        let a = &canonical_flat_forms()[0];
        let q = QuadratureSpec::default();
        let v = [[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]];
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.0];
        assert_eq!(h_t_op(a, &x, &v, 0.0, &q).unwrap().value, 0.0);
        // diag(i, −i) is normal: W = 0 along the whole orbit
        let s = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(h_t_op(a, &s, &v, 3.0, &q).unwrap().value.abs() < 1e-15);
        let sk = h_skeleton(a, &s, &v, 1e-8).unwrap();
        assert_eq!(sk.value, 0.0);
        assert_eq!(sk.tail.branch, TailBranch::Skeleton);
    }

    #[test]
    fn h_t_schemes_agree() {
        let a = &canonical_flat_forms()[1];
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.6];
        let v = [[0.0, 0.6, 0.0, 0.8, 0.0, 0.0]];
        let gl = h_t_op(a, &x, &v, 2.0, &QuadratureSpec::default()).unwrap();
        let q = QuadratureSpec { scheme: Scheme::AdaptiveSimpson, ..QuadratureSpec::default() };
        let si = h_t_op(a, &x, &v, 2.0, &q).unwrap();
        assert!((gl.value - si.value).abs() < 1e-8, "{gl:?} {si:?}");
        assert!(gl.error <= 1e-9);
    }

    #[test]
    fn h_t_output_lies_in_the_phi_ideal() {
        // h_t(φ∧β) vanishes on leaf-tangent vectors π₁♯(dx_j)
        let a = &canonical_flat_forms()[4];
        assert!(a.phi_factor);
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.6];
        let sharp = crate::frame::sharp(&crate::frame::pi_at(0, &x));
        for j in 0..6 {
            let mut e = [0.0; 6];
            e[j] = 1.0;
            let v = crate::frame::mat_vec(&sharp, &e);
            let h = h_t_op(a, &x, &[v], 2.0, &QuadratureSpec::default()).unwrap();
            assert!(h.value.abs() < 1e-8, "j={j}: {}", h.value);
        }
    }

    #[test]
    fn finite_time_identity_on_df_and_dx() {
        let q = QuadratureSpec::default();
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.6];
        let v = [[0.1, 0.2, 0.3, -0.4, 0.5, 0.6]];
        let r = homotopy_residual_t(&df(1), &x, &v, 1.5, &q).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
        let r = homotopy_residual_t(&dx(0), &x, &v, 1.0, &q).unwrap();
        assert!(r.passes(1e-5), "{r:?}");
        let r = homotopy_residual_t(&dx(0), &x, &v, 0.0, &q).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn finite_time_identity_on_flat_family() {
        let q = QuadratureSpec::default();
        let mut g = rng(7);
        for a in canonical_flat_forms() {
            for _ in 0..2 {
                let x = random_point(&mut g, 1.5, 0.0);
                let v = vecs(&mut g, 2);
                let t = crate::sampling::uniform(&mut g, 0.1, 4.0);
                let r = homotopy_residual_t(a, &x, &v, t, &q).unwrap();
                assert!(r.passes(1e-5), "{}: {r:?}", a.name);
            }
        }
    }

    #[test]
    fn w_decay_bound_holds_along_the_flow() {
        let mut g = rng(8);
        for _ in 0..50 {
            let x = random_point(&mut g, 2.0, 0.0);
            let p = Sl2Point::new(x);
            for s in [0.0, 0.3, 1.0, 4.0, 20.0] {
                let y = flow_closed(&p, s).a_t;
                let w = crate::flow::w_norm_sq(&y).sqrt();
                assert!(w <= w_decay_bound(p.r2(), p.casimir().norm(), s) * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn h_skeleton_doubling_and_tail() {
        let x = [0.5, 0.3, -0.4, 0.2, 0.6, -0.1];
        assert!(abs_f(&x) > 0.1);
        let v = [[0.0, 0.6, 0.0, 0.8, 0.0, 0.0]];
        for a in canonical_flat_forms() {
            let r = h_skeleton(a, &x, &v, 1e-7).unwrap();
            assert_eq!(r.tail.branch, TailBranch::Exponential);
            assert!(r.tail.bound < 0.5e-7);
            assert!(r.doubling_diff < 2e-7, "{}: {r:?}", a.name);
            // |h_t − h_𝔖| ≤ tail(t) at the truncation time and past it
            let h2 = h_t_op(a, &x, &v, 4.0 * r.tail.t_trunc, &QuadratureSpec::default().with_tol(1e-10)).unwrap();
            assert!((h2.value - r.value).abs() <= r.tail.bound + 1e-7, "{}", a.name);
        }
    }

    #[test]
    fn h_skeleton_at_a_cone_point_uses_the_flat_branch() {
        // nilpotent point: f = 0, R² = 2
        let x = [0.0, 0.0, 0.5, 0.5, -0.5, 0.5];
        assert!(abs_f(&x) < 1e-15);
        let v = [[0.6, 0.0, 0.0, 0.0, 0.8, 0.0]];
        let a = &canonical_flat_forms()[0];
        let r = h_skeleton(a, &x, &v, 1e-6).unwrap();
        assert!(matches!(r.tail.branch, TailBranch::FlatSurplus { .. }), "{r:?}");
        assert!(r.doubling_diff < 2e-6);
    }

    #[test]
    fn h_skeleton_needs_a_flat_input() {
        let x = [0.5, 0.3, -0.4, 0.2, 0.6, -0.1];
        let v = [[0.0, 0.6, 0.0, 0.8, 0.0, 0.0]];
        let f = FnForm::new(2, |y| Ok(phi_at(y)));
        assert!(matches!(h_skeleton(&f, &x, &v, 1e-6), Err(Error::TailBoundUnavailable(_))));
    }

    #[test]
    fn infinite_time_identity() {
        let tol = 1e-6;
        let mut g = rng(9);
        for a in canonical_flat_forms().iter().take(3) {
            let x = random_point(&mut g, 1.4, 0.25);
            let v = vecs(&mut g, 2);
            let r = homotopy_residual_skeleton(a, &x, &v, tol).unwrap();
            assert!(r.residual <= 5.0 * tol, "{}: {r:?}", a.name);
        }
    }

    #[test]
    fn p_skeleton_fixes_casimir_times_phi() {
        // (1 + f₁² + f₂)·φ
        let alpha = FnForm::new(2, |y| {
            let f = Sl2Point::new(*y).casimir();
            Ok(phi_at(y).scale(1.0 + f.re * f.re + f.im))
        });
        let mut g = rng(10);
        for _ in 0..10 {
            let x = random_point(&mut g, 1.5, 0.1);
            let v = vecs(&mut g, 2);
            let a = alpha.eval(&x, &v).unwrap();
            let b = p_skeleton(&alpha, &x, &v).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn p_skeleton_is_identity_on_the_skeleton_and_idempotent() {
        let a: Arc<dyn NumericForm> = Arc::new(canonical_flat_forms()[3].clone());
        let s = [0.0, 0.0, 0.7, 0.0, 0.0, 0.0];
        let v = [[0.3, 0.1, 0.0, 0.2, 0.4, 0.5], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]];
        let direct = a.eval(&s, &v).unwrap();
        let pulled = p_skeleton(a.as_ref(), &s, &v).unwrap();
        assert!((direct - pulled).abs() < 1e-8 * (1.0 + direct.abs()));
        let once = PullbackForm { map: Map::Retract, inner: a.clone() };
        let mut g = rng(11);
        for _ in 0..10 {
            let x = random_point(&mut g, 1.5, 0.2);
            let v = vecs(&mut g, 2);
            let p1 = p_skeleton(a.as_ref(), &x, &v).unwrap();
            let p2 = p_skeleton(&once, &x, &v).unwrap();
            assert!((p1 - p2).abs() < 1e-7, "{p1} vs {p2}");
        }
    }

    #[test]
    fn p_skeleton_commutes_with_e_phi() {
        let beta: Arc<dyn NumericForm> = Arc::new(dx(2));
        let pb = PullbackForm { map: Map::Retract, inner: beta.clone() };
        let mut g = rng(12);
        for _ in 0..10 {
            let x = random_point(&mut g, 1.5, 0.2);
            let v = vecs(&mut g, 3);
            let wedge = FnForm::new(3, {
                let beta = beta.clone();
                move |y| Ok(phi_at(y).wedge(&beta.at(y)?))
            });
            let lhs = p_skeleton(&wedge, &x, &v).unwrap();
            let rhs = phi_at(&x).wedge(&pb.at(&x).unwrap()).eval_on(&v);
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn s3_rule_integrates_low_moments() {
        let rule = s3_rule(4);
        let tot: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((tot - 1.0).abs() < 1e-14);
        for i in 0..4 {
            let m2: f64 = rule.iter().map(|(q, w)| w * q[i] * q[i]).sum();
            let m4: f64 = rule.iter().map(|(q, w)| w * q[i].powi(4)).sum();
            assert!((m2 - 0.25).abs() < 1e-14);
            // E[q_i⁴] = 1/8 on S³
            assert!((m4 - 0.125).abs() < 1e-14);
        }
    }

    fn cell24() -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for i in 0..4 {
            for s in [-1.0, 1.0] {
                let mut q = [0.0; 4];
                q[i] = s;
                out.push(q);
            }
        }
        for k in 0..16 {
            out.push(std::array::from_fn(|i| if k >> i & 1 == 1 { -0.5 } else { 0.5 }));
        }
        out
    }

    #[test]
    fn p_su2_kills_linear_covectors() {
        let mut g = rng(13);
        for i in 0..6 {
            let x = random_point(&mut g, 1.5, 0.0);
            let v = vecs(&mut g, 1);
            let a = dx(i);
            let v_rule = p_su2(&a, &x, &v, 6).unwrap();
            // 24-cell vertices form a spherical 5-design; the integrand is quadratic in U
            let oracle: f64 = cell24()
                .iter()
                .map(|q| ad_pullback(&a, &su2_from_quaternion(q), &x, &v).unwrap())
                .sum::<f64>()
                / 24.0;
            assert!(oracle.abs() < 1e-14);
            assert!(v_rule.abs() < 1e-12, "{v_rule}");
        }
    }

    #[test]
    fn p_su2_fixes_invariant_forms() {
        let mut g = rng(14);
        for a in [df(1), df(2), phi()] {
            let k = a.degree();
            let x = random_point(&mut g, 1.5, 0.0);
            let v = vecs(&mut g, k);
            let base = a.eval(&x, &v).unwrap();
            let p4 = p_su2(&a, &x, &v, 4).unwrap();
            let p8 = p_su2(&a, &x, &v, 8).unwrap();
            assert!((p4 - base).abs() < 1e-12);
            assert!((p4 - p8).abs() < 1e-10);
        }
    }

    #[test]
    fn haar_normalization_matches_closed_form() {
        let n = haar_normalization();
        assert!((n - 1.0 / (4.0 * SQRT_2 * PI * PI)).abs() < 1e-14 * n);
        let tot: f64 = ball_rule(8).iter().map(|(_, w)| w).sum();
        assert!((tot - 1.0).abs() < 1e-12, "{tot}");
    }

    #[test]
    fn su2_exp_matches_series() {
        let a = [0.7, -1.1, 0.4];
        let x = su2_element(&a);
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for k in 1..40 {
            term = (term * x).scale_re(1.0 / k as f64);
            sum = sum + term;
        }
        assert!((sum - su2_exp(&a)).max_abs() < 1e-13);
        assert!(crate::sl2::su2_defect(&su2_exp(&a)) < 1e-13);
        // the boundary sphere of ℐ maps to −1
        let e = su2_exp(&[0.0, 0.0, BALL_RADIUS]);
        assert!((e + Mat2::identity()).max_abs() < 1e-12);
    }

    #[test]
    fn exp_route_agrees_with_s3_route() {
        let mut g = rng(15);
        for a in canonical_flat_forms() {
            let x = random_point(&mut g, 1.5, 0.0);
            let v = vecs(&mut g, 2);
            let s3 = p_su2(a, &x, &v, 8).unwrap();
            let ex = p_su2_exp(a, &x, &v, 12).unwrap();
            assert!((s3 - ex).abs() < 1e-6, "{}: {s3} vs {ex}", a.name);
        }
    }

    #[test]
    fn su2_identity_on_dx_and_flat_forms() {
        let mut g = rng(16);
        let x = random_point(&mut g, 1.5, 0.0);
        let v = vecs(&mut g, 1);
        let r = homotopy_residual_su2(&dx(0), &x, &v, 8).unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
        let r = homotopy_residual_su2(&df(1), &x, &v, 8).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        let a = &canonical_flat_forms()[3];
        let v = vecs(&mut g, 2);
        let r = homotopy_residual_su2(a, &x, &v, 8).unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
    }

    #[test]
    fn p_su2_commutes_with_p_skeleton() {
        let a: Arc<dyn NumericForm> = Arc::new(canonical_flat_forms()[2].clone());
        let ps: Arc<dyn NumericForm> = Arc::new(PullbackForm { map: Map::Retract, inner: a.clone() });
        let pa: Arc<dyn NumericForm> = Arc::new(AveragedForm { inner: a.clone(), n_quad: 6 });
        let mut g = rng(17);
        for _ in 0..3 {
            let x = random_point(&mut g, 1.5, 0.2);
            let v = vecs(&mut g, 2);
            let lhs = p_su2(ps.as_ref(), &x, &v, 6).unwrap();
            let rhs = p_skeleton(pa.as_ref(), &x, &v).unwrap();
            assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn retraction_is_equivariant_pointwise() {
        let mut g = rng(18);
        let x = random_point(&mut g, 1.5, 0.2);
        let u = crate::sampling::su2(&mut g);
        let a = Map::Retract.apply(&adjoint_action_vec(&u, &x)).unwrap();
        let b = adjoint_action_vec(&u, &Map::Retract.apply(&x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn delta_cases_and_square() {
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.6];
        let eta = phi_at(&x);
        let g1 = gamma_at(0, &x).unwrap();
        let g2 = gamma_at(1, &x).unwrap();
        assert_eq!(g1.degree, 2);
        let d = delta_at(&x, &Tagged::single(Tag::E12, eta)).unwrap();
        assert!(d.e2.sub(&g1.wedge(&eta)).max_abs() < 1e-14);
        assert!(d.e1.add(&g2.wedge(&eta)).max_abs() < 1e-14);
        assert_eq!(d.one.max_abs(), 0.0);
        let d1 = delta_at(&x, &Tagged::single(Tag::E1, eta)).unwrap();
        assert!(d1.one.sub(&g1.wedge(&eta)).max_abs() < 1e-14);
        let d0 = delta_at(&x, &Tagged::single(Tag::One, eta)).unwrap();
        assert_eq!(d0.max_abs(), 0.0);
        // odd degree flips the sign
        let e1 = AltValue::from_vector(Variance::Form, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = delta_at(&x, &Tagged::single(Tag::E2, e1)).unwrap();
        assert!(d.one.add(&g2.wedge(&e1)).max_abs() < 1e-14);
        let mut g = rng(19);
        for _ in 0..20 {
            let y = random_point(&mut g, 1.5, 0.1);
            let mut t = Tagged::zero(1);
            for tag in [Tag::One, Tag::E1, Tag::E2, Tag::E12] {
                *t.get_mut(tag) = AltValue::from_vector(Variance::Form, &unit_vector::<6>(&mut g));
            }
            let dd = delta_at(&y, &delta_at(&y, &t).unwrap()).unwrap();
            assert!(dd.max_abs() < 1e-10 * (1.0 + delta_at(&y, &t).unwrap().max_abs()));
        }
    }

    #[test]
    fn delta_op_on_vectors() {
        let a = &canonical_flat_forms()[4];
        let x = [0.3, 0.1, -0.5, 0.2, 0.4, 0.6];
        let mut g = rng(20);
        let v = vecs(&mut g, 4);
        assert!(delta_op(a, Tag::One, &x, &v).unwrap().is_empty());
        let out = delta_op(a, Tag::E12, &x, &v).unwrap();
        let eta = a.at(&x).unwrap();
        let g2 = gamma_at(1, &x).unwrap();
        assert_eq!(out[0].0, Tag::E1);
        assert!((out[0].1 + g2.wedge(&eta).eval_on(&v)).abs() < 1e-12);
    }

    #[test]
    fn vanishing_branch_near_origin() {
        let a = &canonical_flat_forms()[0];
        let mut g = rng(21);
        let x = unit_vector::<6>(&mut g).map(|v| v * 1e-3);
        let v = vecs(&mut g, 2);
        let cert = tail_certificate(a, &x, &v, 1e-8).unwrap();
        assert_eq!(cert.branch, TailBranch::Vanishing);
        assert_eq!(h_skeleton(a, &x, &v[..1], 1e-8).unwrap().value, 0.0);
        assert_eq!(a.eval(&x, &v).unwrap(), 0.0);
    }

    #[test]
    fn form_flat_norm_of_polynomial_forms() {
        let grid = FlatGrid::<6>::new(1.0, 4, 5);
        // x·dx: components x_i, first derivatives δ_ij
        let radial = |x: &Vec6, v: &[Vec6]| Ok((0..6).map(|i| x[i] * v[0][i]).sum::<f64>());
        let direct = grid.points.iter().map(|x| x.iter().fold(0.0f64, |m, c| m.max(c.abs()))).fold(0.0, f64::max);
        assert!((form_flat_norm(radial, 1, 0, 0.0, &grid).unwrap() - direct).abs() < 1e-15);
        assert!((form_flat_norm(radial, 1, 1, 0.0, &grid).unwrap() - 1.0).abs() < 1e-9);
        let rmin = grid.points.iter().map(|x| norm6(x)).fold(f64::INFINITY, f64::min);
        let n11 = form_flat_norm(radial, 1, 1, 1.0, &grid).unwrap();
        assert!((n11 - 1.0 / rmin).abs() < 1e-6 / rmin);
        // x1² dx2 ∧ dx3: ∂_1 = 2x1, exact under central differences
        let quad = |x: &Vec6, v: &[Vec6]| Ok(x[0] * x[0] * (v[0][1] * v[1][2] - v[0][2] * v[1][1]));
        let d = grid.points.iter().map(|x| (2.0 * x[0]).abs().max(x[0] * x[0])).fold(0.0, f64::max);
        assert!((form_flat_norm(quad, 2, 1, 0.0, &grid).unwrap() - d).abs() < 1e-9);
        assert!(matches!(form_flat_norm(quad, 2, 2, 0.0, &grid), Err(Error::NotDifferentiableInput)));
    }

    #[test]
    fn slb_h_skeleton_small_grid() {
        let grid = FlatGrid::<6>::new(1.0, 1, 1);
        let fam = &canonical_flat_forms()[..2];
        let out = slb_h_skeleton(fam, (0, 5, 35), 0, &[0, 2], &grid, 1e-6).unwrap();
        assert_eq!(out.len(), 2);
        for e in &out {
            assert_eq!(e.n, 0);
            assert!(e.result.max_ratio.is_finite() && e.result.max_ratio >= 0.0);
        }
        assert!(slb_h_skeleton(fam, (1, 5, 35), 1, &[0], &grid, 1e-6).is_err());
    }
}
