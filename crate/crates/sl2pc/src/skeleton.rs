//! The skeleton of normal matrices and its desingularization
//! ρ: S² × ℂ → sl2(C), ρ(w, λ) = λ·(w1, w2, w3) in the z-coordinates.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::exterior::{AltValue, CompiledField};
use crate::flow::{mat_dist, retract};
use crate::frame::singular_frame;
use crate::poisson::phi_form;
use crate::sampling::{unit_vector, SweepRng};
use crate::sl2::{adjoint_action_vec, hopf, skeleton_gap, Mat2, Sl2Point};

pub const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesingPoint {
    pub w: [f64; 3],
    pub lambda: C64,
}

impl DesingPoint {
    pub fn new(w: [f64; 3], lambda: C64) -> Result<Self> {
        let d = DesingPoint { w, lambda };
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<()> {
        let n = norm3(&self.w);
        if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
            return Err(Error::NotUnit(n));
        }
        Ok(())
    }

    /// The ℤ₂ partner (−w, −λ).
    pub fn flip(&self) -> Self {
        DesingPoint { w: self.w.map(|x| -x), lambda: -self.lambda }
    }

    pub fn random(rng: &mut SweepRng, lambda_max: f64) -> Self {
        let w = unit_vector::<3>(rng);
        let l = unit_vector::<2>(rng);
        let r = lambda_max * crate::sampling::uniform(rng, 0.0, 1.0).sqrt();
        DesingPoint { w, lambda: C64::new(r * l[0], r * l[1]) }
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) + a[1] * (b[2] * c[0] - b[0] * c[2])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Image of the complex 3-vector λ·v in the real coordinates (x1, y1, …, y3).
fn embed(lambda: C64, v: &[f64; 3]) -> [f64; 6] {
    let mut o = [0.0; 6];
    for j in 0..3 {
        o[2 * j] = lambda.re * v[j];
        o[2 * j + 1] = lambda.im * v[j];
    }
    o
}

pub fn rho(d: &DesingPoint) -> Result<Sl2Point> {
    d.check()?;
    Ok(Sl2Point::new(embed(d.lambda, &d.w)))
}

/// Orthonormal tangent frame (e_θ, e_φ) of S² at w, oriented so that
/// ω_{S²}(e_θ, e_φ) = 1. Spherical frame about e₃ when |w₃| ≤ 0.9, about e₁ otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct S2Chart {
    pub axis: usize,
    pub e: [[f64; 3]; 2],
}

pub fn s2_chart(w: &[f64; 3]) -> S2Chart {
    let axis = if w[2].abs() <= 0.9 { 2 } else { 0 };
    // cyclic relabelling (a, b, c) with c the polar axis
    let (a, b, c) = ((axis + 1) % 3, (axis + 2) % 3, axis);
    let s = (w[a] * w[a] + w[b] * w[b]).sqrt();
    let mut et = [0.0; 3];
    let mut ep = [0.0; 3];
    et[a] = w[a] * w[c] / s;
    et[b] = w[b] * w[c] / s;
    et[c] = -s;
    ep[a] = -w[b] / s;
    ep[b] = w[a] / s;
    S2Chart { axis, e: [et, ep] }
}

/// ω_{S²} = Σ_cyc w1 dw2∧dw3 on a pair of ambient vectors.
pub fn omega_s2(w: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    w[0] * (a[1] * b[2] - a[2] * b[1]) + w[1] * (a[2] * b[0] - a[0] * b[2])
        + w[2] * (a[0] * b[1] - a[1] * b[0])
}

/// dρ in the chart basis (e_θ, e_φ, ∂λ₁, ∂λ₂) of T(S²×ℂ).
#[derive(Clone, Copy, Debug)]
pub struct RhoJacobian {
    pub chart: S2Chart,
    pub columns: [[f64; 6]; 4],
}

pub fn rho_jacobian(d: &DesingPoint) -> Result<RhoJacobian> {
    d.check()?;
    let chart = s2_chart(&d.w);
    let columns = [
        embed(d.lambda, &chart.e[0]),
        embed(d.lambda, &chart.e[1]),
        embed(C64::new(1.0, 0.0), &d.w),
        embed(C64::new(0.0, 1.0), &d.w),
    ];
    Ok(RhoJacobian { chart, columns })
}

impl RhoJacobian {
    /// Numerical rank: Gaussian elimination with relative pivot threshold.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let mut m: Vec<[f64; 6]> = self.columns.to_vec();
        let scale = m.iter().flat_map(|c| c.iter()).fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return 0;
        }
        let mut rank = 0;
        for col in 0..6 {
            let piv = (rank..m.len()).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()));
            let Some(piv) = piv else { break };
            if m[piv][col].abs() <= rel_tol * scale {
                continue;
            }
            m.swap(piv, rank);
            let p = m[rank];
            for r in rank + 1..m.len() {
                let f = m[r][col] / p[col];
                for c in col..6 {
                    m[r][c] -= f * p[c];
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Value of a chart 2-form on basis slots (i, j) given as a 4×4 antisymmetric table.
fn pullback_table(form: &AltValue, jac: &RhoJacobian) -> [[f64; 4]; 4] {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                t[i][j] = form.eval_on(&[jac.columns[i], jac.columns[j]]);
            }
        }
    }
    t
}

fn phi_compiled() -> &'static CompiledField {
    static CELL: OnceLock<CompiledField> = OnceLock::new();
    CELL.get_or_init(|| phi_form().compile().expect("φ has polynomial coefficients"))
}

/// φ = df₁∧df₂ at a point.
pub fn phi_at(x: &[f64; 6]) -> AltValue {
    phi_compiled().at(x)
}

/// Largest deviation of ρ*φ from 4|λ|² dλ₁∧dλ₂ over all chart slot pairs.
pub fn pullback_identity_phi(d: &DesingPoint) -> Result<f64> {
    let jac = rho_jacobian(d)?;
    let p = rho(d)?;
    let t = pullback_table(&phi_compiled().at(&p.coords), &jac);
    let l2 = d.lambda.norm_sqr();
    let mut res = 0.0f64;
    for (i, row) in t.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expect = match (i, j) {
                (2, 3) => 4.0 * l2,
                (3, 2) => -4.0 * l2,
                _ => 0.0,
            };
            res = res.max((v - expect).abs());
        }
    }
    Ok(res)
}

/// Residuals of ρ*ω̃₁ = −λ₁ω_{S²} and ρ*ω̃₂ = λ₂ω_{S²}, over all chart slot pairs
/// (mixed pairs must vanish as well).
pub fn pullback_identity_omega(d: &DesingPoint) -> Result<(f64, f64)> {
    d.check()?;
    if d.lambda == C64::new(0.0, 0.0) {
        return Err(Error::ConePoint);
    }
    let jac = rho_jacobian(d)?;
    let fr = singular_frame(&rho(d)?)?;
    let area = omega_s2(&d.w, &jac.chart.e[0], &jac.chart.e[1]);
    let coef = [-d.lambda.re, d.lambda.im];
    let mut res = [0.0f64; 2];
    for k in 0..2 {
        let t = pullback_table(&fr.omega[k], &jac);
        for (i, row) in t.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = match (i, j) {
                    (0, 1) => coef[k] * area,
                    (1, 0) => -coef[k] * area,
                    _ => 0.0,
                };
                res[k] = res[k].max((v - expect).abs());
            }
        }
    }
    Ok((res[0], res[1]))
}

/// W₁ = (λ₁∂λ₁ − λ₂∂λ₂)/(2|λ|²), W₂ = (λ₂∂λ₁ + λ₁∂λ₂)/(2|λ|²) as (∂λ₁, ∂λ₂) components.
pub fn w_fields(lambda: C64) -> Result<[[f64; 2]; 2]> {
    let n = 2.0 * lambda.norm_sqr();
    if n == 0.0 {
        return Err(Error::ConePoint);
    }
    Ok([[lambda.re / n, -lambda.im / n], [lambda.im / n, lambda.re / n]])
}

/// Residuals |dρ(W_i) − V_i(ρ)|∞.
pub fn w_fields_related(d: &DesingPoint) -> Result<(f64, f64)> {
    d.check()?;
    let w = w_fields(d.lambda)?;
    let jac = rho_jacobian(d)?;
    let fr = singular_frame(&rho(d)?)?;
    let mut res = [0.0f64; 2];
    for i in 0..2 {
        for c in 0..6 {
            let push = w[i][0] * jac.columns[2][c] + w[i][1] * jac.columns[3][c];
            res[i] = res[i].max((push - fr.v[i][c]).abs());
        }
    }
    Ok((res[0], res[1]))
}

/// Rotation R_U ∈ SO(3) with U·ρ(w,λ)·U* = ρ(R_U w, λ). Column k is the image of e_k;
/// with this convention R_U e₁ = hopf(U).
pub fn rotation_of(u: &Mat2) -> Result<[[f64; 3]; 3]> {
    hopf(u)?;
    let mut r = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut e = [0.0; 6];
        e[2 * k] = 1.0;
        let img = adjoint_action_vec(u, &e);
        for i in 0..3 {
            r[i][k] = img[2 * i];
        }
    }
    Ok(r)
}

pub fn rotate(r: &[[f64; 3]; 3], w: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| r[i][0] * w[0] + r[i][1] * w[1] + r[i][2] * w[2])
}

/// |U ρ(w,λ) U* − ρ(R_U w, λ)|∞.
pub fn equivariance_residual(u: &Mat2, d: &DesingPoint) -> Result<f64> {
    let r = rotation_of(u)?;
    let lhs = Sl2Point::from_matrix(*u * rho(d)?.matrix * u.adjoint());
    let moved = DesingPoint { w: rotate(&r, &d.w), lambda: d.lambda };
    Ok(mat_dist(&lhs, &Sl2Point::new(embed(moved.lambda, &moved.w))))
}

/// |hopf(U) − R_U e₁|∞ and the orthogonality/determinant defect of R_U.
pub fn rotation_convention_check(u: &Mat2) -> Result<(f64, f64)> {
    let r = rotation_of(u)?;
    let h = hopf(u)?;
    let col0 = [r[0][0], r[1][0], r[2][0]];
    let dh = (0..3).map(|i| (h[i] - col0[i]).abs()).fold(0.0, f64::max);
    let mut defect: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let dot: f64 = (0..3).map(|i| r[i][a] * r[i][b]).sum();
            defect = defect.max((dot - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    let cols: [[f64; 3]; 3] = std::array::from_fn(|k| [r[0][k], r[1][k], r[2][k]]);
    defect = defect.max((det3(&cols[0], &cols[1], &cols[2]) - 1.0).abs());
    Ok((dh, defect))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct SkeletonInvariants {
    pub gap: f64,
    pub casimir: f64,
    pub norm: f64,
    pub retract: f64,
    pub z2: f64,
}

/// Pointwise invariants of ρ at d: skeleton gap, f∘ρ − λ², R² − 2|λ|²,
/// r∘ρ − ρ, and ρ(−w,−λ) − ρ(w,λ).
pub fn skeleton_invariants(d: &DesingPoint) -> Result<SkeletonInvariants> {
    let p = rho(d)?;
    Ok(SkeletonInvariants {
        gap: skeleton_gap(&p).abs(),
        casimir: (p.casimir() - d.lambda * d.lambda).norm(),
        norm: (p.r2() - 2.0 * d.lambda.norm_sqr()).abs(),
        retract: mat_dist(&retract(&p), &p),
        z2: mat_dist(&rho(&d.flip())?, &p),
    })
}
