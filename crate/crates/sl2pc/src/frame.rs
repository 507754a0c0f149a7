//! The singular frame away from the origin: normal fields V_i, the extended
//! leafwise forms ω̃_i, their variations γ_i = i_{V_i} dω̃_1, and the pointwise
//! bigraded splitting of multivectors.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::exterior::{
    bit, indices, masks_of_degree, merge_sign, AltValue, CompiledField, GradedField, Mask,
    RationalField, Variance,
};
use crate::poisson::{poisson_bivectors, xv, yv};
use crate::poly::{q, Poly6};
use crate::sl2::Sl2Point;

/// Relative cone tolerance used by the pointwise splitting: |f| ≤ tol·(1+R²).
pub const CONE_TOL: f64 = 1e-9;

pub struct FrameFields {
    pub v: [RationalField; 2],
    pub omega: [RationalField; 2],
    pub d_omega1: RationalField,
    pub gamma: [RationalField; 2],
    compiled: Compiled,
}

struct Compiled {
    v: [CompiledField; 2],
    omega: [CompiledField; 2],
    gamma: [CompiledField; 2],
    pi: [CompiledField; 2],
    pow: [u32; 3],
}

fn two_form(terms: &[(usize, usize, Poly6)]) -> GradedField {
    let mut acc = GradedField::zero(Variance::Form, 2);
    for (a, b, c) in terms {
        acc = acc.add(&GradedField::basis(Variance::Form, &[*a, *b], c.clone())).unwrap();
    }
    acc
}

fn build() -> FrameFields {
    let mut v1 = GradedField::zero(Variance::Multivector, 1);
    let mut v2 = GradedField::zero(Variance::Multivector, 1);
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    for j in 0..3 {
        let (xi, yi) = (2 * j, 2 * j + 1);
        v1 = v1
            .add(&GradedField::from_terms(Variance::Multivector, 1, [(bit(xi), xv(j)), (bit(yi), -yv(j))]))
            .unwrap();
        v2 = v2
            .add(&GradedField::from_terms(Variance::Multivector, 1, [(bit(yi), xv(j)), (bit(xi), yv(j))]))
            .unwrap();
        let (a, b) = ((j + 1) % 3, (j + 2) % 3);
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        let two = |p: Poly6| p.scale(&q(2));
        // x1 (dy2∧dy3 − dx2∧dx3) − y1 (dx2∧dy3 + dy2∧dx3), and cyclic
        w1.push((ya, yb, two(xv(j))));
        w1.push((xa, xb, two(-xv(j))));
        w1.push((xa, yb, two(-yv(j))));
        w1.push((ya, xb, two(-yv(j))));
        // y1 (dy2∧dy3 − dx2∧dx3) + x1 (dx2∧dy3 + dy2∧dx3), and cyclic
        w2.push((ya, yb, two(yv(j))));
        w2.push((xa, xb, two(-yv(j))));
        w2.push((xa, yb, two(xv(j))));
        w2.push((ya, xb, two(xv(j))));
    }
    let v = [RationalField::new(v1, 1), RationalField::new(v2, 1)];
    let omega = [RationalField::new(two_form(&w1), 1), RationalField::new(two_form(&w2), 1)];
    let d_omega1 = omega[0].ext_deriv().unwrap();
    let gamma = [
        d_omega1.contract_by(&v[0]).unwrap(),
        d_omega1.contract_by(&v[1]).unwrap(),
    ];
    let pb = poisson_bivectors();
    let compiled = Compiled {
        v: [v[0].numer.compile().unwrap(), v[1].numer.compile().unwrap()],
        omega: [omega[0].numer.compile().unwrap(), omega[1].numer.compile().unwrap()],
        gamma: [gamma[0].numer.compile().unwrap(), gamma[1].numer.compile().unwrap()],
        pi: [pb.pi1.compile().unwrap(), pb.pi2.compile().unwrap()],
        pow: [v[0].pow, omega[0].pow, gamma[0].pow],
    };
    FrameFields { v, omega, d_omega1, gamma, compiled }
}

pub fn frame_fields() -> &'static FrameFields {
    static CELL: OnceLock<FrameFields> = OnceLock::new();
    CELL.get_or_init(build)
}

#[derive(Clone, Copy, Debug)]
pub struct SingularFrame {
    pub v: [[f64; 6]; 2],
    pub omega: [AltValue; 2],
    pub gamma: [AltValue; 2],
}

/// Evaluates V_i, ω̃_i and γ_i at a point away from the origin.
pub fn singular_frame(p: &Sl2Point) -> Result<SingularFrame> {
    if p.is_origin() {
        return Err(Error::OriginSingularity);
    }
    let c = &frame_fields().compiled;
    let s = p.r2();
    let inv = |k: u32| s.powi(-(k as i32));
    let x = &p.coords;
    Ok(SingularFrame {
        v: [
            c.v[0].at(x).scale(inv(c.pow[0])).as_vector(),
            c.v[1].at(x).scale(inv(c.pow[0])).as_vector(),
        ],
        omega: [c.omega[0].at(x).scale(inv(c.pow[1])), c.omega[1].at(x).scale(inv(c.pow[1]))],
        gamma: [c.gamma[0].at(x).scale(inv(c.pow[2])), c.gamma[1].at(x).scale(inv(c.pow[2]))],
    })
}

/// γ_i at a point (no cone restriction; singular only at 0).
pub fn gamma_at(i: usize, x: &[f64; 6]) -> Result<AltValue> {
    let s: f64 = 2.0 * x.iter().map(|v| v * v).sum::<f64>();
    if s == 0.0 {
        return Err(Error::OriginSingularity);
    }
    let c = &frame_fields().compiled;
    Ok(c.gamma[i].at(x).scale(s.powi(-(c.pow[2] as i32))))
}

pub fn pi_at(i: usize, x: &[f64; 6]) -> AltValue {
    frame_fields().compiled.pi[i].at(x)
}

pub type Mat6 = [[f64; 6]; 6];

pub fn mat_mul(a: &Mat6, b: &Mat6) -> Mat6 {
    let mut r = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            r[i][j] = (0..6).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

pub fn transpose(a: &Mat6) -> Mat6 {
    let mut r = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            r[i][j] = a[j][i];
        }
    }
    r
}

pub fn mat_vec(a: &Mat6, v: &[f64; 6]) -> [f64; 6] {
    let mut r = [0.0; 6];
    for i in 0..6 {
        r[i] = (0..6).map(|k| a[i][k] * v[k]).sum();
    }
    r
}

/// π♯: ξ ↦ π(ξ, ·), as a matrix acting on covector components.
pub fn sharp(pi: &AltValue) -> Mat6 {
    transpose(&pi.as_matrix())
}

/// ω♭: v ↦ ω(v, ·), as a matrix acting on vector components.
pub fn flat(omega: &AltValue) -> Mat6 {
    transpose(&omega.as_matrix())
}

/// Pointwise splitting of a k-vector into bidegrees (p, q): p slots along the
/// leaf (covectors projected by σ∘π♯) and q slots normal (projected by
/// κ = id − σ∘π♯ onto span(df1, df2)).
#[derive(Clone, Debug)]
pub struct BigradedSplit {
    pub components: BTreeMap<(usize, usize), AltValue>,
}

impl BigradedSplit {
    pub fn reconstruct(&self, degree: usize) -> AltValue {
        self.components
            .values()
            .fold(AltValue::zero(Variance::Multivector, degree), |a, b| a.add(b))
    }

    pub fn nonzero_bidegrees(&self, tol: f64) -> Vec<(usize, usize)> {
        self.components
            .iter()
            .filter(|(_, v)| v.max_abs() > tol)
            .map(|(k, _)| *k)
            .collect()
    }
}

/// The leaf projector σ∘π1♯ on covectors at p.
pub fn leaf_projector(p: &Sl2Point) -> Result<Mat6> {
    let fr = singular_frame(p)?;
    let pi = pi_at(0, &p.coords);
    Ok(mat_mul(&flat(&fr.omega[0]), &sharp(&pi)))
}

pub fn bigrade_split(x: &AltValue, p: &Sl2Point) -> Result<BigradedSplit> {
    if p.is_origin() {
        return Err(Error::OriginSingularity);
    }
    let f = p.casimir().norm();
    if f <= CONE_TOL * (1.0 + p.r2()) {
        return Err(Error::OnCone(f));
    }
    let p1 = leaf_projector(p)?;
    let mut p2 = p1;
    for (i, row) in p2.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { 0.0 } - *v;
        }
    }
    let k = x.degree;
    let unit = |i: usize| {
        let mut e = [0.0; 6];
        e[i] = 1.0;
        e
    };
    let mut components = BTreeMap::new();
    for pd in 0..=k {
        let mut comp = AltValue::zero(Variance::Multivector, k);
        for m in masks_of_degree(k) {
            let idx = indices(m);
            let mut val = 0.0;
            for s in masks_of_degree(pd).into_iter().filter(|s| (*s as usize) < (1 << k)) {
                let rest: Mask = (((1u16 << k) - 1) as Mask) & !s;
                let sign = merge_sign(s, rest) as f64;
                let mut args = Vec::with_capacity(k);
                for pos in indices(s) {
                    args.push(mat_vec(&p1, &unit(idx[pos])));
                }
                for pos in indices(rest) {
                    args.push(mat_vec(&p2, &unit(idx[pos])));
                }
                val += sign * x.eval_on(&args);
            }
            comp.c[m as usize] = val;
        }
        components.insert((pd, k - pd), comp);
    }
    Ok(BigradedSplit { components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::differential;
    use crate::poisson::{cartan_cocycles, casimirs};

    fn pt() -> Sl2Point {
        Sl2Point::new([0.7, -0.2, 0.3, 0.9, -0.5, 0.4])
    }

    #[test]
    fn transversality() {
        let p = pt();
        let fr = singular_frame(&p).unwrap();
        let (f1, f2) = casimirs();
        for (j, f) in [f1, f2].iter().enumerate() {
            let df = differential(f).at(&p.coords).unwrap();
            for i in 0..2 {
                let v = df.eval_on(&[fr.v[i]]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "df{}(V{}) = {}", j + 1, i + 1, v);
            }
        }
        let d = Sl2Point::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let fr = singular_frame(&d).unwrap();
        assert!((fr.v[0][0] - 0.5).abs() < 1e-15);
        assert!(matches!(singular_frame(&Sl2Point::origin()), Err(Error::OriginSingularity)));
    }

    #[test]
    fn omega_kernel_and_inverse_relation() {
        let p = pt();
        let fr = singular_frame(&p).unwrap();
        for i in 0..2 {
            let pi = pi_at(i, &p.coords);
            let s = sharp(&pi);
            let comp = mat_mul(&mat_mul(&s, &flat(&fr.omega[i])), &s);
            for r in 0..6 {
                for c in 0..6 {
                    assert!((comp[r][c] - s[r][c]).abs() < 1e-12);
                }
            }
            for j in 0..2 {
                let iv = fr.omega[i].contract_by(&AltValue::from_vector(Variance::Multivector, &fr.v[j]));
                assert!(iv.max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn split_examples() {
        let p = pt();
        let fr = singular_frame(&p).unwrap();
        let pi1 = pi_at(0, &p.coords);
        let s = bigrade_split(&pi1, &p).unwrap();
        assert_eq!(s.nonzero_bidegrees(1e-12), vec![(2, 0)]);
        let vv = AltValue::from_vector(Variance::Multivector, &fr.v[0])
            .wedge(&AltValue::from_vector(Variance::Multivector, &fr.v[1]));
        assert_eq!(bigrade_split(&vv, &p).unwrap().nonzero_bidegrees(1e-12), vec![(0, 2)]);
        let (cr, _) = cartan_cocycles();
        let crv = cr.at(&p.coords).unwrap();
        let sc = bigrade_split(&crv, &p).unwrap();
        let nz = sc.nonzero_bidegrees(1e-12);
        assert!(nz.contains(&(2, 1)));
        assert!(nz.iter().all(|b| *b == (2, 1) || *b == (3, 0)));
        assert!(sc.reconstruct(3).sub(&crv).max_abs() < 1e-12);
        // the (2,1) part is V1∧π1 + V2∧π2
        let v = |i: usize| AltValue::from_vector(Variance::Multivector, &fr.v[i]);
        let expect = v(0).wedge(&pi1).add(&v(1).wedge(&pi_at(1, &p.coords)));
        assert!(sc.components[&(2, 1)].sub(&expect).max_abs() < 1e-12);
    }
}
